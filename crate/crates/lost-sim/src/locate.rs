//! Position estimation from TDOA measurements.
//!
//! Two estimators share the same hyperbolic measurement model (range
//! differences to a common reference anchor): a Levenberg-Marquardt snapshot
//! solver with an analytic Jacobian, and a constant-velocity particle filter
//! for tracking. Solves are 2D at a fixed height by default; 3D is a flag.

use crate::channel::{distance, Position};
use crate::error::{Error, Result};
use crate::tdoa::TdoaMeasurement;
use crate::SPEED_OF_LIGHT;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Anchor positions with the common TDOA reference.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    pub positions: Vec<Position>,
    /// Index of the receiver all TDOAs are referenced to.
    pub reference_index: usize,
}

impl AnchorSet {
    pub fn new(positions: Vec<Position>, reference_index: usize) -> Result<Self> {
        if reference_index >= positions.len() {
            return Err(Error::parameter("reference index out of range"));
        }
        Ok(AnchorSet {
            positions,
            reference_index,
        })
    }

    /// Check solvability for the given dimensionality.
    pub fn check_geometry(&self, dims: usize) -> Result<()> {
        let n = self.positions.len();
        let needed = dims + 1;
        if n < needed {
            return Err(Error::DegenerateGeometry(format!(
                "{n} anchors cannot support a {dims}D solution (need {needed})"
            )));
        }
        // Rank of the centered anchor cloud must reach `dims`.
        let mean = [
            self.positions.iter().map(|p| p[0]).sum::<f64>() / n as f64,
            self.positions.iter().map(|p| p[1]).sum::<f64>() / n as f64,
            self.positions.iter().map(|p| p[2]).sum::<f64>() / n as f64,
        ];
        let mut m = DMatrix::zeros(n, dims);
        for (i, p) in self.positions.iter().enumerate() {
            for d in 0..dims {
                m[(i, d)] = p[d] - mean[d];
            }
        }
        let svd = m.svd(false, false);
        let max_sv = svd.singular_values.max();
        let min_sv = svd.singular_values[dims - 1];
        if max_sv <= 0.0 || min_sv / max_sv < 1e-9 {
            return Err(Error::DegenerateGeometry(if dims == 2 {
                "anchors are collinear".into()
            } else {
                "anchors are coplanar".into()
            }));
        }
        Ok(())
    }
}

/// Snapshot position solution.
#[derive(Debug, Clone)]
pub struct PositionEstimate {
    pub position: Position,
    /// RMS of the range residuals at the solution, m.
    pub residual_rms: f64,
    pub iterations: usize,
    /// Gauss-Newton normal-matrix inverse scaled by residual variance
    /// (row-major `dims` x `dims`), m^2.
    pub covariance_proxy: Vec<f64>,
    /// Dimensionality of the solve (2 or 3).
    pub dims: usize,
    /// False when the iteration cap was reached before the step tolerance.
    pub converged: bool,
}

impl PositionEstimate {
    /// Predicted RMS position error from the covariance proxy, m.
    pub fn predicted_rms(&self) -> f64 {
        (0..self.dims)
            .map(|d| self.covariance_proxy[d * self.dims + d])
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// 2 = solve x,y at `fixed_height`; 3 = full 3D.
    pub dims: usize,
    /// Height used for 2D solves, m.
    pub fixed_height: f64,
    pub max_iterations: usize,
    /// Step-norm convergence tolerance, m.
    pub step_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dims: 2,
            fixed_height: 0.0,
            max_iterations: 100,
            step_tolerance: 1e-6,
        }
    }
}

/// Range residuals `c*tdoa_k - (|p - a_k| - |p - a_ref|)`, m.
pub fn tdoa_residuals(
    p: Position,
    anchors: &AnchorSet,
    measurements: &[TdoaMeasurement],
) -> Result<Vec<f64>> {
    let a_ref = anchors.positions[anchors.reference_index];
    let d_ref = distance(p, a_ref);
    measurements
        .iter()
        .map(|m| {
            if m.rx_pair.0 != anchors.reference_index {
                return Err(Error::parameter(format!(
                    "measurement pair {:?} does not use reference anchor {}",
                    m.rx_pair, anchors.reference_index
                )));
            }
            let a_k = anchors
                .positions
                .get(m.rx_pair.1)
                .ok_or_else(|| Error::parameter(format!("unknown anchor {}", m.rx_pair.1)))?;
            Ok(SPEED_OF_LIGHT * m.tdoa - (distance(p, *a_k) - d_ref))
        })
        .collect()
}

/// Analytic Jacobian of the residuals with respect to the position
/// (`dims` columns per row): `d r_k / d p = -(u_k - u_ref)`.
pub fn residual_jacobian(
    p: Position,
    anchors: &AnchorSet,
    measurements: &[TdoaMeasurement],
    dims: usize,
) -> Result<DMatrix<f64>> {
    let a_ref = anchors.positions[anchors.reference_index];
    let d_ref = distance(p, a_ref).max(1e-12);
    let mut jac = DMatrix::zeros(measurements.len(), dims);
    for (row, m) in measurements.iter().enumerate() {
        let a_k = anchors
            .positions
            .get(m.rx_pair.1)
            .ok_or_else(|| Error::parameter(format!("unknown anchor {}", m.rx_pair.1)))?;
        let d_k = distance(p, *a_k).max(1e-12);
        for d in 0..dims {
            let u_k = (p[d] - a_k[d]) / d_k;
            let u_ref = (p[d] - a_ref[d]) / d_ref;
            jac[(row, d)] = -(u_k - u_ref);
        }
    }
    Ok(jac)
}

/// Levenberg-Marquardt minimization of the TDOA residuals.
pub fn solve_position_lsq(
    measurements: &[TdoaMeasurement],
    anchors: &AnchorSet,
    initial: Position,
    cfg: &SolverConfig,
) -> Result<PositionEstimate> {
    let dims = cfg.dims;
    if dims != 2 && dims != 3 {
        return Err(Error::parameter("dims must be 2 or 3"));
    }
    anchors.check_geometry(dims)?;
    if measurements.len() < dims {
        return Err(Error::parameter(format!(
            "{} measurements cannot determine {dims} coordinates",
            measurements.len()
        )));
    }

    let mut p = initial;
    if dims == 2 {
        p[2] = cfg.fixed_height;
    }
    let mut lambda = 1e-3;
    let mut r = DVector::from_vec(tdoa_residuals(p, anchors, measurements)?);
    let mut cost = r.norm_squared();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let jac = residual_jacobian(p, anchors, measurements, dims)?;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;

        let mut damped = jtj.clone();
        for d in 0..dims {
            damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
        }
        let Some(step) = damped.lu().solve(&(-&jtr)) else {
            return Err(Error::DegenerateGeometry(
                "normal matrix is singular".into(),
            ));
        };

        let mut p_new = p;
        for d in 0..dims {
            p_new[d] += step[d];
        }
        let r_new = DVector::from_vec(tdoa_residuals(p_new, anchors, measurements)?);
        let cost_new = r_new.norm_squared();
        if cost_new <= cost {
            p = p_new;
            r = r_new;
            cost = cost_new;
            lambda = (lambda / 10.0).max(1e-12);
            if step.norm() < cfg.step_tolerance {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }

    // Covariance proxy from the undamped normal matrix at the solution.
    let jac = residual_jacobian(p, anchors, measurements, dims)?;
    let jtj = jac.transpose() * &jac;
    let m = measurements.len();
    let dof = m.saturating_sub(dims);
    let sigma2 = if dof > 0 {
        cost / dof as f64
    } else {
        cost / m as f64
    };
    let cov = jtj
        .try_inverse()
        .map(|inv| inv * sigma2)
        .unwrap_or_else(|| DMatrix::zeros(dims, dims));
    let covariance_proxy = (0..dims)
        .flat_map(|i| (0..dims).map(move |j| (i, j)))
        .map(|(i, j)| cov[(i, j)])
        .collect();

    Ok(PositionEstimate {
        position: p,
        residual_rms: (cost / m as f64).sqrt(),
        iterations,
        covariance_proxy,
        dims,
        converged,
    })
}

/// Weighted particle cloud with constant-velocity states.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    pub positions: Vec<Position>,
    pub velocities: Vec<Position>,
    pub weights: Vec<f64>,
    rng: ChaCha8Rng,
}

/// Particle-filter tuning.
#[derive(Debug, Clone, Copy)]
pub struct PfParams {
    /// Process (acceleration) noise std, m/s^2.
    pub process_noise: f64,
    /// Measurement residual std, m.
    pub meas_sigma: f64,
    /// 2 or 3 dimensions.
    pub dims: usize,
    /// Height for 2D tracking, m.
    pub fixed_height: f64,
}

impl Default for PfParams {
    fn default() -> Self {
        PfParams {
            process_noise: 0.5,
            meas_sigma: 0.02,
            dims: 2,
            fixed_height: 0.0,
        }
    }
}

/// Outcome flags of one filter step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok,
    /// Weights underflowed; the cloud was reset to uniform weights.
    Reinitialized,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Effective sample size 1 / sum(w^2).
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Weighted mean position.
    pub fn mean_position(&self) -> Position {
        let mut mean = [0.0; 3];
        for (p, w) in self.positions.iter().zip(self.weights.iter()) {
            for d in 0..3 {
                mean[d] += p[d] * w;
            }
        }
        mean
    }

    /// Weighted position covariance trace over the tracked dimensions, m^2.
    pub fn position_variance(&self, dims: usize) -> f64 {
        let mean = self.mean_position();
        let mut var = 0.0;
        for (p, w) in self.positions.iter().zip(self.weights.iter()) {
            for d in 0..dims {
                var += w * (p[d] - mean[d]).powi(2);
            }
        }
        var
    }
}

/// Axis-aligned prior region for particle initialization.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub min: Position,
    pub max: Position,
}

impl Region {
    pub fn contains(&self, p: Position) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] - 1e-9 && p[d] <= self.max[d] + 1e-9)
    }
}

/// Uniform particle cloud over `region` with zero velocities.
pub fn pf_init(n_particles: usize, region: &Region, seed: u64) -> Result<ParticleSet> {
    if n_particles < 1 {
        return Err(Error::parameter("n_particles must be >= 1"));
    }
    for d in 0..3 {
        if region.max[d] < region.min[d] {
            return Err(Error::parameter("empty prior region"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n_particles)
        .map(|_| {
            let mut p = [0.0; 3];
            for d in 0..3 {
                p[d] = if region.max[d] > region.min[d] {
                    rng.gen_range(region.min[d]..region.max[d])
                } else {
                    region.min[d]
                };
            }
            p
        })
        .collect();
    Ok(ParticleSet {
        positions,
        velocities: vec![[0.0; 3]; n_particles],
        weights: vec![1.0 / n_particles as f64; n_particles],
        rng,
    })
}

/// One predict/update/resample step.
///
/// With no measurements the step is prediction-only. Weight underflow resets
/// the weights uniformly and reports [`PfStatus::Reinitialized`].
pub fn pf_step(
    ps: &mut ParticleSet,
    measurements: &[TdoaMeasurement],
    anchors: &AnchorSet,
    dt: f64,
    params: &PfParams,
) -> Result<(PositionEstimate, PfStatus)> {
    let n = ps.len();
    if n == 0 {
        return Err(Error::parameter("empty particle set"));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dims = params.dims;

    // Constant-velocity prediction with white acceleration noise.
    for i in 0..n {
        for d in 0..dims {
            let a = normal.sample(&mut ps.rng) * params.process_noise;
            ps.positions[i][d] += ps.velocities[i][d] * dt + 0.5 * a * dt * dt;
            ps.velocities[i][d] += a * dt;
        }
        if dims == 2 {
            ps.positions[i][2] = params.fixed_height;
        }
    }

    let mut status = PfStatus::Ok;
    if !measurements.is_empty() {
        let inv_2s2 = 1.0 / (2.0 * params.meas_sigma * params.meas_sigma);
        let mut max_log = f64::NEG_INFINITY;
        let mut log_like = vec![0.0; n];
        for i in 0..n {
            let r = tdoa_residuals(ps.positions[i], anchors, measurements)?;
            let ll = -r.iter().map(|v| v * v).sum::<f64>() * inv_2s2;
            log_like[i] = ll;
            if ps.weights[i] > 0.0 {
                max_log = max_log.max(ll + ps.weights[i].ln());
            }
        }
        if !max_log.is_finite() {
            // Every particle's likelihood underflowed.
            ps.weights.fill(1.0 / n as f64);
            status = PfStatus::Reinitialized;
        } else {
            let mut total = 0.0;
            for i in 0..n {
                let w = if ps.weights[i] > 0.0 {
                    ((log_like[i] + ps.weights[i].ln()) - max_log).exp()
                } else {
                    0.0
                };
                ps.weights[i] = w;
                total += w;
            }
            if !(total > 0.0) || !total.is_finite() {
                ps.weights.fill(1.0 / n as f64);
                status = PfStatus::Reinitialized;
            } else {
                for w in ps.weights.iter_mut() {
                    *w /= total;
                }
            }
        }
    }

    if ps.effective_sample_size() < n as f64 / 2.0 {
        systematic_resample(ps);
    }

    let mean = ps.mean_position();
    let estimate = PositionEstimate {
        position: mean,
        residual_rms: if measurements.is_empty() {
            0.0
        } else {
            let r = tdoa_residuals(mean, anchors, measurements)?;
            (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
        },
        iterations: 1,
        covariance_proxy: {
            // Diagonal spread of the cloud as the uncertainty proxy.
            let m = ps.mean_position();
            let mut cov = vec![0.0; dims * dims];
            for (p, w) in ps.positions.iter().zip(ps.weights.iter()) {
                for d in 0..dims {
                    cov[d * dims + d] += w * (p[d] - m[d]).powi(2);
                }
            }
            cov
        },
        dims,
        converged: true,
    };
    Ok((estimate, status))
}

fn systematic_resample(ps: &mut ParticleSet) {
    let n = ps.len();
    let start: f64 = ps.rng.gen_range(0.0..1.0) / n as f64;
    let mut new_pos = Vec::with_capacity(n);
    let mut new_vel = Vec::with_capacity(n);
    let mut cum = ps.weights[0];
    let mut i = 0;
    for k in 0..n {
        let u = start + k as f64 / n as f64;
        while u > cum && i < n - 1 {
            i += 1;
            cum += ps.weights[i];
        }
        new_pos.push(ps.positions[i]);
        new_vel.push(ps.velocities[i]);
    }
    ps.positions = new_pos;
    ps.velocities = new_vel;
    ps.weights.fill(1.0 / n as f64);
}

/// Convenience: exact TDOA measurements for a tag position (test oracle and
/// particle-filter harness).
pub fn exact_measurements(tag: Position, anchors: &AnchorSet) -> Vec<TdoaMeasurement> {
    let a_ref = anchors.positions[anchors.reference_index];
    anchors
        .positions
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != anchors.reference_index)
        .map(|(k, a)| TdoaMeasurement {
            rx_pair: (anchors.reference_index, k),
            tdoa: (distance(tag, *a) - distance(tag, a_ref)) / SPEED_OF_LIGHT,
            peak_quality: f64::INFINITY,
            ambiguity_ratio: 0.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room_anchors() -> AnchorSet {
        AnchorSet::new(
            vec![
                [0.0, 0.0, 2.03],
                [10.0, 0.0, 2.03],
                [10.0, 7.0, 2.03],
                [0.0, 7.0, 2.03],
            ],
            0,
        )
        .unwrap()
    }

    fn cfg2d() -> SolverConfig {
        SolverConfig {
            dims: 2,
            fixed_height: 2.03,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn residuals_vanish_at_truth() {
        let anchors = room_anchors();
        let tag = [5.0, 3.5, 2.03];
        let meas = exact_measurements(tag, &anchors);
        let r = tdoa_residuals(tag, &anchors, &meas).unwrap();
        for v in r {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn residual_zero_on_perpendicular_bisector() {
        let anchors = AnchorSet::new(
            vec![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [5.0, 7.0, 0.0]],
            0,
        )
        .unwrap();
        let meas = vec![TdoaMeasurement {
            rx_pair: (0, 1),
            tdoa: 0.0,
            peak_quality: f64::INFINITY,
            ambiguity_ratio: 0.0,
        }];
        // Any point with x = 5 is equidistant from anchors 0 and 1.
        let r = tdoa_residuals([5.0, 2.2, 0.0], &anchors, &meas).unwrap();
        assert!(r[0].abs() < 1e-12);
    }

    #[test]
    fn residuals_match_bruteforce_oracle() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let anchors = room_anchors();
        for _ in 0..50 {
            let tag = [
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.0..7.0),
                rng.gen_range(0.0..3.0),
            ];
            let p = [
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.0..7.0),
                rng.gen_range(0.0..3.0),
            ];
            let meas = exact_measurements(tag, &anchors);
            let r = tdoa_residuals(p, &anchors, &meas).unwrap();
            for (m, got) in meas.iter().zip(r.iter()) {
                let a = anchors.positions[m.rx_pair.1];
                let a_ref = anchors.positions[0];
                let expect = SPEED_OF_LIGHT * m.tdoa - (distance(p, a) - distance(p, a_ref));
                assert!((got - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unknown_anchor_rejected() {
        let anchors = room_anchors();
        let meas = vec![TdoaMeasurement {
            rx_pair: (0, 9),
            tdoa: 0.0,
            peak_quality: 0.0,
            ambiguity_ratio: 0.0,
        }];
        assert!(tdoa_residuals([1.0, 1.0, 0.0], &anchors, &meas).is_err());
    }

    #[test]
    fn lsq_recovers_noise_free_position() {
        let anchors = room_anchors();
        let tag = [5.0, 3.5, 2.03];
        let meas = exact_measurements(tag, &anchors);
        let est = solve_position_lsq(&meas, &anchors, [2.0, 2.0, 2.03], &cfg2d()).unwrap();
        let err = distance(est.position, tag);
        assert!(err < 1e-4, "error {err:.2e} m");
        assert!(est.converged);
    }

    #[test]
    fn lsq_initialized_at_truth_stays_put() {
        let anchors = room_anchors();
        let tag = [3.0, 5.0, 2.03];
        let meas = exact_measurements(tag, &anchors);
        let est = solve_position_lsq(&meas, &anchors, tag, &cfg2d()).unwrap();
        assert!(est.iterations <= 1, "{} iterations", est.iterations);
        assert!(distance(est.position, tag) < 1e-9);
    }

    #[test]
    fn lsq_detects_collinear_anchors() {
        let anchors = AnchorSet::new(
            vec![[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [10.0, 0.0, 0.0]],
            0,
        )
        .unwrap();
        let meas = exact_measurements([3.0, 4.0, 0.0], &anchors);
        let r = solve_position_lsq(&meas, &anchors, [1.0, 1.0, 0.0], &cfg2d());
        assert!(matches!(r, Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        use rand::Rng;
        let anchors = room_anchors();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..100 {
            let tag = [
                rng.gen_range(0.5..9.5),
                rng.gen_range(0.5..6.5),
                rng.gen_range(0.0..3.0),
            ];
            let p = [
                rng.gen_range(0.5..9.5),
                rng.gen_range(0.5..6.5),
                2.03,
            ];
            let meas = exact_measurements(tag, &anchors);
            let jac = residual_jacobian(p, &anchors, &meas, 2).unwrap();
            for d in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += h;
                pm[d] -= h;
                let rp = tdoa_residuals(pp, &anchors, &meas).unwrap();
                let rm = tdoa_residuals(pm, &anchors, &meas).unwrap();
                for (row, (a, b)) in rp.iter().zip(rm.iter()).enumerate() {
                    let fd = (a - b) / (2.0 * h);
                    let an = jac[(row, d)];
                    let scale = an.abs().max(1e-6);
                    assert!(
                        (fd - an).abs() / scale < 1e-5,
                        "row {row} dim {d}: analytic {an}, fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn lsq_translation_equivariance() {
        let anchors = room_anchors();
        let tag = [6.0, 2.0, 2.03];
        let meas = exact_measurements(tag, &anchors);
        let est0 = solve_position_lsq(&meas, &anchors, [5.0, 3.0, 2.03], &cfg2d()).unwrap();

        let v = [13.0, -4.0, 0.0];
        let shifted = AnchorSet::new(
            anchors
                .positions
                .iter()
                .map(|p| [p[0] + v[0], p[1] + v[1], p[2] + v[2]])
                .collect(),
            0,
        )
        .unwrap();
        let tag_s = [tag[0] + v[0], tag[1] + v[1], tag[2]];
        let meas_s = exact_measurements(tag_s, &shifted);
        let est1 = solve_position_lsq(
            &meas_s,
            &shifted,
            [5.0 + v[0], 3.0 + v[1], 2.03],
            &cfg2d(),
        )
        .unwrap();
        for d in 0..2 {
            assert!(
                (est1.position[d] - est0.position[d] - v[d]).abs() < 1e-6,
                "dim {d}"
            );
        }
    }

    #[test]
    fn lsq_covariance_consistent_with_monte_carlo() {
        let anchors = room_anchors();
        let tag = [4.0, 3.0, 2.03];
        let sigma_d = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let normal = Normal::new(0.0, sigma_d / SPEED_OF_LIGHT).unwrap();
        let mut sq_err = 0.0;
        let mut predicted = 0.0;
        let trials = 500;
        for _ in 0..trials {
            let mut meas = exact_measurements(tag, &anchors);
            for m in meas.iter_mut() {
                m.tdoa += normal.sample(&mut rng);
            }
            let est = solve_position_lsq(&meas, &anchors, [5.0, 3.5, 2.03], &cfg2d()).unwrap();
            sq_err += (est.position[0] - tag[0]).powi(2) + (est.position[1] - tag[1]).powi(2);
            predicted += est.predicted_rms();
        }
        let rmse = (sq_err / trials as f64).sqrt();
        let pred = predicted / trials as f64;
        assert!(
            rmse > 0.5 * pred && rmse < 2.0 * pred,
            "rmse {rmse:.4} m vs predicted {pred:.4} m"
        );
    }

    #[test]
    fn pf_init_basics() {
        let region = Region {
            min: [0.0, 0.0, 2.03],
            max: [10.0, 7.0, 2.03],
        };
        let one = pf_init(1, &region, 3).unwrap();
        assert_eq!(one.weights, vec![1.0]);

        let ps = pf_init(2000, &region, 3).unwrap();
        assert!(ps.positions.iter().all(|p| region.contains(*p)));
        let again = pf_init(2000, &region, 3).unwrap();
        assert_eq!(ps.positions, again.positions);
        let other = pf_init(2000, &region, 4).unwrap();
        assert_ne!(ps.positions, other.positions);
    }

    #[test]
    fn pf_prediction_only_moves_by_velocity() {
        let region = Region {
            min: [0.0, 0.0, 0.0],
            max: [10.0, 7.0, 0.0],
        };
        let anchors = room_anchors();
        let mut ps = pf_init(4000, &region, 9).unwrap();
        for v in ps.velocities.iter_mut() {
            *v = [1.0, -0.5, 0.0];
        }
        let before = ps.mean_position();
        let params = PfParams {
            process_noise: 0.05,
            ..PfParams::default()
        };
        let (est, status) = pf_step(&mut ps, &[], &anchors, 0.5, &params).unwrap();
        assert_eq!(status, PfStatus::Ok);
        assert!((est.position[0] - (before[0] + 0.5)).abs() < 0.01);
        assert!((est.position[1] - (before[1] - 0.25)).abs() < 0.01);
    }

    #[test]
    fn pf_converges_on_static_tag() {
        let region = Region {
            min: [0.0, 0.0, 2.03],
            max: [10.0, 7.0, 2.03],
        };
        let anchors = room_anchors();
        let tag = [6.5, 2.5, 2.03];
        let meas = exact_measurements(tag, &anchors);
        let mut ps = pf_init(2000, &region, 17).unwrap();
        let params = PfParams {
            process_noise: 0.5,
            meas_sigma: 0.02,
            dims: 2,
            fixed_height: 2.03,
        };
        let mut last = [0.0; 3];
        for _ in 0..50 {
            let (est, _) = pf_step(&mut ps, &meas, &anchors, 0.2, &params).unwrap();
            last = est.position;
            let sum: f64 = ps.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "weights sum {sum}");
            assert!(ps.effective_sample_size() >= ps.len() as f64 / 2.0 - 1e-9);
        }
        let err = ((last[0] - tag[0]).powi(2) + (last[1] - tag[1]).powi(2)).sqrt();
        assert!(err < 0.01, "PF error {err:.4} m");
    }

    #[test]
    fn pf_agrees_with_lsq_when_noise_vanishes() {
        let region = Region {
            min: [0.0, 0.0, 2.03],
            max: [10.0, 7.0, 2.03],
        };
        let anchors = room_anchors();
        let tag = [2.5, 5.0, 2.03];
        let meas = exact_measurements(tag, &anchors);
        let lsq = solve_position_lsq(&meas, &anchors, [5.0, 3.5, 2.03], &cfg2d()).unwrap();
        let mut ps = pf_init(2000, &region, 29).unwrap();
        let params = PfParams {
            process_noise: 0.2,
            meas_sigma: 0.005,
            dims: 2,
            fixed_height: 2.03,
        };
        let mut est = [0.0; 3];
        for _ in 0..100 {
            let (e, _) = pf_step(&mut ps, &meas, &anchors, 0.2, &params).unwrap();
            est = e.position;
        }
        let gap = ((est[0] - lsq.position[0]).powi(2) + (est[1] - lsq.position[1]).powi(2)).sqrt();
        assert!(gap < 0.02, "PF vs LSQ gap {gap:.4} m");
    }

    #[test]
    fn pf_weight_underflow_reinitializes() {
        let region = Region {
            min: [0.0, 0.0, 0.0],
            max: [1.0, 1.0, 0.0],
        };
        let anchors = room_anchors();
        // Absurd measurement drives every log-likelihood to -inf.
        let meas = vec![TdoaMeasurement {
            rx_pair: (0, 1),
            tdoa: 1e200,
            peak_quality: f64::INFINITY,
            ambiguity_ratio: 0.0,
        }];
        let mut ps = pf_init(100, &region, 31).unwrap();
        let params = PfParams {
            process_noise: 0.0,
            meas_sigma: 1e-9,
            dims: 2,
            fixed_height: 0.0,
        };
        let (_, status) = pf_step(&mut ps, &meas, &anchors, 0.1, &params).unwrap();
        assert_eq!(status, PfStatus::Reinitialized);
        let sum: f64 = ps.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}
