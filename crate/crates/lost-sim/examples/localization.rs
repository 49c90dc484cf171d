//! Snapshot least-squares multilateration and particle-filter tracking on
//! the same TDOA stream.
//!
//! Run: cargo run --release --example localization

use lost_sim::locate::{
    exact_measurements, pf_init, pf_step, solve_position_lsq, AnchorSet, PfParams, Region,
    SolverConfig,
};
use lost_sim::SPEED_OF_LIGHT;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> lost_sim::Result<()> {
    let anchors = AnchorSet::new(
        vec![
            [0.0, 0.0, 2.03],
            [10.0, 0.0, 2.03],
            [10.0, 7.0, 2.03],
            [0.0, 7.0, 2.03],
        ],
        0,
    )?;
    let tag = [6.2, 2.9, 2.03];
    let solver = SolverConfig {
        dims: 2,
        fixed_height: 2.03,
        ..SolverConfig::default()
    };

    // Snapshot solve from noisy measurements.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let sigma_d = 0.01; // 1 cm ranging noise
    let noise = Normal::new(0.0, sigma_d / SPEED_OF_LIGHT).unwrap();
    let mut meas = exact_measurements(tag, &anchors);
    for m in meas.iter_mut() {
        m.tdoa += noise.sample(&mut rng);
    }
    let est = solve_position_lsq(&meas, &anchors, [5.0, 3.5, 2.03], &solver)?;
    println!(
        "LSQ: ({:.3}, {:.3}) m after {} iterations, residual rms {:.4} m",
        est.position[0], est.position[1], est.iterations, est.residual_rms
    );
    println!(
        "     error {:.1} mm, predicted rms {:.1} mm",
        1e3 * ((est.position[0] - tag[0]).powi(2) + (est.position[1] - tag[1]).powi(2)).sqrt(),
        1e3 * est.predicted_rms()
    );

    // Particle filter tracking the same tag over repeated noisy snapshots.
    let region = Region {
        min: [0.0, 0.0, 2.03],
        max: [10.0, 7.0, 2.03],
    };
    let mut particles = pf_init(2000, &region, 9)?;
    let params = PfParams {
        process_noise: 0.5,
        meas_sigma: 0.02,
        dims: 2,
        fixed_height: 2.03,
    };
    println!("\nPF convergence (2000 particles, 2 cm measurement sigma):");
    for step in 0..12 {
        let mut meas = exact_measurements(tag, &anchors);
        for m in meas.iter_mut() {
            m.tdoa += noise.sample(&mut rng);
        }
        let (est, _) = pf_step(&mut particles, &meas, &anchors, 0.2, &params)?;
        let err =
            ((est.position[0] - tag[0]).powi(2) + (est.position[1] - tag[1]).powi(2)).sqrt();
        println!(
            "  step {step:2}: estimate ({:.3}, {:.3}) m, error {:5.1} mm, ess {:.0}",
            est.position[0],
            est.position[1],
            err * 1e3,
            particles.effective_sample_size()
        );
    }
    Ok(())
}
