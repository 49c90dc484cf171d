use lost_sim::channel::Reflector;
use lost_sim::config::presets;
use lost_sim::locate::Region;
use lost_sim::simkit::*;

#[test]
#[ignore]
fn probe_c3_paired() {
    let options = SweepOptions {
        tag_region: Some(Region { min: [1.5, 1.0, 2.03], max: [8.5, 6.0, 2.03] }),
        ..SweepOptions::default()
    };
    let values = [0.32e-6, 1.28e-6, 5.12e-6, 20.5e-6, 82e-6];
    for (coeff, pp) in [(0.22, 12.5), (0.24, 12.5), (0.26, 13.0)] {
        for seed in [101u64, 303, 909] {
            let mut cfg = presets::desk_scale();
            cfg.mode = LocalizationMode::Snapshot;
            cfg.geometry.reflectors.push(Reflector::Plane {
                point: [0.0, 0.0, 0.0],
                normal: [0.0, 0.0, 1.0],
                reflection_coefficient: coeff,
            });
            cfg.noise = NoiseModel::PerPulseSnr(pp);
            cfg.seed = seed;
            let table = sweep(&cfg, SweepVariable::IntegrationTime, &values, 120, &options).unwrap();
            let mut medians = Vec::new();
            for (_, rows) in group_by_value(&table) {
                let sub = MetricsTable { rows: rows.iter().map(|r| (*r).clone()).collect() };
                medians.push(error_cdf(&sub).median.unwrap_or(f64::NAN));
            }
            let top3 = &medians[2..5];
            let band = top3.iter().cloned().fold(0.0, f64::max) / top3.iter().cloned().fold(f64::MAX, f64::min);
            println!("coeff {coeff} pp {pp} seed {seed}: medians_cm = {:?} ratio = {:.2} band = {:.3}",
                medians.iter().map(|m| (m*1000.0).round()/10.0).collect::<Vec<_>>(),
                medians[0]/medians[4], band);
        }
    }
}
