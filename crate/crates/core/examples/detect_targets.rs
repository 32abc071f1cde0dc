//! Run the three peak selection routines on one same-range scene.

use num_complex::Complex64;
use ofdm_music::detection::{DetectorConfig, Routine};
use ofdm_music::harness::{calibrate_cfar, SweepSetup};
use ofdm_music::music::DEFAULT_ANGLE_LIMIT_RAD;
use ofdm_music::pipeline::estimate;
use ofdm_music::signal::{synthesize_csi, RadioConfig, Target, TargetScene};
use ofdm_music::smoothing::{make_plan, PlanParams};

fn main() -> ofdm_music::Result<()> {
    let config = RadioConfig::reference();
    let plan = make_plan(&config, PlanParams::REFERENCE)?;
    let mut setup = SweepSetup {
        config: config.clone(),
        plan,
        detector: DetectorConfig::default(),
        angle_limit_rad: DEFAULT_ANGLE_LIMIT_RAD,
    };
    setup.detector.cfar_scale = calibrate_cfar(&setup, 500, 9)?.scale;
    println!("kappa = {:.4}", setup.detector.cfar_scale);

    let scene = TargetScene::new(
        vec![
            Target::new(9.0, 10f64.to_radians(), Complex64::new(1.0, 0.0))?,
            Target::new(9.0, (-35f64).to_radians(), Complex64::from_polar(0.6, 2.0))?,
        ],
        0.02,
    )?;
    let csi = synthesize_csi(&config, &scene, 11)?;
    for routine in [Routine::Off, Routine::Single, Routine::Multiple] {
        let mut detector = setup.detector.clone();
        detector.routine = routine;
        let est = estimate(&csi, &setup.plan, &detector, setup.angle_limit_rad)?;
        println!("{routine}: {} spectra", est.report.spectra_computed);
        for d in &est.report.detections {
            println!(
                "  {:.3} m {:+.2} deg (value {:.2e}, iteration {})",
                d.range_m,
                d.azimuth_rad.to_degrees(),
                d.spectrum_value,
                d.iteration
            );
        }
    }
    Ok(())
}
