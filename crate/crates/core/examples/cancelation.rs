//! Remove a detected target from the pseudospectrum without a new
//! eigendecomposition and show what is left.

use num_complex::Complex64;
use ofdm_music::detection::{cancel_target, Detection};
use ofdm_music::music::{coarse_grid, Pseudospectrum, DEFAULT_ANGLE_LIMIT_RAD};
use ofdm_music::pipeline::analyze;
use ofdm_music::signal::{synthesize_csi, RadioConfig, Target, TargetScene};
use ofdm_music::smoothing::{make_plan, PlanParams};

fn main() -> ofdm_music::Result<()> {
    let config = RadioConfig::reference();
    let plan = make_plan(&config, PlanParams::REFERENCE)?;
    let scene = TargetScene::new(
        vec![
            Target::new(5.0, 0.2, Complex64::new(1.0, 0.0))?,
            Target::new(12.0, -0.4, Complex64::new(0.3, 0.0))?,
        ],
        0.0,
    )?;
    let csi = synthesize_csi(&config, &scene, 0)?;
    let (subspaces, params, grid) = analyze(&csi, &plan, DEFAULT_ANGLE_LIMIT_RAD)?;

    let first = Detection {
        range_m: 5.0,
        azimuth_rad: 0.2,
        spectrum_value: 0.0,
        iteration: 0,
    };
    let reduced = cancel_target(&subspaces, &params, &first)?;
    let before = Pseudospectrum::new(&subspaces, &params);
    let after = Pseudospectrum::new(&reduced, &params);
    for (r, t) in [(5.0, 0.2), (12.0, -0.4)] {
        println!(
            "at {r} m, {:+.1} deg: {:.3e} -> {:.3e}",
            f64::to_degrees(t),
            before.value(r, t),
            after.value(r, t)
        );
    }
    if let Some((r, t, v)) = coarse_grid(&reduced, &params, &grid).argmax() {
        println!("residual grid maximum {r:.2} m {:+.1} deg ({v:.3e})", t.to_degrees());
    }
    Ok(())
}
