//! Coarse-grid MUSIC pseudospectrum of a two-target scene, written as CSV.
//!
//!     cargo run --release --example music_spectrum -- /tmp/spectrum.csv

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use ofdm_music::music::{coarse_grid, DEFAULT_ANGLE_LIMIT_RAD};
use ofdm_music::pipeline::analyze;
use ofdm_music::signal::{synthesize_csi, RadioConfig, Target, TargetScene};
use ofdm_music::smoothing::{make_plan, PlanParams};
use num_complex::Complex64;

fn main() -> ofdm_music::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("spectrum.csv"));
    let config = RadioConfig::reference();
    let plan = make_plan(&config, PlanParams::REFERENCE)?;
    let scene = TargetScene::new(
        vec![
            Target::new(6.0, 20f64.to_radians(), Complex64::new(1.0, 0.0))?,
            Target::new(6.0, (-25f64).to_radians(), Complex64::new(0.0, 0.8))?,
        ],
        0.05,
    )?;
    let csi = synthesize_csi(&config, &scene, 3)?;
    let (subspaces, params, grid) = analyze(&csi, &plan, DEFAULT_ANGLE_LIMIT_RAD)?;
    println!("estimated order {}, noise basis {} columns", subspaces.order_estimate, subspaces.noise_basis.ncols());

    let spectrum = coarse_grid(&subspaces, &params, &grid);
    spectrum.write_csv(BufWriter::new(File::create(&path)?))?;
    for (r, t, v) in spectrum.top(4) {
        println!("  {r:6.2} m {:6.1} deg  {v:.3e}", t.to_degrees());
    }
    println!("{} grid points written to {}", grid.len(), path.display());
    Ok(())
}
