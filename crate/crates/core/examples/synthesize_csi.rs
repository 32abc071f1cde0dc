//! Synthesize a noisy two-target CSI snapshot and save it in the binary format
//! read by `ofdm-music estimate`.
//!
//!     cargo run --example synthesize_csi -- /tmp/scene.bin

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use ofdm_music::harness::noise_variance_for_snr;
use ofdm_music::signal::{scene_coefficient, synthesize_csi, RadioConfig, Target, TargetScene};

fn main() -> ofdm_music::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("scene.bin"));
    let config = RadioConfig::reference();
    let targets = vec![
        Target::new(7.5, 15f64.to_radians(), scene_coefficient(7.5, 1)?)?,
        Target::new(11.0, (-30f64).to_radians(), scene_coefficient(11.0, 2)?)?,
    ];
    let sigma2 = noise_variance_for_snr(&config, &targets, 15.0)?;
    let csi = synthesize_csi(&config, &TargetScene::new(targets, sigma2)?, 42)?;

    csi.write_binary(BufWriter::new(File::create(&path)?))?;
    let power = csi.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / csi.data.len() as f64;
    println!(
        "{} x {} CSI, mean power {power:.3e}, noise variance {sigma2:.3e}, written to {}",
        csi.n_antennas(),
        csi.n_subcarriers(),
        path.display()
    );
    Ok(())
}
