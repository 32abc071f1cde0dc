//! Calibrate the CFAR scale on noise-only snapshots and check the resulting
//! false-alarm rate on fresh ones.

use ofdm_music::config::RunConfig;
use ofdm_music::harness::{calibrate_cfar, false_alarm_rate};

fn main() -> ofdm_music::Result<()> {
    let cfg = RunConfig::default();
    let mut setup = cfg.setup()?;
    let cal = calibrate_cfar(&setup, 2000, 1)?;
    setup.detector.cfar_scale = cal.scale;
    let rate = false_alarm_rate(&setup, 1000, 2)?;
    println!("p_FA = {}, kappa = {:.4}, measured false-alarm rate {rate:.4}", cal.p_fa, cal.scale);
    Ok(())
}
