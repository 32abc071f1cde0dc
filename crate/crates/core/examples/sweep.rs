//! A short range-difference sweep printed as CSV.
//!
//!     cargo run --release --example sweep -- 100

use ofdm_music::config::RunConfig;
use ofdm_music::harness::run_sweep;

fn main() -> ofdm_music::Result<()> {
    let cfg = RunConfig {
        n_trials: std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50),
        range_diff_step: 0.5,
        calibration_trials: 300,
        ..RunConfig::default()
    };
    let (setup, _) = cfg.calibrated_setup()?;
    let summary = run_sweep(&cfg.scenario(&setup.config)?, &setup)?;
    summary.write_csv(std::io::stdout().lock())
}
