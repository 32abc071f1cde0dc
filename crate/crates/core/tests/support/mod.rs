#![allow(dead_code)]

pub mod invariants;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ofdm_music::detection::DetectorConfig;
use ofdm_music::harness::{calibrate_cfar, SweepSetup};
use ofdm_music::music::DEFAULT_ANGLE_LIMIT_RAD;
use ofdm_music::signal::RadioConfig;
use ofdm_music::smoothing::{make_plan, PlanParams};

pub fn setup(config: RadioConfig, params: PlanParams, detector: DetectorConfig) -> SweepSetup {
    let plan = make_plan(&config, params).expect("valid plan");
    SweepSetup {
        config,
        plan,
        detector,
        angle_limit_rad: DEFAULT_ANGLE_LIMIT_RAD,
    }
}

pub fn reference_setup() -> SweepSetup {
    setup(RadioConfig::reference(), PlanParams::REFERENCE, DetectorConfig::default())
}

/// Same setup with the CFAR scale calibrated on `n` noise-only scenes.
pub fn calibrated(mut s: SweepSetup, n: usize, seed: u64) -> SweepSetup {
    s.detector.cfar_scale = calibrate_cfar(&s, n, seed).expect("calibration").scale;
    s
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// Numerical rank from the singular values of `a`: the count of squared
/// singular values above `rel` times the largest one.
pub fn numerical_rank(a: &DMatrix<Complex64>, rel: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s * s > rel * top * top).count()
}
