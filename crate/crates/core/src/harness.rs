//! Monte Carlo scenarios and metrics.
//!
//! Two targets are placed either at a common base range with the second one
//! moved outwards by a swept range difference, or independently at random
//! ranges. Trials are seeded per index, so a sweep is reproducible regardless
//! of how many worker threads execute it.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{
    cancel_target, empirical_quantile, iteration_candidates, calibrate_scale, DetectionReport, Detection,
    DetectorConfig,
};
use crate::error::{Error, Result};
use crate::music::{coarse_grid, GridSpec, SteeringParams, Subspaces};
use crate::pipeline::{analyze, estimate};
use crate::signal::{noiseless_csi, synthesize_csi, RadioConfig, Target, TargetScene};
use crate::music::Pseudospectrum;
use crate::smoothing::SubarrayPlan;

/// How the two targets are placed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Common base range, second target moved out by each difference in turn.
    RangeSweep { diffs_m: Vec<f64> },
    /// Independent uniform ranges, one sweep point.
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_trials: usize,
    pub snr_db: f64,
    pub placement: Placement,
    /// Azimuths are drawn uniformly in `[-limit, limit]`.
    pub angle_limit_deg: f64,
    /// Base ranges are drawn uniformly in `(0, base_range_max_m)`.
    pub base_range_max_m: f64,
    /// Angle draws are repeated until the targets are at least this far apart.
    pub min_angle_separation_deg: f64,
    pub rng_seed: u64,
    /// Score only the nearer target.
    pub first_target_only: bool,
}

impl ScenarioSpec {
    /// Range differences `start, start + step, ..., stop`.
    pub fn sweep_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
        if !(step > 0.0) || stop < start {
            return Err(Error::Config(format!(
                "invalid sweep {start}..{stop} step {step}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // rounded so that decimal steps print cleanly
        Ok((0..n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("number of trials must be positive".to_string()));
        }
        if !(self.base_range_max_m > 0.0) {
            return Err(Error::Config("base range limit must be positive".to_string()));
        }
        if !(self.angle_limit_deg > 0.0 && self.angle_limit_deg < 90.0) {
            return Err(Error::Config("angle limit must lie in (0, 90) degrees".to_string()));
        }
        if self.min_angle_separation_deg >= 2.0 * self.angle_limit_deg {
            return Err(Error::Config("angle separation exceeds the drawable span".to_string()));
        }
        if let Placement::RangeSweep { diffs_m } = &self.placement {
            if diffs_m.is_empty() || diffs_m.iter().any(|d| !(*d >= 0.0)) {
                return Err(Error::Config("range differences must be nonnegative".to_string()));
            }
        }
        Ok(())
    }

    /// Sweep axis: range differences, or the SNR for free placement.
    pub fn x_values(&self) -> Vec<f64> {
        match &self.placement {
            Placement::RangeSweep { diffs_m } => diffs_m.clone(),
            Placement::Free => vec![self.snr_db],
        }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn trial_rng(seed: u64, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index as u64);
    rng
}

fn open_uniform<R: Rng>(rng: &mut R, max: f64) -> f64 {
    loop {
        let r = rng.random::<f64>() * max;
        if r > 0.0 {
            return r;
        }
    }
}

/// Random quantities of one trial shared by all sweep points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialDraw {
    pub ranges_m: [f64; 2],
    pub azimuths_rad: [f64; 2],
    pub phases_rad: [f64; 2],
    pub noise_seed: u64,
}

pub fn draw_trial(spec: &ScenarioSpec, trial_index: usize) -> TrialDraw {
    let mut rng = trial_rng(spec.rng_seed, trial_index);
    let base = open_uniform(&mut rng, spec.base_range_max_m);
    let other = open_uniform(&mut rng, spec.base_range_max_m);
    let limit = spec.angle_limit_deg.to_radians();
    let min_sep = spec.min_angle_separation_deg.to_radians();
    let azimuths = loop {
        let a = rng.random_range(-limit..=limit);
        let b = rng.random_range(-limit..=limit);
        if (a - b).abs() >= min_sep {
            break [a, b];
        }
    };
    let phases = [
        rng.random_range(0.0..std::f64::consts::TAU),
        rng.random_range(0.0..std::f64::consts::TAU),
    ];
    let ranges = match spec.placement {
        Placement::RangeSweep { .. } => [base, base],
        Placement::Free => [base.min(other), base.max(other)],
    };
    TrialDraw {
        ranges_m: ranges,
        azimuths_rad: azimuths,
        phases_rad: phases,
        noise_seed: rng.random(),
    }
}

/// `sigma^2 = P / 10^(snr/10)`, with `P` the mean power of the noiseless CSI.
pub fn noise_variance_for_snr(config: &RadioConfig, targets: &[Target], snr_db: f64) -> Result<f64> {
    let clean = noiseless_csi(config, targets)?;
    let power = clean.iter().map(|z| z.norm_sqr()).sum::<f64>() / clean.len() as f64;
    if !(power > 0.0) {
        return Err(Error::ZeroPower);
    }
    Ok(power / 10f64.powf(snr_db / 10.0))
}

/// Two-way free-space amplitude for a target at `range_m`.
fn path_gain(range_m: f64) -> f64 {
    (crate::signal::REFERENCE_RANGE_M / range_m).powi(2)
}

/// Scene for sweep point `x_index` of trial `trial_index`, with the noise
/// seed to synthesize it with. Targets are ordered nearest first.
pub fn generate_trial(
    spec: &ScenarioSpec,
    config: &RadioConfig,
    trial_index: usize,
    x_index: usize,
) -> Result<(TargetScene, RadioConfig, u64)> {
    let draw = draw_trial(spec, trial_index);
    let mut ranges = draw.ranges_m;
    if let Placement::RangeSweep { diffs_m } = &spec.placement {
        let diff = *diffs_m.get(x_index).ok_or_else(|| {
            Error::Config(format!("sweep point {x_index} out of range"))
        })?;
        ranges[1] += diff;
    }
    let targets = (0..2)
        .map(|q| {
            Target::new(
                ranges[q],
                draw.azimuths_rad[q],
                num_complex::Complex64::from_polar(path_gain(ranges[q]), draw.phases_rad[q]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let noise_variance = noise_variance_for_snr(config, &targets, spec.snr_db)?;
    let scene = TargetScene::new(targets, noise_variance)?;
    Ok((scene, config.clone(), mix_seed(draw.noise_seed, x_index as u64, 0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthTarget {
    pub range_m: f64,
    pub azimuth_rad: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetError {
    pub range_m: f64,
    /// `None` when the plan has no angular sensitivity.
    pub azimuth_deg: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub truth: Vec<TruthTarget>,
    pub report: DetectionReport,
    pub errors: Vec<TargetError>,
    pub missed: Vec<bool>,
}

impl TrialResult {
    pub fn any_missed(&self) -> bool {
        self.missed.iter().any(|m| *m)
    }
}

/// Coarse-grid estimates used when detections are missing.
pub trait FallbackEstimator {
    /// Maximum of the initial coarse grid.
    fn initial_max(&self) -> (f64, f64);
    /// Maximum of the coarse grid after canceling a target at `canceled`.
    fn residual_max(&self, canceled: (f64, f64)) -> (f64, f64);
    /// Whether angle estimates carry information.
    fn angular(&self) -> bool;
}

/// [`FallbackEstimator`] backed by the actual pseudospectrum.
pub struct SpectrumFallback<'a> {
    pub subspaces: &'a Subspaces,
    pub params: &'a SteeringParams,
    pub grid: &'a GridSpec,
}

impl FallbackEstimator for SpectrumFallback<'_> {
    fn initial_max(&self) -> (f64, f64) {
        let (r, t, _) = coarse_grid(self.subspaces, self.params, self.grid)
            .argmax()
            .unwrap_or((0.0, 0.0, 0.0));
        (r, t)
    }

    fn residual_max(&self, canceled: (f64, f64)) -> (f64, f64) {
        let det = Detection {
            range_m: canceled.0,
            azimuth_rad: canceled.1,
            spectrum_value: 0.0,
            iteration: 0,
        };
        let reduced;
        let subspaces = if self.subspaces.is_saturated() {
            self.subspaces
        } else {
            match cancel_target(self.subspaces, self.params, &det) {
                Ok(s) => {
                    reduced = s;
                    &reduced
                }
                Err(_) => self.subspaces,
            }
        };
        let (r, t, _) = coarse_grid(subspaces, self.params, self.grid)
            .argmax()
            .unwrap_or((0.0, 0.0, 0.0));
        (r, t)
    }

    fn angular(&self) -> bool {
        self.grid.angular()
    }
}

/// Assigns detections to ground truth (nearest estimate to the nearest
/// target, by range only) and scores them, substituting coarse-grid maxima
/// for missed detections. `truth` must be ordered nearest first.
pub fn assign_and_score(
    truth: &[TruthTarget],
    report: &DetectionReport,
    fallback: &dyn FallbackEstimator,
) -> TrialResult {
    let mut picks: Vec<&Detection> = report.detections.iter().collect();
    picks.sort_by(|a, b| b.spectrum_value.total_cmp(&a.spectrum_value));
    picks.truncate(truth.len());
    let mut estimates: Vec<(f64, f64)> = picks.iter().map(|d| (d.range_m, d.azimuth_rad)).collect();
    estimates.sort_by(|a, b| a.0.total_cmp(&b.0));
    if estimates.is_empty() && !truth.is_empty() {
        estimates.push(fallback.initial_max());
    }
    while estimates.len() < truth.len() {
        let first = estimates[0];
        estimates.push(fallback.residual_max(first));
    }
    let angular = fallback.angular();
    let errors = truth
        .iter()
        .zip(&estimates)
        .map(|(t, e)| TargetError {
            range_m: e.0 - t.range_m,
            azimuth_deg: angular.then(|| (e.1 - t.azimuth_rad).to_degrees()),
        })
        .collect();
    let n_det = report.detections.len();
    TrialResult {
        truth: truth.to_vec(),
        report: report.clone(),
        errors,
        missed: (0..truth.len()).map(|q| n_det <= q).collect(),
    }
}

/// RMSE after discarding the `trim` fraction of largest and smallest absolute
/// errors.
pub fn trimmed_rmse(errors: &[f64], trim: f64) -> Result<f64> {
    if errors.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: errors.len(),
        });
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let drop = (trim * abs.len() as f64).floor() as usize;
    let kept = &abs[drop..abs.len() - drop];
    Ok((kept.iter().map(|e| e * e).sum::<f64>() / kept.len() as f64).sqrt())
}

/// Configuration shared by every trial of a sweep.
#[derive(Clone, Debug)]
pub struct SweepSetup {
    pub config: RadioConfig,
    pub plan: SubarrayPlan,
    pub detector: DetectorConfig,
    /// Search span of the estimator, independent of the scenario draws.
    pub angle_limit_rad: f64,
}

pub fn run_trial(spec: &ScenarioSpec, setup: &SweepSetup, trial_index: usize, x_index: usize) -> Result<TrialResult> {
    let (scene, config, noise_seed) = generate_trial(spec, &setup.config, trial_index, x_index)?;
    let csi = synthesize_csi(&config, &scene, noise_seed)?;
    let est = estimate(&csi, &setup.plan, &setup.detector, setup.angle_limit_rad)?;
    let truth: Vec<TruthTarget> = scene
        .targets
        .iter()
        .map(|t| TruthTarget {
            range_m: t.range_m,
            azimuth_rad: t.azimuth_rad,
        })
        .collect();
    let fallback = SpectrumFallback {
        subspaces: &est.subspaces,
        params: &est.params,
        grid: &est.grid,
    };
    Ok(assign_and_score(&truth, &est.report, &fallback))
}

/// All trials of one sweep point, in trial order.
pub fn run_point(spec: &ScenarioSpec, setup: &SweepSetup, x_index: usize) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    (0..spec.n_trials)
        .into_par_iter()
        .map(|j| {
            run_trial(spec, setup, j, x_index).map_err(|e| Error::Trial {
                index: j,
                source: Box::new(e),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub p_missed: f64,
    pub rmse_range_m: f64,
    /// NaN when angles are not estimated.
    pub rmse_azimuth_deg: f64,
    pub n_trials: usize,
}

/// Fraction of trials with a missed target, and trimmed RMSEs over all
/// scored targets.
pub fn summarize(results: &[TrialResult], first_target_only: bool) -> Result<PointSummary> {
    let take = |r: &TrialResult| if first_target_only { 1 } else { r.errors.len() };
    let missed = results
        .iter()
        .filter(|r| r.missed.iter().take(take(r)).any(|m| *m))
        .count();
    let range_errors: Vec<f64> = results
        .iter()
        .flat_map(|r| r.errors.iter().take(take(r)).map(|e| e.range_m))
        .collect();
    let angle_errors: Vec<f64> = results
        .iter()
        .flat_map(|r| r.errors.iter().take(take(r)).filter_map(|e| e.azimuth_deg))
        .collect();
    let rmse_range_m = trimmed_rmse(&range_errors, 0.01)?;
    let rmse_azimuth_deg = if angle_errors.len() >= 3 {
        trimmed_rmse(&angle_errors, 0.01)?
    } else {
        f64::NAN
    };
    Ok(PointSummary {
        p_missed: missed as f64 / results.len().max(1) as f64,
        rmse_range_m,
        rmse_azimuth_deg,
        n_trials: results.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub x_axis: Vec<f64>,
    pub p_missed: Vec<f64>,
    pub rmse_range_m: Vec<f64>,
    pub rmse_azimuth_deg: Vec<f64>,
    pub n_trials: Vec<usize>,
    pub first_target_only: bool,
}

pub fn run_sweep(spec: &ScenarioSpec, setup: &SweepSetup) -> Result<SweepSummary> {
    spec.validate()?;
    setup.detector.validate()?;
    let xs = spec.x_values();
    let mut summary = SweepSummary {
        x_axis: xs.clone(),
        p_missed: Vec::with_capacity(xs.len()),
        rmse_range_m: Vec::with_capacity(xs.len()),
        rmse_azimuth_deg: Vec::with_capacity(xs.len()),
        n_trials: Vec::with_capacity(xs.len()),
        first_target_only: spec.first_target_only,
    };
    for i in 0..xs.len() {
        let results = run_point(spec, setup, i)?;
        let point = if results.len() >= 3 {
            summarize(&results, spec.first_target_only)?
        } else {
            // too few samples to trim: plain RMSE
            summarize_untrimmed(&results, spec.first_target_only)
        };
        summary.p_missed.push(point.p_missed);
        summary.rmse_range_m.push(point.rmse_range_m);
        summary.rmse_azimuth_deg.push(point.rmse_azimuth_deg);
        summary.n_trials.push(point.n_trials);
    }
    Ok(summary)
}

fn summarize_untrimmed(results: &[TrialResult], first_target_only: bool) -> PointSummary {
    let take = |r: &TrialResult| if first_target_only { 1 } else { r.errors.len() };
    let rms = |v: Vec<f64>| {
        if v.is_empty() {
            f64::NAN
        } else {
            (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt()
        }
    };
    PointSummary {
        p_missed: results
            .iter()
            .filter(|r| r.missed.iter().take(take(r)).any(|m| *m))
            .count() as f64
            / results.len().max(1) as f64,
        rmse_range_m: rms(results.iter().flat_map(|r| r.errors.iter().take(take(r)).map(|e| e.range_m)).collect()),
        rmse_azimuth_deg: rms(results
            .iter()
            .flat_map(|r| r.errors.iter().take(take(r)).filter_map(|e| e.azimuth_deg))
            .collect()),
        n_trials: results.len(),
    }
}

impl SweepSummary {
    pub const CSV_HEADER: &'static str = "x_value,p_missed,rmse_range_m,rmse_azimuth_deg,n_trials";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for i in 0..self.x_axis.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.x_axis[i], self.p_missed[i], self.rmse_range_m[i], self.rmse_azimuth_deg[i], self.n_trials[i]
            )?;
        }
        Ok(())
    }
}

/// Noise-only statistics used to set the CFAR scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scale: f64,
    pub p_fa: f64,
    pub n_trials: usize,
    pub seed: u64,
    /// Per trial: strongest refined peak over the grid quantile, 0 without a
    /// signal subspace.
    pub ratios: Vec<f64>,
}

fn noise_only_csi(config: &RadioConfig, seed: u64, trial: usize) -> Result<crate::signal::CsiMatrix> {
    synthesize_csi(config, &TargetScene::new(Vec::new(), 1.0)?, mix_seed(seed, trial as u64, 1))
}

/// Peak-to-quantile ratio of one noise-only snapshot.
pub fn noise_only_ratio(setup: &SweepSetup, seed: u64, trial: usize) -> Result<f64> {
    let csi = noise_only_csi(&setup.config, seed, trial)?;
    let (subspaces, params, grid) = analyze(&csi, &setup.plan, setup.angle_limit_rad)?;
    let subspaces = subspaces.with_min_order(setup.detector.min_search_order);
    if subspaces.is_saturated() {
        return Ok(0.0);
    }
    let coarse = coarse_grid(&subspaces, &params, &grid);
    let q = empirical_quantile(&coarse.flat_values(), 1.0 - setup.detector.p_fa)?;
    let spectrum = Pseudospectrum::new(&subspaces, &params);
    let n_seeds = setup.detector.seeds_per_iteration().max(setup.detector.n_start);
    let best = iteration_candidates(&spectrum, &coarse, &grid, n_seeds, &setup.detector)
        .first()
        .map(|c| c.value)
        .unwrap_or(0.0);
    Ok(best / q)
}

/// Monte Carlo calibration of the CFAR scale on noise-only scenes.
pub fn calibrate_cfar(setup: &SweepSetup, n_trials: usize, seed: u64) -> Result<Calibration> {
    let ratios = (0..n_trials)
        .into_par_iter()
        .map(|j| {
            noise_only_ratio(setup, seed, j).map_err(|e| Error::Trial {
                index: j,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Calibration {
        scale: calibrate_scale(&ratios, setup.detector.p_fa)?,
        p_fa: setup.detector.p_fa,
        n_trials,
        seed,
        ratios,
    })
}

/// Fraction of noise-only snapshots with at least one detection.
pub fn false_alarm_rate(setup: &SweepSetup, n_trials: usize, seed: u64) -> Result<f64> {
    let alarms = (0..n_trials)
        .into_par_iter()
        .map(|j| {
            let csi = noise_only_csi(&setup.config, seed, j)?;
            let est = estimate(&csi, &setup.plan, &setup.detector, setup.angle_limit_rad)?;
            Ok(!est.report.detections.is_empty())
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(alarms.iter().filter(|a| **a).count() as f64 / n_trials.max(1) as f64)
}
