//! Flat run configuration with symbol-style keys.
//!
//! Every key has a default matching the reference parametrization, so an
//! empty file is a valid configuration. Angles are in degrees.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::{DetectorConfig, Routine};
use crate::error::{Error, Result};
use crate::harness::{calibrate_cfar, mix_seed, Calibration, Placement, ScenarioSpec, SweepSetup};
use crate::music::unambiguous_range;
use crate::signal::RadioConfig;
use crate::smoothing::{make_plan, PlanParams, SubarrayPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    RangeSweep,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n_subcarriers: usize,
    pub delta_f: f64,
    pub f_c: f64,
    #[serde(rename = "K")]
    pub n_antennas: usize,
    /// Element spacing in metres, half a wavelength when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,

    #[serde(rename = "A_f")]
    pub aperture_f: usize,
    #[serde(rename = "A_a")]
    pub aperture_a: usize,
    #[serde(rename = "D_f")]
    pub decim_f: usize,
    #[serde(rename = "D_a")]
    pub decim_a: usize,
    #[serde(rename = "S_f")]
    pub stride_f: usize,
    #[serde(rename = "S_a")]
    pub stride_a: usize,

    #[serde(rename = "N_start")]
    pub n_start: usize,
    #[serde(rename = "p_FA")]
    pub p_fa: f64,
    pub routine: Routine,
    pub max_iterations: usize,
    /// Merge radius in range resolution cells.
    pub merge_radius_range: f64,
    /// Merge radius in angle resolution cells.
    pub merge_radius_angle: f64,
    pub powell_tol: f64,
    pub powell_max_iter: usize,
    /// CFAR scale. Calibrated on noise-only scenes when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub min_search_order: usize,
    pub theta_lim_deg: f64,

    #[serde(rename = "J")]
    pub n_trials: usize,
    #[serde(rename = "SNR_dB")]
    pub snr_db: f64,
    pub placement: PlacementKind,
    pub range_diff_start: f64,
    pub range_diff_stop: f64,
    pub range_diff_step: f64,
    /// Upper limit of the base range draw. Defaults to the unambiguous range,
    /// minus the largest range difference for range sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_range_max_m: Option<f64>,
    pub min_angle_separation_deg: f64,
    pub first_target_only: bool,
    pub calibration_trials: usize,
    pub seed: u64,

    pub out_dir: PathBuf,
    pub verbosity: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PlanParams::REFERENCE;
        let det = DetectorConfig::default();
        Self {
            n_subcarriers: 1500,
            delta_f: 60e3,
            f_c: 3.5e9,
            n_antennas: 4,
            d: None,
            aperture_f: p.aperture_f,
            aperture_a: p.aperture_a,
            decim_f: p.decim_f,
            decim_a: p.decim_a,
            stride_f: p.stride_f,
            stride_a: p.stride_a,
            n_start: det.n_start,
            p_fa: det.p_fa,
            routine: det.routine,
            max_iterations: det.max_iterations,
            merge_radius_range: det.merge_radius.0,
            merge_radius_angle: det.merge_radius.1,
            powell_tol: det.powell_tol,
            powell_max_iter: det.powell_max_iter,
            kappa: None,
            min_search_order: det.min_search_order,
            theta_lim_deg: 60.0,
            n_trials: 500,
            snr_db: 15.0,
            placement: PlacementKind::RangeSweep,
            range_diff_start: 0.0,
            range_diff_stop: 2.5,
            range_diff_step: 0.1,
            base_range_max_m: None,
            min_angle_separation_deg: 0.0,
            first_target_only: false,
            calibration_trials: 1000,
            seed: 1,
            out_dir: PathBuf::from("out"),
            verbosity: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let config = self.radio()?;
        self.plan_for(&config)?;
        self.detector().validate()?;
        self.scenario(&config)?.validate()?;
        if !(self.theta_lim_deg > 0.0 && self.theta_lim_deg < 90.0) {
            return Err(Error::Config(format!(
                "theta_lim_deg must lie in (0, 90), got {}",
                self.theta_lim_deg
            )));
        }
        Ok(())
    }

    pub fn radio(&self) -> Result<RadioConfig> {
        match self.d {
            Some(d) => RadioConfig::new(self.n_subcarriers, self.delta_f, self.f_c, self.n_antennas, d),
            None => RadioConfig::half_wavelength(self.n_subcarriers, self.delta_f, self.f_c, self.n_antennas),
        }
    }

    pub fn plan_params(&self) -> PlanParams {
        PlanParams {
            aperture_f: self.aperture_f,
            aperture_a: self.aperture_a,
            decim_f: self.decim_f,
            decim_a: self.decim_a,
            stride_f: self.stride_f,
            stride_a: self.stride_a,
        }
    }

    pub fn plan_for(&self, config: &RadioConfig) -> Result<SubarrayPlan> {
        make_plan(config, self.plan_params())
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            n_start: self.n_start,
            p_fa: self.p_fa,
            routine: self.routine,
            max_iterations: self.max_iterations,
            merge_radius: (self.merge_radius_range, self.merge_radius_angle),
            powell_tol: self.powell_tol,
            powell_max_iter: self.powell_max_iter,
            cfar_scale: self.kappa.unwrap_or(1.0),
            min_search_order: self.min_search_order,
        }
    }

    pub fn scenario(&self, config: &RadioConfig) -> Result<ScenarioSpec> {
        let r_max = unambiguous_range(config, &self.plan_for(config)?);
        let (placement, reach) = match self.placement {
            PlacementKind::RangeSweep => {
                let diffs = ScenarioSpec::sweep_values(
                    self.range_diff_start,
                    self.range_diff_stop,
                    self.range_diff_step,
                )?;
                let reach = diffs.iter().cloned().fold(0.0, f64::max);
                (Placement::RangeSweep { diffs_m: diffs }, reach)
            }
            PlacementKind::Free => (Placement::Free, 0.0),
        };
        Ok(ScenarioSpec {
            n_trials: self.n_trials,
            snr_db: self.snr_db,
            placement,
            angle_limit_deg: self.theta_lim_deg,
            base_range_max_m: self.base_range_max_m.unwrap_or(r_max - reach),
            min_angle_separation_deg: self.min_angle_separation_deg,
            rng_seed: self.seed,
            first_target_only: self.first_target_only,
        })
    }

    pub fn setup(&self) -> Result<SweepSetup> {
        let config = self.radio()?;
        let plan = self.plan_for(&config)?;
        Ok(SweepSetup {
            config,
            plan,
            detector: self.detector(),
            angle_limit_rad: self.theta_lim_deg.to_radians(),
        })
    }

    /// Setup with the CFAR scale filled in, calibrating it first if the
    /// configuration leaves it open.
    pub fn calibrated_setup(&self) -> Result<(SweepSetup, Option<Calibration>)> {
        let mut setup = self.setup()?;
        if self.kappa.is_some() {
            return Ok((setup, None));
        }
        let cal = calibrate_cfar(&setup, self.calibration_trials, mix_seed(self.seed, 0, 3))?;
        setup.detector.cfar_scale = cal.scale;
        Ok((setup, Some(cal)))
    }
}
