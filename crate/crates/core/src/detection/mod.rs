//! Peak search, CFAR gating and coherent target cancelation.
//!
//! Each detection iteration evaluates the pseudospectrum on the coarse grid,
//! refines the strongest grid points with Powell's method, merges refined
//! peaks closer than a quarter resolution cell and keeps the ones above the
//! CFAR threshold. Between iterations, detected targets are removed by
//! appending their (noise-orthogonalized) steering vectors to the noise basis,
//! which avoids recomputing the eigendecomposition.

pub mod cfar;
pub mod powell;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::music::{coarse_grid, decimated_steering, GridSpec, Pseudospectrum, SpectrumGrid, SteeringParams, Subspaces};

pub use cfar::{calibrate_scale, cfar_threshold, empirical_quantile};
pub use powell::{powell_maximize, Bounds, PowellOptions, PowellResult};

/// Peak selection routine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Routine {
    /// One seed per iteration, cancel after each detection.
    Single,
    /// `n_start` seeds per iteration, cancel all detections before the next.
    Multiple,
    /// `n_start` seeds, a single iteration, no cancelation.
    Off,
}

impl fmt::Display for Routine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Routine::Single => "single",
            Routine::Multiple => "multiple",
            Routine::Off => "off",
        })
    }
}

impl FromStr for Routine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Routine::Single),
            "multiple" => Ok(Routine::Multiple),
            "off" => Ok(Routine::Off),
            other => Err(Error::Config(format!(
                "unknown routine '{other}', expected single, multiple or off"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub n_start: usize,
    pub p_fa: f64,
    pub routine: Routine,
    pub max_iterations: usize,
    /// Merge radius as fractions of the range and angle resolution.
    pub merge_radius: (f64, f64),
    pub powell_tol: f64,
    pub powell_max_iter: usize,
    /// CFAR calibration scale `kappa`.
    pub cfar_scale: f64,
    /// Smallest signal subspace searched. With 1, a scene for which order
    /// selection finds no signal still gets a spectrum with structure and
    /// presence is decided by the CFAR gate.
    pub min_search_order: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            n_start: 10,
            p_fa: 0.01,
            routine: Routine::Multiple,
            max_iterations: 8,
            merge_radius: (0.25, 0.25),
            powell_tol: 1e-9,
            powell_max_iter: 50,
            cfar_scale: 1.0,
            min_search_order: 1,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_start == 0 || self.max_iterations == 0 || self.powell_max_iter == 0 {
            return Err(Error::Config(
                "N_start, max_iterations and powell_max_iter must be positive".to_string(),
            ));
        }
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::Config(format!("p_FA must lie in (0, 1), got {}", self.p_fa)));
        }
        if !(self.powell_tol > 0.0) {
            return Err(Error::Config("powell_tol must be positive".to_string()));
        }
        if !(self.cfar_scale >= 1.0) {
            return Err(Error::Config(format!(
                "CFAR scale must be at least 1, got {}",
                self.cfar_scale
            )));
        }
        Ok(())
    }

    /// Seeds refined per iteration.
    pub fn seeds_per_iteration(&self) -> usize {
        match self.routine {
            Routine::Single => 1,
            Routine::Multiple | Routine::Off => self.n_start,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub spectrum_value: f64,
    pub iteration: usize,
}

/// A refined peak before gating.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub value: f64,
    pub seed_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub threshold: f64,
    /// Merged candidates, strongest first.
    pub candidates: Vec<Candidate>,
    pub accepted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detections: Vec<Detection>,
    /// Smallest threshold applied in any iteration.
    pub threshold_used: f64,
    pub routine: Routine,
    pub spectra_computed: usize,
    /// Detection stopped because the noise basis filled the whole space.
    pub saturated: bool,
    pub trace: Vec<IterationTrace>,
}

impl DetectionReport {
    /// `{routine, gamma, detections: [{range_m, azimuth_deg, value, iteration}], spectra_computed}`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "routine": self.routine.to_string(),
            "gamma": self.threshold_used,
            "detections": self.detections.iter().map(|d| serde_json::json!({
                "range_m": d.range_m,
                "azimuth_deg": d.azimuth_rad.to_degrees(),
                "value": d.spectrum_value,
                "iteration": d.iteration,
            })).collect::<Vec<_>>(),
            "spectra_computed": self.spectra_computed,
        })
    }
}

/// Adds the steering vector of `det`, orthogonalized against the current
/// noise basis and normalized, as a new noise basis column.
pub fn cancel_target(subspaces: &Subspaces, params: &SteeringParams, det: &Detection) -> Result<Subspaces> {
    let c = decimated_steering(params, det.range_m, det.azimuth_rad)?;
    let m = c.len();
    let basis = &subspaces.noise_basis;
    let threshold = 1e-8 * (m as f64).sqrt();
    let mut resid = &c - basis * basis.ad_mul(&c);
    // second pass keeps the extended basis orthonormal to working precision
    let correction = basis * basis.ad_mul(&resid);
    resid -= correction;
    let norm = resid.norm();
    if norm <= threshold {
        return Err(Error::AlreadyCanceled {
            residual: norm,
            threshold,
        });
    }
    let mut noise_basis = DMatrix::zeros(m, basis.ncols() + 1);
    noise_basis.columns_mut(0, basis.ncols()).copy_from(basis);
    noise_basis.set_column(basis.ncols(), &(resid / num_complex::Complex64::new(norm, 0.0)));
    Ok(Subspaces {
        noise_basis,
        signal_basis: subspaces.signal_basis.clone(),
        eigenvalues: subspaces.eigenvalues.clone(),
        order_estimate: subspaces.order_estimate,
    })
}

/// Refines a grid seed with Powell's method on the log pseudospectrum.
pub fn refine(
    spectrum: &Pseudospectrum<'_>,
    grid: &GridSpec,
    seed: (f64, f64),
    config: &DetectorConfig,
) -> Candidate {
    let upper_r = grid.max_range_m * (1.0 - 1e-12);
    let objective_value = |r: f64, t: f64| spectrum.value(r, t);
    let options = |scales: Vec<f64>| PowellOptions {
        scales,
        tol: config.powell_tol,
        max_iter: config.powell_max_iter,
        line_tol: 1e-7,
    };
    let seed_value = objective_value(seed.0, seed.1);
    let (r, t) = if grid.angular() {
        let bounds = Bounds::new(
            vec![0.0, -grid.angle_limit_rad],
            vec![upper_r, grid.angle_limit_rad],
        );
        let res = powell_maximize(
            |x: &[f64]| objective_value(x[0], x[1]).ln(),
            &[seed.0, seed.1],
            &bounds,
            &options(vec![grid.range_resolution_m / 2.0, grid.angle_resolution_rad / 2.0]),
        );
        (res.point[0], res.point[1])
    } else {
        let bounds = Bounds::new(vec![0.0], vec![upper_r]);
        let res = powell_maximize(
            |x: &[f64]| objective_value(x[0], seed.1).ln(),
            &[seed.0],
            &bounds,
            &options(vec![grid.range_resolution_m / 2.0]),
        );
        (res.point[0], seed.1)
    };
    let value = objective_value(r, t);
    if value >= seed_value {
        Candidate {
            range_m: r,
            azimuth_rad: t,
            value,
            seed_value,
        }
    } else {
        Candidate {
            range_m: seed.0,
            azimuth_rad: seed.1,
            value: seed_value,
            seed_value,
        }
    }
}

/// Neighborhood within which two peaks count as the same target. Range
/// distance wraps around the unambiguous range, where the spectrum repeats.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeWindow {
    pub range_m: f64,
    pub angle_rad: f64,
    pub period_m: f64,
}

impl MergeWindow {
    pub fn contains(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let dr = (a.0 - b.0).abs() % self.period_m;
        dr.min(self.period_m - dr) < self.range_m && (a.1 - b.1).abs() < self.angle_rad
    }
}

/// Merge window scaled from the configured fractions of a resolution cell.
pub fn merge_radius(grid: &GridSpec, config: &DetectorConfig) -> MergeWindow {
    MergeWindow {
        range_m: config.merge_radius.0 * grid.range_resolution_m,
        angle_rad: if grid.angular() {
            config.merge_radius.1 * grid.angle_resolution_rad
        } else {
            f64::INFINITY
        },
        period_m: grid.max_range_m,
    }
}

/// Keeps the strongest of any group of candidates inside a common window.
/// Output is sorted strongest first.
pub fn merge_candidates(mut candidates: Vec<Candidate>, window: MergeWindow) -> Vec<Candidate> {
    candidates.sort_by(|a, b| b.value.total_cmp(&a.value));
    let mut kept: Vec<Candidate> = Vec::with_capacity(candidates.len());
    for c in candidates {
        if !kept
            .iter()
            .any(|k| window.contains((k.range_m, k.azimuth_rad), (c.range_m, c.azimuth_rad)))
        {
            kept.push(c);
        }
    }
    kept
}

/// Seeds, refines and merges one iteration's candidates.
pub fn iteration_candidates(
    spectrum: &Pseudospectrum<'_>,
    coarse: &SpectrumGrid,
    grid: &GridSpec,
    n_seeds: usize,
    config: &DetectorConfig,
) -> Vec<Candidate> {
    let refined = coarse
        .top(n_seeds)
        .into_iter()
        .map(|(r, t, _)| refine(spectrum, grid, (r, t), config))
        .collect();
    merge_candidates(refined, merge_radius(grid, config))
}

/// Runs the configured peak selection routine.
pub fn detect(
    subspaces: &Subspaces,
    params: &SteeringParams,
    grid: &GridSpec,
    config: &DetectorConfig,
) -> Result<DetectionReport> {
    config.validate()?;
    let window = merge_radius(grid, config);
    let iterations = match config.routine {
        Routine::Off => 1,
        _ => config.max_iterations,
    };
    let mut current = subspaces.with_min_order(config.min_search_order);
    let mut report = DetectionReport {
        detections: Vec::new(),
        threshold_used: f64::INFINITY,
        routine: config.routine,
        spectra_computed: 0,
        saturated: false,
        trace: Vec::new(),
    };

    for iteration in 0..iterations {
        if current.is_saturated() {
            report.saturated = true;
            break;
        }
        let spectrum = Pseudospectrum::new(&current, params);
        let coarse = coarse_grid(&current, params, grid);
        report.spectra_computed += 1;
        let gamma = cfar_threshold(&coarse, config.p_fa, config.cfar_scale)?;
        report.threshold_used = report.threshold_used.min(gamma);

        let candidates = iteration_candidates(&spectrum, &coarse, grid, config.seeds_per_iteration(), config);
        let accepted: Vec<Detection> = candidates
            .iter()
            .filter(|c| c.value >= gamma)
            .filter(|c| {
                !report
                    .detections
                    .iter()
                    .any(|d| window.contains((d.range_m, d.azimuth_rad), (c.range_m, c.azimuth_rad)))
            })
            .map(|c| Detection {
                range_m: c.range_m,
                azimuth_rad: c.azimuth_rad,
                spectrum_value: c.value,
                iteration,
            })
            .collect();
        report.trace.push(IterationTrace {
            iteration,
            threshold: gamma,
            candidates,
            accepted: accepted.len(),
        });
        if accepted.is_empty() {
            break;
        }
        report.detections.extend_from_slice(&accepted);
        if config.routine == Routine::Off {
            break;
        }
        for det in &accepted {
            if current.is_saturated() {
                break;
            }
            match cancel_target(&current, params, det) {
                Ok(next) => current = next,
                Err(Error::AlreadyCanceled { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if current.is_saturated() {
        report.saturated = true;
    }
    if !report.threshold_used.is_finite() {
        report.threshold_used = 0.0;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;

    #[test]
    fn routine_parse() {
        assert_eq!("Multiple".parse::<Routine>().unwrap(), Routine::Multiple);
        assert_eq!("off".parse::<Routine>().unwrap(), Routine::Off);
        assert!("both".parse::<Routine>().is_err());
    }

    #[test]
    fn cancel_into_empty_basis_appends_normalized() {
        let params = SteeringParams {
            phi_a: std::f64::consts::PI,
            phi_f: -2.0 * std::f64::consts::PI * 6e6,
            n_sub_a: 3,
            n_sub_f: 5,
            speed_of_light_m_s: 3e8,
            max_range_m: 25.0,
        };
        let s = Subspaces::from_noise_basis(DMatrix::zeros(15, 0));
        let det = Detection {
            range_m: 4.0,
            azimuth_rad: 0.2,
            spectrum_value: 1.0,
            iteration: 0,
        };
        let out = cancel_target(&s, &params, &det).unwrap();
        let v = decimated_steering(&params, 4.0, 0.2).unwrap();
        let expected: DVector<Complex64> = &v / Complex64::new(v.norm(), 0.0);
        assert!((out.noise_basis.column(0) - expected).norm() < 1e-14);

        // a second identical cancelation finds nothing left
        assert!(matches!(
            cancel_target(&out, &params, &det),
            Err(Error::AlreadyCanceled { .. })
        ));
    }

    #[test]
    fn merge_keeps_strongest() {
        let c = |r, t, v| Candidate {
            range_m: r,
            azimuth_rad: t,
            value: v,
            seed_value: v,
        };
        let merged = merge_candidates(
            vec![
                c(1.0, 0.0, 5.0),
                c(1.1, 0.01, 9.0),
                c(1.0, 0.5, 3.0),
                c(3.0, 0.0, 1.0),
                c(24.9, 0.0, 2.0),
                c(0.1, 0.02, 4.0),
            ],
            MergeWindow {
                range_m: 0.4,
                angle_rad: 0.1,
                period_m: 25.0,
            },
        );
        let values: Vec<f64> = merged.iter().map(|m| m.value).collect();
        assert_eq!(values, vec![9.0, 4.0, 3.0, 1.0]);
        // 24.9 m lies 0.2 m from 0.1 m across the wrap
        let w = MergeWindow {
            range_m: 0.4,
            angle_rad: 0.1,
            period_m: 25.0,
        };
        assert!(w.contains((24.9, 0.0), (0.1, 0.0)));
        assert!(!w.contains((12.0, 0.0), (0.1, 0.0)));
    }
}
