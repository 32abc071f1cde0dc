//! Subspace estimation and the decimated 2D MUSIC pseudospectrum.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::RadioConfig;
use crate::smoothing::{SampleCovariance, SubarrayPlan};

/// Pseudospectrum ceiling, reached when a steering vector has (numerically)
/// no component in the noise subspace.
pub const SPECTRUM_CLAMP: f64 = 1e18;

/// Eigen-split of a sample covariance into signal and noise subspaces.
#[derive(Clone, Debug)]
pub struct Subspaces {
    /// `M x (M - Q)` with orthonormal columns.
    pub noise_basis: DMatrix<Complex64>,
    /// `M x Q`.
    pub signal_basis: DMatrix<Complex64>,
    /// Descending.
    pub eigenvalues: DVector<f64>,
    pub order_estimate: usize,
}

impl Subspaces {
    pub fn dim(&self) -> usize {
        self.noise_basis.nrows()
    }

    /// True once the noise basis spans the whole space and the spectrum is
    /// flat.
    pub fn is_saturated(&self) -> bool {
        self.noise_basis.ncols() >= self.dim()
    }

    /// Moves leading noise eigenvectors into the signal subspace until the
    /// order is at least `min_order`. Only meaningful before any cancelation.
    pub fn with_min_order(&self, min_order: usize) -> Subspaces {
        let m = self.dim();
        let q = self.order_estimate;
        let target = min_order.min(m.saturating_sub(1)).max(q);
        if target == q {
            return self.clone();
        }
        let extra = target - q;
        let mut signal_basis = DMatrix::zeros(m, target);
        signal_basis.columns_mut(0, q).copy_from(&self.signal_basis);
        signal_basis
            .columns_mut(q, extra)
            .copy_from(&self.noise_basis.columns(0, extra));
        Subspaces {
            noise_basis: self.noise_basis.columns(extra, self.noise_basis.ncols() - extra).into_owned(),
            signal_basis,
            eigenvalues: self.eigenvalues.clone(),
            order_estimate: target,
        }
    }

    /// Builds subspaces by hand from an arbitrary noise basis. The signal
    /// basis is left empty.
    pub fn from_noise_basis(noise_basis: DMatrix<Complex64>) -> Self {
        let m = noise_basis.nrows();
        let q = m - noise_basis.ncols();
        Self {
            noise_basis,
            signal_basis: DMatrix::zeros(m, 0),
            eigenvalues: DVector::zeros(m),
            order_estimate: q,
        }
    }
}

/// Wax-Kailath minimum description length criterion value for model order
/// `k`, given descending eigenvalues and `snapshots` observations.
pub fn mdl_score(eigenvalues: &[f64], k: usize, snapshots: usize) -> f64 {
    let m = eigenvalues.len();
    let tail = &eigenvalues[k..];
    let p = (m - k) as f64;
    let arith = tail.iter().sum::<f64>() / p;
    let log_geo = tail.iter().map(|v| v.ln()).sum::<f64>() / p;
    let log_ratio = log_geo - arith.ln();
    let n = snapshots as f64;
    -p * n * log_ratio + 0.5 * (k * (2 * m - k)) as f64 * n.ln()
}

/// Model order minimizing [`mdl_score`] over `0..M`.
pub fn mdl_order(eigenvalues: &[f64], snapshots: usize) -> usize {
    let m = eigenvalues.len();
    let top = eigenvalues.iter().cloned().fold(0.0, f64::max);
    if m == 0 || top <= 0.0 {
        return 0;
    }
    // rounding can leave tiny negative eigenvalues on rank-deficient input
    let floor = top * f64::EPSILON * m as f64;
    let clamped: Vec<f64> = eigenvalues.iter().map(|v| v.max(floor)).collect();
    let snapshots = snapshots.max(2);
    (0..m)
        .map(|k| (k, mdl_score(&clamped, k, snapshots)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

/// Hermitian eigendecomposition with MDL order selection.
pub fn decompose(cov: &SampleCovariance) -> Result<Subspaces> {
    let m = cov.dim();
    let eig = cov
        .matrix
        .clone()
        .try_symmetric_eigen(1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".to_string()))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(m, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    let q = mdl_order(eigenvalues.as_slice(), cov.snapshots);
    if q >= m {
        return Err(Error::DegenerateOrder { order: q, dim: m });
    }
    Ok(Subspaces {
        noise_basis: vectors.columns(q, m - q).into_owned(),
        signal_basis: vectors.columns(0, q).into_owned(),
        eigenvalues,
        order_estimate: q,
    })
}

/// Phase increments of the decimated steering vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringParams {
    /// `2 pi D_a d / lambda`
    pub phi_a: f64,
    /// `-2 pi D_f delta_f`
    pub phi_f: f64,
    pub n_sub_a: usize,
    pub n_sub_f: usize,
    pub speed_of_light_m_s: f64,
    pub max_range_m: f64,
}

impl SteeringParams {
    pub fn new(config: &RadioConfig, plan: &SubarrayPlan) -> Self {
        Self {
            phi_a: 2.0 * PI * plan.params.decim_a as f64 * config.antenna_spacing_m / config.wavelength_m,
            phi_f: -2.0 * PI * plan.params.decim_f as f64 * config.subcarrier_spacing_hz,
            n_sub_a: plan.counts.n_sub_a,
            n_sub_f: plan.counts.n_sub_f,
            speed_of_light_m_s: config.speed_of_light_m_s,
            max_range_m: unambiguous_range(config, plan),
        }
    }

    pub fn m(&self) -> usize {
        self.n_sub_a * self.n_sub_f
    }

    /// Steering vector without domain checks, written into `out`.
    pub(crate) fn fill(&self, range_m: f64, theta: f64, out: &mut DVector<Complex64>) {
        let step_f = self.phi_f * 2.0 * range_m / self.speed_of_light_m_s;
        let step_a = self.phi_a * theta.sin();
        let b: Vec<Complex64> = (0..self.n_sub_a)
            .map(|j| Complex64::from_polar(1.0, j as f64 * step_a))
            .collect();
        for i in 0..self.n_sub_f {
            let a = Complex64::from_polar(1.0, i as f64 * step_f);
            for (j, bj) in b.iter().enumerate() {
                out[i * self.n_sub_a + j] = a * bj;
            }
        }
    }
}

/// Decimated steering vector `a~(r) (x) b~(theta)` of length `M`.
pub fn decimated_steering(params: &SteeringParams, range_m: f64, theta: f64) -> Result<DVector<Complex64>> {
    if !(range_m.is_finite() && range_m >= 0.0) {
        return Err(Error::Domain(format!("range must be nonnegative, got {range_m}")));
    }
    if range_m >= params.max_range_m {
        return Err(Error::Domain(format!(
            "range {range_m} m aliases: unambiguous range is {} m",
            params.max_range_m
        )));
    }
    if !(theta.is_finite() && theta.abs() <= FRAC_PI_2) {
        return Err(Error::Domain(format!("azimuth must lie in [-pi/2, pi/2], got {theta}")));
    }
    let mut v = DVector::zeros(params.m());
    params.fill(range_m, theta, &mut v);
    Ok(v)
}

/// `1 / ||U_N^H v||^2`, clamped at [`SPECTRUM_CLAMP`].
pub fn music_value(subspaces: &Subspaces, steering: &DVector<Complex64>) -> f64 {
    let proj = subspaces.noise_basis.ad_mul(steering);
    let denom = proj.norm_squared();
    if denom <= 1.0 / SPECTRUM_CLAMP {
        SPECTRUM_CLAMP
    } else {
        (1.0 / denom).min(SPECTRUM_CLAMP)
    }
}

/// Evaluates the pseudospectrum at `(range, azimuth)` pairs.
#[derive(Clone, Debug)]
pub struct Pseudospectrum<'a> {
    pub subspaces: &'a Subspaces,
    pub params: &'a SteeringParams,
}

impl<'a> Pseudospectrum<'a> {
    pub fn new(subspaces: &'a Subspaces, params: &'a SteeringParams) -> Self {
        Self { subspaces, params }
    }

    pub fn value(&self, range_m: f64, theta: f64) -> f64 {
        let mut v = DVector::zeros(self.params.m());
        self.params.fill(range_m, theta, &mut v);
        music_value(self.subspaces, &v)
    }
}

/// `r_max = c / (2 D_f delta_f)`.
pub fn unambiguous_range(config: &RadioConfig, plan: &SubarrayPlan) -> f64 {
    config.speed_of_light_m_s / (2.0 * plan.params.decim_f as f64 * config.subcarrier_spacing_hz)
}

/// `delta_r = c / (2 A_f delta_f)`.
pub fn range_resolution(config: &RadioConfig, plan: &SubarrayPlan) -> f64 {
    config.speed_of_light_m_s / (2.0 * plan.params.aperture_f as f64 * config.subcarrier_spacing_hz)
}

/// Broadside Rayleigh resolution `lambda / (A_eff d)` of the sampled antenna
/// aperture, in radians.
pub fn angle_resolution(config: &RadioConfig, plan: &SubarrayPlan) -> f64 {
    let (_, eff_a) = plan.effective_apertures();
    config.wavelength_m / (eff_a as f64 * config.antenna_spacing_m)
}

/// Approximate floating-point operations for one pseudospectrum evaluation,
/// `2 M^2 (M - Q)`.
pub fn flop_estimate(m: u64, q: u64) -> u64 {
    assert!(q < m, "model order {q} must be below M = {m}");
    2 * m * m * (m - q)
}

/// Default azimuth search limit, matching the scenario's angle draws.
pub const DEFAULT_ANGLE_LIMIT_RAD: f64 = 60.0 * PI / 180.0;

/// Sampling lattice of the coarse search grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub range_resolution_m: f64,
    pub angle_resolution_rad: f64,
    pub max_range_m: f64,
    pub angle_limit_rad: f64,
    pub ranges_m: Vec<f64>,
    pub angles_rad: Vec<f64>,
}

impl GridSpec {
    /// Half-resolution sampling of `[0, r_max) x [-angle_limit, angle_limit]`.
    /// A plan with a single antenna per sub-array has no angular sensitivity
    /// and gets the single azimuth 0.
    pub fn new(config: &RadioConfig, plan: &SubarrayPlan, angle_limit_rad: f64) -> Self {
        let range_res = range_resolution(config, plan);
        let angle_res = angle_resolution(config, plan);
        let max_range = unambiguous_range(config, plan);
        let step = range_res / 2.0;
        let n_ranges = (max_range / step).ceil() as usize;
        let ranges_m: Vec<f64> = (0..n_ranges)
            .map(|i| i as f64 * step)
            .filter(|r| *r < max_range)
            .collect();
        let angles_rad = if plan.counts.n_sub_a <= 1 {
            vec![0.0]
        } else {
            let intervals = ((2.0 * angle_limit_rad) / (angle_res / 2.0)).ceil().max(1.0) as usize;
            (0..=intervals)
                .map(|i| -angle_limit_rad + 2.0 * angle_limit_rad * i as f64 / intervals as f64)
                .collect()
        };
        Self {
            range_resolution_m: range_res,
            angle_resolution_rad: angle_res,
            max_range_m: max_range,
            angle_limit_rad: if plan.counts.n_sub_a <= 1 { 0.0 } else { angle_limit_rad },
            ranges_m,
            angles_rad,
        }
    }

    pub fn angular(&self) -> bool {
        self.angles_rad.len() > 1
    }

    pub fn len(&self) -> usize {
        self.ranges_m.len() * self.angles_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pseudospectrum sampled on a [`GridSpec`]; `values[i][j]` belongs to
/// `(ranges_m[i], angles_rad[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub ranges_m: Vec<f64>,
    pub angles_rad: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn coarse_grid(subspaces: &Subspaces, params: &SteeringParams, spec: &GridSpec) -> SpectrumGrid {
    let spectrum = Pseudospectrum::new(subspaces, params);
    let values = spec
        .ranges_m
        .iter()
        .map(|&r| spec.angles_rad.iter().map(|&t| spectrum.value(r, t)).collect())
        .collect();
    SpectrumGrid {
        ranges_m: spec.ranges_m.clone(),
        angles_rad: spec.angles_rad.clone(),
        values,
    }
}

impl SpectrumGrid {
    /// `(range, azimuth, value)` for every grid point, range-major.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.ranges_m.iter().enumerate().flat_map(move |(i, &r)| {
            self.angles_rad
                .iter()
                .enumerate()
                .map(move |(j, &t)| (r, t, self.values[i][j]))
        })
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    /// Grid point with the largest value.
    pub fn argmax(&self) -> Option<(f64, f64, f64)> {
        self.points().max_by(|a, b| a.2.total_cmp(&b.2))
    }

    /// The `n` largest grid points, strongest first.
    pub fn top(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let mut pts: Vec<_> = self.points().collect();
        pts.sort_by(|a, b| b.2.total_cmp(&a.2));
        pts.truncate(n);
        pts
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "range_m,angle_deg,value")?;
        for (r, t, v) in self.points() {
            writeln!(w, "{r},{},{v:e}", t.to_degrees())?;
        }
        Ok(())
    }

    /// Dense little-endian f64 block in range-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for v in self.flat_values() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Metadata describing the layout of [`SpectrumGrid::write_binary`].
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "dtype": "float64",
            "byte_order": "little",
            "layout": "range-major",
            "shape": [self.ranges_m.len(), self.angles_rad.len()],
            "ranges_m": self.ranges_m,
            "angles_deg": self.angles_rad.iter().map(|t| t.to_degrees()).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::{make_plan, PlanParams};

    fn reference() -> (RadioConfig, SubarrayPlan) {
        let cfg = RadioConfig::reference();
        let plan = make_plan(&cfg, PlanParams::REFERENCE).unwrap();
        (cfg, plan)
    }

    #[test]
    fn flops() {
        assert_eq!(flop_estimate(45, 2), 174_150);
        assert_eq!(flop_estimate(1, 0), 2);
        let big = flop_estimate(4203, 2) as f64;
        assert!((big / 1.484e11 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ranges() {
        let (cfg, plan) = reference();
        assert_eq!(unambiguous_range(&cfg, &plan), 25.0);
        assert!((range_resolution(&cfg, &plan) - 1.78).abs() < 0.005);

        let coarse = make_plan(&cfg, PlanParams { decim_f: 1, aperture_f: 15, ..PlanParams::REFERENCE }).unwrap();
        assert!((unambiguous_range(&cfg, &coarse) - 2500.0).abs() < 1e-9);
        let ratio = range_resolution(&cfg, &coarse) / range_resolution(&cfg, &plan);
        assert!((ratio - 1401.0 / 15.0).abs() < 1e-9);

        let mid = make_plan(&cfg, PlanParams { decim_f: 50, aperture_f: 701, ..PlanParams::REFERENCE }).unwrap();
        assert!((unambiguous_range(&cfg, &mid) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn steering_layout() {
        let (cfg, plan) = reference();
        let p = SteeringParams::new(&cfg, &plan);
        let v = decimated_steering(&p, 0.0, 0.0).unwrap();
        assert!(v.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let (r, t) = (7.3, 0.4);
        let v = decimated_steering(&p, r, t).unwrap();
        for i in 0..15 {
            for j in 0..3 {
                let a = Complex64::from_polar(1.0, p.phi_f * i as f64 * 2.0 * r / cfg.speed_of_light_m_s);
                let b = Complex64::from_polar(1.0, p.phi_a * j as f64 * t.sin());
                assert!((v[i * 3 + j] - a * b).norm() < 1e-12);
            }
        }
        assert!(decimated_steering(&p, 25.0, 0.0).is_err());
        assert!(decimated_steering(&p, 1.0, 2.0).is_err());
    }

    #[test]
    fn mdl_white_noise_is_order_zero() {
        assert_eq!(mdl_order(&[2.0; 10], 100), 0);
    }

    #[test]
    fn mdl_scale_invariant() {
        let ev = [50.0, 20.0, 1.1, 1.0, 0.95, 0.9, 0.85];
        let q = mdl_order(&ev, 200);
        assert_eq!(q, 2);
        for s in [1e-6, 3.0, 1e9] {
            let scaled: Vec<f64> = ev.iter().map(|v| v * s).collect();
            assert_eq!(mdl_order(&scaled, 200), q);
        }
    }

    #[test]
    fn music_value_unit_and_clamp() {
        let m = 4;
        let basis = DMatrix::<Complex64>::identity(m, 2);
        let s = Subspaces::from_noise_basis(basis);
        let mut v = DVector::zeros(m);
        v[0] = Complex64::new(1.0, 0.0);
        assert!((music_value(&s, &v) - 1.0).abs() < 1e-15);
        let mut w = DVector::zeros(m);
        w[3] = Complex64::new(1.0, 0.0);
        assert_eq!(music_value(&s, &w), SPECTRUM_CLAMP);
    }

    #[test]
    fn reference_grid_shape() {
        let (cfg, plan) = reference();
        let g = GridSpec::new(&cfg, &plan, DEFAULT_ANGLE_LIMIT_RAD);
        assert!(g.ranges_m.iter().all(|r| *r >= 0.0 && *r < 25.0));
        assert!((g.ranges_m[1] - g.range_resolution_m / 2.0).abs() < 1e-12);
        assert!((g.angles_rad[0] + DEFAULT_ANGLE_LIMIT_RAD).abs() < 1e-12);
        assert!((g.angles_rad.last().unwrap() - DEFAULT_ANGLE_LIMIT_RAD).abs() < 1e-12);
        let step = g.angles_rad[1] - g.angles_rad[0];
        assert!(step <= g.angle_resolution_rad / 2.0 + 1e-12);
    }

    #[test]
    fn single_antenna_grid_is_range_only() {
        let cfg = RadioConfig::reference();
        let plan = make_plan(&cfg, PlanParams { aperture_a: 1, ..PlanParams::REFERENCE }).unwrap();
        let g = GridSpec::new(&cfg, &plan, DEFAULT_ANGLE_LIMIT_RAD);
        assert_eq!(g.angles_rad, vec![0.0]);
        assert!(!g.angular());
    }
}
