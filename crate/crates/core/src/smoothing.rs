//! Decimated spatial smoothing.
//!
//! A sub-array samples every `D`-th element of an aperture of `A` elements in
//! each dimension, and successive sub-arrays are shifted by the stride `S`.
//! Sampled vectors are laid out antenna-fastest: entry `i * n_sub_a + j` of
//! sub-array `ell` is `C[a_ell + j * D_a, f_ell + i * D_f]`. The matching
//! steering vector is therefore `a~(r) (x) b~(theta)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{CsiMatrix, RadioConfig};

/// The six free sub-array parameters, keyed by their conventional symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanParams {
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
}

impl PlanParams {
    /// Reference parametrization: `A_f = 1401`, `D_f = 100`, `A_a = 3`, unit
    /// antenna decimation and unit strides.
    pub const REFERENCE: PlanParams = PlanParams {
        aperture_f: 1401,
        aperture_a: 3,
        decim_f: 100,
        decim_a: 1,
        stride_f: 1,
        stride_a: 1,
    };

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan params serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Counts that follow from [`PlanParams`] and the CSI dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedCounts {
    pub n_sub_f: usize,
    pub n_sub_a: usize,
    pub samples_per_subarray: usize,
    pub n_sets_f: usize,
    pub n_sets_a: usize,
    pub n_subarrays: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubarrayPlan {
    pub params: PlanParams,
    pub counts: DerivedCounts,
    pub n_subcarriers: usize,
    pub n_antennas: usize,
}

fn derive(n: usize, k: usize, p: &PlanParams) -> Result<DerivedCounts> {
    let positive = [
        ("A_f", p.aperture_f),
        ("A_a", p.aperture_a),
        ("D_f", p.decim_f),
        ("D_a", p.decim_a),
        ("S_f", p.stride_f),
        ("S_a", p.stride_a),
    ];
    if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
        return Err(Error::Config(format!("{name} must be at least 1")));
    }
    if p.aperture_f > n {
        return Err(Error::Config(format!(
            "frequency aperture A_f = {} exceeds the number of subcarriers N = {n}",
            p.aperture_f
        )));
    }
    if p.aperture_a > k {
        return Err(Error::Config(format!(
            "antenna aperture A_a = {} exceeds the number of antennas K = {k}",
            p.aperture_a
        )));
    }
    let n_sub_f = p.aperture_f.div_ceil(p.decim_f);
    let n_sub_a = p.aperture_a.div_ceil(p.decim_a);
    let n_sets_f = (n - p.aperture_f) / p.stride_f + 1;
    let n_sets_a = (k - p.aperture_a) / p.stride_a + 1;
    Ok(DerivedCounts {
        n_sub_f,
        n_sub_a,
        samples_per_subarray: n_sub_f * n_sub_a,
        n_sets_f,
        n_sets_a,
        n_subarrays: n_sets_f * n_sets_a,
    })
}

/// Builds a sub-array plan for `config`.
pub fn make_plan(config: &RadioConfig, params: PlanParams) -> Result<SubarrayPlan> {
    SubarrayPlan::new(config.n_subcarriers, config.n_antennas, params)
}

impl SubarrayPlan {
    pub fn new(n_subcarriers: usize, n_antennas: usize, params: PlanParams) -> Result<Self> {
        let counts = derive(n_subcarriers, n_antennas, &params)?;
        Ok(Self {
            params,
            counts,
            n_subcarriers,
            n_antennas,
        })
    }

    /// Rebuilds a plan from stored fields, rejecting derived counts that do
    /// not follow from the parameters.
    pub fn from_parts(
        n_subcarriers: usize,
        n_antennas: usize,
        params: PlanParams,
        counts: DerivedCounts,
    ) -> Result<Self> {
        let plan = Self::new(n_subcarriers, n_antennas, params)?;
        if plan.counts != counts {
            return Err(Error::Config(format!(
                "inconsistent derived counts: stored {counts:?}, computed {:?}",
                plan.counts
            )));
        }
        Ok(plan)
    }

    /// `M`, the number of samples per sub-array.
    pub fn m(&self) -> usize {
        self.counts.samples_per_subarray
    }

    /// `L`, the number of sub-arrays.
    pub fn l(&self) -> usize {
        self.counts.n_subarrays
    }

    /// Antenna and subcarrier offsets of sub-array `ell`. Antenna offset
    /// varies fastest.
    pub fn offsets(&self, ell: usize) -> Result<(usize, usize)> {
        if ell >= self.l() {
            return Err(Error::SubarrayOutOfRange {
                ell,
                count: self.l(),
            });
        }
        let sa = self.counts.n_sets_a;
        Ok((
            (ell % sa) * self.params.stride_a,
            (ell / sa) * self.params.stride_f,
        ))
    }

    /// Largest antenna and subcarrier index touched by any sub-array.
    pub fn max_indices(&self) -> (usize, usize) {
        let c = &self.counts;
        let p = &self.params;
        (
            (c.n_sets_a - 1) * p.stride_a + (c.n_sub_a - 1) * p.decim_a,
            (c.n_sets_f - 1) * p.stride_f + (c.n_sub_f - 1) * p.decim_f,
        )
    }

    /// Effective apertures `(n_sub - 1) * D + 1` in subcarriers and antennas.
    pub fn effective_apertures(&self) -> (usize, usize) {
        (
            (self.counts.n_sub_f - 1) * self.params.decim_f + 1,
            (self.counts.n_sub_a - 1) * self.params.decim_a + 1,
        )
    }

    fn check_csi(&self, csi: &CsiMatrix) -> Result<()> {
        if csi.n_antennas() != self.n_antennas || csi.n_subcarriers() != self.n_subcarriers {
            return Err(Error::Dimension {
                expected: format!("{}x{}", self.n_antennas, self.n_subcarriers),
                found: format!("{}x{}", csi.n_antennas(), csi.n_subcarriers()),
            });
        }
        Ok(())
    }
}

/// Antenna and subcarrier index vectors (each of length `M`) for sub-array
/// `ell`.
pub fn subarray_indices(plan: &SubarrayPlan, ell: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let (a0, f0) = plan.offsets(ell)?;
    let (nf, na) = (plan.counts.n_sub_f, plan.counts.n_sub_a);
    let (df, da) = (plan.params.decim_f, plan.params.decim_a);
    let antennas = (0..nf)
        .flat_map(|_| (0..na).map(move |j| a0 + j * da))
        .collect();
    let subcarriers = (0..nf)
        .flat_map(|i| std::iter::repeat_n(f0 + i * df, na))
        .collect();
    Ok((antennas, subcarriers))
}

/// Sampled vector `c_{s,ell}`.
pub fn sample_subarray(csi: &CsiMatrix, plan: &SubarrayPlan, ell: usize) -> Result<DVector<Complex64>> {
    plan.check_csi(csi)?;
    let (antennas, subcarriers) = subarray_indices(plan, ell)?;
    Ok(DVector::from_iterator(
        plan.m(),
        antennas
            .iter()
            .zip(&subcarriers)
            .map(|(&k, &n)| csi.data[(k, n)]),
    ))
}

/// `M x L` smoothed CSI matrix, one sub-array per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedCsi {
    pub data: DMatrix<Complex64>,
    pub plan: SubarrayPlan,
}

pub fn smooth(csi: &CsiMatrix, plan: &SubarrayPlan) -> Result<SmoothedCsi> {
    plan.check_csi(csi)?;
    let (m, l) = (plan.m(), plan.l());
    let (nf, na) = (plan.counts.n_sub_f, plan.counts.n_sub_a);
    let (df, da) = (plan.params.decim_f, plan.params.decim_a);
    let mut data = DMatrix::zeros(m, l);
    for ell in 0..l {
        let (a0, f0) = plan.offsets(ell)?;
        let mut col = data.column_mut(ell);
        for i in 0..nf {
            for j in 0..na {
                col[i * na + j] = csi.data[(a0 + j * da, f0 + i * df)];
            }
        }
    }
    Ok(SmoothedCsi { data, plan: *plan })
}

/// Hermitian `M x M` sample covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCovariance {
    pub matrix: DMatrix<Complex64>,
    /// Number of sub-arrays averaged, used as the snapshot count for order
    /// selection.
    pub snapshots: usize,
}

impl SampleCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: self.matrix.map(|z| z * factor),
            snapshots: self.snapshots,
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }
}

/// `R = C~ C~^H / M`.
pub fn covariance(smoothed: &SmoothedCsi) -> SampleCovariance {
    let c = &smoothed.data;
    let m = c.nrows();
    let mut r = c * c.adjoint() / Complex64::new(m as f64, 0.0);
    // exact Hermitian symmetry; the product is only symmetric up to rounding
    for i in 0..m {
        r[(i, i)].im = 0.0;
        for j in 0..i {
            let avg = (r[(i, j)] + r[(j, i)].conj()) * 0.5;
            r[(i, j)] = avg;
            r[(j, i)] = avg.conj();
        }
    }
    SampleCovariance {
        matrix: r,
        snapshots: c.ncols(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(af: usize, aa: usize, df: usize, da: usize, sf: usize, sa: usize) -> PlanParams {
        PlanParams {
            aperture_f: af,
            aperture_a: aa,
            decim_f: df,
            decim_a: da,
            stride_f: sf,
            stride_a: sa,
        }
    }

    #[test]
    fn reference_counts() {
        let plan = make_plan(&RadioConfig::reference(), PlanParams::REFERENCE).unwrap();
        let c = plan.counts;
        assert_eq!((c.n_sub_f, c.n_sub_a, c.samples_per_subarray), (15, 3, 45));
        assert_eq!((c.n_sets_f, c.n_sets_a, c.n_subarrays), (100, 2, 200));
        assert_eq!(plan.effective_apertures(), (1401, 3));
    }

    #[test]
    fn full_aperture_single_subarray() {
        let plan = SubarrayPlan::new(10, 4, params(10, 4, 1, 1, 1, 1)).unwrap();
        assert_eq!(plan.l(), 1);
        assert_eq!(plan.m(), 40);
    }

    #[test]
    fn illustration_plan() {
        let plan = SubarrayPlan::new(9, 6, params(7, 5, 3, 2, 1, 1)).unwrap();
        assert_eq!((plan.counts.n_sub_f, plan.counts.n_sub_a, plan.m()), (3, 3, 9));
        let (ant, sub) = subarray_indices(&plan, 0).unwrap();
        let mut ants: Vec<_> = ant.clone();
        ants.sort();
        ants.dedup();
        let mut subs: Vec<_> = sub.clone();
        subs.sort();
        subs.dedup();
        assert_eq!(ants, vec![0, 2, 4]);
        assert_eq!(subs, vec![0, 3, 6]);
    }

    #[test]
    fn kronecker_index_layout() {
        let plan = SubarrayPlan::new(4, 3, params(4, 3, 3, 2, 1, 1)).unwrap();
        assert_eq!((plan.counts.n_sub_f, plan.counts.n_sub_a), (2, 2));
        let (ant, sub) = subarray_indices(&plan, 0).unwrap();
        assert_eq!(ant, vec![0, 2, 0, 2]);
        assert_eq!(sub, vec![0, 0, 3, 3]);
    }

    #[test]
    fn aperture_errors_name_dimension() {
        let cfg = RadioConfig::reference();
        let err = make_plan(&cfg, params(1501, 3, 1, 1, 1, 1)).unwrap_err();
        assert!(err.to_string().contains("subcarriers"));
        let err = make_plan(&cfg, params(10, 5, 1, 1, 1, 1)).unwrap_err();
        assert!(err.to_string().contains("antennas"));
        assert!(make_plan(&cfg, params(10, 3, 0, 1, 1, 1)).is_err());
    }

    #[test]
    fn inconsistent_counts_rejected() {
        let plan = SubarrayPlan::new(1500, 4, PlanParams::REFERENCE).unwrap();
        let mut counts = plan.counts;
        assert!(SubarrayPlan::from_parts(1500, 4, PlanParams::REFERENCE, counts).is_ok());
        counts.n_subarrays = 199;
        assert!(SubarrayPlan::from_parts(1500, 4, PlanParams::REFERENCE, counts).is_err());
    }

    #[test]
    fn ordinal_out_of_range() {
        let plan = SubarrayPlan::new(1500, 4, PlanParams::REFERENCE).unwrap();
        assert!(matches!(
            subarray_indices(&plan, 200),
            Err(Error::SubarrayOutOfRange { ell: 200, count: 200 })
        ));
    }

    #[test]
    fn params_toml_keys() {
        let text = PlanParams::REFERENCE.to_toml();
        for key in ["A_f", "A_a", "D_f", "D_a", "S_f", "S_a"] {
            assert!(text.contains(&format!("{key} = ")), "{text}");
        }
        assert_eq!(PlanParams::from_toml(&text).unwrap(), PlanParams::REFERENCE);
        assert!(PlanParams::from_toml(&format!("{text}X = 1\n")).is_err());
    }

    #[test]
    fn constant_matrix_samples_ones() {
        let cfg = RadioConfig::reference();
        let plan = make_plan(&cfg, PlanParams::REFERENCE).unwrap();
        let csi = CsiMatrix::new(DMatrix::from_element(4, 1500, Complex64::new(1.0, 0.0)), cfg).unwrap();
        let v = sample_subarray(&csi, &plan, 17).unwrap();
        assert!(v.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        let s = smooth(&csi, &plan).unwrap();
        assert_eq!(s.data.shape(), (45, 200));
    }

    #[test]
    fn full_aperture_column_is_row_major_vec() {
        let cfg = RadioConfig::half_wavelength(5, 60e3, 3.5e9, 3).unwrap();
        let plan = make_plan(&cfg, params(5, 3, 1, 1, 1, 1)).unwrap();
        let data = DMatrix::from_fn(3, 5, |k, n| Complex64::new(k as f64, n as f64));
        let csi = CsiMatrix::new(data.clone(), cfg).unwrap();
        let s = smooth(&csi, &plan).unwrap();
        // antenna-fastest: entry i * K + j is C[j, i]
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(s.data[(i * 3 + j, 0)], data[(j, i)]);
            }
        }
    }

    #[test]
    fn single_column_covariance_is_rank_one() {
        let v = DVector::from_fn(4, |i, _| Complex64::new(i as f64, 1.0));
        let plan = SubarrayPlan::new(2, 2, params(2, 2, 1, 1, 1, 1)).unwrap();
        let s = SmoothedCsi {
            data: DMatrix::from_columns(std::slice::from_ref(&v)),
            plan,
        };
        let r = covariance(&s);
        let expected = &v * v.adjoint() / Complex64::new(4.0, 0.0);
        assert!((r.matrix - expected).norm() < 1e-14);
    }
}
