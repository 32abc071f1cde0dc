//! Invariants checked on randomized inputs, shared by the property tests and
//! the acceptance run.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use ofdm_music::detection::{cancel_target, detect, Detection, DetectorConfig};
use ofdm_music::music::{decimated_steering, decompose, mdl_order, GridSpec, SteeringParams};
use ofdm_music::signal::{
    steering_angle, steering_range, synthesize_csi, CsiMatrix, RadioConfig, Target, TargetScene,
};
use ofdm_music::smoothing::{covariance, make_plan, smooth, PlanParams, SubarrayPlan};

use super::random_matrix;

#[derive(Clone, Debug)]
pub struct PlanCase {
    pub config: RadioConfig,
    pub params: PlanParams,
    pub seed: u64,
}

impl PlanCase {
    pub fn plan(&self) -> SubarrayPlan {
        make_plan(&self.config, self.params).expect("generated plan is valid")
    }

    /// Random CSI with one embedded target so the covariance is not white.
    pub fn csi(&self) -> CsiMatrix {
        let k = self.config.n_antennas;
        let n = self.config.n_subcarriers;
        let scene = TargetScene::new(
            vec![Target::new(3.0 + (self.seed % 7) as f64, 0.3, Complex64::new(2.0, 1.0)).unwrap()],
            0.0,
        )
        .unwrap();
        let mut csi = synthesize_csi(&self.config, &scene, self.seed).unwrap();
        csi.data += random_matrix(k, n, self.seed);
        csi
    }
}

pub fn plan_case() -> impl Strategy<Value = PlanCase> {
    (1usize..=6, 4usize..=40, any::<u64>())
        .prop_flat_map(|(k, n, seed)| {
            (
                Just(k),
                Just(n),
                Just(seed),
                1usize..=k,
                1usize..=n,
                1usize..=3,
                1usize..=4,
            )
        })
        .prop_flat_map(|(k, n, seed, a_a, a_f, s_a, s_f)| {
            (
                Just((k, n, seed, a_a, a_f, s_a, s_f)),
                1usize..=a_a,
                1usize..=a_f,
            )
        })
        .prop_map(|((k, n, seed, a_a, a_f, s_a, s_f), d_a, d_f)| PlanCase {
            config: RadioConfig::half_wavelength(n, 60e3, 3.5e9, k).unwrap(),
            params: PlanParams {
                aperture_f: a_f,
                aperture_a: a_a,
                decim_f: d_f,
                decim_a: d_a,
                stride_f: s_f,
                stride_a: s_a,
            },
            seed,
        })
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn unit_modulus(v: &DVector<Complex64>) -> std::result::Result<(), TestCaseError> {
    for z in v.iter() {
        prop_assert!((z.norm() - 1.0).abs() < 1e-12, "|{z}| != 1");
    }
    Ok(())
}

pub fn steering_unit_modulus(
    case: &PlanCase,
    range_frac: f64,
    theta: f64,
) -> std::result::Result<(), TestCaseError> {
    let params = SteeringParams::new(&case.config, &case.plan());
    let r = range_frac * params.max_range_m;
    unit_modulus(&steering_angle(&case.config, theta).unwrap())?;
    unit_modulus(&steering_range(&case.config, r).unwrap())?;
    let v = decimated_steering(&params, r, theta).unwrap();
    prop_assert_eq!(v.len(), case.plan().m());
    unit_modulus(&v)
}

pub fn covariance_hermitian_psd(case: &PlanCase, probe_seed: u64) -> std::result::Result<(), TestCaseError> {
    let cov = covariance(&smooth(&case.csi(), &case.plan()).unwrap());
    let r = &cov.matrix;
    prop_assert_eq!(r, &r.adjoint());
    let scale = cov.trace().max(f64::MIN_POSITIVE);
    let x = random_matrix(r.nrows(), 1, probe_seed);
    let quad = (x.adjoint() * r * &x)[(0, 0)];
    prop_assert!(quad.re >= -1e-12 * scale * x.norm_squared(), "x^H R x = {quad}");
    prop_assert!(quad.im.abs() <= 1e-10 * scale * x.norm_squared());
    let eig = decompose(&cov).unwrap().eigenvalues;
    prop_assert!(eig.iter().all(|v| *v >= -1e-10 * scale), "negative eigenvalue in {eig}");
    Ok(())
}

pub fn trace_conservation(case: &PlanCase) -> std::result::Result<(), TestCaseError> {
    let smoothed = smooth(&case.csi(), &case.plan()).unwrap();
    let cov = covariance(&smoothed);
    // trace(C C^H) / M is the squared Frobenius norm over M
    let direct = smoothed.data.norm_squared() / smoothed.data.nrows() as f64;
    prop_assert!((cov.trace() - direct).abs() <= 1e-9 * direct);
    let sum: f64 = decompose(&cov).unwrap().eigenvalues.iter().sum();
    prop_assert!((sum - direct).abs() <= 1e-9 * direct, "sum {sum} vs trace {direct}");
    Ok(())
}

pub fn cancelation_keeps_orthonormal(
    case: &PlanCase,
    points: &[(f64, f64)],
) -> std::result::Result<(), TestCaseError> {
    let plan = case.plan();
    let params = SteeringParams::new(&case.config, &plan);
    let mut sub = decompose(&covariance(&smooth(&case.csi(), &plan).unwrap())).unwrap();
    for &(frac, theta) in points {
        if sub.is_saturated() {
            break;
        }
        let det = Detection {
            range_m: frac * params.max_range_m,
            azimuth_rad: theta,
            spectrum_value: 0.0,
            iteration: 0,
        };
        if let Ok(next) = cancel_target(&sub, &params, &det) {
            sub = next;
        }
        let u = &sub.noise_basis;
        let gram = u.adjoint() * u - DMatrix::identity(u.ncols(), u.ncols());
        prop_assert!(max_abs(&gram) < 1e-10, "|U^H U - I| = {}", max_abs(&gram));
    }
    Ok(())
}

pub fn mdl_scale_invariant(eigs: &[f64], snapshots: usize, factor: f64) -> std::result::Result<(), TestCaseError> {
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let scaled: Vec<f64> = sorted.iter().map(|v| v * factor).collect();
    prop_assert_eq!(mdl_order(&sorted, snapshots), mdl_order(&scaled, snapshots));
    Ok(())
}

pub fn decompose_scale_invariant(case: &PlanCase, factor: f64) -> std::result::Result<(), TestCaseError> {
    let cov = covariance(&smooth(&case.csi(), &case.plan()).unwrap());
    let a = decompose(&cov).unwrap().order_estimate;
    let b = decompose(&cov.scaled(factor)).unwrap().order_estimate;
    prop_assert_eq!(a, b);
    Ok(())
}

pub fn deterministic(case: &PlanCase, noise_seed: u64) -> std::result::Result<(), TestCaseError> {
    let scene = TargetScene::new(
        vec![Target::new(5.0, -0.2, Complex64::new(1.0, 0.0)).unwrap()],
        0.3,
    )
    .unwrap();
    let a = synthesize_csi(&case.config, &scene, noise_seed).unwrap();
    let b = synthesize_csi(&case.config, &scene, noise_seed).unwrap();
    prop_assert_eq!(&a, &b);
    let plan = case.plan();
    let run = |csi: &CsiMatrix| {
        let sub = decompose(&covariance(&smooth(csi, &plan).unwrap())).unwrap();
        let params = SteeringParams::new(&case.config, &plan);
        let grid = GridSpec::new(&case.config, &plan, 1.0);
        detect(&sub, &params, &grid, &DetectorConfig::default()).unwrap()
    };
    prop_assert_eq!(run(&a), run(&b));
    Ok(())
}
