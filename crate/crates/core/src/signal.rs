//! OFDM radar signal model.
//!
//! A co-located single-antenna transmitter illuminates `Q` point scatterers and
//! a `K`-element uniform linear array receives the echoes on `N` subcarriers.
//! After dividing out the known transmit symbols, the channel state
//! information is the `K x N` matrix
//!
//! ```text
//! C = sum_q h_q b(theta_q) a(r_q)^T + Z
//! ```
//!
//! where `b` carries the per-antenna phase progression of the angle of arrival
//! and `a` the per-subcarrier phase progression of the round-trip delay.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light used throughout the crate. Rounded so that the reference
/// numerology gives an unambiguous range of exactly 25 m.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// OFDM numerology and receive array geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub n_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub carrier_freq_hz: f64,
    pub wavelength_m: f64,
    pub n_antennas: usize,
    pub antenna_spacing_m: f64,
    pub speed_of_light_m_s: f64,
}

impl RadioConfig {
    pub fn new(
        n_subcarriers: usize,
        subcarrier_spacing_hz: f64,
        carrier_freq_hz: f64,
        n_antennas: usize,
        antenna_spacing_m: f64,
    ) -> Result<Self> {
        if n_subcarriers == 0 || n_antennas == 0 {
            return Err(Error::Config(
                "N and K must both be positive".to_string(),
            ));
        }
        for (name, v) in [
            ("subcarrier spacing", subcarrier_spacing_hz),
            ("carrier frequency", carrier_freq_hz),
            ("antenna spacing", antenna_spacing_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            n_subcarriers,
            subcarrier_spacing_hz,
            carrier_freq_hz,
            wavelength_m: SPEED_OF_LIGHT / carrier_freq_hz,
            n_antennas,
            antenna_spacing_m,
            speed_of_light_m_s: SPEED_OF_LIGHT,
        })
    }

    /// Array with half-wavelength element spacing.
    pub fn half_wavelength(
        n_subcarriers: usize,
        subcarrier_spacing_hz: f64,
        carrier_freq_hz: f64,
        n_antennas: usize,
    ) -> Result<Self> {
        let spacing = SPEED_OF_LIGHT / carrier_freq_hz / 2.0;
        Self::new(
            n_subcarriers,
            subcarrier_spacing_hz,
            carrier_freq_hz,
            n_antennas,
            spacing,
        )
    }

    /// 5G NR reference setup: 1500 subcarriers at 60 kHz, 3.5 GHz carrier,
    /// four antennas at half-wavelength spacing.
    pub fn reference() -> Self {
        Self::half_wavelength(1500, 60e3, 3.5e9, 4).expect("reference config is valid")
    }

    /// Occupied bandwidth is small compared to the carrier.
    pub fn narrowband_ok(&self) -> bool {
        self.n_subcarriers as f64 * self.subcarrier_spacing_hz / self.carrier_freq_hz < 0.1
    }

    pub(crate) fn check_dims(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != self.n_antennas || cols != self.n_subcarriers {
            return Err(Error::Dimension {
                expected: format!("{}x{}", self.n_antennas, self.n_subcarriers),
                found: format!("{rows}x{cols}"),
            });
        }
        Ok(())
    }
}

/// A point scatterer. The round-trip delay is `2 * range / c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub coeff: Complex64,
}

impl Target {
    pub fn new(range_m: f64, azimuth_rad: f64, coeff: Complex64) -> Result<Self> {
        let t = Self {
            range_m,
            azimuth_rad,
            coeff,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_m.is_finite() && self.range_m > 0.0) {
            return Err(Error::Domain(format!(
                "target range must be positive, got {}",
                self.range_m
            )));
        }
        check_azimuth(self.azimuth_rad)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetScene {
    pub targets: Vec<Target>,
    pub noise_variance: f64,
}

impl TargetScene {
    pub fn new(targets: Vec<Target>, noise_variance: f64) -> Result<Self> {
        let scene = Self {
            targets,
            noise_variance,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::Domain(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        self.targets.iter().try_for_each(Target::validate)
    }
}

/// `K x N` channel state information matrix, antennas along rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiMatrix {
    pub data: DMatrix<Complex64>,
    pub config: RadioConfig,
}

fn check_azimuth(theta: f64) -> Result<()> {
    if !(theta.is_finite() && theta.abs() < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "azimuth must lie in (-pi/2, pi/2), got {theta}"
        )));
    }
    Ok(())
}

fn phase_ramp(len: usize, step: f64) -> DVector<Complex64> {
    DVector::from_fn(len, |k, _| Complex64::from_polar(1.0, k as f64 * step))
}

/// Antenna steering vector `b(theta)`, length `K`.
pub fn steering_angle(config: &RadioConfig, theta: f64) -> Result<DVector<Complex64>> {
    check_azimuth(theta)?;
    let step = 2.0 * PI * config.antenna_spacing_m / config.wavelength_m * theta.sin();
    Ok(phase_ramp(config.n_antennas, step))
}

/// Subcarrier steering vector `a(r)`, length `N`.
pub fn steering_range(config: &RadioConfig, range_m: f64) -> Result<DVector<Complex64>> {
    if !(range_m.is_finite() && range_m >= 0.0) {
        return Err(Error::Domain(format!(
            "range must be nonnegative, got {range_m}"
        )));
    }
    let step = -2.0 * PI * config.subcarrier_spacing_hz * 2.0 * range_m / config.speed_of_light_m_s;
    Ok(phase_ramp(config.n_subcarriers, step))
}

/// Noiseless superposition of all target contributions.
pub fn noiseless_csi(config: &RadioConfig, targets: &[Target]) -> Result<DMatrix<Complex64>> {
    let mut data = DMatrix::zeros(config.n_antennas, config.n_subcarriers);
    for t in targets {
        t.validate()?;
        let b = steering_angle(config, t.azimuth_rad)?;
        let a = steering_range(config, t.range_m)?;
        data += (b * t.coeff) * a.transpose();
    }
    Ok(data)
}

/// Circularly symmetric complex Gaussian sample with total variance
/// `variance`, split evenly between the real and imaginary parts.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Synthesizes a noisy CSI matrix for `scene`. Deterministic in `rng_seed`.
pub fn synthesize_csi(config: &RadioConfig, scene: &TargetScene, rng_seed: u64) -> Result<CsiMatrix> {
    scene.validate()?;
    let mut data = noiseless_csi(config, &scene.targets)?;
    if scene.noise_variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        // row-major draw order so the noise pattern does not depend on storage layout
        for k in 0..data.nrows() {
            for n in 0..data.ncols() {
                data[(k, n)] += complex_gaussian(&mut rng, scene.noise_variance);
            }
        }
    }
    Ok(CsiMatrix {
        data,
        config: config.clone(),
    })
}

/// Recovers CSI from received symbols by element-wise division with the
/// transmitted symbols.
pub fn csi_from_symbols(
    config: &RadioConfig,
    received: &DMatrix<Complex64>,
    transmitted: &[Complex64],
) -> Result<CsiMatrix> {
    config.check_dims(received.nrows(), received.ncols())?;
    if transmitted.len() != received.ncols() {
        return Err(Error::Dimension {
            expected: format!("{} transmitted symbols", received.ncols()),
            found: transmitted.len().to_string(),
        });
    }
    if let Some(subcarrier) = transmitted.iter().position(|s| s.norm_sqr() == 0.0) {
        return Err(Error::ZeroSymbol { subcarrier });
    }
    let data = DMatrix::from_fn(received.nrows(), received.ncols(), |k, n| {
        received[(k, n)] / transmitted[n]
    });
    Ok(CsiMatrix {
        data,
        config: config.clone(),
    })
}

/// Unit-modulus QPSK symbols, one per subcarrier.
pub fn qpsk_symbols(n: usize, rng_seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n)
        .map(|_| {
            let quadrant = rng.random_range(0..4u8) as f64;
            Complex64::from_polar(1.0, FRAC_PI_4 + quadrant * FRAC_PI_2)
        })
        .collect()
}

/// Applies transmit symbols to a CSI matrix, producing received symbols
/// `y[k, n] = c[k, n] * s[n]`.
pub fn modulate(csi: &CsiMatrix, symbols: &[Complex64]) -> Result<DMatrix<Complex64>> {
    if symbols.len() != csi.data.ncols() {
        return Err(Error::Dimension {
            expected: format!("{} symbols", csi.data.ncols()),
            found: symbols.len().to_string(),
        });
    }
    Ok(DMatrix::from_fn(csi.data.nrows(), csi.data.ncols(), |k, n| {
        csi.data[(k, n)] * symbols[n]
    }))
}

/// Reference distance for the path-loss model.
pub const REFERENCE_RANGE_M: f64 = 1.0;

/// Scatterer coefficient with uniformly random phase and two-way free-space
/// amplitude decay `(r_ref / r)^2`.
pub fn scene_coefficient(range_m: f64, rng_seed: u64) -> Result<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    coefficient_from_rng(range_m, &mut rng)
}

pub(crate) fn coefficient_from_rng<R: Rng + ?Sized>(range_m: f64, rng: &mut R) -> Result<Complex64> {
    if !(range_m.is_finite() && range_m > 0.0) {
        return Err(Error::Domain(format!(
            "range must be positive, got {range_m}"
        )));
    }
    let phase = rng.random_range(0.0..2.0 * PI);
    Ok(Complex64::from_polar((REFERENCE_RANGE_M / range_m).powi(2), phase))
}

const HEADER_LEN: usize = 8;

impl CsiMatrix {
    pub fn new(data: DMatrix<Complex64>, config: RadioConfig) -> Result<Self> {
        config.check_dims(data.nrows(), data.ncols())?;
        Ok(Self { data, config })
    }

    pub fn n_antennas(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.data.ncols()
    }

    /// Writes the flat binary form: little-endian `u32 K`, `u32 N`, then
    /// `K * N` interleaved `(re, im)` f64 pairs in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let (k, n) = self.data.shape();
        w.write_all(&(k as u32).to_le_bytes())?;
        w.write_all(&(n as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(k * n * 16);
        for row in 0..k {
            for col in 0..n {
                let z = self.data[(row, col)];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8], config: &RadioConfig) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format {
                offset: bytes.len(),
                message: format!("truncated header, need {HEADER_LEN} bytes"),
            });
        }
        let k = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if k != config.n_antennas {
            return Err(Error::Format {
                offset: 0,
                message: format!("header K = {k} but configuration has K = {}", config.n_antennas),
            });
        }
        if n != config.n_subcarriers {
            return Err(Error::Format {
                offset: 4,
                message: format!(
                    "header N = {n} but configuration has N = {}",
                    config.n_subcarriers
                ),
            });
        }
        let expected = HEADER_LEN + k * n * 16;
        if bytes.len() != expected {
            return Err(Error::Format {
                offset: bytes.len().min(expected),
                message: format!("payload length {} does not match {expected}", bytes.len()),
            });
        }
        let f = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let data = DMatrix::from_fn(k, n, |row, col| {
            let off = HEADER_LEN + (row * n + col) * 16;
            Complex64::new(f(off), f(off + 8))
        });
        Ok(Self {
            data,
            config: config.clone(),
        })
    }

    pub fn read_binary<R: Read>(mut r: R, config: &RadioConfig) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, config)
    }

    /// JSON debug form: `{"rows", "cols", "data": [[re, im], ...]}` row-major.
    pub fn to_json(&self) -> serde_json::Value {
        let (k, n) = self.data.shape();
        let data: Vec<[f64; 2]> = (0..k)
            .flat_map(|row| (0..n).map(move |col| (row, col)))
            .map(|idx| [self.data[idx].re, self.data[idx].im])
            .collect();
        serde_json::json!({ "rows": k, "cols": n, "data": data })
    }

    pub fn from_json(value: &serde_json::Value, config: &RadioConfig) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            rows: usize,
            cols: usize,
            data: Vec<[f64; 2]>,
        }
        let raw: Raw = serde_json::from_value(value.clone())?;
        config.check_dims(raw.rows, raw.cols)?;
        if raw.data.len() != raw.rows * raw.cols {
            return Err(Error::Dimension {
                expected: format!("{} entries", raw.rows * raw.cols),
                found: raw.data.len().to_string(),
            });
        }
        let data = DMatrix::from_fn(raw.rows, raw.cols, |row, col| {
            let [re, im] = raw.data[row * raw.cols + col];
            Complex64::new(re, im)
        });
        Ok(Self {
            data,
            config: config.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RadioConfig {
        RadioConfig::half_wavelength(8, 60e3, 3.5e9, 4).unwrap()
    }

    #[test]
    fn wavelength_consistent() {
        let c = RadioConfig::reference();
        assert!((c.wavelength_m * c.carrier_freq_hz / c.speed_of_light_m_s - 1.0).abs() < 1e-9);
        assert!(c.narrowband_ok());
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let b = steering_angle(&small(), 0.0).unwrap();
        assert_eq!(b.len(), 4);
        assert!(b.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn endfire_limit_phases() {
        let b = steering_angle(&small(), FRAC_PI_2 - 1e-9).unwrap();
        for (k, z) in b.iter().enumerate() {
            let expected = Complex64::from_polar(1.0, k as f64 * PI);
            assert!((z - expected).norm() < 1e-6);
        }
    }

    #[test]
    fn thirty_degrees_gives_quarter_turn() {
        let b = steering_angle(&small(), 30f64.to_radians()).unwrap();
        assert!((b[1].arg() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn azimuth_out_of_range() {
        assert!(matches!(steering_angle(&small(), FRAC_PI_2), Err(Error::Domain(_))));
        assert!(matches!(steering_angle(&small(), -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn range_steering() {
        let c = small();
        let a = steering_range(&c, 0.0).unwrap();
        assert!(a.iter().all(|z| *z == Complex64::new(1.0, 0.0)));

        let quarter = c.speed_of_light_m_s / (4.0 * c.subcarrier_spacing_hz);
        let a = steering_range(&c, quarter).unwrap();
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);

        let a = steering_range(&c, 25.0).unwrap();
        assert!((a[1].arg() + 2.0 * PI * 0.01).abs() < 1e-12);

        assert!(steering_range(&c, -1.0).is_err());
    }

    #[test]
    fn empty_noiseless_scene_is_zero() {
        let csi = synthesize_csi(&small(), &TargetScene::default(), 1).unwrap();
        assert!(csi.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_target_is_outer_product() {
        let c = small();
        let t = Target::new(7.0, 0.3, Complex64::new(1.0, 0.0)).unwrap();
        let csi = synthesize_csi(&c, &TargetScene::new(vec![t], 0.0).unwrap(), 0).unwrap();
        let b = steering_angle(&c, 0.3).unwrap();
        let a = steering_range(&c, 7.0).unwrap();
        for k in 0..4 {
            for n in 0..8 {
                assert!((csi.data[(k, n)] - b[k] * a[n]).norm() < 1e-15);
                assert!((csi.data[(k, n)].norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equal_range_rows_are_proportional() {
        let c = small();
        let targets = vec![
            Target::new(5.0, -0.4, Complex64::new(0.7, 0.2)).unwrap(),
            Target::new(5.0, 0.5, Complex64::new(-0.1, 0.9)).unwrap(),
        ];
        let csi = synthesize_csi(&c, &TargetScene::new(targets, 0.0).unwrap(), 0).unwrap();
        let a = steering_range(&c, 5.0).unwrap();
        for k in 0..4 {
            let scale = csi.data[(k, 0)];
            for n in 0..8 {
                assert!((csi.data[(k, n)] - scale * a[n]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_is_seeded() {
        let scene = TargetScene::new(vec![], 1.0).unwrap();
        let a = synthesize_csi(&small(), &scene, 9).unwrap();
        let b = synthesize_csi(&small(), &scene, 9).unwrap();
        let c = synthesize_csi(&small(), &scene, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn symbol_division() {
        let c = small();
        let rx = DMatrix::from_fn(4, 8, |k, n| Complex64::new(k as f64, n as f64 + 1.0));
        let ones = vec![Complex64::new(1.0, 0.0); 8];
        assert_eq!(csi_from_symbols(&c, &rx, &ones).unwrap().data, rx);

        let row: Vec<Complex64> = rx.row(2).iter().copied().collect();
        let out = csi_from_symbols(&c, &rx, &row).unwrap();
        assert!(out.data.row(2).iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn zero_symbol_names_subcarrier() {
        let c = small();
        let rx = DMatrix::from_element(4, 8, Complex64::new(1.0, 0.0));
        let mut s = vec![Complex64::new(1.0, 0.0); 8];
        s[5] = Complex64::new(0.0, 0.0);
        assert!(matches!(
            csi_from_symbols(&c, &rx, &s),
            Err(Error::ZeroSymbol { subcarrier: 5 })
        ));
    }

    #[test]
    fn qpsk_round_trip() {
        let c = small();
        let scene = TargetScene::new(
            vec![Target::new(3.0, 0.2, Complex64::new(0.3, -0.4)).unwrap()],
            0.5,
        )
        .unwrap();
        let csi = synthesize_csi(&c, &scene, 3).unwrap();
        let s = qpsk_symbols(8, 4);
        assert!(s.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let y = modulate(&csi, &s).unwrap();
        let back = csi_from_symbols(&c, &y, &s).unwrap();
        for (x, y) in back.data.iter().zip(csi.data.iter()) {
            assert!((x - y).norm() <= 1e-15 * y.norm().max(1.0));
        }
    }

    #[test]
    fn coefficient_path_loss() {
        assert!((scene_coefficient(1.0, 0).unwrap().norm() - 1.0).abs() < 1e-15);
        assert!((scene_coefficient(2.0, 5).unwrap().norm() - 0.25).abs() < 1e-15);
        assert!(scene_coefficient(0.0, 5).is_err());
    }

    #[test]
    fn binary_header_errors_name_offset() {
        let c = small();
        match CsiMatrix::from_bytes(&[1, 2, 3], &c) {
            Err(Error::Format { offset: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&9u32.to_le_bytes());
        match CsiMatrix::from_bytes(&bytes, &c) {
            Err(Error::Format { offset: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let c = small();
        let scene = TargetScene::new(vec![], 1.0).unwrap();
        let csi = synthesize_csi(&c, &scene, 2).unwrap();
        let back = CsiMatrix::from_json(&csi.to_json(), &c).unwrap();
        assert_eq!(back, csi);
    }
}
