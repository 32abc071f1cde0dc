//! End-to-end estimation from a CSI matrix.

use crate::detection::{detect, DetectionReport, DetectorConfig};
use crate::error::Result;
use crate::music::{decompose, GridSpec, SteeringParams, Subspaces};
use crate::signal::CsiMatrix;
use crate::smoothing::{covariance, smooth, SubarrayPlan};

/// Everything produced by one estimation run.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub subspaces: Subspaces,
    pub params: SteeringParams,
    pub grid: GridSpec,
    pub report: DetectionReport,
}

/// Smoothing, eigendecomposition and subspace split for one snapshot.
pub fn analyze(csi: &CsiMatrix, plan: &SubarrayPlan, angle_limit_rad: f64) -> Result<(Subspaces, SteeringParams, GridSpec)> {
    let smoothed = smooth(csi, plan)?;
    let subspaces = decompose(&covariance(&smoothed))?;
    let params = SteeringParams::new(&csi.config, plan);
    let grid = GridSpec::new(&csi.config, plan, angle_limit_rad);
    Ok((subspaces, params, grid))
}

/// Smooth, decompose and detect.
pub fn estimate(
    csi: &CsiMatrix,
    plan: &SubarrayPlan,
    detector: &DetectorConfig,
    angle_limit_rad: f64,
) -> Result<Estimate> {
    let (subspaces, params, grid) = analyze(csi, plan, angle_limit_rad)?;
    let report = detect(&subspaces, &params, &grid, detector)?;
    Ok(Estimate {
        subspaces,
        params,
        grid,
        report,
    })
}
