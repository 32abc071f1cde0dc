//! Sub-array bookkeeping for the reference plan and a small toy array.

use ofdm_music::music::{angle_resolution, range_resolution, unambiguous_range};
use ofdm_music::signal::RadioConfig;
use ofdm_music::smoothing::{make_plan, subarray_indices, PlanParams, SubarrayPlan};

fn describe(name: &str, config: &RadioConfig, plan: &SubarrayPlan) {
    let c = plan.counts;
    println!(
        "{name}: M = {} ({} x {}), L = {} ({} x {}), dr = {:.3} m, r_max = {} m, dtheta = {:.1} deg",
        plan.m(),
        c.n_sub_f,
        c.n_sub_a,
        plan.l(),
        c.n_sets_f,
        c.n_sets_a,
        range_resolution(config, plan),
        unambiguous_range(config, plan),
        angle_resolution(config, plan).to_degrees(),
    );
}

fn main() -> ofdm_music::Result<()> {
    let reference = RadioConfig::reference();
    describe("reference", &reference, &make_plan(&reference, PlanParams::REFERENCE)?);

    let toy = RadioConfig::half_wavelength(9, 60e3, 3.5e9, 6)?;
    let plan = make_plan(
        &toy,
        PlanParams {
            aperture_f: 7,
            aperture_a: 5,
            decim_f: 3,
            decim_a: 2,
            stride_f: 1,
            stride_a: 1,
        },
    )?;
    describe("toy", &toy, &plan);
    for ell in 0..plan.l() {
        let (antennas, subcarriers) = subarray_indices(&plan, ell)?;
        println!("  sub-array {ell}: antennas {antennas:?}, subcarriers {subcarriers:?}");
    }
    Ok(())
}
