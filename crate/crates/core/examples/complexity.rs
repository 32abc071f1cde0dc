//! Eigendecomposition cost for plans with equal M but different decimation,
//! and for the undecimated full aperture.

use ofdm_music::music::{flop_estimate, range_resolution};
use ofdm_music::signal::RadioConfig;
use ofdm_music::smoothing::{make_plan, PlanParams};

fn main() -> ofdm_music::Result<()> {
    let config = RadioConfig::reference();
    println!("{:>5} {:>5} {:>5} {:>6} {:>10} {:>16}", "A_f", "D_f", "M", "L", "dr [m]", "flops");
    for (a_f, d_f, s_f) in [(15, 1, 15), (141, 10, 1), (701, 50, 1), (1401, 100, 1), (1401, 1, 1)] {
        let plan = make_plan(
            &config,
            PlanParams {
                aperture_f: a_f,
                decim_f: d_f,
                stride_f: s_f,
                ..PlanParams::REFERENCE
            },
        )?;
        println!(
            "{a_f:>5} {d_f:>5} {:>5} {:>6} {:>10.3} {:>16}",
            plan.m(),
            plan.l(),
            range_resolution(&config, &plan),
            flop_estimate(plan.m() as u64, 2)
        );
    }
    Ok(())
}
