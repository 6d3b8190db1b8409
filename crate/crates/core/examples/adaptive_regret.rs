//! Adaptive receding-horizon control with a fixed short horizon versus the
//! logarithmic horizon schedule. Regret/sqrt(T) keeps growing for the fixed
//! horizon and levels off for the schedule.

use nalgebra::DMatrix;
use rhc_lq::harness::config::{AdaptiveParams, ModeSpec};
use rhc_lq::harness::regret::regret_experiment;
use rhc_lq::adaptive::HorizonMode;
use rhc_lq::{CostSpec, LinearSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.5, 1.0]),
        1.0,
        0.0,
    )?;
    let cost = CostSpec::identity(2, 1);
    let params = AdaptiveParams {
        modes: vec![ModeSpec(HorizonMode::Fixed(2)), ModeSpec(HorizonMode::AdaptiveLog)],
        total_steps: 1 << 14,
        seeds: 8,
        warmup_epochs: 7,
        ..AdaptiveParams::default()
    };
    let res = regret_experiment(&sys, &cost, &params, 7)?;
    println!("J* = {:.4}, gamma_bar = {:?}", res.j_star, res.gamma_bar);
    for m in &res.modes {
        let ratios: Vec<String> = m
            .median_sqrt_t_ratio
            .iter()
            .filter(|(t, _)| t.is_power_of_two() && t.ilog2() >= 8)
            .map(|(t, r)| format!("2^{}:{r:.1}", t.ilog2()))
            .collect();
        println!("{:>12} diverged {}/{}  Regret/sqrt(T) {}", m.mode, m.diverged, m.runs, ratios.join(" "));
    }
    Ok(())
}
