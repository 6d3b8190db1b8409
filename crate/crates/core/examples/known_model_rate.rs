//! With the true model, the receding-horizon gap shrinks geometrically in the
//! horizon. Compare the measured gap against the known-model bound.

use nalgebra::DMatrix;
use rhc_lq::bounds::{self, BoundContext};
use rhc_lq::{performance, riccati, CostSpec, LinearSystem, OptimalSolution, RhcConfig};

fn main() -> rhc_lq::Result<()> {
    let sys = LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.0, 0.7]),
        DMatrix::from_row_slice(2, 1, &[0.3, 0.5]),
        1.0,
        0.0,
    )?;
    let cost = CostSpec::identity(2, 1);
    let opt = OptimalSolution::solve(&sys, &cost)?;
    // Terminal weight off by 0.01 in spectral norm.
    let terminal = opt.p_star() + DMatrix::identity(2, 2) * 0.01;
    let ctx = BoundContext::from_matrices(&sys, &cost, &opt, 0.0, 0.01)?;

    println!("{:>3} {:>12} {:>12} {:>6}", "N", "gap", "bound", "valid");
    for n in (1..=31).step_by(3) {
        let k = riccati::mpc_gain(&sys, &cost, &RhcConfig::new(n, terminal.clone())?)?;
        let gap = performance::performance_gap_with(&sys, &cost, &k, &opt)?;
        let b = bounds::known_model_gap_bound(&ctx, n)?;
        println!("{n:>3} {gap:>12.4e} {:>12.4e} {:>6}", b.value, b.preconditions_met);
    }
    Ok(())
}
