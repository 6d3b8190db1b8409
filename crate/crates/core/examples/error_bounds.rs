//! Bound the gap of a receding-horizon controller designed on an estimated
//! model, and ask which way the horizon should move.

use nalgebra::DMatrix;
use rhc_lq::bounds::{self, BoundContext};
use rhc_lq::{performance, riccati, CostSpec, LinearSystem, OptimalSolution, RhcConfig};

fn main() -> rhc_lq::Result<()> {
    let truth = LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]),
        DMatrix::from_row_slice(2, 1, &[0.2, 0.3]),
        1.0,
        0.0,
    )?;
    let nominal = truth.with_matrices(
        truth.a() + DMatrix::from_element(2, 2, 2e-5),
        truth.b().clone(),
    )?;
    let cost = CostSpec::identity(2, 1);
    let opt = OptimalSolution::solve(&truth, &cost)?;
    let eps_m = truth.model_error(&nominal)?;

    for (label, terminal) in [
        ("P = P*", opt.p_star().clone()),
        ("P = 0", DMatrix::zeros(2, 2)),
    ] {
        let eps_p = rhc_lq::linalg::spectral_norm(&(&terminal - opt.p_star()));
        let ctx = BoundContext::from_matrices(&truth, &cost, &opt, eps_m, eps_p)?;
        println!("{label}: eps_m = {eps_m:.2e}, eps_p = {eps_p:.2e}");
        println!("  recommendation: {:?}", bounds::horizon_recommendation(&ctx)?);
        for n in [1, 2, 4, 8, 16] {
            let k = riccati::mpc_gain(&nominal, &cost, &RhcConfig::new(n, terminal.clone())?)?;
            let gap = performance::performance_gap_with(&truth, &cost, &k, &opt)?;
            let b = bounds::mpc_gap_bound(&ctx, n)?;
            println!(
                "  N={n:>2} gap {gap:.3e}  bound {:.3e}  e_hat {:.3e}  preconditions {}",
                b.value,
                bounds::e_hat(&ctx, n - 1).value,
                b.preconditions_met
            );
        }
    }
    Ok(())
}
