//! Solve the Riccati equation for a small unstable plant and report the
//! optimal gain, its cost and the decay constants derived from `P*`.

use nalgebra::DMatrix;
use rhc_lq::{bounds, performance, CostSpec, LinearSystem, OptimalSolution};

fn main() -> rhc_lq::Result<()> {
    let sys = LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 0.5]),
        DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
        1.0,
        0.0,
    )?;
    let cost = CostSpec::identity(2, 1);
    let opt = OptimalSolution::solve(&sys, &cost)?;
    let beta = bounds::beta_star(opt.p_star(), cost.q())?;

    println!("P* = {}", opt.p_star());
    println!("K* = {}", opt.k_star);
    println!("J* = {:.6}", opt.j_star);
    println!("rho(A - B K*) = {:.6}", performance::spectral_radius(&opt.l_star)?);
    println!("iterations = {}, residual = {:.2e}", opt.riccati.iterations, opt.riccati.residual);
    println!("beta* = {beta:.6}, gamma_bar = {:.6}", bounds::gamma_bar(beta));
    Ok(())
}
