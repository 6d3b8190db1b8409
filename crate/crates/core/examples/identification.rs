//! Least-squares identification from independent rollouts. The median error
//! falls like T^{-1/2}.

use rhc_lq::harness::config::{reference_system, IdentifyParams};
use rhc_lq::harness::identify::identify;

fn main() -> Result<(), rhc_lq::harness::HarnessError> {
    let params = IdentifyParams {
        t_grid: vec![64, 256, 1024, 4096],
        seeds: 20,
        ..IdentifyParams::default()
    };
    let res = identify(&reference_system(1.0), &params, 6)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "T", "median", "q1", "q3");
    for r in &res.rows {
        let f = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.4}"));
        println!("{:>6} {:>10} {:>10} {:>10}", r.t, f(r.median), f(r.q1), f(r.q3));
    }
    if let Some(s) = res.slope {
        println!("log-log slope {s:.3}");
    }
    Ok(())
}
