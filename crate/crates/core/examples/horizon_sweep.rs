//! Gap versus horizon for randomly perturbed nominal models. Most curves are
//! minimized at an end of the horizon grid.

use rhc_lq::harness::config::{reference_system, reference_terminal, SweepParams};
use rhc_lq::harness::sweep::{sweep, ArgminClass};
use rhc_lq::CostSpec;

fn main() -> Result<(), rhc_lq::harness::HarnessError> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let truth = reference_system(1.0);
    let cost = CostSpec::identity(2, 1);
    let res = sweep(&truth, &cost, &reference_terminal(), &SweepParams::default(), seed)?;

    for s in &res.summaries {
        let curve: Vec<String> = res
            .gap_curve(s.model_index)
            .iter()
            .map(|g| g.map_or("-".into(), |g| format!("{g:.3}")))
            .collect();
        let class = match s.class {
            Some(ArgminClass::Smallest) => "smallest",
            Some(ArgminClass::Largest) => "largest",
            Some(ArgminClass::Interior) => "interior",
            None => "unstable",
        };
        println!("model {:>2} argmin {:>8}  {}", s.model_index, class, curve.join(" "));
    }
    match res.endpoint_fraction() {
        Some(f) => println!("endpoint share {f:.2}"),
        None => println!("no model stable across the grid"),
    }
    Ok(())
}
