//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails. Built with `harness = false`.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rhc_lq::adaptive::HorizonMode;
use rhc_lq::bounds::{self, BoundContext, BoundParams, HorizonRecommendation};
use rhc_lq::harness::config::{self, AdaptiveParams, IdentifyParams, ModeSpec, SweepParams};
use rhc_lq::harness::{identify, regret, stats, sweep};
use rhc_lq::performance;
use rhc_lq::riccati::{self, OptimalSolution};
use rhc_lq::rng;
use rhc_lq::{CostSpec, LinearSystem, RhcConfig};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(start: Instant, limit: Option<Duration>) -> bool {
    limit.is_none_or(|l| start.elapsed() <= l)
}

// 1. Riccati difference identities on random instances.
fn identities() -> Outcome {
    let mut worst = [0.0f64; 4];
    for s in 0..100u64 {
        let mut r = rng::stream(1, &[s]);
        let n = r.random_range(1..=4);
        let m = r.random_range(1..=n);
        let rho = r.random_range(0.3..1.2);
        let truth = random_plant(&mut r, n, m, rho);
        let cost = random_cost(&mut r, n, m, 0.5, 0.5);
        let eps = r.random_range(0.0..0.1);
        let ah = truth.a() + random_with_norm(&mut r, n, n, eps);
        let bh = truth.b() + random_with_norm(&mut r, n, m, eps);
        let nominal = truth.with_matrices(ah, bh).unwrap();
        let p1 = random_psd(&mut r, n, 0.5);
        let p2 = random_psd(&mut r, n, 0.5);
        let i = r.random_range(0..=8);

        // One step: R(P1) - R(P2) = L(P1)' (P1 - P2) L(P2).
        let lhs = riccati::riccati_map(&truth, &cost, &p1).unwrap()
            - riccati::riccati_map(&truth, &cost, &p2).unwrap();
        let rhs = riccati::closed_loop(&truth, &cost, &p1).unwrap().transpose()
            * (&p1 - &p2)
            * riccati::closed_loop(&truth, &cost, &p2).unwrap();
        worst[0] = worst[0].max(rel_diff(&lhs, &rhs));

        // i steps on the same model.
        let lhs = riccati::riccati_iterate(&truth, &cost, &p1, i).unwrap()
            - riccati::riccati_iterate(&truth, &cost, &p2, i).unwrap();
        let rhs = riccati::phi(&truth, &cost, &p1, 0, i).unwrap().transpose()
            * (&p1 - &p2)
            * riccati::phi(&truth, &cost, &p2, 0, i).unwrap();
        worst[1] = worst[1].max(rel_diff(&lhs, &rhs));

        // Nominal versus true iterates, via the library terms and via the oracle.
        let lhs = riccati::riccati_iterate(&nominal, &cost, &p1, i).unwrap()
            - riccati::riccati_iterate(&truth, &cost, &p2, i).unwrap();
        let terms = riccati::riccati_difference_terms(&truth, &nominal, &cost, &p1, &p2, i).unwrap();
        worst[2] = worst[2].max(rel_diff(&lhs, &terms.total()));
        let oracle = Pair::new(&truth, &nominal, &cost).difference_rhs(&p1, &p2, i);
        worst[3] = worst[3].max(rel_diff(&lhs, &oracle));
    }
    let pass = worst.iter().all(|&w| w <= 1e-8);
    outcome(
        pass,
        format!(
            "max rel err one-step {:.1e}, multi-step {:.1e}, decomposition {:.1e}, oracle {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

// 2. Receding-horizon gain against backward DP, closed-form cost against simulation.
fn oracles() -> Outcome {
    let mut worst = 0.0f64;
    for s in 0..50u64 {
        let mut r = rng::stream(2, &[s]);
        let n = r.random_range(1..=4);
        let m = r.random_range(1..=n);
        let rho = r.random_range(0.3..1.5);
        let sys = random_plant(&mut r, n, m, rho);
        let cost = random_cost(&mut r, n, m, 0.5, 0.5);
        let terminal = random_psd(&mut r, n, 0.5);
        for horizon in 1..=10 {
            let k = riccati::mpc_gain(&sys, &cost, &RhcConfig::new(horizon, terminal.clone()).unwrap()).unwrap();
            let k_dp = dp_gain(sys.a(), sys.b(), cost.q(), cost.r(), &terminal, horizon);
            worst = worst.max(rel_diff(&k, &k_dp));
        }
    }

    let mut worst_z = 0.0f64;
    let mut checked = 0;
    for s in 0..10u64 {
        let mut r = rng::stream(22, &[s]);
        let n = r.random_range(1..=3);
        let rho = r.random_range(0.3..1.3);
        let sys = random_plant(&mut r, n, 1, rho);
        let cost = CostSpec::identity(n, 1);
        let k = riccati::mpc_gain(&sys, &cost, &RhcConfig::zero_terminal(8, n).unwrap()).unwrap();
        let (_, rho) = performance::closed_loop_matrix(&sys, &k).unwrap();
        if rho > 0.9 {
            continue;
        }
        let j = performance::infinite_horizon_cost(&sys, &cost, &k).unwrap();
        let emp = performance::empirical_cost(&sys, &cost, &k, 4096, 64, 100 + s).unwrap();
        worst_z = worst_z.max((emp.mean - j).abs() / emp.stderr);
        checked += 1;
    }
    let pass = worst <= 1e-9 && worst_z <= 3.0 && checked >= 5;
    outcome(
        pass,
        format!("max rel gain err {worst:.1e} over 500 cases; max |z| {worst_z:.2} over {checked} gains"),
    )
}

/// Relative floating-point allowance on measured differences.
const ROUNDING: f64 = 64.0 * f64::EPSILON;

// 3. Every measured quantity stays below its bound.
fn bound_validity() -> Outcome {
    let mut accepted = 0;
    let mut drawn = 0u64;
    let mut violations = Vec::new();
    let mut checks = 0usize;
    while accepted < 50 && drawn < 10_000 {
        let mut r = rng::stream(3, &[drawn]);
        drawn += 1;
        let inst = sample_bound_instance(&mut r);
        let opt = OptimalSolution::solve(&inst.truth, &inst.cost).unwrap();
        let p_star = opt.p_star();
        let eps_p = norm(&(&inst.terminal - p_star));
        let ctx = BoundContext::from_matrices(&inst.truth, &inst.cost, &opt, inst.eps_m, eps_p).unwrap();
        let n = inst.horizon;
        let f = riccati::riccati_iterate(&inst.nominal, &inst.cost, &inst.terminal, n - 1).unwrap();
        let eps_f = norm(&(&f - p_star));
        let g = bounds::mpc_gap_bound(&ctx, n).unwrap();
        let lemma2 = bounds::controller_gap_bound(&ctx, eps_f).unwrap();
        let e = bounds::e_hat(&ctx, n - 1);
        let ok = g.preconditions_met && lemma2.preconditions_met && e.preconditions_met && ctx.upsilon() >= eps_f;
        if !ok {
            continue;
        }
        accepted += 1;
        // `scale` is the size of the quantities whose difference is measured;
        // the allowance covers rounding in forming that difference.
        let mut check = |name: &str, measured: f64, bound: f64, scale: f64| {
            checks += 1;
            if !(measured <= bound + ROUNDING * scale) {
                violations.push(format!("{name}: {measured:e} > {bound:e}"));
            }
        };

        // Lipschitz constant of the exact-model iteration.
        let p0 = DMatrix::zeros(inst.truth.n(), inst.truth.n());
        for (a, b) in [(&inst.terminal, p_star), (&inst.terminal, &p0)] {
            let d = norm(&(a - b));
            for i in 0..=10 {
                let diff = riccati::riccati_iterate(&inst.truth, &inst.cost, a, i).unwrap()
                    - riccati::riccati_iterate(&inst.truth, &inst.cost, b, i).unwrap();
                let scale = norm(&riccati::riccati_iterate(&inst.truth, &inst.cost, a, i).unwrap());
                check("lipschitz", norm(&diff), bounds::lipschitz_bound(&ctx, i, d), scale);
            }
        }
        // Nominal iterates around P*.
        for i in 0..=10 {
            let x = riccati::riccati_iterate(&inst.nominal, &inst.cost, &inst.terminal, i).unwrap();
            check("riccati_error", norm(&(&x - p_star)), bounds::e_hat(&ctx, i).value, norm(&x));
        }
        // Gain error and controller gap for the gain built from F.
        let k = riccati::gain(&inst.nominal, &inst.cost, &f).unwrap();
        check("gain_gap", norm(&(&k - &opt.k_star)), bounds::gain_gap_bound(&ctx, eps_f), norm(&k));
        let rep = performance::evaluate(&inst.truth, &inst.cost, &k, &opt).unwrap();
        let gap = rep.gap.unwrap_or(f64::INFINITY);
        check("controller_gap", gap, lemma2.value, opt.j_star);
        // Receding-horizon gap.
        let k_mpc = riccati::mpc_gain(&inst.nominal, &inst.cost, &RhcConfig::new(n, inst.terminal.clone()).unwrap()).unwrap();
        let rep = performance::evaluate(&inst.truth, &inst.cost, &k_mpc, &opt).unwrap();
        check("mpc_gap", rep.gap.unwrap_or(f64::INFINITY), g.value, opt.j_star);
    }
    let pass = accepted == 50 && violations.is_empty();
    outcome(
        pass,
        format!(
            "{accepted} instances ({drawn} drawn), {checks} checks, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
        ),
    )
}

/// Least-squares slope of `ln gap` against `N` over the last (up to ten)
/// resolvable points, paired with the slope the bound predicts.
fn known_model_slope(sys: &LinearSystem, cost: &CostSpec, max_n: usize) -> Option<(f64, f64)> {
    let opt = OptimalSolution::solve(sys, cost).ok()?;
    let beta = bounds::beta_star(opt.p_star(), cost.q()).ok()?;
    let floor = 1e-11 * opt.j_star;
    let pts: Vec<(f64, f64)> = (1..=max_n)
        .filter_map(|n| {
            let k = riccati::mpc_gain(sys, cost, &RhcConfig::zero_terminal(n, sys.n()).ok()?).ok()?;
            let gap = performance::evaluate(sys, cost, &k, &opt).ok()?.gap?;
            (gap > floor).then(|| (n as f64, gap.ln()))
        })
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let tail = &pts[pts.len().saturating_sub(10)..];
    let measured = rhc_lq::adaptive::tail_slope(tail.iter().copied());
    Some((measured, 2.0 * (1.0 - 1.0 / beta).ln()))
}

// 4. Decay rate of the exact-model gap in the horizon.
fn known_model_rate() -> Outcome {
    let mut ratios = Vec::new();
    let mut decreasing = true;
    for s in 0..20u64 {
        let mut r = rng::stream(4, &[s]);
        let n = 2 + (s % 3) as usize;
        let u = random_orthogonal(&mut r, n);
        let lam = nalgebra::DVector::from_fn(n, |_, _| {
            let mag: f64 = r.random_range(0.3..0.95);
            if r.random_bool(0.5) { mag } else { -mag }
        });
        let a = &u * DMatrix::from_diagonal(&lam) * u.transpose();
        let b = gaussian(&mut r, n, 1) * 0.3;
        let sys = LinearSystem::new(a, b, 1.0, 0.0).unwrap();
        let cost = CostSpec::identity(n, 1);
        match known_model_slope(&sys, &cost, 80) {
            Some((measured, predicted)) => {
                decreasing &= measured < 0.0;
                ratios.push(measured / predicted);
            }
            None => decreasing = false,
        }
    }
    let sorted = stats::sorted(ratios.iter().copied());
    let med = stats::quantile(&sorted, 0.5).unwrap_or(f64::NAN);

    // Reference: generic Gaussian plants, where the bound's rate is loose.
    let mut generic = Vec::new();
    for s in 0..20u64 {
        let mut r = rng::stream(40, &[s]);
        let n = 2 + (s % 3) as usize;
        let rho = r.random_range(0.5..1.2);
        let sys = random_plant(&mut r, n, 1, rho);
        if let Some((m, p)) = known_model_slope(&sys, &CostSpec::identity(n, 1), 80) {
            generic.push(m / p);
        }
    }
    let pass = sorted.len() == 20 && decreasing && (0.5..=2.0).contains(&med);
    outcome(
        pass,
        format!(
            "median measured/predicted slope {med:.3} (range {:.3}..{:.3}) on weakly actuated symmetric plants; generic Gaussian plants give median {:.2} (informational)",
            sorted.first().copied().unwrap_or(f64::NAN),
            sorted.last().copied().unwrap_or(f64::NAN),
            stats::median(generic).unwrap_or(f64::NAN)
        ),
    )
}

// 5. Horizon sweep phenomenology on the reference plant.
fn sweep_reproduction() -> Outcome {
    let sys = config::reference_system(1.0);
    let cost = CostSpec::identity(2, 1);
    let terminal = config::reference_terminal();
    let params = SweepParams::default();
    let results: Vec<_> = (0..60u64)
        .map(|seed| sweep::sweep(&sys, &cost, &terminal, &params, seed).unwrap())
        .collect();
    let fractions: Vec<f64> = results[..20].iter().filter_map(|r| r.endpoint_fraction()).collect();
    let med = stats::median(fractions.iter().copied()).unwrap_or(0.0);
    let interior = results.iter().filter(|r| r.has_interior_argmin()).count();
    let pass = fractions.len() == 20 && med >= 0.7 && interior >= 1;
    outcome(
        pass,
        format!("median endpoint share {med:.3} over 20 seeds; {interior}/60 seeds have an interior best horizon"),
    )
}

// 6. Least-squares error scaling in the number of rollouts.
fn identification_scaling() -> Outcome {
    let sys = config::reference_system(1.0);
    let res = identify::identify(&sys, &IdentifyParams::default(), 6).unwrap();
    let slope = res.slope.unwrap_or(f64::NAN);
    let failures: usize = res.rows.iter().map(|r| r.failures).sum();
    let pass = (slope - (-0.5)).abs() <= 0.15 && failures == 0;
    let medians: Vec<String> = res
        .rows
        .iter()
        .map(|r| format!("{}:{:.4}", r.t, r.median.unwrap_or(f64::NAN)))
        .collect();
    outcome(pass, format!("log-log slope {slope:.3}; medians {}", medians.join(" ")))
}

// 7. Regret growth of fixed and logarithmic horizons.
fn regret_phenomenology() -> Outcome {
    let sys = LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.5, 1.0]),
        1.0,
        0.0,
    )
    .unwrap();
    let cost = CostSpec::identity(2, 1);
    let params = AdaptiveParams {
        modes: vec![ModeSpec(HorizonMode::Fixed(2)), ModeSpec(HorizonMode::AdaptiveLog)],
        total_steps: 1 << 14,
        seeds: 20,
        warmup_epochs: 7,
        ..AdaptiveParams::default()
    };
    let res = regret::regret_experiment(&sys, &cost, &params, 7).unwrap();
    let fixed = res.mode("fixed:2").unwrap();
    let slopes: Vec<f64> = res.runs_for("fixed:2").filter_map(|r| r.summary.map(|s| s.linear_slope)).collect();
    let positive = slopes.iter().filter(|&&s| s > 0.0).count();
    // One-sided sign test at the 2.1% level: at least 15 of 20 positive.
    let part_a = positive >= 15;
    let adaptive = res.mode("adaptive_log").unwrap();
    let (r10, r12, r14) = (
        adaptive.ratio_at(1 << 10).unwrap_or(f64::NAN),
        adaptive.ratio_at(1 << 12).unwrap_or(f64::NAN),
        adaptive.ratio_at(1 << 14).unwrap_or(f64::NAN),
    );
    let part_b = adaptive.diverged == 0 && r14 <= 2.0 * r10;
    outcome(
        part_a && part_b,
        format!(
            "fixed:2 {positive}/20 positive tail slopes (median {:.3}, {} diverged); adaptive_log median Regret/sqrt(T) {r10:.2} / {r12:.2} / {r14:.2} at 2^10/2^12/2^14 ({} diverged)",
            fixed.median_linear_slope.unwrap_or(f64::NAN),
            fixed.diverged,
            adaptive.diverged
        ),
    )
}

// 8. The bound moves monotonically in the recommended direction.
fn horizon_monotonicity() -> Outcome {
    let mut tested = 0;
    let mut exceptions = 0;
    let mut drawn = 0u64;
    let mut counts = [0usize; 3];
    while tested < 100 && drawn < 100_000 {
        let mut r = rng::stream(8, &[drawn]);
        drawn += 1;
        let p_norm = r.random_range(2.0..20.0);
        let params = BoundParams {
            eps_m: log_uniform(&mut r, 1e-9, 1e-2) / (p_norm * p_norm),
            eps_p: log_uniform(&mut r, 1e-6, 10.0),
            upsilon: p_norm * r.random_range(1.0..2.0),
            beta: p_norm,
            p_star_norm: p_norm,
            sigma_w: 1.0,
            m_dim: r.random_range(1..=3),
            r_min: 1.0,
            r_max: r.random_range(1.0..3.0),
            q_min: 1.0,
        };
        let ctx = BoundContext::new(params).unwrap();
        let Ok(d) = bounds::e_hat_decomposition(&ctx) else { continue };
        if d.rate >= 1.0 {
            continue;
        }
        tested += 1;
        let rec = bounds::horizon_recommendation(&ctx).unwrap();
        let g: Vec<f64> = (1..=30).map(|n| bounds::mpc_gap_bound(&ctx, n).unwrap().value).collect();
        let ok = match rec {
            HorizonRecommendation::IncreaseToInfinity => {
                counts[0] += 1;
                g.windows(2).all(|w| w[1] < w[0])
            }
            HorizonRecommendation::DecreaseToOne => {
                counts[1] += 1;
                g.windows(2).all(|w| w[1] > w[0])
            }
            HorizonRecommendation::Indifferent => {
                counts[2] += 1;
                g.windows(2).all(|w| (w[1] - w[0]).abs() <= 1e-12 * w[0])
            }
        };
        if !ok {
            exceptions += 1;
        }
    }
    outcome(
        tested == 100 && exceptions == 0,
        format!(
            "{tested} contexts ({} increase, {} decrease, {} tie), {exceptions} exceptions",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rhc-lq"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

// 9. Byte-identical CLI output across reruns and thread counts.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut files = 0;
    for kind in ["dare", "synthesize", "evaluate", "bound", "sweep", "identify", "adaptive"] {
        let cfg = match kind {
            "adaptive" => configs_dir().join("adaptive_regret.json"),
            k => configs_dir().join(format!("{k}.json")),
        };
        let cfg = cfg.to_str().unwrap().to_string();
        for format in ["csv", "json"] {
            let mut outputs = Vec::new();
            for (run, jobs) in [(0, "1"), (1, "1"), (2, "4")] {
                let path = dir.path().join(format!("{kind}_{format}_{run}.out"));
                let p = path.to_str().unwrap();
                let res = run_cli(&[kind, "--config", &cfg, "--seed", "5", "--out", p, "--format", format, "--jobs", jobs]);
                match res {
                    Ok(_) => outputs.push(std::fs::read(&path).unwrap()),
                    Err(e) => {
                        mismatches.push(e);
                        break;
                    }
                }
            }
            files += outputs.len();
            if outputs.len() == 3 && !(outputs[0] == outputs[1] && outputs[1] == outputs[2]) {
                mismatches.push(format!("{kind}/{format}"));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{files} output files compared; mismatches: {}", if mismatches.is_empty() { "none".into() } else { mismatches.join(", ") }),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Option<Duration>); 9] = [
        (1, "algebraic identities", identities, Some(Duration::from_secs(10))),
        (2, "oracle equivalence", oracles, Some(Duration::from_secs(60))),
        (3, "bound validity", bound_validity, Some(Duration::from_secs(120))),
        (4, "known-model rate", known_model_rate, None),
        (5, "horizon sweep reproduction", sweep_reproduction, None),
        (6, "identification scaling", identification_scaling, Some(Duration::from_secs(60))),
        (7, "regret phenomenology", regret_phenomenology, Some(Duration::from_secs(600))),
        (8, "bound monotonicity in N", horizon_monotonicity, None),
        (9, "CLI determinism", determinism, None),
    ];
    let mut failed = 0;
    for (id, name, f, limit) in criteria {
        let start = Instant::now();
        let out = f();
        let timely = within(start, limit);
        let pass = out.pass && timely;
        if !pass {
            failed += 1;
        }
        let budget = limit.map(|l| format!(" / {}s budget", l.as_secs())).unwrap_or_default();
        println!(
            "criterion {id} {}: {name} ({:.2}s{budget}): {}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
