//! Acceptance suite: one line per criterion, all criteria must pass.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use riesz_tf::barriers::Bounds;
use riesz_tf::selftest::{beta_oracle, ferrari_repeatability, ferrari_scaling, newton_tail_hat};
use riesz_tf::solver::{energy, InitialGuess};
use riesz_tf::*;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn kernel_for(d: usize, alpha: f64, layout: &GridLayout) -> KernelMatrix {
    let kp = KernelParams::new(d, alpha).unwrap();
    let grid = build_grid(&kp, layout).unwrap();
    assemble_kernel(&grid, &kp).unwrap()
}

struct Tail {
    params: ProblemParams,
    potential: Potential,
    result: MinimizerResult,
}

/// Graphene-case solve on the regime's tail layout, optionally with R_max scaled.
fn tail_solve(q: f64, bump: bool, r_scale: f64) -> Tail {
    let params = ProblemParams::new(2, 1.0, q).unwrap();
    let layout = tail_layout(&params).unwrap();
    let layout = layout.with_r_max(layout.r_max * r_scale);
    let kernel = kernel_for(2, 1.0, &layout);
    let potential = if bump {
        bump_potential(1.0, 1.0, kernel.grid()).unwrap()
    } else {
        potential_vz(1.0, kernel.params(), kernel.grid()).unwrap()
    };
    let result = solve(&potential, &kernel, &params, &SolveOptions::default()).unwrap();
    assert!(result.converged, "q = {q}: {:?}", result.diagnostics);
    Tail { params, potential, result }
}

fn beta_oracles() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, a) in [(2, 1.0), (3, 0.5), (3, 1.5)] {
        let c = beta_oracle(&KernelParams::new(d, a).unwrap()).unwrap();
        ok &= c.pass;
        parts.push(format!("(d={d}, alpha={a}) err {:.1e}", c.error));
    }
    (ok, parts.join(", "))
}

fn newton_tail() -> Outcome {
    let c = newton_tail_hat(&KernelParams::new(2, 1.0).unwrap()).unwrap();
    (c.pass, format!("max deviation {:.2e} on the last decade (tol 2%)", c.error))
}

fn ferrari() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, a) in [(2, 1.0), (3, 1.5)] {
        let (repeat, eval) = ferrari_repeatability(&KernelParams::new(d, a).unwrap());
        let scaling = ferrari_scaling(&eval.expect("calibrated")).unwrap();
        ok &= repeat.pass && scaling.pass;
        parts.push(format!("(d={d}, alpha={a}) repeat {:.1e} scaling {:.1e}", repeat.error, scaling.error));
    }
    (ok, parts.join(", "))
}

fn barrier_cases(d: usize, alpha: f64, families: &[Family]) -> Outcome {
    let kp = KernelParams::new(d, alpha).unwrap();
    let eval = calibrate_ferrari(&kp).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for &fam in families {
        let barrier = make_barrier(fam, &kp).unwrap();
        let rep = verify_barrier(&eval, &barrier, (1e2, 1e4)).unwrap();
        let pass = rep.pass && rep.expected.bounds == Bounds::TwoSided;
        ok &= pass;
        parts.push(format!("{fam} flat {:.2} slope {:+.3}{}", rep.flatness, rep.slope, if pass { "" } else { " FAIL" }));
    }
    (ok, format!("(d={d}, alpha={alpha}) {}", parts.join("; ")))
}

fn and(a: Outcome, b: Outcome) -> Outcome {
    (a.0 && b.0, format!("{} | {}", a.1, b.1))
}

fn power_map() -> Outcome {
    // γ below d-α, between d-α and d, at d, above d
    let cases = |d: f64, a: f64| {
        [(d - a) / 2.0, d - a / 2.0, d, d + 1.0].map(|gamma| Family::Power { gamma })
    };
    and(barrier_cases(2, 1.0, &cases(2.0, 1.0)), barrier_cases(3, 1.5, &cases(3.0, 1.5)))
}

fn log_barriers() -> Outcome {
    let (d, a) = (3.0, 1.5);
    and(
        barrier_cases(2, 1.0, &[Family::Log { b: 1.0 }, Family::Loglift]),
        barrier_cases(3, a, &[Family::Log { b: (d - a) / a }]),
    )
}

fn regime_matrix() -> Outcome {
    let qs = [1.4, 1.5, 1.6, 5.0 / 3.0, 1.8, 2.0];
    let rows: Vec<(bool, String)> = qs
        .par_iter()
        .map(|&q| {
            let t = tail_solve(q, false, 1.0);
            let spec = classify_regime(&t.params).unwrap();
            let rep = verify_regime(&t.result, &spec).unwrap();
            let fit = rep.fit.as_ref().unwrap();
            let ok = rep.verdict == Verdict::Pass && !rep.conditional;
            (ok, format!("q={q:.4} p={:.3} b={:+.3}", fit.power, fit.log_power))
        })
        .collect();
    (rows.iter().all(|r| r.0), rows.into_iter().map(|r| r.1).collect::<Vec<_>>().join(", "))
}

fn sharp_limit() -> Outcome {
    let t = tail_solve(1.4, false, 1.0);
    let rep = sharp_limit_check(&t.result, &t.potential, &t.params).unwrap();
    (
        rep.verdict == Verdict::Pass,
        format!("measured {:.6e} predicted {:.6e} rel err {:.2e} (tol 5%)", rep.measured, rep.predicted, rep.relative_error),
    )
}

fn mass_trichotomy() -> Outcome {
    let qs = [1.4, 1.6, 1.8, 2.0, 2.2];
    let rows: Vec<(bool, String)> = qs
        .par_iter()
        .map(|&q| {
            let a = tail_solve(q, false, 1.0);
            let b = tail_solve(q, false, 2.0);
            let ma = mass_audit(&a.result, &a.potential, &a.params).unwrap();
            let mb = mass_audit(&b.result, &b.potential, &b.params).unwrap();
            let drift = (b.result.abs_mass / a.result.abs_mass - 1.0).abs();
            let ok = ma.verdict == Verdict::Pass && mb.verdict == Verdict::Pass && drift <= 0.01;
            (ok, format!("q={q} |rho|_1={:.4} gap={:+.4} drift={drift:.1e}", a.result.abs_mass, ma.gap))
        })
        .collect();
    (rows.iter().all(|r| r.0), rows.into_iter().map(|r| r.1).collect::<Vec<_>>().join(", "))
}

fn positivity_and_bounds() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for q in [1.5, 2.2] {
        let t = tail_solve(q, false, 1.0);
        let grid = t.result.rho.grid();
        let cut = grid.r_max() / 10.0;
        let positive = t.result.rho.samples().filter(|(r, _)| *r <= cut).all(|(_, x)| x > 0.0);
        let slack = 1e-12 * t.potential.sup();
        let below = t.result.u.values().iter().zip(t.potential.values().values()).all(|(u, v)| *u <= v + slack);
        ok &= positive && below;
        parts.push(format!("q={q} rho>0 {positive} u<=V {below}"));
        if q > 2.0 {
            let spec = classify_regime(&t.params).unwrap();
            let rep = verify_regime(&t.result, &spec).unwrap();
            let p = rep.fit.as_ref().unwrap().power;
            let inside = (2.4..=3.1).contains(&p);
            ok &= inside && rep.verdict == Verdict::Pass;
            parts.push(format!("sandwich p={p:.4}"));
        }
    }
    (ok, parts.join(", "))
}

fn sign_change_and_ordering() -> Outcome {
    let kernel = kernel_for(2, 1.0, &GridLayout::solver());
    let params = ProblemParams::new(2, 1.0, 1.5).unwrap();
    let opts = SolveOptions::default();
    let bump = bump_potential(1.0, 1.0, kernel.grid()).unwrap();
    let free = solve(&bump, &kernel, &params, &opts).unwrap();
    let plus = solve(&bump, &kernel, &params, &opts.with_mode(Mode::Nonnegative)).unwrap();
    let sign_change = free.min() < 0.0 && free.max() > 0.0;
    let order = ordering_check(&free, &plus).unwrap();
    let vz = potential_vz(1.0, kernel.params(), kernel.grid()).unwrap();
    let a = solve(&vz, &kernel, &params, &opts).unwrap();
    let b = solve(&vz, &kernel, &params, &opts.with_mode(Mode::Nonnegative)).unwrap();
    let same = ordering_check(&a, &b).unwrap();
    let ok = free.converged && plus.converged && sign_change && order.strict() && same.coincide;
    (
        ok,
        format!(
            "bump min rho {:.3e}, strict fraction {:.3}, V_Z max difference {:.1e}",
            free.min(),
            order.strict_fraction,
            same.max_difference
        ),
    )
}

fn uniqueness_and_convexity() -> Outcome {
    let kernel = kernel_for(2, 1.0, &GridLayout::solver());
    let params = ProblemParams::new(2, 1.0, 1.4).unwrap();
    let vz = potential_vz(1.0, kernel.params(), kernel.grid()).unwrap();
    let opts = SolveOptions::default();
    let a = solve(&vz, &kernel, &params, &opts).unwrap();
    let b = solve(&vz, &kernel, &params, &SolveOptions { init: InitialGuess::Zero, ..opts }).unwrap();
    let scale = a.rho.max_abs();
    let agree = a.rho.values().iter().zip(b.rho.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let unique = agree <= 10.0 * opts.tol * scale.max(1.0);
    let monotone = [&a, &b]
        .iter()
        .all(|r| r.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let grid: Arc<RadialGrid> = kernel.grid().clone();
    let mut convex = 0;
    for _ in 0..100 {
        let mut draw = || {
            RadialFunction::from_fn(grid.clone(), |r| a.rho.eval(r) + rng.gen_range(-1.0..1.0) * scale).unwrap()
        };
        let (x, y) = (draw(), draw());
        let mid = RadialFunction::new(grid.clone(), x.values().iter().zip(y.values()).map(|(s, t)| 0.5 * (s + t)).collect())
            .unwrap();
        let lhs = energy(&mid, &vz, &kernel, &params).unwrap();
        let rhs = 0.5 * (energy(&x, &vz, &kernel, &params).unwrap() + energy(&y, &vz, &kernel, &params).unwrap());
        convex += usize::from(lhs <= rhs);
    }
    (
        unique && monotone && convex == 100,
        format!("init difference {agree:.1e}, energy nonincreasing {monotone}, midpoint convex {convex}/100"),
    )
}

fn upper_bounds() -> Outcome {
    let rows: Vec<(bool, String)> = [1.4, 1.6, 1.8]
        .par_iter()
        .map(|&q| {
            let t = tail_solve(q, true, 1.0);
            let spec = classify_regime(&t.params).unwrap();
            let rep = verify_regime(&t.result, &spec).unwrap();
            let slope = rep.checks.iter().map(|c| c.measured).next().unwrap_or(f64::NAN);
            (rep.verdict == Verdict::Pass, format!("q={q} slope {slope:+.3} (conditional {})", rep.conditional))
        })
        .collect();
    (rows.iter().all(|r| r.0), rows.into_iter().map(|r| r.1).collect::<Vec<_>>().join(", "))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        ("1 kernel oracle", beta_oracles),
        ("2 newton tail", newton_tail),
        ("3 ferrari calibration and scaling", ferrari),
        ("4 power barrier sign and decay map", power_map),
        ("5 log barriers", log_barriers),
        ("6 regime matrix", regime_matrix),
        ("7 sharp limit", sharp_limit),
        ("8 mass trichotomy", mass_trichotomy),
        ("9 positivity and bounds", positivity_and_bounds),
        ("10 sign change and ordering", sign_change_and_ordering),
        ("11 uniqueness and convexity", uniqueness_and_convexity),
        ("12 conditional upper bounds", upper_bounds),
    ];
    let outcomes: Vec<Outcome> = criteria.par_iter().map(|(_, f)| f()).collect();
    let mut failed = Vec::new();
    for ((name, _), (ok, detail)) in criteria.iter().zip(&outcomes) {
        println!("[{}] {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
