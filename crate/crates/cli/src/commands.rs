use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use riesz_tf::asymptotics::{fit_decay, regime_window, tail_r_max, FitModel};
use riesz_tf::barriers::{make_barrier, verify_barrier_with, BarrierReport, Family};
use riesz_tf::potentials::PotentialTable;
use riesz_tf::selftest::run_selftest;
use riesz_tf::{
    assemble_kernel, build_grid, bump_potential, calibrate_ferrari, classify_regime, mass_audit, ordering_check,
    potential_vz, sharp_limit_check, solve, verify_regime, DecayFit, GridLayout, KernelMatrix, KernelParams,
    MassAudit, MinimizerResult, Mode, OrderingReport, Potential, ProblemParams, RegimeReport, SharpLimitReport, Verdict,
};
use serde_json::{json, Value};

use crate::config::{PotentialSpec, RMax, RunConfig, Verify};
use crate::output::{ensure_dir, num, write_density, write_json, write_rows};
use crate::CliError;

/// Exit status of a command that ran to completion.
pub type Status = i32;
pub const OK: Status = 0;
pub const NUMERICAL: Status = 2;

fn layout_for(cfg: &RunConfig, params: &ProblemParams) -> Result<GridLayout, CliError> {
    let r_max = match cfg.r_max {
        RMax::Fixed(r) => r,
        RMax::Auto => tail_r_max(params)?,
    };
    Ok(GridLayout::new(cfg.inner, cfg.per_decade, r_max)?)
}

fn build_potential(spec: &PotentialSpec, kernel: &KernelMatrix) -> Result<Potential, CliError> {
    let grid = kernel.grid();
    Ok(match spec {
        PotentialSpec::Vz(z) => potential_vz(*z, kernel.params(), grid)?,
        PotentialSpec::Bump { height, radius } => bump_potential(*height, *radius, grid)?,
        PotentialSpec::Source(path) => {
            let table = PotentialTable::from_path(path)?;
            if table.f.is_none() {
                return Err(CliError::Config(format!("{}: source potentials need an f column", path.display())));
            }
            table.to_potential(grid, Some(kernel))?
        }
        PotentialSpec::File(path) => PotentialTable::from_path(path)?.to_potential(grid, Some(kernel))?,
    })
}

#[derive(Debug, Default)]
struct Checks {
    regime: Option<Result<RegimeReport, String>>,
    mass: Option<Result<MassAudit, String>>,
    sharp: Option<Result<SharpLimitReport, String>>,
    ordering: Option<Result<OrderingReport, String>>,
}

fn verdict_of<T>(check: &Option<Result<T, String>>, f: impl Fn(&T) -> Verdict) -> Verdict {
    match check {
        None => Verdict::Skipped,
        Some(Ok(r)) => f(r),
        Some(Err(_)) => Verdict::Fail,
    }
}

impl Checks {
    fn regime_verdict(&self) -> Verdict {
        verdict_of(&self.regime, |r| r.verdict)
    }
    fn mass_verdict(&self) -> Verdict {
        verdict_of(&self.mass, |r| r.verdict)
    }
    fn sharp_verdict(&self) -> Verdict {
        verdict_of(&self.sharp, |r| r.verdict)
    }
    fn ordering_verdict(&self) -> Verdict {
        verdict_of(&self.ordering, |r| if r.ordered { Verdict::Pass } else { Verdict::Fail })
    }

    fn all_pass(&self) -> bool {
        [self.regime_verdict(), self.mass_verdict(), self.sharp_verdict(), self.ordering_verdict()]
            .iter()
            .all(|v| *v != Verdict::Fail)
    }
}

fn to_json<T: serde::Serialize>(check: &Option<Result<T, String>>) -> Value {
    match check {
        None => Value::Null,
        Some(Ok(r)) => serde_json::to_value(r).unwrap_or(Value::Null),
        Some(Err(e)) => json!({ "verdict": "fail", "error": e }),
    }
}

fn run_checks(
    verify: Verify,
    result: &MinimizerResult,
    potential: &Potential,
    kernel: &KernelMatrix,
    params: &ProblemParams,
) -> Checks {
    let mut checks = Checks::default();
    let spec = classify_regime(params);
    if verify.regime {
        checks.regime =
            Some(spec.as_ref().map_err(|e| e.to_string()).and_then(|s| verify_regime(result, s).map_err(|e| e.to_string())));
    }
    if verify.mass {
        checks.mass = Some(mass_audit(result, potential, params).map_err(|e| e.to_string()));
    }
    if verify.sharp_limit {
        checks.sharp = Some(sharp_limit_check(result, potential, params).map_err(|e| e.to_string()));
    }
    if verify.ordering {
        let other_mode = match result.mode {
            Mode::Free => Mode::Nonnegative,
            Mode::Nonnegative => Mode::Free,
        };
        checks.ordering = Some(
            solve(potential, kernel, params, &result.options.with_mode(other_mode))
                .map_err(|e| e.to_string())
                .and_then(|other| {
                    if !other.converged {
                        return Err(format!("{other_mode:?} solve did not converge"));
                    }
                    let (free, plus) = if result.mode == Mode::Free { (result, &other) } else { (&other, result) };
                    ordering_check(free, plus).map_err(|e| e.to_string())
                }),
        );
    }
    checks
}

fn solver_json(result: &MinimizerResult) -> Value {
    json!({
        "converged": result.converged,
        "energy": result.energy,
        "residual": result.residual,
        "node_residual": result.node_residual,
        "iterations": result.iterations,
        "mass": result.mass,
        "abs_mass": result.abs_mass,
        "min_rho": result.min(),
        "max_rho": result.max(),
        "mode": result.mode,
        "options": result.options,
        "diagnostics": result.diagnostics,
    })
}

fn metadata(command: &str) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    })
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Status, CliError> {
    let params = ProblemParams::new(cfg.d, cfg.alpha()?, cfg.q()?)?;
    let layout = layout_for(cfg, &params)?;
    let grid = build_grid(&params.kernel(), &layout)?;
    let kernel = assemble_kernel(&grid, &params.kernel())?;
    let potential = build_potential(&cfg.potential, &kernel)?;
    let result = solve(&potential, &kernel, &params, &cfg.options)?;

    ensure_dir(&cfg.out)?;
    write_density(&cfg.out, &result, &potential)?;
    let checks = if result.converged {
        run_checks(cfg.verify, &result, &potential, &kernel, &params)
    } else {
        Checks::default()
    };
    let spec = classify_regime(&params)?;
    let pass = result.converged && checks.all_pass();
    let report = json!({
        "metadata": metadata("solve"),
        "params": { "d": params.d, "alpha": params.alpha, "q": params.q, "thresholds": params.thresholds() },
        "regime": spec.id,
        "layout": layout,
        "nodes": grid.len(),
        "potential": {
            "spec": cfg.potential.to_string(),
            "provenance": potential.provenance(),
            "source_mass": potential.source_mass(),
        },
        "solver": solver_json(&result),
        "verdicts": {
            "regime": to_json(&checks.regime),
            "mass": to_json(&checks.mass),
            "sharp_limit": to_json(&checks.sharp),
            "ordering": to_json(&checks.ordering),
        },
        "pass": pass,
    });
    write_json(&cfg.out.join("result.json"), &report)?;

    println!(
        "d={} alpha={} q={}  regime {}  nodes {}  R_max {:e}",
        params.d,
        params.alpha,
        params.q,
        spec.id,
        grid.len(),
        layout.r_max
    );
    println!(
        "solver  converged {}  iterations {}  energy {:.10e}  residual {:.3e}  mass {:.8}  |rho|_1 {:.8}",
        result.converged, result.iterations, result.energy, result.residual, result.mass, result.abs_mass
    );
    if !result.converged {
        let diag = json!({ "error": "solver did not converge", "solver": solver_json(&result) });
        eprintln!("{}", serde_json::to_string_pretty(&diag).unwrap_or_default());
        return Ok(NUMERICAL);
    }
    print_check(&checks.regime);
    print_check(&checks.mass);
    print_check(&checks.sharp);
    if let Some(o) = &checks.ordering {
        match o {
            Ok(o) => println!(
                "ordering  min gap {:.3e}  strict fraction {:.4}  max |difference| {:.3e}  {}{}",
                o.min_gap,
                o.strict_fraction,
                o.max_difference,
                if o.ordered { "pass" } else { "fail" },
                if o.coincide { "  (minimizers coincide)" } else { "" }
            ),
            Err(e) => println!("ordering  fail  [{e}]"),
        }
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(if pass { OK } else { NUMERICAL })
}

fn print_check<T: std::fmt::Display>(check: &Option<Result<T, String>>) {
    match check {
        Some(Ok(r)) => println!("{r}"),
        Some(Err(e)) => println!("check failed: {e}"),
        None => {}
    }
}

struct Row {
    q: f64,
    alpha: f64,
    regime: String,
    r_max: f64,
    result: Option<MinimizerResult>,
    fit: Option<DecayFit>,
    checks: Checks,
    error: Option<String>,
}

impl Row {
    fn failed(&self) -> bool {
        self.error.is_some() || !self.result.as_ref().is_some_and(|r| r.converged) || !self.checks.all_pass()
    }

    fn record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let res = self.result.as_ref();
        vec![
            num(self.q),
            num(self.alpha),
            self.regime.clone(),
            num(self.r_max),
            res.map(|r| r.converged.to_string()).unwrap_or_else(|| "false".into()),
            res.map(|r| r.iterations.to_string()).unwrap_or_default(),
            opt(res.map(|r| r.energy)),
            opt(self.fit.as_ref().map(|f| f.power)),
            opt(self.fit.as_ref().map(|f| f.log_power)),
            opt(res.map(|r| r.mass)),
            opt(res.map(|r| r.abs_mass)),
            self.checks.regime_verdict().to_string(),
            self.checks.mass_verdict().to_string(),
            self.checks.sharp_verdict().to_string(),
            self.checks.ordering_verdict().to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

const SWEEP_HEADER: [&str; 16] = [
    "q", "alpha", "regime", "r_max", "converged", "iterations", "energy", "fitted_p", "fitted_b", "mass", "abs_mass",
    "regime_pass", "mass_pass", "sharp_pass", "ordering_pass", "error",
];

fn tail_fit(result: &MinimizerResult, params: &ProblemParams) -> Option<DecayFit> {
    let spec = classify_regime(params).ok()?;
    let window = regime_window(&spec, result.rho.grid().r_max());
    let model = if spec.b != 0.0 { FitModel::PowerLog } else { FitModel::Power };
    if let Ok(fit) = fit_decay(&result.rho, window, model) {
        return Some(fit);
    }
    fit_decay(&result.rho.map(f64::abs).ok()?, window, model).ok()
}

type KernelKey = (u64, u64, usize, usize);

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Status, CliError> {
    if cfg.qs.is_empty() {
        return Err(CliError::Config("sweep needs at least one q".into()));
    }
    let combos: Vec<(f64, f64)> = cfg.alphas.iter().flat_map(|&a| cfg.qs.iter().map(move |&q| (a, q))).collect();
    // layouts and kernels; identical (alpha, layout) pairs share one kernel
    let planned: Vec<Result<(ProblemParams, GridLayout), String>> = combos
        .iter()
        .map(|&(a, q)| {
            let params = ProblemParams::new(cfg.d, a, q).map_err(|e| e.to_string())?;
            let layout = layout_for(cfg, &params).map_err(|e| e.to_string())?;
            Ok((params, layout))
        })
        .collect();
    let key = |p: &ProblemParams, l: &GridLayout| -> KernelKey { (p.alpha.to_bits(), l.r_max.to_bits(), l.inner, l.per_decade) };
    let mut wanted: Vec<(KernelKey, KernelParams, GridLayout)> = Vec::new();
    for (p, l) in planned.iter().flatten() {
        let k = key(p, l);
        if !wanted.iter().any(|w| w.0 == k) {
            wanted.push((k, p.kernel(), *l));
        }
    }
    let kernels: HashMap<KernelKey, Result<Arc<KernelMatrix>, String>> = wanted
        .par_iter()
        .map(|(k, kp, layout)| {
            let built = build_grid(kp, layout).and_then(|g| assemble_kernel(&g, kp)).map(Arc::new).map_err(|e| e.to_string());
            (*k, built)
        })
        .collect();

    let rows: Vec<Row> = combos
        .par_iter()
        .zip(planned.par_iter())
        .map(|(&(alpha, q), plan)| {
            let mut row = Row {
                q,
                alpha,
                regime: String::new(),
                r_max: f64::NAN,
                result: None,
                fit: None,
                checks: Checks::default(),
                error: None,
            };
            let outcome = (|| -> Result<(), String> {
                let (params, layout) = plan.clone()?;
                row.r_max = layout.r_max;
                row.regime = classify_regime(&params).map(|s| s.id.to_string()).unwrap_or_default();
                let kernel = kernels[&key(&params, &layout)].clone()?;
                let potential = build_potential(&cfg.potential, &kernel).map_err(|e| e.to_string())?;
                let result = solve(&potential, &kernel, &params, &cfg.options).map_err(|e| e.to_string())?;
                if result.converged {
                    row.fit = tail_fit(&result, &params);
                    row.checks = run_checks(cfg.verify, &result, &potential, &kernel, &params);
                } else {
                    row.error = result.diagnostics.clone().or_else(|| Some("did not converge".into()));
                }
                row.result = Some(result);
                Ok(())
            })();
            if let Err(e) = outcome {
                row.error = Some(e);
            }
            row
        })
        .collect();

    ensure_dir(&cfg.out)?;
    let records: Vec<Vec<String>> = rows.iter().map(Row::record).collect();
    write_rows(&cfg.out.join("sweep.csv"), &SWEEP_HEADER, &records)?;
    println!(
        "{:>8} {:>6} {:>12} {:>9} {:>9} {:>9} {:>10} {:>8} {:>8} {:>8} {:>8}",
        "q", "alpha", "regime", "R_max", "p", "b", "|rho|_1", "regime", "mass", "sharp", "ordering"
    );
    for r in &rows {
        println!(
            "{:>8.5} {:>6} {:>12} {:>9.1e} {:>9.4} {:>9.4} {:>10.6} {:>8} {:>8} {:>8} {:>8}{}",
            r.q,
            r.alpha,
            r.regime,
            r.r_max,
            r.fit.as_ref().map_or(f64::NAN, |f| f.power),
            r.fit.as_ref().map_or(f64::NAN, |f| f.log_power),
            r.result.as_ref().map_or(f64::NAN, |x| x.abs_mass),
            r.checks.regime_verdict().to_string(),
            r.checks.mass_verdict().to_string(),
            r.checks.sharp_verdict().to_string(),
            r.checks.ordering_verdict().to_string(),
            r.error.as_ref().map(|e| format!("  [{e}]")).unwrap_or_default()
        );
    }
    println!("wrote {}", cfg.out.join("sweep.csv").display());
    Ok(if rows.iter().any(Row::failed) { NUMERICAL } else { OK })
}

fn default_barriers(d: f64, alpha: f64) -> Vec<Family> {
    vec![
        Family::Gbeta { beta: d - alpha / 2.0 },
        Family::Log { b: 1.0 },
        Family::Loglift,
        Family::Power { gamma: (d - alpha) / 2.0 },
        Family::Power { gamma: d - alpha / 2.0 },
        Family::Power { gamma: d },
        Family::Power { gamma: d + 1.0 },
    ]
}

pub fn cmd_verify_barriers(cfg: &RunConfig) -> Result<Status, CliError> {
    let kp = KernelParams::new(cfg.d, cfg.alpha()?)?;
    let (families, explicit) = match &cfg.barriers {
        Some(list) => (list.clone(), true),
        None => (default_barriers(kp.dim(), kp.alpha), false),
    };
    let mut barriers = Vec::new();
    for fam in families {
        match make_barrier(fam, &kp) {
            Ok(b) => barriers.push(b),
            Err(e) if explicit => return Err(e.into()),
            Err(e) => println!("skipping {fam}: {e}"),
        }
    }
    let eval = calibrate_ferrari(&kp)?;
    let reports: Vec<BarrierReport> = barriers
        .iter()
        .map(|b| verify_barrier_with(&eval, b, cfg.window, cfg.radii))
        .collect::<Result<_, _>>()?;

    ensure_dir(&cfg.out)?;
    let mut rows = Vec::new();
    for rep in &reports {
        for s in &rep.samples {
            rows.push(vec![rep.family.to_string(), num(s.r), num(s.value), num(s.compensated)]);
        }
    }
    write_rows(&cfg.out.join("barriers.csv"), &["family", "r", "value", "compensated"], &rows)?;
    write_json(
        &cfg.out.join("barriers.json"),
        &json!({
            "metadata": metadata("verify-barriers"),
            "calibration": { "constant": eval.constant(), "residual": eval.calibration_residual() },
            "reports": reports,
        }),
    )?;
    for rep in &reports {
        println!("{rep}");
    }
    println!("wrote {}", cfg.out.join("barriers.csv").display());
    Ok(if reports.iter().all(|r| r.pass) { OK } else { NUMERICAL })
}

pub fn cmd_selftest(cfg: &RunConfig) -> Result<Status, CliError> {
    let kp = KernelParams::new(cfg.d, cfg.alpha()?)?;
    let checks = run_selftest(&kp)?;
    println!("self-test d={} alpha={}", kp.d, kp.alpha);
    for c in &checks {
        println!("  {c}");
    }
    let pass = checks.iter().all(|c| c.pass);
    println!("{}", if pass { "all self-tests pass" } else { "self-test FAILED" });
    Ok(if pass { OK } else { NUMERICAL })
}

pub fn cmd_regimes(cfg: &RunConfig) -> Result<Status, CliError> {
    let alpha = cfg.alpha()?;
    let kp = KernelParams::new(cfg.d, alpha)?;
    let th = riesz_tf::params::Thresholds::new(cfg.d, alpha);
    let (d, a) = (kp.dim(), alpha);
    println!("d = {}, alpha = {a}", cfg.d);
    println!("  q1 = 2d/(d+alpha)       = {:.6}  (admissibility: q > q1)", th.q1);
    println!("  q2 = (2d-alpha)/d       = {:.6}", th.q2);
    println!("  q3 = (2d+alpha)/(d+alpha) = {:.6}", th.q3);
    println!();
    println!("  {:<12} {:<24} {:<28} {}", "regime", "q range", "rho ~ r^-p (log r)^-b", "");
    let rows = [
        ("i", format!("({:.4}, {:.4})", th.q1, th.q2), format!("p = {}/(q-1)", d - a), "b = 0".to_string()),
        ("ii", format!("q = {:.4}", th.q2), format!("p = {d}"), format!("b = {}", d / a)),
        ("iii", format!("({:.4}, {:.4})", th.q2, th.q3), format!("p = {a}/(2-q)"), "b = 0".into()),
        ("iv", format!("q = {:.4}", th.q3), format!("p = {}", d + a), format!("b = {}", -(d + a) / a)),
        ("v", format!("({:.4}, 2)", th.q3), format!("p = {}", d + a), "b = 0".into()),
        ("linear", "q = 2".into(), format!("p = {}", d + a), "b = 0".into()),
        ("superlinear", "q > 2".into(), format!("{}/(q-1) <= p <= {}", d + a, d + a), "b = 0".into()),
    ];
    for (id, range, p, b) in rows {
        println!("  {id:<12} {range:<24} {p:<28} {b}");
    }
    if !cfg.qs.is_empty() {
        println!();
        for &q in &cfg.qs {
            match ProblemParams::new(cfg.d, alpha, q).and_then(|p| classify_regime(&p)) {
                Ok(s) => println!(
                    "  q = {q:<10.6} regime {:<12} p = {:.6}  b = {:.6}{}",
                    s.id.to_string(),
                    s.p,
                    s.b,
                    s.upper_power.map(|u| format!("  (upper-bound rate {u:.6})")).unwrap_or_default()
                ),
                Err(e) => println!("  q = {q:<10.6} {e}"),
            }
        }
    }
    Ok(OK)
}
