//! Oracle checks of the kernel and the fractional Laplacian evaluator.

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::ferrari::{calibrate_ferrari, calibrate_ferrari_with, frac_laplacian_radial, Bracket, FerrariEvaluator, FnProfile, RadialProfile};
use crate::grid::{build_grid, GridLayout, RadialFunction};
use crate::params::KernelParams;
use crate::potentials::unit_hat;
use crate::riesz::{assemble_kernel, newton_tail_check, riesz_apply};

pub const BETA_TOLERANCE: f64 = 5e-4;
pub const REPEATABILITY_TOLERANCE: f64 = 1e-6;
pub const SCALING_TOLERANCE: f64 = 1e-8;
pub const SCALING_FACTORS: [f64; 3] = [0.5, 2.0, 4.0];

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    /// Relative error, or the largest one over the sample.
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl OracleCheck {
    fn new(name: String, measured: f64, expected: f64, error: f64, tolerance: f64) -> Self {
        Self { name, measured, expected, error, tolerance, pass: error <= tolerance, note: None }
    }

    fn failed(name: String, tolerance: f64, note: String) -> Self {
        Self {
            name,
            measured: f64::NAN,
            expected: f64::NAN,
            error: f64::NAN,
            tolerance,
            pass: false,
            note: Some(note),
        }
    }
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<34} measured {:>14.8e}  expected {:>14.8e}  err {:>9.2e}  tol {:>7.1e}  {}",
            self.name,
            self.measured,
            self.expected,
            self.error,
            self.tolerance,
            if self.pass { "pass" } else { "FAIL" }
        )?;
        if let Some(n) = &self.note {
            write!(f, "  [{n}]")?;
        }
        Ok(())
    }
}

/// `(I_α (1+r²)^{-(d+α)/2})(0) = Γ((d-α)/2) / (2^α Γ((d+α)/2))` on the solver grid.
pub fn beta_oracle(params: &KernelParams) -> Result<OracleCheck> {
    let grid = build_grid(params, &GridLayout::solver())?;
    let kernel = assemble_kernel(&grid, params)?;
    let e = -(params.dim() + params.alpha) / 2.0;
    let rho = RadialFunction::from_fn(grid, |r| (1.0 + r * r).powf(e))?;
    let v = riesz_apply(&kernel, &rho)?.values()[0];
    let want = params.kappa();
    Ok(OracleCheck::new(
        format!("beta oracle d={} alpha={}", params.d, params.alpha),
        v,
        want,
        (v / want - 1.0).abs(),
        BETA_TOLERANCE,
    ))
}

/// Calibrates twice, the second time with finer panels, and compares the constants.
pub fn ferrari_repeatability(params: &KernelParams) -> (OracleCheck, Option<FerrariEvaluator>) {
    let name = "ferrari calibration repeatability".to_string();
    let first = match calibrate_ferrari(params) {
        Ok(e) => e,
        Err(e) => return (OracleCheck::failed(name, REPEATABILITY_TOLERANCE, e.to_string()), None),
    };
    let mut finer = *first.controls();
    finer.panels_per_unit += 4;
    match calibrate_ferrari_with(params, &finer) {
        Ok(second) => {
            let err = (first.constant() / second.constant() - 1.0).abs();
            let check = OracleCheck::new(name, first.constant(), second.constant(), err, REPEATABILITY_TOLERANCE);
            (check, Some(first))
        }
        Err(e) => (OracleCheck::failed(name, REPEATABILITY_TOLERANCE, e.to_string()), None),
    }
}

/// `(-Δ)^{α/2}[u(λ·)](r) = λ^α ((-Δ)^{α/2}u)(λr)` for the bracket `(1+r²)^{-(d-α)/2}`.
pub fn ferrari_scaling(eval: &FerrariEvaluator) -> Result<OracleCheck> {
    let params = eval.params();
    let g = Bracket { beta: params.dim() - params.alpha };
    let mut worst: f64 = 0.0;
    for &lambda in &SCALING_FACTORS {
        let scaled = FnProfile {
            value: |s: f64| g.value(lambda * s),
            d1: |s: f64| lambda * g.d1(lambda * s),
            d2: |s: f64| lambda * lambda * g.d2(lambda * s),
        };
        for &r in &[0.3, 1.0, 3.0, 10.0] {
            let lhs = frac_laplacian_radial(eval, &scaled, r)?;
            let rhs = lambda.powf(params.alpha) * frac_laplacian_radial(eval, &g, lambda * r)?;
            worst = worst.max((lhs / rhs - 1.0).abs());
        }
    }
    Ok(OracleCheck::new("ferrari scaling covariance".into(), worst, 0.0, worst, SCALING_TOLERANCE))
}

/// `r^{d-α}(I_α f)(r) → A_α` for a unit-mass hat, on the last decade of the solver grid.
pub fn newton_tail_hat(params: &KernelParams) -> Result<OracleCheck> {
    let grid = build_grid(params, &GridLayout::solver())?;
    let kernel = assemble_kernel(&grid, params)?;
    let report = newton_tail_check(&unit_hat(&grid)?, &kernel)?;
    let mut check = OracleCheck::new(
        "newton tail of a unit hat".into(),
        report.curve.last().map(|c| c.1).unwrap_or(f64::NAN),
        report.predicted,
        report.max_deviation,
        crate::riesz::NEWTON_TAIL_TOLERANCE,
    );
    check.pass = report.pass;
    Ok(check)
}

/// All oracles for one `(d, α)`.
pub fn run_selftest(params: &KernelParams) -> Result<Vec<OracleCheck>> {
    let mut out = vec![beta_oracle(params)?];
    let (repeat, eval) = ferrari_repeatability(params);
    out.push(repeat);
    match eval {
        Some(eval) => out.push(ferrari_scaling(&eval)?),
        None => out.push(OracleCheck::failed(
            "ferrari scaling covariance".into(),
            SCALING_TOLERANCE,
            "no calibrated evaluator".into(),
        )),
    }
    out.push(newton_tail_hat(params)?);
    Ok(out)
}
