//! Fractional Laplacian of radial functions through the one-dimensional
//! representation
//!
//! ```text
//! (-Δ)^{α/2} u(r) = c r^{-α} ∫_1^∞ Φ(τ, r) K(τ) dτ,
//! Φ(τ, r) = u(r) - u(rτ) + (u(r) - u(r/τ)) τ^{α-d},
//! K(τ)    = τ^{-1-α} 2F1((d+α)/2, 1+α/2; d/2; τ^{-2}).
//! ```
//!
//! `K` blows up like `(τ-1)^{-1-α}` at `τ = 1`. On `[1, 1+δ]` the profile
//! term is replaced by its second-order Taylor polynomial, whose moment
//! against `K` is precomputed; the Taylor remainder is added by quadrature
//! on `[1 + 10^{-3}δ, 1 + δ]`, where it is still well above roundoff. Beyond that, Gauss–Legendre panels uniform in
//! `ln(τ-1)` run up to a fixed `T_max`, and the remainder uses the series
//! of `K` at infinity. The `τ` rule does not depend on `r`, so the evaluator
//! is exactly covariant under dilations.
//!
//! The constant `c` is calibrated on the conformal pair
//! `(1+r²)^{-(d-α)/2} ↦ κ^{-1} (1+r²)^{-(d+α)/2}` at `r = 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergeometric::Gauss2F1;
use crate::params::KernelParams;
use crate::quadrature::{legendre, GradedRule};

/// Largest accepted relative change of `c` under quadrature refinement.
pub const CALIBRATION_LIMIT: f64 = 1e-4;

/// Start of the Taylor remainder quadrature, relative to `δ`.
const REMAINDER_CUT: f64 = 1e-3;

/// Environment variables overriding the Gauss–Legendre order and the panel density.
pub const ORDER_ENV: &str = "RIESZ_TF_FERRARI_ORDER";
pub const PANELS_ENV: &str = "RIESZ_TF_FERRARI_PANELS";

/// A radial profile with its first two derivatives.
pub trait RadialProfile {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;
}

/// Closure-backed [`RadialProfile`].
pub struct FnProfile<F, G, H> {
    pub value: F,
    pub d1: G,
    pub d2: H,
}

impl<F, G, H> RadialProfile for FnProfile<F, G, H>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }
    fn d1(&self, r: f64) -> f64 {
        (self.d1)(r)
    }
    fn d2(&self, r: f64) -> f64 {
        (self.d2)(r)
    }
}

/// `(1 + r²)^{-β/2}`.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub beta: f64,
}

impl RadialProfile for Bracket {
    fn value(&self, r: f64) -> f64 {
        (1.0 + r * r).powf(-self.beta / 2.0)
    }
    fn d1(&self, r: f64) -> f64 {
        -self.beta * r * (1.0 + r * r).powf(-self.beta / 2.0 - 1.0)
    }
    fn d2(&self, r: f64) -> f64 {
        let b = self.beta;
        let s = 1.0 + r * r;
        -b * s.powf(-b / 2.0 - 1.0) + b * (b + 2.0) * r * r * s.powf(-b / 2.0 - 2.0)
    }
}

/// Quadrature controls of the `τ` integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FerrariControls {
    /// Width of the Taylor region `[1, 1+δ]`.
    pub delta: f64,
    /// Gauss–Legendre order per panel.
    pub order: usize,
    /// Panels per unit of `ln(τ-1)`.
    pub panels_per_unit: usize,
    pub t_max: f64,
}

impl Default for FerrariControls {
    fn default() -> Self {
        Self { delta: 1e-2, order: 12, panels_per_unit: 8, t_max: 1e12 }
    }
}

impl FerrariControls {
    /// Defaults, overridden by `RIESZ_TF_FERRARI_ORDER` and
    /// `RIESZ_TF_FERRARI_PANELS` when set.
    pub fn from_env() -> Result<Self> {
        let read = |name: &str| -> Result<Option<usize>> {
            match std::env::var(name) {
                Ok(raw) => raw
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Parameter(format!("{name} = {raw:?} is not a positive integer"))),
                Err(_) => Ok(None),
            }
        };
        let mut controls = Self::default();
        if let Some(order) = read(ORDER_ENV)? {
            controls.order = order;
        }
        if let Some(panels) = read(PANELS_ENV)? {
            controls.panels_per_unit = panels;
        }
        controls.validate()?;
        Ok(controls)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::Parameter(format!("Taylor width delta = {} must lie in (0, 0.5)", self.delta)));
        }
        if !(1..=64).contains(&self.order) {
            return Err(Error::Parameter(format!("panel order {} must lie in 1..=64", self.order)));
        }
        if self.panels_per_unit == 0 {
            return Err(Error::Parameter("panels_per_unit must be positive".into()));
        }
        if !(self.t_max > 10.0 && self.t_max.is_finite()) {
            return Err(Error::Parameter(format!("t_max = {} must exceed 10", self.t_max)));
        }
        Ok(())
    }

    /// The controls used to judge calibration: twice the panels, four more points each.
    fn refined(&self) -> Self {
        Self {
            order: (self.order + 4).clamp(12, 64),
            panels_per_unit: 2 * self.panels_per_unit,
            ..*self
        }
    }
}

/// `r`-independent quadrature of the `τ` integral.
#[derive(Debug, Clone)]
struct TauRule {
    /// `(τ, weight · K(τ), τ^{α-d})`.
    nodes: Vec<(f64, f64, f64)>,
    /// `∫_1^{1+δ} (τ-1)² K(τ) dτ`.
    taylor_moment: f64,
    /// `(τ, weight · K(τ), τ^{α-d})` on the remainder interval.
    near: Vec<(f64, f64, f64)>,
    /// `∫_{T}^∞ K` and `∫_{T}^∞ τ^{α-d} K`.
    tail: (f64, f64),
}

impl TauRule {
    fn new(params: &KernelParams, controls: &FerrariControls) -> Result<Self> {
        let d = params.dim();
        let alpha = params.alpha;
        let (a, b, c) = ((d + alpha) / 2.0, 1.0 + alpha / 2.0, d / 2.0);
        let hyp = Gauss2F1::new(a, b, c)?;
        // K(1 + t), with 1 - τ^{-2} formed without cancellation
        let kernel = |t: f64| -> Result<f64> {
            let tau = 1.0 + t;
            let w = t * (2.0 + t) / (tau * tau);
            Ok(tau.powf(-1.0 - alpha) * hyp.eval_with_complement(1.0 / (tau * tau), w)?)
        };

        let mut failure = None;
        let rule = GradedRule::new(16, 1.0 - alpha);
        let taylor_moment = rule.integrate_offsets(controls.delta, |t| match kernel(t) {
            Ok(k) => t * t * k,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }

        // Gauss–Legendre panels uniform in ln(τ - 1)
        let log_panels = |t0: f64, t1: f64| -> Result<Vec<(f64, f64, f64)>> {
            let (s0, s1) = (t0.ln(), t1.ln());
            let panels = ((s1 - s0) * controls.panels_per_unit as f64).ceil() as usize;
            let h = (s1 - s0) / panels as f64;
            let gl = legendre(controls.order);
            let mut out = Vec::with_capacity(panels * gl.len());
            for p in 0..panels {
                let mid = s0 + (p as f64 + 0.5) * h;
                for &(x, wx) in gl {
                    let t = (mid + 0.5 * h * x).exp();
                    let tau = 1.0 + t;
                    out.push((tau, 0.5 * h * wx * t * kernel(t)?, tau.powf(alpha - d)));
                }
            }
            Ok(out)
        };
        let near = log_panels(REMAINDER_CUT * controls.delta, controls.delta)?;
        let nodes = log_panels(controls.delta, controls.t_max - 1.0)?;

        // K(τ) = Σ_k c_k τ^{-1-α-2k} for τ > 1
        let big = controls.t_max;
        let mut coef = 1.0;
        let (mut plain, mut weighted) = (0.0, 0.0);
        for k in 0..40 {
            let kf = k as f64;
            let p1 = coef * big.powf(-alpha - 2.0 * kf) / (alpha + 2.0 * kf);
            let p2 = coef * big.powf(-d - 2.0 * kf) / (d + 2.0 * kf);
            plain += p1;
            weighted += p2;
            if p1.abs() < 1e-18 * plain.abs() {
                break;
            }
            coef *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0));
        }
        Ok(Self { nodes, taylor_moment, near, tail: (plain, weighted) })
    }

    /// `∫_1^∞ Φ(τ, r) K(τ) dτ`.
    fn integral<P: RadialProfile + ?Sized>(&self, params: &KernelParams, u: &P, r: f64) -> Result<f64> {
        let m = params.dim() - params.alpha;
        let ur = u.value(r);
        let (d1, d2) = (u.d1(r), u.d2(r));
        if !(ur.is_finite() && d1.is_finite() && d2.is_finite()) {
            return Err(Error::Input(format!("profile or its derivatives not finite at r = {r}")));
        }
        // Φ(1) = Φ'(1) = 0 and Φ''(1) = -2 r² u'' - 2 (1 + d - α) r u'
        let phi2 = -2.0 * r * r * d2 - 2.0 * (1.0 + m) * r * d1;
        let phi = |tau: f64, pw: f64| -> Result<f64> {
            let out = u.value(r * tau);
            let inn = u.value(r / tau);
            if !(out.is_finite() && inn.is_finite()) {
                return Err(Error::Input(format!("profile not finite near r = {r}, tau = {tau}")));
            }
            Ok((ur - out) + (ur - inn) * pw)
        };
        let mut total = 0.5 * phi2 * self.taylor_moment;
        for &(tau, wk, pw) in &self.near {
            let t = tau - 1.0;
            total += wk * (phi(tau, pw)? - 0.5 * phi2 * t * t);
        }
        for &(tau, wk, pw) in &self.nodes {
            total += wk * phi(tau, pw)?;
        }
        // beyond T_max: u(rτ) is dropped and u(r/τ) frozen at its innermost sample
        let last = self.nodes.last().map_or(1.0, |n| n.0);
        let core = u.value(r / last);
        total += ur * (self.tail.0 + self.tail.1) - core * self.tail.1;
        Ok(total)
    }
}

/// Calibrated evaluator of `(-Δ)^{α/2}` on radial profiles. Immutable and
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct FerrariEvaluator {
    params: KernelParams,
    controls: FerrariControls,
    constant: f64,
    residual: f64,
    rule: TauRule,
}

impl FerrariEvaluator {
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn controls(&self) -> &FerrariControls {
        &self.controls
    }

    /// The calibrated constant `c`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Relative change of `c` under quadrature refinement.
    pub fn calibration_residual(&self) -> f64 {
        self.residual
    }

    pub fn frac_laplacian<P: RadialProfile + ?Sized>(&self, u: &P, r: f64) -> Result<f64> {
        frac_laplacian_radial(self, u, r)
    }
}

/// Calibration target: `(1+r²)^{-(d-α)/2}` at `r = 1` must map to `2^{-(d+α)/2} / κ`.
fn uncalibrated_constant(params: &KernelParams, rule: &TauRule) -> Result<f64> {
    let d = params.dim();
    let alpha = params.alpha;
    let profile = Bracket { beta: d - alpha };
    let target = 2f64.powf(-(d + alpha) / 2.0) / params.kappa();
    let integral = rule.integral(params, &profile, 1.0)?;
    if !(integral > 0.0) {
        return Err(Error::Calibration { residual: f64::INFINITY, limit: CALIBRATION_LIMIT });
    }
    Ok(target / integral)
}

/// Calibrates with the default controls (honouring `RIESZ_TF_FERRARI_ORDER`).
pub fn calibrate_ferrari(params: &KernelParams) -> Result<FerrariEvaluator> {
    calibrate_ferrari_with(params, &FerrariControls::from_env()?)
}

pub fn calibrate_ferrari_with(params: &KernelParams, controls: &FerrariControls) -> Result<FerrariEvaluator> {
    controls.validate()?;
    let rule = TauRule::new(params, controls)?;
    let constant = uncalibrated_constant(params, &rule)?;
    let reference = uncalibrated_constant(params, &TauRule::new(params, &controls.refined())?)?;
    let residual = (constant / reference - 1.0).abs();
    if !(residual <= CALIBRATION_LIMIT) {
        return Err(Error::Calibration { residual, limit: CALIBRATION_LIMIT });
    }
    Ok(FerrariEvaluator { params: *params, controls: *controls, constant, residual, rule })
}

/// `(-Δ)^{α/2} u` at radius `r > 0`.
pub fn frac_laplacian_radial<P: RadialProfile + ?Sized>(eval: &FerrariEvaluator, u: &P, r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("fractional Laplacian needs r > 0, got {r}")));
    }
    let integral = eval.rule.integral(&eval.params, u, r)?;
    Ok(eval.constant * r.powf(-eval.params.alpha) * integral)
}
