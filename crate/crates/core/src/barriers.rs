//! Radial barrier functions and a harness that checks the sign and decay
//! of their fractional Laplacians.
//!
//! Every family has a tail `r^{-m} (log(er))^{-l}` on `r ≥ 1` (the bracket
//! `(1+r²)^{-β/2}` is used on the whole line) and an even quartic
//! `a + b r² + c r⁴` on `[0, 1]` matching value, slope and curvature at 1.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ferrari::{frac_laplacian_radial, Bracket, FerrariEvaluator, RadialProfile};
use crate::params::KernelParams;

pub const FLATNESS_FACTOR: f64 = 3.0;
pub const SLOPE_TOLERANCE: f64 = 0.1;
pub const DEFAULT_RADII: usize = 20;
const MONOTONE_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Gbeta { beta: f64 },
    Log { b: f64 },
    Loglift,
    Power { gamma: f64 },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gbeta { beta } => write!(f, "gbeta({beta})"),
            Family::Log { b } => write!(f, "log({b})"),
            Family::Loglift => f.write_str("loglift"),
            Family::Power { gamma } => write!(f, "power({gamma})"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    /// `gbeta:1.5`, `log:1`, `loglift`, `power:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| Error::Parameter(format!("barrier `{name}` needs a {what}, e.g. `{name}:1`")))?;
            a.parse().map_err(|_| Error::Parameter(format!("barrier {what} `{a}` is not a number")))
        };
        match name {
            "gbeta" => Ok(Family::Gbeta { beta: num("beta")? }),
            "log" => Ok(Family::Log { b: num("log power")? }),
            "loglift" if arg.is_none() => Ok(Family::Loglift),
            "power" => Ok(Family::Power { gamma: num("gamma")? }),
            _ => Err(Error::Parameter(format!("unknown barrier `{s}` (gbeta:B, log:B, loglift, power:G)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    fn matches(self, x: f64) -> bool {
        match self {
            Sign::Positive => x > 0.0,
            Sign::Negative => x < 0.0,
        }
    }
}

/// Which side of `|(-Δ)^{α/2}U| ≃ r^{-p} (log r)^{-b}` is asserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bounds {
    TwoSided,
    /// Compensated magnitude bounded above.
    Upper,
    /// Compensated magnitude bounded below.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expected {
    pub sign: Sign,
    pub power: f64,
    /// Convention `r^{-p} (log r)^{-b}`: a log factor in the numerator is negative.
    pub log_power: f64,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
enum Tail {
    Bracket(f64),
    /// `r^{-m} (log(er))^{-l}`.
    LogPower { m: f64, l: f64 },
}

impl Tail {
    fn eval(&self, r: f64) -> [f64; 3] {
        match *self {
            Tail::Bracket(beta) => {
                let b = Bracket { beta };
                [b.value(r), b.d1(r), b.d2(r)]
            }
            Tail::LogPower { m, l } => {
                let lg = 1.0 + r.ln();
                let u = r.powf(-m) * lg.powf(-l);
                let p1 = -m / r - l / (r * lg);
                let p2 = m / (r * r) + l / (r * r * lg) + l / (r * r * lg * lg);
                [u, u * p1, u * (p1 * p1 + p2)]
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Barrier {
    pub family: Family,
    pub params: KernelParams,
    /// `(a, b, c)` of the inner quartic; `None` when the tail formula holds on all of `[0, ∞)`.
    pub patch: Option<(f64, f64, f64)>,
    pub expected: Expected,
    /// False only when the tail has a critical point at `r = 1`, where no
    /// nonincreasing C² patch exists.
    pub monotone: bool,
    tail: Tail,
}

impl RadialProfile for Barrier {
    fn value(&self, r: f64) -> f64 {
        self.eval(r)[0]
    }
    fn d1(&self, r: f64) -> f64 {
        self.eval(r)[1]
    }
    fn d2(&self, r: f64) -> f64 {
        self.eval(r)[2]
    }
}

impl Barrier {
    /// Value, first and second derivative.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        match self.patch {
            Some((a, b, c)) if r < 1.0 => {
                let s = r * r;
                [a + b * s + c * s * s, 2.0 * b * r + 4.0 * c * r * s, 2.0 * b + 12.0 * c * s]
            }
            _ => self.tail.eval(r),
        }
    }

    /// Largest mismatch of value and derivatives across `r = 1`, relative to the tail values.
    pub fn matching_error(&self) -> f64 {
        let Some((a, b, c)) = self.patch else { return 0.0 };
        let t = self.tail.eval(1.0);
        let p = [a + b + c, 2.0 * b + 4.0 * c, 2.0 * b + 12.0 * c];
        (0..3).map(|k| (p[k] - t[k]).abs() / t[k].abs().max(1.0)).fold(0.0, f64::max)
    }
}

fn quartic_patch(u: [f64; 3]) -> (f64, f64, f64) {
    let c = (u[2] - u[1]) / 8.0;
    let b = (u[1] - 4.0 * c) / 2.0;
    (u[0] - b - c, b, c)
}

fn expected_power(gamma: f64, d: f64, alpha: f64) -> Expected {
    let (sign, power, log_power) = if gamma < d - alpha {
        (Sign::Positive, gamma + alpha, 0.0)
    } else if gamma < d {
        (Sign::Negative, gamma + alpha, 0.0)
    } else if gamma == d {
        (Sign::Negative, d + alpha, -1.0)
    } else {
        (Sign::Negative, d + alpha, 0.0)
    };
    Expected { sign, power, log_power, bounds: Bounds::TwoSided }
}

pub fn make_barrier(family: Family, params: &KernelParams) -> Result<Barrier> {
    let d = params.dim();
    let alpha = params.alpha;
    let reject = |msg: String| Err(Error::Parameter(format!("{family}: {msg}")));
    let (tail, expected) = match family {
        Family::Gbeta { beta } => {
            if !(beta > 0.0 && beta.is_finite()) {
                return reject(format!("requires beta > 0, got {beta}"));
            }
            let expected = if beta == d - alpha {
                // conformal pair: an exact multiple of (1+r²)^{-(d+α)/2}
                Expected { sign: Sign::Positive, power: d + alpha, log_power: 0.0, bounds: Bounds::TwoSided }
            } else {
                expected_power(beta, d, alpha)
            };
            (Tail::Bracket(beta), expected)
        }
        Family::Log { b } => {
            if !(b >= 1.0 && b.is_finite()) {
                return reject(format!("requires b >= 1, got {b}"));
            }
            let big_alpha = alpha > 1.0 && alpha < 2.0;
            let high_dim = d > alpha + 1.0;
            let bounds = if b == 1.0 || (big_alpha && high_dim) {
                Bounds::TwoSided
            } else if big_alpha {
                Bounds::Upper
            } else if high_dim {
                Bounds::Lower
            } else {
                return reject(format!(
                    "b > 1 needs alpha in (1,2) or d > alpha + 1 for any decay bound (d = {d}, alpha = {alpha})"
                ));
            };
            (
                Tail::LogPower { m: d - alpha, l: b },
                Expected { sign: Sign::Negative, power: d, log_power: b + 1.0, bounds },
            )
        }
        Family::Loglift => (
            Tail::LogPower { m: d, l: -d / alpha },
            Expected { sign: Sign::Negative, power: d + alpha, log_power: -(d + alpha) / alpha, bounds: Bounds::TwoSided },
        ),
        Family::Power { gamma } => {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return reject(format!("requires gamma > 0, got {gamma}"));
            }
            if gamma == d - alpha {
                return reject(format!("requires gamma != d - alpha = {}", d - alpha));
            }
            (Tail::LogPower { m: gamma, l: 0.0 }, expected_power(gamma, d, alpha))
        }
    };
    let patch = match tail {
        Tail::Bracket(_) => None,
        Tail::LogPower { .. } => Some(quartic_patch(tail.eval(1.0))),
    };
    let mut barrier = Barrier { family, params: *params, patch, expected, monotone: true, tail };
    if let Some((_, b, c)) = patch {
        if b > 0.0 || b + 2.0 * c > 0.0 {
            let slope = tail.eval(1.0)[1];
            if slope.abs() > 1e-12 {
                return reject(format!(
                    "inner quartic is not radially nonincreasing (b = {b:.4}, b + 2c = {:.4})",
                    b + 2.0 * c
                ));
            }
            barrier.monotone = false;
        }
    }
    // tail: nonincreasing and positive on a dense log sample out to 1e12
    let mut prev = barrier.value(1.0);
    for k in 0..=MONOTONE_SAMPLES {
        let r = 10f64.powf(12.0 * k as f64 / MONOTONE_SAMPLES as f64);
        let [v, d1, _] = barrier.eval(r);
        if !(v > 0.0) || d1 > 0.0 || v > prev * (1.0 + 1e-14) {
            return reject(format!("not positive and radially nonincreasing near r = {r:.4e}"));
        }
        prev = v;
    }
    Ok(barrier)
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierSample {
    pub r: f64,
    pub value: f64,
    /// `|value| r^p (log r)^b`.
    pub compensated: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub family: Family,
    pub d: usize,
    pub alpha: f64,
    pub expected: Expected,
    pub window: (f64, f64),
    pub samples: Vec<BarrierSample>,
    pub sign_ok: bool,
    /// `max / min` of the compensated magnitude.
    pub flatness: f64,
    /// Log-log slope of the compensated magnitude.
    pub slope: f64,
    /// Fitted decay power of `|value|`.
    pub fitted_power: f64,
    /// `∫_{R₁}^∞ |value|^{2d/(d+α)} r^{d-1} dr` is finite at the fitted rate.
    pub dual_norm_finite: bool,
    pub failure: Option<String>,
    pub monotone: bool,
    pub pass: bool,
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn verify_barrier(eval: &FerrariEvaluator, barrier: &Barrier, window: (f64, f64)) -> Result<BarrierReport> {
    verify_barrier_with(eval, barrier, window, DEFAULT_RADII)
}

pub fn verify_barrier_with(eval: &FerrariEvaluator, barrier: &Barrier, window: (f64, f64), count: usize) -> Result<BarrierReport> {
    let (lo, hi) = window;
    if !(lo >= 1e2 * (1.0 - 1e-12) && hi <= 1e5 * (1.0 + 1e-12) && lo < hi) {
        return Err(Error::Parameter(format!("barrier window [{lo:e}, {hi:e}] must lie in [1e2, 1e5]")));
    }
    if count < 3 {
        return Err(Error::Parameter("at least 3 radii are needed".into()));
    }
    if eval.params() != &barrier.params {
        return Err(Error::Parameter("evaluator and barrier have different (d, alpha)".into()));
    }
    let exp = barrier.expected;
    let radii: Vec<f64> = (0..count).map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64)).collect();
    let values: Vec<(f64, Result<f64>)> = radii.par_iter().map(|&r| (r, frac_laplacian_radial(eval, barrier, r))).collect();
    let mut report = BarrierReport {
        family: barrier.family,
        d: barrier.params.d,
        alpha: barrier.params.alpha,
        expected: exp,
        window,
        samples: Vec::with_capacity(count),
        sign_ok: false,
        flatness: f64::NAN,
        slope: f64::NAN,
        fitted_power: f64::NAN,
        dual_norm_finite: false,
        failure: None,
        monotone: barrier.monotone,
        pass: false,
    };
    for (r, v) in values {
        match v {
            Ok(value) => report.samples.push(BarrierSample {
                r,
                value,
                compensated: value.abs() * r.powf(exp.power) * r.ln().powf(exp.log_power),
            }),
            Err(e) => {
                report.failure = Some(format!("evaluation failed at r = {r:e}: {e}"));
                return Ok(report);
            }
        }
    }
    report.sign_ok = report.samples.iter().all(|s| exp.sign.matches(s.value));
    if !report.sign_ok {
        let bad = report.samples.iter().find(|s| !exp.sign.matches(s.value)).unwrap();
        report.failure = Some(format!("wrong sign at r = {:e} (value {:e})", bad.r, bad.value));
        return Ok(report);
    }
    let comp: Vec<f64> = report.samples.iter().map(|s| s.compensated).collect();
    let max = comp.iter().cloned().fold(f64::MIN, f64::max);
    let min = comp.iter().cloned().fold(f64::MAX, f64::min);
    report.flatness = max / min;
    let lr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    report.slope = log_slope(&lr, &comp.iter().map(|c| c.ln()).collect::<Vec<_>>());
    report.fitted_power = -log_slope(&lr, &report.samples.iter().map(|s| s.value.abs().ln()).collect::<Vec<_>>());
    let d = barrier.params.dim();
    report.dual_norm_finite = report.fitted_power * 2.0 * d / (d + barrier.params.alpha) > d;
    report.pass = match exp.bounds {
        Bounds::TwoSided => report.flatness < FLATNESS_FACTOR && report.slope.abs() <= SLOPE_TOLERANCE,
        Bounds::Upper => report.slope <= SLOPE_TOLERANCE,
        Bounds::Lower => report.slope >= -SLOPE_TOLERANCE,
    };
    if !report.pass {
        report.failure = Some(format!("compensated magnitude: flatness {:.3}, slope {:.4}", report.flatness, report.slope));
    }
    Ok(report)
}

impl BarrierReport {
    /// Columns `r,value,compensated` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "value", "compensated"]).map_err(csv_err)?;
        for s in &self.samples {
            w.write_record([format!("{:.16e}", s.r), format!("{:.16e}", s.value), format!("{:.16e}", s.compensated)])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

impl fmt::Display for BarrierReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<12} d={} alpha={:<5} sign {:<8} p={:<7.4} b={:<7.4} {:<9} flat {:>7.3} slope {:>8.4}  {}",
            self.family.to_string(),
            self.d,
            self.alpha,
            format!("{:?}", self.expected.sign).to_lowercase(),
            self.expected.power,
            self.expected.log_power,
            format!("{:?}", self.expected.bounds).to_lowercase(),
            self.flatness,
            self.slope,
            if self.pass { "pass" } else { "fail" }
        )?;
        if let Some(msg) = &self.failure {
            write!(f, "  [{msg}]")?;
        }
        if !self.monotone {
            f.write_str("  [tail has a critical point at r = 1: inner patch not monotone]")?;
        }
        Ok(())
    }
}
