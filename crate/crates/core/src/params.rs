//! Problem parameters, Riesz normalisation constants and the map from
//! `(d, alpha, q)` to the predicted tail regime of the minimizer.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance used when deciding that `q` sits exactly on a
/// critical exponent.
pub const THRESHOLD_EPS: f64 = 1e-9;

/// Dimension and Riesz order; everything the interaction operator depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub d: usize,
    pub alpha: f64,
}

impl KernelParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Parameter(format!("dimension d = {d} must be at least 2")));
        }
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 2.0_f64.min(d as f64)) {
            return Err(Error::Parameter(format!(
                "order alpha = {alpha} must satisfy 0 < alpha < min(2, d)"
            )));
        }
        Ok(Self { d, alpha })
    }

    pub fn dim(&self) -> f64 {
        self.d as f64
    }

    /// Normalisation `A_alpha` of the Riesz kernel `A_alpha / |x|^(d - alpha)`.
    pub fn riesz_constant(&self) -> f64 {
        let d = self.dim();
        let a = self.alpha;
        gamma((d - a) / 2.0) / (gamma(a / 2.0) * PI.powf(d / 2.0) * 2f64.powf(a))
    }

    /// Surface area of the unit sphere in `R^d`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }

    /// Volume of the unit ball in `R^d`.
    pub fn unit_ball_volume(&self) -> f64 {
        sphere_area(self.d) / self.dim()
    }

    /// Value at the origin of the Riesz potential of `(1 + |x|^2)^{-(d+alpha)/2}`.
    ///
    /// Equals `A_alpha * |S^{d-1}| * B(alpha/2, d/2) / 2`, which simplifies to
    /// `Gamma((d-alpha)/2) / (2^alpha Gamma((d+alpha)/2))`. The same constant
    /// links the conformal pair `(1+r^2)^{-(d+alpha)/2} -> kappa (1+r^2)^{-(d-alpha)/2}`.
    pub fn kappa(&self) -> f64 {
        let d = self.dim();
        self.riesz_constant() * self.sphere_area() * 0.5 * beta(self.alpha / 2.0, d / 2.0)
    }
}

pub fn sphere_area(d: usize) -> f64 {
    let d = d as f64;
    2.0 * PI.powf(d / 2.0) / gamma(d / 2.0)
}

/// Dimension `d`, Riesz order `alpha` and Lebesgue exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub d: usize,
    pub alpha: f64,
    pub q: f64,
}

impl ProblemParams {
    pub fn new(d: usize, alpha: f64, q: f64) -> Result<Self> {
        KernelParams::new(d, alpha)?;
        let bound = 2.0 * d as f64 / (d as f64 + alpha);
        if !q.is_finite() || q <= bound {
            return Err(Error::Admissibility { q, bound });
        }
        Ok(Self { d, alpha, q })
    }

    pub fn kernel(&self) -> KernelParams {
        KernelParams { d: self.d, alpha: self.alpha }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds::new(self.d, self.alpha)
    }
}

/// The three critical exponents separating the tail regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `2d/(d+alpha)`, the admissibility bound.
    pub q1: f64,
    /// `(2d-alpha)/d`, slowest decay with a log correction.
    pub q2: f64,
    /// `(2d+alpha)/(d+alpha)`, second log-corrected exponent.
    pub q3: f64,
}

impl Thresholds {
    pub fn new(d: usize, alpha: f64) -> Self {
        let d = d as f64;
        Self {
            q1: 2.0 * d / (d + alpha),
            q2: (2.0 * d - alpha) / d,
            q3: (2.0 * d + alpha) / (d + alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeId {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    II,
    #[serde(rename = "iii")]
    III,
    #[serde(rename = "iv")]
    IV,
    #[serde(rename = "v")]
    V,
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "superlinear")]
    Superlinear,
}

impl fmt::Display for RegimeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeId::I => "i",
            RegimeId::II => "ii",
            RegimeId::III => "iii",
            RegimeId::IV => "iv",
            RegimeId::V => "v",
            RegimeId::Linear => "linear",
            RegimeId::Superlinear => "superlinear",
        };
        f.write_str(s)
    }
}

/// Which two-sided estimate is available at the critical exponent `q2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalBounds {
    /// `1 < alpha < 2` and `d > alpha + 1`, or `q = 3/2`.
    TwoSided,
    /// Only `alpha in (1, 2)`: the upper bound on the tail survives.
    UpperOnly,
    /// Only `d > alpha + 1`: the lower bound on the tail survives.
    LowerOnly,
    None,
}

/// Predicted tail `rho ~ r^{-p} (log r)^{-b}` for a regime.
///
/// For the superlinear regime `p` is the lower-bound rate `d + alpha` and
/// `upper_power` carries `(d + alpha)/(q - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub id: RegimeId,
    pub p: f64,
    pub b: f64,
    pub upper_power: Option<f64>,
    pub thresholds: Thresholds,
    pub critical_bounds: Option<CriticalBounds>,
}

impl RegimeSpec {
    pub fn two_sided(&self) -> bool {
        !matches!(
            self.critical_bounds,
            Some(CriticalBounds::UpperOnly | CriticalBounds::LowerOnly | CriticalBounds::None)
        )
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= THRESHOLD_EPS * b.abs().max(1.0)
}

pub fn classify_regime(params: &ProblemParams) -> Result<RegimeSpec> {
    let ProblemParams { d, alpha, q } = *params;
    let th = Thresholds::new(d, alpha);
    if !q.is_finite() || q <= th.q1 {
        return Err(Error::Admissibility { q, bound: th.q1 });
    }
    let df = d as f64;
    let mk = |id, p, b| RegimeSpec { id, p, b, upper_power: None, thresholds: th, critical_bounds: None };

    let spec = if near(q, th.q2) {
        let upper = alpha > 1.0 && alpha < 2.0;
        let lower = df > alpha + 1.0;
        let graphene = near(q, 1.5);
        let bounds = match (upper && lower || graphene, upper, lower) {
            (true, _, _) => CriticalBounds::TwoSided,
            (false, true, false) => CriticalBounds::UpperOnly,
            (false, false, true) => CriticalBounds::LowerOnly,
            _ => CriticalBounds::None,
        };
        RegimeSpec { critical_bounds: Some(bounds), ..mk(RegimeId::II, df, df / alpha) }
    } else if near(q, th.q3) {
        mk(RegimeId::IV, df + alpha, -(df + alpha) / alpha)
    } else if near(q, 2.0) {
        mk(RegimeId::Linear, df + alpha, 0.0)
    } else if q < th.q2 {
        mk(RegimeId::I, (df - alpha) / (q - 1.0), 0.0)
    } else if q < th.q3 {
        mk(RegimeId::III, alpha / (2.0 - q), 0.0)
    } else if q < 2.0 {
        mk(RegimeId::V, df + alpha, 0.0)
    } else {
        RegimeSpec { upper_power: Some((df + alpha) / (q - 1.0)), ..mk(RegimeId::Superlinear, df + alpha, 0.0) }
    };
    Ok(spec)
}
