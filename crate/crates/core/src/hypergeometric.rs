//! Gauss hypergeometric function `2F1(a, b; c; z)` on `0 <= z < 1`.
//!
//! The power series is summed directly for `z <= 1/2`. Closer to the branch
//! point the argument is moved to `1 - z` with the connection formula
//!
//! ```text
//! F(a,b;c;z) = G(c)G(s)/(G(c-a)G(c-b)) F(a, b; 1-s; 1-z)
//!            + (1-z)^s G(c)G(-s)/(G(a)G(b)) F(c-a, c-b; 1+s; 1-z),   s = c-a-b
//! ```
//!
//! which degenerates when `s` is an integer. Those cases use the
//! logarithmic expansions (Abramowitz & Stegun 15.3.10-15.3.11); negative
//! integers are first reflected with Euler's transformation
//! `F(a,b;c;z) = (1-z)^s F(c-a, c-b; c; z)`.
//!
//! [`Gauss2F1`] fixes `(a, b, c)` and caches the gamma-function prefactors,
//! which matters when the same function is evaluated many times.

use statrs::function::gamma::{digamma, gamma};

use crate::error::{Error, Result};

/// Distance from an integer below which `c - a - b` is treated as integral.
const INTEGER_EPS: f64 = 1e-9;
/// Within this distance of an integer the connection formula cancels badly;
/// the direct series is used up to `NEAR_INTEGER_SERIES_Z` instead.
const NEAR_INTEGER: f64 = 0.05;
const NEAR_INTEGER_SERIES_Z: f64 = 0.9;
const MAX_TERMS: usize = 20_000;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `1 / Gamma(x)`, zero at the poles.
fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Direct power series. Converges for `|z| < 1`; used for `|z| <= 1/2`
/// and as the inner series of the connection formulas.
pub fn series_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 || (term.abs() <= 1e-17 * sum.abs() && n > 2) {
            return Ok(sum);
        }
    }
    Err(Error::Domain(format!("2F1({a}, {b}; {c}; {z}) series did not converge")))
}

/// `2F1(a, b; c; z)` for `0 <= z < 1` and `c` not a nonpositive integer.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    Gauss2F1::new(a, b, c)?.eval(z)
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    /// `a` or `b` is a nonpositive integer: the series terminates.
    Polynomial,
    /// Generic connection formula with cached prefactors.
    Connection { s: f64, first: f64, second: f64 },
    /// `s = m` (after reflection, `m >= 0`); `reflect` carries the exponent
    /// of the Euler factor `(1-z)^reflect`.
    Degenerate(Degenerate),
}

#[derive(Debug, Clone, Copy)]
struct Degenerate {
    a: f64,
    b: f64,
    m: usize,
    reflect: f64,
    finite_pref: f64,
    log_pref: f64,
    psi1: f64,
    psi_m1: f64,
    psi_a: f64,
    psi_b: f64,
    inv_m_factorial: f64,
}

/// `2F1(a, b; c; .)` with fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct Gauss2F1 {
    a: f64,
    b: f64,
    c: f64,
    branch: Branch,
}

impl Gauss2F1 {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if ![a, b, c].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite hypergeometric argument".into()));
        }
        if is_nonpositive_integer(c) {
            return Err(Error::Domain(format!("2F1 undefined for c = {c}")));
        }
        let branch = if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
            Branch::Polynomial
        } else {
            let s = c - a - b;
            let m = s.round();
            if (s - m).abs() < INTEGER_EPS {
                if m < 0.0 {
                    // Euler: the reflected function has c' - a' - b' = -s > 0
                    Branch::Degenerate(Degenerate::new(c - a, c - b, c, -m as usize, s))
                } else {
                    Branch::Degenerate(Degenerate::new(a, b, c, m as usize, 0.0))
                }
            } else {
                let first = gamma(c) * gamma(s) * rgamma(c - a) * rgamma(c - b);
                let second = gamma(c) * gamma(-s) * rgamma(a) * rgamma(b);
                Branch::Connection { s, first, second }
            }
        };
        Ok(Self { a, b, c, branch })
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        self.eval_with_complement(z, 1.0 - z)
    }

    /// Same as [`Gauss2F1::eval`] with `w = 1 - z` supplied by the caller,
    /// who can often form it without cancellation.
    pub fn eval_with_complement(&self, z: f64, w: f64) -> Result<f64> {
        let (a, b, c) = (self.a, self.b, self.c);
        // z may round to 1 when the caller knows w > 0 exactly
        if !(0.0..=1.0).contains(&z) || !(w > 0.0) {
            return Err(Error::Domain(format!("2F1 argument z = {z} outside [0, 1)")));
        }
        if z <= 0.5 {
            return series_2f1(a, b, c, z);
        }
        if let Branch::Connection { s, .. } = self.branch {
            if (s - s.round()).abs() < NEAR_INTEGER && z <= NEAR_INTEGER_SERIES_Z {
                return series_2f1(a, b, c, z);
            }
        }
        match self.branch {
            Branch::Polynomial => series_2f1(a, b, c, z),
            Branch::Connection { s, first, second } => {
                let mut value = first * series_2f1(a, b, 1.0 - s, w)?;
                if second != 0.0 {
                    value += w.powf(s) * second * series_2f1(c - a, c - b, 1.0 + s, w)?;
                }
                Ok(value)
            }
            Branch::Degenerate(deg) => {
                let inner = deg.eval(w)?;
                Ok(if deg.reflect != 0.0 { w.powf(deg.reflect) * inner } else { inner })
            }
        }
    }
}

impl Degenerate {
    fn new(a: f64, b: f64, c: f64, m: usize, reflect: f64) -> Self {
        let mf = m as f64;
        let finite_pref = if m > 0 { gamma(mf) * gamma(c) * rgamma(a + mf) * rgamma(b + mf) } else { 0.0 };
        Self {
            a,
            b,
            m,
            reflect,
            finite_pref,
            log_pref: gamma(c) * rgamma(a) * rgamma(b),
            psi1: digamma(1.0),
            psi_m1: digamma(mf + 1.0),
            psi_a: digamma(a + mf),
            psi_b: digamma(b + mf),
            inv_m_factorial: 1.0 / factorial(m),
        }
    }

    /// `2F1(a, b; a+b+m; 1-w)` for `w` in `(0, 1/2)`.
    fn eval(&self, w: f64) -> Result<f64> {
        let (a, b, m) = (self.a, self.b, self.m);
        let lw = w.ln();
        let mf = m as f64;

        // finite part (absent for m = 0)
        let mut finite = 0.0;
        if m > 0 {
            let mut term = 1.0;
            for n in 0..m {
                let nf = n as f64;
                finite += term;
                term *= (a + nf) * (b + nf) / ((nf + 1.0) * (1.0 - mf + nf)) * w;
            }
            finite *= self.finite_pref;
        }
        if self.log_pref == 0.0 {
            return Ok(finite);
        }

        // log series: sum_n (a+m)_n (b+m)_n / (n! (n+m)!) w^n [ ... ]
        let mut coef = self.inv_m_factorial;
        let (mut psi_n1, mut psi_nm1) = (self.psi1, self.psi_m1);
        let (mut psi_a, mut psi_b) = (self.psi_a, self.psi_b);
        let mut wn = 1.0;
        let mut sum = 0.0;
        for n in 0..MAX_TERMS {
            let nf = n as f64;
            let bracket = if m == 0 {
                2.0 * psi_n1 - psi_a - psi_b - lw
            } else {
                lw - psi_n1 - psi_nm1 + psi_a + psi_b
            };
            let term = coef * wn * bracket;
            sum += term;
            if n > 2 && term.abs() <= 1e-17 * sum.abs() {
                return Ok(if m == 0 {
                    self.log_pref * sum
                } else {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    finite - sign * w.powi(m as i32) * self.log_pref * sum
                });
            }
            coef *= (a + mf + nf) * (b + mf + nf) / ((nf + 1.0) * (nf + mf + 1.0));
            psi_n1 += 1.0 / (nf + 1.0);
            psi_nm1 += 1.0 / (nf + mf + 1.0);
            psi_a += 1.0 / (a + mf + nf);
            psi_b += 1.0 / (b + mf + nf);
            wn *= w;
        }
        Err(Error::Domain(format!("2F1 log series for a = {a}, b = {b}, m = {m} did not converge")))
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Reference values from an arbitrary-precision evaluation (40 digits).
    const REFERENCE: &[(f64, f64, f64, f64, f64)] = &[
        (1.0, 1.0, 2.0, 0.3, 1.188_916_479_795_774_6),
        (1.5, 1.5, 1.0, 0.9, 124.251_643_626_880_89),
        (0.5, 0.5, 1.0, 0.99, 2.352_715_816_779_742_3),
    ];

    #[test]
    fn reference_values() {
        for &(a, b, c, z, want) in REFERENCE {
            assert_relative_eq!(gauss_2f1(a, b, c, z).unwrap(), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn zero_argument_is_one() {
        assert_eq!(gauss_2f1(2.3, -0.7, 1.1, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn log_closed_form() {
        let z = 0.3;
        let want = -(1.0f64 - z).ln() / z;
        assert_relative_eq!(gauss_2f1(1.0, 1.0, 2.0, z).unwrap(), want, max_relative = 1e-12);
        let z = 0.95;
        let want = -(1.0f64 - z).ln() / z;
        assert_relative_eq!(gauss_2f1(1.0, 1.0, 2.0, z).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gauss_2f1(1.0, 1.0, -2.0, 0.2).is_err());
        assert!(gauss_2f1(1.0, 1.0, 2.0, 1.0).is_err());
        assert!(gauss_2f1(1.0, 1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn ferrari_kernel_singular_factor_is_bounded() {
        // (1-z)^{1+alpha} 2F1((d+alpha)/2, 1+alpha/2; d/2; z) stays bounded as z -> 1
        let (d, alpha) = (2.0, 1.0);
        let limit = gamma(d / 2.0) * gamma(1.0 + alpha) / (gamma((d + alpha) / 2.0) * gamma(1.0 + alpha / 2.0));
        let mut prev = f64::NAN;
        for k in 2..12 {
            let z = 1.0 - 10f64.powi(-k);
            let v = (1.0 - z).powf(1.0 + alpha) * gauss_2f1((d + alpha) / 2.0, 1.0 + alpha / 2.0, d / 2.0, z).unwrap();
            assert!(v.is_finite() && v > 0.0 && v < 2.0 * limit);
            prev = v;
        }
        assert_relative_eq!(prev, limit, max_relative = 1e-8);
    }

    proptest! {
        #[test]
        fn transformation_agrees_with_series(a in 0.1f64..3.0, b in 0.1f64..3.0, c in 0.3f64..4.0, z in 0.5f64..0.75) {
            let direct = series_2f1(a, b, c, z).unwrap();
            let via = gauss_2f1(a, b, c, z + 1e-12).unwrap();
            let scale = direct.abs().max(1.0);
            prop_assert!((direct - via).abs() <= 1e-10 * scale, "{direct} vs {via}");
        }

        #[test]
        fn integer_cases_agree_with_series(a in 0.1f64..3.0, b in 0.1f64..3.0, m in -3i32..4, z in 0.5f64..0.75) {
            let c = a + b + m as f64;
            prop_assume!(c > 0.05);
            let direct = series_2f1(a, b, c, z).unwrap();
            let via = gauss_2f1(a, b, c, z + 1e-12).unwrap();
            prop_assert!((direct - via).abs() <= 1e-10 * direct.abs().max(1.0), "{direct} vs {via}");
        }
    }
}
