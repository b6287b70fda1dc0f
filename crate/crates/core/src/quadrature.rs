//! Gauss rules and singularity-graded composite quadrature.

use gauss_quad::{GaussJacobi, GaussLegendre};
use std::num::NonZeroUsize;
use std::sync::OnceLock;

const MAX_ORDER: usize = 64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, cached per order.
pub fn legendre(order: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<OnceLock<Vec<(f64, f64)>>>> = OnceLock::new();
    assert!((1..=MAX_ORDER).contains(&order), "Gauss-Legendre order {order} out of range");
    let table = RULES.get_or_init(|| (0..=MAX_ORDER).map(|_| OnceLock::new()).collect());
    table[order].get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(order).unwrap());
        let mut pairs = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    })
}

/// Fixed-order Gauss–Legendre on `[a, b]`.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(order: usize, a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    legendre(order).iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Composite quadrature for integrands with an integrable endpoint
/// singularity of the form `|x - x0|^exponent` (times smooth and possibly
/// logarithmic factors).
///
/// The interval is cut into cells shrinking geometrically toward the
/// singular end; each cell uses Gauss–Legendre, and the innermost cell uses
/// Gauss–Jacobi with the weight `|x - x0|^exponent`.
#[derive(Debug, Clone)]
pub struct GradedRule {
    order: usize,
    ratio: f64,
    levels: usize,
    exponent: f64,
    jacobi: Vec<(f64, f64)>,
}

impl GradedRule {
    pub fn new(order: usize, exponent: f64) -> Self {
        Self::with_grading(order, exponent, 0.25, 22)
    }

    pub fn with_grading(order: usize, exponent: f64, ratio: f64, levels: usize) -> Self {
        assert!(exponent > -1.0, "singular exponent must exceed -1");
        // beta acts on the (1 + x) factor, i.e. the left end of [-1, 1]
        let rule = GaussJacobi::new(
            NonZeroUsize::new(order).unwrap(),
            0.0.try_into().unwrap(),
            exponent.try_into().unwrap(),
        );
        let mut jacobi = rule.as_node_weight_pairs().to_vec();
        jacobi.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { order, ratio, levels, exponent, jacobi }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Integrates `f` over `[from, to]` (either orientation) with the
    /// singularity at `from`.
    pub fn integrate_from<F: FnMut(f64) -> f64>(&self, from: f64, to: f64, mut f: F) -> f64 {
        self.integrate_offsets(to - from, |t| f(from + t))
    }

    /// Integrates `g(t)` for `t` between `0` and `len` (either sign) with the
    /// singularity at `t = 0`. Passing offsets lets the caller evaluate the
    /// integrand without cancellation very close to the singular point.
    pub fn integrate_offsets<F: FnMut(f64) -> f64>(&self, len: f64, mut g: F) -> f64 {
        if len == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        let mut outer = 1.0;
        for _ in 0..self.levels {
            let inner = outer * self.ratio;
            total += gauss_legendre(self.order, inner * len, outer * len, &mut g);
            outer = inner;
        }
        // innermost cell: weight |t|^exponent
        let half = 0.5 * outer * len;
        let scale = half.abs().powf(self.exponent);
        let mut cap = 0.0;
        for &(x, w) in &self.jacobi {
            let t = half * (1.0 + x);
            let dist = t.abs();
            if dist == 0.0 {
                continue;
            }
            cap += w * g(t) / dist.powf(self.exponent);
        }
        total + cap * half * scale
    }

    /// Integrates over `[a, b]` with a singular point `c` that may lie inside
    /// or just outside the interval.
    pub fn integrate_around<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, c: f64, mut f: F) -> f64 {
        self.integrate_around_offsets(a, b, c, |t| f(c + t))
    }

    /// As [`GradedRule::integrate_around`], with the integrand given as a
    /// function of the offset `t = x - c`.
    pub fn integrate_around_offsets<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, c: f64, mut g: F) -> f64 {
        if c <= a {
            if c == a {
                return self.integrate_offsets(b - a, g);
            }
            return self.integrate_shifted(a - c, b - c, g);
        }
        if c >= b {
            if c == b {
                return -self.integrate_offsets(a - b, g);
            }
            return -self.integrate_shifted(b - c, a - c, g);
        }
        self.integrate_offsets(b - c, &mut g) - self.integrate_offsets(a - c, &mut g)
    }

    /// Near-singular case in offset form: integrates over `[from, to]` where
    /// the singular point `t = 0` lies just beyond `from`. Cells are graded
    /// toward `from` down to the scale of the gap.
    fn integrate_shifted<F: FnMut(f64) -> f64>(&self, from: f64, to: f64, mut g: F) -> f64 {
        let gap = from.abs();
        let len = to - from;
        let mut total = 0.0;
        let mut outer = 1.0;
        while outer * len.abs() > gap * 0.5 && outer > 1e-16 {
            let inner = outer * self.ratio.max(0.25);
            total += gauss_legendre(self.order, from + inner * len, from + outer * len, &mut g);
            outer = inner;
        }
        total + gauss_legendre(self.order, from, from + outer * len, &mut g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials() {
        let v = gauss_legendre(5, 0.0, 2.0, |x| x.powi(9));
        assert_relative_eq!(v, 2f64.powi(10) / 10.0, max_relative = 1e-14);
    }

    #[test]
    fn graded_power_singularity() {
        for &beta in &[-0.5, -0.8, 0.0, 0.5] {
            let rule = GradedRule::new(16, beta);
            let v = rule.integrate_from(0.0, 2.0, |x| x.powf(beta) * (1.0 + x));
            let exact = 2f64.powf(beta + 1.0) / (beta + 1.0) + 2f64.powf(beta + 2.0) / (beta + 2.0);
            assert_relative_eq!(v, exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn graded_log_singularity() {
        let rule = GradedRule::new(16, 0.0);
        // int_0^1 ln x dx = -1
        let v = rule.integrate_from(0.0, 1.0, |x| x.ln());
        assert_relative_eq!(v, -1.0, max_relative = 1e-11);
    }

    #[test]
    fn interior_and_reversed() {
        let rule = GradedRule::new(16, -0.5);
        // int_{-1}^{1} |x|^{-1/2} dx = 4
        let v = rule.integrate_around(-1.0, 1.0, 0.0, |x| x.abs().powf(-0.5));
        assert_relative_eq!(v, 4.0, max_relative = 1e-11);
        // singular point at the right end
        let v = rule.integrate_around(-1.0, 0.0, 0.0, |x| (-x).powf(-0.5));
        assert_relative_eq!(v, 2.0, max_relative = 1e-11);
    }

    #[test]
    fn near_singular_outside() {
        let rule = GradedRule::new(16, -0.5);
        // int_0^1 (x + 1e-6)^{-1/2} dx
        let exact = 2.0 * ((1.0f64 + 1e-6).sqrt() - 1e-3);
        let v = rule.integrate_around(0.0, 1.0, -1e-6, |x| (x + 1e-6).powf(-0.5));
        assert_relative_eq!(v, exact, max_relative = 1e-10);
    }
}
