//! Riesz potential of radial densities.
//!
//! The angular average of the Riesz kernel has the closed form
//!
//! ```text
//! k(r, s) = A σ_{d-1} R^{α-d} 2F1((d-α)/2, 1-α/2; d/2; (ρ/R)^2),   R = max(r,s), ρ = min(r,s)
//! ```
//!
//! so that `(I_α ρ)(r) = ∫ k(r, s) ρ(s) s^{d-1} ds`.
//!
//! The discrete operator is a Nyström rule with a local singularity
//! correction: off-diagonal entries are `k(r_i, r_j) w_j / σ`, and the
//! diagonal absorbs the difference between the exact integral of
//! `k(r_i, ·)` over the panels around `r_i` and its node sum. This keeps
//! `w_i G_ij = w_j G_ji` exact.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{RadialFunction, RadialGrid};
use crate::hypergeometric::Gauss2F1;
use crate::params::KernelParams;
use crate::quadrature::GradedRule;

/// Extra panels on each side of the node included in the diagonal correction.
const CORRECTION_PANELS: usize = 3;

/// Closed-form angular kernel with cached constants.
#[derive(Debug, Clone, Copy)]
pub struct AngularKernel {
    params: KernelParams,
    prefactor: f64,
    hyp: Gauss2F1,
    /// `2F1` at `z = 1`, finite only for `α > 1`.
    diagonal: f64,
}

impl AngularKernel {
    pub fn new(params: KernelParams) -> Result<Self> {
        let d = params.dim();
        let alpha = params.alpha;
        let (a, b, c) = ((d - alpha) / 2.0, 1.0 - alpha / 2.0, d / 2.0);
        let diagonal = if alpha > 1.0 {
            gamma(c) * gamma(c - a - b) / (gamma(c - a) * gamma(c - b))
        } else {
            f64::INFINITY
        };
        Ok(Self {
            params,
            prefactor: params.riesz_constant() * params.sphere_area(),
            hyp: Gauss2F1::new(a, b, c)?,
            diagonal,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// `k(r, s)`; symmetric in its arguments bit for bit.
    pub fn eval(&self, r: f64, s: f64) -> Result<f64> {
        if !(r >= 0.0 && s >= 0.0) || !r.is_finite() || !s.is_finite() {
            return Err(Error::Domain(format!("kernel radii must be finite and nonnegative: r = {r}, s = {s}")));
        }
        let (big, small) = if r >= s { (r, s) } else { (s, r) };
        if big == 0.0 {
            return Err(Error::Domain("kernel is singular at r = s = 0".into()));
        }
        let scale = self.prefactor * big.powf(self.params.alpha - self.params.dim());
        if small == 0.0 {
            return Ok(scale);
        }
        if small == big {
            return Ok(scale * self.diagonal);
        }
        let ratio = small / big;
        let z = ratio * ratio;
        let w = (1.0 - ratio) * (1.0 + ratio);
        Ok(scale * self.hyp.eval_with_complement(z, w)?)
    }

    /// `k(r, r + t)` with the gap `t` known exactly; `r > 0`, `r + t >= 0`.
    pub fn eval_offset(&self, r: f64, t: f64) -> Result<f64> {
        let s = r + t;
        if t == 0.0 || s <= 0.0 || r <= 0.0 {
            return self.eval(r, s.max(0.0));
        }
        let (big, small) = if t > 0.0 { (s, r) } else { (r, s) };
        let scale = self.prefactor * big.powf(self.params.alpha - self.params.dim());
        let gap = t.abs() / big;
        let ratio = small / big;
        Ok(scale * self.hyp.eval_with_complement(ratio * ratio, gap * (1.0 + ratio))?)
    }
}

/// `A_α ∫_{S^{d-1}} |r e₁ - s ω|^{α-d} dσ(ω)` for `r, s >= 0`, not both zero.
pub fn riesz_angular_kernel(r: f64, s: f64, params: &KernelParams) -> Result<f64> {
    AngularKernel::new(*params)?.eval(r, s)
}

/// Dense discretisation of `I_α` on a radial grid.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    grid: Arc<RadialGrid>,
    params: KernelParams,
    matrix: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// `G v` for a raw node vector.
    pub fn apply_slice(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.matrix * v).data.into()
    }

    /// `Σ_i w_i ρ_i (Gρ)_i`.
    pub fn weighted_form(&self, values: &[f64]) -> f64 {
        let g = self.apply_slice(values);
        self.grid.weights().iter().zip(values).zip(&g).map(|((w, a), b)| w * a * b).sum()
    }
}

/// Assembles the kernel matrix, one row per rayon task.
pub fn assemble_kernel(grid: &Arc<RadialGrid>, params: &KernelParams) -> Result<KernelMatrix> {
    if grid.d() != params.d {
        return Err(Error::Parameter(format!(
            "grid built for d = {} but kernel has d = {}",
            grid.d(),
            params.d
        )));
    }
    let kernel = AngularKernel::new(*params)?;
    let rule = GradedRule::new(16, (params.alpha - 1.0).min(0.0));
    let n = grid.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| assemble_row(grid, &kernel, &rule, i))
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(KernelMatrix { grid: grid.clone(), params: *params, matrix })
}

fn assemble_row(grid: &RadialGrid, kernel: &AngularKernel, rule: &GradedRule, i: usize) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    let weights = grid.weights();
    let sigma = kernel.params().sphere_area();
    let ri = nodes[i];
    let mut row = vec![0.0; nodes.len()];
    let mut kvals = vec![0.0; nodes.len()];
    for j in 0..nodes.len() {
        if j != i {
            kvals[j] = kernel.eval(ri, nodes[j])?;
            row[j] = kvals[j] * weights[j] / sigma;
        }
    }

    // The widest window is the most accurate; near the origin at large d + α
    // the node sum can overshoot, so the window shrinks until the diagonal
    // is nonnegative. The panels touching r_i alone always give a positive value.
    for extra in (0..=CORRECTION_PANELS).rev() {
        row[i] = diagonal_correction(grid, kernel, rule, &kvals, i, extra)?;
        if row[i] >= 0.0 {
            break;
        }
    }
    row[i] = row[i].max(0.0);

    if let Some(j) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::Assembly(format!("non-finite entry G[{i}][{j}]")));
    }
    Ok(row)
}

/// `∫_W k(r_i, s) s^{d-1} ds` minus its node sum over the window `W` of the
/// panels touching `r_i` plus `extra` panels on each side.
fn diagonal_correction(
    grid: &RadialGrid,
    kernel: &AngularKernel,
    rule: &GradedRule,
    kvals: &[f64],
    i: usize,
    extra: usize,
) -> Result<f64> {
    let nodes = grid.nodes();
    let sigma = kernel.params().sphere_area();
    let ri = nodes[i];
    let panels = grid.panels();
    let (lo, hi) = grid.panels_at(i);
    let lo = lo.saturating_sub(extra);
    let hi = (hi + extra).min(panels.len() - 1);
    let (a, b) = (nodes[panels[lo].first], nodes[panels[hi].last()]);
    let dm1 = grid.d() as i32 - 1;
    let mut failure = None;
    let exact = rule.integrate_around_offsets(a, b, ri, |t| match kernel.eval_offset(ri, t) {
        Ok(k) => k * (ri + t).powi(dm1),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    });
    if let Some(e) = failure {
        return Err(Error::Assembly(format!("row {i} (r = {ri}): {e}")));
    }
    let node_sum: f64 = panels[lo..=hi]
        .iter()
        .flat_map(|p| p.entries())
        .filter(|&(j, _)| j != i)
        .map(|(j, w)| kvals[j] * w / sigma)
        .sum();
    Ok(exact - node_sum)
}

/// `I_α ∗ ρ` at the nodes.
pub fn riesz_apply(kernel: &KernelMatrix, rho: &RadialFunction) -> Result<RadialFunction> {
    rho.check_grid(kernel.grid())?;
    RadialFunction::new(kernel.grid().clone(), kernel.apply_slice(rho.values()))
        .map_err(|e| Error::Assembly(format!("Riesz potential not finite: {e}")))
}

#[derive(Debug, Clone, Serialize)]
pub enum TailStatus {
    Checked,
    /// Input outside the lemma's hypotheses; no verdict.
    Precondition(String),
}

/// Far-field check `r^{d-α} (I_α ρ)(r) → A_α ‖ρ‖₁`.
#[derive(Debug, Clone, Serialize)]
pub struct NewtonTailReport {
    pub status: TailStatus,
    pub predicted: f64,
    pub mass: f64,
    /// `(r, r^{d-α} (Gρ)(r))` over the last decade.
    pub curve: Vec<(f64, f64)>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Relative tolerance of the Newton tail check.
pub const NEWTON_TAIL_TOLERANCE: f64 = 0.02;

/// Compares `r^{d-α}(Gρ)(r)` with `A_α ‖ρ‖₁` over the last decade of the grid.
pub fn newton_tail_check(rho: &RadialFunction, kernel: &KernelMatrix) -> Result<NewtonTailReport> {
    let grid = kernel.grid();
    rho.check_grid(grid)?;
    let params = kernel.params();
    let values = rho.values();
    let mass = rho.integral();
    let predicted = params.riesz_constant() * mass;
    let precondition = |reason: String| NewtonTailReport {
        status: TailStatus::Precondition(reason),
        predicted,
        mass,
        curve: Vec::new(),
        max_deviation: f64::NAN,
        pass: false,
    };

    let scale = rho.max_abs();
    if scale == 0.0 {
        return Ok(NewtonTailReport {
            status: TailStatus::Checked,
            predicted: 0.0,
            mass: 0.0,
            curve: Vec::new(),
            max_deviation: 0.0,
            pass: true,
        });
    }
    if values.iter().any(|&v| v < -1e-14 * scale) {
        return Ok(precondition("density takes negative values".into()));
    }
    let d = params.d as i32;
    let moments: Vec<f64> = grid.nodes().iter().zip(values).map(|(r, v)| r.powi(d) * v.abs()).collect();
    let peak = moments.iter().fold(0.0f64, |m, &v| m.max(v));
    let tail = moments[moments.len() - 1];
    if tail > 1e-3 * peak {
        return Ok(precondition(format!(
            "r^d ρ does not decay on the grid (last/peak = {:.3e})",
            tail / peak
        )));
    }

    let potential = kernel.apply_slice(values);
    let start = grid.r_max() / 10.0 * (1.0 - 1e-12);
    let exponent = params.dim() - params.alpha;
    let curve: Vec<(f64, f64)> = grid
        .nodes()
        .iter()
        .zip(&potential)
        .filter(|(r, _)| **r >= start)
        .map(|(&r, &g)| (r, g * r.powf(exponent)))
        .collect();
    let max_deviation = curve.iter().map(|(_, v)| (v / predicted - 1.0).abs()).fold(0.0, f64::max);
    Ok(NewtonTailReport {
        status: TailStatus::Checked,
        predicted,
        mass,
        curve,
        max_deviation,
        pass: max_deviation <= NEWTON_TAIL_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridLayout};
    use crate::params::sphere_area;
    use crate::quadrature::gauss_legendre;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    /// Angular average by quadrature over the polar angle.
    fn polar_oracle(r: f64, s: f64, params: &KernelParams) -> f64 {
        let d = params.d;
        let e = (params.alpha - d as f64) / 2.0;
        let ring = sphere_area(d - 1);
        let f = |t: f64| (r * r + s * s - 2.0 * r * s * t.cos()).powf(e) * t.sin().powi(d as i32 - 2);
        let panels = 64;
        let h = PI / panels as f64;
        let total: f64 = (0..panels).map(|k| gauss_legendre(32, k as f64 * h, (k + 1) as f64 * h, f)).sum();
        params.riesz_constant() * ring * total
    }

    fn kernel_2_1() -> &'static KernelMatrix {
        static K: OnceLock<KernelMatrix> = OnceLock::new();
        K.get_or_init(|| {
            let params = KernelParams::new(2, 1.0).unwrap();
            let grid = build_grid(&params, &GridLayout::solver()).unwrap();
            assemble_kernel(&grid, &params).unwrap()
        })
    }

    #[test]
    fn graphene_kernel_at_origin() {
        let params = KernelParams::new(2, 1.0).unwrap();
        assert_relative_eq!(riesz_angular_kernel(1.0, 0.0, &params).unwrap(), 1.0, max_relative = 1e-14);
        assert_eq!(
            riesz_angular_kernel(0.0, 1.0, &params).unwrap(),
            riesz_angular_kernel(1.0, 0.0, &params).unwrap()
        );
        assert!(riesz_angular_kernel(0.0, 0.0, &params).is_err());
        assert!(riesz_angular_kernel(-1.0, 0.5, &params).is_err());
    }

    #[test]
    fn closed_form_matches_polar_quadrature() {
        let params = KernelParams::new(3, 1.5).unwrap();
        let k = riesz_angular_kernel(2.0, 1.0, &params).unwrap();
        assert_relative_eq!(k, polar_oracle(2.0, 1.0, &params), max_relative = 1e-8);
        for &(d, alpha, r, s) in &[(2, 0.5, 1.0, 0.3), (2, 1.0, 0.7, 1.9), (4, 1.2, 3.0, 2.5), (5, 1.9, 0.2, 0.21)] {
            let params = KernelParams::new(d, alpha).unwrap();
            let k = riesz_angular_kernel(r, s, &params).unwrap();
            assert_relative_eq!(k, polar_oracle(r, s, &params), max_relative = 1e-8);
        }
    }

    #[test]
    fn three_dimensional_cartesian_oracle() {
        // brute force over the sphere in spherical coordinates (theta, phi)
        let params = KernelParams::new(3, 1.5).unwrap();
        let (r, s) = (2.0f64, 1.0f64);
        let inner = |theta: f64| {
            gauss_legendre(32, 0.0, 2.0 * PI, |phi| {
                let (x, y, z) = (theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                let dist2 = (r - s * z).powi(2) + (s * x).powi(2) + (s * y).powi(2);
                dist2.powf(-0.75) * theta.sin()
            })
        };
        let h = PI / 32.0;
        let total: f64 = (0..32).map(|k| gauss_legendre(32, k as f64 * h, (k + 1) as f64 * h, inner)).sum();
        let want = params.riesz_constant() * total;
        assert_relative_eq!(riesz_angular_kernel(r, s, &params).unwrap(), want, max_relative = 1e-8);
    }

    #[test]
    fn diagonal_value_for_alpha_above_one() {
        let params = KernelParams::new(3, 1.5).unwrap();
        let k = riesz_angular_kernel(1.0, 1.0, &params).unwrap();
        let near = riesz_angular_kernel(1.0, 1.0 - 1e-9, &params).unwrap();
        assert_relative_eq!(k, near, max_relative = 1e-4);
        let params = KernelParams::new(2, 1.0).unwrap();
        assert!(riesz_angular_kernel(1.0, 1.0, &params).unwrap().is_infinite());
    }

    fn beta_density(params: &KernelParams, grid: &Arc<RadialGrid>) -> RadialFunction {
        let e = -(params.dim() + params.alpha) / 2.0;
        RadialFunction::from_fn(grid.clone(), |r| (1.0 + r * r).powf(e)).unwrap()
    }

    #[test]
    fn beta_oracle_graphene() {
        let k = kernel_2_1();
        let rho = beta_density(k.params(), k.grid());
        let v = riesz_apply(k, &rho).unwrap();
        assert_relative_eq!(v.values()[0], 1.0, max_relative = 5e-4);
        // the whole profile follows kappa (1+r^2)^{-1/2}, truncation aside
        for (r, value) in v.samples().filter(|(r, _)| *r <= 1e3) {
            let want = (1.0 + r * r).powf(-0.5);
            assert!((value / want - 1.0).abs() < 5e-4, "r = {r}: {value} vs {want}");
        }
    }

    #[test]
    fn beta_oracle_other_orders() {
        for &(d, alpha) in &[(3usize, 0.5), (3, 1.5), (4, 1.9)] {
            let params = KernelParams::new(d, alpha).unwrap();
            let grid = build_grid(&params, &GridLayout::solver()).unwrap();
            let k = assemble_kernel(&grid, &params).unwrap();
            let v = riesz_apply(&k, &beta_density(&params, &grid)).unwrap();
            assert_relative_eq!(v.values()[0], params.kappa(), max_relative = 5e-4);
        }
    }

    #[test]
    fn entries_nonnegative_and_weighted_symmetric() {
        for &(d, alpha) in &[(2usize, 1.0), (2, 0.3), (3, 0.5), (3, 1.5), (4, 1.9)] {
            let params = KernelParams::new(d, alpha).unwrap();
            let grid = build_grid(&params, &GridLayout::new(16, 8, 1e3).unwrap()).unwrap();
            let k = assemble_kernel(&grid, &params).unwrap();
            let w = grid.weights();
            for i in 0..k.len() {
                for j in 0..k.len() {
                    assert!(k.entry(i, j) >= 0.0, "G[{i}][{j}] < 0 at d={d}, alpha={alpha}");
                    let (a, b) = (w[i] * k.entry(i, j), w[j] * k.entry(j, i));
                    assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()));
                }
            }
        }
    }

    #[test]
    fn weighted_form_is_positive_semidefinite() {
        let k = kernel_2_1();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let v: Vec<f64> = (0..k.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(k.weighted_form(&v) >= 0.0);
        }
        // all eigenvalues of the symmetrised operator W^{1/2} G W^{-1/2}
        let w = k.grid().weights();
        let s = DMatrix::from_fn(k.len(), k.len(), |i, j| k.entry(i, j) * (w[i] / w[j]).sqrt());
        let s = (&s + s.transpose()) * 0.5;
        let eig = s.symmetric_eigenvalues();
        let max = eig.max();
        assert!(eig.min() > -1e-10 * max, "min eigenvalue {}", eig.min());
    }

    #[test]
    fn newton_tail_of_unit_hat() {
        let k = kernel_2_1();
        let hat = RadialFunction::from_fn(k.grid().clone(), |r| if r < 1.0 { (1.0 - r * r).powi(2) } else { 0.0 })
            .unwrap();
        let hat = hat.map(|v| v / hat.integral()).unwrap();
        let report = newton_tail_check(&hat, k).unwrap();
        assert!(report.pass, "{report:?}");
        assert_relative_eq!(report.predicted, 1.0 / (2.0 * PI), max_relative = 1e-12);
        let v = riesz_apply(k, &hat).unwrap();
        for (r, value) in v.samples().filter(|(r, _)| *r >= 100.0) {
            assert!((value * r * 2.0 * PI - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn newton_tail_of_algebraic_density_and_zero() {
        let k = kernel_2_1();
        let rho = beta_density(k.params(), k.grid());
        let report = newton_tail_check(&rho, k).unwrap();
        assert!(report.pass);
        let r_max = k.grid().r_max();
        let mass = 2.0 * PI * (1.0 - 1.0 / (1.0 + r_max * r_max).sqrt());
        assert_relative_eq!(report.mass, mass, max_relative = 1e-5);
        let zero = RadialFunction::zeros(k.grid().clone());
        let report = newton_tail_check(&zero, k).unwrap();
        assert!(report.pass && report.predicted == 0.0);
        let slow = RadialFunction::from_fn(k.grid().clone(), |r| 1.0 / (1.0 + r * r)).unwrap();
        assert!(matches!(newton_tail_check(&slow, k).unwrap().status, TailStatus::Precondition(_)));
    }

    #[test]
    fn apply_is_linear_and_checks_grids() {
        let k = kernel_2_1();
        let g = k.grid().clone();
        let a = RadialFunction::from_fn(g.clone(), |r| (-r).exp()).unwrap();
        let b = RadialFunction::from_fn(g.clone(), |r| (1.0 + r).powi(-4) * (3.0 * r).cos()).unwrap();
        let combo = RadialFunction::new(
            g.clone(),
            a.values().iter().zip(b.values()).map(|(x, y)| 2.5 * x - 0.75 * y).collect(),
        )
        .unwrap();
        let (ga, gb, gc) = (riesz_apply(k, &a).unwrap(), riesz_apply(k, &b).unwrap(), riesz_apply(k, &combo).unwrap());
        let scale = gc.max_abs();
        for j in 0..g.len() {
            let lin = 2.5 * ga.values()[j] - 0.75 * gb.values()[j];
            assert!((lin - gc.values()[j]).abs() <= 1e-12 * scale);
        }
        let zero = riesz_apply(k, &RadialFunction::zeros(g)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let params = KernelParams::new(2, 1.0).unwrap();
        let other = build_grid(&params, &GridLayout::tail()).unwrap();
        assert_eq!(riesz_apply(k, &RadialFunction::zeros(other)).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn nonnegative_density_gives_nonnegative_potential() {
        let k = kernel_2_1();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..k.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        assert!(k.apply_slice(&v).iter().all(|&x| x >= 0.0));
    }
}
