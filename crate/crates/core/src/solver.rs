//! Discrete energy and the minimizers of
//!
//! ```text
//! E(ρ) = Σ w_j (|ρ_j|^q / q - V_j ρ_j) + ½ Σ w_j ρ_j (Gρ)_j
//! ```
//!
//! over all densities (free) or over `ρ >= 0`. The Euler–Lagrange relation
//! reads `ρ = T(V - Gρ)` with `T(w) = sign(w)|w|^{1/(q-1)}` (resp.
//! `[w]₊^{1/(q-1)}`). Two iterations are available: the damped fixed point
//! `ρ ← (1-θ)ρ + θ T(w)`, and a Newton-linearised variant that solves
//! `(I + T'(w) G) δ = T(w) - ρ` for the step. Both are guarded by the
//! energy: a step is accepted only if `E` does not increase beyond
//! roundoff.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::RadialFunction;
use crate::params::ProblemParams;
use crate::potentials::Potential;
use crate::riesz::KernelMatrix;

/// Below this `θ` a step direction is abandoned.
const MIN_DAMPING: f64 = 1e-4;
/// Relative roundoff allowance of the energy guard.
const ENERGY_SLACK: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Free,
    Nonnegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    Zero,
    /// `T(V)`: the local Thomas–Fermi density, interaction dropped.
    ThomasFermiLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Newton,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Nominal damping `θ ∈ (0, 1]`.
    pub damping: f64,
    pub max_iter: usize,
    /// Sup-norm EL residual relative to `sup|V|`.
    pub tol: f64,
    /// Node-wise EL residual relative to `|V_i| + (G|ρ|)_i`; keeps the far
    /// tail converged where `V` is tiny. Zero disables it.
    pub node_tol: f64,
    pub mode: Mode,
    pub init: InitialGuess,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iter: 500,
            tol: 1e-10,
            node_tol: 1e-11,
            mode: Mode::Free,
            init: InitialGuess::ThomasFermiLocal,
            method: Method::Newton,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Parameter(format!("damping {} must lie in (0, 1]", self.damping)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Parameter(format!("tolerance {} must be positive", self.tol)));
        }
        if !(self.node_tol >= 0.0 && self.node_tol.is_finite()) {
            return Err(Error::Parameter(format!("node tolerance {} must be nonnegative", self.node_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn with_mode(self, mode: Mode) -> Self {
        Self { mode, ..self }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizerResult {
    pub rho: RadialFunction,
    /// `u = V - Gρ`.
    pub u: RadialFunction,
    pub energy: f64,
    /// Sup-norm EL residual of the mode, relative to its scale.
    pub residual: f64,
    /// Largest node-relative residual.
    pub node_residual: f64,
    /// Accepted iterates, the initial guess included.
    pub iterations: usize,
    pub converged: bool,
    pub mass: f64,
    pub abs_mass: f64,
    pub mode: Mode,
    pub options: SolveOptions,
    pub energy_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    /// Why the iteration stopped without converging.
    pub diagnostics: Option<String>,
}

impl MinimizerResult {
    pub fn min(&self) -> f64 {
        self.rho.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.rho.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `E(ρ)` on the grid.
pub fn energy(rho: &RadialFunction, v: &Potential, kernel: &KernelMatrix, params: &ProblemParams) -> Result<f64> {
    rho.check_grid(kernel.grid())?;
    v.values().check_grid(kernel.grid())?;
    let g = kernel.apply_slice(rho.values());
    Ok(energy_parts(rho.values(), v.values().values(), &g, kernel.grid().weights(), params.q).0)
}

/// Energy and the sum of the absolute values of its terms.
fn energy_parts(rho: &[f64], v: &[f64], g: &[f64], w: &[f64], q: f64) -> (f64, f64) {
    let (mut e, mut scale) = (0.0, 0.0);
    for j in 0..rho.len() {
        let local = rho[j].abs().powf(q) / q;
        let linear = v[j] * rho[j];
        let pair = 0.5 * rho[j] * g[j];
        e += w[j] * (local - linear + pair);
        scale += w[j] * (local + linear.abs() + pair.abs());
    }
    (e, scale)
}

/// Node-wise residual of the EL relation: `sign(ρ)|ρ|^{q-1} - u` in free
/// mode, `ρ - [u]₊^{1/(q-1)}` in nonnegative mode.
pub fn el_residual(
    rho: &RadialFunction,
    v: &Potential,
    kernel: &KernelMatrix,
    params: &ProblemParams,
    mode: Mode,
) -> Result<RadialFunction> {
    rho.check_grid(kernel.grid())?;
    v.values().check_grid(kernel.grid())?;
    let g = kernel.apply_slice(rho.values());
    let q = params.q;
    let values = rho
        .values()
        .iter()
        .zip(v.values().values())
        .zip(&g)
        .map(|((&r, &vv), &gr)| {
            let u = vv - gr;
            match mode {
                Mode::Free => signed_pow(r, q - 1.0) - u,
                Mode::Nonnegative => r - u.max(0.0).powf(1.0 / (q - 1.0)),
            }
        })
        .collect();
    RadialFunction::new(kernel.grid().clone(), values)
}

fn signed_pow(x: f64, e: f64) -> f64 {
    x.signum() * x.abs().powf(e)
}

pub fn solve_free(v: &Potential, kernel: &KernelMatrix, params: &ProblemParams, opts: &SolveOptions) -> Result<MinimizerResult> {
    solve(v, kernel, params, &opts.with_mode(Mode::Free))
}

pub fn solve_nonneg(
    v: &Potential,
    kernel: &KernelMatrix,
    params: &ProblemParams,
    opts: &SolveOptions,
) -> Result<MinimizerResult> {
    solve(v, kernel, params, &opts.with_mode(Mode::Nonnegative))
}

/// Shared state of one solve.
struct Problem<'a> {
    kernel: &'a KernelMatrix,
    v: &'a [f64],
    w: &'a [f64],
    q: f64,
    e: f64,
    mode: Mode,
}

struct State {
    rho: Vec<f64>,
    g: Vec<f64>,
    energy: f64,
    scale: f64,
}

impl Problem<'_> {
    fn state(&self, rho: Vec<f64>) -> State {
        let g = self.kernel.apply_slice(&rho);
        let (energy, scale) = energy_parts(&rho, self.v, &g, self.w, self.q);
        State { rho, g, energy, scale }
    }

    /// `T(w)` of the mode.
    fn target(&self, w: f64) -> f64 {
        match self.mode {
            Mode::Free => signed_pow(w, self.e),
            Mode::Nonnegative => w.max(0.0).powf(self.e),
        }
    }

    fn target_slope(&self, w: f64) -> f64 {
        if self.mode == Mode::Nonnegative && w <= 0.0 {
            0.0
        } else {
            self.e * w.abs().powf(self.e - 1.0)
        }
    }

    /// `(sup residual / scale, max node-relative residual)`.
    fn residuals(&self, s: &State, sup_v: f64) -> (f64, f64) {
        let abs_g = self.kernel.apply_slice(&s.rho.iter().map(|x| x.abs()).collect::<Vec<_>>());
        let (mut sup, mut node) = (0.0f64, 0.0f64);
        for i in 0..s.rho.len() {
            let u = self.v[i] - s.g[i];
            let (res, scale) = match self.mode {
                Mode::Free => (signed_pow(s.rho[i], self.q - 1.0) - u, sup_v),
                Mode::Nonnegative => (s.rho[i] - u.max(0.0).powf(self.e), sup_v.powf(self.e)),
            };
            sup = sup.max(match (scale > 0.0, res == 0.0) {
                (true, _) => res.abs() / scale,
                (false, true) => 0.0,
                (false, false) => f64::INFINITY,
            });
            // u-form at the node, relative to the size of the terms that cancel in u
            let ures = signed_pow(s.rho[i], self.q - 1.0)
                - if self.mode == Mode::Nonnegative { u.max(0.0) } else { u };
            let denom = self.v[i].abs() + abs_g[i];
            if ures != 0.0 {
                node = node.max(if denom > 0.0 { ures.abs() / denom } else { f64::INFINITY });
            }
        }
        (sup, node)
    }

    fn picard_direction(&self, s: &State) -> Vec<f64> {
        (0..s.rho.len()).map(|i| self.target(self.v[i] - s.g[i]) - s.rho[i]).collect()
    }

    fn newton_direction(&self, s: &State) -> Option<Vec<f64>> {
        let n = s.rho.len();
        let g = self.kernel.matrix();
        let slope: Vec<f64> = (0..n).map(|i| self.target_slope(self.v[i] - s.g[i])).collect();
        let jac = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + slope[i] * g[(i, j)]);
        let rhs = DVector::from_vec(self.picard_direction(s));
        let step = jac.lu().solve(&rhs)?;
        step.iter().all(|x| x.is_finite()).then(|| step.data.into())
    }

    fn candidate(&self, s: &State, dir: &[f64], theta: f64) -> State {
        let rho = s
            .rho
            .iter()
            .zip(dir)
            .map(|(r, d)| {
                let x = r + theta * d;
                if self.mode == Mode::Nonnegative {
                    x.max(0.0)
                } else {
                    x
                }
            })
            .collect();
        self.state(rho)
    }

    /// Energy-guarded step along `dir`, halving from `theta`.
    fn guarded_step(&self, s: &State, dir: &[f64], mut theta: f64) -> Option<(State, f64)> {
        while theta >= MIN_DAMPING {
            let c = self.candidate(s, dir, theta);
            if c.energy.is_finite() && c.energy <= s.energy + ENERGY_SLACK * s.scale.max(c.scale) {
                return Some((c, theta));
            }
            theta *= 0.5;
        }
        None
    }
}

/// Minimizer in the mode given by `opts`.
pub fn solve(v: &Potential, kernel: &KernelMatrix, params: &ProblemParams, opts: &SolveOptions) -> Result<MinimizerResult> {
    opts.validate()?;
    v.values().check_grid(kernel.grid())?;
    if kernel.params() != &params.kernel() {
        return Err(Error::Parameter("kernel matrix was assembled for different (d, alpha)".into()));
    }
    let q = params.q;
    if q <= 1.0 + 1e-6 {
        return Err(Error::Parameter(format!("q = {q} too close to 1: the power 1/(q-1) overflows")));
    }
    let grid = kernel.grid().clone();
    let problem = Problem {
        kernel,
        v: v.values().values(),
        w: grid.weights(),
        q,
        e: 1.0 / (q - 1.0),
        mode: opts.mode,
    };
    let sup_v = v.sup();

    let init = match opts.init {
        InitialGuess::Zero => vec![0.0; grid.len()],
        InitialGuess::ThomasFermiLocal => problem.v.iter().map(|&x| problem.target(x)).collect(),
    };
    let mut state = problem.state(init);
    let mut energy_history = vec![state.energy];
    let (mut sup_res, mut node_res) = problem.residuals(&state, sup_v);
    let mut residual_history = vec![sup_res];
    let mut theta = opts.damping;
    let mut diagnostics = None;
    let mut converged = false;

    loop {
        if !(sup_res.is_finite() && state.energy.is_finite()) {
            diagnostics = Some("non-finite residual or energy".to_string());
            break;
        }
        if sup_res <= opts.tol && (opts.node_tol == 0.0 || node_res <= opts.node_tol) {
            converged = true;
            break;
        }
        if residual_history.len() >= opts.max_iter {
            diagnostics = Some(format!(
                "no convergence after {} iterations: residual {sup_res:.3e}, node residual {node_res:.3e}",
                opts.max_iter
            ));
            break;
        }
        let step = match opts.method {
            Method::Picard => problem
                .guarded_step(&state, &problem.picard_direction(&state), opts.damping)
                .map(|(s, _)| s),
            Method::Newton => {
                let newton = problem
                    .newton_direction(&state)
                    .and_then(|dir| problem.guarded_step(&state, &dir, theta));
                match newton {
                    Some((s, t)) => {
                        theta = (2.0 * t).min(1.0);
                        Some(s)
                    }
                    None => {
                        theta = opts.damping;
                        problem
                            .guarded_step(&state, &problem.picard_direction(&state), opts.damping)
                            .map(|(s, _)| s)
                    }
                }
            }
        };
        let Some(next) = step else {
            diagnostics = Some(format!(
                "energy increases for every damping down to {MIN_DAMPING:.0e}: residual {sup_res:.3e}"
            ));
            break;
        };
        if next.rho == state.rho {
            diagnostics = Some(format!("iteration stalled at residual {sup_res:.3e}, node residual {node_res:.3e}"));
            break;
        }
        state = next;
        (sup_res, node_res) = problem.residuals(&state, sup_v);
        energy_history.push(state.energy);
        residual_history.push(sup_res);
    }

    let u: Vec<f64> = problem.v.iter().zip(&state.g).map(|(a, b)| a - b).collect();
    let rho = RadialFunction::new(grid.clone(), state.rho)?;
    Ok(MinimizerResult {
        mass: rho.integral(),
        abs_mass: rho.abs_integral(),
        u: RadialFunction::new(grid, u)?,
        rho,
        energy: state.energy,
        residual: sup_res,
        node_residual: node_res,
        iterations: residual_history.len(),
        converged,
        mode: opts.mode,
        options: *opts,
        energy_history,
        residual_history,
        diagnostics,
    })
}

/// Slack of the node-wise ordering `[ρ_free]₊ ≥ ρ⁺`.
pub const ORDERING_SLACK: f64 = 1e-8;
/// Smallest share of nodes with a strict gap.
pub const STRICT_FRACTION: f64 = 0.01;

/// Comparison of the free minimizer with the nonnegative one.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    /// `min_i ([ρ_free]₊ - ρ⁺)_i`.
    pub min_gap: f64,
    /// Gaps above this count as strict: ten solver tolerances of `sup |ρ|`.
    pub threshold: f64,
    pub strict_fraction: f64,
    /// `max_i |ρ_free - ρ⁺|`.
    pub max_difference: f64,
    pub ordered: bool,
    /// The two minimizers agree within `threshold`.
    pub coincide: bool,
}

impl OrderingReport {
    /// Ordered with a strict gap on at least [`STRICT_FRACTION`] of the nodes.
    pub fn strict(&self) -> bool {
        self.ordered && self.strict_fraction >= STRICT_FRACTION
    }
}

pub fn ordering_check(free: &MinimizerResult, constrained: &MinimizerResult) -> Result<OrderingReport> {
    if !free.rho.same_grid(&constrained.rho) {
        return Err(Error::GridMismatch);
    }
    let scale = free.rho.max_abs().max(constrained.rho.max_abs());
    let threshold = 10.0 * free.options.tol.max(constrained.options.tol) * scale;
    let pairs = free.rho.values().iter().zip(constrained.rho.values());
    let gaps: Vec<f64> = pairs.clone().map(|(f, c)| f.max(0.0) - c).collect();
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let strict = gaps.iter().filter(|&&g| g > threshold).count();
    let max_difference = pairs.map(|(f, c)| (f - c).abs()).fold(0.0, f64::max);
    Ok(OrderingReport {
        min_gap,
        threshold,
        strict_fraction: strict as f64 / gaps.len() as f64,
        max_difference,
        ordered: min_gap >= -ORDERING_SLACK,
        coincide: max_difference <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridLayout};
    use crate::potentials::{bump_potential, potential_vz};
    use crate::riesz::assemble_kernel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn kernel() -> &'static KernelMatrix {
        static K: OnceLock<KernelMatrix> = OnceLock::new();
        K.get_or_init(|| {
            let params = ProblemParams::new(2, 1.0, 1.5).unwrap().kernel();
            let grid = build_grid(&params, &GridLayout::solver()).unwrap();
            assemble_kernel(&grid, &params).unwrap()
        })
    }

    fn small_kernel() -> &'static KernelMatrix {
        static K: OnceLock<KernelMatrix> = OnceLock::new();
        K.get_or_init(|| {
            let params = ProblemParams::new(2, 1.0, 1.5).unwrap().kernel();
            let grid = build_grid(&params, &GridLayout::new(16, 8, 100.0).unwrap()).unwrap();
            assemble_kernel(&grid, &params).unwrap()
        })
    }

    fn vz(k: &KernelMatrix) -> Potential {
        potential_vz(1.0, k.params(), k.grid()).unwrap()
    }

    fn params(q: f64) -> ProblemParams {
        ProblemParams::new(2, 1.0, q).unwrap()
    }

    #[test]
    fn zero_potential_gives_zero_density() {
        let k = kernel();
        let v = Potential::direct(RadialFunction::zeros(k.grid().clone()));
        let res = solve_free(&v, k, &params(1.5), &SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.rho.values().iter().all(|&x| x == 0.0));
        assert_eq!(res.energy, 0.0);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn vz_free_minimizer_is_positive_and_satisfies_el() {
        let k = kernel();
        let v = vz(k);
        let p = params(1.6);
        let opts = SolveOptions::default();
        let res = solve_free(&v, k, &p, &opts).unwrap();
        assert!(res.converged, "{:?}", res.diagnostics);
        assert!(res.min() > 0.0);
        assert!(res.mass > 0.9 && res.mass < 1.0, "mass {}", res.mass);
        let r = el_residual(&res.rho, &v, k, &p, Mode::Free).unwrap();
        assert!(r.max_abs() <= opts.tol * v.sup());
        // u <= V and nonincreasing density
        assert!(res.u.values().iter().zip(v.values().values()).all(|(u, vv)| u <= vv));
        assert!(res.rho.values().windows(2).all(|w| w[1] <= w[0] + 1e-8));
    }

    #[test]
    fn initial_guesses_agree() {
        let k = kernel();
        let v = vz(k);
        let p = params(1.4);
        let opts = SolveOptions::default();
        let a = solve_free(&v, k, &p, &opts).unwrap();
        let b = solve_free(&v, k, &p, &SolveOptions { init: InitialGuess::Zero, ..opts }).unwrap();
        assert!(a.converged && b.converged);
        let scale = a.rho.max_abs();
        for (x, y) in a.rho.values().iter().zip(b.rho.values()) {
            assert!((x - y).abs() <= 10.0 * opts.tol * scale.max(1.0), "{x} {y}");
        }
    }

    #[test]
    fn energy_history_is_nonincreasing() {
        let k = kernel();
        let v = vz(k);
        for q in [1.4, 2.2] {
            let res = solve_free(&v, k, &params(q), &SolveOptions { init: InitialGuess::Zero, ..Default::default() }).unwrap();
            assert!(res.converged);
            for w in res.energy_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn picard_matches_newton_on_a_small_grid() {
        let k = small_kernel();
        let v = vz(k);
        let p = params(1.5);
        let newton = solve_free(&v, k, &p, &SolveOptions::default()).unwrap();
        let picard = solve_free(
            &v,
            k,
            &p,
            &SolveOptions { method: Method::Picard, tol: 1e-8, node_tol: 0.0, max_iter: 20_000, ..Default::default() },
        )
        .unwrap();
        assert!(newton.converged && picard.converged, "{:?}", picard.diagnostics);
        let scale = newton.rho.max_abs();
        for (x, y) in newton.rho.values().iter().zip(picard.rho.values()) {
            assert!((x - y).abs() <= 1e-5 * scale);
        }
        let hist = &picard.residual_history;
        let start = hist.len() / 10;
        assert!(hist[start..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    }

    #[test]
    fn nonnegative_mode() {
        let k = kernel();
        let p = params(1.5);
        let opts = SolveOptions::default();
        let neg = Potential::direct(RadialFunction::from_fn(k.grid().clone(), |r| -1.0 / (1.0 + r)).unwrap());
        let res = solve_nonneg(&neg, k, &p, &opts).unwrap();
        assert!(res.converged && res.rho.values().iter().all(|&x| x == 0.0));

        let bump = bump_potential(1.0, 1.0, k.grid()).unwrap();
        let plus = solve_nonneg(&bump, k, &p, &opts).unwrap();
        assert!(plus.converged, "{:?}", plus.diagnostics);
        assert!(plus.min() >= 0.0);
        let support = plus.rho.samples().filter(|(_, x)| *x > 0.0).map(|(r, _)| r).fold(0.0, f64::max);
        assert!(support <= 1.0, "support reaches {support}");
        let r = el_residual(&plus.rho, &bump, k, &p, Mode::Nonnegative).unwrap();
        assert!(r.max_abs() <= opts.tol * bump.sup().powf(1.0 / (p.q - 1.0)));

        let free = solve_free(&bump, k, &p, &opts).unwrap();
        assert!(free.converged && free.min() < 0.0 && free.max() > 0.0);

        let order = ordering_check(&free, &plus).unwrap();
        assert!(order.strict() && !order.coincide, "{order:?}");

        let v = vz(k);
        let a = solve_free(&v, k, &p, &opts).unwrap();
        let b = solve_nonneg(&v, k, &p, &opts).unwrap();
        for (x, y) in a.rho.values().iter().zip(b.rho.values()) {
            assert!((x - y).abs() <= 10.0 * opts.tol * a.rho.max_abs());
        }
        assert!(ordering_check(&a, &b).unwrap().coincide);
    }

    #[test]
    fn residual_of_zero_density() {
        let k = kernel();
        let v = vz(k);
        let r = el_residual(&RadialFunction::zeros(k.grid().clone()), &v, k, &params(1.5), Mode::Free).unwrap();
        assert_eq!(r.max_abs(), v.sup());
        assert_eq!(energy(&RadialFunction::zeros(k.grid().clone()), &v, k, &params(1.5)).unwrap(), 0.0);
    }

    #[test]
    fn minimizer_beats_perturbations() {
        let k = kernel();
        let v = vz(k);
        let p = params(1.8);
        let res = solve_free(&v, k, &p, &SolveOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let eps: f64 = rng.gen_range(1e-4..1e-2);
            let pert = res.rho.map(|x| x * (1.0 + eps * rng.gen_range(-1.0..1.0)) + eps * 1e-3 * rng.gen_range(-1.0..1.0)).unwrap();
            assert!(energy(&pert, &v, k, &p).unwrap() >= res.energy);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let k = kernel();
        let v = vz(k);
        let bad = SolveOptions { damping: 0.0, ..Default::default() };
        assert!(solve_free(&v, k, &params(1.5), &bad).is_err());
        let other = ProblemParams::new(2, 0.5, 1.7).unwrap();
        assert!(solve_free(&v, k, &other, &SolveOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn energy_is_midpoint_convex(seed in 0u64..1000, q in 1.34f64..3.0) {
            let k = small_kernel();
            let v = vz(k);
            let p = params(q);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || RadialFunction::from_fn(k.grid().clone(), |_| rng.gen_range(-1.0..1.0)).unwrap();
            let (a, b) = (draw(), draw());
            let mid = RadialFunction::new(
                k.grid().clone(),
                a.values().iter().zip(b.values()).map(|(x, y)| 0.5 * (x + y)).collect(),
            ).unwrap();
            let lhs = energy(&mid, &v, k, &p).unwrap();
            let rhs = 0.5 * (energy(&a, &v, k, &p).unwrap() + energy(&b, &v, k, &p).unwrap());
            prop_assert!(lhs < rhs);
        }
    }
}
