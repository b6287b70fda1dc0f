//! Radial grid, quadrature weights and node-sampled radial functions.
//!
//! Nodes: a uniform section on `[0, 1]` followed by a geometric section on
//! `[1, R_max]`. Weights integrate `f(r) σ_{d-1} r^{d-1} dr` with composite
//! quadratic panels: Lagrange quadratics in `r` on the uniform section
//! (the two cells at the origin stay linear) and Simpson panels in `ln r`
//! on the geometric section.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{sphere_area, KernelParams};
use crate::quadrature::gauss_legendre;

/// Grid layout: uniform interval count on `[0,1]`, geometric intervals per
/// decade on `[1, R_max]`, and `R_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub inner: usize,
    pub per_decade: usize,
    pub r_max: f64,
}

impl GridLayout {
    pub fn new(inner: usize, per_decade: usize, r_max: f64) -> Result<Self> {
        let layout = Self { inner, per_decade, r_max };
        layout.validate()?;
        Ok(layout)
    }

    /// Default layout for solves: 64 / 32 per decade / 1e4.
    pub fn solver() -> Self {
        Self { inner: 64, per_decade: 32, r_max: 1e4 }
    }

    /// Default layout for tail studies: 64 / 32 per decade / 1e5.
    pub fn tail() -> Self {
        Self { inner: 64, per_decade: 32, r_max: 1e5 }
    }

    pub fn with_r_max(self, r_max: f64) -> Self {
        Self { r_max, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_max.is_finite() && self.r_max >= 10.0) {
            return Err(Error::Parameter(format!("R_max must be at least 10, got {}", self.r_max)));
        }
        if self.inner < 8 {
            return Err(Error::Parameter(format!("inner node count must be at least 8, got {}", self.inner)));
        }
        if self.per_decade < 8 {
            return Err(Error::Parameter(format!(
                "nodes per decade must be at least 8, got {}",
                self.per_decade
            )));
        }
        Ok(())
    }

    /// Interval counts actually used (both rounded up to even).
    pub fn interval_counts(&self) -> (usize, usize) {
        let inner = self.inner + self.inner % 2;
        let outer = (self.per_decade as f64 * self.r_max.log10()).ceil() as usize;
        (inner, outer.max(2) + outer % 2)
    }
}

impl Default for GridLayout {
    fn default() -> Self {
        Self::solver()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PanelKind {
    /// Single linear cell in `r` (two nodes).
    Linear,
    /// Quadratic Lagrange panel in `r` (three nodes).
    Quadratic,
    /// Quadratic panel in `t = ln r` interpolating `ρ r^d` (three nodes).
    Logarithmic,
}

/// One quadrature panel: its first node and per-node weight contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub kind: PanelKind,
    pub first: usize,
    pub weights: [f64; 3],
}

impl Panel {
    pub fn node_count(&self) -> usize {
        match self.kind {
            PanelKind::Linear => 2,
            _ => 3,
        }
    }

    pub fn last(&self) -> usize {
        self.first + self.node_count() - 1
    }

    /// `(node index, weight)` pairs.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.node_count()).map(move |k| (self.first + k, self.weights[k]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    d: usize,
    layout: GridLayout,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: Vec<Panel>,
    unit_index: usize,
}

/// Builds the grid for dimension `kernel.d`.
pub fn build_grid(kernel: &KernelParams, layout: &GridLayout) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(kernel.d, layout).map(Arc::new)
}

impl RadialGrid {
    pub fn new(d: usize, layout: &GridLayout) -> Result<Self> {
        layout.validate()?;
        if d < 1 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        let (n_in, n_out) = layout.interval_counts();
        let h = 1.0 / n_in as f64;
        let mut nodes: Vec<f64> = (0..=n_in).map(|k| k as f64 * h).collect();
        nodes[n_in] = 1.0;
        let log_r = layout.r_max.ln();
        nodes.extend((1..=n_out).map(|k| (log_r * k as f64 / n_out as f64).exp()));
        let last = nodes.len() - 1;
        nodes[last] = layout.r_max;

        let sigma = sphere_area(d);
        let mut panels = Vec::with_capacity(n_in / 2 + n_out / 2 + 1);
        for cell in 0..2 {
            let (a, b) = (nodes[cell], nodes[cell + 1]);
            let w0 = sigma * gauss_legendre(8, a, b, |s| s.powi(d as i32 - 1) * (b - s) / (b - a));
            let w1 = sigma * gauss_legendre(8, a, b, |s| s.powi(d as i32 - 1) * (s - a) / (b - a));
            panels.push(Panel { kind: PanelKind::Linear, first: cell, weights: [w0, w1, 0.0] });
        }
        for first in (2..n_in).step_by(2) {
            let xs = [nodes[first], nodes[first + 1], nodes[first + 2]];
            let mut weights = [0.0; 3];
            for (k, w) in weights.iter_mut().enumerate() {
                *w = sigma * gauss_legendre(24, xs[0], xs[2], |s| s.powi(d as i32 - 1) * lagrange(&xs, k, s));
            }
            panels.push(Panel { kind: PanelKind::Quadratic, first, weights });
        }
        let ht = log_r / n_out as f64;
        for first in (n_in..last).step_by(2) {
            let mut weights = [0.0; 3];
            for (k, c) in [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0].into_iter().enumerate() {
                weights[k] = sigma * nodes[first + k].powi(d as i32) * ht * c;
            }
            panels.push(Panel { kind: PanelKind::Logarithmic, first, weights });
        }

        let mut weights = vec![0.0; nodes.len()];
        for panel in &panels {
            for (j, w) in panel.entries() {
                weights[j] += w;
            }
        }
        Ok(Self { d, layout: *layout, nodes, weights, panels, unit_index: n_in })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.layout.r_max
    }

    /// Index of the node at `r = 1`.
    pub fn unit_index(&self) -> usize {
        self.unit_index
    }

    /// Weights of the panels inside the unit ball (zero beyond `r = 1`).
    pub fn ball_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for panel in self.panels.iter().filter(|p| p.kind != PanelKind::Logarithmic) {
            for (j, wj) in panel.entries() {
                w[j] += wj;
            }
        }
        w
    }

    /// `Σ w_j f_j`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    /// Index range `[lo, hi]` of panels touching node `i`.
    pub fn panels_at(&self, i: usize) -> (usize, usize) {
        let lo = self.panels.partition_point(|p| p.last() < i);
        let hi = self.panels.partition_point(|p| p.first <= i) - 1;
        (lo, hi)
    }

    /// Whether two grids are interchangeable for matrix-vector work.
    pub fn same_as(&self, other: &RadialGrid) -> bool {
        std::ptr::eq(self, other) || (self.d == other.d && self.layout == other.layout)
    }
}

/// `k`-th quadratic Lagrange basis on nodes `xs`, evaluated at `x`.
pub(crate) fn lagrange(xs: &[f64; 3], k: usize, x: f64) -> f64 {
    let mut v = 1.0;
    for (m, &xm) in xs.iter().enumerate() {
        if m != k {
            v *= (x - xm) / (xs[k] - xm);
        }
    }
    v
}

/// Node samples of a radial quantity on a shared grid.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "expected {} node values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value at node {j} (r = {})", grid.nodes()[j])));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(grid: Arc<RadialGrid>, f: F) -> Result<Self> {
        let values = grid.nodes().iter().copied().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &RadialFunction) -> bool {
        self.grid.same_as(&other.grid)
    }

    pub fn check_grid(&self, grid: &RadialGrid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Piecewise-linear interpolation; constant below the first node, zero
    /// beyond `R_max`.
    pub fn eval(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        if r <= nodes[0] {
            return self.values[0];
        }
        if r > self.grid.r_max() {
            return 0.0;
        }
        let k = nodes.partition_point(|&x| x < r).min(nodes.len() - 1);
        let (a, b) = (nodes[k - 1], nodes[k]);
        let t = (r - a) / (b - a);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }

    /// `∫ f dx` over the ball of radius `R_max`.
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn abs_integral(&self) -> f64 {
        self.grid.weights().iter().zip(&self.values).map(|(w, f)| w * f.abs()).sum()
    }

    pub fn map<F: FnMut(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().copied().map(f).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values with radii, for output.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.nodes().iter().copied().zip(self.values.iter().copied())
    }
}
