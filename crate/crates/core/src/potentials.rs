//! External potentials: the explicit `V_Z` family, potentials generated by a
//! source through the Riesz operator, and compactly supported bumps.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{RadialFunction, RadialGrid};
use crate::params::KernelParams;
use crate::riesz::{riesz_apply, KernelMatrix};

/// Relative sup-norm agreement required between a file's `V` column and
/// the potential generated by its `f` column.
pub const CSV_CONSISTENCY: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    SourceDefined,
    Direct,
}

/// `V` together with `f = (-Δ)^{α/2} V` when it is known.
#[derive(Debug, Clone)]
pub struct Source {
    pub density: RadialFunction,
    /// `‖f‖₁` by grid quadrature.
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct Potential {
    values: RadialFunction,
    source: Option<Source>,
    provenance: Provenance,
}

impl Potential {
    /// A potential given only by its node values.
    pub fn direct(values: RadialFunction) -> Self {
        Self { values, source: None, provenance: Provenance::Direct }
    }

    pub fn values(&self) -> &RadialFunction {
        &self.values
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.values.grid()
    }

    pub fn source(&self) -> Option<&Source> {
        self.source.as_ref()
    }

    pub fn source_mass(&self) -> Option<f64> {
        self.source.as_ref().map(|s| s.mass)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn sup(&self) -> f64 {
        self.values.max_abs()
    }
}

/// `V_Z(r) = Z A_α (1 + r²)^{-(d-α)/2}` with source `(Z A_α / κ)(1 + r²)^{-(d+α)/2}`,
/// whose total mass is exactly `Z`.
pub fn potential_vz(z: f64, params: &KernelParams, grid: &Arc<RadialGrid>) -> Result<Potential> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Parameter(format!("charge Z = {z} must be positive")));
    }
    check_dimension(params, grid)?;
    let d = params.dim();
    let alpha = params.alpha;
    let amp = z * params.riesz_constant();
    let values = RadialFunction::from_fn(grid.clone(), |r| amp * (1.0 + r * r).powf(-(d - alpha) / 2.0))?;
    let source_amp = amp / params.kappa();
    let density = RadialFunction::from_fn(grid.clone(), |r| source_amp * (1.0 + r * r).powf(-(d + alpha) / 2.0))?;
    let mass = density.integral();
    Ok(Potential { values, source: Some(Source { density, mass }), provenance: Provenance::ClosedForm })
}

/// `V = I_α ∗ f`.
pub fn potential_from_source(f: &RadialFunction, kernel: &KernelMatrix) -> Result<Potential> {
    let values = riesz_apply(kernel, f)?;
    let mass = f.integral();
    Ok(Potential {
        values,
        source: Some(Source { density: f.clone(), mass }),
        provenance: Provenance::SourceDefined,
    })
}

/// `height (1 - (r/R₀)²)³` on `[0, R₀]`, zero outside.
pub fn bump_potential(height: f64, radius: f64, grid: &Arc<RadialGrid>) -> Result<Potential> {
    if !(height > 0.0 && height.is_finite()) {
        return Err(Error::Parameter(format!("bump height {height} must be positive")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Parameter(format!("bump radius {radius} must be positive")));
    }
    let values = RadialFunction::from_fn(grid.clone(), |r| {
        let x = r / radius;
        if x < 1.0 {
            height * (1.0 - x * x).powi(3)
        } else {
            0.0
        }
    })?;
    Ok(Potential::direct(values))
}

/// `(1 - r²)²` on the unit ball, normalised to unit mass.
pub fn unit_hat(grid: &Arc<RadialGrid>) -> Result<RadialFunction> {
    let d = grid.d() as f64;
    let mass = crate::params::sphere_area(grid.d()) * (1.0 / d - 2.0 / (d + 2.0) + 1.0 / (d + 4.0));
    RadialFunction::from_fn(grid.clone(), |r| if r < 1.0 { (1.0 - r * r).powi(2) / mass } else { 0.0 })
}

fn check_dimension(params: &KernelParams, grid: &RadialGrid) -> Result<()> {
    if params.d != grid.d() {
        return Err(Error::Parameter(format!("grid built for d = {} but parameters have d = {}", grid.d(), params.d)));
    }
    Ok(())
}

/// Columns `r, V` and optionally `f`, with a header row.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    pub r: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub f: Option<Vec<f64>>,
}

impl PotentialTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Input(format!("potential CSV: {e}")))?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (ir, iv, jf) = (col("r"), col("V"), col("f"));
        let Some(ir) = ir.filter(|_| iv.is_some() || jf.is_some()) else {
            return Err(Error::Input(format!("potential CSV needs column r and one of V, f; found {:?}", headers)));
        };
        let (mut r, mut v, mut f) = (Vec::new(), Vec::new(), Vec::new());
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Input(format!("potential CSV: {e}")))?;
            let field = |k: usize| -> Result<f64> {
                let raw = record.get(k).unwrap_or("");
                raw.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Input(format!("potential CSV row {}: bad number {raw:?}", line + 2)))
            };
            r.push(field(ir)?);
            if let Some(k) = iv {
                v.push(field(k)?);
            }
            if let Some(k) = jf {
                f.push(field(k)?);
            }
        }
        if r.len() < 2 {
            return Err(Error::Input("potential CSV needs at least two rows".into()));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("potential CSV radii must be nonnegative and strictly increasing".into()));
        }
        Ok(Self { r, v: iv.map(|_| v), f: jf.map(|_| f) })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    /// Linear interpolation of a column onto the grid; constant below the
    /// first radius, zero beyond the last.
    fn resample(&self, column: &[f64], grid: &Arc<RadialGrid>) -> Result<RadialFunction> {
        let (r, last) = (&self.r, self.r.len() - 1);
        RadialFunction::from_fn(grid.clone(), |x| {
            if x <= r[0] {
                return column[0];
            }
            if x > r[last] {
                return 0.0;
            }
            let k = r.partition_point(|&s| s < x);
            let t = (x - r[k - 1]) / (r[k] - r[k - 1]);
            column[k - 1] * (1.0 - t) + column[k] * t
        })
    }

    /// Potential on `grid`. With an `f` column the values are regenerated
    /// from the source, and the file's `V` must agree with them to
    /// [`CSV_CONSISTENCY`] on `r <= R_max/10`.
    pub fn to_potential(&self, grid: &Arc<RadialGrid>, kernel: Option<&KernelMatrix>) -> Result<Potential> {
        let Some(f) = &self.f else {
            let v = self.v.as_ref().expect("table has V or f");
            return Ok(Potential::direct(self.resample(v, grid)?));
        };
        let kernel = kernel.ok_or_else(|| Error::Input("a source column needs the kernel matrix".into()))?;
        let potential = potential_from_source(&self.resample(f, grid)?, kernel)?;
        let Some(v) = &self.v else {
            return Ok(potential);
        };
        let given = self.resample(v, grid)?;
        let limit = grid.r_max() / 10.0;
        let scale = potential.sup().max(given.max_abs());
        let worst = grid
            .nodes()
            .iter()
            .zip(given.values().iter().zip(potential.values().values()))
            .filter(|(r, _)| **r <= limit)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max);
        if worst > CSV_CONSISTENCY * scale {
            return Err(Error::Input(format!(
                "V column disagrees with the potential of the f column: {:.3e} relative",
                worst / scale
            )));
        }
        Ok(potential)
    }
}
