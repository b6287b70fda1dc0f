//! Run configuration: a `key = value` file overlaid by command line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use riesz_tf::barriers::Family;
use riesz_tf::solver::{InitialGuess, Method};
use riesz_tf::{GridLayout, Mode, SolveOptions};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "d", "alpha", "q", "potential", "inner", "per_decade", "r_max", "damping", "max_iter", "tol", "node_tol", "mode",
    "init", "method", "verify", "out", "barriers", "window", "radii",
];

type Res<T> = std::result::Result<T, CliError>;

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("{key} = `{value}`: {what}"))
}

/// Raw key/value pairs; later layers replace earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse_file(path: &Path) -> Res<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse_str(text: &str) -> Res<Self> {
        let mut out = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let v = v.trim();
            let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
            out.set(k.trim(), v)?;
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Res<()> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown key `{key}` (known: {})", KEYS.join(", "))));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    pub fn overlay(&mut self, other: &RawConfig) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// `1.5`, `5/3`.
pub fn parse_number(key: &str, s: &str) -> Res<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad(key, s, "not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| bad(key, s, "not a number"))?;
            a / b
        }
        None => s.parse().map_err(|_| bad(key, s, "not a number"))?,
    };
    if !v.is_finite() {
        return Err(bad(key, s, "not finite"));
    }
    Ok(v)
}

pub fn parse_list(key: &str, s: &str) -> Res<Vec<f64>> {
    let items: Vec<f64> = s.split(',').filter(|x| !x.trim().is_empty()).map(|x| parse_number(key, x)).collect::<Res<_>>()?;
    if items.is_empty() {
        return Err(bad(key, s, "empty list"));
    }
    Ok(items)
}

fn parse_usize(key: &str, s: &str) -> Res<usize> {
    s.trim().parse().map_err(|_| bad(key, s, "not a nonnegative integer"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Vz(f64),
    Bump { height: f64, radius: f64 },
    /// CSV with `r, f` (and optionally `V`).
    Source(PathBuf),
    /// CSV with `r, V` (or `r, V, f`).
    File(PathBuf),
}

impl PotentialSpec {
    pub fn parse(s: &str) -> Res<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| {
            bad("potential", s, "expected vz:Z, bump:HEIGHT,R0, source:FILE or file:FILE")
        })?;
        match kind.trim() {
            "vz" => {
                let z = parse_number("potential", arg)?;
                if z <= 0.0 {
                    return Err(bad("potential", s, "Z must be positive"));
                }
                Ok(PotentialSpec::Vz(z))
            }
            "bump" => {
                let v = parse_list("potential", arg)?;
                if v.len() != 2 {
                    return Err(bad("potential", s, "bump takes HEIGHT,R0"));
                }
                Ok(PotentialSpec::Bump { height: v[0], radius: v[1] })
            }
            "source" => Ok(PotentialSpec::Source(PathBuf::from(arg.trim()))),
            "file" => Ok(PotentialSpec::File(PathBuf::from(arg.trim()))),
            other => Err(bad("potential", s, &format!("unknown kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PotentialSpec::Vz(z) => write!(f, "vz:{z}"),
            PotentialSpec::Bump { height, radius } => write!(f, "bump:{height},{radius}"),
            PotentialSpec::Source(p) => write!(f, "source:{}", p.display()),
            PotentialSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Verify {
    pub regime: bool,
    pub mass: bool,
    pub sharp_limit: bool,
    pub ordering: bool,
}

impl Verify {
    pub fn parse(s: &str) -> Res<Self> {
        let mut v = Verify::default();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            match item {
                "none" => {}
                "all" => v = Verify { regime: true, mass: true, sharp_limit: true, ordering: true },
                "regime" => v.regime = true,
                "mass" => v.mass = true,
                "sharp-limit" | "sharp_limit" | "sharp" => v.sharp_limit = true,
                "ordering" => v.ordering = true,
                other => {
                    return Err(bad("verify", s, &format!("unknown check `{other}` (regime, mass, sharp-limit, ordering, all, none)")))
                }
            }
        }
        Ok(v)
    }

    fn default_checks() -> Self {
        Verify { regime: true, mass: true, sharp_limit: true, ordering: false }
    }
}

/// `R_max`: fixed, or chosen per regime from the tail rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RMax {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: usize,
    pub alphas: Vec<f64>,
    pub qs: Vec<f64>,
    pub potential: PotentialSpec,
    pub inner: usize,
    pub per_decade: usize,
    pub r_max: RMax,
    pub options: SolveOptions,
    pub verify: Verify,
    pub out: PathBuf,
    pub barriers: Option<Vec<Family>>,
    pub window: (f64, f64),
    pub radii: usize,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Res<Self> {
        let get = |k: &str| raw.get(k);
        let d = get("d").map(|s| parse_usize("d", s)).transpose()?.unwrap_or(2);
        let alphas = get("alpha").map(|s| parse_list("alpha", s)).transpose()?.unwrap_or_else(|| vec![1.0]);
        let qs = get("q").map(|s| parse_list("q", s)).transpose()?.unwrap_or_default();
        let potential = PotentialSpec::parse(get("potential").unwrap_or("vz:1"))?;
        let tail = GridLayout::tail();
        let inner = get("inner").map(|s| parse_usize("inner", s)).transpose()?.unwrap_or(tail.inner);
        let per_decade = get("per_decade").map(|s| parse_usize("per_decade", s)).transpose()?.unwrap_or(tail.per_decade);
        let r_max = match get("r_max").map(str::trim) {
            None | Some("auto") => RMax::Auto,
            Some(s) => RMax::Fixed(parse_number("r_max", s)?),
        };
        let mut options = SolveOptions::default();
        if let Some(s) = get("damping") {
            options.damping = parse_number("damping", s)?;
        }
        if let Some(s) = get("max_iter") {
            options.max_iter = parse_usize("max_iter", s)?;
        }
        if let Some(s) = get("tol") {
            options.tol = parse_number("tol", s)?;
        }
        if let Some(s) = get("node_tol") {
            options.node_tol = parse_number("node_tol", s)?;
        }
        if let Some(s) = get("mode") {
            options.mode = match s.trim() {
                "free" => Mode::Free,
                "nonneg" | "nonnegative" => Mode::Nonnegative,
                _ => return Err(bad("mode", s, "expected free or nonneg")),
            };
        }
        if let Some(s) = get("init") {
            options.init = match s.trim() {
                "zero" => InitialGuess::Zero,
                "tf" | "thomas-fermi" | "local" => InitialGuess::ThomasFermiLocal,
                _ => return Err(bad("init", s, "expected zero or tf")),
            };
        }
        if let Some(s) = get("method") {
            options.method = match s.trim() {
                "newton" => Method::Newton,
                "picard" => Method::Picard,
                _ => return Err(bad("method", s, "expected newton or picard")),
            };
        }
        options.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let verify = get("verify").map(Verify::parse).transpose()?.unwrap_or_else(Verify::default_checks);
        let out = PathBuf::from(get("out").unwrap_or("riesz-tf-out"));
        let barriers = get("barriers")
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(|x| x.parse::<Family>().map_err(|e| CliError::Config(e.to_string())))
                    .collect::<Res<Vec<_>>>()
            })
            .transpose()?;
        let window = match get("window") {
            Some(s) => {
                let w = parse_list("window", s)?;
                if w.len() != 2 {
                    return Err(bad("window", s, "expected LO,HI"));
                }
                (w[0], w[1])
            }
            None => (1e2, 1e4),
        };
        let radii = get("radii").map(|s| parse_usize("radii", s)).transpose()?.unwrap_or(riesz_tf::barriers::DEFAULT_RADII);
        Ok(Self { d, alphas, qs, potential, inner, per_decade, r_max, options, verify, out, barriers, window, radii })
    }

    pub fn alpha(&self) -> Res<f64> {
        match self.alphas.as_slice() {
            [a] => Ok(*a),
            _ => Err(CliError::Config("this command takes a single alpha".into())),
        }
    }

    pub fn q(&self) -> Res<f64> {
        match self.qs.as_slice() {
            [q] => Ok(*q),
            [] => Err(CliError::Config("q is required".into())),
            _ => Err(CliError::Config("solve takes a single q; use sweep for lists".into())),
        }
    }
}
