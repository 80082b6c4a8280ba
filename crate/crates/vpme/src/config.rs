//! Run configuration: a TOML document with `[datum]`, `[class]`, `[grid]` and
//! `[solver]` sections plus top-level `mode`, `output_dir` and `seed`.
//!
//! ```toml
//! mode = "exploratory"
//!
//! [datum]
//! family = "gaussian-cosine"
//! amplitude = 0.05
//! sigma = 1.0
//!
//! [class]
//! a = 2.0
//! a1 = 2.62
//! a2 = 0.1
//! alpha = 0.5
//! ```

use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::{Table, Value};
use vpme_core::{AsymptoticDatum, ClassParameters, Mode, SchemeConfig, SpatialGrid, TimeGrid, VelocityGrid};

use crate::error::{CliError, Result};
use crate::io;

/// `(16 a1 / a) e^(-a T)` the horizon may leave behind when `T` is absent.
pub const HORIZON_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Theorem,
    Exploratory,
}

impl From<RunMode> for Mode {
    fn from(m: RunMode) -> Mode {
        match m {
            RunMode::Theorem => Mode::Theorem,
            RunMode::Exploratory => Mode::Exploratory,
        }
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "theorem" => Ok(RunMode::Theorem),
            "exploratory" => Ok(RunMode::Exploratory),
            other => Err(format!("expected \"theorem\" or \"exploratory\", got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DatumSpec {
    GaussianCosine { amplitude: f64, sigma: f64 },
    /// CSV grid with header `x,v,f`; relative paths resolve against the
    /// config file's directory.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassSpec {
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    /// Defaults to the smallest admissible start time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub nx: usize,
    pub nv: usize,
    /// Time nodes, both endpoints included.
    pub nt: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vmax: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 256,
            nv: 512,
            nt: 200,
            vmax: None,
            t_end: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSpec {
    pub newton_tol: f64,
    pub newton_max_iterations: usize,
    pub ode_substeps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point_tol: Option<f64>,
    pub max_iterations: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            newton_max_iterations: 50,
            ode_substeps: 4,
            fixed_point_tol: None,
            max_iterations: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: RunMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub datum: DatumSpec,
    pub class: ClassSpec,
    pub grid: GridSpec,
    pub solver: SolverSpec,
}

struct Reader<'a> {
    section: &'static str,
    table: &'a Table,
}

impl<'a> Reader<'a> {
    fn key(&self, key: &str) -> String {
        if self.section.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.section, key)
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::config(self.key(k), "unknown key")),
            None => Ok(()),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(CliError::config(
                self.key(key),
                format!("expected a number, found {}", other.type_str()),
            )),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(Value::Integer(_)) => Err(CliError::config(self.key(key), "must be non-negative")),
            Some(other) => Err(CliError::config(
                self.key(key),
                format!("expected an integer, found {}", other.type_str()),
            )),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(CliError::config(
                self.key(key),
                format!("expected a string, found {}", other.type_str()),
            )),
        }
    }

    fn required<T>(&self, key: &str, value: Option<T>) -> Result<T> {
        value.ok_or_else(|| CliError::config(self.key(key), "missing mandatory key"))
    }

    fn section(&self, name: &'static str) -> Result<Option<Reader<'a>>> {
        match self.table.get(name) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Reader { section: name, table: t })),
            Some(other) => Err(CliError::config(name, format!("expected a table, found {}", other.type_str()))),
        }
    }
}

fn positive(key: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CliError::config(key, format!("must be positive, got {value}")))
    }
}

fn at_least(key: &str, value: usize, min: usize) -> Result<usize> {
    if value >= min {
        Ok(value)
    } else {
        Err(CliError::config(key, format!("must be at least {min}, got {value}")))
    }
}

/// Parse and validate a configuration document, applying defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        CliError::config("<document>", e.message().to_string())
    })?;
    let root = Reader { section: "", table: &table };
    root.only(&["mode", "output_dir", "seed", "datum", "class", "grid", "solver"])?;

    let mode = match root.string("mode")? {
        None => RunMode::Theorem,
        Some(s) => s.parse().map_err(|e: String| CliError::config("mode", e))?,
    };
    let output_dir = root.string("output_dir")?.map(PathBuf::from);
    let seed = root.count("seed")?.unwrap_or(0) as u64;

    let d = root
        .section("datum")?
        .ok_or_else(|| CliError::config("datum", "missing mandatory section"))?;
    let family = d.required("family", d.string("family")?)?;
    let datum = match family {
        "gaussian-cosine" => {
            d.only(&["family", "amplitude", "sigma"])?;
            DatumSpec::GaussianCosine {
                amplitude: positive("datum.amplitude", d.required("amplitude", d.float("amplitude")?)?)?,
                sigma: positive("datum.sigma", d.required("sigma", d.float("sigma")?)?)?,
            }
        }
        "tabulated" => {
            d.only(&["family", "path"])?;
            DatumSpec::Tabulated {
                path: PathBuf::from(d.required("path", d.string("path")?)?),
            }
        }
        other => {
            return Err(CliError::config(
                "datum.family",
                format!("expected \"gaussian-cosine\" or \"tabulated\", got {other:?}"),
            ))
        }
    };

    let c = root
        .section("class")?
        .ok_or_else(|| CliError::config("class", "missing mandatory section"))?;
    c.only(&["a", "a1", "a2", "alpha", "t0"])?;
    let class = ClassSpec {
        a: c.required("a", c.float("a")?)?,
        a1: c.required("a1", c.float("a1")?)?,
        a2: c.required("a2", c.float("a2")?)?,
        alpha: c.required("alpha", c.float("alpha")?)?,
        t0: c.float("t0")?,
    };

    let mut grid = GridSpec::default();
    if let Some(g) = root.section("grid")? {
        g.only(&["nx", "nv", "nt", "vmax", "T"])?;
        grid.nx = g.count("nx")?.unwrap_or(grid.nx);
        grid.nv = g.count("nv")?.unwrap_or(grid.nv);
        grid.nt = g.count("nt")?.unwrap_or(grid.nt);
        grid.vmax = g.float("vmax")?;
        grid.t_end = g.float("T")?;
    }

    let mut solver = SolverSpec::default();
    if let Some(s) = root.section("solver")? {
        s.only(&["newton_tol", "newton_max_iterations", "ode_substeps", "fixed_point_tol", "max_iterations"])?;
        solver.newton_tol = s.float("newton_tol")?.unwrap_or(solver.newton_tol);
        solver.newton_max_iterations = s.count("newton_max_iterations")?.unwrap_or(solver.newton_max_iterations);
        solver.ode_substeps = s.count("ode_substeps")?.unwrap_or(solver.ode_substeps);
        solver.fixed_point_tol = s.float("fixed_point_tol")?;
        solver.max_iterations = s.count("max_iterations")?.unwrap_or(solver.max_iterations);
    }

    let cfg = RunConfig {
        mode,
        output_dir,
        seed,
        datum,
        class,
        grid,
        solver,
    };
    cfg.check()?;
    Ok(cfg)
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

impl RunConfig {
    fn check(&self) -> Result<()> {
        let class = self.class_parameters()?;
        if self.grid.nx < SpatialGrid::MIN_NODES || !self.grid.nx.is_multiple_of(2) {
            return Err(CliError::config(
                "grid.nx",
                format!("must be even and at least {}, got {}", SpatialGrid::MIN_NODES, self.grid.nx),
            ));
        }
        at_least("grid.nv", self.grid.nv, 2)?;
        at_least("grid.nt", self.grid.nt, 2)?;
        if let Some(v) = self.grid.vmax {
            positive("grid.vmax", v)?;
        }
        if let Some(t) = self.grid.t_end {
            if !(t.is_finite() && t > class.t0) {
                return Err(CliError::config(
                    "grid.T",
                    format!("T = {t} must exceed t0 = {}", class.t0),
                ));
            }
        }
        positive("solver.newton_tol", self.solver.newton_tol)?;
        at_least("solver.newton_max_iterations", self.solver.newton_max_iterations, 1)?;
        at_least("solver.ode_substeps", self.solver.ode_substeps, 1)?;
        at_least("solver.max_iterations", self.solver.max_iterations, 1)?;
        if let Some(t) = self.solver.fixed_point_tol {
            positive("solver.fixed_point_tol", t)?;
        }
        Ok(())
    }

    /// Class parameters with `t0` resolved.
    pub fn class_parameters(&self) -> Result<ClassParameters> {
        let c = self.class;
        let mut class = ClassParameters::new(c.a, c.a1, c.a2, c.alpha, c.t0.unwrap_or(0.0)).map_err(|e| match e {
            vpme_core::Error::Parameter { name, reason } => CliError::config(format!("class.{name}"), reason),
            other => other.into(),
        })?;
        if c.t0.is_none() {
            class.t0 = class.min_t0();
        }
        Ok(class)
    }

    /// Build the datum; tabulated paths resolve against `base`.
    pub fn datum(&self, base: &Path) -> Result<AsymptoticDatum> {
        let class = self.class_parameters()?;
        match &self.datum {
            DatumSpec::GaussianCosine { amplitude, sigma } => {
                Ok(AsymptoticDatum::gaussian_cosine(*amplitude, *sigma, class)?)
            }
            DatumSpec::Tabulated { path } => {
                let grid = io::read_tabulated(&base.join(path))?;
                Ok(AsymptoticDatum::tabulated(grid, class))
            }
        }
    }

    /// `T` as configured, or the smallest time with
    /// `(16 a1 / a) e^(-a T) <= HORIZON_TOL`.
    pub fn horizon(&self) -> Result<f64> {
        let class = self.class_parameters()?;
        Ok(self.grid.t_end.unwrap_or_else(|| class.horizon(HORIZON_TOL)))
    }

    pub fn scheme_config(&self, datum: &AsymptoticDatum, mode: RunMode) -> Result<SchemeConfig> {
        let class = datum.class;
        let t_end = self.horizon()?;
        if t_end <= class.t0 {
            return Err(CliError::config("grid.T", format!("T = {t_end} must exceed t0 = {}", class.t0)));
        }
        let vmax = self.grid.vmax.unwrap_or_else(|| VelocityGrid::default_vmax(datum));
        let mut cfg = SchemeConfig::new(
            SpatialGrid::new(self.grid.nx)?,
            TimeGrid::new(class.t0, t_end, self.grid.nt)?,
            VelocityGrid::new(vmax, self.grid.nv)?,
        );
        cfg.newton.tol = self.solver.newton_tol;
        cfg.newton.max_iterations = self.solver.newton_max_iterations;
        cfg.ode_substeps = self.solver.ode_substeps;
        cfg.fixed_point_tol = self.solver.fixed_point_tol;
        cfg.max_iterations = self.solver.max_iterations;
        cfg.mode = mode.into();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
