//! Run configuration: a TOML file with one table per concern, plus the
//! JSON manifest form that every run writes next to its outputs.

use crate::CliError;
use itovolterra::criteria::{ThetaSchedule, Tolerances};
use itovolterra::fixtures::{fixture, Fixture, DEFAULT_SEED};
use itovolterra::stochastic::{generate_ensemble, BrownianEnsemble};
use itovolterra::{
    make_additive, make_custom, make_exponential, make_multiplicative, BoundedFunction, Grid,
    Kernel,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    /// Built-in fixture name; when set, the family fields are ignored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    /// `additive`, `multiplicative`, `exponential` or `custom`.
    pub family: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_inf: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_sharp: Option<String>,
    /// Derivative of `h_sharp`; enables the derivative-based checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_sharp_d1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    pub lambda: f64,
    /// Row-major entries of a custom kernel in `t` and `s`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d1: Option<Vec<String>>,
    pub q: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_q: Option<f64>,
    pub theta: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            example: None,
            family: "exponential".into(),
            dim: 1,
            h_inf: None,
            h_sharp: None,
            h_sharp_d1: None,
            sigma: Some("1".into()),
            lambda: 1.0,
            entries: Vec::new(),
            limit: None,
            d1: None,
            q: 0.0,
            c_q: None,
            theta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FSpec {
    /// Row-major entries in `s`, shape kernel dim x Brownian dim. Empty
    /// means every entry is 1.
    pub entries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub dt: f64,
    pub t_max: f64,
    /// First eval time of the geometric ladder.
    pub t0: f64,
    /// Ladder ratio.
    pub rho: f64,
    /// Explicit eval times; replaces the ladder.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_times: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            dt: 1.0 / 16.0,
            t_max: 1000.0,
            t0: 2.0,
            rho: 1.5,
            eval_times: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub seed: u64,
    pub paths: usize,
    pub dim: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            seed: DEFAULT_SEED,
            paths: 200,
            dim: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl OutputSpec {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub f: FSpec,
    pub grid: GridSpec,
    pub ensemble: EnsembleSpec,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
}

/// Everything a command needs, built from a validated config.
pub struct Resolved {
    pub kernel: Kernel,
    pub fixture: Option<Fixture>,
    pub f: BoundedFunction,
    pub grid: Grid,
    pub schedule: ThetaSchedule,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn required<'a>(field: &'a Option<String>, name: &str, family: &str) -> Result<&'a str, CliError> {
    field
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("kernel.{name} is required for the {family} family")))
}

fn parse(source: &str) -> Result<BoundedFunction, CliError> {
    BoundedFunction::parse(source).map_err(|e| CliError::Config(format!("`{source}`: {e}")))
}

impl RunConfig {
    /// Reads a TOML config, or the `config` object of a JSON manifest.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|x| x == "json") {
            let mut v: serde_json::Value = serde_json::from_str(&text).map_err(config_err)?;
            if let Some(inner) = v.get_mut("config") {
                v = inner.take();
            }
            serde_json::from_value(v).map_err(config_err)
        } else {
            toml::from_str(&text).map_err(config_err)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = &self.grid;
        let grid = Grid::new(g.dt, g.t_max).map_err(config_err)?;
        match &g.eval_times {
            Some(ts) => grid.with_eval_times(ts).map_err(config_err),
            None => {
                if !(g.t0 > 0.0) || !(g.rho > 1.0) {
                    return Err(CliError::Config(format!(
                        "eval ladder needs t0 > 0 and rho > 1, got t0 = {}, rho = {}",
                        g.t0, g.rho
                    )));
                }
                Ok(grid.with_ladder(g.t0, g.rho))
            }
        }
    }

    pub fn ensemble(&self, g: &Grid) -> Result<BrownianEnsemble, CliError> {
        let e = &self.ensemble;
        generate_ensemble(e.seed, e.paths, e.dim, g).map_err(config_err)
    }

    pub fn schedule(&self) -> Result<ThetaSchedule, CliError> {
        let k = &self.kernel;
        ThetaSchedule::new(k.q, k.c_q, k.theta).map_err(config_err)
    }

    fn kernel(&self) -> Result<(Kernel, Option<Fixture>), CliError> {
        let k = &self.kernel;
        if let Some(name) = &k.example {
            let fx = fixture(name).map_err(config_err)?;
            return Ok((fx.kernel.clone(), Some(fx)));
        }
        let fam = k.family.as_str();
        let kernel = match fam {
            "additive" | "multiplicative" => {
                let h_inf = parse(required(&k.h_inf, "h_inf", fam)?)?;
                let mut h_sharp = parse(required(&k.h_sharp, "h_sharp", fam)?)?;
                if let Some(d) = &k.h_sharp_d1 {
                    h_sharp = h_sharp.with_derivative(parse(d)?);
                }
                if fam == "additive" {
                    make_additive(h_inf, h_sharp)
                } else {
                    make_multiplicative(h_inf, h_sharp)
                }
            }
            "exponential" => make_exponential(parse(required(&k.sigma, "sigma", fam)?)?, k.lambda),
            "custom" => {
                let entries: Vec<&str> = k.entries.iter().map(String::as_str).collect();
                let limit: Option<Vec<&str>> =
                    k.limit.as_ref().map(|v| v.iter().map(String::as_str).collect());
                let d1: Option<Vec<&str>> =
                    k.d1.as_ref().map(|v| v.iter().map(String::as_str).collect());
                make_custom(k.dim, &entries, limit.as_deref(), d1.as_deref())
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown kernel family `{other}`; expected additive, multiplicative, exponential or custom"
                )))
            }
        }
        .map_err(config_err)?;
        Ok((kernel, None))
    }

    fn f(&self, rows: usize) -> Result<BoundedFunction, CliError> {
        let cols = self.ensemble.dim;
        if self.f.entries.is_empty() {
            if rows == 1 && cols == 1 {
                return Ok(BoundedFunction::constant(1.0));
            }
            let ones = vec!["1"; rows * cols];
            return BoundedFunction::from_exprs(rows, cols, &ones).map_err(config_err);
        }
        let src: Vec<&str> = self.f.entries.iter().map(String::as_str).collect();
        BoundedFunction::from_exprs(rows, cols, &src).map_err(config_err)
    }

    /// Parses every expression and checks the invariants: grid, theta
    /// against q, shapes, output formats.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(CliError::Config(format!("unknown output format `{f}`")));
            }
        }
        if self.ensemble.paths == 0 || self.ensemble.dim == 0 {
            return Err(CliError::Config("ensemble needs paths >= 1 and dim >= 1".into()));
        }
        let grid = self.grid()?;
        let schedule = self.schedule()?;
        let (kernel, fixture) = self.kernel()?;
        let f = self.f(kernel.dim())?;
        Ok(Resolved {
            kernel,
            fixture,
            f,
            grid,
            schedule,
        })
    }
}
