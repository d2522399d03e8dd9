//! Experiment configuration: a TOML file with one table per module, plus
//! command-line and `HVLAB_*` environment overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hvlab_core::grid::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::scenario::Scenario;

/// Prefix of environment variables that override configuration keys.
pub const ENV_PREFIX: &str = "HVLAB_";

/// Names accepted as sweep axes and as `HVLAB_<NAME>` overrides.
pub const AXES: [&str; 13] = ["gamma", "a", "b", "p", "q", "epsilon", "r_max", "z_max", "nr", "nz", "n", "dim", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub suite: SuiteSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: "thm16".into(),
            seed: 0,
            output_dir: PathBuf::from("hvlab-out"),
            problem: ProblemSection::default(),
            grid: GridSection::default(),
            solver: SolverSection::default(),
            suite: SuiteSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Problem coefficients. Unset entries fall back to the scenario's preset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    /// Exponent of the power weight `(1+x_N)^γ`.
    pub gamma: Option<f64>,
    /// Bubble scale for the closed-form Pohozaev check.
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub r_max: f64,
    pub z_max: f64,
    pub nr: usize,
    pub nz: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { dim: 3, r_max: 10.0, z_max: 10.0, nr: 128, nz: 128 }
    }
}

impl GridSection {
    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.dim, self.r_max, self.z_max, self.nr, self.nz)
    }
}

/// Solver and minimizer settings; unset entries keep the module defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub grad_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub step: Option<f64>,
    pub multistart: Option<usize>,
    pub path_nodes: Option<usize>,
    pub reparam_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub count: usize,
    /// Inequality exponent: `p` for Hardy, `q` for the trace chain.
    pub exponent: Option<f64>,
    /// Base `ζ` of the Moser ladder.
    pub zeta: f64,
    pub ladder_rungs: usize,
    /// Calibrate the critical trace constant by minimizing on the suite grid.
    pub calibrate: bool,
}

impl Default for SuiteSection {
    fn default() -> Self {
        SuiteSection { count: 100, exponent: None, zeta: 2.0, ladder_rungs: 6, calibrate: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub workers: usize,
    pub axes: BTreeMap<String, Vec<f64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { workers: 1, axes: BTreeMap::new() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(e) })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.to_path_buf(), source: e })?;
        Self::from_toml(&text, path)
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        self.scenario.parse()
    }

    /// Sets one named axis. Integer axes reject fractional values.
    pub fn set_axis(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let int = |v: f64| -> Result<usize, ConfigError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(ConfigError::NonIntegerAxis { axis: name.to_string(), value: v })
            }
        };
        match name {
            "gamma" => self.problem.gamma = Some(value),
            "a" => self.problem.a = Some(value),
            "b" => self.problem.b = Some(value),
            "p" => self.problem.p = Some(value),
            "q" => self.problem.q = Some(value),
            "epsilon" => self.problem.epsilon = Some(value),
            "r_max" | "R" => self.grid.r_max = value,
            "z_max" | "H" => self.grid.z_max = value,
            "nr" => self.grid.nr = int(value)?,
            "nz" => self.grid.nz = int(value)?,
            "n" => {
                self.grid.nr = int(value)?;
                self.grid.nz = self.grid.nr;
            }
            "dim" | "N" => self.grid.dim = int(value)?,
            "seed" => self.seed = int(value)? as u64,
            _ => return Err(ConfigError::UnknownAxis(name.to_string())),
        }
        Ok(())
    }

    /// Applies `HVLAB_<AXIS>` (upper-case axis name) and `HVLAB_SCENARIO`
    /// overrides. Variables with other suffixes are ignored; the flag-level
    /// variables (`HVLAB_SEED`, `HVLAB_OUT`, ...) are read by the CLI parser.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        vars.sort();
        for (key, value) in vars {
            let name = key[ENV_PREFIX.len()..].to_ascii_lowercase();
            if name == "scenario" {
                self.scenario = value;
                continue;
            }
            if name == "seed" || !AXES.contains(&name.as_str()) {
                continue;
            }
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{key}={value} is not a number")))?;
            self.set_axis(&name, v)?;
        }
        Ok(())
    }
}

/// Parses `name=v1,v2,...`.
pub fn parse_axis(spec: &str) -> Result<(String, Vec<f64>), ConfigError> {
    let (name, values) = spec.split_once('=').ok_or_else(|| ConfigError::AxisSyntax(spec.to_string()))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(ConfigError::AxisSyntax(spec.to_string()));
    }
    let values = values
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| ConfigError::AxisSyntax(spec.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((name.to_string(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_parse() {
        let text = r#"
            scenario = "thm17"
            seed = 7
            [problem]
            q = 3.5
            [grid]
            nr = 64
            nz = 32
            [sweep.axes]
            gamma = [1.5, 2.0]
        "#;
        let cfg = ExperimentConfig::from_toml(text, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.scenario, "thm17");
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.problem.q, Some(3.5));
        assert_eq!(cfg.problem.a, None);
        assert_eq!((cfg.grid.nr, cfg.grid.nz, cfg.grid.r_max), (64, 32, 10.0));
        assert_eq!(cfg.sweep.axes["gamma"], vec![1.5, 2.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[grid]\nnx = 3\n", Path::new("x.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
    }

    #[test]
    fn axes_set_fields() {
        let mut cfg = ExperimentConfig::default();
        cfg.set_axis("n", 64.0).unwrap();
        cfg.set_axis("R", 10.0).unwrap();
        cfg.set_axis("q", 3.9).unwrap();
        assert_eq!((cfg.grid.nr, cfg.grid.nz, cfg.grid.r_max), (64, 64, 10.0));
        assert_eq!(cfg.problem.q, Some(3.9));
        assert!(matches!(cfg.set_axis("nr", 2.5), Err(ConfigError::NonIntegerAxis { .. })));
        assert!(matches!(cfg.set_axis("omega", 1.0), Err(ConfigError::UnknownAxis(_))));
    }

    #[test]
    fn env_overrides() {
        let mut cfg = ExperimentConfig::default();
        let vars = [
            ("HVLAB_Q".to_string(), "3.25".to_string()),
            ("HVLAB_NR".to_string(), "48".to_string()),
            ("HVLAB_SCENARIO".to_string(), "thm18".to_string()),
            ("HVLAB_OUT".to_string(), "ignored".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ];
        cfg.apply_env(vars).unwrap();
        assert_eq!(cfg.problem.q, Some(3.25));
        assert_eq!(cfg.grid.nr, 48);
        assert_eq!(cfg.scenario, "thm18");
        let bad = [("HVLAB_GAMMA".to_string(), "three".to_string())];
        assert!(cfg.apply_env(bad).is_err());
    }

    #[test]
    fn axis_syntax() {
        assert_eq!(parse_axis("q=3.9, 3.99,4").unwrap(), ("q".to_string(), vec![3.9, 3.99, 4.0]));
        assert_eq!(parse_axis("q=").unwrap().1, Vec::<f64>::new());
        assert!(parse_axis("q").is_err());
        assert!(parse_axis("q=x").is_err());
    }
}
