//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nlrf_core::experiments::{Experiment, SweepConfig};
use nlrf_core::lattice::Distribution;
use nlrf_core::minimize::{InitPolicy, Method};
use nlrf_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Value { key: String, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("no experiment given")]
    MissingExperiment,
}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Value { key, .. } | ConfigError::UnknownKey(key) => Some(key),
            ConfigError::MissingExperiment => Some("experiment"),
            _ => None,
        }
    }
}

fn bad(key: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub sweep: SweepConfig,
    pub out: PathBuf,
    pub overwrite: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            sweep: SweepConfig::default(),
            out: PathBuf::from("."),
            overwrite: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| bad(key, format!("{value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse(key, t))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, "list must be nonempty"));
    }
    Ok(items)
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match value.trim() {
        "auto" | "none" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        v => Err(bad(key, format!("{v:?} is not a boolean"))),
    }
}

/// `random:<amplitude>` or `constant:<value>`.
fn parse_init(key: &str, value: &str) -> Result<InitPolicy, ConfigError> {
    let (kind, arg) = value.trim().split_once(':').unwrap_or((value.trim(), "1"));
    let x: f64 = parse(key, arg)?;
    match kind {
        "random" => Ok(InitPolicy::Random { amplitude: x }),
        "constant" => Ok(InitPolicy::Constant { value: x }),
        _ => Err(bad(key, format!("{kind:?} is not `random` or `constant`"))),
    }
}

/// `uniform` or `triangular`, both with unit variance.
fn parse_distribution(key: &str, value: &str) -> Result<Distribution, ConfigError> {
    match value.trim() {
        "uniform" => Ok(Distribution::default()),
        "triangular" => Ok(Distribution::triangular()),
        v => Err(bad(key, format!("{v:?} is not `uniform` or `triangular`"))),
    }
}

impl RunConfig {
    /// Sets one key. Upper-case `K`, `M`, `R` are accepted as aliases.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let c = &mut self.sweep;
        match key {
            "experiment" => {
                self.experiment = Some(Experiment::from_str(value.trim()).map_err(|e| bad(key, e))?)
            }
            "out" => self.out = PathBuf::from(value.trim()),
            "overwrite" => self.overwrite = parse_bool(key, value)?,
            "d" => c.d = parse(key, value)?,
            "s" => c.s = parse(key, value)?,
            "theta" => c.theta = parse(key, value)?,
            "c0" => c.c0 = parse(key, value)?,
            "delta0" => c.delta0 = parse(key, value)?,
            "k" | "K" => c.k = parse_optional(key, value)?,
            "n" | "n_list" => c.n_list = parse_list(key, value)?,
            "m" => c.m = parse(key, value)?,
            "pad" => c.pad = parse_optional(key, value)?,
            "resamples" | "M" => c.resamples = parse(key, value)?,
            "realizations" | "R" => c.realizations = parse(key, value)?,
            "seed" => c.seed = parse(key, value)?,
            "jobs" => c.jobs = parse(key, value)?,
            "s_list" => c.s_list = parse_list(key, value)?,
            "h_list" => c.h_list = parse_list(key, value)?,
            "cube_list" => c.cube_list = parse_list(key, value)?,
            "bins" => c.bins = parse(key, value)?,
            "exterior" => c.exterior = parse(key, value)?,
            "distribution" => c.distribution = parse_distribution(key, value)?,
            "method" => {
                c.solver.method = match value.trim() {
                    "monotone" => Method::Monotone,
                    "monotone_lbfgs" | "lbfgs" => Method::MonotoneLbfgs,
                    v => return Err(bad(key, format!("{v:?} is not `monotone` or `monotone_lbfgs`"))),
                }
            }
            "tol" => c.solver.tol = parse(key, value)?,
            "max_iter" => c.solver.max_iter = parse(key, value)?,
            "multistart" => c.solver.multistart = parse(key, value)?,
            "init" => c.solver.init = parse_init(key, value)?,
            "armijo" => c.solver.armijo = parse(key, value)?,
            "switch_tol" => c.solver.switch_tol = parse(key, value)?,
            "lbfgs_memory" => c.solver.lbfgs_memory = parse(key, value)?,
            "solver_seed" => c.solver.seed = parse(key, value)?,
            "tie_tol" => c.solver.tie_tol = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a flat config text: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    /// Full validation; errors name the offending key.
    pub fn validate(&self) -> Result<Experiment, ConfigError> {
        let exp = self.experiment.ok_or(ConfigError::MissingExperiment)?;
        self.sweep.validate().map_err(|e| match e {
            CoreError::InvalidParameter { name, reason } => bad(name, reason),
            CoreError::InvalidGrid(reason) => bad("n", reason),
            CoreError::InvalidDistribution(reason) => bad("distribution", reason),
            other => bad("config", other),
        })?;
        Ok(exp)
    }

    /// Flat text form; `apply_text` on the output reproduces the sweep settings.
    pub fn to_text(&self) -> String {
        let c = &self.sweep;
        let list = |v: Vec<String>| v.join(",");
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let mut lines = vec![];
        if let Some(e) = self.experiment {
            lines.push(format!("experiment = {e}"));
        }
        lines.extend([
            format!("d = {}", c.d),
            format!("s = {:?}", c.s),
            format!("theta = {:?}", c.theta),
            format!("c0 = {:?}", c.c0),
            format!("delta0 = {:?}", c.delta0),
            format!("k = {}", opt(c.k.map(|k| format!("{k:?}")))),
            format!("n = {}", list(c.n_list.iter().map(|n| n.to_string()).collect())),
            format!("m = {}", c.m),
            format!("pad = {}", opt(c.pad.map(|p| p.to_string()))),
            format!("resamples = {}", c.resamples),
            format!("realizations = {}", c.realizations),
            format!("seed = {}", c.seed),
            format!("s_list = {}", list(c.s_list.iter().map(|v| format!("{v:?}")).collect())),
            format!("h_list = {}", list(c.h_list.iter().map(|v| format!("{v:?}")).collect())),
            format!("cube_list = {}", list(c.cube_list.iter().map(|v| v.to_string()).collect())),
            format!("bins = {}", c.bins),
            format!("exterior = {:?}", c.exterior),
            format!(
                "distribution = {}",
                match c.distribution {
                    Distribution::Uniform { .. } => "uniform",
                    Distribution::Triangular { .. } => "triangular",
                }
            ),
            format!(
                "method = {}",
                match c.solver.method {
                    Method::Monotone => "monotone",
                    Method::MonotoneLbfgs => "monotone_lbfgs",
                }
            ),
            format!("tol = {:?}", c.solver.tol),
            format!("max_iter = {}", c.solver.max_iter),
            format!("multistart = {}", c.solver.multistart),
            match &c.solver.init {
                InitPolicy::Constant { value } => format!("init = constant:{value:?}"),
                InitPolicy::Random { amplitude } => format!("init = random:{amplitude:?}"),
                InitPolicy::Given { .. } => "# init = given (not representable)".into(),
            },
            format!("armijo = {:?}", c.solver.armijo),
            format!("switch_tol = {:?}", c.solver.switch_tol),
            format!("lbfgs_memory = {}", c.solver.lbfgs_memory),
            format!("solver_seed = {}", c.solver.seed),
            format!("tie_tol = {:?}", c.solver.tie_tol),
        ]);
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_valid() {
        let mut rc = RunConfig::default();
        rc.apply_text("experiment=minimize\nd=1\ns=0.5\ntheta=1\nn=64\nseed=7\n").unwrap();
        assert_eq!(rc.validate().unwrap(), Experiment::Minimize);
        assert_eq!(rc.sweep.n_list, vec![64]);
        assert_eq!(rc.sweep.seed, 7);
    }

    #[test]
    fn out_of_range_s_names_key() {
        let mut rc = RunConfig::default();
        rc.apply_text("experiment = minimize\ns = 1.2").unwrap();
        let err = rc.validate().unwrap_err();
        assert_eq!(err.key(), Some("s"));
    }

    #[test]
    fn unknown_key_and_bad_value() {
        let mut rc = RunConfig::default();
        assert_eq!(rc.apply_text("speed = 3").unwrap_err().key(), Some("speed"));
        assert_eq!(rc.apply_text("theta = fast").unwrap_err().key(), Some("theta"));
        assert_eq!(rc.apply_text("experiment = plot").unwrap_err().key(), Some("experiment"));
        assert!(matches!(rc.apply_text("just words"), Err(ConfigError::Syntax { line: 1 })));
    }

    #[test]
    fn later_values_win() {
        let mut rc = RunConfig::default();
        rc.apply_text("theta = 2\nK = 4 # barrier\nM = 5\nR = 6").unwrap();
        rc.set("theta", "0").unwrap();
        assert_eq!(rc.sweep.theta, 0.0);
        assert_eq!(rc.sweep.k, Some(4.0));
        assert_eq!((rc.sweep.resamples, rc.sweep.realizations), (5, 6));
    }

    #[test]
    fn text_round_trip() {
        let mut rc = RunConfig::default();
        rc.apply_text("experiment = gap\nmethod = monotone\ninit = constant:0.5\ndistribution = triangular\ntol = 1e-9\ns = 0.3\nn = 16 32\nh_list = 0.1, 0.01\npad = 3\nk = 2.5").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&rc.to_text()).unwrap();
        assert_eq!(back.sweep, rc.sweep);
        assert_eq!(back.experiment, rc.experiment);
    }

    #[test]
    fn solver_keys() {
        let mut rc = RunConfig::default();
        rc.apply_text("method = monotone\ninit = constant:-2\nmax_iter = 1\ndistribution = triangular").unwrap();
        assert_eq!(rc.sweep.solver.method, Method::Monotone);
        assert_eq!(rc.sweep.solver.init, InitPolicy::Constant { value: -2.0 });
        assert_eq!(rc.sweep.solver.max_iter, 1);
        assert!(rc.set("init", "zero:1").is_err());
    }
}
