//! Flat `key=value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment. Command-line overrides are
//! applied on top of the file before validation, so a flag always wins.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::graph::TopologyKind;
use crate::problem::{LabelMap, Objective, PartitionStrategy, SyntheticSpec};
use crate::sampling::SizeRule;

use super::RunError;

/// Every key accepted in a config file or via `--set`.
pub const KNOWN_KEYS: &[&str] = &[
    "solver",
    "dataset",
    "dim",
    "label_map",
    "synthetic_n",
    "synthetic_dim",
    "synthetic_noise",
    "synthetic_seed",
    "objective",
    "agents",
    "topology",
    "set",
    "radius",
    "iters",
    "alpha",
    "step_scale",
    "q",
    "size_rule",
    "sampling",
    "cenfw_q",
    "cenfw_batch",
    "partition",
    "equalize",
    "normalize",
    "init",
    "seed",
    "partition_seed",
    "sampling_seed",
    "topology_seed",
    "log_every",
    "out",
    "check_invariants",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    DstoFw,
    DenFw,
    CenFw,
    All,
}

impl SolverChoice {
    pub fn expand(self) -> Vec<SolverChoice> {
        match self {
            SolverChoice::All => vec![SolverChoice::DstoFw, SolverChoice::DenFw, SolverChoice::CenFw],
            one => vec![one],
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverChoice::DstoFw => "dstofw",
            SolverChoice::DenFw => "denfw",
            SolverChoice::CenFw => "cenfw",
            SolverChoice::All => "all",
        })
    }
}

impl FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dstofw" => Ok(SolverChoice::DstoFw),
            "denfw" => Ok(SolverChoice::DenFw),
            "cenfw" => Ok(SolverChoice::CenFw),
            "all" => Ok(SolverChoice::All),
            other => Err(format!("expected dstofw, denfw, cenfw or all, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Libsvm { path: PathBuf, dim: Option<usize>, labels: LabelMap },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Kind(TopologyKind),
    /// Edge-list file, `file:<path>` in the config.
    File(PathBuf),
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySpec::Kind(k) => write!(f, "{k}"),
            TopologySpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPoint {
    Zero,
    /// A seeded random point of the constraint set, shared by all agents.
    Random,
}

impl fmt::Display for InitPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitPoint::Zero => "zero",
            InitPoint::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverChoice,
    pub data: DataSource,
    pub objective: Objective,
    pub agents: usize,
    pub topology: TopologySpec,
    pub radius: f64,
    pub iters: usize,
    pub alpha: f64,
    /// `A` in `A / k^alpha`; when unset, convex runs use `2 / (k + 1)` and
    /// non-convex runs `1 / k^alpha`.
    pub step_scale: Option<f64>,
    pub q: Option<usize>,
    pub size_rule: SizeRule,
    pub full_batch: bool,
    pub cenfw_q: Option<usize>,
    pub cenfw_batch: Option<usize>,
    pub partition: PartitionStrategy,
    pub equalize: bool,
    pub normalize: bool,
    pub init: InitPoint,
    pub seed: u64,
    pub partition_seed: u64,
    pub sampling_seed: u64,
    pub topology_seed: u64,
    pub log_every: usize,
    pub out: PathBuf,
    pub check_invariants: bool,
}

/// Unvalidated assignments, last write wins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| RunError::Config(format!("line {}: expected key=value, got `{body}`", n + 1)))?;
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(RunError::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Parses a `key=value` override.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), RunError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| RunError::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>, RunError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| key_error(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, RunError> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(other) => Err(key_error(key, format!("`{other}` is not a boolean"))),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T, RunError>
    where
        T::Err: fmt::Display,
    {
        self.typed(key)?.ok_or_else(|| key_error(key, "missing required key".into()))
    }

    /// Fills defaults and validates every constraint.
    pub fn build(&self) -> Result<RunConfig, RunError> {
        let objective: Objective = self.required("objective")?;
        let seed: u64 = self.typed("seed")?.unwrap_or(0);

        let data = match (self.get("dataset"), self.get("synthetic_n")) {
            (Some(_), Some(_)) => return Err(key_error("dataset", "set either dataset or synthetic_n, not both".into())),
            (None, None) => return Err(key_error("dataset", "missing required key (or synthetic_n)".into())),
            (Some(path), None) => {
                let path = PathBuf::from(path);
                if !path.is_file() {
                    return Err(key_error("dataset", format!("file `{}` does not exist", path.display())));
                }
                DataSource::Libsvm {
                    path,
                    dim: self.typed("dim")?,
                    labels: self.typed("label_map")?.unwrap_or_default(),
                }
            }
            (None, Some(_)) => {
                let spec = SyntheticSpec {
                    n: self.required("synthetic_n")?,
                    dim: self.typed("synthetic_dim")?.unwrap_or(20),
                    seed: self.typed("synthetic_seed")?.unwrap_or(seed),
                    noise: self.typed("synthetic_noise")?.unwrap_or(0.1),
                };
                if spec.n == 0 || spec.dim == 0 {
                    return Err(key_error("synthetic_n", "synthetic_n and synthetic_dim must be positive".into()));
                }
                if !(0.0..=0.5).contains(&spec.noise) {
                    return Err(key_error("synthetic_noise", "must lie in [0, 0.5]".into()));
                }
                DataSource::Synthetic(spec)
            }
        };
        for key in ["dim", "label_map"] {
            if self.get(key).is_some() && matches!(data, DataSource::Synthetic(_)) {
                return Err(key_error(key, "only applies to dataset files".into()));
            }
        }

        let topology = match self.get("topology") {
            None => TopologySpec::Kind(TopologyKind::RingChords),
            Some(v) => match v.strip_prefix("file:") {
                Some(path) => {
                    let path = PathBuf::from(path);
                    if !path.is_file() {
                        return Err(key_error("topology", format!("file `{}` does not exist", path.display())));
                    }
                    TopologySpec::File(path)
                }
                None => TopologySpec::Kind(v.parse().map_err(|e| key_error("topology", format!("{e}")))?),
            },
        };

        if let Some(set) = self.get("set") {
            if set != "l1" {
                return Err(key_error("set", format!("only `l1` is supported, got `{set}`")));
            }
        }

        let sampling = self.get("sampling").unwrap_or("rule");
        let full_batch = match sampling {
            "rule" => false,
            "full" => true,
            other => return Err(key_error("sampling", format!("expected `rule` or `full`, got `{other}`"))),
        };
        let init = match self.get("init").unwrap_or("zero") {
            "zero" => InitPoint::Zero,
            "random" => InitPoint::Random,
            other => return Err(key_error("init", format!("expected `zero` or `random`, got `{other}`"))),
        };

        let default_alpha = if objective.is_convex() { 1.0 } else { 0.5 };
        let config = RunConfig {
            solver: self.typed("solver")?.unwrap_or(SolverChoice::DstoFw),
            data,
            objective,
            agents: self.typed("agents")?.unwrap_or(10),
            topology,
            radius: self.typed("radius")?.unwrap_or(20.0),
            iters: self.typed("iters")?.unwrap_or(1000),
            alpha: self.typed("alpha")?.unwrap_or(default_alpha),
            step_scale: self.typed("step_scale")?,
            q: self.typed("q")?,
            size_rule: self.typed("size_rule")?.unwrap_or_default(),
            full_batch,
            cenfw_q: self.typed("cenfw_q")?,
            cenfw_batch: self.typed("cenfw_batch")?,
            partition: self.typed("partition")?.unwrap_or(PartitionStrategy::RoundRobin),
            equalize: self.flag("equalize", true)?,
            normalize: self.flag("normalize", false)?,
            init,
            seed,
            partition_seed: self.typed("partition_seed")?.unwrap_or(seed),
            sampling_seed: self.typed("sampling_seed")?.unwrap_or(seed),
            topology_seed: self.typed("topology_seed")?.unwrap_or(seed),
            log_every: self.typed("log_every")?.unwrap_or(1),
            out: self.typed::<PathBuf>("out")?.unwrap_or_else(|| PathBuf::from("run.csv")),
            check_invariants: self.flag("check_invariants", false)?,
        };
        config.validate()?;
        Ok(config)
    }
}

fn key_error(key: &str, msg: String) -> RunError {
    RunError::Config(format!("config key `{key}`: {msg}"))
}

impl RunConfig {
    fn validate(&self) -> Result<(), RunError> {
        if self.agents == 0 {
            return Err(key_error("agents", "must be at least 1".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(key_error("radius", format!("must be positive, got {}", self.radius)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(key_error("alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        if let Some(a) = self.step_scale {
            if !(a > 0.0 && a.is_finite()) {
                return Err(key_error("step_scale", format!("must be positive, got {a}")));
            }
        }
        for (key, v) in [("q", self.q), ("cenfw_q", self.cenfw_q), ("cenfw_batch", self.cenfw_batch)] {
            if v == Some(0) {
                return Err(key_error(key, "must be at least 1".into()));
            }
        }
        if self.log_every == 0 {
            return Err(key_error("log_every", "must be at least 1".into()));
        }
        Ok(())
    }

    /// Every field as `key=value`, in a form [`parse_config`] accepts back.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("solver", self.solver.to_string());
        match &self.data {
            DataSource::Libsvm { path, dim, labels } => {
                put("dataset", path.display().to_string());
                if let Some(d) = dim {
                    put("dim", d.to_string());
                }
                put("label_map", labels.to_string());
            }
            DataSource::Synthetic(spec) => {
                put("synthetic_n", spec.n.to_string());
                put("synthetic_dim", spec.dim.to_string());
                put("synthetic_noise", spec.noise.to_string());
                put("synthetic_seed", spec.seed.to_string());
            }
        }
        put("objective", self.objective.to_string());
        put("agents", self.agents.to_string());
        put("topology", self.topology.to_string());
        put("set", "l1".into());
        put("radius", self.radius.to_string());
        put("iters", self.iters.to_string());
        put("alpha", self.alpha.to_string());
        if let Some(a) = self.step_scale {
            put("step_scale", a.to_string());
        }
        if let Some(q) = self.q {
            put("q", q.to_string());
        }
        put("size_rule", self.size_rule.to_string());
        put("sampling", if self.full_batch { "full" } else { "rule" }.into());
        if let Some(q) = self.cenfw_q {
            put("cenfw_q", q.to_string());
        }
        if let Some(b) = self.cenfw_batch {
            put("cenfw_batch", b.to_string());
        }
        put("partition", self.partition.to_string());
        put("equalize", self.equalize.to_string());
        put("normalize", self.normalize.to_string());
        put("init", self.init.to_string());
        put("seed", self.seed.to_string());
        put("partition_seed", self.partition_seed.to_string());
        put("sampling_seed", self.sampling_seed.to_string());
        put("topology_seed", self.topology_seed.to_string());
        put("log_every", self.log_every.to_string());
        put("out", self.out.display().to_string());
        put("check_invariants", self.check_invariants.to_string());
        out
    }
}

/// Parses and validates a config file's text.
pub fn parse_config(text: &str) -> Result<RunConfig, RunError> {
    RawConfig::parse(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "objective = convex\nsynthetic_n = 100 # desk-scale\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.agents, 10);
        assert_eq!(c.radius, 20.0);
        assert_eq!(c.solver, SolverChoice::DstoFw);
        assert_eq!(c.topology, TopologySpec::Kind(TopologyKind::RingChords));
        assert!(c.equalize && !c.normalize && !c.full_batch);
        let nc = parse_config("objective=nonconvex\nsynthetic_n=100\n").unwrap();
        assert_eq!(nc.alpha, 0.5);
    }

    #[test]
    fn rejects_bad_values() {
        for (extra, key) in [
            ("iters=-1", "iters"),
            ("radius=0", "radius"),
            ("alpha=1.5", "alpha"),
            ("agents=0", "agents"),
            ("topology=star", "topology"),
            ("set=simplex", "set"),
            ("equalize=maybe", "equalize"),
            ("q=0", "q"),
        ] {
            let err = parse_config(&format!("{MINIMAL}{extra}\n")).unwrap_err().to_string();
            assert!(err.contains(&format!("`{key}`")), "{extra}: {err}");
        }
        assert!(parse_config("objective=convex\n").unwrap_err().to_string().contains("`dataset`"));
        assert!(parse_config("synthetic_n=5\n").unwrap_err().to_string().contains("`objective`"));
        assert!(parse_config("objective=convex\nsynthetic_n=5\nbogus=1\n").unwrap_err().to_string().contains("unknown key `bogus`"));
        assert!(parse_config("objective convex\n").unwrap_err().to_string().contains("line 1"));
        let missing = parse_config("objective=convex\ndataset=/definitely/not/here.svm\n").unwrap_err();
        assert!(missing.to_string().contains("does not exist"));
    }

    #[test]
    fn overrides_win() {
        let mut raw = RawConfig::parse(&format!("{MINIMAL}iters=50\n")).unwrap();
        raw.set_assignment("iters=7").unwrap();
        assert_eq!(raw.build().unwrap().iters, 7);
        assert!(raw.set_assignment("nokey").is_err());
    }

    #[test]
    fn seeds_default_to_master() {
        let c = parse_config(&format!("{MINIMAL}seed=42\nsampling_seed=3\n")).unwrap();
        assert_eq!((c.partition_seed, c.sampling_seed, c.topology_seed), (42, 3, 42));
    }

    #[test]
    fn echo_parses_back() {
        let c = parse_config(&format!("{MINIMAL}q=5\ncenfw_batch=9\nstep_scale=2\nsampling=full\ninit=random\n")).unwrap();
        let text: String = c.echo().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        assert_eq!(parse_config(&text).unwrap(), c);
    }
}
