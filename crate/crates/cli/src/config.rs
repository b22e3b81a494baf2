//! Run settings shared by flags and config files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use hkmedian::algorithm::Algorithm;
use hkmedian::sensitivity::DeletionSchedule;

use crate::fail::{config_err, CliResult};

/// Every tunable of a run.
///
/// Flags and config files fill the same struct; flags win. After
/// [`Settings::resolve`] all defaults are explicit, so the serialized form
/// reproduces the run. `out` and `workers` never affect results and are
/// left out of the serialized form.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    #[arg(skip)]
    pub command: Option<String>,

    /// CSV file with one point per row.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Synthetic data, e.g. `gaussian:n=500,d=2,std=1`.
    #[arg(long, value_name = "SPEC")]
    pub generator: Option<GeneratorSpec>,

    /// The input CSV starts with a header row.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub header: Option<bool>,

    /// Field separator of the input CSV.
    #[arg(long, value_name = "CHAR")]
    pub delimiter: Option<char>,

    /// Rescale every coordinate to [0, 1] before clustering.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub scale: Option<bool>,

    /// stable, clnss-greedy, clnss-deterministic, single, complete, average or ward.
    #[arg(long = "algorithm", value_name = "NAME", value_delimiter = ',')]
    pub algorithms: Vec<String>,

    /// Privacy parameter of `stable`; repeat for a grid.
    #[arg(long = "epsilon", value_name = "EPS", value_delimiter = ',')]
    pub epsilons: Vec<f64>,

    #[arg(long, value_name = "K", conflicts_with = "k_range")]
    pub k: Option<usize>,

    /// Inclusive range `LO:HI`.
    #[arg(long, value_name = "LO:HI")]
    pub k_range: Option<KRange>,

    /// point, count:N or frac:F; repeat for a grid.
    #[arg(long, value_name = "SCHEDULE")]
    pub delete: Vec<String>,

    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,

    /// Average over every single-point deletion without sampling.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub exact: Option<bool>,

    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// DBSCAN radius.
    #[arg(long, value_name = "EPS")]
    pub eps: Option<f64>,

    /// DBSCAN core threshold, the point itself included.
    #[arg(long, value_name = "N")]
    pub min_samples: Option<usize>,

    /// Named DBSCAN parameters: wholesale, diabetes, digits, yeast, iris, wine, wdbc.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,

    /// Partition to check: dbscan, or truth for the clusterable generator.
    #[arg(long, value_name = "SOURCE")]
    pub labels: Option<String>,

    /// Worker threads; defaults to all cores.
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub workers: Option<usize>,

    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr; opt: $($o:ident),*; vec: $($v:ident),*) => {{
        let (hi, lo) = ($hi, $lo);
        Settings {
            $($o: hi.$o.or(lo.$o),)*
            $($v: if hi.$v.is_empty() { lo.$v } else { hi.$v },)*
        }
    }};
}

impl Settings {
    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Settings) -> Settings {
        overlay!(self, base;
            opt: command, input, generator, header, delimiter, scale, k, k_range, trials, exact,
                 seed, eps, min_samples, preset, labels, workers, out;
            vec: algorithms, epsilons, delete)
    }

    /// Fills in the defaults that `command` reads and canonicalizes names.
    pub fn resolve(mut self, command: Command) -> CliResult<Settings> {
        if let Some(c) = &self.command {
            if c != command.name() {
                return Err(config_err(format!("config is for `{c}`, not `{}`", command.name())));
            }
        }
        self.command = Some(command.name().to_string());
        self.seed.get_or_insert(0);
        match (&self.input, &self.generator) {
            (Some(_), Some(_)) => return Err(config_err("give either an input file or a generator, not both")),
            (None, None) => return Err(config_err("no data: pass --input or --generator")),
            (Some(input), None) => {
                if let (Some(out), Some(input)) = (&self.out, fs::canonicalize(input).ok()) {
                    if fs::canonicalize(out).ok().as_ref() == Some(&input) {
                        return Err(config_err("refusing to overwrite the input file"));
                    }
                }
                self.header.get_or_insert(false);
                self.delimiter.get_or_insert(',');
            }
            (None, Some(_)) => {}
        }
        self.scale.get_or_insert(false);
        if let Some(c) = self.delimiter {
            if !c.is_ascii() {
                return Err(config_err(format!("delimiter `{c}` is not a single byte")));
            }
        }
        match command {
            Command::Cluster | Command::CostCurve | Command::Sensitivity => self.resolve_algorithms(command)?,
            Command::Clusterability => {
                let labels = self.labels.get_or_insert_with(|| "dbscan".into());
                match labels.as_str() {
                    "dbscan" => {
                        if self.preset.is_none() && (self.eps.is_none() || self.min_samples.is_none()) {
                            return Err(config_err("dbscan needs --preset or both --eps and --min-samples"));
                        }
                    }
                    "truth" => {}
                    other => return Err(config_err(format!("unknown label source `{other}`"))),
                }
            }
            Command::Gen => {
                if self.generator.is_none() {
                    return Err(config_err("gen needs --generator"));
                }
            }
        }
        Ok(self)
    }

    fn resolve_algorithms(&mut self, command: Command) -> CliResult<()> {
        if self.algorithms.is_empty() {
            return Err(config_err("no algorithm given"));
        }
        let has_stable = self.algorithms.iter().any(|a| a == "stable");
        if has_stable && self.epsilons.is_empty() {
            self.epsilons = DEFAULT_EPSILONS.to_vec();
        }
        if !has_stable && !self.epsilons.is_empty() {
            return Err(config_err("epsilon only applies to `stable`"));
        }
        self.algorithms()?;
        if command != Command::Cluster {
            self.trials.get_or_insert(DEFAULT_TRIALS);
        }
        if command == Command::Sensitivity {
            if self.k.is_none() && self.k_range.is_none() {
                return Err(config_err("sensitivity needs --k or --k-range"));
            }
            if self.delete.is_empty() {
                self.delete.push("point".into());
            }
            self.delete = self.schedules()?.iter().map(|s| s.to_string()).collect();
            let exact = *self.exact.get_or_insert(false);
            if exact {
                if let Some(a) = self.algorithms()?.iter().find(|a| !a.is_deterministic()) {
                    return Err(config_err(format!(
                        "exact mode needs deterministic algorithms; {a} is randomized"
                    )));
                }
                if self.delete.iter().any(|d| d != "point") {
                    return Err(config_err("exact mode only supports the `point` schedule"));
                }
            }
        }
        Ok(())
    }

    /// Every (algorithm, epsilon) cell in flag order.
    pub fn algorithms(&self) -> CliResult<Vec<Algorithm>> {
        let mut out = Vec::new();
        for name in &self.algorithms {
            if name == "stable" {
                for &e in &self.epsilons {
                    out.push(Algorithm::from_name(name, Some(e)).map_err(config_err)?);
                }
            } else {
                out.push(Algorithm::from_name(name, None).map_err(config_err)?);
            }
        }
        Ok(out)
    }

    pub fn schedules(&self) -> CliResult<Vec<DeletionSchedule>> {
        let trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        self.delete
            .iter()
            .map(|d| DeletionSchedule::parse(d, trials).map_err(config_err))
            .collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// The serialized settings as embedded in every output.
    pub fn embedded(&self) -> Value {
        serde_json::to_value(self).expect("settings serialize")
    }

    /// Reads a TOML or JSON config. A JSON file written by this tool is
    /// accepted too: its `config` member is used. So is a CSV output whose
    /// first line is `# config: {...}`.
    pub fn load(path: &Path) -> CliResult<Settings> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let parse = |r: Result<Settings, String>| r.map_err(|e| config_err(format!("{}: {e}", path.display())));
        if let Some(line) = text.lines().next().and_then(|l| l.strip_prefix(CSV_CONFIG_PREFIX)) {
            return parse(serde_json::from_str(line).map_err(|e| e.to_string()));
        }
        if path.extension().is_some_and(|e| e == "toml") {
            return parse(toml::from_str(&text).map_err(|e| e.to_string()));
        }
        let mut value: Value =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        parse(serde_json::from_value(value).map_err(|e| e.to_string()))
    }
}

/// First line of every CSV output.
pub const CSV_CONFIG_PREFIX: &str = "# config: ";

/// The epsilon grid of the experiments.
pub const DEFAULT_EPSILONS: [f64; 3] = [1.0, 10.0, 1000.0];

pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Cluster,
    Sensitivity,
    CostCurve,
    Clusterability,
    Gen,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Cluster => "cluster",
            Command::Sensitivity => "sensitivity",
            Command::CostCurve => "cost-curve",
            Command::Clusterability => "clusterability",
            Command::Gen => "gen",
        }
    }
}

/// Inclusive range of cluster counts, written `LO:HI`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KRange {
    pub lo: usize,
    pub hi: usize,
}

impl FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s
            .split_once(':')
            .or_else(|| s.split_once("..="))
            .ok_or_else(|| format!("k range `{s}` is not LO:HI"))?;
        let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad k `{x}` in `{s}`"));
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo == 0 || lo > hi {
            return Err(format!("k range `{s}` must satisfy 1 <= LO <= HI"));
        }
        Ok(KRange { lo, hi })
    }
}

impl TryFrom<String> for KRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<KRange> for String {
    fn from(r: KRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for KRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorParams {
    Uniform {
        n: usize,
        d: usize,
        #[serde(default = "one")]
        side: f64,
    },
    Gaussian {
        n: usize,
        d: usize,
        #[serde(default = "one")]
        std: f64,
    },
    Mixture {
        n: usize,
        d: usize,
        clusters: usize,
        #[serde(default = "one")]
        spread: f64,
        #[serde(default = "hundred")]
        side: f64,
    },
    /// Points on a line with one short first gap.
    Line { n: usize, d1: f64 },
    /// The grid instance on which greedy centers flip under deletion.
    Adversarial { n: usize },
    /// Disc clusters with known ground truth.
    Clusterable {
        m: usize,
        size: usize,
        #[serde(default = "three")]
        separation: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn hundred() -> f64 {
    100.0
}

fn three() -> f64 {
    3.0
}

/// A generator written `KIND:KEY=VALUE,...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GeneratorSpec(pub GeneratorParams);

impl FromStr for GeneratorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut map = Map::new();
        map.insert("kind".into(), Value::String(kind.trim().into()));
        for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| format!("generator parameter `{pair}` is not KEY=VALUE"))?;
            let value = serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.trim().into()));
            map.insert(key.trim().into(), value);
        }
        serde_json::from_value(Value::Object(map))
            .map(GeneratorSpec)
            .map_err(|e| format!("generator `{s}`: {e}"))
    }
}

impl TryFrom<String> for GeneratorSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<GeneratorSpec> for String {
    fn from(g: GeneratorSpec) -> String {
        g.to_string()
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Value::Object(mut map) = serde_json::to_value(&self.0).expect("generator serializes") else {
            unreachable!("generator params are a struct variant")
        };
        let kind = map.remove("kind").expect("tagged");
        let params: Vec<String> = map.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}:{}", kind.as_str().unwrap_or_default(), params.join(","))
    }
}
