//! Line-oriented experiment configuration with dotted keys.
//!
//! ```text
//! # comment
//! problem.kind = quadratic
//! problem.dim = 20
//! chain.matrix = 0.9 0.1; 0.2 0.8
//! ```
//!
//! Every key is optional; unknown and repeated keys are rejected with the
//! offending line number. [`Config::to_lines`] renders the fully resolved
//! configuration in a canonical order, and parsing those lines gives back the
//! same [`Config`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use markov_mirror::problems::{MinGeometryKind, ViGeometryKind};
use sha2::{Digest, Sha256};

/// First line of every file the CLI writes. A config can be read back from
/// such a file: the comment block under this line is the resolved config.
pub const HEADER_TAG: &str = "# markov-mirror";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, msg: impl Into<String>) -> Self {
        Self { line: Some(line), msg: msg.into() }
    }

    pub fn global(msg: impl Into<String>) -> Self {
        Self { line: None, msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.msg),
            None => write!(f, "{}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

const KNOWN_KEYS: &[&str] = &[
    "problem.kind",
    "problem.geometry",
    "problem.dim",
    "problem.rows",
    "problem.cols",
    "problem.actions",
    "problem.noise",
    "problem.seed",
    "problem.lmax",
    "problem.spectrum_decades",
    "chain.kind",
    "chain.states",
    "chain.seed",
    "chain.laziness",
    "chain.matrix",
    "chain.tau_mix",
    "algorithm",
    "schedule",
    "schedule.gamma",
    "run.iterations",
    "run.batch",
    "run.limit",
    "run.seeds",
    "run.stride",
    "run.start",
    "run.metric",
    "run.wall_time",
    "sweep.grid",
    "sweep.axis",
    "lemma.trials",
    "lemma.unbiased_trials",
    "lemma.replications",
    "lemma.seed",
    "lemma.tau_sweep",
    "lemma.n_grid",
    "lemma.limit",
    "lemma.bias_limits",
    "lemma.var_batches",
    "lemma.var_limits",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Quadratic { dim: usize, geometry: MinGeometryKind, lmax: f64, spectrum_decades: f64 },
    Game { rows: usize, cols: usize, geometry: ViGeometryKind },
    MatchingPennies { actions: usize },
}

impl ProblemKind {
    pub fn is_min(&self) -> bool {
        matches!(self, ProblemKind::Quadratic { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainSource {
    Generator { states: usize, seed: u64, laziness: f64 },
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub source: ChainSource,
    /// Overrides the computed mixing time.
    pub tau_mix: Option<usize>,
    /// Line of `chain.matrix`, for anchoring kernel validation errors.
    pub matrix_line: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Mamd,
    MamdBatched,
    Mmp,
    MmpBatched,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mamd => "mamd",
            Algorithm::MamdBatched => "mamd-batched",
            Algorithm::Mmp => "mmp",
            Algorithm::MmpBatched => "mmp-batched",
        }
    }

    pub fn is_min(self) -> bool {
        matches!(self, Algorithm::Mamd | Algorithm::MamdBatched)
    }

    pub fn is_batched(self) -> bool {
        matches!(self, Algorithm::MamdBatched | Algorithm::MmpBatched)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSource {
    Corollary,
    /// MAMD: `γ_t = β_t · gamma`; MMP: constant `gamma`.
    Explicit { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Center,
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Auto,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    OracleCalls,
    Iterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaConfig {
    pub trials: usize,
    pub unbiased_trials: usize,
    pub replications: usize,
    pub seed: u64,
    pub tau_sweep: bool,
    pub n_grid: Vec<usize>,
    pub limit: u64,
    pub bias_limits: Vec<u64>,
    pub var_batches: Vec<u64>,
    pub var_limits: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub problem: ProblemConfig,
    pub chain: ChainConfig,
    pub algorithm: Algorithm,
    pub schedule: ScheduleSource,
    pub iterations: usize,
    pub batch: Option<u64>,
    pub limit: Option<u64>,
    pub seeds: Vec<u64>,
    pub stride: usize,
    pub start: Start,
    pub metric: Metric,
    pub wall_time: bool,
    pub sweep_grid: Vec<usize>,
    pub sweep_axis: SweepAxis,
    pub lemma: LemmaConfig,
}

/// Raw `key → (value, line)` table.
struct Raw(BTreeMap<String, (String, usize)>);

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, line) in config_lines(text) {
            let line_no = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line_no, format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::at(line_no, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line_no, format!("`{key}` has no value")));
            }
            if let Some((_, first)) = map.insert(key.to_string(), (value.to_string(), line_no)) {
                return Err(ConfigError::at(line_no, format!("`{key}` repeated (first set on line {first})")));
            }
        }
        Ok(Self(map))
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.0.get(key).map(|(_, l)| *l)
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> (&'a str, usize) {
        match self.0.get(key) {
            Some((v, l)) => (v.as_str(), *l),
            None => (default, 0),
        }
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some((v, l)) => v
                .parse()
                .map_err(|_| ConfigError::at(*l, format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn positive<T: FromStr + PartialOrd + Default + Copy>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        let v = self.get(key, default)?;
        if v <= T::default() {
            return Err(self.err(key, "must be positive"));
        }
        Ok(v)
    }

    fn list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some((v, l)) => v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse().map_err(|_| ConfigError::at(*l, format!("`{key}`: cannot parse list entry `{s}`")))
                })
                .collect(),
        }
    }

    fn positive_list<T: FromStr + PartialOrd + Default + Copy>(
        &self,
        key: &str,
        default: Vec<T>,
    ) -> Result<Vec<T>, ConfigError> {
        let v = self.list(key, default)?;
        if v.is_empty() || v.iter().any(|x| *x <= T::default()) {
            return Err(self.err(key, "needs a nonempty list of positive entries"));
        }
        Ok(v)
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        self.get(key, default)
    }

    fn err(&self, key: &str, msg: &str) -> ConfigError {
        match self.line(key) {
            Some(l) => ConfigError::at(l, format!("`{key}` {msg}")),
            None => ConfigError::global(format!("`{key}` {msg}")),
        }
    }
}

/// Non-blank, non-comment lines with their zero-based index. When the text
/// is a file previously written by the CLI, the config is the comment block
/// under the header tag.
fn config_lines(text: &str) -> Vec<(usize, &str)> {
    let from_output = text.starts_with(HEADER_TAG);
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = if from_output {
            if i == 0 {
                continue;
            }
            match raw.strip_prefix("# ") {
                Some(rest) => rest,
                None => break,
            }
        } else {
            raw
        };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((i, line));
    }
    out
}

fn parse_matrix(text: &str, line: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    text.split(';')
        .map(|row| {
            row.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| ConfigError::at(line, format!("`chain.matrix`: bad entry `{s}`"))))
                .collect()
        })
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = Raw::parse(text)?;

        let (kind, kind_line) = raw.str_or("problem.kind", "quadratic");
        let geometry_key = "problem.geometry";
        let kind = match kind {
            "quadratic" => {
                let (g, _) = raw.str_or(geometry_key, "box");
                let geometry = match g {
                    "box" => MinGeometryKind::Box,
                    "ball" => MinGeometryKind::Ball,
                    "simplex" => MinGeometryKind::Simplex,
                    _ => return Err(raw.err(geometry_key, "must be box, ball or simplex for a quadratic")),
                };
                ProblemKind::Quadratic {
                    dim: raw.positive("problem.dim", 20usize)?,
                    geometry,
                    lmax: raw.positive("problem.lmax", 1.0f64)?,
                    spectrum_decades: {
                        let v: f64 = raw.get("problem.spectrum_decades", 9.0)?;
                        if !(v >= 0.0 && v.is_finite()) {
                            return Err(raw.err("problem.spectrum_decades", "must be nonnegative"));
                        }
                        v
                    },
                }
            }
            "game" => {
                let (g, _) = raw.str_or(geometry_key, "simplexes");
                let geometry = match g {
                    "simplexes" => ViGeometryKind::Simplexes,
                    "box" => ViGeometryKind::Box,
                    _ => return Err(raw.err(geometry_key, "must be simplexes or box for a game")),
                };
                ProblemKind::Game {
                    rows: raw.positive("problem.rows", 4usize)?,
                    cols: raw.positive("problem.cols", 4usize)?,
                    geometry,
                }
            }
            "matching-pennies" => {
                let actions: usize = raw.get("problem.actions", 2)?;
                if actions < 2 {
                    return Err(raw.err("problem.actions", "must be at least 2"));
                }
                ProblemKind::MatchingPennies { actions }
            }
            other => {
                return Err(ConfigError::at(
                    kind_line,
                    format!("`problem.kind`: unknown kind `{other}` (quadratic, game, matching-pennies)"),
                ))
            }
        };
        let noise: f64 = raw.get("problem.noise", 1.0)?;
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(raw.err("problem.noise", "must be a nonnegative number"));
        }
        let problem = ProblemConfig { kind, noise, seed: raw.get("problem.seed", 1)? };

        let has_matrix = raw.line("chain.matrix").is_some();
        let (chain_kind, chain_line) = raw.str_or("chain.kind", if has_matrix { "matrix" } else { "generator" });
        let source = match chain_kind {
            "generator" => {
                let laziness: f64 = raw.get("chain.laziness", markov_mirror::chain::DEFAULT_LAZINESS)?;
                if !(0.0..1.0).contains(&laziness) {
                    return Err(raw.err("chain.laziness", "must lie in [0, 1)"));
                }
                ChainSource::Generator {
                    states: raw.positive("chain.states", 8usize)?,
                    seed: raw.get("chain.seed", 0)?,
                    laziness,
                }
            }
            "matrix" => {
                let Some((text, line)) = raw.0.get("chain.matrix") else {
                    return Err(ConfigError::at(chain_line, "`chain.kind = matrix` needs `chain.matrix`"));
                };
                ChainSource::Matrix(parse_matrix(text, *line)?)
            }
            other => {
                return Err(ConfigError::at(chain_line, format!("`chain.kind`: unknown kind `{other}` (generator, matrix)")))
            }
        };
        let tau_mix = match raw.str_or("chain.tau_mix", "auto") {
            ("auto", _) => None,
            _ => Some(raw.positive("chain.tau_mix", 1usize)?),
        };
        let chain = ChainConfig { source, tau_mix, matrix_line: raw.line("chain.matrix") };

        let default_alg = if problem.kind.is_min() { "mamd-batched" } else { "mmp-batched" };
        let (alg, alg_line) = raw.str_or("algorithm", default_alg);
        let algorithm = match alg {
            "mamd" => Algorithm::Mamd,
            "mamd-batched" => Algorithm::MamdBatched,
            "mmp" => Algorithm::Mmp,
            "mmp-batched" => Algorithm::MmpBatched,
            other => {
                return Err(ConfigError::at(
                    alg_line,
                    format!("`algorithm`: unknown algorithm `{other}` (mamd, mamd-batched, mmp, mmp-batched)"),
                ))
            }
        };
        if algorithm.is_min() != problem.kind.is_min() {
            let what = if problem.kind.is_min() { "a minimization problem" } else { "a variational inequality" };
            return Err(ConfigError { line: raw.line("algorithm"), msg: format!("`{alg}` cannot solve {what}") });
        }

        let schedule = match raw.str_or("schedule", "corollary") {
            ("corollary", _) => {
                if raw.line("schedule.gamma").is_some() {
                    return Err(raw.err("schedule.gamma", "is only used with `schedule = explicit`"));
                }
                ScheduleSource::Corollary
            }
            ("explicit", l) => {
                if raw.line("schedule.gamma").is_none() {
                    return Err(ConfigError::at(l, "`schedule = explicit` needs `schedule.gamma`"));
                }
                ScheduleSource::Explicit { gamma: raw.positive("schedule.gamma", 1.0f64)? }
            }
            (other, l) => {
                return Err(ConfigError::at(l, format!("`schedule`: unknown source `{other}` (corollary, explicit)")))
            }
        };

        let opt_u64 = |key: &str| -> Result<Option<u64>, ConfigError> {
            match raw.str_or(key, "auto") {
                ("auto", _) => Ok(None),
                _ => Ok(Some(raw.positive(key, 1u64)?)),
            }
        };
        let batch = opt_u64("run.batch")?;
        let limit = opt_u64("run.limit")?;
        if (batch.is_some() || limit.is_some()) && !algorithm.is_batched() {
            let key = if batch.is_some() { "run.batch" } else { "run.limit" };
            return Err(raw.err(key, "only applies to batched algorithms"));
        }

        let start = match raw.str_or("run.start", "center") {
            ("center", _) => Start::Center,
            ("origin", _) => Start::Origin,
            (other, l) => return Err(ConfigError::at(l, format!("`run.start`: unknown start `{other}` (center, origin)"))),
        };
        let metric = match raw.str_or("run.metric", "auto") {
            ("auto", _) => Metric::Auto,
            ("none", _) => Metric::None,
            (other, l) => return Err(ConfigError::at(l, format!("`run.metric`: unknown metric `{other}` (auto, none)"))),
        };
        let sweep_axis = match raw.str_or("sweep.axis", "oracle_calls") {
            ("oracle_calls", _) => SweepAxis::OracleCalls,
            ("iterations", _) => SweepAxis::Iterations,
            (other, l) => {
                return Err(ConfigError::at(l, format!("`sweep.axis`: unknown axis `{other}` (oracle_calls, iterations)")))
            }
        };
        let sweep_grid: Vec<usize> = raw.positive_list("sweep.grid", (6..=12).map(|e| 1usize << e).collect())?;
        if sweep_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(raw.err("sweep.grid", "must be strictly increasing"));
        }

        let seeds: Vec<u64> = raw.list("run.seeds", vec![1])?;
        if seeds.is_empty() {
            return Err(raw.err("run.seeds", "needs at least one seed"));
        }

        let lemma = LemmaConfig {
            trials: raw.positive("lemma.trials", 2000usize)?,
            unbiased_trials: raw.positive("lemma.unbiased_trials", 100_000usize)?,
            replications: raw.positive("lemma.replications", 20usize)?,
            seed: raw.get("lemma.seed", 1)?,
            tau_sweep: raw.bool("lemma.tau_sweep", true)?,
            n_grid: raw.positive_list("lemma.n_grid", (4..=12).map(|e| 1usize << e).collect())?,
            limit: raw.positive("lemma.limit", 64u64)?,
            bias_limits: raw.positive_list("lemma.bias_limits", vec![4, 16, 64, 256])?,
            var_batches: raw.positive_list("lemma.var_batches", vec![1, 2, 4])?,
            var_limits: raw.positive_list("lemma.var_limits", vec![4, 16, 64])?,
        };

        Ok(Config {
            problem,
            chain,
            algorithm,
            schedule,
            iterations: raw.positive("run.iterations", 1000usize)?,
            batch,
            limit,
            seeds,
            stride: raw.positive("run.stride", 1usize)?,
            start,
            metric,
            wall_time: raw.bool("run.wall_time", false)?,
            sweep_grid,
            sweep_axis,
            lemma,
        })
    }

    /// Canonical `key = value` lines of the resolved config.
    pub fn to_lines(&self) -> Vec<String> {
        let mut out: Vec<(&str, String)> = Vec::new();
        match &self.problem.kind {
            ProblemKind::Quadratic { dim, geometry, lmax, spectrum_decades } => {
                out.push(("problem.kind", "quadratic".into()));
                let g = match geometry {
                    MinGeometryKind::Box => "box",
                    MinGeometryKind::Ball => "ball",
                    MinGeometryKind::Simplex => "simplex",
                };
                out.push(("problem.geometry", g.into()));
                out.push(("problem.dim", dim.to_string()));
                out.push(("problem.lmax", lmax.to_string()));
                out.push(("problem.spectrum_decades", spectrum_decades.to_string()));
            }
            ProblemKind::Game { rows, cols, geometry } => {
                out.push(("problem.kind", "game".into()));
                let g = match geometry {
                    ViGeometryKind::Simplexes => "simplexes",
                    ViGeometryKind::Box => "box",
                };
                out.push(("problem.geometry", g.into()));
                out.push(("problem.rows", rows.to_string()));
                out.push(("problem.cols", cols.to_string()));
            }
            ProblemKind::MatchingPennies { actions } => {
                out.push(("problem.kind", "matching-pennies".into()));
                out.push(("problem.actions", actions.to_string()));
            }
        }
        out.push(("problem.noise", self.problem.noise.to_string()));
        out.push(("problem.seed", self.problem.seed.to_string()));
        match &self.chain.source {
            ChainSource::Generator { states, seed, laziness } => {
                out.push(("chain.kind", "generator".into()));
                out.push(("chain.states", states.to_string()));
                out.push(("chain.seed", seed.to_string()));
                out.push(("chain.laziness", laziness.to_string()));
            }
            ChainSource::Matrix(rows) => {
                out.push(("chain.kind", "matrix".into()));
                let m = rows
                    .iter()
                    .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join("; ");
                out.push(("chain.matrix", m));
            }
        }
        out.push(("chain.tau_mix", self.chain.tau_mix.map_or("auto".into(), |t| t.to_string())));
        out.push(("algorithm", self.algorithm.name().into()));
        match self.schedule {
            ScheduleSource::Corollary => out.push(("schedule", "corollary".into())),
            ScheduleSource::Explicit { gamma } => {
                out.push(("schedule", "explicit".into()));
                out.push(("schedule.gamma", gamma.to_string()));
            }
        }
        out.push(("run.iterations", self.iterations.to_string()));
        if self.algorithm.is_batched() {
            out.push(("run.batch", self.batch.map_or("auto".into(), |b| b.to_string())));
            out.push(("run.limit", self.limit.map_or("auto".into(), |m| m.to_string())));
        }
        out.push(("run.seeds", join(&self.seeds)));
        out.push(("run.stride", self.stride.to_string()));
        out.push(("run.start", if self.start == Start::Center { "center" } else { "origin" }.into()));
        out.push(("run.metric", if self.metric == Metric::Auto { "auto" } else { "none" }.into()));
        out.push(("run.wall_time", self.wall_time.to_string()));
        out.push(("sweep.grid", join(&self.sweep_grid)));
        out.push((
            "sweep.axis",
            if self.sweep_axis == SweepAxis::OracleCalls { "oracle_calls" } else { "iterations" }.into(),
        ));
        let l = &self.lemma;
        out.push(("lemma.trials", l.trials.to_string()));
        out.push(("lemma.unbiased_trials", l.unbiased_trials.to_string()));
        out.push(("lemma.replications", l.replications.to_string()));
        out.push(("lemma.seed", l.seed.to_string()));
        out.push(("lemma.tau_sweep", l.tau_sweep.to_string()));
        out.push(("lemma.n_grid", join(&l.n_grid)));
        out.push(("lemma.limit", l.limit.to_string()));
        out.push(("lemma.bias_limits", join(&l.bias_limits)));
        out.push(("lemma.var_batches", join(&l.var_batches)));
        out.push(("lemma.var_limits", join(&l.var_limits)));
        out.into_iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    /// Hex SHA-256 of the resolved config with the seed list removed, so that
    /// one seed's output file has the same name whatever the other seeds are.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for line in self.to_lines() {
            if !line.starts_with("run.seeds ") {
                h.update(line.as_bytes());
                h.update(b"\n");
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_seeds(&self, seeds: Vec<u64>) -> Self {
        Self { seeds, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.algorithm, Algorithm::MamdBatched);
        assert_eq!(c.seeds, vec![1]);
        assert_eq!(c.chain.tau_mix, None);
    }

    #[test]
    fn rendered_lines_parse_back() {
        let text = "problem.kind = game\nproblem.rows = 3\nalgorithm = mmp\nschedule = explicit\nschedule.gamma = 0.25\n\
                    chain.matrix = 0.9 0.1; 0.2 0.8\nrun.seeds = 3,1,2\n";
        let c = Config::parse(text).unwrap();
        let again = Config::parse(&c.to_lines().join("\n")).unwrap();
        assert_eq!(c.to_lines(), again.to_lines());
        assert_eq!(again.chain.source, ChainSource::Matrix(vec![vec![0.9, 0.1], vec![0.2, 0.8]]));
    }

    #[test]
    fn errors_name_the_line() {
        let e = Config::parse("problem.dim = 4\n\nproblem.dim = 5\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = Config::parse("# c\nbogus.key = 1\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = Config::parse("problem.noise = -1\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = Config::parse("problem.kind = quadratic\nalgorithm = mmp\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = Config::parse("sweep.grid = 8,4\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = Config::parse("no equals sign\n").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn output_header_is_a_config() {
        let c = Config::parse("problem.dim = 7\n").unwrap();
        let mut file = format!("{HEADER_TAG} 0.0.0\n");
        for l in c.to_lines() {
            file.push_str(&format!("# {l}\n"));
        }
        file.push_str("t,oracle_calls\n1,1\n");
        assert_eq!(Config::parse(&file).unwrap(), c);
    }

    #[test]
    fn hash_ignores_seed_list() {
        let a = Config::parse("run.seeds = 1,2").unwrap();
        let b = Config::parse("run.seeds = 5").unwrap();
        let c = Config::parse("run.seeds = 5\nproblem.dim = 3").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
