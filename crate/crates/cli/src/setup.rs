//! Turns a [`Config`] into a chain, a problem instance and single runs.

use std::sync::Arc;

use markov_mirror::chain::{mixing_time, random_ergodic, stationary, ChainCursor, TransitionKernel, MIXING_THRESHOLD};
use markov_mirror::estimators::MlmcConfig;
use markov_mirror::geometry::{Geometry, Point};
use markov_mirror::problems::{
    make_min_instance, make_vi_instance, matching_pennies, Instance, MinSpec, ViSpec,
};
use markov_mirror::solvers::{
    corollary1_schedule, corollary2_schedule, corollary3_gamma, corollary4_params, mamd_batched, mamd_unbatched,
    mmp_batched, mmp_unbatched, MamdSchedule, RunOptions, RunRecord,
};
use markov_mirror::validation::{derive_seed, err_vi, subopt_gap};
use markov_mirror::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Algorithm, ChainSource, Config, ConfigError, Metric, ProblemKind, ScheduleSource, Start};
use crate::CliError;

/// Chain and instance shared by every run of one config.
pub struct Setup {
    pub kernel: Arc<TransitionKernel>,
    pub pi: Vec<f64>,
    pub tau_mix: usize,
    pub instance: Instance,
}

pub fn build_kernel(cfg: &Config) -> Result<TransitionKernel, CliError> {
    match &cfg.chain.source {
        ChainSource::Generator { states, seed, laziness } => {
            Ok(random_ergodic(*states, *seed).and_then(|k| k.make_lazy(*laziness)).map_err(|e| {
                CliError::Config(ConfigError::global(format!("chain generator: {e}")))
            })?)
        }
        ChainSource::Matrix(rows) => TransitionKernel::new(rows.clone()).map_err(|e| {
            CliError::Config(ConfigError { line: cfg.chain.matrix_line, msg: format!("`chain.matrix`: {e}") })
        }),
    }
}

/// Validates everything a run needs before any run starts.
pub fn build(cfg: &Config) -> Result<Setup, CliError> {
    let kernel = build_kernel(cfg)?;
    let pi = stationary(&kernel)?;
    let tau_mix = match cfg.chain.tau_mix {
        Some(t) => t,
        None => mixing_time(&kernel, MIXING_THRESHOLD)?,
    };
    let p = &cfg.problem;
    let instance = match &p.kind {
        ProblemKind::Quadratic { dim, geometry, lmax, spectrum_decades } => {
            let mut spec = MinSpec::new(*dim, *geometry, p.noise, p.seed);
            spec.lmax = *lmax;
            spec.spectrum_decades = *spectrum_decades;
            Instance::Min(make_min_instance(&spec, &pi)?)
        }
        ProblemKind::Game { rows, cols, geometry } => {
            let spec = ViSpec { rows: *rows, cols: *cols, geometry: *geometry, noise: p.noise, seed: p.seed };
            Instance::Vi(make_vi_instance(&spec, &pi)?)
        }
        ProblemKind::MatchingPennies { actions } => Instance::Vi(matching_pennies(*actions, p.noise, &pi, p.seed)?),
    };
    let setup = Setup { kernel: Arc::new(kernel), pi, tau_mix, instance };
    start_point(cfg, setup.geometry())?;
    if let (Instance::Vi(q), Metric::Auto) = (&setup.instance, cfg.metric) {
        if !q.is_skew() {
            return Err(Error::UnsupportedMetric("the operator is not skew; set `run.metric = none`".into()).into());
        }
    }
    Ok(setup)
}

impl Setup {
    pub fn geometry(&self) -> &Geometry {
        match &self.instance {
            Instance::Min(p) => p.geometry(),
            Instance::Vi(q) => q.geometry(),
        }
    }

    /// Gap metric of a reported point.
    pub fn gap(&self, metric: Metric, x: &[f64]) -> f64 {
        match (metric, &self.instance) {
            (Metric::None, _) => f64::NAN,
            (Metric::Auto, Instance::Min(p)) => subopt_gap(p, x),
            (Metric::Auto, Instance::Vi(q)) => err_vi(q, x).unwrap_or(f64::NAN),
        }
    }

    /// Expected oracle calls of `T` iterations.
    pub fn expected_calls(&self, cfg: &Config, horizon: usize) -> Result<f64, CliError> {
        let t = horizon as f64;
        Ok(match cfg.algorithm {
            Algorithm::Mamd => t,
            Algorithm::Mmp => 2.0 * t,
            Algorithm::MamdBatched => t * self.mlmc(cfg, horizon)?.expected_oracle_calls(),
            Algorithm::MmpBatched => {
                let m = self.mlmc(cfg, horizon)?;
                t * (m.batch() as f64 + m.expected_oracle_calls())
            }
        })
    }

    fn constants(&self) -> (f64, f64, f64, f64) {
        match &self.instance {
            Instance::Min(p) => (p.lipschitz(), p.lipschitz(), p.geometry().diameter(), p.sigma()),
            Instance::Vi(q) => (q.lipschitz(), q.lipschitz_tilde(), q.geometry().diameter(), q.sigma()),
        }
    }

    /// Default `M = T`, `B = 1`, unless the config overrides them.
    fn mlmc(&self, cfg: &Config, horizon: usize) -> Result<MlmcConfig, CliError> {
        Ok(MlmcConfig::new(cfg.batch.unwrap_or(1), cfg.limit.unwrap_or(horizon as u64))?)
    }

    /// One run of `horizon` iterations. The chain cursor and the level RNG
    /// are seeded from `seed` through independent streams.
    pub fn run(&self, cfg: &Config, horizon: usize, seed: u64) -> Result<RunRecord, CliError> {
        let mut cursor = ChainCursor::stationary(self.kernel.clone(), &self.pi, derive_seed(seed, 1))?;
        let mut level_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
        let mut opts = RunOptions {
            stride: cfg.stride,
            x0: Some(start_point(cfg, self.geometry())?),
            keep_trajectory: false,
            wall_time: cfg.wall_time,
            avg_start: 0,
        };
        let metric = cfg.metric;
        let mut gap = |x: &[f64]| self.gap(metric, x);
        let (l, l_tilde, d, sigma) = self.constants();
        let tau = self.tau_mix;
        let record = match (&self.instance, cfg.algorithm) {
            (Instance::Min(p), Algorithm::Mamd) => {
                let sched = match cfg.schedule {
                    ScheduleSource::Corollary => corollary1_schedule(l, d, sigma, tau, horizon)?,
                    ScheduleSource::Explicit { gamma } => MamdSchedule::shifted(gamma, tau)?,
                };
                mamd_unbatched(p, &sched, &mut cursor, horizon, &opts, &mut gap)?
            }
            (Instance::Min(p), Algorithm::MamdBatched) => {
                let sched = match cfg.schedule {
                    ScheduleSource::Corollary => corollary2_schedule(l, d, sigma, tau, horizon)?.0,
                    ScheduleSource::Explicit { gamma } => MamdSchedule::shifted(gamma, 0)?,
                };
                let mlmc = self.mlmc(cfg, horizon)?;
                mamd_batched(p, &sched, &mut cursor, &mlmc, horizon, &mut level_rng, &opts, &mut gap)?
            }
            (Instance::Vi(q), Algorithm::Mmp) => {
                let gamma = match cfg.schedule {
                    ScheduleSource::Corollary => corollary3_gamma(l_tilde, d, sigma, tau, horizon)?,
                    ScheduleSource::Explicit { gamma } => gamma,
                };
                opts.avg_start = tau;
                mmp_unbatched(q, gamma, &mut cursor, horizon, &opts, &mut gap)?
            }
            (Instance::Vi(q), Algorithm::MmpBatched) => {
                let gamma = match cfg.schedule {
                    ScheduleSource::Corollary => corollary4_params(l, d, sigma, tau, horizon)?.0,
                    ScheduleSource::Explicit { gamma } => gamma,
                };
                let mlmc = self.mlmc(cfg, horizon)?;
                mmp_batched(q, gamma, &mut cursor, &mlmc, horizon, &mut level_rng, &opts, &mut gap)?
            }
            _ => unreachable!("algorithm and problem family are matched when the config is parsed"),
        };
        Ok(record)
    }
}

fn start_point(cfg: &Config, g: &Geometry) -> Result<Point, CliError> {
    match cfg.start {
        Start::Center => Ok(g.center()),
        Start::Origin => g.point(vec![0.0; g.dim()]).map_err(|_| {
            CliError::Config(ConfigError::global("`run.start = origin`: the origin is not a feasible point"))
        }),
    }
}
