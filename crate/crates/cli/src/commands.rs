use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use markov_mirror::chain::{diagnose, MIXING_THRESHOLD};
use markov_mirror::problems::Instance;
use markov_mirror::solvers::RunRecord;
use markov_mirror::validation::{
    lemma1_scaling, lemma2_check, median, quantile, rate_fit, GapReport, Lemma1Config, Lemma2Config, ScalingReport,
};
use rayon::prelude::*;

use crate::config::{Config, ConfigError, Metric, SweepAxis, HEADER_TAG};
use crate::setup::{build, build_kernel};
use crate::CliError;

/// Window for the fitted exponent of the averaged-noise scaling.
const LEMMA1_EXPONENT: (f64, f64) = (-1.2, -0.8);
/// Window for the ratio of fitted constants after doubling the mixing time.
const LEMMA1_RATIO: (f64, f64) = (1.4, 3.0);
/// Largest admissible exponent of the squared bias in `M`.
const LEMMA2_BIAS_EXPONENT_MAX: f64 = -0.7;
/// Paired-difference z-score limit of the unbiasedness check.
const LEMMA2_Z_MAX: f64 = 4.0;
/// Paired differences this small are rounding, not bias.
const ROUNDING_DIFF: f64 = 1e-12;

pub struct Env {
    pub jobs: usize,
    pub out: PathBuf,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comment header: version line, then the resolved config.
fn header(cfg: &Config) -> String {
    let mut s = format!("{HEADER_TAG} {}\n", env!("CARGO_PKG_VERSION"));
    for line in cfg.to_lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))
}

pub fn run_csv(cfg: &Config, seed: u64, rec: &RunRecord) -> String {
    let mut s = header(&cfg.with_seeds(vec![seed]));
    s.push_str("t,oracle_calls,chain_steps,gap,wall_ms\n");
    for r in &rec.rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.t, r.oracle_calls, r.chain_steps, fmt_f(r.gap), fmt_f(r.wall_ms));
    }
    s
}

pub fn cmd_run(cfg: &Config, env: &Env) -> Result<(), CliError> {
    let setup = build(cfg)?;
    let runs: Vec<_> = pool(env.jobs)?
        .install(|| cfg.seeds.par_iter().map(|&s| setup.run(cfg, cfg.iterations, s)).collect());
    let hash = cfg.hash();
    let mut finals = Vec::new();
    for (&seed, rec) in cfg.seeds.iter().zip(runs) {
        let rec = rec?;
        let path = env.out.join(format!("run-{hash}-seed{seed}.csv"));
        write_file(&path, &run_csv(cfg, seed, &rec))?;
        println!("wrote {}", path.display());
        finals.push((seed, setup.gap(cfg.metric, &rec.final_point), rec.oracle_calls));
    }

    let gaps: Vec<f64> = finals.iter().map(|f| f.1).collect();
    let (q25, q50, q75) = (quantile(&gaps, 0.25), median(&gaps), quantile(&gaps, 0.75));
    let mut s = header(cfg);
    s.push_str("statistic,value\n");
    let _ = writeln!(s, "tau_mix,{}", setup.tau_mix);
    let _ = writeln!(s, "seeds,{}", finals.len());
    let _ = writeln!(s, "median_final_gap,{}", fmt_f(q50));
    let _ = writeln!(s, "q25_final_gap,{}", fmt_f(q25));
    let _ = writeln!(s, "q75_final_gap,{}", fmt_f(q75));
    let _ = writeln!(s, "iqr_final_gap,{}", fmt_f(q75 - q25));
    for (seed, gap, calls) in &finals {
        let _ = writeln!(s, "final_gap_seed_{seed},{}", fmt_f(*gap));
        let _ = writeln!(s, "oracle_calls_seed_{seed},{calls}");
    }
    let path = env.out.join(format!("summary-{hash}.csv"));
    write_file(&path, &s)?;
    println!("wrote {}", path.display());
    println!("tau_mix {}  median final gap {}  IQR {}", setup.tau_mix, fmt_f(q50), fmt_f(q75 - q25));
    Ok(())
}

pub fn cmd_sweep(cfg: &Config, env: &Env) -> Result<(), CliError> {
    if cfg.metric == Metric::None {
        return Err(CliError::Config(ConfigError::global("`sweep` needs a gap metric (`run.metric = auto`)")));
    }
    let setup = build(cfg)?;
    let jobs: Vec<(usize, u64)> =
        cfg.sweep_grid.iter().flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s))).collect();
    // Only the final iterate matters here.
    let quiet = Config { stride: usize::MAX, wall_time: false, ..cfg.clone() };
    let finals: Vec<_> = pool(env.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(t, s)| setup.run(&quiet, t, s).map(|r| setup.gap(cfg.metric, &r.final_point)))
            .collect()
    });
    let finals: Vec<f64> = finals.into_iter().collect::<Result<_, _>>()?;

    let n = cfg.seeds.len();
    let mut budgets = Vec::new();
    for &t in &cfg.sweep_grid {
        budgets.push(match cfg.sweep_axis {
            SweepAxis::Iterations => t as f64,
            SweepAxis::OracleCalls => setup.expected_calls(cfg, t)?,
        });
    }
    let values: Vec<Vec<f64>> = finals.chunks(n).map(|c| c.to_vec()).collect();
    let metric = match setup.instance {
        Instance::Min(_) => "subopt_gap",
        Instance::Vi(_) => "err_vi",
    };
    let report = GapReport::new(metric, budgets.clone(), values)?;
    let fit = rate_fit(&report)?;

    let hash = cfg.hash();
    let mut s = header(cfg);
    s.push_str("iterations,budget,seed,final_gap\n");
    for (i, &t) in cfg.sweep_grid.iter().enumerate() {
        for (j, &seed) in cfg.seeds.iter().enumerate() {
            let _ = writeln!(s, "{t},{},{seed},{}", fmt_f(budgets[i]), fmt_f(finals[i * n + j]));
        }
    }
    let path = env.out.join(format!("sweep-{hash}.csv"));
    write_file(&path, &s)?;
    println!("wrote {}", path.display());

    let mut s = header(cfg);
    s.push_str("metric,axis,slope,ci_low,ci_high,intercept,excluded\n");
    let axis = if cfg.sweep_axis == SweepAxis::OracleCalls { "oracle_calls" } else { "iterations" };
    let excluded = fit.excluded.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(";");
    let _ = writeln!(
        s,
        "{metric},{axis},{},{},{},{},{excluded}",
        fmt_f(fit.slope),
        fmt_f(fit.ci.0),
        fmt_f(fit.ci.1),
        fmt_f(fit.intercept)
    );
    let path = env.out.join(format!("fit-{hash}.csv"));
    write_file(&path, &s)?;
    println!("wrote {}", path.display());
    println!("tau_mix {}  slope {:.4}  95% CI [{:.4}, {:.4}]", setup.tau_mix, fit.slope, fit.ci.0, fit.ci.1);
    Ok(())
}

pub fn cmd_diagnose_chain(cfg: &Config) -> Result<(), CliError> {
    let kernel = build_kernel(cfg)?;
    let diag = diagnose(&kernel, MIXING_THRESHOLD)?;
    let mut s = header(cfg);
    s.push_str("quantity,index,value\n");
    let _ = writeln!(s, "tau_mix,0,{}", diag.tau_mix);
    for (i, p) in diag.pi.iter().enumerate() {
        let _ = writeln!(s, "pi,{i},{}", fmt_f(*p));
    }
    for (t, tv) in &diag.tv_curve {
        let _ = writeln!(s, "tv,{t},{}", fmt_f(*tv));
    }
    print!("{s}");
    Ok(())
}

fn scaling_rows(s: &mut String, label: &str, rep: &ScalingReport) {
    for c in &rep.cells {
        let params = rep
            .param_names
            .iter()
            .zip(&c.params)
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(s, "{label},{},{params},{},{},{}", rep.statistic, fmt_f(c.value), fmt_f(c.se), c.trials);
    }
}

fn fit_rows(s: &mut String, label: &str, rep: &ScalingReport) {
    if let Some(f) = &rep.exponent {
        let _ = writeln!(s, "# fit {label}: exponent {} ci [{}, {}]", fmt_f(f.slope), fmt_f(f.ci.0), fmt_f(f.ci.1));
    }
}

fn in_window(v: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&v)
}

fn verdict(checks: &[(String, bool)]) -> Result<(), CliError> {
    for (what, ok) in checks {
        println!("{}: {what}", if *ok { "PASS" } else { "FAIL" });
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.join("; ")))
    }
}

pub fn cmd_check_lemma1(cfg: &Config, env: &Env) -> Result<(), CliError> {
    let setup = build(cfg)?;
    let (noise, geometry) = match &setup.instance {
        Instance::Min(p) => (p.shifts(), p.geometry()),
        Instance::Vi(q) => (q.shifts(), q.geometry()),
    };
    let lc = Lemma1Config {
        n_grid: cfg.lemma.n_grid.clone(),
        trials: cfg.lemma.trials,
        replications: cfg.lemma.replications,
        seed: cfg.lemma.seed,
        tau_sweep: cfg.lemma.tau_sweep,
    };
    let rep = lemma1_scaling(&setup.kernel, noise, geometry, &lc)?;

    let mut s = header(cfg);
    if let Some((lazy, tau, alpha)) = &rep.lazy {
        let _ = writeln!(s, "# lazy chain: tau_mix {tau}, laziness {alpha}");
        fit_rows(&mut s, "lazy", lazy);
    }
    fit_rows(&mut s, "base", &rep.base);
    s.push_str("chain,statistic,params,value,se,trials\n");
    scaling_rows(&mut s, "base", &rep.base);
    if let Some((lazy, _, _)) = &rep.lazy {
        scaling_rows(&mut s, "lazy", lazy);
    }
    let path = env.out.join(format!("lemma1-{}.csv", cfg.hash()));
    write_file(&path, &s)?;
    println!("wrote {}", path.display());

    let mut checks = Vec::new();
    match &rep.base.exponent {
        None => checks.push(("all cells are zero".to_string(), true)),
        Some(f) => {
            checks.push((
                format!("exponent in N {:.4}, window [{}, {}]", f.slope, LEMMA1_EXPONENT.0, LEMMA1_EXPONENT.1),
                in_window(f.slope, LEMMA1_EXPONENT),
            ));
            if let (Some(ratio), Some((_, tau, _))) = (rep.constant_ratio, &rep.lazy) {
                checks.push((
                    format!(
                        "constant ratio {ratio:.4} for tau_mix {} -> {tau}, window [{}, {}]",
                        rep.tau_mix, LEMMA1_RATIO.0, LEMMA1_RATIO.1
                    ),
                    in_window(ratio, LEMMA1_RATIO),
                ));
            }
        }
    }
    verdict(&checks)
}

pub fn cmd_check_lemma2(cfg: &Config, env: &Env) -> Result<(), CliError> {
    let setup = build(cfg)?;
    let Instance::Min(p) = &setup.instance else {
        return Err(CliError::Config(ConfigError::global("`check-lemma2` needs `problem.kind = quadratic`")));
    };
    let l = &cfg.lemma;
    let lc = Lemma2Config {
        unbiased_trials: l.unbiased_trials,
        unbiased_batch: 1,
        unbiased_limit: l.limit,
        bias_limits: l.bias_limits.clone(),
        bias_batch: 1,
        var_batches: l.var_batches.clone(),
        var_limits: l.var_limits.clone(),
        var_trials: l.trials,
        tau_sweep: l.tau_sweep,
        replications: l.replications,
        seed: l.seed,
    };
    let x = p.geometry().center();
    let rep = lemma2_check(p, &x, &setup.kernel, &lc)?;

    let mut s = header(cfg);
    fit_rows(&mut s, "bias", &rep.bias);
    fit_rows(&mut s, "variance", &rep.variance);
    s.push_str("part,statistic,params,value,se,trials\n");
    let u = &rep.unbiased;
    for (i, (m, se)) in u.mean_diff.iter().zip(&u.se).enumerate() {
        let _ = writeln!(s, "unbiased,mean_diff,coord={i},{},{},{}", fmt_f(*m), fmt_f(*se), u.trials);
    }
    scaling_rows(&mut s, "bias", &rep.bias);
    scaling_rows(&mut s, "variance", &rep.variance);
    let path = env.out.join(format!("lemma2-{}.csv", cfg.hash()));
    write_file(&path, &s)?;
    println!("wrote {}", path.display());

    let z_ok = u.mean_diff.iter().zip(&u.se).all(|(m, se)| m.abs() <= ROUNDING_DIFF || m.abs() <= LEMMA2_Z_MAX * se);
    let mut checks = vec![(
        format!("unbiasedness: max |diff|/SE {:.3} over {} paired trials, limit {LEMMA2_Z_MAX}", u.max_z, u.trials),
        z_ok,
    )];
    match &rep.bias.exponent {
        None => checks.push(("squared bias is zero".into(), true)),
        Some(f) => checks.push((
            format!("squared-bias exponent in M {:.4}, at most {LEMMA2_BIAS_EXPONENT_MAX}", f.slope),
            f.slope <= LEMMA2_BIAS_EXPONENT_MAX,
        )),
    }
    checks.push(("variance nonincreasing in B".into(), rep.variance_monotone_in_b));
    verdict(&checks)
}
