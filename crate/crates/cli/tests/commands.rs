use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_markov-mirror"));
    c.env_remove("MM_DETERMINISTIC");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn files_with_prefix(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    v.sort();
    v
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

const MINIMAL: &str = "problem.noise = 0\nrun.iterations = 100\n";

#[test]
fn run_writes_one_row_per_stride() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", MINIMAL);
    let out = run(&["run", "--stride", "10"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = files_with_prefix(dir.path(), "run-");
    assert_eq!(runs.len(), 1);
    assert!(runs[0].to_str().unwrap().ends_with("-seed1.csv"));
    let text = fs::read_to_string(&runs[0]).unwrap();
    assert!(text.starts_with("# markov-mirror "));
    let rows = data_lines(&text);
    assert_eq!(rows[0], "t,oracle_calls,chain_steps,gap,wall_ms");
    assert_eq!(rows.len(), 1 + 10);
    assert!(rows[10].starts_with("100,"));
    // 17 significant digits.
    let gap = rows[10].split(',').nth(3).unwrap();
    assert_eq!(gap.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn runs_are_reproducible_across_jobs_and_from_their_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", "problem.noise = 0.5\nrun.iterations = 200\nrun.seeds = 1,2,3,4\n");
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(run(&["run", "--jobs", "4"], &cfg, &a).status.success());
    let det = bin()
        .args(["run", "--jobs", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .env("MM_DETERMINISTIC", "1")
        .output()
        .unwrap();
    assert!(det.status.success());
    let fa = files_with_prefix(&a, "");
    let fb = files_with_prefix(&b, "");
    assert_eq!(fa.len(), 5);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    // A run file is itself a config reproducing that file.
    let seed3 = fa.iter().find(|p| p.to_str().unwrap().ends_with("-seed3.csv")).unwrap();
    assert!(run(&["run"], seed3, &c).status.success());
    let again = c.join(seed3.file_name().unwrap());
    assert_eq!(fs::read(seed3).unwrap(), fs::read(again).unwrap());
}

#[test]
fn summary_reports_the_computed_mixing_time() {
    let dir = TempDir::new().unwrap();
    let text = "chain.matrix = 0.9 0.1; 0.2 0.8\nproblem.dim = 3\nrun.iterations = 50\nrun.seeds = 1,2,3\n";
    let cfg = write_config(dir.path(), "a.cfg", text);
    let diag = run(&["diagnose-chain"], &cfg, dir.path());
    assert!(diag.status.success());
    let diag = String::from_utf8(diag.stdout).unwrap();
    assert!(data_lines(&diag).contains(&"tau_mix,0,3"));

    assert!(run(&["run"], &cfg, dir.path()).status.success());
    let summary = fs::read_to_string(&files_with_prefix(dir.path(), "summary-")[0]).unwrap();
    let rows = data_lines(&summary);
    assert!(rows.contains(&"tau_mix,3"));
    assert!(rows.contains(&"seeds,3"));
    assert!(rows.iter().any(|r| r.starts_with("iqr_final_gap,")));
}

#[test]
fn diagnose_chain_cases() {
    let dir = TempDir::new().unwrap();
    let uniform = write_config(dir.path(), "u.cfg", "chain.matrix = 0.5 0.5; 0.5 0.5\n");
    let out = run(&["diagnose-chain"], &uniform, dir.path());
    assert!(data_lines(&String::from_utf8(out.stdout).unwrap()).contains(&"tau_mix,0,1"));
    let periodic = write_config(dir.path(), "p.cfg", "chain.matrix = 0 1; 1 0\n");
    assert_eq!(run(&["diagnose-chain"], &periodic, dir.path()).status.code(), Some(4));
    let bad = write_config(dir.path(), "b.cfg", "# kernel\n\nchain.matrix = 0.5 0.6; 0.5 0.5\n");
    let out = run(&["diagnose-chain"], &bad, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn config_errors_exit_two_with_the_line() {
    let dir = TempDir::new().unwrap();
    for (text, line) in [
        ("problem.dim = 4\nproblem.seed = x\n", 2),
        ("problem.kind = game\nalgorithm = mamd\n", 2),
        ("\n\nnot.a.key = 1\n", 3),
        ("run.stride = 0\n", 1),
        ("sweep.grid =\n", 1),
    ] {
        let cfg = write_config(dir.path(), "bad.cfg", text);
        let out = run(&["run"], &cfg, dir.path());
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("line {line}")), "{text}");
    }
    let cfg = write_config(dir.path(), "origin.cfg", "problem.geometry = simplex\nrun.start = origin\n");
    assert_eq!(run(&["run"], &cfg, dir.path()).status.code(), Some(2));
    assert!(files_with_prefix(dir.path(), "run-").is_empty());
}

#[test]
fn variational_runs() {
    let dir = TempDir::new().unwrap();
    for alg in ["mmp", "mmp-batched"] {
        let text = format!("problem.kind = matching-pennies\nalgorithm = {alg}\nrun.iterations = 64\nrun.seeds = 2\n");
        let cfg = write_config(dir.path(), "vi.cfg", &text);
        let out = run(&["run", "--stride", "8"], &cfg, &dir.path().join(alg));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(&files_with_prefix(&dir.path().join(alg), "run-")[0]).unwrap();
        let rows = data_lines(&text);
        assert_eq!(rows.len(), 1 + 8);
        let gap: f64 = rows[8].split(',').nth(3).unwrap().parse().unwrap();
        assert!(gap.is_finite() && gap >= 0.0);
    }
}

#[test]
fn sweep_of_noiseless_batched_mamd_fits_the_accelerated_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "problem.noise = 0\nsweep.axis = iterations\n");
    let out = run(&["sweep"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = fs::read_to_string(&files_with_prefix(dir.path(), "fit-")[0]).unwrap();
    let row = data_lines(&fit)[1];
    let slope: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((-2.3..=-1.7).contains(&slope), "slope {slope}");
    let sweep = fs::read_to_string(&files_with_prefix(dir.path(), "sweep-")[0]).unwrap();
    assert_eq!(data_lines(&sweep).len(), 1 + 7);

    let short = write_config(dir.path(), "short.cfg", "sweep.grid = 64\n");
    assert_eq!(run(&["sweep"], &short, dir.path()).status.code(), Some(2));
}

#[test]
fn lemma_checks() {
    let dir = TempDir::new().unwrap();
    let quiet = write_config(dir.path(), "q.cfg", "problem.noise = 0\nproblem.dim = 4\nlemma.unbiased_trials = 2000\n");
    for cmd in ["check-lemma1", "check-lemma2"] {
        let out = run(&[cmd], &quiet, dir.path());
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stdout));
    }
    let noisy = write_config(dir.path(), "n.cfg", "problem.dim = 8\n");
    let out = run(&["check-lemma1"], &noisy, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = fs::read_to_string(files_with_prefix(dir.path(), "lemma1-").last().unwrap()).unwrap();
    assert!(data_lines(&report).iter().filter(|l| l.starts_with("base,")).count() == 9);

    let thin = write_config(dir.path(), "t.cfg", "lemma.trials = 1\n");
    assert_eq!(run(&["check-lemma1"], &thin, dir.path()).status.code(), Some(5));
    let vi = write_config(dir.path(), "v.cfg", "problem.kind = game\n");
    assert_eq!(run(&["check-lemma2"], &vi, dir.path()).status.code(), Some(2));
}
