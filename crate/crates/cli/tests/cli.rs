use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kinopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinopt"))
        .args(["--threads", "1"])
        .args(args)
        .current_dir(dir)
        .env_remove("KINOPT_SEED")
        .output()
        .unwrap()
}

fn file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn sa_run_writes_trace_and_summary() {
    let d = tempfile::tempdir().unwrap();
    let o = kinopt(&["run", "--seed", "7", "--set", "algorithm=\"sa\"", "--set", "steps=5000", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&d.path().join("o"));
    assert!(s["best_energy"].as_f64().unwrap() < 2.0);
    assert_eq!(s["config"]["seed"], 7);
    let trace = std::fs::read_to_string(d.path().join("o/trace.csv")).unwrap();
    assert!(trace.starts_with("# {"));
}

#[test]
fn unknown_objective_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let c = file(d.path(), "c.toml", "algorithm = \"ga\"\nobjective = \"nope\"\n");
    let o = kinopt(&["run", "--config", c.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(2));
    let c = file(d.path(), "u.toml", "algorithm = \"ga\"\nbogus_key = 1\n");
    assert_eq!(kinopt(&["run", "--config", c.to_str().unwrap()], d.path()).status.code(), Some(2));
}

#[test]
fn classic_swarm_divergence_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let c = file(
        d.path(),
        "c.toml",
        "algorithm = \"pso\"\npso_variant = \"classic\"\nobjective = \"rastrigin\"\ndim = 2\nsteps = 20000\nrecord_every = 1000\n",
    );
    let o = kinopt(&["run", "--config", c.to_str().unwrap(), "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(3));
    let s = summary(&d.path().join("o"));
    assert!(s["diverged"].is_string());
    assert!(s["steps"].as_u64().unwrap() < 20000);
}

#[test]
fn seed_precedence() {
    let d = tempfile::tempdir().unwrap();
    let c = file(d.path(), "c.toml", "algorithm = \"sa\"\nsteps = 100\n");
    let run = |out: &str, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kinopt"));
        cmd.args(["run", "--config", c.to_str().unwrap(), "--out", out]).current_dir(d.path());
        match env {
            Some(v) => cmd.env("KINOPT_SEED", v),
            None => cmd.env_remove("KINOPT_SEED"),
        };
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        let o = cmd.output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        summary(&d.path().join(out))["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(run("a", None, None), 0);
    assert_eq!(run("b", Some("42"), None), 42);
    assert_eq!(run("c", Some("42"), Some("9")), 9);
    let c2 = file(d.path(), "c2.toml", "algorithm = \"sa\"\nsteps = 100\nseed = 3\n");
    let o = Command::new(env!("CARGO_BIN_EXE_kinopt"))
        .args(["run", "--config", c2.to_str().unwrap(), "--out", "d"])
        .env("KINOPT_SEED", "42")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(summary(&d.path().join("d"))["config"]["seed"], 3);

    let bad = Command::new(env!("CARGO_BIN_EXE_kinopt"))
        .args(["run", "--config", c.to_str().unwrap(), "--out", "e"])
        .env("KINOPT_SEED", "x")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn scale_reports_and_verdicts() {
    let d = tempfile::tempdir().unwrap();
    let bad = file(d.path(), "bad.toml", "kind = \"sa_diffusion\"\nscales = [\n");
    assert_eq!(kinopt(&["scale", "--config", bad.to_str().unwrap()], d.path()).status.code(), Some(2));
    assert_eq!(kinopt(&["scale"], d.path()).status.code(), Some(2));

    let ok = file(
        d.path(),
        "ok.toml",
        "kind = \"enkf_collapse\"\nscales = [1.0, 0.5]\nobjective = \"linear\"\nN = 100\nhorizon = 100.0\nseed = 1\nreplicates = 2\n",
    );
    let o = kinopt(&["scale", "--config", ok.to_str().unwrap(), "--out", "s"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("s/report.json")).unwrap()).unwrap();
    assert_eq!(r["rows"].as_array().unwrap().len(), 2);
    assert_eq!(r["config"]["kind"], "enkf_collapse");
    assert!(d.path().join("s/report.csv").exists());

    // one step is too short to reach the accuracy
    let short = file(
        d.path(),
        "short.toml",
        "kind = \"ga_contraction\"\nscales = [0.5]\nobjective = \"quadratic\"\ndim = 2\nN = 500\nhorizon = 1.0\nseed = 1\nreplicates = 2\n",
    );
    let o = kinopt(&["scale", "--config", short.to_str().unwrap(), "--out", "t"], d.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bench_rates_are_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let suite = file(
        d.path(),
        "suite.toml",
        "seed = 4\n[[runs]]\nalgorithm = \"cbo\"\nobjective = \"rastrigin\"\ndim = 2\nsteps = 200\nparticles = 200\nrepetitions = 3\n\
         [[runs]]\nalgorithm = \"sa\"\nsteps = 500\nrepetitions = 2\n",
    );
    for out in ["a", "b"] {
        let o = kinopt(&["bench", "--config", suite.to_str().unwrap(), "--out", out], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read_to_string(d.path().join("a/bench.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(d.path().join("b/bench.csv")).unwrap());
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let rate: f64 = r.split(',').nth(5).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }
    let empty = file(d.path(), "empty.toml", "seed = 1\n");
    assert_eq!(kinopt(&["bench", "--config", empty.to_str().unwrap()], d.path()).status.code(), Some(2));
}

#[test]
fn diag_writes_laplace_and_growth_tables() {
    let d = tempfile::tempdir().unwrap();
    let c = file(d.path(), "l.toml", "objective = \"doublewell1d\"\nreference_temperature = 0.25\n");
    let o = kinopt(&["diag", "--config", c.to_str().unwrap(), "--out", "l"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = std::fs::read_to_string(d.path().join("l/diag.csv")).unwrap();
    assert_eq!(t.lines().filter(|l| !l.starts_with('#')).count(), 5);

    let g = file(d.path(), "g.toml", "diagnostic = \"growth\"\nobjective = \"quadratic\"\n");
    assert_eq!(kinopt(&["diag", "--config", g.to_str().unwrap()], d.path()).status.code(), Some(2));
}
