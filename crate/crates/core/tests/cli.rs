use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const GEO: &str = "\
locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).
neighOf(it,fr).
neighOf(fr,it).
locIn(fr,eu).
locIn(tr,gr).
locIn(gr,eu).
";

const QUERIES: &str = "locIn(it,eu)\t1\nlocIn(tr,eu)\t1\nlocIn(eu,tr)\t0\n";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dproflog"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// A geography config in `dir` writing to `dir/out`, with extra lines appended.
fn geo_config(dir: &Path, extra: &str) -> PathBuf {
    fs::write(dir.join("geo.pl"), GEO).unwrap();
    fs::write(dir.join("queries.tsv"), QUERIES).unwrap();
    let path = dir.join("run.conf");
    fs::write(
        &path,
        format!("task = program\nprogram = geo.pl\nqueries = queries.tsv\ndim = 4\nlr = 0.05\nepochs = 4\nmax_depth = 6\nseed = 3\noutput_dir = out\n{extra}"),
    )
    .unwrap();
    path
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|v| v.trim().parse().ok()))
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["train", "--config", "x"])), 1);
    assert_eq!(code(&run(&["eval"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let conf = geo_config(dir.path(), "");
    let o = run(&[
        "eval",
        "--config",
        conf.to_str().unwrap(),
        "--override",
        "no_such_key=1",
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let conf = geo_config(dir.path(), "");
    fs::write(dir.path().join("geo.pl"), "locIn(X,Y) :- neighOf(X,Z)\n").unwrap();
    assert_eq!(code(&run(&["dp-train", "--config", conf.to_str().unwrap()])), 2);
    fs::remove_file(dir.path().join("geo.pl")).unwrap();
    assert_eq!(code(&run(&["dp-train", "--config", conf.to_str().unwrap()])), 2);
}

#[test]
fn state_cap_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let conf = geo_config(dir.path(), "state_cap = 2\n");
    let o = run(&["dp-train", "--config", conf.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn training_is_deterministic_and_resumes_exactly() {
    let full = tempfile::tempdir().unwrap();
    let conf = geo_config(full.path(), "");
    assert_eq!(code(&run(&["dp-train", "--config", conf.to_str().unwrap()])), 0);

    let again = tempfile::tempdir().unwrap();
    let conf2 = geo_config(again.path(), "");
    assert_eq!(code(&run(&["dp-train", "--config", conf2.to_str().unwrap()])), 0);
    assert_eq!(
        read(full.path(), "checkpoint.txt"),
        read(again.path(), "checkpoint.txt")
    );
    assert_eq!(read(full.path(), "metrics.txt"), read(again.path(), "metrics.txt"));

    let split = tempfile::tempdir().unwrap();
    let conf3 = geo_config(split.path(), "");
    let c = conf3.to_str().unwrap();
    assert_eq!(code(&run(&["dp-train", "--config", c, "--override", "epochs=2"])), 0);
    let o = run(&[
        "dp-train",
        "--config",
        c,
        "--override",
        "resume=true",
        "--override",
        "checkpoint=out/checkpoint.txt",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        read(full.path(), "checkpoint.txt"),
        read(split.path(), "checkpoint.txt")
    );
    assert_eq!(read(full.path(), "metrics.txt"), read(split.path(), "metrics.txt"));
}

#[test]
fn eval_reads_the_trained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let conf = geo_config(dir.path(), "epochs = 20\n");
    let c = conf.to_str().unwrap();
    assert_eq!(code(&run(&["dp-train", "--config", c])), 0);
    assert_eq!(code(&run(&["eval", "--config", c, "--override", "model=uniform"])), 0);
    let uniform = value(&read(dir.path(), "metrics.txt"), "loss");
    assert_eq!(
        code(&run(&[
            "eval",
            "--config",
            c,
            "--override",
            "checkpoint=out/checkpoint.txt"
        ])),
        0
    );
    let trained = value(&read(dir.path(), "metrics.txt"), "loss");
    assert!(trained < uniform, "{trained} vs {uniform}");
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let conf = geo_config(dir.path(), "");
    let o = run(&["oracle-check", "--config", conf.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(dir.path(), "oracle.txt").contains("ok"));
}

#[test]
fn monte_carlo_estimate_agrees_with_dp() {
    let dir = tempfile::tempdir().unwrap();
    let conf = geo_config(dir.path(), "query = locIn(it,eu)\nmodel = uniform\n");
    let c = conf.to_str().unwrap();
    assert_eq!(code(&run(&["prove", "--config", c, "--override", "estimator=dp"])), 0);
    let report = read(dir.path(), "prove.txt");
    let exact = value(&report, "probability");
    assert!(value(&report, "proofs_found") >= 1.0);
    let proof = read(dir.path(), "proof.txt");
    assert!(proof.starts_with("query: locIn(it, eu)\n"), "{proof}");

    assert_eq!(
        code(&run(&[
            "prove",
            "--config",
            c,
            "--override",
            "estimator=mc",
            "--override",
            "mc_samples=20000"
        ])),
        0
    );
    let report = read(dir.path(), "prove.txt");
    let (p, se) = (value(&report, "probability"), value(&report, "stderr"));
    assert!((p - exact).abs() <= 3.0 * se, "mc {p} ± {se} vs dp {exact}");
}

#[test]
fn constant_scores_with_random_ties_rank_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("kg.conf");
    fs::write(
        &conf,
        "task = kg\nmodel = constant\ntie = random\nmax_depth = 5\noutput_dir = out\n",
    )
    .unwrap();
    let o = run(&["eval", "--config", conf.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read(dir.path(), "metrics.txt");
    let mrr = value(&m, "mrr");
    assert!(mrr < 0.5, "{m}");
    let ranks = read(dir.path(), "ranks.tsv");
    assert!(ranks.lines().count() >= 4);
}
