use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_branchmax"))
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn paper_suite(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../paper_suite").join(name)
}

const SMALL_MC: &str = r#"
id = "small"
seed = 7
replicates = 2000

[experiment]
kind = "ecdf-vs-exact"
n = 8

[experiment.process]
process = "plain"
offspring = { law = "geometric", p = 0.6 }
"#;

fn summary_rows(out: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn shipped_subcritical_experiment_passes() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["verify"], &paper_suite("ex1_subcritical_geometric.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = summary_rows(tmp.path());
    assert_eq!(rows[0], ["experiment_id", "kind", "n", "sup_distance", "tolerance", "pass"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "ex1_subcritical_geometric");
    assert_eq!(rows[1][5], "true");
    let resolved = fs::read_to_string(tmp.path().join("ex1_subcritical_geometric.resolved.toml")).unwrap();
    assert!(resolved.contains("replicates = 100000") && resolved.contains("seed = 0"), "{resolved}");
}

#[test]
fn too_few_replicates_for_a_tight_tolerance_exit_1() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL_MC.replace("replicates = 2000", "replicates = 100").replace("n = 8", "n = 8\ntolerance = 0.01");
    let cfg = write(tmp.path(), "tight.toml", &text);
    let o = run(&["verify"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("FAIL small") && stdout.contains("below the DKW band"), "{stdout}");
    assert_eq!(summary_rows(tmp.path())[1][5], "false");
    let json = fs::read_to_string(tmp.path().join("small.json")).unwrap();
    assert!(json.contains("\"justification\": \"dkw\""), "{json}");
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL_MC);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["verify"], &cfg, &a).status.code(), Some(0));
    assert_eq!(
        bin()
            .args(["verify", "--jobs", "1", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&b)
            .output()
            .unwrap()
            .status
            .code(),
        Some(0)
    );
    for f in ["small.json", "small.csv", "small.resolved.toml", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    // a different seed changes the sample
    let c = tmp.path().join("c");
    assert_eq!(
        bin()
            .args(["verify", "--seed", "8", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&c)
            .output()
            .unwrap()
            .status
            .code(),
        Some(0)
    );
    assert_ne!(fs::read(a.join("small.csv")).unwrap(), fs::read(c.join("small.csv")).unwrap());
    assert!(fs::read_to_string(c.join("small.resolved.toml")).unwrap().contains("seed = 8"));
}

#[test]
fn infinite_variance_law_outside_its_range_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "a3.toml",
        r#"
id = "a3"

[experiment]
kind = "limit-mean"
value = 1.0
tolerance = 0.1
limit = { family = "critical-infinite-var", a = 3.0 }
"#,
    );
    let o = run(&["verify"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 < a <= 2"));
}

#[test]
fn malformed_and_unknown_keys_exit_2_with_position() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &SMALL_MC.replace("n = 8", "n = 8\nhorizon = 3"));
    let o = run(&["verify"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("horizon") && err.contains("line"), "{err}");
}

#[test]
fn duplicate_ids_in_a_suite_exit_2() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "one.toml", SMALL_MC);
    write(tmp.path(), "two.toml", SMALL_MC);
    let suite = write(tmp.path(), "suite.toml", "experiments = [\"one.toml\", \"two.toml\"]\n");
    let o = run(&["suite"], &suite, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate experiment id 'small'"));
}

#[test]
fn empty_suite_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let suite = write(tmp.path(), "suite.toml", "experiments = []\n");
    let o = run(&["suite"], &suite, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(tmp.path().join("out/summary.csv")).unwrap();
    assert_eq!(text, "experiment_id,kind,n,sup_distance,tolerance,pass\n");
}

#[test]
fn mixed_suite_exits_1_and_lists_every_report() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "pass.toml", SMALL_MC);
    write(
        tmp.path(),
        "fail.toml",
        "id = \"fail\"\n[experiment]\nkind = \"mean-bound\"\nupper = 0.0\nlimit = { family = \"gumbel-shifted\", c = 0.0 }\n",
    );
    let suite = write(tmp.path(), "suite.toml", "experiments = [\"pass.toml\", \"fail.toml\"]\n");
    let o = bin()
        .args(["suite", "--jobs", "2", "--config"])
        .arg(&suite)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let rows = summary_rows(&tmp.path().join("out"));
    assert_eq!(rows.len(), 3);
    assert_eq!((rows[1][0].as_str(), rows[1][5].as_str()), ("small", "true"));
    assert_eq!((rows[2][0].as_str(), rows[2][5].as_str()), ("fail", "false"));
}

#[test]
fn unwritable_output_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL_MC);
    // a regular file where the output directory should be
    let blocker = write(tmp.path(), "blocker", "");
    let o = run(&["verify"], &cfg, &blocker.join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn conditioning_that_almost_never_holds_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "rare.toml",
        r#"
id = "rare"
replicates = 100

[experiment]
kind = "ecdf-vs-exact"
n = 200

[experiment.process]
process = "plain"
offspring = { law = "geometric", p = 0.9 }
"#,
    );
    let o = run(&["simulate"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("conditioning infeasible"));
}

#[test]
fn exact_limit_and_simulate_write_csv() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path();
    assert_eq!(run(&["exact"], &paper_suite("ex1_subcritical_geometric.toml"), out).status.code(), Some(0));
    let exact = fs::read_to_string(out.join("ex1_subcritical_geometric.exact.csv")).unwrap();
    let mut lines = exact.lines();
    assert_eq!(lines.next(), Some("n,x,value,truncation_mass"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(&first[..2], &[100.0, 0.0]);
    assert!((first[2] - 1.0 / 3.0).abs() < 1e-12);

    assert_eq!(run(&["limit"], &paper_suite("ex5_boundary_mean.toml"), out).status.code(), Some(0));
    let limit = fs::read_to_string(out.join("ex5_boundary_mean.limit.csv")).unwrap();
    assert!(limit.starts_with("x,cdf,mean_formula_value\n"));
    assert_eq!(limit.lines().count(), 20);
    let mean: f64 = limit.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((mean - std::f64::consts::FRAC_PI_2).abs() < 1e-9);

    let cfg = write(out, "small.toml", SMALL_MC);
    assert_eq!(run(&["simulate"], &cfg, out).status.code(), Some(0));
    let samples = fs::read_to_string(out.join("small.samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 2001);
    let ecdf = fs::read_to_string(out.join("small.ecdf.csv")).unwrap();
    assert_eq!(ecdf.lines().last().unwrap().split(',').nth(1), Some("1"));
}

#[test]
fn limit_rejects_kinds_without_a_scalar_law() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["limit"], &paper_suite("ex8_bivariate_shift.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(2));
}
