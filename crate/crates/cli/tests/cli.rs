//! End-to-end checks of the command-line surface: config validation with
//! field-specific diagnostics, output files, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruelle"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("launch ruelle binary")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const VALID: &str = r#"
[space]
kind = "finite"
d = 2

[potential]
preset = "zero"

[observable]
preset = "plus-minus-one"

[run]
seed = 3
n = 100
m = 1000
"#;

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_and_preset_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["rpf"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--preset") && err.contains("--config"), "{err}");
}

#[test]
fn per_field_validation_messages() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &str, &str)] = &[
        (
            "bad-kind.toml",
            "[space]\nkind = \"torus\"\n",
            "space.kind",
        ),
        (
            "bad-d.toml",
            "[space]\nkind = \"finite\"\nd = 1\n",
            "space.d",
        ),
        (
            "missing-d.toml",
            "[space]\nkind = \"finite\"\n",
            "space.d",
        ),
        (
            "bad-nodes.toml",
            "[space]\nkind = \"circle\"\nn_nodes = 3\n",
            "space.n_nodes",
        ),
        (
            "bad-weights.toml",
            "[space]\nkind = \"finite\"\nd = 2\nweights = [1.0, -1.0]\n",
            "space.weights",
        ),
        (
            "bad-markov-row.toml",
            "[space]\nkind = \"finite\"\nd = 2\n[markov]\np = [[0.7, 0.2], [0.4, 0.6]]\n",
            "markov.p",
        ),
        (
            "bad-depth.toml",
            "[space]\nkind = \"finite\"\nd = 2\n[run]\ndepth = 0\n",
            "run.depth",
        ),
        (
            "bad-tol.toml",
            "[space]\nkind = \"finite\"\nd = 2\n[run]\ntol = 0.0\n",
            "run.tol",
        ),
        (
            "bad-n.toml",
            "[space]\nkind = \"finite\"\nd = 2\n[run]\nn = 0\n",
            "run.n",
        ),
        (
            "bad-m.toml",
            "[space]\nkind = \"finite\"\nd = 2\n[run]\nm = 0\n",
            "run.m",
        ),
        (
            "bad-fd.toml",
            "[space]\nkind = \"finite\"\nd = 2\n[run]\nfd_step = 2.0\n",
            "run.fd_step",
        ),
        (
            "bad-z.toml",
            "[space]\nkind = \"finite\"\nd = 2\n[run]\nz_grid = [0.0, 3.0]\n",
            "run.z_grid",
        ),
        (
            "bad-format.toml",
            "[space]\nkind = \"finite\"\nd = 2\n[output]\nformats = [\"xml\"]\n",
            "output.formats",
        ),
    ];
    for (name, body, field) in cases {
        let path = write_config(dir.path(), name, body);
        let out = run_in(dir.path(), &["rpf", "--config", &path]);
        assert_eq!(out.status.code(), Some(2), "{name} should fail validation");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(
            err.contains(field),
            "{name}: diagnostic {err:?} does not name {field}"
        );
    }
}

#[test]
fn seed_required_for_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let body = VALID.replace("seed = 3\n", "");
    let path = write_config(dir.path(), "no-seed.toml", &body);
    let out = run_in(dir.path(), &["clt", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.seed"));
    // The --seed flag satisfies the requirement.
    let out = run_in(dir.path(), &["clt", "--config", &path, "--seed", "9", "--out", "seeded"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_toml_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "broken.toml", "[space\nkind = finite\n");
    let out = run_in(dir.path(), &["rpf", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "diagnostic should carry a position: {err}");
}

#[test]
fn rpf_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "ok.toml", VALID);
    let out = run_in(dir.path(), &["rpf", "--config", &path, "--out", "result"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("result/report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "rpf");
    assert!((report["results"]["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-13);
    assert!(report["config_toml"].as_str().unwrap().contains("[space]"));
    for table in ["eigfun.csv", "eigmeasure.csv", "gibbs.csv"] {
        let text = std::fs::read_to_string(dir.path().join("result").join(table)).unwrap();
        assert!(text.lines().count() > 1, "{table} is empty");
    }
}

#[test]
fn variance_preset_four_routes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["variance", "--preset", "markov-indicator", "--out", "var"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("var/report.json")).unwrap(),
    )
    .unwrap();
    let r = &report["results"];
    assert!(r["spread"].as_f64().unwrap() <= 1e-6);
    let sigma = r["sigma2_resolvent"].as_f64().unwrap();
    assert!((r["sigma2_greenkubo"].as_f64().unwrap() - sigma).abs() <= 1e-6);
    assert!(r["sigma2_mc"].is_f64(), "preset carries a seed, mc expected");
}

#[test]
fn output_dir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "ok.toml", VALID);
    let out = Command::new(env!("CARGO_BIN_EXE_ruelle"))
        .args(["rpf", "--config", &path])
        .env("RUELLE_OUT_DIR", "env-out")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("env-out/report.json").exists());
}

#[test]
fn observable_from_values_file() {
    let dir = tempfile::tempdir().unwrap();
    // Tabulated observable in the CSV format written by the library.
    std::fs::write(dir.path().join("g.csv"), "s1,value\n0,-1.0\n1,1.0\n").unwrap();
    let body = r#"
[space]
kind = "finite"
d = 2

[potential]
preset = "zero"

[observable]
preset = "values"
depth = 1
values_file = "g.csv"

[run]
seed = 3
n = 100
m = 1000
"#;
    let path = write_config(dir.path(), "file-obs.toml", body);
    let out = run_in(dir.path(), &["variance", "--config", &path, "--out", "var"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("var/report.json")).unwrap(),
    )
    .unwrap();
    // The +-1 coin direction has unit variance.
    assert!((report["results"]["sigma2_resolvent"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn pressure_curve_constant_direction_is_affine() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[space]
kind = "finite"
d = 2

[potential]
preset = "zero"

[observable]
preset = "values"
depth = 0
values = [0.4]

[run]
t_grid = [-0.2, -0.1, 0.0, 0.1, 0.2]
"#;
    let path = write_config(dir.path(), "affine.toml", body);
    let out = run_in(dir.path(), &["pressure-curve", "--config", &path, "--out", "pc"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("pc/pressure_curve.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    for row in &rows {
        // P(f + t c) = P(f) + t c: slope column constant at c, curvature 0.
        assert!((row[1] - row[0] * 0.4).abs() < 1e-10, "{row:?}");
        assert!((row[2] - 0.4).abs() < 1e-10);
        assert!(row[4].abs() < 1e-8);
    }
}

#[test]
fn pressure_curve_coboundary_has_flat_curvature_and_convex_pressure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["pressure-curve", "--preset", "coboundary", "--out", "pc"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("pc/pressure_curve.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    for row in &rows {
        assert!(row[4].abs() <= 1e-8, "curvature {row:?}");
    }
    // Convexity of the pressure column: nonnegative second differences.
    for w in rows.windows(3) {
        let second = w[0][1] - 2.0 * w[1][1] + w[2][1];
        assert!(second >= -1e-10, "second difference {second}");
    }
}

#[test]
fn clt_histogram_is_plot_ready() {
    let dir = tempfile::tempdir().unwrap();
    let body = VALID.replace("n = 100", "n = 200").replace("m = 1000", "m = 2000");
    let path = write_config(dir.path(), "clt.toml", &body);
    let out = run_in(dir.path(), &["clt", "--config", &path, "--out", "clt"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("clt/histogram.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "bin_left,bin_right,count,gaussian_density"
    );
    let mut total = 0u64;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        total += cells[2].parse::<u64>().unwrap();
    }
    assert_eq!(total, 2000);
}
