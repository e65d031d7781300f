use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fdensity_cli::commands::{DensitiesArtifact, ModelArtifact, TruthArtifact, SMALLBALL_HEADER};
use fdensity_cli::io::{read_curves, read_json, read_table};

const TOY: &str = "0,0.5,1\n1,2,3\n2,2,2\n0,1,5\n";

fn fdensity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdensity")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn empty_input_mentions_header() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let out = fdensity(&["analyze", s(&input), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("header"));
}

#[test]
fn toy_file_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("toy.csv");
    fs::write(&input, TOY).unwrap();
    let out_dir = dir.path().join("o");
    let out = fdensity(&["analyze", s(&input), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = read_all(&out_dir).into_iter().map(|(n, _)| n).collect();
    assert_eq!(
        names,
        ["central.csv", "contour.csv", "densities.json", "groups.csv", "logdensity.csv", "model.json", "scores.csv"]
    );

    let model: ModelArtifact = read_json(&out_dir.join("model.json")).unwrap();
    assert_eq!(model.sample_size, 3);
    assert_eq!(model.grid, vec![0.0, 0.5, 1.0]);
    let mean = [1.0, 5.0 / 3.0, 10.0 / 3.0];
    for (a, b) in model.mean.iter().zip(mean) {
        assert!((a - b).abs() < 1e-12);
    }
    let last = model.variance_explained.last().unwrap();
    assert!((last.cumulative - 1.0).abs() < 1e-12);

    let dens: DensitiesArtifact = read_json(&out_dir.join("densities.json")).unwrap();
    assert_eq!(dens.components.len(), model.active_components);
    assert_eq!(dens.components[0].grid.len(), 201);

    let central = read_table(&out_dir.join("central.csv")).unwrap();
    assert_eq!(central.header, ["t", "mean", "mode", "median"]);
    assert_eq!(central.column_f64("mean").unwrap().len(), 3);

    let groups = read_table(&out_dir.join("groups.csv")).unwrap();
    assert_eq!(groups.rows.len(), 3);
    let ld = read_table(&out_dir.join("logdensity.csv")).unwrap();
    assert!(ld.column_f64("r1").unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(fdensity(&["simulate", "--n", "40", "--m", "31", "--seed", "9", "--out", s(&sim)]).status.success());
    let input = sim.join("curves.csv");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(fdensity(&["analyze", s(&input), "--out", s(&a)]).status.success());
    assert!(fdensity(&["analyze", s(&input), "--out", s(&b)]).status.success());
    assert_eq!(read_all(&a), read_all(&b));
}

#[test]
fn simulate_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert!(fdensity(&["simulate", "--model", "ii", "--n", "12", "--m", "21", "--out", s(&out)]).status.success());
    let sample = read_curves(&out.join("curves.csv")).unwrap();
    assert_eq!(sample.len(), 12);
    assert_eq!(sample.grid().len(), 21);
    let truth: TruthArtifact = read_json(&out.join("truth.json")).unwrap();
    assert_eq!(truth.model, "ii");
    assert_eq!(truth.modal_curve.len(), 21);
    assert_eq!(read_table(&out.join("scores.csv")).unwrap().rows.len(), 12);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("toy.csv");
    fs::write(&input, TOY).unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "r = [1]\ngroups = 2\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = fdensity(&["analyze", s(&input), "--config", s(&cfg), "--r", "1,2", "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ld = read_table(&out_dir.join("logdensity.csv")).unwrap();
    assert_eq!(ld.header, ["curve", "r1", "r2"]);
    let groups = read_table(&out_dir.join("groups.csv")).unwrap();
    let g = groups.column_f64("group").unwrap();
    assert!(g.iter().all(|&v| v < 2.0));

    fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = fdensity(&["analyze", s(&input), "--config", s(&cfg), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_and_degenerate_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "0,1,2\n1,x,3\n1,2,3\n").unwrap();
    let out = fdensity(&["analyze", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "0,1\n1,1\n1,1\n1,1\n").unwrap();
    let out = fdensity(&["analyze", s(&flat), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));

    let input = dir.path().join("toy.csv");
    fs::write(&input, TOY).unwrap();
    let out = fdensity(&["analyze", s(&input), "--r", "9", "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fpca_writes_model_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("toy.csv");
    fs::write(&input, TOY).unwrap();
    let out_dir = dir.path().join("o");
    assert!(fdensity(&["fpca", s(&input), "--components", "2", "--out", s(&out_dir)]).status.success());
    let model: ModelArtifact = read_json(&out_dir.join("model.json")).unwrap();
    assert_eq!(model.components, 2);
    let scores = read_table(&out_dir.join("scores.csv")).unwrap();
    let x1 = scores.column_f64("x1").unwrap();
    assert!(x1.iter().sum::<f64>().abs() < 1e-10);
}

#[test]
fn smallball_rows_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let run = |radii: &str, seed: &str, out: &str| {
        fdensity(&[
            "smallball",
            "--decay",
            "geometric:0.5",
            "--radii",
            radii,
            "--mc-samples",
            "20000",
            "--seed",
            seed,
            "--out",
            s(&dir.path().join(out)),
        ])
    };
    assert!(run("", "1", "empty").status.success());
    let t = read_table(&dir.path().join("empty/smallball.csv")).unwrap();
    assert_eq!(t.header, SMALLBALL_HEADER);
    assert!(t.rows.is_empty());

    assert!(run("0.2,0.5,0.3", "1", "a").status.success());
    assert!(run("0.2,0.5,0.3", "1", "b").status.success());
    let a = read_table(&dir.path().join("a/smallball.csv")).unwrap();
    let b = read_table(&dir.path().join("b/smallball.csv")).unwrap();
    assert_eq!(a.rows.len(), 3);
    assert_eq!(a.column_f64("h").unwrap(), vec![0.5, 0.3, 0.2]);
    assert_eq!(a.column_f64("p_mc").unwrap(), b.column_f64("p_mc").unwrap());

    assert_eq!(run("0.2,0.2", "1", "c").status.code(), Some(2));
    assert_eq!(run("-0.1", "1", "c").status.code(), Some(2));
}

#[test]
fn smallball_rejects_bad_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(fdensity(&["smallball", "--radii", "0.3", "--out", out]).status.code(), Some(2));
    let bad_lambda = fdensity(&["smallball", "--decay", "power:2", "--lambda", "-1", "--out", out]);
    assert_eq!(bad_lambda.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_lambda.stderr).contains("lambda"));
    assert_eq!(fdensity(&["smallball", "--decay", "power:0.5", "--out", out]).status.code(), Some(2));
    assert_eq!(fdensity(&["smallball", "--decay", "wiggly:1", "--out", out]).status.code(), Some(2));
}

#[test]
fn mode_study_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdensity(&[
        "mode-study",
        "--models",
        "iii",
        "--replications",
        "2",
        "--n",
        "20",
        "--m",
        "31",
        "--truncations",
        "1,2",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = read_table(&dir.path().join("mode_study.csv")).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!(t.column_f64("imse").unwrap().iter().all(|&v| v >= 0.0));
}

#[test]
fn unknown_subcommand_fails() {
    assert_ne!(fdensity(&["frobnicate"]).status.code(), Some(0));
}
