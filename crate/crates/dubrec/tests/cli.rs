//! Configuration precedence, pipelines and the binary's exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

use clap::Parser;
use dubrec::cli::{resolve, Cli};
use dubrec::config::{config_hash, ExperimentConfig};
use dubrec::run;
use dubrec_core::Method;

const SMALL: [&str; 8] = [
    "--users",
    "60",
    "--items",
    "40",
    "--set",
    "data.logged=700",
    "--set",
    "data.uniform=500",
];

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("dubrec").chain(args.iter().copied())).unwrap()
}

fn small_config(out: &Path, extra: &[&str]) -> ExperimentConfig {
    let mut args = vec!["train"];
    args.extend(SMALL);
    args.extend(["--epochs", "20", "--set", "train.pretrain_epochs=20", "--out", out.to_str().unwrap()]);
    args.extend(extra);
    resolve(&cli(&args)).unwrap()
}

#[test]
fn flags_override_the_file_and_set_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("exp.ini");
    fs::write(
        &file,
        "seeds = 3,4\n[train]\nrank = 8\nlr = 0.01\n[method]\nmethods = naive,ips\ngamma = 0.5\n",
    )
    .unwrap();
    let f = file.to_str().unwrap();
    let cfg = resolve(&cli(&["--config", f, "train"])).unwrap();
    assert_eq!(cfg.seeds, [3, 4]);
    assert_eq!(cfg.train.rank, 8);
    assert_eq!(cfg.methods, [Method::Naive, Method::Ips]);

    let cfg = resolve(&cli(&["--config", f, "train", "--rank", "16", "--method", "bridge"])).unwrap();
    assert_eq!(cfg.train.rank, 16);
    assert_eq!(cfg.train.learning_rate, 0.01);
    assert_eq!(cfg.methods, [Method::Bridge]);

    let cfg = resolve(&cli(&["--config", f, "--set", "train.rank=4", "train", "--rank", "16"])).unwrap();
    assert_eq!(cfg.train.rank, 4);
}

#[test]
fn bad_settings_are_config_errors() {
    for args in [
        &["train", "--set", "train.rank=abc"][..],
        &["train", "--set", "nope.key=1"],
        &["train", "--set", "missing-equals"],
        &["train", "--method", "dub-xyz"],
        &["train", "--seed", ""],
    ] {
        let err = resolve(&cli(args)).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{args:?}: {err}");
    }
}

#[test]
fn config_hashes_are_stable_and_distinct() {
    assert_eq!(config_hash("x"), config_hash("x"));
    assert_ne!(config_hash("x"), config_hash("y"));
    assert_eq!(config_hash("x").len(), 16);
}

#[test]
fn rerunning_a_config_reproduces_its_rows_bitwise() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let rows_a = run::train_all(&small_config(a.path(), &["--method", "naive,dub-sep"]), None).unwrap();
    let rows_b = run::train_all(&small_config(b.path(), &["--method", "naive,dub-sep"]), None).unwrap();
    assert_eq!(rows_a, rows_b);
    assert_eq!(
        fs::read(a.path().join("results.csv")).unwrap(),
        fs::read(b.path().join("results.csv")).unwrap()
    );
    assert_ne!(rows_a[0].config_hash, rows_a[1].config_hash);
    let histories = fs::read_dir(a.path().join("history")).unwrap().count();
    assert_eq!(histories, 2);
}

#[test]
fn ablation_logs_zero_for_dropped_terms() {
    let out = tempfile::tempdir().unwrap();
    let cfg = small_config(out.path(), &["--method", "dub-sep", "--set", "method.drop=a,e2"]);
    let rows = run::ablate(&cfg).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].variant, "w/o a+e2");
    let name = format!("ablate_dub-sep_{}_s0.csv", rows[1].config_hash);
    let mut r = csv::Reader::from_path(out.path().join("history").join(name)).unwrap();
    let header = r.headers().unwrap().clone();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let (phase, a, e2, c) = (col("phase"), col("a"), col("e2"), col("c"));
    let mut main_rows = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        if &rec[phase] == "main" {
            main_rows += 1;
            assert_eq!(&rec[a], "0");
            assert_eq!(&rec[e2], "0");
            assert_ne!(&rec[c], "0");
        }
    }
    assert!(main_rows > 0);
}

#[test]
fn default_ablation_has_three_variants() {
    let names: Vec<String> = run::ablation_variants(Method::DubSeparability, &[])
        .into_iter()
        .map(|v| v.0)
        .collect();
    assert_eq!(names, ["full", "w/o e2", "w/o a+e2"]);
}

#[test]
fn grid_flags_exactly_one_cell_per_method_and_seed() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = small_config(out.path(), &["--method", "bridge"]);
    cfg.set("grid.ranks", "4,8").unwrap();
    cfg.set("grid.lambdas", "1e-4").unwrap();
    cfg.set("grid.gammas", "0.1,1").unwrap();
    let rows = run::grid(&cfg).unwrap();
    assert_eq!(rows.len(), 4);
    let best = rows.iter().filter(|r| r.selected).collect::<Vec<_>>();
    assert_eq!(best.len(), 1);
    assert!(rows.iter().all(|r| r.best_validation <= best[0].best_validation));
}

#[test]
fn positive_ratio_sweep_uses_a_common_size() {
    let out = tempfile::tempdir().unwrap();
    let cfg = small_config(out.path(), &["--method", "naive"]);
    let data = run::DataSource::open(&cfg).unwrap().prepare(&cfg, 0).unwrap();
    let total = run::common_sweep_size(&data.s_c, &cfg.sweep.positive_ratios);
    assert!(total > 0);
    for &r in &cfg.sweep.positive_ratios {
        let s = dubrec_core::data::subsample_positive_ratio(&data.s_c, r, total, 1).unwrap();
        assert_eq!(s.len(), total);
    }
    let rows = run::sweep(&cfg, run::SweepAxis::PositiveRatio).unwrap();
    assert_eq!(rows.len(), 4);
}

#[test]
fn saved_models_evaluate_to_the_training_metrics() {
    let out = tempfile::tempdir().unwrap();
    let cfg = small_config(out.path(), &["--method", "naive"]);
    let models = out.path().join("models");
    let rows = run::train_all(&cfg, Some(&models)).unwrap();
    let scored = run::evaluate_checkpoint(&cfg, &models.join("naive_s0")).unwrap();
    assert_eq!(scored[0].1, rows[0].metrics);
}

#[test]
fn file_sources_match_generated_logs() {
    let out = tempfile::tempdir().unwrap();
    let cfg = small_config(out.path(), &[]);
    let world = run::generate(&cfg, 0).unwrap();
    let logged = world.join("logged.tsv");
    let uniform = world.join("uniform.tsv");
    let files = small_config(
        out.path(),
        &["--logged-file", logged.to_str().unwrap(), "--uniform-file", uniform.to_str().unwrap()],
    );
    let data = run::DataSource::open(&files).unwrap().prepare(&files, 0).unwrap();
    let synth = run::DataSource::open(&cfg).unwrap().prepare(&cfg, 0).unwrap();
    assert_eq!(data.s_c.len(), synth.s_c.len());
    assert_eq!(data.s_t.len() + data.validation.len() + data.test.len(), 500);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dubrec"))
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let st = bin()
            .args(["generate", "--users", "30", "--items", "20", "--seed", "7"])
            .env("DUBREC_OUT", d.path())
            .status()
            .unwrap();
        assert!(st.success());
    }
    for f in ["world.meta", "r_c.csv", "r_t.csv", "logged.tsv", "uniform.tsv"] {
        let read = |d: &tempfile::TempDir| fs::read(d.path().join("world").join(f)).unwrap();
        assert_eq!(read(&a), read(&b), "{f}");
    }
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = |args: &[&str]| bin().args(args).args(["--out", out]).output().unwrap().status.code();
    assert_eq!(code(&["train", "--rank", "zero"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "u\ti\t7\n").unwrap();
    let b = bad.to_str().unwrap();
    assert_eq!(code(&["train", "--logged-file", b, "--uniform-file", b]), Some(3));
    assert_eq!(code(&["evaluate", "--model", dir.path().join("none").to_str().unwrap()]), Some(3));
    assert_eq!(code(&["--help"]), Some(0));
}
