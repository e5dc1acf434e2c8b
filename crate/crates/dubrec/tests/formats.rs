//! Loaders, world directories and model checkpoints.

use std::fs;

use dubrec::checkpoint::{load_model, save_model};
use dubrec::load::{load_logs, parse_interactions, LabelRule, Vocab};
use dubrec::world_io::{load_world, save_world};
use dubrec::CliError;
use dubrec_core::world::generate_world;
use dubrec_core::{FactorModel, WorldSpec};
use proptest::prelude::*;

fn parse(text: &str, rule: LabelRule) -> Result<Vec<(u32, u32, u8)>, CliError> {
    let mut v = Vocab::default();
    parse_interactions(text, "f", rule, &mut v).map(|xs| xs.iter().map(|x| (x.user, x.item, x.label)).collect())
}

fn data_message(r: Result<Vec<(u32, u32, u8)>, CliError>) -> String {
    match r {
        Err(CliError::Data(m)) => m,
        other => panic!("expected a data error, got {other:?}"),
    }
}

#[test]
fn tab_and_comma_files_parse_alike() {
    let tab = "# header comment\nu1\ti1\t1\n\nu2\ti1\t0\nu1\ti2\t1\n";
    let comma = "u1,i1,1\nu2,i1,0\nu1,i2,1\n";
    let want = vec![(0, 0, 1), (1, 0, 0), (0, 1, 1)];
    assert_eq!(parse(tab, LabelRule::Binary).unwrap(), want);
    assert_eq!(parse(comma, LabelRule::Binary).unwrap(), want);
}

#[test]
fn thresholds_binarize_ratings() {
    let got = parse("1\t1\t5\n1\t2\t4\n2\t1\t3\n2\t2\t1\n", LabelRule::Threshold(4.0)).unwrap();
    let labels: Vec<u8> = got.iter().map(|x| x.2).collect();
    assert_eq!(labels, [1, 1, 0, 0]);
}

#[test]
fn errors_name_the_offending_line() {
    let m = data_message(parse("a\tb\t1\na\tc\n", LabelRule::Binary));
    assert!(m.starts_with("f:2:"), "{m}");
    let m = data_message(parse("a\tb\t1\n\n# note\na\tc\tyes\n", LabelRule::Binary));
    assert!(m.starts_with("f:4:") && m.contains("not a number"), "{m}");
    let m = data_message(parse("a\tb\t3\n", LabelRule::Binary));
    assert!(m.starts_with("f:1:") && m.contains("not 0 or 1"), "{m}");
}

#[test]
fn duplicate_pairs_are_rejected_with_both_lines() {
    let m = data_message(parse("a\tb\t1\nc\tb\t0\na\tb\t0\n", LabelRule::Binary));
    assert!(m.starts_with("f:3:") && m.contains("line 1"), "{m}");
}

#[test]
fn logs_share_one_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.tsv");
    let t = dir.path().join("t.tsv");
    fs::write(&c, "u1\ti1\t1\nu2\ti2\t0\n").unwrap();
    fs::write(&t, "u2\ti1\t1\nu3\ti3\t0\n").unwrap();
    let logs = load_logs(&c, &t, LabelRule::Binary).unwrap();
    assert_eq!((logs.logged.n_users(), logs.logged.n_items()), (3, 3));
    assert_eq!(logs.uniform.interactions()[0].user, 1);
    assert_eq!(logs.vocab.user_id(2), Some("u3"));
    assert_eq!(logs.d_size(), 9);
}

proptest! {
    #[test]
    fn written_interactions_read_back(pairs in proptest::collection::btree_map((0u32..30, 0u32..30), 0u8..2, 1..60)) {
        let text: String = pairs.iter().map(|((u, i), y)| format!("u{u}\ti{i}\t{y}\n")).collect();
        let mut v = Vocab::default();
        let got = parse_interactions(&text, "p", LabelRule::Binary, &mut v).unwrap();
        prop_assert_eq!(got.len(), pairs.len());
        for (x, ((u, i), y)) in got.iter().zip(&pairs) {
            prop_assert_eq!(v.user_id(x.user).unwrap(), format!("u{u}"));
            prop_assert_eq!(v.item_id(x.item).unwrap(), format!("i{i}"));
            prop_assert_eq!(x.label, *y);
        }
    }
}

fn small_world(seed: u64) -> dubrec_core::SyntheticWorld {
    generate_world(&WorldSpec::new(20, 12, seed)).unwrap()
}

#[test]
fn worlds_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let w = small_world(5);
    save_world(dir.path(), &w).unwrap();
    let back = load_world(dir.path()).unwrap();
    assert_eq!(back.spec(), w.spec());
    assert_eq!(back.r_c_matrix(), w.r_c_matrix());
    assert_eq!(back.r_t_matrix(), w.r_t_matrix());
}

#[test]
fn tampered_worlds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_world(dir.path(), &small_world(6)).unwrap();
    let path = dir.path().join("r_t.csv");
    let text = fs::read_to_string(&path).unwrap();
    let flipped = if text.starts_with('0') { text.replacen('0', "1", 1) } else { text.replacen('1', "0", 1) };
    fs::write(&path, flipped).unwrap();
    match load_world(dir.path()) {
        Err(CliError::Data(m)) => assert!(m.contains("r_t.csv") && m.contains("user 0, item 0"), "{m}"),
        other => panic!("expected a data error, got {other:?}"),
    }
}

#[test]
fn checkpoints_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let m = FactorModel::init(7, 5, 3, 42).unwrap().with_clamp_eps(1e-6).unwrap();
    save_model(dir.path(), &m, 42).unwrap();
    let (back, seed) = load_model(dir.path()).unwrap();
    assert_eq!(seed, 42);
    assert_eq!((back.n_users(), back.n_items(), back.rank()), (7, 5, 3));
    assert_eq!(back.clamp_eps().to_bits(), m.clamp_eps().to_bits());
    let bits = |m: &FactorModel| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&m));
}

#[test]
fn truncated_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), &FactorModel::init(3, 3, 2, 1).unwrap(), 1).unwrap();
    let path = dir.path().join("item_factors.f64");
    let mut bytes = fs::read(&path).unwrap();
    bytes.pop();
    fs::write(&path, bytes).unwrap();
    assert!(matches!(load_model(dir.path()), Err(CliError::Data(_))));
}
