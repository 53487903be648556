//! Measured tallies: parsing, derived observables and reproduction.

use std::path::PathBuf;

use pmqkd::ingest::{derive_observables, parse_component_losses, tally_csv_string};
use pmqkd::{parse_tally_csv, parse_tally_str, reproduce_key_rate, CountsInterpretation, Error};
use pmqkd::{ReproductionOptions, SecurityBudget};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// (file, loss, n_det, matched sum, errors)
const RUNS: [(&str, f64, u64, u64, u64); 3] = [
    ("experiment_35db.csv", 35.0, 3_701_806, 935_339, 2026),
    ("experiment_40db.csv", 40.0, 1_196_818, 302_490, 999),
    ("experiment_45db.csv", 45.0, 363_094, 91_781, 649),
];

#[test]
fn fixtures_carry_the_measured_totals() {
    for (file, loss, n_det, matched, errors) in RUNS {
        let r = parse_tally_csv(fixture(file)).unwrap();
        assert_eq!(r.loss_db, loss);
        assert_eq!(r.n_rounds, 1e11);
        assert_eq!(r.tally.m_slices, 8);
        assert_eq!(r.tally.n_det, n_det);
        assert_eq!(r.tally.matched_total(), matched, "{file}");
        assert_eq!(r.tally.error_total(), errors, "{file}");
        assert_eq!(r.component_losses.as_ref().map(|c| c.len()), Some(7));
        r.tally.check_consistency().unwrap();
    }
}

#[test]
fn qber_of_the_fixtures() {
    for ((file, ..), want) in RUNS.iter().zip([0.2166e-2, 0.3303e-2, 0.7071e-2]) {
        let r = parse_tally_csv(fixture(file)).unwrap();
        let obs = derive_observables(&r, CountsInterpretation::SiftedKey).unwrap();
        assert!((obs.e_b - want).abs() < 5e-7, "{file}: {}", obs.e_b);
        assert!(obs.m_s_reconstructed);
        assert_eq!(obs.n_mu, r.tally.matched_total() as f64);
    }
}

#[test]
fn interpretations_differ_only_in_the_test_sample() {
    let r = parse_tally_csv(fixture("experiment_40db.csv")).unwrap();
    let a = derive_observables(&r, CountsInterpretation::SiftedKey).unwrap();
    let b = derive_observables(&r, CountsInterpretation::IncludesTestSample).unwrap();
    assert_eq!(a.e_b, b.e_b);
    assert!((b.n_mu - a.n_mu * (1.0 - r.p_s)).abs() < 1e-6);
    assert!((a.n_s * (1.0 - r.p_s) - b.n_s).abs() < 1e-6);
}

#[test]
fn component_table_parses() {
    let c = parse_component_losses(fixture("measurement_station_losses.csv")).unwrap();
    assert_eq!(c.len(), 7);
    assert_eq!(c["Cir 2->3"], 0.77);
    assert_eq!(c["BS-4-2"], 3.81);
    assert_eq!(c["PC2"], 0.16);
}

#[test]
fn write_then_read_is_identity() {
    for (file, ..) in RUNS {
        let r = parse_tally_csv(fixture(file)).unwrap();
        let text = tally_csv_string(&r).unwrap();
        assert_eq!(parse_tally_str(&text).unwrap(), r);
    }
}

#[test]
fn reproduction_reports_budget_and_notes() {
    let r = parse_tally_csv(fixture("experiment_45db.csv")).unwrap();
    let out = reproduce_key_rate(&r, &SecurityBudget::default(), &ReproductionOptions::default())
        .unwrap();
    assert!(out.rate > 0.0);
    assert!(out.m_s_reconstructed);
    assert!(out.notes.iter().any(|n| n.contains("reconstructed")));
    assert!(out.phase.ep_m_bar >= out.phase.ep_m);
}

#[test]
fn malformed_tallies_name_the_line() {
    let text = std::fs::read_to_string(fixture("experiment_45db.csv")).unwrap();
    let bad_phase = text.replace("pi/4,5pi/4,28,6747", "pi/4,5pi/3,28,6747");
    let negative = text.replace("0,0,4669,40", "0,0,-4669,40");
    let short = text.replace("pi,pi,4552,48", "pi,pi,4552");
    for (what, bad) in [("phase", bad_phase), ("negative", negative), ("fields", short)] {
        match parse_tally_str(&bad) {
            Err(Error::Schema { line, .. }) => assert!(line > 14, "{what}: line {line}"),
            other => panic!("{what}: {other:?}"),
        }
    }
}
