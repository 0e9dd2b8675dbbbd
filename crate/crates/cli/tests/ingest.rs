mod common;

use std::fs;

use record_edge::ingest::{
    parse_national_records, read_results_csv, season_of, to_exceedance, write_results_csv,
    ParseMode, DEFAULT_THRESHOLD,
};
use record_edge_core::RaceTime;

#[test]
fn fixed_width_table_matches_csv_fixture() {
    let raw = fs::read_to_string(common::fixture("national_records.txt")).unwrap();
    let parsed = parse_national_records(&raw, ParseMode::Strict).unwrap();
    assert_eq!(parsed.results.len(), 17);
    assert!(parsed.warnings.is_empty());

    let csv_text = fs::read(common::fixture("national_records.csv")).unwrap();
    let from_csv = read_results_csv(csv_text.as_slice(), ParseMode::Strict).unwrap();
    assert!(from_csv.warnings.is_empty());
    assert_eq!(from_csv.results, parsed.results);

    let mut rewritten = Vec::new();
    write_results_csv(&parsed.results, &mut rewritten).unwrap();
    assert_eq!(
        rewritten, csv_text,
        "fixture is not the normalized form of the table"
    );
}

#[test]
fn eitrem_row() {
    let raw = fs::read_to_string(common::fixture("national_records.txt")).unwrap();
    let rows = parse_national_records(&raw, ParseMode::Strict)
        .unwrap()
        .results;
    let r = rows.iter().find(|r| r.skater == "EITREM Sander").unwrap();
    assert_eq!(r.time.seconds(), 358.52);
    assert_eq!(r.nation.unwrap().as_str(), "NOR");
    assert_eq!(r.season(), 2025);
    assert_eq!(season_of(r.date), 2025);
}

#[test]
fn fixture_margins_invert_exactly() {
    let raw = fs::read_to_string(common::fixture("national_records.txt")).unwrap();
    let rows = parse_national_records(&raw, ParseMode::Strict)
        .unwrap()
        .results;
    let threshold = RaceTime::parse(DEFAULT_THRESHOLD).unwrap();
    let ex = to_exceedance(&rows, threshold);
    assert_eq!(ex.excluded, 0);
    for (i, v) in ex.values.iter().enumerate() {
        assert_eq!(ex.time_of(i), rows[v.source].time);
    }
    let wr = rows
        .iter()
        .position(|r| r.skater == "van der POEL Nils")
        .unwrap();
    let v = ex.values.iter().find(|v| v.source == wr).unwrap();
    assert_eq!(v.y(), 8.44);
    assert_eq!(ex.margins().iter().cloned().fold(0.0, f64::max), 11.48);
}

#[test]
fn lenient_and_strict_rows() {
    let text = "skater,nation,venue,date,time,pair_rank\nA,NOR,Inzell,2026-01-24,abc,1\nB,NOR,Inzell,2026-01-24,6:01.00,x\nC,NOR,Inzell,2026-01-24,6:02.00,\n";
    let lenient = read_results_csv(text.as_bytes(), ParseMode::Lenient).unwrap();
    assert_eq!(lenient.results.len(), 1);
    assert_eq!(
        lenient.warnings.iter().map(|w| w.line).collect::<Vec<_>>(),
        vec![2, 3]
    );
    let err = read_results_csv(text.as_bytes(), ParseMode::Strict).unwrap_err();
    assert!(err.to_string().starts_with("line 2"), "{err}");
}
