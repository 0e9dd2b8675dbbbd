//! Race results, seasons and the threshold transform.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use record_edge_core::{RaceTime, Sample};
use serde::{Serialize, Serializer};
use thiserror::Error;

/// The 6:10.00 cut used for 5000 m results.
pub const DEFAULT_THRESHOLD: &str = "6:10.00";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column `{0}` in header")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Three-letter upper-case nation code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nation([u8; 3]);

impl Nation {
    pub fn parse(text: &str) -> Option<Self> {
        let b = text.as_bytes();
        (b.len() == 3 && b.iter().all(u8::is_ascii_uppercase)).then(|| Self([b[0], b[1], b[2]]))
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("ascii")
    }
}

impl fmt::Display for Nation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Nation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaceResult {
    pub skater: String,
    pub nation: Option<Nation>,
    pub venue: String,
    pub date: NaiveDate,
    pub time: RaceTime,
    pub pair_rank: Option<u8>,
}

impl RaceResult {
    pub fn season(&self) -> i32 {
        season_of(self.date)
    }
}

/// Starting year of the July-to-June season containing `date`.
pub fn season_of(date: NaiveDate) -> i32 {
    if date.month() >= 7 {
        date.year()
    } else {
        date.year() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Abort on the first bad row.
    #[default]
    Strict,
    /// Skip bad rows, recording one warning each.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedResults {
    pub results: Vec<RaceResult>,
    pub warnings: Vec<RowWarning>,
}

impl ParsedResults {
    fn push_row(
        &mut self,
        row: Result<RaceResult, String>,
        line: usize,
        mode: ParseMode,
    ) -> Result<(), IngestError> {
        match row {
            Ok(r) => self.results.push(r),
            Err(message) if mode == ParseMode::Lenient => {
                self.warnings.push(RowWarning { line, message })
            }
            Err(message) => return Err(IngestError::Row { line, message }),
        }
        Ok(())
    }
}

fn parse_time_field(text: &str) -> Result<RaceTime, String> {
    RaceTime::parse(text).map_err(|e| format!("time `{text}`: {e}"))
}

fn parse_nation_field(text: &str) -> Result<Option<Nation>, String> {
    if text.is_empty() {
        return Ok(None);
    }
    Nation::parse(text)
        .map(Some)
        .ok_or_else(|| format!("nation `{text}` is not three upper-case letters"))
}

fn parse_rank_field(text: &str) -> Result<Option<u8>, String> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| format!("pair rank `{text}` is not a small integer"))
}

const CSV_COLUMNS: [&str; 5] = ["skater", "nation", "venue", "date", "time"];

/// Reads `skater,nation,venue,date,time[,pair_rank]` rows with ISO dates and
/// `M:SS.ss` times.
pub fn read_results_csv<R: Read>(reader: R, mode: ParseMode) -> Result<ParsedResults, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(IngestError::MissingColumn(name))
    };
    let idx: Vec<usize> = CSV_COLUMNS
        .iter()
        .map(|c| column(c))
        .collect::<Result<_, _>>()?;
    let rank_idx = headers.iter().position(|h| h == "pair_rank");

    let mut out = ParsedResults::default();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) if mode == ParseMode::Lenient => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                out.warnings.push(RowWarning {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let row = (|| {
            let date = NaiveDate::parse_from_str(field(idx[3]), "%Y-%m-%d")
                .map_err(|e| format!("date `{}`: {e}", field(idx[3])))?;
            Ok(RaceResult {
                skater: field(idx[0]).to_string(),
                nation: parse_nation_field(field(idx[1]))?,
                venue: field(idx[2]).to_string(),
                date,
                time: parse_time_field(field(idx[4]))?,
                pair_rank: rank_idx
                    .map(|i| parse_rank_field(field(i)))
                    .transpose()?
                    .flatten(),
            })
        })();
        out.push_row(row, line, mode)?;
    }
    Ok(out)
}

pub fn read_results_path(path: &Path, mode: ParseMode) -> Result<ParsedResults, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_results_csv(file, mode)
}

pub fn write_results_csv<W: Write>(results: &[RaceResult], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["skater", "nation", "venue", "date", "time", "pair_rank"])?;
    for r in results {
        w.write_record([
            r.skater.clone(),
            r.nation.map(|n| n.to_string()).unwrap_or_default(),
            r.venue.clone(),
            r.date.format("%Y-%m-%d").to_string(),
            r.time.to_string(),
            r.pair_rank.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

/// Reads the fixed-width national-records table: time (7, `M.SS.ss`),
/// name (24), nation (3), venue (11), two-digit year, `MMDD`, pair rank,
/// single-space separated, after any leading indent.
pub fn parse_national_records(text: &str, mode: ParseMode) -> Result<ParsedResults, IngestError> {
    let mut out = ParsedResults::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_start();
        if line.trim().is_empty() {
            continue;
        }
        out.push_row(parse_fixed_width_row(line), i + 1, mode)?;
    }
    Ok(out)
}

fn parse_fixed_width_row(line: &str) -> Result<RaceResult, String> {
    if !line.is_ascii() {
        return Err("fixed-width rows must be ASCII".into());
    }
    if line.len() < 56 {
        return Err(format!(
            "row has {} columns, expected at least 56",
            line.len()
        ));
    }
    let col = |a: usize, b: usize| line[a..b].trim();
    let time = RaceTime::parse_with_separator(col(0, 7), b'.')
        .map_err(|e| format!("time `{}`: {e}", col(0, 7)))?;
    let year: i32 = col(49, 51)
        .parse()
        .map_err(|_| format!("year `{}`", col(49, 51)))?;
    let mmdd = col(52, 56);
    let (month, day) = match (
        mmdd.get(0..2).map(str::parse::<u32>),
        mmdd.get(2..4).map(str::parse::<u32>),
    ) {
        (Some(Ok(m)), Some(Ok(d))) => (m, d),
        _ => return Err(format!("month-day `{mmdd}`")),
    };
    let full_year = if year < 70 { 2000 + year } else { 1900 + year };
    let date = NaiveDate::from_ymd_opt(full_year, month, day)
        .ok_or_else(|| format!("invalid date {full_year}-{mmdd}"))?;
    Ok(RaceResult {
        skater: col(8, 32).to_string(),
        nation: parse_nation_field(col(33, 36))?,
        venue: col(37, 48).to_string(),
        date,
        time,
        pair_rank: parse_rank_field(line[56..].trim())?,
    })
}

/// One qualifying result expressed as a margin below the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exceedance {
    /// Margin in centiseconds, exact.
    pub margin_centis: u32,
    pub season: i32,
    /// Index of the originating [`RaceResult`].
    pub source: usize,
}

impl Exceedance {
    pub fn y(&self) -> f64 {
        self.margin_centis as f64 / 100.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceSample {
    pub threshold: RaceTime,
    pub values: Vec<Exceedance>,
    /// Results at or above the threshold.
    pub excluded: usize,
}

impl ExceedanceSample {
    pub fn margins(&self) -> Vec<f64> {
        self.values.iter().map(Exceedance::y).collect()
    }

    /// Margins as a core [`Sample`]; fails when nothing qualified.
    pub fn to_sample(&self) -> Result<Sample, record_edge_core::Error> {
        Sample::new(self.margins())
    }

    /// Race time that produced value `i`.
    pub fn time_of(&self, i: usize) -> RaceTime {
        RaceTime::from_centis(self.threshold.centis() - self.values[i].margin_centis)
            .expect("margin below threshold")
    }

    /// Margins grouped by season, seasons ascending.
    pub fn by_season(&self) -> Vec<(i32, Vec<f64>)> {
        let mut groups: std::collections::BTreeMap<i32, Vec<f64>> = Default::default();
        for v in &self.values {
            groups.entry(v.season).or_default().push(v.y());
        }
        groups.into_iter().collect()
    }
}

/// Keeps results strictly faster than `threshold` as margins `threshold - time`.
pub fn to_exceedance(results: &[RaceResult], threshold: RaceTime) -> ExceedanceSample {
    let mut values = Vec::with_capacity(results.len());
    let mut excluded = 0;
    for (source, r) in results.iter().enumerate() {
        if r.time < threshold {
            values.push(Exceedance {
                margin_centis: threshold.centis() - r.time.centis(),
                season: r.season(),
                source,
            });
        } else {
            excluded += 1;
        }
    }
    ExceedanceSample {
        threshold,
        values,
        excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn result(time: &str) -> RaceResult {
        RaceResult {
            skater: "X".into(),
            nation: Nation::parse("NOR"),
            venue: "Inzell".into(),
            date: date(2026, 1, 24),
            time: RaceTime::parse(time).unwrap(),
            pair_rank: None,
        }
    }

    #[test]
    fn seasons_cut_at_july() {
        assert_eq!(season_of(date(2005, 11, 12)), 2005);
        assert_eq!(season_of(date(2026, 1, 24)), 2025);
        assert_eq!(season_of(date(2025, 6, 30)), 2024);
        assert_eq!(season_of(date(2025, 7, 1)), 2025);
    }

    #[test]
    fn exceedance_examples() {
        let threshold = RaceTime::parse(DEFAULT_THRESHOLD).unwrap();
        let rs = [
            result("6:01.56"),
            result("6:10.00"),
            result("5:58.52"),
            result("6:12.00"),
        ];
        let ex = to_exceedance(&rs, threshold);
        assert_eq!(ex.margins(), vec![8.44, 11.48]);
        assert_eq!(ex.excluded, 2);
        assert_eq!(ex.time_of(0), rs[0].time);
        assert_eq!(ex.values[1].source, 2);
        assert_eq!(ex.by_season(), vec![(2025, vec![8.44, 11.48])]);

        let none = to_exceedance(&rs[1..2], threshold);
        assert!(none.values.is_empty());
        assert!(none.to_sample().is_err());
    }

    #[test]
    fn nation_codes() {
        assert!(Nation::parse("NOR").is_some());
        assert!(Nation::parse("nor").is_none());
        assert!(Nation::parse("NO").is_none());
    }

    #[test]
    fn csv_errors() {
        let ok = "skater,nation,venue,date,time\n";
        assert!(read_results_csv(ok.as_bytes(), ParseMode::Strict)
            .unwrap()
            .results
            .is_empty());

        let missing = "skater,venue,date,time\nA,SLC,2021-12-03,6:01.56\n";
        assert!(matches!(
            read_results_csv(missing.as_bytes(), ParseMode::Strict),
            Err(IngestError::MissingColumn("nation"))
        ));

        let bad = "skater,nation,venue,date,time\nA,SWE,SLC,2021-12-03,abc\nB,CAN,SLC,2017-12-10,6:01.86\n";
        match read_results_csv(bad.as_bytes(), ParseMode::Strict) {
            Err(IngestError::Row { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let lenient = read_results_csv(bad.as_bytes(), ParseMode::Lenient).unwrap();
        assert_eq!(lenient.results.len(), 1);
        assert_eq!(lenient.warnings.len(), 1);
        assert_eq!(lenient.warnings[0].line, 2);
    }

    #[test]
    fn csv_roundtrip() {
        let rs = vec![
            result("6:01.56"),
            RaceResult {
                pair_rank: Some(3),
                nation: None,
                ..result("5:58.52")
            },
        ];
        let mut buf = Vec::new();
        write_results_csv(&rs, &mut buf).unwrap();
        let back = read_results_csv(buf.as_slice(), ParseMode::Strict).unwrap();
        assert_eq!(back.results, rs);
    }

    #[test]
    fn fixed_width_row() {
        let line = "  6.01.56 van der POEL Nils        SWE SLC         21 1203  1        ";
        let parsed = parse_national_records(line, ParseMode::Strict).unwrap();
        let r = &parsed.results[0];
        assert_eq!(r.skater, "van der POEL Nils");
        assert_eq!(r.time.seconds(), 361.56);
        assert_eq!(r.date, date(2021, 12, 3));
        assert_eq!(r.pair_rank, Some(1));
        assert!(parse_national_records("  6.01.56 short", ParseMode::Strict).is_err());
        assert!(
            parse_national_records("  6.01.56 short", ParseMode::Lenient)
                .unwrap()
                .warnings
                .len()
                == 1
        );
    }
}
