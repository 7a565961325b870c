//! Per-move game record ingestion, simulation-count normalization, the
//! game-boundary train/test split, and the black/white training views.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::inference::InputVector;

pub const CSV_HEADER: &str = "game_no,move_no,dbsn,dwsn,dbwr,dwwr,dbtmr,dwtmr,ebwr,ewwr";
pub const RAW_CSV_HEADER: &str =
    "game_no,move_no,dbsn_raw,dwsn_raw,dbwr,dwwr,dbtmr,dwtmr,ebwr,ewwr";

/// Games `1..=DEFAULT_SPLIT_BOUNDARY` train; later games test.
pub const DEFAULT_SPLIT_BOUNDARY: u32 = 45;

pub const INPUT_NAMES: [&str; 6] = ["DBSN", "DWSN", "DBWR", "DWWR", "DBTMR", "DWTMR"];

/// One per-move feature row: six Darkforest-derived inputs plus the two
/// ELF desired win rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameRecord {
    pub game_no: u32,
    pub move_no: u32,
    pub dbsn: f64,
    pub dwsn: f64,
    pub dbwr: f64,
    pub dwwr: f64,
    pub dbtmr: f64,
    pub dwtmr: f64,
    pub ebwr: f64,
    pub ewwr: f64,
}

impl GameRecord {
    pub fn inputs(&self) -> [f64; 6] {
        [self.dbsn, self.dwsn, self.dbwr, self.dwwr, self.dbtmr, self.dwtmr]
    }

    pub fn input_vector(&self) -> InputVector {
        INPUT_NAMES.iter().copied().zip(self.inputs()).collect()
    }
}

/// How raw simulation counts were mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum NormalizationMode {
    /// Counts already normalized upstream; ingested verbatim.
    PreNormalized,
    /// Each count divided by the maximum of its own game.
    PerGameMax,
    /// Each count divided by the dataset-wide maximum.
    GlobalMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: String,
    pub normalization: NormalizationMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Sorted by `(game_no, move_no)`.
    pub records: Vec<GameRecord>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn game_numbers(&self) -> Vec<u32> {
        let mut games: Vec<u32> = self.records.iter().map(|r| r.game_no).collect();
        games.dedup();
        games
    }

    pub fn game(&self, game_no: u32) -> Vec<&GameRecord> {
        self.records.iter().filter(|r| r.game_no == game_no).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Side {
    Black,
    White,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Black => write!(f, "black"),
            Side::White => write!(f, "white"),
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "black" => Ok(Side::Black),
            "white" => Ok(Side::White),
            other => Err(format!("unknown side `{other}` (expected black|white)")),
        }
    }
}

/// Supervised pairs for one side: inputs plus the matching ELF target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingView {
    pub side: Side,
    /// `(inputs in INPUT_NAMES order, desired output)`, one per source record.
    pub pairs: Vec<([f64; 6], f64)>,
}

/// A per-row ingestion problem, with the 1-based CSV line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{} row error(s), first: {}", errors.len(), errors[0])]
    Rows { errors: Vec<RowError> },
    #[error("normalize: empty sequence")]
    EmptyCounts,
    #[error("normalize: nonpositive count {0}")]
    NonpositiveCount(i64),
    #[error("training view over an empty dataset")]
    EmptyView,
}

/// Successful parse plus non-fatal warnings (e.g. an empty data section).
#[derive(Debug)]
pub struct ParsedDataset {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

struct FieldSpec {
    name: &'static str,
    min: f64,
    max: f64,
}

const RANGED_FIELDS: [FieldSpec; 8] = [
    FieldSpec { name: "dbsn", min: 0.0, max: 1.0 },
    FieldSpec { name: "dwsn", min: 0.0, max: 1.0 },
    FieldSpec { name: "dbwr", min: 0.0, max: 1.0 },
    FieldSpec { name: "dwwr", min: 0.0, max: 1.0 },
    FieldSpec { name: "dbtmr", min: -1.0, max: 1.0 },
    FieldSpec { name: "dwtmr", min: -1.0, max: 1.0 },
    FieldSpec { name: "ebwr", min: 0.0, max: 1.0 },
    FieldSpec { name: "ewwr", min: 0.0, max: 1.0 },
];

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(
    reader: &mut csv::Reader<&[u8]>,
    expected: &str,
    errors: &mut Vec<RowError>,
) -> bool {
    match reader.headers() {
        Ok(h) => {
            let got = h.iter().collect::<Vec<_>>().join(",");
            if got != expected {
                errors.push(RowError {
                    line: 1,
                    message: format!("expected header `{expected}`, found `{got}`"),
                });
                return false;
            }
            true
        }
        Err(e) => {
            errors.push(RowError {
                line: 1,
                message: format!("unreadable header: {e}"),
            });
            false
        }
    }
}

fn parse_rows(
    text: &str,
    header: &str,
) -> Result<(Vec<(u64, Vec<f64>)>, Vec<String>), Vec<RowError>> {
    let mut errors = Vec::new();
    let mut reader = csv_reader(text);
    if !check_header(&mut reader, header, &mut errors) {
        return Err(errors);
    }
    let ncols = header.split(',').count();
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                errors.push(RowError {
                    line,
                    message: format!("{e}"),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != ncols {
            errors.push(RowError {
                line,
                message: format!("expected {ncols} columns, found {}", record.len()),
            });
            continue;
        }
        let mut values = Vec::with_capacity(ncols);
        let mut ok = true;
        for (cell, col) in record.iter().zip(header.split(',')) {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    errors.push(RowError {
                        line,
                        message: format!("column `{col}`: `{cell}` is not a finite number"),
                    });
                    ok = false;
                }
            }
        }
        if ok {
            rows.push((line, values));
        }
    }
    let mut warnings = Vec::new();
    if rows.is_empty() && errors.is_empty() {
        warnings.push("data section is empty".to_string());
    }
    if errors.is_empty() {
        Ok((rows, warnings))
    } else {
        Err(errors)
    }
}

fn finalize_records(
    mut raw: Vec<(u64, GameRecord)>,
    source: String,
    normalization: NormalizationMode,
    warnings: Vec<String>,
) -> Result<ParsedDataset, DatasetError> {
    let mut errors = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, rec) in &raw {
        if !seen.insert((rec.game_no, rec.move_no)) {
            errors.push(RowError {
                line: *line,
                message: format!("duplicate (game_no, move_no) = ({}, {})", rec.game_no, rec.move_no),
            });
        }
    }
    if !errors.is_empty() {
        return Err(DatasetError::Rows { errors });
    }
    raw.sort_by_key(|(_, r)| (r.game_no, r.move_no));
    Ok(ParsedDataset {
        dataset: Dataset {
            records: raw.into_iter().map(|(_, r)| r).collect(),
            provenance: Provenance {
                source,
                normalization,
            },
        },
        warnings,
    })
}

fn integral_field(line: u64, col: &str, v: f64, errors: &mut Vec<RowError>) -> u32 {
    if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
        errors.push(RowError {
            line,
            message: format!("column `{col}`: `{v}` is not a positive integer"),
        });
        0
    } else {
        v as u32
    }
}

fn build_record(line: u64, values: &[f64], errors: &mut Vec<RowError>) -> GameRecord {
    let game_no = integral_field(line, "game_no", values[0], errors);
    let move_no = integral_field(line, "move_no", values[1], errors);
    for (spec, &v) in RANGED_FIELDS.iter().zip(&values[2..]) {
        if v < spec.min || v > spec.max {
            errors.push(RowError {
                line,
                message: format!(
                    "column `{}`: {v} outside [{}, {}]",
                    spec.name, spec.min, spec.max
                ),
            });
        }
    }
    GameRecord {
        game_no,
        move_no,
        dbsn: values[2],
        dwsn: values[3],
        dbwr: values[4],
        dwwr: values[5],
        dbtmr: values[6],
        dwtmr: values[7],
        ebwr: values[8],
        ewwr: values[9],
    }
}

/// Parses the normalized per-move CSV (header [`CSV_HEADER`]).
/// All-or-nothing: any row error fails the whole parse.
pub fn parse_records_csv(path: &Path) -> Result<ParsedDataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_records_str(&text, &path.display().to_string())
}

pub fn parse_records_str(text: &str, source: &str) -> Result<ParsedDataset, DatasetError> {
    let (rows, warnings) =
        parse_rows(text, CSV_HEADER).map_err(|errors| DatasetError::Rows { errors })?;
    let mut errors = Vec::new();
    let raw: Vec<(u64, GameRecord)> = rows
        .iter()
        .map(|(line, values)| (*line, build_record(*line, values, &mut errors)))
        .collect();
    if !errors.is_empty() {
        return Err(DatasetError::Rows { errors });
    }
    finalize_records(raw, source.to_string(), NormalizationMode::PreNormalized, warnings)
}

/// Parses the raw-counts CSV variant (header [`RAW_CSV_HEADER`], integer
/// `dbsn_raw`/`dwsn_raw` columns) and normalizes the counts per `mode`.
pub fn parse_raw_records_csv(
    path: &Path,
    mode: NormalizationMode,
) -> Result<ParsedDataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_raw_records_str(&text, &path.display().to_string(), mode)
}

pub fn parse_raw_records_str(
    text: &str,
    source: &str,
    mode: NormalizationMode,
) -> Result<ParsedDataset, DatasetError> {
    let (rows, warnings) =
        parse_rows(text, RAW_CSV_HEADER).map_err(|errors| DatasetError::Rows { errors })?;
    let mut errors = Vec::new();
    let mut raw: Vec<(u64, GameRecord, u64, u64)> = Vec::with_capacity(rows.len());
    for (line, values) in &rows {
        let bsn = integral_field(*line, "dbsn_raw", values[2], &mut errors) as u64;
        let wsn = integral_field(*line, "dwsn_raw", values[3], &mut errors) as u64;
        let mut shifted = values.clone();
        // Raw counts bypass the [0,1] range check; placeholders pass it.
        shifted[2] = 0.0;
        shifted[3] = 0.0;
        let rec = build_record(*line, &shifted, &mut errors);
        raw.push((*line, rec, bsn, wsn));
    }
    if !errors.is_empty() {
        return Err(DatasetError::Rows { errors });
    }

    // Normalize black and white counts independently over the chosen scope.
    let scope_key = |r: &GameRecord| match mode {
        NormalizationMode::GlobalMax => 0,
        _ => r.game_no,
    };
    let mut maxima: std::collections::BTreeMap<u32, (u64, u64)> = std::collections::BTreeMap::new();
    for (_, rec, bsn, wsn) in &raw {
        let e = maxima.entry(scope_key(rec)).or_insert((0, 0));
        e.0 = e.0.max(*bsn);
        e.1 = e.1.max(*wsn);
    }
    let raw = raw
        .into_iter()
        .map(|(line, mut rec, bsn, wsn)| {
            let (mb, mw) = maxima[&scope_key(&rec)];
            rec.dbsn = bsn as f64 / mb as f64;
            rec.dwsn = wsn as f64 / mw as f64;
            (line, rec)
        })
        .collect();
    finalize_records(raw, source.to_string(), mode, warnings)
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Renders a dataset back to CSV with shortest round-trip decimals, so
/// `parse(write(ds))` reproduces every numeric field exactly.
pub fn write_records_csv(ds: &Dataset) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &ds.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.game_no,
            r.move_no,
            fmt_num(r.dbsn),
            fmt_num(r.dwsn),
            fmt_num(r.dbwr),
            fmt_num(r.dwwr),
            fmt_num(r.dbtmr),
            fmt_num(r.dwtmr),
            fmt_num(r.ebwr),
            fmt_num(r.ewwr),
        ));
    }
    out
}

/// Divides each count by the sequence maximum, mapping the max to exactly 1.
pub fn normalize_simulations(counts: &[u64]) -> Result<Vec<f64>, DatasetError> {
    if counts.is_empty() {
        return Err(DatasetError::EmptyCounts);
    }
    if let Some(&zero) = counts.iter().find(|&&c| c == 0) {
        return Err(DatasetError::NonpositiveCount(zero as i64));
    }
    let max = *counts.iter().max().unwrap() as f64;
    Ok(counts.iter().map(|&c| c as f64 / max).collect())
}

/// Splits by game number: games `1..=boundary` train, the rest test.
pub fn split_by_game(ds: &Dataset, boundary: u32) -> (Dataset, Dataset) {
    let (train, test): (Vec<GameRecord>, Vec<GameRecord>) = ds
        .records
        .iter()
        .partition(|r| r.game_no <= boundary);
    let mk = |records: Vec<GameRecord>| Dataset {
        records,
        provenance: ds.provenance.clone(),
    };
    (mk(train), mk(test))
}

/// Selects the ELF target for one side: EBWR for black, EWWR for white.
pub fn make_view(ds: &Dataset, side: Side) -> TrainingView {
    TrainingView {
        side,
        pairs: ds
            .records
            .iter()
            .map(|r| {
                let desired = match side {
                    Side::Black => r.ebwr,
                    Side::White => r.ewwr,
                };
                (r.inputs(), desired)
            })
            .collect(),
    }
}
