//! Readers for run records, baselines, corpora, parameter and config files,
//! and an atomic writer.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use scalefit_core::records::{ingest_runs, RawRow};
use scalefit_core::{BaselineStats, Direction, FitConfig, PhonemeSequence, RunRecord, ScalingLawParams};
use serde::Deserialize;

use crate::error::InputError;

fn read_text(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io { path: path.into(), source })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, InputError> {
    serde_json::from_str(text).map_err(|source| InputError::Json { path: path.into(), source })
}

/// Reads run records from a CSV (`N,D,seed,<metric>...`) or a JSON array of
/// objects with the same keys. Files ending in `.json` are read as JSON.
pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>, InputError> {
    let text = read_text(path)?;
    if text.trim().is_empty() {
        return Err(InputError::Empty { path: path.into() });
    }
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let rows = if is_json { json_rows(path, &text)? } else { csv_rows(path, &text)? };
    if rows.is_empty() {
        return Err(InputError::Empty { path: path.into() });
    }
    ingest_runs(rows).map_err(|source| InputError::Record { path: path.into(), source })
}

/// Reads several run files and checks for duplicates across them.
pub fn read_all_runs(paths: &[PathBuf]) -> Result<Vec<RunRecord>, InputError> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_runs(p)?);
    }
    if paths.len() > 1 {
        let rows = all.iter().map(|r| RawRow {
            model_size: Some(r.model_size),
            dataset_size: Some(r.dataset_size),
            seed: Some(r.seed),
            metrics: r.metrics.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        });
        let joined = paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ");
        ingest_runs(rows).map_err(|source| InputError::Record { path: joined.into(), source })?;
    }
    Ok(all)
}

fn column_role(name: &str) -> Option<usize> {
    match name {
        "N" | "model_size" => Some(0),
        "D" | "dataset_size" => Some(1),
        "seed" => Some(2),
        _ => None,
    }
}

fn csv_rows(path: &Path, text: &str) -> Result<Vec<RawRow>, InputError> {
    let csv_err = |source| InputError::Csv { path: path.into(), source };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let roles: Vec<Option<usize>> = header.iter().map(|h| column_role(h)).collect();
    for role in 0..3 {
        if roles.iter().filter(|r| **r == Some(role)).count() != 1 {
            return Err(InputError::Header { path: path.into() });
        }
    }
    if roles.iter().all(Option::is_some) {
        return Err(InputError::Header { path: path.into() });
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        // Data row numbers are 1-based, counting from the line after the header.
        let row = i + 1;
        let mut raw = RawRow::default();
        for ((cell, name), role) in record.iter().zip(&header).zip(&roles) {
            if cell.is_empty() {
                continue;
            }
            let bad = || InputError::Cell {
                path: path.into(),
                row,
                column: name.clone(),
                value: cell.into(),
            };
            match role {
                Some(0) => raw.model_size = Some(cell.parse().map_err(|_| bad())?),
                Some(1) => raw.dataset_size = Some(cell.parse().map_err(|_| bad())?),
                Some(_) => raw.seed = Some(parse_seed(cell).ok_or_else(bad)?),
                None => raw.metrics.push((name.clone(), cell.parse().map_err(|_| bad())?)),
            }
        }
        rows.push(raw);
    }
    Ok(rows)
}

/// Seeds are integers; `3.0` is accepted, `3.5` is not.
fn parse_seed(cell: &str) -> Option<i64> {
    cell.parse::<i64>().ok().or_else(|| {
        let v: f64 = cell.parse().ok()?;
        (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
    })
}

fn json_rows(path: &Path, text: &str) -> Result<Vec<RawRow>, InputError> {
    let value: serde_json::Value = parse_json(path, text)?;
    let serde_json::Value::Array(items) = value else {
        return Err(InputError::RunsShape { path: path.into() });
    };
    let mut rows = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let row = i + 1;
        let serde_json::Value::Object(map) = item else {
            return Err(InputError::RunsShape { path: path.into() });
        };
        let mut raw = RawRow::default();
        for (key, v) in map {
            if v.is_null() {
                continue;
            }
            let bad = |v: &serde_json::Value| InputError::Cell {
                path: path.into(),
                row,
                column: key.clone(),
                value: v.to_string(),
            };
            match column_role(&key) {
                Some(0) => raw.model_size = Some(v.as_f64().ok_or_else(|| bad(&v))?),
                Some(1) => raw.dataset_size = Some(v.as_f64().ok_or_else(|| bad(&v))?),
                Some(_) => {
                    let seed = v.as_i64().or_else(|| v.as_f64().and_then(|f| parse_seed(&f.to_string())));
                    raw.seed = Some(seed.ok_or_else(|| bad(&v))?);
                }
                None => raw.metrics.push((key.clone(), v.as_f64().ok_or_else(|| bad(&v))?)),
            }
        }
        rows.push(raw);
    }
    Ok(rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineEntry {
    mean: f64,
    std: f64,
    direction: Direction,
}

/// `{"<metric>": {"mean": .., "std": .., "direction": "lower-better"}}`.
pub fn read_baselines(path: &Path) -> Result<BTreeMap<String, BaselineStats>, InputError> {
    let text = read_text(path)?;
    let entries: BTreeMap<String, BaselineEntry> = parse_json(path, &text)?;
    Ok(entries
        .into_iter()
        .map(|(metric, e)| {
            let stats = BaselineStats { metric: metric.clone(), mean: e.mean, std: e.std, direction: e.direction };
            (metric, stats)
        })
        .collect())
}

/// One whitespace-separated phoneme sequence per line. Blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<PhonemeSequence>, InputError> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let corpus: Vec<PhonemeSequence> = text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| PhonemeSequence::new(format!("{name}:{}", i + 1), line.split_whitespace()))
        .collect();
    if corpus.is_empty() {
        return Err(InputError::Empty { path: path.into() });
    }
    Ok(corpus)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ParamsFile {
    Bare(ScalingLawParams),
    Wrapped { params: ScalingLawParams },
}

/// Law coefficients, either bare (`{"E": .., "A": .., ...}`) or nested under
/// `"params"` as in a saved fit.
pub fn read_params(path: &Path) -> Result<ScalingLawParams, InputError> {
    let text = read_text(path)?;
    let p = match parse_json::<ParamsFile>(path, &text)? {
        ParamsFile::Bare(p) | ParamsFile::Wrapped { params: p } => p,
    };
    p.validate().map_err(|e| InputError::Invalid { path: path.into(), message: e.to_string() })?;
    Ok(p)
}

/// A fit configuration; absent fields take their defaults.
pub fn read_fit_config(path: &Path) -> Result<FitConfig, InputError> {
    let text = read_text(path)?;
    let config: FitConfig = parse_json(path, &text)?;
    config.validate().map_err(|e| InputError::Invalid { path: path.into(), message: e.to_string() })?;
    Ok(config)
}

/// Writes `contents` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), InputError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io_err = |source| InputError::Io { path: path.into(), source };
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
