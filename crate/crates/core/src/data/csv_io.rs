//! Fleet CSV files and manifests.
//!
//! A manifest lists one battery per line as `path[,t_f[,nominal_capacity]]`.
//! Relative paths resolve against the manifest's directory; blank lines and
//! lines starting with `#` are ignored. Each battery CSV carries the header
//! `battery_id,cycle,<channels...>` with cycles numbered 1, 2, 3, ...
//!
//! Without a `t_f` override the failure cycle is the first cycle whose
//! discharge capacity drops below 80% of nominal; without a nominal override
//! the first cycle's discharge capacity is taken as nominal.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;

use super::trace::{first_eol_crossing, BatteryTrace, CycleRecord, Fleet, CAPACITY_CHANNEL, CHANNELS};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
struct ManifestEntry {
    path: PathBuf,
    t_f: Option<u32>,
    nominal: Option<f64>,
    line: usize,
}

fn parse_manifest(manifest_path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let name = manifest_path.display().to_string();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() > 3 || fields[0].is_empty() {
            return Err(Error::parse(&name, i + 1, "expected `path[,t_f[,nominal_capacity]]`"));
        }
        let t_f = match fields.get(1) {
            Some(s) if !s.is_empty() => Some(
                s.parse::<u32>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| Error::parse(&name, i + 1, format!("invalid t_f `{s}`")))?,
            ),
            _ => None,
        };
        let nominal = match fields.get(2) {
            Some(s) if !s.is_empty() => Some(
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v > 0.0)
                    .ok_or_else(|| Error::parse(&name, i + 1, format!("invalid nominal capacity `{s}`")))?,
            ),
            _ => None,
        };
        entries.push(ManifestEntry {
            path: base.join(fields[0]),
            t_f,
            nominal,
            line: i + 1,
        });
    }
    Ok(entries)
}

fn read_battery_csv(entry: &ManifestEntry) -> Result<BatteryTrace> {
    let file = entry.path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&entry.path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(&entry.path, io),
            other => Error::parse(&file, 1, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(&file, 1, e.to_string()))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(&file, 1, format!("missing column `{name}`")))
    };
    let id_col = column("battery_id")?;
    let cycle_col = column("cycle")?;
    let channel_cols = CHANNELS.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?;

    let mut battery_id: Option<String> = None;
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(&file, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let id = row.get(id_col).unwrap_or_default();
        match &battery_id {
            None => battery_id = Some(id.to_string()),
            Some(prev) if prev != id => {
                return Err(Error::parse(
                    &file,
                    line,
                    format!("battery_id changes from `{prev}` to `{id}`"),
                ))
            }
            Some(_) => {}
        }
        let cycle_str = row.get(cycle_col).unwrap_or_default();
        let cycle: u32 = cycle_str
            .parse()
            .map_err(|_| Error::parse(&file, line, format!("non-numeric cycle `{cycle_str}`")))?;
        let expected = records.len() as u32 + 1;
        if cycle != expected {
            return Err(Error::parse(
                &file,
                line,
                format!("cycles must be sorted and contiguous from 1: expected {expected}, found {cycle}"),
            ));
        }
        let mut values = Vec::with_capacity(CHANNELS.len());
        for (name, &col) in CHANNELS.iter().zip(&channel_cols) {
            let cell = row.get(col).unwrap_or_default();
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(&file, line, format!("column `{name}` holds non-numeric value `{cell}`"))
                })?;
            values.push(v);
        }
        records.push(CycleRecord {
            cycle_index: cycle,
            values,
        });
    }
    let battery_id =
        battery_id.ok_or_else(|| Error::parse(&file, 2, "file contains no cycle rows"))?;
    let nominal = entry
        .nominal
        .unwrap_or(records[0].values[CAPACITY_CHANNEL]);
    let t_f = match entry.t_f {
        Some(t) => t,
        None => {
            let capacity: Vec<f64> = records.iter().map(|r| r.values[CAPACITY_CHANNEL]).collect();
            first_eol_crossing(&capacity, nominal).ok_or_else(|| {
                Error::parse(
                    &file,
                    entry.line,
                    "capacity never drops below 80% of nominal; supply t_f in the manifest",
                )
            })?
        }
    };
    let trace = BatteryTrace {
        battery_id,
        channels: CHANNELS.iter().map(|c| c.to_string()).collect(),
        records,
        t_f,
        nominal_capacity: nominal,
    };
    trace
        .validate()
        .map_err(|e| Error::parse(&file, entry.line, e.to_string()))?;
    Ok(trace)
}

/// Loads every battery listed in a manifest.
pub fn load_csv(manifest_path: &Path) -> Result<Fleet> {
    let entries = parse_manifest(manifest_path)?;
    if entries.is_empty() {
        warn!("manifest {} lists no batteries", manifest_path.display());
    }
    let traces = entries.iter().map(read_battery_csv).collect::<Result<Vec<_>>>()?;
    let fleet = Fleet::new(traces);
    fleet
        .validate()
        .map_err(|e| Error::parse(manifest_path.display().to_string(), 0, e.to_string()))?;
    Ok(fleet)
}

/// Writes one CSV per battery plus a manifest carrying `t_f` and nominal capacity.
/// Returns the manifest path.
pub fn write_fleet_csv(fleet: &Fleet, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("# path,t_f,nominal_capacity\n");
    for trace in &fleet.traces {
        let name = format!("{}.csv", trace.battery_id);
        let path = dir.join(&name);
        let mut out = String::new();
        out.push_str("battery_id,cycle");
        for ch in &trace.channels {
            out.push(',');
            out.push_str(ch);
        }
        out.push('\n');
        for rec in &trace.records {
            out.push_str(&trace.battery_id);
            out.push(',');
            out.push_str(&rec.cycle_index.to_string());
            for v in &rec.values {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        write_file(&path, out.as_bytes())?;
        manifest.push_str(&format!("{name},{},{}\n", trace.t_f, trace.nominal_capacity));
    }
    let manifest_path = dir.join(MANIFEST_NAME);
    write_file(&manifest_path, manifest.as_bytes())?;
    Ok(manifest_path)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
