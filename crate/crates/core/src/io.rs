//! File formats: mixture and expansion tables (comma-separated, header row),
//! dataset manifests, JSON model bundles and long-format plot data.

mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::curveproc::ExpansionSeries;
use crate::domain::{MixVar, Mixture, ModelBundle, SCHEMA_VERSION};
use crate::error::{Error, Result};

pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticDataset};

pub const MIXTURE_COLUMNS: [&str; 8] = ["id", "wc", "c3a", "c3s", "c2s", "c4af", "cement_content", "air"];
pub const SERIES_COLUMNS: [&str; 3] = ["mixture_id", "t_years", "expansion_percent"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(file: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: PathBuf::from(file),
            source,
        },
        kind => Error::Parse {
            file: file.to_string(),
            line,
            field: None,
            message: format!("{kind:?}"),
        },
    }
}

fn open_table(path: &Path) -> Result<(csv::Reader<File>, HashMap<String, usize>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let name = path.display().to_string();
    let headers = reader.headers().map_err(|e| csv_err(&name, e))?;
    let columns = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_ascii_lowercase(), i))
        .collect();
    Ok((reader, columns))
}

fn require_columns(file: &str, columns: &HashMap<String, usize>, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|&c| {
            columns.get(c).copied().ok_or_else(|| Error::MissingColumn {
                file: file.to_string(),
                column: c.to_string(),
            })
        })
        .collect()
}

/// Parses an optional number. Empty cells are `None`.
fn parse_cell(file: &str, line: usize, field: &str, cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        file: file.to_string(),
        line,
        field: Some(field.to_string()),
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue {
            file: file.to_string(),
            line,
            field: field.to_string(),
        });
    }
    Ok(Some(v))
}

fn required_cell(file: &str, line: usize, field: &str, cell: &str) -> Result<f64> {
    parse_cell(file, line, field, cell)?.ok_or_else(|| Error::Parse {
        file: file.to_string(),
        line,
        field: Some(field.to_string()),
        message: "empty value".into(),
    })
}

/// Reads the mixture table. Empty cells leave the variable absent.
pub fn load_mixtures(path: impl AsRef<Path>) -> Result<Vec<Mixture>> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let (mut reader, columns) = open_table(path)?;
    let idx = require_columns(&file, &columns, &MIXTURE_COLUMNS)?;
    let mut mixtures: Vec<Mixture> = Vec::new();
    let mut seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&file, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record.get(idx[0]).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                file,
                line,
                field: Some("id".into()),
                message: "empty id".into(),
            });
        }
        if seen.insert(id.clone(), line).is_some() {
            return Err(Error::DuplicateId { file, line, id });
        }
        let mut mix = Mixture::new(id);
        for (var, &col) in MixVar::ALL.iter().zip(&idx[1..]) {
            let value = parse_cell(&file, line, var.column(), record.get(col).unwrap_or(""))?;
            if let Some(v) = value.filter(|&v| !var.admits(v)) {
                return Err(Error::RangeViolation {
                    file,
                    line,
                    field: var.column().to_string(),
                    value: v,
                    range: var.range().2,
                });
            }
            mix.set(*var, value);
        }
        mixtures.push(mix);
    }
    if mixtures.is_empty() {
        return Err(Error::NoRows(file));
    }
    Ok(mixtures)
}

/// Reads a long-format expansion table into one series per mixture id, in
/// order of first appearance, each sorted by time. `scale` multiplies every
/// expansion value (100 converts fractions to percent).
pub fn load_series_scaled(path: impl AsRef<Path>, scale: f64) -> Result<Vec<ExpansionSeries>> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let (mut reader, columns) = open_table(path)?;
    let idx = require_columns(&file, &columns, &SERIES_COLUMNS)?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(f64, f64, usize)>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&file, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record.get(idx[0]).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                file,
                line,
                field: Some("mixture_id".into()),
                message: "empty id".into(),
            });
        }
        let t = required_cell(&file, line, "t_years", record.get(idx[1]).unwrap_or(""))?;
        if t < 0.0 {
            return Err(Error::RangeViolation {
                file,
                line,
                field: "t_years".into(),
                value: t,
                range: "[0, inf)",
            });
        }
        let v = required_cell(&file, line, "expansion_percent", record.get(idx[2]).unwrap_or(""))?;
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push((t, v * scale, line));
    }
    if order.is_empty() {
        return Err(Error::NoRows(file));
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut samples = rows.remove(&id).expect("recorded id");
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = samples.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateTimestamp {
                file,
                line: w[0].2.max(w[1].2),
                id,
                t: w[1].0,
            });
        }
        let (times, values) = samples.iter().map(|&(t, v, _)| (t, v)).unzip();
        out.push(ExpansionSeries::new(id, times, values)?);
    }
    Ok(out)
}

/// Reads expansion values given in percent.
pub fn load_series(path: impl AsRef<Path>) -> Result<Vec<ExpansionSeries>> {
    load_series_scaled(path, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionUnit {
    #[default]
    Percent,
    Fraction,
}

/// Points at a mixture table and an expansion table. Relative paths are
/// resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub mixtures_path: PathBuf,
    pub series_path: PathBuf,
    #[serde(default)]
    pub expansion_unit: ExpansionUnit,
    pub schema_version: String,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
        check_schema(&manifest.schema_version)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut manifest.mixtures_path, &mut manifest.series_path] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(manifest)
    }

    /// Loads both tables and pairs each mixture with its series, in mixture
    /// table order.
    pub fn load_dataset(&self) -> Result<Vec<(Mixture, ExpansionSeries)>> {
        let mixtures = load_mixtures(&self.mixtures_path)?;
        let scale = match self.expansion_unit {
            ExpansionUnit::Percent => 1.0,
            ExpansionUnit::Fraction => 100.0,
        };
        let series = load_series_scaled(&self.series_path, scale)?;
        pair_dataset(mixtures, series)
    }
}

/// Matches series to mixtures by id. Every mixture needs exactly one series
/// and every series a mixture.
pub fn pair_dataset(mixtures: Vec<Mixture>, series: Vec<ExpansionSeries>) -> Result<Vec<(Mixture, ExpansionSeries)>> {
    let mut by_id: HashMap<String, ExpansionSeries> = series.into_iter().map(|s| (s.mixture_id.clone(), s)).collect();
    let mut out = Vec::with_capacity(mixtures.len());
    for mix in mixtures {
        let s = by_id
            .remove(&mix.id)
            .ok_or_else(|| Error::InvalidConfig(format!("mixture '{}' has no expansion series", mix.id)))?;
        out.push((mix, s));
    }
    if let Some(orphan) = by_id.keys().min() {
        return Err(Error::InvalidConfig(format!("series '{orphan}' has no mixture row")));
    }
    Ok(out)
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line: e.line(),
        field: None,
        message: e.to_string(),
    }
}

fn major(version: &str) -> &str {
    version.split('.').next().unwrap_or(version)
}

fn check_schema(found: &str) -> Result<()> {
    if major(found) != major(SCHEMA_VERSION) {
        return Err(Error::SchemaVersionMismatch {
            found: found.to_string(),
            expected: SCHEMA_VERSION.to_string(),
        });
    }
    Ok(())
}

/// Writes the bundle as pretty-printed JSON. Floats are written in the
/// shortest form that parses back to the identical value.
pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = bundle_to_string(bundle)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn bundle_to_string(bundle: &ModelBundle) -> Result<String> {
    serde_json::to_string_pretty(bundle).map_err(|e| Error::InvalidConfig(format!("bundle serialization: {e}")))
}

/// A loaded bundle with the dotted paths of any fields this version does
/// not know (they are ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedBundle {
    pub bundle: ModelBundle,
    pub unknown_fields: Vec<String>,
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<LoadedBundle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    bundle_from_str(&text).map_err(|e| match e {
        Error::Parse { line, field, message, .. } => Error::Parse {
            file: path.display().to_string(),
            line,
            field,
            message,
        },
        other => other,
    })
}

pub fn bundle_from_str(text: &str) -> Result<LoadedBundle> {
    let parse = |e: serde_json::Error| Error::Parse {
        file: "<bundle>".into(),
        line: e.line(),
        field: None,
        message: e.to_string(),
    };
    let raw: Value = serde_json::from_str(text).map_err(parse)?;
    let version = raw.get("schema_version").and_then(Value::as_str).ok_or_else(|| Error::Parse {
        file: "<bundle>".into(),
        line: 0,
        field: Some("schema_version".into()),
        message: "missing or not a string".into(),
    })?;
    check_schema(version)?;
    let bundle: ModelBundle = serde_json::from_value(raw.clone()).map_err(parse)?;
    let known = serde_json::to_value(&bundle).map_err(parse)?;
    let mut unknown_fields = BTreeSet::new();
    unknown_keys(&raw, &known, "", &mut unknown_fields);
    for f in &unknown_fields {
        log::warn!("bundle field '{f}' is not recognised and was ignored");
    }
    Ok(LoadedBundle {
        bundle,
        unknown_fields: unknown_fields.into_iter().collect(),
    })
}

fn unknown_keys(raw: &Value, known: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match (raw, known) {
        (Value::Object(r), Value::Object(k)) => {
            for (key, value) in r {
                let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                match k.get(key) {
                    Some(kv) => unknown_keys(value, kv, &path, out),
                    None if value.is_null() => {}
                    None => {
                        out.insert(path);
                    }
                }
            }
        }
        (Value::Array(r), Value::Array(k)) => {
            for (i, (rv, kv)) in r.iter().zip(k).enumerate() {
                unknown_keys(rv, kv, &format!("{prefix}[{i}]"), out);
            }
        }
        _ => {}
    }
}

/// Writes labelled series as a tidy `series_label,t,value` table.
pub fn emit_plot_data(series: &[(String, ExpansionSeries)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if series.is_empty() {
        return Err(Error::InvalidConfig("no series to write".into()));
    }
    let file = File::create(path).map_err(io_err(path))?;
    write_plot_data(series, file).map_err(|e| csv_err(&path.display().to_string(), e))
}

/// Same table as [`emit_plot_data`], to any writer.
pub fn write_plot_data<W: std::io::Write>(series: &[(String, ExpansionSeries)], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series_label", "t", "value"])?;
    for (label, s) in series {
        for (t, v) in s.samples() {
            w.write_record([label.as_str(), &t.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes mixtures in the layout [`load_mixtures`] reads.
pub fn save_mixtures(mixtures: &[Mixture], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let write = |w: &mut csv::Writer<File>| -> std::result::Result<(), csv::Error> {
        w.write_record(MIXTURE_COLUMNS)?;
        for m in mixtures {
            let mut row = vec![m.id.clone()];
            row.extend(MixVar::ALL.iter().map(|&v| m.get(v).map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| csv_err(&name, e))
}

/// Writes series in the long layout [`load_series`] reads.
pub fn save_series(series: &[ExpansionSeries], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let write = |w: &mut csv::Writer<File>| -> std::result::Result<(), csv::Error> {
        w.write_record(SERIES_COLUMNS)?;
        for s in series {
            for (t, v) in s.samples() {
                w.write_record([s.mixture_id.as_str(), &t.to_string(), &v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| csv_err(&name, e))
}

/// Writes a mixture table, a series table and a manifest naming them into
/// `dir`, returning the manifest path.
pub fn save_dataset(dataset: &[(Mixture, ExpansionSeries)], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mixtures: Vec<Mixture> = dataset.iter().map(|(m, _)| m.clone()).collect();
    let series: Vec<ExpansionSeries> = dataset.iter().map(|(_, s)| s.clone()).collect();
    save_mixtures(&mixtures, dir.join("mixtures.csv"))?;
    save_series(&series, dir.join("series.csv"))?;
    let manifest = DatasetManifest {
        mixtures_path: "mixtures.csv".into(),
        series_path: "series.csv".into(),
        expansion_unit: ExpansionUnit::Percent,
        schema_version: SCHEMA_VERSION.to_string(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}
