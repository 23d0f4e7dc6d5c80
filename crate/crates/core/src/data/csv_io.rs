use super::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// `{"kinds": {"col": "continuous" | "discrete"}}`
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindsSidecar {
    pub kinds: BTreeMap<String, ColumnKind>,
}

pub fn load_kinds_sidecar(path: impl AsRef<Path>) -> Result<KindsSidecar> {
    let s = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&s)?)
}

/// Reads a CSV with a header row. Rows are 1-based data rows in error locations
/// (the header is row 0); columns are 1-based.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let labels: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            column: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() > labels.len() {
            return Err(Error::Parse {
                row,
                column: labels.len() + 1,
                message: "more cells than header columns".into(),
            });
        }
        for j in 0..labels.len() {
            let cell = rec.get(j).map(str::trim).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: "missing value".into(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: "non-finite value".into(),
                });
            }
            columns[j].push(v);
        }
    }
    Dataset::new(labels, columns)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let f = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(f))
}

/// Writes with shortest round-trip float formatting.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(data.labels()).map_err(io)?;
    for i in 0..data.n_rows() {
        let row: Vec<String> = (0..data.n_cols())
            .map(|j| {
                let v = data.column(j)[i];
                if data.kinds()[j] == ColumnKind::Discrete {
                    format!("{}", v as i64)
                } else {
                    format!("{v}")
                }
            })
            .collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(f))
}

impl Dataset {
    /// Applies a kinds sidecar; unknown column names are a configuration error.
    pub fn apply_kinds(&mut self, sidecar: &KindsSidecar) -> Result<()> {
        for (name, &kind) in &sidecar.kinds {
            let j = self
                .index_of(name)
                .ok_or_else(|| Error::Config(format!("kinds sidecar names unknown column `{name}`")))?;
            self.set_kind(j, kind)?;
        }
        Ok(())
    }
}
