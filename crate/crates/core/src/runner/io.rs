//! Diagnostics time series and binary snapshots.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::averaged::csv_error;

/// Version of the CSV and snapshot layouts written by this crate.
pub const FORMAT_VERSION: u32 = 1;

/// Version of the code that produced a run.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Scalar diagnostics sampled at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSeries {
    columns: Vec<String>,
    time: Vec<f64>,
    data: Vec<Vec<f64>>,
}

impl DiagnosticsSeries {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Result<Self> {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        for (i, c) in columns.iter().enumerate() {
            if c.is_empty() || c == "time" || c.contains(',') || columns[..i].contains(c) {
                return Err(Error::Format(format!(
                    "invalid or duplicate column name `{c}`"
                )));
            }
        }
        let data = vec![Vec::new(); columns.len()];
        Ok(Self {
            columns,
            time: Vec::new(),
            data,
        })
    }

    pub fn push(&mut self, t: f64, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Format(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if !t.is_finite() || self.time.last().is_some_and(|&last| t <= last) {
            return Err(Error::Format(format!("time {t} does not increase")));
        }
        if let Some(i) = row.iter().position(|v| v.is_nan()) {
            return Err(Error::Format(format!(
                "NaN in column `{}` at time {t}",
                self.columns[i]
            )));
        }
        self.time.push(t);
        for (col, v) in self.data.iter_mut().zip(row) {
            col.push(*v);
        }
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        if name == "time" {
            return Some(&self.time);
        }
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// CSV text with a header row; floats use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, t) in self.time.iter().enumerate() {
            out.push_str(&format!("{t:e}"));
            for col in &self.data {
                out.push_str(&format!(",{:e}", col[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
        let names: Vec<&str> = header.iter().collect();
        let t_col = names
            .iter()
            .position(|h| *h == "time")
            .ok_or_else(|| Error::Format(format!("{}: no `time` column", path.display())))?;
        let others: Vec<String> = names
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != t_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut series = Self::new(others)?;
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let mut vals = Vec::with_capacity(rec.len());
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Format(format!(
                        "{}: row {}: `{field}` is not a number",
                        path.display(),
                        line + 2
                    ))
                })?;
                vals.push(v);
            }
            let t = vals.remove(t_col);
            series.push(t, &vals)?;
        }
        Ok(series)
    }
}

/// One named axis of a snapshot array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotAxis {
    pub name: String,
    pub len: usize,
    /// Coordinate of the first entry and spacing, for uniform axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Labels of a categorical axis, such as particle attributes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl SnapshotAxis {
    pub fn uniform(name: &str, len: usize, start: f64, step: f64) -> Self {
        Self {
            name: name.into(),
            len,
            start: Some(start),
            step: Some(step),
            labels: Vec::new(),
        }
    }

    pub fn index(name: &str, len: usize) -> Self {
        Self {
            name: name.into(),
            len,
            start: None,
            step: None,
            labels: Vec::new(),
        }
    }

    pub fn labelled(name: &str, labels: &[&str]) -> Self {
        Self {
            name: name.into(),
            len: labels.len(),
            start: None,
            step: None,
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// JSON sidecar describing a raw little-endian `f64` array in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub format_version: u32,
    /// What the array holds, e.g. `particles`, `spinor` or `wigner`.
    pub kind: String,
    pub axes: Vec<SnapshotAxis>,
    pub units: String,
    #[serde(default)]
    pub time: f64,
    #[serde(default)]
    pub step: usize,
    /// Binary file name, relative to the sidecar.
    pub data_file: String,
    /// Free-form descriptors, such as the grid length or physical parameters.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub attributes: serde_json::Map<String, serde_json::Value>,
}

impl SnapshotMeta {
    pub fn new(kind: &str, axes: Vec<SnapshotAxis>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: kind.into(),
            axes,
            units: "normalized: m = e = eps0 = 1".into(),
            time: 0.0,
            step: 0,
            data_file: String::new(),
            attributes: serde_json::Map::new(),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn n_values(&self) -> usize {
        self.axes.iter().map(|a| a.len).product()
    }

    pub fn attribute_f64(&self, key: &str) -> Option<f64> {
        self.attributes.get(key).and_then(serde_json::Value::as_f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub meta: SnapshotMeta,
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn new(meta: SnapshotMeta, data: Vec<f64>) -> Result<Self> {
        if meta.n_values() != data.len() {
            return Err(Error::Format(format!(
                "shape {:?} needs {} values, got {}",
                meta.shape(),
                meta.n_values(),
                data.len()
            )));
        }
        Ok(Self { meta, data })
    }

    /// Writes `<stem>.bin` and then `<stem>.json`, each through a rename.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let bin = format!("{stem}.bin");
        let mut bytes = Vec::with_capacity(8 * self.data.len());
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        write_atomic(&dir.join(&bin), &bytes)?;
        let mut meta = self.meta.clone();
        meta.data_file = bin;
        let json = dir.join(format!("{stem}.json"));
        write_atomic(&json, serde_json::to_string_pretty(&meta)?.as_bytes())?;
        Ok(json)
    }

    /// Reads a sidecar and its binary array.
    pub fn read(sidecar: impl AsRef<Path>) -> Result<Self> {
        let sidecar = sidecar.as_ref();
        let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
        let meta: SnapshotMeta = serde_json::from_str(&text)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "{}: format version {} is not {FORMAT_VERSION}",
                sidecar.display(),
                meta.format_version
            )));
        }
        let bin = sidecar.with_file_name(&meta.data_file);
        let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        if bytes.len() != 8 * meta.n_values() {
            return Err(Error::Format(format!(
                "{}: {} bytes for shape {:?}",
                bin.display(),
                bytes.len(),
                meta.shape()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(meta, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_rejects_bad_rows() {
        let mut s = DiagnosticsSeries::new(["a", "b"]).unwrap();
        s.push(0.0, &[1.0, 2.0]).unwrap();
        assert!(s.push(0.0, &[1.0, 2.0]).is_err());
        assert!(s.push(1.0, &[f64::NAN, 2.0]).is_err());
        assert!(s.push(1.0, &[1.0]).is_err());
        assert!(DiagnosticsSeries::new(["a", "a"]).is_err());
        assert!(DiagnosticsSeries::new(["time"]).is_err());
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut s = DiagnosticsSeries::new(["energy", "charge"]).unwrap();
        for i in 0..20 {
            let t = 0.1 * i as f64;
            s.push(t, &[t.sin() / 3.0, -1e-300 * t]).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        s.write_csv(&p).unwrap();
        assert_eq!(DiagnosticsSeries::read_csv(&p).unwrap(), s);
        assert!(std::fs::read_to_string(&p)
            .unwrap()
            .starts_with("time,energy,charge\n"));
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut meta = SnapshotMeta::new(
            "test",
            vec![
                SnapshotAxis::uniform("x", 3, 0.0, 0.5),
                SnapshotAxis::labelled("c", &["a", "b"]),
            ],
        );
        meta.time = 1.5;
        let snap = Snapshot::new(meta, vec![1.0, -2.0, 3.5, 1e-310, f64::MAX, 0.25]).unwrap();
        let json = snap.write(dir.path(), "s0").unwrap();
        let back = Snapshot::read(&json).unwrap();
        assert_eq!(back.data, snap.data);
        assert_eq!(back.meta.data_file, "s0.bin");
        assert_eq!(back.meta.shape(), vec![3, 2]);
        let leftovers = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .ends_with(".tmp")
            })
            .count();
        assert_eq!(leftovers, 0);
        assert!(Snapshot::new(
            SnapshotMeta::new("x", vec![SnapshotAxis::index("i", 2)]),
            vec![1.0]
        )
        .is_err());
    }
}
