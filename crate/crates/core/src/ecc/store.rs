use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::netmodel::BusId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    candidate: BusId,
    bus_index: Vec<BusId>,
    plan_hash: String,
    provenance: serde_json::Value,
}

/// Directory of per-candidate covariances: `W_<bus>.csv` holds the matrix,
/// `W_<bus>.json` the bus index, the study key and provenance.
#[derive(Debug, Clone)]
pub struct CovarianceStore {
    dir: PathBuf,
    key: String,
}

pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("out")));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl CovarianceStore {
    pub fn new(dir: impl Into<PathBuf>, key: impl Into<String>) -> Self {
        CovarianceStore { dir: dir.into(), key: key.into() }
    }

    fn paths(&self, candidate: BusId) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("W_{candidate}.csv")), self.dir.join(format!("W_{candidate}.json")))
    }

    pub fn save(&self, candidate: BusId, w: &CovarianceMatrix, provenance: serde_json::Value) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let (csv_path, json_path) = self.paths(candidate);
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for r in 0..w.dim() {
            let row: Vec<String> = (0..w.dim()).map(|c| w.matrix[(r, c)].to_string()).collect();
            out.write_record(&row)?;
        }
        let bytes = out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_atomic(&csv_path, &bytes)?;
        let side = Sidecar { candidate, bus_index: w.bus_index.clone(), plan_hash: self.key.clone(), provenance };
        write_atomic(&json_path, serde_json::to_string_pretty(&side)?.as_bytes())?;
        Ok(())
    }

    /// `Ok(None)` when nothing is stored for the candidate; an error when the
    /// stored entry belongs to a different study.
    pub fn load(&self, candidate: BusId) -> Result<Option<CovarianceMatrix>> {
        let (csv_path, json_path) = self.paths(candidate);
        if !json_path.exists() || !csv_path.exists() {
            return Ok(None);
        }
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(&json_path)?)?;
        if side.plan_hash != self.key {
            return Err(Error::CacheMismatch(format!(
                "{} was built for study {} but the current study is {}; rerun with --rebuild",
                json_path.display(),
                side.plan_hash,
                self.key
            )));
        }
        if side.candidate != candidate {
            return Err(Error::CacheMismatch(format!(
                "{} describes candidate {}",
                json_path.display(),
                side.candidate
            )));
        }
        let n = side.bus_index.len();
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(&csv_path)?;
        let mut values = Vec::with_capacity(n * n);
        for rec in r.records() {
            let rec = rec?;
            for f in rec.iter() {
                values
                    .push(f.parse::<f64>().map_err(|e| Error::CacheMismatch(format!("{}: {e}", csv_path.display())))?);
            }
        }
        if values.len() != n * n {
            return Err(Error::CacheMismatch(format!(
                "{} holds {} values, expected {}",
                csv_path.display(),
                values.len(),
                n * n
            )));
        }
        Ok(Some(CovarianceMatrix { bus_index: side.bus_index, matrix: DMatrix::from_row_slice(n, n, &values) }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_key_guard() {
        let dir = tempfile::tempdir().unwrap();
        let w = CovarianceMatrix {
            bus_index: vec![3, 7],
            matrix: DMatrix::from_row_slice(2, 2, &[0.1 + 0.2, 1e-17, 1e-17, std::f64::consts::PI]),
        };
        let store = CovarianceStore::new(dir.path(), "abc");
        assert!(store.load(3).unwrap().is_none());
        store.save(3, &w, serde_json::json!({"tool": "test"})).unwrap();
        assert_eq!(store.load(3).unwrap().unwrap(), w);
        let other = CovarianceStore::new(dir.path(), "def");
        assert!(matches!(other.load(3), Err(Error::CacheMismatch(_))));
    }
}
