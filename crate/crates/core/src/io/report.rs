//! Structured reports and plain-text plot data.
//!
//! Reports carry no wall-clock timestamps, so identical inputs produce
//! byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "pvtwin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<B> {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub seed: u64,
    /// SHA-256 of the canonical JSON form of the run configuration.
    pub config_hash: String,
    pub body: B,
}

impl<B: Serialize> Report<B> {
    pub fn new(kind: &str, seed: u64, config_hash: String, body: B) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: kind.to_string(),
            seed,
            config_hash,
            body,
        }
    }
}

pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::Serde(e.to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Numeric columns with a one-line header.
pub fn write_plot_data(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| super::series::csv_io(path, e))?;
    w.write_record(header).map_err(|e| super::series::csv_io(path, e))?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::validation(format!("plot row has {} values for {} columns", r.len(), header.len())));
        }
        w.write_record(r.iter().map(|v| v.to_string())).map_err(|e| super::series::csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&("x", 1)).unwrap();
        assert_eq!(a, config_hash(&("x", 1)).unwrap());
        assert_ne!(a, config_hash(&("x", 2)).unwrap());
        assert_eq!(a.len(), 64);
        // known digest of the empty JSON string ""
        assert_eq!(
            config_hash(&"").unwrap(),
            "12ae32cb1ec02d01eda3581b127c1fee3b0dc53572ed6baf239721a03d82e126"
        );
    }

    #[test]
    fn plot_data_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curve.csv");
        write_plot_data(&p, &["epoch", "loss"], &[vec![1.0, 0.5], vec![2.0, 0.25]]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "epoch,loss\n1,0.5\n2,0.25\n");
        assert!(write_plot_data(&p, &["a"], &[vec![1.0, 2.0]]).is_err());
    }
}
