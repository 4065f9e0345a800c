//! CSV tables, plot data, run manifests and flow checkpoints.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            // 17 significant digits
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Float(x) => Some(x),
            Cell::Int(i) => Some(i as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map(Into::into).unwrap_or(Cell::Empty)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.column(name).and_then(|c| self.rows.get(row).map(|r| &r[c]))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(vec![]);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Long-format plot data `(series, x, y)`.
#[derive(Debug, Clone, Default)]
pub struct PlotData {
    pub name: String,
    pub points: Vec<(String, f64, f64)>,
}

impl PlotData {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            points: vec![],
        }
    }

    pub fn push(&mut self, series: impl Into<String>, x: f64, y: f64) {
        self.points.push((series.into(), x, y));
    }

    pub fn series_len(&self, series: &str) -> usize {
        self.points.iter().filter(|p| p.0 == series).count()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&self.name, &["series", "x", "y"]);
        for (s, x, y) in &self.points {
            t.push(vec![s.as_str().into(), (*x).into(), (*y).into()]);
        }
        t
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_sha256: String,
    pub tool_version: String,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub seed: Option<u64>,
    pub threads: usize,
    pub tol_scale: f64,
    pub outputs: Vec<OutputFile>,
    /// Known conflicts between stated formulas and computed values surfaced by the run.
    pub conflicts: Vec<String>,
    /// Checks that exceeded their tolerance.
    pub failures: Vec<String>,
}

/// Writes `bytes` under `dir` and returns its manifest entry.
pub fn write_output(dir: &Path, name: &str, bytes: &[u8]) -> Result<OutputFile> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(OutputFile {
        path: name.into(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len(),
    })
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(manifest)?)?;
    Ok(path)
}

const MAGIC: &[u8; 8] = b"AHFLOWCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Flow checkpoint: node values of a discrete map.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub alpha: f64,
    pub iteration: u64,
    pub source_dim: u32,
    pub n_per_axis: u32,
    pub values: Vec<Vec<f64>>,
}

impl Checkpoint {
    /// Layout (little endian): magic, version u32, source dim u32, grid size
    /// u32, value dim u32, node count u64, iteration u64, α f64, then the node
    /// values row by row.
    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.values.first().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(48 + 8 * dim * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.source_dim.to_le_bytes());
        out.extend_from_slice(&self.n_per_axis.to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        for v in &self.values {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut u32_ = || -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| Error::Checkpoint("truncated header".into()))?;
            Ok(u32::from_le_bytes(b))
        };
        let version = u32_()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let source_dim = u32_()?;
        let n_per_axis = u32_()?;
        let dim = u32_()? as usize;
        let mut eight = |what: &str| -> Result<[u8; 8]> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)
                .map_err(|_| Error::Checkpoint(format!("truncated {what}")))?;
            Ok(b)
        };
        let count = u64::from_le_bytes(eight("header")?) as usize;
        let iteration = u64::from_le_bytes(eight("header")?);
        let alpha = f64::from_le_bytes(eight("header")?);
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                v.push(f64::from_le_bytes(eight("values")?));
            }
            values.push(v);
        }
        Ok(Self {
            alpha,
            iteration,
            source_dim,
            n_per_axis,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_full_precision() {
        let mut t = Table::new("t", &["a", "b", "c"]);
        t.push(vec![0.1.into(), Cell::Int(3), "x,y".into()]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b,c\r\n1.0000000000000001e-1,3,\"x,y\"\r\n");
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = Checkpoint {
            alpha: 2.0,
            iteration: 17,
            source_dim: 1,
            n_per_axis: 3,
            values: vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.6, 0.8, 0.0]],
        };
        let b = c.to_bytes();
        assert_eq!(Checkpoint::from_bytes(&b).unwrap(), c);
        assert!(Checkpoint::from_bytes(&b[..20]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
