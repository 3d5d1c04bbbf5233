//! Binary checkpoint: magic, format version, a JSON header describing the
//! tensors, then every tensor as little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::params::ParamStore;
use super::tensor::Matrix;
use super::Seq2SeqError;

const MAGIC: &[u8; 8] = b"PGACKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: Value,
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Model family, e.g. `planner` or `abstractor`.
    pub kind: String,
    /// Configuration and vocabulary, kept as free-form JSON.
    pub meta: Value,
    pub params: ParamStore,
}

fn corrupt(msg: impl Into<String>) -> Seq2SeqError {
    Seq2SeqError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), Seq2SeqError> {
        let header = Header {
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            names: self.params.names().to_vec(),
            shapes: self.params.tensors().iter().map(Matrix::shape).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for t in self.params.tensors() {
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, Seq2SeqError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(corrupt("not a checkpoint file"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported checkpoint version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let mut json = vec![0u8; u64::from_le_bytes(b8) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| corrupt(format!("bad header: {e}")))?;
        if header.names.len() != header.shapes.len() {
            return Err(corrupt("header names and shapes differ in length"));
        }
        let mut tensors = Vec::with_capacity(header.shapes.len());
        for &(rows, cols) in &header.shapes {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                r.read_exact(&mut b8)?;
                data.push(f64::from_le_bytes(b8));
            }
            tensors.push(Matrix::from_vec(rows, cols, data));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(corrupt("trailing bytes after tensors"));
        }
        let params = ParamStore::from_parts(header.names, tensors);
        if !params.all_finite() {
            return Err(corrupt("checkpoint holds non-finite values"));
        }
        Ok(Self { kind: header.kind, meta: header.meta, params })
    }

    pub fn save(&self, path: &Path) -> Result<(), Seq2SeqError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Seq2SeqError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    /// Loads a checkpoint and checks its model family.
    pub fn load_kind(path: &Path, kind: &str) -> Result<Self, Seq2SeqError> {
        let ck = Self::load(path)?;
        if ck.kind != kind {
            return Err(Seq2SeqError::Checkpoint(format!(
                "{} is a checkpoint of kind `{}`, expected `{kind}`",
                path.display(),
                ck.kind
            )));
        }
        Ok(ck)
    }
}
