//! Completion stamps that make re-running a finished stage a no-op.
//!
//! A stamp holds a digest of the command, its arguments, the effective
//! configuration and the contents of every input file. It sits next to the
//! output (`<out>.stamp`) or inside an output directory (`.stamp`).

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::failure::{Failure, Kind};

#[derive(Debug, Clone, PartialEq)]
pub struct Stamp {
    path: PathBuf,
    outputs: Vec<PathBuf>,
    digest: String,
}

fn file_digest(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Stamp {
    /// `outputs[0]` decides where the stamp lives; `dir_output` marks it as
    /// a directory.
    pub fn new(command: &str, args: &Value, config: &Value, inputs: &[PathBuf], outputs: &[PathBuf], dir_output: bool) -> Result<Self, Failure> {
        let first = outputs.first().ok_or_else(|| Failure::new(Kind::Usage, "no output path"))?;
        let path = if dir_output {
            first.join(".stamp")
        } else {
            let mut name = first.file_name().unwrap_or_default().to_os_string();
            name.push(".stamp");
            first.with_file_name(name)
        };
        let mut hashed = Vec::new();
        for p in inputs {
            hashed.push(json!([p.display().to_string(), file_digest(p)?]));
        }
        let key = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "args": args,
            "config": config,
            "inputs": hashed,
        });
        Ok(Self { path, outputs: outputs.to_vec(), digest: hex::encode(Sha256::digest(key.to_string().as_bytes())) })
    }

    /// True when every output exists and the stamp records the same digest.
    pub fn is_current(&self) -> bool {
        self.outputs.iter().all(|o| o.exists())
            && fs::read_to_string(&self.path).map(|s| s.trim() == self.digest).unwrap_or(false)
    }

    pub fn write(&self) -> Result<(), Failure> {
        fs::write(&self.path, format!("{}\n", self.digest))
            .map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", self.path.display())))
    }

    /// Drops a stale stamp before a stage runs, so a crash never leaves a
    /// stamp that vouches for partial output.
    pub fn clear(&self) {
        let _ = fs::remove_file(&self.path);
    }
}
