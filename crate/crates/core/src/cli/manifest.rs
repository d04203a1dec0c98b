use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Provenance record written next to a run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the resolved parameters as compact JSON.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub timestamp: String,
    pub parameters: Value,
    pub outputs: Vec<String>,
}

pub fn config_hash(parameters: &Value) -> String {
    let bytes = serde_json::to_vec(parameters).expect("JSON values serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files for one run directory.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_owned(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_owned());
        Ok(path)
    }

    /// Lists a file written outside the directory.
    pub fn record_external(&mut self, path: &Path) {
        self.written.push(path.display().to_string());
    }

    /// Writes the manifest last, via a temporary file and a rename.
    pub fn finish(self, command_line: Vec<String>, seed: u64, parameters: Value) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command_line,
            config_hash: config_hash(&parameters),
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            parameters,
            outputs: self.written,
        };
        let mut body = serde_json::to_vec_pretty(&manifest).map_err(CliError::io)?;
        body.push(b'\n');
        let tmp = self.dir.join(format!(".{MANIFEST_NAME}.tmp"));
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&tmp, &body).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"n": 10, "tau": 1.0}));
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash(&serde_json::json!({"n": 10, "tau": 1.0})));
        assert_ne!(a, config_hash(&serde_json::json!({"n": 11, "tau": 1.0})));
    }

    #[test]
    fn manifest_lists_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&tmp.path().join("run")).unwrap();
        out.write("a.csv", b"x\n1\n").unwrap();
        let path = out.finish(vec!["prog".into()], 3, serde_json::json!({"seed": 3})).unwrap();
        let m: Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
        assert_eq!(m["outputs"], serde_json::json!(["a.csv"]));
        assert_eq!(m["seed"], 3);
        assert!(!tmp.path().join("run").join(".manifest.json.tmp").exists());
    }
}
