//! `manifest.json`: config hash, seed, versions and per-stage file hashes.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub params_hash: String,
    /// Input path to content hash. Artifacts are keyed relative to the
    /// output directory, external files by their configured path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a file, or of every file under a directory (sorted by
/// relative name, names included).
pub fn hash_path(path: &Path) -> std::io::Result<String> {
    if path.is_dir() {
        let mut names: Vec<_> = std::fs::read_dir(path)?
            .filter_map(Result::ok)
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name())
            .collect();
        names.sort();
        let mut h = Sha256::new();
        for n in names {
            h.update(n.to_string_lossy().as_bytes());
            h.update([0u8]);
            h.update(hash_path(&path.join(&n))?.as_bytes());
        }
        return Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect());
    }
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    /// Reads `<outdir>/manifest.json`, or an empty manifest when absent.
    pub fn load(outdir: &Path) -> Result<Manifest, CliError> {
        let p = outdir.join(MANIFEST);
        if !p.exists() {
            return Ok(Manifest::default());
        }
        let text = std::fs::read_to_string(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
    }

    pub fn save(&self, outdir: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(outdir.join(MANIFEST), text)
    }

    /// The stage that last wrote `artifact`, with its recorded hash.
    pub fn producer_of(&self, artifact: &str) -> Option<(&str, &str)> {
        self.stages.iter().find_map(|(s, r)| r.outputs.get(artifact).map(|h| (s.as_str(), h.as_str())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_hash_tracks_names_and_content() {
        let d = tempfile::tempdir().unwrap();
        std::fs::write(d.path().join("a"), "x").unwrap();
        let h1 = hash_path(d.path()).unwrap();
        std::fs::write(d.path().join("a"), "y").unwrap();
        let h2 = hash_path(d.path()).unwrap();
        std::fs::rename(d.path().join("a"), d.path().join("b")).unwrap();
        let h3 = hash_path(d.path()).unwrap();
        assert!(h1 != h2 && h2 != h3);
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn round_trips_through_disk() {
        let d = tempfile::tempdir().unwrap();
        let mut m = Manifest { seed: 3, ..Manifest::default() };
        m.stages.insert(
            "prepare".into(),
            StageRecord {
                params_hash: "p".into(),
                inputs: BTreeMap::new(),
                outputs: [("x.csv".to_string(), "h".to_string())].into(),
            },
        );
        m.save(d.path()).unwrap();
        let back = Manifest::load(d.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.producer_of("x.csv"), Some(("prepare", "h")));
    }
}
