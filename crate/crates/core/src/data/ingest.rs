use std::collections::HashSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::manifest::{ManifestEntry, Role, Split};
use crate::dsp::read_wav;
use crate::error::{Error, Result};

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn content_id(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Registers every `.wav` file in `dir` (sorted by name) under `role` and
/// `split`, with content-hash ids. Files with identical content are listed
/// once.
pub fn ingest(dir: &Path, role: Role, split: Split) -> Result<Vec<ManifestEntry>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.retain(|p| {
        p.is_file()
            && p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
    });
    paths.sort();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for path in paths {
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        read_wav(&path)?;
        let id = content_id(&bytes);
        if !seen.insert(id.clone()) {
            log::warn!("{} duplicates content already ingested as {id}; skipped", path.display());
            continue;
        }
        out.push(ManifestEntry {
            id,
            path,
            role,
            split,
            snr_db: None,
            noise_kind: None,
        });
    }
    Ok(out)
}
