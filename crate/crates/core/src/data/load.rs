use std::io;

use rayon::prelude::*;

use super::manifest::ManifestEntry;
use crate::dsp::read_wav;
use crate::error::{Error, Result};

/// Reads the audio of every entry, in order.
///
/// All missing files are reported together in one error, and every file
/// must have `sample_rate`.
pub fn load_signals(entries: &[&ManifestEntry], sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    let missing: Vec<&ManifestEntry> = entries.iter().copied().filter(|e| !e.path.is_file()).collect();
    if let Some(first) = missing.first() {
        let ids: Vec<&str> = missing.iter().map(|e| e.id.as_str()).collect();
        return Err(Error::io(
            &first.path,
            io::Error::new(io::ErrorKind::NotFound, format!("missing audio for ids: {}", ids.join(", "))),
        ));
    }
    entries
        .par_iter()
        .map(|e| {
            let audio = read_wav(&e.path)?;
            if audio.sample_rate != sample_rate {
                return Err(Error::Data(format!(
                    "{} is sampled at {} Hz, expected {sample_rate}",
                    e.id, audio.sample_rate
                )));
            }
            Ok(audio.samples)
        })
        .collect()
}
