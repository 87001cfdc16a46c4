use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Clean,
    Noise,
    Mixture,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Fae,
    Dae,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Clean => "clean",
            Role::Noise => "noise",
            Role::Mixture => "mixture",
        })
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Fae => "fae",
            Split::Dae => "dae",
            Split::Test => "test",
        })
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(Role::Clean),
            "noise" => Ok(Role::Noise),
            "mixture" => Ok(Role::Mixture),
            other => Err(Error::Data(format!("unknown role `{other}`"))),
        }
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fae" => Ok(Split::Fae),
            "dae" => Ok(Split::Dae),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split `{other}`"))),
        }
    }
}

/// One audio file and its place in the protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub role: Role,
    pub split: Split,
    pub snr_db: Option<f64>,
    pub noise_kind: Option<String>,
}

impl ManifestEntry {
    /// Utterance a mixture was made from; mixture ids are
    /// `<source>@<noise>@<snr>`.
    pub fn source_id(&self) -> &str {
        match self.role {
            Role::Mixture => self.id.split('@').next().unwrap_or(&self.id),
            _ => &self.id,
        }
    }
}

/// Mixture id for `source` mixed with `noise_kind` at `snr_db`.
pub fn mixture_id(source: &str, noise_kind: &str, snr_db: f64) -> String {
    format!("{source}@{noise_kind}@{snr_db}")
}

const HEADER: &str = "id\tpath\trole\tsplit\tsnr_db\tnoise_kind";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Manifest { entries };
        m.validate()?;
        Ok(m)
    }

    /// Unique ids, and no utterance or file shared between splits.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Data(format!("duplicate manifest id `{}`", e.id)));
            }
        }
        let mut owner: BTreeMap<String, Split> = BTreeMap::new();
        for e in &self.entries {
            let mut keys = vec![format!("path:{}", e.path.display())];
            if e.role != Role::Noise {
                keys.push(format!("utt:{}", e.source_id()));
            }
            for key in keys {
                match owner.get(&key) {
                    Some(&s) if s != e.split => {
                        return Err(Error::Data(format!(
                            "`{}` appears in both the {s} and {} splits ({key})",
                            e.id, e.split
                        )))
                    }
                    _ => {
                        owner.insert(key, e.split);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn select(&self, role: Role, split: Split) -> Vec<&ManifestEntry> {
        self.entries
            .iter()
            .filter(|e| e.role == role && e.split == split)
            .collect()
    }

    pub fn find(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// TSV text with paths written relative to `base` where possible.
    pub fn to_tsv(&self, base: &Path) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for e in &self.entries {
            let path = e.path.strip_prefix(base).unwrap_or(&e.path);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                e.id,
                path.display(),
                e.role,
                e.split,
                e.snr_db.map_or("-".to_string(), |v| v.to_string()),
                e.noise_kind.as_deref().unwrap_or("-"),
            ));
        }
        out
    }

    /// Parses TSV text, resolving relative paths against `base`.
    pub fn from_tsv(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') || (n == 0 && line == HEADER) {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(Error::Data(format!(
                    "manifest line {}: expected 6 tab-separated fields, got {}",
                    n + 1,
                    f.len()
                )));
            }
            let path = PathBuf::from(f[1]);
            let snr_db = match f[4] {
                "-" | "" => None,
                s => Some(s.parse::<f64>().map_err(|_| {
                    Error::Data(format!("manifest line {}: bad snr `{s}`", n + 1))
                })?),
            };
            entries.push(ManifestEntry {
                id: f[0].to_string(),
                path: if path.is_absolute() { path } else { base.join(path) },
                role: f[2].parse()?,
                split: f[3].parse()?,
                snr_db,
                noise_kind: match f[5] {
                    "-" | "" => None,
                    s => Some(s.to_string()),
                },
            });
        }
        Manifest::new(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        std::fs::write(path, self.to_tsv(base)).map_err(|e| Error::io(path, e))
    }

    /// Loads and validates a manifest file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::from_tsv(&text, path.parent().unwrap_or(Path::new("")))
    }
}
