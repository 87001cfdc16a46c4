//! The toggle lattice: multi-resolution, phase awareness and the backward
//! cycle, trained and scored on the same corpus.

use std::io::Write;
use std::path::Path;

use crate::config::RunConfig;
use crate::data::Manifest;
use crate::error::{Error, Result};
use crate::eval::{evaluate_set, ModelEnhancer};
use crate::model::ArchConfig;
use crate::train::{load_training_sets, train_dae, train_fae};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Toggles {
    pub multi_resolution: bool,
    pub phase_aware: bool,
    pub ccc: bool,
}

impl Toggles {
    pub const FULL: Toggles = Toggles {
        multi_resolution: true,
        phase_aware: true,
        ccc: true,
    };

    pub fn is_valid(self) -> bool {
        !self.ccc || self.phase_aware
    }

    pub fn label(self) -> String {
        let on = |b: bool| if b { "on" } else { "off" };
        format!("mr-{}_pa-{}_ccc-{}", on(self.multi_resolution), on(self.phase_aware), on(self.ccc))
    }

    /// The full method with one contribution removed. Removing phase
    /// awareness also removes the cycle, which needs it.
    pub fn single_removals() -> [Toggles; 3] {
        [
            Toggles {
                multi_resolution: false,
                ..Self::FULL
            },
            Toggles {
                phase_aware: false,
                ccc: false,
                ..Self::FULL
            },
            Toggles {
                ccc: false,
                ..Self::FULL
            },
        ]
    }

    fn apply(self, cfg: &RunConfig) -> RunConfig {
        let mut c = cfg.clone();
        c.arch.multi_resolution = self.multi_resolution;
        c.arch.phase_aware = self.phase_aware;
        c.train.ccc = self.ccc;
        c
    }
}

/// Every valid combination, baseline first and the full method last.
pub fn lattice() -> Vec<Toggles> {
    let mut out = Vec::new();
    for phase_aware in [false, true] {
        for ccc in [false, true] {
            for multi_resolution in [false, true] {
                let t = Toggles {
                    multi_resolution,
                    phase_aware,
                    ccc,
                };
                if t.is_valid() {
                    out.push(t);
                }
            }
        }
    }
    out
}

/// Test-set scores of one toggle row, one entry per seed.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub toggles: Toggles,
    pub seeds: Vec<u64>,
    pub sdr_db: Vec<f64>,
    pub si_sdr_db: Vec<f64>,
    pub lsd_db: Vec<f64>,
    /// Mean SDR of the unprocessed test mixtures.
    pub input_sdr_db: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl AblationRow {
    pub fn mean_sdr(&self) -> f64 {
        mean(&self.sdr_db)
    }
}

/// Trains and evaluates each row of `rows` once per seed.
pub fn run_ablation(manifest: &Manifest, base: &RunConfig, rows: &[Toggles], seeds: &[u64]) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() || rows.is_empty() {
        return Err(Error::Config("ablation needs at least one row and one seed".into()));
    }
    let (fae_items, dae_items) = load_training_sets(manifest, base.arch.sample_rate)?;
    let mut out = Vec::new();
    for &t in rows {
        if !t.is_valid() {
            return Err(Error::Config(format!("{} is not a valid toggle row", t.label())));
        }
        let mut row = AblationRow {
            toggles: t,
            seeds: seeds.to_vec(),
            sdr_db: Vec::new(),
            si_sdr_db: Vec::new(),
            lsd_db: Vec::new(),
            input_sdr_db: 0.0,
        };
        for &seed in seeds {
            let mut cfg = t.apply(base);
            cfg.train.seed = seed;
            cfg.validate()?;
            let arch: &ArchConfig = &cfg.arch;
            let fae = train_fae(&fae_items, arch, &cfg.train, None)?;
            let dae = train_dae(&dae_items, &fae.params, arch, &cfg.train, None)?;
            let enhancer = ModelEnhancer {
                arch: arch.clone(),
                fae: fae.params,
                dae: dae.params,
            };
            let rep = evaluate_set(manifest, &enhancer, arch.sample_rate)?;
            let n = rep.rows.len() as f64;
            row.sdr_db.push(rep.mean_sdr());
            row.si_sdr_db.push(rep.rows.iter().map(|r| r.si_sdr_db).sum::<f64>() / n);
            row.lsd_db.push(rep.rows.iter().map(|r| r.lsd_db).sum::<f64>() / n);
            row.input_sdr_db = rep.rows.iter().map(|r| r.input_sdr_db).sum::<f64>() / n;
            log::info!("{} seed {seed}: mean SDR {:.3} dB", t.label(), rep.mean_sdr());
        }
        out.push(row);
    }
    Ok(out)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from(
        "multi_resolution,phase_aware,ccc,seeds,sdr_db,si_sdr_db,lsd_db,input_sdr_db,sdr_db_per_seed\n",
    );
    for r in rows {
        let per: Vec<String> = r.sdr_db.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&format!(
            "{},{},{},{},{:?},{:?},{:?},{:?},{}\n",
            r.toggles.multi_resolution,
            r.toggles.phase_aware,
            r.toggles.ccc,
            r.seeds.len(),
            r.mean_sdr(),
            mean(&r.si_sdr_db),
            mean(&r.lsd_db),
            r.input_sdr_db,
            per.join(";")
        ));
    }
    s
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(ablation_csv(rows).as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_corpus, CorpusConfig};

    #[test]
    fn lattice_has_every_valid_row_once() {
        let rows = lattice();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|t| t.is_valid()));
        assert_eq!(rows[0], Toggles { multi_resolution: false, phase_aware: false, ccc: false });
        assert_eq!(*rows.last().unwrap(), Toggles::FULL);
        for r in Toggles::single_removals() {
            assert!(rows.contains(&r));
        }
    }

    #[test]
    fn tiny_sweep_writes_a_comparable_table() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = CorpusConfig {
            n_fae: 2,
            n_dae: 2,
            n_test: 1,
            utterance_len: 1024 + 4 * 32,
            snr_grid: vec![0.0],
            ..CorpusConfig::desk()
        };
        let manifest = synth_corpus(&corpus, 2, dir.path()).unwrap();
        let mut base = RunConfig::desk();
        base.corpus = corpus;
        base.train.fae_epochs = 2;
        base.train.dae_epochs = 2;
        base.train.batch = 2;
        let rows = run_ablation(&manifest, &base, &lattice(), &[1]).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert!(r.mean_sdr().is_finite());
        }
        let csv = ablation_csv(&rows);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().nth(6).unwrap().starts_with("true,true,true,1,"));
    }
}
