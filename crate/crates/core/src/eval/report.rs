use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Metrics of one enhanced test mixture.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub id: String,
    pub snr_db: f64,
    pub noise_kind: String,
    pub sdr_db: f64,
    pub si_sdr_db: f64,
    pub lsd_db: f64,
    /// SDR of the unprocessed mixture against the same reference.
    pub input_sdr_db: f64,
}

/// Means over the rows of one `(snr, noise)` condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricCell {
    pub snr_db: f64,
    pub noise_kind: String,
    pub count: usize,
    pub sdr_db: f64,
    pub si_sdr_db: f64,
    pub lsd_db: f64,
    pub input_sdr_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    /// Sorted by noise kind, then SNR.
    pub cells: Vec<MetricCell>,
}

impl MetricReport {
    pub fn from_rows(rows: Vec<MetricRow>) -> Self {
        let mut keys: Vec<(String, f64)> = Vec::new();
        for r in &rows {
            if !keys.iter().any(|(k, s)| *k == r.noise_kind && *s == r.snr_db) {
                keys.push((r.noise_kind.clone(), r.snr_db));
            }
        }
        keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let cells = keys
            .into_iter()
            .map(|(kind, snr)| {
                let members: Vec<&MetricRow> = rows.iter().filter(|r| r.noise_kind == kind && r.snr_db == snr).collect();
                let mean = |f: fn(&MetricRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / members.len() as f64;
                MetricCell {
                    snr_db: snr,
                    noise_kind: kind,
                    count: members.len(),
                    sdr_db: mean(|r| r.sdr_db),
                    si_sdr_db: mean(|r| r.si_sdr_db),
                    lsd_db: mean(|r| r.lsd_db),
                    input_sdr_db: mean(|r| r.input_sdr_db),
                }
            })
            .collect();
        MetricReport { rows, cells }
    }

    pub fn cell(&self, snr_db: f64, noise_kind: &str) -> Option<&MetricCell> {
        self.cells.iter().find(|c| c.snr_db == snr_db && c.noise_kind == noise_kind)
    }

    /// Mean enhanced SDR over every row.
    pub fn mean_sdr(&self) -> f64 {
        self.rows.iter().map(|r| r.sdr_db).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn rows_csv(&self) -> String {
        let mut s = String::from("id,snr_db,noise_kind,sdr_db,si_sdr_db,lsd_db,input_sdr_db\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:?},{},{:?},{:?},{:?},{:?}\n",
                r.id, r.snr_db, r.noise_kind, r.sdr_db, r.si_sdr_db, r.lsd_db, r.input_sdr_db
            ));
        }
        s
    }

    pub fn cells_csv(&self) -> String {
        let mut s = String::from("snr_db,noise_kind,count,sdr_db,si_sdr_db,lsd_db,input_sdr_db\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{:?},{},{},{:?},{:?},{:?},{:?}\n",
                c.snr_db, c.noise_kind, c.count, c.sdr_db, c.si_sdr_db, c.lsd_db, c.input_sdr_db
            ));
        }
        s
    }

    pub fn rows_jsonl(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
            .collect()
    }

    /// Writes `metrics.csv`, `metrics_cells.csv` and `metrics.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("metrics.csv", self.rows_csv()),
            ("metrics_cells.csv", self.cells_csv()),
            ("metrics.jsonl", self.rows_jsonl()),
        ] {
            let path = dir.join(name);
            let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
