use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::neuralnet::NetSnapshot;
use crate::rl::EpochStats;

pub const CSV_HEADER: &str = "epoch,mean_reward,max_reward,std_reward";

pub fn format_row(s: &EpochStats) -> String {
    format!("{},{:.6},{:.6},{:.6}", s.epoch, s.mean_reward, s.max_reward, s.std_reward)
}

/// Append-only epoch log, flushed after every row.
pub struct CsvLog {
    out: BufWriter<File>,
}

impl CsvLog {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn append(&mut self, s: &EpochStats) -> Result<()> {
        writeln!(self.out, "{}", format_row(s))?;
        self.out.flush()?;
        Ok(())
    }
}

/// Writes a whole stats stream to `path`.
pub fn emit_csv(stats: &[EpochStats], path: &Path) -> Result<()> {
    let mut log = CsvLog::create(path)?;
    stats.iter().try_for_each(|s| log.append(s))
}

/// Contents of `best.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub env: String,
    pub mode: String,
    pub n_qubits: usize,
    pub ansatz_layers: usize,
    #[serde(default)]
    pub per_site: bool,
    pub best_reward: f64,
    pub action: Vec<f64>,
    pub policy: NetSnapshot,
    pub value: NetSnapshot,
    pub log_std: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz_angles: Option<Vec<Vec<f64>>>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
