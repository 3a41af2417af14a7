//! On-disk formats. All of them are deterministic byte-for-byte given the
//! same inputs: JSON with fixed struct field order, JSONL with one record
//! per line, no timestamps anywhere.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use slotnav_core::evalkit::Report;
use slotnav_core::model::{ModelConfig, ModelParams};
use slotnav_core::trainer::AdamState;
use slotnav_core::worldsim::{Episode, Vocab, WorldConfig};

use crate::error::CliError;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Sidecar manifest written next to each dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub world: WorldConfig,
    pub seed: u64,
    pub n_scenes: usize,
    pub n_easy: usize,
    pub n_hard: usize,
}

/// `train.jsonl` → `train.config.json`.
pub fn sidecar_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("config.json")
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::io(format!("creating {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item)
            .map_err(|e| CliError::io(format!("encoding record: {e}")))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::io(format!("opening {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            CliError::config(format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("encoding {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Write episodes plus the sidecar manifest.
pub fn write_dataset(
    path: &Path,
    episodes: &[Episode],
    manifest: &DatasetManifest,
) -> Result<(), CliError> {
    write_jsonl(path, episodes)?;
    write_json_pretty(&sidecar_path(path), manifest)
}

/// Read episodes and the sidecar manifest.
pub fn read_dataset(path: &Path) -> Result<(Vec<Episode>, DatasetManifest), CliError> {
    let episodes = read_jsonl(path)?;
    let manifest: DatasetManifest = read_json(&sidecar_path(path))?;
    Ok((episodes, manifest))
}

/// Hex SHA-256 of the canonical JSON of (model config, vocabulary); stored
/// in checkpoints and re-verified on load.
pub fn config_hash(model: &ModelConfig, vocab: &Vocab) -> String {
    let bytes =
        serde_json::to_vec(&(model, vocab)).expect("config serialization cannot fail");
    let mut h = Sha256::new();
    h.update(&bytes);
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    /// Training steps completed when this was written.
    pub step: usize,
    pub config_sha256: String,
    pub model: ModelConfig,
    pub vocab: Vocab,
    pub params: ModelParams,
    pub opt: AdamState,
}

impl Checkpoint {
    pub fn new(
        step: usize,
        model: ModelConfig,
        vocab: Vocab,
        params: ModelParams,
        opt: AdamState,
    ) -> Self {
        let config_sha256 = config_hash(&model, &vocab);
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            step,
            config_sha256,
            model,
            vocab,
            params,
            opt,
        }
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CliError> {
    write_json_pretty(path, ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let ckpt: Checkpoint = read_json(path)?;
    if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "{}: checkpoint schema {} unsupported (expected {})",
            path.display(),
            ckpt.schema_version,
            CHECKPOINT_SCHEMA_VERSION
        )));
    }
    let expect = config_hash(&ckpt.model, &ckpt.vocab);
    if ckpt.config_sha256 != expect {
        return Err(CliError::config(format!(
            "{}: config hash mismatch (stored {}, computed {})",
            path.display(),
            ckpt.config_sha256,
            expect
        )));
    }
    Ok(ckpt)
}

/// Fixed-width metrics table for terminals.
pub fn render_report_table(r: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6} {:>5} {:>9} {:>9} {:>7} {:>7} {:>7}\n",
        "split", "n", "NE(m)", "medNE(m)", "SR", "OSR", "SPL"
    ));
    for (name, s) in [("full", &r.full), ("easy", &r.easy), ("hard", &r.hard)] {
        out.push_str(&format!(
            "{:<6} {:>5} {:>9.2} {:>9.2} {:>7.3} {:>7.3} {:>7.3}\n",
            name, s.n, s.ne, s.ne_median, s.sr, s.osr, s.spl
        ));
    }
    out
}
