//! Hunt checkpoints: one JSON record, replaced atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointRecord {
    pub format_version: u32,
    pub program: String,
    #[serde(with = "collatz_core::decimal")]
    pub n0: BigUint,
    pub iterations_done: u64,
    #[serde(with = "collatz_core::decimal")]
    pub current: BigUint,
    pub max_bits_seen: u64,
    pub rule_fire_counts: Vec<u64>,
}

/// Writes next to `path` and renames over it, so readers only ever see a
/// complete record.
pub fn write_checkpoint(record: &CheckpointRecord, path: &Path) -> CliResult<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let text = serde_json::to_string_pretty(record).expect("checkpoint serializes");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> CliResult<CheckpointRecord> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Domain(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::Domain(format!("corrupt checkpoint {}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
        Some(v) => {
            return Err(CliError::Domain(format!(
                "checkpoint {} has format version {v}, expected {CHECKPOINT_VERSION}; refusing to resume",
                path.display()
            )))
        }
        None => {
            return Err(CliError::Domain(format!(
                "checkpoint {} has no format version; refusing to resume",
                path.display()
            )))
        }
    }
    serde_json::from_value(value).map_err(bad)
}
