//! CSV and JSONL writers. Every file opens with a `#` comment line naming
//! the schema version, the config hash, the base seed, and the episode
//! count, so a reader can tie results back to their inputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::SCHEMA_VERSION;
use crate::error::Result;

/// Provenance written at the top of each output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub episodes: usize,
}

impl Provenance {
    pub fn header_line(&self) -> String {
        format!(
            "# rbpomdp schema={SCHEMA_VERSION} config_hash={} seed={} episodes={}",
            self.config_hash, self.seed, self.episodes
        )
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `rows` as CSV after the provenance line.
pub fn write_csv<T: Serialize>(path: &Path, prov: &Provenance, rows: &[T]) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "{}", prov.header_line())?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one JSON object per line after the provenance line.
pub fn write_jsonl<T: Serialize>(path: &Path, prov: &Provenance, rows: &[T]) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "{}", prov.header_line())?;
    for r in rows {
        serde_json::to_writer(&mut file, r)?;
        writeln!(file)?;
    }
    file.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`], skipping the provenance line.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
