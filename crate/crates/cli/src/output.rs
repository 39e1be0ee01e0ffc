//! Provenance block and writers shared by every command.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: &'static str,
    pub command: &'static str,
    pub master_seed: u64,
    pub partition_seed: Option<u64>,
}

impl Provenance {
    pub fn new(cfg: &ExperimentConfig, command: &'static str) -> Self {
        Self {
            config_hash: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION"),
            command,
            master_seed: cfg.seed,
            partition_seed: cfg.partition.as_ref().map(|_| cfg.partition_seed()),
        }
    }

    /// `# key=value ...` line that opens every CSV output.
    pub fn csv_comment(&self) -> String {
        let mut line = format!(
            "# config_hash={} code_version={} command={} master_seed={}",
            self.config_hash, self.code_version, self.command, self.master_seed
        );
        if let Some(p) = self.partition_seed {
            line.push_str(&format!(" partition_seed={p}"));
        }
        line.push('\n');
        line
    }
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    provenance: &'a Provenance,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, cfg: &ExperimentConfig, body: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(&Wrapped { provenance: prov, config: cfg, body })?;
    std::fs::write(path, text + "\n")?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Runs `fill` on a buffer opened with the provenance comment.
pub fn write_csv(
    path: &Path,
    prov: &Provenance,
    fill: impl FnOnce(&mut Vec<u8>) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let mut buf = prov.csv_comment().into_bytes();
    fill(&mut buf)?;
    std::fs::File::create(path)?.write_all(&buf)?;
    log::info!("wrote {}", path.display());
    Ok(())
}
