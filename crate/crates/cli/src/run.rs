//! Run configuration, its hash, and the output writers that stamp every
//! artifact with it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::{Command, GenWhat};

const FORMAT: &str = "resub-run";

/// Everything needed to reproduce a run, minus where its outputs go.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub format: String,
    pub version: String,
    pub command: Command,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            format: FORMAT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading run config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing run config {}", path.display()))?;
        anyhow::ensure!(
            cfg.format == FORMAT,
            "{} is not a run config",
            path.display()
        );
        Ok(cfg)
    }

    /// SHA-256 of the command's canonical JSON (keys sorted).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(&self.command).expect("arguments serialize");
        let bytes = serde_json::to_vec(&canonical).expect("value serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn seed(&self) -> u64 {
        match &self.command {
            Command::Gen(g) => match &g.what {
                GenWhat::Instance(a) => a.seed,
                GenWhat::Pool(a) => a.seed,
                GenWhat::Example1(a) => a.seed,
                GenWhat::Fixture(_) => 0,
            },
            Command::Betweenness(a) => a.seed,
            Command::Train(a) => a.seed,
            Command::Score(a) => a.seed,
            Command::Solve(a) => a.solver.seed,
            Command::Sweep(a) => a.solver.seed,
            Command::Portfolio(a) => a.solver.seed,
            Command::ExportLp(_) => 0,
            Command::Bench(a) => a.solver.seed,
            Command::Replay(_) => 0,
        }
    }
}

/// Output directory plus the provenance written into each artifact.
#[derive(Debug)]
pub struct RunContext {
    out_dir: PathBuf,
    hash: String,
    seed: u64,
    written: Vec<String>,
}

impl RunContext {
    pub fn new(out_dir: PathBuf, config: &RunConfig) -> Self {
        RunContext {
            out_dir,
            hash: config.hash(),
            seed: config.seed(),
            written: Vec::new(),
        }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Relative names of the files written so far.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn provenance(&self) -> Value {
        serde_json::json!({ "config_hash": self.hash, "seed": self.seed })
    }

    fn create(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
        self.written.push(name.to_string());
        Ok(path)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.create(name)?;
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    /// Pretty JSON with a top-level `run` object added to objects.
    pub fn write_json(&mut self, name: &str, mut value: Value) -> Result<()> {
        if let Some(obj) = value.as_object_mut() {
            obj.insert("run".into(), self.provenance());
        }
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// JSON written verbatim; the caller embeds provenance itself.
    pub fn write_raw_json(&mut self, name: &str, text: &str) -> Result<()> {
        let mut text = text.to_string();
        if !text.ends_with('\n') {
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV body behind a `# resub run <hash> seed <seed>` line.
    pub fn write_csv<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = format!("# resub run {} seed {}\n", self.hash, self.seed).into_bytes();
        body(&mut buf).with_context(|| format!("formatting {name}"))?;
        self.write_bytes(name, &buf)
    }

    /// LP text behind a `\ resub run ...` comment line.
    pub fn write_lp(&mut self, name: &str, text: &str) -> Result<()> {
        let full = format!("\\ resub run {} seed {}\n{text}", self.hash, self.seed);
        self.write_bytes(name, full.as_bytes())
    }

    pub fn write_run_config(&mut self, config: &RunConfig) -> Result<()> {
        let mut text = serde_json::to_string_pretty(config)?;
        text.push('\n');
        self.write_bytes("run.json", text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::{GenArgs, GenFixtureArgs};

    fn fixture(name: &str) -> RunConfig {
        RunConfig::new(Command::Gen(GenArgs {
            what: GenWhat::Fixture(GenFixtureArgs {
                name: name.into(),
                output: None,
            }),
        }))
    }

    #[test]
    fn hash_tracks_arguments() {
        assert_eq!(fixture("t1").hash(), fixture("t1").hash());
        assert_ne!(fixture("t1").hash(), fixture("d1").hash());
        assert_eq!(fixture("t1").hash().len(), 64);
    }

    #[test]
    fn config_round_trips() {
        let cfg = fixture("d1");
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn csv_and_json_carry_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture("t1");
        let mut ctx = RunContext::new(dir.path().to_path_buf(), &cfg);
        ctx.write_json("a/x.json", serde_json::json!({ "k": 1 }))
            .unwrap();
        ctx.write_csv("y.csv", |w| {
            w.extend_from_slice(b"h\n1\n");
            Ok(())
        })
        .unwrap();
        let x: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("a/x.json")).unwrap())
                .unwrap();
        assert_eq!(x["run"]["config_hash"], cfg.hash());
        let y = fs::read_to_string(dir.path().join("y.csv")).unwrap();
        assert!(y.starts_with(&format!("# resub run {} seed 0\n", cfg.hash())));
        assert_eq!(ctx.written(), ["a/x.json", "y.csv"]);
    }
}
