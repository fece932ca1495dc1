//! Run manifests: a flat key-value echo of everything a run depends on
//! (command, arguments, inlined configuration files, seed, version), written
//! next to the outputs. `pvmax rerun --manifest <file>` reproduces the run.

use anyhow::Result;
use pvmax_core::io::FlatConfig;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.txt";

pub struct ManifestBuilder {
    cfg: FlatConfig,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        let mut cfg = FlatConfig::new();
        cfg.set("run.command", command);
        cfg.set("run.version", env!("CARGO_PKG_VERSION"));
        ManifestBuilder { cfg }
    }

    /// Inline the plant configuration (its keys already carry the panel./
    /// plant./sensors. prefixes).
    pub fn plant(mut self, plant: &FlatConfig) -> Self {
        self.cfg.overlay(plant);
        self
    }

    /// Inline the scenario configuration under the scenario. prefix.
    pub fn scenario(mut self, scenario: &FlatConfig) -> Self {
        let text = scenario.to_text();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                self.cfg.set(&format!("scenario.{k}"), v);
            }
        }
        self
    }

    /// Copy every entry of an argument config under the args. prefix.
    pub fn args_from(mut self, args: &FlatConfig) -> Self {
        for line in args.to_text().lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                self.cfg.set(&format!("args.{k}"), v);
            }
        }
        self
    }

    pub fn write(self, out_dir: &Path) -> Result<()> {
        self.cfg.write(&out_dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}

/// Split a manifest back into (command, plant config, scenario config, args).
pub struct ParsedManifest {
    pub command: String,
    pub plant: FlatConfig,
    pub scenario: FlatConfig,
    pub args: FlatConfig,
}

pub fn parse_manifest(path: &Path) -> Result<ParsedManifest> {
    let cfg = FlatConfig::load(path)?;
    let command = cfg
        .get("run.command")
        .ok_or_else(|| anyhow::anyhow!("manifest missing run.command"))?
        .to_string();
    let mut plant = FlatConfig::new();
    let mut scenario = FlatConfig::new();
    let mut args = FlatConfig::new();
    for line in cfg.to_text().lines() {
        let Some((key, value)) = line.split_once(" = ") else {
            continue;
        };
        if let Some(stripped) = key.strip_prefix("scenario.") {
            scenario.set(stripped, value);
        } else if let Some(stripped) = key.strip_prefix("args.") {
            args.set(stripped, value);
        } else if key.starts_with("panel.") || key.starts_with("plant.") || key.starts_with("sensors.")
        {
            plant.set(key, value);
        }
    }
    Ok(ParsedManifest {
        command,
        plant,
        scenario,
        args,
    })
}
