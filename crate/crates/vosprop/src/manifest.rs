//! Run manifests: everything needed to repeat a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vosprop_core::PipelineConfig;

use crate::error::{Error, Result};
use crate::run::Timings;
use crate::settings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnabledFactors {
    pub temporal: bool,
    pub spatial: bool,
    pub long_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub input: PathBuf,
    pub output_dir: PathBuf,
    /// `unsupervised` or `semi-supervised`.
    pub mode: String,
    pub factors: EnabledFactors,
    pub focused_diffusion: bool,
    /// Every configuration key, as accepted by `--config` files.
    pub config: BTreeMap<String, String>,
    pub threads: usize,
    pub frames: usize,
    pub nodes: usize,
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        command: &str,
        input: &Path,
        output_dir: &Path,
        config: &PipelineConfig,
        threads: usize,
        frames: usize,
        nodes: usize,
        timings: &Timings,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            input: input.into(),
            output_dir: output_dir.into(),
            mode: if config.semi_supervised {
                "semi-supervised"
            } else {
                "unsupervised"
            }
            .into(),
            factors: EnabledFactors {
                temporal: config.factors.temporal,
                spatial: config.factors.spatial,
                long_range: config.factors.long_range,
            },
            focused_diffusion: config.focused_diffusion,
            config: settings::snapshot(config)
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            threads,
            frames,
            nodes,
            timings: timings
                .iter()
                .map(|(stage, seconds)| StageTiming {
                    stage: stage.clone(),
                    seconds: *seconds,
                })
                .collect(),
        }
    }

    /// The configuration recorded in the manifest.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        for (k, v) in &self.config {
            settings::apply(&mut config, k, v)?;
        }
        Ok(config)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}
