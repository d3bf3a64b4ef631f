//! `key = value` configuration files and `--set key=value` overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the names
//! listed by [`KEYS`]; later assignments win.

use std::path::Path;

use vosprop_core::{MbdMode, PipelineConfig};

use crate::error::{Error, Result};

/// Every recognised key, in the order [`snapshot`] lists them.
pub const KEYS: &[&str] = &[
    "clusters",
    "min_cluster_fraction",
    "cluster_band_width",
    "mbd_band_width",
    "mbd_mode",
    "superpixel_count",
    "slic_compactness",
    "slic_iterations",
    "knn_k",
    "temporal_window",
    "knn_trees",
    "knn_leaf_size",
    "knn_checks",
    "knn_exact",
    "sigma",
    "sigma2",
    "sigma_w",
    "epsilon",
    "proximity_factor",
    "diffusion_iters",
    "temporal",
    "spatial",
    "long_range",
    "focused_diffusion",
    "focus_alpha",
    "focus_gamma",
    "binarize_threshold",
    "semi_supervised",
    "seed",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Input(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Input(format!(
            "invalid value {value:?} for {key}, expected true or false"
        ))),
    }
}

/// Sets one key.
pub fn apply(config: &mut PipelineConfig, key: &str, value: &str) -> Result<()> {
    let v = value.trim();
    match key.trim() {
        "clusters" => config.clusters = parse(key, v)?,
        "min_cluster_fraction" => config.min_cluster_fraction = parse(key, v)?,
        "cluster_band_width" => config.cluster_band_width = parse(key, v)?,
        "mbd_band_width" => config.mbd_band_width = parse(key, v)?,
        "mbd_mode" => {
            config.mbd_mode = match v {
                "exact" => MbdMode::Exact,
                "approximate" => MbdMode::Approximate,
                _ => {
                    return Err(Error::Input(format!(
                        "mbd_mode must be exact or approximate, got {v:?}"
                    )))
                }
            }
        }
        "superpixel_count" => {
            config.superpixel_count = if v == "auto" {
                None
            } else {
                Some(parse(key, v)?)
            }
        }
        "slic_compactness" => config.slic_compactness = parse(key, v)?,
        "slic_iterations" => config.slic_iterations = parse(key, v)?,
        "knn_k" => config.knn_k = parse(key, v)?,
        "temporal_window" => config.temporal_window = parse(key, v)?,
        "knn_trees" => config.knn.trees = parse(key, v)?,
        "knn_leaf_size" => config.knn.leaf_size = parse(key, v)?,
        "knn_checks" => config.knn.checks = parse(key, v)?,
        "knn_exact" => config.knn.exact = parse_bool(key, v)?,
        "sigma" => config.sigma = parse(key, v)?,
        "sigma2" => config.sigma2 = parse(key, v)?,
        "sigma_w" => config.sigma_w = parse(key, v)?,
        "epsilon" => config.epsilon = parse(key, v)?,
        "proximity_factor" => config.proximity_factor = parse(key, v)?,
        "diffusion_iters" => config.diffusion_iters = parse(key, v)?,
        "temporal" => config.factors.temporal = parse_bool(key, v)?,
        "spatial" => config.factors.spatial = parse_bool(key, v)?,
        "long_range" => config.factors.long_range = parse_bool(key, v)?,
        "focused_diffusion" => config.focused_diffusion = parse_bool(key, v)?,
        "focus_alpha" => config.focus_alpha = parse(key, v)?,
        "focus_gamma" => config.focus_gamma = parse(key, v)?,
        "binarize_threshold" => config.binarize_threshold = parse(key, v)?,
        "semi_supervised" => config.semi_supervised = parse_bool(key, v)?,
        "seed" => config.seed = parse(key, v)?,
        other => return Err(Error::Input(format!("unknown configuration key {other:?}"))),
    }
    Ok(())
}

/// Splits `key = value` (or `key=value`).
pub fn split_assignment(line: &str) -> Result<(&str, &str)> {
    line.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::Input(format!("expected key = value, got {line:?}")))
}

/// Applies every assignment of a configuration text.
pub fn apply_text(config: &mut PipelineConfig, text: &str, origin: &Path) -> Result<()> {
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        split_assignment(line)
            .and_then(|(k, v)| apply(config, k, v))
            .map_err(|e| Error::format(origin, format!("line {}: {e}", n + 1)))?;
    }
    Ok(())
}

pub fn apply_file(config: &mut PipelineConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    apply_text(config, &text, path)
}

/// Builds a configuration: defaults, then `file`, then `overrides`.
pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    if let Some(path) = file {
        apply_file(&mut config, path)?;
    }
    for o in overrides {
        let (k, v) = split_assignment(o)?;
        apply(&mut config, k, v)?;
    }
    Ok(config)
}

fn flag(b: bool) -> String {
    b.to_string()
}

/// Every key with its current value, in the syntax [`apply`] reads back.
pub fn snapshot(config: &PipelineConfig) -> Vec<(&'static str, String)> {
    let num = |x: f64| format!("{x:?}");
    let values = [
        config.clusters.to_string(),
        num(config.min_cluster_fraction),
        config.cluster_band_width.to_string(),
        config.mbd_band_width.to_string(),
        match config.mbd_mode {
            MbdMode::Exact => "exact".into(),
            MbdMode::Approximate => "approximate".into(),
        },
        config
            .superpixel_count
            .map_or_else(|| "auto".into(), |n| n.to_string()),
        num(config.slic_compactness),
        config.slic_iterations.to_string(),
        config.knn_k.to_string(),
        config.temporal_window.to_string(),
        config.knn.trees.to_string(),
        config.knn.leaf_size.to_string(),
        config.knn.checks.to_string(),
        flag(config.knn.exact),
        num(config.sigma),
        num(config.sigma2),
        num(config.sigma_w),
        num(config.epsilon),
        num(config.proximity_factor),
        config.diffusion_iters.to_string(),
        flag(config.factors.temporal),
        flag(config.factors.spatial),
        flag(config.factors.long_range),
        flag(config.focused_diffusion),
        num(config.focus_alpha),
        num(config.focus_gamma),
        num(config.binarize_threshold),
        flag(config.semi_supervised),
        config.seed.to_string(),
    ];
    KEYS.iter().copied().zip(values).collect()
}

/// The snapshot as a configuration file.
pub fn render(config: &PipelineConfig) -> String {
    snapshot(config)
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
