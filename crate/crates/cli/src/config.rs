//! Application configuration: one file, optional sections, CLI overrides.
//!
//! The configuration is a single TOML or JSON file with `[scene]`,
//! `[pipeline]`, `[filter]`, `[fit]`, and `[eval]` sections, all optional;
//! missing fields take the library defaults.  Command-line flags override
//! individual fields, and every command echoes the effective configuration
//! it ran with into its output directory as `config_used.toml`.

use std::path::Path;

use mvsfusion::error::{Error, Result};
use mvsfusion::evalbench::{FilterParams, SceneConfig};
use mvsfusion::losses::FitOptions;
use mvsfusion::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

/// Evaluation settings (thresholds and report shape, not pipeline math).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    /// Absolute depth-error threshold counting a pixel as an inlier.
    pub inlier_threshold: f64,
    /// Number of sparsification-curve steps (removal fractions `k / steps`).
    pub sparsification_steps: usize,
    /// Error value mapped to full brightness in heat maps.
    pub heatmap_max: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams { inlier_threshold: 0.1, sparsification_steps: 20, heatmap_max: 1.0 }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold.is_finite() && self.inlier_threshold > 0.0) {
            return Err(Error::invalid("inlier threshold must be positive"));
        }
        if self.sparsification_steps == 0 {
            return Err(Error::invalid("sparsification needs at least one step"));
        }
        if !(self.heatmap_max.is_finite() && self.heatmap_max > 0.0) {
            return Err(Error::invalid("heat-map maximum must be positive"));
        }
        Ok(())
    }
}

/// The full application configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AppConfig {
    pub scene: SceneConfig,
    pub pipeline: PipelineConfig,
    pub filter: FilterParams,
    pub fit: FitOptions,
    pub eval: EvalParams,
}

impl AppConfig {
    /// Load a configuration file, dispatching on the `.toml` / `.json`
    /// extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let config: AppConfig = match ext {
            "toml" => toml::from_str(&text)
                .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?,
            "json" => serde_json::from_str(&text)
                .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?,
            other => {
                return Err(Error::invalid(format!(
                    "config file must end in .toml or .json, got `.{other}` ({})",
                    path.display()
                )))
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.pipeline.validate()?;
        self.filter.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    /// Write the effective configuration into `dir/config_used.toml`.
    pub fn echo_into(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::invalid(format!("config not serializable: {e}")))?;
        std::fs::write(dir.join("config_used.toml"), text)?;
        Ok(())
    }
}
