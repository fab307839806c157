//! TOML pipeline configuration. Relative paths resolve against the directory
//! holding the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_bytes, FormatError};
use crate::distancing::RiskThresholds;
use crate::people::DEFAULT_MIN_PIXELS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub fixed_intrinsics: Option<PathBuf>,
    pub mobile_intrinsics: Option<PathBuf>,
    pub pose: Option<PathBuf>,
    pub control_points: Option<PathBuf>,
    #[serde(default = "default_confidence")]
    pub confidence_threshold: f64,
    #[serde(default = "default_dangerous")]
    pub dangerous_below: f64,
    #[serde(default = "default_safe")]
    pub safe_above: f64,
    #[serde(default = "default_min_pixels")]
    pub min_pixels: usize,
    #[serde(default)]
    pub trim_fraction: f64,
    /// Relative inverse-depth files, with `{id}` standing for the frame id.
    pub frames: Option<String>,
    /// Label masks, with `{id}` standing for the frame id.
    pub masks: Option<String>,
}

fn default_confidence() -> f64 {
    1.0
}
fn default_dangerous() -> f64 {
    1.0
}
fn default_safe() -> f64 {
    2.0
}
fn default_min_pixels() -> usize {
    DEFAULT_MIN_PIXELS
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fixed_intrinsics: None,
            mobile_intrinsics: None,
            pose: None,
            control_points: None,
            confidence_threshold: default_confidence(),
            dangerous_below: default_dangerous(),
            safe_above: default_safe(),
            min_pixels: default_min_pixels(),
            trim_fraction: 0.0,
            frames: None,
            masks: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let bytes = read_bytes(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| FormatError::Config(format!("{} is not UTF-8", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(text, base)
    }

    /// Parses, resolves paths against `base` and validates.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, FormatError> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| FormatError::Config(e.to_string()))?;
        for p in [
            &mut cfg.fixed_intrinsics,
            &mut cfg.mobile_intrinsics,
            &mut cfg.pose,
            &mut cfg.control_points,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for pat in [&mut cfg.frames, &mut cfg.masks].into_iter().flatten() {
            if Path::new(pat.as_str()).is_relative() {
                *pat = base.join(pat.as_str()).to_string_lossy().into_owned();
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        for p in [&self.fixed_intrinsics, &self.mobile_intrinsics, &self.pose, &self.control_points]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(FormatError::Config(format!("{} does not exist", p.display())));
            }
        }
        for pat in [&self.frames, &self.masks].into_iter().flatten() {
            if !pat.contains("{id}") {
                return Err(FormatError::Config(format!("pattern {pat:?} lacks {{id}}")));
            }
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(FormatError::Config(format!(
                "confidence_threshold {} outside [0, 1]",
                self.confidence_threshold
            )));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(FormatError::Config(format!(
                "trim_fraction {} outside [0, 1)",
                self.trim_fraction
            )));
        }
        if self.min_pixels == 0 {
            return Err(FormatError::Config("min_pixels must be positive".into()));
        }
        self.thresholds()?;
        Ok(())
    }

    pub fn thresholds(&self) -> Result<RiskThresholds, FormatError> {
        RiskThresholds::new(self.dangerous_below, self.safe_above)
            .map_err(|e| FormatError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_apply() {
        let cfg = PipelineConfig::from_toml("", Path::new("/")).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn paths_resolve_and_must_exist() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("k.json"), "{}").unwrap();
        let cfg = PipelineConfig::from_toml(
            "fixed_intrinsics = \"k.json\"\nframes = \"f/{id}.pfm\"\n",
            dir.path(),
        )
        .unwrap();
        assert_eq!(cfg.fixed_intrinsics.unwrap(), dir.path().join("k.json"));
        assert!(cfg.frames.unwrap().ends_with("f/{id}.pfm"));
        assert!(PipelineConfig::from_toml("pose = \"missing.json\"", dir.path()).is_err());
    }

    #[test]
    fn invalid_values() {
        let base = Path::new("/");
        assert!(PipelineConfig::from_toml("dangerous_below = 3.0", base).is_err());
        assert!(PipelineConfig::from_toml("trim_fraction = 1.0", base).is_err());
        assert!(PipelineConfig::from_toml("confidence_threshold = 2.0", base).is_err());
        assert!(PipelineConfig::from_toml("frames = \"x.pfm\"", base).is_err());
        assert!(PipelineConfig::from_toml("colour = 1", base).is_err());
    }
}
