//! Layered experiment configuration: a partial config can come from a JSON
//! or `key = value` file, another partial one from command-line flags, and
//! the merge resolves into full [`ExperimentInputs`] with documented
//! defaults filling the gaps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::families::{FamilyKind, FamilySpec};
use crate::verify::ExperimentInputs;
use crate::{Error, Result};

/// A partial experiment configuration; every field is optional so layers
/// can be merged. Field names match the file keys one to one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub family: Option<String>,
    pub dim: Option<usize>,
    pub alpha: Option<f64>,
    pub h0: Option<f64>,
    pub js: Option<Vec<u32>>,
    pub h: Option<f64>,
    pub kappa: Option<f64>,
    pub level: Option<u32>,
    pub epsilon: Option<f64>,
    pub depths: Option<Vec<f64>>,
    pub diam_cap: Option<f64>,
    pub area_cap: Option<f64>,
    pub vol_tol: Option<f64>,
    pub c_tol: Option<f64>,
    pub pairs: Option<usize>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    /// Reads a config file. Content starting with `{` parses as JSON;
    /// anything else parses as `key = value` lines with `#` comments and
    /// comma-separated lists.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        ExperimentConfig::from_str_any(&text)
    }

    /// Parses config text in either supported format.
    pub fn from_str_any(text: &str) -> Result<ExperimentConfig> {
        if text.trim_start().starts_with('{') {
            Ok(serde_json::from_str(text)?)
        } else {
            ExperimentConfig::from_key_values(text)
        }
    }

    fn from_key_values(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Input(format!("config line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Input(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Input(format!("{key} got unparsable value {value:?}")))
        }
        fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
            value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        match key {
            "family" => self.family = Some(value.to_string()),
            "dim" => self.dim = Some(num(key, value)?),
            "alpha" => self.alpha = Some(num(key, value)?),
            "h0" => self.h0 = Some(num(key, value)?),
            "js" => self.js = Some(list(key, value)?),
            "h" => self.h = Some(num(key, value)?),
            "kappa" => self.kappa = Some(num(key, value)?),
            "level" => self.level = Some(num(key, value)?),
            "epsilon" => self.epsilon = Some(num(key, value)?),
            "depths" => self.depths = Some(list(key, value)?),
            "diam_cap" => self.diam_cap = Some(num(key, value)?),
            "area_cap" => self.area_cap = Some(num(key, value)?),
            "vol_tol" => self.vol_tol = Some(num(key, value)?),
            "c_tol" => self.c_tol = Some(num(key, value)?),
            "pairs" => self.pairs = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            _ => return Err(Error::Input(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Overlays `over` on `self`: present fields in `over` win.
    pub fn merged(&self, over: &ExperimentConfig) -> ExperimentConfig {
        macro_rules! pick {
            ($field:ident) => {
                over.$field.clone().or_else(|| self.$field.clone())
            };
        }
        ExperimentConfig {
            family: pick!(family),
            dim: pick!(dim),
            alpha: pick!(alpha),
            h0: pick!(h0),
            js: pick!(js),
            h: pick!(h),
            kappa: pick!(kappa),
            level: pick!(level),
            epsilon: pick!(epsilon),
            depths: pick!(depths),
            diam_cap: pick!(diam_cap),
            area_cap: pick!(area_cap),
            vol_tol: pick!(vol_tol),
            c_tol: pick!(c_tol),
            pairs: pick!(pairs),
            seed: pick!(seed),
        }
    }

    /// Fills defaults and validates, producing runnable inputs. The family
    /// name is the only field with no default.
    pub fn resolve(&self) -> Result<ExperimentInputs> {
        let name = self
            .family
            .as_deref()
            .ok_or_else(|| Error::param("family", "is required"))?;
        let kind = FamilyKind::from_name(name).ok_or_else(|| {
            Error::param(
                "family",
                "must be one of disk_blowup, cinched_sphere, torus_bubble, identity",
            )
        })?;
        let spec = FamilySpec {
            family: kind,
            dim: self.dim.unwrap_or(2),
            alpha: self.alpha,
            h0: self.h0,
        };
        spec.validate()?;
        let mut inputs = ExperimentInputs::new(spec);
        if let Some(js) = &self.js {
            inputs.js = js.clone();
        }
        if let Some(h) = self.h {
            inputs.h = h;
        }
        if let Some(kappa) = self.kappa {
            inputs.kappa = kappa;
        }
        if let Some(level) = self.level {
            inputs.level = level;
        }
        if let Some(epsilon) = self.epsilon {
            inputs.epsilon = epsilon;
        }
        if let Some(depths) = &self.depths {
            inputs.depths = depths.clone();
        }
        inputs.diam_cap = self.diam_cap;
        inputs.area_cap = self.area_cap;
        if let Some(vol_tol) = self.vol_tol {
            inputs.vol_tol = vol_tol;
        }
        if let Some(c_tol) = self.c_tol {
            inputs.c_tol = c_tol;
        }
        if let Some(pairs) = self.pairs {
            inputs.pairs = pairs;
        }
        if let Some(seed) = self.seed {
            inputs.seed = seed;
        }
        Ok(inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_text_parses_with_comments_and_lists() {
        let text = "\n# run shape\nfamily = disk_blowup\nalpha = 0.25\njs = 4, 16, 64\n\
                    depths = 0.05,0.1\nseed = 11 # trailing comment\n";
        let cfg = ExperimentConfig::from_str_any(text).unwrap();
        assert_eq!(cfg.family.as_deref(), Some("disk_blowup"));
        assert_eq!(cfg.alpha, Some(0.25));
        assert_eq!(cfg.js, Some(vec![4, 16, 64]));
        assert_eq!(cfg.depths, Some(vec![0.05, 0.1]));
        assert_eq!(cfg.seed, Some(11));
    }

    #[test]
    fn json_text_parses_too() {
        let text = r#"{ "family": "identity", "h": 0.2, "pairs": 150 }"#;
        let cfg = ExperimentConfig::from_str_any(text).unwrap();
        assert_eq!(cfg.family.as_deref(), Some("identity"));
        assert_eq!(cfg.h, Some(0.2));
        assert_eq!(cfg.pairs, Some(150));
    }

    #[test]
    fn unknown_keys_and_bad_numbers_are_rejected() {
        assert!(ExperimentConfig::from_str_any("banana = 3\n").is_err());
        assert!(ExperimentConfig::from_str_any("alpha = fast\n").is_err());
        assert!(ExperimentConfig::from_str_any("family disk_blowup\n").is_err());
        assert!(ExperimentConfig::from_str_any(r#"{ "banana": 3 }"#).is_err());
    }

    #[test]
    fn overlay_fields_win_in_a_merge() {
        let file = ExperimentConfig::from_str_any("family = identity\nseed = 3\nh = 0.1\n").unwrap();
        let flags = ExperimentConfig {
            seed: Some(9),
            ..Default::default()
        };
        let merged = file.merged(&flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.h, Some(0.1));
        assert_eq!(merged.family.as_deref(), Some("identity"));
    }

    #[test]
    fn resolve_fills_the_documented_defaults() {
        let cfg = ExperimentConfig {
            family: Some("torus_bubble".to_string()),
            ..Default::default()
        };
        let inputs = cfg.resolve().unwrap();
        assert_eq!(inputs.js, vec![4, 16, 64, 256]);
        assert_eq!(inputs.level, 6);
        assert_eq!(inputs.epsilon, 0.05);
        assert_eq!(inputs.depths, vec![0.05, 0.1, 0.2]);
        assert_eq!(inputs.vol_tol, 0.05);
        assert_eq!(inputs.pairs, 200);
        assert_eq!(inputs.seed, 7);
        assert_eq!(inputs.family.dim, 2);
        assert!(inputs.diam_cap.is_none());
    }

    #[test]
    fn resolve_requires_a_known_family_and_valid_parameters() {
        assert!(ExperimentConfig::default().resolve().is_err());
        let bad_name = ExperimentConfig {
            family: Some("klein_bottle".to_string()),
            ..Default::default()
        };
        assert!(bad_name.resolve().is_err());
        let bad_alpha = ExperimentConfig {
            family: Some("disk_blowup".to_string()),
            alpha: Some(0.75),
            ..Default::default()
        };
        let err = bad_alpha.resolve().unwrap_err().to_string();
        assert!(err.contains("alpha"), "{err}");
        let stray = ExperimentConfig {
            family: Some("cinched_sphere".to_string()),
            h0: Some(0.1),
            alpha: Some(0.2),
            ..Default::default()
        };
        assert!(stray.resolve().is_err());
    }

    #[test]
    fn config_files_round_trip_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, "family = cinched_sphere\nh0 = 0.1\njs = 64\n").unwrap();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        let inputs = cfg.resolve().unwrap();
        assert_eq!(inputs.js, vec![64]);
        assert_eq!(inputs.family.h0, Some(0.1));
        let missing = ExperimentConfig::from_file(&dir.path().join("nope.cfg"));
        assert!(missing.is_err());
    }
}
