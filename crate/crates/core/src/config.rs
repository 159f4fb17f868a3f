//! Training and inference configuration with a `key=value` text format.
//!
//! A config file holds one `key = value` per line; `#` starts a comment. An
//! optional `preset` key is applied first, then every other key overrides it.
//! List values are comma-separated.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grouping::{default_thresholds, validate_thresholds};
use crate::proposal::WindowConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Long videos: λ = 1.8, batch 16, η ∈ {0.1, 0.3, 0.5}.
    ActivityNet,
    /// Short videos: λ = 0.5, batch 32, η ∈ {0.3, 0.5, 0.7}.
    Charades,
    /// Small model sized for the synthetic corpus on one CPU core.
    Desk,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "activitynet" => Ok(Preset::ActivityNet),
            "charades" => Ok(Preset::Charades),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub embed_dim: usize,
    pub lr: f64,
    pub coarse_epochs: usize,
    pub fine_epochs: usize,
    pub batch_size: usize,
    /// Boundary expansion rate λ.
    pub lambda: f64,
    pub window_fractions: Vec<f64>,
    pub overlap: f64,
    /// Average training video length in frames; measured from the training
    /// split when unset and stored in checkpoints.
    pub avg_train_length: Option<f64>,
    /// Ranking margin Δ.
    pub margin: f64,
    pub thresholds: Vec<f64>,
    pub iou_thresholds: Vec<f64>,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::preset(Preset::ActivityNet)
    }
}

impl TrainConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = TrainConfig {
            hidden_size: 512,
            embed_dim: 300,
            lr: 1e-3,
            coarse_epochs: 100,
            fine_epochs: 100,
            batch_size: 16,
            lambda: 1.8,
            window_fractions: WindowConfig::DEFAULT_FRACTIONS.to_vec(),
            overlap: WindowConfig::DEFAULT_OVERLAP,
            avg_train_length: None,
            margin: 1.0,
            thresholds: default_thresholds(),
            iou_thresholds: vec![0.1, 0.3, 0.5],
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 5.0,
        };
        match preset {
            Preset::ActivityNet => base,
            Preset::Charades => TrainConfig {
                lambda: 0.5,
                batch_size: 32,
                iou_thresholds: vec![0.3, 0.5, 0.7],
                ..base
            },
            Preset::Desk => TrainConfig {
                hidden_size: 24,
                embed_dim: 16,
                lr: 5e-3,
                coarse_epochs: 100,
                fine_epochs: 20,
                batch_size: 16,
                lambda: 0.5,
                iou_thresholds: vec![0.1, 0.3, 0.5],
                ..base
            },
        }
    }

    pub fn window_config(&self, avg_train_length: f64) -> WindowConfig {
        WindowConfig {
            avg_train_length,
            scale_fractions: self.window_fractions.clone(),
            overlap: self.overlap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.hidden_size == 0 || self.embed_dim == 0 {
            return fail("hidden_size and embed_dim must be positive".into());
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return fail(format!("learning rate {} must be non-negative", self.lr));
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size {} must be at least 2", self.batch_size));
        }
        if !(self.lambda >= 0.0) {
            return fail(format!("lambda {} must be non-negative", self.lambda));
        }
        if !(self.margin > 0.0) {
            return fail(format!("margin {} must be positive", self.margin));
        }
        if !(self.grad_clip > 0.0) {
            return fail(format!("grad_clip {} must be positive", self.grad_clip));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return fail("Adam moments must lie in [0, 1) and eps must be positive".into());
        }
        if self.iou_thresholds.is_empty() || self.iou_thresholds.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return fail("iou_thresholds must be a nonempty list in [0, 1]".into());
        }
        validate_thresholds(&self.thresholds)?;
        self.window_config(self.avg_train_length.unwrap_or(1.0)).validate()
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>> {
            v.split(',').map(|x| num(key, x)).collect()
        }
        let v = value.trim();
        match key.trim() {
            "preset" => *self = Self::preset(Preset::parse(v)?),
            "hidden_size" => self.hidden_size = num(key, v)?,
            "embed_dim" => self.embed_dim = num(key, v)?,
            "lr" => self.lr = num(key, v)?,
            "coarse_epochs" => self.coarse_epochs = num(key, v)?,
            "fine_epochs" => self.fine_epochs = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "lambda" => self.lambda = num(key, v)?,
            "window_fractions" => self.window_fractions = list(key, v)?,
            "overlap" => self.overlap = num(key, v)?,
            "avg_train_length" => {
                self.avg_train_length = if v == "auto" { None } else { Some(num(key, v)?) }
            }
            "margin" => self.margin = num(key, v)?,
            "thresholds" => self.thresholds = list(key, v)?,
            "iou_thresholds" => self.iou_thresholds = list(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "adam_beta1" => self.adam_beta1 = num(key, v)?,
            "adam_beta2" => self.adam_beta2 = num(key, v)?,
            "adam_eps" => self.adam_eps = num(key, v)?,
            "grad_clip" => self.grad_clip = num(key, v)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = TrainConfig::default();
        // preset first so explicit keys win regardless of order
        for (k, v) in pairs.iter().filter(|(k, _)| k == "preset") {
            cfg.set(k, v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("hidden_size", self.hidden_size.to_string());
        kv("embed_dim", self.embed_dim.to_string());
        kv("lr", self.lr.to_string());
        kv("coarse_epochs", self.coarse_epochs.to_string());
        kv("fine_epochs", self.fine_epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("lambda", self.lambda.to_string());
        kv("window_fractions", join(&self.window_fractions));
        kv("overlap", self.overlap.to_string());
        kv(
            "avg_train_length",
            self.avg_train_length.map_or("auto".into(), |v| v.to_string()),
        );
        kv("margin", self.margin.to_string());
        kv("thresholds", join(&self.thresholds));
        kv("iou_thresholds", join(&self.iou_thresholds));
        kv("seed", self.seed.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("grad_clip", self.grad_clip.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_hyperparameters() {
        let a = TrainConfig::preset(Preset::ActivityNet);
        assert_eq!((a.hidden_size, a.embed_dim, a.lr, a.margin), (512, 300, 1e-3, 1.0));
        assert_eq!((a.coarse_epochs, a.fine_epochs, a.overlap), (100, 100, 0.8));
        assert_eq!(a.lambda, 1.8);
        assert_eq!(TrainConfig::preset(Preset::Charades).lambda, 0.5);
    }

    #[test]
    fn lambda_from_config_text() {
        assert_eq!(TrainConfig::parse("preset=activitynet").unwrap().lambda, 1.8);
        assert_eq!(TrainConfig::parse("preset=charades").unwrap().lambda, 0.5);
        // explicit keys override the preset in any order
        let c = TrainConfig::parse("lambda=0.7\npreset=charades\n").unwrap();
        assert_eq!(c.lambda, 0.7);
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::preset(Preset::Desk);
        c.avg_train_length = Some(47.355);
        c.seed = 11;
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(TrainConfig::parse("overlap=1.0"), Err(Error::Config(_))));
        assert!(TrainConfig::parse("batch_size=1").is_err());
        assert!(TrainConfig::parse("lambda=-1").is_err());
        assert!(TrainConfig::parse("nonsense=3").is_err());
        assert!(TrainConfig::parse("just text").is_err());
    }
}
