use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// GANMM training configuration. Defaults follow the clustering algorithm's
/// stated values: learning rate 5e-5, batch size 50, 5 critic iterations,
/// clip 0.01, 500 pre-training epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct GanmmConfig {
    pub n_clusters: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_critic: usize,
    pub clip: f64,
    pub pretrain_epochs: usize,
    /// Maximum number of EM iterations (early stopping may end sooner).
    pub em_epochs: usize,
    pub noise_dim: usize,
    pub hidden_dim: usize,
    /// Generated samples drawn from every generator per E-step.
    pub samples_per_generator: usize,
    /// sigma_0 of the augmentation schedule; `None` resolves to
    /// max(1, ceil(0.1 * n_segments / n_clusters)) at fit time.
    pub augment_initial: Option<usize>,
    /// Geometric decay of sigma_t; must stay below 1 so the accumulated
    /// augmentation error remains finite.
    pub augment_decay: f64,
    /// Passes over the generated set per E-step.
    pub classifier_passes: usize,
    /// WGAN rounds per cluster per M-step.
    pub wgan_calls_per_m_step: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    /// Consecutive identical E-step assignments before stopping.
    pub stable_iters: usize,
    pub seed: u64,
}

impl Default for GanmmConfig {
    fn default() -> Self {
        GanmmConfig {
            n_clusters: 2,
            learning_rate: 5e-5,
            batch_size: 50,
            n_critic: 5,
            clip: 0.01,
            pretrain_epochs: 500,
            em_epochs: 50,
            noise_dim: 16,
            hidden_dim: 64,
            samples_per_generator: 200,
            augment_initial: None,
            augment_decay: 0.9,
            classifier_passes: 1,
            wgan_calls_per_m_step: 1,
            rmsprop_decay: 0.9,
            rmsprop_eps: 1e-8,
            stable_iters: 3,
            seed: 0,
        }
    }
}

impl GanmmConfig {
    /// Settings for desk-scale sessions of a few hundred segments. The
    /// stock learning rate assumes meeting-length sessions whose cluster
    /// sizes yield tens of thousands of optimizer steps; short sessions see
    /// roughly thirty times fewer, so the rate is raised to compensate.
    pub fn desk_scale() -> Self {
        GanmmConfig {
            learning_rate: 1e-3,
            ..GanmmConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_clusters < 2 {
            return fail(format!("n_clusters must be at least 2, got {}", self.n_clusters));
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if self.n_critic == 0 {
            return fail("n_critic must be positive".into());
        }
        if !(self.clip > 0.0) {
            return fail(format!("clip must be positive, got {}", self.clip));
        }
        if self.noise_dim == 0 || self.hidden_dim == 0 {
            return fail("noise_dim and hidden_dim must be positive".into());
        }
        if self.samples_per_generator == 0 {
            return fail("samples_per_generator must be positive".into());
        }
        if !(0.0..1.0).contains(&self.augment_decay) {
            return fail(format!(
                "augment_decay must lie in [0,1) so the augmentation sums stay finite, got {}",
                self.augment_decay
            ));
        }
        if self.classifier_passes == 0 || self.wgan_calls_per_m_step == 0 {
            return fail("classifier_passes and wgan_calls_per_m_step must be positive".into());
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return fail(format!("rmsprop_decay must lie in [0,1), got {}", self.rmsprop_decay));
        }
        if !(self.rmsprop_eps > 0.0) {
            return fail("rmsprop_eps must be positive".into());
        }
        if self.stable_iters == 0 {
            return fail("stable_iters must be positive".into());
        }
        Ok(())
    }

    /// sigma_0 with the data-size default applied.
    pub fn resolved_sigma0(&self, n_segments: usize) -> usize {
        self.augment_initial
            .unwrap_or_else(|| (0.1 * n_segments as f64 / self.n_clusters as f64).ceil().max(1.0) as usize)
    }

    /// Serialize as `key = value` lines.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_clusters = {}", self.n_clusters);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "n_critic = {}", self.n_critic);
        let _ = writeln!(s, "clip = {}", self.clip);
        let _ = writeln!(s, "pretrain_epochs = {}", self.pretrain_epochs);
        let _ = writeln!(s, "em_epochs = {}", self.em_epochs);
        let _ = writeln!(s, "noise_dim = {}", self.noise_dim);
        let _ = writeln!(s, "hidden_dim = {}", self.hidden_dim);
        let _ = writeln!(s, "samples_per_generator = {}", self.samples_per_generator);
        match self.augment_initial {
            Some(v) => {
                let _ = writeln!(s, "augment_initial = {v}");
            }
            None => {
                let _ = writeln!(s, "augment_initial = auto");
            }
        }
        let _ = writeln!(s, "augment_decay = {}", self.augment_decay);
        let _ = writeln!(s, "classifier_passes = {}", self.classifier_passes);
        let _ = writeln!(s, "wgan_calls_per_m_step = {}", self.wgan_calls_per_m_step);
        let _ = writeln!(s, "rmsprop_decay = {}", self.rmsprop_decay);
        let _ = writeln!(s, "rmsprop_eps = {}", self.rmsprop_eps);
        let _ = writeln!(s, "stable_iters = {}", self.stable_iters);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_config_string()).map_err(|e| Error::io(path, e))
    }

    /// Parse a `key = value` config file; unknown keys are an error, absent
    /// keys keep their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = GanmmConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::parse(path, lineno, "expected 'key = value'"))?;
            let bad = |what: &str| Error::parse(path, lineno, format!("bad {what} '{value}'"));
            match key {
                "n_clusters" => cfg.n_clusters = value.parse().map_err(|_| bad("integer"))?,
                "learning_rate" => cfg.learning_rate = value.parse().map_err(|_| bad("number"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("integer"))?,
                "n_critic" => cfg.n_critic = value.parse().map_err(|_| bad("integer"))?,
                "clip" => cfg.clip = value.parse().map_err(|_| bad("number"))?,
                "pretrain_epochs" => {
                    cfg.pretrain_epochs = value.parse().map_err(|_| bad("integer"))?
                }
                "em_epochs" => cfg.em_epochs = value.parse().map_err(|_| bad("integer"))?,
                "noise_dim" => cfg.noise_dim = value.parse().map_err(|_| bad("integer"))?,
                "hidden_dim" => cfg.hidden_dim = value.parse().map_err(|_| bad("integer"))?,
                "samples_per_generator" => {
                    cfg.samples_per_generator = value.parse().map_err(|_| bad("integer"))?
                }
                "augment_initial" => {
                    cfg.augment_initial = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad("integer or 'auto'"))?)
                    }
                }
                "augment_decay" => cfg.augment_decay = value.parse().map_err(|_| bad("number"))?,
                "classifier_passes" => {
                    cfg.classifier_passes = value.parse().map_err(|_| bad("integer"))?
                }
                "wgan_calls_per_m_step" => {
                    cfg.wgan_calls_per_m_step = value.parse().map_err(|_| bad("integer"))?
                }
                "rmsprop_decay" => cfg.rmsprop_decay = value.parse().map_err(|_| bad("number"))?,
                "rmsprop_eps" => cfg.rmsprop_eps = value.parse().map_err(|_| bad("number"))?,
                "stable_iters" => cfg.stable_iters = value.parse().map_err(|_| bad("integer"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("integer"))?,
                other => {
                    return Err(Error::parse(path, lineno, format!("unknown key '{other}'")))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
