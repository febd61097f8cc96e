use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mixture::{GanmmConfig, GanmmModel};
use crate::numeric::{Mlp, RmsPropState};
use crate::scalar::Real;

/// Write a model as one checkpoint file per network plus a manifest:
/// `manifest.txt`, `generator_<i>.mlp`, `critic_<i>.mlp`, `classifier.mlp`.
pub fn save_model<F: Real>(model: &GanmmModel<F>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = model.n_clusters();
    let mut manifest = String::new();
    manifest.push_str("ganmm-model v1\n");
    let _ = writeln!(manifest, "n_clusters = {n}");
    let _ = writeln!(manifest, "data_dim = {}", model.data_dim);
    let _ = writeln!(manifest, "noise_dim = {}", model.noise_dim);
    for i in 0..n {
        model.generators[i].save(dir.join(format!("generator_{i}.mlp")))?;
        model.critics[i].save(dir.join(format!("critic_{i}.mlp")))?;
    }
    model.classifier.save(dir.join("classifier.mlp"))?;
    std::fs::write(dir.join("manifest.txt"), manifest).map_err(|e| Error::io(dir, e))
}

/// Load a model checkpoint directory. Optimizer accumulators and the RNG
/// stream are reset; a loaded model classifies identically but does not
/// resume training mid-stream.
pub fn load_model<F: Real>(dir: impl AsRef<Path>) -> Result<GanmmModel<F>> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.txt");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut n_clusters = None;
    let mut data_dim = None;
    let mut noise_dim = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if lineno == 1 {
            if line.trim() != "ganmm-model v1" {
                return Err(Error::parse(&manifest_path, 1, "unsupported manifest header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::parse(&manifest_path, lineno, "expected 'key = value'"))?;
        let parsed: usize = value
            .parse()
            .map_err(|_| Error::parse(&manifest_path, lineno, format!("bad integer '{value}'")))?;
        match key {
            "n_clusters" => n_clusters = Some(parsed),
            "data_dim" => data_dim = Some(parsed),
            "noise_dim" => noise_dim = Some(parsed),
            other => {
                return Err(Error::parse(
                    &manifest_path,
                    lineno,
                    format!("unknown key '{other}'"),
                ))
            }
        }
    }
    let n = n_clusters.ok_or_else(|| Error::parse(&manifest_path, 0, "missing n_clusters"))?;
    let data_dim = data_dim.ok_or_else(|| Error::parse(&manifest_path, 0, "missing data_dim"))?;
    let noise_dim = noise_dim.ok_or_else(|| Error::parse(&manifest_path, 0, "missing noise_dim"))?;

    let mut generators = Vec::with_capacity(n);
    let mut critics = Vec::with_capacity(n);
    for i in 0..n {
        generators.push(Mlp::load(dir.join(format!("generator_{i}.mlp")))?);
        critics.push(Mlp::load(dir.join(format!("critic_{i}.mlp")))?);
    }
    let classifier: Mlp<F> = Mlp::load(dir.join("classifier.mlp"))?;

    let defaults = GanmmConfig::default();
    let rho = F::of(defaults.rmsprop_decay);
    let eps = F::of(defaults.rmsprop_eps);
    let gen_opt = generators
        .iter()
        .map(|g| RmsPropState::for_net(g, rho, eps))
        .collect();
    let critic_opt = critics
        .iter()
        .map(|c| RmsPropState::for_net(c, rho, eps))
        .collect();
    let cls_opt = RmsPropState::for_net(&classifier, rho, eps);
    Ok(GanmmModel {
        generators,
        critics,
        classifier,
        gen_opt,
        critic_opt,
        cls_opt,
        data_dim,
        noise_dim,
        rng: ChaCha8Rng::seed_from_u64(0),
    })
}
