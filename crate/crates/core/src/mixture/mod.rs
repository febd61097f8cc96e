//! GAN mixture model: N WGAN generator/critic pairs plus one classifier,
//! trained by adversarial EM. The E-step teaches the classifier to separate
//! generator outputs and assigns real segments by argmax; the M-step trains
//! each pair on its (augmented) cluster.

mod checkpoint;
mod config;

pub use checkpoint::{load_model, save_model};
pub use config::GanmmConfig;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::{cross_entropy, Mat, Mlp, MlpGrads, OutputActivation, RmsPropState};
use crate::scalar::Real;

/// Cluster assignment of every segment plus the classifier posteriors
/// behind it. Rows of `posteriors` are stochastic and argmax-consistent
/// with `assignment` (ties to the lower index).
#[derive(Clone, Debug, PartialEq)]
pub struct Partition<F> {
    pub assignment: Vec<usize>,
    pub posteriors: Mat<F>,
}

impl<F: Real> Partition<F> {
    pub fn from_posteriors(posteriors: Mat<F>) -> Self {
        let assignment = (0..posteriors.rows())
            .map(|r| argmax(posteriors.row(r)))
            .collect();
        Partition {
            assignment,
            posteriors,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.assignment.len()
    }

    /// Segment indices currently assigned to `cluster`.
    pub fn cluster_indices(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

fn argmax<F: Real>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Evidence collected while training: clipping compliance, E-step label
/// balance, and the augmentation schedule.
#[derive(Clone, Debug, Default)]
pub struct TrainTrace {
    pub critic_updates: usize,
    /// Maximum over all critic updates of the post-update max |parameter|.
    pub max_critic_weight: f64,
    /// Per E-step: how many generated samples carried each cluster label.
    pub estep_label_counts: Vec<Vec<usize>>,
    /// sigma_t per EM iteration, in order.
    pub sigma_schedule: Vec<usize>,
}

impl TrainTrace {
    fn record_critic_update(&mut self, max_abs_weight: f64) {
        self.critic_updates += 1;
        if max_abs_weight > self.max_critic_weight {
            self.max_critic_weight = max_abs_weight;
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmIteration {
    pub assignment_changes: usize,
    pub classifier_loss: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FitHistory {
    pub iterations: Vec<EmIteration>,
    pub stopped_early: bool,
    pub trace: TrainTrace,
}

/// The mixture: per-cluster generator/critic pairs, the shared classifier,
/// optimizer state, and the RNG stream that makes training reproducible.
#[derive(Clone, Debug)]
pub struct GanmmModel<F> {
    generators: Vec<Mlp<F>>,
    critics: Vec<Mlp<F>>,
    classifier: Mlp<F>,
    gen_opt: Vec<RmsPropState<F>>,
    critic_opt: Vec<RmsPropState<F>>,
    cls_opt: RmsPropState<F>,
    data_dim: usize,
    noise_dim: usize,
    rng: ChaCha8Rng,
}

impl<F: Real> GanmmModel<F> {
    /// Fresh model for `data_dim`-dimensional segments, seeded from the
    /// configuration.
    pub fn new(data_dim: usize, config: &GanmmConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_clusters;
        let rho = F::of(config.rmsprop_decay);
        let eps = F::of(config.rmsprop_eps);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut generators = Vec::with_capacity(n);
        let mut critics = Vec::with_capacity(n);
        for _ in 0..n {
            generators.push(Mlp::new(
                config.noise_dim,
                config.hidden_dim,
                data_dim,
                OutputActivation::Linear,
                &mut rng,
            ));
        }
        for _ in 0..n {
            critics.push(Mlp::new(
                data_dim,
                config.hidden_dim,
                1,
                OutputActivation::Linear,
                &mut rng,
            ));
        }
        let classifier = Mlp::new(
            data_dim,
            config.hidden_dim,
            n,
            OutputActivation::Softmax,
            &mut rng,
        );
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
            noise_dim: config.noise_dim,
            rng,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.generators.len()
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn generators(&self) -> &[Mlp<F>] {
        &self.generators
    }

    pub fn critics(&self) -> &[Mlp<F>] {
        &self.critics
    }

    pub fn classifier(&self) -> &Mlp<F> {
        &self.classifier
    }

    /// Draw `count` samples from generator `i` under the uniform [-1,1]
    /// noise prior.
    pub fn sample_generator(&mut self, i: usize, count: usize) -> Result<Mat<F>> {
        let noise = sample_noise(count, self.noise_dim, &mut self.rng);
        self.generators[i].forward(&noise)
    }

    /// Train every (generator, critic) pair on its initial cluster for
    /// `pretrain_epochs` epochs; the classifier is untouched.
    pub fn pretrain(
        &mut self,
        data: &Mat<F>,
        init_labels: &[usize],
        config: &GanmmConfig,
        trace: &mut TrainTrace,
    ) -> Result<()> {
        let n = self.n_clusters();
        if init_labels.len() != data.rows() {
            return Err(Error::Invalid(format!(
                "{} init labels for {} segments",
                init_labels.len(),
                data.rows()
            )));
        }
        if let Some(&bad) = init_labels.iter().find(|&&l| l >= n) {
            return Err(Error::Invalid(format!(
                "init label {bad} out of range for {n} clusters"
            )));
        }
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, &l) in init_labels.iter().enumerate() {
            clusters[l].push(i);
        }
        if let Some(empty) = clusters.iter().position(|c| c.is_empty()) {
            return Err(Error::Invalid(format!(
                "initial cluster {empty} is empty; re-initialize (different seed or k-means init)"
            )));
        }
        let cluster_data: Vec<Mat<F>> = clusters.iter().map(|idx| gather_rows(data, idx)).collect();
        for _ in 0..config.pretrain_epochs {
            for i in 0..n {
                train_wgan(
                    &mut self.generators[i],
                    &mut self.critics[i],
                    &mut self.gen_opt[i],
                    &mut self.critic_opt[i],
                    &cluster_data[i],
                    config,
                    &mut self.rng,
                    trace,
                )?;
            }
        }
        Ok(())
    }

    /// The adversarial E-step: draw the same number of samples from every
    /// generator, take classifier RMSProp steps over the shuffled generated
    /// set in minibatches, then assign every real segment by argmax.
    /// Returns the partition and the mean classifier loss over minibatches.
    pub fn e_step(
        &mut self,
        data: &Mat<F>,
        config: &GanmmConfig,
        trace: &mut TrainTrace,
    ) -> Result<(Partition<F>, f64)> {
        let n = self.n_clusters();
        let spg = config.samples_per_generator;
        let total = n * spg;
        let mut generated = Mat::zeros(total, self.data_dim);
        let mut labels = Vec::with_capacity(total);
        for i in 0..n {
            let samples = self.sample_generator(i, spg)?;
            for r in 0..spg {
                generated
                    .row_mut(i * spg + r)
                    .copy_from_slice(samples.row(r));
            }
            labels.extend(std::iter::repeat(i).take(spg));
        }
        let mut counts = vec![0usize; n];
        for &l in &labels {
            counts[l] += 1;
        }
        trace.estep_label_counts.push(counts);

        let alpha = F::of(config.learning_rate);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut order: Vec<usize> = (0..total).collect();
        for _ in 0..config.classifier_passes {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(config.batch_size) {
                let batch = gather_rows(&generated, chunk);
                let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                let cache = self.classifier.forward_cached(&batch)?;
                let (loss, upstream) = cross_entropy(&cache.output, &batch_labels);
                let (grads, _) = self.classifier.backward(&cache, &upstream);
                self.cls_opt.step(&mut self.classifier, &grads, alpha, false);
                loss_sum += loss.as_f64();
                batches += 1;
            }
        }

        let partition = self.classify(data)?;
        Ok((partition, loss_sum / batches.max(1) as f64))
    }

    /// Train each mixture on its augmented cluster; `t` is the 1-based EM
    /// iteration driving the augmentation schedule.
    pub fn m_step(
        &mut self,
        partition: &Partition<F>,
        data: &Mat<F>,
        t: usize,
        config: &GanmmConfig,
        trace: &mut TrainTrace,
    ) -> Result<()> {
        let n = self.n_clusters();
        let sigma0 = config.resolved_sigma0(data.rows());
        let sigma_t = sigma_schedule(sigma0, config.augment_decay, t);
        trace.sigma_schedule.push(sigma_t);
        for i in 0..n {
            let indices = augment_cluster(partition, i, sigma_t);
            if indices.is_empty() {
                log::warn!("cluster {i} empty after augmentation at iteration {t}; skipping");
                continue;
            }
            let cluster = gather_rows(data, &indices);
            for _ in 0..config.wgan_calls_per_m_step {
                train_wgan(
                    &mut self.generators[i],
                    &mut self.critics[i],
                    &mut self.gen_opt[i],
                    &mut self.critic_opt[i],
                    &cluster,
                    config,
                    &mut self.rng,
                    trace,
                )?;
            }
        }
        Ok(())
    }

    /// Deterministic argmax assignment with posteriors, for training data
    /// or any matching-dimension segments.
    pub fn classify(&self, data: &Mat<F>) -> Result<Partition<F>> {
        if data.cols() != self.data_dim {
            return Err(Error::Shape(format!(
                "data has dimension {}, model expects {}",
                data.cols(),
                self.data_dim
            )));
        }
        let posteriors = self.classifier.forward(data)?;
        Ok(Partition::from_posteriors(posteriors))
    }
}

/// sigma_t = round(sigma_0 * decay^t).
pub fn sigma_schedule(sigma0: usize, decay: f64, t: usize) -> usize {
    (sigma0 as f64 * decay.powi(t as i32)).round() as usize
}

/// Cluster indices plus the `sigma_t` outside segments with the highest
/// posterior for this cluster (ties toward the lower segment index).
pub fn augment_cluster<F: Real>(
    partition: &Partition<F>,
    cluster: usize,
    sigma_t: usize,
) -> Vec<usize> {
    let mut result = partition.cluster_indices(cluster);
    if sigma_t == 0 {
        return result;
    }
    let mut outside: Vec<usize> = partition
        .assignment
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != cluster)
        .map(|(i, _)| i)
        .collect();
    outside.sort_by(|&a, &b| {
        partition
            .posteriors
            .get(b, cluster)
            .partial_cmp(&partition.posteriors.get(a, cluster))
            .expect("finite posteriors")
            .then(a.cmp(&b))
    });
    outside.truncate(sigma_t);
    result.extend(outside);
    result
}

/// One WGAN round: `n_critic` critic ascent steps (clipped after each) then
/// one generator descent step. Real batches are drawn without replacement
/// when the cluster is large enough, with replacement otherwise.
#[allow(clippy::too_many_arguments)]
pub fn train_wgan<F: Real>(
    generator: &mut Mlp<F>,
    critic: &mut Mlp<F>,
    gen_opt: &mut RmsPropState<F>,
    critic_opt: &mut RmsPropState<F>,
    cluster_data: &Mat<F>,
    config: &GanmmConfig,
    rng: &mut ChaCha8Rng,
    trace: &mut TrainTrace,
) -> Result<()> {
    if cluster_data.rows() == 0 {
        return Err(Error::Invalid("cannot train WGAN on an empty cluster".into()));
    }
    let m = config.batch_size;
    let alpha = F::of(config.learning_rate);
    let clip = F::of(config.clip);
    let up_pos = F::of(1.0 / m as f64);
    let noise_dim = generator.input_dim();

    for _ in 0..config.n_critic {
        let real = sample_batch(cluster_data, m, rng);
        let noise = sample_noise(m, noise_dim, rng);
        let fake = generator.forward(&noise)?;

        // Critic objective mean D(real) - mean D(fake), ascended.
        let real_cache = critic.forward_cached(&real)?;
        let fake_cache = critic.forward_cached(&fake)?;
        let up_real = Mat::from_fn(m, 1, |_, _| up_pos);
        let up_fake = Mat::from_fn(m, 1, |_, _| -up_pos);
        let (mut grads, _) = critic.backward(&real_cache, &up_real);
        let (fake_grads, _) = critic.backward(&fake_cache, &up_fake);
        grads.add(&fake_grads);
        critic_opt.step(critic, &grads, alpha, true);
        critic.clip_weights(clip);
        trace.record_critic_update(critic.max_abs_param().as_f64());
    }

    // Generator objective -mean D(G(z)), descended; the gradient reaches the
    // generator through the critic's input gradient.
    let noise = sample_noise(m, noise_dim, rng);
    let gen_cache = generator.forward_cached(&noise)?;
    let critic_cache = critic.forward_cached(&gen_cache.output)?;
    let upstream = Mat::from_fn(m, 1, |_, _| -up_pos);
    let (_, d_fake) = critic.backward(&critic_cache, &upstream);
    let (gen_grads, _): (MlpGrads<F>, _) = generator.backward(&gen_cache, &d_fake);
    gen_opt.step(generator, &gen_grads, alpha, false);
    Ok(())
}

/// Full training run: pretrain on `init_labels`, then alternate E- and
/// M-steps for up to `em_epochs` iterations, stopping early once the
/// assignment has been identical for `stable_iters` consecutive E-steps.
pub fn fit<F: Real>(
    data: &Mat<F>,
    config: &GanmmConfig,
    init_labels: &[usize],
) -> Result<(GanmmModel<F>, Partition<F>, FitHistory)> {
    config.validate()?;
    let mut model = GanmmModel::new(data.cols(), config)?;
    let mut history = FitHistory::default();
    model.pretrain(data, init_labels, config, &mut history.trace)?;

    let mut prev: Vec<usize> = init_labels.to_vec();
    let mut stable = 0usize;
    let mut partition: Option<Partition<F>> = None;
    for t in 1..=config.em_epochs {
        let (part, loss) = model.e_step(data, config, &mut history.trace)?;
        let changes = part
            .assignment
            .iter()
            .zip(&prev)
            .filter(|(a, b)| a != b)
            .count();
        history.iterations.push(EmIteration {
            assignment_changes: changes,
            classifier_loss: loss,
        });
        if changes == 0 {
            stable += 1;
        } else {
            stable = 0;
        }
        prev = part.assignment.clone();
        partition = Some(part);
        if stable >= config.stable_iters {
            history.stopped_early = true;
            break;
        }
        model.m_step(partition.as_ref().expect("just set"), data, t, config, &mut history.trace)?;
    }

    let partition = match partition {
        Some(p) => p,
        // em_epochs == 0: the partition is a single E-step after pretraining.
        None => model.e_step(data, config, &mut history.trace)?.0,
    };
    Ok((model, partition, history))
}

/// Balanced random initial labels: shuffle the segment indices and deal
/// them round-robin into `n_clusters` clusters.
pub fn random_balanced_labels(n_segments: usize, n_clusters: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n_segments).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![0usize; n_segments];
    for (pos, &idx) in order.iter().enumerate() {
        labels[idx] = pos % n_clusters;
    }
    labels
}

fn gather_rows<F: Real>(data: &Mat<F>, indices: &[usize]) -> Mat<F> {
    let mut out = Mat::zeros(indices.len(), data.cols());
    for (r, &i) in indices.iter().enumerate() {
        out.row_mut(r).copy_from_slice(data.row(i));
    }
    out
}

fn sample_batch<F: Real>(data: &Mat<F>, m: usize, rng: &mut ChaCha8Rng) -> Mat<F> {
    let n = data.rows();
    let indices: Vec<usize> = if n >= m {
        rand::seq::index::sample(rng, n, m).into_vec()
    } else {
        (0..m).map(|_| rng.gen_range(0..n)).collect()
    };
    gather_rows(data, &indices)
}

fn sample_noise<F: Real>(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Mat<F> {
    let mut out = Mat::zeros(rows, dim);
    for r in 0..rows {
        for v in out.row_mut(r) {
            *v = F::of(rng.gen_range(-1.0..=1.0));
        }
    }
    out
}
