use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::mat::Mat;
use crate::scalar::Real;

/// Output-layer activation. The hidden layer is always rectified-linear.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Softmax,
}

/// One-hidden-layer feed-forward network with analytic gradients.
///
/// `w1` is (hidden x input), `w2` is (output x hidden); a forward pass over a
/// batch of row vectors is `relu(x w1^T + b1) w2^T + b2`, optionally followed
/// by a row softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<F> {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    w1: Mat<F>,
    b1: Vec<F>,
    w2: Mat<F>,
    b2: Vec<F>,
    output: OutputActivation,
}

/// Per-parameter gradients, same shapes as the network parameters.
#[derive(Clone, Debug)]
pub struct MlpGrads<F> {
    pub w1: Mat<F>,
    pub b1: Vec<F>,
    pub w2: Mat<F>,
    pub b2: Vec<F>,
}

impl<F: Real> MlpGrads<F> {
    pub fn zeros_like(net: &Mlp<F>) -> Self {
        MlpGrads {
            w1: Mat::zeros(net.hidden_dim, net.input_dim),
            b1: vec![F::zero(); net.hidden_dim],
            w2: Mat::zeros(net.output_dim, net.hidden_dim),
            b2: vec![F::zero(); net.output_dim],
        }
    }

    pub fn scale(&mut self, s: F) {
        for g in self.flat_mut() {
            *g = *g * s;
        }
    }

    pub fn add(&mut self, other: &MlpGrads<F>) {
        for (g, &o) in self.flat_mut().zip(other.flat()) {
            *g += o;
        }
    }

    pub fn flat(&self) -> impl Iterator<Item = &F> {
        self.w1
            .as_slice()
            .iter()
            .chain(&self.b1)
            .chain(self.w2.as_slice())
            .chain(&self.b2)
    }

    pub fn flat_mut(&mut self) -> impl Iterator<Item = &mut F> {
        self.w1
            .as_mut_slice()
            .iter_mut()
            .chain(&mut self.b1)
            .chain(self.w2.as_mut_slice())
            .chain(&mut self.b2)
    }
}

/// Activations kept from a forward pass so the backward pass can reuse them.
pub struct ForwardCache<F> {
    input: Mat<F>,
    pre_hidden: Mat<F>,
    hidden: Mat<F>,
    pub output: Mat<F>,
}

impl<F: Real> Mlp<F> {
    /// Fresh network with all parameters drawn uniformly from [-0.05, 0.05].
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        output: OutputActivation,
        rng: &mut impl Rng,
    ) -> Self {
        let mut draw = || F::of(rng.gen_range(-0.05..=0.05));
        let w1 = Mat::from_fn(hidden_dim, input_dim, |_, _| draw());
        let b1 = (0..hidden_dim).map(|_| draw()).collect();
        let w2 = Mat::from_fn(output_dim, hidden_dim, |_, _| draw());
        let b2 = (0..output_dim).map(|_| draw()).collect();
        Mlp {
            input_dim,
            hidden_dim,
            output_dim,
            w1,
            b1,
            w2,
            b2,
            output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn forward(&self, batch: &Mat<F>) -> Result<Mat<F>> {
        Ok(self.forward_cached(batch)?.output)
    }

    pub fn forward_cached(&self, batch: &Mat<F>) -> Result<ForwardCache<F>> {
        if batch.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim
            )));
        }
        if !batch.is_finite() {
            return Err(Error::Numeric("non-finite value in network input".into()));
        }
        let n = batch.rows();
        let mut pre_hidden = batch.matmul_transb(&self.w1);
        for r in 0..n {
            for (v, &b) in pre_hidden.row_mut(r).iter_mut().zip(&self.b1) {
                *v += b;
            }
        }
        let hidden = pre_hidden.map(|x| if x > F::zero() { x } else { F::zero() });
        let mut out = hidden.matmul_transb(&self.w2);
        for r in 0..n {
            for (v, &b) in out.row_mut(r).iter_mut().zip(&self.b2) {
                *v += b;
            }
        }
        if self.output == OutputActivation::Softmax {
            for r in 0..n {
                softmax_row(out.row_mut(r));
            }
        }
        Ok(ForwardCache {
            input: batch.clone(),
            pre_hidden,
            hidden,
            output: out,
        })
    }

    /// Chain-rule pass from `upstream` = dL/d(output), summed over the batch.
    ///
    /// Returns the parameter gradients and dL/d(input); the latter is what
    /// lets a generator receive gradient through its critic.
    pub fn backward(&self, cache: &ForwardCache<F>, upstream: &Mat<F>) -> (MlpGrads<F>, Mat<F>) {
        assert_eq!(upstream.rows(), cache.output.rows());
        assert_eq!(upstream.cols(), self.output_dim);
        let n = upstream.rows();

        // Through the output activation.
        let d_pre_out = match self.output {
            OutputActivation::Linear => upstream.clone(),
            OutputActivation::Softmax => Mat::from_fn(n, self.output_dim, |r, c| {
                let y = cache.output.row(r);
                let u = upstream.row(r);
                let s: F = y.iter().zip(u).map(|(&yi, &ui)| yi * ui).sum();
                y[c] * (u[c] - s)
            }),
        };

        let g_w2 = d_pre_out.matmul_transa(&cache.hidden);
        let g_b2 = column_sums(&d_pre_out);

        let mut d_hidden = d_pre_out.matmul(&self.w2);
        for r in 0..n {
            for (dh, &p) in d_hidden.row_mut(r).iter_mut().zip(cache.pre_hidden.row(r)) {
                if p <= F::zero() {
                    *dh = F::zero();
                }
            }
        }

        let g_w1 = d_hidden.matmul_transa(&cache.input);
        let g_b1 = column_sums(&d_hidden);
        let d_input = d_hidden.matmul(&self.w1);

        (
            MlpGrads {
                w1: g_w1,
                b1: g_b1,
                w2: g_w2,
                b2: g_b2,
            },
            d_input,
        )
    }

    /// Clamp every parameter into [-c, c]. Idempotent.
    pub fn clip_weights(&mut self, c: F) {
        assert!(c > F::zero(), "clipping bound must be positive");
        for p in self.params_mut() {
            if *p > c {
                *p = c;
            } else if *p < -c {
                *p = -c;
            }
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &F> {
        self.w1
            .as_slice()
            .iter()
            .chain(&self.b1)
            .chain(self.w2.as_slice())
            .chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut F> {
        self.w1
            .as_mut_slice()
            .iter_mut()
            .chain(&mut self.b1)
            .chain(self.w2.as_mut_slice())
            .chain(&mut self.b2)
    }

    pub fn num_params(&self) -> usize {
        self.hidden_dim * self.input_dim
            + self.hidden_dim
            + self.output_dim * self.hidden_dim
            + self.output_dim
    }

    pub fn max_abs_param(&self) -> F {
        self.params()
            .fold(F::zero(), |acc, &p| if p.abs() > acc { p.abs() } else { acc })
    }

    /// The four parameter tensors as flat slices, in checkpoint order.
    fn tensors(&self) -> [(&'static str, &[F]); 4] {
        [
            ("w1", self.w1.as_slice()),
            ("b1", &self.b1),
            ("w2", self.w2.as_slice()),
            ("b2", &self.b2),
        ]
    }

    /// Serialize to the flat text checkpoint format: one version line, one
    /// shapes line, then one row-major parameter line per tensor at 17
    /// significant digits.
    pub fn to_checkpoint_string(&self) -> String {
        let mut s = String::new();
        s.push_str("ganmm-mlp v1\n");
        let act = match self.output {
            OutputActivation::Linear => "linear",
            OutputActivation::Softmax => "softmax",
        };
        let _ = writeln!(
            s,
            "dims {} {} {} {}",
            self.input_dim, self.hidden_dim, self.output_dim, act
        );
        for (name, vals) in self.tensors() {
            s.push_str(name);
            for v in vals {
                let _ = write!(s, " {:.16e}", v);
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text).map_err(|(line, msg)| Error::parse(path, line, msg))
    }

    fn from_checkpoint_str(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or((1, "empty checkpoint".to_string()))?;
        if header.trim() != "ganmm-mlp v1" {
            return Err((1, format!("unsupported checkpoint header '{header}'")));
        }
        let (_, dims_line) = lines.next().ok_or((2, "missing dims line".to_string()))?;
        let toks: Vec<&str> = dims_line.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "dims" {
            return Err((2, "expected 'dims <in> <hidden> <out> <activation>'".into()));
        }
        let parse_dim = |t: &str| t.parse::<usize>().map_err(|e| (2, format!("bad dim: {e}")));
        let (input_dim, hidden_dim, output_dim) =
            (parse_dim(toks[1])?, parse_dim(toks[2])?, parse_dim(toks[3])?);
        let output = match toks[4] {
            "linear" => OutputActivation::Linear,
            "softmax" => OutputActivation::Softmax,
            other => return Err((2, format!("unknown activation '{other}'"))),
        };
        let mut read_tensor = |name: &str, len: usize| -> std::result::Result<Vec<F>, (usize, String)> {
            let (idx, line) = lines
                .next()
                .ok_or((0, format!("missing tensor '{name}'")))?;
            let lineno = idx + 1;
            let mut toks = line.split_whitespace();
            if toks.next() != Some(name) {
                return Err((lineno, format!("expected tensor '{name}'")));
            }
            let vals: Vec<F> = toks
                .map(|t| {
                    t.parse::<f64>()
                        .map(F::of)
                        .map_err(|e| (lineno, format!("bad value '{t}': {e}")))
                })
                .collect::<std::result::Result<_, _>>()?;
            if vals.len() != len {
                return Err((lineno, format!("tensor '{name}': expected {len} values, got {}", vals.len())));
            }
            Ok(vals)
        };
        let w1 = read_tensor("w1", hidden_dim * input_dim)?;
        let b1 = read_tensor("b1", hidden_dim)?;
        let w2 = read_tensor("w2", output_dim * hidden_dim)?;
        let b2 = read_tensor("b2", output_dim)?;
        Ok(Mlp {
            input_dim,
            hidden_dim,
            output_dim,
            w1: Mat::from_vec(hidden_dim, input_dim, w1).map_err(|e| (0, e.to_string()))?,
            b1,
            w2: Mat::from_vec(output_dim, hidden_dim, w2).map_err(|e| (0, e.to_string()))?,
            b2,
            output,
        })
    }
}

/// Numerically safe in-place softmax (max subtraction before exponentiation).
fn softmax_row<F: Real>(row: &mut [F]) {
    let max = row.iter().fold(F::neg_infinity(), |a, &b| a.max(b));
    let mut sum = F::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

fn column_sums<F: Real>(m: &Mat<F>) -> Vec<F> {
    let mut out = vec![F::zero(); m.cols()];
    for r in 0..m.rows() {
        for (o, &v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}

/// Mean cross-entropy of row-stochastic `probs` against integer `labels`,
/// together with dL/d(probs). Probabilities are floored at 1e-12 inside the
/// logarithm only.
pub fn cross_entropy<F: Real>(probs: &Mat<F>, labels: &[usize]) -> (F, Mat<F>) {
    assert_eq!(probs.rows(), labels.len());
    let n = probs.rows();
    let inv_n = F::of(1.0 / n as f64);
    let floor = F::of(1e-12);
    let mut loss = F::zero();
    let mut grad = Mat::zeros(n, probs.cols());
    for (r, &y) in labels.iter().enumerate() {
        let p = probs.get(r, y).max(floor);
        loss -= p.ln() * inv_n;
        grad.set(r, y, -inv_n / p);
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_net(out_act: OutputActivation, seed: u64) -> Mlp<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::new(3, 5, 2, out_act, &mut rng)
    }

    #[test]
    fn zero_net_maps_to_zero() {
        let mut net = small_net(OutputActivation::Linear, 1);
        for p in net.params_mut() {
            *p = 0.0;
        }
        let batch = Mat::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.5, 0.5]]).unwrap();
        let out = net.forward(&batch).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_like_net_passes_nonnegative_input_through() {
        // w1 = I (hidden=input), w2 = I, biases 0: ReLU never fires negative.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net: Mlp<f64> = Mlp::new(3, 3, 3, OutputActivation::Linear, &mut rng);
        net.w1 = Mat::identity(3);
        net.w2 = Mat::identity(3);
        net.b1 = vec![0.0; 3];
        net.b2 = vec![0.0; 3];
        let batch = Mat::from_rows(&[vec![0.3, 0.0, 2.5]]).unwrap();
        let out = net.forward(&batch).unwrap();
        assert_eq!(out.row(0), batch.row(0));
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let net = small_net(OutputActivation::Linear, 7);
        let batch = Mat::from_rows(&[vec![0.2, -0.7, 1.3]]).unwrap();
        let out = net.forward(&batch).unwrap();
        // Hand-rolled single-sample evaluation.
        let x = batch.row(0);
        for o in 0..2 {
            let mut expect = net.b2[o];
            for h in 0..5 {
                let mut pre = net.b1[h];
                for (i, &xi) in x.iter().enumerate() {
                    pre += net.w1.get(h, i) * xi;
                }
                expect += net.w2.get(o, h) * pre.max(0.0);
            }
            assert_abs_diff_eq!(out.get(0, o), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let net = small_net(OutputActivation::Softmax, 3);
        let batch = Mat::from_fn(4, 3, |r, c| (r as f64 - c as f64) * 0.8);
        let out = net.forward(&batch).unwrap();
        for r in 0..4 {
            let s: f64 = out.row(r).iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let net = small_net(OutputActivation::Linear, 4);
        let batch = Mat::from_rows(&[vec![1.0, f64::NAN, 0.0]]).unwrap();
        assert!(net.forward(&batch).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = small_net(OutputActivation::Linear, 5);
        let batch = Mat::from_fn(3, 3, |r, c| (r + c) as f64 * 0.1);
        let cache = net.forward_cached(&batch).unwrap();
        let upstream = Mat::zeros(3, 2);
        let (grads, dx) = net.backward(&cache, &upstream);
        assert!(grads.flat().all(|&g| g == 0.0));
        assert!(dx.as_slice().iter().all(|&g| g == 0.0));
    }

    /// Central finite differences over the network parameters for a scalar
    /// loss; independent of the analytic backward pass.
    fn finite_diff_grads(net: &Mlp<f64>, loss: impl Fn(&Mlp<f64>) -> f64) -> Vec<f64> {
        let h = 1e-5;
        let n = net.num_params();
        let mut grads = Vec::with_capacity(n);
        for i in 0..n {
            let mut plus = net.clone();
            *plus.params_mut().nth(i).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(i).unwrap() -= h;
            grads.push((loss(&plus) - loss(&minus)) / (2.0 * h));
        }
        grads
    }

    fn assert_grads_close(analytic: &[f64], numeric: &[f64]) {
        for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
            let denom = a.abs().max(n.abs()).max(1e-8);
            assert!(
                (a - n).abs() / denom < 1e-4,
                "param {i}: analytic {a} vs numeric {n}"
            );
        }
    }

    #[test]
    fn backward_matches_finite_differences_221() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net: Mlp<f64> = Mlp::new(2, 2, 1, OutputActivation::Linear, &mut rng);
        let batch = Mat::from_rows(&[vec![0.4, -0.9]]).unwrap();
        // Loss: mean critic-style output.
        let loss = |m: &Mlp<f64>| m.forward(&batch).unwrap().get(0, 0);
        let cache = net.forward_cached(&batch).unwrap();
        let upstream = Mat::from_rows(&[vec![1.0]]).unwrap();
        let (grads, _) = net.backward(&cache, &upstream);
        let analytic: Vec<f64> = grads.flat().copied().collect();
        assert_grads_close(&analytic, &finite_diff_grads(&net, loss));
    }

    #[test]
    fn backward_matches_finite_differences_softmax_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net: Mlp<f64> = Mlp::new(3, 4, 3, OutputActivation::Softmax, &mut rng);
        let batch = Mat::from_fn(5, 3, |r, c| ((r * 3 + c) as f64).sin());
        let labels = [0usize, 2, 1, 1, 0];
        let loss = |m: &Mlp<f64>| {
            let out = m.forward(&batch).unwrap();
            cross_entropy(&out, &labels).0
        };
        let cache = net.forward_cached(&batch).unwrap();
        let (_, upstream) = cross_entropy(&cache.output, &labels);
        let (grads, _) = net.backward(&cache, &upstream);
        let analytic: Vec<f64> = grads.flat().copied().collect();
        assert_grads_close(&analytic, &finite_diff_grads(&net, loss));
    }

    #[test]
    fn batch_gradient_is_mean_of_per_sample_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let net: Mlp<f64> = Mlp::new(3, 4, 2, OutputActivation::Linear, &mut rng);
        let batch = Mat::from_fn(6, 3, |r, c| ((r + 2 * c) as f64).cos());
        let n = batch.rows();
        // Loss: mean over batch of (sum of outputs).
        let upstream = Mat::from_fn(n, 2, |_, _| 1.0 / n as f64);
        let cache = net.forward_cached(&batch).unwrap();
        let (batch_grads, _) = net.backward(&cache, &upstream);

        let mut mean = MlpGrads::zeros_like(&net);
        for r in 0..n {
            let row = Mat::from_rows(&[batch.row(r).to_vec()]).unwrap();
            let cache = net.forward_cached(&row).unwrap();
            let up = Mat::from_fn(1, 2, |_, _| 1.0);
            let (g, _) = net.backward(&cache, &up);
            mean.add(&g);
        }
        mean.scale(1.0 / n as f64);
        for (&a, &b) in batch_grads.flat().zip(mean.flat()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn clip_weights_clamps_and_is_idempotent() {
        let mut net = small_net(OutputActivation::Linear, 20);
        *net.params_mut().next().unwrap() = 0.5;
        *net.params_mut().nth(3).unwrap() = -0.5;
        net.clip_weights(0.01);
        assert_eq!(*net.params().next().unwrap(), 0.01);
        assert_eq!(*net.params().nth(3).unwrap(), -0.01);
        assert!(net.max_abs_param() <= 0.01);
        let again = {
            let mut n2 = net.clone();
            n2.clip_weights(0.01);
            n2
        };
        assert_eq!(net, again);
    }

    #[test]
    fn clip_weights_is_noop_inside_bound() {
        let mut net = small_net(OutputActivation::Linear, 21);
        for p in net.params_mut() {
            *p *= 0.1; // init range 0.05 -> now within 0.005
        }
        let before = net.clone();
        net.clip_weights(0.01);
        assert_eq!(net, before);
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.mlp");
        let net = small_net(OutputActivation::Softmax, 33);
        net.save(&path).unwrap();
        let back: Mlp<f64> = Mlp::load(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn checkpoint_rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mlp");
        std::fs::write(&path, "not a checkpoint\n").unwrap();
        assert!(Mlp::<f64>::load(&path).is_err());
    }

    #[test]
    fn f32_instantiation_works() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net: Mlp<f32> = Mlp::new(4, 8, 2, OutputActivation::Softmax, &mut rng);
        let batch = Mat::from_fn(3, 4, |r, c| (r as f32) - (c as f32) * 0.5);
        let out = net.forward(&batch).unwrap();
        for r in 0..3 {
            let s: f32 = out.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }
}
