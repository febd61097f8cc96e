use crate::numeric::mat::Mat;
use crate::numeric::mlp::{Mlp, MlpGrads};
use crate::scalar::Real;

/// Per-parameter squared-gradient accumulator driving RMSProp updates.
///
/// The update is `s <- rho*s + (1-rho)*g^2` followed by
/// `p <- p -/+ alpha * g / (sqrt(s) + eps)`; critics ascend, the generators
/// and the classifier descend.
#[derive(Clone, Debug)]
pub struct RmsPropState<F> {
    pub rho: F,
    pub eps: F,
    s_w1: Mat<F>,
    s_b1: Vec<F>,
    s_w2: Mat<F>,
    s_b2: Vec<F>,
}

impl<F: Real> RmsPropState<F> {
    pub fn for_net(net: &Mlp<F>, rho: F, eps: F) -> Self {
        let z = MlpGrads::zeros_like(net);
        RmsPropState {
            rho,
            eps,
            s_w1: z.w1,
            s_b1: z.b1,
            s_w2: z.w2,
            s_b2: z.b2,
        }
    }

    /// Apply one RMSProp step to every parameter of `net`.
    pub fn step(&mut self, net: &mut Mlp<F>, grads: &MlpGrads<F>, alpha: F, ascent: bool) {
        let acc = self
            .s_w1
            .as_mut_slice()
            .iter_mut()
            .chain(&mut self.s_b1)
            .chain(self.s_w2.as_mut_slice())
            .chain(&mut self.s_b2);
        for ((p, &g), s) in net.params_mut().zip(grads.flat()).zip(acc) {
            *p = rmsprop_step_scalar(*p, g, s, self.rho, self.eps, alpha, ascent);
        }
    }

    pub fn accumulators(&self) -> impl Iterator<Item = &F> {
        self.s_w1
            .as_slice()
            .iter()
            .chain(&self.s_b1)
            .chain(self.s_w2.as_slice())
            .chain(&self.s_b2)
    }
}

/// One RMSProp update for a single parameter; `s` is its accumulator slot.
#[inline]
pub fn rmsprop_step_scalar<F: Real>(
    p: F,
    g: F,
    s: &mut F,
    rho: F,
    eps: F,
    alpha: F,
    ascent: bool,
) -> F {
    *s = rho * *s + (F::one() - rho) * g * g;
    let delta = alpha * g / (s.sqrt() + eps);
    if ascent {
        p + delta
    } else {
        p - delta
    }
}

/// Slice form of the update, used by tests and anywhere a bare parameter
/// block needs stepping.
pub fn rmsprop_step<F: Real>(
    params: &mut [F],
    grads: &[F],
    s: &mut [F],
    rho: F,
    eps: F,
    alpha: F,
    ascent: bool,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), s.len());
    for ((p, &g), si) in params.iter_mut().zip(grads).zip(s.iter_mut()) {
        *p = rmsprop_step_scalar(*p, g, si, rho, eps, alpha, ascent);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_leaves_params_and_decays_accumulator() {
        let mut p = [1.5f64, -0.25];
        let mut s = [0.4, 0.9];
        rmsprop_step(&mut p, &[0.0, 0.0], &mut s, 0.9, 1e-8, 5e-5, false);
        assert_eq!(p, [1.5, -0.25]);
        assert_abs_diff_eq!(s[0], 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.81, epsilon = 1e-15);
    }

    #[test]
    fn descent_step_matches_hand_evaluation() {
        // p=0, g=1, s=0, rho=0.9, eps=1e-8, alpha=5e-5:
        // s -> 0.1, p -> -5e-5 / (sqrt(0.1) + 1e-8)
        let mut p = [0.0f64];
        let mut s = [0.0];
        rmsprop_step(&mut p, &[1.0], &mut s, 0.9, 1e-8, 5e-5, false);
        assert_abs_diff_eq!(s[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], -5e-5 / (0.1f64.sqrt() + 1e-8), epsilon = 1e-18);
    }

    #[test]
    fn ascent_flips_the_sign() {
        let mut p = [0.0f64];
        let mut s = [0.0];
        rmsprop_step(&mut p, &[1.0], &mut s, 0.9, 1e-8, 5e-5, true);
        assert!(p[0] > 0.0);
    }

    #[test]
    fn repeated_identical_steps_shrink() {
        let mut p = [0.0f64];
        let mut s = [0.0];
        rmsprop_step(&mut p, &[1.0], &mut s, 0.9, 1e-8, 5e-5, false);
        let first = p[0].abs();
        let before = p[0];
        rmsprop_step(&mut p, &[1.0], &mut s, 0.9, 1e-8, 5e-5, false);
        let second = (p[0] - before).abs();
        assert!(second < first, "accumulator growth must damp the step");
    }

    #[test]
    fn accumulator_stays_nonnegative() {
        let mut p = vec![0.3f64; 16];
        let mut s = vec![0.0; 16];
        let grads: Vec<f64> = (0..16).map(|i| (i as f64 - 8.0) * 0.7).collect();
        for _ in 0..50 {
            rmsprop_step(&mut p, &grads, &mut s, 0.9, 1e-8, 1e-3, false);
        }
        assert!(s.iter().all(|&v| v >= 0.0));
    }
}
