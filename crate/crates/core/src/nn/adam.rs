use super::dense::{DenseNet, Gradients};
use crate::error::{Error, Result};

/// Adam optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Gradients,
    second_moment: Gradients,
}

/// What [`Adam::step`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Applied,
    /// The gradient held a NaN or infinity; nothing changed.
    SkippedNonFinite,
}

impl Adam {
    pub fn new(net: &DenseNet, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one descent step along `grads`.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<StepStatus> {
        if grads.weights.len() != net.num_layers()
            || (0..net.num_layers())
                .any(|l| grads.weights[l].dim() != net.weights(l).dim() || grads.biases[l].dim() != net.bias(l).dim())
        {
            return Err(Error::Shape("gradients are not shaped like the network".into()));
        }
        if !grads.is_finite() {
            log::warn!("skipping optimizer step {}: non-finite gradient", self.step + 1);
            return Ok(StepStatus::SkippedNonFinite);
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let (lr, eps) = (self.learning_rate, self.epsilon);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for l in 0..net.num_layers() {
            ndarray::Zip::from(net.weights_mut(l))
                .and(&grads.weights[l])
                .and(&mut self.first_moment.weights[l])
                .and(&mut self.second_moment.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(net.bias_mut(l))
                .and(&grads.biases[l])
                .and(&mut self.first_moment.biases[l])
                .and(&mut self.second_moment.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(StepStatus::Applied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputActivation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DenseNet::new(&[3, 4, 2], OutputActivation::Identity, &mut rng).unwrap();
        let before = net.clone();
        let mut opt = Adam::new(&net, 1e-3);
        let zero = Gradients::zeros_like(&net);
        assert_eq!(opt.step(&mut net, &zero).unwrap(), StepStatus::Applied);
        assert_eq!(net, before);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = DenseNet::zeros(&[1, 1], OutputActivation::Identity).unwrap();
        let mut opt = Adam::new(&net, 0.01);
        let mut g = Gradients::zeros_like(&net);
        g.weights[0][[0, 0]] = 3.7;
        opt.step(&mut net, &g).unwrap();
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let moved = -net.weights(0)[[0, 0]];
        assert!((moved - 0.01 * 3.7 / (3.7 + 1e-8)).abs() < 1e-15);
        assert!((moved - 0.01).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradients_are_skipped() {
        let mut net = DenseNet::zeros(&[2, 1], OutputActivation::Identity).unwrap();
        let before = net.clone();
        let mut opt = Adam::new(&net, 0.01);
        let mut g = Gradients::zeros_like(&net);
        g.biases[0][0] = f64::NAN;
        assert_eq!(opt.step(&mut net, &g).unwrap(), StepStatus::SkippedNonFinite);
        assert_eq!(net, before);
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn identical_inputs_give_identical_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DenseNet::new(&[3, 5, 2], OutputActivation::Tanh, &mut rng).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        for (i, w) in grads.weights[0].iter_mut().enumerate() {
            *w = (i as f64 * 0.37).sin();
        }
        let (mut a, mut b) = (net.clone(), net.clone());
        let (mut oa, mut ob) = (Adam::new(&a, 1e-3), Adam::new(&b, 1e-3));
        for _ in 0..3 {
            oa.step(&mut a, &grads).unwrap();
            ob.step(&mut b, &grads).unwrap();
        }
        assert_eq!(a, b);
    }
}
