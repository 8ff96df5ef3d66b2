use std::hash::{Hash, Hasher};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Activation applied to the last layer. Hidden layers always use ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

impl OutputActivation {
    pub fn name(self) -> &'static str {
        match self {
            OutputActivation::Identity => "identity",
            OutputActivation::Tanh => "tanh",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(OutputActivation::Identity),
            "tanh" => Some(OutputActivation::Tanh),
            _ => None,
        }
    }
}

/// Fully connected feed-forward network.
///
/// Layer `l` maps a row batch `A` to `A · W_l + b_l` with `W_l` stored as
/// `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    output: OutputActivation,
}

/// Activations recorded by a forward pass, consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input batch, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace always holds the input")
    }

    pub fn input(&self) -> &Array2<f64> {
        &self.activations[0]
    }
}

/// Per-parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        if self.weights.len() != other.weights.len() {
            return Err(Error::Shape("gradient layer counts differ".into()));
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            if a.dim() != b.dim() {
                return Err(Error::Shape("gradient weight shapes differ".into()));
            }
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            if a.dim() != b.dim() {
                return Err(Error::Shape("gradient bias shapes differ".into()));
            }
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Backprop {
    pub params: Gradients,
    /// Gradient with respect to the input batch, same shape as the input.
    pub input: Array2<f64>,
}

impl DenseNet {
    /// Random network with weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self> {
        let mut net = DenseNet::zeros(sizes, output)?;
        for (w, b) in net.weights.iter_mut().zip(net.biases.iter_mut()) {
            let bound = 1.0 / (w.nrows() as f64).sqrt();
            w.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
            b.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!(
                "layer sizes {sizes:?} need >= 2 positive entries"
            )));
        }
        let weights = sizes.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(DenseNet {
            sizes: sizes.to_vec(),
            weights,
            biases,
            output,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn weights(&self, layer: usize) -> &Array2<f64> {
        &self.weights[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut Array2<f64> {
        &mut self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &Array1<f64> {
        &self.biases[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        &mut self.biases[layer]
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    /// Hash of the exact parameter bits.
    pub fn param_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.sizes.hash(&mut h);
        for v in self.params() {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn same_shape(&self, other: &DenseNet) -> bool {
        self.sizes == other.sizes
    }

    fn apply_output(&self, z: &mut Array2<f64>) {
        if self.output == OutputActivation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }

    /// Forward a batch (one sample per row), recording activations.
    pub fn forward_batch(&self, input: Array2<f64>) -> Result<Trace> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let last = self.weights.len() - 1;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(input);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(w);
            z += b;
            if l == last {
                self.apply_output(&mut z);
            } else {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        Ok(Trace { activations })
    }

    /// Forward a batch without keeping intermediate activations.
    pub fn predict_batch(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let last = self.weights.len() - 1;
        let mut a = input.dot(&self.weights[0]);
        a += &self.biases[0];
        for l in 0..=last {
            if l > 0 {
                a = a.dot(&self.weights[l]);
                a += &self.biases[l];
            }
            if l == last {
                self.apply_output(&mut a);
            } else {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = Array2::from_shape_vec((1, x.len()), x.to_vec()).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.predict_batch(&input)?.into_raw_vec_and_offset().0)
    }

    /// Reverse-mode pass. `upstream` is dLoss/dOutput for every row of the
    /// traced batch; parameter gradients are summed over rows.
    pub fn backward(&self, trace: &Trace, upstream: &Array2<f64>) -> Result<Backprop> {
        self.check_trace(trace, upstream)?;
        let out = trace.output();
        let delta = match self.output {
            OutputActivation::Identity => upstream.clone(),
            OutputActivation::Tanh => upstream * &out.mapv(|y| 1.0 - y * y),
        };
        Ok(self.backprop_delta(trace, delta))
    }

    /// Reverse-mode pass seeded with dLoss/d(pre-activation) of the last
    /// layer, skipping the output activation's derivative.
    pub fn backward_pre_activation(&self, trace: &Trace, upstream: &Array2<f64>) -> Result<Backprop> {
        self.check_trace(trace, upstream)?;
        Ok(self.backprop_delta(trace, upstream.clone()))
    }

    fn check_trace(&self, trace: &Trace, upstream: &Array2<f64>) -> Result<()> {
        if trace.activations.len() != self.weights.len() + 1
            || trace.activations.iter().zip(&self.sizes).any(|(a, &n)| a.ncols() != n)
        {
            return Err(Error::Shape("trace was not produced by a network of this shape".into()));
        }
        let out = trace.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        Ok(())
    }

    fn backprop_delta(&self, trace: &Trace, mut delta: Array2<f64>) -> Backprop {
        let n = self.weights.len();
        let mut dw = vec![Array2::zeros((0, 0)); n];
        let mut db = vec![Array1::zeros(0); n];
        for l in (0..n).rev() {
            let a_in = &trace.activations[l];
            dw[l] = a_in.t().dot(&delta);
            db[l] = delta.sum_axis(Axis(0));
            let mut d_in = delta.dot(&self.weights[l].t());
            if l > 0 {
                ndarray::Zip::from(&mut d_in).and(a_in).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_in;
        }
        Backprop {
            params: Gradients {
                weights: dw,
                biases: db,
            },
            input: delta,
        }
    }

    /// `self <- tau * main + (1 - tau) * self`, parameter by parameter.
    pub fn soft_update(&mut self, main: &DenseNet, tau: f64) -> Result<()> {
        if !self.same_shape(main) {
            return Err(Error::Shape(format!(
                "soft update between {:?} and {:?}",
                self.sizes, main.sizes
            )));
        }
        for (t, m) in self.params_mut().zip(main.params()) {
            *t = tau * m + (1.0 - tau) * *t;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = DenseNet::zeros(&[3, 3], OutputActivation::Identity).unwrap();
        for i in 0..3 {
            net.weights_mut(0)[[i, i]] = 1.0;
        }
        assert_eq!(net.forward(&[0.5, -2.0, 7.0]).unwrap(), vec![0.5, -2.0, 7.0]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = DenseNet::zeros(&[4, 8, 2], OutputActivation::Tanh).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_forward() {
        let mut net = DenseNet::zeros(&[2, 2, 1], OutputActivation::Identity).unwrap();
        *net.weights_mut(0) = array![[1.0, -1.0], [0.5, 2.0]];
        *net.bias_mut(0) = array![0.1, -0.2];
        *net.weights_mut(1) = array![[3.0], [-1.5]];
        *net.bias_mut(1) = array![0.25];
        let x = [2.0, -1.0];
        // hidden = relu([2 - 0.5 + 0.1, -2 - 2 - 0.2]) = [1.6, 0]
        let y = net.forward(&x).unwrap()[0];
        assert!((y - (3.0 * 1.6 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn scalar_product_gradients() {
        let mut net = DenseNet::zeros(&[1, 1], OutputActivation::Identity).unwrap();
        net.weights_mut(0)[[0, 0]] = 1.7;
        let trace = net.forward_batch(array![[0.6]]).unwrap();
        let bp = net.backward(&trace, &array![[1.0]]).unwrap();
        assert_eq!(bp.params.weights[0][[0, 0]], 0.6);
        assert_eq!(bp.params.biases[0][0], 1.0);
        assert_eq!(bp.input[[0, 0]], 1.7);
    }

    #[test]
    fn parameter_count_and_init_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DenseNet::new(&[9, 64, 32, 4], OutputActivation::Tanh, &mut rng).unwrap();
        assert_eq!(net.num_params(), 10 * 64 + 65 * 32 + 33 * 4);
        assert_eq!(net.params().count(), net.num_params());
        for l in 0..net.num_layers() {
            let bound = 1.0 / (net.sizes()[l] as f64).sqrt();
            assert!(net.weights(l).iter().all(|w| w.abs() <= bound));
            assert!(net.bias(l).iter().all(|b| b.abs() <= bound));
        }
    }

    #[test]
    fn shape_errors() {
        let net = DenseNet::zeros(&[3, 2], OutputActivation::Identity).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        let other = DenseNet::zeros(&[4, 2], OutputActivation::Identity).unwrap();
        let trace = other.forward_batch(Array2::zeros((1, 4))).unwrap();
        assert!(net.backward(&trace, &Array2::zeros((1, 2))).is_err());
        let mut t = net.clone();
        assert!(t.soft_update(&other, 0.5).is_err());
        assert!(DenseNet::zeros(&[3], OutputActivation::Identity).is_err());
    }

    #[test]
    fn soft_update_reference_values() {
        let mut main = DenseNet::zeros(&[1, 1], OutputActivation::Identity).unwrap();
        main.weights_mut(0)[[0, 0]] = 1.0;
        let mut target = DenseNet::zeros(&[1, 1], OutputActivation::Identity).unwrap();
        target.soft_update(&main, 0.0005).unwrap();
        assert_eq!(target.weights(0)[[0, 0]], 0.0005);
        target.soft_update(&main, 1.0).unwrap();
        assert_eq!(target, main);
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = DenseNet::new(&[5, 16, 16, 3], OutputActivation::Tanh, &mut rng).unwrap();
        let x = [0.3, -0.1, 0.9, 1.2, -0.7];
        let a = net.forward(&x).unwrap();
        let b = net.clone().forward(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let traced = net
            .forward_batch(Array2::from_shape_vec((1, 5), x.to_vec()).unwrap())
            .unwrap();
        assert_eq!(traced.output().row(0).to_vec(), a);
    }
}
