use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use crate::par::Exec;
use crate::{Error, Result};

/// Samples per deterministic reduction unit when accumulating a batch
/// gradient. Chunk partial sums are added in chunk order, so the result does
/// not depend on thread count or execution policy.
pub const GRADIENT_CHUNK: usize = 5;

#[inline]
pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

/// 1 for `x > 0`, `alpha` otherwise (including `x == 0`).
#[inline]
pub fn leaky_relu_derivative(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    LeakyRelu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Input width, hidden widths, output width.
    pub layer_sizes: Vec<usize>,
    /// Negative slope of the leaky ReLU.
    pub alpha: f64,
    pub output_activation: OutputActivation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layer_sizes: vec![10, 64, 64, 64, 3],
            alpha: 0.3,
            output_activation: OutputActivation::Identity,
        }
    }
}

impl NetworkConfig {
    pub fn new(layer_sizes: Vec<usize>, alpha: f64) -> Result<Self> {
        let c = NetworkConfig {
            layer_sizes,
            alpha,
            output_activation: OutputActivation::Identity,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_hidden(hidden: &[usize]) -> Self {
        let mut layer_sizes = vec![crate::dataset::INPUT_DIM];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(crate::dataset::OUTPUT_DIM);
        NetworkConfig {
            layer_sizes,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config("a network needs an input and an output layer".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must be >= 1: {:?}",
                self.layer_sizes
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// A deep surrogate: 10 inputs, 3 outputs, at least two hidden layers.
    pub fn validate_surrogate(&self) -> Result<()> {
        self.validate()?;
        if self.layer_sizes.len() < 4 {
            return Err(Error::Config(format!(
                "need at least two hidden layers, got {:?}",
                self.layer_sizes
            )));
        }
        let (first, last) = (self.layer_sizes[0], *self.layer_sizes.last().unwrap());
        if first != crate::dataset::INPUT_DIM || last != crate::dataset::OUTPUT_DIM {
            return Err(Error::Config(format!(
                "surrogate must map 10 inputs to 3 outputs, got {first} -> {last}"
            )));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn activation_derivative(&self, layer: usize, z: f64) -> f64 {
        if layer + 1 == self.n_layers() && self.output_activation == OutputActivation::Identity {
            1.0
        } else {
            leaky_relu_derivative(z, self.alpha)
        }
    }

    fn activate(&self, layer: usize, z: f64) -> f64 {
        if layer + 1 == self.n_layers() && self.output_activation == OutputActivation::Identity {
            z
        } else {
            leaky_relu(z, self.alpha)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_out × fan_in`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    pub layers: Vec<Layer>,
}

/// Pre-activations `z` and activations `a` of one forward pass.
/// `activations[0]` is the input; `pre_activations[l]` feeds `activations[l + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn for_config(config: &NetworkConfig) -> Self {
        ForwardTrace {
            pre_activations: config.layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            activations: config.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

/// `∂C/∂w`, `∂C/∂b` for every layer, plus the error vectors `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub deltas: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let pairs = config.layer_sizes.windows(2);
        Gradients {
            weights: pairs.clone().map(|w| Matrix::zeros(w[1], w[0])).collect(),
            biases: pairs.clone().map(|w| vec![0.0; w[1]]).collect(),
            deltas: pairs.map(|w| vec![0.0; w[1]]).collect(),
        }
    }

    fn clear(&mut self) {
        for m in &mut self.weights {
            m.as_mut_slice().iter_mut().for_each(|x| *x = 0.0);
        }
        for v in self.biases.iter_mut().chain(self.deltas.iter_mut()) {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.as_mut_slice().iter_mut().zip(b.as_slice()).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self
            .biases
            .iter_mut()
            .chain(self.deltas.iter_mut())
            .zip(other.biases.iter().chain(&other.deltas))
        {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn scale(&mut self, k: f64) {
        for m in &mut self.weights {
            m.as_mut_slice().iter_mut().for_each(|x| *x *= k);
        }
        for v in self.biases.iter_mut().chain(self.deltas.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// Parameter gradients as `(weights, bias)` slices per layer.
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }
}

/// `‖y − a‖² / 2`
pub fn quadratic_cost(y: &[f64], a: &[f64]) -> Result<f64> {
    if y.len() != a.len() {
        return Err(Error::Shape(format!("target {} vs output {}", y.len(), a.len())));
    }
    Ok(0.5 * y.iter().zip(a).map(|(t, o)| (t - o) * (t - o)).sum::<f64>())
}

/// Mean of [`quadratic_cost`] over paired samples.
pub fn quadratic_cost_batch<Y: AsRef<[f64]>, A: AsRef<[f64]>>(ys: &[Y], outs: &[A]) -> Result<f64> {
    if ys.len() != outs.len() || ys.is_empty() {
        return Err(Error::Shape(format!("{} targets vs {} outputs", ys.len(), outs.len())));
    }
    let mut total = 0.0;
    for (y, a) in ys.iter().zip(outs) {
        total += quadratic_cost(y.as_ref(), a.as_ref())?;
    }
    Ok(total / ys.len() as f64)
}

/// `δᴸ = −(y − aᴸ) ⊙ σ′(zᴸ)`
pub fn output_delta(config: &NetworkConfig, y: &[f64], trace: &ForwardTrace) -> Result<Vec<f64>> {
    let last = config.n_layers() - 1;
    let a = trace.output();
    let z = &trace.pre_activations[last];
    if y.len() != a.len() {
        return Err(Error::Shape(format!("target {} vs output {}", y.len(), a.len())));
    }
    Ok(y.iter()
        .zip(a)
        .zip(z)
        .map(|((t, o), zi)| -(t - o) * config.activation_derivative(last, *zi))
        .collect())
}

/// Scratch buffers for computing one chunk of a batch gradient.
#[derive(Debug, Clone)]
struct ChunkWorkspace {
    trace: ForwardTrace,
    grads: Gradients,
    deltas: Vec<Vec<f64>>,
    cost: f64,
}

/// Reusable buffers for [`NetworkParameters::batch_gradients_into`].
#[derive(Debug, Clone)]
pub struct BatchWorkspace {
    chunks: Vec<ChunkWorkspace>,
    pub gradients: Gradients,
}

impl BatchWorkspace {
    pub fn new(config: &NetworkConfig, max_batch: usize) -> Self {
        let n_chunks = max_batch.div_ceil(GRADIENT_CHUNK).max(1);
        let chunk = ChunkWorkspace {
            trace: ForwardTrace::for_config(config),
            grads: Gradients::zeros(config),
            deltas: config.layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            cost: 0.0,
        };
        BatchWorkspace {
            chunks: vec![chunk; n_chunks],
            gradients: Gradients::zeros(config),
        }
    }
}

impl NetworkParameters {
    /// Glorot-uniform weights in ±√(6 / (fan_in + fan_out)), zero biases.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Layer {
                    weights: Matrix::from_vec(fan_out, fan_in, data),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(NetworkParameters { layers })
    }

    /// Checks that the parameter shapes chain as `config` says.
    pub fn check_shapes(&self, config: &NetworkConfig) -> Result<()> {
        if self.layers.len() != config.n_layers() {
            return Err(Error::Shape(format!(
                "{} parameter layers for {} config layers",
                self.layers.len(),
                config.n_layers()
            )));
        }
        for (i, (layer, w)) in self.layers.iter().zip(config.layer_sizes.windows(2)).enumerate() {
            if layer.weights.rows() != w[1] || layer.weights.cols() != w[0] || layer.bias.len() != w[1] {
                return Err(Error::Shape(format!(
                    "layer {i}: weights {}x{}, bias {}; expected {}x{}",
                    layer.weights.rows(),
                    layer.weights.cols(),
                    layer.bias.len(),
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    /// Euclidean norm over all weights and biases.
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias))
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias))
            .all(|x| x.is_finite())
    }

    /// Forward pass into a preallocated trace. No input validation.
    pub fn forward_into(&self, config: &NetworkConfig, input: &[f64], trace: &mut ForwardTrace) {
        trace.activations[0].copy_from_slice(input);
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = trace.activations.split_at_mut(l + 1);
            let z = &mut trace.pre_activations[l];
            layer.weights.affine_into(&before[l], &layer.bias, z);
            for (a, zi) in after[0].iter_mut().zip(z.iter()) {
                *a = config.activate(l, *zi);
            }
        }
    }

    pub fn forward(&self, config: &NetworkConfig, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != config.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} entries, network expects {}",
                input.len(),
                config.input_dim()
            )));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite network input".into()));
        }
        let mut trace = ForwardTrace::for_config(config);
        self.forward_into(config, input, &mut trace);
        Ok(trace)
    }

    /// Network output only, reusing `trace` as scratch.
    pub fn predict_into<'t>(
        &self,
        config: &NetworkConfig,
        input: &[f64],
        trace: &'t mut ForwardTrace,
    ) -> &'t [f64] {
        self.forward_into(config, input, trace);
        trace.output()
    }

    /// Backpropagates one sample and adds its gradients into `grads`.
    /// `deltas` is scratch shaped like the non-input layers.
    fn accumulate_sample(
        &self,
        config: &NetworkConfig,
        trace: &ForwardTrace,
        y: &[f64],
        deltas: &mut [Vec<f64>],
        grads: &mut Gradients,
    ) {
        let n = self.layers.len();
        let last = n - 1;
        for (i, d) in deltas[last].iter_mut().enumerate() {
            let z = trace.pre_activations[last][i];
            *d = (trace.activations[n][i] - y[i]) * config.activation_derivative(last, z);
        }
        for l in (0..last).rev() {
            let (lower, upper) = deltas.split_at_mut(l + 1);
            let d = &mut lower[l];
            self.layers[l + 1].weights.transpose_mul_into(&upper[0], d);
            for (di, zi) in d.iter_mut().zip(&trace.pre_activations[l]) {
                *di *= config.activation_derivative(l, *zi);
            }
        }
        for l in 0..n {
            grads.weights[l].add_outer(&deltas[l], &trace.activations[l]);
            for ((gb, gd), d) in grads.biases[l].iter_mut().zip(grads.deltas[l].iter_mut()).zip(&deltas[l]) {
                *gb += d;
                *gd += d;
            }
        }
    }

    /// Gradients of the quadratic cost for one sample from its forward trace.
    pub fn backprop(&self, config: &NetworkConfig, trace: &ForwardTrace, y: &[f64]) -> Result<Gradients> {
        if y.len() != config.output_dim() {
            return Err(Error::Shape(format!(
                "target has {} entries, network outputs {}",
                y.len(),
                config.output_dim()
            )));
        }
        let mut grads = Gradients::zeros(config);
        let mut deltas: Vec<Vec<f64>> = config.layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        self.accumulate_sample(config, trace, y, &mut deltas, &mut grads);
        Ok(grads)
    }

    /// Batch-mean gradient and batch-mean quadratic cost of `samples`, written
    /// into `ws.gradients`. Samples are indices into `inputs`/`targets`.
    pub fn batch_gradients_into<X, Y>(
        &self,
        config: &NetworkConfig,
        inputs: &[X],
        targets: &[Y],
        samples: &[usize],
        ws: &mut BatchWorkspace,
        exec: Exec,
    ) -> f64
    where
        X: AsRef<[f64]> + Sync,
        Y: AsRef<[f64]> + Sync,
    {
        assert!(!samples.is_empty(), "empty batch");
        let groups: Vec<&[usize]> = samples.chunks(GRADIENT_CHUNK).collect();
        if ws.chunks.len() < groups.len() {
            let extra = ws.chunks[0].clone();
            ws.chunks.resize(groups.len(), extra);
        }
        let used = &mut ws.chunks[..groups.len()];
        exec.zip_for_each(&groups, used, |group, chunk| {
            chunk.grads.clear();
            chunk.cost = 0.0;
            for &i in group.iter() {
                self.forward_into(config, inputs[i].as_ref(), &mut chunk.trace);
                let y = targets[i].as_ref();
                chunk.cost += 0.5
                    * y.iter()
                        .zip(chunk.trace.output())
                        .map(|(t, o)| (t - o) * (t - o))
                        .sum::<f64>();
                self.accumulate_sample(config, &chunk.trace, y, &mut chunk.deltas, &mut chunk.grads);
            }
        });
        ws.gradients.clear();
        let mut cost = 0.0;
        for chunk in used.iter() {
            ws.gradients.add_assign(&chunk.grads);
            cost += chunk.cost;
        }
        let k = 1.0 / samples.len() as f64;
        ws.gradients.scale(k);
        cost * k
    }

    /// Allocating convenience wrapper around [`batch_gradients_into`](Self::batch_gradients_into).
    pub fn batch_gradients<X, Y>(
        &self,
        config: &NetworkConfig,
        inputs: &[X],
        targets: &[Y],
        exec: Exec,
    ) -> (Gradients, f64)
    where
        X: AsRef<[f64]> + Sync,
        Y: AsRef<[f64]> + Sync,
    {
        let samples: Vec<usize> = (0..inputs.len()).collect();
        let mut ws = BatchWorkspace::new(config, samples.len());
        let cost = self.batch_gradients_into(config, inputs, targets, &samples, &mut ws, exec);
        (ws.gradients, cost)
    }
}
