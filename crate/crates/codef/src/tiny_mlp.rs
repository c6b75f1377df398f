//! Small dense networks with hand-derived forward/backward passes.
//!
//! These are the heads sitting on top of the grid encodings: a couple of
//! rectifier hidden layers and either an identity output (displacements) or a
//! logistic output (colors bounded to `(0,1)`). The rectifier subgradient at
//! exactly zero is defined as zero.

use crate::real::Real;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Output nonlinearity of the network head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Logistic,
}

/// One affine layer, weights stored row-major `[output_dim x input_dim]`.
#[derive(Debug, Clone)]
pub struct DenseLayer<T> {
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    pub input_dim: usize,
    pub output_dim: usize,
}

/// Parameters of a small dense network.
#[derive(Debug, Clone)]
pub struct MlpParams<T> {
    pub layers: Vec<DenseLayer<T>>,
    pub output_activation: Activation,
}

/// Per-layer buffers kept by the forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache<T> {
    pub input: Vec<T>,
    /// Pre-activations per layer.
    pub pre: Vec<Vec<T>>,
    /// Post-activations per layer (last entry is the network output).
    pub post: Vec<Vec<T>>,
}

/// Parameter gradients matching [`MlpParams`] shapes.
#[derive(Debug, Clone)]
pub struct MlpGrads<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

/// Dot product with fixed 8-way accumulator splitting. The split keeps the
/// summation order independent of the caller so results are reproducible,
/// while still letting the compiler vectorize.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for k in 0..chunks {
        let ax = &a[k * 8..k * 8 + 8];
        let bx = &b[k * 8..k * 8 + 8];
        for j in 0..8 {
            acc[j] += ax[j] * bx[j];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

impl<T: Real> MlpParams<T> {
    /// Build a network `input -> hidden... -> output` with uniform
    /// `[-a, a]` initialization, `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn new(
        input: usize,
        hidden: &[usize],
        output: usize,
        output_activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                DenseLayer {
                    weights: (0..fan_in * fan_out)
                        .map(|_| T::real(rng.random_range(-a..=a)))
                        .collect(),
                    biases: vec![T::zero(); fan_out],
                    input_dim: fan_in,
                    output_dim: fan_out,
                }
            })
            .collect();
        Self {
            layers,
            output_activation,
        }
    }

    /// Zero the final layer so the network starts as the constant map from
    /// its biases (used by the displacement head to start at identity).
    pub fn zero_final_layer(&mut self) {
        if let Some(last) = self.layers.last_mut() {
            last.weights.fill(T::zero());
            last.biases.fill(T::zero());
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(Error::Config(format!(
                    "layer {i} output width {} does not chain into layer {} input width {}",
                    pair[0].output_dim,
                    i + 1,
                    pair[1].input_dim
                )));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.input_dim * l.output_dim || l.biases.len() != l.output_dim {
                return Err(Error::Config(format!("layer {i} has inconsistent shapes")));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    /// Allocate cache buffers sized for this network.
    pub fn make_cache(&self) -> MlpCache<T> {
        MlpCache {
            input: vec![T::zero(); self.input_dim()],
            pre: self.layers.iter().map(|l| vec![T::zero(); l.output_dim]).collect(),
            post: self.layers.iter().map(|l| vec![T::zero(); l.output_dim]).collect(),
        }
    }

    /// Forward pass; the output lives in `cache.post.last()`.
    pub fn forward<'c>(&self, input: &[T], cache: &'c mut MlpCache<T>) -> &'c [T] {
        debug_assert_eq!(input.len(), self.input_dim());
        cache.input.clear();
        cache.input.extend_from_slice(input);
        let n_layers = self.layers.len();
        let mut cur: &[T] = &cache.input;
        // split borrows: walk pre/post by index
        for li in 0..n_layers {
            let layer = &self.layers[li];
            {
                let pre = &mut cache.pre[li];
                for o in 0..layer.output_dim {
                    let row = &layer.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                    pre[o] = dot(row, cur) + layer.biases[o];
                }
            }
            let last = li == n_layers - 1;
            let (pre_part, post_part) = (&cache.pre[li], &mut cache.post[li]);
            for (p, z) in post_part.iter_mut().zip(pre_part) {
                *p = if last {
                    match self.output_activation {
                        Activation::Identity => *z,
                        Activation::Logistic => logistic(*z),
                    }
                } else {
                    // rectifier
                    if *z > T::zero() {
                        *z
                    } else {
                        T::zero()
                    }
                };
            }
            cur = &cache.post[li];
        }
        cache.post.last().unwrap()
    }

    /// Reverse-mode gradients of the forward composition.
    ///
    /// Accumulates parameter gradients into `grads` (callers zero or merge as
    /// they see fit) and writes the gradient with respect to the input into
    /// `input_grad`.
    pub fn backward(
        &self,
        cache: &MlpCache<T>,
        upstream: &[T],
        grads: &mut MlpGrads<T>,
        input_grad: &mut [T],
    ) {
        let n_layers = self.layers.len();
        debug_assert_eq!(upstream.len(), self.output_dim());
        // delta at the output, through the output activation
        let mut delta: Vec<T> = match self.output_activation {
            Activation::Identity => upstream.to_vec(),
            Activation::Logistic => {
                let out = &cache.post[n_layers - 1];
                upstream
                    .iter()
                    .zip(out)
                    .map(|(&u, &y)| u * y * (T::one() - y))
                    .collect()
            }
        };
        for li in (0..n_layers).rev() {
            let layer = &self.layers[li];
            let input: &[T] = if li == 0 { &cache.input } else { &cache.post[li - 1] };
            let gw = &mut grads.weights[li];
            let gb = &mut grads.biases[li];
            for o in 0..layer.output_dim {
                let d = delta[o];
                gb[o] += d;
                if d != T::zero() {
                    let grow = &mut gw[o * layer.input_dim..(o + 1) * layer.input_dim];
                    for (g, &x) in grow.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            // propagate to the layer input
            let mut prev = vec![T::zero(); layer.input_dim];
            for o in 0..layer.output_dim {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                let row = &layer.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if li == 0 {
                input_grad.copy_from_slice(&prev);
            } else {
                // rectifier subgradient: zero at and below zero
                let pre = &cache.pre[li - 1];
                for (p, &z) in prev.iter_mut().zip(pre) {
                    if z <= T::zero() {
                        *p = T::zero();
                    }
                }
                delta = prev;
            }
        }
    }
}

#[inline(always)]
fn logistic<T: Real>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

impl<T: Real> MlpGrads<T> {
    pub fn zeros_like(params: &MlpParams<T>) -> Self {
        Self {
            weights: params.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect(),
            biases: params.layers.iter().map(|l| vec![T::zero(); l.biases.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.fill(T::zero());
        }
        for b in &mut self.biases {
            b.fill(T::zero());
        }
    }

    /// Elementwise add, used when merging worker chunks in fixed order.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}
