use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    conv1d_same_backward, conv1d_same_forward, dense_forward, maxpool_backward, maxpool_forward,
    softmax, Conv1d, Dense,
};
use super::{Architecture, ShapeError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub arch: Architecture,
    pub convs: Vec<Conv1d<T>>,
    pub dense: Dense<T>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    blocks: Vec<BlockCache<T>>,
    pub features: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

#[derive(Debug, Clone)]
struct BlockCache<T> {
    input: Vec<T>,
    len: usize,
    /// Pooled values before the ReLU.
    pooled: Vec<T>,
    argmax: Vec<usize>,
}

impl<T: Scalar> Model<T> {
    pub fn zeros(arch: &Architecture) -> Self {
        let mut convs = Vec::with_capacity(arch.convs.len());
        let mut in_ch = 1;
        for c in &arch.convs {
            convs.push(Conv1d::zeros(c.kernel, in_ch, c.channels));
            in_ch = c.channels;
        }
        Model {
            arch: arch.clone(),
            convs,
            dense: Dense::zeros(arch.flatten_width(), arch.n_classes),
        }
    }

    /// Weights uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut model = Self::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [T], fan_in: usize| {
            if fan_in == 0 {
                return;
            }
            let a = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a);
            w.iter_mut().for_each(|v| *v = T::of(dist.sample(&mut rng)));
        };
        for c in &mut model.convs {
            fill(&mut c.weights, c.in_channels * c.kernel);
        }
        fill(&mut model.dense.weights, model.dense.inputs);
        model
    }

    pub fn n_classes(&self) -> usize {
        self.arch.n_classes
    }

    /// Parameter tensors in declaration order: each convolution's weights
    /// then bias, then the dense weights and bias.
    pub fn params(&self) -> Vec<&[T]> {
        let mut p: Vec<&[T]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &self.convs {
            p.push(&c.weights);
            p.push(&c.bias);
        }
        p.push(&self.dense.weights);
        p.push(&self.dense.bias);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut p: Vec<&mut [T]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &mut self.convs {
            p.push(&mut c.weights);
            p.push(&mut c.bias);
        }
        p.push(&mut self.dense.weights);
        p.push(&mut self.dense.bias);
        p
    }

    /// Zero tensors shaped like [`Model::params`].
    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.params().iter().map(|p| vec![T::zero(); p.len()]).collect()
    }

    pub fn forward(&self, input: &[T]) -> Result<Cache<T>, ShapeError> {
        if input.len() != self.arch.input_len {
            return Err(ShapeError::Length {
                expected: self.arch.input_len,
                actual: input.len(),
            });
        }
        let mut blocks = Vec::with_capacity(self.convs.len());
        let mut x = input.to_vec();
        let mut len = input.len();
        for conv in &self.convs {
            let y = conv1d_same_forward(&x, len, conv)?;
            let pooled = maxpool_forward(&y, conv.out_channels, len, self.arch.pool);
            let activated: Vec<T> = pooled.values.iter().map(|&v| v.max(T::zero())).collect();
            blocks.push(BlockCache {
                input: std::mem::replace(&mut x, activated),
                len,
                pooled: pooled.values,
                argmax: pooled.argmax,
            });
            len = pooled.len;
        }
        let logits = dense_forward(&x, &self.dense);
        let probs = softmax(&logits);
        Ok(Cache {
            blocks,
            features: x,
            logits,
            probs,
        })
    }

    /// Class probabilities for one input window.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>, ShapeError> {
        self.forward(input).map(|c| c.probs)
    }

    /// Parameter gradients given the loss gradient with respect to the
    /// softmax output; shaped like [`Model::params`].
    pub fn backward(&self, cache: &Cache<T>, grad_probs: &[T]) -> Result<Vec<Vec<T>>, ShapeError> {
        if cache.blocks.len() != self.convs.len()
            || cache.probs.len() != self.n_classes()
            || grad_probs.len() != self.n_classes()
            || cache.features.len() != self.dense.inputs
        {
            return Err(ShapeError::StaleCache);
        }
        let mut grads = self.zero_grads();
        let n = self.convs.len();

        // Softmax Jacobian: dz = p * (dp - <dp, p>).
        let p = &cache.probs;
        let inner: T = grad_probs.iter().zip(p).map(|(&g, &q)| g * q).sum();
        let grad_logits: Vec<T> = grad_probs
            .iter()
            .zip(p)
            .map(|(&g, &q)| q * (g - inner))
            .collect();

        let d = &self.dense;
        let mut grad_x = vec![T::zero(); d.inputs];
        {
            let (gw, gb) = grads[2 * n..].split_at_mut(1);
            for (o, &gz) in grad_logits.iter().enumerate() {
                gb[0][o] += gz;
                let row = o * d.inputs..(o + 1) * d.inputs;
                for ((w, g), (&x, gx)) in d.weights[row.clone()]
                    .iter()
                    .zip(&mut gw[0][row])
                    .zip(cache.features.iter().zip(grad_x.iter_mut()))
                {
                    *g += gz * x;
                    *gx += *w * gz;
                }
            }
        }

        for (l, (conv, block)) in self.convs.iter().zip(&cache.blocks).enumerate().rev() {
            let grad_pooled: Vec<T> = grad_x
                .iter()
                .zip(&block.pooled)
                .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                .collect();
            let grad_conv = maxpool_backward(&block.argmax, &grad_pooled, conv.out_channels * block.len);
            let (gw, gb) = grads[2 * l..2 * l + 2].split_at_mut(1);
            let gx = conv1d_same_backward(
                &block.input,
                block.len,
                conv,
                &grad_conv,
                &mut gw[0],
                &mut gb[0],
                l > 0,
            );
            if let Some(gx) = gx {
                grad_x = gx;
            }
        }
        Ok(grads)
    }

    /// Converts every parameter to another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let mut out = Model::<U>::zeros(&self.arch);
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = U::of(s.wide());
            }
        }
        out
    }
}
