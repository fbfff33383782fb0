//! A small 1D CNN with hand-written forward and backward passes.
//!
//! Every convolution block is `conv (same padding) -> max pool (/pool) ->
//! ReLU`; the last block is flattened into a dense layer whose logits go
//! through a softmax. Training minimises the mean squared error between the
//! softmax output and one-hot targets with Adam.

mod adam;
mod checkpoint;
mod layers;
mod loss;
mod model;
mod train;

use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_weights, read_checkpoint, save_weights, write_checkpoint, Checkpoint, CheckpointError};
pub use layers::{conv1d_same_backward, conv1d_same_forward, dense_forward, maxpool_backward, maxpool_forward, softmax, Conv1d, Dense, Pooled};
pub use loss::mse_loss;
pub use model::{Cache, Model};
pub use train::{argmax, evaluate, train, Evaluation, PlateauDecay, TrainConfig, TrainError, TrainLogEntry, TrainOutcome};

/// One convolution block: kernel width and output feature maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: usize,
    pub channels: usize,
}

/// Layer sizes of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_len: usize,
    pub convs: Vec<ConvSpec>,
    pub pool: usize,
    pub n_classes: usize,
}

impl Architecture {
    /// Input 2700; kernels 5/10/15 with 32/64/128 maps; pooling by 5.
    pub fn canonical(n_classes: usize) -> Self {
        Architecture {
            input_len: 2700,
            convs: vec![
                ConvSpec { kernel: 5, channels: 32 },
                ConvSpec { kernel: 10, channels: 64 },
                ConvSpec { kernel: 15, channels: 128 },
            ],
            pool: 5,
            n_classes,
        }
    }

    /// `(channels, length)` after the input and after each pooled block.
    pub fn shape_chain(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(1, self.input_len)];
        let mut len = self.input_len;
        for c in &self.convs {
            len /= self.pool;
            shapes.push((c.channels, len));
        }
        shapes
    }

    /// Width of the flattened feature vector feeding the dense layer.
    pub fn flatten_width(&self) -> usize {
        let &(channels, len) = self.shape_chain().last().expect("chain starts with the input");
        channels * len
    }

    pub fn n_params(&self) -> usize {
        let mut in_ch = 1;
        let mut n = 0;
        for c in &self.convs {
            n += c.channels * in_ch * c.kernel + c.channels;
            in_ch = c.channels;
        }
        n + self.n_classes * self.flatten_width() + self.n_classes
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShapeError {
    #[error("expected {expected} input channels, got {actual}")]
    Channels { expected: usize, actual: usize },
    #[error("expected input length {expected}, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("target class {class} out of range for {n_classes} classes")]
    Target { class: usize, n_classes: usize },
    #[error("cache belongs to a different input")]
    StaleCache,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_shape_chain() {
        let a = Architecture::canonical(5);
        assert_eq!(
            a.shape_chain(),
            vec![(1, 2700), (32, 540), (64, 108), (128, 21)]
        );
        assert_eq!(a.flatten_width(), 2688);
        assert_eq!(
            a.n_params(),
            (32 * 5 + 32) + (64 * 32 * 10 + 64) + (128 * 64 * 15 + 128) + (5 * 2688 + 5)
        );
    }
}
