use super::ShapeError;
use crate::Scalar;

/// Same-padded 1D convolution (cross-correlation).
///
/// Weights are laid out `[out][in][k]`. The input is padded with
/// `(k - 1) / 2` zeros on the left and the rest on the right so the output
/// keeps the input length.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn zeros(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        Conv1d {
            kernel,
            in_channels,
            out_channels,
            weights: vec![T::zero(); out_channels * in_channels * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    #[inline]
    fn w(&self, o: usize, i: usize) -> &[T] {
        let k = self.kernel;
        let at = (o * self.in_channels + i) * k;
        &self.weights[at..at + k]
    }

    pub fn left_pad(&self) -> usize {
        (self.kernel - 1) / 2
    }
}

/// Copies `input` (`channels x len`, row-major) into a zero-padded buffer of
/// row length `len + k - 1`.
fn pad<T: Scalar>(input: &[T], channels: usize, len: usize, k: usize, left: usize) -> Vec<T> {
    let row = len + k - 1;
    let mut padded = vec![T::zero(); channels * row];
    for c in 0..channels {
        padded[c * row + left..c * row + left + len].copy_from_slice(&input[c * len..(c + 1) * len]);
    }
    padded
}

/// `input` is `in_channels x len` row-major; returns `out_channels x len`.
pub fn conv1d_same_forward<T: Scalar>(
    input: &[T],
    len: usize,
    layer: &Conv1d<T>,
) -> Result<Vec<T>, ShapeError> {
    if input.len() != layer.in_channels * len {
        return Err(ShapeError::Channels {
            expected: layer.in_channels,
            actual: if len == 0 { 0 } else { input.len() / len },
        });
    }
    let k = layer.kernel;
    let row = len + k - 1;
    let padded = pad(input, layer.in_channels, len, k, layer.left_pad());
    let mut out = vec![T::zero(); layer.out_channels * len];
    for (o, dst) in out.chunks_exact_mut(len.max(1)).enumerate().take(layer.out_channels) {
        dst.fill(layer.bias[o]);
        for i in 0..layer.in_channels {
            let src = &padded[i * row..(i + 1) * row];
            for (j, &w) in layer.w(o, i).iter().enumerate() {
                for (d, &s) in dst.iter_mut().zip(&src[j..j + len]) {
                    *d += w * s;
                }
            }
        }
    }
    Ok(out)
}

/// Accumulates weight and bias gradients into `grad_w` / `grad_b` and
/// returns the input gradient when `need_input_grad` is set.
pub fn conv1d_same_backward<T: Scalar>(
    input: &[T],
    len: usize,
    layer: &Conv1d<T>,
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    need_input_grad: bool,
) -> Option<Vec<T>> {
    let k = layer.kernel;
    let row = len + k - 1;
    let left = layer.left_pad();
    let padded = pad(input, layer.in_channels, len, k, left);
    let mut grad_padded = need_input_grad.then(|| vec![T::zero(); layer.in_channels * row]);

    // Upstream gradients come through max pooling and ReLU, so most entries
    // are zero; only the non-zero positions are visited.
    let mut active: Vec<(usize, T)> = Vec::with_capacity(len);
    for o in 0..layer.out_channels {
        let gy = &grad_out[o * len..(o + 1) * len];
        active.clear();
        active.extend(gy.iter().enumerate().filter(|(_, g)| !g.is_zero()).map(|(t, &g)| (t, g)));
        grad_b[o] += active.iter().map(|a| a.1).sum::<T>();
        for i in 0..layer.in_channels {
            let src = &padded[i * row..(i + 1) * row];
            let at = (o * layer.in_channels + i) * k;
            let gw = &mut grad_w[at..at + k];
            for &(t, g) in &active {
                for (d, &x) in gw.iter_mut().zip(&src[t..t + k]) {
                    *d += g * x;
                }
            }
            if let Some(gp) = grad_padded.as_mut() {
                let gp = &mut gp[i * row..(i + 1) * row];
                let w = layer.w(o, i);
                for &(t, g) in &active {
                    for (d, &wj) in gp[t..t + k].iter_mut().zip(w) {
                        *d += wj * g;
                    }
                }
            }
        }
    }

    grad_padded.map(|gp| {
        let mut gx = vec![T::zero(); layer.in_channels * len];
        for i in 0..layer.in_channels {
            gx[i * len..(i + 1) * len].copy_from_slice(&gp[i * row + left..i * row + left + len]);
        }
        gx
    })
}

/// Non-overlapping max pooling output with the winning input positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub values: Vec<T>,
    pub argmax: Vec<usize>,
    pub len: usize,
}

/// Pools each channel of a `channels x len` tensor by `size`; the trailing
/// `len % size` samples are dropped and ties go to the first maximum.
pub fn maxpool_forward<T: Scalar>(input: &[T], channels: usize, len: usize, size: usize) -> Pooled<T> {
    let out_len = len / size;
    let mut values = Vec::with_capacity(channels * out_len);
    let mut argmax = Vec::with_capacity(channels * out_len);
    for c in 0..channels {
        for w in 0..out_len {
            let start = c * len + w * size;
            let mut best = start;
            for p in start + 1..start + size {
                if input[p] > input[best] {
                    best = p;
                }
            }
            values.push(input[best]);
            argmax.push(best);
        }
    }
    Pooled {
        values,
        argmax,
        len: out_len,
    }
}

/// Routes each output gradient to the input position that won the max.
pub fn maxpool_backward<T: Scalar>(argmax: &[usize], grad_out: &[T], input_size: usize) -> Vec<T> {
    let mut g = vec![T::zero(); input_size];
    for (&at, &go) in argmax.iter().zip(grad_out) {
        g[at] += go;
    }
    g
}

/// Fully connected layer, weights `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }
}

pub fn dense_forward<T: Scalar>(input: &[T], layer: &Dense<T>) -> Vec<T> {
    layer
        .bias
        .iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
            b + row.iter().zip(input).map(|(&w, &x)| w * x).sum::<T>()
        })
        .collect()
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(kernel: Vec<f64>, bias: f64) -> Conv1d<f64> {
        Conv1d {
            kernel: kernel.len(),
            in_channels: 1,
            out_channels: 1,
            weights: kernel,
            bias: vec![bias],
        }
    }

    #[test]
    fn identity_kernel() {
        let y = conv1d_same_forward(&[1.0, 2.0, 3.0], 3, &conv(vec![0.0, 1.0, 0.0], 0.0)).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn even_kernel_pads_right() {
        // k = 2: left pad 0, right pad 1, so y[t] = x[t] + x[t + 1].
        let y = conv1d_same_forward(&[1.0; 4], 4, &conv(vec![1.0, 1.0], 0.0)).unwrap();
        assert_eq!(y, vec![2.0, 2.0, 2.0, 1.0]);
        let y = conv1d_same_forward(&[1.0, 2.0, 3.0, 4.0], 4, &conv(vec![1.0, 0.0], 0.0)).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_input_gives_bias() {
        let y = conv1d_same_forward(&[0.0; 7], 7, &conv(vec![0.3, -2.0, 5.0, 1.0], 1.5)).unwrap();
        assert_eq!(y, vec![1.5; 7]);
    }

    #[test]
    fn channel_mismatch() {
        let layer = Conv1d::<f32>::zeros(3, 2, 4);
        assert_eq!(
            conv1d_same_forward(&[0.0; 10], 10, &layer),
            Err(ShapeError::Channels {
                expected: 2,
                actual: 1
            })
        );
    }

    #[test]
    fn multichannel_matches_direct_sum() {
        let layer = Conv1d {
            kernel: 3,
            in_channels: 2,
            out_channels: 2,
            weights: vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 2.0, 0.0, -2.0],
            bias: vec![0.1, -0.2],
        };
        let x = [1.0f64, 2.0, 3.0, 4.0, -1.0, 0.0, 1.0, 2.0];
        let y = conv1d_same_forward(&x, 4, &layer).unwrap();
        let at = |c: usize, t: isize| {
            if (0..4).contains(&t) {
                x[c * 4 + t as usize]
            } else {
                0.0
            }
        };
        for o in 0..2 {
            for t in 0..4isize {
                let mut want = layer.bias[o];
                for i in 0..2 {
                    for j in 0..3 {
                        want += layer.weights[(o * 2 + i) * 3 + j] * at(i, t + j as isize - 1);
                    }
                }
                assert!((y[o * 4 + t as usize] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pooling() {
        let p = maxpool_forward(&[5.0, 1.0, 2.0, 3.0, 4.0], 1, 5, 5);
        assert_eq!(p.values, vec![5.0]);
        assert_eq!(p.argmax, vec![0]);
        let p = maxpool_forward(&[1.0f32; 4], 1, 4, 5);
        assert!(p.values.is_empty() && p.len == 0);
        // Ties go to the first position; remainder dropped.
        let p = maxpool_forward(&[0.0, 3.0, 3.0, 1.0, 1.0, 9.0, 1.0], 1, 7, 5);
        assert_eq!((p.values, p.argmax), (vec![3.0], vec![1]));

        let mut len = 2700;
        for want in [540, 108, 21] {
            len = maxpool_forward(&vec![0.0f32; len], 1, len, 5).len;
            assert_eq!(len, want);
        }
        assert_eq!(maxpool_backward(&[1, 7], &[2.0, -1.0], 10)[1], 2.0);
    }

    proptest::proptest! {
        #[test]
        fn softmax_sums_to_one(
            logits in proptest::collection::vec(-1e3f32..1e3, 1..12),
            scale in 1e-3f32..1.0,
        ) {
            let z: Vec<f32> = logits.iter().map(|v| v * scale).collect();
            let p = softmax(&z);
            let total: f32 = p.iter().sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-6, "{}", total);
            proptest::prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0f32, -1000.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|v| v.is_finite()));
        let p = softmax(&[0.0f64; 5]);
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }
}
