use crate::Scalar;

/// Adam moments for every parameter tensor of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Zero moments shaped like `params`, with beta1 0.9, beta2 0.999 and
    /// epsilon 1e-8.
    pub fn new(params: &[&[T]], learning_rate: f64) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update of every parameter tensor.
pub fn adam_step<T: Scalar>(params: &mut [&mut [T]], grads: &[Vec<T>], state: &mut AdamState<T>) {
    assert_eq!(params.len(), grads.len(), "one gradient per parameter tensor");
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(state.beta1), T::of(state.beta2));
    let (one_b1, one_b2) = (T::of(1.0 - state.beta1), T::of(1.0 - state.beta2));
    let c1 = T::of(1.0 / (1.0 - state.beta1.powi(t)));
    let c2 = T::of(1.0 / (1.0 - state.beta2.powi(t)));
    let lr = T::of(state.learning_rate);
    let eps = T::of(state.epsilon);

    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        assert_eq!(p.len(), g.len(), "gradient shape");
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            let m_hat = *m * c1;
            let v_hat = *v * c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(p0: f64, grads: &[f64], lr: f64) -> (f64, AdamState<f64>) {
        let mut p = vec![p0];
        let mut state = AdamState::new(&[&p[..]], lr);
        for &g in grads {
            adam_step(&mut [&mut p[..]], &[vec![g]], &mut state);
        }
        (p[0], state)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (p, s) = run(0.7, &[0.0], 1e-4);
        assert_eq!(p, 0.7);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        let (p, _) = run(0.0, &[1.0], 1e-4);
        assert!((p + 1e-4 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn constant_gradient_steps_by_lr_sign() {
        // With a constant gradient the bias-corrected moments equal g and g^2
        // at every step, so each step is lr * g / (|g| + eps).
        let g = -0.37;
        let mut p = vec![0.0f64];
        let mut state = AdamState::new(&[&p[..]], 1e-3);
        let mut prev = 0.0;
        for _ in 0..50 {
            adam_step(&mut [&mut p[..]], &[vec![g]], &mut state);
            let step = p[0] - prev;
            prev = p[0];
            assert!((step - 1e-3).abs() < 1e-10, "{step}");
        }
        assert_eq!(state.m[0].len(), 1);
    }
}
