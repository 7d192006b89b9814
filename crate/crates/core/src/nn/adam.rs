use super::{NnError, ParamStore, Scalar, Tensor};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to every trainable parameter, then zeroes all
    /// gradients. Refuses to touch anything if a gradient is not finite.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<(), NnError> {
        if let Some((_, bad)) = store.iter().find(|(_, p)| p.trainable && !p.grad.all_finite()) {
            return Err(NnError::NonFiniteGradient(bad.name.clone()));
        }
        if self.first.len() != store.len() {
            self.first = store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let correction1 = T::one() - T::of(self.beta1.powi(t));
        let correction2 = T::one() - T::of(self.beta2.powi(t));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        for ((param, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            if !param.trainable {
                continue;
            }
            let g = param.grad.data();
            let (m, v) = (m.data_mut(), v.data_mut());
            for (i, w) in param.value.data_mut().iter_mut().enumerate() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        store.zero_grads();
        Ok(())
    }
}
