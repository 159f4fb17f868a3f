use crate::tensor::ParamStore;

/// Adam over every non-frozen parameter of a store.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients stored in `store`.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let i = id.0;
            let p = store.get_mut(id);
            if p.frozen {
                continue;
            }
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (k, (w, &g)) in p.value.data_mut().iter_mut().zip(&p.grad).enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Rescales trainable gradients to a global norm of at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store.grad_norm();
    if norm > max_norm {
        store.scale_grads(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![1.0, -1.0]).unwrap()).unwrap();
        store.get_mut(id).grad = vec![0.5, -2.0];
        let mut adam = Adam::new(&store, 0.1, 0.9, 0.999, 1e-8);
        adam.step(&mut store);
        let w = store.value(id).data();
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert!((w[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn frozen_params_untouched() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![1.0]).unwrap()).unwrap();
        store.get_mut(id).grad = vec![1.0];
        store.set_frozen(id, true);
        let mut adam = Adam::new(&store, 0.1, 0.9, 0.999, 1e-8);
        adam.step(&mut store);
        assert_eq!(store.value(id).data(), &[1.0]);
    }

    #[test]
    fn clipping() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![0.0, 0.0]).unwrap()).unwrap();
        store.get_mut(id).grad = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut store, 1.0), 5.0);
        let g = &store.get(id).grad;
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
    }
}
