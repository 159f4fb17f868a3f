//! Parameterized layers shared by the encoders and the grounding heads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Deterministic parameter initializer.
///
/// Weight matrices are drawn from `uniform(-1/√H, 1/√H)` with `H` the model's
/// hidden size; biases start at zero.
pub struct Init {
    rng: ChaCha8Rng,
    bound: f64,
}

impl Init {
    pub fn new(seed: u64, hidden: usize) -> Self {
        Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bound: 1.0 / (hidden as f64).sqrt(),
        }
    }

    pub fn uniform(&mut self, shape: &[usize], bound: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.rng.random_range(-bound..=bound)).collect();
        Tensor::new(shape.to_vec(), data).expect("positive shape")
    }

    pub fn weight(&mut self, shape: &[usize]) -> Tensor {
        self.uniform(shape, self.bound)
    }
}

/// Fully connected layer `y = x·Wᵀ + b` with `W: out × in`.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, init: &mut Init, name: &str, input: usize, output: usize) -> Result<Self> {
        let weight = store.add(format!("{name}.weight"), init.weight(&[output, input]))?;
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[output]))?;
        Ok(Linear {
            weight,
            bias,
            input,
            output,
        })
    }

    /// Rebinds a layer to parameters already present in `store`.
    pub fn bind(store: &ParamStore, name: &str) -> Result<Self> {
        let weight = lookup(store, &format!("{name}.weight"))?;
        let bias = lookup(store, &format!("{name}.bias"))?;
        let (output, input) = match store.value(weight).shape() {
            [o, i] => (*o, *i),
            s => return Err(Error::Checkpoint(format!("{name}.weight has shape {s:?}"))),
        };
        if store.value(bias).shape() != [output] {
            return Err(Error::Checkpoint(format!("{name}.bias does not match {output} outputs")));
        }
        Ok(Linear {
            weight,
            bias,
            input,
            output,
        })
    }

    /// Applies the layer to the rows of `x` (`n × in` → `n × out`).
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.linear(x, w, Some(b))
    }
}

pub(crate) fn lookup(store: &ParamStore, name: &str) -> Result<ParamId> {
    store
        .id(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
}
