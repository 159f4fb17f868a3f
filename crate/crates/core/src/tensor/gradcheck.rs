//! Central finite-difference checks for tape gradients.

use crate::error::Result;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub step: f64,
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            step: 1e-5,
            rel: 1e-4,
            abs: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Entries compared across all inputs.
    pub checked: usize,
    /// Worst `|analytic - numeric| / max(|analytic|, |numeric|)` among entries
    /// that exceed the absolute floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn record(&mut self, analytic: f64, numeric: f64, tol: Tolerance) {
        let abs_err = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        self.checked += 1;
        self.max_abs_err = self.max_abs_err.max(abs_err);
        if abs_err > tol.abs {
            self.max_rel_err = self.max_rel_err.max(abs_err / scale);
            if abs_err > tol.rel * scale {
                self.failures += 1;
            }
        }
    }

    /// Folds another report into this one.
    pub fn merge(&mut self, other: &GradCheckReport) {
        self.checked += other.checked;
        self.failures += other.failures;
        self.max_abs_err = self.max_abs_err.max(other.max_abs_err);
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
    }
}

/// Compares the tape gradient of the scalar built by `f` against central
/// differences, perturbing every entry of every input.
///
/// `f` receives the graph and one leaf per input and must return a scalar.
/// An entry passes when the error is within `abs` or within `rel` of the
/// larger magnitude.
pub fn check<F>(inputs: &[Tensor], tol: Tolerance, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let loss = f(&mut g, &leaves)?;
    g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map(Tensor::into_data).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        g.value(out).item()
    };

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        failures: 0,
    };
    let mut work = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let orig = input.data()[j];
            work[k].data_mut()[j] = orig + tol.step;
            let up = eval(&work)?;
            work[k].data_mut()[j] = orig - tol.step;
            let down = eval(&work)?;
            work[k].data_mut()[j] = orig;

            let numeric = (up - down) / (2.0 * tol.step);
            report.record(analytic[k][j], numeric, tol);
        }
    }
    Ok(report)
}

/// Finite-difference check of parameter gradients for a loss built from a
/// [`ParamStore`]. Only the listed `(parameter, flat index)` coordinates are
/// perturbed; pass every coordinate for an exhaustive check.
pub fn check_params<F>(store: &mut ParamStore, coords: &[(ParamId, usize)], tol: Tolerance, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut g = Graph::new();
    let loss = f(&mut g, store)?;
    g.backward(loss)?;
    g.accumulate_param_grads(store);
    let analytic: Vec<f64> = coords.iter().map(|&(id, j)| store.get(id).grad[j]).collect();
    store.zero_grad();

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let out = f(&mut g, store)?;
        g.value(out).item()
    };

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        failures: 0,
    };
    for (&(id, j), &a) in coords.iter().zip(&analytic) {
        let orig = store.value(id).data()[j];
        store.value_mut(id).data_mut()[j] = orig + tol.step;
        let up = eval(store)?;
        store.value_mut(id).data_mut()[j] = orig - tol.step;
        let down = eval(store)?;
        store.value_mut(id).data_mut()[j] = orig;
        let numeric = (up - down) / (2.0 * tol.step);
        report.record(a, numeric, tol);
    }
    Ok(report)
}

/// Every coordinate of every trainable parameter.
pub fn all_coords(store: &ParamStore) -> Vec<(ParamId, usize)> {
    store
        .iter()
        .filter(|(_, p)| !p.frozen)
        .flat_map(|(id, p)| (0..p.value.len()).map(move |j| (id, j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input() -> Tensor {
        Tensor::matrix(2, 2, vec![0.3, -1.2, 0.8, 2.0]).unwrap()
    }

    #[test]
    fn correct_gradient_passes() {
        let r = check(&[input()], Tolerance::default(), |g, v| {
            let sq = g.mul(v[0], v[0])?;
            Ok(g.sum(sq))
        })
        .unwrap();
        assert!(r.passed());
        assert_eq!(r.checked, 4);
        assert!(r.max_abs_err < 1e-8);
    }

    #[test]
    fn detached_factor_is_caught() {
        // x * stop_grad(x): the tape sees d/dx = x, the truth is 2x
        let r = check(&[input()], Tolerance::default(), |g, v| {
            let copy = g.constant(g.value(v[0]).clone());
            let sq = g.mul(v[0], copy)?;
            Ok(g.sum(sq))
        })
        .unwrap();
        assert_eq!(r.failures, 4);
        assert!((r.max_rel_err - 0.5).abs() < 1e-6);
    }
}
