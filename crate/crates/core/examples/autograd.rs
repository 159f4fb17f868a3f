//! Builds a small computation on the tape, backpropagates through it, and
//! checks the gradients against central finite differences.
//!
//! `cargo run --example autograd`

use wstg::tensor::gradcheck::{check, Tolerance};
use wstg::{Graph, Result, Tensor};

pub fn run_example() -> Result<f64> {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 0.0, 1.5, -0.5])?);
    let w = g.leaf(Tensor::matrix(3, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6])?);
    let h = g.matmul(x, w)?;
    let h = g.tanh(h);
    let p = g.softmax(h, 1)?;
    let top = g.max_axis(p, 1)?;
    let loss = g.sum(top);
    g.backward(loss)?;
    println!("loss = {:.6}", g.value(loss).item()?);
    println!("dloss/dw = {:?}", g.grad(w).expect("w is a leaf").data());

    let report = check(
        &[g.value(x).clone(), g.value(w).clone()],
        Tolerance::default(),
        |g, v| {
            let h = g.matmul(v[0], v[1])?;
            let h = g.tanh(h);
            let p = g.softmax(h, 1)?;
            let top = g.max_axis(p, 1)?;
            Ok(g.sum(top))
        },
    )?;
    println!(
        "finite differences: {} entries, max relative error {:.2e}, {}",
        report.checked,
        report.max_rel_err,
        if report.passed() { "ok" } else { "FAILED" }
    );
    Ok(report.max_rel_err)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
