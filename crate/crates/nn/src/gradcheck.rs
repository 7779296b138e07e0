//! Central-difference gradient checking for any scalar loss built on a tape.

use std::rc::Rc;

use crate::autograd::{Tape, Var};
use crate::error::{NnError, Result};
use crate::params::{BoundParams, LayerParams};

/// Compares analytic gradients against central differences for every entry
/// of every parameter. Returns the max relative error
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// `f` must be a deterministic forward pass (dropout disabled) returning a
/// scalar. It is re-run 2x per parameter entry.
pub fn gradcheck<F>(params: &LayerParams, eps: f64, f: F) -> Result<f64>
where
    F: Fn(&Rc<Tape>, &BoundParams) -> Result<Var>,
{
    let eval = |p: &LayerParams| -> Result<f64> {
        let tape = Tape::new();
        let bound = p.bind(&tape);
        let loss = f(&tape, &bound)?;
        let v = loss.value();
        if !v.is_scalar() {
            return Err(NnError::Shape {
                op: "gradcheck loss",
                lhs: format!("{:?}", v.shape()),
                rhs: "[1, 1]".into(),
            });
        }
        if !v.item().is_finite() {
            return Err(NnError::NonFinite("gradcheck loss".into()));
        }
        Ok(v.item())
    };

    // Analytic pass.
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let loss = f(&tape, &bound)?;
    if !loss.value().item().is_finite() {
        return Err(NnError::NonFinite("gradcheck loss".into()));
    }
    let grads = loss.backward();

    let mut work = params.clone();
    let names: Vec<String> = params.names().cloned().collect();
    let mut max_err: f64 = 0.0;
    for name in &names {
        let analytic = grads
            .get(bound.var(name))
            .cloned()
            .unwrap_or_else(|| {
                let p = params.get(name).unwrap();
                crate::tensor::Tensor::zeros(p.value.rows(), p.value.cols())
            });
        let n = analytic.len();
        for k in 0..n {
            let orig = work.get(name)?.value.data()[k];
            work.get_mut(name)?.value.data_mut()[k] = orig + eps;
            let fp = eval(&work)?;
            work.get_mut(name)?.value.data_mut()[k] = orig - eps;
            let fm = eval(&work)?;
            work.get_mut(name)?.value.data_mut()[k] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic.data()[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if err > max_err {
                max_err = err;
            }
        }
    }
    Ok(max_err)
}
