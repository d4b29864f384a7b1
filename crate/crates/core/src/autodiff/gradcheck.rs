//! Finite-difference verification of analytic gradients.

use super::tape::{Tape, Var};
use super::tensor::ParamStore;
use crate::error::{Error, Result};

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstEntry {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// One row per parameter with `requires_grad`; frozen parameters are
    /// not listed.
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub worst: Option<WorstEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    pub fn entries(&self) -> usize {
        self.params.iter().map(|p| p.entries).sum()
    }
}

/// Compares the analytic gradient of `f` against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` for every entry of every trainable parameter.
///
/// `f` builds its computation on the supplied tape from the current values
/// in the store and returns the scalar to differentiate.
pub fn check_gradients<F>(
    store: &mut ParamStore,
    mut f: F,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    fn eval<F>(f: &mut F, store: &ParamStore) -> Result<f64>
    where
        F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
    {
        let mut tape = Tape::new();
        let out = f(&mut tape, store)?;
        Ok(tape.value(out).item())
    }

    let first = eval(&mut f, store)?;
    let second = eval(&mut f, store)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::Determinism { first, second });
    }

    let analytic = {
        let mut tape = Tape::new();
        let out = f(&mut tape, store)?;
        let grads = tape.backward(out)?;
        store
            .ids()
            .map(|id| grads.param(id).map(<[f64]>::to_vec))
            .collect::<Vec<_>>()
    };

    let mut report = GradCheckReport {
        params: Vec::new(),
        max_rel_error: 0.0,
        worst: None,
        tolerance: tol,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if !store.get(id).requires_grad {
            continue;
        }
        let n = store.get(id).value.len();
        let name = store.get(id).name.clone();
        let mut worst_here = 0.0f64;
        for i in 0..n {
            let original = store.get(id).value.data()[i];
            store.get_mut(id).value.data_mut()[i] = original + eps;
            let plus = eval(&mut f, store);
            store.get_mut(id).value.data_mut()[i] = original - eps;
            let minus = eval(&mut f, store);
            store.get_mut(id).value.data_mut()[i] = original;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let a = analytic[id.index()].as_ref().map_or(0.0, |g| g[i]);
            let err = relative_error(a, numeric);
            worst_here = worst_here.max(err);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some(WorstEntry {
                    name: name.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                });
            }
        }
        report.params.push(ParamCheck {
            name,
            entries: n,
            max_rel_error: worst_here,
        });
    }
    Ok(report)
}
