//! Central finite-difference gradient checks.

use super::{Bound, ParamStore, Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
    pub max_error: f64,
    /// (parameter, flat index) of the largest error.
    pub worst: (String, usize),
    pub checked: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_error <= tol
    }
}

/// Compares the tape gradient of `loss` with central differences of step `h`
/// for every trainable scalar in `store`.
pub fn gradcheck<F>(store: &mut ParamStore, h: f64, loss: F) -> GradCheck
where
    F: for<'t> Fn(&'t Tape, &Bound<'t>) -> Tensor<'t>,
{
    let eval = |store: &ParamStore| {
        let tape = Tape::new();
        let b = store.bind(&tape);
        loss(&tape, &b).item()
    };
    let analytic = {
        let tape = Tape::new();
        let b = store.bind(&tape);
        let l = loss(&tape, &b);
        tape.backward(l).expect("scalar loss");
        b.grads()
    };
    let mut report = GradCheck {
        max_error: 0.0,
        worst: (String::new(), 0),
        checked: 0,
    };
    for pi in 0..store.len() {
        if !store.get(super::ParamId(pi)).trainable {
            continue;
        }
        let n = store.get(super::ParamId(pi)).value.len();
        for k in 0..n {
            let orig = store.get(super::ParamId(pi)).value.as_slice().expect("standard layout")[k];
            let set = |store: &mut ParamStore, v: f64| {
                store.value_mut(super::ParamId(pi)).as_slice_mut().expect("standard layout")[k] = v;
            };
            set(store, orig + h);
            let up = eval(store);
            set(store, orig - h);
            let down = eval(store);
            set(store, orig);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi].as_slice().expect("standard layout")[k];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.checked += 1;
            if err > report.max_error {
                report.max_error = err;
                report.worst = (store.get(super::ParamId(pi)).name.clone(), k);
            }
        }
    }
    report
}
