//! Limited-memory BFGS with Armijo backtracking.
//!
//! Fully deterministic: no randomness, fixed iteration order. Every accepted
//! step strictly decreases the objective.

use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1, Zip};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions<F> {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once `(f_prev - f) / max(|f_prev|, |f|, 1)` falls below this.
    pub rel_tol: F,
}

#[derive(Debug, Clone)]
pub struct Minimum<F> {
    pub x: Array1<F>,
    pub value: F,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<F>,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot<F: Scalar>(a: &Array1<F>, b: &Array1<F>) -> F {
    a.dot(b)
}

/// Minimizes `objective`, which returns the value and gradient at a point.
pub fn minimize<F, Fun>(mut objective: Fun, x0: Array1<F>, opts: LbfgsOptions<F>) -> Minimum<F>
where
    F: Scalar,
    Fun: FnMut(ArrayView1<'_, F>) -> (F, Array1<F>),
{
    let mut x = x0;
    let (mut fx, mut g) = objective(x.view());
    let mut trace = vec![fx];
    let mut history: VecDeque<(Array1<F>, Array1<F>, F)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut converged = false;
    let c1 = F::lit(ARMIJO_C1);
    let half = F::lit(0.5);

    while iterations < opts.max_iters {
        let gnorm = g.iter().fold(F::zero(), |m, v| m.max(v.abs()));
        if gnorm <= F::epsilon() * F::one().max(fx.abs()) {
            converged = true;
            break;
        }

        let mut dir = two_loop(&g, &history);
        let mut slope = dot(&g, &dir);
        if slope.is_nan() || slope >= F::zero() {
            history.clear();
            dir = g.mapv(|v| -v);
            slope = dot(&g, &dir);
        }
        let mut step = if history.is_empty() {
            F::one() / dot(&g, &g).sqrt().max(F::one())
        } else {
            F::one()
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut xn = x.clone();
            Zip::from(&mut xn).and(&dir).for_each(|xi, &di| *xi += step * di);
            let (fxn, gn) = objective(xn.view());
            if fxn.is_finite() && fxn <= fx + c1 * step * slope && fxn < fx {
                accepted = Some((xn, fxn, gn));
                break;
            }
            step *= half;
        }
        let Some((xn, fxn, gn)) = accepted else {
            // No decrease representable at working precision.
            converged = true;
            break;
        };

        let s = &xn - &x;
        let y = &gn - &g;
        let sy = dot(&s, &y);
        if sy > F::epsilon() * dot(&y, &y) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, F::one() / sy));
        }

        let rel = (fx - fxn) / fx.abs().max(fxn.abs()).max(F::one());
        x = xn;
        fx = fxn;
        g = gn;
        trace.push(fx);
        iterations += 1;
        if rel < opts.rel_tol {
            converged = true;
            break;
        }
    }

    Minimum {
        x,
        value: fx,
        iterations,
        trace,
        converged,
    }
}

/// Approximate inverse-Hessian product `-H g`.
fn two_loop<F: Scalar>(g: &Array1<F>, history: &VecDeque<(Array1<F>, Array1<F>, F)>) -> Array1<F> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        q.scaled_add(-a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q *= gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        q.scaled_add(a - b, s);
    }
    q.mapv_inplace(|v| -v);
    q
}
