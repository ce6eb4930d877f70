//! L2-regularized multinomial logistic regression.
//!
//! Objective over parameters `θ = (W, b)` with `W` of shape `K×D`:
//!
//! ```text
//! f(θ) = Σ_i [ logsumexp(W x_i + b) − (W x_i + b)[y_i] ] + ‖W‖² / (2C)
//! ```
//!
//! Biases are not penalized. `C` follows the liblinear convention (larger `C`
//! means weaker regularization).

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions};
use crate::scalar::Scalar;
use crate::types::{ClassId, ConfidenceVector};

const LBFGS_MEMORY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    /// Inverse regularization strength; the penalty weight is `1/C`.
    pub c: f64,
    /// Relative objective decrease below which training stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            c: 15.0,
            tol: 1e-8,
            max_iters: 500,
        }
    }
}

impl LogRegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("logreg c must be positive, got {}", self.c)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("logreg tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("logreg max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta<F> {
    pub iterations: usize,
    pub objective: F,
    /// Objective value after every accepted optimizer step.
    pub objective_trace: Vec<F>,
    pub converged: bool,
}

/// A trained softmax classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbClassifier<F> {
    weights: Array2<F>,
    biases: Array1<F>,
    meta: TrainMeta<F>,
}

/// Number of parameters for `n_classes` classes over `dim` inputs.
pub fn n_parameters(n_classes: usize, dim: usize) -> usize {
    n_classes * dim + n_classes
}

fn check_labels(y: &[ClassId], n_classes: usize) -> Result<()> {
    if let Some(bad) = y.iter().find(|k| k.get() == 0 || k.get() > n_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside 1..={n_classes}"
        )));
    }
    Ok(())
}

fn all_finite<'a, F: Scalar>(mut it: impl Iterator<Item = &'a F>) -> bool {
    it.all(|v| v.is_finite())
}

/// Objective and gradient at the flat parameter vector `params`
/// (row-major `W` followed by `b`).
pub fn loss_and_gradient<F: Scalar>(
    params: ArrayView1<'_, F>,
    x: ArrayView2<'_, F>,
    y: &[ClassId],
    n_classes: usize,
    c: F,
) -> Result<(F, Array1<F>)> {
    let dim = x.ncols();
    if params.len() != n_parameters(n_classes, dim) {
        return Err(Error::DimensionMismatch {
            expected: n_parameters(n_classes, dim),
            found: params.len(),
        });
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    check_labels(y, n_classes)?;
    if !all_finite(params.iter()) || !all_finite(x.iter()) {
        return Err(Error::NonFinite("logistic regression input"));
    }
    Ok(objective(params, x, y, n_classes, c))
}

fn objective<F: Scalar>(
    params: ArrayView1<'_, F>,
    x: ArrayView2<'_, F>,
    y: &[ClassId],
    n_classes: usize,
    c: F,
) -> (F, Array1<F>) {
    let dim = x.ncols();
    let split = n_classes * dim;
    let w = params
        .slice(s![..split])
        .into_shape_with_order((n_classes, dim))
        .expect("contiguous parameter block");
    let b = params.slice(s![split..]);

    // residual = softmax(logits) - onehot(y)
    let mut residual = x.dot(&w.t());
    residual += &b;
    let mut loss = F::zero();
    for (mut row, label) in residual.axis_iter_mut(Axis(0)).zip(y) {
        let max = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        let target = row[label.index()];
        row.mapv_inplace(|v| (v - max).exp());
        let total: F = row.sum();
        loss += max + total.ln() - target;
        row /= total;
        row[label.index()] -= F::one();
    }

    let inv_c = F::one() / c;
    let penalty = w.iter().map(|&v| v * v).sum::<F>() * F::lit(0.5) * inv_c;

    let mut grad = Array1::zeros(params.len());
    {
        let mut gw = grad
            .slice_mut(s![..split])
            .into_shape_with_order((n_classes, dim))
            .expect("contiguous gradient block");
        gw.assign(&residual.t().dot(&x));
        gw.scaled_add(inv_c, &w);
    }
    grad.slice_mut(s![split..]).assign(&residual.sum_axis(Axis(0)));
    (loss + penalty, grad)
}

/// Fits a classifier over `n_classes` classes, starting from zero parameters.
pub fn train<F: Scalar>(
    x: ArrayView2<'_, F>,
    y: &[ClassId],
    n_classes: usize,
    config: &LogRegConfig,
) -> Result<ProbClassifier<F>> {
    config.validate()?;
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    check_labels(y, n_classes)?;
    let mut distinct: Vec<ClassId> = y.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::SingleClass(distinct.len()));
    }
    if !all_finite(x.iter()) {
        return Err(Error::NonFinite("training features"));
    }

    let dim = x.ncols();
    let c = F::lit(config.c);
    let opts = LbfgsOptions {
        memory: LBFGS_MEMORY,
        max_iters: config.max_iters,
        rel_tol: F::lit(config.tol),
    };
    let min = lbfgs::minimize(
        |p| objective(p, x, y, n_classes, c),
        Array1::zeros(n_parameters(n_classes, dim)),
        opts,
    );

    let split = n_classes * dim;
    let weights = min
        .x
        .slice(s![..split])
        .to_owned()
        .into_shape_with_order((n_classes, dim))
        .expect("parameter block");
    let biases = min.x.slice(s![split..]).to_owned();
    Ok(ProbClassifier {
        weights,
        biases,
        meta: TrainMeta {
            iterations: min.iterations,
            objective: min.value,
            objective_trace: min.trace,
            converged: min.converged,
        },
    })
}

fn softmax_rows<F: Scalar>(mut logits: Array2<F>) -> Array2<F> {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total: F = row.sum();
        row /= total;
    }
    logits
}

impl<F: Scalar> ProbClassifier<F> {
    /// Builds a classifier from explicit parameters (no training metadata).
    pub fn from_parameters(weights: Array2<F>, biases: Array1<F>) -> Result<Self> {
        if biases.len() != weights.nrows() {
            return Err(Error::DimensionMismatch {
                expected: weights.nrows(),
                found: biases.len(),
            });
        }
        Ok(ProbClassifier {
            weights,
            biases,
            meta: TrainMeta {
                iterations: 0,
                objective: F::nan(),
                objective_trace: Vec::new(),
                converged: false,
            },
        })
    }

    pub fn n_classes(&self) -> usize {
        self.biases.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<F> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<F> {
        &self.biases
    }

    pub fn train_meta(&self) -> &TrainMeta<F> {
        &self.meta
    }

    pub fn predict_proba(&self, x: ArrayView1<'_, F>) -> Result<ConfidenceVector<F>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let logits = (self.weights.dot(&x) + &self.biases).insert_axis(Axis(0));
        let p = softmax_rows(logits);
        Ok(ConfidenceVector::from_probabilities(p.index_axis_move(Axis(0), 0)))
    }

    /// Row-wise class probabilities for an `N×D` matrix.
    pub fn predict_proba_batch(&self, x: ArrayView2<'_, F>) -> Result<Array2<F>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let mut logits = x.dot(&self.weights.t());
        logits += &self.biases;
        Ok(softmax_rows(logits))
    }

    /// Writes row-wise probabilities into `out` (shape `N×K`).
    pub(crate) fn predict_proba_into(&self, x: ArrayView2<'_, F>, mut out: ndarray::ArrayViewMut2<'_, F>) {
        let p = softmax_rows(x.dot(&self.weights.t()) + &self.biases);
        Zip::from(&mut out).and(&p).for_each(|o, &v| *o = v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(v: &[usize]) -> Vec<ClassId> {
        v.iter().map(|&k| ClassId::new(k)).collect()
    }

    #[test]
    fn zero_parameters_give_n_ln2() {
        let x = array![[1.0, 2.0], [-1.0, 0.5], [3.0, -2.0], [0.0, 0.0]];
        let y = labels(&[1, 2, 1, 2]);
        let p = Array1::zeros(n_parameters(2, 2));
        let (f, _) = loss_and_gradient(p.view(), x.view(), &y, 2, 15.0).unwrap();
        assert_relative_eq!(f, 4.0 * 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn penalty_scales_with_inverse_c() {
        let x = Array2::<f64>::zeros((0, 3));
        let p = Array1::from_shape_fn(n_parameters(2, 3), |i| 0.3 * i as f64 - 0.7);
        let zero = Array1::zeros(p.len());
        let diff = |c: f64| {
            let (a, _) = loss_and_gradient(p.view(), x.view(), &[], 2, c).unwrap();
            let (b, _) = loss_and_gradient(zero.view(), x.view(), &[], 2, c).unwrap();
            a - b
        };
        assert_relative_eq!(diff(2.0), diff(1.0) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (n, d, k) = (rng.random_range(1..12), rng.random_range(1..6), rng.random_range(2..5));
            let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0_f64..2.0));
            let y: Vec<ClassId> = (0..n).map(|_| ClassId::new(rng.random_range(1..=k))).collect();
            let p = Array1::from_shape_fn(n_parameters(k, d), |_| rng.random_range(-1.0..1.0));
            let c = rng.random_range(0.5..20.0);
            let (_, g) = loss_and_gradient(p.view(), x.view(), &y, k, c).unwrap();
            let h = 1e-6;
            let mut fd = Array1::<f64>::zeros(p.len());
            for j in 0..p.len() {
                let mut hi = p.clone();
                hi[j] += h;
                let mut lo = p.clone();
                lo[j] -= h;
                let (fh, _) = loss_and_gradient(hi.view(), x.view(), &y, k, c).unwrap();
                let (fl, _) = loss_and_gradient(lo.view(), x.view(), &y, k, c).unwrap();
                fd[j] = (fh - fl) / (2.0 * h);
            }
            let err = (&g - &fd).mapv(|v| v * v).sum().sqrt();
            let scale = g.mapv(|v| v * v).sum().sqrt().max(fd.mapv(|v| v * v).sum().sqrt()).max(1e-12);
            assert!(err / scale < 1e-5, "relative error {}", err / scale);
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        let x = array![[f64::NAN, 1.0]];
        let p = Array1::zeros(n_parameters(2, 2));
        assert!(matches!(
            loss_and_gradient(p.view(), x.view(), &labels(&[1]), 2, 1.0),
            Err(Error::NonFinite(_))
        ));
        let x = array![[0.0, 1.0]];
        assert!(matches!(
            loss_and_gradient(p.slice(s![1..]), x.view(), &labels(&[1]), 2, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_class_is_rejected() {
        let x = array![[0.0], [1.0]];
        let err = train(x.view(), &labels(&[2, 2]), 3, &LogRegConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SingleClass(1)));
    }

    #[test]
    fn zero_model_is_uniform() {
        let clf = ProbClassifier::from_parameters(Array2::<f64>::zeros((4, 3)), Array1::zeros(4)).unwrap();
        let p = clf.predict_proba(array![1.0, -5.0, 2.0].view()).unwrap();
        for &v in p.scores() {
            assert_relative_eq!(v, 0.25);
        }
    }

    #[test]
    fn closed_form_softmax_and_shift_invariance() {
        let w = Array2::<f64>::zeros((3, 1));
        let b = array![1f64.ln(), 2f64.ln(), 3f64.ln()];
        let clf = ProbClassifier::from_parameters(w.clone(), b.clone()).unwrap();
        let p = clf.predict_proba(array![0.7].view()).unwrap();
        for (got, want) in p.scores().iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
        let shifted = ProbClassifier::from_parameters(w, b + 42.0).unwrap();
        let q = shifted.predict_proba(array![0.7].view()).unwrap();
        for (a, b) in p.scores().iter().zip(q.scores()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let clf = ProbClassifier::from_parameters(Array2::<f64>::zeros((2, 3)), Array1::zeros(2)).unwrap();
        assert!(clf.predict_proba(array![1.0].view()).is_err());
        assert!(clf.predict_proba_batch(Array2::zeros((2, 2)).view()).is_err());
    }

    fn blobs(seed: u64) -> (Array2<f64>, Vec<ClassId>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((100, 2));
        let mut y = Vec::new();
        for i in 0..100 {
            let (cx, k) = if i < 50 { (-4.0, 1) } else { (4.0, 2) };
            x[[i, 0]] = cx + rng.random_range(-1.0..1.0);
            x[[i, 1]] = rng.random_range(-1.0..1.0);
            y.push(ClassId::new(k));
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_are_fit_perfectly() {
        let (x, y) = blobs(3);
        let clf = train(x.view(), &y, 2, &LogRegConfig::default()).unwrap();
        let p = clf.predict_proba_batch(x.view()).unwrap();
        for (row, k) in p.axis_iter(Axis(0)).zip(&y) {
            let pred = crate::types::argmax_row(row).0;
            assert_eq!(pred, *k);
        }
        let trace = &clf.train_meta().objective_trace;
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(clf.train_meta().converged);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = blobs(5);
        let a = train(x.view(), &y, 2, &LogRegConfig::default()).unwrap();
        let b = train(x.view(), &y, 2, &LogRegConfig::default()).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.biases(), b.biases());
    }

    #[test]
    fn relabeling_permutes_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((30, 3), |_| rng.random_range(-1.0_f64..1.0));
        let y: Vec<ClassId> = (0..30).map(|i| ClassId::new(i % 3 + 1)).collect();
        let perm = [3usize, 1, 2]; // class k -> perm[k-1]
        let y_perm: Vec<ClassId> = y.iter().map(|k| ClassId::new(perm[k.index()])).collect();
        let a = train(x.view(), &y, 3, &LogRegConfig::default()).unwrap();
        let b = train(x.view(), &y_perm, 3, &LogRegConfig::default()).unwrap();
        let pa = a.predict_proba_batch(x.view()).unwrap();
        let pb = b.predict_proba_batch(x.view()).unwrap();
        for i in 0..30 {
            for k in 0..3 {
                assert!((pa[[i, k]] - pb[[i, perm[k] - 1]]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn trains_in_single_precision() {
        let (x, y) = blobs(9);
        let x32 = x.mapv(|v| v as f32);
        let clf = train(x32.view(), &y, 2, &LogRegConfig::default()).unwrap();
        let p = clf.predict_proba(x32.row(0)).unwrap();
        assert!((p.scores().sum() - 1.0).abs() < 1e-5);
        assert_eq!(p.pseudo_label().0, ClassId::new(1));
    }
}
