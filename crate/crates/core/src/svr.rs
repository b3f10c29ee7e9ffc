//! Epsilon-support vector regression with an RBF kernel.
//!
//! The dual is solved with a second-order working-set SMO over the doubled
//! variable set `(α, α*)`, in the formulation used by LIBSVM.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_SCHEMA: &str = "dqi-svr-model";
pub const MODEL_VERSION: u32 = 1;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// RBF width; `None` means `1 / feature_dim`.
    pub gamma: Option<f64>,
    /// KKT violation tolerance of the solver.
    pub tolerance: f64,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 100.0,
            epsilon: 0.1,
            gamma: None,
            tolerance: 1e-3,
        }
    }
}

impl SvrParams {
    pub fn gamma_for(&self, dim: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / dim as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Per-feature z-score statistics taken from the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features whose training variance was zero (stored with `std = 1`).
    pub constant: Vec<bool>,
}

impl Normalization {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = Vec::with_capacity(dim);
        let mut constant = Vec::with_capacity(dim);
        for s in var {
            let sd = (s / n).sqrt();
            if sd > 1e-12 * (1.0 + sd) && sd.is_finite() {
                std.push(sd);
                constant.push(false);
            } else {
                std.push(1.0);
                constant.push(true);
            }
        }
        Self { mean, std, constant }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub schema: String,
    pub version: u32,
    pub feature_dim: usize,
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
    pub normalization: Normalization,
    /// Normalized support vectors, one per row.
    pub support_vectors: Vec<Vec<f64>>,
    /// `α − α*` for each support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
}

fn check_training_data(features: &[Vec<f64>], labels: &[f64]) -> Result<usize> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch(features.len(), labels.len()));
    }
    if features.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "SVR training needs at least 2 rows, got {}",
            features.len()
        )));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(Error::InvalidArgument("feature rows are empty".into()));
    }
    if let Some(row) = features.iter().find(|r| r.len() != dim) {
        return Err(Error::FeatureDim {
            expected: dim,
            got: row.len(),
        });
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    if labels.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training labels"));
    }
    Ok(dim)
}

struct Solver<'a> {
    kernel: &'a [f64],
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl Solver<'_> {
    #[inline]
    fn sign(&self, t: usize) -> f64 {
        if t < self.n {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    fn k(&self, s: usize, t: usize) -> f64 {
        self.kernel[(s % self.n) * self.n + t % self.n]
    }

    #[inline]
    fn q(&self, s: usize, t: usize) -> f64 {
        self.sign(s) * self.sign(t) * self.k(s, t)
    }

    fn select_working_set(&self, tol: f64) -> Option<(usize, usize)> {
        let l = 2 * self.n;
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..l {
            let (y, a, g) = (self.sign(t), self.alpha[t], self.grad[t]);
            if y > 0.0 {
                if a < self.c && -g >= gmax {
                    gmax = -g;
                    i_sel = Some(t);
                }
            } else if a > 0.0 && g >= gmax {
                gmax = g;
                i_sel = Some(t);
            }
        }
        let i = i_sel?;
        let kii = self.k(i, i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..l {
            let (y, a, g) = (self.sign(t), self.alpha[t], self.grad[t]);
            let (eligible, grad_diff, viol) = if y > 0.0 {
                (a > 0.0, gmax + g, g)
            } else {
                (a < self.c, gmax - g, -g)
            };
            if !eligible {
                continue;
            }
            gmax2 = gmax2.max(viol);
            if grad_diff > 0.0 {
                let mut quad = kii + self.k(t, t) - 2.0 * self.k(i, t);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -grad_diff * grad_diff / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < tol {
            return None;
        }
        j_sel.map(|j| (i, j))
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (gi, gj) = (self.grad[i], self.grad[j]);
        let qij = self.q(i, j);
        let base = self.k(i, i) + self.k(j, j);
        let (mut ai, mut aj) = (old_i, old_j);
        if self.sign(i) != self.sign(j) {
            let quad = (base + 2.0 * qij).max(TAU);
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (base - 2.0 * qij).max(TAU);
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..2 * self.n {
            self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    fn rho(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut sum_free = 0.0;
        let mut n_free = 0usize;
        for t in 0..2 * self.n {
            let y = self.sign(t);
            let yg = y * self.grad[t];
            let a = self.alpha[t];
            if a >= self.c {
                if y < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if a <= 0.0 {
                if y > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

/// Trains an epsilon-SVR on z-score-normalized features.
pub fn svr_train(features: &[Vec<f64>], labels: &[f64], params: &SvrParams) -> Result<SvrModel> {
    let dim = check_training_data(features, labels)?;
    if !(params.c > 0.0) || !(params.epsilon >= 0.0) || !(params.tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid SVR parameters {params:?}")));
    }
    let gamma = params.gamma_for(dim);
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid RBF gamma {gamma}")));
    }
    let kernel = Kernel::Rbf { gamma };
    let normalization = Normalization::fit(features);
    let rows: Vec<Vec<f64>> = features.iter().map(|r| normalization.apply(r)).collect();
    let n = rows.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&rows[i], &rows[j]);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    let grad = (0..2 * n)
        .map(|t| {
            if t < n {
                params.epsilon - labels[t]
            } else {
                params.epsilon + labels[t - n]
            }
        })
        .collect();
    let mut solver = Solver {
        kernel: &gram,
        n,
        c: params.c,
        alpha: vec![0.0; 2 * n],
        grad,
    };
    let max_iter = 10_000_000usize.max(100 * 2 * n);
    for _ in 0..max_iter {
        match solver.select_working_set(params.tolerance) {
            Some((i, j)) => solver.update(i, j),
            None => break,
        }
    }
    let bias = -solver.rho();
    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let coef = solver.alpha[i] - solver.alpha[i + n];
        if coef != 0.0 {
            support_vectors.push(row);
            dual_coefficients.push(coef);
        }
    }
    Ok(SvrModel {
        schema: MODEL_SCHEMA.to_string(),
        version: MODEL_VERSION,
        feature_dim: dim,
        kernel,
        c: params.c,
        epsilon: params.epsilon,
        normalization,
        support_vectors,
        dual_coefficients,
        bias,
    })
}

pub fn svr_predict(model: &SvrModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.feature_dim {
        return Err(Error::FeatureDim {
            expected: model.feature_dim,
            got: features.len(),
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prediction features"));
    }
    let x = model.normalization.apply(features);
    let sum: f64 = model
        .support_vectors
        .iter()
        .zip(&model.dual_coefficients)
        .map(|(sv, coef)| coef * model.kernel.eval(sv, &x))
        .sum();
    Ok(sum + model.bias)
}

impl SvrModel {
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        svr_predict(self, features)
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Schema(msg));
        if self.schema != MODEL_SCHEMA {
            return bad(format!("unexpected schema '{}'", self.schema));
        }
        if self.version != MODEL_VERSION {
            return bad(format!("unsupported version {} (expected {MODEL_VERSION})", self.version));
        }
        let d = self.feature_dim;
        if d == 0 {
            return bad("feature_dim is zero".into());
        }
        let norm = &self.normalization;
        if norm.mean.len() != d || norm.std.len() != d || norm.constant.len() != d {
            return bad("normalization length does not match feature_dim".into());
        }
        if norm.std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || norm.mean.iter().any(|m| !m.is_finite()) {
            return bad("normalization statistics must be finite with positive std".into());
        }
        if self.support_vectors.len() != self.dual_coefficients.len() {
            return bad("support vector and coefficient counts differ".into());
        }
        if self.support_vectors.iter().any(|sv| sv.len() != d || sv.iter().any(|v| !v.is_finite())) {
            return bad("support vector width does not match feature_dim".into());
        }
        let limit = self.c * (1.0 + 1e-12);
        if self.dual_coefficients.iter().any(|a| !a.is_finite() || a.abs() > limit) {
            return bad("dual coefficient outside [-C, C]".into());
        }
        if !self.bias.is_finite() {
            return bad("bias is not finite".into());
        }
        let Kernel::Rbf { gamma } = self.kernel;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return bad("kernel gamma must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SvrModel = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

pub fn save_model(model: &SvrModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_json() + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvrModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SvrModel::from_json(&text)
}

pub const GRID_C: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

pub fn grid_gammas(dim: usize) -> [f64; 4] {
    [0.01, 1.0 / dim as f64, 0.1, 1.0]
}

/// Picks `(C, gamma)` from the fixed grid by 5-fold cross-validated mean
/// squared error. Fold `k` holds rows with `index % 5 == k`; ties keep the
/// first grid point.
pub fn grid_search(features: &[Vec<f64>], labels: &[f64], base: &SvrParams) -> Result<SvrParams> {
    let dim = check_training_data(features, labels)?;
    const FOLDS: usize = 5;
    if features.len() < FOLDS {
        return Err(Error::InsufficientData(format!(
            "grid search needs at least {FOLDS} rows, got {}",
            features.len()
        )));
    }
    let mut best: Option<(f64, SvrParams)> = None;
    for &c in &GRID_C {
        for gamma in grid_gammas(dim) {
            let params = SvrParams {
                c,
                gamma: Some(gamma),
                ..*base
            };
            let mut sse = 0.0;
            for fold in 0..FOLDS {
                let mut train_x = Vec::new();
                let mut train_y = Vec::new();
                let mut test = Vec::new();
                for (i, (x, y)) in features.iter().zip(labels).enumerate() {
                    if i % FOLDS == fold {
                        test.push((x, *y));
                    } else {
                        train_x.push(x.clone());
                        train_y.push(*y);
                    }
                }
                let model = svr_train(&train_x, &train_y, &params)?;
                for (x, y) in test {
                    let e = model.predict(x)? - y;
                    sse += e * e;
                }
            }
            let mse = sse / features.len() as f64;
            if best.as_ref().is_none_or(|(b, _)| mse < *b) {
                best = Some((mse, params));
            }
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(
            svr_train(&[vec![1.0]], &[1.0], &SvrParams::default()),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            svr_train(&[vec![1.0], vec![f64::NAN]], &[1.0, 2.0], &SvrParams::default()),
            Err(Error::NonFinite(_))
        ));
        assert!(svr_train(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0], &SvrParams::default()).is_err());
    }

    #[test]
    fn constant_labels_give_constant_model() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![2.5; 10];
        let m = svr_train(&x, &y, &SvrParams::default()).unwrap();
        for row in &x {
            assert!((m.predict(row).unwrap() - 2.5).abs() <= 0.1 + 1e-12);
        }
        assert!((m.predict(&[-40.0, 1e4]).unwrap() - 2.5).abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn zero_variance_feature_is_flagged() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 3.0]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let m = svr_train(&x, &y, &SvrParams::default()).unwrap();
        assert_eq!(m.normalization.constant, vec![false, true]);
        assert_eq!(m.normalization.std[1], 1.0);
    }

    #[test]
    fn width_mismatch_on_predict() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64; 24]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let m = svr_train(&x, &y, &SvrParams::default()).unwrap();
        assert!(matches!(m.predict(&[0.0; 26]), Err(Error::FeatureDim { expected: 24, got: 26 })));
    }

    #[test]
    fn coefficients_respect_box() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64).cos()]).collect();
        let y: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let params = SvrParams { c: 2.0, ..Default::default() };
        let m = svr_train(&x, &y, &params).unwrap();
        assert!(m.dual_coefficients.iter().all(|a| a.abs() <= 2.0));
        let sum: f64 = m.dual_coefficients.iter().sum();
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn corrupted_json_is_schema_error() {
        assert!(matches!(SvrModel::from_json("{\"schema\": 3"), Err(Error::Schema(_))));
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let m = svr_train(&x, &y, &SvrParams::default()).unwrap();
        let wrong = m.to_json().replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(SvrModel::from_json(&wrong), Err(Error::Schema(_))));
    }
}
