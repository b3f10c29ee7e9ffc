//! Five-parameter monotone logistic mapping applied to objective scores
//! before computing PLCC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_EVALS: usize = 10_000;
const SHRINK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta: [f64; 5],
}

/// `β1·(1/2 − 1/(1 + e^{β2(u − β3)})) + β4·u + β5`
pub fn logistic_apply(fit: &LogisticFit, u: f64) -> f64 {
    let [b1, b2, b3, b4, b5] = fit.beta;
    b1 * (0.5 - 1.0 / (1.0 + (b2 * (u - b3)).exp())) + b4 * u + b5
}

impl LogisticFit {
    pub fn apply(&self, u: f64) -> f64 {
        logistic_apply(self, u)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn sse(beta: &[f64; 5], objective: &[f64], subjective: &[f64]) -> f64 {
    let fit = LogisticFit { beta: *beta };
    let s: f64 = objective
        .iter()
        .zip(subjective)
        .map(|(&u, &g)| {
            let e = logistic_apply(&fit, u) - g;
            e * e
        })
        .sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Nelder–Mead simplex minimization with standard coefficients.
fn nelder_mead(
    f: &dyn Fn(&[f64; 5]) -> f64,
    start: [f64; 5],
    steps: [f64; 5],
    max_evals: usize,
) -> ([f64; 5], f64, usize) {
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64; 5]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut simplex: Vec<([f64; 5], f64)> = Vec::with_capacity(6);
    simplex.push((start, eval(&start)));
    for i in 0..5 {
        let mut x = start;
        x[i] += steps[i];
        let fx = eval(&x);
        simplex.push((x, fx));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0;
        let scale = best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&best).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if size / scale < SHRINK_TOL || evals.get() >= max_evals {
            break;
        }
        let mut centroid = [0.0; 5];
        for (x, _) in &simplex[..5] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / 5.0;
            }
        }
        let worst = simplex[5];
        let along = |t: f64| -> [f64; 5] { std::array::from_fn(|i| centroid[i] + t * (worst.0[i] - centroid[i])) };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[5] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[4].1 {
            simplex[5] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                (x, eval(&x))
            } else {
                let x = along(0.5);
                (x, eval(&x))
            };
            if fc < worst.1.min(fr) {
                simplex[5] = (xc, fc);
            } else {
                let b = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let x: [f64; 5] = std::array::from_fn(|i| b[i] + 0.5 * (entry.0[i] - b[i]));
                    *entry = (x, eval(&x));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, evals.get())
}

/// Least-squares fit of the logistic mapping from objective to subjective
/// scores.
///
/// The simplex starts from `β = (max g − min g, 1/std u, mean u, 0, mean g)`
/// and is restarted from its best vertex while that keeps improving. A
/// second run starts from the ordinary least-squares line (`β1 = 0`), and
/// the better fit is returned, so the result never fits worse than the best
/// affine map.
pub fn logistic_fit(objective: &[f64], subjective: &[f64]) -> Result<LogisticFit> {
    if objective.len() != subjective.len() {
        return Err(Error::LengthMismatch(objective.len(), subjective.len()));
    }
    if objective.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "logistic fit needs at least 5 samples, got {}",
            objective.len()
        )));
    }
    if objective.iter().chain(subjective).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic fit input"));
    }
    let su = pop_std(objective);
    if su == 0.0 {
        return Err(Error::ConstantInput);
    }
    let (mu, mg, sg) = (mean(objective), mean(subjective), pop_std(subjective));
    let gmax = subjective.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gmin = subjective.iter().cloned().fold(f64::INFINITY, f64::min);
    let objective_fn = |b: &[f64; 5]| sse(b, objective, subjective);

    let cov = objective
        .iter()
        .zip(subjective)
        .map(|(u, g)| (u - mu) * (g - mg))
        .sum::<f64>()
        / objective.len() as f64;
    let slope = cov / (su * su);
    let affine = [0.0, 1.0 / su, mu, slope, mg - slope * mu];
    let affine_sse = objective_fn(&affine);

    let range = (gmax - gmin).max(1e-12);
    let slope_scale = (sg / su).max(1e-12);
    let steps_for = |x: &[f64; 5]| -> [f64; 5] {
        [
            0.1 * x[0].abs().max(range),
            0.1 * x[1].abs().max(1.0 / su),
            0.1 * su.max(x[2].abs() * 1e-3),
            0.1 * x[3].abs().max(slope_scale),
            0.1 * x[4].abs().max(sg.max(1e-12)),
        ]
    };

    let mut best = (affine, affine_sse);
    let mut budget = MAX_EVALS;
    for start in [[gmax - gmin, 1.0 / su, mu, 0.0, mg], affine] {
        let mut point = start;
        let mut value = objective_fn(&start);
        while budget > 0 {
            let (x, fx, used) = nelder_mead(&objective_fn, point, steps_for(&point), budget);
            budget = budget.saturating_sub(used);
            let improved = fx < value * (1.0 - 1e-12);
            if fx <= value {
                point = x;
                value = fx;
            }
            if !improved {
                break;
            }
        }
        if value < best.1 {
            best = (point, value);
        }
        budget = budget.max(MAX_EVALS / 2);
    }
    Ok(LogisticFit { beta: best.0 })
}
