//! SROCC, KROCC and PLCC.

use crate::error::{Error, Result};
use crate::logistic::logistic_fit;

fn check_pair(a: &[f64], b: &[f64], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < min_len {
        return Err(Error::InsufficientData(format!(
            "need at least {min_len} samples, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input"));
    }
    Ok(())
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson_unchecked(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
pub fn srocc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 3)?;
    pearson_unchecked(&fractional_ranks(a), &fractional_ranks(b))
}

/// Kendall tau-a: `2(P_c − P_d) / (T(T − 1))`; tied pairs count in neither.
pub fn krocc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let n = a.len();
    let mut balance: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if a[i] != a[j] && b[i] != b[j] {
                balance += if s > 0.0 { 1 } else { -1 };
            }
        }
    }
    Ok(2.0 * balance as f64 / (n * (n - 1)) as f64)
}

/// Pearson correlation, optionally after fitting the logistic mapping of
/// `objective` onto `subjective`.
pub fn plcc(objective: &[f64], subjective: &[f64], with_mapping: bool) -> Result<f64> {
    check_pair(objective, subjective, if with_mapping { 5 } else { 3 })?;
    if !with_mapping {
        return pearson_unchecked(objective, subjective);
    }
    let fit = logistic_fit(objective, subjective)?;
    let mapped: Vec<f64> = objective.iter().map(|&u| fit.apply(u)).collect();
    match pearson_unchecked(&mapped, subjective) {
        // A fit that collapses to a constant carries no linear information;
        // fall back to the raw correlation.
        Err(Error::ConstantInput) => pearson_unchecked(objective, subjective),
        other => other,
    }
}
