// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;

use crate::{DataSequence, Error, Result};

/// Double-centered `|u_i − u_j|` matrix, packed as the upper triangle with the
/// diagonal. Off-diagonal entries carry a factor `√2` so that the plain dot
/// product of two packed matrices equals the full `Σ_{i,j}` sum.
fn centered_packed(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut row_mean = vec![0.0; n];
    for i in 0..n {
        row_mean[i] = u.iter().map(|&x| (u[i] - x).abs()).sum::<f64>() / n as f64;
    }
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut packed = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        packed.push(-2.0 * row_mean[i] + grand);
        for j in i + 1..n {
            let a = (u[i] - u[j]).abs() - row_mean[i] - row_mean[j] + grand;
            packed.push(a * std::f64::consts::SQRT_2);
        }
    }
    packed
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dcor_from_moments(cov: f64, var_u: f64, var_v: f64) -> f64 {
    if var_u <= 0.0 || var_v <= 0.0 {
        return 0.0;
    }
    let r2 = cov / (var_u * var_v).sqrt();
    r2.clamp(0.0, 1.0).sqrt()
}

/// Sample distance correlation of two series (V-statistic form). Returns 0 if
/// either series has zero distance variance.
pub fn distance_correlation(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    if u.len() < 2 {
        return Err(Error::TooFewRows(u.len()));
    }
    let a = centered_packed(u);
    let b = centered_packed(v);
    Ok(dcor_from_moments(dot(&a, &b), dot(&a, &a), dot(&b, &b)))
}

/// `d × d` row-major matrix of distance correlations between coordinates.
pub fn pairwise_distance_correlation(data: &DataSequence) -> Vec<f64> {
    let d = data.d();
    let centered: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|q| centered_packed(&data.column(q)))
        .collect();
    let var: Vec<f64> = centered.par_iter().map(|a| dot(a, a)).collect();
    let rows: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|p| {
            (0..p)
                .map(|q| dcor_from_moments(dot(&centered[p], &centered[q]), var[p], var[q]))
                .collect()
        })
        .collect();
    let mut out = vec![0.0; d * d];
    for p in 0..d {
        out[p * d + p] = if var[p] > 0.0 { 1.0 } else { 0.0 };
        for q in 0..p {
            out[p * d + q] = rows[p][q];
            out[q * d + p] = rows[p][q];
        }
    }
    out
}
