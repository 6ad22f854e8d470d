// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded random sequences for simulation studies.
//!
//! Row `i` of a generated block is drawn from its own stream derived from
//! `(seed, i)`, so rows can be produced in parallel with identical results.

mod scenario;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Geometric, Normal, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

pub use scenario::{build_scenario, sparse_dim, GeneratedScenario, Scenario, ScenarioSpec};

use crate::rng::{derive_seed, stream, stream_rng};
use crate::{DataSequence, Error, Result};

fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    stream_rng(derive_seed(seed, row as u64), stream::DATA)
}

fn generate_rows<F>(n: usize, d: usize, seed: u64, fill: F) -> Result<DataSequence>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    if d == 0 {
        return Err(Error::BadParameter("dimension must be >= 1".into()));
    }
    let mut values = vec![0.0; n * d];
    values
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, row)| fill(&mut row_rng(seed, i), row));
    DataSequence::from_flat(values, n, d)
}

/// Covariance structures for [`gen_gaussian`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    /// `σ² I`
    Identity {
        sigma2: f64,
    },
    /// `σ² ((ρ^{|i−j|}))`
    Ar1 {
        rho: f64,
        sigma2: f64,
    },
    Diag(Vec<f64>),
    /// Consecutive 2×2 blocks with unit variances and correlation `r`; an
    /// odd last coordinate stands alone.
    Block2 {
        r: f64,
    },
}

impl CovKind {
    fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::BadCovariance(m));
        match self {
            CovKind::Identity { sigma2 } if !(*sigma2 > 0.0 && sigma2.is_finite()) => {
                bad(format!("variance {sigma2} must be positive"))
            }
            CovKind::Ar1 { rho, sigma2 }
                if rho.is_nan() || rho.abs() >= 1.0 || !(*sigma2 > 0.0 && sigma2.is_finite()) =>
            {
                bad(format!(
                    "ar1 needs |rho| < 1 and positive variance, got rho={rho}, sigma2={sigma2}"
                ))
            }
            CovKind::Diag(v) if v.len() != d => bad(format!("diagonal has {} entries for d={d}", v.len())),
            CovKind::Diag(v) if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) => {
                bad("diagonal entries must be positive".into())
            }
            CovKind::Block2 { r } if r.is_nan() || r.abs() >= 1.0 => {
                bad(format!("block correlation {r} must satisfy |r| < 1"))
            }
            _ => Ok(()),
        }
    }
}

/// `n` i.i.d. draws from `N_d(mean, Σ)`.
pub fn gen_gaussian(n: usize, mean: &[f64], cov: &CovKind, seed: u64) -> Result<DataSequence> {
    let d = mean.len();
    cov.validate(d)?;
    generate_rows(n, d, seed, |rng, row| {
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        match cov {
            CovKind::Identity { sigma2 } => {
                let s = sigma2.sqrt();
                row.iter_mut().for_each(|x| *x *= s);
            }
            CovKind::Ar1 { rho, sigma2 } => {
                let innov = (1.0 - rho * rho).sqrt();
                for q in 1..row.len() {
                    row[q] = rho * row[q - 1] + innov * row[q];
                }
                let s = sigma2.sqrt();
                row.iter_mut().for_each(|x| *x *= s);
            }
            CovKind::Diag(v) => {
                for (x, var) in row.iter_mut().zip(v) {
                    *x *= var.sqrt();
                }
            }
            CovKind::Block2 { r } => {
                let c = (1.0 - r * r).sqrt();
                for pair in row.chunks_exact_mut(2) {
                    pair[1] = r * pair[0] + c * pair[1];
                }
            }
        }
        for (x, m) in row.iter_mut().zip(mean) {
            *x += m;
        }
    })
}

/// Uniform on `[−h, h]^d`.
pub fn gen_uniform_cube(n: usize, d: usize, half_width: f64, seed: u64) -> Result<DataSequence> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::BadRange(format!("half width {half_width} must be positive")));
    }
    generate_rows(n, d, seed, |rng, row| {
        for x in row.iter_mut() {
            *x = rng.random_range(-half_width..=half_width);
        }
    })
}

/// Radius of the `d`-ball with the volume of `[−1, 1]^d`.
pub fn equal_volume_radius(d: usize) -> f64 {
    let d = d as f64;
    2.0 * (ln_gamma(d / 2.0 + 1.0) / d).exp() / std::f64::consts::PI.sqrt()
}

fn random_direction(rng: &mut ChaCha8Rng, row: &mut [f64]) {
    loop {
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
            return;
        }
    }
}

/// Uniform on `{a ≤ ‖x‖ ≤ b}`.
pub fn gen_uniform_annulus(n: usize, d: usize, a: f64, b: f64, seed: u64) -> Result<DataSequence> {
    if !(a >= 0.0 && a < b && b.is_finite()) {
        return Err(Error::BadRange(format!("annulus needs 0 <= a < b, got a={a}, b={b}")));
    }
    let df = d as f64;
    // (a/b)^d, computed without forming b^d
    let inner = (a / b).powf(df);
    generate_rows(n, d, seed, |rng, row| {
        let u: f64 = rng.random();
        let radius = b * (inner + u * (1.0 - inner)).powf(1.0 / df);
        random_direction(rng, row);
        row.iter_mut().for_each(|x| *x *= radius);
    })
}

/// Uniform in the ball of radius `radius`.
pub fn gen_uniform_ball_radius(n: usize, d: usize, radius: f64, seed: u64) -> Result<DataSequence> {
    gen_uniform_annulus(n, d, 0.0, radius, seed)
}

/// Uniform in the ball with the same volume as `[−1, 1]^d`.
pub fn gen_uniform_ball(n: usize, d: usize, seed: u64) -> Result<DataSequence> {
    gen_uniform_ball_radius(n, d, equal_volume_radius(d), seed)
}

/// Coordinate law for [`gen_iid_coordinates`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    Normal { mean: f64, var: f64 },
    StudentT { nu: f64 },
    Cauchy,
    Laplace,
}

/// `n × d` i.i.d. entries.
pub fn gen_iid_coordinates(n: usize, d: usize, marginal: Marginal, seed: u64) -> Result<DataSequence> {
    match marginal {
        Marginal::Normal { mean, var } => {
            let dist = Normal::new(mean, var.sqrt()).map_err(|e| Error::BadParameter(e.to_string()))?;
            generate_rows(n, d, seed, |rng, row| {
                row.iter_mut().for_each(|x| *x = dist.sample(rng))
            })
        }
        Marginal::StudentT { nu } => {
            let dist = StudentT::new(nu).map_err(|e| Error::BadParameter(e.to_string()))?;
            generate_rows(n, d, seed, |rng, row| {
                row.iter_mut().for_each(|x| *x = dist.sample(rng))
            })
        }
        Marginal::Cauchy => {
            let dist = Cauchy::new(0.0, 1.0).expect("standard Cauchy");
            generate_rows(n, d, seed, |rng, row| {
                row.iter_mut().for_each(|x| *x = dist.sample(rng))
            })
        }
        Marginal::Laplace => generate_rows(n, d, seed, |rng, row| {
            for x in row.iter_mut() {
                let u: f64 = rng.random::<f64>() - 0.5;
                *x = -u.signum() * (-2.0 * u.abs()).ln_1p();
            }
        }),
    }
}

/// `X = Σ_{i=1}^N Z_i` with `N ~ Geometric(p)` on `{1, 2, …}` and
/// `Z_i ~ N_d(0, I)`. Given `N`, this is `√N · Z`.
pub fn gen_geometric_skew_normal(n: usize, d: usize, p: f64, seed: u64) -> Result<DataSequence> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::BadParameter(format!(
            "geometric probability {p} must lie in (0, 1]"
        )));
    }
    let geom = Geometric::new(p).map_err(|e| Error::BadParameter(e.to_string()))?;
    generate_rows(n, d, seed, |rng, row| {
        let count = geom.sample(rng) + 1;
        let s = (count as f64).sqrt();
        for x in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x = s * z;
        }
    })
}

/// Side-by-side columns of equally long sequences.
pub fn hstack(parts: &[DataSequence]) -> Result<DataSequence> {
    let n = parts.first().map(DataSequence::n).ok_or(Error::TooFewRows(0))?;
    if let Some(p) = parts.iter().find(|p| p.n() != n) {
        return Err(Error::LengthMismatch { left: n, right: p.n() });
    }
    let d: usize = parts.iter().map(DataSequence::d).sum();
    let mut values = Vec::with_capacity(n * d);
    for i in 0..n {
        for p in parts {
            values.extend_from_slice(p.row(i));
        }
    }
    DataSequence::from_flat(values, n, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col_stats(data: &DataSequence, q: usize) -> (f64, f64) {
        let c = data.column(q);
        let m = c.iter().sum::<f64>() / c.len() as f64;
        let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (c.len() - 1) as f64;
        (m, v)
    }

    fn all_stats(data: &DataSequence) -> (f64, f64) {
        let x = data.as_flat();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let v = x.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (x.len() - 1) as f64;
        (m, v)
    }

    fn corr(data: &DataSequence, p: usize, q: usize) -> f64 {
        let (a, b) = (data.column(p), data.column(q));
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn ar1_covariance() {
        let data = gen_gaussian(20_000, &[0.0, 0.0], &CovKind::Ar1 { rho: 0.9, sigma2: 1.0 }, 1).unwrap();
        assert!((col_stats(&data, 0).1 - 1.0).abs() < 0.04);
        assert!((col_stats(&data, 1).1 - 1.0).abs() < 0.04);
        assert!((corr(&data, 0, 1) - 0.9).abs() < 0.01);
        // lag-2 correlation of a longer chain
        let data = gen_gaussian(20_000, &[0.0; 3], &CovKind::Ar1 { rho: 0.9, sigma2: 1.0 }, 2).unwrap();
        assert!((corr(&data, 0, 2) - 0.81).abs() < 0.015);
    }

    #[test]
    fn block2_correlation() {
        let data = gen_gaussian(10_000, &[0.0; 4], &CovKind::Block2 { r: -0.9 }, 3).unwrap();
        assert!((corr(&data, 0, 1) + 0.9).abs() < 0.02);
        assert!((corr(&data, 2, 3) + 0.9).abs() < 0.02);
        assert!(corr(&data, 1, 2).abs() < 0.05);
    }

    #[test]
    fn identity_and_mean() {
        let data = gen_gaussian(20_000, &[0.7, 0.7], &CovKind::Identity { sigma2: 1.0 }, 4).unwrap();
        let (m, v) = col_stats(&data, 0);
        assert!((m - 0.7).abs() < 0.03 && (v - 1.0).abs() < 0.05);
    }

    #[test]
    fn bad_covariances() {
        for cov in [
            CovKind::Ar1 { rho: 1.0, sigma2: 1.0 },
            CovKind::Diag(vec![1.0, -1.0]),
            CovKind::Diag(vec![1.0]),
            CovKind::Block2 { r: 1.5 },
            CovKind::Identity { sigma2: 0.0 },
        ] {
            assert!(matches!(
                gen_gaussian(3, &[0.0, 0.0], &cov, 0),
                Err(Error::BadCovariance(_))
            ));
        }
    }

    #[test]
    fn determinism_and_thread_independence() {
        let a = gen_gaussian(50, &[0.0; 7], &CovKind::Ar1 { rho: 0.5, sigma2: 2.0 }, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| gen_gaussian(50, &[0.0; 7], &CovKind::Ar1 { rho: 0.5, sigma2: 2.0 }, 11).unwrap());
        assert_eq!(a, b);
        let c = gen_gaussian(50, &[0.0; 7], &CovKind::Ar1 { rho: 0.5, sigma2: 2.0 }, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn equal_volume_radius_values() {
        assert!((equal_volume_radius(1) - 1.0).abs() < 1e-12);
        // d = 2: π r² = 4
        assert!((equal_volume_radius(2) - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        // d = 3: (4/3) π r³ = 8
        let r3 = (6.0 / std::f64::consts::PI).cbrt();
        assert!((equal_volume_radius(3) - r3).abs() < 1e-12);
    }

    #[test]
    fn annulus_radius_law() {
        let data = gen_uniform_annulus(100_000, 2, 0.0, 1.0, 5).unwrap();
        let inside = data
            .rows()
            .filter(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.5)
            .count() as f64
            / 1e5;
        assert!((inside - 0.25).abs() < 0.01);
        let ring = gen_uniform_annulus(1000, 50, 2.0, 3.0, 6).unwrap();
        for r in ring.rows() {
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((2.0 - 1e-9..=3.0 + 1e-9).contains(&norm));
        }
        assert!(matches!(
            gen_uniform_annulus(3, 2, 2.0, 1.0, 0),
            Err(Error::BadRange(_))
        ));
        // high dimension stays finite
        let big = gen_uniform_ball(3, 2000, 7).unwrap();
        assert!(big.as_flat().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn cube_support() {
        let data = gen_uniform_cube(1000, 1000, 1.0, 8).unwrap();
        let max = data.as_flat().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max <= 1.0 && max > 0.999);
    }

    #[test]
    fn marginal_moments() {
        let t4 = gen_iid_coordinates(1000, 100, Marginal::StudentT { nu: 4.0 }, 9).unwrap();
        assert!((all_stats(&t4).1 - 2.0).abs() < 0.1 * 2.0);
        let lap = gen_iid_coordinates(1000, 100, Marginal::Laplace, 10).unwrap();
        assert!((all_stats(&lap).1 - 2.0).abs() < 0.05 * 2.0);
        let nor = gen_iid_coordinates(1000, 100, Marginal::Normal { mean: 0.0, var: 2.0 }, 11).unwrap();
        assert!((all_stats(&nor).1 - 2.0).abs() < 0.05 * 2.0);
        let cau = gen_iid_coordinates(1000, 100, Marginal::Cauchy, 12).unwrap();
        let mut v = cau.as_flat().to_vec();
        v.sort_by(f64::total_cmp);
        assert!(v[v.len() / 2].abs() < 0.05);
    }

    #[test]
    fn geometric_skew_normal_moments() {
        let one = gen_geometric_skew_normal(20_000, 3, 1.0, 13).unwrap();
        assert!((col_stats(&one, 0).1 - 1.0).abs() < 0.05);
        assert!(corr(&one, 0, 1).abs() < 0.03);
        let g = gen_geometric_skew_normal(1000, 100, 0.1, 14).unwrap();
        assert!((all_stats(&g).1 - 10.0).abs() < 1.0);
        let h = gen_geometric_skew_normal(1000, 100, 0.5, 15).unwrap();
        assert!(all_stats(&h).0.abs() < 0.05);
        assert!(gen_geometric_skew_normal(3, 3, 0.0, 0).is_err());
    }

    #[test]
    fn hstack_columns() {
        let a = gen_uniform_cube(4, 2, 1.0, 1).unwrap();
        let b = gen_uniform_cube(4, 3, 1.0, 2).unwrap();
        let c = hstack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.d(), 5);
        assert_eq!(&c.row(2)[..2], a.row(2));
        assert_eq!(&c.row(2)[2..], b.row(2));
    }
}
