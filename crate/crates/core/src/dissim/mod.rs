// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pairwise dissimilarities between observations.
//!
//! The base distances are the Euclidean norm and the coordinate-wise family
//! `ρ(x, y) = h((1/d) Σ_q ψ((x_q − y_q)²))`, optionally evaluated on blocks of
//! coordinates. Wrapping a base distance in leave-out averaging,
//!
//! ```text
//! δ(x_i, x_j) = 1/(n−2) Σ_{k ≠ i,j} |ρ(x_i, x_k) − ρ(x_j, x_k)|,
//! ```
//!
//! makes it depend on the whole data cloud, which keeps neighborhoods intact
//! when `d ≫ n`.

mod blocks;
mod dcor;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{DataSequence, DissimilarityMatrix, Error, Result};

pub use blocks::{form_blocks, max_weight_pairing, BlockPartition, Pairing};
pub use dcor::{distance_correlation, pairwise_distance_correlation};

/// Above this dimension the coordinate pairing falls back to greedy.
pub const EXACT_MATCHING_MAX_DIM: usize = 16;

/// Inner transform ψ, applied to squared coordinate (or block) differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    Identity,
    /// `t ↦ 1 − exp(−√t)`
    ExpDecay,
    /// `t ↦ t^a`
    Pow(f64),
}

impl Psi {
    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Psi::Identity => t,
            Psi::ExpDecay => -(-t.sqrt()).exp_m1(),
            Psi::Pow(a) => t.powf(a),
        }
    }
}

/// Outer transform h, applied to the averaged ψ values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H {
    Identity,
    /// `t ↦ t^a`
    Pow(f64),
}

impl H {
    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            H::Identity => t,
            H::Pow(a) => t.powf(a),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformPair {
    pub h: H,
    pub psi: Psi,
}

impl TransformPair {
    /// `h = id`, `ψ(t) = 1 − e^{−√t}`.
    pub const EXP_DECAY: Self = Self {
        h: H::Identity,
        psi: Psi::ExpDecay,
    };

    /// Scaled `ℓ_p` distance: `ψ(t) = t^{p/2}`, `h(t) = t^{1/p}`.
    pub fn lp(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::BadParameter(format!("l_p exponent must be >= 1, got {p}")));
        }
        Ok(Self {
            h: H::Pow(1.0 / p),
            psi: Psi::Pow(p / 2.0),
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = |a: f64| a > 0.0 && a.is_finite();
        if let Psi::Pow(a) = self.psi {
            if !ok(a) {
                return Err(Error::BadParameter(format!("ψ exponent {a}")));
            }
        }
        if let H::Pow(a) = self.h {
            if !ok(a) {
                return Err(Error::BadParameter(format!("h exponent {a}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DistanceKind {
    Euclidean,
    Rho(TransformPair),
    RhoBlock {
        transform: TransformPair,
        partition: BlockPartition,
    },
}

/// A base distance plus the choice of leave-out averaging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissimilaritySpec {
    pub kind: DistanceKind,
    pub leave_out_averaging: bool,
}

impl DissimilaritySpec {
    pub fn euclidean() -> Self {
        Self {
            kind: DistanceKind::Euclidean,
            leave_out_averaging: false,
        }
    }

    /// Leave-out averaged Euclidean distance.
    pub fn delta0() -> Self {
        Self {
            kind: DistanceKind::Euclidean,
            leave_out_averaging: true,
        }
    }

    /// Leave-out averaged `ρ` with `h = id`, `ψ(t) = 1 − e^{−√t}`.
    pub fn delta1() -> Self {
        Self {
            kind: DistanceKind::Rho(TransformPair::EXP_DECAY),
            leave_out_averaging: true,
        }
    }

    pub fn delta1_block(partition: BlockPartition) -> Self {
        Self {
            kind: DistanceKind::RhoBlock {
                transform: TransformPair::EXP_DECAY,
                partition,
            },
            leave_out_averaging: true,
        }
    }

    pub fn rho(transform: TransformPair, leave_out_averaging: bool) -> Self {
        Self {
            kind: DistanceKind::Rho(transform),
            leave_out_averaging,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match &self.kind {
            DistanceKind::Euclidean => Ok(()),
            DistanceKind::Rho(t) => t.validate(),
            DistanceKind::RhoBlock { transform, partition } => {
                transform.validate()?;
                partition.validate()?;
                if partition.dim() != d {
                    return Err(Error::DimensionMismatch {
                        left: partition.dim(),
                        right: d,
                    });
                }
                Ok(())
            }
        }
    }
}

/// Named dissimilarity choices exposed to users.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Euclidean,
    Delta0,
    Delta1,
    Delta1Block,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Euclidean => "euclidean",
            Preset::Delta0 => "delta0",
            Preset::Delta1 => "delta1",
            Preset::Delta1Block => "delta1-block",
        }
    }

    /// Turn the preset into a concrete spec. Block presets pair coordinates
    /// from `data`; the returned [`Pairing`] says how.
    pub fn resolve(self, data: &DataSequence) -> Result<(DissimilaritySpec, Option<Pairing>)> {
        Ok(match self {
            Preset::Euclidean => (DissimilaritySpec::euclidean(), None),
            Preset::Delta0 => (DissimilaritySpec::delta0(), None),
            Preset::Delta1 => (DissimilaritySpec::delta1(), None),
            Preset::Delta1Block => {
                let (partition, pairing) = form_blocks(data, 2)?;
                (DissimilaritySpec::delta1_block(partition), Some(pairing))
            }
        })
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Preset::Euclidean),
            "delta0" => Ok(Preset::Delta0),
            "delta1" => Ok(Preset::Delta1),
            "delta1-block" => Ok(Preset::Delta1Block),
            other => Err(Error::InvalidConfig(format!("unknown dissimilarity `{other}`"))),
        }
    }
}

/// Base distance `ρ(x, y)` (no leave-out averaging).
pub fn base_distance(x: &[f64], y: &[f64], spec: &DissimilaritySpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    spec.validate(x.len())?;
    Ok(base_distance_unchecked(x, y, &spec.kind))
}

#[inline]
fn base_distance_unchecked(x: &[f64], y: &[f64], kind: &DistanceKind) -> f64 {
    match kind {
        DistanceKind::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        DistanceKind::Rho(TransformPair { h, psi }) => {
            let s: f64 = match psi {
                Psi::Identity => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
                _ => x.iter().zip(y).map(|(a, b)| psi.apply((a - b) * (a - b))).sum(),
            };
            h.apply(s / x.len() as f64)
        }
        DistanceKind::RhoBlock {
            transform: TransformPair { h, psi },
            partition,
        } => {
            let s: f64 = partition
                .blocks()
                .iter()
                .map(|block| {
                    let sq: f64 = block.iter().map(|&q| (x[q] - y[q]) * (x[q] - y[q])).sum();
                    psi.apply(sq)
                })
                .sum();
            h.apply(s / partition.len() as f64)
        }
    }
}

/// Full matrix of base distances.
fn base_matrix(data: &DataSequence, kind: &DistanceKind) -> DissimilarityMatrix {
    let n = data.n();
    let lower: Vec<f64> = (1..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = data.row(i);
            (0..i).map(move |j| base_distance_unchecked(xi, data.row(j), kind))
        })
        .collect();
    DissimilarityMatrix::from_lower(n, &lower)
}

/// Leave-out averaging of a base distance matrix.
pub fn leave_out_average(base: &DissimilarityMatrix) -> Result<DissimilarityMatrix> {
    let n = base.n();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    let scale = 1.0 / (n - 2) as f64;
    let lower: Vec<f64> = (1..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ri = base.row(i);
            (0..i).map(move |j| {
                let rj = base.row(j);
                let s: f64 = ri
                    .iter()
                    .zip(rj)
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, (a, b))| (a - b).abs())
                    .sum();
                s * scale
            })
        })
        .collect();
    Ok(DissimilarityMatrix::from_lower(n, &lower))
}

/// Dissimilarity matrix of `data` under `spec`.
pub fn dissimilarity_matrix(data: &DataSequence, spec: &DissimilaritySpec) -> Result<DissimilarityMatrix> {
    spec.validate(data.d())?;
    if spec.leave_out_averaging && data.n() < 3 {
        return Err(Error::TooFewPoints(data.n()));
    }
    let base = base_matrix(data, &spec.kind);
    if spec.leave_out_averaging {
        leave_out_average(&base)
    } else {
        Ok(base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate_sequence;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> DataSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        validate_sequence(&rows).unwrap()
    }

    /// Literal transcription of the leave-out sum, used as an oracle.
    fn brute_delta(data: &DataSequence, i: usize, j: usize, spec: &DissimilaritySpec) -> f64 {
        let n = data.n();
        let base = DissimilaritySpec {
            kind: spec.kind.clone(),
            leave_out_averaging: false,
        };
        let mut s = 0.0;
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let a = base_distance(data.row(i), data.row(k), &base).unwrap();
            let b = base_distance(data.row(j), data.row(k), &base).unwrap();
            s += (a - b).abs();
        }
        s / (n - 2) as f64
    }

    #[test]
    fn scaled_l2_example() {
        let spec = DissimilaritySpec::rho(TransformPair::lp(2.0).unwrap(), false);
        let v = base_distance(&[0.0, 0.0], &[3.0, 4.0], &spec).unwrap();
        assert_relative_eq!(v, (25.0f64 / 2.0).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn identical_points_are_at_zero() {
        let x = [0.3, -1.2, 7.0, 2.0];
        let partition = BlockPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        for spec in [
            DissimilaritySpec::euclidean(),
            DissimilaritySpec::delta1(),
            DissimilaritySpec::rho(TransformPair::lp(3.0).unwrap(), false),
            DissimilaritySpec::delta1_block(partition),
        ] {
            assert_eq!(base_distance(&x, &x, &spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn block_identity_example() {
        let partition = BlockPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let spec = DissimilaritySpec {
            kind: DistanceKind::RhoBlock {
                transform: TransformPair {
                    h: H::Identity,
                    psi: Psi::Identity,
                },
                partition,
            },
            leave_out_averaging: false,
        };
        let v = base_distance(&[0.0, 0.0, 3.0, 4.0], &[1.0, 1.0, 3.0, 4.0], &spec).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn exp_decay_example() {
        let spec = DissimilaritySpec::rho(TransformPair::EXP_DECAY, false);
        let v = base_distance(&[0.0], &[1.0], &spec).unwrap();
        assert_relative_eq!(v, 1.0 - (-1.0f64).exp(), max_relative = 1e-15);
        assert!((v - 0.63212).abs() < 1e-5);
    }

    #[test]
    fn dimension_mismatch() {
        let err = base_distance(&[0.0], &[1.0, 2.0], &DissimilaritySpec::euclidean()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn delta0_three_points() {
        let data = validate_sequence(&[[0.0], [1.0], [3.0]]).unwrap();
        let m = dissimilarity_matrix(&data, &DissimilaritySpec::delta0()).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 2), 1.0);
        assert_eq!(m.get(1, 2), 2.0);
        assert_eq!(m.get(2, 1), 2.0);
        assert!((0..3).all(|i| m.get(i, i) == 0.0));
    }

    #[test]
    fn delta0_four_points_matches_brute_force() {
        let data = validate_sequence(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
        let spec = DissimilaritySpec::delta0();
        let m = dissimilarity_matrix(&data, &spec).unwrap();
        assert_eq!(brute_delta(&data, 0, 1, &spec), 1.0);
        assert_eq!(m.get(0, 1), 1.0);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_relative_eq!(m.get(i, j), brute_delta(&data, i, j, &spec), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn leave_out_needs_three_points() {
        let data = validate_sequence(&[[0.0], [1.0]]).unwrap();
        let err = dissimilarity_matrix(&data, &DissimilaritySpec::delta0()).unwrap_err();
        assert!(matches!(err, Error::TooFewPoints(2)));
        assert!(dissimilarity_matrix(&data, &DissimilaritySpec::euclidean()).is_ok());
    }

    #[test]
    fn delta0_is_a_pseudometric() {
        for seed in 0..5 {
            let data = random_data(12, 7, seed);
            let m = dissimilarity_matrix(&data, &DissimilaritySpec::delta0()).unwrap();
            let n = m.n();
            for i in 0..n {
                for j in 0..n {
                    assert!(m.get(i, j) >= 0.0);
                    assert_eq!(m.get(i, j), m.get(j, i));
                    for k in 0..n {
                        assert!(m.get(i, k) <= m.get(i, j) + m.get(j, k) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn delta1_is_nonnegative_and_symmetric() {
        let data = random_data(10, 20, 3);
        let m = dissimilarity_matrix(&data, &DissimilaritySpec::delta1()).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert!(m.get(i, j) >= 0.0);
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert_relative_eq!(
            m.get(2, 7),
            brute_delta(&data, 2, 7, &DissimilaritySpec::delta1()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn scaled_l2_rho_is_scaled_delta0() {
        let d = 9;
        let data = random_data(11, d, 5);
        let a = dissimilarity_matrix(&data, &DissimilaritySpec::delta0()).unwrap();
        let b = dissimilarity_matrix(&data, &DissimilaritySpec::rho(TransformPair::lp(2.0).unwrap(), true)).unwrap();
        let s = (d as f64).powf(-0.5);
        for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
            assert_relative_eq!(x * s, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn singleton_blocks_equal_unblocked_rho() {
        let d = 6;
        let data = random_data(8, d, 11);
        let partition = BlockPartition::new((0..d).map(|q| vec![q]).collect(), d).unwrap();
        let a = dissimilarity_matrix(&data, &DissimilaritySpec::delta1()).unwrap();
        let b = dissimilarity_matrix(&data, &DissimilaritySpec::delta1_block(partition)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn delta0_is_rotation_invariant() {
        // Rotate coordinate pairs (0,1) and (2,3) by different angles.
        let data = random_data(9, 4, 21);
        let (c1, s1) = (0.3f64.cos(), 0.3f64.sin());
        let (c2, s2) = (2.1f64.cos(), 2.1f64.sin());
        let rows: Vec<Vec<f64>> = data
            .rows()
            .map(|r| {
                vec![
                    c1 * r[0] - s1 * r[1],
                    s1 * r[0] + c1 * r[1],
                    c2 * r[2] - s2 * r[3],
                    s2 * r[2] + c2 * r[3],
                ]
            })
            .collect();
        let rotated = validate_sequence(&rows).unwrap();
        let a = dissimilarity_matrix(&data, &DissimilaritySpec::delta0()).unwrap();
        let b = dissimilarity_matrix(&rotated, &DissimilaritySpec::delta0()).unwrap();
        for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn transforms_vanish_at_zero_and_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psis = [Psi::Identity, Psi::ExpDecay, Psi::Pow(0.5), Psi::Pow(1.5)];
        let hs = [H::Identity, H::Pow(0.5), H::Pow(1.0 / 3.0)];
        for psi in psis {
            assert_eq!(psi.apply(0.0), 0.0);
        }
        for h in hs {
            assert_eq!(h.apply(0.0), 0.0);
        }
        for _ in 0..500 {
            let a: f64 = rng.random_range(0.0..50.0);
            let b: f64 = rng.random_range(0.0..50.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for psi in psis {
                assert!(psi.apply(lo) <= psi.apply(hi));
            }
            for h in hs {
                assert!(h.apply(lo) <= h.apply(hi));
            }
        }
    }
}
