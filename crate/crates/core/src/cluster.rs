// SPDX-License-Identifier: MIT OR Apache-2.0

//! 2-means clustering driven by a precomputed dissimilarity matrix.
//!
//! The objective is the dissimilarity analogue of the within-cluster sum of
//! squares,
//!
//! ```text
//! λ*(C_1, C_2) = Σ_j 1/(2|C_j|) Σ_{(i,i') ∈ C_j × C_j} δ²(x_i, x_i'),
//! ```
//!
//! and points are reassigned by the surrogate squared distance to a cluster
//!
//! ```text
//! d_0(x_i, C) = 1/|C| Σ_{k∈C} δ²(x_i, x_k) − 1/(2|C|²) Σ_{(k,l) ∈ C × C} δ²(x_k, x_l),
//! ```
//!
//! which equals `‖x_i − centroid(C)‖²` when δ is Euclidean.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, stream, stream_rng};
use crate::{DissimilarityMatrix, Error, Labeling, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub max_iterations: usize,
    /// Random balanced starting bipartitions.
    pub restarts: usize,
    /// Also start from every temporal split `{1..t} | {t+1..n}`.
    pub include_split_inits: bool,
    pub rng_seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            restarts: 20,
            include_split_inits: true,
            rng_seed: 0,
        }
    }
}

impl ClusterConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.restarts == 0 && !self.include_split_inits {
            return Err(Error::InvalidConfig(
                "need at least one random restart or the split initializations".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub labeling: Labeling,
    pub objective: f64,
    pub iterations_used: usize,
    pub init_id: usize,
}

/// Squared dissimilarities, row-major.
struct Squared {
    sq: Vec<f64>,
    n: usize,
}

impl Squared {
    fn new(d: &DissimilarityMatrix) -> Self {
        Self {
            sq: d.as_flat().iter().map(|v| v * v).collect(),
            n: d.n(),
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.sq[i * self.n..(i + 1) * self.n]
    }

    /// Per-point sums to each cluster, `S[c][i] = Σ_{k ∈ C_c} δ²(i, k)`.
    fn sums(&self, labels: &[u8]) -> [Vec<f64>; 2] {
        let mut s = [Vec::with_capacity(self.n), Vec::with_capacity(self.n)];
        for i in 0..self.n {
            let (mut a, mut b) = (0.0, 0.0);
            for (&x, &l) in self.row(i).iter().zip(labels) {
                if l == 0 {
                    a += x;
                } else {
                    b += x;
                }
            }
            s[0].push(a);
            s[1].push(b);
        }
        s
    }

    fn objective(&self, labels: &[u8]) -> f64 {
        let sums = self.sums(labels);
        let mut total = 0.0;
        for c in 0..2u8 {
            let size = labels.iter().filter(|&&l| l == c).count();
            if size == 0 {
                continue;
            }
            let within: f64 = (0..self.n)
                .filter(|&i| labels[i] == c)
                .map(|i| sums[c as usize][i])
                .sum();
            total += within / (2.0 * size as f64);
        }
        total
    }
}

/// `λ*` of a labeling; both clusters must be nonempty.
pub fn objective_lambda(d: &DissimilarityMatrix, labeling: &Labeling) -> Result<f64> {
    check_len(d, labeling)?;
    if labeling.is_constant() {
        return Err(Error::EmptyCluster);
    }
    Ok(Squared::new(d).objective(labeling.labels()))
}

fn check_len(d: &DissimilarityMatrix, labeling: &Labeling) -> Result<()> {
    if d.n() != labeling.len() {
        return Err(Error::LengthMismatch {
            left: d.n(),
            right: labeling.len(),
        });
    }
    Ok(())
}

/// Surrogate squared distance `d_0` of point `i` to the cluster `members`
/// (0-based indices; `i` may itself be a member).
pub fn point_to_cluster(d: &DissimilarityMatrix, i: usize, members: &[usize]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let n = d.n();
    if let Some(&bad) = members.iter().chain(std::iter::once(&i)).find(|&&k| k >= n) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            lo: 0,
            hi: n - 1,
        });
    }
    let m = members.len() as f64;
    let to_point: f64 = members.iter().map(|&k| d.get(i, k).powi(2)).sum();
    let within: f64 = members
        .iter()
        .flat_map(|&k| members.iter().map(move |&l| (k, l)))
        .map(|(k, l)| d.get(k, l).powi(2))
        .sum();
    Ok(to_point / m - within / (2.0 * m * m))
}

struct Run {
    labels: Vec<u8>,
    objective: f64,
    iterations: usize,
}

/// One initialization: batch sweeps with best-seen tracking.
fn run_from(sq: &Squared, mut labels: Vec<u8>, max_iterations: usize) -> Run {
    let n = sq.n;
    let mut best = Run {
        objective: sq.objective(&labels),
        labels: labels.clone(),
        iterations: 0,
    };
    for it in 1..=max_iterations {
        let sums = sq.sums(&labels);
        let size = [
            labels.iter().filter(|&&l| l == 0).count(),
            labels.iter().filter(|&&l| l == 1).count(),
        ];
        let within: [f64; 2] =
            std::array::from_fn(|c| (0..n).filter(|&i| labels[i] as usize == c).map(|i| sums[c][i]).sum());
        let d0 = |i: usize, c: usize| {
            let m = size[c] as f64;
            sums[c][i] / m - within[c] / (2.0 * m * m)
        };
        let mut next: Vec<u8> = (0..n)
            .map(|i| {
                let (a, b) = (d0(i, 0), d0(i, 1));
                if a < b {
                    0
                } else if a > b {
                    1
                } else {
                    labels[i]
                }
            })
            .collect();
        let zeros = next.iter().filter(|&&l| l == 0).count();
        if zeros == 0 || zeros == n {
            // everyone went to `full`; keep the point farthest from it behind
            let full = next[0] as usize;
            let keep = (0..n)
                .max_by(|&a, &b| d0(a, full).total_cmp(&d0(b, full)).then(b.cmp(&a)))
                .expect("n >= 2");
            next[keep] = 1 - full as u8;
        }
        if next == labels {
            break;
        }
        labels = next;
        let objective = sq.objective(&labels);
        if objective < best.objective {
            best = Run {
                objective,
                labels: labels.clone(),
                iterations: it,
            };
        }
    }
    best
}

/// Single-point transfers that strictly lower `λ*`, best move first, until
/// none is left. Batch sweeps can stall where one such move still helps.
fn refine_transfers(sq: &Squared, run: Run) -> Run {
    let n = sq.n;
    let mut labels = run.labels;
    let mut sums = sq.sums(&labels);
    let mut size = [0usize; 2];
    labels.iter().for_each(|&l| size[l as usize] += 1);
    let mut within: [f64; 2] =
        std::array::from_fn(|c| (0..n).filter(|&i| labels[i] as usize == c).map(|i| sums[c][i]).sum());
    let part = |w: f64, m: usize| if m == 0 { 0.0 } else { w / (2.0 * m as f64) };
    let mut objective = part(within[0], size[0]) + part(within[1], size[1]);
    let mut moves = 0;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            let from = labels[i] as usize;
            let to = 1 - from;
            if size[from] == 1 {
                continue;
            }
            let after = part(within[from] - 2.0 * sums[from][i], size[from] - 1)
                + part(within[to] + 2.0 * sums[to][i], size[to] + 1);
            let gain = objective - after;
            if gain > 1e-12 * objective.max(f64::MIN_POSITIVE) && best.is_none_or(|b| gain > b.1) {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else { break };
        let from = labels[i] as usize;
        let to = 1 - from;
        within[from] -= 2.0 * sums[from][i];
        within[to] += 2.0 * sums[to][i];
        size[from] -= 1;
        size[to] += 1;
        labels[i] = to as u8;
        let row = sq.row(i);
        for k in 0..n {
            sums[from][k] -= row[k];
            sums[to][k] += row[k];
        }
        objective = sq.objective(&labels);
        moves += 1;
    }
    Run {
        objective,
        labels,
        iterations: run.iterations + moves,
    }
}

/// Minimize `λ*` by batch reassignment from several starting bipartitions.
pub fn two_means(d: &DissimilarityMatrix, config: &ClusterConfig) -> Result<ClusterResult> {
    config.validate()?;
    let n = d.n();
    if n < 2 {
        return Err(Error::DegenerateInput(n));
    }
    let sq = Squared::new(d);
    let splits = if config.include_split_inits { n - 1 } else { 0 };
    let total = config.restarts + splits;

    let runs: Vec<(usize, Run)> = (0..total)
        .into_par_iter()
        .map(|init_id| {
            let labels = if init_id < config.restarts {
                let mut rng = stream_rng(derive_seed(config.rng_seed, init_id as u64), stream::CLUSTER);
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let mut labels = vec![1u8; n];
                for &i in &order[..n / 2] {
                    labels[i] = 0;
                }
                labels
            } else {
                let t = init_id - config.restarts + 1;
                (0..n).map(|i| u8::from(i >= t)).collect()
            };
            (
                init_id,
                refine_transfers(&sq, run_from(&sq, labels, config.max_iterations)),
            )
        })
        .collect();

    let (init_id, best) = runs
        .into_iter()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective).then(a.0.cmp(&b.0)))
        .expect("at least one initialization");
    let mut labels = best.labels;
    if labels[0] == 1 {
        labels.iter_mut().for_each(|l| *l = 1 - *l);
    }
    let labeling = Labeling::new(labels)?;
    let objective = sq.objective(labeling.labels());
    Ok(ClusterResult {
        labeling,
        objective,
        iterations_used: best.iterations,
        init_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissim::{dissimilarity_matrix, DissimilaritySpec};
    use crate::validate_sequence;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(n: usize, entries: &[(usize, usize, f64)], fill: f64) -> DissimilarityMatrix {
        let mut m = vec![fill; n * n];
        for i in 0..n {
            m[i * n + i] = 0.0;
        }
        for &(i, j, v) in entries {
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
        DissimilarityMatrix::new(m, n).unwrap()
    }

    fn euclid(points: &[Vec<f64>]) -> DissimilarityMatrix {
        dissimilarity_matrix(&validate_sequence(points).unwrap(), &DissimilaritySpec::euclidean()).unwrap()
    }

    /// Minimum of λ* over all nontrivial bipartitions.
    fn brute_force_min(d: &DissimilarityMatrix) -> f64 {
        let n = d.n();
        (1..(1u32 << (n - 1)))
            .map(|mask| {
                let labels: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                objective_lambda(d, &Labeling::new(labels).unwrap()).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn objective_matches_centroid_form() {
        let d = euclid(&[vec![0.0], vec![2.0], vec![5.0]]);
        let l = Labeling::parse("001").unwrap();
        assert_relative_eq!(objective_lambda(&d, &l).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_matrix_has_zero_objective() {
        let d = matrix(4, &[], 0.0);
        assert_eq!(objective_lambda(&d, &Labeling::parse("0110").unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn two_tight_pairs() {
        let d = matrix(4, &[(0, 1, 1.0), (2, 3, 1.0)], 10.0);
        let l = Labeling::parse("0011").unwrap();
        assert_relative_eq!(objective_lambda(&d, &l).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(brute_force_min(&d), 1.0, epsilon = 1e-12);
        assert!(matches!(
            objective_lambda(&d, &Labeling::parse("0000").unwrap()),
            Err(Error::EmptyCluster)
        ));
    }

    #[test]
    fn point_to_cluster_arithmetic() {
        let d = matrix(3, &[(0, 1, 2.0), (2, 0, 1.0), (2, 1, 3.0)], 0.0);
        assert_relative_eq!(point_to_cluster(&d, 2, &[0, 1]).unwrap(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(point_to_cluster(&d, 2, &[1]).unwrap(), 9.0, epsilon = 1e-12);
        assert!(matches!(point_to_cluster(&d, 2, &[]), Err(Error::EmptyCluster)));
    }

    #[test]
    fn point_to_cluster_is_centroid_distance() {
        let d = euclid(&[vec![0.0], vec![2.0], vec![3.0]]);
        assert_relative_eq!(point_to_cluster(&d, 2, &[0, 1]).unwrap(), 4.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let d = euclid(&pts);
            let members = [0usize, 2, 3, 6];
            let centroid: Vec<f64> = (0..3)
                .map(|q| members.iter().map(|&k| pts[k][q]).sum::<f64>() / 4.0)
                .collect();
            for i in [2usize, 5] {
                let direct: f64 = (0..3).map(|q| (pts[i][q] - centroid[q]).powi(2)).sum();
                assert_relative_eq!(point_to_cluster(&d, i, &members).unwrap(), direct, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn separated_pairs_are_found() {
        let d = euclid(&[vec![0.0], vec![0.1], vec![10.0], vec![10.1]]);
        let r = two_means(&d, &ClusterConfig::default()).unwrap();
        assert_eq!(r.labeling.to_string(), "0011");
        assert_relative_eq!(r.objective, 0.01, epsilon = 1e-12);
        assert_relative_eq!(brute_force_min(&d), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn two_points_split() {
        let d = euclid(&[vec![0.0], vec![3.0]]);
        let r = two_means(&d, &ClusterConfig::default()).unwrap();
        assert_eq!(r.labeling.to_string(), "01");
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn identical_points_give_a_bipartition() {
        let d = matrix(5, &[], 0.0);
        let r = two_means(&d, &ClusterConfig::default()).unwrap();
        assert!(!r.labeling.is_constant());
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let d = DissimilarityMatrix::new(vec![0.0], 1).unwrap();
        assert!(matches!(
            two_means(&d, &ClusterConfig::default()),
            Err(Error::DegenerateInput(1))
        ));
        let cfg = ClusterConfig {
            restarts: 0,
            include_split_inits: false,
            ..Default::default()
        };
        assert!(two_means(&matrix(3, &[], 1.0), &cfg).is_err());
    }

    #[test]
    fn result_objective_is_recomputable_and_beats_every_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let d = euclid(&pts);
        let r = two_means(&d, &ClusterConfig::default()).unwrap();
        assert_relative_eq!(
            r.objective,
            objective_lambda(&d, &r.labeling).unwrap(),
            max_relative = 1e-9
        );
        for t in 1..15 {
            let split: Vec<u8> = (0..15).map(|i| u8::from(i >= t)).collect();
            assert!(r.objective <= objective_lambda(&d, &Labeling::new(split).unwrap()).unwrap() + 1e-12);
        }
        assert!(r.labeling.n1() >= 1 && r.labeling.n2() >= 1);
    }

    #[test]
    fn usually_reaches_the_global_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut hits = 0;
        for inst in 0..200 {
            let n = rng.random_range(4..=12);
            let d = rng.random_range(1..=5);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let dm = euclid(&pts);
            let cfg = ClusterConfig {
                rng_seed: inst,
                ..Default::default()
            };
            let r = two_means(&dm, &cfg).unwrap();
            if (r.objective - brute_force_min(&dm)).abs() <= 1e-9 * r.objective.max(1.0) {
                hits += 1;
            }
        }
        assert!(hits >= 190, "global optimum found on {hits}/200");
    }

    #[test]
    fn permuting_points_permutes_the_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                (0..3)
                    .map(|_| rng.random_range(0.0..1.0) + if i % 3 == 0 { 5.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let perm = [3usize, 7, 0, 9, 1, 4, 8, 2, 6, 5];
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let cfg = ClusterConfig::default();
        let a = two_means(&euclid(&pts), &cfg).unwrap();
        let b = two_means(&euclid(&permuted), &cfg).unwrap();
        let back: Vec<u8> = {
            let mut v = vec![0u8; 10];
            for (pos, &i) in perm.iter().enumerate() {
                v[i] = b.labeling.labels()[pos];
            }
            v
        };
        let back = Labeling::new(back).unwrap();
        assert!(back == a.labeling || back.swapped() == a.labeling);
    }
}
