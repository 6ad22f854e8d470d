// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named simulation scenarios with known change-points.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    gen_gaussian, gen_geometric_skew_normal, gen_iid_coordinates, gen_uniform_annulus, gen_uniform_ball,
    gen_uniform_ball_radius, gen_uniform_cube, hstack, CovKind, Marginal,
};
use crate::rng::{derive_seed, stream, stream_rng};
use crate::{DataSequence, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    A,
    B,
    C,
    D,
    E,
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
    Ex6,
    Ex7,
    Ex8,
    Ex9,
    Ex10,
    Ex11,
    Ex12,
    SparseLoc,
    SparseLocScale,
    SparseScale,
    SparseCauchy,
    H0,
    /// Two univariate normal halves with four gross outliers.
    Outlier,
}

impl Scenario {
    pub const ALL: [Scenario; 23] = [
        Scenario::A,
        Scenario::B,
        Scenario::C,
        Scenario::D,
        Scenario::E,
        Scenario::Ex1,
        Scenario::Ex2,
        Scenario::Ex3,
        Scenario::Ex4,
        Scenario::Ex5,
        Scenario::Ex6,
        Scenario::Ex7,
        Scenario::Ex8,
        Scenario::Ex9,
        Scenario::Ex10,
        Scenario::Ex11,
        Scenario::Ex12,
        Scenario::SparseLoc,
        Scenario::SparseLocScale,
        Scenario::SparseScale,
        Scenario::SparseCauchy,
        Scenario::H0,
        Scenario::Outlier,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::C => "C",
            Scenario::D => "D",
            Scenario::E => "E",
            Scenario::Ex1 => "Ex1",
            Scenario::Ex2 => "Ex2",
            Scenario::Ex3 => "Ex3",
            Scenario::Ex4 => "Ex4",
            Scenario::Ex5 => "Ex5",
            Scenario::Ex6 => "Ex6",
            Scenario::Ex7 => "Ex7",
            Scenario::Ex8 => "Ex8",
            Scenario::Ex9 => "Ex9",
            Scenario::Ex10 => "Ex10",
            Scenario::Ex11 => "Ex11",
            Scenario::Ex12 => "Ex12",
            Scenario::SparseLoc => "sparse_loc",
            Scenario::SparseLocScale => "sparse_locscale",
            Scenario::SparseScale => "sparse_scale",
            Scenario::SparseCauchy => "sparse_cauchy",
            Scenario::H0 => "H0",
            Scenario::Outlier => "outlier",
        }
    }

    fn default_d(self) -> usize {
        use Scenario::*;
        match self {
            A | B | C | H0 => 100,
            D | E | SparseLoc | SparseLocScale | SparseScale | SparseCauchy => 200,
            Outlier => 1,
            _ => 250,
        }
    }

    fn default_n(self) -> usize {
        use Scenario::*;
        match self {
            Ex11 | Ex12 => 160,
            _ => 40,
        }
    }

    /// Equal segment lengths of the multi change-point scenarios.
    fn multi_segments(self) -> Option<(usize, usize)> {
        use Scenario::*;
        match self {
            Ex7 | Ex8 => Some((4, 15)),
            Ex9 | Ex10 => Some((3, 20)),
            _ => None,
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Scenario plus size overrides. Unset fields take the scenario defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// Total length of two-segment scenarios.
    pub n: Option<usize>,
    /// Change-point of two-segment scenarios.
    pub tau: Option<usize>,
    /// Segment length of multi-segment scenarios.
    pub segment_len: Option<usize>,
    pub d: Option<usize>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        Self {
            scenario,
            n: None,
            tau: None,
            segment_len: None,
            d: None,
            seed,
        }
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = Some(d);
        self
    }

    pub fn with_tau(mut self, tau: usize) -> Self {
        self.tau = Some(tau);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedScenario {
    pub data: DataSequence,
    /// True change-points, 1-based: a change after observation `t`.
    pub truth: Vec<usize>,
    pub spec: ScenarioSpec,
}

/// `⌊d^{2/3}⌋`, computed exactly.
pub fn sparse_dim(d: usize) -> usize {
    let d2 = (d as u128) * (d as u128);
    let mut k = (d as f64).powf(2.0 / 3.0).round() as u128 + 1;
    while k * k * k > d2 {
        k -= 1;
    }
    k as usize
}

type SegmentGen<'a> = Box<dyn Fn(usize, u64) -> Result<DataSequence> + 'a>;

fn normal(d: usize, mean: f64, var: f64) -> impl Fn(usize, u64) -> Result<DataSequence> {
    move |n, seed| gen_gaussian(n, &vec![mean; d], &CovKind::Identity { sigma2: var }, seed)
}

fn concat_segments(lens: &[usize], gens: &[SegmentGen<'_>], seed: u64) -> Result<(DataSequence, Vec<usize>)> {
    let mut data: Option<DataSequence> = None;
    let mut truth = Vec::new();
    let mut at = 0;
    for (k, (&len, g)) in lens.iter().zip(gens).enumerate() {
        let part = g(len, derive_seed(seed, k as u64))?;
        data = Some(match data {
            None => part,
            Some(prev) => prev.concat(&part)?,
        });
        at += len;
        if k + 1 < lens.len() {
            truth.push(at);
        }
    }
    Ok((data.expect("at least one segment"), truth))
}

/// Generate the data and true change-points of a scenario.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<GeneratedScenario> {
    use Scenario::*;
    let sc = spec.scenario;
    let d = spec.d.unwrap_or(sc.default_d());
    if d == 0 {
        return Err(Error::BadParameter("dimension must be >= 1".into()));
    }
    if let Some((count, default_len)) = sc.multi_segments() {
        if spec.n.is_some() || spec.tau.is_some() {
            return Err(Error::BadParameter(format!(
                "scenario {sc} has fixed segments; use segment_len instead of n/tau"
            )));
        }
        let len = spec.segment_len.unwrap_or(default_len);
        if len < 2 {
            return Err(Error::BadParameter("segment_len must be >= 2".into()));
        }
        let gens: Vec<SegmentGen> = match sc {
            Ex7 => (0..4)
                .map(|i| Box::new(normal(d, if i % 2 == 0 { 0.5 } else { 0.0 }, 1.0)) as SegmentGen)
                .collect(),
            Ex8 => (0..4)
                .map(|i| Box::new(normal(d, 0.0, (1.0f64 / 20.0).powi(i))) as SegmentGen)
                .collect(),
            Ex9 => {
                if d <= 50 {
                    return Err(Error::BadParameter("scenario Ex9 needs d > 50".into()));
                }
                (1..=3)
                    .map(|i| {
                        Box::new(move |n, seed| {
                            let a = 2.0 * (i as f64 - 1.0);
                            let b = 2.0 * i as f64 - 1.0;
                            let ring = gen_uniform_annulus(n, 50, a, b, derive_seed(seed, 0))?;
                            let ball = gen_uniform_ball_radius(n, d - 50, 5.0, derive_seed(seed, 1))?;
                            hstack(&[ring, ball])
                        }) as SegmentGen
                    })
                    .collect()
            }
            Ex10 => vec![
                Box::new(move |n, seed| gen_iid_coordinates(n, d, Marginal::Normal { mean: 0.0, var: 2.0 }, seed)),
                Box::new(move |n, seed| gen_iid_coordinates(n, d, Marginal::Cauchy, seed)),
                Box::new(move |n, seed| gen_iid_coordinates(n, d, Marginal::Laplace, seed)),
            ],
            _ => unreachable!(),
        };
        let lens = vec![len; count];
        let (data, truth) = concat_segments(&lens, &gens, spec.seed)?;
        return Ok(GeneratedScenario {
            data,
            truth,
            spec: spec.clone(),
        });
    }
    if spec.segment_len.is_some() {
        return Err(Error::BadParameter(format!(
            "scenario {sc} takes n/tau, not segment_len"
        )));
    }
    let n = spec.n.unwrap_or(sc.default_n());
    if sc == H0 {
        if spec.tau.is_some() {
            return Err(Error::BadParameter("scenario H0 has no change-point".into()));
        }
        let data = normal(d, 0.0, 1.0)(n, derive_seed(spec.seed, 0))?;
        return Ok(GeneratedScenario {
            data,
            truth: Vec::new(),
            spec: spec.clone(),
        });
    }
    let tau = spec.tau.unwrap_or(n / 2);
    if tau == 0 || tau >= n {
        return Err(Error::BadParameter(format!("tau={tau} must lie in 1..{n}")));
    }
    if sc == Outlier {
        return outlier_scenario(spec, n, tau, d);
    }
    let half = |first: f64, second: f64| {
        let h = d / 2;
        (0..d).map(|q| if q < h { first } else { second }).collect::<Vec<f64>>()
    };
    let ds = sparse_dim(d);
    let sparse = |inside: f64, outside: f64| {
        (0..d)
            .map(|q| if q < ds { inside } else { outside })
            .collect::<Vec<f64>>()
    };
    let ar1 = |sigma2: f64| CovKind::Ar1 { rho: 0.9, sigma2 };
    let iid = |m: Marginal| move |n: usize, seed: u64| gen_iid_coordinates(n, d, m, seed);
    let zeros = vec![0.0; d];
    let gens: [SegmentGen; 2] = match sc {
        A => [Box::new(normal(d, 0.0, 1.0)), Box::new(normal(d, 0.7, 1.0))],
        B => [Box::new(normal(d, 0.0, 1.0)), Box::new(normal(d, 0.7, 4.0))],
        C => [Box::new(normal(d, 0.0, 1.0)), Box::new(normal(d, 0.0, 4.0))],
        D | Ex5 => {
            let (s1, s2) = (CovKind::Diag(half(1.0, 3.0)), CovKind::Diag(half(3.0, 1.0)));
            let z = zeros.clone();
            [
                Box::new(move |n, seed| gen_gaussian(n, &zeros, &s1, seed)),
                Box::new(move |n, seed| gen_gaussian(n, &z, &s2, seed)),
            ]
        }
        E | Ex6 => [
            Box::new(iid(Marginal::Normal { mean: 0.0, var: 2.0 })),
            Box::new(iid(Marginal::StudentT { nu: 4.0 })),
        ],
        Ex1 => {
            let ones = vec![1.0; d];
            [
                Box::new(move |n, seed| gen_gaussian(n, &zeros, &ar1(1.0), seed)),
                Box::new(move |n, seed| gen_gaussian(n, &ones, &ar1(1.0), seed)),
            ]
        }
        Ex2 => {
            let z = zeros.clone();
            [
                Box::new(move |n, seed| gen_gaussian(n, &zeros, &ar1(1.0), seed)),
                Box::new(move |n, seed| gen_gaussian(n, &z, &ar1(3.0), seed)),
            ]
        }
        Ex3 => [
            Box::new(move |n, seed| gen_geometric_skew_normal(n, d, 0.1, seed)),
            Box::new(normal(d, 0.0, 1.0)),
        ],
        Ex4 => [
            Box::new(move |n, seed| gen_uniform_cube(n, d, 1.0, seed)),
            Box::new(move |n, seed| gen_uniform_ball(n, d, seed)),
        ],
        Ex11 => {
            let z = zeros.clone();
            [
                Box::new(normal(d, 0.0, 1.0)),
                Box::new(move |n, seed| gen_gaussian(n, &z, &ar1(1.0), seed)),
            ]
        }
        Ex12 => {
            let z = zeros.clone();
            [
                Box::new(move |n, seed| gen_gaussian(n, &zeros, &CovKind::Block2 { r: 0.9 }, seed)),
                Box::new(move |n, seed| gen_gaussian(n, &z, &CovKind::Block2 { r: -0.9 }, seed)),
            ]
        }
        SparseLoc | SparseLocScale | SparseScale => {
            let mean = if sc == SparseScale {
                zeros.clone()
            } else {
                sparse(1.0, 0.0)
            };
            let cov = if sc == SparseLoc {
                CovKind::Identity { sigma2: 1.0 }
            } else {
                CovKind::Diag(sparse(3.0, 1.0))
            };
            [
                Box::new(normal(d, 0.0, 1.0)),
                Box::new(move |n, seed| gen_gaussian(n, &mean, &cov, seed)),
            ]
        }
        SparseCauchy => [
            Box::new(normal(d, 0.0, 1.0)),
            Box::new(move |n, seed| {
                let heavy = gen_iid_coordinates(n, ds, Marginal::Cauchy, derive_seed(seed, 0))?;
                if ds == d {
                    return Ok(heavy);
                }
                let rest = gen_iid_coordinates(
                    n,
                    d - ds,
                    Marginal::Normal { mean: 0.0, var: 1.0 },
                    derive_seed(seed, 1),
                )?;
                hstack(&[heavy, rest])
            }),
        ],
        H0 | Outlier | Ex7 | Ex8 | Ex9 | Ex10 => unreachable!(),
    };
    let (data, truth) = concat_segments(&[tau, n - tau], &gens, spec.seed)?;
    Ok(GeneratedScenario {
        data,
        truth,
        spec: spec.clone(),
    })
}

/// `N(0,1)` then `N(4,1)` halves; two positions in each half, away from the
/// half's ends and from each other, are replaced by `N(25,1)` draws.
fn outlier_scenario(spec: &ScenarioSpec, n: usize, tau: usize, d: usize) -> Result<GeneratedScenario> {
    if tau < 6 || n - tau < 6 {
        return Err(Error::BadParameter(
            "outlier scenario needs at least 6 points per half".into(),
        ));
    }
    let gens: [SegmentGen; 2] = [Box::new(normal(d, 0.0, 1.0)), Box::new(normal(d, 4.0, 1.0))];
    let (data, truth) = concat_segments(&[tau, n - tau], &gens, spec.seed)?;
    let mut rng = stream_rng(derive_seed(spec.seed, 99), stream::DATA);
    let mut values = data.as_flat().to_vec();
    for (lo, hi) in [(0, tau), (tau, n)] {
        // interior positions lo+1 ..= hi-2, two of them at distance >= 2
        let inner = hi - lo - 2;
        let picks = loop {
            let p = sample(&mut rng, inner, 2).into_vec();
            if p[0].abs_diff(p[1]) >= 2 {
                break p;
            }
        };
        for p in picks {
            let row = lo + 1 + p;
            for q in 0..d {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                values[row * d + q] = 25.0 + z;
            }
        }
    }
    Ok(GeneratedScenario {
        data: DataSequence::from_flat(values, n, d)?,
        truth,
        spec: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_dim_values() {
        assert_eq!(sparse_dim(200), 34);
        assert_eq!(sparse_dim(1000), 100);
        assert_eq!(sparse_dim(800), 86);
        assert_eq!(sparse_dim(2000), 158);
        assert_eq!(sparse_dim(8), 4);
    }

    #[test]
    fn ids_roundtrip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.id().parse::<Scenario>().unwrap(), sc);
        }
        assert_eq!("ex12".parse::<Scenario>().unwrap(), Scenario::Ex12);
        assert!(matches!("Z".parse::<Scenario>(), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn scenario_a_shape_and_means() {
        let g = build_scenario(&ScenarioSpec::new(Scenario::A, 1)).unwrap();
        assert_eq!((g.data.n(), g.data.d()), (40, 100));
        assert_eq!(g.truth, vec![20]);
        let mean = |lo: usize, hi: usize| {
            (lo..hi).flat_map(|i| g.data.row(i).iter().copied()).sum::<f64>() / ((hi - lo) * 100) as f64
        };
        assert!(mean(0, 20).abs() < 0.1);
        assert!((mean(20, 40) - 0.7).abs() < 0.1);
    }

    #[test]
    fn multi_segment_truths() {
        for (sc, truth, d) in [
            (Scenario::Ex7, vec![15, 30, 45], 250),
            (Scenario::Ex8, vec![15, 30, 45], 250),
            (Scenario::Ex9, vec![20, 40], 250),
            (Scenario::Ex10, vec![20, 40], 250),
        ] {
            let g = build_scenario(&ScenarioSpec::new(sc, 2)).unwrap();
            assert_eq!(g.truth, truth);
            assert_eq!(g.data.d(), d);
            for w in g.truth.windows(2) {
                assert!(w[1] - w[0] >= 5);
            }
        }
    }

    #[test]
    fn ex8_scales() {
        let g = build_scenario(&ScenarioSpec::new(Scenario::Ex8, 3)).unwrap();
        let var = |lo: usize| {
            (lo..lo + 15)
                .flat_map(|i| g.data.row(i).iter().map(|x| x * x))
                .sum::<f64>()
                / (15.0 * 250.0)
        };
        for (k, lo) in [0, 15, 30, 45].into_iter().enumerate() {
            let expect = (1.0f64 / 20.0).powi(k as i32);
            assert!((var(lo) / expect - 1.0).abs() < 0.1, "{k}");
        }
    }

    #[test]
    fn ex9_norms() {
        let g = build_scenario(&ScenarioSpec::new(Scenario::Ex9, 4)).unwrap();
        for i in 0..60 {
            let seg = i / 20 + 1;
            let head: f64 = g.data.row(i)[..50].iter().map(|x| x * x).sum::<f64>().sqrt();
            let tail: f64 = g.data.row(i)[50..].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(head >= 2.0 * (seg as f64 - 1.0) - 1e-9 && head <= 2.0 * seg as f64 - 1.0 + 1e-9);
            assert!(tail <= 5.0 + 1e-9);
        }
    }

    #[test]
    fn h0_and_tau() {
        let g = build_scenario(&ScenarioSpec::new(Scenario::H0, 5)).unwrap();
        assert!(g.truth.is_empty());
        assert_eq!((g.data.n(), g.data.d()), (40, 100));
        let g = build_scenario(&ScenarioSpec::new(Scenario::Ex1, 5).with_tau(10)).unwrap();
        assert_eq!(g.truth, vec![10]);
        assert!(build_scenario(&ScenarioSpec::new(Scenario::Ex1, 5).with_tau(40)).is_err());
        assert!(build_scenario(&ScenarioSpec::new(Scenario::Ex7, 5).with_tau(10)).is_err());
        let g = build_scenario(&ScenarioSpec::new(Scenario::Ex12, 5)).unwrap();
        assert_eq!((g.data.n(), g.truth.clone()), (160, vec![80]));
    }

    #[test]
    fn outlier_layout() {
        for seed in 0..20 {
            let g = build_scenario(&ScenarioSpec::new(Scenario::Outlier, seed)).unwrap();
            assert_eq!(g.truth, vec![20]);
            let big: Vec<usize> = (0..40).filter(|&i| g.data.row(i)[0] > 15.0).collect();
            assert_eq!(big.len(), 4, "{seed}");
            assert_eq!(big.iter().filter(|&&i| i < 20).count(), 2);
            for &i in &big {
                assert!(![0, 19, 20, 39].contains(&i));
            }
            for w in big.windows(2) {
                assert!(w[1] - w[0] >= 2);
            }
        }
    }

    #[test]
    fn determinism() {
        for sc in Scenario::ALL {
            let spec = ScenarioSpec {
                d: Some(60),
                ..ScenarioSpec::new(sc, 7)
            };
            let a = build_scenario(&spec).unwrap();
            let b = build_scenario(&spec).unwrap();
            assert_eq!(a, b, "{sc}");
        }
    }
}
