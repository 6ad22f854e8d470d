// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Schema tag written into every report.
pub const REPORT_SCHEMA: &str = "hdcpd-report/1";

/// A time-ordered `n × d` matrix of finite observations, row `i` being the
/// observation at time `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSequence {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl DataSequence {
    /// Validate a row-major buffer of `n` rows with `d` columns each.
    pub fn from_flat(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        if d == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if values.len() != n * d {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: n * d,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { values, n, d })
    }

    /// Validate a matrix given as rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        validate_sequence(rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Values of coordinate `q` across time.
    pub fn column(&self, q: usize) -> Vec<f64> {
        self.rows().map(|r| r[q]).collect()
    }

    /// Rows `lo..hi` (0-based, half-open) as a new sequence.
    pub fn slice(&self, lo: usize, hi: usize) -> Result<Self> {
        if hi > self.n || lo > hi {
            return Err(Error::IndexOutOfRange {
                index: hi,
                lo,
                hi: self.n,
            });
        }
        Self::from_flat(self.values[lo * self.d..hi * self.d].to_vec(), hi - lo, self.d)
    }

    /// Keep the given 0-based rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Self::from_flat(values, rows.len(), self.d)
    }

    /// Stack two sequences of equal dimension in time order.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                left: self.d,
                right: other.d,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::from_flat(values, self.n + other.n, self.d)
    }

    /// Per-coordinate robust standardization: subtract the median and divide
    /// by the median absolute deviation. Coordinates with zero MAD are only
    /// centered.
    pub fn standardized(&self) -> Self {
        let mut values = self.values.clone();
        for q in 0..self.d {
            let mut col = self.column(q);
            let med = median(&mut col);
            let mut dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
            let mad = median(&mut dev);
            for i in 0..self.n {
                let v = &mut values[i * self.d + q];
                *v -= med;
                if mad > 0.0 {
                    *v /= mad;
                }
            }
        }
        Self {
            values,
            n: self.n,
            d: self.d,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Validate a raw matrix into a [`DataSequence`].
pub fn validate_sequence<R: AsRef<[f64]>>(rows: &[R]) -> Result<DataSequence> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let d = rows[0].as_ref().len();
    let mut values = Vec::with_capacity(n * d);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != d {
            return Err(Error::RaggedRows {
                row: i,
                expected: d,
                found: r.len(),
            });
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
        values.extend_from_slice(r);
    }
    DataSequence::from_flat(values, n, d)
}

/// Symmetric `n × n` matrix of nonnegative dissimilarities with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DissimilarityMatrix {
    entries: Vec<f64>,
    n: usize,
}

impl DissimilarityMatrix {
    /// Checks symmetry (exact), zero diagonal and finiteness.
    pub fn new(entries: Vec<f64>, n: usize) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::LengthMismatch {
                left: entries.len(),
                right: n * n,
            });
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = entries[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!("entry ({i},{j}) = {v}")));
                }
                if v != entries[j * n + i] {
                    return Err(Error::InvalidMatrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { entries, n })
    }

    /// Build from a function of the lower triangle, mirroring it.
    pub(crate) fn from_lower(n: usize, lower: &[f64]) -> Self {
        let mut entries = vec![0.0; n * n];
        let mut k = 0;
        for i in 1..n {
            for j in 0..i {
                entries[i * n + j] = lower[k];
                entries[j * n + i] = lower[k];
                k += 1;
            }
        }
        Self { entries, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Restriction to the 0-based index set `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                entries.push(self.get(i, j));
            }
        }
        Self { entries, n: m }
    }
}

/// A binary cluster labeling of a sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labeling {
    labels: Vec<u8>,
    n1: usize,
}

impl Labeling {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(Error::InvalidConfig(format!(
                "label at position {pos} is {}, expected 0 or 1",
                labels[pos]
            )));
        }
        let n1 = labels.iter().filter(|&&l| l == 0).count();
        Ok(Self { labels, n1 })
    }

    /// Parse a string of `0`/`1` characters, ignoring whitespace.
    pub fn parse(s: &str) -> Result<Self> {
        let labels = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidConfig(format!("bad label character `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(labels)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of observations labeled 0.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Number of observations labeled 1.
    pub fn n2(&self) -> usize {
        self.labels.len() - self.n1
    }

    pub fn is_constant(&self) -> bool {
        self.n1 == 0 || self.n1 == self.labels.len()
    }

    /// Global 0 ↔ 1 swap.
    pub fn swapped(&self) -> Self {
        Self {
            labels: self.labels.iter().map(|&l| 1 - l).collect(),
            n1: self.n2(),
        }
    }

    /// Indices (0-based) carrying `label`.
    pub fn members(&self, label: u8) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Labels at positions `lo..hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> Self {
        Self::new(self.labels[lo..hi].to_vec()).expect("sub-slice of a valid labeling")
    }
}

impl std::fmt::Display for Labeling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &l in &self.labels {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// One tested segment in a report.
///
/// Time indices are 1-based and inclusive: the segment `[lo, hi]` covers
/// observations `lo..=hi`, and a split `t` means the change happens after
/// observation `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub lo: usize,
    pub hi: usize,
    pub depth: usize,
    pub n1: usize,
    pub n2: usize,
    pub split: Option<usize>,
    pub window_end: Option<usize>,
    pub statistic: Option<f64>,
    pub p_value: f64,
    pub threshold: Option<f64>,
    pub gamma: Option<f64>,
    pub coin: f64,
    pub reject: bool,
    pub null_method: Option<String>,
    pub labels: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub mode: String,
    pub n: usize,
    pub d: usize,
    pub dissimilarity: String,
    pub statistic: String,
    pub impurity: String,
    pub alpha: f64,
    pub seed: u64,
    pub permutations: usize,
    pub null_seed: u64,
    pub exact_cap: u64,
    pub min_gap: Option<usize>,
    pub restarts: usize,
    pub max_iterations: usize,
    pub split_inits: bool,
    pub block_pairing: Option<String>,
    pub standardized: bool,
    pub removed: Vec<Vec<usize>>,
    /// Where the data came from, filled in by front ends.
    #[serde(default)]
    pub input: Option<String>,
    pub version: String,
}

/// Output of a single or multiple change-point analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub schema: String,
    pub changepoints: Vec<usize>,
    pub nodes: Vec<NodeRecord>,
    pub metadata: ReportMetadata,
}

impl ChangePointReport {
    /// Checks the ordering and placement invariants.
    pub fn check_invariants(&self, min_gap: usize) -> Result<()> {
        for w in self.changepoints.windows(2) {
            if w[1] <= w[0] || w[1] - w[0] < min_gap {
                return Err(Error::InvalidConfig(format!(
                    "change-points {} and {} violate ordering or gap {min_gap}",
                    w[0], w[1]
                )));
            }
        }
        for node in &self.nodes {
            if let (true, Some(t)) = (node.reject, node.split) {
                if t < node.lo || t >= node.hi {
                    return Err(Error::InvalidConfig(format!(
                        "split {t} outside segment [{}, {}]",
                        node.lo, node.hi
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
