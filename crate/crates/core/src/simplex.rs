//! Vector types, norms and tie-breaking conventions on the probability simplex.

use std::ops::Deref;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Centralized numerical tolerances.
pub mod tol {
    /// Entries of a constructed probability vector sum to one within this.
    pub const CONSTRUCTION: f64 = 1e-12;
    /// Accepted deviation of an input vector's sum from one.
    pub const INPUT_SUM: f64 = 1e-9;
    /// Accepted negativity of an input entry before it is an error.
    pub const INPUT_NEG: f64 = 1e-12;
    /// Slack below which an inequality check counts as violated.
    pub const VIOLATION: f64 = -1e-9;
    /// Agreement required between numeric infima and closed forms.
    pub const INFIMUM: f64 = 1e-3;
    /// Default clamp floor used by [`super::make_prob`].
    pub const DEFAULT_EPS: f64 = 1e-12;
}

/// A probability vector of length `m >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates `v` and renormalizes it, preserving exact zeros.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        make_prob(&v, 0.0)
    }

    pub fn uniform(m: usize) -> Self {
        ProbVector(vec![1.0 / m as f64; m])
    }

    /// The basis vector `e_j`.
    pub fn vertex(m: usize, j: usize) -> Self {
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        ProbVector(v)
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = crate::Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Vec<f64> {
        p.0
    }
}

/// A finite real vector used as an action: margins `gamma`, `tau`, logits
/// `h`, ratios `u`, conjugate arguments `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin(Vec<f64>);

impl Margin {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return invalid("margin entries must be finite");
        }
        Ok(Margin(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Margin {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An `m x m` cost matrix with zero diagonal and nonnegative entries.
///
/// Entry `(j, k)` is the cost of predicting class `k` when the truth is `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CostMatrix {
    m: usize,
    c: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m < 2 {
            return invalid("cost matrix needs at least two classes");
        }
        let mut c = Vec::with_capacity(m * m);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != m {
                return invalid("cost matrix must be square");
            }
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return invalid("costs must be finite and nonnegative");
            }
            if row[j] != 0.0 {
                return invalid("cost matrix diagonal must be zero");
            }
            if !row.iter().enumerate().any(|(k, x)| k != j && *x > 0.0) {
                return invalid(format!("row {j} has no positive off-diagonal cost"));
            }
            c.extend_from_slice(row);
        }
        Ok(CostMatrix { m, c })
    }

    /// `1 1^T - I`, the zero-one cost matrix.
    pub fn zero_one(m: usize) -> Self {
        let rows = (0..m)
            .map(|j| (0..m).map(|k| if j == k { 0.0 } else { 1.0 }).collect())
            .collect();
        CostMatrix::new(rows).expect("zero-one costs are valid")
    }

    /// Class-weighted costs `C0 1^T - diag(C0)`: every error on true class
    /// `j` costs `c0[j]`.
    pub fn class_weighted(c0: &[f64]) -> Result<Self> {
        let m = c0.len();
        let rows = (0..m)
            .map(|j| (0..m).map(|k| if j == k { 0.0 } else { c0[j] }).collect())
            .collect();
        CostMatrix::new(rows)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.c[j * self.m + k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.c.chunks(self.m).map(|r| r.to_vec()).collect()
    }

    /// `eta^T C_k`, the expected cost of predicting `k`.
    pub fn column_risk(&self, eta: &[f64], k: usize) -> f64 {
        (0..self.m).map(|j| eta[j] * self.get(j, k)).sum()
    }

    /// `C lambda`.
    pub fn times(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|j| (0..self.m).map(|k| self.get(j, k) * lambda[k]).sum())
            .collect()
    }

    /// Row maxima `c_{jM} = max_k c_{jk}`.
    pub fn row_max(&self) -> Vec<f64> {
        self.c
            .chunks(self.m)
            .map(|r| r.iter().cloned().fold(0.0, f64::max))
            .collect()
    }

    /// Entry `(j, k)` of `Cbar = C_M 1^T - C`.
    pub fn cbar(&self, j: usize, k: usize) -> f64 {
        self.row_max()[j] - self.get(j, k)
    }

    /// `Cbar^T v`, whose `k`-th entry is `sum_j (c_{jM} - c_{jk}) v_j`.
    pub fn cbar_t_times(&self, v: &[f64]) -> Vec<f64> {
        let cm = self.row_max();
        (0..self.m)
            .map(|k| (0..self.m).map(|j| (cm[j] - self.get(j, k)) * v[j]).sum())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for CostMatrix {
    type Error = crate::Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        CostMatrix::new(rows)
    }
}

impl From<CostMatrix> for Vec<Vec<f64>> {
    fn from(c: CostMatrix) -> Self {
        c.rows()
    }
}

/// Sum of the two largest absolute entries.
pub fn norm_inf2(b: &[f64]) -> Result<f64> {
    if b.len() < 2 {
        return invalid("norm_inf2 needs at least two entries");
    }
    let (mut a1, mut a2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for x in b.iter().map(|x| x.abs()) {
        if x > a1 {
            a2 = a1;
            a1 = x;
        } else if x > a2 {
            a2 = x;
        }
    }
    Ok(a1 + a2)
}

pub fn norm_l1(b: &[f64]) -> f64 {
    b.iter().map(|x| x.abs()).sum()
}

/// Lowest index attaining the maximum. Panics on an empty slice.
pub fn argmax_lowest(b: &[f64]) -> usize {
    assert!(!b.is_empty(), "argmax of an empty vector");
    let mut best = 0;
    for (i, &x) in b.iter().enumerate().skip(1) {
        if x > b[best] {
            best = i;
        }
    }
    best
}

/// Lowest index attaining the minimum. Panics on an empty slice.
pub fn argmin_lowest(b: &[f64]) -> usize {
    assert!(!b.is_empty(), "argmin of an empty vector");
    let mut best = 0;
    for (i, &x) in b.iter().enumerate().skip(1) {
        if x < b[best] {
            best = i;
        }
    }
    best
}

/// Validates `v`, clamps entries to `[eps, 1]` and renormalizes.
///
/// With `eps = 0` exact zeros are preserved.
pub fn make_prob(v: &[f64], eps: f64) -> Result<ProbVector> {
    if v.len() < 2 {
        return invalid("a probability vector needs m >= 2");
    }
    if !(0.0..1.0).contains(&eps) {
        return invalid("eps must lie in [0, 1)");
    }
    if v.iter().any(|x| !x.is_finite() || *x < -tol::INPUT_NEG) {
        return invalid("probability entries must be finite and nonnegative");
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > tol::INPUT_SUM {
        return invalid(format!("probability entries sum to {s}, not 1"));
    }
    let clamped: Vec<f64> = v.iter().map(|x| x.clamp(eps, 1.0)).collect();
    let s: f64 = clamped.iter().sum();
    Ok(ProbVector(clamped.into_iter().map(|x| x / s).collect()))
}

/// `sum_j eta_j z_j` with the convention `0 * inf = 0`.
pub fn expectation(eta: &[f64], z: &[f64]) -> f64 {
    eta.iter()
        .zip(z)
        .filter(|(e, _)| **e != 0.0)
        .map(|(e, z)| e * z)
        .sum()
}

/// All points of `Delta_m` with coordinates in `{0, 1/n, ..., 1}`.
pub fn simplex_mesh(m: usize, n: usize) -> Vec<Vec<f64>> {
    compositions(m, n, 0)
}

/// Mesh points with every coordinate at least `lo/n`.
pub fn simplex_mesh_interior(m: usize, n: usize, lo: usize) -> Vec<Vec<f64>> {
    compositions(m, n, lo)
}

fn compositions(m: usize, n: usize, lo: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if m == 0 || lo * m > n {
        return out;
    }
    let mut cur = vec![0usize; m];
    fn rec(
        i: usize,
        left: usize,
        lo: usize,
        n: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<f64>>,
    ) {
        let m = cur.len();
        if i == m - 1 {
            cur[i] = left;
            out.push(cur.iter().map(|&k| k as f64 / n as f64).collect());
            return;
        }
        let reserve = lo * (m - 1 - i);
        if left < lo + reserve {
            return;
        }
        for k in lo..=(left - reserve) {
            cur[i] = k;
            rec(i + 1, left - k, lo, n, cur, out);
        }
    }
    rec(0, n, lo, n, &mut cur, &mut out);
    out
}

/// A uniform draw from `Delta_m`.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

/// A symmetric Dirichlet draw; small `alpha` concentrates near the faces.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, m: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive Dirichlet parameter");
    loop {
        let g: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
        let s: f64 = g.iter().sum();
        if s > 0.0 && s.is_finite() {
            return g.into_iter().map(|x| x / s).collect();
        }
    }
}

/// A simplex draw whose coordinates are all at least `floor`.
pub fn sample_simplex_interior<R: Rng + ?Sized>(rng: &mut R, m: usize, floor: f64) -> Vec<f64> {
    let p = sample_simplex(rng, m);
    let scale = 1.0 - floor * m as f64;
    p.into_iter().map(|x| floor + scale * x).collect()
}
