//! Closed-form generalized entropies and dissimilarity functions.
//!
//! Every supergradient returned here is the gradient of the degree-one
//! homogeneous extension of `H`, so that `eta . g = H(eta)`.

use serde::{Deserialize, Serialize};

use super::{Dissimilarity, Entropy};
use crate::error::{invalid, Result};
use crate::simplex::{argmax_lowest, argmin_lowest, CostMatrix};

/// Window around `beta in {0, 1, inf}` that routes to the limiting formula.
pub const BETA_LIMIT_WINDOW: f64 = 1e-8;

/// `x log x` with `0 log 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// The `t_tilde = (t, 1)` extension used by dissimilarity functions.
#[inline]
pub(crate) fn extend_one(t: &[f64]) -> Vec<f64> {
    let mut v = t.to_vec();
    v.push(1.0);
    v
}

fn power_norm(x: &[f64], beta: f64) -> f64 {
    x.iter().map(|v| v.powf(beta)).sum::<f64>().powf(1.0 / beta)
}

/// Classifies `beta` for the `L_beta` family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaRegime {
    Zero,
    One,
    Infinity,
    General(f64),
}

impl BetaRegime {
    pub fn of(beta: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return invalid(format!("beta must be nonnegative, got {beta}"));
        }
        Ok(if beta < BETA_LIMIT_WINDOW {
            BetaRegime::Zero
        } else if (beta - 1.0).abs() < BETA_LIMIT_WINDOW {
            BetaRegime::One
        } else if beta.is_infinite() || beta > 1.0 / BETA_LIMIT_WINDOW {
            BetaRegime::Infinity
        } else {
            BetaRegime::General(beta)
        })
    }
}

/// Univariate convex functions `f0` generating two-class and pairwise rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F0Base {
    /// `t log t - (1+t) log(1+t)`: the likelihood (log) loss.
    Likelihood,
    /// `(sqrt t - 1)^2`: the exponential loss.
    Exponential,
    /// `-log(t) / 2`: the asymmetric calibration loss.
    Calibration,
    /// `(t log t - log t) / 2`: the symmetric calibration loss.
    CalibrationSymmetric,
}

impl F0Base {
    pub const ALL: [F0Base; 4] = [
        F0Base::Likelihood,
        F0Base::Exponential,
        F0Base::Calibration,
        F0Base::CalibrationSymmetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            F0Base::Likelihood => "likelihood",
            F0Base::Exponential => "exponential",
            F0Base::Calibration => "calibration",
            F0Base::CalibrationSymmetric => "calibration_symmetric",
        }
    }

    pub fn f0(self, t: f64) -> f64 {
        match self {
            F0Base::Likelihood => xlogx(t) - xlogx(1.0 + t),
            F0Base::Exponential => (t.sqrt() - 1.0).powi(2),
            F0Base::Calibration => -0.5 * t.ln(),
            F0Base::CalibrationSymmetric => 0.5 * (xlogx(t) - t.ln()),
        }
    }

    pub fn f0_prime(self, t: f64) -> f64 {
        match self {
            F0Base::Likelihood => (t / (1.0 + t)).ln(),
            F0Base::Exponential => 1.0 - 1.0 / t.sqrt(),
            F0Base::Calibration => -0.5 / t,
            F0Base::CalibrationSymmetric => 0.5 * (t.ln() + 1.0 - 1.0 / t),
        }
    }

    pub fn f0_second(self, t: f64) -> f64 {
        match self {
            F0Base::Likelihood => 1.0 / (t * (1.0 + t)),
            F0Base::Exponential => 0.5 * t.powf(-1.5),
            F0Base::Calibration => 0.5 / (t * t),
            F0Base::CalibrationSymmetric => 0.5 * (1.0 / t + 1.0 / (t * t)),
        }
    }

    /// Whether the induced losses stay bounded below at the simplex boundary.
    pub fn bounded_below(self) -> bool {
        matches!(self, F0Base::Likelihood | F0Base::Exponential)
    }
}

/// Perspective `y f0(x / y)` with the `0 f0(x/0)` limit convention.
fn perspective(base: F0Base, x: f64, y: f64) -> f64 {
    if y > 0.0 {
        y * base.f0(x / y)
    } else {
        let c = super::BOUNDARY_C;
        c * base.f0(x / c)
    }
}

// ---------------------------------------------------------------------------
// Entropies
// ---------------------------------------------------------------------------

/// `H^zo(eta) = 1 - max_k eta_k`.
#[derive(Debug, Clone)]
pub struct ZeroOneEntropy {
    pub m: usize,
}

impl Entropy for ZeroOneEntropy {
    fn m(&self) -> usize {
        self.m
    }
    fn value(&self, eta: &[f64]) -> f64 {
        1.0 - eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        let k = argmax_lowest(q);
        (0..self.m)
            .map(|j| if j == k { 0.0 } else { 1.0 })
            .collect()
    }
    fn is_smooth(&self) -> bool {
        false
    }
    fn label(&self) -> String {
        "zero_one".into()
    }
}

/// `H^cw(eta) = min_k eta^T C_k`.
#[derive(Debug, Clone)]
pub struct CostWeightedEntropy {
    pub cost: CostMatrix,
}

impl CostWeightedEntropy {
    fn column_risks(&self, eta: &[f64]) -> Vec<f64> {
        (0..self.cost.m())
            .map(|k| self.cost.column_risk(eta, k))
            .collect()
    }
}

impl Entropy for CostWeightedEntropy {
    fn m(&self) -> usize {
        self.cost.m()
    }
    fn value(&self, eta: &[f64]) -> f64 {
        self.column_risks(eta)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        let k = argmin_lowest(&self.column_risks(q));
        (0..self.cost.m()).map(|j| self.cost.get(j, k)).collect()
    }
    fn is_smooth(&self) -> bool {
        false
    }
    fn label(&self) -> String {
        "cost_weighted".into()
    }
}

/// Shannon entropy `-sum eta log eta`.
#[derive(Debug, Clone)]
pub struct ShannonEntropy {
    pub m: usize,
}

impl Entropy for ShannonEntropy {
    fn m(&self) -> usize {
        self.m
    }
    fn value(&self, eta: &[f64]) -> f64 {
        -eta.iter().map(|&x| xlogx(x)).sum::<f64>()
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        q.iter().map(|x| -x.ln()).collect()
    }
    fn is_smooth(&self) -> bool {
        true
    }
    fn label(&self) -> String {
        "shannon".into()
    }
}

/// The `L_beta` entropies, raw (`+-||eta||_beta`) or rescaled to vanish at
/// vertices and equal one at the uniform vector.
#[derive(Debug, Clone)]
pub struct LBetaEntropy {
    m: usize,
    regime: BetaRegime,
    rescaled: bool,
}

impl LBetaEntropy {
    pub fn new(m: usize, beta: f64, rescaled: bool) -> Result<Self> {
        if m < 2 {
            return invalid("L_beta entropy needs m >= 2");
        }
        let regime = BetaRegime::of(beta)?;
        if !rescaled && !matches!(regime, BetaRegime::General(_)) {
            return invalid(
                "raw L_beta entropy is undefined at beta in {0, 1, inf}; use the rescaled form",
            );
        }
        Ok(LBetaEntropy {
            m,
            regime,
            rescaled,
        })
    }

    pub fn regime(&self) -> BetaRegime {
        self.regime
    }

    /// `m^(1/beta - 1) - 1`, the rescaling denominator.
    fn denom(&self, beta: f64) -> f64 {
        (self.m as f64).powf(1.0 / beta - 1.0) - 1.0
    }
}

impl Entropy for LBetaEntropy {
    fn m(&self) -> usize {
        self.m
    }
    fn value(&self, eta: &[f64]) -> f64 {
        let m = self.m as f64;
        match self.regime {
            BetaRegime::Zero => m * geometric_mean(eta),
            BetaRegime::One => -eta.iter().map(|&x| xlogx(x)).sum::<f64>() / m.ln(),
            BetaRegime::Infinity => {
                (1.0 - eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max)) / (1.0 - 1.0 / m)
            }
            BetaRegime::General(beta) => {
                let n = power_norm(eta, beta);
                if self.rescaled {
                    (n - 1.0) / self.denom(beta)
                } else if beta < 1.0 {
                    n
                } else {
                    -n
                }
            }
        }
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        let m = self.m as f64;
        match self.regime {
            BetaRegime::Zero => {
                let g = geometric_mean(q);
                q.iter().map(|x| g / x).collect()
            }
            BetaRegime::One => q.iter().map(|x| -x.ln() / m.ln()).collect(),
            BetaRegime::Infinity => {
                let k = argmax_lowest(q);
                (0..self.m)
                    .map(|j| if j == k { 0.0 } else { 1.0 / (1.0 - 1.0 / m) })
                    .collect()
            }
            BetaRegime::General(beta) => {
                let n = power_norm(q, beta);
                let raw: Vec<f64> = q.iter().map(|x| (x / n).powf(beta - 1.0)).collect();
                if self.rescaled {
                    let d = self.denom(beta);
                    raw.into_iter().map(|r| (r - 1.0) / d).collect()
                } else if beta < 1.0 {
                    raw
                } else {
                    raw.into_iter().map(|r| -r).collect()
                }
            }
        }
    }
    fn is_smooth(&self) -> bool {
        !matches!(self.regime, BetaRegime::Infinity)
    }
    fn label(&self) -> String {
        let b = match self.regime {
            BetaRegime::Zero => "0".to_string(),
            BetaRegime::One => "1".to_string(),
            BetaRegime::Infinity => "inf".to_string(),
            BetaRegime::General(b) => format!("{b}"),
        };
        if self.rescaled {
            format!("lbeta_rescaled(beta={b})")
        } else {
            format!("lbeta(beta={b})")
        }
    }
}

/// `(prod x_j)^(1/m)`, zero if any entry is zero.
pub(crate) fn geometric_mean(x: &[f64]) -> f64 {
    if x.contains(&0.0) {
        return 0.0;
    }
    (x.iter().map(|v| v.ln()).sum::<f64>() / x.len() as f64).exp()
}

/// Entropy of a two-class rule generated by `f0`: `-eta_2 f0(eta_1/eta_2)`.
#[derive(Debug, Clone)]
pub struct TwoClassEntropy {
    pub base: F0Base,
}

impl Entropy for TwoClassEntropy {
    fn m(&self) -> usize {
        2
    }
    fn value(&self, eta: &[f64]) -> f64 {
        -perspective(self.base, eta[0], eta[1])
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        let u = q[0] / q[1];
        let b = self.base;
        vec![-b.f0_prime(u), u * b.f0_prime(u) - b.f0(u)]
    }
    fn is_smooth(&self) -> bool {
        true
    }
    fn label(&self) -> String {
        format!("two_class_{}", self.base.name())
    }
}

/// Entropy of the pairwise asymmetric rule: `-sum_{k<m} eta_m f0(eta_k/eta_m)`.
#[derive(Debug, Clone)]
pub struct PairwiseAsymmetricEntropy {
    pub m: usize,
    pub base: F0Base,
}

impl Entropy for PairwiseAsymmetricEntropy {
    fn m(&self) -> usize {
        self.m
    }
    fn value(&self, eta: &[f64]) -> f64 {
        let last = eta[self.m - 1];
        -eta[..self.m - 1]
            .iter()
            .map(|&x| perspective(self.base, x, last))
            .sum::<f64>()
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        let b = self.base;
        let last = q[self.m - 1];
        let mut g: Vec<f64> = q[..self.m - 1]
            .iter()
            .map(|&x| -b.f0_prime(x / last))
            .collect();
        let gm = q[..self.m - 1]
            .iter()
            .map(|&x| {
                let u = x / last;
                u * b.f0_prime(u) - b.f0(u)
            })
            .sum();
        g.push(gm);
        g
    }
    fn is_smooth(&self) -> bool {
        true
    }
    fn label(&self) -> String {
        format!("pairwise_asymmetric_{}", self.base.name())
    }
}

/// Entropy of the pairwise symmetric rule:
/// `-sum_i sum_{j != i} eta_i f0(eta_j/eta_i)`.
#[derive(Debug, Clone)]
pub struct PairwiseSymmetricEntropy {
    pub m: usize,
    pub base: F0Base,
}

impl Entropy for PairwiseSymmetricEntropy {
    fn m(&self) -> usize {
        self.m
    }
    fn value(&self, eta: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                if i != j {
                    s += perspective(self.base, eta[j], eta[i]);
                }
            }
        }
        -s
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        let b = self.base;
        (0..self.m)
            .map(|i| {
                -(0..self.m)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let r = q[j] / q[i];
                        b.f0(r) - r * b.f0_prime(r) + b.f0_prime(q[i] / q[j])
                    })
                    .sum::<f64>()
            })
            .collect()
    }
    fn is_smooth(&self) -> bool {
        true
    }
    fn label(&self) -> String {
        format!("pairwise_symmetric_{}", self.base.name())
    }
}

/// `H(eta) + sum_j c_j eta_j`: the entropy of a loss shifted by the
/// per-label constants `c`.
#[derive(Debug, Clone)]
pub struct ShiftedEntropy<E> {
    pub inner: E,
    pub shift: Vec<f64>,
}

impl<E: Entropy> Entropy for ShiftedEntropy<E> {
    fn m(&self) -> usize {
        self.inner.m()
    }
    fn value(&self, eta: &[f64]) -> f64 {
        self.inner.value(eta) + eta.iter().zip(&self.shift).map(|(e, c)| e * c).sum::<f64>()
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        self.inner
            .supergradient(q)
            .into_iter()
            .zip(&self.shift)
            .map(|(g, c)| g + c)
            .collect()
    }
    fn is_smooth(&self) -> bool {
        self.inner.is_smooth()
    }
    fn label(&self) -> String {
        self.inner.label()
    }
}

// ---------------------------------------------------------------------------
// Dissimilarities
// ---------------------------------------------------------------------------

/// Dissimilarity dual to Shannon entropy: `sum_j t_j log(t_j / t_dot)` with
/// `t_m = 1`.
#[derive(Debug, Clone)]
pub struct ShannonDissimilarity {
    pub m: usize,
}

impl Dissimilarity for ShannonDissimilarity {
    fn dim(&self) -> usize {
        self.m - 1
    }
    fn value(&self, t: &[f64]) -> f64 {
        let tt = extend_one(t);
        let dot: f64 = tt.iter().sum();
        tt.iter().map(|&x| xlogx(x)).sum::<f64>() - xlogx(dot)
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        let dot = 1.0 + t.iter().sum::<f64>();
        t.iter().map(|x| (x / dot).ln()).collect()
    }
    fn label(&self) -> String {
        "shannon".into()
    }
}

/// Dissimilarity dual to `H^zo`: `max(t_tilde) - t_dot`, i.e.
/// `-min(t, 1)` for two classes.
#[derive(Debug, Clone)]
pub struct ZeroOneDissimilarity {
    pub m: usize,
}

impl Dissimilarity for ZeroOneDissimilarity {
    fn dim(&self) -> usize {
        self.m - 1
    }
    fn value(&self, t: &[f64]) -> f64 {
        let mx = t.iter().cloned().fold(1.0, f64::max);
        mx - 1.0 - t.iter().sum::<f64>()
    }
    /// `-1{t <= 1}` componentwise when no entry exceeds one; otherwise the
    /// vertex subgradient of the lowest-index largest entry.
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        let mut g = vec![-1.0; t.len()];
        if t.iter().any(|x| *x > 1.0) {
            g[argmax_lowest(t)] = 0.0;
        }
        g
    }
    fn label(&self) -> String {
        "zero_one".into()
    }
}

/// Dissimilarity dual to `H^cw`: `-min_k C_k^T t_tilde`.
#[derive(Debug, Clone)]
pub struct CostWeightedDissimilarity {
    pub cost: CostMatrix,
}

impl CostWeightedDissimilarity {
    fn column_risks(&self, t: &[f64]) -> Vec<f64> {
        let tt = extend_one(t);
        (0..self.cost.m())
            .map(|k| self.cost.column_risk(&tt, k))
            .collect()
    }
}

impl Dissimilarity for CostWeightedDissimilarity {
    fn dim(&self) -> usize {
        self.cost.m() - 1
    }
    fn value(&self, t: &[f64]) -> f64 {
        -self
            .column_risks(t)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        let k = argmin_lowest(&self.column_risks(t));
        (0..self.dim()).map(|j| -self.cost.get(j, k)).collect()
    }
    fn label(&self) -> String {
        "cost_weighted".into()
    }
}

/// Dissimilarity of the `L_beta` family (raw or rescaled, with limits).
#[derive(Debug, Clone)]
pub struct LBetaDissimilarity {
    m: usize,
    regime: BetaRegime,
    rescaled: bool,
}

impl LBetaDissimilarity {
    pub fn new(m: usize, beta: f64, rescaled: bool) -> Result<Self> {
        let e = LBetaEntropy::new(m, beta, rescaled)?;
        Ok(LBetaDissimilarity {
            m,
            regime: e.regime,
            rescaled,
        })
    }
}

impl Dissimilarity for LBetaDissimilarity {
    fn dim(&self) -> usize {
        self.m - 1
    }
    fn value(&self, t: &[f64]) -> f64 {
        let tt = extend_one(t);
        let dot: f64 = tt.iter().sum();
        let m = self.m as f64;
        match self.regime {
            BetaRegime::Zero => -m * geometric_mean(&tt),
            BetaRegime::One => ShannonDissimilarity { m: self.m }.value(t) / m.ln(),
            BetaRegime::Infinity => ZeroOneDissimilarity { m: self.m }.value(t) / (1.0 - 1.0 / m),
            BetaRegime::General(beta) => {
                let n = power_norm(&tt, beta);
                if self.rescaled {
                    (dot - n) / (m.powf(1.0 / beta - 1.0) - 1.0)
                } else if beta < 1.0 {
                    -n
                } else {
                    n
                }
            }
        }
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        let tt = extend_one(t);
        let m = self.m as f64;
        match self.regime {
            BetaRegime::Zero => {
                let g = geometric_mean(&tt);
                t.iter().map(|x| -g / x).collect()
            }
            BetaRegime::One => ShannonDissimilarity { m: self.m }
                .subgradient(t)
                .into_iter()
                .map(|g| g / m.ln())
                .collect(),
            BetaRegime::Infinity => ZeroOneDissimilarity { m: self.m }
                .subgradient(t)
                .into_iter()
                .map(|g| g / (1.0 - 1.0 / m))
                .collect(),
            BetaRegime::General(beta) => {
                let n = power_norm(&tt, beta);
                let raw = t.iter().map(|x| (x / n).powf(beta - 1.0));
                if self.rescaled {
                    let d = m.powf(1.0 / beta - 1.0) - 1.0;
                    raw.map(|r| (1.0 - r) / d).collect()
                } else if beta < 1.0 {
                    raw.map(|r| -r).collect()
                } else {
                    raw.collect()
                }
            }
        }
    }
    fn label(&self) -> String {
        format!("lbeta(rescaled={})", self.rescaled)
    }
}

/// `f0(t)` itself as a two-class dissimilarity.
#[derive(Debug, Clone)]
pub struct TwoClassDissimilarity {
    pub base: F0Base,
}

impl Dissimilarity for TwoClassDissimilarity {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, t: &[f64]) -> f64 {
        self.base.f0(t[0])
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        vec![self.base.f0_prime(t[0])]
    }
    fn label(&self) -> String {
        format!("two_class_{}", self.base.name())
    }
}

/// Additive pairwise dissimilarity `sum_k f0(t_k)`.
#[derive(Debug, Clone)]
pub struct PairwiseAsymmetricDissimilarity {
    pub m: usize,
    pub base: F0Base,
}

impl Dissimilarity for PairwiseAsymmetricDissimilarity {
    fn dim(&self) -> usize {
        self.m - 1
    }
    fn value(&self, t: &[f64]) -> f64 {
        t.iter().map(|&x| self.base.f0(x)).sum()
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        t.iter().map(|&x| self.base.f0_prime(x)).collect()
    }
    fn label(&self) -> String {
        format!("pairwise_asymmetric_{}", self.base.name())
    }
}

/// Symmetrized pairwise dissimilarity `sum_{l != k} u_l f0(u_k / u_l)`
/// with `u = (t, 1)`.
#[derive(Debug, Clone)]
pub struct PairwiseSymmetricDissimilarity {
    pub m: usize,
    pub base: F0Base,
}

impl Dissimilarity for PairwiseSymmetricDissimilarity {
    fn dim(&self) -> usize {
        self.m - 1
    }
    fn value(&self, t: &[f64]) -> f64 {
        let u = extend_one(t);
        let mut s = 0.0;
        for l in 0..self.m {
            for k in 0..self.m {
                if l != k {
                    s += perspective(self.base, u[k], u[l]);
                }
            }
        }
        s
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        let u = extend_one(t);
        let b = self.base;
        (0..self.m - 1)
            .map(|i| {
                (0..self.m)
                    .filter(|&k| k != i)
                    .map(|k| {
                        let r = u[k] / u[i];
                        b.f0(r) - r * b.f0_prime(r) + b.f0_prime(u[i] / u[k])
                    })
                    .sum()
            })
            .collect()
    }
    fn label(&self) -> String {
        format!("pairwise_symmetric_{}", self.base.name())
    }
}

/// `f(t) - sum_j c_j t_tilde_j`: the dissimilarity of an entropy shifted by
/// per-label constants `c`.
#[derive(Debug, Clone)]
pub struct ShiftedDissimilarity<D> {
    pub inner: D,
    pub shift: Vec<f64>,
}

impl<D: Dissimilarity> Dissimilarity for ShiftedDissimilarity<D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, t: &[f64]) -> f64 {
        let tt = extend_one(t);
        self.inner.value(t) - tt.iter().zip(&self.shift).map(|(x, c)| x * c).sum::<f64>()
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        self.inner
            .subgradient(t)
            .into_iter()
            .zip(&self.shift)
            .map(|(g, c)| g - c)
            .collect()
    }
    fn label(&self) -> String {
        self.inner.label()
    }
}
