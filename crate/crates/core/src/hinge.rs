//! Hinge-like convex margin losses sharing the zero-one (or cost-weighted)
//! entropy, their prediction mappings and subgradients.
//!
//! Labels are 0-based; `m-1` is the reference class whose margin is implied
//! by `tilde_tau_m = 1 - sum tau_k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::loss::Loss;
use crate::numeric::Domain;
use crate::simplex::{CostMatrix, Margin};

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Two-class hinge loss: `max(0, 1 - tau)` for label 0, `max(0, tau)` for
/// label 1.
pub fn hinge2(j: usize, tau: f64) -> f64 {
    if j == 0 {
        pos(1.0 - tau)
    } else {
        pos(tau)
    }
}

/// `(C lambda)_j` for `lambda` in the simplex.
pub fn cw2(cost: &CostMatrix, j: usize, lambda: &[f64]) -> f64 {
    (0..cost.m()).map(|k| cost.get(j, k) * lambda[k]).sum()
}

/// `1 - tau_j - sum_{k != j} (tau_k)_+` for `j < m-1`.
fn tau_m_j(j: usize, tau: &[f64]) -> f64 {
    1.0 - tau[j]
        - tau
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, t)| pos(*t))
            .sum::<f64>()
}

/// Cost-weighted hinge-like loss with actions `tau in R^(m-1)`.
pub fn cw3(cost: &CostMatrix, j: usize, tau: &[f64]) -> f64 {
    let m = cost.m();
    if j < m - 1 {
        cost.get(j, m - 1) * pos(tau_m_j(j, tau))
            + (0..m - 1)
                .filter(|&k| k != j)
                .map(|k| cost.get(j, k) * pos(tau[k]))
                .sum::<f64>()
    } else {
        (0..m - 1).map(|k| cost.get(m - 1, k) * pos(tau[k])).sum()
    }
}

/// Zero-one specialization of [`cw3`].
pub fn zo3(j: usize, tau: &[f64]) -> f64 {
    let m = tau.len() + 1;
    let others: f64 = tau
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, t)| pos(*t))
        .sum();
    if j < m - 1 {
        (1.0 - tau[j]).max(others)
    } else {
        others
    }
}

/// Reparametrized Lee-Lin-Wahba loss with actions `tau in R^(m-1)`.
pub fn llw2(j: usize, tau: &[f64]) -> f64 {
    let m = tau.len() + 1;
    let others: f64 = tau
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, t)| pos(*t))
        .sum();
    if j < m - 1 {
        others + pos(1.0 - tau.iter().sum::<f64>())
    } else {
        others
    }
}

/// Lee-Lin-Wahba loss `sum_{k != j} (1 + gamma_k)_+` on sum-zero `gamma`.
pub fn llw(j: usize, gamma: &[f64]) -> Result<f64> {
    let s: f64 = gamma.iter().sum();
    if s.abs() > 1e-9 {
        return invalid(format!("LLW scores must sum to zero, got {s}"));
    }
    if j >= gamma.len() {
        return invalid("label out of range");
    }
    Ok(llw_unchecked(j, gamma))
}

fn llw_unchecked(j: usize, gamma: &[f64]) -> f64 {
    gamma
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, g)| pos(1.0 + g))
        .sum()
}

/// `tilde_tau = (tau, 1 - sum tau)`.
pub fn predict_tilde(tau: &[f64]) -> Vec<f64> {
    let mut v = tau.to_vec();
    v.push(1.0 - tau.iter().sum::<f64>());
    v
}

/// `tau_dag = (tau, 1 - sum (tau_k)_+)`.
pub fn predict_dag(tau: &[f64]) -> Vec<f64> {
    let mut v = tau.to_vec();
    v.push(1.0 - tau.iter().map(|t| pos(*t)).sum::<f64>());
    v
}

/// Indices of `v` sorted by value descending; ties keep index order.
fn order_desc(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    idx
}

/// All `m` values `S_tau^(j)` from one sort.
///
/// With the sorted values `v_0 >= ... >= v_{m-1}`, prefix sums `P` and `j`
/// at sorted position `p`, the term using the top `r` other values is
/// `(v_p + P_r - 1)/(r+1)` for `r <= p` (lines in `v_p`, queried by a
/// monotone convex hull) and `(P_{r+1} - 1)/(r+1)` for `r > p` (a suffix
/// maximum).
pub fn zo4_s_all(tau_tilde: &[f64]) -> Vec<f64> {
    let m = tau_tilde.len();
    let ord = order_desc(tau_tilde);
    let v: Vec<f64> = ord.iter().map(|&i| tau_tilde[i]).collect();
    let mut prefix = vec![0.0; m + 1];
    for k in 0..m {
        prefix[k + 1] = prefix[k] + v[k];
    }
    // suffix[p] = max over r in p..=m-2 of (P_{r+1} - 1)/(r+1), 0-based p.
    let mut suffix = vec![f64::NEG_INFINITY; m + 1];
    for r in (0..m.saturating_sub(1)).rev() {
        suffix[r] = suffix[r + 1].max((prefix[r + 1] - 1.0) / (r + 1) as f64);
    }
    // Upper envelope of lines y = (x + P_r - 1)/(r+1) with decreasing slopes.
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut head = 0usize;
    let mut out = vec![0.0; m];
    for p in 0..m {
        // Line r = p: the top r other values all sit before position p.
        if p <= m.saturating_sub(2) {
            let r = p;
            let line = (1.0 / (r + 1) as f64, (prefix[r] - 1.0) / (r + 1) as f64);
            while hull.len() >= head + 2 {
                let (a1, b1) = hull[hull.len() - 2];
                let (a2, b2) = hull[hull.len() - 1];
                // Middle line is useless if the new one overtakes the first
                // before the middle does.
                if (b2 - b1) * (a2 - line.0) <= (line.1 - b2) * (a1 - a2) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(line);
            head = head.min(hull.len() - 1);
        }
        let x = v[p];
        while head + 1 < hull.len() {
            let (a0, b0) = hull[head];
            let (a1, b1) = hull[head + 1];
            if a1 * x + b1 >= a0 * x + b0 {
                head += 1;
            } else {
                break;
            }
        }
        let (a, b) = hull[head];
        let best = (a * x + b).max(suffix[p + 1]);
        out[ord[p]] = best.max(0.0);
    }
    out
}

/// `S_tau^(j)` by sorting the other components for each `j` separately.
pub fn zo4_s_reference(tau_tilde: &[f64]) -> Vec<f64> {
    let m = tau_tilde.len();
    (0..m)
        .map(|j| {
            let mut others: Vec<f64> = tau_tilde
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, v)| *v)
                .collect();
            others.sort_by(|a, b| b.total_cmp(a));
            let mut best = 0.0f64;
            let mut acc = tau_tilde[j];
            for (r, o) in others.iter().enumerate() {
                best = best.max((acc - 1.0) / (r + 1) as f64);
                acc += o;
            }
            best
        })
        .collect()
}

/// Sorted-average hinge loss `1 - tilde_tau_j + S_tau^(j)` for every label.
pub fn zo4_all(tau: &[f64]) -> Vec<f64> {
    let t = predict_tilde(tau);
    zo4_s_all(&t)
        .into_iter()
        .zip(&t)
        .map(|(s, tj)| 1.0 - tj + s)
        .collect()
}

/// `L^zo4(j, tau)`.
pub fn zo4(j: usize, tau: &[f64]) -> f64 {
    zo4_all(tau)[j]
}

/// `max(0, max_k (top-k sum - 1)/k)` over `k = 1..=kmax`.
fn global_s(v: &[f64], kmax: usize, with_zero: bool) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut best = if with_zero { 0.0 } else { f64::NEG_INFINITY };
    let mut acc = 0.0;
    for (k, x) in sorted.iter().enumerate().take(kmax) {
        acc += x;
        best = best.max((acc - 1.0) / (k + 1) as f64);
    }
    best
}

/// Duchi-Khosravi-Ruan loss reparametrized on `tau in R^(m-1)`.
pub fn dkr2(j: usize, tau: &[f64]) -> f64 {
    let t = predict_tilde(tau);
    1.0 - t[j] + global_s(&t, t.len() - 1, true)
}

/// Duchi-Khosravi-Ruan loss `1 - gamma_j + S_gamma` on `gamma in R^m`.
pub fn dkr(j: usize, gamma: &[f64]) -> f64 {
    1.0 - gamma[j] + global_s(gamma, gamma.len(), false)
}

/// `sigma_L(gamma) = -(L(1, gamma), ..., L(m, gamma))`.
pub fn sigma_l<L: Loss + ?Sized>(loss: &L, gamma: &[f64]) -> Vec<f64> {
    loss.losses(gamma).into_iter().map(|v| -v).collect()
}

/// The hinge-like families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HingeKind {
    Hin,
    Cw2,
    Cw3,
    Zo3,
    Llw,
    Llw2,
    Zo4,
    Dkr,
    Dkr2,
}

impl HingeKind {
    pub const ALL: [HingeKind; 9] = [
        HingeKind::Hin,
        HingeKind::Cw2,
        HingeKind::Cw3,
        HingeKind::Zo3,
        HingeKind::Llw,
        HingeKind::Llw2,
        HingeKind::Zo4,
        HingeKind::Dkr,
        HingeKind::Dkr2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HingeKind::Hin => "hin",
            HingeKind::Cw2 => "cw2",
            HingeKind::Cw3 => "cw3",
            HingeKind::Zo3 => "zo3",
            HingeKind::Llw => "llw",
            HingeKind::Llw2 => "llw2",
            HingeKind::Zo4 => "zo4",
            HingeKind::Dkr => "dkr",
            HingeKind::Dkr2 => "dkr2",
        }
    }

    /// Families whose action is `tau in R^(m-1)`.
    pub fn uses_tau(self) -> bool {
        matches!(
            self,
            HingeKind::Hin
                | HingeKind::Cw3
                | HingeKind::Zo3
                | HingeKind::Llw2
                | HingeKind::Zo4
                | HingeKind::Dkr2
        )
    }
}

impl fmt::Display for HingeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HingeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HingeKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown hinge family {s:?}")))
    }
}

/// A hinge-like loss with its action space.
#[derive(Debug, Clone)]
pub struct HingeLoss {
    kind: HingeKind,
    m: usize,
    cost: CostMatrix,
}

impl HingeLoss {
    /// Zero-one version of the family.
    pub fn new(kind: HingeKind, m: usize) -> Result<Self> {
        if m < 2 {
            return invalid("hinge losses need m >= 2");
        }
        if kind == HingeKind::Hin && m != 2 {
            return invalid("the two-class hinge loss needs m = 2");
        }
        Ok(HingeLoss {
            kind,
            m,
            cost: CostMatrix::zero_one(m),
        })
    }

    /// Cost-weighted version; only `cw2` and `cw3` accept a general cost.
    pub fn with_cost(kind: HingeKind, cost: CostMatrix) -> Result<Self> {
        if !matches!(kind, HingeKind::Cw2 | HingeKind::Cw3) {
            return invalid(format!("family {kind} does not take a cost matrix"));
        }
        Ok(HingeLoss {
            kind,
            m: cost.m(),
            cost,
        })
    }

    pub fn kind(&self) -> HingeKind {
        self.kind
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    /// Checked evaluation.
    pub fn eval(&self, j: usize, action: &Margin) -> Result<f64> {
        if j >= self.m || action.len() != self.action_dim() {
            return invalid(format!(
                "{}: need label < {} and action of length {}",
                self.kind,
                self.m,
                self.action_dim()
            ));
        }
        if self.kind == HingeKind::Llw {
            return llw(j, action);
        }
        Ok(self.loss(j, action))
    }

    /// A subgradient of `L(j, .)` at `a`. At kinks the active piece chosen by
    /// the evaluation order is used.
    pub fn subgradient(&self, j: usize, a: &[f64]) -> Vec<f64> {
        let d = a.len();
        let ind = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };
        match self.kind {
            HingeKind::Hin => {
                if j == 0 {
                    vec![if a[0] < 1.0 { -1.0 } else { 0.0 }]
                } else {
                    vec![ind(a[0])]
                }
            }
            HingeKind::Cw2 => (0..self.m).map(|k| self.cost.get(j, k)).collect(),
            HingeKind::Cw3 | HingeKind::Zo3 => {
                let c = &self.cost;
                let m = self.m;
                let mut g = vec![0.0; d];
                if j < m - 1 {
                    let active = ind(tau_m_j(j, a));
                    g[j] = -c.get(j, m - 1) * active;
                    for k in (0..d).filter(|&k| k != j) {
                        g[k] = ind(a[k]) * (c.get(j, k) - c.get(j, m - 1) * active);
                    }
                } else {
                    for k in 0..d {
                        g[k] = c.get(m - 1, k) * ind(a[k]);
                    }
                }
                g
            }
            HingeKind::Llw2 => {
                let slack = ind(1.0 - a.iter().sum::<f64>());
                (0..d)
                    .map(|k| {
                        let own = if k != j { ind(a[k]) } else { 0.0 };
                        if j < self.m - 1 {
                            own - slack
                        } else {
                            own
                        }
                    })
                    .collect()
            }
            HingeKind::Llw => (0..d)
                .map(|k| if k != j { ind(1.0 + a[k]) } else { 0.0 })
                .collect(),
            HingeKind::Zo4 | HingeKind::Dkr2 => {
                let t = predict_tilde(a);
                let m = t.len();
                // Gradient in tilde coordinates, then chain through
                // tilde_tau_m = 1 - sum tau.
                let mut gt = vec![0.0; m];
                gt[j] -= 1.0;
                let (members, r) = if self.kind == HingeKind::Zo4 {
                    zo4_active(&t, j)
                } else {
                    dkr2_active(&t)
                };
                for i in members {
                    gt[i] += 1.0 / r as f64;
                }
                (0..d).map(|k| gt[k] - gt[m - 1]).collect()
            }
            HingeKind::Dkr => {
                let mut g = vec![0.0; d];
                g[j] -= 1.0;
                let ord = order_desc(a);
                let mut best = (f64::NEG_INFINITY, 1);
                let mut acc = 0.0;
                for (k, &i) in ord.iter().enumerate() {
                    acc += a[i];
                    let v = (acc - 1.0) / (k + 1) as f64;
                    if v > best.0 {
                        best = (v, k + 1);
                    }
                }
                for &i in &ord[..best.1] {
                    g[i] += 1.0 / best.1 as f64;
                }
                g
            }
        }
    }
}

/// Members and size of the maximizing average in `S_tau^(j)` (empty when
/// the zero term wins).
fn zo4_active(t: &[f64], j: usize) -> (Vec<usize>, usize) {
    let m = t.len();
    let mut others: Vec<usize> = (0..m).filter(|&k| k != j).collect();
    others.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
    let mut best = (0.0, 0usize);
    let mut acc = t[j];
    for r in 0..m - 1 {
        let v = (acc - 1.0) / (r + 1) as f64;
        if v > best.0 {
            best = (v, r + 1);
        }
        acc += t[others[r]];
    }
    if best.1 == 0 {
        return (Vec::new(), 1);
    }
    let mut members = vec![j];
    members.extend_from_slice(&others[..best.1 - 1]);
    (members, best.1)
}

fn dkr2_active(t: &[f64]) -> (Vec<usize>, usize) {
    let ord = order_desc(t);
    let mut best = (0.0, 0usize);
    let mut acc = 0.0;
    for (k, &i) in ord.iter().enumerate().take(t.len() - 1) {
        acc += t[i];
        let v = (acc - 1.0) / (k + 1) as f64;
        if v > best.0 {
            best = (v, k + 1);
        }
    }
    if best.1 == 0 {
        return (Vec::new(), 1);
    }
    (ord[..best.1].to_vec(), best.1)
}

impl Loss for HingeLoss {
    fn num_classes(&self) -> usize {
        self.m
    }
    fn action_dim(&self) -> usize {
        match self.kind {
            HingeKind::Cw2 | HingeKind::Llw | HingeKind::Dkr => self.m,
            _ => self.m - 1,
        }
    }
    fn domain(&self) -> Domain {
        match self.kind {
            HingeKind::Cw2 => Domain::Simplex,
            HingeKind::Llw => Domain::SumZero,
            _ => Domain::Euclidean,
        }
    }
    fn loss(&self, j: usize, a: &[f64]) -> f64 {
        match self.kind {
            HingeKind::Hin => hinge2(j, a[0]),
            HingeKind::Cw2 => cw2(&self.cost, j, a),
            HingeKind::Cw3 => cw3(&self.cost, j, a),
            HingeKind::Zo3 => zo3(j, a),
            HingeKind::Llw => llw_unchecked(j, a),
            HingeKind::Llw2 => llw2(j, a),
            HingeKind::Zo4 => zo4(j, a),
            HingeKind::Dkr => dkr(j, a),
            HingeKind::Dkr2 => dkr2(j, a),
        }
    }
    fn losses(&self, a: &[f64]) -> Vec<f64> {
        if self.kind == HingeKind::Zo4 {
            zo4_all(a)
        } else {
            (0..self.m).map(|j| self.loss(j, a)).collect()
        }
    }
    fn name(&self) -> String {
        self.kind.name().into()
    }
}
