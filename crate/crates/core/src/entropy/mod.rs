//! Generalized entropies, dissimilarity functions, the maps between them,
//! conjugates, Bregman divergences and numeric Bayes risks.
//!
//! An entropy `H` is concave on `Delta_m`. A dissimilarity `f` is convex on
//! the nonnegative orthant of dimension `m-1`. The two are related by
//! `H_f(eta) = -eta_m f(eta_1/eta_m, ..., eta_{m-1}/eta_m)` and
//! `f_H(t) = -t_dot H(t_1/t_dot, ..., t_{m-1}/t_dot, 1/t_dot)`, where
//! `t_dot = 1 + sum t_j`.

mod conjugate;
mod named;

use std::sync::Arc;

pub use conjugate::{conjugate_cw, conjugate_numeric, conjugate_numeric_with, ConjugateConfig};
pub use named::*;

use crate::error::{invalid, Error, Result};
use crate::loss::{ActionSampler, Loss, LossTable};
use crate::numeric::{compass_search, Domain};
use crate::simplex::{expectation, simplex_mesh, CostMatrix, Margin, ProbVector};

/// Scale `c` used for the `0 f(x/0) = lim c f(x/c)` boundary convention.
pub const BOUNDARY_C: f64 = 1e-10;

/// A concave generalized entropy on `Delta_m`.
///
/// Inputs are assumed to be valid probability vectors; use the free
/// functions of this module for validated entry points.
pub trait Entropy: Send + Sync {
    fn m(&self) -> usize;

    fn value(&self, eta: &[f64]) -> f64;

    /// A fixed element of the superdifferential at `q`, normalized so that
    /// `q . g = H(q)` (the gradient of the degree-one homogeneous extension).
    fn supergradient(&self, q: &[f64]) -> Vec<f64>;

    /// Whether `H` is differentiable in the relative interior.
    fn is_smooth(&self) -> bool;

    fn label(&self) -> String;
}

/// A convex dissimilarity function on the orthant of dimension `m-1`.
pub trait Dissimilarity: Send + Sync {
    fn dim(&self) -> usize;

    /// `f(t)`; may be `+inf`.
    fn value(&self, t: &[f64]) -> f64;

    /// A fixed element of the subdifferential at `t`.
    fn subgradient(&self, t: &[f64]) -> Vec<f64>;

    fn label(&self) -> String;
}

macro_rules! forward {
    ($ty:ty) => {
        impl<E: Entropy + ?Sized> Entropy for $ty {
            fn m(&self) -> usize {
                (**self).m()
            }
            fn value(&self, eta: &[f64]) -> f64 {
                (**self).value(eta)
            }
            fn supergradient(&self, q: &[f64]) -> Vec<f64> {
                (**self).supergradient(q)
            }
            fn is_smooth(&self) -> bool {
                (**self).is_smooth()
            }
            fn label(&self) -> String {
                (**self).label()
            }
        }
    };
}
forward!(&E);
forward!(Box<E>);
forward!(Arc<E>);

macro_rules! forward_dis {
    ($ty:ty) => {
        impl<D: Dissimilarity + ?Sized> Dissimilarity for $ty {
            fn dim(&self) -> usize {
                (**self).dim()
            }
            fn value(&self, t: &[f64]) -> f64 {
                (**self).value(t)
            }
            fn subgradient(&self, t: &[f64]) -> Vec<f64> {
                (**self).subgradient(t)
            }
            fn label(&self) -> String {
                (**self).label()
            }
        }
    };
}
forward_dis!(&D);
forward_dis!(Box<D>);
forward_dis!(Arc<D>);

/// A dissimilarity given by closures.
pub struct FnDissimilarity<F, G> {
    pub dim: usize,
    pub f: F,
    pub grad: G,
    pub label: String,
}

impl<F, G> Dissimilarity for FnDissimilarity<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, t: &[f64]) -> f64 {
        (self.f)(t)
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        (self.grad)(t)
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// `H_f` built from a dissimilarity.
#[derive(Debug, Clone)]
pub struct EntropyFromDissimilarity<D> {
    pub f: D,
}

impl<D: Dissimilarity> EntropyFromDissimilarity<D> {
    /// `(eta_1/eta_m, ..., eta_{m-1}/eta_m)` and the scale `eta_m`, using
    /// the boundary scale when `eta_m = 0`.
    fn ratio(eta: &[f64]) -> (Vec<f64>, f64) {
        let m = eta.len();
        let c = if eta[m - 1] > 0.0 {
            eta[m - 1]
        } else {
            BOUNDARY_C
        };
        (eta[..m - 1].iter().map(|x| x / c).collect(), c)
    }
}

impl<D: Dissimilarity> Entropy for EntropyFromDissimilarity<D> {
    fn m(&self) -> usize {
        self.f.dim() + 1
    }
    fn value(&self, eta: &[f64]) -> f64 {
        let (u, c) = Self::ratio(eta);
        -c * self.f.value(&u)
    }
    fn supergradient(&self, q: &[f64]) -> Vec<f64> {
        let (u, _) = Self::ratio(q);
        let fu = self.f.value(&u);
        let g = self.f.subgradient(&u);
        let ug: f64 = u.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut out: Vec<f64> = g.iter().map(|x| -x).collect();
        out.push(ug - fu);
        out
    }
    fn is_smooth(&self) -> bool {
        false
    }
    fn label(&self) -> String {
        format!("H[{}]", self.f.label())
    }
}

/// `f_H` built from an entropy.
#[derive(Debug, Clone)]
pub struct DissimilarityFromEntropy<E> {
    pub h: E,
}

impl<E: Entropy> DissimilarityFromEntropy<E> {
    fn point(t: &[f64]) -> (Vec<f64>, f64) {
        let dot = 1.0 + t.iter().sum::<f64>();
        let mut p: Vec<f64> = t.iter().map(|x| x / dot).collect();
        p.push(1.0 / dot);
        (p, dot)
    }
}

impl<E: Entropy> Dissimilarity for DissimilarityFromEntropy<E> {
    fn dim(&self) -> usize {
        self.h.m() - 1
    }
    fn value(&self, t: &[f64]) -> f64 {
        let (p, dot) = Self::point(t);
        -dot * self.h.value(&p)
    }
    fn subgradient(&self, t: &[f64]) -> Vec<f64> {
        let (p, _) = Self::point(t);
        let g = self.h.supergradient(&p);
        // Re-homogenize in case `g` is only a supergradient on the simplex.
        let shift = self.h.value(&p) - expectation(&p, &g);
        g[..g.len() - 1].iter().map(|x| -(x + shift)).collect()
    }
    fn label(&self) -> String {
        format!("f[{}]", self.h.label())
    }
}

/// `H_f`: the entropy of a dissimilarity.
pub fn entropy_from_dissimilarity<D: Dissimilarity>(f: D) -> EntropyFromDissimilarity<D> {
    EntropyFromDissimilarity { f }
}

/// `f_H`: the dissimilarity of an entropy.
pub fn dissimilarity_from_entropy<E: Entropy>(h: E) -> DissimilarityFromEntropy<E> {
    DissimilarityFromEntropy { h }
}

/// `1 - max_k eta_k`.
pub fn entropy_zero_one(eta: &ProbVector) -> f64 {
    ZeroOneEntropy { m: eta.m() }.value(eta)
}

/// `min_k eta^T C_k`.
pub fn entropy_cost_weighted(eta: &ProbVector, cost: &CostMatrix) -> Result<f64> {
    if eta.m() != cost.m() {
        return invalid(format!(
            "dimension mismatch: eta has {} entries, cost matrix is {}x{}",
            eta.m(),
            cost.m(),
            cost.m()
        ));
    }
    Ok(CostWeightedEntropy { cost: cost.clone() }.value(eta))
}

/// The `L_beta` entropy, raw or rescaled.
pub fn entropy_lbeta(eta: &ProbVector, beta: f64, rescaled: bool) -> Result<f64> {
    Ok(LBetaEntropy::new(eta.m(), beta, rescaled)?.value(eta))
}

/// Numeric Bayes risk `inf_a sum_j eta_j L(j, a)` over the sampled actions,
/// followed by a local refinement from the best sample.
pub fn entropy_of_loss<L: Loss + ?Sized>(
    loss: &L,
    sampler: &ActionSampler,
    eta: &ProbVector,
) -> Result<f64> {
    if eta.m() != loss.num_classes() {
        return invalid("dimension mismatch between loss and eta");
    }
    let table = LossTable::new(loss, sampler);
    if table.is_empty() {
        return invalid("empty action sample");
    }
    Ok(table.infimum(eta, true))
}

/// Default action sampler for a loss: a simplex mesh (`m <= 3`) or
/// Dirichlet draws for scoring rules, a `[-3, 3]` box mesh for margins.
pub fn default_sampler<L: Loss + ?Sized>(loss: &L) -> ActionSampler {
    let m = loss.num_classes();
    match loss.domain() {
        Domain::Simplex => {
            if m <= 3 {
                ActionSampler::SimplexMesh { n: 200 }
            } else {
                ActionSampler::Dirichlet { n: 20_000, seed: 0 }
            }
        }
        _ => {
            let d = loss.action_dim().max(1);
            let points = match d {
                1 => 601,
                2 => 121,
                3 => 41,
                _ => 13,
            };
            ActionSampler::Box {
                lo: -3.0,
                hi: 3.0,
                points,
            }
        }
    }
}

/// Bregman divergence `H(q) - H(eta) - (q - eta)^T g(q)` with the fixed
/// supergradient selection; terms with a zero coefficient are skipped.
pub fn bregman<E: Entropy + ?Sized>(h: &E, eta: &ProbVector, q: &ProbVector) -> Result<f64> {
    if eta.m() != h.m() || q.m() != h.m() {
        return invalid("dimension mismatch in bregman");
    }
    let g = h.supergradient(q);
    let lin: f64 = q
        .iter()
        .zip(eta.iter())
        .zip(&g)
        .filter(|((a, b), _)| a != b)
        .map(|((a, b), gi)| (a - b) * gi)
        .sum();
    Ok(h.value(q) - h.value(eta) - lin)
}

/// The conjugate `sup_{eta in Delta_m} gamma^T eta + H(eta)` on a simplex
/// mesh with local refinement.
pub struct SimplexConjugate<E> {
    h: E,
    mesh: Vec<Vec<f64>>,
    values: Vec<f64>,
    step: f64,
}

impl<E: Entropy> SimplexConjugate<E> {
    /// Mesh resolution: `n` intervals per barycentric axis.
    pub fn new(h: E, n: usize) -> Self {
        let mesh = simplex_mesh(h.m(), n);
        let values = mesh.iter().map(|e| h.value(e)).collect();
        SimplexConjugate {
            h,
            mesh,
            values,
            step: 1.0 / n as f64,
        }
    }

    pub fn entropy(&self) -> &E {
        &self.h
    }

    pub fn eval(&self, gamma: &[f64]) -> f64 {
        let dot = |e: &[f64]| e.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>();
        let mut best = (0, f64::NEG_INFINITY);
        for (i, (e, hv)) in self.mesh.iter().zip(&self.values).enumerate() {
            let v = dot(e) + hv;
            if v > best.1 {
                best = (i, v);
            }
        }
        let res = compass_search(
            |e| -(dot(e) + self.h.value(e)),
            &self.mesh[best.0],
            self.step,
            Domain::Simplex,
            1e-12,
            20_000,
        );
        best.1.max(-res.value)
    }
}

/// The over-parameterized loss `L_H(j, gamma) = -gamma_j + sup_eta
/// {gamma^T eta + H(eta)}` with actions `gamma in R^m`.
pub struct DuchiLoss<E> {
    conj: SimplexConjugate<E>,
}

impl<E: Entropy> DuchiLoss<E> {
    pub fn new(h: E, mesh_n: usize) -> Self {
        DuchiLoss {
            conj: SimplexConjugate::new(h, mesh_n),
        }
    }
}

impl<E: Entropy> Loss for DuchiLoss<E> {
    fn num_classes(&self) -> usize {
        self.conj.h.m()
    }
    fn action_dim(&self) -> usize {
        self.conj.h.m()
    }
    fn domain(&self) -> Domain {
        Domain::Euclidean
    }
    fn loss(&self, j: usize, a: &[f64]) -> f64 {
        self.conj.eval(a) - a[j]
    }
    fn losses(&self, a: &[f64]) -> Vec<f64> {
        let c = self.conj.eval(a);
        a.iter().map(|g| c - g).collect()
    }
    fn name(&self) -> String {
        format!("duchi[{}]", self.conj.h.label())
    }
}

/// `L_H(j, gamma)` with a default mesh resolution.
pub fn loss_from_entropy_duchi<E: Entropy>(h: E, j: usize, gamma: &Margin) -> Result<f64> {
    let m = h.m();
    if gamma.len() != m || j >= m {
        return Err(Error::InvalidInput(format!(
            "need a gamma of length {m} and label below {m}"
        )));
    }
    let n = match m {
        2 => 1000,
        3 => 100,
        4 => 30,
        _ => 10,
    };
    Ok(DuchiLoss::new(h, n).loss(j, gamma))
}
