//! The loss-evaluator abstraction shared by scoring rules and margin losses,
//! plus action samplers used to approximate Bayes risks numerically.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numeric::{compass_search, Domain};
use crate::simplex::{expectation, sample_simplex, simplex_mesh};

/// A loss `L(j, a)` over labels `j in 0..m` and actions `a` in some space.
pub trait Loss: Send + Sync {
    fn num_classes(&self) -> usize;

    /// Length of an action vector.
    fn action_dim(&self) -> usize;

    /// The action space, used to keep local searches feasible.
    fn domain(&self) -> Domain;

    /// `L(j, a)`; may be `+inf`.
    fn loss(&self, j: usize, a: &[f64]) -> f64;

    fn name(&self) -> String;

    /// The vector `(L(0, a), ..., L(m-1, a))`.
    fn losses(&self, a: &[f64]) -> Vec<f64> {
        (0..self.num_classes()).map(|j| self.loss(j, a)).collect()
    }

    /// Expected loss `sum_j eta_j L(j, a)` with `0 * inf = 0`.
    fn risk(&self, eta: &[f64], a: &[f64]) -> f64 {
        expectation(eta, &self.losses(a))
    }
}

macro_rules! forward_loss {
    ($ty:ty) => {
        impl<L: Loss + ?Sized> Loss for $ty {
            fn num_classes(&self) -> usize {
                (**self).num_classes()
            }
            fn action_dim(&self) -> usize {
                (**self).action_dim()
            }
            fn domain(&self) -> Domain {
                (**self).domain()
            }
            fn loss(&self, j: usize, a: &[f64]) -> f64 {
                (**self).loss(j, a)
            }
            fn name(&self) -> String {
                (**self).name()
            }
            fn losses(&self, a: &[f64]) -> Vec<f64> {
                (**self).losses(a)
            }
        }
    };
}

forward_loss!(&L);
forward_loss!(Box<L>);
forward_loss!(Arc<L>);

/// A finite set of candidate actions, optionally followed by local refinement.
#[derive(Debug, Clone)]
pub enum ActionSampler {
    /// Explicit actions.
    Points(Vec<Vec<f64>>),
    /// The mesh of `Delta_d` with `n` intervals per barycentric axis.
    SimplexMesh { n: usize },
    /// A product grid on `[lo, hi]^d` with `points` values per axis.
    Box { lo: f64, hi: f64, points: usize },
    /// `n` uniform draws from `Delta_d`.
    Dirichlet { n: usize, seed: u64 },
}

impl ActionSampler {
    /// The candidate actions for an action space of dimension `d`.
    pub fn points(&self, d: usize) -> Vec<Vec<f64>> {
        match self {
            ActionSampler::Points(p) => p.clone(),
            ActionSampler::SimplexMesh { n } => {
                if *n == 0 {
                    Vec::new()
                } else {
                    simplex_mesh(d, *n)
                }
            }
            ActionSampler::Box { lo, hi, points } => box_grid(d, *lo, *hi, *points),
            ActionSampler::Dirichlet { n, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*n).map(|_| sample_simplex(&mut rng, d)).collect()
            }
        }
    }

    /// Initial step for local refinement from a sampled action.
    pub fn spacing(&self) -> f64 {
        match self {
            ActionSampler::Points(_) => 0.05,
            ActionSampler::SimplexMesh { n } => 1.0 / (*n).max(1) as f64,
            ActionSampler::Box { lo, hi, points } => (hi - lo) / (points.max(&2) - 1) as f64,
            ActionSampler::Dirichlet { n, .. } => 1.0 / (*n as f64).sqrt().max(1.0),
        }
    }
}

/// All points of the product grid `[lo, hi]^d` with `points` values per axis.
pub fn box_grid(d: usize, lo: f64, hi: f64, points: usize) -> Vec<Vec<f64>> {
    if points == 0 || d == 0 {
        return Vec::new();
    }
    let axis: Vec<f64> = if points == 1 {
        vec![lo]
    } else {
        (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect()
    };
    let total = points.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let v = axis[idx % points];
                    idx /= points;
                    v
                })
                .collect()
        })
        .collect()
}

/// Cached loss vectors over a fixed set of actions, for computing many
/// Bayes risks against the same loss.
pub struct LossTable<'a, L: Loss + ?Sized> {
    loss: &'a L,
    actions: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    step: f64,
}

impl<'a, L: Loss + ?Sized> LossTable<'a, L> {
    pub fn new(loss: &'a L, sampler: &ActionSampler) -> Self {
        let actions = sampler.points(loss.action_dim());
        let values = actions.iter().map(|a| loss.losses(a)).collect();
        LossTable {
            loss,
            actions,
            values,
            step: sampler.spacing(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Best sampled action and its risk.
    pub fn grid_min(&self, eta: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, z) in self.values.iter().enumerate() {
            let r = expectation(eta, z);
            if r < best.1 {
                best = (i, r);
            }
        }
        best
    }

    /// Numeric infimum of the risk: grid minimum followed by compass search.
    pub fn infimum(&self, eta: &[f64], refine: bool) -> f64 {
        let (i, r) = self.grid_min(eta);
        if !refine || !r.is_finite() {
            return r;
        }
        let res = compass_search(
            |a| self.loss.risk(eta, a),
            &self.actions[i],
            self.step,
            self.loss.domain(),
            1e-10,
            20_000,
        );
        res.value.min(r)
    }
}
