//! Regrets and numerical checks of surrogate regret bounds.
//!
//! Every check produces a [`BoundReport`]: for each sample the signed slack
//! `rhs - lhs` is recorded, slacks below [`SLACK_TOL`] count as violations,
//! and the worst sample is kept as a witness.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::BetaRegime;
use crate::entropy::{default_sampler, entropy_of_loss, Entropy, LBetaEntropy};
use crate::error::{invalid, Error, Result};
use crate::hinge::{cw3, predict_dag, predict_tilde, zo4_all, HingeKind};
use crate::loss::{ActionSampler, Loss};
use crate::numeric::{compass_search, directional_hessian, sum_zero_basis, Domain};
use crate::scoring::{RuleFamily, ScoringRule};
use crate::simplex::{
    argmax_lowest, expectation, norm_inf2, norm_l1, sample_dirichlet, sample_simplex, simplex_mesh,
    simplex_mesh_interior, CostMatrix, ProbVector,
};

/// Slack below which a sample counts as a violation.
pub const SLACK_TOL: f64 = -1e-9;

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Inputs and sides of the worst sample of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub eta: Vec<f64>,
    pub action: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Summary of one inequality checked over many samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub m: usize,
    pub samples: usize,
    /// Smallest `rhs - lhs` seen; `+inf` before any sample.
    pub worst_slack: f64,
    /// Samples with slack below [`SLACK_TOL`] (or a NaN side).
    pub violations: usize,
    pub witness: Option<Witness>,
    /// Elapsed time; kept out of serialized artifacts.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl BoundReport {
    pub fn new(bound_id: impl Into<String>, m: usize) -> Self {
        BoundReport {
            bound_id: bound_id.into(),
            m,
            samples: 0,
            worst_slack: f64::INFINITY,
            violations: 0,
            witness: None,
            wall_time: Duration::ZERO,
        }
    }

    /// Records one sample of `lhs <= rhs`.
    pub fn record(&mut self, lhs: f64, rhs: f64, eta: &[f64], action: &[f64]) {
        self.samples += 1;
        let slack = if lhs.is_nan() || rhs.is_nan() {
            f64::NEG_INFINITY
        } else if lhs == rhs {
            0.0
        } else {
            rhs - lhs
        };
        if slack < SLACK_TOL {
            self.violations += 1;
        }
        if self.witness.is_none() || slack < self.worst_slack {
            self.worst_slack = slack;
            self.witness = Some(Witness {
                eta: eta.to_vec(),
                action: action.to_vec(),
                lhs,
                rhs,
            });
        }
    }

    /// Records an error that must not exceed `tol`; the slack is
    /// `tol - err` and any positive excess counts as a violation.
    pub fn record_error(&mut self, err: f64, tol: f64, eta: &[f64], action: &[f64]) {
        self.samples += 1;
        let slack = if err.is_nan() {
            f64::NEG_INFINITY
        } else {
            tol - err
        };
        if slack < 0.0 {
            self.violations += 1;
        }
        if self.witness.is_none() || slack < self.worst_slack {
            self.worst_slack = slack;
            self.witness = Some(Witness {
                eta: eta.to_vec(),
                action: action.to_vec(),
                lhs: err,
                rhs: tol,
            });
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn timed(mut self, start: Instant) -> Self {
        self.wall_time = start.elapsed();
        self
    }
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// Source of `(eta, action)` pairs for the sweeps.
#[derive(Debug, Clone)]
pub enum PairSampler {
    /// `eta` uniform on the simplex (every fourth draw Dirichlet(0.3), which
    /// reaches near the faces); actions drawn according to the loss domain,
    /// with margins uniform on `[-radius, radius]^d`.
    Random { seed: u64, radius: f64 },
    /// Fixed pairs, used as given.
    Pairs(Vec<(Vec<f64>, Vec<f64>)>),
}

impl PairSampler {
    pub fn random(seed: u64) -> Self {
        PairSampler::Random { seed, radius: 2.0 }
    }

    /// `n` pairs for `m` classes and actions of dimension `d` in `domain`.
    pub fn draw(&self, m: usize, d: usize, domain: Domain, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        match self {
            PairSampler::Pairs(p) => p.iter().take(n.max(1).min(p.len())).cloned().collect(),
            PairSampler::Random { seed, radius } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n)
                    .map(|i| {
                        let eta = if i % 4 == 3 {
                            sample_dirichlet(&mut rng, m, 0.3)
                        } else {
                            sample_simplex(&mut rng, m)
                        };
                        let a = sample_action(&mut rng, d, domain, *radius, i);
                        (eta, a)
                    })
                    .collect()
            }
        }
    }
}

fn sample_action<R: Rng>(rng: &mut R, d: usize, domain: Domain, radius: f64, i: usize) -> Vec<f64> {
    match domain {
        Domain::Simplex => {
            if i % 4 == 1 {
                sample_dirichlet(rng, d, 0.3)
            } else {
                sample_simplex(rng, d)
            }
        }
        Domain::Orthant => (0..d).map(|_| rng.gen_range(0.0..radius)).collect(),
        Domain::Euclidean => (0..d).map(|_| rng.gen_range(-radius..radius)).collect(),
        Domain::SumZero => {
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-radius..radius)).collect();
            let mean = v.iter().sum::<f64>() / d as f64;
            v.into_iter().map(|x| x - mean).collect()
        }
    }
}

// ---------------------------------------------------------------------------
// Regrets
// ---------------------------------------------------------------------------

/// `sum_j eta_j L(j, a) - H(eta)` after a spot check that `H(eta)` agrees
/// with the numeric Bayes risk of `L` within `1e-3`.
pub fn regret<L: Loss + ?Sized, E: Entropy + ?Sized>(
    loss: &L,
    h: &E,
    eta: &ProbVector,
    action: &[f64],
) -> Result<f64> {
    if eta.m() != loss.num_classes() || h.m() != loss.num_classes() {
        return invalid("dimension mismatch between loss, entropy and eta");
    }
    if action.len() != loss.action_dim() {
        return invalid(format!("action must have length {}", loss.action_dim()));
    }
    let hv = h.value(eta);
    let numeric = entropy_of_loss(loss, &default_sampler(loss), eta)?;
    if (numeric - hv).abs() > 1e-3 {
        return Err(Error::Config(format!(
            "entropy {} does not match loss {}: {hv} vs numeric {numeric}",
            h.label(),
            loss.name()
        )));
    }
    let r = loss.risk(eta, action) - hv;
    if r < SLACK_TOL {
        return Err(Error::Config(format!(
            "negative regret {r}: entropy {} exceeds the risk of loss {}",
            h.label(),
            loss.name()
        )));
    }
    Ok(r)
}

/// `sum_j eta_j L(j, a) - H(eta)` without consistency checks.
pub fn regret_unchecked<L: Loss + ?Sized, E: Entropy + ?Sized>(
    loss: &L,
    h: &E,
    eta: &[f64],
    action: &[f64],
) -> f64 {
    loss.risk(eta, action) - h.value(eta)
}

/// Zero-one regret of predicting `argmax pred` (lowest index on ties).
pub fn zero_one_regret(eta: &[f64], pred: &[f64]) -> f64 {
    let mx = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx - eta[argmax_lowest(pred)]
}

/// Cost-weighted regret of predicting `argmax pred`.
pub fn cost_weighted_regret(cost: &CostMatrix, eta: &[f64], pred: &[f64]) -> f64 {
    let k = argmax_lowest(pred);
    let best = (0..cost.m())
        .map(|l| cost.column_risk(eta, l))
        .fold(f64::INFINITY, f64::min);
    cost.column_risk(eta, k) - best
}

fn min_column_risk(cost: &CostMatrix, eta: &[f64]) -> f64 {
    (0..cost.m())
        .map(|l| cost.column_risk(eta, l))
        .fold(f64::INFINITY, f64::min)
}

fn zero_one_entropy(eta: &[f64]) -> f64 {
    1.0 - eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Regret of a scoring rule, `R(eta, q) - H(eta)`.
fn rule_regret(rule: &ScoringRule, h: &dyn Entropy, eta: &[f64], q: &[f64]) -> f64 {
    rule.risk_at(eta, q) - h.value(eta)
}

// ---------------------------------------------------------------------------
// Hinge-like bounds
// ---------------------------------------------------------------------------

/// Checks `m^-1 B^cw(eta, tau_dag) <= B_cw3(eta, tau)` (for `cw3`, or `zo3`
/// with zero-one costs) and `m^-1 B^zo(eta, tilde_tau) <= B_zo4(eta, tau)`.
pub fn check_hinge_bounds(
    variant: HingeKind,
    cost: Option<&CostMatrix>,
    m: usize,
    sampler: &PairSampler,
    n: usize,
) -> Result<BoundReport> {
    let start = Instant::now();
    if m < 2 {
        return invalid("m must be at least 2");
    }
    let cost = match (variant, cost) {
        (HingeKind::Cw3, Some(c)) => {
            if c.m() != m {
                return invalid("cost matrix size differs from m");
            }
            c.clone()
        }
        (HingeKind::Cw3 | HingeKind::Zo3 | HingeKind::Zo4, _) => CostMatrix::zero_one(m),
        (other, _) => return invalid(format!("no hinge bound registered for {other}")),
    };
    let mut report = BoundReport::new(format!("hinge_{variant}"), m);
    for (eta, tau) in sampler.draw(m, m - 1, Domain::Euclidean, n) {
        let (lhs, rhs) = hinge_bound_sides(variant, &cost, &eta, &tau);
        report.record(lhs, rhs, &eta, &tau);
    }
    Ok(report.timed(start))
}

/// Both sides of the hinge bound at one `(eta, tau)`: for `zo4`,
/// `m^-1 B^zo(eta, tilde tau) <= B(eta, tau)`; otherwise
/// `m^-1 B^cw(eta, tau_dag) <= B(eta, tau)` with `cost`.
pub fn hinge_bound_sides(
    variant: HingeKind,
    cost: &CostMatrix,
    eta: &[f64],
    tau: &[f64],
) -> (f64, f64) {
    let m = eta.len();
    let mf = m as f64;
    if variant == HingeKind::Zo4 {
        let z = zo4_all(tau);
        (
            zero_one_regret(eta, &predict_tilde(tau)) / mf,
            expectation(eta, &z) - zero_one_entropy(eta),
        )
    } else {
        let z: Vec<f64> = (0..m).map(|j| cw3(cost, j, tau)).collect();
        (
            cost_weighted_regret(cost, eta, &predict_dag(tau)) / mf,
            expectation(eta, &z) - min_column_risk(cost, eta),
        )
    }
}

/// Prediction mapping used alongside `sigma_L`.
pub type Prediction<'a> = &'a dyn Fn(&[f64]) -> Vec<f64>;

/// Checks `m^-1 B^zo(eta, sigma_L(gamma)) <= B_L(eta, gamma)` for a loss
/// whose entropy is the zero-one entropy.
///
/// The loss is first certified on a small simplex mesh (numeric Bayes risk
/// within `1e-3` of `1 - max eta`). With `prediction`, two more reports
/// follow: the order agreement between `prediction` and `sigma_L` (slack
/// `sigma_k - sigma_j` whenever `pred_j < pred_k`), and the same bound with
/// `prediction` in place of `sigma_L`.
pub fn check_general_bound<L: Loss + ?Sized>(
    loss: &L,
    prediction: Option<Prediction<'_>>,
    sampler: &PairSampler,
    n: usize,
) -> Result<Vec<BoundReport>> {
    let start = Instant::now();
    let m = loss.num_classes();
    certify_zero_one(loss)?;
    let mf = m as f64;
    let name = loss.name();
    let mut main = BoundReport::new(format!("general_{name}"), m);
    let mut order = BoundReport::new(format!("order_{name}"), m);
    let mut via_pred = BoundReport::new(format!("general_{name}_pred"), m);
    for (eta, a) in sampler.draw(m, loss.action_dim(), loss.domain(), n) {
        let z = loss.losses(&a);
        let sigma: Vec<f64> = z.iter().map(|v| -v).collect();
        let rhs = expectation(&eta, &z) - zero_one_entropy(&eta);
        main.record(zero_one_regret(&eta, &sigma) / mf, rhs, &eta, &a);
        if let Some(pred) = prediction {
            let p = pred(&a);
            let mut worst = (0.0, 0.0);
            let mut worst_slack = f64::INFINITY;
            for j in 0..m {
                for k in 0..m {
                    if p[j] < p[k] && sigma[k] - sigma[j] < worst_slack {
                        worst_slack = sigma[k] - sigma[j];
                        worst = (sigma[j], sigma[k]);
                    }
                }
            }
            if worst_slack.is_finite() {
                order.record(worst.0, worst.1, &eta, &a);
            } else {
                order.record(0.0, 0.0, &eta, &a);
            }
            via_pred.record(zero_one_regret(&eta, &p) / mf, rhs, &eta, &a);
        }
    }
    let mut out = vec![main.timed(start)];
    if prediction.is_some() {
        out.push(order.timed(start));
        out.push(via_pred.timed(start));
    }
    Ok(out)
}

/// Confirms that the numeric Bayes risk of `loss` matches the zero-one
/// entropy on a coarse simplex mesh.
pub fn certify_zero_one<L: Loss + ?Sized>(loss: &L) -> Result<()> {
    let m = loss.num_classes();
    let sampler = default_sampler(loss);
    let n = if m <= 3 { 4 } else { 2 };
    for eta in simplex_mesh(m, n) {
        let p = ProbVector::new(eta)?;
        let h = entropy_of_loss(loss, &sampler, &p)?;
        let want = zero_one_entropy(&p);
        if (h - want).abs() > 1e-3 {
            return Err(Error::Config(format!(
                "loss {} does not have the zero-one entropy at {:?}: {h} vs {want}",
                loss.name(),
                p.as_slice()
            )));
        }
    }
    Ok(())
}

/// Value-manifold checks on the loss vectors of the sampled actions:
/// membership (`z >= 0` and `sum_j min(z_j, 1) >= m - 1`, slack reported)
/// and recovery of each vertex `1 - e_j` within `1e-3` by a convex
/// combination of sampled loss vectors.
pub fn value_manifold_check<L: Loss + ?Sized>(
    loss: &L,
    actions: &ActionSampler,
) -> Result<Vec<BoundReport>> {
    let start = Instant::now();
    let m = loss.num_classes();
    let pts = actions.points(loss.action_dim());
    if pts.is_empty() {
        return invalid("empty action sample");
    }
    let name = loss.name();
    let mut member = BoundReport::new(format!("manifold_membership_{name}"), m);
    let mut zs = Vec::with_capacity(pts.len());
    for a in &pts {
        let z = loss.losses(a);
        if z.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let capped: f64 = z.iter().map(|v| v.min(1.0)).sum();
        let zmin = z.iter().cloned().fold(f64::INFINITY, f64::min);
        // Both conditions folded into one slack.
        let slack = (capped - (m as f64 - 1.0)).min(zmin);
        member.record(0.0, slack, &z, a);
        zs.push(z);
    }
    let mut vertices = BoundReport::new(format!("manifold_vertices_{name}"), m);
    for j in 0..m {
        let v: Vec<f64> = (0..m).map(|k| if k == j { 0.0 } else { 1.0 }).collect();
        let dist = hull_distance(&zs, &v);
        vertices.record(dist, 1e-3, &v, &[]);
    }
    Ok(vec![member.timed(start), vertices.timed(start)])
}

/// Euclidean distance from `v` to the convex hull of `zs`, by Frank-Wolfe
/// iterations started at the nearest point.
pub fn hull_distance(zs: &[Vec<f64>], v: &[f64]) -> f64 {
    if zs.is_empty() {
        return f64::INFINITY;
    }
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut p = zs
        .iter()
        .min_by(|a, b| d2(a, v).total_cmp(&d2(b, v)))
        .expect("nonempty")
        .clone();
    for _ in 0..2000 {
        let r: Vec<f64> = p.iter().zip(v).map(|(a, b)| a - b).collect();
        if r.iter().all(|x| x.abs() < 1e-15) {
            break;
        }
        let dot = |z: &[f64]| z.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let s = zs
            .iter()
            .min_by(|a, b| dot(a).total_cmp(&dot(b)))
            .expect("nonempty");
        let dir: Vec<f64> = s.iter().zip(&p).map(|(a, b)| a - b).collect();
        let dd: f64 = dir.iter().map(|x| x * x).sum();
        let gap = -dir.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        if dd == 0.0 || gap <= 1e-16 {
            break;
        }
        let alpha = (gap / dd).clamp(0.0, 1.0);
        for (pi, di) in p.iter_mut().zip(&dir) {
            *pi += alpha * di;
        }
    }
    d2(&p, v).sqrt()
}

/// Numeric infimum of the regret relative to the zero-one entropy over
/// sampled actions whose prediction `sigma(a)` selects class `k`; `+inf`
/// when no sampled action does.
pub fn calibration_infimum<L, S>(
    loss: &L,
    sigma: S,
    eta: &ProbVector,
    k: usize,
    actions: &ActionSampler,
) -> Result<f64>
where
    L: Loss + ?Sized,
    S: Fn(&[f64]) -> Vec<f64>,
{
    let m = loss.num_classes();
    if eta.m() != m || k >= m {
        return invalid("dimension mismatch or class out of range");
    }
    let mx = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if eta[k] >= mx {
        return invalid(format!("class {k} is a Bayes class for this eta"));
    }
    let h = zero_one_entropy(eta);
    let mut best = f64::INFINITY;
    for a in actions.points(loss.action_dim()) {
        if argmax_lowest(&sigma(&a)) == k {
            best = best.min(loss.risk(eta, &a) - h);
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Strong convexity and scoring-rule bounds
// ---------------------------------------------------------------------------

/// Minimum over interior mesh points of `x^T (-hess H) x / ||x||_1^2` over
/// sum-zero directions `x`.
///
/// The Hessian is taken by central differences in an orthonormal sum-zero
/// basis `B`; the inner minimum is exact: `1 / max_s sbar^T A^-1 sbar` over
/// sign vectors `s`, with `sbar = B s` and `A` the negated Hessian.
pub fn strong_convexity_modulus<E: Entropy + ?Sized>(h: &E, density: usize) -> Result<f64> {
    if !h.is_smooth() {
        return invalid(format!("entropy {} is not differentiable", h.label()));
    }
    let m = h.m();
    if density < m + 1 {
        return invalid("grid density must exceed m");
    }
    if m > 12 {
        return invalid("sign enumeration limited to m <= 12");
    }
    let basis = sum_zero_basis(m);
    let k = m - 1;
    let signs: Vec<DVector<f64>> = (0..(1usize << (m - 1)))
        .filter_map(|mask| {
            let s: Vec<f64> = (0..m)
                .map(|i| {
                    if i == 0 || mask & (1 << (i - 1)) != 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            if s.iter().all(|x| *x > 0.0) {
                return None;
            }
            Some(DVector::from_iterator(
                k,
                basis
                    .iter()
                    .map(|b| b.iter().zip(&s).map(|(x, y)| x * y).sum::<f64>()),
            ))
        })
        .collect();
    let mut best = f64::INFINITY;
    for eta in simplex_mesh_interior(m, density, 1) {
        let lo = eta.iter().cloned().fold(f64::INFINITY, f64::min);
        let step = (1e-4f64).min(lo / 10.0);
        let hess = directional_hessian(|x| h.value(x), &eta, &basis, step);
        let a = DMatrix::from_row_slice(k, k, &hess).map(|x| -x);
        let Some(chol) = a.clone().cholesky() else {
            return Ok(0.0);
        };
        let worst = signs
            .iter()
            .map(|s| s.dot(&chol.solve(s)))
            .fold(0.0, f64::max);
        best = best.min(1.0 / worst);
    }
    Ok(best)
}

/// Families with a known strong-convexity constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaFamily {
    /// Pairwise symmetric rule with symmetric Beta weight parameter `nu`.
    PairwiseBeta { nu: f64 },
    /// Raw `L_beta` in `m` classes.
    LBeta { beta: f64, m: usize },
}

/// The constant `kappa` with `B_L(eta, q) >= (kappa/2) ||eta - q||_1^2`.
pub fn kappa_constant(family: KappaFamily) -> Result<f64> {
    match family {
        KappaFamily::PairwiseBeta { nu } => {
            if nu.is_finite() && nu <= 0.0 {
                Ok(2.0)
            } else {
                invalid(format!("kappa needs nu <= 0, got {nu}"))
            }
        }
        KappaFamily::LBeta { beta, m } => {
            if !(beta > 0.0 && beta < 1.0) || m < 2 {
                return invalid(format!("kappa needs beta in (0, 1) and m >= 2, got {beta}"));
            }
            if beta >= 0.5 {
                let e = (1.0 - 1.0 / beta) * (2.0 * beta - 1.0);
                Ok((1.0 - beta) * (m as f64).powf(e) * 2f64.powf(2.0 - 2.0 * beta))
            } else {
                Ok((1.0 - beta) * 2f64.powf(1.0 / beta - 1.0))
            }
        }
    }
}

/// `kappa` for a named rule: Pinsker's constant 1 for the likelihood and
/// its two-class version, 1 for the two-class exponential (a shift of raw
/// `L_{1/2}`), 2 for pairwise Beta rules, the `L_beta` constant (divided by
/// the rescaling denominator when rescaled, `1/log m` at `beta = 1`).
pub fn kappa_for_rule(rule: &ScoringRule) -> Result<f64> {
    let m = rule.m();
    match rule.family() {
        RuleFamily::Likelihood => Ok(1.0),
        RuleFamily::TwoClass { base } => match rule.nu() {
            Some(_) => Ok(1.0),
            None => invalid(format!("no kappa for two-class base {}", base.name())),
        },
        RuleFamily::PairwiseSymmetric { .. } => match rule.nu() {
            Some(nu) => kappa_constant(KappaFamily::PairwiseBeta { nu }),
            None => invalid("no kappa for this pairwise base"),
        },
        RuleFamily::PairwiseAsymmetric { .. } => invalid("no kappa for asymmetric pairwise rules"),
        RuleFamily::LBeta { beta, rescaled } => {
            if rescaled && BetaRegime::of(beta)? == BetaRegime::One {
                return Ok(1.0 / (m as f64).ln());
            }
            let k = kappa_constant(KappaFamily::LBeta { beta, m })?;
            if rescaled {
                Ok(k / ((m as f64).powf(1.0 / beta - 1.0) - 1.0))
            } else {
                Ok(k)
            }
        }
    }
}

/// Checks `B_L(eta, q) >= (kappa/2)||eta - q||_1^2` and
/// `(kappa/2) B^zo(eta, q)^2 <= B_L(eta, q)`.
pub fn check_scoring_bounds(
    rule: &ScoringRule,
    kappa: f64,
    sampler: &PairSampler,
    n: usize,
) -> Result<Vec<BoundReport>> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return invalid("kappa must be finite and nonnegative");
    }
    let start = Instant::now();
    let m = rule.m();
    let h = rule.entropy();
    let label = rule.label();
    let mut l1 = BoundReport::new(format!("strong_convexity_{label}"), m);
    let mut zo = BoundReport::new(format!("zero_one_{label}"), m);
    for (eta, q) in sampler.draw(m, m, Domain::Simplex, n) {
        let b = rule_regret(rule, h.as_ref(), &eta, &q);
        let d: Vec<f64> = eta.iter().zip(&q).map(|(a, b)| a - b).collect();
        let n1 = norm_l1(&d);
        l1.record(0.5 * kappa * n1 * n1, b, &eta, &q);
        let bz = zero_one_regret(&eta, &q);
        zo.record(0.5 * kappa * bz * bz, b, &eta, &q);
    }
    Ok(vec![l1.timed(start), zo.timed(start)])
}

// ---------------------------------------------------------------------------
// Cost transformation
// ---------------------------------------------------------------------------

/// `L~(j, a) = c_jM L(j, a) + sum_{k != j} (c_jM - c_jk)(L(k, a) - 1)`.
#[derive(Debug, Clone)]
pub struct CostTransformed<L> {
    pub inner: L,
    pub cost: CostMatrix,
    row_max: Vec<f64>,
}

/// Wraps `loss` in the cost transformation for `cost`.
pub fn cost_transform<L: Loss>(loss: L, cost: &CostMatrix) -> Result<CostTransformed<L>> {
    if loss.num_classes() != cost.m() {
        return invalid("cost matrix size differs from the number of classes");
    }
    Ok(CostTransformed {
        inner: loss,
        row_max: cost.row_max(),
        cost: cost.clone(),
    })
}

impl<L: Loss> CostTransformed<L> {
    fn combine(&self, z: &[f64]) -> Vec<f64> {
        combine_raw(&self.cost, &self.row_max, z)
    }
}

impl<L: Loss> Loss for CostTransformed<L> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }
    fn domain(&self) -> Domain {
        self.inner.domain()
    }
    fn loss(&self, j: usize, a: &[f64]) -> f64 {
        self.combine(&self.inner.losses(a))[j]
    }
    fn losses(&self, a: &[f64]) -> Vec<f64> {
        self.combine(&self.inner.losses(a))
    }
    fn name(&self) -> String {
        format!("cost_transformed_{}", self.inner.name())
    }
}

/// `eta~_j = c_jM eta_j + sum_{k != j} (c_kM - c_kj) eta_k`.
pub fn eta_tilde(cost: &CostMatrix, eta: &[f64]) -> Vec<f64> {
    let cm = cost.row_max();
    let m = cost.m();
    (0..m)
        .map(|j| {
            cm[j] * eta[j]
                + (0..m)
                    .filter(|&k| k != j)
                    .map(|k| (cm[k] - cost.get(k, j)) * eta[k])
                    .sum::<f64>()
        })
        .collect()
}

/// `D(eta) = sum_j sum_{k != j} eta_j (c_jM - c_jk)`.
pub fn d_eta(cost: &CostMatrix, eta: &[f64]) -> f64 {
    let cm = cost.row_max();
    let m = cost.m();
    (0..m)
        .map(|j| {
            eta[j]
                * (0..m)
                    .filter(|&k| k != j)
                    .map(|k| cm[j] - cost.get(j, k))
                    .sum::<f64>()
        })
        .sum()
}

/// `|R_L~(eta, a) - [(1^T eta~) R_L(eta~~, a) - D(eta)]|`.
pub fn risk_identity_check<L: Loss + ?Sized>(
    loss: &L,
    cost: &CostMatrix,
    eta: &ProbVector,
    action: &[f64],
) -> Result<f64> {
    let m = cost.m();
    if loss.num_classes() != m || eta.m() != m || action.len() != loss.action_dim() {
        return invalid("dimension mismatch in risk identity check");
    }
    let z = loss.losses(action);
    let zt = combine_raw(cost, &cost.row_max(), &z);
    let lhs = expectation(eta, &zt);
    let et = eta_tilde(cost, eta);
    let s: f64 = et.iter().sum();
    let ett: Vec<f64> = et.iter().map(|x| x / s).collect();
    let rhs = s * expectation(&ett, &z) - d_eta(cost, eta);
    Ok((lhs - rhs).abs())
}

fn combine_raw(cost: &CostMatrix, row_max: &[f64], z: &[f64]) -> Vec<f64> {
    let m = cost.m();
    (0..m)
        .map(|j| {
            let cm = row_max[j];
            let mut v = if cm != 0.0 { cm * z[j] } else { 0.0 };
            for k in (0..m).filter(|&k| k != j) {
                let w = cm - cost.get(j, k);
                if w != 0.0 {
                    v += w * (z[k] - 1.0);
                }
            }
            v
        })
        .collect()
}

/// `|B_L~(eta, q) - (1^T eta~) B_L(eta~~, q)|` for a scoring rule, with the
/// Bayes risk of `L~` found numerically on a simplex mesh.
pub fn regret_identity_residual(
    rule: &ScoringRule,
    cost: &CostMatrix,
    eta: &ProbVector,
    q: &ProbVector,
) -> Result<f64> {
    let m = rule.m();
    if cost.m() != m || eta.m() != m || q.m() != m {
        return invalid("dimension mismatch in regret identity check");
    }
    let lt = cost_transform(rule.clone(), cost)?;
    let n = match m {
        2 => 400,
        3 => 60,
        _ => 16,
    };
    let sampler = ActionSampler::Points(simplex_mesh_interior(m, n, 1));
    let h_t = entropy_of_loss(&lt, &sampler, eta)?;
    let b_t = lt.risk(eta, q) - h_t;
    let et = eta_tilde(cost, eta);
    let s: f64 = et.iter().sum();
    let ett: Vec<f64> = et.iter().map(|x| x / s).collect();
    let b = rule_regret(rule, rule.entropy().as_ref(), &ett, q);
    Ok((b_t - s * b).abs())
}

// ---------------------------------------------------------------------------
// Misclassification upper bounds
// ---------------------------------------------------------------------------

/// Both sides of `B^zo(eta, q) <= ||eta - q||_inf2` and, with a cost
/// matrix, `B^cw(eta, Cbar^T q) <= ||Cbar^T (eta - q)||_inf2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisclassBounds {
    pub zero_one: (f64, f64),
    pub cost_weighted: Option<(f64, f64)>,
}

pub fn misclass_upper_bounds(
    eta: &ProbVector,
    q: &ProbVector,
    cost: Option<&CostMatrix>,
) -> Result<MisclassBounds> {
    let m = eta.m();
    if q.m() != m || cost.is_some_and(|c| c.m() != m) {
        return invalid("dimension mismatch in misclassification bounds");
    }
    let d: Vec<f64> = eta.iter().zip(q.iter()).map(|(a, b)| a - b).collect();
    let zero_one = (zero_one_regret(eta, q), norm_inf2(&d)?);
    let cost_weighted = match cost {
        Some(c) => Some((
            cost_weighted_regret(c, eta, &c.cbar_t_times(q)),
            norm_inf2(&c.cbar_t_times(&d))?,
        )),
        None => None,
    };
    Ok(MisclassBounds {
        zero_one,
        cost_weighted,
    })
}

/// Sweeps [`misclass_upper_bounds`] over sampled pairs.
pub fn check_misclass_bounds(
    m: usize,
    cost: Option<&CostMatrix>,
    sampler: &PairSampler,
    n: usize,
) -> Result<Vec<BoundReport>> {
    let start = Instant::now();
    let mut zo = BoundReport::new("misclass_zero_one", m);
    let mut cw = BoundReport::new("misclass_cost_weighted", m);
    for (eta, q) in sampler.draw(m, m, Domain::Simplex, n) {
        let e = ProbVector::new(eta)?;
        let qq = ProbVector::new(q)?;
        let b = misclass_upper_bounds(&e, &qq, cost)?;
        zo.record(b.zero_one.0, b.zero_one.1, &e, &qq);
        if let Some((l, r)) = b.cost_weighted {
            cw.record(l, r, &e, &qq);
        }
    }
    let mut out = vec![zo.timed(start)];
    if cost.is_some() {
        out.push(cw.timed(start));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// psi profiles
// ---------------------------------------------------------------------------

/// Kinds of tabulated lower-bound functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PsiKind {
    #[serde(rename = "psi_q")]
    PsiQ,
    #[serde(rename = "psi_underline")]
    PsiUnderline,
    #[serde(rename = "psi_q_C")]
    PsiQC,
    #[serde(rename = "psi_underline_C")]
    PsiUnderlineC,
    #[serde(rename = "psi_BJM")]
    PsiBjm,
    #[serde(rename = "psi_RW")]
    PsiRw,
}

impl PsiKind {
    pub const ALL: [PsiKind; 6] = [
        PsiKind::PsiQ,
        PsiKind::PsiUnderline,
        PsiKind::PsiQC,
        PsiKind::PsiUnderlineC,
        PsiKind::PsiBjm,
        PsiKind::PsiRw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PsiKind::PsiQ => "psi_q",
            PsiKind::PsiUnderline => "psi_underline",
            PsiKind::PsiQC => "psi_q_C",
            PsiKind::PsiUnderlineC => "psi_underline_C",
            PsiKind::PsiBjm => "psi_BJM",
            PsiKind::PsiRw => "psi_RW",
        }
    }

    /// Kinds computed by mesh infima over the simplex.
    pub fn uses_mesh(self) -> bool {
        !matches!(self, PsiKind::PsiRw)
    }
}

impl fmt::Display for PsiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PsiKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PsiKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown psi kind {s:?}")))
    }
}

/// Inputs of a profile beyond the rule.
#[derive(Debug, Clone, Default)]
pub struct PsiParams {
    /// The fixed action for `psi_q` and `psi_q_C`.
    pub q: Option<Vec<f64>>,
    /// The cost matrix for the `C` kinds.
    pub cost: Option<CostMatrix>,
    /// Class weights `(c_10, c_20)` for `psi_RW`.
    pub c0: Option<Vec<f64>>,
    /// Simplex mesh intervals; `None` picks a default for `m`.
    pub mesh: Option<usize>,
}

/// A tabulated profile `t -> psi(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiProfile {
    pub kind: PsiKind,
    pub points: Vec<(f64, f64)>,
    /// Values nondecreasing in `t` within `1e-9`.
    pub monotone: bool,
}

impl PsiProfile {
    fn new(kind: PsiKind, points: Vec<(f64, f64)>) -> Self {
        let monotone = points.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9);
        PsiProfile {
            kind,
            points,
            monotone,
        }
    }

    /// Value at the largest grid point `<= t`, a lower bound for a
    /// nondecreasing profile; `0` below the grid.
    pub fn lookup_floor(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for &(ti, vi) in &self.points {
            if ti <= t + 1e-12 {
                v = vi;
            } else {
                break;
            }
        }
        v
    }
}

/// Default mesh intervals for profile infima.
pub fn default_psi_mesh(m: usize) -> usize {
    match m {
        2 => 200,
        3 => 30,
        _ => 10,
    }
}

/// Tabulates a profile on `t_grid` (sorted ascending).
pub fn psi_profile(
    kind: PsiKind,
    rule: &ScoringRule,
    params: &PsiParams,
    t_grid: &[f64],
) -> Result<PsiProfile> {
    let m = rule.m();
    if t_grid.is_empty() {
        return invalid("empty t grid");
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return invalid("t grid must be sorted");
    }
    let mesh = params.mesh.unwrap_or_else(|| default_psi_mesh(m));
    if kind.uses_mesh() {
        if mesh == 0 {
            return invalid("mesh density must be positive");
        }
        if m > 4 {
            return invalid("mesh-based psi profiles need m <= 4");
        }
    }
    let h = rule.entropy();
    let cost_or_zo = || {
        params
            .cost
            .clone()
            .unwrap_or_else(|| CostMatrix::zero_one(m))
    };
    let need_q = || -> Result<Vec<f64>> {
        let q = params
            .q
            .clone()
            .ok_or_else(|| Error::InvalidInput(format!("{kind} needs q")))?;
        Ok(ProbVector::new(q)?.into_vec())
    };
    let points: Vec<(f64, f64)> = match kind {
        PsiKind::PsiQ | PsiKind::PsiQC => {
            let q = need_q()?;
            let cost = if kind == PsiKind::PsiQC {
                params
                    .cost
                    .clone()
                    .ok_or_else(|| Error::InvalidInput("psi_q_C needs a cost matrix".into()))?
            } else {
                CostMatrix::zero_one(m)
            };
            check_cost(&cost, m)?;
            let dirs = simplex_mesh(m, mesh);
            t_grid
                .iter()
                .map(|&t| (t, psi_at_q(rule, h.as_ref(), &cost, &q, t, &dirs, mesh)))
                .collect()
        }
        PsiKind::PsiUnderline | PsiKind::PsiUnderlineC => {
            let cost = if kind == PsiKind::PsiUnderlineC {
                match (&params.cost, &params.c0) {
                    (Some(c), _) => c.clone(),
                    (None, Some(c0)) => CostMatrix::class_weighted(c0)?,
                    _ => return invalid("psi_underline_C needs a cost matrix or C0"),
                }
            } else {
                cost_or_zo()
            };
            check_cost(&cost, m)?;
            let solver = UnderlineSolver::new(rule, h.as_ref(), &cost, mesh);
            t_grid.iter().map(|&t| (t, solver.eval(t))).collect()
        }
        PsiKind::PsiBjm => {
            if m != 2 {
                return invalid("psi_BJM is a two-class profile");
            }
            let qs = simplex_mesh(2, mesh);
            t_grid
                .iter()
                .map(|&t| (t, psi_bjm(rule, h.as_ref(), &qs, t)))
                .collect()
        }
        PsiKind::PsiRw => {
            if m != 2 {
                return invalid("psi_RW is a two-class profile");
            }
            let c0 = params
                .c0
                .clone()
                .ok_or_else(|| Error::InvalidInput("psi_RW needs C0".into()))?;
            if c0.len() != 2 || c0.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return invalid("C0 must hold two positive weights");
            }
            t_grid
                .iter()
                .map(|&t| (t, psi_rw(rule, h.as_ref(), &c0, t)))
                .collect()
        }
    };
    Ok(PsiProfile::new(kind, points))
}

fn check_cost(cost: &CostMatrix, m: usize) -> Result<()> {
    if cost.m() != m {
        return invalid("cost matrix size differs from m");
    }
    Ok(())
}

fn clamp_prob(p: &mut [f64]) -> bool {
    if p.iter().any(|x| *x < -1e-12 || !x.is_finite()) {
        return false;
    }
    for x in p.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    true
}

/// `B_L(q + s d, q)` on the ray through `target` at the point where
/// `||Cbar^T (eta' - q)||_inf2 = t`; `+inf` when that point leaves the
/// simplex or the ray is degenerate.
fn ray_value(
    rule: &ScoringRule,
    h: &dyn Entropy,
    cost: &CostMatrix,
    q: &[f64],
    target: &[f64],
    t: f64,
) -> f64 {
    let d: Vec<f64> = target.iter().zip(q).map(|(a, b)| a - b).collect();
    let nd = norm_inf2(&cost.cbar_t_times(&d)).unwrap_or(0.0);
    if nd <= 1e-15 {
        return f64::INFINITY;
    }
    let s = t / nd;
    let mut p: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + s * b).collect();
    if !clamp_prob(&mut p) {
        return f64::INFINITY;
    }
    let v = rule_regret(rule, h, &p, q);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// `psi_q(t)` with the norm `||Cbar^T (.)||_inf2` (the identity for
/// zero-one costs). By convexity of `B_L(., q)` along rays the infimum over
/// `||.|| >= t` is attained on `||.|| = t`, so rays through mesh points are
/// searched and the best ray is refined.
fn psi_at_q(
    rule: &ScoringRule,
    h: &dyn Entropy,
    cost: &CostMatrix,
    q: &[f64],
    t: f64,
    dirs: &[Vec<f64>],
    mesh: usize,
) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, target) in dirs.iter().enumerate() {
        let v = ray_value(rule, h, cost, q, target, t);
        if v < best.1 {
            best = (i, v);
        }
    }
    if best.0 == usize::MAX {
        return f64::INFINITY;
    }
    let res = compass_search(
        |x| ray_value(rule, h, cost, q, x, t),
        &dirs[best.0],
        1.0 / mesh as f64,
        Domain::Simplex,
        1e-10,
        5_000,
    );
    best.1.min(res.value)
}

/// Joint infimum over `q'` (subject to `max_j (Cbar^T q')_j <= 1^T Cbar^T
/// q' / 2`) and rays from `q'`.
struct UnderlineSolver<'a> {
    rule: &'a ScoringRule,
    h: &'a dyn Entropy,
    cost: &'a CostMatrix,
    qs: Vec<Vec<f64>>,
    dirs: Vec<Vec<f64>>,
    mesh: usize,
}

impl<'a> UnderlineSolver<'a> {
    fn new(rule: &'a ScoringRule, h: &'a dyn Entropy, cost: &'a CostMatrix, mesh: usize) -> Self {
        let dirs = simplex_mesh(rule.m(), mesh);
        let mut qs: Vec<Vec<f64>> = dirs
            .iter()
            .filter(|q| q_admissible(cost, q))
            .cloned()
            .collect();
        qs.extend(admissible_vertices(cost));
        UnderlineSolver {
            rule,
            h,
            cost,
            qs,
            dirs,
            mesh,
        }
    }

    fn joint(&self, x: &[f64], t: f64) -> f64 {
        let k = self.rule.m() - 1;
        let mut q = x[..k].to_vec();
        q.push(1.0 - x[..k].iter().sum::<f64>());
        let mut e = x[k..].to_vec();
        e.push(1.0 - x[k..].iter().sum::<f64>());
        if !clamp_prob(&mut q) || !clamp_prob(&mut e) || !q_admissible(self.cost, &q) {
            return f64::INFINITY;
        }
        ray_value(self.rule, self.h, self.cost, &q, &e, t)
    }

    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return if self.qs.is_empty() {
                f64::INFINITY
            } else {
                0.0
            };
        }
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for (a, q) in self.qs.iter().enumerate() {
            for (b, e) in self.dirs.iter().enumerate() {
                let v = ray_value(self.rule, self.h, self.cost, q, e, t);
                if v < best.2 {
                    best = (a, b, v);
                }
            }
        }
        if best.0 == usize::MAX {
            return f64::INFINITY;
        }
        let k = self.rule.m() - 1;
        let mut x0 = self.qs[best.0][..k].to_vec();
        x0.extend_from_slice(&self.dirs[best.1][..k]);
        let res = compass_search(
            |x| self.joint(x, t),
            &x0,
            1.0 / self.mesh as f64,
            Domain::Euclidean,
            1e-10,
            20_000,
        );
        best.2.min(res.value)
    }
}

/// Vertices of `{q in Delta_m : (Cbar^T q)_k <= 1^T Cbar^T q / 2 for all
/// k}`, which may be lower-dimensional and missed by a mesh.
fn admissible_vertices(cost: &CostMatrix) -> Vec<Vec<f64>> {
    let m = cost.m();
    let cm = cost.row_max();
    // Rows a with a^T q <= 0.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * m);
    for k in 0..m {
        let mut r = vec![0.0; m];
        r[k] = -1.0;
        rows.push(r);
    }
    for k in 0..m {
        rows.push(
            (0..m)
                .map(|j| {
                    let total: f64 = (0..m).map(|l| cm[j] - cost.get(j, l)).sum();
                    (cm[j] - cost.get(j, k)) - total / 2.0
                })
                .collect(),
        );
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for active in combinations(rows.len(), m - 1) {
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for (i, &r) in active.iter().enumerate() {
            for k in 0..m {
                a[(i, k)] = rows[r][k];
            }
        }
        for k in 0..m {
            a[(m - 1, k)] = 1.0;
        }
        b[m - 1] = 1.0;
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = lu.solve(&b) else { continue };
        let mut q: Vec<f64> = x.iter().cloned().collect();
        if !clamp_prob(&mut q) || !q_admissible(cost, &q) {
            continue;
        }
        if !out
            .iter()
            .any(|p| p.iter().zip(&q).all(|(u, v)| (u - v).abs() < 1e-12))
        {
            out.push(q);
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn q_admissible(cost: &CostMatrix, q: &[f64]) -> bool {
    let v = cost.cbar_t_times(q);
    let total: f64 = v.iter().sum();
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx <= total / 2.0 + 1e-12 * (1.0 + total.abs())
}

/// Two-class `psi^BJM(t)`: the smaller of the regret infima at
/// `eta_1 = (1 + t)/2` over `q_1 <= q_2` and at `eta_1 = (1 - t)/2` over
/// `q_1 >= q_2`.
fn psi_bjm(rule: &ScoringRule, h: &dyn Entropy, qs: &[Vec<f64>], t: f64) -> f64 {
    let side = |eta1: f64, first_small: bool| {
        let eta = [eta1, 1.0 - eta1];
        let ok = |q: &[f64]| {
            if first_small {
                q[0] <= q[1]
            } else {
                q[0] >= q[1]
            }
        };
        let f = |q: &[f64]| {
            if q.iter().any(|x| *x < 0.0) || !ok(q) {
                f64::INFINITY
            } else {
                let v = rule_regret(rule, h, &eta, q);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            }
        };
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, q) in qs.iter().enumerate() {
            let v = f(q);
            if v < best.1 {
                best = (i, v);
            }
        }
        if best.0 == usize::MAX {
            return f64::INFINITY;
        }
        let res = compass_search(
            f,
            &qs[best.0],
            1.0 / qs.len() as f64,
            Domain::Simplex,
            1e-12,
            5_000,
        );
        best.1.min(res.value)
    };
    if !(0.0..=1.0).contains(&t) {
        return f64::INFINITY;
    }
    side((1.0 + t) / 2.0, true).min(side((1.0 - t) / 2.0, false))
}

/// `psi^RW(delta) = B_L^1((c_20 + delta)/(c_10 + c_20), c_20/(c_10 + c_20))`;
/// `+inf` when the first argument leaves `[0, 1]`.
pub fn psi_rw(rule: &ScoringRule, h: &dyn Entropy, c0: &[f64], delta: f64) -> f64 {
    let s = c0[0] + c0[1];
    let e1 = (c0[1] + delta) / s;
    if !(0.0..=1.0).contains(&e1) {
        return f64::INFINITY;
    }
    let q1 = c0[1] / s;
    rule_regret(rule, h, &[e1, 1.0 - e1], &[q1, 1.0 - q1])
}

/// Greatest convex minorant of a tabulated profile (lower convex hull of
/// the finite points, linearly interpolated on the same grid).
pub fn convex_minorant(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let finite: Vec<(f64, f64)> = points.iter().cloned().filter(|p| p.1.is_finite()).collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in finite {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    points
        .iter()
        .map(|&(t, v)| {
            if hull.is_empty() || t < hull[0].0 || t > hull[hull.len() - 1].0 {
                return (t, v);
            }
            let i = hull
                .partition_point(|h| h.0 <= t)
                .max(1)
                .min(hull.len() - 1);
            let (a, b) = (hull[i - 1], hull[i]);
            let w = if b.0 > a.0 {
                (t - a.0) / (b.0 - a.0)
            } else {
                0.0
            };
            (t, a.1 + w * (b.1 - a.1))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cost-weighted bounds for proper scoring rules
// ---------------------------------------------------------------------------

/// Options for [`check_cw_bounds`].
#[derive(Debug, Clone)]
pub struct CwOptions {
    /// Points of the `t` grid of each profile.
    pub grid_points: usize,
    /// Samples also checked against the `W`-set bound (expensive).
    pub w_samples: usize,
    /// Simplex mesh for the profile infima; `None` picks a default.
    pub mesh: Option<usize>,
}

impl Default for CwOptions {
    fn default() -> Self {
        CwOptions {
            grid_points: 201,
            w_samples: 40,
            mesh: None,
        }
    }
}

/// Cost-weighted bounds for a proper rule over sampled `(eta, q)`:
///
/// - `psi(B^cw(eta, q) / 1^T eta~) <= B_L~(eta, q) / 1^T eta~` with the
///   zero-one `psi_underline`;
/// - `psi^C(B^cw(eta, Cbar^T q)) <= B_L(eta, q)` with `psi_underline_C`;
/// - `psi^C_{q^w}(B^cw(eta, Cbar^T q)) <= B_L(eta, q)` for every `w` on a
///   101-point grid of `[0, 1]` that keeps the predicted class, on the first
///   `w_samples` samples;
/// - for `m = 2` class-weighted costs, `min(psi^RW(d), psi^RW(-d)) <=
///   B_L(eta, q)` with `d = B^cw(eta, Cbar^T q)`.
///
/// Profile values are read at the largest grid point below the argument.
pub fn check_cw_bounds(
    rule: &ScoringRule,
    cost: &CostMatrix,
    sampler: &PairSampler,
    n: usize,
    opts: &CwOptions,
) -> Result<Vec<BoundReport>> {
    let start = Instant::now();
    let m = rule.m();
    if m > 4 {
        return invalid("cost-weighted profile checks need m <= 4");
    }
    check_cost(cost, m)?;
    if opts.grid_points < 2 {
        return invalid("profile grid needs at least two points");
    }
    let h = rule.entropy();
    let mesh = opts.mesh.unwrap_or_else(|| default_psi_mesh(m));
    let grid = |tmax: f64| -> Vec<f64> {
        (0..opts.grid_points)
            .map(|i| tmax * i as f64 / (opts.grid_points - 1) as f64)
            .collect()
    };
    let params = PsiParams {
        mesh: Some(mesh),
        ..Default::default()
    };
    let psi_zo = psi_profile(PsiKind::PsiUnderline, rule, &params, &grid(2.0))?;
    let cbar_max = (0..m)
        .flat_map(|j| (0..m).map(move |k| (j, k)))
        .map(|(j, k)| cost.cbar(j, k))
        .fold(0.0, f64::max);
    let params_c = PsiParams {
        cost: Some(cost.clone()),
        mesh: Some(mesh),
        ..Default::default()
    };
    let psi_c = psi_profile(
        PsiKind::PsiUnderlineC,
        rule,
        &params_c,
        &grid(4.0 * cbar_max),
    )?;
    let c0 = class_weights(cost);

    let label = rule.label();
    let mut transformed = BoundReport::new(format!("cw_transformed_{label}"), m);
    let mut independent = BoundReport::new(format!("cw_independent_{label}"), m);
    let mut wset = BoundReport::new(format!("cw_wset_{label}"), m);
    let mut rw = BoundReport::new(format!("cw_two_class_{label}"), m);
    let lt = cost_transform(rule.clone(), cost)?;
    let dirs = simplex_mesh(m, mesh);

    for (i, (eta, q)) in sampler
        .draw(m, m, Domain::Simplex, n)
        .into_iter()
        .enumerate()
    {
        let et = eta_tilde(cost, &eta);
        let s: f64 = et.iter().sum();
        let ett: Vec<f64> = et.iter().map(|x| x / s).collect();
        let h_t = s * h.value(&ett) - d_eta(cost, &eta);
        let b_t = lt.risk(&eta, &q) - h_t;
        let b_cw = cost_weighted_regret(cost, &eta, &q);
        transformed.record(psi_zo.lookup_floor(b_cw / s), b_t / s, &eta, &q);

        let b = rule_regret(rule, h.as_ref(), &eta, &q);
        let pred = cost.cbar_t_times(&q);
        let delta = cost_weighted_regret(cost, &eta, &pred);
        independent.record(psi_c.lookup_floor(delta), b, &eta, &q);

        if i < opts.w_samples {
            let k = argmax_lowest(&pred);
            for wi in 0..=100 {
                let w = wi as f64 / 100.0;
                let qw: Vec<f64> = eta
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (1.0 - w) * a + w * b)
                    .collect();
                let pw = cost.cbar_t_times(&qw);
                let mx = pw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if pw[k] < mx - 1e-12 {
                    continue;
                }
                let lhs = psi_at_q(rule, h.as_ref(), cost, &qw, delta, &dirs, mesh);
                wset.record(lhs, b, &eta, &qw);
            }
        }

        if let Some(c0) = &c0 {
            let lhs = psi_rw(rule, h.as_ref(), c0, delta).min(psi_rw(rule, h.as_ref(), c0, -delta));
            rw.record(lhs, b, &eta, &q);
        }
    }
    let mut out = vec![
        transformed.timed(start),
        independent.timed(start),
        wset.timed(start),
    ];
    if c0.is_some() {
        out.push(rw.timed(start));
    }
    Ok(out)
}

/// `C0` when `m = 2` (every two-class cost matrix is class-weighted).
fn class_weights(cost: &CostMatrix) -> Option<Vec<f64>> {
    if cost.m() == 2 {
        Some(vec![cost.get(0, 1), cost.get(1, 0)])
    } else {
        None
    }
}

/// The raw `L_{1/2}` Bregman divergence in closed form:
/// `(sum sqrt q)(sum eta/sqrt q) - (sum sqrt eta)^2`.
pub fn bregman_half_closed_form(eta: &[f64], q: &[f64]) -> f64 {
    let a: f64 = q.iter().map(|x| x.sqrt()).sum();
    let b: f64 = eta.iter().zip(q).map(|(e, x)| e / x.sqrt()).sum();
    let c: f64 = eta.iter().map(|x| x.sqrt()).sum();
    a * b - c * c
}

/// Raw `L_{1/2}` entropy for `m` classes.
pub fn half_entropy(m: usize) -> Result<LBetaEntropy> {
    LBetaEntropy::new(m, 0.5, false)
}
