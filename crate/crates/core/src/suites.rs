//! Named verification suites, sweeps and their CSV/JSON artifacts.
//!
//! Every suite returns [`BoundReport`]s; a suite passes when all of them
//! have zero violations. The suites are single-threaded and seeded, so
//! identical configurations give identical reports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{
    bregman, conjugate_cw, dissimilarity_from_entropy, entropy_from_dissimilarity,
    CostWeightedDissimilarity, CostWeightedEntropy, Dissimilarity, Entropy, F0Base,
    LBetaDissimilarity, LBetaEntropy, ShannonDissimilarity, ShannonEntropy, ZeroOneDissimilarity,
    ZeroOneEntropy,
};
use crate::error::{invalid, Error, Result};
use crate::hinge::{dkr2, llw2, predict_dag, predict_tilde, zo3, zo4, HingeKind, HingeLoss};
use crate::loss::{box_grid, ActionSampler, Loss, LossTable};
use crate::numeric::{central_gradient, Domain};
use crate::regret::{
    calibration_infimum, check_cw_bounds, check_general_bound, check_hinge_bounds,
    check_misclass_bounds, check_scoring_bounds, half_entropy, hinge_bound_sides, kappa_for_rule,
    misclass_upper_bounds, psi_profile, regret_identity_residual, risk_identity_check,
    strong_convexity_modulus, value_manifold_check, zero_one_regret, BoundReport, CwOptions,
    PairSampler, Prediction, PsiKind, PsiParams,
};
use crate::scoring::{
    canonical_representation_residual, shannon_conjugate, softmax_link_pinned, two_class_weight,
    ConjugateFLoss, RatioFLoss, RuleFamily, ScoringRule, SimplexFLoss,
};
use crate::simplex::{
    argmax_lowest, sample_dirichlet, sample_simplex, sample_simplex_interior, simplex_mesh,
    simplex_mesh_interior, CostMatrix, Margin, ProbVector,
};

/// Tolerance of the round-trip checks between entropies and dissimilarities.
pub const DUALITY_TOL: f64 = 1e-10;
/// Tolerance of the numeric Bayes risk against a closed-form entropy.
pub const ENTROPY_MATCH_TOL: f64 = 1e-3;
/// Tolerance of the canonical-representation and Bregman identities.
pub const PROPERNESS_TOL: f64 = 1e-9;
/// Relative tolerance of analytic gradients against finite differences.
pub const GRADIENT_TOL: f64 = 1e-6;
/// Tolerance of the two-class risk-gradient identity.
pub const RISK_GRADIENT_TOL: f64 = 1e-8;
/// Tolerance of the decimal hand values (a few units in the last place).
pub const HAND_TOL: f64 = 4.0 * f64::EPSILON;
/// Tolerance of the simplex alignment of the hinge-like losses.
pub const ALIGNMENT_TOL: f64 = 1e-12;
/// Allowed shortfall of a numeric strong-convexity modulus below `kappa`.
pub const KAPPA_TOL: f64 = 1e-3;
/// Tolerance of the cost-transformation identities.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Tolerance of the misclassification tightness witness.
pub const TIGHTNESS_TOL: f64 = 3e-6;

// ---------------------------------------------------------------------------
// Suite registry
// ---------------------------------------------------------------------------

/// The registered verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Duality,
    Properness,
    Gradients,
    HingeOrder,
    EntropyMatch,
    HingeBounds,
    GeneralBound,
    Manifold,
    Pinsker,
    Kappa,
    CwBounds,
    Calibration,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::Duality,
        Suite::Properness,
        Suite::Gradients,
        Suite::HingeOrder,
        Suite::EntropyMatch,
        Suite::HingeBounds,
        Suite::GeneralBound,
        Suite::Manifold,
        Suite::Pinsker,
        Suite::Kappa,
        Suite::CwBounds,
        Suite::Calibration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Duality => "duality",
            Suite::Properness => "properness",
            Suite::Gradients => "gradients",
            Suite::HingeOrder => "hinge-order",
            Suite::EntropyMatch => "entropy-match",
            Suite::HingeBounds => "hinge-bounds",
            Suite::GeneralBound => "general-bound",
            Suite::Manifold => "manifold",
            Suite::Pinsker => "pinsker",
            Suite::Kappa => "kappa",
            Suite::CwBounds => "cw-bounds",
            Suite::Calibration => "calibration",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                Error::InvalidInput(format!(
                    "unknown suite {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Parameters shared by the suites; `None` picks a per-suite default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub m: usize,
    pub seed: u64,
    pub samples: Option<usize>,
    /// Replaces the default scoring rule by `L_beta` where a suite uses one.
    pub beta: Option<f64>,
    /// Mesh or grid density override.
    pub density: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            m: 3,
            seed: 0,
            samples: None,
            beta: None,
            density: None,
        }
    }
}

impl SuiteConfig {
    fn samples_or(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    fn density_or(&self, default: usize) -> Result<usize> {
        match self.density {
            Some(0) => invalid("density must be positive"),
            Some(d) => Ok(d),
            None => Ok(default),
        }
    }
}

/// Reports of one suite run.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub m: usize,
    pub reports: Vec<BoundReport>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(BoundReport::passed)
    }

    pub fn violations(&self) -> usize {
        self.reports.iter().map(|r| r.violations).sum()
    }
}

/// Runs one suite.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    if cfg.m < 2 {
        return invalid("m must be at least 2");
    }
    let reports = match suite {
        Suite::Duality => duality(cfg)?,
        Suite::Properness => properness(cfg)?,
        Suite::Gradients => gradients(cfg)?,
        Suite::HingeOrder => hinge_order(cfg)?,
        Suite::EntropyMatch => entropy_match(cfg)?,
        Suite::HingeBounds => hinge_bounds(cfg)?,
        Suite::GeneralBound => general_bound(cfg)?,
        Suite::Manifold => manifold(cfg)?,
        Suite::Pinsker => pinsker(cfg)?,
        Suite::Kappa => kappa(cfg)?,
        Suite::CwBounds => cw_bounds(cfg)?,
        Suite::Calibration => calibration(cfg)?,
    };
    Ok(SuiteOutcome {
        suite,
        m: cfg.m,
        reports,
    })
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

/// Every implemented proper scoring rule for `m` classes.
pub fn named_rules(m: usize) -> Vec<ScoringRule> {
    let mut out = vec![ScoringRule::likelihood(m).expect("m >= 2")];
    if m == 2 {
        out.extend(F0Base::ALL.iter().map(|&b| ScoringRule::two_class(b)));
    }
    for &b in &F0Base::ALL {
        out.push(ScoringRule::pairwise_asymmetric(m, b).expect("m >= 2"));
        out.push(ScoringRule::pairwise_symmetric(m, b).expect("m >= 2"));
    }
    for beta in [0.5, 2.0, 3.0] {
        out.push(ScoringRule::lbeta(m, beta, false).expect("general beta"));
    }
    for beta in [0.0, 0.5, 1.0, 2.0, f64::INFINITY] {
        out.push(ScoringRule::lbeta(m, beta, true).expect("rescaled beta"));
    }
    out
}

/// Looks up a rule by name: `likelihood`, `two_class_<base>`,
/// `pairwise_asymmetric_<base>`, `pairwise_symmetric_<base>`,
/// `pairwise_beta` (with `nu = beta`), `lbeta` or `lbeta_rescaled` (with
/// `beta`).
pub fn rule_by_name(name: &str, m: usize, beta: Option<f64>) -> Result<ScoringRule> {
    let base_of = |s: &str| -> Result<F0Base> {
        F0Base::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown base {s:?}")))
    };
    let need_beta = || beta.ok_or_else(|| Error::InvalidInput(format!("{name} needs --beta")));
    if name == "likelihood" {
        ScoringRule::likelihood(m)
    } else if let Some(b) = name.strip_prefix("two_class_") {
        if m != 2 {
            return invalid("two-class rules need m = 2");
        }
        Ok(ScoringRule::two_class(base_of(b)?))
    } else if let Some(b) = name.strip_prefix("pairwise_asymmetric_") {
        ScoringRule::pairwise_asymmetric(m, base_of(b)?)
    } else if let Some(b) = name.strip_prefix("pairwise_symmetric_") {
        ScoringRule::pairwise_symmetric(m, base_of(b)?)
    } else if name == "pairwise_beta" {
        ScoringRule::pairwise_beta(m, need_beta()?)
    } else if name == "lbeta" {
        ScoringRule::lbeta(m, need_beta()?, false)
    } else if name == "lbeta_rescaled" {
        ScoringRule::lbeta(m, need_beta()?, true)
    } else {
        invalid(format!("unknown rule {name:?}"))
    }
}

/// A random cost matrix with off-diagonal entries in `[0.2, 2]`.
pub fn random_cost<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CostMatrix {
    let rows = (0..m)
        .map(|j| {
            (0..m)
                .map(|k| if j == k { 0.0 } else { rng.gen_range(0.2..2.0) })
                .collect()
        })
        .collect();
    CostMatrix::new(rows).expect("valid random costs")
}

type NamedPair = (String, Arc<dyn Entropy>, Arc<dyn Dissimilarity>);

fn named_pairs(m: usize, cost: &CostMatrix) -> Vec<NamedPair> {
    let mut out: Vec<NamedPair> = named_rules(m)
        .into_iter()
        .map(|r| (r.label(), r.entropy(), r.dissimilarity()))
        .collect();
    out.push((
        "zero_one".into(),
        Arc::new(ZeroOneEntropy { m }),
        Arc::new(ZeroOneDissimilarity { m }),
    ));
    out.push((
        "cost_weighted".into(),
        Arc::new(CostWeightedEntropy { cost: cost.clone() }),
        Arc::new(CostWeightedDissimilarity { cost: cost.clone() }),
    ));
    out
}

/// `|a - b|`, with equal infinities counting as zero.
fn ext_abs_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

fn draw_eta<R: Rng + ?Sized>(rng: &mut R, m: usize, i: usize) -> Vec<f64> {
    if i % 4 == 3 {
        sample_dirichlet(rng, m, 0.3)
    } else {
        sample_simplex(rng, m)
    }
}

fn timed(mut r: BoundReport, start: Instant) -> BoundReport {
    r.wall_time = start.elapsed();
    r
}

// ---------------------------------------------------------------------------
// duality
// ---------------------------------------------------------------------------

fn duality(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cost = random_cost(&mut rng, m);
    let n = cfg.density_or(match m {
        2 => 200,
        3 => 20,
        4 => 8,
        _ => 5,
    })?;
    // Direct evaluation of `H_f` needs `eta_m > 0`.
    let mesh: Vec<Vec<f64>> = simplex_mesh(m, n)
        .into_iter()
        .filter(|p| p[m - 1] > 0.0)
        .collect();
    let axis = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];
    let orthant = grid_from_axis(&axis, m - 1);
    let mut out = Vec::new();
    for (label, h, f) in named_pairs(m, &cost) {
        let start = Instant::now();
        let mut re = BoundReport::new(format!("duality_entropy_{label}"), m);
        let mut rf = BoundReport::new(format!("duality_dissimilarity_{label}"), m);
        let mut rp = BoundReport::new(format!("duality_pair_{label}"), m);
        let h_round = entropy_from_dissimilarity(dissimilarity_from_entropy(h.clone()));
        let f_round = dissimilarity_from_entropy(entropy_from_dissimilarity(f.clone()));
        let h_of_f = entropy_from_dissimilarity(f.clone());
        for eta in &mesh {
            let v = h.value(eta);
            re.record_error(ext_abs_diff(h_round.value(eta), v), DUALITY_TOL, eta, &[]);
            // The two closed forms are compared where both are evaluated
            // directly; on faces `f` goes through the boundary scale.
            if eta.iter().all(|x| *x > 0.0) {
                rp.record_error(ext_abs_diff(h_of_f.value(eta), v), DUALITY_TOL, eta, &[]);
            }
        }
        for t in &orthant {
            rf.record_error(
                ext_abs_diff(f_round.value(t), f.value(t)),
                DUALITY_TOL,
                &[],
                t,
            );
        }
        out.push(timed(re, start));
        out.push(timed(rf, start));
        out.push(timed(rp, start));
    }
    Ok(out)
}

fn grid_from_axis(axis: &[f64], d: usize) -> Vec<Vec<f64>> {
    box_grid(d, 0.0, (axis.len() - 1) as f64, axis.len())
        .into_iter()
        .map(|idx| idx.into_iter().map(|i| axis[i.round() as usize]).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// properness
// ---------------------------------------------------------------------------

fn properness(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let n_pairs = cfg.samples_or(10_000);
    let n_mesh = cfg.density_or(match m {
        2 => 500,
        3 => 50,
        4 => 12,
        _ => 6,
    })?;
    let mut out = Vec::new();
    for rule in named_rules(m) {
        let start = Instant::now();
        let label = rule.label();
        let bounded = rule.bounded_below();
        let h = rule.entropy();
        let mut canon = BoundReport::new(format!("canonical_{label}"), m);
        let mut breg = BoundReport::new(format!("bregman_{label}"), m);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for i in 0..n_pairs {
            let eta = if bounded {
                draw_eta(&mut rng, m, i)
            } else {
                sample_simplex_interior(&mut rng, m, 1e-3)
            };
            let q = sample_simplex_interior(&mut rng, m, 1e-3);
            let e = ProbVector::new(eta.clone())?;
            let qq = ProbVector::new(q.clone())?;
            let res = canonical_representation_residual(&rule, &e, &qq)?;
            canon.record_error(res, PROPERNESS_TOL, &eta, &q);
            let reg = rule.risk_at(&eta, &q) - rule.risk_at(&eta, &eta);
            let b = bregman(h.as_ref(), &e, &qq)?;
            breg.record_error(ext_abs_diff(reg, b), PROPERNESS_TOL, &eta, &q);
        }
        let mesh = if bounded {
            simplex_mesh(m, n_mesh)
        } else {
            simplex_mesh_interior(m, n_mesh, 1)
        };
        let table: Vec<Vec<f64>> = mesh
            .iter()
            .map(|q| (0..m).map(|j| rule.eval(j, q)).collect())
            .collect();
        let mut grid = BoundReport::new(format!("properness_{label}"), m);
        for (i, eta) in mesh.iter().enumerate() {
            let own = risk(eta, &table[i]);
            let best = table
                .iter()
                .map(|z| risk(eta, z))
                .fold(f64::INFINITY, f64::min);
            grid.record(own, best, eta, eta);
        }
        out.push(timed(canon, start));
        out.push(timed(breg, start));
        out.push(timed(grid, start));
    }
    Ok(out)
}

/// `sum eta_j z_j` with `0 * inf = 0`.
fn risk(eta: &[f64], z: &[f64]) -> f64 {
    eta.iter()
        .zip(z)
        .filter(|(e, _)| **e != 0.0)
        .map(|(e, v)| e * v)
        .sum()
}

// ---------------------------------------------------------------------------
// gradients
// ---------------------------------------------------------------------------

/// Whether the composite loss of `rule` is differentiable in `h`.
fn smooth_rule(rule: &ScoringRule) -> bool {
    !matches!(
        rule.family(),
        RuleFamily::LBeta { beta, .. } if beta.is_infinite()
    )
}

fn gradients(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let n = cfg.samples_or(1000);
    let mut out = Vec::new();
    for rule in named_rules(m).into_iter().filter(smooth_rule) {
        let start = Instant::now();
        let mut r = BoundReport::new(format!("gradient_{}", rule.label()), m);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..n {
            let h: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for j in 0..m {
                let g = rule.composite_gradient(j, &h);
                let fd = central_gradient(|x| rule.composite(j, x), &h, 1e-5);
                let err = g
                    .iter()
                    .zip(&fd)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                    .fold(0.0, f64::max);
                r.record_error(err, GRADIENT_TOL, &[j as f64], &h);
            }
        }
        out.push(timed(r, start));
    }
    if m == 2 {
        for base in F0Base::ALL {
            let start = Instant::now();
            let rule = ScoringRule::two_class(base);
            let mut r = BoundReport::new(format!("risk_gradient_two_class_{}", base.name()), 2);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for _ in 0..n {
                let q1: f64 = rng.gen_range(0.1..0.9);
                let w = two_class_weight(base, q1)?;
                for j in 0..2 {
                    let fd = five_point(|x| rule.eval(j, &[x, 1.0 - x]), q1, 1e-4);
                    let ind = if j == 0 { 1.0 } else { 0.0 };
                    let expect = -(ind - q1) * w;
                    let err = (fd - expect).abs() / expect.abs().max(1.0);
                    r.record_error(err, RISK_GRADIENT_TOL, &[q1, 1.0 - q1], &[j as f64]);
                }
            }
            out.push(timed(r, start));
        }
    }
    Ok(out)
}

/// Fourth-order central difference.
fn five_point(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

// ---------------------------------------------------------------------------
// hinge-order
// ---------------------------------------------------------------------------

/// Hand values at `tau = (0.6, -0.3)` for three classes, in the order
/// `zo3, llw2, zo4, dkr2`.
pub const HAND_TAU: [f64; 2] = [0.6, -0.3];
pub const HAND_VALUES: [(&str, [f64; 3]); 4] = [
    ("zo3", [0.4, 1.3, 0.6]),
    ("llw2", [0.7, 1.3, 0.6]),
    ("zo4", [0.55, 1.3, 0.45]),
    ("dkr2", [0.55, 1.45, 0.45]),
];

type HingeFn = fn(usize, &[f64]) -> f64;

fn hinge_fns() -> [(&'static str, HingeFn); 4] {
    [("zo3", zo3), ("llw2", llw2), ("zo4", zo4), ("dkr2", dkr2)]
}

fn hinge_order(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let n = cfg.samples_or(100_000);
    let start = Instant::now();
    let mut o3 = BoundReport::new("order_zo3_llw2", m);
    let mut o4 = BoundReport::new("order_zo4_dkr2", m);
    let mut n3 = BoundReport::new("nonneg_zo3", m);
    let mut n4 = BoundReport::new("nonneg_zo4", m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..n {
        let tau: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for j in 0..m {
            let (a, b) = (zo3(j, &tau), llw2(j, &tau));
            let (c, d) = (zo4(j, &tau), dkr2(j, &tau));
            o3.record(a, b, &[j as f64], &tau);
            o4.record(c, d, &[j as f64], &tau);
            n3.record(0.0, a, &[j as f64], &tau);
            n4.record(0.0, c, &[j as f64], &tau);
        }
    }
    let mut out = vec![
        timed(o3, start),
        timed(o4, start),
        timed(n3, start),
        timed(n4, start),
    ];
    // Alignment on tau_tilde in the simplex: the mesh plus random draws.
    let mut points = simplex_mesh(m, if m <= 3 { 20 } else { 6 });
    for _ in 0..1000 {
        points.push(sample_simplex(&mut rng, m));
    }
    for (name, f) in hinge_fns() {
        let start = Instant::now();
        let mut r = BoundReport::new(format!("alignment_{name}"), m);
        for p in &points {
            let tau = &p[..m - 1];
            for (j, pj) in p.iter().enumerate() {
                r.record_error((f(j, tau) - (1.0 - pj)).abs(), ALIGNMENT_TOL, p, tau);
            }
        }
        out.push(timed(r, start));
    }
    if m == 3 {
        let start = Instant::now();
        let fns = hinge_fns();
        for (name, expect) in HAND_VALUES {
            let f = fns.iter().find(|(n, _)| *n == name).expect("registered").1;
            let mut r = BoundReport::new(format!("hand_values_{name}"), 3);
            for (j, e) in expect.iter().enumerate() {
                let v = f(j, &HAND_TAU);
                r.record_error((v - e).abs(), HAND_TOL, &[j as f64], &HAND_TAU);
            }
            out.push(timed(r, start));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// entropy-match
// ---------------------------------------------------------------------------

/// Points per axis of `[-3, 3]` margin grids; each grid contains `0` and
/// `+-1`.
fn margin_points(d: usize) -> usize {
    match d {
        1 => 601,
        2 => 121,
        3 => 25,
        _ => 13,
    }
}

fn entropy_match(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cost = random_cost(&mut rng, m);
    let n = cfg.density_or(match m {
        2 => 100,
        3 => 20,
        4 => 6,
        _ => 4,
    })?;
    let mesh = simplex_mesh(m, n);
    let d = m - 1;
    let margin_box = ActionSampler::Box {
        lo: -3.0,
        hi: 3.0,
        points: margin_points(d),
    };
    let simplex_n = match m {
        2 => 2000,
        3 => 200,
        4 => 30,
        _ => 12,
    };
    // Ratios of the mesh points; points with `q_m = 0` are pulled inside at
    // several depths so that the unbounded ratios of the faces are reached.
    let mut ratios: Vec<Vec<f64>> = Vec::new();
    for q in simplex_mesh(m, simplex_n) {
        if q[m - 1] > 0.0 {
            ratios.push(q[..m - 1].iter().map(|x| x / q[m - 1]).collect());
        } else {
            for depth in [1e-4, 1e-6, 1e-8] {
                ratios.push(
                    q[..m - 1]
                        .iter()
                        .map(|x| x * (1.0 - depth) / depth)
                        .collect(),
                );
            }
        }
    }
    // `L_f` actions: a box plus the subgradient images of the ratios, which
    // reach the boundary of the conjugate's domain.
    let conj_points = |f: &dyn Dissimilarity, lo: f64, hi: f64| {
        let mut pts = box_grid(d, lo, hi, margin_points(d));
        pts.extend(ratios.iter().map(|u| f.subgradient(u)));
        ActionSampler::Points(pts)
    };
    let shannon_conj = conj_points(&ShannonDissimilarity { m }, -12.0, 0.0);
    let cw_conj = conj_points(&CostWeightedDissimilarity { cost: cost.clone() }, -3.0, 3.0);
    let ratio_points = ActionSampler::Points(ratios.clone());
    let simplex_mesh_sampler = ActionSampler::SimplexMesh { n: simplex_n };

    let shannon = ShannonEntropy { m };
    let zo = ZeroOneEntropy { m };
    let cw = CostWeightedEntropy { cost: cost.clone() };
    let half = LBetaEntropy::new(m, 0.5, false)?;
    let half_f = LBetaDissimilarity::new(m, 0.5, false)?;
    let c2 = cost.clone();

    type Case<'a> = (Box<dyn Loss + 'a>, &'a dyn Entropy, &'a ActionSampler);
    let mut cases: Vec<Case> = vec![
        (
            Box::new(ConjugateFLoss::with_conjugate(
                ShannonDissimilarity { m },
                shannon_conjugate,
            )),
            &shannon,
            &shannon_conj,
        ),
        (
            Box::new(ConjugateFLoss::with_conjugate(
                CostWeightedDissimilarity { cost: cost.clone() },
                move |s| conjugate_cw(&c2, s),
            )),
            &cw,
            &cw_conj,
        ),
        (
            Box::new(RatioFLoss(ShannonDissimilarity { m })),
            &shannon,
            &ratio_points,
        ),
        (
            Box::new(RatioFLoss(ZeroOneDissimilarity { m })),
            &zo,
            &ratio_points,
        ),
        (Box::new(RatioFLoss(half_f.clone())), &half, &ratio_points),
        (
            Box::new(SimplexFLoss(ShannonDissimilarity { m })),
            &shannon,
            &simplex_mesh_sampler,
        ),
        (
            Box::new(SimplexFLoss(ZeroOneDissimilarity { m })),
            &zo,
            &simplex_mesh_sampler,
        ),
        (Box::new(SimplexFLoss(half_f)), &half, &simplex_mesh_sampler),
        (
            Box::new(HingeLoss::with_cost(HingeKind::Cw3, cost.clone())?),
            &cw,
            &margin_box,
        ),
    ];
    for kind in [
        HingeKind::Zo3,
        HingeKind::Zo4,
        HingeKind::Llw2,
        HingeKind::Dkr2,
    ] {
        cases.push((Box::new(HingeLoss::new(kind, m)?), &zo, &margin_box));
    }
    let mut out = Vec::new();
    for (loss, h, sampler) in cases {
        let start = Instant::now();
        let mut r = BoundReport::new(format!("entropy_match_{}", loss.name()), m);
        let table = LossTable::new(loss.as_ref(), sampler);
        for eta in &mesh {
            let v = table.infimum(eta, true);
            r.record_error(ext_abs_diff(v, h.value(eta)), ENTROPY_MATCH_TOL, eta, &[]);
        }
        out.push(timed(r, start));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Regret-bound suites
// ---------------------------------------------------------------------------

fn hinge_bounds(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let n = cfg.samples_or(100_000);
    let s = PairSampler::random(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cost = random_cost(&mut rng, m);
    Ok(vec![
        check_hinge_bounds(HingeKind::Zo4, None, m, &s, n)?,
        check_hinge_bounds(HingeKind::Zo3, None, m, &s, n)?,
        check_hinge_bounds(HingeKind::Cw3, Some(&cost), m, &s, n)?,
    ])
}

fn tilde_map(tau: &[f64]) -> Vec<f64> {
    predict_tilde(tau)
}

fn dag_map(tau: &[f64]) -> Vec<f64> {
    predict_dag(tau)
}

fn general_bound(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let n = cfg.samples_or(100_000);
    let s = PairSampler::random(cfg.seed);
    let mut out = Vec::new();
    for (kind, pred) in [
        (HingeKind::Zo4, tilde_map as fn(&[f64]) -> Vec<f64>),
        (HingeKind::Zo3, dag_map),
        (HingeKind::Llw2, tilde_map),
        (HingeKind::Dkr2, tilde_map),
    ] {
        let l = HingeLoss::new(kind, m)?;
        let p: Prediction = &pred;
        out.extend(check_general_bound(&l, Some(p), &s, n)?);
    }
    Ok(out)
}

fn manifold(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let grid = ActionSampler::Box {
        lo: -3.0,
        hi: 3.0,
        points: cfg.density_or(margin_points(m - 1))?,
    };
    let mut out = Vec::new();
    for kind in [
        HingeKind::Zo3,
        HingeKind::Zo4,
        HingeKind::Llw2,
        HingeKind::Dkr2,
    ] {
        out.extend(value_manifold_check(&HingeLoss::new(kind, m)?, &grid)?);
    }
    Ok(out)
}

/// The rules of the scoring-bound suites: the likelihood and `L_{1/2}`, or
/// `L_beta` alone when `beta` is set.
fn scoring_rules_for(cfg: &SuiteConfig) -> Result<Vec<ScoringRule>> {
    let m = cfg.m;
    Ok(match cfg.beta {
        Some(b) => {
            let rescaled = !matches!(
                crate::entropy::BetaRegime::of(b)?,
                crate::entropy::BetaRegime::General(_)
            );
            vec![ScoringRule::lbeta(m, b, rescaled)?]
        }
        None => vec![
            ScoringRule::likelihood(m)?,
            ScoringRule::lbeta(m, 0.5, false)?,
        ],
    })
}

/// The two-class Pinsker spot pair and its independent value
/// `0.9 log 1.8 + 0.1 log 0.2`.
pub const PINSKER_SPOT: ([f64; 2], [f64; 2]) = ([0.9, 0.1], [0.5, 0.5]);

fn pinsker(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let n = cfg.samples_or(100_000);
    let s = PairSampler::random(cfg.seed);
    let mut out = Vec::new();
    for rule in scoring_rules_for(cfg)? {
        out.extend(check_scoring_bounds(&rule, kappa_for_rule(&rule)?, &s, n)?);
    }
    let rule = ScoringRule::likelihood(2)?;
    let (e, q) = PINSKER_SPOT;
    let spot = PairSampler::Pairs(vec![(e.to_vec(), q.to_vec())]);
    let mut r = check_scoring_bounds(&rule, 1.0, &spot, 1)?.remove(0);
    r.bound_id = "pinsker_spot".into();
    out.push(r);
    Ok(out)
}

fn kappa(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    if m > 12 {
        return invalid("strong-convexity moduli need m <= 12");
    }
    let density = cfg.density_or(match m {
        2 => 400,
        3 => 30,
        4 => 16,
        5 => 10,
        _ => m + 2,
    })?;
    let mut cases: Vec<(String, Arc<dyn Entropy>, f64)> = vec![
        ("shannon".into(), Arc::new(ShannonEntropy { m }), 1.0),
        ("lbeta_0.5".into(), Arc::new(half_entropy(m)?), 1.0),
    ];
    let pw = ScoringRule::pairwise_beta(m, -0.5)?;
    cases.push((pw.label(), pw.entropy(), kappa_for_rule(&pw)?));
    if let Some(b) = cfg.beta {
        for rule in scoring_rules_for(cfg)? {
            if rule.entropy().is_smooth() {
                cases.push((format!("lbeta_{b}"), rule.entropy(), kappa_for_rule(&rule)?));
            }
        }
    }
    let mut out = Vec::new();
    for (label, h, k) in cases {
        let start = Instant::now();
        let mut r = BoundReport::new(format!("kappa_{label}"), m);
        let modulus = strong_convexity_modulus(h.as_ref(), density)?;
        r.record_error(k - modulus, KAPPA_TOL, &[k], &[modulus]);
        out.push(timed(r, start));
    }
    Ok(out)
}

fn cw_bounds(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let n = cfg.samples_or(100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cost = if m == 2 {
        CostMatrix::class_weighted(&[2.0, 1.0])?
    } else {
        random_cost(&mut rng, m)
    };
    let s = PairSampler::random(cfg.seed);
    let mut out = Vec::new();

    // Risk identity of the cost transformation on a hinge-like and a
    // composite loss.
    let start = Instant::now();
    let zo4l = HingeLoss::new(HingeKind::Zo4, m)?;
    let lik = ScoringRule::likelihood(m)?;
    let mut ri = BoundReport::new("identity_risk_zo4", m);
    let mut rl = BoundReport::new("identity_risk_likelihood", m);
    for (eta, a) in s.draw(m, m - 1, Domain::Euclidean, n.min(10_000)) {
        let e = ProbVector::new(eta.clone())?;
        ri.record_error(
            risk_identity_check(&zo4l, &cost, &e, &a)?,
            IDENTITY_TOL,
            &eta,
            &a,
        );
        let q = softmax_link_pinned(&Margin::new(a.clone())?)?.into_vec();
        rl.record_error(
            risk_identity_check(&lik, &cost, &e, &q)?,
            IDENTITY_TOL,
            &eta,
            &q,
        );
    }
    out.push(timed(ri, start));
    out.push(timed(rl, start));

    // Regret identity with a numeric Bayes risk of the transformed loss.
    let start = Instant::now();
    let mut rr = BoundReport::new("identity_regret_likelihood", m);
    if m <= 4 {
        let mut rng2 = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
        for _ in 0..20 {
            let eta = sample_simplex_interior(&mut rng2, m, 0.02);
            let q = sample_simplex_interior(&mut rng2, m, 0.02);
            let res = regret_identity_residual(
                &lik,
                &cost,
                &ProbVector::new(eta.clone())?,
                &ProbVector::new(q.clone())?,
            )?;
            rr.record_error(res, IDENTITY_TOL, &eta, &q);
        }
    }
    out.push(timed(rr, start));

    out.extend(check_misclass_bounds(m, Some(&cost), &s, n)?);

    if m >= 3 {
        let start = Instant::now();
        let mut t = BoundReport::new("misclass_tightness", m);
        let eps = 1e-6;
        let mut eta = vec![0.0; m];
        eta[0] = 0.8;
        eta[1] = 0.2;
        let mut q = vec![0.0; m];
        q[0] = 0.5 - eps;
        q[1] = 0.5 + eps;
        let b = misclass_upper_bounds(
            &ProbVector::new(eta.clone())?,
            &ProbVector::new(q.clone())?,
            None,
        )?;
        t.record_error((b.zero_one.0 - 0.6).abs(), TIGHTNESS_TOL, &eta, &q);
        out.push(timed(t, start));
    }

    if m <= 4 {
        let n_cw = cfg.samples.map_or(2000, |v| v.min(2000));
        let rule = match cfg.beta {
            Some(_) => scoring_rules_for(cfg)?.remove(0),
            None => lik.clone(),
        };
        out.extend(check_cw_bounds(
            &rule,
            &cost,
            &s,
            n_cw,
            &CwOptions::default(),
        )?);
    }
    Ok(out)
}

fn calibration(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let m = cfg.m;
    let n = cfg.samples_or(20);
    let grid = ActionSampler::Box {
        lo: -3.0,
        hi: 3.0,
        points: cfg.density_or(margin_points(m - 1))?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut etas = Vec::new();
    while etas.len() < n {
        let e = sample_simplex(&mut rng, m);
        let mx = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if e.iter().filter(|v| mx - **v < 1e-3).count() == 1 {
            etas.push(e);
        }
    }
    let mut out = Vec::new();
    for (kind, pred) in [
        (HingeKind::Zo4, tilde_map as fn(&[f64]) -> Vec<f64>),
        (HingeKind::Zo3, dag_map),
        (HingeKind::Llw2, tilde_map),
        (HingeKind::Dkr2, tilde_map),
    ] {
        let start = Instant::now();
        let l = HingeLoss::new(kind, m)?;
        let mut r = BoundReport::new(format!("calibration_{kind}"), m);
        for eta in &etas {
            let e = ProbVector::new(eta.clone())?;
            let y = argmax_lowest(eta);
            for k in (0..m).filter(|&k| k != y) {
                let inf = calibration_infimum(&l, pred, &e, k, &grid)?;
                let mut v = vec![0.0; m];
                v[k] = 1.0;
                let lower = zero_one_regret(eta, &v) / m as f64;
                r.record(lower, inf, eta, &[k as f64]);
            }
        }
        out.push(timed(r, start));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One row of a long-format sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub bound_id: String,
    pub t_or_sample: f64,
    pub lhs: f64,
    /// Absent for plain profiles.
    pub rhs: Option<f64>,
    pub slack: Option<f64>,
}

/// A profile tabulated on `points` equally spaced values of `(0, 1]`
/// (`(0, 2]` for the cost kinds), with `lhs = psi(t)`.
pub fn sweep_psi(
    kind: PsiKind,
    rule: &ScoringRule,
    params: &PsiParams,
    points: usize,
) -> Result<Vec<SweepRow>> {
    if points == 0 {
        return invalid("sweep needs at least one grid point");
    }
    let hi = match kind {
        PsiKind::PsiQC | PsiKind::PsiUnderlineC => params
            .cost
            .as_ref()
            .map_or(1.0, |c| c.row_max().into_iter().fold(0.0, f64::max)),
        _ => 1.0,
    };
    let grid: Vec<f64> = (1..=points)
        .map(|i| hi * i as f64 / points as f64)
        .collect();
    let prof = psi_profile(kind, rule, params, &grid)?;
    Ok(prof
        .points
        .into_iter()
        .map(|(t, v)| SweepRow {
            bound_id: format!("{}_{}", kind.name(), rule.label()),
            t_or_sample: t,
            lhs: v,
            rhs: None,
            slack: None,
        })
        .collect())
}

/// Slack surface of a hinge bound over a simplex mesh of `eta` (`density`
/// intervals) times a `[-2, 2]` grid of `tau` (`density + 1` points per
/// axis).
pub fn sweep_hinge_surface(variant: HingeKind, m: usize, density: usize) -> Result<Vec<SweepRow>> {
    if density == 0 {
        return invalid("density must be positive");
    }
    if m < 2 || !matches!(variant, HingeKind::Zo4 | HingeKind::Zo3 | HingeKind::Cw3) {
        return invalid("hinge surfaces exist for zo4, zo3 and cw3 with m >= 2");
    }
    let cost = CostMatrix::zero_one(m);
    let etas = simplex_mesh(m, density);
    let taus = box_grid(m - 1, -2.0, 2.0, density + 1);
    let mut rows = Vec::with_capacity(etas.len() * taus.len());
    let id = format!("hinge_{variant}");
    for eta in &etas {
        for tau in &taus {
            let (l, r) = hinge_bound_sides(variant, &cost, eta, tau);
            rows.push(SweepRow {
                bound_id: id.clone(),
                t_or_sample: rows.len() as f64,
                lhs: l,
                rhs: Some(r),
                slack: Some(r - l),
            });
        }
    }
    Ok(rows)
}

/// Rows of a finished bound check, one per report.
pub fn sweep_rows_from_reports(reports: &[BoundReport]) -> Vec<SweepRow> {
    reports
        .iter()
        .filter_map(|r| {
            r.witness.as_ref().map(|w| SweepRow {
                bound_id: r.bound_id.clone(),
                t_or_sample: r.samples as f64,
                lhs: w.lhs,
                rhs: Some(w.rhs),
                slack: Some(r.worst_slack),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

/// Seventeen significant digits, `.` decimal separator.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes one row per report:
/// `bound_id,m,samples,worst_slack,violations,passed`.
pub fn write_reports_csv(path: &Path, reports: &[BoundReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "bound_id",
        "m",
        "samples",
        "worst_slack",
        "violations",
        "passed",
    ])?;
    for r in reports {
        w.write_record([
            r.bound_id.clone(),
            r.m.to_string(),
            r.samples.to_string(),
            fmt_num(r.worst_slack),
            r.violations.to_string(),
            r.passed().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the witnesses of all reports as a JSON object keyed by bound id.
pub fn write_witness_json(path: &Path, reports: &[BoundReport]) -> Result<()> {
    let map: serde_json::Map<String, serde_json::Value> = reports
        .iter()
        .map(|r| Ok((r.bound_id.clone(), serde_json::to_value(r)?)))
        .collect::<Result<_>>()?;
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(map))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes `bound_id,t_or_sample,lhs,rhs,slack`; absent values are empty.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bound_id", "t_or_sample", "lhs", "rhs", "slack"])?;
    for r in rows {
        w.write_record([
            r.bound_id.clone(),
            fmt_num(r.t_or_sample),
            fmt_num(r.lhs),
            r.rhs.map(fmt_num).unwrap_or_default(),
            r.slack.map(fmt_num).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
