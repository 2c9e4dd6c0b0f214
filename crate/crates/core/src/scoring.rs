//! Proper scoring rules: the generic `f -> L` constructions, the named
//! two-class, pairwise and `L_beta` families, the softmax link and analytic
//! composite gradients.
//!
//! Named losses are evaluated from their own closed forms. Their entropies
//! come from the generic `f0`-based constructions in [`crate::entropy`], so
//! the canonical-representation residual compares two independent codes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::entropy::{
    conjugate_numeric, BetaRegime, Dissimilarity, Entropy, F0Base, LBetaDissimilarity,
    LBetaEntropy, PairwiseAsymmetricDissimilarity, PairwiseAsymmetricEntropy,
    PairwiseSymmetricDissimilarity, PairwiseSymmetricEntropy, ShannonDissimilarity, ShannonEntropy,
    ShiftedDissimilarity, ShiftedEntropy, TwoClassDissimilarity, TwoClassEntropy, BOUNDARY_C,
};
use crate::error::{invalid, Error, Result};
use crate::loss::Loss;
use crate::numeric::Domain;
use crate::simplex::{argmax_lowest, expectation, Margin, ProbVector};

// ---------------------------------------------------------------------------
// Losses generated by a dissimilarity function
// ---------------------------------------------------------------------------

/// `L_f2(j, u)`: `-d_j f(u)` for `j < m-1`, `u^T df(u) - f(u)` for the last
/// label.
pub fn loss_from_f_ratio<D: Dissimilarity + ?Sized>(f: &D, j: usize, u: &[f64]) -> Result<f64> {
    if u.len() != f.dim() || j > f.dim() {
        return invalid("ratio action or label out of range");
    }
    if u.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return invalid("ratio action must lie in the nonnegative orthant");
    }
    Ok(ratio_loss(f, j, u))
}

fn ratio_loss<D: Dissimilarity + ?Sized>(f: &D, j: usize, u: &[f64]) -> f64 {
    let g = f.subgradient(u);
    if j < u.len() {
        -g[j]
    } else {
        // `0 * inf = 0` for faces where the subgradient diverges.
        u.iter()
            .zip(&g)
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            - f.value(u)
    }
}

fn ratio_of(q: &[f64]) -> Vec<f64> {
    let m = q.len();
    let c = if q[m - 1] > 0.0 { q[m - 1] } else { BOUNDARY_C };
    q[..m - 1].iter().map(|x| x / c).collect()
}

/// `L_f3(j, q) = L_f2(j, u^q)` with `u^q = (q_1/q_m, ..., q_{m-1}/q_m)`; the
/// boundary `q_m = 0` uses the `c = 1e-10` limit convention.
pub fn loss_from_f_simplex<D: Dissimilarity + ?Sized>(
    f: &D,
    j: usize,
    q: &ProbVector,
) -> Result<f64> {
    if q.m() != f.dim() + 1 || j >= q.m() {
        return invalid("probability vector or label out of range");
    }
    Ok(ratio_loss(f, j, &ratio_of(q)))
}

/// `L_f3` as a loss over `Delta_m`.
pub struct SimplexFLoss<D>(pub D);

impl<D: Dissimilarity> Loss for SimplexFLoss<D> {
    fn num_classes(&self) -> usize {
        self.0.dim() + 1
    }
    fn action_dim(&self) -> usize {
        self.0.dim() + 1
    }
    fn domain(&self) -> Domain {
        Domain::Simplex
    }
    fn loss(&self, j: usize, a: &[f64]) -> f64 {
        ratio_loss(&self.0, j, &ratio_of(a))
    }
    fn name(&self) -> String {
        format!("L_f3[{}]", self.0.label())
    }
}

/// `L_f2` as a loss over the orthant.
pub struct RatioFLoss<D>(pub D);

impl<D: Dissimilarity> Loss for RatioFLoss<D> {
    fn num_classes(&self) -> usize {
        self.0.dim() + 1
    }
    fn action_dim(&self) -> usize {
        self.0.dim()
    }
    fn domain(&self) -> Domain {
        Domain::Orthant
    }
    fn loss(&self, j: usize, a: &[f64]) -> f64 {
        ratio_loss(&self.0, j, a)
    }
    fn name(&self) -> String {
        format!("L_f2[{}]", self.0.label())
    }
}

type ConjugateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `L_f(j, s)`: `-s_j` for `j < m-1` and `f*(s)` for the last label, with
/// actions `s in R^(m-1)`.
pub struct ConjugateFLoss<D> {
    f: D,
    conj: Option<ConjugateFn>,
}

impl<D: Dissimilarity> ConjugateFLoss<D> {
    /// Uses [`conjugate_numeric`] for `f*`.
    pub fn numeric(f: D) -> Self {
        ConjugateFLoss { f, conj: None }
    }

    /// Uses a caller-supplied closed form for `f*`.
    pub fn with_conjugate(f: D, conj: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ConjugateFLoss {
            f,
            conj: Some(Arc::new(conj)),
        }
    }

    pub fn conjugate(&self, s: &[f64]) -> f64 {
        match &self.conj {
            Some(c) => c(s),
            None => conjugate_numeric(&self.f, s),
        }
    }
}

impl<D: Dissimilarity> Loss for ConjugateFLoss<D> {
    fn num_classes(&self) -> usize {
        self.f.dim() + 1
    }
    fn action_dim(&self) -> usize {
        self.f.dim()
    }
    fn domain(&self) -> Domain {
        Domain::Euclidean
    }
    /// Actions outside the domain of `f*` lose `+inf` on every label, so
    /// zero-weight labels cannot hide them.
    fn loss(&self, j: usize, a: &[f64]) -> f64 {
        let c = self.conjugate(a);
        if j < a.len() && c.is_finite() {
            -a[j]
        } else {
            c
        }
    }
    fn losses(&self, a: &[f64]) -> Vec<f64> {
        let c = self.conjugate(a);
        if !c.is_finite() {
            return vec![c; a.len() + 1];
        }
        let mut v: Vec<f64> = a.iter().map(|x| -x).collect();
        v.push(c);
        v
    }
    fn name(&self) -> String {
        format!("L_f[{}]", self.f.label())
    }
}

/// Closed-form conjugate of the Shannon dissimilarity:
/// `-log(1 - sum exp(s_j))`, `+inf` outside its domain.
pub fn shannon_conjugate(s: &[f64]) -> f64 {
    let e: f64 = s.iter().map(|x| x.exp()).sum();
    if e < 1.0 {
        -(1.0 - e).ln()
    } else {
        f64::INFINITY
    }
}

// ---------------------------------------------------------------------------
// Weights and link
// ---------------------------------------------------------------------------

/// `w(q1) = f0''(q1/q2) / q2^3`, the weight in `dL(j, q)/dq1 =
/// -(1{j = 1} - q1) w(q1)`.
pub fn two_class_weight(base: F0Base, q1: f64) -> Result<f64> {
    if !(q1 > 0.0 && q1 < 1.0) {
        return invalid("q1 must lie in (0, 1)");
    }
    let q2 = 1.0 - q1;
    Ok(base.f0_second(q1 / q2) / q2.powi(3))
}

/// Beta-family weight `2^(nu1+nu2) q1^(nu1-1) q2^(nu2-1)`.
pub fn beta_weight(nu1: f64, nu2: f64, q1: f64) -> Result<f64> {
    if !(q1 > 0.0 && q1 < 1.0) {
        return invalid("q1 must lie in (0, 1)");
    }
    let q2 = 1.0 - q1;
    Ok(2f64.powf(nu1 + nu2) * q1.powf(nu1 - 1.0) * q2.powf(nu2 - 1.0))
}

/// Multinomial logistic link on a full `m`-vector of scores.
pub fn softmax_link(h: &Margin) -> Result<ProbVector> {
    if h.len() < 2 {
        return invalid("softmax needs at least two scores");
    }
    ProbVector::new(softmax(h))
}

/// Softmax of `(h, 0)`: the link with the last score pinned to zero.
pub fn softmax_link_pinned(h: &Margin) -> Result<ProbVector> {
    ProbVector::new(softmax(&extend_zero(h)))
}

fn extend_zero(h: &[f64]) -> Vec<f64> {
    let mut v = h.to_vec();
    v.push(0.0);
    v
}

/// Max-subtracted softmax; sequential summation keeps results bit-stable.
pub(crate) fn softmax(h: &[f64]) -> Vec<f64> {
    let mx = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = h.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

// ---------------------------------------------------------------------------
// Named families
// ---------------------------------------------------------------------------

/// The named scoring-rule families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RuleFamily {
    /// Multinomial likelihood `-log q_j`.
    Likelihood,
    /// Two-class rule generated by `f0`.
    TwoClass { base: F0Base },
    /// Sum of two-class rules comparing each class with the last one.
    PairwiseAsymmetric { base: F0Base },
    /// Two-class rules summed over all ordered class pairs.
    PairwiseSymmetric { base: F0Base },
    /// Pseudo-spherical `L_beta` family, raw or rescaled.
    LBeta { beta: f64, rescaled: bool },
}

/// JSON has no infinity; non-finite values are written as the strings
/// `"inf"`, `"-inf"` and `"NaN"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_finite() => s.serialize_f64(*x),
            Some(x) if x.is_nan() => s.serialize_str("NaN"),
            Some(x) if *x > 0.0 => s.serialize_str("inf"),
            Some(_) => s.serialize_str("-inf"),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Str(s)) => match s.as_str() {
                "inf" | "Infinity" => Ok(Some(f64::INFINITY)),
                "-inf" | "-Infinity" => Ok(Some(f64::NEG_INFINITY)),
                "NaN" => Ok(Some(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}

/// JSON descriptor of a rule: `{family, base?, beta?, rescaled?, nu?, m,
/// offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDescriptor {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub base: Option<F0Base>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        default,
        with = "extended_f64"
    )]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rescaled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu: Option<f64>,
    pub m: usize,
    /// Per-label additive constant relative to the `L_f3` form.
    pub offset: Vec<f64>,
}

/// A proper scoring rule `L(j, q)` over `q in Delta_m`.
#[derive(Debug, Clone)]
pub struct ScoringRule {
    m: usize,
    family: RuleFamily,
    regime: Option<BetaRegime>,
}

impl ScoringRule {
    pub fn new(family: RuleFamily, m: usize) -> Result<Self> {
        if m < 2 {
            return invalid("a scoring rule needs m >= 2");
        }
        let mut regime = None;
        match family {
            RuleFamily::TwoClass { .. } if m != 2 => {
                return invalid("two-class rules need m = 2");
            }
            RuleFamily::LBeta { beta, rescaled } => {
                let r = BetaRegime::of(beta)?;
                if !rescaled && !matches!(r, BetaRegime::General(_)) {
                    return invalid(
                        "raw L_beta is undefined at beta in {0, 1, inf}; use the rescaled limits",
                    );
                }
                regime = Some(r);
            }
            _ => {}
        }
        Ok(ScoringRule { m, family, regime })
    }

    pub fn likelihood(m: usize) -> Result<Self> {
        Self::new(RuleFamily::Likelihood, m)
    }

    pub fn two_class(base: F0Base) -> Self {
        ScoringRule {
            m: 2,
            family: RuleFamily::TwoClass { base },
            regime: None,
        }
    }

    pub fn pairwise_asymmetric(m: usize, base: F0Base) -> Result<Self> {
        Self::new(RuleFamily::PairwiseAsymmetric { base }, m)
    }

    pub fn pairwise_symmetric(m: usize, base: F0Base) -> Result<Self> {
        Self::new(RuleFamily::PairwiseSymmetric { base }, m)
    }

    pub fn lbeta(m: usize, beta: f64, rescaled: bool) -> Result<Self> {
        Self::new(RuleFamily::LBeta { beta, rescaled }, m)
    }

    /// Pairwise symmetric rule whose two-class weight is the symmetric Beta
    /// weight with parameter `nu`. Supported: `nu = 0` (likelihood) and
    /// `nu = -1/2` (exponential).
    pub fn pairwise_beta(m: usize, nu: f64) -> Result<Self> {
        let base = if nu == 0.0 {
            F0Base::Likelihood
        } else if nu == -0.5 {
            F0Base::Exponential
        } else {
            return invalid(format!(
                "pairwise Beta rule implemented only for nu in {{0, -1/2}}, got {nu}"
            ));
        };
        Self::pairwise_symmetric(m, base)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn family(&self) -> RuleFamily {
        self.family
    }

    /// Symmetric Beta parameter of the two-class weight, when it has one.
    pub fn nu(&self) -> Option<f64> {
        match self.family {
            RuleFamily::TwoClass { base }
            | RuleFamily::PairwiseAsymmetric { base }
            | RuleFamily::PairwiseSymmetric { base } => match base {
                F0Base::Likelihood => Some(0.0),
                F0Base::Exponential => Some(-0.5),
                _ => None,
            },
            _ => None,
        }
    }

    /// Whether losses stay bounded below on the closed simplex.
    pub fn bounded_below(&self) -> bool {
        match self.family {
            RuleFamily::TwoClass { base }
            | RuleFamily::PairwiseAsymmetric { base }
            | RuleFamily::PairwiseSymmetric { base } => base.bounded_below(),
            _ => true,
        }
    }

    /// Per-label additive constant of the closed form relative to `L_f3`
    /// with the family's own `f`.
    pub fn offset(&self) -> Vec<f64> {
        let c = match self.family {
            RuleFamily::TwoClass {
                base: F0Base::Exponential,
            } => 1.0,
            RuleFamily::PairwiseSymmetric {
                base: F0Base::Exponential,
            } => 2.0 * (self.m - 1) as f64,
            _ => 0.0,
        };
        vec![c; self.m]
    }

    pub fn descriptor(&self) -> RuleDescriptor {
        let (family, base, beta, rescaled) = match self.family {
            RuleFamily::Likelihood => ("likelihood", None, None, None),
            RuleFamily::TwoClass { base } => ("two_class", Some(base), None, None),
            RuleFamily::PairwiseAsymmetric { base } => {
                ("pairwise_asymmetric", Some(base), None, None)
            }
            RuleFamily::PairwiseSymmetric { base } => {
                ("pairwise_symmetric", Some(base), None, None)
            }
            RuleFamily::LBeta { beta, rescaled } => ("lbeta", None, Some(beta), Some(rescaled)),
        };
        RuleDescriptor {
            family: family.into(),
            base,
            beta,
            rescaled,
            nu: self.nu(),
            m: self.m,
            offset: self.offset(),
        }
    }

    /// Rebuilds a rule from its descriptor.
    pub fn from_descriptor(d: &RuleDescriptor) -> Result<Self> {
        let need_base = || {
            d.base
                .ok_or_else(|| Error::InvalidInput(format!("family {} needs a base", d.family)))
        };
        let family = match d.family.as_str() {
            "likelihood" => RuleFamily::Likelihood,
            "two_class" => RuleFamily::TwoClass { base: need_base()? },
            "pairwise_asymmetric" => RuleFamily::PairwiseAsymmetric { base: need_base()? },
            "pairwise_symmetric" => RuleFamily::PairwiseSymmetric { base: need_base()? },
            "lbeta" => RuleFamily::LBeta {
                beta: d
                    .beta
                    .ok_or_else(|| Error::InvalidInput("lbeta needs beta".into()))?,
                rescaled: d.rescaled.unwrap_or(false),
            },
            "pairwise_beta" => {
                let nu =
                    d.nu.ok_or_else(|| Error::InvalidInput("pairwise_beta needs nu".into()))?;
                return Self::pairwise_beta(d.m, nu);
            }
            other => return invalid(format!("unknown scoring-rule family {other:?}")),
        };
        Self::new(family, d.m)
    }

    pub fn label(&self) -> String {
        match self.family {
            RuleFamily::Likelihood => "likelihood".into(),
            RuleFamily::TwoClass { base } => format!("two_class_{}", base.name()),
            RuleFamily::PairwiseAsymmetric { base } => {
                format!("pairwise_asymmetric_{}", base.name())
            }
            RuleFamily::PairwiseSymmetric { base } => {
                format!("pairwise_symmetric_{}", base.name())
            }
            RuleFamily::LBeta { beta, rescaled } => {
                if rescaled {
                    format!("lbeta_rescaled_{beta}")
                } else {
                    format!("lbeta_{beta}")
                }
            }
        }
    }

    /// The entropy `H(eta) = sum_j eta_j L(j, eta)`, built from the generic
    /// `f0` or power-norm formulas.
    pub fn entropy(&self) -> Arc<dyn Entropy> {
        let m = self.m;
        let shift = self.offset();
        match self.family {
            RuleFamily::Likelihood => Arc::new(ShannonEntropy { m }),
            RuleFamily::TwoClass { base } => Arc::new(ShiftedEntropy {
                inner: TwoClassEntropy { base },
                shift,
            }),
            RuleFamily::PairwiseAsymmetric { base } => {
                Arc::new(PairwiseAsymmetricEntropy { m, base })
            }
            RuleFamily::PairwiseSymmetric { base } => Arc::new(ShiftedEntropy {
                inner: PairwiseSymmetricEntropy { m, base },
                shift,
            }),
            RuleFamily::LBeta { beta, rescaled } => {
                Arc::new(LBetaEntropy::new(m, beta, rescaled).expect("validated at construction"))
            }
        }
    }

    /// The dissimilarity `f` with `H_f` equal to [`Self::entropy`].
    pub fn dissimilarity(&self) -> Arc<dyn Dissimilarity> {
        let m = self.m;
        let shift = self.offset();
        match self.family {
            RuleFamily::Likelihood => Arc::new(ShannonDissimilarity { m }),
            RuleFamily::TwoClass { base } => Arc::new(ShiftedDissimilarity {
                inner: TwoClassDissimilarity { base },
                shift,
            }),
            RuleFamily::PairwiseAsymmetric { base } => {
                Arc::new(PairwiseAsymmetricDissimilarity { m, base })
            }
            RuleFamily::PairwiseSymmetric { base } => Arc::new(ShiftedDissimilarity {
                inner: PairwiseSymmetricDissimilarity { m, base },
                shift,
            }),
            RuleFamily::LBeta { beta, rescaled } => Arc::new(
                LBetaDissimilarity::new(m, beta, rescaled).expect("validated at construction"),
            ),
        }
    }

    /// `L(j, q)` from the closed form; `NaN` from `0/0` ratios at the
    /// boundary is reported as `+inf`.
    pub fn eval(&self, j: usize, q: &[f64]) -> f64 {
        let v = match self.family {
            RuleFamily::Likelihood => -q[j].ln(),
            RuleFamily::TwoClass { base } => two_class_value(base, j, q[0], q[1]),
            RuleFamily::PairwiseAsymmetric { base } => pairwise_asym_value(base, j, q),
            RuleFamily::PairwiseSymmetric { base } => pairwise_sym_value(base, j, q),
            RuleFamily::LBeta { rescaled, .. } => {
                lbeta_value(self.regime.expect("lbeta regime"), rescaled, j, q)
            }
        };
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    /// Expected loss `sum_j eta_j L(j, q)`.
    pub fn risk_at(&self, eta: &[f64], q: &[f64]) -> f64 {
        expectation(
            eta,
            &(0..self.m).map(|j| self.eval(j, q)).collect::<Vec<_>>(),
        )
    }

    /// Composite loss `L(j, softmax(h))`; `h` has length `m`, or `m-1` with
    /// `h_m = 0` implied.
    pub fn composite(&self, j: usize, h: &[f64]) -> f64 {
        let hf = self.full_scores(h);
        self.eval(j, &softmax(&hf))
    }

    fn full_scores(&self, h: &[f64]) -> Vec<f64> {
        if h.len() + 1 == self.m {
            extend_zero(h)
        } else {
            h.to_vec()
        }
    }

    /// Analytic gradient of `L(j, softmax(h))` with respect to the full
    /// score vector `(h_1, ..., h_m)`.
    pub fn composite_gradient(&self, j: usize, h: &[f64]) -> Vec<f64> {
        let h = self.full_scores(h);
        let m = self.m;
        let mut g = vec![0.0; m];
        match self.family {
            RuleFamily::Likelihood => {
                let q = softmax(&h);
                for l in 0..m {
                    g[l] = q[l] - if l == j { 1.0 } else { 0.0 };
                }
            }
            RuleFamily::TwoClass { base } | RuleFamily::PairwiseAsymmetric { base } => {
                let last = m - 1;
                if j < last {
                    let u = (h[j] - h[last]).exp();
                    let d = base.f0_second(u) * u;
                    g[j] = -d;
                    g[last] = d;
                } else {
                    for k in 0..last {
                        let u = (h[k] - h[last]).exp();
                        g[k] = u * u * base.f0_second(u);
                        g[last] -= g[k];
                    }
                }
            }
            RuleFamily::PairwiseSymmetric { base } => {
                for k in 0..m {
                    if k == j {
                        continue;
                    }
                    let r = (h[k] - h[j]).exp();
                    g[k] = base.f0_second(1.0 / r) / r + r * r * base.f0_second(r);
                    g[j] -= g[k];
                }
            }
            RuleFamily::LBeta { rescaled, .. } => match self.regime.expect("lbeta regime") {
                BetaRegime::Zero => {
                    let mean = h.iter().sum::<f64>() / m as f64;
                    let l = (mean - h[j]).exp();
                    for (i, gi) in g.iter_mut().enumerate() {
                        *gi = l * (1.0 / m as f64 - if i == j { 1.0 } else { 0.0 });
                    }
                }
                BetaRegime::One => {
                    let q = softmax(&h);
                    let lm = (m as f64).ln();
                    for l in 0..m {
                        g[l] = (q[l] - if l == j { 1.0 } else { 0.0 }) / lm;
                    }
                }
                BetaRegime::Infinity => {}
                BetaRegime::General(beta) => {
                    let p = 1.0 / beta - 1.0;
                    let e: Vec<f64> = h.iter().map(|x| (beta * (x - h[j])).exp()).collect();
                    let a: f64 = e.iter().sum();
                    let scale = if rescaled {
                        p * a.powf(p - 1.0) / ((m as f64).powf(p) - 1.0)
                    } else if beta < 1.0 {
                        p * a.powf(p - 1.0)
                    } else {
                        -p * a.powf(p - 1.0)
                    };
                    for l in 0..m {
                        let da = if l == j {
                            -beta * (a - 1.0)
                        } else {
                            beta * e[l]
                        };
                        g[l] = scale * da;
                    }
                }
            },
        }
        g
    }

    /// The rule as a softmax-composite loss over `h in R^(m-1)`.
    pub fn composite_loss(&self) -> CompositeLoss {
        CompositeLoss { rule: self.clone() }
    }
}

impl Loss for ScoringRule {
    fn num_classes(&self) -> usize {
        self.m
    }
    fn action_dim(&self) -> usize {
        self.m
    }
    fn domain(&self) -> Domain {
        Domain::Simplex
    }
    fn loss(&self, j: usize, a: &[f64]) -> f64 {
        self.eval(j, a)
    }
    fn name(&self) -> String {
        self.label()
    }
}

/// A scoring rule composed with the softmax link, `h_m = 0` pinned.
#[derive(Debug, Clone)]
pub struct CompositeLoss {
    pub rule: ScoringRule,
}

impl CompositeLoss {
    /// Gradient with respect to the free scores `(h_1, ..., h_{m-1})`.
    pub fn gradient(&self, j: usize, h: &[f64]) -> Vec<f64> {
        let mut g = self.rule.composite_gradient(j, h);
        g.pop();
        g
    }
}

impl Loss for CompositeLoss {
    fn num_classes(&self) -> usize {
        self.rule.m
    }
    fn action_dim(&self) -> usize {
        self.rule.m - 1
    }
    fn domain(&self) -> Domain {
        Domain::Euclidean
    }
    fn loss(&self, j: usize, a: &[f64]) -> f64 {
        self.rule.composite(j, a)
    }
    fn name(&self) -> String {
        format!("composite_{}", self.rule.label())
    }
}

fn two_class_value(base: F0Base, j: usize, q1: f64, q2: f64) -> f64 {
    let (a, b) = if j == 0 { (q1, q2) } else { (q2, q1) };
    match base {
        F0Base::Likelihood => -a.ln(),
        F0Base::Exponential => (b / a).sqrt(),
        F0Base::Calibration => {
            if j == 0 {
                q2 / (2.0 * q1)
            } else {
                0.5 * ((q1 / q2).ln() - 1.0)
            }
        }
        F0Base::CalibrationSymmetric => 0.5 * ((b / a).ln() + b / a - 1.0),
    }
}

fn pairwise_asym_value(base: F0Base, j: usize, q: &[f64]) -> f64 {
    let m = q.len();
    let qm = q[m - 1];
    if j < m - 1 {
        let r = qm / q[j];
        match base {
            F0Base::Likelihood => r.ln_1p(),
            F0Base::Exponential => r.sqrt() - 1.0,
            F0Base::Calibration => r / 2.0,
            F0Base::CalibrationSymmetric => 0.5 * (r.ln() - 1.0 + r),
        }
    } else {
        q[..m - 1]
            .iter()
            .map(|&qi| {
                let u = qi / qm;
                match base {
                    F0Base::Likelihood => u.ln_1p(),
                    F0Base::Exponential => u.sqrt() - 1.0,
                    F0Base::Calibration => 0.5 * (u.ln() - 1.0),
                    F0Base::CalibrationSymmetric => 0.5 * (u - 1.0 + u.ln()),
                }
            })
            .sum()
    }
}

fn pairwise_sym_value(base: F0Base, j: usize, q: &[f64]) -> f64 {
    q.iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, &qk)| {
            let r = qk / q[j];
            match base {
                F0Base::Likelihood => 2.0 * r.ln_1p(),
                F0Base::Exponential => 2.0 * r.sqrt(),
                F0Base::Calibration => 0.5 * (r.ln() + r - 1.0),
                F0Base::CalibrationSymmetric => r.ln() + r - 1.0,
            }
        })
        .sum()
}

fn lbeta_value(regime: BetaRegime, rescaled: bool, j: usize, q: &[f64]) -> f64 {
    let m = q.len() as f64;
    match regime {
        BetaRegime::Zero => {
            let mean_log = q.iter().map(|x| x.ln()).sum::<f64>() / m;
            (mean_log - q[j].ln()).exp()
        }
        BetaRegime::One => -q[j].ln() / m.ln(),
        BetaRegime::Infinity => {
            if j == argmax_lowest(q) {
                0.0
            } else {
                1.0 / (1.0 - 1.0 / m)
            }
        }
        BetaRegime::General(beta) => {
            let p = 1.0 / beta - 1.0;
            let a: f64 = q.iter().map(|x| (x / q[j]).powf(beta)).sum();
            let ap = a.powf(p);
            if rescaled {
                (ap - 1.0) / (m.powf(p) - 1.0)
            } else if beta < 1.0 {
                ap
            } else {
                -ap
            }
        }
    }
}

fn check(q: &ProbVector, j: usize, m: Option<usize>) -> Result<()> {
    if let Some(m) = m {
        if q.m() != m {
            return invalid(format!("expected {m} classes, got {}", q.m()));
        }
    }
    if j >= q.m() {
        return invalid(format!("label {j} out of range for {} classes", q.m()));
    }
    Ok(())
}

/// Two-class rule generated by `f0`, in the closed form with its additive
/// constant.
pub fn two_class_loss(base: F0Base, j: usize, q: &ProbVector) -> Result<f64> {
    check(q, j, Some(2))?;
    Ok(ScoringRule::two_class(base).eval(j, q))
}

/// Pairwise asymmetric rule: two-class rules of each class against the last.
pub fn pairwise_asymmetric(base: F0Base, j: usize, q: &ProbVector) -> Result<f64> {
    check(q, j, None)?;
    Ok(ScoringRule::pairwise_asymmetric(q.m(), base)?.eval(j, q))
}

/// Pairwise symmetric rule summed over all ordered class pairs.
pub fn pairwise_symmetric(base: F0Base, j: usize, q: &ProbVector) -> Result<f64> {
    check(q, j, None)?;
    Ok(ScoringRule::pairwise_symmetric(q.m(), base)?.eval(j, q))
}

/// Raw pseudo-spherical loss `+-(q_j/||q||_beta)^(beta-1)`.
pub fn lbeta_loss(beta: f64, j: usize, q: &ProbVector) -> Result<f64> {
    check(q, j, None)?;
    match BetaRegime::of(beta)? {
        BetaRegime::General(_) => Ok(ScoringRule::lbeta(q.m(), beta, false)?.eval(j, q)),
        _ => invalid("raw L_beta is undefined at beta in {0, 1, inf}; use lbeta_limit"),
    }
}

/// Rescaled `L_beta` at the distinguished points `beta in {0, 1/2, 1, inf}`.
pub fn lbeta_limit(beta: f64, j: usize, q: &ProbVector) -> Result<f64> {
    check(q, j, None)?;
    if !(beta == 0.0 || beta == 0.5 || beta == 1.0 || beta.is_infinite()) {
        return invalid("lbeta_limit accepts beta in {0, 1/2, 1, inf}");
    }
    Ok(ScoringRule::lbeta(q.m(), beta, true)?.eval(j, q))
}

/// `|R_L(eta, q) - [H(q) - (q - eta)^T dH(q)]|` for an interior `q`.
pub fn canonical_representation_residual(
    rule: &ScoringRule,
    eta: &ProbVector,
    q: &ProbVector,
) -> Result<f64> {
    if eta.m() != rule.m() || q.m() != rule.m() {
        return invalid("dimension mismatch");
    }
    if q.iter().any(|x| *x <= 0.0) {
        return invalid("canonical representation needs an interior q");
    }
    let h = rule.entropy();
    let g = h.supergradient(q);
    let lin: f64 = q
        .iter()
        .zip(eta.iter())
        .zip(&g)
        .map(|((a, b), gi)| (a - b) * gi)
        .sum();
    let rhs = h.value(q) - lin;
    Ok((rule.risk_at(eta, q) - rhs).abs())
}
