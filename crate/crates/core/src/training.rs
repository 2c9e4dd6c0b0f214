//! Empirical risk minimization with linear action functions on synthetic
//! Gaussian data, and zero-one evaluation through prediction mappings.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hinge::{predict_dag, predict_tilde, HingeKind, HingeLoss};
use crate::loss::Loss;
use crate::numeric::sum_zero_basis;
use crate::scoring::{softmax, CompositeLoss, RuleDescriptor, ScoringRule};
use crate::simplex::{argmax_lowest, norm_l1, CostMatrix};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// How a synthetic dataset was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    pub seed: u64,
    /// Class means, one row per class.
    pub means: Vec<Vec<f64>>,
    /// Isotropic noise standard deviation.
    pub noise: f64,
}

/// Features `n x d` with 0-based labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub m: usize,
    pub meta: Option<GeneratorMeta>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, m: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return invalid("features and labels differ in length");
        }
        if m < 2 || labels.len() < m {
            return invalid("need m >= 2 and at least m examples");
        }
        let d = features.first().map_or(0, |x| x.len());
        if d == 0 || features.iter().any(|x| x.len() != d) {
            return invalid("feature rows must share a positive dimension");
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("features must be finite");
        }
        if labels.iter().any(|&y| y >= m) {
            return invalid("label out of range");
        }
        Ok(Dataset {
            features,
            labels,
            m,
            meta: None,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.features[0].len()
    }

    /// Generative posterior `pi(x)` when the generator is known.
    pub fn posterior(&self, x: &[f64]) -> Option<Vec<f64>> {
        let meta = self.meta.as_ref()?;
        let s2 = meta.noise * meta.noise;
        let scores: Vec<f64> = meta
            .means
            .iter()
            .map(|mu| {
                let dot: f64 = mu.iter().zip(x).map(|(a, b)| a * b).sum();
                let nn: f64 = mu.iter().map(|a| a * a).sum();
                (dot - nn / 2.0) / s2
            })
            .collect();
        Some(softmax(&scores))
    }

    /// Writes `x1..xd,y` with 1-based labels.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.d()).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            rec.push((y + 1).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `x1..xd,y` file; `m` defaults to the largest label.
    pub fn read_csv(path: &Path, m: Option<usize>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.len() < 2 || headers.get(headers.len() - 1) != Some("y") {
            return invalid("dataset header must be x1..xd,y");
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<&str> = rec.iter().collect();
            let (y, x) = vals.split_last().expect("nonempty record");
            let x: std::result::Result<Vec<f64>, _> = x.iter().map(|v| v.trim().parse()).collect();
            let x = x.map_err(|e| Error::InvalidInput(format!("bad feature: {e}")))?;
            let y: usize = y
                .trim()
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad label: {e}")))?;
            if y == 0 {
                return invalid("labels in the CSV are 1-based");
            }
            features.push(x);
            labels.push(y - 1);
        }
        let m = m.unwrap_or_else(|| labels.iter().max().map_or(0, |y| y + 1));
        Dataset::new(features, labels, m)
    }
}

/// Unit-norm class directions in `R^d`: a regular simplex when
/// `d >= m - 1`, else equally spaced points on a circle (or `+-1` on a line).
fn class_frame(m: usize, d: usize) -> Vec<Vec<f64>> {
    if d >= m - 1 {
        let basis = sum_zero_basis(m);
        let scale = (m as f64 / (m as f64 - 1.0)).sqrt();
        (0..m)
            .map(|k| {
                let mut v = vec![0.0; d];
                for (i, b) in basis.iter().enumerate() {
                    v[i] = b[k] * scale;
                }
                v
            })
            .collect()
    } else if d == 1 {
        (0..m)
            .map(|k| vec![-1.0 + 2.0 * k as f64 / (m as f64 - 1.0)])
            .collect()
    } else {
        (0..m)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let mut v = vec![0.0; d];
                v[0] = a.cos();
                v[1] = a.sin();
                v
            })
            .collect()
    }
}

/// Equal-prior Gaussian classes with unit noise and means `separation`
/// times unit class directions.
pub fn synth_gaussians(
    m: usize,
    d: usize,
    n: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if m < 2 || d < 1 || n < m {
        return invalid("need m >= 2, d >= 1 and n >= m");
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return invalid("separation must be finite and nonnegative");
    }
    let means: Vec<Vec<f64>> = class_frame(m, d)
        .into_iter()
        .map(|u| u.into_iter().map(|v| v * separation).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.gen_range(0..m);
        let x: Vec<f64> = means[y]
            .iter()
            .map(|mu| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mu + z
            })
            .collect();
        features.push(x);
        labels.push(y);
    }
    let mut ds = Dataset::new(features, labels, m)?;
    ds.meta = Some(GeneratorMeta {
        seed,
        means,
        noise: 1.0,
    });
    Ok(ds)
}

// ---------------------------------------------------------------------------
// Families and models
// ---------------------------------------------------------------------------

/// A trainable loss family; all act on `m - 1` linear outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFamily {
    /// A scoring rule through the softmax link with the last score pinned.
    Composite { rule: RuleDescriptor },
    /// A hinge-like loss on `tau in R^(m-1)`.
    Hinge {
        family: HingeKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost: Option<CostMatrix>,
    },
}

impl LossFamily {
    pub fn composite(rule: &ScoringRule) -> Self {
        LossFamily::Composite {
            rule: rule.descriptor(),
        }
    }

    pub fn hinge(family: HingeKind) -> Self {
        LossFamily::Hinge { family, cost: None }
    }

    pub fn label(&self) -> String {
        match self {
            LossFamily::Composite { rule } => format!("composite_{}", rule.family),
            LossFamily::Hinge { family, .. } => family.name().to_string(),
        }
    }

    /// The evaluator for `m` classes.
    pub fn build(&self, m: usize) -> Result<TrainLoss> {
        match self {
            LossFamily::Composite { rule } => {
                if rule.m != m {
                    return invalid(format!("rule has m = {}, data has m = {m}", rule.m));
                }
                Ok(TrainLoss::Composite(
                    ScoringRule::from_descriptor(rule)?.composite_loss(),
                ))
            }
            LossFamily::Hinge { family, cost } => {
                if !family.uses_tau() {
                    return invalid(format!(
                        "family {family} uses an m-dimensional action and is not trainable here"
                    ));
                }
                let l = match cost {
                    Some(c) if *family == HingeKind::Cw3 => {
                        if c.m() != m {
                            return invalid("cost matrix size differs from m");
                        }
                        HingeLoss::with_cost(*family, c.clone())?
                    }
                    Some(_) => return invalid(format!("family {family} does not take costs")),
                    None => HingeLoss::new(*family, m)?,
                };
                Ok(TrainLoss::Hinge(l))
            }
        }
    }

    /// The prediction mapping matching the family.
    pub fn default_prediction(&self) -> PredictionMap {
        match self {
            LossFamily::Composite { .. } => PredictionMap::Probability,
            LossFamily::Hinge { family, .. } => match family {
                HingeKind::Cw3 | HingeKind::Zo3 => PredictionMap::TauDag,
                _ => PredictionMap::TauTilde,
            },
        }
    }
}

/// A loss evaluator with (sub)gradients in the action.
#[derive(Debug, Clone)]
pub enum TrainLoss {
    Composite(CompositeLoss),
    Hinge(HingeLoss),
}

impl TrainLoss {
    pub fn value(&self, j: usize, a: &[f64]) -> f64 {
        match self {
            TrainLoss::Composite(l) => l.loss(j, a),
            TrainLoss::Hinge(l) => l.loss(j, a),
        }
    }

    pub fn gradient(&self, j: usize, a: &[f64]) -> Vec<f64> {
        match self {
            TrainLoss::Composite(l) => l.gradient(j, a),
            TrainLoss::Hinge(l) => l.subgradient(j, a),
        }
    }
}

/// Conversion of an action to a predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMap {
    /// `argmax softmax(h, 0)`.
    Probability,
    /// `argmax (tau, 1 - sum tau)`.
    TauTilde,
    /// `argmax (tau, 1 - sum (tau_k)_+)`.
    TauDag,
    /// `argmax (-L(1, a), ..., -L(m, a))`.
    SigmaL,
}

impl PredictionMap {
    pub fn name(self) -> &'static str {
        match self {
            PredictionMap::Probability => "probability",
            PredictionMap::TauTilde => "tau_tilde",
            PredictionMap::TauDag => "tau_dag",
            PredictionMap::SigmaL => "sigma_l",
        }
    }
}

impl std::str::FromStr for PredictionMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            PredictionMap::Probability,
            PredictionMap::TauTilde,
            PredictionMap::TauDag,
            PredictionMap::SigmaL,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::InvalidInput(format!("unknown prediction map {s:?}")))
    }
}

/// Predicted class of an action under `map`.
pub fn predict_action(loss: &TrainLoss, map: PredictionMap, a: &[f64]) -> usize {
    match map {
        PredictionMap::Probability => {
            let mut h = a.to_vec();
            h.push(0.0);
            argmax_lowest(&softmax(&h))
        }
        PredictionMap::TauTilde => argmax_lowest(&predict_tilde(a)),
        PredictionMap::TauDag => argmax_lowest(&predict_dag(a)),
        PredictionMap::SigmaL => {
            let m = a.len() + 1;
            let s: Vec<f64> = (0..m).map(|j| -loss.value(j, a)).collect();
            argmax_lowest(&s)
        }
    }
}

/// Link between linear outputs and the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Softmax,
    Margin,
}

/// `a(x) = W [x; 1]` with `m - 1` output rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub m: usize,
    pub d: usize,
    /// `(m - 1) x (d + 1)`; the last column is the bias.
    pub weights: Vec<Vec<f64>>,
    pub family: LossFamily,
    pub link: LinkKind,
}

impl LinearModel {
    pub fn zeros(m: usize, d: usize, family: LossFamily) -> Self {
        let link = match family {
            LossFamily::Composite { .. } => LinkKind::Softmax,
            LossFamily::Hinge { .. } => LinkKind::Margin,
        };
        LinearModel {
            m,
            d,
            weights: vec![vec![0.0; d + 1]; m - 1],
            family,
            link,
        }
    }

    pub fn action(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w[..self.d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[self.d])
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() != self.m - 1 || self.weights.iter().any(|w| w.len() != self.d + 1) {
            return invalid("weight matrix has the wrong shape");
        }
        if self.weights.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("weights must be finite");
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: LinearModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Subgradient-descent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    /// Step size at iteration `t` is `step_size / sqrt(t)`.
    pub step_size: f64,
    /// Ridge penalty `(ridge/2) ||W||^2` on non-bias weights.
    pub ridge: f64,
    /// Seed of the small random initialization when no model is given.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            step_size: 1.0,
            ridge: 0.0,
            seed: 0,
        }
    }
}

/// Objective values above this count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// A fitted model with its objective trace.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// The averaged iterate.
    pub model: LinearModel,
    /// Objective of the initial model.
    pub initial_objective: f64,
    /// Objective of the averaged iterate after each step.
    pub history: Vec<f64>,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        self.history
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }
}

/// Mean loss plus the ridge term.
pub fn objective(model: &LinearModel, loss: &TrainLoss, data: &Dataset, ridge: f64) -> f64 {
    let mut total = 0.0;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        total += loss.value(y, &model.action(x));
    }
    total / data.n() as f64 + ridge_term(model, ridge)
}

fn ridge_term(model: &LinearModel, ridge: f64) -> f64 {
    if ridge == 0.0 {
        return 0.0;
    }
    let d = model.d;
    0.5 * ridge
        * model
            .weights
            .iter()
            .map(|w| w[..d].iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
}

/// Full-batch subgradient descent with step `c/sqrt(t)`, returning the
/// average of the iterates.
pub fn fit(
    init: Option<LinearModel>,
    data: &Dataset,
    family: &LossFamily,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    let m = data.m;
    let d = data.d();
    let loss = family.build(m)?;
    if !(cfg.step_size.is_finite() && cfg.step_size > 0.0) || cfg.ridge.is_nan() || cfg.ridge < 0.0
    {
        return invalid("step size must be positive and ridge nonnegative");
    }
    let mut w = match init {
        Some(model) => {
            model.validate()?;
            if model.m != m || model.d != d || &model.family != family {
                return invalid("initial model does not match the data or family");
            }
            model
        }
        None => {
            let mut model = LinearModel::zeros(m, d, family.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for row in model.weights.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.gen_range(-0.01..0.01);
                }
            }
            model
        }
    };
    let initial_objective = objective(&w, &loss, data, cfg.ridge);
    let mut avg = w.clone();
    let mut history = Vec::with_capacity(cfg.steps);
    let n = data.n() as f64;
    for t in 1..=cfg.steps {
        let mut g = vec![vec![0.0; d + 1]; m - 1];
        for (x, &y) in data.features.iter().zip(&data.labels) {
            let a = w.action(x);
            let ga = loss.gradient(y, &a);
            for (row, gk) in g.iter_mut().zip(&ga) {
                if *gk == 0.0 {
                    continue;
                }
                for (gi, xi) in row[..d].iter_mut().zip(x) {
                    *gi += gk * xi;
                }
                row[d] += gk;
            }
        }
        let eta = cfg.step_size / (t as f64).sqrt();
        for (row, grow) in w.weights.iter_mut().zip(&g) {
            for i in 0..=d {
                let reg = if i < d { cfg.ridge * row[i] } else { 0.0 };
                row[i] -= eta * (grow[i] / n + reg);
            }
        }
        let tf = t as f64;
        for (arow, wrow) in avg.weights.iter_mut().zip(&w.weights) {
            for (a, v) in arow.iter_mut().zip(wrow) {
                *a += (v - *a) / tf;
            }
        }
        let obj = objective(&avg, &loss, data, cfg.ridge);
        let cur = objective(&w, &loss, data, cfg.ridge);
        if !obj.is_finite() || obj > DIVERGENCE_LIMIT || !cur.is_finite() || cur > DIVERGENCE_LIMIT
        {
            return Err(Error::Training(format!(
                "diverged at step {t}: iterate objective {cur}, averaged objective {obj}, \
                 step size {eta}"
            )));
        }
        history.push(obj);
    }
    Ok(FitResult {
        model: if cfg.steps == 0 { w } else { avg },
        initial_objective,
        history,
    })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Mean zero-one loss of the model's predictions under `map`.
pub fn evaluate_zero_one(model: &LinearModel, data: &Dataset, map: PredictionMap) -> Result<f64> {
    if model.m != data.m || model.d != data.d() {
        return invalid("model and data dimensions differ");
    }
    let loss = model.family.build(model.m)?;
    let errors = data
        .features
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| predict_action(&loss, map, &model.action(x)) != y)
        .count();
    Ok(errors as f64 / data.n() as f64)
}

/// Mean `||q_hat(x) - pi(x)||_1` between the softmax probabilities of a
/// composite model and the generative posterior.
pub fn posterior_l1(model: &LinearModel, data: &Dataset) -> Result<f64> {
    if model.link != LinkKind::Softmax {
        return invalid("probability metrics need a softmax model");
    }
    if data.meta.is_none() {
        return invalid("dataset has no generator metadata");
    }
    let mut total = 0.0;
    for x in &data.features {
        let mut h = model.action(x);
        h.push(0.0);
        let q = softmax(&h);
        let p = data.posterior(x).expect("meta present");
        let diff: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
        total += norm_l1(&diff);
    }
    Ok(total / data.n() as f64)
}

/// Points whose `tau_dag` and `tilde_tau` predictions differ.
pub fn prediction_disagreements(model: &LinearModel, data: &Dataset) -> usize {
    data.features
        .iter()
        .filter(|x| {
            let a = model.action(x);
            argmax_lowest(&predict_dag(&a)) != argmax_lowest(&predict_tilde(&a))
        })
        .count()
}

/// Zero-one error rate of the Bayes rule under the generator.
pub fn bayes_error(data: &Dataset) -> Result<f64> {
    if data.meta.is_none() {
        return invalid("dataset has no generator metadata");
    }
    let errors = data
        .features
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| argmax_lowest(&data.posterior(x).expect("meta")) != y)
        .count();
    Ok(errors as f64 / data.n() as f64)
}

/// A family by name: a hinge kind (`zo4`, `cw3`, ...) or a scoring rule
/// name accepted by [`crate::suites::rule_by_name`], used through the link.
pub fn family_by_name(
    name: &str,
    m: usize,
    beta: Option<f64>,
    cost: Option<CostMatrix>,
) -> Result<LossFamily> {
    if let Ok(kind) = name.parse::<HingeKind>() {
        let fam = LossFamily::Hinge { family: kind, cost };
        fam.build(m)?;
        return Ok(fam);
    }
    if cost.is_some() {
        return invalid("cost matrices apply to the cw3 family only");
    }
    let rule = crate::suites::rule_by_name(name, m, beta)?;
    Ok(LossFamily::composite(&rule))
}
