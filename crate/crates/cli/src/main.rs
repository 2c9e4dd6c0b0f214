//! `mcloss`: verification suites, bound sweeps and toy training.
//!
//! Exit codes: 0 when every check passes, 1 on bound violations or training
//! failure, 2 on usage or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcloss_core::error::Error;
use mcloss_core::hinge::HingeKind;
use mcloss_core::regret::{PsiKind, PsiParams};
use mcloss_core::simplex::CostMatrix;
use mcloss_core::suites::{
    fmt_num, rule_by_name, run_suite, sweep_hinge_surface, sweep_psi, write_reports_csv,
    write_sweep_csv, write_witness_json, Suite, SuiteConfig,
};
use mcloss_core::training::{
    evaluate_zero_one, family_by_name, fit, posterior_l1, prediction_disagreements,
    synth_gaussians, Dataset, LinearModel, LinkKind, PredictionMap, TrainConfig,
};
use serde::Deserialize;

const MAX_MESH_M: usize = 4;

#[derive(Parser, Debug)]
#[command(
    name = "mcloss",
    version,
    about = "Multi-category loss calculus: checks, sweeps and training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a verification suite and write its reports and witnesses.
    Verify(Flags),
    /// Tabulate a profile or a hinge bound slack surface.
    Sweep(Flags),
    /// Fit a linear model and write it with its metrics.
    Train(Flags),
    /// Evaluate a saved model.
    Eval(Flags),
}

/// Flags shared by every command; each overrides the same key of `--config`.
#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON file with any of the flag keys (snake_case).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suite name for `verify`.
    #[arg(long)]
    suite: Option<String>,
    /// Number of classes.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mesh or grid density.
    #[arg(long)]
    density: Option<usize>,
    /// Loss family: a hinge kind or a scoring-rule name.
    #[arg(long)]
    family: Option<String>,
    /// Sweep kind: a profile name or `hinge-zo4`, `hinge-zo3`, `hinge-cw3`.
    #[arg(long)]
    kind: Option<String>,
    /// Fixed action for `psi_q` kinds, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q: Option<Vec<f64>>,
    /// Class weights for `psi_RW`, comma separated.
    #[arg(long, value_delimiter = ',')]
    c0: Option<Vec<f64>>,
    /// Profile grid points.
    #[arg(long)]
    points: Option<usize>,
    /// Training or evaluation CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Held-out CSV for `train`.
    #[arg(long)]
    test_data: Option<PathBuf>,
    /// Model JSON for `eval`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Prediction map: probability, tau_tilde, tau_dag or sigma_l.
    #[arg(long)]
    prediction: Option<String>,
    /// Feature dimension of synthetic data.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Distance scale of the synthetic class means.
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
}

/// Everything a run needs; flags override the config file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    suite: Option<String>,
    m: Option<usize>,
    beta: Option<f64>,
    seed: Option<u64>,
    samples: Option<usize>,
    out: Option<PathBuf>,
    density: Option<usize>,
    family: Option<String>,
    kind: Option<String>,
    q: Option<Vec<f64>>,
    c0: Option<Vec<f64>>,
    /// Cost matrix for `cw3` training and the cost profile kinds.
    cost: Option<CostMatrix>,
    points: Option<usize>,
    data: Option<PathBuf>,
    test_data: Option<PathBuf>,
    model: Option<PathBuf>,
    prediction: Option<String>,
    d: Option<usize>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    separation: Option<f64>,
    steps: Option<usize>,
    step_size: Option<f64>,
    ridge: Option<f64>,
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident, $($f:ident),*) => {
        $(if $flags.$f.is_some() { $cfg.$f = $flags.$f; })*
    };
}

impl RunConfig {
    fn resolve(flags: Flags) -> Result<Self, Error> {
        let mut cfg = match &flags.config {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => RunConfig::default(),
        };
        overlay!(
            cfg, flags, suite, m, beta, seed, samples, out, density, family, kind, q, c0, points,
            data, test_data, model, prediction, d, n_train, n_test, separation, steps, step_size,
            ridge
        );
        Ok(cfg)
    }

    fn m(&self) -> usize {
        self.m.unwrap_or(3)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn train_config(&self) -> TrainConfig {
        let def = TrainConfig::default();
        TrainConfig {
            steps: self.steps.unwrap_or(def.steps),
            step_size: self.step_size.unwrap_or(def.step_size),
            ridge: self.ridge.unwrap_or(def.ridge),
            seed: self.seed(),
        }
    }

    fn separation(&self) -> f64 {
        self.separation.unwrap_or(4.0)
    }
}

/// A failed run with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Training(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn cmd_verify(cfg: &RunConfig) -> Result<u8, Failure> {
    let name = cfg
        .suite
        .as_deref()
        .ok_or_else(|| usage("verify needs --suite"))?;
    let suite: Suite = name.parse()?;
    let scfg = SuiteConfig {
        m: cfg.m(),
        seed: cfg.seed(),
        samples: cfg.samples,
        beta: cfg.beta,
        density: cfg.density,
    };
    let outcome = run_suite(suite, &scfg)?;
    let out = cfg.out();
    create_dir(&out)?;
    write_reports_csv(&out.join(format!("{}.csv", suite.name())), &outcome.reports)?;
    write_witness_json(
        &out.join(format!("{}_witness.json", suite.name())),
        &outcome.reports,
    )?;
    for r in &outcome.reports {
        println!(
            "{} {} worst_slack={} violations={}",
            if r.passed() { "ok  " } else { "FAIL" },
            r.bound_id,
            fmt_num(r.worst_slack),
            r.violations
        );
    }
    println!(
        "suite {} m={}: {} reports, {} violations",
        suite.name(),
        scfg.m,
        outcome.reports.len(),
        outcome.violations()
    );
    Ok(if outcome.passed() { 0 } else { 1 })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<u8, Failure> {
    let kind = cfg
        .kind
        .as_deref()
        .ok_or_else(|| usage("sweep needs --kind"))?;
    let m = cfg.m();
    if m > MAX_MESH_M {
        return Err(usage(format!(
            "sweeps use simplex meshes and need m <= {MAX_MESH_M}"
        )));
    }
    let rows = if let Some(variant) = kind.strip_prefix("hinge-") {
        let variant: HingeKind = variant.parse()?;
        sweep_hinge_surface(variant, m, cfg.density.unwrap_or(10))?
    } else {
        let psi: PsiKind = kind.parse()?;
        let family = cfg.family.as_deref().unwrap_or("likelihood");
        let rule = rule_by_name(family, m, cfg.beta)?;
        if cfg.density == Some(0) {
            return Err(usage("density must be positive"));
        }
        let params = PsiParams {
            q: cfg.q.clone(),
            cost: cfg.cost.clone(),
            c0: cfg.c0.clone(),
            mesh: cfg.density,
        };
        sweep_psi(psi, &rule, &params, cfg.points.unwrap_or(100))?
    };
    let out = cfg.out();
    create_dir(&out)?;
    let path = out.join(format!("{kind}.csv"));
    write_sweep_csv(&path, &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    let negative = rows
        .iter()
        .filter(|r| r.slack.is_some_and(|s| s < -1e-9 || s.is_nan()))
        .count();
    if negative > 0 {
        println!("{negative} rows with negative slack");
        return Ok(1);
    }
    Ok(0)
}

/// Train and test sets from CSV paths or the synthetic generator.
fn load_data(cfg: &RunConfig, m: Option<usize>) -> Result<(Dataset, Option<Dataset>), Failure> {
    if let Some(p) = &cfg.data {
        let train = Dataset::read_csv(p, m.or(cfg.m))?;
        let test = match &cfg.test_data {
            Some(t) => Some(Dataset::read_csv(t, Some(train.m))?),
            None => None,
        };
        return Ok((train, test));
    }
    let m = m.unwrap_or_else(|| cfg.m());
    let d = cfg.d.unwrap_or(2);
    let seed = cfg.seed();
    let train = synth_gaussians(m, d, cfg.n_train.unwrap_or(600), cfg.separation(), seed)?;
    let test = synth_gaussians(
        m,
        d,
        cfg.n_test.unwrap_or(2000),
        cfg.separation(),
        seed.wrapping_add(1),
    )?;
    Ok((train, Some(test)))
}

fn prediction(cfg: &RunConfig, model: &LinearModel) -> Result<PredictionMap, Failure> {
    match &cfg.prediction {
        Some(p) => Ok(p.parse()?),
        None => Ok(model.family.default_prediction()),
    }
}

fn write_metrics(path: &Path, rows: &[(String, f64)]) -> Result<(), Error> {
    let mut s = String::from("metric,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{}\n", fmt_num(*v)));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Risks of `model` on `data` under the requested map and, for margin
/// models, under both simplex maps.
fn risk_rows(
    model: &LinearModel,
    data: &Dataset,
    map: PredictionMap,
    tag: &str,
) -> Result<Vec<(String, f64)>, Error> {
    let mut rows = vec![(format!("{tag}_risk"), evaluate_zero_one(model, data, map)?)];
    match model.link {
        LinkKind::Margin => {
            for alt in [PredictionMap::TauTilde, PredictionMap::TauDag] {
                rows.push((
                    format!("{tag}_risk_{}", alt.name()),
                    evaluate_zero_one(model, data, alt)?,
                ));
            }
            rows.push((
                format!("{tag}_disagreements"),
                prediction_disagreements(model, data) as f64,
            ));
        }
        LinkKind::Softmax => {
            if data.meta.is_some() {
                rows.push((format!("{tag}_posterior_l1"), posterior_l1(model, data)?));
            }
        }
    }
    Ok(rows)
}

fn cmd_train(cfg: &RunConfig) -> Result<u8, Failure> {
    let (train, test) = load_data(cfg, None)?;
    let family = family_by_name(
        cfg.family.as_deref().unwrap_or("zo4"),
        train.m,
        cfg.beta,
        cfg.cost.clone(),
    )?;
    let result = fit(None, &train, &family, &cfg.train_config())?;
    let model = result.model.clone();
    let map = prediction(cfg, &model)?;
    let out = cfg.out();
    create_dir(&out)?;
    model.save(&out.join("model.json"))?;
    if cfg.data.is_none() {
        train.write_csv(&out.join("train.csv"))?;
        if let Some(t) = &test {
            t.write_csv(&out.join("test.csv"))?;
        }
    }
    let mut rows = vec![
        ("initial_objective".to_string(), result.initial_objective),
        ("final_objective".to_string(), result.final_objective()),
    ];
    rows.extend(risk_rows(&model, &train, map, "train")?);
    if let Some(t) = &test {
        rows.extend(risk_rows(&model, t, map, "test")?);
    }
    write_metrics(&out.join("metrics.csv"), &rows)?;
    println!("family {} prediction {}", family.label(), map.name());
    for (k, v) in &rows {
        println!("{k}={}", fmt_num(*v));
    }
    Ok(0)
}

fn cmd_eval(cfg: &RunConfig) -> Result<u8, Failure> {
    let path = cfg
        .model
        .as_ref()
        .ok_or_else(|| usage("eval needs --model"))?;
    let model = LinearModel::load(path)?;
    let data = match &cfg.data {
        Some(p) => Dataset::read_csv(p, Some(model.m))?,
        None => synth_gaussians(
            model.m,
            model.d,
            cfg.n_test.unwrap_or(2000),
            cfg.separation(),
            cfg.seed().wrapping_add(1),
        )?,
    };
    let map = prediction(cfg, &model)?;
    let rows = risk_rows(&model, &data, map, "eval")?;
    if let Some(out) = &cfg.out {
        create_dir(out)?;
        write_metrics(&out.join("eval.csv"), &rows)?;
    }
    println!("family {} prediction {}", model.family.label(), map.name());
    for (k, v) in &rows {
        println!("{k}={}", fmt_num(*v));
    }
    Ok(0)
}

type Runner = fn(&RunConfig) -> Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (flags, run): (Flags, Runner) = match cli.command {
        Command::Verify(f) => (f, cmd_verify),
        Command::Sweep(f) => (f, cmd_sweep),
        Command::Train(f) => (f, cmd_train),
        Command::Eval(f) => (f, cmd_eval),
    };
    let result = RunConfig::resolve(flags)
        .map_err(Failure::from)
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
