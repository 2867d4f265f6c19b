//! Subcommand implementations and the exit-code contract.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;
use ldrr::cv::cross_validate;
use ldrr::ldrr::PreparedData;
use ldrr::regression::lambda_grid;
use ldrr::simulation::{
    fit_classifier, run_experiment, select_penalty, ExperimentOptions, LambdaChoice, LowRankScenarioConfig, Method,
    ScenarioConfig, SparseScenarioConfig, TrainedClassifier,
};
use ldrr::{FitOptions, PenaltyKind};

use crate::args::{ApplyArgs, Cli, Command, CvArgs, FitArgs, PenaltyName, ScenarioName, SimulateArgs, VaryParam};
use crate::dataset::{load_csv_dataset, load_for_model};
use crate::error::CliError;
use crate::model_file::{load_model, save_model, Classifier, FitEcho, SavedModel};

pub const REPORT_HEADER: &str = "scenario,param,value,method,mean_error,se,bayes_error,excess_risk,h_warnings";

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code: 0 success, 1 usage, 2 data, 3 numeric failure.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let display_only = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            if display_only {
                return 0;
            }
            eprintln!("{}", CliError::Usage(e.kind().to_string()).line());
            return 1;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = serde_json::to_string(cli).map_err(|e| CliError::Usage(e.to_string()))?;
    eprintln!("ldrr-config seed={} {config}", cli.common.seed);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Cv(a) => cv(cli, a),
        Command::Predict(a) => predict(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Project(a) => project(cli, a),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn note(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.common.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

/// CSV field with quotes when needed.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fit_options(standardize: bool) -> FitOptions {
    FitOptions {
        standardize,
        ..Default::default()
    }
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<(), CliError> {
    if a.k.is_some() && !a.fisher {
        return Err(CliError::Usage("--k requires --fisher".into()));
    }
    let lambda = a.tuning.cv.lambda_choice()?;
    let ds = load_csv_dataset(&a.train, &a.label_column)?;
    let opts = fit_options(a.tuning.cv.standardize);
    let (penalty, _) = select_penalty(&ds.data, a.tuning.kind(), lambda, cli.common.seed, &opts)?;
    let fisher = a.fisher.then_some(a.k);
    let classifier = match fit_classifier(&ds.data, &penalty, fisher, &opts)? {
        TrainedClassifier::Ldrr(m) => Classifier::Ldrr(m),
        TrainedClassifier::LdrrF(m) => Classifier::LdrrF(m),
    };
    let pred = classifier.predict(ds.data.x())?;
    let wrong = pred.iter().zip(ds.data.labels()).filter(|(p, y)| p != y).count();
    if let Classifier::Ldrr(m) = &classifier {
        if m.h_near_singular() {
            note(cli, format!("warning: H_hat is near singular (sigma_min/sigma_max = {:e})", m.h_min_singular / m.h_max_singular));
        }
    }
    let saved = SavedModel {
        classifier,
        class_names: ds.class_names,
        feature_names: ds.feature_names,
        config: FitEcho {
            seed: cli.common.seed,
            penalty: a.tuning.penalty.as_str().to_string(),
            lambda: a.tuning.cv.lambda.clone(),
            alpha: a.tuning.cv.alpha,
            fisher: a.fisher,
            k: a.k,
            standardize: a.tuning.cv.standardize,
            cv_folds: a.tuning.cv.folds,
            cv_grid: a.tuning.cv.grid,
            label_column: a.label_column.clone(),
            train: a.train.display().to_string(),
        },
    };
    save_model(&saved, &a.model)?;
    note(
        cli,
        format!(
            "fitted {} model, penalty {}, training error {}/{}; saved to {}",
            saved.classifier.kind(),
            serde_json::to_string(&penalty).unwrap_or_default(),
            wrong,
            pred.len(),
            a.model.display()
        ),
    );
    Ok(())
}

fn cv(cli: &Cli, a: &CvArgs) -> Result<(), CliError> {
    let kind = a.tuning.kind();
    if kind == PenaltyKind::None {
        return Err(CliError::Usage("nothing to cross-validate for --penalty none".into()));
    }
    let ds = load_csv_dataset(&a.train, &a.label_column)?;
    let opts = fit_options(a.tuning.cv.standardize);
    let grid = match a.tuning.cv.lambda_choice()? {
        LambdaChoice::Fixed { lambda } => vec![lambda],
        LambdaChoice::Cv { n_grid, .. } => {
            let prepared = PreparedData::new(&ds.data, opts.standardize)?;
            lambda_grid(prepared.data.x(), prepared.data.y(), kind, n_grid)?
        }
    };
    let r = cross_validate(&ds.data, kind, &grid, a.tuning.cv.folds, cli.common.seed, a.tuning.cv.loss.loss(), &opts)?;
    let mut out = String::from("index,lambda,mean_loss,se_loss,selected\n");
    for (i, c) in r.candidates.iter().enumerate() {
        let lambda = c.lambda().map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{i},{lambda},{},{},{}", r.mean_loss[i], r.se_loss[i], u8::from(i == r.best_index));
    }
    emit(cli.common.out.as_deref(), &out)?;
    note(cli, format!("selected {}", serde_json::to_string(&r.best).unwrap_or_default()));
    Ok(())
}

fn predict(cli: &Cli, a: &ApplyArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let (x, _) = load_for_model(&a.data, &a.label_column, &model.feature_names, &model.class_names)?;
    let pred = model.classifier.predict(&x)?;
    let mut out = String::from("predicted\n");
    for k in pred {
        out.push_str(&field(&model.class_names[k]));
        out.push('\n');
    }
    emit(cli.common.out.as_deref(), &out)
}

fn evaluate(cli: &Cli, a: &ApplyArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let (x, labels) = load_for_model(&a.data, &a.label_column, &model.feature_names, &model.class_names)?;
    let labels = labels.ok_or_else(|| CliError::Data(format!("label column '{}' not found in {}", a.label_column, a.data.display())))?;
    let pred = model.classifier.predict(&x)?;
    let errors = pred.iter().zip(&labels).filter(|(p, y)| p != y).count();
    let n = labels.len();
    let rate = if n > 0 { errors as f64 / n as f64 } else { f64::NAN };
    emit(cli.common.out.as_deref(), &format!("metric,value\nn,{n}\nerrors,{errors}\nerror_rate,{rate}\n"))?;
    note(cli, format!("error rate {rate} ({errors}/{n})"));
    Ok(())
}

fn project(cli: &Cli, a: &ApplyArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let Classifier::LdrrF(f) = &model.classifier else {
        return Err(CliError::Usage("project needs a model fitted with --fisher".into()));
    };
    let (x, labels) = load_for_model(&a.data, &a.label_column, &model.feature_names, &model.class_names)?;
    let coords = f.project(&x)?;
    // true labels when the file has them, predictions otherwise
    let (tags, column) = match labels {
        Some(l) => (l, "label"),
        None => (f.predict(&x)?, "predicted"),
    };
    let mut out = String::new();
    for k in 0..f.k() {
        let _ = write!(out, "d{},", k + 1);
    }
    out.push_str(column);
    out.push('\n');
    for (i, &tag) in tags.iter().enumerate() {
        for k in 0..f.k() {
            let _ = write!(out, "{},", coords[(i, k)]);
        }
        out.push_str(&field(&model.class_names[tag]));
        out.push('\n');
    }
    emit(cli.common.out.as_deref(), &out)
}

/// Methods from a comma-separated list (`bayes`, `lasso`, `f-rr`, ...).
pub fn parse_methods(spec: &str, alpha: f64, lambda: LambdaChoice) -> Result<Vec<Method>, CliError> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|tok| {
            if tok == "bayes" {
                return Ok(Method::BayesOracle);
            }
            let (fisher, name) = match tok.strip_prefix("f-") {
                Some(rest) => (true, rest),
                None => (false, tok),
            };
            let kind = PenaltyName::parse(name)
                .ok_or_else(|| CliError::Usage(format!("unknown method '{tok}'")))?
                .kind(alpha);
            Ok(if fisher {
                Method::LdrrF { kind, lambda, k: None }
            } else {
                Method::Ldrr { kind, lambda }
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|m| if m.is_empty() { Err(CliError::Usage("--methods is empty".into())) } else { Ok(m) })
}

fn base_scenario(a: &SimulateArgs, seed: u64) -> ScenarioConfig {
    match a.scenario {
        ScenarioName::Sparse => {
            let d = SparseScenarioConfig::default();
            ScenarioConfig::Sparse(SparseScenarioConfig {
                n: a.n.unwrap_or(d.n),
                p: a.p.unwrap_or(d.p),
                n_classes: a.classes.unwrap_or(d.n_classes),
                rho: a.rho.unwrap_or(d.rho),
                sigma: a.sigma.unwrap_or(d.sigma),
                alpha: a.prior_alpha.unwrap_or(d.alpha),
                n_test: a.n_test.unwrap_or(d.n_test),
                seed,
            })
        }
        ScenarioName::Lowrank1 | ScenarioName::Lowrank2 => {
            let d = if a.scenario == ScenarioName::Lowrank1 {
                LowRankScenarioConfig::model1()
            } else {
                LowRankScenarioConfig::model2()
            };
            ScenarioConfig::LowRank(LowRankScenarioConfig {
                n: a.n.unwrap_or(d.n),
                p: a.p.unwrap_or(d.p),
                n_classes: a.classes.unwrap_or(d.n_classes),
                rank: a.rank.unwrap_or(d.rank),
                rho: a.rho.unwrap_or(d.rho),
                eta: a.eta.unwrap_or(d.eta),
                n_test: a.n_test.unwrap_or(d.n_test),
                seed,
                ..d
            })
        }
    }
}

fn param_value(cfg: &ScenarioConfig, param: VaryParam) -> Option<f64> {
    Some(match (cfg, param) {
        (ScenarioConfig::Sparse(c), VaryParam::N) => c.n as f64,
        (ScenarioConfig::Sparse(c), VaryParam::P) => c.p as f64,
        (ScenarioConfig::Sparse(c), VaryParam::Classes) => c.n_classes as f64,
        (ScenarioConfig::Sparse(c), VaryParam::Rho) => c.rho,
        (ScenarioConfig::Sparse(c), VaryParam::Sigma) => c.sigma,
        (ScenarioConfig::Sparse(c), VaryParam::PriorAlpha) => c.alpha,
        (ScenarioConfig::LowRank(c), VaryParam::N) => c.n as f64,
        (ScenarioConfig::LowRank(c), VaryParam::P) => c.p as f64,
        (ScenarioConfig::LowRank(c), VaryParam::Classes) => c.n_classes as f64,
        (ScenarioConfig::LowRank(c), VaryParam::Rho) => c.rho,
        (ScenarioConfig::LowRank(c), VaryParam::Rank) => c.rank as f64,
        (ScenarioConfig::LowRank(c), VaryParam::Eta) => c.eta,
        _ => return None,
    })
}

fn with_param(cfg: ScenarioConfig, param: VaryParam, value: f64) -> Result<ScenarioConfig, CliError> {
    let count = || {
        if value >= 0.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(CliError::Usage(format!("--vary {} needs whole numbers, got {value}", param.as_str())))
        }
    };
    let unsupported = || CliError::Usage(format!("--vary {} does not apply to scenario {}", param.as_str(), cfg.name()));
    Ok(match cfg {
        ScenarioConfig::Sparse(mut c) => {
            match param {
                VaryParam::N => c.n = count()?,
                VaryParam::P => c.p = count()?,
                VaryParam::Classes => c.n_classes = count()?,
                VaryParam::Rho => c.rho = value,
                VaryParam::Sigma => c.sigma = value,
                VaryParam::PriorAlpha => c.alpha = value,
                VaryParam::Rank | VaryParam::Eta => return Err(unsupported()),
            }
            ScenarioConfig::Sparse(c)
        }
        ScenarioConfig::LowRank(mut c) => {
            match param {
                VaryParam::N => c.n = count()?,
                VaryParam::P => c.p = count()?,
                VaryParam::Classes => c.n_classes = count()?,
                VaryParam::Rho => c.rho = value,
                VaryParam::Rank => c.rank = count()?,
                VaryParam::Eta => c.eta = value,
                VaryParam::Sigma | VaryParam::PriorAlpha => return Err(unsupported()),
            }
            ScenarioConfig::LowRank(c)
        }
    })
}

fn scenario_label(a: &SimulateArgs) -> &'static str {
    match a.scenario {
        ScenarioName::Sparse => "sparse",
        ScenarioName::Lowrank1 => "lowrank1",
        ScenarioName::Lowrank2 => "lowrank2",
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<(), CliError> {
    let lambda = a.cv.lambda_choice()?;
    let methods = parse_methods(&a.methods, a.cv.alpha, lambda)?;
    let base = base_scenario(a, cli.common.seed);
    let (param, points): (VaryParam, Vec<ScenarioConfig>) = match (a.vary, &a.values) {
        (None, None) => (VaryParam::N, vec![base]),
        (Some(param), Some(values)) => {
            let pts = values
                .split(',')
                .map(|v| {
                    let x = v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad --values entry '{v}'")))?;
                    with_param(base, param, x)
                })
                .collect::<Result<Vec<_>, _>>()?;
            (param, pts)
        }
        _ => return Err(CliError::Usage("--vary and --values go together".into())),
    };
    let opts = ExperimentOptions {
        n_reps: a.reps,
        base_seed: cli.common.seed,
        bayes_mc_samples: a.bayes_mc,
        fit: fit_options(a.cv.standardize),
    };
    let mut out = format!("{REPORT_HEADER}\n");
    for cfg in points {
        let value = param_value(&cfg, param).expect("parameter applies to scenario");
        let report = run_experiment(&cfg, &methods, &opts)?;
        for m in &report.methods {
            let se = m.se.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                scenario_label(a),
                param.as_str(),
                value,
                field(&m.name),
                m.mean_error,
                se,
                report.bayes_error_mc,
                m.excess_risk,
                m.h_singular_warnings
            );
            if m.n_failed > 0 {
                note(cli, format!("warning: {} failed on {} of {} reps", m.name, m.n_failed, report.n_reps));
            }
        }
        note(cli, format!("{} = {value}: done ({} reps)", param.as_str(), report.n_reps));
    }
    emit(cli.common.out.as_deref(), &out)
}
