//! Command-line front end. [`run`] parses arguments, resolves them against
//! an optional JSON config file and dispatches to a subcommand.

pub mod args;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::{json, Map, Value};

use crate::autodiff::LrSchedule;
use crate::data::{load_table, prepare, synthetic_table, SyntheticSpec, TableSchema};
use crate::error::Error;
use crate::methods::{MethodConfig, MethodKind};
use crate::metrics::{MetricReport, METRIC_COLUMNS};
use crate::runner::{
    self, bias_examination, controllability_stat, normalize_against_erm, per_lambda_medians, DataSource,
    ExperimentConfig, RunRecord, RunSummary, VerdictRule,
};

use args::{
    BiasCmd, Cli, Command, CommonArgs, DataArgs, PreprocessCmd, SweepCmd, SynthCmd, TradeoffCmd, TrainArgs, TrainCmd,
    CONFIG_KEYS,
};
use output::{create_dir, Manifest, ResultWriter};

const ADULT_SCHEMA: &str = include_str!("../../../../schemas/adult.json");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Csv(_) => EXIT_IO,
            Error::Numerical { .. } => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn required<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| CliError::usage(format!("missing required flag --{flag}")))
}

/// Parse `argv` and run the selected subcommand; returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Train(c) => cmd_train(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::ExamineBias(c) => cmd_bias(c),
        Command::Tradeoff(c) => cmd_tradeoff(c),
        Command::Synth(c) => cmd_synth(c),
        Command::Preprocess(c) => cmd_preprocess(c),
    }
}

/// Parsed `--config` file; `Value::Null` sections deserialize to defaults.
fn load_config_file(path: &Option<PathBuf>) -> CliResult<Value> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::from(Error::io(path, e)))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config file {}: {e}", path.display())))?;
    let Value::Object(map) = &value else {
        return Err(CliError::usage(format!("config file {} must hold a JSON object", path.display())));
    };
    // Manifests nest the options under "config".
    if map.contains_key("tool") {
        if let Some(inner @ Value::Object(_)) = map.get("config") {
            return check_keys(inner.clone(), path);
        }
    }
    check_keys(value, path)
}

fn check_keys(value: Value, path: &Path) -> CliResult<Value> {
    if let Value::Object(map) = &value {
        if let Some(k) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(CliError::usage(format!("config file {}: unknown key `{k}`", path.display())));
        }
    }
    Ok(value)
}

fn section<T: serde::de::DeserializeOwned>(file: &Value) -> CliResult<T> {
    serde_json::from_value(file.clone()).map_err(|e| CliError::usage(format!("config file: {e}")))
}

/// Data options after merging: where rows come from and how they are split.
struct ResolvedData {
    dataset: String,
    data: Option<PathBuf>,
    schema: Option<PathBuf>,
    sensitive_attr: Option<String>,
    split_ratio: f64,
    synth: Option<SyntheticSpec>,
    source: DataSource,
}

fn synth_spec(a: &args::SynthArgs) -> SyntheticSpec {
    let d = SyntheticSpec::default();
    SyntheticSpec {
        n: a.n.unwrap_or(d.n),
        d_num: a.d_num.unwrap_or(d.d_num),
        group_shift: a.group_shift.unwrap_or(d.group_shift),
        label_bias: a.label_bias.unwrap_or(d.label_bias),
        seed: a.data_seed.unwrap_or(d.seed),
    }
}

fn resolve_data(a: &DataArgs) -> CliResult<ResolvedData> {
    let dataset = required(&a.dataset, "dataset")?;
    let split_ratio = a.split_ratio.unwrap_or(runner::config::DEFAULT_SPLIT_RATIO);
    if dataset == "synthetic" && a.data.is_none() {
        let spec = synth_spec(&a.synth);
        spec.validate()?;
        let mut source = DataSource::synthetic(&spec)?;
        source.sensitive = a.sensitive_attr.clone();
        // Validate the attribute name early.
        source.raw.schema.sensitive_index(source.sensitive.as_deref())?;
        return Ok(ResolvedData {
            dataset,
            data: None,
            schema: None,
            sensitive_attr: a.sensitive_attr.clone(),
            split_ratio,
            synth: Some(spec),
            source,
        });
    }
    let data = required(&a.data, "data")?;
    let schema = match (&a.schema, dataset.as_str()) {
        (Some(p), _) => TableSchema::from_file(p)?,
        (None, "adult") => TableSchema::from_json_str(ADULT_SCHEMA)?,
        (None, _) => return Err(CliError::usage(format!("missing required flag --schema (no built-in schema for `{dataset}`)"))),
    };
    schema.sensitive_index(a.sensitive_attr.as_deref())?;
    let raw = load_table(&data, &schema)?;
    Ok(ResolvedData {
        dataset,
        data: Some(data),
        schema: a.schema.clone(),
        sensitive_attr: a.sensitive_attr.clone(),
        split_ratio,
        synth: None,
        source: DataSource::table(raw, a.sensitive_attr.clone()),
    })
}

fn data_echo(d: &ResolvedData, cfg: &mut Map<String, Value>) {
    cfg.insert("dataset".into(), json!(d.dataset));
    cfg.insert("data".into(), json!(d.data));
    cfg.insert("schema".into(), json!(d.schema));
    cfg.insert("sensitive_attr".into(), json!(d.sensitive_attr));
    cfg.insert("split_ratio".into(), json!(d.split_ratio));
    if let Some(s) = &d.synth {
        cfg.insert("n".into(), json!(s.n));
        cfg.insert("d_num".into(), json!(s.d_num));
        cfg.insert("group_shift".into(), json!(s.group_shift));
        cfg.insert("label_bias".into(), json!(s.label_bias));
        cfg.insert("data_seed".into(), json!(s.seed));
    }
}

fn add_inputs(d: &ResolvedData, manifest: &mut Manifest) -> CliResult<()> {
    for p in d.data.iter().chain(d.schema.iter()) {
        manifest.add_input(p)?;
    }
    Ok(())
}

fn resolve_experiment(d: &ResolvedData, t: &TrainArgs, default_method: MethodKind) -> CliResult<ExperimentConfig> {
    let kind = match &t.method {
        Some(m) => m.parse::<MethodKind>()?,
        None => default_method,
    };
    let defaults = MethodConfig::erm();
    let lambda = match (kind, t.lam) {
        (MethodKind::Erm, _) => 0.0,
        (_, Some(l)) => l,
        (_, None) => kind.default_grid()[0],
    };
    let method = MethodConfig {
        kind,
        lambda,
        adv_hidden: t.adv_hidden.unwrap_or(defaults.adv_hidden),
        latent: t.latent.unwrap_or(defaults.latent),
        recon_weight: t.recon_weight.unwrap_or(defaults.recon_weight),
    };
    method.validate()?;
    let mut cfg = ExperimentConfig::new(d.dataset.clone(), method);
    cfg.sensitive_attr = d.sensitive_attr.clone();
    cfg.split_ratio = d.split_ratio;
    let sched = LrSchedule::default();
    cfg.schedule = LrSchedule {
        initial_lr: t.lr.unwrap_or(sched.initial_lr),
        step_size: t.step_size.unwrap_or(sched.step_size),
        gamma: t.gamma.unwrap_or(sched.gamma),
    };
    if let Some(v) = t.seed {
        cfg.seed = v;
    }
    if let Some(v) = t.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = t.steps {
        cfg.total_steps = v;
    }
    if let Some(v) = t.eval_every {
        cfg.eval_every = v;
    }
    if let Some(v) = &t.hidden {
        cfg.hidden = v.0.clone();
    }
    // Small tables get a batch no larger than the training split.
    let n_train = (d.source.raw.len() as f64 * d.split_ratio).round() as usize;
    if t.batch_size.is_none() && cfg.batch_size > n_train && n_train > 0 {
        cfg.batch_size = n_train;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_echo(cfg: &ExperimentConfig, out: &mut Map<String, Value>) {
    out.insert("method".into(), json!(cfg.method.kind.name()));
    out.insert("lam".into(), json!(cfg.method.lambda));
    out.insert("adv_hidden".into(), json!(cfg.method.adv_hidden));
    out.insert("latent".into(), json!(cfg.method.latent));
    out.insert("recon_weight".into(), json!(cfg.method.recon_weight));
    out.insert("seed".into(), json!(cfg.seed));
    out.insert("lr".into(), json!(cfg.schedule.initial_lr));
    out.insert("step_size".into(), json!(cfg.schedule.step_size));
    out.insert("gamma".into(), json!(cfg.schedule.gamma));
    out.insert("batch_size".into(), json!(cfg.batch_size));
    out.insert("steps".into(), json!(cfg.total_steps));
    out.insert("eval_every".into(), json!(cfg.eval_every));
    out.insert("hidden".into(), json!(cfg.hidden));
}

fn out_dir(common: &CommonArgs) -> CliResult<PathBuf> {
    let dir = required(&common.out, "out")?;
    create_dir(&dir)?;
    Ok(dir)
}

fn metric_line(m: &MetricReport) -> String {
    let v = m.presented();
    METRIC_COLUMNS
        .iter()
        .zip(v)
        .map(|(name, x)| format!("{name}={x:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_train(mut c: TrainCmd) -> CliResult<()> {
    let file = load_config_file(&c.common.config)?;
    c.common.overlay(&section(&file)?);
    c.data.overlay(&section(&file)?);
    c.train.overlay(&section(&file)?);
    let data = resolve_data(&c.data)?;
    let cfg = resolve_experiment(&data, &c.train, MethodKind::Erm)?;
    let dir = out_dir(&c.common)?;
    let mut echo = Map::new();
    data_echo(&data, &mut echo);
    train_echo(&cfg, &mut echo);
    let mut manifest = Manifest::new("train", echo.clone());
    add_inputs(&data, &mut manifest)?;

    let prepared = data.source.materialize(cfg.split_ratio, cfg.seed)?;
    let outcome = match runner::train_one(&cfg, &prepared) {
        Ok(o) => o,
        Err(e @ Error::Numerical { .. }) => {
            output::write_json(&dir.join("failure.json"), &json!({ "error": e.to_string(), "config": echo }))?;
            manifest.finish(&dir, &["failure.json"])?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let record = &outcome.record;
    output::write_runs(&dir.join("results.csv"), &[record])?;
    output::write_curves(&dir.join("curves.csv"), &[record])?;
    runner::save_params(&outcome.model, &dir.join("params.bin"))?;
    output::write_json(&dir.join("config.json"), &echo)?;
    let fin = record.final_row();
    output::write_json(
        &dir.join("summary.json"),
        &json!({
            "method": cfg.method.kind.name(),
            "lambda": cfg.method.lambda,
            "seed": cfg.seed,
            "steps_run": record.steps_run,
            "halted_early": record.halted_early,
            "degenerate_batches": record.degenerate_batches,
            "features": prepared.train.dim(),
            "train_rows": prepared.train.len(),
            "test_rows": prepared.test.len(),
            "final": presented_json(&fin.metrics),
        }),
    )?;
    manifest.finish(&dir, &["results.csv", "curves.csv", "params.bin", "config.json", "summary.json"])?;
    println!("{} step {}: {}", cfg.method.kind, fin.step, metric_line(&fin.metrics));
    Ok(())
}

fn presented_json(m: &MetricReport) -> Value {
    let mut obj = Map::new();
    for (name, v) in METRIC_COLUMNS.iter().zip(m.presented()) {
        obj.insert(name.to_string(), json!(v));
    }
    obj.insert("flags".into(), json!(m.flags.0));
    Value::Object(obj)
}

fn cmd_sweep(mut c: SweepCmd) -> CliResult<()> {
    let file = load_config_file(&c.common.config)?;
    c.common.overlay(&section(&file)?);
    c.data.overlay(&section(&file)?);
    c.train.overlay(&section(&file)?);
    c.sweep.overlay(&section(&file)?);
    let method = required(&c.train.method, "method")?;
    let data = resolve_data(&c.data)?;
    let base = resolve_experiment(&data, &c.train, MethodKind::Erm)?;
    let kind = base.method.kind;
    let grid = c.sweep.grid.clone().map(|g| g.0).unwrap_or_else(|| kind.default_grid());
    let seeds = c.sweep.seeds.clone().map(|s| s.0).unwrap_or_else(|| vec![0, 1, 2]);
    let jobs = c.sweep.jobs.unwrap_or(1);
    let baseline = kind != MethodKind::Erm && !c.sweep.no_baseline.unwrap_or(false);
    if jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }

    let dir = out_dir(&c.common)?;
    let mut echo = Map::new();
    data_echo(&data, &mut echo);
    train_echo(&base, &mut echo);
    echo.insert("method".into(), json!(method));
    echo.remove("lam");
    echo.insert("grid".into(), json!(grid));
    echo.insert("seeds".into(), json!(seeds));
    echo.insert("jobs".into(), json!(jobs));
    echo.insert("no_baseline".into(), json!(!baseline));
    let mut manifest = Manifest::new("sweep", echo.clone());
    add_inputs(&data, &mut manifest)?;

    let mut configs = Vec::new();
    if baseline {
        let erm = ExperimentConfig {
            method: MethodConfig::erm(),
            ..base.clone()
        };
        configs.extend(runner::sweep_configs(&erm, &[0.0], &seeds)?);
    }
    configs.extend(runner::sweep_configs(&base, &grid, &seeds)?);

    let mut writer = ResultWriter::create(&dir.join("results.csv"))?;
    let entries = runner::run_configs(&configs, &data.source, jobs, |entry| match &entry.outcome {
        Ok(record) => writer.write_run(record),
        Err(_) => Ok(()),
    })?;

    let records: Vec<&RunRecord> = entries.iter().filter_map(|e| e.outcome.as_ref().ok()).collect();
    let failures: Vec<Value> = entries
        .iter()
        .filter_map(|e| {
            e.outcome.as_ref().err().map(|f| {
                json!({"method": e.method.kind.name(), "lambda": e.method.lambda, "seed": e.seed,
                       "numerical": f.numerical, "error": f.message})
            })
        })
        .collect();
    if records.is_empty() {
        let numerical = entries.iter().any(|e| matches!(&e.outcome, Err(f) if f.numerical));
        return Err(CliError {
            code: if numerical { EXIT_NUMERICAL } else { EXIT_USAGE },
            message: format!("every run failed; first: {}", failures[0]["error"]),
        });
    }
    output::write_curves(&dir.join("curves.csv"), &records)?;

    let summaries: Vec<RunSummary> = records
        .iter()
        .map(|r| RunSummary {
            method: r.config.method.kind,
            lambda: r.config.method.lambda,
            seed: r.config.seed,
            metrics: r.final_row().metrics,
        })
        .collect();
    let points = normalize_against_erm(&summaries);
    output::write_tradeoff(&dir.join("tradeoff.csv"), &points)?;

    let mut median_rows = Vec::new();
    let mut rho = Map::new();
    for metric in ["dp", "abcc"] {
        let pts: Vec<(f64, f64)> = summaries
            .iter()
            .filter(|s| s.method == kind)
            .map(|s| (s.lambda, s.metrics.get(metric).expect("metric column")))
            .collect();
        for (l, m, count) in per_lambda_medians(&pts) {
            median_rows.push((metric, l, m * 100.0, count));
        }
        let stat = match controllability_stat(&pts) {
            Ok(r) => json!(r),
            Err(e) => {
                log::info!("controllability for {metric} not computed: {e}");
                Value::Null
            }
        };
        rho.insert(metric.into(), stat);
    }
    output::write_medians(&dir.join("controllability.csv"), &median_rows)?;
    output::write_json(&dir.join("config.json"), &echo)?;
    output::write_json(
        &dir.join("summary.json"),
        &json!({
            "method": kind.name(),
            "grid": grid,
            "seeds": seeds,
            "runs": entries.len(),
            "failures": failures,
            "spearman": rho,
            "tradeoff": points,
        }),
    )?;
    manifest.finish(
        &dir,
        &["results.csv", "curves.csv", "tradeoff.csv", "controllability.csv", "config.json", "summary.json"],
    )?;
    println!(
        "{kind}: {} runs ({} failed); spearman dp={} abcc={}",
        entries.len(),
        failures.len(),
        rho["dp"],
        rho["abcc"]
    );
    Ok(())
}

fn cmd_bias(mut c: BiasCmd) -> CliResult<()> {
    let file = load_config_file(&c.common.config)?;
    c.common.overlay(&section(&file)?);
    c.data.overlay(&section(&file)?);
    c.train.overlay(&section(&file)?);
    c.bias.overlay(&section(&file)?);
    if c.train.method.as_deref().is_some_and(|m| m != "erm") {
        return Err(CliError::usage("examine-bias trains erm only; drop --method"));
    }
    let data = resolve_data(&c.data)?;
    let base = resolve_experiment(&data, &c.train, MethodKind::Erm)?;
    let defaults = VerdictRule::default();
    let rule = VerdictRule {
        floor: c.bias.floor.unwrap_or(defaults.floor),
        sigmas: c.bias.sigmas.unwrap_or(defaults.sigmas),
    };
    let trials = c.bias.trials.unwrap_or(10);
    let dir = out_dir(&c.common)?;
    let mut echo = Map::new();
    data_echo(&data, &mut echo);
    train_echo(&base, &mut echo);
    echo.remove("seed");
    echo.insert("trials".into(), json!(trials));
    echo.insert("floor".into(), json!(rule.floor));
    echo.insert("sigmas".into(), json!(rule.sigmas));
    let mut manifest = Manifest::new("examine-bias", echo.clone());
    add_inputs(&data, &mut manifest)?;

    let (report, trial_reports) = bias_examination(&base, &data.source, trials, rule)?;
    output::write_trials(&dir.join("trials.csv"), &trial_reports)?;
    output::write_json(&dir.join("config.json"), &echo)?;
    output::write_json(
        &dir.join("summary.json"),
        &json!({
            "dataset": report.dataset,
            "sensitive_attr": report.sensitive_attr,
            "trials": report.trials,
            "verdict": report.verdict,
            "rule": report.rule,
            "mean": presented_json(&report.mean),
            "std": presented_json(&report.std),
        }),
    )?;
    manifest.finish(&dir, &["trials.csv", "config.json", "summary.json"])?;
    let (m, s) = (report.mean.presented(), report.std.presented());
    let cells: Vec<String> = METRIC_COLUMNS
        .iter()
        .enumerate()
        .map(|(i, name)| format!("{name}={:.2}±{:.2}", m[i], s[i]))
        .collect();
    println!("{}/{}: {} {}", report.dataset, report.sensitive_attr, cells.join(" "), report.verdict);
    Ok(())
}

fn cmd_tradeoff(mut c: TradeoffCmd) -> CliResult<()> {
    let file = load_config_file(&c.common.config)?;
    c.common.overlay(&section(&file)?);
    c.tradeoff.overlay(&section(&file)?);
    let input = required(&c.tradeoff.input, "input")?;
    let dir = out_dir(&c.common)?;
    let rows = output::read_final_rows(&input)?;
    let summaries = rows
        .iter()
        .map(|r| {
            Ok(RunSummary {
                method: r.method.parse()?,
                lambda: r.lambda,
                seed: r.seed,
                metrics: r.metrics,
            })
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    if summaries.is_empty() {
        return Err(CliError::usage(format!("{} has no final rows", input.display())));
    }
    let points = normalize_against_erm(&summaries);
    output::write_tradeoff(&dir.join("tradeoff.csv"), &points)?;
    let mut echo = Map::new();
    echo.insert("input".into(), json!(input));
    let mut manifest = Manifest::new("tradeoff", echo);
    manifest.add_input(&input)?;
    manifest.finish(&dir, &["tradeoff.csv"])?;
    let raw = points.iter().filter(|p| !p.normalized).count();
    println!("{} trade-off points ({raw} without an ERM baseline)", points.len());
    Ok(())
}

fn cmd_synth(mut c: SynthCmd) -> CliResult<()> {
    let file = load_config_file(&c.common.config)?;
    c.common.overlay(&section(&file)?);
    c.synth.overlay(&section(&file)?);
    let spec = synth_spec(&c.synth);
    spec.validate()?;
    let dir = out_dir(&c.common)?;
    let table = synthetic_table(&spec)?;
    table.write_csv(&dir.join("synthetic.csv"))?;
    std::fs::write(dir.join("synthetic.schema.json"), table.schema.to_json()? + "\n")
        .map_err(|e| CliError::from(Error::io(dir.join("synthetic.schema.json"), e)))?;
    let mut echo = Map::new();
    echo.insert("n".into(), json!(spec.n));
    echo.insert("d_num".into(), json!(spec.d_num));
    echo.insert("group_shift".into(), json!(spec.group_shift));
    echo.insert("label_bias".into(), json!(spec.label_bias));
    echo.insert("data_seed".into(), json!(spec.seed));
    Manifest::new("synth", echo).finish(&dir, &["synthetic.csv", "synthetic.schema.json"])?;
    println!("wrote {} rows to {}", table.len(), dir.join("synthetic.csv").display());
    Ok(())
}

fn cmd_preprocess(mut c: PreprocessCmd) -> CliResult<()> {
    let file = load_config_file(&c.common.config)?;
    c.common.overlay(&section(&file)?);
    c.data.overlay(&section(&file)?);
    if c.seed.is_none() {
        c.seed = file.get("seed").and_then(Value::as_u64);
    }
    let data = resolve_data(&c.data)?;
    let seed = c.seed.unwrap_or(0);
    let dir = out_dir(&c.common)?;
    let prepared = prepare(&data.source.raw, data.source.sensitive.as_deref(), data.split_ratio, seed)?;
    prepared.train.write_csv(&dir.join("train.csv"))?;
    prepared.test.write_csv(&dir.join("test.csv"))?;
    prepared.preprocessor.write_json(&dir.join("preprocessor.json"))?;
    let mut echo = Map::new();
    data_echo(&data, &mut echo);
    echo.insert("seed".into(), json!(seed));
    let mut manifest = Manifest::new("preprocess", echo);
    add_inputs(&data, &mut manifest)?;
    manifest.finish(&dir, &["train.csv", "test.csv", "preprocessor.json"])?;
    println!(
        "{}: {} train / {} test rows, {} features",
        data.dataset,
        prepared.train.len(),
        prepared.test.len(),
        prepared.train.dim()
    );
    Ok(())
}
