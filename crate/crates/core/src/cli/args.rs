use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

/// Comma-separated numbers on the command line; a string or an array in a
/// JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct NumList<T>(pub Vec<T>);

impl<T: FromStr> FromStr for NumList<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Self(Vec::new()));
        }
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|_| format!("`{}` is not a valid number", p.trim())))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl<'de, T: FromStr + Deserialize<'de>> Deserialize<'de> for NumList<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Text(String),
            List(Vec<T>),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::List(v) => Ok(Self(v)),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fairbench", version, about = "Group-fairness training and benchmarking for tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write its evaluation curve.
    Train(TrainCmd),
    /// Train over a lambda grid and several seeds.
    Sweep(SweepCmd),
    /// Repeated ERM trials with a bias verdict.
    #[command(name = "examine-bias")]
    ExamineBias(BiasCmd),
    /// ERM-normalized trade-off points from a sweep result CSV.
    Tradeoff(TradeoffCmd),
    /// Write a synthetic dataset and its schema.
    Synth(SynthCmd),
    /// Split and encode a dataset, writing the encoded tables.
    Preprocess(PreprocessCmd),
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct CommonArgs {
    /// JSON file with option values; command-line flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct SynthArgs {
    /// Synthetic row count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Synthetic feature count.
    #[arg(long = "d_num")]
    pub d_num: Option<usize>,
    /// Mean shift of group-1 features.
    #[arg(long = "group_shift")]
    pub group_shift: Option<f64>,
    /// Probability that a synthetic label is replaced by the group code.
    #[arg(long = "label_bias")]
    pub label_bias: Option<f64>,
    /// Seed of the synthetic generator.
    #[arg(long = "data_seed")]
    pub data_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct DataArgs {
    /// Dataset name: `synthetic`, `adult`, or any name used with --schema.
    #[arg(long)]
    pub dataset: Option<String>,
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON column schema for --data.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Sensitive column (or alias) to use; defaults to the first declared.
    #[arg(long = "sensitive_attr")]
    pub sensitive_attr: Option<String>,
    /// Fraction of rows used for training.
    #[arg(long = "split_ratio")]
    pub split_ratio: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub synth: SynthArgs,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct TrainArgs {
    /// erm, diffdp, diffeopp, diffeodd, premover, hsic, advdebias or laftr.
    #[arg(long)]
    pub method: Option<String>,
    /// Fairness control hyperparameter.
    #[arg(long)]
    pub lam: Option<f64>,
    /// Seed for the split, initialization and batch order.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Steps between learning-rate decays.
    #[arg(long = "step_size")]
    pub step_size: Option<usize>,
    /// Learning-rate decay factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Minibatch size; defaults per dataset.
    #[arg(long = "batch_size")]
    pub batch_size: Option<usize>,
    /// Total optimization steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Steps between test evaluations.
    #[arg(long = "eval_every")]
    pub eval_every: Option<usize>,
    /// Hidden layer widths, e.g. `256,256`.
    #[arg(long)]
    pub hidden: Option<NumList<usize>>,
    /// AdvDebias adversary width.
    #[arg(long = "adv_hidden")]
    pub adv_hidden: Option<usize>,
    /// LAFTR representation width.
    #[arg(long)]
    pub latent: Option<usize>,
    /// LAFTR reconstruction weight.
    #[arg(long = "recon_weight")]
    pub recon_weight: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct SweepArgs {
    /// Comma-separated seeds (default 0,1,2).
    #[arg(long)]
    pub seeds: Option<NumList<u64>>,
    /// Comma-separated lambda values (default: the method's grid).
    #[arg(long)]
    pub grid: Option<NumList<f64>>,
    /// Runs trained concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Skip the per-seed ERM baseline runs.
    #[arg(long = "no_baseline", num_args = 0..=1, default_missing_value = "true")]
    pub no_baseline: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct BiasArgs {
    /// Number of ERM trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Mean dp and abcc below this (in [0, 1]) mean not biased.
    #[arg(long)]
    pub floor: Option<f64>,
    /// Mean dp or abcc above this many standard deviations means biased.
    #[arg(long)]
    pub sigmas: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BiasCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub bias: BiasArgs,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct TradeoffArgs {
    /// Sweep result CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TradeoffCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub tradeoff: TradeoffArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub synth: SynthArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Seed for the split.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Keys a JSON config file may contain.
pub const CONFIG_KEYS: &[&str] = &[
    "out", "dataset", "data", "schema", "sensitive_attr", "split_ratio", "n", "d_num", "group_shift", "label_bias",
    "data_seed", "method", "lam", "seed", "lr", "step_size", "gamma", "batch_size", "steps", "eval_every", "hidden",
    "adv_hidden", "latent", "recon_weight", "seeds", "grid", "jobs", "no_baseline", "trials", "floor", "sigmas",
    "input",
];

/// Fill every `None` in `$flag` from `$file`.
macro_rules! overlay {
    ($flag:expr, $file:expr, $($field:ident),+ $(,)?) => {
        $( if $flag.$field.is_none() { $flag.$field = $file.$field.clone(); } )+
    };
}

impl CommonArgs {
    pub fn overlay(&mut self, file: &CommonArgs) {
        overlay!(self, file, out);
    }
}

impl SynthArgs {
    pub fn overlay(&mut self, file: &SynthArgs) {
        overlay!(self, file, n, d_num, group_shift, label_bias, data_seed);
    }
}

impl DataArgs {
    pub fn overlay(&mut self, file: &DataArgs) {
        overlay!(self, file, dataset, data, schema, sensitive_attr, split_ratio);
        self.synth.overlay(&file.synth);
    }
}

impl TrainArgs {
    pub fn overlay(&mut self, file: &TrainArgs) {
        overlay!(
            self, file, method, lam, seed, lr, step_size, gamma, batch_size, steps, eval_every, hidden, adv_hidden,
            latent, recon_weight
        );
    }
}

impl SweepArgs {
    pub fn overlay(&mut self, file: &SweepArgs) {
        overlay!(self, file, seeds, grid, jobs, no_baseline);
    }
}

impl BiasArgs {
    pub fn overlay(&mut self, file: &BiasArgs) {
        overlay!(self, file, trials, floor, sigmas);
    }
}

impl TradeoffArgs {
    pub fn overlay(&mut self, file: &TradeoffArgs) {
        overlay!(self, file, input);
    }
}
