//! Trainable models for every method kind and their per-batch objectives.

use crate::autodiff::{Bound, Mlp, ModelParams, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::{SeededRng, Stream};
use crate::scalar::Scalar;

use super::config::{MethodConfig, MethodKind};
use super::losses::{self, GapKind};

/// Rows per forward pass in [`FairModel::predict`].
const PREDICT_CHUNK: usize = 2048;

/// Prefix of parameters that belong to an adversary.
pub const ADVERSARY_PREFIX: &str = "adv.";

/// A batch objective: the node to differentiate plus the values of its two
/// terms for logging.
#[derive(Debug, Clone, Copy)]
pub struct LossOutput<T> {
    pub total: Var,
    pub utility: T,
    pub fairness: T,
    /// A group or condition cell was empty in this batch.
    pub degenerate: bool,
}

/// Unassembled loss terms produced by one method kind.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub kind: MethodKind,
    pub utility: Var,
    pub fairness: Option<Var>,
    pub degenerate: bool,
}

/// Combine loss terms into a total.
///
/// Penalized kinds give `utility + lambda * fairness`. AdvDebias carries
/// lambda inside its gradient reversal so its total is the plain sum.
/// LAFTR scales its adversary term by lambda after a unit reversal.
pub fn assemble_total<T: Scalar>(tape: &mut Tape<T>, config: &MethodConfig, parts: LossParts) -> Result<LossOutput<T>> {
    if parts.kind != config.kind {
        return Err(Error::Contract(format!(
            "loss parts for {} cannot assemble a {} objective",
            parts.kind, config.kind
        )));
    }
    let utility = tape.value(parts.utility).item();
    let (total, fairness) = match (config.kind, parts.fairness) {
        (MethodKind::Erm, None) => (parts.utility, T::zero()),
        (MethodKind::Erm, Some(_)) => return Err(Error::Contract("erm takes no fairness term".into())),
        (_, None) => return Err(Error::Contract(format!("{} needs a fairness term", config.kind))),
        (MethodKind::AdvDebias, Some(f)) => (tape.add(parts.utility, f)?, tape.value(f).item()),
        (_, Some(f)) => {
            let weighted = tape.scale(f, T::lit(config.lambda));
            (tape.add(parts.utility, weighted)?, tape.value(f).item())
        }
    };
    Ok(LossOutput {
        total,
        utility,
        fairness,
        degenerate: parts.degenerate,
    })
}

#[derive(Debug, Clone)]
enum Architecture {
    Classifier(Mlp),
    AdvDebias {
        classifier: Mlp,
        adversary: Mlp,
    },
    Laftr {
        encoder: Mlp,
        classifier: Mlp,
        decoder: Mlp,
        adversary: Mlp,
    },
}

/// Parameters and network layout for one method.
#[derive(Debug, Clone)]
pub struct FairModel<T> {
    pub config: MethodConfig,
    pub params: ModelParams<T>,
    arch: Architecture,
    input_dim: usize,
}

impl<T: Scalar> FairModel<T> {
    /// Initialize from the `Init` stream of `seed`. The main classifier is
    /// drawn first, so ERM-like kinds start from the same weights as
    /// [`crate::autodiff::init_mlp_params`] with the same `hidden` widths.
    ///
    /// LAFTR ignores `hidden`: its encoder is one ReLU layer of width
    /// `config.latent` and its heads are linear.
    pub fn new(config: MethodConfig, d: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        config.validate()?;
        if d == 0 {
            return Err(Error::Config("feature count must be at least 1".into()));
        }
        let mut rng = SeededRng::new(seed, Stream::Init);
        let mut params = ModelParams::new();
        let mut dims = vec![d];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let arch = match config.kind {
            MethodKind::AdvDebias => {
                let classifier = Mlp::init(&mut params, "", &dims, &mut rng)?;
                let adversary = Mlp::init(&mut params, "adv", &[1, config.adv_hidden, 1], &mut rng)?;
                Architecture::AdvDebias { classifier, adversary }
            }
            MethodKind::Laftr => {
                let k = config.latent;
                let encoder = Mlp::init(&mut params, "enc", &[d, k], &mut rng)?;
                let classifier = Mlp::init(&mut params, "clf", &[k, 1], &mut rng)?;
                let decoder = Mlp::init(&mut params, "dec", &[k, d], &mut rng)?;
                let adversary = Mlp::init(&mut params, "adv", &[k, 1], &mut rng)?;
                Architecture::Laftr {
                    encoder,
                    classifier,
                    decoder,
                    adversary,
                }
            }
            _ => Architecture::Classifier(Mlp::init(&mut params, "", &dims, &mut rng)?),
        };
        Ok(Self {
            config,
            params,
            arch,
            input_dim: d,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Whether parameter `name` belongs to an adversary network.
    pub fn is_adversary_param(name: &str) -> bool {
        name.starts_with(ADVERSARY_PREFIX)
    }

    /// Classifier logit and, for LAFTR, the representation.
    fn logit(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<(Var, Option<Var>)> {
        match &self.arch {
            Architecture::Classifier(mlp) | Architecture::AdvDebias { classifier: mlp, .. } => {
                Ok((mlp.logits(tape, bound, x)?, None))
            }
            Architecture::Laftr { encoder, classifier, .. } => {
                let pre = encoder.logits(tape, bound, x)?;
                let z = tape.relu(pre);
                Ok((classifier.logits(tape, bound, z)?, Some(z)))
            }
        }
    }

    /// Scores `n x 1` for `x` on `tape`.
    pub fn scores(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        let (logit, _) = self.logit(tape, bound, x)?;
        Ok(tape.sigmoid(logit))
    }

    /// Unassembled loss terms for one batch.
    pub fn loss_parts(&self, tape: &mut Tape<T>, bound: &Bound, x: Var, y: &[u8], s: &[u8]) -> Result<LossParts> {
        let n = tape.shape(x).0;
        if y.len() != n || s.len() != n {
            return Err(Error::Contract(format!(
                "batch has {n} rows but {} labels and {} sensitive codes",
                y.len(),
                s.len()
            )));
        }
        let kind = self.config.kind;
        let (logit, z) = self.logit(tape, bound, x)?;
        let scores = tape.sigmoid(logit);
        let bce = losses::bce(tape, scores, y)?;
        let parts = |utility, fairness, degenerate| LossParts {
            kind,
            utility,
            fairness,
            degenerate,
        };
        let gap = |kind| -> Option<GapKind> {
            match kind {
                MethodKind::DiffDp => Some(GapKind::Dp),
                MethodKind::DiffEopp => Some(GapKind::Eopp),
                MethodKind::DiffEodd => Some(GapKind::Eodd),
                _ => None,
            }
        };
        let both_groups = s.contains(&0) && s.contains(&1);
        Ok(match (&self.arch, kind) {
            (_, MethodKind::Erm) => parts(bce, None, false),
            (_, k) if gap(k).is_some() => {
                let (g, complete) = losses::diff_gap(tape, gap(k).expect("gap kind"), scores, y, s)?;
                parts(bce, Some(g), !complete)
            }
            (_, MethodKind::PRemover) => {
                let pi = losses::prejudice_index(tape, scores, s)?;
                parts(bce, Some(pi), !both_groups)
            }
            (_, MethodKind::Hsic) => {
                let h = losses::hsic(tape, scores, s)?;
                parts(bce, Some(h), !both_groups)
            }
            (Architecture::AdvDebias { adversary, .. }, MethodKind::AdvDebias) => {
                let rev = tape.grad_reverse(logit, T::lit(self.config.lambda));
                let a = adversary.forward(tape, bound, rev)?;
                let adv_bce = losses::bce(tape, a, s)?;
                parts(bce, Some(adv_bce), !both_groups)
            }
            (
                Architecture::Laftr {
                    decoder, adversary, ..
                },
                MethodKind::Laftr,
            ) => {
                let z = z.expect("laftr representation");
                let recon = decoder.logits(tape, bound, z)?;
                let mse = losses::mse(tape, recon, x)?;
                let weighted = tape.scale(mse, T::lit(self.config.recon_weight));
                let utility = tape.add(bce, weighted)?;
                let rev = tape.grad_reverse(z, T::one());
                let a = adversary.forward(tape, bound, rev)?;
                let (adv, complete) = losses::group_l1(tape, a, s)?;
                parts(utility, Some(adv), !complete)
            }
            (_, k) => return Err(Error::Contract(format!("model layout does not match method {k}"))),
        })
    }

    /// Assembled objective for one batch.
    pub fn loss(&self, tape: &mut Tape<T>, bound: &Bound, x: Var, y: &[u8], s: &[u8]) -> Result<LossOutput<T>> {
        let parts = self.loss_parts(tape, bound, x, y, s)?;
        assemble_total(tape, &self.config, parts)
    }

    /// Scores for every row of `x`.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        if x.cols() != self.input_dim {
            return Err(Error::Shape {
                op: "predict",
                left: x.shape(),
                right: (x.rows(), self.input_dim),
            });
        }
        let mut out = Vec::with_capacity(x.rows());
        let mut start = 0;
        while start < x.rows() {
            let end = (start + PREDICT_CHUNK).min(x.rows());
            let idx: Vec<usize> = (start..end).collect();
            let mut tape = Tape::new();
            let bound = self.params.bind(&mut tape);
            let xv = tape.constant(x.select_rows(&idx));
            let p = self.scores(&mut tape, &bound, xv)?;
            out.extend_from_slice(tape.value(p).data());
            start = end;
        }
        Ok(out)
    }
}
