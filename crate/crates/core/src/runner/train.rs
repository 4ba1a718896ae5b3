use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::autodiff::{below_min_lr, Adam, Tape, Tensor};
use crate::data::{Dataset, Prepared};
use crate::error::{Error, Result};
use crate::methods::{FairModel, MethodKind};
use crate::metrics::{evaluate, EvalBatch, MetricReport};
use crate::rng::{SeededRng, Stream};

/// One evaluation of a run: training-batch loss terms at `step` and test
/// metrics after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    /// Number of completed optimization steps.
    pub step: usize,
    /// Rate used for the last completed step.
    pub lr: f64,
    pub loss_total: f64,
    pub loss_utility: f64,
    pub loss_fairness: f64,
    pub metrics: MetricReport,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<EvalRow>,
    /// Steps actually run; below `total_steps` when the schedule halted.
    pub steps_run: usize,
    pub halted_early: bool,
    /// Batches where a group or condition cell was empty.
    pub degenerate_batches: usize,
}

impl RunRecord {
    pub fn final_row(&self) -> &EvalRow {
        self.rows.last().expect("a run record always has a final row")
    }
}

/// A finished run and its trained model.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub model: FairModel<f64>,
}

/// Replacement-free minibatches: successive seeded shuffles of the
/// training indices, consumed in order. A batch may span two epochs.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    batch_size: usize,
    rng: SeededRng,
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 || batch_size > n {
            return Err(Error::Config(format!(
                "batch size {batch_size} must be between 1 and the training size {n}"
            )));
        }
        let mut rng = SeededRng::new(seed, Stream::Batches);
        let order = rng.permutation(n);
        Ok(Self {
            n,
            batch_size,
            rng,
            order,
            pos: 0,
        })
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch_size);
        while out.len() < self.batch_size {
            if self.pos == self.n {
                self.order = self.rng.permutation(self.n);
                self.pos = 0;
            }
            let take = (self.batch_size - out.len()).min(self.n - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
        out
    }
}

/// Test-split metrics of `model`.
pub fn evaluate_model(model: &FairModel<f64>, data: &Dataset) -> Result<MetricReport> {
    let scores = model.predict(&data.x)?;
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            step: model.params.step_count() as usize,
            detail: format!("non-finite score at test row {i}"),
        });
    }
    Ok(evaluate(&EvalBatch::new(scores, data.y.clone(), data.s.clone())?))
}

/// Train one model on `data.train`, evaluating on `data.test`.
///
/// Before each step the scheduled rate is checked; a rate below the
/// minimum stops training, otherwise `total_steps` steps are run.
pub fn train_one(config: &ExperimentConfig, data: &Prepared) -> Result<TrainOutcome> {
    config.validate()?;
    let train = &data.train;
    if config.method.kind == MethodKind::Hsic && config.batch_size < 4 {
        return Err(Error::Config("hsic needs a batch size of at least 4".into()));
    }
    let mut model = FairModel::new(config.method, train.dim(), &config.hidden, config.seed)?;
    let mut sampler = BatchSampler::new(train.len(), config.batch_size, config.seed)?;
    let adam = Adam::default();
    let mut rows = Vec::new();
    let mut degenerate_batches = 0;
    let mut steps_run = 0;
    let mut halted_early = false;
    let mut last = (0.0, 0.0, 0.0, 0.0);

    for step in 0..config.total_steps {
        let lr = config.schedule.lr_at(step);
        if below_min_lr(lr) {
            halted_early = true;
            break;
        }
        let idx = sampler.next_batch();
        let y: Vec<u8> = idx.iter().map(|&i| train.y[i]).collect();
        let s: Vec<u8> = idx.iter().map(|&i| train.s[i]).collect();
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let x = tape.constant(train.x.select_rows(&idx));
        let out = model.loss(&mut tape, &bound, x, &y, &s)?;
        let total = tape.value(out.total).item();
        if !(total.is_finite() && out.utility.is_finite() && out.fairness.is_finite()) {
            return Err(Error::Numerical {
                step: step + 1,
                detail: format!(
                    "loss total={total} utility={} fairness={}",
                    out.utility, out.fairness
                ),
            });
        }
        if out.degenerate {
            degenerate_batches += 1;
        }
        let mut grads = tape.backward(out.total)?;
        model.params.store_grads(&mut grads, &bound)?;
        if model.params.iter().any(|p| !p.grad.as_ref().is_none_or(Tensor::all_finite)) {
            return Err(Error::Numerical {
                step: step + 1,
                detail: format!("non-finite gradient at loss {total}"),
            });
        }
        adam.step(&mut model.params, lr)?;
        steps_run = step + 1;
        last = (lr, total, out.utility, out.fairness);
        if steps_run % config.eval_every == 0 {
            rows.push(row(&model, data, steps_run, last)?);
        }
    }
    if !model.params.iter().all(|p| p.value.all_finite()) {
        return Err(Error::Numerical {
            step: steps_run,
            detail: "non-finite parameters after update".into(),
        });
    }
    match rows.last_mut() {
        Some(r) if r.step == steps_run => r.is_final = true,
        _ => {
            let mut r = row(&model, data, steps_run, last)?;
            r.is_final = true;
            rows.push(r);
        }
    }
    Ok(TrainOutcome {
        record: RunRecord {
            config: config.clone(),
            rows,
            steps_run,
            halted_early,
            degenerate_batches,
        },
        model,
    })
}

fn row(model: &FairModel<f64>, data: &Prepared, step: usize, last: (f64, f64, f64, f64)) -> Result<EvalRow> {
    Ok(EvalRow {
        step,
        lr: last.0,
        loss_total: last.1,
        loss_utility: last.2,
        loss_fairness: last.3,
        metrics: evaluate_model(model, &data.test)?,
        is_final: false,
    })
}

/// Write parameter values as little-endian `f64`s.
pub fn save_params(model: &FairModel<f64>, path: &Path) -> Result<()> {
    std::fs::write(path, model.params.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Load values written by [`save_params`] into a model of the same layout.
pub fn load_params(model: &mut FairModel<f64>, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Contract(format!("{} is not a parameter file", path.display())));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    model.params.assign_flat(&flat)
}
