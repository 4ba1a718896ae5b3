//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use fairbench::autodiff::{Tape, Tensor};
use fairbench::methods::{losses, FairModel, LossOutput, MethodKind};
use fairbench::rng::{SeededRng, Stream};

/// Random evaluation batch with `1 <= n <= max_n`. Scores are sometimes
/// quantized (ties, exact 0.5) and groups or labels sometimes constant.
pub fn random_batch(rng: &mut SeededRng, max_n: usize) -> (Vec<f64>, Vec<u8>, Vec<u8>) {
    let n = 1 + rng.below(max_n);
    let quantized = rng.bernoulli(0.4);
    let p_s = [0.0, 1.0, 0.5, 0.3][rng.below(4)];
    let p_y = [0.5, 0.2, 0.8, 0.0, 1.0][rng.below(5)];
    let mut scores = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for _ in 0..n {
        let p = if quantized {
            rng.below(21) as f64 / 20.0
        } else {
            rng.uniform()
        };
        scores.push(p);
        y.push(u8::from(rng.bernoulli(p_y)));
        s.push(u8::from(rng.bernoulli(p_s)));
    }
    (scores, y, s)
}

fn predicted(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn abs_gap(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? - b?).abs())
}

pub fn accuracy(scores: &[f64], y: &[u8]) -> f64 {
    let hits = predicted(scores).iter().zip(y).filter(|(a, b)| a == b).count();
    hits as f64 / y.len() as f64
}

/// Pair enumeration.
pub fn auc(scores: &[f64], y: &[u8]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(y).filter(|(_, &l)| l == 1).map(|(&p, _)| p).collect();
    let neg: Vec<f64> = scores.iter().zip(y).filter(|(_, &l)| l == 0).map(|(&p, _)| p).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for &a in &pos {
        for &b in &neg {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// Mean over positives of the precision at that positive's score.
pub fn average_precision(scores: &[f64], y: &[u8]) -> Option<f64> {
    let n_pos = y.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return None;
    }
    let mut total = 0.0;
    for i in (0..y.len()).filter(|&i| y[i] == 1) {
        let above: Vec<usize> = (0..y.len()).filter(|&j| scores[j] >= scores[i]).collect();
        let tp = above.iter().filter(|&&j| y[j] == 1).count();
        total += tp as f64 / above.len() as f64;
    }
    Some(total / n_pos as f64)
}

pub fn f1(scores: &[f64], y: &[u8]) -> f64 {
    let yhat = predicted(scores);
    let tp = (0..y.len()).filter(|&i| yhat[i] == 1 && y[i] == 1).count();
    let fp = (0..y.len()).filter(|&i| yhat[i] == 1 && y[i] == 0).count();
    let fn_ = (0..y.len()).filter(|&i| yhat[i] == 0 && y[i] == 1).count();
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Positive-prediction rate of group `g` among rows passing `keep`.
fn group_rate(scores: &[f64], s: &[u8], g: u8, keep: impl Fn(usize) -> bool) -> Option<f64> {
    let yhat = predicted(scores);
    let rows: Vec<usize> = (0..s.len()).filter(|&i| s[i] == g && keep(i)).collect();
    rate(rows.iter().filter(|&&i| yhat[i] == 1).count(), rows.len())
}

pub fn dp(scores: &[f64], s: &[u8]) -> Option<f64> {
    abs_gap(group_rate(scores, s, 0, |_| true), group_rate(scores, s, 1, |_| true))
}

pub fn prule(scores: &[f64], s: &[u8]) -> Option<f64> {
    let a = group_rate(scores, s, 0, |_| true)?;
    let b = group_rate(scores, s, 1, |_| true)?;
    Some(if a == 0.0 && b == 0.0 {
        100.0
    } else if a == 0.0 || b == 0.0 {
        0.0
    } else {
        100.0 * (a / b).min(b / a)
    })
}

pub fn eopp(scores: &[f64], y: &[u8], s: &[u8]) -> Option<f64> {
    abs_gap(group_rate(scores, s, 0, |i| y[i] == 1), group_rate(scores, s, 1, |i| y[i] == 1))
}

/// `(value, defined)`: an empty cell contributes 0 and clears `defined`.
pub fn eodd(scores: &[f64], y: &[u8], s: &[u8]) -> (f64, bool) {
    let tpr = eopp(scores, y, s);
    let fpr = abs_gap(group_rate(scores, s, 0, |i| y[i] == 0), group_rate(scores, s, 1, |i| y[i] == 0));
    (tpr.unwrap_or(0.0) + fpr.unwrap_or(0.0), tpr.is_some() && fpr.is_some())
}

pub fn ppv(scores: &[f64], y: &[u8], s: &[u8]) -> Option<f64> {
    let yhat = predicted(scores);
    let prec = |g: u8| {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| s[i] == g && yhat[i] == 1).collect();
        rate(rows.iter().filter(|&&i| y[i] == 1).count(), rows.len())
    };
    abs_gap(prec(0), prec(1))
}

fn mean_score(scores: &[f64], y: &[u8], s: &[u8], g: u8, class: u8) -> Option<f64> {
    let v: Vec<f64> = (0..y.len()).filter(|&i| s[i] == g && y[i] == class).map(|i| scores[i]).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn bnegc(scores: &[f64], y: &[u8], s: &[u8]) -> Option<f64> {
    abs_gap(mean_score(scores, y, s, 0, 0), mean_score(scores, y, s, 1, 0))
}

pub fn bposc(scores: &[f64], y: &[u8], s: &[u8]) -> Option<f64> {
    abs_gap(mean_score(scores, y, s, 0, 1), mean_score(scores, y, s, 1, 1))
}

fn select(v: &[f64], y: &[u8], s: &[u8], g: u8) -> (Vec<f64>, Vec<u8>) {
    (0..s.len()).filter(|&i| s[i] == g).map(|i| (v[i], y[i])).unzip()
}

pub fn accp(scores: &[f64], y: &[u8], s: &[u8]) -> Option<f64> {
    let (a, ya) = select(scores, y, s, 0);
    let (b, yb) = select(scores, y, s, 1);
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some((accuracy(&a, &ya) - accuracy(&b, &yb)).abs())
}

pub fn aucp(scores: &[f64], y: &[u8], s: &[u8]) -> Option<f64> {
    let (a, ya) = select(scores, y, s, 0);
    let (b, yb) = select(scores, y, s, 1);
    abs_gap(auc(&a, &ya), auc(&b, &yb))
}

/// Midpoint-rule integral of `|F0 - F1|` over `[0, 1]` on `cells` cells.
pub fn abcc_grid(scores: &[f64], s: &[u8], cells: usize) -> Option<f64> {
    let mut g0: Vec<f64> = (0..s.len()).filter(|&i| s[i] == 0).map(|i| scores[i]).collect();
    let mut g1: Vec<f64> = (0..s.len()).filter(|&i| s[i] == 1).map(|i| scores[i]).collect();
    if g0.is_empty() || g1.is_empty() {
        return None;
    }
    g0.sort_by(f64::total_cmp);
    g1.sort_by(f64::total_cmp);
    let (mut i0, mut i1) = (0, 0);
    let mut area = 0.0;
    let w = 1.0 / cells as f64;
    for k in 0..cells {
        let x = (k as f64 + 0.5) * w;
        while i0 < g0.len() && g0[i0] <= x {
            i0 += 1;
        }
        while i1 < g1.len() && g1[i1] <= x {
            i1 += 1;
        }
        area += (i0 as f64 / g0.len() as f64 - i1 as f64 / g1.len() as f64).abs();
    }
    Some(area * w)
}

/// Relative error with a floor on the denominator.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// A small random problem for gradient checks.
pub struct GradProblem {
    pub model: FairModel<f64>,
    pub x: Tensor<f64>,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    /// Fixed HSIC bandwidth; `None` for other kinds.
    pub bandwidth: Option<f64>,
}

pub fn grad_problem(kind: MethodKind, seed: u64, n: usize, d: usize) -> GradProblem {
    let mut rng = SeededRng::new(seed, Stream::Synthetic);
    let drawn = 0.1 + 2.0 * rng.uniform();
    let lambda = if kind == MethodKind::Erm { 0.0 } else { drawn };
    let mut cfg = fairbench::methods::MethodConfig::new(kind, lambda).unwrap();
    cfg.adv_hidden = 4;
    cfg.latent = 5;
    let mut model = FairModel::new(cfg, d, &[6], seed).unwrap();
    // Zero biases put exact ties at ReLU kinks (a row whose hidden units are
    // all dead has logit exactly 0); jitter every parameter off them.
    let jittered: Vec<f64> = model.params.flatten().iter().map(|v| v + 0.1 * rng.normal()).collect();
    model.params.assign_flat(&jittered).unwrap();
    let x = Tensor::from_vec(n, d, (0..n * d).map(|_| rng.normal()).collect()).unwrap();
    // Both groups and both labels in every group.
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let s: Vec<u8> = (0..n).map(|i| ((i / 2) % 2) as u8).collect();
    let mut p = GradProblem {
        model,
        x,
        y,
        s,
        bandwidth: None,
    };
    if kind == MethodKind::Hsic {
        let mut tape = Tape::new();
        let bound = p.model.params.bind(&mut tape);
        let xv = tape.constant(p.x.clone());
        let sc = p.model.scores(&mut tape, &bound, xv).unwrap();
        p.bandwidth = Some(losses::median_bandwidth(tape.value(sc).data()));
    }
    p
}

impl GradProblem {
    /// Loss on `tape` with the current parameters. HSIC uses the fixed
    /// bandwidth so the objective is a smooth function of the parameters.
    pub fn loss(&self, tape: &mut Tape<f64>) -> (LossOutput<f64>, fairbench::autodiff::Bound) {
        let bound = self.model.params.bind(tape);
        let xv = tape.constant(self.x.clone());
        let out = match self.bandwidth {
            Some(bw) => {
                let scores = self.model.scores(tape, &bound, xv).unwrap();
                let bce = losses::bce(tape, scores, &self.y).unwrap();
                let h = losses::hsic_with_bandwidth(tape, scores, &self.s, bw).unwrap();
                let parts = fairbench::methods::LossParts {
                    kind: MethodKind::Hsic,
                    utility: bce,
                    fairness: Some(h),
                    degenerate: false,
                };
                fairbench::methods::assemble_total(tape, &self.model.config, parts).unwrap()
            }
            None => self.model.loss(tape, &bound, xv, &self.y, &self.s).unwrap(),
        };
        (out, bound)
    }

    /// Reverse-mode gradient of the total, flattened in parameter order.
    pub fn analytic(&self) -> Vec<f64> {
        let mut tape = Tape::new();
        let (out, bound) = self.loss(&mut tape);
        let mut grads = tape.backward(out.total).unwrap();
        let mut params = self.model.params.clone();
        params.store_grads(&mut grads, &bound).unwrap();
        params.iter().flat_map(|p| p.grad.clone().unwrap().into_vec()).collect()
    }

    /// The function whose gradient reverse mode computes for coordinate
    /// `main`: gradient reversal turns `+fairness` into `-lambda * fairness`
    /// for parameters upstream of the reversal.
    fn objective(&self, main: bool) -> f64 {
        let mut tape = Tape::new();
        let (out, _) = self.loss(&mut tape);
        let cfg = &self.model.config;
        if main && cfg.kind.is_adversarial() {
            out.utility - cfg.lambda * out.fairness
        } else {
            tape.value(out.total).item()
        }
    }

    /// Central differences, one coordinate at a time.
    pub fn numeric(&mut self, h: f64) -> Vec<f64> {
        let base = self.model.params.flatten();
        let owners: Vec<bool> = self
            .model
            .params
            .iter()
            .flat_map(|p| std::iter::repeat_n(!FairModel::<f64>::is_adversary_param(&p.name), p.value.len()))
            .collect();
        let mut out = Vec::with_capacity(base.len());
        for k in 0..base.len() {
            let mut v = base.clone();
            v[k] = base[k] + h;
            self.model.params.assign_flat(&v).unwrap();
            let up = self.objective(owners[k]);
            v[k] = base[k] - h;
            self.model.params.assign_flat(&v).unwrap();
            let down = self.objective(owners[k]);
            out.push((up - down) / (2.0 * h));
        }
        self.model.params.assign_flat(&base).unwrap();
        out
    }
}

/// Compare every metric of one batch with the oracles; `Err` names the
/// first disagreement.
pub fn check_metrics(scores: &[f64], y: &[u8], s: &[u8]) -> Result<(), String> {
    use fairbench::metrics::{evaluate, EvalBatch, Flags};
    let r = evaluate(&EvalBatch::new(scores.to_vec(), y.to_vec(), s.to_vec()).unwrap());
    let (eodd_v, eodd_ok) = eodd(scores, y, s);
    let expect: [(&str, Option<f64>, f64, u32); 13] = [
        ("auc", auc(scores, y), r.auc, Flags::AUC),
        ("ap", average_precision(scores, y), r.ap, Flags::AP),
        ("dp", dp(scores, s), r.dp, Flags::DP),
        ("prule", prule(scores, s), r.prule, Flags::PRULE),
        ("eopp", eopp(scores, y, s), r.eopp, Flags::EOPP),
        ("eodd", eodd_ok.then_some(eodd_v), r.eodd, Flags::EODD),
        ("ppv", ppv(scores, y, s), r.ppv, Flags::PPV),
        ("bnegc", bnegc(scores, y, s), r.bnegc, Flags::BNEGC),
        ("bposc", bposc(scores, y, s), r.bposc, Flags::BPOSC),
        ("accp", accp(scores, y, s), r.accp, Flags::ACCP),
        ("aucp", aucp(scores, y, s), r.aucp, Flags::AUCP),
        ("acc", Some(accuracy(scores, y)), r.acc, 0),
        ("f1", Some(f1(scores, y)), r.f1, 0),
    ];
    for (name, oracle, got, bit) in expect {
        let flagged = bit != 0 && r.flags.contains(bit);
        match oracle {
            Some(v) if flagged || (v - got).abs() > 1e-9 => {
                return Err(format!("{name}: oracle {v}, got {got} (flagged {flagged})"))
            }
            None if name == "eodd" => {
                if !flagged || (got - eodd_v).abs() > 1e-9 {
                    return Err(format!("eodd: partial value {eodd_v}, got {got} (flagged {flagged})"));
                }
            }
            None if !flagged || got != 0.0 => return Err(format!("{name}: undefined, got {got} (flagged {flagged})")),
            _ => {}
        }
    }
    let grid = abcc_grid(scores, s, 1_000_000);
    let flagged = r.flags.contains(Flags::ABCC);
    match grid {
        Some(v) if flagged || (v - r.abcc).abs() > 1e-5 => Err(format!("abcc: grid {v}, got {}", r.abcc)),
        None if !flagged || r.abcc != 0.0 => Err(format!("abcc: undefined, got {}", r.abcc)),
        _ => Ok(()),
    }
}

pub const GRADIENT_KINDS: [MethodKind; 8] = MethodKind::ALL;

/// Central-difference check of `instances` random problems of `kind`.
/// Returns one message per failing instance.
///
/// A coordinate that misses the tolerance at `h = 1e-5` is redone at
/// `1e-7`. If the two difference quotients disagree the step crossed a
/// ReLU kink and the smaller step is used; if they agree the analytic
/// value is wrong.
pub fn gradient_failures(kind: MethodKind, instances: u64) -> Vec<String> {
    let mut failures = Vec::new();
    for seed in 0..instances {
        let n = 8 + (seed as usize % 5);
        let d = 3 + (seed as usize % 3);
        let mut p = grad_problem(kind, 1000 + seed, n, d);
        let analytic = p.analytic();
        let coarse = p.numeric(1e-5);
        let mut fine: Option<Vec<f64>> = None;
        let mut worst: f64 = 0.0;
        for (k, (&a, &f)) in analytic.iter().zip(&coarse).enumerate() {
            let mut err = rel_err(a, f);
            if err >= 1e-4 {
                let fine = fine.get_or_insert_with(|| p.numeric(1e-7));
                if rel_err(f, fine[k]) >= 1e-4 {
                    err = rel_err(a, fine[k]);
                }
            }
            worst = worst.max(err);
        }
        if worst >= 1e-4 {
            failures.push(format!("{kind} seed {seed}: max relative error {worst:.3e}"));
        }
    }
    failures
}

/// Gradients of `kind` at lambda 0 against ERM on the same problem.
pub fn lambda_zero_gap(kind: MethodKind, seed: u64) -> f64 {
    let erm = grad_problem(MethodKind::Erm, seed, 10, 4);
    let mut other = grad_problem(kind, seed, 10, 4);
    let mut cfg = other.model.config;
    cfg.lambda = 0.0;
    other.model.config = cfg;
    let a = erm.analytic();
    let b = other.analytic();
    assert_eq!(a.len(), b.len());
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
