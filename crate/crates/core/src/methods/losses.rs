//! Differentiable utility and fairness terms built on a [`Tape`].
//!
//! `scores` are `n x 1` probabilities already on the tape; `y` and `s` are
//! plain binary slices of the same length.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability clamp used by every log-based loss.
pub const PROB_CLAMP: f64 = 1e-7;

fn check_len<T: Scalar>(tape: &Tape<T>, scores: Var, n: usize, op: &'static str) -> Result<()> {
    let (rows, cols) = tape.shape(scores);
    if cols != 1 || rows != n {
        return Err(Error::Shape {
            op,
            left: (rows, cols),
            right: (n, 1),
        });
    }
    Ok(())
}

pub fn binary_column<T: Scalar>(codes: &[u8]) -> Tensor<T> {
    Tensor::column(codes.iter().map(|&v| T::from_count(v as usize)).collect()).expect("non-empty codes")
}

fn clamp_prob<T: Scalar>(tape: &mut Tape<T>, p: Var) -> Var {
    let eps = T::lit(PROB_CLAMP);
    tape.clamp(p, eps, T::one() - eps)
}

/// Mean binary cross-entropy with clamped probabilities.
pub fn bce<T: Scalar>(tape: &mut Tape<T>, scores: Var, targets: &[u8]) -> Result<Var> {
    check_len(tape, scores, targets.len(), "bce")?;
    let p = clamp_prob(tape, scores);
    let log_p = tape.log(p);
    let q = tape.one_minus(p);
    let log_q = tape.log(q);
    let yv = tape.constant(binary_column(targets));
    let not_y = tape.one_minus(yv);
    let a = tape.mul(yv, log_p)?;
    let b = tape.mul(not_y, log_q)?;
    let ll = tape.add(a, b)?;
    let m = tape.mean(ll);
    Ok(tape.scale(m, -T::one()))
}

/// Which conditional the soft gap is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapKind {
    Dp,
    Eopp,
    Eodd,
}

/// `|mean(score | s=0, cond) - mean(score | s=1, cond)|`, or a constant 0
/// (and `false`) when either cell is empty.
fn soft_gap<T: Scalar>(tape: &mut Tape<T>, scores: Var, s: &[u8], cond: impl Fn(usize) -> bool) -> Result<(Var, bool)> {
    let m0: Vec<bool> = (0..s.len()).map(|i| s[i] == 0 && cond(i)).collect();
    let m1: Vec<bool> = (0..s.len()).map(|i| s[i] == 1 && cond(i)).collect();
    if !m0.contains(&true) || !m1.contains(&true) {
        return Ok((tape.scalar(T::zero()), false));
    }
    let a = tape.masked_mean(scores, &m0)?;
    let b = tape.masked_mean(scores, &m1)?;
    let d = tape.sub(a, b)?;
    Ok((tape.abs(d), true))
}

/// Soft-score fairness gap. The flag is false when a cell was missing.
pub fn diff_gap<T: Scalar>(tape: &mut Tape<T>, kind: GapKind, scores: Var, y: &[u8], s: &[u8]) -> Result<(Var, bool)> {
    check_len(tape, scores, s.len(), "diff_gap")?;
    if y.len() != s.len() {
        return Err(Error::Contract("labels and sensitive codes differ in length".into()));
    }
    match kind {
        GapKind::Dp => soft_gap(tape, scores, s, |_| true),
        GapKind::Eopp => soft_gap(tape, scores, s, |i| y[i] == 1),
        GapKind::Eodd => {
            let (pos, ok_pos) = soft_gap(tape, scores, s, |i| y[i] == 1)?;
            let (neg, ok_neg) = soft_gap(tape, scores, s, |i| y[i] == 0)?;
            Ok((tape.add(pos, neg)?, ok_pos && ok_neg))
        }
    }
}

/// Batch prejudice index
/// `(1/n) sum_i sum_c p_i^c ln(P(c | s_i) / P(c))`, with `p^1 = score`,
/// `p^0 = 1 - score` and both conditionals estimated by batch means.
/// Evaluated in the grouped form
/// `sum_g (n_g / n) sum_c P(c | g) ln(P(c | g) / P(c))`.
pub fn prejudice_index<T: Scalar>(tape: &mut Tape<T>, scores: Var, s: &[u8]) -> Result<Var> {
    check_len(tape, scores, s.len(), "prejudice_index")?;
    let n = s.len();
    let p = clamp_prob(tape, scores);
    let q1 = tape.mean(p);
    let q0 = tape.one_minus(q1);
    let ln_q1 = tape.log(q1);
    let ln_q0 = tape.log(q0);
    let mut total = tape.scalar(T::zero());
    for g in 0..2u8 {
        let mask: Vec<bool> = s.iter().map(|&v| v == g).collect();
        let n_g = mask.iter().filter(|&&m| m).count();
        if n_g == 0 {
            continue;
        }
        let c1 = tape.masked_mean(p, &mask)?;
        let c0 = tape.one_minus(c1);
        let l1 = tape.log(c1);
        let l0 = tape.log(c0);
        let r1 = tape.sub(l1, ln_q1)?;
        let r0 = tape.sub(l0, ln_q0)?;
        let t1 = tape.mul(c1, r1)?;
        let t0 = tape.mul(c0, r0)?;
        let term = tape.add(t1, t0)?;
        let weighted = tape.scale(term, T::from_count(n_g) / T::from_count(n));
        total = tape.add(total, weighted)?;
    }
    Ok(total)
}

/// Median of pairwise absolute score differences; 1 when that median is 0.
pub fn median_bandwidth<T: Scalar>(scores: &[T]) -> T {
    let mut d = Vec::with_capacity(scores.len() * scores.len().saturating_sub(1) / 2);
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            d.push((scores[i] - scores[j]).abs());
        }
    }
    if d.is_empty() {
        return T::one();
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        (d[m / 2 - 1] + d[m / 2]) / T::lit(2.0)
    };
    if med > T::zero() {
        med
    } else {
        T::one()
    }
}

/// Centered sensitive-attribute kernel `H L H`, with `L` Gaussian of
/// bandwidth 1 on the codes.
fn centered_sensitive_kernel<T: Scalar>(s: &[u8]) -> Tensor<T> {
    let n = s.len();
    let same = T::one();
    let diff = T::lit((-0.5f64).exp());
    let l = |i: usize, j: usize| if s[i] == s[j] { same } else { diff };
    let nn = T::from_count(n);
    let row_means: Vec<T> = (0..n).map(|i| (0..n).map(|j| l(i, j)).sum::<T>() / nn).collect();
    let grand = row_means.iter().copied().sum::<T>() / nn;
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // L symmetric, so column means equal row means.
            out.set(i, j, l(i, j) - row_means[i] - row_means[j] + grand);
        }
    }
    out
}

/// Biased HSIC estimate `tr(K H L H) / (n - 1)^2` with a fixed score
/// bandwidth. `K` is Gaussian on the scores; the bandwidth is a constant.
pub fn hsic_with_bandwidth<T: Scalar>(tape: &mut Tape<T>, scores: Var, s: &[u8], bandwidth: T) -> Result<Var> {
    check_len(tape, scores, s.len(), "hsic")?;
    let n = s.len();
    if n < 4 {
        return Err(Error::Config(format!("hsic needs a batch of at least 4, got {n}")));
    }
    if !(bandwidth > T::zero()) {
        return Err(Error::Config("hsic bandwidth must be positive".into()));
    }
    let d = tape.pairwise_diff(scores)?;
    let d2 = tape.square(d);
    let scaled = tape.scale(d2, -T::one() / (T::lit(2.0) * bandwidth * bandwidth));
    let k = tape.exp(scaled);
    let hlh = tape.constant(centered_sensitive_kernel(s));
    // tr(K M) = sum_ij K_ij M_ji and M = HLH is symmetric.
    let prod = tape.mul(k, hlh)?;
    let tr = tape.sum(prod);
    let denom = T::from_count(n - 1);
    Ok(tape.scale(tr, T::one() / (denom * denom)))
}

/// HSIC with the median heuristic bandwidth of the current scores.
pub fn hsic<T: Scalar>(tape: &mut Tape<T>, scores: Var, s: &[u8]) -> Result<Var> {
    let bw = median_bandwidth(tape.value(scores).data());
    hsic_with_bandwidth(tape, scores, s, bw)
}

/// LAFTR adversary objective: mean over groups of the within-group mean of
/// `|adv - s|`. Uses the present group alone (flag false) if one is empty.
pub fn group_l1<T: Scalar>(tape: &mut Tape<T>, adv: Var, s: &[u8]) -> Result<(Var, bool)> {
    check_len(tape, adv, s.len(), "group_l1")?;
    let sv = tape.constant(binary_column(s));
    let diff = tape.sub(adv, sv)?;
    let err = tape.abs(diff);
    let mut parts = Vec::with_capacity(2);
    for g in 0..2u8 {
        let mask: Vec<bool> = s.iter().map(|&v| v == g).collect();
        if mask.contains(&true) {
            parts.push(tape.masked_mean(err, &mask)?);
        }
    }
    let complete = parts.len() == 2;
    let mut acc = parts[0];
    for &p in &parts[1..] {
        acc = tape.add(acc, p)?;
    }
    Ok((tape.scale(acc, T::one() / T::from_count(parts.len())), complete))
}

/// Mean squared error between two same-shape nodes.
pub fn mse<T: Scalar>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    if tape.shape(a) != tape.shape(b) {
        return Err(Error::Shape {
            op: "mse",
            left: tape.shape(a),
            right: tape.shape(b),
        });
    }
    let d = tape.sub(a, b)?;
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}
