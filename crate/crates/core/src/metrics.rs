//! Utility and group-fairness metrics over an [`EvalBatch`].
//!
//! Conventions:
//! * `ŷ = 1` iff `score >= threshold` (ties at the threshold are positive).
//! * Gaps are absolute between-group differences on `[0, 1]`.
//! * `eodd` is the sum of the TPR gap and the FPR gap, so it lies on `[0, 2]`
//!   and is never below `eopp`.
//! * `ppv` compares `P(y = 1 | ŷ = 1)` across groups.
//! * `prule` is reported on `[0, 100]`.
//! * A metric whose cell is empty (a group without members, without
//!   positives, ...) is reported as 0 and its bit is set in
//!   [`MetricReport::flags`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalBatch<T> {
    pub scores: Vec<T>,
    pub labels: Vec<u8>,
    pub sensitive: Vec<u8>,
    pub threshold: T,
}

impl<T: Scalar> EvalBatch<T> {
    pub fn new(scores: Vec<T>, labels: Vec<u8>, sensitive: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() || scores.len() != sensitive.len() {
            return Err(Error::Contract(format!(
                "batch lengths differ: {} scores, {} labels, {} sensitive",
                scores.len(),
                labels.len(),
                sensitive.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::Contract("empty evaluation batch".into()));
        }
        if labels.iter().chain(&sensitive).any(|&v| v > 1) {
            return Err(Error::Contract("labels and sensitive codes must be 0 or 1".into()));
        }
        if scores.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(Error::Contract("scores must lie in [0, 1]".into()));
        }
        Ok(Self {
            scores,
            labels,
            sensitive,
            threshold: T::lit(0.5),
        })
    }

    pub fn with_threshold(mut self, threshold: T) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn predicted(&self) -> Vec<u8> {
        self.scores.iter().map(|&p| u8::from(p >= self.threshold)).collect()
    }

    /// Same batch with the sensitive codes swapped.
    pub fn relabeled(&self) -> Self {
        Self {
            sensitive: self.sensitive.iter().map(|&s| 1 - s).collect(),
            ..self.clone()
        }
    }

    /// Sub-batch of the rows in group `g`.
    fn group(&self, g: u8) -> (Vec<T>, Vec<u8>) {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.len() {
            if self.sensitive[i] == g {
                scores.push(self.scores[i]);
                labels.push(self.labels[i]);
            }
        }
        (scores, labels)
    }
}

/// A metric value with a flag for "some required cell was empty".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured<T> {
    pub value: T,
    pub defined: bool,
}

impl<T: Scalar> Measured<T> {
    fn ok(value: T) -> Self {
        Self { value, defined: true }
    }

    fn undefined() -> Self {
        Self {
            value: T::zero(),
            defined: false,
        }
    }
}

fn ratio<T: Scalar>(num: usize, den: usize) -> Option<T> {
    (den > 0).then(|| T::from_count(num) / T::from_count(den))
}

/// `P(ŷ = 1 | s = g, condition)` per group.
fn positive_rates<T: Scalar>(batch: &EvalBatch<T>, keep: impl Fn(usize) -> bool) -> [Option<T>; 2] {
    let yhat = batch.predicted();
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for i in (0..batch.len()).filter(|&i| keep(i)) {
        let g = batch.sensitive[i] as usize;
        tot[g] += 1;
        pos[g] += yhat[i] as usize;
    }
    [ratio(pos[0], tot[0]), ratio(pos[1], tot[1])]
}

fn gap<T: Scalar>(rates: [Option<T>; 2]) -> Measured<T> {
    match rates {
        [Some(a), Some(b)] => Measured::ok((a - b).abs()),
        _ => Measured::undefined(),
    }
}

pub fn accuracy<T: Scalar>(batch: &EvalBatch<T>) -> T {
    let yhat = batch.predicted();
    let hits = yhat.iter().zip(&batch.labels).filter(|(a, b)| a == b).count();
    T::from_count(hits) / T::from_count(batch.len())
}

/// Mann-Whitney AUC with ties counted one half.
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Measured<T> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Measured::undefined();
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // Midranks (1-based) summed over positives.
    let mut rank_sum = T::zero();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = T::from_count(i + j + 2) / T::lit(2.0);
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let np = T::from_count(n_pos);
    let u = rank_sum - np * (np + T::one()) / T::lit(2.0);
    Measured::ok(u / (np * T::from_count(n_neg)))
}

/// Average precision: `sum_k (R_k - R_{k-1}) P_k` over distinct thresholds
/// taken in descending score order.
pub fn average_precision<T: Scalar>(scores: &[T], labels: &[u8]) -> Measured<T> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Measured::undefined();
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = T::zero();
    let mut ap = T::zero();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let precision = T::from_count(tp) / T::from_count(tp + fp);
        let recall = T::from_count(tp) / T::from_count(n_pos);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Measured::ok(ap)
}

pub fn f1<T: Scalar>(batch: &EvalBatch<T>) -> T {
    let yhat = batch.predicted();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &y) in yhat.iter().zip(&batch.labels) {
        match (p, y) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return T::zero();
    }
    let tp2 = T::from_count(2 * tp);
    tp2 / (tp2 + T::from_count(fp + fn_))
}

pub fn dp<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    gap(positive_rates(batch, |_| true))
}

pub fn prule<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    let hundred = T::lit(100.0);
    match positive_rates(batch, |_| true) {
        [Some(a), Some(b)] => {
            let v = if a == T::zero() && b == T::zero() {
                hundred
            } else if a == T::zero() || b == T::zero() {
                T::zero()
            } else {
                hundred * (a / b).min(b / a)
            };
            Measured::ok(v)
        }
        _ => Measured::undefined(),
    }
}

pub fn eopp<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    gap(positive_rates(batch, |i| batch.labels[i] == 1))
}

/// TPR gap plus FPR gap. An empty cell zeroes its term and clears `defined`.
pub fn eodd<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    let tpr = eopp(batch);
    let fpr = gap(positive_rates(batch, |i| batch.labels[i] == 0));
    Measured {
        value: tpr.value + fpr.value,
        defined: tpr.defined && fpr.defined,
    }
}

/// Exact area between the right-continuous empirical CDFs of the two
/// groups' scores, over `[0, 1]`.
pub fn abcc<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    let (mut g0, _) = batch.group(0);
    let (mut g1, _) = batch.group(1);
    if g0.is_empty() || g1.is_empty() {
        return Measured::undefined();
    }
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("finite scores");
    g0.sort_by(cmp);
    g1.sort_by(cmp);
    let mut breaks: Vec<T> = g0.iter().chain(&g1).copied().collect();
    breaks.push(T::zero());
    breaks.push(T::one());
    breaks.sort_by(cmp);
    breaks.dedup();

    let (n0, n1) = (T::from_count(g0.len()), T::from_count(g1.len()));
    let (mut i0, mut i1) = (0usize, 0usize);
    let mut area = T::zero();
    for w in breaks.windows(2) {
        let x = w[0];
        while i0 < g0.len() && g0[i0] <= x {
            i0 += 1;
        }
        while i1 < g1.len() && g1[i1] <= x {
            i1 += 1;
        }
        let f0 = T::from_count(i0) / n0;
        let f1 = T::from_count(i1) / n1;
        area += (f0 - f1).abs() * (w[1] - x);
    }
    Measured::ok(area)
}

/// `|P(y = 1 | ŷ = 1, s = 0) - P(y = 1 | ŷ = 1, s = 1)|`.
pub fn ppv<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    let yhat = batch.predicted();
    let mut hit = [0usize; 2];
    let mut tot = [0usize; 2];
    for i in 0..batch.len() {
        if yhat[i] == 1 {
            let g = batch.sensitive[i] as usize;
            tot[g] += 1;
            hit[g] += batch.labels[i] as usize;
        }
    }
    gap([ratio(hit[0], tot[0]), ratio(hit[1], tot[1])])
}

fn balance<T: Scalar>(batch: &EvalBatch<T>, class: u8) -> Measured<T> {
    let mut sum = [T::zero(); 2];
    let mut cnt = [0usize; 2];
    for i in 0..batch.len() {
        if batch.labels[i] == class {
            let g = batch.sensitive[i] as usize;
            sum[g] += batch.scores[i];
            cnt[g] += 1;
        }
    }
    let mean = |g: usize| (cnt[g] > 0).then(|| sum[g] / T::from_count(cnt[g]));
    gap([mean(0), mean(1)])
}

/// Gap in mean score among `y = 0` rows.
pub fn bnegc<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    balance(batch, 0)
}

/// Gap in mean score among `y = 1` rows.
pub fn bposc<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    balance(batch, 1)
}

/// Gap in per-group accuracy.
pub fn accp<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    let yhat = batch.predicted();
    let mut hit = [0usize; 2];
    let mut tot = [0usize; 2];
    for i in 0..batch.len() {
        let g = batch.sensitive[i] as usize;
        tot[g] += 1;
        hit[g] += usize::from(yhat[i] == batch.labels[i]);
    }
    gap([ratio(hit[0], tot[0]), ratio(hit[1], tot[1])])
}

/// Gap in per-group AUC.
pub fn aucp<T: Scalar>(batch: &EvalBatch<T>) -> Measured<T> {
    let (s0, y0) = batch.group(0);
    let (s1, y1) = batch.group(1);
    let a0 = auc(&s0, &y0);
    let a1 = auc(&s1, &y1);
    if a0.defined && a1.defined {
        Measured::ok((a0.value - a1.value).abs())
    } else {
        Measured::undefined()
    }
}

/// Bit set of metrics whose value is a placeholder 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Flags(pub u32);

impl Flags {
    pub const AUC: u32 = 1 << 0;
    pub const AP: u32 = 1 << 1;
    pub const DP: u32 = 1 << 2;
    pub const PRULE: u32 = 1 << 3;
    pub const EOPP: u32 = 1 << 4;
    pub const EODD: u32 = 1 << 5;
    pub const ABCC: u32 = 1 << 6;
    pub const PPV: u32 = 1 << 7;
    pub const BNEGC: u32 = 1 << 8;
    pub const BPOSC: u32 = 1 << 9;
    pub const ACCP: u32 = 1 << 10;
    pub const AUCP: u32 = 1 << 11;

    pub fn contains(self, bit: u32) -> bool {
        self.0 & bit != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// Every metric for one batch. Stored on the internal `[0, 1]` scale
/// (`prule` on `[0, 100]`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub auc: f64,
    pub ap: f64,
    pub f1: f64,
    pub dp: f64,
    pub prule: f64,
    pub eopp: f64,
    pub eodd: f64,
    pub abcc: f64,
    pub ppv: f64,
    pub bnegc: f64,
    pub bposc: f64,
    pub accp: f64,
    pub aucp: f64,
    pub flags: Flags,
}

/// Column order of [`MetricReport`] in every CSV this crate writes.
pub const METRIC_COLUMNS: [&str; 14] = [
    "acc", "auc", "ap", "f1", "dp", "prule", "eopp", "eodd", "abcc", "ppv", "bnegc", "bposc", "accp", "aucp",
];

impl MetricReport {
    pub fn values(&self) -> [f64; 14] {
        [
            self.acc, self.auc, self.ap, self.f1, self.dp, self.prule, self.eopp, self.eodd, self.abcc,
            self.ppv, self.bnegc, self.bposc, self.accp, self.aucp,
        ]
    }

    pub fn from_values(v: [f64; 14], flags: Flags) -> Self {
        Self {
            acc: v[0],
            auc: v[1],
            ap: v[2],
            f1: v[3],
            dp: v[4],
            prule: v[5],
            eopp: v[6],
            eodd: v[7],
            abcc: v[8],
            ppv: v[9],
            bnegc: v[10],
            bposc: v[11],
            accp: v[12],
            aucp: v[13],
            flags,
        }
    }

    /// Values in percentage points (`prule` is already on that scale).
    pub fn presented(&self) -> [f64; 14] {
        let mut v = self.values();
        for (i, x) in v.iter_mut().enumerate() {
            if METRIC_COLUMNS[i] != "prule" {
                *x *= 100.0;
            }
        }
        v
    }

    /// Inverse of [`Self::presented`].
    pub fn from_presented(v: [f64; 14], flags: Flags) -> Self {
        let mut raw = v;
        for (i, x) in raw.iter_mut().enumerate() {
            if METRIC_COLUMNS[i] != "prule" {
                *x /= 100.0;
            }
        }
        Self::from_values(raw, flags)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_COLUMNS.iter().position(|&c| c == name).map(|i| self.values()[i])
    }
}

pub fn evaluate<T: Scalar>(batch: &EvalBatch<T>) -> MetricReport {
    let mut flags = 0u32;
    let mut take = |m: Measured<T>, bit: u32| {
        if !m.defined {
            flags |= bit;
        }
        m.value.as_f64()
    };
    let auc_v = take(auc(&batch.scores, &batch.labels), Flags::AUC);
    let ap_v = take(average_precision(&batch.scores, &batch.labels), Flags::AP);
    let dp_v = take(dp(batch), Flags::DP);
    let prule_v = take(prule(batch), Flags::PRULE);
    let eopp_v = take(eopp(batch), Flags::EOPP);
    let eodd_v = take(eodd(batch), Flags::EODD);
    let abcc_v = take(abcc(batch), Flags::ABCC);
    let ppv_v = take(ppv(batch), Flags::PPV);
    let bnegc_v = take(bnegc(batch), Flags::BNEGC);
    let bposc_v = take(bposc(batch), Flags::BPOSC);
    let accp_v = take(accp(batch), Flags::ACCP);
    let aucp_v = take(aucp(batch), Flags::AUCP);
    MetricReport {
        acc: accuracy(batch).as_f64(),
        auc: auc_v,
        ap: ap_v,
        f1: f1(batch).as_f64(),
        dp: dp_v,
        prule: prule_v,
        eopp: eopp_v,
        eodd: eodd_v,
        abcc: abcc_v,
        ppv: ppv_v,
        bnegc: bnegc_v,
        bposc: bposc_v,
        accp: accp_v,
        aucp: aucp_v,
        flags: Flags(flags),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn batch(scores: &[f64], y: &[u8], s: &[u8]) -> EvalBatch<f64> {
        EvalBatch::new(scores.to_vec(), y.to_vec(), s.to_vec()).unwrap()
    }

    #[test]
    fn auc_hand_example() {
        let a = auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]);
        assert!(a.defined);
        assert_relative_eq!(a.value, 0.75);
    }

    #[test]
    fn perfect_predictor() {
        let b = batch(&[0.0, 1.0, 1.0, 0.0], &[0, 1, 1, 0], &[0, 0, 1, 1]);
        let r = evaluate(&b);
        assert_eq!((r.acc, r.auc, r.ap, r.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn acc_and_f1_from_confusion() {
        let b = batch(&[0.9, 0.9, 0.1, 0.1], &[1, 0, 1, 0], &[0, 1, 0, 1]);
        assert_relative_eq!(accuracy(&b), 0.5);
        assert_relative_eq!(f1(&b), 0.5);
    }

    #[test]
    fn single_class_flags_auc_and_ap() {
        let b = batch(&[0.2, 0.7], &[1, 1], &[0, 1]);
        let r = evaluate(&b);
        assert!(r.flags.contains(Flags::AUC) && r.flags.contains(Flags::AP));
        assert_eq!((r.auc, r.ap), (0.0, 0.0));
    }

    #[test]
    fn dp_hand_example_and_symmetry() {
        let b = batch(&[0.9, 0.2, 0.8, 0.7], &[0, 0, 0, 0], &[0, 0, 1, 1]);
        assert_relative_eq!(dp(&b).value, 0.5);
        assert_eq!(dp(&b.relabeled()).value, 0.5);
        let same = batch(&[0.3, 0.6, 0.3, 0.6], &[0, 1, 0, 1], &[0, 0, 1, 1]);
        assert_eq!(dp(&same).value, 0.0);
    }

    #[test]
    fn empty_group_is_flagged() {
        let b = batch(&[0.9, 0.2], &[1, 0], &[1, 1]);
        let r = evaluate(&b);
        assert!(r.flags.contains(Flags::DP));
        assert!(r.flags.contains(Flags::ABCC));
        assert_eq!(r.dp, 0.0);
    }

    #[test]
    fn prule_cases() {
        // rates 0.5 and 1.0
        let b = batch(&[0.9, 0.2, 0.8, 0.7], &[0; 4], &[0, 0, 1, 1]);
        assert_relative_eq!(prule(&b).value, 50.0);
        let eq = batch(&[0.9, 0.2, 0.8, 0.1], &[0; 4], &[0, 0, 1, 1]);
        assert_relative_eq!(prule(&eq).value, 100.0);
        let none = batch(&[0.1, 0.2, 0.3, 0.4], &[0; 4], &[0, 0, 1, 1]);
        assert_relative_eq!(prule(&none).value, 100.0);
        // rates 0 and 0.3 (3 of 10)
        let mut s = vec![0u8; 10];
        s.extend(vec![1u8; 10]);
        let mut p = vec![0.1; 10];
        p.extend([0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]);
        let one_zero = batch(&p, &[0; 20], &s);
        assert_eq!(prule(&one_zero).value, 0.0);
    }

    #[test]
    fn eopp_and_eodd_hand_examples() {
        let b = batch(&[0.9, 0.2, 0.8, 0.7], &[1, 1, 1, 0], &[0, 0, 1, 1]);
        assert_relative_eq!(eopp(&b).value, 0.5);
        assert_relative_eq!(eopp(&b.relabeled()).value, 0.5);

        let b = batch(&[0.9, 0.1, 0.9, 0.9], &[1, 0, 1, 0], &[0, 0, 1, 1]);
        assert_relative_eq!(eopp(&b).value, 0.0);
        assert_relative_eq!(eodd(&b).value, 1.0);
    }

    #[test]
    fn eodd_missing_cell_contributes_zero() {
        // Group 1 has no negatives.
        let b = batch(&[0.9, 0.1, 0.9, 0.2], &[1, 0, 1, 1], &[0, 0, 1, 1]);
        let m = eodd(&b);
        assert!(!m.defined);
        assert_relative_eq!(m.value, eopp(&b).value);
    }

    #[test]
    fn abcc_hand_example() {
        let b = batch(&[0.2, 0.4, 0.6, 0.8], &[0, 1, 0, 1], &[0, 0, 1, 1]);
        assert_relative_eq!(abcc(&b).value, 0.4, epsilon = 1e-15);
        let same = batch(&[0.2, 0.4, 0.4, 0.2], &[0, 1, 0, 1], &[0, 0, 1, 1]);
        assert_eq!(abcc(&same).value, 0.0);
    }

    #[test]
    fn balance_gaps() {
        let b = batch(&[0.1, 0.3, 0.5, 0.5, 0.9], &[0, 0, 0, 0, 1], &[0, 0, 1, 1, 1]);
        assert_relative_eq!(bnegc(&b).value, 0.3, epsilon = 1e-15);
        // group 0 has no positives
        assert!(!bposc(&b).defined);
    }

    #[test]
    fn aucp_hand_example() {
        // group 0: one positive above one negative -> 1.0
        // group 1: positives {0.8, 0.4}, negatives {0.6, 0.2} -> 3/4
        let b = batch(
            &[0.9, 0.1, 0.8, 0.4, 0.6, 0.2],
            &[1, 0, 1, 1, 0, 0],
            &[0, 0, 1, 1, 1, 1],
        );
        assert_relative_eq!(aucp(&b).value, 0.25);
    }

    #[test]
    fn identical_groups_zero_every_fairness_metric() {
        let b = batch(
            &[0.2, 0.7, 0.9, 0.4, 0.2, 0.7, 0.9, 0.4],
            &[0, 1, 1, 0, 0, 1, 1, 0],
            &[0, 0, 0, 0, 1, 1, 1, 1],
        );
        let r = evaluate(&b);
        for name in ["dp", "eopp", "eodd", "abcc", "ppv", "bnegc", "bposc", "accp", "aucp"] {
            assert_eq!(r.get(name).unwrap(), 0.0, "{name}");
        }
        assert_eq!(r.prule, 100.0);
    }

    #[test]
    fn threshold_tie_is_positive() {
        let b = batch(&[0.5, 0.49], &[1, 0], &[0, 1]);
        assert_eq!(b.predicted(), vec![1, 0]);
    }

    #[test]
    fn invalid_batches_rejected() {
        assert!(EvalBatch::new(vec![0.5], vec![1, 0], vec![0]).is_err());
        assert!(EvalBatch::new(vec![1.5], vec![1], vec![0]).is_err());
        assert!(EvalBatch::new(vec![0.5], vec![2], vec![0]).is_err());
    }

    #[test]
    fn presentation_scale_round_trips() {
        let b = batch(&[0.9, 0.2, 0.8, 0.7], &[1, 0, 1, 0], &[0, 0, 1, 1]);
        let r = evaluate(&b);
        let p = r.presented();
        assert_relative_eq!(p[0], r.acc * 100.0);
        assert_eq!(p[5], r.prule);
        let back = MetricReport::from_presented(p, r.flags);
        for (a, b) in back.values().iter().zip(r.values()) {
            assert_relative_eq!(*a, b, max_relative = 1e-15);
        }
    }
}
