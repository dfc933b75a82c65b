use crate::dense::Matrix;

/// Fraction of `ids` whose arg-max class equals the label; ties pick the lower
/// class. Empty `ids` give 0.
pub fn accuracy(probs: &Matrix, ids: &[u32], labels: &[u8]) -> f64 {
    if ids.is_empty() {
        return 0.0;
    }
    let correct = ids
        .iter()
        .filter(|&&v| {
            let row = probs.row(v as usize);
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best == labels[v as usize] as usize
        })
        .count();
    correct as f64 / ids.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinaryScores {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Positive-class scores over `ids`, predicting positive when `score >= threshold`.
pub fn binary_f1(scores: &[f64], ids: &[u32], labels: &[u8], threshold: f64) -> BinaryScores {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for &v in ids {
        let predicted = scores[v as usize] >= threshold;
        match (predicted, labels[v as usize] == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    BinaryScores {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
    }
}

/// Threshold among the observed scores of `ids` that maximizes F1; ties keep
/// the highest threshold. Returns 0.5 when `ids` holds no positive.
pub fn best_threshold(scores: &[f64], ids: &[u32], labels: &[u8]) -> f64 {
    let mut ranked: Vec<(f64, bool)> = ids
        .iter()
        .map(|&v| (scores[v as usize], labels[v as usize] == 1))
        .collect();
    let positives = ranked.iter().filter(|r| r.1).count();
    if positives == 0 {
        return 0.5;
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut best_f1, mut best_t) = (-1.0, 0.5);
    let mut i = 0;
    while i < ranked.len() {
        let t = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == t {
            if ranked[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let f1 = 2.0 * tp as f64 / (tp + positives + fp) as f64;
        if f1 > best_f1 {
            best_f1 = f1;
            best_t = t;
        }
    }
    best_t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub threshold: f64,
    pub val: BinaryScores,
    pub test: BinaryScores,
}

/// Tunes the decision threshold on `val` and reports suspicious-class scores
/// on both `val` and `test`.
pub fn evaluate(scores: &[f64], val: &[u32], test: &[u32], labels: &[u8]) -> EvalSummary {
    let threshold = best_threshold(scores, val, labels);
    EvalSummary {
        threshold,
        val: binary_f1(scores, val, labels, threshold),
        test: binary_f1(scores, test, labels, threshold),
    }
}

/// Column `class` of `probs`.
pub fn class_scores(probs: &Matrix, class: usize) -> Vec<f64> {
    (0..probs.rows()).map(|i| probs.get(i, class)).collect()
}
