//! Classification and clustering scores.

/// Per-class `(tp, fp, fn)` counts for labels in `0..k`.
fn confusion_counts(truth: &[usize], pred: &[usize], k: usize) -> Vec<(usize, usize, usize)> {
    assert_eq!(truth.len(), pred.len(), "label vectors differ in length");
    let mut counts = vec![(0, 0, 0); k];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            counts[t].0 += 1;
        } else {
            counts[p].1 += 1;
            counts[t].2 += 1;
        }
    }
    counts
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// `(macro_f1, micro_f1)`. The macro average runs over classes that occur
/// in `truth` or `pred`.
pub fn f1_scores(truth: &[usize], pred: &[usize]) -> (f64, f64) {
    let k = truth.iter().chain(pred).max().map_or(0, |m| m + 1);
    let counts = confusion_counts(truth, pred, k);
    let present: Vec<_> = counts.iter().filter(|(tp, fp, fn_)| tp + fp + fn_ > 0).collect();
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present.iter().map(|&&(tp, fp, fn_)| f1(tp, fp, fn_)).sum::<f64>() / present.len() as f64
    };
    let (tp, fp, fn_) = counts.iter().fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    (macro_f1, f1(tp, fp, fn_))
}

/// F1 of one class treated as the positive label.
pub fn class_f1(truth: &[usize], pred: &[usize], class: usize) -> f64 {
    let k = truth.iter().chain(pred).max().map_or(0, |m| m + 1).max(class + 1);
    let (tp, fp, fn_) = confusion_counts(truth, pred, k)[class];
    f1(tp, fp, fn_)
}

fn relabel(x: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::BTreeMap::new();
    let out = x
        .iter()
        .map(|v| {
            let next = map.len();
            *map.entry(*v).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    assert_eq!(a.len(), b.len(), "partitions differ in length");
    let (a, ka) = relabel(a);
    let (b, kb) = relabel(b);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&i, &j) in a.iter().zip(&b) {
        table[i][j] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    (table, rows, cols)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts.iter().filter(|&&c| c > 0).map(|&c| -(c as f64 / n) * (c as f64 / n).ln()).sum()
}

/// Normalized mutual information with the arithmetic mean of the two
/// entropies as denominator. Two single-cluster partitions score 1.
pub fn nmi(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let n = a.len() as f64;
    let (table, rows, cols) = contingency(a, b);
    let (ha, hb) = (entropy(&rows, n), entropy(&cols, n));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    (mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0)
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. Identical trivial partitions score 1.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    let (table, rows, cols) = contingency(a, b);
    let index: f64 = table.iter().flatten().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| comb2(c)).sum();
    let expected = sum_a * sum_b / comb2(a.len()).max(f64::MIN_POSITIVE);
    let max_index = (sum_a + sum_b) / 2.0;
    if max_index == expected {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

/// Macro-F1 of always predicting the most frequent class (ties go to the
/// smallest label).
pub fn majority_class_macro_f1(labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let majority = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
    f1_scores(labels, &vec![majority; labels.len()]).0
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
