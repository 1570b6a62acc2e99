use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson_r: Option<f64>,
}

/// Mann-Whitney AUC: the share of (positive, negative) pairs where the
/// positive scores higher, ties counting half. Labels are 1 for positive,
/// anything else negative.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64, LearnError> {
    if scores.len() != labels.len() {
        return Err(LearnError::LengthMismatch(scores.len(), labels.len()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the U statistic, so ties stay integral
    let (mut neg_below, mut twice_u) = (0u64, 0u64);
    let (mut pos, mut neg) = (0u64, 0u64);
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end < idx.len() && scores[idx[end]] == scores[idx[k]] {
            end += 1;
        }
        let p = idx[k..end].iter().filter(|&&i| labels[i] == 1.0).count() as u64;
        let q = (end - k) as u64 - p;
        twice_u += p * (2 * neg_below + q);
        neg_below += q;
        pos += p;
        neg += q;
        k = end;
    }
    if pos == 0 || neg == 0 {
        return Err(LearnError::SingleClass);
    }
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

/// Mean absolute error and sample Pearson correlation.
pub fn mae_pearson(preds: &[f64], targets: &[f64]) -> Result<(f64, f64), LearnError> {
    if preds.len() != targets.len() || preds.len() < 2 {
        return Err(LearnError::LengthMismatch(preds.len(), targets.len()));
    }
    let n = preds.len() as f64;
    let mae = preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let mp = preds.iter().sum::<f64>() / n;
    let mt = targets.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in preds.iter().zip(targets) {
        sxy += (p - mp) * (t - mt);
        sxx += (p - mp) * (p - mp);
        syy += (t - mt) * (t - mt);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(LearnError::ZeroVariance);
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok((mae, r.clamp(-1.0, 1.0)))
}

/// Shuffled `k`-fold split of `0..n` as (train, test) index lists.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>, LearnError> {
    if k < 2 || k > n {
        return Err(LearnError::InvalidParams(format!("cannot make {k} folds from {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k)
        .map(|f| {
            let (lo, hi) = (f * n / k, (f + 1) * n / k);
            let test = idx[lo..hi].to_vec();
            let train = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
            (train, test)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_hand_cases() {
        assert_eq!(auc(&[0.9, 0.1], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.6, 0.4], &[1.0, 0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.2], &[1.0, 1.0]), Err(LearnError::SingleClass));
    }

    #[test]
    fn mae_pearson_hand_cases() {
        let (mae, r) = mae_pearson(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(mae, 0.0);
        assert!((r - 1.0).abs() < 1e-12);
        let (_, r) = mae_pearson(&[1.0, 0.0, -1.0], &[-1.0, 0.0, 1.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
        let (mae, _) = mae_pearson(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((mae - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mae_pearson(&[1.0, 2.0], &[3.0, 3.0]), Err(LearnError::ZeroVariance));
        assert!(mae_pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn folds_partition_the_rows() {
        let folds = kfold_indices(23, 5, 7).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|(_, t)| t.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
        for (train, test) in &folds {
            assert_eq!(train.len() + test.len(), 23);
            assert!(test.iter().all(|i| !train.contains(i)));
        }
        assert!(kfold_indices(3, 5, 0).is_err());
    }
}
