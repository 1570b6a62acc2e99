//! RBF support vector machines trained with SMO, and ensembles of them over
//! feature subsets.

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, TaskType};
use super::{sigmoid, LearnError};
use crate::face;
use crate::model::{FeatureVector, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` means 1 / number of features.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Standardize each feature with training mean and standard deviation.
    pub standardize: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: None, tolerance: 1e-3, max_iter: 100_000, standardize: true }
    }
}

/// One trained machine. `alpha` are the dual variables of the support
/// vectors and `y` their ±1 labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    /// Columns of the full vector this machine reads.
    pub features: Vec<usize>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub converged: bool,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl Svm {
    fn transform(&self, full: &[f64]) -> Vec<f64> {
        self.features.iter().enumerate().map(|(k, &f)| (full[f] - self.center[k]) / self.scale[k]).collect()
    }

    /// Signed distance-like decision value on a full feature row.
    pub fn decision(&self, full: &[f64]) -> f64 {
        let z = self.transform(full);
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(self.alpha.iter().zip(&self.y))
            .map(|(sv, (a, y))| a * y * rbf(self.gamma, sv, &z))
            .sum();
        s + self.bias
    }

    pub fn validate(&self, n_features: usize) -> Result<(), LearnError> {
        let bad = |s: &str| Err(LearnError::CorruptModel(s.into()));
        let k = self.features.len();
        if self.features.iter().any(|&f| f >= n_features) || self.center.len() != k || self.scale.len() != k {
            return bad("feature subset out of range");
        }
        if self.support_vectors.is_empty()
            || self.alpha.len() != self.support_vectors.len()
            || self.y.len() != self.support_vectors.len()
            || self.support_vectors.iter().any(|sv| sv.len() != k)
        {
            return bad("support vector shape");
        }
        if self.alpha.iter().any(|&a| !(a >= 0.0 && a <= self.c)) || self.y.iter().any(|&y| y != 1.0 && y != -1.0) {
            return bad("dual coefficients out of range");
        }
        if self.scale.iter().any(|&s| !(s > 0.0)) || !(self.gamma > 0.0) || !self.bias.is_finite() {
            return bad("non-positive scale or gamma");
        }
        Ok(())
    }
}

/// Trains one machine on `features` of `data`. The machine is returned even
/// when the iteration cap is hit, with `converged = false`.
pub fn train_svm_on(data: &Dataset, features: &[usize], params: &SvmParams) -> Result<Svm, LearnError> {
    data.validate()?;
    if data.task != TaskType::BinaryClass {
        return Err(LearnError::InvalidParams("SVM needs binary labels".into()));
    }
    if features.is_empty() || features.iter().any(|&f| f >= data.n_features()) {
        return Err(LearnError::InvalidParams("feature subset out of range".into()));
    }
    if !(params.c > 0.0) || params.gamma.is_some_and(|g| !(g > 0.0)) {
        return Err(LearnError::InvalidParams("C and gamma must be positive".into()));
    }
    let y: Vec<f64> = data.labels.iter().map(|&l| if l == 1.0 { 1.0 } else { -1.0 }).collect();
    if y.iter().all(|&v| v == y[0]) {
        return Err(LearnError::DegenerateLabels);
    }
    let n = data.len();
    let k = features.len();
    let (center, scale) = if params.standardize {
        let center: Vec<f64> = features.iter().map(|&f| data.rows.iter().map(|r| r[f]).sum::<f64>() / n as f64).collect();
        let scale = features
            .iter()
            .zip(&center)
            .map(|(&f, m)| {
                let sd = (data.rows.iter().map(|r| (r[f] - m).powi(2)).sum::<f64>() / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        (center, scale)
    } else {
        (vec![0.0; k], vec![1.0; k])
    };
    let x: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| features.iter().enumerate().map(|(j, &f)| (r[f] - center[j]) / scale[j]).collect())
        .collect();
    let gamma = params.gamma.unwrap_or(1.0 / k as f64);
    let kernel: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| rbf(gamma, &x[i], &x[j])).collect()).collect();
    let (alpha, bias, converged) = smo(&kernel, &y, params.c, params.tolerance, params.max_iter);

    let sv: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    Ok(Svm {
        features: features.to_vec(),
        center,
        scale,
        support_vectors: sv.iter().map(|&i| x[i].clone()).collect(),
        alpha: sv.iter().map(|&i| alpha[i]).collect(),
        y: sv.iter().map(|&i| y[i]).collect(),
        bias,
        gamma,
        c: params.c,
        converged,
    })
}

/// Trains one machine on every feature of `data`.
pub fn train_svm_smo(data: &Dataset, c: f64, gamma: f64) -> Result<Svm, LearnError> {
    let all: Vec<usize> = (0..data.n_features()).collect();
    train_svm_on(data, &all, &SvmParams { c, gamma: Some(gamma), standardize: false, ..Default::default() })
}

/// Dual solver for min ½ αᵀQα − Σα subject to 0 ≤ α ≤ C and yᵀα = 0, with
/// second-order working-set selection. Returns (α, bias, converged).
fn smo(kernel: &[Vec<f64>], y: &[f64], c: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64, bool) {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i][j];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    let mut converged = false;

    for _ in 0..max_iter {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i = t;
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if i != usize::MAX && v < g_max {
                let b = g_max - v;
                let a = kernel[i][i] + kernel[t][t] - 2.0 * kernel[i][t];
                let a = if a > 0.0 { a } else { 1e-12 };
                if -b * b / a < best {
                    best = -b * b / a;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < tol {
            converged = true;
            break;
        }

        let (ai, aj) = (alpha[i], alpha[j]);
        let quad = {
            let a = kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j];
            if a > 0.0 {
                a
            } else {
                1e-12
            }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            let (mut ni, mut nj) = (ai + delta, aj + delta);
            if diff > 0.0 && nj < 0.0 {
                nj = 0.0;
                ni = diff;
            } else if diff <= 0.0 && ni < 0.0 {
                ni = 0.0;
                nj = -diff;
            }
            if diff > 0.0 && ni > c {
                ni = c;
                nj = c - diff;
            } else if diff <= 0.0 && nj > c {
                nj = c;
                ni = c + diff;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            let (mut ni, mut nj) = (ai - delta, aj + delta);
            if sum > c && ni > c {
                ni = c;
                nj = sum - c;
            } else if sum <= c && nj < 0.0 {
                nj = 0.0;
                ni = sum;
            }
            if sum > c && nj > c {
                nj = c;
                ni = sum - c;
            } else if sum <= c && ni < 0.0 {
                ni = 0.0;
                nj = sum;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // rho from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb, mut sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    (alpha, -rho, converged)
}

/// Machines over feature subsets whose sigmoid outputs are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmEnsemble {
    pub schema_id: String,
    pub n_features: usize,
    pub members: Vec<Svm>,
}

impl SvmEnsemble {
    pub fn predict_values(&self, x: &[f64]) -> f64 {
        self.members.iter().map(|m| sigmoid(m.decision(x))).sum::<f64>() / self.members.len() as f64
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.members.is_empty() {
            return Err(LearnError::CorruptModel("ensemble has no members".into()));
        }
        self.members.iter().try_for_each(|m| m.validate(self.n_features))
    }
}

/// Mean of member sigmoids.
pub fn predict_svm_ensemble(ens: &SvmEnsemble, fv: &FeatureVector) -> Result<f64, LearnError> {
    if fv.schema_id != ens.schema_id || fv.len() != ens.n_features {
        return Err(LearnError::SchemaMismatch {
            expected: format!("{} ({} features)", ens.schema_id, ens.n_features),
            found: format!("{} ({} features)", fv.schema_id, fv.len()),
        });
    }
    Ok(ens.predict_values(&fv.values))
}

/// One member per expression task block, plus one over every feature.
pub fn face_member_subsets() -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> =
        TaskKind::FACE.iter().filter_map(|&t| face::task_feature_indices(t)).collect();
    subsets.push((0..face::feature_names().len()).collect());
    subsets
}

pub fn train_svm_ensemble(data: &Dataset, subsets: &[Vec<usize>], params: &SvmParams) -> Result<SvmEnsemble, LearnError> {
    if subsets.is_empty() {
        return Err(LearnError::InvalidParams("no member subsets".into()));
    }
    let members = subsets.iter().map(|s| train_svm_on(data, s, params)).collect::<Result<Vec<_>, _>>()?;
    Ok(SvmEnsemble { schema_id: data.schema_id.clone(), n_features: data.n_features(), members })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Dataset {
        let names = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        Dataset::new("t.v1", names, rows, labels, TaskType::BinaryClass).unwrap()
    }

    fn constant_member(bias: f64) -> Svm {
        Svm {
            features: vec![0],
            center: vec![0.0],
            scale: vec![1.0],
            support_vectors: vec![vec![0.0]],
            alpha: vec![0.0],
            y: vec![1.0],
            bias,
            gamma: 1.0,
            c: 1.0,
            converged: true,
        }
    }

    #[test]
    fn two_points() {
        let ds = binary(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, 1.0]);
        let m = train_svm_smo(&ds, 1.0, 0.5).unwrap();
        assert!(m.converged);
        assert_eq!(m.support_vectors.len(), 2);
        assert!(m.decision(&[0.0, 0.0]) < 0.0 && m.decision(&[1.0, 1.0]) > 0.0);
    }

    #[test]
    fn xor() {
        let ds = binary(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0, 1.0, 1.0]);
        let m = train_svm_smo(&ds, 10.0, 1.0).unwrap();
        for (x, l) in ds.rows.iter().zip(&ds.labels) {
            assert_eq!(m.decision(x) > 0.0, *l == 1.0);
        }
        let eq: f64 = m.alpha.iter().zip(&m.y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-6);
        assert!(m.alpha.iter().all(|&a| (0.0..=10.0).contains(&a)));
    }

    #[test]
    fn single_class() {
        let ds = binary(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]);
        assert_eq!(train_svm_smo(&ds, 1.0, 1.0), Err(LearnError::DegenerateLabels));
    }

    #[test]
    fn ensemble_is_mean_of_sigmoids() {
        let fv = FeatureVector::new("t.v1", vec!["f0".into()], vec![0.3]).unwrap();
        let one = SvmEnsemble { schema_id: "t.v1".into(), n_features: 1, members: vec![constant_member(0.0)] };
        assert_eq!(predict_svm_ensemble(&one, &fv).unwrap(), 0.5);
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let two = SvmEnsemble {
            schema_id: "t.v1".into(),
            n_features: 1,
            members: vec![constant_member(logit(0.2)), constant_member(logit(0.8))],
        };
        assert!((predict_svm_ensemble(&two, &fv).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn face_subsets_cover_each_block_and_everything() {
        let s = face_member_subsets();
        assert_eq!(s.len(), 4);
        assert_eq!(s[3].len(), 105);
        assert!(s[..3].iter().all(|b| b.len() == 35));
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let labels = (0..20).map(|i| (i % 2) as f64).collect();
        let ds = binary(rows, labels);
        let p = SvmParams { max_iter: 1, ..Default::default() };
        let m = train_svm_on(&ds, &[0, 1], &p).unwrap();
        assert!(!m.converged);
    }
}
