//! Principal component analysis for feature reduction.
//!
//! Two reductions are supported. *Indirect*: keep the original features whose
//! absolute loading on one of the first `n` components is at least the
//! column's mean absolute loading plus two (population) standard deviations.
//! *Direct*: learn over quantized component scores `pc1..pck`, then map each
//! component used by a theory back to the features passing the same test.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asp::{Term, Theory};
use crate::dataset::{DatasetError, Quantization};

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("row {row} has {got} values, expected {expected}")]
    Dimension { row: usize, got: usize, expected: usize },
    #[error("the Kaiser rule needs a model fitted on standardized data")]
    NotStandardized,
    #[error("component count {n} is outside 1..={max}")]
    ComponentRange { n: usize, max: usize },
    #[error("theory uses `{feature}`, beyond the first {n} components")]
    PcIndex { feature: String, n: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors
/// as columns (`vectors[i][j]` is entry `i` of vector `j`).
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-12 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (values, vectors)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    /// Per-feature scale; all ones when the model was not standardized.
    pub std: Vec<f64>,
    pub standardized: bool,
    /// `loadings[i][j]`: weight of feature `i` in component `j`.
    pub loadings: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Constant columns whose scale was set to 1.
    #[serde(default)]
    pub constant_features: Vec<String>,
}

impl PcaModel {
    /// Fits on rows of `data`. With `standardize`, the correlation matrix is
    /// decomposed; otherwise the covariance matrix (both with `n - 1`).
    pub fn fit(data: &[Vec<f64>], names: &[String], standardize: bool) -> Result<PcaModel, PcaError> {
        let rows = data.len();
        if rows < 2 {
            return Err(PcaError::TooFewRows(rows));
        }
        let p = names.len();
        for (row, r) in data.iter().enumerate() {
            if r.len() != p {
                return Err(PcaError::Dimension {
                    row,
                    got: r.len(),
                    expected: p,
                });
            }
        }
        let denom = (rows - 1) as f64;
        let mean: Vec<f64> = (0..p)
            .map(|j| data.iter().map(|r| r[j]).sum::<f64>() / rows as f64)
            .collect();
        let mut constant_features = Vec::new();
        let std: Vec<f64> = (0..p)
            .map(|j| {
                if !standardize {
                    return 1.0;
                }
                let var = data.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / denom;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    constant_features.push(names[j].clone());
                    1.0
                }
            })
            .collect();
        let z: Vec<Vec<f64>> = data
            .iter()
            .map(|r| (0..p).map(|j| (r[j] - mean[j]) / std[j]).collect())
            .collect();
        let mut cov = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in i..p {
                let c = z.iter().map(|r| r[i] * r[j]).sum::<f64>() / denom;
                cov[i][j] = c;
                cov[j][i] = c;
            }
        }
        let (eigenvalues, mut loadings) = symmetric_eigen(&cov);
        for j in 0..p {
            let pivot = (0..p)
                .max_by(|&a, &b| loadings[a][j].abs().total_cmp(&loadings[b][j].abs()).then(b.cmp(&a)))
                .unwrap_or(0);
            if loadings[pivot][j] < 0.0 {
                for row in loadings.iter_mut() {
                    row[j] = -row[j];
                }
            }
        }
        let total: f64 = (0..p).map(|i| cov[i][i]).sum();
        let explained_variance_ratio = eigenvalues
            .iter()
            .map(|&l| if total > 0.0 { l.max(0.0) / total } else { 0.0 })
            .collect();
        Ok(PcaModel {
            feature_names: names.to_vec(),
            mean,
            std,
            standardized: standardize,
            loadings,
            eigenvalues,
            explained_variance_ratio,
            constant_features,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.loadings.iter().map(|row| row[j]).collect()
    }

    /// Component scores of one row over the first `k` components.
    pub fn scores(&self, row: &[f64], k: usize) -> Vec<f64> {
        (0..k)
            .map(|j| {
                (0..self.n_features())
                    .map(|i| (row[i] - self.mean[i]) / self.std[i] * self.loadings[i][j])
                    .sum()
            })
            .collect()
    }

    /// Inverse of [`PcaModel::scores`] when all components are used.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        (0..self.n_features())
            .map(|i| {
                let z: f64 = scores.iter().enumerate().map(|(j, s)| s * self.loadings[i][j]).sum();
                self.mean[i] + z * self.std[i]
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PcaModel, PcaError> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PcaError> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    fn check_n(&self, n: usize) -> Result<(), PcaError> {
        let max = self.eigenvalues.len();
        if n == 0 || n > max {
            return Err(PcaError::ComponentRange { n, max });
        }
        Ok(())
    }
}

/// Number of components with eigenvalue at least 1.
pub fn kaiser_select(model: &PcaModel) -> Result<usize, PcaError> {
    if !model.standardized {
        return Err(PcaError::NotStandardized);
    }
    Ok(kaiser_count(&model.eigenvalues))
}

pub fn kaiser_count(eigenvalues: &[f64]) -> usize {
    eigenvalues.iter().filter(|&&l| l >= 1.0).count()
}

/// Mean and population standard deviation of a column's absolute loadings.
pub fn loading_threshold(column: &[f64]) -> (f64, f64) {
    let n = column.len().max(1) as f64;
    let mu = column.iter().map(|w| w.abs()).sum::<f64>() / n;
    let var = column.iter().map(|w| (w.abs() - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}

/// Indices passing `|w| >= mu + 2 sigma` within one column. A tiny relative
/// tolerance keeps exact ties (e.g. a uniform column) selected despite
/// rounding in the mean.
pub fn salient_rows(column: &[f64]) -> Vec<usize> {
    let (mu, sigma) = loading_threshold(column);
    let threshold = mu + 2.0 * sigma;
    let tol = 1e-12 * threshold.abs().max(1e-300);
    column
        .iter()
        .enumerate()
        .filter(|(_, w)| w.abs() >= threshold - tol)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMode {
    Indirect,
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentThreshold {
    pub component: usize,
    pub mean: f64,
    pub std: f64,
    pub kept: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub mode: ReductionMode,
    pub n_components: usize,
    /// Kept original features (indirect) or component names (direct).
    pub kept_features: Vec<String>,
    pub thresholds: Vec<ComponentThreshold>,
}

/// Features selected by any of the first `n` components, in model order.
pub fn indirect_select(model: &PcaModel, n: usize) -> Result<ReductionReport, PcaError> {
    model.check_n(n)?;
    let mut kept = BTreeSet::new();
    let mut thresholds = Vec::with_capacity(n);
    for j in 0..n {
        let column = model.column(j);
        let (mean, std) = loading_threshold(&column);
        let rows = salient_rows(&column);
        kept.extend(rows.iter().copied());
        thresholds.push(ComponentThreshold {
            component: j + 1,
            mean,
            std,
            kept: rows.iter().map(|&i| model.feature_names[i].clone()).collect(),
        });
    }
    Ok(ReductionReport {
        mode: ReductionMode::Indirect,
        n_components: n,
        kept_features: kept.into_iter().map(|i| model.feature_names[i].clone()).collect(),
        thresholds,
    })
}

pub fn pc_names(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("pc{j}")).collect()
}

/// Component scores of `rows` over the first `k` components, quantized to
/// integers with `factor` (shift so each column's minimum is 0).
pub fn project(
    model: &PcaModel,
    rows: &[Vec<f64>],
    k: usize,
    factor: u32,
) -> Result<(Vec<Vec<f64>>, Quantization), PcaError> {
    model.check_n(k)?;
    for (row, r) in rows.iter().enumerate() {
        if r.len() != model.n_features() {
            return Err(PcaError::Dimension {
                row,
                got: r.len(),
                expected: model.n_features(),
            });
        }
    }
    let scores: Vec<Vec<f64>> = rows.iter().map(|r| model.scores(r, k)).collect();
    let q = Quantization::fit(&scores, &vec![false; k], factor)?;
    Ok((q.apply(&scores), q))
}

/// Direct-mode report: components `pc1..pck` and their salient features.
pub fn direct_report(model: &PcaModel, k: usize) -> Result<ReductionReport, PcaError> {
    let mut report = indirect_select(model, k)?;
    report.mode = ReductionMode::Direct;
    report.kept_features = pc_names(k);
    Ok(report)
}

/// Maps each `pcJ` feature used by `theory` to the original features passing
/// the loading threshold on component `J`. Components beyond `n` are errors.
pub fn retro_project(
    theory: &Theory,
    model: &PcaModel,
    n: usize,
) -> Result<BTreeMap<String, Vec<String>>, PcaError> {
    let mut out = BTreeMap::new();
    for wc in theory.constraints() {
        for atom in &wc.body {
            if atom.predicate != "value" {
                continue;
            }
            let Some(Term::Sym(feature)) = atom.args.first() else {
                continue;
            };
            let Some(j) = feature.strip_prefix("pc").and_then(|d| d.parse::<usize>().ok()) else {
                continue;
            };
            if j == 0 || j > n || j > model.eigenvalues.len() {
                return Err(PcaError::PcIndex {
                    feature: feature.clone(),
                    n,
                });
            }
            let features = salient_rows(&model.column(j - 1))
                .into_iter()
                .map(|i| model.feature_names[i].clone())
                .collect();
            out.insert(feature.clone(), features);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asp::parse_theory;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn perfectly_correlated_pair() {
        let data: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let m = PcaModel::fit(&data, &names(2), true).unwrap();
        assert!((m.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(m.eigenvalues[1].abs() < 1e-12);
        assert_eq!(kaiser_select(&m).unwrap(), 1);
    }

    #[test]
    fn isotropic_covariance() {
        let (vals, _) = symmetric_eigen(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn kaiser_threshold_is_inclusive() {
        assert_eq!(kaiser_count(&[2.5, 1.0, 0.3]), 2);
        assert_eq!(kaiser_count(&[0.9, 0.5]), 0);
        let data = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 5.0]];
        let raw = PcaModel::fit(&data, &names(2), false).unwrap();
        assert!(matches!(kaiser_select(&raw), Err(PcaError::NotStandardized)));
    }

    #[test]
    fn threshold_hand_example() {
        let column = [0.9, 0.1, 0.1, 0.1, 0.1];
        let (mu, sigma) = loading_threshold(&column);
        assert!((mu - 0.26).abs() < 1e-12);
        assert!((sigma - 0.32).abs() < 1e-12);
        assert_eq!(salient_rows(&column), vec![0]);
        assert_eq!(salient_rows(&[0.3, -0.3, 0.3]), vec![0, 1, 2]);
    }

    #[test]
    fn too_few_rows_and_ranges() {
        assert!(matches!(
            PcaModel::fit(&[vec![1.0]], &names(1), true),
            Err(PcaError::TooFewRows(1))
        ));
        let data = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 5.0]];
        let m = PcaModel::fit(&data, &names(2), true).unwrap();
        assert!(indirect_select(&m, 0).is_err());
        assert!(indirect_select(&m, 3).is_err());
    }

    #[test]
    fn constant_column_gets_unit_scale() {
        let data = vec![vec![1.0, 4.0], vec![2.0, 4.0], vec![3.0, 4.0]];
        let m = PcaModel::fit(&data, &names(2), true).unwrap();
        assert_eq!(m.constant_features, vec!["x1".to_string()]);
        assert_eq!(m.std[1], 1.0);
    }

    fn model_with_column(column: &[f64]) -> PcaModel {
        let p = column.len();
        PcaModel {
            feature_names: names(p),
            mean: vec![0.0; p],
            std: vec![1.0; p],
            standardized: true,
            loadings: column.iter().map(|&w| vec![w]).collect(),
            eigenvalues: vec![1.0],
            explained_variance_ratio: vec![1.0],
            constant_features: Vec::new(),
        }
    }

    #[test]
    fn retro_projection_of_pc_atoms() {
        let m = model_with_column(&[0.9, 0.1, 0.1, 0.1, 0.1]);
        let t = parse_theory(":~ value(pc1,V1).[V1@1, V1]\n:~ value(pc1,V1).[-V1@2, V1]").unwrap();
        let map = retro_project(&t, &m, 1).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map["pc1"], vec!["x0".to_string()]);
        let plain = parse_theory(":~ value(cost,V1).[V1@1, V1]").unwrap();
        assert!(retro_project(&plain, &m, 1).unwrap().is_empty());
        let beyond = parse_theory(":~ value(pc2,V1).[V1@1, V1]").unwrap();
        assert!(matches!(retro_project(&beyond, &m, 1), Err(PcaError::PcIndex { .. })));
    }

    #[test]
    fn projection_quantizes() {
        let m = model_with_column(&[1.0]);
        let (q, quant) = project(&m, &[vec![0.237], vec![0.0]], 1, 100).unwrap();
        assert_eq!(q, vec![vec![24.0], vec![0.0]]);
        assert_eq!(quant.shifts, vec![Some(0.0)]);
    }
}
