//! Agreement metrics against a black box, ground-truth (GT) theories built
//! from user ratings, and the maximum mean discrepancy diagnostic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asp::{classify_pair, AspError, GroundAtomSet, Term, Theory, WeakConstraint, Weight};
use crate::dataset::Schema;
use crate::label::Label;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("rating {0} outside 1..=10")]
    Rating(i64),
    #[error("{pairs} pairs but {labels} labels")]
    LabelCount { pairs: usize, labels: usize },
    #[error("sample sets need at least two rows each")]
    TooFewRows,
    #[error("rows have {0} and {1} columns")]
    Dimension(usize, usize),
    #[error("bandwidth must be positive")]
    Bandwidth,
    #[error(transparent)]
    Asp(#[from] AspError),
}

/// Agreement of predicted labels with reference labels. Confusion rows are
/// reference classes and columns predicted classes, both ordered (−1, 0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fidelity: f64,
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub confusion: [[usize; 3]; 3],
    pub pairs: usize,
    /// Classes never predicted; their precision counts as 0.
    pub undefined_precision: Vec<Label>,
    /// Classes absent from the reference; their recall counts as 0.
    pub undefined_recall: Vec<Label>,
    pub empty_theory: bool,
}

impl MetricsReport {
    pub fn from_confusion(confusion: [[usize; 3]; 3], empty_theory: bool) -> MetricsReport {
        let pairs: usize = confusion.iter().flatten().sum();
        let hits: usize = (0..3).map(|c| confusion[c][c]).sum();
        let mut precision = [0.0; 3];
        let mut recall = [0.0; 3];
        let mut undefined_precision = Vec::new();
        let mut undefined_recall = Vec::new();
        for c in 0..3 {
            let label = Label::from_index(c).expect("index < 3");
            let predicted: usize = (0..3).map(|r| confusion[r][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            if predicted == 0 {
                undefined_precision.push(label);
            } else {
                precision[c] = confusion[c][c] as f64 / predicted as f64;
            }
            if actual == 0 {
                undefined_recall.push(label);
            } else {
                recall[c] = confusion[c][c] as f64 / actual as f64;
            }
        }
        MetricsReport {
            fidelity: if pairs == 0 { 0.0 } else { hits as f64 / pairs as f64 },
            macro_precision: precision.iter().sum::<f64>() / 3.0,
            macro_recall: recall.iter().sum::<f64>() / 3.0,
            precision,
            recall,
            confusion,
            pairs,
            undefined_precision,
            undefined_recall,
            empty_theory,
        }
    }

    pub fn from_labels(
        predicted: &[Label],
        reference: &[Label],
        empty_theory: bool,
    ) -> Result<MetricsReport, MetricsError> {
        if predicted.len() != reference.len() {
            return Err(MetricsError::LabelCount {
                pairs: predicted.len(),
                labels: reference.len(),
            });
        }
        let mut confusion = [[0; 3]; 3];
        for (p, r) in predicted.iter().zip(reference) {
            confusion[r.index()][p.index()] += 1;
        }
        Ok(MetricsReport::from_confusion(confusion, empty_theory))
    }
}

/// Labels of `theory` on each ordered pair of contexts.
pub fn predict(theory: &Theory, pairs: &[(GroundAtomSet, GroundAtomSet)]) -> Result<Vec<Label>, MetricsError> {
    pairs
        .iter()
        .map(|(a, b)| Ok(classify_pair(theory, a, b)?))
        .collect()
}

/// Agreement of `theory` with the black box's labels.
pub fn fidelity_report(
    theory: &Theory,
    pairs: &[(GroundAtomSet, GroundAtomSet)],
    oracle_labels: &[Label],
) -> Result<MetricsReport, MetricsError> {
    if pairs.len() != oracle_labels.len() {
        return Err(MetricsError::LabelCount {
            pairs: pairs.len(),
            labels: oracle_labels.len(),
        });
    }
    MetricsReport::from_labels(&predict(theory, pairs)?, oracle_labels, theory.is_empty())
}

/// User ratings G(f) in 1..=10, keyed by feature name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtRatings(BTreeMap<String, u8>);

impl GtRatings {
    pub fn new(ratings: BTreeMap<String, u8>) -> Result<GtRatings, MetricsError> {
        if let Some(&bad) = ratings.values().find(|r| !(1..=10).contains(*r)) {
            return Err(MetricsError::Rating(i64::from(bad)));
        }
        Ok(GtRatings(ratings))
    }

    /// Ratings carried by the schema's features.
    pub fn from_schema(schema: &Schema) -> Result<GtRatings, MetricsError> {
        GtRatings::new(
            schema
                .features
                .iter()
                .filter_map(|f| f.gt_rating.map(|r| (f.name.clone(), r)))
                .collect(),
        )
    }

    pub fn get(&self, feature: &str) -> Option<u8> {
        self.0.get(feature).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &u8)> {
        self.0.iter()
    }
}

/// Image of one rating: the centred, sign-flipped rating Ḡ and its level m.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtMapping {
    pub g_bar: i64,
    pub m: i64,
}

impl GtMapping {
    pub fn level(self) -> u32 {
        self.m.unsigned_abs() as u32
    }

    pub fn weight(self) -> Weight {
        if self.m < 0 {
            Weight::MINUS_VAR
        } else {
            Weight::PLUS_VAR
        }
    }
}

/// Ḡ = (G − 5)(−1); m = Ḡ when positive, otherwise Ḡ − 1 so that level 0
/// never occurs.
pub fn gt_map(rating: i64) -> Result<GtMapping, MetricsError> {
    if !(1..=10).contains(&rating) {
        return Err(MetricsError::Rating(rating));
    }
    let g_bar = -(rating - 5);
    let m = if g_bar > 0 { g_bar } else { g_bar - 1 };
    Ok(GtMapping { g_bar, m })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtRecord {
    pub feature: String,
    pub rating: u8,
    pub g_bar: i64,
    pub m: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtTheory {
    pub theory: Theory,
    pub records: Vec<GtRecord>,
    /// Features of the theory without a rating.
    pub unrated: Vec<String>,
}

/// Features named in `value(f, _)` atoms, in first-appearance order.
pub fn value_features(theory: &Theory) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for wc in theory.constraints() {
        for atom in &wc.body {
            if let (true, Some(Term::Sym(f))) = (atom.predicate == "value", atom.args.first()) {
                if seen.insert(f.clone()) {
                    out.push(f.clone());
                }
            }
        }
    }
    out
}

/// One `:~ value(f,V1).[±V1@|m|, V1]` per rated feature of `theory`.
/// Category conditions are dropped; the levels fix the theory's #maxp.
pub fn gt_theory(theory: &Theory, ratings: &GtRatings) -> Result<GtTheory, MetricsError> {
    let mut constraints = Vec::new();
    let mut records = Vec::new();
    let mut unrated = Vec::new();
    for feature in value_features(theory) {
        let Some(rating) = ratings.get(&feature) else {
            unrated.push(feature);
            continue;
        };
        let map = gt_map(i64::from(rating))?;
        constraints.push(WeakConstraint::on_value(&feature, map.weight(), map.level()));
        records.push(GtRecord {
            feature,
            rating,
            g_bar: map.g_bar,
            m: map.m,
        });
    }
    let maxp = constraints.iter().map(|c| c.level).max().unwrap_or(1);
    Ok(GtTheory {
        theory: Theory::new(constraints, maxp)?,
        records,
        unrated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub pairs: usize,
}

/// Scores `theory`'s labels against the GT theory's labels.
pub fn gt_report(
    theory: &Theory,
    gt: &GtTheory,
    pairs: &[(GroundAtomSet, GroundAtomSet)],
) -> Result<GtScores, MetricsError> {
    let reference = predict(&gt.theory, pairs)?;
    let report = MetricsReport::from_labels(&predict(theory, pairs)?, &reference, theory.is_empty())?;
    Ok(GtScores {
        accuracy: report.fidelity,
        precision: report.macro_precision,
        recall: report.macro_recall,
        pairs: report.pairs,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn check_sets(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(), MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::TooFewRows);
    }
    let dim = a[0].len();
    if let Some(row) = a.iter().chain(b).find(|r| r.len() != dim) {
        return Err(MetricsError::Dimension(dim, row.len()));
    }
    Ok(())
}

/// Median Euclidean distance over all distinct pairs of the pooled rows;
/// falls back to 1 when that median is 0.
pub fn median_bandwidth(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, MetricsError> {
    check_sets(a, b)?;
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let mut d = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            d.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let median = if n % 2 == 1 {
        d[n / 2]
    } else {
        (d[n / 2 - 1] + d[n / 2]) / 2.0
    };
    Ok(if median > 0.0 { median } else { 1.0 })
}

/// Unbiased squared MMD with a Gaussian kernel, clamped at 0.
pub fn mmd(a: &[Vec<f64>], b: &[Vec<f64>], bandwidth: f64) -> Result<f64, MetricsError> {
    check_sets(a, b)?;
    if bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(MetricsError::Bandwidth);
    }
    let k = |x: &[f64], y: &[f64]| (-sq_dist(x, y) / (2.0 * bandwidth * bandwidth)).exp();
    let within = |s: &[Vec<f64>]| {
        let mut total = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                total += 2.0 * k(&s[i], &s[j]);
            }
        }
        total / (s.len() * (s.len() - 1)) as f64
    };
    let mut cross = 0.0;
    for x in a {
        for y in b {
            cross += k(x, y);
        }
    }
    cross /= (a.len() * b.len()) as f64;
    Ok((within(a) + within(b) - 2.0 * cross).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asp::{parse_theory, render_theory};
    use crate::dataset::context_from_values;

    fn browning_pair() -> (GroundAtomSet, GroundAtomSet) {
        (
            context_from_values(&["browning"], &[3.0]).unwrap(),
            context_from_values(&["browning"], &[1.0]).unwrap(),
        )
    }

    #[test]
    fn gt_map_examples() {
        assert_eq!(gt_map(3).unwrap(), GtMapping { g_bar: 2, m: 2 });
        let seven = gt_map(7).unwrap();
        assert_eq!((seven.g_bar, seven.m, seven.level()), (-2, -3, 3));
        assert_eq!(seven.weight(), Weight::MINUS_VAR);
        let five = gt_map(5).unwrap();
        assert_eq!((five.m, five.level(), five.weight()), (-1, 1, Weight::MINUS_VAR));
        assert!(gt_map(0).is_err() && gt_map(11).is_err());
    }

    #[test]
    fn gt_map_is_antitone() {
        for r in 1..10 {
            let (a, b) = (gt_map(r).unwrap(), gt_map(r + 1).unwrap());
            assert!(b.m < a.m);
        }
    }

    #[test]
    fn browning_worked_examples() {
        let t = parse_theory(":~ value(browning,V1).[V1@1, V1]").unwrap();
        let pair = [browning_pair()];
        let three = GtRatings::new([("browning".to_string(), 3)].into()).unwrap();
        let gt = gt_theory(&t, &three).unwrap();
        assert_eq!(render_theory(&gt.theory), ":~ value(browning,V1).[V1@2, V1]\n");
        assert_eq!(gt.theory.maxp(), 2);
        assert_eq!(gt_report(&t, &gt, &pair).unwrap().accuracy, 1.0);

        let seven = GtRatings::new([("browning".to_string(), 7)].into()).unwrap();
        let gt = gt_theory(&t, &seven).unwrap();
        assert_eq!(gt.records[0].m, -3);
        assert_eq!(gt.theory.constraints()[0].weight, Weight::MINUS_VAR);
        assert_eq!(gt_report(&t, &gt, &pair).unwrap().accuracy, 0.0);
    }

    #[test]
    fn gt_theory_dedups_and_skips() {
        let t = parse_theory(
            ":~ value(browning,V1).[V1@1, V1]\n:~ value(browning,V1), category(2).[-V1@2, V1]\n:~ value(cost,V1).[V1@1, V1]",
        )
        .unwrap();
        let r = GtRatings::new([("browning".to_string(), 2)].into()).unwrap();
        let gt = gt_theory(&t, &r).unwrap();
        assert_eq!(gt.theory.len(), 1);
        assert_eq!(gt.unrated, vec!["cost".to_string()]);
        assert!(gt_theory(&Theory::empty(1), &r).unwrap().theory.is_empty());
    }

    #[test]
    fn fidelity_examples() {
        let all_tie = Theory::empty(1);
        let ctx = GroundAtomSet::new([]).unwrap();
        let pairs = vec![(ctx.clone(), ctx); 4];
        let labels = [Label::First, Label::Uncertain, Label::Second, Label::Uncertain];
        let r = fidelity_report(&all_tie, &pairs, &labels).unwrap();
        assert_eq!(r.fidelity, 0.5);
        assert!(r.empty_theory);
        assert_eq!(r.undefined_precision, vec![Label::Second, Label::First]);

        let diag = MetricsReport::from_confusion([[3, 1, 0], [0, 2, 1], [2, 0, 1]], false);
        assert_eq!(diag.pairs, 10);
        assert!((diag.fidelity - 0.6).abs() < 1e-15);
        assert_eq!(diag.confusion[0].iter().sum::<usize>(), 4);
    }

    #[test]
    fn diagonal_macro_equals_per_class() {
        let r = MetricsReport::from_confusion([[2, 0, 0], [0, 5, 0], [0, 0, 1]], false);
        assert_eq!((r.macro_precision, r.macro_recall, r.fidelity), (1.0, 1.0, 1.0));
    }

    fn reference_mmd(a: &[Vec<f64>], b: &[Vec<f64>], h: f64) -> f64 {
        // Full kernel matrix with the diagonal blocks' diagonals removed.
        let all: Vec<&Vec<f64>> = a.iter().chain(b).collect();
        let (m, n) = (a.len(), b.len());
        let mut kxx = 0.0;
        let mut kyy = 0.0;
        let mut kxy = 0.0;
        for (i, x) in all.iter().enumerate() {
            for (j, y) in all.iter().enumerate() {
                let d2: f64 = x.iter().zip(y.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
                let v = (-d2 / (2.0 * h * h)).exp();
                match (i < m, j < m) {
                    (true, true) if i != j => kxx += v,
                    (false, false) if i != j => kyy += v,
                    (true, false) => kxy += v,
                    _ => {}
                }
            }
        }
        kxx / (m * (m - 1)) as f64 + kyy / (n * (n - 1)) as f64 - 2.0 * kxy / (m * n) as f64
    }

    #[test]
    fn mmd_properties() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut cloud = |shift: f64, n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| vec![normal.sample(&mut rng) + shift, normal.sample(&mut rng)])
                .collect()
        };
        let a = cloud(0.0, 40);
        let b = cloud(10.0, 50);
        assert!(mmd(&a, &a, 1.0).unwrap() <= 1e-6);
        let ab = mmd(&a, &b, 1.0).unwrap();
        assert!((ab - mmd(&b, &a, 1.0).unwrap()).abs() < 1e-12);
        let reference = reference_mmd(&a, &b, 1.0);
        assert!((ab - reference).abs() <= 0.05 * reference);
        assert!(median_bandwidth(&a, &b).unwrap() > 1.0);
        assert!(matches!(mmd(&a, &[vec![0.0], vec![1.0]], 1.0), Err(MetricsError::Dimension(2, 1))));
        assert!(matches!(mmd(&a, &b, 0.0), Err(MetricsError::Bandwidth)));
    }
}
