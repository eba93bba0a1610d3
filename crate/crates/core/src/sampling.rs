//! Training pairs for global and local approximation.
//!
//! Global runs draw ordered pairs of distinct pool items (or synthetic items
//! drawn from the schema domains). Local runs perturb one query pair with
//! Gaussian noise, quantize the neighbourhood to integers and weight each
//! perturbed pair by its distance to the query.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Domain, FeatureSpec, Item, PairSample, Quantization, Schema};

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("{requested} pairs requested but only {available} distinct ordered pairs exist")]
    NotEnoughPairs { requested: usize, available: usize },
    #[error("the item pool needs at least 2 items")]
    PoolTooSmall,
    #[error("pair sizes must be at least 1")]
    EmptyRequest,
    #[error("sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("vectors have {got} values, expected {expected}")]
    Dimension { got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalMode {
    #[default]
    ItemPool,
    SyntheticFeatures,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalSampleConfig {
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub mode: GlobalMode,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalSample {
    pub train: Vec<PairSample>,
    pub test: Vec<PairSample>,
    /// Items drawn in synthetic mode; empty in item-pool mode.
    pub items: Vec<Item>,
}

/// Draws `n_train + n_test` pairs without replacement; labels are left empty.
pub fn sample_global(pool: &[Item], schema: &Schema, config: &GlobalSampleConfig) -> Result<GlobalSample, SamplingError> {
    let wanted = config.n_train + config.n_test;
    if config.n_train == 0 {
        return Err(SamplingError::EmptyRequest);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.mode {
        GlobalMode::ItemPool => {
            let m = pool.len();
            if m < 2 {
                return Err(SamplingError::PoolTooSmall);
            }
            let available = m * (m - 1);
            if wanted > available {
                return Err(SamplingError::NotEnoughPairs {
                    requested: wanted,
                    available,
                });
            }
            let pairs: Vec<PairSample> = index::sample(&mut rng, available, wanted)
                .into_iter()
                .map(|k| {
                    let a = k / (m - 1);
                    let mut b = k % (m - 1);
                    if b >= a {
                        b += 1;
                    }
                    PairSample::new(pool[a].id, pool[b].id).expect("distinct positions")
                })
                .collect();
            let (train, test) = pairs.split_at(config.n_train);
            Ok(GlobalSample {
                train: train.to_vec(),
                test: test.to_vec(),
                items: Vec::new(),
            })
        }
        GlobalMode::SyntheticFeatures => {
            let items: Vec<Item> = (0..2 * wanted)
                .map(|i| {
                    let values: Vec<f64> = schema
                        .features
                        .iter()
                        .map(|f| draw_uniform(f, pool, &mut rng))
                        .collect();
                    Item::from_vector(i as u32, &format!("synthetic{i}"), schema, &values)
                })
                .collect();
            let pairs: Vec<PairSample> = (0..wanted)
                .map(|i| PairSample::new(2 * i as u32, 2 * i as u32 + 1).expect("distinct ids"))
                .collect();
            let (train, test) = pairs.split_at(config.n_train);
            Ok(GlobalSample {
                train: train.to_vec(),
                test: test.to_vec(),
                items,
            })
        }
    }
}

fn draw_uniform(f: &FeatureSpec, pool: &[Item], rng: &mut impl Rng) -> f64 {
    match &f.domain {
        Domain::Categories(cs) => cs[rng.random_range(0..cs.len())] as f64,
        Domain::Range { lo, hi } => {
            // Unbounded ranges borrow their upper end from the pool.
            let hi = hi.unwrap_or_else(|| {
                pool.iter()
                    .filter_map(|i| i.get(&f.name))
                    .fold(*lo + 1.0, f64::max)
            });
            if f.kind == crate::dataset::FeatureKind::Ordinal {
                rng.random_range(lo.ceil() as i64..=hi.floor() as i64) as f64
            } else if hi > *lo {
                rng.random_range(*lo..=hi)
            } else {
                *lo
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    #[default]
    Distance,
    InverseDistance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSampleConfig {
    pub n_queries: usize,
    pub m: usize,
    pub sigma: f64,
    /// Quantization factor; `None` means `round(1/sigma)` capped to
    /// `1..=MAX_FACTOR`.
    #[serde(default)]
    pub factor: Option<u32>,
    #[serde(default)]
    pub categorical_resample_prob: f64,
    #[serde(default)]
    pub penalty_mode: PenaltyMode,
    pub seed: u64,
}

pub const MAX_FACTOR: u32 = 1000;

impl LocalSampleConfig {
    pub fn factor(&self) -> u32 {
        self.factor
            .unwrap_or_else(|| (1.0 / self.sigma).round().clamp(1.0, f64::from(MAX_FACTOR)) as u32)
    }
}

/// A query pair given by the feature vectors of its two items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryPair {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbourhood {
    /// The quantized query, kept out of the training pairs.
    pub query: QueryPair,
    /// Quantized perturbed pairs.
    pub samples: Vec<QueryPair>,
    /// The perturbed pairs before quantization.
    pub raw_samples: Vec<QueryPair>,
    pub quantization: Quantization,
}

/// `m` noisy copies of `query`, quantized together with the query.
///
/// Each query index gets its own random stream derived from `config.seed`,
/// so neighbourhoods can be drawn in any order.
pub fn perturb_local(
    query: &QueryPair,
    features: &[FeatureSpec],
    config: &LocalSampleConfig,
    query_index: u64,
) -> Result<Neighbourhood, SamplingError> {
    if config.sigma.is_nan() || config.sigma <= 0.0 {
        return Err(SamplingError::Sigma(config.sigma));
    }
    for v in [&query.first, &query.second] {
        if v.len() != features.len() {
            return Err(SamplingError::Dimension {
                got: v.len(),
                expected: features.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(query_index);
    let noise = Normal::new(0.0, config.sigma).map_err(|_| SamplingError::Sigma(config.sigma))?;
    let perturb = |v: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        v.iter()
            .zip(features)
            .map(|(&x, f)| match &f.domain {
                Domain::Categories(cs) => {
                    if config.categorical_resample_prob > 0.0
                        && rng.random::<f64>() < config.categorical_resample_prob
                    {
                        cs[rng.random_range(0..cs.len())] as f64
                    } else {
                        x
                    }
                }
                Domain::Range { .. } => x + noise.sample(rng),
            })
            .collect()
    };
    let raw: Vec<QueryPair> = (0..config.m)
        .map(|_| QueryPair {
            first: perturb(&query.first, &mut rng),
            second: perturb(&query.second, &mut rng),
        })
        .collect();

    let categorical: Vec<bool> = features.iter().map(FeatureSpec::is_categorical).collect();
    let mut rows = vec![query.first.clone(), query.second.clone()];
    for p in &raw {
        rows.push(p.first.clone());
        rows.push(p.second.clone());
    }
    let quantization = Quantization::fit(&rows, &categorical, config.factor()).expect("factor >= 1");
    let q = |p: &QueryPair| QueryPair {
        first: quantization.apply_row(&p.first),
        second: quantization.apply_row(&p.second),
    };
    Ok(Neighbourhood {
        query: q(query),
        samples: raw.iter().map(q).collect(),
        raw_samples: raw,
        quantization,
    })
}

/// Categorical mismatches count as this distance.
pub const CATEGORICAL_DISTANCE: f64 = 3.0;

/// Sum over the two items of the Euclidean distance between query and sample,
/// with categorical features contributing 0 or 3.
pub fn pi_distance(query: &QueryPair, sample: &QueryPair, categorical: &[bool]) -> Result<f64, SamplingError> {
    let item = |a: &[f64], b: &[f64]| -> Result<f64, SamplingError> {
        for v in [a, b] {
            if v.len() != categorical.len() {
                return Err(SamplingError::Dimension {
                    got: v.len(),
                    expected: categorical.len(),
                });
            }
        }
        Ok(a.iter()
            .zip(b)
            .zip(categorical)
            .map(|((x, y), &cat)| {
                let d = if cat {
                    if x == y {
                        0.0
                    } else {
                        CATEGORICAL_DISTANCE
                    }
                } else {
                    x - y
                };
                d * d
            })
            .sum::<f64>()
            .sqrt())
    };
    Ok(item(&query.first, &sample.first)? + item(&query.second, &sample.second)?)
}

/// Numerator of the inverse-distance penalty.
pub const INVERSE_DISTANCE_SCALE: f64 = 10.0;

pub fn penalty_for(distance: f64, mode: PenaltyMode) -> u32 {
    let raw = match mode {
        PenaltyMode::Distance => distance.round(),
        PenaltyMode::InverseDistance => (INVERSE_DISTANCE_SCALE / (1.0 + distance)).round(),
    };
    raw.clamp(1.0, f64::from(u32::MAX)) as u32
}

pub fn local_penalties(
    query: &QueryPair,
    samples: &[QueryPair],
    categorical: &[bool],
    mode: PenaltyMode,
) -> Result<Vec<u32>, SamplingError> {
    samples
        .iter()
        .map(|s| Ok(penalty_for(pi_distance(query, s, categorical)?, mode)))
        .collect()
}
