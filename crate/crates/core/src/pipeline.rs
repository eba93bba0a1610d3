//! Experiment orchestration: global, local and classifier runs, run
//! manifests, and result tables with deltas against a baseline.
//!
//! Runs take in-memory inputs; loading files is left to the caller.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asp::{gloss_theory, parse_facts, parse_theory, render_facts, render_theory, AspError, GroundAtomSet, Theory};
use crate::dataset::{context_from_values, DatasetError, Domain, Item, PairSample, Quantization, Schema, UserPairs};
use crate::label::Label;
use crate::learner::{
    expand_mode_bias, learn, LearnBudget, LearnError, ModeBias, OrderSymbol, OrderingExample, Strategy, WeightForm,
};
use crate::metrics::{fidelity_report, gt_report, gt_theory, GtRatings, GtScores, MetricsError, MetricsReport};
use crate::oracle::{Oracle, OracleError, OracleSpec, PairInput};
use crate::pca::{indirect_select, pc_names, retro_project, PcaError, PcaModel, ReductionReport};
use crate::sampling::{
    local_penalties, perturb_local, sample_global, GlobalMode, GlobalSampleConfig, LocalSampleConfig, PenaltyMode,
    QueryPair, SamplingError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown item id {0}")]
    UnknownItem(u32),
    #[error("no labeled pairs for user `{0}`")]
    NoPairs(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Asp(#[from] AspError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Global,
    Local,
    Classifier,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PcaMode {
    #[default]
    None,
    /// Keep features salient on the first `n` components.
    Indirect { n: usize },
    /// Learn over `k` quantized component scores; explain through the
    /// salient features of the first `retro_n` components.
    Direct { k: usize, factor: u32, retro_n: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasConfig {
    #[serde(default = "default_maxp")]
    pub maxp: u32,
    #[serde(default = "default_forms")]
    pub weight_forms: Vec<WeightForm>,
    /// Adds constraints conditioned on the `category` feature.
    #[serde(default)]
    pub category_conditions: bool,
}

fn default_maxp() -> u32 {
    5
}

fn default_forms() -> Vec<WeightForm> {
    WeightForm::ALL.to_vec()
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig {
            maxp: default_maxp(),
            weight_forms: default_forms(),
            category_conditions: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    #[serde(default)]
    pub max_constraints: Option<usize>,
    #[serde(default)]
    pub time_limit_s: Option<f64>,
    #[serde(default)]
    pub beam_width: Option<usize>,
}

impl LearnerConfig {
    pub fn budget(&self) -> LearnBudget {
        LearnBudget {
            max_constraints: self.max_constraints,
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            beam_width: self.beam_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalConfig {
    /// Training pairs N.
    pub n_train: usize,
    /// Test pairs K.
    pub n_test: usize,
    #[serde(default)]
    pub sampling: GlobalMode,
    /// Quantization factor for item features.
    #[serde(default = "one")]
    pub factor: u32,
}

fn one() -> u32 {
    1
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            n_train: 45,
            n_test: 105,
            sampling: GlobalMode::ItemPool,
            factor: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    pub n_queries: usize,
    /// Perturbed samples per query M.
    pub m: usize,
    pub sigma: f64,
    #[serde(default)]
    pub factor: Option<u32>,
    #[serde(default)]
    pub categorical_resample_prob: f64,
    #[serde(default)]
    pub penalty_mode: PenaltyMode,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig {
            n_queries: 20,
            m: 45,
            sigma: 0.1,
            factor: None,
            categorical_resample_prob: 0.0,
            penalty_mode: PenaltyMode::Distance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub n_train: usize,
    /// User whose pairs are used; `None` takes the first user.
    #[serde(default)]
    pub user: Option<String>,
    #[serde(default = "one")]
    pub factor: u32,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            n_train: 157,
            user: None,
            factor: 1,
        }
    }
}

/// Everything that determines a run. File paths are only recorded here;
/// the caller loads them into [`Inputs`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    #[serde(default)]
    pub schema: Option<String>,
    #[serde(default)]
    pub items: Option<String>,
    #[serde(default)]
    pub pairs: Option<String>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub pca: PcaMode,
    /// PCA on the correlation matrix rather than the covariance.
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default)]
    pub bias: BiasConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub global: GlobalConfig,
    #[serde(default)]
    pub local: LocalConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(mode: RunMode, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            schema: None,
            items: None,
            pairs: None,
            oracle: None,
            pca: PcaMode::None,
            standardize: true,
            bias: BiasConfig::default(),
            learner: LearnerConfig::default(),
            global: GlobalConfig::default(),
            local: LocalConfig::default(),
            classifier: ClassifierConfig::default(),
            seed,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.bias.maxp == 0 {
            return bad("maxp must be at least 1");
        }
        if self.bias.weight_forms.is_empty() {
            return bad("at least one weight form is needed");
        }
        match self.pca {
            PcaMode::Indirect { n: 0 } => return bad("indirect PCA needs n >= 1"),
            PcaMode::Direct { k, factor, retro_n } if k == 0 || factor == 0 || retro_n == 0 => {
                return bad("direct PCA needs k, factor and retro_n >= 1")
            }
            _ => {}
        }
        if self.global.factor == 0 || self.classifier.factor == 0 || self.local.factor == Some(0) {
            return bad("quantization factors must be >= 1");
        }
        Ok(())
    }
}

/// Data a run works on.
pub struct Inputs<'a> {
    pub schema: &'a Schema,
    pub items: &'a [Item],
    /// Labeled pairs per user (classifier mode).
    pub pairs: Option<&'a UserPairs>,
    /// The black box (global and local modes).
    pub oracle: Option<&'a dyn Oracle>,
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub sample: f64,
    pub label: f64,
    pub pca: f64,
    pub learn: f64,
    pub evaluate: f64,
    pub total: f64,
}

/// Seconds since creation; always 0 where no clock is available.
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    #[allow(clippy::new_without_default)]
    pub fn new() -> Stopwatch {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(rename = "Run")]
    pub name: String,
    #[serde(rename = "Fidelity")]
    pub fidelity: f64,
    #[serde(rename = "Precision_BB")]
    pub precision_bb: f64,
    #[serde(rename = "Recall_BB")]
    pub recall_bb: f64,
    #[serde(rename = "Time(s)")]
    pub time_s: f64,
    #[serde(rename = "#WC")]
    pub n_wc: f64,
    #[serde(rename = "accuracy_GT")]
    pub accuracy_gt: Option<f64>,
    #[serde(rename = "precision_GT")]
    pub precision_gt: Option<f64>,
    #[serde(rename = "recall_GT")]
    pub recall_gt: Option<f64>,
}

/// A test pair as stored in a manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub first: String,
    pub second: String,
    /// Reference label: the black box's, or the user's in classifier mode.
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config: ExperimentConfig,
    /// Index of the query in local mode.
    #[serde(default)]
    pub query: Option<usize>,
    pub features: Vec<String>,
    #[serde(default)]
    pub reduction: Option<ReductionReport>,
    pub theory: String,
    pub gloss: Vec<String>,
    /// Original features behind each component used (direct PCA).
    #[serde(default)]
    pub retro_projection: BTreeMap<String, Vec<String>>,
    pub objective: u64,
    pub optimal: bool,
    pub strategy: Strategy,
    pub nodes: u64,
    pub train_examples: usize,
    pub test_pairs: Vec<EvalPair>,
    pub metrics: MetricsReport,
    #[serde(default)]
    pub gt: Option<GtScores>,
    pub row: MetricsRow,
    pub timings: Timings,
    pub empty_theory: bool,
    pub timed_out: bool,
}

impl RunManifest {
    pub fn theory(&self) -> Result<Theory, PipelineError> {
        Ok(parse_theory(&self.theory)?.with_maxp(self.config.bias.maxp)?)
    }

    /// Recomputes the metrics from the stored theory and test pairs.
    pub fn recompute(&self) -> Result<MetricsReport, PipelineError> {
        let theory = self.theory()?;
        let mut pairs = Vec::with_capacity(self.test_pairs.len());
        let mut labels = Vec::with_capacity(self.test_pairs.len());
        for p in &self.test_pairs {
            pairs.push((parse_facts(&p.first)?, parse_facts(&p.second)?));
            labels.push(p.label);
        }
        Ok(fidelity_report(&theory, &pairs, &labels)?)
    }
}

/// Maps raw feature vectors (schema order) to integer contexts.
#[derive(Clone, Debug)]
pub struct Featurizer {
    pub names: Vec<String>,
    pub categorical: Vec<bool>,
    columns: Vec<usize>,
    pca: Option<(PcaModel, usize)>,
    quantization: Quantization,
    pub reduction: Option<ReductionReport>,
}

impl Featurizer {
    /// Fits PCA (if any) on `pool` and the quantization on `fit_rows`.
    pub fn fit(
        schema: &Schema,
        pool: &[Vec<f64>],
        fit_rows: &[Vec<f64>],
        pca: PcaMode,
        standardize: bool,
        factor: u32,
    ) -> Result<Featurizer, PipelineError> {
        let all: Vec<usize> = (0..schema.features.len()).collect();
        let names = schema.names();
        let mask = schema.categorical_mask();
        let (columns, pca_model, reduction) = match pca {
            PcaMode::None => (all, None, None),
            PcaMode::Indirect { n } => {
                let model = fit_pca(schema, pool, standardize)?;
                let report = indirect_select(&model, n)?;
                let cols = all
                    .into_iter()
                    .filter(|&j| report.kept_features.iter().any(|f| f == names[j]))
                    .collect();
                (cols, None, Some(report))
            }
            PcaMode::Direct { k, .. } => {
                let model = fit_pca(schema, pool, standardize)?;
                let report = crate::pca::direct_report(&model, k)?;
                (Vec::new(), Some((model, k)), Some(report))
            }
        };
        let (names, categorical) = match &pca_model {
            Some((_, k)) => (pc_names(*k), vec![false; *k]),
            None => (
                columns.iter().map(|&j| names[j].to_string()).collect(),
                columns.iter().map(|&j| mask[j]).collect(),
            ),
        };
        let mut f = Featurizer {
            names,
            categorical,
            columns,
            pca: pca_model,
            quantization: Quantization {
                factor,
                shifts: Vec::new(),
            },
            reduction,
        };
        let reduced: Vec<Vec<f64>> = fit_rows.iter().map(|r| f.reduce(r)).collect();
        f.quantization = Quantization::fit(&reduced, &f.categorical, factor)?;
        Ok(f)
    }

    fn reduce(&self, raw: &[f64]) -> Vec<f64> {
        match &self.pca {
            Some((model, k)) => model.scores(raw, *k),
            None => self.columns.iter().map(|&j| raw[j]).collect(),
        }
    }

    /// Integer feature vector of a raw row.
    pub fn row(&self, raw: &[f64]) -> Vec<f64> {
        self.quantization.apply_row(&self.reduce(raw))
    }

    pub fn context(&self, raw: &[f64]) -> Result<GroundAtomSet, PipelineError> {
        let names: Vec<&str> = self.names.iter().map(String::as_str).collect();
        Ok(context_from_values(&names, &self.row(raw))?)
    }

    pub fn pca_model(&self) -> Option<&PcaModel> {
        self.pca.as_ref().map(|(m, _)| m)
    }
}

fn fit_pca(schema: &Schema, pool: &[Vec<f64>], standardize: bool) -> Result<PcaModel, PipelineError> {
    let names: Vec<String> = schema.names().iter().map(|s| s.to_string()).collect();
    Ok(PcaModel::fit(pool, &names, standardize)?)
}

/// The mode bias over the featurizer's non-categorical features.
pub fn bias_for(featurizer: &Featurizer, schema: &Schema, config: &BiasConfig) -> ModeBias {
    let value_features: Vec<String> = featurizer
        .names
        .iter()
        .zip(&featurizer.categorical)
        .filter(|(_, &cat)| !cat)
        .map(|(n, _)| n.clone())
        .collect();
    let category_constants = match schema.index_of("category").map(|j| &schema.features[j].domain) {
        Some(Domain::Categories(cs)) if config.category_conditions && featurizer.names.iter().any(|n| n == "category") => {
            cs.clone()
        }
        _ => Vec::new(),
    };
    ModeBias {
        value_features,
        allow_category_condition: !category_constants.is_empty(),
        category_constants,
        weight_forms: config.weight_forms.clone(),
        maxp: config.maxp,
        allow_category_only: false,
    }
}

fn item_index(items: &[Item]) -> BTreeMap<u32, &Item> {
    items.iter().map(|i| (i.id, i)).collect()
}

fn lookup<'a>(index: &BTreeMap<u32, &'a Item>, id: u32) -> Result<&'a Item, PipelineError> {
    index.get(&id).copied().ok_or(PipelineError::UnknownItem(id))
}

/// Oracle labels for `pairs` of items known to `index`.
pub fn label_pairs(
    oracle: &dyn Oracle,
    pairs: &[PairSample],
    index: &BTreeMap<u32, &Item>,
    schema: &Schema,
) -> Result<Vec<PairSample>, PipelineError> {
    pairs
        .iter()
        .map(|p| {
            let a = lookup(index, p.first)?.vector(schema);
            let b = lookup(index, p.second)?.vector(schema);
            let label = oracle.label(&PairInput {
                ids: Some((p.first, p.second)),
                first: &a,
                second: &b,
            })?;
            Ok(p.with_label(label))
        })
        .collect()
}

fn need_oracle<'a>(inputs: &Inputs<'a>) -> Result<&'a dyn Oracle, PipelineError> {
    inputs
        .oracle
        .ok_or_else(|| PipelineError::Config("this mode needs an oracle".into()))
}

struct Learned {
    theory: Theory,
    objective: u64,
    optimal: bool,
    timed_out: bool,
    strategy: Strategy,
    nodes: u64,
}

fn learn_examples(bias: &ModeBias, examples: &[OrderingExample], config: &LearnerConfig) -> Result<Learned, PipelineError> {
    let space = expand_mode_bias(bias);
    let out = learn(&space, examples, &config.budget())?;
    Ok(Learned {
        theory: out.theory,
        objective: out.objective,
        optimal: out.optimal,
        timed_out: out.timed_out,
        strategy: out.strategy,
        nodes: out.nodes,
    })
}

struct Evaluation {
    metrics: MetricsReport,
    gt: Option<GtScores>,
    test_pairs: Vec<EvalPair>,
}

fn evaluate(
    theory: &Theory,
    pairs: Vec<(GroundAtomSet, GroundAtomSet)>,
    labels: Vec<Label>,
    ratings: &GtRatings,
) -> Result<Evaluation, PipelineError> {
    let metrics = fidelity_report(theory, &pairs, &labels)?;
    let gt_t = gt_theory(theory, ratings)?;
    let gt = if gt_t.theory.is_empty() {
        None
    } else {
        Some(gt_report(theory, &gt_t, &pairs)?)
    };
    let test_pairs = pairs
        .iter()
        .zip(labels)
        .map(|((a, b), label)| EvalPair {
            first: render_facts(a),
            second: render_facts(b),
            label,
        })
        .collect();
    Ok(Evaluation { metrics, gt, test_pairs })
}

#[allow(clippy::too_many_arguments)]
fn manifest(
    name: String,
    config: &ExperimentConfig,
    query: Option<usize>,
    featurizer: &Featurizer,
    learned: Learned,
    train_examples: usize,
    eval: Evaluation,
    retro_projection: BTreeMap<String, Vec<String>>,
    timings: Timings,
) -> RunManifest {
    let row = MetricsRow {
        name: name.clone(),
        fidelity: eval.metrics.fidelity,
        precision_bb: eval.metrics.macro_precision,
        recall_bb: eval.metrics.macro_recall,
        time_s: timings.learn,
        n_wc: learned.theory.len() as f64,
        accuracy_gt: eval.gt.as_ref().map(|g| g.accuracy),
        precision_gt: eval.gt.as_ref().map(|g| g.precision),
        recall_gt: eval.gt.as_ref().map(|g| g.recall),
    };
    RunManifest {
        name,
        config: config.clone(),
        query,
        features: featurizer.names.clone(),
        reduction: featurizer.reduction.clone(),
        theory: render_theory(&learned.theory),
        gloss: gloss_theory(&learned.theory),
        retro_projection,
        objective: learned.objective,
        optimal: learned.optimal,
        strategy: learned.strategy,
        nodes: learned.nodes,
        train_examples,
        test_pairs: eval.test_pairs,
        empty_theory: learned.theory.is_empty(),
        timed_out: learned.timed_out,
        metrics: eval.metrics,
        gt: eval.gt,
        row,
        timings,
    }
}

fn retro(config: &ExperimentConfig, featurizer: &Featurizer, theory: &Theory) -> Result<BTreeMap<String, Vec<String>>, PipelineError> {
    match (config.pca, featurizer.pca_model()) {
        (PcaMode::Direct { retro_n, k, .. }, Some(model)) => Ok(retro_project(theory, model, retro_n.max(k))?),
        _ => Ok(BTreeMap::new()),
    }
}

/// Global approximation: sample N training and K test pairs, label them with
/// the black box, learn with unit penalties, and score on the test pairs.
pub fn run_global(config: &ExperimentConfig, inputs: &Inputs<'_>) -> Result<RunManifest, PipelineError> {
    config.validate()?;
    let oracle = need_oracle(inputs)?;
    let schema = inputs.schema;
    let total = Stopwatch::new();
    let mut timings = Timings::default();

    let clock = Stopwatch::new();
    let sample = sample_global(
        inputs.items,
        schema,
        &GlobalSampleConfig {
            n_train: config.global.n_train,
            n_test: config.global.n_test,
            mode: config.global.sampling,
            seed: config.seed,
        },
    )?;
    let items: &[Item] = if sample.items.is_empty() { inputs.items } else { &sample.items };
    let index = item_index(items);
    timings.sample = clock.seconds();

    let clock = Stopwatch::new();
    let train = label_pairs(oracle, &sample.train, &index, schema)?;
    let test = label_pairs(oracle, &sample.test, &index, schema)?;
    timings.label = clock.seconds();

    let clock = Stopwatch::new();
    let rows: Vec<Vec<f64>> = items.iter().map(|i| i.vector(schema)).collect();
    let featurizer = Featurizer::fit(schema, &rows, &rows, config.pca, config.standardize, global_factor(config))?;
    let contexts: BTreeMap<u32, GroundAtomSet> = items
        .iter()
        .map(|i| Ok((i.id, featurizer.context(&i.vector(schema))?)))
        .collect::<Result<_, PipelineError>>()?;
    timings.pca = clock.seconds();

    let clock = Stopwatch::new();
    let bias = bias_for(&featurizer, schema, &config.bias);
    let examples = crate::learner::orderings_from_labels(&train, &contexts, &vec![1; train.len()])?;
    let learned = learn_examples(&bias, &examples, &config.learner)?;
    timings.learn = clock.seconds();

    let clock = Stopwatch::new();
    let (pairs, labels) = context_pairs(&test, &contexts)?;
    let eval = evaluate(&learned.theory, pairs, labels, &GtRatings::from_schema(schema)?)?;
    let retro_projection = retro(config, &featurizer, &learned.theory)?;
    timings.evaluate = clock.seconds();
    timings.total = total.seconds();

    Ok(manifest(
        "global".into(),
        config,
        None,
        &featurizer,
        learned,
        examples.len(),
        eval,
        retro_projection,
        timings,
    ))
}

fn global_factor(config: &ExperimentConfig) -> u32 {
    match config.pca {
        PcaMode::Direct { factor, .. } => factor,
        _ => config.global.factor,
    }
}

fn context_pairs(
    pairs: &[PairSample],
    contexts: &BTreeMap<u32, GroundAtomSet>,
) -> Result<(Vec<(GroundAtomSet, GroundAtomSet)>, Vec<Label>), PipelineError> {
    let ctx = |id: u32| contexts.get(&id).cloned().ok_or(PipelineError::UnknownItem(id));
    let mut out = Vec::with_capacity(pairs.len());
    let mut labels = Vec::with_capacity(pairs.len());
    for p in pairs {
        out.push((ctx(p.first)?, ctx(p.second)?));
        labels.push(p.label.ok_or_else(|| PipelineError::Config(format!("pair ({}, {}) is unlabeled", p.first, p.second)))?);
    }
    Ok((out, labels))
}

/// Per-query manifests and their mean, excluding empty theories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalRun {
    pub manifests: Vec<RunManifest>,
    pub aggregate: MetricsRow,
    /// Fraction of queries whose theory was empty.
    pub exclusion_rate: f64,
}

/// Local approximation around `n_queries` seeded query pairs.
pub fn run_local(config: &ExperimentConfig, inputs: &Inputs<'_>) -> Result<LocalRun, PipelineError> {
    config.validate()?;
    let oracle = need_oracle(inputs)?;
    let schema = inputs.schema;
    let local = LocalSampleConfig {
        n_queries: config.local.n_queries,
        m: config.local.m,
        sigma: config.local.sigma,
        factor: config.local.factor,
        categorical_resample_prob: config.local.categorical_resample_prob,
        penalty_mode: config.local.penalty_mode,
        seed: config.seed,
    };
    let queries = sample_global(
        inputs.items,
        schema,
        &GlobalSampleConfig {
            n_train: config.local.n_queries,
            n_test: 0,
            mode: GlobalMode::ItemPool,
            seed: config.seed,
        },
    )?
    .train;
    let index = item_index(inputs.items);
    let pool: Vec<Vec<f64>> = inputs.items.iter().map(|i| i.vector(schema)).collect();
    let ratings = GtRatings::from_schema(schema)?;

    let mut manifests = Vec::with_capacity(queries.len());
    for (q, pair) in queries.iter().enumerate() {
        manifests.push(local_query(config, &local, inputs, oracle, &index, &pool, &ratings, q, pair)?);
    }

    let kept: Vec<&RunManifest> = manifests.iter().filter(|m| !m.empty_theory).collect();
    let exclusion_rate = if manifests.is_empty() {
        0.0
    } else {
        1.0 - kept.len() as f64 / manifests.len() as f64
    };
    let rows: Vec<&MetricsRow> = kept.iter().map(|m| &m.row).collect();
    Ok(LocalRun {
        aggregate: mean_row("local (mean)", &rows),
        manifests,
        exclusion_rate,
    })
}

#[allow(clippy::too_many_arguments)]
fn local_query(
    config: &ExperimentConfig,
    local: &LocalSampleConfig,
    inputs: &Inputs<'_>,
    oracle: &dyn Oracle,
    index: &BTreeMap<u32, &Item>,
    pool: &[Vec<f64>],
    ratings: &GtRatings,
    q: usize,
    pair: &PairSample,
) -> Result<RunManifest, PipelineError> {
    let schema = inputs.schema;
    let total = Stopwatch::new();
    let mut timings = Timings::default();

    let clock = Stopwatch::new();
    let query = QueryPair {
        first: lookup(index, pair.first)?.vector(schema),
        second: lookup(index, pair.second)?.vector(schema),
    };
    let hood = perturb_local(&query, &schema.features, local, q as u64)?;
    timings.sample = clock.seconds();

    let clock = Stopwatch::new();
    let label_of = |p: &QueryPair, ids: Option<(u32, u32)>| {
        oracle.label(&PairInput {
            ids,
            first: &p.first,
            second: &p.second,
        })
    };
    let labels: Vec<Label> = hood.raw_samples.iter().map(|s| label_of(s, None)).collect::<Result<_, _>>()?;
    let query_label = label_of(&query, Some((pair.first, pair.second)))?;
    timings.label = clock.seconds();

    let clock = Stopwatch::new();
    let mut rows = vec![query.first.clone(), query.second.clone()];
    for s in &hood.raw_samples {
        rows.push(s.first.clone());
        rows.push(s.second.clone());
    }
    let factor = match config.pca {
        PcaMode::Direct { factor, .. } => factor,
        _ => local.factor(),
    };
    let featurizer = Featurizer::fit(schema, pool, &rows, config.pca, config.standardize, factor)?;
    let featurized = |p: &QueryPair| QueryPair {
        first: featurizer.row(&p.first),
        second: featurizer.row(&p.second),
    };
    let fq = featurized(&query);
    let fs: Vec<QueryPair> = hood.raw_samples.iter().map(featurized).collect();
    let penalties = local_penalties(&fq, &fs, &featurizer.categorical, local.penalty_mode)?;
    timings.pca = clock.seconds();

    let clock = Stopwatch::new();
    let names: Vec<&str> = featurizer.names.iter().map(String::as_str).collect();
    let ctx = |v: &[f64]| context_from_values(&names, v);
    let examples: Vec<OrderingExample> = fs
        .iter()
        .zip(&labels)
        .zip(&penalties)
        .enumerate()
        .map(|(i, ((s, &l), &p))| {
            Ok(OrderingExample::new(
                format!("o{i}"),
                ctx(&s.first)?,
                ctx(&s.second)?,
                OrderSymbol::from_label(l),
                p,
            )?)
        })
        .collect::<Result<_, PipelineError>>()?;
    let bias = bias_for(&featurizer, schema, &config.bias);
    let learned = learn_examples(&bias, &examples, &config.learner)?;
    timings.learn = clock.seconds();

    let clock = Stopwatch::new();
    let eval = evaluate(
        &learned.theory,
        vec![(ctx(&fq.first)?, ctx(&fq.second)?)],
        vec![query_label],
        ratings,
    )?;
    let retro_projection = retro(config, &featurizer, &learned.theory)?;
    timings.evaluate = clock.seconds();
    timings.total = total.seconds();

    Ok(manifest(
        format!("local q{q} ({}, {})", pair.first, pair.second),
        config,
        Some(q),
        &featurizer,
        learned,
        examples.len(),
        eval,
        retro_projection,
        timings,
    ))
}

/// Learner used directly as a classifier of one user's labeled pairs, with a
/// seeded train/test split. The fidelity column holds the test accuracy.
pub fn run_classifier(config: &ExperimentConfig, inputs: &Inputs<'_>) -> Result<RunManifest, PipelineError> {
    config.validate()?;
    let schema = inputs.schema;
    let users = inputs
        .pairs
        .ok_or_else(|| PipelineError::Config("classifier mode needs labeled pairs".into()))?;
    let (user, pairs) = match &config.classifier.user {
        Some(u) => (u.clone(), users.get(u).ok_or_else(|| PipelineError::NoPairs(u.clone()))?),
        None => users
            .iter()
            .next()
            .map(|(u, p)| (u.clone(), p))
            .ok_or_else(|| PipelineError::NoPairs("<any>".into()))?,
    };
    let total = Stopwatch::new();
    let mut timings = Timings::default();

    let clock = Stopwatch::new();
    let mut pairs: Vec<PairSample> = pairs.iter().filter(|p| p.label.is_some()).cloned().collect();
    if pairs.is_empty() {
        return Err(PipelineError::NoPairs(user));
    }
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let n_train = config.classifier.n_train.min(pairs.len());
    let (train, test) = pairs.split_at(n_train);
    timings.sample = clock.seconds();

    let clock = Stopwatch::new();
    let rows: Vec<Vec<f64>> = inputs.items.iter().map(|i| i.vector(schema)).collect();
    let factor = match config.pca {
        PcaMode::Direct { factor, .. } => factor,
        _ => config.classifier.factor,
    };
    let featurizer = Featurizer::fit(schema, &rows, &rows, config.pca, config.standardize, factor)?;
    let contexts: BTreeMap<u32, GroundAtomSet> = inputs
        .items
        .iter()
        .map(|i| Ok((i.id, featurizer.context(&i.vector(schema))?)))
        .collect::<Result<_, PipelineError>>()?;
    timings.pca = clock.seconds();

    let clock = Stopwatch::new();
    let bias = bias_for(&featurizer, schema, &config.bias);
    let examples = crate::learner::orderings_from_labels(train, &contexts, &vec![1; train.len()])?;
    let learned = learn_examples(&bias, &examples, &config.learner)?;
    timings.learn = clock.seconds();

    let clock = Stopwatch::new();
    let (pairs, labels) = context_pairs(test, &contexts)?;
    let eval = evaluate(&learned.theory, pairs, labels, &GtRatings::from_schema(schema)?)?;
    let retro_projection = retro(config, &featurizer, &learned.theory)?;
    timings.evaluate = clock.seconds();
    timings.total = total.seconds();

    Ok(manifest(
        format!("classifier {user}"),
        config,
        None,
        &featurizer,
        learned,
        examples.len(),
        eval,
        retro_projection,
        timings,
    ))
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Arithmetic mean of rows; GT columns average over rows that have them.
pub fn mean_row(name: &str, rows: &[&MetricsRow]) -> MetricsRow {
    let n = rows.len().max(1) as f64;
    let mean = |f: fn(&MetricsRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    MetricsRow {
        name: name.to_string(),
        fidelity: mean(|r| r.fidelity),
        precision_bb: mean(|r| r.precision_bb),
        recall_bb: mean(|r| r.recall_bb),
        time_s: mean(|r| r.time_s),
        n_wc: mean(|r| r.n_wc),
        accuracy_gt: mean_opt(rows.iter().map(|r| r.accuracy_gt)),
        precision_gt: mean_opt(rows.iter().map(|r| r.precision_gt)),
        recall_gt: mean_opt(rows.iter().map(|r| r.recall_gt)),
    }
}

/// `variant − baseline`, column by column.
pub fn delta_row(baseline: &MetricsRow, variant: &MetricsRow) -> MetricsRow {
    let d = |a: Option<f64>, b: Option<f64>| Some(b? - a?);
    MetricsRow {
        name: format!("{} (delta vs {})", variant.name, baseline.name),
        fidelity: variant.fidelity - baseline.fidelity,
        precision_bb: variant.precision_bb - baseline.precision_bb,
        recall_bb: variant.recall_bb - baseline.recall_bb,
        time_s: variant.time_s - baseline.time_s,
        n_wc: variant.n_wc - baseline.n_wc,
        accuracy_gt: d(baseline.accuracy_gt, variant.accuracy_gt),
        precision_gt: d(baseline.precision_gt, variant.precision_gt),
        recall_gt: d(baseline.recall_gt, variant.recall_gt),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<MetricsRow>,
    /// One row per non-baseline run; the first run is the baseline.
    pub deltas: Vec<MetricsRow>,
    /// Each run's theory in ILASP syntax followed by its gloss.
    pub theories: String,
}

pub fn report(manifests: &[RunManifest]) -> Report {
    let rows: Vec<MetricsRow> = manifests.iter().map(|m| m.row.clone()).collect();
    let deltas = match rows.split_first() {
        Some((base, rest)) => rest.iter().map(|r| delta_row(base, r)).collect(),
        None => Vec::new(),
    };
    let mut theories = String::new();
    for m in manifests {
        theories.push_str(&format!("% {}\n", m.name));
        theories.push_str(&m.theory);
        for line in &m.gloss {
            theories.push_str(&format!("% {line}\n"));
        }
        for (pc, features) in &m.retro_projection {
            theories.push_str(&format!("% {pc}: {}\n", features.join(", ")));
        }
        theories.push('\n');
    }
    Report { rows, deltas, theories }
}

pub fn write_rows<W: std::io::Write>(writer: W, rows: &[MetricsRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSpec;
    use crate::oracle::TheoryOracle;

    fn world() -> (Schema, Vec<Item>, TheoryOracle) {
        let mut cost = FeatureSpec::ordinal("cost", 0, 9);
        cost.gt_rating = Some(3);
        let schema = Schema::new(
            "toy",
            vec![FeatureSpec::categorical("category", vec![1, 2]), cost, FeatureSpec::ordinal("time", 0, 9)],
        )
        .unwrap();
        let items = (0..20u32)
            .map(|i| {
                Item::from_vector(
                    i,
                    "i",
                    &schema,
                    &[f64::from(1 + i % 2), f64::from(i % 10), f64::from((i * 7) % 10)],
                )
            })
            .collect();
        let truth = parse_theory(":~ value(cost,V1).[V1@1, V1]").unwrap();
        let names = schema.names().iter().map(|s| s.to_string()).collect();
        (schema, items, TheoryOracle::new(truth, names))
    }

    fn global_config(seed: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(RunMode::Global, seed);
        c.bias.maxp = 2;
        c.global.n_train = 12;
        c.global.n_test = 30;
        c
    }

    #[test]
    fn global_recovers_a_one_feature_truth() {
        let (schema, items, oracle) = world();
        let inputs = Inputs {
            schema: &schema,
            items: &items,
            pairs: None,
            oracle: Some(&oracle),
        };
        let m = run_global(&global_config(4), &inputs).unwrap();
        assert_eq!(m.metrics.fidelity, 1.0);
        assert!(m.theory.contains("value(cost,V1)"));
        assert_eq!(m.recompute().unwrap(), m.metrics);
        assert_eq!(m.row.n_wc, m.theory().unwrap().len() as f64);
        let gt = m.gt.as_ref().unwrap();
        assert_eq!(gt.accuracy, 1.0);
        let again = run_global(&global_config(4), &inputs).unwrap();
        assert_eq!(again.theory, m.theory);
        assert_eq!(again.test_pairs, m.test_pairs);
        let t = &m.timings;
        assert!(t.sample + t.label + t.pca + t.learn + t.evaluate <= t.total + 1e-9);
    }

    #[test]
    fn single_example_is_covered() {
        let (schema, items, oracle) = world();
        let inputs = Inputs {
            schema: &schema,
            items: &items,
            pairs: None,
            oracle: Some(&oracle),
        };
        let mut c = global_config(1);
        c.global.n_train = 1;
        c.global.n_test = 0;
        let m = run_global(&c, &inputs).unwrap();
        assert!(m.theory().unwrap().len() <= 1);
        assert!(m.objective <= 1);
    }

    #[test]
    fn local_runs_aggregate() {
        let (schema, items, oracle) = world();
        let inputs = Inputs {
            schema: &schema,
            items: &items,
            pairs: None,
            oracle: Some(&oracle),
        };
        let mut c = ExperimentConfig::new(RunMode::Local, 2);
        c.bias.maxp = 2;
        c.local.n_queries = 3;
        c.local.m = 10;
        c.local.sigma = 0.1;
        let run = run_local(&c, &inputs).unwrap();
        assert_eq!(run.manifests.len(), 3);
        assert!(run.manifests.iter().all(|m| m.test_pairs.len() == 1));
        assert!((0.0..=1.0).contains(&run.exclusion_rate));
    }

    #[test]
    fn classifier_split_is_seeded() {
        let (schema, items, oracle) = world();
        let mut users = UserPairs::new();
        let pairs: Vec<PairSample> = (0..19u32)
            .map(|i| {
                let p = PairSample::new(i, i + 1).unwrap();
                let a = items[i as usize].vector(&schema);
                let b = items[i as usize + 1].vector(&schema);
                let l = oracle
                    .label(&PairInput {
                        ids: None,
                        first: &a,
                        second: &b,
                    })
                    .unwrap();
                p.with_label(l)
            })
            .collect();
        users.insert("u1".into(), pairs);
        let inputs = Inputs {
            schema: &schema,
            items: &items,
            pairs: Some(&users),
            oracle: None,
        };
        let mut c = ExperimentConfig::new(RunMode::Classifier, 8);
        c.bias.maxp = 2;
        c.classifier.n_train = 14;
        let a = run_classifier(&c, &inputs).unwrap();
        let b = run_classifier(&c, &inputs).unwrap();
        assert_eq!((a.train_examples, a.test_pairs.len()), (14, 5));
        assert_eq!(a.test_pairs, b.test_pairs);
        assert_eq!(a.metrics.fidelity, 1.0);
    }

    #[test]
    fn indirect_and_direct_pca_runs() {
        let (schema, items, oracle) = world();
        let inputs = Inputs {
            schema: &schema,
            items: &items,
            pairs: None,
            oracle: Some(&oracle),
        };
        let mut c = global_config(5);
        c.pca = PcaMode::Indirect { n: 2 };
        let m = run_global(&c, &inputs).unwrap();
        assert!(m.reduction.is_some());
        c.pca = PcaMode::Direct {
            k: 2,
            factor: 10,
            retro_n: 2,
        };
        let m = run_global(&c, &inputs).unwrap();
        assert_eq!(m.features, vec!["pc1", "pc2"]);
        for pc in m.retro_projection.keys() {
            assert!(m.theory.contains(pc.as_str()));
        }
    }

    #[test]
    fn report_deltas() {
        let row = |name: &str, fid: f64| MetricsRow {
            name: name.into(),
            fidelity: fid,
            precision_bb: 0.5,
            recall_bb: 0.5,
            time_s: 1.0,
            n_wc: 2.0,
            accuracy_gt: Some(0.5),
            precision_gt: None,
            recall_gt: None,
        };
        let d = delta_row(&row("base", 0.7), &row("pca", 0.65));
        assert!((d.fidelity + 0.05).abs() < 1e-12);
        assert_eq!(d.accuracy_gt, Some(0.0));
        assert_eq!(d.precision_gt, None);
        let mut out = Vec::new();
        write_rows(&mut out, &[row("base", 0.7)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("Run,Fidelity,Precision_BB,Recall_BB,Time(s),#WC,accuracy_GT,precision_GT,recall_GT\n"));
        assert!(report(&[]).deltas.is_empty());
    }

    #[test]
    fn config_round_trip_and_validation() {
        let mut c = global_config(3);
        c.pca = PcaMode::Direct {
            k: 5,
            factor: 10,
            retro_n: 5,
        };
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), c);
        let minimal: ExperimentConfig = serde_json::from_str(r#"{"mode":"global","seed":1}"#).unwrap();
        assert_eq!(minimal.bias.maxp, 5);
        c.bias.maxp = 0;
        assert!(c.validate().is_err());
    }
}
