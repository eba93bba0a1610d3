//! Black-box labelers of ordered item pairs.
//!
//! Every oracle answers `label(pair) -> {-1, 0, 1}`. Implementations: a
//! prediction table keyed by item ids, an external command speaking a line
//! protocol, a small built-in multilayer perceptron, and a weak-constraint
//! theory (with optional deterministic label noise) for synthetic studies.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asp::{classify_pair, parse_theory, render_theory, AspError, Theory};
use crate::dataset::{context_from_values, round_half_away, DatasetError};
use crate::label::Label;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no table entry for pair ({0}, {1})")]
    TableMiss(u32, u32),
    #[error("the table oracle needs item ids")]
    MissingIds,
    #[error("command oracle failed: {0}")]
    Command(String),
    #[error("command oracle replied `{0}`, expected -1, 0 or 1")]
    Reply(String),
    #[error("input has {got} values, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("training data has a single class")]
    SingleClass,
    #[error("{inputs} inputs but {labels} labels")]
    LabelCount { inputs: usize, labels: usize },
    #[error("invalid model: {0}")]
    Model(String),
    #[error(transparent)]
    Asp(#[from] AspError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One ordered pair as seen by an oracle.
#[derive(Clone, Copy, Debug)]
pub struct PairInput<'a> {
    pub ids: Option<(u32, u32)>,
    pub first: &'a [f64],
    pub second: &'a [f64],
}

impl PairInput<'_> {
    /// Concatenated features of both items.
    pub fn joined(&self) -> Vec<f64> {
        self.first.iter().chain(self.second).copied().collect()
    }
}

pub trait Oracle {
    fn label(&self, pair: &PairInput<'_>) -> Result<Label, OracleError>;
}

/// Labels looked up by `(id1, id2)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableOracle {
    pub labels: BTreeMap<(u32, u32), Label>,
}

impl TableOracle {
    /// Reads `id1, id2, label` rows (header required).
    pub fn load(path: impl AsRef<Path>) -> Result<TableOracle, OracleError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut labels = BTreeMap::new();
        for record in rdr.records() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("").to_string();
            let num = |i: usize| field(i).parse::<i64>().map_err(|_| OracleError::Reply(field(i)));
            let a = u32::try_from(num(0)?).map_err(|_| OracleError::Reply(field(0)))?;
            let b = u32::try_from(num(1)?).map_err(|_| OracleError::Reply(field(1)))?;
            let label = Label::try_from(num(2)?).map_err(|_| OracleError::Reply(field(2)))?;
            labels.insert((a, b), label);
        }
        Ok(TableOracle { labels })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OracleError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id1", "id2", "label"])?;
        for ((a, b), l) in &self.labels {
            w.write_record([a.to_string(), b.to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Oracle for TableOracle {
    fn label(&self, pair: &PairInput<'_>) -> Result<Label, OracleError> {
        let (a, b) = pair.ids.ok_or(OracleError::MissingIds)?;
        self.labels.get(&(a, b)).copied().ok_or(OracleError::TableMiss(a, b))
    }
}

/// External process: one request line of space-separated numbers (first
/// item's features, then the second's), one reply line with the label.
pub struct CommandOracle {
    argv: Vec<String>,
    io: Mutex<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl CommandOracle {
    pub fn spawn(argv: &[String]) -> Result<CommandOracle, OracleError> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| OracleError::Command("empty command line".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| OracleError::Command(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(CommandOracle {
            argv: argv.to_vec(),
            io: Mutex::new((child, stdin, stdout)),
        })
    }
}

impl Oracle for CommandOracle {
    fn label(&self, pair: &PairInput<'_>) -> Result<Label, OracleError> {
        let mut guard = self.io.lock().map_err(|_| OracleError::Command("poisoned".into()))?;
        let (child, stdin, stdout) = &mut *guard;
        let request = pair
            .joined()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let failed = |child: &mut Child, what: String| {
            let status = child.try_wait().ok().flatten();
            OracleError::Command(match status {
                Some(s) => format!("`{}` {what} ({s})", self.argv.join(" ")),
                None => format!("`{}` {what}", self.argv.join(" ")),
            })
        };
        if let Err(e) = writeln!(stdin, "{request}").and_then(|_| stdin.flush()) {
            return Err(failed(child, format!("rejected input: {e}")));
        }
        let mut reply = String::new();
        if stdout.read_line(&mut reply)? == 0 {
            let _ = child.wait();
            return Err(failed(child, "closed its output".into()));
        }
        let reply = reply.trim();
        reply
            .parse::<i64>()
            .ok()
            .and_then(|v| Label::try_from(v).ok())
            .ok_or_else(|| OracleError::Reply(reply.to_string()))
    }
}

impl Drop for CommandOracle {
    fn drop(&mut self) {
        if let Ok(guard) = self.io.get_mut() {
            let _ = guard.0.kill();
            let _ = guard.0.wait();
        }
    }
}

/// Labels pairs by a weak-constraint theory, flipping a fixed fraction of
/// labels by a hash of the pair. Inputs are multiplied by `scale` and
/// rounded half away from zero before the theory sees them.
#[derive(Clone, Debug)]
pub struct TheoryOracle {
    pub theory: Theory,
    pub feature_names: Vec<String>,
    pub noise: f64,
    pub seed: u64,
    pub scale: f64,
}

impl TheoryOracle {
    pub fn new(theory: Theory, feature_names: Vec<String>) -> TheoryOracle {
        TheoryOracle {
            theory,
            feature_names,
            noise: 0.0,
            seed: 0,
            scale: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> TheoryOracle {
        self.scale = scale;
        self
    }

    pub fn with_noise(mut self, noise: f64, seed: u64) -> TheoryOracle {
        self.noise = noise;
        self.seed = seed;
        self
    }

    /// The label before noise.
    pub fn clean_label(&self, pair: &PairInput<'_>) -> Result<Label, OracleError> {
        let names: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        for v in [pair.first, pair.second] {
            if v.len() != names.len() {
                return Err(OracleError::Shape {
                    got: v.len(),
                    expected: names.len(),
                });
            }
        }
        let scaled = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| round_half_away(x * self.scale)).collect() };
        let a = context_from_values(&names, &scaled(pair.first))?;
        let b = context_from_values(&names, &scaled(pair.second))?;
        Ok(classify_pair(&self.theory, &a, &b)?)
    }
}

impl Oracle for TheoryOracle {
    fn label(&self, pair: &PairInput<'_>) -> Result<Label, OracleError> {
        let clean = self.clean_label(pair)?;
        if self.noise <= 0.0 {
            return Ok(clean);
        }
        let h = pair
            .joined()
            .iter()
            .fold(mix(self.seed), |h, v| mix(h ^ v.to_bits()));
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        if u >= self.noise {
            return Ok(clean);
        }
        let others: Vec<Label> = Label::ALL.into_iter().filter(|&l| l != clean).collect();
        Ok(others[(mix(h) % 2) as usize])
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `weights[o][i]`: input `i` to output `o`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Hidden activation; `None` on the softmax output layer.
    pub activation: Option<Activation>,
}

impl Layer {
    fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<(usize, Activation)>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction held out to pick the best epoch; 0 keeps the last epoch.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![(64, Activation::Tanh), (64, Activation::Relu), (64, Activation::Linear)],
            learning_rate: 0.0005,
            epochs: 500,
            batch_size: 16,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Feed-forward network over the concatenated features of a pair, with a
/// softmax over the classes (−1, 0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, identity input scaling.
    pub fn init(inputs: usize, config: &TrainConfig) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut sizes: Vec<(usize, Option<Activation>)> =
            config.hidden.iter().map(|&(n, a)| (n, Some(a))).collect();
        sizes.push((3, None));
        let mut fan_in = inputs;
        let mut layers = Vec::with_capacity(sizes.len());
        for (out, activation) in sizes {
            let limit = (6.0 / (fan_in + out) as f64).sqrt();
            let weights = (0..out)
                .map(|_| (0..fan_in).map(|_| rng.random_range(-limit..=limit)).collect())
                .collect();
            layers.push(Layer {
                weights,
                bias: vec![0.0; out],
                activation,
            });
            fan_in = out;
        }
        MlpModel {
            input_mean: vec![0.0; inputs],
            input_scale: vec![1.0; inputs],
            layers,
        }
    }

    pub fn inputs(&self) -> usize {
        self.input_mean.len()
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let mut width = self.inputs();
        if self.input_scale.len() != width {
            return Err(OracleError::Model("input scaling lengths differ".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.bias.len() != layer.weights.len() || layer.weights.iter().any(|r| r.len() != width) {
                return Err(OracleError::Model(format!("layer {k} does not chain")));
            }
            width = layer.bias.len();
        }
        if width != 3 || self.layers.last().is_none_or(|l| l.activation.is_some()) {
            return Err(OracleError::Model("the last layer must be a 3-way softmax".into()));
        }
        Ok(())
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.input_mean)
            .zip(&self.input_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Pre-activations and activations of every layer; the last activation
    /// holds the logits.
    fn forward(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = vec![self.scaled(x)];
        for layer in &self.layers {
            let z = layer.forward(acts.last().unwrap());
            let a = match layer.activation {
                Some(act) => z.iter().map(|&v| act.apply(v)).collect(),
                None => z.clone(),
            };
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.check(x)?;
        Ok(self.forward(x).1.pop().unwrap())
    }

    /// Class probabilities ordered (−1, 0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 3], OracleError> {
        let p = softmax(&self.logits(x)?);
        Ok([p[0], p[1], p[2]])
    }

    fn check(&self, x: &[f64]) -> Result<(), OracleError> {
        if x.len() != self.inputs() {
            return Err(OracleError::Shape {
                got: x.len(),
                expected: self.inputs(),
            });
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OracleError> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MlpModel, OracleError> {
        let model: MlpModel = serde_json::from_reader(BufReader::new(std::fs::File::open(path)?))?;
        model.validate()?;
        Ok(model)
    }
}

/// Numerically stable softmax (the maximum logit is subtracted first).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.iter().map(|e| e / total).collect()
}

/// Most probable class; any tie involving the maximum goes to `Uncertain`.
pub fn argmax_label(p: &[f64; 3]) -> Label {
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..3).filter(|&i| p[i] == max).collect();
    if winners.len() == 1 {
        Label::from_index(winners[0]).expect("index < 3")
    } else {
        Label::Uncertain
    }
}

impl Oracle for MlpModel {
    fn label(&self, pair: &PairInput<'_>) -> Result<Label, OracleError> {
        Ok(argmax_label(&self.predict_proba(&pair.joined())?))
    }
}

/// Gradients of the mean cross-entropy with the same shapes as the layers.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub bias: Vec<Vec<f64>>,
}

/// Mean cross-entropy over the batch and its gradients.
pub fn loss_and_gradients(model: &MlpModel, xs: &[Vec<f64>], ys: &[Label]) -> (f64, Gradients) {
    let mut grads = Gradients {
        weights: model
            .layers
            .iter()
            .map(|l| vec![vec![0.0; l.weights.first().map_or(0, Vec::len)]; l.weights.len()])
            .collect(),
        bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
    };
    let n = xs.len().max(1) as f64;
    let mut loss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (zs, acts) = model.forward(x);
        let p = softmax(acts.last().unwrap());
        loss -= p[y.index()].max(1e-300).ln() / n;
        let mut delta: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(k, pk)| (pk - if k == y.index() { 1.0 } else { 0.0 }) / n)
            .collect();
        for l in (0..model.layers.len()).rev() {
            let input = &acts[l];
            for (o, d) in delta.iter().enumerate() {
                grads.bias[l][o] += d;
                for (i, a) in input.iter().enumerate() {
                    grads.weights[l][o][i] += d * a;
                }
            }
            if l == 0 {
                break;
            }
            let below = &model.layers[l - 1];
            let act = below.activation.expect("hidden layers have activations");
            delta = (0..input.len())
                .map(|i| {
                    let back: f64 = model.layers[l]
                        .weights
                        .iter()
                        .zip(&delta)
                        .map(|(row, d)| row[i] * d)
                        .sum();
                    back * act.derivative(zs[l - 1][i])
                })
                .collect();
        }
    }
    (loss, grads)
}

fn apply_step(model: &mut MlpModel, grads: &Gradients, lr: f64) {
    for (l, layer) in model.layers.iter_mut().enumerate() {
        for (o, row) in layer.weights.iter_mut().enumerate() {
            for (i, w) in row.iter_mut().enumerate() {
                *w -= lr * grads.weights[l][o][i];
            }
            layer.bias[o] -= lr * grads.bias[l][o];
        }
    }
}

pub fn accuracy(model: &MlpModel, xs: &[Vec<f64>], ys: &[Label]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let hits = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| {
            model
                .predict_proba(x)
                .map(|p| argmax_label(&p) == **y)
                .unwrap_or(false)
        })
        .count();
    hits as f64 / xs.len() as f64
}

/// Mini-batch gradient descent on softmax cross-entropy. Inputs are
/// standardized with statistics stored in the model. With a validation
/// split, the weights of the best validation epoch are returned.
pub fn train_mlp(xs: &[Vec<f64>], ys: &[Label], config: &TrainConfig) -> Result<MlpModel, OracleError> {
    if xs.len() != ys.len() {
        return Err(OracleError::LabelCount {
            inputs: xs.len(),
            labels: ys.len(),
        });
    }
    let first = ys.first().ok_or(OracleError::SingleClass)?;
    if ys.iter().all(|y| y == first) {
        return Err(OracleError::SingleClass);
    }
    let dim = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
        return Err(OracleError::Shape {
            got: bad.len(),
            expected: dim,
        });
    }
    let mut model = MlpModel::init(dim, config);
    let n = xs.len() as f64;
    for j in 0..dim {
        let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n;
        let var = xs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
        model.input_mean[j] = mean;
        model.input_scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((xs.len() as f64) * config.validation_fraction).floor() as usize;
    let n_val = n_val.min(xs.len().saturating_sub(1));
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_x: Vec<Vec<f64>> = val_idx.iter().map(|&i| xs[i].clone()).collect();
    let val_y: Vec<Label> = val_idx.iter().map(|&i| ys[i]).collect();
    let mut train_idx = train_idx.to_vec();

    let mut best = (f64::NEG_INFINITY, model.clone());
    for _ in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(config.batch_size.max(1)) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<Label> = batch.iter().map(|&i| ys[i]).collect();
            let (_, grads) = loss_and_gradients(&model, &bx, &by);
            apply_step(&mut model, &grads, config.learning_rate);
        }
        if !val_x.is_empty() {
            let acc = accuracy(&model, &val_x, &val_y);
            if acc > best.0 {
                best = (acc, model.clone());
            }
        }
    }
    if val_x.is_empty() || config.epochs == 0 {
        Ok(model)
    } else {
        Ok(best.1)
    }
}

/// How to build an oracle, as stored in experiment configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleSpec {
    Table {
        path: PathBuf,
    },
    Command {
        argv: Vec<String>,
    },
    BuiltinMlp {
        model: PathBuf,
    },
    Theory {
        theory: String,
        feature_names: Vec<String>,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl OracleSpec {
    pub fn theory(theory: &Theory, feature_names: Vec<String>, noise: f64, seed: u64) -> OracleSpec {
        OracleSpec::Theory {
            theory: render_theory(theory),
            feature_names,
            noise,
            seed,
            scale: 1.0,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Oracle + Send + Sync>, OracleError> {
        Ok(match self {
            OracleSpec::Table { path } => Box::new(TableOracle::load(path)?),
            OracleSpec::Command { argv } => Box::new(CommandOracle::spawn(argv)?),
            OracleSpec::BuiltinMlp { model } => Box::new(MlpModel::load(model)?),
            OracleSpec::Theory {
                theory,
                feature_names,
                noise,
                seed,
                scale,
            } => Box::new(
                TheoryOracle::new(parse_theory(theory)?, feature_names.clone())
                    .with_noise(*noise, *seed)
                    .with_scale(*scale),
            ),
        })
    }
}
