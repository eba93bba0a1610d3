use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use wcexplain::asp::{parse_facts, parse_theory, render_theory, GroundAtomSet, Theory};
use wcexplain::dataset::{
    aggregate_ingredients, item_context, load_pairs, meta_schema, quantize, save_items, save_pairs, ClassMap, Item,
    PairSample, Schema, UserPairs,
};
use wcexplain::learner::{export_ilasp_task, orderings_from_labels, LearningTask};
use wcexplain::metrics::{fidelity_report, gt_report, gt_theory, median_bandwidth, mmd, GtRatings};
use wcexplain::oracle::{train_mlp, Activation, Oracle, TrainConfig};
use wcexplain::pca::{direct_report, indirect_select, kaiser_select, project, PcaModel};
use wcexplain::pipeline::{
    bias_for, delta_row, label_pairs, mean_row, report, run_classifier, run_global, run_local, write_rows,
    BiasConfig, ExperimentConfig, Featurizer, Inputs, MetricsRow, PcaMode, RunManifest, RunMode,
};
use wcexplain::sampling::{
    local_penalties, perturb_local, sample_global, GlobalMode, GlobalSampleConfig, LocalSampleConfig, PenaltyMode,
    QueryPair,
};

use crate::args::*;
use crate::files::{self, ManifestFile};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Pca(PcaCommand::Fit(a)) => pca_fit(a),
        Command::Pca(PcaCommand::Select(a)) => pca_select(a),
        Command::Pca(PcaCommand::Project(a)) => pca_project(a),
        Command::Sample(SampleCommand::Global(a)) => sample_global_cmd(a),
        Command::Sample(SampleCommand::Local(a)) => sample_local_cmd(a),
        Command::Oracle(OracleCommand::Label(a)) => oracle_label(a),
        Command::Oracle(OracleCommand::Train(a)) => oracle_train(a),
        Command::Learn(LearnCommand::Global(a)) => learn(RunMode::Global, a),
        Command::Learn(LearnCommand::Local(a)) => learn(RunMode::Local, a),
        Command::Learn(LearnCommand::Classifier(a)) => learn(RunMode::Classifier, a),
        Command::Eval(a) => eval(a),
        Command::GtScore(a) => gt_score(a),
        Command::Mmd(a) => mmd_cmd(a),
        Command::ExportIlasp(a) => export_ilasp(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn load_data(data: &DataArgs) -> Result<(Schema, Vec<Item>)> {
    let schema = files::schema(&data.schema)?;
    let items = files::items(&data.items, &schema)?;
    Ok((schema, items))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (mut schema, mut items) = load_data(&a.data)?;
    if let Some(source) = &a.class_map {
        let map = match source.as_str() {
            "bundled" => ClassMap::bundled(),
            path => ClassMap::load(path).with_context(|| format!("reading class map {path}"))?,
        };
        let meta = meta_schema(&schema, &map)?;
        items = items
            .iter()
            .map(|i| aggregate_ingredients(i, &schema, &map))
            .collect::<Result<_, _>>()?;
        schema = meta;
    }
    let mut per_user = BTreeMap::new();
    if let Some(path) = &a.pairs {
        let users = load_pairs(path, Some(&files::known_ids(&items)))
            .with_context(|| format!("reading pairs {}", path.display()))?;
        per_user = users.iter().map(|(u, ps)| (u.clone(), ps.len())).collect();
    }
    if let Some(out) = &a.out {
        save_items(out, &schema, &items)?;
    }
    if let Some(out) = &a.schema_out {
        schema.save(out)?;
    }
    files::print_json(&json!({
        "schema": schema.name,
        "features": schema.features.len(),
        "items": items.len(),
        "pairs_per_user": per_user,
    }))
}

fn feature_rows(model: &PcaModel, items: &[Item]) -> Result<Vec<Vec<f64>>> {
    items
        .iter()
        .map(|item| {
            model
                .feature_names
                .iter()
                .map(|f| item.get(f).ok_or_else(|| anyhow!("item {} has no feature `{f}`", item.id)))
                .collect()
        })
        .collect()
}

fn pca_fit(a: PcaFitArgs) -> Result<()> {
    let (schema, items) = load_data(&a.data)?;
    let names: Vec<String> = schema
        .features
        .iter()
        .filter(|f| !(a.drop_categorical && f.is_categorical()))
        .map(|f| f.name.clone())
        .collect();
    let rows: Vec<Vec<f64>> = items
        .iter()
        .map(|i| names.iter().map(|f| i.get(f).unwrap_or(0.0)).collect())
        .collect();
    let model = PcaModel::fit(&rows, &names, !a.covariance)?;
    model.save(&a.out)?;
    let kaiser = kaiser_select(&model).ok();
    files::print_json(&json!({
        "features": model.n_features(),
        "eigenvalues": model.eigenvalues,
        "explained_variance_ratio": model.explained_variance_ratio,
        "kaiser": kaiser,
        "constant_features": model.constant_features,
    }))
}

fn pca_select(a: PcaSelectArgs) -> Result<()> {
    let model = PcaModel::load(&a.model)?;
    let n = match a.n {
        Some(n) => n,
        None => kaiser_select(&model)?,
    };
    let report = indirect_select(&model, n)?;
    match &a.out {
        Some(out) => files::write_json(out, &report),
        None => files::print_json(&report),
    }
}

fn pca_project(a: PcaProjectArgs) -> Result<()> {
    let model = PcaModel::load(&a.model)?;
    let (_, items) = load_data(&a.data)?;
    let (scores, quantization) = project(&model, &feature_rows(&model, &items)?, a.k, a.factor)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    let report = direct_report(&model, a.k)?;
    let mut header = vec!["id".to_string()];
    header.extend(report.kept_features.iter().cloned());
    w.write_record(&header)?;
    for (item, row) in items.iter().zip(&scores) {
        let mut record = vec![item.id.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    files::print_json(&json!({ "rows": scores.len(), "quantization": quantization, "components": report.thresholds }))
}

fn provenance(data: &DataArgs) -> serde_json::Value {
    json!({
        "tool": concat!("wcexplain ", env!("CARGO_PKG_VERSION")),
        "schema": data.schema,
        "items": data.items,
    })
}

fn one_user(pairs: &[PairSample]) -> UserPairs {
    BTreeMap::from([("sample".to_string(), pairs.to_vec())])
}

fn sample_global_cmd(a: SampleGlobalArgs) -> Result<()> {
    let (schema, items) = load_data(&a.data)?;
    let config = GlobalSampleConfig {
        n_train: a.n_train,
        n_test: a.n_test,
        mode: if a.synthetic {
            GlobalMode::SyntheticFeatures
        } else {
            GlobalMode::ItemPool
        },
        seed: a.seed,
    };
    let sample = sample_global(&items, &schema, &config)?;
    files::ensure_dir(&a.out_dir)?;
    save_pairs(a.out_dir.join("train.csv"), &one_user(&sample.train))?;
    save_pairs(a.out_dir.join("test.csv"), &one_user(&sample.test))?;
    if !sample.items.is_empty() {
        save_items(a.out_dir.join("items.csv"), &schema, &sample.items)?;
    }
    files::write_json(
        &a.out_dir.join("manifest.json"),
        &json!({
            "kind": "global-sample",
            "seed": a.seed,
            "config": config,
            "train": sample.train.len(),
            "test": sample.test.len(),
            "synthetic_items": sample.items.len(),
            "provenance": provenance(&a.data),
        }),
    )
}

fn penalty_mode(arg: PenaltyArg) -> PenaltyMode {
    match arg {
        PenaltyArg::Distance => PenaltyMode::Distance,
        PenaltyArg::InverseDistance => PenaltyMode::InverseDistance,
    }
}

fn sample_local_cmd(a: SampleLocalArgs) -> Result<()> {
    let (schema, items) = load_data(&a.data)?;
    let config = LocalSampleConfig {
        n_queries: a.queries,
        m: a.m,
        sigma: a.sigma,
        factor: a.factor,
        categorical_resample_prob: a.categorical_resample,
        penalty_mode: penalty_mode(a.penalty_mode),
        seed: a.seed,
    };
    // Same query draw as `learn local` with this seed.
    let queries = sample_global(
        &items,
        &schema,
        &GlobalSampleConfig {
            n_train: a.queries,
            n_test: 0,
            mode: GlobalMode::ItemPool,
            seed: a.seed,
        },
    )?
    .train;
    let by_id: BTreeMap<u32, &Item> = items.iter().map(|i| (i.id, i)).collect();
    let mask = schema.categorical_mask();
    let mut hoods = Vec::with_capacity(queries.len());
    for (q, pair) in queries.iter().enumerate() {
        let query = QueryPair {
            first: by_id[&pair.first].vector(&schema),
            second: by_id[&pair.second].vector(&schema),
        };
        let hood = perturb_local(&query, &schema.features, &config, q as u64)?;
        let penalties = local_penalties(&hood.query, &hood.samples, &mask, config.penalty_mode)?;
        hoods.push(json!({
            "query": q,
            "first": pair.first,
            "second": pair.second,
            "penalties": penalties,
            "neighbourhood": hood,
        }));
    }
    files::ensure_dir(&a.out_dir)?;
    save_pairs(a.out_dir.join("queries.csv"), &one_user(&queries))?;
    files::write_json(&a.out_dir.join("neighbourhoods.json"), &hoods)?;
    files::write_json(
        &a.out_dir.join("manifest.json"),
        &json!({
            "kind": "local-sample",
            "seed": a.seed,
            "config": config,
            "factor": config.factor(),
            "queries": queries.len(),
            "provenance": provenance(&a.data),
        }),
    )
}

fn oracle_label(a: OracleLabelArgs) -> Result<()> {
    let (schema, items) = load_data(&a.data)?;
    let spec = files::oracle_spec(&a.oracle)?.ok_or_else(|| anyhow!("no oracle given"))?;
    let oracle = spec.build()?;
    let users = load_pairs(&a.pairs, Some(&files::known_ids(&items)))
        .with_context(|| format!("reading pairs {}", a.pairs.display()))?;
    let by_id: BTreeMap<u32, &Item> = items.iter().map(|i| (i.id, i)).collect();
    let mut labeled = UserPairs::new();
    let mut counts = [0usize; 3];
    for (user, pairs) in users {
        let done = label_pairs(oracle.as_ref(), &pairs, &by_id, &schema)?;
        for p in &done {
            counts[p.label.expect("labeled").index()] += 1;
        }
        labeled.insert(user, done);
    }
    save_pairs(&a.out, &labeled)?;
    files::print_json(&json!({ "pairs": counts.iter().sum::<usize>(), "labels": {"-1": counts[0], "0": counts[1], "1": counts[2]} }))
}

fn parse_hidden(text: &str) -> Result<Vec<(usize, Activation)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|layer| {
            let (width, act) = layer
                .trim()
                .split_once(':')
                .ok_or_else(|| anyhow!("hidden layer `{layer}` is not `width:activation`"))?;
            let act = match act {
                "tanh" => Activation::Tanh,
                "relu" => Activation::Relu,
                "linear" => Activation::Linear,
                other => bail!("unknown activation `{other}`"),
            };
            Ok((width.parse().with_context(|| format!("bad width in `{layer}`"))?, act))
        })
        .collect()
}

fn oracle_train(a: OracleTrainArgs) -> Result<()> {
    let (schema, items) = load_data(&a.data)?;
    let pairs = files::labeled_pairs(&a.pairs, &items)?;
    let by_id: BTreeMap<u32, &Item> = items.iter().map(|i| (i.id, i)).collect();
    let xs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| {
            let mut x = by_id[&p.first].vector(&schema);
            x.extend(by_id[&p.second].vector(&schema));
            x
        })
        .collect();
    let ys: Vec<_> = pairs.iter().map(|p| p.label.expect("checked")).collect();
    let config = TrainConfig {
        hidden: parse_hidden(&a.hidden)?,
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        batch_size: a.batch_size,
        validation_fraction: a.validation,
        seed: a.seed,
    };
    let model = train_mlp(&xs, &ys, &config)?;
    model.save(&a.out)?;
    files::print_json(&json!({
        "pairs": xs.len(),
        "inputs": model.inputs(),
        "train_accuracy": wcexplain::oracle::accuracy(&model, &xs, &ys),
    }))
}

fn parse_pca(text: &str) -> Result<PcaMode> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.parse::<usize>().with_context(|| format!("bad number `{s}` in --pca {text}"));
    Ok(match parts.as_slice() {
        ["none"] => PcaMode::None,
        ["indirect", n] => PcaMode::Indirect { n: num(n)? },
        ["direct", k, f, r] => PcaMode::Direct {
            k: num(k)?,
            factor: num(f)? as u32,
            retro_n: num(r)?,
        },
        _ => bail!("--pca expects none, indirect:N or direct:K:FACTOR:RETRO_N, got `{text}`"),
    })
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// The config file (if any) with the command-line overrides applied.
pub fn build_config(mode: RunMode, a: &RunArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(path) => {
            let mut c: ExperimentConfig = files::read_json(path)?;
            c.mode = mode;
            if let Some(seed) = a.seed {
                c.seed = seed;
            }
            c
        }
        None => ExperimentConfig::new(mode, a.seed.ok_or_else(|| anyhow!("--seed is required without --config"))?),
    };
    if let Some(s) = &a.schema {
        c.schema = Some(s.clone());
    }
    if let Some(p) = &a.items {
        c.items = Some(path_string(p));
    }
    if let Some(p) = &a.pairs {
        c.pairs = Some(path_string(p));
    }
    if let Some(spec) = files::oracle_spec(&a.oracle)? {
        c.oracle = Some(spec);
    }
    if let Some(p) = &a.pca {
        c.pca = parse_pca(p)?;
    }
    if a.covariance {
        c.standardize = false;
    }
    if let Some(v) = a.maxp {
        c.bias.maxp = v;
    }
    if a.category_conditions {
        c.bias.category_conditions = true;
    }
    if a.max_constraints.is_some() {
        c.learner.max_constraints = a.max_constraints;
    }
    if a.time_limit.is_some() {
        c.learner.time_limit_s = a.time_limit;
    }
    if a.beam_width.is_some() {
        c.learner.beam_width = a.beam_width;
    }
    if let Some(v) = a.n_train {
        c.global.n_train = v;
        c.classifier.n_train = v;
    }
    if let Some(v) = a.n_test {
        c.global.n_test = v;
    }
    if let Some(v) = a.factor {
        c.global.factor = v;
        c.classifier.factor = v;
    }
    if let Some(v) = a.queries {
        c.local.n_queries = v;
    }
    if let Some(v) = a.m {
        c.local.m = v;
    }
    if let Some(v) = a.sigma {
        c.local.sigma = v;
    }
    if let Some(v) = a.penalty_mode {
        c.local.penalty_mode = penalty_mode(v);
    }
    if a.user.is_some() {
        c.classifier.user = a.user.clone();
    }
    if let Some(p) = &a.out_dir {
        c.output_dir = Some(path_string(p));
    }
    c.validate()?;
    Ok(c)
}

fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_rows(File::create(path).with_context(|| format!("creating {}", path.display()))?, rows)?;
    Ok(())
}

fn learn(mode: RunMode, a: RunArgs) -> Result<()> {
    let config = build_config(mode, &a)?;
    let schema = files::schema(config.schema.as_deref().ok_or_else(|| anyhow!("no schema given"))?)?;
    let items_path = PathBuf::from(config.items.as_deref().ok_or_else(|| anyhow!("no items given"))?);
    let items = files::items(&items_path, &schema)?;
    let pairs = match (&config.pairs, mode) {
        (Some(p), _) => Some(
            load_pairs(p, Some(&files::known_ids(&items))).with_context(|| format!("reading pairs {p}"))?,
        ),
        (None, RunMode::Classifier) => bail!("classifier mode needs --pairs"),
        (None, _) => None,
    };
    let oracle: Option<Box<dyn Oracle + Send + Sync>> = match (&config.oracle, mode) {
        (Some(spec), RunMode::Global | RunMode::Local) => Some(spec.build()?),
        (None, RunMode::Global | RunMode::Local) => bail!("this mode needs an oracle"),
        _ => None,
    };
    let inputs = Inputs {
        schema: &schema,
        items: &items,
        pairs: pairs.as_ref(),
        oracle: oracle.as_deref().map(|o| o as &dyn Oracle),
    };
    let out_dir = PathBuf::from(config.output_dir.clone().unwrap_or_else(|| "out".into()));
    files::ensure_dir(&out_dir)?;
    match mode {
        RunMode::Local => {
            let run = run_local(&config, &inputs)?;
            files::write_json(&out_dir.join("local_run.json"), &run)?;
            let mut rows: Vec<MetricsRow> = run.manifests.iter().map(|m| m.row.clone()).collect();
            rows.push(run.aggregate.clone());
            write_metrics(&out_dir.join("metrics.csv"), &rows)?;
            files::write_text(&out_dir.join("theories.lp"), &report(&run.manifests).theories)?;
            files::print_json(&json!({
                "queries": run.manifests.len(),
                "aggregate": run.aggregate,
                "exclusion_rate": run.exclusion_rate,
                "timed_out": run.manifests.iter().filter(|m| m.timed_out).count(),
                "out_dir": out_dir,
            }))
        }
        RunMode::Global | RunMode::Classifier => {
            let manifest = if mode == RunMode::Global {
                run_global(&config, &inputs)?
            } else {
                run_classifier(&config, &inputs)?
            };
            files::write_json(&out_dir.join("manifest.json"), &manifest)?;
            write_metrics(&out_dir.join("metrics.csv"), std::slice::from_ref(&manifest.row))?;
            files::write_text(&out_dir.join("theory.lp"), &report(std::slice::from_ref(&manifest)).theories)?;
            files::print_json(&json!({
                "row": manifest.row,
                "theory": manifest.theory,
                "optimal": manifest.optimal,
                "timed_out": manifest.timed_out,
                "out_dir": out_dir,
            }))
        }
    }
}

/// Item contexts, quantized with `factor` when given.
fn contexts(schema: &Schema, items: &[Item], factor: Option<u32>) -> Result<BTreeMap<u32, GroundAtomSet>> {
    let items = match factor {
        Some(f) => quantize(items, schema, f)?.0,
        None => items.to_vec(),
    };
    items
        .iter()
        .map(|i| {
            item_context(i, schema)
                .map(|c| (i.id, c))
                .with_context(|| format!("item {}; try --factor to quantize", i.id))
        })
        .collect()
}

type LabeledContexts = (Vec<(GroundAtomSet, GroundAtomSet)>, Vec<wcexplain::Label>);

fn labeled_contexts(schema_src: &str, items: &Path, pairs: &Path, factor: Option<u32>) -> Result<LabeledContexts> {
    let schema = files::schema(schema_src)?;
    let items = files::items(items, &schema)?;
    let ctx = contexts(&schema, &items, factor)?;
    let pairs = files::labeled_pairs(pairs, &items)?;
    Ok((
        pairs.iter().map(|p| (ctx[&p.first].clone(), ctx[&p.second].clone())).collect(),
        pairs.iter().map(|p| p.label.expect("checked")).collect(),
    ))
}

fn manifest_pairs(m: &RunManifest) -> Result<LabeledContexts> {
    let mut pairs = Vec::new();
    let mut labels = Vec::new();
    for p in &m.test_pairs {
        pairs.push((parse_facts(&p.first)?, parse_facts(&p.second)?));
        labels.push(p.label);
    }
    Ok((pairs, labels))
}

fn single_manifest(path: &Path) -> Result<RunManifest> {
    match ManifestFile::read(path)? {
        ManifestFile::Single(m) => Ok(m),
        _ => bail!("{} holds several runs; pass a single-run manifest", path.display()),
    }
}

fn read_theory(path: &Path) -> Result<Theory> {
    parse_theory(&files::read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn eval(a: EvalArgs) -> Result<()> {
    if let Some(path) = &a.manifest {
        let m = single_manifest(path)?;
        let recomputed = m.recompute()?;
        return files::print_json(&json!({
            "metrics": recomputed,
            "matches_stored": recomputed == m.metrics,
        }));
    }
    let theory = read_theory(a.theory.as_deref().ok_or_else(|| anyhow!("pass --manifest or --theory"))?)?;
    let (pairs, labels) = labeled_contexts(
        a.schema.as_deref().expect("required by clap"),
        a.items.as_deref().expect("required by clap"),
        a.pairs.as_deref().expect("required by clap"),
        a.factor,
    )?;
    files::print_json(&fidelity_report(&theory, &pairs, &labels)?)
}

fn ratings(schema: Option<&Schema>, extra: &[String]) -> Result<GtRatings> {
    let mut map: BTreeMap<String, u8> = match schema {
        Some(s) => GtRatings::from_schema(s)?.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        None => BTreeMap::new(),
    };
    for r in extra {
        let (f, g) = r.split_once('=').ok_or_else(|| anyhow!("--rating expects FEATURE=G, got `{r}`"))?;
        map.insert(f.trim().to_string(), g.trim().parse().with_context(|| format!("bad rating `{r}`"))?);
    }
    Ok(GtRatings::new(map)?)
}

fn gt_score(a: GtScoreArgs) -> Result<()> {
    let (theory, pairs, schema) = match &a.manifest {
        Some(path) => {
            let m = single_manifest(path)?;
            let source = a.schema.clone().or(m.config.schema.clone());
            let schema = source.as_deref().map(files::schema).transpose()?;
            (m.theory()?, manifest_pairs(&m)?.0, schema)
        }
        None => {
            let theory = read_theory(a.theory.as_deref().ok_or_else(|| anyhow!("pass --manifest or --theory"))?)?;
            let src = a.schema.as_deref().expect("required by clap");
            let (pairs, _) = labeled_contexts(
                src,
                a.items.as_deref().expect("required by clap"),
                a.pairs.as_deref().expect("required by clap"),
                a.factor,
            )?;
            (theory, pairs, Some(files::schema(src)?))
        }
    };
    let gt = gt_theory(&theory, &ratings(schema.as_ref(), &a.ratings)?)?;
    let scores = gt_report(&theory, &gt, &pairs)?;
    files::print_json(&json!({
        "gt_theory": render_theory(&gt.theory),
        "records": gt.records,
        "unrated": gt.unrated,
        "scores": scores,
    }))
}

fn mmd_cmd(a: MmdArgs) -> Result<()> {
    let x = files::numeric_table(&a.a, &a.drop)?;
    let y = files::numeric_table(&a.b, &a.drop)?;
    let bandwidth = match a.bandwidth {
        Some(b) => b,
        None => median_bandwidth(&x, &y)?,
    };
    files::print_json(&json!({
        "mmd": mmd(&x, &y, bandwidth)?,
        "bandwidth": bandwidth,
        "n_a": x.len(),
        "n_b": y.len(),
    }))
}

fn export_ilasp(a: ExportArgs) -> Result<()> {
    let task: LearningTask = match &a.task {
        Some(path) => files::read_json(path)?,
        None => {
            let src = a.schema.as_deref().ok_or_else(|| anyhow!("pass --task or --schema/--items/--pairs"))?;
            let schema = files::schema(src)?;
            let items = files::items(a.items.as_deref().expect("required by clap"), &schema)?;
            let pairs = files::labeled_pairs(a.pairs.as_deref().expect("required by clap"), &items)?;
            let pool: Vec<Vec<f64>> = items.iter().map(|i| i.vector(&schema)).collect();
            let featurizer = Featurizer::fit(&schema, &pool, &pool, PcaMode::None, true, a.factor)?;
            let bias = bias_for(
                &featurizer,
                &schema,
                &BiasConfig {
                    maxp: a.maxp,
                    ..BiasConfig::default()
                },
            );
            let mut named = Vec::new();
            let mut ctx = BTreeMap::new();
            for (item, raw) in items.iter().zip(&pool) {
                let c = featurizer.context(raw)?;
                named.push((format!("item{}", item.id), c.clone()));
                ctx.insert(item.id, c);
            }
            let used: std::collections::BTreeSet<u32> = pairs.iter().flat_map(|p| [p.first, p.second]).collect();
            named.retain(|(n, _)| used.iter().any(|id| *n == format!("item{id}")));
            let examples = orderings_from_labels(&pairs, &ctx, &vec![1; pairs.len()])?;
            LearningTask::from_examples(bias, &named, &examples)
        }
    };
    if let Some(out) = &a.task_out {
        files::write_json(out, &task)?;
    }
    let text = export_ilasp_task(&task.bias, &task.contexts()?, &task.ordering_examples()?);
    match &a.out {
        Some(out) => files::write_text(out, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let loaded = a
        .manifests
        .iter()
        .map(|p| ManifestFile::read(p))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for file in &loaded {
        match file {
            ManifestFile::Local(run) if a.aggregate => rows.push(run.aggregate.clone()),
            other => rows.extend(other.manifests().iter().map(|m| m.row.clone())),
        }
        all.extend(file.manifests().iter().cloned());
    }
    if rows.is_empty() {
        bail!("no runs in the given manifests");
    }
    let deltas: Vec<MetricsRow> = rows[1..].iter().map(|r| delta_row(&rows[0], r)).collect();
    files::ensure_dir(&a.out_dir)?;
    write_metrics(&a.out_dir.join("metrics.csv"), &rows)?;
    if !deltas.is_empty() {
        write_metrics(&a.out_dir.join("deltas.csv"), &deltas)?;
    }
    files::write_text(&a.out_dir.join("theories.lp"), &report(&all).theories)?;
    let refs: Vec<&MetricsRow> = rows.iter().collect();
    files::print_json(&json!({
        "runs": rows.len(),
        "deltas": deltas.len(),
        "mean": mean_row("mean (users weighted equally)", &refs),
    }))
}
