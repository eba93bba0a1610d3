use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use wcexplain::dataset::{item_file_schema_tag, load_items, load_pairs, recipes_schema, Item, PairSample, Schema};
use wcexplain::oracle::OracleSpec;
use wcexplain::pipeline::{LocalRun, RunManifest};

use crate::args::OracleArgs;

/// `recipes` and `recipes-meta` name the bundled schemas; anything else is a
/// JSON file.
pub fn schema(source: &str) -> Result<Schema> {
    match source {
        "recipes" => Ok(recipes_schema(false)),
        "recipes-meta" => Ok(recipes_schema(true)),
        path => Schema::load(path).with_context(|| format!("reading schema {path}")),
    }
}

/// Items checked against the schema tag of the file, when it has one.
pub fn items(path: &Path, schema: &Schema) -> Result<Vec<Item>> {
    if let Some(tag) = item_file_schema_tag(path).with_context(|| format!("reading {}", path.display()))? {
        let name = tag.split_whitespace().next().unwrap_or_default();
        if name != schema.name {
            bail!("{} was written for schema `{name}`, not `{}`", path.display(), schema.name);
        }
    }
    load_items(path, schema).with_context(|| format!("reading items {}", path.display()))
}

pub fn known_ids(items: &[Item]) -> std::collections::BTreeSet<u32> {
    items.iter().map(|i| i.id).collect()
}

/// All users' pairs in user order, each required to carry a label.
pub fn labeled_pairs(path: &Path, items: &[Item]) -> Result<Vec<PairSample>> {
    let users = load_pairs(path, Some(&known_ids(items))).with_context(|| format!("reading pairs {}", path.display()))?;
    let pairs: Vec<PairSample> = users.into_values().flatten().collect();
    if let Some(p) = pairs.iter().find(|p| p.label.is_none()) {
        bail!("pair ({}, {}) in {} has no label", p.first, p.second, path.display());
    }
    Ok(pairs)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// The oracle named on the command line, if any.
pub fn oracle_spec(args: &OracleArgs) -> Result<Option<OracleSpec>> {
    Ok(if let Some(path) = &args.oracle {
        Some(read_json(path)?)
    } else if let Some(path) = &args.mlp {
        Some(OracleSpec::BuiltinMlp { model: path.clone() })
    } else if let Some(path) = &args.table {
        Some(OracleSpec::Table { path: path.clone() })
    } else {
        args.command.as_ref().map(|argv| OracleSpec::Command { argv: argv.clone() })
    })
}

/// What a manifest file may hold.
pub enum ManifestFile {
    Single(RunManifest),
    Many(Vec<RunManifest>),
    Local(LocalRun),
}

impl ManifestFile {
    pub fn read(path: &Path) -> Result<ManifestFile> {
        let value: serde_json::Value = read_json(path)?;
        let parsed = if value.is_array() {
            serde_json::from_value(value).map(ManifestFile::Many)
        } else if value.get("manifests").is_some() {
            serde_json::from_value(value).map(ManifestFile::Local)
        } else {
            serde_json::from_value(value).map(ManifestFile::Single)
        };
        parsed.with_context(|| format!("{} is not a run manifest", path.display()))
    }

    pub fn manifests(&self) -> &[RunManifest] {
        match self {
            ManifestFile::Single(m) => std::slice::from_ref(m),
            ManifestFile::Many(ms) => ms,
            ManifestFile::Local(run) => &run.manifests,
        }
    }
}

/// Numeric columns of a CSV, skipping `drop` columns and `#` comments.
pub fn numeric_table(path: &Path, drop: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&c| !drop.iter().any(|d| d == &headers[c])).collect();
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = keep
            .iter()
            .map(|&c| {
                let text = record.get(c).unwrap_or("");
                text.parse::<f64>()
                    .with_context(|| format!("{} row {r}, column `{}`: not a number: `{text}`", path.display(), &headers[c]))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
