//! Feature schemas, item and pair files, ingredient aggregation and integer
//! quantization.
//!
//! Items are CSV rows `id, name, <features...>, link`. An item file may start
//! with a `# schema: <name> v<version>` comment so a later stage can check it
//! reads what an earlier stage wrote. Pair files are rows
//! `user, id1, id2, label` with an empty label for unlabeled pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asp::{AspError, Atom, GroundAtomSet, Term};
use crate::label::Label;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: value {value} of `{feature}` is outside its domain")]
    Domain { row: usize, feature: String, value: f64 },
    #[error("row {row}: `{text}` in column `{column}` is not a number")]
    Number { row: usize, column: String, text: String },
    #[error("row {row}: unknown item id {id}")]
    UnknownItem { row: usize, id: u32 },
    #[error("row {row}: label {value} is not one of -1, 0, 1")]
    Label { row: usize, value: String },
    #[error("row {row}: pair ({id}, {id}) compares an item with itself")]
    SelfPair { row: usize, id: u32 },
    #[error("pair ({0}, {0}) compares an item with itself")]
    SamePair(u32),
    #[error("class `{0}` has no meta-class")]
    UnknownClass(String),
    #[error("quantization factor must be at least 1")]
    Factor,
    #[error("value {value} of `{feature}` is not an integer; quantize first")]
    NotInteger { feature: String, value: f64 },
    #[error(transparent)]
    Asp(#[from] AspError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Ordinal,
    Categorical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    #[default]
    Scalar,
    Ingredient,
    Preparation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Closed range; a missing `hi` means unbounded above.
    Range { lo: f64, hi: Option<f64> },
    Categories(Vec<i64>),
}

impl Domain {
    pub fn contains(&self, v: f64) -> bool {
        match self {
            Domain::Range { lo, hi } => v >= *lo && hi.is_none_or(|h| v <= h),
            Domain::Categories(cs) => v.fract() == 0.0 && cs.contains(&(v as i64)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_rating: Option<u8>,
    #[serde(default)]
    pub group: FeatureGroup,
}

impl FeatureSpec {
    pub fn continuous(name: &str, lo: f64, hi: Option<f64>) -> FeatureSpec {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            domain: Domain::Range { lo, hi },
            gt_rating: None,
            group: FeatureGroup::Scalar,
        }
    }

    pub fn ordinal(name: &str, lo: i64, hi: i64) -> FeatureSpec {
        FeatureSpec {
            kind: FeatureKind::Ordinal,
            domain: Domain::Range {
                lo: lo as f64,
                hi: Some(hi as f64),
            },
            ..FeatureSpec::continuous(name, 0.0, None)
        }
    }

    pub fn categorical(name: &str, categories: Vec<i64>) -> FeatureSpec {
        FeatureSpec {
            kind: FeatureKind::Categorical,
            domain: Domain::Categories(categories),
            ..FeatureSpec::continuous(name, 0.0, None)
        }
    }

    pub fn in_group(mut self, group: FeatureGroup) -> FeatureSpec {
        self.group = group;
        self
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == FeatureKind::Categorical
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub version: u32,
    pub features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn new(name: &str, features: Vec<FeatureSpec>) -> Result<Schema, DatasetError> {
        let schema = Schema {
            name: name.to_string(),
            version: 1,
            features,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(DatasetError::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if matches!(f.name.as_str(), "id" | "name" | "link") {
                return Err(DatasetError::Schema(format!("`{}` is a reserved column", f.name)));
            }
            match (&f.kind, &f.domain) {
                (FeatureKind::Categorical, Domain::Categories(cs)) if !cs.is_empty() => {}
                (FeatureKind::Categorical, _) => {
                    return Err(DatasetError::Schema(format!(
                        "categorical `{}` needs a non-empty category list",
                        f.name
                    )))
                }
                (_, Domain::Range { lo, hi }) if hi.is_none_or(|h| *lo <= h) => {}
                _ => {
                    return Err(DatasetError::Schema(format!(
                        "`{}` needs a range with lo <= hi",
                        f.name
                    )))
                }
            }
            if let Some(g) = f.gt_rating {
                if !(1..=10).contains(&g) {
                    return Err(DatasetError::Schema(format!(
                        "rating {g} of `{}` is outside 1..=10",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn categorical_mask(&self) -> Vec<bool> {
        self.features.iter().map(FeatureSpec::is_categorical).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Schema, DatasetError> {
        let schema: Schema = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    fn header_comment(&self) -> String {
        format!("# schema: {} v{}", self.name, self.version)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: u32,
    pub name: String,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
}

impl Item {
    pub fn get(&self, feature: &str) -> Option<f64> {
        self.values.get(feature).copied()
    }

    /// Values in schema order; features the item lacks read as 0.
    pub fn vector(&self, schema: &Schema) -> Vec<f64> {
        schema
            .features
            .iter()
            .map(|f| self.get(&f.name).unwrap_or(0.0))
            .collect()
    }

    pub fn from_vector(id: u32, name: &str, schema: &Schema, values: &[f64]) -> Item {
        Item {
            id,
            name: name.to_string(),
            values: schema
                .features
                .iter()
                .zip(values)
                .map(|(f, &v)| (f.name.clone(), v))
                .collect(),
            link: None,
        }
    }
}

/// Bundled schema of the recipes dataset. `meta` selects the 12 ingredient
/// meta-classes instead of the 36 classes.
pub fn recipes_schema(meta: bool) -> Schema {
    let mut features = vec![
        FeatureSpec::categorical("category", (1..=5).collect()),
        FeatureSpec::ordinal("cost", 1, 5),
        FeatureSpec::ordinal("difficulty", 1, 4),
        FeatureSpec::continuous("prep_time", 0.0, None),
    ];
    let ingredients: Vec<String> = if meta {
        ClassMap::bundled().meta_classes()
    } else {
        ClassMap::bundled().classes()
    };
    for name in ingredients {
        features.push(FeatureSpec::continuous(&name, 0.0, None).in_group(FeatureGroup::Ingredient));
    }
    for name in PREPARATIONS {
        features.push(FeatureSpec::continuous(name, 0.0, None).in_group(FeatureGroup::Preparation));
    }
    let name = if meta { "recipes-meta" } else { "recipes-class" };
    Schema::new(name, features).expect("bundled schema is valid")
}

pub const PREPARATIONS: [&str; 9] = [
    "baking",
    "boiling",
    "browning",
    "frying",
    "grilling",
    "marinating",
    "mixing",
    "steaming",
    "stewing",
];

const BUNDLED_CLASSES: [(&str, &[&str]); 12] = [
    ("cereals", &["cereals"]),
    (
        "dairies",
        &["butter", "cheese", "milk_and_cream", "soft_cheese", "yogurt"],
    ),
    ("eggs", &["eggs"]),
    ("flouries", &["bread", "flour"]),
    (
        "fruit",
        &["berries", "citrus_fruits", "nuts", "salty_fruits", "sweet_fruits"],
    ),
    (
        "herb_spices_seasonings",
        &["broth", "condiments", "herbs", "spices", "wines_and_spirits"],
    ),
    (
        "meat",
        &[
            "beef",
            "chicken_meat",
            "pork_meat",
            "rabbit_meat",
            "sheep_meat",
            "turkey_meat",
        ],
    ),
    ("mushrooms_and_truffles", &["mushrooms"]),
    ("pasta", &["dry_pasta", "fresh_pasta"]),
    ("seafood", &["lake_fish", "molluscs", "sea_fish", "shellfish"]),
    ("sweeteners", &["sweeteners"]),
    ("vegetables", &["greens", "legumes", "vegetables"]),
];

/// Ingredient class → meta-class assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    /// Meta-classes in column order, each with its classes in column order.
    pub meta: Vec<(String, Vec<String>)>,
}

impl ClassMap {
    /// The 36 classes and 12 meta-classes of the recipes dataset.
    pub fn bundled() -> ClassMap {
        ClassMap {
            meta: BUNDLED_CLASSES
                .iter()
                .map(|(m, cs)| (m.to_string(), cs.iter().map(|c| c.to_string()).collect()))
                .collect(),
        }
    }

    pub fn new(meta: Vec<(String, Vec<String>)>) -> Result<ClassMap, DatasetError> {
        let map = ClassMap { meta };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = BTreeSet::new();
        for (m, cs) in &self.meta {
            for c in cs {
                if !seen.insert(c) {
                    return Err(DatasetError::Schema(format!(
                        "class `{c}` is assigned twice (last to `{m}`)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn meta_classes(&self) -> Vec<String> {
        self.meta.iter().map(|(m, _)| m.clone()).collect()
    }

    pub fn classes(&self) -> Vec<String> {
        self.meta.iter().flat_map(|(_, cs)| cs.iter().cloned()).collect()
    }

    pub fn meta_of(&self, class: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(_, cs)| cs.iter().any(|c| c == class))
            .map(|(m, _)| m.as_str())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ClassMap, DatasetError> {
        let map: ClassMap = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        map.validate()?;
        Ok(map)
    }
}

/// Schema with the ingredient features of `schema` replaced by meta-classes,
/// inserted where the first ingredient column was.
pub fn meta_schema(schema: &Schema, map: &ClassMap) -> Result<Schema, DatasetError> {
    let mut features = Vec::new();
    let mut placed = false;
    for f in &schema.features {
        if f.group != FeatureGroup::Ingredient {
            features.push(f.clone());
            continue;
        }
        if map.meta_of(&f.name).is_none() {
            return Err(DatasetError::UnknownClass(f.name.clone()));
        }
        if !placed {
            placed = true;
            for m in map.meta_classes() {
                features.push(FeatureSpec::continuous(&m, 0.0, None).in_group(FeatureGroup::Ingredient));
            }
        }
    }
    Schema::new(&format!("{}-meta", schema.name), features)
}

/// Sums class-level ingredient values into their meta-classes.
pub fn aggregate_ingredients(item: &Item, schema: &Schema, map: &ClassMap) -> Result<Item, DatasetError> {
    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    let mut meta: BTreeMap<String, f64> = map.meta_classes().into_iter().map(|m| (m, 0.0)).collect();
    for f in &schema.features {
        let v = item.get(&f.name).unwrap_or(0.0);
        if f.group == FeatureGroup::Ingredient {
            let m = map
                .meta_of(&f.name)
                .ok_or_else(|| DatasetError::UnknownClass(f.name.clone()))?;
            *meta.get_mut(m).unwrap() += v;
        } else {
            values.insert(f.name.clone(), v);
        }
    }
    values.extend(meta);
    Ok(Item {
        values,
        ..item.clone()
    })
}

pub fn load_items(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<Item>, DatasetError> {
    read_items(File::open(path)?, schema)
}

pub fn read_items<R: Read>(reader: R, schema: &Schema) -> Result<Vec<Item>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("id").ok_or_else(|| DatasetError::MissingColumn("id".into()))?;
    let name_col = col("name");
    let link_col = col("link");
    let feature_cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| col(&f.name).ok_or_else(|| DatasetError::MissingColumn(f.name.clone())))
        .collect::<Result<_, _>>()?;

    let mut items = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let id_text = field(id_col);
        let id = id_text.parse::<u32>().map_err(|_| DatasetError::Number {
            row,
            column: "id".into(),
            text: id_text.into(),
        })?;
        let mut values = BTreeMap::new();
        for (f, &c) in schema.features.iter().zip(&feature_cols) {
            let text = field(c);
            let v: f64 = text.parse().map_err(|_| DatasetError::Number {
                row,
                column: f.name.clone(),
                text: text.into(),
            })?;
            if !v.is_finite() || !f.domain.contains(v) {
                return Err(DatasetError::Domain {
                    row,
                    feature: f.name.clone(),
                    value: v,
                });
            }
            values.insert(f.name.clone(), v);
        }
        items.push(Item {
            id,
            name: name_col.map(|c| field(c).to_string()).unwrap_or_default(),
            values,
            link: link_col.map(|c| field(c).to_string()).filter(|l| !l.is_empty()),
        });
    }
    Ok(items)
}

pub fn save_items(path: impl AsRef<Path>, schema: &Schema, items: &[Item]) -> Result<(), DatasetError> {
    write_items(File::create(path)?, schema, items)
}

pub fn write_items<W: Write>(mut writer: W, schema: &Schema, items: &[Item]) -> Result<(), DatasetError> {
    writeln!(writer, "{}", schema.header_comment())?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id", "name"];
    header.extend(schema.names());
    header.push("link");
    w.write_record(&header)?;
    for item in items {
        let mut row = vec![item.id.to_string(), item.name.clone()];
        row.extend(item.vector(schema).iter().map(|v| v.to_string()));
        row.push(item.link.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `# schema:` comment of an item file, if present.
pub fn item_file_schema_tag(path: impl AsRef<Path>) -> Result<Option<String>, DatasetError> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    Ok(line
        .trim()
        .strip_prefix("# schema:")
        .map(|s| s.trim().to_string()))
}

/// An ordered pair of items with an optional ternary label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairSample {
    pub first: u32,
    pub second: u32,
    pub label: Option<Label>,
}

impl PairSample {
    pub fn new(first: u32, second: u32) -> Result<PairSample, DatasetError> {
        if first == second {
            return Err(DatasetError::SamePair(first));
        }
        Ok(PairSample {
            first,
            second,
            label: None,
        })
    }

    pub fn labeled(first: u32, second: u32, label: Label) -> Result<PairSample, DatasetError> {
        Ok(PairSample {
            label: Some(label),
            ..PairSample::new(first, second)?
        })
    }

    pub fn with_label(self, label: Label) -> PairSample {
        PairSample {
            label: Some(label),
            ..self
        }
    }
}

/// Pairs grouped by user, in file order within each user.
pub type UserPairs = BTreeMap<String, Vec<PairSample>>;

/// Reads `user, id1, id2, label` rows. With `known` given, ids outside it are
/// rejected.
pub fn load_pairs(path: impl AsRef<Path>, known: Option<&BTreeSet<u32>>) -> Result<UserPairs, DatasetError> {
    read_pairs(File::open(path)?, known)
}

pub fn read_pairs<R: Read>(reader: R, known: Option<&BTreeSet<u32>>) -> Result<UserPairs, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.into()))
    };
    let (user_col, a_col, b_col, label_col) = (col("user")?, col("id1")?, col("id2")?, col("label")?);
    let mut out = UserPairs::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let id = |c: usize, name: &str| -> Result<u32, DatasetError> {
            let text = field(c);
            let id = text.parse::<u32>().map_err(|_| DatasetError::Number {
                row,
                column: name.into(),
                text: text.into(),
            })?;
            if known.is_some_and(|k| !k.contains(&id)) {
                return Err(DatasetError::UnknownItem { row, id });
            }
            Ok(id)
        };
        let (a, b) = (id(a_col, "id1")?, id(b_col, "id2")?);
        if a == b {
            return Err(DatasetError::SelfPair { row, id: a });
        }
        let text = field(label_col);
        let label = if text.is_empty() {
            None
        } else {
            let bad = || DatasetError::Label {
                row,
                value: text.into(),
            };
            let v: i64 = text.parse().map_err(|_| bad())?;
            Some(Label::try_from(v).map_err(|_| bad())?)
        };
        out.entry(field(user_col).to_string()).or_default().push(PairSample {
            first: a,
            second: b,
            label,
        });
    }
    Ok(out)
}

pub fn save_pairs(path: impl AsRef<Path>, pairs: &UserPairs) -> Result<(), DatasetError> {
    write_pairs(File::create(path)?, pairs)
}

pub fn write_pairs<W: Write>(writer: W, pairs: &UserPairs) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user", "id1", "id2", "label"])?;
    for (user, list) in pairs {
        for p in list {
            w.write_record([
                user.clone(),
                p.first.to_string(),
                p.second.to_string(),
                p.label.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-feature shift and common factor of an integer quantization;
/// `q = round((v - shift) * factor)` for non-categorical features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantization {
    pub factor: u32,
    /// Shift per column; `None` for categorical columns, which pass through.
    pub shifts: Vec<Option<f64>>,
}

impl Quantization {
    /// Shifts fitted so each non-categorical column's minimum maps to 0.
    pub fn fit(rows: &[Vec<f64>], categorical: &[bool], factor: u32) -> Result<Quantization, DatasetError> {
        if factor == 0 {
            return Err(DatasetError::Factor);
        }
        let shifts = categorical
            .iter()
            .enumerate()
            .map(|(j, &cat)| {
                let min = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                (!cat).then_some(if min.is_finite() { min } else { 0.0 })
            })
            .collect();
        Ok(Quantization { factor, shifts })
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.shifts)
            .map(|(&v, s)| match s {
                Some(s) => round_half_away((v - s) * f64::from(self.factor)),
                None => v,
            })
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }

    /// Approximate original values of a quantized row.
    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.shifts)
            .map(|(&q, s)| match s {
                Some(s) => q / f64::from(self.factor) + s,
                None => q,
            })
            .collect()
    }
}

/// Rounds half away from zero, independent of platform rounding modes.
pub fn round_half_away(v: f64) -> f64 {
    v.round()
}

/// Quantizes items in place of their values; see [`Quantization`].
pub fn quantize(items: &[Item], schema: &Schema, factor: u32) -> Result<(Vec<Item>, Quantization), DatasetError> {
    let rows: Vec<Vec<f64>> = items.iter().map(|i| i.vector(schema)).collect();
    let q = Quantization::fit(&rows, &schema.categorical_mask(), factor)?;
    let out = items
        .iter()
        .zip(q.apply(&rows))
        .map(|(item, row)| Item {
            values: schema
                .features
                .iter()
                .zip(row)
                .map(|(f, v)| (f.name.clone(), v))
                .collect(),
            ..item.clone()
        })
        .collect();
    Ok((out, q))
}

/// Ground facts describing one item: `category(c)` for a categorical feature
/// named `category`, `value(f, v)` for every other feature. Values must be
/// integers.
pub fn context_from_values(names: &[&str], values: &[f64]) -> Result<GroundAtomSet, DatasetError> {
    let mut atoms = Vec::with_capacity(names.len());
    for (&name, &v) in names.iter().zip(values) {
        if v.fract() != 0.0 || !v.is_finite() {
            return Err(DatasetError::NotInteger {
                feature: name.to_string(),
                value: v,
            });
        }
        let v = v as i64;
        if name == "category" {
            atoms.push(Atom::new("category", vec![Term::Int(v)]));
        } else {
            atoms.push(Atom::value(name, v));
        }
    }
    Ok(GroundAtomSet::new(atoms)?)
}

pub fn item_context(item: &Item, schema: &Schema) -> Result<GroundAtomSet, DatasetError> {
    context_from_values(&schema.names(), &item.vector(schema))
}
