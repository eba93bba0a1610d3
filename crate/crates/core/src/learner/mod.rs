//! Learning weak-constraint theories from ordering examples.
//!
//! The hypothesis space is generated from a mode bias. A theory's score is
//! its length (total body atoms) plus the penalties of the ordering examples
//! it fails to cover; [`learn`] finds a minimum-score theory by
//! branch-and-bound and [`brute_force_learn`] checks it on small spaces.

mod brute;
mod ilasp;
mod search;
mod task;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asp::{
    compare, evaluate_cost, AspError, Atom, GroundAtomSet, Preference, Term, Theory,
    WeakConstraint, Weight,
};
use crate::dataset::PairSample;
use crate::label::Label;

pub use brute::{brute_force_learn, BRUTE_FORCE_MAX_CANDIDATES, BRUTE_FORCE_MAX_CONSTRAINTS};
pub use ilasp::export_ilasp_task;
pub use search::learn;
pub use task::{LearningTask, NamedContext, TaskExample};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Asp(#[from] AspError),
    #[error("pair {index} ({first}, {second}) has no label")]
    Unlabeled { index: usize, first: u32, second: u32 },
    #[error("no context for item {0}")]
    MissingContext(u32),
    #[error("{pairs} pairs but {penalties} penalties")]
    PenaltyCount { pairs: usize, penalties: usize },
    #[error("penalties must be at least 1 (example {0})")]
    ZeroPenalty(String),
    #[error("brute force is limited to {max_candidates} candidates and {max_constraints} constraints (got {candidates} and {constraints})")]
    BruteForceGuard {
        candidates: usize,
        constraints: usize,
        max_candidates: usize,
        max_constraints: usize,
    },
    #[error("unknown context `{0}` in task file")]
    UnknownContext(String),
    #[error("unknown ordering symbol `{0}`")]
    UnknownSymbol(String),
}

/// Weight shapes allowed in generated constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeightForm {
    #[serde(rename = "V1")]
    PlusVar,
    #[serde(rename = "-V1")]
    MinusVar,
    #[serde(rename = "1")]
    PlusOne,
    #[serde(rename = "-1")]
    MinusOne,
}

impl WeightForm {
    pub const ALL: [WeightForm; 4] = [
        WeightForm::PlusVar,
        WeightForm::MinusVar,
        WeightForm::PlusOne,
        WeightForm::MinusOne,
    ];

    pub fn weight(self) -> Weight {
        match self {
            WeightForm::PlusVar => Weight::PLUS_VAR,
            WeightForm::MinusVar => Weight::MINUS_VAR,
            WeightForm::PlusOne => Weight::Const(1),
            WeightForm::MinusOne => Weight::Const(-1),
        }
    }

    pub fn is_var(self) -> bool {
        matches!(self, WeightForm::PlusVar | WeightForm::MinusVar)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeBias {
    pub value_features: Vec<String>,
    #[serde(default)]
    pub category_constants: Vec<i64>,
    pub weight_forms: Vec<WeightForm>,
    pub maxp: u32,
    #[serde(default)]
    pub allow_category_condition: bool,
    #[serde(default)]
    pub allow_category_only: bool,
}

impl ModeBias {
    /// Value constraints over `features` with all four weight forms.
    pub fn over_features<S: AsRef<str>>(features: &[S], maxp: u32) -> ModeBias {
        ModeBias {
            value_features: features.iter().map(|f| f.as_ref().to_string()).collect(),
            category_constants: Vec::new(),
            weight_forms: WeightForm::ALL.to_vec(),
            maxp,
            allow_category_condition: false,
            allow_category_only: false,
        }
    }

    /// The bias always uses a single variable.
    pub fn maxv(&self) -> u32 {
        1
    }
}

/// Sort key for candidates: feature, weight form, level, then any remaining
/// body atoms. Theories are compared by their sorted key lists.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CandidateKey {
    feature: String,
    weight: (u8, i64),
    level: u32,
    rest: String,
}

impl CandidateKey {
    pub fn of(wc: &WeakConstraint) -> CandidateKey {
        let value_atom = wc
            .body
            .iter()
            .position(|a| a.predicate == "value" && a.args.len() == 2);
        let feature = value_atom
            .map(|i| wc.body[i].args[0].to_string())
            .unwrap_or_default();
        let rest = wc
            .body
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != value_atom)
            .map(|(_, a)| a.to_string())
            .chain(wc.terms.iter().map(|t| t.to_string()))
            .collect::<Vec<_>>()
            .join(";");
        let weight = match wc.weight {
            Weight::Var { negated: false } => (0, 0),
            Weight::Var { negated: true } => (1, 0),
            Weight::Const(1) => (2, 0),
            Weight::Const(-1) => (3, 0),
            Weight::Const(w) => (4, w),
        };
        CandidateKey {
            feature,
            weight,
            level: wc.level,
            rest,
        }
    }

    fn with_level(&self, level: u32) -> CandidateKey {
        CandidateKey {
            level,
            ..self.clone()
        }
    }
}

/// Candidate constraints, kept in canonical key order.
#[derive(Clone, Debug)]
pub struct HypothesisSpace {
    maxp: u32,
    candidates: Vec<WeakConstraint>,
    keys: Vec<CandidateKey>,
}

impl HypothesisSpace {
    pub fn new(maxp: u32, candidates: Vec<WeakConstraint>) -> Result<HypothesisSpace, AspError> {
        let maxp = maxp.max(1);
        let mut pairs: BTreeMap<CandidateKey, WeakConstraint> = BTreeMap::new();
        for wc in candidates {
            if wc.level > maxp {
                return Err(AspError::LevelAboveMaxp {
                    level: wc.level,
                    maxp,
                });
            }
            pairs.entry(CandidateKey::of(&wc)).or_insert(wc);
        }
        let (keys, candidates) = pairs.into_iter().unzip();
        Ok(HypothesisSpace {
            maxp,
            candidates,
            keys,
        })
    }

    pub fn maxp(&self) -> u32 {
        self.maxp
    }

    pub fn candidates(&self) -> &[WeakConstraint] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Body length of each candidate.
    pub fn lengths(&self) -> Vec<usize> {
        self.candidates.iter().map(WeakConstraint::length).collect()
    }

    pub(crate) fn key(&self, index: usize) -> &CandidateKey {
        &self.keys[index]
    }
}

pub fn expand_mode_bias(bias: &ModeBias) -> HypothesisSpace {
    let mut out = Vec::new();
    for level in 1..=bias.maxp.max(1) {
        for feature in &bias.value_features {
            for &form in &bias.weight_forms {
                out.push(WeakConstraint::on_value(feature, form.weight(), level));
                if bias.allow_category_condition {
                    for &c in &bias.category_constants {
                        out.push(WeakConstraint {
                            body: vec![
                                Atom::value_var(feature),
                                Atom::new("category", vec![Term::Int(c)]),
                            ],
                            weight: form.weight(),
                            level,
                            terms: vec![Term::Var],
                        });
                    }
                }
            }
        }
        if bias.allow_category_only {
            for &c in &bias.category_constants {
                for w in [1, -1] {
                    out.push(WeakConstraint {
                        body: vec![Atom::new("category", vec![Term::Int(c)])],
                        weight: Weight::Const(w),
                        level,
                        terms: vec![Term::Int(c)],
                    });
                }
            }
        }
    }
    HypothesisSpace::new(bias.maxp, out).expect("generated levels are within maxp")
}

/// Relation symbol of an ordering example, in ILASP's convention: `<` asks
/// for the first context to be preferred (lower cost).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderSymbol {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl OrderSymbol {
    pub fn from_label(label: Label) -> OrderSymbol {
        match label {
            Label::First => OrderSymbol::Lt,
            Label::Uncertain => OrderSymbol::Eq,
            Label::Second => OrderSymbol::Gt,
        }
    }

    pub fn accepts(self, pref: Preference) -> bool {
        matches!(
            (self, pref),
            (OrderSymbol::Lt, Preference::First)
                | (OrderSymbol::Gt, Preference::Second)
                | (OrderSymbol::Eq, Preference::Tie)
                | (OrderSymbol::Le, Preference::First | Preference::Tie)
                | (OrderSymbol::Ge, Preference::Second | Preference::Tie)
        )
    }

    pub fn is_strict(self) -> bool {
        matches!(self, OrderSymbol::Lt | OrderSymbol::Gt)
    }
}

impl fmt::Display for OrderSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderSymbol::Lt => "<",
            OrderSymbol::Gt => ">",
            OrderSymbol::Eq => "=",
            OrderSymbol::Le => "<=",
            OrderSymbol::Ge => ">=",
        })
    }
}

impl std::str::FromStr for OrderSymbol {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "<" => Ok(OrderSymbol::Lt),
            ">" => Ok(OrderSymbol::Gt),
            "=" => Ok(OrderSymbol::Eq),
            "<=" => Ok(OrderSymbol::Le),
            ">=" => Ok(OrderSymbol::Ge),
            other => Err(LearnError::UnknownSymbol(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingExample {
    pub id: String,
    pub first: GroundAtomSet,
    pub second: GroundAtomSet,
    pub symbol: OrderSymbol,
    pub penalty: u32,
}

impl OrderingExample {
    pub fn new(
        id: impl Into<String>,
        first: GroundAtomSet,
        second: GroundAtomSet,
        symbol: OrderSymbol,
        penalty: u32,
    ) -> Result<OrderingExample, LearnError> {
        let id = id.into();
        if penalty == 0 {
            return Err(LearnError::ZeroPenalty(id));
        }
        Ok(OrderingExample {
            id,
            first,
            second,
            symbol,
            penalty,
        })
    }
}

/// Ordering examples for labeled pairs, one per pair, ids `o0, o1, ...`.
pub fn orderings_from_labels(
    pairs: &[PairSample],
    contexts: &BTreeMap<u32, GroundAtomSet>,
    penalties: &[u32],
) -> Result<Vec<OrderingExample>, LearnError> {
    if pairs.len() != penalties.len() {
        return Err(LearnError::PenaltyCount {
            pairs: pairs.len(),
            penalties: penalties.len(),
        });
    }
    pairs
        .iter()
        .zip(penalties)
        .enumerate()
        .map(|(i, (pair, &penalty))| {
            let label = pair.label.ok_or(LearnError::Unlabeled {
                index: i,
                first: pair.first,
                second: pair.second,
            })?;
            let ctx = |id: u32| contexts.get(&id).cloned().ok_or(LearnError::MissingContext(id));
            OrderingExample::new(
                format!("o{i}"),
                ctx(pair.first)?,
                ctx(pair.second)?,
                OrderSymbol::from_label(label),
                penalty,
            )
        })
        .collect()
}

pub fn covers(theory: &Theory, example: &OrderingExample) -> Result<bool, AspError> {
    let a = evaluate_cost(&example.first, theory)?;
    let b = evaluate_cost(&example.second, theory)?;
    Ok(example.symbol.accepts(compare(&a, &b)?))
}

/// Theory length plus the penalties of uncovered examples.
pub fn objective(theory: &Theory, examples: &[OrderingExample]) -> Result<u64, AspError> {
    let mut total = theory.length() as u64;
    for ex in examples {
        if !covers(theory, ex)? {
            total += u64::from(ex.penalty);
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LearnBudget {
    /// Cap on the number of constraints; `None` means the space's `maxp`.
    pub max_constraints: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Run a heuristic beam search of this width instead of the exact search.
    pub beam_width: Option<usize>,
}

impl LearnBudget {
    pub fn max_constraints_for(&self, space: &HypothesisSpace) -> usize {
        self.max_constraints.unwrap_or(space.maxp() as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Exact,
    Beam,
    BruteForce,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnOutcome {
    pub theory: Theory,
    pub objective: u64,
    /// True when the result is a proven optimum.
    pub optimal: bool,
    pub timed_out: bool,
    pub strategy: Strategy,
    pub nodes: u64,
}

/// Orders `(objective, constraint count, sorted keys)`; smaller wins.
pub(crate) fn tie_break(
    a: (u64, &[CandidateKey]),
    b: (u64, &[CandidateKey]),
) -> Ordering {
    a.0.cmp(&b.0)
        .then(a.1.len().cmp(&b.1.len()))
        .then_with(|| a.1.cmp(b.1))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::asp::parse_facts;

    /// The three items and orderings of the small `value(p, ...)` example.
    pub fn example_two() -> (ModeBias, Vec<(String, GroundAtomSet)>, Vec<OrderingExample>) {
        let bias = ModeBias {
            value_features: vec!["p".into()],
            category_constants: vec![1, 2],
            weight_forms: WeightForm::ALL.to_vec(),
            maxp: 2,
            allow_category_condition: false,
            allow_category_only: false,
        };
        let items: Vec<(String, GroundAtomSet)> = [
            ("item0", "category(2). value(p, 1)."),
            ("item1", "category(1). value(p, 2)."),
            ("item2", "category(2). value(p, 3)."),
        ]
        .iter()
        .map(|(id, facts)| (id.to_string(), parse_facts(facts).unwrap()))
        .collect();
        let ex = |id: &str, a: usize, b: usize, s: OrderSymbol, p: u32| {
            OrderingExample::new(id, items[a].1.clone(), items[b].1.clone(), s, p).unwrap()
        };
        let examples = vec![
            ex("o0", 2, 1, OrderSymbol::Gt, 2),
            ex("o1", 2, 0, OrderSymbol::Gt, 2),
            ex("o2", 1, 0, OrderSymbol::Lt, 1),
        ];
        (bias, items, examples)
    }
}
