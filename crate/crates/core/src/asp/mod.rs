//! Weak constraints and their cost semantics.
//!
//! A weak constraint `:~ b1, ..., bn.[w@l, t1, ..., tm]` charges weight `w`
//! at priority level `l` for every binding of its variable that makes the
//! whole body true. Bindings that yield the same `(w, l, t1..tm)` tuple are
//! charged once. Two contexts are compared level by level starting from the
//! highest one; the first level at which the costs differ decides, and the
//! lower cost wins.
//!
//! Item contexts here are plain fact sets, so every context has exactly one
//! answer set and evaluation reduces to matching bodies against the facts.

mod text;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;

pub use text::{
    gloss_constraint, gloss_theory, parse_facts, parse_theory, render_constraint, render_facts,
    render_theory,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AspError {
    #[error("constraint `{constraint}` binds V1 to `{term}`, which is not an integer weight")]
    NonIntegerWeight { constraint: String, term: String },
    #[error("cost vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid weak constraint: {0}")]
    InvalidConstraint(String),
    #[error("constraint at level {level} exceeds maxp {maxp}")]
    LevelAboveMaxp { level: u32, maxp: u32 },
    #[error("atom `{0}` is not ground")]
    NonGroundAtom(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Argument of an atom. The only variable allowed is `V1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Int(i64),
    Sym(String),
    Var,
}

impl Term {
    pub fn sym(name: impl Into<String>) -> Term {
        Term::Sym(name.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var)
    }

    fn substitute(&self, binding: Option<&Term>) -> Term {
        match (self, binding) {
            (Term::Var, Some(bound)) => bound.clone(),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(v) => write!(f, "{v}"),
            Term::Sym(s) => f.write_str(s),
            Term::Var => f.write_str("V1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// `value(feature, v)`, the fact shape used for numeric item features.
    pub fn value(feature: &str, v: i64) -> Atom {
        Atom::new("value", vec![Term::sym(feature), Term::Int(v)])
    }

    /// `value(feature, V1)`, the body atom of the generated constraints.
    pub fn value_var(feature: &str) -> Atom {
        Atom::new("value", vec![Term::sym(feature), Term::Var])
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(Term::is_var)
    }

    pub fn has_var(&self) -> bool {
        self.args.iter().any(Term::is_var)
    }

    fn substitute(&self, binding: Option<&Term>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|t| t.substitute(binding)).collect(),
        }
    }

    /// If `ground` is an instance of this atom, the term bound to `V1`
    /// (`None` inside `Some` when the atom has no variable).
    fn match_ground(&self, ground: &Atom) -> Option<Option<Term>> {
        if self.predicate != ground.predicate || self.args.len() != ground.args.len() {
            return None;
        }
        let mut bound: Option<Term> = None;
        for (pattern, value) in self.args.iter().zip(&ground.args) {
            match pattern {
                Term::Var => match &bound {
                    Some(b) if b != value => return None,
                    Some(_) => {}
                    None => bound = Some(value.clone()),
                },
                constant if constant != value => return None,
                _ => {}
            }
        }
        Some(bound)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, arg) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{arg}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A finite set of variable-free atoms: one item context.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct GroundAtomSet(BTreeSet<Atom>);

impl GroundAtomSet {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<GroundAtomSet, AspError> {
        let mut set = BTreeSet::new();
        for atom in atoms {
            if !atom.is_ground() {
                return Err(AspError::NonGroundAtom(atom.to_string()));
            }
            set.insert(atom);
        }
        Ok(GroundAtomSet(set))
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.0.contains(atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<Atom>> for GroundAtomSet {
    type Error = AspError;

    fn try_from(atoms: Vec<Atom>) -> Result<Self, Self::Error> {
        GroundAtomSet::new(atoms)
    }
}

impl From<GroundAtomSet> for Vec<Atom> {
    fn from(set: GroundAtomSet) -> Vec<Atom> {
        set.0.into_iter().collect()
    }
}

/// Weight of a weak constraint: an integer constant or `±V1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Weight {
    Const(i64),
    Var { negated: bool },
}

impl Weight {
    pub const PLUS_VAR: Weight = Weight::Var { negated: false };
    pub const MINUS_VAR: Weight = Weight::Var { negated: true };

    pub fn is_var(self) -> bool {
        matches!(self, Weight::Var { .. })
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Const(w) => write!(f, "{w}"),
            Weight::Var { negated: false } => f.write_str("V1"),
            Weight::Var { negated: true } => f.write_str("-V1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeakConstraint {
    pub body: Vec<Atom>,
    pub weight: Weight,
    pub level: u32,
    pub terms: Vec<Term>,
}

impl WeakConstraint {
    pub fn new(
        body: Vec<Atom>,
        weight: Weight,
        level: u32,
        terms: Vec<Term>,
    ) -> Result<WeakConstraint, AspError> {
        let wc = WeakConstraint {
            body,
            weight,
            level,
            terms,
        };
        wc.validate()?;
        Ok(wc)
    }

    /// `:~ value(feature,V1).[weight@level, V1]`
    pub fn on_value(feature: &str, weight: Weight, level: u32) -> WeakConstraint {
        WeakConstraint {
            body: vec![Atom::value_var(feature)],
            weight,
            level,
            terms: vec![Term::Var],
        }
    }

    fn validate(&self) -> Result<(), AspError> {
        let invalid = |msg: &str| Err(AspError::InvalidConstraint(format!("{self}: {msg}")));
        if self.body.is_empty() {
            return invalid("empty body");
        }
        if self.level == 0 {
            return invalid("priority levels start at 1");
        }
        let body_has_var = self.body.iter().any(Atom::has_var);
        if self.weight.is_var() && !body_has_var {
            return invalid("variable weight without V1 in the body");
        }
        if self.terms.iter().any(Term::is_var) && !body_has_var {
            return invalid("V1 in the terms but not in the body");
        }
        if body_has_var && !self.terms.iter().any(Term::is_var) {
            return invalid("terms must include V1");
        }
        Ok(())
    }

    /// Number of body atoms; the learner's length unit.
    pub fn length(&self) -> usize {
        self.body.len()
    }

    /// Every `(weight, terms)` tuple this constraint charges on `atoms`,
    /// deduplicated. The level is implicit.
    pub fn contributions(&self, atoms: &GroundAtomSet) -> Result<Vec<(i64, Vec<Term>)>, AspError> {
        let mut out = BTreeSet::new();
        for binding in self.bindings(atoms) {
            let weight = match self.weight {
                Weight::Const(w) => w,
                Weight::Var { negated } => match &binding {
                    Some(Term::Int(v)) => {
                        if negated {
                            -v
                        } else {
                            *v
                        }
                    }
                    other => {
                        return Err(AspError::NonIntegerWeight {
                            constraint: self.to_string(),
                            term: other.as_ref().map(|t| t.to_string()).unwrap_or_default(),
                        })
                    }
                },
            };
            let terms = self
                .terms
                .iter()
                .map(|t| t.substitute(binding.as_ref()))
                .collect();
            out.insert((weight, terms));
        }
        Ok(out.into_iter().collect())
    }

    /// Bindings of `V1` satisfying the whole body. A ground body yields a
    /// single `None` binding when all of its atoms hold.
    fn bindings(&self, atoms: &GroundAtomSet) -> Vec<Option<Term>> {
        let Some(anchor) = self.body.iter().find(|a| a.has_var()) else {
            return if self.body.iter().all(|a| atoms.contains(a)) {
                vec![None]
            } else {
                Vec::new()
            };
        };
        let mut found = BTreeSet::new();
        for fact in atoms.iter() {
            if let Some(Some(value)) = anchor.match_ground(fact) {
                let binding = Some(&value);
                if self
                    .body
                    .iter()
                    .all(|a| atoms.contains(&a.substitute(binding)))
                {
                    found.insert(value);
                }
            }
        }
        found.into_iter().map(Some).collect()
    }
}

impl fmt::Display for WeakConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_constraint(self))
    }
}

/// A set of weak constraints with levels in `1..=maxp`.
///
/// Equality ignores the order in which constraints were added.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Theory {
    constraints: Vec<WeakConstraint>,
    maxp: u32,
}

impl Theory {
    pub fn new(constraints: Vec<WeakConstraint>, maxp: u32) -> Result<Theory, AspError> {
        let maxp = maxp.max(1);
        let mut seen = BTreeSet::new();
        let mut kept = Vec::with_capacity(constraints.len());
        for wc in constraints {
            wc.validate()?;
            if wc.level > maxp {
                return Err(AspError::LevelAboveMaxp {
                    level: wc.level,
                    maxp,
                });
            }
            if seen.insert(wc.clone()) {
                kept.push(wc);
            }
        }
        Ok(Theory {
            constraints: kept,
            maxp,
        })
    }

    /// A theory whose `maxp` is its highest level (at least 1).
    pub fn from_constraints(constraints: Vec<WeakConstraint>) -> Result<Theory, AspError> {
        let maxp = constraints.iter().map(|c| c.level).max().unwrap_or(1);
        Theory::new(constraints, maxp)
    }

    pub fn empty(maxp: u32) -> Theory {
        Theory {
            constraints: Vec::new(),
            maxp: maxp.max(1),
        }
    }

    pub fn constraints(&self) -> &[WeakConstraint] {
        &self.constraints
    }

    pub fn maxp(&self) -> u32 {
        self.maxp
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Total number of body atoms.
    pub fn length(&self) -> usize {
        self.constraints.iter().map(WeakConstraint::length).sum()
    }

    /// Same constraints under a larger `maxp`.
    pub fn with_maxp(mut self, maxp: u32) -> Result<Theory, AspError> {
        if let Some(wc) = self.constraints.iter().find(|c| c.level > maxp) {
            return Err(AspError::LevelAboveMaxp {
                level: wc.level,
                maxp,
            });
        }
        self.maxp = maxp.max(1);
        Ok(self)
    }

    fn sorted(&self) -> Vec<&WeakConstraint> {
        let mut v: Vec<_> = self.constraints.iter().collect();
        v.sort();
        v
    }
}

impl PartialEq for Theory {
    fn eq(&self, other: &Self) -> bool {
        self.maxp == other.maxp && self.sorted() == other.sorted()
    }
}

impl Eq for Theory {}

/// Per-level costs, index 0 holding level 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostVector(Vec<i64>);

impl CostVector {
    pub fn new(costs: Vec<i64>) -> CostVector {
        CostVector(costs)
    }

    pub fn zeros(maxp: u32) -> CostVector {
        CostVector(vec![0; maxp as usize])
    }

    /// Cost at a 1-based level.
    pub fn at(&self, level: u32) -> i64 {
        self.0[level as usize - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    /// Costs from the highest level down, the order in which they decide.
    pub fn highest_first(&self) -> Vec<i64> {
        self.0.iter().rev().copied().collect()
    }
}

impl fmt::Display for CostVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, c) in self.0.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

/// Outcome of comparing two cost vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preference {
    First,
    Second,
    Tie,
}

impl Preference {
    pub fn label(self) -> Label {
        match self {
            Preference::First => Label::First,
            Preference::Second => Label::Second,
            Preference::Tie => Label::Uncertain,
        }
    }

    pub fn reversed(self) -> Preference {
        match self {
            Preference::First => Preference::Second,
            Preference::Second => Preference::First,
            Preference::Tie => Preference::Tie,
        }
    }
}

/// Cost of a context under a theory.
pub fn evaluate_cost(atoms: &GroundAtomSet, theory: &Theory) -> Result<CostVector, AspError> {
    let mut charged: BTreeSet<(i64, u32, Vec<Term>)> = BTreeSet::new();
    for wc in theory.constraints() {
        for (weight, terms) in wc.contributions(atoms)? {
            charged.insert((weight, wc.level, terms));
        }
    }
    let mut costs = vec![0i64; theory.maxp() as usize];
    for (weight, level, _) in charged {
        costs[level as usize - 1] += weight;
    }
    Ok(CostVector(costs))
}

/// Lexicographic comparison from the highest level; lower cost is preferred.
pub fn compare(a: &CostVector, b: &CostVector) -> Result<Preference, AspError> {
    if a.len() != b.len() {
        return Err(AspError::LengthMismatch(a.len(), b.len()));
    }
    for (ca, cb) in a.0.iter().rev().zip(b.0.iter().rev()) {
        match ca.cmp(cb) {
            Ordering::Less => return Ok(Preference::First),
            Ordering::Greater => return Ok(Preference::Second),
            Ordering::Equal => {}
        }
    }
    Ok(Preference::Tie)
}

/// Label of the ordered pair `(first, second)` under `theory`: 1 when the
/// first context is preferred, −1 when the second is, 0 on a tie.
pub fn classify_pair(
    theory: &Theory,
    first: &GroundAtomSet,
    second: &GroundAtomSet,
) -> Result<Label, AspError> {
    let a = evaluate_cost(first, theory)?;
    let b = evaluate_cost(second, theory)?;
    Ok(compare(&a, &b)?.label())
}

/// Orders contexts from most to least preferred. Each inner vector is a
/// group of mutually tied contexts, given as indices into `items`.
pub fn rank_items(theory: &Theory, items: &[GroundAtomSet]) -> Result<Vec<Vec<usize>>, AspError> {
    let keys = items
        .iter()
        .map(|atoms| evaluate_cost(atoms, theory).map(|c| c.highest_first()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&i, &j| keys[i].cmp(&keys[j]).then(i.cmp(&j)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(group) if keys[group[0]] == keys[idx] => group.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_q(qs: &[&str]) -> GroundAtomSet {
        let mut atoms: Vec<Atom> = ["a", "b", "c"]
            .iter()
            .map(|c| Atom::new("p", vec![Term::sym(*c)]))
            .collect();
        atoms.extend(qs.iter().map(|c| Atom::new("q", vec![Term::sym(*c)])));
        GroundAtomSet::new(atoms).unwrap()
    }

    fn example_one() -> Theory {
        let wc = |c: &str, w: i64, l: u32| {
            WeakConstraint::new(
                vec![Atom::new("q", vec![Term::sym(c)])],
                Weight::Const(w),
                l,
                vec![Term::sym(c)],
            )
            .unwrap()
        };
        Theory::new(vec![wc("a", 1, 2), wc("b", 3, 1), wc("c", -1, 2)], 2).unwrap()
    }

    fn context(values: &[(&str, i64)]) -> GroundAtomSet {
        GroundAtomSet::new(values.iter().map(|(f, v)| Atom::value(f, *v))).unwrap()
    }

    #[test]
    fn example_one_costs() {
        let t = example_one();
        let best = evaluate_cost(&p_q(&["c"]), &t).unwrap();
        assert_eq!(best.as_slice(), &[0, -1]);
        assert_eq!(evaluate_cost(&p_q(&[]), &t).unwrap().as_slice(), &[0, 0]);
        let a = evaluate_cost(&p_q(&["a", "b", "c"]), &t).unwrap();
        let b = evaluate_cost(&p_q(&["a", "b"]), &t).unwrap();
        assert_eq!(a.as_slice(), &[3, 0]);
        assert_eq!(b.as_slice(), &[3, 1]);
        assert_eq!(compare(&a, &b).unwrap(), Preference::First);
    }

    #[test]
    fn higher_level_dominates() {
        let a = CostVector::new(vec![0, -1]);
        let b = CostVector::new(vec![-5, 0]);
        assert_eq!(compare(&a, &b).unwrap(), Preference::First);
        assert_eq!(compare(&a, &a).unwrap(), Preference::Tie);
        assert_eq!(
            compare(&a, &CostVector::zeros(3)),
            Err(AspError::LengthMismatch(2, 3))
        );
    }

    #[test]
    fn cost_vectors_print_highest_level_first() {
        let t = Theory::new(
            vec![WeakConstraint::on_value("browning", Weight::PLUS_VAR, 1)],
            2,
        )
        .unwrap();
        let r1 = evaluate_cost(&context(&[("browning", 3)]), &t).unwrap();
        let r2 = evaluate_cost(&context(&[("browning", 1)]), &t).unwrap();
        assert_eq!(r1.to_string(), "[0 3]");
        assert_eq!(r2.to_string(), "[0 1]");
        let label = classify_pair(
            &t,
            &context(&[("browning", 3)]),
            &context(&[("browning", 1)]),
        )
        .unwrap();
        assert_eq!(label, Label::Second);
    }

    #[test]
    fn empty_theory_and_identical_contexts_tie() {
        let a = context(&[("p", 1)]);
        let b = context(&[("p", 7)]);
        assert_eq!(classify_pair(&Theory::empty(3), &a, &b).unwrap(), Label::Uncertain);
        let t = Theory::new(vec![WeakConstraint::on_value("p", Weight::MINUS_VAR, 2)], 2).unwrap();
        assert_eq!(classify_pair(&t, &a, &a).unwrap(), Label::Uncertain);
    }

    #[test]
    fn duplicate_tuples_are_charged_once() {
        // Both constraints charge (3, level 1, [3]) on this context.
        let t = Theory::new(
            vec![
                WeakConstraint::on_value("a", Weight::PLUS_VAR, 1),
                WeakConstraint::on_value("b", Weight::PLUS_VAR, 1),
            ],
            1,
        )
        .unwrap();
        assert_eq!(evaluate_cost(&context(&[("a", 3), ("b", 3)]), &t).unwrap().at(1), 3);
        assert_eq!(evaluate_cost(&context(&[("a", 3), ("b", 2)]), &t).unwrap().at(1), 5);
    }

    #[test]
    fn category_condition_restricts_bindings() {
        let wc = WeakConstraint::new(
            vec![
                Atom::value_var("dairies"),
                Atom::new("category", vec![Term::Int(3)]),
            ],
            Weight::PLUS_VAR,
            5,
            vec![Term::Var],
        )
        .unwrap();
        let t = Theory::new(vec![wc], 5).unwrap();
        let mut first_course = context(&[("dairies", 4)]).0;
        first_course.insert(Atom::new("category", vec![Term::Int(3)]));
        let first_course = GroundAtomSet(first_course);
        let mut starter = context(&[("dairies", 4)]).0;
        starter.insert(Atom::new("category", vec![Term::Int(1)]));
        let starter = GroundAtomSet(starter);
        assert_eq!(evaluate_cost(&first_course, &t).unwrap().at(5), 4);
        assert_eq!(evaluate_cost(&starter, &t).unwrap().at(5), 0);
    }

    #[test]
    fn symbolic_binding_for_variable_weight_is_an_error() {
        let t = Theory::new(vec![WeakConstraint::on_value("p", Weight::PLUS_VAR, 1)], 1).unwrap();
        let ctx = GroundAtomSet::new(vec![Atom::new(
            "value",
            vec![Term::sym("p"), Term::sym("high")],
        )])
        .unwrap();
        assert!(matches!(
            evaluate_cost(&ctx, &t),
            Err(AspError::NonIntegerWeight { .. })
        ));
    }

    #[test]
    fn invalid_constraints_are_rejected() {
        assert!(WeakConstraint::new(vec![], Weight::Const(1), 1, vec![]).is_err());
        let ground = Atom::new("q", vec![Term::sym("a")]);
        assert!(WeakConstraint::new(vec![ground.clone()], Weight::PLUS_VAR, 1, vec![]).is_err());
        assert!(WeakConstraint::new(vec![ground], Weight::Const(1), 0, vec![]).is_err());
        assert!(
            WeakConstraint::new(vec![Atom::value_var("p")], Weight::Const(1), 1, vec![]).is_err()
        );
        assert!(GroundAtomSet::new(vec![Atom::value_var("p")]).is_err());
        let high = WeakConstraint::on_value("p", Weight::Const(1), 4);
        assert_eq!(
            Theory::new(vec![high], 2).unwrap_err(),
            AspError::LevelAboveMaxp { level: 4, maxp: 2 }
        );
    }

    #[test]
    fn ranking_groups_ties() {
        let t = Theory::new(vec![WeakConstraint::on_value("p", Weight::PLUS_VAR, 1)], 2).unwrap();
        let items = vec![
            context(&[("p", 1)]),
            context(&[("p", 2)]),
            context(&[("p", 3)]),
            context(&[("p", 2)]),
        ];
        assert_eq!(
            rank_items(&t, &items).unwrap(),
            vec![vec![0], vec![1, 3], vec![2]]
        );
        assert_eq!(
            rank_items(&Theory::empty(2), &items).unwrap(),
            vec![vec![0, 1, 2, 3]]
        );
        assert_eq!(rank_items(&t, &items[..1]).unwrap(), vec![vec![0]]);
    }

    #[test]
    fn theory_equality_is_order_insensitive() {
        let a = WeakConstraint::on_value("a", Weight::PLUS_VAR, 1);
        let b = WeakConstraint::on_value("b", Weight::MINUS_VAR, 2);
        let t1 = Theory::new(vec![a.clone(), b.clone()], 2).unwrap();
        let t2 = Theory::new(vec![b, a.clone(), a], 2).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t2.len(), 2);
    }
}
