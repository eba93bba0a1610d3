//! Browser bindings: rank items under a theory, learn a theory from a small
//! task, and map feature ratings to ground-truth constraints.
//!
//! Every export takes and returns strings (JSON on the way out); the plain
//! `*_json` functions carry the logic so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use wcexplain::asp::{
    classify_pair, evaluate_cost, gloss_theory, parse_facts, parse_theory, rank_items, render_theory, GroundAtomSet,
};
use wcexplain::learner::{expand_mode_bias, learn, LearnBudget, LearningTask};
use wcexplain::metrics::{gt_map, gt_theory, GtRatings};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// One item per non-empty line, as facts: `category(2). value(p, 1).`
fn parse_items(text: &str) -> Result<Vec<(String, GroundAtomSet)>, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'))
        .enumerate()
        .map(|(i, line)| {
            let (name, facts) = match line.split_once(':') {
                Some((n, f)) if !n.contains('(') => (n.trim().to_string(), f),
                _ => (format!("item{i}"), line),
            };
            parse_facts(facts).map(|c| (name, c)).map_err(|e| format!("line {}: {e}", i + 1))
        })
        .collect()
}

/// Costs of each item, the ranking (groups of ties, best first), and the
/// ternary label of the first two items.
pub fn rank_json(theory: &str, items: &str) -> Result<String, String> {
    let theory = parse_theory(theory).map_err(err)?;
    let items = parse_items(items)?;
    let contexts: Vec<GroundAtomSet> = items.iter().map(|(_, c)| c.clone()).collect();
    let costs = contexts
        .iter()
        .map(|c| evaluate_cost(c, &theory).map(|v| v.highest_first()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let ranking: Vec<Vec<&str>> = rank_items(&theory, &contexts)
        .map_err(err)?
        .into_iter()
        .map(|group| group.into_iter().map(|i| items[i].0.as_str()).collect())
        .collect();
    let first_pair = match contexts.as_slice() {
        [a, b, ..] => Some(classify_pair(&theory, a, b).map_err(err)?.as_i64()),
        _ => None,
    };
    let names: Vec<&str> = items.iter().map(|(n, _)| n.as_str()).collect();
    Ok(json!({
        "maxp": theory.maxp(),
        "gloss": gloss_theory(&theory),
        "items": names,
        "costs_highest_first": costs,
        "ranking": ranking,
        "first_pair_label": first_pair,
    })
    .to_string())
}

/// Spaces larger than this are searched with a beam so the page stays
/// responsive; the learner has no clock in the browser.
pub const EXACT_SEARCH_MAX_CANDIDATES: usize = 48;

const BEAM_WIDTH: usize = 8;

/// Learns from a task JSON (bias, named contexts, ordering examples).
pub fn learn_json(task: &str) -> Result<String, String> {
    let task: LearningTask = serde_json::from_str(task).map_err(err)?;
    let space = expand_mode_bias(&task.bias);
    let examples = task.ordering_examples().map_err(err)?;
    let budget = LearnBudget {
        beam_width: (space.len() > EXACT_SEARCH_MAX_CANDIDATES).then_some(BEAM_WIDTH),
        ..LearnBudget::default()
    };
    let out = learn(&space, &examples, &budget).map_err(err)?;
    Ok(json!({
        "candidates": space.len(),
        "theory": render_theory(&out.theory),
        "gloss": gloss_theory(&out.theory),
        "objective": out.objective,
        "optimal": out.optimal,
        "strategy": format!("{:?}", out.strategy),
        "nodes": out.nodes,
    })
    .to_string())
}

/// The rating table for G = 1..=10, and, given a theory and `feature=G`
/// lines, the ground-truth theory built from it.
pub fn gt_json(theory: &str, ratings: &str) -> Result<String, String> {
    let table: Vec<Value> = (1..=10)
        .map(|g| {
            let m = gt_map(g).expect("1..=10 is valid");
            json!({ "g": g, "g_bar": m.g_bar, "m": m.m, "level": m.level(), "weight": m.weight().to_string() })
        })
        .collect();
    let mut out = json!({ "table": table });
    if !theory.trim().is_empty() {
        let theory = parse_theory(theory).map_err(err)?;
        let mut map = std::collections::BTreeMap::new();
        for line in ratings.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (f, g) = line.split_once('=').ok_or_else(|| format!("expected feature=G, got `{line}`"))?;
            let g: u8 = g.trim().parse().map_err(|_| format!("bad rating in `{line}`"))?;
            map.insert(f.trim().to_string(), g);
        }
        let gt = gt_theory(&theory, &GtRatings::new(map).map_err(err)?).map_err(err)?;
        out["gt_theory"] = json!(render_theory(&gt.theory));
        out["unrated"] = json!(gt.unrated);
    }
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn rank(theory: &str, items: &str) -> Result<String, JsError> {
    rank_json(theory, items).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = learnTask)]
pub fn learn_task(task: &str) -> Result<String, JsError> {
    learn_json(task).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = groundTruth)]
pub fn ground_truth(theory: &str, ratings: &str) -> Result<String, JsError> {
    gt_json(theory, ratings).map_err(|e| JsError::new(&e))
}
