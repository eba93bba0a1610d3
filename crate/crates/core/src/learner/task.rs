//! JSON task files: a mode bias, named contexts, and ordering examples that
//! refer to contexts by name.
//!
//! ```json
//! {
//!   "bias": {"value_features": ["p"], "weight_forms": ["V1", "-V1"], "maxp": 2},
//!   "contexts": [{"name": "item0", "facts": "category(2). value(p, 1)."}],
//!   "examples": [{"id": "o0", "first": "item0", "second": "item1", "symbol": "<", "penalty": 1}]
//! }
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::asp::{parse_facts, render_facts, GroundAtomSet};

use super::{LearnError, ModeBias, OrderSymbol, OrderingExample};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedContext {
    pub name: String,
    /// Ground facts in the `value(p, 1).` syntax.
    pub facts: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskExample {
    pub id: String,
    pub first: String,
    pub second: String,
    pub symbol: OrderSymbol,
    #[serde(default = "one")]
    pub penalty: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningTask {
    pub bias: ModeBias,
    pub contexts: Vec<NamedContext>,
    #[serde(default)]
    pub examples: Vec<TaskExample>,
}

impl LearningTask {
    /// Names contexts `item<k>` in order of first appearance, reusing the
    /// given names when a context is listed in `named`.
    pub fn from_examples(
        bias: ModeBias,
        named: &[(String, GroundAtomSet)],
        examples: &[OrderingExample],
    ) -> LearningTask {
        let mut contexts: Vec<(String, GroundAtomSet)> = named.to_vec();
        let mut name_of = |ctx: &GroundAtomSet| -> String {
            if let Some((n, _)) = contexts.iter().find(|(_, c)| c == ctx) {
                return n.clone();
            }
            let mut k = contexts.len();
            while contexts.iter().any(|(n, _)| *n == format!("item{k}")) {
                k += 1;
            }
            let n = format!("item{k}");
            contexts.push((n.clone(), ctx.clone()));
            n
        };
        let examples = examples
            .iter()
            .map(|ex| TaskExample {
                id: ex.id.clone(),
                first: name_of(&ex.first),
                second: name_of(&ex.second),
                symbol: ex.symbol,
                penalty: ex.penalty,
            })
            .collect();
        LearningTask {
            bias,
            contexts: contexts
                .into_iter()
                .map(|(name, c)| NamedContext {
                    name,
                    facts: render_facts(&c),
                })
                .collect(),
            examples,
        }
    }

    pub fn contexts(&self) -> Result<Vec<(String, GroundAtomSet)>, LearnError> {
        self.contexts
            .iter()
            .map(|c| Ok((c.name.clone(), parse_facts(&c.facts)?)))
            .collect()
    }

    pub fn ordering_examples(&self) -> Result<Vec<OrderingExample>, LearnError> {
        let contexts: HashMap<String, GroundAtomSet> = self.contexts()?.into_iter().collect();
        let get = |name: &str| {
            contexts
                .get(name)
                .cloned()
                .ok_or_else(|| LearnError::UnknownContext(name.to_string()))
        };
        self.examples
            .iter()
            .map(|ex| {
                OrderingExample::new(
                    ex.id.clone(),
                    get(&ex.first)?,
                    get(&ex.second)?,
                    ex.symbol,
                    ex.penalty,
                )
            })
            .collect()
    }
}
