//! Branch-and-bound over theories.
//!
//! A theory is built as a sequence of priority groups, highest level first.
//! Each group holds constraints sharing one level. Adding a group below the
//! existing ones cannot change the outcome of an example that a higher group
//! already decides, so once a group is closed its uncovered examples are
//! committed and their penalties bound every completion from below.
//!
//! When every candidate shape is available at every level (always true for
//! spaces built by [`expand_mode_bias`](super::expand_mode_bias)), only the
//! relative order of levels matters. The search then assigns levels
//! `k, k-1, ..., 1` to the `k` groups, which skips theories that differ only
//! by a gap in their levels. The canonical tie-break always prefers the
//! gap-free variant, so nothing is lost.

use std::collections::{BTreeMap, BTreeSet, HashMap};
#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;

use crate::asp::{GroundAtomSet, Preference, Term, Theory, WeakConstraint};

use super::{
    tie_break, CandidateKey, HypothesisSpace, LearnBudget, LearnError, LearnOutcome,
    OrderSymbol, OrderingExample, Strategy,
};

/// Finds a theory minimizing length plus uncovered penalties.
///
/// Ties are broken by fewer constraints, then by the sorted candidate keys.
/// With `budget.beam_width` set, a beam search is run instead and the result
/// is marked non-optimal. If the time limit expires the best theory found so
/// far is returned with `timed_out` set.
pub fn learn(
    space: &HypothesisSpace,
    examples: &[OrderingExample],
    budget: &LearnBudget,
) -> Result<LearnOutcome, LearnError> {
    for ex in examples {
        if ex.penalty == 0 {
            return Err(LearnError::ZeroPenalty(ex.id.clone()));
        }
    }
    let mut engine = Engine::prepare(space, examples, budget)?;
    let root = engine.root();
    engine.offer(&root);
    match budget.beam_width {
        Some(width) => {
            engine.beam(&root, width.max(1));
            Ok(engine.finish(space, Strategy::Beam, false))
        }
        None => {
            engine.beam(&root, 1);
            engine.dfs(&root);
            let optimal = !engine.timed_out;
            Ok(engine.finish(space, Strategy::Exact, optimal))
        }
    }
}

struct Item {
    /// Index of the representative candidate in the space.
    candidate: usize,
    /// Fixed level in absolute mode; unused in relative mode.
    level: u32,
    length: u64,
    key: CandidateKey,
    /// Deduplicated `(weight, terms id)` contributions per context.
    contributions: Vec<Vec<(i64, u32)>>,
    sums: Vec<i64>,
    /// Outcome of each dynamic example when this item forms a group alone.
    alone: Vec<Preference>,
}

struct Example {
    first: usize,
    second: usize,
    symbol: OrderSymbol,
    penalty: u64,
}

#[derive(Clone, Debug)]
struct Group {
    level: u32,
    members: Vec<usize>,
}

#[derive(Clone)]
struct Node {
    groups: Vec<Group>,
    /// Per dynamic example: the decision made by a closed group, if any.
    closed: Vec<Option<Preference>>,
    /// Per dynamic example: the outcome within the open (lowest) group.
    open: Vec<Preference>,
    length: u64,
    count: usize,
    objective: u64,
}

struct Best {
    objective: u64,
    keys: Vec<CandidateKey>,
    groups: Vec<Group>,
}

struct Engine {
    items: Vec<Item>,
    examples: Vec<Example>,
    relative: bool,
    maxp: u32,
    max_constraints: usize,
    static_uncovered: u64,
    min_length: u64,
    best: Best,
    nodes: u64,
    #[cfg(not(target_arch = "wasm32"))]
    deadline: Option<Instant>,
    timed_out: bool,
}

impl Engine {
    fn prepare(
        space: &HypothesisSpace,
        examples: &[OrderingExample],
        budget: &LearnBudget,
    ) -> Result<Engine, LearnError> {
        let mut context_ids: HashMap<&GroundAtomSet, usize> = HashMap::new();
        let mut contexts: Vec<&GroundAtomSet> = Vec::new();
        let mut all_examples = Vec::with_capacity(examples.len());
        for ex in examples {
            let first = lookup(&ex.first, &mut context_ids, &mut contexts);
            let second = lookup(&ex.second, &mut context_ids, &mut contexts);
            all_examples.push(Example {
                first,
                second,
                symbol: ex.symbol,
                penalty: u64::from(ex.penalty),
            });
        }

        // Shapes: candidates that differ only by level.
        let maxp = space.maxp();
        let mut shapes: BTreeMap<CandidateKey, (usize, BTreeSet<u32>)> = BTreeMap::new();
        for (i, wc) in space.candidates().iter().enumerate() {
            let entry = shapes
                .entry(space.key(i).with_level(0))
                .or_insert((i, BTreeSet::new()));
            if wc.level < space.candidates()[entry.0].level {
                entry.0 = i;
            }
            entry.1.insert(wc.level);
        }
        let relative = shapes.values().all(|(_, levels)| levels.len() == maxp as usize);
        let representatives: Vec<usize> = if relative {
            shapes.values().map(|(i, _)| *i).collect()
        } else {
            (0..space.len()).collect()
        };

        let mut term_ids: HashMap<Vec<Term>, u32> = HashMap::new();
        let mut items = Vec::with_capacity(representatives.len());
        for &c in &representatives {
            let wc = &space.candidates()[c];
            let mut contributions = Vec::with_capacity(contexts.len());
            let mut sums = Vec::with_capacity(contexts.len());
            for ctx in &contexts {
                let mut list: Vec<(i64, u32)> = wc
                    .contributions(ctx)?
                    .into_iter()
                    .map(|(w, terms)| {
                        let next = term_ids.len() as u32;
                        (w, *term_ids.entry(terms).or_insert(next))
                    })
                    .collect();
                list.sort_unstable();
                list.dedup();
                sums.push(list.iter().map(|(w, _)| w).sum());
                contributions.push(list);
            }
            items.push(Item {
                candidate: c,
                level: wc.level,
                length: wc.length() as u64,
                key: space.key(c).clone(),
                contributions,
                sums,
                alone: Vec::new(),
            });
        }

        // Examples no candidate can separate keep the same outcome in every
        // theory: a tie.
        let mut dynamic = Vec::new();
        let mut static_uncovered = 0;
        for ex in all_examples {
            let separable = items
                .iter()
                .any(|it| it.contributions[ex.first] != it.contributions[ex.second]);
            if separable {
                dynamic.push(ex);
            } else if !ex.symbol.accepts(Preference::Tie) {
                static_uncovered += ex.penalty;
            }
        }
        for item in &mut items {
            item.alone = dynamic
                .iter()
                .map(|ex| decide(item.sums[ex.first], item.sums[ex.second]))
                .collect();
        }
        let min_length = items.iter().map(|it| it.length).min().unwrap_or(1);

        Ok(Engine {
            items,
            examples: dynamic,
            relative,
            maxp,
            max_constraints: budget.max_constraints_for(space),
            static_uncovered,
            min_length,
            best: Best {
                objective: u64::MAX,
                keys: Vec::new(),
                groups: Vec::new(),
            },
            nodes: 0,
            #[cfg(not(target_arch = "wasm32"))]
            deadline: budget.time_limit.map(|d| Instant::now() + d),
            timed_out: false,
        })
    }

    fn root(&self) -> Node {
        let n = self.examples.len();
        let mut node = Node {
            groups: Vec::new(),
            closed: vec![None; n],
            open: vec![Preference::Tie; n],
            length: 0,
            count: 0,
            objective: 0,
        };
        node.objective = self.score(&node);
        node
    }

    fn score(&self, node: &Node) -> u64 {
        let uncovered: u64 = self
            .examples
            .iter()
            .enumerate()
            .filter(|(d, ex)| !ex.symbol.accepts(node.closed[*d].unwrap_or(node.open[*d])))
            .map(|(_, ex)| ex.penalty)
            .sum();
        node.length + self.static_uncovered + uncovered
    }

    fn committed(&self, closed: &[Option<Preference>]) -> u64 {
        self.examples
            .iter()
            .zip(closed)
            .filter_map(|(ex, c)| c.filter(|p| !ex.symbol.accepts(*p)).map(|_| ex.penalty))
            .sum()
    }

    fn group_cost(&self, members: &[usize], ctx: usize) -> i64 {
        if let [single] = members {
            return self.items[*single].sums[ctx];
        }
        let mut merged: Vec<(i64, u32)> = members
            .iter()
            .flat_map(|&m| self.items[m].contributions[ctx].iter().copied())
            .collect();
        merged.sort_unstable();
        merged.dedup();
        merged.iter().map(|(w, _)| w).sum()
    }

    fn keys(&self, groups: &[Group]) -> Vec<CandidateKey> {
        let n = groups.len() as u32;
        let mut keys: Vec<CandidateKey> = groups
            .iter()
            .enumerate()
            .flat_map(|(i, g)| {
                let level = if self.relative { n - i as u32 } else { g.level };
                g.members
                    .iter()
                    .map(move |&m| self.items[m].key.with_level(level))
            })
            .collect();
        keys.sort();
        keys
    }

    fn offer(&mut self, node: &Node) {
        if node.objective > self.best.objective {
            return;
        }
        let keys = self.keys(&node.groups);
        let better = self.best.objective == u64::MAX
            || tie_break((node.objective, &keys), (self.best.objective, &self.best.keys)).is_lt();
        if better {
            self.best = Best {
                objective: node.objective,
                keys,
                groups: node.groups.clone(),
            };
        }
    }

    /// No descendant with a subtree bound of `bound` can beat the incumbent.
    fn pruned(&self, bound: u64, count: usize) -> bool {
        bound > self.best.objective || (bound == self.best.objective && count + 1 > self.best.keys.len())
    }

    /// Closed decisions once the open group of `node` is closed too.
    fn close_open(&self, node: &Node) -> Vec<Option<Preference>> {
        node.closed
            .iter()
            .zip(&node.open)
            .map(|(c, o)| c.or(if *o == Preference::Tie { None } else { Some(*o) }))
            .collect()
    }

    fn children(&self, node: &Node) -> Vec<Node> {
        let mut out = Vec::new();
        if node.count >= self.max_constraints || self.items.is_empty() {
            return out;
        }
        let base = node.length + self.min_length + self.static_uncovered;
        if let Some(open) = node.groups.last() {
            if !self.pruned(base + self.committed(&node.closed), node.count) {
                let start = open.members.last().map_or(0, |m| m + 1);
                for x in start..self.items.len() {
                    if !self.relative && self.items[x].level != open.level {
                        continue;
                    }
                    let mut members = open.members.clone();
                    members.push(x);
                    let open_prefs: Vec<Preference> = self
                        .examples
                        .iter()
                        .map(|ex| {
                            decide(
                                self.group_cost(&members, ex.first),
                                self.group_cost(&members, ex.second),
                            )
                        })
                        .collect();
                    let mut groups = node.groups.clone();
                    groups.last_mut().unwrap().members = members;
                    out.push(self.child(node, groups, node.closed.clone(), open_prefs, x));
                }
            }
        }
        let can_open = match node.groups.last() {
            None => true,
            Some(g) if self.relative => node.groups.len() < self.maxp as usize && g.level > 0,
            Some(g) => g.level > 1,
        };
        if can_open {
            let closed = self.close_open(node);
            if !self.pruned(base + self.committed(&closed), node.count) {
                let ceiling = node.groups.last().map(|g| g.level);
                for x in 0..self.items.len() {
                    let level = if self.relative {
                        1
                    } else {
                        let l = self.items[x].level;
                        if ceiling.is_some_and(|c| l >= c) {
                            continue;
                        }
                        l
                    };
                    let mut groups = node.groups.clone();
                    groups.push(Group {
                        level,
                        members: vec![x],
                    });
                    let open_prefs = self.items[x].alone.clone();
                    out.push(self.child(node, groups, closed.clone(), open_prefs, x));
                }
            }
        }
        out
    }

    fn child(
        &self,
        parent: &Node,
        groups: Vec<Group>,
        closed: Vec<Option<Preference>>,
        open: Vec<Preference>,
        added: usize,
    ) -> Node {
        let mut node = Node {
            groups,
            closed,
            open,
            length: parent.length + self.items[added].length,
            count: parent.count + 1,
            objective: 0,
        };
        node.objective = self.score(&node);
        node
    }

    fn out_of_time(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        #[cfg(not(target_arch = "wasm32"))]
        if let Some(deadline) = self.deadline {
            if self.nodes % 64 == 0 && Instant::now() >= deadline {
                self.timed_out = true;
            }
        }
        self.timed_out
    }

    fn dfs(&mut self, node: &Node) {
        self.nodes += 1;
        if self.out_of_time() {
            return;
        }
        let mut kids = self.children(node);
        for kid in &kids {
            self.offer(kid);
        }
        kids.sort_by_key(|k| k.objective);
        for kid in &kids {
            if self.timed_out {
                return;
            }
            // Cheap re-check: the incumbent may have improved since `kids`
            // was built.
            let floor = kid.length + self.static_uncovered + self.committed(&kid.closed);
            if kid.count < self.max_constraints && !self.pruned(floor + self.min_length, kid.count)
            {
                self.dfs(kid);
            }
        }
    }

    fn beam(&mut self, root: &Node, width: usize) {
        let mut frontier = vec![root.clone()];
        while !frontier.is_empty() {
            let mut next: Vec<(u64, Vec<CandidateKey>, Node)> = Vec::new();
            for node in &frontier {
                self.nodes += 1;
                for kid in self.children(node) {
                    self.offer(&kid);
                    let keys = self.keys(&kid.groups);
                    next.push((kid.objective, keys, kid));
                }
            }
            next.sort_by(|a, b| tie_break((a.0, &a.1), (b.0, &b.1)));
            next.truncate(width);
            frontier = next.into_iter().map(|(_, _, n)| n).collect();
            if self.out_of_time() {
                break;
            }
        }
    }

    fn finish(self, space: &HypothesisSpace, strategy: Strategy, optimal: bool) -> LearnOutcome {
        let n = self.best.groups.len() as u32;
        let mut constraints: Vec<WeakConstraint> = Vec::new();
        for (i, g) in self.best.groups.iter().enumerate() {
            let level = if self.relative { n - i as u32 } else { g.level };
            for &m in &g.members {
                let mut wc = space.candidates()[self.items[m].candidate].clone();
                wc.level = level;
                constraints.push(wc);
            }
        }
        constraints.sort_by_key(CandidateKey::of);
        let theory = Theory::new(constraints, space.maxp()).expect("levels come from the space");
        LearnOutcome {
            theory,
            objective: self.best.objective,
            optimal,
            timed_out: self.timed_out,
            strategy,
            nodes: self.nodes,
        }
    }
}

fn lookup<'a>(
    ctx: &'a GroundAtomSet,
    ids: &mut HashMap<&'a GroundAtomSet, usize>,
    list: &mut Vec<&'a GroundAtomSet>,
) -> usize {
    *ids.entry(ctx).or_insert_with(|| {
        list.push(ctx);
        list.len() - 1
    })
}

fn decide(first: i64, second: i64) -> Preference {
    match first.cmp(&second) {
        std::cmp::Ordering::Less => Preference::First,
        std::cmp::Ordering::Greater => Preference::Second,
        std::cmp::Ordering::Equal => Preference::Tie,
    }
}
