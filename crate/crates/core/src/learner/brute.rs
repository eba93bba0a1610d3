//! Exhaustive reference learner for tiny spaces.

use crate::asp::Theory;

use super::{
    objective, tie_break, CandidateKey, HypothesisSpace, LearnError, LearnOutcome,
    OrderingExample, Strategy,
};

pub const BRUTE_FORCE_MAX_CANDIDATES: usize = 20;
pub const BRUTE_FORCE_MAX_CONSTRAINTS: usize = 3;

/// Scores every subset of at most `max_constraints` candidates with the
/// plain cost semantics and keeps the best under the canonical tie-break.
pub fn brute_force_learn(
    space: &HypothesisSpace,
    examples: &[OrderingExample],
    max_constraints: usize,
) -> Result<LearnOutcome, LearnError> {
    if space.len() > BRUTE_FORCE_MAX_CANDIDATES || max_constraints > BRUTE_FORCE_MAX_CONSTRAINTS {
        return Err(LearnError::BruteForceGuard {
            candidates: space.len(),
            constraints: max_constraints,
            max_candidates: BRUTE_FORCE_MAX_CANDIDATES,
            max_constraints: BRUTE_FORCE_MAX_CONSTRAINTS,
        });
    }
    for ex in examples {
        if ex.penalty == 0 {
            return Err(LearnError::ZeroPenalty(ex.id.clone()));
        }
    }
    let mut search = Search {
        space,
        examples,
        max_constraints,
        best: None,
        nodes: 0,
    };
    search.visit(0, &mut Vec::new())?;
    let (score, _, chosen) = search.best.expect("the empty theory is always scored");
    Ok(LearnOutcome {
        theory: theory_of(space, &chosen),
        objective: score,
        optimal: true,
        timed_out: false,
        strategy: Strategy::BruteForce,
        nodes: search.nodes,
    })
}

struct Search<'a> {
    space: &'a HypothesisSpace,
    examples: &'a [OrderingExample],
    max_constraints: usize,
    best: Option<(u64, Vec<CandidateKey>, Vec<usize>)>,
    nodes: u64,
}

impl Search<'_> {
    fn visit(&mut self, start: usize, subset: &mut Vec<usize>) -> Result<(), LearnError> {
        self.nodes += 1;
        let score = objective(&theory_of(self.space, subset), self.examples)?;
        let mut keys: Vec<CandidateKey> =
            subset.iter().map(|&i| self.space.key(i).clone()).collect();
        keys.sort();
        let better = self
            .best
            .as_ref()
            .is_none_or(|(o, k, _)| tie_break((score, &keys), (*o, k)).is_lt());
        if better {
            self.best = Some((score, keys, subset.clone()));
        }
        if subset.len() < self.max_constraints {
            for i in start..self.space.len() {
                subset.push(i);
                self.visit(i + 1, subset)?;
                subset.pop();
            }
        }
        Ok(())
    }
}

fn theory_of(space: &HypothesisSpace, subset: &[usize]) -> Theory {
    Theory::new(
        subset.iter().map(|&i| space.candidates()[i].clone()).collect(),
        space.maxp(),
    )
    .expect("candidate levels are within maxp")
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::example_two;
    use super::super::{expand_mode_bias, ModeBias};
    use super::*;
    use crate::asp::parse_theory;

    #[test]
    fn example_two_by_enumeration() {
        let (bias, _, examples) = example_two();
        let out = brute_force_learn(&expand_mode_bias(&bias), &examples, 2).unwrap();
        assert_eq!(out.objective, 2);
        assert_eq!(out.theory, parse_theory("#maxp(2).\n:~ value(p,V1).[V1@1, V1]").unwrap());
        // 1 + 8 + 28 subsets.
        assert_eq!(out.nodes, 37);
    }

    #[test]
    fn guard_rejects_large_spaces() {
        let bias = ModeBias::over_features(&["a", "b", "c"], 2);
        assert!(matches!(
            brute_force_learn(&expand_mode_bias(&bias), &[], 1),
            Err(LearnError::BruteForceGuard { candidates: 24, .. })
        ));
        let (bias, _, examples) = example_two();
        assert!(brute_force_learn(&expand_mode_bias(&bias), &examples, 4).is_err());
    }
}
