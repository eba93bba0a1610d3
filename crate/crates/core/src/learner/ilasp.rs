//! Export of learning tasks in the ILASP input format.

use std::fmt::Write as _;

use crate::asp::{render_facts, GroundAtomSet};

use super::{ModeBias, OrderingExample, WeightForm};

/// Writes a task file for the external ILASP system.
///
/// Every named context becomes a `#pos` declaration. An example whose context
/// is not among `contexts` gets a fresh `ctx<k>` declaration appended.
/// Examples become `#brave_ordering(id@penalty, first, second, symbol).`
pub fn export_ilasp_task(
    bias: &ModeBias,
    contexts: &[(String, GroundAtomSet)],
    examples: &[OrderingExample],
) -> String {
    let mut named: Vec<(String, &GroundAtomSet)> =
        contexts.iter().map(|(n, c)| (n.clone(), c)).collect();
    let mut orderings = Vec::with_capacity(examples.len());
    for ex in examples {
        let a = name_of(&ex.first, &mut named);
        let b = name_of(&ex.second, &mut named);
        orderings.push(format!(
            "#brave_ordering({}@{},{},{},{}).",
            ex.id, ex.penalty, a, b, ex.symbol
        ));
    }

    let mut out = String::new();
    for (name, ctx) in &named {
        writeln!(out, "#pos({name},{{}},{{}},{{{}}}).", render_facts(ctx)).unwrap();
    }
    out.push('\n');
    writeln!(out, "#maxv({}).", bias.maxv()).unwrap();
    writeln!(out, "#maxp({}).", bias.maxp).unwrap();
    out.push('\n');
    writeln!(out, "#modeo(1, value(const(val), var(val))).").unwrap();
    if !bias.category_constants.is_empty() {
        writeln!(out, "#modeo(1, category(const(mg)), (positive)).").unwrap();
    }
    if bias.weight_forms.iter().any(|w| w.is_var()) {
        writeln!(out, "#weight(val).").unwrap();
    }
    if bias.weight_forms.contains(&WeightForm::PlusOne) {
        writeln!(out, "#weight(1).").unwrap();
    }
    if bias.weight_forms.contains(&WeightForm::MinusOne) {
        writeln!(out, "#weight(-1).").unwrap();
    }
    for c in &bias.category_constants {
        writeln!(out, "#constant(mg, {c}).").unwrap();
    }
    for f in &bias.value_features {
        writeln!(out, "#constant(val, {f}).").unwrap();
    }
    if !orderings.is_empty() {
        out.push('\n');
        for line in orderings {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

fn name_of<'a>(ctx: &'a GroundAtomSet, named: &mut Vec<(String, &'a GroundAtomSet)>) -> String {
    if let Some((n, _)) = named.iter().find(|(_, c)| **c == *ctx) {
        return n.clone();
    }
    let mut k = named.len();
    while named.iter().any(|(n, _)| *n == format!("ctx{k}")) {
        k += 1;
    }
    let n = format!("ctx{k}");
    named.push((n.clone(), ctx));
    n
}
