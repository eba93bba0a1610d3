//! Concrete syntax for theories and contexts.
//!
//! Constraints are written one per line as `:~ body.[w@l, t1, ..., tm]`.
//! The dot before the bracket and a trailing dot are both optional. Lines
//! starting with `%` or `#` are comments, except `#maxp(h).`, which sets the
//! theory's maximum priority level.

use std::fmt::Write as _;

use super::{AspError, Atom, GroundAtomSet, Term, Theory, WeakConstraint, Weight};

pub fn render_constraint(wc: &WeakConstraint) -> String {
    let body = wc
        .body
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let mut out = format!(":~ {body}.[{}@{}", wc.weight, wc.level);
    for t in &wc.terms {
        write!(out, ", {t}").unwrap();
    }
    out.push(']');
    out
}

/// One constraint per line. A `#maxp` line is added only when the theory's
/// `maxp` is larger than its highest level, so that parsing gives the same
/// theory back.
pub fn render_theory(theory: &Theory) -> String {
    let mut out = String::new();
    let top = theory.constraints().iter().map(|c| c.level).max().unwrap_or(1);
    if theory.maxp() > top {
        writeln!(out, "#maxp({}).", theory.maxp()).unwrap();
    }
    for wc in theory.constraints() {
        out.push_str(&render_constraint(wc));
        out.push('\n');
    }
    out
}

/// Facts of a context, `value(p, 1).` style, separated by spaces.
pub fn render_facts(atoms: &GroundAtomSet) -> String {
    atoms
        .iter()
        .map(|a| {
            let args = a.args.iter().map(|t| t.to_string()).collect::<Vec<_>>();
            if args.is_empty() {
                format!("{}.", a.predicate)
            } else {
                format!("{}({}).", a.predicate, args.join(", "))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_theory(text: &str) -> Result<Theory, AspError> {
    let mut constraints = Vec::new();
    let mut maxp: Option<u32> = None;
    for (line_no, line) in text.lines().enumerate() {
        let mut p = Parser::new(line, line_no + 1);
        p.skip_ws();
        if p.at_end() || p.peek() == Some('%') {
            continue;
        }
        if p.peek() == Some('#') {
            if p.rest().starts_with("#maxp") {
                p.expect_str("#maxp")?;
                p.expect('(')?;
                let h = p.integer()?;
                p.expect(')')?;
                p.eat('.');
                p.finish()?;
                if h < 1 {
                    return Err(p.error("#maxp must be at least 1"));
                }
                maxp = Some(h as u32);
            }
            continue;
        }
        constraints.push(p.weak_constraint()?);
    }
    let top = constraints.iter().map(|c| c.level).max().unwrap_or(1);
    Theory::new(constraints, maxp.unwrap_or(top).max(top))
}

/// Parses a fact list such as `category(2). value(p, 1).`
pub fn parse_facts(text: &str) -> Result<GroundAtomSet, AspError> {
    let mut atoms = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let mut p = Parser::new(line, line_no + 1);
        loop {
            p.skip_ws();
            if p.at_end() || p.peek() == Some('%') {
                break;
            }
            let atom = p.atom()?;
            if !atom.is_ground() {
                return Err(p.error(&format!("fact `{atom}` contains a variable")));
            }
            p.skip_ws();
            p.expect('.')?;
            atoms.push(atom);
        }
    }
    GroundAtomSet::new(atoms)
}

/// Plain-language reading of one constraint.
pub fn gloss_constraint(wc: &WeakConstraint) -> String {
    let value_atom = wc
        .body
        .iter()
        .find(|a| a.predicate == "value" && a.args.len() == 2 && a.args[1] == Term::Var);
    let conditions: Vec<String> = wc
        .body
        .iter()
        .filter(|a| Some(*a) != value_atom)
        .map(describe_condition)
        .collect();
    let prefix = if conditions.is_empty() {
        String::new()
    } else {
        format!("when {}, ", conditions.join(" and "))
    };
    let level = wc.level;
    match (wc.weight, value_atom) {
        (Weight::Var { negated }, Some(atom)) => {
            let feature = &atom.args[0];
            let direction = if negated { "higher" } else { "lower" };
            format!("{prefix}{direction} {feature} is preferred at priority {level}")
        }
        (Weight::Const(w), value_atom) => {
            let subject = match value_atom {
                Some(atom) => format!("items with a {} value", atom.args[0]),
                None => "items".to_string(),
            };
            let (verb, amount) = if w >= 0 {
                ("penalized", w)
            } else {
                ("favoured", -w)
            };
            format!("{prefix}{subject} are {verb} by {amount} at priority {level}")
        }
        (Weight::Var { negated }, None) => {
            let direction = if negated { "higher" } else { "lower" };
            format!("{prefix}a {direction} V1 is preferred at priority {level}")
        }
    }
}

pub fn gloss_theory(theory: &Theory) -> Vec<String> {
    let mut ordered: Vec<&WeakConstraint> = theory.constraints().iter().collect();
    ordered.sort_by(|a, b| b.level.cmp(&a.level));
    ordered.into_iter().map(gloss_constraint).collect()
}

fn describe_condition(atom: &Atom) -> String {
    match atom.args.as_slice() {
        [single] => format!("{} is {}", atom.predicate, single),
        _ => atom.to_string(),
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    source: &'a str,
}

impl<'a> Parser<'a> {
    fn new(source: &'a str, line: usize) -> Parser<'a> {
        Parser {
            chars: source.chars().collect(),
            pos: 0,
            line,
            source,
        }
    }

    fn error(&self, message: &str) -> AspError {
        AspError::Parse {
            line: self.line,
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), AspError> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = self
                .peek()
                .map(|f| format!("`{f}`"))
                .unwrap_or_else(|| "end of line".into());
            Err(self.error(&format!("expected `{c}`, found {found}")))
        }
    }

    fn expect_str(&mut self, s: &str) -> Result<(), AspError> {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.chars().count();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{s}`")))
        }
    }

    fn finish(&mut self) -> Result<(), AspError> {
        self.skip_ws();
        if self.at_end() || self.peek() == Some('%') {
            Ok(())
        } else {
            Err(self.error(&format!("unexpected trailing input in `{}`", self.source.trim())))
        }
    }

    fn identifier(&mut self) -> Result<String, AspError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an identifier"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn integer(&mut self) -> Result<i64, AspError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| {
            self.pos = start;
            self.error("expected an integer")
        })
    }

    fn term(&mut self) -> Result<Term, AspError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == '-' || c.is_ascii_digit() => Ok(Term::Int(self.integer()?)),
            Some(c) if c.is_uppercase() => {
                self.identifier()?;
                Ok(Term::Var)
            }
            Some(c) if c.is_alphabetic() || c == '_' => Ok(Term::Sym(self.identifier()?)),
            _ => Err(self.error("expected a term")),
        }
    }

    fn atom(&mut self) -> Result<Atom, AspError> {
        self.skip_ws();
        if !matches!(self.peek(), Some(c) if c.is_lowercase()) {
            return Err(self.error("expected an atom"));
        }
        let predicate = self.identifier()?;
        let mut args = Vec::new();
        if self.eat('(') {
            loop {
                args.push(self.term()?);
                if !self.eat(',') {
                    break;
                }
            }
            self.expect(')')?;
        }
        Ok(Atom { predicate, args })
    }

    fn weight(&mut self) -> Result<Weight, AspError> {
        self.skip_ws();
        let negated = self.peek() == Some('-');
        let save = self.pos;
        if negated {
            self.pos += 1;
        }
        if matches!(self.peek(), Some(c) if c.is_uppercase()) {
            self.identifier()?;
            return Ok(Weight::Var { negated });
        }
        self.pos = save;
        Ok(Weight::Const(self.integer()?))
    }

    fn weak_constraint(&mut self) -> Result<WeakConstraint, AspError> {
        self.expect_str(":~")?;
        let mut body = vec![self.atom()?];
        while self.eat(',') {
            body.push(self.atom()?);
        }
        self.eat('.');
        self.expect('[')?;
        let weight = self.weight()?;
        self.expect('@')?;
        let level = self.integer()?;
        if level < 1 {
            return Err(self.error("priority level must be at least 1"));
        }
        let mut terms = Vec::new();
        while self.eat(',') {
            terms.push(self.term()?);
        }
        self.expect(']')?;
        self.eat('.');
        self.finish()?;
        WeakConstraint::new(body, weight, level as u32, terms).map_err(|e| match e {
            AspError::InvalidConstraint(msg) => self.error(&msg),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_listing_style() {
        let wc = WeakConstraint::on_value("p", Weight::PLUS_VAR, 1);
        assert_eq!(render_constraint(&wc), ":~ value(p,V1).[V1@1, V1]");
        let t = Theory::new(vec![wc], 1).unwrap();
        assert_eq!(render_theory(&t), ":~ value(p,V1).[V1@1, V1]\n");
    }

    #[test]
    fn parses_five_level_theory() {
        let text = "\
:~value(vegetables, V1).[-V1@1, V1]
:~value(meat, V1).[-V1@2, V1]
:~value(difficulty, V1).[-V1@3, V1]
:~value(stewing, V1).[V1@4, V1]
:~value(dairies, V1), category(3).[V1@5, V1]
";
        let t = parse_theory(text).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.maxp(), 5);
        let mut levels: Vec<u32> = t.constraints().iter().map(|c| c.level).collect();
        levels.sort();
        assert_eq!(levels, vec![1, 2, 3, 4, 5]);
        let last = t.constraints().iter().find(|c| c.level == 5).unwrap();
        assert_eq!(last.body.len(), 2);
        assert_eq!(last.body[1], Atom::new("category", vec![Term::Int(3)]));
        assert_eq!(parse_theory(&render_theory(&t)).unwrap(), t);
    }

    #[test]
    fn accepts_constant_weights_symbolic_terms_and_comments() {
        let text = "% example\n# a comment\n:~ q(a). [1@2, a]\n:~ q(b). [3@1, b]\n:~ q(c). [-1@2, c]\n";
        let t = parse_theory(text).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t
            .constraints()
            .iter()
            .any(|c| c.weight == Weight::Const(-1) && c.terms == vec![Term::sym("c")]));
        // bracket directly after the body, trailing dot
        let t = parse_theory(":~value(browning,V1)[V1@1, V1].").unwrap();
        assert_eq!(t.constraints()[0], WeakConstraint::on_value("browning", Weight::PLUS_VAR, 1));
    }

    #[test]
    fn empty_theory_round_trips() {
        let t = Theory::empty(1);
        assert_eq!(render_theory(&t), "");
        assert_eq!(parse_theory("").unwrap(), t);
        let t5 = Theory::empty(5);
        assert_eq!(parse_theory(&render_theory(&t5)).unwrap(), t5);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_theory(":~ value(p,V1).[V1@1, V1]\n:~ value(p,V1).[V1 1, V1]").unwrap_err();
        match err {
            AspError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_theory(":~ value(p,V1).[1@0, V1]"),
            Err(AspError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_theory(":~ value(p,V1).[V1@1]"),
            Err(AspError::Parse { .. })
        ));
    }

    #[test]
    fn facts_round_trip() {
        let facts = parse_facts("category(2). value(p, 1).").unwrap();
        assert_eq!(facts.len(), 2);
        assert!(facts.contains(&Atom::value("p", 1)));
        assert_eq!(render_facts(&facts), "category(2). value(p, 1).");
        assert_eq!(parse_facts(&render_facts(&facts)).unwrap(), facts);
        assert!(parse_facts("value(p, X).").is_err());
    }

    #[test]
    fn gloss_templates() {
        let up = WeakConstraint::on_value("p", Weight::MINUS_VAR, 2);
        assert_eq!(gloss_constraint(&up), "higher p is preferred at priority 2");
        let down = WeakConstraint::on_value("stewing", Weight::PLUS_VAR, 4);
        assert_eq!(gloss_constraint(&down), "lower stewing is preferred at priority 4");
        let cond = parse_theory(":~ value(dairies,V1), category(3).[V1@5, V1]").unwrap();
        assert_eq!(
            gloss_constraint(&cond.constraints()[0]),
            "when category is 3, lower dairies is preferred at priority 5"
        );
        let cat = parse_theory(":~ category(2).[-1@1, 2]").unwrap();
        assert_eq!(
            gloss_constraint(&cat.constraints()[0]),
            "when category is 2, items are favoured by 1 at priority 1"
        );
    }
}
