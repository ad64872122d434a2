//! Context-free grammars over bytes.
//!
//! A [`Grammar`] is an ordered list of named rules. Rule bodies are
//! [`RuleExpr`] trees whose terminals are byte classes and byte literals;
//! Unicode in the surface syntax is lowered to UTF-8 byte sequences by the
//! parser, so everything downstream works on the byte alphabet 0..=255.
//!
//! Construction always validates: every reference resolves, names are
//! unique, every rule can derive at least one string, and no rule can reach
//! itself without consuming input (left recursion). The last check keeps the
//! pushdown automaton closure finite.

mod normalize;
mod parse;
mod print;

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::bytes::ByteSet;

pub use normalize::normalize_grammar;
pub use parse::parse_grammar;
pub use print::pretty_print;

/// Index of a rule inside its [`Grammar`] (and inside the compiled PDA).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub u32);

impl RuleId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleExpr {
    /// One byte from `set`, or from its complement when `negated`.
    ByteClass {
        set: ByteSet,
        negated: bool,
    },
    Literal(Vec<u8>),
    Sequence(Vec<RuleExpr>),
    Choice(Vec<RuleExpr>),
    Repeat {
        expr: Box<RuleExpr>,
        min: u32,
        /// `None` is unbounded.
        max: Option<u32>,
    },
    RuleRef(RuleId),
    Empty,
}

impl RuleExpr {
    pub fn class(set: ByteSet) -> Self {
        RuleExpr::ByteClass { set, negated: false }
    }

    pub fn literal(bytes: impl Into<Vec<u8>>) -> Self {
        RuleExpr::Literal(bytes.into())
    }

    pub fn star(expr: RuleExpr) -> Self {
        RuleExpr::Repeat { expr: Box::new(expr), min: 0, max: None }
    }

    pub fn optional(expr: RuleExpr) -> Self {
        RuleExpr::Repeat { expr: Box::new(expr), min: 0, max: Some(1) }
    }

    /// The set of bytes a `ByteClass` actually matches.
    pub fn effective_class(set: &ByteSet, negated: bool) -> ByteSet {
        if negated {
            set.complement()
        } else {
            *set
        }
    }

    fn visit_refs(&self, f: &mut impl FnMut(RuleId)) {
        match self {
            RuleExpr::RuleRef(r) => f(*r),
            RuleExpr::Sequence(items) | RuleExpr::Choice(items) => items.iter().for_each(|e| e.visit_refs(f)),
            RuleExpr::Repeat { expr, .. } => expr.visit_refs(f),
            _ => {}
        }
    }

    fn nullable(&self, rules: &[bool]) -> bool {
        match self {
            RuleExpr::ByteClass { .. } => false,
            RuleExpr::Literal(bytes) => bytes.is_empty(),
            RuleExpr::Sequence(items) => items.iter().all(|e| e.nullable(rules)),
            RuleExpr::Choice(items) => items.iter().any(|e| e.nullable(rules)),
            RuleExpr::Repeat { expr, min, max } => *min == 0 || *max == Some(0) || expr.nullable(rules),
            RuleExpr::RuleRef(r) => rules[r.index()],
            RuleExpr::Empty => true,
        }
    }

    fn productive(&self, rules: &[bool]) -> bool {
        match self {
            RuleExpr::ByteClass { set, negated } => !Self::effective_class(set, *negated).is_empty(),
            RuleExpr::Literal(_) | RuleExpr::Empty => true,
            RuleExpr::Sequence(items) => items.iter().all(|e| e.productive(rules)),
            RuleExpr::Choice(items) => items.iter().any(|e| e.productive(rules)),
            RuleExpr::Repeat { expr, min, max } => *min == 0 || *max == Some(0) || expr.productive(rules),
            RuleExpr::RuleRef(r) => rules[r.index()],
        }
    }

    /// Rules that may be entered before any byte is consumed.
    fn leading_refs(&self, nullable: &[bool], out: &mut Vec<RuleId>) {
        match self {
            RuleExpr::RuleRef(r) => out.push(*r),
            RuleExpr::Sequence(items) => {
                for item in items {
                    item.leading_refs(nullable, out);
                    if !item.nullable(nullable) {
                        break;
                    }
                }
            }
            RuleExpr::Choice(items) => items.iter().for_each(|e| e.leading_refs(nullable, out)),
            RuleExpr::Repeat { expr, max, .. } if *max != Some(0) => expr.leading_refs(nullable, out),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub body: RuleExpr,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("undefined rule `{name}` referenced at {line}:{column}")]
    UndefinedRule { name: String, line: usize, column: usize },
    #[error("rule reference {0} is out of range")]
    DanglingRef(u32),
    #[error("duplicate rule `{name}` at {line}:{column}")]
    DuplicateRule { name: String, line: usize, column: usize },
    #[error("grammar has no rules")]
    Empty,
    #[error("root rule {0} does not exist")]
    MissingRoot(u32),
    #[error("rules derive no finite string: {}", .0.join(", "))]
    Unproductive(Vec<String>),
    #[error("left recursion through {}", .0.join(" -> "))]
    LeftRecursion(Vec<String>),
    #[error("invalid repetition bounds {{{min},{max}}}")]
    InvalidRepeat { min: u32, max: u32 },
}

/// A validated context-free grammar. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    rules: Vec<Rule>,
    root: RuleId,
}

impl Grammar {
    /// Validates and wraps `rules`.
    pub fn new(rules: Vec<Rule>, root: RuleId) -> Result<Self, GrammarError> {
        if rules.is_empty() {
            return Err(GrammarError::Empty);
        }
        if root.index() >= rules.len() {
            return Err(GrammarError::MissingRoot(root.0));
        }
        let mut seen = HashSet::new();
        for rule in &rules {
            if !seen.insert(rule.name.as_str()) {
                return Err(GrammarError::DuplicateRule { name: rule.name.clone(), line: 0, column: 0 });
            }
        }
        for rule in &rules {
            let mut bad = None;
            rule.body.visit_refs(&mut |r| {
                if r.index() >= rules.len() {
                    bad = Some(r.0);
                }
            });
            if let Some(r) = bad {
                return Err(GrammarError::DanglingRef(r));
            }
            check_repeats(&rule.body)?;
        }
        let grammar = Grammar { rules, root };
        grammar.check_productive()?;
        grammar.check_left_recursion()?;
        Ok(grammar)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.index()]
    }

    pub fn root(&self) -> RuleId {
        self.root
    }

    pub fn rule_id(&self, name: &str) -> Option<RuleId> {
        self.rules.iter().position(|r| r.name == name).map(|i| RuleId(i as u32))
    }

    /// Per-rule flag: can the rule derive the empty string.
    pub fn nullable_rules(&self) -> Vec<bool> {
        let mut nullable = vec![false; self.rules.len()];
        loop {
            let mut changed = false;
            for (i, rule) in self.rules.iter().enumerate() {
                if !nullable[i] && rule.body.nullable(&nullable) {
                    nullable[i] = true;
                    changed = true;
                }
            }
            if !changed {
                return nullable;
            }
        }
    }

    fn check_productive(&self) -> Result<(), GrammarError> {
        let mut productive = vec![false; self.rules.len()];
        loop {
            let mut changed = false;
            for (i, rule) in self.rules.iter().enumerate() {
                if !productive[i] && rule.body.productive(&productive) {
                    productive[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let dead: Vec<String> =
            self.rules.iter().zip(&productive).filter(|(_, ok)| !**ok).map(|(r, _)| r.name.clone()).collect();
        if dead.is_empty() {
            Ok(())
        } else {
            Err(GrammarError::Unproductive(dead))
        }
    }

    fn check_left_recursion(&self) -> Result<(), GrammarError> {
        let nullable = self.nullable_rules();
        let leading: Vec<Vec<RuleId>> = self
            .rules
            .iter()
            .map(|r| {
                let mut out = Vec::new();
                r.body.leading_refs(&nullable, &mut out);
                out.sort();
                out.dedup();
                out
            })
            .collect();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.rules.len()];
        let mut path = Vec::new();
        for start in 0..self.rules.len() {
            if state[start] == 0 {
                if let Some(cycle) = self.find_cycle(start, &leading, &mut state, &mut path) {
                    return Err(GrammarError::LeftRecursion(cycle));
                }
            }
        }
        Ok(())
    }

    fn find_cycle(
        &self,
        at: usize,
        leading: &[Vec<RuleId>],
        state: &mut [u8],
        path: &mut Vec<usize>,
    ) -> Option<Vec<String>> {
        state[at] = 1;
        path.push(at);
        for next in &leading[at] {
            let n = next.index();
            if state[n] == 1 {
                let from = path.iter().position(|p| *p == n).unwrap_or(0);
                let mut cycle: Vec<String> = path[from..].iter().map(|i| self.rules[*i].name.clone()).collect();
                cycle.push(self.rules[n].name.clone());
                return Some(cycle);
            }
            if state[n] == 0 {
                if let Some(c) = self.find_cycle(n, leading, state, path) {
                    return Some(c);
                }
            }
        }
        path.pop();
        state[at] = 2;
        None
    }

    /// Name → id map, handy for tests and tooling.
    pub fn name_map(&self) -> HashMap<&str, RuleId> {
        self.rules.iter().enumerate().map(|(i, r)| (r.name.as_str(), RuleId(i as u32))).collect()
    }
}

fn check_repeats(expr: &RuleExpr) -> Result<(), GrammarError> {
    match expr {
        RuleExpr::Repeat { expr, min, max } => {
            if let Some(max) = max {
                if min > max {
                    return Err(GrammarError::InvalidRepeat { min: *min, max: *max });
                }
            }
            check_repeats(expr)
        }
        RuleExpr::Sequence(items) | RuleExpr::Choice(items) => items.iter().try_for_each(check_repeats),
        _ => Ok(()),
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}
