//! Expanded suffixes: what can follow a rule once it finishes.
//!
//! The automaton lives on PDA nodes. From a node it follows epsilon edges
//! and byte edges. A node that calls a rule is final, since nothing is
//! known about the callee. When a rule finishes, the default mode carries on
//! with whatever may follow that rule in turn; the strict mode stops there
//! and treats the node as final. Finishing the root rule with input left
//! over is a dead end unless the root is also called from somewhere.

use std::collections::BTreeSet;

use crate::bytes::ByteSet;
use crate::grammar::RuleId;
use crate::pda::{EdgeLabel, NodeId, Pda};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuffixNode {
    pub is_final: bool,
    pub edges: Vec<(ByteSet, NodeId)>,
}

/// Epsilon-free suffix automata for every rule, sharing one node set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpandedSuffixFsa {
    /// Indexed by PDA node; `None` for nodes no suffix visits.
    nodes: Vec<Option<SuffixNode>>,
    /// Start nodes per rule. `None` means nothing is known about the rule.
    starts: Vec<Option<Vec<NodeId>>>,
    strict: bool,
}

impl ExpandedSuffixFsa {
    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn starts(&self, rule: RuleId) -> Option<&[NodeId]> {
        self.starts[rule.0 as usize].as_deref()
    }

    pub fn node(&self, id: NodeId) -> Option<&SuffixNode> {
        self.nodes[id.index()].as_ref()
    }

    /// Number of automaton nodes and edges over all rules.
    pub fn size(&self) -> (usize, usize) {
        let live = self.nodes.iter().flatten();
        let edges = live.clone().map(|n| n.edges.len()).sum();
        (live.count(), edges)
    }

    /// Whether `rest` could follow a completion of `rule`: some run either
    /// consumes all of it or reaches a final node. Rules without
    /// information always pass.
    pub fn admits(&self, rule: RuleId, rest: &[u8]) -> bool {
        let Some(starts) = self.starts(rule) else { return true };
        let mut cur: Vec<NodeId> = starts.to_vec();
        for &b in rest {
            let mut next = Vec::new();
            for &n in &cur {
                let node = self.node(n).expect("suffix node");
                if node.is_final {
                    return true;
                }
                for (set, t) in &node.edges {
                    if set.contains(b) {
                        next.push(*t);
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            next.sort_unstable();
            next.dedup();
            cur = next;
        }
        true
    }
}

pub fn build_context_expansion(p: &Pda) -> ExpandedSuffixFsa {
    build(p, false)
}

/// Stops at rule completions instead of following the enclosing contexts,
/// and leaves unreferenced rules (the root included) without information.
pub fn build_context_expansion_strict(p: &Pda) -> ExpandedSuffixFsa {
    build(p, true)
}

fn build(p: &Pda, strict: bool) -> ExpandedSuffixFsa {
    let nrules = p.rules().len();
    let mut callers: Vec<Vec<NodeId>> = vec![Vec::new(); nrules];
    for e in p.edges() {
        if let EdgeLabel::Rule(r) = e.label {
            callers[r.0 as usize].push(e.target);
        }
    }
    for c in &mut callers {
        c.sort_unstable();
        c.dedup();
    }
    let starts: Vec<Option<Vec<NodeId>>> = (0..nrules)
        .map(|r| {
            let c = &callers[r];
            if c.is_empty() && (strict || RuleId(r as u32) != p.root()) {
                None
            } else {
                Some(c.clone())
            }
        })
        .collect();

    let mut nodes: Vec<Option<SuffixNode>> = vec![None; p.node_count()];
    let mut work: Vec<NodeId> = starts.iter().flatten().flatten().copied().collect();
    while let Some(n) = work.pop() {
        if nodes[n.index()].is_some() {
            continue;
        }
        let (is_final, edges) = closure_edges(p, n, &callers, strict);
        for (_, t) in &edges {
            if nodes[t.index()].is_none() {
                work.push(*t);
            }
        }
        nodes[n.index()] = Some(SuffixNode { is_final, edges });
    }
    ExpandedSuffixFsa { nodes, starts, strict }
}

fn closure_edges(p: &Pda, n: NodeId, callers: &[Vec<NodeId>], strict: bool) -> (bool, Vec<(ByteSet, NodeId)>) {
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut work = vec![n];
    let mut is_final = false;
    let mut edges: Vec<(ByteSet, NodeId)> = Vec::new();
    while let Some(m) = work.pop() {
        if !seen.insert(m) {
            continue;
        }
        let node = p.node(m);
        for e in &node.edges {
            match e.label {
                EdgeLabel::Bytes(set) => edges.push((set, e.target)),
                EdgeLabel::Epsilon => work.push(e.target),
                EdgeLabel::Rule(_) => is_final = true,
            }
        }
        if node.is_final {
            if strict {
                is_final = true;
            } else {
                work.extend(callers[node.rule.0 as usize].iter().copied());
            }
        }
    }
    edges.sort_by_key(|(s, t)| (*t, s.words()));
    let mut merged: Vec<(ByteSet, NodeId)> = Vec::new();
    for (s, t) in edges {
        match merged.last_mut() {
            Some((ms, mt)) if *mt == t => *ms = ms.union(&s),
            _ => merged.push((s, t)),
        }
    }
    (is_final, merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::ARRAY_STRING_GRAMMAR;
    use crate::grammar::parse_grammar;
    use crate::pda::build_pda;

    #[test]
    fn string_is_followed_by_comma_or_bracket() {
        let g = parse_grammar(ARRAY_STRING_GRAMMAR).unwrap();
        let p = build_pda(&g);
        let string = g.rule_id("string").unwrap();
        let full = build_context_expansion(&p);
        assert!(full.admits(string, b","));
        assert!(full.admits(string, b"]"));
        assert!(full.admits(string, b"]]"));
        assert!(!full.admits(string, b"x"));
        assert!(!full.admits(string, b"\""));
        // `]` then `x`: after the array closes only `,`, `]` or the end fit.
        assert!(!full.admits(string, b"]x"));
        assert!(full.admits(string, b"],\"q"));
        // Both callers of `string` finish their own rule right away, so the
        // strict form knows nothing.
        assert!(build_context_expansion_strict(&p).admits(string, b"x"));
    }

    #[test]
    fn unreferenced_rules_carry_no_information() {
        let g = parse_grammar("root ::= \"a\" other\nother ::= \"b\"\nlost ::= \"c\"").unwrap();
        let p = build_pda(&g);
        let lost = g.rule_id("lost").unwrap();
        let ctx = build_context_expansion(&p);
        assert!(ctx.starts(lost).is_none());
        assert!(ctx.admits(lost, b"anything"));
        // The root finishing leaves nothing to match.
        assert_eq!(ctx.starts(g.root()), Some(&[][..]));
        assert!(!ctx.admits(g.root(), b"x"));
        assert!(build_context_expansion_strict(&p).admits(g.root(), b"x"));
    }

    #[test]
    fn reference_right_after_a_call_allows_anything() {
        let g = parse_grammar("root ::= a b\na ::= \"x\"\nb ::= \"y\"").unwrap();
        let p = build_pda(&g);
        let a = g.rule_id("a").unwrap();
        let ctx = build_context_expansion_strict(&p);
        let starts = ctx.starts(a).unwrap();
        assert_eq!(starts.len(), 1);
        let s = ctx.node(starts[0]).unwrap();
        assert!(s.is_final && s.edges.is_empty());
        assert!(ctx.admits(a, b"zzz"));
    }
}
