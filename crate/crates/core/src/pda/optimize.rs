//! Structure optimizations: rule inlining and node merging.

use super::{Edge, EdgeLabel, NodeId, Pda, PdaNode};
use crate::grammar::RuleId;

/// Mutable working copy with tombstones; compacted back into a [`Pda`].
struct Work {
    nodes: Vec<PdaNode>,
    alive: Vec<bool>,
    starts: Vec<(String, NodeId)>,
    root: RuleId,
}

impl Work {
    fn new(p: &Pda) -> Self {
        Work {
            nodes: p.nodes().to_vec(),
            alive: vec![true; p.node_count()],
            starts: p.rules().iter().map(|r| (r.name.clone(), r.start)).collect(),
            root: p.root(),
        }
    }

    fn is_start(&self, n: NodeId) -> bool {
        self.starts.iter().any(|(_, s)| *s == n)
    }

    fn inbound(&self) -> Vec<u32> {
        let mut inbound = vec![0u32; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if self.alive[i] {
                for e in &n.edges {
                    inbound[e.target.index()] += 1;
                }
            }
        }
        inbound
    }

    fn rule_size(&self, rule: RuleId) -> usize {
        self.nodes.iter().zip(&self.alive).filter(|(n, a)| **a && n.rule == rule).count()
    }

    fn redirect(&mut self, from: NodeId, to: NodeId) {
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if self.alive[i] {
                for e in &mut n.edges {
                    if e.target == from {
                        e.target = to;
                    }
                }
            }
        }
        for (_, s) in &mut self.starts {
            if *s == from {
                *s = to;
            }
        }
    }

    /// Moves `from`'s outgoing edges and final flag onto `into` and kills it.
    fn absorb(&mut self, into: NodeId, from: NodeId) {
        let moved = std::mem::take(&mut self.nodes[from.index()].edges);
        let fin = self.nodes[from.index()].is_final;
        let dst = &mut self.nodes[into.index()];
        dst.edges.extend(moved);
        dst.is_final |= fin;
        self.alive[from.index()] = false;
        self.redirect(from, into);
    }

    /// Coalesces parallel byte edges, drops duplicate and epsilon
    /// self-loop edges. Returns whether anything changed.
    fn tidy_edges(&mut self) -> bool {
        let mut changed = false;
        for i in 0..self.nodes.len() {
            if !self.alive[i] {
                continue;
            }
            let me = NodeId(i as u32);
            let old = std::mem::take(&mut self.nodes[i].edges);
            let before = old.len();
            let mut out: Vec<Edge> = Vec::with_capacity(before);
            for e in old {
                if e.label == EdgeLabel::Epsilon && e.target == me {
                    continue;
                }
                if let EdgeLabel::Bytes(set) = e.label {
                    if let Some(prev) =
                        out.iter_mut().find(|o| o.target == e.target && matches!(o.label, EdgeLabel::Bytes(_)))
                    {
                        let EdgeLabel::Bytes(p) = prev.label else { unreachable!() };
                        let merged = p.union(&set);
                        if merged != p {
                            prev.label = EdgeLabel::Bytes(merged);
                        }
                        continue;
                    }
                }
                if !out.contains(&e) {
                    out.push(e);
                }
            }
            changed |= out.len() != before;
            self.nodes[i].edges = out;
        }
        changed
    }

    /// Drops nodes that cannot be reached from their rule's start or cannot
    /// reach one of its finals.
    fn trim(&mut self) -> bool {
        let n = self.nodes.len();
        let mut fwd = vec![false; n];
        let mut stack: Vec<NodeId> = self.starts.iter().map(|(_, s)| *s).collect();
        while let Some(x) = stack.pop() {
            if std::mem::replace(&mut fwd[x.index()], true) {
                continue;
            }
            for e in &self.nodes[x.index()].edges {
                stack.push(e.target);
            }
        }
        let mut rev: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for i in 0..n {
            if self.alive[i] {
                for e in &self.nodes[i].edges {
                    rev[e.target.index()].push(NodeId(i as u32));
                }
            }
        }
        let mut bwd = vec![false; n];
        let mut stack: Vec<NodeId> =
            (0..n).filter(|i| self.alive[*i] && self.nodes[*i].is_final).map(|i| NodeId(i as u32)).collect();
        while let Some(x) = stack.pop() {
            if std::mem::replace(&mut bwd[x.index()], true) {
                continue;
            }
            stack.extend(rev[x.index()].iter().copied());
        }
        let mut changed = false;
        for i in 0..n {
            if self.alive[i] && !(fwd[i] && bwd[i]) && !self.is_start(NodeId(i as u32)) {
                self.alive[i] = false;
                self.nodes[i].edges.clear();
                changed = true;
            }
        }
        if changed {
            for i in 0..n {
                if self.alive[i] {
                    let alive = &self.alive;
                    self.nodes[i].edges.retain(|e| alive[e.target.index()]);
                }
            }
        }
        changed
    }

    /// Applies the first applicable merge; false at the fixpoint.
    fn merge_once(&mut self) -> bool {
        let inbound = self.inbound();
        for i in 0..self.nodes.len() {
            if !self.alive[i] {
                continue;
            }
            let s = NodeId(i as u32);
            let edges = self.nodes[i].edges.clone();
            for e in &edges {
                if e.label != EdgeLabel::Epsilon || e.target == s {
                    continue;
                }
                let t = e.target;
                let (sf, tf) = (self.nodes[i].is_final, self.nodes[t.index()].is_final);
                // s only leads to t: entering s is entering t.
                if edges.len() == 1 && (!sf || tf) {
                    self.absorb(t, s);
                    return true;
                }
                // t is only entered from s: t's moves become s's moves.
                if inbound[t.index()] == 1 && !self.is_start(t) {
                    self.nodes[i].edges.retain(|x| !(x.label == EdgeLabel::Epsilon && x.target == t));
                    self.absorb(s, t);
                    return true;
                }
            }
            for (a, ea) in edges.iter().enumerate() {
                for eb in &edges[a + 1..] {
                    let (v1, v2) = (ea.target, eb.target);
                    if ea.label == eb.label
                        && v1 != v2
                        && v1 != s
                        && v2 != s
                        && inbound[v1.index()] == 1
                        && inbound[v2.index()] == 1
                        && !self.is_start(v1)
                        && !self.is_start(v2)
                    {
                        let drop = *eb;
                        let pos = self.nodes[i].edges.iter().position(|x| *x == drop).unwrap();
                        self.nodes[i].edges.remove(pos);
                        self.absorb(v1, v2);
                        return true;
                    }
                }
            }
        }
        false
    }

    fn finish(self) -> Pda {
        let mut remap = vec![u32::MAX; self.nodes.len()];
        let mut next = 0u32;
        for (i, a) in self.alive.iter().enumerate() {
            if *a {
                remap[i] = next;
                next += 1;
            }
        }
        let nodes: Vec<PdaNode> = self
            .nodes
            .into_iter()
            .zip(&self.alive)
            .filter(|(_, a)| **a)
            .map(|(mut n, _)| {
                for e in &mut n.edges {
                    e.target = NodeId(remap[e.target.index()]);
                }
                n
            })
            .collect();
        let starts = self.starts.into_iter().map(|(name, s)| (name, NodeId(remap[s.index()]))).collect();
        Pda::from_parts(nodes, starts, self.root)
    }
}

/// Merges nodes until nothing changes:
///
/// - sibling targets reached from one node by equal labels, each entered
///   only by that edge, become one node
/// - for an epsilon edge s→t, s folds into t when it is s's only edge (and
///   s is not final unless t is), otherwise t folds into s when that edge is
///   t's only way in
/// - parallel byte edges are coalesced, epsilon self-loops dropped, and
///   nodes that cannot take part in any match are removed
pub fn merge_nodes(p: &Pda) -> Pda {
    merge_nodes_counted(p).0
}

/// [`merge_nodes`] plus the number of passes until the fixpoint.
pub fn merge_nodes_counted(p: &Pda) -> (Pda, usize) {
    let mut w = Work::new(p);
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = w.tidy_edges();
        changed |= w.trim();
        while w.merge_once() {
            changed = true;
            w.tidy_edges();
        }
        if !changed {
            return (w.finish(), passes);
        }
    }
}

/// Substitutes small rules that call no other rule into their call sites.
///
/// A rule qualifies when it has no rule-reference edges and at most
/// `max_rule_size` nodes. A call site is rewritten only if the calling rule
/// stays within `max_result_size` nodes. Repeats until no site qualifies;
/// every substitution removes one rule-reference edge and adds none.
pub fn inline_rules(p: &Pda, max_rule_size: usize, max_result_size: usize) -> Pda {
    let mut w = Work::new(p);
    'outer: loop {
        let rules = w.starts.len();
        let mut calls = vec![false; rules];
        for (i, n) in w.nodes.iter().enumerate() {
            if w.alive[i] && n.edges.iter().any(|e| matches!(e.label, EdgeLabel::Rule(_))) {
                calls[n.rule.index()] = true;
            }
        }
        let sizes: Vec<usize> = (0..rules).map(|r| w.rule_size(RuleId(r as u32))).collect();
        let inlinable: Vec<bool> = (0..rules).map(|r| !calls[r] && sizes[r] <= max_rule_size).collect();
        for i in 0..w.nodes.len() {
            if !w.alive[i] {
                continue;
            }
            let caller = w.nodes[i].rule;
            for (k, e) in w.nodes[i].edges.iter().enumerate() {
                let EdgeLabel::Rule(callee) = e.label else { continue };
                if !inlinable[callee.index()] || sizes[caller.index()] + sizes[callee.index()] > max_result_size {
                    continue;
                }
                let target = e.target;
                w.nodes[i].edges.remove(k);
                substitute(&mut w, NodeId(i as u32), callee, target);
                continue 'outer;
            }
        }
        return w.finish();
    }
}

/// Copies `callee`'s automaton into the caller between `from` and `to`.
fn substitute(w: &mut Work, from: NodeId, callee: RuleId, to: NodeId) {
    let caller = w.nodes[from.index()].rule;
    let members: Vec<usize> = (0..w.nodes.len()).filter(|i| w.alive[*i] && w.nodes[*i].rule == callee).collect();
    let base = w.nodes.len() as u32;
    let mut local = vec![u32::MAX; w.nodes.len()];
    for (k, i) in members.iter().enumerate() {
        local[*i] = base + k as u32;
    }
    for i in &members {
        let src = &w.nodes[*i];
        let mut edges: Vec<Edge> =
            src.edges.iter().map(|e| Edge { label: e.label, target: NodeId(local[e.target.index()]) }).collect();
        if src.is_final {
            edges.push(Edge { label: EdgeLabel::Epsilon, target: to });
        }
        w.nodes.push(PdaNode { rule: caller, is_final: false, edges });
        w.alive.push(true);
    }
    let entry = NodeId(local[w.starts[callee.index()].1.index()]);
    w.nodes[from.index()].edges.push(Edge { label: EdgeLabel::Epsilon, target: entry });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytes::ByteSet;
    use crate::grammar::parse_grammar;
    use crate::pda::{build_pda, oracle_accepts};

    fn pda(text: &str) -> Pda {
        build_pda(&parse_grammar(text).unwrap())
    }

    /// All strings over `alphabet` up to `len`, including the empty one.
    fn strings(alphabet: &[u8], len: usize) -> Vec<Vec<u8>> {
        let mut out = vec![Vec::new()];
        let mut layer = vec![Vec::new()];
        for _ in 0..len {
            let mut next = Vec::new();
            for s in &layer {
                for b in alphabet {
                    let mut t: Vec<u8> = s.clone();
                    t.push(*b);
                    next.push(t);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    fn same_language(a: &Pda, b: &Pda, alphabet: &[u8], len: usize) {
        for s in strings(alphabet, len) {
            assert_eq!(
                oracle_accepts(a, &s).unwrap(),
                oracle_accepts(b, &s).unwrap(),
                "{:?}",
                String::from_utf8_lossy(&s)
            );
        }
    }

    #[test]
    fn digits_inline_into_root() {
        let raw = pda("root ::= digit digit\ndigit ::= [0-9]");
        let inlined = inline_rules(&raw, 16, 512);
        let digit = RuleId(1);
        assert!(!inlined.edges().any(|e| e.label == EdgeLabel::Rule(digit)));
        let root = inlined.root();
        let digits = ByteSet::from_range(b'0', b'9');
        let root_digit_edges = inlined
            .edges()
            .filter(|e| inlined.node(e.source).rule == root && e.label == EdgeLabel::Bytes(digits))
            .count();
        assert_eq!(root_digit_edges, 2);
        same_language(&raw, &inlined, b"05a", 3);
    }

    #[test]
    fn recursive_rules_are_not_inlined() {
        let g = parse_grammar(crate::fixtures::ARRAY_STRING_GRAMMAR).unwrap();
        let raw = build_pda(&g);
        let inlined = inline_rules(&raw, 16, 512);
        let array = g.rule_id("array").unwrap();
        assert_eq!(
            raw.edges().filter(|e| e.label == EdgeLabel::Rule(array)).count(),
            inlined.edges().filter(|e| e.label == EdgeLabel::Rule(array)).count()
        );
    }

    #[test]
    fn size_guard() {
        let raw = pda("root ::= big big\nbig ::= \"abcdefghijklmnopqrstuvwxyz\"");
        let inlined = inline_rules(&raw, 16, 512);
        assert_eq!(inlined, raw);
        let tight = inline_rules(&raw, 64, 30);
        assert_eq!(tight.rule_ref_count(), 1, "the second site would exceed the result limit");
    }

    #[test]
    fn epsilon_choice_collapses_into_start() {
        let raw = pda(r#"root ::= "a" "x" | "b" "y""#);
        let merged = merge_nodes(&raw);
        assert_eq!(merged.epsilon_edge_count(), 0);
        let start = merged.root_start();
        assert_eq!(merged.node(start).edges.len(), 2);
        assert!(merged.node_count() < raw.node_count());
        assert!(merged.edge_count() < raw.edge_count());
        // hand count: two 3-node branches between start and final
        assert_eq!((raw.node_count(), raw.edge_count()), (8, 8));
        assert_eq!((merged.node_count(), merged.edge_count()), (4, 4));
        same_language(&raw, &merged, b"abxy", 6);
    }

    #[test]
    fn equal_labels_to_private_targets_merge() {
        let raw = pda(r#"root ::= "ab" | "ac""#);
        let merged = merge_nodes(&raw);
        let start = merged.root_start();
        assert_eq!(merged.node(start).edges.len(), 1);
        same_language(&raw, &merged, b"abc", 4);
    }

    #[test]
    fn minimal_literal_is_a_fixpoint() {
        let raw = pda(r#"root ::= "a""#);
        assert_eq!(merge_nodes(&raw), raw);
    }

    #[test]
    fn final_source_does_not_leak_finality() {
        // s is final (end of "a") and also has an epsilon into the loop.
        let raw = pda(r#"root ::= "a" ("b" "c")*"#);
        let merged = merge_nodes(&raw);
        same_language(&raw, &merged, b"abc", 7);
    }
}
