//! Byte-level pushdown automata.
//!
//! Each grammar rule becomes a small automaton over three kinds of edges:
//! byte-class edges consume one byte, rule-reference edges call another
//! rule and resume at their target once it finishes, and epsilon edges move
//! without consuming input. A rule finishes at any of its final nodes.
//!
//! [`build_pda`] does a Thompson-style construction; [`inline_rules`] and
//! [`merge_nodes`] shrink the result without changing its language.
//! [`oracle_accepts`] and friends interpret an automaton directly with
//! explicit frame lists and serve as the reference semantics.

mod dot;
mod optimize;
mod oracle;

use std::collections::VecDeque;

use crate::bytes::ByteSet;
use crate::grammar::{Grammar, RuleExpr, RuleId};

pub use dot::{to_dot, to_text};
pub use optimize::{inline_rules, merge_nodes, merge_nodes_counted};
pub use oracle::{
    oracle_accepts, oracle_accepts_capped, oracle_check, oracle_closure, oracle_partial_states,
    oracle_partial_states_capped, oracle_step, CheckOutcome, OracleError, OracleStack, DEFAULT_STATE_CAP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Bytes(ByteSet),
    Rule(RuleId),
    Epsilon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub label: EdgeLabel,
    pub target: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdaNode {
    pub rule: RuleId,
    pub is_final: bool,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdaRule {
    pub name: String,
    pub start: NodeId,
    pub finals: Vec<NodeId>,
}

/// An edge together with its source, as yielded by [`Pda::edges`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PdaEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub label: EdgeLabel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pda {
    nodes: Vec<PdaNode>,
    rules: Vec<PdaRule>,
    root: RuleId,
}

impl Pda {
    /// Assembles an automaton from parts, recomputing each rule's final list
    /// from the node flags.
    pub(crate) fn from_parts(nodes: Vec<PdaNode>, starts: Vec<(String, NodeId)>, root: RuleId) -> Pda {
        let mut rules: Vec<PdaRule> =
            starts.into_iter().map(|(name, start)| PdaRule { name, start, finals: Vec::new() }).collect();
        for (i, n) in nodes.iter().enumerate() {
            if n.is_final {
                rules[n.rule.index()].finals.push(NodeId(i as u32));
            }
        }
        Pda { nodes, rules, root }
    }

    pub fn nodes(&self) -> &[PdaNode] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &PdaNode {
        &self.nodes[id.index()]
    }

    pub fn rules(&self) -> &[PdaRule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &PdaRule {
        &self.rules[id.index()]
    }

    pub fn root(&self) -> RuleId {
        self.root
    }

    pub fn root_start(&self) -> NodeId {
        self.rules[self.root.index()].start
    }

    #[inline]
    pub fn start(&self, rule: RuleId) -> NodeId {
        self.rules[rule.index()].start
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.edges.len()).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = PdaEdge> + '_ {
        self.nodes.iter().enumerate().flat_map(|(i, n)| {
            n.edges.iter().map(move |e| PdaEdge { source: NodeId(i as u32), target: e.target, label: e.label })
        })
    }

    pub fn rule_node_count(&self, rule: RuleId) -> usize {
        self.nodes.iter().filter(|n| n.rule == rule).count()
    }

    pub fn epsilon_edge_count(&self) -> usize {
        self.edges().filter(|e| e.label == EdgeLabel::Epsilon).count()
    }

    pub fn rule_ref_count(&self) -> usize {
        self.edges().filter(|e| matches!(e.label, EdgeLabel::Rule(_))).count()
    }

    /// Rules referenced by at least one edge.
    pub fn referenced_rules(&self) -> Vec<bool> {
        let mut out = vec![false; self.rules.len()];
        for e in self.edges() {
            if let EdgeLabel::Rule(r) = e.label {
                out[r.index()] = true;
            }
        }
        out
    }

    /// Nodes that can be the top of a matching stack: the root start plus
    /// every byte-edge target reachable from it. Sorted.
    pub fn reachable_tops(&self) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        let root = self.root_start();
        seen[root.index()] = true;
        queue.push_back(root);
        let mut tops = vec![false; self.nodes.len()];
        tops[root.index()] = true;
        while let Some(n) = queue.pop_front() {
            for e in &self.node(n).edges {
                let mut visit = |m: NodeId, seen: &mut Vec<bool>| {
                    if !seen[m.index()] {
                        seen[m.index()] = true;
                        queue.push_back(m);
                    }
                };
                match e.label {
                    EdgeLabel::Bytes(_) => tops[e.target.index()] = true,
                    EdgeLabel::Rule(r) => visit(self.start(r), &mut seen),
                    EdgeLabel::Epsilon => {}
                }
                visit(e.target, &mut seen);
            }
        }
        tops.iter().enumerate().filter(|(_, t)| **t).map(|(i, _)| NodeId(i as u32)).collect()
    }

    /// Shortest number of bytes from each node to a final node of its own
    /// rule, counting a rule reference as the shortest string of that rule.
    /// `u32::MAX` when no final is reachable.
    pub fn min_completion(&self) -> Vec<u32> {
        const INF: u32 = u32::MAX;
        let mut rule_min = vec![INF; self.rules.len()];
        let mut dist = vec![INF; self.nodes.len()];
        // Bellman-Ford style relaxation; rule minima feed back into edges.
        loop {
            let mut changed = false;
            for (i, n) in self.nodes.iter().enumerate().rev() {
                let mut best = if n.is_final { 0 } else { INF };
                for e in &n.edges {
                    let step = match e.label {
                        EdgeLabel::Bytes(_) => 1,
                        EdgeLabel::Epsilon => 0,
                        EdgeLabel::Rule(r) => rule_min[r.index()],
                    };
                    let d = dist[e.target.index()];
                    if step != INF && d != INF {
                        best = best.min(step + d);
                    }
                }
                if best < dist[i] {
                    dist[i] = best;
                    changed = true;
                }
            }
            for (r, rule) in self.rules.iter().enumerate() {
                let d = dist[rule.start.index()];
                if d < rule_min[r] {
                    rule_min[r] = d;
                    changed = true;
                }
            }
            if !changed {
                return dist;
            }
        }
    }
}

struct Builder {
    nodes: Vec<PdaNode>,
}

impl Builder {
    fn node(&mut self, rule: RuleId) -> NodeId {
        self.nodes.push(PdaNode { rule, is_final: false, edges: Vec::new() });
        NodeId(self.nodes.len() as u32 - 1)
    }

    fn edge(&mut self, from: NodeId, label: EdgeLabel, to: NodeId) {
        self.nodes[from.index()].edges.push(Edge { label, target: to });
    }

    fn expr(&mut self, rule: RuleId, e: &RuleExpr, s: NodeId, t: NodeId) {
        match e {
            RuleExpr::ByteClass { set, negated } => {
                let set = RuleExpr::effective_class(set, *negated);
                if !set.is_empty() {
                    self.edge(s, EdgeLabel::Bytes(set), t);
                }
            }
            RuleExpr::Literal(bytes) if bytes.is_empty() => self.edge(s, EdgeLabel::Epsilon, t),
            RuleExpr::Literal(bytes) => {
                let mut cur = s;
                for (i, b) in bytes.iter().enumerate() {
                    let next = if i + 1 == bytes.len() { t } else { self.node(rule) };
                    self.edge(cur, EdgeLabel::Bytes(ByteSet::single(*b)), next);
                    cur = next;
                }
            }
            RuleExpr::Sequence(items) if items.is_empty() => self.edge(s, EdgeLabel::Epsilon, t),
            RuleExpr::Sequence(items) => {
                let mut cur = s;
                for (i, item) in items.iter().enumerate() {
                    let next = if i + 1 == items.len() { t } else { self.node(rule) };
                    self.expr(rule, item, cur, next);
                    cur = next;
                }
            }
            RuleExpr::Choice(items) => {
                for item in items {
                    let a = self.node(rule);
                    let b = self.node(rule);
                    self.edge(s, EdgeLabel::Epsilon, a);
                    self.expr(rule, item, a, b);
                    self.edge(b, EdgeLabel::Epsilon, t);
                }
            }
            RuleExpr::Repeat { expr, min, max } => {
                let mut cur = s;
                for _ in 0..*min {
                    let next = self.node(rule);
                    self.expr(rule, expr, cur, next);
                    cur = next;
                }
                match max {
                    Some(max) => {
                        for _ in *min..*max {
                            self.edge(cur, EdgeLabel::Epsilon, t);
                            let next = self.node(rule);
                            self.expr(rule, expr, cur, next);
                            cur = next;
                        }
                        self.edge(cur, EdgeLabel::Epsilon, t);
                    }
                    None => {
                        let hub = self.node(rule);
                        let a = self.node(rule);
                        let b = self.node(rule);
                        self.edge(cur, EdgeLabel::Epsilon, hub);
                        self.edge(hub, EdgeLabel::Epsilon, a);
                        self.expr(rule, expr, a, b);
                        self.edge(b, EdgeLabel::Epsilon, hub);
                        self.edge(hub, EdgeLabel::Epsilon, t);
                    }
                }
            }
            RuleExpr::RuleRef(r) => self.edge(s, EdgeLabel::Rule(*r), t),
            RuleExpr::Empty => self.edge(s, EdgeLabel::Epsilon, t),
        }
    }
}

/// One automaton per rule: a start node, a single final node, and a
/// Thompson construction of the body between them.
pub fn build_pda(g: &Grammar) -> Pda {
    let mut b = Builder { nodes: Vec::new() };
    let mut starts = Vec::with_capacity(g.rules().len());
    for (i, rule) in g.rules().iter().enumerate() {
        let id = RuleId(i as u32);
        let s = b.node(id);
        let t = b.node(id);
        b.nodes[t.index()].is_final = true;
        b.expr(id, &rule.body, s, t);
        starts.push((rule.name.clone(), s));
    }
    Pda::from_parts(b.nodes, starts, g.root())
}
