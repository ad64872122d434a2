use std::fmt::Write;

use super::{EdgeLabel, Pda};

/// Graphviz rendering: one cluster per rule, double circles for finals.
pub fn to_dot(p: &Pda) -> String {
    let mut out = String::from("digraph pda {\n  rankdir=LR;\n  node [shape=circle];\n");
    for (r, rule) in p.rules().iter().enumerate() {
        writeln!(out, "  subgraph cluster_{r} {{\n    label=\"{}\";", escape(&rule.name)).unwrap();
        for (i, n) in p.nodes().iter().enumerate() {
            if n.rule.index() != r {
                continue;
            }
            let shape = if n.is_final { "doublecircle" } else { "circle" };
            let style = if rule.start.index() == i { ", style=bold" } else { "" };
            writeln!(out, "    n{i} [shape={shape}{style}];").unwrap();
        }
        out.push_str("  }\n");
    }
    for e in p.edges() {
        let label = match e.label {
            EdgeLabel::Bytes(set) => set.to_string(),
            EdgeLabel::Rule(r) => p.rule(r).name.clone(),
            EdgeLabel::Epsilon => "ε".to_string(),
        };
        let style = match e.label {
            EdgeLabel::Rule(_) => ", style=dashed",
            _ => "",
        };
        writeln!(out, "  n{} -> n{} [label=\"{}\"{style}];", e.source.0, e.target.0, escape(&label)).unwrap();
    }
    out.push_str("}\n");
    out
}

/// One line per node: id, rule, start and final markers, then the outgoing
/// edges.
pub fn to_text(p: &Pda) -> String {
    let mut out = String::new();
    for (i, n) in p.nodes().iter().enumerate() {
        let rule = p.rule(n.rule);
        write!(out, "n{i} {}", rule.name).unwrap();
        if rule.start.index() == i {
            out.push_str(" start");
        }
        if n.is_final {
            out.push_str(" final");
        }
        for e in &n.edges {
            let label = match e.label {
                EdgeLabel::Bytes(set) => set.to_string(),
                EdgeLabel::Rule(r) => format!("<{}>", p.rule(r).name),
                EdgeLabel::Epsilon => "eps".to_string(),
            };
            write!(out, "\n  {label} -> n{}", e.target.0).unwrap();
        }
        out.push('\n');
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
