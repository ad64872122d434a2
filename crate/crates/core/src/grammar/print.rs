use std::fmt::Write;

use super::{Grammar, RuleExpr};
use crate::bytes::{write_class_byte, write_literal_byte};

/// Renders `g` in the textual grammar format, one rule per line.
///
/// Parsing the output yields a grammar that normalizes to the same thing as
/// `g` does, provided the root is rule 0 or named `root`.
pub fn pretty_print(g: &Grammar) -> String {
    let mut out = String::new();
    for rule in g.rules() {
        out.push_str(&rule.name);
        out.push_str(" ::= ");
        write_expr(&mut out, &rule.body, g, 0);
        out.push('\n');
    }
    out
}

// precedence: 0 choice, 1 sequence, 2 postfix operand
fn prec(e: &RuleExpr) -> u8 {
    match e {
        RuleExpr::Choice(items) if items.len() > 1 => 0,
        RuleExpr::Sequence(items) if items.len() > 1 => 1,
        _ => 3,
    }
}

fn write_expr(out: &mut String, e: &RuleExpr, g: &Grammar, ctx: u8) {
    let p = prec(e);
    let paren = p <= ctx && p < 3;
    if paren {
        out.push('(');
    }
    match e {
        RuleExpr::ByteClass { set, negated } => {
            out.push('[');
            if *negated {
                out.push('^');
            }
            for (lo, hi) in set.ranges() {
                write_class_byte(out, lo).unwrap();
                if hi > lo {
                    if hi > lo + 1 {
                        out.push('-');
                    }
                    write_class_byte(out, hi).unwrap();
                }
            }
            out.push(']');
        }
        RuleExpr::Literal(bytes) => {
            out.push('"');
            for b in bytes {
                write_literal_byte(out, *b).unwrap();
            }
            out.push('"');
        }
        RuleExpr::Sequence(items) => match items.len() {
            0 => out.push_str("\"\""),
            1 => write_expr(out, &items[0], g, ctx),
            _ => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    write_expr(out, item, g, 1);
                }
            }
        },
        RuleExpr::Choice(items) => match items.len() {
            0 => out.push_str("[]"),
            1 => write_expr(out, &items[0], g, ctx),
            _ => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" | ");
                    }
                    write_expr(out, item, g, 0);
                }
            }
        },
        RuleExpr::Repeat { expr, min, max } => {
            write_expr(out, expr, g, 2);
            match (*min, *max) {
                (0, None) => out.push('*'),
                (1, None) => out.push('+'),
                (0, Some(1)) => out.push('?'),
                (m, None) => write!(out, "{{{m},}}").unwrap(),
                (m, Some(n)) if m == n => write!(out, "{{{m}}}").unwrap(),
                (m, Some(n)) => write!(out, "{{{m},{n}}}").unwrap(),
            }
        }
        RuleExpr::RuleRef(r) => out.push_str(&g.rule(*r).name),
        RuleExpr::Empty => out.push_str("\"\""),
    }
    if paren {
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::super::{normalize_grammar, parse_grammar};
    use super::*;

    #[test]
    fn prints_classes_literals_and_repeats() {
        let text = "root ::= \"a\\\"\\x00\" [^\"\\\\]* (x | \"b\"){2,3}\nx ::= [0-9]+ \"\"?\n";
        let g = parse_grammar(text).unwrap();
        let printed = pretty_print(&g);
        assert_eq!(printed, "root ::= \"a\\\"\\x00\" [^\"\\\\]* (x | \"b\"){2,3}\nx ::= [0-9]+ \"\"?\n");
    }

    #[test]
    fn nested_sequences_keep_their_grouping() {
        let g = parse_grammar("root ::= \"a\" (\"b\" \"c\") | (\"d\" | \"e\")").unwrap();
        let again = parse_grammar(&pretty_print(&g)).unwrap();
        assert_eq!(again, g);
        assert_eq!(normalize_grammar(&again), normalize_grammar(&g));
    }
}
