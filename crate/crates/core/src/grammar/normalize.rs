use super::{Grammar, Rule, RuleExpr};

/// Structural normalization that preserves the language.
///
/// - nested sequences and choices are flattened
/// - `Empty` items disappear from sequences; empty literals become `Empty`
/// - single-item sequences and choices collapse to the item
/// - negated byte classes become explicit sets over 0..=255
/// - `{1,1}` repeats unwrap, `{0,0}` repeats and repeats of `Empty` become `Empty`,
///   and `X*` is kept as the canonical `Repeat { min: 0, max: None }`
pub fn normalize_grammar(g: &Grammar) -> Grammar {
    let rules = g.rules().iter().map(|r| Rule { name: r.name.clone(), body: normalize_expr(&r.body) }).collect();
    Grammar::new(rules, g.root()).expect("normalization preserves validity")
}

pub(crate) fn normalize_expr(expr: &RuleExpr) -> RuleExpr {
    match expr {
        RuleExpr::ByteClass { set, negated } => {
            RuleExpr::ByteClass { set: RuleExpr::effective_class(set, *negated), negated: false }
        }
        RuleExpr::Literal(bytes) if bytes.is_empty() => RuleExpr::Empty,
        RuleExpr::Literal(_) | RuleExpr::RuleRef(_) | RuleExpr::Empty => expr.clone(),
        RuleExpr::Sequence(items) => {
            let mut flat = Vec::with_capacity(items.len());
            for item in items {
                match normalize_expr(item) {
                    RuleExpr::Empty => {}
                    RuleExpr::Sequence(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            match flat.len() {
                0 => RuleExpr::Empty,
                1 => flat.pop().unwrap(),
                _ => RuleExpr::Sequence(flat),
            }
        }
        RuleExpr::Choice(items) => {
            let mut flat = Vec::with_capacity(items.len());
            for item in items {
                match normalize_expr(item) {
                    RuleExpr::Choice(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            if flat.len() == 1 {
                flat.pop().unwrap()
            } else {
                RuleExpr::Choice(flat)
            }
        }
        RuleExpr::Repeat { expr, min, max } => {
            let inner = normalize_expr(expr);
            match (inner, *min, *max) {
                (_, _, Some(0)) | (RuleExpr::Empty, _, _) => RuleExpr::Empty,
                (inner, 1, Some(1)) => inner,
                (inner, min, max) => RuleExpr::Repeat { expr: Box::new(inner), min, max },
            }
        }
    }
}
