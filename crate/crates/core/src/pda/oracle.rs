//! Reference interpreter: explicit frame lists, breadth-first over state
//! sets, no sharing and no caching.

use std::collections::BTreeSet;

use super::{EdgeLabel, NodeId, Pda};

pub const DEFAULT_STATE_CAP: usize = 4096;

/// One matching stack: the return nodes of every enclosing rule (outermost
/// first) and the current node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OracleStack {
    pub frames: Vec<NodeId>,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle state set exceeded {cap} states")]
    StateCap { cap: usize },
}

/// Closes `states` under epsilon moves, rule calls and returns. The flag is
/// true when some state has no frames left and sits on a final node of the
/// root rule.
pub fn oracle_closure(
    p: &Pda,
    states: &BTreeSet<OracleStack>,
    cap: usize,
) -> Result<(BTreeSet<OracleStack>, bool), OracleError> {
    let mut seen: BTreeSet<OracleStack> = BTreeSet::new();
    let mut work: Vec<OracleStack> = states.iter().cloned().collect();
    let mut can_end = false;
    while let Some(st) = work.pop() {
        if seen.contains(&st) {
            continue;
        }
        let node = p.node(st.node);
        for e in &node.edges {
            match e.label {
                EdgeLabel::Epsilon => work.push(OracleStack { frames: st.frames.clone(), node: e.target }),
                EdgeLabel::Rule(r) => {
                    let mut frames = st.frames.clone();
                    frames.push(e.target);
                    work.push(OracleStack { frames, node: p.start(r) });
                }
                EdgeLabel::Bytes(_) => {}
            }
        }
        if node.is_final {
            match st.frames.split_last() {
                Some((ret, rest)) => work.push(OracleStack { frames: rest.to_vec(), node: *ret }),
                None => can_end |= node.rule == p.root(),
            }
        }
        seen.insert(st);
        if seen.len() > cap {
            return Err(OracleError::StateCap { cap });
        }
    }
    Ok((seen, can_end))
}

fn scan(p: &Pda, closed: &BTreeSet<OracleStack>, byte: u8) -> BTreeSet<OracleStack> {
    let mut out = BTreeSet::new();
    for st in closed {
        for e in &p.node(st.node).edges {
            if let EdgeLabel::Bytes(set) = e.label {
                if set.contains(byte) {
                    out.insert(OracleStack { frames: st.frames.clone(), node: e.target });
                }
            }
        }
    }
    out
}

/// Runs `input` from `states`. Each byte is preceded by a closure; the
/// result is the raw set after the last byte (or `states` itself for empty
/// input).
pub fn oracle_step(
    p: &Pda,
    states: &BTreeSet<OracleStack>,
    input: &[u8],
    cap: usize,
) -> Result<BTreeSet<OracleStack>, OracleError> {
    let mut cur = states.clone();
    for &b in input {
        if cur.is_empty() {
            break;
        }
        let (closed, _) = oracle_closure(p, &cur, cap)?;
        cur = scan(p, &closed, b);
        if cur.len() > cap {
            return Err(OracleError::StateCap { cap });
        }
    }
    Ok(cur)
}

fn initial(p: &Pda) -> BTreeSet<OracleStack> {
    BTreeSet::from([OracleStack { frames: Vec::new(), node: p.root_start() }])
}

pub fn oracle_accepts(p: &Pda, input: &[u8]) -> Result<bool, OracleError> {
    oracle_accepts_capped(p, input, DEFAULT_STATE_CAP)
}

pub fn oracle_accepts_capped(p: &Pda, input: &[u8], cap: usize) -> Result<bool, OracleError> {
    let states = oracle_step(p, &initial(p), input, cap)?;
    if states.is_empty() {
        return Ok(false);
    }
    Ok(oracle_closure(p, &states, cap)?.1)
}

/// Surviving stacks after `input`; empty means the prefix is dead. For
/// empty input this is the closure of the start state.
pub fn oracle_partial_states(p: &Pda, input: &[u8]) -> Result<BTreeSet<OracleStack>, OracleError> {
    oracle_partial_states_capped(p, input, DEFAULT_STATE_CAP)
}

pub fn oracle_partial_states_capped(p: &Pda, input: &[u8], cap: usize) -> Result<BTreeSet<OracleStack>, OracleError> {
    if input.is_empty() {
        return Ok(oracle_closure(p, &initial(p), cap)?.0);
    }
    oracle_step(p, &initial(p), input, cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckOutcome {
    Accepted,
    /// `offset` is the first byte no stack can consume, or the input length
    /// when every byte was consumed but the input may not end there.
    Rejected {
        offset: usize,
        end_of_input: bool,
    },
}

/// Like [`oracle_accepts`] but locates where the input goes wrong.
pub fn oracle_check(p: &Pda, input: &[u8]) -> Result<CheckOutcome, OracleError> {
    let mut cur = initial(p);
    for (i, &b) in input.iter().enumerate() {
        let (closed, _) = oracle_closure(p, &cur, DEFAULT_STATE_CAP)?;
        cur = scan(p, &closed, b);
        if cur.is_empty() {
            return Ok(CheckOutcome::Rejected { offset: i, end_of_input: false });
        }
    }
    if oracle_closure(p, &cur, DEFAULT_STATE_CAP)?.1 {
        Ok(CheckOutcome::Accepted)
    } else {
        Ok(CheckOutcome::Rejected { offset: input.len(), end_of_input: true })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::ARRAY_STRING_GRAMMAR;
    use crate::grammar::parse_grammar;
    use crate::pda::{build_pda, merge_nodes};

    fn raw(text: &str) -> Pda {
        build_pda(&parse_grammar(text).unwrap())
    }

    #[test]
    fn two_stacks_inside_a_string_element() {
        let p = raw(ARRAY_STRING_GRAMMAR);
        let states = oracle_partial_states(&p, b"[\"a").unwrap();
        assert_eq!(states.len(), 2);
        let tops: BTreeSet<NodeId> = states.iter().map(|s| s.node).collect();
        assert_eq!(tops.len(), 1, "both stacks sit at the same string position");
        // Sibling merging folds the two `elements` alternatives together.
        assert_eq!(oracle_partial_states(&merge_nodes(&p), b"[\"a").unwrap().len(), 1);
    }

    #[test]
    fn array_string_accepts_closed_array() {
        let p = raw(ARRAY_STRING_GRAMMAR);
        assert!(oracle_accepts(&p, b"[\"a\"]").unwrap());
        assert!(oracle_accepts(&p, b"\"\"").unwrap());
        assert!(oracle_accepts(&p, b"[[],\"x\",[\"y\"]]").unwrap());
        assert!(!oracle_accepts(&p, b"[\"a\"").unwrap());
        assert!(!oracle_accepts(&p, b"[\"a\",]").unwrap());
    }

    #[test]
    fn dead_prefix() {
        let p = raw(ARRAY_STRING_GRAMMAR);
        assert!(oracle_partial_states(&p, b"[x").unwrap().is_empty());
    }

    #[test]
    fn empty_input() {
        let p = raw(r#"root ::= """#);
        assert!(oracle_accepts(&p, b"").unwrap());
        let p = raw(ARRAY_STRING_GRAMMAR);
        assert!(!oracle_partial_states(&p, b"").unwrap().is_empty());
    }

    #[test]
    fn check_reports_offsets() {
        let p = raw(crate::fixtures::JSON_GRAMMAR);
        assert_eq!(oracle_check(&p, b"[\"a\"]").unwrap(), CheckOutcome::Accepted);
        assert_eq!(oracle_check(&p, b"[\"a\"").unwrap(), CheckOutcome::Rejected { offset: 4, end_of_input: true });
        assert_eq!(oracle_check(&p, b"[x").unwrap(), CheckOutcome::Rejected { offset: 1, end_of_input: false });
    }

    #[test]
    fn cap_is_an_error() {
        let p = raw(ARRAY_STRING_GRAMMAR);
        assert_eq!(oracle_accepts_capped(&p, b"[[[[", 3), Err(OracleError::StateCap { cap: 3 }));
    }
}
