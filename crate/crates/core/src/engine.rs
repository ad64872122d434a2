//! Byte stepping over matching stacks.
//!
//! Two stack representations share one walker. Full stacks live in a
//! [`StackTree`] and are what the matcher runs. Local stacks start from a
//! single node with nothing known below it; they record the moment a branch
//! would need to return past that bottom frame instead of following it.
//!
//! Both expand a set of post-scan positions into the positions that can
//! consume a byte (following epsilon edges, calls and returns) and then scan
//! one byte.

use std::collections::HashSet;

use crate::pda::{EdgeLabel, NodeId, Pda};
use crate::stack::{StackRef, StackTree};

/// Upper bound on the states of one local expansion.
pub const LOCAL_STATE_CAP: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("more than {cap} parallel branches while matching a token")]
pub struct BranchCapError {
    pub cap: usize,
}

/// Expansion of a state set: the positions with outgoing byte edges and a
/// flag. For full stacks the flag means the input may end here; for local
/// stacks it means some branch returned past the bottom frame.
pub(crate) struct Expansion<S> {
    pub states: Vec<S>,
    pub flag: bool,
}

pub(crate) trait Semantics {
    type State: Clone;
    fn expand(&self, states: &[Self::State]) -> Result<Expansion<Self::State>, BranchCapError>;
    fn scan(&self, expanded: &[Self::State], byte: u8) -> Vec<Self::State>;
}

pub(crate) struct Full<'a> {
    pub pda: &'a Pda,
    pub tree: &'a StackTree,
}

impl Semantics for Full<'_> {
    type State = StackRef;

    fn expand(&self, tops: &[StackRef]) -> Result<Expansion<StackRef>, BranchCapError> {
        Ok(expand_full(self.pda, self.tree, tops))
    }

    fn scan(&self, expanded: &[StackRef], byte: u8) -> Vec<StackRef> {
        scan_full(self.pda, self.tree, expanded, byte)
    }
}

#[allow(clippy::mutable_key_type)]
pub(crate) fn expand_full(p: &Pda, tree: &StackTree, tops: &[StackRef]) -> Expansion<StackRef> {
    let mut seen: HashSet<StackRef> = HashSet::with_capacity(tops.len() * 4);
    let mut work: Vec<StackRef> = tops.iter().rev().cloned().collect();
    let mut states = Vec::new();
    let mut can_end = false;
    while let Some(s) = work.pop() {
        if seen.contains(&s) {
            continue;
        }
        let node = p.node(s.node());
        let mut scans = false;
        for e in &node.edges {
            match e.label {
                EdgeLabel::Bytes(_) => scans = true,
                EdgeLabel::Epsilon => work.push(tree.push(s.parent(), e.target)),
                EdgeLabel::Rule(r) => {
                    let ret = tree.push(s.parent(), e.target);
                    work.push(tree.push(Some(&ret), p.start(r)));
                }
            }
        }
        if node.is_final {
            match s.parent() {
                Some(ret) => work.push(ret.clone()),
                None => can_end |= node.rule == p.root(),
            }
        }
        if scans {
            states.push(s.clone());
        }
        seen.insert(s);
    }
    Expansion { states, flag: can_end }
}

#[allow(clippy::mutable_key_type)]
pub(crate) fn scan_full(p: &Pda, tree: &StackTree, expanded: &[StackRef], byte: u8) -> Vec<StackRef> {
    let mut out: Vec<StackRef> = Vec::new();
    let mut seen: HashSet<StackRef> = HashSet::new();
    for s in expanded {
        for e in &p.node(s.node()).edges {
            if let EdgeLabel::Bytes(set) = e.label {
                if set.contains(byte) {
                    let next = tree.push(s.parent(), e.target);
                    if seen.insert(next.clone()) {
                        out.push(next);
                    }
                }
            }
        }
    }
    out
}

/// Runs `bytes` from `tops`; an empty result means the input is dead.
pub(crate) fn advance(p: &Pda, tree: &StackTree, tops: &[StackRef], bytes: &[u8]) -> Vec<StackRef> {
    let mut cur = tops.to_vec();
    for &b in bytes {
        if cur.is_empty() {
            break;
        }
        let ex = expand_full(p, tree, &cur);
        cur = scan_full(p, tree, &ex.states, b);
    }
    cur
}

pub(crate) fn can_terminate(p: &Pda, tree: &StackTree, tops: &[StackRef]) -> bool {
    expand_full(p, tree, tops).flag
}

/// A stack above an unknown bottom frame: calls made since the walk began
/// (their return nodes, outermost first) and the current node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct LocalState {
    pub frames: Vec<NodeId>,
    pub node: NodeId,
}

pub(crate) struct Local<'a> {
    pub pda: &'a Pda,
}

impl Semantics for Local<'_> {
    type State = LocalState;

    fn expand(&self, states: &[LocalState]) -> Result<Expansion<LocalState>, BranchCapError> {
        let p = self.pda;
        let mut seen: HashSet<LocalState> = HashSet::new();
        let mut work: Vec<LocalState> = states.to_vec();
        let mut out = Vec::new();
        let mut popped = false;
        while let Some(s) = work.pop() {
            if seen.contains(&s) {
                continue;
            }
            let node = p.node(s.node);
            let mut scans = false;
            for e in &node.edges {
                match e.label {
                    EdgeLabel::Bytes(_) => scans = true,
                    EdgeLabel::Epsilon => work.push(LocalState { frames: s.frames.clone(), node: e.target }),
                    EdgeLabel::Rule(r) => {
                        let mut frames = s.frames.clone();
                        frames.push(e.target);
                        work.push(LocalState { frames, node: p.start(r) });
                    }
                }
            }
            if node.is_final {
                match s.frames.split_last() {
                    Some((ret, rest)) => work.push(LocalState { frames: rest.to_vec(), node: *ret }),
                    None => popped = true,
                }
            }
            if scans {
                out.push(s.clone());
            }
            seen.insert(s);
            if seen.len() > LOCAL_STATE_CAP {
                return Err(BranchCapError { cap: LOCAL_STATE_CAP });
            }
        }
        Ok(Expansion { states: out, flag: popped })
    }

    fn scan(&self, expanded: &[LocalState], byte: u8) -> Vec<LocalState> {
        let mut out = Vec::new();
        for s in expanded {
            for e in &self.pda.node(s.node).edges {
                if let EdgeLabel::Bytes(set) = e.label {
                    if set.contains(byte) {
                        out.push(LocalState { frames: s.frames.clone(), node: e.target });
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Result of walking one token.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct Walk {
    /// Some branch consumed every byte.
    pub accepted: bool,
    /// Offsets at which some branch had its expansion flag raised, before
    /// consuming the byte at that offset. Only offsets below the token
    /// length are listed.
    pub flagged: Vec<usize>,
}

/// Walks tokens one after another from a fixed initial set, keeping the
/// per-byte state sets of the previous token so that a shared prefix is not
/// matched twice. Tokens in lexicographic order maximize the sharing.
pub(crate) struct PrefixWalker<S: Semantics> {
    sem: S,
    levels: Vec<Vec<S::State>>,
    expansions: Vec<Option<Expansion<S::State>>>,
    prev: Vec<u8>,
    bytes_examined: u64,
}

impl<S: Semantics> PrefixWalker<S> {
    pub fn new(sem: S, initial: Vec<S::State>) -> Self {
        PrefixWalker { sem, levels: vec![initial], expansions: vec![None], prev: Vec::new(), bytes_examined: 0 }
    }

    /// Bytes matched so far across all tokens walked.
    pub fn bytes_examined(&self) -> u64 {
        self.bytes_examined
    }

    fn expansion(&mut self, i: usize) -> Result<&Expansion<S::State>, BranchCapError> {
        if self.expansions[i].is_none() {
            let ex = if self.levels[i].is_empty() {
                Expansion { states: Vec::new(), flag: false }
            } else {
                self.sem.expand(&self.levels[i])?
            };
            self.expansions[i] = Some(ex);
        }
        Ok(self.expansions[i].as_ref().unwrap())
    }

    /// Matches the part of `token` not shared with the previous token.
    /// With `prune`, bytes after a dead prefix are skipped and not counted.
    fn step_to(&mut self, token: &[u8], prune: bool) -> Result<(), BranchCapError> {
        let keep = crate::vocab::common_prefix(&self.prev, token).min(self.levels.len() - 1);
        self.levels.truncate(keep + 1);
        self.expansions.truncate(keep + 1);
        for (i, &byte) in token.iter().enumerate().skip(keep) {
            let next = if self.levels[i].is_empty() {
                if prune {
                    break;
                }
                Vec::new()
            } else {
                self.expansion(i)?;
                self.sem.scan(&self.expansions[i].as_ref().unwrap().states, byte)
            };
            self.levels.push(next);
            self.expansions.push(None);
            self.bytes_examined += 1;
        }
        self.prev.clear();
        self.prev.extend_from_slice(token);
        Ok(())
    }

    fn reached_end(&self, token: &[u8]) -> bool {
        self.levels.get(token.len()).is_some_and(|l| !l.is_empty())
    }

    pub fn walk(&mut self, token: &[u8]) -> Result<Walk, BranchCapError> {
        self.step_to(token, false)?;
        let mut flagged = Vec::new();
        for i in 0..token.len() {
            if self.levels[i].is_empty() {
                break;
            }
            if self.expansion(i)?.flag {
                flagged.push(i);
            }
        }
        Ok(Walk { accepted: self.reached_end(token), flagged })
    }

    /// Whether some branch consumes all of `token`, skipping everything
    /// below a dead prefix.
    pub fn accepts(&mut self, token: &[u8]) -> Result<bool, BranchCapError> {
        self.step_to(token, true)?;
        Ok(self.reached_end(token))
    }
}
