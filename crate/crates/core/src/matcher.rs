//! Runtime matching: token masks, token acceptance, rollback, branching and
//! jump-forward.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::bundle::{BundleError, CompiledGrammar};
use crate::cache::MaskCacheEntry;
use crate::engine::{self, Full, PrefixWalker};
use crate::mask::TokenMask;
use crate::pda::{EdgeLabel, NodeId};
use crate::stack::{ArenaStats, StackRef, StackTree};
use crate::vocab::{build_sorted_index, SortedVocabIndex, TokenId, Vocabulary};

pub const DEFAULT_HISTORY_WINDOW: usize = 32;
/// Dependent lists longer than this are checked in sorted order with prefix
/// sharing.
pub const SHARED_CHECK_THRESHOLD: usize = 64;
pub const JUMP_FORWARD_CAP: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum MatcherError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("cannot roll back {steps} steps, only {available} recorded")]
    RollbackTooFar { steps: usize, available: usize },
}

/// Everything a matcher and its branches share read-only.
struct Shared {
    grammar: Arc<CompiledGrammar>,
    vocab: Arc<Vocabulary>,
    specials: Vec<TokenId>,
    /// Dependent ids of each cache entry in vocabulary sort order.
    ranked_dependent: Vec<Vec<TokenId>>,
}

#[derive(Clone)]
struct Snapshot {
    tops: Vec<StackRef>,
    terminated: bool,
}

#[derive(Clone)]
pub struct Matcher {
    shared: Arc<Shared>,
    tree: StackTree,
    tops: Vec<StackRef>,
    terminated: bool,
    history: VecDeque<Snapshot>,
    window: usize,
}

impl Matcher {
    pub fn new(grammar: Arc<CompiledGrammar>, vocab: Arc<Vocabulary>) -> Result<Self, MatcherError> {
        Self::with_window(grammar, vocab, DEFAULT_HISTORY_WINDOW)
    }

    pub fn with_window(
        grammar: Arc<CompiledGrammar>,
        vocab: Arc<Vocabulary>,
        window: usize,
    ) -> Result<Self, MatcherError> {
        grammar.check_vocab(&vocab)?;
        let index = build_sorted_index(&vocab);
        let ranked_dependent = match grammar.cache() {
            Some(c) => (0..c.len()).map(|i| ranked(&index, c.entry_at(i).dependent())).collect(),
            None => Vec::new(),
        };
        let specials = vocab.special_ids().collect();
        let tree = StackTree::new();
        let tops = vec![tree.push(None, grammar.pda().root_start())];
        let shared = Arc::new(Shared { grammar, vocab, specials, ranked_dependent });
        Ok(Matcher { shared, tree, tops, terminated: false, history: VecDeque::new(), window })
    }

    pub fn grammar(&self) -> &Arc<CompiledGrammar> {
        &self.shared.grammar
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.shared.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.shared.vocab.size()
    }

    pub fn tops(&self) -> &[StackRef] {
        &self.tops
    }

    /// Every parallel stack as bottom-to-top nodes.
    pub fn stacks(&self) -> Vec<Vec<NodeId>> {
        self.tops.iter().map(StackRef::nodes).collect()
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn arena_stats(&self) -> &Arc<ArenaStats> {
        self.tree.stats()
    }

    /// Whether the bytes accepted so far form a complete match.
    pub fn can_terminate(&self) -> bool {
        !self.terminated && engine::can_terminate(self.shared.grammar.pda(), &self.tree, &self.tops)
    }

    pub fn new_mask(&self) -> TokenMask {
        TokenMask::new(self.vocab_size())
    }

    /// Writes the set of tokens that may come next. After termination the
    /// mask is empty.
    pub fn fill_next_token_mask(&self, out: &mut TokenMask) {
        assert_eq!(out.size(), self.vocab_size(), "mask sized for another vocabulary");
        out.clear_all();
        if self.terminated {
            return;
        }
        match self.shared.grammar.cache() {
            Some(_) => self.fill_cached(out),
            None => self.fill_uncached(out),
        }
        for &s in &self.shared.specials {
            out.unset(s);
        }
        if self.can_terminate() {
            out.set(self.shared.vocab.eos_id());
        }
    }

    fn fill_uncached(&self, out: &mut TokenMask) {
        let p = self.shared.grammar.pda();
        let v = &self.shared.vocab;
        for id in 0..v.size() as TokenId {
            let t = v.token(id);
            if !v.is_special(id) && !t.is_empty() && !engine::advance(p, &self.tree, &self.tops, t).is_empty() {
                out.set(id);
            }
        }
    }

    /// Splits the dependent tokens of one stack into passing and failing.
    fn check_dependent(&self, top: &StackRef, pos: usize, pass: &mut Vec<TokenId>, fail: &mut Vec<TokenId>) {
        let p = self.shared.grammar.pda();
        let v = &self.shared.vocab;
        let ranked = &self.shared.ranked_dependent[pos];
        if ranked.len() <= SHARED_CHECK_THRESHOLD {
            let tops = std::slice::from_ref(top);
            for &id in ranked {
                if engine::advance(p, &self.tree, tops, v.token(id)).is_empty() {
                    fail.push(id);
                } else {
                    pass.push(id);
                }
            }
        } else {
            let mut w = PrefixWalker::new(Full { pda: p, tree: &self.tree }, vec![top.clone()]);
            for &id in ranked {
                if w.accepts(v.token(id)).unwrap_or(false) {
                    pass.push(id);
                } else {
                    fail.push(id);
                }
            }
        }
    }

    fn fill_cached(&self, out: &mut TokenMask) {
        let cache = self.shared.grammar.cache().unwrap();
        // Tokens rejected by every accept-heavy stack so far.
        let mut partial_rej: Option<TokenMask> = None;
        let (mut pass, mut fail) = (Vec::new(), Vec::new());
        for top in &self.tops {
            let pos = cache.position(top.node()).expect("every stack top has a cache entry");
            pass.clear();
            fail.clear();
            self.check_dependent(top, pos, &mut pass, &mut fail);
            match cache.entry_at(pos) {
                MaskCacheEntry::AcceptHeavy { rejected, .. } => {
                    let mut rej = TokenMask::new(out.size());
                    for &id in rejected.iter().chain(&fail) {
                        rej.set(id);
                    }
                    match &mut partial_rej {
                        None => partial_rej = Some(rej),
                        Some(prev) => prev.intersect_with(&rej),
                    }
                }
                MaskCacheEntry::RejectHeavy { accepted, .. } => {
                    for &id in accepted.iter().chain(&pass) {
                        out.set(id);
                    }
                }
                MaskCacheEntry::Bitset { accept_bits, .. } => {
                    out.or_byte_bits(accept_bits);
                    for &id in &pass {
                        out.set(id);
                    }
                }
            }
        }
        // `out` holds the union of accepted sets of the other stacks. With
        // an accept-heavy stack, everything outside the common rejected set
        // is allowed as well.
        if let Some(rej) = partial_rej {
            out.union_complement_of(&rej);
        }
    }

    fn remember(&mut self) {
        if self.window == 0 {
            return;
        }
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(Snapshot { tops: self.tops.clone(), terminated: self.terminated });
    }

    /// Advances by one token. Returns false and leaves the state alone when
    /// the token is not allowed here.
    pub fn accept_token(&mut self, id: TokenId) -> bool {
        let v = self.shared.vocab.clone();
        if self.terminated || id as usize >= v.size() {
            return false;
        }
        if id == v.eos_id() {
            if !self.can_terminate() {
                return false;
            }
            self.remember();
            self.terminated = true;
            return true;
        }
        let token = v.token(id);
        if v.is_special(id) || token.is_empty() {
            return false;
        }
        self.advance(token)
    }

    /// Advances by raw bytes. Empty input succeeds and still counts as one
    /// step for rollback.
    pub fn accept_bytes(&mut self, bytes: &[u8]) -> bool {
        if self.terminated {
            return false;
        }
        if bytes.is_empty() {
            self.remember();
            return true;
        }
        self.advance(bytes)
    }

    fn advance(&mut self, bytes: &[u8]) -> bool {
        let next = engine::advance(self.shared.grammar.pda(), &self.tree, &self.tops, bytes);
        if next.is_empty() {
            return false;
        }
        self.remember();
        self.tops = next;
        true
    }

    /// Undoes the last `steps` accepted tokens or byte strings.
    pub fn rollback(&mut self, steps: usize) -> Result<(), MatcherError> {
        if steps > self.history.len() {
            return Err(MatcherError::RollbackTooFar { steps, available: self.history.len() });
        }
        if steps == 0 {
            return Ok(());
        }
        let keep = self.history.len() - steps;
        let snap = self.history.drain(keep..).next().unwrap();
        self.tops = snap.tops;
        self.terminated = snap.terminated;
        Ok(())
    }

    /// An independent copy that shares all frames with this one.
    pub fn branch(&self) -> Matcher {
        self.clone()
    }

    /// Bytes the grammar forces from here on: continues while exactly one
    /// byte is possible and the input may not end.
    pub fn find_jump_forward_bytes(&self) -> Vec<u8> {
        let p = self.shared.grammar.pda();
        let mut out = Vec::new();
        if self.terminated {
            return out;
        }
        let mut tops = self.tops.clone();
        while out.len() < JUMP_FORWARD_CAP {
            let ex = engine::expand_full(p, &self.tree, &tops);
            if ex.flag {
                break;
            }
            let mut only: Option<u8> = None;
            let mut several = false;
            'states: for s in &ex.states {
                for e in &p.node(s.node()).edges {
                    if let EdgeLabel::Bytes(set) = e.label {
                        for b in set.iter() {
                            match only {
                                None => only = Some(b),
                                Some(x) if x == b => {}
                                Some(_) => {
                                    several = true;
                                    break 'states;
                                }
                            }
                        }
                    }
                }
            }
            let Some(b) = only.filter(|_| !several) else { break };
            tops = engine::scan_full(p, &self.tree, &ex.states, b);
            out.push(b);
        }
        out
    }
}

fn ranked(index: &SortedVocabIndex, ids: &[TokenId]) -> Vec<TokenId> {
    let mut out = ids.to_vec();
    out.sort_unstable_by_key(|&id| index.rank(id));
    out
}
