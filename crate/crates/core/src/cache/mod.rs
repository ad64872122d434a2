//! Token mask cache.
//!
//! For each node that can sit on top of a matching stack, every token is
//! sorted into one of three groups by matching it from that node alone:
//! accepted no matter what lies below, rejected no matter what lies below,
//! or dependent on the rest of the stack. Only the dependent group has to be
//! checked while decoding. Entries keep whichever two groups are cheapest
//! to store.

mod context;

use rayon::prelude::*;

use crate::engine::{BranchCapError, Local, LocalState, PrefixWalker, Walk};
use crate::pda::{NodeId, Pda};
use crate::vocab::{SortedVocabIndex, TokenId, Vocabulary};

pub use context::{build_context_expansion, build_context_expansion_strict, ExpandedSuffixFsa, SuffixNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenClass {
    AcceptedIndependent,
    RejectedIndependent,
    ContextDependent,
}

fn class_of(w: &Walk) -> TokenClass {
    if w.accepted {
        TokenClass::AcceptedIndependent
    } else if w.flagged.is_empty() {
        TokenClass::RejectedIndependent
    } else {
        TokenClass::ContextDependent
    }
}

fn walker(p: &Pda, node: NodeId) -> PrefixWalker<Local<'_>> {
    PrefixWalker::new(Local { pda: p }, vec![LocalState { frames: Vec::new(), node }])
}

/// Classifies one token from a stack whose only known frame is `node`.
/// Empty tokens are rejected.
pub fn classify_token(p: &Pda, node: NodeId, token: &[u8]) -> Result<TokenClass, BranchCapError> {
    if token.is_empty() {
        return Ok(TokenClass::RejectedIndependent);
    }
    Ok(class_of(&walker(p, node).walk(token)?))
}

fn refine(p: &Pda, ctx: &ExpandedSuffixFsa, node: NodeId, token: &[u8], w: &Walk) -> TokenClass {
    let rule = p.node(node).rule;
    if w.flagged.iter().any(|&i| ctx.admits(rule, &token[i..])) {
        TokenClass::ContextDependent
    } else {
        TokenClass::RejectedIndependent
    }
}

/// Classifies and then drops a dependent token when no return it makes can
/// be continued by what may follow the rule of `node`.
pub fn refine_dependent(
    p: &Pda,
    ctx: &ExpandedSuffixFsa,
    node: NodeId,
    token: &[u8],
) -> Result<TokenClass, BranchCapError> {
    if token.is_empty() {
        return Ok(TokenClass::RejectedIndependent);
    }
    let w = walker(p, node).walk(token)?;
    Ok(match class_of(&w) {
        TokenClass::ContextDependent => refine(p, ctx, node, token, &w),
        c => c,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StorageKind {
    AcceptHeavy,
    RejectHeavy,
    Bitset,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MaskCacheEntry {
    AcceptHeavy {
        rejected: Vec<TokenId>,
        dependent: Vec<TokenId>,
    },
    RejectHeavy {
        accepted: Vec<TokenId>,
        dependent: Vec<TokenId>,
    },
    /// One bit per vocabulary id, least significant bit first.
    Bitset {
        accept_bits: Vec<u8>,
        dependent: Vec<TokenId>,
    },
}

/// Encoded sizes in bytes of the three forms, in [`StorageKind`] order.
pub fn storage_sizes(accepted: usize, rejected: usize, dependent: usize, vocab_size: usize) -> [usize; 3] {
    [4 * (rejected + dependent), 4 * (accepted + dependent), vocab_size.div_ceil(8) + 4 * dependent]
}

pub fn choose_storage(
    accepted: &[TokenId],
    rejected: &[TokenId],
    dependent: &[TokenId],
    vocab_size: usize,
) -> MaskCacheEntry {
    let sizes = storage_sizes(accepted.len(), rejected.len(), dependent.len(), vocab_size);
    let best = (0..3).min_by_key(|&i| sizes[i]).unwrap();
    let dependent = dependent.to_vec();
    match best {
        0 => MaskCacheEntry::AcceptHeavy { rejected: rejected.to_vec(), dependent },
        1 => MaskCacheEntry::RejectHeavy { accepted: accepted.to_vec(), dependent },
        _ => {
            let mut bits = vec![0u8; vocab_size.div_ceil(8)];
            for &id in accepted {
                bits[id as usize / 8] |= 1 << (id % 8);
            }
            MaskCacheEntry::Bitset { accept_bits: bits, dependent }
        }
    }
}

/// The three groups of one entry, each sorted by id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    pub accepted: Vec<TokenId>,
    pub rejected: Vec<TokenId>,
    pub dependent: Vec<TokenId>,
}

impl MaskCacheEntry {
    pub fn kind(&self) -> StorageKind {
        match self {
            MaskCacheEntry::AcceptHeavy { .. } => StorageKind::AcceptHeavy,
            MaskCacheEntry::RejectHeavy { .. } => StorageKind::RejectHeavy,
            MaskCacheEntry::Bitset { .. } => StorageKind::Bitset,
        }
    }

    pub fn dependent(&self) -> &[TokenId] {
        match self {
            MaskCacheEntry::AcceptHeavy { dependent, .. }
            | MaskCacheEntry::RejectHeavy { dependent, .. }
            | MaskCacheEntry::Bitset { dependent, .. } => dependent,
        }
    }

    /// Size of the stored payload, as compared by [`choose_storage`].
    pub fn byte_size(&self) -> usize {
        match self {
            MaskCacheEntry::AcceptHeavy { rejected, dependent } => 4 * (rejected.len() + dependent.len()),
            MaskCacheEntry::RejectHeavy { accepted, dependent } => 4 * (accepted.len() + dependent.len()),
            MaskCacheEntry::Bitset { accept_bits, dependent } => accept_bits.len() + 4 * dependent.len(),
        }
    }

    /// Rebuilds the three groups over the non-special ids of `v`.
    pub fn partition(&self, v: &Vocabulary) -> Partition {
        let mut out = Partition::default();
        let dep = self.dependent();
        let mut di = 0;
        let (mut li, list): (usize, &[TokenId]) = match self {
            MaskCacheEntry::AcceptHeavy { rejected, .. } => (0, rejected),
            MaskCacheEntry::RejectHeavy { accepted, .. } => (0, accepted),
            MaskCacheEntry::Bitset { .. } => (0, &[]),
        };
        for id in 0..v.size() as TokenId {
            if v.is_special(id) {
                continue;
            }
            if di < dep.len() && dep[di] == id {
                di += 1;
                out.dependent.push(id);
                continue;
            }
            let listed = li < list.len() && list[li] == id;
            if listed {
                li += 1;
            }
            let accepted = match self {
                MaskCacheEntry::AcceptHeavy { .. } => !listed,
                MaskCacheEntry::RejectHeavy { .. } => listed,
                MaskCacheEntry::Bitset { accept_bits, .. } => accept_bits[id as usize / 8] >> (id % 8) & 1 == 1,
            };
            if accepted {
                out.accepted.push(id);
            } else {
                out.rejected.push(id);
            }
        }
        out
    }
}

/// Cache entries keyed by stack-top node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenMaskCache {
    vocab_size: usize,
    keys: Vec<NodeId>,
    entries: Vec<MaskCacheEntry>,
    slot: Vec<u32>,
}

impl TokenMaskCache {
    pub fn from_entries(node_count: usize, vocab_size: usize, pairs: Vec<(NodeId, MaskCacheEntry)>) -> Self {
        let mut slot = vec![u32::MAX; node_count];
        let mut keys = Vec::with_capacity(pairs.len());
        let mut entries = Vec::with_capacity(pairs.len());
        for (i, (k, e)) in pairs.into_iter().enumerate() {
            slot[k.index()] = i as u32;
            keys.push(k);
            entries.push(e);
        }
        TokenMaskCache { vocab_size, keys, entries, slot }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    #[inline]
    pub fn get(&self, node: NodeId) -> Option<&MaskCacheEntry> {
        match self.slot.get(node.index()) {
            Some(&i) if i != u32::MAX => Some(&self.entries[i as usize]),
            _ => None,
        }
    }

    /// Position of the entry for `node` in iteration order.
    #[inline]
    pub fn position(&self, node: NodeId) -> Option<usize> {
        match self.slot.get(node.index()) {
            Some(&i) if i != u32::MAX => Some(i as usize),
            _ => None,
        }
    }

    pub fn entry_at(&self, pos: usize) -> &MaskCacheEntry {
        &self.entries[pos]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &MaskCacheEntry)> {
        self.keys.iter().copied().zip(self.entries.iter())
    }

    pub fn node_capacity(&self) -> usize {
        self.slot.len()
    }

    /// Total payload bytes of all entries.
    pub fn payload_bytes(&self) -> usize {
        self.entries.iter().map(MaskCacheEntry::byte_size).sum()
    }

    /// Payload bytes if every entry used the bitset form.
    pub fn all_bitset_bytes(&self) -> usize {
        self.entries.iter().map(|e| self.vocab_size.div_ceil(8) + 4 * e.dependent().len()).sum()
    }

    pub fn dependent_total(&self) -> usize {
        self.entries.iter().map(|e| e.dependent().len()).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CacheBuildStats {
    /// Bytes matched per key while classifying.
    pub bytes_examined: Vec<u64>,
    /// Dependent tokens per key before context expansion.
    pub dependent_before_ctx: Vec<usize>,
    /// Dependent tokens per key after context expansion.
    pub dependent_after_ctx: Vec<usize>,
}

impl CacheBuildStats {
    pub fn total_dependent_before(&self) -> usize {
        self.dependent_before_ctx.iter().sum()
    }

    pub fn total_dependent_after(&self) -> usize {
        self.dependent_after_ctx.iter().sum()
    }
}

pub fn build_mask_cache(
    p: &Pda,
    v: &Vocabulary,
    idx: &SortedVocabIndex,
    use_ctx_expansion: bool,
) -> Result<TokenMaskCache, BranchCapError> {
    let ctx = use_ctx_expansion.then(|| build_context_expansion(p));
    Ok(build_mask_cache_with(p, v, idx, ctx.as_ref())?.0)
}

struct KeyResult {
    part: Partition,
    examined: u64,
    dependent_before: usize,
}

fn classify_key(
    p: &Pda,
    v: &Vocabulary,
    idx: &SortedVocabIndex,
    ctx: Option<&ExpandedSuffixFsa>,
    key: NodeId,
) -> Result<KeyResult, BranchCapError> {
    let mut classes = vec![TokenClass::RejectedIndependent; v.size()];
    let mut w = walker(p, key);
    let mut before = 0;
    for &id in idx.order() {
        let token = v.token(id);
        let walk = w.walk(token)?;
        let mut class = class_of(&walk);
        if token.is_empty() {
            class = TokenClass::RejectedIndependent;
        }
        if class == TokenClass::ContextDependent {
            before += 1;
            if let Some(ctx) = ctx {
                class = refine(p, ctx, key, token, &walk);
            }
        }
        classes[id as usize] = class;
    }
    let mut part = Partition::default();
    for (id, c) in classes.into_iter().enumerate() {
        let id = id as TokenId;
        if v.is_special(id) {
            continue;
        }
        match c {
            TokenClass::AcceptedIndependent => part.accepted.push(id),
            TokenClass::RejectedIndependent => part.rejected.push(id),
            TokenClass::ContextDependent => part.dependent.push(id),
        }
    }
    Ok(KeyResult { part, examined: w.bytes_examined(), dependent_before: before })
}

/// Builds the cache with an optional context expansion. Keys are processed
/// in parallel; the result does not depend on the thread count.
pub fn build_mask_cache_with(
    p: &Pda,
    v: &Vocabulary,
    idx: &SortedVocabIndex,
    ctx: Option<&ExpandedSuffixFsa>,
) -> Result<(TokenMaskCache, CacheBuildStats), BranchCapError> {
    let keys = p.reachable_tops();
    let results: Vec<Result<KeyResult, BranchCapError>> =
        keys.par_iter().map(|&k| classify_key(p, v, idx, ctx, k)).collect();
    let mut stats = CacheBuildStats::default();
    let mut pairs = Vec::with_capacity(keys.len());
    for (k, r) in keys.iter().zip(results) {
        let r = r?;
        stats.bytes_examined.push(r.examined);
        stats.dependent_before_ctx.push(r.dependent_before);
        stats.dependent_after_ctx.push(r.part.dependent.len());
        let e = choose_storage(&r.part.accepted, &r.part.rejected, &r.part.dependent, v.size());
        pairs.push((*k, e));
    }
    Ok((TokenMaskCache::from_entries(p.node_count(), v.size(), pairs), stats))
}
