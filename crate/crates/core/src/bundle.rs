//! Compilation pipeline and the on-disk bundle.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "GMC1" | version u32 | flags u32 | vocab hash [8] | vocab size u32
//! root u32 | rule count u32 | per rule: name len u32, name, start u32
//! node count u32 | per node: rule u32, final u8, edge count u32,
//!     per edge: kind u8 (0 bytes, 1 rule, 2 epsilon), target u32,
//!     then 32 bytes of byte set or a rule id u32
//! cache present u8 | entry count u32 | per entry: node u32, kind u8,
//!     dependent count u32, dependent ids, then the kind payload:
//!     id count u32 + ids, or byte count u32 + bitset bytes
//! ```

use std::path::Path;
use std::time::{Duration, Instant};

use crate::bytes::ByteSet;
use crate::cache::{
    build_context_expansion, build_context_expansion_strict, build_mask_cache_with, CacheBuildStats, MaskCacheEntry,
    TokenMaskCache,
};
use crate::grammar::{Grammar, RuleId};
use crate::pda::{build_pda, inline_rules, merge_nodes, Edge, EdgeLabel, NodeId, Pda, PdaNode};
use crate::vocab::{build_sorted_index, Vocabulary};
use crate::BranchCapError;

pub const BUNDLE_MAGIC: &[u8; 4] = b"GMC1";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    pub merge: bool,
    pub inline: bool,
    pub cache: bool,
    pub ctx_expansion: bool,
    /// Use suffixes that stop at rule completions.
    pub strict_ctx: bool,
    /// Largest rule (in nodes) eligible for inlining.
    pub max_inline_rule: usize,
    /// Largest rule (in nodes) inlining may produce.
    pub max_inline_result: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            merge: true,
            inline: true,
            cache: true,
            ctx_expansion: true,
            strict_ctx: false,
            max_inline_rule: 16,
            max_inline_result: 512,
        }
    }
}

impl CompileOptions {
    /// Plain automaton: no rewriting, no cache.
    pub fn unoptimized() -> Self {
        CompileOptions { merge: false, inline: false, cache: false, ctx_expansion: false, ..Self::default() }
    }

    fn flags(&self) -> u32 {
        u32::from(self.merge)
            | u32::from(self.inline) << 1
            | u32::from(self.cache) << 2
            | u32::from(self.ctx_expansion) << 3
            | u32::from(self.strict_ctx) << 4
    }

    fn from_flags(f: u32) -> Self {
        CompileOptions {
            merge: f & 1 != 0,
            inline: f & 2 != 0,
            cache: f & 4 != 0,
            ctx_expansion: f & 8 != 0,
            strict_ctx: f & 16 != 0,
            ..Self::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("not a grammar bundle (bad magic)")]
    BadMagic,
    #[error("unsupported bundle version {0}")]
    Version(u32),
    #[error("bundle truncated at byte {0}")]
    Truncated(usize),
    #[error("corrupt bundle: {0}")]
    Corrupt(String),
    #[error("vocabulary mismatch: bundle was built for {expected}, got {found}")]
    VocabMismatch { expected: String, found: String },
    #[error(transparent)]
    BranchCap(#[from] BranchCapError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// An automaton plus its mask cache, tied to one vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledGrammar {
    pda: Pda,
    cache: Option<TokenMaskCache>,
    options: CompileOptions,
    vocab_hash: [u8; 8],
    vocab_size: usize,
}

/// Measurements taken while compiling; not stored in the bundle.
#[derive(Clone, Debug, Default)]
pub struct CompileReport {
    pub raw_nodes: usize,
    pub raw_edges: usize,
    pub nodes: usize,
    pub edges: usize,
    pub preprocess: Duration,
    pub cache_stats: Option<CacheBuildStats>,
}

/// Applies the structural passes enabled in `opts`: merging, then inlining
/// and merging again until no more calls can be inlined.
pub fn optimize_pda(raw: Pda, opts: CompileOptions) -> Pda {
    let mut p = raw;
    if opts.merge {
        p = merge_nodes(&p);
    }
    if opts.inline {
        loop {
            let before = p.rule_ref_count();
            p = inline_rules(&p, opts.max_inline_rule, opts.max_inline_result);
            if opts.merge {
                p = merge_nodes(&p);
            }
            if p.rule_ref_count() == before {
                break;
            }
        }
    }
    p
}

pub fn compile(g: &Grammar, v: &Vocabulary, opts: CompileOptions) -> Result<CompiledGrammar, BundleError> {
    Ok(compile_with_report(g, v, opts)?.0)
}

pub fn compile_with_report(
    g: &Grammar,
    v: &Vocabulary,
    opts: CompileOptions,
) -> Result<(CompiledGrammar, CompileReport), BundleError> {
    let started = Instant::now();
    let raw = build_pda(g);
    let mut report = CompileReport { raw_nodes: raw.node_count(), raw_edges: raw.edge_count(), ..Default::default() };
    let p = optimize_pda(raw, opts);
    let cache = if opts.cache {
        let ctx = match (opts.ctx_expansion, opts.strict_ctx) {
            (false, _) => None,
            (true, false) => Some(build_context_expansion(&p)),
            (true, true) => Some(build_context_expansion_strict(&p)),
        };
        let idx = build_sorted_index(v);
        let (cache, stats) = build_mask_cache_with(&p, v, &idx, ctx.as_ref())?;
        report.cache_stats = Some(stats);
        Some(cache)
    } else {
        None
    };
    report.nodes = p.node_count();
    report.edges = p.edge_count();
    report.preprocess = started.elapsed();
    let opts = CompileOptions { ctx_expansion: opts.cache && opts.ctx_expansion, ..opts };
    let cg = CompiledGrammar { pda: p, cache, options: opts, vocab_hash: v.content_hash(), vocab_size: v.size() };
    Ok((cg, report))
}

pub fn hash_hex(h: &[u8; 8]) -> String {
    h.iter().map(|b| format!("{b:02x}")).collect()
}

impl CompiledGrammar {
    pub fn pda(&self) -> &Pda {
        &self.pda
    }

    pub fn cache(&self) -> Option<&TokenMaskCache> {
        self.cache.as_ref()
    }

    pub fn options(&self) -> CompileOptions {
        self.options
    }

    pub fn vocab_hash(&self) -> [u8; 8] {
        self.vocab_hash
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn check_vocab(&self, v: &Vocabulary) -> Result<(), BundleError> {
        let found = v.content_hash();
        if found != self.vocab_hash || v.size() != self.vocab_size {
            return Err(BundleError::VocabMismatch { expected: hash_hex(&self.vocab_hash), found: hash_hex(&found) });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(BUNDLE_MAGIC);
        w.u32(BUNDLE_VERSION);
        w.u32(self.options.flags());
        w.0.extend_from_slice(&self.vocab_hash);
        w.u32(self.vocab_size as u32);
        let p = &self.pda;
        w.u32(p.root().0);
        w.u32(p.rules().len() as u32);
        for r in p.rules() {
            w.u32(r.name.len() as u32);
            w.0.extend_from_slice(r.name.as_bytes());
            w.u32(r.start.0);
        }
        w.u32(p.node_count() as u32);
        for n in p.nodes() {
            w.u32(n.rule.0);
            w.0.push(u8::from(n.is_final));
            w.u32(n.edges.len() as u32);
            for e in &n.edges {
                match e.label {
                    EdgeLabel::Bytes(set) => {
                        w.0.push(0);
                        w.u32(e.target.0);
                        for word in set.words() {
                            w.0.extend_from_slice(&word.to_le_bytes());
                        }
                    }
                    EdgeLabel::Rule(r) => {
                        w.0.push(1);
                        w.u32(e.target.0);
                        w.u32(r.0);
                    }
                    EdgeLabel::Epsilon => {
                        w.0.push(2);
                        w.u32(e.target.0);
                    }
                }
            }
        }
        match &self.cache {
            None => w.0.push(0),
            Some(c) => {
                w.0.push(1);
                w.u32(c.len() as u32);
                for (node, e) in c.iter() {
                    w.u32(node.0);
                    w.0.push(e.kind() as u8);
                    w.ids(e.dependent());
                    match e {
                        MaskCacheEntry::AcceptHeavy { rejected: ids, .. }
                        | MaskCacheEntry::RejectHeavy { accepted: ids, .. } => w.ids(ids),
                        MaskCacheEntry::Bitset { accept_bits, .. } => {
                            w.u32(accept_bits.len() as u32);
                            w.0.extend_from_slice(accept_bits);
                        }
                    }
                }
            }
        }
        w.0
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, BundleError> {
        let mut r = Reader { data, pos: 0 };
        if r.take(4)? != BUNDLE_MAGIC {
            return Err(BundleError::BadMagic);
        }
        let version = r.u32()?;
        if version != BUNDLE_VERSION {
            return Err(BundleError::Version(version));
        }
        let options = CompileOptions::from_flags(r.u32()?);
        let vocab_hash: [u8; 8] = r.take(8)?.try_into().unwrap();
        let vocab_size = r.u32()? as usize;
        let root = RuleId(r.u32()?);
        let nrules = r.u32()? as usize;
        let mut starts = Vec::with_capacity(nrules.min(1 << 16));
        for _ in 0..nrules {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| corrupt("rule name is not UTF-8"))?;
            starts.push((name, NodeId(r.u32()?)));
        }
        let nnodes = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(nnodes.min(1 << 20));
        for _ in 0..nnodes {
            let rule = RuleId(r.u32()?);
            let is_final = r.u8()? != 0;
            let nedges = r.u32()? as usize;
            let mut edges = Vec::with_capacity(nedges.min(1 << 16));
            for _ in 0..nedges {
                let kind = r.u8()?;
                let target = NodeId(r.u32()?);
                let label = match kind {
                    0 => {
                        let mut words = [0u64; 4];
                        for w in &mut words {
                            *w = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
                        }
                        EdgeLabel::Bytes(ByteSet::from_words(words))
                    }
                    1 => EdgeLabel::Rule(RuleId(r.u32()?)),
                    2 => EdgeLabel::Epsilon,
                    k => return Err(corrupt(&format!("edge kind {k}"))),
                };
                edges.push(Edge { label, target });
            }
            nodes.push(PdaNode { rule, is_final, edges });
        }
        validate_pda(&nodes, &starts, root)?;
        let pda = Pda::from_parts(nodes, starts, root);
        let cache = match r.u8()? {
            0 => None,
            1 => {
                let n = r.u32()? as usize;
                let mut pairs = Vec::with_capacity(n.min(1 << 20));
                for _ in 0..n {
                    let node = NodeId(r.u32()?);
                    if node.index() >= pda.node_count() {
                        return Err(corrupt("cache key out of range"));
                    }
                    let kind = r.u8()?;
                    let dependent = r.ids(vocab_size)?;
                    let entry = match kind {
                        0 => MaskCacheEntry::AcceptHeavy { rejected: r.ids(vocab_size)?, dependent },
                        1 => MaskCacheEntry::RejectHeavy { accepted: r.ids(vocab_size)?, dependent },
                        2 => {
                            let len = r.u32()? as usize;
                            if len != vocab_size.div_ceil(8) {
                                return Err(corrupt("bitset length"));
                            }
                            MaskCacheEntry::Bitset { accept_bits: r.take(len)?.to_vec(), dependent }
                        }
                        k => return Err(corrupt(&format!("entry kind {k}"))),
                    };
                    pairs.push((node, entry));
                }
                Some(TokenMaskCache::from_entries(pda.node_count(), vocab_size, pairs))
            }
            k => return Err(corrupt(&format!("cache flag {k}"))),
        };
        if r.pos != data.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(CompiledGrammar { pda, cache, options, vocab_hash, vocab_size })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BundleError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BundleError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn corrupt(msg: &str) -> BundleError {
    BundleError::Corrupt(msg.to_string())
}

fn validate_pda(nodes: &[PdaNode], starts: &[(String, NodeId)], root: RuleId) -> Result<(), BundleError> {
    let (nn, nr) = (nodes.len(), starts.len());
    if root.index() >= nr {
        return Err(corrupt("root rule out of range"));
    }
    if starts.iter().any(|(_, s)| s.index() >= nn) {
        return Err(corrupt("rule start out of range"));
    }
    for n in nodes {
        if n.rule.index() >= nr {
            return Err(corrupt("node rule out of range"));
        }
        for e in &n.edges {
            if e.target.index() >= nn || matches!(e.label, EdgeLabel::Rule(r) if r.index() >= nr) {
                return Err(corrupt("edge out of range"));
            }
        }
    }
    Ok(())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn ids(&mut self, ids: &[u32]) {
        self.u32(ids.len() as u32);
        for &id in ids {
            self.u32(id);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BundleError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or(BundleError::Truncated(self.pos))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, BundleError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, BundleError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn ids(&mut self, vocab_size: usize) -> Result<Vec<u32>, BundleError> {
        let n = self.u32()? as usize;
        let raw = self.take(n.checked_mul(4).ok_or(BundleError::Truncated(self.pos))?)?;
        let ids: Vec<u32> = raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
        if ids.windows(2).any(|w| w[0] >= w[1]) || ids.last().is_some_and(|&i| i as usize >= vocab_size) {
            return Err(corrupt("id list not sorted or out of range"));
        }
        Ok(ids)
    }
}
