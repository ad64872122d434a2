//! A stand-in language model: samples uniformly among the permitted tokens,
//! and once a soft budget is spent steers toward the nearest way to finish.

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mask::TokenMask;
use crate::matcher::Matcher;
use crate::pda::Pda;
use crate::stack::StackRef;
use crate::vocab::TokenId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenerateOptions {
    pub seed: u64,
    /// Tokens sampled uniformly before steering toward the end.
    pub soft_budget: usize,
    /// Hard limit on generated tokens, EOS included.
    pub max_tokens: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { seed: 0, soft_budget: 48, max_tokens: 512 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generation {
    pub tokens: Vec<TokenId>,
    /// Decoded bytes, EOS excluded.
    pub text: Vec<u8>,
    /// Whether EOS was produced within the limit.
    pub finished: bool,
}

/// Bytes still needed to finish from the given stacks, if known.
pub fn completion_cost(dist: &[u32], tops: &[StackRef]) -> u64 {
    tops.iter()
        .map(|s| {
            let mut total = 0u64;
            let mut cur = Some(s);
            while let Some(f) = cur {
                let d = dist[f.node().index()];
                if d == u32::MAX {
                    return u64::MAX;
                }
                total += u64::from(d);
                cur = f.parent();
            }
            total
        })
        .min()
        .unwrap_or(u64::MAX)
}

/// Drives `m` until EOS or the token limit. `m` is left at the final state.
pub fn generate(m: &mut Matcher, opts: GenerateOptions) -> Generation {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dist = m.grammar().pda().min_completion();
    let eos = m.vocab().eos_id();
    let mut mask = m.new_mask();
    let mut tokens = Vec::new();
    while tokens.len() < opts.max_tokens {
        m.fill_next_token_mask(&mut mask);
        let pick = if tokens.len() < opts.soft_budget {
            mask.iter_ones().choose(&mut rng)
        } else {
            steer(m, &mask, &dist, eos)
        };
        let Some(id) = pick else { break };
        let ok = m.accept_token(id);
        assert!(ok, "token {id} was in the mask but not accepted");
        tokens.push(id);
        if id == eos {
            break;
        }
    }
    let finished = tokens.last() == Some(&eos);
    let text = m.vocab().decode(&tokens);
    Generation { tokens, text, finished }
}

fn steer(m: &mut Matcher, mask: &TokenMask, dist: &[u32], eos: TokenId) -> Option<TokenId> {
    if mask.get(eos) {
        return Some(eos);
    }
    let mut best: Option<(u64, TokenId)> = None;
    for id in mask.iter_ones() {
        let mut probe = m.branch();
        if !probe.accept_token(id) {
            continue;
        }
        let cost = completion_cost(dist, probe.tops());
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, id));
        }
    }
    best.map(|(_, id)| id)
}

/// Convenience for tests: whether `text` is a complete match of `p`.
pub fn is_complete(p: &Pda, text: &[u8]) -> bool {
    crate::pda::oracle_accepts(p, text).unwrap_or(false)
}
