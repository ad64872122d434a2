//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use grammask::bench::{record_traces, run_ablation, run_overlap, DEFAULT_WARMUP};
use grammask::bundle::{compile_with_report, CompileReport};
use grammask::fixtures::{named_grammars, probe_alphabet, synthetic_vocab, toy_vocab, JSON_GRAMMAR};
use grammask::generate::{generate, GenerateOptions};
use grammask::grammar::{parse_grammar, Grammar};
use grammask::pda::{
    build_pda, inline_rules, merge_nodes, oracle_accepts, oracle_closure, oracle_partial_states, oracle_step,
    OracleStack, Pda, DEFAULT_STATE_CAP,
};
use grammask::vocab::{build_sorted_index, TokenId, Vocabulary};
use grammask::{compile, CompileOptions, CompiledGrammar, Matcher, TokenMask};
use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grammars() -> Vec<(&'static str, Grammar)> {
    named_grammars().into_iter().map(|(name, text)| (name, parse_grammar(&text).unwrap())).collect()
}

type States = BTreeSet<OracleStack>;

/// Token mask computed by running every token through the reference
/// interpreter from the states reached after `prefix`.
fn oracle_mask(p: &Pda, v: &Vocabulary, prefix: &[u8]) -> Vec<bool> {
    let states = oracle_partial_states(p, prefix).unwrap();
    let mut out = vec![false; v.size()];
    if states.is_empty() {
        return out;
    }
    for id in 0..v.size() as TokenId {
        let t = v.token(id);
        if !v.is_special(id) && !t.is_empty() {
            out[id as usize] = !oracle_step(p, &states, t, DEFAULT_STATE_CAP).unwrap().is_empty();
        }
    }
    out[v.eos_id() as usize] = oracle_closure(p, &states, DEFAULT_STATE_CAP).unwrap().1;
    out
}

fn mask_bits(m: &TokenMask) -> Vec<bool> {
    (0..m.size() as TokenId).map(|id| m.get(id)).collect()
}

fn oracle_equivalence() -> Outcome {
    const STATES: usize = 500;
    let v = Arc::new(toy_vocab());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    let mut mismatches = Vec::new();
    let variants =
        [("default", CompileOptions::default()), ("strict", CompileOptions { strict_ctx: true, ..Default::default() })];
    for (name, g) in grammars() {
        let raw = build_pda(&g);
        for (variant, opts) in variants {
            let cg = Arc::new(compile(&g, &v, opts).unwrap());
            let mut done = 0;
            let mut mask = TokenMask::new(v.size());
            while done < STATES {
                let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
                let mut prefix = Vec::new();
                let len = rng.gen_range(0..48);
                for _ in 0..=len {
                    if done == STATES {
                        break;
                    }
                    let expected = oracle_mask(&raw, &v, &prefix);
                    m.fill_next_token_mask(&mut mask);
                    done += 1;
                    checked += 1;
                    if mask_bits(&mask) != expected {
                        mismatches.push(format!("{name}/{variant} after {:?}", String::from_utf8_lossy(&prefix)));
                    }
                    let next = (0..v.size() as TokenId)
                        .filter(|&id| expected[id as usize] && id != v.eos_id())
                        .choose(&mut rng);
                    let Some(id) = next else { break };
                    assert!(m.accept_token(id));
                    prefix.extend_from_slice(v.token(id));
                }
            }
        }
    }
    let first = mismatches.first().cloned().unwrap_or_default();
    outcome(
        mismatches.is_empty(),
        format!("{}/{checked} states identical to the reference masks {first}", checked - mismatches.len()),
    )
}

/// Visits every string over `alphabet` up to `depth`, stepping all automata
/// together; subtrees where every automaton is dead are counted, not walked.
fn agree_below(pdas: &[Pda], states: Vec<States>, alphabet: &[u8], depth: usize, stats: &mut (u64, u64)) {
    let verdicts: Vec<(bool, bool)> = pdas
        .iter()
        .zip(&states)
        .map(|(p, s)| (!s.is_empty(), !s.is_empty() && oracle_closure(p, s, DEFAULT_STATE_CAP).unwrap().1))
        .collect();
    let all_dead = verdicts.iter().all(|v| !v.0);
    let subtree: u64 = (0..=depth as u32).map(|k| (alphabet.len() as u64).pow(k)).sum();
    if verdicts.windows(2).any(|w| w[0] != w[1]) {
        stats.1 += 1;
    }
    if all_dead || depth == 0 {
        stats.0 += if all_dead { subtree } else { 1 };
        return;
    }
    stats.0 += 1;
    for &b in alphabet {
        let next = pdas.iter().zip(&states).map(|(p, s)| oracle_step(p, s, &[b], DEFAULT_STATE_CAP).unwrap()).collect();
        agree_below(pdas, next, alphabet, depth - 1, stats);
    }
}

fn language_preservation() -> Outcome {
    let v = toy_vocab();
    let mut total = 0;
    let mut disagreements = 0;
    for (name, g) in grammars() {
        let raw = build_pda(&g);
        let both = CompileOptions { cache: false, ctx_expansion: false, ..Default::default() };
        let pdas =
            vec![inline_rules(&raw, 16, 512), merge_nodes(&raw), compile(&g, &v, both).unwrap().pda().clone(), raw];
        let start = pdas.iter().map(|p| oracle_partial_states(p, b"").unwrap()).collect();
        let mut stats = (0, 0);
        agree_below(&pdas, start, &probe_alphabet(name), 8, &mut stats);
        total += stats.0;
        disagreements += stats.1;
    }
    outcome(disagreements == 0, format!("{total} strings up to length 8, {disagreements} disagreements"))
}

struct JsonCache {
    v: Vocabulary,
    cg: CompiledGrammar,
    report: CompileReport,
}

fn json_cache() -> JsonCache {
    let v = synthetic_vocab(32_000, 1);
    let g = parse_grammar(JSON_GRAMMAR).unwrap();
    let (cg, report) = compile_with_report(&g, &v, CompileOptions::default()).unwrap();
    JsonCache { v, cg, report }
}

fn classification(j: &JsonCache) -> Outcome {
    let cache = j.cg.cache().unwrap();
    let stats = j.report.cache_stats.as_ref().unwrap();
    let n = j.v.non_special_count() as f64;
    let fraction = stats.total_dependent_after() as f64 / cache.len() as f64 / n;
    let before = stats.total_dependent_before();
    let reduction = 1.0 - stats.total_dependent_after() as f64 / before as f64;
    outcome(
        fraction <= 0.05 && reduction >= 0.5,
        format!(
            "mean dependent fraction {:.4}% (limit 5%), dependents {} -> {} ({:.1}% fewer, floor 50%)",
            100.0 * fraction,
            before,
            stats.total_dependent_after(),
            100.0 * reduction
        ),
    )
}

fn storage(j: &JsonCache) -> Outcome {
    let cache = j.cg.cache().unwrap();
    let vocab = j.v.size();
    let bitset_form = vocab.div_ceil(8);
    let mut not_minimal = 0;
    let mut total = 0usize;
    let mut all_bitset = 0usize;
    for (_, e) in cache.iter() {
        let part = e.partition(&j.v);
        let (a, r, d) = (part.accepted.len(), part.rejected.len(), part.dependent.len());
        let smallest = [4 * (r + d), 4 * (a + d), bitset_form + 4 * d].into_iter().min().unwrap();
        if e.byte_size() != smallest {
            not_minimal += 1;
        }
        total += e.byte_size();
        all_bitset += bitset_form + 4 * d;
    }
    let ratio = total as f64 / all_bitset as f64;
    outcome(
        ratio <= 0.02 && not_minimal == 0,
        format!(
            "{total} bytes vs {all_bitset} all-bitset ({:.2}%, limit 2%), {}/{} entries byte-minimal",
            100.0 * ratio,
            cache.len() - not_minimal,
            cache.len()
        ),
    )
}

fn prefix_sharing(j: &JsonCache) -> Outcome {
    let mut prefixes: HashSet<&[u8]> = HashSet::new();
    let mut total_len = 0u64;
    for id in 0..j.v.size() as TokenId {
        if j.v.is_special(id) {
            continue;
        }
        let t = j.v.token(id);
        total_len += t.len() as u64;
        for k in 1..=t.len() {
            prefixes.insert(&t[..k]);
        }
    }
    let trie_edges = prefixes.len() as u64;
    let ratio = trie_edges as f64 / total_len as f64;
    let stats = j.report.cache_stats.as_ref().unwrap();
    let off = stats.bytes_examined.iter().filter(|&&b| b != trie_edges).count();
    let reported = build_sorted_index(&j.v).saved_chars_ratio();
    outcome(
        ratio <= 0.5 && off == 0 && (reported - ratio).abs() < 1e-12,
        format!(
            "saved_chars_ratio {ratio:.3} (limit 0.5), counter equals {trie_edges} bytes in {}/{} cache keys",
            stats.bytes_examined.len() - off,
            stats.bytes_examined.len()
        ),
    )
}

fn ablation(v: &Arc<Vocabulary>) -> Outcome {
    let started = Instant::now();
    let g = parse_grammar(JSON_GRAMMAR).unwrap();
    let cg = Arc::new(compile(&g, v, CompileOptions::default()).unwrap());
    let opts = GenerateOptions { soft_budget: 40, max_tokens: 256, ..Default::default() };
    let traces = record_traces(&cg, v, 16, 7, opts).unwrap();
    let reports = run_ablation(&g, v, &traces, DEFAULT_WARMUP, 200, 4).unwrap();
    let elapsed = started.elapsed();
    let means: Vec<f64> = reports.iter().map(|r| r.mask_latency.mean_us).collect();
    let strictly = means.windows(2).all(|w| w[1] < w[0]);
    let speedup = means[1] / means[2];
    let ladder: Vec<String> = reports.iter().map(|r| format!("{} {:.1}us", r.name, r.mask_latency.mean_us)).collect();
    outcome(
        strictly && speedup >= 10.0 && elapsed < Duration::from_secs(300),
        format!(
            "{}; +cache {speedup:.1}x over +merge (floor 10x); strictly decreasing: {strictly}; {:.0}s",
            ladder.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn generation_validity() -> Outcome {
    let v = Arc::new(toy_vocab());
    let mut failures = Vec::new();
    let mut runs = 0;
    for (name, g) in grammars() {
        let raw = build_pda(&g);
        let cg = Arc::new(compile(&g, &v, CompileOptions::default()).unwrap());
        for seed in 0..1000 {
            let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
            let out = generate(&mut m, GenerateOptions { seed, ..Default::default() });
            runs += 1;
            if !out.finished || !oracle_accepts(&raw, &out.text).unwrap() {
                failures.push(format!("{name} seed {seed}"));
            }
        }
    }
    let first = failures.first().cloned().unwrap_or_default();
    outcome(failures.is_empty(), format!("{runs} generations, {} failures {first}", failures.len()))
}

fn replayed(cg: &Arc<CompiledGrammar>, v: &Arc<Vocabulary>, tokens: &[TokenId]) -> TokenMask {
    let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
    for &id in tokens {
        assert!(m.accept_token(id));
    }
    let mut mask = m.new_mask();
    m.fill_next_token_mask(&mut mask);
    mask
}

fn random_accept(m: &mut Matcher, hist: &mut Vec<TokenId>, rng: &mut ChaCha8Rng) {
    let mut mask = m.new_mask();
    m.fill_next_token_mask(&mut mask);
    if let Some(id) = mask.iter_ones().choose(rng) {
        assert!(m.accept_token(id));
        hist.push(id);
    }
}

fn rollback_determinism() -> Outcome {
    const SEQUENCES: usize = 10_000;
    let v = Arc::new(toy_vocab());
    let bundles: Vec<Arc<CompiledGrammar>> =
        grammars().iter().map(|(_, g)| Arc::new(compile(g, &v, CompileOptions::default()).unwrap())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut comparisons = 0;
    let mut mismatches = 0;
    let mut mask = TokenMask::new(v.size());
    for seq in 0..SEQUENCES {
        let cg = &bundles[seq % bundles.len()];
        let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
        let mut hist: Vec<TokenId> = Vec::new();
        for _ in 0..rng.gen_range(1..=24) {
            match rng.gen_range(0..10) {
                0..=5 => random_accept(&mut m, &mut hist, &mut rng),
                6 | 7 => {
                    let k = rng.gen_range(0..=m.history_len().min(6));
                    m.rollback(k).unwrap();
                    hist.truncate(hist.len() - k);
                }
                _ => {
                    let mut b = m.branch();
                    let mut bh = hist.clone();
                    for _ in 0..rng.gen_range(1..=4) {
                        random_accept(&mut b, &mut bh, &mut rng);
                    }
                    b.fill_next_token_mask(&mut mask);
                    comparisons += 1;
                    mismatches += usize::from(mask != replayed(cg, &v, &bh));
                    if rng.gen_bool(0.5) {
                        m = b;
                        hist = bh;
                    }
                }
            }
            m.fill_next_token_mask(&mut mask);
            comparisons += 1;
            mismatches += usize::from(mask != replayed(cg, &v, &hist));
        }
    }
    outcome(mismatches == 0, format!("{SEQUENCES} sequences, {comparisons} masks compared, {mismatches} mismatches"))
}

fn overlap(v: &Arc<Vocabulary>) -> Outcome {
    let g = parse_grammar(JSON_GRAMMAR).unwrap();
    let cg = Arc::new(compile(&g, v, CompileOptions::default()).unwrap());
    let r = run_overlap(&cg, v, 2.0, 400, 9);
    outcome(
        r.ratio <= 0.6 && r.identical_outputs,
        format!(
            "mask {:.1}us, forward {:.1}us (observed {:.1}us and {:.1}us), TPOT {:.1}us sequential vs {:.1}us overlapped, ratio {:.3} (limit 0.6), identical outputs: {}",
            r.mask_mean_us,
            r.forward_us,
            r.sequential_mask_us,
            r.sequential_forward_us,
            r.sequential_tpot_us,
            r.overlapped_tpot_us,
            r.ratio,
            r.identical_outputs
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, run: &mut dyn FnMut() -> Outcome| {
        let started = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name}: {} [{:.1}s]", o.detail, started.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    };
    report("oracle equivalence", &mut oracle_equivalence);
    report("language preservation", &mut language_preservation);
    let j = json_cache();
    report("classification statistics", &mut || classification(&j));
    report("adaptive storage", &mut || storage(&j));
    report("prefix sharing", &mut || prefix_sharing(&j));
    let big = Arc::new(j.v.clone());
    drop(j);
    report("ablation ordering", &mut || ablation(&big));
    report("guided generation validity", &mut generation_validity);
    report("rollback and branch determinism", &mut rollback_determinism);
    report("overlap simulation", &mut || overlap(&big));
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
