//! Mask latency measurements: the optimization ablation and the
//! overlap of mask generation with a simulated forward pass.

use std::sync::mpsc;
use std::sync::{Arc, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bundle::{compile_with_report, BundleError, CompileOptions, CompiledGrammar};
use crate::generate::{generate, GenerateOptions};
use crate::grammar::Grammar;
use crate::mask::TokenMask;
use crate::matcher::Matcher;
use crate::vocab::{build_sorted_index, TokenId, Vocabulary};

pub const DEFAULT_WARMUP: usize = 100;

/// The ablation ladder: each step adds one optimization to the previous.
pub fn ablation_steps() -> Vec<(&'static str, CompileOptions)> {
    let off = CompileOptions::unoptimized();
    vec![
        ("baseline", off),
        ("+merge", CompileOptions { merge: true, ..off }),
        ("+cache", CompileOptions { merge: true, cache: true, ..off }),
        ("+inline", CompileOptions { merge: true, cache: true, inline: true, ..off }),
        ("+ctx", CompileOptions::default()),
    ]
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p99_us: f64,
}

pub fn latency_stats(samples: &[Duration]) -> LatencyStats {
    if samples.is_empty() {
        return LatencyStats::default();
    }
    let mut us: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e6).collect();
    us.sort_by(f64::total_cmp);
    let pick = |q: f64| us[((us.len() - 1) as f64 * q).round() as usize];
    LatencyStats {
        samples: us.len(),
        mean_us: us.iter().sum::<f64>() / us.len() as f64,
        median_us: pick(0.5),
        p99_us: pick(0.99),
    }
}

/// Token sequences produced by the mock model, used as replay input.
pub fn record_traces(
    cg: &Arc<CompiledGrammar>,
    v: &Arc<Vocabulary>,
    count: usize,
    seed: u64,
    opts: GenerateOptions,
) -> Result<Vec<Vec<TokenId>>, BundleError> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut m = Matcher::new(cg.clone(), v.clone()).map_err(|e| match e {
            crate::matcher::MatcherError::Bundle(b) => b,
            other => BundleError::Corrupt(other.to_string()),
        })?;
        let g = generate(&mut m, GenerateOptions { seed: seed.wrapping_add(i as u64), ..opts });
        out.push(g.tokens);
    }
    Ok(out)
}

/// Replays `traces`, timing each mask fill. The first `warmup` fills are
/// discarded and at most `iterations` are kept; traces are reused
/// cyclically until enough samples exist.
pub fn measure_masks(
    cg: &Arc<CompiledGrammar>,
    v: &Arc<Vocabulary>,
    traces: &[Vec<TokenId>],
    warmup: usize,
    iterations: usize,
) -> Vec<Duration> {
    let mut samples = Vec::with_capacity(iterations);
    let mut seen = 0usize;
    let mut mask = TokenMask::new(v.size());
    if traces.iter().all(Vec::is_empty) {
        return samples;
    }
    'outer: loop {
        for trace in traces {
            let mut m = Matcher::new(cg.clone(), v.clone()).expect("traces recorded for this vocabulary");
            for &id in trace {
                let t = Instant::now();
                m.fill_next_token_mask(&mut mask);
                let dt = t.elapsed();
                debug_assert!(mask.get(id));
                if seen >= warmup {
                    samples.push(dt);
                    if samples.len() >= iterations {
                        break 'outer;
                    }
                }
                seen += 1;
                assert!(m.accept_token(id), "replayed token rejected");
            }
        }
    }
    samples
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigReport {
    pub name: String,
    pub merge: bool,
    pub inline: bool,
    pub cache: bool,
    pub ctx_expansion: bool,
    pub nodes: usize,
    pub edges: usize,
    pub preprocess_ms: f64,
    pub mask_latency: LatencyStats,
    pub cache_entries: usize,
    pub cache_bytes: usize,
    pub all_bitset_bytes: usize,
    pub cache_ratio: f64,
    pub dependent_total: usize,
    pub dependent_before_ctx: usize,
    pub mean_dependent_fraction: f64,
    pub bytes_examined_per_entry: u64,
    pub saved_chars_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapReport {
    pub steps: usize,
    /// Mean mask fill without forward passes in between.
    pub mask_mean_us: f64,
    /// Requested forward latency.
    pub forward_us: f64,
    /// Mean fill and forward latency observed in the sequential session.
    pub sequential_mask_us: f64,
    pub sequential_forward_us: f64,
    pub sequential_tpot_us: f64,
    pub overlapped_tpot_us: f64,
    pub ratio: f64,
    pub identical_outputs: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub vocab_size: usize,
    pub warmup: usize,
    pub iterations: usize,
    pub configs: Vec<ConfigReport>,
    pub overlap: Option<OverlapReport>,
}

pub fn config_report(
    name: &str,
    g: &Grammar,
    v: &Arc<Vocabulary>,
    opts: CompileOptions,
    traces: &[Vec<TokenId>],
    warmup: usize,
    iterations: usize,
) -> Result<(ConfigReport, Arc<CompiledGrammar>), BundleError> {
    let (mut report, cg) = compiled_report(name, g, v, opts)?;
    report.mask_latency = latency_stats(&measure_masks(&cg, v, traces, warmup, iterations));
    Ok((report, cg))
}

fn compiled_report(
    name: &str,
    g: &Grammar,
    v: &Arc<Vocabulary>,
    opts: CompileOptions,
) -> Result<(ConfigReport, Arc<CompiledGrammar>), BundleError> {
    let (cg, rep) = compile_with_report(g, v, opts)?;
    let cg = Arc::new(cg);
    let non_special = v.non_special_count().max(1) as f64;
    let (entries, bytes, all_bitset, dep) = match cg.cache() {
        Some(c) => (c.len(), c.payload_bytes(), c.all_bitset_bytes(), c.dependent_total()),
        None => (0, 0, 0, 0),
    };
    let stats = rep.cache_stats.clone().unwrap_or_default();
    let report = ConfigReport {
        name: name.to_string(),
        merge: opts.merge,
        inline: opts.inline,
        cache: opts.cache,
        ctx_expansion: cg.options().ctx_expansion,
        nodes: rep.nodes,
        edges: rep.edges,
        preprocess_ms: rep.preprocess.as_secs_f64() * 1e3,
        mask_latency: LatencyStats::default(),
        cache_entries: entries,
        cache_bytes: bytes,
        all_bitset_bytes: all_bitset,
        cache_ratio: if all_bitset == 0 { 0.0 } else { bytes as f64 / all_bitset as f64 },
        dependent_total: dep,
        dependent_before_ctx: stats.total_dependent_before(),
        mean_dependent_fraction: if entries == 0 { 0.0 } else { dep as f64 / entries as f64 / non_special },
        bytes_examined_per_entry: stats.bytes_examined.first().copied().unwrap_or(0),
        saved_chars_ratio: build_sorted_index(v).saved_chars_ratio(),
    };
    Ok((report, cg))
}

/// Runs every step of the ablation ladder on the same traces. Measurement
/// is split into `rounds` that visit the configurations in turn, each
/// keeping `iterations / rounds` samples.
pub fn run_ablation(
    g: &Grammar,
    v: &Arc<Vocabulary>,
    traces: &[Vec<TokenId>],
    warmup: usize,
    iterations: usize,
    rounds: usize,
) -> Result<Vec<ConfigReport>, BundleError> {
    let mut compiled = ablation_steps()
        .into_iter()
        .map(|(name, opts)| compiled_report(name, g, v, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let rounds = rounds.clamp(1, iterations.max(1));
    let mut samples = vec![Vec::with_capacity(iterations); compiled.len()];
    for round in 0..rounds {
        let take = iterations / rounds + usize::from(round < iterations % rounds);
        for ((_, cg), s) in compiled.iter().zip(samples.iter_mut()) {
            s.extend(measure_masks(cg, v, traces, warmup, take));
        }
    }
    for ((report, _), s) in compiled.iter_mut().zip(&samples) {
        report.mask_latency = latency_stats(s);
    }
    Ok(compiled.into_iter().map(|(r, _)| r).collect())
}

fn pick(mask: &TokenMask, rng: &mut ChaCha8Rng) -> Option<TokenId> {
    let n = mask.count();
    (n > 0).then(|| mask.iter_ones().nth(rng.gen_range(0..n)).unwrap())
}

/// Stands in for the model's forward pass: blocks the calling thread for
/// `d` while leaving the CPU to other threads. The sleep is shortened by the
/// typical oversleep of this machine and the rest is spent yielding.
pub fn fake_forward(d: Duration) {
    let deadline = Instant::now() + d;
    let early = oversleep();
    if d > early {
        thread::sleep(d - early);
    }
    while Instant::now() < deadline {
        thread::yield_now();
    }
}

/// Median amount by which a short sleep overruns its request.
fn oversleep() -> Duration {
    static OVERSLEEP: OnceLock<Duration> = OnceLock::new();
    *OVERSLEEP.get_or_init(|| {
        let asked = Duration::from_micros(50);
        let mut late: Vec<Duration> = (0..21)
            .map(|_| {
                let t = Instant::now();
                thread::sleep(asked);
                t.elapsed().saturating_sub(asked)
            })
            .collect();
        late.sort();
        late[late.len() / 2]
    })
}

enum Job {
    Fill(TokenMask),
    Accept(TokenId),
    Reset,
}

struct Session {
    tpot: Duration,
    mean_fill: Duration,
    mean_forward: Duration,
    tokens: Vec<TokenId>,
}

/// One simulated decoding session of `steps` tokens. Sessions restart
/// whenever the output finishes.
fn decode_session(
    cg: &Arc<CompiledGrammar>,
    v: &Arc<Vocabulary>,
    steps: usize,
    forward: Duration,
    overlapped: bool,
    seed: u64,
) -> Session {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(steps);
    let (job_tx, job_rx) = mpsc::channel::<Job>();
    let (mask_tx, mask_rx) = mpsc::channel::<(TokenMask, Duration)>();
    let fresh = Matcher::new(cg.clone(), v.clone()).expect("bundle compiled for this vocabulary");
    // The worker owns the matcher; in the sequential mode the main thread
    // simply waits for each mask before starting the forward pass.
    let worker = thread::spawn(move || {
        let mut m = fresh.branch();
        while let Ok(job) = job_rx.recv() {
            match job {
                Job::Fill(mut mask) => {
                    let t = Instant::now();
                    m.fill_next_token_mask(&mut mask);
                    if mask_tx.send((mask, t.elapsed())).is_err() {
                        break;
                    }
                }
                Job::Accept(id) => assert!(m.accept_token(id)),
                Job::Reset => m = fresh.branch(),
            }
        }
    });
    let mut spare = Some(TokenMask::new(v.size()));
    let eos = v.eos_id();
    let mut fill_total = Duration::ZERO;
    let mut forward_total = Duration::ZERO;
    let timed_forward = |total: &mut Duration| {
        let t = Instant::now();
        fake_forward(forward);
        *total += t.elapsed();
    };
    let started = Instant::now();
    for _ in 0..steps {
        job_tx.send(Job::Fill(spare.take().unwrap())).unwrap();
        let (mask, fill) = if overlapped {
            timed_forward(&mut forward_total);
            mask_rx.recv().unwrap()
        } else {
            let mask = mask_rx.recv().unwrap();
            timed_forward(&mut forward_total);
            mask
        };
        fill_total += fill;
        let id = pick(&mask, &mut rng).expect("masks are never empty before the end");
        spare = Some(mask);
        out.push(id);
        if id == eos {
            job_tx.send(Job::Reset).unwrap();
        } else {
            job_tx.send(Job::Accept(id)).unwrap();
        }
    }
    let elapsed = started.elapsed();
    drop(job_tx);
    worker.join().unwrap();
    let n = steps as u32;
    Session { tpot: elapsed / n, mean_fill: fill_total / n, mean_forward: forward_total / n, tokens: out }
}

/// Compares sequential and overlapped decoding with a forward pass that
/// takes `forward_factor` times the mean mask latency. The latency is taken
/// from a first session without forward time that samples the same tokens.
pub fn run_overlap(
    cg: &Arc<CompiledGrammar>,
    v: &Arc<Vocabulary>,
    forward_factor: f64,
    steps: usize,
    seed: u64,
) -> OverlapReport {
    let calibration = decode_session(cg, v, steps, Duration::ZERO, false, seed);
    let forward = calibration.mean_fill.mul_f64(forward_factor);
    overlap_report(cg, v, calibration, forward, steps, seed)
}

/// Like [`run_overlap`] with a fixed forward latency.
pub fn run_overlap_fixed(
    cg: &Arc<CompiledGrammar>,
    v: &Arc<Vocabulary>,
    forward: Duration,
    steps: usize,
    seed: u64,
) -> OverlapReport {
    let calibration = decode_session(cg, v, steps, Duration::ZERO, false, seed);
    overlap_report(cg, v, calibration, forward, steps, seed)
}

fn overlap_report(
    cg: &Arc<CompiledGrammar>,
    v: &Arc<Vocabulary>,
    calibration: Session,
    forward: Duration,
    steps: usize,
    seed: u64,
) -> OverlapReport {
    let seq = decode_session(cg, v, steps, forward, false, seed);
    let ovl = decode_session(cg, v, steps, forward, true, seed);
    let (s, o) = (seq.tpot.as_secs_f64() * 1e6, ovl.tpot.as_secs_f64() * 1e6);
    OverlapReport {
        steps,
        mask_mean_us: calibration.mean_fill.as_secs_f64() * 1e6,
        forward_us: forward.as_secs_f64() * 1e6,
        sequential_mask_us: seq.mean_fill.as_secs_f64() * 1e6,
        sequential_forward_us: seq.mean_forward.as_secs_f64() * 1e6,
        sequential_tpot_us: s,
        overlapped_tpot_us: o,
        ratio: o / s,
        identical_outputs: seq.tokens == ovl.tokens && seq.tokens == calibration.tokens,
    }
}
