//! Mask latency for each step of the optimization ladder on the JSON
//! grammar with a 32k-token vocabulary.
//!
//!     cargo run --release --example ablation_bench -- [iterations]

use std::sync::Arc;

use grammask::bench::{record_traces, run_ablation, DEFAULT_WARMUP};
use grammask::fixtures::{synthetic_vocab, JSON_GRAMMAR};
use grammask::generate::GenerateOptions;
use grammask::grammar::parse_grammar;
use grammask::{compile, CompileOptions};

fn main() {
    let iterations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let v = Arc::new(synthetic_vocab(32_000, 1));
    let g = parse_grammar(JSON_GRAMMAR).unwrap();
    let full = Arc::new(compile(&g, &v, CompileOptions::default()).unwrap());
    let traces =
        record_traces(&full, &v, 16, 7, GenerateOptions { soft_budget: 40, max_tokens: 256, ..Default::default() })
            .unwrap();
    let steps: usize = traces.iter().map(Vec::len).sum();
    println!("{} traces, {} steps", traces.len(), steps);
    let reports = run_ablation(&g, &v, &traces, DEFAULT_WARMUP, iterations, 5).unwrap();
    println!(
        "{:<10} {:>12} {:>12} {:>12} {:>10} {:>10}",
        "config", "mean us", "median us", "p99 us", "prep ms", "dependent"
    );
    for r in &reports {
        println!(
            "{:<10} {:>12.2} {:>12.2} {:>12.2} {:>10.1} {:>10}",
            r.name,
            r.mask_latency.mean_us,
            r.mask_latency.median_us,
            r.mask_latency.p99_us,
            r.preprocess_ms,
            r.dependent_total
        );
    }
}
