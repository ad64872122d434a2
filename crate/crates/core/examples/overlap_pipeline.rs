//! Runs mask generation on a worker thread while a simulated forward pass
//! sleeps, and compares per-token time with the sequential loop.
//!
//!     cargo run --release --example overlap_pipeline -- [forward_factor]

use std::sync::Arc;

use grammask::bench::run_overlap;
use grammask::fixtures::{synthetic_vocab, JSON_GRAMMAR};
use grammask::grammar::parse_grammar;
use grammask::{compile, CompileOptions};

fn main() {
    let factor: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let v = Arc::new(synthetic_vocab(32_000, 1));
    let g = parse_grammar(JSON_GRAMMAR).unwrap();
    let cg = Arc::new(compile(&g, &v, CompileOptions::default()).unwrap());
    let r = run_overlap(&cg, &v, factor, 400, 9);
    println!("mask {:.1} us, forward {:.1} us", r.mask_mean_us, r.forward_us);
    println!("sequential {:.1} us/token, overlapped {:.1} us/token", r.sequential_tpot_us, r.overlapped_tpot_us);
    println!("ratio {:.3}, lower bound {:.3}", r.ratio, factor.max(1.0) / (1.0 + factor));
    println!("identical outputs: {}", r.identical_outputs);
}
