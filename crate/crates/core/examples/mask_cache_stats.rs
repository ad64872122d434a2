//! Builds the adaptive token mask cache for JSON over a 32k vocabulary and
//! prints the storage variant and token split of every entry.
//!
//!     cargo run --release --example mask_cache_stats

use std::time::Instant;

use grammask::bundle::compile_with_report;
use grammask::fixtures::{synthetic_vocab, JSON_GRAMMAR};
use grammask::grammar::parse_grammar;
use grammask::vocab::build_sorted_index;
use grammask::CompileOptions;

fn main() {
    let v = synthetic_vocab(32_000, 1);
    let g = parse_grammar(JSON_GRAMMAR).unwrap();
    let started = Instant::now();
    let (cg, report) = compile_with_report(&g, &v, CompileOptions::default()).unwrap();
    println!("compiled in {:.2?}: {} nodes, {} edges", started.elapsed(), report.nodes, report.edges);

    let p = cg.pda();
    let cache = cg.cache().unwrap();
    println!("{:>5} {:<8} {:<12} {:>7} {:>7} {:>5} {:>7}", "node", "rule", "kind", "accept", "reject", "dep", "bytes");
    for (node, entry) in cache.iter() {
        let part = entry.partition(&v);
        println!(
            "{:>5} {:<8} {:<12} {:>7} {:>7} {:>5} {:>7}",
            node.index(),
            p.rule(p.node(node).rule).name,
            format!("{:?}", entry.kind()),
            part.accepted.len(),
            part.rejected.len(),
            part.dependent.len(),
            entry.byte_size()
        );
    }

    let stats = report.cache_stats.as_ref().unwrap();
    let n = v.non_special_count() as f64;
    println!(
        "dependent tokens: {} without context expansion, {} with ({:.3}% of the vocabulary per entry)",
        stats.total_dependent_before(),
        stats.total_dependent_after(),
        100.0 * stats.total_dependent_after() as f64 / cache.len() as f64 / n
    );
    println!(
        "storage: {} bytes, {} as plain bitsets ({:.1}%)",
        cache.payload_bytes(),
        cache.all_bitset_bytes(),
        100.0 * cache.payload_bytes() as f64 / cache.all_bitset_bytes() as f64
    );
    println!("saved_chars_ratio {:.3}", build_sorted_index(&v).saved_chars_ratio());
}
