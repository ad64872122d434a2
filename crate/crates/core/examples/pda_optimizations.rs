//! Shows how node merging and rule inlining shrink each bundled grammar.
//!
//!     cargo run --example pda_optimizations -- [--dot]

use grammask::bundle::optimize_pda;
use grammask::fixtures::named_grammars;
use grammask::grammar::parse_grammar;
use grammask::pda::{build_pda, inline_rules, merge_nodes, to_dot};
use grammask::CompileOptions;

fn main() {
    let dot = std::env::args().any(|a| a == "--dot");
    println!("{:<14} {:>14} {:>14} {:>14} {:>14}", "grammar", "raw", "merge", "inline", "both");
    for (name, text) in named_grammars() {
        let raw = build_pda(&parse_grammar(&text).unwrap());
        let merged = merge_nodes(&raw);
        let inlined = inline_rules(&raw, 16, 512);
        let both = optimize_pda(raw.clone(), CompileOptions::default());
        let cell = |p: &grammask::pda::Pda| format!("{}n/{}e/{}r", p.node_count(), p.edge_count(), p.rule_ref_count());
        println!("{:<14} {:>14} {:>14} {:>14} {:>14}", name, cell(&raw), cell(&merged), cell(&inlined), cell(&both));
        if dot && name == "array_string" {
            println!("{}", to_dot(&both));
        }
    }
}
