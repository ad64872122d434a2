//! Parses an EBNF grammar, prints its normalized form and checks a few inputs
//! against the byte-level automaton.
//!
//!     cargo run --example parse_grammar -- [grammar.ebnf] [input...]

use grammask::fixtures::ARITH_GRAMMAR;
use grammask::grammar::{normalize_grammar, parse_grammar, pretty_print};
use grammask::pda::{build_pda, oracle_check, CheckOutcome};

fn main() {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path).unwrap(),
        None => ARITH_GRAMMAR.to_string(),
    };
    let g = match parse_grammar(&text) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    println!("{} rules, root `{}`", g.rules().len(), g.rule(g.root()).name);
    println!("{}", pretty_print(&normalize_grammar(&g)));

    let mut inputs: Vec<String> = args.collect();
    if inputs.is_empty() {
        inputs = vec!["1+2*(3-4)".into(), "(1+".into(), "1+*2".into()];
    }
    let p = build_pda(&g);
    for input in inputs {
        match oracle_check(&p, input.as_bytes()).unwrap() {
            CheckOutcome::Accepted => println!("{input:?}: accepted"),
            CheckOutcome::Rejected { offset, end_of_input: true } => println!("{input:?}: incomplete at {offset}"),
            CheckOutcome::Rejected { offset, .. } => println!("{input:?}: rejected at {offset}"),
        }
    }
}
