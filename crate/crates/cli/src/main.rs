//! `grammask`: compile grammars into bundles, check inputs, print token
//! masks, run mock constrained generation and benchmarks.
//!
//! Exit codes: 0 success, 1 rejected input or unfinished generation,
//! 2 usage, IO or format errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use grammask::bench::{config_report, record_traces, run_ablation, run_overlap, run_overlap_fixed, BenchReport};
use grammask::bundle::{compile_with_report, hash_hex, optimize_pda};
use grammask::cache::StorageKind;
use grammask::fixtures::{synthetic_vocab, toy_vocab, JSON_GRAMMAR};
use grammask::generate::{generate, GenerateOptions};
use grammask::grammar::{parse_grammar, Grammar};
use grammask::pda::{build_pda, oracle_accepts, oracle_check, to_dot, to_text, CheckOutcome};
use grammask::schema::schema_to_grammar_text;
use grammask::vocab::{TokenId, Vocabulary};
use grammask::{CompileOptions, CompiledGrammar, Matcher};

#[derive(Parser)]
#[command(name = "grammask", version, about = "Grammar-constrained token masks")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a grammar and vocabulary into a bundle file.
    Compile {
        grammar: PathBuf,
        #[arg(long)]
        vocab: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Print per-entry classification counts and storage variants.
        #[arg(long)]
        stats: bool,
        #[command(flatten)]
        toggles: Toggles,
    },
    /// Exit 0 iff the grammar accepts the whole input file.
    Check { grammar: PathBuf, input: PathBuf },
    /// Print the next-token mask as little-endian hex.
    Mask {
        bundle: PathBuf,
        #[arg(long)]
        vocab: String,
        /// Text accepted before computing the mask.
        #[arg(long, conflicts_with = "tokens")]
        prefix: Option<String>,
        /// Comma-separated token ids accepted before computing the mask.
        #[arg(long, value_delimiter = ',')]
        tokens: Vec<TokenId>,
    },
    /// Generate text with the mock model.
    Gen {
        bundle: PathBuf,
        #[arg(long)]
        vocab: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        max_tokens: usize,
        /// Uniformly sampled tokens before steering toward the end.
        #[arg(long, default_value_t = 48)]
        soft_budget: usize,
    },
    /// Measure mask latency, by default over the whole optimization ladder.
    Bench(BenchArgs),
    /// JSON Schema tools.
    Schema {
        #[command(subcommand)]
        command: SchemaCommand,
    },
    /// Automaton tools.
    Pda {
        #[command(subcommand)]
        command: PdaCommand,
    },
}

#[derive(Subcommand)]
enum SchemaCommand {
    /// Print the grammar for a schema.
    Compile {
        schema: PathBuf,
        /// No whitespace between JSON tokens.
        #[arg(long)]
        strict_ws: bool,
    },
}

#[derive(Subcommand)]
enum PdaCommand {
    /// Print the automaton of a grammar after the enabled passes.
    Dump {
        grammar: PathBuf,
        /// Graphviz output.
        #[arg(long)]
        dot: bool,
        #[command(flatten)]
        toggles: Toggles,
    },
}

#[derive(Args, Clone, Copy)]
struct Toggles {
    #[arg(long)]
    no_merge: bool,
    #[arg(long)]
    no_inline: bool,
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    no_ctx: bool,
    /// Context expansion that stops where the enclosing rule may end.
    #[arg(long)]
    strict_ctx: bool,
    #[arg(long, default_value_t = 16)]
    max_inline_rule: usize,
    #[arg(long, default_value_t = 512)]
    max_inline_result: usize,
}

impl Toggles {
    fn any_off(&self) -> bool {
        self.no_merge || self.no_inline || self.no_cache || self.no_ctx
    }

    fn options(&self) -> CompileOptions {
        CompileOptions {
            merge: !self.no_merge,
            inline: !self.no_inline,
            cache: !self.no_cache,
            ctx_expansion: !self.no_cache && !self.no_ctx,
            strict_ctx: self.strict_ctx,
            max_inline_rule: self.max_inline_rule,
            max_inline_result: self.max_inline_result,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Grammar file; the bundled JSON grammar when omitted.
    grammar: Option<PathBuf>,
    #[arg(long, default_value = "synthetic:32000")]
    vocab: String,
    #[arg(long, default_value_t = 300)]
    iterations: usize,
    #[arg(long, default_value_t = grammask::bench::DEFAULT_WARMUP)]
    warmup: usize,
    /// Interleaved measurement rounds over the configurations.
    #[arg(long, default_value_t = 4)]
    rounds: usize,
    /// Recorded generations replayed as input.
    #[arg(long, default_value_t = 16)]
    traces: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Measure only the configuration given by the toggles.
    #[arg(long)]
    single: bool,
    #[command(flatten)]
    toggles: Toggles,
    /// Also simulate overlapping mask generation with the forward pass.
    #[arg(long)]
    overlap: bool,
    /// Fixed forward latency in microseconds.
    #[arg(long)]
    forward_us: Option<u64>,
    /// Forward latency as a multiple of the mask latency.
    #[arg(long, default_value_t = 2.0)]
    forward_factor: f64,
    #[arg(long, default_value_t = 400)]
    overlap_steps: usize,
}

/// `toy`, `synthetic:N` or a vocabulary file.
fn load_vocab(arg: &str) -> Result<Vocabulary> {
    if arg == "toy" {
        return Ok(toy_vocab());
    }
    if let Some(n) = arg.strip_prefix("synthetic:") {
        let n: usize = n.parse().context("synthetic vocabulary size")?;
        if n < 2048 {
            bail!("synthetic vocabularies need at least 2048 tokens");
        }
        return Ok(synthetic_vocab(n, 1));
    }
    Vocabulary::load(arg).with_context(|| format!("reading vocabulary {arg}"))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_grammar(path: &Path) -> Result<Grammar> {
    parse_grammar(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_matcher(bundle: &Path, vocab: &str) -> Result<Matcher> {
    let cg = CompiledGrammar::load(bundle).with_context(|| format!("loading {}", bundle.display()))?;
    let v = load_vocab(vocab)?;
    Ok(Matcher::new(Arc::new(cg), Arc::new(v))?)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn kind_name(k: StorageKind) -> &'static str {
    match k {
        StorageKind::AcceptHeavy => "accept_heavy",
        StorageKind::RejectHeavy => "reject_heavy",
        StorageKind::Bitset => "bitset",
    }
}

fn cmd_compile(json: bool, grammar: &Path, vocab: &str, output: &Path, stats: bool, t: Toggles) -> Result<ExitCode> {
    let g = load_grammar(grammar)?;
    let v = load_vocab(vocab)?;
    let (cg, report) = compile_with_report(&g, &v, t.options())?;
    cg.save(output)?;
    let o = cg.options();
    let mut entries = Vec::new();
    if let Some(cache) = cg.cache().filter(|_| stats) {
        for (node, e) in cache.iter() {
            let part = e.partition(&v);
            entries.push(json!({
                "node": node.index(),
                "rule": cg.pda().rule(cg.pda().node(node).rule).name,
                "storage": kind_name(e.kind()),
                "accepted": part.accepted.len(),
                "rejected": part.rejected.len(),
                "dependent": part.dependent.len(),
                "bytes": e.byte_size(),
            }));
        }
    }
    let summary = json!({
        "output": output.display().to_string(),
        "vocab_hash": hash_hex(&cg.vocab_hash()),
        "vocab_size": cg.vocab_size(),
        "merge": o.merge,
        "inline": o.inline,
        "cache": o.cache,
        "ctx_expansion": o.ctx_expansion,
        "strict_ctx": o.strict_ctx,
        "nodes": report.nodes,
        "edges": report.edges,
        "raw_nodes": report.raw_nodes,
        "raw_edges": report.raw_edges,
        "preprocess_ms": report.preprocess.as_secs_f64() * 1e3,
        "cache_entries": cg.cache().map_or(0, |c| c.len()),
        "cache_bytes": cg.cache().map_or(0, |c| c.payload_bytes()),
        "entries": entries,
    });
    if json {
        print_json(&summary)?;
        return Ok(ExitCode::SUCCESS);
    }
    let flags: Vec<&str> = [(o.merge, "merge"), (o.inline, "inline"), (o.cache, "cache"), (o.ctx_expansion, "ctx")]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
    println!(
        "wrote {}: {} nodes, {} edges, vocab {} ({} tokens), passes: {}",
        output.display(),
        report.nodes,
        report.edges,
        hash_hex(&cg.vocab_hash()),
        cg.vocab_size(),
        if flags.is_empty() { "none (unoptimized)".to_string() } else { flags.join(" ") }
    );
    if !entries.is_empty() {
        println!(
            "{:>6} {:<16} {:<13} {:>9} {:>9} {:>9} {:>9}",
            "node", "rule", "storage", "accepted", "rejected", "dependent", "bytes"
        );
        for e in &entries {
            println!(
                "{:>6} {:<16} {:<13} {:>9} {:>9} {:>9} {:>9}",
                e["node"].as_u64().unwrap(),
                e["rule"].as_str().unwrap(),
                e["storage"].as_str().unwrap(),
                e["accepted"].as_u64().unwrap(),
                e["rejected"].as_u64().unwrap(),
                e["dependent"].as_u64().unwrap(),
                e["bytes"].as_u64().unwrap()
            );
        }
        let count = |k: StorageKind| cg.cache().unwrap().iter().filter(|(_, e)| e.kind() == k).count();
        println!(
            "accept_heavy {} reject_heavy {} bitset {}",
            count(StorageKind::AcceptHeavy),
            count(StorageKind::RejectHeavy),
            count(StorageKind::Bitset)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(json: bool, grammar: &Path, input: &Path) -> Result<ExitCode> {
    let p = build_pda(&load_grammar(grammar)?);
    let data = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let outcome = oracle_check(&p, &data)?;
    let (accepted, offset, eoi) = match outcome {
        CheckOutcome::Accepted => (true, None, false),
        CheckOutcome::Rejected { offset, end_of_input } => (false, Some(offset), end_of_input),
    };
    if json {
        print_json(&json!({"accepted": accepted, "offset": offset, "end_of_input": eoi}))?;
    } else if accepted {
        println!("accepted");
    } else if eoi {
        println!("rejected at offset {}: unexpected end of input", offset.unwrap());
    } else {
        println!("rejected at offset {}", offset.unwrap());
    }
    Ok(if accepted { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_mask(json: bool, bundle: &Path, vocab: &str, prefix: Option<&str>, tokens: &[TokenId]) -> Result<ExitCode> {
    let mut m = load_matcher(bundle, vocab)?;
    if let Some(text) = prefix {
        if !m.accept_bytes(text.as_bytes()) {
            eprintln!("prefix rejected");
            return Ok(ExitCode::from(1));
        }
    }
    for &id in tokens {
        if !m.accept_token(id) {
            eprintln!("token {id} rejected");
            return Ok(ExitCode::from(1));
        }
    }
    let mut mask = m.new_mask();
    m.fill_next_token_mask(&mut mask);
    if json {
        print_json(&json!({"vocab_size": mask.size(), "allowed": mask.count(), "hex": mask.to_hex()}))?;
    } else {
        println!("{}", mask.to_hex());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(json: bool, bundle: &Path, vocab: &str, opts: GenerateOptions) -> Result<ExitCode> {
    let mut m = load_matcher(bundle, vocab)?;
    let out = generate(&mut m, opts);
    let valid = out.finished && oracle_accepts(m.grammar().pda(), &out.text)?;
    if json {
        print_json(&json!({
            "text": String::from_utf8_lossy(&out.text),
            "tokens": out.tokens,
            "finished": out.finished,
            "valid": valid,
        }))?;
    } else {
        println!("{}", String::from_utf8_lossy(&out.text));
    }
    if !out.finished {
        eprintln!("no end of sequence within {} tokens", opts.max_tokens);
        return Ok(ExitCode::from(1));
    }
    if !valid {
        eprintln!("output rejected by the grammar");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(json: bool, a: &BenchArgs) -> Result<ExitCode> {
    let g = match &a.grammar {
        Some(path) => load_grammar(path)?,
        None => parse_grammar(JSON_GRAMMAR)?,
    };
    let v = Arc::new(load_vocab(&a.vocab)?);
    let full = Arc::new(grammask::compile(&g, &v, CompileOptions::default())?);
    let trace_opts = GenerateOptions { soft_budget: 40, max_tokens: 256, ..Default::default() };
    let traces = record_traces(&full, &v, a.traces, a.seed, trace_opts)?;
    let (configs, bundle) = if a.single || a.toggles.any_off() {
        let (r, cg) = config_report("custom", &g, &v, a.toggles.options(), &traces, a.warmup, a.iterations)?;
        (vec![r], cg)
    } else {
        (run_ablation(&g, &v, &traces, a.warmup, a.iterations, a.rounds)?, full)
    };
    let overlap = a.overlap.then(|| match a.forward_us {
        Some(us) => run_overlap_fixed(&bundle, &v, Duration::from_micros(us), a.overlap_steps, a.seed),
        None => run_overlap(&bundle, &v, a.forward_factor, a.overlap_steps, a.seed),
    });
    let report = BenchReport { vocab_size: v.size(), warmup: a.warmup, iterations: a.iterations, configs, overlap };
    if json {
        print_json(&serde_json::to_value(&report)?)?;
        return Ok(ExitCode::SUCCESS);
    }
    println!(
        "{:<10} {:>11} {:>11} {:>11} {:>9} {:>10} {:>10}",
        "config", "mean us", "median us", "p99 us", "prep ms", "cache B", "dependent"
    );
    for r in &report.configs {
        println!(
            "{:<10} {:>11.2} {:>11.2} {:>11.2} {:>9.1} {:>10} {:>10}",
            r.name,
            r.mask_latency.mean_us,
            r.mask_latency.median_us,
            r.mask_latency.p99_us,
            r.preprocess_ms,
            r.cache_bytes,
            r.dependent_total
        );
    }
    if let Some(o) = &report.overlap {
        println!(
            "overlap: mask {:.1}us, forward {:.1}us, TPOT {:.1}us sequential, {:.1}us overlapped ({:.3})",
            o.mask_mean_us, o.forward_us, o.sequential_tpot_us, o.overlapped_tpot_us, o.ratio
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_pda_dump(grammar: &Path, dot: bool, t: Toggles) -> Result<ExitCode> {
    let p = optimize_pda(build_pda(&load_grammar(grammar)?), t.options());
    print!("{}", if dot { to_dot(&p) } else { to_text(&p) });
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let json = cli.json;
    match cli.command {
        Command::Compile { grammar, vocab, output, stats, toggles } => {
            cmd_compile(json, &grammar, &vocab, &output, stats, toggles)
        }
        Command::Check { grammar, input } => cmd_check(json, &grammar, &input),
        Command::Mask { bundle, vocab, prefix, tokens } => cmd_mask(json, &bundle, &vocab, prefix.as_deref(), &tokens),
        Command::Gen { bundle, vocab, seed, max_tokens, soft_budget } => {
            cmd_gen(json, &bundle, &vocab, GenerateOptions { seed, soft_budget, max_tokens })
        }
        Command::Bench(args) => cmd_bench(json, &args),
        Command::Schema { command: SchemaCommand::Compile { schema, strict_ws } } => {
            print!("{}", schema_to_grammar_text(&read_text(&schema)?, strict_ws)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Pda { command: PdaCommand::Dump { grammar, dot, toggles } } => cmd_pda_dump(&grammar, dot, toggles),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
