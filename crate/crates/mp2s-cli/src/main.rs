//! Command-line front end: build or load automata, generate instances,
//! simulate runs with traces, sweep automata against the disjointness
//! oracle, search for fooling pairs, and evaluate the trade-off
//! inequalities.
//!
//! Exit codes: 0 = success / accepted / verified; 1 = informative
//! negative (rejected input, mismatch, witness found); 2 = usage or
//! input error; 3 = runtime error (stall, undefined transition).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mp2s::builders::{build_crippled, build_sqrt, build_trivial};
use mp2s::disjointness::{
    all_index_sets, all_streams, build_instance, is_disjoint_oracle, random_stream, IndexSet,
    LayoutSpec,
};
use mp2s::engine::run;
use mp2s::foolbox::{
    fooling_search, lower_bound_inequality, remark_consistency, BoundMode, Enumeration,
    SearchLayout,
};
use mp2s::model::{table, Automaton, Stream};

#[derive(Parser)]
#[command(name = "mp2s", version, about = "Simulation and verification toolkit for mp2s-automata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an automaton on a pair of stream files
    Simulate(SimulateArgs),
    /// Decide disjointness of two stream files with the reference oracle
    Oracle(OracleArgs),
    /// Generate a subset-family instance as a pair of stream files
    GenInstance(GenInstanceArgs),
    /// Sweep an automaton against the oracle, exhaustively or sampled
    Exhaustive(ExhaustiveArgs),
    /// Search for a fooling pair that makes the automaton falsely accept
    Fool(FoolArgs),
    /// Evaluate the head/memory trade-off inequality
    Bounds(BoundsArgs),
    /// Check the closed-form sufficient condition at sampled sizes
    Remarks(RemarksArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// builtin:trivial:<n> | builtin:sqrt:<n> | builtin:crippled:<n>:<mask> | file:<path>
    #[arg(long)]
    automaton: String,
    /// S stream file (whitespace-separated a<i>/b<i> tokens)
    #[arg(long)]
    s: PathBuf,
    /// T stream file
    #[arg(long)]
    t: PathBuf,
    /// Write the step-by-step trace as JSON lines
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    s: PathBuf,
    #[arg(long)]
    t: PathBuf,
}

#[derive(Args)]
struct GenInstanceArgs {
    #[arg(long)]
    n: u32,
    /// Index set: comma-separated members ("1,3") or a position mask ("1010")
    #[arg(long)]
    i1: String,
    #[arg(long)]
    i2: String,
    /// reversed | pi:<v1>
    #[arg(long, default_value = "reversed")]
    layout: String,
    #[arg(long)]
    out_s: PathBuf,
    #[arg(long)]
    out_t: PathBuf,
}

#[derive(Args)]
struct ExhaustiveArgs {
    #[arg(long)]
    automaton: String,
    #[arg(long)]
    n: u32,
    /// streams (all length-n pairs over D_n) | instances (all subset-family pairs)
    #[arg(long, default_value = "instances")]
    space: String,
    /// reversed | pi:<v1>; instances space only
    #[arg(long, default_value = "reversed")]
    layout: String,
    /// Sample random stream pairs instead of exhausting: <count>:<seed>
    #[arg(long)]
    sample: Option<String>,
    /// Write the JSON report here (also printed without this flag)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FoolArgs {
    #[arg(long)]
    automaton: String,
    #[arg(long)]
    n: u32,
    /// reversed | pi (block counts derive from the automaton's heads)
    #[arg(long, default_value = "reversed")]
    layout: String,
    /// exhaustive | sample:<count>:<seed>
    #[arg(long = "enum", default_value = "exhaustive")]
    enumeration: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// forward | general
    #[arg(long)]
    mode: String,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    kf: u32,
    #[arg(long, default_value_t = 0)]
    kb: u32,
    /// lg m: the state budget in bits
    #[arg(long)]
    log2m: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RemarksArgs {
    /// Sampled points as n:kf pairs, e.g. "1048576:1,1048576:2"
    #[arg(long, default_value = "1048576:1,1048576:2")]
    samples: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    /// bad flags, unreadable files, malformed inputs -> exit 2
    Input(String),
    /// simulation failures such as stalls -> exit 3
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

impl From<mp2s::engine::EngineError> for CliError {
    fn from(e: mp2s::engine::EngineError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<mp2s::foolbox::FoolboxError> for CliError {
    fn from(e: mp2s::foolbox::FoolboxError) -> Self {
        match e {
            mp2s::foolbox::FoolboxError::Engine(inner) => CliError::Runtime(inner.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Outcomes map to exit codes: Ok(true) = 0, Ok(false) = 1.
type CmdResult = Result<bool, CliError>;

fn parse_automaton(spec: &str) -> Result<Automaton, CliError> {
    if let Some(path) = spec.strip_prefix("file:") {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
        return table::load(&text).map_err(input_err);
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["builtin", "trivial", n] => {
            let n = n.parse().map_err(input_err)?;
            build_trivial(n).map_err(input_err)
        }
        ["builtin", "sqrt", n] => {
            let n = n.parse().map_err(input_err)?;
            build_sqrt(n).map_err(input_err)
        }
        ["builtin", "crippled", n, mask] => {
            let n: u32 = n.parse().map_err(input_err)?;
            let remembered = IndexSet::parse_mask(n, mask).map_err(CliError::Input)?;
            build_crippled(n, &remembered).map_err(input_err)
        }
        _ => Err(CliError::Input(format!(
            "unrecognized automaton spec {spec:?}; expected builtin:trivial:<n>, builtin:sqrt:<n>, builtin:crippled:<n>:<mask>, or file:<path>"
        ))),
    }
}

fn read_stream(path: &Path) -> Result<Stream, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Stream::parse(&text).map_err(CliError::Input)
}

fn parse_layout_spec(text: &str, n: u32) -> Result<LayoutSpec, CliError> {
    if text == "reversed" {
        return Ok(LayoutSpec::Reversed);
    }
    if let Some(v1) = text.strip_prefix("pi:") {
        let v1: u32 = v1.parse().map_err(input_err)?;
        if v1 == 0 || !n.is_multiple_of(v1) {
            return Err(CliError::Input(format!("pi layout needs v1 dividing n, got v1={v1} n={n}")));
        }
        return Ok(LayoutSpec::Pi { v1 });
    }
    Err(CliError::Input(format!("unrecognized layout {text:?}; expected reversed or pi:<v1>")))
}

fn parse_count_seed(text: &str) -> Result<(u64, u64), CliError> {
    let (count, seed) = text
        .split_once(':')
        .ok_or_else(|| CliError::Input(format!("expected <count>:<seed>, got {text:?}")))?;
    Ok((count.parse().map_err(input_err)?, seed.parse().map_err(input_err)?))
}

fn emit_report(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(input_err)?;
    match out {
        Some(path) => fs::write(path, text + "\n")
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let a = parse_automaton(&args.automaton)?;
    let s = read_stream(&args.s)?;
    let t = read_stream(&args.t)?;
    let result = run(&a, &s, &t, args.trace.is_some())?;
    if let Some(path) = &args.trace {
        let trace = result.trace.as_ref().expect("trace was requested");
        fs::write(path, trace.to_jsonl_string())
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    println!("{}", if result.accepted { "accepted" } else { "rejected" });
    eprintln!("steps={} final={}", result.steps, result.final_config.state.name);
    Ok(result.accepted)
}

fn cmd_oracle(args: &OracleArgs) -> CmdResult {
    let s = read_stream(&args.s)?;
    let t = read_stream(&args.t)?;
    let disjoint = is_disjoint_oracle(&s, &t);
    println!("{}", if disjoint { "disjoint" } else { "not disjoint" });
    Ok(disjoint)
}

fn cmd_gen_instance(args: &GenInstanceArgs) -> CmdResult {
    let i1 = IndexSet::parse(args.n, &args.i1).map_err(CliError::Input)?;
    let i2 = IndexSet::parse(args.n, &args.i2).map_err(CliError::Input)?;
    let layout = parse_layout_spec(&args.layout, args.n)?;
    let inst = build_instance(i1, i2, layout).map_err(input_err)?;
    fs::write(&args.out_s, inst.s.to_text() + "\n")
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out_s.display())))?;
    fs::write(&args.out_t, inst.t.to_text() + "\n")
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out_t.display())))?;
    println!(
        "wrote D({i1}, {i2}) layout={} to {} and {}",
        inst.layout,
        args.out_s.display(),
        args.out_t.display()
    );
    Ok(true)
}

fn cmd_exhaustive(args: &ExhaustiveArgs) -> CmdResult {
    let a = parse_automaton(&args.automaton)?;
    let n = args.n;
    let mut checked = 0u64;
    let mut mismatches: Vec<serde_json::Value> = Vec::new();

    let mut consider = |s: &Stream, t: &Stream| -> Result<(), CliError> {
        let accepted = run(&a, s, t, false)?.accepted;
        let disjoint = is_disjoint_oracle(s, t);
        checked += 1;
        if accepted != disjoint && mismatches.len() < 16 {
            mismatches.push(serde_json::json!({
                "s": s.to_text(), "t": t.to_text(), "accepted": accepted, "disjoint": disjoint,
            }));
        }
        Ok(())
    };

    let space = if let Some(sample) = &args.sample {
        let (count, seed) = parse_count_seed(sample)?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        for _ in 0..count {
            let s = random_stream(&mut rng, n, n);
            let t = random_stream(&mut rng, n, n);
            consider(&s, &t)?;
        }
        format!("sample:{count}:{seed}")
    } else {
        match args.space.as_str() {
            "streams" => {
                if n > 3 {
                    return Err(CliError::Input(format!(
                        "exhaustive stream sweep capped at n = 3 ({} pairs at n = {n}); use --sample",
                        "(2n)^(2n)"
                    )));
                }
                let streams: Vec<Stream> = all_streams(n, n).collect();
                for s in &streams {
                    for t in &streams {
                        consider(s, t)?;
                    }
                }
                "streams".to_string()
            }
            "instances" => {
                if n > 10 {
                    return Err(CliError::Input(
                        "exhaustive instance sweep capped at n = 10; use --sample".to_string(),
                    ));
                }
                let layout = parse_layout_spec(&args.layout, n)?;
                for i1 in all_index_sets(n) {
                    for i2 in all_index_sets(n) {
                        let inst = build_instance(i1, i2, layout).map_err(input_err)?;
                        consider(&inst.s, &inst.t)?;
                    }
                }
                format!("instances:{}", args.layout)
            }
            other => {
                return Err(CliError::Input(format!(
                    "unrecognized space {other:?}; expected streams or instances"
                )))
            }
        }
    };

    let pass = mismatches.is_empty();
    let report = serde_json::json!({
        "automaton": args.automaton,
        "n": n,
        "space": space,
        "checked": checked,
        "mismatches": mismatches,
        "pass": pass,
    });
    println!(
        "{}: {checked} inputs checked, {} mismatches",
        if pass { "agreement" } else { "MISMATCH" },
        report["mismatches"].as_array().unwrap().len()
    );
    if args.out.is_some() {
        emit_report(&args.out, &report)?;
    } else if !pass {
        emit_report(&None, &report)?;
    }
    Ok(pass)
}

fn cmd_fool(args: &FoolArgs) -> CmdResult {
    let a = parse_automaton(&args.automaton)?;
    let layout = match args.layout.as_str() {
        "reversed" => SearchLayout::Reversed,
        "pi" => SearchLayout::Pi,
        other => {
            return Err(CliError::Input(format!(
                "unrecognized layout {other:?}; expected reversed or pi"
            )))
        }
    };
    let enumeration = if args.enumeration == "exhaustive" {
        Enumeration::Exhaustive
    } else if let Some(rest) = args.enumeration.strip_prefix("sample:") {
        let (count, seed) = parse_count_seed(rest)?;
        Enumeration::Sample { count, seed }
    } else {
        return Err(CliError::Input(format!(
            "unrecognized enumeration {:?}; expected exhaustive or sample:<count>:<seed>",
            args.enumeration
        )));
    };

    let report = fooling_search(&a, args.n, layout, enumeration)?;
    match &report.witness {
        Some(w) => println!(
            "witness found: I={} Iprime={} bhat={} spliced run accepts a non-disjoint instance (splice checks pass: {})",
            w.i.to_mask_string(),
            w.iprime.to_mask_string(),
            report.partition.label(w.bhat),
            w.splice.all_pass(),
        ),
        None => {
            if report.stats.vacuous {
                println!(
                    "no witness: {}",
                    report.stats.reason.as_deref().unwrap_or("no buckets formed")
                );
            } else {
                println!(
                    "no witness: {} buckets, largest {}, {} splice simulations all rejected",
                    report.stats.buckets, report.stats.max_bucket, report.stats.splice_simulations
                );
            }
        }
    }
    emit_report(&args.out, &report.to_json())?;
    Ok(report.witness.is_none())
}

fn cmd_bounds(args: &BoundsArgs) -> CmdResult {
    let mode = match args.mode.as_str() {
        "forward" => BoundMode::Forward,
        "general" => BoundMode::General,
        other => {
            return Err(CliError::Input(format!(
                "unrecognized mode {other:?}; expected forward or general"
            )))
        }
    };
    let report = lower_bound_inequality(args.n, args.log2m, args.kf, args.kb, mode)?;
    println!("ruledOut={} margin≈{:.2}", report.ruled_out, report.margin);
    emit_report(&args.out, &serde_json::to_value(&report).map_err(input_err)?)?;
    Ok(true)
}

fn cmd_remarks(args: &RemarksArgs) -> CmdResult {
    let mut samples = Vec::new();
    for part in args.samples.split(',') {
        let (n, kf) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| CliError::Input(format!("expected n:kf, got {part:?}")))?;
        samples.push((n.parse().map_err(input_err)?, kf.parse().map_err(input_err)?));
    }
    let report = remark_consistency(&samples)?;
    let mut all_good = true;
    for e in &report.entries {
        println!(
            "n={} kf={}: condition_met={} lg_m_max={:.1} ruledOut={}",
            e.n, e.kf, e.condition_met, e.m_log2_max, e.ruled_out
        );
        if e.condition_met && !e.ruled_out {
            all_good = false;
        }
    }
    for s in &report.smallest {
        match s.smallest_n {
            Some(n) => println!("kf={}: holds from n={} (powers of two)", s.kf, n),
            None => println!("kf={}: no n up to 2^26 satisfies the closed form", s.kf),
        }
    }
    emit_report(&args.out, &serde_json::to_value(&report).map_err(input_err)?)?;
    Ok(all_good)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::GenInstance(args) => cmd_gen_instance(args),
        Command::Exhaustive(args) => cmd_exhaustive(args),
        Command::Fool(args) => cmd_fool(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Remarks(args) => cmd_remarks(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
