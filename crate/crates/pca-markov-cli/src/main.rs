//! Command-line front end: load transition matrices from JSON, run the
//! criterion battery, exact small-cycle oracles, Monte Carlo simulation, and
//! the instance generators, and report in text or JSON.
//!
//! Exit codes separate plumbing from mathematics: 0 means the computation
//! completed (whatever the verdict), 2 is an input or usage error, 3 a
//! resource limit, 4 a numerical failure. Verdicts are data in the report,
//! never exit codes, so pipelines can branch on the JSON.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pca_markov::oracle::{
    cmc_distribution, decode_config, exact_hz_distribution, exact_stationary, hzcmc_joint, is_cmc,
    is_hzcmc,
};
use pca_markov::report::{analyze_full, ConditionReport, Verdict};
use pca_markov::sim::{pair_stats, pattern_stats, simulate, InitialCondition, DEFAULT_BLOCK_ROWS};
use pca_markov::types::{
    Error, ProbVector, StochasticKernel, TransitionMatrix, EPS_COND, EPS_EIG, EPS_ORACLE,
};

#[derive(Parser)]
#[command(
    name = "pca-markov",
    version,
    about = "Invariant Markov laws of probabilistic cellular automata on the line and the cycle"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full criterion battery on a transition-matrix file
    Analyze {
        /// Transition matrix JSON file: {"kappa": k, "t": [[[...]]]}
        path: PathBuf,
        /// Cycle length for the cyclic checks (default: cover every length)
        #[arg(long)]
        n: Option<usize>,
        /// Tolerance for the algebraic conditions
        #[arg(long, default_value_t = EPS_COND)]
        eps_cond: f64,
        /// Tolerance for the eigensolver residuals
        #[arg(long, default_value_t = EPS_EIG)]
        eps_eig: f64,
        /// Emit the report as JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Exact stationary law on a small cycle, with structure tests
    Oracle {
        path: PathBuf,
        /// Cycle length
        #[arg(long)]
        n: usize,
        /// Which structure to test: a single row (h) or two interleaved rows (hz)
        #[arg(long, value_enum)]
        structure: Structure,
        /// Tolerance for the oracle fits
        #[arg(long, default_value_t = EPS_ORACLE)]
        eps_oracle: f64,
        /// Emit the report as JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo simulation on a cylinder, with pattern statistics
    Simulate {
        path: PathBuf,
        /// Cylinder width (cells per row)
        #[arg(long)]
        width: usize,
        /// Number of synchronous update steps
        #[arg(long)]
        steps: usize,
        /// RNG seed; the diagram is a pure function of (rule, width, steps, seed)
        #[arg(long)]
        seed: u64,
        /// Rows to discard before collecting statistics
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        /// Window length for pattern frequencies (2 adds batch-means error bars)
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Write the space-time diagram to this file
        #[arg(long)]
        out: Option<PathBuf>,
        /// Diagram file format
        #[arg(long, value_enum, default_value_t = DiagramFormat::Text)]
        format: DiagramFormat,
        /// Emit the statistics as JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Generate a seeded instance from one of the constructive families
    Generate {
        /// Alphabet size parameter: cells take values 0..=kappa
        #[arg(long, default_value_t = 1)]
        kappa: usize,
        /// Instance family
        #[arg(long, value_enum)]
        mode: GenMode,
        /// Generator seed; the output is a pure function of (kappa, mode, seed)
        #[arg(long)]
        seed: u64,
        /// Write the transition matrix here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Structure {
    /// Single-row law on the cycle
    H,
    /// Two-row zigzag law on the cycle
    Hz,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DiagramFormat {
    Text,
    Binary,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenMode {
    /// Commuting kernel pair: invariant on every structure
    Commuting,
    /// Single-site factorization holds; commutation generically fails
    Cond3,
    /// Symmetric rule: invariance reduces to a single-letter test
    Symmetric,
    /// Binary family with a product invariant law on the line only
    Kappa1Case2,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::BudgetExceeded { .. } => 3,
            Error::NoConvergence { .. } | Error::NotPrimitive { .. } | Error::SingularNormalization => 4,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Analyze {
            path,
            n,
            eps_cond,
            eps_eig,
            json,
        } => cmd_analyze(&path, n, eps_cond, eps_eig, json),
        Cmd::Oracle {
            path,
            n,
            structure,
            eps_oracle,
            json,
        } => cmd_oracle(&path, n, structure, eps_oracle, json),
        Cmd::Simulate {
            path,
            width,
            steps,
            seed,
            burn_in,
            k,
            out,
            format,
            json,
        } => cmd_simulate(&path, width, steps, seed, burn_in, k, out.as_deref(), format, json),
        Cmd::Generate {
            kappa,
            mode,
            seed,
            out,
        } => cmd_generate(kappa, mode, seed, out.as_deref()),
    }
}

fn load_tm(path: &std::path::Path) -> Result<TransitionMatrix, Failure> {
    let text = std::fs::read_to_string(path)?;
    Ok(TransitionMatrix::from_json(&text)?)
}

/// Shortest round-trip decimal, same value the JSON encoder writes.
fn fv(x: f64) -> String {
    format!("{x}")
}

/// Shortest round-trip scientific notation, for residual-sized numbers.
fn fe(x: f64) -> String {
    format!("{x:e}")
}

fn fvec(v: &[f64]) -> String {
    let body: Vec<String> = v.iter().map(|x| fv(*x)).collect();
    format!("[{}]", body.join(", "))
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::MarkovProven => "MARKOV_PROVEN",
        Verdict::NotMarkovProven => "NOT_MARKOV_PROVEN",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn kernel_lines(out: &mut String, name: &str, rows: &[Vec<f64>]) {
    for (a, row) in rows.iter().enumerate() {
        let _ = writeln!(out, "  {name}[{a}]: {}", fvec(row));
    }
}

fn render_report(r: &ConditionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema version: {}", r.schema_version);
    let _ = writeln!(out, "kappa: {}", r.kappa);
    match r.cycle_length {
        Some(n) => {
            let _ = writeln!(out, "cycle length: {n}");
        }
        None => {
            let _ = writeln!(out, "cycle length: unconstrained (checks cover every length)");
        }
    }
    let _ = writeln!(
        out,
        "tolerances: eps_cond = {}, eps_eig = {}",
        fe(r.eps_cond),
        fe(r.eps_eig)
    );
    let _ = writeln!(out, "positive rate: {}", r.positive_rate);
    let _ = writeln!(out, "selected slices positive: {}", r.cond_tauxg);

    if let Some(g) = &r.gibbs_single {
        let _ = writeln!(
            out,
            "single-site factorization: {}, residual {}",
            pass_str(g.pass),
            fe(g.residual)
        );
        if let Some(w) = &g.witness {
            let _ = writeln!(out, "  worst triple: ({}, {}, {})", w[0], w[1], w[2]);
        }
    }
    if let Some(g) = &r.gibbs_general {
        let _ = writeln!(
            out,
            "general factorization: {}, residual {}",
            pass_str(g.pass),
            fe(g.residual)
        );
    }
    if let Some(s) = &r.spectral {
        let _ = writeln!(out, "spectral data:");
        let _ = writeln!(out, "  lambda: {}", fv(s.lambda));
        let _ = writeln!(out, "  nu: {}", fvec(&s.nu));
        let _ = writeln!(out, "  gamma: {}", fvec(&s.gamma));
        let _ = writeln!(out, "  mu: {}", fvec(&s.mu));
    }
    if let Some(k) = &r.kernels {
        let _ = writeln!(out, "candidate kernels:");
        kernel_lines(&mut out, "d", &k.d);
        kernel_lines(&mut out, "u", &k.u);
        let _ = writeln!(out, "  rho: {}", fvec(&k.rho));
        let _ = writeln!(out, "  commutator norm: {}", fe(k.commutator_norm));
    }
    if let Some(d) = &r.diag_powers {
        let _ = writeln!(
            out,
            "diagonal powers up to k = {}: {}, worst residual {} at k = {}",
            d.max_k,
            pass_str(d.pass),
            fe(d.residual),
            d.worst_k
        );
    }
    let _ = writeln!(out, "verdicts:");
    let _ = writeln!(out, "  zigzag:        {}", verdict_str(r.verdict_zigzag));
    let _ = writeln!(out, "  cyclic zigzag: {}", verdict_str(r.verdict_cyclic_zigzag));
    let _ = writeln!(out, "  line:          {}", verdict_str(r.verdict_line));
    let _ = writeln!(out, "  cycle:         {}", verdict_str(r.verdict_cycle));
    if let Some(k1) = &r.kappa1 {
        let _ = writeln!(out, "binary classification:");
        let _ = writeln!(
            out,
            "  four-corner identity: {}, residual {}",
            pass_str(k1.four_corner),
            fe(k1.four_corner_residual)
        );
        let _ = writeln!(
            out,
            "  linear relation (a): {}, residual {}",
            pass_str(k1.linear_a),
            fe(k1.linear_a_residual)
        );
        let _ = writeln!(
            out,
            "  linear relation (b): {}, residual {}",
            pass_str(k1.linear_b),
            fe(k1.linear_b_residual)
        );
        let _ = writeln!(out, "  invariant markov law exists: {}", k1.markov_invariant_exists);
        if let Some(rho0) = k1.rho0 {
            let _ = writeln!(out, "  rho0: {}", fv(rho0));
        }
        if let Some(m) = &k1.m {
            kernel_lines(&mut out, "m", m);
        }
        if let Some((r1, r2)) = k1.witness_relations {
            let _ = writeln!(out, "  witness relations: ({}, {})", fe(r1), fe(r2));
        }
    }
    if !r.notes.is_empty() {
        let _ = writeln!(out, "notes:");
        for note in &r.notes {
            let _ = writeln!(out, "  - {note}");
        }
    }
    out
}

fn cmd_analyze(
    path: &std::path::Path,
    n: Option<usize>,
    eps_cond: f64,
    eps_eig: f64,
    json: bool,
) -> Result<(), Failure> {
    let tm = load_tm(path)?;
    let report = analyze_full(&tm, n, eps_cond, eps_eig);
    if json {
        // ConditionReport holds only finite floats and string keys
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", render_report(&report));
    }
    Ok(())
}

fn kernel_rows(k: &StochasticKernel) -> Vec<Vec<f64>> {
    (0..k.size()).map(|a| k.row(a).to_vec()).collect()
}

/// A stochastic matrix has rank one exactly when all rows coincide.
fn rows_coincide(k: &StochasticKernel, eps: f64) -> bool {
    let s = k.size();
    (1..s).all(|a| (0..s).all(|b| (k.get(a, b) - k.get(0, b)).abs() <= eps))
}

fn cmd_oracle(
    path: &std::path::Path,
    n: usize,
    structure: Structure,
    eps_oracle: f64,
    json: bool,
) -> Result<(), Failure> {
    let tm = load_tm(path)?;
    match structure {
        Structure::H => {
            let pi = exact_stationary(&tm, n)?;
            let shift = pi.shift_residual();
            let marginal = pi.site_marginal();
            let (yes, fit) = is_cmc(&pi, eps_oracle)?;
            let mut recon = None;
            if let Some(m) = &fit {
                let back = cmc_distribution(m, n)?;
                let worst = pi
                    .p
                    .iter()
                    .zip(&back.p)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0_f64, f64::max);
                recon = Some(worst);
            }
            if json {
                let doc = serde_json::json!({
                    "schema_version": 1,
                    "structure": "h",
                    "n": n,
                    "kappa": pi.kappa,
                    "states": pi.states,
                    "shift_residual": shift,
                    "site_marginal": marginal,
                    "cmc": yes,
                    "kernel": fit.as_ref().map(kernel_rows),
                    "rank_one": fit.as_ref().map(|m| rows_coincide(m, eps_oracle)),
                    "reconstruction_residual": recon,
                });
                println!("{}", serde_json::to_string_pretty(&doc).expect("doc serializes"));
            } else {
                println!("structure: cycle of length {n} (single row), kappa = {}", pi.kappa);
                println!("states: {}", pi.states);
                println!("shift residual: {}", fe(shift));
                println!("site marginal: {}", fvec(&marginal));
                println!("CMC: {}", if yes { "yes" } else { "no" });
                if let Some(m) = &fit {
                    let mut block = String::new();
                    kernel_lines(&mut block, "m", &kernel_rows(m));
                    print!("fitted kernel:\n{block}");
                    println!(
                        "rank-1 kernel (iid law): {}",
                        if rows_coincide(m, eps_oracle) { "yes" } else { "no" }
                    );
                }
                if let Some(r) = recon {
                    println!("reconstruction residual: {}", fe(r));
                }
            }
        }
        Structure::Hz => {
            let joint = exact_hz_distribution(&tm, n)?;
            let (yes, fit) = is_hzcmc(&joint, eps_oracle)?;
            let mut recon = None;
            if let Some((d, u)) = &fit {
                let back = hzcmc_joint(d, u, n)?;
                let worst = joint
                    .p
                    .iter()
                    .zip(&back.p)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0_f64, f64::max);
                recon = Some(worst);
            }
            if json {
                let doc = serde_json::json!({
                    "schema_version": 1,
                    "structure": "hz",
                    "n": n,
                    "kappa": joint.kappa,
                    "states_per_row": joint.states,
                    "hzcmc": yes,
                    "down_kernel": fit.as_ref().map(|(d, _)| kernel_rows(d)),
                    "up_kernel": fit.as_ref().map(|(_, u)| kernel_rows(u)),
                    "reconstruction_residual": recon,
                });
                println!("{}", serde_json::to_string_pretty(&doc).expect("doc serializes"));
            } else {
                println!(
                    "structure: cyclic zigzag of length {n} (two rows), kappa = {}",
                    joint.kappa
                );
                println!("states per row: {}", joint.states);
                println!("HZCMC: {}", if yes { "yes" } else { "no" });
                if let Some((d, u)) = &fit {
                    let mut block = String::new();
                    kernel_lines(&mut block, "d", &kernel_rows(d));
                    kernel_lines(&mut block, "u", &kernel_rows(u));
                    print!("fitted kernels:\n{block}");
                }
                if let Some(r) = recon {
                    println!("reconstruction residual: {}", fe(r));
                }
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &std::path::Path,
    width: usize,
    steps: usize,
    seed: u64,
    burn_in: usize,
    k: usize,
    out: Option<&std::path::Path>,
    format: DiagramFormat,
    json: bool,
) -> Result<(), Failure> {
    if k > width {
        return Err(Failure::usage(format!(
            "window length {k} exceeds the cylinder width {width}"
        )));
    }
    let tm = load_tm(path)?;
    let s = tm.kappa() + 1;
    let init = InitialCondition::Iid(ProbVector::uniform(s));
    let diagram = simulate(&tm, width, steps, seed, &init)?;

    if let Some(out_path) = out {
        match format {
            DiagramFormat::Text => std::fs::write(out_path, diagram.to_text())?,
            DiagramFormat::Binary => std::fs::write(out_path, diagram.to_binary())?,
        }
    }

    if k == 2 {
        let stats = pair_stats(&diagram, burn_in, DEFAULT_BLOCK_ROWS)?;
        let chunk = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(s).map(|c| c.to_vec()).collect() };
        if json {
            let doc = serde_json::json!({
                "schema_version": 1,
                "width": width,
                "steps": steps,
                "seed": seed,
                "burn_in": burn_in,
                "k": k,
                "blocks": stats.blocks,
                "block_rows": stats.block_rows,
                "freq": chunk(&stats.freq),
                "se": chunk(&stats.se),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("doc serializes"));
        } else {
            println!("width: {width}, steps: {steps}, seed: {seed}");
            println!("burn-in: {burn_in}, sampled rows: {}", steps - burn_in);
            println!("blocks: {} (rows per block: {})", stats.blocks, stats.block_rows);
            println!("pair frequencies (a b freq se):");
            for a in 0..s {
                for b in 0..s {
                    println!(
                        "  {a} {b} {} {}",
                        fv(stats.freq[a * s + b]),
                        fe(stats.se[a * s + b])
                    );
                }
            }
        }
    } else {
        let stats = pattern_stats(&diagram, k, burn_in)?;
        let patterns = stats.counts.len();
        if json {
            let entries: Vec<serde_json::Value> = (0..patterns)
                .map(|code| {
                    let cells = decode_config(code, k, s);
                    let freq = stats.freq(&cells);
                    serde_json::json!({ "cells": cells, "freq": freq })
                })
                .collect();
            let doc = serde_json::json!({
                "schema_version": 1,
                "width": width,
                "steps": steps,
                "seed": seed,
                "burn_in": burn_in,
                "k": k,
                "patterns": entries,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("doc serializes"));
        } else {
            println!("width: {width}, steps: {steps}, seed: {seed}");
            println!("burn-in: {burn_in}, sampled rows: {}", steps - burn_in);
            println!("pattern frequencies (window k = {k}):");
            for code in 0..patterns {
                let cells = decode_config(code, k, s);
                let label: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
                println!("  {}: {}", label.join(" "), fv(stats.freq(&cells)));
            }
        }
    }
    Ok(())
}

fn cmd_generate(
    kappa: usize,
    mode: GenMode,
    seed: u64,
    out: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let payload = match mode {
        GenMode::Commuting => {
            let (d, u) = pca_markov::gen::gen_commuting_pair(kappa, seed)?;
            let tm = pca_markov::hz::kernel_pair_to_tm(&d, &u)?;
            tm.to_json()
        }
        GenMode::Cond3 => pca_markov::gen::gen_cond3_tm(kappa, seed)?.to_json(),
        GenMode::Symmetric => pca_markov::gen::gen_symmetric_tm(kappa, seed)?.to_json(),
        GenMode::Kappa1Case2 => {
            if kappa != 1 {
                return Err(Failure::usage(format!(
                    "mode kappa1-case2 is a binary family; got --kappa {kappa}"
                )));
            }
            let (tm, rho) = pca_markov::gen::gen_kappa1_case2(seed)?;
            // validation ignores unknown keys, so the file can carry the
            // invariant product law alongside the tensor
            let mut doc = serde_json::to_value(tm.to_raw()).expect("tensor serializes");
            doc["rho"] = serde_json::json!(rho.as_slice());
            serde_json::to_string_pretty(&doc).expect("doc serializes")
        }
    };
    match out {
        Some(path) => std::fs::write(path, format!("{payload}\n"))?,
        None => println!("{payload}"),
    }
    Ok(())
}
