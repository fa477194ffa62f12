//! `bmap`: run recovery sweeps, oracle self-checks and single traced trials.

use std::path::PathBuf;
use std::process::ExitCode;

use bmap_core::ensembles::{MatrixEnsemble, NonzeroDistribution, SignalModel};
use bmap_core::harness::verify::oracle_suites;
use bmap_core::harness::{build_trial, emit_results, run_sweep, AlgorithmSpec, Format, PriorMode, SweepResult, SweepSpec};
use bmap_core::solvers::{solve, Algorithm};
use bmap_core::{exact_recovery, Error};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bmap", version, about = "Greedy sparse support recovery with a bit-wise MAP proxy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep described by a TOML config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Comma-separated list of csv, json, svg.
        #[arg(long, default_value = "csv,json,svg")]
        format: String,
    },
    /// Run the oracle identity suites; exits 3 if any check fails.
    Verify {
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
    },
    /// Run one trial and print the per-iteration trace.
    Single {
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        alg: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "gaussian")]
        ensemble: String,
        #[arg(long, value_enum, default_value_t = SignalArg::Binary)]
        signal: SignalArg,
        /// Noise level in dB; omit for noise-free measurements.
        #[arg(long)]
        snr_db: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalArg {
    /// Every nonzero equals 1.
    Binary,
    /// Nonzeros drawn from Unif[0.5, 1.5].
    Uniform,
}

enum Failure {
    Config(String),
    Runtime(String),
    Acceptance,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Sweep {
            config,
            out,
            threads,
            format,
        } => sweep(config, out, threads, &format),
        Command::Verify { seed } => verify(seed),
        Command::Single {
            n,
            m,
            k,
            alg,
            seed,
            ensemble,
            signal,
            snr_db,
        } => single(n, m, k, &alg, seed, &ensemble, signal, snr_db),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance) => ExitCode::from(3),
    }
}

fn sweep(config: PathBuf, out: PathBuf, threads: Option<usize>, format: &str) -> Result<(), Failure> {
    let formats = Format::parse_list(format)?;
    if threads == Some(0) {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }
    let spec = SweepSpec::load(&config)?;
    let result = run_sweep(&spec, threads)?;
    std::fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    for f in formats {
        let path = out.join(format!("{stem}.{}", f.extension()));
        emit_results(&result, f, &path)?;
        println!("wrote {}", path.display());
    }
    print_table(&result);
    Ok(())
}

fn print_table(result: &SweepResult) {
    let labels = result.labels();
    print!("{:>5}", "K");
    for l in &labels {
        print!(" {l:>12}");
    }
    println!();
    for &k in &result.spec.k_values {
        print!("{k:>5}");
        for l in &labels {
            print!(" {:>12.3}", result.recon_prob(l, k).unwrap_or(f64::NAN));
        }
        println!();
    }
    println!("{} trials per cell, {:.2}s", result.spec.trials, result.wall_clock);
}

fn verify(seed: u64) -> Result<(), Failure> {
    let outcomes = oracle_suites(seed)?;
    for o in &outcomes {
        println!("{o}");
    }
    if outcomes.iter().all(|o| o.passed) {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

#[allow(clippy::too_many_arguments)]
fn single(
    n: usize,
    m: usize,
    k: usize,
    alg: &str,
    seed: u64,
    ensemble: &str,
    signal: SignalArg,
    snr_db: Option<f64>,
) -> Result<(), Failure> {
    let algorithm = Algorithm::from_name(alg).ok_or_else(|| Failure::Config(format!("unknown algorithm {alg:?}")))?;
    let ensemble =
        MatrixEnsemble::from_name(ensemble).ok_or_else(|| Failure::Config(format!("unknown ensemble {ensemble:?}")))?;
    let signal = match signal {
        SignalArg::Binary => SignalModel::binary(),
        SignalArg::Uniform => SignalModel::one_sided(NonzeroDistribution::Uniform { lo: 0.5, hi: 1.5 }, 1e-3)?,
    };
    let spec = SweepSpec {
        n,
        m,
        k_values: vec![k],
        ensemble,
        signal,
        snr_db,
        algorithms: vec![AlgorithmSpec::new(algorithm)],
        trials: 1,
        base_seed: seed,
        prior_mode: PriorMode::Uniform,
    };
    spec.validate()?;
    let inst = build_trial(&spec, k, 0)?;
    let alg_spec = &spec.algorithms[0];
    let problem = inst.problem_for(alg_spec)?;
    let cfg = alg_spec.resolve(k, &spec.signal).with_trace();
    println!(
        "{algorithm}: N={n} M={m} K={k} {ensemble} {} sigma2={:.3e} seed={seed}",
        spec.signal.label(),
        inst.sigma2
    );
    println!(
        "config: residual={:?} two_sided={} L={} max_iters={}",
        cfg.residual_mode, cfg.two_sided, cfg.selection_size, cfg.max_iters
    );
    let out = solve(&problem, &spec.signal, &cfg)?;
    for rec in &out.trace {
        let chosen = rec.chosen.map_or(String::new(), |c| format!(" chose {c:>4}"));
        println!(
            "iter {:>3}{chosen}  |r| = {:.6e}  support {:?}",
            rec.iter,
            rec.residual_norm(),
            rec.support
        );
    }
    println!("estimate {:?}", out.estimate.sorted());
    println!("truth    {:?}", inst.truth.support());
    println!("exact recovery: {}", exact_recovery(&out.estimate, &inst.truth));
    Ok(())
}
