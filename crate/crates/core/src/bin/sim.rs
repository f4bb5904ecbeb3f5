use cdasim::report::{emit_report, validate_series_file};
use cdasim::scenario::{load_scenario, run, run_realtime, PRESET_NAMES};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sim", about = "Agent-based continuous double auction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its report artifacts.
    Run(RunArgs),
    /// Re-validate a previously exported price series.
    Validate(ValidateArgs),
    /// Rebuild exchange state from an event log and print a state digest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Preset name or scenario config file.
    #[arg(long, value_name = "PRESET|FILE")]
    scenario: String,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the event log and report.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Serve the wire protocol over TCP and pace agents against wall time.
    #[arg(long)]
    realtime: bool,
    /// Simulated seconds per wall second in realtime mode.
    #[arg(long, default_value_t = 60.0)]
    accel: f64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Price series CSV (`t,asset,p_mid`).
    #[arg(long, value_name = "FILE")]
    series: PathBuf,
    /// Output directory for verdicts and plots.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Event log to replay.
    #[arg(long, value_name = "FILE")]
    log: PathBuf,
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let mut config = load_scenario(&args.scenario).map_err(|e| {
        format!("{e} (presets: {})", PRESET_NAMES.join(", "))
    })?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let report = if args.realtime {
        let listen = std::env::var("SIM_LISTEN_ADDR")
            .unwrap_or_else(|_| "127.0.0.1:0".to_string());
        run_realtime(&config, &args.out, &listen, args.accel)
    } else {
        run(&config, &args.out)
    }
    .map_err(|e| e.to_string())?;
    let files = emit_report(&report, &args.out).map_err(|e| e.to_string())?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    let verdicts: Vec<String> = report
        .facts
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let v = if f.inconclusive() {
                "inconclusive"
            } else if f.all_pass() {
                "pass"
            } else {
                "fail"
            };
            format!("asset {k}: {v}")
        })
        .collect();
    println!(
        "done: {} events, {} trades, audit {}; facts: {}",
        report.last_seq,
        report.trade_count,
        if report.audit.is_clean() { "clean" } else { "VIOLATED" },
        verdicts.join("; ")
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), String> {
    let files = validate_series_file(&args.series, &args.out)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<(), String> {
    let events = std::fs::read_to_string(&args.log)
        .map_err(|e| e.to_string())?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count();
    let exchange = cdasim::exchange::replay_log_file(&args.log).map_err(|e| e.to_string())?;
    let audit = exchange.audit();
    let dump = exchange.state_dump();
    println!("replayed {events} events");
    println!("audit: {}", if audit.is_clean() { "clean" } else { "VIOLATED" });
    println!("state digest: {:016x}", fnv1a(dump.as_bytes()));
    Ok(())
}

/// FNV-1a; stable digest without pulling in a hash crate.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Replay(args) => cmd_replay(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
