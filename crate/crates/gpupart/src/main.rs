//! Command-line front end: taskset generation, single-taskset analysis,
//! experiment sweeps, and the oracle self-test.
//!
//! Exit codes: 0 success / schedulable, 2 not schedulable, 1 error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gpupart::gen::{generate_taskset, GenConfig};
use gpupart::harness::{run_sweep, SweepConfig, Variant};
use gpupart::model::TaskSet;
use gpupart::partitioner::{required_resources, Solution};
use gpupart::sched::oracle_equivalence_run;

#[derive(Parser)]
#[command(name = "gpupart", version, about = "GPU SM partitioning for real-time kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic taskset and write it as JSON.
    Generate(GenerateArgs),
    /// Analyze a taskset file with one heuristic.
    Analyze(AnalyzeArgs),
    /// Run a utilization sweep and write per-variant .dat tables.
    Sweep(SweepArgs),
    /// Cross-check the demand test against the EDF simulator on random
    /// instances.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of tasks.
    #[arg(long)]
    tasks: usize,
    /// Target total utilization.
    #[arg(long)]
    util: f64,
    /// Probability a task is memory-intensive.
    #[arg(long, default_value_t = 0.5)]
    prm: f64,
    /// Total SM count of the platform.
    #[arg(long)]
    sms: u32,
    /// RNG seed (the GPUPART_SEED env var takes precedence).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Taskset JSON file.
    input: PathBuf,
    /// 1g, sms, or bf.
    #[arg(long)]
    heuristic: String,
    /// act or ina (ignored for 1g).
    #[arg(long, default_value = "ina")]
    forbidden: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config JSON file; flags below override nothing when given.
    #[arg(long, conflicts_with_all = ["sms", "tasks"])]
    config: Option<PathBuf>,
    #[arg(long)]
    sms: Option<u32>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    prm: f64,
    #[arg(long, default_value_t = 2.0)]
    u_min: f64,
    #[arg(long, default_value_t = 60.0)]
    u_max: f64,
    #[arg(long, default_value_t = 2.0)]
    u_step: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Comma-separated variant list.
    #[arg(long, default_value = "1G,SMS_ACT,SMS_INA,BF_ACT,BF_INA")]
    variants: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (1 = sequential, for clean timing).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory for .dat tables and the JSON summary.
    #[arg(long, default_value = "sweep-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn effective_seed(flag: u64) -> u64 {
    match std::env::var("GPUPART_SEED") {
        Ok(v) => v.parse().unwrap_or_else(|_| {
            eprintln!("warning: GPUPART_SEED is not an integer, using --seed");
            flag
        }),
        Err(_) => flag,
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), String> {
    if args.util > args.tasks as f64 {
        return Err(format!(
            "total utilization {} exceeds task count {}",
            args.util, args.tasks
        ));
    }
    let config = GenConfig::new(args.tasks, args.util, args.prm, effective_seed(args.seed));
    let ts = generate_taskset(&config, args.sms).map_err(|e| e.to_string())?;
    let json = serde_json::to_string_pretty(&ts).map_err(|e| e.to_string())?;
    fs::write(&args.out, json).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let total: f64 = ts
        .tasks
        .iter()
        .map(|t| t.curve_n.a as f64 / t.period as f64)
        .sum();
    println!("{} tasks, total utilization {total:.6}", ts.len());
    println!("{}", args.out.display());
    Ok(())
}

fn load_taskset(path: &Path) -> Result<TaskSet, String> {
    let data = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let ts: TaskSet = serde_json::from_str(&data).map_err(|e| format!("{}: {e}", path.display()))?;
    // Re-validate invariants on foreign input.
    TaskSet::new(ts.tasks, ts.total_sms).map_err(|e| e.to_string())
}

fn print_solution(sol: &Solution, ts: &TaskSet) {
    println!("schedulable");
    println!(
        "partitions: {} (Pi = {} of M = {})",
        sol.partitions.len(),
        required_resources(&sol.partitions),
        ts.total_sms
    );
    for p in &sol.partitions {
        let members: Vec<String> = p.tasks.iter().map(|t| t.to_string()).collect();
        println!("  partition {}: {} SMs, tasks [{}]", p.id, p.size, members.join(", "));
    }
    let (lo, hi, ach) = gpupart::harness::efficiency(sol, ts);
    let f = |x: gpupart::model::Frac| *x.numer() as f64 / *x.denom() as f64;
    println!(
        "efficiency: lower {:.6}, achieved {:.6}, upper {:.6}",
        f(lo),
        f(ach),
        f(hi)
    );
    println!("analysis time: {:.3} ms", sol.analysis_time.as_secs_f64() * 1e3);
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<bool, String> {
    let ts = load_taskset(&args.input)?;
    let variant = match (args.heuristic.to_lowercase().as_str(), args.forbidden.to_lowercase().as_str()) {
        ("1g", _) => Variant::OneG,
        ("sms", "act") => Variant::SmsAct,
        ("sms", "ina") => Variant::SmsIna,
        ("bf", "act") => Variant::BfAct,
        ("bf", "ina") => Variant::BfIna,
        _ => {
            return Err(format!(
                "unknown heuristic/forbidden combination: {} / {}",
                args.heuristic, args.forbidden
            ))
        }
    };
    match variant.run(&ts) {
        Some(sol) => {
            print_solution(&sol, &ts);
            Ok(true)
        }
        None => {
            println!("not schedulable");
            Ok(false)
        }
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), String> {
    let config = if let Some(path) = &args.config {
        let data = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&data).map_err(|e| format!("{}: {e}", path.display()))?
    } else {
        let variants: Result<Vec<Variant>, String> = args
            .variants
            .split(',')
            .map(|s| Variant::parse(s.trim()).ok_or_else(|| format!("unknown variant {s}")))
            .collect();
        SweepConfig {
            total_sms: args.sms.ok_or("either --config or --sms is required")?,
            n_tasks: args.tasks.ok_or("either --config or --tasks is required")?,
            prm: args.prm,
            u_min: args.u_min,
            u_max: args.u_max,
            u_step: args.u_step,
            reps: args.reps,
            variants: variants?,
            base_seed: effective_seed(args.seed),
            jobs: args.jobs,
        }
    };

    let result = run_sweep(&config)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| format!("{}: {e}", args.out_dir.display()))?;
    for &variant in &config.variants {
        let path = args.out_dir.join(format!("{}.dat", variant.name()));
        fs::write(&path, result.dat_table(variant)).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("{}", path.display());
    }
    let summary = args.out_dir.join("summary.json");
    fs::write(
        &summary,
        serde_json::to_string_pretty(&result).map_err(|e| e.to_string())?,
    )
    .map_err(|e| format!("{}: {e}", summary.display()))?;
    println!("{}", summary.display());
    if result.necessary_test_violations > 0 {
        return Err(format!(
            "necessary-test soundness violated on {} instances",
            result.necessary_test_violations
        ));
    }
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs) -> Result<(), String> {
    match oracle_equivalence_run(effective_seed(args.seed), args.instances, 6) {
        Ok(()) => {
            println!(
                "oracle equivalence: {} instances, demand test and EDF simulation agree",
                args.instances
            );
            Ok(())
        }
        Err(inst) => Err(format!(
            "demand test disagrees with the EDF simulator on {inst:?}"
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate(args) => cmd_generate(args).map(|()| true),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Sweep(args) => cmd_sweep(args).map(|()| true),
        Command::Selftest(args) => cmd_selftest(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
