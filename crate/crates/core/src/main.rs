use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trajpriv::experiment::{
    cmd_attack, cmd_bench, cmd_defend, cmd_ingest, AttackOutput, BenchOutput, DefenseOutput, ExperimentConfig,
    IngestOutput,
};
use trajpriv::Error;

/// Trajectory-privacy experiment driver.
#[derive(Parser)]
#[command(name = "trajpriv", version)]
struct Cli {
    /// TOML experiment configuration; defaults apply to omitted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed routed to data generation, the split, the operations and the workload.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load check-ins and segment them into trajectories.
    Ingest,
    /// Mine profiles from training users and score the test users.
    Attack,
    /// Sanitize test trajectories with every operation and rescore.
    Defend,
    /// Simulate serverless workloads and pick an allocation per scenario.
    Bench,
    /// Run ingest, attack, defend and bench in order.
    All,
    /// Serve the sanitization operations over HTTP.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

const EXIT_INFEASIBLE: u8 = 2;

fn load(cli: &Cli) -> trajpriv::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    Ok(cfg)
}

fn print_ingest(o: &IngestOutput) {
    println!("users {}  trajectories {}  skipped lines {}", o.store.profiles.len(), o.store.trajectory_count(), o.skipped_lines);
    println!("{:>8} {:>8} {:>13} {:>12}", "window_h", "users", "trajectories", "mean_length");
    for w in &o.windows {
        println!("{:>8} {:>8} {:>13} {:>12.3}", w.window_hours, w.users, w.trajectories, w.mean_length);
    }
}

fn print_attack(o: &AttackOutput) {
    println!("train users {}  test users {}  scored trajectories {}", o.split.train.len(), o.split.test.len(), o.scores.len());
    println!("{:>6} {:>9}", "delta", "coverage");
    for c in &o.coverage {
        println!("{:>6.2} {:>9.4}", c.delta, c.coverage);
    }
}

fn print_defense(o: &DefenseOutput) {
    println!("{:<16} {:>6} {:>10} {:>9} {:>13} {:>10} {:>7}", "op", "n", "score", "utility", "utility_emerg", "captured", "unsafe");
    for r in &o.summary {
        println!(
            "{:<16} {:>6} {:>10.5} {:>9.2} {:>13.2} {:>10.2} {:>7}",
            r.op, r.trajectories, r.mean_score, r.utility_pct, r.utility_emergency_pct, r.captured_pct, r.unsafe_count
        );
    }
    for c in &o.coreset {
        println!("coreset theta {}: {} -> {} reports ({:.1}% smaller)", c.theta, c.reports_before, c.reports_after, c.reduction_pct);
    }
}

fn print_bench(o: &BenchOutput) {
    println!("{:<5} {:<16} {:>6} {:>9} {:>9} {:>7} {:>10}", "scen", "op", "mem_mb", "avgT_s", "rps", "lambda", "SB");
    for r in &o.rows {
        println!(
            "{:<5} {:<16} {:>6} {:>9.4} {:>9.2} {:>7.4} {:>10.6}",
            r.scenario, r.op, r.memory_mb, r.avg_t, r.rps, r.lambda, r.sb
        );
    }
    for f in &o.frontiers {
        match &f.report.chosen {
            Some(p) => println!("{}: frontier {} points, chosen {} MB (SB {:.6}, success {:.4})", f.scenario, f.report.frontier.len(), p.memory_mb, p.sb, p.ep),
            None => println!("{}: no allocation fits the budget cap", f.scenario),
        }
    }
}

fn run(cli: &Cli) -> trajpriv::Result<ExitCode> {
    let cfg = load(cli)?;
    let bench = |cfg: &ExperimentConfig| -> trajpriv::Result<ExitCode> {
        let o = cmd_bench(cfg)?;
        print_bench(&o);
        Ok(if o.infeasible() { ExitCode::from(EXIT_INFEASIBLE) } else { ExitCode::SUCCESS })
    };
    match &cli.command {
        Command::Ingest => print_ingest(&cmd_ingest(&cfg)?),
        Command::Attack => print_attack(&cmd_attack(&cfg)?),
        Command::Defend => print_defense(&cmd_defend(&cfg)?),
        Command::Bench => return bench(&cfg),
        Command::All => {
            print_ingest(&cmd_ingest(&cfg)?);
            print_attack(&cmd_attack(&cfg)?);
            print_defense(&cmd_defend(&cfg)?);
            return bench(&cfg);
        }
        Command::Serve { bind } => {
            let addr = bind.as_deref().unwrap_or(&cfg.bind);
            let addr = addr.parse().map_err(|e| Error::InvalidConfig(format!("bind address {addr:?}: {e}")))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io(e.to_string()))?;
            eprintln!("listening on {addr}");
            rt.block_on(trajpriv::http::serve_http(addr, cfg.ops)).map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Error::InfeasibleBudget) => {
            eprintln!("error: {}", Error::InfeasibleBudget);
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
