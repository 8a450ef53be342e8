use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slacktune_core::experiment::LadderEntry;
use slacktune_core::harness::{cmd_dd_sweep, cmd_mem_check, cmd_spin_echo, cmd_vqe, HarnessError, VqeOverrides};
use slacktune_core::mitigation::{DDKind, MemMode};
use slacktune_core::tuner::SweepGrid;

#[derive(Parser)]
#[command(name = "slacktune", version, about = "Idle-window error mitigation tuned against a VQE objective")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-stage tuning followed by the evaluation ladder.
    Vqe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Noise model file replacing the config's noise section.
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Comma-separated ladder entries, e.g. `no_em,baseline_mem,tuned_gs`.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<String>>,
        /// Sweep grid as `positions,rounds[,max_points]`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Moves the echo pulse across a 799-cycle window.
    SpinEcho {
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long, default_value_t = 9)]
        positions: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fidelity against the number of DD rounds in one large window.
    DdSweep {
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long, default_value = "xy4")]
        kind: String,
        /// Window length in cycles.
        #[arg(long)]
        window: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Calibrates readout and reports TV distance before and after correction.
    MemCheck {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Finite-shot mode; exact distributions when absent.
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value = "full")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn input_error(msg: String) -> HarnessError {
    HarnessError::Input(slacktune_core::Error::Config(msg))
}

fn parse_grid(s: &str) -> Result<SweepGrid, HarnessError> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| input_error(format!("--grid {s:?}: expected positions,rounds[,max_points]")))?;
    let mut grid = SweepGrid::default();
    match parts.as_slice() {
        [p, r] => (grid.positions, grid.rounds) = (*p, *r),
        [p, r, m] => (grid.positions, grid.rounds, grid.max_points) = (*p, *r, *m),
        _ => return Err(input_error(format!("--grid {s:?}: expected 2 or 3 numbers"))),
    }
    Ok(grid)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Vqe {
            config,
            out,
            seed,
            noise,
            ladder,
            grid,
        } => {
            let ladder = ladder
                .map(|l| l.iter().map(|s| s.parse::<LadderEntry>()).collect::<Result<Vec<_>, _>>())
                .transpose()
                .map_err(HarnessError::Input)?;
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            let result = cmd_vqe(&config, &out, &VqeOverrides { seed, noise, ladder, grid })?;
            for l in &result.ladder {
                println!("{:<14} {:.6}", l.name.name(), l.objective);
            }
            if let Some(e0) = result.e0 {
                println!("{:<14} {:.6}", "E0", e0);
            }
        }
        Command::SpinEcho {
            noise,
            positions,
            out,
            seed,
        } => {
            let r = cmd_spin_echo(noise.as_deref(), positions, &out, seed)?;
            for p in &r.points {
                println!("{:.4} {:>4} {:.9}", p.fraction, p.offset, p.fidelity);
            }
        }
        Command::DdSweep {
            noise,
            kind,
            window,
            out,
            seed,
        } => {
            let kind: DDKind = kind.parse().map_err(HarnessError::Input)?;
            let r = cmd_dd_sweep(noise.as_deref(), kind, window, &out, seed)?;
            println!("argmax rounds {}", r.argmax);
        }
        Command::MemCheck {
            n,
            noise,
            shots,
            mode,
            seed,
            out,
        } => {
            let mode = match mode.as_str() {
                "full" => MemMode::Full,
                "tensored" => MemMode::Tensored,
                other => return Err(input_error(format!("unknown MEM mode {other:?}"))),
            };
            let r = cmd_mem_check(n, noise.as_deref(), shots, mode, seed, out.as_deref())?;
            println!("tv_before {:.12e}", r.tv_before);
            println!("tv_after  {:.12e}", r.tv_after);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
