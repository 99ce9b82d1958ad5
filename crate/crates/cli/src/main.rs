mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure};

#[derive(Parser)]
#[command(name = "gsqg", version, about = "Patch dynamics for generalized SQG models")]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// override one configuration value; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// worker threads (0 or unset: all cores)
    #[arg(long, env = "GSQG_THREADS", global = true)]
    threads: Option<usize>,
    /// output directory, overriding `output_dir`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// check the multiplier hypotheses and classify the Osgood integral
    CheckMultiplier,
    /// tabulate G, G' and R on a log grid
    KernelTable,
    /// evolve the patches in [geometry]
    Simulate,
    /// split the velocity of a region set at probe points
    VelocityProbe,
    /// run the two-patch collision scenario
    Blowup,
    /// audit the wedge velocity bounds
    VerifyBounds,
    /// tabulate the Π indices over β
    PiScan,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckMultiplier => "check-multiplier",
            Command::KernelTable => "kernel-table",
            Command::Simulate => "simulate",
            Command::VelocityProbe => "velocity-probe",
            Command::Blowup => "blowup",
            Command::VerifyBounds => "verify-bounds",
            Command::PiScan => "pi-scan",
        }
    }
}

fn report(cmd: &str, f: &Failure) -> ExitCode {
    let detail = f.detail().replace(['\n', '\r'], " ");
    eprintln!("error command={cmd} code={} kind={} detail={detail:?}", f.code(), f.kind());
    eprintln!("gsqg {cmd}: {}", f.explanation());
    ExitCode::from(f.code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = cli.command.name();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    if let Err(e) = pool.build_global() {
        return report(cmd, &Failure::Config(format!("thread pool: {e}")));
    }

    let loaded = match config::load(cli.config.as_deref(), &cli.set) {
        Ok(l) => l,
        Err(e) => return report(cmd, &Failure::Config(e)),
    };
    let ctx = Context { loaded: &loaded, out_override: cli.out.clone() };
    let run = match cli.command {
        Command::CheckMultiplier => commands::check_multiplier(&ctx),
        Command::KernelTable => commands::kernel_table_cmd(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::VelocityProbe => commands::velocity_probe(&ctx),
        Command::Blowup => commands::blowup(&ctx),
        Command::VerifyBounds => commands::verify_bounds(&ctx),
        Command::PiScan => commands::pi_scan(&ctx),
    };
    let (mut art, fin) = match run {
        Ok(x) => x,
        Err(f) => return report(cmd, &f),
    };
    let code = fin.failure.as_ref().map_or(0, |f| f.code());
    let written = art
        .write("config.toml", loaded.canonical.as_bytes())
        .and_then(|_| art.manifest(cmd, &loaded.sha256, fin.status, code));
    if let Err(e) = written {
        return report(cmd, &Failure::Io(e.to_string()));
    }
    println!("artifacts in {}", art.dir.display());
    match fin.failure {
        Some(f) => report(cmd, &f),
        None => ExitCode::SUCCESS,
    }
}
