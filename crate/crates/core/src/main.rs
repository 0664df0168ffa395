use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use advecta::harness::{determinism_check, parse_config_text, run_case, RunConfig, RunStatus};
use advecta::Error;

#[derive(Parser)]
#[command(name = "advecta", version, about = "Tracer transport test cases on distorted meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one test case and print its summary line.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// solid_body, orography or deform
    #[arg(long)]
    case: Option<String>,
    /// split, mol-implicit or mol-rk2
    #[arg(long)]
    scheme: Option<String>,
    /// orthogonal or distorted
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Mountain height in metres (orography only).
    #[arg(long)]
    h0: Option<f64>,
    /// Directory for field CSVs, the run log and summary.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run twice and fail unless both runs agree bit for bit.
    #[arg(long)]
    seed_check: bool,
    /// Plain-text key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, Error> {
        let mut pairs = match &self.config {
            Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.insert(k.to_string(), v);
            }
        };
        set("case", self.case);
        set("scheme", self.scheme);
        set("mesh", self.mesh);
        set("nx", self.nx.map(|v| v.to_string()));
        set("ny", self.ny.map(|v| v.to_string()));
        set("dt", self.dt.map(|v| v.to_string()));
        set("t_end", self.t_end.map(|v| v.to_string()));
        set("h0", self.h0.map(|v| v.to_string()));
        set("out", self.out.map(|v| v.display().to_string()));
        if self.seed_check {
            set("seed_check", Some("true".into()));
        }
        RunConfig::from_pairs(&pairs)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;

    let cfg = match args.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("advecta: {e}");
            return ExitCode::from(1);
        }
    };
    let outcome = if cfg.seed_check {
        determinism_check(&cfg).map(|(r, same)| {
            eprintln!("determinism check: {}", if same { "identical" } else { "MISMATCH" });
            (r, same)
        })
    } else {
        run_case(&cfg).map(|r| (r, true))
    };
    match outcome {
        Ok((result, same)) => {
            println!("{}", result.summary_line());
            match result.status {
                RunStatus::Diverged { .. } => ExitCode::from(2),
                RunStatus::Completed if !same => ExitCode::from(3),
                RunStatus::Completed => ExitCode::SUCCESS,
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("advecta: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("advecta: run failed: {e}");
            ExitCode::from(1)
        }
    }
}
