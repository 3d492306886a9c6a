use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use partsmooth::harness::{self, HarnessError, Kind, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Probe,
    Solve,
    Identify,
    Transversal,
}

impl From<Command> for Kind {
    fn from(c: Command) -> Self {
        match c {
            Command::Probe => Kind::Probe,
            Command::Solve => Kind::Solve,
            Command::Identify => Kind::Identify,
            Command::Transversal => Kind::Transversal,
        }
    }
}

/// Run partial-smoothness experiments from JSON configs.
///
/// CONFIG may be a directory, in which case every config of the requested
/// kind in it is run.
#[derive(Debug, Parser)]
#[command(name = "psm", version)]
struct Cli {
    command: Command,
    config: PathBuf,
    /// Root directory for artifacts (one subdirectory per config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads when CONFIG is a directory.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn report(result: Result<harness::RunReport, HarnessError>) -> i32 {
    match result {
        Ok(r) => {
            println!("{}", serde_json::to_string(&r).expect("reports serialize"));
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let kind = Kind::from(cli.command);
    let opts = match (RunOptions {
        out_dir: cli.out.clone(),
        seed_override: None,
        expected_kind: Some(kind),
    })
    .with_env_seed()
    {
        Ok(o) => o,
        Err(e) => return ExitCode::from(report(Err(e)) as u8),
    };

    let code = if cli.config.is_dir() {
        let paths = harness::list_configs(&cli.config).map(|paths| {
            paths
                .into_iter()
                .filter(|p| harness::peek_kind(p).is_ok_and(|k| k == kind))
                .collect::<Vec<_>>()
        });
        match paths.and_then(|p| harness::run_many(&p, &opts, cli.jobs)) {
            Ok(results) => results.into_iter().map(report).max().unwrap_or(0),
            Err(e) => report(Err(e)),
        }
    } else {
        report(harness::run(&cli.config, &opts))
    };
    ExitCode::from(code as u8)
}
