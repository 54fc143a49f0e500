use clap::{Parser, Subcommand};
use offroad_bench::{run_benchmark, BenchScenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bench", about = "Planner benchmark harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write runs.csv and summary.csv.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let Cmd::Run { scenario, out } = Cli::parse().cmd;
    let result = BenchScenario::load(&scenario).and_then(|s| {
        let report = run_benchmark(&s)?;
        report.write_csv(&out)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            print!("{}", report.table());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::FAILURE
        }
    }
}
