use std::process::ExitCode;

use clap::Parser;
use poisperc_cli::args::Cli;
use poisperc_cli::run_experiment;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let spec = match cli.into_spec() {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run_experiment(&spec) {
        Ok(outcome) => {
            for check in &outcome.manifest.checks {
                let mark = if check.passed { "PASS" } else { "FAIL" };
                println!("{mark} {}: {}", check.name, check.detail);
            }
            println!("reports in {}", spec.output_dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
