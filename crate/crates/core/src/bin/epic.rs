use clap::{Parser, Subcommand};
use epic::runner::{ablate_file, run_file, verify_file, Failure, Summary};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "epic",
    version,
    about = "Lifelong PAC-Bayes policy learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm once per seed.
    Run { config: PathBuf },
    /// Run one arm per value of a sweep (kappa, N or lambda0).
    Ablate {
        config: PathBuf,
        #[arg(long)]
        sweep: String,
    },
    /// Run with the gap report, KL-budget audit and martingale traces.
    Verify { config: PathBuf },
}

fn print_summary(s: &Summary) {
    println!(
        "{}: first-window {:.4} ± {:.4}, final-window {:.4} ± {:.4} over {} seeds",
        s.algo,
        s.first_window.mean,
        s.first_window.std,
        s.final_window.mean,
        s.final_window.std,
        s.final_window.n
    );
    if let Some(v) = &s.verify {
        println!(
            "gap covered {}/{}, KL budget violations {} of {} premise windows ({} flagged), Azuma exceedances {}/{}",
            v.gap_covered,
            v.gap_runs,
            v.kl_violations,
            v.kl_premise_windows,
            v.kl_flagged,
            v.martingale_exceed_azuma,
            v.martingale_traces
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), Failure> = match cli.command {
        Command::Run { config } => run_file(&config).map(|s| print_summary(&s)),
        Command::Verify { config } => verify_file(&config).map(|s| print_summary(&s)),
        Command::Ablate { config, sweep } => ablate_file(&config, &sweep).map(|arms| {
            for a in arms {
                println!(
                    "{}={}: final-window {:.4} ± {:.4}",
                    a.sweep, a.value, a.final_window.mean, a.final_window.std
                );
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
