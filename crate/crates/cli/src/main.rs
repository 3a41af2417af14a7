use clap::{Parser, Subcommand};

use slotnav_cli::commands::{
    self, EvalArgs, GenDataArgs, GradCheckArgs, InspectArgs, TrainArgs,
};
use slotnav_cli::error::CliError;
use slotnav_cli::gradcheck;

/// Desk-scale vision-language navigation: synthetic worlds, slot-compressed
/// visual history, trajectory encoding, and a small trained reasoner.
#[derive(Parser, Debug)]
#[command(name = "slotnav", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a deterministic episode dataset plus its sidecar config.
    GenData(GenDataArgs),
    /// Train (or resume) a model on a dataset; writes a checkpoint.
    Train(TrainArgs),
    /// Evaluate an agent on a dataset and print the metric table.
    Eval(EvalArgs),
    /// Finite-difference validation of every analytic gradient path.
    GradCheck(GradCheckArgs),
    /// Render the prompt state of one episode after a few reference steps.
    InspectPrompt(InspectArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::GenData(args) => {
            let manifest = commands::gen_data(&args)?;
            eprintln!(
                "wrote {} ({} easy + {} hard over {} scene(s), seed {})",
                args.out.display(),
                manifest.n_easy,
                manifest.n_hard,
                manifest.n_scenes,
                manifest.seed
            );
        }
        Cmd::Train(args) => {
            let summary = commands::train(&args)?;
            eprintln!(
                "trained {} step(s); checkpoint at {}",
                summary.steps_run,
                args.out.display()
            );
            if let Some(loss) = summary.final_loss {
                println!("final loss {loss:.6}");
            }
        }
        Cmd::Eval(args) => {
            let (_, table) = commands::eval(&args)?;
            print!("{table}");
        }
        Cmd::GradCheck(args) => {
            let text = gradcheck::run_and_render(args.seed)?;
            print!("{text}");
        }
        Cmd::InspectPrompt(args) => {
            let text = commands::inspect_prompt(&args)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
