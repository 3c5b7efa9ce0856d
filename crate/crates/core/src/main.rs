use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wfres::cli::{exit_code, load_config, recipes, run, ExperimentConfig, Overrides, RECIPES};

#[derive(Parser)]
#[command(
    name = "wfres",
    version,
    about = "Resolvent wave-front and propagation experiments on Z^d"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory, overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for norm-estimation start vectors.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML config, or a canned recipe by name.
    Run { config: String },
    /// Print the canned recipes.
    ListRecipes,
    /// Print a recipe's TOML so it can be edited.
    ShowRecipe { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        out: cli.out,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    match cli.command {
        Command::ListRecipes => {
            for r in RECIPES {
                println!(
                    "{:<22} {}\n{:<22} claim: {}",
                    r.name, r.description, "", r.claim
                );
            }
            ExitCode::SUCCESS
        }
        Command::ShowRecipe { name } => match recipes::find(&name) {
            Some(r) => {
                print!("{}", r.config.trim_start());
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("no recipe named '{name}'");
                ExitCode::from(2)
            }
        },
        Command::Run { config } => {
            let (cfg, label) = match recipes::find(&config) {
                Some(r) => (ExperimentConfig::from_toml(r.config), r.name.to_string()),
                None => (load_config(config.as_ref()), config.clone()),
            };
            let result = cfg.and_then(|c| run(&c, &label, &ov));
            match &result {
                Ok(o) => {
                    for c in &o.criteria {
                        println!("{}", c.line());
                    }
                    println!("artifacts in {}", o.out_dir.display());
                }
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&result) as u8)
        }
    }
}
