use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pseudogroup_cli::{
    cmd_domain_map, cmd_fixed_points, cmd_hyperbolic, cmd_metric, cmd_split, cmd_word, load_config, Exit, Outcome,
};

#[derive(Parser)]
#[command(name = "pseudogroup", version, about = "Fixed points, perturbations and orbits of two-generator pseudogroups")]
struct Cli {
    /// JSON run config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files; the main output goes to stdout otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel engines.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the fixed-point subdivision tolerance.
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduced form, primitive root and minimal conjugate of a word.
    Word { word: String },
    /// Fixed points of a word's element in the configured region.
    FixedPoints { word: String },
    /// Perturb the conjugators until two words share no fixed point.
    Split { word_i: String, word_j: String },
    /// Hyperbolic fixed points with disjoint orbits.
    Hyperbolic,
    /// Analytic distances between generator jets and word jets.
    Metric { words: Vec<String> },
    /// Domain membership grid of a word.
    DomainMap { word: String },
}

fn run(cli: &Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(text) => match load_config(&text, cli.seed, cli.tol) {
                Ok(c) => Some(c),
                Err(e) => return fail(Exit::Config, format!("{}: {e}", path.display())),
            },
            Err(e) => return fail(Exit::Config, format!("{}: {e}", path.display())),
        },
        None => None,
    };
    if let Command::Word { word } = &cli.command {
        return cmd_word(cfg.as_ref(), word);
    }
    let Some(cfg) = cfg else {
        return fail(Exit::Config, "this command needs --config".into());
    };
    match &cli.command {
        Command::Word { .. } => unreachable!(),
        Command::FixedPoints { word } => cmd_fixed_points(&cfg, word),
        Command::Split { word_i, word_j } => cmd_split(&cfg, word_i, word_j),
        Command::Hyperbolic => cmd_hyperbolic(&cfg),
        Command::Metric { words } => cmd_metric(&cfg, words),
        Command::DomainMap { word } => cmd_domain_map(&cfg, word),
    }
}

fn fail(code: Exit, message: String) -> Outcome {
    Outcome { code, artifacts: Vec::new(), diagnostic: Some(message) }
}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with config errors; 2 means separation failure.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Config as u8 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(Exit::Config as u8);
        }
    }
    let outcome = run(&cli);
    if let Some(msg) = &outcome.diagnostic {
        eprintln!("error: {msg}");
    }
    match &cli.out {
        Some(dir) => {
            if let Err(e) = fs::create_dir_all(dir) {
                eprintln!("error: {}: {e}", dir.display());
                return ExitCode::from(Exit::Config as u8);
            }
            for a in &outcome.artifacts {
                let path = dir.join(&a.name);
                if let Err(e) = fs::write(&path, &a.contents) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(Exit::Config as u8);
                }
            }
        }
        None => {
            if let Some(a) = outcome.artifacts.first() {
                print!("{}", a.contents);
            }
        }
    }
    ExitCode::from(outcome.code as u8)
}
