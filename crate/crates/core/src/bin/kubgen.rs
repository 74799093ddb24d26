use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kubgen::export::{read_metadata, reference_rays, to_canonical_json};
use kubgen::metrics::{evaluate, EvalTask};
use kubgen::rng::Rng;
use kubgen::runtime::{run_job, GenerateArgs};

#[derive(Parser)]
#[command(name = "kubgen", version, about = "Deterministic synthetic scene generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scenes owned by one job.
    Generate(GenerateArgs),
    /// Score predictions against a ground-truth record.
    Eval {
        #[arg(long, value_enum)]
        task: EvalTask,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Emit reference camera rays for one frame of a scene record.
    Rays {
        /// Scene record directory.
        #[arg(long)]
        scene: PathBuf,
        /// Zero-based frame index.
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("kubgen: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Generate(args) => match run_job(&args.into_spec()) {
            Ok(m) => {
                for s in m.scenes.iter().filter(|s| s.error.is_some()) {
                    eprintln!("kubgen: scene {} failed: {}", s.index, s.error.as_deref().unwrap_or(""));
                }
                if m.failed() == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => fail(e),
        },
        Command::Eval { task, pred, gt } => match evaluate(task, &pred, &gt) {
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("json value"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Rays { scene, frame, count, seed, out } => {
            let text = read_metadata(&scene)
                .and_then(|md| reference_rays(&md, frame, count, &mut Rng::new(seed)))
                .and_then(|fx| to_canonical_json(&fx));
            match (text, out) {
                (Err(e), _) => fail(e),
                (Ok(t), None) => {
                    print!("{t}");
                    ExitCode::SUCCESS
                }
                (Ok(t), Some(path)) => match std::fs::write(&path, t) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(format!("{}: {e}", path.display())),
                },
            }
        }
    }
}
