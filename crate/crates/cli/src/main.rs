use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcu_core::dataset::Method;
use pcu_core::harness::{with_pool, ExperimentConfig, Harness};
use pcu_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pcu",
    version,
    about = "Point cloud upsampling: patch vs. average-segment input"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Use the built-in procedural corpus instead of configured datasets.
    #[arg(long, global = true)]
    toy: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the dense surface samples of every model as XYZ.
    Sample,
    /// Build training and test bundles.
    MakeDataset {
        /// Only build bundles for one method (patch or as).
        #[arg(long)]
        method: Option<Method>,
    },
    /// Train one network per dataset, scale, method and variant.
    Train,
    /// Evaluate trained networks on their test splits.
    Eval,
    /// Evaluate every dataset's networks on every dataset's test split.
    CrossVal,
    /// Train and evaluate all four architecture variants.
    Ablate,
    /// Render markdown from the stored run records.
    Report,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match (&common.config, common.toy) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, true) => ExperimentConfig::toy(0),
        (None, false) => return Err(Error::Config("pass --config <file> or --toy".into())),
    };
    if common.toy && common.config.is_some() {
        config.datasets = ExperimentConfig::toy(0).datasets;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(j) = common.jobs {
        config.jobs = Some(j);
    }
    if let Some(o) = &common.out {
        config.out = o.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = load(&cli.common)?;
    let jobs = config.jobs;
    let harness = Harness::new(config)?;
    with_pool(jobs, || dispatch(&harness, &cli.command))?
}

fn dispatch(h: &Harness, command: &Command) -> Result<()> {
    match command {
        Command::Sample => {
            let files = h.sample()?;
            println!(
                "wrote {} clouds under {}",
                files.len(),
                h.out().join("samples").display()
            );
        }
        Command::MakeDataset { method } => {
            for s in h.make_dataset(*method)? {
                println!(
                    "{}: {} samples from {} models, {} -> {} points",
                    s.path, s.samples, s.models, s.input_points, s.target_points
                );
            }
        }
        Command::Train => {
            for r in h.train()? {
                println!(
                    "{}: loss {:.6} -> {:.6} over {} epochs ({:.1}s)",
                    r.weights,
                    r.first_epoch_loss.unwrap_or(f64::NAN),
                    r.final_epoch_loss.unwrap_or(f64::NAN),
                    r.hyper.epochs,
                    r.wall_time_s
                );
            }
        }
        Command::Eval => print_rows(&h.eval()?, h, "eval"),
        Command::CrossVal => print_rows(&h.cross_val()?, h, "cross_val"),
        Command::Ablate => print_rows(&h.ablate()?, h, "ablation"),
        Command::Report => println!("wrote {}", h.report()?.display()),
    }
    Ok(())
}

fn print_rows(rec: &pcu_core::harness::RunRecord, h: &Harness, stem: &str) {
    print!("{}", pcu_core::harness::rows_to_csv(&rec.rows));
    println!("wrote {}", h.reports_dir().join(format!("{stem}.csv")).display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
