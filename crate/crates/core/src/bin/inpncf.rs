use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inpncf::cli::{self, RunConfig, SplitRequest, TrainOptions};
use inpncf::data::{Format, SplitProtocol};
use inpncf::metrics::Metric;
use inpncf::Result;

#[derive(Parser, Debug)]
#[command(version, about = "Neural collaborative filtering with learnable interaction inputs")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a rating file into train, validation and test parts
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "movielens-tab")]
        format: Format,
        #[arg(long, value_parser = parse_protocol, default_value = "random-ratio")]
        protocol: SplitProtocol,
        /// Train, validation and test shares
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Treat every observed interaction as a 1
        #[arg(long)]
        implicit: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the configured model and evaluate it on the test part
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue a run from a saved checkpoint
        #[arg(long)]
        from_checkpoint: Option<PathBuf>,
        /// Stop after this many epochs, leaving a resumable checkpoint
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Score a checkpoint on a split directory
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory written by `split` or by `train`
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated subset of rmse, precision, hr, ndcg
        #[arg(long, value_delimiter = ',', value_parser = parse_metric)]
        metrics: Option<Vec<Metric>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print trainable parameter counts for a config
    Summary {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write initial and learned input values as CSV
    InputsDump {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_protocol(s: &str) -> std::result::Result<SplitProtocol, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown protocol `{s}`"))
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown metric `{s}`"))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Split {
            input,
            format,
            protocol,
            ratios,
            seed,
            implicit,
            out,
        } => {
            let m = cli::cmd_split(&SplitRequest {
                input: &input,
                format,
                protocol,
                ratios: [ratios[0], ratios[1], ratios[2]],
                seed,
                implicit,
                out: &out,
            })?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Train {
            config,
            from_checkpoint,
            stop_after,
        } => {
            let config = RunConfig::load(&config)?;
            let summary = cli::cmd_train(&config, &TrainOptions { from_checkpoint, stop_after })?;
            if let Some(report) = &summary.report {
                print!("{}", report.to_csv()?);
            }
            println!("outputs in {}", summary.output_dir.display());
        }
        Command::Evaluate {
            checkpoint,
            data,
            metrics,
            out,
        } => {
            let report = cli::cmd_evaluate(&checkpoint, &data, metrics, &out)?;
            print!("{}", report.to_csv()?);
        }
        Command::Summary { config } => {
            print!("{}", cli::cmd_summary(&RunConfig::load(&config)?)?);
        }
        Command::InputsDump { checkpoint, out } => {
            let rows = cli::cmd_inputs_dump(&checkpoint, &out)?;
            println!("wrote {rows} rows per side to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
