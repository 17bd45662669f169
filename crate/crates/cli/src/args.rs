use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mbaf_core::FusionVariant;

use crate::commands::{cmd_ablate, cmd_evaluate, cmd_gen_data, cmd_gradcheck, cmd_train, GradcheckRequest};
use crate::config::{ExperimentConfig, Overrides};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "mbaf",
    version,
    about = "Train, evaluate and ablate memory-based attentive fusion models"
)]
pub struct Cli {
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model per seed and write metrics, curves and a checkpoint.
    Train(RunArgs),
    /// Score a saved checkpoint on the validation and test splits.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to <out>/checkpoint.bin.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sweep memory size, read function, memory location and output width.
    Ablate(RunArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Write the synthetic stream as CSV.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Single run seed, replacing the config's seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated slot counts.
    #[arg(long, value_delimiter = ',')]
    pub slots: Option<Vec<usize>>,
    /// Comma-separated variants such as na, ca, sm1, nf or rs1024.
    #[arg(long, value_delimiter = ',')]
    pub variant: Option<Vec<FusionVariant>>,
    #[arg(long)]
    pub freeze_writes: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            slots: self.slots.clone(),
            variants: self.variant.clone(),
            freeze_writes: self.freeze_writes,
            out: self.out.clone(),
        });
        Ok(cfg)
    }

    fn single_variant(&self) -> CliResult<()> {
        match &self.variant {
            Some(v) if v.len() > 1 => Err(CliError::Usage("--variant takes one value for this command".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of seeds per variant.
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    /// Comma-separated variants; all five kinds when omitted.
    #[arg(long, value_delimiter = ',')]
    pub variant: Option<Vec<FusionVariant>>,
    /// Fix the layer shape instead of drawing one per seed. Needs --s2 as well.
    #[arg(long, requires = "s2")]
    pub s1: Option<usize>,
    #[arg(long, requires = "s1")]
    pub s2: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub slots: usize,
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    /// Also check the full classifier.
    #[arg(long)]
    pub classifier: bool,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Executes the parsed command. Map errors to a status with
/// [`CliError::exit_code`].
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => {
            args.single_variant()?;
            cmd_train(&args.load()?)?;
        }
        Command::Evaluate { run, checkpoint } => {
            run.single_variant()?;
            cmd_evaluate(&run.load()?, checkpoint.as_deref())?;
        }
        Command::Ablate(args) => {
            cmd_ablate(&args.load()?)?;
        }
        Command::Gradcheck(args) => {
            let req = GradcheckRequest {
                variants: args.variant.unwrap_or_else(|| GradcheckRequest::default().variants),
                seeds: args.seeds,
                dims: args.s1.zip(args.s2).map(|(s1, s2)| (s1, s2, args.slots, args.batch)),
                classifier: args.classifier,
                out: args.out,
            };
            let summary = cmd_gradcheck(&req)?;
            if req.out.is_none() {
                let brief: Vec<_> = summary.summaries.iter().collect();
                println!("{}", serde_json::to_string_pretty(&brief).unwrap_or_default());
            }
            if !summary.pass {
                let failed: usize = summary.summaries.iter().map(|s| s.checked - s.passed).sum();
                return Err(CliError::CheckFailed(format!(
                    "{failed} gradient checks exceeded relative error {:e}",
                    summary.threshold
                )));
            }
        }
        Command::GenData { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides {
                seed,
                ..Overrides::default()
            });
            cmd_gen_data(&cfg, out.as_deref())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn variant_lists_parse() {
        let cli = Cli::try_parse_from([
            "mbaf",
            "ablate",
            "--config",
            "c.json",
            "--variant",
            "na,ca",
            "--slots",
            "10,20",
        ])
        .unwrap();
        match cli.command {
            Command::Ablate(a) => {
                assert_eq!(
                    a.variant,
                    Some(vec![FusionVariant::NaiveAttention, FusionVariant::CrossAttention])
                );
                assert_eq!(a.slots, Some(vec![10, 20]));
            }
            other => panic!("parsed as {other:?}"),
        }
    }

    #[test]
    fn unknown_variant_is_a_usage_error() {
        let err = Cli::try_parse_from(["mbaf", "train", "--config", "c.json", "--variant", "zz"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn train_rejects_two_variants() {
        let cli = Cli::try_parse_from(["mbaf", "train", "--config", "c.json", "--variant", "na,ca"]).unwrap();
        assert_eq!(run(cli).unwrap_err().exit_code(), 2);
    }
}
