use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use fundus_eval::ensemble::VoteConfig;
use fundus_eval::mask::OdRule;
use fundus_eval::ranking::WeightPreset;
use fundus_eval::report::{self, CommandError, EnsembleMode, Notes};

#[derive(Parser)]
#[command(name = "fundus-eval", version, about = "Optic disc/cup segmentation and glaucoma classification evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predicted masks against ground truth (Dice OD/OC, vCDR error).
    EvalSeg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reject gray levels other than 0, 128 and 255.
        #[arg(long)]
        strict_masks: bool,
        /// Count only disc-labelled pixels (128) as optic disc.
        #[arg(long)]
        disc_label_only: bool,
        /// JSON manifest pairing prediction ids with files.
        #[arg(long)]
        pred_manifest: Option<PathBuf>,
        /// JSON manifest pairing ground-truth ids with files.
        #[arg(long)]
        gt_manifest: Option<PathBuf>,
    },
    /// ROC, AUC and sensitivity at 0.85 specificity for a likelihood table.
    EvalClass {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Build a leaderboard from per-team metric means.
    Rank {
        #[arg(long)]
        metrics: PathBuf,
        /// eq3, table5 or three comma-separated weights (OD,OC,MAE).
        #[arg(long, default_value = "table5", value_parser = parse_weights)]
        weights: WeightPreset,
        /// Leaderboard CSV; a JSON copy is written with a .json extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse masks by voting or likelihoods by normalized averaging.
    Ensemble {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of inputs a pixel needs to exceed to be kept.
        #[arg(long, default_value_t = 0.5)]
        vote_threshold: f64,
        /// Keep pixels whose votes reach the threshold instead of exceeding it.
        #[arg(long)]
        at_least: bool,
        #[arg(long)]
        strict_masks: bool,
        /// Mask directories or likelihood CSVs.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Run the hypothesis tests listed in a TOML request file.
    Stats { request: PathBuf },
    /// Generate a synthetic cohort tree.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Masks,
    Scores,
}

fn parse_weights(s: &str) -> Result<WeightPreset, String> {
    s.parse().map_err(|e: fundus_eval::Error| e.to_string())
}

fn run(command: Command) -> anyhow::Result<Notes> {
    let notes = match command {
        Command::EvalSeg {
            pred,
            gt,
            out,
            strict_masks,
            disc_label_only,
            pred_manifest,
            gt_manifest,
        } => report::eval_seg(&report::EvalSegArgs {
            pred_dir: pred,
            gt_dir: gt,
            out,
            strict_masks,
            od_rule: if disc_label_only {
                OdRule::DiscLabelOnly
            } else {
                OdRule::CupAndDisc
            },
            pred_manifest,
            gt_manifest,
        }),
        Command::EvalClass {
            scores,
            labels,
            out,
            svg,
        } => report::eval_class(&report::EvalClassArgs {
            scores,
            labels,
            out,
            svg,
        }),
        Command::Rank {
            metrics,
            weights,
            out,
        } => report::rank(&report::RankArgs {
            metrics,
            weights,
            out,
        }),
        Command::Ensemble {
            mode,
            out,
            vote_threshold,
            at_least,
            strict_masks,
            inputs,
        } => {
            let vote = if at_least {
                VoteConfig::at_least(vote_threshold)
            } else {
                VoteConfig::more_than(vote_threshold)
            }
            .context("--vote-threshold")
            .map_err(|e| CommandError::Validation(vec![format!("{e:#}")]))?;
            report::ensemble(&report::EnsembleArgs {
                inputs,
                mode: match mode {
                    Mode::Masks => EnsembleMode::Masks,
                    Mode::Scores => EnsembleMode::Scores,
                },
                out,
                vote,
                strict_masks,
            })
        }
        Command::Stats { request } => report::stats(&request),
        Command::Synth { config, out, seed } => report::synth(&report::SynthArgs { config, out, seed }),
    }?;
    Ok(notes)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(notes) => {
            for n in notes {
                eprintln!("{n}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => match e.downcast_ref::<CommandError>() {
            Some(cmd) => {
                for line in cmd.lines() {
                    eprintln!("error: {line}");
                }
                ExitCode::from(cmd.exit_code())
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
