use std::path::PathBuf;
use std::process::ExitCode;

use abprofile::config::parse_override;
use abprofile::pipeline::compare_salient_files;
use abprofile::{CliError, Pipeline, RunConfig, RunOptions, Stage};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abprofile", version, about = "Contrast a targeting antibody set against a reference set")]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    set: Vec<(String, String)>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling iterations.
    #[arg(long)]
    k: Option<usize>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Skip stages whose inputs, parameters and outputs are unchanged.
    #[arg(long)]
    resume: bool,
    /// Run even if upstream artifacts changed since they were produced.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    common: Common,
    /// Feature mask for classify; repeatable.
    #[arg(long)]
    mask: Vec<String>,
    /// Model for classify; repeatable.
    #[arg(long)]
    model: Vec<String>,
    /// Design-tree stop rule: guard or global.
    #[arg(long)]
    stop: Option<String>,
    /// Write heatmap PNGs next to the similarity CSVs.
    #[arg(long)]
    png: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse inputs and cluster representatives.
    Prepare(StageArgs),
    /// Chothia-number every chain.
    Number(StageArgs),
    /// Germline, canonical, pI and motif features; fingerprints; sampling.
    Annotate(StageArgs),
    /// Similarity matrices and rank-sum tests.
    Similarity(StageArgs),
    /// Fisher screen, forest importance, biasing and association.
    Salient(StageArgs),
    /// Cross-validated AUC benchmark.
    Classify(StageArgs),
    /// Design-recommendation tree.
    Recommend(StageArgs),
    /// Every stage in order.
    RunAll(StageArgs),
    /// Overlap of two salient reports.
    CompareSalient {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

impl StageArgs {
    /// Dedicated flags become overrides applied after `--set`.
    fn overrides(&self) -> Vec<(String, String)> {
        let c = &self.common;
        let mut o = c.set.clone();
        let mut push = |k: &str, v: String| o.push((k.to_string(), v));
        if let Some(p) = &c.out {
            push("output", p.display().to_string());
        }
        if let Some(s) = c.seed {
            push("seed", s.to_string());
        }
        if let Some(k) = c.k {
            push("k", k.to_string());
        }
        if let Some(t) = c.threads {
            push("threads", t.to_string());
        }
        if !self.mask.is_empty() {
            push("masks", self.mask.join(","));
        }
        if !self.model.is_empty() {
            push("models", self.model.join(","));
        }
        if let Some(s) = &self.stop {
            push("stop", s.clone());
        }
        if self.png {
            push("png", "true".into());
        }
        o
    }
}

fn run_stages(args: &StageArgs, stage: Option<Stage>) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.common.config.as_deref(), &args.overrides())?;
    let threads = cfg.threads;
    let opts = RunOptions { resume: args.common.resume, force: args.common.force };
    let mut p = Pipeline::new(cfg, opts)?;
    abprofile_core::par::with_threads(threads, move || match stage {
        Some(s) => p.run(s),
        None => p.run_all(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let res = match &cli.command {
        Command::Prepare(a) => run_stages(a, Some(Stage::Prepare)),
        Command::Number(a) => run_stages(a, Some(Stage::Number)),
        Command::Annotate(a) => run_stages(a, Some(Stage::Annotate)),
        Command::Similarity(a) => run_stages(a, Some(Stage::Similarity)),
        Command::Salient(a) => run_stages(a, Some(Stage::Salient)),
        Command::Classify(a) => run_stages(a, Some(Stage::Classify)),
        Command::Recommend(a) => run_stages(a, Some(Stage::Recommend)),
        Command::RunAll(a) => run_stages(a, None),
        Command::CompareSalient { a, b, out } => compare_salient_files(a, b, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("abprofile: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
