//! `lexspread`: measurement pipeline for lexical innovation diffusion in
//! threaded online communities.
//!
//! Stages can run one by one (`ingest`, `graphs`, `innovations`,
//! `trajectories`, `analyze`, `predict`), end to end (`all`), or against a
//! generated corpus (`simulate`). Staged commands read the artifacts of
//! earlier stages from the output directory.
//!
//! Exit codes: 0 success, 1 pipeline error, 2 usage error.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lexspread::corpus::{ingest_path, CorpusStore, IngestConfig, IngestReport};
use lexspread::innovations::{detect_innovations, Lexicon};
use lexspread::pipeline::{
    compute_bins, predict_from_artifacts, read_innovations, run_all, write_adoption_table,
    write_all_artifacts, write_analysis_report, write_corpus_summary, write_graph_artifacts,
    write_innovations, write_prediction_report, write_synth_output, write_tie_distribution,
    write_trajectories, PipelineParams,
};
use lexspread::synthcommunity::{generate, SynthConfig};
use lexspread::trajectories::{build_records, label_innovations};

#[derive(Parser)]
#[command(name = "lexspread", version, about = "Lexical innovation diffusion pipeline")]
struct Cli {
    /// Optional config file with `key = value` lines; command-line flags
    /// take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for stage artifacts.
    #[arg(long, global = true, env = "LEXSPREAD_OUT_DIR")]
    out_dir: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Master seed for all randomised steps.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Corpus in JSONL format (one post per line), optionally gzipped.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Minimum monthly active users for a bin to be retained.
    #[arg(long)]
    min_active_users: Option<usize>,

    /// Skip thread roots and keep only comments.
    #[arg(long)]
    exclude_roots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the corpus, bin it by month and report what was kept.
    Ingest(InputArgs),
    /// Build per-month interaction graphs, tie strengths and centralities.
    Graphs {
        #[command(flatten)]
        input: InputArgs,
        /// Max distance between two posts in a thread to count as an
        /// interaction.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Detect innovations from a lexicon of nonstandard terms.
    Innovations {
        #[command(flatten)]
        input: InputArgs,
        /// Lexicon file, one lowercase term per line.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Minimum total occurrences for a term to qualify.
        #[arg(long)]
        min_count: Option<u64>,
    },
    /// Compute dissemination and tie-strength trajectories and labels.
    Trajectories {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Adoption analysis, innovator profile and population structure.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        window: Option<usize>,
        /// Tie strength at or above which a user counts as strong-tie.
        #[arg(long)]
        strong_threshold: Option<f64>,
        /// Tie strength at or below which a user counts as weak-tie.
        #[arg(long)]
        weak_threshold: Option<f64>,
    },
    /// Cross-validated success prediction from trajectory prefixes.
    Predict {
        /// Trajectory prefix length used as features.
        #[arg(long)]
        k: Option<usize>,
        /// Number of cross-validation runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Training fraction per run.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Generate a synthetic community with planted innovations.
    Simulate {
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        months: Option<usize>,
        /// Number of planted successful innovations.
        #[arg(long)]
        driven: Option<usize>,
        /// Number of planted fading innovations.
        #[arg(long)]
        noise: Option<usize>,
    },
    /// Run every stage end to end and write all artifacts.
    All {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        min_count: Option<u64>,
        #[arg(long)]
        strong_threshold: Option<f64>,
        #[arg(long)]
        weak_threshold: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        split: Option<f64>,
    },
}

/// `key = value` config file; flags override its entries.
struct Config(HashMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Config> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config file `{}`", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .with_context(|| format!("config line {}: expected `key = value`", i + 1))?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Config(map))
    }

    /// Flag value if given, else config entry, else `default`.
    fn get<T: FromStr + Clone>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.0.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| anyhow::anyhow!("config key `{key}`: cannot parse `{raw}`")),
            None => Ok(default),
        }
    }

    fn get_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow::anyhow!("config key `{key}`: cannot parse `{raw}`")),
            None => Ok(None),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn ingest(args: &InputArgs, config: &Config) -> Result<(CorpusStore, IngestReport)> {
    let input = config
        .get_opt("input", args.input.clone())?
        .context("an --input corpus is required")?;
    let ingest_config = IngestConfig {
        community_name: input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "community".to_string()),
        min_active_users: config.get("min_active_users", args.min_active_users, 200)?,
        include_thread_roots: !args.exclude_roots,
    };
    let (store, report) = ingest_path(&input, &ingest_config)?;
    eprintln!(
        "ingested {} posts over {} months ({} users); dropped {} sparse bins, {} malformed lines",
        store.posts.len(),
        store.bins.len(),
        store.users.len(),
        report.dropped_bins,
        report.malformed
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok((store, report))
}

fn load_lexicon(flag: Option<PathBuf>, config: &Config) -> Result<Lexicon> {
    let path = config
        .get_opt("lexicon", flag)?
        .context("a --lexicon file is required")?;
    let lexicon = Lexicon::load(&path)?;
    if lexicon.dropped > 0 {
        eprintln!("lexicon: dropped {} non-alphabetic entries", lexicon.dropped);
    }
    Ok(lexicon)
}

fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let out_dir = config
        .get_opt("out_dir", cli.out_dir.clone())?
        .unwrap_or_else(|| PathBuf::from("lexspread_out"));
    if let Some(workers) = config.get_opt("workers", cli.workers)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("worker pool already initialised")?;
    }
    let seed = config.get("seed", cli.seed, 42)?;

    let mut params = PipelineParams {
        seed,
        ..Default::default()
    };

    match cli.command {
        Command::Ingest(args) => {
            let (store, report) = ingest(&args, &config)?;
            let path = write_corpus_summary(&store, &report, &out_dir)?;
            println!("wrote {}", path.display());
        }
        Command::Graphs { input, window } => {
            params.window = config.get("window", window, params.window)?;
            let (store, _) = ingest(&input, &config)?;
            let bins = compute_bins(&store, &params);
            let dir = write_graph_artifacts(&store, &bins, &out_dir)?;
            println!("wrote {} ({} monthly graphs)", dir.display(), bins.graphs.len());
        }
        Command::Innovations {
            input,
            lexicon,
            min_count,
        } => {
            params.min_count = config.get("min_count", min_count, params.min_count)?;
            let (store, _) = ingest(&input, &config)?;
            let lexicon = load_lexicon(lexicon, &config)?;
            let candidates = detect_innovations(&store, &lexicon, &params.detection())?;
            let path = write_innovations(&store, &candidates, &out_dir)?;
            println!("wrote {} ({} innovations)", path.display(), candidates.len());
        }
        Command::Trajectories { input, window } => {
            params.window = config.get("window", window, params.window)?;
            let (store, _) = ingest(&input, &config)?;
            let candidates = read_innovations(&store, &out_dir)?;
            let bins = compute_bins(&store, &params);
            let mut records = build_records(candidates, &store, &bins.ties)?;
            let summary = label_innovations(&mut records)?;
            let path = write_trajectories(&records, &out_dir)?;
            println!(
                "wrote {} ({} successful, {} unsuccessful, {} excluded)",
                path.display(),
                summary.n_successful,
                summary.n_unsuccessful,
                summary.n_excluded
            );
        }
        Command::Analyze {
            input,
            window,
            strong_threshold,
            weak_threshold,
        } => {
            params.window = config.get("window", window, params.window)?;
            params.strong_threshold =
                config.get("strong_threshold", strong_threshold, params.strong_threshold)?;
            params.weak_threshold =
                config.get("weak_threshold", weak_threshold, params.weak_threshold)?;
            let (store, _) = ingest(&input, &config)?;
            let candidates = read_innovations(&store, &out_dir)?;
            let bins = compute_bins(&store, &params);
            let mut records = build_records(candidates, &store, &bins.ties)?;
            let summary = label_innovations(&mut records)?;
            let table =
                lexspread::analysis::adoption_table(&records, &bins.ties, &params.adoption(), params.max_k);
            let profile = match lexspread::analysis::innovator_profile(
                &store,
                &bins.ties,
                &bins.centralities,
                &records,
            ) {
                Ok(p) => Some(p),
                Err(lexspread::PipelineError::SmallData { got, required }) => {
                    eprintln!(
                        "skipping innovator profile: {got} innovations, {required} required"
                    );
                    None
                }
                Err(e) => return Err(e.into()),
            };
            let correlations =
                lexspread::analysis::metric_correlations(&store, &bins.ties, &bins.centralities);
            let population = lexspread::analysis::population_summary(&bins.ties)?;
            write_adoption_table(&table, &out_dir)?;
            write_tie_distribution(&population, &out_dir)?;
            let path =
                write_analysis_report(&summary, profile.as_ref(), &correlations, &population, &out_dir)?;
            println!("wrote {}", path.display());
        }
        Command::Predict { k, runs, split } => {
            params.predict_k = config.get("k", k, params.predict_k)?;
            params.runs = config.get("runs", runs, params.runs)?;
            params.train_fraction = config.get("split", split, params.train_fraction)?;
            let report = predict_from_artifacts(&out_dir, &params)?;
            let path = write_prediction_report(std::slice::from_ref(&report), &out_dir)?;
            println!(
                "wrote {} (k={}, model F1 {:.3} vs baseline {:.3})",
                path.display(),
                report.k,
                report.mean_model.f1,
                report.mean_baseline.f1
            );
        }
        Command::Simulate {
            users,
            months,
            driven,
            noise,
        } => {
            let users = config.get("users", users, 560)?;
            let months = config.get("months", months, 36)?;
            let driven = config.get("driven", driven, 110)?;
            let noise = config.get("noise", noise, 110)?;
            let synth_config = SynthConfig::standard(users, months, driven, noise, seed);
            let output = generate(&synth_config)?;
            let path = write_synth_output(&output, &out_dir)?;
            println!(
                "wrote {} ({} posts, {} planted terms)",
                path.display(),
                output.n_posts,
                output.ground_truth.len()
            );
        }
        Command::All {
            input,
            lexicon,
            window,
            min_count,
            strong_threshold,
            weak_threshold,
            k,
            runs,
            split,
        } => {
            params.window = config.get("window", window, params.window)?;
            params.min_count = config.get("min_count", min_count, params.min_count)?;
            params.strong_threshold =
                config.get("strong_threshold", strong_threshold, params.strong_threshold)?;
            params.weak_threshold =
                config.get("weak_threshold", weak_threshold, params.weak_threshold)?;
            params.predict_k = config.get("k", k, params.predict_k)?;
            params.runs = config.get("runs", runs, params.runs)?;
            params.train_fraction = config.get("split", split, params.train_fraction)?;
            let (store, report) = ingest(&input, &config)?;
            let lexicon = load_lexicon(lexicon, &config)?;
            let output = run_all(&store, &lexicon, &params)?;
            write_all_artifacts(&store, &report, &output, &out_dir)?;
            println!(
                "wrote artifacts to {} ({} innovations; {} successful, {} unsuccessful)",
                out_dir.display(),
                output.records.len(),
                output.label_summary.n_successful,
                output.label_summary.n_unsuccessful
            );
            if output.prediction.is_none() {
                eprintln!("skipping prediction: too few labelled innovations");
            }
        }
    }
    Ok(())
}
