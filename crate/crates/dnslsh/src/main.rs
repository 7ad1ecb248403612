//! `dnslsh` — DNS covert-channel detection pipeline.
//!
//! Thin argument layer over the library: every subcommand parses flags,
//! resolves the configuration (defaults < config file < flags), and calls
//! one `pipeline::run_*` operation. Exit codes: 0 success, 2 usage error,
//! 3 data error, 4 config/metadata mismatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use dnslsh::ingest::Behavior;
use dnslsh::pipeline::{
    run_compare, run_evaluate, run_featurize, run_ingest, run_predict, run_sweep, run_synth,
    run_train, EvalMode, FileConfig, PathsConfig, PipelineConfig,
};
use dnslsh::synth::{Alphabet, SynthKind, SynthProfile};
use dnslsh::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dnslsh",
    version,
    about = "Detect DNS covert channels with locality-sensitive hashing",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration knobs shared by the pipeline subcommands. Precedence:
/// built-in defaults < `--config` file < explicit flags.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML config file (flags override it)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// RNG seed for training, splits and sampling
    #[arg(long)]
    seed: Option<u64>,
    /// Queries per window, in [2, 1000]
    #[arg(long, value_name = "N")]
    window_size: Option<usize>,
    /// Subdomain segments (1-3); defaults to 2, or 3 for behavioral tasks
    #[arg(long, value_name = "K")]
    segments: Option<u8>,
    /// Hash the whole subdomain as an extra slot (true/false)
    #[arg(long, value_name = "BOOL")]
    include_global: Option<bool>,
    /// Digest bit threshold: median or mean
    #[arg(long, value_name = "MODE")]
    threshold_mode: Option<String>,
    /// Characters stripped from subdomains before hashing, as one string
    #[arg(long, value_name = "CHARS")]
    delimiters: Option<String>,
    /// Classification task: binary, family, behavior-compound, behavior-action
    #[arg(long, value_name = "TASK")]
    task: Option<String>,
    /// Trees in the forest
    #[arg(long, value_name = "COUNT")]
    trees: Option<usize>,
    /// Maximum tree depth (unlimited when omitted)
    #[arg(long, value_name = "DEPTH")]
    max_depth: Option<u32>,
    /// Minimum samples per leaf
    #[arg(long, value_name = "COUNT")]
    min_samples_leaf: Option<usize>,
    /// Features tried per split: sqrt, all, or a count
    #[arg(long, value_name = "RULE")]
    split_features: Option<String>,
    /// Disable bootstrap sampling (train each tree on the full set)
    #[arg(long)]
    no_bootstrap: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<(PipelineConfig, PathsConfig)> {
        let mut config = PipelineConfig::default();
        let mut paths = PathsConfig::default();
        if let Some(path) = &self.config {
            let file = FileConfig::load(path)?;
            file.apply(&mut config)?;
            paths = file.paths.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(n) = self.window_size {
            config.window_size = n;
        }
        if let Some(k) = self.segments {
            config.segments = Some(k);
        }
        if let Some(g) = self.include_global {
            config.include_global = g;
        }
        if let Some(mode) = &self.threshold_mode {
            config.threshold_mode = mode.parse()?;
        }
        if let Some(d) = &self.delimiters {
            config.delimiters = d.chars().collect();
        }
        if let Some(task) = &self.task {
            config.task = task.parse()?;
        }
        if let Some(t) = self.trees {
            config.forest.tree_count = t;
        }
        if let Some(d) = self.max_depth {
            config.forest.max_depth = Some(d);
        }
        if let Some(m) = self.min_samples_leaf {
            config.forest.min_samples_leaf = m;
        }
        if let Some(rule) = &self.split_features {
            config.forest.split_features = rule.parse()?;
        }
        if self.no_bootstrap {
            config.forest.bootstrap = false;
        }
        config.validate()?;
        Ok((config, paths))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convert PCAP captures and/or query CSVs into the canonical query CSV
    Ingest {
        /// Input files; `.pcap`/`.pcapng`/`.cap` are parsed as captures,
        /// anything else as query CSV
        #[arg(value_name = "INPUT", required = true)]
        inputs: Vec<PathBuf>,
        /// Output query CSV
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
        /// Stamp this malware family (or `legitimate`) onto unlabeled records
        #[arg(long, value_name = "NAME")]
        family: Option<String>,
        /// Stamp this behavior onto unlabeled records (requires --family)
        #[arg(long, value_name = "BEHAVIOR")]
        behavior: Option<String>,
    },
    /// Hash queries, window them per domain stream, and write feature vectors
    Featurize {
        #[command(flatten)]
        config: ConfigArgs,
        /// Input query CSV
        #[arg(short, long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Output feature CSV (metadata sidecar written alongside)
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Public-suffix rules file (bundled snapshot when omitted)
        #[arg(long, value_name = "FILE")]
        suffix_file: Option<PathBuf>,
    },
    /// Train a random forest on a feature file
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Input feature CSV
        #[arg(short, long, value_name = "FILE")]
        features: Option<PathBuf>,
        /// Output model file
        #[arg(short, long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Stratified fraction used for training; the rest is held out
        #[arg(long, value_name = "F", default_value_t = 1.0)]
        train_fraction: f64,
        /// Write held-out rows to this feature CSV (needs --train-fraction < 1)
        #[arg(long, value_name = "FILE")]
        holdout: Option<PathBuf>,
    },
    /// Classify feature vectors with a trained model
    Predict {
        /// Model file
        #[arg(short, long, value_name = "FILE")]
        model: PathBuf,
        /// Input feature CSV
        #[arg(short, long, value_name = "FILE")]
        features: PathBuf,
        /// Output predictions CSV
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Score a model against labeled features, or sweep window sizes
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model file (second stage in two-step mode)
        #[arg(short, long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Labeled feature CSV
        #[arg(short, long, value_name = "FILE")]
        features: Option<PathBuf>,
        /// direct, two-step, or per-file
        #[arg(long, value_name = "MODE", default_value = "direct")]
        mode: String,
        /// Binary model for the first stage of two-step evaluation
        #[arg(long, value_name = "FILE")]
        binary_model: Option<PathBuf>,
        /// Feature CSV of legitimate windows used to balance malicious-only
        /// evaluation sets
        #[arg(long, value_name = "FILE")]
        benign_pool: Option<PathBuf>,
        /// Sweep window sizes 5,10,20,30,40,50: featurize + train + score a
        /// labeled query CSV (--input) and write a metrics table (--output)
        #[arg(long)]
        sweep: bool,
        /// Labeled query CSV (sweep mode)
        #[arg(short, long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Metrics CSV to write (sweep mode)
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Public-suffix rules file (sweep mode; bundled snapshot when omitted)
        #[arg(long, value_name = "FILE")]
        suffix_file: Option<PathBuf>,
    },
    /// Generate synthetic benign or tunnel traffic
    Synth {
        /// benign-static, benign-cdn, tunnel-upload, tunnel-download, tunnel-idle
        #[arg(long, value_name = "KIND")]
        kind: String,
        /// Output query CSV
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
        /// Also write the queries as a PCAP capture
        #[arg(long, value_name = "FILE")]
        pcap: Option<PathBuf>,
        /// Number of queries
        #[arg(long, value_name = "N")]
        queries: Option<usize>,
        /// Minimum payload length (cleaned characters)
        #[arg(long, value_name = "N")]
        length_min: Option<usize>,
        /// Maximum payload length (cleaned characters)
        #[arg(long, value_name = "N")]
        length_max: Option<usize>,
        /// base64url, base32, or hex
        #[arg(long, value_name = "ALPHABET")]
        alphabet: Option<String>,
        /// Benign kinds: repeat probability; tunnels: random-character fraction
        #[arg(long, value_name = "F")]
        randomness: Option<f64>,
        /// Registered domain the queries target
        #[arg(long, value_name = "DOMAIN", default_value = "example.com")]
        domain: String,
        /// RNG seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Hash two strings and print their per-slot digests and scores
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// First string
        a: String,
        /// Second string
        b: String,
    },
}

/// Pick the flag value, fall back to the config file's `[paths]` entry, or
/// fail with a usage error naming the missing flag.
fn need(flag: Option<PathBuf>, fallback: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(fallback)
        .ok_or_else(|| Error::InvalidArgument(format!("missing --{name} (or [paths] {name} in the config file)")))
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Ingest {
            inputs,
            output,
            family,
            behavior,
        } => {
            let behavior = behavior
                .as_deref()
                .map(|b| b.parse::<Behavior>())
                .transpose()?;
            run_ingest(&inputs, &output, family.as_deref(), behavior)
        }
        Command::Featurize {
            config,
            input,
            output,
            suffix_file,
        } => {
            let (config, paths) = config.resolve()?;
            let input = need(input, paths.input, "input")?;
            let output = need(output, paths.output, "output")?;
            let suffix = suffix_file.or(paths.suffix_file);
            run_featurize(&config, &input, &output, suffix.as_deref())
        }
        Command::Train {
            config,
            features,
            model,
            train_fraction,
            holdout,
        } => {
            let (config, paths) = config.resolve()?;
            let features = need(features, paths.input, "features")?;
            let model = need(model, paths.model, "model")?;
            run_train(&config, &features, &model, train_fraction, holdout.as_deref())
        }
        Command::Predict {
            model,
            features,
            output,
        } => run_predict(&model, &features, &output),
        Command::Evaluate {
            config,
            model,
            features,
            mode,
            binary_model,
            benign_pool,
            sweep,
            input,
            output,
            suffix_file,
        } => {
            let (config, paths) = config.resolve()?;
            if sweep {
                let input = need(input, paths.input, "input")?;
                let output = need(output, paths.output, "output")?;
                let suffix = suffix_file.or(paths.suffix_file);
                run_sweep(&config, &input, &output, suffix.as_deref())
            } else {
                let mode: EvalMode = mode.parse()?;
                let model = need(model, paths.model, "model")?;
                let features = need(features, paths.input, "features")?;
                let binary_model = binary_model.or(paths.binary_model);
                let benign_pool = benign_pool.or(paths.benign_pool);
                if mode == EvalMode::TwoStep && binary_model.is_none() {
                    return Err(Error::InvalidArgument(
                        "two-step evaluation needs --binary-model for the first stage".into(),
                    ));
                }
                run_evaluate(
                    &model,
                    binary_model.as_deref(),
                    &features,
                    mode,
                    benign_pool.as_deref(),
                    config.seed,
                )
            }
        }
        Command::Synth {
            kind,
            output,
            pcap,
            queries,
            length_min,
            length_max,
            alphabet,
            randomness,
            domain,
            seed,
        } => {
            let kind: SynthKind = kind.parse()?;
            let mut profile = SynthProfile::for_kind(kind, seed);
            if let Some(q) = queries {
                profile.queries = q;
            }
            if let Some(min) = length_min {
                profile.length_min = min;
            }
            if let Some(max) = length_max {
                profile.length_max = max;
            }
            if let Some(a) = &alphabet {
                profile.alphabet = a.parse::<Alphabet>()?;
            }
            if let Some(r) = randomness {
                profile.randomness = r;
            }
            profile.domain = domain;
            run_synth(&profile, &output, pcap.as_deref())
        }
        Command::Compare { config, a, b } => {
            let (config, _) = config.resolve()?;
            let (report, _score) = run_compare(&config, &a, &b)?;
            Ok(report)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => print!("{report}"),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
