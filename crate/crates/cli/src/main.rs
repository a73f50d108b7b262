use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pedrisk_core::config::RunConfig;
use pedrisk_core::Error;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "pedrisk", version, about = "Pedestrian spatiotemporal risk-level prediction")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Top-level seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. --set epochs=50.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate encounters and write their ego-frame trajectories.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Which split to simulate (`train` or `test`).
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Smooth trajectories and write per-frame feature states.
    Features {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the trajectories as given, without LOWESS smoothing.
        #[arg(long)]
        no_smooth: bool,
    },
    /// Train the LSTM trajectory predictor.
    TrainPredictor {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_smooth: bool,
    },
    /// Cross-validated ADE for every prediction window in the configured range.
    SweepWindow {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_smooth: bool,
    },
    /// Cluster feature states and attach risk levels.
    Cluster {
        #[arg(long)]
        features: PathBuf,
        /// Output directory for the model and the assignment CSV.
        #[arg(long)]
        out: PathBuf,
        /// `kpca-kmc` (deployable model) or `spectral` (assignments only).
        #[arg(long)]
        method: Option<String>,
    },
    /// AIC, BIC and silhouette for every K in a range.
    SelectK {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        method: Option<String>,
    },
    /// Silhouettes of kernel PCA + k-means and spectral clustering at K.
    CompareMethods {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train the SVM risk classifier on a feature CSV with a risk column.
    TrainClassifier {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a cross-validation report (`kernel,variant,fold,accuracy,preds_per_sec`).
        #[arg(long)]
        cv_out: Option<PathBuf>,
        /// Kernels to cross-validate, comma separated, or `all`.
        #[arg(long)]
        kernels: Option<String>,
    },
    /// Predict future positions and risk levels after each trajectory.
    Predict {
        #[arg(long)]
        lstm: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Observed frames per trajectory; defaults to the whole trajectory.
        #[arg(long)]
        observe: Option<usize>,
        #[arg(long)]
        no_smooth: bool,
    },
    /// End-to-end evaluation report. Without models and trajectories, runs the
    /// whole demo chain from the configuration.
    Evaluate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires_all = ["classifier", "tracks"])]
        lstm: Option<PathBuf>,
        #[arg(long, requires_all = ["lstm", "tracks"])]
        classifier: Option<PathBuf>,
        #[arg(long, requires_all = ["lstm", "classifier"])]
        tracks: Option<PathBuf>,
        #[arg(long)]
        no_smooth: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Features { .. } => "features",
            Command::TrainPredictor { .. } => "train-predictor",
            Command::SweepWindow { .. } => "sweep-window",
            Command::Cluster { .. } => "cluster",
            Command::SelectK { .. } => "select-k",
            Command::CompareMethods { .. } => "compare-methods",
            Command::TrainClassifier { .. } => "train-classifier",
            Command::Predict { .. } => "predict",
            Command::Evaluate { .. } => "evaluate",
        }
    }
}

fn load_config(g: &Global) -> pedrisk_core::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &g.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    let result = load_config(&cli.global).and_then(|cfg| commands::run(&cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// `<out>.manifest` next to a file output, `<out>/manifest.txt` for a directory.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.txt")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest");
        out.with_file_name(name)
    }
}
