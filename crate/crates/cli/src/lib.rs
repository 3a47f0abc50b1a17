//! Command-line front end for iterated consensus clustering.
//!
//! The binary is a thin wrapper around [`run`]; everything else is exposed
//! for tests.

pub mod commands;
pub mod config;
pub mod error;
pub mod heatmap;
pub mod manifest;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::run;
pub use error::{CliError, Result};

use config::Settings;

#[derive(Debug, Parser)]
#[command(
    name = "icc",
    version,
    about = "Estimate the number of clusters in a dataset by iterated consensus clustering"
)]
pub struct Cli {
    /// File of `key = value` settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate ensemble, consensus and drop tolerance until the Perron cluster is visible.
    EstimateK {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Run exactly N iterations, ignoring the stopping rule.
        #[arg(long, value_name = "N")]
        iterations: Option<usize>,
        /// Also write consensus heatmaps for every iteration.
        #[arg(long)]
        heatmaps: bool,
    },
    /// One ensemble pass without drop tolerance or iteration.
    Basic {
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Spectrum of the random walk on any similarity matrix.
    Spectrum {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// consensus | gaussian | cosine | adjacency
        #[arg(long, default_value = "gaussian")]
        kind: String,
        /// Largest cluster count searched for the Perron gap.
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Render a consensus matrix as a grayscale PGM image.
    Heatmap {
        /// Consensus matrix in MatrixMarket format.
        #[arg(long)]
        consensus: PathBuf,
        /// identity | cluster-sorted
        #[arg(long, default_value = "identity")]
        ordering: String,
        /// One cluster id per line, required for cluster-sorted ordering.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Purity of NCut, NJW and PIC on consensus, Gaussian and cosine similarities.
    Eval {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Ground-truth labels, one per observation.
        #[arg(long)]
        labels: PathBuf,
        /// Consensus matrix to evaluate alongside the baselines.
        #[arg(long)]
        consensus: Option<PathBuf>,
        /// Number of clusters; defaults to the number of label classes.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Gaussian or cosine similarity spectrum for comparison with the consensus.
    Baseline {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// gaussian | cosine
        #[arg(long, default_value = "gaussian")]
        kind: String,
        #[arg(long)]
        k_max: Option<usize>,
    },
}

/// Flags mirroring the configuration file keys.
#[derive(Debug, Default, Args)]
pub struct PipelineArgs {
    /// Data file: delimited text, or MatrixMarket (`.mtx`) with observations as columns.
    #[arg(long)]
    pub input: Option<String>,
    /// Orientation of delimited text: rows | columns are observations.
    #[arg(long)]
    pub layout: Option<String>,
    /// Hypothesized cluster counts, e.g. `6:10` or `3,5,8`. Choose values above
    /// the largest plausible number of clusters.
    #[arg(long)]
    pub ktilde: Option<String>,
    /// Drop tolerance in [0, 0.5).
    #[arg(long)]
    pub tau: Option<String>,
    /// Smallest eigenvalue gap that makes the Perron cluster visible.
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub max_iterations: Option<String>,
    /// Comma list of kmeans-random, pddp, pddp-kmeans, emgm, or `all`.
    #[arg(long)]
    pub algorithms: Option<String>,
    /// Comma list of raw, pca, svd, nmf, or `all`.
    #[arg(long)]
    pub representations: Option<String>,
    /// variance | fraction
    #[arg(long)]
    pub rank_policy: Option<String>,
    /// Explicit reduction ranks, e.g. `5,10,20`.
    #[arg(long)]
    pub ranks: Option<String>,
    /// euclidean | spherical (for the first pass; later passes are spherical).
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Use exp(-d²/2σ²) instead of exp(-d/2σ²) for the Gaussian similarity.
    #[arg(long)]
    pub squared_exponent: bool,
    /// Representations used when clustering the consensus matrix: raw | all.
    #[arg(long)]
    pub iterate_representations: Option<String>,
    /// Apply tf-idf weighting with unit-length documents before clustering.
    #[arg(long)]
    pub tfidf: bool,
}

impl PipelineArgs {
    pub fn to_settings(&self) -> Settings {
        let mut s = Settings::default();
        let pairs = [
            ("input", &self.input),
            ("layout", &self.layout),
            ("ktilde", &self.ktilde),
            ("tau", &self.tau),
            ("theta", &self.theta),
            ("max_iterations", &self.max_iterations),
            ("algorithms", &self.algorithms),
            ("representations", &self.representations),
            ("rank_policy", &self.rank_policy),
            ("ranks", &self.ranks),
            ("metric", &self.metric),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("iterate_representations", &self.iterate_representations),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, v.clone());
            }
        }
        if self.squared_exponent {
            s.set("squared_exponent", "true");
        }
        s
    }
}
