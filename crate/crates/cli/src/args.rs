use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Solver;

#[derive(Debug, Parser)]
#[command(
    name = "ftir-decomp",
    version,
    about = "Template and treatment-effect decomposition of replicate spectra"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate pre- and post-treatment spectra plus the ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the template from pre-treatment spectra.
    Template {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pre: PathBuf,
    },
    /// Fit effect magnitudes and the shared pattern with the template fixed.
    Effect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        post: PathBuf,
        /// Defaults to `<out>/template.json`.
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Rotate the fitted pattern towards its sparsest admissible direction.
    Sparsify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Defaults to `<out>/effect.json`.
        #[arg(long)]
        effect: Option<PathBuf>,
        /// Defaults to `<out>/template.json`.
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Multiplicative scatter correction against the mean spectrum.
    Msc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pre: PathBuf,
    },
    /// Template, effect and sparsify stages in sequence.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        /// Also run the scatter-correction baseline on the pre-treatment set.
        #[arg(long)]
        msc: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
    /// Signal labels to drop before fitting.
    #[arg(long, value_delimiter = ',')]
    pub exclude_labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub grid_theta: Option<usize>,
    #[arg(long)]
    pub grid_phi: Option<usize>,
    #[arg(long)]
    pub cos_phi_floor: Option<f64>,
}

impl SolverArgs {
    pub fn apply(&self, mut solver: Solver) -> Solver {
        if let Some(v) = self.tol {
            solver.tol = v;
        }
        if let Some(v) = self.max_iter {
            solver.max_iter = v;
        }
        if let Some(v) = self.grid_theta {
            solver.grid_theta = v;
        }
        if let Some(v) = self.grid_phi {
            solver.grid_phi = v;
        }
        if let Some(v) = self.cos_phi_floor {
            solver.cos_phi_floor = v;
        }
        solver
    }
}
