//! JSON run configuration. Every field is optional; missing generator fields
//! fall back to the built-in simulation defaults.

use std::fs;
use std::path::{Path, PathBuf};

use ftir_decomp::io::read_spectra_csv;
use ftir_decomp::linalg::standardize;
use ftir_decomp::model::{builtin_pattern, builtin_template, default_sigma, SIMULATION_PRE_COUNT};
use ftir_decomp::{BcdOptions, GenerativeParams, Law, WavenumberGrid};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub grid: Option<WavenumberGrid>,
    pub template_file: Option<PathBuf>,
    pub template_builtin: Option<bool>,
    pub scale_law: Option<Law>,
    pub offset_law: Option<Law>,
    pub sigma: Option<f64>,
    pub pattern_file: Option<PathBuf>,
    pub pattern_builtin: Option<bool>,
    pub effects: Option<Vec<f64>>,
    pub replicates: Option<usize>,
    pub n_pre: Option<usize>,
    pub seed: Option<u64>,
    pub exclude_labels: Option<Vec<String>>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub grid_theta: Option<usize>,
    pub grid_phi: Option<usize>,
    pub cos_phi_floor: Option<f64>,
}

/// Solver settings after defaults and command-line overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solver {
    pub tol: f64,
    pub max_iter: usize,
    pub grid_theta: usize,
    pub grid_phi: usize,
    pub cos_phi_floor: f64,
}

impl Default for Solver {
    fn default() -> Self {
        let bcd = BcdOptions::default();
        Self {
            tol: bcd.tol,
            max_iter: bcd.max_iter,
            grid_theta: 720,
            grid_phi: 360,
            cos_phi_floor: 0.5,
        }
    }
}

impl Solver {
    pub fn bcd(&self) -> BcdOptions {
        BcdOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Invalid(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(CliError::Invalid("max-iter must be at least 1".into()));
        }
        if !(self.cos_phi_floor > 0.0 && self.cos_phi_floor <= 1.0) {
            return Err(CliError::Invalid(format!(
                "cos-phi-floor must lie in (0, 1], got {}",
                self.cos_phi_floor
            )));
        }
        Ok(())
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.is_file() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for file in [&mut config.template_file, &mut config.pattern_file]
            .into_iter()
            .flatten()
        {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(config)
    }

    pub fn solver(&self) -> Solver {
        let d = Solver::default();
        Solver {
            tol: self.solver.tol.unwrap_or(d.tol),
            max_iter: self.solver.max_iter.unwrap_or(d.max_iter),
            grid_theta: self.solver.grid_theta.unwrap_or(d.grid_theta),
            grid_phi: self.solver.grid_phi.unwrap_or(d.grid_phi),
            cos_phi_floor: self.solver.cos_phi_floor.unwrap_or(d.cos_phi_floor),
        }
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre.unwrap_or(SIMULATION_PRE_COUNT)
    }

    /// Files the generator reads, for digesting.
    pub fn referenced_files(&self) -> Vec<(&'static str, PathBuf)> {
        let mut out = Vec::new();
        if let Some(p) = &self.template_file {
            out.push(("template_file", p.clone()));
        }
        if let Some(p) = &self.pattern_file {
            out.push(("pattern_file", p.clone()));
        }
        out
    }

    pub fn generative_params(&self) -> CliResult<GenerativeParams> {
        let defaults = GenerativeParams::simulation_default();
        if let Some(g) = self.grid {
            WavenumberGrid::new(g.start(), g.end(), g.count())?;
        }
        if self.template_file.is_some() && self.template_builtin == Some(true) {
            return Err(CliError::Invalid(
                "give either template_file or template_builtin, not both".into(),
            ));
        }
        if self.pattern_file.is_some() && self.pattern_builtin == Some(true) {
            return Err(CliError::Invalid(
                "give either pattern_file or pattern_builtin, not both".into(),
            ));
        }
        let (grid, template) = match &self.template_file {
            Some(path) => {
                let (grid, raw) = read_vector(path)?;
                if self.grid.is_some_and(|g| g != grid) {
                    return Err(CliError::Invalid(format!(
                        "grid in config disagrees with {}",
                        path.display()
                    )));
                }
                let template = standardize(&raw).ok_or_else(|| {
                    CliError::Invalid(format!("template in {} is constant", path.display()))
                })?;
                (grid, template)
            }
            None => {
                if self.template_builtin == Some(false) {
                    return Err(CliError::Invalid(
                        "template_builtin is false but no template_file given".into(),
                    ));
                }
                let grid = self.grid.unwrap_or(defaults.grid);
                (grid, builtin_template(&grid))
            }
        };
        let pattern = match &self.pattern_file {
            Some(path) => {
                let (pgrid, raw) = read_vector(path)?;
                if pgrid != grid {
                    return Err(CliError::Invalid(format!(
                        "{} is on a different grid",
                        path.display()
                    )));
                }
                let norm = raw.norm();
                if norm == 0.0 {
                    return Err(CliError::Invalid(format!(
                        "pattern in {} is zero",
                        path.display()
                    )));
                }
                Some(raw / norm)
            }
            None if self.pattern_builtin == Some(false) => None,
            None => Some(builtin_pattern(&grid)),
        };
        let params = GenerativeParams {
            sigma: self.sigma.unwrap_or_else(|| default_sigma(&template)),
            grid,
            template,
            scale_law: self.scale_law.clone().unwrap_or(defaults.scale_law),
            offset_law: self.offset_law.clone().unwrap_or(defaults.offset_law),
            pattern,
            effects: Some(
                self.effects
                    .clone()
                    .unwrap_or_else(|| defaults.effects.clone().unwrap()),
            ),
            replicates: self.replicates.unwrap_or(defaults.replicates),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Reads a one-column spectra CSV.
fn read_vector(path: &Path) -> CliResult<(WavenumberGrid, DVector<f64>)> {
    if !path.is_file() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let set = read_spectra_csv(file).map_err(|source| CliError::InvalidFile {
        path: path.to_path_buf(),
        source,
    })?;
    if set.len() != 1 {
        return Err(CliError::Invalid(format!(
            "{} must hold exactly one signal column, found {}",
            path.display(),
            set.len()
        )));
    }
    let grid = *set.grid();
    Ok((grid, set.into_signals().remove(0).values))
}
