//! Wavenumber grids, spectra and stacks of spectra sharing a grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equidistant wavenumber axis in cm⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavenumberGrid {
    start: f64,
    end: f64,
    count: usize,
}

impl WavenumberGrid {
    pub fn new(start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 3 {
            return Err(Error::InvalidGrid(format!("count {count} < 3")));
        }
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::InvalidGrid(format!(
                "end ({end}) must exceed start ({start})"
            )));
        }
        Ok(Self { start, end, count })
    }

    /// The 650–4000 cm⁻¹ axis with 1798 points used by the handheld instrument.
    pub fn ftir_default() -> Self {
        Self {
            start: 650.0,
            end: 4000.0,
            count: 1798,
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.count - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        if j + 1 == self.count {
            self.end
        } else {
            self.start + j as f64 * self.step()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|j| self.point(j))
    }
}

/// One measured signal on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: WavenumberGrid,
    pub values: DVector<f64>,
    pub label: Option<String>,
}

impl Spectrum {
    pub fn new(grid: WavenumberGrid, values: DVector<f64>, label: Option<String>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::DimensionMismatch {
                expected: grid.count(),
                actual: values.len(),
                context: "spectrum values vs grid",
            });
        }
        Ok(Self {
            grid,
            values,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A stack of spectra sharing one grid; row `i` of [`SpectrumSet::matrix`] is signal `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSet {
    grid: WavenumberGrid,
    signals: Vec<Spectrum>,
}

impl SpectrumSet {
    pub fn new(grid: WavenumberGrid, signals: Vec<Spectrum>) -> Result<Self> {
        for s in &signals {
            if s.grid != grid {
                return Err(Error::InvalidGrid(
                    "all signals in a set must share the same grid".into(),
                ));
            }
            if s.values.len() != grid.count() {
                return Err(Error::DimensionMismatch {
                    expected: grid.count(),
                    actual: s.values.len(),
                    context: "spectrum values vs grid",
                });
            }
        }
        Ok(Self { grid, signals })
    }

    /// Builds a set from raw vectors, labelling them `s1`, `s2`, ...
    pub fn from_vectors(grid: WavenumberGrid, vectors: Vec<DVector<f64>>) -> Result<Self> {
        let signals = vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| Spectrum::new(grid, v, Some(format!("s{}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, signals)
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn signals(&self) -> &[Spectrum] {
        &self.signals
    }

    pub fn into_signals(self) -> Vec<Spectrum> {
        self.signals
    }

    /// Number of signals `n`.
    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Grid size `p`.
    pub fn dim(&self) -> usize {
        self.grid.count()
    }

    pub fn label(&self, i: usize) -> String {
        self.signals[i]
            .label
            .clone()
            .unwrap_or_else(|| format!("s{}", i + 1))
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// The n×p data matrix with spectra as rows.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let p = self.dim();
        DMatrix::from_fn(n, p, |i, j| self.signals[i].values[j])
    }

    /// Drops every signal whose label appears in `labels`.
    pub fn without_labels(&self, labels: &[String]) -> Result<Self> {
        let kept = self
            .signals
            .iter()
            .enumerate()
            .filter(|(i, _)| !labels.contains(&self.label(*i)))
            .map(|(_, s)| s.clone())
            .collect();
        Self::new(self.grid, kept)
    }
}

/// Problem found by [`validate_set`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetIssue {
    NonFinite {
        signal: usize,
        coordinate: usize,
    },
    GridMismatch {
        signal: usize,
    },
    LengthMismatch {
        signal: usize,
        len: usize,
    },
    /// Zero-variance signal; alignment against it is undefined.
    Constant {
        signal: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetReport {
    pub n: usize,
    pub p: usize,
    pub issues: Vec<SetIssue>,
}

impl SetReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Report-only health check of a set. Never fails.
pub fn validate_set(set: &SpectrumSet) -> SetReport {
    let mut issues = Vec::new();
    for (i, s) in set.signals().iter().enumerate() {
        if s.grid != *set.grid() {
            issues.push(SetIssue::GridMismatch { signal: i });
        }
        if s.values.len() != set.dim() {
            issues.push(SetIssue::LengthMismatch {
                signal: i,
                len: s.values.len(),
            });
        }
        let mut finite = true;
        for (j, v) in s.values.iter().enumerate() {
            if !v.is_finite() {
                issues.push(SetIssue::NonFinite {
                    signal: i,
                    coordinate: j,
                });
                finite = false;
            }
        }
        if finite && is_constant(&s.values) {
            issues.push(SetIssue::Constant { signal: i });
        }
    }
    SetReport {
        n: set.len(),
        p: set.dim(),
        issues,
    }
}

/// True when the centered sum of squares vanishes relative to the signal's magnitude.
pub(crate) fn is_constant(v: &DVector<f64>) -> bool {
    if v.is_empty() {
        return true;
    }
    let m = v.sum() / v.len() as f64;
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    let scale: f64 = v.iter().map(|x| x * x).sum();
    ss == 0.0 || ss <= 1e-24 * scale
}
