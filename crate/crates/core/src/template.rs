//! Template estimation from replicate pre-treatment spectra.
//!
//! Profiling out the per-signal alignment `(c_i, d_i)` turns
//! `Σ ‖c_i x_i + d_i 1 − x0‖²` into the quadratic form `x0ᵀ M x0` with
//! `M = Σ (I − H_i)`, where `H_i` is the orthogonal projector onto
//! `span{x_i, 1}`. Minimizing it over zero-mean unit vectors is a
//! constrained eigenproblem whose solution is the smallest admissible
//! eigenvector of `P M P`, `P = I − 11ᵀ/p`.
//!
//! On the feasible set `x0ᵀ M x0 = n − Σ (u_iᵀ x0)²` with `u_i` the centered,
//! normalized signals, so the minimizer is the leading right singular vector
//! of the n×p matrix `U` stacking the `u_i`. `M` is never formed.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::align::{align_each, ensure_nonconstant, AffineAlignment};
use crate::error::{Error, Result};
use crate::linalg::{centered, top_singular};
use crate::spectrum::{Spectrum, SpectrumSet};

/// Eigenvalue separation below which the template is reported as not unique.
pub const EIGEN_GAP_TOLERANCE: f64 = 1e-10;
/// Target relative residual `‖PMPv − λv‖ / ‖v‖` of the returned eigenvector.
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-10;

/// The profiled alignment objective `M = Σ (I − H_i)`, available through products only.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    /// Rows are centered signals scaled to unit norm.
    directions: DMatrix<f64>,
}

impl QuadraticForm {
    pub fn n(&self) -> usize {
        self.directions.nrows()
    }

    pub fn p(&self) -> usize {
        self.directions.ncols()
    }

    /// The n×p matrix of centered, normalized signals.
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    /// `M v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.p(), "vector length must equal grid size");
        let n = self.n() as f64;
        let mean = v.sum() / v.len() as f64;
        let coords = &self.directions * v;
        let mut out = v * n - self.directions.tr_mul(&coords);
        out.add_scalar_mut(-n * mean);
        out
    }

    /// `vᵀ M v`.
    pub fn quadratic(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.apply(v))
    }

    /// `P M P v`, the operator whose admissible spectrum defines the template.
    pub fn apply_projected(&self, v: &DVector<f64>) -> DVector<f64> {
        centered(&self.apply(&centered(v)))
    }
}

pub fn build_quadratic_form(signals: &SpectrumSet) -> Result<QuadraticForm> {
    if signals.is_empty() {
        return Err(Error::TooFewSignals {
            required: 1,
            actual: 0,
        });
    }
    ensure_nonconstant(signals)?;
    let n = signals.len();
    let p = signals.dim();
    let mut directions = DMatrix::zeros(n, p);
    for (i, s) in signals.signals().iter().enumerate() {
        let u = centered(&s.values);
        let norm = u.norm();
        directions.set_row(i, &(u / norm).transpose());
    }
    Ok(QuadraticForm { directions })
}

/// Estimated template with the alignments that map each signal onto it.
#[derive(Debug, Clone)]
pub struct TemplateFit {
    /// Zero-mean, unit-norm template.
    pub template: DVector<f64>,
    pub alignments: Vec<AffineAlignment>,
    /// `Σ ‖c_i x_i + d_i 1 − x0‖²` at the solution.
    pub objective: f64,
    /// Smallest admissible eigenvalue of `PMP`.
    pub eigenvalue: f64,
    /// Distance to the next admissible eigenvalue.
    pub eigen_gap: f64,
    /// Relative eigen-residual `‖PMPv − λv‖`.
    pub residual: f64,
}

impl TemplateFit {
    /// True when the smallest admissible eigenvalue is (numerically) repeated.
    pub fn is_ambiguous(&self) -> bool {
        self.eigen_gap < EIGEN_GAP_TOLERANCE
    }

    /// Recomputes `Σ ‖c_i x_i + d_i 1 − x0‖²` for a set.
    pub fn objective_for(&self, signals: &SpectrumSet) -> f64 {
        signals
            .signals()
            .iter()
            .zip(&self.alignments)
            .map(|(s, a)| (a.apply(&s.values) - &self.template).norm_squared())
            .sum()
    }
}

pub fn estimate_template(signals: &SpectrumSet) -> Result<TemplateFit> {
    if signals.len() < 2 {
        return Err(Error::TooFewSignals {
            required: 2,
            actual: signals.len(),
        });
    }
    let form = build_quadratic_form(signals)?;
    let n = form.n() as f64;
    let top = top_singular(form.directions()).expect("non-empty matrix");

    let mut template = centered(&top.right);
    template /= template.norm();

    let mut eigenvalue = form.quadratic(&template);
    let mut residual = eigen_residual(&form, &template, eigenvalue);
    // Power steps on UᵀU sharpen the leading direction if the SVD left slack.
    let mut steps = 0;
    while residual > EIGEN_RESIDUAL_TOLERANCE && steps < 100 {
        let w = centered(&form.directions().tr_mul(&(form.directions() * &template)));
        template = &w / w.norm();
        eigenvalue = form.quadratic(&template);
        residual = eigen_residual(&form, &template, eigenvalue);
        steps += 1;
    }
    if residual > EIGEN_RESIDUAL_TOLERANCE {
        warn!("template eigen-residual {residual:e} exceeds {EIGEN_RESIDUAL_TOLERANCE:e}");
    }

    // Directions outside the row space of U all carry eigenvalue n.
    let second = if form.p() > 2 {
        let s2 = top.values.get(1).copied().unwrap_or(0.0);
        n - s2 * s2
    } else {
        f64::INFINITY
    };
    let eigen_gap = second - eigenvalue;
    if eigen_gap < EIGEN_GAP_TOLERANCE {
        warn!("smallest admissible eigenvalue is repeated (gap {eigen_gap:e}); template is not unique");
    }

    let mut alignments = align_each(signals, |_| template.clone())?;
    if alignments.iter().map(|a| a.c).sum::<f64>() < 0.0 {
        template.neg_mut();
        alignments.iter_mut().for_each(|a| *a = a.flipped());
    }
    let mut fit = TemplateFit {
        template,
        alignments,
        objective: 0.0,
        eigenvalue: eigenvalue.max(0.0),
        eigen_gap,
        residual,
    };
    fit.objective = fit.objective_for(signals);
    Ok(fit)
}

fn eigen_residual(form: &QuadraticForm, v: &DVector<f64>, lambda: f64) -> f64 {
    (form.apply_projected(v) - v * lambda).norm() / v.norm()
}

/// `ĉ_i x_i + d̂_i 1` for every signal, labelled like the input.
pub fn aligned_signals(fit: &TemplateFit, signals: &SpectrumSet) -> Result<SpectrumSet> {
    if fit.alignments.len() != signals.len() {
        return Err(Error::DimensionMismatch {
            expected: fit.alignments.len(),
            actual: signals.len(),
            context: "fit alignments vs signals",
        });
    }
    if fit.template.len() != signals.dim() {
        return Err(Error::DimensionMismatch {
            expected: fit.template.len(),
            actual: signals.dim(),
            context: "template vs grid",
        });
    }
    let aligned = signals
        .signals()
        .iter()
        .zip(&fit.alignments)
        .map(|(s, a)| Spectrum::new(s.grid, a.apply(&s.values), s.label.clone()))
        .collect::<Result<Vec<_>>>()?;
    SpectrumSet::new(*signals.grid(), aligned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standardize;
    use crate::spectrum::WavenumberGrid;

    fn set(vectors: Vec<Vec<f64>>) -> SpectrumSet {
        let p = vectors[0].len();
        let grid = WavenumberGrid::new(0.0, 1.0, p).unwrap();
        SpectrumSet::from_vectors(grid, vectors.into_iter().map(DVector::from_vec).collect())
            .unwrap()
    }

    #[test]
    fn orthogonal_direction_has_full_residual() {
        let x = vec![1.0, 2.0, 4.0, 0.0, -1.0];
        let s = set(vec![x.clone(), x.clone()]);
        let form = build_quadratic_form(&s).unwrap();
        // v ⟂ 1 and v ⟂ centered x
        let xc = centered(&DVector::from_vec(x));
        let mut v = DVector::from_vec(vec![1.0, -1.0, 0.0, 2.0, -2.0]);
        v = centered(&v);
        let proj = v.dot(&xc) / xc.norm_squared();
        v.axpy(-proj, &xc, 1.0);
        v /= v.norm();
        assert!((form.quadratic(&v) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn own_direction_is_perfect_fit() {
        let x = DVector::from_vec(vec![3.0, 1.0, 4.0, 1.0, 5.0]);
        let s = set(vec![x.as_slice().to_vec()]);
        let form = build_quadratic_form(&s).unwrap();
        let v = standardize(&x).unwrap();
        assert!(form.quadratic(&v).abs() < 1e-12);
    }

    #[test]
    fn single_signal_rejected_by_estimator() {
        let s = set(vec![vec![1.0, 2.0, 0.0]]);
        assert!(matches!(
            estimate_template(&s),
            Err(Error::TooFewSignals { .. })
        ));
    }

    #[test]
    fn constant_signal_rejected_with_label() {
        let s = set(vec![vec![1.0, 2.0, 0.0], vec![2.0, 2.0, 2.0]]);
        match estimate_template(&s) {
            Err(Error::DegenerateSignal { index, label }) => {
                assert_eq!(index, 1);
                assert_eq!(label, "s2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identical_directions_give_ambiguous_flag_only_when_repeated() {
        let s = set(vec![vec![1.0, 2.0, 0.0, 5.0], vec![2.0, 4.0, 0.0, 10.0]]);
        let fit = estimate_template(&s).unwrap();
        assert!(!fit.is_ambiguous());
        assert!(fit.objective < 1e-20);
    }

    #[test]
    fn orthogonal_signals_are_ambiguous() {
        // Two centered, mutually orthogonal signals: the two admissible
        // directions tie.
        let s = set(vec![vec![1.0, -1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, -1.0]]);
        let fit = estimate_template(&s).unwrap();
        assert!(fit.is_ambiguous());
    }
}
