//! Effect estimation from post-treatment spectra with the template held fixed.
//!
//! The objective is `F(δ, g, c, d) = ‖diag(c) X + d 1ᵀ − 1 x0ᵀ − δ gᵀ‖²_F`
//! with `g` a unit vector orthogonal to `1` and `x0`. Block coordinate
//! descent alternates two exact minimizers:
//!
//! 1. per-signal affine alignments `(c_i, d_i)` against `x0 + δ_i g`;
//! 2. the constrained rank-1 fit of `M = diag(c) X + d 1ᵀ − 1 x0ᵀ`: project
//!    each row of `M` onto `span{1, x0}⊥` and take the leading singular pair.
//!
//! Both steps are exact, so the objective never increases.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::align::{align_each, ensure_nonconstant, AffineAlignment};
use crate::error::{Error, Result};
use crate::linalg::{standardize, top_singular_wide, ConstraintBasis};
use crate::spectrum::SpectrumSet;

/// Leading singular values below this are treated as no signal.
pub const RANK_DEFICIENT_THRESHOLD: f64 = 1e-12;
/// Relative size of the projected residual below which no effect is reported.
pub const NO_EFFECT_THRESHOLD: f64 = 1e-10;
/// Objectives below this multiple of `n` (the squared norm of `1 x0ᵀ`) count as an exact fit.
pub const EXACT_FIT_LEVEL: f64 = 1e-28;
/// Tolerance on the template's zero-mean and unit-norm constraints.
pub const TEMPLATE_CONSTRAINT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    /// Stop once an outer iteration lowers the objective by less than `tol` relative.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
        }
    }
}

/// Result of the rank-1 step.
#[derive(Debug, Clone)]
pub struct RankOne {
    /// `δ = λ1 u1`.
    pub effects: DVector<f64>,
    /// `g̃ = v1`, unit norm and orthogonal to `1` and the template.
    pub pattern: DVector<f64>,
    pub singular_value: f64,
}

/// Best `δ g̃ᵀ` approximation of `M` over unit `g̃ ⟂ {1, template}`.
///
/// Returns `None` when the projected matrix has no singular value above
/// [`RANK_DEFICIENT_THRESHOLD`].
pub fn rank1_step(m: &DMatrix<f64>, template: &DVector<f64>) -> Option<RankOne> {
    assert_eq!(
        m.ncols(),
        template.len(),
        "residual width must equal grid size"
    );
    let basis = ConstraintBasis::new(template);
    rank1_projected(&basis.project_rows(m), &basis)
}

fn rank1_projected(projected: &DMatrix<f64>, basis: &ConstraintBasis) -> Option<RankOne> {
    let top = top_singular_wide(projected)?;
    if top.value < RANK_DEFICIENT_THRESHOLD {
        return None;
    }
    // Re-project so the returned pattern meets the constraints to rounding.
    let mut pattern = basis.project_out(&top.right);
    pattern /= pattern.norm();
    let mut effects = projected * &pattern;
    if effects.sum() < 0.0 {
        effects.neg_mut();
        pattern.neg_mut();
    }
    Some(RankOne {
        effects,
        pattern,
        singular_value: top.value,
    })
}

/// `‖M − M̃ − δ gᵀ‖²_F` where `M̃` is the row projection onto `span{1, x0}`.
pub fn rank1_objective(
    m: &DMatrix<f64>,
    template: &DVector<f64>,
    effects: &DVector<f64>,
    pattern: &DVector<f64>,
) -> f64 {
    let basis = ConstraintBasis::new(template);
    (basis.project_rows(m) - effects * pattern.transpose()).norm_squared()
}

/// Per-signal alignment against `x0 + δ_i g̃`.
pub fn refit_alignments(
    signals: &SpectrumSet,
    template: &DVector<f64>,
    effects: &DVector<f64>,
    pattern: &DVector<f64>,
) -> Result<Vec<AffineAlignment>> {
    check_dims(signals, template)?;
    if effects.len() != signals.len() {
        return Err(Error::DimensionMismatch {
            expected: signals.len(),
            actual: effects.len(),
            context: "effects vs signals",
        });
    }
    if pattern.len() != signals.dim() {
        return Err(Error::DimensionMismatch {
            expected: signals.dim(),
            actual: pattern.len(),
            context: "pattern vs grid",
        });
    }
    align_each(signals, |i| template + pattern * effects[i])
}

/// `diag(c) X + d 1ᵀ − 1 x0ᵀ`.
pub fn alignment_residual(
    signals: &SpectrumSet,
    template: &DVector<f64>,
    alignments: &[AffineAlignment],
) -> DMatrix<f64> {
    let p = signals.dim();
    let mut m = DMatrix::zeros(signals.len(), p);
    for (i, (s, a)) in signals.signals().iter().zip(alignments).enumerate() {
        for j in 0..p {
            m[(i, j)] = a.c * s.values[j] + a.d - template[j];
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct EffectFit {
    /// `g̃`; `None` when no effect was detected.
    pub pattern: Option<DVector<f64>>,
    /// Raw effect magnitudes `δ`, one per signal.
    pub effects: DVector<f64>,
    pub alignments: Vec<AffineAlignment>,
    /// Objective after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub no_effect: bool,
}

impl EffectFit {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// `δ / max|δ|`, or zeros when every effect vanishes.
    pub fn normalized_effects(&self) -> DVector<f64> {
        let m = self.effects.amax();
        if m > 0.0 {
            &self.effects / m
        } else {
            self.effects.clone()
        }
    }

    /// `δ g̃ᵀ`, or `None` when no effect was found.
    pub fn effect_matrix(&self) -> Option<DMatrix<f64>> {
        self.pattern.as_ref().map(|g| &self.effects * g.transpose())
    }
}

fn check_dims(signals: &SpectrumSet, template: &DVector<f64>) -> Result<()> {
    if template.len() != signals.dim() {
        return Err(Error::DimensionMismatch {
            expected: signals.dim(),
            actual: template.len(),
            context: "template vs grid",
        });
    }
    Ok(())
}

fn check_template(template: &DVector<f64>) -> Result<()> {
    let norm_dev = (template.norm() - 1.0).abs();
    let mean_dev = template.sum().abs();
    if norm_dev > TEMPLATE_CONSTRAINT_TOLERANCE || mean_dev > TEMPLATE_CONSTRAINT_TOLERANCE {
        return Err(Error::InvalidParams(format!(
            "template violates constraints (|‖x0‖−1| = {norm_dev:e}, |1ᵀx0| = {mean_dev:e})"
        )));
    }
    Ok(())
}

/// Block coordinate descent from `δ = 0` and the leading feasible direction of the
/// standardized signals.
pub fn bcd_fit(
    signals: &SpectrumSet,
    template: &DVector<f64>,
    options: &BcdOptions,
) -> Result<EffectFit> {
    validate_inputs(signals, template)?;
    let basis = ConstraintBasis::new(template);
    let p = signals.dim();
    // Standardized rows make the start invariant to per-signal affine maps.
    let mut rows = DMatrix::zeros(signals.len(), p);
    for (i, s) in signals.signals().iter().enumerate() {
        if let Some(u) = standardize(&s.values) {
            rows.set_row(i, &u.transpose());
        }
    }
    let stacked = basis.project_rows(&rows);
    let pattern = top_singular_wide(&stacked)
        .filter(|t| t.value > RANK_DEFICIENT_THRESHOLD)
        .map(|t| {
            let g = basis.project_out(&t.right);
            &g / g.norm()
        })
        .unwrap_or_else(|| DVector::zeros(p));
    let effects = DVector::zeros(signals.len());
    run(
        signals,
        template,
        &basis,
        effects,
        pattern,
        Vec::new(),
        options,
    )
}

/// Continues descent from an existing fit.
pub fn bcd_resume(
    signals: &SpectrumSet,
    template: &DVector<f64>,
    fit: &EffectFit,
    options: &BcdOptions,
) -> Result<EffectFit> {
    validate_inputs(signals, template)?;
    if fit.effects.len() != signals.len() {
        return Err(Error::DimensionMismatch {
            expected: signals.len(),
            actual: fit.effects.len(),
            context: "fit effects vs signals",
        });
    }
    let basis = ConstraintBasis::new(template);
    let pattern = fit
        .pattern
        .clone()
        .unwrap_or_else(|| DVector::zeros(signals.dim()));
    run(
        signals,
        template,
        &basis,
        fit.effects.clone(),
        pattern,
        fit.objective_trace.clone(),
        options,
    )
}

fn validate_inputs(signals: &SpectrumSet, template: &DVector<f64>) -> Result<()> {
    if signals.len() < 2 {
        return Err(Error::TooFewSignals {
            required: 2,
            actual: signals.len(),
        });
    }
    check_dims(signals, template)?;
    check_template(template)?;
    ensure_nonconstant(signals)
}

fn run(
    signals: &SpectrumSet,
    template: &DVector<f64>,
    basis: &ConstraintBasis,
    mut effects: DVector<f64>,
    mut pattern: DVector<f64>,
    mut trace: Vec<f64>,
    options: &BcdOptions,
) -> Result<EffectFit> {
    let n = signals.len();
    let start = trace.len();
    let scale = (n as f64).sqrt() * template.norm();
    let mut alignments = Vec::new();
    let mut converged = false;
    let mut no_effect = false;

    for _ in 0..options.max_iter {
        alignments = refit_alignments(signals, template, &effects, &pattern)?;
        let m = alignment_residual(signals, template, &alignments);
        let projected = basis.project_rows(&m);
        if projected.norm() < NO_EFFECT_THRESHOLD * m.norm().max(scale) {
            effects = DVector::zeros(n);
            trace.push(m.norm_squared());
            no_effect = true;
            converged = true;
            break;
        }
        let Some(step) = rank1_projected(&projected, basis) else {
            effects = DVector::zeros(n);
            trace.push(m.norm_squared());
            no_effect = true;
            converged = true;
            break;
        };
        effects = step.effects;
        pattern = step.pattern;
        let objective = (m - &effects * pattern.transpose()).norm_squared();
        let previous = trace.last().copied();
        trace.push(objective);
        if objective <= EXACT_FIT_LEVEL * n as f64 {
            converged = true;
            break;
        }
        if let Some(prev) = previous {
            if prev - objective <= options.tol * prev {
                converged = true;
                break;
            }
        }
    }

    if no_effect {
        warn!("projected residual vanishes; no treatment effect detected");
    } else if !converged {
        warn!(
            "block coordinate descent stopped after {} iterations without converging",
            options.max_iter
        );
    }
    Ok(EffectFit {
        pattern: (!no_effect).then_some(pattern),
        effects,
        alignments,
        iterations: trace.len() - start,
        objective_trace: trace,
        converged,
        no_effect,
    })
}
