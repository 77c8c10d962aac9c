//! Per-signal affine alignment `c·x + d·1 ≈ target`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{is_constant, Spectrum, SpectrumSet};

/// Below this magnitude the scale `c` is treated as zero and the model
/// parameters `a = 1/c`, `b = -d/c` are undefined.
pub const MIN_SCALE_COEFFICIENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineAlignment {
    /// Scale coefficient, the reciprocal of the multiplicative error.
    pub c: f64,
    /// Offset coefficient.
    pub d: f64,
}

impl AffineAlignment {
    pub const IDENTITY: Self = Self { c: 1.0, d: 0.0 };

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| self.c * v + self.d)
    }

    /// Multiplicative factor `a = 1/c` of the generative model.
    pub fn scale(&self) -> Option<f64> {
        (self.c.abs() > MIN_SCALE_COEFFICIENT).then(|| 1.0 / self.c)
    }

    /// Offset `b = -d/c` of the generative model.
    pub fn offset(&self) -> Option<f64> {
        (self.c.abs() > MIN_SCALE_COEFFICIENT).then(|| -self.d / self.c)
    }

    pub fn flipped(&self) -> Self {
        Self {
            c: -self.c,
            d: -self.d,
        }
    }
}

/// Least-squares `(c, d)` minimizing `‖c·x + d·1 − target‖²`, or `None` for constant `x`.
///
/// Solves the 2×2 normal equations `[[xᵀx, xᵀ1], [1ᵀx, p]]·[c; d] = [xᵀt; 1ᵀt]`
/// by eliminating `d` first, which amounts to regressing the centered target
/// on the centered signal.
pub fn fit_affine(x: &DVector<f64>, target: &DVector<f64>) -> Option<AffineAlignment> {
    assert_eq!(x.len(), target.len(), "signal and target lengths differ");
    if is_constant(x) {
        return None;
    }
    let p = x.len() as f64;
    let mx = x.sum() / p;
    let mt = target.sum() / p;
    let mut sxx = 0.0;
    let mut sxt = 0.0;
    for (xi, ti) in x.iter().zip(target.iter()) {
        let xc = xi - mx;
        sxx += xc * xc;
        sxt += xc * (ti - mt);
    }
    let c = sxt / sxx;
    Some(AffineAlignment { c, d: mt - c * mx })
}

pub fn align_to_target(signal: &Spectrum, target: &DVector<f64>) -> Result<AffineAlignment> {
    if target.len() != signal.len() {
        return Err(Error::DimensionMismatch {
            expected: signal.len(),
            actual: target.len(),
            context: "alignment target vs signal",
        });
    }
    fit_affine(&signal.values, target).ok_or_else(|| Error::DegenerateSignal {
        index: 0,
        label: signal.label.clone().unwrap_or_default(),
    })
}

/// Aligns signal `i` to `target(i)` for every signal of the set.
pub(crate) fn align_each<F>(set: &SpectrumSet, mut target: F) -> Result<Vec<AffineAlignment>>
where
    F: FnMut(usize) -> DVector<f64>,
{
    set.signals()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            fit_affine(&s.values, &target(i)).ok_or_else(|| Error::DegenerateSignal {
                index: i,
                label: set.label(i),
            })
        })
        .collect()
}

/// Fails with `DegenerateSignal` on the first constant signal.
pub(crate) fn ensure_nonconstant(set: &SpectrumSet) -> Result<()> {
    for (i, s) in set.signals().iter().enumerate() {
        if is_constant(&s.values) {
            return Err(Error::DegenerateSignal {
                index: i,
                label: set.label(i),
            });
        }
    }
    Ok(())
}
