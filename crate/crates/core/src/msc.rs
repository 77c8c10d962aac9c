//! Multiplicative scatter correction: regress each signal on the sample mean
//! and invert the fit.

use nalgebra::DVector;

use crate::align::{ensure_nonconstant, fit_affine, AffineAlignment};
use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, SpectrumSet};

/// Slopes with smaller magnitude cannot be inverted.
pub const MIN_SLOPE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MscFit {
    /// Coordinatewise mean of the input signals.
    pub reference: DVector<f64>,
    /// `x_i ≈ slope·reference + intercept`, stored as the inverse map
    /// `c = 1/slope`, `d = −intercept/slope`.
    pub alignments: Vec<AffineAlignment>,
    pub corrected: SpectrumSet,
}

pub fn msc_correct(signals: &SpectrumSet) -> Result<MscFit> {
    if signals.len() < 2 {
        return Err(Error::TooFewSignals {
            required: 2,
            actual: signals.len(),
        });
    }
    ensure_nonconstant(signals)?;
    let n = signals.len() as f64;
    let reference = signals
        .signals()
        .iter()
        .fold(DVector::zeros(signals.dim()), |acc, s| acc + &s.values)
        / n;

    let mut alignments = Vec::with_capacity(signals.len());
    let mut corrected = Vec::with_capacity(signals.len());
    for (i, s) in signals.signals().iter().enumerate() {
        let fit = fit_affine(&reference, &s.values).ok_or_else(|| Error::DegenerateSignal {
            index: i,
            label: "mean spectrum".into(),
        })?;
        let (slope, intercept) = (fit.c, fit.d);
        if slope.abs() < MIN_SLOPE {
            return Err(Error::NearZeroSlope {
                index: i,
                label: signals.label(i),
                slope,
            });
        }
        let inverse = AffineAlignment {
            c: 1.0 / slope,
            d: -intercept / slope,
        };
        let values = s.values.map(|v| (v - intercept) / slope);
        corrected.push(Spectrum::new(s.grid, values, s.label.clone())?);
        alignments.push(inverse);
    }
    Ok(MscFit {
        reference,
        alignments,
        corrected: SpectrumSet::new(*signals.grid(), corrected)?,
    })
}
