//! Small vector helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

pub(crate) fn mean(v: &DVector<f64>) -> f64 {
    v.sum() / v.len() as f64
}

/// Subtracts the mean, returning the centered copy.
pub fn centered(v: &DVector<f64>) -> DVector<f64> {
    let m = mean(v);
    v.map(|x| x - m)
}

/// Centers and scales to unit Euclidean norm. Returns `None` for a constant vector.
pub fn standardize(v: &DVector<f64>) -> Option<DVector<f64>> {
    let c = centered(v);
    let n = c.norm();
    if n == 0.0 || !n.is_finite() {
        None
    } else {
        Some(c / n)
    }
}

/// Absolute cosine of the angle between two vectors.
pub fn abs_cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).abs()
}

/// Orthonormal basis of span{1, template}, used to project signal-space
/// vectors onto the complement that the modification pattern lives in.
#[derive(Debug, Clone)]
pub struct ConstraintBasis {
    ones: DVector<f64>,
    second: Option<DVector<f64>>,
}

impl ConstraintBasis {
    pub fn new(template: &DVector<f64>) -> Self {
        let p = template.len();
        let ones = DVector::from_element(p, 1.0 / (p as f64).sqrt());
        // Two Gram-Schmidt passes keep the basis orthogonal even when the
        // template is only approximately centered.
        let mut w = template.clone();
        for _ in 0..2 {
            let proj = ones.dot(&w);
            w.axpy(-proj, &ones, 1.0);
        }
        let n = w.norm();
        let second = if n > 1e-14 * template.norm().max(f64::MIN_POSITIVE) {
            Some(w / n)
        } else {
            None
        };
        Self { ones, second }
    }

    /// Removes the components along 1 and the template.
    pub fn project_out(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for _ in 0..2 {
            let a = self.ones.dot(&out);
            out.axpy(-a, &self.ones, 1.0);
            if let Some(s) = &self.second {
                let b = s.dot(&out);
                out.axpy(-b, s, 1.0);
            }
        }
        out
    }

    /// Applies [`Self::project_out`] to every row of an n×p matrix.
    pub fn project_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for i in 0..m.nrows() {
            let row = m.row(i).transpose();
            out.set_row(i, &self.project_out(&row).transpose());
        }
        out
    }
}

pub(crate) struct TopSingular {
    pub value: f64,
    pub right: DVector<f64>,
    /// All singular values, descending.
    pub values: Vec<f64>,
}

/// Leading singular pair of a matrix via a full thin SVD.
pub(crate) fn top_singular(m: &DMatrix<f64>) -> Option<TopSingular> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return None;
    }
    let svd = m.clone().svd(true, true);
    let (imax, value) = svd.singular_values.iter().copied().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, s)| if s > acc.1 { (i, s) } else { acc },
    );
    let right = svd.v_t.as_ref()?.row(imax).transpose();
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Some(TopSingular {
        value,
        right,
        values,
    })
}

/// Leading singular pair of a wide matrix through the eigen-decomposition of
/// its small Gram matrix `M Mᵀ`. Much cheaper than a full SVD when `n ≪ p`.
pub(crate) fn top_singular_wide(m: &DMatrix<f64>) -> Option<TopSingular> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return None;
    }
    if m.nrows() > m.ncols() {
        return top_singular(m);
    }
    let gram = m * m.transpose();
    let eig = gram.symmetric_eigen();
    let (imax, _) =
        eig.eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, s)| if s > acc.1 { (i, s) } else { acc },
            );
    let u = eig.eigenvectors.column(imax).into_owned();
    let mut right = m.tr_mul(&u);
    let value = right.norm();
    if value > 0.0 {
        right /= value;
    }
    let mut values: Vec<f64> = eig.eigenvalues.iter().map(|e| e.max(0.0).sqrt()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Some(TopSingular {
        value,
        right,
        values,
    })
}
