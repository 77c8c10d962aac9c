//! Independent reference computations for the integration tests. Nothing in
//! here calls into the estimators it is used to check.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use ftir_decomp::{SpectrumSet, WavenumberGrid};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_set(rng: &mut ChaCha8Rng, n: usize, p: usize) -> SpectrumSet {
    let grid = WavenumberGrid::new(0.0, 1.0, p).unwrap();
    SpectrumSet::from_vectors(grid, (0..n).map(|_| random_vector(rng, p)).collect()).unwrap()
}

/// Random zero-mean unit vector.
pub fn random_feasible(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    let v = random_vector(rng, p);
    let m = v.mean();
    let c = v.map(|x| x - m);
    &c / c.norm()
}

/// `(c, d)` from the explicit inverse of `[[xᵀx, xᵀ1], [1ᵀx, p]]`.
pub fn normal_equation_fit(x: &DVector<f64>, t: &DVector<f64>) -> (f64, f64) {
    let p = x.len() as f64;
    let a = Matrix2::new(x.dot(x), x.sum(), x.sum(), p);
    let rhs = Vector2::new(x.dot(t), t.sum());
    let sol = a.try_inverse().expect("non-singular normal matrix") * rhs;
    (sol[0], sol[1])
}

pub fn affine_residual(x: &DVector<f64>, t: &DVector<f64>, c: f64, d: f64) -> f64 {
    x.iter()
        .zip(t.iter())
        .map(|(xi, ti)| (c * xi + d - ti).powi(2))
        .sum()
}

/// `Σ_i min_{c,d} ‖c x_i + d 1 − v‖²` through per-signal normal equations.
pub fn profiled_objective(set: &SpectrumSet, v: &DVector<f64>) -> f64 {
    set.signals()
        .iter()
        .map(|s| {
            let (c, d) = normal_equation_fit(&s.values, v);
            affine_residual(&s.values, v, c, d)
        })
        .sum()
}

/// Dense `Σ (I − Q_i Q_iᵀ)` with `Q_i` an orthonormal basis of `span{x_i, 1}` from QR.
pub fn dense_quadratic_form(set: &SpectrumSet) -> DMatrix<f64> {
    let p = set.dim();
    let mut m = DMatrix::zeros(p, p);
    for s in set.signals() {
        let mut a = DMatrix::zeros(p, 2);
        a.set_column(0, &s.values);
        a.set_column(1, &DVector::from_element(p, 1.0));
        let q = a.qr().q();
        m += DMatrix::identity(p, p) - &q * q.transpose();
    }
    m
}

/// Projector onto `span{1, x0}⊥` as `I − X(XᵀX)⁻¹Xᵀ`, `X = [1, x0]`.
pub fn complement_projector(template: &DVector<f64>) -> DMatrix<f64> {
    let p = template.len();
    let mut x = DMatrix::zeros(p, 2);
    x.set_column(0, &DVector::from_element(p, 1.0));
    x.set_column(1, template);
    let gram = (x.transpose() * &x)
        .try_inverse()
        .expect("1 and x0 independent");
    DMatrix::identity(p, p) - &x * gram * x.transpose()
}

/// Best rank-1 fit `‖R − δ gᵀ‖²` with `g ∈ range(proj)` by alternating least
/// squares from `starts` random initializations.
pub fn als_rank1(r: &DMatrix<f64>, proj: &DMatrix<f64>, starts: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut g = proj * random_vector(&mut rng, r.ncols());
        g /= g.norm();
        let mut delta = r * &g;
        let mut last = f64::INFINITY;
        for _ in 0..20_000 {
            let mut next = proj * r.transpose() * &delta;
            let norm = next.norm();
            if norm == 0.0 {
                break;
            }
            next /= norm;
            g = next;
            delta = r * &g;
            let obj = (r - &delta * g.transpose()).norm_squared();
            if (last - obj).abs() <= 1e-15 * obj.max(1e-300) {
                break;
            }
            last = obj;
        }
        best = best.min((r - &delta * g.transpose()).norm_squared());
    }
    best
}

/// Alternating solver for the effect objective from one random start:
/// explicit 2×2 inverses for the alignments, power-iteration ALS for `(δ, g)`.
pub fn effect_objective_from_start(
    set: &SpectrumSet,
    template: &DVector<f64>,
    proj: &DMatrix<f64>,
    rng: &mut ChaCha8Rng,
    iterations: usize,
) -> f64 {
    let n = set.len();
    let p = set.dim();
    let mut g = proj * random_vector(rng, p);
    g /= g.norm();
    let mut delta = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let x = set.matrix();
    let mut objective = f64::INFINITY;
    for _ in 0..iterations {
        let mut m = DMatrix::zeros(n, p);
        for i in 0..n {
            let xi = x.row(i).transpose();
            let target = template + &g * delta[i];
            let (c, d) = normal_equation_fit(&xi, &target);
            for j in 0..p {
                m[(i, j)] = c * xi[j] + d - template[j];
            }
        }
        // a few power steps are enough once warm-started
        for _ in 0..50 {
            let next = proj * m.transpose() * (&m * &g);
            let norm = next.norm();
            if norm == 0.0 {
                break;
            }
            g = next / norm;
        }
        delta = &m * &g;
        objective = (&m - &delta * g.transpose()).norm_squared();
    }
    objective
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Orthonormal basis of `1⊥` in R⁴.
fn helmert4() -> [[f64; 4]; 3] {
    let a = 1.0 / 2f64.sqrt();
    let b = 1.0 / 6f64.sqrt();
    let c = 1.0 / 12f64.sqrt();
    [
        [a, -a, 0.0, 0.0],
        [b, b, -2.0 * b, 0.0],
        [c, c, c, -3.0 * c],
    ]
}

/// Minimum of `uᵀ M u` over unit `u ⟂ 1` in R⁴ on a two-angle grid at 1e-3 rad.
pub fn angular_grid_minimum(m: &DMatrix<f64>) -> f64 {
    let e = helmert4();
    // Restrict M to the constraint subspace: a 3×3 matrix.
    let mut k = [[0.0; 3]; 3];
    for (r, er) in e.iter().enumerate() {
        for (s, es) in e.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    acc += er[i] * m[(i, j)] * es[j];
                }
            }
            k[r][s] = acc;
        }
    }
    let step = 1e-3;
    let na = (PI / 2.0 / step).ceil() as usize;
    let nb = (TAU / step).ceil() as usize;
    let mut best = f64::INFINITY;
    for ia in 0..=na {
        let (sa, ca) = (ia as f64 * step).sin_cos();
        for ib in 0..nb {
            let (sb, cb) = (ib as f64 * step).sin_cos();
            let w = [ca, sa * cb, sa * sb];
            let mut q = 0.0;
            for r in 0..3 {
                for s in 0..3 {
                    q += w[r] * k[r][s] * w[s];
                }
            }
            best = best.min(q);
        }
    }
    best
}
