//! Rotation of the estimated pattern towards its sparsest equivalent.
//!
//! Any unit vector in `span{g̃, 1, x0}` explains the post-treatment signals
//! equally well once the alignments absorb the `1` and `x0` components. With
//! the orthonormal frame `(g̃, 1/√p, x0)` those vectors are parameterized as
//!
//! ```text
//! g(θ, φ) = g̃ cos φ + (1/√p) cos θ sin φ · 1 + x0 sin θ sin φ
//! ```
//!
//! and the most interpretable one minimizes `G(θ, φ) = ‖g(θ, φ)‖₁`. `G` is
//! non-convex, so the sphere is scanned on a grid, local minima are collected,
//! one is selected by how close `|cos φ|` is to 1, and it is then polished with
//! alternating golden-section searches.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use log::warn;
use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on the frame's orthonormality.
pub const FRAME_TOLERANCE: f64 = 1e-8;
pub const MIN_GRID_COUNT: usize = 16;
/// Polishing stops once both angles move less than this (radians).
pub const POLISH_TOLERANCE: f64 = 1e-8;

/// Orthonormal frame `(g̃, 1/√p, x0)`.
#[derive(Debug, Clone)]
pub struct Frame {
    pattern: DVector<f64>,
    template: DVector<f64>,
    inv_sqrt_p: f64,
}

impl Frame {
    /// Checks orthonormality to [`FRAME_TOLERANCE`], then re-orthonormalizes
    /// so that `‖g(θ, φ)‖₂ = 1` holds to rounding.
    pub fn new(pattern: &DVector<f64>, template: &DVector<f64>) -> Result<Self> {
        let p = pattern.len();
        if template.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: template.len(),
                context: "template vs pattern",
            });
        }
        if p < 3 {
            return Err(Error::FrameNotOrthonormal(format!("grid size {p} < 3")));
        }
        let inv_sqrt_p = 1.0 / (p as f64).sqrt();
        let checks = [
            ("‖g̃‖ − 1", pattern.norm() - 1.0),
            ("‖x0‖ − 1", template.norm() - 1.0),
            ("g̃ᵀx0", pattern.dot(template)),
            ("g̃ᵀ1/√p", pattern.sum() * inv_sqrt_p),
            ("x0ᵀ1/√p", template.sum() * inv_sqrt_p),
        ];
        for (name, value) in checks {
            if value.abs() > FRAME_TOLERANCE {
                return Err(Error::FrameNotOrthonormal(format!("{name} = {value:e}")));
            }
        }
        let mut t = template.clone();
        t.add_scalar_mut(-t.mean());
        t /= t.norm();
        let mut g = pattern.clone();
        g.add_scalar_mut(-g.mean());
        let along = g.dot(&t);
        g.axpy(-along, &t, 1.0);
        g /= g.norm();
        Ok(Self {
            pattern: g,
            template: t,
            inv_sqrt_p,
        })
    }

    pub fn p(&self) -> usize {
        self.pattern.len()
    }

    pub fn pattern(&self) -> &DVector<f64> {
        &self.pattern
    }

    pub fn template(&self) -> &DVector<f64> {
        &self.template
    }

    /// `g(θ, φ)`.
    pub fn combine(&self, theta: f64, phi: f64) -> DVector<f64> {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let offset = self.inv_sqrt_p * ct * sp;
        let along = st * sp;
        DVector::from_fn(self.p(), |j, _| {
            cp * self.pattern[j] + offset + along * self.template[j]
        })
    }
}

/// `G(θ, φ) = ‖g(θ, φ)‖₁`.
pub fn evaluate_g(theta: f64, phi: f64, frame: &Frame) -> f64 {
    let g = frame.combine(theta, phi);
    debug_assert!(
        (g.norm() - 1.0).abs() <= 1e-9,
        "frame combination lost unit norm"
    );
    g.lp_norm(1)
}

/// `G` sampled on `θ_k = 2πk/n_θ` (periodic) and `φ_l = πl/(n_φ − 1)` (both poles included).
#[derive(Debug, Clone, Serialize)]
pub struct Landscape {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// Row-major over θ: `values[k * phis.len() + l]`.
    pub values: Vec<f64>,
}

impl Landscape {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.phis.len() + l]
    }

    /// `(θ, φ, G)` triples in grid order.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.thetas.iter().enumerate().flat_map(move |(k, &t)| {
            self.phis
                .iter()
                .enumerate()
                .map(move |(l, &f)| (t, f, self.get(k, l)))
        })
    }

    pub fn theta_step(&self) -> f64 {
        TAU / self.thetas.len() as f64
    }

    pub fn phi_step(&self) -> f64 {
        PI / (self.phis.len() - 1) as f64
    }

    /// Index of the smallest value.
    pub fn argmin(&self) -> (usize, usize) {
        let i = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (i / self.phis.len(), i % self.phis.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub theta: f64,
    pub phi: f64,
    pub value: f64,
    pub cos_phi: f64,
}

#[derive(Debug, Clone)]
pub struct LandscapeScan {
    pub landscape: Landscape,
    /// One local minimum per connected plateau, in grid order.
    pub candidates: Vec<Candidate>,
}

pub fn scan_landscape(frame: &Frame, grid_theta: usize, grid_phi: usize) -> Result<LandscapeScan> {
    if grid_theta < MIN_GRID_COUNT || grid_phi < MIN_GRID_COUNT {
        return Err(Error::InvalidParams(format!(
            "landscape grid {grid_theta}×{grid_phi} is below {MIN_GRID_COUNT}×{MIN_GRID_COUNT}"
        )));
    }
    let thetas: Vec<f64> = (0..grid_theta)
        .map(|k| TAU * k as f64 / grid_theta as f64)
        .collect();
    let phis: Vec<f64> = (0..grid_phi)
        .map(|l| {
            if l + 1 == grid_phi {
                PI
            } else {
                PI * l as f64 / (grid_phi - 1) as f64
            }
        })
        .collect();
    let trig_phi: Vec<(f64, f64)> = phis.iter().map(|f| f.sin_cos()).collect();

    let p = frame.p();
    let mut values = Vec::with_capacity(grid_theta * grid_phi);
    let mut rotated = vec![0.0; p];
    for &theta in &thetas {
        let (st, ct) = theta.sin_cos();
        let offset = frame.inv_sqrt_p * ct;
        for (r, x) in rotated.iter_mut().zip(frame.template.iter()) {
            *r = offset + st * x;
        }
        for &(sp, cp) in &trig_phi {
            let l1: f64 = frame
                .pattern
                .iter()
                .zip(&rotated)
                .map(|(g, r)| (cp * g + sp * r).abs())
                .sum();
            values.push(l1);
        }
    }
    let landscape = Landscape {
        thetas,
        phis,
        values,
    };
    let candidates = local_minima(&landscape)
        .into_iter()
        .map(|(k, l)| {
            let phi = landscape.phis[l];
            Candidate {
                theta: landscape.thetas[k],
                phi,
                value: landscape.get(k, l),
                cos_phi: phi.cos(),
            }
        })
        .collect();
    Ok(LandscapeScan {
        landscape,
        candidates,
    })
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn neighbors(k: usize, l: usize, nt: usize, np: usize) -> impl Iterator<Item = (usize, usize)> {
    let ks = [(k + nt - 1) % nt, k, (k + 1) % nt];
    let ls = [l.checked_sub(1), Some(l), (l + 1 < np).then_some(l + 1)];
    ks.into_iter()
        .flat_map(move |kk| ls.into_iter().flatten().map(move |ll| (kk, ll)))
        .filter(move |&(kk, ll)| (kk, ll) != (k, l))
}

/// Local minima of a landscape, one per connected plateau.
///
/// Cells are grouped into connected components of equal value (8-neighbour,
/// θ wraps). A component is a minimum when no member has a strictly lower
/// neighbour; it is reported as the member nearest its centroid.
pub fn local_minima(landscape: &Landscape) -> Vec<(usize, usize)> {
    let nt = landscape.thetas.len();
    let np = landscape.phis.len();
    let mut seen = vec![false; nt * np];
    let mut reps = Vec::new();
    for start in 0..nt * np {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let first = (start / np, start % np);
        let mut members = vec![first];
        let mut queue = VecDeque::from([first]);
        let mut is_minimum = true;
        while let Some((k, l)) = queue.pop_front() {
            let v = landscape.get(k, l);
            for (a, b) in neighbors(k, l, nt, np) {
                let w = landscape.get(a, b);
                if same_level(v, w) {
                    let idx = a * np + b;
                    if !seen[idx] {
                        seen[idx] = true;
                        members.push((a, b));
                        queue.push_back((a, b));
                    }
                } else if w < v {
                    is_minimum = false;
                }
            }
        }
        if is_minimum {
            reps.push(centroid_member(&members, nt));
        }
    }
    reps.sort_unstable();
    reps
}

fn centroid_member(members: &[(usize, usize)], nt: usize) -> (usize, usize) {
    if members.len() == 1 {
        return members[0];
    }
    let angle = |k: usize| TAU * k as f64 / nt as f64;
    let (s, c) = members.iter().fold((0.0, 0.0), |(s, c), &(k, _)| {
        (s + angle(k).sin(), c + angle(k).cos())
    });
    let mean_k = if s.hypot(c) < 1e-9 * members.len() as f64 {
        0.0
    } else {
        s.atan2(c).rem_euclid(TAU) / TAU * nt as f64
    };
    let mean_l = members.iter().map(|&(_, l)| l as f64).sum::<f64>() / members.len() as f64;
    let dist = |&(k, l): &(usize, usize)| {
        let dk = (k as f64 - mean_k).abs();
        let dk = dk.min(nt as f64 - dk);
        dk * dk + (l as f64 - mean_l).powi(2)
    };
    *members
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .expect("non-empty component")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectOptions {
    /// Minimum `|cos φ|` a candidate needs to be selected.
    pub cos_phi_floor: f64,
    /// Half-width (radians) of each golden-section search.
    pub bracket: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            cos_phi_floor: 0.5,
            bracket: 0.01,
        }
    }
}

impl SelectOptions {
    /// Brackets sized to two cells of a `grid_theta × grid_phi` landscape.
    pub fn for_grid(cos_phi_floor: f64, grid_theta: usize, grid_phi: usize) -> Self {
        let step = (TAU / grid_theta as f64).max(PI / (grid_phi.max(2) - 1) as f64);
        Self {
            cos_phi_floor,
            bracket: 2.0 * step,
        }
    }
}

/// The selected and polished rotation of `g̃`.
#[derive(Debug, Clone)]
pub struct SparsifiedPattern {
    pub theta: f64,
    pub phi: f64,
    /// `g(θ*, φ*)`.
    pub pattern: DVector<f64>,
    pub l1_value: f64,
    /// The candidate polishing started from.
    pub start: Candidate,
    pub candidates: Vec<Candidate>,
    /// Floor actually applied after any relaxation.
    pub effective_floor: f64,
    /// `G` after every accepted polishing move, starting with the candidate's value.
    pub polish_trace: Vec<f64>,
    pub landscape: Option<Landscape>,
}

pub fn select_and_polish(
    candidates: &[Candidate],
    frame: &Frame,
    cos_phi_floor: f64,
) -> Result<SparsifiedPattern> {
    select_and_polish_with(
        candidates,
        frame,
        &SelectOptions {
            cos_phi_floor,
            ..SelectOptions::default()
        },
    )
}

pub fn select_and_polish_with(
    candidates: &[Candidate],
    frame: &Frame,
    options: &SelectOptions,
) -> Result<SparsifiedPattern> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut floor = options.cos_phi_floor;
    let start = loop {
        let best = candidates
            .iter()
            .filter(|c| c.cos_phi.abs() >= floor)
            .min_by(|a, b| a.value.total_cmp(&b.value));
        if let Some(c) = best {
            break *c;
        }
        let relaxed = if floor < 1e-12 { 0.0 } else { floor / 2.0 };
        warn!("no candidate with |cos φ| ≥ {floor}; relaxing floor to {relaxed}");
        floor = relaxed;
    };

    let (theta, phi, trace) = polish(frame, start.theta, start.phi, options.bracket);
    let pattern = frame.combine(theta, phi);
    Ok(SparsifiedPattern {
        theta,
        phi,
        l1_value: *trace.last().expect("trace holds the start value"),
        pattern,
        start,
        candidates: candidates.to_vec(),
        effective_floor: floor,
        polish_trace: trace,
        landscape: None,
    })
}

/// Scan, select and polish in one call.
pub fn sparsify(
    frame: &Frame,
    grid_theta: usize,
    grid_phi: usize,
    cos_phi_floor: f64,
) -> Result<SparsifiedPattern> {
    let scan = scan_landscape(frame, grid_theta, grid_phi)?;
    let options = SelectOptions::for_grid(cos_phi_floor, grid_theta, grid_phi);
    let mut out = select_and_polish_with(&scan.candidates, frame, &options)?;
    out.landscape = Some(scan.landscape);
    Ok(out)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > 1e-11 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn polish(frame: &Frame, theta0: f64, phi0: f64, bracket: f64) -> (f64, f64, Vec<f64>) {
    let mut theta = theta0;
    let mut phi = phi0;
    let mut best = evaluate_g(theta, phi, frame);
    let mut trace = vec![best];
    for _ in 0..500 {
        let mut moved_theta = 0.0;
        let (t, v) = golden_section(
            |t| evaluate_g(t, phi, frame),
            theta - bracket,
            theta + bracket,
        );
        if v < best {
            moved_theta = (t - theta).abs();
            theta = t;
            best = v;
            trace.push(v);
        }
        let mut moved_phi = 0.0;
        let lo = (phi - bracket).max(0.0);
        let hi = (phi + bracket).min(PI);
        let (f, v) = golden_section(|f| evaluate_g(theta, f, frame), lo, hi);
        if v < best {
            moved_phi = (f - phi).abs();
            phi = f;
            best = v;
            trace.push(v);
        }
        if moved_theta < POLISH_TOLERANCE && moved_phi < POLISH_TOLERANCE {
            break;
        }
    }
    (theta.rem_euclid(TAU), phi, trace)
}
