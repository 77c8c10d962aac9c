//! JSON artifact schemas. Downstream commands read the upstream ones back.

use ftir_decomp::sparsify::Candidate;
use ftir_decomp::{AffineAlignment, Law, WavenumberGrid};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::report::InputDigest;

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub label: String,
    pub c: f64,
    pub d: f64,
    /// Implied multiplicative factor `1/c`; absent when `c = 0`.
    pub scale: Option<f64>,
    pub offset: Option<f64>,
}

impl AlignmentRecord {
    pub fn new(label: String, a: &AffineAlignment) -> Self {
        Self {
            label,
            c: a.c,
            d: a.d,
            scale: a.scale(),
            offset: a.offset(),
        }
    }
}

pub fn alignment_records(
    labels: &[String],
    alignments: &[AffineAlignment],
) -> Vec<AlignmentRecord> {
    labels
        .iter()
        .zip(alignments)
        .map(|(l, a)| AlignmentRecord::new(l.clone(), a))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateArtifact {
    pub input_digests: Vec<InputDigest>,
    pub grid: WavenumberGrid,
    pub template: Vec<f64>,
    pub alignments: Vec<AlignmentRecord>,
    pub objective: f64,
    pub eigenvalue: f64,
    pub eigen_gap: f64,
    pub residual: f64,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectArtifact {
    pub input_digests: Vec<InputDigest>,
    /// SHA-256 of the template.json the fit used.
    pub template_sha256: String,
    pub grid: WavenumberGrid,
    pub labels: Vec<String>,
    pub effects: Vec<f64>,
    pub effects_normalized: Vec<f64>,
    /// `g̃`; `null` when no effect was detected.
    pub pattern: Option<Vec<f64>>,
    pub alignments: Vec<AlignmentRecord>,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub no_effect: bool,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternArtifact {
    pub input_digests: Vec<InputDigest>,
    pub template_sha256: String,
    pub effect_sha256: String,
    pub grid: WavenumberGrid,
    pub theta: f64,
    pub phi: f64,
    pub cos_phi: f64,
    pub l1_value: f64,
    pub cos_phi_floor: f64,
    pub effective_floor: f64,
    pub grid_theta: usize,
    pub grid_phi: usize,
    pub start: Candidate,
    pub polish_trace: Vec<f64>,
    pub candidates: Vec<Candidate>,
    pub pattern: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MscRecord {
    pub label: String,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MscArtifact {
    pub input_digests: Vec<InputDigest>,
    pub grid: WavenumberGrid,
    pub reference: Vec<f64>,
    pub alignments: Vec<MscRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalDraws {
    pub labels: Vec<String>,
    pub scales: Vec<f64>,
    pub offsets: Vec<f64>,
    pub effects: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthArtifact {
    pub input_digests: Vec<InputDigest>,
    pub seed: u64,
    pub grid: WavenumberGrid,
    pub template: Vec<f64>,
    pub pattern: Option<Vec<f64>>,
    pub sigma: f64,
    pub scale_law: Law,
    pub offset_law: Law,
    /// One effect per coupon.
    pub effects: Vec<f64>,
    pub replicates: usize,
    pub pre: SignalDraws,
    pub post: Option<SignalDraws>,
}
