//! Generative models for replicate spectra and a seeded synthetic-data generator.
//!
//! A pre-treatment signal is `a·(x0 + ε) + b·1`; a post-treatment signal adds a
//! shared modification pattern scaled per coupon, `a·(x0 + δ·g + ε) + b·1`.
//! Noise is added before the multiplicative factor, so its standard deviation
//! scales with `a`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::standardize;
use crate::spectrum::{Spectrum, SpectrumSet, WavenumberGrid};

/// Consecutive non-positive scale draws tolerated before giving up.
pub const MAX_SCALE_REJECTIONS: usize = 1000;

/// Distribution of a per-signal scalar (scale `a` or offset `b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Law {
    Constant {
        value: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
    /// Uniform pick among a fixed set of values.
    Choice {
        values: Vec<f64>,
    },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Law::Constant { value } => value.is_finite(),
            Law::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Law::Normal { mean, std } => mean.is_finite() && std.is_finite() && *std >= 0.0,
            Law::Choice { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("malformed law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Law::Constant { value } => *value,
            Law::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(*low..*high)
                }
            }
            Law::Normal { mean, std } => Normal::new(*mean, *std).expect("validated").sample(rng),
            Law::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }
}

/// Parameters of the generative models.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeParams {
    pub grid: WavenumberGrid,
    /// Zero-mean, unit-norm template `x0`.
    pub template: DVector<f64>,
    pub scale_law: Law,
    pub offset_law: Law,
    /// Noise standard deviation before scaling.
    pub sigma: f64,
    /// Unit-norm modification pattern `g`.
    pub pattern: Option<DVector<f64>>,
    /// One effect magnitude per coupon.
    pub effects: Option<Vec<f64>>,
    pub replicates: usize,
}

/// Effect magnitudes of the nine simulated coupons.
pub const SIMULATION_EFFECTS: [f64; 9] = [8.0, 5.0, 3.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];
/// Number of simulated pre-treatment signals.
pub const SIMULATION_PRE_COUNT: usize = 33;
/// Replicate measurements per coupon.
pub const SIMULATION_REPLICATES: usize = 3;

impl GenerativeParams {
    /// Synthetic template and pattern on the default FTIR grid, effects
    /// `[8,5,3,2,2,2,2,2,2]` with three replicates, `a ~ U(0.7,1.3)`,
    /// `b ~ U(-0.1,0.1)` and noise at 2% of the template's peak-to-peak range.
    pub fn simulation_default() -> Self {
        let grid = WavenumberGrid::ftir_default();
        let template = builtin_template(&grid);
        let sigma = default_sigma(&template);
        Self {
            grid,
            pattern: Some(builtin_pattern(&grid)),
            template,
            scale_law: Law::Uniform {
                low: 0.7,
                high: 1.3,
            },
            offset_law: Law::Uniform {
                low: -0.1,
                high: 0.1,
            },
            sigma,
            effects: Some(SIMULATION_EFFECTS.to_vec()),
            replicates: SIMULATION_REPLICATES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.grid.count();
        if self.template.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: self.template.len(),
                context: "template vs grid",
            });
        }
        if (self.template.norm() - 1.0).abs() > 1e-12 || self.template.sum().abs() > 1e-12 {
            return Err(Error::InvalidParams(
                "template must be zero-mean with unit norm".into(),
            ));
        }
        if let Some(g) = &self.pattern {
            if g.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: g.len(),
                    context: "pattern vs grid",
                });
            }
            if (g.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParams("pattern must have unit norm".into()));
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidParams(format!("sigma {} < 0", self.sigma)));
        }
        if let Some(e) = &self.effects {
            if e.iter().any(|d| !d.is_finite()) {
                return Err(Error::InvalidParams("effects must be finite".into()));
            }
        }
        self.scale_law.validate()?;
        self.offset_law.validate()
    }
}

/// Noise level equal to 2% of the template's peak-to-peak range.
pub fn default_sigma(template: &DVector<f64>) -> f64 {
    0.02 * (template.max() - template.min())
}

fn gaussian_sum(grid: &WavenumberGrid, peaks: &[(f64, f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(
        grid.count(),
        grid.points().map(|w| {
            peaks
                .iter()
                .map(|&(center, width, height)| {
                    let z = (w - center) / width;
                    height * (-0.5 * z * z).exp()
                })
                .sum()
        }),
    )
}

/// Smooth six-peak synthetic absorbance spectrum, centered and normalized.
pub fn builtin_template(grid: &WavenumberGrid) -> DVector<f64> {
    let peaks = [
        (1030.0, 25.0, 0.8),
        (1240.0, 30.0, 0.6),
        (1510.0, 15.0, 0.9),
        (1610.0, 20.0, 0.4),
        (2925.0, 40.0, 0.3),
        (3350.0, 150.0, 0.35),
    ];
    standardize(&gaussian_sum(grid, &peaks)).expect("peaks lie inside the default grid")
}

/// Three-bump modification pattern covering roughly a tenth of the grid,
/// centered and normalized.
pub fn builtin_pattern(grid: &WavenumberGrid) -> DVector<f64> {
    let bumps = [
        (1720.0, 20.0, 1.0),
        (2925.0, 25.0, -0.5),
        (3300.0, 60.0, 0.6),
    ];
    standardize(&gaussian_sum(grid, &bumps)).expect("bumps lie inside the default grid")
}

/// Signals plus the nuisance draws that produced them.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub set: SpectrumSet,
    pub scales: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Effect applied to each signal; all zero for pre-treatment sets.
    pub effects: Vec<f64>,
}

const PRE_STREAM: u64 = 0x7072_6500;
const POST_STREAM: u64 = 0x706f_7374;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-signal seed, so signals can be generated independently of each other.
pub fn signal_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

fn draw_signal(
    params: &GenerativeParams,
    mean: &DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<(DVector<f64>, f64, f64)> {
    let mut rejections = 0;
    let a = loop {
        let a = params.scale_law.sample(rng);
        if a > 0.0 {
            break a;
        }
        rejections += 1;
        if rejections >= MAX_SCALE_REJECTIONS {
            return Err(Error::ScaleLawRejected(rejections));
        }
    };
    let b = params.offset_law.sample(rng);
    let values = DVector::from_fn(mean.len(), |j, _| {
        let eps: f64 = if params.sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            params.sigma * z
        } else {
            0.0
        };
        a * (mean[j] + eps) + b
    });
    Ok((values, a, b))
}

/// `n` pre-treatment signals with their draws.
pub fn simulate_pretreatment(params: &GenerativeParams, n: usize, seed: u64) -> Result<Simulation> {
    params.validate()?;
    if n == 0 {
        return Err(Error::TooFewSignals {
            required: 1,
            actual: 0,
        });
    }
    let mut signals = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(signal_seed(seed, PRE_STREAM, i as u64));
        let (values, a, b) = draw_signal(params, &params.template, &mut rng)?;
        signals.push(Spectrum::new(
            params.grid,
            values,
            Some(format!("pre{}", i + 1)),
        )?);
        scales.push(a);
        offsets.push(b);
    }
    Ok(Simulation {
        set: SpectrumSet::new(params.grid, signals)?,
        scales,
        offsets,
        effects: vec![0.0; n],
    })
}

pub fn generate_pretreatment(
    params: &GenerativeParams,
    n: usize,
    seed: u64,
) -> Result<SpectrumSet> {
    simulate_pretreatment(params, n, seed).map(|s| s.set)
}

/// Label of replicate `rep` (1-based) of coupon `coupon` (1-based).
///
/// Everything before `#` identifies the coupon, see [`group_key`].
pub fn post_label(coupon: usize, effect: f64, rep: usize) -> String {
    format!("coupon{coupon}_delta{effect}#{rep}")
}

/// Grouping key of a label: the text before the first `#`.
pub fn group_key(label: &str) -> &str {
    label.split('#').next().unwrap_or(label)
}

/// `replicates` post-treatment signals per effect, coupon-major.
pub fn simulate_posttreatment(params: &GenerativeParams, seed: u64) -> Result<Simulation> {
    params.validate()?;
    let pattern = params
        .pattern
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("post-treatment generation needs a pattern".into()))?;
    let effects = params
        .effects
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("post-treatment generation needs effects".into()))?;
    if params.replicates == 0 {
        return Err(Error::InvalidParams("replicates must be positive".into()));
    }
    let total = effects.len() * params.replicates;
    let mut signals = Vec::with_capacity(total);
    let mut scales = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(total);
    let mut applied = Vec::with_capacity(total);
    for (k, &delta) in effects.iter().enumerate() {
        let mean = &params.template + pattern * delta;
        for r in 0..params.replicates {
            let index = (k * params.replicates + r) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(signal_seed(seed, POST_STREAM, index));
            let (values, a, b) = draw_signal(params, &mean, &mut rng)?;
            signals.push(Spectrum::new(
                params.grid,
                values,
                Some(post_label(k + 1, delta, r + 1)),
            )?);
            scales.push(a);
            offsets.push(b);
            applied.push(delta);
        }
    }
    Ok(Simulation {
        set: SpectrumSet::new(params.grid, signals)?,
        scales,
        offsets,
        effects: applied,
    })
}

pub fn generate_posttreatment(params: &GenerativeParams, seed: u64) -> Result<SpectrumSet> {
    simulate_posttreatment(params, seed).map(|s| s.set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(p: usize) -> GenerativeParams {
        let grid = WavenumberGrid::new(0.0, 1.0, p).unwrap();
        let raw = DVector::from_fn(p, |j, _| ((j * j) as f64).sin() + j as f64 * 0.1);
        GenerativeParams {
            grid,
            template: standardize(&raw).unwrap(),
            scale_law: Law::Constant { value: 1.0 },
            offset_law: Law::Constant { value: 0.0 },
            sigma: 0.0,
            pattern: None,
            effects: None,
            replicates: 1,
        }
    }

    #[test]
    fn noise_free_identity() {
        let params = small_params(7);
        let set = generate_pretreatment(&params, 4, 11).unwrap();
        for s in set.signals() {
            assert_eq!(s.values, params.template);
        }
    }

    #[test]
    fn noise_free_affine() {
        let mut params = small_params(7);
        params.scale_law = Law::Constant { value: 2.0 };
        params.offset_law = Law::Constant { value: 3.0 };
        let set = generate_pretreatment(&params, 5, 1).unwrap();
        let expected = params.template.map(|x| 2.0 * x + 3.0);
        for s in set.signals() {
            assert_eq!(s.values, expected);
        }
        // zero per-coordinate variance
        let m = set.matrix();
        for j in 0..7 {
            let col = m.column(j);
            assert!(col.iter().all(|&v| v == col[0]));
        }
    }

    #[test]
    fn scale_law_rejection_aborts() {
        let mut params = small_params(5);
        params.scale_law = Law::Constant { value: -1.0 };
        assert!(matches!(
            generate_pretreatment(&params, 2, 0),
            Err(Error::ScaleLawRejected(MAX_SCALE_REJECTIONS))
        ));
    }

    #[test]
    fn simulation_counts() {
        let params = GenerativeParams::simulation_default();
        let post = generate_posttreatment(&params, 3).unwrap();
        assert_eq!(post.len(), 27);
        assert_eq!(post.label(0), "coupon1_delta8#1");
        assert_eq!(group_key(&post.label(5)), "coupon2_delta5");
    }

    #[test]
    fn zero_effects_reproduce_template() {
        let mut params = small_params(6);
        params.pattern = Some(DVector::from_fn(6, |j, _| if j == 0 { 1.0 } else { 0.0 }));
        params.effects = Some(vec![0.0, 0.0]);
        params.replicates = 2;
        let post = generate_posttreatment(&params, 9).unwrap();
        assert_eq!(post.len(), 4);
        for s in post.signals() {
            assert_eq!(s.values, params.template);
        }
    }

    #[test]
    fn deterministic_shift() {
        let mut params = small_params(5);
        let g = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        params.pattern = Some(g.clone());
        params.effects = Some(vec![2.0]);
        let post = generate_posttreatment(&params, 0).unwrap();
        assert_eq!(post.signals()[0].values, &params.template + g * 2.0);
    }

    #[test]
    fn missing_pattern_is_an_error() {
        let params = small_params(5);
        assert!(matches!(
            generate_posttreatment(&params, 0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn builtin_shapes_are_standardized() {
        let grid = WavenumberGrid::ftir_default();
        for v in [builtin_template(&grid), builtin_pattern(&grid)] {
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert!(v.sum().abs() < 1e-12);
        }
        let g = builtin_pattern(&grid);
        // Centering shifts the flat baseline off zero; measure support against it.
        let mut sorted: Vec<f64> = g.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let baseline = sorted[sorted.len() / 2];
        let active = g
            .iter()
            .filter(|x| (*x - baseline).abs() > 1e-2 * g.amax())
            .count();
        let frac = active as f64 / grid.count() as f64;
        assert!(
            (0.05..0.2).contains(&frac),
            "pattern support fraction {frac}"
        );
    }
}
