//! One-round state transitions for voters and candidates.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::geometry::{dist, Point, PointSet, PolicyBox};

/// Noise draws beyond this many standard deviations are redrawn.
pub const NOISE_TRUNCATION: f64 = 4.0;
pub const DEFAULT_NOISE: f64 = 0.01;
/// Ramp width as a fraction of the box diameter.
pub const DEFAULT_WIDTH_FRACTION: f64 = 0.75;
const EMPIRICAL_LIPSCHITZ_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateShape {
    /// Linear rise from `min` at distance 0 to `max` at `width`, flat after.
    #[default]
    Ramp,
    /// Rise to `max` at `peak * width`, fall back to `min + settle * (max - min)`
    /// at `width`, flat after. Not monotone.
    Backlash { peak: f64, settle: f64 },
}

/// Distance-dependent rate, used both for voter attraction and candidate chase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFunction {
    pub min: f64,
    pub max: f64,
    pub width: f64,
    #[serde(default)]
    pub shape: RateShape,
}

pub type AttractionFunction = RateFunction;
pub type ChaseFunction = RateFunction;

impl RateFunction {
    pub fn ramp(min: f64, max: f64, width: f64) -> Self {
        RateFunction { min, max, width, shape: RateShape::Ramp }
    }

    pub fn uniform(rate: f64) -> Self {
        RateFunction { min: rate, max: rate, width: 1.0, shape: RateShape::Ramp }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min <= self.max && self.max < 1.0) {
            return Err(config(format!("rate bounds need 0 < min <= max < 1, got [{}, {}]", self.min, self.max)));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(config("rate ramp width must be positive"));
        }
        if let RateShape::Backlash { peak, settle } = self.shape {
            if !(peak > 0.0 && peak < 1.0) {
                return Err(config("backlash peak must lie strictly inside (0, 1)"));
            }
            if !(0.0..=1.0).contains(&settle) {
                return Err(config("backlash settle level must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn value(&self, r: f64) -> f64 {
        let span = self.max - self.min;
        match self.shape {
            RateShape::Ramp => self.min + span * (r / self.width).min(1.0),
            RateShape::Backlash { peak, settle } => {
                let u = r / self.width;
                if u <= peak {
                    self.min + span * u / peak
                } else if u <= 1.0 {
                    self.max - span * (1.0 - settle) * (u - peak) / (1.0 - peak)
                } else {
                    self.min + span * settle
                }
            }
        }
    }

    /// Closed-form Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        let span = self.max - self.min;
        match self.shape {
            RateShape::Ramp => span / self.width,
            RateShape::Backlash { peak, settle } => {
                (span / (peak * self.width)).max(span * (1.0 - settle) / ((1.0 - peak) * self.width))
            }
        }
    }

    /// Largest finite-difference slope on a `1e-3` grid over `[0, extent]`.
    pub fn empirical_lipschitz(&self, extent: f64) -> f64 {
        let steps = (extent / EMPIRICAL_LIPSCHITZ_STEP).ceil() as usize;
        let mut prev = self.value(0.0);
        let mut best = 0.0_f64;
        for s in 1..=steps {
            let r = s as f64 * EMPIRICAL_LIPSCHITZ_STEP;
            let v = self.value(r);
            best = best.max((v - prev).abs() / EMPIRICAL_LIPSCHITZ_STEP);
            prev = v;
        }
        best
    }

    pub fn is_monotone(&self) -> bool {
        match self.shape {
            RateShape::Ramp => true,
            RateShape::Backlash { settle, .. } => settle >= 1.0,
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.min == self.max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Voter attraction toward the winner.
    pub g: AttractionFunction,
    /// Candidate chase toward the supporter centroid.
    pub h: ChaseFunction,
    /// Pull toward the electorate mean.
    pub mu: f64,
    /// Repulsion strength.
    pub nu: f64,
    /// Repulsion cap.
    pub rho: f64,
    pub repulsion_radius: f64,
    pub sigma_eps: f64,
    pub sigma_delta: f64,
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<()> {
        self.g.validate()?;
        self.h.validate()?;
        let finite_nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !finite_nonneg(self.mu) || !finite_nonneg(self.nu) {
            return Err(config("mu and nu must be finite and non-negative"));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) || !(self.repulsion_radius > 0.0) {
            return Err(config("repulsion cap and radius must be positive"));
        }
        if !finite_nonneg(self.sigma_eps) || !finite_nonneg(self.sigma_delta) {
            return Err(config("noise scales must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn noiseless(mut self) -> Self {
        self.sigma_eps = 0.0;
        self.sigma_delta = 0.0;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoterMechanism {
    ConsensusPull,
    Backlash,
    SortingPressure,
}

impl VoterMechanism {
    pub const ALL: [VoterMechanism; 3] =
        [VoterMechanism::ConsensusPull, VoterMechanism::Backlash, VoterMechanism::SortingPressure];

    pub fn label(self) -> &'static str {
        match self {
            VoterMechanism::ConsensusPull => "consensus_pull",
            VoterMechanism::Backlash => "backlash",
            VoterMechanism::SortingPressure => "sorting_pressure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMechanism {
    Static,
    BroadCoalitionChase,
    BaseReinforcement,
}

impl CandidateMechanism {
    pub const ALL: [CandidateMechanism; 3] = [
        CandidateMechanism::Static,
        CandidateMechanism::BroadCoalitionChase,
        CandidateMechanism::BaseReinforcement,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CandidateMechanism::Static => "static",
            CandidateMechanism::BroadCoalitionChase => "broad_coalition_chase",
            CandidateMechanism::BaseReinforcement => "base_reinforcement",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MechanismPreset {
    pub voter: VoterMechanism,
    pub candidate: CandidateMechanism,
}

/// Backlash rates fall back to `min` beyond this fraction of the box diameter.
pub const BACKLASH_WIDTH_FRACTION: f64 = 0.25;
pub const BACKLASH_PEAK: f64 = 0.5;
pub const BACKLASH_SETTLE: f64 = 0.0;
const STATIC_RATE: f64 = 1e-6;

/// Concrete parameters for a voter x candidate mechanism pair on `bx`.
pub fn preset_params(preset: MechanismPreset, bx: &PolicyBox) -> DynamicsParams {
    let width = DEFAULT_WIDTH_FRACTION * bx.diameter();
    let g = match preset.voter {
        VoterMechanism::ConsensusPull => RateFunction::ramp(0.10, 0.25, width),
        VoterMechanism::Backlash => RateFunction {
            min: 0.04,
            max: 0.22,
            width: BACKLASH_WIDTH_FRACTION * bx.diameter(),
            shape: RateShape::Backlash { peak: BACKLASH_PEAK, settle: BACKLASH_SETTLE },
        },
        VoterMechanism::SortingPressure => RateFunction::ramp(0.02, 0.30, width),
    };
    let (h, mu, nu) = match preset.candidate {
        CandidateMechanism::Static => (RateFunction::ramp(STATIC_RATE, STATIC_RATE, width), 0.0, 0.0),
        CandidateMechanism::BroadCoalitionChase => (RateFunction::ramp(0.10, 0.30, width), 0.05, 0.0),
        CandidateMechanism::BaseReinforcement => (RateFunction::ramp(0.15, 0.35, width), 0.0, 0.05),
    };
    DynamicsParams {
        g,
        h,
        mu,
        nu,
        rho: 0.2,
        repulsion_radius: 0.25,
        sigma_eps: DEFAULT_NOISE,
        sigma_delta: DEFAULT_NOISE,
    }
}

/// Isotropic Gaussian vector with `E||e||^2 ~ sigma^2` (per-coordinate std
/// `sigma / sqrt(dim)`), each coordinate truncated at four standard deviations.
pub fn draw_noise(dim: usize, sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    let scale = sigma / (dim as f64).sqrt();
    (0..dim)
        .map(|_| loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= NOISE_TRUNCATION {
                break z * scale;
            }
        })
        .collect()
}

/// Voters move toward the winner at distance-dependent rates, plus noise, then
/// are projected onto the box.
pub fn voter_step(
    positions: &PointSet,
    winner: &[f64],
    params: &DynamicsParams,
    bx: &PolicyBox,
    rng: &mut impl Rng,
) -> Result<PointSet> {
    if winner.len() != positions.dim() {
        return Err(domain("winner dimension differs from voters"));
    }
    let dim = positions.dim();
    let mut next = positions.clone();
    for i in 0..next.len() {
        let x = next.get_mut(i);
        let eta = params.g.value(dist(x, winner));
        for (v, w) in x.iter_mut().zip(winner) {
            *v = (1.0 - eta) * *v + eta * w;
        }
        if params.sigma_eps > 0.0 {
            for (v, e) in x.iter_mut().zip(draw_noise(dim, params.sigma_eps, rng)) {
                *v += e;
            }
        }
        bx.project(x);
    }
    Ok(next)
}

/// Repulsion away from the nearest rival, `rho * (1 - d / radius)` in size when
/// the rival is within `repulsion_radius`. Coincident rivals push along the
/// first axis.
pub fn repulsion_vector(candidates: &PointSet, j: usize, params: &DynamicsParams) -> Result<Point> {
    if j >= candidates.len() {
        return Err(domain(format!("candidate index {j} out of range")));
    }
    let dim = candidates.dim();
    let cj = candidates.get(j);
    let rival = (0..candidates.len())
        .filter(|&l| l != j)
        .map(|l| (l, dist(cj, candidates.get(l))))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let mut r = vec![0.0; dim];
    let Some((l, d)) = rival else {
        return Ok(Point(r));
    };
    if d >= params.repulsion_radius {
        return Ok(Point(r));
    }
    let magnitude = params.rho * (1.0 - d / params.repulsion_radius);
    if d == 0.0 {
        r[0] = params.rho;
    } else {
        for ((out, a), b) in r.iter_mut().zip(cj).zip(candidates.get(l)) {
            *out = magnitude * (a - b) / d;
        }
    }
    Ok(Point(r))
}

/// Synchronous candidate update: chase, centroid pull, repulsion and noise, all
/// evaluated on the pre-update state, then projected onto the box.
pub fn candidate_step(
    candidates: &PointSet,
    centroids: &PointSet,
    voter_mean: &[f64],
    params: &DynamicsParams,
    bx: &PolicyBox,
    rng: &mut impl Rng,
) -> Result<PointSet> {
    if candidates.len() != centroids.len() || candidates.dim() != centroids.dim() {
        return Err(domain("candidates and centroids are not aligned"));
    }
    if voter_mean.len() != candidates.dim() {
        return Err(domain("voter mean dimension differs from candidates"));
    }
    let dim = candidates.dim();
    let repulsion: Vec<Point> = if params.nu > 0.0 {
        (0..candidates.len())
            .map(|j| repulsion_vector(candidates, j, params))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut next = PointSet::with_capacity(dim, candidates.len());
    let mut c_next = vec![0.0; dim];
    for j in 0..candidates.len() {
        let c = candidates.get(j);
        let s = centroids.get(j);
        let lambda = params.h.value(dist(c, s));
        for k in 0..dim {
            c_next[k] = c[k] + lambda * (s[k] - c[k]) + params.mu * (voter_mean[k] - c[k]);
            if params.nu > 0.0 {
                c_next[k] += params.nu * repulsion[j][k];
            }
        }
        if params.sigma_delta > 0.0 {
            for (v, e) in c_next.iter_mut().zip(draw_noise(dim, params.sigma_delta, rng)) {
                *v += e;
            }
        }
        bx.project(&mut c_next);
        next.push(&c_next);
    }
    Ok(next)
}

macro_rules! label_parse {
    ($ty:ty, $what:literal) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                <$ty>::ALL
                    .into_iter()
                    .find(|k| k.label() == s)
                    .ok_or_else(|| config(format!(concat!("unknown ", $what, " '{}'"), s)))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

label_parse!(VoterMechanism, "voter mechanism");
label_parse!(CandidateMechanism, "candidate mechanism");
