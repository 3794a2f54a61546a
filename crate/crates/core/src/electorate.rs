//! Voter populations and candidate slates.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::geometry::{dist, Point, PointSet, PolicyBox};
use crate::rng::{self, Stream};

const REJECTION_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    BridgeConflict,
    AsymmetricResentment,
    Diffuse,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 3] =
        [ProfileKind::BridgeConflict, ProfileKind::AsymmetricResentment, ProfileKind::Diffuse];

    pub fn label(self) -> &'static str {
        match self {
            ProfileKind::BridgeConflict => "bridge_conflict",
            ProfileKind::AsymmetricResentment => "asymmetric_resentment",
            ProfileKind::Diffuse => "diffuse",
        }
    }
}

/// Two-camp Gaussian mixture, with an optional share of each camp redrawn
/// around a bridge point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectorateProfile {
    pub kind: ProfileKind,
    pub majority_mean: Point,
    pub minority_mean: Point,
    pub majority_std: f64,
    pub minority_std: f64,
    #[serde(default)]
    pub bridge_fraction: f64,
    #[serde(default)]
    pub bridge_mean: Option<Point>,
    #[serde(default)]
    pub bridge_std: f64,
}

impl ElectorateProfile {
    pub fn preset(kind: ProfileKind) -> Self {
        match kind {
            ProfileKind::BridgeConflict => ElectorateProfile {
                kind,
                majority_mean: Point(vec![0.25, 0.5]),
                minority_mean: Point(vec![0.75, 0.5]),
                majority_std: 0.08,
                minority_std: 0.08,
                bridge_fraction: 0.10,
                bridge_mean: Some(Point(vec![0.5, 0.5])),
                bridge_std: 0.10,
            },
            ProfileKind::AsymmetricResentment => ElectorateProfile {
                kind,
                majority_mean: Point(vec![0.2, 0.3]),
                minority_mean: Point(vec![0.7, 0.7]),
                majority_std: 0.06,
                minority_std: 0.12,
                bridge_fraction: 0.0,
                bridge_mean: None,
                bridge_std: 0.0,
            },
            ProfileKind::Diffuse => ElectorateProfile {
                kind,
                majority_mean: Point(vec![0.35, 0.5]),
                minority_mean: Point(vec![0.65, 0.5]),
                majority_std: 0.20,
                minority_std: 0.20,
                bridge_fraction: 0.0,
                bridge_mean: None,
                bridge_std: 0.0,
            },
        }
    }

    pub fn validate(&self, bx: &PolicyBox) -> Result<()> {
        for (name, m) in [("majority_mean", &self.majority_mean), ("minority_mean", &self.minority_mean)] {
            if !bx.contains(m) {
                return Err(config(format!("{name} {:?} lies outside the policy box", m.0)));
            }
        }
        if !(self.majority_std > 0.0 && self.minority_std > 0.0) {
            return Err(config("camp standard deviations must be positive"));
        }
        if !(0.0..1.0).contains(&self.bridge_fraction) {
            return Err(config("bridge_fraction must lie in [0, 1)"));
        }
        if self.bridge_fraction > 0.0 {
            match &self.bridge_mean {
                Some(b) if bx.contains(b) && self.bridge_std > 0.0 => {}
                _ => return Err(config("a bridge needs a mean inside the box and a positive std")),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BalanceKind {
    #[serde(rename = "original")]
    Original,
    #[serde(rename = "70_30")]
    R70_30,
    #[serde(rename = "50_50")]
    R50_50,
}

impl BalanceKind {
    pub const ALL: [BalanceKind; 3] = [BalanceKind::Original, BalanceKind::R70_30, BalanceKind::R50_50];

    pub fn label(self) -> &'static str {
        match self {
            BalanceKind::Original => "original",
            BalanceKind::R70_30 => "70_30",
            BalanceKind::R50_50 => "50_50",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampBalance {
    pub kind: BalanceKind,
    pub majority_fraction: f64,
}

impl CampBalance {
    pub fn preset(kind: BalanceKind) -> Self {
        let majority_fraction = match kind {
            BalanceKind::Original => 0.6,
            BalanceKind::R70_30 => 0.7,
            BalanceKind::R50_50 => 0.5,
        };
        CampBalance { kind, majority_fraction }
    }

    /// `(majority, minority)` head counts for `n` voters.
    pub fn split(&self, n: usize) -> (usize, usize) {
        let maj = (self.majority_fraction * n as f64).round() as usize;
        let maj = maj.min(n);
        (maj, n - maj)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Camp {
    Majority,
    Minority,
}

#[derive(Clone, Debug)]
pub struct Electorate {
    pub positions: PointSet,
    pub camps: Vec<Camp>,
    pub initial_majority_mean: Point,
    pub initial_minority_mean: Point,
}

impl Electorate {
    pub fn camp_sizes(&self) -> (usize, usize) {
        let maj = self.camps.iter().filter(|c| **c == Camp::Majority).count();
        (maj, self.camps.len() - maj)
    }

    /// Mean of each camp under the fixed labels, `(majority, minority)`.
    pub fn camp_means(&self, positions: &PointSet) -> Result<(Point, Point)> {
        if positions.len() != self.camps.len() {
            return Err(domain("positions are not aligned with camp labels"));
        }
        let dim = positions.dim();
        let mut sums = [vec![0.0; dim], vec![0.0; dim]];
        let mut counts = [0usize; 2];
        for (p, camp) in positions.iter().zip(&self.camps) {
            let slot = match camp {
                Camp::Majority => 0,
                Camp::Minority => 1,
            };
            counts[slot] += 1;
            for (acc, v) in sums[slot].iter_mut().zip(p) {
                *acc += v;
            }
        }
        if counts.contains(&0) {
            return Err(domain("a camp has no voters"));
        }
        let [maj, min] = sums;
        let finish = |mut s: Vec<f64>, c: usize| {
            s.iter_mut().for_each(|v| *v /= c as f64);
            Point(s)
        };
        Ok((finish(maj, counts[0]), finish(min, counts[1])))
    }
}

/// Samples `n` voters from the profile's two-camp mixture, truncated to the box.
///
/// Majority voters occupy the first indices. Identical arguments give identical
/// positions.
pub fn generate_electorate(
    profile: &ElectorateProfile,
    balance: &CampBalance,
    n: usize,
    bx: &PolicyBox,
    seed: u64,
) -> Result<Electorate> {
    if n < 2 {
        return Err(config("an electorate needs at least two voters"));
    }
    if !(0.5..1.0).contains(&balance.majority_fraction) {
        return Err(config("majority fraction must lie in [0.5, 1)"));
    }
    profile.validate(bx)?;
    let (n_maj, n_min) = balance.split(n);
    if n_maj == 0 || n_min == 0 {
        return Err(config(format!("camp split {n_maj}:{n_min} leaves a camp empty")));
    }

    let mut rng = rng::stream(seed, Stream::Electorate);
    let mut positions = PointSet::with_capacity(bx.dim(), n);
    let mut camps = Vec::with_capacity(n);
    for (camp, count, mean, std) in [
        (Camp::Majority, n_maj, &profile.majority_mean, profile.majority_std),
        (Camp::Minority, n_min, &profile.minority_mean, profile.minority_std),
    ] {
        let n_bridge = (profile.bridge_fraction * count as f64).round() as usize;
        for i in 0..count {
            let p = if i < count - n_bridge {
                sample_truncated(mean, std, bx, &mut rng)?
            } else {
                let b = profile.bridge_mean.as_ref().expect("validated bridge mean");
                sample_truncated(b, profile.bridge_std, bx, &mut rng)?
            };
            positions.push(&p);
            camps.push(camp);
        }
    }

    let mut elec = Electorate {
        positions,
        camps,
        initial_majority_mean: Point::zeros(bx.dim()),
        initial_minority_mean: Point::zeros(bx.dim()),
    };
    let (maj, min) = elec.camp_means(&elec.positions)?;
    elec.initial_majority_mean = maj;
    elec.initial_minority_mean = min;
    Ok(elec)
}

fn sample_truncated(mean: &[f64], std: f64, bx: &PolicyBox, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, std).map_err(|e| config(e.to_string()))?;
    let mut p = vec![0.0; mean.len()];
    for _ in 0..REJECTION_ATTEMPTS {
        for (v, m) in p.iter_mut().zip(mean) {
            *v = m + normal.sample(rng);
        }
        if bx.contains(&p) {
            return Ok(p);
        }
    }
    bx.project(&mut p);
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlateKind {
    CentristLadder,
    PolarizedElites,
}

impl SlateKind {
    pub const ALL: [SlateKind; 2] = [SlateKind::CentristLadder, SlateKind::PolarizedElites];

    pub fn label(self) -> &'static str {
        match self {
            SlateKind::CentristLadder => "centrist_ladder",
            SlateKind::PolarizedElites => "polarized_elites",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlateSpec {
    pub kind: SlateKind,
    pub k: usize,
    /// Fraction of the box diagonal covered by the ladder.
    #[serde(default = "default_ladder_span")]
    pub ladder_span: f64,
    /// Max distance of an elite candidate from its camp mean.
    #[serde(default = "default_elite_spread")]
    pub elite_spread: f64,
}

fn default_ladder_span() -> f64 {
    0.6
}

fn default_elite_spread() -> f64 {
    0.1
}

impl SlateSpec {
    pub fn new(kind: SlateKind, k: usize) -> Self {
        SlateSpec { kind, k, ladder_span: default_ladder_span(), elite_spread: default_elite_spread() }
    }
}

/// Places `spec.k` candidates inside the box.
///
/// The ladder is evenly spaced along the main diagonal and centred on the box
/// centre. Elites alternate between the majority and minority camp means,
/// jittered uniformly within a disc of radius `elite_spread`.
pub fn generate_slate(
    spec: &SlateSpec,
    profile: &ElectorateProfile,
    bx: &PolicyBox,
    seed: u64,
) -> Result<PointSet> {
    if spec.k < 2 {
        return Err(config("a slate needs at least two candidates"));
    }
    let dim = bx.dim();
    let mut out = PointSet::with_capacity(dim, spec.k);
    match spec.kind {
        SlateKind::CentristLadder => {
            if !(0.0..=1.0).contains(&spec.ladder_span) {
                return Err(config("ladder_span must lie in [0, 1]"));
            }
            for j in 0..spec.k {
                let f = 0.5 + spec.ladder_span * (j as f64 / (spec.k - 1) as f64 - 0.5);
                let p: Vec<f64> = (0..dim).map(|a| bx.lo[a] + f * (bx.hi[a] - bx.lo[a])).collect();
                out.push(&p);
            }
        }
        SlateKind::PolarizedElites => {
            if spec.elite_spread < 0.0 {
                return Err(config("elite_spread must be non-negative"));
            }
            profile.validate(bx)?;
            let mut rng = rng::stream(seed, Stream::Slate);
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            for j in 0..spec.k {
                let anchor = if j % 2 == 0 { &profile.majority_mean } else { &profile.minority_mean };
                let mut dir: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
                let len = crate::geometry::norm(&dir).max(f64::MIN_POSITIVE);
                // uniform in the ball: radius ~ spread * U^(1/d)
                let r = spec.elite_spread * rng.random::<f64>().powf(1.0 / dim as f64);
                dir.iter_mut().for_each(|v| *v *= r / len);
                let mut p: Vec<f64> = anchor.iter().zip(&dir).map(|(a, b)| a + b).collect();
                bx.project(&mut p);
                out.push(&p);
            }
        }
    }
    Ok(out)
}

fn camp_displacements(elec: &Electorate, current: &PointSet) -> Result<(f64, f64)> {
    let (maj, min) = elec.camp_means(current)?;
    Ok((dist(&maj, &elec.initial_majority_mean), dist(&min, &elec.initial_minority_mean)))
}

/// Normalized camp-displacement asymmetry in `[0, 1]`.
pub fn camp_asymmetry(elec: &Electorate, current: &PointSet, eps: f64) -> Result<f64> {
    let (maj, min) = camp_displacements(elec, current)?;
    let denom = maj + min + eps;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(((min - maj).abs() / denom).clamp(0.0, 1.0))
}

/// Same statistic without the absolute value, in `[-1, 1]`: positive when the
/// minority camp has moved farther than the majority, negative otherwise.
pub fn signed_camp_asymmetry(elec: &Electorate, current: &PointSet, eps: f64) -> Result<f64> {
    let (maj, min) = camp_displacements(elec, current)?;
    let denom = maj + min + eps;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(((min - maj) / denom).clamp(-1.0, 1.0))
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

label_parse!(ProfileKind, "electorate profile");
label_parse!(BalanceKind, "camp balance");
label_parse!(SlateKind, "slate");
