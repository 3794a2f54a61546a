//! Benchmark winner oracles that choose the winner anywhere in the box, and the
//! paired comparison study between them.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{voter_step, AttractionFunction, CandidateMechanism, VoterMechanism};
use crate::electorate::{camp_asymmetry, generate_electorate, signed_camp_asymmetry, BalanceKind, ProfileKind, SlateKind};
use crate::error::{config, Result};
use crate::geometry::{
    advance_odometer, chebyshev_center, dist, pairwise_variance, winner_radius, Point, PointSet, PolicyBox,
};
use crate::rng::{self, Stream};
use crate::rules::RuleSpec;
use crate::runner::RunConfig;
use crate::stats::Band;

pub const DEFAULT_GRID_RESOLUTION: f64 = 0.02;
pub const DEFAULT_REFINE_ITERS: usize = 20;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
const TIE_RELATIVE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Centrality,
    Depolarization,
}

impl OracleKind {
    pub const ALL: [OracleKind; 2] = [OracleKind::Centrality, OracleKind::Depolarization];

    pub fn label(self) -> &'static str {
        match self {
            OracleKind::Centrality => "centrality",
            OracleKind::Depolarization => "depolarization",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub kind: OracleKind,
    pub grid_resolution: f64,
    pub refine_iters: usize,
    /// Objective tolerance used when comparing oracles.
    pub tolerance: f64,
}

impl OracleSpec {
    pub fn new(kind: OracleKind) -> Self {
        OracleSpec {
            kind,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            refine_iters: DEFAULT_REFINE_ITERS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_resolution > 0.0 && self.grid_resolution.is_finite()) {
            return Err(config("oracle grid resolution must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(config("oracle tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// The point of the box minimizing the largest voter distance.
pub fn centrality_oracle(voters: &PointSet, bx: &PolicyBox) -> Result<Point> {
    Ok(chebyshev_center(voters, bx)?.center)
}

/// Voter variance after one noise-free update toward `w`.
pub fn deterministic_next_variance(voters: &PointSet, w: &[f64], g: &AttractionFunction, bx: &PolicyBox) -> Result<f64> {
    let mut next = voters.clone();
    next.map_points(|x| {
        let eta = g.value(dist(x, w));
        for (xi, wi) in x.iter_mut().zip(w) {
            *xi = (1.0 - eta) * *xi + eta * wi;
        }
        bx.project(x);
    });
    pairwise_variance(&next)
}

fn improves(candidate: f64, best: f64) -> bool {
    candidate < best - TIE_RELATIVE * best.abs()
}

/// Minimizes [`deterministic_next_variance`] over a uniform grid, then refines
/// the best grid point by coordinate descent with a halving step. Ties keep the
/// earliest grid point in row-major order (last coordinate fastest).
pub fn depolarization_oracle(
    voters: &PointSet,
    g: &AttractionFunction,
    bx: &PolicyBox,
    spec: &OracleSpec,
) -> Result<Point> {
    spec.validate()?;
    let objective = |w: &[f64]| deterministic_next_variance(voters, w, g, bx);
    let dim = bx.dim();
    let counts: Vec<usize> = (0..dim)
        .map(|k| ((bx.hi[k] - bx.lo[k]) / spec.grid_resolution).round() as usize + 1)
        .collect();
    let coord = |k: usize, i: usize| {
        if counts[k] == 1 {
            bx.lo[k]
        } else {
            (bx.lo[k] + i as f64 * spec.grid_resolution).min(bx.hi[k])
        }
    };

    let mut idx = vec![0usize; dim];
    let mut best_w = bx.lo.0.clone();
    let mut best = objective(&best_w)?;
    let mut w = vec![0.0; dim];
    while advance_odometer(&mut idx, &counts) {
        for k in 0..dim {
            w[k] = coord(k, idx[k]);
        }
        let v = objective(&w)?;
        if improves(v, best) {
            best = v;
            best_w.copy_from_slice(&w);
        }
    }

    let mut step = spec.grid_resolution;
    for _ in 0..spec.refine_iters {
        let mut moved = false;
        for k in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut probe = best_w.clone();
                probe[k] += sign * step;
                bx.project(&mut probe);
                let v = objective(&probe)?;
                if improves(v, best) {
                    best = v;
                    best_w = probe;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(Point(best_w))
}

pub fn oracle_winner(voters: &PointSet, g: &AttractionFunction, bx: &PolicyBox, spec: &OracleSpec) -> Result<Point> {
    match spec.kind {
        OracleKind::Centrality => centrality_oracle(voters, bx),
        OracleKind::Depolarization => depolarization_oracle(voters, g, bx, spec),
    }
}

fn default_replicates() -> usize {
    24
}
fn default_oracle_n() -> usize {
    1400
}
fn default_oracle_rounds() -> usize {
    16
}

/// Settings of the paired oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleStudy {
    /// Environment; its slate, rule and candidate settings do not affect the
    /// oracle winners and are carried only for the record.
    pub env: RunConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_oracle_n")]
    pub n: usize,
    #[serde(default = "default_oracle_rounds")]
    pub rounds: usize,
    /// Replicate `r` uses seed `base_seed + r` for both oracles.
    #[serde(default)]
    pub base_seed: u64,
    pub grid_resolution: f64,
    pub refine_iters: usize,
    pub tolerance: f64,
}

impl Default for OracleStudy {
    fn default() -> Self {
        let mut env = RunConfig::new(
            ProfileKind::BridgeConflict,
            BalanceKind::R70_30,
            SlateKind::PolarizedElites,
            VoterMechanism::SortingPressure,
            CandidateMechanism::BaseReinforcement,
            RuleSpec::Plurality,
        );
        env.overrides.dynamics.mu = Some(0.0);
        OracleStudy {
            env,
            replicates: default_replicates(),
            n: default_oracle_n(),
            rounds: default_oracle_rounds(),
            base_seed: 0,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            refine_iters: DEFAULT_REFINE_ITERS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl OracleStudy {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn spec(&self, kind: OracleKind) -> OracleSpec {
        OracleSpec {
            kind,
            grid_resolution: self.grid_resolution,
            refine_iters: self.refine_iters,
            tolerance: self.tolerance,
        }
    }
}

/// One oracle round of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRound {
    pub oracle: OracleKind,
    pub replicate: usize,
    pub seed: u64,
    pub t: usize,
    pub winner_x: f64,
    pub winner_y: f64,
    pub r: f64,
    pub d: f64,
    /// Deterministic variance after this round's update.
    pub d_next_deterministic: f64,
    pub a: f64,
    pub a_signed: f64,
}

/// Per-round summary across replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleBandRow {
    pub oracle: OracleKind,
    pub t: usize,
    pub r_median: f64,
    pub r_q25: f64,
    pub r_q75: f64,
    pub d_median: f64,
    pub d_q25: f64,
    pub d_q75: f64,
    pub a_median: f64,
    pub a_q25: f64,
    pub a_q75: f64,
    pub replicates: usize,
}

#[derive(Clone, Debug)]
pub struct OracleComparison {
    pub rounds: Vec<OracleRound>,
    pub bands: Vec<OracleBandRow>,
}

pub const ORACLE_BANDS_CSV: &str = "oracle.csv";
pub const ORACLE_ROUNDS_CSV: &str = "oracle_rounds.csv";

impl OracleComparison {
    pub fn band(&self, oracle: OracleKind, t: usize) -> Option<&OracleBandRow> {
        self.bands.iter().find(|b| b.oracle == oracle && b.t == t)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(ORACLE_BANDS_CSV))?;
        for b in &self.bands {
            w.serialize(b)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join(ORACLE_ROUNDS_CSV))?;
        for r in &self.rounds {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_oracle_replicate(study: &OracleStudy, kind: OracleKind, replicate: usize) -> Result<Vec<OracleRound>> {
    let mut cfg = study.env.clone();
    cfg.n = study.n;
    cfg.seed = study.base_seed + replicate as u64;
    let run = cfg.resolve()?;
    let spec = study.spec(kind);
    let elec = generate_electorate(&run.profile, &run.balance, cfg.n, &run.bx, cfg.seed)?;
    let mut voters = elec.positions.clone();
    let mut noise = rng::stream(cfg.seed, Stream::VoterNoise);
    let mut out = Vec::with_capacity(study.rounds);
    for t in 0..study.rounds {
        let w = oracle_winner(&voters, &run.params.g, &run.bx, &spec)?;
        out.push(OracleRound {
            oracle: kind,
            replicate,
            seed: cfg.seed,
            t,
            winner_x: w[0],
            winner_y: w.get(1).copied().unwrap_or(f64::NAN),
            r: winner_radius(&voters, &w)?,
            d: pairwise_variance(&voters)?,
            d_next_deterministic: deterministic_next_variance(&voters, &w, &run.params.g, &run.bx)?,
            a: camp_asymmetry(&elec, &voters, run.asymmetry_eps)?,
            a_signed: signed_camp_asymmetry(&elec, &voters, run.asymmetry_eps)?,
        });
        voters = voter_step(&voters, &w, &run.params, &run.bx, &mut noise)?;
    }
    Ok(out)
}

/// Runs both oracles on `study.replicates` paired replicates (same electorate and
/// same voter-noise stream for both) and summarizes R, D and signed A per round.
pub fn run_oracle_comparison(study: &OracleStudy, workers: usize) -> Result<OracleComparison> {
    if study.replicates == 0 || study.rounds == 0 {
        return Err(config("oracle study needs at least one replicate and one round"));
    }
    study.spec(OracleKind::Centrality).validate()?;
    let jobs: Vec<(OracleKind, usize)> = OracleKind::ALL
        .iter()
        .flat_map(|k| (0..study.replicates).map(move |r| (*k, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| config(format!("cannot start worker pool: {e}")))?;
    let per_job: Vec<Result<Vec<OracleRound>>> =
        pool.install(|| jobs.par_iter().map(|(k, r)| run_oracle_replicate(study, *k, *r)).collect());
    let mut rounds = Vec::new();
    for job in per_job {
        rounds.extend(job?);
    }

    let mut bands = Vec::new();
    for kind in OracleKind::ALL {
        for t in 0..study.rounds {
            let rows: Vec<&OracleRound> = rounds.iter().filter(|r| r.oracle == kind && r.t == t).collect();
            let col = |f: fn(&OracleRound) -> f64| Band::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (r, d, a) = (col(|x| x.r), col(|x| x.d), col(|x| x.a_signed));
            bands.push(OracleBandRow {
                oracle: kind,
                t,
                r_median: r.median,
                r_q25: r.q25,
                r_q75: r.q75,
                d_median: d.median,
                d_q25: d.q25,
                d_q75: d.q75,
                a_median: a.median,
                a_q25: a.q25,
                a_q75: a.q75,
                replicates: rows.len(),
            });
        }
    }
    Ok(OracleComparison { rounds, bands })
}
