//! Contraction factors, drift envelopes, and pathwise checks of the one-step
//! bounds against recorded trajectories.
//!
//! The bounds hold for conditional expectations. With the noise switched off
//! the expectation is the realized value, so the checks here are pathwise and
//! refuse noisy trajectories.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsParams, RateFunction};
use crate::error::{domain, Error, Result};
use crate::geometry::{dist, PointSet};
use crate::rules::RuleSpec;
use crate::runner::RoundRecord;

/// Slack allowed on every deterministic comparison.
pub const BOUND_SLACK: f64 = 1e-12;
const MIN_PAIR_SEPARATION: f64 = 1e-9;

/// `1 - eta_min + L_eta * R`.
pub fn voter_factor(eta_min: f64, l_eta: f64, r: f64) -> f64 {
    1.0 - eta_min + l_eta * r
}

/// `1 - lambda_min + L_h * S + lambda_max * L_s`.
pub fn candidate_factor(lambda_min: f64, l_h: f64, s: f64, lambda_max: f64, l_s: f64) -> f64 {
    1.0 - lambda_min + l_h * s + lambda_max * l_s
}

/// Lipschitz constant used in the factors: closed form for monotone ramps,
/// finite differences otherwise.
pub fn rate_lipschitz(f: &RateFunction) -> f64 {
    if f.is_monotone() {
        f.lipschitz()
    } else {
        f.empirical_lipschitz(2.0 * f.width)
    }
}

/// Largest ratio `||s_j - s_l|| / ||c_j - c_l||` over candidate pairs that are
/// not (numerically) coincident; zero when no pair qualifies.
pub fn estimate_ls(candidates: &PointSet, centroids: &PointSet) -> Result<f64> {
    if candidates.len() < 2 {
        return Err(domain("supporter-spread constant needs at least two candidates"));
    }
    if candidates.len() != centroids.len() {
        return Err(domain("candidates and centroids are not aligned"));
    }
    let k = candidates.len();
    let mut best = 0.0_f64;
    for j in 0..k {
        for l in (j + 1)..k {
            let dc = dist(candidates.get(j), candidates.get(l));
            if dc > MIN_PAIR_SEPARATION {
                best = best.max(dist(centroids.get(j), centroids.get(l)) / dc);
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub t: usize,
    /// `R_t` for the voter check, `S_t` for the candidate check.
    pub radius: f64,
    pub factor: f64,
    pub bound_rhs: f64,
    pub realized_next: f64,
    pub satisfied: bool,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub bound: String,
    pub rows: Vec<ContractionRow>,
    pub all_satisfied: bool,
    /// Largest `realized_next - bound_rhs` over violating rows, 0 if none.
    pub max_violation: f64,
}

impl ContractionReport {
    fn from_rows(bound: &str, rows: Vec<ContractionRow>) -> Self {
        let all_satisfied = rows.iter().all(|r| r.satisfied);
        let max_violation = rows.iter().map(|r| -r.slack).fold(0.0, f64::max);
        ContractionReport { bound: bound.to_string(), rows, all_satisfied, max_violation }
    }
}

fn row(t: usize, radius: f64, factor: f64, bound_rhs: f64, realized_next: f64) -> ContractionRow {
    let slack = bound_rhs - realized_next;
    ContractionRow { t, radius, factor, bound_rhs, realized_next, satisfied: slack >= -BOUND_SLACK, slack }
}

/// Checks `D_{t+1} <= q_t^2 D_t` round by round.
pub fn check_voter_bound(records: &[RoundRecord], params: &DynamicsParams) -> Result<ContractionReport> {
    if params.sigma_eps != 0.0 {
        return Err(Error::Refused(
            "voter bound is checked pathwise only on noiseless trajectories (sigma_eps = 0)".into(),
        ));
    }
    let l_eta = rate_lipschitz(&params.g);
    let rows = records
        .windows(2)
        .map(|w| {
            let q = voter_factor(params.g.min, l_eta, w[0].r);
            row(w[0].t, w[0].r, q, q * q * w[0].d, w[1].d)
        })
        .collect();
    Ok(ContractionReport::from_rows("voter", rows))
}

/// Checks the candidate dispersion bound: `P_{t+1} <= p_t^2 P_t` without
/// repulsion, `P_{t+1} <= 2 p_t^2 P_t + 8 nu^2 rho^2` with it, where `p_t` uses
/// the per-round supporter-spread estimate.
pub fn check_candidate_bound(
    records: &[RoundRecord],
    params: &DynamicsParams,
    rule: &RuleSpec,
    with_repulsion: bool,
) -> Result<ContractionReport> {
    if !rule.has_smooth_assignment() {
        return Err(Error::Refused(format!(
            "{rule} uses hard assignment; supporter centroids jump across Voronoi boundaries, \
             so no finite supporter-spread constant exists"
        )));
    }
    if params.mu != 0.0 {
        return Err(Error::Refused("candidate bound requires mu = 0".into()));
    }
    if params.sigma_delta != 0.0 {
        return Err(Error::Refused(
            "candidate bound is checked pathwise only on noiseless trajectories (sigma_delta = 0)".into(),
        ));
    }
    if params.nu > 0.0 && !with_repulsion {
        return Err(Error::Refused("nu > 0 requires the repulsion form of the bound".into()));
    }
    let l_h = rate_lipschitz(&params.h);
    let offset = if with_repulsion { 8.0 * params.nu * params.nu * params.rho * params.rho } else { 0.0 };
    let mult = if with_repulsion { 2.0 } else { 1.0 };
    let rows = records
        .windows(2)
        .map(|w| {
            let l_s = w[0].l_s.ok_or_else(|| domain("record lacks a supporter-spread estimate"))?;
            let p = candidate_factor(params.h.min, l_h, w[0].s, params.h.max, l_s);
            Ok(row(w[0].t, w[0].s, p, mult * p * p * w[0].p + offset, w[1].p))
        })
        .collect::<Result<Vec<_>>>()?;
    let name = if with_repulsion { "candidate_repulsion" } else { "candidate" };
    Ok(ContractionReport::from_rows(name, rows))
}

/// Drift-envelope parameters: squared factor `a`, initial value, noise variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub a: f64,
    pub d0: f64,
    pub sigma2: f64,
}

/// `a^t D0 + sigma2 (1 - a^t) / (1 - a)`.
pub fn envelope(e: &EnvelopeParams, t: u32) -> Result<f64> {
    if !(e.a > 0.0 && e.a < 1.0) {
        return Err(domain(format!("envelope needs 0 < a < 1, got a = {}", e.a)));
    }
    let at = e.a.powi(t as i32);
    Ok(at * e.d0 + e.sigma2 * (1.0 - at) / (1.0 - e.a))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorForm {
    /// `sigma_eps^2 / (1 - q*^2)`, needs `q* < 1`.
    Voter,
    /// `sigma_delta^2 / (1 - p*^2)`, needs `p* < 1`.
    Candidate,
    /// `C_noise / (1 - 2 p*^2)`, needs `p* < 1/sqrt(2)`.
    CandidateRepulsion,
}

/// Stationary noise floor; `noise` is the variance term of the chosen form.
pub fn noise_floor(noise: f64, factor: f64, form: FloorForm) -> Result<f64> {
    if !(factor >= 0.0) {
        return Err(domain("contraction factor must be non-negative"));
    }
    let (mult, limit, cond) = match form {
        FloorForm::Voter => (1.0, 1.0, "q* < 1"),
        FloorForm::Candidate => (1.0, 1.0, "p* < 1"),
        FloorForm::CandidateRepulsion => (2.0, std::f64::consts::FRAC_1_SQRT_2, "p* < 1/sqrt(2)"),
    };
    if factor >= limit {
        return Err(domain(format!("stability condition {cond} fails (factor = {factor})")));
    }
    Ok(noise / (1.0 - mult * factor * factor))
}

/// Noise variance of the repulsion form, `8 nu^2 rho^2 + sigma_delta^2`.
pub fn repulsion_noise(nu: f64, rho: f64, sigma_delta: f64) -> f64 {
    8.0 * nu * nu * rho * rho + sigma_delta * sigma_delta
}
