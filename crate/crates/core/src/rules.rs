//! Electoral rules over sincere, distance-based ballots.
//!
//! Every tie (nearest candidate, vote totals, IRV elimination, Schulze
//! dominance) is broken toward the lowest candidate index.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::geometry::{dist, dist_sq, Point, PointSet, PolicyBox};

pub const DEFAULT_APPROVAL_THRESHOLD: f64 = 0.35;
pub const DEFAULT_MAX_SCORE: f64 = 10.0;
pub const EMPTY_SUPPORT_WEIGHT: f64 = 1e-12;

/// Voter-to-candidate support matrix, `n x k`, rows summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentWeights {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl AssignmentWeights {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) || k == 0 {
            return Err(domain("weight rows must share a positive width"));
        }
        let w = AssignmentWeights { n: rows.len(), k, data: rows.concat() };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            let row = self.row(i);
            if row.iter().any(|v| !(*v >= 0.0)) {
                return Err(domain(format!("row {i} has a negative or NaN weight")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(domain(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(())
    }

    pub fn voters(&self) -> usize {
        self.n
    }

    pub fn candidates(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.k];
        for i in 0..self.n {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    pub fn is_one_hot(&self) -> bool {
        (0..self.n).all(|i| {
            let row = self.row(i);
            row.iter().filter(|v| **v == 1.0).count() == 1 && row.iter().all(|v| *v == 0.0 || *v == 1.0)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElectionOutcome {
    pub winner: Point,
    /// Absent for convex-combination rules.
    pub winner_index: Option<usize>,
    pub tallies: Vec<f64>,
    pub weights: AssignmentWeights,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleSpec {
    Plurality,
    Irv,
    Approval {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Score {
        #[serde(default = "default_max_score")]
        max_score: f64,
    },
    CondorcetSchulze,
    Fractional {
        sigma: f64,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_APPROVAL_THRESHOLD
}

fn default_max_score() -> f64 {
    DEFAULT_MAX_SCORE
}

impl RuleSpec {
    /// The seven rule cells of the experiment grid, in table order.
    pub fn grid_rules() -> Vec<RuleSpec> {
        vec![
            RuleSpec::Plurality,
            RuleSpec::Irv,
            RuleSpec::Approval { threshold: DEFAULT_APPROVAL_THRESHOLD },
            RuleSpec::Score { max_score: DEFAULT_MAX_SCORE },
            RuleSpec::CondorcetSchulze,
            RuleSpec::Fractional { sigma: 0.3 },
            RuleSpec::Fractional { sigma: 1.0 },
        ]
    }

    pub fn label(&self) -> String {
        match self {
            RuleSpec::Plurality => "plurality".into(),
            RuleSpec::Irv => "irv".into(),
            RuleSpec::Approval { .. } => "approval".into(),
            RuleSpec::Score { .. } => "score".into(),
            RuleSpec::CondorcetSchulze => "condorcet".into(),
            RuleSpec::Fractional { sigma } => format!("fractional_{sigma:.1}"),
        }
    }

    /// Parses a grid label such as `plurality` or `fractional_0.3`.
    pub fn from_label(s: &str) -> Result<Self> {
        Ok(match s {
            "plurality" => RuleSpec::Plurality,
            "irv" => RuleSpec::Irv,
            "approval" => RuleSpec::Approval { threshold: DEFAULT_APPROVAL_THRESHOLD },
            "score" => RuleSpec::Score { max_score: DEFAULT_MAX_SCORE },
            "condorcet" => RuleSpec::CondorcetSchulze,
            other => match other.strip_prefix("fractional_").map(str::parse::<f64>) {
                Some(Ok(sigma)) => RuleSpec::Fractional { sigma },
                _ => return Err(config(format!("unknown rule '{s}'"))),
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RuleSpec::Approval { threshold } if !(threshold > 0.0) => {
                Err(config("approval threshold must be positive"))
            }
            RuleSpec::Score { max_score } if !(max_score > 0.0) => Err(config("score range must be positive")),
            RuleSpec::Fractional { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(config("fractional bandwidth sigma must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Soft-assignment rules satisfy the supporter-spread Lipschitz condition.
    pub fn has_smooth_assignment(&self) -> bool {
        matches!(self, RuleSpec::Fractional { .. })
    }

    pub fn elects_from_slate(&self) -> bool {
        !matches!(self, RuleSpec::Fractional { .. })
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Runs `rule` on the given electorate and slate.
pub fn elect(rule: &RuleSpec, voters: &PointSet, candidates: &PointSet, bx: &PolicyBox) -> Result<ElectionOutcome> {
    rule.validate()?;
    check_inputs(voters, candidates)?;
    match *rule {
        RuleSpec::Plurality => plurality_winner(voters, candidates),
        RuleSpec::Irv => irv_winner(voters, candidates),
        RuleSpec::Approval { threshold } => approval_winner(voters, candidates, threshold),
        RuleSpec::Score { max_score } => score_winner(voters, candidates, max_score, bx.diameter()),
        RuleSpec::CondorcetSchulze => condorcet_schulze_winner(voters, candidates),
        RuleSpec::Fractional { sigma } => fractional_winner(voters, candidates, sigma),
    }
}

fn check_inputs(voters: &PointSet, candidates: &PointSet) -> Result<()> {
    if voters.is_empty() || candidates.is_empty() {
        return Err(domain("an election needs at least one voter and one candidate"));
    }
    if voters.dim() != candidates.dim() {
        return Err(domain("voters and candidates live in different dimensions"));
    }
    Ok(())
}

fn nearest(voter: &[f64], candidates: &PointSet) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in candidates.iter().enumerate() {
        let d = dist_sq(voter, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Index of the largest tally, first on ties.
fn argmax(tallies: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in tallies.iter().enumerate() {
        if *v > tallies[best] {
            best = j;
        }
    }
    best
}

fn slate_outcome(candidates: &PointSet, winner: usize, tallies: Vec<f64>, voters: &PointSet) -> ElectionOutcome {
    ElectionOutcome {
        winner: candidates.point(winner),
        winner_index: Some(winner),
        tallies,
        weights: hard_weights(voters, candidates),
    }
}

pub fn plurality_winner(voters: &PointSet, candidates: &PointSet) -> Result<ElectionOutcome> {
    check_inputs(voters, candidates)?;
    let mut tallies = vec![0.0; candidates.len()];
    for v in voters.iter() {
        tallies[nearest(v, candidates)] += 1.0;
    }
    let w = argmax(&tallies);
    Ok(slate_outcome(candidates, w, tallies, voters))
}

/// Candidate indices ordered by increasing distance, lower index first on ties.
pub fn ranking(voter: &[f64], candidates: &PointSet) -> Vec<usize> {
    let d: Vec<f64> = candidates.iter().map(|c| dist_sq(voter, c)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order
}

/// Instant runoff. `tallies` holds the first-preference counts of the final round.
pub fn irv_winner(voters: &PointSet, candidates: &PointSet) -> Result<ElectionOutcome> {
    check_inputs(voters, candidates)?;
    let k = candidates.len();
    let ballots: Vec<Vec<usize>> = voters.iter().map(|v| ranking(v, candidates)).collect();
    let mut active = vec![true; k];
    let mut remaining = k;
    loop {
        let mut counts = vec![0.0; k];
        for b in &ballots {
            if let Some(&top) = b.iter().find(|&&c| active[c]) {
                counts[top] += 1.0;
            }
        }
        let total: f64 = counts.iter().sum();
        let leader = argmax(&counts);
        if remaining == 1 || counts[leader] > 0.5 * total {
            return Ok(slate_outcome(candidates, leader, counts, voters));
        }
        let loser = (0..k)
            .filter(|&c| active[c])
            .fold(None, |acc: Option<usize>, c| match acc {
                Some(b) if counts[b] <= counts[c] => Some(b),
                _ => Some(c),
            })
            .expect("at least two active candidates");
        active[loser] = false;
        remaining -= 1;
    }
}

/// Approval with a distance threshold; a voter approving nobody approves their
/// nearest candidate.
pub fn approval_winner(voters: &PointSet, candidates: &PointSet, threshold: f64) -> Result<ElectionOutcome> {
    check_inputs(voters, candidates)?;
    if !(threshold > 0.0) {
        return Err(config("approval threshold must be positive"));
    }
    let mut tallies = vec![0.0; candidates.len()];
    for v in voters.iter() {
        let mut any = false;
        for (j, c) in candidates.iter().enumerate() {
            if dist(v, c) <= threshold {
                tallies[j] += 1.0;
                any = true;
            }
        }
        if !any {
            tallies[nearest(v, candidates)] += 1.0;
        }
    }
    let w = argmax(&tallies);
    Ok(slate_outcome(candidates, w, tallies, voters))
}

/// Score ballots `max_score * max(0, 1 - d / diameter)`.
pub fn score_winner(voters: &PointSet, candidates: &PointSet, max_score: f64, diameter: f64) -> Result<ElectionOutcome> {
    check_inputs(voters, candidates)?;
    if !(diameter > 0.0) {
        return Err(domain("score scale needs a positive box diameter"));
    }
    let mut tallies = vec![0.0; candidates.len()];
    for v in voters.iter() {
        for (j, c) in candidates.iter().enumerate() {
            tallies[j] += max_score * (1.0 - dist(v, c) / diameter).max(0.0);
        }
    }
    let w = argmax(&tallies);
    Ok(slate_outcome(candidates, w, tallies, voters))
}

/// `m[a][b]` = number of voters strictly closer to `a` than to `b`.
pub fn pairwise_preferences(voters: &PointSet, candidates: &PointSet) -> Vec<Vec<u64>> {
    let k = candidates.len();
    let mut m = vec![vec![0u64; k]; k];
    let mut d = vec![0.0; k];
    for v in voters.iter() {
        for (j, c) in candidates.iter().enumerate() {
            d[j] = dist_sq(v, c);
        }
        for a in 0..k {
            for b in 0..k {
                if d[a] < d[b] {
                    m[a][b] += 1;
                }
            }
        }
    }
    m
}

/// Candidate beating every rival in strict pairwise majority, if any.
pub fn condorcet_winner(pref: &[Vec<u64>]) -> Option<usize> {
    let k = pref.len();
    (0..k).find(|&a| (0..k).all(|b| a == b || pref[a][b] > pref[b][a]))
}

/// Widest-path strengths with winning-votes link weights.
pub fn schulze_strengths(pref: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let k = pref.len();
    let mut p = vec![vec![0u64; k]; k];
    for a in 0..k {
        for b in 0..k {
            if a != b && pref[a][b] > pref[b][a] {
                p[a][b] = pref[a][b];
            }
        }
    }
    for via in 0..k {
        for a in 0..k {
            if a == via {
                continue;
            }
            for b in 0..k {
                if b == a || b == via {
                    continue;
                }
                let through = p[a][via].min(p[via][b]);
                if through > p[a][b] {
                    p[a][b] = through;
                }
            }
        }
    }
    p
}

/// Lowest-indexed candidate whose beatpath to every rival is at least as strong
/// as the reverse.
pub fn schulze_winner(pref: &[Vec<u64>]) -> usize {
    let p = schulze_strengths(pref);
    let k = pref.len();
    (0..k)
        .find(|&a| (0..k).all(|b| a == b || p[a][b] >= p[b][a]))
        .unwrap_or(0)
}

pub fn condorcet_schulze_winner(voters: &PointSet, candidates: &PointSet) -> Result<ElectionOutcome> {
    check_inputs(voters, candidates)?;
    let pref = pairwise_preferences(voters, candidates);
    let w = condorcet_winner(&pref).unwrap_or_else(|| schulze_winner(&pref));
    // tally: pairwise wins of each candidate
    let k = candidates.len();
    let tallies = (0..k)
        .map(|a| (0..k).filter(|&b| a != b && pref[a][b] > pref[b][a]).count() as f64)
        .collect();
    Ok(slate_outcome(candidates, w, tallies, voters))
}

/// Gaussian-kernel soft assignment with bandwidth `sigma`.
pub fn fractional_weights(voters: &PointSet, candidates: &PointSet, sigma: f64) -> Result<AssignmentWeights> {
    check_inputs(voters, candidates)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(config("fractional bandwidth sigma must be positive"));
    }
    let k = candidates.len();
    let inv = 1.0 / (sigma * sigma);
    let mut data = Vec::with_capacity(voters.len() * k);
    let mut logits = vec![0.0; k];
    for v in voters.iter() {
        for (j, c) in candidates.iter().enumerate() {
            logits[j] = -dist_sq(v, c) * inv;
        }
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = data.len();
        data.extend(logits.iter().map(|l| (l - top).exp()));
        let z: f64 = data[start..].iter().sum();
        data[start..].iter_mut().for_each(|w| *w /= z);
    }
    Ok(AssignmentWeights { n: voters.len(), k, data })
}

/// Implements `sum_j beta_j c_j` with `beta` the column means of the soft weights.
pub fn fractional_winner(voters: &PointSet, candidates: &PointSet, sigma: f64) -> Result<ElectionOutcome> {
    let weights = fractional_weights(voters, candidates, sigma)?;
    let beta = weights.column_means();
    let mut w = vec![0.0; candidates.dim()];
    for (b, c) in beta.iter().zip(candidates.iter()) {
        for (acc, v) in w.iter_mut().zip(c) {
            *acc += b * v;
        }
    }
    Ok(ElectionOutcome { winner: Point(w), winner_index: None, tallies: beta, weights })
}

/// One-hot nearest-candidate (Voronoi) assignment.
pub fn hard_weights(voters: &PointSet, candidates: &PointSet) -> AssignmentWeights {
    let k = candidates.len();
    let mut data = vec![0.0; voters.len() * k];
    for (i, v) in voters.iter().enumerate() {
        data[i * k + nearest(v, candidates)] = 1.0;
    }
    AssignmentWeights { n: voters.len(), k, data }
}

/// Support weights a rule induces: soft for Fractional, Voronoi otherwise.
pub fn assignment_weights(rule: &RuleSpec, voters: &PointSet, candidates: &PointSet) -> Result<AssignmentWeights> {
    rule.validate()?;
    check_inputs(voters, candidates)?;
    match *rule {
        RuleSpec::Fractional { sigma } => fractional_weights(voters, candidates, sigma),
        _ => Ok(hard_weights(voters, candidates)),
    }
}

/// Weighted supporter centroid per candidate; candidates with (near) zero total
/// support keep their own position.
pub fn supporter_centroids(weights: &AssignmentWeights, voters: &PointSet, candidates: &PointSet) -> Result<PointSet> {
    if weights.voters() != voters.len() || weights.candidates() != candidates.len() {
        return Err(domain("weight matrix does not match voters x candidates"));
    }
    let dim = voters.dim();
    let k = candidates.len();
    let mut sums = vec![0.0; k * dim];
    let mut mass = vec![0.0; k];
    for (i, v) in voters.iter().enumerate() {
        for (j, a) in weights.row(i).iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            mass[j] += a;
            for (acc, x) in sums[j * dim..(j + 1) * dim].iter_mut().zip(v) {
                *acc += a * x;
            }
        }
    }
    let mut out = PointSet::with_capacity(dim, k);
    for j in 0..k {
        if mass[j] < EMPTY_SUPPORT_WEIGHT {
            out.push(candidates.get(j));
        } else {
            let s: Vec<f64> = sums[j * dim..(j + 1) * dim].iter().map(|v| v / mass[j]).collect();
            out.push(&s);
        }
    }
    Ok(out)
}
