//! Experiment orchestration: single runs, the factorial grid, persistence and
//! summary tables.
//!
//! Within a round the order is fixed: assignment weights and supporter centroids
//! are computed from the pre-update state, the winner is elected, metrics are
//! recorded, then voters and candidates both move using that same pre-update
//! state.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{estimate_ls, rate_lipschitz, voter_factor};
use crate::dynamics::{
    candidate_step, preset_params, voter_step, CandidateMechanism, DynamicsParams, MechanismPreset, RateFunction,
    VoterMechanism,
};
use crate::electorate::{
    camp_asymmetry, generate_electorate, generate_slate, signed_camp_asymmetry, BalanceKind, CampBalance,
    ElectorateProfile, ProfileKind, SlateKind, SlateSpec,
};
use crate::error::{config, Error, Result};
use crate::geometry::{coordinatewise_median, dist, pairwise_variance, supporter_radius, winner_radius, PolicyBox};
use crate::rng::{self, Stream};
use crate::rules::{elect, supporter_centroids, RuleSpec};
use crate::stats::{mean, Band};

pub const DEFAULT_N: usize = 900;
pub const DEFAULT_ROUNDS: usize = 20;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_ASYMMETRY_EPS: f64 = 1e-9;

fn default_n() -> usize {
    DEFAULT_N
}
fn default_rounds() -> usize {
    DEFAULT_ROUNDS
}
fn default_k() -> usize {
    DEFAULT_K
}

/// Optional replacements for any preset-derived dynamics parameter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsOverrides {
    pub g: Option<RateFunction>,
    pub h: Option<RateFunction>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub rho: Option<f64>,
    pub repulsion_radius: Option<f64>,
    pub sigma_eps: Option<f64>,
    pub sigma_delta: Option<f64>,
}

impl DynamicsOverrides {
    pub fn apply(&self, mut p: DynamicsParams) -> DynamicsParams {
        if let Some(g) = self.g {
            p.g = g;
        }
        if let Some(h) = self.h {
            p.h = h;
        }
        p.mu = self.mu.unwrap_or(p.mu);
        p.nu = self.nu.unwrap_or(p.nu);
        p.rho = self.rho.unwrap_or(p.rho);
        p.repulsion_radius = self.repulsion_radius.unwrap_or(p.repulsion_radius);
        p.sigma_eps = self.sigma_eps.unwrap_or(p.sigma_eps);
        p.sigma_delta = self.sigma_delta.unwrap_or(p.sigma_delta);
        p
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Replaces the named profile's mixture parameters.
    pub profile: Option<ElectorateProfile>,
    pub majority_fraction: Option<f64>,
    pub ladder_span: Option<f64>,
    pub elite_spread: Option<f64>,
    pub asymmetry_eps: Option<f64>,
    #[serde(default)]
    pub dynamics: DynamicsOverrides,
}

/// One simulation cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileKind,
    pub balance: BalanceKind,
    pub slate: SlateKind,
    pub voter_mechanism: VoterMechanism,
    pub candidate_mechanism: CandidateMechanism,
    pub rule: RuleSpec,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
}

/// Everything a run needs, with presets and overrides merged.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub bx: PolicyBox,
    pub profile: ElectorateProfile,
    pub balance: CampBalance,
    pub slate: SlateSpec,
    pub params: DynamicsParams,
    pub asymmetry_eps: f64,
}

impl RunConfig {
    pub fn new(
        profile: ProfileKind,
        balance: BalanceKind,
        slate: SlateKind,
        voter_mechanism: VoterMechanism,
        candidate_mechanism: CandidateMechanism,
        rule: RuleSpec,
    ) -> Self {
        RunConfig {
            profile,
            balance,
            slate,
            voter_mechanism,
            candidate_mechanism,
            rule,
            n: DEFAULT_N,
            rounds: DEFAULT_ROUNDS,
            k: DEFAULT_K,
            seed: 0,
            overrides: Overrides::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Validates the configuration and merges presets with overrides.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        if self.n < 2 {
            return Err(config("n must be at least 2"));
        }
        if self.k < 2 {
            return Err(config("k must be at least 2"));
        }
        self.rule.validate()?;
        let bx = PolicyBox::unit(2);
        let o = &self.overrides;
        let profile = match &o.profile {
            Some(p) => {
                if p.majority_mean.dim() != 2 || p.minority_mean.dim() != 2 {
                    return Err(config("profile means must be two-dimensional"));
                }
                p.clone()
            }
            None => ElectorateProfile::preset(self.profile),
        };
        profile.validate(&bx)?;
        let mut balance = CampBalance::preset(self.balance);
        if let Some(f) = o.majority_fraction {
            balance.majority_fraction = f;
        }
        if !(0.5..1.0).contains(&balance.majority_fraction) {
            return Err(config("majority fraction must lie in [0.5, 1)"));
        }
        let mut slate = SlateSpec::new(self.slate, self.k);
        slate.ladder_span = o.ladder_span.unwrap_or(slate.ladder_span);
        slate.elite_spread = o.elite_spread.unwrap_or(slate.elite_spread);
        let preset = MechanismPreset { voter: self.voter_mechanism, candidate: self.candidate_mechanism };
        let params = o.dynamics.apply(preset_params(preset, &bx));
        params.validate()?;
        let asymmetry_eps = o.asymmetry_eps.unwrap_or(DEFAULT_ASYMMETRY_EPS);
        if !(asymmetry_eps >= 0.0) {
            return Err(config("asymmetry_eps must be non-negative"));
        }
        Ok(ResolvedRun { bx, profile, balance, slate, params, asymmetry_eps })
    }
}

/// Metrics recorded at the start of a round, after the election.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub winner: Vec<f64>,
    pub winner_index: Option<usize>,
    /// Winner radius.
    pub r: f64,
    /// Supporter centroid radius.
    pub s: f64,
    /// Voter disagreement (empirical variance).
    pub d: f64,
    /// Candidate dispersion (empirical variance).
    pub p: f64,
    /// Camp-displacement asymmetry in `[0, 1]`.
    pub a: f64,
    /// Signed asymmetry in `[-1, 1]`, positive when the minority moved more.
    pub a_signed: f64,
    pub dist_winner_to_mean: f64,
    pub dist_winner_to_median: f64,
    pub q_t: Option<f64>,
    /// Supporter-spread estimate for this round's assignment.
    pub l_s: Option<f64>,
    pub candidates: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    pub params: DynamicsParams,
    pub records: Vec<RoundRecord>,
}

/// Simulates `cfg.rounds` rounds and returns `rounds + 1` records (t = 0 included).
pub fn run_simulation(cfg: &RunConfig) -> Result<RunOutput> {
    let run = cfg.resolve()?;
    let bx = &run.bx;
    let elec = generate_electorate(&run.profile, &run.balance, cfg.n, bx, cfg.seed)?;
    let mut voters = elec.positions.clone();
    let mut cands = generate_slate(&run.slate, &run.profile, bx, cfg.seed)?;
    let mut voter_rng = rng::stream(cfg.seed, Stream::VoterNoise);
    let mut cand_rng = rng::stream(cfg.seed, Stream::CandidateNoise);
    let l_eta = rate_lipschitz(&run.params.g);

    let mut records = Vec::with_capacity(cfg.rounds + 1);
    for t in 0..=cfg.rounds {
        let outcome = elect(&cfg.rule, &voters, &cands, bx)?;
        let centroids = supporter_centroids(&outcome.weights, &voters, &cands)?;
        let mean_v = voters.mean()?;
        let median_v = coordinatewise_median(&voters)?;
        let r = winner_radius(&voters, &outcome.winner)?;
        records.push(RoundRecord {
            t,
            winner: outcome.winner.0.clone(),
            winner_index: outcome.winner_index,
            r,
            s: supporter_radius(&cands, &centroids)?,
            d: pairwise_variance(&voters)?,
            p: pairwise_variance(&cands)?,
            a: camp_asymmetry(&elec, &voters, run.asymmetry_eps)?,
            a_signed: signed_camp_asymmetry(&elec, &voters, run.asymmetry_eps)?,
            dist_winner_to_mean: dist(&outcome.winner, &mean_v),
            dist_winner_to_median: dist(&outcome.winner, &median_v),
            q_t: Some(voter_factor(run.params.g.min, l_eta, r)),
            l_s: estimate_ls(&cands, &centroids).ok(),
            candidates: cands.to_rows(),
        });
        if t == cfg.rounds {
            break;
        }
        let next_voters = voter_step(&voters, &outcome.winner, &run.params, bx, &mut voter_rng)?;
        cands = candidate_step(&cands, &centroids, &mean_v, &run.params, bx, &mut cand_rng)?;
        voters = next_voters;
    }
    Ok(RunOutput { config: cfg.clone(), params: run.params, records })
}

fn all_profiles() -> Vec<ProfileKind> {
    ProfileKind::ALL.to_vec()
}
fn all_balances() -> Vec<BalanceKind> {
    BalanceKind::ALL.to_vec()
}
fn all_slates() -> Vec<SlateKind> {
    SlateKind::ALL.to_vec()
}
fn all_voter_mechanisms() -> Vec<VoterMechanism> {
    VoterMechanism::ALL.to_vec()
}
fn all_candidate_mechanisms() -> Vec<CandidateMechanism> {
    CandidateMechanism::ALL.to_vec()
}
fn default_replicate_seeds() -> Vec<u64> {
    vec![0]
}

/// Factorial design: every combination of the axis values, once per replicate seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "all_profiles")]
    pub profiles: Vec<ProfileKind>,
    #[serde(default = "all_balances")]
    pub balances: Vec<BalanceKind>,
    #[serde(default = "all_slates")]
    pub slates: Vec<SlateKind>,
    #[serde(default = "all_voter_mechanisms")]
    pub voter_mechanisms: Vec<VoterMechanism>,
    #[serde(default = "all_candidate_mechanisms")]
    pub candidate_mechanisms: Vec<CandidateMechanism>,
    #[serde(default = "RuleSpec::grid_rules")]
    pub rules: Vec<RuleSpec>,
    #[serde(default = "default_replicate_seeds")]
    pub replicate_seeds: Vec<u64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Keep only candidate mechanisms whose effective centroid pull is zero.
    #[serde(default)]
    pub mu_zero: bool,
    #[serde(default)]
    pub overrides: Overrides,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            profiles: all_profiles(),
            balances: all_balances(),
            slates: all_slates(),
            voter_mechanisms: all_voter_mechanisms(),
            candidate_mechanisms: all_candidate_mechanisms(),
            rules: RuleSpec::grid_rules(),
            replicate_seeds: default_replicate_seeds(),
            n: DEFAULT_N,
            rounds: DEFAULT_ROUNDS,
            k: DEFAULT_K,
            mu_zero: false,
            overrides: Overrides::default(),
        }
    }
}

impl GridSpec {
    /// The supplementary design restricted to zero centroid pull.
    pub fn mu_zero() -> Self {
        GridSpec { mu_zero: true, ..GridSpec::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    fn candidate_axis(&self) -> Vec<CandidateMechanism> {
        if !self.mu_zero {
            return self.candidate_mechanisms.clone();
        }
        let bx = PolicyBox::unit(2);
        self.candidate_mechanisms
            .iter()
            .copied()
            .filter(|c| {
                let preset = MechanismPreset { voter: VoterMechanism::ConsensusPull, candidate: *c };
                self.overrides.dynamics.apply(preset_params(preset, &bx)).mu == 0.0
            })
            .collect()
    }

    /// Cell configurations in a fixed order (profile, balance, slate, voter
    /// mechanism, candidate mechanism, rule), without replicate seeds.
    pub fn cells(&self) -> Vec<RunConfig> {
        let cand_axis = self.candidate_axis();
        let mut out = Vec::new();
        for &profile in &self.profiles {
            for &balance in &self.balances {
                for &slate in &self.slates {
                    for &voter in &self.voter_mechanisms {
                        for &cand in &cand_axis {
                            for rule in &self.rules {
                                out.push(RunConfig {
                                    profile,
                                    balance,
                                    slate,
                                    voter_mechanism: voter,
                                    candidate_mechanism: cand,
                                    rule: *rule,
                                    n: self.n,
                                    rounds: self.rounds,
                                    k: self.k,
                                    seed: 0,
                                    overrides: self.overrides.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `(cell index, replicate index, config with seed)` for every run.
    pub fn runs(&self) -> Vec<(usize, usize, RunConfig)> {
        let cells = self.cells();
        let mut out = Vec::with_capacity(cells.len() * self.replicate_seeds.len());
        for (ci, cell) in cells.iter().enumerate() {
            for (ri, seed) in self.replicate_seeds.iter().enumerate() {
                let mut cfg = cell.clone();
                cfg.seed = *seed;
                out.push((ci, ri, cfg));
            }
        }
        out
    }
}

/// One row of the per-run summary table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub cell: usize,
    pub replicate: usize,
    pub seed: u64,
    pub profile: String,
    pub balance: String,
    pub slate: String,
    pub voter_mechanism: String,
    pub candidate_mechanism: String,
    pub system: String,
    pub n: usize,
    pub rounds: usize,
    pub status: String,
    pub error: String,
    pub r0: Option<f64>,
    pub r_end: Option<f64>,
    pub s0: Option<f64>,
    pub s_end: Option<f64>,
    pub d0: Option<f64>,
    pub d_end: Option<f64>,
    pub delta_d: Option<f64>,
    pub p0: Option<f64>,
    pub p_end: Option<f64>,
    pub delta_p: Option<f64>,
    pub wc0: Option<f64>,
    pub wc_end: Option<f64>,
    pub delta_wc: Option<f64>,
    pub wm0: Option<f64>,
    pub wm_end: Option<f64>,
    pub delta_wm: Option<f64>,
    pub a_end: Option<f64>,
}

impl RunSummary {
    fn skeleton(cell: usize, replicate: usize, cfg: &RunConfig) -> Self {
        RunSummary {
            run_id: format!("c{cell:04}_r{replicate:03}"),
            cell,
            replicate,
            seed: cfg.seed,
            profile: cfg.profile.to_string(),
            balance: cfg.balance.to_string(),
            slate: cfg.slate.to_string(),
            voter_mechanism: cfg.voter_mechanism.to_string(),
            candidate_mechanism: cfg.candidate_mechanism.to_string(),
            system: cfg.rule.label(),
            n: cfg.n,
            rounds: cfg.rounds,
            ..RunSummary::default()
        }
    }

    pub fn from_records(cell: usize, replicate: usize, cfg: &RunConfig, records: &[RoundRecord]) -> Self {
        let mut s = Self::skeleton(cell, replicate, cfg);
        s.status = "ok".into();
        let (first, last) = (&records[0], &records[records.len() - 1]);
        s.r0 = Some(first.r);
        s.r_end = Some(last.r);
        s.s0 = Some(first.s);
        s.s_end = Some(last.s);
        s.d0 = Some(first.d);
        s.d_end = Some(last.d);
        s.delta_d = Some(last.d - first.d);
        s.p0 = Some(first.p);
        s.p_end = Some(last.p);
        s.delta_p = Some(last.p - first.p);
        s.wc0 = Some(first.dist_winner_to_mean);
        s.wc_end = Some(last.dist_winner_to_mean);
        s.delta_wc = Some(last.dist_winner_to_mean - first.dist_winner_to_mean);
        s.wm0 = Some(first.dist_winner_to_median);
        s.wm_end = Some(last.dist_winner_to_median);
        s.delta_wm = Some(last.dist_winner_to_median - first.dist_winner_to_median);
        s.a_end = Some(last.a);
        s
    }

    pub fn failed(cell: usize, replicate: usize, cfg: &RunConfig, err: &Error) -> Self {
        let mut s = Self::skeleton(cell, replicate, cfg);
        s.status = "error".into();
        s.error = err.to_string();
        s
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Identifies the run's cell up to the electoral rule.
    fn pairing_key(&self) -> (String, String, String, String, String, usize) {
        (
            self.profile.clone(),
            self.balance.clone(),
            self.slate.clone(),
            self.voter_mechanism.clone(),
            self.candidate_mechanism.clone(),
            self.replicate,
        )
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub records: Vec<RoundRecord>,
}

/// Runs every (cell, replicate) of `grid` on `workers` threads. A failing cell
/// is recorded in its summary row and does not stop the grid. Output order is
/// the grid order regardless of `workers`.
pub fn run_grid(grid: &GridSpec, workers: usize) -> Result<Vec<RunResult>> {
    let runs = grid.runs();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        runs.par_iter()
            .map(|(cell, rep, cfg)| match run_simulation(cfg) {
                Ok(out) => RunResult {
                    summary: RunSummary::from_records(*cell, *rep, cfg, &out.records),
                    records: out.records,
                },
                Err(e) => RunResult { summary: RunSummary::failed(*cell, *rep, cfg, &e), records: Vec::new() },
            })
            .collect()
    }))
}

pub const RUNS_CSV: &str = "runs.csv";
pub const RECORDS_DIR: &str = "runs";

pub fn write_records_jsonl(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<RoundRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_summaries_csv(path: &Path, summaries: &[&RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `runs.csv` plus one `runs/<run_id>.jsonl` per successful run.
pub fn write_results(dir: &Path, results: &[RunResult]) -> Result<()> {
    let rec_dir = dir.join(RECORDS_DIR);
    fs::create_dir_all(&rec_dir)?;
    let summaries: Vec<&RunSummary> = results.iter().map(|r| &r.summary).collect();
    write_summaries_csv(&dir.join(RUNS_CSV), &summaries)?;
    for r in results.iter().filter(|r| r.summary.is_ok()) {
        write_records_jsonl(&rec_dir.join(format!("{}.jsonl", r.summary.run_id)), &r.records)?;
    }
    Ok(())
}

/// Reads back what [`write_results`] produced.
pub fn read_results(dir: &Path) -> Result<Vec<RunResult>> {
    let mut rdr = csv::Reader::from_path(dir.join(RUNS_CSV))?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let summary: RunSummary = row?;
        let records = if summary.is_ok() {
            read_records_jsonl(&dir.join(RECORDS_DIR).join(format!("{}.jsonl", summary.run_id)))?
        } else {
            Vec::new()
        };
        out.push(RunResult { summary, records });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    /// Per-round differences from Plurality: median and interquartile range.
    Trajectory,
    /// Mean start-to-end change in D per system and mechanism pair.
    MechanismHeatmap,
    /// Mean start-to-end change in D per system and camp balance.
    BalanceHeatmap,
    /// Mean change in D against mean change in winner-to-center distance.
    Tradeoff,
    /// Mean end-state S and change in P per system and candidate mechanism.
    CandidateSide,
}

impl SummaryMode {
    pub const ALL: [SummaryMode; 5] = [
        SummaryMode::Trajectory,
        SummaryMode::MechanismHeatmap,
        SummaryMode::BalanceHeatmap,
        SummaryMode::Tradeoff,
        SummaryMode::CandidateSide,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SummaryMode::Trajectory => "trajectory",
            SummaryMode::MechanismHeatmap => "mechanism_heatmap",
            SummaryMode::BalanceHeatmap => "balance_heatmap",
            SummaryMode::Tradeoff => "tradeoff",
            SummaryMode::CandidateSide => "candidate_side",
        }
    }
}

impl std::str::FromStr for SummaryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SummaryMode::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| config(format!("unknown summary mode '{s}'")))
    }
}

/// A rectangular table of formatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

const TRAJECTORY_METRICS: [(&str, fn(&RoundRecord) -> f64); 4] = [
    ("voter_variance", |r| r.d),
    ("candidate_variance", |r| r.p),
    ("winner_to_center", |r| r.dist_winner_to_mean),
    ("winner_to_median", |r| r.dist_winner_to_median),
];

/// Systems in order of first appearance.
fn systems(runs: &[&RunResult]) -> Vec<String> {
    let mut seen = Vec::new();
    for r in runs {
        if !seen.contains(&r.summary.system) {
            seen.push(r.summary.system.clone());
        }
    }
    seen
}

fn ordered_values<'a>(runs: &[&'a RunResult], f: impl Fn(&'a RunSummary) -> String) -> Vec<String> {
    let mut seen = Vec::new();
    for r in runs {
        let v = f(&r.summary);
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    seen
}

/// Builds one of the summary tables from successful runs.
pub fn summarize(results: &[RunResult], mode: SummaryMode) -> Result<Table> {
    let ok: Vec<&RunResult> = results.iter().filter(|r| r.summary.is_ok()).collect();
    let systems = systems(&ok);
    match mode {
        SummaryMode::Trajectory => trajectory_table(&ok, &systems),
        SummaryMode::MechanismHeatmap => {
            let mut t = Table::new(&["voter_mechanism", "candidate_mechanism", "system", "mean_delta_d", "runs"]);
            let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
            for r in &ok {
                let s = &r.summary;
                groups
                    .entry((s.voter_mechanism.clone(), s.candidate_mechanism.clone(), s.system.clone()))
                    .or_default()
                    .push(s.delta_d.unwrap_or(f64::NAN));
            }
            for v in ordered_values(&ok, |s| s.voter_mechanism.clone()) {
                for c in ordered_values(&ok, |s| s.candidate_mechanism.clone()) {
                    for sys in &systems {
                        if let Some(vals) = groups.get(&(v.clone(), c.clone(), sys.clone())) {
                            t.rows.push(vec![v.clone(), c.clone(), sys.clone(), fmt(mean(vals)), vals.len().to_string()]);
                        }
                    }
                }
            }
            Ok(t)
        }
        SummaryMode::BalanceHeatmap => {
            let mut t = Table::new(&["balance", "system", "mean_delta_d", "runs"]);
            for b in ordered_values(&ok, |s| s.balance.clone()) {
                for sys in &systems {
                    let vals: Vec<f64> = ok
                        .iter()
                        .filter(|r| r.summary.balance == b && &r.summary.system == sys)
                        .filter_map(|r| r.summary.delta_d)
                        .collect();
                    if !vals.is_empty() {
                        t.rows.push(vec![b.clone(), sys.clone(), fmt(mean(&vals)), vals.len().to_string()]);
                    }
                }
            }
            Ok(t)
        }
        SummaryMode::Tradeoff => {
            let mut t = Table::new(&["system", "mean_delta_d", "mean_delta_winner_to_center", "runs"]);
            for sys in &systems {
                let mine: Vec<&RunSummary> =
                    ok.iter().map(|r| &r.summary).filter(|s| &s.system == sys).collect();
                let dd: Vec<f64> = mine.iter().filter_map(|s| s.delta_d).collect();
                let dw: Vec<f64> = mine.iter().filter_map(|s| s.delta_wc).collect();
                t.rows.push(vec![sys.clone(), fmt(mean(&dd)), fmt(mean(&dw)), mine.len().to_string()]);
            }
            Ok(t)
        }
        SummaryMode::CandidateSide => {
            let mut t = Table::new(&["candidate_mechanism", "system", "mean_s_end", "mean_delta_p", "runs"]);
            for c in ordered_values(&ok, |s| s.candidate_mechanism.clone()) {
                for sys in &systems {
                    let mine: Vec<&RunSummary> = ok
                        .iter()
                        .map(|r| &r.summary)
                        .filter(|s| s.candidate_mechanism == c && &s.system == sys)
                        .collect();
                    if mine.is_empty() {
                        continue;
                    }
                    let s_end: Vec<f64> = mine.iter().filter_map(|s| s.s_end).collect();
                    let dp: Vec<f64> = mine.iter().filter_map(|s| s.delta_p).collect();
                    t.rows.push(vec![c.clone(), sys.clone(), fmt(mean(&s_end)), fmt(mean(&dp)), mine.len().to_string()]);
                }
            }
            Ok(t)
        }
    }
}

fn trajectory_table(ok: &[&RunResult], systems: &[String]) -> Result<Table> {
    let baseline = RuleSpec::Plurality.label();
    let plurality: HashMap<_, &RunResult> = ok
        .iter()
        .filter(|r| r.summary.system == baseline)
        .map(|r| (r.summary.pairing_key(), *r))
        .collect();
    if plurality.is_empty() {
        return Err(config("trajectory summary needs Plurality baseline runs"));
    }
    // (system, metric index, t) -> deltas
    let mut deltas: BTreeMap<(usize, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in ok {
        let base = plurality.get(&r.summary.pairing_key()).ok_or_else(|| {
            config(format!("run {} has no matching Plurality baseline", r.summary.run_id))
        })?;
        let si = systems.iter().position(|s| *s == r.summary.system).expect("system listed");
        for (rec, brec) in r.records.iter().zip(&base.records) {
            for (mi, (_, f)) in TRAJECTORY_METRICS.iter().enumerate() {
                deltas.entry((si, mi, rec.t)).or_default().push(f(rec) - f(brec));
            }
        }
    }
    let mut t = Table::new(&["system", "metric", "t", "median", "q25", "q75", "runs"]);
    for ((si, mi, round), vals) in deltas {
        let b = Band::of(&vals);
        t.rows.push(vec![
            systems[si].clone(),
            TRAJECTORY_METRICS[mi].0.to_string(),
            round.to_string(),
            fmt(b.median),
            fmt(b.q25),
            fmt(b.q75),
            vals.len().to_string(),
        ]);
    }
    Ok(t)
}
