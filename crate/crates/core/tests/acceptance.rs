//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test -p elecdyn --test acceptance -- 3 7`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use elecdyn::bounds::{check_candidate_bound, check_voter_bound, noise_floor, rate_lipschitz, voter_factor, FloorForm};
use elecdyn::dynamics::{
    candidate_step, voter_step, CandidateMechanism, DynamicsParams, RateFunction, VoterMechanism,
};
use elecdyn::electorate::{BalanceKind, ProfileKind, SlateKind};
use elecdyn::geometry::{
    chebyshev_center, coordinatewise_median, pairwise_variance, pairwise_variance_by_pairs, winner_radius, PointSet,
    PolicyBox,
};
use elecdyn::oracles::{run_oracle_comparison, OracleKind, OracleStudy};
use elecdyn::rules::{
    assignment_weights, condorcet_schulze_winner, elect, fractional_weights, supporter_centroids, RuleSpec,
};
use elecdyn::runner::{run_grid, run_simulation, write_results, GridSpec, RunConfig};
use elecdyn::stats::mean;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointSet {
    PointSet::from_flat(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn c1_worked_example() -> Outcome {
    let v = PointSet::from_scalars(&[0.0, 0.8, 0.9, 1.0]);
    let bx = PolicyBox::unit(1);
    let med = coordinatewise_median(&v).unwrap()[0];
    let center = chebyshev_center(&v, &bx).unwrap();
    let r_med = winner_radius(&v, &[med]).unwrap();
    let r_center = winner_radius(&v, &center.center).unwrap();
    let ok = (med - 0.85).abs() <= 1e-9
        && (center.center[0] - 0.5).abs() <= 1e-9
        && (r_med - 0.85).abs() <= 1e-9
        && (r_center - 0.5).abs() <= 1e-9;
    verdict(ok, format!("median {med}, center {}, R(median) {r_med}, R(center) {r_center}", center.center[0]))
}

fn c2_uniform_attraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bx = PolicyBox::unit(2);
    let rules = RuleSpec::grid_rules();
    let (mut worst_v, mut worst_c) = (0.0_f64, 0.0_f64);
    for trial in 0..100 {
        let n = rng.random_range(3..60);
        let voters = random_set(&mut rng, n, 2);
        let cands = random_set(&mut rng, 4, 2);
        let rate = rng.random_range(0.01..0.99);
        let params = DynamicsParams {
            g: RateFunction::uniform(rate),
            h: RateFunction::uniform(rate),
            mu: 0.0,
            nu: 0.0,
            rho: 0.2,
            repulsion_radius: 0.25,
            sigma_eps: 0.0,
            sigma_delta: 0.0,
        };
        let rule = &rules[trial % rules.len()];
        let outcome = elect(rule, &voters, &cands, &bx).unwrap();
        let d = pairwise_variance(&voters).unwrap();
        let next_v = voter_step(&voters, &outcome.winner, &params, &bx, &mut rng).unwrap();
        let ratio_v = pairwise_variance(&next_v).unwrap() / ((1.0 - rate).powi(2) * d);
        worst_v = worst_v.max((ratio_v - 1.0).abs());

        let weights = assignment_weights(rule, &voters, &cands).unwrap();
        let centroids = supporter_centroids(&weights, &voters, &cands).unwrap();
        let p = pairwise_variance(&cands).unwrap();
        let mean_v = voters.mean().unwrap();
        let next_c = candidate_step(&cands, &centroids, &mean_v, &params, &bx, &mut rng).unwrap();
        let ratio_c = pairwise_variance(&next_c).unwrap() / ((1.0 - rate).powi(2) * p);
        worst_c = worst_c.max((ratio_c - 1.0).abs());
    }
    verdict(
        worst_v <= 1e-12 && worst_c <= 1e-12,
        format!("max |ratio - 1|: voters {worst_v:.2e}, candidates {worst_c:.2e} (tolerance 1e-12)"),
    )
}

fn c3_voter_bound() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut failures = Vec::new();
    let voters = [VoterMechanism::ConsensusPull, VoterMechanism::SortingPressure];
    for rule in RuleSpec::grid_rules() {
        for seed in 0..50u64 {
            let mut cfg = RunConfig::new(
                ProfileKind::ALL[(seed % 3) as usize],
                BalanceKind::ALL[((seed / 3) % 3) as usize],
                SlateKind::ALL[(seed % 2) as usize],
                voters[(seed % 2) as usize],
                CandidateMechanism::ALL[((seed / 2) % 3) as usize],
                rule,
            );
            cfg.seed = seed;
            cfg.n = 200;
            cfg.overrides.dynamics.sigma_eps = Some(0.0);
            cfg.overrides.dynamics.sigma_delta = Some(0.0);
            let out = run_simulation(&cfg).unwrap();
            let report = check_voter_bound(&out.records, &out.params).unwrap();
            checked += report.rows.len();
            if !report.all_satisfied {
                failures.push(format!("{} seed {seed} (violation {:.2e})", rule.label(), report.max_violation));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{checked} rounds over 7 rules x 50 seeds, {} violating runs {:?}, {:.1}s (budget 60s)",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

fn candidate_bound_runs(with_repulsion: bool) -> Outcome {
    let mut checked = 0usize;
    let mut worst = 0.0_f64;
    let mut failing = 0usize;
    let mechanism =
        if with_repulsion { CandidateMechanism::BaseReinforcement } else { CandidateMechanism::BroadCoalitionChase };
    for sigma in [0.3, 1.0] {
        for seed in 0..20u64 {
            let rule = RuleSpec::Fractional { sigma };
            let mut cfg = RunConfig::new(
                ProfileKind::ALL[(seed % 3) as usize],
                BalanceKind::ALL[((seed / 3) % 3) as usize],
                SlateKind::ALL[(seed % 2) as usize],
                VoterMechanism::ConsensusPull,
                mechanism,
                rule,
            );
            cfg.seed = seed;
            cfg.n = 300;
            cfg.overrides.dynamics.mu = Some(0.0);
            if with_repulsion {
                cfg.overrides.dynamics.nu = Some(0.05);
                cfg.overrides.dynamics.rho = Some(0.2);
            } else {
                cfg.overrides.dynamics.nu = Some(0.0);
            }
            cfg.overrides.dynamics.sigma_eps = Some(0.0);
            cfg.overrides.dynamics.sigma_delta = Some(0.0);
            let out = run_simulation(&cfg).unwrap();
            let report = check_candidate_bound(&out.records, &out.params, &rule, with_repulsion).unwrap();
            checked += report.rows.len();
            worst = worst.max(report.max_violation);
            failing += usize::from(!report.all_satisfied);
        }
    }
    verdict(
        failing == 0,
        format!("{checked} rounds over 2 bandwidths x 20 seeds, {failing} violating runs, max violation {worst:.2e}"),
    )
}

fn c6_pairwise_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..80);
        let dim = rng.random_range(1..5);
        let set = random_set(&mut rng, n, dim);
        let a = pairwise_variance(&set).unwrap();
        let b = pairwise_variance_by_pairs(&set).unwrap();
        worst = worst.max((a - b).abs());
    }
    verdict(worst <= 1e-10, format!("max |mean form - pair form| = {worst:.2e} over 1000 sets"))
}

/// Independent check: candidate `a` beats every rival in strict head-to-head majorities.
fn brute_force_condorcet(voters: &PointSet, cands: &PointSet) -> Option<usize> {
    let k = cands.len();
    let closer = |v: &[f64], a: usize, b: usize| {
        let da: f64 = v.iter().zip(cands.get(a)).map(|(x, y)| (x - y).powi(2)).sum();
        let db: f64 = v.iter().zip(cands.get(b)).map(|(x, y)| (x - y).powi(2)).sum();
        da < db
    };
    (0..k).find(|&a| {
        (0..k).filter(|&b| b != a).all(|b| {
            let pro = voters.iter().filter(|v| closer(v, a, b)).count();
            let con = voters.iter().filter(|v| closer(v, b, a)).count();
            pro > con
        })
    })
}

fn c7_schulze() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut with_winner, mut wrong) = (0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=9);
        let k = rng.random_range(2..=4);
        let dim = rng.random_range(1..=2);
        let voters = random_set(&mut rng, n, dim);
        let cands = random_set(&mut rng, k, dim);
        if let Some(cw) = brute_force_condorcet(&voters, &cands) {
            with_winner += 1;
            if condorcet_schulze_winner(&voters, &cands).unwrap().winner_index != Some(cw) {
                wrong += 1;
            }
        }
    }
    verdict(wrong == 0 && with_winner > 0, format!("{with_winner} instances with a Condorcet winner, {wrong} mismatches"))
}

fn c8_convex_hull() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bx = PolicyBox::unit(2);
    let (mut worst_sum, mut negative, mut off_slate) = (0.0_f64, 0usize, 0usize);
    let slate_rules: Vec<RuleSpec> = RuleSpec::grid_rules().into_iter().filter(|r| r.elects_from_slate()).collect();
    for _ in 0..1000 {
        let n = rng.random_range(1..50);
        let k = rng.random_range(2..7);
        let voters = random_set(&mut rng, n, 2);
        let cands = random_set(&mut rng, k, 2);
        let sigma = rng.random_range(0.05..2.0);
        let beta = fractional_weights(&voters, &cands, sigma).unwrap().column_means();
        negative += beta.iter().filter(|b| **b < 0.0).count();
        worst_sum = worst_sum.max((beta.iter().sum::<f64>() - 1.0).abs());
        for rule in &slate_rules {
            let out = elect(rule, &voters, &cands, &bx).unwrap();
            let on_slate = out.winner_index.is_some_and(|j| cands.get(j) == &out.winner[..]);
            off_slate += usize::from(!on_slate);
        }
    }
    verdict(
        negative == 0 && worst_sum <= 1e-12 && off_slate == 0,
        format!(
            "beta: {negative} negative entries, max |sum - 1| = {worst_sum:.2e}; {off_slate} slate winners off the slate"
        ),
    )
}

fn c9_noise_floor() -> Outcome {
    let sigma_eps = 0.01;
    let rounds = 200;
    let replicates = 64u64;
    let window = 5;
    let width = 0.75 * 2f64.sqrt();
    let g = RateFunction::ramp(0.30, 0.40, width);
    let l_eta = rate_lipschitz(&g);
    let mut tail_means = Vec::new();
    let mut r_star = 0.0_f64;
    for seed in 0..replicates {
        let mut cfg = RunConfig::new(
            ProfileKind::BridgeConflict,
            BalanceKind::Original,
            SlateKind::CentristLadder,
            VoterMechanism::ConsensusPull,
            CandidateMechanism::Static,
            RuleSpec::Fractional { sigma: 1.0 },
        );
        cfg.seed = seed;
        cfg.n = 200;
        cfg.rounds = rounds;
        cfg.overrides.dynamics.g = Some(g);
        cfg.overrides.dynamics.sigma_eps = Some(sigma_eps);
        let out = run_simulation(&cfg).unwrap();
        // realized R envelope over the settled second half
        for r in &out.records[rounds / 2..] {
            r_star = r_star.max(r.r);
        }
        let tail: Vec<f64> = out.records[rounds - window..rounds].iter().map(|r| r.d).collect();
        tail_means.push(mean(&tail));
    }
    let q_star = voter_factor(g.min, l_eta, r_star);
    let d_tail = mean(&tail_means);
    match noise_floor(sigma_eps * sigma_eps, q_star, FloorForm::Voter) {
        Ok(floor) => verdict(
            d_tail <= 1.1 * floor,
            format!("q* = {q_star:.4}, floor {floor:.3e}, mean tail D {d_tail:.3e} (ratio {:.3})", d_tail / floor),
        ),
        Err(e) => verdict(false, format!("q* = {q_star:.4}: {e}")),
    }
}

fn c10_table_ordering() -> Outcome {
    let systems = [
        RuleSpec::Plurality,
        RuleSpec::Score { max_score: 10.0 },
        RuleSpec::CondorcetSchulze,
        RuleSpec::Fractional { sigma: 0.3 },
        RuleSpec::Fractional { sigma: 1.0 },
    ];
    let mut rows = Vec::new();
    for rule in systems {
        let (mut r, mut s, mut dd) = (Vec::new(), Vec::new(), Vec::new());
        for seed in 0..20u64 {
            let mut cfg = RunConfig::new(
                ProfileKind::BridgeConflict,
                BalanceKind::Original,
                SlateKind::CentristLadder,
                VoterMechanism::Backlash,
                CandidateMechanism::BroadCoalitionChase,
                rule,
            );
            cfg.seed = seed;
            cfg.rounds = 10;
            let out = run_simulation(&cfg).unwrap();
            let (first, last) = (&out.records[0], out.records.last().unwrap());
            r.push(last.r);
            s.push(last.s);
            dd.push(last.d - first.d);
        }
        rows.push((rule.label(), mean(&r), mean(&s), mean(&dd)));
    }
    let (pl, rest) = rows.split_first().unwrap();
    let r_ok = rest.iter().all(|x| pl.1 > x.1);
    let s_ok = rest.iter().all(|x| pl.2 < x.2);
    let d_ok = rest.iter().all(|x| pl.3 > x.3);
    let table: Vec<String> =
        rows.iter().map(|(l, r, s, d)| format!("{l}: R={r:.3} S={s:.3} dD={d:.4}")).collect();
    verdict(
        r_ok && s_ok && d_ok,
        format!("R largest {r_ok}, S smallest {s_ok}, dD least negative {d_ok} | {}", table.join("; ")),
    )
}

fn c11_oracle_study() -> Outcome {
    let start = Instant::now();
    let study = OracleStudy { n: 350, replicates: 24, rounds: 16, ..OracleStudy::default() };
    let cmp = run_oracle_comparison(&study, 4).unwrap();
    let elapsed = start.elapsed();
    let last = study.rounds - 1;
    let r_ok = (0..study.rounds).all(|t| {
        cmp.band(OracleKind::Centrality, t).unwrap().r_median
            <= cmp.band(OracleKind::Depolarization, t).unwrap().r_median
    });
    let (cent, dep) = (cmp.band(OracleKind::Centrality, last).unwrap(), cmp.band(OracleKind::Depolarization, last).unwrap());
    let d_ok = dep.d_median < cent.d_median;
    let a_dep_ok = dep.a_median > 0.0;
    let a_cent_ok = cent.a_median < 0.0;
    let time_ok = elapsed < Duration::from_secs(300);
    verdict(
        r_ok && d_ok && a_dep_ok && a_cent_ok && time_ok,
        format!(
            "R(cent) <= R(dep) every round {r_ok}; final D dep {:.2e} < cent {:.2e} {d_ok}; \
             final median A dep {:+.3} (want > 0) cent {:+.3} (want < 0); {:.1}s (budget 300s)",
            dep.d_median,
            cent.d_median,
            dep.a_median,
            cent.a_median,
            elapsed.as_secs_f64()
        ),
    )
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![("runs.csv".to_string(), fs::read(dir.join("runs.csv")).unwrap())];
    let mut names: Vec<_> = fs::read_dir(dir.join("runs")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        out.push((name.to_string_lossy().into_owned(), fs::read(dir.join("runs").join(&name)).unwrap()));
    }
    out
}

fn c12_grid_integrity() -> Outcome {
    let cells = GridSpec::default().cells().len();
    let grid = GridSpec { n: 300, rounds: 20, ..GridSpec::default() };
    let start = Instant::now();
    let serial = run_grid(&grid, 1).unwrap();
    let serial_time = start.elapsed();
    let parallel = run_grid(&grid, 4).unwrap();
    let failed = serial.iter().filter(|r| !r.summary.is_ok()).count();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_results(a.path(), &serial).unwrap();
    write_results(b.path(), &parallel).unwrap();
    let identical = read_tree(a.path()) == read_tree(b.path());
    verdict(
        cells == 1134 && failed == 0 && identical && serial_time < Duration::from_secs(600),
        format!(
            "{cells} cells, {failed} failed runs, outputs byte-identical for 1 vs 4 workers: {identical}, \
             single-worker grid {:.1}s (budget 600s)",
            serial_time.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "median vs Chebyshev worked example", c1_worked_example),
        (2, "uniform-attraction exactness", c2_uniform_attraction),
        (3, "voter contraction bound, pathwise", c3_voter_bound),
        (4, "candidate contraction bound", || candidate_bound_runs(false)),
        (5, "candidate bound with repulsion", || candidate_bound_runs(true)),
        (6, "pairwise variance identity", c6_pairwise_identity),
        (7, "Schulze returns Condorcet winners", c7_schulze),
        (8, "convex-hull containment", c8_convex_hull),
        (9, "voter noise floor", c9_noise_floor),
        (10, "representative-run ordering", c10_table_ordering),
        (11, "oracle comparison", c11_oracle_study),
        (12, "grid integrity and determinism", c12_grid_integrity),
    ];
    let selected: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} [{name}] ({:.1}s) {}", start.elapsed().as_secs_f64(), outcome.detail);
        if !outcome.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
