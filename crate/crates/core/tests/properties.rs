use elecdyn::dynamics::{voter_step, DynamicsParams, RateFunction};
use elecdyn::geometry::{
    chebyshev_center, pairwise_variance, pairwise_variance_by_pairs, winner_radius, PointSet, PolicyBox,
};
use elecdyn::rules::{elect, fractional_weights, supporter_centroids, RuleSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point_set(dim: usize, max_n: usize) -> impl Strategy<Value = PointSet> {
    prop::collection::vec(prop::collection::vec(0.0..=1.0f64, dim), 1..max_n)
        .prop_map(|rows| PointSet::from_rows(&rows).unwrap())
}

fn rule() -> impl Strategy<Value = RuleSpec> {
    prop::sample::select(RuleSpec::grid_rules())
}

fn bounding_box(set: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; set.dim()];
    let mut hi = vec![f64::NEG_INFINITY; set.dim()];
    for p in set.iter() {
        for k in 0..set.dim() {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

fn inside(p: &[f64], (lo, hi): &(Vec<f64>, Vec<f64>)) -> bool {
    p.iter().zip(lo).zip(hi).all(|((x, l), h)| *x >= l - 1e-12 && *x <= h + 1e-12)
}

proptest! {
    #[test]
    fn variance_forms_agree_and_are_nonnegative(set in point_set(2, 40)) {
        let a = pairwise_variance(&set).unwrap();
        let b = pairwise_variance_by_pairs(&set).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn chebyshev_radius_is_a_lower_bound(set in point_set(2, 30), w in prop::collection::vec(0.0..=1.0f64, 2)) {
        let bx = PolicyBox::unit(2);
        let c = chebyshev_center(&set, &bx).unwrap();
        prop_assert!(bx.contains(&c.center));
        prop_assert!(c.radius <= winner_radius(&set, &w).unwrap() + 1e-9);
    }

    #[test]
    fn winners_stay_in_the_slate_hull(
        voters in point_set(2, 30),
        cands in point_set(2, 6).prop_filter("two or more candidates", |c| c.len() >= 2),
        rule in rule(),
    ) {
        let out = elect(&rule, &voters, &cands, &PolicyBox::unit(2)).unwrap();
        prop_assert!(inside(&out.winner, &bounding_box(&cands)));
        match out.winner_index {
            Some(j) => prop_assert_eq!(cands.get(j), &out.winner[..]),
            None => prop_assert!(!rule.elects_from_slate()),
        }
        prop_assert!(out.weights.validate().is_ok());
    }

    #[test]
    fn fractional_weights_are_row_stochastic(
        voters in point_set(2, 30),
        cands in point_set(2, 6),
        sigma in 0.01..3.0f64,
    ) {
        let w = fractional_weights(&voters, &cands, sigma).unwrap();
        for i in 0..w.voters() {
            let row = w.row(i);
            prop_assert!(row.iter().all(|x| *x >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let beta = w.column_means();
        prop_assert!((beta.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn supporter_centroids_stay_in_reach(
        voters in point_set(2, 30),
        cands in point_set(2, 6).prop_filter("two or more candidates", |c| c.len() >= 2),
        rule in rule(),
    ) {
        let out = elect(&rule, &voters, &cands, &PolicyBox::unit(2)).unwrap();
        let s = supporter_centroids(&out.weights, &voters, &cands).unwrap();
        let (vlo, vhi) = bounding_box(&voters);
        let (clo, chi) = bounding_box(&cands);
        let hull = (
            vlo.iter().zip(&clo).map(|(a, b)| a.min(*b)).collect(),
            vhi.iter().zip(&chi).map(|(a, b)| a.max(*b)).collect(),
        );
        for j in 0..s.len() {
            prop_assert!(inside(s.get(j), &hull));
        }
    }

    #[test]
    fn voter_steps_stay_in_box_and_respect_uniform_contraction(
        voters in point_set(2, 30),
        w in prop::collection::vec(0.0..=1.0f64, 2),
        eta in 0.01..0.99f64,
        seed in any::<u64>(),
    ) {
        let bx = PolicyBox::unit(2);
        let params = DynamicsParams {
            g: RateFunction::uniform(eta),
            h: RateFunction::uniform(0.1),
            mu: 0.0,
            nu: 0.0,
            rho: 0.2,
            repulsion_radius: 0.25,
            sigma_eps: 0.0,
            sigma_delta: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let next = voter_step(&voters, &w, &params, &bx, &mut rng).unwrap();
        prop_assert!(next.iter().all(|p| bx.contains(p)));
        let d = pairwise_variance(&voters).unwrap();
        let d1 = pairwise_variance(&next).unwrap();
        prop_assert!((d1 - (1.0 - eta).powi(2) * d).abs() <= 1e-12 * d.max(1e-300) + 1e-15);

        let mut noisy = params;
        noisy.sigma_eps = 0.05;
        let next = voter_step(&voters, &w, &noisy, &bx, &mut rng).unwrap();
        prop_assert!(next.iter().all(|p| bx.contains(p)));
    }
}
