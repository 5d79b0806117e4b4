//! Property tests for spatial uncertainty and the agreement metrics.

use hda_core::{
    csm, pearson, smc, spatial_uncertainty, su_filter, Algorithm, HomeDetection,
    PopulationVector, RankedTower, SuThreshold, TowerNetwork,
};
use proptest::prelude::*;

fn detection(scores: &[u32]) -> HomeDetection {
    let ids = ["A", "B", "C"];
    HomeDetection {
        user_id: "u1".into(),
        month: "2007-06".into(),
        algorithm: Algorithm::MaxActivities,
        ranked: scores
            .iter()
            .enumerate()
            .map(|(i, &score)| RankedTower {
                tower_id: ids[i].into(),
                score,
            })
            .collect(),
        su_m: None,
    }
}

fn triangle(scale: f64, bx: f64, by: f64, cx: f64, cy: f64) -> TowerNetwork {
    TowerNetwork::new(vec![
        ("A".into(), 0.0, 0.0),
        ("B".into(), bx * scale, by * scale),
        ("C".into(), cx * scale, cy * scale),
    ])
    .unwrap()
}

proptest! {
    #[test]
    fn su_is_nonnegative_and_scales_with_space(
        p1 in 1u32..1000,
        d2 in 0u32..1000,
        d3 in 0u32..1000,
        bx in -5000.0f64..5000.0,
        by in -5000.0f64..5000.0,
        cx in -5000.0f64..5000.0,
        cy in -5000.0f64..5000.0,
        scale in 1.0f64..100.0,
    ) {
        // Valid rank ordering: p1 >= p2 >= p3 > 0.
        let p2 = p1 - d2.min(p1 - 1);
        let p3 = p2 - d3.min(p2 - 1);
        let det = detection(&[p1, p2, p3]);

        let base = spatial_uncertainty(&det, &triangle(1.0, bx, by, cx, cy)).unwrap();
        prop_assert!(base >= 0.0);

        let scaled = spatial_uncertainty(&det, &triangle(scale, bx, by, cx, cy)).unwrap();
        prop_assert!((scaled - scale * base).abs() <= 1e-9 * scale * base.max(1.0));
    }

    #[test]
    fn su_monotone_in_competitor_and_leader_scores(
        p1 in 2u32..1000,
        p2 in 1u32..1000,
    ) {
        let p2 = p2.min(p1 - 1);
        let net = triangle(1.0, 1000.0, 0.0, 0.0, 1000.0);
        let su = spatial_uncertainty(&detection(&[p1, p2]), &net).unwrap();
        // Raising the competitor's score never lowers SU.
        let su_up = spatial_uncertainty(&detection(&[p1, p2 + 1]), &net).unwrap();
        prop_assert!(su_up >= su);
        // Raising the leader's score never raises SU.
        let su_lead = spatial_uncertainty(&detection(&[p1 + 1, p2]), &net).unwrap();
        prop_assert!(su_lead <= su);
    }

    #[test]
    fn su_filter_composes_and_large_threshold_is_identity(
        sus in proptest::collection::vec(0.0f64..100_000.0, 1..40),
        t1 in 1.0f64..80_000.0,
        t2 in 1.0f64..80_000.0,
    ) {
        let dets: Vec<HomeDetection> = sus
            .iter()
            .map(|&su| {
                let mut d = detection(&[2, 1]);
                d.su_m = Some(su);
                d
            })
            .collect();

        let huge = SuThreshold::new(f64::MAX).unwrap();
        let (kept, dropped) = su_filter(dets.clone(), huge).unwrap();
        prop_assert_eq!(dropped, 0);
        prop_assert_eq!(kept.len(), dets.len());

        let (first, _) = su_filter(dets.clone(), SuThreshold::new(t1).unwrap()).unwrap();
        let (chained, _) = su_filter(first, SuThreshold::new(t2).unwrap()).unwrap();
        let (direct, _) =
            su_filter(dets, SuThreshold::new(t1.min(t2)).unwrap()).unwrap();
        prop_assert_eq!(chained, direct);
    }

    #[test]
    fn csm_symmetry_scaling_permutation(
        x in proptest::collection::vec(0.0f64..1000.0, 4..30),
        y_seed in proptest::collection::vec(0.0f64..1000.0, 4..30),
        c in 0.001f64..1000.0,
        rot in 0usize..29,
    ) {
        let n = x.len().min(y_seed.len());
        let x = &x[..n];
        let y = &y_seed[..n];
        prop_assume!(x.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v > 0.0));
        let pv = |v: &[f64]| PopulationVector::new(v.to_vec()).unwrap();

        let a = csm(&pv(x), &pv(y)).unwrap();
        let b = csm(&pv(y), &pv(x)).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((0.0..=90.0 + 1e-9).contains(&a));
        prop_assert!(csm(&pv(x), &pv(x)).unwrap() == 0.0);

        let scaled: Vec<f64> = x.iter().map(|&v| v * c).collect();
        prop_assert!((csm(&pv(&scaled), &pv(y)).unwrap() - a).abs() < 1e-9);

        // The same rotation applied to both vectors leaves the angle alone.
        let r = rot % n;
        let rotate = |v: &[f64]| -> Vec<f64> {
            v.iter().cycle().skip(r).take(n).copied().collect()
        };
        let rotated = csm(&pv(&rotate(x)), &pv(&rotate(y))).unwrap();
        prop_assert!((rotated - a).abs() < 1e-9);
    }

    #[test]
    fn pearson_bounded_and_symmetric(
        xs in proptest::collection::vec(-1000.0f64..1000.0, 3..30),
        ys in proptest::collection::vec(-1000.0f64..1000.0, 3..30),
    ) {
        let n = xs.len().min(ys.len());
        let (xs, ys) = (&xs[..n], &ys[..n]);
        let spread = |v: &[f64]| v.iter().any(|&a| (a - v[0]).abs() > 1e-6);
        prop_assume!(spread(xs) && spread(ys));

        let r = pearson(xs, ys).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        prop_assert!((pearson(ys, xs).unwrap() - r).abs() < 1e-12);

        // Flipping one variable's sign flips the correlation.
        let neg: Vec<f64> = ys.iter().map(|&v| -v).collect();
        prop_assert!((pearson(xs, &neg).unwrap() + r).abs() < 1e-9);
    }

    #[test]
    fn smc_symmetric_and_self_is_one(
        homes in proptest::collection::vec(0usize..4, 2..40),
        other in proptest::collection::vec(0usize..4, 2..40),
    ) {
        let towers = ["A", "B", "C", "D"];
        let make = |assign: &[usize]| -> Vec<HomeDetection> {
            assign
                .iter()
                .enumerate()
                .map(|(u, &t)| HomeDetection {
                    user_id: format!("u{u}"),
                    month: "2007-06".into(),
                    algorithm: Algorithm::MaxActivities,
                    ranked: vec![RankedTower {
                        tower_id: towers[t].into(),
                        score: 1,
                    }],
                    su_m: None,
                })
                .collect()
        };
        let a = make(&homes);
        let b = make(&other);

        let self_match = smc(&a, &a).unwrap();
        prop_assert_eq!(self_match.smc, 1.0);
        prop_assert_eq!(self_match.n_common, homes.len() as u64);

        let ab = smc(&a, &b).unwrap();
        let ba = smc(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab.smc));
        prop_assert_eq!(ab.n_common, homes.len().min(other.len()) as u64);
    }
}
