use std::collections::BTreeMap;

use minishrink::indicators::{
    cliffs_delta, dominates, hypervolume, mann_whitney_u, non_dominated_indices, pfs_contribution,
    Magnitude, NormalizedFront,
};
use minishrink::search::fast_nondominated_sort;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vecs(k: usize, max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0u8..6, k), 1..max_n)
        .prop_map(|v| v.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect())
}

fn naive_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Inclusion-exclusion over every subset of boxes.
fn inclusion_exclusion(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let members: Vec<&Vec<f64>> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &points[i]).collect();
        let vol: f64 = (0..reference.len())
            .map(|j| {
                let lo = members.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
                (reference[j] - lo).max(0.0)
            })
            .product();
        let sign = if members.len() % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * vol;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dominance_is_a_strict_partial_order(pts in vecs(3, 12)) {
        for a in &pts {
            prop_assert!(!dominates(a, a));
            for b in &pts {
                prop_assert!(!(dominates(a, b) && dominates(b, a)));
                for c in &pts {
                    if dominates(a, b) && dominates(b, c) {
                        prop_assert!(dominates(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn sort_matches_naive_peeling(pts in vecs(4, 40)) {
        prop_assert_eq!(fast_nondominated_sort(&pts), naive_fronts(&pts));
    }

    #[test]
    fn hypervolume_ignores_dominated_points(pts in vecs(3, 10)) {
        let reference = [6.0; 3];
        let filtered: Vec<Vec<f64>> =
            non_dominated_indices(&pts).into_iter().map(|i| pts[i].clone()).collect();
        let a = hypervolume(&pts, &reference).unwrap();
        let b = hypervolume(&filtered, &reference).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn hypervolume_is_monotone(pts in vecs(3, 10), extra in proptest::collection::vec(0u8..6, 3)) {
        let reference = [6.0; 3];
        let before = hypervolume(&pts, &reference).unwrap();
        let mut more = pts.clone();
        more.push(extra.into_iter().map(f64::from).collect());
        prop_assert!(hypervolume(&more, &reference).unwrap() >= before - 1e-12);
    }

    #[test]
    fn hypervolume_matches_inclusion_exclusion(pts in vecs(3, 9)) {
        let reference = [6.0; 3];
        let exact = hypervolume(&pts, &reference).unwrap();
        prop_assert!((exact - inclusion_exclusion(&pts, &reference)).abs() < 1e-9);
    }

    #[test]
    fn cliffs_delta_is_antisymmetric(
        a in proptest::collection::vec(0u8..10, 1..15),
        b in proptest::collection::vec(0u8..10, 1..15),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let (ab, _) = cliffs_delta(&a, &b).unwrap();
        let (ba, _) = cliffs_delta(&b, &a).unwrap();
        prop_assert_eq!(ab, -ba);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn pfs_counts_cover_the_reference_front(a in vecs(2, 8), b in vecs(2, 8)) {
        let mut named = BTreeMap::new();
        named.insert("a".to_string(), a.clone());
        named.insert("b".to_string(), b.clone());
        let pfs = pfs_contribution(&named).unwrap();
        let mut combined: Vec<Vec<f64>> = a.into_iter().chain(b).collect();
        combined.sort_by(|x, y| x.partial_cmp(y).unwrap());
        combined.dedup();
        let reference = non_dominated_indices(&combined).len();
        prop_assert!(pfs.values().map(|c| c.count).sum::<usize>() >= reference);
    }
}

#[test]
fn two_dimensional_fixtures_match_inclusion_exclusion() {
    let fixtures: Vec<Vec<Vec<f64>>> = vec![
        vec![vec![0.5, 0.5]],
        vec![vec![0.0, 0.5], vec![0.5, 0.0]],
        vec![vec![0.1, 0.9], vec![0.3, 0.4], vec![0.7, 0.2], vec![0.95, 0.05]],
        vec![vec![0.2, 0.2], vec![0.2, 0.2], vec![0.6, 0.1]],
    ];
    for f in &fixtures {
        let exact = hypervolume(f, &[1.0, 1.0]).unwrap();
        assert!((exact - inclusion_exclusion(f, &[1.0, 1.0])).abs() < 1e-12, "{f:?}");
    }
    assert!((hypervolume(&fixtures[1], &[1.0, 1.0]).unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn monte_carlo_agrees_in_three_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
    let exact = hypervolume(&pts, &[1.0; 3]).unwrap();
    let samples = 1_000_000;
    let inside = (0..samples)
        .filter(|_| {
            let s: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            pts.iter().any(|p| p.iter().zip(&s).all(|(a, b)| a <= b))
        })
        .count();
    let estimate = inside as f64 / samples as f64;
    assert!((exact - estimate).abs() < 3e-3, "{exact} vs {estimate}");
}

#[test]
fn dimension_mismatch_is_rejected() {
    assert!(hypervolume(&[vec![0.1, 0.2, 0.3]], &[1.0, 1.0]).is_err());
}

#[test]
fn normalization_clips_and_handles_flat_dimensions() {
    let f = NormalizedFront::new(&[vec![0.0, 5.0], vec![20.0, 5.0]], &[0.0, 5.0], &[10.0, 5.0]);
    assert_eq!(f.points, vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
}

#[test]
fn exact_u_test_matches_enumeration() {
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert!(r.exact);
    assert_eq!(r.u, 0.0);
    assert!((r.p_two_sided - 0.1).abs() < 1e-12);
    let same = mann_whitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((same.p_two_sided - 1.0).abs() < 1e-12);
}

#[test]
fn normal_approximation_for_larger_samples() {
    let a: Vec<f64> = (0..30).map(f64::from).collect();
    let b: Vec<f64> = (0..30).map(|x| f64::from(x) + 100.0).collect();
    let r = mann_whitney_u(&a, &b).unwrap();
    assert!(!r.exact);
    assert!(r.p_two_sided < 1e-9);
    assert_eq!(mann_whitney_u(&a, &a).unwrap().p_two_sided, 1.0);
}

#[test]
fn cliffs_delta_examples() {
    assert_eq!(cliffs_delta(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), (-1.0, Magnitude::Large));
    assert_eq!(cliffs_delta(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), (-0.25, Magnitude::Small));
    assert_eq!(cliffs_delta(&[2.0; 4], &[2.0; 3]).unwrap(), (0.0, Magnitude::Negligible));
}
