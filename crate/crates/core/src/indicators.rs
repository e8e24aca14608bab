//! Quality indicators and statistics for comparing Pareto front
//! approximations. All objectives are minimized.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Pareto dominance for minimization: no worse everywhere, strictly better
/// somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Indices of the points not dominated by any other point.
pub fn non_dominated_indices<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points
                .iter()
                .enumerate()
                .any(|(j, q)| j != i && dominates(q.as_ref(), points[i].as_ref()))
        })
        .collect()
}

/// Exact hypervolume dominated by `front` and bounded by `reference`.
///
/// Points are clipped to the reference first. Uses a recursive sweep over
/// the last dimension, slicing the volume into slabs whose cross-sections
/// are hypervolumes one dimension down.
pub fn hypervolume(front: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let k = reference.len();
    if k == 0 {
        return Err(Error::Contract("hypervolume needs at least one dimension".into()));
    }
    if let Some(p) = front.iter().find(|p| p.len() != k) {
        return Err(Error::Contract(format!(
            "point of dimension {} against a {k}-dimensional reference",
            p.len()
        )));
    }
    let clipped: Vec<Vec<f64>> = front
        .iter()
        .map(|p| p.iter().zip(reference).map(|(x, r)| x.min(*r)).collect())
        .collect();
    Ok(sweep(clipped, reference))
}

fn sweep(mut points: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    let k = reference.len();
    if points.is_empty() {
        return 0.0;
    }
    if k == 1 {
        let best = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        return (reference[0] - best).max(0.0);
    }
    let last = k - 1;
    if k == 2 {
        points.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
        let mut volume = 0.0;
        let mut best_x = reference[0];
        for (i, p) in points.iter().enumerate() {
            best_x = best_x.min(p[0]);
            let next = points.get(i + 1).map_or(reference[1], |q| q[1]);
            volume += (reference[0] - best_x) * (next - p[1]);
        }
        return volume;
    }
    points.sort_by(|a, b| a[last].total_cmp(&b[last]));
    let mut volume = 0.0;
    let mut slice: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let projected = p[..last].to_vec();
        if !slice.iter().any(|q| q.iter().zip(&projected).all(|(a, b)| a <= b)) {
            slice.retain(|q| !projected.iter().zip(q).all(|(a, b)| a <= b));
            slice.push(projected);
        }
        let next = points.get(i + 1).map_or(reference[last], |q| q[last]);
        let height = next - p[last];
        if height > 0.0 {
            volume += sweep(slice.clone(), &reference[..last]) * height;
        }
    }
    volume
}

/// Points rescaled by ideal and nadir vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFront {
    pub points: Vec<Vec<f64>>,
    pub ideal: Vec<f64>,
    pub nadir: Vec<f64>,
}

/// Ideal and nadir of the non-dominated subset of `points`.
pub fn ideal_nadir(points: &[Vec<f64>]) -> Option<(Vec<f64>, Vec<f64>)> {
    let nd = non_dominated_indices(points);
    let first = points.get(*nd.first()?)?;
    let mut ideal = first.clone();
    let mut nadir = first.clone();
    for &i in &nd[1..] {
        for (j, v) in points[i].iter().enumerate() {
            ideal[j] = ideal[j].min(*v);
            nadir[j] = nadir[j].max(*v);
        }
    }
    Some((ideal, nadir))
}

impl NormalizedFront {
    /// Maps each coordinate to `(v - ideal) / (nadir - ideal)`, clipped to
    /// `[0, 1]`; zero-range dimensions map to 0.
    pub fn new(points: &[Vec<f64>], ideal: &[f64], nadir: &[f64]) -> Self {
        let scaled = points
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let range = nadir[j] - ideal[j];
                        if range > 0.0 {
                            ((v - ideal[j]) / range).clamp(0.0, 1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self { points: scaled, ideal: ideal.to_vec(), nadir: nadir.to_vec() }
    }

    /// Hypervolume against the unit reference point.
    pub fn hypervolume(&self) -> f64 {
        let reference = vec![1.0; self.ideal.len()];
        hypervolume(&self.points, &reference).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub count: usize,
    pub percent: f64,
}

/// Counts each algorithm's distinct points that survive in the combined
/// non-dominated front. A point found by several algorithms credits each of
/// them; percentages are relative to the sum of all counts.
pub fn pfs_contribution(
    named_fronts: &BTreeMap<String, Vec<Vec<f64>>>,
) -> Result<BTreeMap<String, Contribution>> {
    if named_fronts.is_empty() {
        return Err(Error::Contract("PFS needs at least one algorithm".into()));
    }
    let distinct: BTreeMap<&String, Vec<&Vec<f64>>> = named_fronts
        .iter()
        .map(|(name, pts)| {
            let mut v: Vec<&Vec<f64>> = Vec::new();
            for p in pts {
                if !v.iter().any(|q| *q == p) {
                    v.push(p);
                }
            }
            (name, v)
        })
        .collect();
    let all: Vec<&Vec<f64>> = distinct.values().flatten().copied().collect();
    let counts: BTreeMap<String, usize> = distinct
        .iter()
        .map(|(name, pts)| {
            let c = pts.iter().filter(|p| !all.iter().any(|q| dominates(q, p))).count();
            ((*name).clone(), c)
        })
        .collect();
    let total: usize = counts.values().sum();
    Ok(counts
        .into_iter()
        .map(|(name, count)| {
            let percent = if total == 0 { 0.0 } else { 100.0 * count as f64 / total as f64 };
            (name, Contribution { count, percent })
        })
        .collect())
}

/// Largest sample size for which the U-test p-value is exact.
pub const EXACT_U_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Mann-Whitney U test with midranks for ties.
///
/// When both samples have at most [`EXACT_U_LIMIT`] values the p-value is
/// exact, found by enumerating every split of the pooled ranks. Larger
/// samples use the normal approximation with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract("Mann-Whitney U needs two non-empty samples".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let mean = (na * nb) as f64 / 2.0;

    if na.max(nb) <= EXACT_U_LIMIT {
        let observed = (u - mean).abs();
        let offset = (na * (na + 1)) as f64 / 2.0;
        let mut extreme = 0u64;
        let mut total = 0u64;
        for_each_subset(pooled.len(), na, &mut |subset| {
            let s: f64 = subset.iter().map(|&i| ranks[i]).sum();
            total += 1;
            if ((s - offset) - mean).abs() >= observed - 1e-9 {
                extreme += 1;
            }
        });
        return Ok(MannWhitney { u, p_two_sided: extreme as f64 / total as f64, exact: true });
    }

    let n = (na + nb) as f64;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return Ok(MannWhitney { u, p_two_sided: 1.0, exact: false });
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * (1.0 - normal.cdf(z))).min(1.0);
    Ok(MannWhitney { u, p_two_sided: p, exact: false })
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(delta: f64) -> Self {
        let d = delta.abs();
        if d < 0.147 {
            Magnitude::Negligible
        } else if d < 0.33 {
            Magnitude::Small
        } else if d < 0.474 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Magnitude::Negligible => "negligible",
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        }
    }
}

/// Cliff's delta of `a` against `b` with its magnitude label.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<(f64, Magnitude)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract("Cliff's delta needs two non-empty samples".into()));
    }
    let mut greater = 0i64;
    let mut less = 0i64;
    for x in a {
        for y in b {
            if x > y {
                greater += 1;
            } else if x < y {
                less += 1;
            }
        }
    }
    let delta = (greater - less) as f64 / (a.len() * b.len()) as f64;
    Ok((delta, Magnitude::of(delta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 2.0], &[2.0, 3.0]));
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]));
        assert!(!dominates(&[1.0, 3.0], &[2.0, 2.0]));
        assert!(!dominates(&[2.0, 2.0], &[1.0, 3.0]));
    }

    #[test]
    fn single_box() {
        let hv = hypervolume(&[vec![0.5, 0.5]], &[1.0, 1.0]).unwrap();
        assert_eq!(hv, 0.25);
    }

    #[test]
    fn two_overlapping_boxes() {
        // 0.5 + 0.5 - 0.25
        let hv = hypervolume(&[vec![0.0, 0.5], vec![0.5, 0.0]], &[1.0, 1.0]).unwrap();
        assert!((hv - 0.75).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(hypervolume(&[vec![0.0, 0.5, 1.0]], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn points_beyond_reference_add_nothing() {
        let hv = hypervolume(&[vec![2.0, 0.0], vec![0.5, 0.5]], &[1.0, 1.0]).unwrap();
        assert_eq!(hv, 0.25);
    }

    #[test]
    fn unit_cube_corner_in_four_dimensions() {
        let hv = hypervolume(&[vec![0.0; 4]], &[1.0; 4]).unwrap();
        assert_eq!(hv, 1.0);
        let hv = hypervolume(&[vec![0.5; 4], vec![0.0, 0.5, 0.5, 0.5]], &[1.0; 4]).unwrap();
        assert!((hv - 0.125).abs() < 1e-15);
    }

    #[test]
    fn normalization_maps_zero_range_to_zero() {
        let pts = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let nf = NormalizedFront::new(&pts, &[1.0, 5.0], &[3.0, 5.0]);
        assert_eq!(nf.points, vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn pfs_examples() {
        let mut m = BTreeMap::new();
        m.insert("A".to_string(), vec![vec![1.0, 1.0]]);
        let r = pfs_contribution(&m).unwrap();
        assert_eq!(r["A"], Contribution { count: 1, percent: 100.0 });
        m.insert("B".to_string(), vec![vec![2.0, 2.0]]);
        let r = pfs_contribution(&m).unwrap();
        assert_eq!(r["A"].count, 1);
        assert_eq!(r["B"], Contribution { count: 0, percent: 0.0 });
    }

    #[test]
    fn pfs_credits_shared_points_to_both() {
        let mut m = BTreeMap::new();
        m.insert("A".to_string(), vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
        m.insert("B".to_string(), vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        let r = pfs_contribution(&m).unwrap();
        assert_eq!(r["A"].count, 1);
        assert_eq!(r["B"].count, 2);
    }

    #[test]
    fn u_test_complete_separation() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        assert!((r.p_two_sided - 0.1).abs() < 1e-12);
    }

    #[test]
    fn u_test_all_ties() {
        let r = mann_whitney_u(&[1.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(r.u, 4.5);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn u_test_large_identical_samples() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let r = mann_whitney_u(&a, &a).unwrap();
        assert!(!r.exact);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn u_test_large_separated_samples() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (100..130).map(|i| i as f64).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.p_two_sided < 1e-9);
    }

    #[test]
    fn cliffs_examples() {
        assert_eq!(cliffs_delta(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), (-1.0, Magnitude::Large));
        assert_eq!(cliffs_delta(&[2.0; 4], &[2.0; 5]).unwrap(), (0.0, Magnitude::Negligible));
        assert_eq!(cliffs_delta(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), (-0.25, Magnitude::Small));
        assert!(cliffs_delta(&[], &[1.0]).is_err());
    }

    #[test]
    fn magnitude_thresholds() {
        assert_eq!(Magnitude::of(0.146), Magnitude::Negligible);
        assert_eq!(Magnitude::of(0.147), Magnitude::Small);
        assert_eq!(Magnitude::of(-0.33), Magnitude::Medium);
        assert_eq!(Magnitude::of(0.474), Magnitude::Large);
    }
}
