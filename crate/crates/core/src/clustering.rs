//! Clustering primitives shared by the pipeline: k-means++ seeding, Lloyd
//! k-means for count vectors, PAM k-medoids for items that only have a
//! distance function, and distortion-ratio selection of the cluster count.
//!
//! Everything here is deterministic given the seed: random choices go through
//! a counter-based generator, iteration is in index order, and ties always
//! resolve to the lowest index.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Threshold under which the distortion-ratio function f(K) indicates real
/// cluster structure at K.
pub const FK_THRESHOLD: f64 = 0.85;

/// Cluster centers: mean vectors for k-means, item indices for k-medoids.
#[derive(Debug, Clone, PartialEq)]
pub enum Centers {
    Means(Vec<Vec<f64>>),
    Medoids(Vec<usize>),
}

/// Result of a clustering run. `distortion` is the sum over elements of the
/// squared distance to their assigned center and always equals what a
/// recomputation from `assignment` and `centers` yields.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub centers: Centers,
    pub distortion: f64,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::validation(format!(
            "k = {k} is outside 1..={n} for {n} points"
        )));
    }
    Ok(())
}

fn sq_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// D²-weighted seeding over item indices: the first center is uniform, each
/// further center is sampled with probability proportional to the squared
/// distance to its nearest already-chosen center. When every remaining weight
/// is zero (duplicate points) the next center is uniform over unchosen items.
fn dsq_seed(n: usize, k: usize, dist: &dyn Fn(usize, usize) -> f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut best = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let latest = *chosen.last().unwrap();
        let mut total = 0.0;
        for i in 0..n {
            let d = dist(i, latest);
            let w = d * d;
            if w < best[i] {
                best[i] = w;
            }
            total += best[i];
        }
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in best.iter().enumerate() {
                acc += w;
                if acc > target && *w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Float accumulation can land past the last positive weight.
            pick.unwrap_or_else(|| {
                best.iter().rposition(|w| *w > 0.0).expect("total was positive")
            })
        } else {
            let remaining: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            remaining[rng.random_range(0..remaining.len())]
        };
        chosen.push(next);
    }
    chosen
}

/// k-means++ seeding: returns the indices of `k` initial centers.
pub fn kmeanspp_seed(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(k, points.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = |i: usize, j: usize| sq_euclid(&points[i], &points[j]).sqrt();
    Ok(dsq_seed(points.len(), k, &dist, &mut rng))
}

fn assign_nearest(points: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_euclid(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn means(points: &[Vec<f64>], assignment: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
        }
    }
    sums
}

/// Lloyd k-means from k-means++ seeds, run to an assignment fixpoint or 100
/// iterations. A cluster left empty by an assignment step is re-seeded with
/// the point farthest from its currently assigned center.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterResult> {
    check_k(k, points.len())?;
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::validation("points must share one dimensionality"));
    }
    let seeds = kmeanspp_seed(points, k, seed)?;
    let mut centers: Vec<Vec<f64>> = seeds.iter().map(|&i| points[i].clone()).collect();
    let mut assignment = Vec::new();
    for _ in 0..100 {
        let mut next = assign_nearest(points, &centers);
        loop {
            let empty = (0..k).find(|c| !next.contains(c));
            let Some(empty) = empty else { break };
            // Donate the farthest point whose cluster keeps another member
            // (one exists by pigeonhole while any cluster is empty), and move
            // it explicitly: re-running the assignment could tie back to the
            // old center when points coincide and never fill the cluster.
            let mut sizes = vec![0usize; k];
            for &c in &next {
                sizes[c] += 1;
            }
            let far = (0..points.len())
                .filter(|&p| sizes[next[p]] > 1)
                .max_by(|&a, &b| {
                    let da = sq_euclid(&points[a], &centers[next[a]]);
                    let db = sq_euclid(&points[b], &centers[next[b]]);
                    da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                })
                .expect("a multi-member cluster exists while another is empty");
            centers[empty] = points[far].clone();
            next[far] = empty;
        }
        if next == assignment {
            break;
        }
        assignment = next;
        centers = means(points, &assignment, k, dim);
    }
    let distortion = points
        .iter()
        .zip(&assignment)
        .map(|(p, &c)| sq_euclid(p, &centers[c]))
        .sum();
    Ok(ClusterResult {
        k,
        assignment,
        centers: Centers::Means(centers),
        distortion,
    })
}

/// PAM k-medoids over an arbitrary symmetric distance: D²-style seeding, then
/// steepest single-swap descent until no swap lowers the total squared
/// distance to assigned medoids.
pub fn kmedoids(
    n: usize,
    dist: &dyn Fn(usize, usize) -> f64,
    k: usize,
    seed: u64,
) -> Result<ClusterResult> {
    check_k(k, n)?;
    // Materialize squared distances once; every population this crate
    // clusters this way is small (shape pairs, table signatures).
    let mut sq = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let d = dist(i, j);
            sq[i][j] = d * d;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = dsq_seed(n, k, dist, &mut rng);

    let nearest_two = |medoids: &[usize]| -> Vec<(f64, f64, usize)> {
        (0..n)
            .map(|p| {
                let mut d1 = f64::INFINITY;
                let mut d2 = f64::INFINITY;
                let mut m1 = 0;
                for (mi, &m) in medoids.iter().enumerate() {
                    let d = sq[p][m];
                    if d < d1 {
                        d2 = d1;
                        d1 = d;
                        m1 = mi;
                    } else if d < d2 {
                        d2 = d;
                    }
                }
                (d1, d2, m1)
            })
            .collect()
    };

    loop {
        let cache = nearest_two(&medoids);
        let mut best_delta = 0.0;
        let mut best_swap = None;
        for mi in 0..medoids.len() {
            for x in 0..n {
                if medoids.contains(&x) {
                    continue;
                }
                let mut delta = 0.0;
                for p in 0..n {
                    let (d1, d2, m1) = cache[p];
                    let dx = sq[p][x];
                    let new = if m1 == mi { dx.min(d2) } else { dx.min(d1) };
                    delta += new - d1;
                }
                if delta < best_delta {
                    best_delta = delta;
                    best_swap = Some((mi, x));
                }
            }
        }
        match best_swap {
            Some((mi, x)) => medoids[mi] = x,
            None => break,
        }
    }

    let cache = nearest_two(&medoids);
    let assignment: Vec<usize> = cache.iter().map(|&(_, _, m1)| m1).collect();
    let distortion = cache.iter().map(|&(d1, _, _)| d1).sum();
    Ok(ClusterResult {
        k,
        assignment,
        centers: Centers::Medoids(medoids),
        distortion,
    })
}

/// Distortion-ratio selection of K (Pham, Dimov & Nguyen's f(K)):
///
/// * f(1) = 1
/// * f(K) = S_K / (α_K · S_{K-1}) with α_2 = 1 - 3/(4d) and
///   α_K = α_{K-1} + (1 - α_{K-1})/6 for K > 2,
///
/// where S_K is the clustering distortion at K and `d` the (effective)
/// dimensionality. Returns the smallest K with f(K) < `threshold`, 1 when no
/// K qualifies, and K-1 when S_{K-1} hits zero (a perfect fit).
fn fk_select(
    mut s_of_k: impl FnMut(usize) -> Result<f64>,
    k_max: usize,
    dim: usize,
    threshold: f64,
) -> Result<usize> {
    if k_max == 0 {
        return Err(Error::validation("k_max must be at least 1"));
    }
    let mut s_prev = s_of_k(1)?;
    let mut alpha = 1.0 - 3.0 / (4.0 * dim.max(1) as f64);
    for k in 2..=k_max {
        if s_prev == 0.0 {
            return Ok(k - 1);
        }
        let s_k = s_of_k(k)?;
        if s_k / (alpha * s_prev) < threshold {
            return Ok(k);
        }
        alpha += (1.0 - alpha) / 6.0;
        s_prev = s_k;
    }
    Ok(1)
}

/// Estimate the cluster count for vector data using k-means distortions.
pub fn estimate_k_vectors(
    points: &[Vec<f64>],
    k_max: usize,
    seed: u64,
    threshold: f64,
) -> Result<usize> {
    check_k(k_max, points.len())?;
    let dim = points.first().map(|p| p.len()).unwrap_or(1);
    fk_select(|k| Ok(kmeans(points, k, seed)?.distortion), k_max, dim, threshold)
}

/// Estimate the cluster count for metric-only data using k-medoids
/// distortions. `effective_dim` stands in for the vector dimensionality in
/// the α recurrence.
pub fn estimate_k_metric(
    n: usize,
    dist: &dyn Fn(usize, usize) -> f64,
    effective_dim: usize,
    k_max: usize,
    seed: u64,
    threshold: f64,
) -> Result<usize> {
    check_k(k_max, n)?;
    fk_select(
        |k| Ok(kmedoids(n, dist, k, seed)?.distortion),
        k_max,
        effective_dim,
        threshold,
    )
}

/// True when no point would be closer to a different center than to its
/// assigned one (centers held fixed).
pub fn is_one_stable(points: &[Vec<f64>], result: &ClusterResult) -> bool {
    let Centers::Means(centers) = &result.centers else {
        return false;
    };
    points.iter().zip(&result.assignment).all(|(p, &a)| {
        let own = sq_euclid(p, &centers[a]);
        centers.iter().all(|c| own <= sq_euclid(p, c) + 1e-12)
    })
}

/// True when no single medoid-for-point swap lowers the squared-distance
/// objective.
pub fn is_swap_stable(n: usize, dist: &dyn Fn(usize, usize) -> f64, result: &ClusterResult) -> bool {
    let Centers::Medoids(medoids) = &result.centers else {
        return false;
    };
    let objective = |meds: &[usize]| -> f64 {
        (0..n)
            .map(|p| {
                meds.iter()
                    .map(|&m| {
                        let d = dist(p, m);
                        d * d
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };
    let base = objective(medoids);
    for mi in 0..medoids.len() {
        for x in 0..n {
            if medoids.contains(&x) {
                continue;
            }
            let mut trial = medoids.clone();
            trial[mi] = x;
            if objective(&trial) < base - 1e-9 {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive k-means optimum for tiny inputs: try every assignment of n
    /// points to k labels, score against per-label means.
    fn brute_force_kmeans_distortion(points: &[Vec<f64>], k: usize) -> f64 {
        let n = points.len();
        let dim = points[0].len();
        let mut best = f64::INFINITY;
        let mut assign = vec![0usize; n];
        loop {
            if (0..k).all(|c| assign.contains(&c)) {
                let centers = means(points, &assign, k, dim);
                let d: f64 = points
                    .iter()
                    .zip(&assign)
                    .map(|(p, &c)| sq_euclid(p, &centers[c]))
                    .sum();
                best = best.min(d);
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                assign[i] += 1;
                if assign[i] < k {
                    break;
                }
                assign[i] = 0;
                i += 1;
            }
        }
    }

    /// Exhaustive k-medoids optimum: try every medoid subset.
    fn brute_force_kmedoids_distortion(n: usize, dist: &dyn Fn(usize, usize) -> f64, k: usize) -> f64 {
        fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                combos(n, k, i + 1, cur, out);
                cur.pop();
            }
        }
        let mut all = Vec::new();
        combos(n, k, 0, &mut Vec::new(), &mut all);
        all.iter()
            .map(|meds| {
                (0..n)
                    .map(|p| {
                        meds.iter()
                            .map(|&m| dist(p, m) * dist(p, m))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn seeding_with_k_equal_n_uses_every_point() {
        let points: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 0.0]).collect();
        let mut seeds = kmeanspp_seed(&points, 6, 3).unwrap();
        seeds.sort_unstable();
        assert_eq!(seeds, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn seeding_k1_is_single_uniform_choice() {
        let points: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let seeds = kmeanspp_seed(&points, 1, 0).unwrap();
        assert_eq!(seeds.len(), 1);
        assert!(seeds[0] < 4);
    }

    #[test]
    fn seeding_separates_coincident_groups() {
        // Two groups of identical points far apart: D² weights force one
        // center in each group for every seed.
        let mut points = vec![vec![0.0, 0.0]; 4];
        points.extend(vec![vec![100.0, 0.0]; 4]);
        for seed in 0..20 {
            let seeds = kmeanspp_seed(&points, 2, seed).unwrap();
            let sides: Vec<bool> = seeds.iter().map(|&i| i < 4).collect();
            assert_ne!(sides[0], sides[1], "seed {seed} put both centers in one group");
        }
    }

    #[test]
    fn seeding_k_above_n_is_rejected() {
        let points = vec![vec![0.0]];
        assert!(kmeanspp_seed(&points, 2, 0).is_err());
        assert!(kmeans(&points, 0, 0).is_err());
    }

    #[test]
    fn kmeans_on_two_pairs_matches_brute_force() {
        // Oracle: best 2-split of {0, 1, 10, 11} on a line pairs the near
        // points; each pair contributes 2 * 0.5² = 0.5.
        let points: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&x| vec![x]).collect();
        let oracle = brute_force_kmeans_distortion(&points, 2);
        assert!((oracle - 1.0).abs() < 1e-12);
        let result = kmeans(&points, 2, 7).unwrap();
        assert!((result.distortion - oracle).abs() < 1e-9);
        assert_eq!(result.assignment[0], result.assignment[1]);
        assert_eq!(result.assignment[2], result.assignment[3]);
        assert_ne!(result.assignment[0], result.assignment[2]);
        assert!(is_one_stable(&points, &result));
    }

    #[test]
    fn kmeans_identical_points_have_zero_distortion() {
        let points = vec![vec![3.0, 4.0]; 5];
        for k in 1..=3 {
            let result = kmeans(&points, k, 1).unwrap();
            assert_eq!(result.distortion, 0.0);
            // Every cluster keeps at least one member.
            for c in 0..k {
                assert!(result.assignment.contains(&c), "cluster {c} empty at k={k}");
            }
        }
    }

    #[test]
    fn kmeans_k1_center_is_the_mean() {
        let points: Vec<Vec<f64>> = vec![vec![0.0], vec![2.0], vec![4.0]];
        let result = kmeans(&points, 1, 0).unwrap();
        let Centers::Means(centers) = &result.centers else { panic!() };
        assert!((centers[0][0] - 2.0).abs() < 1e-12);
        // Variance around the mean: 4 + 0 + 4.
        assert!((result.distortion - 8.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let points: Vec<Vec<f64>> = (0..10).map(|i| vec![(i * i % 17) as f64, i as f64]).collect();
        let a = kmeans(&points, 3, 42).unwrap();
        let b = kmeans(&points, 3, 42).unwrap();
        assert_eq!(a, b);
    }

    fn line_dist(items: &[f64]) -> impl Fn(usize, usize) -> f64 + '_ {
        move |i, j| (items[i] - items[j]).abs()
    }

    #[test]
    fn kmedoids_two_items_k2_self_assign() {
        let items = [0.0, 9.0];
        let result = kmedoids(2, &line_dist(&items), 2, 0).unwrap();
        assert_eq!(result.distortion, 0.0);
        let Centers::Medoids(m) = &result.centers else { panic!() };
        let mut m = m.clone();
        m.sort_unstable();
        assert_eq!(m, vec![0, 1]);
    }

    #[test]
    fn kmedoids_line_clusters_match_brute_force() {
        // {0,1,2} and {100,101,102}: optimal medoids are the middles, each
        // cluster contributing 1² + 1² = 2.
        let items = [0.0, 1.0, 2.0, 100.0, 101.0, 102.0];
        let dist = line_dist(&items);
        let oracle = brute_force_kmedoids_distortion(6, &dist, 2);
        assert!((oracle - 4.0).abs() < 1e-12);
        let result = kmedoids(6, &dist, 2, 11).unwrap();
        assert!((result.distortion - oracle).abs() < 1e-9);
        let Centers::Medoids(m) = &result.centers else { panic!() };
        let mut m = m.clone();
        m.sort_unstable();
        assert_eq!(m, vec![1, 4]);
        assert!(is_swap_stable(6, &dist, &result));
    }

    #[test]
    fn kmedoids_k1_picks_the_median() {
        let items = [0.0, 1.0, 2.0];
        let result = kmedoids(3, &line_dist(&items), 1, 5).unwrap();
        let Centers::Medoids(m) = &result.centers else { panic!() };
        assert_eq!(m, &vec![1]);
        assert!((result.distortion - 2.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_k_identical_points_is_one() {
        let points = vec![vec![1.0, 1.0]; 6];
        assert_eq!(estimate_k_vectors(&points, 4, 0, FK_THRESHOLD).unwrap(), 1);
    }

    #[test]
    fn estimate_k_two_blobs_is_two() {
        let mut points: Vec<Vec<f64>> = Vec::new();
        for i in 0..5 {
            points.push(vec![i as f64 * 0.1, 0.0]);
            points.push(vec![100.0 + i as f64 * 0.1, 0.0]);
        }
        // Oracle check that f(2) really dips: S1 is dominated by the 50-unit
        // split, S2 only by the 0.1-unit jitter.
        let s1 = kmeans(&points, 1, 0).unwrap().distortion;
        let s2 = kmeans(&points, 2, 0).unwrap().distortion;
        let alpha2 = 1.0 - 3.0 / (4.0 * 2.0);
        assert!(s2 / (alpha2 * s1) < FK_THRESHOLD);
        assert_eq!(estimate_k_vectors(&points, 4, 0, FK_THRESHOLD).unwrap(), 2);
    }

    #[test]
    fn estimate_k_unstructured_points_is_one() {
        // A fixed scatter with no grouping: no f(K) dip below 0.85.
        let points: Vec<Vec<f64>> = vec![
            vec![0.13, 0.94],
            vec![0.71, 0.28],
            vec![0.45, 0.61],
            vec![0.92, 0.80],
            vec![0.27, 0.35],
            vec![0.60, 0.05],
            vec![0.88, 0.47],
            vec![0.05, 0.52],
        ];
        // Oracle: evaluate f(K) directly from the same distortions.
        let mut alpha = 1.0 - 3.0 / (4.0 * 2.0);
        let mut s_prev = kmeans(&points, 1, 3).unwrap().distortion;
        for k in 2..=3 {
            let s_k = kmeans(&points, k, 3).unwrap().distortion;
            assert!(
                s_k / (alpha * s_prev) >= FK_THRESHOLD,
                "fixture unexpectedly has structure at k={k}"
            );
            alpha += (1.0 - alpha) / 6.0;
            s_prev = s_k;
        }
        assert_eq!(estimate_k_vectors(&points, 3, 3, FK_THRESHOLD).unwrap(), 1);
    }

    #[test]
    fn estimate_k_metric_coincident_pairs_dip_at_two() {
        // Three coincident pairs on a line. Oracle by hand: S_1 = 10000
        // (medoid at the middle position), S_2 = 5000 (any two positions
        // covered, the third pair pays 2 * 50²), so
        // f(2) = 5000 / (0.625 * 10000) = 0.8 < 0.85 and the smallest-K
        // rule answers 2 even though K = 3 would fit perfectly.
        let items = [0.0, 0.0, 50.0, 50.0, 100.0, 100.0];
        let dist = line_dist(&items);
        assert_eq!(kmedoids(6, &dist, 1, 2).unwrap().distortion, 10000.0);
        assert_eq!(kmedoids(6, &dist, 2, 2).unwrap().distortion, 5000.0);
        let k = estimate_k_metric(6, &dist, 2, 5, 2, FK_THRESHOLD).unwrap();
        assert_eq!(k, 2);
        assert_eq!(kmedoids(6, &dist, 3, 2).unwrap().distortion, 0.0);
    }

    #[test]
    fn fk_select_zero_baseline_stops_at_one() {
        // S_1 = 0 short-circuits to K - 1 = 1 before any further distortion
        // is requested (and before f(2) would divide by zero).
        let calls = std::cell::Cell::new(0);
        let k = fk_select(
            |k| {
                calls.set(calls.get() + 1);
                assert_eq!(k, 1, "only the baseline distortion should be computed");
                Ok(0.0)
            },
            4,
            2,
            FK_THRESHOLD,
        )
        .unwrap();
        assert_eq!(k, 1);
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn kmedoids_quality_and_stability_across_seeds() {
        // Random small instances: PAM from D² seeding should sit within 1.2x
        // of the exhaustive optimum and always be swap-stable.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut within = 0;
        let total = 40;
        for seed in 0..total {
            let n = rng.random_range(4..=9);
            let k = rng.random_range(2..=3.min(n));
            let items: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
            let dist = line_dist(&items);
            let result = kmedoids(n, &dist, k, seed as u64).unwrap();
            assert!(is_swap_stable(n, &dist, &result), "seed {seed} not swap-stable");
            let oracle = brute_force_kmedoids_distortion(n, &dist, k);
            if result.distortion <= oracle * 1.2 + 1e-9 {
                within += 1;
            }
        }
        assert!(within >= total * 95 / 100, "only {within}/{total} within 1.2x of optimum");
    }
}
