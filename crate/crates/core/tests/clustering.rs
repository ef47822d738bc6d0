use adaptive_cs::clustering::{kmeans_pp, kmeans_pp_vectors, DEFAULT_MAX_ITERS};
use adaptive_cs::rng::rng_from_seed;
use adaptive_cs::uncertainty::normalize_uncertainty;
use adaptive_cs::{Shape, UncertaintyMap};
use rand::Rng;
use rand_distr::StandardNormal;

/// Three blobs whose centers sit ten spreads apart.
fn planted(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let dim = 6;
    let spread = 0.1;
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..dim).map(|d| if d == c { 10.0 * spread } else { 0.0 }).collect())
        .collect();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..60 {
        let c = i % 3;
        let jitter = spread / (dim as f64).sqrt();
        points.push(
            centers[c]
                .iter()
                .map(|x| x + jitter * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        labels.push(c);
    }
    (points, labels)
}

/// True when the two labelings induce the same partition.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[test]
fn recovers_planted_partition() {
    for seed in 0..20 {
        let (points, labels) = planted(100 + seed);
        let views: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        let c = kmeans_pp_vectors(&views, 3, seed, DEFAULT_MAX_ITERS).unwrap();
        assert!(same_partition(&c.assignment, &labels), "seed {seed}");
    }
}

#[test]
fn centroids_of_signatures_are_nonnegative_and_deterministic() {
    let shape = Shape::new(4, 4);
    let mut rng = rng_from_seed(8);
    let sigs: Vec<_> = (0..25)
        .map(|_| {
            let v = UncertaintyMap::new(shape, (0..16).map(|_| rng.random::<f64>().powi(3)).collect()).unwrap();
            normalize_uncertainty(&v).unwrap()
        })
        .collect();
    let a = kmeans_pp(&sigs, 4, 3, DEFAULT_MAX_ITERS).unwrap();
    let b = kmeans_pp(&sigs, 4, 3, DEFAULT_MAX_ITERS).unwrap();
    assert_eq!(a, b);
    for c in &a.centroids {
        assert!(c.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }
    for w in a.objective_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn duplicate_points_with_more_clusters_than_distinct_values() {
    let pts = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let views: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
    let c = kmeans_pp_vectors(&views, 3, 1, DEFAULT_MAX_ITERS).unwrap();
    assert_eq!(c.centroids.len(), 3);
    assert!(c.objective() < 1e-24);
}
