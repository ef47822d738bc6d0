//! k-means++ over uncertainty signatures.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::uncertainty::{NormalizedUncertainty, UncertaintyMap};
use crate::rng::rng_from_seed;

pub const DEFAULT_MAX_ITERS: usize = 100;

/// Clustering result over plain vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Clusters {
    pub centroids: Vec<Vec<f64>>,
    /// Centroid index of each input point.
    pub assignment: Vec<usize>,
    /// Lloyd objective after each assignment step.
    pub objective_trace: Vec<f64>,
}

impl Clusters {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Centroids of normalized uncertainty maps. Centroids are plain averages and
/// are not renormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidSet {
    pub centroids: Vec<UncertaintyMap>,
    pub assignment: Vec<usize>,
    pub objective_trace: Vec<f64>,
}

impl CentroidSet {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations.
///
/// Seeding draws the first centroid uniformly and each next one with
/// probability proportional to the squared distance to the nearest chosen
/// centroid (the lowest-index point not yet chosen when all distances are
/// zero). Lloyd iterations run until the assignment stops changing or
/// `max_iters` is reached. An empty cluster is re-seeded at the point
/// farthest from its current centroid.
pub fn kmeans_pp_vectors(points: &[&[f64]], k: usize, seed: u64, max_iters: usize) -> Result<Clusters> {
    if points.is_empty() {
        return Err(Error::invalid("k-means needs at least one point"));
    }
    if k == 0 {
        return Err(Error::invalid("k-means needs at least one cluster"));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().position(|p| p.len() != dim) {
        return Err(Error::invalid(format!(
            "point {p} has dimension {}, expected {dim}",
            points[p].len()
        )));
    }

    let mut rng = rng_from_seed(seed);
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(&mut rng),
            Err(_) => (0..points.len())
                .find(|i| !chosen.contains(i))
                .unwrap_or(chosen.len() % points.len()),
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, points[next]));
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| points[i].to_vec()).collect();

    let mut assignment: Vec<usize> = Vec::new();
    let mut objective_trace = Vec::new();
    for _ in 0..max_iters.max(1) {
        let (next, dists): (Vec<usize>, Vec<f64>) =
            points.iter().map(|p| nearest(p, &centroids)).unzip();
        objective_trace.push(dists.iter().sum());
        if next == assignment {
            break;
        }
        assignment = next;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..points.len())
                    .map(|i| (i, squared_distance(points[i], &centroids[assignment[i]])))
                    .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
                    .0;
                centroids[j] = points[far].to_vec();
            }
        }
    }
    if assignment.is_empty() {
        assignment = points.iter().map(|p| nearest(p, &centroids).0).collect();
    }

    Ok(Clusters {
        centroids,
        assignment,
        objective_trace,
    })
}

/// k-means++ over normalized uncertainty signatures.
pub fn kmeans_pp(points: &[NormalizedUncertainty], k: usize, seed: u64, max_iters: usize) -> Result<CentroidSet> {
    let Some(first) = points.first() else {
        return Err(Error::invalid("k-means needs at least one point"));
    };
    let shape = first.shape();
    for p in points {
        shape.ensure_eq(p.shape())?;
    }
    let views: Vec<&[f64]> = points.iter().map(|p| p.values()).collect();
    let clusters = kmeans_pp_vectors(&views, k, seed, max_iters)?;
    let centroids = clusters
        .centroids
        .into_iter()
        .map(|c| UncertaintyMap::new(shape, c.into_iter().map(|v| v.max(0.0)).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(CentroidSet {
        centroids,
        assignment: clusters.assignment,
        objective_trace: clusters.objective_trace,
    })
}
