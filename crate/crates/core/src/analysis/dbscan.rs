//! Density-based clustering of points in Euclidean 3-space.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub type Point = [f64; 3];

pub const DEFAULT_EPS: f64 = 0.03;
pub const DEFAULT_MIN_SAMPLES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    /// Cluster id per point, `None` for noise. Ids are numbered by the
    /// smallest member index.
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
    pub coverage: f64,
}

impl ClusteringResult {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(cluster))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn noise(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    let (x, y, z) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    libm::sqrt(x * x + y * y + z * z)
}

fn lex(a: &Point, b: &Point) -> Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Indices within `eps` of each point, self included.
pub fn neighborhoods(points: &[Point], eps: f64) -> Vec<Vec<usize>> {
    points
        .iter()
        .map(|p| (0..points.len()).filter(|&j| distance(p, &points[j]) <= eps).collect())
        .collect()
}

/// DBSCAN. A border point next to cores of several clusters joins the
/// cluster of the adjacent core with the lexicographically smallest
/// coordinates, so the partition does not depend on input order.
pub fn density_cluster(points: &[Point], eps: f64, min_samples: usize) -> ClusteringResult {
    let n = points.len();
    let hoods = neighborhoods(points, eps);
    let core: Vec<bool> = hoods.iter().map(|h| h.len() >= min_samples).collect();

    // connected components of the core graph
    let mut component = vec![usize::MAX; n];
    let mut n_components = 0;
    for start in 0..n {
        if !core[start] || component[start] != usize::MAX {
            continue;
        }
        component[start] = n_components;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for &j in &hoods[i] {
                if core[j] && component[j] == usize::MAX {
                    component[j] = n_components;
                    queue.push_back(j);
                }
            }
        }
        n_components += 1;
    }

    let mut raw: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if core[i] {
            raw[i] = Some(component[i]);
        } else {
            raw[i] = hoods[i]
                .iter()
                .filter(|&&j| core[j])
                .min_by(|&&a, &&b| lex(&points[a], &points[b]).then(a.cmp(&b)))
                .map(|&j| component[j]);
        }
    }

    // renumber by smallest member index
    let mut rename = vec![usize::MAX; n_components];
    let mut next = 0;
    let labels: Vec<Option<usize>> = raw
        .into_iter()
        .map(|l| {
            l.map(|c| {
                if rename[c] == usize::MAX {
                    rename[c] = next;
                    next += 1;
                }
                rename[c]
            })
        })
        .collect();
    let covered = labels.iter().filter(|l| l.is_some()).count();
    ClusteringResult {
        labels,
        n_clusters: next,
        coverage: if n == 0 { 0.0 } else { covered as f64 / n as f64 },
    }
}
