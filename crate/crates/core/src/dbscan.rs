//! Density-based clustering with noise labels.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Label assigned to points outside every cluster.
pub const NOISE: i32 = -1;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Neighbour lists (distance ≤ eps, self included).
fn neighbourhoods<P: AsRef<[f64]>>(points: &[P], eps: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let eps2 = eps * eps;
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        for j in i..n {
            if dist2(points[i].as_ref(), points[j].as_ref()) <= eps2 {
                out[i].push(j);
                if i != j {
                    out[j].push(i);
                }
            }
        }
    }
    for list in &mut out {
        list.sort_unstable();
    }
    out
}

/// Clusters `points` under the Euclidean metric.
///
/// A point is core when at least `min_samples` points (itself included) lie
/// within `eps`. Clusters are numbered from 0 in order of their lowest core
/// index; a border point reachable from several clusters joins the
/// lowest-numbered one.
pub fn dbscan<P: AsRef<[f64]>>(points: &[P], eps: f64, min_samples: usize) -> Vec<i32> {
    let n = points.len();
    let nbrs = neighbourhoods(points, eps);
    let core: Vec<bool> = nbrs.iter().map(|l| l.len() >= min_samples).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &nbrs[p] {
                if labels[q] == NOISE {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

/// Number of distinct non-noise labels.
pub fn cluster_count(labels: &[i32]) -> usize {
    labels.iter().copied().filter(|&l| l >= 0).max().map_or(0, |m| m as usize + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_example() {
        let pts = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [10.0, 10.0]];
        assert_eq!(dbscan(&pts, 2.0, 2), vec![0, 0, 0, NOISE]);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![vec![1.5, -2.0]; 6];
        assert_eq!(dbscan(&pts, 2.0, 2), vec![0; 6]);
    }

    #[test]
    fn sparse_points_are_all_noise() {
        let pts: Vec<[f64; 1]> = (0..5).map(|i| [i as f64 * 3.0]).collect();
        assert!(dbscan(&pts, 2.0, 2).iter().all(|&l| l == NOISE));
        assert_eq!(cluster_count(&dbscan(&pts, 2.0, 2)), 0);
    }

    #[test]
    fn border_point_joins_first_cluster() {
        // 1.1 has only three neighbours (itself, 0.2 and 2.0) so it is not
        // core under min_samples = 4, but both flanking clusters reach it.
        let pts = [[0.0], [0.05], [0.1], [0.2], [1.1], [2.0], [2.1], [2.15], [2.2]];
        let labels = dbscan(&pts, 0.95, 4);
        assert_eq!(labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(cluster_count(&labels), 2);
    }
}
