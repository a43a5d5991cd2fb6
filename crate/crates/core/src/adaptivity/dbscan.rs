use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Noise,
    Cluster(usize),
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Noise => None,
            Label::Cluster(c) => Some(c),
        }
    }

    /// `-1` for noise, the cluster id otherwise.
    pub fn as_i64(self) -> i64 {
        match self {
            Label::Noise => -1,
            Label::Cluster(c) => c as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabeling {
    pub labels: Vec<Label>,
    /// Indexed by cluster id.
    pub cluster_sizes: Vec<usize>,
    /// Size of each point's eps-neighbourhood, the point itself included.
    pub density: Vec<usize>,
    pub core: Vec<bool>,
}

impl ClusterLabeling {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }

    pub fn size_of(&self, label: Label) -> usize {
        match label {
            Label::Noise => 0,
            Label::Cluster(c) => self.cluster_sizes[c],
        }
    }

    /// Builds a labeling from raw labels; sizes are recounted.
    pub fn from_labels(labels: Vec<Label>, density: Vec<usize>) -> Result<Self> {
        if density.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: density.len(),
            });
        }
        let n_clusters = labels.iter().filter_map(|l| l.cluster()).map(|c| c + 1).max().unwrap_or(0);
        let mut cluster_sizes = vec![0; n_clusters];
        for l in &labels {
            if let Label::Cluster(c) = l {
                cluster_sizes[*c] += 1;
            }
        }
        Ok(ClusterLabeling {
            core: vec![false; labels.len()],
            labels,
            cluster_sizes,
            density,
        })
    }
}

fn validate(points: &[Vec<f64>]) -> Result<usize> {
    let first = points.first().ok_or_else(|| Error::invalid("no points to cluster"))?;
    let dim = first.len();
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("latent point"));
        }
    }
    Ok(dim)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Points visited in lexicographic coordinate order; ties keep input order.
fn canonical_order(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lexicographic(&points[a], &points[b]).then(a.cmp(&b)));
    order
}

/// eps-neighbour lists (self excluded) via a sweep along the first
/// coordinate of the canonically ordered points.
fn neighbour_lists(points: &[Vec<f64>], order: &[usize], eps: f64) -> Vec<Vec<usize>> {
    let eps2 = eps * eps;
    let mut nbrs = vec![Vec::new(); points.len()];
    for (pos, &a) in order.iter().enumerate() {
        let pa = &points[a];
        for &b in &order[pos + 1..] {
            let pb = &points[b];
            if pb.first().copied().unwrap_or(0.0) - pa.first().copied().unwrap_or(0.0) > eps {
                break;
            }
            if sq_dist(pa, pb) <= eps2 {
                nbrs[a].push(b);
                nbrs[b].push(a);
            }
        }
    }
    nbrs
}

/// Density-based clustering.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters are connected components of core points, numbered
/// in canonical (lexicographic) order of their first core member. A border
/// point joins the lowest-numbered cluster among its core neighbours; the
/// rest is noise. The result does not depend on input order.
pub fn dbscan(points: &[Vec<f64>], p: &DbscanParams) -> Result<ClusterLabeling> {
    validate(points)?;
    if !(p.eps > 0.0 && p.eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be > 0, got {}", p.eps)));
    }
    if p.min_pts < 2 {
        return Err(Error::invalid(format!("min_pts must be >= 2, got {}", p.min_pts)));
    }
    let n = points.len();
    let order = canonical_order(points);
    let nbrs = neighbour_lists(points, &order, p.eps);
    let density: Vec<usize> = nbrs.iter().map(|v| v.len() + 1).collect();
    let core: Vec<bool> = density.iter().map(|&c| c >= p.min_pts).collect();

    let mut labels = vec![Label::Noise; n];
    let mut cluster_of_core: Vec<Option<usize>> = vec![None; n];
    let mut cluster_sizes = Vec::new();
    let mut stack = Vec::new();
    for &start in &order {
        if !core[start] || cluster_of_core[start].is_some() {
            continue;
        }
        let id = cluster_sizes.len();
        cluster_sizes.push(0);
        cluster_of_core[start] = Some(id);
        stack.push(start);
        while let Some(q) = stack.pop() {
            for &r in &nbrs[q] {
                if core[r] && cluster_of_core[r].is_none() {
                    cluster_of_core[r] = Some(id);
                    stack.push(r);
                }
            }
        }
    }
    for i in 0..n {
        let label = if core[i] {
            cluster_of_core[i]
        } else {
            nbrs[i].iter().filter_map(|&j| cluster_of_core[j]).min()
        };
        if let Some(c) = label {
            labels[i] = Label::Cluster(c);
            cluster_sizes[c] += 1;
        }
    }
    Ok(ClusterLabeling {
        labels,
        cluster_sizes,
        density,
        core,
    })
}

/// Distance from each point to its `k`-th nearest other point (the farthest
/// point when fewer than `k` others exist).
pub fn kth_neighbor_distances(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    validate(points)?;
    let k = k.max(1);
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| sq_dist(&points[i], &points[j])));
        if row.is_empty() {
            out.push(0.0);
            continue;
        }
        let kk = k.min(row.len()) - 1;
        let (_, v, _) = row.select_nth_unstable_by(kk, |a, b| a.total_cmp(b));
        out.push(v.sqrt());
    }
    Ok(out)
}

/// Median `k`-th nearest neighbour distance, floored at `1e-9`.
pub fn median_kth_neighbor_distance(points: &[Vec<f64>], k: usize) -> Result<f64> {
    let mut d = kth_neighbor_distances(points, k)?;
    d.sort_by(|a, b| a.total_cmp(b));
    let n = d.len();
    let m = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    Ok(m.max(1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_noise() {
        let l = dbscan(&[vec![0.0, 1.0]], &DbscanParams { eps: 1.0, min_pts: 2 }).unwrap();
        assert_eq!(l.labels, vec![Label::Noise]);
        assert_eq!(l.noise_count(), 1);
    }

    #[test]
    fn errors() {
        let p = DbscanParams { eps: 1.0, min_pts: 2 };
        assert!(dbscan(&[], &p).is_err());
        assert!(dbscan(&[vec![0.0], vec![0.0, 1.0]], &p).is_err());
        assert!(dbscan(&[vec![0.0]], &DbscanParams { eps: 0.0, min_pts: 2 }).is_err());
        assert!(dbscan(&[vec![0.0]], &DbscanParams { eps: 1.0, min_pts: 1 }).is_err());
    }

    #[test]
    fn border_point_joins_lowest_cluster() {
        // two dense groups and one point equidistant between them
        let mut pts = vec![];
        for x in [0.0, 0.1, 0.2, 0.3] {
            pts.push(vec![x, 0.0]);
        }
        for x in [2.0, 2.1, 2.2, 2.3] {
            pts.push(vec![x, 0.0]);
        }
        pts.push(vec![1.15, 0.0]);
        let l = dbscan(&pts, &DbscanParams { eps: 0.9, min_pts: 4 }).unwrap();
        assert_eq!(l.cluster_count(), 2);
        assert!(!l.core[8]);
        assert_eq!(l.labels[8], Label::Cluster(0));
        assert_eq!(l.labels[0], Label::Cluster(0));
        assert_eq!(l.labels[4], Label::Cluster(1));
        assert_eq!(l.cluster_sizes, vec![5, 4]);
    }

    #[test]
    fn kth_neighbour_distances_on_a_line() {
        let pts: Vec<_> = (0..5).map(|i| vec![i as f64]).collect();
        assert_eq!(kth_neighbor_distances(&pts, 1).unwrap(), vec![1.0; 5]);
        assert_eq!(kth_neighbor_distances(&pts, 4).unwrap(), vec![4.0, 3.0, 2.0, 3.0, 4.0]);
        assert_eq!(median_kth_neighbor_distance(&pts, 4).unwrap(), 3.0);
    }
}
