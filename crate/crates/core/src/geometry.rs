//! Point-cloud primitives and the clustering routines the risk features use.
//!
//! Clouds are tiny (one row per reasoning trajectory, typically k = 5), so
//! everything here is exact O(k²·D) work over a row-major buffer.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::special;

/// `k` embeddings of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointCloud {
    coords: Vec<f64>,
    k: usize,
    dim: usize,
}

impl PointCloud {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::TooFewPoints(k));
        }
        let dim = rows[0].as_ref().len();
        if dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be positive"));
        }
        let mut coords = Vec::with_capacity(k * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::RaggedRows { expected: dim, got: row.len(), row: i });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput { row: i });
            }
            coords.extend_from_slice(row);
        }
        Ok(Self { coords, k, dim })
    }

    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::InvalidParameter("flat buffer is not a multiple of dim"));
        }
        let k = coords.len() / dim;
        if k < 2 {
            return Err(Error::TooFewPoints(k));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { row: pos / dim });
        }
        Ok(Self { coords, k, dim })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Every coordinate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|v| v * c).collect(),
            k: self.k,
            dim: self.dim,
        }
    }

    /// Rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(self.coords.len());
        for &p in perm {
            coords.extend_from_slice(self.row(p));
        }
        Self { coords, k: self.k, dim: self.dim }
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(squared_distance(a, b))
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(a.iter().map(|v| v * v).sum())
}

/// Index of pair `(i, j)`, `i < j`, in the condensed upper-triangle layout
/// `(0,1), (0,2), …, (0,k−1), (1,2), …`.
pub fn condensed_index(k: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * k - i * (i + 1) / 2 + (j - i - 1)
}

/// Pairwise and centroid statistics shared by several features.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceSummary {
    pub k: usize,
    /// Condensed upper triangle of Euclidean distances.
    pub pairwise: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `pairwise`.
    pub std: f64,
    pub centroid: Vec<f64>,
    /// Distance of each point to the centroid.
    pub radii: Vec<f64>,
}

impl DistanceSummary {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            core::cmp::Ordering::Equal => 0.0,
            core::cmp::Ordering::Less => self.pairwise[condensed_index(self.k, i, j)],
            core::cmp::Ordering::Greater => self.pairwise[condensed_index(self.k, j, i)],
        }
    }
}

pub fn distance_summary(cloud: &PointCloud) -> DistanceSummary {
    let k = cloud.len();
    let mut pairwise = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            pairwise.push(euclidean(cloud.row(i), cloud.row(j)));
        }
    }
    let mut centroid = vec![0.0; cloud.dim()];
    for row in cloud.rows() {
        for (c, v) in centroid.iter_mut().zip(row) {
            *c += v;
        }
    }
    for c in centroid.iter_mut() {
        *c /= k as f64;
    }
    let radii = cloud.rows().map(|row| euclidean(row, &centroid)).collect();
    DistanceSummary {
        k,
        mean: special::mean(&pairwise),
        std: special::population_std(&pairwise),
        pairwise,
        centroid,
        radii,
    }
}

/// Dense symmetric `k × k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Cosine similarity between every pair of rows.
pub fn cosine_matrix(cloud: &PointCloud) -> Result<SquareMatrix> {
    let k = cloud.len();
    let norms: Vec<f64> = cloud.rows().map(norm).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroNormRow(i));
    }
    let mut data = vec![0.0; k * k];
    for i in 0..k {
        data[i * k + i] = 1.0;
        for j in i + 1..k {
            let dot: f64 = cloud.row(i).iter().zip(cloud.row(j)).map(|(a, b)| a * b).sum();
            let c = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            data[i * k + j] = c;
            data[j * k + i] = c;
        }
    }
    Ok(SquareMatrix { n: k, data })
}

/// Label used for noise points.
pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterAssignment {
    pub labels: Vec<i32>,
    pub n_clusters: usize,
    pub n_noise: usize,
}

impl ClusterAssignment {
    pub fn from_labels(labels: Vec<i32>) -> Self {
        let n_noise = labels.iter().filter(|&&l| l == NOISE).count();
        let mut seen: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
        seen.sort_unstable();
        seen.dedup();
        Self { n_clusters: seen.len(), n_noise, labels }
    }
}

/// Density clustering with a closed ε-ball that counts the point itself.
///
/// Clusters are numbered in order of their lowest-index core point. A border
/// point reachable from several clusters joins the first one to reach it.
pub fn dbscan(cloud: &PointCloud, eps: f64, min_samples: usize) -> Result<ClusterAssignment> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidParameter("eps must be positive"));
    }
    if min_samples == 0 {
        return Err(Error::InvalidParameter("min_samples must be at least 1"));
    }
    let k = cloud.len();
    let neighbours: Vec<Vec<usize>> = (0..k)
        .map(|i| (0..k).filter(|&j| euclidean(cloud.row(i), cloud.row(j)) <= eps).collect())
        .collect();
    let is_core: Vec<bool> = neighbours.iter().map(|n| n.len() >= min_samples).collect();

    let mut labels = vec![NOISE; k];
    let mut assigned = vec![false; k];
    let mut next_label = 0;
    let mut queue = Vec::new();
    for seed in 0..k {
        if assigned[seed] || !is_core[seed] {
            continue;
        }
        assigned[seed] = true;
        labels[seed] = next_label;
        queue.clear();
        queue.push(seed);
        while let Some(p) = queue.pop() {
            if !is_core[p] {
                continue;
            }
            for &q in &neighbours[p] {
                if !assigned[q] {
                    assigned[q] = true;
                    labels[q] = next_label;
                    queue.push(q);
                }
            }
        }
        next_label += 1;
    }
    Ok(ClusterAssignment::from_labels(labels))
}

/// Outcome of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignment: ClusterAssignment,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration; non-increasing.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = squared_distance(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp_init(cloud: &PointCloud, n_clusters: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let k = cloud.len();
    let first = (rng.next_u64() % k as u64) as usize;
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = cloud.rows().map(|r| squared_distance(r, cloud.row(first))).collect();
    while chosen.len() < n_clusters {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = uniform01(rng) * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `acc` just short of `target`
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            (0..k).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, row) in cloud.rows().enumerate() {
            d2[i] = d2[i].min(squared_distance(row, cloud.row(next)));
        }
    }
    chosen.into_iter().map(|i| cloud.row(i).to_vec()).collect()
}

fn update_centers(cloud: &PointCloud, labels: &[usize], n_clusters: usize) -> Vec<Vec<f64>> {
    let mut centers = vec![vec![0.0; cloud.dim()]; n_clusters];
    let mut counts = vec![0usize; n_clusters];
    for (row, &l) in cloud.rows().zip(labels) {
        counts[l] += 1;
        for (c, v) in centers[l].iter_mut().zip(row) {
            *c += v;
        }
    }
    for (center, &n) in centers.iter_mut().zip(&counts) {
        if n > 0 {
            for c in center.iter_mut() {
                *c /= n as f64;
            }
        }
    }
    centers
}

/// Lloyd's algorithm with seeded k-means++ initialisation.
///
/// An empty cluster is re-seeded with the point farthest from its own
/// centroid. Ties everywhere resolve to the lowest index.
pub fn kmeans(cloud: &PointCloud, n_clusters: usize, seed: u64, max_iter: usize) -> Result<KMeansFit> {
    let k = cloud.len();
    if n_clusters < 2 || n_clusters > k {
        return Err(Error::InvalidParameter("n_clusters must satisfy 2 <= n_clusters <= k"));
    }
    if cloud.rows().all(|r| r == cloud.row(0)) {
        return Err(Error::DegenerateCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_init(cloud, n_clusters, &mut rng);
    let mut labels: Vec<usize> = vec![usize::MAX; k];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let mut new_labels: Vec<usize> = cloud.rows().map(|r| nearest_center(r, &centers).0).collect();

        let mut counts = vec![0usize; n_clusters];
        for &l in &new_labels {
            counts[l] += 1;
        }
        for empty in 0..n_clusters {
            if counts[empty] > 0 {
                continue;
            }
            let mut far: Option<(usize, f64)> = None;
            for (i, row) in cloud.rows().enumerate() {
                if counts[new_labels[i]] < 2 {
                    continue;
                }
                let d = squared_distance(row, &centers[new_labels[i]]);
                if d > 0.0 && far.is_none_or(|(_, best)| d > best) {
                    far = Some((i, d));
                }
            }
            if let Some((i, _)) = far {
                counts[new_labels[i]] -= 1;
                new_labels[i] = empty;
                counts[empty] = 1;
            }
        }

        let converged = new_labels == labels;
        labels = new_labels;
        let updated = update_centers(cloud, &labels, n_clusters);
        for (c, (center, fresh)) in centers.iter_mut().zip(updated).enumerate() {
            if counts[c] > 0 {
                *center = fresh;
            }
        }
        let inertia: f64 = cloud
            .rows()
            .zip(&labels)
            .map(|(r, &l)| squared_distance(r, &centers[l]))
            .sum();
        history.push(inertia);
        if converged {
            break;
        }
    }

    // relabel in order of first appearance so equal partitions compare equal
    let mut remap = vec![-1i32; n_clusters];
    let mut next = 0;
    let mut out = Vec::with_capacity(k);
    for &l in &labels {
        if remap[l] < 0 {
            remap[l] = next;
            next += 1;
        }
        out.push(remap[l]);
    }
    let mut ordered_centers = vec![Vec::new(); next as usize];
    for (old, &new) in remap.iter().enumerate() {
        if new >= 0 {
            ordered_centers[new as usize] = centers[old].clone();
        }
    }
    let inertia = *history.last().unwrap_or(&0.0);
    Ok(KMeansFit {
        assignment: ClusterAssignment::from_labels(out),
        centers: ordered_centers,
        inertia,
        inertia_history: history,
        iterations,
    })
}

/// Largest cloud handed to [`exact_kmeans`].
pub const EXACT_KMEANS_MAX_POINTS: usize = 10;

/// Minimum-inertia partition into exactly `n_clusters` groups, found by
/// enumerating every partition. Group inertia is computed from pairwise
/// squared distances (`Σ_{i<j} d²ᵢⱼ / n`), so no centroid is formed during
/// the search. Labels come out in first-appearance order; among exact ties
/// the first partition in enumeration order wins.
pub fn exact_kmeans(cloud: &PointCloud, n_clusters: usize) -> Result<KMeansFit> {
    let k = cloud.len();
    if n_clusters < 2 || n_clusters > k {
        return Err(Error::InvalidParameter("n_clusters must satisfy 2 <= n_clusters <= k"));
    }
    if k > EXACT_KMEANS_MAX_POINTS {
        return Err(Error::CloudTooLarge { k, cap: EXACT_KMEANS_MAX_POINTS });
    }
    let mut d2 = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            d2[i * k + j] = squared_distance(cloud.row(i), cloud.row(j));
        }
    }
    let mut search = PartitionSearch {
        k,
        groups: n_clusters,
        d2,
        labels: vec![0; k],
        pair_sums: vec![0.0; n_clusters],
        counts: vec![0; n_clusters],
        best: None,
    };
    search.descend(0, 0);
    let (labels, inertia) = search.best.expect("n_clusters <= k admits a partition");
    let centers = update_centers(cloud, &labels, n_clusters);
    Ok(KMeansFit {
        assignment: ClusterAssignment::from_labels(labels.iter().map(|&l| l as i32).collect()),
        centers,
        inertia,
        inertia_history: vec![inertia],
        iterations: 0,
    })
}

struct PartitionSearch {
    k: usize,
    groups: usize,
    d2: Vec<f64>,
    labels: Vec<usize>,
    pair_sums: Vec<f64>,
    counts: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
}

impl PartitionSearch {
    fn descend(&mut self, point: usize, used: usize) {
        if point == self.k {
            if used < self.groups {
                return;
            }
            let inertia: f64 = self.pair_sums.iter().zip(&self.counts).map(|(s, &n)| s / n as f64).sum();
            if self.best.as_ref().is_none_or(|(_, b)| inertia < *b) {
                self.best = Some((self.labels.clone(), inertia));
            }
            return;
        }
        if used + (self.k - point) < self.groups {
            return;
        }
        let open = if used < self.groups { used + 1 } else { used };
        for g in 0..open {
            let added: f64 = (0..point).filter(|&q| self.labels[q] == g).map(|q| self.d2[point * self.k + q]).sum();
            self.labels[point] = g;
            self.pair_sums[g] += added;
            self.counts[g] += 1;
            self.descend(point + 1, used.max(g + 1));
            self.pair_sums[g] -= added;
            self.counts[g] -= 1;
        }
    }
}

/// Mean silhouette coefficient over all points.
///
/// Points in singleton clusters score 0, as do points with a = b = 0.
pub fn silhouette(cloud: &PointCloud, assignment: &ClusterAssignment) -> Result<f64> {
    let k = cloud.len();
    if assignment.labels.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: assignment.labels.len() });
    }
    if assignment.labels.contains(&NOISE) {
        return Err(Error::InvalidParameter("silhouette is undefined for noise labels"));
    }
    let mut clusters: Vec<i32> = assignment.labels.clone();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.len() < 2 {
        return Err(Error::InsufficientClusters);
    }
    let labels = &assignment.labels;
    let mut total = 0.0;
    for i in 0..k {
        let own = labels[i];
        let mut own_sum = 0.0;
        let mut own_n = 0usize;
        let mut other_sum = vec![0.0; clusters.len()];
        let mut other_n = vec![0usize; clusters.len()];
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = euclidean(cloud.row(i), cloud.row(j));
            if labels[j] == own {
                own_sum += d;
                own_n += 1;
            } else {
                let c = clusters.binary_search(&labels[j]).unwrap_or(0);
                other_sum[c] += d;
                other_n[c] += 1;
            }
        }
        if own_n == 0 {
            continue;
        }
        let a = own_sum / own_n as f64;
        let b = other_sum
            .iter()
            .zip(&other_n)
            .filter(|(_, &n)| n > 0)
            .map(|(s, &n)| s / n as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / k as f64)
}
