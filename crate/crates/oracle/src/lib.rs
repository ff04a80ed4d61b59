//! Slow, direct reference implementations. Nothing here shares code with
//! `edtr-core`; every routine is a literal transcription of its definition,
//! with exhaustive search where the production code uses heuristics.

pub type Rows = [Vec<f64>];

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..a.len() {
        s += (a[t] - b[t]) * (a[t] - b[t]);
    }
    s.sqrt()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let d = dist(a, b);
    d * d
}

pub fn mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

pub fn pop_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut s = 0.0;
    for x in xs {
        s += (x - m) * (x - m);
    }
    (s / xs.len() as f64).sqrt()
}

pub fn pairwise(points: &Rows) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i < j {
                out.push(dist(&points[i], &points[j]));
            }
        }
    }
    out
}

pub fn centroid(points: &Rows) -> Vec<f64> {
    let d = points[0].len();
    (0..d).map(|t| points.iter().map(|p| p[t]).sum::<f64>() / points.len() as f64).collect()
}

pub fn radii(points: &Rows) -> Vec<f64> {
    let c = centroid(points);
    points.iter().map(|p| dist(p, &c)).collect()
}

/// Linear-interpolation quantile of an unsorted list.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn spread(points: &Rows) -> f64 {
    pop_std(&pairwise(points))
}

pub fn consistency(points: &Rows) -> f64 {
    let k = points.len();
    let mut cosines = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let dot: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum();
            let ni: f64 = points[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            let nj: f64 = points[j].iter().map(|a| a * a).sum::<f64>().sqrt();
            cosines.push((dot / (ni * nj)).clamp(-1.0, 1.0));
        }
    }
    1.0 - mean(&cosines)
}

pub fn complexity(points: &Rows) -> f64 {
    let p = pairwise(points);
    let m = mean(&p);
    if m < 1e-12 {
        0.0
    } else {
        pop_std(&p) / m
    }
}

/// Cluster and noise counts of DBSCAN, via explicit core-graph components.
pub fn dbscan_counts(points: &Rows, eps: f64, min_samples: usize) -> (usize, usize) {
    let k = points.len();
    let near = |i: usize, j: usize| dist(&points[i], &points[j]) <= eps;
    let core: Vec<bool> = (0..k).map(|i| (0..k).filter(|&j| near(i, j)).count() >= min_samples).collect();
    let mut component: Vec<Option<usize>> = vec![None; k];
    let mut n_clusters = 0;
    for s in 0..k {
        if !core[s] || component[s].is_some() {
            continue;
        }
        let mut frontier = vec![s];
        component[s] = Some(n_clusters);
        while let Some(p) = frontier.pop() {
            for q in 0..k {
                if core[q] && component[q].is_none() && near(p, q) {
                    component[q] = Some(n_clusters);
                    frontier.push(q);
                }
            }
        }
        n_clusters += 1;
    }
    let noise = (0..k).filter(|&i| !core[i] && !(0..k).any(|j| core[j] && near(i, j))).count();
    (n_clusters, noise)
}

pub fn stability(points: &Rows) -> f64 {
    let (c, n) = dbscan_counts(points, 0.5, 2);
    n as f64 / points.len() as f64 + 1.0 / (c as f64 + 1.0)
}

pub fn coherence(points: &Rows) -> f64 {
    let r = radii(points);
    let m = mean(&r);
    if m < 1e-12 {
        0.0
    } else {
        pop_std(&r) / m
    }
}

pub fn diversity(points: &Rows) -> f64 {
    let m = mean(&pairwise(points));
    if m > 1.0 {
        0.5 * (m - 1.0)
    } else {
        0.0
    }
}

pub fn outlier(points: &Rows) -> f64 {
    let r = radii(points);
    let q1 = quantile(&r, 0.25);
    let q3 = quantile(&r, 0.75);
    let fence = q3 + 1.5 * (q3 - q1);
    r.iter().filter(|&&x| x > fence).count() as f64 / r.len() as f64
}

/// Every labelling of `k` items into exactly `groups` non-empty groups, as
/// restricted-growth strings.
pub fn set_partitions(k: usize, groups: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, k: usize, groups: usize, used: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            if used == groups {
                out.push(prefix.clone());
            }
            return;
        }
        if used + (k - prefix.len()) < groups {
            return;
        }
        for g in 0..=used.min(groups - 1) {
            prefix.push(g);
            grow(prefix, k, groups, used.max(g + 1), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), k, groups, 0, &mut out);
    out
}

pub fn inertia(points: &Rows, labels: &[usize]) -> f64 {
    let groups = labels.iter().max().map_or(0, |m| m + 1);
    let mut total = 0.0;
    for g in 0..groups {
        let members: Vec<Vec<f64>> = (0..points.len()).filter(|&i| labels[i] == g).map(|i| points[i].clone()).collect();
        if members.is_empty() {
            continue;
        }
        let c = centroid(&members);
        for m in &members {
            total += sq_dist(m, &c);
        }
    }
    total
}

/// Global minimum-inertia partition into `groups` clusters.
pub fn exhaustive_kmeans(points: &Rows, groups: usize) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for labels in set_partitions(points.len(), groups) {
        let w = inertia(points, &labels);
        if best.as_ref().is_none_or(|b| w < b.1) {
            best = Some((labels, w));
        }
    }
    best.unwrap()
}

/// Textbook mean silhouette; singletons and a = b = 0 score 0.
pub fn silhouette(points: &Rows, labels: &[usize]) -> f64 {
    let k = points.len();
    let mut total = 0.0;
    for i in 0..k {
        let same: Vec<usize> = (0..k).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if same.is_empty() {
            continue;
        }
        let a = same.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / same.len() as f64;
        let mut b = f64::INFINITY;
        let mut others: Vec<usize> = labels.iter().copied().filter(|&l| l != labels[i]).collect();
        others.sort();
        others.dedup();
        for g in others {
            let members: Vec<usize> = (0..k).filter(|&j| labels[j] == g).collect();
            let m = members.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / members.len() as f64;
            b = b.min(m);
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / k as f64
}

pub fn cluster_quality(points: &Rows) -> f64 {
    if radii(points).iter().all(|&r| r < 1e-12) {
        return 0.0;
    }
    let upper = points.len().min(5);
    let mut best = f64::NEG_INFINITY;
    for g in 2..=upper {
        let (labels, _) = exhaustive_kmeans(points, g);
        best = best.max(silhouette(points, &labels));
    }
    1.0 - best
}

/// All eight features in canonical order.
pub fn features(points: &Rows) -> [f64; 8] {
    [
        spread(points),
        consistency(points),
        complexity(points),
        stability(points),
        coherence(points),
        diversity(points),
        outlier(points),
        cluster_quality(points),
    ]
}

/// Merge heights of naive agglomerative single linkage, ascending.
pub fn single_linkage_heights(points: &Rows) -> Vec<f64> {
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let mut heights = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 1);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        let d = dist(&points[i], &points[j]);
                        if d < best.0 {
                            best = (d, a, b);
                        }
                    }
                }
            }
        }
        let merged = clusters.remove(best.2);
        clusters[best.1].extend(merged);
        heights.push(best.0);
    }
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    heights
}

/// H1 persistence pairs from a dense boundary matrix over every vertex, edge
/// and triangle. Zero-length pairs are dropped.
pub fn h1_pairs(points: &Rows) -> Vec<(f64, f64)> {
    let k = points.len();
    let mut simplices: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in 0..k {
        simplices.push((0.0, vec![i]));
    }
    for i in 0..k {
        for j in i + 1..k {
            simplices.push((dist(&points[i], &points[j]), vec![i, j]));
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                let v = dist(&points[i], &points[j]).max(dist(&points[i], &points[l])).max(dist(&points[j], &points[l]));
                simplices.push((v, vec![i, j, l]));
            }
        }
    }
    simplices.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap().then(a.1.len().cmp(&b.1.len())).then(a.1.cmp(&b.1))
    });
    let n = simplices.len();
    let mut m = vec![vec![false; n]; n];
    for (col, (_, s)) in simplices.iter().enumerate() {
        if s.len() < 2 {
            continue;
        }
        for row in 0..n {
            let f = &simplices[row].1;
            if f.len() + 1 == s.len() && f.iter().all(|v| s.contains(v)) {
                m[row][col] = true;
            }
        }
    }
    let low = |m: &Vec<Vec<bool>>, col: usize| (0..n).rev().find(|&r| m[r][col]);
    for col in 0..n {
        loop {
            let Some(l) = low(&m, col) else { break };
            let Some(prev) = (0..col).find(|&c| low(&m, c) == Some(l)) else { break };
            for r in 0..n {
                m[r][col] ^= m[r][prev];
            }
        }
    }
    let mut pairs = Vec::new();
    for col in 0..n {
        if simplices[col].1.len() != 3 {
            continue;
        }
        if let Some(l) = low(&m, col) {
            let (birth, death) = (simplices[l].0, simplices[col].0);
            if death > birth {
                pairs.push((birth, death));
            }
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pairs
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Dense layers given as (weights[out][in], bias[out]); hidden layers use
/// `act`, the output passes through softplus and is shifted by one.
pub fn mlp_alpha(layers: &[(Vec<Vec<f64>>, Vec<f64>)], act: fn(f64) -> f64, input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for (idx, (w, b)) in layers.iter().enumerate() {
        let mut y = vec![0.0; b.len()];
        for o in 0..b.len() {
            let mut s = b[o];
            for i in 0..x.len() {
                s += w[o][i] * x[i];
            }
            y[o] = s;
        }
        if idx + 1 < layers.len() {
            for v in y.iter_mut() {
                *v = act(*v);
            }
        }
        x = y;
    }
    x.iter().map(|&z| (1.0 + z.exp()).ln() + 1.0).collect()
}

/// Expected calibration error by explicit bin membership tests.
pub fn ece(conf: &[f64], correct: &[bool], bins: usize) -> f64 {
    let n = conf.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        let idx: Vec<usize> = (0..conf.len())
            .filter(|&i| {
                let c = conf[i].clamp(0.01, 0.99);
                if b == 0 {
                    c >= lo && c <= hi
                } else {
                    c > lo && c <= hi
                }
            })
            .collect();
        if idx.is_empty() {
            continue;
        }
        let acc = idx.iter().filter(|&&i| correct[i]).count() as f64 / idx.len() as f64;
        let mc = idx.iter().map(|&i| conf[i].clamp(0.01, 0.99)).sum::<f64>() / idx.len() as f64;
        total += idx.len() as f64 / n * (acc - mc).abs();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts_are_stirling_numbers() {
        assert_eq!(set_partitions(4, 2).len(), 7);
        assert_eq!(set_partitions(5, 3).len(), 25);
        assert_eq!(set_partitions(8, 5).len(), 1050);
    }

    #[test]
    fn square_has_one_loop() {
        let sq = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let p = h1_pairs(&sq);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].0, 1.0);
        assert!((p[0].1 - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn collinear_fixture() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!((spread(&pts) - 0.471404520791).abs() < 1e-9);
        assert!((coherence(&pts) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(single_linkage_heights(&pts), vec![1.0, 1.0]);
    }
}
