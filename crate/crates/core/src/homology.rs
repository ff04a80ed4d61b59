//! Vietoris-Rips persistence for a reasoning point cloud.
//!
//! H0 comes from Kruskal's algorithm over the pairwise distance graph: the
//! finite deaths are the minimum-spanning-tree edge weights. H1 comes from
//! reducing the Z₂ boundary matrix of the Rips complex truncated at
//! 2-simplices. These barcodes are diagnostics and do not feed the risk score.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::DistanceSummary;

/// Default largest cloud accepted by [`h1_barcode`].
pub const DEFAULT_H1_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bar {
    pub birth: f64,
    /// `f64::INFINITY` for an essential class.
    pub death: f64,
}

impl Bar {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_finite(&self) -> bool {
        self.death.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Barcode {
    pub dimension: u8,
    pub bars: Vec<Bar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PersistenceStats {
    pub max_h0_death: f64,
    pub sum_h0_deaths: f64,
    pub h1_count: usize,
    pub h1_total_persistence: f64,
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

fn sorted_edges(summary: &DistanceSummary) -> Vec<(f64, usize, usize)> {
    let k = summary.k;
    let mut edges = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            edges.push((summary.distance(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    edges
}

/// Connected-component barcode: `k − 1` finite bars at the MST edge weights
/// (ascending) followed by one infinite bar. Coincident points give bars
/// that die at 0; they are kept so the barcode always has `k` bars.
pub fn h0_barcode(summary: &DistanceSummary) -> Barcode {
    let k = summary.k;
    let mut uf = UnionFind::new(k);
    let mut bars = Vec::with_capacity(k);
    for (w, i, j) in sorted_edges(summary) {
        if uf.union(i, j) {
            bars.push(Bar { birth: 0.0, death: w });
            if bars.len() == k - 1 {
                break;
            }
        }
    }
    bars.push(Bar { birth: 0.0, death: f64::INFINITY });
    Barcode { dimension: 0, bars }
}

#[derive(Debug, Clone)]
struct Simplex {
    value: f64,
    vertices: Vec<usize>,
}

/// Rips filtration up to triangles, ordered by (value, dimension, vertices).
fn rips_filtration(summary: &DistanceSummary) -> Vec<Simplex> {
    let k = summary.k;
    let mut simplices = Vec::new();
    for v in 0..k {
        simplices.push(Simplex { value: 0.0, vertices: vec![v] });
    }
    for i in 0..k {
        for j in i + 1..k {
            simplices.push(Simplex { value: summary.distance(i, j), vertices: vec![i, j] });
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                let value = summary
                    .distance(i, j)
                    .max(summary.distance(i, l))
                    .max(summary.distance(j, l));
                simplices.push(Simplex { value, vertices: vec![i, j, l] });
            }
        }
    }
    simplices.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.vertices.len().cmp(&b.vertices.len()))
            .then_with(|| a.vertices.cmp(&b.vertices))
    });
    simplices
}

/// Symmetric difference of two sorted index lists.
fn add_columns(target: &mut Vec<usize>, source: &[usize]) {
    let mut out = Vec::with_capacity(target.len() + source.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < source.len() {
        match target[i].cmp(&source[j]) {
            core::cmp::Ordering::Less => {
                out.push(target[i]);
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                out.push(source[j]);
                j += 1;
            }
            core::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&target[i..]);
    out.extend_from_slice(&source[j..]);
    *target = out;
}

/// Loop barcode from the standard column reduction. Zero-length pairs are
/// dropped.
pub fn h1_barcode(summary: &DistanceSummary, cap: usize) -> Result<Barcode> {
    if summary.k > cap {
        return Err(Error::CloudTooLarge { k: summary.k, cap });
    }
    let simplices = rips_filtration(summary);
    let position = |vertices: &[usize]| -> usize {
        simplices
            .iter()
            .position(|s| s.vertices == vertices)
            .expect("face is part of the filtration")
    };
    let mut columns: Vec<Vec<usize>> = simplices
        .iter()
        .map(|s| {
            if s.vertices.len() == 1 {
                return Vec::new();
            }
            let mut faces: Vec<usize> = (0..s.vertices.len())
                .map(|skip| {
                    let face: Vec<usize> = s
                        .vertices
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, v)| *v)
                        .collect();
                    position(&face)
                })
                .collect();
            faces.sort_unstable();
            faces
        })
        .collect();

    // pivot_owner[row] = column whose reduced low is `row`
    let mut pivot_owner: Vec<Option<usize>> = vec![None; simplices.len()];
    let mut bars = Vec::new();
    for j in 0..columns.len() {
        while let Some(&low) = columns[j].last() {
            match pivot_owner[low] {
                Some(owner) => {
                    let source = columns[owner].clone();
                    add_columns(&mut columns[j], &source);
                }
                None => break,
            }
        }
        if let Some(&low) = columns[j].last() {
            pivot_owner[low] = Some(j);
            if simplices[j].vertices.len() == 3 {
                let birth = simplices[low].value;
                let death = simplices[j].value;
                if death > birth {
                    bars.push(Bar { birth, death });
                }
            }
        }
    }
    bars.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
    Ok(Barcode { dimension: 1, bars })
}

pub fn persistence_stats(h0: &Barcode, h1: &Barcode) -> PersistenceStats {
    let finite_h0 = h0.bars.iter().filter(|b| b.is_finite());
    PersistenceStats {
        max_h0_death: finite_h0.clone().map(|b| b.death).fold(0.0, f64::max),
        sum_h0_deaths: finite_h0.map(|b| b.death).sum(),
        h1_count: h1.bars.len(),
        h1_total_persistence: h1.bars.iter().map(Bar::persistence).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance_summary, PointCloud};

    fn summary<R: AsRef<[f64]>>(rows: &[R]) -> DistanceSummary {
        distance_summary(&PointCloud::from_rows(rows).unwrap())
    }

    fn finite_deaths(b: &Barcode) -> Vec<f64> {
        b.bars.iter().filter(|b| b.is_finite()).map(|b| b.death).collect()
    }

    #[test]
    fn h0_fixtures() {
        let collinear = summary(&[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        let b = h0_barcode(&collinear);
        assert_eq!(b.bars.len(), 3);
        assert_eq!(finite_deaths(&b), vec![1.0, 1.0]);
        assert_eq!(b.bars.iter().filter(|b| !b.is_finite()).count(), 1);
        assert!(b.bars.iter().all(|b| b.birth == 0.0));

        let same = summary(&[&[1.0]; 4]);
        assert_eq!(finite_deaths(&h0_barcode(&same)), vec![0.0; 3]);

        let pairs = summary(&[&[0.0], &[0.1], &[10.1], &[10.2]]);
        let d = finite_deaths(&h0_barcode(&pairs));
        assert!((d[0] - 0.1).abs() < 1e-12 && (d[1] - 0.1).abs() < 1e-12);
        assert!((d[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn h1_square_has_one_loop() {
        let sq = summary(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let b = h1_barcode(&sq, DEFAULT_H1_CAP).unwrap();
        assert_eq!(b.dimension, 1);
        assert_eq!(b.bars.len(), 1);
        assert_eq!(b.bars[0].birth, 1.0);
        assert!((b.bars[0].death - libm::sqrt(2.0)).abs() < 1e-12);
    }

    #[test]
    fn h1_small_and_collinear_are_empty() {
        let tri = summary(&[&[0.0, 0.0], &[1.0, 0.0], &[0.3, 0.8]]);
        assert!(h1_barcode(&tri, DEFAULT_H1_CAP).unwrap().bars.is_empty());
        let line = summary(&[&[0.0], &[1.0], &[2.0], &[3.0], &[4.0]]);
        assert!(h1_barcode(&line, DEFAULT_H1_CAP).unwrap().bars.is_empty());
    }

    #[test]
    fn h1_respects_cap() {
        let rows: Vec<[f64; 1]> = (0..5).map(|i| [i as f64]).collect();
        let s = distance_summary(&PointCloud::from_rows(&rows).unwrap());
        assert_eq!(h1_barcode(&s, 4), Err(Error::CloudTooLarge { k: 5, cap: 4 }));
    }

    #[test]
    fn stats_fixtures() {
        let collinear = summary(&[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        let st = persistence_stats(&h0_barcode(&collinear), &h1_barcode(&collinear, 16).unwrap());
        assert_eq!(st, PersistenceStats { max_h0_death: 1.0, sum_h0_deaths: 2.0, h1_count: 0, h1_total_persistence: 0.0 });

        let same = summary(&[&[2.0, 2.0]; 3]);
        let st = persistence_stats(&h0_barcode(&same), &h1_barcode(&same, 16).unwrap());
        assert_eq!(st, PersistenceStats::default());

        let sq = summary(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let st = persistence_stats(&h0_barcode(&sq), &h1_barcode(&sq, 16).unwrap());
        assert_eq!(st.h1_count, 1);
        assert!((st.h1_total_persistence - (libm::sqrt(2.0) - 1.0)).abs() < 1e-12);
    }
}
