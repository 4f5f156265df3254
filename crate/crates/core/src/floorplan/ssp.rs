use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::skeleton::Skeleton;
use crate::error::{Result, SalcError};
use crate::geometry::Point2;

/// All-pairs shortest-path lengths over skeleton edges, in meters.
/// Unreachable pairs hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct SspMatrix {
    n: usize,
    d: Vec<f64>,
}

impl SspMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, v: usize, w: usize) -> f64 {
        self.d[v * self.n + w]
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.d[v * self.n..(v + 1) * self.n]
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then vertex index
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    dist
}

/// Single-source Dijkstra from every vertex.
pub fn shortest_path_matrix(sk: &Skeleton) -> SspMatrix {
    let adj = sk.adjacency();
    let n = sk.n_vertices();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let mut d: Vec<f64> = rows.into_iter().flatten().collect();
    // Dijkstra sums edges in path order; take the smaller direction so the
    // matrix is exactly symmetric.
    for v in 0..n {
        for w in v + 1..n {
            let m = d[v * n + w].min(d[w * n + v]);
            d[v * n + w] = m;
            d[w * n + v] = m;
        }
    }
    SspMatrix { n, d }
}

/// Reference points snapped to their nearest skeleton vertices, ready for
/// skeleton-path distance queries.
#[derive(Debug, Clone)]
pub struct SnappedPoints {
    positions: Vec<Point2>,
    vertex: Vec<usize>,
    snap: Vec<f64>,
}

impl SnappedPoints {
    pub fn new(points: &[Point2], sk: &Skeleton) -> Result<Self> {
        let mut vertex = Vec::with_capacity(points.len());
        let mut snap = Vec::with_capacity(points.len());
        for p in points {
            let (v, d) = sk
                .nearest_vertex(*p)
                .filter(|(_, d)| d.is_finite())
                .ok_or_else(|| SalcError::invalid("skeleton has no vertex to snap to"))?;
            vertex.push(v);
            snap.push(d);
        }
        Ok(Self {
            positions: points.to_vec(),
            vertex,
            snap,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn vertex(&self, i: usize) -> usize {
        self.vertex[i]
    }

    pub fn snap_distance(&self, i: usize) -> f64 {
        self.snap[i]
    }

    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    /// Skeleton-path distance between points `i` and `j`: snap distance at
    /// both ends plus the vertex-to-vertex path. Zero on the diagonal.
    pub fn distance(&self, i: usize, j: usize, d: &SspMatrix) -> Result<f64> {
        if i == j {
            return Ok(0.0);
        }
        let (vi, vj) = (self.vertex[i], self.vertex[j]);
        let path = d.get(vi, vj);
        if !path.is_finite() {
            return Err(SalcError::RoomsDisconnected { from: vi, to: vj });
        }
        Ok(self.snap[i] + path + self.snap[j])
    }

    /// Full point-to-point distance matrix, row-major.
    pub fn matrix(&self, d: &SspMatrix) -> Result<Vec<f64>> {
        let n = self.len();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.distance(i, j, d)?;
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        Ok(out)
    }
}

/// Skeleton-path distance between two points of `rps`.
pub fn ssp_distance(i: usize, j: usize, rps: &[Point2], sk: &Skeleton, d: &SspMatrix) -> Result<f64> {
    if i == j {
        return Ok(0.0);
    }
    let snapped = SnappedPoints::new(&[rps[i], rps[j]], sk)?;
    snapped.distance(0, 1, d)
}
