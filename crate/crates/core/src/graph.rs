//! Finite connected graphs with the dense distance machinery every other
//! module leans on.
//!
//! * all-pairs distances as a cached dense `u16` table (row-parallel BFS);
//! * canonical geodesics: the BFS predecessor of `v` from source `s` is the
//!   *smallest-id* neighbor one layer closer to `s`, so the geodesic for an
//!   ordered pair is unique, deterministic, and independent of traversal
//!   order or thread count;
//! * geodesic intervals (union of all geodesics between two vertices);
//! * Hausdorff distances, neighborhoods, multi-source distance rows;
//! * an optional `boundary` vertex set marking where a finite model was
//!   truncated, with `core(margin)` giving the vertices far enough from it.

use std::collections::VecDeque;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Hard cap on vertex count: ids and distances must fit `u16`, and the
/// dense table must stay addressable.
pub const MAX_VERTICES: usize = 30_000;

const UNREACHED: u16 = u16::MAX;

#[derive(Debug)]
pub struct MetricGraph {
    n: usize,
    adj: Vec<Vec<u16>>,
    /// Deduplicated edges, each stored once with u < v, sorted.
    edges: Vec<(u16, u16)>,
    /// Sorted vertex ids marking the truncation boundary (may be empty).
    boundary: Vec<usize>,
    dist: OnceLock<Vec<u16>>,
    pred: OnceLock<Vec<u16>>,
}

impl Clone for MetricGraph {
    fn clone(&self) -> Self {
        let g = Self {
            n: self.n,
            adj: self.adj.clone(),
            edges: self.edges.clone(),
            boundary: self.boundary.clone(),
            dist: OnceLock::new(),
            pred: OnceLock::new(),
        };
        // Carry over caches already paid for.
        if let Some(d) = self.dist.get() {
            let _ = g.dist.set(d.clone());
        }
        if let Some(p) = self.pred.get() {
            let _ = g.pred.set(p.clone());
        }
        g
    }
}

impl MetricGraph {
    /// Build a graph from an edge list. Requires: at least one vertex, ids in
    /// range, no loops, no duplicate edges, and connectivity.
    pub fn new(n: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySet { what: "graph vertex set" });
        }
        if n > MAX_VERTICES {
            return Err(Error::TooLarge { n, cap: MAX_VERTICES });
        }
        let mut edges: Vec<(u16, u16)> = Vec::with_capacity(edge_list.len());
        for &(a, b) in edge_list {
            if a >= n {
                return Err(Error::VertexOutOfRange { id: a, n });
            }
            if b >= n {
                return Err(Error::VertexOutOfRange { id: b, n });
            }
            if a == b {
                return Err(Error::InvalidEdge { u: a, v: b, reason: "loop edge" });
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            edges.push((u as u16, v as u16));
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            let w = edges.windows(2).find(|w| w[0] == w[1]).unwrap();
            return Err(Error::InvalidEdge {
                u: w[0].0 as usize,
                v: w[0].1 as usize,
                reason: "duplicate edge",
            });
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let g = Self { n, adj, edges, boundary: Vec::new(), dist: OnceLock::new(), pred: OnceLock::new() };
        // Connectivity: every distance query must have a path.
        let row = g.bfs_row(0);
        if let Some(v) = row.iter().position(|&d| d == UNREACHED) {
            return Err(Error::Disconnected { u: 0, v });
        }
        Ok(g)
    }

    /// Attach a truncation-boundary marking (sorted, deduplicated).
    pub fn with_boundary(mut self, mut boundary: Vec<usize>) -> Result<Self> {
        boundary.sort_unstable();
        boundary.dedup();
        if let Some(&id) = boundary.iter().find(|&&id| id >= self.n) {
            return Err(Error::VertexOutOfRange { id, n: self.n });
        }
        self.boundary = boundary;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, v: usize) -> &[u16] {
        &self.adj[v]
    }

    pub fn edges(&self) -> &[(u16, u16)] {
        &self.edges
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Vertices at distance >= `margin` from the boundary (everything when no
    /// boundary is marked). This is the "core" every universally quantified
    /// finite-scale check ranges over.
    pub fn core(&self, margin: u32) -> Vec<usize> {
        if self.boundary.is_empty() || margin == 0 {
            return (0..self.n).collect();
        }
        let row = self.dist_to_set(&self.boundary);
        (0..self.n).filter(|&v| u32::from(row[v]) >= margin).collect()
    }

    fn bfs_row(&self, src: usize) -> Vec<u16> {
        let mut row = vec![UNREACHED; self.n];
        let mut queue = VecDeque::new();
        row[src] = 0;
        queue.push_back(src as u16);
        while let Some(u) = queue.pop_front() {
            let du = row[u as usize];
            for &w in &self.adj[u as usize] {
                if row[w as usize] == UNREACHED {
                    row[w as usize] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        row
    }

    /// Dense all-pairs distance table, row-major; computed once on demand.
    pub fn dist_table(&self) -> &[u16] {
        self.dist.get_or_init(|| {
            let mut table = vec![0u16; self.n * self.n];
            table
                .par_chunks_mut(self.n)
                .enumerate()
                .for_each(|(src, row)| row.copy_from_slice(&self.bfs_row(src)));
            table
        })
    }

    /// Graph distance between two vertices.
    pub fn d(&self, u: usize, v: usize) -> u32 {
        u32::from(self.dist_table()[u * self.n + v])
    }

    /// One row of the distance table.
    pub fn dist_row(&self, src: usize) -> &[u16] {
        let t = self.dist_table();
        &t[src * self.n..(src + 1) * self.n]
    }

    /// Canonical BFS predecessor table: `pred[s*n + v]` is the smallest-id
    /// neighbor of `v` one layer closer to `s` (and `s` for `v == s`).
    pub(crate) fn pred_table(&self) -> &[u16] {
        self.pred.get_or_init(|| {
            let dist = self.dist_table();
            let mut table = vec![0u16; self.n * self.n];
            table.par_chunks_mut(self.n).enumerate().for_each(|(src, row)| {
                let drow = &dist[src * self.n..(src + 1) * self.n];
                for v in 0..self.n {
                    if v == src {
                        row[v] = src as u16;
                        continue;
                    }
                    let dv = drow[v];
                    // Adjacency lists are sorted, so the first hit is the
                    // smallest-id predecessor.
                    let p = self.adj[v]
                        .iter()
                        .copied()
                        .find(|&u| drow[u as usize] + 1 == dv)
                        .expect("connected graph always has a predecessor");
                    row[v] = p;
                }
            });
            table
        })
    }

    /// Vertices of the canonical geodesic from `x` to `y`, inclusive.
    ///
    /// Ties are broken by the smallest-id BFS predecessor from source `x`,
    /// so the result is fixed once and for all per ordered pair.
    pub fn geodesic(&self, x: usize, y: usize) -> Vec<usize> {
        assert!(x < self.n && y < self.n, "vertex out of range");
        let pred = self.pred_table();
        let mut path = vec![y];
        let mut v = y;
        while v != x {
            v = pred[x * self.n + v] as usize;
            path.push(v);
        }
        path.reverse();
        path
    }

    /// The geodesic interval: every vertex lying on *some* geodesic from `x`
    /// to `y`, ascending.
    pub fn geodesic_interval(&self, x: usize, y: usize) -> Vec<usize> {
        let dx = self.dist_row(x);
        let dy = self.dist_row(y);
        let dxy = dx[y];
        (0..self.n).filter(|&v| dx[v] + dy[v] == dxy).collect()
    }

    /// Distance from every vertex to a nonempty set (multi-source BFS).
    pub fn dist_to_set(&self, set: &[usize]) -> Vec<u16> {
        assert!(!set.is_empty(), "dist_to_set needs a nonempty set");
        let mut row = vec![UNREACHED; self.n];
        let mut queue = VecDeque::new();
        for &s in set {
            if row[s] != 0 {
                row[s] = 0;
                queue.push_back(s as u16);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = row[u as usize];
            for &w in &self.adj[u as usize] {
                if row[w as usize] == UNREACHED {
                    row[w as usize] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        row
    }

    /// Closed `r`-neighborhood of a set, ascending.
    pub fn neighborhood(&self, set: &[usize], r: u32) -> Vec<usize> {
        let row = self.dist_to_set(set);
        (0..self.n).filter(|&v| u32::from(row[v]) <= r).collect()
    }

    /// Symmetric Hausdorff distance between two nonempty vertex sets.
    pub fn hausdorff(&self, a: &[usize], b: &[usize]) -> Result<u32> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySet { what: "hausdorff argument" });
        }
        let ra = self.dist_to_set(a);
        let rb = self.dist_to_set(b);
        let ab = b.iter().map(|&v| ra[v]).max().unwrap();
        let ba = a.iter().map(|&v| rb[v]).max().unwrap();
        Ok(u32::from(ab.max(ba)))
    }

    /// Induced subgraph on `verts` (must be connected). Returns the subgraph
    /// and the map from new ids to old ids (`verts` sorted ascending).
    pub fn induced(&self, verts: &[usize]) -> Result<(MetricGraph, Vec<usize>)> {
        if verts.is_empty() {
            return Err(Error::EmptySet { what: "induced subgraph" });
        }
        let mut ids: Vec<usize> = verts.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if *ids.last().unwrap() >= self.n {
            return Err(Error::VertexOutOfRange { id: *ids.last().unwrap(), n: self.n });
        }
        let mut back = vec![usize::MAX; self.n];
        for (new, &old) in ids.iter().enumerate() {
            back[old] = new;
        }
        let mut edges = Vec::new();
        for &old in &ids {
            for &w in &self.adj[old] {
                let w = w as usize;
                if old < w && back[w] != usize::MAX {
                    edges.push((back[old], back[w]));
                }
            }
        }
        let sub = MetricGraph::new(ids.len(), &edges)?;
        let boundary: Vec<usize> =
            self.boundary.iter().filter_map(|&b| (back[b] != usize::MAX).then(|| back[b])).collect();
        Ok((sub.with_boundary(boundary)?, ids))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;

    pub(crate) fn path_graph(n: usize) -> MetricGraph {
        MetricGraph::new(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    pub(crate) fn cycle_graph(n: usize) -> MetricGraph {
        let mut e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        e.push((n - 1, 0));
        MetricGraph::new(n, &e).unwrap()
    }

    /// Independent oracle: enumerate every geodesic from x to y by DFS over
    /// the BFS DAG and return the union of their vertices. Only for small
    /// graphs; used to pin `geodesic_interval`.
    fn interval_oracle(g: &MetricGraph, x: usize, y: usize) -> Vec<usize> {
        let dx = g.dist_row(x).to_vec();
        let mut on_some = vec![false; g.n()];
        let mut stack = vec![y];
        // Walk the DAG of "one layer closer" predecessors from y toward x;
        // every vertex reached this way lies on some geodesic.
        let mut seen = vec![false; g.n()];
        while let Some(v) = stack.pop() {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            on_some[v] = true;
            if v == x {
                continue;
            }
            for &u in g.neighbors(v) {
                if dx[u as usize] + 1 == dx[v] {
                    stack.push(u as usize);
                }
            }
        }
        (0..g.n()).filter(|&v| on_some[v]).collect()
    }

    #[test]
    fn path_distances_and_geodesics() {
        let g = path_graph(10);
        assert_eq!(g.d(0, 9), 9);
        assert_eq!(g.d(3, 3), 0);
        assert_eq!(g.geodesic(2, 5), vec![2, 3, 4, 5]);
        assert_eq!(g.geodesic(5, 2), vec![5, 4, 3, 2]);
    }

    #[test]
    fn four_cycle_interval_is_whole_graph_but_geodesic_is_canonical() {
        let g = cycle_graph(4);
        // Both length-2 routes between antipodes are geodesics.
        assert_eq!(g.geodesic_interval(0, 2), vec![0, 1, 2, 3]);
        // The canonical geodesic takes the smallest-id predecessor: 0-1-2.
        assert_eq!(g.geodesic(0, 2), vec![0, 1, 2]);
    }

    #[test]
    fn six_cycle_distances() {
        let g = cycle_graph(6);
        assert_eq!(g.d(0, 3), 3);
        assert_eq!(g.d(1, 5), 2);
        assert_eq!(g.geodesic(0, 3).len(), 4);
    }

    #[test]
    fn interval_matches_all_geodesics_oracle_on_random_graphs() {
        let mut rng = XorShift64Star::new(0xC0FFEE);
        for trial in 0..40 {
            let n = 5 + rng.below(55);
            // Random connected graph: spanning tree plus extra edges.
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push((v, rng.below(v)));
            }
            for _ in 0..n / 2 {
                let a = rng.below(n);
                let b = rng.below(n);
                if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
                    edges.push((a, b));
                }
            }
            let g = MetricGraph::new(n, &edges).unwrap();
            for _ in 0..20 {
                let x = rng.below(n);
                let y = rng.below(n);
                assert_eq!(
                    g.geodesic_interval(x, y),
                    interval_oracle(&g, x, y),
                    "trial {trial}: interval mismatch for ({x}, {y})"
                );
            }
        }
    }

    #[test]
    fn geodesic_realizes_distance_and_is_a_path() {
        let mut rng = XorShift64Star::new(7);
        for _ in 0..20 {
            let n = 4 + rng.below(60);
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push((v, rng.below(v)));
            }
            let g = MetricGraph::new(n, &edges).unwrap();
            let x = rng.below(n);
            let y = rng.below(n);
            let p = g.geodesic(x, y);
            assert_eq!(p.len() as u32, g.d(x, y) + 1);
            for w in p.windows(2) {
                assert_eq!(g.d(w[0], w[1]), 1);
            }
        }
    }

    #[test]
    fn hausdorff_on_six_cycle() {
        let g = cycle_graph(6);
        assert_eq!(g.hausdorff(&[0], &[3]).unwrap(), 3);
        assert_eq!(g.hausdorff(&[0, 1, 2, 3, 4, 5], &[0]).unwrap(), 3);
        assert_eq!(g.hausdorff(&[0, 3], &[0, 3]).unwrap(), 0);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let err = MetricGraph::new(4, &[(0, 1), (2, 3)]).unwrap_err();
        match err {
            Error::Disconnected { .. } => {}
            other => panic!("expected Disconnected, got {other}"),
        }
    }

    #[test]
    fn loops_and_duplicates_are_rejected() {
        assert!(MetricGraph::new(3, &[(0, 0), (0, 1), (1, 2)]).is_err());
        assert!(MetricGraph::new(3, &[(0, 1), (1, 0), (1, 2)]).is_err());
    }

    #[test]
    fn core_respects_boundary_margin() {
        let g = path_graph(10).with_boundary(vec![0, 9]).unwrap();
        assert_eq!(g.core(0), (0..10).collect::<Vec<_>>());
        assert_eq!(g.core(2), vec![2, 3, 4, 5, 6, 7]);
        assert_eq!(g.core(5), Vec::<usize>::new());
        // No boundary marked: everything is core.
        let h = path_graph(4);
        assert_eq!(h.core(100), vec![0, 1, 2, 3]);
    }

    #[test]
    fn induced_subgraph_remaps_and_checks_connectivity() {
        let g = cycle_graph(6);
        let (sub, ids) = g.induced(&[1, 2, 3]).unwrap();
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(sub.n(), 3);
        assert_eq!(sub.d(0, 2), 2);
        assert!(g.induced(&[0, 3]).is_err());
    }
}
