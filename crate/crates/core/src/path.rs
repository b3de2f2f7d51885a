//! Combinatorial paths decomposed into pieces.
//!
//! A `VPath` is a vertex sequence with adjacency in a designated host (the
//! base graph or its cone-off), partitioned into contiguous pieces:
//! ordinary base-geodesic connectors, single coned edges (labeled by the
//! lowest family index that spans them), and member pieces — base geodesics
//! that replaced a cone component during de-electrification, remembering
//! which member they run through.
//!
//! The piece partition is maintained by construction; `assert_pieces`
//! rechecks the tiling and the geodesy of non-cone pieces against a base
//! graph, which the algorithm code calls after every surgery.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::MetricGraph;

/// Which metric the path's adjacency lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Host {
    Base,
    Coned,
}

/// Why a stretch of the path exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PieceKind {
    /// Base-geodesic connector (a `u_i` segment).
    Geodesic,
    /// A single coned edge; payload is the member the edge is attributed to
    /// (the lowest index among the members that justify it in context — the
    /// global family for top-level paths, the inner family during partial
    /// expansion).
    Cone(usize),
    /// An ℋ-piece: base geodesic standing in for a cone component of the
    /// named member.
    Member(usize),
    /// An ℋ-piece from embedded or partial de-electrification: runs inside
    /// the named member's induced subgraph, so it need not be a geodesic of
    /// the ambient base graph.
    Embedded(usize),
}

/// A maximal stretch of the path with one explanation. `start..=end` are
/// vertex indices into the owning path; pieces tile the index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub start: usize,
    pub end: usize,
    pub kind: PieceKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct VPath {
    pub vertices: Vec<usize>,
    pub host: Host,
    pub pieces: Vec<Piece>,
}

impl VPath {
    /// Single-vertex path.
    pub fn point(v: usize, host: Host) -> Self {
        VPath { vertices: vec![v], host, pieces: Vec::new() }
    }

    /// The canonical geodesic between two vertices as a one-piece base path.
    pub fn geodesic(g: &MetricGraph, x: usize, y: usize) -> Self {
        let vertices = g.geodesic(x, y);
        let pieces = if vertices.len() > 1 {
            vec![Piece { start: 0, end: vertices.len() - 1, kind: PieceKind::Geodesic }]
        } else {
            Vec::new()
        };
        VPath { vertices, host: Host::Base, pieces }
    }

    /// Edge count.
    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn first(&self) -> usize {
        self.vertices[0]
    }

    pub fn last(&self) -> usize {
        *self.vertices.last().unwrap()
    }

    /// Indices (into the edge sequence) of traversed cone edges with labels.
    pub fn cone_labels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in &self.pieces {
            if let PieceKind::Cone(h) = p.kind {
                for e in p.start..p.end {
                    out.push((e, h));
                }
            }
        }
        out
    }

    /// ℋ-pieces in path order: (piece index, member label). Covers both
    /// canonical and embedded/partial expansions.
    pub fn member_pieces(&self) -> Vec<(usize, usize)> {
        self.pieces
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match p.kind {
                PieceKind::Member(h) | PieceKind::Embedded(h) => Some((i, h)),
                _ => None,
            })
            .collect()
    }

    /// Check the structural invariants: pieces tile the vertex range, and
    /// every non-cone piece is a geodesic of `base` between its endpoints
    /// (adjacency of consecutive vertices included). Cone pieces are checked
    /// for length only; the coned graph validates their edges.
    pub fn assert_pieces(&self, base: &MetricGraph) -> Result<()> {
        let n = self.vertices.len();
        if n == 0 {
            return Err(Error::EmptySet { what: "path vertex sequence" });
        }
        if n == 1 {
            if !self.pieces.is_empty() {
                return Err(Error::InvalidArgument("trivial path with pieces".into()));
            }
            return Ok(());
        }
        let mut cursor = 0;
        for p in &self.pieces {
            if p.start != cursor || p.end <= p.start || p.end >= n {
                return Err(Error::InvalidArgument(format!(
                    "piece [{}..{}] breaks the tiling at cursor {cursor}",
                    p.start, p.end
                )));
            }
            cursor = p.end;
            match p.kind {
                PieceKind::Cone(_) => {
                    if p.end - p.start != 1 {
                        return Err(Error::InvalidArgument(
                            "cone piece must be a single edge".into(),
                        ));
                    }
                }
                PieceKind::Geodesic | PieceKind::Member(_) | PieceKind::Embedded(_) => {
                    let (a, b) = (self.vertices[p.start], self.vertices[p.end]);
                    let claimed = (p.end - p.start) as u32;
                    let must_be_geodesic = !matches!(p.kind, PieceKind::Embedded(_));
                    if must_be_geodesic && base.d(a, b) != claimed {
                        return Err(Error::InvalidArgument(format!(
                            "piece [{}..{}] has length {claimed} but endpoint distance {}",
                            p.start,
                            p.end,
                            base.d(a, b)
                        )));
                    }
                    for i in p.start..p.end {
                        let (u, v) = (self.vertices[i], self.vertices[i + 1]);
                        if !base.neighbors(u).contains(&(v as u16)) {
                            return Err(Error::InvalidEdge {
                                u,
                                v,
                                reason: "piece traverses a non-edge of the base graph",
                            });
                        }
                    }
                }
            }
        }
        if cursor != n - 1 {
            return Err(Error::InvalidArgument(format!(
                "pieces end at index {cursor}, path ends at {}",
                n - 1
            )));
        }
        Ok(())
    }

    /// Replace the stretch between vertex indices `i ≤ j` by `mid`, which
    /// must start at `vertices[i]` and end at `vertices[j]`. Pieces are
    /// clipped at the cut points; a clipped geodesic or member piece stays
    /// valid because subpaths of base geodesics are base geodesics, and cone
    /// pieces can never be cut (both of their indices are piece boundaries).
    pub fn replace_subpath(&self, i: usize, j: usize, mid: &VPath) -> Result<VPath> {
        let n = self.vertices.len();
        if i > j || j >= n {
            return Err(Error::InvalidArgument(format!(
                "replace range [{i}, {j}] out of order or out of bounds (path has {n} vertices)"
            )));
        }
        if mid.first() != self.vertices[i] || mid.last() != self.vertices[j] {
            return Err(Error::InvalidArgument(format!(
                "replacement runs {}..{} but the cut points are {}..{}",
                mid.first(),
                mid.last(),
                self.vertices[i],
                self.vertices[j]
            )));
        }
        let mut vertices = Vec::with_capacity(i + mid.vertices.len() + (n - 1 - j));
        vertices.extend_from_slice(&self.vertices[..=i]);
        vertices.extend_from_slice(&mid.vertices[1..]);
        vertices.extend_from_slice(&self.vertices[j + 1..]);
        let offset_right = i + mid.len();
        let mut pieces = Vec::new();
        for p in &self.pieces {
            if p.end <= i {
                pieces.push(*p);
            } else if p.start < i {
                pieces.push(Piece { start: p.start, end: i, kind: p.kind });
            }
        }
        for p in &mid.pieces {
            pieces.push(Piece { start: p.start + i, end: p.end + i, kind: p.kind });
        }
        for p in &self.pieces {
            if p.start >= j {
                pieces.push(Piece {
                    start: p.start - j + offset_right,
                    end: p.end - j + offset_right,
                    kind: p.kind,
                });
            } else if p.end > j {
                pieces.push(Piece { start: offset_right, end: p.end - j + offset_right, kind: p.kind });
            }
        }
        Ok(VPath { vertices, host: self.host, pieces })
    }
}

/// Incremental builder that merges adjacent pieces of identical kind and
/// keeps the tiling invariant true by construction.
#[derive(Debug)]
pub struct PathBuilder {
    vertices: Vec<usize>,
    pieces: Vec<Piece>,
    host: Host,
}

impl PathBuilder {
    pub fn start(v: usize, host: Host) -> Self {
        PathBuilder { vertices: vec![v], pieces: Vec::new(), host }
    }

    pub fn current(&self) -> usize {
        *self.vertices.last().unwrap()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Append the tail of `verts` (must begin at the current endpoint) as a
    /// piece of the given kind. Consecutive `Geodesic` pieces are *not*
    /// merged: a connector is a geodesic between its own endpoints only.
    pub fn push_segment(&mut self, verts: &[usize], kind: PieceKind) {
        assert_eq!(verts[0], self.current(), "segment must continue the path");
        if verts.len() == 1 {
            return;
        }
        let start = self.vertices.len() - 1;
        self.vertices.extend_from_slice(&verts[1..]);
        self.pieces.push(Piece { start, end: self.vertices.len() - 1, kind });
    }

    pub fn finish(self) -> VPath {
        VPath { vertices: self.vertices, host: self.host, pieces: self.pieces }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> MetricGraph {
        MetricGraph::new(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn geodesic_path_has_single_piece() {
        let g = path_graph(6);
        let p = VPath::geodesic(&g, 1, 5);
        assert_eq!(p.vertices, vec![1, 2, 3, 4, 5]);
        assert_eq!(p.len(), 4);
        assert_eq!(p.pieces.len(), 1);
        p.assert_pieces(&g).unwrap();
    }

    #[test]
    fn point_path_is_trivial() {
        let g = path_graph(3);
        let p = VPath::point(2, Host::Base);
        assert_eq!(p.len(), 0);
        assert!(p.is_empty());
        p.assert_pieces(&g).unwrap();
    }

    #[test]
    fn builder_tiles_pieces() {
        let g = path_graph(8);
        let mut b = PathBuilder::start(0, Host::Base);
        b.push_segment(&[0, 1, 2], PieceKind::Geodesic);
        b.push_segment(&[2, 3, 4, 5], PieceKind::Member(0));
        b.push_segment(&[5, 6], PieceKind::Geodesic);
        let p = b.finish();
        assert_eq!(p.vertices, vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(p.pieces.len(), 3);
        p.assert_pieces(&g).unwrap();
        assert_eq!(p.member_pieces(), vec![(1, 0)]);
    }

    #[test]
    fn non_geodesic_piece_is_rejected() {
        let g = path_graph(8);
        let p = VPath {
            vertices: vec![0, 1, 2, 1],
            host: Host::Base,
            pieces: vec![Piece { start: 0, end: 3, kind: PieceKind::Geodesic }],
        };
        assert!(p.assert_pieces(&g).is_err());
    }

    #[test]
    fn replace_subpath_clips_pieces() {
        let g = path_graph(10);
        let mut b = PathBuilder::start(0, Host::Base);
        b.push_segment(&[0, 1, 2, 3, 4], PieceKind::Geodesic);
        b.push_segment(&[4, 5, 6, 7, 8], PieceKind::Member(2));
        let p = b.finish();
        // Replace [2..6] by the straight geodesic (same vertices here, so
        // only the piece structure changes).
        let mid = VPath::geodesic(&g, 2, 6);
        let out = p.replace_subpath(2, 6, &mid).unwrap();
        assert_eq!(out.vertices, p.vertices);
        out.assert_pieces(&g).unwrap();
        assert_eq!(out.pieces.len(), 3);
        assert_eq!(out.pieces[0], Piece { start: 0, end: 2, kind: PieceKind::Geodesic });
        assert_eq!(out.pieces[1], Piece { start: 2, end: 6, kind: PieceKind::Geodesic });
        assert_eq!(out.pieces[2], Piece { start: 6, end: 8, kind: PieceKind::Member(2) });
        // Point replacement at a piece interior splits the piece in two.
        let out = p.replace_subpath(6, 6, &VPath::point(6, Host::Base)).unwrap();
        assert_eq!(out.vertices, p.vertices);
        out.assert_pieces(&g).unwrap();
        assert_eq!(out.pieces.len(), 3);
        // Replacement with a longer detour (out-and-back, two one-edge
        // geodesic pieces) shifts the tail.
        let det = {
            let mut b2 = PathBuilder::start(2, Host::Base);
            b2.push_segment(&[2, 3], PieceKind::Geodesic);
            b2.push_segment(&[3, 2], PieceKind::Geodesic);
            b2.push_segment(&[2, 3, 4, 5, 6], PieceKind::Geodesic);
            b2.finish()
        };
        let out = p.replace_subpath(2, 6, &det).unwrap();
        assert_eq!(out.vertices, vec![0, 1, 2, 3, 2, 3, 4, 5, 6, 7, 8]);
        out.assert_pieces(&g).unwrap();
        // Mismatched cut points are rejected.
        assert!(p.replace_subpath(2, 6, &VPath::geodesic(&g, 2, 5)).is_err());
    }

    #[test]
    fn broken_tiling_is_rejected() {
        let g = path_graph(8);
        let p = VPath {
            vertices: vec![0, 1, 2],
            host: Host::Base,
            pieces: vec![Piece { start: 0, end: 1, kind: PieceKind::Geodesic }],
        };
        assert!(p.assert_pieces(&g).is_err());
    }
}
