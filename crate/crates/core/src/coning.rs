//! Cone-offs and the path surgery that lives on them.
//!
//! * `cone_off`: add an edge between every non-adjacent pair inside each
//!   family member, remembering every member that justifies each edge;
//! * `canonical_hat_geodesic`: the deterministic geodesic of the coned
//!   graph, decomposed into base-geodesic runs and single cone edges;
//! * `de_electrify`: replace cone edges by base geodesics (total), by
//!   geodesics of the member's induced subgraph (embedded), or by canonical
//!   geodesics of the member's own cone-off, recursively (partial);
//! * `interrupt`: reroute a coned path through chosen points of its
//!   de-electrification, with the `L + |S|(2K+1)` length bound asserted;
//! * `coqc_gauge`: how far base geodesics between member points stray from
//!   the member, measured in the coned metric;
//! * `pigeonhole_check` / `nineteen_pieces_check` / `check_polygon`: the
//!   quantitative lemmas about coned geodesics, as violation sweeps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::path::{Host, PathBuilder, PieceKind, VPath};
use crate::report::Violation;
use crate::subspace::{project, SubspaceRef};

/// Cap on how many alternate geodesics `pigeonhole_check` enumerates per
/// pair, over and above the canonical one (which is always first).
pub const MAX_ALTERNATE_GEODESICS: usize = 64;

/// A base graph together with its cone-off: same vertex set, base edges
/// plus an edge for every non-adjacent pair inside a family member.
#[derive(Debug, Clone)]
pub struct ConedGraph {
    pub base: MetricGraph,
    pub family: Vec<SubspaceRef>,
    /// The coned graph; its lazy distance table is d̂.
    pub hat: MetricGraph,
    /// (u, v) with u < v  →  ascending family indices containing both.
    cone_labels: BTreeMap<(u16, u16), Vec<usize>>,
}

/// Build the cone-off. Members must be nonempty subsets of the vertex set;
/// they may overlap and may even be disconnected (only de-electrification
/// variants that walk inside a member require connectivity).
pub fn cone_off(base: MetricGraph, family: Vec<SubspaceRef>) -> Result<ConedGraph> {
    let n = base.n();
    for m in &family {
        if m.vertices.is_empty() {
            return Err(Error::EmptySet { what: "cone family member" });
        }
        if let Some(&v) = m.vertices.iter().find(|&&v| v >= n) {
            return Err(Error::VertexOutOfRange { id: v, n });
        }
    }
    let mut cone_labels: BTreeMap<(u16, u16), Vec<usize>> = BTreeMap::new();
    for (h, m) in family.iter().enumerate() {
        for (i, &u) in m.vertices.iter().enumerate() {
            for &v in &m.vertices[i + 1..] {
                if base.neighbors(u).contains(&(v as u16)) {
                    continue;
                }
                cone_labels.entry((u as u16, v as u16)).or_default().push(h);
            }
        }
    }
    let mut edges: Vec<(usize, usize)> =
        base.edges().iter().map(|&(a, b)| (a as usize, b as usize)).collect();
    edges.extend(cone_labels.keys().map(|&(a, b)| (a as usize, b as usize)));
    let hat = MetricGraph::new(n, &edges)?.with_boundary(base.boundary().to_vec())?;
    Ok(ConedGraph { base, family, hat, cone_labels })
}

impl ConedGraph {
    pub fn d_base(&self, u: usize, v: usize) -> u32 {
        self.base.d(u, v)
    }

    pub fn d_hat(&self, u: usize, v: usize) -> u32 {
        self.hat.d(u, v)
    }

    /// Family indices justifying the cone edge (u, v), if it is one.
    pub fn labels_of(&self, u: usize, v: usize) -> Option<&[usize]> {
        let key = if u < v { (u as u16, v as u16) } else { (v as u16, u as u16) };
        self.cone_labels.get(&key).map(|l| l.as_slice())
    }

    pub fn is_cone_edge(&self, u: usize, v: usize) -> bool {
        self.labels_of(u, v).is_some()
    }

    /// Deterministic label for piece attribution: the lowest family index.
    pub fn lowest_label(&self, u: usize, v: usize) -> Option<usize> {
        self.labels_of(u, v).map(|l| l[0])
    }

    /// All cone edges in ascending order with their labels.
    pub fn cone_edges(&self) -> impl Iterator<Item = (usize, usize, &[usize])> {
        self.cone_labels.iter().map(|(&(u, v), l)| (u as usize, v as usize, l.as_slice()))
    }

    /// The canonical geodesic of the coned graph, decomposed into
    /// base-geodesic runs and single cone edges. Every maximal run of base
    /// edges inside a coned geodesic is a base geodesic: the run is a base
    /// path realizing its own hat length, and d ≥ d̂ pointwise.
    pub fn canonical_hat_geodesic(&self, x: usize, y: usize) -> VPath {
        self.classify_hat_geodesic(self.hat.geodesic(x, y))
    }

    fn classify_hat_geodesic(&self, verts: Vec<usize>) -> VPath {
        let mut b = PathBuilder::start(verts[0], Host::Coned);
        let mut run = vec![verts[0]];
        for w in verts.windows(2) {
            let (u, v) = (w[0], w[1]);
            if let Some(h) = self.lowest_label(u, v) {
                b.push_segment(&run, PieceKind::Geodesic);
                b.push_segment(&[u, v], PieceKind::Cone(h));
                run = vec![v];
            } else {
                run.push(v);
            }
        }
        b.push_segment(&run, PieceKind::Geodesic);
        let p = b.finish();
        p.assert_pieces(&self.base).expect("hat-geodesic base runs are base geodesics");
        p
    }
}

/// Which connector replaces each cone edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeElectMode {
    /// Canonical geodesic of the base graph.
    Total,
    /// Geodesic of the member's induced subgraph.
    Embedded,
    /// Canonical geodesic of the member's own cone-off (coned along the
    /// members properly contained in it), expanded `level` times.
    Partial,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeElectSpec {
    pub mode: DeElectMode,
    /// Number of expansion rounds (partial mode only, ≥ 1).
    pub level: usize,
    /// Quasi-geodesic constant the partial connectors are allowed; the
    /// canonical expansion realizes genuine geodesics, so any c ≥ 1 holds.
    pub c: f64,
}

impl DeElectSpec {
    pub fn total() -> Self {
        DeElectSpec { mode: DeElectMode::Total, level: 0, c: 1.0 }
    }

    pub fn embedded() -> Self {
        DeElectSpec { mode: DeElectMode::Embedded, level: 0, c: 1.0 }
    }

    pub fn partial(level: usize, c: f64) -> Self {
        DeElectSpec { mode: DeElectMode::Partial, level, c }
    }

    fn validate(&self) -> Result<()> {
        if matches!(self.mode, DeElectMode::Partial) && self.level == 0 {
            return Err(Error::InvalidArgument("partial de-electrification needs level ≥ 1".into()));
        }
        if matches!(self.mode, DeElectMode::Partial) && self.c < 1.0 {
            return Err(Error::InvalidArgument("quasi-geodesic constant must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Where a de-electrified vertex came from: an original path vertex (by its
/// index in γ) or the expansion of the k-th cone edge of γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeElectProv {
    Gamma(usize),
    Expanded(usize),
}

/// A member's private cone-off, in local coordinates.
struct SubCone {
    cg: ConedGraph,
    global_of: Vec<usize>,
    local_of: BTreeMap<usize, usize>,
    /// Local family index → global family index.
    inner_globals: Vec<usize>,
}

fn ensure_subcone<'a>(
    memo: &'a mut BTreeMap<usize, SubCone>,
    cg: &ConedGraph,
    h: usize,
) -> Result<&'a SubCone> {
    if !memo.contains_key(&h) {
        let member = &cg.family[h];
        let (induced, global_of) = cg.base.induced(&member.vertices).map_err(|e| match e {
            Error::Disconnected { .. } => Error::SubspaceDisconnected { name: member.name.clone() },
            other => other,
        })?;
        let local_of: BTreeMap<usize, usize> =
            global_of.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let mut inner_fam = Vec::new();
        let mut inner_globals = Vec::new();
        for (j, mj) in cg.family.iter().enumerate() {
            if j != h && mj.vertices.len() < member.vertices.len() && mj.is_subset_of(member) {
                let local: Vec<usize> = mj.vertices.iter().map(|v| local_of[v]).collect();
                inner_fam.push(SubspaceRef::new(&induced, &mj.name, local)?);
                inner_globals.push(j);
            }
        }
        let sub = cone_off(induced, inner_fam)?;
        memo.insert(h, SubCone { cg: sub, global_of, local_of, inner_globals });
    }
    Ok(&memo[&h])
}

/// One classified stretch of a sub-cone-off geodesic, in global ids.
enum Stretch {
    Run(Vec<usize>),
    SubCone(usize, usize, usize),
}

fn expand_partial(
    cg: &ConedGraph,
    memo: &mut BTreeMap<usize, SubCone>,
    h: usize,
    u: usize,
    v: usize,
    level: usize,
    ordinal: usize,
    b: &mut PathBuilder,
    prov: &mut Vec<DeElectProv>,
) -> Result<()> {
    let stretches = {
        let sc = ensure_subcone(memo, cg, h)?;
        let verts = sc.cg.hat.geodesic(sc.local_of[&u], sc.local_of[&v]);
        let mut out = Vec::new();
        let mut run = vec![sc.global_of[verts[0]]];
        for w in verts.windows(2) {
            let (lu, lv) = (w[0], w[1]);
            if let Some(ll) = sc.cg.lowest_label(lu, lv) {
                out.push(Stretch::Run(std::mem::replace(&mut run, vec![sc.global_of[lv]])));
                out.push(Stretch::SubCone(sc.global_of[lu], sc.global_of[lv], sc.inner_globals[ll]));
            } else {
                run.push(sc.global_of[lv]);
            }
        }
        out.push(Stretch::Run(run));
        out
    };
    for s in stretches {
        match s {
            Stretch::Run(verts) => {
                let added = verts.len() - 1;
                b.push_segment(&verts, PieceKind::Embedded(h));
                prov.extend(std::iter::repeat(DeElectProv::Expanded(ordinal)).take(added));
            }
            Stretch::SubCone(a, c, g) => {
                if level == 1 {
                    b.push_segment(&[a, c], PieceKind::Cone(g));
                    prov.push(DeElectProv::Expanded(ordinal));
                } else {
                    expand_partial(cg, memo, g, a, c, level - 1, ordinal, b, prov)?;
                }
            }
        }
    }
    Ok(())
}

/// De-electrify a coned path, returning for every output vertex where it
/// came from. The public `de_electrify` drops the provenance.
pub fn de_electrify_with_prov(
    cg: &ConedGraph,
    gamma: &VPath,
    spec: &DeElectSpec,
) -> Result<(VPath, Vec<DeElectProv>)> {
    spec.validate()?;
    gamma.assert_pieces(&cg.base)?;
    let host = match spec.mode {
        DeElectMode::Total | DeElectMode::Embedded => Host::Base,
        DeElectMode::Partial => Host::Coned,
    };
    let mut b = PathBuilder::start(gamma.first(), host);
    let mut prov = vec![DeElectProv::Gamma(0)];
    let mut memo: BTreeMap<usize, SubCone> = BTreeMap::new();
    let mut ordinal = 0;
    for p in &gamma.pieces {
        if let PieceKind::Cone(_) = p.kind {
            let (u, v) = (gamma.vertices[p.start], gamma.vertices[p.end]);
            let h = cg.lowest_label(u, v).ok_or(Error::InvalidEdge {
                u,
                v,
                reason: "cone piece does not traverse a cone edge",
            })?;
            match spec.mode {
                DeElectMode::Total => {
                    let geo = cg.base.geodesic(u, v);
                    let added = geo.len() - 1;
                    b.push_segment(&geo, PieceKind::Member(h));
                    prov.extend(std::iter::repeat(DeElectProv::Expanded(ordinal)).take(added));
                }
                DeElectMode::Embedded => {
                    let sc = ensure_subcone(&mut memo, cg, h)?;
                    let local = sc.cg.base.geodesic(sc.local_of[&u], sc.local_of[&v]);
                    let geo: Vec<usize> = local.iter().map(|&l| sc.global_of[l]).collect();
                    let added = geo.len() - 1;
                    b.push_segment(&geo, PieceKind::Embedded(h));
                    prov.extend(std::iter::repeat(DeElectProv::Expanded(ordinal)).take(added));
                }
                DeElectMode::Partial => {
                    expand_partial(cg, &mut memo, h, u, v, spec.level, ordinal, &mut b, &mut prov)?;
                }
            }
            *prov.last_mut().unwrap() = DeElectProv::Gamma(p.end);
            ordinal += 1;
        } else {
            let verts = &gamma.vertices[p.start..=p.end];
            b.push_segment(verts, p.kind);
            prov.extend((p.start + 1..=p.end).map(DeElectProv::Gamma));
        }
    }
    let out = b.finish();
    out.assert_pieces(&cg.base)?;
    Ok((out, prov))
}

/// Replace each cone edge of `gamma` by a connector chosen by `spec`.
pub fn de_electrify(cg: &ConedGraph, gamma: &VPath, spec: &DeElectSpec) -> Result<VPath> {
    de_electrify_with_prov(cg, gamma, spec).map(|(p, _)| p)
}

/// Where an interruption point ended up in the rerouted path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InterruptMark {
    /// Index among the cone pieces of the original path.
    pub ordinal: usize,
    pub z: usize,
    /// Vertex index of `z` in the interrupted path.
    pub index: usize,
}

/// Interruption with full bookkeeping: besides the rerouted path, returns
/// the index of every original γ vertex in the output and a mark for every
/// interruption point. See `interrupt` for the contract.
pub fn interrupt_with_marks(
    cg: &ConedGraph,
    gamma: &VPath,
    gamma_tilde: &VPath,
    points: &[(usize, usize)],
    k: u32,
) -> Result<(VPath, Vec<usize>, Vec<InterruptMark>)> {
    let cone_pieces: Vec<usize> = gamma
        .pieces
        .iter()
        .enumerate()
        .filter_map(|(i, p)| matches!(p.kind, PieceKind::Cone(_)).then_some(i))
        .collect();
    let member_pieces = gamma_tilde.member_pieces();
    if member_pieces.len() != cone_pieces.len() {
        return Err(Error::InvalidArgument(format!(
            "de-electrification has {} ℋ-pieces but the path has {} cone edges",
            member_pieces.len(),
            cone_pieces.len()
        )));
    }
    // Locate every point on its ℋ-piece, then order by position.
    let mut located: Vec<(usize, usize, usize)> = Vec::new(); // (ordinal, pos, z)
    for &(ordinal, z) in points {
        let piece = match member_pieces.get(ordinal) {
            Some(&(pi, _)) => gamma_tilde.pieces[pi],
            None => {
                return Err(Error::InvalidArgument(format!(
                    "interruption ordinal {ordinal} exceeds the ℋ-piece count"
                )))
            }
        };
        let pos = (piece.start..=piece.end)
            .position(|i| gamma_tilde.vertices[i] == z)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("point {z} does not lie on ℋ-piece {ordinal}"))
            })?;
        located.push((ordinal, pos, z));
    }
    located.sort_unstable();
    located.dedup_by_key(|&mut (o, _, z)| (o, z));

    let mut b = PathBuilder::start(gamma.first(), Host::Coned);
    let mut gamma_to_out = vec![usize::MAX; gamma.vertices.len()];
    gamma_to_out[0] = 0;
    let mut marks = Vec::new();
    let mut ordinal = 0;
    // Append the Γ̂-edge between two member vertices (nothing if equal).
    let connect = |b: &mut PathBuilder, from: usize, to: usize| {
        if from == to {
            return;
        }
        if cg.base.neighbors(from).contains(&(to as u16)) {
            b.push_segment(&[from, to], PieceKind::Geodesic);
        } else {
            let label = cg
                .lowest_label(from, to)
                .expect("two non-adjacent vertices of a member span a cone edge");
            b.push_segment(&[from, to], PieceKind::Cone(label));
        }
    };
    for p in &gamma.pieces {
        if let PieceKind::Cone(_) = p.kind {
            let (e_minus, e_plus) = (gamma.vertices[p.start], gamma.vertices[p.end]);
            let h = cg.lowest_label(e_minus, e_plus).ok_or(Error::InvalidEdge {
                u: e_minus,
                v: e_plus,
                reason: "cone piece does not traverse a cone edge",
            })?;
            let here: Vec<usize> =
                located.iter().filter(|&&(o, _, _)| o == ordinal).map(|&(_, _, z)| z).collect();
            if here.is_empty() {
                b.push_segment(&[e_minus, e_plus], p.kind);
            } else {
                let member = &cg.family[h];
                for &z in &here {
                    let z_prime = project(&cg.base, member, z).canonical();
                    let cur = b.current();
                    connect(&mut b, cur, z_prime);
                    if z != z_prime {
                        b.push_segment(&cg.base.geodesic(z_prime, z), PieceKind::Geodesic);
                        marks.push(InterruptMark { ordinal, z, index: b.vertex_count() - 1 });
                        b.push_segment(&cg.base.geodesic(z, z_prime), PieceKind::Geodesic);
                    } else {
                        marks.push(InterruptMark { ordinal, z, index: b.vertex_count() - 1 });
                    }
                }
                let cur = b.current();
                connect(&mut b, cur, e_plus);
            }
            gamma_to_out[p.end] = b.vertex_count() - 1;
            ordinal += 1;
        } else {
            b.push_segment(&gamma.vertices[p.start..=p.end], p.kind);
            for i in p.start + 1..=p.end {
                gamma_to_out[i] = b.vertex_count() - 1 - (p.end - i);
            }
        }
    }
    let out = b.finish();
    out.assert_pieces(&cg.base)?;
    let bound = gamma.len() as f64 + located.len() as f64 * (2.0 * f64::from(k) + 1.0);
    if (out.len() as f64) > bound {
        return Err(Error::BoundViolated {
            check: "interruption length",
            measured: out.len() as f64,
            bound,
        });
    }
    Ok((out, gamma_to_out, marks))
}

/// Interrupt `gamma` at the given points of its de-electrification
/// `gamma_tilde`. Each point is (cone ordinal, vertex): the vertex must lie
/// on the corresponding ℋ-piece. The cone edge is rerouted through the
/// point's canonical projection z′ on the member and an out-and-back base
/// geodesic to the point itself; degenerate hops (z′ equal to an endpoint
/// or to z) shrink away. The length bound L(out) ≤ L(γ) + |S|(2K+1) is
/// asserted with the caller's K.
pub fn interrupt(
    cg: &ConedGraph,
    gamma: &VPath,
    gamma_tilde: &VPath,
    points: &[(usize, usize)],
    k: u32,
) -> Result<VPath> {
    interrupt_with_marks(cg, gamma, gamma_tilde, points, k).map(|(p, _, _)| p)
}

/// Cone-off quasiconvexity gauge of a subspace: the largest d̂ from any
/// vertex on any base geodesic between two subspace points back to the
/// subspace. A base-K-quasiconvex set always gauges ≤ K since d̂ ≤ d.
pub fn coqc_gauge(cg: &ConedGraph, s: &SubspaceRef) -> u32 {
    let dhat_to_s = cg.hat.dist_to_set(&s.vertices);
    let n = cg.base.n();
    s.vertices
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let ra = cg.base.dist_row(a);
            let mut worst = 0u16;
            for &b in &s.vertices[i + 1..] {
                let rb = cg.base.dist_row(b);
                let dab = ra[b];
                for z in 0..n {
                    if ra[z] + rb[z] == dab {
                        worst = worst.max(dhat_to_s[z]);
                    }
                }
            }
            u32::from(worst)
        })
        .max()
        .unwrap_or(0)
}

fn enumerate_hat_geodesics(cg: &ConedGraph, x: usize, y: usize, cap: usize) -> Vec<Vec<usize>> {
    let row = cg.hat.dist_row(x);
    let mut out = Vec::new();
    // Iterative DFS from y towards x, taking predecessors in ascending
    // order, so the first path found is the canonical geodesic.
    let mut path = vec![y];
    let mut choice_stack: Vec<Vec<u16>> = Vec::new();
    let preds = |v: usize| -> Vec<u16> {
        let dv = row[v];
        let mut p: Vec<u16> = cg
            .hat
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&w| row[w as usize] + 1 == dv)
            .collect();
        p.reverse(); // pop() then yields ascending order
        p
    };
    choice_stack.push(preds(y));
    while let Some(top) = choice_stack.last_mut() {
        if out.len() >= cap {
            break;
        }
        match top.pop() {
            None => {
                choice_stack.pop();
                path.pop();
            }
            Some(w) => {
                let w = w as usize;
                path.push(w);
                if w == x {
                    let mut found = path.clone();
                    found.reverse();
                    out.push(found);
                    path.pop();
                } else {
                    choice_stack.push(preds(w));
                }
            }
        }
    }
    out
}

/// Pigeonhole sweep: for every pair in the 1-deep core with base distance
/// ≥ 2θ², and for the canonical coned geodesic plus up to
/// `MAX_ALTERNATE_GEODESICS` alternates, either the coned length is ≥ θ or
/// some cone edge spans base distance ≥ θ. Requires θ > 1.
pub fn pigeonhole_check(cg: &ConedGraph, theta: u32) -> Result<Vec<Violation>> {
    if theta <= 1 {
        return Err(Error::InvalidArgument("pigeonhole_check requires θ > 1".into()));
    }
    let t = 2 * theta * theta;
    let core = cg.base.core(1);
    cg.base.dist_table();
    cg.hat.dist_table();
    let per_x: Vec<Vec<Violation>> = core
        .par_iter()
        .map(|&x| {
            let mut out = Vec::new();
            let rb = cg.base.dist_row(x);
            let rh = cg.hat.dist_row(x);
            for &y in &core {
                if y <= x || u32::from(rb[y]) < t || u32::from(rh[y]) >= theta {
                    continue;
                }
                let paths = enumerate_hat_geodesics(cg, x, y, 1 + MAX_ALTERNATE_GEODESICS);
                for (gi, p) in paths.iter().enumerate() {
                    let longest_piece = p
                        .windows(2)
                        .filter(|w| cg.is_cone_edge(w[0], w[1]))
                        .map(|w| cg.base.d(w[0], w[1]))
                        .max()
                        .unwrap_or(0);
                    if longest_piece < theta {
                        out.push(
                            Violation::new("pigeonhole", f64::from(theta), f64::from(longest_piece))
                                .with_witness(json!({
                                    "x": x, "y": y, "geodesic": gi, "l_hat": rh[y]
                                })),
                        );
                    }
                }
            }
            out
        })
        .collect();
    Ok(per_x.into_iter().flatten().collect())
}

/// Measured outcome of the piece-count proposition sweep.
#[derive(Debug, Clone, Serialize)]
pub struct NineteenPiecesReport {
    pub delta: u32,
    pub xi: u32,
    pub d_prime: u32,
    /// Piece-count bound per component.
    pub p_bound: u32,
    /// Neighborhood radius the components are measured against.
    pub d_bound: u32,
    pub endpoint_bound: u32,
    pub offtrack_bound: u32,
    pub max_pieces: u32,
    pub max_endpoint_gap: u32,
    pub max_offtrack: u32,
    pub pairs_checked: usize,
    pub violations: Vec<Violation>,
}

/// For each sampled pair: take the canonical coned geodesic, totally
/// de-electrify it, and compare against the canonical base geodesic [x,y]:
/// every component of γ̃ − N_D([x,y]) must decompose into ≤ p pieces with
/// endpoints ≤ 2D+8δ apart, and [x,y] must stay within 10δ+D of γ̃.
pub fn nineteen_pieces_check(
    cg: &ConedGraph,
    delta: u32,
    pairs: &[(usize, usize)],
) -> Result<NineteenPiecesReport> {
    let xi = 8 * delta + 1;
    let d_prime = delta * (xi + 1);
    let p_bound = xi * (2 * delta * (xi + 1) + 1);
    let d_bound = (delta * (p_bound + 1)).max(d_prime);
    let endpoint_bound = 2 * d_bound + 8 * delta;
    let offtrack_bound = 10 * delta + d_bound;
    let spec = DeElectSpec::total();

    let results: Vec<(u32, u32, u32, Vec<Violation>)> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let gamma = cg.canonical_hat_geodesic(x, y);
            let tilde = de_electrify(cg, &gamma, &spec).expect("total de-electrification");
            let xy = cg.base.geodesic(x, y);
            let d_xy = cg.base.dist_to_set(&xy);
            let d_tilde = cg.base.dist_to_set(&tilde.vertices);
            let mut viol = Vec::new();

            let off = xy.iter().map(|&v| u32::from(d_tilde[v])).max().unwrap_or(0);
            if off > offtrack_bound {
                viol.push(
                    Violation::new("geodesic near de-electrification", f64::from(offtrack_bound), f64::from(off))
                        .with_witness(json!({ "x": x, "y": y })),
                );
            }

            let joins: Vec<usize> =
                tilde.pieces.iter().map(|p| p.end).filter(|&e| e + 1 < tilde.vertices.len()).collect();
            let outside: Vec<bool> =
                tilde.vertices.iter().map(|&v| u32::from(d_xy[v]) > d_bound).collect();
            let mut max_pieces = 0u32;
            let mut max_gap = 0u32;
            let mut i = 0;
            while i < outside.len() {
                if !outside[i] {
                    i += 1;
                    continue;
                }
                let mut j = i;
                while j + 1 < outside.len() && outside[j + 1] {
                    j += 1;
                }
                let pieces = 1 + joins.iter().filter(|&&b| i < b && b < j).count() as u32;
                let gap = cg.base.d(tilde.vertices[i], tilde.vertices[j]);
                max_pieces = max_pieces.max(pieces);
                max_gap = max_gap.max(gap);
                if pieces > p_bound {
                    viol.push(
                        Violation::new("component piece count", f64::from(p_bound), f64::from(pieces))
                            .with_witness(json!({ "x": x, "y": y, "component": [i, j] })),
                    );
                }
                if gap > endpoint_bound {
                    viol.push(
                        Violation::new("component endpoint gap", f64::from(endpoint_bound), f64::from(gap))
                            .with_witness(json!({ "x": x, "y": y, "component": [i, j] })),
                    );
                }
                i = j + 1;
            }
            (max_pieces, max_gap, off, viol)
        })
        .collect();

    let mut report = NineteenPiecesReport {
        delta,
        xi,
        d_prime,
        p_bound,
        d_bound,
        endpoint_bound,
        offtrack_bound,
        max_pieces: 0,
        max_endpoint_gap: 0,
        max_offtrack: 0,
        pairs_checked: pairs.len(),
        violations: Vec::new(),
    };
    for (mp, mg, off, viol) in results {
        report.max_pieces = report.max_pieces.max(mp);
        report.max_endpoint_gap = report.max_endpoint_gap.max(mg);
        report.max_offtrack = report.max_offtrack.max(off);
        report.violations.extend(viol);
    }
    Ok(report)
}

/// Polygon projection lemma: if a concatenation σ of n base-geodesic pieces
/// stays outside N_{(n+1)δ}(η) for a base geodesic η, then the projection
/// of σ onto η has diameter ≤ 8δ. Returns None when the disjointness
/// hypothesis fails (the lemma does not apply) or the bound holds.
pub fn check_polygon(
    g: &MetricGraph,
    eta: (usize, usize),
    sigma: &VPath,
    delta: u32,
) -> Option<Violation> {
    let eta_verts = g.geodesic(eta.0, eta.1);
    let n_pieces = sigma.pieces.len().max(1) as u32;
    let d_eta = g.dist_to_set(&eta_verts);
    if sigma.vertices.iter().any(|&v| u32::from(d_eta[v]) <= (n_pieces + 1) * delta) {
        return None;
    }
    let h = SubspaceRef { name: "eta".into(), vertices: eta_verts, connected: true };
    let image = crate::subspace::project_set(g, &h, &sigma.vertices).image;
    let mut diam = 0u32;
    for (i, &a) in image.iter().enumerate() {
        let ra = g.dist_row(a);
        for &b in &image[i + 1..] {
            diam = diam.max(u32::from(ra[b]));
        }
    }
    let bound = 8 * delta;
    if diam > bound {
        Some(
            Violation::new("polygon projection", f64::from(bound), f64::from(diam)).with_witness(
                json!({ "eta": [eta.0, eta.1], "sigma": [sigma.first(), sigma.last()], "pieces": n_pieces }),
            ),
        )
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cayley_ball, free_group, star_fixture, CayleyBall};
    use std::collections::VecDeque;

    fn path_graph(n: usize) -> MetricGraph {
        MetricGraph::new(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    fn cycle_graph(n: usize) -> MetricGraph {
        let mut e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        e.push((n - 1, 0));
        MetricGraph::new(n, &e).unwrap()
    }

    fn sub(g: &MetricGraph, name: &str, v: Vec<usize>) -> SubspaceRef {
        SubspaceRef::new(g, name, v).unwrap()
    }

    /// Group the ball's vertices into ⟨a⟩-cosets by stripping the trailing
    /// run of a/A letters from each word.
    fn a_cosets(ball: &CayleyBall) -> Vec<SubspaceRef> {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (id, w) in ball.words.iter().enumerate() {
            let stripped = w.trim_end_matches(['a', 'A']);
            groups.entry(stripped.to_string()).or_default().push(id);
        }
        groups
            .into_iter()
            .map(|(rep, verts)| {
                SubspaceRef::new(&ball.graph, &format!("{rep}<a>"), verts).unwrap()
            })
            .collect()
    }

    #[test]
    fn p5_coned_everywhere_has_diameter_one() {
        let g = path_graph(5);
        let whole = SubspaceRef::whole(&g, "all");
        let cg = cone_off(g, vec![whole]).unwrap();
        for u in 0..5 {
            for v in u + 1..5 {
                assert_eq!(cg.d_hat(u, v), 1);
            }
        }
    }

    #[test]
    fn p5_coned_at_endpoints() {
        let g = path_graph(5);
        let ends = sub(&g, "ends", vec![0, 4]);
        let cg = cone_off(g, vec![ends]).unwrap();
        assert_eq!(cg.d_hat(0, 4), 1);
        assert_eq!(cg.d_hat(0, 2), 2);
        assert_eq!(cg.labels_of(0, 4), Some(&[0][..]));
        assert!(!cg.is_cone_edge(0, 1));
        // Identity cone-off: empty family changes nothing.
        let g = path_graph(5);
        let cg = cone_off(g, Vec::new()).unwrap();
        for u in 0..5 {
            for v in 0..5 {
                assert_eq!(cg.d_hat(u, v), cg.d_base(u, v));
            }
        }
    }

    #[test]
    fn coset_cone_off_matches_independent_bfs() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let n = ball.graph.n();
        let family = a_cosets(&ball);
        // Independent oracle: brute-force adjacency, plain queue BFS.
        let mut adj = vec![vec![false; n]; n];
        for &(u, v) in ball.graph.edges() {
            adj[u as usize][v as usize] = true;
            adj[v as usize][u as usize] = true;
        }
        for m in &family {
            for &u in &m.vertices {
                for &v in &m.vertices {
                    if u != v {
                        adj[u][v] = true;
                    }
                }
            }
        }
        let bfs = |s: usize| -> Vec<u32> {
            let mut d = vec![u32::MAX; n];
            let mut q = VecDeque::from([s]);
            d[s] = 0;
            while let Some(u) = q.pop_front() {
                for v in 0..n {
                    if adj[u][v] && d[v] == u32::MAX {
                        d[v] = d[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            d
        };
        let cg = cone_off(ball.graph.clone(), family).unwrap();
        for u in 0..n {
            let oracle = bfs(u);
            for v in 0..n {
                assert_eq!(cg.d_hat(u, v), oracle[v], "d̂({u},{v})");
                assert!(cg.d_hat(u, v) <= cg.d_base(u, v));
            }
        }
        let a3 = ball.id_of("aaa").unwrap();
        let ba3 = ball.id_of("baaa").unwrap();
        assert_eq!(cg.d_hat(a3, ba3), 3);
    }

    #[test]
    fn canonical_hat_geodesic_decomposes() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let cg = cone_off(ball.graph.clone(), a_cosets(&ball)).unwrap();
        let a3 = ball.id_of("aaa").unwrap();
        let ba3 = ball.id_of("baaa").unwrap();
        let p = cg.canonical_hat_geodesic(a3, ba3);
        assert_eq!(p.first(), a3);
        assert_eq!(p.last(), ba3);
        assert_eq!(p.len() as u32, cg.d_hat(a3, ba3));
        p.assert_pieces(&cg.base).unwrap();
        // d̂ = 3 across two cosets forces exactly two cone edges.
        assert_eq!(p.cone_labels().len(), 2);
        // P₅ endpoint cone: the whole geodesic is one cone edge.
        let g = path_graph(5);
        let cg = cone_off(g, vec![sub(&path_graph(5), "ends", vec![0, 4])]).unwrap();
        let p = cg.canonical_hat_geodesic(0, 4);
        assert_eq!(p.vertices, vec![0, 4]);
        assert_eq!(p.pieces.len(), 1);
        assert_eq!(p.pieces[0].kind, PieceKind::Cone(0));
    }

    #[test]
    fn total_deelect_restores_base_geodesic() {
        let g = path_graph(5);
        let cg = cone_off(g, vec![sub(&path_graph(5), "ends", vec![0, 4])]).unwrap();
        let gamma = cg.canonical_hat_geodesic(0, 4);
        let (tilde, prov) = de_electrify_with_prov(&cg, &gamma, &DeElectSpec::total()).unwrap();
        assert_eq!(tilde.vertices, vec![0, 1, 2, 3, 4]);
        assert_eq!(tilde.pieces.len(), 1);
        assert_eq!(tilde.pieces[0].kind, PieceKind::Member(0));
        assert_eq!(
            prov,
            vec![
                DeElectProv::Gamma(0),
                DeElectProv::Expanded(0),
                DeElectProv::Expanded(0),
                DeElectProv::Expanded(0),
                DeElectProv::Gamma(1),
            ]
        );
        assert!(tilde.len() as u32 >= cg.d_base(0, 4));
        // A path without cone edges is returned unchanged.
        let plain = cg.canonical_hat_geodesic(1, 3);
        let same = de_electrify(&cg, &plain, &DeElectSpec::total()).unwrap();
        assert_eq!(same.vertices, plain.vertices);
    }

    #[test]
    fn embedded_deelect_walks_inside_member() {
        // In C₇, the member {0..4} induces a path whose inner geodesic
        // (length 4) is longer than the ambient one (length 3 around the
        // back), so the two modes genuinely differ.
        let g = cycle_graph(7);
        let member = sub(&g, "arc", vec![0, 1, 2, 3, 4]);
        let cg = cone_off(g, vec![member]).unwrap();
        let gamma = cg.canonical_hat_geodesic(0, 4);
        assert_eq!(gamma.vertices, vec![0, 4]);
        let total = de_electrify(&cg, &gamma, &DeElectSpec::total()).unwrap();
        assert_eq!(total.vertices, vec![0, 6, 5, 4]);
        assert_eq!(total.pieces[0].kind, PieceKind::Member(0));
        let emb = de_electrify(&cg, &gamma, &DeElectSpec::embedded()).unwrap();
        assert_eq!(emb.vertices, vec![0, 1, 2, 3, 4]);
        assert_eq!(emb.pieces.len(), 1);
        assert_eq!(emb.pieces[0].kind, PieceKind::Embedded(0));
        emb.assert_pieces(&cg.base).unwrap();
    }

    #[test]
    fn embedded_deelect_rejects_disconnected_member() {
        let g = path_graph(5);
        let member = sub(&g, "gap", vec![0, 3]);
        assert!(!member.connected);
        let cg = cone_off(g, vec![member]).unwrap();
        let gamma = cg.canonical_hat_geodesic(0, 3);
        assert_eq!(gamma.vertices, vec![0, 3]);
        // Total mode is fine with it.
        let total = de_electrify(&cg, &gamma, &DeElectSpec::total()).unwrap();
        assert_eq!(total.vertices, vec![0, 1, 2, 3]);
        // Embedded mode must refuse.
        match de_electrify(&cg, &gamma, &DeElectSpec::embedded()) {
            Err(Error::SubspaceDisconnected { name }) => assert_eq!(name, "gap"),
            other => panic!("expected SubspaceDisconnected, got {other:?}"),
        }
    }

    /// P₁₃ with nested members W = {2..10} ⊋ V = {4..8}.
    fn two_level_fixture() -> ConedGraph {
        let g = path_graph(13);
        let w = sub(&g, "W", (2..=10).collect());
        let v = sub(&g, "V", (4..=8).collect());
        cone_off(g, vec![w, v]).unwrap()
    }

    #[test]
    fn partial_level_one_keeps_inner_cones() {
        let cg = two_level_fixture();
        let gamma = cg.canonical_hat_geodesic(0, 12);
        assert_eq!(gamma.vertices, vec![0, 1, 2, 10, 11, 12]);
        let lv1 = de_electrify(&cg, &gamma, &DeElectSpec::partial(1, 1.0)).unwrap();
        assert_eq!(lv1.vertices, vec![0, 1, 2, 3, 4, 8, 9, 10, 11, 12]);
        let kinds: Vec<PieceKind> = lv1.pieces.iter().map(|p| p.kind).collect();
        assert_eq!(
            kinds,
            vec![
                PieceKind::Geodesic,
                PieceKind::Embedded(0),
                PieceKind::Cone(1),
                PieceKind::Embedded(0),
                PieceKind::Geodesic,
            ]
        );
        // Level 2 expands the inner cone through V's own (plain) geometry.
        let lv2 = de_electrify(&cg, &gamma, &DeElectSpec::partial(2, 1.0)).unwrap();
        assert_eq!(lv2.vertices, (0..=12).collect::<Vec<_>>());
        let kinds: Vec<PieceKind> = lv2.pieces.iter().map(|p| p.kind).collect();
        assert_eq!(
            kinds,
            vec![
                PieceKind::Geodesic,
                PieceKind::Embedded(0),
                PieceKind::Embedded(1),
                PieceKind::Embedded(0),
                PieceKind::Geodesic,
            ]
        );
        // Total mode flattens everything in one go.
        let total = de_electrify(&cg, &gamma, &DeElectSpec::total()).unwrap();
        assert_eq!(total.vertices, (0..=12).collect::<Vec<_>>());
        assert_eq!(total.pieces[1].kind, PieceKind::Member(0));
        // Level 0 partial is rejected.
        assert!(de_electrify(&cg, &gamma, &DeElectSpec::partial(0, 1.0)).is_err());
    }

    #[test]
    fn interrupt_noop_and_on_member_point() {
        let g = path_graph(5);
        let cg = cone_off(g, vec![sub(&path_graph(5), "ends", vec![0, 4])]).unwrap();
        let gamma = cg.canonical_hat_geodesic(0, 4);
        let tilde = de_electrify(&cg, &gamma, &DeElectSpec::total()).unwrap();
        // S = ∅ leaves the path alone.
        let out = interrupt(&cg, &gamma, &tilde, &[], 0).unwrap();
        assert_eq!(out.vertices, gamma.vertices);
        // z already in the member (z′ = z = e⁻): growth ≤ 1, here 0.
        let out = interrupt(&cg, &gamma, &tilde, &[(0, 0)], 0).unwrap();
        assert!(out.len() <= gamma.len() + 1);
        assert_eq!(out.first(), 0);
        assert_eq!(out.last(), 4);
        // Interior z = 2 projects to 0; the detour walks out and back.
        let k = coqc_gauge(&cg, &cg.family[0]);
        assert_eq!(k, 2);
        let (out, map, marks) =
            interrupt_with_marks(&cg, &gamma, &tilde, &[(0, 2)], k).unwrap();
        assert_eq!(out.vertices, vec![0, 1, 2, 1, 0, 4]);
        assert_eq!(marks, vec![InterruptMark { ordinal: 0, z: 2, index: 2 }]);
        assert_eq!(map[0], 0);
        assert_eq!(map[1], 5);
        assert!(out.len() <= gamma.len() + (2 * k as usize + 1));
        // A point off the ℋ-piece is rejected.
        assert!(interrupt(&cg, &gamma, &tilde, &[(0, 7777)], 0).is_err());
        assert!(interrupt(&cg, &gamma, &tilde, &[(3, 2)], 0).is_err());
    }

    #[test]
    fn interrupt_two_points_growth_bound() {
        // Two members of base quasiconvexity gauge 1; |S| = 2 must grow the
        // path by at most |S|(2K+1) = 6.
        let g = path_graph(5);
        let m0 = sub(&g, "left", vec![0, 2]);
        let m1 = sub(&g, "right", vec![2, 4]);
        let cg = cone_off(g, vec![m0, m1]).unwrap();
        let k = coqc_gauge(&cg, &cg.family[0]).max(coqc_gauge(&cg, &cg.family[1]));
        assert_eq!(k, 1);
        let gamma = cg.canonical_hat_geodesic(0, 4);
        assert_eq!(gamma.len(), 2);
        let tilde = de_electrify(&cg, &gamma, &DeElectSpec::total()).unwrap();
        assert_eq!(tilde.vertices, vec![0, 1, 2, 3, 4]);
        let (out, _, marks) =
            interrupt_with_marks(&cg, &gamma, &tilde, &[(0, 1), (1, 3)], k).unwrap();
        assert_eq!(out.vertices, vec![0, 1, 0, 2, 3, 2, 4]);
        assert_eq!(out.len(), 6);
        assert!(out.len() <= gamma.len() + 2 * (2 * k as usize + 1));
        assert_eq!(marks.len(), 2);
        assert_eq!(out.vertices[marks[0].index], 1);
        assert_eq!(out.vertices[marks[1].index], 3);
        out.assert_pieces(&cg.base).unwrap();
    }

    #[test]
    fn coqc_gauge_examples() {
        // Whole graph gauges 0.
        let g = path_graph(5);
        let whole = SubspaceRef::whole(&g, "all");
        let cg = cone_off(g, vec![whole]).unwrap();
        assert_eq!(coqc_gauge(&cg, &cg.family[0]), 0);
        // Star arm inside the cone-off of two arms: base geodesics between
        // arm vertices stay on the arm.
        let (g, subs) = star_fixture(3, 4).unwrap();
        let f1 = sub(&g, "F1", subs[0].1.clone());
        let f2 = sub(&g, "F2", subs[1].1.clone());
        let cg = cone_off(g, vec![f1.clone(), f2]).unwrap();
        assert_eq!(coqc_gauge(&cg, &f1), 0);
        // COQC gauge never exceeds the base quasiconvexity gauge.
        let g = cycle_graph(6);
        let anti = sub(&g, "antipodes", vec![0, 3]);
        let base_gauge = crate::subspace::quasiconvexity_gauge(&g, &anti);
        let cg = cone_off(g, vec![anti.clone()]).unwrap();
        assert!(coqc_gauge(&cg, &anti) <= base_gauge);
    }

    #[test]
    fn pigeonhole_on_f2_cosets() {
        let ball = cayley_ball(&free_group(&["a", "b"], 5)).unwrap();
        let cg = cone_off(ball.graph.clone(), a_cosets(&ball)).unwrap();
        // Non-vacuity: the core at depth 1 contains pairs at distance ≥ 8.
        let core = cg.base.core(1);
        let qualifying = core
            .iter()
            .flat_map(|&x| core.iter().map(move |&y| (x, y)))
            .filter(|&(x, y)| x < y && cg.d_base(x, y) >= 8)
            .count();
        assert!(qualifying > 0, "fixture too small to exercise the lemma");
        assert!(pigeonhole_check(&cg, 2).unwrap().is_empty());
        assert!(pigeonhole_check(&cg, 1).is_err());
        // Empty family: every coned geodesic is a base geodesic, so the
        // length branch always holds.
        let plain = cone_off(path_graph(12), Vec::new()).unwrap();
        assert!(pigeonhole_check(&plain, 2).unwrap().is_empty());
    }

    #[test]
    fn nineteen_pieces_on_tree_fixture() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let cg = cone_off(ball.graph.clone(), a_cosets(&ball)).unwrap();
        let core = cg.base.core(1);
        let mut pairs = Vec::new();
        for (i, &x) in core.iter().enumerate() {
            for &y in core.iter().skip(i + 1).step_by(7) {
                pairs.push((x, y));
            }
        }
        let report = nineteen_pieces_check(&cg, 0, &pairs).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert_eq!(report.p_bound, 1);
        assert_eq!(report.d_bound, 0);
        assert!(report.max_pieces <= report.p_bound);
        assert!(report.max_offtrack <= report.offtrack_bound);
        assert_eq!(report.pairs_checked, pairs.len());
    }

    #[test]
    fn polygon_projection_on_tree() {
        let ball = cayley_ball(&free_group(&["a", "b"], 3)).unwrap();
        let g = &ball.graph;
        let b = ball.id_of("b").unwrap();
        let cap_b = ball.id_of("B").unwrap();
        // σ = geodesic from "ab" to "aB": a single piece through "a",
        // disjoint from η = [b, B] (which runs through the identity).
        let ab = ball.id_of("ab").unwrap();
        let a_binv = ball.id_of("aB").unwrap();
        let sigma = VPath::geodesic(g, ab, a_binv);
        assert!(check_polygon(g, (b, cap_b), &sigma, 0).is_none());
        // σ touching η: hypothesis fails, lemma does not apply.
        let sigma = VPath::geodesic(g, ab, cap_b);
        assert!(check_polygon(g, (b, cap_b), &sigma, 0).is_none());
    }
}
