//! Subspaces of a graph and the quantitative coarse-geometry toolkit:
//! closest-point projections, quasiconvexity gauges, coarse inclusion, and
//! the projection lemmas (quadrilateral, quasi-Lipschitz defect, both
//! Behrstock-type inequalities) as measured checks.
//!
//! Projections are exact argmin sets — finite graphs attain minima, so the
//! ε-projection degenerates to ε = 0. Every "canonical" choice is the
//! smallest vertex id of the relevant argmin set, keeping sweeps
//! deterministic across thread counts.
//!
//! Bounds are instantiated with a caller-supplied (δ, K): the measured
//! thin-triangles constant of the host and the measured quasiconvexity
//! gauge of the subspace. Checks return violation lists; an empty list is a
//! pass.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::report::Violation;

/// A named, ordered vertex subset of a host graph. `connected` records
/// whether the induced subgraph is connected — several constructions
/// require it and check the flag rather than recomputing.
#[derive(Debug, Clone, Serialize)]
pub struct SubspaceRef {
    pub name: String,
    /// Ascending, deduplicated.
    pub vertices: Vec<usize>,
    pub connected: bool,
}

impl SubspaceRef {
    pub fn new(g: &MetricGraph, name: &str, mut vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptySet { what: "subspace vertex set" });
        }
        vertices.sort_unstable();
        vertices.dedup();
        if let Some(&v) = vertices.iter().find(|&&v| v >= g.n()) {
            return Err(Error::VertexOutOfRange { id: v, n: g.n() });
        }
        let connected = induced_connected(g, &vertices);
        Ok(SubspaceRef { name: name.to_string(), vertices, connected })
    }

    /// The whole host graph as a subspace.
    pub fn whole(g: &MetricGraph, name: &str) -> Self {
        SubspaceRef { name: name.to_string(), vertices: (0..g.n()).collect(), connected: true }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn is_subset_of(&self, other: &SubspaceRef) -> bool {
        self.vertices.iter().all(|&v| other.contains(v))
    }

    /// Diameter in the ambient graph metric.
    pub fn ambient_diameter(&self, g: &MetricGraph) -> u32 {
        let mut best = 0;
        for (i, &u) in self.vertices.iter().enumerate() {
            let row = g.dist_row(u);
            for &v in &self.vertices[i + 1..] {
                best = best.max(u32::from(row[v]));
            }
        }
        best
    }
}

fn induced_connected(g: &MetricGraph, vertices: &[usize]) -> bool {
    let mut inside = vec![false; g.n()];
    for &v in vertices {
        inside[v] = true;
    }
    let mut seen = vec![false; g.n()];
    let mut stack = vec![vertices[0]];
    seen[vertices[0]] = true;
    let mut reached = 1;
    while let Some(u) = stack.pop() {
        for &w in g.neighbors(u) {
            let w = w as usize;
            if inside[w] && !seen[w] {
                seen[w] = true;
                reached += 1;
                stack.push(w);
            }
        }
    }
    reached == vertices.len()
}

/// Exact closest-point projection image.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResult {
    pub source: Vec<usize>,
    pub target: String,
    /// Ascending argmin set; nonempty.
    pub image: Vec<usize>,
    pub attained_distance: u32,
}

impl ProjectionResult {
    /// Canonical representative: smallest id in the image.
    pub fn canonical(&self) -> usize {
        self.image[0]
    }
}

/// Project one vertex onto a subspace: the exact argmin set.
pub fn project(g: &MetricGraph, y: &SubspaceRef, x: usize) -> ProjectionResult {
    let row = g.dist_row(x);
    let best = y.vertices.iter().map(|&v| row[v]).min().unwrap();
    let image = y.vertices.iter().copied().filter(|&v| row[v] == best).collect();
    ProjectionResult {
        source: vec![x],
        target: y.name.clone(),
        image,
        attained_distance: u32::from(best),
    }
}

/// Project a vertex set: the union of the pointwise projection images.
pub fn project_set(g: &MetricGraph, y: &SubspaceRef, xs: &[usize]) -> ProjectionResult {
    let mut image: Vec<usize> = Vec::new();
    let mut attained = u32::MAX;
    for &x in xs {
        let p = project(g, y, x);
        attained = attained.min(p.attained_distance);
        image.extend(p.image);
    }
    image.sort_unstable();
    image.dedup();
    ProjectionResult { source: xs.to_vec(), target: y.name.clone(), image, attained_distance: attained }
}

/// All-geodesics quasiconvexity gauge: the largest distance from any vertex
/// on any geodesic between two subspace points back to the subspace.
pub fn quasiconvexity_gauge(g: &MetricGraph, y: &SubspaceRef) -> u32 {
    let dy = g.dist_to_set(&y.vertices);
    let n = g.n();
    y.vertices
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let ra = g.dist_row(a);
            let mut best = 0u16;
            for &b in &y.vertices[i + 1..] {
                let rb = g.dist_row(b);
                let dab = ra[b];
                for v in 0..n {
                    if ra[v] + rb[v] == dab {
                        best = best.max(dy[v]);
                    }
                }
            }
            u32::from(best)
        })
        .max()
        .unwrap_or(0)
}

/// Outcome of a coarse-inclusion test at a fixed scale R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Inclusion {
    /// A ⊆ N_R(B) and B ⊆ N_R(A): mutual, hence not proper.
    Holds,
    /// A ⊆ N_R(B) but B ⊄ N_R(A).
    Proper,
    Neither,
}

/// Decide coarse inclusion of A into B at scale R. Properness is decided
/// at this single finite scale (callers follow the convention R ≥ 2K + 4δ
/// and record the R they used).
pub fn coarse_inclusion(g: &MetricGraph, a: &SubspaceRef, b: &SubspaceRef, r: u32) -> Inclusion {
    let db = g.dist_to_set(&b.vertices);
    let forward = a.vertices.iter().all(|&v| u32::from(db[v]) <= r);
    if !forward {
        return Inclusion::Neither;
    }
    let da = g.dist_to_set(&a.vertices);
    let backward = b.vertices.iter().all(|&v| u32::from(da[v]) <= r);
    if backward {
        Inclusion::Holds
    } else {
        Inclusion::Proper
    }
}

/// Quadrilateral check: project a, a′ to H getting b, b′ (canonical
/// representatives); every vertex s of the canonical geodesic [b, b′] that
/// is more than 4δ+K from *both* gate points must lie within 2δ of the
/// interval between a and a′. Returns violators.
pub fn check_quadrilateral(
    g: &MetricGraph,
    h: &SubspaceRef,
    a: usize,
    a2: usize,
    delta: f64,
    k: u32,
) -> Vec<Violation> {
    let b = project(g, h, a).canonical();
    let b2 = project(g, h, a2).canonical();
    let gate = (4.0 * delta + f64::from(k)).floor() as u32;
    let bound = 2.0 * delta;
    let interval = g.geodesic_interval(a, a2);
    let di = g.dist_to_set(&interval);
    let mut out = Vec::new();
    for s in g.geodesic(b, b2) {
        if g.d(s, b) > gate && g.d(s, b2) > gate {
            let measured = u32::from(di[s]);
            if f64::from(measured) > bound {
                out.push(
                    Violation::new("quadrilateral", bound, f64::from(measured)).with_witness(
                        json!({ "a": a, "a2": a2, "b": b, "b2": b2, "s": s }),
                    ),
                );
            }
        }
    }
    out
}

/// Quasi-Lipschitz defect of the projection to H: the worst, over all host
/// pairs and all representative choices, of d(p(x), p(y)) − d(x, y).
/// Contract (checked by callers): ≤ 12δ + 2K.
pub fn projection_lipschitz_defect(g: &MetricGraph, h: &SubspaceRef) -> u32 {
    let n = g.n();
    let images: Vec<Vec<usize>> = (0..n).map(|x| project(g, h, x).image).collect();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let rx = g.dist_row(x);
            let mut worst = 0i64;
            for y in x + 1..n {
                let dxy = i64::from(rx[y]);
                let mut far = 0i64;
                for &p in &images[x] {
                    let rp = g.dist_row(p);
                    for &q in &images[y] {
                        far = far.max(i64::from(rp[q]));
                    }
                }
                worst = worst.max(far - dxy);
            }
            worst.max(0) as u32
        })
        .max()
        .unwrap_or(0)
}

/// Measured Behrstock-type alternative: for every x, the smaller of
/// d(p_V(x), p_V(W)) and d(p_W(x), p_W(V)).
///
/// Only the explicit 8δ + 2K branch is a hard bound; the measured maximum
/// is returned alongside so callers can report the other branch.
pub struct BehrstockFirst {
    pub measured: u32,
    pub hard_bound: f64,
    pub violations: Vec<Violation>,
}

pub fn behrstock_first(
    g: &MetricGraph,
    v: &SubspaceRef,
    w: &SubspaceRef,
    delta: f64,
    k: u32,
) -> BehrstockFirst {
    let n = g.n();
    let pvw = project_set(g, v, &w.vertices).image;
    let pwv = project_set(g, w, &v.vertices).image;
    let d_to_pvw = g.dist_to_set(&pvw);
    let d_to_pwv = g.dist_to_set(&pwv);
    let hard_bound = 8.0 * delta + 2.0 * f64::from(k);
    let per_x = (0..n)
        .into_par_iter()
        .map(|x| {
            let pv = project(g, v, x).image;
            let pw = project(g, w, x).image;
            let dv = pv.iter().map(|&p| u32::from(d_to_pvw[p])).min().unwrap();
            let dw = pw.iter().map(|&p| u32::from(d_to_pwv[p])).min().unwrap();
            (dv.min(dw), x)
        })
        .reduce(|| (0, usize::MAX), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let (measured, worst_x) = per_x;
    let mut violations = Vec::new();
    if f64::from(measured) > hard_bound {
        violations.push(
            Violation::new("behrstock-first", hard_bound, f64::from(measured))
                .with_witness(json!({ "x": worst_x, "V": v.name, "W": w.name })),
        );
    }
    BehrstockFirst { measured, hard_bound, violations }
}

/// Second Behrstock-type inequality for nested subspaces V ⊆ W: for every
/// x, diam(p_V(x) ∪ p_V(p_W(x))) ≤ 12δ + 4K, diameters in the ambient
/// metric.
pub fn behrstock_second(
    g: &MetricGraph,
    v: &SubspaceRef,
    w: &SubspaceRef,
    delta: f64,
    k: u32,
) -> Result<(u32, Vec<Violation>)> {
    if !v.is_subset_of(w) {
        return Err(Error::InvalidArgument(format!(
            "behrstock_second requires {} ⊆ {}",
            v.name, w.name
        )));
    }
    let n = g.n();
    let bound = 12.0 * delta + 4.0 * f64::from(k);
    let per_x = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut pts = project(g, v, x).image;
            let pw = project(g, w, x).image;
            pts.extend(project_set(g, v, &pw).image);
            pts.sort_unstable();
            pts.dedup();
            let mut diam = 0u32;
            for (i, &p) in pts.iter().enumerate() {
                let rp = g.dist_row(p);
                for &q in &pts[i + 1..] {
                    diam = diam.max(u32::from(rp[q]));
                }
            }
            (diam, x)
        })
        .reduce(|| (0, usize::MAX), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let (measured, worst_x) = per_x;
    let mut violations = Vec::new();
    if f64::from(measured) > bound {
        violations.push(
            Violation::new("behrstock-second", bound, f64::from(measured))
                .with_witness(json!({ "x": worst_x, "V": v.name, "W": w.name })),
        );
    }
    Ok((measured, violations))
}

/// Neighborhood-inclusion measurement: the S needed so that
/// p_H(N_R(Y)) ⊆ N_S(p_H(Y)), together with the claimed bound
/// R + 12δ + 2K + (max diameter of a point projection).
pub fn projection_neighborhood_inclusion(
    g: &MetricGraph,
    h: &SubspaceRef,
    y: &SubspaceRef,
    r: u32,
    delta: f64,
    k: u32,
) -> (u32, f64) {
    let dy = g.dist_to_set(&y.vertices);
    let ph_y = project_set(g, h, &y.vertices).image;
    let d_img = g.dist_to_set(&ph_y);
    let mut needed = 0u32;
    let mut margin = 0u32;
    for x in 0..g.n() {
        if u32::from(dy[x]) > r {
            continue;
        }
        let p = project(g, h, x);
        for &q in &p.image {
            needed = needed.max(u32::from(d_img[q]));
        }
        let mut diam = 0;
        for (i, &a) in p.image.iter().enumerate() {
            let ra = g.dist_row(a);
            for &b in &p.image[i + 1..] {
                diam = diam.max(u32::from(ra[b]));
            }
        }
        margin = margin.max(diam);
    }
    let bound = f64::from(r) + 12.0 * delta + 2.0 * f64::from(k) + f64::from(margin);
    (needed, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cayley_ball, free_group, star_fixture};

    fn cycle_graph(n: usize) -> MetricGraph {
        let mut e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        e.push((n - 1, 0));
        MetricGraph::new(n, &e).unwrap()
    }

    #[test]
    fn projection_basics() {
        let g = cycle_graph(4);
        let y = SubspaceRef::new(&g, "origin", vec![0]).unwrap();
        let p = project(&g, &y, 2);
        assert_eq!(p.image, vec![0]);
        assert_eq!(p.attained_distance, 2);
        // x ∈ Y projects to itself.
        let whole = SubspaceRef::whole(&g, "all");
        let p = project(&g, &whole, 3);
        assert_eq!(p.image, vec![3]);
        assert_eq!(p.attained_distance, 0);
    }

    #[test]
    fn projection_is_idempotent() {
        let ball = cayley_ball(&free_group(&["a", "b"], 3)).unwrap();
        let g = &ball.graph;
        let axis: Vec<usize> = (0..g.n()).filter(|&u| {
            let w = ball.words[u].as_bytes();
            w.iter().all(|&c| c == b'a') || w.iter().all(|&c| c == b'A')
        }).collect();
        let y = SubspaceRef::new(g, "a-axis", axis).unwrap();
        for x in 0..g.n() {
            for &p in &project(g, &y, x).image {
                assert_eq!(project(g, &y, p).image, vec![p]);
            }
        }
    }

    #[test]
    fn tree_projections_are_single_points() {
        let ball = cayley_ball(&free_group(&["a", "b"], 3)).unwrap();
        let g = &ball.graph;
        let path: Vec<usize> =
            ["AA", "A", "", "a", "aa"].iter().map(|w| ball.id_of(w).unwrap()).collect();
        let y = SubspaceRef::new(g, "axis", path).unwrap();
        for x in 0..g.n() {
            assert_eq!(project(g, &y, x).image.len(), 1);
        }
    }

    #[test]
    fn gauge_on_six_cycle_antipodes_is_one() {
        let g = cycle_graph(6);
        let y = SubspaceRef::new(&g, "antipodes", vec![0, 3]).unwrap();
        assert_eq!(quasiconvexity_gauge(&g, &y), 1);
        // Whole vertex set has gauge 0.
        assert_eq!(quasiconvexity_gauge(&g, &SubspaceRef::whole(&g, "all")), 0);
    }

    #[test]
    fn gauge_distinguishes_convex_from_hanging_sets() {
        let ball = cayley_ball(&free_group(&["a", "b"], 3)).unwrap();
        let g = &ball.graph;
        // The geodesic from "ab" to "b" passes through "a" and the identity,
        // both at distance 1 from the two-point set, so the gauge is 1.
        let hanging: Vec<usize> = ["b", "ab"].iter().map(|w| ball.id_of(w).unwrap()).collect();
        let y = SubspaceRef::new(g, "T", hanging).unwrap();
        assert_eq!(quasiconvexity_gauge(g, &y), 1);
        // A connected subtree is convex: gauge 0.
        let connected: Vec<usize> =
            ["", "a", "b"].iter().map(|w| ball.id_of(w).unwrap()).collect();
        let y = SubspaceRef::new(g, "T2", connected).unwrap();
        assert!(y.connected);
        assert_eq!(quasiconvexity_gauge(g, &y), 0);
    }

    #[test]
    fn coarse_inclusion_cases() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let g = &ball.graph;
        let axis: Vec<usize> = (0..g.n()).filter(|&u| {
            let w = ball.words[u].as_bytes();
            w.iter().all(|&c| c == b'a') || w.iter().all(|&c| c == b'A')
        }).collect();
        let a = SubspaceRef::new(g, "axis", axis.clone()).unwrap();
        let origin = SubspaceRef::new(g, "1", vec![0]).unwrap();
        // A ⊆ B for a sub-segment.
        let seg = SubspaceRef::new(g, "seg", axis[..3].to_vec()).unwrap();
        assert_eq!(coarse_inclusion(g, &seg, &a, 0), Inclusion::Proper);
        assert_eq!(coarse_inclusion(g, &a, &a, 0), Inclusion::Holds);
        // The axis exits N_1 of the identity.
        assert_eq!(coarse_inclusion(g, &a, &origin, 1), Inclusion::Neither);
        // At R = diameter everything is mutual.
        assert_eq!(coarse_inclusion(g, &a, &origin, 8), Inclusion::Holds);
    }

    #[test]
    fn quadrilateral_is_empty_on_trees() {
        let ball = cayley_ball(&free_group(&["a", "b"], 5)).unwrap();
        let g = &ball.graph;
        let axis: Vec<usize> = (0..g.n()).filter(|&u| {
            let w = ball.words[u].as_bytes();
            w.iter().all(|&c| c == b'a') || w.iter().all(|&c| c == b'A')
        }).collect();
        let h = SubspaceRef::new(g, "a-axis", axis).unwrap();
        let bb = ball.id_of("bb").unwrap();
        let bb_inv = ball.id_of("BB").unwrap();
        assert!(check_quadrilateral(g, &h, bb, bb_inv, 0.0, 0).is_empty());
        // And for a sample of arbitrary pairs.
        for (x, y) in [(3usize, 40usize), (17, 80), (51, 52), (0, 100)] {
            assert!(check_quadrilateral(g, &h, x, y, 0.0, 0).is_empty());
        }
    }

    #[test]
    fn lipschitz_defect_vanishes_on_trees() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let g = &ball.graph;
        let axis: Vec<usize> = (0..g.n()).filter(|&u| {
            let w = ball.words[u].as_bytes();
            w.iter().all(|&c| c == b'a') || w.iter().all(|&c| c == b'A')
        }).collect();
        let h = SubspaceRef::new(g, "a-axis", axis).unwrap();
        assert_eq!(projection_lipschitz_defect(g, &h), 0);
        let single = SubspaceRef::new(g, "pt", vec![7]).unwrap();
        assert_eq!(projection_lipschitz_defect(g, &single), 0);
    }

    #[test]
    fn behrstock_first_on_perpendicular_axes() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let g = &ball.graph;
        let pick = |letter: u8| -> Vec<usize> {
            (0..g.n())
                .filter(|&u| {
                    let w = ball.words[u].as_bytes();
                    !w.is_empty()
                        && w.iter().all(|&c| c.to_ascii_lowercase() == letter)
                        && w.iter().all(|&c| c == w[0])
                })
                .chain([0])
                .collect()
        };
        let v = SubspaceRef::new(g, "a-axis", pick(b'a')).unwrap();
        let w = SubspaceRef::new(g, "b-axis", pick(b'b')).unwrap();
        let r = behrstock_first(g, &v, &w, 0.0, 0);
        assert_eq!(r.measured, 0);
        assert!(r.violations.is_empty());
        // V = W degenerate case.
        let r = behrstock_first(g, &v, &v, 0.0, 0);
        assert_eq!(r.measured, 0);
    }

    #[test]
    fn behrstock_second_nested() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let g = &ball.graph;
        let axis: Vec<usize> = (0..g.n()).filter(|&u| {
            let w = ball.words[u].as_bytes();
            w.iter().all(|&c| c == b'a') || w.iter().all(|&c| c == b'A')
        }).collect();
        let w = SubspaceRef::new(g, "a-axis", axis).unwrap();
        let seg: Vec<usize> = ["", "a", "aa"].iter().map(|x| ball.id_of(x).unwrap()).collect();
        let v = SubspaceRef::new(g, "segment", seg).unwrap();
        let (measured, viol) = behrstock_second(g, &v, &w, 0.0, 0).unwrap();
        assert_eq!(measured, 0);
        assert!(viol.is_empty());
        // Non-nested pair is an argument error.
        let other = SubspaceRef::new(g, "pt", vec![ball.id_of("b").unwrap()]).unwrap();
        assert!(behrstock_second(g, &other, &w, 0.0, 0).is_err());
    }

    #[test]
    fn neighborhood_inclusion_bound_holds_on_star() {
        let (g, subs) = star_fixture(3, 4).unwrap();
        let h = SubspaceRef::new(&g, "F1", subs[0].1.clone()).unwrap();
        let y = SubspaceRef::new(&g, "F2", subs[1].1.clone()).unwrap();
        for r in 0..4 {
            let (needed, bound) = projection_neighborhood_inclusion(&g, &h, &y, r, 0.0, 0);
            assert!(f64::from(needed) <= bound, "r = {r}: needed {needed} > bound {bound}");
        }
    }
}
