//! Hierarchically hyperbolic structures from verified factor families.
//!
//! - `build_hhs` assembles the full structure one verified factor family
//!   induces on its host: the index set (family members plus the whole
//!   graph), one cone-off per index (each member coned by the members
//!   strictly nested in it, the host coned by the whole family), the
//!   projections π_U = i_U ∘ p_{F_U}, the relative projections ρ, and the
//!   nesting order with its unique maximal element.
//! - `verify_axioms` measures every finitely checkable axiom on a
//!   deterministic sample and reports the realized constants: projections
//!   coarsely Lipschitz, consistency (transverse, nested, and the
//!   order-compatibility clause), bounded geodesic image, large links
//!   against the quasigeodesic surgery, finite complexity, uniqueness, and
//!   per-index hyperbolicity with the base-versus-coned geodesic
//!   comparison. Orthogonality is empty and partial realization reduces to
//!   π_U being onto, which is checked structurally.
//! - Distances between coarse points follow the union-diameter convention:
//!   d_U(A, B) is the diameter of A ∪ B in the coned metric. The
//!   neighborhood clause of the bounded-geodesic-image check is a genuine
//!   set distance, since it tests intersection with a neighborhood.
//! - Sampling is stride-based over canonical enumerations of core vertex
//!   pairs, so every report is byte-identical across runs and thread
//!   counts. Every reported constant is realized by some checked instance;
//!   `violations` is empty exactly when all bounded checks met their
//!   bounds.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::coning::{cone_off, ConedGraph, DeElectMode};
use crate::deelect::{algo_constants, good_quasigeodesic_with};
use crate::error::{Error, Result};
use crate::factors::{sub_family, FactorConstants, FactorFamily, FamilyKind};
use crate::graph::MetricGraph;
use crate::hyperbolicity::delta_thin;
use crate::path::VPath;
use crate::report::Violation;
use crate::subspace::{project_set, SubspaceRef};

/// Grid of multiplicative constants tried by the large-links search.
pub const LLL_LAMBDA_GRID: [u32; 4] = [1, 2, 4, 8];

/// Grid of thresholds θ at which the uniqueness constant is measured.
pub const UNIQUENESS_GRID: [u32; 4] = [1, 2, 4, 8];

/// A hierarchically hyperbolic structure at desk scale: the index set is
/// the (deduplicated) family members plus the whole host, each with its
/// cone-off, projections, relative projections, and the nesting order.
#[derive(Debug, Clone)]
pub struct HhsStructure {
    pub host: MetricGraph,
    /// Constants of the factor check that licensed this structure.
    pub constants: FactorConstants,
    /// Proper members, ascending by original index; members duplicating an
    /// earlier vertex set or spanning the whole host are merged away (see
    /// `notes`). The index set is these plus the host at index `top()`.
    pub members: Vec<SubspaceRef>,
    /// One name per index; the last entry names the maximal element.
    pub names: Vec<String>,
    /// Cone-off per index: member U is coned by the members strictly
    /// nested in U (vertex ids local to U), the host by every member.
    pub coned: Vec<ConedGraph>,
    /// Strictly nested member indices per index, ascending; aligned with
    /// the family of the corresponding cone-off.
    pub nested_of: Vec<Vec<usize>>,
    /// `order[i][j]` ⇔ i ⊑ j. Reflexive and antisymmetric, with the top
    /// index the unique maximal element.
    pub order: Vec<Vec<bool>>,
    /// π_U(x) for every index U and host vertex x, in U-local vertex ids.
    pub pi: Vec<Vec<Vec<usize>>>,
    /// `rho_sets[v][w]` = ρ^V_W ⊆ CW for member v and index w ≠ v with
    /// W ⋢ V, in W-local ids: the projection of V to W. Empty when
    /// undefined (W strictly nested in V, or w = v).
    pub rho_sets: Vec<Vec<Vec<usize>>>,
    /// Largest π_U(x) diameter over all indices and vertices, measured in
    /// the coned metrics: the ξ of the projection axiom.
    pub pi_xi: u32,
    /// Largest defined ρ^V_W diameter, measured in the coned metrics.
    pub rho_xi: u32,
    /// Bounded-projections bound Θ = 2B + ξ + 2 from the family constants.
    pub theta_bound: u32,
    /// Assembly notes: members merged into earlier duplicates or into the
    /// maximal element.
    pub notes: Vec<String>,
}

impl HhsStructure {
    /// Index of the maximal element.
    pub fn top(&self) -> usize {
        self.members.len()
    }

    /// Number of indices, members plus the maximal element.
    pub fn index_count(&self) -> usize {
        self.members.len() + 1
    }

    fn hat(&self, u: usize) -> &MetricGraph {
        &self.coned[u].hat
    }

    /// Map a local vertex of index `u` back to the host.
    pub fn to_global(&self, u: usize, local: usize) -> usize {
        if u == self.top() {
            local
        } else {
            self.members[u].vertices[local]
        }
    }

    fn to_globals(&self, u: usize, locals: &[usize]) -> Vec<usize> {
        locals.iter().map(|&l| self.to_global(u, l)).collect()
    }

    /// Locals of host vertices inside index `u`; every vertex must lie in
    /// the member (callers only pass subsets).
    fn locals_in(&self, u: usize, globals: &[usize]) -> Vec<usize> {
        if u == self.top() {
            return globals.to_vec();
        }
        let verts = &self.members[u].vertices;
        globals
            .iter()
            .map(|g| verts.binary_search(g).expect("vertex lies in the member"))
            .collect()
    }

    /// p_{F_U} of a set of host vertices, in U-local ids (U a member).
    fn project_globals(&self, u: usize, globals: &[usize]) -> Vec<usize> {
        let img = project_set(&self.host, &self.members[u], globals).image;
        self.locals_in(u, &img)
    }

    /// Union-diameter distance between two coarse points of CU.
    pub fn d_u(&self, u: usize, a: &[usize], b: &[usize]) -> u32 {
        let pts: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
        diam_in(self.hat(u), &pts)
    }

    /// Diameter of a set in CU.
    pub fn diam_u(&self, u: usize, a: &[usize]) -> u32 {
        diam_in(self.hat(u), a)
    }

    /// Genuine set distance in CU (smallest pairwise distance), used for
    /// neighborhood-intersection clauses.
    pub fn gap_u(&self, u: usize, a: &[usize], b: &[usize]) -> u32 {
        let g = self.hat(u);
        a.iter()
            .flat_map(|&p| b.iter().map(move |&q| g.d(p, q)))
            .min()
            .expect("nonempty sets")
    }
}

fn diam_in(g: &MetricGraph, pts: &[usize]) -> u32 {
    let mut best = 0;
    for (i, &p) in pts.iter().enumerate() {
        for &q in &pts[i + 1..] {
            best = best.max(g.d(p, q));
        }
    }
    best
}

/// Assemble the hierarchically hyperbolic structure a verified factor
/// family induces on its host. Members equal to the whole vertex set are
/// identified with the maximal element, and members duplicating an earlier
/// vertex set are merged, so the nesting order is a genuine partial order
/// with the host its unique maximal element.
pub fn build_hhs(host: &MetricGraph, family: &FactorFamily) -> Result<HhsStructure> {
    if family.kind != FamilyKind::Factor {
        return Err(Error::InvalidArgument(format!(
            "structure assembly needs a verified factor system, got {:?}; \
             run the factor check or promote the family first",
            family.kind
        )));
    }
    let n = host.n();
    if family.host.n() != n || family.host.edges() != host.edges() {
        return Err(Error::InvalidArgument(
            "host graph differs from the family's host".into(),
        ));
    }

    let mut notes = Vec::new();
    let mut members: Vec<SubspaceRef> = Vec::new();
    for m in &family.members {
        if m.vertices.len() == n {
            notes.push(format!("{} spans the host; identified with the maximal element", m.name));
            continue;
        }
        if let Some(prev) = members.iter().find(|p| p.vertices == m.vertices) {
            notes.push(format!("{} duplicates {}; merged", m.name, prev.name));
            continue;
        }
        members.push(m.clone());
    }
    let m = members.len();
    let top = m;

    // Nesting: exact inclusion of vertex sets. After deduplication every
    // comparable distinct pair is a strict inclusion, so the order is
    // antisymmetric and the host is the unique maximal element.
    let mut order = vec![vec![false; m + 1]; m + 1];
    for (i, row) in order.iter_mut().enumerate() {
        row[i] = true;
        row[top] = true;
    }
    for i in 0..m {
        for j in 0..m {
            if i != j && members[i].is_subset_of(&members[j]) {
                order[i][j] = true;
            }
        }
    }
    let nested_of: Vec<Vec<usize>> = (0..=m)
        .map(|w| (0..m).filter(|&i| i != w && (w == top || order[i][w])).collect())
        .collect();

    let mut coned = Vec::with_capacity(m + 1);
    for (w, nested) in nested_of.iter().enumerate().take(m) {
        let (sub, inner) = sub_family(host, &members, w)?;
        debug_assert_eq!(inner.len(), nested.len());
        coned.push(cone_off(sub, inner)?);
    }
    coned.push(cone_off(host.clone(), members.clone())?);

    let mut names: Vec<String> = members.iter().map(|s| s.name.clone()).collect();
    names.push("Γ".to_string());

    let mut s = HhsStructure {
        host: host.clone(),
        constants: family.constants,
        members,
        names,
        coned,
        nested_of,
        order,
        pi: Vec::new(),
        rho_sets: Vec::new(),
        pi_xi: 0,
        rho_xi: 0,
        theta_bound: 2 * family.constants.b + family.constants.xi + 2,
        notes,
    };

    // π_U over every host vertex; the top projection is the identity.
    let mut pi: Vec<Vec<Vec<usize>>> = (0..m)
        .into_par_iter()
        .map(|u| (0..n).map(|x| s.project_globals(u, &[x])).collect())
        .collect();
    pi.push((0..n).map(|x| vec![x]).collect());
    s.pi_xi = (0..m)
        .into_par_iter()
        .map(|u| (0..n).map(|x| diam_in(s.hat(u), &pi[u][x])).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    s.pi = pi;

    // ρ^V_W = p_W(V) wherever W is not strictly nested in V; for nested
    // V ⊊ W this is V itself, and toward the top it is V's vertex set.
    let mut rho_sets = vec![vec![Vec::new(); m + 1]; m];
    for (v, row) in rho_sets.iter_mut().enumerate() {
        for (w, slot) in row.iter_mut().enumerate() {
            if w == v || (w < m && s.order[w][v]) {
                continue;
            }
            *slot = if w == top {
                s.members[v].vertices.clone()
            } else {
                s.project_globals(w, &s.members[v].vertices)
            };
        }
    }
    s.rho_xi = rho_sets
        .par_iter()
        .enumerate()
        .map(|(v, row)| {
            row.iter()
                .enumerate()
                .filter(|&(w, set)| w != v && !set.is_empty())
                .map(|(w, set)| diam_in(s.hat(w), set))
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    s.rho_sets = rho_sets;

    Ok(s)
}

/// Per-index hyperbolicity and geodesic-comparison statistics.
#[derive(Debug, Clone, Serialize)]
pub struct CuStats {
    pub name: String,
    pub vertices: usize,
    /// Thinness constant of the coned graph.
    pub delta_prime: u32,
    /// Largest coned-metric Hausdorff distance between the canonical base
    /// geodesic and the canonical coned geodesic over sampled core pairs.
    pub h_kr: u32,
    /// Largest d_U(π_U x, π_U y) over host edges (x, y).
    pub k_lipschitz: u32,
}

/// Outcome of the large-links search: the smallest grid constants under
/// which every sampled pair satisfies the axiom, or a flag if none do.
#[derive(Debug, Clone, Serialize)]
pub struct LllRecord {
    pub lambda: Option<u32>,
    pub e: Option<u32>,
    pub flagged: bool,
    pub samples: usize,
}

/// Measured uniqueness constant at one threshold: every sampled core pair
/// at host distance ≥ `t_theta` had some index seeing distance ≥ `theta`.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessRow {
    pub theta: u32,
    pub t_theta: u32,
    /// Sampled pairs on which no index saw distance ≥ `theta`.
    pub failing_pairs: usize,
}

/// Everything `verify_axioms` measured, each constant realized by some
/// checked instance. `violations` is empty exactly when every bounded
/// check (complexity, bounded projections, geodesic image, large links,
/// projection surjectivity, relative-projection monotonicity) held.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub schema_version: u32,
    pub index_count: usize,
    /// Core margin 4δ + 2K + Δ used to pick honest sample points.
    pub core_margin: u32,
    pub core_size: usize,
    pub sample_budget: usize,
    /// Thinness constant of the host.
    pub delta: u32,
    /// Longest nesting chain; bounded by the family's chain constant + 1.
    pub complexity: u32,
    pub complexity_bound: u32,
    /// Coarse-Lipschitz constant of the projections over host edges.
    pub k_lipschitz: u32,
    /// Largest projection-image diameter (ξ of the projection axiom).
    pub pi_xi: u32,
    /// Largest relative-projection diameter.
    pub rho_xi: u32,
    /// Measured consistency constant over transverse pairs, nested pairs,
    /// and the order-compatibility clause.
    pub kappa0: u32,
    /// Largest member-to-member relative-projection diameter, against the
    /// bounded-projections bound Θ.
    pub theta: u32,
    pub theta_bound: u32,
    /// Largest min{projected diameter, distance to ρ^V_W} over sampled
    /// coned geodesics: the realized bounded-geodesic-image constant.
    pub e_bgi: u32,
    /// Dichotomy thresholds: diameters above `bgi_diam_bound` = 8δ + K
    /// must come within `bgi_dist_bound` = 2δ + K + H of ρ^V_W.
    pub bgi_diam_bound: u32,
    pub bgi_dist_bound: u32,
    /// Largest thinness constant over all coned graphs.
    pub delta_prime: u32,
    /// Largest base-versus-coned geodesic Hausdorff distance.
    pub h_kr: u32,
    pub lll: LllRecord,
    pub uniqueness: Vec<UniquenessRow>,
    pub per_cu: Vec<CuStats>,
    pub notes: Vec<String>,
    pub violations: Vec<Violation>,
}

/// Every `i < j` index pair into `items`, thinned by a uniform stride so
/// at most `budget` pairs survive. Deterministic; always keeps the first
/// pair of the canonical enumeration.
fn stride_pairs(count: usize, budget: usize) -> Vec<(usize, usize)> {
    let total = count * count.saturating_sub(1) / 2;
    if total == 0 {
        return Vec::new();
    }
    let stride = total.div_ceil(budget);
    let mut out = Vec::with_capacity(total.min(budget));
    let mut k = 0usize;
    for i in 0..count {
        for j in (i + 1)..count {
            if k.is_multiple_of(stride) {
                out.push((i, j));
            }
            k += 1;
        }
    }
    out
}

fn subset_of(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

/// Measure every finitely checkable axiom of the structure over at most
/// `sample_budget` endpoint pairs per check context. All sampling is
/// deterministic, so the report is byte-identical across runs and thread
/// counts.
pub fn verify_axioms(s: &HhsStructure, sample_budget: usize) -> Result<AxiomReport> {
    if sample_budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be positive".into()));
    }
    let m = s.members.len();
    let top = s.top();
    let k_fam = s.constants.k;
    let mut violations: Vec<Violation> = Vec::new();

    // The core margin keeps sampled points far enough from the truncation
    // boundary that projections and surgery constants are honest.
    let cons_top = algo_constants(&s.coned[top])?;
    let delta = cons_top.delta;
    let core_margin = 4 * delta + 2 * k_fam + cons_top.big_delta;
    let core = s.host.core(core_margin);
    if core.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "core at margin {core_margin} keeps {} vertices; need at least 2",
            core.len()
        )));
    }
    let in_core: Vec<bool> = {
        let mut f = vec![false; s.host.n()];
        for &v in &core {
            f[v] = true;
        }
        f
    };
    // Core vertices of each index, in local ids.
    let core_of: Vec<Vec<usize>> = (0..=m)
        .map(|u| {
            if u == top {
                core.clone()
            } else {
                s.members[u]
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|&(_, g)| in_core[*g])
                    .map(|(l, _)| l)
                    .collect()
            }
        })
        .collect();

    // (g) Per-index hyperbolicity and the base-versus-coned geodesic
    // comparison, plus (a) the coarse-Lipschitz constant over host edges.
    let edges = s.host.edges();
    let per_cu: Vec<CuStats> = (0..=m)
        .map(|u| -> Result<CuStats> {
            let cu = &s.coned[u];
            let delta_prime = delta_thin(&cu.hat)? as u32;
            let pairs = stride_pairs(core_of[u].len(), sample_budget);
            let h_kr = pairs
                .par_iter()
                .map(|&(i, j)| {
                    let (a, b) = (core_of[u][i], core_of[u][j]);
                    let base_geo = VPath::geodesic(&cu.base, a, b);
                    let hat_geo = cu.canonical_hat_geodesic(a, b);
                    cu.hat.hausdorff(&base_geo.vertices, &hat_geo.vertices)
                })
                .collect::<Result<Vec<u32>>>()?
                .into_iter()
                .max()
                .unwrap_or(0);
            let k_lipschitz = edges
                .par_iter()
                .map(|&(a, b)| s.d_u(u, &s.pi[u][a as usize], &s.pi[u][b as usize]))
                .max()
                .unwrap_or(0);
            Ok(CuStats {
                name: s.names[u].clone(),
                vertices: cu.base.n(),
                delta_prime,
                h_kr,
                k_lipschitz,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let delta_prime = per_cu.iter().map(|c| c.delta_prime).max().unwrap_or(0);
    let h_kr = per_cu.iter().map(|c| c.h_kr).max().unwrap_or(0);
    let k_lipschitz = per_cu.iter().map(|c| c.k_lipschitz).max().unwrap_or(0);

    // Structural: π_U onto CU (the partial-realization stand-in for
    // singleton orthogonality classes) …
    for u in 0..=m {
        let mut seen = vec![false; s.coned[u].base.n()];
        for row in &s.pi[u] {
            for &l in row {
                seen[l] = true;
            }
        }
        let missing: Vec<usize> = seen.iter().enumerate().filter(|&(_, hit)| !hit).map(|(l, _)| l).collect();
        if !missing.is_empty() {
            violations.push(
                Violation::new("projection onto", 0.0, missing.len() as f64)
                    .with_witness(json!({ "index": s.names[u], "missed": missing })),
            );
        }
    }
    // … and exact monotonicity of the relative projections: U ⊑ W forces
    // ρ^U_V ⊆ ρ^W_V wherever both are defined.
    for w in 0..m {
        for &u in &s.nested_of[w] {
            for v in 0..=m {
                if v == u || v == w || (v < m && s.order[v][w]) {
                    continue;
                }
                if !subset_of(&s.rho_sets[u][v], &s.rho_sets[w][v]) {
                    violations.push(
                        Violation::new("relative projection monotonicity", 0.0, 1.0)
                            .with_witness(json!({
                                "nested": [s.names[u], s.names[w]],
                                "target": s.names[v],
                            })),
                    );
                }
            }
        }
    }
    // Bounded projections: every defined member-to-member set stays under
    // Θ = 2B + ξ + 2; sets toward the maximal element are coned anyway.
    let mut theta = 0;
    for v in 0..m {
        for w in 0..m {
            if w == v || s.rho_sets[v][w].is_empty() {
                continue;
            }
            let d = s.diam_u(w, &s.rho_sets[v][w]);
            theta = theta.max(d);
            if d > s.theta_bound {
                violations.push(
                    Violation::new("bounded projections", f64::from(s.theta_bound), f64::from(d))
                        .with_witness(json!({ "pair": [s.names[v], s.names[w]] })),
                );
            }
        }
    }

    // (b) Consistency. Transverse and nested inequalities are checked at
    // every core point; the order-compatibility clause over index triples.
    let transverse: Vec<(usize, usize)> = (0..m)
        .flat_map(|v| ((v + 1)..m).map(move |w| (v, w)))
        .filter(|&(v, w)| !s.order[v][w] && !s.order[w][v])
        .collect();
    let nested_pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|v| (0..=m).map(move |w| (v, w)))
        .filter(|&(v, w)| v != w && s.order[v][w])
        .collect();
    let kappa_points = core
        .par_iter()
        .map(|&x| {
            let mut worst = 0;
            for &(v, w) in &transverse {
                let c = s
                    .d_u(w, &s.pi[w][x], &s.rho_sets[v][w])
                    .min(s.d_u(v, &s.pi[v][x], &s.rho_sets[w][v]));
                worst = worst.max(c);
            }
            for &(v, w) in &nested_pairs {
                let away = s.d_u(w, &s.pi[w][x], &s.rho_sets[v][w]);
                let pulled = s.project_globals(v, &s.to_globals(w, &s.pi[w][x]));
                let joined: Vec<usize> =
                    s.pi[v][x].iter().chain(pulled.iter()).copied().collect();
                worst = worst.max(away.min(diam_in(s.hat(v), &joined)));
            }
            worst
        })
        .max()
        .unwrap_or(0);
    let mut kappa0 = kappa_points;
    for v in 0..m {
        for &u in &s.nested_of[v] {
            for w in 0..=m {
                if w == u || w == v || (w < m && s.order[w][v]) {
                    continue;
                }
                kappa0 = kappa0.max(s.d_u(w, &s.rho_sets[u][w], &s.rho_sets[v][w]));
            }
        }
    }

    // (c) Bounded geodesic image over sampled canonical coned geodesics:
    // a projection wider than 8δ + K forces the geodesic within
    // 2δ + K + H of ρ^V_W.
    let bgi_diam_bound = 8 * delta + k_fam;
    let bgi_dist_bound = 2 * delta + k_fam + h_kr;
    let mut e_bgi = 0;
    for (w, core_w) in core_of.iter().enumerate() {
        if s.nested_of[w].is_empty() {
            continue;
        }
        let pairs = stride_pairs(core_w.len(), sample_budget);
        let rows: Vec<(u32, Vec<Violation>)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (core_w[i], core_w[j]);
                let gamma = s.coned[w].canonical_hat_geodesic(a, b);
                let globals = s.to_globals(w, &gamma.vertices);
                let mut worst = 0;
                let mut bad = Vec::new();
                for &v in &s.nested_of[w] {
                    let proj = s.project_globals(v, &globals);
                    let diam = diam_in(s.hat(v), &proj);
                    let gap = s.gap_u(w, &gamma.vertices, &s.rho_sets[v][w]);
                    worst = worst.max(diam.min(gap));
                    if diam > bgi_diam_bound && gap > bgi_dist_bound {
                        bad.push(
                            Violation::new(
                                "bounded geodesic image",
                                f64::from(bgi_dist_bound),
                                f64::from(gap),
                            )
                            .with_witness(json!({
                                "pair": [s.names[v], s.names[w]],
                                "endpoints": [s.to_global(w, a), s.to_global(w, b)],
                                "projected_diameter": diam,
                            })),
                        );
                    }
                }
                (worst, bad)
            })
            .collect();
        for (worst, bad) in rows {
            e_bgi = e_bgi.max(worst);
            violations.extend(bad);
        }
    }

    // (d) Large links. The candidate sets T_i are the members the
    // quasigeodesic surgery actually touches: cone labels of the surgered
    // coned path plus member pieces of its de-electrification.
    struct LllRow {
        d_end: u32,
        t_dists: Vec<u32>,
        seen: Vec<(usize, u32, bool)>,
    }
    let mut lll_rows: Vec<LllRow> = Vec::new();
    for (w, core_w) in core_of.iter().enumerate() {
        if s.nested_of[w].is_empty() {
            continue;
        }
        let cu = &s.coned[w];
        let cons_w = if w == top { cons_top.clone() } else { algo_constants(cu)? };
        let pairs = stride_pairs(core_w.len(), sample_budget);
        let rows: Vec<LllRow> = pairs
            .par_iter()
            .map(|&(i, j)| -> Result<LllRow> {
                let (a, b) = (core_w[i], core_w[j]);
                let qg = good_quasigeodesic_with(cu, a, b, DeElectMode::Total, &cons_w)?;
                let mut labels: BTreeSet<usize> = BTreeSet::new();
                labels.extend(qg.gamma_prime.cone_labels().into_iter().map(|(_, h)| h));
                labels.extend(qg.gamma_tilde_prime.member_pieces().into_iter().map(|(_, h)| h));
                let ts: Vec<usize> = labels.into_iter().map(|h| s.nested_of[w][h]).collect();
                let t_dists: Vec<u32> = ts
                    .iter()
                    .map(|&t| {
                        let locals = s.locals_in(w, &s.members[t].vertices);
                        s.d_u(w, &[a], &locals)
                    })
                    .collect();
                let (xg, yg) = (s.to_global(w, a), s.to_global(w, b));
                let seen: Vec<(usize, u32, bool)> = s.nested_of[w]
                    .iter()
                    .map(|&v| {
                        let dv = s.d_u(v, &s.pi[v][xg], &s.pi[v][yg]);
                        let covered = ts.iter().any(|&t| s.order[v][t]);
                        (v, dv, covered)
                    })
                    .collect();
                Ok(LllRow { d_end: cu.d_hat(a, b), t_dists, seen })
            })
            .collect::<Result<Vec<_>>>()?;
        lll_rows.extend(rows);
    }
    let lll_lambda = LLL_LAMBDA_GRID.into_iter().find(|&l| {
        lll_rows.iter().all(|r| {
            let n_bound = l * r.d_end + l;
            r.t_dists.len() as u32 <= n_bound && r.t_dists.iter().all(|&d| d <= n_bound)
        })
    });
    let e_floor = s.pi_xi.max(s.rho_xi).max(kappa0);
    let mut e_candidates: Vec<u32> = lll_rows
        .iter()
        .flat_map(|r| r.seen.iter().map(|&(_, dv, _)| dv))
        .filter(|&dv| dv > e_floor)
        .collect();
    e_candidates.push(e_floor);
    e_candidates.sort_unstable();
    e_candidates.dedup();
    let lll_e = e_candidates.into_iter().find(|&e| {
        lll_rows.iter().all(|r| r.seen.iter().all(|&(_, dv, covered)| dv < e || covered))
    });
    let lll = LllRecord {
        lambda: lll_lambda,
        e: lll_e,
        flagged: !lll_rows.is_empty() && (lll_lambda.is_none() || lll_e.is_none()),
        samples: lll_rows.len(),
    };
    if lll.flagged {
        let worst = lll_rows
            .iter()
            .flat_map(|r| r.seen.iter())
            .filter(|&&(_, _, covered)| !covered)
            .max_by_key(|&&(_, dv, _)| dv);
        let mut v = Violation::new("large links", f64::from(e_floor), f64::from(lll.samples as u32));
        if let Some(&(idx, dv, _)) = worst {
            v = v.with_witness(json!({ "uncovered": s.names[idx], "distance": dv }));
        }
        violations.push(v);
    }

    // (e) Uniqueness: past T_θ, some index must separate the pair.
    let pairs = stride_pairs(core.len(), sample_budget);
    let separations: Vec<(u32, u32)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (x, y) = (core[i], core[j]);
            let widest =
                (0..=m).map(|u| s.d_u(u, &s.pi[u][x], &s.pi[u][y])).max().unwrap_or(0);
            (s.host.d(x, y), widest)
        })
        .collect();
    let uniqueness: Vec<UniquenessRow> = UNIQUENESS_GRID
        .into_iter()
        .map(|theta| {
            let failing: Vec<u32> = separations
                .iter()
                .filter(|&&(_, widest)| widest < theta)
                .map(|&(d, _)| d)
                .collect();
            UniquenessRow {
                theta,
                t_theta: failing.iter().max().map_or(0, |&d| d + 1),
                failing_pairs: failing.len(),
            }
        })
        .collect();

    // (f) Finite complexity: the longest nesting chain, which the family's
    // own chain constant must dominate.
    let complexity = longest_chain(&s.order);
    let complexity_bound = s.constants.c + 1;
    if complexity > complexity_bound {
        violations.push(Violation::new(
            "finite complexity",
            f64::from(complexity_bound),
            f64::from(complexity),
        ));
    }

    Ok(AxiomReport {
        schema_version: 1,
        index_count: s.index_count(),
        core_margin,
        core_size: core.len(),
        sample_budget,
        delta,
        complexity,
        complexity_bound,
        k_lipschitz,
        pi_xi: s.pi_xi,
        rho_xi: s.rho_xi,
        kappa0,
        theta,
        theta_bound: s.theta_bound,
        e_bgi,
        bgi_diam_bound,
        bgi_dist_bound,
        delta_prime,
        h_kr,
        lll,
        uniqueness,
        per_cu,
        notes: s.notes.clone(),
        violations,
    })
}

/// Length of the longest ⊑-chain in the reflexive order matrix.
fn longest_chain(order: &[Vec<bool>]) -> u32 {
    let n = order.len();
    let mut memo = vec![0u32; n];
    fn depth(i: usize, order: &[Vec<bool>], memo: &mut [u32]) -> u32 {
        if memo[i] != 0 {
            return memo[i];
        }
        let mut best = 1;
        for j in 0..order.len() {
            if j != i && order[j][i] {
                best = best.max(1 + depth(j, order, memo));
            }
        }
        memo[i] = best;
        best
    }
    (0..n).map(|i| depth(i, order, &mut memo)).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{closure_family, prox_closure};
    use crate::factors::{check_factor_system, promote};
    use crate::generators::{cayley_ball, free_group, star_fixture};

    fn trivial_constants() -> FactorConstants {
        FactorConstants { k: 0, c: 0, xi: 0, b: 0, q: 1, d_prime: 0 }
    }

    fn star_structure() -> HhsStructure {
        let (g, named) = star_fixture(3, 8).unwrap();
        let members: Vec<SubspaceRef> = named
            .iter()
            .map(|(name, verts)| SubspaceRef::new(&g, name, verts.clone()).unwrap())
            .collect();
        let (family, report) = check_factor_system(&g, &members).unwrap();
        assert!(report.passed());
        build_hhs(&g, &family).unwrap()
    }

    fn coset_structure(radius: usize) -> HhsStructure {
        let ball = cayley_ball(&free_group(&["a", "b"], radius)).unwrap();
        let trace = prox_closure(&ball, &[vec!["a".to_string()]], 4).unwrap();
        let (weak, _) = closure_family(&ball, &trace, 8).unwrap();
        let promotion = promote(&ball.graph, &weak).unwrap();
        assert!(promotion.report.passed());
        build_hhs(&ball.graph, &promotion.family).unwrap()
    }

    #[test]
    fn a_bare_host_is_its_own_structure() {
        let g = cayley_ball(&free_group(&["a"], 10)).unwrap().graph;
        let family = FactorFamily {
            host: g.clone(),
            members: Vec::new(),
            constants: trivial_constants(),
            kind: FamilyKind::Factor,
        };
        let s = build_hhs(&g, &family).unwrap();
        assert_eq!(s.index_count(), 1);
        assert_eq!(s.names, ["Γ"]);
        assert_eq!(s.coned[0].cone_edges().count(), 0);

        let r = verify_axioms(&s, 200).unwrap();
        assert!(r.violations.is_empty());
        assert_eq!(r.complexity, 1);
        assert_eq!((r.kappa0, r.e_bgi, r.theta), (0, 0, 0));
        assert_eq!((r.pi_xi, r.rho_xi, r.k_lipschitz), (0, 0, 1));
        assert_eq!((r.delta_prime, r.h_kr), (0, 0));
        assert!(!r.lll.flagged);
        assert_eq!(r.lll.samples, 0);
        // Margin 1 keeps the 19 inner vertices of the 21-vertex line; the
        // widest failing pair at θ = 8 is at distance 7.
        assert_eq!(r.core_size, 19);
        let row = r.uniqueness.iter().find(|u| u.theta == 8).unwrap();
        assert_eq!(row.t_theta, 8);
    }

    #[test]
    fn a_spanning_member_folds_into_the_top() {
        let g = cayley_ball(&free_group(&["a"], 6)).unwrap().graph;
        let whole = SubspaceRef::new(&g, "W", (0..g.n()).collect()).unwrap();
        let family = FactorFamily {
            host: g.clone(),
            members: vec![whole],
            constants: trivial_constants(),
            kind: FamilyKind::Factor,
        };
        let s = build_hhs(&g, &family).unwrap();
        assert_eq!(s.index_count(), 1);
        assert_eq!(s.notes.len(), 1);
        assert!(s.notes[0].contains("maximal element"));
    }

    #[test]
    fn the_star_arms_assemble_around_the_shared_spoke() {
        let s = star_structure();
        // I0 duplicates F1's vertex set, so four members become three
        // proper indices plus the whole star.
        assert_eq!(s.index_count(), 4);
        assert_eq!(s.notes.len(), 1);
        assert!(s.notes[0].contains("I0") && s.notes[0].contains("F1"));
        assert_eq!(s.names, ["F1", "F2", "F3", "Γ"]);
        assert_eq!(s.coned[3].family.len(), 3);
        assert!(s.coned[3].cone_edges().count() > 0);
        assert_eq!(s.nested_of[1], [0]);
        assert_eq!(s.nested_of[2], [0]);
        assert!(s.order[0][1] && s.order[0][2]);
        assert!(!s.order[1][2] && !s.order[2][1]);
        // ρ^{F2}_{F3} is the shared spoke, seen inside F3.
        let spoke: Vec<usize> = s.locals_in(2, &s.members[0].vertices);
        assert_eq!(s.rho_sets[1][2], spoke);
    }

    #[test]
    fn the_star_axioms_verify_clean() {
        let s = star_structure();
        let r = verify_axioms(&s, 128).unwrap();
        assert!(r.violations.is_empty(), "violations: {:?}", r.violations);
        assert_eq!(r.complexity, 3);
        assert_eq!(r.complexity_bound, 3);
        assert!(r.theta <= r.theta_bound);
        assert!(r.kappa0 <= 2);
        assert!(r.delta_prime <= 2 && r.h_kr <= 2);
        assert!(!r.lll.flagged && r.lll.samples > 0);
        assert!(r.uniqueness.windows(2).all(|w| w[0].t_theta <= w[1].t_theta));
    }

    #[test]
    fn closed_cosets_carry_the_axis_structure() {
        let s = coset_structure(4);
        assert_eq!(s.index_count(), 10);
        for u in 0..9 {
            assert_eq!(s.coned[u].cone_edges().count(), 0, "axis cosets are bare lines");
        }
        assert_eq!(s.coned[9].family.len(), 9);

        let r = verify_axioms(&s, 96).unwrap();
        assert!(r.violations.is_empty(), "violations: {:?}", r.violations);
        assert_eq!(r.complexity, 2);
        assert!(!r.lll.flagged && r.lll.samples > 0);
        assert!(r.uniqueness.windows(2).all(|w| w[0].t_theta <= w[1].t_theta));
    }

    #[test]
    fn an_unverified_family_is_rejected() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let trace = prox_closure(&ball, &[vec!["a".to_string()]], 4).unwrap();
        let (weak, _) = closure_family(&ball, &trace, 8).unwrap();
        let err = build_hhs(&ball.graph, &weak).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn a_zero_budget_is_rejected() {
        let g = cayley_ball(&free_group(&["a"], 6)).unwrap().graph;
        let family = FactorFamily {
            host: g.clone(),
            members: Vec::new(),
            constants: trivial_constants(),
            kind: FamilyKind::Factor,
        };
        let s = build_hhs(&g, &family).unwrap();
        let err = verify_axioms(&s, 0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }


    #[test]
    fn reports_are_bitwise_stable() {
        let s = star_structure();
        let first = serde_json::to_string(&verify_axioms(&s, 64).unwrap()).unwrap();
        let second = serde_json::to_string(&verify_axioms(&s, 64).unwrap()).unwrap();
        assert_eq!(first, second);
    }
}
