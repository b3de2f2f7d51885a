//! Factor systems: verification, equivalence classes, and promotion.
//!
//! * `check_factor_system` measures the five defining conditions of a factor
//!   system on a concrete family and reports minimal passing constants or
//!   named, witnessed failures.
//! * `check_weak_factor_system` does the same for the weak axioms, with the
//!   unbounded protrusion condition truncated at `theta_max` and at the room
//!   left before the host's truncation boundary.
//! * `approx_r`, `equivalence_classes` and `build_p` are the promotion
//!   apparatus: geodesic approximations, Hausdorff classes with their
//!   inclusion order, and the thickened class representatives ℙ.
//! * `promote` chains the three and re-verifies the result as a factor
//!   system, emitting cross-check diagnostics instead of panicking.
//!
//! Checks parallelize over member pairs; every reduction is an index-ordered
//! max/min, so reports are deterministic at any thread count.

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::hyperbolicity::delta_thin;
use crate::report::{CheckReport, Violation};
use crate::subspace::{
    coarse_inclusion, project_set, quasiconvexity_gauge, Inclusion, SubspaceRef,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeSet;

/// What a verification run established about a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// All five factor-system conditions verified.
    Factor,
    /// Weak conditions claimed but not verified here (e.g. loaded from disk).
    Weak,
    /// Weak conditions verified with the geodesic form of the protrusion
    /// condition, which on a graph is the form we can test exactly.
    GeodesicWeak,
    /// A check ran and failed, or no check ran.
    Unverified,
}

/// The measured constants of a (weak) factor system.
///
/// `k` is the uniform embedding/quasiconvexity constant, `c` the longest
/// chain (strict inclusions for factor systems, proper coarse inclusions for
/// weak ones), `xi` the projection-diameter cutoff, `b` the absorption
/// Hausdorff bound, `q` the quasi-geodesic constant of the protrusion check
/// (1: geodesics), and `d_prime` the protrusion distance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FactorConstants {
    pub k: u32,
    pub c: u32,
    pub xi: u32,
    pub b: u32,
    pub q: u32,
    pub d_prime: u32,
}

/// A family of subspaces of one host graph, with its measured constants and
/// the strongest property a check established for it.
#[derive(Debug, Clone)]
pub struct FactorFamily {
    pub host: MetricGraph,
    pub members: Vec<SubspaceRef>,
    pub constants: FactorConstants,
    pub kind: FamilyKind,
}

/// Itemized outcome of a factor or weak-factor verification.
#[derive(Debug, Clone, Serialize)]
pub struct FactorReport {
    pub kind: FamilyKind,
    pub constants: FactorConstants,
    pub items: Vec<CheckReport>,
    pub notes: Vec<String>,
}

impl FactorReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(CheckReport::passed)
    }
}

/// Hausdorff-distance classes of a family at scale `r_used`, together with
/// the inclusion order between classes.
///
/// The raw relation "Hausdorff ≤ R" need not be transitive at finite scale;
/// classes are its transitive closure, and `max_intra_hausdorff` reports how
/// far the closure stretched (`closure_artifact` flags when it exceeds
/// `r_used`). Mutually coarse-including members always land in one class, so
/// the order between distinct classes is automatically antisymmetric.
#[derive(Debug, Clone, Serialize)]
pub struct EquivClasses {
    /// Partition of member indices; each class ascending, classes ordered by
    /// smallest member.
    pub classes: Vec<Vec<usize>>,
    /// Canonical representative (smallest member index) per class.
    pub reps: Vec<usize>,
    pub r_used: u32,
    /// Strict class pairs `(x, y)` with class `x` coarsely included in `y`,
    /// decided between representatives.
    pub order: Vec<(usize, usize)>,
    pub max_intra_hausdorff: u32,
    pub closure_artifact: bool,
}

impl EquivClasses {
    /// Index of the class containing member `m`.
    pub fn class_of(&self, m: usize) -> usize {
        self.classes.iter().position(|c| c.contains(&m)).expect("member index in partition")
    }

    /// Is class `x` below class `y` (reflexively) in the reachability closure
    /// of the inclusion order?
    pub fn below(&self, x: usize, y: usize) -> bool {
        self.down_set(y).contains(&x)
    }

    /// All classes reachable downward from `class_id`, inclusive.
    pub fn down_set(&self, class_id: usize) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut stack = vec![class_id];
        while let Some(y) = stack.pop() {
            if seen.insert(y) {
                for &(a, b) in &self.order {
                    if b == y && !seen.contains(&a) {
                        stack.push(a);
                    }
                }
            }
        }
        seen
    }
}

/// Result of promoting a weak family: the classes, the verified family of
/// thickened representatives (one ℙ per class, in class order), its
/// itemized report, and cross-check diagnostics that should stay empty.
#[derive(Debug, Clone)]
pub struct Promotion {
    pub classes: EquivClasses,
    pub family: FactorFamily,
    pub report: FactorReport,
    pub diagnostics: Vec<Violation>,
}

fn xi_floor(delta: u32, k: u32) -> u32 {
    8 * delta + 2 * k + 1
}

fn r_used_default(delta: u32, k: u32) -> u32 {
    2 * k + 8 * delta + 2
}

/// Ambient diameter of a vertex set.
fn set_diam(g: &MetricGraph, verts: &[usize]) -> u32 {
    let mut best = 0u32;
    for (i, &u) in verts.iter().enumerate() {
        let row = g.dist_row(u);
        for &v in &verts[i + 1..] {
            best = best.max(u32::from(row[v]));
        }
    }
    best
}

/// Longest path (counted in nodes) of the digraph on `n` nodes with the given
/// edges, plus any nodes left on cycles. Edges must point "upward".
fn longest_chain(n: usize, edges: &[(usize, usize)]) -> (u32, Vec<usize>) {
    if n == 0 {
        return (0, Vec::new());
    }
    let mut indeg = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        indeg[b] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut dp = vec![1u32; n];
    let mut popped = 0usize;
    let mut head = 0usize;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        popped += 1;
        for &v in &adj[u] {
            dp[v] = dp[v].max(dp[u] + 1);
            indeg[v] -= 1;
            if indeg[v] == 0 {
                queue.push(v);
            }
        }
    }
    let leftover: Vec<usize> = (0..n).filter(|&v| indeg[v] > 0).collect();
    let best = if popped == 0 { 0 } else { queue[..popped].iter().map(|&v| dp[v]).max().unwrap() };
    (best, leftover)
}

/// The uniform embedding constant of the family: the largest quasiconvexity
/// gauge or induced-vs-ambient additive defect over all members. Disconnected
/// members contribute their gauge only and are reported by the caller.
fn family_constant_k(host: &MetricGraph, members: &[SubspaceRef]) -> Result<u32> {
    let per: Vec<u32> = members
        .par_iter()
        .map(|m| {
            let gauge = quasiconvexity_gauge(host, m);
            if !m.connected {
                return Ok(gauge);
            }
            let (sub, ids) = host.induced(&m.vertices)?;
            let mut defect = 0u32;
            for p in 0..sub.n() {
                let inner = sub.dist_row(p);
                let outer = host.dist_row(ids[p]);
                for q in p + 1..sub.n() {
                    defect = defect.max(u32::from(inner[q]) - u32::from(outer[ids[q]]));
                }
            }
            Ok(gauge.max(defect))
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(per.into_iter().max().unwrap_or(0))
}

/// Per ordered pair `(i, j)`, `i ≠ j`: the projection of member `j` onto
/// member `i`, its ambient diameter, and its Hausdorff distance to member `i`.
struct PairData {
    i: usize,
    j: usize,
    image: Vec<usize>,
    diam: u32,
    haus_to_target: u32,
}

fn projection_pairs(host: &MetricGraph, members: &[SubspaceRef]) -> Vec<PairData> {
    let idx: Vec<(usize, usize)> = (0..members.len())
        .flat_map(|i| (0..members.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    idx.par_iter()
        .map(|&(i, j)| {
            let image = project_set(host, &members[i], &members[j].vertices).image;
            let diam = set_diam(host, &image);
            let haus_to_target =
                host.hausdorff(&image, &members[i].vertices).expect("nonempty sets");
            PairData { i, j, image, diam, haus_to_target }
        })
        .collect()
}

/// Verify the five factor-system conditions for `members` inside `host` and
/// report minimal passing constants, or named failures with witnesses.
///
/// The projection cutoff ξ is chosen from the ascending grid of observed
/// projection diameters (starting at the floor 8δ+2K+1): the smallest value
/// whose induced absorption bound B leaves the containment condition (item 3)
/// unviolated wins. Item 5 uses the finite-scale surrogate "Hausdorff ≤
/// R_used ⟹ equal vertex sets" with R_used = 2K+8δ+2. Failure is data, not
/// an error: the returned family is marked `Unverified` and the report names
/// every violation.
pub fn check_factor_system(
    host: &MetricGraph,
    members: &[SubspaceRef],
) -> Result<(FactorFamily, FactorReport)> {
    let delta = delta_thin(host)? as u32;
    let k = family_constant_k(host, members)?;
    let r_used = r_used_default(delta, k);
    let floor = xi_floor(delta, k);
    let mut notes = vec![format!(
        "delta = {delta}, K = {k}, xi floor = {floor}, R_used = {r_used}"
    )];

    // Item 1: uniform quasi-isometric embedding. Finite connected members
    // always yield finite constants, so only disconnection can fail here.
    let item1_violations: Vec<Violation> = members
        .iter()
        .filter(|m| !m.connected)
        .map(|m| {
            Violation::new("item 1: member connectivity", 0.0, 1.0)
                .with_witness(json!({ "member": m.name }))
        })
        .collect();
    let item1 = CheckReport {
        check: "item 1: uniform quasi-isometric embedding".into(),
        bound: 0.0,
        measured: item1_violations.len() as f64,
        samples: members.len(),
        violations: item1_violations,
    };

    // Items 2 and 3 share the constants (xi, B); scan the candidate grid.
    let pairs = projection_pairs(host, members);
    let subset = |u: usize, w: usize| members[u].is_subset_of(&members[w]);
    let best_absorption: Vec<u32> = pairs
        .par_iter()
        .map(|p| {
            (0..members.len())
                .filter(|&u| subset(u, p.i))
                .map(|u| host.hausdorff(&p.image, &members[u].vertices).expect("nonempty sets"))
                .min()
                .unwrap_or(u32::MAX)
        })
        .collect();
    let mut candidates: BTreeSet<u32> = BTreeSet::new();
    candidates.insert(floor);
    for p in &pairs {
        if p.diam > floor {
            candidates.insert(p.diam);
        }
    }
    let item3_at = |b: u32| -> Vec<Violation> {
        pairs
            .iter()
            .filter(|p| p.haus_to_target <= b && !subset(p.i, p.j))
            .map(|p| {
                Violation::new("item 3: absorbed projection without containment", b as f64, p.haus_to_target as f64)
                    .with_witness(json!({
                        "pair": [members[p.i].name, members[p.j].name],
                        "projection_hausdorff": p.haus_to_target,
                    }))
            })
            .collect()
    };
    let mut chosen: Option<(u32, u32, Vec<Violation>)> = None;
    for &xi in &candidates {
        let b = pairs
            .iter()
            .zip(&best_absorption)
            .filter(|(p, _)| p.diam > xi)
            .map(|(_, &h)| h)
            .max()
            .unwrap_or(0);
        let v3 = item3_at(b);
        let done = v3.is_empty();
        chosen = Some((xi, b, v3));
        if done {
            break;
        }
    }
    let (xi, b, item3_violations) = chosen.expect("candidate grid is nonempty");
    if xi > floor {
        notes.push(format!("xi raised from {floor} to {xi} to absorb wide projections"));
    }
    let item2 = CheckReport {
        check: "item 2: projection diameter or member absorption".into(),
        bound: xi as f64,
        measured: pairs.iter().filter(|p| p.diam <= xi).map(|p| p.diam).max().unwrap_or(0) as f64,
        samples: pairs.len(),
        violations: Vec::new(),
    };
    let item3 = CheckReport {
        check: "item 3: absorbed projections force containment".into(),
        bound: 0.0,
        measured: item3_violations.len() as f64,
        samples: pairs.len(),
        violations: item3_violations,
    };

    // Item 4: longest strict-inclusion chain.
    let mut incl_edges = Vec::new();
    for i in 0..members.len() {
        for j in 0..members.len() {
            if i != j
                && members[i].vertices.len() < members[j].vertices.len()
                && subset(i, j)
            {
                incl_edges.push((i, j));
            }
        }
    }
    let (c, leftover) = longest_chain(members.len(), &incl_edges);
    debug_assert!(leftover.is_empty(), "strict inclusion cannot cycle");
    let item4 = CheckReport {
        check: "item 4: ascending chains of strict inclusions".into(),
        bound: c as f64,
        measured: c as f64,
        samples: members.len(),
        violations: Vec::new(),
    };

    // Item 5: members closer than R_used in Hausdorff distance must be equal.
    let close: Vec<(usize, usize, u32)> = (0..members.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..members.len()).filter_map(move |j| {
                let h = host
                    .hausdorff(&members[i].vertices, &members[j].vertices)
                    .expect("nonempty sets");
                (h <= r_used && members[i].vertices != members[j].vertices).then_some((i, j, h))
            })
        })
        .collect();
    let item5_violations: Vec<Violation> = close
        .iter()
        .map(|&(i, j, h)| {
            Violation::new("item 5: distinct members too close", 0.0, f64::from(r_used + 1 - h))
                .with_witness(json!({
                    "pair": [members[i].name, members[j].name],
                    "hausdorff": h,
                    "r_used": r_used,
                }))
        })
        .collect();
    let item5 = CheckReport {
        check: "item 5: Hausdorff separation of distinct members".into(),
        bound: 0.0,
        measured: item5_violations.iter().map(|v| v.measured).fold(0.0, f64::max),
        samples: members.len() * members.len().saturating_sub(1) / 2,
        violations: item5_violations,
    };

    let constants = FactorConstants { k, c, xi, b, q: 1, d_prime: k + 2 * delta + 1 };
    let items = vec![item1, item2, item3, item4, item5];
    let kind = if items.iter().all(CheckReport::passed) {
        FamilyKind::Factor
    } else {
        FamilyKind::Unverified
    };
    let report = FactorReport { kind, constants, items, notes };
    let family =
        FactorFamily { host: host.clone(), members: members.to_vec(), constants, kind };
    Ok((family, report))
}

/// Verify the weak factor-system conditions, with the protrusion condition in
/// its geodesic form, truncated at `theta_max`.
///
/// For each member V and vertex v ∈ V the check asks for a geodesic with both
/// endpoints on V, each at distance ≥ θ from v, passing within D′ = K+2δ+1 of
/// v — for every θ up to min(`theta_max`, room − 2K − D′), where room is the
/// distance from v to the host's truncation boundary (unbounded if none is
/// declared). The slack matters: a genuine witness may overshoot θ by the
/// member's coarse step plus the protrusion allowance, so demanding θ with
/// less room than that would fail members that are merely coarse near the
/// rim. Failures name (v, θ) where θ is the smallest demand that cannot be
/// met.
/// The reported `d_prime` is the largest protrusion distance any passing
/// vertex actually needed; the unbounded property is never claimed, and the
/// notes record how many vertex checks ran at full `theta_max`.
pub fn check_weak_factor_system(
    host: &MetricGraph,
    members: &[SubspaceRef],
    theta_max: u32,
) -> Result<(FactorFamily, FactorReport)> {
    let delta = delta_thin(host)? as u32;
    let k = family_constant_k(host, members)?;
    let r_used = r_used_default(delta, k);
    let d_allowed = k + 2 * delta + 1;
    let xi = xi_floor(delta, k);
    let mut notes = vec![format!(
        "delta = {delta}, K = {k}, xi = {xi}, R_used = {r_used}, protrusion allowance D' = {d_allowed}"
    )];

    let gauge_item = CheckReport {
        check: "uniform quasiconvexity gauge".into(),
        bound: k as f64,
        measured: k as f64,
        samples: members.len(),
        violations: Vec::new(),
    };

    // Item 1: chains of proper coarse inclusions at scale R_used.
    let mut proper_edges = Vec::new();
    for i in 0..members.len() {
        for j in 0..members.len() {
            if i != j
                && coarse_inclusion(host, &members[i], &members[j], r_used) == Inclusion::Proper
            {
                proper_edges.push((i, j));
            }
        }
    }
    let (c, cycle_nodes) = longest_chain(members.len(), &proper_edges);
    let cycle_violations: Vec<Violation> = cycle_nodes
        .iter()
        .map(|&v| {
            Violation::new("item 1: coarse-inclusion cycle", 0.0, 1.0)
                .with_witness(json!({ "member": members[v].name }))
        })
        .collect();
    let item1 = CheckReport {
        check: "item 1: chains of proper coarse inclusions".into(),
        bound: c as f64,
        measured: c as f64 + cycle_violations.len() as f64,
        samples: members.len(),
        violations: cycle_violations,
    };

    // Item 2: projection diameters in the target's own metric, or absorption
    // by *some* family member (no containment requirement here).
    let pairs = projection_pairs(host, members);
    let induced_diam: Vec<u32> = pairs
        .par_iter()
        .map(|p| {
            let m = &members[p.i];
            if !m.connected {
                return set_diam(host, &p.image);
            }
            let (sub, ids) = host.induced(&m.vertices).expect("member vertices are valid");
            let local: Vec<usize> = p
                .image
                .iter()
                .map(|v| ids.binary_search(v).expect("projection lands in the member"))
                .collect();
            set_diam(&sub, &local)
        })
        .collect();
    let b = pairs
        .par_iter()
        .zip(&induced_diam)
        .filter(|(_, &d)| d >= xi)
        .map(|(p, _)| {
            (0..members.len())
                .map(|u| host.hausdorff(&members[u].vertices, &p.image).expect("nonempty sets"))
                .min()
                .unwrap_or(u32::MAX)
        })
        .max()
        .unwrap_or(0);
    let item2 = CheckReport {
        check: "item 2: projection diameter or family absorption".into(),
        bound: xi as f64,
        measured: induced_diam.iter().filter(|&&d| d < xi).copied().max().unwrap_or(0) as f64,
        samples: pairs.len(),
        violations: Vec::new(),
    };

    // Item 3 (geodesic form): protrusion of every member vertex.
    let boundary_row = if host.boundary().is_empty() {
        None
    } else {
        Some(host.dist_to_set(host.boundary()))
    };
    struct VertexOutcome {
        member: usize,
        v: usize,
        theta_req: u32,
        theta_pass: u32,
        d_need: Option<u32>,
        full: bool,
    }
    let outcomes: Vec<VertexOutcome> = members
        .par_iter()
        .enumerate()
        .flat_map_iter(|(mi, m)| {
            let boundary_row = &boundary_row;
            m.vertices.iter().map(move |&v| {
                let room = boundary_row
                    .as_ref()
                    .map_or(u32::MAX, |row| u32::from(row[v]));
                let theta_req = theta_max.min(room.saturating_sub(2 * k + d_allowed));
                let full = theta_req == theta_max;
                if theta_req == 0 {
                    return VertexOutcome {
                        member: mi,
                        v,
                        theta_req,
                        theta_pass: 0,
                        d_need: Some(0),
                        full,
                    };
                }
                let rv = host.dist_row(v);
                // Grow the allowed protrusion radius until the demand is met
                // (or the allowance is exhausted): the first radius that
                // works is the protrusion this vertex actually needs.
                let mut theta_pass = 0u32;
                let mut d_need = None;
                'radius: for rho in 0..=d_allowed {
                    let near: Vec<usize> =
                        (0..host.n()).filter(|&z| u32::from(rv[z]) <= rho).collect();
                    for (ai, &a) in m.vertices.iter().enumerate() {
                        let ra = host.dist_row(a);
                        for &bvert in &m.vertices[ai..] {
                            let reach = u32::from(rv[a]).min(u32::from(rv[bvert]));
                            if reach <= theta_pass && reach < theta_req {
                                continue;
                            }
                            let rb = host.dist_row(bvert);
                            let dab = ra[bvert];
                            if near.iter().any(|&z| ra[z] + rb[z] == dab) {
                                theta_pass = theta_pass.max(reach);
                                if theta_pass >= theta_req {
                                    d_need = Some(rho);
                                    break 'radius;
                                }
                            }
                        }
                    }
                }
                VertexOutcome { member: mi, v, theta_req, theta_pass, d_need, full }
            })
        })
        .collect();
    let item3_violations: Vec<Violation> = outcomes
        .iter()
        .filter(|o| o.d_need.is_none())
        .map(|o| {
            Violation::new(
                "item 3: no protruding geodesic",
                0.0,
                f64::from(o.theta_req - o.theta_pass),
            )
            .with_witness(json!({
                "member": members[o.member].name,
                "v": o.v,
                "theta": o.theta_pass + 1,
            }))
        })
        .collect();
    let d_prime =
        outcomes.iter().filter_map(|o| o.d_need).max().unwrap_or(0);
    let full_runs = outcomes.iter().filter(|o| o.full).count();
    notes.push(format!(
        "item 3 coverage: {full_runs}/{} vertex checks ran at theta_max = {theta_max}; the rest were truncated by boundary room",
        outcomes.len()
    ));
    let item3 = CheckReport {
        check: "item 3: geodesics protrude past every vertex".into(),
        bound: 0.0,
        measured: item3_violations.iter().map(|v| v.measured).fold(0.0, f64::max),
        samples: outcomes.len(),
        violations: item3_violations,
    };

    let constants = FactorConstants { k, c, xi, b, q: 1, d_prime };
    let items = vec![gauge_item, item1, item2, item3];
    let kind = if items.iter().all(CheckReport::passed) {
        FamilyKind::GeodesicWeak
    } else {
        FamilyKind::Unverified
    };
    let report = FactorReport { kind, constants, items, notes };
    let family =
        FactorFamily { host: host.clone(), members: members.to_vec(), constants, kind };
    Ok((family, report))
}

/// The `r`-approximation of a vertex set: the set plus every vertex on any
/// geodesic between two of its members at distance ≤ `r`.
pub fn approx_r(host: &MetricGraph, q: &SubspaceRef, r: u32) -> Vec<usize> {
    let mut keep = vec![false; host.n()];
    for &v in &q.vertices {
        keep[v] = true;
    }
    let added: Vec<Vec<usize>> = q
        .vertices
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let ra = host.dist_row(a);
            let mut extra = Vec::new();
            for &b in &q.vertices[i + 1..] {
                let dab = ra[b];
                if u32::from(dab) > r {
                    continue;
                }
                let rb = host.dist_row(b);
                extra.extend((0..host.n()).filter(|&z| ra[z] + rb[z] == dab));
            }
            extra
        })
        .collect();
    for list in added {
        for z in list {
            keep[z] = true;
        }
    }
    (0..host.n()).filter(|&v| keep[v]).collect()
}

/// Partition `members` into Hausdorff classes at scale `r` and compute the
/// inclusion order between classes (decided between canonical
/// representatives).
pub fn equivalence_classes(
    host: &MetricGraph,
    members: &[SubspaceRef],
    r: u32,
) -> EquivClasses {
    let n = members.len();
    let haus: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    host.hausdorff(&members[i].vertices, &members[j].vertices)
                        .expect("nonempty sets")
                })
                .collect()
        })
        .collect();
    let h = |i: usize, j: usize| {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        haus[lo][hi - lo - 1]
    };

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for i in 0..n {
        for j in i + 1..n {
            if h(i, j) <= r {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut root_to_class = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if root_to_class[root] == usize::MAX {
            root_to_class[root] = classes.len();
            classes.push(Vec::new());
        }
        classes[root_to_class[root]].push(i);
    }
    let reps: Vec<usize> = classes.iter().map(|c| c[0]).collect();
    let max_intra = classes
        .iter()
        .flat_map(|c| {
            c.iter()
                .enumerate()
                .flat_map(move |(a, &i)| c[a + 1..].iter().map(move |&j| h(i, j)))
        })
        .max()
        .unwrap_or(0);
    let mut order = Vec::new();
    for x in 0..classes.len() {
        for y in 0..classes.len() {
            if x == y {
                continue;
            }
            let incl = coarse_inclusion(host, &members[reps[x]], &members[reps[y]], r);
            debug_assert!(
                incl != Inclusion::Holds,
                "mutual inclusion across classes contradicts the partition"
            );
            if incl == Inclusion::Proper {
                order.push((x, y));
            }
        }
    }
    EquivClasses {
        classes,
        reps,
        r_used: r,
        order,
        max_intra_hausdorff: max_intra,
        closure_artifact: max_intra > r,
    }
}

/// Build the thickened representative ℙ of one class: the ζ-approximation of
/// the union of every member in or below the class. Errors if any class
/// member ends up farther than ζ from ℙ in Hausdorff distance — that bound is
/// the point of the construction, so breaching it is a hard failure.
pub fn build_p(
    host: &MetricGraph,
    members: &[SubspaceRef],
    classes: &EquivClasses,
    class_id: usize,
    zeta: u32,
) -> Result<SubspaceRef> {
    if class_id >= classes.classes.len() {
        return Err(Error::InvalidArgument(format!(
            "class id {class_id} out of range ({} classes)",
            classes.classes.len()
        )));
    }
    let mut union: Vec<usize> = Vec::new();
    for cls in classes.down_set(class_id) {
        for &m in &classes.classes[cls] {
            union.extend_from_slice(&members[m].vertices);
        }
    }
    union.sort_unstable();
    union.dedup();
    let name = format!("P({})", members[classes.reps[class_id]].name);
    let base = SubspaceRef { name: name.clone(), vertices: union, connected: false };
    let verts = approx_r(host, &base, zeta);
    let p = SubspaceRef::new(host, &name, verts)?;
    for &m in &classes.classes[class_id] {
        let hd = host.hausdorff(&members[m].vertices, &p.vertices)?;
        if hd > zeta {
            return Err(Error::BoundViolated {
                check: "promoted representative Hausdorff distance",
                measured: f64::from(hd),
                bound: f64::from(zeta),
            });
        }
    }
    Ok(p)
}

/// Promote a weak family to a factor system: partition into Hausdorff classes
/// at R_used = 2K+8δ+2, thicken each class with ζ = 2δ+D′+K, and re-verify
/// the result with `check_factor_system`.
///
/// ζ uses D′ = max(measured protrusion, K+2δ+1): the measured value can be
/// degenerately 0 on convex members, which would leave merged classes
/// disconnected. Two cross-checks run on the promoted family and land in
/// `diagnostics` (empty on healthy inputs): the equivalence "ℙ_x coarsely
/// included in ℙ_y ⟺ x below y ⟺ ℙ_x ⊆ ℙ_y", and the projection
/// criterion "ℙ_x coarsely included in its projection from ℙ_y ⟹ x below
/// y". A failed factor check is returned as data in `report`, not an error.
pub fn promote(host: &MetricGraph, weak: &FactorFamily) -> Result<Promotion> {
    let delta = delta_thin(host)? as u32;
    let k = weak.constants.k;
    let d_prime = weak.constants.d_prime.max(k + 2 * delta + 1);
    let zeta = 2 * delta + d_prime + k;
    let r_used = r_used_default(delta, k);
    let classes = equivalence_classes(host, &weak.members, r_used);
    let promoted: Vec<SubspaceRef> = (0..classes.classes.len())
        .map(|cls| build_p(host, &weak.members, &classes, cls, zeta))
        .collect::<Result<Vec<_>>>()?;
    let (family, report) = check_factor_system(host, &promoted)?;

    let mut diagnostics = Vec::new();
    for x in 0..promoted.len() {
        for y in 0..promoted.len() {
            if x == y {
                continue;
            }
            let below = classes.below(x, y);
            let subset = promoted[x].is_subset_of(&promoted[y]);
            let coarse =
                coarse_inclusion(host, &promoted[x], &promoted[y], r_used) != Inclusion::Neither;
            if !(below == subset && subset == coarse) {
                diagnostics.push(
                    Violation::new("class order equivalence", 0.0, 1.0).with_witness(json!({
                        "classes": [x, y],
                        "below": below,
                        "subset": subset,
                        "coarse": coarse,
                    })),
                );
            }
            let image = project_set(host, &promoted[x], &promoted[y].vertices).image;
            let db = host.dist_to_set(&image);
            let projected_onto =
                promoted[x].vertices.iter().all(|&v| u32::from(db[v]) <= r_used);
            if projected_onto && !below {
                diagnostics.push(
                    Violation::new("projection forces class order", 0.0, 1.0).with_witness(
                        json!({
                            "classes": [x, y],
                        }),
                    ),
                );
            }
        }
    }
    Ok(Promotion { classes, family, report, diagnostics })
}

/// Restrict a family to one member: the induced host on that member's
/// vertices together with every strictly contained member, remapped. This is
/// the recursion step that drops complexity by one.
pub fn sub_family(
    host: &MetricGraph,
    members: &[SubspaceRef],
    w: usize,
) -> Result<(MetricGraph, Vec<SubspaceRef>)> {
    let target = members.get(w).ok_or_else(|| {
        Error::InvalidArgument(format!("member index {w} out of range ({})", members.len()))
    })?;
    let (sub, ids) = host.induced(&target.vertices)?;
    let mut inner = Vec::new();
    for (i, m) in members.iter().enumerate() {
        if i == w || m.vertices.len() >= target.vertices.len() || !m.is_subset_of(target) {
            continue;
        }
        let mapped: Vec<usize> = m
            .vertices
            .iter()
            .map(|v| ids.binary_search(v).expect("subset of the induced vertex set"))
            .collect();
        inner.push(SubspaceRef::new(&sub, &m.name, mapped)?);
    }
    Ok((sub, inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cayley_ball, free_group, star_fixture, CayleyBall};
    use std::collections::BTreeMap;

    fn path_graph(n: usize) -> MetricGraph {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        MetricGraph::new(n, &edges).unwrap()
    }

    fn star() -> (MetricGraph, Vec<SubspaceRef>) {
        let (g, subs) = star_fixture(3, 8).unwrap();
        let members = subs
            .iter()
            .map(|(name, verts)| SubspaceRef::new(&g, name, verts.clone()).unwrap())
            .collect();
        (g, members)
    }

    fn named<'a>(members: &'a [SubspaceRef], name: &str) -> &'a SubspaceRef {
        members.iter().find(|m| m.name == name).unwrap()
    }

    fn a_cosets(ball: &CayleyBall) -> Vec<SubspaceRef> {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (id, w) in ball.words.iter().enumerate() {
            let stripped = w.trim_end_matches(['a', 'A']);
            groups.entry(stripped.to_string()).or_default().push(id);
        }
        groups
            .into_iter()
            .map(|(rep, verts)| {
                let name = if rep.is_empty() { "<a>".to_string() } else { format!("{rep}<a>") };
                SubspaceRef::new(&ball.graph, &name, verts).unwrap()
            })
            .collect()
    }

    #[test]
    fn the_star_family_is_a_factor_system() {
        let (g, members) = star();
        let (family, report) = check_factor_system(&g, &members).unwrap();
        assert!(report.passed(), "items: {:?}", report.items);
        assert_eq!(family.kind, FamilyKind::Factor);
        assert_eq!(report.items.len(), 5);
        let c = report.constants;
        assert_eq!((c.k, c.c, c.xi, c.b, c.q, c.d_prime), (0, 2, 1, 0, 1, 1));
    }

    #[test]
    fn a_single_proper_member_passes_with_complexity_one() {
        let g = path_graph(6);
        let m = vec![SubspaceRef::new(&g, "mid", vec![2, 3]).unwrap()];
        let (family, report) = check_factor_system(&g, &m).unwrap();
        assert!(report.passed());
        assert_eq!(family.kind, FamilyKind::Factor);
        assert_eq!(report.constants.c, 1);
        assert_eq!(report.constants.b, 0);
    }

    #[test]
    fn a_disconnected_member_fails_the_embedding_item() {
        let g = path_graph(6);
        let m = vec![SubspaceRef::new(&g, "ends", vec![0, 5]).unwrap()];
        assert!(!m[0].connected);
        let (family, report) = check_factor_system(&g, &m).unwrap();
        assert!(!report.passed());
        assert_eq!(family.kind, FamilyKind::Unverified);
        let item1 = &report.items[0];
        assert_eq!(item1.violations.len(), 1);
        assert_eq!(item1.violations[0].witnesses[0]["member"], "ends");
    }

    #[test]
    fn the_cutoff_rises_to_absorb_wide_projections() {
        // Two glued lines whose mutual projection is a whole shared ray: no
        // third member can absorb it, so the cutoff must rise to the ray
        // length and the absorption bound drops back to zero.
        let (g, members) = star();
        let pair = vec![named(&members, "F2").clone(), named(&members, "F3").clone()];
        let (_, report) = check_factor_system(&g, &pair).unwrap();
        assert!(report.passed(), "items: {:?}", report.items);
        assert_eq!(report.constants.xi, 8);
        assert_eq!(report.constants.b, 0);
        assert_eq!(report.constants.c, 1);
        assert!(report.notes.iter().any(|n| n.contains("raised")));
    }

    #[test]
    fn sibling_boundary_cosets_defeat_hausdorff_separation() {
        // In a radius-4 ball two length-4 words differing in their last
        // letter span singleton cosets at distance 2 = R_used: distinct but
        // too close, so the raw coset family is not a factor system.
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let members = a_cosets(&ball);
        let (family, report) = check_factor_system(&ball.graph, &members).unwrap();
        assert!(!report.passed());
        assert_eq!(family.kind, FamilyKind::Unverified);
        assert!(!report.items[4].violations.is_empty());
    }

    #[test]
    fn the_weak_check_names_the_vertices_that_cannot_protrude() {
        let (g, members) = star();
        let fam = vec![
            named(&members, "F2").clone(),
            named(&members, "F3").clone(),
            named(&members, "I0").clone(),
        ];
        let (family, report) = check_weak_factor_system(&g, &fam, 4).unwrap();
        assert!(!report.passed());
        assert_eq!(family.kind, FamilyKind::Unverified);
        let item3 = &report.items[3];
        // The hub and the three vertices behind it: no geodesic inside the
        // lone ray reaches past them.
        assert_eq!(item3.violations.len(), 4);
        let first = &item3.violations[0];
        assert_eq!(first.witnesses[0]["member"], "I0");
        assert_eq!(first.witnesses[0]["v"], 0);
        assert_eq!(first.witnesses[0]["theta"], 2);
    }

    #[test]
    fn the_glued_lines_pass_the_weak_check() {
        let (g, members) = star();
        let fam = vec![named(&members, "F2").clone(), named(&members, "F3").clone()];
        let (family, report) = check_weak_factor_system(&g, &fam, 4).unwrap();
        assert!(report.passed(), "items: {:?}", report.items);
        assert_eq!(family.kind, FamilyKind::GeodesicWeak);
        assert_eq!(report.constants.d_prime, 0);
        assert_eq!(report.constants.c, 1);
    }

    #[test]
    fn a_whole_host_member_passes_the_weak_check() {
        let g = path_graph(21).with_boundary(vec![0, 20]).unwrap();
        let m = vec![SubspaceRef::whole(&g, "all")];
        let (_, report) = check_weak_factor_system(&g, &m, 8).unwrap();
        assert!(report.passed(), "items: {:?}", report.items);
        assert_eq!(report.constants.d_prime, 0);
    }

    #[test]
    fn coset_lines_pass_the_weak_check_with_zero_protrusion() {
        let ball = cayley_ball(&free_group(&["a", "b"], 4)).unwrap();
        let members = a_cosets(&ball);
        let (family, report) = check_weak_factor_system(&ball.graph, &members, 4).unwrap();
        assert!(report.passed(), "items: {:?}", report.items);
        assert_eq!(family.kind, FamilyKind::GeodesicWeak);
        assert_eq!(report.constants.k, 0);
        assert_eq!(report.constants.d_prime, 0);
        assert_eq!(report.constants.c, 2);
    }

    #[test]
    fn approximation_at_radius_zero_returns_the_set() {
        let g = path_graph(5);
        let q = SubspaceRef::new(&g, "q", vec![0, 4]).unwrap();
        assert_eq!(approx_r(&g, &q, 0), vec![0, 4]);
        assert_eq!(approx_r(&g, &q, 4), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn approximation_adds_exactly_the_bridge_vertex() {
        let ball = cayley_ball(&free_group(&["a", "b"], 3)).unwrap();
        let id = |w: &str| ball.id_of(w).unwrap();
        let mut verts: Vec<usize> =
            ["AAA", "AA", "A", "", "a", "aa", "aaa", "bbA", "bb", "bba"].iter().map(|w| id(w)).collect();
        verts.sort_unstable();
        let q = SubspaceRef::new(&ball.graph, "axis+coset", verts.clone()).unwrap();
        let got = approx_r(&ball.graph, &q, 2);
        let mut want = verts;
        want.push(id("b"));
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn approximation_is_monotone_and_settles() {
        let (g, _) = star();
        let q = SubspaceRef::new(&g, "tips", vec![8, 16]).unwrap();
        let mut prev: Vec<usize> = Vec::new();
        for r in 0..=16 {
            let cur = approx_r(&g, &q, r);
            assert!(prev.iter().all(|v| cur.contains(v)), "monotone in r");
            prev = cur;
        }
        assert_eq!(prev.len(), 17);
        let again = SubspaceRef::new(&g, "tips2", prev.clone()).unwrap();
        assert_eq!(approx_r(&g, &again, 16), prev, "idempotent on its own output");
        let bigger = SubspaceRef::new(&g, "tips3", vec![8, 16, 24]).unwrap();
        let sup = approx_r(&g, &bigger, 16);
        assert!(prev.iter().all(|v| sup.contains(v)), "monotone in the set");
    }

    #[test]
    fn far_members_stay_in_singleton_classes_with_the_hub_ray_below() {
        let (g, members) = star();
        let fam = vec![
            named(&members, "F2").clone(),
            named(&members, "F3").clone(),
            named(&members, "I0").clone(),
        ];
        let classes = equivalence_classes(&g, &fam, 2);
        assert_eq!(classes.classes, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(classes.order, vec![(2, 0), (2, 1)]);
        assert_eq!(classes.max_intra_hausdorff, 0);
        assert!(!classes.closure_artifact);
    }

    #[test]
    fn identical_members_share_a_class_at_radius_zero() {
        let g = path_graph(6);
        let a = SubspaceRef::new(&g, "one", vec![1, 2]).unwrap();
        let b = SubspaceRef::new(&g, "two", vec![1, 2]).unwrap();
        let classes = equivalence_classes(&g, &[a, b], 0);
        assert_eq!(classes.classes, vec![vec![0, 1]]);
        assert_eq!(classes.reps, vec![0]);
    }

    fn z_orbits() -> (CayleyBall, Vec<SubspaceRef>) {
        let ball = cayley_ball(&free_group(&["a"], 10)).unwrap();
        let orbit = |step: usize, name: &str| {
            let verts: Vec<usize> = (0..ball.graph.n())
                .filter(|&v| {
                    let w = ball.word(v);
                    w.len() % step == 0
                })
                .collect();
            SubspaceRef::new(&ball.graph, name, verts).unwrap()
        };
        let members = vec![orbit(2, "<aa>"), orbit(3, "<aaa>")];
        (ball, members)
    }

    #[test]
    fn interleaved_orbits_merge_into_one_class() {
        let (ball, members) = z_orbits();
        assert_eq!(ball.graph.hausdorff(&members[0].vertices, &members[1].vertices).unwrap(), 1);
        let classes = equivalence_classes(&ball.graph, &members, 4);
        assert_eq!(classes.classes, vec![vec![0, 1]]);
        assert_eq!(classes.max_intra_hausdorff, 1);
        assert!(!classes.closure_artifact);
    }

    #[test]
    fn a_singleton_convex_class_thickens_to_itself() {
        let (g, members) = star();
        let fam = vec![
            named(&members, "F2").clone(),
            named(&members, "F3").clone(),
            named(&members, "I0").clone(),
        ];
        let classes = equivalence_classes(&g, &fam, 2);
        let p = build_p(&g, &fam, &classes, 0, 1).unwrap();
        assert_eq!(p.name, "P(F2)");
        assert_eq!(p.vertices, fam[0].vertices);
    }

    #[test]
    fn the_merged_orbit_class_thickens_to_the_full_axis() {
        let (ball, members) = z_orbits();
        let classes = equivalence_classes(&ball.graph, &members, 4);
        let p = build_p(&ball.graph, &members, &classes, 0, 3).unwrap();
        assert_eq!(p.vertices.len(), ball.graph.n());
        assert!(ball.graph.hausdorff(&members[0].vertices, &p.vertices).unwrap() <= 3);
    }

    #[test]
    fn promoting_a_factor_system_reproduces_it() {
        let (g, members) = star();
        let fam = vec![
            named(&members, "F2").clone(),
            named(&members, "F3").clone(),
            named(&members, "I0").clone(),
        ];
        let (family, _) = check_factor_system(&g, &fam).unwrap();
        let promotion = promote(&g, &family).unwrap();
        assert!(promotion.report.passed(), "items: {:?}", promotion.report.items);
        assert_eq!(promotion.classes.classes.len(), 3);
        assert!(promotion.diagnostics.is_empty(), "{:?}", promotion.diagnostics);
        let sets: Vec<&[usize]> =
            promotion.family.members.iter().map(|m| m.vertices.as_slice()).collect();
        for m in &fam {
            assert!(sets.contains(&m.vertices.as_slice()));
        }
        assert_eq!(promotion.report.constants.xi, 1);
        assert_eq!(promotion.report.constants.c, 2);
    }

    #[test]
    fn promoting_the_merged_orbits_yields_a_single_member_system() {
        let (ball, members) = z_orbits();
        let (weak, report) = check_weak_factor_system(&ball.graph, &members, 3).unwrap();
        assert!(report.passed(), "items: {:?}", report.items);
        let promotion = promote(&ball.graph, &weak).unwrap();
        assert!(promotion.report.passed(), "items: {:?}", promotion.report.items);
        assert_eq!(promotion.family.members.len(), 1);
        assert_eq!(promotion.family.members[0].vertices.len(), ball.graph.n());
        assert_eq!(promotion.report.constants.c, 1);
        assert!(promotion.diagnostics.is_empty());
    }

    #[test]
    fn restricting_to_a_member_drops_the_complexity() {
        let (g, members) = star();
        let (_, outer) = check_factor_system(&g, &members).unwrap();
        assert_eq!(outer.constants.c, 2);
        let w = members.iter().position(|m| m.name == "F2").unwrap();
        let (sub, inner) = sub_family(&g, &members, w).unwrap();
        assert_eq!(sub.n(), 17);
        assert_eq!(inner.len(), 2);
        let (_, report) = check_factor_system(&sub, &inner).unwrap();
        assert!(report.passed(), "items: {:?}", report.items);
        assert_eq!(report.constants.c, 1);
    }
}
