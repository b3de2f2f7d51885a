//! Coset families of quasiconvex subgroups in Cayley balls, proximal-pair
//! detection, and the closure iteration that adds intersection subgroups
//! until the family of Hausdorff classes stabilizes.
//!
//! * [`coset_family`] enumerates every coset of a subgroup list that meets
//!   the ball, deduplicated by vertex set and tagged with shortlex-minimal
//!   representative words.
//! * [`proximal_pairs`] lists ordered coset pairs whose projection diameter
//!   reaches the family's `xi` cutoff — the finite-scale certificate that
//!   the pair's conjugate intersection is infinite at full scale.
//! * [`intersection_approx`] realizes that intersection inside the ball by
//!   word arithmetic and asserts it stays near the projection that
//!   certified it.
//! * [`prox_closure`] iterates: find proximal pairs, take intersections,
//!   canonicalize up to Hausdorff class, add new class representatives —
//!   recording the level at which the family stabilizes.
//! * [`closure_family`] runs the weak-factor-system check on the closed
//!   family's cosets, restricted to the ball core so truncation artifacts
//!   near the rim cannot corrupt the verdict; [`height_probe`] brute-forces
//!   the largest set of pairwise-proximal distinct conjugates.
//!
//! Pair scans parallelize with index-ordered reductions; the closure loop
//! itself is sequential, so traces are deterministic at any thread count.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{check_weak_factor_system, equivalence_classes, FactorFamily, FactorReport};
use crate::generators::{invert_word, CayleyBall};
use crate::hyperbolicity::delta_thin;
use crate::subspace::{quasiconvexity_gauge, SubspaceRef};

/// One subgroup at ball scale: generating words (normal forms) plus the
/// trace of the subgroup in the ball. Derived members produced by the
/// closure carry their full nontrivial element list as generators, which is
/// redundant but exact at this scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupRep {
    pub name: String,
    pub generators: Vec<String>,
    /// Subgroup ∩ ball as ascending vertex ids; always contains the
    /// identity vertex 0.
    pub vertices: Vec<usize>,
    /// Closure level at which the member was introduced (inputs are 0).
    pub level: usize,
}

/// A coset tagged with the subgroup it belongs to and the shortlex-minimal
/// word it contains.
#[derive(Debug, Clone, Serialize)]
pub struct CosetRef {
    pub subspace: SubspaceRef,
    /// Index into the owning family's subgroup list (smallest index when
    /// several subgroups share the vertex set).
    pub subgroup: usize,
    pub representative: String,
}

/// Every coset of a subgroup family that meets a Cayley ball, with the
/// measured constants the proximal scan runs at. `xi_threshold` is the
/// caller's cutoff raised to the measured floor `8δ + 2K + 1` when below
/// it, so the scan never runs below the scale its own constants demand.
#[derive(Debug)]
pub struct CosetFamily<'a> {
    pub ball: &'a CayleyBall,
    pub subgroups: Vec<SubgroupRep>,
    pub cosets: Vec<CosetRef>,
    pub xi_threshold: u32,
    /// Measured thin-triangles constant of the ball.
    pub delta: u32,
    /// Largest quasiconvexity gauge over the subgroup traces.
    pub k: u32,
}

impl CosetFamily<'_> {
    /// The Hausdorff-class scale every downstream canonicalization uses.
    pub fn r_used(&self) -> u32 {
        2 * self.k + 8 * self.delta + 2
    }

    /// Indices of the cosets that meet the ball core at the given margin.
    /// Cosets living entirely within `margin` of the truncation boundary
    /// are rim artifacts: their full-scale counterparts extend past the
    /// ball, so their mutual distances here say nothing about the group.
    pub fn core_cosets(&self, margin: u32) -> Vec<usize> {
        let core = self.ball.graph.core(margin);
        let mut inside = vec![false; self.ball.graph.n()];
        for v in core {
            inside[v] = true;
        }
        (0..self.cosets.len())
            .filter(|&i| self.cosets[i].subspace.vertices.iter().any(|&v| inside[v]))
            .collect()
    }
}

/// The record of one closure run: the member list at every level, what each
/// level added, and where the iteration stopped. `stabilized_at = None`
/// means the height cap was reached with the family still growing — a
/// valid outcome at truncation, flagged in `notes`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosureTrace {
    pub levels: Vec<Vec<SubgroupRep>>,
    pub stabilized_at: Option<usize>,
    /// Names of the new class representatives added per growth step.
    pub added_per_level: Vec<Vec<String>>,
    /// Projection cutoff of the last level's scan.
    pub xi_threshold: u32,
    /// Hausdorff-class scale of the last level.
    pub r_used: u32,
    /// Core margin downstream checks should restrict cosets to; equals
    /// `r_used`, the scale at which rim truncation can forge or destroy a
    /// class merge.
    pub core_margin: u32,
    /// Final Hausdorff classes of the member subgroups, as name lists.
    pub final_classes: Vec<Vec<String>>,
    pub max_intra_hausdorff: u32,
    /// Members of multi-member classes whose traces touch the ball
    /// boundary: the merge evidence for these could flip at a larger
    /// radius, so class identity near the rim is provisional.
    pub boundary_flagged: Vec<String>,
    pub notes: Vec<String>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = x;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Smaller root wins, keeping component labels deterministic.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Normal forms of the generators and their inverses, empties dropped.
fn suffix_set(ball: &CayleyBall, generators: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for g in generators {
        let nf = ball.normal_form(g);
        if !nf.is_empty() {
            out.push(invert_word(&nf));
            out.push(nf);
        }
    }
    out.sort();
    out.dedup();
    out
}

/// All cosets of one subgroup as connected components of the
/// right-multiplication relation `v ~ v·s` over the ball. Components are
/// ascending vertex lists, ordered by smallest vertex id.
fn cosets_of(ball: &CayleyBall, generators: &[String]) -> Vec<Vec<usize>> {
    let n = ball.graph.n();
    let suffixes = suffix_set(ball, generators);
    let mut parent: Vec<usize> = (0..n).collect();
    for u in 0..n {
        for s in &suffixes {
            if let Some(v) = ball.mul(u, s) {
                union(&mut parent, u, v);
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let root = find(&mut parent, v);
        comps.entry(root).or_default().push(v);
    }
    let mut out: Vec<Vec<usize>> = comps.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Build the ball traces of the input subgroups, rejecting any that reduce
/// to the identity alone.
fn build_reps(ball: &CayleyBall, subgroups: &[Vec<String>]) -> Result<Vec<SubgroupRep>> {
    if subgroups.is_empty() {
        return Err(Error::InvalidArgument("subgroup list is empty".into()));
    }
    let mut out = Vec::with_capacity(subgroups.len());
    for (index, gens) in subgroups.iter().enumerate() {
        let suffixes = suffix_set(ball, gens);
        let mut seen = vec![false; ball.graph.n()];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        let mut trace = vec![0usize];
        while let Some(u) = queue.pop_front() {
            for s in &suffixes {
                if let Some(v) = ball.mul(u, s) {
                    if !seen[v] {
                        seen[v] = true;
                        trace.push(v);
                        queue.push_back(v);
                    }
                }
            }
        }
        if trace.len() <= 1 {
            return Err(Error::TrivialSubgroup { index });
        }
        trace.sort_unstable();
        out.push(SubgroupRep {
            name: format!("F{index}"),
            generators: suffixes,
            vertices: trace,
            level: 0,
        });
    }
    Ok(out)
}

fn coset_name(rep: &str, subgroup: usize) -> String {
    if rep.is_empty() {
        format!("F{subgroup}")
    } else {
        format!("{rep}·F{subgroup}")
    }
}

/// Family construction from already-built member reps: measure δ and K,
/// clamp ξ to its floor, enumerate and deduplicate cosets.
fn family_of<'a>(
    ball: &'a CayleyBall,
    members: &[SubgroupRep],
    xi: u32,
) -> Result<CosetFamily<'a>> {
    let g = &ball.graph;
    let delta = delta_thin(g)? as u32;
    let k = members
        .iter()
        .map(|m| {
            SubspaceRef::new(g, &m.name, m.vertices.clone())
                .map(|r| quasiconvexity_gauge(g, &r))
        })
        .collect::<Result<Vec<u32>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let xi_threshold = xi.max(8 * delta + 2 * k + 1);

    let mut seen: BTreeMap<Vec<usize>, (usize, String)> = BTreeMap::new();
    for (si, m) in members.iter().enumerate() {
        for comp in cosets_of(ball, &m.generators) {
            let rep = ball.word(comp[0]).to_string();
            seen.entry(comp).or_insert((si, rep));
        }
    }
    let mut items: Vec<(Vec<usize>, usize, String)> =
        seen.into_iter().map(|(set, (si, rep))| (set, si, rep)).collect();
    items.sort_by(|a, b| (a.0[0], &a.0).cmp(&(b.0[0], &b.0)));
    let cosets = items
        .into_iter()
        .map(|(set, si, rep)| {
            Ok(CosetRef {
                subspace: SubspaceRef::new(g, &coset_name(&rep, si), set)?,
                subgroup: si,
                representative: rep,
            })
        })
        .collect::<Result<Vec<CosetRef>>>()?;
    Ok(CosetFamily { ball, subgroups: members.to_vec(), cosets, xi_threshold, delta, k })
}

/// Enumerate every coset of the given subgroups that meets the ball.
///
/// Cosets are connected components of right multiplication by the
/// generators, deduplicated by vertex set across subgroups (the smallest
/// subgroup index keeps the tag) and ordered by smallest vertex id, so the
/// identity coset of the first subgroup comes first. `xi` below the
/// measured floor `8δ + 2K + 1` is raised to it.
pub fn coset_family<'a>(
    ball: &'a CayleyBall,
    subgroups: &[Vec<String>],
    xi: u32,
) -> Result<CosetFamily<'a>> {
    let reps = build_reps(ball, subgroups)?;
    family_of(ball, &reps, xi)
}

/// Projection image of `source` on `target` and its ambient diameter.
fn projection_image(
    g: &crate::graph::MetricGraph,
    target: &[usize],
    source: &[usize],
) -> (Vec<usize>, u32) {
    let mut image: Vec<usize> = Vec::new();
    for &x in source {
        let row = g.dist_row(x);
        let best = target.iter().map(|&t| row[t]).min().expect("nonempty target");
        image.extend(target.iter().copied().filter(|&t| row[t] == best));
    }
    image.sort_unstable();
    image.dedup();
    let mut diam = 0u32;
    for (i, &a) in image.iter().enumerate() {
        let row = g.dist_row(a);
        for &b in &image[i + 1..] {
            diam = diam.max(u32::from(row[b]));
        }
    }
    (image, diam)
}

/// All ordered pairs of distinct cosets whose projection diameter reaches
/// the family's cutoff, as `(target index, source index, diameter)`. The
/// cutoff is already clamped to `8δ + 2K + 1`, the scale below which wide
/// projections can arise without an infinite intersection behind them.
pub fn proximal_pairs(family: &CosetFamily) -> Vec<(usize, usize, u32)> {
    let g = &family.ball.graph;
    let m = family.cosets.len();
    let rows: Vec<Vec<(usize, usize, u32)>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let target = &family.cosets[i].subspace.vertices;
            let mut row = Vec::new();
            for j in 0..m {
                if i == j {
                    continue;
                }
                let (_, diam) =
                    projection_image(g, target, &family.cosets[j].subspace.vertices);
                if diam >= family.xi_threshold {
                    row.push((i, j, diam));
                }
            }
            row
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// The subgroup-level intersection behind the ordered coset pair `(i, j)`:
/// for cosets `aH` and `bJ` with conjugator `c = a⁻¹b`, the trace of
/// `H ∩ cJc⁻¹`, i.e. every `h` in `H`'s trace whose conjugate `c⁻¹hc`
/// lands on `J`'s trace. Elements whose conjugate leaves the ball are
/// skipped — word arithmetic only reaches where labels exist.
fn subgroup_intersection(family: &CosetFamily, i: usize, j: usize) -> Vec<usize> {
    let ball = family.ball;
    let h = &family.subgroups[family.cosets[i].subgroup];
    let jj = &family.subgroups[family.cosets[j].subgroup];
    let a = &family.cosets[i].representative;
    let b = &family.cosets[j].representative;
    let c = ball.normal_form(&format!("{}{b}", invert_word(a)));
    let c_inv = invert_word(&c);
    h.vertices
        .iter()
        .copied()
        .filter(|&hv| {
            ball.id_of(&format!("{c_inv}{}{c}", ball.word(hv)))
                .is_some_and(|v| jj.vertices.binary_search(&v).is_ok())
        })
        .collect()
}

/// Realize the intersection subgroup of the proximal pair `(i, j)` inside
/// the ball: the vertex set of `a(H ∩ cJc⁻¹)` for cosets `aH`, `bJ` and
/// conjugator `c = a⁻¹b`, computed by word arithmetic. The result is
/// asserted to lie within `2|c| + 2δ + 2K` of the projection of `bJ` on
/// `aH` — the containment that justifies reading the intersection off the
/// projection in the first place. A pair below the `xi` cutoff is not
/// proximal and is an argument error.
pub fn intersection_approx(family: &CosetFamily, i: usize, j: usize) -> Result<SubspaceRef> {
    let m = family.cosets.len();
    if i >= m || j >= m {
        return Err(Error::InvalidArgument(format!(
            "coset indices ({i}, {j}) out of range for family with {m} cosets"
        )));
    }
    let ball = family.ball;
    let g = &ball.graph;
    let target = &family.cosets[i].subspace.vertices;
    let (image, diam) = projection_image(g, target, &family.cosets[j].subspace.vertices);
    if diam < family.xi_threshold {
        return Err(Error::NotProximal { i, j, diam, threshold: family.xi_threshold });
    }

    let a = family.cosets[i].representative.clone();
    let b = &family.cosets[j].representative;
    let c = ball.normal_form(&format!("{}{b}", invert_word(&a)));
    let sub = subgroup_intersection(family, i, j);
    let mut vertices: Vec<usize> = sub
        .iter()
        .filter_map(|&hv| ball.id_of(&format!("{a}{}", ball.word(hv))))
        .collect();
    vertices.sort_unstable();
    vertices.dedup();

    let bound = 2 * c.len() as u32 + 2 * family.delta + 2 * family.k;
    let to_image = g.dist_to_set(&image);
    let defect =
        vertices.iter().map(|&v| u32::from(to_image[v])).max().unwrap_or(0);
    if defect > bound {
        return Err(Error::BoundViolated {
            check: "lateral conjugate containment",
            measured: f64::from(defect),
            bound: f64::from(bound),
        });
    }

    let hi = family.cosets[i].subgroup;
    let hj = family.cosets[j].subgroup;
    let conj = if c.is_empty() {
        format!("F{hj}")
    } else {
        format!("{c}·F{hj}·{}", invert_word(&c))
    };
    let name = if a.is_empty() {
        format!("F{hi}∩{conj}")
    } else {
        format!("{a}·(F{hi}∩{conj})")
    };
    SubspaceRef::new(g, &name, vertices)
}

/// Iterate the closure: enumerate cosets, find proximal pairs, take their
/// intersection subgroups, keep those that land in a new Hausdorff class
/// (at scale `R = 2K + 8δ + 2`), and repeat until nothing new appears or
/// the height cap is hit. Inputs are level 0; the cutoff and class scale
/// are re-measured every level as the family's gauge grows.
pub fn prox_closure(
    ball: &CayleyBall,
    subgroups: &[Vec<String>],
    height_cap: usize,
) -> Result<ClosureTrace> {
    if height_cap == 0 {
        return Err(Error::InvalidArgument("height cap must be at least 1".into()));
    }
    let g = &ball.graph;
    let mut members = build_reps(ball, subgroups)?;
    let mut levels = vec![members.clone()];
    let mut added_per_level: Vec<Vec<String>> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut stabilized_at = None;
    let mut xi_used = 0;
    let mut r_used = 0;

    for level in 0..height_cap {
        let fam = family_of(ball, &members, 0)?;
        xi_used = fam.xi_threshold;
        r_used = fam.r_used();
        let pairs = proximal_pairs(&fam);
        if pairs.is_empty() {
            notes.push(format!("level {level}: no proximal pairs at xi = {xi_used}"));
            stabilized_at = Some(level);
            break;
        }

        // Candidate subgroups, deduplicated by trace; traces of at most one
        // point certify nothing and are dropped.
        let mut candidates: BTreeMap<Vec<usize>, String> = BTreeMap::new();
        for &(i, j, _) in &pairs {
            let set = subgroup_intersection(&fam, i, j);
            if set.len() >= 2 && !members.iter().any(|m| m.vertices == set) {
                candidates.entry(set).or_insert_with(|| {
                    format!(
                        "F{}∩F{} via {}",
                        fam.cosets[i].subgroup,
                        fam.cosets[j].subgroup,
                        coset_name(&fam.cosets[j].representative, fam.cosets[j].subgroup),
                    )
                });
            }
        }
        if candidates.is_empty() {
            notes.push(format!(
                "level {level}: {} proximal pairs, every intersection trivial or already a member",
                pairs.len()
            ));
            stabilized_at = Some(level);
            break;
        }

        // Canonicalize: a candidate founds a new member only if its whole
        // Hausdorff class is free of existing members.
        let mut refs: Vec<SubspaceRef> = members
            .iter()
            .map(|m| SubspaceRef::new(g, &m.name, m.vertices.clone()))
            .collect::<Result<_>>()?;
        for (t, set) in candidates.keys().enumerate() {
            refs.push(SubspaceRef::new(g, &format!("candidate {t}"), set.clone())?);
        }
        let classes = equivalence_classes(g, &refs, r_used);
        let existing = members.len();
        let mut added = Vec::new();
        for class in &classes.classes {
            if class.iter().all(|&ix| ix >= existing) {
                let set = refs[class[0]].vertices.clone();
                let name = format!("F{}", members.len() + added.len());
                added.push(SubgroupRep {
                    name,
                    generators: set
                        .iter()
                        .filter(|&&v| v != 0)
                        .map(|&v| ball.word(v).to_string())
                        .collect(),
                    vertices: set,
                    level: level + 1,
                });
            }
        }
        if added.is_empty() {
            notes.push(format!(
                "level {level}: {} intersection sets all fell into existing Hausdorff classes",
                candidates.len()
            ));
            stabilized_at = Some(level);
            break;
        }
        added_per_level.push(added.iter().map(|m| m.name.clone()).collect());
        members.extend(added);
        levels.push(members.clone());
    }
    if stabilized_at.is_none() {
        notes.push(format!(
            "height cap {height_cap} reached with the family still growing; trace is valid but non-stabilized"
        ));
    }

    // Final classes of the member subgroups themselves, plus the rim flags:
    // a multi-member class whose evidence touches the truncation boundary
    // could merge or split differently at a larger radius.
    let refs: Vec<SubspaceRef> = members
        .iter()
        .map(|m| SubspaceRef::new(g, &m.name, m.vertices.clone()))
        .collect::<Result<_>>()?;
    let classes = equivalence_classes(g, &refs, r_used);
    let final_classes: Vec<Vec<String>> = classes
        .classes
        .iter()
        .map(|c| c.iter().map(|&ix| members[ix].name.clone()).collect())
        .collect();
    let boundary = g.boundary();
    let boundary_flagged: Vec<String> = classes
        .classes
        .iter()
        .filter(|c| {
            c.len() >= 2
                && c.iter().any(|&ix| {
                    members[ix].vertices.iter().any(|v| boundary.binary_search(v).is_ok())
                })
        })
        .flat_map(|c| c.iter().map(|&ix| members[ix].name.clone()))
        .collect();

    Ok(ClosureTrace {
        levels,
        stabilized_at,
        added_per_level,
        xi_threshold: xi_used,
        r_used,
        core_margin: r_used,
        final_classes,
        max_intra_hausdorff: classes.max_intra_hausdorff,
        boundary_flagged,
        notes,
    })
}

/// Run the weak-factor-system check on the closed family's cosets,
/// restricted to those meeting the ball core at the trace's margin. The
/// margin equals the Hausdorff-class scale: a coset living entirely within
/// it of the boundary is a truncation stub whose distances to its
/// neighbors are artifacts of the cut, not of the group.
pub fn closure_family(
    ball: &CayleyBall,
    trace: &ClosureTrace,
    theta_max: u32,
) -> Result<(FactorFamily, FactorReport)> {
    let members = trace.levels.last().expect("trace has at least level 0");
    let fam = family_of(ball, members, trace.xi_threshold)?;
    let kept = fam.core_cosets(trace.core_margin);
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "core margin {} leaves no cosets",
            trace.core_margin
        )));
    }
    let refs: Vec<SubspaceRef> =
        kept.into_iter().map(|ix| fam.cosets[ix].subspace.clone()).collect();
    check_weak_factor_system(&ball.graph, &refs, theta_max)
}

/// Brute-force the largest `c ≤ c_max` such that some `c` distinct
/// conjugates of the subgroups (conjugators ranging over every ball word)
/// are pairwise proximal at the cutoff `xi` — each ordered projection
/// between them reaching `xi`. Distinctness is distinctness of ball
/// traces; conjugates tracing a single point are dropped. `c_max` is
/// capped at 4: the search is exhaustive and meant for desk scale.
pub fn height_probe(
    ball: &CayleyBall,
    subgroups: &[Vec<String>],
    xi: u32,
    c_max: usize,
) -> Result<u32> {
    if !(1..=4).contains(&c_max) {
        return Err(Error::InvalidArgument(format!(
            "c_max must be between 1 and 4, got {c_max}"
        )));
    }
    let g = &ball.graph;
    let reps = build_reps(ball, subgroups)?;
    let delta = delta_thin(g)? as u32;
    let k = reps
        .iter()
        .map(|m| {
            SubspaceRef::new(g, &m.name, m.vertices.clone())
                .map(|r| quasiconvexity_gauge(g, &r))
        })
        .collect::<Result<Vec<u32>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let xi = xi.max(8 * delta + 2 * k + 1);

    let mut sets: Vec<Vec<usize>> = Vec::new();
    {
        let mut seen: BTreeMap<Vec<usize>, ()> = BTreeMap::new();
        for rep in &reps {
            for gid in 0..g.n() {
                let gw = ball.word(gid).to_string();
                let gi = invert_word(&gw);
                let mut s: Vec<usize> = rep
                    .vertices
                    .iter()
                    .filter_map(|&h| ball.id_of(&format!("{gw}{}{gi}", ball.word(h))))
                    .collect();
                s.sort_unstable();
                s.dedup();
                if s.len() >= 2 {
                    seen.entry(s).or_insert(());
                }
            }
        }
        sets.extend(seen.into_keys());
    }
    let m = sets.len();
    if m == 0 {
        return Ok(0);
    }

    let adj: Vec<Vec<bool>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| {
                    i != j
                        && projection_image(g, &sets[i], &sets[j]).1 >= xi
                        && projection_image(g, &sets[j], &sets[i]).1 >= xi
                })
                .collect()
        })
        .collect();

    fn extend(adj: &[Vec<bool>], clique: &mut Vec<usize>, start: usize, k: usize) -> bool {
        if clique.len() == k {
            return true;
        }
        for v in start..adj.len() {
            if clique.iter().all(|&u| adj[u][v]) {
                clique.push(v);
                if extend(adj, clique, v + 1, k) {
                    return true;
                }
                clique.pop();
            }
        }
        false
    }
    for size in (2..=c_max.min(m)).rev() {
        if extend(&adj, &mut Vec::new(), 0, size) {
            return Ok(size as u32);
        }
    }
    Ok(1)
}
