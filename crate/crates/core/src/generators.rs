//! Graph generators: Cayley-graph balls, approximation graphs of finite
//! metric data, and the wedge-of-rays fixture.
//!
//! Cayley balls are built from a user-supplied shortlex-reducing rewriting
//! system. Identity of group elements is *defined* by the deterministic
//! normal form of that system; a confluence check (exhaustive re-reduction
//! of all short words under two rule orders) rejects systems that visibly
//! disagree at ball scale. No completion is attempted — for non-free groups
//! the caller must supply rules that are already confluent at the radius
//! they ask for.
//!
//! Conventions baked in here and relied on everywhere else:
//!
//! * letters are single ASCII characters, lowercase for generators and
//!   uppercase for their inverses, ordered `a < A < b < B < ...` following
//!   the generator list;
//! * vertex ids are shortlex ranks, assigned layer by layer, with the
//!   identity at id 0;
//! * the ball keeps an edge only when both endpoints lie inside it, and the
//!   sphere of maximal radius is recorded as the graph boundary so callers
//!   can core-restrict away truncation artifacts;
//! * generation is single-threaded — enumeration order is part of the
//!   contract.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MetricGraph;

/// A group presentation packaged with a rewriting system and ball radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresentationSpec {
    /// Generator symbols, each one ASCII lowercase letter.
    pub generators: Vec<String>,
    /// Ordered rewriting rules (lhs, rhs), each strictly shortlex-reducing.
    pub rules: Vec<(String, String)>,
    /// Ball radius (positive).
    pub radius: usize,
}

impl PresentationSpec {
    /// The letter alphabet in canonical order: `g, G` per generator.
    pub fn letters(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 * self.generators.len());
        for g in &self.generators {
            let c = g.as_bytes()[0];
            out.push(c);
            out.push(c.to_ascii_uppercase());
        }
        out
    }

    fn letter_rank(&self, c: u8) -> Option<usize> {
        self.letters().iter().position(|&l| l == c)
    }

    fn shortlex_less(&self, a: &[u8], b: &[u8]) -> bool {
        if a.len() != b.len() {
            return a.len() < b.len();
        }
        for (&x, &y) in a.iter().zip(b) {
            let (rx, ry) = (self.letter_rank(x), self.letter_rank(y));
            if rx != ry {
                return rx < ry;
            }
        }
        false
    }

    /// Structural validation: letter alphabet, rule shapes, reduction
    /// property, and presence of free reduction for every generator.
    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return Err(Error::InvalidArgument("radius must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for g in &self.generators {
            let b = g.as_bytes();
            if b.len() != 1 || !b[0].is_ascii_lowercase() {
                return Err(Error::InvalidArgument(format!(
                    "generator '{g}' must be a single ASCII lowercase letter"
                )));
            }
            if !seen.insert(b[0]) {
                return Err(Error::InvalidArgument(format!("duplicate generator '{g}'")));
            }
        }
        for (lhs, rhs) in &self.rules {
            if lhs.is_empty() {
                return Err(Error::InvalidArgument("rule with empty left-hand side".into()));
            }
            for c in lhs.bytes().chain(rhs.bytes()) {
                if self.letter_rank(c).is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "rule '{lhs}' -> '{rhs}' uses unknown letter '{}'",
                        c as char
                    )));
                }
            }
            if !self.shortlex_less(rhs.as_bytes(), lhs.as_bytes()) {
                return Err(Error::NotReducing { lhs: lhs.clone(), rhs: rhs.clone() });
            }
        }
        for g in &self.generators {
            let lo = g.as_bytes()[0];
            let hi = lo.to_ascii_uppercase();
            for pair in [[lo, hi], [hi, lo]] {
                let want = std::str::from_utf8(&pair).unwrap();
                if !self.rules.iter().any(|(l, r)| l == want && r.is_empty()) {
                    return Err(Error::MissingFreeReduction { gen: g.clone() });
                }
            }
        }
        Ok(())
    }

    fn rule_bytes(&self) -> Vec<(Vec<u8>, Vec<u8>)> {
        self.rules.iter().map(|(l, r)| (l.clone().into_bytes(), r.clone().into_bytes())).collect()
    }
}

/// Leftmost occurrence of `needle` in `hay`.
fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Deterministic reduction: repeatedly apply the first rule (in list order)
/// that occurs anywhere, at its leftmost occurrence. Terminates because
/// every rule is shortlex-reducing.
fn reduce(rules: &[(Vec<u8>, Vec<u8>)], word: &[u8]) -> Vec<u8> {
    let mut cur = word.to_vec();
    'outer: loop {
        for (lhs, rhs) in rules {
            if let Some(pos) = find(&cur, lhs) {
                let mut next = Vec::with_capacity(cur.len() - lhs.len() + rhs.len());
                next.extend_from_slice(&cur[..pos]);
                next.extend_from_slice(rhs);
                next.extend_from_slice(&cur[pos + lhs.len()..]);
                cur = next;
                continue 'outer;
            }
        }
        return cur;
    }
}

/// Exhaustive confluence probe: every word of length at most
/// `min(2*radius, 10)` must reduce to the same normal form under the given
/// rule order and the reversed one.
fn check_confluence(spec: &PresentationSpec) -> Result<()> {
    let letters = spec.letters();
    if letters.is_empty() {
        return Ok(());
    }
    let fwd = spec.rule_bytes();
    let mut rev = fwd.clone();
    rev.reverse();
    let cap = (2 * spec.radius).min(10);
    let k = letters.len();
    let mut word = Vec::with_capacity(cap);
    for len in 1..=cap {
        let mut idx = vec![0usize; len];
        loop {
            word.clear();
            word.extend(idx.iter().map(|&i| letters[i]));
            let a = reduce(&fwd, &word);
            let b = reduce(&rev, &word);
            if a != b {
                return Err(Error::NotConfluent {
                    word: String::from_utf8_lossy(&word).into_owned(),
                    nf1: String::from_utf8_lossy(&a).into_owned(),
                    nf2: String::from_utf8_lossy(&b).into_owned(),
                });
            }
            // Odometer increment over letter indices.
            let mut pos = len;
            loop {
                if pos == 0 {
                    return if len == cap { Ok(()) } else { break };
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < k {
                    break;
                }
                idx[pos] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    Ok(())
}

/// Formal inverse of a word: reverse it and swap the case of each letter.
pub fn invert_word(w: &str) -> String {
    w.bytes()
        .rev()
        .map(|c| {
            let s = if c.is_ascii_lowercase() {
                c.to_ascii_uppercase()
            } else {
                c.to_ascii_lowercase()
            };
            s as char
        })
        .collect()
}

/// A ball in a Cayley graph: the metric graph plus the word labelling.
#[derive(Debug)]
pub struct CayleyBall {
    pub graph: MetricGraph,
    /// Vertex id to normal form; the identity is `""` at id 0.
    pub words: Vec<String>,
    index: BTreeMap<Vec<u8>, usize>,
    rules: Vec<(Vec<u8>, Vec<u8>)>,
    radius: usize,
}

impl CayleyBall {
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Normal form of an arbitrary word over the alphabet.
    pub fn normal_form(&self, w: &str) -> String {
        String::from_utf8_lossy(&reduce(&self.rules, w.as_bytes())).into_owned()
    }

    /// Vertex id of a word, if its normal form lies in the ball.
    pub fn id_of(&self, w: &str) -> Option<usize> {
        self.index.get(&reduce(&self.rules, w.as_bytes())).copied()
    }

    /// Right-multiply the element at `id` by `suffix`; `None` when the
    /// product leaves the ball.
    pub fn mul(&self, id: usize, suffix: &str) -> Option<usize> {
        let mut w = self.words[id].clone();
        w.push_str(suffix);
        self.id_of(&w)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }
}

/// Build the ball of the given radius in the Cayley graph of the
/// presentation. Vertices are normal forms, ids are shortlex ranks assigned
/// layer by layer, the identity is id 0, and the outermost sphere becomes
/// the graph boundary.
pub fn cayley_ball(spec: &PresentationSpec) -> Result<CayleyBall> {
    spec.validate()?;
    check_confluence(spec)?;
    let letters = spec.letters();
    let rules = spec.rule_bytes();

    let mut index: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    let mut words: Vec<Vec<u8>> = vec![Vec::new()];
    index.insert(Vec::new(), 0);
    let mut layer: Vec<usize> = vec![0];
    for _ in 0..spec.radius {
        let mut fresh: BTreeSet<(usize, Vec<u8>)> = BTreeSet::new();
        for &u in &layer {
            for &g in &letters {
                let mut w = words[u].clone();
                w.push(g);
                let nf = reduce(&rules, &w);
                if nf.len() <= spec.radius && !index.contains_key(&nf) {
                    // Key by (length, letter ranks) so ids come out shortlex.
                    let ranks: Vec<u8> = nf
                        .iter()
                        .map(|&c| spec.letter_rank(c).unwrap() as u8)
                        .collect();
                    fresh.insert((nf.len(), ranks));
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        let mut next_layer = Vec::with_capacity(fresh.len());
        for (_, ranks) in fresh {
            let nf: Vec<u8> = ranks.iter().map(|&r| letters[r as usize]).collect();
            let id = words.len();
            index.insert(nf.clone(), id);
            words.push(nf);
            next_layer.push(id);
        }
        layer = next_layer;
    }

    let n = words.len();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for u in 0..n {
        for &g in &letters {
            let mut w = words[u].clone();
            w.push(g);
            if let Some(&v) = index.get(&reduce(&rules, &w)) {
                if v != u {
                    edges.insert((u.min(v), u.max(v)));
                }
            }
        }
    }
    let edge_list: Vec<(usize, usize)> = edges.into_iter().collect();
    let boundary: Vec<usize> =
        (0..n).filter(|&u| words[u].len() == spec.radius).collect();
    let graph = MetricGraph::new(n, &edge_list)?.with_boundary(boundary)?;
    Ok(CayleyBall {
        graph,
        words: words
            .iter()
            .map(|w| String::from_utf8_lossy(w).into_owned())
            .collect(),
        index,
        rules,
        radius: spec.radius,
    })
}

/// Finite metric data to be approximated by a net graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetSpec {
    pub point_count: usize,
    /// Row-major `point_count^2` distance table.
    pub dist: Vec<f64>,
    pub zeta: f64,
    /// Adjacency parameter; defaults to `5 * zeta`.
    pub lambda: Option<f64>,
}

/// Cap on net input size (the metric check is cubic).
pub const MAX_NET_POINTS: usize = 3_000;

impl NetSpec {
    /// Package a graph's path metric as net input.
    pub fn from_graph(g: &MetricGraph, zeta: f64, lambda: Option<f64>) -> Self {
        let n = g.n();
        let dist = g.dist_table().iter().map(|&d| f64::from(d)).collect();
        NetSpec { point_count: n, dist, zeta, lambda }
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.point_count + j]
    }

    fn validate(&self) -> Result<()> {
        let m = self.point_count;
        if m == 0 {
            return Err(Error::EmptySet { what: "net input points" });
        }
        if m > MAX_NET_POINTS {
            return Err(Error::TooLarge { n: m, cap: MAX_NET_POINTS });
        }
        if self.dist.len() != m * m {
            return Err(Error::InvalidArgument(format!(
                "distance table has {} entries, expected {}",
                self.dist.len(),
                m * m
            )));
        }
        if !(self.zeta > 0.0) || !self.lambda.map_or(true, |l| l > 0.0) {
            return Err(Error::InvalidArgument("net parameters must be positive".into()));
        }
        for i in 0..m {
            if self.d(i, i) != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero self-distance at {i}")));
            }
            for j in 0..m {
                let d = self.d(i, j);
                if !d.is_finite() || d < 0.0 || d != self.d(j, i) {
                    return Err(Error::InvalidArgument(format!(
                        "distance table not a symmetric nonnegative metric at ({i}, {j})"
                    )));
                }
                if i != j && d == 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "distinct points {i}, {j} at distance zero"
                    )));
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    if self.d(i, j) > self.d(i, k) + self.d(k, j) + 1e-9 {
                        return Err(Error::InvalidArgument(format!(
                            "triangle inequality fails on ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Build a (ζ, λ)-approximation graph: vertices are a greedily-built maximal
/// ζ-net (ascending point-id order), edges join net points at input distance
/// at most λ. Returns the graph together with the point → nearest-net-vertex
/// map (ties broken toward the smaller net index).
pub fn approximation_graph(spec: &NetSpec) -> Result<(MetricGraph, Vec<usize>)> {
    spec.validate()?;
    let m = spec.point_count;
    let lambda = spec.lambda.unwrap_or(5.0 * spec.zeta);
    let mut net: Vec<usize> = Vec::new();
    for p in 0..m {
        if net.iter().all(|&q| spec.d(p, q) >= spec.zeta) {
            net.push(p);
        }
    }
    let mut edges = Vec::new();
    for i in 0..net.len() {
        for j in i + 1..net.len() {
            if spec.d(net[i], net[j]) <= lambda {
                edges.push((i, j));
            }
        }
    }
    let graph = MetricGraph::new(net.len(), &edges)?;
    let omega: Vec<usize> = (0..m)
        .map(|p| {
            (0..net.len())
                .min_by(|&i, &j| {
                    spec.d(p, net[i])
                        .partial_cmp(&spec.d(p, net[j]))
                        .unwrap()
                        .then(i.cmp(&j))
                })
                .unwrap()
        })
        .collect();
    Ok((graph, omega))
}

/// Wedge of `ray_count` truncated rays of length `ray_length` glued at a
/// center vertex (id 0), with arm-major vertex ids. Returns the graph and
/// the named subspaces `F1..Fk` (each `I0 ∪ In`) and `I0`, where `In` is the
/// n-th closed ray. Ray tips form the graph boundary.
pub fn star_fixture(
    ray_count: usize,
    ray_length: usize,
) -> Result<(MetricGraph, Vec<(String, Vec<usize>)>)> {
    if ray_count == 0 || ray_length == 0 {
        return Err(Error::InvalidArgument("star fixture needs positive ray count and length".into()));
    }
    let n = 1 + ray_count * ray_length;
    let mut edges = Vec::with_capacity(n - 1);
    for k in 0..ray_count {
        let first = 1 + k * ray_length;
        edges.push((0, first));
        for i in 0..ray_length - 1 {
            edges.push((first + i, first + i + 1));
        }
    }
    let ray = |k: usize| -> Vec<usize> {
        let mut v = vec![0];
        v.extend(1 + k * ray_length..1 + (k + 1) * ray_length);
        v
    };
    let i0 = ray(0);
    let mut subspaces = Vec::new();
    for k in 0..ray_count {
        let mut f: Vec<usize> = i0.iter().copied().chain(ray(k)).collect();
        f.sort_unstable();
        f.dedup();
        subspaces.push((format!("F{}", k + 1), f));
    }
    subspaces.push(("I0".to_string(), i0));
    let boundary: Vec<usize> = (1..=ray_count).map(|k| k * ray_length).collect();
    let graph = MetricGraph::new(n, &edges)?.with_boundary(boundary)?;
    Ok((graph, subspaces))
}

/// Ready-made presentation of the free group on `gens` letters.
pub fn free_group(gens: &[&str], radius: usize) -> PresentationSpec {
    let mut rules = Vec::new();
    for g in gens {
        let lo = g.to_string();
        let hi = lo.to_ascii_uppercase();
        rules.push((format!("{lo}{hi}"), String::new()));
        rules.push((format!("{hi}{lo}"), String::new()));
    }
    PresentationSpec {
        generators: gens.iter().map(|s| s.to_string()).collect(),
        rules,
        radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolicity::delta_thin;

    #[test]
    fn f2_radius2_ball_has_17_vertices_and_is_a_tree() {
        let ball = cayley_ball(&free_group(&["a", "b"], 2)).unwrap();
        assert_eq!(ball.graph.n(), 17);
        assert_eq!(ball.graph.edges().len(), 16);
        assert_eq!(delta_thin(&ball.graph).unwrap(), 0.0);
    }

    #[test]
    fn vertex_ids_are_shortlex_ranks() {
        let ball = cayley_ball(&free_group(&["a", "b"], 2)).unwrap();
        let expect = [
            "", "a", "A", "b", "B", "aa", "ab", "aB", "AA", "Ab", "AB", "ba", "bA", "bb", "Ba",
            "BA", "BB",
        ];
        assert_eq!(ball.words, expect);
        assert_eq!(ball.id_of("ba"), Some(11));
        assert_eq!(ball.id_of("abB"), Some(1));
        assert_eq!(ball.id_of("bab"), None);
        // Boundary is the outer sphere.
        assert_eq!(ball.graph.boundary(), &(5..17).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn z_radius5_ball_is_the_path_p11() {
        let ball = cayley_ball(&free_group(&["a"], 5)).unwrap();
        let g = &ball.graph;
        assert_eq!(g.n(), 11);
        assert_eq!(g.edges().len(), 10);
        let leaves = (0..11).filter(|&v| g.neighbors(v).len() == 1).count();
        assert_eq!(leaves, 2);
        assert_eq!(g.d(ball.id_of("aaaaa").unwrap(), ball.id_of("AAAAA").unwrap()), 10);
    }

    #[test]
    fn trivial_group_gives_single_vertex() {
        let spec = PresentationSpec { generators: vec![], rules: vec![], radius: 4 };
        let ball = cayley_ball(&spec).unwrap();
        assert_eq!(ball.graph.n(), 1);
        assert_eq!(ball.words, vec![""]);
    }

    fn z5_spec(radius: usize) -> PresentationSpec {
        PresentationSpec {
            generators: vec!["a".into()],
            rules: vec![
                ("aA".into(), "".into()),
                ("Aa".into(), "".into()),
                ("aaa".into(), "AA".into()),
                ("AAA".into(), "aa".into()),
            ],
            radius,
        }
    }

    #[test]
    fn z5_ball_saturates_to_a_five_cycle() {
        let ball = cayley_ball(&z5_spec(4)).unwrap();
        let g = &ball.graph;
        assert_eq!(g.n(), 5);
        assert_eq!(g.edges().len(), 5);
        assert!((0..5).all(|v| g.neighbors(v).len() == 2));
        // Saturated finite group: no outer sphere, so no boundary.
        assert!(g.boundary().is_empty());
    }

    #[test]
    fn missing_free_reduction_is_rejected() {
        let mut spec = free_group(&["a", "b"], 2);
        spec.rules.retain(|(l, _)| l != "Aa");
        match cayley_ball(&spec) {
            Err(Error::MissingFreeReduction { gen }) => assert_eq!(gen, "a"),
            other => panic!("expected MissingFreeReduction, got {other:?}"),
        }
    }

    #[test]
    fn non_reducing_rule_is_rejected() {
        let mut spec = free_group(&["a"], 2);
        spec.rules.push(("aa".into(), "aA".into()));
        assert!(matches!(cayley_ball(&spec), Err(Error::NotReducing { .. })));
    }

    #[test]
    fn order_dependent_system_is_rejected_with_witness() {
        let mut spec = free_group(&["a", "b"], 3);
        spec.rules.push(("aa".into(), "".into()));
        spec.rules.push(("ab".into(), "".into()));
        match cayley_ball(&spec) {
            Err(Error::NotConfluent { word, nf1, nf2 }) => {
                assert_ne!(nf1, nf2);
                // The witness really reduces to both claimed forms.
                let fwd = spec.rule_bytes();
                let mut rev = fwd.clone();
                rev.reverse();
                assert_eq!(reduce(&fwd, word.as_bytes()), nf1.as_bytes());
                assert_eq!(reduce(&rev, word.as_bytes()), nf2.as_bytes());
            }
            other => panic!("expected NotConfluent, got {other:?}"),
        }
    }

    #[test]
    fn left_multiplication_is_a_partial_isometry_on_free_balls() {
        let ball = cayley_ball(&free_group(&["a", "b"], 3)).unwrap();
        let r = ball.radius();
        let inner: Vec<usize> =
            (0..ball.graph.n()).filter(|&u| ball.words[u].len() + 1 <= r).collect();
        for g in ["a", "A", "b", "B"] {
            let image: Vec<Option<usize>> = (0..ball.graph.n())
                .map(|u| {
                    let w = format!("{g}{}", ball.words[u]);
                    let nf = ball.normal_form(&w);
                    if nf.len() + 1 <= r { ball.id_of(&nf) } else { None }
                })
                .collect();
            for &u in &inner {
                for &v in &inner {
                    if let (Some(gu), Some(gv)) = (image[u], image[v]) {
                        assert_eq!(ball.graph.d(gu, gv), ball.graph.d(u, v));
                    }
                }
            }
        }
    }

    #[test]
    fn invert_word_reverses_and_swaps_case() {
        assert_eq!(invert_word("abA"), "aBA");
        assert_eq!(invert_word(""), "");
        let ball = cayley_ball(&free_group(&["a", "b"], 3)).unwrap();
        for u in 0..ball.graph.n() {
            let w = ball.words[u].clone();
            let prod = format!("{}{}", w, invert_word(&w));
            assert_eq!(ball.id_of(&prod), Some(0));
        }
    }

    #[test]
    fn star_fixture_shapes_and_subspaces() {
        let (g, subs) = star_fixture(3, 4).unwrap();
        assert_eq!(g.n(), 13);
        let names: Vec<&str> = subs.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["F1", "F2", "F3", "I0"]);
        let i0 = &subs[3].1;
        assert_eq!(i0, &vec![0, 1, 2, 3, 4]);
        assert_eq!(subs[1].1, vec![0, 1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(g.boundary(), &[4, 8, 12]);

        let (p6, subs1) = star_fixture(1, 5).unwrap();
        assert_eq!(p6.n(), 6);
        assert_eq!(subs1.last().unwrap().1.len(), 6);

        let (p3, _) = star_fixture(2, 1).unwrap();
        assert_eq!(p3.n(), 3);
        assert_eq!(p3.d(1, 2), 2);
    }

    fn path_metric(n: usize) -> NetSpec {
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = (i as f64 - j as f64).abs();
            }
        }
        NetSpec { point_count: n, dist, zeta: 1.0, lambda: None }
    }

    #[test]
    fn net_with_zeta_one_reproduces_the_path() {
        let mut spec = path_metric(10);
        spec.lambda = Some(1.0);
        let (g, omega) = approximation_graph(&spec).unwrap();
        assert_eq!(g.n(), 10);
        assert_eq!(g.edges().len(), 9);
        assert_eq!(omega, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn net_zeta_two_on_p10_matches_lemma_bounds() {
        let mut spec = path_metric(10);
        spec.zeta = 2.0;
        spec.lambda = Some(10.0);
        let (g, omega) = approximation_graph(&spec).unwrap();
        // Greedy ascending net {0, 2, 4, 6, 8}, in id order.
        assert_eq!(g.n(), 5);
        assert_eq!([omega[0], omega[2], omega[4], omega[6], omega[8]], [0, 1, 2, 3, 4]);
        // Two-sided approximation bound with (C, eps) = (1, 0) input.
        let zeta = spec.zeta;
        for x in 0..10usize {
            for y in 0..10usize {
                let dx = (x as f64 - y as f64).abs();
                let dg = f64::from(g.d(omega[x], omega[y]));
                assert!(dx / (5.0 * zeta) - 5.0 * zeta <= dg);
                assert!(dg <= dx + 1.0);
            }
        }
        assert_eq!(omega[9], 4, "9 snaps to net point 8");
        assert_eq!(omega[1], 0, "ties break to the smaller net index");
    }

    #[test]
    fn oversized_zeta_collapses_to_one_vertex() {
        let mut spec = path_metric(10);
        spec.zeta = 20.0;
        let (g, omega) = approximation_graph(&spec).unwrap();
        assert_eq!(g.n(), 1);
        assert!(omega.iter().all(|&v| v == 0));
    }

    #[test]
    fn undersized_lambda_is_a_structural_error() {
        let mut spec = path_metric(10);
        spec.zeta = 2.0;
        spec.lambda = Some(1.0);
        assert!(matches!(approximation_graph(&spec), Err(Error::Disconnected { .. })));
    }

    #[test]
    fn bad_metric_tables_are_rejected() {
        let mut spec = path_metric(4);
        spec.dist[1] = 7.0; // breaks symmetry
        assert!(matches!(approximation_graph(&spec), Err(Error::InvalidArgument(_))));
        let mut spec = path_metric(4);
        spec.dist[3] = 100.0;
        spec.dist[12] = 100.0; // breaks the triangle inequality
        assert!(matches!(approximation_graph(&spec), Err(Error::InvalidArgument(_))));
    }
}
