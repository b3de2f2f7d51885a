use std::time::Instant;

use coarseforge::closure::{coset_family, prox_closure};
use coarseforge::coning::{cone_off, nineteen_pieces_check, pigeonhole_check};
use coarseforge::deelect::{algo_constants, good_quasigeodesic};
use coarseforge::generators::{cayley_ball, free_group};
use coarseforge::graph::MetricGraph;
use coarseforge::hyperbolicity::delta_thin;
use coarseforge::rng::XorShift64Star;
use coarseforge::subspace::{behrstock_second, projection_lipschitz_defect, SubspaceRef};

fn random_tree(rng: &mut XorShift64Star, n: usize) -> MetricGraph {
    let mut edges = Vec::with_capacity(n - 1);
    for v in 1..n {
        let parent = rng.below(v);
        edges.push((parent, v));
    }
    MetricGraph::new(n, &edges).unwrap()
}

fn coned_a(radius: usize) -> (coarseforge::generators::CayleyBall, coarseforge::ConedGraph) {
    let ball = cayley_ball(&free_group(&["a", "b"], radius)).unwrap();
    let fam = coset_family(&ball, &[vec!["a".into()]], 0).unwrap();
    let keep = fam.core_cosets(fam.r_used());
    let members: Vec<SubspaceRef> =
        keep.iter().map(|&i| fam.cosets[i].subspace.clone()).collect();
    eprintln!("radius {radius}: n={} members={}", ball.graph.n(), members.len());
    let cg = cone_off(ball.graph.clone(), members).unwrap();
    (ball, cg)
}

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let run = |name: &str| which.is_empty() || which.iter().any(|w| w == name);

    if run("c1") {
        let t = Instant::now();
        let mut rng = XorShift64Star::new(42);
        for i in 0..50 {
            let n = 2 + rng.below(299);
            let g = random_tree(&mut rng, n);
            assert_eq!(delta_thin(&g).unwrap(), 0.0, "tree {i}");
        }
        eprintln!("c1 trees: {:?}", t.elapsed());
    }

    if run("c2") {
        let t = Instant::now();
        let ball = cayley_ball(&free_group(&["a", "b"], 6)).unwrap();
        let fam = coset_family(&ball, &[vec!["a".into()]], 0).unwrap();
        let keep = fam.core_cosets(fam.r_used());
        let g = &ball.graph;
        let delta = delta_thin(g).unwrap();
        let mut rng = XorShift64Star::new(7);
        let mut total = 0usize;
        for i in 0..1000usize {
            let h = &fam.cosets[keep[i % keep.len()]].subspace;
            let a = rng.below(g.n());
            let a2 = rng.below(g.n());
            let k = coarseforge::subspace::quasiconvexity_gauge(g, h);
            let v = coarseforge::subspace::check_quadrilateral(g, h, a, a2, delta, k);
            total += v.len();
        }
        eprintln!("c2 quadrilateral: violations={total} {:?}", t.elapsed());
    }

    if run("c3") {
        let t = Instant::now();
        let ball = cayley_ball(&free_group(&["a", "b"], 5)).unwrap();
        let fam = coset_family(&ball, &[vec!["a".into()]], 0).unwrap();
        let keep = fam.core_cosets(fam.r_used());
        let g = &ball.graph;
        let delta = delta_thin(g).unwrap();
        let mut worst = 0u32;
        for &i in &keep {
            let h = &fam.cosets[i].subspace;
            worst = worst.max(projection_lipschitz_defect(g, h));
        }
        let mut bworst = 0u32;
        let mut bpairs = 0usize;
        for &i in &keep {
            for &j in &keep {
                let v = &fam.cosets[i].subspace;
                let w = &fam.cosets[j].subspace;
                if !v.is_subset_of(w) {
                    continue;
                }
                let k = coarseforge::subspace::quasiconvexity_gauge(g, w);
                let (m, viol) = behrstock_second(g, v, w, delta, k).unwrap();
                assert!(viol.is_empty());
                bworst = bworst.max(m);
                bpairs += 1;
            }
        }
        eprintln!(
            "c3 f2 r5: defect_worst={worst} behrstock pairs={bpairs} worst={bworst} {:?}",
            t.elapsed()
        );
    }

    if run("c4") {
        let (_, cg) = coned_a(6);
        for theta in [2u32, 3] {
            let t = Instant::now();
            let v = pigeonhole_check(&cg, theta).unwrap();
            eprintln!("c4 theta={theta}: violations={} {:?}", v.len(), t.elapsed());
        }
    }

    if run("c5") {
        let t = Instant::now();
        let (_, cg) = coned_a(5);
        let c = algo_constants(&cg).unwrap();
        eprintln!("c5 constants: delta={} k={} big_delta={}", c.delta, c.k, c.big_delta);
        let core = cg.base.core(c.big_delta);
        let mut rng = XorShift64Star::new(13);
        let mut runs = 0;
        'outer: for d in 4u32..=10 {
            let mut got = 0;
            let mut tries = 0;
            while got < 15 {
                tries += 1;
                if tries > 100000 {
                    eprintln!("d={d}: exhausted ({got} found)");
                    continue 'outer;
                }
                let x = core[rng.below(core.len())];
                let y = core[rng.below(core.len())];
                if cg.base.d(x, y) != d {
                    continue;
                }
                let gq = good_quasigeodesic(&cg, x, y).unwrap();
                assert!(gq.diagnostics.is_empty(), "diag at d={d}");
                let eps = gq.constants.tau2.as_ref().unwrap().best.1;
                if got == 0 {
                    eprintln!("d={d} first eps={eps}");
                }
                got += 1;
                runs += 1;
            }
        }
        eprintln!("c5 ladder: {runs} runs {:?}", t.elapsed());
    }

    if run("c6") {
        let (_, cg) = coned_a(6);
        let delta = delta_thin(&cg.base).unwrap() as u32;
        let core = cg.base.core(1);
        let mut rng = XorShift64Star::new(99);
        let mut pairs = Vec::new();
        while pairs.len() < 500 {
            let x = core[rng.below(core.len())];
            let y = core[rng.below(core.len())];
            if x != y {
                pairs.push((x, y));
            }
        }
        let t = Instant::now();
        let rep = nineteen_pieces_check(&cg, delta, &pairs).unwrap();
        eprintln!(
            "c6: pieces={}/{} gap={}/{} off={}/{} viol={} {:?}",
            rep.max_pieces,
            rep.p_bound,
            rep.max_endpoint_gap,
            rep.endpoint_bound,
            rep.max_offtrack,
            rep.offtrack_bound,
            rep.violations.len(),
            t.elapsed()
        );
    }

    if run("c8") {
        let t = Instant::now();
        let ball = cayley_ball(&free_group(&["a", "b"], 6)).unwrap();
        let trace =
            prox_closure(&ball, &[vec!["a".into()], vec!["b".into()]], 4).unwrap();
        eprintln!(
            "c8 f2: stabilized_at={:?} levels={} final={} {:?}",
            trace.stabilized_at,
            trace.levels.len(),
            trace.levels.last().unwrap().len(),
            t.elapsed()
        );
        let t = Instant::now();
        let zball = cayley_ball(&free_group(&["a"], 30)).unwrap();
        let ztrace =
            prox_closure(&zball, &[vec!["aa".into()], vec!["aaa".into()]], 4).unwrap();
        eprintln!(
            "c8 z30: stabilized_at={:?} levels={} final={} classes={:?} {:?}",
            ztrace.stabilized_at,
            ztrace.levels.len(),
            ztrace.levels.last().unwrap().len(),
            ztrace.final_classes,
            t.elapsed()
        );
    }
}
