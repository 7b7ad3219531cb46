use proptest::prelude::*;
use rand::Rng;

use weakconc::chain::{lemma1_bound, lemma2_bound, random_discrete_chain, solve_hitting, continuization_check};
use weakconc::coverage::{coverage_from_draws, CoverageGraph};
use weakconc::families::random_gnp;
use weakconc::fpp::{fpp_chain_spec, prop4_check, sample_traversal, shortest_path};
use weakconc::graph::{min_cut_weight, parse_edge_list, Multigraph, VertexSubset, WeightedGraph};
use weakconc::multigraph::{max_spanning_tree_packing, max_triangle_packing};
use weakconc::rng;
use weakconc::stats::{f_k_eval, l0_norm_estimate, spearman};

fn graph_from(seed: u64, n: usize, p: f64) -> WeightedGraph {
    random_gnp(n, p, (0.1, 10.0), &mut rng::stream(seed, 0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_list_round_trip(seed in any::<u64>(), n in 2usize..9, p in 0.2f64..1.0) {
        let g = graph_from(seed, n, p);
        let h = parse_edge_list(&g.to_edge_list()).unwrap();
        prop_assert_eq!(h.vertex_count(), g.vertex_count());
        prop_assert_eq!(h.edge_count(), g.edge_count());
        prop_assert!((h.total_rate() - g.total_rate()).abs() < 1e-9);
    }

    #[test]
    fn min_cut_is_the_smallest_cut(seed in any::<u64>(), n in 2usize..8, p in 0.3f64..1.0, mask in any::<u64>()) {
        let g = graph_from(seed, n, p);
        let mc = min_cut_weight(&g).unwrap();
        let full = VertexSubset::full(n).0;
        let s = VertexSubset(mask & full);
        if s.0 != 0 && s.0 != full {
            prop_assert!(mc.weight <= g.cut_weight(s) + 1e-9);
            prop_assert!((g.cut_weight(s) - g.cut_weight(VertexSubset(full & !s.0))).abs() < 1e-9);
        }
        let min_deg = (0..n).map(|v| g.weighted_degree(v)).fold(f64::INFINITY, f64::min);
        prop_assert!(mc.weight <= min_deg + 1e-9);
    }

    #[test]
    fn exact_solver_identities(seed in any::<u64>(), n in 2usize..9, p in 0.3f64..1.0) {
        let g = graph_from(seed, n, p);
        let sol = solve_hitting(&fpp_chain_spec(&g, 0, n - 1).unwrap()).unwrap();
        prop_assert!(sol.martingale_residual() <= 1e-9);
        prop_assert!(sol.occupation_residual() <= 1e-9 * sol.expected_time.max(1.0));
        prop_assert!(sol.variance >= 0.0);
        prop_assert!((sol.variance - sol.variance_second_moment).abs() <= 1e-8 * sol.variance.max(1.0));
        let l1 = lemma1_bound(&sol).unwrap();
        prop_assert!(l1.holds);
        prop_assert!(prop4_check(&sol, &g).holds);
        for d in [0.05, 0.2, 0.5] {
            prop_assert!(lemma2_bound(&sol, d, 0.1).unwrap().holds);
        }
    }

    #[test]
    fn continuization_identity(seed in any::<u64>(), dim in 1usize..6) {
        let chain = random_discrete_chain(dim, &mut rng::stream(seed, 0));
        prop_assert!(continuization_check(&chain).unwrap().holds);
    }

    #[test]
    fn shortest_paths_are_minimal(seed in any::<u64>(), n in 2usize..10, p in 0.2f64..1.0) {
        let g = graph_from(seed, n, p);
        let xi = sample_traversal(&g, &mut rng::stream(seed, 1));
        // Bellman-Ford reference distances.
        let mut dist = vec![f64::INFINITY; n];
        dist[0] = 0.0;
        for _ in 0..n {
            for (e, edge) in g.edges().iter().enumerate() {
                let t = xi.0[e];
                if dist[edge.u] + t < dist[edge.v] { dist[edge.v] = dist[edge.u] + t; }
                if dist[edge.v] + t < dist[edge.u] { dist[edge.u] = dist[edge.v] + t; }
            }
        }
        let r = shortest_path(&g, &xi, 0, n - 1).unwrap();
        prop_assert!((r.time - dist[n - 1]).abs() <= 1e-12 * dist[n - 1].max(1.0));
        let sum: f64 = r.edges.iter().map(|&e| xi.0[e]).sum();
        prop_assert_eq!(sum, r.time);
        prop_assert!(r.max_edge_time <= r.time);
        let mut seen = r.vertices.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), r.vertices.len());
        prop_assert_eq!(r.vertices.first(), Some(&0));
        prop_assert_eq!(r.vertices.last(), Some(&(n - 1)));
    }

    #[test]
    fn l0_fixed_point(xs in prop::collection::vec(-3.0f64..3.0, 1..200)) {
        let d = l0_norm_estimate(&xs).unwrap().value;
        let n = xs.len() as f64;
        let frac = |t: f64| xs.iter().filter(|v| v.abs() > t).count() as f64 / n;
        prop_assert!(frac(d) <= d + 1e-15);
        for t in [d * 0.5, d * 0.9, d * 0.999, d - 1e-9] {
            if t >= 0.0 && t < d {
                prop_assert!(frac(t) > t);
            }
        }
    }

    #[test]
    fn spearman_is_bounded(xs in prop::collection::vec(0.0f64..1.0, 3..40)) {
        let ys: Vec<f64> = xs.iter().map(|x| (x * 7.0).sin()).collect();
        let r = spearman(&xs, &ys).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r) || r.is_nan());
        let same = spearman(&xs, &xs.iter().map(|x| x.exp()).collect::<Vec<_>>()).unwrap();
        prop_assert!((same - 1.0).abs() < 1e-12 || same.is_nan());
    }

    #[test]
    fn f_k_monotone(k in 1u32..30, s in 0.0f64..40.0, ds in 0.0f64..2.0) {
        let a = f_k_eval(k, s).unwrap().value;
        let b = f_k_eval(k, s + ds).unwrap().value;
        let c = f_k_eval(k + 1, s).unwrap().value;
        let tol = 1e-9 * a.abs().max(1e-300);
        prop_assert!(b >= a - tol);
        prop_assert!(c <= a + tol);
    }

    #[test]
    fn packings_grow_with_copies(seed in any::<u64>(), n in 3usize..6, adds in 1usize..30) {
        let g = graph_from(seed, n, 0.8);
        let mut r = rng::stream(seed, 2);
        let mut m = Multigraph::empty(&g);
        let (mut s, mut t) = (0, 0);
        for _ in 0..adds {
            m.add_copy(r.random_range(0..g.edge_count()));
            let s2 = max_spanning_tree_packing(&m);
            let t2 = max_triangle_packing(&m).lower;
            prop_assert!(s2 >= s && t2 >= t);
            prop_assert!(t2 as usize * 3 <= m.total_edges());
            prop_assert!(s2 as usize * (n - 1) <= m.total_edges());
            s = s2;
            t = t2;
        }
    }

    #[test]
    fn coverage_common_random_numbers(seed in any::<u64>(), n in 2usize..20, p in 0.0f64..0.4) {
        let mut r = rng::stream(seed, 0);
        let sub = CoverageGraph::random(n, p, &mut r).unwrap();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        let sup = CoverageGraph::new(n, &edges).unwrap();
        let draws: Vec<usize> = (0..20_000).map(|_| r.random_range(0..n)).collect();
        let mut it = draws.iter().copied();
        let t_sub = coverage_from_draws(&sub, || it.next().unwrap());
        let mut it = draws.iter().copied();
        let t_sup = coverage_from_draws(&sup, || it.next().unwrap());
        prop_assert!(t_sup <= t_sub && t_sup >= 1);
    }
}
