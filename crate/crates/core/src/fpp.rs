//! First passage percolation with independent Exponential traversal times.
//!
//! Each edge `e` carries `xi_e ~ Exponential(w_e)`. The percolation time
//! `X(v', v'')` is the shortest-path length under `xi`; `Xi` is the largest
//! single-edge time on the minimizing path. Seen from `v'`, the set of
//! reached vertices is an increasing chain with rates
//! `S -> S + {y}` at `w(S, y)`, which [`FppChain`] exposes to the exact
//! solver.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ExactSolution, IncreasingChain, EXACT_TOL};
use crate::error::{Error, Result};
use crate::graph::{VertexSubset, WeightedGraph, EXACT_VERTEX_CAP};
use crate::rng::{self, open01};
use crate::stats::{self, SampleStats};

/// Traversal times indexed like `WeightedGraph::edges`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalSample(pub Vec<f64>);

impl TraversalSample {
    pub fn times(&self) -> &[f64] {
        &self.0
    }
}

/// `-ln(U) / w`, the inverse-transform Exponential(w) draw.
#[inline]
pub fn exponential_from_uniform(u: f64, rate: f64) -> f64 {
    -u.ln() / rate
}

pub fn sample_traversal<R: Rng + ?Sized>(g: &WeightedGraph, rng: &mut R) -> TraversalSample {
    TraversalSample(
        g.edges()
            .iter()
            .map(|e| exponential_from_uniform(open01(rng), e.rate))
            .collect(),
    )
}

/// One realization of the percolation time between two vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FppResult {
    /// `X`, the minimal total traversal time.
    pub time: f64,
    /// Vertex sequence of the minimizing path, source first.
    pub vertices: Vec<usize>,
    /// Edge indices along the path.
    pub edges: Vec<usize>,
    /// `Xi`, the largest traversal time on the path.
    pub max_edge_time: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn trace(pred: &[Option<(usize, usize)>], mut v: usize) -> Vec<usize> {
    let mut out = vec![v];
    while let Some((u, _)) = pred[v] {
        out.push(u);
        v = u;
    }
    out.reverse();
    out
}

/// Dijkstra from `source` to `target` under edge lengths `xi`.
///
/// Equal-length alternatives are resolved towards the lexicographically
/// smallest vertex sequence, so the path (and `Xi`) is a function of `xi`.
pub fn shortest_path(g: &WeightedGraph, xi: &TraversalSample, source: usize, target: usize) -> Result<FppResult> {
    let n = g.vertex_count();
    if source >= n || target >= n {
        return Err(Error::InvalidParameter(format!("endpoints ({source}, {target}) out of range")));
    }
    if source == target {
        return Err(Error::InvalidParameter("source and target must differ".into()));
    }
    let lengths = xi.times();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry { dist: 0.0, vertex: source });

    while let Some(Entry { dist: d, vertex: u }) = heap.pop() {
        if settled[u] || d > dist[u] {
            continue;
        }
        settled[u] = true;
        if u == target {
            break;
        }
        for &(v, e) in g.neighbors(u) {
            if settled[v] {
                continue;
            }
            let nd = d + lengths[e];
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some((u, e));
                heap.push(Entry { dist: nd, vertex: v });
            } else if nd == dist[v] {
                let mut candidate = trace(&pred, u);
                candidate.push(v);
                if candidate < trace(&pred, v) {
                    pred[v] = Some((u, e));
                }
            }
        }
    }
    if !settled[target] {
        return Err(Error::Internal(format!("target {target} unreachable from {source}")));
    }

    let vertices = trace(&pred, target);
    let mut edges = Vec::with_capacity(vertices.len() - 1);
    let mut v = target;
    while let Some((u, e)) = pred[v] {
        edges.push(e);
        v = u;
    }
    edges.reverse();
    let time: f64 = edges.iter().map(|&e| lengths[e]).sum();
    let max_edge_time = edges.iter().map(|&e| lengths[e]).fold(0.0, f64::max);
    Ok(FppResult {
        time,
        vertices,
        edges,
        max_edge_time,
    })
}

/// The reached-set process of FPP from `source`, absorbed once `target` is
/// reached.
#[derive(Debug, Clone, Copy)]
pub struct FppChain<'g> {
    graph: &'g WeightedGraph,
    pub source: usize,
    pub target: usize,
}

pub fn fpp_chain_spec(g: &WeightedGraph, source: usize, target: usize) -> Result<FppChain<'_>> {
    let n = g.vertex_count();
    if n > EXACT_VERTEX_CAP {
        return Err(Error::Capacity {
            what: "vertex count for the exact FPP chain",
            limit: EXACT_VERTEX_CAP,
            actual: n,
            hint: "estimate moments by Monte Carlo instead",
        });
    }
    if source >= n || target >= n || source == target {
        return Err(Error::InvalidParameter(format!("bad endpoints ({source}, {target})")));
    }
    Ok(FppChain {
        graph: g,
        source,
        target,
    })
}

impl IncreasingChain for FppChain<'_> {
    fn initial(&self) -> VertexSubset {
        VertexSubset::singleton(self.source)
    }

    fn is_target(&self, state: VertexSubset) -> bool {
        state.contains(self.target)
    }

    fn transitions(&self, state: VertexSubset, out: &mut Vec<(VertexSubset, f64)>) {
        let mut rate = [0.0f64; EXACT_VERTEX_CAP];
        for s in state.iter() {
            for &(y, e) in self.graph.neighbors(s) {
                if !state.contains(y) {
                    rate[y] += self.graph.edges()[e].rate;
                }
            }
        }
        for (y, &r) in rate.iter().enumerate().take(self.graph.vertex_count()) {
            if r > 0.0 {
                out.push((state.with(y), r));
            }
        }
    }
}

/// `var X <= E X / w_*`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Prop4Report {
    pub variance: f64,
    pub mean: f64,
    pub min_rate: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn prop4_check(sol: &ExactSolution, g: &WeightedGraph) -> Prop4Report {
    let min_rate = g.min_rate();
    let bound = sol.expected_time / min_rate;
    Prop4Report {
        variance: sol.variance,
        mean: sol.expected_time,
        min_rate,
        bound,
        holds: sol.variance <= bound + EXACT_TOL,
    }
}

/// Compact per-run record for Monte Carlo batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FppSample {
    pub x: f64,
    pub xi: f64,
    pub path_len: usize,
}

/// `runs` independent realizations; run `i` uses stream `(seed, i)`.
pub fn simulate_fpp(g: &WeightedGraph, source: usize, target: usize, runs: usize, seed: u64) -> Result<Vec<FppSample>> {
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let xi = sample_traversal(g, &mut rng);
            let r = shortest_path(g, &xi, source, target)?;
            Ok(FppSample {
                x: r.time,
                xi: r.max_edge_time,
                path_len: r.edges.len(),
            })
        })
        .collect()
}

/// CSV with columns `run_index,X,Xi,path_len`.
pub fn samples_csv(samples: &[FppSample]) -> String {
    let mut out = String::from("run_index,X,Xi,path_len\n");
    for (i, s) in samples.iter().enumerate() {
        out.push_str(&format!("{i},{},{},{}\n", s.x, s.xi, s.path_len));
    }
    out
}

/// Draw from Exponential(rate) conditioned on `[a, b]` by inverse transform.
#[inline]
pub fn conditioned_exponential(u: f64, rate: f64, a: f64, b: f64) -> f64 {
    // Memoryless shift: (xi - a | xi in [a,b]) is Exp(rate) truncated at b - a.
    let mass = -(-rate * (b - a)).exp_m1();
    (a - (-u * mass).ln_1p() / rate).clamp(a, b)
}

/// A resampled copy of `xi` in which the times falling in `[a, b]` are
/// redrawn from their conditional law.
#[derive(Debug, Clone)]
pub struct CouplingSample {
    pub a: f64,
    pub b: f64,
    pub xi: TraversalSample,
    pub xi_prime: TraversalSample,
    /// `D_ab`: edges of the minimizing path with `xi_e` in `[a, b]`.
    pub resampled_on_path: Vec<usize>,
    pub x: f64,
    pub x_prime: f64,
    /// `sum over D_ab of (xi'_e - xi_e)`, an upper bound on `X' - X`.
    pub path_bound: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn coupled_resample<R: Rng + ?Sized>(
    g: &WeightedGraph,
    xi: &TraversalSample,
    source: usize,
    target: usize,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<CouplingSample> {
    if !(a > 0.0 && a < b && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("coupling needs 0 < a < b (got a={a}, b={b})")));
    }
    let base = shortest_path(g, xi, source, target)?;
    let fresh: Vec<f64> = xi
        .times()
        .iter()
        .zip(g.edges())
        .map(|(&t, e)| {
            if (a..=b).contains(&t) {
                conditioned_exponential(open01(rng), e.rate, a, b)
            } else {
                t
            }
        })
        .collect();
    let xi_prime = TraversalSample(fresh);
    let x_prime = shortest_path(g, &xi_prime, source, target)?.time;
    let resampled_on_path: Vec<usize> = base
        .edges
        .iter()
        .copied()
        .filter(|&e| (a..=b).contains(&xi.0[e]))
        .collect();
    let path_bound = resampled_on_path.iter().map(|&e| xi_prime.0[e] - xi.0[e]).sum();
    Ok(CouplingSample {
        a,
        b,
        xi: xi.clone(),
        xi_prime,
        resampled_on_path,
        x: base.time,
        x_prime,
        path_bound,
    })
}

/// Monte Carlo comparison of `var X` against `E (X' - X)^2 / 4` under the
/// interval-resampling coupling.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    pub a: f64,
    pub b: f64,
    pub runs: usize,
    pub variance: f64,
    pub variance_se: f64,
    pub quarter_mean_square: f64,
    pub quarter_mean_square_se: f64,
    /// Realizations where `X' - X` exceeded the path bound.
    pub bound_violations: usize,
    pub holds: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn coupling_check(
    g: &WeightedGraph,
    source: usize,
    target: usize,
    a: f64,
    b: f64,
    runs: usize,
    seed: u64,
) -> Result<CouplingReport> {
    let pairs: Vec<(f64, f64, bool)> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let xi = sample_traversal(g, &mut rng);
            let c = coupled_resample(g, &xi, source, target, a, b, &mut rng)?;
            let ok = c.x_prime - c.x <= c.path_bound + 1e-12 * c.x.max(1.0);
            Ok((c.x, c.x_prime, ok))
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let sq: Vec<f64> = pairs.iter().map(|p| 0.25 * (p.1 - p.0).powi(2)).collect();
    let x_stats = SampleStats::from_samples(&xs);
    let variance_se = stats::variance_standard_error(&xs);
    let sq_stats = SampleStats::from_samples(&sq);
    let quarter_se = sq_stats.sd / (runs as f64).sqrt();
    let bound_violations = pairs.iter().filter(|p| !p.2).count();
    let band = 3.0 * (variance_se.powi(2) + quarter_se.powi(2)).sqrt();
    Ok(CouplingReport {
        a,
        b,
        runs,
        variance: x_stats.variance,
        variance_se,
        quarter_mean_square: sq_stats.mean,
        quarter_mean_square_se: quarter_se,
        bound_violations,
        holds: bound_violations == 0 && x_stats.variance + band >= sq_stats.mean,
    })
}

/// Empirical check of `P(X > y1 + y2) <= P(X > y1) P(X > y2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubmultiplicativityReport {
    pub n: usize,
    pub joint_tail: f64,
    pub tail_y1: f64,
    pub tail_y2: f64,
    pub product: f64,
    /// Three combined binomial standard errors.
    pub band: f64,
    pub holds: bool,
    /// Set when fewer than 10^4 samples were supplied.
    pub precision_warning: bool,
}

pub fn submultiplicativity_probe(samples: &[f64], y1: f64, y2: f64) -> Result<SubmultiplicativityReport> {
    if samples.is_empty() || y1 < 0.0 || y2 < 0.0 {
        return Err(Error::InvalidParameter("need samples and y1, y2 >= 0".into()));
    }
    let n = samples.len() as f64;
    let tail = |y: f64| samples.iter().filter(|&&x| x > y).count() as f64 / n;
    let joint_tail = tail(y1 + y2);
    let (p1, p2) = (tail(y1), tail(y2));
    let product = p1 * p2;
    let var_joint = joint_tail * (1.0 - joint_tail) / n;
    let var_product = (p2 * p2 * p1 * (1.0 - p1) + p1 * p1 * p2 * (1.0 - p2)) / n;
    let band = 3.0 * (var_joint + var_product).sqrt();
    Ok(SubmultiplicativityReport {
        n: samples.len(),
        joint_tail,
        tail_y1: p1,
        tail_y2: p2,
        product,
        band,
        holds: joint_tail <= product + band,
        precision_warning: samples.len() < 10_000,
    })
}

/// Exact chain moments against Monte Carlo shortest-path moments.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualMethodReport {
    pub exact_mean: f64,
    pub exact_variance: f64,
    pub mc_mean: f64,
    pub mc_variance: f64,
    pub z_mean: f64,
    pub z_variance: f64,
    pub runs: usize,
    pub holds: bool,
}

/// Agreement within `sigmas` standard errors on both moments.
pub fn dual_method_check(exact: &ExactSolution, samples: &[FppSample], sigmas: f64) -> DualMethodReport {
    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let st = SampleStats::from_samples(&xs);
    let se_mean = st.sd / (xs.len() as f64).sqrt();
    let se_var = stats::variance_standard_error(&xs);
    let z_mean = (st.mean - exact.expected_time) / se_mean;
    let z_variance = (st.variance - exact.variance) / se_var;
    DualMethodReport {
        exact_mean: exact.expected_time,
        exact_variance: exact.variance,
        mc_mean: st.mean,
        mc_variance: st.variance,
        z_mean,
        z_variance,
        runs: xs.len(),
        holds: z_mean.abs() <= sigmas && z_variance.abs() <= sigmas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{lemma1_bound, solve_hitting};
    use crate::graph::parse_edge_list;

    fn k3() -> WeightedGraph {
        parse_edge_list("a b 1\nb c 1\na c 1").unwrap()
    }

    #[test]
    fn inverse_transform_identities() {
        assert!((exponential_from_uniform((-1.0f64).exp(), 1.0) - 1.0).abs() < 1e-15);
        let u = 0.3;
        assert!((exponential_from_uniform(u, 2.0) * 2.0 - exponential_from_uniform(u, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn sample_mean_at_rate_four() {
        let g = parse_edge_list("a b 4").unwrap();
        let mut rng = rng::stream(1, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_traversal(&g, &mut rng).0[0]).sum::<f64>() / n as f64;
        // sd of Exp(4) is 0.25
        assert!((mean - 0.25).abs() < 3.0 * 0.25 / (n as f64).sqrt());
    }

    #[test]
    fn triangle_two_hop_beats_direct() {
        // a-c direct 5, a-b-c = 1 + 2
        let g = parse_edge_list("a b 1\nb c 1\na c 1").unwrap();
        let xi = TraversalSample(vec![1.0, 2.0, 5.0]);
        let r = shortest_path(&g, &xi, 0, 2).unwrap();
        assert_eq!(r.time, 3.0);
        assert_eq!(r.vertices, vec![0, 1, 2]);
        assert_eq!(r.max_edge_time, 2.0);
    }

    #[test]
    fn ties_pick_lexicographically_smallest_path() {
        // Square 0-1-3 and 0-2-3 with equal lengths.
        let g = parse_edge_list("0 2 1\n2 3 1\n0 1 1\n1 3 1").unwrap();
        let xi = TraversalSample(vec![1.0; 4]);
        let s = g.vertex_id("0").unwrap();
        let t = g.vertex_id("3").unwrap();
        let r = shortest_path(&g, &xi, s, t).unwrap();
        let labels: Vec<&str> = r.vertices.iter().map(|&v| g.label(v)).collect();
        // ids follow first appearance: 0->0, 2->1, 3->2, 1->3
        assert_eq!(r.vertices, vec![0, 1, 2]);
        assert_eq!(labels, vec!["0", "2", "3"]);
    }

    #[test]
    fn direct_edge_bounds_x() {
        let g = k3();
        let mut rng = rng::stream(2, 0);
        for _ in 0..1000 {
            let xi = sample_traversal(&g, &mut rng);
            let r = shortest_path(&g, &xi, 0, 2).unwrap();
            let direct = g.edge_between(0, 2).unwrap();
            assert!(r.time <= xi.0[direct]);
            assert!(r.max_edge_time <= r.time);
            assert_eq!(r.max_edge_time == r.time, r.edges.len() == 1);
        }
    }

    #[test]
    fn chain_spec_shapes() {
        let path = parse_edge_list("a b 1\nb c 2").unwrap();
        let chain = fpp_chain_spec(&path, 0, 2).unwrap();
        let mut out = Vec::new();
        chain.transitions(VertexSubset(0b001), &mut out);
        assert_eq!(out, vec![(VertexSubset(0b011), 1.0)]);
        out.clear();
        chain.transitions(VertexSubset(0b011), &mut out);
        assert_eq!(out, vec![(VertexSubset(0b111), 2.0)]);

        let tri = k3();
        let chain = fpp_chain_spec(&tri, 0, 2).unwrap();
        out.clear();
        chain.transitions(VertexSubset(0b001), &mut out);
        let total: f64 = out.iter().map(|p| p.1).sum();
        assert_eq!(total, 2.0);
        out.clear();
        chain.transitions(VertexSubset(0b011), &mut out);
        assert_eq!(out, vec![(VertexSubset(0b111), 2.0)]);
    }

    #[test]
    fn unit_triangle_exact_values() {
        let g = k3();
        let sol = solve_hitting(&fpp_chain_spec(&g, 0, 2).unwrap()).unwrap();
        assert!((sol.expected_time - 0.75).abs() < 1e-15);
        assert!((sol.variance - 0.4375).abs() < 1e-15);
        assert!((lemma1_bound(&sol).unwrap().kappa - 0.75).abs() < 1e-15);
        let p4 = prop4_check(&sol, &g);
        assert!(p4.holds && (p4.bound - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_edge_prop4_equality() {
        let g = parse_edge_list("a b 2.5").unwrap();
        let sol = solve_hitting(&fpp_chain_spec(&g, 0, 1).unwrap()).unwrap();
        let p4 = prop4_check(&sol, &g);
        assert!((p4.variance - p4.bound).abs() < 1e-15);
        assert!(p4.holds);
    }

    #[test]
    fn conditioned_draws_stay_in_interval() {
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let x = conditioned_exponential(u, 3.0, 0.2, 0.9);
            assert!((0.2..=0.9).contains(&x));
        }
        // u -> 0 gives a, u -> 1 gives b
        assert!((conditioned_exponential(1e-12, 1.0, 1.0, 2.0) - 1.0).abs() < 1e-9);
        assert!((conditioned_exponential(1.0, 1.0, 1.0, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_window_leaves_sample_untouched() {
        let g = k3();
        let xi = TraversalSample(vec![0.1, 0.2, 0.3]);
        let mut rng = rng::stream(3, 0);
        let c = coupled_resample(&g, &xi, 0, 2, 1.0, 2.0, &mut rng).unwrap();
        assert_eq!(c.xi_prime, xi);
        assert_eq!(c.x, c.x_prime);
        assert!(c.resampled_on_path.is_empty());
        assert!(coupled_resample(&g, &xi, 0, 2, 2.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn coupled_marginal_is_exponential() {
        // KS test of xi' against Exp(w) at the 1% level.
        let g = parse_edge_list("a b 1.5").unwrap();
        let n = 100_000;
        let mut rng = rng::stream(4, 0);
        let mut draws: Vec<f64> = (0..n)
            .map(|_| {
                let xi = sample_traversal(&g, &mut rng);
                coupled_resample(&g, &xi, 0, 1, 0.3, 1.2, &mut rng).unwrap().xi_prime.0[0]
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        let d = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-1.5 * x).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.6276 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn coupling_bound_holds_per_realization() {
        let g = crate::families::bridge(3, 3, 0.3).unwrap();
        let rep = coupling_check(&g, 0, 5, 0.2, 3.0, 20_000, 11).unwrap();
        assert_eq!(rep.bound_violations, 0);
        assert!(rep.holds, "{rep:?}");
    }

    #[test]
    fn submultiplicativity_edge_cases() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64 / 10.0).collect();
        let rep = submultiplicativity_probe(&xs, 0.0, 0.0).unwrap();
        assert_eq!(rep.joint_tail, 1.0);
        assert_eq!(rep.product, 1.0);
        assert!(rep.holds && rep.precision_warning);
    }

    #[test]
    fn memoryless_tail_factorizes() {
        let g = parse_edge_list("a b 1").unwrap();
        let samples: Vec<f64> = simulate_fpp(&g, 0, 1, 200_000, 6).unwrap().iter().map(|s| s.x).collect();
        for (y1, y2) in [(0.3, 0.5), (1.0, 1.0), (0.1, 2.0)] {
            let rep = submultiplicativity_probe(&samples, y1, y2).unwrap();
            assert!((rep.joint_tail - rep.product).abs() <= rep.band, "{rep:?}");
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let g = k3();
        let a = simulate_fpp(&g, 0, 2, 500, 77).unwrap();
        let b = simulate_fpp(&g, 0, 2, 500, 77).unwrap();
        assert_eq!(a, b);
        assert!(samples_csv(&a[..2]).starts_with("run_index,X,Xi,path_len\n0,"));
    }
}
