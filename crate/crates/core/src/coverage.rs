//! Lattice growth on Z^2 and the graph coverage process.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{lemma1_bound, solve_discrete, solve_hitting, Continuized, DiscreteIncreasingChain};
use crate::error::{Error, Result};
use crate::graph::{VertexSubset, WeightedGraph, EXACT_VERTEX_CAP};
use crate::rng::{self, open01};
use crate::stats::{self, SampleStats, Verdict, Z95};

pub type Site = (i32, i32);

const STEPS: [Site; 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

pub fn lattice_neighbors(v: Site) -> impl Iterator<Item = Site> {
    STEPS.iter().map(move |d| (v.0 + d.0, v.1 + d.1))
}

fn linf(v: Site) -> i32 {
    v.0.abs().max(v.1.abs())
}

/// Occupied sites inside the box `[-R, R]^2`.
#[derive(Debug, Clone)]
pub struct SiteSet {
    radius: i32,
    occupied: Vec<bool>,
    len: usize,
}

impl SiteSet {
    pub fn new(radius: i32) -> Self {
        let side = (2 * radius + 1) as usize;
        SiteSet {
            radius,
            occupied: vec![false; side * side],
            len: 0,
        }
    }

    fn index(&self, v: Site) -> Option<usize> {
        if linf(v) > self.radius {
            return None;
        }
        let side = 2 * self.radius + 1;
        Some(((v.1 + self.radius) * side + v.0 + self.radius) as usize)
    }

    pub fn contains(&self, v: Site) -> bool {
        self.index(v).is_some_and(|i| self.occupied[i])
    }

    pub fn insert(&mut self, v: Site) {
        if let Some(i) = self.index(v) {
            if !self.occupied[i] {
                self.occupied[i] = true;
                self.len += 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Occupied neighbors of `v`.
    pub fn neighbor_count(&self, v: Site) -> usize {
        lattice_neighbors(v).filter(|&w| self.contains(w)).count()
    }
}

/// Transition rate `r(S, v)` for adding frontier site `v` to `S`.
pub trait GrowthRate: Sync {
    fn rate(&self, s: &SiteSet, v: Site) -> f64;
    /// `(c_*, c^*)`.
    fn bounds(&self) -> (f64, f64);
}

/// Named built-in rate functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFunction {
    /// Eden growth at rate `c`.
    Constant { c: f64 },
    /// Fixed per-site rates uniform on `[lo, hi]`, hashed from `seed`.
    SiteWeighted { lo: f64, hi: f64, seed: u64 },
    /// `base + per_neighbor * (occupied neighbors)`.
    NeighborCount { base: f64, per_neighbor: f64 },
}

impl RateFunction {
    fn site_weight(lo: f64, hi: f64, seed: u64, v: Site) -> f64 {
        let key = ((v.0 as u32 as u64) << 32) | v.1 as u32 as u64;
        let h = rng::subseed(seed, key);
        lo + (hi - lo) * ((h >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn validate_params(&self) -> Result<()> {
        let ok = match *self {
            RateFunction::Constant { c } => c > 0.0 && c.is_finite(),
            RateFunction::SiteWeighted { lo, hi, .. } => lo > 0.0 && hi >= lo && hi.is_finite(),
            RateFunction::NeighborCount { base, per_neighbor } => {
                base >= 0.0 && per_neighbor >= 0.0 && base + per_neighbor > 0.0 && (base + 4.0 * per_neighbor).is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad rate function parameters: {self:?}")))
        }
    }
}

impl GrowthRate for RateFunction {
    fn rate(&self, s: &SiteSet, v: Site) -> f64 {
        match *self {
            RateFunction::Constant { c } => c,
            RateFunction::SiteWeighted { lo, hi, seed } => Self::site_weight(lo, hi, seed, v),
            RateFunction::NeighborCount { base, per_neighbor } => base + per_neighbor * s.neighbor_count(v) as f64,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            RateFunction::Constant { c } => (c, c),
            RateFunction::SiteWeighted { lo, hi, .. } => (lo, hi),
            // A frontier site has between one and four occupied neighbors.
            RateFunction::NeighborCount { base, per_neighbor } => (base + per_neighbor, base + 4.0 * per_neighbor),
        }
    }
}

/// Target set builders.
pub fn origin_neighbors() -> Vec<Site> {
    lattice_neighbors((0, 0)).collect()
}

/// Sites at L-infinity distance exactly `d` from the origin.
pub fn linf_sphere(d: i32) -> Vec<Site> {
    let mut out = Vec::new();
    for x in -d..=d {
        for y in -d..=d {
            if linf((x, y)) == d {
                out.push((x, y));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GrowthConfig<R: GrowthRate> {
    pub radius: i32,
    pub rate: R,
    pub target: Vec<Site>,
}

impl<R: GrowthRate> GrowthConfig<R> {
    pub fn new(radius: i32, rate: R, target: Vec<Site>) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::InvalidParameter("growth target set is empty".into()));
        }
        if target.contains(&(0, 0)) {
            return Err(Error::InvalidParameter("growth target contains the origin".into()));
        }
        let reach = target.iter().map(|&v| linf(v)).max().unwrap();
        if radius <= reach {
            return Err(Error::InvalidParameter(format!(
                "box radius {radius} must exceed the target's L-infinity reach {reach}"
            )));
        }
        Ok(GrowthConfig { radius, rate, target })
    }
}

/// One growth run. `valid` is false if the cluster touched the box boundary
/// before reaching the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRun {
    pub time: f64,
    pub valid: bool,
    pub radius: i32,
    pub size: usize,
}

fn growth_once<G: GrowthRate, Q: Rng + ?Sized>(radius: i32, rate: &G, target: &[Site], rng: &mut Q) -> Result<GrowthRun> {
    let mut s = SiteSet::new(radius);
    s.insert((0, 0));
    let is_target: std::collections::HashSet<Site> = target.iter().copied().collect();
    // Frontier in coordinate order so draws do not depend on the box size.
    let mut frontier: BTreeMap<Site, ()> = lattice_neighbors((0, 0)).map(|v| (v, ())).collect();
    let mut t = 0.0;
    let mut rates: Vec<(Site, f64)> = Vec::new();
    loop {
        rates.clear();
        let mut total = 0.0;
        for &v in frontier.keys() {
            let r = rate.rate(&s, v);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("rate {r} at site {v:?}")));
            }
            total += r;
            rates.push((v, r));
        }
        t -= open01(rng).ln() / total;
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = rates[rates.len() - 1].0;
        for &(v, r) in &rates {
            if pick < r {
                chosen = v;
                break;
            }
            pick -= r;
        }
        frontier.remove(&chosen);
        s.insert(chosen);
        if is_target.contains(&chosen) {
            return Ok(GrowthRun {
                time: t,
                valid: true,
                radius,
                size: s.len(),
            });
        }
        if linf(chosen) >= radius {
            return Ok(GrowthRun {
                time: t,
                valid: false,
                radius,
                size: s.len(),
            });
        }
        for w in lattice_neighbors(chosen) {
            if !s.contains(w) {
                frontier.insert(w, ());
            }
        }
    }
}

/// Run `index` of a growth experiment. Invalid runs are redone on the same
/// stream with twice the radius; the frontier order is box-independent, so
/// the accepted time has the law of the untruncated process.
pub fn growth_simulate<G: GrowthRate>(cfg: &GrowthConfig<G>, seed: u64, index: u64) -> Result<(GrowthRun, u32)> {
    let mut radius = cfg.radius;
    let mut retries = 0;
    loop {
        let mut r = rng::stream(seed, index);
        let run = growth_once(radius, &cfg.rate, &cfg.target, &mut r)?;
        if run.valid {
            return Ok((run, retries));
        }
        retries += 1;
        radius = radius.checked_mul(2).filter(|&x| x <= 1 << 12).ok_or(Error::Capacity {
            what: "growth box radius",
            limit: 1 << 12,
            actual: radius as usize * 2,
            hint: "choose a closer target set",
        })?;
    }
}

/// Random check of the rate conditions on pairs `S subset S'` with a common
/// frontier site: bounds `c_* <= r <= c^*` and `r(S, v) <= r(S', v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValidation {
    pub pairs: usize,
    pub bound_violations: usize,
    pub monotonicity_violations: usize,
}

impl RateValidation {
    pub fn ok(&self) -> bool {
        self.bound_violations == 0 && self.monotonicity_violations == 0
    }
}

pub fn validate_rate<G: GrowthRate>(rate: &G, pairs: usize, seed: u64) -> RateValidation {
    let (lo, hi) = rate.bounds();
    let mut rep = RateValidation {
        pairs: 0,
        bound_violations: 0,
        monotonicity_violations: 0,
    };
    let radius = 12;
    for i in 0..pairs {
        let mut r = rng::stream(seed, i as u64);
        let steps_small = r.random_range(0..30);
        let steps_extra = r.random_range(1..30);
        let mut s = SiteSet::new(radius);
        s.insert((0, 0));
        let mut sites = vec![(0, 0)];
        let grow = |s: &mut SiteSet, sites: &mut Vec<Site>, r: &mut rng::Stream| {
            let base = sites[r.random_range(0..sites.len())];
            let w = lattice_neighbors(base).nth(r.random_range(0..4)).unwrap();
            if linf(w) < radius && !s.contains(w) {
                s.insert(w);
                sites.push(w);
            }
        };
        for _ in 0..steps_small {
            grow(&mut s, &mut sites, &mut r);
        }
        let small = s.clone();
        for _ in 0..steps_extra {
            grow(&mut s, &mut sites, &mut r);
        }
        let frontier: Vec<Site> = sites
            .iter()
            .flat_map(|&v| lattice_neighbors(v))
            .filter(|&w| !s.contains(w) && small.neighbor_count(w) > 0 && linf(w) <= radius)
            .collect();
        for v in frontier {
            rep.pairs += 1;
            let (a, b) = (rate.rate(&small, v), rate.rate(&s, v));
            if !(lo..=hi).contains(&a) || !(lo..=hi).contains(&b) {
                rep.bound_violations += 1;
            }
            if a > b {
                rep.monotonicity_violations += 1;
            }
        }
    }
    rep
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop1Report {
    pub runs: usize,
    pub mean: f64,
    pub variance: f64,
    pub c_lower: f64,
    /// `E T / c_*`.
    pub bound: f64,
    pub half_width: f64,
    pub verdict: Verdict,
    pub resampled_runs: usize,
    pub rate_validation: RateValidation,
}

/// Growth times of `runs` runs.
pub fn growth_batch<G: GrowthRate>(cfg: &GrowthConfig<G>, runs: usize, seed: u64) -> Result<Vec<(GrowthRun, u32)>> {
    (0..runs)
        .into_par_iter()
        .map(|i| growth_simulate(cfg, seed, i as u64))
        .collect()
}

/// CSV with columns `run_index,T,valid_flag` (accepted runs only are valid).
pub fn growth_csv(runs: &[(GrowthRun, u32)]) -> String {
    let mut out = String::from("run_index,T,valid_flag\n");
    for (i, (r, retries)) in runs.iter().enumerate() {
        out.push_str(&format!("{i},{},{}\n", r.time, u8::from(r.valid && *retries == 0)));
    }
    out
}

/// `var X <= a E X` with a band combining both moment errors.
fn variance_ratio_verdict(xs: &[f64], factor: f64) -> (SampleStats, f64, f64, Verdict) {
    let st = SampleStats::from_samples(xs);
    let se_var = stats::variance_standard_error(xs);
    let se_mean = st.sd / (xs.len() as f64).sqrt();
    let bound = factor * st.mean;
    let hw = Z95 * (se_var * se_var + (factor * se_mean).powi(2)).sqrt();
    (st, bound, hw, Verdict::upper(st.variance, bound, hw))
}

pub fn prop1_check<G: GrowthRate>(cfg: &GrowthConfig<G>, runs: usize, seed: u64) -> Result<Prop1Report> {
    let rate_validation = validate_rate(&cfg.rate, 200, rng::subseed(seed, 1));
    if !rate_validation.ok() {
        return Err(Error::Validation(format!(
            "rate function violates its conditions: {rate_validation:?}"
        )));
    }
    let batch = growth_batch(cfg, runs, seed)?;
    let xs: Vec<f64> = batch.iter().map(|b| b.0.time).collect();
    let (c_lower, _) = cfg.rate.bounds();
    let (st, bound, hw, verdict) = variance_ratio_verdict(&xs, 1.0 / c_lower);
    Ok(Prop1Report {
        runs,
        mean: st.mean,
        variance: st.variance,
        c_lower,
        bound,
        half_width: hw,
        verdict,
        resampled_runs: batch.iter().filter(|b| b.1 > 0).count(),
        rate_validation,
    })
}

/// Simple undirected graph that may be disconnected (coverage needs
/// edgeless and sparse graphs).
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGraph {
    n: usize,
    /// Closed neighborhoods as bitsets.
    closed: Vec<Vec<u64>>,
}

impl CoverageGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let words = n.div_ceil(64);
        let mut closed = vec![vec![0u64; words]; n];
        for (v, row) in closed.iter_mut().enumerate() {
            row[v / 64] |= 1 << (v % 64);
        }
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::UnknownVertex(format!("{}", a.max(b))));
            }
            if a == b {
                return Err(Error::SelfLoop(a.to_string()));
            }
            closed[a][b / 64] |= 1 << (b % 64);
            closed[b][a / 64] |= 1 << (a % 64);
        }
        Ok(CoverageGraph { n, closed })
    }

    pub fn from_weighted(g: &WeightedGraph) -> Self {
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        CoverageGraph::new(g.vertex_count(), &edges).expect("weighted graphs are simple")
    }

    pub fn edgeless(n: usize) -> Result<Self> {
        CoverageGraph::new(n, &[])
    }

    /// `G(n, p)` without a connectivity requirement.
    pub fn random<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        CoverageGraph::new(n, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Closed neighborhood of `v` as a subset (requires `n <= 64`).
    fn closed_mask(&self, v: usize) -> VertexSubset {
        VertexSubset(self.closed[v][0])
    }

    pub fn is_supergraph_of(&self, other: &CoverageGraph) -> bool {
        self.n == other.n
            && self
                .closed
                .iter()
                .zip(&other.closed)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x & y == *y))
    }
}

/// Steps until the closed neighborhoods of IID uniform draws cover `V`.
pub fn coverage_simulate<R: Rng + ?Sized>(g: &CoverageGraph, rng: &mut R) -> u64 {
    coverage_from_draws(g, || rng.random_range(0..g.n))
}

/// As [`coverage_simulate`] with the vertex draws supplied, for common
/// random number comparisons.
pub fn coverage_from_draws(g: &CoverageGraph, mut draw: impl FnMut() -> usize) -> u64 {
    let mut covered = vec![0u64; g.closed[0].len()];
    let mut count = 0usize;
    let mut steps = 0u64;
    while count < g.n {
        let v = draw();
        steps += 1;
        for (w, add) in covered.iter_mut().zip(&g.closed[v]) {
            let new = add & !*w;
            count += new.count_ones() as usize;
            *w |= new;
        }
    }
    steps
}

pub fn coverage_batch(g: &CoverageGraph, runs: usize, seed: u64) -> Vec<u64> {
    (0..runs)
        .into_par_iter()
        .map(|i| coverage_simulate(g, &mut rng::stream(seed, i as u64)))
        .collect()
}

/// CSV with columns `run_index,T,valid_flag`.
pub fn coverage_csv(ts: &[u64]) -> String {
    let mut out = String::from("run_index,T,valid_flag\n");
    for (i, t) in ts.iter().enumerate() {
        out.push_str(&format!("{i},{t},1\n"));
    }
    out
}

/// The covered-set chain: from `C`, a uniform vertex `v` moves to
/// `C ∪ N[v]` (a self-loop when nothing new is covered).
pub struct CoverageChain<'g> {
    graph: &'g CoverageGraph,
}

impl<'g> CoverageChain<'g> {
    pub fn new(graph: &'g CoverageGraph) -> Result<Self> {
        if graph.n > EXACT_VERTEX_CAP {
            return Err(Error::Capacity {
                what: "vertex count for the exact coverage chain",
                limit: EXACT_VERTEX_CAP,
                actual: graph.n,
                hint: "estimate coverage moments by Monte Carlo instead",
            });
        }
        Ok(CoverageChain { graph })
    }
}

impl DiscreteIncreasingChain for CoverageChain<'_> {
    fn initial(&self) -> VertexSubset {
        VertexSubset::EMPTY
    }

    fn is_target(&self, state: VertexSubset) -> bool {
        state == VertexSubset::full(self.graph.n)
    }

    fn transitions(&self, state: VertexSubset, out: &mut Vec<(VertexSubset, f64)>) {
        let p = 1.0 / self.graph.n as f64;
        for v in 0..self.graph.n {
            out.push((state.union(self.graph.closed_mask(v)), p));
        }
    }
}

/// Exact moments of the coverage time and of its continuization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactCoverage {
    pub mean: f64,
    pub variance: f64,
    pub continuized_variance: f64,
    /// Lemma-1 constant of the continuized chain.
    pub kappa: f64,
    pub states: usize,
}

pub fn exact_coverage(g: &CoverageGraph) -> Result<ExactCoverage> {
    let chain = CoverageChain::new(g)?;
    let disc = solve_discrete(&chain)?;
    let cont = solve_hitting(&Continuized(&chain))?;
    let kappa = lemma1_bound(&cont)?.kappa;
    Ok(ExactCoverage {
        mean: disc.mean,
        variance: disc.variance,
        continuized_variance: cont.variance,
        kappa,
        states: disc.states,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop3Report {
    pub n: usize,
    pub runs: usize,
    pub mean: f64,
    pub variance: f64,
    /// `n E T`.
    pub bound: f64,
    pub half_width: f64,
    pub verdict: Verdict,
    pub exact: Option<ExactCoverage>,
}

pub fn prop3_check(g: &CoverageGraph, runs: usize, seed: u64) -> Result<Prop3Report> {
    let ts: Vec<f64> = coverage_batch(g, runs, seed).into_iter().map(|t| t as f64).collect();
    prop3_from_samples(g, &ts)
}

pub fn prop3_from_samples(g: &CoverageGraph, ts: &[f64]) -> Result<Prop3Report> {
    let n = g.vertex_count();
    let (st, bound, hw, mut verdict) = variance_ratio_verdict(ts, n as f64);
    let exact = if n <= 12 { Some(exact_coverage(g)?) } else { None };
    if let Some(ex) = exact {
        if ex.variance > n as f64 * ex.mean + crate::chain::EXACT_TOL {
            verdict = Verdict::Fail;
        }
    }
    Ok(Prop3Report {
        n,
        runs: ts.len(),
        mean: st.mean,
        variance: st.variance,
        bound,
        half_width: hw,
        verdict,
        exact,
    })
}
