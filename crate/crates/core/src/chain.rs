//! Exact hitting-time analysis for increasing set-valued Markov chains.
//!
//! States are vertex subsets and every transition strictly enlarges the
//! state, so the reachable state space is a DAG ordered by popcount. The
//! solver materializes the states reachable from the initial state, then
//!
//! * computes `h(S) = E_S T` by backward induction (largest states first),
//! * pushes visit probabilities forward from `S_0`,
//! * turns occupation times `visit(S) / q_tot(S)` into `E T` and
//!   `var T = sum_S time_in(S) * a(S)` with
//!   `a(S) = sum_S' q(S,S') (h(S) - h(S'))^2`.
//!
//! An independent second-moment recursion is carried alongside so callers
//! can cross-check the occupation-measure variance.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::VertexSubset;

/// Default cap on the number of reachable states.
pub const STATE_CAP: usize = 1 << 20;

/// Absolute tolerance used for every exact identity.
pub const EXACT_TOL: f64 = 1e-9;

/// A continuous-time chain on vertex subsets whose transitions only add
/// elements.
pub trait IncreasingChain {
    fn initial(&self) -> VertexSubset;
    fn is_target(&self, state: VertexSubset) -> bool;
    /// Appends `(next state, rate)` for every transition out of `state`.
    fn transitions(&self, state: VertexSubset, out: &mut Vec<(VertexSubset, f64)>);
}

/// A discrete-time chain on vertex subsets. Transitions may stay put
/// (`next == state`) but never shrink the state.
pub trait DiscreteIncreasingChain {
    fn initial(&self) -> VertexSubset;
    fn is_target(&self, state: VertexSubset) -> bool;
    /// Appends `(next state, probability)`; probabilities sum to 1.
    fn transitions(&self, state: VertexSubset, out: &mut Vec<(VertexSubset, f64)>);
}

/// Chain given by an explicit transition table.
#[derive(Debug, Clone, Default)]
pub struct TableChain {
    pub initial: VertexSubset,
    pub targets: Vec<VertexSubset>,
    pub table: HashMap<VertexSubset, Vec<(VertexSubset, f64)>>,
}

impl TableChain {
    pub fn new(initial: VertexSubset, targets: Vec<VertexSubset>) -> Self {
        TableChain {
            initial,
            targets,
            table: HashMap::new(),
        }
    }

    pub fn add(&mut self, from: VertexSubset, to: VertexSubset, weight: f64) -> &mut Self {
        self.table.entry(from).or_default().push((to, weight));
        self
    }
}

impl IncreasingChain for TableChain {
    fn initial(&self) -> VertexSubset {
        self.initial
    }
    fn is_target(&self, state: VertexSubset) -> bool {
        self.targets.contains(&state)
    }
    fn transitions(&self, state: VertexSubset, out: &mut Vec<(VertexSubset, f64)>) {
        if let Some(list) = self.table.get(&state) {
            out.extend_from_slice(list);
        }
    }
}

impl DiscreteIncreasingChain for TableChain {
    fn initial(&self) -> VertexSubset {
        self.initial
    }
    fn is_target(&self, state: VertexSubset) -> bool {
        self.targets.contains(&state)
    }
    fn transitions(&self, state: VertexSubset, out: &mut Vec<(VertexSubset, f64)>) {
        if let Some(list) = self.table.get(&state) {
            out.extend_from_slice(list);
        }
    }
}

/// Continuous-time chain with rates equal to the discrete transition
/// probabilities (self-loops dropped: they do not move the state).
pub struct Continuized<'a, C: ?Sized>(pub &'a C);

impl<C: DiscreteIncreasingChain + ?Sized> IncreasingChain for Continuized<'_, C> {
    fn initial(&self) -> VertexSubset {
        self.0.initial()
    }
    fn is_target(&self, state: VertexSubset) -> bool {
        self.0.is_target(state)
    }
    fn transitions(&self, state: VertexSubset, out: &mut Vec<(VertexSubset, f64)>) {
        let start = out.len();
        self.0.transitions(state, out);
        let mut i = start;
        while i < out.len() {
            if out[i].0 == state {
                out.swap_remove(i);
            } else {
                i += 1;
            }
        }
    }
}

/// Per-state quantities of a solved chain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StateRecord {
    pub state: VertexSubset,
    pub target: bool,
    /// Mean remaining hitting time `h(S)`.
    pub h: f64,
    /// Probability the chain ever visits the state.
    pub visit_prob: f64,
    /// Expected time spent in the state before `T`.
    pub time_in: f64,
    pub total_rate: f64,
    /// `sum q (h(S) - h(S'))^2`.
    pub a: f64,
    /// `sum q (h(S) - h(S'))`; equals 1 on non-target states.
    pub b: f64,
    /// Second moment `E_S T^2` from the first-step recursion.
    pub second_moment: f64,
}

/// Exact solution of an increasing chain.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    /// States in topological order: decreasing popcount, then increasing mask.
    states: Vec<StateRecord>,
    index: HashMap<VertexSubset, usize>,
    /// Aggregated outgoing transitions `(target index, rate)` per state.
    transitions: Vec<Vec<(usize, f64)>>,
    initial: usize,
    pub expected_time: f64,
    /// Variance from occupation measures.
    pub variance: f64,
    /// Variance from the independent second-moment recursion.
    pub variance_second_moment: f64,
}

impl ExactSolution {
    pub fn states(&self) -> &[StateRecord] {
        &self.states
    }

    pub fn state(&self, s: VertexSubset) -> Option<&StateRecord> {
        self.index.get(&s).map(|&i| &self.states[i])
    }

    pub fn h(&self, s: VertexSubset) -> Option<f64> {
        self.state(s).map(|r| r.h)
    }

    pub fn initial(&self) -> &StateRecord {
        &self.states[self.initial]
    }

    /// Outgoing `(next state, rate)` pairs of `s`.
    pub fn transitions_of(&self, s: VertexSubset) -> Vec<(VertexSubset, f64)> {
        self.index
            .get(&s)
            .map(|&i| {
                self.transitions[i]
                    .iter()
                    .map(|&(j, q)| (self.states[j].state, q))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.transitions
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().map(move |&(j, q)| (i, j, q)))
    }

    /// Largest transition decrement `h(S) - h(S')`.
    pub fn kappa(&self) -> f64 {
        self.edges()
            .map(|(i, j, _)| self.states[i].h - self.states[j].h)
            .fold(0.0, f64::max)
    }

    /// `max |b(S) - 1|` over non-target states.
    pub fn martingale_residual(&self) -> f64 {
        self.states
            .iter()
            .filter(|r| !r.target)
            .map(|r| (r.b - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `|sum time_in - E T|`.
    pub fn occupation_residual(&self) -> f64 {
        let total: f64 = self.states.iter().map(|r| r.time_in).sum();
        (total - self.expected_time).abs()
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Row {
            state: u64,
            h: f64,
            visit_prob: f64,
            time_in: f64,
        }
        let mut rows: Vec<Row> = self
            .states
            .iter()
            .map(|r| Row {
                state: r.state.0,
                h: r.h,
                visit_prob: r.visit_prob,
                time_in: r.time_in,
            })
            .collect();
        rows.sort_by_key(|r| r.state);
        serde_json::json!({
            "expected_time": self.expected_time,
            "variance": self.variance,
            "kappa": self.kappa(),
            "states": rows,
        })
    }
}

fn check_increasing(from: VertexSubset, to: VertexSubset) -> Result<()> {
    if !from.is_subset_of(to) || from == to {
        return Err(Error::NotIncreasing { from: from.0, to: to.0 });
    }
    Ok(())
}

/// Reachable states in topological order, with aggregated transitions.
struct StateGraph {
    states: Vec<VertexSubset>,
    targets: Vec<bool>,
    index: HashMap<VertexSubset, usize>,
    transitions: Vec<Vec<(usize, f64)>>,
}

/// Lazily enumerates the states reachable from the initial state, never
/// expanding targets. `allow_stay` admits `S -> S` (discrete chains only).
fn explore(
    initial: VertexSubset,
    is_target: &dyn Fn(VertexSubset) -> bool,
    transitions: &dyn Fn(VertexSubset, &mut Vec<(VertexSubset, f64)>),
    allow_stay: bool,
    cap: usize,
) -> Result<StateGraph> {
    let mut raw: HashMap<VertexSubset, Vec<(VertexSubset, f64)>> = HashMap::new();
    let mut stack = vec![initial];
    raw.insert(initial, Vec::new());
    let mut buf = Vec::new();
    while let Some(s) = stack.pop() {
        if is_target(s) {
            continue;
        }
        buf.clear();
        transitions(s, &mut buf);
        let mut merged: Vec<(VertexSubset, f64)> = Vec::with_capacity(buf.len());
        for &(t, q) in &buf {
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::InvalidRate { state: s.0, rate: q });
            }
            if !(allow_stay && t == s) {
                check_increasing(s, t)?;
            }
            match merged.iter_mut().find(|(u, _)| *u == t) {
                Some(entry) => entry.1 += q,
                None => merged.push((t, q)),
            }
        }
        for &(t, _) in &merged {
            if !raw.contains_key(&t) {
                if raw.len() >= cap {
                    return Err(Error::Capacity {
                        what: "reachable state count",
                        limit: cap,
                        actual: raw.len() + 1,
                        hint: "solve a smaller instance or use Monte Carlo estimates",
                    });
                }
                raw.insert(t, Vec::new());
                stack.push(t);
            }
        }
        raw.insert(s, merged);
    }

    let mut states: Vec<VertexSubset> = raw.keys().copied().collect();
    states.sort_by(|a, b| b.len().cmp(&a.len()).then(a.0.cmp(&b.0)));
    let index: HashMap<VertexSubset, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let targets: Vec<bool> = states.iter().map(|&s| is_target(s)).collect();
    let mut transitions = vec![Vec::new(); states.len()];
    for (i, &s) in states.iter().enumerate() {
        let mut list: Vec<(usize, f64)> = raw[&s].iter().map(|&(t, q)| (index[&t], q)).collect();
        list.sort_by_key(|&(j, _)| j);
        transitions[i] = list;
    }
    Ok(StateGraph {
        states,
        targets,
        index,
        transitions,
    })
}

/// Solves `h`, occupation measures, `E T` and `var T` exactly.
pub fn solve_hitting<C: IncreasingChain + ?Sized>(chain: &C) -> Result<ExactSolution> {
    solve_hitting_with_cap(chain, STATE_CAP)
}

pub fn solve_hitting_with_cap<C: IncreasingChain + ?Sized>(chain: &C, cap: usize) -> Result<ExactSolution> {
    let graph = explore(
        chain.initial(),
        &|s| chain.is_target(s),
        &|s, out| chain.transitions(s, out),
        false,
        cap,
    )?;
    let n = graph.states.len();
    let mut records: Vec<StateRecord> = graph
        .states
        .iter()
        .zip(&graph.targets)
        .map(|(&state, &target)| StateRecord {
            state,
            target,
            h: 0.0,
            visit_prob: 0.0,
            time_in: 0.0,
            total_rate: 0.0,
            a: 0.0,
            b: 0.0,
            second_moment: 0.0,
        })
        .collect();

    // Backward induction: successors always precede their predecessors.
    for i in 0..n {
        if records[i].target {
            continue;
        }
        let out = &graph.transitions[i];
        if out.is_empty() {
            return Err(Error::InfiniteHitting { state: records[i].state.0 });
        }
        let q_tot: f64 = out.iter().map(|&(_, q)| q).sum();
        let mean_next: f64 = out.iter().map(|&(j, q)| q * records[j].h).sum::<f64>() / q_tot;
        let second_next: f64 = out.iter().map(|&(j, q)| q * records[j].second_moment).sum::<f64>() / q_tot;
        let h = 1.0 / q_tot + mean_next;
        // T = tau + T' with tau ~ Exp(q_tot) independent of T'.
        let second = 2.0 / (q_tot * q_tot) + 2.0 * mean_next / q_tot + second_next;
        let rec = &mut records[i];
        rec.total_rate = q_tot;
        rec.h = h;
        rec.second_moment = second;
    }

    for i in 0..n {
        if records[i].target {
            continue;
        }
        let h = records[i].h;
        let (mut a, mut b) = (0.0, 0.0);
        for &(j, q) in &graph.transitions[i] {
            let d = h - records[j].h;
            a += q * d * d;
            b += q * d;
        }
        records[i].a = a;
        records[i].b = b;
    }

    // Forward push of visit probabilities, smallest states first.
    let initial = graph.index[&chain.initial()];
    records[initial].visit_prob = 1.0;
    for i in (0..n).rev() {
        if records[i].target {
            continue;
        }
        let p = records[i].visit_prob;
        if p == 0.0 {
            continue;
        }
        let q_tot = records[i].total_rate;
        for &(j, q) in &graph.transitions[i] {
            records[j].visit_prob += p * q / q_tot;
        }
    }

    let mut expected_time = 0.0;
    let mut variance = 0.0;
    for r in records.iter_mut() {
        if !r.target {
            r.time_in = r.visit_prob / r.total_rate;
            expected_time += r.time_in;
            variance += r.time_in * r.a;
        }
    }
    let root = records[initial];
    let variance_second_moment = root.second_moment - root.h * root.h;

    Ok(ExactSolution {
        states: records,
        index: graph.index,
        transitions: graph.transitions,
        initial,
        expected_time,
        variance,
        variance_second_moment,
    })
}

/// Outcome of the `var T / E T <= kappa` check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Lemma1Report {
    pub kappa: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// Checks `var T / E T <= kappa`, after verifying `h` does not increase
/// along any transition.
pub fn lemma1_bound(sol: &ExactSolution) -> Result<Lemma1Report> {
    for (i, j, _) in sol.edges() {
        let (from, to) = (&sol.states[i], &sol.states[j]);
        if to.h > from.h + 1e-12 {
            return Err(Error::Monotonicity {
                from: from.state.0,
                to: to.state.0,
                h_from: from.h,
                h_to: to.h,
            });
        }
    }
    let kappa = sol.kappa();
    let ratio = sol.variance / sol.expected_time;
    Ok(Lemma1Report {
        kappa,
        ratio,
        holds: ratio <= kappa + EXACT_TOL,
    })
}

/// Exact evaluation of the occupation-time bound
/// `var T / (E T)^2 <= 2 delta + eps + E int 1{q_delta(Z) >= eps} / E T`.
#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Report {
    pub delta: f64,
    pub epsilon: f64,
    /// `(state, q_delta(state))` for every non-target state.
    pub q_delta: Vec<(VertexSubset, f64)>,
    pub occupation_bad: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn lemma2_bound(sol: &ExactSolution, delta: f64, epsilon: f64) -> Result<Lemma2Report> {
    if !(delta > 0.0 && epsilon > 0.0 && delta.is_finite() && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lemma2 needs delta, epsilon > 0 (got {delta}, {epsilon})"
        )));
    }
    let threshold = 2.0 * delta * sol.expected_time;
    let mut q_delta = Vec::new();
    let mut occupation_bad = 0.0;
    for (i, rec) in sol.states.iter().enumerate() {
        if rec.target {
            continue;
        }
        let q: f64 = sol.transitions[i]
            .iter()
            .map(|&(j, rate)| (rate, rec.h - sol.states[j].h))
            .filter(|&(_, d)| d > threshold)
            .map(|(rate, d)| rate * d)
            .sum();
        if q >= epsilon {
            occupation_bad += rec.time_in;
        }
        q_delta.push((rec.state, q));
    }
    let lhs = sol.variance / (sol.expected_time * sol.expected_time);
    let rhs = 2.0 * delta + epsilon + occupation_bad / sol.expected_time;
    Ok(Lemma2Report {
        delta,
        epsilon,
        q_delta,
        occupation_bad,
        lhs,
        rhs,
        holds: lhs <= rhs + EXACT_TOL,
    })
}

/// Mean and variance of the step count of a discrete chain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiscreteMoments {
    pub mean: f64,
    pub variance: f64,
    pub states: usize,
}

/// First-step recursions for `E N` and `E N^2`, `N` the number of steps to
/// the target. Self-loops are solved in closed form.
pub fn solve_discrete<C: DiscreteIncreasingChain + ?Sized>(chain: &C) -> Result<DiscreteMoments> {
    let graph = explore(
        chain.initial(),
        &|s| chain.is_target(s),
        &|s, out| chain.transitions(s, out),
        true,
        STATE_CAP,
    )?;
    let n = graph.states.len();
    let mut mean = vec![0.0; n];
    let mut second = vec![0.0; n];
    for i in 0..n {
        if graph.targets[i] {
            continue;
        }
        let out = &graph.transitions[i];
        let total: f64 = out.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "transition probabilities out of state {:#x} sum to {total}",
                graph.states[i].0
            )));
        }
        let stay: f64 = out.iter().filter(|&&(j, _)| j == i).map(|&(_, p)| p).sum();
        let leave = 1.0 - stay;
        if leave <= 0.0 {
            return Err(Error::InfiniteHitting { state: graph.states[i].0 });
        }
        let moved = out.iter().filter(|&&(j, _)| j != i);
        let m_next: f64 = moved.clone().map(|&(j, p)| p * mean[j]).sum();
        let s_next: f64 = moved.map(|&(j, p)| p * second[j]).sum();
        // m = 1 + stay m + sum p m'   and   s = 1 + 2 E[N'] + E[N'^2] over all
        // successors including the self-loop.
        let m = (1.0 + m_next) / leave;
        let s = (1.0 + 2.0 * (stay * m + m_next) + s_next) / leave;
        mean[i] = m;
        second[i] = s;
    }
    let root = graph.index[&chain.initial()];
    Ok(DiscreteMoments {
        mean: mean[root],
        variance: second[root] - mean[root] * mean[root],
        states: n,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContinuizationReport {
    pub discrete_mean: f64,
    pub discrete_variance: f64,
    pub continuous_mean: f64,
    pub continuous_variance: f64,
    /// `|E T_cont - E T_disc|`
    pub mean_gap: f64,
    /// `|var T_cont - var T_disc - E T_disc|`
    pub variance_gap: f64,
    pub holds: bool,
}

/// Solves a discrete chain and its continuization and compares
/// `E T_cont = E T_disc`, `var T_cont = var T_disc + E T_disc`.
pub fn continuization_check<C: DiscreteIncreasingChain + ?Sized>(chain: &C) -> Result<ContinuizationReport> {
    continuization_check_tol(chain, 1e-10)
}

pub fn continuization_check_tol<C: DiscreteIncreasingChain + ?Sized>(
    chain: &C,
    tol: f64,
) -> Result<ContinuizationReport> {
    let disc = solve_discrete(chain)?;
    let cont = solve_hitting(&Continuized(chain))?;
    let mean_gap = (cont.expected_time - disc.mean).abs();
    let variance_gap = (cont.variance - disc.variance - disc.mean).abs();
    Ok(ContinuizationReport {
        discrete_mean: disc.mean,
        discrete_variance: disc.variance,
        continuous_mean: cont.expected_time,
        continuous_variance: cont.variance,
        mean_gap,
        variance_gap,
        holds: mean_gap <= tol && variance_gap <= tol,
    })
}

/// Random discrete increasing chain on subsets of `{0, .., dim-1}` from the
/// empty set to the full set. Each non-full state gets a self-loop with
/// probability 1/2 and one to three strict-superset successors.
pub fn random_discrete_chain<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> TableChain {
    let full = VertexSubset::full(dim);
    let mut chain = TableChain::new(VertexSubset::EMPTY, vec![full]);
    for mask in 0..full.0 {
        let s = VertexSubset(mask);
        let supersets: Vec<VertexSubset> = (mask + 1..=full.0)
            .map(VertexSubset)
            .filter(|&t| s.is_subset_of(t))
            .collect();
        let picks = rng.random_range(1..=supersets.len().min(3));
        let mut weights = Vec::new();
        let mut chosen: Vec<VertexSubset> = Vec::new();
        while chosen.len() < picks {
            let t = supersets[rng.random_range(0..supersets.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
                weights.push(rng.random_range(0.1..1.0));
            }
        }
        if rng.random_bool(0.5) {
            chosen.push(s);
            weights.push(rng.random_range(0.1..1.0));
        }
        let total: f64 = weights.iter().sum();
        for (t, w) in chosen.into_iter().zip(weights) {
            chain.add(s, t, w / total);
        }
    }
    chain
}
