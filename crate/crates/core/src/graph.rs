//! Weighted graphs, vertex subsets, multigraphs and exhaustive cut enumeration.
//!
//! Every process in the crate runs on a [`WeightedGraph`]: a finite, simple,
//! connected graph with a positive rate attached to each edge. Graphs are
//! immutable once built and can be shared freely between worker threads.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest vertex count accepted by exhaustive enumeration (cuts, exact chains).
pub const EXACT_VERTEX_CAP: usize = 20;

/// A set of vertex ids stored as a 64-bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexSubset(pub u64);

impl VertexSubset {
    pub const EMPTY: VertexSubset = VertexSubset(0);

    pub fn singleton(v: usize) -> Self {
        debug_assert!(v < 64);
        VertexSubset(1 << v)
    }

    /// The set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 64);
        if n == 64 {
            VertexSubset(u64::MAX)
        } else {
            VertexSubset((1u64 << n) - 1)
        }
    }

    #[inline]
    pub fn contains(self, v: usize) -> bool {
        self.0 >> v & 1 == 1
    }

    #[inline]
    pub fn with(self, v: usize) -> Self {
        VertexSubset(self.0 | 1 << v)
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn union(self, other: Self) -> Self {
        VertexSubset(self.0 | other.0)
    }

    /// True when `other` contains every element of `self`.
    #[inline]
    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & other.0 == self.0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(v)
            }
        })
    }
}

impl fmt::Debug for VertexSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<usize> for VertexSubset {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().fold(VertexSubset::EMPTY, VertexSubset::with)
    }
}

/// An undirected edge `u -- v` with rate `rate` (units 1/time). Always `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub rate: f64,
}

impl Edge {
    /// The endpoint opposite `x`.
    #[inline]
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Finite, simple, connected graph with positive edge rates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    /// `adjacency[x]` lists `(neighbor, edge index)` sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl WeightedGraph {
    /// Builds and validates a graph from labels and `(u, v, rate)` triples.
    pub fn new(labels: Vec<String>, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let n = labels.len();
        let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
        let mut out = Vec::new();
        for (a, b, rate) in edges {
            if a >= n {
                return Err(Error::UnknownVertex(a.to_string()));
            }
            if b >= n {
                return Err(Error::UnknownVertex(b.to_string()));
            }
            if a == b {
                return Err(Error::SelfLoop(labels[a].clone()));
            }
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::NonPositiveWeight {
                    line: out.len() + 1,
                    weight: rate.to_string(),
                });
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if seen.insert((u, v), ()).is_some() {
                return Err(Error::DuplicateEdge {
                    u: labels[u].clone(),
                    v: labels[v].clone(),
                });
            }
            out.push(Edge { u, v, rate });
        }
        Self::from_validated(labels, out)
    }

    fn from_validated(labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let n = labels.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.u].push((e.v, i));
            adjacency[e.v].push((e.u, i));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let g = WeightedGraph {
            labels,
            edges,
            adjacency,
        };
        let components = g.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(g)
    }

    fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(x) = stack.pop() {
                for &(y, _) in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        components
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn vertex_id(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownVertex(label.to_string()))
    }

    /// `(neighbor, edge index)` pairs, sorted by neighbor id.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let list = &self.adjacency[a];
        list.binary_search_by_key(&b, |&(y, _)| y).ok().map(|i| list[i].1)
    }

    pub fn weighted_degree(&self, v: usize) -> f64 {
        self.adjacency[v].iter().map(|&(_, e)| self.edges[e].rate).sum()
    }

    pub fn total_rate(&self) -> f64 {
        self.edges.iter().map(|e| e.rate).sum()
    }

    /// The smallest edge rate `w_*`.
    pub fn min_rate(&self) -> f64 {
        self.edges.iter().map(|e| e.rate).fold(f64::INFINITY, f64::min)
    }

    /// `w(S, y) = sum over s in S of w_sy`.
    pub fn rate_into(&self, set: VertexSubset, y: usize) -> f64 {
        self.adjacency[y]
            .iter()
            .filter(|&&(s, _)| set.contains(s))
            .map(|&(_, e)| self.edges[e].rate)
            .sum()
    }

    /// `w(S, S^c)`: total rate of edges with exactly one endpoint in `set`.
    pub fn cut_weight(&self, set: VertexSubset) -> f64 {
        self.edges
            .iter()
            .filter(|e| set.contains(e.u) != set.contains(e.v))
            .map(|e| e.rate)
            .sum()
    }

    /// Serializes to the edge-list text format. Weights are written in the
    /// shortest form that parses back to the same `f64`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&format!("{} {} {}\n", self.labels[e.u], self.labels[e.v], e.rate));
        }
        out
    }
}

/// Parses the whitespace-separated `"u v w"` edge-list format. `#` starts a
/// comment; blank lines are skipped. Vertex ids follow first appearance.
pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut labels: Vec<String> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut seen: HashMap<(usize, usize), ()> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected \"u v w\", found {} fields", tokens.len()),
            });
        }
        let (a, b, w) = (tokens[0], tokens[1], tokens[2]);
        if a == b {
            return Err(Error::SelfLoop(a.to_string()));
        }
        let rate: f64 = w.parse().map_err(|_| Error::Parse {
            line,
            message: format!("weight {w:?} is not a decimal number"),
        })?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::NonPositiveWeight {
                line,
                weight: w.to_string(),
            });
        }
        if significant_digits(w) > 15 {
            return Err(Error::ExcessPrecision {
                line,
                weight: w.to_string(),
            });
        }
        let mut intern = |name: &str| -> usize {
            if let Some(&id) = ids.get(name) {
                return id;
            }
            let id = labels.len();
            labels.push(name.to_string());
            ids.insert(name.to_string(), id);
            id
        };
        let ia = intern(a);
        let ib = intern(b);
        let (u, v) = if ia < ib { (ia, ib) } else { (ib, ia) };
        if seen.insert((u, v), ()).is_some() {
            return Err(Error::DuplicateEdge {
                u: labels[u].clone(),
                v: labels[v].clone(),
            });
        }
        edges.push(Edge { u, v, rate });
    }
    WeightedGraph::from_validated(labels, edges)
}

/// Count of significant decimal digits in a numeric token (mantissa only).
fn significant_digits(token: &str) -> usize {
    let mantissa = token
        .split(|c| c == 'e' || c == 'E')
        .next()
        .unwrap_or("")
        .trim_start_matches(['+', '-']);
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let trimmed = digits.trim_start_matches('0');
    if mantissa.contains('.') {
        trimmed.len()
    } else {
        // Trailing zeros of an integer are not significant.
        trimmed.trim_end_matches('0').len().max(usize::from(!trimmed.is_empty()))
    }
}

/// Minimum cut over proper nonempty subsets, with a witness side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinCut {
    pub weight: f64,
    pub witness: VertexSubset,
}

/// Exhaustive minimum cut `gamma = min_S w(S, S^c)`.
///
/// Walks all `2^(n-1) - 1` proper cuts in Gray-code order (the last vertex
/// never moves), updating the cut weight incrementally.
pub fn min_cut_weight(g: &WeightedGraph) -> Result<MinCut> {
    let n = g.vertex_count();
    if n > EXACT_VERTEX_CAP {
        return Err(Error::Capacity {
            what: "vertex count for exhaustive min cut",
            limit: EXACT_VERTEX_CAP,
            actual: n,
            hint: "use a max-flow based min-cut for graphs this large",
        });
    }
    let free = n - 1;
    let mut side = VertexSubset::EMPTY;
    let mut weight = 0.0;
    let mut best_weight = f64::INFINITY;
    let mut witness = VertexSubset::EMPTY;
    for step in 1u64..(1u64 << free) {
        let v = step.trailing_zeros() as usize;
        let entering = !side.contains(v);
        for &(y, e) in g.neighbors(v) {
            let w = g.edges()[e].rate;
            if side.contains(y) == entering {
                weight -= w;
            } else {
                weight += w;
            }
        }
        side = VertexSubset(side.0 ^ (1 << v));
        if weight < best_weight {
            best_weight = weight;
            witness = side;
        }
    }
    // Report the witness weight summed directly, free of Gray-walk drift.
    Ok(MinCut {
        weight: g.cut_weight(witness),
        witness,
    })
}

/// A multigraph over a fixed base graph: `multiplicity[e]` parallel copies of
/// base edge `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multigraph<'g> {
    base: &'g WeightedGraph,
    multiplicity: Vec<u32>,
}

impl<'g> Multigraph<'g> {
    pub fn empty(base: &'g WeightedGraph) -> Self {
        Multigraph {
            base,
            multiplicity: vec![0; base.edge_count()],
        }
    }

    pub fn with_multiplicities(base: &'g WeightedGraph, multiplicity: Vec<u32>) -> Result<Self> {
        if multiplicity.len() != base.edge_count() {
            return Err(Error::InvalidParameter(format!(
                "{} multiplicities for {} edges",
                multiplicity.len(),
                base.edge_count()
            )));
        }
        Ok(Multigraph { base, multiplicity })
    }

    /// Every base edge with the same multiplicity.
    pub fn uniform(base: &'g WeightedGraph, copies: u32) -> Self {
        Multigraph {
            base,
            multiplicity: vec![copies; base.edge_count()],
        }
    }

    pub fn base(&self) -> &'g WeightedGraph {
        self.base
    }

    pub fn multiplicity(&self) -> &[u32] {
        &self.multiplicity
    }

    pub fn add_copy(&mut self, edge: usize) {
        self.multiplicity[edge] += 1;
    }

    pub fn total_edges(&self) -> usize {
        self.multiplicity.iter().map(|&m| m as usize).sum()
    }

    /// Expands copies into a flat list of base-edge indices.
    pub fn copies(&self) -> Vec<usize> {
        self.multiplicity
            .iter()
            .enumerate()
            .flat_map(|(e, &m)| std::iter::repeat_n(e, m as usize))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_path() {
        let g = parse_edge_list("a b 1\nb c 2").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.labels(), &["a", "b", "c"]);
        assert_eq!(g.edges()[0], Edge { u: 0, v: 1, rate: 1.0 });
        assert_eq!(g.edges()[1], Edge { u: 1, v: 2, rate: 2.0 });
    }

    #[test]
    fn comments_and_blank_lines() {
        let g = parse_edge_list("# header\n\na b 1 # trailing\n  b c 0.5\n").unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn rejects_duplicate_edge() {
        assert!(matches!(
            parse_edge_list("a b 1\na b 2"),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            parse_edge_list("a b 1\nb a 2"),
            Err(Error::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn rejects_disconnected() {
        assert!(matches!(
            parse_edge_list("a b 1\nc d 1"),
            Err(Error::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(matches!(parse_edge_list("a b 0"), Err(Error::NonPositiveWeight { .. })));
        assert!(matches!(parse_edge_list("a b -1"), Err(Error::NonPositiveWeight { .. })));
        assert!(matches!(parse_edge_list("a b inf"), Err(Error::NonPositiveWeight { .. })));
        assert!(matches!(parse_edge_list("a b x"), Err(Error::Parse { .. })));
        assert!(matches!(parse_edge_list("a b"), Err(Error::Parse { .. })));
        assert!(matches!(parse_edge_list("a a 1"), Err(Error::SelfLoop(_))));
        assert!(matches!(parse_edge_list(""), Err(Error::EmptyGraph)));
        assert!(matches!(
            parse_edge_list("a b 0.1234567890123456"),
            Err(Error::ExcessPrecision { .. })
        ));
        assert!(parse_edge_list("a b 0.123456789012345").is_ok());
        assert!(parse_edge_list("a b 1e-3").is_ok());
    }

    #[test]
    fn significant_digit_count() {
        assert_eq!(significant_digits("0.001"), 1);
        assert_eq!(significant_digits("1200"), 2);
        assert_eq!(significant_digits("1200.0"), 5);
        assert_eq!(significant_digits("-3.25e7"), 3);
    }

    #[test]
    fn min_cut_examples() {
        let path = parse_edge_list("a b 1\nb c 2").unwrap();
        assert_eq!(min_cut_weight(&path).unwrap().weight, 1.0);

        let k3 = parse_edge_list("a b 1\nb c 1\na c 1").unwrap();
        assert_eq!(min_cut_weight(&k3).unwrap().weight, 2.0);
    }

    #[test]
    fn min_cut_bridge_matches_brute_force() {
        let text = "a b 1\nb c 1\na c 1\nd e 1\ne f 1\nd f 1\nc d 0.1";
        let g = parse_edge_list(text).unwrap();
        let cut = min_cut_weight(&g).unwrap();
        // Oracle: direct enumeration of every proper subset.
        let n = g.vertex_count();
        let brute = (1u64..(1 << n) - 1)
            .map(|m| g.cut_weight(VertexSubset(m)))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(cut.weight, brute);
        assert!((cut.weight - 0.1).abs() < 1e-15);
        assert_eq!(g.cut_weight(cut.witness), cut.weight);
    }

    #[test]
    fn min_cut_capacity_error() {
        let labels: Vec<String> = (0..21).map(|i| i.to_string()).collect();
        let edges = (0..20).map(|i| (i, i + 1, 1.0));
        let g = WeightedGraph::new(labels, edges).unwrap();
        assert!(matches!(min_cut_weight(&g), Err(Error::Capacity { .. })));
    }

    #[test]
    fn subset_ops() {
        let s: VertexSubset = [0, 3, 5].into_iter().collect();
        assert_eq!(s.len(), 3);
        assert!(s.contains(3) && !s.contains(4));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 3, 5]);
        assert!(VertexSubset::singleton(3).is_subset_of(s));
        assert_eq!(VertexSubset::full(4).0, 0b1111);
    }

    #[test]
    fn rate_into_sums_frontier_edges() {
        let k3 = parse_edge_list("a b 1\nb c 2\na c 3").unwrap();
        let ab = VertexSubset(0b011);
        assert_eq!(k3.rate_into(ab, 2), 5.0);
        assert_eq!(k3.edge_between(2, 0), Some(2));
        assert_eq!(k3.weighted_degree(0), 4.0);
    }
}
