//! Named graph families used by scenarios and tests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

fn numbered(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Path `0 - 1 - .. - (n-1)` with unit rates.
pub fn path(n: usize) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter("path needs n >= 2".into()));
    }
    WeightedGraph::new(numbered(n), (0..n - 1).map(|i| (i, i + 1, 1.0)))
}

/// Complete graph on `n` vertices with unit rates.
pub fn complete(n: usize) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter("complete needs n >= 2".into()));
    }
    WeightedGraph::new(
        numbered(n),
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))),
    )
}

/// `rows x cols` grid with unit rates; vertex `r * cols + c`.
pub fn grid(rows: usize, cols: usize) -> Result<WeightedGraph> {
    if rows * cols < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 vertices".into()));
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1, 1.0));
            }
            if r + 1 < rows {
                edges.push((v, v + cols, 1.0));
            }
        }
    }
    WeightedGraph::new(numbered(rows * cols), edges)
}

/// Two unit cliques `K_c1` and `K_c2` joined by one edge of rate
/// `bridge_rate` between vertex `c1 - 1` and vertex `c1`.
pub fn bridge(c1: usize, c2: usize, bridge_rate: f64) -> Result<WeightedGraph> {
    if c1 == 0 || c2 == 0 {
        return Err(Error::InvalidParameter("bridge cliques need >= 1 vertex".into()));
    }
    let mut edges = Vec::new();
    for (offset, size) in [(0, c1), (c1, c2)] {
        for i in 0..size {
            for j in i + 1..size {
                edges.push((offset + i, offset + j, 1.0));
            }
        }
    }
    edges.push((c1 - 1, c1, bridge_rate));
    WeightedGraph::new(numbered(c1 + c2), edges)
}

/// Erdos-Renyi `G(n, p)` conditioned on connectivity (rejection), with rates
/// uniform on `weight_range` rounded to 4 decimals.
pub fn random_gnp<R: Rng + ?Sized>(n: usize, p: f64, weight_range: (f64, f64), rng: &mut R) -> Result<WeightedGraph> {
    let (lo, hi) = weight_range;
    if n < 2 || !(0.0..=1.0).contains(&p) || !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!(
            "random_gnp(n={n}, p={p}, range=({lo}, {hi}))"
        )));
    }
    for _ in 0..10_000 {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    let w = lo + (hi - lo) * rng.random::<f64>();
                    let w = ((w * 1e4).round() / 1e4).max(lo.max(1e-4));
                    edges.push((i, j, w));
                }
            }
        }
        match WeightedGraph::new(numbered(n), edges) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected { .. }) | Err(Error::EmptyGraph) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidParameter(format!(
        "random_gnp(n={n}, p={p}) failed to produce a connected graph"
    )))
}

/// Serializable description of a named family member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Path { n: usize },
    Complete { n: usize },
    Grid { rows: usize, cols: usize },
    Bridge { c1: usize, c2: usize, bridge_rate: f64 },
    RandomGnp {
        n: usize,
        p: f64,
        weight_range: (f64, f64),
        #[serde(default)]
        seed: u64,
    },
}

impl FamilySpec {
    pub fn build(&self) -> Result<WeightedGraph> {
        match *self {
            FamilySpec::Path { n } => path(n),
            FamilySpec::Complete { n } => complete(n),
            FamilySpec::Grid { rows, cols } => grid(rows, cols),
            FamilySpec::Bridge { c1, c2, bridge_rate } => bridge(c1, c2, bridge_rate),
            FamilySpec::RandomGnp {
                n,
                p,
                weight_range,
                seed,
            } => random_gnp(n, p, weight_range, &mut crate::rng::stream(seed, 0)),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            FamilySpec::Path { n } => format!("path({n})"),
            FamilySpec::Complete { n } => format!("complete({n})"),
            FamilySpec::Grid { rows, cols } => format!("grid({rows},{cols})"),
            FamilySpec::Bridge { c1, c2, bridge_rate } => format!("bridge({c1},{c2},{bridge_rate})"),
            FamilySpec::RandomGnp { n, p, weight_range, seed } => {
                format!("random_gnp({n},{p},[{},{}],seed={seed})", weight_range.0, weight_range.1)
            }
        }
    }
}

/// One-line descriptions for `families`.
pub const CATALOG: &[(&str, &str)] = &[
    ("path", "path(n): 0 - 1 - .. - n-1, unit rates"),
    ("complete", "complete(n): K_n, unit rates"),
    ("grid", "grid(rows, cols): rectangular lattice, unit rates, corners 0 and rows*cols-1"),
    ("bridge", "bridge(c1, c2, bridge_rate): unit K_c1 and K_c2 joined by one edge"),
    ("random_gnp", "random_gnp(n, p, weight_range, seed): connected G(n,p), uniform rates"),
];
