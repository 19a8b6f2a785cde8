//! The random weighted complete bipartite graph.
//!
//! A [`GraphSpec`] fixes the two part sizes and a seed; the vertex set is
//! `n_b` black vertices and `n_w` white vertices, and every black–white pair
//! is an edge. Edge weights come from a [`WeightOracle`]: either evaluated
//! on demand from the seed (the normal mode, nothing is materialized) or
//! looked up in an explicit table (for hand-built fixtures).

use serde::{Deserialize, Serialize};

use crate::rng::{chain, unit_open, TAG_EDGE};
use crate::{Error, Result};

/// Side of the bipartition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colour {
    Black,
    White,
}

impl Colour {
    pub fn flip(self) -> Colour {
        match self {
            Colour::Black => Colour::White,
            Colour::White => Colour::Black,
        }
    }
}

/// A vertex, addressed by side and 0-based index within that side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexId {
    pub colour: Colour,
    pub index: u32,
}

impl VertexId {
    pub fn black(index: u32) -> Self {
        VertexId { colour: Colour::Black, index }
    }

    pub fn white(index: u32) -> Self {
        VertexId { colour: Colour::White, index }
    }
}

/// An edge, addressed by its two endpoints' indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId {
    pub black: u32,
    pub white: u32,
}

impl EdgeId {
    pub fn new(black: u32, white: u32) -> Self {
        EdgeId { black, white }
    }
}

/// Part sizes plus the seed all randomness for this instance derives from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n_b: u32,
    pub n_w: u32,
    pub seed: u64,
}

impl GraphSpec {
    /// Both sides must be nonempty.
    pub fn new(n_b: u32, n_w: u32, seed: u64) -> Result<Self> {
        if n_b == 0 || n_w == 0 {
            return Err(Error::invalid_input(format!(
                "part sizes must be positive, got n_b={n_b}, n_w={n_w}"
            )));
        }
        Ok(GraphSpec { n_b, n_w, seed })
    }

    /// Total number of vertices.
    pub fn n(&self) -> usize {
        self.n_b as usize + self.n_w as usize
    }

    /// Number of edges, `n_b * n_w`.
    pub fn edge_count(&self) -> u64 {
        self.n_b as u64 * self.n_w as u64
    }

    /// Black fraction of the vertex set.
    pub fn theta_hat(&self) -> f64 {
        self.n_b as f64 / self.n() as f64
    }

    pub fn contains(&self, v: VertexId) -> bool {
        match v.colour {
            Colour::Black => v.index < self.n_b,
            Colour::White => v.index < self.n_w,
        }
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        e.black < self.n_b && e.white < self.n_w
    }

    /// Dense 0-based numbering: blacks first, then whites.
    pub fn flat(&self, v: VertexId) -> usize {
        match v.colour {
            Colour::Black => v.index as usize,
            Colour::White => self.n_b as usize + v.index as usize,
        }
    }

    /// Inverse of [`GraphSpec::flat`].
    pub fn vertex_from_flat(&self, i: usize) -> VertexId {
        debug_assert!(i < self.n());
        if i < self.n_b as usize {
            VertexId::black(i as u32)
        } else {
            VertexId::white((i - self.n_b as usize) as u32)
        }
    }

    /// The same graph with the two sides exchanged.
    pub fn colour_swapped(&self) -> GraphSpec {
        GraphSpec { n_b: self.n_w, n_w: self.n_b, seed: self.seed }
    }
}

/// Source of edge weights, all strictly inside (0, 1).
///
/// `Implicit` evaluates the weight of edge `(b, w)` as a pure hash of
/// `(seed, b, w)` — constant memory, random access, identical across runs.
/// `Explicit` stores a row-major table, used by small hand-built fixtures
/// and fault-injection tests.
#[derive(Clone, Debug)]
pub enum WeightOracle {
    Implicit {
        seed: u64,
        /// When set, edge `(b, w)` reads the base weight of `(w, b)`;
        /// this is the colour-swapped view of the same weight assignment.
        swapped: bool,
    },
    Explicit {
        n_b: u32,
        n_w: u32,
        /// `table[b * n_w + w]` is the weight of edge `(b, w)`.
        table: Vec<f64>,
    },
}

impl WeightOracle {
    /// The on-demand oracle for `spec`'s seed.
    pub fn implicit(spec: &GraphSpec) -> Self {
        WeightOracle::Implicit { seed: spec.seed, swapped: false }
    }

    /// A materialized table; every entry must lie strictly in (0, 1).
    pub fn explicit(n_b: u32, n_w: u32, table: Vec<f64>) -> Result<Self> {
        let want = n_b as usize * n_w as usize;
        if table.len() != want {
            return Err(Error::invalid_input(format!(
                "weight table has {} entries, expected {} for {}x{}",
                table.len(),
                want,
                n_b,
                n_w
            )));
        }
        if let Some(w) = table.iter().find(|w| !(w.is_finite() && 0.0 < **w && **w < 1.0)) {
            return Err(Error::invalid_input(format!(
                "weights must lie strictly in (0, 1), got {w}"
            )));
        }
        Ok(WeightOracle::Explicit { n_b, n_w, table })
    }

    /// The colour-swapped view: edge `(b, w)` of the swapped graph has the
    /// weight of edge `(w, b)` here.
    pub fn transposed(&self) -> WeightOracle {
        match self {
            WeightOracle::Implicit { seed, swapped } => {
                WeightOracle::Implicit { seed: *seed, swapped: !swapped }
            }
            WeightOracle::Explicit { n_b, n_w, table } => {
                let mut t = vec![0.0; table.len()];
                for b in 0..*n_b as usize {
                    for w in 0..*n_w as usize {
                        t[w * *n_b as usize + b] = table[b * *n_w as usize + w];
                    }
                }
                WeightOracle::Explicit { n_b: *n_w, n_w: *n_b, table: t }
            }
        }
    }

    /// True when this oracle can serve `spec`'s edges.
    pub fn matches(&self, spec: &GraphSpec) -> bool {
        match self {
            WeightOracle::Implicit { .. } => true,
            WeightOracle::Explicit { n_b, n_w, .. } => *n_b == spec.n_b && *n_w == spec.n_w,
        }
    }

    /// Weight of edge `e`. For explicit tables the index must be in range.
    #[inline]
    pub fn weight(&self, e: EdgeId) -> f64 {
        match self {
            WeightOracle::Implicit { seed, swapped } => {
                let (b, w) = if *swapped { (e.white, e.black) } else { (e.black, e.white) };
                unit_open(chain(chain(chain(*seed, TAG_EDGE), b as u64), w as u64))
            }
            WeightOracle::Explicit { n_w, table, .. } => {
                table[e.black as usize * *n_w as usize + e.white as usize]
            }
        }
    }
}

/// Weight of edge `e`, with the index checks the hot path skips.
pub fn edge_weight(spec: &GraphSpec, oracle: &WeightOracle, e: EdgeId) -> Result<f64> {
    if !spec.contains_edge(e) {
        return Err(Error::invalid_input(format!(
            "edge ({}, {}) out of range for {}x{}",
            e.black, e.white, spec.n_b, spec.n_w
        )));
    }
    if !oracle.matches(spec) {
        return Err(Error::invalid_input(
            "weight table dimensions do not match the graph".to_string(),
        ));
    }
    Ok(oracle.weight(e))
}
