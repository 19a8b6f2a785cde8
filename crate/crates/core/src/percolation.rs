//! Threshold subgraphs and their components.
//!
//! Keeping every edge of weight at most `p` yields a bipartite random
//! subgraph. Its connected components can be read directly off a full
//! traversal trace: cutting the visit order after every arrival edge whose
//! weight exceeds `p` splits the ranks into consecutive intervals, and each
//! interval is exactly one component. [`verify_interval_representation`]
//! checks that claim against a union-find computed from the realized edge
//! set, which is the brute-force ground truth used throughout the tests.

use crate::graph::{EdgeId, GraphSpec, VertexId, WeightOracle};
use crate::prim::PrimTrace;
use crate::rng::{chain, Stream, TAG_PERC};
use crate::unionfind::DisjointSets;
use crate::{Error, Result};

fn check_probability(p: f64) -> Result<()> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(Error::invalid_input(format!("p must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Every edge of weight at most `p`, in lexicographic (black, white) order.
///
/// This is the exhaustive filter over all `n_b * n_w` pairs, so the result
/// is exactly coupled to the weights a traversal of the same oracle sees.
pub fn realized_edges(spec: &GraphSpec, oracle: &WeightOracle, p: f64) -> Result<Vec<EdgeId>> {
    check_probability(p)?;
    if !oracle.matches(spec) {
        return Err(Error::invalid_input(
            "weight table dimensions do not match the graph".to_string(),
        ));
    }
    let mut out = Vec::new();
    for b in 0..spec.n_b {
        for w in 0..spec.n_w {
            let e = EdgeId::new(b, w);
            if oracle.weight(e) <= p {
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// An independent Bernoulli(p) edge set at the same density, sampled with
/// geometric gap-skipping in O(edges drawn) instead of O(n_b * n_w).
///
/// Each black vertex gets its own substream keyed by `(seed, "perc", b)`,
/// so the sample is reproducible and parallelizable per row. The result is
/// *not* coupled to the weight oracle; exact-coupling checks must use
/// [`realized_edges`].
pub fn sample_edges_independent(spec: &GraphSpec, p: f64) -> Result<Vec<EdgeId>> {
    check_probability(p)?;
    if p == 0.0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    if p == 1.0 {
        for b in 0..spec.n_b {
            for w in 0..spec.n_w {
                out.push(EdgeId::new(b, w));
            }
        }
        return Ok(out);
    }
    let ln_q = (1.0 - p).ln();
    for b in 0..spec.n_b {
        let mut stream = Stream::new(chain(chain(spec.seed, TAG_PERC), b as u64));
        let mut idx: i64 = -1;
        loop {
            let gap = (stream.next_unit().ln() / ln_q).floor();
            if gap >= spec.n_w as f64 {
                break;
            }
            idx += gap as i64 + 1;
            if idx >= spec.n_w as i64 {
                break;
            }
            out.push(EdgeId::new(b, idx as u32));
        }
    }
    Ok(out)
}

/// A partition of the dense vertex numbering in canonical form: members
/// sorted within each block, blocks sorted by smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

/// Connected components of the given edge set via union-find — the oracle
/// the interval representation is checked against.
pub fn components_bruteforce(spec: &GraphSpec, edges: &[EdgeId]) -> Result<Partition> {
    let mut ds = DisjointSets::new(spec.n());
    for e in edges {
        if !spec.contains_edge(*e) {
            return Err(Error::invalid_input(format!(
                "edge ({}, {}) out of range for {}x{}",
                e.black, e.white, spec.n_b, spec.n_w
            )));
        }
        ds.union(
            spec.flat(VertexId::black(e.black)),
            spec.flat(VertexId::white(e.white)),
        );
    }
    Ok(Partition { blocks: ds.sets() })
}

/// Component structure of the threshold subgraph, expressed as cut points
/// of the visit order: ranks `thresholds[j-1]+1 ..= thresholds[j]` form the
/// (j+1)-th component. The last threshold is always the total vertex count.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentIntervals {
    pub p: f64,
    pub thresholds: Vec<usize>,
}

impl ComponentIntervals {
    pub fn component_count(&self) -> usize {
        self.thresholds.len()
    }

    /// Inclusive rank intervals `(lo, hi)`, one per component.
    pub fn intervals(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.thresholds.len());
        let mut lo = 1;
        for &hi in &self.thresholds {
            out.push((lo, hi));
            lo = hi + 1;
        }
        out
    }
}

/// Cut the visit order of a full trace at every arrival edge of weight
/// above `p`.
pub fn intervals_from_prim(trace: &PrimTrace, p: f64) -> Result<ComponentIntervals> {
    check_probability(p)?;
    if !trace.is_full() {
        return Err(Error::invalid_input(format!(
            "component intervals need a full trace; got {} of {} vertices",
            trace.len(),
            trace.spec().n()
        )));
    }
    let mut thresholds = Vec::new();
    for (i, &(_, w)) in trace.edges().iter().enumerate() {
        if w > p {
            thresholds.push(i + 1);
        }
    }
    thresholds.push(trace.len());
    Ok(ComponentIntervals { p, thresholds })
}

/// Ranks that open a new component: rank 1, plus every rank just after a
/// cut. In the threshold subgraph these are exactly the vertices of lowest
/// rank within their component.
pub fn lead_ranks(intervals: &ComponentIntervals) -> Vec<usize> {
    intervals.intervals().iter().map(|&(lo, _)| lo).collect()
}

/// Materialize the interval components as a vertex partition (dense ids).
pub fn interval_partition(trace: &PrimTrace, intervals: &ComponentIntervals) -> Partition {
    let spec = trace.spec();
    let mut blocks = Vec::with_capacity(intervals.component_count());
    for (lo, hi) in intervals.intervals() {
        let mut block: Vec<usize> =
            (lo..=hi).map(|k| spec.flat(trace.sigma_at(k))).collect();
        block.sort_unstable();
        blocks.push(block);
    }
    blocks.sort_by_key(|b| b[0]);
    Partition { blocks }
}

/// True when the interval components of the trace coincide, as vertex
/// sets, with the union-find components of the realized edge set.
pub fn verify_interval_representation(
    trace: &PrimTrace,
    p: f64,
    spec: &GraphSpec,
    oracle: &WeightOracle,
) -> Result<bool> {
    if spec != trace.spec() {
        return Err(Error::invalid_input(
            "trace was produced for a different graph".to_string(),
        ));
    }
    let intervals = intervals_from_prim(trace, p)?;
    let from_trace = interval_partition(trace, &intervals);
    let ground_truth = components_bruteforce(spec, &realized_edges(spec, oracle, p)?)?;
    Ok(from_trace == ground_truth)
}

/// Size statistics of the largest threshold component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GiantStats {
    /// Vertices in the largest component (ties go to the earliest interval).
    pub size: usize,
    pub black_size: usize,
    pub white_size: usize,
    /// Size of the second-largest component, 0 if there is only one.
    pub second_size: usize,
    /// Rank interval `[k_minus, k_plus]` the largest component occupies.
    pub k_minus: usize,
    pub k_plus: usize,
}

/// Locate the largest component among the intervals of a full trace.
pub fn giant_stats(trace: &PrimTrace, intervals: &ComponentIntervals) -> Result<GiantStats> {
    if *intervals.thresholds.last().unwrap_or(&0) != trace.len() {
        return Err(Error::invalid_input(
            "intervals do not cover the trace".to_string(),
        ));
    }
    let ivs = intervals.intervals();
    let mut best = 0usize;
    for (i, &(lo, hi)) in ivs.iter().enumerate() {
        if hi - lo > ivs[best].1 - ivs[best].0 {
            best = i;
        }
    }
    let (k_minus, k_plus) = ivs[best];
    let mut second = 0usize;
    for (i, &(lo, hi)) in ivs.iter().enumerate() {
        if i != best {
            second = second.max(hi - lo + 1);
        }
    }
    let black_size = trace.black_prefix(k_plus) - trace.black_prefix(k_minus - 1);
    Ok(GiantStats {
        size: k_plus - k_minus + 1,
        black_size,
        white_size: (k_plus - k_minus + 1) - black_size,
        second_size: second,
        k_minus,
        k_plus,
    })
}
