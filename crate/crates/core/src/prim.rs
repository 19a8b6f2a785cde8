//! Minimum-weight-first graph traversal.
//!
//! Starting from a single vertex, repeatedly add the endpoint of the
//! cheapest edge leaving the visited set. On a connected graph with
//! distinct weights the visited set after the last step spans the minimum
//! spanning tree; the order in which vertices arrive is the object of
//! interest here, in particular how the two colour classes interleave.
//!
//! The engine is the dense O(n) -per-step variant: for every unvisited
//! vertex it keeps the cheapest edge into the visited set, scans for the
//! minimum, and after adding a vertex refreshes only the opposite colour
//! class (same-colour pairs are never adjacent). Ties are broken by the
//! lexicographic order of the edge's (black, white) index pair, so the
//! traversal is a pure function of the weight assignment.

use serde::{Deserialize, Serialize};

use crate::graph::{Colour, EdgeId, GraphSpec, VertexId, WeightOracle};
use crate::rng::{chain, Stream, TAG_START};
use crate::{Error, Result};

/// How the first vertex is chosen. The uniform variants draw from a
/// dedicated substream of the graph seed, so the choice is reproducible
/// and independent of the edge weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPolicy {
    UniformAll,
    UniformBlack,
    UniformWhite,
    Fixed(VertexId),
}

impl Default for StartPolicy {
    fn default() -> Self {
        StartPolicy::UniformAll
    }
}

/// Record of one traversal.
///
/// Ranks are 1-based throughout: `sigma(1)` is the start vertex, edge `k`
/// (for `k` in `[1, len-1]`) is the edge along which vertex `sigma(k+1)`
/// was reached, and its weight is the minimum over all edges crossing from
/// the first `k` vertices to the rest.
#[derive(Clone, Debug)]
pub struct PrimTrace {
    spec: GraphSpec,
    sigma: Vec<VertexId>,
    edges: Vec<(EdgeId, f64)>,
    black_prefix: Vec<usize>,
    tau_b: Vec<usize>,
}

impl PrimTrace {
    /// Assemble a trace from a visit order and edge list without running
    /// the traversal. Prefix counts and hitting ranks are recomputed from
    /// `sigma`; nothing else is validated. This exists for hand-built
    /// fixtures and fault-injection tests, which deliberately construct
    /// traces no real run could produce.
    pub fn from_raw_parts(
        spec: GraphSpec,
        sigma: Vec<VertexId>,
        edges: Vec<(EdgeId, f64)>,
    ) -> PrimTrace {
        assert_eq!(edges.len() + 1, sigma.len(), "need exactly len-1 edges");
        let mut trace = PrimTrace {
            spec,
            sigma: Vec::new(),
            edges,
            black_prefix: Vec::new(),
            tau_b: Vec::new(),
        };
        for v in sigma {
            trace.push_vertex(v);
        }
        trace
    }

    fn push_vertex(&mut self, v: VertexId) {
        let blacks = self.black_prefix.last().copied().unwrap_or(0);
        self.sigma.push(v);
        match v.colour {
            Colour::Black => {
                self.black_prefix.push(blacks + 1);
                self.tau_b.push(self.sigma.len());
            }
            Colour::White => self.black_prefix.push(blacks),
        }
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    /// Number of vertices visited.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// True when every vertex of the graph was visited.
    pub fn is_full(&self) -> bool {
        self.len() == self.spec.n()
    }

    /// Visit order; `sigma()[k-1]` is the vertex of rank `k`.
    pub fn sigma(&self) -> &[VertexId] {
        &self.sigma
    }

    /// Vertex of rank `k` (1-based).
    pub fn sigma_at(&self, k: usize) -> VertexId {
        assert!(1 <= k && k <= self.len(), "rank {k} out of range");
        self.sigma[k - 1]
    }

    /// Arrival edges with their weights; entry `k-1` joins rank `k+1` to
    /// one of the first `k` vertices.
    pub fn edges(&self) -> &[(EdgeId, f64)] {
        &self.edges
    }

    /// Number of black vertices among the first `k` ranks (`k = 0` gives 0).
    pub fn black_prefix(&self, k: usize) -> usize {
        assert!(k <= self.len(), "rank {k} out of range");
        if k == 0 {
            0
        } else {
            self.black_prefix[k - 1]
        }
    }

    /// Ranks at which black vertices arrive: `tau_b()[j-1]` is the rank of
    /// the j-th black vertex, strictly increasing.
    pub fn tau_b(&self) -> &[usize] {
        &self.tau_b
    }

    /// Number of black vertices visited.
    pub fn black_count(&self) -> usize {
        self.tau_b.len()
    }

    /// Rank (1-based) of every vertex, indexed by dense vertex number;
    /// `None` for vertices the traversal never reached.
    pub fn ranks_flat(&self) -> Vec<Option<usize>> {
        let mut ranks = vec![None; self.spec.n()];
        for (i, &v) in self.sigma.iter().enumerate() {
            ranks[self.spec.flat(v)] = Some(i + 1);
        }
        ranks
    }
}

/// Fraction of black vertices among the first `k` visited, `1 <= k <= len`.
pub fn colour_ratio(trace: &PrimTrace, k: usize) -> Result<f64> {
    if k == 0 || k > trace.len() {
        return Err(Error::invalid_input(format!(
            "rank {k} outside [1, {}]",
            trace.len()
        )));
    }
    Ok(trace.black_prefix(k) as f64 / k as f64)
}

/// [`colour_ratio`] evaluated at each requested rank.
pub fn ratio_trajectory(trace: &PrimTrace, ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    ks.iter().map(|&k| colour_ratio(trace, k).map(|r| (k, r))).collect()
}

/// Candidate order: weight first, then the edge's (black, white) pair.
#[inline]
fn cand_lt(w1: f64, e1: EdgeId, w2: f64, e2: EdgeId) -> bool {
    if w1 != w2 {
        w1 < w2
    } else {
        (e1.black, e1.white) < (e2.black, e2.white)
    }
}

fn resolve_start(spec: &GraphSpec, policy: StartPolicy) -> Result<VertexId> {
    let mut stream = Stream::new(chain(spec.seed, TAG_START));
    let v = match policy {
        StartPolicy::UniformAll => spec.vertex_from_flat(stream.next_below(spec.n() as u64) as usize),
        StartPolicy::UniformBlack => VertexId::black(stream.next_below(spec.n_b as u64) as u32),
        StartPolicy::UniformWhite => VertexId::white(stream.next_below(spec.n_w as u64) as u32),
        StartPolicy::Fixed(v) => v,
    };
    if !spec.contains(v) {
        return Err(Error::invalid_input(format!(
            "start vertex {v:?} not in a {}x{} graph",
            spec.n_b, spec.n_w
        )));
    }
    Ok(v)
}

/// Run the traversal for `k_max` steps (`None` = visit everything).
///
/// Costs O(len * n) oracle evaluations and scans, O(n) working memory.
pub fn run_prim(
    spec: &GraphSpec,
    oracle: &WeightOracle,
    policy: StartPolicy,
    k_max: Option<usize>,
) -> Result<PrimTrace> {
    if !oracle.matches(spec) {
        return Err(Error::invalid_input(
            "weight table dimensions do not match the graph".to_string(),
        ));
    }
    let n = spec.n();
    let k_max = k_max.unwrap_or(n);
    if k_max == 0 || k_max > n {
        return Err(Error::invalid_input(format!("k_max {k_max} outside [1, {n}]")));
    }

    let mut trace = PrimTrace {
        spec: *spec,
        sigma: Vec::with_capacity(k_max),
        edges: Vec::with_capacity(k_max.saturating_sub(1)),
        black_prefix: Vec::with_capacity(k_max),
        tau_b: Vec::new(),
    };

    // Cheapest crossing edge per unvisited vertex, plus the unvisited
    // vertices themselves as swap-remove lists (one per side) so both the
    // selection scan and the refresh loop touch only live entries. The
    // list order is arbitrary; selection uses the canonical total order on
    // (weight, edge), so results do not depend on it.
    let n_b = spec.n_b as usize;
    let mut best_w = vec![f64::INFINITY; n];
    let mut best_edge = vec![EdgeId::new(u32::MAX, u32::MAX); n];
    let mut out_black: Vec<u32> = (0..spec.n_b).collect();
    let mut out_white: Vec<u32> = (0..spec.n_w).map(|w| spec.n_b + w).collect();
    let mut pos: Vec<usize> = (0..n).map(|f| if f < n_b { f } else { f - n_b }).collect();

    let remove = |f: usize, out: &mut Vec<u32>, pos: &mut Vec<usize>| {
        let i = pos[f];
        out.swap_remove(i);
        if i < out.len() {
            pos[out[i] as usize] = i;
        }
    };

    macro_rules! add {
        ($v:expr) => {{
            let v: VertexId = $v;
            trace.push_vertex(v);
            match v.colour {
                Colour::Black => {
                    remove(v.index as usize, &mut out_black, &mut pos);
                    for &f in &out_white {
                        let f = f as usize;
                        let e = EdgeId::new(v.index, (f - n_b) as u32);
                        let wt = oracle.weight(e);
                        if cand_lt(wt, e, best_w[f], best_edge[f]) {
                            best_w[f] = wt;
                            best_edge[f] = e;
                        }
                    }
                }
                Colour::White => {
                    remove(n_b + v.index as usize, &mut out_white, &mut pos);
                    for &f in &out_black {
                        let f = f as usize;
                        let e = EdgeId::new(f as u32, v.index);
                        let wt = oracle.weight(e);
                        if cand_lt(wt, e, best_w[f], best_edge[f]) {
                            best_w[f] = wt;
                            best_edge[f] = e;
                        }
                    }
                }
            }
        }};
    }

    let start = resolve_start(spec, policy)?;
    add!(start);

    while trace.len() < k_max {
        let mut pick = usize::MAX;
        for &f in out_black.iter().chain(&out_white) {
            let f = f as usize;
            if best_w[f].is_infinite() {
                continue;
            }
            if pick == usize::MAX || cand_lt(best_w[f], best_edge[f], best_w[pick], best_edge[pick])
            {
                pick = f;
            }
        }
        debug_assert_ne!(pick, usize::MAX, "complete bipartite graphs are connected");
        trace.edges.push((best_edge[pick], best_w[pick]));
        add!(spec.vertex_from_flat(pick));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_weight;

    fn fixed(v: VertexId) -> StartPolicy {
        StartPolicy::Fixed(v)
    }

    #[test]
    fn two_by_one_by_hand() {
        let spec = GraphSpec::new(2, 1, 0).unwrap();
        let oracle = WeightOracle::explicit(2, 1, vec![0.2, 0.5]).unwrap();
        let t = run_prim(&spec, &oracle, fixed(VertexId::black(0)), None).unwrap();
        assert_eq!(
            t.sigma(),
            &[VertexId::black(0), VertexId::white(0), VertexId::black(1)]
        );
        assert_eq!(t.edges(), &[(EdgeId::new(0, 0), 0.2), (EdgeId::new(1, 0), 0.5)]);
        assert_eq!(t.black_prefix(1), 1);
        assert_eq!(t.black_prefix(2), 1);
        assert_eq!(t.black_prefix(3), 2);
        assert_eq!(t.tau_b(), &[1, 3]);
        assert_eq!(colour_ratio(&t, 2).unwrap(), 0.5);
        assert_eq!(
            ratio_trajectory(&t, &[1, 3]).unwrap(),
            vec![(1, 1.0), (3, 2.0 / 3.0)]
        );
    }

    #[test]
    fn ties_break_on_edge_indices() {
        let spec = GraphSpec::new(2, 2, 0).unwrap();
        let oracle = WeightOracle::explicit(2, 2, vec![0.5; 4]).unwrap();
        let t = run_prim(&spec, &oracle, fixed(VertexId::black(0)), None).unwrap();
        assert_eq!(
            t.sigma(),
            &[
                VertexId::black(0),
                VertexId::white(0),
                VertexId::white(1),
                VertexId::black(1)
            ]
        );
        let picked: Vec<EdgeId> = t.edges().iter().map(|&(e, _)| e).collect();
        assert_eq!(
            picked,
            vec![EdgeId::new(0, 0), EdgeId::new(0, 1), EdgeId::new(1, 0)]
        );
    }

    #[test]
    fn every_step_picks_the_cheapest_crossing_edge() {
        let spec = GraphSpec::new(5, 7, 42).unwrap();
        let oracle = WeightOracle::implicit(&spec);
        let t = run_prim(&spec, &oracle, StartPolicy::UniformAll, None).unwrap();
        assert!(t.is_full());
        let mut visited = vec![false; spec.n()];
        visited[spec.flat(t.sigma_at(1))] = true;
        for k in 1..spec.n() {
            let mut min_w = f64::INFINITY;
            for b in 0..spec.n_b {
                for w in 0..spec.n_w {
                    let crossing = visited[b as usize] != visited[spec.n_b as usize + w as usize];
                    if crossing {
                        min_w = min_w.min(oracle.weight(EdgeId::new(b, w)));
                    }
                }
            }
            assert_eq!(t.edges()[k - 1].1, min_w, "step {k}");
            visited[spec.flat(t.sigma_at(k + 1))] = true;
        }
    }

    #[test]
    fn truncated_run_is_a_prefix_of_the_full_run() {
        let spec = GraphSpec::new(6, 9, 7).unwrap();
        let oracle = WeightOracle::implicit(&spec);
        let full = run_prim(&spec, &oracle, StartPolicy::UniformAll, None).unwrap();
        for k in 1..=spec.n() {
            let part = run_prim(&spec, &oracle, StartPolicy::UniformAll, Some(k)).unwrap();
            assert_eq!(part.len(), k);
            assert_eq!(part.sigma(), &full.sigma()[..k]);
            assert_eq!(part.edges(), &full.edges()[..k - 1]);
            assert_eq!(part.tau_b(), &full.tau_b()[..part.black_count()]);
        }
    }

    #[test]
    fn edge_weights_match_the_oracle() {
        let spec = GraphSpec::new(4, 4, 3).unwrap();
        let oracle = WeightOracle::implicit(&spec);
        let t = run_prim(&spec, &oracle, StartPolicy::UniformBlack, None).unwrap();
        for &(e, w) in t.edges() {
            assert_eq!(edge_weight(&spec, &oracle, e).unwrap(), w);
        }
    }

    #[test]
    fn start_policies_are_deterministic_and_respected() {
        let spec = GraphSpec::new(3, 5, 11).unwrap();
        let oracle = WeightOracle::implicit(&spec);
        let a = run_prim(&spec, &oracle, StartPolicy::UniformAll, None).unwrap();
        let b = run_prim(&spec, &oracle, StartPolicy::UniformAll, None).unwrap();
        assert_eq!(a.sigma(), b.sigma());
        let black = run_prim(&spec, &oracle, StartPolicy::UniformBlack, None).unwrap();
        assert_eq!(black.sigma_at(1).colour, Colour::Black);
        let white = run_prim(&spec, &oracle, StartPolicy::UniformWhite, None).unwrap();
        assert_eq!(white.sigma_at(1).colour, Colour::White);
    }

    #[test]
    fn input_errors() {
        let spec = GraphSpec::new(2, 2, 0).unwrap();
        let oracle = WeightOracle::implicit(&spec);
        assert!(run_prim(&spec, &oracle, StartPolicy::UniformAll, Some(0)).is_err());
        assert!(run_prim(&spec, &oracle, StartPolicy::UniformAll, Some(5)).is_err());
        assert!(run_prim(&spec, &oracle, fixed(VertexId::black(2)), None).is_err());
        let wrong = WeightOracle::explicit(3, 3, vec![0.5; 9]).unwrap();
        assert!(run_prim(&spec, &wrong, StartPolicy::UniformAll, None).is_err());
        assert!(colour_ratio(&run_prim(&spec, &oracle, StartPolicy::UniformAll, None).unwrap(), 0).is_err());
    }

    #[test]
    fn from_raw_parts_recomputes_bookkeeping() {
        let spec = GraphSpec::new(2, 1, 0).unwrap();
        let sigma = vec![VertexId::white(0), VertexId::black(1), VertexId::black(0)];
        let edges = vec![(EdgeId::new(1, 0), 0.3), (EdgeId::new(0, 0), 0.4)];
        let t = PrimTrace::from_raw_parts(spec, sigma, edges);
        assert_eq!(t.tau_b(), &[2, 3]);
        assert_eq!(t.black_prefix(1), 0);
        assert_eq!(t.black_prefix(3), 2);
    }
}
