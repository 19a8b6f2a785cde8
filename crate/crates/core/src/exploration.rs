//! Exploration orders and their bookkeeping.
//!
//! An ordering of a graph's vertices is *greedy exploration ordered* (GEO)
//! when it could have been produced by a frontier search that always visits
//! the lowest-ranked reachable vertex first and jumps to the lowest-ranked
//! unvisited vertex when the frontier empties. [`is_geo`] decides this via
//! two checkable conditions — components occupy consecutive rank intervals,
//! and every vertex is reachable from its component's first vertex along a
//! rank-increasing path — while [`is_geo_by_definition`] decides it straight
//! from the quantifier form. Both are kept so they can cross-check each
//! other exhaustively on small graphs; [`explore_in_order`] replays the
//! frontier search itself and must reproduce any GEO order it is given.
//!
//! [`two_neighbourhood_exploration`] runs the black-side variant on a
//! threshold subgraph: frontiers grow by two-step neighbourhoods, so the
//! search walks only black vertices, and it must visit them in exactly the
//! order a full traversal of the same weights first reaches them. Along the
//! way it tracks how many fresh white/black vertices each step discovers
//! and the pools they are drawn from; [`check_counting_identities`] verifies
//! the conservation laws those counts obey.

use std::collections::BTreeSet;
use std::io::Write;

use crate::graph::{Colour, GraphSpec, VertexId, WeightOracle};
use crate::percolation::{intervals_from_prim, lead_ranks, realized_edges};
use crate::prim::PrimTrace;
use crate::unionfind::DisjointSets;
use crate::{Error, Result};

/// Undirected graph on vertices `0..n` as sorted adjacency lists.
#[derive(Clone, Debug)]
pub struct Adjacency {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Build from an edge list; loops and out-of-range endpoints are
    /// rejected, duplicate edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid_input(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::invalid_input(format!("loop at vertex {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Adjacency { n, adj })
    }

    /// The threshold subgraph as a graph on the dense vertex numbering.
    pub fn bipartite(spec: &GraphSpec, edges: &[crate::graph::EdgeId]) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = edges
            .iter()
            .map(|e| {
                (
                    spec.flat(VertexId::black(e.black)),
                    spec.flat(VertexId::white(e.white)),
                )
            })
            .collect();
        Adjacency::from_edges(spec.n(), &pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }
}

/// The contracted black-side graph of a bipartite graph: one vertex per
/// black index, an edge wherever two black vertices share a white
/// neighbour.
pub fn black_contraction(spec: &GraphSpec, g: &Adjacency) -> Result<Adjacency> {
    if g.n() != spec.n() {
        return Err(Error::invalid_input(
            "adjacency does not match the graph dimensions".to_string(),
        ));
    }
    let mut pairs = BTreeSet::new();
    for w in 0..spec.n_w as usize {
        let blacks = g.neighbours(spec.n_b as usize + w);
        for (i, &a) in blacks.iter().enumerate() {
            for &b in &blacks[i + 1..] {
                pairs.insert((a, b));
            }
        }
    }
    let edges: Vec<(usize, usize)> = pairs.into_iter().collect();
    Adjacency::from_edges(spec.n_b as usize, &edges)
}

fn validate_order(g: &Adjacency, order: &[usize]) -> Result<Vec<usize>> {
    if order.len() != g.n() {
        return Err(Error::invalid_input(format!(
            "order has {} entries for {} vertices",
            order.len(),
            g.n()
        )));
    }
    let mut rank = vec_invalid(g.n());
    for (r, &v) in order.iter().enumerate() {
        if v >= g.n() {
            return Err(Error::invalid_input(format!("vertex {v} out of range")));
        }
        if rank[v] != usize::MAX {
            return Err(Error::invalid_input(format!("vertex {v} listed twice")));
        }
        rank[v] = r;
    }
    Ok(rank)
}

fn vec_invalid(n: usize) -> Vec<usize> {
    vec![usize::MAX; n]
}

/// Decide GEO-ness via the two structural conditions: every component's
/// ranks form one consecutive block, and inside each component every vertex
/// is reachable from the block's first vertex along a path of strictly
/// increasing ranks.
pub fn is_geo(g: &Adjacency, order: &[usize]) -> Result<bool> {
    let rank = validate_order(g, order)?;
    let mut ds = DisjointSets::new(g.n());
    for v in 0..g.n() {
        for &u in g.neighbours(v) {
            ds.union(u, v);
        }
    }
    // Rank intervals per component.
    let mut lo = vec_invalid(g.n());
    let mut hi = vec![0usize; g.n()];
    let mut count = vec![0usize; g.n()];
    for v in 0..g.n() {
        let root = ds.find(v);
        lo[root] = lo[root].min(rank[v]);
        hi[root] = hi[root].max(rank[v]);
        count[root] += 1;
    }
    for v in 0..g.n() {
        if ds.find(v) == v && hi[v] - lo[v] + 1 != count[v] {
            return Ok(false);
        }
    }
    // Rank-increasing reachability, component by component, in rank order.
    let mut reached = vec![false; g.n()];
    for &v in order {
        if rank[v] == lo[ds.find(v)] {
            reached[v] = true;
            continue;
        }
        reached[v] = g
            .neighbours(v)
            .iter()
            .any(|&u| rank[u] < rank[v] && reached[u]);
        if !reached[v] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Decide GEO-ness straight from the definition: for every co-component
/// pair of ranks `i <= j` there is some `i' <= i` such that the vertices
/// ranked `i'..=j` induce a connected subgraph. Quadratically many interval
/// connectivity checks — intended for small graphs, where it serves as an
/// independent oracle for [`is_geo`].
pub fn is_geo_by_definition(g: &Adjacency, order: &[usize]) -> Result<bool> {
    let _ = validate_order(g, order)?;
    let mut ds = DisjointSets::new(g.n());
    for v in 0..g.n() {
        for &u in g.neighbours(v) {
            ds.union(u, v);
        }
    }
    let connected_interval = |a: usize, b: usize| -> bool {
        let mut inside = vec![false; g.n()];
        for &v in &order[a..=b] {
            inside[v] = true;
        }
        let mut seen = vec![false; g.n()];
        let mut stack = vec![order[a]];
        seen[order[a]] = true;
        let mut found = 1;
        while let Some(v) = stack.pop() {
            for &u in g.neighbours(v) {
                if inside[u] && !seen[u] {
                    seen[u] = true;
                    found += 1;
                    stack.push(u);
                }
            }
        }
        found == b - a + 1
    };
    for j in 0..g.n() {
        for i in 0..=j {
            if !ds.same_set(order[i], order[j]) {
                continue;
            }
            if !(0..=i).rev().any(|i2| connected_interval(i2, j)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Replay the frontier search seeded by `order`: start at the first vertex,
/// repeatedly visit the lowest-ranked neighbour of the visited set, and
/// when no unvisited neighbour exists jump to the lowest-ranked unvisited
/// vertex. Returns the visit order it produces; for a GEO input this is the
/// input itself.
pub fn explore_in_order(g: &Adjacency, order: &[usize]) -> Result<Vec<usize>> {
    let rank = validate_order(g, order)?;
    let n = g.n();
    let mut visited = vec![false; n];
    let mut frontier: BTreeSet<usize> = BTreeSet::new(); // ranks of N(visited) \ visited
    let mut fallback = 0usize; // cursor over ranks for the jump rule
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let v = match frontier.pop_first() {
            Some(r) => order[r],
            None => {
                while visited[order[fallback]] {
                    fallback += 1;
                }
                order[fallback]
            }
        };
        visited[v] = true;
        out.push(v);
        for &u in g.neighbours(v) {
            if !visited[u] {
                frontier.insert(rank[u]);
            }
        }
        frontier.remove(&rank[v]);
    }
    Ok(out)
}

/// Per-step record of the black-side two-neighbourhood search.
///
/// All vectors have one entry per step `k = 1..=n_b`, stored at `k-1`.
/// `o_*`/`k_*` are the per-step discovery counts and the pool sizes they
/// were drawn from, `s_*` their running sums, `a_*` the counts of
/// discovered vertices the traversal has not reached yet (`a_w` counts
/// discoveries of steps before `k`, `a_b` those up to and including `k` —
/// the live black frontier), `r` the visited whites that did not open
/// their component, `j_w`/`i_b` the component-opening whites and
/// first-in-component blacks seen so far.
#[derive(Clone, Debug)]
pub struct ExplorationTrace {
    pub spec: GraphSpec,
    pub p: f64,
    /// Black vertices in the order the search visits them.
    pub sigma_b: Vec<VertexId>,
    /// Traversal rank of each visited black (what the search achieved).
    pub rank_b: Vec<usize>,
    /// Rank at which the traversal itself first visits its k-th black
    /// vertex (what the search is expected to achieve).
    pub tau_b: Vec<usize>,
    /// Fresh whites discovered at each step (sorted side indices).
    pub o_w_sets: Vec<Vec<u32>>,
    /// Fresh blacks discovered at each step (sorted side indices).
    pub o_b_sets: Vec<Vec<u32>>,
    pub o_w: Vec<usize>,
    pub o_b: Vec<usize>,
    pub k_w: Vec<usize>,
    pub k_b: Vec<usize>,
    pub s_w: Vec<usize>,
    pub s_b: Vec<usize>,
    pub a_w: Vec<usize>,
    pub a_b: Vec<usize>,
    pub r: Vec<usize>,
    pub j_w: Vec<usize>,
    pub i_b: Vec<usize>,
}

impl ExplorationTrace {
    pub fn steps(&self) -> usize {
        self.sigma_b.len()
    }

    /// One CSV row per step, matching the documented column set.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "k,tau_b,o_w,o_b,k_w,k_b,s_w,s_b,a_w,a_b,r,j_w,i_b")?;
        for k in 0..self.steps() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                k + 1,
                self.tau_b[k],
                self.o_w[k],
                self.o_b[k],
                self.k_w[k],
                self.k_b[k],
                self.s_w[k],
                self.s_b[k],
                self.a_w[k],
                self.a_b[k],
                self.r[k],
                self.j_w[k],
                self.i_b[k]
            )?;
        }
        Ok(())
    }
}

/// Run the black-side search on the threshold subgraph at `p` of the same
/// weights `trace` was produced from, recording all bookkeeping.
///
/// The search itself chooses each step's vertex by the frontier rule
/// (lowest-ranked black within two steps of the visited blacks, else
/// lowest-ranked unvisited black); its choices land in `sigma_b`/`rank_b`.
/// The expected ranks `tau_b` come from the traversal trace, so callers can
/// compare the two — they must agree, and the identity checks assume they
/// do.
pub fn two_neighbourhood_exploration(
    spec: &GraphSpec,
    oracle: &WeightOracle,
    trace: &PrimTrace,
    p: f64,
) -> Result<ExplorationTrace> {
    if spec != trace.spec() {
        return Err(Error::invalid_input(
            "trace was produced for a different graph".to_string(),
        ));
    }
    if !trace.is_full() {
        return Err(Error::invalid_input(
            "the black-side search needs a full trace".to_string(),
        ));
    }
    let g = Adjacency::bipartite(spec, &realized_edges(spec, oracle, p)?)?;
    let intervals = intervals_from_prim(trace, p)?;
    let n_b = spec.n_b as usize;
    let n_w = spec.n_w as usize;

    // Ranks by side index.
    let mut rank_black = vec![0usize; n_b];
    let mut rank_white = vec![0usize; n_w];
    let mut whites_by_rank = Vec::with_capacity(n_w); // (rank, side index), ascending
    let mut blacks_by_rank = Vec::with_capacity(n_b);
    for (i, &v) in trace.sigma().iter().enumerate() {
        match v.colour {
            Colour::Black => {
                rank_black[v.index as usize] = i + 1;
                blacks_by_rank.push((i + 1, v.index as usize));
            }
            Colour::White => {
                rank_white[v.index as usize] = i + 1;
                whites_by_rank.push((i + 1, v.index as usize));
            }
        }
    }

    // Component-opening ranks, split by colour; first-in-component blacks.
    let white_lead_ranks: Vec<usize> = lead_ranks(&intervals)
        .into_iter()
        .filter(|&r| trace.sigma_at(r).colour == Colour::White)
        .collect();
    let mut root_ranks = Vec::new();
    for (lo, hi) in intervals.intervals() {
        if let Some(r) = (lo..=hi).find(|&r| trace.sigma_at(r).colour == Colour::Black) {
            root_ranks.push(r);
        }
    }

    let mut ex = ExplorationTrace {
        spec: *spec,
        p,
        sigma_b: Vec::with_capacity(n_b),
        rank_b: Vec::with_capacity(n_b),
        tau_b: trace.tau_b().to_vec(),
        o_w_sets: Vec::with_capacity(n_b),
        o_b_sets: Vec::with_capacity(n_b),
        o_w: Vec::with_capacity(n_b),
        o_b: Vec::with_capacity(n_b),
        k_w: Vec::with_capacity(n_b),
        k_b: Vec::with_capacity(n_b),
        s_w: Vec::with_capacity(n_b),
        s_b: Vec::with_capacity(n_b),
        a_w: Vec::with_capacity(n_b),
        a_b: Vec::with_capacity(n_b),
        r: Vec::with_capacity(n_b),
        j_w: Vec::with_capacity(n_b),
        i_b: Vec::with_capacity(n_b),
    };

    // Pools and discovery unions, by side index.
    let mut in_kw = vec![true; n_w];
    let mut kw_count = n_w;
    let mut in_kb = vec![true; n_b];
    let mut kb_count = n_b;
    let mut union_ow = vec![false; n_w];
    let mut union_ob = vec![false; n_b];

    // Frontier state of the search proper.
    let mut visited_black = vec![false; n_b];
    let mut covered_white = vec![false; n_w];
    let mut candidate_black = vec![false; n_b];
    let mut active: BTreeSet<usize> = BTreeSet::new(); // ranks of frontier blacks
    let mut fallback = 0usize; // cursor into blacks_by_rank
    let mut white_cursor = 0usize; // cursor into whites_by_rank
    let mut black_cursor = 0usize;
    let mut lead_cursor = 0usize;
    let mut root_cursor = 0usize;

    let flat_white = |w: usize| n_b + w;

    for k in 1..=n_b {
        // Frontier rule: lowest-ranked discovered black, else lowest-ranked
        // unvisited black.
        let chosen = match active.pop_first() {
            Some(r) => trace.sigma_at(r).index as usize,
            None => {
                while fallback < n_b && visited_black[blacks_by_rank[fallback].1] {
                    fallback += 1;
                }
                blacks_by_rank[fallback].1
            }
        };
        visited_black[chosen] = true;
        ex.sigma_b.push(VertexId::black(chosen as u32));
        ex.rank_b.push(rank_black[chosen]);

        let tau_k = trace.tau_b()[k - 1];

        // White pool loses everything the traversal visited by rank tau_k.
        while white_cursor < n_w && whites_by_rank[white_cursor].0 < tau_k {
            let w = whites_by_rank[white_cursor].1;
            if in_kw[w] {
                in_kw[w] = false;
                kw_count -= 1;
            }
            white_cursor += 1;
        }
        ex.k_w.push(kw_count);

        // Whites discovered in *earlier* steps that the traversal has not
        // reached yet. Taken before this step's extraction: everything
        // extracted below still sits above tau_k and must not count.
        let a_w = (0..n_w).filter(|&w| union_ow[w] && rank_white[w] > tau_k).count();

        // Fresh whites: neighbours of the chosen black still in the pool.
        let mut ow: Vec<u32> = Vec::new();
        for &f in g.neighbours(chosen) {
            let w = f - n_b;
            if in_kw[w] {
                in_kw[w] = false;
                kw_count -= 1;
                union_ow[w] = true;
                ow.push(w as u32);
            }
        }
        ex.o_w.push(ow.len());
        ex.o_w_sets.push(ow);

        // Black pool loses the traversal-visited blacks the same way.
        while black_cursor < n_b && blacks_by_rank[black_cursor].0 <= tau_k {
            let b = blacks_by_rank[black_cursor].1;
            if in_kb[b] {
                in_kb[b] = false;
                kb_count -= 1;
            }
            black_cursor += 1;
        }
        ex.k_b.push(kb_count);

        // Fresh blacks: two-step neighbours of the chosen black still in
        // the pool.
        let mut ob: Vec<u32> = Vec::new();
        for &f in g.neighbours(chosen) {
            for &f2 in g.neighbours(f) {
                if f2 != chosen && in_kb[f2] {
                    in_kb[f2] = false;
                    kb_count -= 1;
                    union_ob[f2] = true;
                    ob.push(f2 as u32);
                }
            }
        }
        ob.sort_unstable();
        ex.o_b.push(ob.len());
        ex.o_b_sets.push(ob);

        // Grow the frontier: newly covered whites expose their blacks.
        for &f in g.neighbours(chosen) {
            let w = f - n_b;
            if covered_white[w] {
                continue;
            }
            covered_white[w] = true;
            for &f2 in g.neighbours(flat_white(w)) {
                if !candidate_black[f2] {
                    candidate_black[f2] = true;
                    if !visited_black[f2] {
                        active.insert(rank_black[f2]);
                    }
                }
            }
        }

        // Running sums and derived counters.
        let s_w_prev = if k >= 2 { ex.s_w[k - 2] } else { 0 };
        let s_b_prev = if k >= 2 { ex.s_b[k - 2] } else { 0 };
        ex.s_w.push(s_w_prev + ex.o_w[k - 1]);
        ex.s_b.push(s_b_prev + ex.o_b[k - 1]);

        while lead_cursor < white_lead_ranks.len() && white_lead_ranks[lead_cursor] < tau_k {
            lead_cursor += 1;
        }
        ex.j_w.push(lead_cursor);
        while root_cursor < root_ranks.len() && root_ranks[root_cursor] <= tau_k {
            root_cursor += 1;
        }
        ex.i_b.push(root_cursor);
        ex.r.push((tau_k - k) - ex.j_w[k - 1]);

        let a_b = (0..n_b).filter(|&b| union_ob[b] && rank_black[b] > tau_k).count();
        ex.a_w.push(a_w);
        ex.a_b.push(a_b);
        // The discovered-unvisited blacks are exactly the live frontier.
        debug_assert_eq!(a_b, active.len(), "frontier out of sync at step {k}");
    }
    Ok(ex)
}

/// One failed conservation law: which identity, at which step, with the
/// two sides that should have been equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityViolation {
    pub k: usize,
    pub identity: &'static str,
    pub lhs: i64,
    pub rhs: i64,
}

/// Outcome of [`check_counting_identities`]: empty means all laws hold at
/// every step.
#[derive(Clone, Debug, Default)]
pub struct IdentityReport {
    pub violations: Vec<IdentityViolation>,
}

impl IdentityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify, exactly and at every step, the conservation laws tying the
/// bookkeeping together:
///
/// * discovered-unvisited whites = total discovered before this step minus
///   visited non-opening whites;
/// * discovered-unvisited blacks = total discovered so far minus visited
///   blacks that were discovered (all visited except first-in-component);
/// * first-in-component blacks = 1 + the deepest deficit of discoveries
///   versus visits so far;
/// * each side's pool complement splits into discoveries plus opening
///   (white) / first-in-component (black) vertices.
pub fn check_counting_identities(ex: &ExplorationTrace) -> IdentityReport {
    let mut report = IdentityReport::default();
    let n_w = ex.spec.n_w as i64;
    let n_b = ex.spec.n_b as i64;
    let mut worst_deficit = 0i64; // max over j of (j - s_b[j]), floored at 0
    for k in 1..=ex.steps() {
        let i = k - 1;
        let s_w_prev = if k >= 2 { ex.s_w[i - 1] as i64 } else { 0 };
        let s_b_prev = if k >= 2 { ex.s_b[i - 1] as i64 } else { 0 };
        let mut check = |name: &'static str, lhs: i64, rhs: i64| {
            if lhs != rhs {
                report.violations.push(IdentityViolation { k, identity: name, lhs, rhs });
            }
        };
        check("a_w = s_w_prev - r", ex.a_w[i] as i64, s_w_prev - ex.r[i] as i64);
        check(
            "a_b = s_b - k + i_b",
            ex.a_b[i] as i64,
            ex.s_b[i] as i64 - k as i64 + ex.i_b[i] as i64,
        );
        check("i_b = 1 + deepest deficit", ex.i_b[i] as i64, 1 + worst_deficit);
        check(
            "n_w - k_w = s_w_prev + j_w",
            n_w - ex.k_w[i] as i64,
            s_w_prev + ex.j_w[i] as i64,
        );
        check(
            "n_b - k_b = s_b_prev + i_b",
            n_b - ex.k_b[i] as i64,
            s_b_prev + ex.i_b[i] as i64,
        );
        worst_deficit = worst_deficit.max(k as i64 - ex.s_b[i] as i64);
    }
    report
}

/// The visit order of a full traversal as a dense-vertex order, suitable
/// for [`is_geo`] / [`explore_in_order`] on the threshold subgraph.
pub fn prim_order(trace: &PrimTrace) -> Vec<usize> {
    trace.sigma().iter().map(|&v| trace.spec().flat(v)).collect()
}
