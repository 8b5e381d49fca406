//! Enumeration of embedded copies of a pattern in a weighted complete graph.
//!
//! Copies are subgraphs, not induced subgraphs: a copy is a vertex set plus
//! the image of the pattern's edges. Each copy is produced once by accepting
//! only the embedding that is lexicographically smallest among its
//! automorphic images.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{automorphisms, GraphH};
use crate::instance::WeightedInstance;

/// Default ceiling on the number of copies held in an index.
pub const DEFAULT_COPY_LIMIT: usize = 100_000_000;

/// Automorphism groups up to this size are listed explicitly for the
/// lexicographic-minimum test; larger groups fall back to hashing copies.
const MAX_LISTED_AUTOMORPHISMS: usize = 40_320;

/// Hosts at least this large enumerate anchors in parallel.
const PARALLEL_HOST_SIZE: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CopyError {
    #[error("copy count exceeds the limit of {limit}; use a smaller edge cap")]
    Overflow { limit: usize },
    #[error("pattern has {pattern} vertices but the host only has {host}")]
    PatternTooLarge { pattern: usize, host: usize },
}

/// One embedded copy of the pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedCopy {
    /// Sorted host vertices.
    pub vertices: Vec<usize>,
    /// `embedding[p]` is the host vertex of pattern vertex `p`.
    pub embedding: Vec<usize>,
    /// Sorted host edges `(lo, hi)`.
    pub edges: Vec<(usize, usize)>,
    /// Sum of the edge weights, added in sorted edge order.
    pub weight: f64,
}

impl PlacedCopy {
    pub fn from_embedding(h: &GraphH, inst: &WeightedInstance, embedding: Vec<usize>) -> Self {
        let mut edges: Vec<(usize, usize)> = h
            .edges()
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (embedding[u], embedding[v]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        let weight = edge_weight_sum(inst, &edges);
        let mut vertices = embedding.clone();
        vertices.sort_unstable();
        Self {
            vertices,
            embedding,
            edges,
            weight,
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// Largest edge weight used by the copy.
    pub fn max_edge_weight(&self, inst: &WeightedInstance) -> f64 {
        self.edges
            .iter()
            .map(|&(u, v)| inst.weight(u, v))
            .fold(0.0, f64::max)
    }

    /// Identity of a copy as a subgraph.
    pub fn key(&self) -> (&[usize], &[(usize, usize)]) {
        (&self.vertices, &self.edges)
    }
}

/// Sums `edges` (already sorted) in order.
pub fn edge_weight_sum(inst: &WeightedInstance, edges: &[(usize, usize)]) -> f64 {
    edges.iter().map(|&(u, v)| inst.weight(u, v)).fold(0.0, |acc, w| acc + w)
}

/// Total order on copies: weight, then host edge set, then vertex set.
pub fn copy_order(a: &PlacedCopy, b: &PlacedCopy) -> std::cmp::Ordering {
    a.weight
        .total_cmp(&b.weight)
        .then_with(|| a.edges.cmp(&b.edges))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

/// The cap-filtered host graph, optionally restricted to a vertex subset and
/// sparsified.
#[derive(Debug, Clone)]
pub struct HostGraph {
    n: usize,
    active: Vec<bool>,
    neighbours: Vec<Vec<usize>>,
    matrix: Vec<bool>,
}

impl HostGraph {
    /// Keeps edges of weight `<= cap` between active vertices. With
    /// `sparsify = Some(d)` an edge also has to be among the `d` cheapest
    /// surviving edges of at least one endpoint.
    pub fn build(
        inst: &WeightedInstance,
        cap: f64,
        active: Option<&[usize]>,
        sparsify: Option<usize>,
    ) -> Self {
        let n = inst.n();
        let mut is_active = vec![active.is_none(); n];
        if let Some(list) = active {
            for &v in list {
                is_active[v] = true;
            }
        }
        let mut neighbours = vec![Vec::new(); n];
        for (i, j) in inst.pairs() {
            if is_active[i] && is_active[j] && inst.weight(i, j) <= cap {
                neighbours[i].push(j);
                neighbours[j].push(i);
            }
        }
        if let Some(d) = sparsify {
            let mut keep = vec![HashSet::new(); n];
            for (v, list) in neighbours.iter_mut().enumerate() {
                list.sort_by(|&a, &b| inst.weight(v, a).total_cmp(&inst.weight(v, b)).then(a.cmp(&b)));
                for &u in list.iter().take(d) {
                    keep[v].insert(u);
                }
            }
            for (v, list) in neighbours.iter_mut().enumerate() {
                let kv = std::mem::take(&mut keep[v]);
                list.retain(|u| kv.contains(u));
                keep[v] = kv;
            }
            // Symmetrize: an edge kept by either endpoint stays in both lists.
            let mut sym = vec![Vec::new(); n];
            for v in 0..n {
                for &u in &neighbours[v] {
                    sym[v].push(u);
                    sym[u].push(v);
                }
            }
            neighbours = sym;
        }
        let mut matrix = vec![false; n * n];
        for list in neighbours.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        for (v, list) in neighbours.iter().enumerate() {
            for &u in list {
                matrix[v * n + u] = true;
            }
        }
        Self {
            n,
            active: is_active,
            neighbours,
            matrix,
        }
    }

    #[inline]
    fn adjacent(&self, u: usize, v: usize) -> bool {
        self.matrix[u * self.n + v]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbours.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// All copies under a cap, sorted by [`copy_order`], with per-vertex postings.
#[derive(Debug, Clone)]
pub struct CopyIndex {
    pub copies: Vec<PlacedCopy>,
    /// `postings[v]` lists indices of copies containing `v`, ascending (so
    /// also by weight).
    pub postings: Vec<Vec<usize>>,
    pub cap: f64,
    pub n: usize,
}

impl CopyIndex {
    pub fn new(n: usize, mut copies: Vec<PlacedCopy>, cap: f64) -> Self {
        copies.sort_by(copy_order);
        let mut postings = vec![Vec::new(); n];
        for (idx, c) in copies.iter().enumerate() {
            for &v in &c.vertices {
                postings[v].push(idx);
            }
        }
        Self {
            copies,
            postings,
            cap,
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.copies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.copies.is_empty()
    }
}

/// Precomputed search plan for a pattern.
struct Plan {
    order: Vec<usize>,
    /// For each position in `order`: earlier-placed pattern neighbours.
    back: Vec<Vec<usize>>,
    /// Pattern vertices with no edges, in increasing order.
    isolated: Vec<usize>,
    automorphisms: Option<Vec<Vec<usize>>>,
}

impl Plan {
    fn new(h: &GraphH) -> Self {
        let v = h.vertex_count();
        let mut placed = vec![false; v];
        let mut order = Vec::with_capacity(v);
        let isolated: Vec<usize> = (0..v).filter(|&u| h.degree(u) == 0).collect();
        let non_isolated = v - isolated.len();
        while order.len() < non_isolated {
            // Next vertex: most edges into the placed set, then highest degree.
            let next = (0..v)
                .filter(|&u| !placed[u] && h.degree(u) > 0)
                .max_by_key(|&u| {
                    let back = order.iter().filter(|&&w| h.adjacent(u, w)).count();
                    (back, h.degree(u), std::cmp::Reverse(u))
                })
                .expect("unplaced non-isolated vertex exists");
            placed[next] = true;
            order.push(next);
        }
        let back = order
            .iter()
            .enumerate()
            .map(|(pos, &u)| order[..pos].iter().copied().filter(|&w| h.adjacent(u, w)).collect())
            .collect();
        Self {
            order,
            back,
            isolated,
            automorphisms: automorphisms(h, MAX_LISTED_AUTOMORPHISMS),
        }
    }

    /// `embedding` is the lexicographically smallest of its automorphic images.
    fn is_canonical(&self, embedding: &[usize]) -> bool {
        let auts = self.automorphisms.as_ref().expect("listed group");
        auts.iter().all(|sigma| {
            for p in 0..embedding.len() {
                let (a, b) = (embedding[p], embedding[sigma[p]]);
                if a != b {
                    return a < b;
                }
            }
            true
        })
    }
}

struct Search<'a> {
    h: &'a GraphH,
    inst: &'a WeightedInstance,
    host: &'a HostGraph,
    plan: &'a Plan,
    embedding: Vec<usize>,
    used: Vec<bool>,
    out: Vec<PlacedCopy>,
    seen: HashSet<(Vec<usize>, Vec<(usize, usize)>)>,
    counter: &'a AtomicUsize,
    overflow: &'a AtomicBool,
    limit: usize,
}

impl Search<'_> {
    fn place(&mut self, pos: usize) {
        if self.overflow.load(Ordering::Relaxed) {
            return;
        }
        if pos == self.plan.order.len() {
            self.place_isolated(0, 0);
            return;
        }
        let plan = self.plan;
        let host = self.host;
        let p = plan.order[pos];
        let back = &plan.back[pos];
        let anchor = back.first().map(|&a| self.embedding[a]);
        let count = anchor.map_or(host.n, |a| host.neighbours[a].len());
        for slot in 0..count {
            let x = anchor.map_or(slot, |a| host.neighbours[a][slot]);
            if self.used[x] || !host.active[x] {
                continue;
            }
            if !back.iter().all(|&q| host.adjacent(self.embedding[q], x)) {
                continue;
            }
            self.assign(p, x, |s| s.place(pos + 1));
        }
    }

    fn assign(&mut self, p: usize, x: usize, then: impl FnOnce(&mut Self)) {
        self.embedding[p] = x;
        self.used[x] = true;
        then(self);
        self.used[x] = false;
        self.embedding[p] = usize::MAX;
    }

    /// Isolated pattern vertices get increasing host vertices; any other
    /// assignment is an automorphic image of this one.
    fn place_isolated(&mut self, idx: usize, min_host: usize) {
        if idx == self.plan.isolated.len() {
            self.emit();
            return;
        }
        let p = self.plan.isolated[idx];
        for x in min_host..self.host.n {
            if self.used[x] || !self.host.active[x] {
                continue;
            }
            self.assign(p, x, |s| s.place_isolated(idx + 1, x + 1));
            if self.overflow.load(Ordering::Relaxed) {
                return;
            }
        }
    }

    fn emit(&mut self) {
        let copy = if self.plan.automorphisms.is_some() {
            if !self.plan.is_canonical(&self.embedding) {
                return;
            }
            PlacedCopy::from_embedding(self.h, self.inst, self.embedding.clone())
        } else {
            let copy = PlacedCopy::from_embedding(self.h, self.inst, self.embedding.clone());
            if !self.seen.insert((copy.vertices.clone(), copy.edges.clone())) {
                return;
            }
            copy
        };
        if self.counter.fetch_add(1, Ordering::Relaxed) + 1 > self.limit {
            self.overflow.store(true, Ordering::Relaxed);
            return;
        }
        self.out.push(copy);
    }
}

/// Enumerates every copy of `h` in `host`.
pub fn enumerate_on(
    h: &GraphH,
    inst: &WeightedInstance,
    host: &HostGraph,
    cap: f64,
    limit: usize,
) -> Result<CopyIndex, CopyError> {
    let n = inst.n();
    if h.vertex_count() > n {
        return Err(CopyError::PatternTooLarge {
            pattern: h.vertex_count(),
            host: n,
        });
    }
    let plan = Plan::new(h);
    let counter = AtomicUsize::new(0);
    let overflow = AtomicBool::new(false);
    let new_search = || Search {
        h,
        inst,
        host,
        plan: &plan,
        embedding: vec![usize::MAX; h.vertex_count()],
        used: vec![false; n],
        out: Vec::new(),
        seen: HashSet::new(),
        counter: &counter,
        overflow: &overflow,
        limit,
    };

    let copies: Vec<PlacedCopy> = if plan.automorphisms.is_some() && n >= PARALLEL_HOST_SIZE {
        // Anchor-parallel: each task fixes the first pattern vertex.
        let first = plan.order[0];
        let anchors: Vec<usize> = (0..n).filter(|&x| host.active[x]).collect();
        let chunks: Vec<Vec<PlacedCopy>> = anchors
            .par_iter()
            .map(|&x| {
                let mut s = new_search();
                s.assign(first, x, |s| s.place(1));
                s.out
            })
            .collect();
        chunks.into_iter().flatten().collect()
    } else {
        let mut s = new_search();
        s.place(0);
        s.out
    };
    if overflow.load(Ordering::Relaxed) {
        return Err(CopyError::Overflow { limit });
    }
    Ok(CopyIndex::new(n, copies, cap))
}

/// Every copy of `h` in K_n using only edges of weight `<= cap`.
pub fn enumerate_copies(h: &GraphH, inst: &WeightedInstance, cap: f64) -> Result<CopyIndex, CopyError> {
    enumerate_copies_limited(h, inst, cap, DEFAULT_COPY_LIMIT)
}

pub fn enumerate_copies_limited(
    h: &GraphH,
    inst: &WeightedInstance,
    cap: f64,
    limit: usize,
) -> Result<CopyIndex, CopyError> {
    let host = HostGraph::build(inst, cap, None, None);
    enumerate_on(h, inst, &host, cap, limit)
}

/// A minimum-weight copy of `h_sub`; ties go to the smallest host edge set.
pub fn cheapest_copy(h_sub: &GraphH, inst: &WeightedInstance) -> Result<PlacedCopy, CopyError> {
    let index = enumerate_copies(h_sub, inst, f64::INFINITY)?;
    Ok(index
        .copies
        .into_iter()
        .next()
        .expect("v_H <= n guarantees at least one copy in K_n"))
}
