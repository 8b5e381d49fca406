//! Exact solvers for minimum-weight partial factors and covers, the budget
//! dual, and an exhaustive oracle for small instances.
//!
//! The branch-and-bound branches on the lowest-index vertex that is neither
//! covered nor skipped. Children are the compatible copies through that
//! vertex, cheapest first, followed by skipping it (leaving it uncovered).
//! The lower bound charges every vertex that must still be covered
//! `(cheapest surviving copy through it) / v_H`; a copy pays for `v_H`
//! vertices, so the bound is admissible for both factors and covers.

use thiserror::Error;

use crate::copies::{enumerate_copies_limited, CopyError, CopyIndex, DEFAULT_COPY_LIMIT};
use crate::graph::GraphH;
use crate::instance::WeightedInstance;
use crate::solution::{Mode, TilingSolution};

/// Largest host the bitmask solvers accept.
pub const MAX_EXACT_N: usize = 128;
pub const ORACLE_MAX_N: usize = 12;
pub const ORACLE_MAX_COPIES: usize = 100_000;
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

/// Bound slack that absorbs rounding differences between path sums.
const BOUND_SLACK: f64 = 1.0 - 1e-12;

type Mask = u128;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("node budget of {budget} exhausted")]
    Timeout {
        budget: u64,
        incumbent: Option<Box<TilingSolution>>,
    },
    #[error(transparent)]
    Copies(#[from] CopyError),
    #[error("n = {n} exceeds the exact solver limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),
    #[error("allowed uncovered count {k} exceeds n = {n}")]
    BadAllowance { k: usize, n: usize },
}

/// Result of a solve that did not fail.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Solved(TilingSolution),
    /// No partial factor/cover meets the allowance under the cap.
    Infeasible,
}

impl SolveOutcome {
    pub fn solution(&self) -> Option<&TilingSolution> {
        match self {
            SolveOutcome::Solved(s) => Some(s),
            SolveOutcome::Infeasible => None,
        }
    }

    pub fn into_solution(self) -> Option<TilingSolution> {
        match self {
            SolveOutcome::Solved(s) => Some(s),
            SolveOutcome::Infeasible => None,
        }
    }

    /// Weight, with `+inf` for infeasible problems.
    pub fn weight(&self) -> f64 {
        self.solution().map_or(f64::INFINITY, |s| s.total_weight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub node_budget: u64,
    pub copy_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
            copy_limit: DEFAULT_COPY_LIMIT,
        }
    }
}

/// A pattern, an instance and a cap, with the copy index built once so that
/// several solves can share it.
pub struct TilingProblem<'a> {
    pub h: &'a GraphH,
    pub inst: &'a WeightedInstance,
    pub index: CopyIndex,
    pub config: SolverConfig,
    masks: Vec<Mask>,
}

impl<'a> TilingProblem<'a> {
    pub fn new(
        inst: &'a WeightedInstance,
        h: &'a GraphH,
        cap: f64,
        config: SolverConfig,
    ) -> Result<Self, SolveError> {
        if inst.n() > MAX_EXACT_N {
            return Err(SolveError::TooLarge {
                n: inst.n(),
                limit: MAX_EXACT_N,
            });
        }
        let index = if h.vertex_count() > inst.n() {
            CopyIndex::new(inst.n(), Vec::new(), cap)
        } else {
            enumerate_copies_limited(h, inst, cap, config.copy_limit)?
        };
        Ok(Self::from_index(inst, h, index, config))
    }

    pub fn from_index(inst: &'a WeightedInstance, h: &'a GraphH, index: CopyIndex, config: SolverConfig) -> Self {
        let masks = index
            .copies
            .iter()
            .map(|c| c.vertices.iter().fold(0, |m, &v| m | (1 as Mask) << v))
            .collect();
        Self {
            h,
            inst,
            index,
            config,
            masks,
        }
    }

    pub fn n(&self) -> usize {
        self.inst.n()
    }

    pub fn cap(&self) -> f64 {
        self.index.cap
    }

    /// F^cap_H(k, n).
    pub fn min_factor(&self, k: usize) -> Result<SolveOutcome, SolveError> {
        let n = self.n();
        if k > n {
            return Err(SolveError::BadAllowance { k, n });
        }
        let v = self.h.vertex_count();
        // Fewest copies that leave at most k vertices uncovered.
        let copies_needed = (n - k).div_ceil(v);
        if copies_needed * v > n {
            return Ok(SolveOutcome::Infeasible);
        }
        let skips = n - copies_needed * v;
        self.branch_and_bound(Mode::Factor, k, skips)
    }

    /// C^cap_H(k, n).
    pub fn min_cover(&self, k: usize) -> Result<SolveOutcome, SolveError> {
        let n = self.n();
        if k > n {
            return Err(SolveError::BadAllowance { k, n });
        }
        self.branch_and_bound(Mode::Cover, k, k)
    }

    fn branch_and_bound(&self, mode: Mode, allowance: usize, skips: usize) -> Result<SolveOutcome, SolveError> {
        let n = self.n();
        let mut search = BranchAndBound {
            problem: self,
            mode,
            full: if n == 128 { Mask::MAX } else { ((1 as Mask) << n) - 1 },
            inv_v: 1.0 / self.h.vertex_count() as f64,
            chosen: Vec::new(),
            best: f64::INFINITY,
            best_set: None,
            nodes: 0,
            exhausted: false,
            charges: Vec::new(),
            prefix: Vec::new(),
        };
        search.visit(0, 0, 0, skips, 0.0);
        let build = |set: Vec<usize>, optimal: bool| {
            let copies = set.iter().map(|&i| self.index.copies[i].clone()).collect();
            TilingSolution::from_copies(mode, self.inst, copies, self.cap(), allowance, optimal)
        };
        if search.exhausted {
            return Err(SolveError::Timeout {
                budget: self.config.node_budget,
                incumbent: search.best_set.map(|s| Box::new(build(s, false))),
            });
        }
        Ok(match search.best_set {
            Some(set) => SolveOutcome::Solved(build(set, true)),
            None => SolveOutcome::Infeasible,
        })
    }

    /// Z_H(n, L): the most vertices a partial factor of weight `<= budget`
    /// covers, found by binary search over the copy count. Among maximizers
    /// the returned solution has minimum weight.
    pub fn max_coverage_under_budget(&self, budget: f64) -> Result<BudgetSolution, SolveError> {
        let n = self.n();
        let v = self.h.vertex_count();
        let factor_with = |copies: usize| self.min_factor(n - copies * v);
        let mut best = TilingSolution::empty(Mode::Factor, n, self.cap(), n);
        let (mut lo, mut hi) = (0usize, n / v);
        // Invariant: `lo` copies fit the budget (witness in `best`); more
        // than `hi` do not.
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            match factor_with(mid)? {
                SolveOutcome::Solved(sol) if sol.total_weight <= budget => {
                    lo = mid;
                    best = sol;
                }
                _ => hi = mid - 1,
            }
        }
        Ok(BudgetSolution {
            budget,
            covered: best.covered(),
            solution: best,
        })
    }
}

struct BranchAndBound<'p, 'a> {
    problem: &'p TilingProblem<'a>,
    mode: Mode,
    full: Mask,
    inv_v: f64,
    chosen: Vec<usize>,
    best: f64,
    best_set: Option<Vec<usize>>,
    nodes: u64,
    exhausted: bool,
    /// Per-depth buffers: vertex charges and sorted prefix sums.
    charges: Vec<Vec<f64>>,
    prefix: Vec<Vec<f64>>,
}

impl BranchAndBound<'_, '_> {
    fn blocked(&self, covered: Mask, skipped: Mask) -> Mask {
        match self.mode {
            Mode::Factor => covered | skipped,
            Mode::Cover => skipped,
        }
    }

    /// `covered`: vertices in chosen copies; `skipped`: vertices fixed as
    /// uncovered; `skips_left`: how many more may be skipped.
    fn visit(&mut self, depth: usize, covered: Mask, skipped: Mask, skips_left: usize, cost: f64) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.problem.config.node_budget {
            self.exhausted = true;
            return;
        }
        let open = self.full & !(covered | skipped);
        let open_count = open.count_ones() as usize;
        if open_count <= skips_left {
            // Everything still open may stay uncovered.
            if cost < self.best {
                self.best = cost;
                self.best_set = Some(self.chosen.clone());
            }
            return;
        }
        let need = open_count - skips_left;
        if depth >= self.charges.len() {
            self.charges.push(vec![0.0; self.problem.n()]);
            self.prefix.push(Vec::with_capacity(self.problem.n() + 1));
        }
        let blocked = self.blocked(covered, skipped);
        let Some(bound) = self.compute_charges(depth, open, blocked, need, skips_left) else {
            return;
        };
        if cost + bound * BOUND_SLACK >= self.best {
            return;
        }

        let branch = open.trailing_zeros() as usize;
        let problem = self.problem;
        for &c in &problem.index.postings[branch] {
            let mask = problem.masks[c];
            if mask & blocked != 0 {
                continue;
            }
            let w = problem.index.copies[c].weight;
            if cost + w >= self.best {
                // Postings are sorted by weight, so no later child is cheaper.
                break;
            }
            // Charges only grow deeper in the tree, so the parent's charges
            // bound the child's remaining cost.
            let newly = mask & open;
            let child_bound = if skips_left == 0 {
                let mut rest = newly;
                let mut released = 0.0;
                while rest != 0 {
                    let u = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    released += self.charges[depth][u];
                }
                bound - released
            } else {
                self.prefix[depth][need.saturating_sub(newly.count_ones() as usize)]
            };
            if cost + w + child_bound * BOUND_SLACK >= self.best {
                continue;
            }
            self.chosen.push(c);
            self.visit(depth + 1, covered | mask, skipped, skips_left, cost + w);
            self.chosen.pop();
            if self.exhausted {
                return;
            }
        }
        if skips_left > 0 {
            self.visit(depth + 1, covered, skipped | (1 as Mask) << branch, skips_left - 1, cost);
        }
    }

    /// Fills the charge of every open vertex (cheapest usable copy through
    /// it, divided by v_H) and the sorted prefix sums. Returns the sum of the
    /// `need` smallest charges, or `None` when too many open vertices have
    /// no usable copy.
    fn compute_charges(&mut self, depth: usize, open: Mask, blocked: Mask, need: usize, skips_left: usize) -> Option<f64> {
        let problem = self.problem;
        let inv_v = self.inv_v;
        let charges = &mut self.charges[depth];
        let prefix = &mut self.prefix[depth];
        prefix.clear();
        let mut dead = 0usize;
        let mut rest = open;
        while rest != 0 {
            let u = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let cheapest = problem.index.postings[u]
                .iter()
                .find(|&&c| problem.masks[c] & blocked == 0)
                .map(|&c| problem.index.copies[c].weight);
            match cheapest {
                Some(w) => {
                    charges[u] = w * inv_v;
                    prefix.push(w * inv_v);
                }
                None => {
                    charges[u] = 0.0;
                    dead += 1;
                    if dead > skips_left {
                        return None;
                    }
                }
            }
        }
        if prefix.len() < need {
            return None;
        }
        if skips_left == 0 {
            return Some(prefix.iter().sum());
        }
        prefix.sort_unstable_by(f64::total_cmp);
        let mut acc = 0.0;
        for slot in prefix.iter_mut() {
            let c = *slot;
            *slot = acc;
            acc += c;
        }
        prefix.push(acc);
        Some(prefix[need])
    }
}

/// Z_H(n, L) with its witness partial factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSolution {
    pub budget: f64,
    pub covered: usize,
    pub solution: TilingSolution,
}

pub fn min_factor(inst: &WeightedInstance, h: &GraphH, k: usize, cap: f64) -> Result<SolveOutcome, SolveError> {
    TilingProblem::new(inst, h, cap, SolverConfig::default())?.min_factor(k)
}

pub fn min_cover(inst: &WeightedInstance, h: &GraphH, k: usize, cap: f64) -> Result<SolveOutcome, SolveError> {
    TilingProblem::new(inst, h, cap, SolverConfig::default())?.min_cover(k)
}

pub fn max_coverage_under_budget(inst: &WeightedInstance, h: &GraphH, budget: f64) -> Result<BudgetSolution, SolveError> {
    TilingProblem::new(inst, h, f64::INFINITY, SolverConfig::default())?.max_coverage_under_budget(budget)
}

/// Exhaustive optimum by dynamic programming over covered vertex sets.
///
/// `best[S]` is the cheapest family of copies whose union is exactly `S`
/// (disjoint copies in factor mode). An optimal cover never contains a copy
/// whose vertices are all covered by the others, so extending a family only
/// by copies that add a vertex loses nothing.
pub fn brute_force_oracle(
    inst: &WeightedInstance,
    h: &GraphH,
    mode: Mode,
    k: usize,
    cap: f64,
) -> Result<SolveOutcome, SolveError> {
    let n = inst.n();
    if n > ORACLE_MAX_N {
        return Err(SolveError::OracleLimit(format!("n = {n} exceeds {ORACLE_MAX_N}")));
    }
    if k > n {
        return Err(SolveError::BadAllowance { k, n });
    }
    let index = if h.vertex_count() > n {
        CopyIndex::new(n, Vec::new(), cap)
    } else {
        enumerate_copies_limited(h, inst, cap, ORACLE_MAX_COPIES)
            .map_err(|_| SolveError::OracleLimit(format!("more than {ORACLE_MAX_COPIES} copies")))?
    };
    let masks: Vec<usize> = index
        .copies
        .iter()
        .map(|c| c.vertices.iter().fold(0, |m, &v| m | 1 << v))
        .collect();
    let states = 1usize << n;
    let mut best = vec![f64::INFINITY; states];
    let mut parent = vec![(usize::MAX, usize::MAX); states];
    best[0] = 0.0;
    for s in 0..states {
        let base = best[s];
        if base == f64::INFINITY {
            continue;
        }
        for (c, &m) in masks.iter().enumerate() {
            let next = match mode {
                Mode::Factor if m & s != 0 => continue,
                _ => s | m,
            };
            if next == s {
                continue;
            }
            let w = base + index.copies[c].weight;
            if w < best[next] {
                best[next] = w;
                parent[next] = (s, c);
            }
        }
    }
    let target = (0..states)
        .filter(|&s| n - s.count_ones() as usize <= k && best[s] < f64::INFINITY)
        .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)));
    let Some(mut s) = target else {
        return Ok(SolveOutcome::Infeasible);
    };
    let mut copies = Vec::new();
    while s != 0 {
        let (prev, c) = parent[s];
        copies.push(index.copies[c].clone());
        s = prev;
    }
    Ok(SolveOutcome::Solved(TilingSolution::from_copies(mode, inst, copies, cap, k, true)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{named_graph, parse_named};
    use crate::instance::{sample_instance, WeightDistribution};
    use crate::solution::validate_solution;

    fn inst(n: usize, seed: u64) -> WeightedInstance {
        sample_instance(n, WeightDistribution::EXP1, seed).unwrap()
    }

    fn k3() -> GraphH {
        named_graph("complete", &[3]).unwrap()
    }

    #[test]
    fn unique_triangle_factor() {
        let i = WeightedInstance::from_weights(3, vec![0.2, 0.3, 0.4], WeightDistribution::EXP1, 0).unwrap();
        let sol = min_factor(&i, &k3(), 0, f64::INFINITY).unwrap().into_solution().unwrap();
        assert_eq!(sol.copies.len(), 1);
        assert_eq!(sol.total_weight, 0.2 + 0.3 + 0.4);
        assert!(sol.optimal);
        let cover = min_cover(&i, &k3(), 0, f64::INFINITY).unwrap().into_solution().unwrap();
        assert_eq!(cover.total_weight, sol.total_weight);
    }

    #[test]
    fn full_allowance_is_empty() {
        let i = inst(7, 1);
        let sol = min_factor(&i, &k3(), 7, f64::INFINITY).unwrap().into_solution().unwrap();
        assert!(sol.copies.is_empty());
        assert_eq!(sol.total_weight, 0.0);
        assert_eq!(sol.uncovered, 7);
    }

    /// All ten splits of six vertices into two triples.
    fn two_triple_partitions(i: &WeightedInstance) -> f64 {
        let tri = |a: usize, b: usize, c: usize| i.weight(a, b) + i.weight(a, c) + i.weight(b, c);
        let mut best = f64::INFINITY;
        for b in 1..6 {
            for c in b + 1..6 {
                let rest: Vec<usize> = (1..6).filter(|&x| x != b && x != c).collect();
                best = best.min(tri(0, b, c) + tri(rest[0], rest[1], rest[2]));
            }
        }
        best
    }

    #[test]
    fn six_vertex_triangle_factor_matches_partitions() {
        for seed in 0..20 {
            let i = inst(6, seed);
            let sol = min_factor(&i, &k3(), 0, f64::INFINITY).unwrap().into_solution().unwrap();
            let oracle = two_triple_partitions(&i);
            assert!((sol.total_weight - oracle).abs() < 1e-12, "seed {seed}");
            validate_solution(&sol, &i, &k3()).unwrap();
        }
    }

    #[test]
    fn edge_cover_on_four_vertices_matches_subsets() {
        let k2 = named_graph("complete", &[2]).unwrap();
        for seed in 0..20 {
            let i = inst(4, seed);
            let edges: Vec<(usize, usize)> = i.pairs().collect();
            let mut best = f64::INFINITY;
            for subset in 1u32..(1 << edges.len()) {
                let mut hit = 0u32;
                let mut w = 0.0;
                for (b, &(u, v)) in edges.iter().enumerate() {
                    if subset >> b & 1 == 1 {
                        hit |= 1 << u | 1 << v;
                        w += i.weight(u, v);
                    }
                }
                if hit == 0b1111 {
                    best = best.min(w);
                }
            }
            let sol = min_cover(&i, &k2, 0, f64::INFINITY).unwrap().into_solution().unwrap();
            assert!((sol.total_weight - best).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn infeasible_cases() {
        let i = inst(10, 3);
        // 10 vertices cannot be tiled by triangles with nothing left over.
        assert_eq!(min_factor(&i, &k3(), 0, f64::INFINITY).unwrap(), SolveOutcome::Infeasible);
        assert!(min_factor(&i, &k3(), 1, f64::INFINITY).unwrap().solution().is_some());
        // A cap below every edge weight.
        assert_eq!(min_factor(&i, &k3(), 1, 1e-12).unwrap(), SolveOutcome::Infeasible);
        assert_eq!(min_cover(&i, &k3(), 0, 1e-12).unwrap(), SolveOutcome::Infeasible);
        assert!(matches!(min_factor(&i, &k3(), 11, f64::INFINITY), Err(SolveError::BadAllowance { .. })));
    }

    #[test]
    fn timeout_carries_incumbent() {
        let i = inst(30, 4);
        let h = k3();
        let problem = TilingProblem::new(
            &i,
            &h,
            f64::INFINITY,
            SolverConfig {
                node_budget: 200,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        match problem.min_factor(0) {
            Err(SolveError::Timeout { incumbent, .. }) => {
                let inc = incumbent.expect("cheapest-first dive finds a factor");
                assert!(!inc.optimal);
                validate_solution(&inc, &i, &h).unwrap();
            }
            other => panic!("expected timeout, got {other:?}"),
        }
    }

    #[test]
    fn oracle_matches_branch_and_bound() {
        let p3 = named_graph("path", &[3]).unwrap();
        for seed in 0..10 {
            let i = inst(8, seed);
            for k in 0..3 {
                let bb = min_factor(&i, &p3, k, f64::INFINITY).unwrap();
                let or = brute_force_oracle(&i, &p3, Mode::Factor, k, f64::INFINITY).unwrap();
                assert_eq!(bb.weight().to_bits(), or.weight().to_bits());
                let bb = min_cover(&i, &p3, k, f64::INFINITY).unwrap();
                let or = brute_force_oracle(&i, &p3, Mode::Cover, k, f64::INFINITY).unwrap();
                assert_eq!(bb.weight().to_bits(), or.weight().to_bits());
            }
        }
    }

    #[test]
    fn oracle_limits() {
        let i = inst(13, 0);
        assert!(matches!(
            brute_force_oracle(&i, &k3(), Mode::Factor, 0, f64::INFINITY),
            Err(SolveError::OracleLimit(_))
        ));
        let tri = inst(3, 5);
        let sol = brute_force_oracle(&tri, &k3(), Mode::Cover, 0, f64::INFINITY)
            .unwrap()
            .into_solution()
            .unwrap();
        assert_eq!(sol.copies.len(), 1);
    }

    #[test]
    fn budget_extremes() {
        let i = inst(10, 8);
        let zero = max_coverage_under_budget(&i, &k3(), 0.0).unwrap();
        assert_eq!(zero.covered, 0);
        let all = max_coverage_under_budget(&i, &k3(), f64::INFINITY).unwrap();
        assert_eq!(all.covered, 9);
        assert!(all.solution.total_weight <= all.budget);
        let f = min_factor(&i, &k3(), 1, f64::INFINITY).unwrap().weight();
        assert_eq!(all.solution.total_weight, f);
    }

    #[test]
    fn disconnected_pattern_factor() {
        let h = parse_named("complete:2+complete:2").unwrap();
        let i = inst(8, 2);
        let sol = min_factor(&i, &h, 0, f64::INFINITY).unwrap().into_solution().unwrap();
        assert_eq!(sol.copies.len(), 2);
        validate_solution(&sol, &i, &h).unwrap();
    }
}
