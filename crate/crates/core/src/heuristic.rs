//! Constructive solvers: greedy partial factors and the level-by-level
//! construction that greedily packs most of the host and finishes the
//! remainder exactly.

use serde::Serialize;
use thiserror::Error;

use crate::copies::{enumerate_on, CopyError, HostGraph, PlacedCopy, DEFAULT_COPY_LIMIT};
use crate::exact::{SolveError, SolveOutcome, SolverConfig, TilingProblem, MAX_EXACT_N};
use crate::graph::{analyze_with_limit, ratio_f64, GraphError, GraphH, MAX_PATTERN_VERTICES};
use crate::instance::WeightedInstance;
use crate::solution::{Mode, TilingSolution};

/// Remaining sets up to this size fall back to dense enumeration when the
/// sparsified host gets stuck.
const DENSE_FALLBACK: usize = 256;

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("the construction needs d* > 1, got d* = {0}")]
    DensityTooLow(String),
    #[error("n = {n} is not a multiple of v_H = {v}")]
    OffGrid { n: usize, v: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Copies(#[from] CopyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionParams {
    /// Fraction of a level left for the next level.
    pub alpha: f64,
    /// At or below this many uncovered vertices the exact solver finishes.
    pub base_size: usize,
    /// Level `i` uses edges of weight at most `2^i * cap_base`.
    pub cap_base: Option<f64>,
    /// Cheapest copies kept per vertex when building greedy candidates;
    /// `None` considers every copy.
    pub greedy_pool: Option<usize>,
    pub node_budget: u64,
}

impl RecursionParams {
    /// Defaults for `h`: `alpha` solves `alpha^(1 - 1/d*) = 1/4`.
    pub fn for_pattern(h: &GraphH) -> Result<Self, HeuristicError> {
        let report = analyze_with_limit(h, MAX_PATTERN_VERTICES.min(20))?;
        let d_star = ratio_f64(report.d_star);
        if d_star <= 1.0 {
            return Err(HeuristicError::DensityTooLow(report.d_star.to_string()));
        }
        let v = h.vertex_count();
        Ok(Self {
            alpha: 0.25f64.powf(1.0 / (1.0 - 1.0 / d_star)),
            base_size: (24 / v).max(1) * v,
            cap_base: None,
            greedy_pool: Some(8),
            node_budget: SolverConfig::default().node_budget,
        })
    }

    fn validate(&self, v: usize) -> Result<(), HeuristicError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(HeuristicError::Params(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if self.base_size < v {
            return Err(HeuristicError::Params(format!("base_size {} is below v_H = {v}", self.base_size)));
        }
        if self.greedy_pool == Some(0) {
            return Err(HeuristicError::Params("greedy_pool must be positive".into()));
        }
        Ok(())
    }
}

/// Candidate copies inside `active`: every copy, or the union over vertices
/// of each vertex's `pool` cheapest copies on a sparsified host.
fn candidates(
    h: &GraphH,
    inst: &WeightedInstance,
    active: &[usize],
    cap: f64,
    pool: Option<usize>,
) -> Result<Vec<PlacedCopy>, CopyError> {
    let host = HostGraph::build(inst, cap, Some(active), pool.map(|p| p.max(h.vertex_count())));
    let index = enumerate_on(h, inst, &host, cap, DEFAULT_COPY_LIMIT)?;
    let Some(pool) = pool else {
        return Ok(index.copies);
    };
    let mut keep = vec![false; index.len()];
    for list in &index.postings {
        for &c in list.iter().take(pool) {
            keep[c] = true;
        }
    }
    Ok(index
        .copies
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect())
}

/// Packs globally cheapest copies inside the uncovered part of `active`
/// until at most `target_uncovered` active vertices are left or nothing fits.
/// `pool` bounds the candidate copies per vertex as in [`RecursionParams`].
pub fn greedy_partial_factor(
    inst: &WeightedInstance,
    h: &GraphH,
    active: &[usize],
    target_uncovered: usize,
    cap: f64,
    pool: Option<usize>,
) -> Result<TilingSolution, HeuristicError> {
    let n = inst.n();
    let allowed = n - active.len() + target_uncovered.min(active.len());
    let mut free = vec![false; n];
    for &v in active {
        free[v] = true;
    }
    let mut remaining = active.len();
    let mut chosen = Vec::new();
    let mut dense_done = pool.is_none();
    while remaining > target_uncovered && remaining >= h.vertex_count() {
        let live: Vec<usize> = (0..n).filter(|&v| free[v]).collect();
        let cands = candidates(h, inst, &live, cap, if dense_done { None } else { pool })?;
        for c in cands {
            if remaining <= target_uncovered {
                break;
            }
            if c.vertices.iter().all(|&v| free[v]) {
                for &v in &c.vertices {
                    free[v] = false;
                }
                remaining -= c.vertices.len();
                chosen.push(c);
            }
        }
        if remaining <= target_uncovered || dense_done || remaining > DENSE_FALLBACK {
            break;
        }
        // The sparse candidates ran dry; retry once on the dense host.
        dense_done = true;
    }
    let mut sol = TilingSolution::from_copies(Mode::Factor, inst, chosen, cap, allowed, false);
    // Stuck above target: the allowance records what was actually met.
    sol.allowed_uncovered = sol.allowed_uncovered.max(sol.uncovered);
    Ok(sol)
}

/// One level of [`divide_conquer_factor`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub active_size: usize,
    pub target_uncovered: usize,
    pub copies_placed: usize,
    pub level_weight: f64,
    pub cap: f64,
    /// `true` for the exact finishing step.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionResult {
    pub solution: TilingSolution,
    pub levels: Vec<LevelRecord>,
    /// `false` when some vertices could not be covered.
    pub complete: bool,
}

fn exact_finish(
    inst: &WeightedInstance,
    h: &GraphH,
    vertices: &[usize],
    node_budget: u64,
) -> Result<Option<(Vec<PlacedCopy>, bool)>, HeuristicError> {
    if vertices.is_empty() {
        return Ok(Some((Vec::new(), true)));
    }
    if vertices.len() < h.vertex_count() {
        return Ok(None);
    }
    let sub = inst.induced(vertices).map_err(|e| HeuristicError::Params(e.to_string()))?;
    let config = SolverConfig {
        node_budget,
        ..SolverConfig::default()
    };
    let problem = TilingProblem::new(&sub, h, f64::INFINITY, config)?;
    let (sol, optimal) = match problem.min_factor(0) {
        Ok(SolveOutcome::Solved(sol)) => (sol, true),
        Ok(SolveOutcome::Infeasible) => return Ok(None),
        Err(SolveError::Timeout { incumbent: Some(inc), .. }) => (*inc, false),
        Err(SolveError::Timeout { incumbent: None, .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let copies = sol
        .copies
        .iter()
        .map(|c| {
            let embedding = c.embedding.iter().map(|&x| vertices[x]).collect();
            PlacedCopy::from_embedding(h, inst, embedding)
        })
        .collect();
    Ok(Some((copies, optimal)))
}

/// Complete H-factor built level by level. Level `i` greedily packs the
/// uncovered set down to `n_(i+1)`, the largest multiple of `v_H` at most
/// `alpha * n_i` (but never below the base size); once at most `base_size`
/// vertices remain, the exact solver covers them.
pub fn divide_conquer_factor(
    inst: &WeightedInstance,
    h: &GraphH,
    params: &RecursionParams,
) -> Result<ConstructionResult, HeuristicError> {
    let n = inst.n();
    let v = h.vertex_count();
    let report = analyze_with_limit(h, MAX_PATTERN_VERTICES.min(20))?;
    if ratio_f64(report.d_star) <= 1.0 {
        return Err(HeuristicError::DensityTooLow(report.d_star.to_string()));
    }
    if !n.is_multiple_of(v) {
        return Err(HeuristicError::OffGrid { n, v });
    }
    params.validate(v)?;
    let base_grid = (params.base_size / v) * v;

    let mut uncovered: Vec<usize> = (0..n).collect();
    let mut copies: Vec<PlacedCopy> = Vec::new();
    let mut levels = Vec::new();
    let mut all_optimal = true;
    let mut level = 0usize;
    let mut level_size = n;

    while uncovered.len() > params.base_size {
        let next = ((params.alpha * level_size as f64).floor() as usize / v) * v;
        let target = next.max(base_grid).min(uncovered.len());
        let cap = params
            .cap_base
            .map_or(f64::INFINITY, |a| a * 2f64.powi(level as i32));
        let sol = greedy_partial_factor(inst, h, &uncovered, target, cap, params.greedy_pool)?;
        let placed = sol.copies.len();
        levels.push(LevelRecord {
            level,
            active_size: uncovered.len(),
            target_uncovered: target,
            copies_placed: placed,
            level_weight: sol.total_weight,
            cap,
            exact: false,
        });
        let mut hit = vec![false; n];
        for c in &sol.copies {
            for &x in &c.vertices {
                hit[x] = true;
            }
        }
        uncovered.retain(|&x| !hit[x]);
        copies.extend(sol.copies);
        level += 1;
        level_size = uncovered.len();
        if placed == 0 {
            // No progress: only an exact finish can help.
            break;
        }
    }

    let mut complete = uncovered.is_empty();
    if !uncovered.is_empty() && uncovered.len() <= MAX_EXACT_N.min(params.base_size.max(base_grid) * 2) {
        if let Some((finish, optimal)) = exact_finish(inst, h, &uncovered, params.node_budget)? {
            all_optimal &= optimal;
            levels.push(LevelRecord {
                level,
                active_size: uncovered.len(),
                target_uncovered: 0,
                copies_placed: finish.len(),
                level_weight: finish.iter().map(|c| c.weight).fold(0.0, |acc, w| acc + w),
                cap: f64::INFINITY,
                exact: true,
            });
            copies.extend(finish);
            complete = true;
        }
    }
    let pure_exact = levels.len() == 1 && levels[0].exact;
    let mut solution = TilingSolution::from_copies(Mode::Factor, inst, copies, f64::INFINITY, 0, pure_exact && all_optimal);
    solution.allowed_uncovered = solution.uncovered;
    Ok(ConstructionResult {
        solution,
        levels,
        complete,
    })
}
