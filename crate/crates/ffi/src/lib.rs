//! C ABI over the `hfactor` solvers.
//!
//! Every fallible function returns an [`HfStatus`]; on failure a message is
//! kept per thread and read with [`hf_last_error_message`]. Graphs,
//! instances and solutions are opaque handles released with their `_free`
//! function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hfactor::exact::{SolveError, SolveOutcome, SolverConfig, TilingProblem};
use hfactor::graph::GraphError;
use hfactor::instance::InstanceError;
use hfactor::solution::SolutionRecord;
use hfactor::{
    analyze, brute_force_oracle, parse_graph, parse_named, sample_instance, validate_solution, GraphH, Mode,
    TilingSolution, WeightDistribution, WeightedInstance,
};

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    /// No partial factor or cover meets the allowance under the cap.
    Infeasible = 4,
    /// Node budget exhausted; the best solution found, if any, is returned.
    Timeout = 5,
    LimitExceeded = 6,
    Io = 7,
    /// A solution failed validation.
    Invalid = 8,
    Panic = 9,
}

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfFamily {
    Exponential = 0,
    Uniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HfDistribution {
    pub family: HfFamily,
    /// Rate of the exponential family; ignored for uniform.
    pub rate: f64,
}

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfMode {
    Factor = 0,
    Cover = 1,
}

/// Densities are exact fractions `num / den`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HfDensityReport {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub d_h_num: i64,
    pub d_h_den: i64,
    pub d_star_num: i64,
    pub d_star_den: i64,
    pub delta_num: i64,
    pub delta_den: i64,
    pub strictly_balanced: bool,
    pub balanced: bool,
    /// Saturates at `UINT64_MAX`.
    pub aut_count: u64,
}

pub struct HfGraph(GraphH);
pub struct HfInstance(WeightedInstance);
pub struct HfSolution(TilingSolution);

struct Failure {
    status: HfStatus,
    message: String,
}

impl Failure {
    fn new(status: HfStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        let status = match e {
            GraphError::Parse { .. } => HfStatus::Parse,
            GraphError::TooLarge { .. } => HfStatus::LimitExceeded,
            _ => HfStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        let status = match e {
            InstanceError::Io(_) => HfStatus::Io,
            InstanceError::Format(_) => HfStatus::Parse,
            InstanceError::TooLarge { .. } => HfStatus::LimitExceeded,
            _ => HfStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let status = match e {
            SolveError::Timeout { .. } => HfStatus::Timeout,
            SolveError::TooLarge { .. } | SolveError::OracleLimit(_) | SolveError::Copies(_) => HfStatus::LimitExceeded,
            SolveError::BadAllowance { .. } => HfStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn guard(f: impl FnOnce() -> Result<HfStatus, Failure>) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            HfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(HfStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(HfStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(HfStatus::NullPointer, format!("{name} is null")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<HfStatus, Failure> {
    if out.is_null() {
        return Err(Failure::new(HfStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(HfStatus::Ok)
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(HfStatus::NullPointer, "output pointer is null"))
    } else {
        Ok(())
    }
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a named pattern such as `complete:3` or `lollipop:5,2`; `+`
/// joins disjoint unions.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_graph_named(spec: *const c_char, out: *mut *mut HfGraph) -> HfStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        store(out, HfGraph(parse_named(spec)?))
    })
}

/// Parses an edge list (`u v` per line, optional `n <count>` header).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_graph_parse(text: *const c_char, out: *mut *mut HfGraph) -> HfStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        store(out, HfGraph(parse_graph(text)?))
    })
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_graph_vertex_count(graph: *const HfGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.vertex_count())
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_graph_edge_count(graph: *const HfGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.edge_count())
}

/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_graph_analyze(graph: *const HfGraph, out: *mut HfDensityReport) -> HfStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        check_out(out)?;
        let r = analyze(&g.0)?;
        *out = HfDensityReport {
            vertex_count: r.vertex_count,
            edge_count: r.edge_count,
            d_h_num: *r.d_h.numer(),
            d_h_den: *r.d_h.denom(),
            d_star_num: *r.d_star.numer(),
            d_star_den: *r.d_star.denom(),
            delta_num: *r.delta.numer(),
            delta_den: *r.delta.denom(),
            strictly_balanced: r.strictly_balanced,
            balanced: r.balanced,
            aut_count: u64::try_from(r.aut_count).unwrap_or(u64::MAX),
        };
        Ok(HfStatus::Ok)
    })
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_graph_free(graph: *mut HfGraph) {
    free_handle(graph);
}

fn distribution(d: HfDistribution) -> Result<WeightDistribution, Failure> {
    match d.family {
        HfFamily::Exponential => Ok(WeightDistribution::exponential(d.rate)?),
        HfFamily::Uniform => Ok(WeightDistribution::Uniform),
    }
}

/// Samples i.i.d. edge weights on K_n.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_instance_sample(
    n: usize,
    dist: HfDistribution,
    seed: u64,
    out: *mut *mut HfInstance,
) -> HfStatus {
    guard(|| {
        let inst = sample_instance(n, distribution(dist)?, seed)?;
        store(out, HfInstance(inst))
    })
}

/// Builds an instance from `n (n - 1) / 2` weights in upper-triangle
/// row-major order: (0,1), (0,2), ..., (1,2), ...
///
/// # Safety
/// `weights` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_instance_from_weights(
    n: usize,
    weights: *const f64,
    len: usize,
    out: *mut *mut HfInstance,
) -> HfStatus {
    guard(|| {
        if weights.is_null() && len > 0 {
            return Err(Failure::new(HfStatus::NullPointer, "weights is null"));
        }
        let values = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(weights, len).to_vec()
        };
        let inst = WeightedInstance::from_weights(n, values, WeightDistribution::EXP1, 0)?;
        store(out, HfInstance(inst))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_instance_load(path: *const c_char, out: *mut *mut HfInstance) -> HfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let file = std::fs::File::open(path).map_err(|e| Failure::new(HfStatus::Io, format!("{path}: {e}")))?;
        let inst = WeightedInstance::read_from(std::io::BufReader::new(file))?;
        store(out, HfInstance(inst))
    })
}

/// # Safety
/// `inst` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hf_instance_save(inst: *const HfInstance, path: *const c_char) -> HfStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        let path = str_arg(path, "path")?;
        let file = std::fs::File::create(path).map_err(|e| Failure::new(HfStatus::Io, format!("{path}: {e}")))?;
        let mut w = std::io::BufWriter::new(file);
        inst.0.write_to(&mut w)?;
        std::io::Write::flush(&mut w).map_err(|e| Failure::new(HfStatus::Io, e.to_string()))?;
        Ok(HfStatus::Ok)
    })
}

/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_instance_n(inst: *const HfInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.n())
}

/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_instance_weight(inst: *const HfInstance, i: usize, j: usize, out: *mut f64) -> HfStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        check_out(out)?;
        let n = inst.0.n();
        if i == j || i >= n || j >= n {
            return Err(Failure::new(HfStatus::InvalidArgument, format!("no edge ({i}, {j}) in K_{n}")));
        }
        *out = inst.0.weight(i, j);
        Ok(HfStatus::Ok)
    })
}

/// # Safety
/// `inst` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_instance_free(inst: *mut HfInstance) {
    free_handle(inst);
}

fn solver_config(node_budget: u64) -> SolverConfig {
    let mut config = SolverConfig::default();
    if node_budget > 0 {
        config.node_budget = node_budget;
    }
    config
}

unsafe fn finish_solve(outcome: Result<SolveOutcome, SolveError>, out: *mut *mut HfSolution) -> Result<HfStatus, Failure> {
    match outcome {
        Ok(SolveOutcome::Solved(sol)) => store(out, HfSolution(sol)),
        Ok(SolveOutcome::Infeasible) => Err(Failure::new(HfStatus::Infeasible, "infeasible")),
        Err(SolveError::Timeout { budget, incumbent }) => {
            if let Some(sol) = incumbent {
                store(out, HfSolution(*sol))?;
            }
            Err(Failure::new(HfStatus::Timeout, format!("node budget of {budget} exhausted")))
        }
        Err(e) => Err(e.into()),
    }
}

unsafe fn solve(
    inst: *const HfInstance,
    graph: *const HfGraph,
    mode: Mode,
    k: usize,
    cap: f64,
    node_budget: u64,
    out: *mut *mut HfSolution,
) -> HfStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        let g = handle(graph, "graph")?;
        check_out(out)?;
        *out = ptr::null_mut();
        if !(cap > 0.0) {
            return Err(Failure::new(HfStatus::InvalidArgument, "cap must be positive"));
        }
        let problem = TilingProblem::new(&inst.0, &g.0, cap, solver_config(node_budget))?;
        let outcome = match mode {
            Mode::Factor => problem.min_factor(k),
            Mode::Cover => problem.min_cover(k),
        };
        finish_solve(outcome, out)
    })
}

/// Minimum-weight partial factor leaving at most `k` vertices uncovered,
/// using only edges of weight `<= cap` (pass `INFINITY` for no cap). A
/// `node_budget` of 0 uses the default. On `HF_STATUS_INFEASIBLE` `*out`
/// is null; on `HF_STATUS_TIMEOUT` it holds the best solution found, or
/// null.
///
/// # Safety
/// `inst` and `graph` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_min_factor(
    inst: *const HfInstance,
    graph: *const HfGraph,
    k: usize,
    cap: f64,
    node_budget: u64,
    out: *mut *mut HfSolution,
) -> HfStatus {
    solve(inst, graph, Mode::Factor, k, cap, node_budget, out)
}

/// As [`hf_min_factor`] for covers.
///
/// # Safety
/// `inst` and `graph` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_min_cover(
    inst: *const HfInstance,
    graph: *const HfGraph,
    k: usize,
    cap: f64,
    node_budget: u64,
    out: *mut *mut HfSolution,
) -> HfStatus {
    solve(inst, graph, Mode::Cover, k, cap, node_budget, out)
}

/// Exhaustive reference solver for small `n`.
///
/// # Safety
/// `inst` and `graph` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_oracle(
    inst: *const HfInstance,
    graph: *const HfGraph,
    mode: HfMode,
    k: usize,
    cap: f64,
    out: *mut *mut HfSolution,
) -> HfStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        let g = handle(graph, "graph")?;
        check_out(out)?;
        *out = ptr::null_mut();
        let mode = match mode {
            HfMode::Factor => Mode::Factor,
            HfMode::Cover => Mode::Cover,
        };
        finish_solve(brute_force_oracle(&inst.0, &g.0, mode, k, cap), out)
    })
}

/// Largest number of vertices a partial factor of weight `<= budget`
/// covers, with a witness.
///
/// # Safety
/// `inst` and `graph` must be live handles; `covered` and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn hf_max_coverage(
    inst: *const HfInstance,
    graph: *const HfGraph,
    budget: f64,
    node_budget: u64,
    covered: *mut usize,
    out: *mut *mut HfSolution,
) -> HfStatus {
    guard(|| {
        let inst = handle(inst, "inst")?;
        let g = handle(graph, "graph")?;
        check_out(covered)?;
        check_out(out)?;
        *out = ptr::null_mut();
        let problem = TilingProblem::new(&inst.0, &g.0, f64::INFINITY, solver_config(node_budget))?;
        let result = problem.max_coverage_under_budget(budget)?;
        *covered = result.covered;
        store(out, HfSolution(result.solution))
    })
}

/// Total weight, or NaN for a null handle.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_solution_total_weight(sol: *const HfSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.total_weight)
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_solution_copy_count(sol: *const HfSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.copies.len())
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_solution_uncovered(sol: *const HfSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.uncovered)
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_solution_is_optimal(sol: *const HfSolution) -> bool {
    sol.as_ref().is_some_and(|s| s.0.optimal)
}

/// Copies the embedding of copy `index` (host vertex of each pattern
/// vertex) into `buf`. `*written` receives the embedding length, also when
/// `buf` is too short, in which case nothing is copied.
///
/// # Safety
/// `sol` must be a live handle; `buf` must hold `len` writable entries;
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_solution_copy(
    sol: *const HfSolution,
    index: usize,
    buf: *mut usize,
    len: usize,
    written: *mut usize,
) -> HfStatus {
    guard(|| {
        let sol = handle(sol, "sol")?;
        check_out(written)?;
        let copy = sol.0.copies.get(index).ok_or_else(|| {
            Failure::new(HfStatus::InvalidArgument, format!("copy index {index} out of range"))
        })?;
        let emb = &copy.embedding;
        *written = emb.len();
        if len < emb.len() {
            return Err(Failure::new(HfStatus::InvalidArgument, format!("buffer holds {len}, need {}", emb.len())));
        }
        check_out(buf)?;
        ptr::copy_nonoverlapping(emb.as_ptr(), buf, emb.len());
        Ok(HfStatus::Ok)
    })
}

/// The solution as a JSON record with 17 significant digits. Release the
/// string with [`hf_string_free`].
///
/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_solution_to_json(sol: *const HfSolution, out: *mut *mut c_char) -> HfStatus {
    guard(|| {
        let sol = handle(sol, "sol")?;
        check_out(out)?;
        let text = SolutionRecord::from(&sol.0).to_json();
        *out = CString::new(text)
            .map_err(|e| Failure::new(HfStatus::InvalidArgument, e.to_string()))?
            .into_raw();
        Ok(HfStatus::Ok)
    })
}

/// Re-checks every solution invariant against `inst` and `graph`;
/// `HF_STATUS_INVALID` with a message on failure.
///
/// # Safety
/// All handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hf_solution_validate(
    sol: *const HfSolution,
    inst: *const HfInstance,
    graph: *const HfGraph,
) -> HfStatus {
    guard(|| {
        let sol = handle(sol, "sol")?;
        let inst = handle(inst, "inst")?;
        let g = handle(graph, "graph")?;
        validate_solution(&sol.0, &inst.0, &g.0).map_err(|m| Failure::new(HfStatus::Invalid, m))?;
        Ok(HfStatus::Ok)
    })
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_solution_free(sol: *mut HfSolution) {
    free_handle(sol);
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
