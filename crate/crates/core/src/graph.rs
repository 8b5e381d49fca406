//! Pattern graphs and their density invariants.
//!
//! A [`GraphH`] is the small fixed pattern being tiled into the host graph.
//! [`analyze`] computes the 1-density `e/(v-1)`, its maximum over subgraphs,
//! the maximum 0-density `e/v`, balancedness and the automorphism count.
//! Densities are exact rationals so that balanced and strictly balanced
//! patterns are told apart without rounding.

use std::fmt;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

/// Exact density value.
pub type Density = Ratio<i64>;

/// Largest pattern accepted anywhere; adjacency rows are stored as `u64` masks.
pub const MAX_PATTERN_VERTICES: usize = 64;

/// Default limit for the exhaustive subset scan in [`analyze`].
pub const DEFAULT_SCAN_LIMIT: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown graph family `{0}`")]
    UnknownFamily(String),
    #[error("bad parameters for `{family}`: {message}")]
    BadParams { family: String, message: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("pattern too large: {vertices} vertices exceeds the exhaustive-scan limit of {limit}")]
    TooLarge { vertices: usize, limit: usize },
}

/// A small undirected simple graph with at least one edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphH {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<u64>,
    label: String,
}

impl GraphH {
    /// Builds a validated pattern. Edges are normalized to `(lo, hi)` and sorted.
    pub fn new(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        label: impl Into<String>,
    ) -> Result<Self, GraphError> {
        if vertex_count > MAX_PATTERN_VERTICES {
            return Err(GraphError::Invalid(format!(
                "{vertex_count} vertices exceeds the maximum of {MAX_PATTERN_VERTICES}"
            )));
        }
        let mut adjacency = vec![0u64; vertex_count];
        let mut list = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::Invalid(format!("self-loop at vertex {u}")));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(GraphError::Invalid(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{vertex_count}"
                )));
            }
            if adjacency[u] >> v & 1 == 1 {
                return Err(GraphError::Invalid(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u] |= 1 << v;
            adjacency[v] |= 1 << u;
            list.push((u.min(v), u.max(v)));
        }
        if list.is_empty() {
            return Err(GraphError::Invalid("pattern must have at least one edge".into()));
        }
        list.sort_unstable();
        Ok(Self {
            vertex_count,
            edges: list,
            adjacency,
            label: label.into(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted `(lo, hi)` edge list.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adjacency[u] >> v & 1 == 1
    }

    /// Neighbour set of `u` as a bit mask.
    #[inline]
    pub fn neighbour_mask(&self, u: usize) -> u64 {
        self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].count_ones() as usize
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count == 0 {
            return true;
        }
        let full = full_mask(self.vertex_count);
        let mut seen = 1u64;
        let mut frontier = 1u64;
        while frontier != 0 {
            let mut next = 0u64;
            for v in bits(frontier) {
                next |= self.adjacency[v];
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen == full
    }

    /// Number of edges with both endpoints in `mask`.
    pub fn induced_edge_count(&self, mask: u64) -> usize {
        let twice: u32 = bits(mask).map(|v| (self.adjacency[v] & mask).count_ones()).sum();
        (twice / 2) as usize
    }

    /// The subgraph induced on `vertices`, relabelled to `0..len` in the given order.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Result<GraphH, GraphError> {
        let mut edges = Vec::new();
        for (a, &u) in vertices.iter().enumerate() {
            for (b, &v) in vertices.iter().enumerate().skip(a + 1) {
                if self.adjacent(u, v) {
                    edges.push((a, b));
                }
            }
        }
        GraphH::new(vertices.len(), edges, format!("{}[{:?}]", self.label, vertices))
    }

    /// Disjoint union; the vertices of `other` are shifted past those of `self`.
    pub fn disjoint_union(&self, other: &GraphH) -> Result<GraphH, GraphError> {
        let shift = self.vertex_count;
        let edges = self
            .edges
            .iter()
            .copied()
            .chain(other.edges.iter().map(|&(u, v)| (u + shift, v + shift)));
        GraphH::new(
            self.vertex_count + other.vertex_count,
            edges,
            format!("{}+{}", self.label, other.label),
        )
    }

    /// Edge-list rendering accepted by [`parse_graph`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.vertex_count);
        for (u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}

impl fmt::Display for GraphH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (v={}, e={})",
            self.label,
            self.vertex_count,
            self.edges.len()
        )
    }
}

#[inline]
pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Iterates the set bit positions of `mask` in increasing order.
pub(crate) fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// Parses the edge-list text format: one `u v` pair per line, an optional
/// leading `n <count>` header, blank lines and `#` comments ignored.
pub fn parse_graph(text: &str) -> Result<GraphH, GraphError> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut max_endpoint: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |message: String| GraphError::Parse { line: line_no, message };
        if fields.first() == Some(&"n") {
            if header.is_some() || !edges.is_empty() {
                return Err(err("header `n <count>` must be the first entry".into()));
            }
            if fields.len() != 2 {
                return Err(err(format!("malformed header `{line}`")));
            }
            let count = fields[1]
                .parse::<usize>()
                .map_err(|_| err(format!("bad vertex count `{}`", fields[1])))?;
            header = Some((count, line_no));
            continue;
        }
        if fields.len() != 2 {
            return Err(err(format!("expected `u v`, found `{line}`")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(format!("bad vertex `{s}`")))
        };
        let (u, v) = (parse(fields[0])?, parse(fields[1])?);
        if u == v {
            return Err(err(format!("self-loop at vertex {u}")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(err(format!("duplicate edge ({u}, {v})")));
        }
        max_endpoint = Some(max_endpoint.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v, line_no));
    }

    let needed = max_endpoint.map_or(0, |m| m + 1);
    let vertex_count = match header {
        Some((count, line)) if count < needed => {
            return Err(GraphError::Parse {
                line,
                message: format!("header declares {count} vertices but vertex {} is used", needed - 1),
            })
        }
        Some((count, _)) => count,
        None => needed,
    };
    if edges.is_empty() {
        return Err(GraphError::Parse {
            line: text.lines().count().max(1),
            message: "no edges found".into(),
        });
    }
    if vertex_count > MAX_PATTERN_VERTICES {
        return Err(GraphError::Parse {
            line: edges.last().map_or(1, |e| e.2),
            message: format!("pattern exceeds {MAX_PATTERN_VERTICES} vertices"),
        });
    }
    GraphH::new(vertex_count, edges.into_iter().map(|(u, v, _)| (u, v)), "edgelist")
}

fn bad(family: &str, message: impl Into<String>) -> GraphError {
    GraphError::BadParams {
        family: family.into(),
        message: message.into(),
    }
}

fn expect_params(family: &str, params: &[usize], count: usize) -> Result<(), GraphError> {
    if params.len() == count {
        Ok(())
    } else {
        Err(bad(family, format!("expected {count} parameter(s), got {}", params.len())))
    }
}

/// Builds a standard graph family.
///
/// `complete:k` (k ≥ 2), `cycle:k` (k ≥ 3), `path:k` (k ≥ 2 vertices) and
/// `lollipop:a,b` (K_a with a path of `b` extra vertices hanging off one clique
/// vertex; a ≥ 2, b ≥ 1). Disjoint unions are built with [`parse_named`] or
/// [`GraphH::disjoint_union`].
pub fn named_graph(name: &str, params: &[usize]) -> Result<GraphH, GraphError> {
    let label = format!(
        "{name}:{}",
        params.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
    );
    match name {
        "complete" => {
            expect_params(name, params, 1)?;
            let k = params[0];
            if k < 2 {
                return Err(bad(name, "complete graph needs k >= 2"));
            }
            let edges = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v)));
            GraphH::new(k, edges, label)
        }
        "cycle" => {
            expect_params(name, params, 1)?;
            let k = params[0];
            if k < 3 {
                return Err(bad(name, "cycle needs k >= 3"));
            }
            GraphH::new(k, (0..k).map(|u| (u, (u + 1) % k)), label)
        }
        "path" => {
            expect_params(name, params, 1)?;
            let k = params[0];
            if k < 2 {
                return Err(bad(name, "path needs k >= 2 vertices"));
            }
            GraphH::new(k, (0..k - 1).map(|u| (u, u + 1)), label)
        }
        "lollipop" => {
            expect_params(name, params, 2)?;
            let (a, b) = (params[0], params[1]);
            if a < 2 || b < 1 {
                return Err(bad(name, "lollipop needs a >= 2 and b >= 1"));
            }
            // The tail hangs off clique vertex a-1.
            let clique = (0..a).flat_map(|u| (u + 1..a).map(move |v| (u, v)));
            let tail = (a - 1..a + b - 1).map(|u| (u, u + 1));
            GraphH::new(a + b, clique.chain(tail), label)
        }
        "disjoint_union" => Err(bad(
            name,
            "write unions as `family:params+family:params`",
        )),
        other => Err(GraphError::UnknownFamily(other.to_string())),
    }
}

/// Parses the `family:p1,p2` syntax; `+` joins terms into a disjoint union
/// (`complete:4+complete:2`). A leading `disjoint_union:` is accepted and ignored.
pub fn parse_named(spec: &str) -> Result<GraphH, GraphError> {
    let spec = spec.trim();
    let spec = spec.strip_prefix("disjoint_union:").unwrap_or(spec);
    let mut result: Option<GraphH> = None;
    for term in spec.split('+') {
        let term = term.trim();
        let (family, params) = match term.split_once(':') {
            Some((f, p)) => (f, p),
            None => (term, ""),
        };
        let params = params
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| bad(family, format!("bad parameter `{s}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let g = named_graph(family, &params)?;
        result = Some(match result {
            None => g,
            Some(acc) => acc.disjoint_union(&g)?,
        });
    }
    result.ok_or_else(|| GraphError::UnknownFamily(spec.to_string()))
}

/// Structural invariants of a pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensityReport {
    pub vertex_count: usize,
    pub edge_count: usize,
    /// 1-density `e/(v-1)` of the whole pattern.
    pub d_h: Density,
    /// Maximum 1-density over subgraphs with at least two vertices.
    pub d_star: Density,
    /// Maximum 0-density `e/v` over subgraphs.
    pub delta: Density,
    pub h_star_vertices: Vec<usize>,
    pub delta_witness_vertices: Vec<usize>,
    pub strictly_balanced: bool,
    pub balanced: bool,
    pub aut_count: u128,
}

impl DensityReport {
    pub fn d_h_f64(&self) -> f64 {
        ratio_f64(self.d_h)
    }
    pub fn d_star_f64(&self) -> f64 {
        ratio_f64(self.d_star)
    }
    pub fn delta_f64(&self) -> f64 {
        ratio_f64(self.delta)
    }
}

pub fn ratio_f64(r: Density) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Serialize)]
struct DensityReportRecord<'a> {
    vertex_count: usize,
    edge_count: usize,
    d_h: String,
    d_star: String,
    delta: String,
    h_star_vertices: &'a [usize],
    delta_witness_vertices: &'a [usize],
    strictly_balanced: bool,
    balanced: bool,
    aut_count: String,
}

impl Serialize for DensityReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DensityReportRecord {
            vertex_count: self.vertex_count,
            edge_count: self.edge_count,
            d_h: self.d_h.to_string(),
            d_star: self.d_star.to_string(),
            delta: self.delta.to_string(),
            h_star_vertices: &self.h_star_vertices,
            delta_witness_vertices: &self.delta_witness_vertices,
            strictly_balanced: self.strictly_balanced,
            balanced: self.balanced,
            aut_count: self.aut_count.to_string(),
        }
        .serialize(serializer)
    }
}

/// `a` precedes `b` in the (cardinality, lexicographic vertex list) order.
fn subset_precedes(a: u64, b: u64) -> bool {
    let (ca, cb) = (a.count_ones(), b.count_ones());
    if ca != cb {
        return ca < cb;
    }
    // Same size: the first differing element decides, and it is the lowest
    // bit of the symmetric difference.
    let diff = a ^ b;
    diff != 0 && a & (diff & diff.wrapping_neg()) != 0
}

fn mask_vertices(mask: u64) -> Vec<usize> {
    bits(mask).collect()
}

/// Computes the invariants with the default scan limit.
pub fn analyze(h: &GraphH) -> Result<DensityReport, GraphError> {
    analyze_with_limit(h, DEFAULT_SCAN_LIMIT)
}

/// Exhaustive scan over induced vertex subsets; dropping edges from a vertex
/// subset never raises either density, so induced subsets suffice.
pub fn analyze_with_limit(h: &GraphH, limit: usize) -> Result<DensityReport, GraphError> {
    let v = h.vertex_count();
    if v > limit {
        return Err(GraphError::TooLarge { vertices: v, limit });
    }
    if v < 2 {
        return Err(GraphError::Invalid("pattern needs at least two vertices".into()));
    }
    let full = full_mask(v);
    let e = h.edge_count() as i64;
    let d_h = Density::new(e, v as i64 - 1);

    let mut best_star: Option<(Density, u64)> = None;
    let mut best_delta: Option<(Density, u64)> = None;
    let mut strictly_balanced = true;

    for mask in 1..=full {
        let size = mask.count_ones() as i64;
        let edges = h.induced_edge_count(mask) as i64;
        let zero = Density::new(edges, size);
        if best_delta.is_none_or(|(d, m)| zero > d || (zero == d && subset_precedes(mask, m))) {
            best_delta = Some((zero, mask));
        }
        if size < 2 {
            continue;
        }
        let one = Density::new(edges, size - 1);
        if best_star.is_none_or(|(d, m)| one > d || (one == d && subset_precedes(mask, m))) {
            best_star = Some((one, mask));
        }
        if mask != full && one >= d_h {
            strictly_balanced = false;
        }
    }
    let (d_star, star_mask) = best_star.expect("v >= 2 gives at least one subset");
    let (delta, delta_mask) = best_delta.expect("non-empty subset range");

    Ok(DensityReport {
        vertex_count: v,
        edge_count: e as usize,
        d_h,
        d_star,
        delta,
        h_star_vertices: mask_vertices(star_mask),
        delta_witness_vertices: mask_vertices(delta_mask),
        strictly_balanced,
        balanced: d_star == d_h,
        aut_count: automorphism_count(h),
    })
}

/// Backtracking search for automorphisms extending the partial map
/// `image[0..depth]`. Calls `visit` on every complete automorphism; stops as
/// soon as `visit` returns `false`. Returns whether the search was stopped.
fn search_automorphisms(
    h: &GraphH,
    image: &mut Vec<usize>,
    used: u64,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    let v = h.vertex_count();
    let depth = image.len();
    if depth == v {
        return !visit(image);
    }
    for w in 0..v {
        if used >> w & 1 == 1 || h.degree(w) != h.degree(depth) {
            continue;
        }
        let consistent = (0..depth).all(|j| h.adjacent(depth, j) == h.adjacent(w, image[j]));
        if !consistent {
            continue;
        }
        image.push(w);
        let stopped = search_automorphisms(h, image, used | 1 << w, visit);
        image.pop();
        if stopped {
            return true;
        }
    }
    false
}

/// |Aut(H)| by the orbit-stabilizer chain: the orbit of vertex `i` under the
/// pointwise stabilizer of `0..i` is found by an existence search per target.
pub fn automorphism_count(h: &GraphH) -> u128 {
    let v = h.vertex_count();
    let mut total: u128 = 1;
    for i in 0..v {
        let mut orbit = 0u128;
        let prefix: Vec<usize> = (0..i).collect();
        let used_prefix = full_mask(i);
        for w in i..v {
            if h.degree(w) != h.degree(i) {
                continue;
            }
            let consistent = (0..i).all(|j| h.adjacent(i, j) == h.adjacent(w, j));
            if !consistent {
                continue;
            }
            let mut image = prefix.clone();
            image.push(w);
            let found = search_automorphisms(h, &mut image, used_prefix | 1 << w, &mut |_| false);
            if found {
                orbit += 1;
            }
        }
        total *= orbit;
    }
    total
}

/// Lists every automorphism as an image vector, or `None` if the group has
/// more than `max` elements.
pub fn automorphisms(h: &GraphH, max: usize) -> Option<Vec<Vec<usize>>> {
    if automorphism_count(h) > max as u128 {
        return None;
    }
    let mut out = Vec::new();
    search_automorphisms(h, &mut Vec::new(), 0, &mut |img| {
        out.push(img.to_vec());
        true
    });
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Density {
        Density::new(n, d)
    }

    #[test]
    fn parses_triangle() {
        let g = parse_graph("0 1\n1 2\n0 2").unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (3, 3));
    }

    #[test]
    fn header_adds_isolated_vertices() {
        let g = parse_graph("n 4\n0 1").unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (4, 1));
    }

    #[test]
    fn parse_errors_name_the_line() {
        assert!(matches!(parse_graph("0 0"), Err(GraphError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_graph("0 1\n1 0"),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_graph("0 1\nfoo bar"),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_graph("n 2\n0 1\n1 2"),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_graph("0 1 2"),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn named_families() {
        let l = named_graph("lollipop", &[5, 2]).unwrap();
        assert_eq!((l.vertex_count(), l.edge_count()), (7, 12));
        let u = parse_named("complete:4+complete:2").unwrap();
        assert_eq!((u.vertex_count(), u.edge_count()), (6, 7));
        assert_eq!(
            named_graph("cycle", &[3]).unwrap().edges(),
            named_graph("complete", &[3]).unwrap().edges()
        );
        assert!(matches!(named_graph("complete", &[1]), Err(GraphError::BadParams { .. })));
        assert!(matches!(named_graph("petersen", &[]), Err(GraphError::UnknownFamily(_))));
    }

    #[test]
    fn triangle_invariants() {
        let rep = analyze(&parse_named("complete:3").unwrap()).unwrap();
        assert_eq!(rep.d_h, r(3, 2));
        assert_eq!(rep.d_star, r(3, 2));
        assert_eq!(rep.delta, r(1, 1));
        assert!(rep.strictly_balanced && rep.balanced);
        assert_eq!(rep.aut_count, 6);
    }

    #[test]
    fn k4_plus_k2_invariants() {
        let rep = analyze(&parse_named("complete:4+complete:2").unwrap()).unwrap();
        assert_eq!(rep.d_h, r(7, 5));
        assert_eq!(rep.d_star, r(2, 1));
        assert_eq!(rep.delta, r(3, 2));
        assert_eq!(rep.h_star_vertices, vec![0, 1, 2, 3]);
        assert!(!rep.strictly_balanced && !rep.balanced);
        assert_eq!(rep.aut_count, 48);
    }

    #[test]
    fn lollipop_invariants() {
        let rep = analyze(&named_graph("lollipop", &[5, 2]).unwrap()).unwrap();
        assert_eq!(rep.d_h, r(2, 1));
        assert_eq!(rep.d_star, r(5, 2));
        assert_eq!(rep.delta, r(2, 1));
        assert_eq!(rep.h_star_vertices, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn automorphism_counts() {
        for k in 2..=7usize {
            let fact: u128 = (1..=k as u128).product();
            assert_eq!(automorphism_count(&named_graph("complete", &[k]).unwrap()), fact);
        }
        for k in 3..=9usize {
            assert_eq!(
                automorphism_count(&named_graph("cycle", &[k]).unwrap()),
                2 * k as u128
            );
        }
        let k16 = named_graph("complete", &[16]).unwrap();
        assert_eq!(automorphism_count(&k16), (1..=16u128).product());
        let auts = automorphisms(&named_graph("path", &[3]).unwrap(), 100).unwrap();
        assert_eq!(auts.len(), 2);
    }

    #[test]
    fn too_large_pattern_is_refused() {
        let k17 = named_graph("path", &[17]).unwrap();
        assert!(matches!(analyze(&k17), Err(GraphError::TooLarge { .. })));
    }

    #[test]
    fn isolated_vertices_break_strict_balance() {
        let g = parse_graph("n 4\n0 1\n1 2\n0 2").unwrap();
        let rep = analyze(&g).unwrap();
        assert_eq!(rep.d_h, r(1, 1));
        assert_eq!(rep.d_star, r(3, 2));
        assert!(!rep.strictly_balanced);
    }
}
