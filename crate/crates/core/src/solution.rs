//! Solutions to the factor and cover problems, their validation and their
//! record format.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::copies::{copy_order, edge_weight_sum, PlacedCopy};
use crate::graph::GraphH;
use crate::instance::WeightedInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Copies are vertex-disjoint.
    Factor,
    /// Copies may share vertices; shared edges are paid once per copy.
    Cover,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Factor => "factor",
            Mode::Cover => "cover",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "factor" => Ok(Mode::Factor),
            "cover" => Ok(Mode::Cover),
            other => Err(format!("unknown mode `{other}` (expected factor or cover)")),
        }
    }
}

/// A partial factor or cover of K_n.
#[derive(Debug, Clone, PartialEq)]
pub struct TilingSolution {
    pub mode: Mode,
    pub n: usize,
    /// Copies in canonical order (see [`copy_order`]).
    pub copies: Vec<PlacedCopy>,
    pub total_weight: f64,
    pub uncovered: usize,
    pub cap: f64,
    pub optimal: bool,
    pub allowed_uncovered: usize,
}

impl TilingSolution {
    /// Builds a solution with the copies in canonical order.
    pub fn from_copies(
        mode: Mode,
        inst: &WeightedInstance,
        copies: Vec<PlacedCopy>,
        cap: f64,
        allowed_uncovered: usize,
        optimal: bool,
    ) -> Self {
        let total = canonical_total(&copies, inst);
        Self::assemble(mode, inst.n(), copies, total, cap, allowed_uncovered, optimal)
    }

    fn assemble(
        mode: Mode,
        n: usize,
        mut copies: Vec<PlacedCopy>,
        total_weight: f64,
        cap: f64,
        allowed_uncovered: usize,
        optimal: bool,
    ) -> Self {
        copies.sort_by(copy_order);
        let mut covered = vec![false; n];
        for c in &copies {
            for &v in &c.vertices {
                covered[v] = true;
            }
        }
        let uncovered = covered.iter().filter(|&&c| !c).count();
        Self {
            mode,
            n,
            copies,
            total_weight,
            uncovered,
            cap,
            optimal,
            allowed_uncovered,
        }
    }

    pub fn empty(mode: Mode, n: usize, cap: f64, allowed_uncovered: usize) -> Self {
        Self::assemble(mode, n, Vec::new(), 0.0, cap, allowed_uncovered, true)
    }

    pub fn covered(&self) -> usize {
        self.n - self.uncovered
    }

    /// Union of the host edges used by the solution.
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self.copies.iter().flat_map(|c| c.edges.iter().copied()).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// Total weight: every copy's edges pooled (with multiplicity), sorted by
/// endpoints and added in that order. Depends only on the edge multiset, not
/// on how it is split into copies.
pub fn canonical_total(copies: &[PlacedCopy], inst: &WeightedInstance) -> f64 {
    let mut edges: Vec<(usize, usize)> = copies.iter().flat_map(|c| c.edges.iter().copied()).collect();
    edges.sort_unstable();
    edge_weight_sum(inst, &edges)
}

/// Independent check of every solution invariant against the instance.
pub fn validate_solution(sol: &TilingSolution, inst: &WeightedInstance, h: &GraphH) -> Result<(), String> {
    if sol.n != inst.n() {
        return Err(format!("solution is for n = {}, instance has n = {}", sol.n, inst.n()));
    }
    let n = inst.n();
    let mut hits = vec![0usize; n];
    let mut keys = std::collections::HashSet::new();
    for (idx, c) in sol.copies.iter().enumerate() {
        if c.embedding.len() != h.vertex_count() {
            return Err(format!("copy {idx} has {} vertices", c.embedding.len()));
        }
        let mut seen = vec![false; n];
        for &x in &c.embedding {
            if x >= n || seen[x] {
                return Err(format!("copy {idx} embedding is not injective into 0..{n}"));
            }
            seen[x] = true;
        }
        let mut edges: Vec<(usize, usize)> = h
            .edges()
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (c.embedding[u], c.embedding[v]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        if edges != c.edges {
            return Err(format!("copy {idx} edges do not match its embedding"));
        }
        let mut verts = c.embedding.clone();
        verts.sort_unstable();
        if verts != c.vertices {
            return Err(format!("copy {idx} vertex list does not match its embedding"));
        }
        let w = edge_weight_sum(inst, &edges);
        if w.to_bits() != c.weight.to_bits() {
            return Err(format!("copy {idx} weight {} differs from recomputed {w}", c.weight));
        }
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| inst.weight(u, v) > sol.cap) {
            return Err(format!("copy {idx} uses edge ({u}, {v}) above the cap {}", sol.cap));
        }
        if !keys.insert((c.vertices.clone(), c.edges.clone())) {
            return Err(format!("copy {idx} appears twice"));
        }
        for &x in &c.vertices {
            hits[x] += 1;
        }
    }
    if sol.mode == Mode::Factor {
        if let Some(v) = hits.iter().position(|&k| k > 1) {
            return Err(format!("factor copies overlap at vertex {v}"));
        }
    }
    let uncovered = hits.iter().filter(|&&k| k == 0).count();
    if uncovered != sol.uncovered {
        return Err(format!("uncovered count {} but {} vertices are uncovered", sol.uncovered, uncovered));
    }
    if uncovered > sol.allowed_uncovered {
        return Err(format!("{uncovered} uncovered vertices exceed the allowance {}", sol.allowed_uncovered));
    }
    let total = canonical_total(&sol.copies, inst);
    if total.to_bits() != sol.total_weight.to_bits() {
        return Err(format!("total weight {} differs from recomputed {total}", sol.total_weight));
    }
    Ok(())
}

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x > 0.0 {
        "inf".into()
    } else if x < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

/// A float serialized as a JSON number with 17 significant digits, or as a
/// string for non-finite values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = serde_json::value::RawValue::from_string(fmt17(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(serializer)
        } else {
            serializer.serialize_str(&fmt17(self.0))
        }
    }
}

impl<'de> Deserialize<'de> for Sig17 {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either {
            Num(f64),
            Text(String),
        }
        match Either::deserialize(deserializer)? {
            Either::Num(x) => Ok(Sig17(x)),
            Either::Text(s) => match s.as_str() {
                "inf" => Ok(Sig17(f64::INFINITY)),
                "-inf" => Ok(Sig17(f64::NEG_INFINITY)),
                "nan" => Ok(Sig17(f64::NAN)),
                other => other.parse().map(Sig17).map_err(serde::de::Error::custom),
            },
        }
    }
}

/// Structured text form of a solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub cap: Sig17,
    pub total_weight: Sig17,
    pub uncovered: usize,
    pub optimal: bool,
    /// Each copy as its embedding (pattern vertex order).
    pub copies: Vec<Vec<usize>>,
}

impl From<&TilingSolution> for SolutionRecord {
    fn from(sol: &TilingSolution) -> Self {
        Self {
            mode: sol.mode,
            n: sol.n,
            k: sol.allowed_uncovered,
            cap: Sig17(sol.cap),
            total_weight: Sig17(sol.total_weight),
            uncovered: sol.uncovered,
            optimal: sol.optimal,
            copies: sol.copies.iter().map(|c| c.embedding.clone()).collect(),
        }
    }
}

impl SolutionRecord {
    /// Single-line JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution records always serialize")
    }

    /// Rebuilds the solution against an instance; weights are recomputed.
    pub fn to_solution(&self, h: &GraphH, inst: &WeightedInstance) -> Result<TilingSolution, String> {
        let mut copies = Vec::with_capacity(self.copies.len());
        for emb in &self.copies {
            if emb.len() != h.vertex_count() || emb.iter().any(|&x| x >= inst.n()) {
                return Err(format!("copy {emb:?} does not fit the pattern and host"));
            }
            copies.push(PlacedCopy::from_embedding(h, inst, emb.clone()));
        }
        if self.n != inst.n() {
            return Err(format!("record is for n = {}, instance has n = {}", self.n, inst.n()));
        }
        Ok(TilingSolution::from_copies(self.mode, inst, copies, self.cap.0, self.k, self.optimal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::named_graph;
    use crate::instance::{sample_instance, WeightDistribution};

    #[test]
    fn validator_catches_overlap_and_bad_weight() {
        let k3 = named_graph("complete", &[3]).unwrap();
        let inst = sample_instance(6, WeightDistribution::EXP1, 1).unwrap();
        let a = PlacedCopy::from_embedding(&k3, &inst, vec![0, 1, 2]);
        let b = PlacedCopy::from_embedding(&k3, &inst, vec![2, 3, 4]);
        let sol = TilingSolution::from_copies(Mode::Factor, &inst, vec![a.clone(), b.clone()], f64::INFINITY, 6, false);
        assert!(validate_solution(&sol, &inst, &k3).unwrap_err().contains("overlap"));
        let cover = TilingSolution::from_copies(Mode::Cover, &inst, vec![a.clone(), b], f64::INFINITY, 1, false);
        assert!(validate_solution(&cover, &inst, &k3).is_ok());
        assert_eq!(cover.uncovered, 1);

        let mut bad = TilingSolution::from_copies(Mode::Factor, &inst, vec![a], f64::INFINITY, 3, false);
        assert!(validate_solution(&bad, &inst, &k3).is_ok());
        bad.copies[0].weight += 1e-9;
        assert!(validate_solution(&bad, &inst, &k3).is_err());
    }

    #[test]
    fn record_uses_17_significant_digits() {
        let k3 = named_graph("complete", &[3]).unwrap();
        let inst = WeightedInstance::from_weights(3, vec![0.2, 0.3, 0.4], WeightDistribution::EXP1, 0).unwrap();
        let c = PlacedCopy::from_embedding(&k3, &inst, vec![0, 1, 2]);
        let sol = TilingSolution::from_copies(Mode::Factor, &inst, vec![c], f64::INFINITY, 0, true);
        let json = serde_json::to_string(&SolutionRecord::from(&sol)).unwrap();
        assert!(json.contains("\"total_weight\":9.0000000000000002e-1"), "{json}");
        assert!(json.contains("\"cap\":\"inf\""));
        let back: SolutionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.total_weight.0.to_bits(), sol.total_weight.to_bits());
        let rebuilt = back.to_solution(&k3, &inst).unwrap();
        assert_eq!(rebuilt, sol);
    }
}
