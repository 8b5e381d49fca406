//! Randomly weighted complete graphs.
//!
//! Every edge `{i, j}` draws its weight from its own ChaCha stream keyed by
//! `(seed, pair index)`, so the weight of an edge does not depend on the order
//! in which edges are generated, and sub-instances are reproducible.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest host size stored densely.
pub const MAX_DENSE_N: usize = 2048;

const DUMP_MAGIC: &[u8; 4] = b"HFWI";
const DUMP_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("instance needs n >= 2, got {0}")]
    TooSmall(usize),
    #[error("n = {n} exceeds the dense storage limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("split parameter t = {0} is outside (0, 1)")]
    SplitOutOfRange(f64),
    #[error("coupling requires an Exp(1) base instance, found {0}")]
    CouplingBase(WeightDistribution),
    #[error("target quantile is not usable at u = {u} (gave {value})")]
    Quantile { u: f64, value: f64 },
    #[error("bad weight {weight} on edge ({i}, {j})")]
    BadWeight { i: usize, j: usize, weight: f64 },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("malformed instance dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Edge-weight law. Both families have a CDF of the form `λx + o(x)` near 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightDistribution {
    /// Rate parameterization: density `rate·exp(-rate·x)`, mean `1/rate`.
    Exponential { rate: f64 },
    /// Uniform on the open interval (0, 1).
    Uniform,
}

impl WeightDistribution {
    pub const EXP1: WeightDistribution = WeightDistribution::Exponential { rate: 1.0 };

    pub fn exponential(rate: f64) -> Result<Self, InstanceError> {
        if rate.is_finite() && rate > 0.0 {
            Ok(Self::Exponential { rate })
        } else {
            Err(InstanceError::Distribution(format!("rate must be positive and finite, got {rate}")))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::Uniform => x.min(1.0),
        }
    }

    /// Inverse CDF on (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Uniform => u,
        }
    }

    /// Maps an Exp(1) variate `x` through `quantile(1 - exp(-x))`. The
    /// exponential case is evaluated in closed form (`x / rate`) so that the
    /// Exp(1) target is the identity bit for bit.
    pub fn transfer_from_exp1(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => x / rate,
            Self::Uniform => -(-x).exp_m1(),
        }
    }

    /// Draws one strictly positive sample by inversion from an open-interval
    /// uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        match *self {
            Self::Exponential { rate } => -u.ln() / rate,
            Self::Uniform => u,
        }
    }

    fn tag(&self) -> (u8, f64) {
        match *self {
            Self::Exponential { rate } => (0, rate),
            Self::Uniform => (1, 0.0),
        }
    }

    fn from_tag(tag: u8, param: f64) -> Result<Self, InstanceError> {
        match tag {
            0 => Self::exponential(param),
            1 => Ok(Self::Uniform),
            other => Err(InstanceError::Format(format!("unknown distribution tag {other}"))),
        }
    }
}

impl fmt::Display for WeightDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exp:{rate}"),
            Self::Uniform => write!(f, "uniform"),
        }
    }
}

impl FromStr for WeightDistribution {
    type Err = InstanceError;

    /// Accepts `exp`, `exp:<rate>` and `uniform`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "exp" || s == "exponential" => Ok(Self::EXP1),
            None if s == "uniform" => Ok(Self::Uniform),
            Some(("exp" | "exponential", rate)) => {
                let rate = rate
                    .parse::<f64>()
                    .map_err(|_| InstanceError::Distribution(format!("bad rate `{rate}`")))?;
                Self::exponential(rate)
            }
            _ => Err(InstanceError::Distribution(format!("unknown distribution `{s}`"))),
        }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a seed with further keys into a new seed.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k)))
}

#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// The complete graph K_n with positive edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedInstance {
    n: usize,
    weights: Vec<f64>,
    distribution: WeightDistribution,
    seed: u64,
}

impl WeightedInstance {
    /// Wraps explicit weights, given row-major over the upper triangle.
    pub fn from_weights(
        n: usize,
        weights: Vec<f64>,
        distribution: WeightDistribution,
        seed: u64,
    ) -> Result<Self, InstanceError> {
        if n < 2 {
            return Err(InstanceError::TooSmall(n));
        }
        let expected = n * (n - 1) / 2;
        if weights.len() != expected {
            return Err(InstanceError::WeightCount {
                expected,
                got: weights.len(),
            });
        }
        let inst = Self {
            n,
            weights,
            distribution,
            seed,
        };
        for (i, j) in inst.pairs() {
            let w = inst.weight(i, j);
            if w.is_nan() || w <= 0.0 {
                return Err(InstanceError::BadWeight { i, j, weight: w });
            }
        }
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn distribution(&self) -> WeightDistribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major upper-triangle weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.weights[pair_index(self.n, a, b)]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let idx = pair_index(self.n, a, b);
        self.weights[idx] = w;
    }

    /// All pairs `(i, j)` with `i < j`, in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
    }

    /// The instance induced on `vertices`, relabelled `0..len` in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Result<Self, InstanceError> {
        let m = vertices.len();
        if m < 2 {
            return Err(InstanceError::TooSmall(m));
        }
        let mut weights = Vec::with_capacity(m * (m - 1) / 2);
        for a in 0..m {
            for b in a + 1..m {
                weights.push(self.weight(vertices[a], vertices[b]));
            }
        }
        Ok(Self {
            n: m,
            weights,
            distribution: self.distribution,
            seed: self.seed,
        })
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }

    /// Writes the binary dump: magic, version, n, distribution tag and
    /// parameter, seed, then the upper-triangle weights, all little-endian.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), InstanceError> {
        let (tag, param) = self.distribution.tag();
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&DUMP_VERSION.to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&[tag])?;
        out.write_all(&param.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        for w in &self.weights {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, InstanceError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(InstanceError::Format("bad magic".into()));
        }
        let mut b2 = [0u8; 2];
        let mut b8 = [0u8; 8];
        let mut b1 = [0u8; 1];
        input.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != DUMP_VERSION {
            return Err(InstanceError::Format(format!("unsupported version {version}")));
        }
        input.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        if n > MAX_DENSE_N {
            return Err(InstanceError::TooLarge {
                n,
                limit: MAX_DENSE_N,
            });
        }
        input.read_exact(&mut b1)?;
        input.read_exact(&mut b8)?;
        let distribution = WeightDistribution::from_tag(b1[0], f64::from_le_bytes(b8))?;
        input.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        let count = n.saturating_mul(n.saturating_sub(1)) / 2;
        let mut weights = Vec::with_capacity(count);
        for _ in 0..count {
            input.read_exact(&mut b8)?;
            weights.push(f64::from_le_bytes(b8));
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(InstanceError::Format(format!("{} trailing bytes", rest.len())));
        }
        Self::from_weights(n, weights, distribution, seed)
    }
}

fn check_n(n: usize) -> Result<(), InstanceError> {
    if n < 2 {
        Err(InstanceError::TooSmall(n))
    } else if n > MAX_DENSE_N {
        Err(InstanceError::TooLarge {
            n,
            limit: MAX_DENSE_N,
        })
    } else {
        Ok(())
    }
}

fn edge_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws i.i.d. weights for every edge of K_n.
pub fn sample_instance(
    n: usize,
    dist: WeightDistribution,
    seed: u64,
) -> Result<WeightedInstance, InstanceError> {
    check_n(n)?;
    let count = n * (n - 1) / 2;
    let weights = (0..count as u64)
        .map(|p| dist.sample(&mut edge_rng(seed, p)))
        .collect();
    Ok(WeightedInstance {
        n,
        weights,
        distribution: dist,
        seed,
    })
}

/// Couples an Exp(1) instance to `target` edge by edge:
/// `Z_e = target.quantile(1 - exp(-X_e))`. The map is increasing, so the
/// weight order is preserved.
pub fn couple_instance(
    base: &WeightedInstance,
    target: WeightDistribution,
) -> Result<WeightedInstance, InstanceError> {
    if base.distribution != WeightDistribution::EXP1 {
        return Err(InstanceError::CouplingBase(base.distribution));
    }
    let weights = base
        .weights
        .iter()
        .map(|&x| {
            let z = target.transfer_from_exp1(x);
            if z.is_finite() && z > 0.0 {
                Ok(z)
            } else {
                Err(InstanceError::Quantile {
                    u: -(-x).exp_m1(),
                    value: z,
                })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WeightedInstance {
        n: base.n,
        weights,
        distribution: target,
        seed: base.seed,
    })
}

/// Two independent weight layers on K_n and their edge-wise minimum.
#[derive(Debug, Clone)]
pub struct RedGreenInstance {
    /// Exp(t) weights.
    pub green: WeightedInstance,
    /// Exp(1 - t) weights.
    pub red: WeightedInstance,
    /// `min(green, red)` per edge; Exp(1) in distribution.
    pub merged: WeightedInstance,
    /// `true` where the green edge is the cheaper one.
    pub green_wins: Vec<bool>,
    pub t: f64,
}

const GREEN_KEY: u64 = 0x4752_4545_4e;
const RED_KEY: u64 = 0x0052_4544;

pub fn red_green_instance(n: usize, t: f64, seed: u64) -> Result<RedGreenInstance, InstanceError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(InstanceError::SplitOutOfRange(t));
    }
    let green = sample_instance(n, WeightDistribution::exponential(t)?, derive_seed(seed, &[GREEN_KEY]))?;
    let red = sample_instance(n, WeightDistribution::exponential(1.0 - t)?, derive_seed(seed, &[RED_KEY]))?;
    let green_wins: Vec<bool> = green
        .weights
        .iter()
        .zip(&red.weights)
        .map(|(g, r)| g <= r)
        .collect();
    let merged_weights = green
        .weights
        .iter()
        .zip(&red.weights)
        .map(|(g, r)| g.min(*r))
        .collect();
    let merged = WeightedInstance {
        n,
        weights: merged_weights,
        distribution: WeightDistribution::EXP1,
        seed,
    };
    Ok(RedGreenInstance {
        green,
        red,
        merged,
        green_wins,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_instance(3, WeightDistribution::EXP1, 7).unwrap();
        let b = sample_instance(3, WeightDistribution::EXP1, 7).unwrap();
        assert_eq!(a.weights().len(), 3);
        assert_eq!(a, b);
        let c = sample_instance(3, WeightDistribution::EXP1, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn weights_are_keyed_by_edge() {
        // Edge (0, 1) of a 4-vertex instance and of a 10-vertex instance use
        // the same stream index, so they agree.
        let small = sample_instance(4, WeightDistribution::EXP1, 3).unwrap();
        let big = sample_instance(10, WeightDistribution::EXP1, 3).unwrap();
        assert_eq!(small.weight(0, 1), big.weight(0, 1));
    }

    #[test]
    fn uniform_weights_in_open_unit_interval() {
        let inst = sample_instance(100, WeightDistribution::Uniform, 1).unwrap();
        assert!(inst.weights().iter().all(|&w| w > 0.0 && w < 1.0));
    }

    #[test]
    fn exponential_mean_near_one() {
        let inst = sample_instance(1000, WeightDistribution::EXP1, 5).unwrap();
        let mean = inst.weights().iter().sum::<f64>() / inst.weights().len() as f64;
        // 499500 draws: sd of the mean is about 0.0014.
        assert!((mean - 1.0).abs() < 0.1, "mean {mean}");
        assert!((mean - 1.0).abs() < 3.0 / (inst.weights().len() as f64).sqrt() * 1.5);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(
            sample_instance(1, WeightDistribution::EXP1, 0),
            Err(InstanceError::TooSmall(1))
        ));
        assert!(matches!(
            sample_instance(MAX_DENSE_N + 1, WeightDistribution::EXP1, 0),
            Err(InstanceError::TooLarge { .. })
        ));
    }

    #[test]
    fn coupling_examples() {
        let base = WeightedInstance::from_weights(2, vec![std::f64::consts::LN_2], WeightDistribution::EXP1, 0)
            .unwrap();
        let uni = couple_instance(&base, WeightDistribution::Uniform).unwrap();
        assert!((uni.weight(0, 1) - 0.5).abs() < 1e-15);
        let same = couple_instance(&base, WeightDistribution::EXP1).unwrap();
        assert_eq!(same.weights(), base.weights());

        let small = WeightedInstance::from_weights(2, vec![0.01], WeightDistribution::EXP1, 0).unwrap();
        let z = couple_instance(&small, WeightDistribution::Uniform).unwrap().weight(0, 1);
        assert!((z - 0.01).abs() <= 0.01 * 0.01);

        let wrong = sample_instance(3, WeightDistribution::Uniform, 0).unwrap();
        assert!(couple_instance(&wrong, WeightDistribution::Uniform).is_err());
    }

    #[test]
    fn red_green_merge_is_pointwise_min() {
        let rg = red_green_instance(20, 0.3, 11).unwrap();
        for (i, j) in rg.merged.pairs() {
            let (g, r, m) = (rg.green.weight(i, j), rg.red.weight(i, j), rg.merged.weight(i, j));
            assert_eq!(m, g.min(r));
            assert!(m <= g && m <= r);
        }
        assert_ne!(rg.green.weights(), rg.red.weights());
        assert!(red_green_instance(5, 0.0, 0).is_err());
        assert!(red_green_instance(5, 1.0, 0).is_err());
    }

    #[test]
    fn dump_round_trip_and_errors() {
        let inst = sample_instance(7, WeightDistribution::exponential(2.5).unwrap(), 99).unwrap();
        let mut buf = Vec::new();
        inst.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 2 + 8 + 1 + 8 + 8 + 21 * 8);
        let back = WeightedInstance::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, inst);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(WeightedInstance::read_from(bad.as_slice()).is_err());
        assert!(WeightedInstance::read_from(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn distribution_parsing() {
        assert_eq!("exp".parse::<WeightDistribution>().unwrap(), WeightDistribution::EXP1);
        assert_eq!(
            "exp:0.5".parse::<WeightDistribution>().unwrap(),
            WeightDistribution::Exponential { rate: 0.5 }
        );
        assert_eq!("uniform".parse::<WeightDistribution>().unwrap(), WeightDistribution::Uniform);
        assert!("exp:-1".parse::<WeightDistribution>().is_err());
        assert!("normal".parse::<WeightDistribution>().is_err());
    }
}
