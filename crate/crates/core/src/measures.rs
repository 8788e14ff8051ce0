//! Non-stochastic information measures over finite joint ranges, the
//! differential 0-entropy of interval unions, and maximal leakage under a
//! prior.
//!
//! Discrete measures are in bits; [`differential_entropy0`] is in nats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::range::{FiniteRange, IntervalUnion, JointRelation};
use crate::unionfind::UnionFind;
use crate::value::{format_rational, to_f64, Rational, Value};

/// Logarithm of a size that may be zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Entropy {
    Finite(f64),
    /// The range is empty (or has zero measure).
    NegInfinity,
}

impl Entropy {
    pub fn value(self) -> f64 {
        match self {
            Entropy::Finite(v) => v,
            Entropy::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Entropy::Finite(_))
    }

    fn log2_count(n: usize) -> Entropy {
        if n == 0 {
            Entropy::NegInfinity
        } else {
            Entropy::Finite((n as f64).log2())
        }
    }
}

impl fmt::Display for Entropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entropy::Finite(v) => write!(f, "{v:?}"),
            Entropy::NegInfinity => f.write_str("-inf"),
        }
    }
}

/// Hartley entropy `log2 |r|` in bits.
pub fn hartley_entropy(r: &FiniteRange) -> Entropy {
    Entropy::log2_count(r.len())
}

/// Rényi differential 0-entropy `ln μ(iv)` in nats.
pub fn differential_entropy0(iv: &IntervalUnion) -> Entropy {
    let m = iv.measure();
    if m <= Rational::from_integer(0.into()) {
        Entropy::NegInfinity
    } else {
        Entropy::Finite(to_f64(&m).ln())
    }
}

/// Which variable is conditioned on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `L0(X;Y)` and `I0(X;Y)`: ranges of `X` given each `y`.
    XY,
    /// `L0(Y;X)` and `I0(Y;X)`: ranges of `Y` given each `x`.
    YX,
}

fn conditional_sizes(rel: &JointRelation, dir: Direction) -> (usize, Vec<usize>) {
    match dir {
        Direction::XY => (
            rel.x_range().len(),
            rel.conditionals_of_x().values().map(FiniteRange::len).collect(),
        ),
        Direction::YX => (
            rel.y_range().len(),
            rel.conditionals_of_y().values().map(FiniteRange::len).collect(),
        ),
    }
}

/// Non-stochastic information leakage: the worst-case
/// `log2(|marginal| / |conditional|)`. Zero on an empty relation.
pub fn leakage_l0(rel: &JointRelation, dir: Direction) -> f64 {
    let (marginal, conds) = conditional_sizes(rel, dir);
    match conds.iter().min() {
        Some(&smallest) => (marginal as f64 / smallest as f64).log2(),
        None => 0.0,
    }
}

/// Non-stochastic information: the best-case ratio, `H0(X) - H0(X|Y)`.
pub fn information_i0(rel: &JointRelation, dir: Direction) -> f64 {
    let (marginal, conds) = conditional_sizes(rel, dir);
    match conds.iter().max() {
        Some(&largest) => (marginal as f64 / largest as f64).log2(),
        None => 0.0,
    }
}

/// `min(L0(X;Y), L0(Y;X))`.
pub fn symmetrized_leakage(rel: &JointRelation) -> f64 {
    leakage_l0(rel, Direction::XY).min(leakage_l0(rel, Direction::YX))
}

/// The unique partition of `⟦X⟧` into overlap-connected, mutually
/// overlap-isolated blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapPartition {
    blocks: Vec<FiniteRange>,
}

impl OverlapPartition {
    pub fn blocks(&self) -> &[FiniteRange] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Blocks as a set of sets, independent of block order.
    pub fn canonical(&self) -> BTreeSet<FiniteRange> {
        self.blocks.iter().cloned().collect()
    }

    /// Checks the defining properties against `rel`: the blocks cover
    /// `⟦X⟧` disjointly, every conditional range sits inside one block, and
    /// each block is chained together by conditional ranges.
    pub fn verify(&self, rel: &JointRelation) -> bool {
        let mut seen = FiniteRange::empty();
        for b in &self.blocks {
            if b.is_empty() || !seen.is_disjoint(b) {
                return false;
            }
            seen = seen.union(b);
        }
        if &seen != rel.x_range() {
            return false;
        }
        let conds = rel.conditionals_of_x();
        for c in conds.values() {
            if !self.blocks.iter().any(|b| c.is_subset(b)) {
                return false;
            }
        }
        self.blocks.iter().all(|b| {
            let mut reached = FiniteRange::singleton(b.iter().next().expect("non-empty").clone());
            loop {
                let grown = conds
                    .values()
                    .filter(|c| !c.is_disjoint(&reached))
                    .fold(reached.clone(), |acc, c| acc.union(c));
                if grown == reached {
                    break;
                }
                reached = grown;
            }
            &reached == b
        })
    }
}

/// Maximin information together with its overlap partition.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximinInfo {
    pub bits: f64,
    pub partition: OverlapPartition,
}

fn overlap_components(marginal: &FiniteRange, conds: &BTreeMap<Value, FiniteRange>) -> OverlapPartition {
    let elements: Vec<&Value> = marginal.iter().collect();
    let index: BTreeMap<&Value, usize> = elements.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let mut uf = UnionFind::new(elements.len());
    for c in conds.values() {
        let mut it = c.iter().map(|v| index[v]);
        if let Some(first) = it.next() {
            for other in it {
                uf.union(first, other);
            }
        }
    }
    let blocks = uf
        .groups()
        .into_iter()
        .map(|g| g.into_iter().map(|k| elements[k].clone()).collect())
        .collect();
    OverlapPartition { blocks }
}

/// `I*(X;Y) = log2 |⟦X|Y⟧*|`. Both overlap partitions are built and their
/// sizes compared; a mismatch is reported as an invariant violation.
pub fn maximin_info(rel: &JointRelation) -> Result<MaximinInfo> {
    let partition = overlap_components(rel.x_range(), &rel.conditionals_of_x());
    let mirror = overlap_components(rel.y_range(), &rel.conditionals_of_y());
    if partition.len() != mirror.len() {
        return Err(Error::Invariant(format!(
            "overlap partitions differ in size: {} blocks of X, {} blocks of Y",
            partition.len(),
            mirror.len()
        )));
    }
    let bits = if partition.is_empty() {
        0.0
    } else {
        (partition.len() as f64).log2()
    };
    Ok(MaximinInfo { bits, partition })
}

/// A probability law used by the stochastic-adversary checks.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorSpec {
    /// Point masses on a finite support, listed in the support's order.
    Discrete { support: FiniteRange, masses: Vec<f64> },
    /// Piecewise-constant density on equal-width bins of `[lo, hi]`.
    Density {
        lo: Rational,
        hi: Rational,
        densities: Vec<f64>,
    },
}

const MASS_TOLERANCE: f64 = 1e-9;

impl PriorSpec {
    pub fn discrete(masses: impl IntoIterator<Item = (Value, f64)>) -> Result<Self> {
        let mut table: BTreeMap<Value, f64> = BTreeMap::new();
        for (v, p) in masses {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Argument(format!("probability mass {p} for {v} is invalid")));
            }
            if table.insert(v.clone(), p).is_some() {
                return Err(Error::Argument(format!("duplicate support point {v}")));
            }
        }
        let total: f64 = table.values().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Argument(format!("probability masses sum to {total}, not 1")));
        }
        Ok(PriorSpec::Discrete {
            support: table.keys().cloned().collect(),
            masses: table.into_values().collect(),
        })
    }

    pub fn uniform_discrete(support: &FiniteRange) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Argument("prior support is empty".into()));
        }
        let p = 1.0 / support.len() as f64;
        PriorSpec::discrete(support.iter().map(|v| (v.clone(), p)))
    }

    pub fn density(lo: Rational, hi: Rational, densities: Vec<f64>) -> Result<Self> {
        if lo >= hi {
            return Err(Error::Argument("density support must have lo < hi".into()));
        }
        if densities.is_empty() || densities.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Argument("density table must be non-empty and non-negative".into()));
        }
        let width = to_f64(&(&hi - &lo)) / densities.len() as f64;
        let total: f64 = densities.iter().map(|d| d * width).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Argument(format!("density integrates to {total}, not 1")));
        }
        Ok(PriorSpec::Density { lo, hi, densities })
    }

    pub fn uniform_density(lo: Rational, hi: Rational) -> Result<Self> {
        let d = 1.0 / to_f64(&(&hi - &lo));
        PriorSpec::density(lo, hi, vec![d])
    }

    /// Infimum of the density (smallest mass for a discrete prior).
    pub fn rho(&self) -> f64 {
        let v = match self {
            PriorSpec::Discrete { masses, .. } => masses,
            PriorSpec::Density { densities, .. } => densities,
        };
        v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mass(&self, v: &Value) -> f64 {
        match self {
            PriorSpec::Discrete { support, masses } => support
                .iter()
                .position(|s| s == v)
                .map(|k| masses[k])
                .unwrap_or(0.0),
            PriorSpec::Density { .. } => 0.0,
        }
    }

    /// Draws from a density prior: a bin by cumulative mass, then uniformly
    /// inside it.
    pub fn sample_density<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let PriorSpec::Density { lo, hi, densities } = self else {
            return Err(Error::Precondition("sampling needs a density prior".into()));
        };
        let (lo, hi) = (to_f64(lo), to_f64(hi));
        let width = (hi - lo) / densities.len() as f64;
        let u: f64 = rng.random::<f64>();
        let mut acc = 0.0;
        let mut bin = densities.len() - 1;
        for (k, d) in densities.iter().enumerate() {
            acc += d * width;
            if u < acc {
                bin = k;
                break;
            }
        }
        Ok(lo + width * (bin as f64 + rng.random::<f64>()))
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Discrete { support, masses } => {
                for (k, (v, p)) in support.iter().zip(masses).enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                Ok(())
            }
            PriorSpec::Density { lo, hi, densities } => {
                write!(f, "density[{}, {}]:{:?}", format_rational(lo), format_rational(hi), densities)
            }
        }
    }
}

/// Rows of `P(y|x)`.
pub type TransitionRows = BTreeMap<Value, BTreeMap<Value, f64>>;

/// `log2 Σ_y max_{x: P(x)>0} P(y|x)` for a finite channel.
pub fn maximal_leakage_stochastic(rows: &TransitionRows, prior: &PriorSpec) -> Result<f64> {
    let PriorSpec::Discrete { support, .. } = prior else {
        return Err(Error::Argument("maximal leakage needs a discrete prior".into()));
    };
    let inputs: FiniteRange = rows.keys().cloned().collect();
    if &inputs != support {
        return Err(Error::Argument(format!(
            "prior support {support} does not equal the channel input range {inputs}"
        )));
    }
    let outputs: BTreeSet<&Value> = rows.values().flat_map(|r| r.keys()).collect();
    let mut total = 0.0;
    for y in outputs {
        let best = rows
            .iter()
            .filter(|(x, _)| prior.mass(x) > 0.0)
            .map(|(_, row)| row.get(y).copied().unwrap_or(0.0))
            .fold(0.0, f64::max);
        total += best;
    }
    Ok(total.log2())
}

/// Maximal leakage of a deterministic channel `x ↦ y`.
pub fn maximal_leakage(channel: &BTreeMap<Value, Value>, prior: &PriorSpec) -> Result<f64> {
    let rows: TransitionRows = channel
        .iter()
        .map(|(x, y)| (x.clone(), BTreeMap::from([(y.clone(), 1.0)])))
        .collect();
    maximal_leakage_stochastic(&rows, prior)
}
