//! Ranges of uncertain variables: finite sets, unions of closed intervals on
//! the real line, and finite joint ranges with their conditional ranges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::value::{format_rational, Rational, Value};

/// A finite range, kept sorted and free of duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiniteRange(BTreeSet<Value>);

impl FiniteRange {
    pub fn new(values: impl IntoIterator<Item = Value>) -> Self {
        FiniteRange(values.into_iter().collect())
    }

    pub fn empty() -> Self {
        FiniteRange(BTreeSet::new())
    }

    pub fn singleton(v: Value) -> Self {
        FiniteRange::new([v])
    }

    /// `{lo, lo+1, ..., hi}` as numbers.
    pub fn integers(lo: i64, hi: i64) -> Self {
        FiniteRange::new((lo..=hi).map(Value::int))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.0.contains(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Value> + '_ {
        self.0.iter()
    }

    pub fn as_set(&self) -> &BTreeSet<Value> {
        &self.0
    }

    pub fn insert(&mut self, v: Value) -> bool {
        self.0.insert(v)
    }

    pub fn union(&self, other: &FiniteRange) -> FiniteRange {
        FiniteRange(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &FiniteRange) -> FiniteRange {
        FiniteRange(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn symmetric_difference(&self, other: &FiniteRange) -> FiniteRange {
        FiniteRange(self.0.symmetric_difference(&other.0).cloned().collect())
    }

    pub fn is_disjoint(&self, other: &FiniteRange) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn is_subset(&self, other: &FiniteRange) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Smallest and largest element, when every element is numeric.
    pub fn numeric_bounds(&self) -> Option<(Rational, Rational)> {
        let mut it = self.0.iter().map(|v| v.as_rational().cloned());
        let first = it.next()??;
        let (mut lo, mut hi) = (first.clone(), first);
        for r in it {
            let r = r?;
            if r < lo {
                lo = r.clone();
            }
            if r > hi {
                hi = r;
            }
        }
        Some((lo, hi))
    }
}

impl FromIterator<Value> for FiniteRange {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        FiniteRange::new(iter)
    }
}

impl IntoIterator for FiniteRange {
    type Item = Value;
    type IntoIter = std::collections::btree_set::IntoIter<Value>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a> IntoIterator for &'a FiniteRange {
    type Item = &'a Value;
    type IntoIter = std::collections::btree_set::Iter<'a, Value>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for FiniteRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

/// Closed interval `[lo, hi]` with `lo <= hi`. A point is a degenerate interval.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::Argument(format!(
                "interval [{}, {}] has lo > hi",
                format_rational(&lo),
                format_rational(&hi)
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(x: Rational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

/// A finite union of disjoint closed intervals in canonical (sorted, merged)
/// form. Touching intervals are merged, so two unions covering the same set
/// compare equal.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntervalUnion {
    intervals: Vec<Interval>,
}

impl IntervalUnion {
    pub fn new(intervals: impl IntoIterator<Item = Interval>) -> Self {
        let mut v: Vec<Interval> = intervals.into_iter().collect();
        v.sort();
        let mut merged: Vec<Interval> = Vec::with_capacity(v.len());
        for iv in v {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        IntervalUnion { intervals: merged }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Rational, Rational)>) -> Result<Self> {
        let ivs = pairs
            .into_iter()
            .map(|(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(IntervalUnion::new(ivs))
    }

    pub fn single(lo: Rational, hi: Rational) -> Result<Self> {
        Ok(IntervalUnion::new([Interval::new(lo, hi)?]))
    }

    pub fn empty() -> Self {
        IntervalUnion::default()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Exact Lebesgue measure.
    pub fn measure(&self) -> Rational {
        self.intervals
            .iter()
            .fold(Rational::zero(), |acc, iv| acc + iv.length())
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.intervals.iter().any(|iv| iv.contains(x))
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        IntervalUnion::new(self.intervals.iter().chain(&other.intervals).cloned())
    }

    pub fn hull(&self) -> Option<(Rational, Rational)> {
        Some((
            self.intervals.first()?.lo.clone(),
            self.intervals.last()?.hi.clone(),
        ))
    }
}

impl fmt::Display for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("(empty)");
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(" u ")?;
            }
            write!(f, "[{}, {}]", format_rational(&iv.lo), format_rational(&iv.hi))?;
        }
        Ok(())
    }
}

/// Grid points `lo, lo+step, ...` inside every interval, plus every endpoint.
pub fn grid_sample(iv: &IntervalUnion, step: &Rational) -> Result<FiniteRange> {
    if !step.is_positive() {
        return Err(Error::Argument(format!(
            "grid step must be positive, got {}",
            format_rational(step)
        )));
    }
    let mut out = FiniteRange::empty();
    for piece in iv.intervals() {
        let mut x = piece.lo.clone();
        while x <= piece.hi {
            out.insert(Value::Num(x.clone()));
            x += step;
        }
        out.insert(Value::Num(piece.hi.clone()));
    }
    Ok(out)
}

/// The declared range of one individual's datum.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Finite(FiniteRange),
    Continuous(IntervalUnion),
}

impl Domain {
    pub fn is_finite(&self) -> bool {
        matches!(self, Domain::Finite(_))
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Domain::Finite(r) => r.is_empty(),
            Domain::Continuous(iv) => iv.is_empty(),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match self {
            Domain::Finite(r) => r.contains(v),
            Domain::Continuous(iv) => v.as_rational().is_some_and(|x| iv.contains(x)),
        }
    }

    /// Infimum and supremum of a numeric domain.
    pub fn numeric_bounds(&self) -> Option<(Rational, Rational)> {
        match self {
            Domain::Finite(r) => r.numeric_bounds(),
            Domain::Continuous(iv) => iv.hull(),
        }
    }

    /// Connected pieces as closed intervals; finite domains yield one point
    /// per element. `None` when some element is not numeric.
    pub fn pieces(&self) -> Option<Vec<Interval>> {
        match self {
            Domain::Finite(r) => r
                .iter()
                .map(|v| v.as_rational().map(|x| Interval::point(x.clone())))
                .collect(),
            Domain::Continuous(iv) => Some(iv.intervals().to_vec()),
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteRange> {
        match self {
            Domain::Finite(r) => Some(r),
            Domain::Continuous(_) => None,
        }
    }

    /// Replaces a continuous domain by its grid sample.
    pub fn discretize(&self, step: &Rational) -> Result<Domain> {
        match self {
            Domain::Finite(_) => Ok(self.clone()),
            Domain::Continuous(iv) => Ok(Domain::Finite(grid_sample(iv, step)?)),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Finite(r) => write!(f, "{r}"),
            Domain::Continuous(iv) => write!(f, "{iv}"),
        }
    }
}

/// Lexicographic enumeration of a box of finite domains.
#[derive(Debug, Clone)]
pub struct ProductRange {
    axes: Vec<Vec<Value>>,
    cursor: Option<Vec<usize>>,
}

impl ProductRange {
    /// Number of tuples in the box.
    pub fn cardinality(&self) -> u128 {
        self.axes.iter().map(|a| a.len() as u128).product()
    }
}

impl Iterator for ProductRange {
    type Item = Vec<Value>;

    fn next(&mut self) -> Option<Vec<Value>> {
        let cursor = self.cursor.as_mut()?;
        let item: Vec<Value> = cursor
            .iter()
            .zip(&self.axes)
            .map(|(&k, axis)| axis[k].clone())
            .collect();
        let mut pos = cursor.len();
        loop {
            if pos == 0 {
                self.cursor = None;
                break;
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < self.axes[pos].len() {
                break;
            }
            cursor[pos] = 0;
        }
        Some(item)
    }
}

/// Enumerates every tuple of the joint box in lexicographic order.
pub fn product_range(domains: &[Domain]) -> Result<ProductRange> {
    let mut axes = Vec::with_capacity(domains.len());
    for (k, d) in domains.iter().enumerate() {
        match d {
            Domain::Finite(r) => axes.push(r.iter().cloned().collect::<Vec<_>>()),
            Domain::Continuous(_) => {
                return Err(Error::Precondition(format!(
                    "domain {} is continuous; discretize it with grid_sample first",
                    k + 1
                )))
            }
        }
    }
    let cursor = if axes.iter().any(|a| a.is_empty()) {
        None
    } else {
        Some(vec![0; axes.len()])
    };
    Ok(ProductRange { axes, cursor })
}

/// The joint range of two discrete uncertain variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointRelation {
    pairs: BTreeSet<(Value, Value)>,
    x_range: FiniteRange,
    y_range: FiniteRange,
}

impl JointRelation {
    /// Marginal ranges are the projections of `pairs`, so every conditional
    /// range is non-empty.
    pub fn new(pairs: impl IntoIterator<Item = (Value, Value)>) -> Self {
        let pairs: BTreeSet<(Value, Value)> = pairs.into_iter().collect();
        let x_range = pairs.iter().map(|(x, _)| x.clone()).collect();
        let y_range = pairs.iter().map(|(_, y)| y.clone()).collect();
        JointRelation {
            pairs,
            x_range,
            y_range,
        }
    }

    /// The graph of a function.
    pub fn from_map<'a>(map: impl IntoIterator<Item = (&'a Value, &'a Value)>) -> Self {
        JointRelation::new(map.into_iter().map(|(x, y)| (x.clone(), y.clone())))
    }

    pub fn pairs(&self) -> &BTreeSet<(Value, Value)> {
        &self.pairs
    }

    pub fn x_range(&self) -> &FiniteRange {
        &self.x_range
    }

    pub fn y_range(&self) -> &FiniteRange {
        &self.y_range
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Swaps the roles of the two variables.
    pub fn transpose(&self) -> JointRelation {
        JointRelation::new(self.pairs.iter().map(|(x, y)| (y.clone(), x.clone())))
    }

    /// `⟦X|y⟧`.
    pub fn conditional_range(&self, y: &Value) -> Result<FiniteRange> {
        if !self.y_range.contains(y) {
            return Err(Error::domain(y, "the relation's output range"));
        }
        Ok(self
            .pairs
            .iter()
            .filter(|(_, b)| b == y)
            .map(|(a, _)| a.clone())
            .collect())
    }

    /// `⟦Y|x⟧`.
    pub fn conditional_range_given_x(&self, x: &Value) -> Result<FiniteRange> {
        if !self.x_range.contains(x) {
            return Err(Error::domain(x, "the relation's input range"));
        }
        Ok(self
            .pairs
            .iter()
            .filter(|(a, _)| a == x)
            .map(|(_, b)| b.clone())
            .collect())
    }

    /// Every `⟦X|y⟧`, keyed by `y`.
    pub fn conditionals_of_x(&self) -> BTreeMap<Value, FiniteRange> {
        let mut out: BTreeMap<Value, FiniteRange> = BTreeMap::new();
        for (x, y) in &self.pairs {
            out.entry(y.clone()).or_default().insert(x.clone());
        }
        out
    }

    /// Every `⟦Y|x⟧`, keyed by `x`.
    pub fn conditionals_of_y(&self) -> BTreeMap<Value, FiniteRange> {
        let mut out: BTreeMap<Value, FiniteRange> = BTreeMap::new();
        for (x, y) in &self.pairs {
            out.entry(x.clone()).or_default().insert(y.clone());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{int, ratio};

    fn syms(s: &[&str]) -> FiniteRange {
        s.iter().map(|x| Value::sym(*x)).collect()
    }

    #[test]
    fn conditional_range_of_identity_and_constant() {
        let id = JointRelation::new(["a", "b", "c"].map(|s| (Value::sym(s), Value::sym(s))));
        assert_eq!(id.conditional_range(&Value::sym("b")).unwrap(), syms(&["b"]));

        let konst = JointRelation::new(["a", "b", "c"].map(|s| (Value::sym(s), Value::sym("k"))));
        assert_eq!(
            konst.conditional_range(&Value::sym("k")).unwrap(),
            syms(&["a", "b", "c"])
        );
    }

    #[test]
    fn conditional_range_filters_pairs() {
        let rel = JointRelation::new([
            (Value::int(1), Value::sym("a")),
            (Value::int(2), Value::sym("a")),
            (Value::int(3), Value::sym("b")),
        ]);
        let got = rel.conditional_range(&Value::sym("a")).unwrap();
        assert_eq!(got, FiniteRange::new([Value::int(1), Value::int(2)]));
        let err = rel.conditional_range(&Value::sym("z")).unwrap_err();
        assert!(err.to_string().contains('z'));
    }

    #[test]
    fn interval_union_normalizes() {
        let u = IntervalUnion::from_pairs([
            (ratio(1, 2), int(1)),
            (int(0), ratio(1, 2)),
            (int(3), int(4)),
            (ratio(7, 2), ratio(15, 4)),
        ])
        .unwrap();
        assert_eq!(u.intervals().len(), 2);
        assert_eq!(u.measure(), int(2));
        assert!(IntervalUnion::from_pairs([(int(1), int(0))]).is_err());
    }

    #[test]
    fn grid_sample_examples() {
        let unit = IntervalUnion::single(int(0), int(1)).unwrap();
        let g = grid_sample(&unit, &ratio(1, 2)).unwrap();
        assert_eq!(
            g,
            FiniteRange::new([Value::int(0), Value::num(ratio(1, 2)), Value::int(1)])
        );

        let two = IntervalUnion::from_pairs([(int(0), ratio(3, 10)), (ratio(7, 10), int(1))]).unwrap();
        let g = grid_sample(&two, &ratio(1, 4)).unwrap();
        let expected: FiniteRange = [ratio(0, 1), ratio(1, 4), ratio(3, 10), ratio(7, 10), ratio(19, 20), int(1)]
            .into_iter()
            .map(Value::Num)
            .collect();
        assert_eq!(g, expected);

        assert!(grid_sample(&IntervalUnion::empty(), &ratio(1, 4)).unwrap().is_empty());
        assert!(grid_sample(&unit, &int(0)).is_err());
        assert!(grid_sample(&unit, &int(-1)).is_err());
    }

    #[test]
    fn product_range_is_lexicographic() {
        let bit = Domain::Finite(FiniteRange::integers(0, 1));
        let tuples: Vec<_> = product_range(&[bit.clone(), bit.clone()]).unwrap().collect();
        assert_eq!(
            tuples,
            vec![
                vec![Value::int(0), Value::int(0)],
                vec![Value::int(0), Value::int(1)],
                vec![Value::int(1), Value::int(0)],
                vec![Value::int(1), Value::int(1)],
            ]
        );
        let single = Domain::Finite(syms(&["a"]));
        assert_eq!(product_range(&[single]).unwrap().count(), 1);
        let trit = Domain::Finite(FiniteRange::integers(0, 2));
        assert_eq!(product_range(&[bit, trit]).unwrap().count(), 6);

        let cont = Domain::Continuous(IntervalUnion::single(int(0), int(1)).unwrap());
        let err = product_range(&[cont]).unwrap_err();
        assert!(err.to_string().contains("grid_sample"));
    }
}
