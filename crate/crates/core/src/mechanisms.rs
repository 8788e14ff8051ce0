//! Deterministic output maps applied to a query response: linear quantizers,
//! constants, the identity, tuples of mechanisms and post-processing. Also
//! query sensitivity and quantizer synthesis from a privacy budget.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::dataset::{DatasetSpec, QueryKind};
use crate::error::{Error, Result};
use crate::range::FiniteRange;
use crate::value::{format_rational, from_f64, int, Rational, Value};

/// Output symbols of a quantizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Symbols {
    /// Centre of each cell, so reports stay numeric and inside the range.
    Midpoints,
    Labels(Vec<Value>),
}

/// A `q`-level linear quantizer on `[lo, hi]`: equal cells
/// `[x_k, x_{k+1})`, the last one closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizerSpec {
    levels: u64,
    lo: Rational,
    hi: Rational,
    symbols: Symbols,
}

impl QuantizerSpec {
    pub fn new(levels: u64, lo: Rational, hi: Rational) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Argument("a quantizer needs at least one level".into()));
        }
        if lo >= hi {
            return Err(Error::Argument(format!(
                "quantizer range [{}, {}] must have x_min < x_max",
                format_rational(&lo),
                format_rational(&hi)
            )));
        }
        Ok(QuantizerSpec {
            levels,
            lo,
            hi,
            symbols: Symbols::Midpoints,
        })
    }

    /// Uses explicit, pairwise distinct labels instead of midpoints.
    pub fn with_labels(mut self, labels: Vec<Value>) -> Result<Self> {
        if labels.len() as u64 != self.levels {
            return Err(Error::Argument(format!(
                "{} labels for {} levels",
                labels.len(),
                self.levels
            )));
        }
        if FiniteRange::new(labels.iter().cloned()).len() != labels.len() {
            return Err(Error::Argument("quantizer labels must be distinct".into()));
        }
        self.symbols = Symbols::Labels(labels);
        Ok(self)
    }

    pub fn levels(&self) -> u64 {
        self.levels
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn cell_width(&self) -> Rational {
        (&self.hi - &self.lo) / int(self.levels as i64)
    }

    /// Zero-based index of the cell holding `x`.
    pub fn cell_index(&self, x: &Rational) -> Result<u64> {
        if x < &self.lo || x > &self.hi {
            return Err(Error::Range {
                x: format_rational(x),
                lo: format_rational(&self.lo),
                hi: format_rational(&self.hi),
            });
        }
        if x == &self.hi {
            return Ok(self.levels - 1);
        }
        let scaled = (x - &self.lo) * int(self.levels as i64) / (&self.hi - &self.lo);
        Ok(scaled.floor().to_integer().to_u64().expect("index below levels"))
    }

    /// Float path used by the simulations; `None` outside the range.
    pub fn cell_index_f64(&self, x: f64) -> Option<u64> {
        let (lo, hi) = (crate::value::to_f64(&self.lo), crate::value::to_f64(&self.hi));
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let k = ((x - lo) / (hi - lo) * self.levels as f64).floor() as u64;
        Some(k.min(self.levels - 1))
    }

    pub fn symbol(&self, index: u64) -> Value {
        match &self.symbols {
            Symbols::Labels(l) => l[index as usize].clone(),
            Symbols::Midpoints => {
                let w = self.cell_width();
                Value::Num(&self.lo + &w * int(index as i64) + w / int(2))
            }
        }
    }

    pub fn quantize(&self, x: &Rational) -> Result<Value> {
        Ok(self.symbol(self.cell_index(x)?))
    }

    /// Interior cell boundaries `x_2, .., x_q`.
    pub fn boundaries(&self) -> Vec<Rational> {
        let w = self.cell_width();
        (1..self.levels).map(|k| &self.lo + &w * int(k as i64)).collect()
    }

    pub fn alphabet(&self) -> FiniteRange {
        (0..self.levels).map(|k| self.symbol(k)).collect()
    }
}

/// A deterministic map from query responses to published outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MechanismSpec {
    Identity,
    Constant(Value),
    Quantizer(QuantizerSpec),
    /// Publishes the tuple of every child's output for the same response.
    Compose(Vec<MechanismSpec>),
    /// `g ∘ inner` for a finite map `g`.
    PostProcess {
        inner: Box<MechanismSpec>,
        map: BTreeMap<Value, Value>,
    },
}

impl MechanismSpec {
    pub fn quantizer(levels: u64, lo: Rational, hi: Rational) -> Result<Self> {
        Ok(MechanismSpec::Quantizer(QuantizerSpec::new(levels, lo, hi)?))
    }

    pub fn post_process(inner: MechanismSpec, map: BTreeMap<Value, Value>) -> Result<Self> {
        let m = MechanismSpec::PostProcess {
            inner: Box::new(inner),
            map,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks structural invariants: compositions are non-empty and
    /// post-processing maps are total on a known output alphabet.
    pub fn validate(&self) -> Result<()> {
        match self {
            MechanismSpec::Compose(children) => {
                if children.is_empty() {
                    return Err(Error::Argument("compose needs at least one mechanism".into()));
                }
                children.iter().try_for_each(MechanismSpec::validate)
            }
            MechanismSpec::PostProcess { inner, map } => {
                inner.validate()?;
                if let Some(alphabet) = inner.output_alphabet() {
                    if let Some(missing) = alphabet.iter().find(|s| !map.contains_key(s)) {
                        return Err(Error::Argument(format!(
                            "post-processing map is not total: no image for {missing}"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Every output the mechanism can produce, when that set is finite and
    /// independent of the query.
    pub fn output_alphabet(&self) -> Option<FiniteRange> {
        match self {
            MechanismSpec::Identity => None,
            MechanismSpec::Constant(c) => Some(FiniteRange::singleton(c.clone())),
            MechanismSpec::Quantizer(q) => Some(q.alphabet()),
            MechanismSpec::Compose(children) => {
                let parts: Vec<FiniteRange> = children.iter().map(|c| c.output_alphabet()).collect::<Option<_>>()?;
                let mut acc: Vec<Vec<Value>> = vec![vec![]];
                for p in &parts {
                    acc = acc
                        .into_iter()
                        .flat_map(|t| {
                            p.iter().map(move |v| {
                                let mut t = t.clone();
                                t.push(v.clone());
                                t
                            })
                        })
                        .collect();
                }
                Some(acc.into_iter().map(Value::Tuple).collect())
            }
            MechanismSpec::PostProcess { inner, map } => {
                let a = inner.output_alphabet()?;
                a.iter().map(|s| map.get(s).cloned()).collect()
            }
        }
    }

    /// `M(y)` for a query response `y`.
    pub fn map_value(&self, y: &Value) -> Result<Value> {
        match self {
            MechanismSpec::Identity => Ok(y.clone()),
            MechanismSpec::Constant(c) => Ok(c.clone()),
            MechanismSpec::Quantizer(q) => q.quantize(y.expect_num("quantizer input")?),
            MechanismSpec::Compose(children) => Ok(Value::Tuple(
                children.iter().map(|c| c.map_value(y)).collect::<Result<_>>()?,
            )),
            MechanismSpec::PostProcess { inner, map } => {
                let s = inner.map_value(y)?;
                map.get(&s)
                    .cloned()
                    .ok_or_else(|| Error::Precondition(format!("post-processing map has no image for {s}")))
            }
        }
    }

    /// Points where the output may change, for mechanisms that are constant
    /// on each `[t_k, t_{k+1})`. `None` when the identity is involved.
    pub fn breakpoints(&self) -> Option<Vec<Rational>> {
        match self {
            MechanismSpec::Identity => None,
            MechanismSpec::Constant(_) => Some(Vec::new()),
            MechanismSpec::Quantizer(q) => Some(q.boundaries()),
            MechanismSpec::Compose(children) => {
                let mut all = Vec::new();
                for c in children {
                    all.extend(c.breakpoints()?);
                }
                all.sort();
                all.dedup();
                Some(all)
            }
            MechanismSpec::PostProcess { inner, .. } => inner.breakpoints(),
        }
    }
}

impl fmt::Display for QuantizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "quantizer:{}:{}..{}",
            self.levels,
            format_rational(&self.lo),
            format_rational(&self.hi)
        )?;
        if let Symbols::Labels(labels) = &self.symbols {
            f.write_str(":")?;
            for (k, l) in labels.iter().enumerate() {
                if k > 0 {
                    f.write_str("|")?;
                }
                write!(f, "{l}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MechanismSpec::Identity => f.write_str("identity"),
            MechanismSpec::Constant(c) => write!(f, "constant:{c}"),
            MechanismSpec::Quantizer(q) => write!(f, "{q}"),
            MechanismSpec::Compose(children) => {
                f.write_str("compose(")?;
                for (k, c) in children.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
            MechanismSpec::PostProcess { inner, map } => {
                write!(f, "post({inner},")?;
                for (k, (a, b)) in map.iter().enumerate() {
                    if k > 0 {
                        f.write_str("|")?;
                    }
                    write!(f, "{a}->{b}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Publishes `M(f(x))` for a data tuple `x` in the domain box.
pub fn apply(mech: &MechanismSpec, dataset: &DatasetSpec, x: &[Value]) -> Result<Value> {
    mech.map_value(&dataset.evaluate(x)?)
}

/// How a sensitivity value was obtained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SensitivityMethod {
    /// `max_i |w_i| · width_i` for an affine query.
    ExactAffine,
    /// Enumeration over finite domains.
    ExactFinite,
    /// Enumeration over a grid of the continuous domains; a lower bound.
    Grid(Rational),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensitivityResult {
    pub value: Rational,
    pub method: SensitivityMethod,
}

impl SensitivityResult {
    pub fn exact(value: Rational) -> Self {
        SensitivityResult {
            value,
            method: SensitivityMethod::ExactAffine,
        }
    }

    /// Grid search can only under-estimate a supremum.
    pub fn is_lower_bound(&self) -> bool {
        matches!(self.method, SensitivityMethod::Grid(_))
    }

    pub fn as_f64(&self) -> f64 {
        crate::value::to_f64(&self.value)
    }
}

/// Largest change of the query when one individual's datum varies and all
/// others stay fixed.
pub fn sensitivity(dataset: &DatasetSpec, grid_step: Option<&Rational>) -> Result<SensitivityResult> {
    if let Some((weights, _)) = dataset.query().affine_form(dataset.n()) {
        let mut best = Rational::zero();
        for (k, (w, d)) in weights.iter().zip(dataset.domains()).enumerate() {
            let (lo, hi) = d.numeric_bounds().ok_or_else(|| {
                Error::Argument(format!("individual {} has a non-numeric or unbounded domain", k + 1))
            })?;
            let s = w.abs() * (hi - lo);
            if s > best {
                best = s;
            }
        }
        return Ok(SensitivityResult::exact(best));
    }
    let (target, method) = if dataset.all_finite() {
        (dataset.clone(), SensitivityMethod::ExactFinite)
    } else {
        let step = grid_step.ok_or_else(|| {
            Error::Precondition("continuous domains with a non-affine query need a grid step".into())
        })?;
        (dataset.discretize(step)?, SensitivityMethod::Grid(step.clone()))
    };
    let mut best = Rational::zero();
    for i in 0..target.n() {
        let values: Vec<&Value> = target.domains()[i].as_finite().expect("finite").iter().collect();
        for others in target.others(i)? {
            let outs = values
                .iter()
                .map(|v| {
                    target
                        .evaluate_unchecked(&target.assemble(i, v, &others))
                        .and_then(|y| y.expect_num("query output").cloned())
                })
                .collect::<Result<Vec<_>>>()?;
            if let (Some(lo), Some(hi)) = (outs.iter().min(), outs.iter().max()) {
                let s = hi - lo;
                if s > best {
                    best = s;
                }
            }
        }
    }
    Ok(SensitivityResult { value: best, method })
}

/// Which level-count rule the synthesizer applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LevelRule {
    /// Largest `q` whose worst-case cell count provably stays within
    /// `B = floor(2^ε)`. A closed image of length `S` meets at most
    /// `ceil(qS/W) + 1` cells (it can straddle a boundary even when shorter
    /// than a cell) and never more than `q`, so
    /// `q = max(floor((B - 1) W / S), B)`.
    #[default]
    Guarded,
    /// `q = floor(2^ε W / S)`. An image of length `S` can straddle one more
    /// boundary than this counts, so audits may exceed `ε` by one output.
    Stated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisOptions {
    pub rule: LevelRule,
    /// Level count used when no individual can move the query.
    pub max_levels: u64,
    /// Divisor applied to `q` when sensitivity is only a lower bound.
    pub safety_factor: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            rule: LevelRule::Guarded,
            max_levels: 1 << 20,
            safety_factor: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SynthesisNotice {
    /// `S(f) = 0`: no individual can change the query, so the budget
    /// places no limit and `q` was set to the configured maximum.
    QueryInsensitive,
    /// Sensitivity came from a grid; `q` was divided by the safety factor.
    Derated { factor: u64 },
    /// The rule asked for more levels than the configured maximum.
    Capped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelChoice {
    pub levels: u64,
    pub notice: Option<SynthesisNotice>,
}

fn floor_pow2(epsilon: f64) -> Result<BigInt> {
    Ok(from_f64(epsilon.exp2())?.floor().to_integer())
}

/// Level count for a query with range `[y_min, y_max]` and the given
/// sensitivity.
pub fn synthesize_levels(
    epsilon: f64,
    y_min: &Rational,
    y_max: &Rational,
    sens: &SensitivityResult,
    opts: &SynthesisOptions,
) -> Result<LevelChoice> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Argument(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if y_min >= y_max {
        return Err(Error::Argument("output bounds need y_min < y_max".into()));
    }
    if sens.value.is_negative() {
        return Err(Error::Argument("sensitivity must be non-negative".into()));
    }
    if opts.max_levels == 0 || opts.safety_factor == 0 {
        return Err(Error::Argument("max_levels and safety_factor must be positive".into()));
    }
    if sens.value.is_zero() {
        return Ok(LevelChoice {
            levels: opts.max_levels,
            notice: Some(SynthesisNotice::QueryInsensitive),
        });
    }
    let width = y_max - y_min;
    let ratio = width / &sens.value;
    let raw: BigInt = match opts.rule {
        LevelRule::Stated => (from_f64(epsilon.exp2())? * ratio).floor().to_integer(),
        LevelRule::Guarded => {
            let budget = floor_pow2(epsilon)?;
            let spread = Rational::from_integer(budget.clone() - BigInt::from(1)) * ratio;
            spread.floor().to_integer().max(budget)
        }
    };
    let mut notice = None;
    let mut levels = match raw.to_u64() {
        Some(q) if q <= opts.max_levels => q,
        _ => {
            notice = Some(SynthesisNotice::Capped);
            opts.max_levels
        }
    };
    if sens.is_lower_bound() {
        levels /= opts.safety_factor;
        notice = Some(SynthesisNotice::Derated {
            factor: opts.safety_factor,
        });
    }
    Ok(LevelChoice {
        levels: levels.max(1),
        notice,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    pub quantizer: QuantizerSpec,
    pub sensitivity: SensitivityResult,
    pub notice: Option<SynthesisNotice>,
}

impl Synthesis {
    pub fn mechanism(&self) -> MechanismSpec {
        MechanismSpec::Quantizer(self.quantizer.clone())
    }
}

/// Builds a quantizer over the query's output bounds that meets `epsilon`.
/// Table queries are rejected: the level bound relies on each individual's
/// image being an interval, which only the affine kinds guarantee here.
pub fn synthesize_quantizer(dataset: &DatasetSpec, epsilon: f64, opts: &SynthesisOptions) -> Result<Synthesis> {
    if matches!(dataset.query().kind(), QueryKind::Table(_)) {
        return Err(Error::Precondition(
            "table queries can be audited but not used for quantizer synthesis".into(),
        ));
    }
    let sens = sensitivity(dataset, None)?;
    let (lo, hi) = dataset.query().output_bounds();
    if lo == hi {
        return Err(Error::Precondition("query output bounds are degenerate".into()));
    }
    let choice = synthesize_levels(epsilon, lo, hi, &sens, opts)?;
    Ok(Synthesis {
        quantizer: QuantizerSpec::new(choice.levels, lo.clone(), hi.clone())?,
        sensitivity: sens,
        notice: choice.notice,
    })
}

/// Budget of publishing two mechanisms' outputs together.
pub fn compose_budget(eps1: f64, eps2: f64) -> Result<f64> {
    if eps1 < 0.0 || eps2 < 0.0 || eps1.is_nan() || eps2.is_nan() {
        return Err(Error::Argument("budgets must be non-negative".into()));
    }
    Ok(eps1 + eps2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::range::{Domain, IntervalUnion};
    use crate::value::ratio;

    fn unit_quantizer(q: u64) -> QuantizerSpec {
        QuantizerSpec::new(q, int(0), int(1)).unwrap()
    }

    fn unit_box(n: usize) -> Vec<Domain> {
        vec![Domain::Continuous(IntervalUnion::single(int(0), int(1)).unwrap()); n]
    }

    #[test]
    fn quantize_examples() {
        let q = unit_quantizer(4);
        assert_eq!(q.cell_index(&ratio(3, 10)).unwrap(), 1);
        assert_eq!(q.cell_index(&int(1)).unwrap(), 3);
        assert_eq!(q.cell_index(&ratio(1, 4)).unwrap(), 1);
        assert_eq!(q.quantize(&ratio(3, 10)).unwrap(), Value::num(ratio(3, 8)));
        let err = q.quantize(&ratio(11, 10)).unwrap_err();
        assert_eq!(
            err,
            Error::Range {
                x: "1.1".into(),
                lo: "0".into(),
                hi: "1".into()
            }
        );
        assert_eq!(q.cell_index_f64(0.25), Some(1));
        assert_eq!(q.cell_index_f64(1.0), Some(3));
        assert_eq!(q.cell_index_f64(1.5), None);
    }

    #[test]
    fn labels_must_be_distinct() {
        let labels = vec![Value::sym("a"), Value::sym("a")];
        assert!(unit_quantizer(2).with_labels(labels).is_err());
        let q = unit_quantizer(2).with_labels(vec![Value::sym("lo"), Value::sym("hi")]).unwrap();
        assert_eq!(q.quantize(&int(1)).unwrap(), Value::sym("hi"));
    }

    #[test]
    fn sensitivity_examples() {
        let mean4 = DatasetSpec::new(unit_box(4), QueryKind::Mean, None).unwrap();
        let s = sensitivity(&mean4, None).unwrap();
        assert_eq!(s, SensitivityResult::exact(ratio(1, 4)));

        let wide = vec![Domain::Continuous(IntervalUnion::single(int(0), int(2)).unwrap()); 2];
        let sum2 = DatasetSpec::new(wide, QueryKind::Sum, None).unwrap();
        assert_eq!(sensitivity(&sum2, None).unwrap().value, int(2));

        let bits = vec![Domain::Finite(FiniteRange::integers(0, 1)); 2];
        let table: BTreeMap<Vec<Value>, Value> = crate::range::product_range(&bits)
            .unwrap()
            .map(|x| (x, Value::int(3)))
            .collect();
        let flat = DatasetSpec::new(bits, QueryKind::Table(table), None).unwrap();
        let s = sensitivity(&flat, None).unwrap();
        assert_eq!(s.value, int(0));
        assert_eq!(s.method, SensitivityMethod::ExactFinite);
    }

    #[test]
    fn stated_rule_examples() {
        let opts = SynthesisOptions {
            rule: LevelRule::Stated,
            ..Default::default()
        };
        let q = |eps: f64, s: Rational| {
            synthesize_levels(eps, &int(0), &int(1), &SensitivityResult::exact(s), &opts)
                .unwrap()
                .levels
        };
        assert_eq!(q(2.0, ratio(1, 4)), 16);
        assert_eq!(q(1.0, ratio(1, 2)), 4);
        assert_eq!(q(0.5, int(1)), 1);
    }

    #[test]
    fn guarded_rule_leaves_room_for_straddling() {
        let opts = SynthesisOptions::default();
        let q = |eps: f64, s: Rational| {
            synthesize_levels(eps, &int(0), &int(1), &SensitivityResult::exact(s), &opts)
                .unwrap()
                .levels
        };
        assert_eq!(q(2.0, ratio(1, 4)), 12);
        assert_eq!(q(1.0, ratio(1, 2)), 2);
        assert_eq!(q(0.5, int(1)), 1);
        // Sensitivity at least the whole range: only the trivial bound helps.
        assert_eq!(q(3.0, int(1)), 8);
    }

    #[test]
    fn insensitive_query_is_capped_and_flagged() {
        let opts = SynthesisOptions::default();
        let c = synthesize_levels(1.0, &int(0), &int(1), &SensitivityResult::exact(int(0)), &opts).unwrap();
        assert_eq!(c.levels, 1 << 20);
        assert_eq!(c.notice, Some(SynthesisNotice::QueryInsensitive));
    }

    #[test]
    fn grid_sensitivity_derates() {
        let s = SensitivityResult {
            value: ratio(1, 4),
            method: SensitivityMethod::Grid(ratio(1, 10)),
        };
        let c = synthesize_levels(2.0, &int(0), &int(1), &s, &SynthesisOptions::default()).unwrap();
        assert_eq!(c.levels, 6);
        assert_eq!(c.notice, Some(SynthesisNotice::Derated { factor: 2 }));
    }

    #[test]
    fn synthesis_rejects_tables_and_bad_budgets() {
        let bits = vec![Domain::Finite(FiniteRange::integers(0, 1))];
        let table: BTreeMap<Vec<Value>, Value> =
            [(vec![Value::int(0)], Value::int(0)), (vec![Value::int(1)], Value::int(1))].into();
        let ds = DatasetSpec::new(bits, QueryKind::Table(table), None).unwrap();
        assert!(matches!(
            synthesize_quantizer(&ds, 1.0, &SynthesisOptions::default()),
            Err(Error::Precondition(_))
        ));
        let mean = DatasetSpec::new(unit_box(2), QueryKind::Mean, None).unwrap();
        assert!(synthesize_quantizer(&mean, 0.0, &SynthesisOptions::default()).is_err());
        let s = synthesize_quantizer(&mean, 1.0, &SynthesisOptions::default()).unwrap();
        assert_eq!(s.quantizer.levels(), 2);
    }

    #[test]
    fn compose_budget_adds() {
        assert_eq!(compose_budget(1.5, 2.0).unwrap(), 3.5);
        assert_eq!(compose_budget(0.0, 0.7).unwrap(), 0.7);
        assert_eq!(compose_budget(1.0, 1.0).unwrap(), 2.0);
        assert!(compose_budget(-1.0, 1.0).is_err());
    }

    #[test]
    fn apply_examples() {
        let bits = vec![Domain::Finite(FiniteRange::integers(0, 1)); 2];
        let mean = DatasetSpec::new(bits, QueryKind::Mean, None).unwrap();
        let x = [Value::int(0), Value::int(1)];
        assert_eq!(apply(&MechanismSpec::Identity, &mean, &x).unwrap(), Value::num(ratio(1, 2)));
        let q2 = MechanismSpec::quantizer(2, int(0), int(1)).unwrap();
        assert_eq!(apply(&q2, &mean, &x).unwrap(), Value::num(ratio(3, 4)));
        let c = MechanismSpec::Constant(Value::sym("c"));
        assert_eq!(apply(&c, &mean, &x).unwrap(), Value::sym("c"));
        assert!(apply(&c, &mean, &[Value::int(2), Value::int(0)]).is_err());

        let both = MechanismSpec::Compose(vec![q2.clone(), MechanismSpec::Identity]);
        assert_eq!(
            apply(&both, &mean, &x).unwrap(),
            Value::Tuple(vec![Value::num(ratio(3, 4)), Value::num(ratio(1, 2))])
        );
        let g: BTreeMap<Value, Value> = [
            (Value::num(ratio(1, 4)), Value::sym("low")),
            (Value::num(ratio(3, 4)), Value::sym("high")),
        ]
        .into();
        let post = MechanismSpec::post_process(q2, g).unwrap();
        assert_eq!(apply(&post, &mean, &x).unwrap(), Value::sym("high"));
    }

    #[test]
    fn post_processing_must_be_total() {
        let q2 = MechanismSpec::quantizer(2, int(0), int(1)).unwrap();
        let g: BTreeMap<Value, Value> = [(Value::num(ratio(1, 4)), Value::sym("low"))].into();
        assert!(MechanismSpec::post_process(q2, g).is_err());
        assert!(MechanismSpec::Compose(vec![]).validate().is_err());
    }
}
