//! Exact privacy audits of deterministic mechanisms and executable checks of
//! the guarantees that follow from a noiseless-privacy budget.
//!
//! An audit fixes every individual but one, lets the remaining datum range
//! over its domain and counts the distinct published outputs. Finite
//! domains are enumerated. Affine queries over interval domains followed by
//! a piecewise-constant mechanism are counted exactly from interval images,
//! and anything else is enumerated on an explicit grid.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::capacity::{zero_error_code_search, ChannelSpec, CodeSearch};
use crate::dataset::DatasetSpec;
use crate::error::{Error, Result};
use crate::measures::{
    hartley_entropy, leakage_l0, maximal_leakage, maximin_info, symmetrized_leakage, Direction, Entropy, PriorSpec,
};
use crate::mechanisms::MechanismSpec;
use crate::range::{Domain, FiniteRange, Interval, JointRelation};
use crate::value::{format_rational, int, min_max, to_f64, Rational, Value};

/// Slack used when comparing a measured budget with a real-valued one.
pub const BUDGET_SLACK: f64 = 1e-9;

/// Monte Carlo trial count used when the caller has no preference.
pub const DEFAULT_TRIALS: u64 = 100_000;

/// Default bound on the number of tuples or piece combinations enumerated.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

const TRIALS_PER_BLOCK: u64 = 8192;

/// How the conditional output ranges were obtained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AuditMode {
    ExactFinite,
    ExactQuantizerAffine,
    /// Continuous domains replaced by a grid. Counts are lower bounds.
    Grid { step: Rational },
}

impl fmt::Display for AuditMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuditMode::ExactFinite => f.write_str("exact-finite"),
            AuditMode::ExactQuantizerAffine => f.write_str("exact-quantizer-affine"),
            AuditMode::Grid { step } => write!(f, "grid({})", format_rational(step)),
        }
    }
}

/// Size of a conditional output range. Identity mechanisms on a
/// continuous image publish uncountably many outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutputCount {
    Finite(u64),
    Infinite,
}

impl OutputCount {
    pub fn bits(self) -> f64 {
        match self {
            OutputCount::Finite(k) => (k as f64).log2(),
            OutputCount::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for OutputCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputCount::Finite(k) => write!(f, "{k}"),
            OutputCount::Infinite => f.write_str("inf"),
        }
    }
}

/// Worst case for one individual: the largest conditional output range and
/// the other individuals' data (in index order, skipping this one) that
/// attain it. Local audits have no witness.
#[derive(Clone, Debug, PartialEq)]
pub struct IndividualAudit {
    pub individual: usize,
    pub count: OutputCount,
    pub witness: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub per_individual: Vec<IndividualAudit>,
    /// `log2` of the largest count; infinite for uncountable output sets.
    pub epsilon_star: f64,
    pub mode: AuditMode,
}

impl AuditReport {
    fn new(per_individual: Vec<IndividualAudit>, mode: AuditMode) -> Self {
        let worst = per_individual
            .iter()
            .map(|a| a.count)
            .max()
            .unwrap_or(OutputCount::Finite(1));
        AuditReport {
            per_individual,
            epsilon_star: worst.bits(),
            mode,
        }
    }

    pub fn max_count(&self) -> OutputCount {
        self.per_individual
            .iter()
            .map(|a| a.count)
            .max()
            .unwrap_or(OutputCount::Finite(1))
    }

    /// A grid can miss outputs, so its budget is only a lower bound.
    pub fn is_lower_bound(&self) -> bool {
        matches!(self.mode, AuditMode::Grid { .. })
    }

    /// True when the measured budget is within `epsilon` (with slack).
    pub fn satisfies(&self, epsilon: f64) -> bool {
        self.epsilon_star <= epsilon + BUDGET_SLACK
    }

    /// `individual,count,witness` rows, individuals 1-based.
    pub fn csv_rows(&self) -> String {
        let mut out = String::from("individual,count,witness,epsilon_star,mode\n");
        for a in &self.per_individual {
            out.push_str(&format!(
                "{},{},\"{}\",{:?},{}\n",
                a.individual + 1,
                a.count,
                Value::Tuple(a.witness.clone()),
                self.epsilon_star,
                self.mode
            ));
        }
        out
    }
}

impl fmt::Display for AuditReport {
    /// One `key = value` record per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode = {}", self.mode)?;
        writeln!(f, "epsilon_star = {:?}", self.epsilon_star)?;
        writeln!(f, "lower_bound = {}", self.is_lower_bound())?;
        for a in &self.per_individual {
            writeln!(f, "individual.{}.count = {}", a.individual + 1, a.count)?;
            writeln!(f, "individual.{}.witness = {}", a.individual + 1, Value::Tuple(a.witness.clone()))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditOptions {
    /// Grid step for continuous domains that have no exact path.
    pub grid_step: Option<Rational>,
    /// Use the grid even where an exact path exists.
    pub force_grid: bool,
    pub enumeration_cap: u64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            grid_step: None,
            force_grid: false,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl AuditOptions {
    pub fn grid(step: Rational) -> Self {
        AuditOptions {
            grid_step: Some(step),
            ..Default::default()
        }
    }

    fn required_step(&self) -> Result<&Rational> {
        self.grid_step.as_ref().ok_or_else(|| {
            Error::Precondition(
                "continuous domains without an exact audit path need a grid step (see grid_sample)".into(),
            )
        })
    }
}

fn check_cap(required: u128, cap: u64, what: &str) -> Result<()> {
    if required > cap as u128 {
        return Err(Error::Resource {
            required: format!("{required} {what}"),
            cap,
        });
    }
    Ok(())
}

/// Worst-case conditional output ranges for every individual (Definition
/// of ε-noiseless privacy: every such range has at most `2^ε` elements).
pub fn audit(dataset: &DatasetSpec, mech: &MechanismSpec, opts: &AuditOptions) -> Result<AuditReport> {
    mech.validate()?;
    if opts.force_grid {
        let step = opts.required_step()?;
        let grid = dataset.discretize(step)?;
        return finite_audit(&grid, mech, opts.enumeration_cap, AuditMode::Grid { step: step.clone() });
    }
    if dataset.all_finite() {
        return finite_audit(dataset, mech, opts.enumeration_cap, AuditMode::ExactFinite);
    }
    if let Some((weights, offset)) = dataset.query().affine_form(dataset.n()) {
        let breaks = mech.breakpoints();
        let per = (0..dataset.n())
            .map(|i| exact_affine_individual(dataset, mech, breaks.as_deref(), &weights, &offset, i, opts))
            .collect::<Result<Vec<_>>>()?;
        return Ok(AuditReport::new(per, AuditMode::ExactQuantizerAffine));
    }
    let step = opts.required_step()?;
    let grid = dataset.discretize(step)?;
    finite_audit(&grid, mech, opts.enumeration_cap, AuditMode::Grid { step: step.clone() })
}

fn conditional_outputs(dataset: &DatasetSpec, mech: &MechanismSpec, i: usize, others: &[Value]) -> Result<BTreeSet<Value>> {
    let values = dataset.domains()[i].as_finite().expect("finite domain");
    values
        .iter()
        .map(|v| mech.map_value(&dataset.evaluate_unchecked(&dataset.assemble(i, v, others))?))
        .collect()
}

fn finite_audit(dataset: &DatasetSpec, mech: &MechanismSpec, cap: u64, mode: AuditMode) -> Result<AuditReport> {
    let mut per = Vec::with_capacity(dataset.n());
    for i in 0..dataset.n() {
        let others = dataset.others(i)?;
        check_cap(others.cardinality(), cap, "assignments of the other individuals")?;
        let others: Vec<Vec<Value>> = others.collect();
        let counts = others
            .par_iter()
            .map(|o| conditional_outputs(dataset, mech, i, o).map(|s| s.len()))
            .collect::<Result<Vec<usize>>>()?;
        // First maximum in enumeration order, independent of scheduling.
        let (best, count) = counts
            .iter()
            .enumerate()
            .fold((0, 0), |acc, (k, &c)| if c > acc.1 { (k, c) } else { acc });
        if count == 0 {
            return Err(Error::Invariant(format!(
                "individual {} has an empty conditional output range",
                i + 1
            )));
        }
        per.push(IndividualAudit {
            individual: i,
            count: OutputCount::Finite(count as u64),
            witness: others[best].clone(),
        });
    }
    Ok(AuditReport::new(per, mode))
}

/// Outputs of a mechanism that is constant on each `[t_k, t_{k+1})` over a
/// union of closed segments: the value at each segment's start plus the
/// value at every breakpoint inside it.
fn outputs_on_segments(
    mech: &MechanismSpec,
    breaks: &[Rational],
    segments: &[(Rational, Rational)],
) -> Result<BTreeSet<Value>> {
    let mut out = BTreeSet::new();
    for (s, e) in segments {
        out.insert(mech.map_value(&Value::Num(s.clone()))?);
        let from = breaks.partition_point(|t| t <= s);
        let to = breaks.partition_point(|t| t <= e);
        for t in &breaks[from..to] {
            out.insert(mech.map_value(&Value::Num(t.clone()))?);
        }
    }
    Ok(out)
}

fn numeric_pieces(d: &Domain, individual: usize) -> Result<Vec<Interval>> {
    d.pieces()
        .ok_or_else(|| Error::Argument(format!("individual {} has a non-numeric domain", individual + 1)))
}

/// One combination of pieces of the other individuals' domains.
struct Combination {
    pieces: Vec<Interval>,
    c_lo: Rational,
    c_hi: Rational,
}

fn combinations(
    dataset: &DatasetSpec,
    weights: &[Rational],
    offset: &Rational,
    i: usize,
    cap: u64,
) -> Result<(Vec<usize>, Vec<Combination>)> {
    let js: Vec<usize> = (0..dataset.n()).filter(|&j| j != i).collect();
    let pieces: Vec<Vec<Interval>> = js
        .iter()
        .map(|&j| numeric_pieces(&dataset.domains()[j], j))
        .collect::<Result<_>>()?;
    let total: u128 = pieces.iter().map(|p| p.len() as u128).product();
    check_cap(total, cap, "piece combinations of the other individuals")?;
    let mut out = Vec::with_capacity(total as usize);
    let mut cursor = vec![0usize; js.len()];
    loop {
        let chosen: Vec<Interval> = cursor.iter().zip(&pieces).map(|(&k, p)| p[k].clone()).collect();
        let mut c_lo = offset.clone();
        let mut c_hi = offset.clone();
        for (&j, piece) in js.iter().zip(&chosen) {
            let (a, b) = min_max(&weights[j] * piece.lo(), &weights[j] * piece.hi());
            c_lo += a;
            c_hi += b;
        }
        out.push(Combination {
            pieces: chosen,
            c_lo,
            c_hi,
        });
        let mut pos = cursor.len();
        loop {
            if pos == 0 {
                return Ok((js, out));
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < pieces[pos].len() {
                break;
            }
            cursor[pos] = 0;
        }
    }
}

/// Data of the other individuals whose weighted sum plus offset is `c`.
fn witness_for(js: &[usize], weights: &[Rational], combo: &Combination, c: &Rational) -> Vec<Value> {
    let span = &combo.c_hi - &combo.c_lo;
    let lambda = if span.is_zero() {
        Rational::zero()
    } else {
        (c - &combo.c_lo) / span
    };
    js.iter()
        .zip(&combo.pieces)
        .map(|(&j, p)| {
            let width = p.hi() - p.lo();
            let x = if weights[j] >= Rational::zero() {
                p.lo() + &lambda * width
            } else {
                p.hi() - &lambda * width
            };
            Value::Num(x)
        })
        .collect()
}

fn exact_affine_individual(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    breaks: Option<&[Rational]>,
    weights: &[Rational],
    offset: &Rational,
    i: usize,
    opts: &AuditOptions,
) -> Result<IndividualAudit> {
    let w = &weights[i];
    // Image of individual i's domain relative to the others' contribution c.
    let rel: Vec<(Rational, Rational)> = numeric_pieces(&dataset.domains()[i], i)?
        .iter()
        .map(|p| min_max(w * p.lo(), w * p.hi()))
        .collect();
    let has_length = rel.iter().any(|(a, b)| a < b);
    let point_bound = if has_length {
        None
    } else {
        Some(rel.iter().map(|(a, _)| a).collect::<BTreeSet<_>>().len())
    };
    let (js, combos) = combinations(dataset, weights, offset, i, opts.enumeration_cap)?;
    let shifted = |c: &Rational| -> Vec<(Rational, Rational)> { rel.iter().map(|(a, b)| (c + a, c + b)).collect() };

    let Some(breaks) = breaks else {
        // No breakpoints: the mechanism is injective on numbers.
        let combo = &combos[0];
        if has_length {
            return Ok(IndividualAudit {
                individual: i,
                count: OutputCount::Infinite,
                witness: witness_for(&js, weights, combo, &combo.c_lo),
            });
        }
        let mut best: Option<(usize, usize)> = None;
        for (k, combo) in combos.iter().enumerate() {
            let outs: BTreeSet<Value> = shifted(&combo.c_lo)
                .into_iter()
                .map(|(s, _)| mech.map_value(&Value::Num(s)))
                .collect::<Result<_>>()?;
            if best.is_none_or(|(_, n)| outs.len() > n) {
                best = Some((k, outs.len()));
            }
        }
        let (k, n) = best.expect("at least one combination");
        return Ok(IndividualAudit {
            individual: i,
            count: OutputCount::Finite(n as u64),
            witness: witness_for(&js, weights, &combos[k], &combos[k].c_lo),
        });
    };

    // The output set changes only where a segment endpoint c + u crosses a
    // breakpoint t, so it suffices to evaluate at c = t - u, at the ends of
    // [c_lo, c_hi], and between consecutive critical values.
    let endpoints: BTreeSet<&Rational> = rel.iter().flat_map(|(a, b)| [a, b]).collect();
    let mut best: Option<(usize, Rational, usize)> = None;
    'combos: for (k, combo) in combos.iter().enumerate() {
        let mut critical: Vec<Rational> = vec![combo.c_lo.clone(), combo.c_hi.clone()];
        for u in &endpoints {
            let lo = &combo.c_lo + *u;
            let hi = &combo.c_hi + *u;
            let from = breaks.partition_point(|t| t < &lo);
            let to = breaks.partition_point(|t| t <= &hi);
            critical.extend(breaks[from..to].iter().map(|t| t - *u));
        }
        critical.sort();
        critical.dedup();
        let mids: Vec<Rational> = critical.windows(2).map(|p| (&p[0] + &p[1]) / int(2)).collect();
        critical.extend(mids);
        critical.sort();
        for c in critical {
            let n = outputs_on_segments(mech, breaks, &shifted(&c))?.len();
            if best.as_ref().is_none_or(|b| n > b.2) {
                best = Some((k, c, n));
            }
            if point_bound.is_some_and(|pb| n >= pb) {
                break 'combos;
            }
        }
    }
    let (k, c, n) = best.expect("at least one candidate");
    Ok(IndividualAudit {
        individual: i,
        count: OutputCount::Finite(n as u64),
        witness: witness_for(&js, weights, &combos[k], &c),
    })
}

/// Local noiseless privacy: every individual's datum is released through
/// its own copy of the mechanism, so only `|M(⟦X_i⟧)|` matters.
pub fn audit_local(dataset: &DatasetSpec, mech: &MechanismSpec, opts: &AuditOptions) -> Result<AuditReport> {
    mech.validate()?;
    let breaks = mech.breakpoints();
    let mut per = Vec::with_capacity(dataset.n());
    let mut any_exact_continuous = false;
    let mut gridded = false;
    for (i, d) in dataset.domains().iter().enumerate() {
        let domain = if opts.force_grid && !d.is_finite() {
            gridded = true;
            d.discretize(opts.required_step()?)?
        } else {
            d.clone()
        };
        let count = match &domain {
            Domain::Finite(values) => {
                let outs = values.iter().map(|v| mech.map_value(v)).collect::<Result<BTreeSet<_>>>()?;
                OutputCount::Finite(outs.len() as u64)
            }
            Domain::Continuous(iv) => {
                any_exact_continuous = true;
                let segments: Vec<(Rational, Rational)> =
                    iv.intervals().iter().map(|p| (p.lo().clone(), p.hi().clone())).collect();
                match &breaks {
                    Some(b) => OutputCount::Finite(outputs_on_segments(mech, b, &segments)?.len() as u64),
                    None if segments.iter().any(|(a, b)| a < b) => OutputCount::Infinite,
                    None => OutputCount::Finite(segments.len() as u64),
                }
            }
        };
        per.push(IndividualAudit {
            individual: i,
            count,
            witness: Vec::new(),
        });
    }
    let mode = if gridded {
        AuditMode::Grid {
            step: opts.grid_step.clone().expect("checked"),
        }
    } else if any_exact_continuous {
        AuditMode::ExactQuantizerAffine
    } else {
        AuditMode::ExactFinite
    };
    Ok(AuditReport::new(per, mode))
}

/// Finite values individual `i` can take: its own finite domain, or a grid.
fn finite_values(dataset: &DatasetSpec, i: usize, grid_step: Option<&Rational>) -> Result<FiniteRange> {
    match dataset.domain(i)? {
        Domain::Finite(r) => Ok(r.clone()),
        d @ Domain::Continuous(_) => {
            let step = grid_step.ok_or_else(|| {
                Error::Precondition(format!(
                    "individual {} has a continuous domain; supply a grid step",
                    i + 1
                ))
            })?;
            Ok(d.discretize(step)?.as_finite().expect("discretized").clone())
        }
    }
}

/// The deterministic channel `x_i ↦ M(f(x_i, v_{-i}))`.
pub fn induced_channel(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    i: usize,
    others: &[Value],
    grid_step: Option<&Rational>,
) -> Result<BTreeMap<Value, Value>> {
    dataset.substitute(i, others)?;
    finite_values(dataset, i, grid_step)?
        .iter()
        .map(|v| {
            let y = mech.map_value(&dataset.evaluate_unchecked(&dataset.assemble(i, v, others))?)?;
            Ok((v.clone(), y))
        })
        .collect()
}

/// Which hypothesis a test accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Hypothesis {
    Null,
    Alternative,
}

/// `log2 |ℵ(T)|` of a test, or no output at which any test is correct.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestPerformance {
    Bits(f64),
    NoDistinguishingOutput,
}

impl TestPerformance {
    pub fn bits(self) -> f64 {
        match self {
            TestPerformance::Bits(b) => b,
            TestPerformance::NoDistinguishingOutput => f64::NEG_INFINITY,
        }
    }
}

impl fmt::Display for TestPerformance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestPerformance::Bits(b) => write!(f, "{b:?}"),
            TestPerformance::NoDistinguishingOutput => f.write_str("no distinguishing output"),
        }
    }
}

/// Testing `X_i = x_A` (null) against `X_i = x_B` (alternative) from the
/// published output, with every other individual pinned.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub y_given_null: FiniteRange,
    pub y_given_alternative: FiniteRange,
    pub symmetric_difference: FiniteRange,
    /// `log2 |Δ|`, the performance limit of every test.
    pub bound: Entropy,
    /// The optimal test: accept the hypothesis an output pins down, and the
    /// null hypothesis where the output is ambiguous.
    pub optimal_test: BTreeMap<Value, Hypothesis>,
    pub best_test_performance: TestPerformance,
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "y_given_p0 = {}", self.y_given_null)?;
        writeln!(f, "y_given_p1 = {}", self.y_given_alternative)?;
        writeln!(f, "symmetric_difference = {}", self.symmetric_difference)?;
        writeln!(f, "bound = {}", self.bound)?;
        writeln!(f, "best_test_performance = {}", self.best_test_performance)
    }
}

/// Outputs at which test `t` is correct: the hypotheses consistent with
/// the output are exactly `{t(y)}`.
fn correct_outputs(
    test: &BTreeMap<Value, Hypothesis>,
    consistent: &BTreeMap<Value, BTreeSet<Hypothesis>>,
) -> FiniteRange {
    test.iter()
        .filter(|(y, h)| consistent[*y].len() == 1 && consistent[*y].contains(h))
        .map(|(y, _)| y.clone())
        .collect()
}

pub fn hypothesis_analysis(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    i: usize,
    x_a: &Value,
    x_b: &Value,
    others: &[Value],
) -> Result<HypothesisReport> {
    if x_a == x_b {
        return Err(Error::Argument("the two hypotheses must name different values".into()));
    }
    let pinned = dataset.substitute(i, others)?;
    for x in [x_a, x_b] {
        if !pinned.domains()[i].contains(x) {
            return Err(Error::domain(x, format!("domain of individual {}", i + 1)));
        }
    }
    let out = |x: &Value| -> Result<Value> { mech.map_value(&dataset.evaluate_unchecked(&dataset.assemble(i, x, others))?) };
    let y0 = FiniteRange::singleton(out(x_a)?);
    let y1 = FiniteRange::singleton(out(x_b)?);
    let delta = y0.symmetric_difference(&y1);

    let mut consistent: BTreeMap<Value, BTreeSet<Hypothesis>> = BTreeMap::new();
    for (range, h) in [(&y0, Hypothesis::Null), (&y1, Hypothesis::Alternative)] {
        for y in range {
            consistent.entry(y.clone()).or_default().insert(h);
        }
    }
    let optimal_test: BTreeMap<Value, Hypothesis> = consistent
        .iter()
        .map(|(y, hs)| {
            let h = if hs.len() == 1 {
                *hs.iter().next().expect("one element")
            } else {
                Hypothesis::Null
            };
            (y.clone(), h)
        })
        .collect();
    let aleph = correct_outputs(&optimal_test, &consistent);
    let best_test_performance = if aleph.is_empty() {
        TestPerformance::NoDistinguishingOutput
    } else {
        TestPerformance::Bits((aleph.len() as f64).log2())
    };
    Ok(HypothesisReport {
        y_given_null: y0,
        y_given_alternative: y1,
        bound: hartley_entropy(&delta),
        symmetric_difference: delta,
        optimal_test,
        best_test_performance,
    })
}

/// Measures of the information `Y` carries about `X_i` with the others
/// pinned, against the audited budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Chain {
    pub maximin: f64,
    pub symmetrized: f64,
    /// `L0(Y;X_i)`.
    pub leakage: f64,
    pub epsilon_star: f64,
}

impl Theorem1Chain {
    /// `0 ≤ I* ≤ L0s ≤ L0(Y;X_i) ≤ ε*` up to the budget slack.
    pub fn holds(&self) -> bool {
        let s = BUDGET_SLACK;
        -s <= self.maximin
            && self.maximin <= self.symmetrized + s
            && self.symmetrized <= self.leakage + s
            && self.leakage <= self.epsilon_star + s
    }
}

/// Joint range of `(X_i, Y)` with the other individuals pinned.
pub fn induced_relation(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    i: usize,
    others: &[Value],
    grid_step: Option<&Rational>,
) -> Result<JointRelation> {
    Ok(JointRelation::from_map(&induced_channel(dataset, mech, i, others, grid_step)?))
}

pub fn theorem1_check(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    i: usize,
    others: &[Value],
    opts: &AuditOptions,
) -> Result<Theorem1Chain> {
    let rel = induced_relation(dataset, mech, i, others, opts.grid_step.as_ref())?;
    let chain = Theorem1Chain {
        maximin: maximin_info(&rel)?.bits,
        symmetrized: symmetrized_leakage(&rel),
        leakage: leakage_l0(&rel, Direction::YX),
        epsilon_star: audit(dataset, mech, opts)?.epsilon_star,
    };
    Ok(chain)
}

/// Zero-error codes through the induced channel at block lengths `1..=max_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Theorem2Check {
    pub searches: Vec<CodeSearch>,
    pub epsilon_star: f64,
}

impl Theorem2Check {
    pub fn holds(&self) -> bool {
        self.searches.iter().all(|s| s.rate <= self.epsilon_star + BUDGET_SLACK)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn theorem2_check(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    i: usize,
    others: &[Value],
    max_k: usize,
    search_cap: u64,
    opts: &AuditOptions,
) -> Result<Theorem2Check> {
    let channel = ChannelSpec::deterministic(&induced_channel(dataset, mech, i, others, opts.grid_step.as_ref())?)?;
    let searches = (1..=max_k)
        .map(|k| zero_error_code_search(&channel, k, search_cap))
        .collect::<Result<_>>()?;
    Ok(Theorem2Check {
        searches,
        epsilon_star: audit(dataset, mech, opts)?.epsilon_star,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem5Check {
    pub maximal_leakage: f64,
    pub epsilon_star: f64,
    pub pass: bool,
}

/// Maximal leakage of the induced channel under `prior` against ε*.
pub fn theorem5_check(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    i: usize,
    others: &[Value],
    prior: &PriorSpec,
    opts: &AuditOptions,
) -> Result<Theorem5Check> {
    let channel = induced_channel(dataset, mech, i, others, opts.grid_step.as_ref())?;
    let leakage = maximal_leakage(&channel, prior)?;
    let epsilon_star = audit(dataset, mech, opts)?.epsilon_star;
    Ok(Theorem5Check {
        maximal_leakage: leakage,
        epsilon_star,
        pass: leakage <= epsilon_star + BUDGET_SLACK,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem4Check {
    /// Mean of `|X_i - estimate|^p` over the trials.
    pub empirical: f64,
    pub standard_error: f64,
    pub bound: f64,
    pub epsilon_star: f64,
    pub trials: u64,
    /// The prior density has infimum 0, so the bound is 0.
    pub degenerate_prior: bool,
    pub pass: bool,
}

/// For each output, the x-space preimage hull `[lo, hi]` and its midpoint;
/// atoms alternate point, open interval, point, ... along `[lo, hi]`.
struct MidpointEstimator {
    /// Interior breakpoints in x-space, ascending.
    cuts: Vec<f64>,
    /// Estimate for each open interval between cuts.
    estimates: Vec<f64>,
}

impl MidpointEstimator {
    fn estimate(&self, x: f64) -> f64 {
        self.estimates[self.cuts.partition_point(|&c| c <= x)]
    }
}

fn midpoint_estimator(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    i: usize,
    others: &[Value],
    lo: &Rational,
    hi: &Rational,
) -> Result<Option<MidpointEstimator>> {
    let Some((weights, offset)) = dataset.query().affine_form(dataset.n()) else {
        return Err(Error::Precondition(
            "the estimation check needs an affine query so preimages are intervals".into(),
        ));
    };
    let w = &weights[i];
    let mut c = offset;
    for (j, v) in (0..dataset.n()).filter(|&j| j != i).zip(others) {
        c += &weights[j] * v.expect_num("pinned datum")?;
    }
    let Some(breaks) = mech.breakpoints() else {
        if w.is_zero() {
            // Constant output: one preimage, the whole domain.
            return Ok(Some(MidpointEstimator {
                cuts: Vec::new(),
                estimates: vec![to_f64(&((lo + hi) / int(2)))],
            }));
        }
        // Injective on numbers: every output pins X_i down exactly.
        return Ok(None);
    };
    let mut cuts: Vec<Rational> = if w.is_zero() {
        Vec::new()
    } else {
        breaks
            .iter()
            .map(|t| (t - &c) / w)
            .filter(|x| lo < x && x < hi)
            .collect()
    };
    cuts.sort();
    cuts.dedup();
    let out = |x: &Rational| mech.map_value(&Value::Num(&c + w * x));
    // Atoms in order with their hulls and outputs.
    let mut atoms: Vec<(Rational, Rational, Value, bool)> = vec![(lo.clone(), lo.clone(), out(lo)?, false)];
    let mut left = lo.clone();
    for x in cuts.iter().chain(std::iter::once(hi)) {
        let mid = (&left + x) / int(2);
        atoms.push((left.clone(), x.clone(), out(&mid)?, true));
        atoms.push((x.clone(), x.clone(), out(x)?, false));
        left = x.clone();
    }
    let mut hulls: BTreeMap<Value, (Rational, Rational)> = BTreeMap::new();
    let mut last: Option<&Value> = None;
    for (a, b, y, _) in &atoms {
        if last != Some(y) && hulls.contains_key(y) {
            return Err(Error::Precondition(format!(
                "the preimage of output {y} is not connected; the estimation bound does not apply"
            )));
        }
        let e = hulls.entry(y.clone()).or_insert_with(|| (a.clone(), b.clone()));
        e.1 = b.clone();
        last = Some(y);
    }
    let estimates = atoms
        .iter()
        .filter(|a| a.3)
        .map(|(_, _, y, _)| {
            let (a, b) = &hulls[y];
            to_f64(&((a + b) / int(2)))
        })
        .collect();
    Ok(Some(MidpointEstimator {
        cuts: cuts.iter().map(to_f64).collect(),
        estimates,
    }))
}

/// Monte Carlo check of the lower bound on the p-th moment of any
/// estimator's error, `ρ μ^{p+1} / 2^{2p+2} · 2^{-ε(p+1)}`, using the
/// midpoint of each output's preimage as the estimate.
#[allow(clippy::too_many_arguments)]
pub fn theorem4_check(
    dataset: &DatasetSpec,
    mech: &MechanismSpec,
    i: usize,
    others: &[Value],
    prior: &PriorSpec,
    p: u32,
    trials: u64,
    seed: u64,
) -> Result<Theorem4Check> {
    if p == 0 || trials == 0 {
        return Err(Error::Argument("moment order and trial count must be positive".into()));
    }
    dataset.substitute(i, others)?;
    let Domain::Continuous(iv) = dataset.domain(i)? else {
        return Err(Error::Precondition(format!("individual {} needs an interval domain", i + 1)));
    };
    let [piece] = iv.intervals() else {
        return Err(Error::Precondition(format!(
            "individual {} needs a single-interval domain",
            i + 1
        )));
    };
    let PriorSpec::Density { lo, hi, .. } = prior else {
        return Err(Error::Argument("the estimation check needs a density prior".into()));
    };
    if lo != piece.lo() || hi != piece.hi() {
        return Err(Error::Argument(format!(
            "prior support [{}, {}] does not equal the domain {iv}",
            format_rational(lo),
            format_rational(hi)
        )));
    }
    let estimator = midpoint_estimator(dataset, mech, i, others, lo, hi)?;
    let epsilon_star = audit(dataset, mech, &AuditOptions::default())?.epsilon_star;

    let blocks = trials.div_ceil(TRIALS_PER_BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n = TRIALS_PER_BLOCK.min(trials - b * TRIALS_PER_BLOCK);
            let mut acc = (0.0, 0.0);
            for _ in 0..n {
                let x = prior.sample_density(&mut rng)?;
                let err = match &estimator {
                    Some(e) => (x - e.estimate(x)).abs().powi(p as i32),
                    None => 0.0,
                };
                acc.0 += err;
                acc.1 += err * err;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |a, s| (a.0 + s.0, a.1 + s.1));
    let t = trials as f64;
    let empirical = sum / t;
    let variance = if trials > 1 {
        ((sum_sq - t * empirical * empirical) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    let standard_error = (variance / t).sqrt();

    let rho = prior.rho();
    let mu = to_f64(&piece.length());
    let p1 = f64::from(p) + 1.0;
    let bound = rho * mu.powf(p1) / 2f64.powf(2.0 * f64::from(p) + 2.0) * (-epsilon_star * p1).exp2();
    Ok(Theorem4Check {
        empirical,
        standard_error,
        bound,
        epsilon_star,
        trials,
        degenerate_prior: rho <= 0.0,
        pass: empirical >= bound - 3.0 * standard_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::QueryKind;
    use crate::range::IntervalUnion;
    use crate::value::ratio;

    fn bits(n: usize) -> Vec<Domain> {
        vec![Domain::Finite(FiniteRange::integers(0, 1)); n]
    }

    fn unit(n: usize) -> Vec<Domain> {
        vec![Domain::Continuous(IntervalUnion::single(int(0), int(1)).unwrap()); n]
    }

    fn identity_query(domains: Vec<Domain>) -> DatasetSpec {
        DatasetSpec::new(
            domains,
            QueryKind::Affine {
                weights: vec![int(1)],
                offset: int(0),
            },
            None,
        )
        .unwrap()
    }

    #[test]
    fn audit_examples() {
        let mean = DatasetSpec::new(bits(2), QueryKind::Mean, None).unwrap();
        let r = audit(&mean, &MechanismSpec::Identity, &AuditOptions::default()).unwrap();
        assert_eq!(r.epsilon_star, 1.0);
        assert_eq!(r.mode, AuditMode::ExactFinite);
        assert!(r.to_string().contains("epsilon_star = 1.0\n"));

        let c = MechanismSpec::Constant(Value::sym("c"));
        assert_eq!(audit(&mean, &c, &AuditOptions::default()).unwrap().epsilon_star, 0.0);

        let cont = DatasetSpec::new(unit(2), QueryKind::Mean, None).unwrap();
        let q2 = MechanismSpec::quantizer(2, int(0), int(1)).unwrap();
        let r = audit(&cont, &q2, &AuditOptions::default()).unwrap();
        assert_eq!(r.epsilon_star, 1.0);
        assert_eq!(r.mode, AuditMode::ExactQuantizerAffine);
    }

    #[test]
    fn exact_witness_attains_the_count() {
        // Mean of two on [0,1] with q = 4: an image of length 1/2 meets
        // three cells when it straddles two boundaries.
        let cont = DatasetSpec::new(unit(2), QueryKind::Mean, None).unwrap();
        let q4 = MechanismSpec::quantizer(4, int(0), int(1)).unwrap();
        let r = audit(&cont, &q4, &AuditOptions::default()).unwrap();
        assert_eq!(r.max_count(), OutputCount::Finite(3));
        for a in &r.per_individual {
            let w = a.witness[0].as_rational().unwrap().clone();
            let outs: BTreeSet<u64> = (0..=1000)
                .map(|k| {
                    let x = ratio(k, 1000);
                    let y = (&x + &w) / int(2);
                    match q4.map_value(&Value::Num(y)).unwrap() {
                        Value::Num(m) => (m * int(8)).to_integer().try_into().unwrap(),
                        _ => unreachable!(),
                    }
                })
                .collect();
            assert_eq!(outs.len(), 3, "witness {w}");
        }
    }

    #[test]
    fn identity_on_continuous_image_is_unbounded() {
        let cont = DatasetSpec::new(unit(2), QueryKind::Mean, None).unwrap();
        let r = audit(&cont, &MechanismSpec::Identity, &AuditOptions::default()).unwrap();
        assert_eq!(r.epsilon_star, f64::INFINITY);
        assert_eq!(r.max_count(), OutputCount::Infinite);
    }

    #[test]
    fn table_query_on_continuous_domain_needs_a_grid() {
        let d = vec![
            Domain::Continuous(IntervalUnion::single(int(0), int(1)).unwrap()),
            Domain::Finite(FiniteRange::integers(0, 1)),
        ];
        let table: BTreeMap<Vec<Value>, Value> = [(vec![Value::int(0), Value::int(0)], Value::int(0))].into();
        let ds = DatasetSpec::new(d, QueryKind::Table(table), None).unwrap();
        let err = audit(&ds, &MechanismSpec::Identity, &AuditOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn grid_never_exceeds_exact() {
        let cont = DatasetSpec::new(unit(2), QueryKind::Mean, None).unwrap();
        let q4 = MechanismSpec::quantizer(4, int(0), int(1)).unwrap();
        let exact = audit(&cont, &q4, &AuditOptions::default()).unwrap();
        let mut opts = AuditOptions::grid(ratio(1, 10));
        opts.force_grid = true;
        let grid = audit(&cont, &q4, &opts).unwrap();
        assert!(grid.is_lower_bound());
        assert!(grid.max_count() <= exact.max_count());
    }

    #[test]
    fn local_audit_examples() {
        let eight = vec![Domain::Finite(FiniteRange::integers(0, 7)); 2];
        let ds = DatasetSpec::new(eight, QueryKind::Mean, None).unwrap();
        assert_eq!(
            audit_local(&ds, &MechanismSpec::Identity, &AuditOptions::default()).unwrap().epsilon_star,
            3.0
        );
        let cont = DatasetSpec::new(unit(3), QueryKind::Mean, None).unwrap();
        let q4 = MechanismSpec::quantizer(4, int(0), int(1)).unwrap();
        assert_eq!(audit_local(&cont, &q4, &AuditOptions::default()).unwrap().epsilon_star, 2.0);
        let c = MechanismSpec::Constant(Value::int(0));
        assert_eq!(audit_local(&cont, &c, &AuditOptions::default()).unwrap().epsilon_star, 0.0);
    }

    #[test]
    fn hypothesis_examples() {
        let ds = DatasetSpec::new(bits(2), QueryKind::Sum, None).unwrap();
        let r = hypothesis_analysis(&ds, &MechanismSpec::Identity, 0, &Value::int(0), &Value::int(1), &[Value::int(1)])
            .unwrap();
        assert_eq!(r.symmetric_difference.len(), 2);
        assert_eq!(r.bound, Entropy::Finite(1.0));
        assert_eq!(r.best_test_performance, TestPerformance::Bits(1.0));
        assert_eq!(r.optimal_test[&Value::int(2)], Hypothesis::Alternative);

        let c = MechanismSpec::Constant(Value::sym("k"));
        let r = hypothesis_analysis(&ds, &c, 0, &Value::int(0), &Value::int(1), &[Value::int(0)]).unwrap();
        assert!(r.symmetric_difference.is_empty());
        assert_eq!(r.best_test_performance, TestPerformance::NoDistinguishingOutput);

        assert!(hypothesis_analysis(&ds, &c, 0, &Value::int(0), &Value::int(0), &[Value::int(0)]).is_err());
    }

    #[test]
    fn theorem1_examples() {
        let four = vec![Domain::Finite(FiniteRange::integers(0, 3)); 2];
        let ds = DatasetSpec::new(four, QueryKind::Sum, None).unwrap();
        let opts = AuditOptions::default();
        let c = MechanismSpec::Constant(Value::int(0));
        let chain = theorem1_check(&ds, &c, 0, &[Value::int(1)], &opts).unwrap();
        assert_eq!((chain.maximin, chain.symmetrized, chain.leakage, chain.epsilon_star), (0.0, 0.0, 0.0, 0.0));
        let chain = theorem1_check(&ds, &MechanismSpec::Identity, 1, &[Value::int(2)], &opts).unwrap();
        assert_eq!((chain.maximin, chain.symmetrized, chain.leakage, chain.epsilon_star), (2.0, 2.0, 2.0, 2.0));
        assert!(chain.holds());
    }

    #[test]
    fn theorem5_examples() {
        let four = vec![Domain::Finite(FiniteRange::integers(0, 3))];
        let ds = identity_query(four.clone());
        let prior = PriorSpec::uniform_discrete(four[0].as_finite().unwrap()).unwrap();
        let opts = AuditOptions::default();
        let r = theorem5_check(&ds, &MechanismSpec::Constant(Value::int(0)), 0, &[], &prior, &opts).unwrap();
        assert_eq!((r.maximal_leakage, r.epsilon_star, r.pass), (0.0, 0.0, true));
        let r = theorem5_check(&ds, &MechanismSpec::Identity, 0, &[], &prior, &opts).unwrap();
        assert_eq!((r.maximal_leakage, r.epsilon_star, r.pass), (2.0, 2.0, true));
    }

    #[test]
    fn theorem4_uniform_half_cells() {
        // Uniform on [0,1] with two cells: the midpoint estimator's squared
        // error is the variance of a uniform on a width-1/2 cell, 1/48.
        let ds = identity_query(unit(1));
        let prior = PriorSpec::uniform_density(int(0), int(1)).unwrap();
        let q2 = MechanismSpec::quantizer(2, int(0), int(1)).unwrap();
        let r = theorem4_check(&ds, &q2, 0, &[], &prior, 2, 50_000, 3).unwrap();
        assert!((r.empirical - 1.0 / 48.0).abs() < 0.05 / 48.0, "{}", r.empirical);
        assert!((r.bound - 2f64.powi(-9)).abs() < 1e-15);
        assert!(r.pass);

        let c = MechanismSpec::Constant(Value::int(0));
        let r = theorem4_check(&ds, &c, 0, &[], &prior, 2, 50_000, 3).unwrap();
        assert!((r.empirical - 1.0 / 12.0).abs() < 0.05 / 12.0);
        assert!((r.bound - 1.0 / 64.0).abs() < 1e-15);

        let q4 = MechanismSpec::quantizer(4, int(0), int(1)).unwrap();
        let r = theorem4_check(&ds, &q4, 0, &[], &prior, 1, 50_000, 3).unwrap();
        assert!((r.empirical - 1.0 / 16.0).abs() < 0.05 / 16.0);
        assert!((r.bound - 2f64.powi(-8)).abs() < 1e-15);
    }

    #[test]
    fn theorem4_is_reproducible_and_rejects_disconnected_preimages() {
        let ds = identity_query(unit(1));
        let prior = PriorSpec::uniform_density(int(0), int(1)).unwrap();
        let q2 = MechanismSpec::quantizer(2, int(0), int(1)).unwrap();
        let a = theorem4_check(&ds, &q2, 0, &[], &prior, 2, 20_000, 11).unwrap();
        let b = theorem4_check(&ds, &q2, 0, &[], &prior, 2, 20_000, 11).unwrap();
        assert_eq!(a, b);

        let q3 = MechanismSpec::quantizer(3, int(0), int(1)).unwrap();
        let g: BTreeMap<Value, Value> = q3
            .output_alphabet()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(k, s)| (s.clone(), Value::int((k % 2) as i64)))
            .collect();
        let folded = MechanismSpec::post_process(q3, g).unwrap();
        assert!(matches!(
            theorem4_check(&ds, &folded, 0, &[], &prior, 2, 100, 1),
            Err(Error::Precondition(_))
        ));
    }
}
