//! Private datasets: one declared domain per individual and a scalar query.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::range::{product_range, Domain, FiniteRange, ProductRange};
use crate::value::{format_rational, int, min_max, Rational, Value};

/// How the query combines the individuals' data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryKind {
    /// `offset + Σ w_i x_i`.
    Affine {
        weights: Vec<Rational>,
        offset: Rational,
    },
    Mean,
    Sum,
    /// Explicit table from full data tuples to a numeric response.
    Table(BTreeMap<Vec<Value>, Value>),
}

/// A scalar query together with a range known to contain its image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuerySpec {
    kind: QueryKind,
    output_bounds: (Rational, Rational),
}

impl QuerySpec {
    pub fn kind(&self) -> &QueryKind {
        &self.kind
    }

    pub fn output_bounds(&self) -> (&Rational, &Rational) {
        (&self.output_bounds.0, &self.output_bounds.1)
    }

    /// Weights and offset for every affine kind.
    pub fn affine_form(&self, n: usize) -> Option<(Vec<Rational>, Rational)> {
        match &self.kind {
            QueryKind::Affine { weights, offset } => Some((weights.clone(), offset.clone())),
            QueryKind::Mean => Some((vec![Rational::new(1.into(), (n as i64).into()); n], Rational::zero())),
            QueryKind::Sum => Some((vec![int(1); n], Rational::zero())),
            QueryKind::Table(_) => None,
        }
    }

    pub fn is_affine(&self) -> bool {
        !matches!(self.kind, QueryKind::Table(_))
    }
}

/// `n` individuals, their domains, and the query the curator answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSpec {
    domains: Vec<Domain>,
    query: QuerySpec,
}

impl DatasetSpec {
    /// Validates the domains and the query. When `output_bounds` is `None`
    /// the tightest bounds are derived from the image of the domain box;
    /// explicit bounds must contain that image.
    pub fn new(
        domains: Vec<Domain>,
        kind: QueryKind,
        output_bounds: Option<(Rational, Rational)>,
    ) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::Argument("a dataset needs at least one individual".into()));
        }
        if let Some(k) = domains.iter().position(Domain::is_empty) {
            return Err(Error::Argument(format!("domain of individual {} is empty", k + 1)));
        }
        let n = domains.len();
        let image = match &kind {
            QueryKind::Affine { weights, .. } if weights.len() != n => {
                return Err(Error::Argument(format!(
                    "affine query has {} weights for {} individuals",
                    weights.len(),
                    n
                )))
            }
            QueryKind::Table(table) => table_image(&domains, table)?,
            _ => {
                let probe = QuerySpec {
                    kind: kind.clone(),
                    output_bounds: (int(0), int(0)),
                };
                let (weights, offset) = probe.affine_form(n).expect("affine kind");
                affine_image(&domains, &weights, &offset)?
            }
        };
        let bounds = match output_bounds {
            None => image,
            Some((lo, hi)) => {
                if lo > hi {
                    return Err(Error::Argument("output bounds have y_min > y_max".into()));
                }
                if image.0 < lo || image.1 > hi {
                    return Err(Error::Argument(format!(
                        "query image [{}, {}] is not within the output bounds [{}, {}]",
                        format_rational(&image.0),
                        format_rational(&image.1),
                        format_rational(&lo),
                        format_rational(&hi)
                    )));
                }
                (lo, hi)
            }
        };
        Ok(DatasetSpec {
            domains,
            query: QuerySpec {
                kind,
                output_bounds: bounds,
            },
        })
    }

    pub fn n(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn domain(&self, i: usize) -> Result<&Domain> {
        self.domains
            .get(i)
            .ok_or_else(|| Error::Argument(format!("individual index {} out of 1..={}", i + 1, self.n())))
    }

    pub fn query(&self) -> &QuerySpec {
        &self.query
    }

    pub fn all_finite(&self) -> bool {
        self.domains.iter().all(Domain::is_finite)
    }

    pub fn contains(&self, x: &[Value]) -> bool {
        x.len() == self.n() && self.domains.iter().zip(x).all(|(d, v)| d.contains(v))
    }

    /// Evaluates `f(x)`.
    pub fn evaluate(&self, x: &[Value]) -> Result<Value> {
        if x.len() != self.n() {
            return Err(Error::Argument(format!(
                "expected a {}-tuple, got {} values",
                self.n(),
                x.len()
            )));
        }
        for (k, (d, v)) in self.domains.iter().zip(x).enumerate() {
            if !d.contains(v) {
                return Err(Error::Range {
                    x: v.to_string(),
                    lo: format!("domain of individual {}", k + 1),
                    hi: d.to_string(),
                });
            }
        }
        self.evaluate_unchecked(x)
    }

    pub(crate) fn evaluate_unchecked(&self, x: &[Value]) -> Result<Value> {
        match &self.query.kind {
            QueryKind::Table(table) => table.get(x).cloned().ok_or_else(|| {
                Error::Precondition(format!("query table has no entry for {}", Value::Tuple(x.to_vec())))
            }),
            _ => {
                let (weights, offset) = self.query.affine_form(self.n()).expect("affine kind");
                let mut acc = offset;
                for (w, v) in weights.iter().zip(x) {
                    acc += w * v.expect_num("affine query input")?;
                }
                Ok(Value::Num(acc))
            }
        }
    }

    /// Pins every individual except `i` to `others` (listed in index order,
    /// skipping `i`).
    pub fn substitute(&self, i: usize, others: &[Value]) -> Result<DatasetSpec> {
        self.domain(i)?;
        if others.len() + 1 != self.n() {
            return Err(Error::Argument(format!(
                "expected {} pinned values, got {}",
                self.n() - 1,
                others.len()
            )));
        }
        let mut domains = Vec::with_capacity(self.n());
        let mut pinned = others.iter();
        for (j, d) in self.domains.iter().enumerate() {
            if j == i {
                domains.push(d.clone());
                continue;
            }
            let v = pinned.next().expect("length checked");
            if !d.contains(v) {
                return Err(Error::domain(v, format!("domain of individual {}", j + 1)));
            }
            domains.push(Domain::Finite(FiniteRange::singleton(v.clone())));
        }
        Ok(DatasetSpec {
            domains,
            query: self.query.clone(),
        })
    }

    /// The full tuple `(v_1, .., v_{i-1}, x_i, v_{i+1}, .., v_n)`.
    pub fn assemble(&self, i: usize, x_i: &Value, others: &[Value]) -> Vec<Value> {
        let mut full = Vec::with_capacity(self.n());
        full.extend_from_slice(&others[..i]);
        full.push(x_i.clone());
        full.extend_from_slice(&others[i..]);
        full
    }

    /// The same dataset with every continuous domain replaced by its grid.
    pub fn discretize(&self, step: &Rational) -> Result<DatasetSpec> {
        Ok(DatasetSpec {
            domains: self
                .domains
                .iter()
                .map(|d| d.discretize(step))
                .collect::<Result<_>>()?,
            query: self.query.clone(),
        })
    }

    /// Enumerates the whole domain box (finite domains only).
    pub fn tuples(&self) -> Result<ProductRange> {
        product_range(&self.domains)
    }

    /// Enumerates `x_{-i}` over the other individuals' domains.
    pub fn others(&self, i: usize) -> Result<ProductRange> {
        let rest: Vec<Domain> = self
            .domains
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, d)| d.clone())
            .collect();
        product_range(&rest)
    }
}

fn affine_image(domains: &[Domain], weights: &[Rational], offset: &Rational) -> Result<(Rational, Rational)> {
    let mut lo = offset.clone();
    let mut hi = offset.clone();
    for (k, (d, w)) in domains.iter().zip(weights).enumerate() {
        if w.is_zero() {
            continue;
        }
        let (a, b) = d.numeric_bounds().ok_or_else(|| {
            Error::Argument(format!("affine query needs a numeric domain for individual {}", k + 1))
        })?;
        let (p, q) = min_max(w * &a, w * &b);
        lo += p;
        hi += q;
    }
    Ok((lo, hi))
}

fn table_image(domains: &[Domain], table: &BTreeMap<Vec<Value>, Value>) -> Result<(Rational, Rational)> {
    if table.is_empty() {
        return Err(Error::Argument("query table is empty".into()));
    }
    for out in table.values() {
        out.expect_num("query table output")?;
    }
    if domains.iter().all(Domain::is_finite) {
        for x in product_range(domains)? {
            if !table.contains_key(&x) {
                return Err(Error::Argument(format!(
                    "query table is not total: no entry for {}",
                    Value::Tuple(x)
                )));
            }
        }
    }
    let mut lo: Option<Rational> = None;
    let mut hi: Option<Rational> = None;
    for out in table.values() {
        let r = out.as_rational().expect("checked numeric");
        if lo.as_ref().is_none_or(|l| r < l) {
            lo = Some(r.clone());
        }
        if hi.as_ref().is_none_or(|h| r > h) {
            hi = Some(r.clone());
        }
    }
    Ok((lo.expect("non-empty"), hi.expect("non-empty")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::range::IntervalUnion;
    use crate::value::ratio;

    fn bits(n: usize) -> Vec<Domain> {
        vec![Domain::Finite(FiniteRange::integers(0, 1)); n]
    }

    #[test]
    fn substitute_pins_the_others() {
        let ds = DatasetSpec::new(bits(2), QueryKind::Sum, None).unwrap();
        let pinned = ds.substitute(0, &[Value::int(1)]).unwrap();
        assert_eq!(pinned.domains()[0], Domain::Finite(FiniteRange::integers(0, 1)));
        assert_eq!(pinned.domains()[1], Domain::Finite(FiniteRange::integers(1, 1)));

        let ds3 = DatasetSpec::new(bits(3), QueryKind::Sum, None).unwrap();
        let pinned = ds3.substitute(1, &[Value::int(0), Value::int(1)]).unwrap();
        let free: Vec<usize> = pinned
            .domains()
            .iter()
            .enumerate()
            .filter(|(_, d)| d.as_finite().unwrap().len() > 1)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(free, vec![1]);

        let err = ds3.substitute(1, &[Value::int(7), Value::int(1)]).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn affine_bounds_are_checked() {
        let unit = Domain::Continuous(IntervalUnion::single(int(0), int(1)).unwrap());
        let ds = DatasetSpec::new(vec![unit.clone(); 4], QueryKind::Mean, None).unwrap();
        assert_eq!(ds.query().output_bounds(), (&int(0), &int(1)));
        assert!(DatasetSpec::new(vec![unit.clone(); 2], QueryKind::Sum, Some((int(0), int(1)))).is_err());
        let neg = QueryKind::Affine {
            weights: vec![int(-1), ratio(1, 2)],
            offset: int(3),
        };
        let ds = DatasetSpec::new(vec![unit.clone(); 2], neg, None).unwrap();
        assert_eq!(ds.query().output_bounds(), (&int(2), &ratio(7, 2)));
        assert_eq!(
            ds.evaluate(&[Value::int(1), Value::int(1)]).unwrap(),
            Value::num(ratio(5, 2))
        );
        assert!(ds.evaluate(&[Value::int(2), Value::int(1)]).is_err());
    }

    #[test]
    fn table_queries_must_be_total() {
        let mut table = BTreeMap::new();
        table.insert(vec![Value::int(0)], Value::int(5));
        assert!(DatasetSpec::new(bits(1), QueryKind::Table(table.clone()), None).is_err());
        table.insert(vec![Value::int(1)], Value::int(5));
        let ds = DatasetSpec::new(bits(1), QueryKind::Table(table), None).unwrap();
        assert_eq!(ds.evaluate(&[Value::int(1)]).unwrap(), Value::int(5));
    }
}
