//! Compact text forms for domains, queries, mechanisms, channels, relations,
//! priors and panels, shared by the command line and the Python bindings.
//!
//! ```text
//! domains    0,1;0..1;0..0.3|0.7..1     individuals split by ';'
//! query      mean | sum | affine:1,2:0.5 | table:0 0=0|0 1=1|1 0=1|1 1=2
//! mechanism  identity | constant:c | quantizer:4:0..1[:a|b|c|d]
//!            compose(m,m,...) | post(m,a->b|c->d)
//! channel    0=a|b;1=b|c                input '=' outputs separated by '|'
//! relation   1:a,2:a,3:b                x ':' y pairs
//! prior      uniform | 0:0.25,1:0.75 | density:0..1:1.5,0.5
//! panel      synthetic:300x48:1 | csv:path/to/file.csv
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::capacity::ChannelSpec;
use crate::dataset::QueryKind;
use crate::error::{Error, Result};
use crate::games::{ingest_csv, synthesize_panel, ProfilePanel};
use crate::measures::PriorSpec;
use crate::mechanisms::{MechanismSpec, QuantizerSpec};
use crate::range::{Domain, FiniteRange, IntervalUnion, JointRelation};
use crate::value::{format_rational, parse_rational, Rational, Value};

fn format_error(what: &str, input: &str, detail: impl std::fmt::Display) -> Error {
    Error::Format(format!("bad {what} `{input}`: {detail}"))
}

/// Splits on `sep` outside parentheses.
fn split_top(s: &str, sep: char) -> Result<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (k, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(format_error("expression", s, "unbalanced ')'"));
                }
            }
            c if c == sep && depth == 0 => {
                parts.push(&s[start..k]);
                start = k + c.len_utf8();
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(format_error("expression", s, "unbalanced '('"));
    }
    parts.push(&s[start..]);
    Ok(parts)
}

/// A number, a symbol, or a parenthesised space-separated tuple.
pub fn parse_value(s: &str) -> Result<Value> {
    let t = s.trim();
    if t.is_empty() {
        return Err(format_error("value", s, "empty"));
    }
    if let Some(inner) = t.strip_prefix('(') {
        let inner = inner
            .strip_suffix(')')
            .ok_or_else(|| format_error("value", s, "missing ')'"))?;
        let items = split_top(inner, ' ')?
            .into_iter()
            .filter(|p| !p.trim().is_empty())
            .map(parse_value)
            .collect::<Result<_>>()?;
        return Ok(Value::Tuple(items));
    }
    if t.contains(['(', ')', ',', ';', '|', '=']) {
        return Err(format_error("value", s, "reserved character"));
    }
    Ok(Value::parse(t))
}

fn parse_interval_union(s: &str) -> Result<IntervalUnion> {
    let pairs = s
        .split('|')
        .map(|part| {
            let (lo, hi) = part
                .split_once("..")
                .ok_or_else(|| format_error("interval", part, "expected lo..hi"))?;
            Ok((parse_rational(lo)?, parse_rational(hi)?))
        })
        .collect::<Result<Vec<_>>>()?;
    IntervalUnion::from_pairs(pairs)
}

pub fn parse_domain(s: &str) -> Result<Domain> {
    let t = s.trim();
    if t.contains("..") {
        Ok(Domain::Continuous(parse_interval_union(t)?))
    } else {
        let values: Vec<Value> = t.split(',').map(parse_value).collect::<Result<_>>()?;
        Ok(Domain::Finite(FiniteRange::new(values)))
    }
}

/// `;`-separated individuals.
pub fn parse_domains(s: &str) -> Result<Vec<Domain>> {
    if s.trim().is_empty() {
        return Err(format_error("domains", s, "empty"));
    }
    s.split(';').map(parse_domain).collect()
}

pub fn format_domain(d: &Domain) -> String {
    match d {
        Domain::Finite(r) => r.iter().map(Value::to_string).collect::<Vec<_>>().join(","),
        Domain::Continuous(iv) => iv
            .intervals()
            .iter()
            .map(|p| format!("{}..{}", format_rational(p.lo()), format_rational(p.hi())))
            .collect::<Vec<_>>()
            .join("|"),
    }
}

pub fn format_domains(ds: &[Domain]) -> String {
    ds.iter().map(format_domain).collect::<Vec<_>>().join(";")
}

fn parse_rationals(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(parse_rational).collect()
}

pub fn parse_query(s: &str) -> Result<QueryKind> {
    let t = s.trim();
    match t {
        "mean" => return Ok(QueryKind::Mean),
        "sum" => return Ok(QueryKind::Sum),
        _ => {}
    }
    if let Some(rest) = t.strip_prefix("affine:") {
        let (w, offset) = match rest.split_once(':') {
            Some((w, o)) => (w, parse_rational(o)?),
            None => (rest, Rational::from_integer(0.into())),
        };
        return Ok(QueryKind::Affine {
            weights: parse_rationals(w)?,
            offset,
        });
    }
    if let Some(rest) = t.strip_prefix("table:") {
        let mut table = BTreeMap::new();
        for entry in rest.split('|') {
            let (x, y) = entry
                .split_once('=')
                .ok_or_else(|| format_error("table entry", entry, "expected `x1 x2=y`"))?;
            let x: Vec<Value> = x.split_whitespace().map(parse_value).collect::<Result<_>>()?;
            if table.insert(x, parse_value(y)?).is_some() {
                return Err(format_error("table entry", entry, "duplicate input"));
            }
        }
        return Ok(QueryKind::Table(table));
    }
    Err(format_error(
        "query",
        s,
        "expected mean, sum, affine:w1,w2,...[:offset] or table:...",
    ))
}

fn call<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

pub fn parse_mechanism(s: &str) -> Result<MechanismSpec> {
    let t = s.trim();
    if t == "identity" {
        return Ok(MechanismSpec::Identity);
    }
    if let Some(v) = t.strip_prefix("constant:") {
        return Ok(MechanismSpec::Constant(parse_value(v)?));
    }
    if let Some(rest) = t.strip_prefix("quantizer:") {
        let mut parts = rest.splitn(3, ':');
        let levels: u64 = parts
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| format_error("quantizer levels", rest, e))?;
        let range = parts
            .next()
            .ok_or_else(|| format_error("quantizer", t, "expected quantizer:q:lo..hi"))?;
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| format_error("quantizer range", range, "expected lo..hi"))?;
        let mut q = QuantizerSpec::new(levels, parse_rational(lo)?, parse_rational(hi)?)?;
        if let Some(labels) = parts.next() {
            q = q.with_labels(labels.split('|').map(parse_value).collect::<Result<_>>()?)?;
        }
        return Ok(MechanismSpec::Quantizer(q));
    }
    if let Some(inner) = call(t, "compose") {
        let children = split_top(inner, ',')?
            .into_iter()
            .map(parse_mechanism)
            .collect::<Result<_>>()?;
        let m = MechanismSpec::Compose(children);
        m.validate()?;
        return Ok(m);
    }
    if let Some(inner) = call(t, "post") {
        let parts = split_top(inner, ',')?;
        let [mech, map] = parts.as_slice() else {
            return Err(format_error("post-processing", t, "expected post(mechanism,a->b|...)"));
        };
        let mut g = BTreeMap::new();
        for entry in split_top(map, '|')? {
            let (a, b) = entry
                .split_once("->")
                .ok_or_else(|| format_error("map entry", entry, "expected a->b"))?;
            g.insert(parse_value(a)?, parse_value(b)?);
        }
        return MechanismSpec::post_process(parse_mechanism(mech)?, g);
    }
    Err(format_error(
        "mechanism",
        s,
        "expected identity, constant:c, quantizer:q:lo..hi, compose(...) or post(...)",
    ))
}

/// `x=y1|y2;...`: each input with its possible outputs.
pub fn parse_channel(s: &str) -> Result<ChannelSpec> {
    let mut map = BTreeMap::new();
    for entry in s.split(';') {
        let (x, ys) = entry
            .split_once('=')
            .ok_or_else(|| format_error("channel entry", entry, "expected x=y1|y2"))?;
        let outs: FiniteRange = ys.split('|').map(parse_value).collect::<Result<_>>()?;
        if map.insert(parse_value(x)?, outs).is_some() {
            return Err(format_error("channel entry", entry, "duplicate input"));
        }
    }
    ChannelSpec::new(map)
}

/// `x:y,...` pairs of a joint range.
pub fn parse_relation(s: &str) -> Result<JointRelation> {
    let pairs = split_top(s, ',')?
        .into_iter()
        .map(|p| {
            let (x, y) = p
                .split_once(':')
                .ok_or_else(|| format_error("relation pair", p, "expected x:y"))?;
            Ok((parse_value(x)?, parse_value(y)?))
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(format_error("relation", s, "empty"));
    }
    Ok(JointRelation::new(pairs))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|e| format_error("number", s, e))
}

/// `uniform` takes its support from `domain`.
pub fn parse_prior(s: &str, domain: &Domain) -> Result<PriorSpec> {
    let t = s.trim();
    if t == "uniform" {
        return match domain {
            Domain::Finite(r) => PriorSpec::uniform_discrete(r),
            Domain::Continuous(iv) => {
                let [piece] = iv.intervals() else {
                    return Err(format_error("prior", s, "uniform density needs a single interval"));
                };
                PriorSpec::uniform_density(piece.lo().clone(), piece.hi().clone())
            }
        };
    }
    if let Some(rest) = t.strip_prefix("density:") {
        let (range, ds) = rest
            .split_once(':')
            .ok_or_else(|| format_error("prior", s, "expected density:lo..hi:d1,d2"))?;
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| format_error("prior range", range, "expected lo..hi"))?;
        let densities = ds.split(',').map(parse_f64).collect::<Result<_>>()?;
        return PriorSpec::density(parse_rational(lo)?, parse_rational(hi)?, densities);
    }
    let masses = t
        .split(',')
        .map(|p| {
            let (v, m) = p
                .split_once(':')
                .ok_or_else(|| format_error("prior mass", p, "expected value:mass"))?;
            Ok((parse_value(v)?, parse_f64(m)?))
        })
        .collect::<Result<Vec<_>>>()?;
    PriorSpec::discrete(masses)
}

/// Where a game's profiles come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PanelSource {
    Synthetic { count: usize, horizon: usize, seed: u64 },
    Csv(PathBuf),
}

impl PanelSource {
    pub fn load(&self) -> Result<ProfilePanel> {
        match self {
            PanelSource::Synthetic { count, horizon, seed } => synthesize_panel(*count, *horizon, *seed),
            PanelSource::Csv(path) => ingest_csv(path),
        }
    }
}

pub fn parse_panel_source(s: &str) -> Result<PanelSource> {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("synthetic:") {
        let bad = || format_error("panel", s, "expected synthetic:COUNTxHORIZON:SEED");
        let (shape, seed) = rest.split_once(':').ok_or_else(bad)?;
        let (count, horizon) = shape.split_once('x').ok_or_else(bad)?;
        return Ok(PanelSource::Synthetic {
            count: count.parse().map_err(|_| bad())?,
            horizon: horizon.parse().map_err(|_| bad())?,
            seed: seed.parse().map_err(|_| bad())?,
        });
    }
    let path = t.strip_prefix("csv:").unwrap_or(t);
    if path.is_empty() {
        return Err(format_error("panel", s, "empty path"));
    }
    Ok(PanelSource::Csv(PathBuf::from(path)))
}
