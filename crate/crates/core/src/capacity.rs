//! Memoryless uncertain channels and exact zero-error code search.
//!
//! Two input words of length `k` are confusable when, at every position,
//! some output is possible under both symbols. A zero-error code is an
//! independent set of the confusability graph; the search below returns a
//! maximum one, breaking ties toward the lexicographically smallest list of
//! codewords.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::range::FiniteRange;
use crate::value::Value;

pub const DEFAULT_SEARCH_CAP: u64 = 1_000_000;

/// Each input symbol maps to the non-empty set of outputs it can produce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelSpec {
    input_range: FiniteRange,
    output_map: BTreeMap<Value, FiniteRange>,
}

impl ChannelSpec {
    pub fn new(output_map: BTreeMap<Value, FiniteRange>) -> Result<Self> {
        if output_map.is_empty() {
            return Err(Error::Argument("channel has no inputs".into()));
        }
        if let Some((x, _)) = output_map.iter().find(|(_, ys)| ys.is_empty()) {
            return Err(Error::Argument(format!("input {x} has an empty output set")));
        }
        Ok(ChannelSpec {
            input_range: output_map.keys().cloned().collect(),
            output_map,
        })
    }

    /// A channel where every input has exactly one output.
    pub fn deterministic(map: &BTreeMap<Value, Value>) -> Result<Self> {
        ChannelSpec::new(
            map.iter()
                .map(|(x, y)| (x.clone(), FiniteRange::singleton(y.clone())))
                .collect(),
        )
    }

    pub fn input_range(&self) -> &FiniteRange {
        &self.input_range
    }

    pub fn outputs(&self, x: &Value) -> Option<&FiniteRange> {
        self.output_map.get(x)
    }

    pub fn output_map(&self) -> &BTreeMap<Value, FiniteRange> {
        &self.output_map
    }
}

/// A maximum zero-error code at one block length.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeSearch {
    pub block_length: usize,
    pub code: Vec<Vec<Value>>,
    /// `log2 |code| / k` bits per channel use.
    pub rate: f64,
}

impl CodeSearch {
    pub fn size(&self) -> usize {
        self.code.len()
    }
}

struct Graph {
    words: Vec<Vec<u16>>,
    symbol_confusable: Vec<Vec<bool>>,
}

impl Graph {
    fn adjacent(&self, u: usize, v: usize) -> bool {
        u != v
            && self.words[u]
                .iter()
                .zip(&self.words[v])
                .all(|(&a, &b)| self.symbol_confusable[a as usize][b as usize])
    }

    /// Number of cliques in a greedy clique cover of `cand`; an upper bound
    /// on the independence number of the induced subgraph.
    fn clique_cover_bound(&self, cand: &[usize]) -> usize {
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        'next: for &v in cand {
            for c in cliques.iter_mut() {
                if c.iter().all(|&u| self.adjacent(u, v)) {
                    c.push(v);
                    continue 'next;
                }
            }
            cliques.push(vec![v]);
        }
        cliques.len()
    }
}

struct Search<'g> {
    graph: &'g Graph,
    best: Vec<usize>,
}

impl Search<'_> {
    // Include-first over vertices in index order, replacing the incumbent
    // only on strict improvement: the first maximum set found is the
    // lexicographically smallest one.
    fn run(&mut self, chosen: &mut Vec<usize>, mut cand: Vec<usize>) {
        loop {
            if chosen.len() + self.graph.clique_cover_bound(&cand) <= self.best.len() {
                return;
            }
            if cand.is_empty() {
                self.best = chosen.clone();
                return;
            }
            let v = cand[0];
            let next: Vec<usize> = cand[1..]
                .iter()
                .copied()
                .filter(|&u| !self.graph.adjacent(v, u))
                .collect();
            chosen.push(v);
            self.run(chosen, next);
            chosen.pop();
            cand.remove(0);
        }
    }
}

/// Exact maximum zero-error code of block length `k`. Fails with a
/// resource error when `|inputs|^k` exceeds `cap`.
pub fn zero_error_code_search(channel: &ChannelSpec, k: usize, cap: u64) -> Result<CodeSearch> {
    if k == 0 {
        return Err(Error::Argument("block length must be at least 1".into()));
    }
    let symbols: Vec<&Value> = channel.input_range.iter().collect();
    let m = symbols.len();
    if m > u16::MAX as usize {
        return Err(Error::Resource {
            required: format!("{m} input symbols"),
            cap: u16::MAX as u64,
        });
    }
    let n = (m as u64)
        .checked_pow(k as u32)
        .filter(|&n| n <= cap)
        .ok_or_else(|| Error::Resource {
            required: format!("{m}^{k} words"),
            cap,
        })? as usize;

    let outs: Vec<&FiniteRange> = symbols.iter().map(|x| &channel.output_map[*x]).collect();
    let symbol_confusable: Vec<Vec<bool>> = outs
        .iter()
        .map(|a| outs.iter().map(|b| !a.is_disjoint(b)).collect())
        .collect();
    let words: Vec<Vec<u16>> = (0..n)
        .map(|mut idx| {
            let mut digits = vec![0u16; k];
            for slot in digits.iter_mut().rev() {
                *slot = (idx % m) as u16;
                idx /= m;
            }
            digits
        })
        .collect();
    let graph = Graph {
        words,
        symbol_confusable,
    };
    let mut search = Search {
        graph: &graph,
        best: Vec::new(),
    };
    search.run(&mut Vec::new(), (0..n).collect());

    let code: Vec<Vec<Value>> = search
        .best
        .iter()
        .map(|&w| graph.words[w].iter().map(|&s| symbols[s as usize].clone()).collect())
        .collect();
    let rate = if code.is_empty() {
        0.0
    } else {
        (code.len() as f64).log2() / k as f64
    };
    Ok(CodeSearch {
        block_length: k,
        code,
        rate,
    })
}

/// True when no two distinct codewords are confusable through `channel`.
pub fn is_zero_error_code(channel: &ChannelSpec, code: &[Vec<Value>]) -> bool {
    for (a, u) in code.iter().enumerate() {
        for v in &code[a + 1..] {
            if u == v {
                return false;
            }
            let confusable = u.iter().zip(v).all(|(x, y)| {
                match (channel.outputs(x), channel.outputs(y)) {
                    (Some(p), Some(q)) => !p.is_disjoint(q),
                    _ => false,
                }
            });
            if confusable {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pentagon() -> ChannelSpec {
        ChannelSpec::new(
            (0..5)
                .map(|i| {
                    (
                        Value::int(i),
                        FiniteRange::new([Value::int(i), Value::int((i + 1) % 5)]),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn all_words(ch: &ChannelSpec, k: usize) -> Vec<Vec<Value>> {
        let symbols: Vec<Value> = ch.input_range().iter().cloned().collect();
        let mut words: Vec<Vec<Value>> = vec![vec![]];
        for _ in 0..k {
            words = words
                .into_iter()
                .flat_map(|w| {
                    symbols.iter().map(move |s| {
                        let mut w = w.clone();
                        w.push(s.clone());
                        w
                    })
                })
                .collect();
        }
        words
    }

    /// True when some `size`-subset of `words` is a zero-error code.
    fn some_code_of_size(ch: &ChannelSpec, words: &[Vec<Value>], size: usize) -> bool {
        fn go(ch: &ChannelSpec, words: &[Vec<Value>], start: usize, picked: &mut Vec<Vec<Value>>, size: usize) -> bool {
            if picked.len() == size {
                return true;
            }
            for w in start..words.len() {
                picked.push(words[w].clone());
                if is_zero_error_code(ch, picked) && go(ch, words, w + 1, picked, size) {
                    return true;
                }
                picked.pop();
            }
            false
        }
        go(ch, words, 0, &mut Vec::new(), size)
    }

    /// Independence number by exhaustive subset enumeration.
    fn brute_force_alpha(ch: &ChannelSpec, k: usize) -> usize {
        let words = all_words(ch, k);
        (1..=words.len()).take_while(|&s| some_code_of_size(ch, &words, s)).last().unwrap_or(0)
    }

    #[test]
    fn noiseless_channel_sends_every_symbol() {
        let map: BTreeMap<Value, Value> = (0..4).map(|i| (Value::int(i), Value::int(i))).collect();
        let ch = ChannelSpec::deterministic(&map).unwrap();
        let r = zero_error_code_search(&ch, 1, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r.size(), 4);
        assert_eq!(r.rate, 2.0);
    }

    #[test]
    fn pentagon_matches_brute_force() {
        let ch = pentagon();
        assert_eq!(brute_force_alpha(&ch, 1), 2);
        assert_eq!(brute_force_alpha(&ch, 2), 5);
        let r1 = zero_error_code_search(&ch, 1, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r1.size(), 2);
        assert_eq!(r1.rate, 1.0);
        assert_eq!(r1.code, vec![vec![Value::int(0)], vec![Value::int(2)]]);

        let r2 = zero_error_code_search(&ch, 2, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(r2.size(), 5);
        assert!((r2.rate - 5f64.log2() / 2.0).abs() < 1e-12);
        assert!(is_zero_error_code(&ch, &r2.code));
    }

    #[test]
    fn pentagon_code_sizes_are_super_multiplicative() {
        // Per-letter rates need not grow with k (alpha at k = 3 is 10, a
        // lower rate than k = 2), but concatenating codes never loses size.
        let ch = pentagon();
        let sizes: Vec<usize> = (1..=3)
            .map(|k| zero_error_code_search(&ch, k, DEFAULT_SEARCH_CAP).unwrap().size())
            .collect();
        assert_eq!(sizes, vec![2, 5, 10]);
        assert!(sizes[1] >= sizes[0] * sizes[0]);
        assert!(sizes[2] >= sizes[1] * sizes[0]);
        let r3 = zero_error_code_search(&ch, 3, DEFAULT_SEARCH_CAP).unwrap();
        assert!(is_zero_error_code(&ch, &r3.code));
    }

    #[test]
    fn cap_is_enforced() {
        let err = zero_error_code_search(&pentagon(), 3, 100).unwrap_err();
        assert!(matches!(err, Error::Resource { cap: 100, .. }));
        assert!(err.to_string().contains("5^3"));
        assert!(zero_error_code_search(&pentagon(), 0, 100).is_err());
    }

    #[test]
    fn empty_output_set_is_rejected() {
        let mut m = BTreeMap::new();
        m.insert(Value::int(0), FiniteRange::empty());
        assert!(ChannelSpec::new(m).is_err());
    }
}
