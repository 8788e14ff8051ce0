//! The membership-inference game: an adversary names two individuals, the
//! curator aggregates one of them with `n - 1` others and publishes the
//! mechanism's output for every time step, and the adversary guesses which
//! of the two took part.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{DatasetSpec, QueryKind};
use crate::error::{Error, Result};
use crate::mechanisms::{synthesize_quantizer, LevelRule, QuantizerSpec, SynthesisOptions};
use crate::range::{Domain, IntervalUnion};
use crate::value::{from_f64, int, to_f64};

/// Per-individual time series, all of the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfilePanel {
    ids: Vec<String>,
    profiles: Vec<Vec<f64>>,
}

impl ProfilePanel {
    pub fn new(ids: Vec<String>, profiles: Vec<Vec<f64>>) -> Result<Self> {
        if ids.is_empty() || ids.len() != profiles.len() {
            return Err(Error::Argument(format!(
                "{} ids for {} profiles; a panel needs at least one individual",
                ids.len(),
                profiles.len()
            )));
        }
        let horizon = profiles[0].len();
        if horizon == 0 {
            return Err(Error::Argument("profiles are empty".into()));
        }
        for (k, p) in profiles.iter().enumerate() {
            if p.len() != horizon {
                return Err(Error::Argument(format!(
                    "profile {} has {} steps, expected {horizon}",
                    ids[k],
                    p.len()
                )));
            }
            if let Some(v) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::Argument(format!("profile {} has an invalid value {v}", ids[k])));
            }
        }
        Ok(ProfilePanel { ids, profiles })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.profiles[0].len()
    }

    pub fn max_value(&self) -> f64 {
        self.profiles.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// `time,id1,id2,...` header followed by one row per time step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for id in &self.ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for t in 0..self.horizon() {
            out.push_str(&t.to_string());
            for p in &self.profiles {
                out.push(',');
                out.push_str(&p[t].to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Daily-pattern profiles: a base load, a morning and an evening activity
/// bump at individual-specific times, and bounded noise, clamped at zero.
pub fn synthesize_panel(count: usize, horizon: usize, seed: u64) -> Result<ProfilePanel> {
    if count < 2 || horizon < 2 {
        return Err(Error::Argument("a synthetic panel needs count >= 2 and horizon >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = horizon as f64;
    let mut profiles = Vec::with_capacity(count);
    for _ in 0..count {
        let base = rng.random_range(0.1..0.5);
        let bumps: Vec<(f64, f64, f64)> = [(0.25, 0.42), (0.70, 0.88)]
            .iter()
            .map(|&(from, to)| {
                (
                    rng.random_range(0.5..2.0),
                    rng.random_range(from * h..to * h),
                    rng.random_range(0.02 * h..0.06 * h),
                )
            })
            .collect();
        let profile = (0..horizon)
            .map(|t| {
                let t = t as f64;
                let activity: f64 = bumps
                    .iter()
                    .map(|(a, c, w)| a * (-0.5 * ((t - c) / w).powi(2)).exp())
                    .sum();
                (base + activity + rng.random_range(-0.05..0.05)).max(0.0)
            })
            .collect();
        profiles.push(profile);
    }
    let ids = (1..=count).map(|k| format!("h{k}")).collect();
    ProfilePanel::new(ids, profiles)
}

fn cell_error(row: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Cell {
        row,
        col,
        message: message.into(),
    }
}

/// Reads a `time,id1,id2,...` CSV with one row per time step. Errors name
/// 1-based data rows and 1-based columns (the time column is column 1).
pub fn ingest_csv(path: &Path) -> Result<ProfilePanel> {
    let text = std::fs::read_to_string(path)?;
    parse_panel_csv(&text)
}

pub fn parse_panel_csv(text: &str) -> Result<ProfilePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::Format("panel file is empty".into())),
        Some(r) => r.map_err(|e| Error::Format(e.to_string()))?,
    };
    if header.get(0) != Some("time") || header.len() < 2 {
        return Err(Error::Format("header must be `time,id1,id2,...`".into()));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if let Some(k) = ids.iter().position(String::is_empty) {
        return Err(Error::Format(format!("header column {} has an empty id", k + 2)));
    }
    let mut profiles = vec![Vec::new(); ids.len()];
    for (r, record) in records.enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        if record.len() != header.len() {
            return Err(cell_error(
                row,
                record.len().min(header.len()) + 1,
                format!("row has {} cells, header has {}", record.len(), header.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate().skip(1) {
            if cell.is_empty() {
                return Err(cell_error(row, c + 1, "missing value"));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| cell_error(row, c + 1, format!("`{cell}` is not a number")))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(cell_error(row, c + 1, format!("`{cell}` is not a non-negative value")));
            }
            profiles[c - 1].push(v);
        }
    }
    if profiles[0].is_empty() {
        return Err(Error::Format("panel file has no data rows".into()));
    }
    ProfilePanel::new(ids, profiles)
}

/// How the adversary picks between its two candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Policy {
    /// Higher Pearson correlation with the published series.
    Correlation,
    /// Smaller squared distance to the published series.
    Mse,
    /// More relative peaks shared with the published series.
    Peaks,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Correlation, Policy::Mse, Policy::Peaks];
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Correlation => "correlation",
            Policy::Mse => "mse",
            Policy::Peaks => "peaks",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(Policy::Correlation),
            "mse" => Ok(Policy::Mse),
            "peaks" => Ok(Policy::Peaks),
            _ => Err(Error::Argument(format!(
                "unknown policy `{s}` (expected correlation, mse or peaks)"
            ))),
        }
    }
}

/// A policy's guess and whether it had to break a tie or fall back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub guess: usize,
    pub tie: bool,
    pub fallback: bool,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let denom = (saa * sbb).sqrt();
    (denom > 0.0).then(|| sab / denom)
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        (s[m - 1] + s[m]) / 2.0
    } else {
        s[m]
    }
}

/// Strict local maxima at least 1.2 times the series median.
pub fn relative_peaks(x: &[f64]) -> Vec<usize> {
    if x.len() < 3 {
        return Vec::new();
    }
    let floor = 1.2 * median(x);
    (1..x.len() - 1)
        .filter(|&t| x[t] > x[t - 1] && x[t] > x[t + 1] && x[t] >= floor)
        .collect()
}

/// Peaks of `candidate` with a peak of `published` within one step.
fn shared_peaks(candidate: &[usize], published: &[usize]) -> usize {
    candidate
        .iter()
        .filter(|&&t| published.iter().any(|&s| s.abs_diff(t) <= 1))
        .count()
}

/// Picks the larger score, choosing candidate 0 on ties.
fn pick_max(s0: f64, s1: f64) -> (usize, bool) {
    if s1 > s0 {
        (1, false)
    } else {
        (0, s0 == s1)
    }
}

pub fn policy_decide(policy: Policy, candidate0: &[f64], candidate1: &[f64], published: &[f64]) -> Result<Decision> {
    let t = published.len();
    if candidate0.len() != t || candidate1.len() != t {
        return Err(Error::Argument("candidate and published series must share the horizon".into()));
    }
    let mse = |fallback| {
        let (guess, tie) = pick_max(
            -squared_distance(candidate0, published),
            -squared_distance(candidate1, published),
        );
        Decision { guess, tie, fallback }
    };
    Ok(match policy {
        Policy::Mse => mse(false),
        Policy::Correlation => match (pearson(candidate0, published), pearson(candidate1, published)) {
            (Some(r0), Some(r1)) => {
                let (guess, tie) = pick_max(r0, r1);
                Decision {
                    guess,
                    tie,
                    fallback: false,
                }
            }
            _ => mse(true),
        },
        Policy::Peaks => {
            let py = relative_peaks(published);
            let (guess, tie) = pick_max(
                shared_peaks(&relative_peaks(candidate0), &py) as f64,
                shared_peaks(&relative_peaks(candidate1), &py) as f64,
            );
            Decision {
                guess,
                tie,
                fallback: false,
            }
        }
    })
}

/// What the curator publishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MechanismChoice {
    /// A quantizer synthesized for the mean query at this budget.
    Quantized { epsilon: f64 },
    /// The exact mean (no privacy).
    Identity,
    /// A fixed output (no information).
    Constant,
}

impl MechanismChoice {
    /// The nominal budget: infinite for the identity, zero for a constant.
    pub fn epsilon(&self) -> f64 {
        match self {
            MechanismChoice::Quantized { epsilon } => *epsilon,
            MechanismChoice::Identity => f64::INFINITY,
            MechanismChoice::Constant => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameConfig {
    /// Size of the aggregate.
    pub n: usize,
    pub mechanism: MechanismChoice,
    /// Number of leading time steps used; `None` uses the whole panel.
    pub horizon: Option<usize>,
    pub trials: u64,
    pub seed: u64,
    pub policy: Policy,
    /// Hands the candidates to the adversary in swapped order.
    pub relabel: bool,
    pub rule: LevelRule,
}

impl GameConfig {
    pub fn new(n: usize, mechanism: MechanismChoice, trials: u64, seed: u64, policy: Policy) -> Self {
        GameConfig {
            n,
            mechanism,
            horizon: None,
            trials,
            seed,
            policy,
            relabel: false,
            rule: LevelRule::Guarded,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameResult {
    pub policy: Policy,
    pub n: usize,
    pub epsilon: f64,
    pub trials: u64,
    pub wins: u64,
    /// Trials decided by the tie-break toward candidate 0.
    pub ties: u64,
    /// Correlation trials that fell back to squared error.
    pub fallbacks: u64,
    /// `2 |wins / trials - 1/2|`.
    pub adv: f64,
    /// 95% half-width of `adv`.
    pub ci_halfwidth: f64,
    /// Quantizer levels, when one was used.
    pub levels: Option<u64>,
}

impl GameResult {
    pub const CSV_HEADER: &'static str = "policy,n,epsilon,trials,adv,ci_halfwidth";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:?},{},{:?},{:?}",
            self.policy, self.n, self.epsilon, self.trials, self.adv, self.ci_halfwidth
        )
    }
}

/// The quantizer the curator uses for the mean of `n` values in
/// `[0, panel max]`.
pub fn game_quantizer(panel: &ProfilePanel, n: usize, epsilon: f64, rule: LevelRule) -> Result<QuantizerSpec> {
    let hi = from_f64(panel.max_value())?;
    if hi <= int(0) {
        return Err(Error::Precondition("panel is identically zero".into()));
    }
    let domain = Domain::Continuous(IntervalUnion::single(int(0), hi)?);
    let dataset = DatasetSpec::new(vec![domain; n], QueryKind::Mean, None)?;
    let opts = SynthesisOptions {
        rule,
        ..Default::default()
    };
    Ok(synthesize_quantizer(&dataset, epsilon, &opts)?.quantizer)
}

struct Publisher {
    quantizer: Option<(QuantizerSpec, f64, f64, Vec<f64>)>,
    constant: bool,
}

impl Publisher {
    fn publish(&self, mean: f64) -> f64 {
        if self.constant {
            return 0.0;
        }
        match &self.quantizer {
            None => mean,
            Some((q, lo, hi, symbols)) => {
                let k = q.cell_index_f64(mean.clamp(*lo, *hi)).expect("clamped into range");
                symbols[k as usize]
            }
        }
    }
}

/// Plays `cfg.trials` independent rounds. Round `r` draws from its own
/// stream of a seeded generator, so results do not depend on threading.
pub fn play_game(panel: &ProfilePanel, cfg: &GameConfig) -> Result<GameResult> {
    if cfg.n == 0 || cfg.trials == 0 {
        return Err(Error::Argument("n and trials must be at least 1".into()));
    }
    if panel.len() < cfg.n + 1 {
        return Err(Error::Argument(format!(
            "panel has {} individuals; the game needs at least n + 1 = {}",
            panel.len(),
            cfg.n + 1
        )));
    }
    let horizon = cfg.horizon.unwrap_or(panel.horizon());
    if horizon < 2 || horizon > panel.horizon() {
        return Err(Error::Argument(format!(
            "horizon {horizon} must be in 2..={}",
            panel.horizon()
        )));
    }
    let publisher = match cfg.mechanism {
        MechanismChoice::Quantized { epsilon } => {
            let q = game_quantizer(panel, cfg.n, epsilon, cfg.rule)?;
            let symbols = (0..q.levels())
                .map(|k| q.symbol(k).to_f64().expect("midpoint symbols"))
                .collect();
            let (lo, hi) = (to_f64(q.lo()), to_f64(q.hi()));
            Publisher {
                quantizer: Some((q, lo, hi, symbols)),
                constant: false,
            }
        }
        MechanismChoice::Identity => Publisher {
            quantizer: None,
            constant: false,
        },
        MechanismChoice::Constant => Publisher {
            quantizer: None,
            constant: true,
        },
    };
    let m = panel.len();
    let profiles = panel.profiles();
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(trial);
            let pair = sample(&mut rng, m, 2);
            let (i0, i1) = (pair.index(0), pair.index(1));
            let j = rng.random_range(0..2usize);
            let chosen = if j == 0 { i0 } else { i1 };
            let rest: Vec<usize> = (0..m).filter(|&k| k != i0 && k != i1).collect();
            let others: Vec<usize> = sample(&mut rng, rest.len(), cfg.n - 1)
                .into_iter()
                .map(|k| rest[k])
                .collect();
            let published: Vec<f64> = (0..horizon)
                .map(|t| {
                    let total = profiles[chosen][t] + others.iter().map(|&k| profiles[k][t]).sum::<f64>();
                    publisher.publish(total / cfg.n as f64)
                })
                .collect();
            let (c0, c1) = (&profiles[i0][..horizon], &profiles[i1][..horizon]);
            let d = if cfg.relabel {
                let d = policy_decide(cfg.policy, c1, c0, &published)?;
                Decision {
                    guess: 1 - d.guess,
                    ..d
                }
            } else {
                policy_decide(cfg.policy, c0, c1, &published)?
            };
            Ok((d.guess == j, d.tie, d.fallback))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = |f: fn(&(bool, bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    let wins = count(|o| o.0);
    let t = cfg.trials as f64;
    let p = wins as f64 / t;
    Ok(GameResult {
        policy: cfg.policy,
        n: cfg.n,
        epsilon: cfg.mechanism.epsilon(),
        trials: cfg.trials,
        wins,
        ties: count(|o| o.1),
        fallbacks: count(|o| o.2),
        adv: 2.0 * (p - 0.5).abs(),
        ci_halfwidth: 2.0 * 1.96 * (p * (1.0 - p) / t).sqrt(),
        levels: publisher.quantizer.as_ref().map(|(q, ..)| q.levels()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decide_examples() {
        let c0 = [1.0, 3.0, 2.0];
        let c1 = [2.0, 1.0, 4.0];
        for policy in Policy::ALL {
            assert_eq!(policy_decide(policy, &c0, &c1, &c0).unwrap().guess, 0, "{policy}");
        }
        let shifted: Vec<f64> = c1.iter().map(|v| v + 10.0).collect();
        assert_eq!(policy_decide(Policy::Correlation, &c0, &c1, &shifted).unwrap().guess, 1);
        // Squared distances 329 vs 300: the shift dominates, mse picks 1 here.
        assert_eq!(policy_decide(Policy::Mse, &c0, &c1, &shifted).unwrap().guess, 1);

        let flat = [1.0; 3];
        let d = policy_decide(Policy::Peaks, &c0, &c1, &flat).unwrap();
        assert_eq!((d.guess, d.tie), (0, true));
        let d = policy_decide(Policy::Correlation, &c0, &c1, &flat).unwrap();
        assert!(d.fallback);
    }

    #[test]
    fn peaks_need_height_and_strictness() {
        let x = [2.0, 2.5, 2.0, 5.0, 5.0, 2.0, 9.0, 2.0];
        assert_eq!(relative_peaks(&x), vec![6]);
        assert_eq!(shared_peaks(&[3, 6], &[7]), 1);
    }

    #[test]
    fn synthetic_panels_are_deterministic_and_non_negative() {
        let a = synthesize_panel(2, 48, 1).unwrap();
        assert_eq!(a, synthesize_panel(2, 48, 1).unwrap());
        assert!(a.profiles().iter().flatten().all(|v| *v >= 0.0));
        assert_ne!(synthesize_panel(10, 48, 1).unwrap(), synthesize_panel(10, 48, 2).unwrap());
        assert!(synthesize_panel(1, 48, 1).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let p = parse_panel_csv("time,a,b\n0,1,2\n1,3,4\n2,5,6\n").unwrap();
        assert_eq!((p.len(), p.horizon()), (2, 3));
        assert_eq!(parse_panel_csv(&p.to_csv()).unwrap(), p);

        let err = parse_panel_csv("time,a,b\n0,1,2\n1,3,abc\n").unwrap_err();
        assert!(matches!(err, Error::Cell { row: 2, col: 3, .. }), "{err}");
        assert!(matches!(parse_panel_csv("").unwrap_err(), Error::Format(_)));
        assert!(matches!(parse_panel_csv("id,a\n0,1\n").unwrap_err(), Error::Format(_)));
        assert!(matches!(
            parse_panel_csv("time,a,b\n0,1\n").unwrap_err(),
            Error::Cell { row: 1, col: 3, .. }
        ));
        assert!(matches!(
            parse_panel_csv("time,a\n0,\n").unwrap_err(),
            Error::Cell { row: 1, col: 2, .. }
        ));
    }

    #[test]
    fn game_is_deterministic_and_bounded() {
        let panel = synthesize_panel(30, 48, 5).unwrap();
        let cfg = GameConfig::new(2, MechanismChoice::Quantized { epsilon: 2.0 }, 300, 9, Policy::Correlation);
        let a = play_game(&panel, &cfg).unwrap();
        assert_eq!(a, play_game(&panel, &cfg).unwrap());
        assert!((0.0..=1.0).contains(&a.adv));
        assert_eq!(a.levels, Some(6));
        assert!(play_game(&synthesize_panel(2, 48, 5).unwrap(), &cfg).is_err());
    }

    #[test]
    fn identity_and_constant_extremes() {
        let panel = synthesize_panel(40, 48, 3).unwrap();
        let id = GameConfig::new(1, MechanismChoice::Identity, 400, 1, Policy::Mse);
        assert!(play_game(&panel, &id).unwrap().adv > 0.95);
        let c = GameConfig::new(1, MechanismChoice::Constant, 400, 1, Policy::Correlation);
        let r = play_game(&panel, &c).unwrap();
        assert!(r.adv <= r.ci_halfwidth + 0.05, "{r:?}");
        assert_eq!(r.fallbacks, 400);
    }
}
