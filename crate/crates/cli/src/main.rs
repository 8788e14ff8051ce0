use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use noiseless_core::auditor::{self, AuditOptions, DEFAULT_TRIALS};
use noiseless_core::capacity::{zero_error_code_search, DEFAULT_SEARCH_CAP};
use noiseless_core::games::{play_game, GameConfig, GameResult, MechanismChoice, Policy};
use noiseless_core::measures::{
    differential_entropy0, hartley_entropy, information_i0, leakage_l0, maximal_leakage, maximin_info,
    symmetrized_leakage, Direction,
};
use noiseless_core::mechanisms::{
    synthesize_levels, synthesize_quantizer, LevelRule, SensitivityResult, SynthesisOptions,
};
use noiseless_core::text::{
    parse_channel, parse_domains, parse_mechanism, parse_panel_source, parse_prior, parse_query, parse_relation,
    parse_value,
};
use noiseless_core::value::{format_rational, parse_rational};
use noiseless_core::{DatasetSpec, Error, IntervalUnion, Result, Value};

#[derive(Parser, Debug)]
#[command(name = "noiseless", version, about = "Noiseless privacy: synthesis, auditing, measures and games")]
struct Cli {
    /// Flat `key = value` file supplying flags not given on the command line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact privacy budget of a mechanism on a dataset.
    Audit(AuditArgs),
    /// Quantizer levels for a privacy budget.
    Synth(SynthArgs),
    /// Non-stochastic information measures of a joint range.
    Measure(MeasureArgs),
    /// Optimal test between two values of one individual's datum.
    Hypothesis(HypothesisArgs),
    /// Maximum zero-error code of a memoryless channel.
    Capacity(CapacityArgs),
    /// Monte Carlo check of the estimation-error lower bound.
    T4check(T4Args),
    /// Membership-inference game, swept over policies, n and epsilon.
    Game(GameArgs),
    /// Write a profile panel as CSV.
    Panel(PanelArgs),
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Individuals split by ';', each a comma list or `lo..hi`.
    #[arg(long)]
    domains: String,
    /// mean | sum | affine:w1,w2,...[:offset] | table:...
    #[arg(long)]
    query: String,
}

impl DatasetArgs {
    fn dataset(&self) -> Result<DatasetSpec> {
        DatasetSpec::new(parse_domains(&self.domains)?, parse_query(&self.query)?, None)
    }
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    mech: String,
    /// Grid step for continuous domains without an exact path.
    #[arg(long)]
    grid_step: Option<String>,
    /// Use the grid even where an exact count is available.
    #[arg(long)]
    force_grid: bool,
    /// Audit local noiseless privacy (per-individual releases).
    #[arg(long)]
    local: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Guarded,
    Stated,
}

impl From<RuleArg> for LevelRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Guarded => LevelRule::Guarded,
            RuleArg::Stated => LevelRule::Stated,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    ymin: Option<String>,
    #[arg(long)]
    ymax: Option<String>,
    #[arg(long)]
    sens: Option<String>,
    /// Derive range and sensitivity from a dataset instead.
    #[arg(long)]
    domains: Option<String>,
    #[arg(long)]
    query: Option<String>,
    #[arg(long, value_enum, default_value_t = RuleArg::Guarded)]
    rule: RuleArg,
    #[arg(long, default_value_t = 1 << 20)]
    max_levels: u64,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Pairs `x:y,...` of a joint range.
    #[arg(long)]
    relation: Option<String>,
    /// Prior on x for maximal leakage (relation must be a function of x).
    #[arg(long)]
    prior: Option<String>,
    /// Interval union `lo..hi|lo..hi` for the differential 0-entropy.
    #[arg(long)]
    interval: Option<String>,
}

#[derive(Args, Debug)]
struct PinnedArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    mech: String,
    /// 1-based index of the individual under attack.
    #[arg(long)]
    individual: usize,
    /// The other individuals' data, comma separated in index order.
    #[arg(long, default_value = "")]
    others: String,
}

impl PinnedArgs {
    fn index(&self, n: usize) -> Result<usize> {
        if self.individual == 0 || self.individual > n {
            return Err(Error::Argument(format!("--individual must be in 1..={n}")));
        }
        Ok(self.individual - 1)
    }

    fn others(&self) -> Result<Vec<Value>> {
        if self.others.trim().is_empty() {
            return Ok(Vec::new());
        }
        self.others.split(',').map(parse_value).collect()
    }
}

#[derive(Args, Debug)]
struct HypothesisArgs {
    #[command(flatten)]
    pinned: PinnedArgs,
    #[arg(long)]
    xa: String,
    #[arg(long)]
    xb: String,
}

#[derive(Args, Debug)]
struct CapacityArgs {
    /// `x=y1|y2;...`
    #[arg(long)]
    channel: String,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_SEARCH_CAP)]
    cap: u64,
}

#[derive(Args, Debug)]
struct T4Args {
    #[command(flatten)]
    pinned: PinnedArgs,
    #[arg(long, default_value = "uniform")]
    prior: String,
    #[arg(long)]
    p: u32,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MechArg {
    Quantized,
    Identity,
    Constant,
}

#[derive(Args, Debug)]
struct GameArgs {
    /// One or more of correlation, mse, peaks.
    #[arg(long, value_delimiter = ',', required = true)]
    policy: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Budgets for the quantized mechanism.
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long, value_enum, default_value_t = MechArg::Quantized)]
    mechanism: MechArg,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// synthetic:COUNTxHORIZON:SEED or csv:PATH
    #[arg(long)]
    panel: String,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value_t = RuleArg::Guarded)]
    rule: RuleArg,
    /// Hand the candidates to the adversary in swapped order.
    #[arg(long)]
    relabel: bool,
}

#[derive(Args, Debug)]
struct PanelArgs {
    #[arg(long)]
    panel: String,
}

/// Appends `--key=value` for every config entry whose flag is absent.
fn merge_config(argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let path = match argv[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => argv.get(pos + 1).cloned().ok_or("--config needs a path")?,
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut out = argv.clone();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", k + 1))?;
        let flag = format!("--{}", key.trim().replace('_', "-"));
        let present = argv.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
        if !present {
            let value = value.trim();
            if value == "true" {
                out.push(flag);
            } else {
                out.push(format!("{flag}={value}"));
            }
        }
    }
    Ok(out)
}

fn rational(flag: &str, s: &Option<String>) -> Result<noiseless_core::Rational> {
    parse_rational(s.as_deref().ok_or_else(|| Error::Argument(format!("--{flag} is required")))?)
}

fn run_audit(a: &AuditArgs, format: Format) -> Result<String> {
    let ds = a.data.dataset()?;
    let mech = parse_mechanism(&a.mech)?;
    let opts = AuditOptions {
        grid_step: a.grid_step.as_deref().map(parse_rational).transpose()?,
        force_grid: a.force_grid,
        ..Default::default()
    };
    let report = if a.local {
        auditor::audit_local(&ds, &mech, &opts)?
    } else {
        auditor::audit(&ds, &mech, &opts)?
    };
    Ok(match format {
        Format::Text => report.to_string(),
        Format::Csv => report.csv_rows(),
    })
}

fn run_synth(a: &SynthArgs, format: Format) -> Result<String> {
    let opts = SynthesisOptions {
        rule: a.rule.into(),
        max_levels: a.max_levels,
        ..Default::default()
    };
    let (levels, lo, hi, sens, notice) = match (&a.domains, &a.query) {
        (Some(d), Some(q)) => {
            let ds = DatasetSpec::new(parse_domains(d)?, parse_query(q)?, None)?;
            let s = synthesize_quantizer(&ds, a.epsilon, &opts)?;
            let q = &s.quantizer;
            (q.levels(), q.lo().clone(), q.hi().clone(), s.sensitivity.value, s.notice)
        }
        (None, None) => {
            let (lo, hi) = (rational("ymin", &a.ymin)?, rational("ymax", &a.ymax)?);
            let sens = rational("sens", &a.sens)?;
            let c = synthesize_levels(a.epsilon, &lo, &hi, &SensitivityResult::exact(sens.clone()), &opts)?;
            (c.levels, lo, hi, sens, c.notice)
        }
        _ => return Err(Error::Argument("--domains and --query go together".into())),
    };
    let rule = format!("{:?}", a.rule).to_lowercase();
    let notice = notice.map(|n| format!("{n:?}")).unwrap_or_else(|| "none".into());
    let (lo, hi, sens) = (format_rational(&lo), format_rational(&hi), format_rational(&sens));
    Ok(match format {
        Format::Text => format!(
            "q = {levels}\nrule = {rule}\nsensitivity = {sens}\nmechanism = quantizer:{levels}:{lo}..{hi}\nnotice = {notice}\n"
        ),
        Format::Csv => format!("q,rule,ymin,ymax,sensitivity,notice\n{levels},{rule},{lo},{hi},{sens},{notice}\n"),
    })
}

fn run_measure(a: &MeasureArgs, format: Format) -> Result<String> {
    let mut rows: Vec<(String, String)> = Vec::new();
    if let Some(r) = &a.relation {
        let rel = parse_relation(r)?;
        let star = maximin_info(&rel)?;
        rows.push(("h0_x".into(), hartley_entropy(rel.x_range()).to_string()));
        rows.push(("h0_y".into(), hartley_entropy(rel.y_range()).to_string()));
        rows.push(("l0_xy".into(), format!("{:?}", leakage_l0(&rel, Direction::XY))));
        rows.push(("l0_yx".into(), format!("{:?}", leakage_l0(&rel, Direction::YX))));
        rows.push(("i0_xy".into(), format!("{:?}", information_i0(&rel, Direction::XY))));
        rows.push(("i0_yx".into(), format!("{:?}", information_i0(&rel, Direction::YX))));
        rows.push(("l0_sym".into(), format!("{:?}", symmetrized_leakage(&rel))));
        rows.push(("maximin".into(), format!("{:?}", star.bits)));
        let blocks: Vec<String> = star.partition.blocks().iter().map(|b| b.to_string()).collect();
        rows.push(("partition".into(), blocks.join(" ")));
        if let Some(p) = &a.prior {
            let map = rel.conditionals_of_y();
            let mut channel = std::collections::BTreeMap::new();
            for (x, ys) in &map {
                if ys.len() != 1 {
                    return Err(Error::Argument(format!("maximal leakage needs a function of x; {x} has outputs {ys}")));
                }
                channel.insert(x.clone(), ys.iter().next().expect("one output").clone());
            }
            let prior = parse_prior(p, &noiseless_core::Domain::Finite(rel.x_range().clone()))?;
            rows.push(("maximal_leakage".into(), format!("{:?}", maximal_leakage(&channel, &prior)?)));
        }
    }
    if let Some(iv) = &a.interval {
        let pairs = iv
            .split('|')
            .map(|p| {
                let (lo, hi) = p
                    .split_once("..")
                    .ok_or_else(|| Error::Format(format!("bad interval `{p}`")))?;
                Ok((parse_rational(lo)?, parse_rational(hi)?))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(("h0_nats".into(), differential_entropy0(&IntervalUnion::from_pairs(pairs)?).to_string()));
    }
    if rows.is_empty() {
        return Err(Error::Argument("measure needs --relation or --interval".into()));
    }
    Ok(key_values(&rows, format))
}

fn key_values(rows: &[(String, String)], format: Format) -> String {
    match format {
        Format::Text => rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect(),
        Format::Csv => {
            let keys: Vec<&str> = rows.iter().map(|(k, _)| k.as_str()).collect();
            let values: Vec<String> = rows.iter().map(|(_, v)| format!("\"{v}\"")).collect();
            format!("{}\n{}\n", keys.join(","), values.join(","))
        }
    }
}

fn run_hypothesis(a: &HypothesisArgs, format: Format) -> Result<String> {
    let p = &a.pinned;
    let ds = p.data.dataset()?;
    let r = auditor::hypothesis_analysis(
        &ds,
        &parse_mechanism(&p.mech)?,
        p.index(ds.n())?,
        &parse_value(&a.xa)?,
        &parse_value(&a.xb)?,
        &p.others()?,
    )?;
    Ok(match format {
        Format::Text => r.to_string(),
        Format::Csv => key_values(
            &[
                ("y_given_p0".into(), r.y_given_null.to_string()),
                ("y_given_p1".into(), r.y_given_alternative.to_string()),
                ("symmetric_difference".into(), r.symmetric_difference.to_string()),
                ("bound".into(), r.bound.to_string()),
                ("best_test_performance".into(), r.best_test_performance.to_string()),
            ],
            format,
        ),
    })
}

fn run_capacity(a: &CapacityArgs, format: Format) -> Result<String> {
    let r = zero_error_code_search(&parse_channel(&a.channel)?, a.k, a.cap)?;
    let code: Vec<String> = r.code.iter().map(|w| Value::Tuple(w.clone()).to_string()).collect();
    Ok(key_values(
        &[
            ("k".into(), r.block_length.to_string()),
            ("size".into(), r.size().to_string()),
            ("rate".into(), format!("{:?}", r.rate)),
            ("code".into(), code.join(" ")),
        ],
        format,
    ))
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::Argument(format!("{command} is stochastic and requires an explicit --seed")))
}

fn run_t4(a: &T4Args, format: Format) -> Result<String> {
    let seed = require_seed(a.seed, "t4check")?;
    let p = &a.pinned;
    let ds = p.data.dataset()?;
    let i = p.index(ds.n())?;
    let prior = parse_prior(&a.prior, ds.domain(i)?)?;
    let r = auditor::theorem4_check(&ds, &parse_mechanism(&p.mech)?, i, &p.others()?, &prior, a.p, a.trials, seed)?;
    Ok(key_values(
        &[
            ("empirical".into(), format!("{:?}", r.empirical)),
            ("standard_error".into(), format!("{:?}", r.standard_error)),
            ("bound".into(), format!("{:?}", r.bound)),
            ("epsilon_star".into(), format!("{:?}", r.epsilon_star)),
            ("trials".into(), r.trials.to_string()),
            ("degenerate_prior".into(), r.degenerate_prior.to_string()),
            ("pass".into(), r.pass.to_string()),
        ],
        format,
    ))
}

fn run_game(a: &GameArgs) -> Result<String> {
    let seed = require_seed(a.seed, "game")?;
    let policies = a.policy.iter().map(|p| p.parse::<Policy>()).collect::<Result<Vec<_>>>()?;
    let mechanisms: Vec<MechanismChoice> = match a.mechanism {
        MechArg::Quantized => a.epsilon.iter().map(|&epsilon| MechanismChoice::Quantized { epsilon }).collect(),
        MechArg::Identity => vec![MechanismChoice::Identity],
        MechArg::Constant => vec![MechanismChoice::Constant],
    };
    if policies.is_empty() || a.n.is_empty() || mechanisms.is_empty() {
        return Err(Error::Argument("the sweep grid is empty (give --policy, --n and --epsilon)".into()));
    }
    let panel = parse_panel_source(&a.panel)?.load()?;
    let mut results: Vec<GameResult> = Vec::new();
    for &policy in &policies {
        for &n in &a.n {
            for &mechanism in &mechanisms {
                let mut cfg = GameConfig::new(n, mechanism, a.trials, seed, policy);
                cfg.horizon = a.horizon;
                cfg.rule = a.rule.into();
                cfg.relabel = a.relabel;
                results.push(play_game(&panel, &cfg)?);
            }
        }
    }
    let mut out = format!("{}\n", GameResult::CSV_HEADER);
    for r in &results {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Audit(a) => run_audit(a, cli.format),
        Command::Synth(a) => run_synth(a, cli.format),
        Command::Measure(a) => run_measure(a, cli.format),
        Command::Hypothesis(a) => run_hypothesis(a, cli.format),
        Command::Capacity(a) => run_capacity(a, cli.format),
        Command::T4check(a) => run_t4(a, cli.format),
        Command::Game(a) => run_game(a),
        Command::Panel(a) => Ok(parse_panel_source(&a.panel)?.load()?.to_csv()),
    }
}

fn main() -> ExitCode {
    let argv = match merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_internal() { 2 } else { 1 });
        }
    };
    let written = match &cli.output {
        Some(path) => fs::write(path, report.as_bytes()),
        None => std::io::stdout().lock().write_all(report.as_bytes()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", Error::from(e));
            ExitCode::from(1)
        }
    }
}
