//! Noiseless (non-stochastic) privacy for deterministic mechanisms.
//!
//! A mechanism is ε-noiselessly private when, with every individual but one
//! held fixed, the published output can take at most `2^ε` distinct values.
//! This crate builds such mechanisms from linear quantizers, audits
//! arbitrary deterministic mechanisms exactly, computes the non-stochastic
//! information measures the guarantees are stated in, and plays the
//! membership-inference game on aggregate time series.
//!
//! ```
//! use noiseless_core::{audit, AuditOptions, DatasetSpec, MechanismSpec, QueryKind};
//! use noiseless_core::text::parse_domains;
//!
//! let ds = DatasetSpec::new(parse_domains("0,1;0,1").unwrap(), QueryKind::Mean, None).unwrap();
//! let report = audit(&ds, &MechanismSpec::Identity, &AuditOptions::default()).unwrap();
//! assert_eq!(report.epsilon_star, 1.0);
//! ```

pub mod auditor;
pub mod capacity;
pub mod dataset;
pub mod error;
pub mod games;
pub mod measures;
pub mod mechanisms;
pub mod range;
pub mod text;
mod unionfind;
pub mod value;

pub use auditor::{
    audit, audit_local, hypothesis_analysis, theorem1_check, theorem2_check, theorem4_check, theorem5_check,
    AuditMode, AuditOptions, AuditReport, HypothesisReport, OutputCount,
};
pub use capacity::{zero_error_code_search, ChannelSpec, CodeSearch};
pub use dataset::{DatasetSpec, QueryKind, QuerySpec};
pub use error::{Error, Result};
pub use games::{play_game, policy_decide, synthesize_panel, GameConfig, GameResult, MechanismChoice, Policy, ProfilePanel};
pub use measures::{maximal_leakage, maximin_info, Direction, Entropy, PriorSpec};
pub use mechanisms::{
    apply, compose_budget, sensitivity, synthesize_levels, synthesize_quantizer, LevelRule, MechanismSpec,
    QuantizerSpec, SensitivityResult, SynthesisOptions,
};
pub use range::{Domain, FiniteRange, Interval, IntervalUnion, JointRelation};
pub use value::{Rational, Value};
