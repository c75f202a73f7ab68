//! Circuit-based analysis and D-optimal search for fractions of full
//! factorial designs with main-effects models.
//!
//! The pipeline: build a full factorial design and its model matrix
//! ([`design`]), enumerate the circuit basis of the transposed matrix with
//! exact integer arithmetic ([`circuits`]), score candidate fractions through
//! circuit intersections and D-efficiency ([`fraction`], [`search`]), and run
//! simulation campaigns that group random locally-optimal fractions by their
//! circuit profile ([`campaign`]).

pub mod campaign;
pub mod circuits;
pub mod design;
pub mod error;
pub mod fraction;
mod linalg;
pub mod rounding;
pub mod scenarios;
pub mod search;

pub use campaign::{
    group_fractions, run_campaign, validate_report, variance_efficiency_check, CampaignConfig,
    Group, GroupedReport, KSection,
};
pub use circuits::{
    basic_moves, canonicalize, enumerate_circuits, verify_circuit, BasicMoveSet, Circuit,
    CircuitBasis,
};
pub use design::{
    full_factorial, model_fingerprint, model_matrix, Coding, FactorSpec, FactorialDesign,
    ModelMatrix,
};
pub use error::{Error, Result};
pub use fraction::{
    g2, g3, intersection_counts, is_saturated, CircuitScope, Fraction, MoveProfile,
    SaturationVerdict,
};
pub use linalg::{bareiss_det, exact_rank};
pub use scenarios::{
    all_scenarios, compare_report, reproduce, scenario, RowComparison, Scenario,
    ScenarioComparison,
};
pub use search::{
    d_efficiency, exchange_search, exhaustive_best, exhaustive_best_with_budget, DCriterionValue,
    ExhaustiveResult, RestartRecord, SearchResult,
};
