//! Home detection from cell-tower activity traces.
//!
//! The pipeline: parse or synthesize CDR streams, aggregate them into
//! per-user per-month traces, rank candidate home towers under five
//! criteria, quantify each detection's spatial uncertainty, and evaluate
//! the results with agreement metrics, population-vector angles, and
//! hot/cold-spot classification.

pub mod calendar;
pub mod csvio;
pub mod detect;
pub mod error;
pub mod hotspot;
pub mod metrics;
pub mod numeric;
pub mod records;
pub mod synth;
pub mod towers;
pub mod trace;
pub mod uncertainty;

pub use calendar::{windows_from_range, MonthWindow, WindowSet};
pub use detect::{
    detect_home, detection_counts, group_scores, score_towers, top_share_percentiles, Algorithm,
    AlgorithmSpec, HomeDetection, RankedTower,
};
pub use error::{Error, Result};
pub use hotspot::{gi_star, Classification, Confidence, GiStarRow};
pub use metrics::{
    csm, pearson, population_vector, population_vector_from_homes, smc, su_csm_correlation,
    CorrelationPoint, CorrelationResult, PopulationVector, SmcResult,
};
pub use records::{parse_cdr, CdrReader, CdrRecord, Direction, ActivityKind};
pub use synth::{
    generate_cdr, generate_network, generate_users, DensityProfile, GeneratorConfig, GroundTruth,
    Holiday, UserTruth,
};
pub use towers::{Tower, TowerNetwork};
pub use trace::{
    build_trace, split_months, IngestReport, NightWindow, TowerStats, TraceAccumulator,
    UserMonthTrace,
};
pub use uncertainty::{
    attach_su, median_su_by_tower, spatial_uncertainty, su_filter, su_summary, SuSummaryRow,
    SuThreshold,
};
