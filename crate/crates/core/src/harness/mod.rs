//! Closed-loop simulation, coverage estimation and filter comparison.

mod compare;
mod coverage;
mod episode;
mod policy;

pub use compare::{compare_filters, sample_in_set, sample_in_union, CompareOptions, ComparisonReport, MagnitudeStats, PairOutcome};
pub use coverage::{coverage_fraction, coverage_sweep, CoverageCell, CoverageReport, CoverageRow, CoverageSweep, SweepSpec};
pub use episode::{
    episode_rng, run_episode, run_episodes, EpisodeMeta, EpisodeSpec, EpisodeTrace, Filter, FilterKind, InitialState,
    StepRecord, ThetaMode, VIOLATION_PENALTY, VIOLATION_TOL,
};
pub use policy::{Policy, PolicyKind, PolicyStub};
