//! Room-acoustic parameters (RT60, EDT) per octave band and error
//! aggregation against ground truth.

pub mod decay;
pub mod filterbank;
pub mod summary;

pub use decay::{
    band_metrics, edt_from_decay, measure_rir, measure_rir_with, rt60_from_decay, rt60_from_energy, schroeder_decay,
    BandMetrics, DecayCurve, DecayTime, FitRange,
};
pub use filterbank::{octave_filter_bank, OctaveFilterBank};
pub use summary::{error_summary, format_report, ErrorStats, ErrorSummary, MetricErrors, ReportRow};
