//! Execution signal collection: the 26-signal cumulative summary, interval
//! streams, and the instrumentation strategies that produce them.

mod collector;
pub mod csvio;
mod modes;
mod signals;

pub use collector::{
    monotone, Collector, StreamEntry, SummaryStream, TraceEvent, TraceRecorder, DEFAULT_INTERVAL,
};
pub use modes::{
    collect, measure_overhead, median, Collected, Collection, InstrumentError, InstrumentationMode,
    Instrumenter, InstrumenterRegistry, OverheadMeter, OverheadReport,
};
pub use signals::{Signal, SignalSummary, EXTREMES, NUM_COUNTS, NUM_SIGNALS, PARTITION, UNDEFINED};
