//! Session event log and its analyses.

pub mod analysis;
pub mod event;
pub mod log;

pub use analysis::{
    assistance_report, render_assistance_table, render_summary_table, summarize, AssistanceReport, KindTotals, MalformedLog,
    SessionSummary, Unmatched,
};
pub use event::{EventKind, SessionEvent, SessionStatus};
pub use log::{parse_log, render_log, EventLog, LogError, LOG_SCHEMA, LOG_VERSION};
