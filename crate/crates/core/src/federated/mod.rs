//! Federated readiness evaluation.
//!
//! Clients run the engine locally and send a [`ClientSummary`] (aggregates
//! only) to a coordinator. The coordinator checks that runs and schemas line
//! up, merges summaries into a [`FederatedReport`], and lists clients whose
//! critical flags make them candidates for exclusion from training.

mod flags;
mod merge;
mod session;
mod summary;
pub mod wire;

pub use flags::{detect_flags, FlagCode, ReadinessFlag, Severity};
pub use merge::{jensen_shannon, merge_summaries, CrossClient, FederatedReport, MergeError};
pub use session::{Coordinator, CoordinatorSession, SessionError, SubmitOutcome};
pub use summary::{evaluate_local, evaluate_local_at, ClientSummary};

/// Version carried by every protocol message and summary.
pub const PROTOCOL_VERSION: u32 = 1;
