//! Orchestration of the meta-learning loop.

mod batch;
mod practical;
mod stream;

pub use batch::{online_to_batch, transfer_risk_estimate, RiskEstimate, RiskOptions};
pub use practical::{aruba_practical, DescentOutcome, DescentRunner, OgdRunner, PracticalConfig, PracticalRow, PracticalRun};
pub use stream::{run_meta_stream, AbortedRun, LedgerRow, MetaRun, MetaRunConfig, MetaScale, MetaUpdate, SimStrategy};
