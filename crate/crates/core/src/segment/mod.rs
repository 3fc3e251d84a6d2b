//! Segments of gadgets: plans, control states, circuits and execution.

pub mod chi;
pub mod circuit;
pub mod exec;
pub mod plan;

pub use chi::{chi_restricted, chi_state, choose_k, overlap_bound, truncate_chi, ControlState};
pub use exec::{run_segment, ExecutionMode, JointSegmentState, SegmentRun, SegmentRunner, DEFAULT_M_CAP};
pub use plan::{choose_m, ideal_unitary, realized_unitary, FixOperators, SegmentPlan, Step};
