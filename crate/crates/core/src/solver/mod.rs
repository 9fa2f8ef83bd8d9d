//! Value-of-information dynamic programs and the policies built on them.

pub mod path;
pub mod policy;
pub mod restricted;

pub use path::{solve_path_dp, PathSolverConfig, PathValueTable, Threshold};
pub use policy::{Decision, PolicySpec, Snapshot, TriggerPolicy};
pub use restricted::{solve_restricted_dp, RestrictedValueTable};
