//! Server assembly and run-spec plumbing behind the `guardgate`,
//! `guardgate-eval`, and `guardgate-curriculum` binaries.

pub mod plot;
pub mod runspec;
pub mod server;
