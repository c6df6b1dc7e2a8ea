//! Monitoring unit.
pub mod record { }
