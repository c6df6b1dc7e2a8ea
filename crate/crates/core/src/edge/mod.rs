//! Edge server.
pub mod event { }
