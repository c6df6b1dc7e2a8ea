//! Cloud platform.
