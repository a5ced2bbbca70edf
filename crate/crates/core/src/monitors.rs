//! Monitors (in progress).
