//! Crate-wide error type.
//!
//! Convention: structural misuse (mixing charts, mismatched dimensions or
//! truncation caps between operands) is a programmer error and panics with a
//! descriptive message; everything that can legitimately fail on valid-shaped
//! input (inversion preconditions, non-closed forms, non-exact classes,
//! underdetermined extraction, recursion caps) is reported through
//! [`KernelError`].

use thiserror::Error;

/// Errors surfaced by kernel operations.
#[derive(Debug, Error)]
pub enum KernelError {
    /// Input data violates the documented schema (CLI exit code 2).
    #[error("schema violation: {0}")]
    Schema(String),

    /// A mathematical precondition does not hold; the message names the
    /// failing identity or requirement (CLI exit code 3).
    #[error("math precondition failed: {0}")]
    Precondition(String),

    /// A computed object failed its own defining identity; this signals
    /// inconsistent conventions or a bug, never bad user data.
    #[error("postcondition check failed: {0}")]
    Postcondition(String),

    /// A linear solve had too little data to pin the unknowns.
    #[error("extraction underdetermined: {0}")]
    Underdetermined(String),

    /// A graded recursion did not stabilize within the configured caps.
    #[error("recursion did not close within caps: {0}")]
    CapsExceeded(String),
}

/// Convenient alias used throughout the crate.
pub type Result<T> = std::result::Result<T, KernelError>;
