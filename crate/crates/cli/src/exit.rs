//! Mapping failures onto process exit codes.

use std::fmt;

use qglime_core::Error as CoreError;

pub const USAGE: u8 = 2;
pub const DATA: u8 = 3;
pub const NUMERICAL: u8 = 4;

/// A bad flag or config value detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::Config(_) => USAGE,
                CoreError::Divergence { .. } => NUMERICAL,
                _ => DATA,
            };
        }
    }
    DATA
}
