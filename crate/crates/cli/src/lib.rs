//! Command-line pipeline and the annotation API server.

pub mod cli;
pub mod commands;
pub mod config;
pub mod layout;
pub mod server;

use std::fmt;

/// A failure caused by the caller's input or setup rather than a bug.
#[derive(Debug)]
pub struct UserError(pub String);

impl fmt::Display for UserError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

pub fn user_error(msg: impl Into<String>) -> anyhow::Error {
    UserError(msg.into()).into()
}

pub const EXIT_USER: u8 = 1;
pub const EXIT_INTERNAL: u8 = 2;

/// Exit status for a failed command: 1 for bad input or missing
/// prerequisites, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UserError>() {
            return EXIT_USER;
        }
        if let Some(e) = cause.downcast_ref::<revnote::Error>() {
            return match e {
                revnote::Error::Io { source, .. } => io_exit_code(source),
                _ => EXIT_USER,
            };
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            return io_exit_code(e);
        }
    }
    EXIT_INTERNAL
}

fn io_exit_code(e: &std::io::Error) -> u8 {
    use std::io::ErrorKind::*;
    match e.kind() {
        NotFound | PermissionDenied | InvalidData | InvalidInput | AddrInUse | AddrNotAvailable => EXIT_USER,
        _ => EXIT_INTERNAL,
    }
}
