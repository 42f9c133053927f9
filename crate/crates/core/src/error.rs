//! Error classification shared by the CLI for exit-code mapping.

/// Coarse failure category. The CLI maps these to exit codes:
/// validation = 1, provider = 2, io = 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Provider,
    Io,
}
