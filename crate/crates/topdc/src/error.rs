//! Error type shared across the crate, with the process exit-code mapping
//! used by the command-line front end.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration: unreadable file, unknown or missing keys,
    /// out-of-range scalar values. The message names the offending field.
    #[error("configuration error: {0}")]
    Schema(String),

    /// Inputs that parse but are physically inconsistent with each other,
    /// e.g. a coupling quality factor below the loaded one, or resonance
    /// frequencies violating energy conservation for the chosen scheme.
    #[error("physics error: {0}")]
    Physics(String),

    /// An operation was invoked in a regime it does not model, e.g. a
    /// continuous-wave rate formula applied to a pulsed pump.
    #[error("mode misuse: {0}")]
    ModeMisuse(String),

    /// A numerical computation failed or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerics(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code for the CLI: 2 schema, 3 physics, 4 mode misuse,
    /// 1 for anything else. 0 is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) => 2,
            Error::Physics(_) => 3,
            Error::ModeMisuse(_) => 4,
            Error::Numerics(_) | Error::Io(_) => 1,
        }
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn physics(msg: impl Into<String>) -> Self {
        Error::Physics(msg.into())
    }

    pub(crate) fn mode_misuse(msg: impl Into<String>) -> Self {
        Error::ModeMisuse(msg.into())
    }

    pub(crate) fn numerics(msg: impl Into<String>) -> Self {
        Error::Numerics(msg.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_match_cli_contract() {
        assert_eq!(Error::schema("x").exit_code(), 2);
        assert_eq!(Error::physics("x").exit_code(), 3);
        assert_eq!(Error::mode_misuse("x").exit_code(), 4);
        assert_eq!(Error::numerics("x").exit_code(), 1);
        let io: Error = std::io::Error::other("x").into();
        assert_eq!(io.exit_code(), 1);
    }

    #[test]
    fn messages_name_the_category() {
        assert!(Error::schema("bad").to_string().contains("configuration"));
        assert!(Error::physics("bad").to_string().contains("physics"));
    }
}
