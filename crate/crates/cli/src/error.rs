use std::path::Path;

use iobp_core::barrington::BpError;
use iobp_core::bootstrap::BootError;
use iobp_core::circuit::CircuitError;
use iobp_core::obf_nc1::ObfError;

pub const INTERNAL: u8 = 1;
pub const PARSE: u8 = 2;
pub const LIMIT: u8 = 3;
pub const ARITY: u8 = 4;
pub const FORMAT: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: INTERNAL,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self {
            code: PARSE,
            message: message.into(),
        }
    }

    pub fn limit(message: impl Into<String>) -> Self {
        Self {
            code: LIMIT,
            message: message.into(),
        }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self {
            code: FORMAT,
            message: message.into(),
        }
    }

    pub fn arity(expected: usize, found: usize) -> Self {
        Self {
            code: ARITY,
            message: format!("expected {expected} input bits, got {found}"),
        }
    }

    /// Prefix the message with the file it came from.
    pub fn context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        let code = match e {
            CircuitError::InputLength { .. } => ARITY,
            CircuitError::Family(_) => LIMIT,
            _ => PARSE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<BpError> for CliError {
    fn from(e: BpError) -> Self {
        let code = match e {
            BpError::InputLength { .. } => ARITY,
            BpError::PadTooShort { .. } => LIMIT,
            BpError::Format { .. } => FORMAT,
            _ => INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ObfError> for CliError {
    fn from(e: ObfError) -> Self {
        match e {
            ObfError::Bp(e) => e.into(),
            ObfError::Circuit(e) => e.into(),
            ObfError::Limit(m) => Self::limit(m),
            ObfError::Arity { expected, found } => Self::arity(expected, found),
            ObfError::Format { .. } | ObfError::Mjp(_) => Self::format(e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

impl From<BootError> for CliError {
    fn from(e: BootError) -> Self {
        match e {
            BootError::Obf(e) => e.into(),
            BootError::Circuit(e) => e.into(),
            BootError::Arity { expected, found } => Self::arity(expected, found),
            BootError::Unsupported(m) => Self::limit(m),
            BootError::Format { .. } | BootError::KeyMismatch => Self::format(e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_errors_keep_their_code() {
        let e: CliError = BootError::Obf(ObfError::Limit("too long".into())).into();
        assert_eq!(e.code, LIMIT);
        let e: CliError = ObfError::Bp(BpError::InputLength { expected: 2, found: 1 }).into();
        assert_eq!(e.code, ARITY);
        let e: CliError = ObfError::Format {
            line: 3,
            message: "bad".into(),
        }
        .into();
        assert_eq!((e.code, e.message.as_str()), (FORMAT, "line 3: bad"));
    }
}
