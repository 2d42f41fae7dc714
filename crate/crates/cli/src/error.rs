use borps::{DataError, Error};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn other(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_OTHER,
            message: message.into(),
        }
    }

    /// Wraps a library error, prefixed with where it happened.
    pub fn from_library(context: &str, e: Error) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERIC };
        let detail = match &e {
            // Library rows are zero-based data rows; report file lines.
            Error::Data(DataError::UnknownLabel { row, label }) => format!(
                "line {}: response {label:?} is not one of the declared levels",
                row + 2
            ),
            Error::Data(DataError::NonFinite { row, column }) => {
                format!("line {}, covariate {}: value is not finite", row + 2, column + 1)
            }
            _ => e.to_string(),
        };
        Self {
            code,
            message: format!("{context}: {detail}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERIC };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::from(Error::Config("x".into())).code, EXIT_INPUT);
        assert_eq!(CliError::from(Error::Numeric("x".into())).code, EXIT_NUMERIC);
        assert_eq!(CliError::from(Error::DegenerateScale { mean_cutpoint: 0.0 }).code, EXIT_NUMERIC);
        let e = CliError::from_library(
            "f.csv",
            Error::Data(DataError::UnknownLabel {
                row: 0,
                label: "7".into(),
            }),
        );
        assert_eq!(e.code, EXIT_INPUT);
        assert!(e.message.starts_with("f.csv: line 2:"), "{}", e.message);
    }
}
