//! Shared text formatting and parsing for the file interfaces.
//!
//! Every floating value in an output file is printed with 17 significant
//! digits so a write/read cycle is bit-exact.

/// Format a float with 17 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Parse error carrying a line number, shared by the text readers.
#[derive(Debug, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

pub fn parse_f64(tok: &str, line: usize) -> Result<f64, ParseError> {
    tok.parse::<f64>()
        .map_err(|_| ParseError::new(line, format!("expected a real number, got `{tok}`")))
}

pub fn parse_usize(tok: &str, line: usize) -> Result<usize, ParseError> {
    tok.parse::<usize>()
        .map_err(|_| ParseError::new(line, format!("expected an integer, got `{tok}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_round_trips_exactly() {
        for v in [
            0.0,
            1.0,
            -1.5e-4,
            std::f64::consts::PI,
            0.1644934066848226,
            1.0 / 3.0,
            6.02e23,
            -3.3e-200,
        ] {
            let s = fmt(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
