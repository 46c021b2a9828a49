//! Support for the acceptance suite: brute-force oracles, small statistics
//! helpers and the desk-scale experiment settings.

pub mod desk;
pub mod oracles;
pub mod stats;

use std::fmt;

/// Outcome of one acceptance criterion, printed as a single line.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub criterion: u8,
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
}

impl Verdict {
    pub fn new(criterion: u8, name: &'static str, pass: bool, details: impl Into<String>) -> Self {
        Self { criterion, name, pass, details: details.into() }
    }

    /// Print the line and panic with it when the criterion failed.
    pub fn report(&self) {
        println!("{self}");
        assert!(self.pass, "{self}");
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} {:<34} {status}  {}", self.criterion, self.name, self.details)
    }
}
