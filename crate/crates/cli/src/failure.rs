use std::fmt;

use shapley_r2::Error;

/// Exit status 2: the input or flags are unusable.
pub const EXIT_INPUT: i32 = 2;
/// Exit status 3: the numbers could not be processed (singular design, ...).
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERICAL, message: message.into() }
    }

    /// Wraps a library error, adding a remediation hint where one exists.
    pub fn from_core(err: Error, feature_names: &[String]) -> Self {
        let hint = match &err {
            Error::SingularDesign { column } => Some(format!(
                "feature '{}' is a linear combination of the intercept and earlier features; drop it or use --model stumps",
                feature_names.get(*column).map_or("?", String::as_str)
            )),
            Error::FeatureCountExceeded { .. } => {
                Some("rerun with --sampled (and --permutations) to estimate Shapley values by permutation sampling".into())
            }
            Error::TargetUnreachable { .. } => {
                Some("raise --max-iterations or --learning-rate, or lower --target-r2".into())
            }
            Error::NoValidSplit => Some("every feature column is constant; boosting has nothing to split on".into()),
            _ => None,
        };
        let message = match hint {
            Some(h) => format!("{err}\nhint: {h}"),
            None => err.to_string(),
        };
        if err.is_numerical() {
            Self::numerical(message)
        } else {
            Self::input(message)
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Self::from_core(err, &[])
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Self::input(format!("I/O error: {err}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;
