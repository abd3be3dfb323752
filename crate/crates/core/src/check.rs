use std::fmt::Display;

use serde::{Deserialize, Serialize};

/// One inequality checked against a run: what was observed and what it must not exceed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    /// Which phase, period or trial the row refers to.
    pub scope: String,
    pub observed: String,
    pub bound: String,
    pub pass: bool,
}

impl CheckRow {
    pub fn new(
        check: impl Into<String>,
        scope: impl Into<String>,
        observed: impl Display,
        bound: impl Display,
        pass: bool,
    ) -> Self {
        CheckRow {
            check: check.into(),
            scope: scope.into(),
            observed: observed.to_string(),
            bound: bound.to_string(),
            pass,
        }
    }

    /// `observed <= bound`.
    pub fn at_most<T: PartialOrd + Display>(
        check: impl Into<String>,
        scope: impl Into<String>,
        observed: T,
        bound: T,
    ) -> Self {
        let pass = observed <= bound;
        CheckRow::new(check, scope, observed, format!("<= {bound}"), pass)
    }

    /// `observed >= bound`.
    pub fn at_least<T: PartialOrd + Display>(
        check: impl Into<String>,
        scope: impl Into<String>,
        observed: T,
        bound: T,
    ) -> Self {
        let pass = observed >= bound;
        CheckRow::new(check, scope, observed, format!(">= {bound}"), pass)
    }

    /// `observed < bound`.
    pub fn below<T: PartialOrd + Display>(
        check: impl Into<String>,
        scope: impl Into<String>,
        observed: T,
        bound: T,
    ) -> Self {
        let pass = observed < bound;
        CheckRow::new(check, scope, observed, format!("< {bound}"), pass)
    }
}
