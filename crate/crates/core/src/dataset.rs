use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Outcomes `Y` (n x p, stored by column) and design `X` (n x p_x) whose
/// first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcomes: Vec<Vec<f64>>,
    design: DMatrix<f64>,
    outcome_names: Vec<String>,
    covariate_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from outcome columns and a full design matrix.
    ///
    /// The design must already contain the intercept as its first column.
    pub fn new(outcomes: Vec<Vec<f64>>, design: DMatrix<f64>) -> Result<Self> {
        let n = design.nrows();
        if n == 0 {
            return Err(Error::InsufficientData("dataset has no subjects".into()));
        }
        if design.ncols() == 0 || design.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidInput(
                "first design column must be the intercept (all ones)".into(),
            ));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "design contains non-finite values".into(),
            ));
        }
        for (i, col) in outcomes.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "outcome {i} has {} values, expected {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "outcome {i} has non-finite values"
                )));
            }
        }
        let outcome_names = (1..=outcomes.len()).map(|i| i.to_string()).collect();
        let covariate_names = std::iter::once("(intercept)".to_string())
            .chain((1..design.ncols()).map(|j| format!("x{j}")))
            .collect();
        Ok(Dataset {
            outcomes,
            design,
            outcome_names,
            covariate_names,
        })
    }

    /// Outcome columns with an intercept-only design.
    pub fn intercept_only(outcomes: Vec<Vec<f64>>) -> Result<Self> {
        let n = outcomes.first().map_or(0, Vec::len);
        Dataset::new(outcomes, DMatrix::from_element(n, 1, 1.0))
    }

    /// Outcome columns plus raw covariate columns; an intercept is prepended.
    pub fn with_covariates(outcomes: Vec<Vec<f64>>, covariates: &[Vec<f64>]) -> Result<Self> {
        let n = outcomes
            .first()
            .map(Vec::len)
            .or_else(|| covariates.first().map(Vec::len))
            .unwrap_or(0);
        for (j, c) in covariates.iter().enumerate() {
            if c.len() != n {
                return Err(Error::InvalidInput(format!(
                    "covariate {j} has {} values, expected {n}",
                    c.len()
                )));
            }
        }
        let design = DMatrix::from_fn(n, covariates.len() + 1, |k, j| {
            if j == 0 {
                1.0
            } else {
                covariates[j - 1][k]
            }
        });
        Dataset::new(outcomes, design)
    }

    pub fn with_outcome_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.outcomes.len() {
            return Err(Error::InvalidInput(format!(
                "{} outcome names for {} outcomes",
                names.len(),
                self.outcomes.len()
            )));
        }
        self.outcome_names = names;
        Ok(self)
    }

    /// Names for the non-intercept covariates.
    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() + 1 != self.design.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} covariate names for {} covariates",
                names.len(),
                self.design.ncols() - 1
            )));
        }
        self.covariate_names = std::iter::once("(intercept)".to_string())
            .chain(names)
            .collect();
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.outcomes.len()
    }

    /// Number of design columns, intercept included.
    pub fn px(&self) -> usize {
        self.design.ncols()
    }

    pub fn outcome(&self, i: usize) -> &[f64] {
        &self.outcomes[i]
    }

    pub fn outcomes(&self) -> &[Vec<f64>] {
        &self.outcomes
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn outcome_names(&self) -> &[String] {
        &self.outcome_names
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Same outcomes with the covariates dropped.
    pub fn without_covariates(&self) -> Dataset {
        Dataset {
            outcomes: self.outcomes.clone(),
            design: DMatrix::from_element(self.n(), 1, 1.0),
            outcome_names: self.outcome_names.clone(),
            covariate_names: vec!["(intercept)".into()],
        }
    }
}
