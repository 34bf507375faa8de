//! Libraries of candidate basis functions `Ψ(x, u)` whose sparse linear
//! combination `θᵀΨ` stands in for unknown partial dynamics.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::expr::{self, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LibraryError {
    #[error("library is empty")]
    Empty,
    #[error("duplicate term name `{0}`")]
    DuplicateTerm(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("term `{name}` evaluated to a non-finite value")]
    NonFiniteResult { name: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown library `{0}`")]
    UnknownLibrary(String),
}

type Evaluator = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// A named candidate function.
#[derive(Clone)]
pub struct LibraryTerm {
    name: String,
    evaluator: Evaluator,
    max_state_index: Option<usize>,
}

impl LibraryTerm {
    /// A term with an arbitrary evaluator. The evaluator must be pure.
    pub fn new(name: impl Into<String>, evaluator: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), evaluator: Arc::new(evaluator), max_state_index: None }
    }

    /// Compiles the term from its name, e.g. `"x1^3"` or `"cos(x1)"`.
    pub fn parse(name: &str) -> Result<Self, LibraryError> {
        let e = expr::parse(name)?;
        let max_state_index = e.max_state_index();
        Ok(Self {
            name: name.trim().to_string(),
            evaluator: Arc::new(move |x, u| e.eval(x, u)),
            max_state_index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64], u: f64) -> f64 {
        (self.evaluator)(x, u)
    }

    /// Number of state components the term needs, when known.
    pub fn required_state_dim(&self) -> Option<usize> {
        self.max_state_index.map(|i| i + 1)
    }
}

impl fmt::Debug for LibraryTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("LibraryTerm").field(&self.name).finish()
    }
}

/// An ordered, immutable set of uniquely named terms.
#[derive(Debug, Clone)]
pub struct FunctionLibrary {
    terms: Vec<LibraryTerm>,
}

impl FunctionLibrary {
    pub fn new(terms: Vec<LibraryTerm>) -> Result<Self, LibraryError> {
        if terms.is_empty() {
            return Err(LibraryError::Empty);
        }
        let mut seen = HashSet::new();
        for t in &terms {
            if !seen.insert(t.name.clone()) {
                return Err(LibraryError::DuplicateTerm(t.name.clone()));
            }
        }
        Ok(Self { terms })
    }

    /// Builds a library by compiling each name as an expression.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, LibraryError> {
        let terms = names.iter().map(|n| LibraryTerm::parse(n.as_ref())).collect::<Result<Vec<_>, _>>()?;
        Self::new(terms)
    }

    /// Looks up one of the built-in libraries by key.
    pub fn builtin(key: &str) -> Result<Self, LibraryError> {
        match key {
            "duffing_psi1" => Ok(duffing_libraries().0),
            "duffing_psi2" => Ok(duffing_libraries().1),
            "duffing_psi3" => Ok(duffing_libraries().2),
            "golf_psi" => Ok(golf_library()),
            other => Err(LibraryError::UnknownLibrary(other.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[LibraryTerm] {
        &self.terms
    }

    pub fn names(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.name()).collect()
    }

    /// Smallest state dimension every parsed term can be evaluated on.
    pub fn required_state_dim(&self) -> usize {
        self.terms.iter().filter_map(LibraryTerm::required_state_dim).max().unwrap_or(0)
    }

    /// `Ψ(x, u)`.
    pub fn eval(&self, x: &[f64], u: f64) -> Result<DVector<f64>, LibraryError> {
        let mut out = DVector::zeros(self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            let v = t.eval(x, u);
            if !v.is_finite() {
                return Err(LibraryError::NonFiniteResult { name: t.name.clone() });
            }
            out[i] = v;
        }
        Ok(out)
    }

    /// `θᵀ·Ψ(x, u)`.
    pub fn approx_g(&self, theta: &[f64], x: &[f64], u: f64) -> Result<f64, LibraryError> {
        if theta.len() != self.terms.len() {
            return Err(LibraryError::DimensionMismatch { expected: self.terms.len(), actual: theta.len() });
        }
        let psi = self.eval(x, u)?;
        Ok(theta.iter().zip(psi.iter()).map(|(a, b)| a * b).sum())
    }

    /// Flags the terms whose coefficient magnitude exceeds `barrier`.
    pub fn dominant_terms(&self, theta: &[f64], barrier: f64, step: usize) -> Result<CoefficientReport, LibraryError> {
        if theta.len() != self.terms.len() {
            return Err(LibraryError::DimensionMismatch { expected: self.terms.len(), actual: theta.len() });
        }
        let entries = self
            .terms
            .iter()
            .zip(theta)
            .enumerate()
            .map(|(i, (t, &value))| CoefficientEntry {
                index: i + 1,
                name: t.name.clone(),
                value,
                active: value.abs() > barrier,
            })
            .collect();
        Ok(CoefficientReport { step, entries })
    }
}

/// One row of a [`CoefficientReport`]. `index` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientEntry {
    pub index: usize,
    pub name: String,
    pub value: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientReport {
    pub step: usize,
    pub entries: Vec<CoefficientEntry>,
}

impl CoefficientReport {
    pub fn active_count(&self) -> usize {
        self.entries.iter().filter(|e| e.active).count()
    }

    pub fn active(&self) -> impl Iterator<Item = &CoefficientEntry> {
        self.entries.iter().filter(|e| e.active)
    }

    /// Entry with the largest coefficient magnitude.
    pub fn strongest(&self) -> Option<&CoefficientEntry> {
        self.entries.iter().max_by(|a, b| a.value.abs().total_cmp(&b.value.abs()))
    }
}

impl fmt::Display for CoefficientReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "step {}: {} active term(s)", self.step, self.active_count())?;
        for e in &self.entries {
            let mark = if e.active { '*' } else { ' ' };
            writeln!(f, " {mark} theta_{:<2} {:>14.6e}  {}", e.index, e.value, e.name)?;
        }
        Ok(())
    }
}

pub const DUFFING_PSI1: [&str; 9] = ["1", "x1", "x2", "x2^2", "sin(x2)", "x1^3", "x1*x2", "cos(x1)", "u"];
pub const DUFFING_PSI2: [&str; 8] = ["1", "x1", "x2", "x2^2", "sin(x2)", "x1*x2", "cos(x1)", "u"];
pub const DUFFING_PSI3: [&str; 9] = ["1", "x1", "x2", "x2^2", "sin(x2)", "x1^2", "x1*x2", "cos(x1)", "u"];
pub const GOLF_PSI: [&str; 8] = ["1", "x1", "x2", "x2^2", "x1^3", "sin(x2)", "cos(x1)", "u"];

/// The three Duffing libraries: with the true cubic term, without it, and
/// with the cubic replaced by a square.
pub fn duffing_libraries() -> (FunctionLibrary, FunctionLibrary, FunctionLibrary) {
    let build = |names: &[&str]| FunctionLibrary::from_names(names).expect("built-in library is valid");
    (build(&DUFFING_PSI1), build(&DUFFING_PSI2), build(&DUFFING_PSI3))
}

pub fn golf_library() -> FunctionLibrary {
    FunctionLibrary::from_names(&GOLF_PSI).expect("built-in library is valid")
}
