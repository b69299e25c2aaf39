//! Sparse coding: weighted L1 and L1/2 regularized least squares, plus
//! compressed occlusion-dictionary learning.
//!
//! The objective convention throughout is `||y - D w||^2 + lambda * R(w)`
//! (no 1/2 factor). The L1/2 penalty is handled by a short sequence of
//! weighted L1 problems with majorization weights derived from the
//! previous iterate.

mod dict;
mod solver;

pub use dict::{learn_compressed_dictionary, LearnedOcclusionDictionary};
pub use solver::{solve_l_half, solve_weighted_l1, solve_weighted_l1_from};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Regularizer attached to a solved code.
#[derive(Debug, Clone, PartialEq)]
pub enum Norm {
    /// Sum of absolute values.
    L1,
    /// Sum of square roots of absolute values.
    LHalf,
    /// Weighted sum of absolute values; carries its weights so the
    /// objective stays recomputable from the code alone.
    WeightedL1(Vec<f64>),
}

impl Norm {
    /// Penalty value R(omega) for this norm.
    pub fn penalty(&self, omega: &Array1<f64>) -> f64 {
        match self {
            Norm::L1 => omega.iter().map(|v| v.abs()).sum(),
            Norm::LHalf => omega.iter().map(|v| v.abs().sqrt()).sum(),
            Norm::WeightedL1(w) => omega.iter().zip(w).map(|(v, wi)| wi * v.abs()).sum(),
        }
    }
}

/// Step-size policy of the inner solver. Exact coordinate minimization
/// needs no step size; the enum is the extension point for gradient-based
/// alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    #[default]
    CoordinateExact,
}

/// Iteration budgets and tolerances for the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSchedule {
    /// Convergence tolerance: the subgradient certificate must hold to
    /// this absolute tolerance (and relative objective decrease below it
    /// also stops the dictionary learner).
    pub inner_tol: f64,
    /// Cap on inner solver sweeps.
    pub max_inner_iter: usize,
    /// Number of reweighting rounds for the L1/2 solver.
    pub outer_reweight_iters: usize,
    /// Smoothing constant inside the reweighting formula.
    pub epsilon_smoothing: f64,
    /// Inner step policy.
    pub step_rule: StepRule,
    /// Cap on dictionary-learning alternations.
    pub max_alternations: usize,
}

impl Default for SolverSchedule {
    fn default() -> Self {
        SolverSchedule {
            inner_tol: 1e-7,
            max_inner_iter: 20_000,
            outer_reweight_iters: 4,
            epsilon_smoothing: 1e-6,
            step_rule: StepRule::CoordinateExact,
            max_alternations: 60,
        }
    }
}

impl SolverSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol > 0.0) {
            return Err(Error::Parameter("inner_tol must be positive".into()));
        }
        if !(self.epsilon_smoothing > 0.0) {
            return Err(Error::Parameter(
                "epsilon_smoothing must be positive".into(),
            ));
        }
        if self.outer_reweight_iters < 1 {
            return Err(Error::Parameter("outer_reweight_iters must be >= 1".into()));
        }
        if self.max_inner_iter < 1 {
            return Err(Error::Parameter("max_inner_iter must be >= 1".into()));
        }
        if self.max_alternations < 1 {
            return Err(Error::Parameter("max_alternations must be >= 1".into()));
        }
        Ok(())
    }
}

/// A solved sparse code with enough metadata to recompute its objective.
#[derive(Debug, Clone)]
pub struct SparseCode {
    /// Coefficient vector.
    pub omega: Array1<f64>,
    /// Regularization weight used.
    pub lambda: f64,
    /// Regularizer used.
    pub norm: Norm,
    /// Inner sweeps consumed (summed over reweighting rounds).
    pub iterations: usize,
    /// Final objective value under `norm`.
    pub objective: f64,
    /// Whether the solver met its certificate within budget.
    pub converged: bool,
    /// Objective after each sweep (weighted L1) or each outer round (L1/2).
    pub objective_trace: Vec<f64>,
}

impl SparseCode {
    /// Recomputes `||y - D omega||^2 + lambda * R(omega)` from scratch.
    pub fn recompute_objective(&self, dictionary: &Array2<f64>, y: &Array1<f64>) -> f64 {
        let r = y - &dictionary.dot(&self.omega);
        r.dot(&r) + self.lambda * self.norm.penalty(&self.omega)
    }

    /// Number of coefficients with magnitude above `tol`.
    pub fn nnz(&self, tol: f64) -> usize {
        self.omega.iter().filter(|v| v.abs() > tol).count()
    }
}
