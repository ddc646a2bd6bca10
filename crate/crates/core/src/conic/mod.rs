//! Conic programs `min c'x  s.t.  Ax = b, x in K` over zero, nonnegative,
//! second-order, and 3-parameter power cones, and a first-order
//! operator-splitting solver on the homogeneous self-dual embedding.
//!
//! Variables not covered by a cone block are free. Redundant equality rows
//! are tolerated: the splitting KKT system is quasidefinite regardless of
//! the rank of `A`.

mod cones;
mod ldl;
mod solver;
pub mod sparse;

pub use cones::{project_cone, project_dual_cone, ConeBlock};
pub use solver::solve;
pub use sparse::CscMatrix;

use crate::error::{Error, Result};
use std::ops::Range;

/// Default feasibility tolerance.
pub const DEFAULT_TOL_FEAS: f64 = 1e-8;
/// Default duality-gap tolerance.
pub const DEFAULT_TOL_GAP: f64 = 1e-8;
/// Default iteration budget.
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// A conic program in standard equality form.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub nvars: usize,
    /// Dense objective vector `c`.
    pub objective: Vec<f64>,
    /// Equality constraint matrix (`m x nvars`).
    pub a: CscMatrix,
    /// Equality right-hand side.
    pub b: Vec<f64>,
    /// Cone memberships over disjoint index ranges of `x`.
    pub cone_blocks: Vec<(ConeBlock, Range<usize>)>,
}

impl ConicProgram {
    pub fn validate(&self) -> Result<()> {
        if self.a.ncols != self.nvars {
            return Err(Error::InvalidArgument(format!(
                "A has {} columns for {} variables",
                self.a.ncols, self.nvars
            )));
        }
        if self.a.nrows != self.b.len() {
            return Err(Error::InvalidArgument(format!(
                "A has {} rows but b has {}",
                self.a.nrows,
                self.b.len()
            )));
        }
        if self.objective.len() != self.nvars {
            return Err(Error::InvalidArgument("objective length mismatch".into()));
        }
        if self.objective.iter().any(|v| !v.is_finite())
            || self.b.iter().any(|v| !v.is_finite())
            || self.a.values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite program data".into()));
        }
        let mut spans: Vec<(usize, usize)> = Vec::with_capacity(self.cone_blocks.len());
        for (block, range) in &self.cone_blocks {
            block.validate()?;
            if range.end > self.nvars || range.len() != block.len() {
                return Err(Error::InvalidArgument(format!(
                    "cone range {range:?} inconsistent with block of size {}",
                    block.len()
                )));
            }
            spans.push((range.start, range.end));
        }
        spans.sort_unstable();
        for w in spans.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(Error::InvalidArgument("overlapping cone ranges".into()));
            }
        }
        Ok(())
    }

    /// Serializes the program to a text form for cross-checking against
    /// external solvers. The format is line-oriented:
    ///
    /// ```text
    /// <m> <n> <nnz>
    /// <row> <col> <value>     one line per structural nonzero, CSC order
    /// b <row> <value>         one line per nonzero entry of b
    /// c <col> <value>         one line per nonzero entry of c
    /// cone <kind> <start> <len> [<alpha>]
    /// ```
    ///
    /// Indices are zero-based; values print with full precision, so the dump
    /// is identical across runs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {}\n",
            self.a.nrows,
            self.nvars,
            self.a.nnz()
        ));
        for c in 0..self.a.ncols {
            for p in self.a.col_ptr[c]..self.a.col_ptr[c + 1] {
                out.push_str(&format!(
                    "{} {} {:.17e}\n",
                    self.a.row_idx[p], c, self.a.values[p]
                ));
            }
        }
        for (i, v) in self.b.iter().enumerate() {
            if *v != 0.0 {
                out.push_str(&format!("b {i} {v:.17e}\n"));
            }
        }
        for (j, v) in self.objective.iter().enumerate() {
            if *v != 0.0 {
                out.push_str(&format!("c {j} {v:.17e}\n"));
            }
        }
        for (block, range) in &self.cone_blocks {
            match block {
                ConeBlock::Zero(_) => {
                    out.push_str(&format!("cone zero {} {}\n", range.start, range.len()))
                }
                ConeBlock::Nonnegative(_) => {
                    out.push_str(&format!("cone nonneg {} {}\n", range.start, range.len()))
                }
                ConeBlock::SecondOrder(_) => {
                    out.push_str(&format!("cone soc {} {}\n", range.start, range.len()))
                }
                ConeBlock::Power { alpha, .. } => out.push_str(&format!(
                    "cone power {} {} {:.17e}\n",
                    range.start,
                    range.len(),
                    alpha
                )),
            }
        }
        out
    }
}

/// Solver settings; tolerances apply to the relative residuals reported in
/// [`SolveReport`].
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    pub scaling: bool,
    /// Optional primal/dual warm start `(x0, y0)`.
    pub warm_start: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_feas: DEFAULT_TOL_FEAS,
            tol_gap: DEFAULT_TOL_GAP,
            max_iter: DEFAULT_MAX_ITER,
            scaling: true,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    Unbounded,
}

/// Outcome of a solve. At `Optimal` the residuals satisfy the settings'
/// tolerances (copied here for downstream validation). For `Infeasible` or
/// `Unbounded`, `x`/`y` hold the homogeneous certificate and the objective
/// value is meaningless (NaN).
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub tol_feas: f64,
    pub tol_gap: f64,
}
