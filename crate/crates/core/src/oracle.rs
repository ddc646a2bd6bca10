//! Grid-restricted linear-programming oracle for dominance problems.
//!
//! The dominance solve is checked against a linear program over 3-plans on
//! `supp(mu) x supp(nu) x grid`: the plan's first two marginals couple `mu`
//! and `nu`, and the conditional mean of the third coordinate matches the
//! first and the second coordinate in turn. Restricting the third
//! coordinate to a finite grid makes this an upper bound that converges as
//! the grid refines. Test infrastructure, not a production solve path.

use crate::conic::{solve, ConeBlock, ConicProgram, CscMatrix, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::measure::{dist, DiscreteMeasure};

/// Hard cap on the number of plan variables in a grid program.
pub const MAX_GRID_VARIABLES: usize = 200_000;

/// A tensor grid over a box in R^d.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("inconsistent grid extents".into()));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidArgument(
                "grids need at least 2 points per axis".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidArgument("grid box is empty or non-finite".into()));
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn num_points(&self) -> usize {
        self.counts.iter().product()
    }

    /// Enumerates grid points in lexicographic order of the multi-index.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let total = self.num_points();
        let mut pts = Vec::with_capacity(total);
        for mut g in 0..total {
            let mut z = vec![0.0; d];
            for k in (0..d).rev() {
                let idx = g % self.counts[k];
                g /= self.counts[k];
                z[k] = self.lo[k]
                    + (self.hi[k] - self.lo[k]) * idx as f64 / (self.counts[k] - 1) as f64;
            }
            pts.push(z);
        }
        pts
    }

    fn contains_support(&self, m: &DiscreteMeasure) -> bool {
        let slack = 1e-12 * (1.0 + m.diameter());
        m.atoms().all(|(_, x)| {
            x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - slack && *v <= h + slack)
        })
    }
}

/// Solves the grid-restricted dominance program for the cost `f` and
/// returns the third marginal and its cost.
pub fn grid_dominance_lp<F: Fn(&[f64]) -> f64>(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    f: F,
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<(DiscreteMeasure, f64)> {
    let d = mu.dim();
    if nu.dim() != d || grid.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if nu.dim() != d { nu.dim() } else { grid.dim() },
        });
    }
    let gap = dist(&mu.barycentre(), &nu.barycentre());
    if gap > 1e-8 {
        return Err(Error::BarycentreMismatch { gap, tol: 1e-8 });
    }
    if !grid.contains_support(mu) || !grid.contains_support(nu) {
        return Err(Error::InvalidArgument(
            "grid box must contain both supports".into(),
        ));
    }
    let (n_mu, n_nu) = (mu.len(), nu.len());
    let points = grid.points();
    let n_z = points.len();
    let nvars = n_mu * n_nu * n_z;
    if nvars > MAX_GRID_VARIABLES {
        return Err(Error::TooLarge(format!(
            "grid program has {nvars} variables, cap is {MAX_GRID_VARIABLES}"
        )));
    }

    // Rows: mu marginal, nu marginal, conditional-mean rows per mu atom and
    // per nu atom (one per coordinate).
    let nrows = n_mu + n_nu + d * (n_mu + n_nu);
    let row_mu = |i: usize| i;
    let row_nu = |j: usize| n_mu + j;
    let row_zmu = |i: usize, k: usize| n_mu + n_nu + i * d + k;
    let row_znu = |j: usize, k: usize| n_mu + n_nu + n_mu * d + j * d + k;

    let mut objective = vec![0.0; nvars];
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(nvars * (2 + 2 * d));
    for (i, (_, x)) in mu.atoms().enumerate() {
        for (j, (_, y)) in nu.atoms().enumerate() {
            for (g, z) in points.iter().enumerate() {
                let col = (i * n_nu + j) * n_z + g;
                objective[col] = f(z);
                triplets.push((row_mu(i), col, 1.0));
                triplets.push((row_nu(j), col, 1.0));
                for k in 0..d {
                    if z[k] != x[k] {
                        triplets.push((row_zmu(i, k), col, z[k] - x[k]));
                    }
                    if z[k] != y[k] {
                        triplets.push((row_znu(j, k), col, z[k] - y[k]));
                    }
                }
            }
        }
    }
    if objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("cost function returned non-finite".into()));
    }
    let mut b = vec![0.0; nrows];
    for (i, w) in mu.weights().iter().enumerate() {
        b[row_mu(i)] = *w;
    }
    for (j, w) in nu.weights().iter().enumerate() {
        b[row_nu(j)] = *w;
    }

    let prog = ConicProgram {
        nvars,
        objective,
        a: CscMatrix::from_triplets(nrows, nvars, &triplets),
        b,
        cone_blocks: vec![(ConeBlock::Nonnegative(nvars), 0..nvars)],
    };
    let report = solve(&prog, settings)?;
    match report.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(Error::InvalidArgument(
                "grid cannot represent the required conditional means".into(),
            ))
        }
        other => return Err(Error::NotOptimal(other)),
    }

    let mut mass = vec![0.0; n_z];
    for i in 0..n_mu {
        for j in 0..n_nu {
            for (g, m) in mass.iter_mut().enumerate() {
                *m += report.x[(i * n_nu + j) * n_z + g];
            }
        }
    }
    let atoms: Vec<(f64, Vec<f64>)> = mass
        .iter()
        .zip(&points)
        .filter(|(m, _)| **m > 1e-12)
        .map(|(m, z)| (*m, z.clone()))
        .collect();
    let rho = DiscreteMeasure::new(d, &atoms)?;
    Ok((rho, report.objective_value))
}
