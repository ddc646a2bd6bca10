//! Quantities derived from solved couplings: the pushforward dominant, the
//! quadratic dominance cost and Zolotarev-2 distance, the convex-order
//! index, projection distances, martingale residuals, the Wasserstein-2
//! distance, and martingale-coupling feasibility.

use crate::conic::{solve, ConeBlock, ConicProgram, CscMatrix, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::m2ot::{
    build_and_solve, extract_plan, BiMartingalePlan, ObjectiveSpec, DEFAULT_GAMMA_FLOOR,
};
use crate::measure::{dist, sq_norm, DiscreteMeasure};

/// Default feasibility tolerance for martingale-coupling existence tests.
pub const STRASSEN_DEFAULT_TOL: f64 = 1e-7;

/// Below this (relative to the moment scale) the distance is treated as
/// zero and the convex-order index is undefined.
const Z2_DEFINED_FLOOR: f64 = 1e-10;

/// Quadratic-order diagnostics for a pair of measures.
///
/// `z2` is the Zolotarev-2 distance, `c_value` the least common second
/// moment, and `alpha = (m2(nu) - m2(mu)) / (2 z2)` the convex-order index
/// in `[-1, 1]`, undefined for equal measures. The projection distances are
/// the least `Z2` distances to the cones of measures dominating `mu`
/// (forward) and `nu` (backward).
#[derive(Debug, Clone)]
pub struct OrderDiagnostics {
    pub z2: f64,
    pub c_value: f64,
    pub alpha: Option<f64>,
    pub forward_projection_distance: f64,
    pub backward_projection_distance: f64,
    /// Martingale residuals of the optimal plan (mu side, nu side).
    pub residual_mu: f64,
    pub residual_nu: f64,
    pub solve_iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl OrderDiagnostics {
    /// JSON form:
    /// `{"z2":…, "c":…, "alpha":…, "proj_forward":…, "proj_backward":…,
    ///   "residuals":{…}}` with `alpha` null when undefined.
    pub fn to_json(&self) -> String {
        let alpha = match self.alpha {
            Some(a) => sig12(a),
            None => "null".to_string(),
        };
        format!(
            concat!(
                "{{\"z2\": {}, \"c\": {}, \"alpha\": {}, ",
                "\"proj_forward\": {}, \"proj_backward\": {}, ",
                "\"residuals\": {{\"martingale_mu\": {}, \"martingale_nu\": {}, ",
                "\"primal\": {}, \"dual\": {}, \"gap\": {}, \"iterations\": {}}}}}"
            ),
            sig12(self.z2),
            sig12(self.c_value),
            alpha,
            sig12(self.forward_projection_distance),
            sig12(self.backward_projection_distance),
            sig12(self.residual_mu),
            sig12(self.residual_nu),
            sig12(self.primal_residual),
            sig12(self.dual_residual),
            sig12(self.gap),
            self.solve_iterations,
        )
    }
}

/// Default clustering radius for [`pushforward_rho`]: the solver-noise
/// scale relative to the spread of the supports.
pub fn default_merge_radius(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    1e-6 * (1.0 + mu.diameter().max(nu.diameter()))
}

/// The pushforward `rho = zeta # gamma`: one atom per supported pair,
/// clustered within `merge_radius` (mass-weighted means).
pub fn pushforward_rho(plan: &BiMartingalePlan, merge_radius: f64) -> Result<DiscreteMeasure> {
    let mut atoms: Vec<(f64, Vec<f64>)> = Vec::new();
    for i in 0..plan.n_mu() {
        for j in 0..plan.n_nu() {
            if let Some(z) = plan.zeta_at(i, j) {
                atoms.push((plan.gamma_at(i, j), z.to_vec()));
            }
        }
    }
    let rho = DiscreteMeasure::new(plan.dim(), &atoms)?;
    Ok(rho.merge_within(merge_radius))
}

/// One quadratic solve for the pair, yielding all order diagnostics.
pub fn z2(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    settings: &SolverSettings,
) -> Result<OrderDiagnostics> {
    let (report, map) = build_and_solve(mu, nu, &ObjectiveSpec::Quadratic, settings)?;
    if report.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal(report.status));
    }
    let plan = extract_plan(&report, &map, DEFAULT_GAMMA_FLOOR)?;
    let (residual_mu, residual_nu) = martingale_residual(&plan);
    let m2_mu = mu.second_moment();
    let m2_nu = nu.second_moment();
    let c_value = report.objective_value;
    let z2 = c_value - 0.5 * (m2_mu + m2_nu);
    let half_gap = 0.5 * (m2_nu - m2_mu);
    let alpha = if z2 > Z2_DEFINED_FLOOR * (1.0 + m2_mu + m2_nu) {
        Some(half_gap / z2)
    } else {
        None
    };
    Ok(OrderDiagnostics {
        z2,
        c_value,
        alpha,
        forward_projection_distance: 0.5 * (z2 - half_gap),
        backward_projection_distance: 0.5 * (z2 + half_gap),
        residual_mu,
        residual_nu,
        solve_iterations: report.iterations,
        primal_residual: report.primal_residual,
        dual_residual: report.dual_residual,
        gap: report.gap,
    })
}

/// A measure attaining the least quadratic dominance cost: the pushforward
/// of the quadratic solve. It dominates both inputs in convex order and is
/// one element of the (possibly non-singleton) projection set of either
/// measure onto the dominance cone of the other.
pub fn zolotarev_project(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    settings: &SolverSettings,
) -> Result<DiscreteMeasure> {
    let (report, map) = build_and_solve(mu, nu, &ObjectiveSpec::Quadratic, settings)?;
    if report.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal(report.status));
    }
    let plan = extract_plan(&report, &map, DEFAULT_GAMMA_FLOOR)?;
    pushforward_rho(&plan, default_merge_radius(mu, nu))
}

/// L1-aggregated residuals of the two conditional-mean constraints:
/// `res1 = sum_i |sum_j q_ij - mu_i x_i|`, `res2` symmetrically over `j`.
pub fn martingale_residual(plan: &BiMartingalePlan) -> (f64, f64) {
    let d = plan.dim();
    let mut res1 = 0.0;
    for (i, (w, x)) in plan.mu.atoms().enumerate() {
        let mut acc = vec![0.0; d];
        for j in 0..plan.n_nu() {
            for (k, a) in acc.iter_mut().enumerate() {
                *a += plan.q_at(i, j)[k];
            }
        }
        for (k, a) in acc.iter_mut().enumerate() {
            *a -= w * x[k];
        }
        res1 += sq_norm(&acc).sqrt();
    }
    let mut res2 = 0.0;
    for (j, (w, y)) in plan.nu.atoms().enumerate() {
        let mut acc = vec![0.0; d];
        for i in 0..plan.n_mu() {
            for (k, a) in acc.iter_mut().enumerate() {
                *a += plan.q_at(i, j)[k];
            }
        }
        for (k, a) in acc.iter_mut().enumerate() {
            *a -= w * y[k];
        }
        res2 += sq_norm(&acc).sqrt();
    }
    (res1, res2)
}

/// The Wasserstein-2 distance via the transport linear program on the full
/// product support.
pub fn wasserstein2(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    settings: &SolverSettings,
) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let (n_mu, n_nu) = (mu.len(), nu.len());
    let nvars = n_mu * n_nu;
    let mut objective = vec![0.0; nvars];
    let mut triplets = Vec::with_capacity(2 * nvars);
    for (i, (_, x)) in mu.atoms().enumerate() {
        for (j, (_, y)) in nu.atoms().enumerate() {
            let col = i * n_nu + j;
            objective[col] = dist(x, y).powi(2);
            triplets.push((i, col, 1.0));
            triplets.push((n_mu + j, col, 1.0));
        }
    }
    let mut b = mu.weights().to_vec();
    b.extend_from_slice(nu.weights());
    let prog = ConicProgram {
        nvars,
        objective,
        a: CscMatrix::from_triplets(n_mu + n_nu, nvars, &triplets),
        b,
        cone_blocks: vec![(ConeBlock::Nonnegative(nvars), 0..nvars)],
    };
    let report = solve(&prog, settings)?;
    if report.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal(report.status));
    }
    Ok(report.objective_value.max(0.0).sqrt())
}

/// Whether a martingale coupling from `mu` to `rho` exists, i.e. whether
/// `rho` dominates `mu` in convex order, decided by a feasibility linear
/// program (zero objective) at tolerance `tol` on the primal residual.
pub fn strassen_feasible(mu: &DiscreteMeasure, rho: &DiscreteMeasure, tol: f64) -> Result<bool> {
    if mu.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: rho.dim(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let gap = dist(&mu.barycentre(), &rho.barycentre());
    if gap > 1e-8 {
        // Equal barycentres are necessary for convex order.
        return Ok(false);
    }
    let d = mu.dim();
    let (n_mu, n_rho) = (mu.len(), rho.len());
    let nvars = n_mu * n_rho;
    let mut triplets = Vec::with_capacity(nvars * (2 + d));
    for i in 0..n_mu {
        for (j, (_, z)) in rho.atoms().enumerate() {
            let col = i * n_rho + j;
            triplets.push((i, col, 1.0));
            triplets.push((n_mu + j, col, 1.0));
            for k in 0..d {
                triplets.push((n_mu + n_rho + i * d + k, col, z[k]));
            }
        }
    }
    let mut b = mu.weights().to_vec();
    b.extend_from_slice(rho.weights());
    for (w, x) in mu.atoms() {
        for k in 0..d {
            b.push(w * x[k]);
        }
    }
    let prog = ConicProgram {
        nvars,
        objective: vec![0.0; nvars],
        a: CscMatrix::from_triplets(n_mu + n_rho + d * n_mu, nvars, &triplets),
        b,
        cone_blocks: vec![(ConeBlock::Nonnegative(nvars), 0..nvars)],
    };
    let settings = SolverSettings {
        tol_feas: (tol * 0.1).min(1e-8),
        ..Default::default()
    };
    let report = solve(&prog, &settings)?;
    Ok(match report.status {
        SolveStatus::Optimal => report.primal_residual <= tol,
        _ => false,
    })
}
