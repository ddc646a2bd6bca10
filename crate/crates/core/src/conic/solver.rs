//! First-order solver: Douglas-Rachford splitting on the homogeneous
//! self-dual embedding of `min c'x s.t. Ax = b, x in K`, with safeguarded
//! Anderson acceleration of the fixed-point iteration.
//!
//! The embedding couples `u = (x, y, tau)` and `v = (s, 0, kappa)` through
//! the skew map `Q`, with `u` constrained to `K x R^m x R_+` and `v` to the
//! dual. Each iteration alternates one linear solve with the constant
//! quasidefinite KKT matrix and one cone projection; `tau > 0` at a fixed
//! point yields an optimal pair, `tau = 0` a feasibility certificate.
//! Acceleration extrapolates over a short history of iterates and falls
//! back to the plain step whenever the fixed-point residual grows, which
//! keeps the tail convergence of the splitting method from stalling on
//! degenerate programs. All loops are fixed-order and single-threaded, so
//! identical inputs and settings reproduce identical output bits.

use super::cones::project_in_place;
use super::ldl::KktSolver;
use super::sparse::{dot, norm2, CscMatrix};
use super::{ConeBlock, ConicProgram, SolveReport, SolveStatus, SolverSettings};
use crate::error::{Error, Result};

const CHECK_INTERVAL: usize = 25;
const RELAXATION: f64 = 1.5;
const RUIZ_ITERS: usize = 15;
const TAU_FLOOR: f64 = 1e-12;
/// Anderson memory; shorter on very large programs to bound the history.
const AA_MEMORY: usize = 10;
const AA_MEMORY_LARGE: usize = 5;
const AA_LARGE_THRESHOLD: usize = 400_000;
/// Reject an accelerated point when its residual exceeds this multiple of
/// the current one.
const AA_SAFEGUARD: f64 = 1.2;

struct ScaledData {
    a: CscMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Row scaling.
    d: Vec<f64>,
    /// Column scaling, uniform within second-order and power blocks.
    e: Vec<f64>,
    sb: f64,
    sc: f64,
}

impl ScaledData {
    fn new(prog: &ConicProgram, enable: bool) -> Self {
        let n = prog.nvars;
        let m = prog.b.len();
        let mut a = prog.a.clone();
        let mut d = vec![1.0; m];
        let mut e = vec![1.0; n];
        if enable {
            for _ in 0..RUIZ_ITERS {
                let mut row_max = vec![0.0f64; m];
                let mut col_max = vec![0.0f64; n];
                for c in 0..n {
                    for p in a.col_ptr[c]..a.col_ptr[c + 1] {
                        let v = a.values[p].abs();
                        let r = a.row_idx[p];
                        if v > row_max[r] {
                            row_max[r] = v;
                        }
                        if v > col_max[c] {
                            col_max[c] = v;
                        }
                    }
                }
                let spread = row_max
                    .iter()
                    .chain(col_max.iter())
                    .filter(|v| **v > 0.0)
                    .map(|v| (v - 1.0).abs())
                    .fold(0.0f64, f64::max);
                if spread < 1e-3 {
                    break;
                }
                let dr: Vec<f64> = row_max
                    .iter()
                    .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
                    .collect();
                let mut dc: Vec<f64> = col_max
                    .iter()
                    .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 })
                    .collect();
                // Second-order and power cones only admit a uniform scaling
                // of their slice; use the geometric mean.
                for (block, range) in &prog.cone_blocks {
                    if matches!(block, ConeBlock::SecondOrder(_) | ConeBlock::Power { .. }) {
                        let mean = dc[range.clone()].iter().map(|v| v.ln()).sum::<f64>()
                            / range.len() as f64;
                        let mean = mean.exp();
                        for j in range.clone() {
                            dc[j] = mean;
                        }
                    }
                }
                for c in 0..n {
                    for p in a.col_ptr[c]..a.col_ptr[c + 1] {
                        a.values[p] *= dr[a.row_idx[p]] * dc[c];
                    }
                }
                for (di, ri) in d.iter_mut().zip(&dr) {
                    *di *= ri;
                }
                for (ej, cj) in e.iter_mut().zip(&dc) {
                    *ej *= cj;
                }
            }
        }
        let mut b: Vec<f64> = prog.b.iter().zip(&d).map(|(v, di)| v * di).collect();
        let mut c: Vec<f64> = prog
            .objective
            .iter()
            .zip(&e)
            .map(|(v, ej)| v * ej)
            .collect();
        let nb = norm2(&b);
        let nc = norm2(&c);
        let sb = if enable && nb > 1e-12 { 1.0 / nb } else { 1.0 };
        let sc = if enable && nc > 1e-12 { 1.0 / nc } else { 1.0 };
        for v in &mut b {
            *v *= sb;
        }
        for v in &mut c {
            *v *= sc;
        }
        Self {
            a,
            b,
            c,
            d,
            e,
            sb,
            sc,
        }
    }
}

/// One Douglas-Rachford step of the embedding; the state is `[u, v]`
/// concatenated.
struct DrEngine<'p> {
    prog: &'p ConicProgram,
    scaled: ScaledData,
    kkt: KktSolver,
    g_x: Vec<f64>,
    g_y: Vec<f64>,
    den: f64,
    n: usize,
    m: usize,
    total: usize,
    newton_warm: Vec<f64>,
    utilde: Vec<f64>,
    w: Vec<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl<'p> DrEngine<'p> {
    fn new(prog: &'p ConicProgram, scaling: bool) -> Result<Self> {
        let n = prog.nvars;
        let m = prog.b.len();
        let scaled = ScaledData::new(prog, scaling);
        let kkt = KktSolver::new(&scaled.a).map_err(Error::Internal)?;
        let mut g_x = vec![0.0; n];
        let mut g_y = vec![0.0; m];
        let neg_b: Vec<f64> = scaled.b.iter().map(|v| -v).collect();
        solve_m(&kkt, &scaled.c, &neg_b, &mut g_x, &mut g_y);
        let den = 1.0 + dot(&scaled.c, &g_x) - dot(&scaled.b, &g_y);
        if !(den > 0.0) || !den.is_finite() {
            return Err(Error::Internal(format!(
                "degenerate embedding denominator {den}"
            )));
        }
        Ok(Self {
            prog,
            scaled,
            kkt,
            g_x,
            g_y,
            den,
            n,
            m,
            total: n + m + 1,
            newton_warm: vec![f64::NAN; prog.cone_blocks.len()],
            utilde: vec![0.0; n + m + 1],
            w: vec![0.0; n + m + 1],
            px: vec![0.0; n],
            py: vec![0.0; m],
        })
    }

    /// `state_out = G(state_in)` where `G` is one relaxed splitting step.
    fn step(&mut self, state_in: &[f64], state_out: &mut [f64]) -> Result<()> {
        let (n, m, total) = (self.n, self.m, self.total);
        let (u, v) = state_in.split_at(total);
        // utilde = (I + Q)^{-1} (u + v); the rhs is staged in utilde.
        {
            for k in 0..total {
                self.utilde[k] = u[k] + v[k];
            }
            let (rhs_x, rest) = self.utilde.split_at(n);
            let rhs_y = &rest[..m];
            solve_m(&self.kkt, rhs_x, rhs_y, &mut self.px, &mut self.py);
            let tau = (u[n + m] + v[n + m] + dot(&self.scaled.c, &self.px)
                - dot(&self.scaled.b, &self.py))
                / self.den;
            for j in 0..n {
                self.utilde[j] = self.px[j] - tau * self.g_x[j];
            }
            for i in 0..m {
                self.utilde[n + i] = self.py[i] - tau * self.g_y[i];
            }
            self.utilde[n + m] = tau;
        }
        for k in 0..total {
            self.w[k] = RELAXATION * self.utilde[k] + (1.0 - RELAXATION) * u[k];
        }
        let (u_out, v_out) = state_out.split_at_mut(total);
        for k in 0..total {
            u_out[k] = self.w[k] - v[k];
        }
        for (bi, (block, range)) in self.prog.cone_blocks.iter().enumerate() {
            project_in_place(&mut u_out[range.clone()], block, &mut self.newton_warm[bi])?;
        }
        if u_out[n + m] < 0.0 {
            u_out[n + m] = 0.0;
        }
        for k in 0..total {
            v_out[k] = v[k] + u_out[k] - self.w[k];
        }
        Ok(())
    }

    fn extract_candidate(&self, state: &[f64]) -> Option<Candidate> {
        let (n, m, total) = (self.n, self.m, self.total);
        let (u, v) = state.split_at(total);
        let tau = u[n + m];
        if tau <= TAU_FLOOR {
            return None;
        }
        let scaled = &self.scaled;
        let prog = self.prog;
        let x: Vec<f64> = (0..n)
            .map(|j| scaled.e[j] * u[j] / (tau * scaled.sb))
            .collect();
        let y: Vec<f64> = (0..m)
            .map(|i| scaled.d[i] * u[n + i] / (tau * scaled.sc))
            .collect();
        let s: Vec<f64> = (0..n)
            .map(|j| v[j] / (scaled.e[j] * tau * scaled.sc))
            .collect();

        let mut pres_vec: Vec<f64> = prog.b.iter().map(|t| -t).collect();
        prog.a.mul_acc(1.0, &x, &mut pres_vec);
        let mut dres_vec: Vec<f64> = s
            .iter()
            .zip(&prog.objective)
            .map(|(si, ci)| si - ci)
            .collect();
        prog.a.mul_t_acc(1.0, &y, &mut dres_vec);

        let pobj = dot(&prog.objective, &x);
        let dobj = dot(&prog.b, &y);
        Some(Candidate {
            objective: pobj,
            pres: norm2(&pres_vec) / (1.0 + norm2(&prog.b)),
            dres: norm2(&dres_vec) / (1.0 + norm2(&prog.objective)),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            x,
            y,
        })
    }

    /// Infeasibility/unboundedness certificates from the homogeneous
    /// iterate; `tol` bounds the relative certificate residual.
    fn check_certificates(&self, state: &[f64], tol: f64) -> Option<(SolveStatus, Candidate)> {
        let (n, m, total) = (self.n, self.m, self.total);
        let (u, v) = state.split_at(total);
        let scaled = &self.scaled;
        let prog = self.prog;
        let norm_b = norm2(&prog.b);
        let norm_c = norm2(&prog.objective);

        let xcert: Vec<f64> = (0..n).map(|j| scaled.e[j] * u[j]).collect();
        let ctx = dot(&prog.objective, &xcert);
        if ctx < 0.0 && norm_c > 0.0 {
            let mut ax = vec![0.0; m];
            prog.a.mul_acc(1.0, &xcert, &mut ax);
            if norm2(&ax) * norm_c <= -ctx * tol {
                let scale = -1.0 / ctx;
                return Some((
                    SolveStatus::Unbounded,
                    Candidate {
                        x: xcert.iter().map(|t| t * scale).collect(),
                        y: vec![0.0; m],
                        objective: f64::NAN,
                        pres: norm2(&ax) * scale,
                        dres: f64::NAN,
                        gap: f64::NAN,
                    },
                ));
            }
        }
        let ycert: Vec<f64> = (0..m).map(|i| scaled.d[i] * u[n + i]).collect();
        let bty = dot(&prog.b, &ycert);
        if bty > 0.0 && norm_b > 0.0 {
            let mut aty: Vec<f64> = (0..n).map(|j| v[j] / scaled.e[j]).collect();
            prog.a.mul_t_acc(1.0, &ycert, &mut aty);
            if norm2(&aty) * norm_b <= bty * tol {
                let scale = 1.0 / bty;
                return Some((
                    SolveStatus::Infeasible,
                    Candidate {
                        x: vec![0.0; n],
                        y: ycert.iter().map(|t| t * scale).collect(),
                        objective: f64::NAN,
                        pres: f64::NAN,
                        dres: norm2(&aty) * scale,
                        gap: f64::NAN,
                    },
                ));
            }
        }
        None
    }
}

struct Candidate {
    x: Vec<f64>,
    y: Vec<f64>,
    objective: f64,
    pres: f64,
    dres: f64,
    gap: f64,
}

/// Anderson acceleration (type II) over a short difference history, with a
/// Tikhonov-regularized least-squares combine. The Gram matrix of the
/// residual differences is maintained incrementally; evicted history
/// buffers are returned for reuse.
struct Anderson {
    memory: usize,
    dx: std::collections::VecDeque<Vec<f64>>,
    dg: std::collections::VecDeque<Vec<f64>>,
    /// `gram[i * memory + j] = <dg_i, dg_j>` over the active window.
    gram: Vec<f64>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self {
            memory,
            dx: Default::default(),
            dg: Default::default(),
            gram: vec![0.0; memory * memory],
        }
    }

    fn clear(&mut self) -> Vec<Vec<f64>> {
        let mut spares: Vec<Vec<f64>> = self.dx.drain(..).collect();
        spares.extend(self.dg.drain(..));
        spares
    }

    fn push(&mut self, dx: Vec<f64>, dg: Vec<f64>) -> Vec<Vec<f64>> {
        if self.memory == 0 {
            return vec![dx, dg];
        }
        let mut spares = Vec::new();
        if self.dx.len() == self.memory {
            spares.push(self.dx.pop_front().unwrap());
            spares.push(self.dg.pop_front().unwrap());
            // Shift the Gram window up-left.
            let mm = self.memory;
            for i in 1..mm {
                for j in 1..mm {
                    self.gram[(i - 1) * mm + (j - 1)] = self.gram[i * mm + j];
                }
            }
        }
        let k = self.dx.len();
        let mm = self.memory;
        for i in 0..k {
            let v = dot(&self.dg[i], &dg);
            self.gram[i * mm + k] = v;
            self.gram[k * mm + i] = v;
        }
        self.gram[k * mm + k] = dot(&dg, &dg);
        self.dx.push_back(dx);
        self.dg.push_back(dg);
        spares
    }

    /// Writes the candidate `G(x) - (DX + DG) theta` into `out`, with
    /// `theta = argmin |g - DG theta|`. Returns false when no history.
    fn candidate_into(&self, gx: &[f64], g: &[f64], out: &mut [f64]) -> bool {
        let mem = self.dx.len();
        if mem == 0 {
            return false;
        }
        let mm = self.memory;
        let mut normal = vec![0.0; mem * mem];
        let mut rhs = vec![0.0; mem];
        for i in 0..mem {
            for j in 0..mem {
                normal[i * mem + j] = self.gram[i * mm + j];
            }
            rhs[i] = dot(&self.dg[i], g);
        }
        let trace: f64 = (0..mem).map(|i| normal[i * mem + i]).sum();
        let reg = 1e-12 * (trace / mem as f64).max(1e-30);
        for i in 0..mem {
            normal[i * mem + i] += reg;
        }
        let Some(theta) = solve_dense(&mut normal, &mut rhs, mem) else {
            return false;
        };
        out.copy_from_slice(gx);
        for i in 0..mem {
            let t = theta[i];
            if t == 0.0 {
                continue;
            }
            for (o, (a, b)) in out.iter_mut().zip(self.dx[i].iter().zip(&self.dg[i])) {
                *o -= t * (a + b);
            }
        }
        true
    }
}

/// Gaussian elimination with partial pivoting for the tiny least-squares
/// normal system.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let inv = 1.0 / a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

/// Solves the program. Statuses other than `Optimal` are reported, not
/// raised; `Err` is reserved for invalid inputs and internal failures.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<SolveReport> {
    prog.validate()?;
    if !(settings.tol_feas > 0.0 && settings.tol_gap > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let n = prog.nvars;
    let m = prog.b.len();
    let total = n + m + 1;
    let state_len = 2 * total;

    let mut engine = DrEngine::new(prog, settings.scaling)?;

    // state = [u, v]; cold start puts unit mass on tau and kappa.
    let mut x = vec![0.0; state_len];
    x[n + m] = 1.0;
    x[state_len - 1] = 1.0;
    if let Some((x0, y0)) = &settings.warm_start {
        if x0.len() == n && y0.len() == m {
            for j in 0..n {
                x[j] = engine.scaled.sb * x0[j] / engine.scaled.e[j];
            }
            for i in 0..m {
                x[n + i] = engine.scaled.sc * y0[i] / engine.scaled.d[i];
            }
            let mut s0 = prog.objective.clone();
            prog.a.mul_t_acc(-1.0, y0, &mut s0);
            for (block, range) in &prog.cone_blocks {
                let proj = super::cones::project_dual_cone(&s0[range.clone()], block)?;
                s0[range.clone()].copy_from_slice(&proj);
            }
            for j in 0..n {
                x[total + j] = engine.scaled.sc * engine.scaled.e[j] * s0[j];
            }
            x[state_len - 1] = 0.0;
        }
    }

    let memory = if state_len > AA_LARGE_THRESHOLD {
        AA_MEMORY_LARGE
    } else {
        AA_MEMORY
    };
    let mut aa = Anderson::new(memory);

    let mut gx = vec![0.0; state_len];
    engine.step(&x, &mut gx)?;
    let mut g: Vec<f64> = gx.iter().zip(&x).map(|(a, b)| a - b).collect();
    let mut rel_res = relative_residual(&g, &x);

    // The splitting map is positively homogeneous, so the iterate can be
    // renormalized freely. Keeping its norm in a band around this target
    // stops acceleration from collapsing onto the trivial zero ray and
    // keeps the history well scaled.
    let norm_target = (state_len as f64).sqrt();

    let mut scratch = vec![0.0; state_len];
    let mut cand = vec![0.0; state_len];
    let mut g_cand = vec![0.0; state_len];
    let mut spares: Vec<Vec<f64>> = Vec::new();
    let mut take_spare =
        |spares: &mut Vec<Vec<f64>>| spares.pop().unwrap_or_else(|| vec![0.0; state_len]);
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIterations;
    let mut final_candidate: Option<Candidate> = None;

    for iter in 1..=settings.max_iter {
        iterations = iter;

        if !aa.candidate_into(&gx, &g, &mut cand) {
            cand.copy_from_slice(&gx);
        }
        engine.step(&cand, &mut scratch)?;
        for k in 0..state_len {
            g_cand[k] = scratch[k] - cand[k];
        }
        let mut rel_cand = relative_residual(&g_cand, &cand);
        if !aa.dx.is_empty() && (rel_cand > AA_SAFEGUARD * rel_res || !rel_cand.is_finite()) {
            // Accelerated point rejected: plain splitting step instead.
            spares.extend(aa.clear());
            cand.copy_from_slice(&gx);
            engine.step(&cand, &mut scratch)?;
            for k in 0..state_len {
                g_cand[k] = scratch[k] - cand[k];
            }
            rel_cand = relative_residual(&g_cand, &cand);
        }
        let mut dx = take_spare(&mut spares);
        let mut dg = take_spare(&mut spares);
        for k in 0..state_len {
            dx[k] = cand[k] - x[k];
            dg[k] = g_cand[k] - g[k];
        }
        spares.extend(aa.push(dx, dg));
        std::mem::swap(&mut x, &mut cand);
        std::mem::swap(&mut gx, &mut scratch);
        std::mem::swap(&mut g, &mut g_cand);
        rel_res = rel_cand;

        let xnorm = norm2(&x);
        if !(0.25 * norm_target..=4.0 * norm_target).contains(&xnorm) {
            spares.extend(aa.clear());
            if xnorm > 1e-10 * norm_target {
                let s = norm_target / xnorm;
                for v in x.iter_mut() {
                    *v *= s;
                }
                for v in gx.iter_mut() {
                    *v *= s;
                }
                for v in g.iter_mut() {
                    *v *= s;
                }
            } else {
                // Full collapse: restart from the cold-start ray.
                x.fill(0.0);
                x[n + m] = 1.0;
                x[state_len - 1] = 1.0;
                engine.step(&x, &mut gx)?;
                for k in 0..state_len {
                    g[k] = gx[k] - x[k];
                }
                rel_res = relative_residual(&g, &x);
            }
        }

        if iter % CHECK_INTERVAL == 0 || iter == settings.max_iter {
            // The image point is post-projection: its u lies in the cone
            // and its v in the dual, as the reported solution must.
            if let Some(c) = engine.extract_candidate(&gx) {
                let optimal = c.pres <= settings.tol_feas
                    && c.dres <= settings.tol_feas
                    && c.gap <= settings.tol_gap;
                final_candidate = Some(c);
                if optimal {
                    status = SolveStatus::Optimal;
                    break;
                }
            }
            if let Some((s, c)) = engine.check_certificates(&gx, settings.tol_feas) {
                status = s;
                final_candidate = Some(c);
                break;
            }
        }
    }

    let cand = final_candidate.unwrap_or(Candidate {
        x: vec![0.0; n],
        y: vec![0.0; m],
        objective: f64::NAN,
        pres: f64::INFINITY,
        dres: f64::INFINITY,
        gap: f64::INFINITY,
    });
    Ok(SolveReport {
        status,
        x: cand.x,
        y: cand.y,
        objective_value: cand.objective,
        primal_residual: cand.pres,
        dual_residual: cand.dres,
        gap: cand.gap,
        iterations,
        tol_feas: settings.tol_feas,
        tol_gap: settings.tol_gap,
    })
}

fn relative_residual(g: &[f64], x: &[f64]) -> f64 {
    norm2(g) / norm2(x).max(1e-300)
}

/// Solves `[[I, -A^T], [A, I]] (px, py) = (hx, hy)` through the symmetric
/// quasidefinite factorization of `[[I, A^T], [A, -I]]`.
fn solve_m(kkt: &KktSolver, hx: &[f64], hy: &[f64], px: &mut [f64], py: &mut [f64]) {
    kkt.solve(hx, hy, px, py);
    for v in py.iter_mut() {
        *v = -*v;
    }
}
