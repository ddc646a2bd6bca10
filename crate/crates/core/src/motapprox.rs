//! Penalized approximation of martingale optimal transport.
//!
//! Exact martingale transport is unstable under perturbation of the
//! marginals in dimension two and higher. The remedy implemented here
//! replaces the hard conditional-mean constraint with a quadratic coupling
//! penalty `(1/2 eps_n)(integral |dq/dgamma|^2 dgamma - C(mu_n, nu_n))`
//! added to the transport cost, solved per `n` over a schedule `eps_n`
//! shrinking slowly enough relative to the marginals' distance to their
//! limits. Costs then converge to the exact martingale transport cost of
//! the limit data.

use crate::conic::{SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::m2ot::{
    build, build_and_solve, extract_plan, ObjectiveSpec, DEFAULT_GAMMA_FLOOR,
};
use crate::measure::{dist, DiscreteMeasure};

/// Floor for vanishing gaps in [`epsilon_schedule`].
pub const EPSILON_GAP_FLOOR: f64 = 1e-12;

/// The `n` values used by the demonstration sequence.
pub const DEMO_NS: [usize; 11] = [1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000];

/// Builds a penalty schedule from distance gaps: `eps_n = max(gap_n,
/// floor)^exponent` with `exponent` in (0, 1), so that `gap_n / eps_n =
/// gap_n^(1 - exponent)` vanishes whenever the gaps do.
pub fn epsilon_schedule(z2_gaps: &[f64], exponent: f64) -> Result<Vec<f64>> {
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "schedule exponent must lie in (0,1), got {exponent}"
        )));
    }
    if z2_gaps.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::InvalidArgument("gaps must be nonnegative".into()));
    }
    Ok(z2_gaps
        .iter()
        .map(|g| g.max(EPSILON_GAP_FLOOR).powf(exponent))
        .collect())
}

/// Distance-gap bound for the rotating four-point family of
/// [`instability_demo`]: the standard-deviation bound on the quadratic
/// order distance gives `sqrt(5) pi / (4 n)`.
pub fn demo_gap(n: usize) -> f64 {
    5.0f64.sqrt() * std::f64::consts::PI / (4.0 * n as f64)
}

/// Data for the instability demonstration: a two-point first marginal on
/// the horizontal axis and a four-point second marginal rotated off-axis
/// by `pi / (2n)`, with the Euclidean distance cost. For every `n` the
/// exact martingale transport is trivial and its cost stays at 1, while
/// the limit problem has cost 2/3; the penalized sequence recovers the
/// limit value.
pub fn instability_demo(
    n: usize,
) -> Result<(DiscreteMeasure, DiscreteMeasure, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let x1 = [-0.5, 0.0];
    let x2 = [0.5, 0.0];
    let theta = std::f64::consts::PI / (2.0 * n as f64);
    let r = [theta.cos(), theta.sin()];
    let ys = [
        [x1[0] - r[0], x1[1] - r[1]],
        [x2[0] - r[0], x2[1] - r[1]],
        [x1[0] + r[0], x1[1] + r[1]],
        [x2[0] + r[0], x2[1] + r[1]],
    ];
    let mu = DiscreteMeasure::new(2, &[(0.5, x1.to_vec()), (0.5, x2.to_vec())])?;
    let nu = DiscreteMeasure::new(
        2,
        &ys.iter().map(|y| (0.25, y.to_vec())).collect::<Vec<_>>(),
    )?;
    let cost = distance_cost(&mu, &nu);
    Ok((mu, nu, cost))
}

/// Euclidean distance cost matrix in the measures' atom order.
pub fn distance_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for (_, x) in mu.atoms() {
        for (_, y) in nu.atoms() {
            cost.push(dist(x, y));
        }
    }
    cost
}

/// Squared Euclidean distance cost matrix in the measures' atom order.
pub fn squared_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for (_, x) in mu.atoms() {
        for (_, y) in nu.atoms() {
            let d = dist(x, y);
            cost.push(d * d);
        }
    }
    cost
}

/// One row of a convergence report.
#[derive(Debug, Clone)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub epsilon: f64,
    /// `sum_ij c_ij gamma_ij` of the penalized optimum.
    pub transport_cost: f64,
    /// `(sum r - C_n) / (2 eps_n)`, the penalty actually paid.
    pub penalty_value: f64,
    /// Least quadratic dominance cost of the pair.
    pub c_n: f64,
    /// Martingale residuals of the penalized plan.
    pub res1: f64,
    pub res2: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Records of a penalized sequence run. `aborted` carries the first `n`
/// whose solve failed, with the partial records preserved.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
    pub limit_estimate: Option<f64>,
    pub aborted: Option<(usize, SolveStatus)>,
}

impl ConvergenceReport {
    /// CSV form: `n,epsilon,cost,penalty,c_n,res1,res2,iterations,status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,epsilon,cost,penalty,c_n,res1,res2,iterations,status\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:?}\n",
                r.n,
                sig12(r.epsilon),
                sig12(r.transport_cost),
                sig12(r.penalty_value),
                sig12(r.c_n),
                sig12(r.res1),
                sig12(r.res2),
                r.iterations,
                r.status
            ));
        }
        out
    }

    /// A small static line plot of transport cost against `n`
    /// (logarithmic in `n`).
    pub fn cost_plot_svg(&self) -> String {
        let (w, h, ml, mb) = (480.0, 320.0, 50.0, 40.0);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
             viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
        );
        if self.records.is_empty() {
            svg.push_str("</svg>\n");
            return svg;
        }
        let xs: Vec<f64> = self.records.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = self.records.iter().map(|r| r.transport_cost).collect();
        let (x0, x1) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let (mut y0, mut y1) = (ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let sx = |x: f64| {
            if x1 > x0 {
                ml + (w - ml - 20.0) * (x - x0) / (x1 - x0)
            } else {
                ml
            }
        };
        let sy = |y: f64| (h - mb) - (h - mb - 20.0) * (y - y0) / (y1 - y0);
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            h - mb,
            w - 10.0,
            h - mb
        ));
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"10\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
            h - mb
        ));
        let pts: Vec<String> = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        for p in &pts {
            let (px, py) = p.split_once(',').unwrap();
            svg.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.5\" fill=\"steelblue\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">n (log)</text>\n",
            w / 2.0,
            h - 10.0
        ));
        svg.push_str(&format!(
            "<text x=\"6\" y=\"{}\" font-size=\"11\">{}</text>\n",
            sy(y1) + 4.0,
            sig12(y1)
        ));
        svg.push_str(&format!(
            "<text x=\"6\" y=\"{}\" font-size=\"11\">{}</text>\n",
            sy(y0) + 4.0,
            sig12(y0)
        ));
        svg.push_str("</svg>\n");
        svg
    }
}

/// Runs the penalized sequence. `data_fn(n)` supplies the marginals and
/// the cost matrix (indexed by the measures' atom order); all data is
/// recentred to the first pair's barycentre. Solves are warm-started from
/// the previous `n` when requested (and shapes allow), which makes the run
/// sequential by contract. A non-optimal solve aborts the run with the
/// partial records kept.
pub fn run_sequence<F>(
    mut data_fn: F,
    ns: &[usize],
    schedule: &[f64],
    warm_start: bool,
    settings: &SolverSettings,
) -> Result<ConvergenceReport>
where
    F: FnMut(usize) -> Result<(DiscreteMeasure, DiscreteMeasure, Vec<f64>)>,
{
    if ns.is_empty() {
        return Err(Error::InvalidArgument("empty n list".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n list must be strictly increasing".into()));
    }
    if schedule.len() != ns.len() {
        return Err(Error::InvalidArgument(format!(
            "schedule has {} entries for {} n values",
            schedule.len(),
            ns.len()
        )));
    }
    if schedule.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("epsilons must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("epsilons must not increase".into()));
    }

    let mut report = ConvergenceReport {
        records: Vec::with_capacity(ns.len()),
        limit_estimate: None,
        aborted: None,
    };
    let mut barycentre: Option<Vec<f64>> = None;
    let mut prev_quad: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut prev_pen: Option<(Vec<f64>, Vec<f64>)> = None;

    for (&n, &epsilon) in ns.iter().zip(schedule) {
        let (mu_raw, nu_raw, cost) = data_fn(n)?;
        let b = barycentre.get_or_insert_with(|| mu_raw.barycentre()).clone();
        let mu = mu_raw.recentre(&b)?;
        let nu = nu_raw.recentre(&b)?;

        let mut quad_settings = settings.clone();
        if warm_start {
            quad_settings.warm_start = prev_quad.take();
        }
        let (quad_report, _) =
            build_and_solve(&mu, &nu, &ObjectiveSpec::Quadratic, &quad_settings)?;
        if quad_report.status != SolveStatus::Optimal {
            report.aborted = Some((n, quad_report.status));
            return Ok(report);
        }
        let c_n = quad_report.objective_value;
        if warm_start {
            prev_quad = Some((quad_report.x.clone(), quad_report.y.clone()));
        }

        let spec = ObjectiveSpec::MotPenalty {
            cost: cost.clone(),
            epsilon,
        };
        let (program, map) = build(&mu, &nu, &spec)?;
        let mut pen_settings = settings.clone();
        if warm_start {
            pen_settings.warm_start = prev_pen
                .take()
                .filter(|(x, y)| x.len() == program.nvars && y.len() == program.b.len());
        }
        let pen_report = crate::conic::solve(&program, &pen_settings)?;
        if pen_report.status != SolveStatus::Optimal {
            report.aborted = Some((n, pen_report.status));
            return Ok(report);
        }
        if warm_start {
            prev_pen = Some((pen_report.x.clone(), pen_report.y.clone()));
        }
        let plan = extract_plan(&pen_report, &map, DEFAULT_GAMMA_FLOOR)?;
        let (res1, res2) = crate::analysis::martingale_residual(&plan);
        let sum_r = map.sum_r(&pen_report.x);
        let record = ConvergenceRecord {
            n,
            epsilon,
            transport_cost: plan.transport_cost.expect("penalty objective"),
            penalty_value: (sum_r - c_n) / (2.0 * epsilon),
            c_n,
            res1,
            res2,
            iterations: pen_report.iterations,
            status: pen_report.status,
        };
        report.limit_estimate = Some(record.transport_cost);
        report.records.push(record);
    }
    Ok(report)
}

/// The demonstration run: rotating four-point data over the given `n`
/// values with the closed-form gap schedule.
pub fn demo_sequence(
    ns: &[usize],
    warm_start: bool,
    settings: &SolverSettings,
) -> Result<ConvergenceReport> {
    let gaps: Vec<f64> = ns.iter().map(|&n| demo_gap(n)).collect();
    let schedule = epsilon_schedule(&gaps, 0.5)?;
    run_sequence(
        |n| instability_demo(n),
        ns,
        &schedule,
        warm_start,
        settings,
    )
}
