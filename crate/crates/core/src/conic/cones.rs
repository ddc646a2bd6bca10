//! Cone blocks and Euclidean projections.
//!
//! The power cone is the 3-parameter cone
//! `K = {(a, b, v) in R x R x R^{n-2} : a^alpha b^(1-alpha) >= |v|, a, b >= 0}`;
//! its projection reduces the vector tail to its norm, solves a scalar
//! optimality condition by safeguarded Newton, and rescales the tail.

use crate::error::{Error, Result};

/// Newton/bisection iteration cap for the power-cone projection.
const POWER_NEWTON_CAP: usize = 200;
/// Residual target for the scalar optimality condition.
const POWER_NEWTON_TOL: f64 = 1e-12;

/// One cone in a conic program, applied to a contiguous slice of variables.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeBlock {
    /// `{0}^n`
    Zero(usize),
    /// `R_+^n`
    Nonnegative(usize),
    /// `{(t, z) : t >= |z|}`
    SecondOrder(usize),
    /// `{(a, b, v) : a^alpha b^(1-alpha) >= |v|, a, b >= 0}`
    Power { alpha: f64, n: usize },
}

impl ConeBlock {
    pub fn len(&self) -> usize {
        match self {
            ConeBlock::Zero(n) | ConeBlock::Nonnegative(n) | ConeBlock::SecondOrder(n) => *n,
            ConeBlock::Power { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConeBlock::Zero(n) | ConeBlock::Nonnegative(n) | ConeBlock::SecondOrder(n) => {
                if *n == 0 {
                    return Err(Error::InvalidArgument("empty cone block".into()));
                }
            }
            ConeBlock::Power { alpha, n } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "power cone exponent {alpha} outside (0,1)"
                    )));
                }
                if *n < 3 {
                    return Err(Error::InvalidArgument(
                        "power cone needs at least 3 dimensions".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Membership test, exact inequalities (no slack).
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            ConeBlock::Zero(_) => p.iter().all(|&v| v == 0.0),
            ConeBlock::Nonnegative(_) => p.iter().all(|&v| v >= 0.0),
            ConeBlock::SecondOrder(_) => p[0] >= norm(&p[1..]),
            ConeBlock::Power { alpha, .. } => {
                p[0] >= 0.0 && p[1] >= 0.0 && pow_product(p[0], p[1], *alpha) >= norm(&p[2..])
            }
        }
    }

    /// Membership in the dual cone.
    pub fn dual_contains(&self, p: &[f64]) -> bool {
        match self {
            ConeBlock::Zero(_) => true,
            ConeBlock::Nonnegative(_) | ConeBlock::SecondOrder(_) => self.contains(p),
            ConeBlock::Power { alpha, .. } => {
                p[0] >= 0.0
                    && p[1] >= 0.0
                    && pow_product(p[0] / alpha, p[1] / (1.0 - alpha), *alpha) >= norm(&p[2..])
            }
        }
    }
}

/// `a^alpha * b^(1-alpha)` for `a, b >= 0`, zero-safe.
fn pow_product(a: f64, b: f64, alpha: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    if alpha == 0.5 {
        return (a * b).sqrt();
    }
    (alpha * a.ln() + (1.0 - alpha) * b.ln()).exp()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean projection of `point` onto the cone.
pub fn project_cone(point: &[f64], block: &ConeBlock) -> Result<Vec<f64>> {
    if point.len() != block.len() {
        return Err(Error::DimensionMismatch {
            expected: block.len(),
            got: point.len(),
        });
    }
    let mut out = point.to_vec();
    let mut warm = f64::NAN;
    project_in_place(&mut out, block, &mut warm)?;
    Ok(out)
}

/// Euclidean projection of `point` onto the dual cone.
pub fn project_dual_cone(point: &[f64], block: &ConeBlock) -> Result<Vec<f64>> {
    if point.len() != block.len() {
        return Err(Error::DimensionMismatch {
            expected: block.len(),
            got: point.len(),
        });
    }
    // Moreau: P_{K*}(u) = u + P_K(-u).
    let neg: Vec<f64> = point.iter().map(|v| -v).collect();
    let pk = project_cone(&neg, block)?;
    Ok(point.iter().zip(&pk).map(|(u, p)| u + p).collect())
}

/// In-place projection. `warm` carries the previous Newton solution for the
/// power cone between calls on the same block; pass NaN when unknown.
pub(crate) fn project_in_place(p: &mut [f64], block: &ConeBlock, warm: &mut f64) -> Result<()> {
    match block {
        ConeBlock::Zero(_) => {
            p.fill(0.0);
        }
        ConeBlock::Nonnegative(_) => {
            for v in p.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        ConeBlock::SecondOrder(_) => {
            let t = p[0];
            let z = norm(&p[1..]);
            if t >= z {
                // inside
            } else if z <= -t {
                p.fill(0.0);
            } else {
                let beta = 0.5 * (t + z);
                let scale = beta / z;
                p[0] = beta;
                for v in &mut p[1..] {
                    *v *= scale;
                }
            }
        }
        ConeBlock::Power { alpha, .. } => {
            project_power(p, *alpha, warm)?;
        }
    }
    Ok(())
}

fn project_power(p: &mut [f64], alpha: f64, warm: &mut f64) -> Result<()> {
    let (a0, b0) = (p[0], p[1]);
    let z0 = norm(&p[2..]);

    // Already in the cone.
    if a0 >= 0.0 && b0 >= 0.0 && pow_product(a0, b0, alpha) >= z0 {
        return Ok(());
    }
    // In the polar cone: projection is the origin.
    if a0 <= 0.0
        && b0 <= 0.0
        && pow_product(-a0 / alpha, -b0 / (1.0 - alpha), alpha) >= z0
    {
        p.fill(0.0);
        return Ok(());
    }
    if z0 == 0.0 {
        // Tail is zero: project onto the nonnegative (a, b) face.
        p[0] = a0.max(0.0);
        p[1] = b0.max(0.0);
        return Ok(());
    }

    let r = solve_power_scalar(a0, b0, z0, alpha, warm)?;
    let a = 0.5 * (a0 + (a0 * a0 + 4.0 * alpha * r * (z0 - r)).sqrt());
    let b = 0.5 * (b0 + (b0 * b0 + 4.0 * (1.0 - alpha) * r * (z0 - r)).sqrt());
    let scale = (z0 - r) / z0;
    p[0] = a;
    p[1] = b;
    for v in &mut p[2..] {
        *v *= scale;
    }
    Ok(())
}

/// Solves the projection optimality condition
/// `phi(r) = alpha ln a(r) + (1-alpha) ln b(r) - ln(z0 - r) = 0` on
/// `(0, z0)`, where `r` is the multiplier of the cone constraint. `phi` is
/// negative at 0+ and positive at z0-, so a bracketed safeguarded Newton
/// cannot escape.
fn solve_power_scalar(
    a0: f64,
    b0: f64,
    z0: f64,
    alpha: f64,
    warm: &mut f64,
) -> Result<f64> {
    let phi = |r: f64| -> (f64, f64) {
        let da = (a0 * a0 + 4.0 * alpha * r * (z0 - r)).sqrt();
        let db = (b0 * b0 + 4.0 * (1.0 - alpha) * r * (z0 - r)).sqrt();
        let a = 0.5 * (a0 + da);
        let b = 0.5 * (b0 + db);
        let value = if alpha == 0.5 {
            ((a * b).sqrt() / (z0 - r)).ln()
        } else {
            alpha * a.ln() + (1.0 - alpha) * b.ln() - (z0 - r).ln()
        };
        let a_prime = alpha * (z0 - 2.0 * r) / da;
        let b_prime = (1.0 - alpha) * (z0 - 2.0 * r) / db;
        let deriv = alpha * a_prime / a + (1.0 - alpha) * b_prime / b + 1.0 / (z0 - r);
        (value, deriv)
    };

    let mut lo = 0.0;
    let mut hi = z0;
    let mut r = if warm.is_finite() && *warm > lo && *warm < hi {
        *warm
    } else {
        0.5 * z0
    };
    // Bisect whenever the bracket failed to halve over the last three
    // steps, so it shrinks geometrically no matter what Newton proposes.
    let mut checkpoint = hi - lo;
    for it in 0..POWER_NEWTON_CAP {
        let (value, deriv) = phi(r);
        if value.abs() <= POWER_NEWTON_TOL {
            *warm = r;
            return Ok(r);
        }
        if value > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        // Near the tip of the cone the log residual bottoms out above the
        // tolerance; a bracket pinched to machine resolution is converged.
        let width = hi - lo;
        if width <= 2.0 * f64::EPSILON * z0 {
            *warm = r;
            return Ok(r);
        }
        let mut force_bisect = false;
        if it % 3 == 2 {
            force_bisect = width > 0.5 * checkpoint;
            checkpoint = width;
        }
        let mut next = if force_bisect {
            f64::NAN
        } else if deriv.is_finite() && deriv != 0.0 {
            r - value / deriv
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == r {
            // Bracket exhausted at floating-point resolution.
            *warm = r;
            return Ok(r);
        }
        r = next;
    }
    Err(Error::Internal(format!(
        "power cone projection did not converge (alpha={alpha}, point scale {z0})"
    )))
}
