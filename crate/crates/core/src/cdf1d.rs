//! One-dimensional potential functions and the closed-form least upper
//! bound in convex order.
//!
//! For a measure m on the real line, the potential `G_m(x) = sum_i w_i
//! (x - x_i)_+` is piecewise linear, convex, vanishes at -infinity and has
//! asymptote `x - [m]` at +infinity. Two measures with equal barycentres
//! are in convex order exactly when their potentials are pointwise ordered,
//! and the least common dominant is the second derivative of the pointwise
//! maximum of the potentials. This module is the exact oracle for the d = 1
//! restriction of the conic solver.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Barycentres must agree to this tolerance before 1D order operations.
pub const BARYCENTRE_TOLERANCE: f64 = 1e-10;

/// Pointwise dominance slack in the convex-order test.
pub const ORDER_SLACK: f64 = 1e-12;

/// Slope jumps below this are discarded when extracting a measure from an
/// envelope.
pub const JUMP_FLOOR: f64 = 1e-13;

/// A piecewise-linear convex function normalized as a potential of a
/// probability measure: slope 0 and value 0 towards -infinity, total slope
/// increase equal to the total mass (one).
#[derive(Debug, Clone)]
pub struct PiecewiseLinearConvex {
    /// Sorted kink locations.
    breakpoints: Vec<f64>,
    /// `slopes[k]` is the slope left of `breakpoints[k]`; `slopes[n]` is the
    /// slope right of the last breakpoint. Nondecreasing, starts at zero.
    slopes: Vec<f64>,
    /// Function values at the breakpoints; `values[0] = 0`.
    values: Vec<f64>,
}

impl PiecewiseLinearConvex {
    fn from_jumps(breakpoints: Vec<f64>, jumps: &[f64]) -> Self {
        let n = breakpoints.len();
        debug_assert_eq!(jumps.len(), n);
        let mut slopes = Vec::with_capacity(n + 1);
        slopes.push(0.0);
        for j in jumps {
            slopes.push(slopes.last().unwrap() + j);
        }
        let mut values = Vec::with_capacity(n);
        values.push(0.0);
        for k in 1..n {
            let v = values[k - 1] + slopes[k] * (breakpoints[k] - breakpoints[k - 1]);
            values.push(v);
        }
        Self {
            breakpoints,
            slopes,
            values,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Value at the leftmost breakpoint (zero for potentials).
    pub fn anchor_value(&self) -> f64 {
        self.values[0]
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(k) => self.values[k],
            Err(0) => 0.0,
            Err(k) => self.values[k - 1] + self.slopes[k] * (x - self.breakpoints[k - 1]),
        }
    }

    /// Slope immediately to the right of `x`.
    fn slope_right(&self, x: f64) -> f64 {
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(k) => self.slopes[k + 1],
            Err(k) => self.slopes[k],
        }
    }
}

fn require_1d(m: &DiscreteMeasure) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: m.dim(),
        });
    }
    Ok(())
}

fn require_equal_barycentres(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<()> {
    let gap = (m1.barycentre()[0] - m2.barycentre()[0]).abs();
    if gap > BARYCENTRE_TOLERANCE {
        return Err(Error::BarycentreMismatch {
            gap,
            tol: BARYCENTRE_TOLERANCE,
        });
    }
    Ok(())
}

/// The potential `G_m` of a one-dimensional measure.
pub fn g_potential(m: &DiscreteMeasure) -> Result<PiecewiseLinearConvex> {
    require_1d(m)?;
    let breakpoints: Vec<f64> = m.atoms().map(|(_, x)| x[0]).collect();
    let jumps: Vec<f64> = m.weights().to_vec();
    Ok(PiecewiseLinearConvex::from_jumps(breakpoints, &jumps))
}

/// Tests `m1 <=_c m2` via pointwise ordering of the potentials, checked at
/// the union of breakpoints (sufficient for piecewise-linear potentials
/// with matching asymptotes).
pub fn convex_order_1d(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<bool> {
    require_1d(m1)?;
    require_1d(m2)?;
    require_equal_barycentres(m1, m2)?;
    let g1 = g_potential(m1)?;
    let g2 = g_potential(m2)?;
    let mut xs: Vec<f64> = g1
        .breakpoints
        .iter()
        .chain(g2.breakpoints.iter())
        .copied()
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(xs.iter().all(|&x| g1.eval(x) <= g2.eval(x) + ORDER_SLACK))
}

/// The least upper bound `m1 v m2` in convex order: the measure of slope
/// jumps of `max(G_m1, G_m2)`.
pub fn lub_1d(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    require_1d(m1)?;
    require_1d(m2)?;
    require_equal_barycentres(m1, m2)?;
    let g1 = g_potential(m1)?;
    let g2 = g_potential(m2)?;
    let envelope = max_envelope(&g1, &g2);

    let mut atoms: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut prev_slope = 0.0;
    for &(x, slope) in &envelope {
        let jump = slope - prev_slope;
        if jump >= JUMP_FLOOR {
            atoms.push((jump, vec![x]));
        }
        prev_slope = slope;
    }
    DiscreteMeasure::new(1, &atoms)
}

/// Builds the pointwise maximum of two potentials as a list of
/// `(start, slope)` segments, slope 0 understood left of the first entry.
///
/// Crossing points are found segment by segment. Where the two functions
/// merely touch without a strict sign change no breakpoint is introduced,
/// and on ties the first function's structure wins.
fn max_envelope(
    g1: &PiecewiseLinearConvex,
    g2: &PiecewiseLinearConvex,
) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = g1
        .breakpoints
        .iter()
        .chain(g2.breakpoints.iter())
        .copied()
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();

    let mut segments: Vec<(f64, f64)> = Vec::new();
    let push = |x: f64, slope: f64, segs: &mut Vec<(f64, f64)>| {
        if let Some(&(_, last)) = segs.last() {
            if last == slope {
                return;
            }
        } else if slope == 0.0 {
            return;
        }
        segs.push((x, slope));
    };

    for w in 0..xs.len() {
        let a = xs[w];
        let d_a = g1.eval(a) - g2.eval(a);
        let s1 = g1.slope_right(a);
        let s2 = g2.slope_right(a);
        // Which function is on top immediately right of `a`?
        let first_active = if d_a > 0.0 {
            1
        } else if d_a < 0.0 {
            2
        } else if s2 > s1 {
            2
        } else {
            1
        };
        let (sa, sb) = if first_active == 1 { (s1, s2) } else { (s2, s1) };
        push(a, sa, &mut segments);
        if w + 1 < xs.len() {
            let b = xs[w + 1];
            let d_b = g1.eval(b) - g2.eval(b);
            if d_a * d_b < 0.0 {
                let cross = a + (b - a) * d_a / (d_a - d_b);
                push(cross, sb, &mut segments);
            }
        }
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1d(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        let atoms: Vec<(f64, Vec<f64>)> = atoms.iter().map(|&(w, x)| (w, vec![x])).collect();
        DiscreteMeasure::new(1, &atoms).unwrap()
    }

    fn assert_close(a: &DiscreteMeasure, b: &DiscreteMeasure) {
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert!((a.weight(i) - b.weight(i)).abs() < 1e-12);
            assert!((a.point(i)[0] - b.point(i)[0]).abs() < 1e-12);
        }
    }

    fn unordered_pair() -> (DiscreteMeasure, DiscreteMeasure) {
        (
            m1d(&[(0.5, -1.0), (0.5, 1.0)]),
            m1d(&[(0.2, -2.0), (0.6, 0.0), (0.2, 2.0)]),
        )
    }

    #[test]
    fn potential_of_dirac_is_positive_part() {
        let g = g_potential(&m1d(&[(1.0, 0.0)])).unwrap();
        assert_eq!(g.eval(2.0), 2.0);
        assert_eq!(g.eval(-3.0), 0.0);
        assert_eq!(g.eval(0.0), 0.0);
    }

    #[test]
    fn potential_of_symmetric_pair() {
        let g = g_potential(&m1d(&[(0.5, -1.0), (0.5, 1.0)])).unwrap();
        assert_eq!(g.eval(0.0), 0.5);
        assert_eq!(g.anchor_value(), 0.0);
        assert_eq!(g.slopes()[0], 0.0);
    }

    #[test]
    fn potential_asymptote() {
        let m = m1d(&[(0.3, -1.5), (0.45, 0.25), (0.25, 2.0)]);
        let g = g_potential(&m).unwrap();
        let b = m.barycentre()[0];
        let x = 2.0 + 1e3 * m.diameter();
        assert!((g.eval(x) - (x - b)).abs() <= 1e-9 * x.abs());
    }

    #[test]
    fn rejects_multidimensional_input() {
        let m = DiscreteMeasure::new(2, &[(1.0, vec![0.0, 0.0])]).unwrap();
        assert!(g_potential(&m).is_err());
    }

    #[test]
    fn convex_order_examples() {
        let dirac0 = m1d(&[(1.0, 0.0)]);
        let pair = m1d(&[(0.5, -1.0), (0.5, 1.0)]);
        assert!(convex_order_1d(&dirac0, &pair).unwrap());
        assert!(!convex_order_1d(&pair, &dirac0).unwrap());

        let (mu, nu) = unordered_pair();
        assert!(!convex_order_1d(&mu, &nu).unwrap());
        assert!(!convex_order_1d(&nu, &mu).unwrap());
    }

    #[test]
    fn convex_order_rejects_barycentre_mismatch() {
        let a = m1d(&[(1.0, 0.0)]);
        let b = m1d(&[(1.0, 0.5)]);
        assert!(matches!(
            convex_order_1d(&a, &b),
            Err(Error::BarycentreMismatch { .. })
        ));
    }

    #[test]
    fn lub_of_equal_measures_is_identity() {
        let m = m1d(&[(0.25, -2.0), (0.5, 0.5), (0.25, 1.0)]);
        let m = m.recentre(&[0.0]).unwrap();
        assert_eq!(lub_1d(&m, &m).unwrap(), m);
    }

    #[test]
    fn lub_of_ordered_pair_is_the_larger() {
        let dirac0 = m1d(&[(1.0, 0.0)]);
        let pair = m1d(&[(0.5, -1.0), (0.5, 1.0)]);
        assert_eq!(lub_1d(&dirac0, &pair).unwrap(), pair);
        assert_eq!(lub_1d(&pair, &dirac0).unwrap(), pair);
    }

    #[test]
    fn lub_of_unordered_pair_matches_exact_envelope() {
        // Potentials cross at -1/3 and 1/3; the envelope's slope sequence is
        // 0, 0.2, 0.5, 0.8, 1 with kinks at -2, -1/3, 1/3, 2 (exact rational
        // segment intersection done by hand).
        let (mu, nu) = unordered_pair();
        let rho = lub_1d(&mu, &nu).unwrap();
        assert_eq!(rho.len(), 4);
        let expected = [
            (0.2, -2.0),
            (0.3, -1.0 / 3.0),
            (0.3, 1.0 / 3.0),
            (0.2, 2.0),
        ];
        for (i, (w, x)) in expected.iter().enumerate() {
            assert!((rho.weight(i) - w).abs() < 1e-12);
            assert!((rho.point(i)[0] - x).abs() < 1e-12);
        }
        assert!((rho.moment(2.0) - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn lub_properties() {
        let pairs = [
            unordered_pair(),
            (
                m1d(&[(0.5, -1.0), (0.5, 1.0)]),
                m1d(&[(0.25, -2.0), (0.25, -1.0), (0.25, 1.0), (0.25, 2.0)]),
            ),
            (
                m1d(&[(0.4, -1.5), (0.6, 1.0)]),
                m1d(&[(0.6, -1.0), (0.4, 1.5)]),
            ),
        ];
        for (a, b) in pairs {
            let r = lub_1d(&a, &b).unwrap();
            assert!(convex_order_1d(&a, &r).unwrap());
            assert!(convex_order_1d(&b, &r).unwrap());
            assert_close(&lub_1d(&b, &a).unwrap(), &r);
            assert_close(&lub_1d(&r, &r).unwrap(), &r);
            assert!((r.barycentre()[0] - a.barycentre()[0]).abs() <= 1e-10);
            // If ordered, the lub is the dominating measure atom-for-atom.
            if convex_order_1d(&a, &b).unwrap() {
                assert_close(&r, &b);
            }
        }
    }
}
