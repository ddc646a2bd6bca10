//! Sparse LDL^T factorization of the splitting KKT system
//!
//! ```text
//! S = [[ (1 + sigma) I,  A^T            ],
//!      [ A,              -(1 + sigma) I ]]
//! ```
//!
//! with `sigma` a small static regularization. `S` is symmetric
//! quasidefinite, so an LDL^T factorization without pivoting exists for any
//! symmetric permutation; fill is controlled by eliminating variable nodes
//! first and constraint nodes in ascending order of their row counts in
//! `A`, which puts the dense coupling rows of the transport builders last.
//! Solves are refreshed with iterative refinement against the
//! unregularized operator.

use super::sparse::CscMatrix;

const STATIC_REG: f64 = 1e-8;
const REFINE_STEPS: usize = 1;

pub struct KktSolver {
    n: usize,
    m: usize,
    /// perm[new_index] = old_index
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    /// Unit lower-triangular factor, CSC by columns.
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_values: Vec<f64>,
    d: Vec<f64>,
    /// The A block, kept for refinement matvecs.
    a: CscMatrix,
    work: std::cell::RefCell<Vec<f64>>,
}

impl KktSolver {
    /// Factors the KKT matrix for the (already scaled) constraint matrix.
    pub fn new(a: &CscMatrix) -> Result<Self, String> {
        let n = a.ncols;
        let m = a.nrows;
        let total = n + m;

        // Fill-reducing permutation: variables first, then constraint rows
        // by ascending structural density.
        let counts = a.row_counts();
        let mut rows: Vec<usize> = (0..m).collect();
        rows.sort_by_key(|&r| (counts[r], r));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.extend(rows.iter().map(|&r| n + r));
        let mut inv_perm = vec![0usize; total];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }

        // Upper triangle of the permuted KKT matrix as triplets.
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(total + a.nnz());
        for k in 0..total {
            let sign = if perm[k] < n { 1.0 } else { -1.0 };
            triplets.push((k, k, sign * (1.0 + STATIC_REG)));
        }
        for c in 0..n {
            for p in a.col_ptr[c]..a.col_ptr[c + 1] {
                let r = n + a.row_idx[p];
                let (pi, pj) = (inv_perm[c], inv_perm[r]);
                let (lo, hi) = if pi < pj { (pi, pj) } else { (pj, pi) };
                triplets.push((lo, hi, a.values[p]));
            }
        }
        let upper = CscMatrix::from_triplets(total, total, &triplets);

        let (l_colptr, l_rowidx, l_values, d) = factor_ldlt(&upper, &perm, n)?;
        Ok(Self {
            n,
            m,
            perm,
            inv_perm,
            l_colptr,
            l_rowidx,
            l_values,
            d,
            a: a.clone(),
            work: std::cell::RefCell::new(vec![0.0; 2 * total]),
        })
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_rowidx.len()
    }

    /// Solves `[[I, A^T], [A, -I]] [out_x; out_y] = [rhs_x; rhs_y]` with
    /// iterative refinement toward the unregularized matrix.
    pub fn solve(&self, rhs_x: &[f64], rhs_y: &[f64], out_x: &mut [f64], out_y: &mut [f64]) {
        let total = self.n + self.m;
        let mut work = self.work.borrow_mut();
        let (sol, resid) = work.split_at_mut(total);
        for k in 0..total {
            let old = self.perm[k];
            sol[k] = if old < self.n {
                rhs_x[old]
            } else {
                rhs_y[old - self.n]
            };
        }
        self.ldlt_solve(sol);
        for old in 0..total {
            let v = sol[self.inv_perm[old]];
            if old < self.n {
                out_x[old] = v;
            } else {
                out_y[old - self.n] = v;
            }
        }

        for _ in 0..REFINE_STEPS {
            // Residual of the exact (sigma = 0) system.
            for i in 0..self.n {
                resid[i] = rhs_x[i] - out_x[i];
            }
            for i in 0..self.m {
                resid[self.n + i] = rhs_y[i] + out_y[i];
            }
            self.a.mul_t_acc(-1.0, out_y, &mut resid[..self.n]);
            self.a.mul_acc(-1.0, out_x, &mut resid[self.n..]);
            for k in 0..total {
                sol[k] = resid[self.perm[k]];
            }
            self.ldlt_solve(sol);
            for old in 0..total {
                let v = sol[self.inv_perm[old]];
                if old < self.n {
                    out_x[old] += v;
                } else {
                    out_y[old - self.n] += v;
                }
            }
        }
    }

    fn ldlt_solve(&self, x: &mut [f64]) {
        let total = self.n + self.m;
        // L z = x
        for j in 0..total {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                    x[self.l_rowidx[p]] -= self.l_values[p] * xj;
                }
            }
        }
        // D w = z
        for j in 0..total {
            x[j] /= self.d[j];
        }
        // L^T out = w
        for j in (0..total).rev() {
            let mut acc = x[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                acc -= self.l_values[p] * x[self.l_rowidx[p]];
            }
            x[j] = acc;
        }
    }
}

/// Up-looking simplicial LDL^T of a symmetric matrix given by its upper
/// triangle in CSC form. `perm`/`nvars` only inform the expected pivot
/// signs for the quasidefinite safeguard.
#[allow(clippy::type_complexity)]
fn factor_ldlt(
    upper: &CscMatrix,
    perm: &[usize],
    nvars: usize,
) -> Result<(Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>), String> {
    let n = upper.ncols;

    // Elimination tree (Liu's algorithm with path compression).
    const NONE: usize = usize::MAX;
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for j in 0..n {
        for p in upper.col_ptr[j]..upper.col_ptr[j + 1] {
            let mut i = upper.row_idx[p];
            while i < j {
                let next = ancestor[i];
                ancestor[i] = j;
                if next == NONE {
                    parent[i] = j;
                    break;
                }
                if next == j {
                    break;
                }
                i = next;
            }
        }
    }

    // Column counts of L via the same reachability walks.
    let mut l_counts = vec![0usize; n];
    let mut mark = vec![NONE; n];
    for j in 0..n {
        mark[j] = j;
        for p in upper.col_ptr[j]..upper.col_ptr[j + 1] {
            let mut i = upper.row_idx[p];
            while i != NONE && i < j && mark[i] != j {
                l_counts[i] += 1;
                mark[i] = j;
                i = parent[i];
            }
        }
    }

    let mut l_colptr = vec![0usize; n + 1];
    for j in 0..n {
        l_colptr[j + 1] = l_colptr[j] + l_counts[j];
    }
    let nnz_l = l_colptr[n];
    let mut l_rowidx = vec![0usize; nnz_l];
    let mut l_values = vec![0.0f64; nnz_l];
    let mut next_slot: Vec<usize> = l_colptr[..n].to_vec();
    let mut d = vec![0.0f64; n];

    // Numeric pass, one row of L at a time.
    let mut y = vec![0.0f64; n];
    let mut pattern: Vec<usize> = Vec::with_capacity(64);
    let mut mark2 = vec![NONE; n];
    for k in 0..n {
        pattern.clear();
        let mut dk = 0.0;
        for p in upper.col_ptr[k]..upper.col_ptr[k + 1] {
            let i = upper.row_idx[p];
            if i == k {
                dk = upper.values[p];
            } else {
                y[i] += upper.values[p];
                let mut t = i;
                while t != NONE && t < k && mark2[t] != k {
                    pattern.push(t);
                    mark2[t] = k;
                    t = parent[t];
                }
            }
        }
        // Ascending order is a valid elimination order along the tree.
        pattern.sort_unstable();
        for &j in &pattern {
            let yj = y[j];
            y[j] = 0.0;
            for p in l_colptr[j]..next_slot[j] {
                y[l_rowidx[p]] -= l_values[p] * yj;
            }
            let lkj = yj / d[j];
            dk -= yj * lkj;
            l_rowidx[next_slot[j]] = k;
            l_values[next_slot[j]] = lkj;
            next_slot[j] += 1;
        }
        // Quasidefinite pivots keep the sign of their diagonal block; bump
        // degenerate pivots rather than fail.
        let sign = if perm[k] < nvars { 1.0 } else { -1.0 };
        if !(dk * sign).is_finite() {
            return Err(format!("non-finite pivot at column {k}"));
        }
        if dk * sign < 1e-13 {
            dk = sign * 1e-7;
        }
        d[k] = dk;
    }
    Ok((l_colptr, l_rowidx, l_values, d))
}
