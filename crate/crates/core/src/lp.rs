//! Small dense linear programs of the form
//!
//! ```text
//! minimize    c·x
//! subject to  a_r·x ≥ b_r   for every row r
//!             x ≥ 0
//! ```
//!
//! Two independent solvers live here: a two-phase tableau simplex with
//! Bland's anti-cycling rule, and an exhaustive vertex enumeration that
//! serves as ground truth for tiny instances.

use itertools::Itertools;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Row {
        Row { coeffs, rhs }
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// `a·x - b`; nonnegative when the row holds.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.lhs(x) - self.rhs
    }

    /// Absolute tolerance for judging this row at `x`, relative to the
    /// magnitude of the terms involved.
    pub fn tolerance(&self, x: &[f64], tol: f64) -> f64 {
        let scale: f64 = self
            .coeffs
            .iter()
            .zip(x)
            .map(|(a, v)| (a * v).abs())
            .sum::<f64>()
            + self.rhs.abs();
        tol * scale.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

const PIVOT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 10_000;
const POLISH_TOL: f64 = 1e-9;

struct Tableau {
    // rows × (cols + 1); the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| cost[b] * self.rhs(r))
            .sum()
    }

    /// Runs primal simplex iterations for `cost`, never entering a column
    /// for which `allowed` is false.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<(), LpError> {
        for _ in 0..MAX_ITERATIONS {
            let entering = (0..self.cols).filter(|&j| allowed(j)).find(|&j| {
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(r, &b)| cost[b] * self.t[r][j])
                        .sum::<f64>();
                reduced < -1e-12
            });
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-15
                                || (ratio <= lratio + 1e-15 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leaving else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpError::IterationLimit)
    }
}

/// Two-phase simplex for `min c·x` subject to `rows` and `x ≥ 0`.
pub fn simplex_minimize(objective: &[f64], rows: &[Row]) -> Result<LpSolution, LpError> {
    let n = objective.len();
    let m = rows.len();
    // Columns: x (n), surplus (m), artificial (m).
    let cols = n + 2 * m;
    let mut t = Vec::with_capacity(m);
    for (r, row) in rows.iter().enumerate() {
        assert_eq!(row.coeffs.len(), n, "row {r} has the wrong width");
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        let mut line = vec![0.0; cols + 1];
        for (j, a) in row.coeffs.iter().enumerate() {
            line[j] = sign * a;
        }
        line[n + r] = -sign;
        line[n + m + r] = 1.0;
        line[cols] = sign * row.rhs;
        t.push(line);
    }
    let mut tab = Tableau {
        t,
        basis: (0..m).map(|r| n + m + r).collect(),
        cols,
    };

    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(n + m) {
        *c = 1.0;
    }
    tab.optimize(&phase1, &|_| true)?;
    let scale = rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
    if tab.objective(&phase1) > 1e-9 * scale {
        return Err(LpError::Infeasible);
    }

    // Drive zero-level artificials out of the basis where possible.
    for r in 0..m {
        if tab.basis[r] >= n + m {
            if let Some(col) = (0..n + m).find(|&j| tab.t[r][j].abs() > 1e-9) {
                tab.pivot(r, col);
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(objective);
    tab.optimize(&phase2, &|j| j < n + m)?;

    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(r).max(0.0);
        }
    }
    if let Some(polished) = polish(&tab, rows, n, &x) {
        x = polished;
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        x,
        objective: value,
    })
}

/// Recomputes the final vertex from the original data.
///
/// The tableau accumulates rounding over many pivots, which matters when the
/// vertex is ill-conditioned. Nonbasic surplus columns mark tight rows and
/// nonbasic structural columns mark `x_j = 0`; the first `n` of these, rows
/// before bounds, are solved directly. The result is kept only if it is
/// still feasible.
fn polish(tab: &Tableau, rows: &[Row], n: usize, x: &[f64]) -> Option<Vec<f64>> {
    let m = rows.len();
    let basic = |j: usize| tab.basis.contains(&j);
    let tight_rows = (0..m)
        .filter(|&r| !basic(n + r))
        .map(|r| (rows[r].coeffs.clone(), rows[r].rhs));
    let at_bound = (0..n).filter(|&j| !basic(j)).map(|j| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        (e, 0.0)
    });
    let (a, b): (Vec<Vec<f64>>, Vec<f64>) = tight_rows.chain(at_bound).take(n).unzip();
    if b.len() < n {
        return None;
    }
    let y = solve_square(a, b)?;
    let scale = x.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let close = y.iter().zip(x).all(|(p, q)| (p - q).abs() <= 1e-6 * scale);
    let feasible = y.iter().all(|&v| v >= -POLISH_TOL * scale)
        && rows
            .iter()
            .all(|row| row.slack(&y) >= -row.tolerance(&y, POLISH_TOL));
    (close && feasible).then_some(y)
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if the system is numerically singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (piv, max) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        let row_scale = a[piv].iter().map(|v| v.abs()).fold(0.0, f64::max);
        if max <= PIVOT_TOL * row_scale.max(1.0) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot[col];
            if factor != 0.0 {
                for (v, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *v -= factor * p;
                }
                b[col + 1 + offset] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// Exhaustive vertex enumeration for `min c·x` subject to `rows` only.
///
/// Nonnegativity is not implied: it must appear among `rows` if wanted.
/// Every subset of `n` rows is made tight; each resulting point that
/// satisfies all rows within `feas_tol` (scaled per row) is a vertex, and
/// the cheapest one is returned. When the optimum is attained this is exact
/// up to rounding, and it always is for an LP whose objective is bounded
/// below on a pointed feasible region.
pub fn vertex_enumeration_minimize(
    objective: &[f64],
    rows: &[Row],
    feas_tol: f64,
) -> Result<LpSolution, LpError> {
    let n = objective.len();
    let mut best: Option<LpSolution> = None;
    for subset in (0..rows.len()).combinations(n) {
        let a = subset.iter().map(|&r| rows[r].coeffs.clone()).collect();
        let b = subset.iter().map(|&r| rows[r].rhs).collect();
        let Some(x) = solve_square(a, b) else {
            continue;
        };
        if rows
            .iter()
            .any(|row| row.slack(&x) < -row.tolerance(&x, feas_tol))
        {
            continue;
        }
        let value: f64 = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        if best.as_ref().is_none_or(|b| value < b.objective) {
            best = Some(LpSolution {
                x,
                objective: value,
            });
        }
    }
    best.ok_or(LpError::Infeasible)
}
