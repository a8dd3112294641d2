//! Dense two-phase simplex solver for the small linear programs behind
//! DC-OPF.
//!
//! Problems are stated as `minimize c'x` over `x >= 0` subject to a mix of
//! `<=`, `>=`, and `=` rows. The tableau is dense; problem sizes here are a
//! few hundred rows at most. Pivoting uses Bland's rule throughout, which
//! rules out cycling on the degenerate dispatch problems produced by tied
//! generator costs.

use thiserror::Error;

/// Relation of a constraint row to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

/// One constraint row `coeffs . x REL rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Rel,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, rel: Rel, rhs: f64) -> Self {
        Self { coeffs, rel, rhs }
    }
}

/// `minimize objective . x` subject to `constraints`, `x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Indices of constraint rows satisfied with equality at the optimum.
    pub binding_rows: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum LpError {
    /// No feasible point exists; `blocking_rows` are the rows whose
    /// artificial variables could not be driven to zero.
    #[error("infeasible linear program (blocking rows {blocking_rows:?})")]
    Infeasible { blocking_rows: Vec<usize> },
    #[error("unbounded linear program")]
    Unbounded,
    #[error("malformed program: {0}")]
    Malformed(String),
}

const PIVOT_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;

/// Solve `lp` with the two-phase simplex method.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.objective.len();
    let m = lp.constraints.len();
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::Malformed(format!(
                "row {i} has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        if !c.rhs.is_finite() {
            return Err(LpError::Malformed(format!("row {i} has non-finite rhs")));
        }
    }

    // Normalize every row to rhs >= 0 so slack columns can start basic.
    let mut rows: Vec<(Vec<f64>, Rel, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let flipped = match c.rel {
                    Rel::Le => Rel::Ge,
                    Rel::Ge => Rel::Le,
                    Rel::Eq => Rel::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.rel, c.rhs)
            }
        })
        .collect();

    // Column layout: [structural | slack/surplus | artificial | rhs].
    let mut n_slack = 0;
    let mut n_art = 0;
    for (_, rel, _) in &rows {
        match rel {
            Rel::Le => n_slack += 1,
            Rel::Ge => {
                n_slack += 1;
                n_art += 1;
            }
            Rel::Eq => n_art += 1,
        }
    }
    let cols = n + n_slack + n_art + 1;
    let rhs_col = cols - 1;

    let mut tab = vec![vec![0.0f64; cols]; m];
    let mut basis = vec![usize::MAX; m];
    let mut next_slack = n;
    let mut next_art = n + n_slack;
    for (i, (coeffs, rel, rhs)) in rows.drain(..).enumerate() {
        tab[i][..n].copy_from_slice(&coeffs);
        tab[i][rhs_col] = rhs;
        match rel {
            Rel::Le => {
                tab[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Rel::Ge => {
                tab[i][next_slack] = -1.0;
                next_slack += 1;
                tab[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Rel::Eq => {
                tab[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    if n_art > 0 {
        // Phase 1: minimize the sum of artificial variables. Start from
        // unit costs on the artificial columns, then cancel the reduced
        // costs of the (artificial) basis by subtracting its rows.
        let mut phase1 = vec![0.0f64; cols];
        for cell in phase1.iter_mut().skip(n + n_slack).take(n_art) {
            *cell = 1.0;
        }
        for i in 0..m {
            if basis[i] >= n + n_slack {
                for (j, cell) in phase1.iter_mut().enumerate() {
                    *cell -= tab[i][j];
                }
            }
        }
        run_simplex(&mut tab, &mut basis, &mut phase1, n + n_slack + n_art)
            .map_err(|_| LpError::Malformed("phase 1 cannot be unbounded".into()))?;

        let infeas = -phase1[rhs_col];
        if infeas > FEAS_EPS {
            let blocking_rows = basis
                .iter()
                .enumerate()
                .filter(|(i, &b)| b >= n + n_slack && tab[*i][rhs_col] > FEAS_EPS)
                .map(|(i, _)| i)
                .collect();
            return Err(LpError::Infeasible { blocking_rows });
        }

        // Pivot any zero-valued artificials out of the basis, then drop the
        // artificial columns from consideration.
        for i in 0..m {
            if basis[i] >= n + n_slack {
                if let Some(j) = (0..n + n_slack).find(|&j| tab[i][j].abs() > PIVOT_EPS) {
                    pivot(&mut tab, &mut basis, i, j, &mut phase1);
                }
                // A row whose coefficients are all zero is redundant; its
                // artificial stays basic at value zero, which is harmless.
            }
        }
    }

    // Phase 2: minimize the real objective, expressed in reduced form over
    // the current basis.
    let mut obj = vec![0.0f64; cols];
    obj[..n].copy_from_slice(&lp.objective);
    for i in 0..m {
        let b = basis[i];
        if b < n && obj[b].abs() > 0.0 {
            let factor = obj[b];
            for j in 0..cols {
                obj[j] -= factor * tab[i][j];
            }
        }
    }
    run_simplex(&mut tab, &mut basis, &mut obj, n + n_slack)?;

    let mut x = vec![0.0f64; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = tab[i][rhs_col];
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    let binding_rows = lp
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let lhs: f64 = c.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
            (lhs - c.rhs).abs() <= FEAS_EPS * (1.0 + c.rhs.abs())
        })
        .map(|(i, _)| i)
        .collect();

    Ok(LpSolution {
        x,
        objective,
        binding_rows,
    })
}

/// Run simplex iterations on the tableau until optimal or unbounded.
/// Only columns `< usable_cols` may enter the basis. Bland's rule: the
/// entering column is the lowest-index one with a negative reduced cost and
/// the leaving row breaks ratio ties by lowest basis index.
fn run_simplex(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &mut [f64],
    usable_cols: usize,
) -> Result<(), LpError> {
    let m = tab.len();
    let rhs_col = obj.len() - 1;
    loop {
        let Some(enter) = (0..usable_cols).find(|&j| obj[j] < -PIVOT_EPS) else {
            return Ok(());
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = tab[i][enter];
            if a > PIVOT_EPS {
                let ratio = tab[i][rhs_col] / a;
                match leave {
                    None => {
                        leave = Some(i);
                        best_ratio = ratio;
                    }
                    Some(l) => {
                        if ratio < best_ratio - PIVOT_EPS {
                            leave = Some(i);
                            best_ratio = ratio;
                        } else if (ratio - best_ratio).abs() <= PIVOT_EPS && basis[i] < basis[l] {
                            leave = Some(i);
                            best_ratio = best_ratio.min(ratio);
                        }
                    }
                }
            }
        }
        let Some(leave) = leave else {
            return Err(LpError::Unbounded);
        };
        pivot(tab, basis, leave, enter, obj);
    }
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize, obj: &mut [f64]) {
    let m = tab.len();
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    for i in 0..m {
        if i != row {
            let f = tab[i][col];
            if f != 0.0 {
                for j in 0..tab[i].len() {
                    tab[i][j] -= f * tab[row][j];
                }
            }
        }
    }
    let f = obj[col];
    if f != 0.0 {
        for j in 0..obj.len() {
            obj[j] -= f * tab[row][j];
        }
    }
    basis[row] = col;
}
