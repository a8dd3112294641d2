//! Weighted nonlinear least squares for curves of the form
//! `y = a * exp(-b * z) + c`.
//!
//! Fitting is Levenberg-Marquardt on the three parameters, initialized from
//! a log-linear regression of `y` against the tail offset. Point weights
//! scale the squared residuals.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least 3 points to fit 3 parameters, got {0}")]
    TooFewPoints(usize),
    #[error("all point weights are zero")]
    ZeroWeights,
    #[error("fit did not converge")]
    NoConvergence,
}

/// Fitted parameters of `a * exp(-b * z) + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpCurve {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ExpCurve {
    pub fn eval(&self, z: f64) -> f64 {
        self.a * (-self.b * z).exp() + self.c
    }
}

/// Fit `(z, y, weight)` points. Weights must be nonnegative with at least
/// one positive.
pub fn fit_exp_decay(points: &[(f64, f64, f64)]) -> Result<ExpCurve, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if !points.iter().any(|&(_, _, w)| w > 0.0) {
        return Err(FitError::ZeroWeights);
    }
    let mut params = initial_guess(points);
    let mut lambda = 1e-3;
    let mut cost = sq_cost(points, &params);
    let mut converged = false;
    for _ in 0..500 {
        let (jtj, jtr) = normal_equations(points, &params);
        let mut step = None;
        for _ in 0..25 {
            let mut damped = jtj;
            for d in 0..3 {
                damped[d][d] += lambda * (1.0 + jtj[d][d]);
            }
            if let Some(delta) = solve3(&damped, &jtr) {
                let trial = ExpCurve {
                    a: params.a - delta[0],
                    b: params.b - delta[1],
                    c: params.c - delta[2],
                };
                let trial_cost = sq_cost(points, &trial);
                if trial_cost.is_finite() && trial_cost < cost {
                    step = Some((trial, trial_cost, delta));
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        let Some((trial, trial_cost, delta)) = step else {
            converged = true; // no descent direction left
            break;
        };
        let step_norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        let improvement = cost - trial_cost;
        params = trial;
        cost = trial_cost;
        lambda = (lambda * 0.3).max(1e-12);
        if step_norm < 1e-14 || improvement < 1e-18 * (1.0 + cost) {
            converged = true;
            break;
        }
    }
    if !converged && cost.is_nan() {
        return Err(FitError::NoConvergence);
    }
    Ok(params)
}

/// Log-linear starting point: anchor c at the tail value, regress
/// `ln|y - c|` on z for the decay rate and magnitude. Points with
/// negligible weight do not influence the guess.
fn initial_guess(points: &[(f64, f64, f64)]) -> ExpCurve {
    let w_max = points.iter().map(|p| p.2).fold(0.0f64, f64::max);
    let mut sorted: Vec<&(f64, f64, f64)> = points
        .iter()
        .filter(|p| p.2 > 1e-9 * w_max)
        .collect();
    sorted.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(std::cmp::Ordering::Equal));
    if sorted.is_empty() {
        return ExpCurve { a: 0.5, b: 1.0, c: 0.0 };
    }
    let c0 = sorted.last().unwrap().1;
    let head = sorted.first().unwrap().1;
    let sign = if head >= c0 { 1.0 } else { -1.0 };
    // Weighted linear regression of ln|y - c0| against z.
    let mut sw = 0.0;
    let mut sz = 0.0;
    let mut sy = 0.0;
    let mut szz = 0.0;
    let mut szy = 0.0;
    for &&(z, y, w) in &sorted {
        let resid = (y - c0).abs();
        if resid < 1e-12 || w <= 0.0 {
            continue;
        }
        let ln = resid.ln();
        sw += w;
        sz += w * z;
        sy += w * ln;
        szz += w * z * z;
        szy += w * z * ln;
    }
    let (a0, b0) = if sw > 0.0 && (sw * szz - sz * sz).abs() > 1e-12 {
        let slope = (sw * szy - sz * sy) / (sw * szz - sz * sz);
        let intercept = (sy - slope * sz) / sw;
        (sign * intercept.exp(), (-slope).clamp(1e-3, 50.0))
    } else {
        (sign * 0.5, 1.0)
    };
    ExpCurve { a: a0, b: b0, c: c0 }
}

fn sq_cost(points: &[(f64, f64, f64)], p: &ExpCurve) -> f64 {
    points
        .iter()
        .map(|&(z, y, w)| {
            let r = p.eval(z) - y;
            w * r * r
        })
        .sum()
}

/// Gauss-Newton normal equations J'WJ and J'Wr for the residual
/// `a e^{-bz} + c - y`.
fn normal_equations(points: &[(f64, f64, f64)], p: &ExpCurve) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut jtj = [[0.0f64; 3]; 3];
    let mut jtr = [0.0f64; 3];
    for &(z, y, w) in points {
        let e = (-p.b * z).exp();
        let r = p.a * e + p.c - y;
        let j = [e, -p.a * z * e, 1.0];
        for row in 0..3 {
            jtr[row] += w * j[row] * r;
            for col in 0..3 {
                jtj[row][col] += w * j[row] * j[col];
            }
        }
    }
    (jtj, jtr)
}

/// Solve a 3x3 system by Gaussian elimination with partial pivoting.
fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut v = *b;
    for col in 0..3 {
        let mut pivot = col;
        for row in col + 1..3 {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (cell, p) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *cell -= f * p;
            }
            v[row] -= f * v[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut s = v[row];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}
