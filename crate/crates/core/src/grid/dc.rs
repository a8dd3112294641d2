//! DC power flow and PTDF computation.
//!
//! The kernel solves `B' theta = P` with the slack angle fixed at zero,
//! where `B'` is the standard susceptance Laplacian built from `1/x` of the
//! in-service branches. Loads and flows are MW at the interface; the solve
//! itself runs in per-unit on the case base.

use nalgebra::DMatrix;

use super::{GridCase, GridError};

/// Result of a DC power-flow solve. Flows are MW, aligned with the case's
/// branch list; out-of-service branches carry zero.
#[derive(Debug, Clone)]
pub struct PowerFlows {
    pub branch_mw: Vec<f64>,
    /// Net MW the slack bus absorbed beyond its stated injection. Nonzero
    /// when the injection vector did not balance.
    pub imbalance_mw: f64,
}

impl PowerFlows {
    /// Whether the injections balanced within `tol_rel * sum of |MW|`.
    pub fn balanced(&self, injections: &[f64], tol_rel: f64) -> bool {
        let scale: f64 = injections.iter().map(|v| v.abs()).sum();
        self.imbalance_mw.abs() <= tol_rel * scale.max(1.0)
    }
}

/// Power transfer distribution factors: row per branch, column per bus
/// (both in case order), slack column identically zero.
#[derive(Debug, Clone)]
pub struct Ptdf {
    pub n_branches: usize,
    pub n_buses: usize,
    values: Vec<f64>,
}

impl Ptdf {
    pub fn get(&self, branch: usize, bus: usize) -> f64 {
        self.values[branch * self.n_buses + bus]
    }

    pub fn row(&self, branch: usize) -> &[f64] {
        &self.values[branch * self.n_buses..(branch + 1) * self.n_buses]
    }

    /// Branch flows (MW) induced by a per-bus injection vector (MW).
    pub fn apply(&self, injections: &[f64]) -> Vec<f64> {
        (0..self.n_branches)
            .map(|t| {
                self.row(t)
                    .iter()
                    .zip(injections)
                    .map(|(s, p)| s * p)
                    .sum()
            })
            .collect()
    }
}

/// (reduced matrix, bus position -> reduced index, slack position)
type ReducedSystem = (DMatrix<f64>, Vec<Option<usize>>, usize);

/// Reduced susceptance matrix with the slack row/column removed, plus the
/// mapping from bus position to reduced index.
fn reduced_b(case: &GridCase) -> Result<ReducedSystem, GridError> {
    let n = case.buses.len();
    let slack_pos = case.bus_pos(case.slack_bus)?;
    let mut reduced_idx: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut next = 0;
    for pos in 0..n {
        if pos == slack_pos {
            reduced_idx.push(None);
        } else {
            reduced_idx.push(Some(next));
            next += 1;
        }
    }
    let mut b = DMatrix::<f64>::zeros(n - 1, n - 1);
    for br in case.branches.iter().filter(|b| b.in_service) {
        let f = case.bus_pos(br.from_bus)?;
        let t = case.bus_pos(br.to_bus)?;
        let y = 1.0 / br.reactance;
        match (reduced_idx[f], reduced_idx[t]) {
            (Some(i), Some(j)) => {
                b[(i, i)] += y;
                b[(j, j)] += y;
                b[(i, j)] -= y;
                b[(j, i)] -= y;
            }
            (Some(i), None) | (None, Some(i)) => b[(i, i)] += y,
            (None, None) => {}
        }
    }
    Ok((b, reduced_idx, slack_pos))
}

fn flows_from_angles(case: &GridCase, theta: &[f64]) -> Result<Vec<f64>, GridError> {
    case.branches
        .iter()
        .map(|br| {
            if !br.in_service {
                return Ok(0.0);
            }
            let f = case.bus_pos(br.from_bus)?;
            let t = case.bus_pos(br.to_bus)?;
            Ok((theta[f] - theta[t]) / br.reactance * case.base_mva)
        })
        .collect()
}

/// Solve the DC power flow for a per-bus MW injection vector (aligned with
/// `case.buses`). Any imbalance is absorbed by the slack bus and reported
/// in the result.
pub fn dc_power_flow(case: &GridCase, injections: &[f64]) -> Result<PowerFlows, GridError> {
    let n = case.buses.len();
    if injections.len() != n {
        return Err(GridError::Dimension(format!(
            "{} injections for {} buses",
            injections.len(),
            n
        )));
    }
    let (b, reduced_idx, slack_pos) = reduced_b(case)?;
    let mut rhs = DMatrix::<f64>::zeros(n - 1, 1);
    for (pos, inj) in injections.iter().enumerate() {
        if let Some(i) = reduced_idx[pos] {
            rhs[(i, 0)] = inj / case.base_mva;
        }
    }
    let lu = b.lu();
    let sol = lu.solve(&rhs).ok_or(GridError::Singular)?;
    let mut theta = vec![0.0; n];
    for pos in 0..n {
        if let Some(i) = reduced_idx[pos] {
            theta[pos] = sol[(i, 0)];
        }
    }
    let branch_mw = flows_from_angles(case, &theta)?;
    // The slack picks up whatever the stated injections miss.
    let stated: f64 = injections.iter().sum();
    let mut slack_net = 0.0;
    for (t, br) in case.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        if case.bus_pos(br.from_bus)? == slack_pos {
            slack_net += branch_mw[t];
        }
        if case.bus_pos(br.to_bus)? == slack_pos {
            slack_net -= branch_mw[t];
        }
    }
    // By conservation the slack's implied injection is -(sum of the others),
    // so the surplus it absorbs equals minus the stated total.
    let imbalance_mw = slack_net - injections[slack_pos];
    debug_assert!((imbalance_mw + stated).abs() < 1e-6 * (1.0 + stated.abs()));
    Ok(PowerFlows { branch_mw, imbalance_mw })
}

/// Compute the PTDF matrix: sensitivities of branch MW flows to bus MW
/// injections, with the matching withdrawal at the slack bus.
pub fn ptdf(case: &GridCase) -> Result<Ptdf, GridError> {
    let n = case.buses.len();
    let n_br = case.branches.len();
    let (b, reduced_idx, _) = reduced_b(case)?;
    let lu = b.lu();
    // Solve B_red X = I; X is the reduced reactance matrix.
    let identity = DMatrix::<f64>::identity(n - 1, n - 1);
    let x = lu.solve(&identity).ok_or(GridError::Singular)?;
    let mut values = vec![0.0; n_br * n];
    for (t, br) in case.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let f = case.bus_pos(br.from_bus)?;
        let to = case.bus_pos(br.to_bus)?;
        for bus_pos in 0..n {
            let Some(col) = reduced_idx[bus_pos] else {
                continue; // slack column stays zero
            };
            let theta_f = reduced_idx[f].map_or(0.0, |i| x[(i, col)]);
            let theta_t = reduced_idx[to].map_or(0.0, |i| x[(i, col)]);
            values[t * n + bus_pos] = (theta_f - theta_t) / br.reactance;
        }
    }
    Ok(Ptdf { n_branches: n_br, n_buses: n, values })
}
