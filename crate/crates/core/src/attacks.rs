//! Load-redistribution attack generation and consequence evaluation.
//!
//! Random attacks perturb a chosen fraction of the loads by a bounded
//! shift. Targeted attacks pick the loads around a rated branch and shift
//! them along the PTDF gradient so that, after the system redispatches
//! against the falsified loads, the true flow on the target exceeds its
//! rating. Both respect the per-load shift bound; targeted (and optionally
//! random) attacks preserve the net system load.
//!
//! The system response is a DC optimal power flow solved with the in-crate
//! simplex ([`crate::lp`]); Bland's rule there keeps degenerate dispatch
//! problems from cycling.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{branch_loading, dc_power_flow, ptdf, GridCase, GridError, Ptdf};
use crate::history::LoadHistory;
use crate::lp::{self, Constraint, LinearProgram, LpError, Rel};

#[derive(Debug, Error)]
pub enum DcopfError {
    #[error("dispatch infeasible: {reason}; binding: {binding:?}")]
    Infeasible { reason: String, binding: Vec<String> },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("lp solver: {0}")]
    Lp(String),
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("footprint selects zero loads")]
    EmptyFootprint,
    #[error("target branch {0} has no rating")]
    UnratedTarget(usize),
    #[error("attack infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Dcopf(#[from] DcopfError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttackKind {
    Random { footprint_pct: f64, balanced: bool },
    Targeted { target_branch: usize, r_a: usize },
}

/// One attacked load vector derived from a base hour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackRecord {
    pub base_hour: usize,
    pub kind: AttackKind,
    /// Per-load bound: |false - true| <= shift_pct * true.
    pub shift_pct: f64,
    pub false_loads: Vec<f64>,
    /// Ground truth: which loads were modified.
    pub attacked_mask: Vec<bool>,
    /// Evaluated line overload in percent, once known.
    pub overload_pct: Option<f64>,
}

impl AttackRecord {
    pub fn footprint_pct(&self) -> Option<f64> {
        match self.kind {
            AttackKind::Random { footprint_pct, .. } => Some(footprint_pct),
            AttackKind::Targeted { .. } => None,
        }
    }

    pub fn target_branch(&self) -> Option<usize> {
        match self.kind {
            AttackKind::Targeted { target_branch, .. } => Some(target_branch),
            AttackKind::Random { .. } => None,
        }
    }
}

/// Write attack records as JSON lines.
pub fn write_records(path: &Path, records: &[AttackRecord]) -> Result<(), AttackError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<AttackRecord>, AttackError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// Random LR attack: `round(footprint_pct * n)` distinct loads, each moved
/// by `(1 +/- shift_pct)`. With `balanced`, signs are assigned greedily
/// (largest selected loads first, each sign chosen to keep the running net
/// change smallest) and the residual is zeroed by scaling shifts starting
/// from the smallest selected load, each within its own bound.
pub fn random_attack(
    true_loads: &[f64],
    base_hour: usize,
    footprint_pct: f64,
    shift_pct: f64,
    seed: u64,
    balanced: bool,
) -> Result<AttackRecord, AttackError> {
    if !(footprint_pct > 0.0 && footprint_pct <= 1.0) {
        return Err(AttackError::BadParam(format!(
            "footprint_pct {footprint_pct} outside (0, 1]"
        )));
    }
    if !(shift_pct > 0.0 && shift_pct < 1.0) {
        return Err(AttackError::BadParam(format!(
            "shift_pct {shift_pct} outside (0, 1)"
        )));
    }
    let n = true_loads.len();
    let m = (footprint_pct * n as f64).round() as usize;
    if m == 0 {
        return Err(AttackError::EmptyFootprint);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: first m entries are the selection.
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut selected = idx[..m].to_vec();
    let mut delta = vec![0.0f64; n];
    if balanced {
        selected.sort_by(|&a, &b| {
            true_loads[b]
                .partial_cmp(&true_loads[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut running = 0.0;
        for &l in &selected {
            let magnitude = shift_pct * true_loads[l];
            let sign = if running > 0.0 { -1.0 } else { 1.0 };
            delta[l] = sign * magnitude;
            running += delta[l];
        }
        // Zero the residual starting with the smallest selected load.
        for &l in selected.iter().rev() {
            if running.abs() <= 1e-12 {
                break;
            }
            let bound = shift_pct * true_loads[l];
            let desired = delta[l] - running;
            let clamped = desired.clamp(-bound, bound);
            running += clamped - delta[l];
            delta[l] = clamped;
        }
    } else {
        for &l in &selected {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            delta[l] = sign * shift_pct * true_loads[l];
        }
    }
    let false_loads: Vec<f64> = true_loads.iter().zip(&delta).map(|(t, d)| t + d).collect();
    let attacked_mask: Vec<bool> = false_loads
        .iter()
        .zip(true_loads)
        .map(|(f, t)| f != t)
        .collect();
    Ok(AttackRecord {
        base_hour,
        kind: AttackKind::Random { footprint_pct, balanced },
        shift_pct,
        false_loads,
        attacked_mask,
        overload_pct: None,
    })
}

/// Generation dispatch from a DC-OPF solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dispatch {
    pub p_gen: Vec<f64>,
    pub cost: f64,
    /// Rated branches whose flow limit is binding at the optimum.
    pub binding_branches: Vec<usize>,
}

/// DC-OPF solver with the case's PTDF cached across calls.
pub struct DcopfSolver<'a> {
    case: &'a GridCase,
    ptdf: Ptdf,
    /// Per-generator bus position.
    gen_pos: Vec<usize>,
}

impl<'a> DcopfSolver<'a> {
    pub fn new(case: &'a GridCase) -> Result<Self, DcopfError> {
        let ptdf = ptdf(case)?;
        let gen_pos = case
            .generators
            .iter()
            .map(|g| case.bus_pos(g.bus))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { case, ptdf, gen_pos })
    }

    pub fn ptdf(&self) -> &Ptdf {
        &self.ptdf
    }

    /// Minimize linear generation cost subject to generator bounds, total
    /// balance, and (optionally) branch flow limits.
    pub fn solve(&self, loads_mw: &[f64], enforce_line_limits: bool) -> Result<Dispatch, DcopfError> {
        let case = self.case;
        let demand: f64 = loads_mw.iter().sum();
        let p_min_total: f64 = case.generators.iter().map(|g| g.p_min).sum();
        let p_max_total: f64 = case.generators.iter().map(|g| g.p_max).sum();
        let tol = 1e-9 * (1.0 + demand.abs());
        if demand < p_min_total - tol || demand > p_max_total + tol {
            return Err(DcopfError::Infeasible {
                reason: format!(
                    "demand {demand:.3} MW outside dispatchable range [{p_min_total:.3}, {p_max_total:.3}]"
                ),
                binding: vec!["total balance".into()],
            });
        }
        let n_gen = case.generators.len();
        // Variables: x_g = p_g - p_min_g >= 0.
        let mut constraints = Vec::new();
        let mut labels = Vec::new();
        constraints.push(Constraint::new(
            vec![1.0; n_gen],
            Rel::Eq,
            demand - p_min_total,
        ));
        labels.push("total balance".to_string());
        for (g, gen) in case.generators.iter().enumerate() {
            let mut row = vec![0.0; n_gen];
            row[g] = 1.0;
            constraints.push(Constraint::new(row, Rel::Le, gen.p_max - gen.p_min));
            labels.push(format!("gen {g} upper bound"));
        }
        if enforce_line_limits {
            // Base flows with every generator at p_min.
            let mut base_inj = case.load_injections(loads_mw)?;
            for (g, gen) in case.generators.iter().enumerate() {
                base_inj[self.gen_pos[g]] += gen.p_min;
            }
            let base_flows = self.ptdf.apply(&base_inj);
            for (t, br) in case.branches.iter().enumerate() {
                if !br.in_service || br.rate_a <= 0.0 {
                    continue;
                }
                let sens: Vec<f64> = (0..n_gen)
                    .map(|g| self.ptdf.get(t, self.gen_pos[g]))
                    .collect();
                constraints.push(Constraint::new(
                    sens.clone(),
                    Rel::Le,
                    br.rate_a - base_flows[t],
                ));
                labels.push(format!("branch {} ({}-{}) forward limit", t, br.from_bus, br.to_bus));
                constraints.push(Constraint::new(
                    sens.iter().map(|v| -v).collect(),
                    Rel::Le,
                    br.rate_a + base_flows[t],
                ));
                labels.push(format!("branch {} ({}-{}) reverse limit", t, br.from_bus, br.to_bus));
            }
        }
        let objective = case.generators.iter().map(|g| g.cost_linear).collect();
        let program = LinearProgram { objective, constraints };
        let solution = match lp::solve(&program) {
            Ok(s) => s,
            Err(LpError::Infeasible { blocking_rows }) => {
                return Err(DcopfError::Infeasible {
                    reason: "line limits cannot be met".into(),
                    binding: blocking_rows
                        .iter()
                        .map(|&r| labels.get(r).cloned().unwrap_or_else(|| format!("row {r}")))
                        .collect(),
                });
            }
            Err(e) => return Err(DcopfError::Lp(e.to_string())),
        };
        let p_gen: Vec<f64> = case
            .generators
            .iter()
            .zip(&solution.x)
            .map(|(gen, x)| gen.p_min + x)
            .collect();
        let fixed_cost: f64 = case
            .generators
            .iter()
            .map(|g| g.cost_linear * g.p_min)
            .sum();
        let cost = fixed_cost + solution.objective;
        let binding_branches = if enforce_line_limits {
            let flows = self.flows(&p_gen, loads_mw)?;
            case.branches
                .iter()
                .enumerate()
                .filter(|(t, br)| {
                    br.in_service
                        && br.rate_a > 0.0
                        && flows.branch_mw[*t].abs() >= br.rate_a - 1e-6 * (1.0 + br.rate_a)
                })
                .map(|(t, _)| t)
                .collect()
        } else {
            Vec::new()
        };
        Ok(Dispatch { p_gen, cost, binding_branches })
    }

    /// DC flows for a dispatch serving the given loads.
    pub fn flows(
        &self,
        p_gen: &[f64],
        loads_mw: &[f64],
    ) -> Result<crate::grid::PowerFlows, DcopfError> {
        let mut inj = self.case.load_injections(loads_mw)?;
        for (g, p) in p_gen.iter().enumerate() {
            inj[self.gen_pos[g]] += p;
        }
        Ok(dc_power_flow(self.case, &inj)?)
    }
}

/// One-shot DC-OPF without a cached solver.
pub fn dcopf(
    case: &GridCase,
    loads_mw: &[f64],
    enforce_line_limits: bool,
) -> Result<Dispatch, DcopfError> {
    DcopfSolver::new(case)?.solve(loads_mw, enforce_line_limits)
}

/// Closed-form merit-order dispatch (no network limits): fill generators
/// cheapest first. The unlimited DC-OPF must agree with this.
pub fn merit_order_dispatch(case: &GridCase, loads_mw: &[f64]) -> Result<Dispatch, DcopfError> {
    let demand: f64 = loads_mw.iter().sum();
    let p_min_total: f64 = case.generators.iter().map(|g| g.p_min).sum();
    let p_max_total: f64 = case.generators.iter().map(|g| g.p_max).sum();
    if demand < p_min_total - 1e-9 || demand > p_max_total + 1e-9 {
        return Err(DcopfError::Infeasible {
            reason: "demand outside dispatchable range".into(),
            binding: vec!["total balance".into()],
        });
    }
    let mut order: Vec<usize> = (0..case.generators.len()).collect();
    order.sort_by(|&a, &b| {
        case.generators[a]
            .cost_linear
            .partial_cmp(&case.generators[b].cost_linear)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut p_gen: Vec<f64> = case.generators.iter().map(|g| g.p_min).collect();
    let mut remaining = demand - p_min_total;
    for g in order {
        let headroom = case.generators[g].p_max - case.generators[g].p_min;
        let take = headroom.min(remaining);
        p_gen[g] += take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    let cost = case
        .generators
        .iter()
        .zip(&p_gen)
        .map(|(g, p)| g.cost_linear * p)
        .sum();
    Ok(Dispatch { p_gen, cost, binding_branches: Vec::new() })
}

/// Targeted LR attack on a rated branch.
///
/// Candidate loads sit within `r_a` hops of either endpoint. With sigma the
/// sign of the pre-attack flow, candidates whose bus has `sigma * PTDF > 0`
/// are raised by the shift and those with `sigma * PTDF < 0` are lowered:
/// after the dispatch re-balances against the falsified loads, the true
/// flow on the target moves further along sigma. A balancing pass then
/// shrinks shifts, least effective first (ascending `|PTDF * load|`), until
/// the net load change is zero.
pub fn targeted_attack(
    case: &GridCase,
    true_loads: &[f64],
    base_hour: usize,
    target_branch: usize,
    shift_pct: f64,
    r_a: usize,
) -> Result<AttackRecord, AttackError> {
    let solver = DcopfSolver::new(case)?;
    targeted_attack_with(&solver, true_loads, base_hour, target_branch, shift_pct, r_a)
}

/// [`targeted_attack`] against a pre-built solver (reuses the PTDF).
pub fn targeted_attack_with(
    solver: &DcopfSolver<'_>,
    true_loads: &[f64],
    base_hour: usize,
    target_branch: usize,
    shift_pct: f64,
    r_a: usize,
) -> Result<AttackRecord, AttackError> {
    let case = solver.case;
    if target_branch >= case.branches.len() {
        return Err(AttackError::BadParam(format!(
            "target branch {target_branch} out of range"
        )));
    }
    if shift_pct <= 0.0 {
        return Err(AttackError::Infeasible(
            "zero shift leaves no degrees of freedom".into(),
        ));
    }
    if shift_pct >= 1.0 {
        return Err(AttackError::BadParam(format!("shift_pct {shift_pct} outside (0, 1)")));
    }
    if r_a == 0 {
        return Err(AttackError::BadParam("r_a must be at least 1".into()));
    }
    let branch = &case.branches[target_branch];
    if branch.rate_a <= 0.0 {
        return Err(AttackError::UnratedTarget(target_branch));
    }
    if !branch.in_service {
        return Err(AttackError::BadParam(format!(
            "target branch {target_branch} is out of service"
        )));
    }
    if true_loads.len() != case.n_loads() {
        return Err(AttackError::BadParam(format!(
            "{} loads for a case with {}",
            true_loads.len(),
            case.n_loads()
        )));
    }

    // Pre-attack operating point; fall back to the unconstrained dispatch
    // when the limits are infeasible for this hour.
    let dispatch = solver
        .solve(true_loads, true)
        .or_else(|_| solver.solve(true_loads, false))?;
    let base_flow = solver.flows(&dispatch.p_gen, true_loads)?.branch_mw[target_branch];
    let sigma = if base_flow >= 0.0 { 1.0 } else { -1.0 };

    let hops_from = crate::grid::hop_distances(case, branch.from_bus)?;
    let hops_to = crate::grid::hop_distances(case, branch.to_bus)?;
    let mut candidates: Vec<usize> = Vec::new();
    for load in &case.loads {
        let near = hops_from.get(&load.bus).is_some_and(|&d| d <= r_a)
            || hops_to.get(&load.bus).is_some_and(|&d| d <= r_a);
        if near {
            candidates.push(load.index);
        }
    }
    if candidates.is_empty() {
        return Err(AttackError::Infeasible("no loads near the target".into()));
    }

    let mut delta = vec![0.0f64; case.n_loads()];
    let mut weights: Vec<(usize, f64)> = Vec::new();
    for &l in &candidates {
        let pos = case.bus_pos(case.loads[l].bus)?;
        let s = sigma * solver.ptdf.get(target_branch, pos);
        if s > 1e-12 {
            delta[l] = shift_pct * true_loads[l];
        } else if s < -1e-12 {
            delta[l] = -shift_pct * true_loads[l];
        }
        weights.push((l, (s * true_loads[l]).abs()));
    }
    // Shrink the least effective shifts first until net load is preserved.
    weights.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let mut residual: f64 = delta.iter().sum();
    for &(l, _) in &weights {
        if residual.abs() <= 1e-12 {
            break;
        }
        if delta[l] == 0.0 || delta[l].signum() != residual.signum() {
            continue;
        }
        let give = delta[l].abs().min(residual.abs());
        delta[l] -= residual.signum() * give;
        residual -= residual.signum() * give;
    }
    let scale: f64 = true_loads.iter().sum::<f64>().abs().max(1.0);
    if residual.abs() > 1e-6 * scale {
        return Err(AttackError::Infeasible(format!(
            "cannot absorb {residual:.3} MW of imbalance within the candidate set"
        )));
    }
    // Drop floating-point dust left by the shrinking arithmetic so a fully
    // cancelled attack is recognized as such.
    for (d, t) in delta.iter_mut().zip(true_loads) {
        if d.abs() <= 1e-9 * (1.0 + t.abs()) {
            *d = 0.0;
        }
    }
    if delta.iter().all(|d| *d == 0.0) {
        return Err(AttackError::Infeasible(
            "no effective shifts remain after balancing".into(),
        ));
    }

    let false_loads: Vec<f64> = true_loads.iter().zip(&delta).map(|(t, d)| t + d).collect();
    // A shrunk shift can vanish in the rounding of t + d; the mask follows
    // the final values, not the intended shifts.
    let attacked_mask: Vec<bool> = false_loads
        .iter()
        .zip(true_loads)
        .map(|(f, t)| f != t)
        .collect();
    Ok(AttackRecord {
        base_hour,
        kind: AttackKind::Targeted { target_branch, r_a },
        shift_pct,
        false_loads,
        attacked_mask,
        overload_pct: None,
    })
}

/// Physical consequence of an attack after redispatch.
#[derive(Debug, Clone, Copy)]
pub struct Consequence {
    /// Overload percent on the target branch (targeted attacks) or the
    /// worst rated branch (random attacks); 0 when nothing exceeds rating.
    pub overload_pct: f64,
    /// Net MW imbalance the slack absorbed (nonzero for unbalanced
    /// attacks).
    pub imbalance_mw: f64,
}

/// Evaluate an attack: dispatch against the falsified loads with line
/// limits on, then measure the true flows that dispatch causes.
pub fn evaluate_consequence(
    case: &GridCase,
    true_loads: &[f64],
    record: &AttackRecord,
) -> Result<Consequence, AttackError> {
    let solver = DcopfSolver::new(case)?;
    evaluate_consequence_with(&solver, true_loads, record)
}

pub fn evaluate_consequence_with(
    solver: &DcopfSolver<'_>,
    true_loads: &[f64],
    record: &AttackRecord,
) -> Result<Consequence, AttackError> {
    let case = solver.case;
    let dispatch = solver.solve(&record.false_loads, true)?;
    let flows = solver.flows(&dispatch.p_gen, true_loads)?;
    let loading = branch_loading(case, &flows.branch_mw)?;
    let overload = match record.target_branch() {
        Some(t) => (loading[t] - 1.0).max(0.0) * 100.0,
        None => loading
            .iter()
            .map(|l| (l - 1.0).max(0.0) * 100.0)
            .fold(0.0, f64::max),
    };
    Ok(Consequence {
        overload_pct: overload,
        imbalance_mw: flows.imbalance_mw,
    })
}

/// Congestion census entry: branches at or above the loading threshold for
/// one hour's optimal dispatch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HourCensus {
    pub hour: usize,
    pub congested: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusReport {
    pub hours: Vec<HourCensus>,
    /// Hours whose dispatch was infeasible; skipped, not fatal.
    pub infeasible_hours: Vec<usize>,
    pub loading_threshold: f64,
}

/// Run the dispatch for every hour and report branches loaded at or above
/// `loading_threshold` (the congestion screen uses 0.9).
pub fn congestion_census(
    case: &GridCase,
    history: &LoadHistory,
    loading_threshold: f64,
) -> Result<CensusReport, AttackError> {
    let solver = DcopfSolver::new(case)?;
    let mut hours = Vec::new();
    let mut infeasible_hours = Vec::new();
    for t in 0..history.n_hours() {
        let loads = history.hour(t);
        match solver.solve(loads, true) {
            Ok(dispatch) => {
                let flows = solver.flows(&dispatch.p_gen, loads)?;
                let loading = branch_loading(case, &flows.branch_mw)?;
                let congested: Vec<usize> = loading
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l >= loading_threshold)
                    .map(|(t, _)| t)
                    .collect();
                hours.push(HourCensus { hour: t, congested });
            }
            Err(DcopfError::Infeasible { .. }) => infeasible_hours.push(t),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(CensusReport { hours, infeasible_hours, loading_threshold })
}
