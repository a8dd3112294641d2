//! Grid cases: parsing, validation, graph queries, and the DC kernel.
//!
//! A [`GridCase`] is an immutable snapshot of a transmission network. All
//! operations here are pure functions of the case, so a case and anything
//! derived from it can be shared freely across threads.

mod dc;
mod matpower;

pub use dc::{dc_power_flow, ptdf, PowerFlows, Ptdf};
pub use matpower::parse_matpower;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing block mpc.{0}")]
    MissingBlock(String),
    #[error("invalid case: {0}")]
    Validation(String),
    #[error("unknown bus id {0}")]
    UnknownBus(usize),
    #[error("singular susceptance matrix; network is likely disconnected")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusType {
    Pq,
    Pv,
    Slack,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub bus_type: BusType,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance in per-unit on the system base.
    pub reactance: f64,
    /// Thermal rating in MW; 0 means unlimited.
    pub rate_a: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Linear cost coefficient in $/MWh.
    pub cost_linear: f64,
}

/// A load point; `index` is its position in [`GridCase::loads`] and the row
/// it occupies in every load vector and history matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadPoint {
    pub index: usize,
    pub bus: usize,
    pub base_mw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<LoadPoint>,
    pub slack_bus: usize,
}

impl GridCase {
    /// Validate invariants and return the case.
    pub fn validated(self) -> Result<Self, GridError> {
        self.validate()?;
        Ok(self)
    }

    pub fn n_loads(&self) -> usize {
        self.loads.len()
    }

    /// Position of a bus id in `buses`, usable as a matrix index.
    pub fn bus_pos(&self, bus_id: usize) -> Result<usize, GridError> {
        self.buses
            .iter()
            .position(|b| b.id == bus_id)
            .ok_or(GridError::UnknownBus(bus_id))
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.base_mva <= 0.0 || self.base_mva.is_nan() {
            return Err(GridError::Validation("base MVA must be positive".into()));
        }
        let mut ids = HashSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(GridError::Validation(format!("duplicate bus id {}", b.id)));
            }
        }
        let slack_count = self
            .buses
            .iter()
            .filter(|b| b.bus_type == BusType::Slack)
            .count();
        if slack_count != 1 {
            return Err(GridError::Validation(format!(
                "expected exactly one slack bus, found {slack_count}"
            )));
        }
        if self
            .buses
            .iter()
            .find(|b| b.bus_type == BusType::Slack)
            .map(|b| b.id)
            != Some(self.slack_bus)
        {
            return Err(GridError::Validation(format!(
                "slack_bus {} does not match the slack-typed bus",
                self.slack_bus
            )));
        }
        for (t, br) in self.branches.iter().enumerate() {
            if !ids.contains(&br.from_bus) || !ids.contains(&br.to_bus) {
                return Err(GridError::Validation(format!(
                    "branch {t} ({}-{}) references a missing bus",
                    br.from_bus, br.to_bus
                )));
            }
            if br.in_service && (br.reactance <= 0.0 || br.reactance.is_nan()) {
                return Err(GridError::Validation(format!(
                    "branch {t} ({}-{}) has nonpositive reactance {}",
                    br.from_bus, br.to_bus, br.reactance
                )));
            }
            if br.rate_a < 0.0 {
                return Err(GridError::Validation(format!(
                    "branch {t} ({}-{}) has negative rating",
                    br.from_bus, br.to_bus
                )));
            }
        }
        for (g, gen) in self.generators.iter().enumerate() {
            if !ids.contains(&gen.bus) {
                return Err(GridError::Validation(format!(
                    "generator {g} references missing bus {}",
                    gen.bus
                )));
            }
            if gen.p_min < 0.0 || gen.p_max < gen.p_min || gen.p_min.is_nan() || gen.p_max.is_nan() {
                return Err(GridError::Validation(format!(
                    "generator {g} violates 0 <= p_min <= p_max"
                )));
            }
        }
        let mut load_buses = HashSet::new();
        for (l, load) in self.loads.iter().enumerate() {
            if load.index != l {
                return Err(GridError::Validation(format!(
                    "load {l} carries index {}",
                    load.index
                )));
            }
            if !ids.contains(&load.bus) {
                return Err(GridError::Validation(format!(
                    "load {l} references missing bus {}",
                    load.bus
                )));
            }
            if !load_buses.insert(load.bus) {
                return Err(GridError::Validation(format!(
                    "more than one load at bus {}",
                    load.bus
                )));
            }
            if load.base_mw < 0.0 {
                return Err(GridError::Validation(format!("load {l} has negative MW")));
            }
        }
        // Connectivity over in-service branches.
        let reach = hop_distances(self, self.slack_bus)?;
        if reach.len() != self.buses.len() {
            let missing: Vec<usize> = self
                .buses
                .iter()
                .map(|b| b.id)
                .filter(|id| !reach.contains_key(id))
                .collect();
            return Err(GridError::Validation(format!(
                "network is disconnected; unreachable buses {missing:?}"
            )));
        }
        Ok(())
    }

    /// Adjacency over in-service branches, keyed by bus id.
    pub(crate) fn adjacency(&self) -> HashMap<usize, Vec<usize>> {
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for b in &self.buses {
            adj.entry(b.id).or_default();
        }
        for br in self.branches.iter().filter(|b| b.in_service) {
            adj.entry(br.from_bus).or_default().push(br.to_bus);
            adj.entry(br.to_bus).or_default().push(br.from_bus);
        }
        adj
    }

    /// Per-bus injection vector (aligned with `buses`) for a load vector:
    /// every load withdraws its MW at its bus.
    pub fn load_injections(&self, loads_mw: &[f64]) -> Result<Vec<f64>, GridError> {
        if loads_mw.len() != self.loads.len() {
            return Err(GridError::Dimension(format!(
                "load vector has {} entries, case has {} loads",
                loads_mw.len(),
                self.loads.len()
            )));
        }
        let mut inj = vec![0.0; self.buses.len()];
        for (load, mw) in self.loads.iter().zip(loads_mw) {
            inj[self.bus_pos(load.bus)?] -= mw;
        }
        Ok(inj)
    }

    pub fn to_json(&self) -> Result<String, GridError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let case: GridCase = serde_json::from_str(text)?;
        case.validated()
    }
}

/// Breadth-first hop counts from `source_bus` over in-service branches.
/// Unreachable buses are absent from the map.
pub fn hop_distances(case: &GridCase, source_bus: usize) -> Result<BTreeMap<usize, usize>, GridError> {
    if !case.buses.iter().any(|b| b.id == source_bus) {
        return Err(GridError::UnknownBus(source_bus));
    }
    let adj = case.adjacency();
    let mut dist = BTreeMap::new();
    dist.insert(source_bus, 0usize);
    let mut queue = VecDeque::from([source_bus]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if let Some(neigh) = adj.get(&u) {
            for &v in neigh {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(d + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    Ok(dist)
}

/// Per-branch |flow|/rate loading fractions. Unrated branches (rate 0)
/// report 0 and never count as congested.
pub fn branch_loading(case: &GridCase, flows_mw: &[f64]) -> Result<Vec<f64>, GridError> {
    if flows_mw.len() != case.branches.len() {
        return Err(GridError::Dimension(format!(
            "{} flows for {} branches",
            flows_mw.len(),
            case.branches.len()
        )));
    }
    Ok(case
        .branches
        .iter()
        .zip(flows_mw)
        .map(|(br, f)| if br.rate_a > 0.0 { f.abs() / br.rate_a } else { 0.0 })
        .collect())
}
