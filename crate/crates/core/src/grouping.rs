//! Radius-based load grouping.
//!
//! Loads are ranked by MW and walked from the largest down: any load not
//! yet covered by a group seeds a new one containing every load within
//! `r_g` branch hops of its bus. Groups may overlap and some loads may end
//! up in none.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{hop_distances, GridCase, GridError};
use crate::history::LoadHistory;

#[derive(Debug, Error)]
pub enum GroupingError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("history/case mismatch: {0}")]
    Mismatch(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// MW basis used to rank loads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankingBasis {
    /// Maximum MW the load reaches anywhere in the history.
    HistoryMax,
    /// The case file's base MW.
    BaseMw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadGroup {
    pub id: usize,
    pub seed_load: usize,
    /// Ascending load indices; always contains `seed_load`.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSet {
    pub groups: Vec<LoadGroup>,
    pub r_g: usize,
    /// How many groups were asked for; fewer may exist.
    pub n_g: usize,
    /// Per-load MW used for the ranking, aligned with the case's loads.
    pub ranking_basis: Vec<f64>,
    /// Set when the ranking ran out before `n_g` groups could be seeded.
    pub truncated: bool,
}

impl GroupSet {
    /// One group spanning every load: the ungrouped detector's view.
    pub fn single(n_loads: usize) -> Self {
        GroupSet {
            groups: vec![LoadGroup {
                id: 0,
                seed_load: 0,
                members: (0..n_loads).collect(),
            }],
            r_g: 0,
            n_g: 1,
            ranking_basis: vec![0.0; n_loads],
            truncated: false,
        }
    }

    pub fn n_loads(&self) -> usize {
        self.ranking_basis.len()
    }

    /// For each load, the ids of the groups containing it.
    pub fn membership(&self) -> Vec<Vec<usize>> {
        let mut member_of = vec![Vec::new(); self.n_loads()];
        for g in &self.groups {
            for &l in &g.members {
                member_of[l].push(g.id);
            }
        }
        member_of
    }

    pub fn to_json(&self) -> Result<String, GroupingError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, GroupingError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Load ranking: indices sorted by descending MW basis, ties broken by
/// ascending index.
#[derive(Debug, Clone)]
pub struct Ranking {
    pub order: Vec<usize>,
    pub basis_mw: Vec<f64>,
}

pub fn rank_loads(
    case: &GridCase,
    history: &LoadHistory,
    basis: RankingBasis,
) -> Result<Ranking, GroupingError> {
    history
        .check_case(case)
        .map_err(|e| GroupingError::Mismatch(e.to_string()))?;
    let basis_mw = match basis {
        RankingBasis::HistoryMax => history.per_load_max(),
        RankingBasis::BaseMw => case.loads.iter().map(|l| l.base_mw).collect(),
    };
    let mut order: Vec<usize> = (0..case.n_loads()).collect();
    order.sort_by(|&a, &b| {
        basis_mw[b]
            .partial_cmp(&basis_mw[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(Ranking { order, basis_mw })
}

/// Build up to `n_g` groups of hop radius `r_g` from the ranking.
pub fn build_groups(
    case: &GridCase,
    ranking: &Ranking,
    r_g: usize,
    n_g: usize,
) -> Result<GroupSet, GroupingError> {
    assert!(n_g >= 1, "n_g must be at least 1");
    let mut covered: HashSet<usize> = HashSet::new();
    let mut groups: Vec<LoadGroup> = Vec::new();
    for &candidate in &ranking.order {
        if groups.len() == n_g {
            break;
        }
        if covered.contains(&candidate) {
            continue;
        }
        let seed_bus = case.loads[candidate].bus;
        let hops = hop_distances(case, seed_bus)?;
        let mut members: Vec<usize> = case
            .loads
            .iter()
            .filter(|l| hops.get(&l.bus).is_some_and(|&d| d <= r_g))
            .map(|l| l.index)
            .collect();
        members.sort_unstable();
        covered.extend(members.iter().copied());
        groups.push(LoadGroup { id: groups.len(), seed_load: candidate, members });
    }
    let truncated = groups.len() < n_g;
    Ok(GroupSet {
        groups,
        r_g,
        n_g,
        ranking_basis: ranking.basis_mw.clone(),
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    /// Fraction of loads in at least one group.
    pub covered_fraction: f64,
    /// Among uncovered loads, the fraction with a covered load within one
    /// hop; 1.0 when nothing is uncovered.
    pub uncovered_with_covered_neighbor_fraction: f64,
}

pub fn coverage_stats(groups: &GroupSet, case: &GridCase) -> Result<CoverageStats, GroupingError> {
    let n = case.n_loads();
    if n == 0 {
        return Ok(CoverageStats {
            covered_fraction: 0.0,
            uncovered_with_covered_neighbor_fraction: 1.0,
        });
    }
    let mut covered = vec![false; n];
    for g in &groups.groups {
        for &l in &g.members {
            covered[l] = true;
        }
    }
    let covered_count = covered.iter().filter(|&&c| c).count();
    let uncovered: Vec<usize> = (0..n).filter(|&l| !covered[l]).collect();
    let with_neighbor = if uncovered.is_empty() {
        1.0
    } else {
        let covered_buses: HashSet<usize> = case
            .loads
            .iter()
            .filter(|l| covered[l.index])
            .map(|l| l.bus)
            .collect();
        let mut hits = 0usize;
        for &l in &uncovered {
            let hops = hop_distances(case, case.loads[l].bus)?;
            if hops
                .iter()
                .any(|(bus, &d)| d <= 1 && covered_buses.contains(bus))
            {
                hits += 1;
            }
        }
        hits as f64 / uncovered.len() as f64
    };
    Ok(CoverageStats {
        covered_fraction: covered_count as f64 / n as f64,
        uncovered_with_covered_neighbor_fraction: with_neighbor,
    })
}
