//! Exact LP relaxation of the fixed-θ MCKP by greedy filling of hull
//! segments in nonincreasing slope order.

use crate::error::{Error, Result};
use crate::hull::HullChain;

/// Residual capacity below this is treated as exhausted.
pub const FILL_EPS: f64 = 1e-12;
/// Absolute slack on the LP feasibility check.
pub const CAPACITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ItemState {
    /// Sits on hull vertex `k`.
    Vertex(usize),
    /// Mixes vertices `k` and `k + 1` with weight `alpha` on `k + 1`.
    Mixed { k: usize, alpha: f64 },
}

impl ItemState {
    /// The vertex at or below this state.
    pub fn floor(self) -> usize {
        match self {
            ItemState::Vertex(k) | ItemState::Mixed { k, .. } => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub states: Vec<ItemState>,
    pub objective: f64,
    pub used_capacity: f64,
    pub critical_slope: Option<f64>,
    pub fractional_item: Option<usize>,
    /// Value of the vertex floor of every item, summed in item order. The
    /// objective is this plus the fractional gain.
    pub floor_value: f64,
}

impl LpSolution {
    pub fn fractional_count(&self) -> usize {
        self.states
            .iter()
            .filter(|s| matches!(s, ItemState::Mixed { .. }))
            .count()
    }

    pub fn critical_slope(&self) -> Option<f64> {
        self.critical_slope
    }
}

/// Solve `max Σ v` over convex mixes of hull vertices with `Σ c ≤ capacity`.
///
/// Segments are filled by nonincreasing slope with ties broken by
/// `(item, segment)` ascending.
pub fn solve_lp(chains: &[HullChain], capacity: f64) -> Result<LpSolution> {
    let base_cost: f64 = chains.iter().map(|h| h.vertices[0].cost).sum();
    let mut residual = capacity - base_cost;
    if residual < -CAPACITY_TOL {
        return Err(Error::LpInfeasible { deficit: -residual });
    }
    residual = residual.max(0.0);

    let mut segments: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(i, h)| h.seg_slope.iter().enumerate().map(move |(k, &r)| (r, i, k)))
        .collect();
    segments.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut level = vec![0usize; chains.len()];
    let mut fractional: Option<(usize, usize, f64)> = None;
    let mut critical = None;
    for &(rho, i, k) in &segments {
        if residual <= FILL_EPS {
            break;
        }
        let len = chains[i].seg_len[k];
        if len <= residual {
            level[i] = k + 1;
            residual -= len;
            critical = Some(rho);
        } else {
            fractional = Some((i, k, residual / len));
            critical = Some(rho);
            break;
        }
    }

    let floor_value: f64 = chains
        .iter()
        .zip(&level)
        .map(|(h, &k)| h.vertices[k].value)
        .sum();
    let mut used: f64 = chains
        .iter()
        .zip(&level)
        .map(|(h, &k)| h.vertices[k].cost)
        .sum();
    let mut states: Vec<ItemState> = level.iter().map(|&k| ItemState::Vertex(k)).collect();
    let mut objective = floor_value;
    if let Some((i, k, alpha)) = fractional {
        states[i] = ItemState::Mixed { k, alpha };
        objective += alpha * chains[i].jump(k);
        used += alpha * chains[i].seg_len[k];
    }
    Ok(LpSolution {
        states,
        objective,
        used_capacity: used,
        critical_slope: critical,
        fractional_item: fractional.map(|(i, _, _)| i),
        floor_value,
    })
}
