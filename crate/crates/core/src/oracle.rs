//! Brute-force reference solvers for cross-checking the fast paths: full
//! enumeration of discrete choices under the exact certificate, and a dense
//! two-phase tableau simplex for the MCKP relaxation.

use serde::Serialize;

use crate::driver::{self, theta_hulls, SolveOptions};
use crate::error::{Error, Result};
use crate::generators::{gen_synthetic, SyntheticConfig};
use crate::instance::PricingInstance;
use crate::lp::{solve_lp, ItemState};
use crate::par::Execution;
use crate::reduction::{build_mckp, option_coeffs, CoeffTable, MckpView};
use crate::rng::SplitMix64;
use crate::robust::{beta, candidate_thetas, is_robust_feasible};

/// Largest number of discrete choices [`exhaustive_robust`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000_000;
/// Largest number of structural LP variables [`lp_oracle`] accepts.
pub const LP_VARIABLE_LIMIT: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Menu indices of the best robust-feasible choice; `None` if infeasible.
    pub best_choice: Option<Vec<usize>>,
    pub best_objective: Option<f64>,
    pub enumerated_count: u128,
}

impl OracleResult {
    pub fn is_feasible(&self) -> bool {
        self.best_choice.is_some()
    }
}

/// Enumerate every admissible choice and keep the largest revenue among those
/// with certificate `Z ≥ 0` (within the certificate tolerance). Ties go to the
/// lexicographically smallest choice.
pub fn exhaustive_robust(inst: &PricingInstance, gamma: usize) -> Result<OracleResult> {
    if gamma > inst.len() {
        return Err(Error::GammaOutOfRange {
            gamma,
            n: inst.len(),
        });
    }
    let coeffs = option_coeffs(inst)?;
    let size = coeffs
        .items
        .iter()
        .try_fold(1u128, |acc, opts| acc.checked_mul(opts.len() as u128))
        .unwrap_or(u128::MAX);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    let n = coeffs.len();
    let mut pos = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut count = 0u128;
    let mut t = vec![0.0; n];
    loop {
        count += 1;
        let mut v = 0.0;
        let mut s = 0.0;
        for (i, &p) in pos.iter().enumerate() {
            let o = coeffs.items[i][p];
            v += o.v;
            s += o.s;
            t[i] = o.t;
        }
        let z = s - beta(&t, gamma)?;
        if is_robust_feasible(z) && best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, pos.clone()));
        }
        // Odometer with the first item most significant gives lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                let (best_objective, best_choice) = match best {
                    Some((v, p)) => (Some(v), Some(coeffs.to_menu_choice(&p))),
                    None => (None, None),
                };
                return Ok(OracleResult {
                    best_choice,
                    best_objective,
                    enumerated_count: count,
                });
            }
            i -= 1;
            pos[i] += 1;
            if pos[i] < coeffs.items[i].len() {
                break;
            }
            pos[i] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOracleResult {
    pub value: f64,
    /// Dual multiplier of the knapsack row.
    pub dual: f64,
    /// Primal solution, `x[i][j]`.
    pub x: Vec<Vec<f64>>,
    pub pivots: usize,
}

const PIVOT_TOL: f64 = 1e-12;
const PRICE_TOL: f64 = 1e-10;

struct Tableau {
    /// `rows × (cols + 1)`; last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.a[r][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for x in self.a[r].iter_mut() {
            *x /= p;
        }
        let prow = self.a[r].clone();
        for (k, row) in self.a.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(&prow) {
                    *x -= f * y;
                }
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|j| {
                cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(r, &b)| cost[b] * self.a[r][j])
                        .sum::<f64>()
            })
            .collect()
    }

    /// Maximize `cost · x` over columns `< allowed` with Bland's rule.
    fn run(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        loop {
            let d = self.reduced_costs(cost);
            let Some(c) = (0..allowed).find(|&j| d[j] > PRICE_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.a.len() {
                let arc = self.a[r][c];
                if arc > PIVOT_TOL {
                    let ratio = self.rhs(r) / arc;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - PIVOT_TOL
                                || (ratio <= lratio + PIVOT_TOL && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return Err(Error::Config("unbounded LP in oracle".into())),
            }
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| cost[b] * self.rhs(r))
            .sum()
    }
}

/// Solve `max Σ v_ij x_ij` s.t. `Σ_j x_ij = 1` per item, `Σ c_ij x_ij ≤ C`,
/// `x ≥ 0` by a dense two-phase tableau simplex.
pub fn lp_oracle(values: &[Vec<f64>], costs: &[Vec<f64>], capacity: f64) -> Result<LpOracleResult> {
    let n = values.len();
    let nvars: usize = values.iter().map(Vec::len).sum();
    if nvars > LP_VARIABLE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size: nvars as u128,
            limit: LP_VARIABLE_LIMIT as u128,
        });
    }
    if values.iter().any(Vec::is_empty) || costs.len() != n {
        return Err(Error::Config("every item needs at least one option".into()));
    }

    // Columns: structural, then the knapsack slack, then one artificial per row.
    let rows = n + 1;
    let slack = nvars;
    let art0 = nvars + 1;
    let cols = art0 + rows;
    let mut a = vec![vec![0.0; cols + 1]; rows];
    let mut col = 0;
    for i in 0..n {
        for j in 0..values[i].len() {
            a[i][col] = 1.0;
            a[n][col] = costs[i][j];
            col += 1;
        }
        a[i][cols] = 1.0;
    }
    a[n][slack] = 1.0;
    a[n][cols] = capacity;
    // Keep every right-hand side nonnegative.
    let flipped = capacity < 0.0;
    if flipped {
        for x in a[n].iter_mut() {
            *x = -*x;
        }
    }
    for (r, row) in a.iter_mut().enumerate() {
        row[art0 + r] = 1.0;
    }
    let mut tab = Tableau {
        a,
        basis: (art0..art0 + rows).collect(),
        cols,
        pivots: 0,
    };

    let mut phase1 = vec![0.0; cols];
    phase1[art0..].iter_mut().for_each(|c| *c = -1.0);
    tab.run(&phase1, cols)?;
    let infeas = -tab.objective(&phase1);
    if infeas > 1e-9 {
        return Err(Error::LpInfeasible { deficit: infeas });
    }
    // Drive remaining zero-level artificials out where possible.
    for r in 0..rows {
        if tab.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&c| tab.a[r][c].abs() > 1e-9) {
                tab.pivot(r, c);
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    let mut col = 0;
    for v in values {
        for &x in v {
            phase2[col] = x;
            col += 1;
        }
    }
    tab.run(&phase2, art0)?;

    // The artificial block holds B⁻¹ of the sign-normalized system.
    let w_knap: f64 = tab
        .basis
        .iter()
        .enumerate()
        .map(|(r, &b)| phase2[b] * tab.a[r][art0 + n])
        .sum();
    let dual = if flipped { -w_knap } else { w_knap };

    let mut flat = vec![0.0; cols];
    for (r, &b) in tab.basis.iter().enumerate() {
        flat[b] = tab.rhs(r);
    }
    let mut x = Vec::with_capacity(n);
    let mut col = 0;
    for v in values {
        x.push(flat[col..col + v.len()].to_vec());
        col += v.len();
    }
    Ok(LpOracleResult {
        value: tab.objective(&phase2),
        dual,
        x,
        pivots: tab.pivots,
    })
}

/// [`lp_oracle`] on the fixed-θ subproblem described by `view`.
pub fn lp_oracle_view(coeffs: &CoeffTable, view: &MckpView) -> Result<LpOracleResult> {
    let values: Vec<Vec<f64>> = coeffs
        .items
        .iter()
        .map(|o| o.iter().map(|c| c.v).collect())
        .collect();
    lp_oracle(&values, &view.cost, view.capacity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossCheckConfig {
    pub trials: usize,
    pub max_n: usize,
    pub max_m: usize,
    pub seed: u64,
}

/// Results of a randomized battery comparing the fast solvers against the
/// oracles on tiny synthetic instances.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CrossCheckReport {
    pub trials: usize,
    /// Fixed-θ subproblems compared against the tableau LP.
    pub lp_checks: usize,
    pub max_lp_residual: f64,
    /// Subproblems with an interior fractional item, where the dual is unique.
    pub dual_checks: usize,
    pub max_dual_residual: f64,
    pub max_fractional: usize,
    /// One LP reported infeasible and the other did not.
    pub lp_status_mismatches: usize,
    pub exhaustive_checks: usize,
    pub exhaustive_equal: usize,
    /// Driver objective below the oracle optimum minus `ΔV_max` at the chosen θ.
    pub bound_violations: usize,
    pub feasibility_mismatches: usize,
    /// Oracle optimum above the best LP bound over θ.
    pub relaxation_violations: usize,
}

impl CrossCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_lp_residual < tol
            && self.max_dual_residual < tol
            && self.max_fractional <= 1
            && self.lp_status_mismatches == 0
            && self.bound_violations == 0
            && self.feasibility_mismatches == 0
            && self.relaxation_violations == 0
    }
}

/// Tiny random instance for trial `k` of a cross-check battery. The margin
/// target is jittered around its calibrated value so that some draws are
/// infeasible.
pub fn tiny_instance(cfg: &CrossCheckConfig, k: usize) -> Result<PricingInstance> {
    if cfg.max_n < 1 || cfg.max_m < 2 {
        return Err(Error::Config(
            "cross-check needs max_n ≥ 1 and max_m ≥ 2".into(),
        ));
    }
    let mut rng = SplitMix64::substream(cfg.seed, k as u64);
    let n = 1 + rng.below(cfg.max_n);
    let m = 2 + rng.below(cfg.max_m - 1);
    let alpha = rng.uniform(0.0, 0.3);
    let jitter = rng.uniform(0.97, 1.02);
    let seed = rng.next_u64();
    let mut inst = gen_synthetic(&SyntheticConfig {
        n,
        m,
        alpha,
        seed,
        ..SyntheticConfig::default()
    })?;
    inst.margin_target *= jitter;
    Ok(inst)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

pub fn cross_check(cfg: &CrossCheckConfig) -> Result<CrossCheckReport> {
    let mut rep = CrossCheckReport {
        trials: cfg.trials,
        ..CrossCheckReport::default()
    };
    for k in 0..cfg.trials {
        let inst = tiny_instance(cfg, k)?;
        let coeffs = option_coeffs(&inst)?;
        let values: Vec<Vec<f64>> = coeffs
            .items
            .iter()
            .map(|o| o.iter().map(|c| c.v).collect())
            .collect();

        let mut best_bound = f64::NEG_INFINITY;
        let gamma = SplitMix64::substream(cfg.seed ^ 0x5eed, k as u64).below(inst.len() + 1);
        for theta in candidate_thetas(&coeffs) {
            let view = build_mckp(&coeffs, theta, gamma);
            if view.capacity < 0.0 {
                continue;
            }
            let chains = theta_hulls(&coeffs, &view.cost);
            let fast = solve_lp(&chains, view.capacity);
            let slow = lp_oracle(&values, &view.cost, view.capacity);
            rep.lp_checks += 1;
            match (fast, slow) {
                (Ok(lp), Ok(or)) => {
                    rep.max_lp_residual = rep.max_lp_residual.max((lp.objective - or.value).abs());
                    rep.max_fractional = rep.max_fractional.max(lp.fractional_count());
                    best_bound = best_bound.max(or.value);
                    if let Some(i) = lp.fractional_item {
                        if let ItemState::Mixed { alpha, .. } = lp.states[i] {
                            if (1e-6..=1.0 - 1e-6).contains(&alpha) {
                                rep.dual_checks += 1;
                                let slope =
                                    lp.critical_slope().expect("fractional item has a slope");
                                rep.max_dual_residual =
                                    rep.max_dual_residual.max((slope - or.dual).abs());
                            }
                        }
                    }
                }
                (Err(_), Err(_)) => {}
                _ => rep.lp_status_mismatches += 1,
            }
        }

        let exact = exhaustive_robust(&inst, gamma)?;
        let opts = SolveOptions {
            execution: Execution::Sequential,
            ..SolveOptions::default()
        };
        let report = driver::solve(&inst, gamma, opts)?;
        rep.exhaustive_checks += 1;
        match (exact.best_objective, report.best.as_ref()) {
            (Some(opt), Some(sol)) => {
                let dv = report.best_trace().and_then(|t| t.dv_max).unwrap_or(0.0);
                if sol.objective < opt - dv - 1e-9 * opt.abs().max(1.0) {
                    rep.bound_violations += 1;
                }
                if close(sol.objective, opt) {
                    rep.exhaustive_equal += 1;
                }
                if opt > best_bound + 1e-9 * opt.abs().max(1.0) {
                    rep.relaxation_violations += 1;
                }
            }
            (None, None) => rep.exhaustive_equal += 1,
            _ => rep.feasibility_mismatches += 1,
        }
    }
    Ok(rep)
}
