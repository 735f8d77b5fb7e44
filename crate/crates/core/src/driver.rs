//! Robust hull-greedy with θ-enumeration.
//!
//! Every breakpoint θ is an independent work unit: reduce, build hulls, solve
//! the LP, recover a discrete choice, then certify it exactly. The incumbent
//! is the accepted candidate with the largest revenue; ties go to the smaller
//! θ, which is what a sequential ascending scan with a strict comparison
//! produces.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators;
use crate::hull::{item_hull, HullChain};
use crate::instance::{validate, DiscreteSolution, PricingInstance};
use crate::lp::{solve_lp, CAPACITY_TOL};
use crate::par::{self, Execution};
use crate::reduction::{build_mckp, option_coeffs, CoeffTable};
use crate::robust::{self, candidate_thetas, is_robust_feasible};
use crate::rounding::recover;
use crate::stress::{self, Protocol, StressConfig};

/// θ candidates evaluated per parallel batch before folding into the
/// incumbent; bounds the number of live candidate solutions.
const BATCH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub repair: bool,
    pub complete: bool,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            repair: true,
            complete: true,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaStatus {
    /// `C^θ < 0`.
    Skipped,
    LpInfeasible,
    /// Recovered choice failed the exact certificate.
    Rejected,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaTrace {
    pub theta: f64,
    pub capacity: f64,
    pub opt_lp: Option<f64>,
    /// Revenue of the round-down choice.
    pub n_down: Option<f64>,
    pub l_rd: Option<f64>,
    pub dv_max: Option<f64>,
    /// Revenue of the final recovered choice.
    pub objective: Option<f64>,
    pub certificate: Option<f64>,
    /// `Σ c^θ` of the final choice.
    pub knapsack_cost: Option<f64>,
    pub hull_vertices: Option<usize>,
    pub status: ThetaStatus,
    pub improved: bool,
}

impl ThetaTrace {
    fn skipped(theta: f64, capacity: f64) -> Self {
        Self {
            theta,
            capacity,
            opt_lp: None,
            n_down: None,
            l_rd: None,
            dv_max: None,
            objective: None,
            certificate: None,
            knapsack_cost: None,
            hull_vertices: None,
            status: ThetaStatus::Skipped,
            improved: false,
        }
    }

    pub fn gap_lp(&self) -> Option<f64> {
        match (self.l_rd, self.opt_lp) {
            (Some(l), Some(opt)) if opt != 0.0 => Some(l / opt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTiming {
    pub reduce_s: f64,
    pub hull_s: f64,
    pub lp_s: f64,
    pub round_s: f64,
    pub certify_s: f64,
    pub total_s: f64,
}

impl PhaseTiming {
    fn add(&mut self, other: &PhaseTiming) {
        self.reduce_s += other.reduce_s;
        self.hull_s += other.hull_s;
        self.lp_s += other.lp_s;
        self.round_s += other.round_s;
        self.certify_s += other.certify_s;
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub candidates: usize,
    pub skipped: usize,
    pub evaluated: usize,
    pub certificate_rejected: usize,
    pub lp_infeasible: usize,
    pub improvements: usize,
}

#[derive(Debug, Clone)]
pub struct ThetaOutcome {
    pub trace: ThetaTrace,
    pub solution: Option<DiscreteSolution>,
    pub timing: PhaseTiming,
}

/// Hull chains of the fixed-θ subproblem, one per item.
pub fn theta_hulls(coeffs: &CoeffTable, cost: &[Vec<f64>]) -> Vec<HullChain> {
    coeffs
        .items
        .iter()
        .zip(cost)
        .map(|(opts, c)| {
            let values: Vec<f64> = opts.iter().map(|o| o.v).collect();
            item_hull(c, &values)
        })
        .collect()
}

/// Run one θ candidate through reduce → hull → LP → rounding → certificate.
pub fn evaluate_theta(
    inst: &PricingInstance,
    coeffs: &CoeffTable,
    theta: f64,
    gamma: usize,
    options: SolveOptions,
) -> ThetaOutcome {
    let mut timing = PhaseTiming::default();

    let t0 = Instant::now();
    let view = build_mckp(coeffs, theta, gamma);
    timing.reduce_s = secs(t0.elapsed());
    if view.capacity < 0.0 {
        return ThetaOutcome {
            trace: ThetaTrace::skipped(theta, view.capacity),
            solution: None,
            timing,
        };
    }

    let t0 = Instant::now();
    let chains = theta_hulls(coeffs, &view.cost);
    timing.hull_s = secs(t0.elapsed());

    let t0 = Instant::now();
    let lp = solve_lp(&chains, view.capacity);
    timing.lp_s = secs(t0.elapsed());
    let mut trace = ThetaTrace::skipped(theta, view.capacity);
    trace.hull_vertices = Some(chains.iter().map(HullChain::len).sum());
    let lp = match lp {
        Ok(lp) => lp,
        Err(_) => {
            trace.status = ThetaStatus::LpInfeasible;
            return ThetaOutcome {
                trace,
                solution: None,
                timing,
            };
        }
    };

    let t0 = Instant::now();
    let out = recover(
        &lp,
        &chains,
        view.capacity,
        options.repair,
        options.complete,
    );
    let positions: Vec<usize> = chains
        .iter()
        .zip(&out.choice_final)
        .map(|(h, &k)| h.vertices[k].option)
        .collect();
    timing.round_s = secs(t0.elapsed());

    let t0 = Instant::now();
    let choice = coeffs.to_menu_choice(&positions);
    let solution = robust::evaluate(inst, &choice, gamma, Some(theta))
        .expect("choice built from admissible options");
    timing.certify_s = secs(t0.elapsed());

    trace.opt_lp = Some(lp.objective);
    trace.n_down = Some(out.value_down);
    trace.l_rd = Some(out.loss_rd);
    trace.dv_max = Some(out.dv_max);
    trace.objective = Some(solution.objective);
    trace.certificate = Some(solution.certificate);
    trace.knapsack_cost = Some(view.total_cost(&positions));
    let accepted = is_robust_feasible(solution.certificate);
    trace.status = if accepted {
        ThetaStatus::Accepted
    } else {
        ThetaStatus::Rejected
    };
    ThetaOutcome {
        trace,
        solution: accepted.then_some(solution),
        timing,
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub gamma: usize,
    pub best: Option<DiscreteSolution>,
    /// Index into `trace` of the incumbent's θ.
    pub best_index: Option<usize>,
    pub trace: Vec<ThetaTrace>,
    pub counters: Counters,
    pub timing: PhaseTiming,
}

#[derive(Serialize)]
struct SolveMetrics {
    theta: Option<f64>,
    opt_lp: Option<f64>,
    l_rd: Option<f64>,
    dv_max: Option<f64>,
    gap_lp: Option<f64>,
}

#[derive(Serialize)]
struct SolveReportDoc<'a> {
    gamma: usize,
    feasible: bool,
    solution: Option<&'a DiscreteSolution>,
    metrics: SolveMetrics,
    counters: &'a Counters,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<&'a [ThetaTrace]>,
    timing: &'a PhaseTiming,
}

impl SolveReport {
    pub fn is_feasible(&self) -> bool {
        self.best.is_some()
    }

    pub fn best_trace(&self) -> Option<&ThetaTrace> {
        self.best_index.map(|k| &self.trace[k])
    }

    pub fn to_json(&self, include_trace: bool) -> String {
        let bt = self.best_trace();
        let doc = SolveReportDoc {
            gamma: self.gamma,
            feasible: self.is_feasible(),
            solution: self.best.as_ref(),
            metrics: SolveMetrics {
                theta: bt.map(|t| t.theta),
                opt_lp: bt.and_then(|t| t.opt_lp),
                l_rd: bt.and_then(|t| t.l_rd),
                dv_max: bt.and_then(|t| t.dv_max),
                gap_lp: bt.and_then(ThetaTrace::gap_lp),
            },
            counters: &self.counters,
            trace: include_trace.then_some(self.trace.as_slice()),
            timing: &self.timing,
        };
        serde_json::to_string_pretty(&doc).expect("report serialization is infallible")
    }
}

fn ensure_valid(inst: &PricingInstance) -> Result<()> {
    let report = validate(inst);
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::Invalid(report))
    }
}

/// Solve the Γ-robust pricing problem by θ-enumeration.
pub fn solve(inst: &PricingInstance, gamma: usize, options: SolveOptions) -> Result<SolveReport> {
    let start = Instant::now();
    ensure_valid(inst)?;
    if gamma > inst.len() {
        return Err(Error::GammaOutOfRange {
            gamma,
            n: inst.len(),
        });
    }
    let coeffs = option_coeffs(inst)?;
    let thetas = candidate_thetas(&coeffs);

    let mut trace = Vec::with_capacity(thetas.len());
    let mut counters = Counters {
        candidates: thetas.len(),
        ..Counters::default()
    };
    let mut timing = PhaseTiming::default();
    let mut best: Option<DiscreteSolution> = None;
    let mut best_index = None;

    for batch in thetas.chunks(BATCH) {
        let outcomes = par::map_slice(options.execution, batch, |&theta| {
            evaluate_theta(inst, &coeffs, theta, gamma, options)
        });
        for mut oc in outcomes {
            timing.add(&oc.timing);
            match oc.trace.status {
                ThetaStatus::Skipped => counters.skipped += 1,
                ThetaStatus::LpInfeasible => {
                    counters.evaluated += 1;
                    counters.lp_infeasible += 1;
                }
                ThetaStatus::Rejected => {
                    counters.evaluated += 1;
                    counters.certificate_rejected += 1;
                }
                ThetaStatus::Accepted => counters.evaluated += 1,
            }
            if let Some(sol) = oc.solution.take() {
                if best.as_ref().is_none_or(|b| sol.objective > b.objective) {
                    best = Some(sol);
                    best_index = Some(trace.len());
                    oc.trace.improved = true;
                    counters.improvements += 1;
                }
            }
            trace.push(oc.trace);
        }
    }
    timing.total_s = secs(start.elapsed());
    Ok(SolveReport {
        gamma,
        best,
        best_index,
        trace,
        counters,
        timing,
    })
}

/// Checks an accepted θ candidate against both feasibility routes.
pub fn candidate_is_consistent(t: &ThetaTrace) -> bool {
    match (t.status, t.knapsack_cost, t.certificate) {
        (ThetaStatus::Accepted, Some(cost), Some(z)) => {
            let scale = t.capacity.abs().max(1.0);
            cost <= t.capacity + CAPACITY_TOL * scale && is_robust_feasible(z)
        }
        (ThetaStatus::Accepted, _, _) => false,
        _ => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrontierStress {
    pub scenarios: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierRow {
    pub gamma: usize,
    pub feasible: bool,
    pub objective: Option<f64>,
    pub rev_ratio: Option<f64>,
    pub opt_lp: Option<f64>,
    pub l_rd: Option<f64>,
    pub dv_max: Option<f64>,
    pub gap_lp: Option<f64>,
    pub theta: Option<f64>,
    pub cert: Option<f64>,
    pub time_s: f64,
    pub gamma_attack: Option<usize>,
    pub viol_adv: Option<f64>,
    pub viol_iid: Option<f64>,
    pub q05_margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierTable {
    pub nominal_objective: Option<f64>,
    pub rows: Vec<FrontierRow>,
    #[serde(skip)]
    pub solutions: Vec<Option<DiscreteSolution>>,
}

pub const FRONTIER_CSV_HEADER: &str =
    "gamma,objective,rev_ratio,opt_lp,l_rd,dv_max,gap_lp,theta,cert,time_s,viol_adv,viol_iid,q05_margin";

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl FrontierTable {
    /// CSV with [`FRONTIER_CSV_HEADER`]; infeasible rows and missing stress
    /// columns are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(FRONTIER_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.gamma,
                cell(r.objective),
                cell(r.rev_ratio),
                cell(r.opt_lp),
                cell(r.l_rd),
                cell(r.dv_max),
                cell(r.gap_lp),
                cell(r.theta),
                cell(r.cert),
                r.time_s,
                cell(r.viol_adv),
                cell(r.viol_iid),
                cell(r.q05_margin),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("frontier serialization is infallible")
    }
}

/// Standard budget grid `{0, 1, 3, 5, 10, ⌊√n⌋, 20, 30, 50, 100, n}` restricted
/// to `Γ ≤ n`, ascending and deduplicated.
pub fn default_gamma_grid(n: usize) -> Vec<usize> {
    let mut g: Vec<usize> = [0, 1, 3, 5, 10, n.isqrt(), 20, 30, 50, 100, n]
        .into_iter()
        .filter(|&g| g <= n)
        .collect();
    g.sort_unstable();
    g.dedup();
    g
}

/// Attack level used for frontier stress columns: `max(Γ, ⌊1.5Γ⌋)`, capped at `n`.
pub fn frontier_attack(gamma: usize, n: usize) -> usize {
    gamma.max(gamma * 3 / 2).min(n)
}

/// Solve every Γ (ascending, deduplicated) and tabulate revenue, gap and
/// optional stress metrics.
pub fn frontier(
    inst: &PricingInstance,
    gammas: &[usize],
    stress_cfg: Option<FrontierStress>,
    options: SolveOptions,
) -> Result<FrontierTable> {
    let n = inst.len();
    let mut gammas = gammas.to_vec();
    gammas.sort_unstable();
    gammas.dedup();
    if let Some(&g) = gammas.iter().find(|&&g| g > n) {
        return Err(Error::GammaOutOfRange { gamma: g, n });
    }

    let mut reports = Vec::with_capacity(gammas.len());
    for &g in &gammas {
        reports.push(solve(inst, g, options)?);
    }
    let nominal_objective = match gammas.first() {
        Some(0) => reports[0].best.as_ref().map(|b| b.objective),
        _ => solve(inst, 0, options)?.best.map(|b| b.objective),
    };

    let mut rows = Vec::with_capacity(reports.len());
    let mut solutions = Vec::with_capacity(reports.len());
    for report in reports {
        let bt = report.best_trace();
        let objective = report.best.as_ref().map(|b| b.objective);
        let mut row = FrontierRow {
            gamma: report.gamma,
            feasible: report.is_feasible(),
            objective,
            rev_ratio: objective.zip(nominal_objective).map(|(o, nom)| o / nom),
            opt_lp: bt.and_then(|t| t.opt_lp),
            l_rd: bt.and_then(|t| t.l_rd),
            dv_max: bt.and_then(|t| t.dv_max),
            gap_lp: bt.and_then(ThetaTrace::gap_lp),
            theta: bt.map(|t| t.theta),
            cert: report.best.as_ref().map(|b| b.certificate),
            time_s: report.timing.total_s,
            gamma_attack: None,
            viol_adv: None,
            viol_iid: None,
            q05_margin: None,
        };
        if let (Some(cfg), Some(sol)) = (stress_cfg, report.best.as_ref()) {
            let attack = frontier_attack(report.gamma, n);
            let adv = stress::stress(
                inst,
                &sol.choice,
                &StressConfig {
                    scenarios: cfg.scenarios,
                    protocol: Protocol::Adversarial,
                    gamma_attack: attack,
                    seed: cfg.seed,
                },
                options.execution,
            )?;
            let iid = stress::stress(
                inst,
                &sol.choice,
                &StressConfig {
                    scenarios: cfg.scenarios,
                    protocol: Protocol::Iid,
                    gamma_attack: 0,
                    seed: cfg.seed,
                },
                options.execution,
            )?;
            row.gamma_attack = Some(attack);
            row.viol_adv = Some(adv.violation_prob);
            row.viol_iid = Some(iid.violation_prob);
            row.q05_margin = Some(adv.q05_margin);
        }
        rows.push(row);
        solutions.push(report.best);
    }
    Ok(FrontierTable {
        nominal_objective,
        rows,
        solutions,
    })
}

/// Budget as a function of portfolio size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaRule {
    Zero,
    /// `⌊√n⌋`
    Sqrt,
    /// `⌊0.1 n⌋`
    Tenth,
    Full,
    Fixed(usize),
}

impl GammaRule {
    pub fn apply(self, n: usize) -> usize {
        match self {
            GammaRule::Zero => 0,
            GammaRule::Sqrt => n.isqrt(),
            GammaRule::Tenth => n / 10,
            GammaRule::Full => n,
            GammaRule::Fixed(k) => k.min(n),
        }
    }
}

impl FromStr for GammaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(GammaRule::Zero),
            "sqrt" => Ok(GammaRule::Sqrt),
            "tenth" => Ok(GammaRule::Tenth),
            "full" => Ok(GammaRule::Full),
            other => other.parse::<usize>().map(GammaRule::Fixed).map_err(|_| {
                Error::Config(format!(
                    "unknown gamma rule `{other}` (zero|sqrt|tenth|full|<integer>)"
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PrefixRow {
    pub n: usize,
    pub gamma: usize,
    pub margin_target: f64,
    pub feasible: bool,
    pub objective: Option<f64>,
    pub opt_lp: Option<f64>,
    pub l_rd: Option<f64>,
    pub dv_max: Option<f64>,
    /// `L_rd / ΔV_max` (zero when the bound is zero).
    pub ratio: Option<f64>,
    pub gap_lp: Option<f64>,
    /// `n · Gap_LP`
    pub scaled_gap: Option<f64>,
    pub theta: Option<f64>,
    pub time_s: f64,
}

pub const PREFIX_CSV_HEADER: &str =
    "n,gamma,margin_target,objective,opt_lp,l_rd,dv_max,ratio,gap_lp,scaled_gap,theta,time_s";

pub fn prefix_csv(rows: &[PrefixRow]) -> String {
    let mut out = String::from(PREFIX_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.gamma,
            r.margin_target,
            cell(r.objective),
            cell(r.opt_lp),
            cell(r.l_rd),
            cell(r.dv_max),
            cell(r.ratio),
            cell(r.gap_lp),
            cell(r.scaled_gap),
            cell(r.theta),
            r.time_s,
        );
    }
    out
}

/// Solve nested prefixes of one master portfolio, recalibrating the margin
/// target at each size.
pub fn nested_prefix_run(
    master: &PricingInstance,
    sizes: &[usize],
    rule: GammaRule,
    options: SolveOptions,
) -> Result<Vec<PrefixRow>> {
    sizes
        .iter()
        .map(|&n| {
            let inst = generators::prefix(master, n)?;
            let gamma = rule.apply(n);
            let report = solve(&inst, gamma, options)?;
            let bt = report.best_trace();
            let l_rd = bt.and_then(|t| t.l_rd);
            let dv_max = bt.and_then(|t| t.dv_max);
            let gap_lp = bt.and_then(ThetaTrace::gap_lp);
            Ok(PrefixRow {
                n,
                gamma,
                margin_target: inst.margin_target,
                feasible: report.is_feasible(),
                objective: report.best.as_ref().map(|b| b.objective),
                opt_lp: bt.and_then(|t| t.opt_lp),
                l_rd,
                dv_max,
                ratio: l_rd
                    .zip(dv_max)
                    .map(|(l, d)| if d > 0.0 { l / d } else { 0.0 }),
                gap_lp,
                scaled_gap: gap_lp.map(|g| g * n as f64),
                theta: bt.map(|t| t.theta),
                time_s: report.timing.total_s,
            })
        })
        .collect()
}
