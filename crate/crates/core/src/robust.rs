//! Budgeted-uncertainty penalty, its parametric dual, the θ breakpoint set,
//! and the exact robust-feasibility certificate.

use crate::error::{Error, Result};
use crate::instance::{DiscreteSolution, PricingInstance};
use crate::reduction::CoeffTable;

/// A choice is robust-feasible iff its certificate is at least `-CERT_TOL`.
pub const CERT_TOL: f64 = 1e-9;
/// Breakpoints closer than this collapse.
pub const THETA_DEDUP_TOL: f64 = 1e-12;

fn check_gamma(gamma: usize, n: usize) -> Result<()> {
    if gamma > n {
        return Err(Error::GammaOutOfRange { gamma, n });
    }
    Ok(())
}

/// Sum of the `gamma` largest `|t_i|`.
pub fn beta(t: &[f64], gamma: usize) -> Result<f64> {
    check_gamma(gamma, t.len())?;
    if gamma == 0 {
        return Ok(0.0);
    }
    let mut mags: Vec<f64> = t.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags[..gamma].iter().sum())
}

/// `Γθ + Σ max(0, |t_i| − θ)`; minimized over θ ≥ 0 it equals [`beta`].
pub fn beta_dual(t: &[f64], gamma: usize, theta: f64) -> f64 {
    gamma as f64 * theta + t.iter().map(|x| (x.abs() - theta).max(0.0)).sum::<f64>()
}

/// `{0} ∪ {|t_ij|}` over all admissible options, ascending and deduplicated.
pub fn candidate_thetas(coeffs: &CoeffTable) -> Vec<f64> {
    thetas_from(coeffs.items.iter().flatten().map(|o| o.t))
}

pub fn thetas_from(ts: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut all: Vec<f64> = std::iter::once(0.0)
        .chain(ts.into_iter().map(f64::abs))
        .collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&last) if x - last <= THETA_DEDUP_TOL => {}
            _ => out.push(x),
        }
    }
    out
}

/// Per-item `(s_i, t_i)` at a menu choice, computed from the raw instance.
pub fn choice_terms(inst: &PricingInstance, choice: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    if choice.len() != inst.len() {
        return Err(Error::ChoiceLength {
            found: choice.len(),
            expected: inst.len(),
        });
    }
    let mut s = Vec::with_capacity(choice.len());
    let mut t = Vec::with_capacity(choice.len());
    for (i, &j) in choice.iter().enumerate() {
        let item = &inst.items[i];
        let p = item
            .menu
            .get(j)
            .ok_or(Error::ChoiceIndex { item: i, index: j })?;
        let factor = inst.margin_factor(i, j);
        s.push(factor * p.demand);
        t.push(factor * p.deviation);
    }
    Ok((s, t))
}

/// `Z = Σ s_i − β(x, Γ)` for a menu choice.
pub fn certificate(inst: &PricingInstance, choice: &[usize], gamma: usize) -> Result<f64> {
    let (s, t) = choice_terms(inst, choice)?;
    Ok(s.iter().sum::<f64>() - beta(&t, gamma)?)
}

pub fn is_robust_feasible(z: f64) -> bool {
    z >= -CERT_TOL
}

/// Evaluate a menu choice into a [`DiscreteSolution`].
pub fn evaluate(
    inst: &PricingInstance,
    choice: &[usize],
    gamma: usize,
    theta_used: Option<f64>,
) -> Result<DiscreteSolution> {
    let (s, t) = choice_terms(inst, choice)?;
    let objective = choice
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let item = &inst.items[i];
            item.exposure * item.menu[j].price * item.menu[j].demand
        })
        .sum();
    let margin_slack: f64 = s.iter().sum();
    Ok(DiscreteSolution {
        choice: choice.to_vec(),
        objective,
        margin_slack,
        certificate: margin_slack - beta(&t, gamma)?,
        theta_used,
        gamma,
    })
}

/// Box uncertainty (`Γ = n`): every item pays its full `|t|`, which makes the
/// penalty separable. Solved as the single `θ = 0` subproblem, where
/// `s^0 = s − |t|` and `Γθ = 0`.
pub fn solve_box(
    inst: &PricingInstance,
    options: crate::driver::SolveOptions,
) -> Result<DiscreteSolution> {
    let report_invalid = crate::instance::validate(inst);
    if !report_invalid.is_valid() {
        return Err(Error::Invalid(report_invalid));
    }
    let coeffs = crate::reduction::option_coeffs(inst)?;
    let gamma = inst.len();
    let outcome = crate::driver::evaluate_theta(inst, &coeffs, 0.0, gamma, options);
    match outcome.solution {
        Some(sol) if outcome.trace.status == crate::driver::ThetaStatus::Accepted => Ok(sol),
        _ => Err(Error::Infeasible),
    }
}
