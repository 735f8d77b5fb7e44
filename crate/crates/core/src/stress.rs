//! Monte Carlo stress testing of a fixed price choice.
//!
//! Scenario `k` draws from the substream `(seed, k)`. Adversarial attack sets
//! come from a partial Fisher–Yates shuffle whose `ξ` draws are interleaved
//! with the swaps, so the first `K` attacked items and their magnitudes are
//! the same for every attack level `≥ K`. Violation rates are therefore
//! monotone in the attack level under a fixed seed.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PricingInstance;
use crate::par::{self, Execution};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// `|K| = Γ_attack` items deviate against their margin contribution.
    Adversarial,
    /// Every item deviates by `ξ ∼ U(−1, 1)`.
    Iid,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adversarial" => Ok(Protocol::Adversarial),
            "iid" => Ok(Protocol::Iid),
            other => Err(Error::Config(format!(
                "unknown protocol `{other}` (adversarial|iid)"
            ))),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Adversarial => "adversarial",
            Protocol::Iid => "iid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StressConfig {
    pub scenarios: usize,
    pub protocol: Protocol,
    pub gamma_attack: usize,
    pub seed: u64,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self {
            scenarios: 10_000,
            protocol: Protocol::Adversarial,
            gamma_attack: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressReport {
    pub protocol: Protocol,
    pub gamma_attack: usize,
    pub scenarios: usize,
    pub violations: usize,
    pub violation_prob: f64,
    /// Nearest-rank 5% quantile of the realized margin.
    pub q05_margin: f64,
    pub mean_margin: f64,
    /// Margin at nominal demand.
    pub nominal_margin: f64,
}

pub const STRESS_CSV_HEADER: &str =
    "protocol,gamma_attack,scenarios,violations,violation_prob,q05_margin,mean_margin,nominal_margin";

impl StressReport {
    pub fn to_csv(&self) -> String {
        format!(
            "{STRESS_CSV_HEADER}\n{},{},{},{},{},{},{},{}\n",
            self.protocol,
            self.gamma_attack,
            self.scenarios,
            self.violations,
            self.violation_prob,
            self.q05_margin,
            self.mean_margin,
            self.nominal_margin
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Per-item margin factor `ω(x − Δa)`, nominal demand and deviation bound at a choice.
struct Terms {
    factor: Vec<f64>,
    demand: Vec<f64>,
    deviation: Vec<f64>,
}

impl Terms {
    fn new(inst: &PricingInstance, choice: &[usize]) -> Result<Self> {
        if choice.len() != inst.len() {
            return Err(Error::ChoiceLength {
                found: choice.len(),
                expected: inst.len(),
            });
        }
        let mut t = Terms {
            factor: Vec::with_capacity(choice.len()),
            demand: Vec::with_capacity(choice.len()),
            deviation: Vec::with_capacity(choice.len()),
        };
        for (i, &j) in choice.iter().enumerate() {
            let p = inst.items[i]
                .menu
                .get(j)
                .ok_or(Error::ChoiceIndex { item: i, index: j })?;
            t.factor.push(inst.margin_factor(i, j));
            t.demand.push(p.demand);
            t.deviation.push(p.deviation);
        }
        Ok(t)
    }

    fn len(&self) -> usize {
        self.factor.len()
    }

    fn nominal(&self) -> f64 {
        self.factor
            .iter()
            .zip(&self.demand)
            .map(|(f, g)| f * g)
            .sum()
    }

    /// Margin change when item `i` moves by `xi` deviation units, with the
    /// realized demand clamped at zero.
    fn shift(&self, i: usize, xi: f64) -> f64 {
        let g = self.demand[i];
        let realized = (g + xi * self.deviation[i]).max(0.0);
        self.factor[i] * (realized - g)
    }

    /// Sign of `t_i = ω(x − Δa)δ`, zero when either factor vanishes.
    fn t_sign(&self, i: usize) -> f64 {
        let t = self.factor[i] * self.deviation[i];
        if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

fn adversarial_margin(
    terms: &Terms,
    nominal: f64,
    gamma_attack: usize,
    rng: &mut SplitMix64,
) -> f64 {
    let n = terms.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut margin = nominal;
    for k in 0..gamma_attack {
        let j = k + rng.below(n - k);
        idx.swap(k, j);
        let xi = rng.uniform(-1.0, 0.0);
        let i = idx[k];
        margin += terms.shift(i, xi * terms.t_sign(i));
    }
    margin
}

fn iid_margin(terms: &Terms, nominal: f64, rng: &mut SplitMix64) -> f64 {
    let mut margin = nominal;
    for i in 0..terms.len() {
        margin += terms.shift(i, rng.uniform(-1.0, 1.0));
    }
    margin
}

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).max(1);
    sorted[rank - 1]
}

/// Realized margins of every scenario in scenario order.
pub fn scenario_margins(
    inst: &PricingInstance,
    choice: &[usize],
    cfg: &StressConfig,
    exec: Execution,
) -> Result<Vec<f64>> {
    let terms = Terms::new(inst, choice)?;
    if cfg.scenarios == 0 {
        return Err(Error::Config("at least one scenario is required".into()));
    }
    if cfg.gamma_attack > terms.len() {
        return Err(Error::GammaOutOfRange {
            gamma: cfg.gamma_attack,
            n: terms.len(),
        });
    }
    let nominal = terms.nominal();
    Ok(par::map_range(exec, cfg.scenarios, |k| {
        let mut rng = SplitMix64::substream(cfg.seed, k as u64);
        match cfg.protocol {
            Protocol::Adversarial => {
                adversarial_margin(&terms, nominal, cfg.gamma_attack, &mut rng)
            }
            Protocol::Iid => iid_margin(&terms, nominal, &mut rng),
        }
    }))
}

pub fn stress(
    inst: &PricingInstance,
    choice: &[usize],
    cfg: &StressConfig,
    exec: Execution,
) -> Result<StressReport> {
    let mut margins = scenario_margins(inst, choice, cfg, exec)?;
    let violations = margins.iter().filter(|&&s| s < 0.0).count();
    let mean_margin = margins.iter().sum::<f64>() / margins.len() as f64;
    margins.sort_by(f64::total_cmp);
    Ok(StressReport {
        protocol: cfg.protocol,
        gamma_attack: match cfg.protocol {
            Protocol::Adversarial => cfg.gamma_attack,
            Protocol::Iid => 0,
        },
        scenarios: cfg.scenarios,
        violations,
        violation_prob: violations as f64 / cfg.scenarios as f64,
        q05_margin: nearest_rank(&margins, 0.05),
        mean_margin,
        nominal_margin: Terms::new(inst, choice)?.nominal(),
    })
}

/// Realized margin when the `gamma` items with the largest `|t_i|` take
/// their full adverse deviation.
pub fn worst_case_margin(inst: &PricingInstance, choice: &[usize], gamma: usize) -> Result<f64> {
    let terms = Terms::new(inst, choice)?;
    if gamma > terms.len() {
        return Err(Error::GammaOutOfRange {
            gamma,
            n: terms.len(),
        });
    }
    let mut order: Vec<usize> = (0..terms.len()).collect();
    let abs_t = |i: usize| (terms.factor[i] * terms.deviation[i]).abs();
    order.sort_by(|&a, &b| abs_t(b).total_cmp(&abs_t(a)).then(a.cmp(&b)));
    let mut margin = terms.nominal();
    for &i in &order[..gamma] {
        margin += terms.shift(i, -terms.t_sign(i));
    }
    Ok(margin)
}

/// `{Γ, Γ + ⌊0.1n⌋, 2Γ, n}`, capped at `n`, ascending and deduplicated.
pub fn tightness_attack_levels(gamma: usize, n: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = [gamma, gamma + n / 10, 2 * gamma, n]
        .iter()
        .map(|&g| g.min(n))
        .collect();
    levels.sort_unstable();
    levels.dedup();
    levels
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessMatrix {
    /// Protection level of each row.
    pub gammas: Vec<usize>,
    pub attack_levels: Vec<usize>,
    /// `violation_prob[row][col]`.
    pub violation_prob: Vec<Vec<f64>>,
}

impl TightnessMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma");
        for a in &self.attack_levels {
            let _ = write!(out, ",attack_{a}");
        }
        out.push('\n');
        for (g, row) in self.gammas.iter().zip(&self.violation_prob) {
            let _ = write!(out, "{g}");
            for p in row {
                let _ = write!(out, ",{p}");
            }
            out.push('\n');
        }
        out
    }
}

/// Adversarial `P̂` for every (protected solution, attack level) pair, with
/// the same scenario seeds in every cell.
pub fn tightness_matrix(
    inst: &PricingInstance,
    solutions: &[(usize, Vec<usize>)],
    attack_levels: &[usize],
    scenarios: usize,
    seed: u64,
    exec: Execution,
) -> Result<TightnessMatrix> {
    let mut violation_prob = Vec::with_capacity(solutions.len());
    for (_, choice) in solutions {
        let row = attack_levels
            .iter()
            .map(|&ga| {
                let cfg = StressConfig {
                    scenarios,
                    protocol: Protocol::Adversarial,
                    gamma_attack: ga,
                    seed,
                };
                stress(inst, choice, &cfg, exec).map(|r| r.violation_prob)
            })
            .collect::<Result<Vec<_>>>()?;
        violation_prob.push(row);
    }
    Ok(TightnessMatrix {
        gammas: solutions.iter().map(|(g, _)| *g).collect(),
        attack_levels: attack_levels.to_vec(),
        violation_prob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ItemSpec, MenuPoint};
    use crate::robust::certificate;

    fn item(a: f64, x: f64, g: f64, d: f64) -> ItemSpec {
        ItemSpec {
            ref_price: a,
            exposure: 1.0,
            tolerance: 0.5,
            menu: vec![MenuPoint {
                price: x,
                demand: g,
                deviation: d,
            }],
        }
    }

    /// Margin factors 0.5, 0.2, −0.1 at Δ = 1 with deviations 2, 3, 1.
    fn toy() -> PricingInstance {
        PricingInstance::new(
            vec![
                item(1.0, 1.5, 4.0, 2.0),
                item(1.0, 1.2, 10.0, 3.0),
                item(1.0, 0.9, 5.0, 1.0),
            ],
            1.0,
        )
    }

    #[test]
    fn nearest_rank_quantile() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&xs, 0.05), 5.0);
        assert_eq!(nearest_rank(&[7.0], 0.05), 7.0);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0], 0.05), 1.0);
    }

    #[test]
    fn zero_attack_is_nominal() {
        let inst = toy();
        let cfg = StressConfig {
            scenarios: 50,
            gamma_attack: 0,
            ..StressConfig::default()
        };
        let r = stress(&inst, &[0, 0, 0], &cfg, Execution::Sequential).unwrap();
        // 0.5·4 + 0.2·10 − 0.1·5
        assert!((r.nominal_margin - 3.5).abs() < 1e-12);
        assert_eq!(r.violations, 0);
        assert_eq!(r.q05_margin, r.nominal_margin);
        assert_eq!(r.mean_margin, r.nominal_margin);
    }

    #[test]
    fn zero_deviation_gives_constant_margin() {
        let mut inst = toy();
        inst.items
            .iter_mut()
            .for_each(|it| it.menu[0].deviation = 0.0);
        for protocol in [Protocol::Adversarial, Protocol::Iid] {
            let cfg = StressConfig {
                scenarios: 100,
                protocol,
                gamma_attack: 3,
                seed: 5,
            };
            let m = scenario_margins(&inst, &[0, 0, 0], &cfg, Execution::Sequential).unwrap();
            assert!(m.iter().all(|&s| s == m[0]));
        }
    }

    #[test]
    fn worst_case_equals_certificate() {
        let inst = toy();
        for g in 0..=3 {
            let wc = worst_case_margin(&inst, &[0, 0, 0], g).unwrap();
            let z = certificate(&inst, &[0, 0, 0], g).unwrap();
            assert!((wc - z).abs() < 1e-12, "Γ={g}: {wc} vs {z}");
        }
    }

    #[test]
    fn adversarial_never_beats_worst_case() {
        let inst = toy();
        for g in 0..=3 {
            let wc = worst_case_margin(&inst, &[0, 0, 0], g).unwrap();
            let cfg = StressConfig {
                scenarios: 2000,
                gamma_attack: g,
                seed: 11,
                ..StressConfig::default()
            };
            let m = scenario_margins(&inst, &[0, 0, 0], &cfg, Execution::Sequential).unwrap();
            assert!(m.iter().all(|&s| s >= wc - 1e-12));
        }
    }

    #[test]
    fn margins_nest_across_attack_levels() {
        let inst = toy();
        let at = |g| {
            let cfg = StressConfig {
                scenarios: 500,
                gamma_attack: g,
                seed: 3,
                ..StressConfig::default()
            };
            scenario_margins(&inst, &[0, 0, 0], &cfg, Execution::Sequential).unwrap()
        };
        let (m1, m2, m3) = (at(1), at(2), at(3));
        for k in 0..500 {
            assert!(m2[k] <= m1[k] && m3[k] <= m2[k]);
        }
    }

    #[test]
    fn demand_clamps_at_zero() {
        // Deviation larger than demand under i.i.d. noise.
        let inst = PricingInstance::new(vec![item(1.0, 1.5, 1.0, 5.0)], 1.0);
        let cfg = StressConfig {
            scenarios: 1000,
            protocol: Protocol::Iid,
            gamma_attack: 0,
            seed: 2,
        };
        let m = scenario_margins(&inst, &[0], &cfg, Execution::Sequential).unwrap();
        assert!(m.iter().all(|&s| s >= 0.0));
        assert!(m.contains(&0.0));
    }

    #[test]
    fn deterministic_under_seed() {
        let inst = toy();
        let cfg = StressConfig {
            scenarios: 300,
            protocol: Protocol::Iid,
            gamma_attack: 0,
            seed: 9,
        };
        let a = stress(&inst, &[0, 0, 0], &cfg, Execution::Parallel).unwrap();
        let b = stress(&inst, &[0, 0, 0], &cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn attack_levels() {
        assert_eq!(tightness_attack_levels(5, 100), vec![5, 10, 15, 100]);
        assert_eq!(tightness_attack_levels(0, 30), vec![0, 3, 30]);
        assert_eq!(tightness_attack_levels(30, 40), vec![30, 34, 40]);
    }

    #[test]
    fn bad_inputs() {
        let inst = toy();
        let cfg = StressConfig {
            gamma_attack: 4,
            ..StressConfig::default()
        };
        assert!(matches!(
            stress(&inst, &[0, 0, 0], &cfg, Execution::Sequential),
            Err(Error::GammaOutOfRange { .. })
        ));
        let cfg = StressConfig {
            scenarios: 0,
            ..StressConfig::default()
        };
        assert!(stress(&inst, &[0, 0, 0], &cfg, Execution::Sequential).is_err());
        assert!(matches!(
            stress(
                &inst,
                &[0, 0],
                &StressConfig::default(),
                Execution::Sequential
            ),
            Err(Error::ChoiceLength { .. })
        ));
    }
}
