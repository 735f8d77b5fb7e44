//! Pricing → multiple-choice knapsack reduction.
//!
//! For every admissible option we compute revenue `v = ωxĝ`, margin
//! contribution `s = ω(x − Δa)ĝ` and deviation contribution
//! `t = ω(x − Δa)δ`. For a fixed dual parameter `θ` the robust margin
//! constraint becomes a single knapsack row with costs measured against a
//! per-item zero-cost baseline.

use crate::error::{Error, Result};
use crate::instance::{ItemSpec, PricingInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionCoeffs {
    pub v: f64,
    pub s: f64,
    pub t: f64,
    /// Index into the item's full menu.
    pub price_index: usize,
}

/// Admissible options of every item, in menu order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    pub items: Vec<Vec<OptionCoeffs>>,
}

impl CoeffTable {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn option_count(&self) -> usize {
        self.items.iter().map(Vec::len).sum()
    }

    /// Translate per-item positions in the admissible arrays to menu indices.
    pub fn to_menu_choice(&self, positions: &[usize]) -> Vec<usize> {
        positions
            .iter()
            .zip(&self.items)
            .map(|(&p, opts)| opts[p].price_index)
            .collect()
    }

    pub fn value_of(&self, positions: &[usize]) -> f64 {
        positions
            .iter()
            .zip(&self.items)
            .map(|(&p, opts)| opts[p].v)
            .sum()
    }
}

/// Menu indices inside the closed fairness band of `item`.
pub fn admissible_indices(item: &ItemSpec, item_index: usize) -> Result<Vec<usize>> {
    let idx = item.admissible();
    if idx.is_empty() {
        return Err(Error::EmptyAdmissibleMenu { item: item_index });
    }
    Ok(idx)
}

/// `(v, s, t)` for every admissible option of every item.
pub fn option_coeffs(inst: &PricingInstance) -> Result<CoeffTable> {
    let delta = inst.margin_target;
    let items = inst
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let idx = admissible_indices(item, i)?;
            Ok(idx
                .into_iter()
                .map(|j| {
                    let p = &item.menu[j];
                    let factor = item.exposure * (p.price - delta * item.ref_price);
                    OptionCoeffs {
                        v: item.exposure * p.price * p.demand,
                        s: factor * p.demand,
                        t: factor * p.deviation,
                        price_index: j,
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoeffTable { items })
}

/// `s − max(0, |t| − θ)`.
#[inline]
pub fn s_theta(s: f64, t: f64, theta: f64) -> f64 {
    s - (t.abs() - theta).max(0.0)
}

/// θ-modified margin contributions for every option.
pub fn theta_modify(coeffs: &CoeffTable, theta: f64) -> Vec<Vec<f64>> {
    coeffs
        .items
        .iter()
        .map(|opts| opts.iter().map(|o| s_theta(o.s, o.t, theta)).collect())
        .collect()
}

/// Fixed-θ MCKP: maximize `Σ v` subject to `Σ cost ≤ capacity`, one option
/// per item. Positions index the admissible arrays of the [`CoeffTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct MckpView {
    pub theta: f64,
    pub gamma: usize,
    pub baseline: Vec<usize>,
    pub s_theta: Vec<Vec<f64>>,
    pub cost: Vec<Vec<f64>>,
    /// `Σ_i s^θ_{i,baseline} − Γθ`; may be negative.
    pub capacity: f64,
}

impl MckpView {
    pub fn total_cost(&self, positions: &[usize]) -> f64 {
        positions.iter().zip(&self.cost).map(|(&p, c)| c[p]).sum()
    }
}

/// Index of the first maximum.
fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = j;
        }
    }
    best
}

pub fn build_mckp(coeffs: &CoeffTable, theta: f64, gamma: usize) -> MckpView {
    let s_theta = theta_modify(coeffs, theta);
    let baseline: Vec<usize> = s_theta.iter().map(|row| argmax_first(row)).collect();
    let cost = s_theta
        .iter()
        .zip(&baseline)
        .map(|(row, &b)| row.iter().map(|&s| row[b] - s).collect())
        .collect();
    let s_max: f64 = s_theta.iter().zip(&baseline).map(|(row, &b)| row[b]).sum();
    MckpView {
        theta,
        gamma,
        baseline,
        s_theta,
        cost,
        capacity: s_max - gamma as f64 * theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::MenuPoint;

    fn item(a: f64, sigma: f64, prices: &[f64]) -> ItemSpec {
        ItemSpec {
            ref_price: a,
            exposure: 1.0,
            tolerance: sigma,
            menu: prices
                .iter()
                .map(|&price| MenuPoint {
                    price,
                    demand: 1.0,
                    deviation: 0.0,
                })
                .collect(),
        }
    }

    fn table(rows: &[&[(f64, f64, f64)]]) -> CoeffTable {
        CoeffTable {
            items: rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .map(|(j, &(v, s, t))| OptionCoeffs {
                            v,
                            s,
                            t,
                            price_index: j,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn fairness_band_filters_menu() {
        let it = item(100.0, 0.10, &[85.0, 95.0, 105.0, 115.0]);
        assert_eq!(admissible_indices(&it, 0).unwrap(), vec![1, 2]);
    }

    #[test]
    fn full_tolerance_admits_up_to_twice_reference() {
        let it = item(10.0, 1.0, &[0.5, 5.0, 19.0, 20.0, 21.0]);
        assert_eq!(admissible_indices(&it, 0).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn empty_band_names_the_item() {
        let it = item(10.0, 0.05, &[1.0, 20.0]);
        assert!(matches!(
            admissible_indices(&it, 4),
            Err(Error::EmptyAdmissibleMenu { item: 4 })
        ));
    }

    #[test]
    fn coefficient_arithmetic() {
        let inst = PricingInstance::new(
            vec![ItemSpec {
                ref_price: 8.0,
                exposure: 1.0,
                tolerance: 1.0,
                menu: vec![
                    MenuPoint {
                        price: 8.0,
                        demand: 5.0,
                        deviation: 3.0,
                    },
                    MenuPoint {
                        price: 10.0,
                        demand: 2.0,
                        deviation: 1.0,
                    },
                ],
            }],
            1.0,
        );
        let c = option_coeffs(&inst).unwrap();
        assert_eq!(
            c.items[0][0],
            OptionCoeffs {
                v: 40.0,
                s: 0.0,
                t: 0.0,
                price_index: 0
            }
        );
        assert_eq!(
            c.items[0][1],
            OptionCoeffs {
                v: 20.0,
                s: 4.0,
                t: 2.0,
                price_index: 1
            }
        );
    }

    #[test]
    fn theta_modification_cases() {
        assert_eq!(s_theta(4.0, 2.0, 0.0), 2.0);
        assert_eq!(s_theta(4.0, 2.0, 5.0), 4.0);
        assert_eq!(s_theta(4.0, 2.0, 1.0), 3.0);
        assert_eq!(s_theta(4.0, -2.0, 1.0), 3.0);
    }

    #[test]
    fn baseline_is_argmax_and_costs_are_gaps() {
        let c = table(&[&[(1.0, 3.0, 0.0), (2.0, 5.0, 0.0), (3.0, 4.0, 0.0)]]);
        let view = build_mckp(&c, 0.0, 0);
        assert_eq!(view.baseline, vec![1]);
        assert_eq!(view.cost[0], vec![2.0, 0.0, 1.0]);
        assert_eq!(view.capacity, 5.0);
    }

    #[test]
    fn tie_picks_first_index() {
        let c = table(&[&[(1.0, 5.0, 0.0), (2.0, 5.0, 0.0)]]);
        assert_eq!(build_mckp(&c, 0.0, 0).baseline, vec![0]);
    }

    #[test]
    fn nominal_capacity_is_sum_of_max_margins() {
        // With t = 0 the θ = 0 view is the nominal reduction.
        let c = table(&[
            &[(1.0, 3.0, 0.0), (2.0, -1.0, 0.0)],
            &[(1.0, 0.5, 0.0), (2.0, 2.5, 0.0)],
        ]);
        assert_eq!(build_mckp(&c, 0.0, 0).capacity, 3.0 + 2.5);
        // Otherwise the nominal view is reached once θ covers every |t|.
        let c = table(&[
            &[(1.0, 3.0, 2.0), (2.0, -1.0, 1.0)],
            &[(1.0, 0.5, 0.1), (2.0, 2.5, 7.0)],
        ]);
        assert_eq!(build_mckp(&c, 0.0, 0).capacity, 1.0 + 0.4);
        assert_eq!(build_mckp(&c, 7.0, 0).capacity, 3.0 + 2.5);
    }

    #[test]
    fn gamma_theta_reduces_capacity() {
        let c = table(&[&[(1.0, 3.0, 1.0)], &[(1.0, 2.0, 4.0)]]);
        let view = build_mckp(&c, 2.0, 2);
        assert_eq!(view.capacity, 3.0 + (2.0 - 2.0) - 4.0);
    }
}
