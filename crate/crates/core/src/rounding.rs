//! Discrete recovery from the hull-greedy LP solution.
//!
//! Choices here are hull levels: `levels[i] = k` selects vertex `k` of item
//! `i`'s hull chain. Every move goes along a chain, so dominated menu points
//! never come back.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::hull::HullChain;
use crate::lp::LpSolution;

pub fn chain_value(chains: &[HullChain], levels: &[usize]) -> f64 {
    chains
        .iter()
        .zip(levels)
        .map(|(h, &k)| h.vertices[k].value)
        .sum()
}

pub fn chain_cost(chains: &[HullChain], levels: &[usize]) -> f64 {
    chains
        .iter()
        .zip(levels)
        .map(|(h, &k)| h.vertices[k].cost)
        .sum()
}

/// Largest adjacent hull value jump over all items; zero if no item has a
/// segment.
pub fn max_hull_jump(chains: &[HullChain]) -> f64 {
    chains.iter().map(HullChain::max_jump).fold(0.0, f64::max)
}

/// Snap the fractional item (if any) to its cheaper vertex.
pub fn round_down(lp: &LpSolution) -> Vec<usize> {
    lp.states.iter().map(|s| s.floor()).collect()
}

/// Heap entry ordered by `key`, ties toward the smaller item index.
#[derive(Debug, Clone, Copy)]
struct Move {
    key: f64,
    item: usize,
}

impl PartialEq for Move {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Move {}
impl PartialOrd for Move {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Move {
    // Max-heap: larger key first, then smaller item.
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(other.item.cmp(&self.item))
    }
}

/// Snap the fractional item up, then repeatedly downgrade other items one
/// hull vertex at a time, cheapest value-per-cost first, until the knapsack
/// row holds. `None` when there is no fractional item or feasibility cannot
/// be restored.
pub fn round_up_repair(lp: &LpSolution, chains: &[HullChain], capacity: f64) -> Option<Vec<usize>> {
    let frac = lp.fractional_item?;
    let mut levels = round_down(lp);
    levels[frac] += 1;
    let mut cost = chain_cost(chains, &levels);
    if cost <= capacity {
        return Some(levels);
    }

    // Min-heap on the downgrade ratio via negated keys.
    let mut heap: BinaryHeap<Move> = levels
        .iter()
        .enumerate()
        .filter(|&(i, &k)| i != frac && k > 0)
        .map(|(i, &k)| Move {
            key: -chains[i].seg_slope[k - 1],
            item: i,
        })
        .collect();
    while cost > capacity {
        let Move { item, .. } = heap.pop()?;
        let k = levels[item];
        cost -= chains[item].seg_len[k - 1];
        levels[item] = k - 1;
        if k - 1 > 0 {
            heap.push(Move {
                key: -chains[item].seg_slope[k - 2],
                item,
            });
        }
    }
    Some(levels)
}

/// Apply adjacent-vertex upgrades that fit the residual capacity, steepest
/// slope first.
pub fn complete(levels: &[usize], chains: &[HullChain], capacity: f64) -> Vec<usize> {
    let mut levels = levels.to_vec();
    let mut residual = capacity - chain_cost(chains, &levels);
    let mut heap: BinaryHeap<Move> = levels
        .iter()
        .enumerate()
        .filter(|&(i, &k)| k < chains[i].segments())
        .map(|(i, &k)| Move {
            key: chains[i].seg_slope[k],
            item: i,
        })
        .collect();
    while let Some(Move { item, .. }) = heap.pop() {
        let k = levels[item];
        let len = chains[item].seg_len[k];
        // Residual only shrinks, so an upgrade that does not fit now never will.
        if len <= residual {
            residual -= len;
            levels[item] = k + 1;
            if k + 1 < chains[item].segments() {
                heap.push(Move {
                    key: chains[item].seg_slope[k + 1],
                    item,
                });
            }
        }
    }
    levels
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingOutcome {
    /// Round-down levels before repair or completion.
    pub choice_down: Vec<usize>,
    pub choice_final: Vec<usize>,
    pub value_down: f64,
    pub value_final: f64,
    /// `OPT_LP − N(round-down)`.
    pub loss_rd: f64,
    /// Maximal adjacent hull jump at this θ.
    pub dv_max: f64,
}

/// Round-down, optionally round-up with repair, optionally completion; keep
/// the better candidate (round-down on ties).
pub fn recover(
    lp: &LpSolution,
    chains: &[HullChain],
    capacity: f64,
    repair: bool,
    complete_fill: bool,
) -> RoundingOutcome {
    let down = round_down(lp);
    let value_down = chain_value(chains, &down);
    let finish = |levels: Vec<usize>| {
        if complete_fill {
            complete(&levels, chains, capacity)
        } else {
            levels
        }
    };

    let mut best = finish(down.clone());
    let mut best_value = chain_value(chains, &best);
    if repair {
        if let Some(up) = round_up_repair(lp, chains, capacity) {
            let up = finish(up);
            let v = chain_value(chains, &up);
            if v > best_value {
                best = up;
                best_value = v;
            }
        }
    }
    RoundingOutcome {
        choice_down: down,
        choice_final: best,
        value_down,
        value_final: best_value,
        loss_rd: lp.objective - value_down,
        dv_max: max_hull_jump(chains),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::{upper_hull, HullPoint};
    use crate::lp::solve_lp;
    use proptest::prelude::*;

    fn chain(raw: &[(f64, f64)]) -> HullChain {
        let pts: Vec<HullPoint> = raw
            .iter()
            .enumerate()
            .map(|(j, &(c, v))| HullPoint::new(c, v, j))
            .collect();
        upper_hull(&pts)
    }

    fn two_item_example() -> Vec<HullChain> {
        vec![
            chain(&[(0.0, 0.0), (1.0, 3.0)]),
            chain(&[(0.0, 0.0), (2.0, 2.0)]),
        ]
    }

    #[test]
    fn integral_lp_is_unchanged() {
        let chains = two_item_example();
        let lp = solve_lp(&chains, 3.0).unwrap();
        assert_eq!(round_down(&lp), vec![1, 1]);
        assert_eq!(round_up_repair(&lp, &chains, 3.0), None);
    }

    #[test]
    fn round_down_of_two_item_example() {
        let chains = two_item_example();
        let lp = solve_lp(&chains, 2.0).unwrap();
        let down = round_down(&lp);
        assert_eq!(down, vec![1, 0]);
        assert_eq!(chain_value(&chains, &down), 3.0);
        assert_eq!(chain_cost(&chains, &down), 1.0);
        let loss = lp.objective - 3.0;
        assert!((0.0..=2.0).contains(&loss));
    }

    #[test]
    fn repair_of_two_item_example() {
        // All four discrete choices: (0,0)=0 c0, (1,0)=3 c1, (0,1)=2 c2,
        // (1,1)=5 c3. With C = 2 the best is (1,0).
        let chains = two_item_example();
        let lp = solve_lp(&chains, 2.0).unwrap();
        let up = round_up_repair(&lp, &chains, 2.0).unwrap();
        assert_eq!(up, vec![0, 1]);
        assert_eq!(chain_value(&chains, &up), 2.0);
        let out = recover(&lp, &chains, 2.0, true, false);
        assert_eq!(out.choice_final, vec![1, 0]);
        assert_eq!(out.value_final, 3.0);
        assert_eq!(out.loss_rd, 1.0);
        assert_eq!(out.dv_max, 3.0);
    }

    #[test]
    fn repair_without_downgrades_fails() {
        // Item 0 stays at its first vertex; item 1 is fractional and its up
        // vertex alone overflows.
        let chains = vec![chain(&[(0.0, 1.0)]), chain(&[(0.0, 0.0), (2.0, 2.0)])];
        let lp = solve_lp(&chains, 1.0).unwrap();
        assert_eq!(lp.fractional_item, Some(1));
        assert_eq!(round_up_repair(&lp, &chains, 1.0), None);
    }

    #[test]
    fn completion_uses_leftover_capacity() {
        let chains = vec![
            chain(&[(0.0, 0.0), (1.0, 3.0), (3.0, 4.0)]),
            chain(&[(0.0, 0.0), (2.0, 2.0)]),
        ];
        assert_eq!(complete(&[0, 0], &chains, 0.0), vec![0, 0]);
        // Residual 3: take item 0 (slope 3, len 1), then item 1 (slope 1, len 2).
        let done = complete(&[0, 0], &chains, 3.0);
        assert_eq!(done, vec![1, 1]);
        assert_eq!(chain_value(&chains, &done), 5.0);
    }

    fn concave_chain() -> impl Strategy<Value = HullChain> {
        prop::collection::vec((0.1f64..3.0, 0.05f64..0.95), 0..6).prop_map(|steps| {
            let (mut c, mut v, mut slope) = (0.0, 0.0, 5.0);
            let mut raw = vec![(c, v)];
            for (dc, shrink) in steps {
                slope *= shrink;
                c += dc;
                v += slope * dc;
                raw.push((c, v));
            }
            chain(&raw)
        })
    }

    proptest! {
        #[test]
        fn recovery_invariants(
            chains in prop::collection::vec(concave_chain(), 1..8),
            cap in 0.0f64..15.0,
            repair in any::<bool>(),
            fill in any::<bool>(),
        ) {
            let lp = solve_lp(&chains, cap).unwrap();
            let out = recover(&lp, &chains, cap, repair, fill);
            prop_assert!(out.loss_rd >= -1e-9);
            prop_assert!(out.loss_rd <= out.dv_max + 1e-9);
            prop_assert!(chain_cost(&chains, &out.choice_down) <= cap + 1e-9);
            prop_assert!(chain_cost(&chains, &out.choice_final) <= cap + 1e-9);
            prop_assert!(out.value_final >= out.value_down - 1e-9);

            let completed = complete(&out.choice_down, &chains, cap);
            prop_assert!(chain_value(&chains, &completed) >= out.value_down - 1e-9);
            prop_assert!(chain_cost(&chains, &completed) <= cap + 1e-9);
        }
    }
}
