//! Seeded instance generators.
//!
//! Every item draws from its own SplitMix64 substream keyed by
//! `(seed, item index)`, so the first `n` items of a larger instance are
//! identical to an instance generated with `n` items.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::instance::{ItemSpec, MenuPoint, PricingInstance};
use crate::rng::SplitMix64;

pub const DEFAULT_EPS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub seed: u64,
    pub eps: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 100,
            m: 50,
            alpha: 0.10,
            sigma: 0.10,
            seed: 42,
            eps: DEFAULT_EPS,
        }
    }
}

impl SyntheticConfig {
    fn check(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(Error::Config("m must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::Config(format!(
                "sigma must lie in (0, 1], got {}",
                self.sigma
            )));
        }
        check_eps(self.eps)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Config(format!("eps must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

/// Half-width of the synthetic menu spread around the reference price.
const MENU_SPREAD: f64 = 0.15;

fn synthetic_item(cfg: &SyntheticConfig, i: usize) -> ItemSpec {
    let mut rng = SplitMix64::substream(cfg.seed, i as u64);
    let a = rng.lognormal(5.0, 0.25);
    let omega = rng.lognormal(0.0, 0.09);
    let sigma = cfg.sigma;
    let lo = (1.0 - sigma) * a;
    let hi = (1.0 + sigma) * a;
    // Redraw the whole menu until at least one point lands in the band, so
    // every generated item has something to choose.
    let prices = loop {
        let prices: Vec<f64> = (0..cfg.m)
            .map(|_| a * (1.0 + rng.uniform(-MENU_SPREAD, MENU_SPREAD)))
            .collect();
        if prices.iter().any(|&x| x >= lo && x <= hi) {
            break prices;
        }
    };
    let b = rng.lognormal(3.0, 0.16);
    let eta = rng.uniform(1.5, 3.5);
    let menu = prices
        .into_iter()
        .map(|x| {
            let g = b * (1.0 - eta * (x - a) / a).max(0.0);
            MenuPoint {
                price: x,
                demand: g,
                deviation: cfg.alpha * g,
            }
        })
        .collect();
    let mut item = ItemSpec {
        ref_price: a,
        exposure: omega,
        tolerance: sigma,
        menu,
    };
    item.canonicalize();
    item
}

/// Synthetic portfolio: lognormal prices and exposures, uniform menus in
/// ±15% of the reference, piecewise-linear demand, proportional uncertainty.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<PricingInstance> {
    cfg.check()?;
    let items = (0..cfg.n).map(|i| synthetic_item(cfg, i)).collect();
    let mut inst = PricingInstance::new(items, 0.0);
    inst.margin_target = calibrate_margin_target(&inst, cfg.eps)?;
    inst.meta.insert("generator".into(), json!("synthetic"));
    inst.meta.insert("seed".into(), json!(cfg.seed));
    inst.meta.insert("eps".into(), json!(cfg.eps));
    inst.meta.insert(
        "config".into(),
        serde_json::to_value(cfg).expect("config is serializable"),
    );
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub size: usize,
    /// Median reference price; log-price has this log as its mean.
    pub price_median: f64,
    pub price_var: f64,
    pub eta_lo: f64,
    pub eta_hi: f64,
    /// Median baseline volume.
    pub volume_median: f64,
    pub volume_var: f64,
    pub alpha: f64,
}

impl Segment {
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        size: usize,
        price_median: f64,
        price_var: f64,
        eta: (f64, f64),
        volume_median: f64,
        volume_var: f64,
        alpha: f64,
    ) -> Self {
        Self {
            name: name.into(),
            size,
            price_median,
            price_var,
            eta_lo: eta.0,
            eta_hi: eta.1,
            volume_median,
            volume_var,
            alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetailConfig {
    pub seed: u64,
    pub segments: Vec<Segment>,
    pub m: usize,
    pub sigma: f64,
    pub eps: f64,
}

impl Default for RetailConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            segments: vec![
                Segment::new("staples", 120, 3.0, 0.15, (1.2, 2.0), 150.0, 0.30, 0.08),
                Segment::new("mainstream", 100, 5.5, 0.20, (2.0, 3.5), 60.0, 0.35, 0.15),
                Segment::new("premium", 50, 9.0, 0.25, (1.5, 2.5), 20.0, 0.40, 0.12),
                Segment::new("private_label", 30, 3.5, 0.10, (3.0, 5.0), 80.0, 0.25, 0.25),
            ],
            m: 20,
            sigma: 0.10,
            eps: DEFAULT_EPS,
        }
    }
}

impl RetailConfig {
    fn check(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Config("at least one segment is required".into()));
        }
        for s in &self.segments {
            if s.size == 0 {
                return Err(Error::Config(format!("segment `{}` has size 0", s.name)));
            }
            if !(0.0..=1.0).contains(&s.alpha) {
                return Err(Error::Config(format!(
                    "segment `{}` alpha must lie in [0, 1]",
                    s.name
                )));
            }
            if !(s.eta_lo <= s.eta_hi) || s.price_median <= 0.0 || s.volume_median <= 0.0 {
                return Err(Error::Config(format!(
                    "segment `{}` has invalid parameters",
                    s.name
                )));
            }
        }
        if self.m < 2 {
            return Err(Error::Config("m must be at least 2".into()));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::Config(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        check_eps(self.eps)
    }
}

/// Nearest price in cents congruent to 9 mod 10; the lower one on ties.
pub fn snap_x9(price: f64) -> f64 {
    // Strip representation noise so that exact midpoints tie deterministically.
    let cents = (price * 100.0 * 1e6).round() / 1e6;
    let lo = ((cents - 9.0) / 10.0).floor() * 10.0 + 9.0;
    let hi = lo + 10.0;
    let c = if cents - lo <= hi - cents { lo } else { hi };
    c / 100.0
}

/// `m` evenly spaced band points, snapped and deduplicated; points pushed
/// out of the band by snapping are dropped.
fn x9_menu(a: f64, sigma: f64, m: usize) -> Vec<f64> {
    let (lo, hi) = ((1.0 - sigma) * a, (1.0 + sigma) * a);
    let mut prices: Vec<f64> = (0..m)
        .map(|k| snap_x9(lo + (hi - lo) * k as f64 / (m - 1) as f64))
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    prices.dedup();
    prices
}

struct RetailDraw {
    a: f64,
    eta: f64,
    d: f64,
    prices: Vec<f64>,
}

fn retail_draw(cfg: &RetailConfig, seg: &Segment, i: usize) -> RetailDraw {
    let mut rng = SplitMix64::substream(cfg.seed, i as u64);
    // A very narrow band may contain no .X9 price; redraw the reference.
    let (a, prices) = loop {
        let a = rng.lognormal(seg.price_median.ln(), seg.price_var);
        let prices = x9_menu(a, cfg.sigma, cfg.m);
        if !prices.is_empty() {
            break (a, prices);
        }
    };
    let eta = rng.uniform(seg.eta_lo, seg.eta_hi);
    let d = rng.lognormal(seg.volume_median.ln(), seg.volume_var);
    RetailDraw { a, eta, d, prices }
}

/// Retail case study: segmented assortment, iso-elastic demand, `.X9`
/// menus, segment-specific uncertainty and volume-share exposures.
pub fn gen_retail(cfg: &RetailConfig) -> Result<PricingInstance> {
    cfg.check()?;
    let mut draws = Vec::new();
    let mut labels = Vec::new();
    for seg in &cfg.segments {
        for _ in 0..seg.size {
            draws.push((retail_draw(cfg, seg, draws.len()), seg.alpha));
            labels.push(seg.name.clone());
        }
    }
    let d_bar = draws.iter().map(|(d, _)| d.d).sum::<f64>() / draws.len() as f64;
    let items = draws
        .into_iter()
        .map(|(dr, alpha)| ItemSpec {
            ref_price: dr.a,
            exposure: dr.d / d_bar,
            tolerance: cfg.sigma,
            menu: dr
                .prices
                .iter()
                .map(|&x| {
                    let g = dr.d * (x / dr.a).powf(-dr.eta);
                    MenuPoint {
                        price: x,
                        demand: g,
                        deviation: alpha * g,
                    }
                })
                .collect(),
        })
        .collect();
    let mut inst = PricingInstance::new(items, 0.0);
    inst.canonicalize();
    inst.margin_target = calibrate_margin_target(&inst, cfg.eps)?;
    inst.meta.insert("generator".into(), json!("retail"));
    inst.meta.insert("seed".into(), json!(cfg.seed));
    inst.meta.insert("eps".into(), json!(cfg.eps));
    inst.meta.insert(
        "config".into(),
        serde_json::to_value(cfg).expect("config is serializable"),
    );
    inst.meta.insert("segments".into(), json!(labels));
    Ok(inst)
}

/// `Δ = (1 − ε) Σ ω x̃ ĝ(x̃) / Σ ω a ĝ(x̃)` with `x̃` the admissible menu
/// point closest to the reference price.
pub fn calibrate_margin_target(inst: &PricingInstance, eps: f64) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, item) in inst.items.iter().enumerate() {
        let j = item
            .closest_to_reference()
            .ok_or(Error::EmptyAdmissibleMenu { item: i })?;
        let p = &item.menu[j];
        num += item.exposure * p.price * p.demand;
        den += item.exposure * item.ref_price * p.demand;
    }
    if den <= 0.0 {
        return Err(Error::Config(
            "margin calibration needs positive baseline demand".into(),
        ));
    }
    Ok((1.0 - eps) * num / den)
}

/// First `n` items with the margin target recalibrated on the prefix.
pub fn prefix(inst: &PricingInstance, n: usize) -> Result<PricingInstance> {
    if n > inst.len() {
        return Err(Error::PrefixOutOfRange {
            requested: n,
            available: inst.len(),
        });
    }
    let eps = inst
        .meta
        .get("eps")
        .and_then(|v| v.as_f64())
        .unwrap_or(DEFAULT_EPS);
    let mut out = PricingInstance::new(inst.items[..n].to_vec(), 0.0);
    out.meta = inst.meta.clone();
    if let Some(serde_json::Value::Array(labels)) = out.meta.get_mut("segments") {
        labels.truncate(n);
    }
    out.margin_target = calibrate_margin_target(&out, eps)?;
    out.meta.insert("prefix_of".into(), json!(inst.len()));
    out.meta.insert("n".into(), json!(n));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate;

    fn median(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    }

    #[test]
    fn synthetic_medians() {
        let inst = gen_synthetic(&SyntheticConfig {
            n: 4000,
            m: 4,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let a = median(inst.items.iter().map(|it| it.ref_price).collect());
        let w = median(inst.items.iter().map(|it| it.exposure).collect());
        assert!((a / 5f64.exp() - 1.0).abs() < 0.05, "median a = {a}");
        assert!((w - 1.0).abs() < 0.05, "median ω = {w}");
    }

    #[test]
    fn calibrated_baseline_slack_is_eps() {
        let inst = gen_synthetic(&SyntheticConfig {
            n: 60,
            m: 10,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for it in &inst.items {
            let p = &it.menu[it.closest_to_reference().unwrap()];
            num += it.exposure * p.price * p.demand;
            den += it.exposure * it.ref_price * p.demand;
        }
        let ratio = num / den;
        assert!((ratio - inst.margin_target / (1.0 - DEFAULT_EPS)).abs() < 1e-12);
    }

    #[test]
    fn proportional_deviation() {
        let inst = gen_synthetic(&SyntheticConfig {
            n: 30,
            m: 8,
            alpha: 0.2,
            ..SyntheticConfig::default()
        })
        .unwrap();
        for it in &inst.items {
            for p in &it.menu {
                assert!(p.deviation <= p.demand);
                assert!((p.deviation - 0.2 * p.demand).abs() <= 1e-12 * p.demand.max(1.0));
            }
        }
    }

    #[test]
    fn generated_instances_validate() {
        for seed in 0..5 {
            let s = gen_synthetic(&SyntheticConfig {
                n: 40,
                m: 3,
                seed,
                ..SyntheticConfig::default()
            })
            .unwrap();
            assert!(validate(&s).is_valid(), "{}", validate(&s));
            let r = gen_retail(&RetailConfig {
                seed,
                ..RetailConfig::default()
            })
            .unwrap();
            assert!(validate(&r).is_valid(), "{}", validate(&r));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SyntheticConfig {
            n: 20,
            m: 6,
            seed: 7,
            ..SyntheticConfig::default()
        };
        assert_eq!(
            gen_synthetic(&cfg).unwrap().to_json(),
            gen_synthetic(&cfg).unwrap().to_json()
        );
        let rc = RetailConfig {
            seed: 7,
            ..RetailConfig::default()
        };
        assert_eq!(
            gen_retail(&rc).unwrap().to_json(),
            gen_retail(&rc).unwrap().to_json()
        );
    }

    #[test]
    fn items_nest_across_sizes() {
        let big = gen_synthetic(&SyntheticConfig {
            n: 100,
            m: 10,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let small = gen_synthetic(&SyntheticConfig {
            n: 30,
            m: 10,
            ..SyntheticConfig::default()
        })
        .unwrap();
        assert_eq!(small.items[..], big.items[..30]);
        let p30 = prefix(&big, 30).unwrap();
        assert_eq!(p30.items, small.items);
        assert!((p30.margin_target - small.margin_target).abs() < 1e-12);
        let p100 = prefix(&big, 100).unwrap();
        assert_eq!(p100.items, big.items);
        assert!((p100.margin_target - big.margin_target).abs() < 1e-12);
        assert_ne!(p30.margin_target, p100.margin_target);
        assert!(matches!(
            prefix(&big, 101),
            Err(Error::PrefixOutOfRange { .. })
        ));
    }

    #[test]
    fn snapping_rule() {
        assert_eq!(snap_x9(2.50), 2.49);
        // 2.44 sits exactly between 2.39 and 2.49: lower wins.
        assert_eq!(snap_x9(2.44), 2.39);
        assert_eq!(snap_x9(2.45), 2.49);
        assert_eq!(snap_x9(3.99), 3.99);
        assert_eq!(snap_x9(0.05), 0.09);
    }

    #[test]
    fn retail_menus_end_in_nine_cents() {
        let inst = gen_retail(&RetailConfig::default()).unwrap();
        assert_eq!(inst.len(), 300);
        for it in &inst.items {
            assert!(!it.menu.is_empty() && it.menu.len() <= 20);
            for p in &it.menu {
                let cents = (p.price * 100.0).round() as i64;
                assert_eq!(cents % 10, 9, "price {}", p.price);
                assert!(it.in_band(p.price));
            }
        }
        let staples = median(inst.items[..120].iter().map(|it| it.ref_price).collect());
        assert!((staples - 3.0).abs() < 0.35, "staples median {staples}");
        let w_mean = inst.items.iter().map(|it| it.exposure).sum::<f64>() / 300.0;
        assert!((w_mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iso_elastic_demand_at_reference() {
        // d (x/a)^-η is d at x = a for any η.
        let (d, a) = (80.0, 3.5);
        for eta in [1.2, 2.0, 4.7] {
            let x: f64 = a;
            assert_eq!(d * (x / a).powf(-eta), d);
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(gen_synthetic(&SyntheticConfig {
            m: 1,
            ..SyntheticConfig::default()
        })
        .is_err());
        assert!(gen_synthetic(&SyntheticConfig {
            alpha: 1.5,
            ..SyntheticConfig::default()
        })
        .is_err());
        let mut rc = RetailConfig::default();
        rc.segments[0].size = 0;
        assert!(gen_retail(&rc).is_err());
    }
}
