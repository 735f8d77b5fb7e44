//! Pricing-instance data model, validation and JSON encoding.
//!
//! An instance stores each item's menu as explicit `(price, demand,
//! deviation)` triples, so the solver never needs to know which demand model
//! produced them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

/// Absolute slack on the fairness-band comparison.
pub const BAND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuPoint {
    pub price: f64,
    /// Nominal demand at this price.
    pub demand: f64,
    /// Half-width of the demand uncertainty interval.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub ref_price: f64,
    pub exposure: f64,
    /// Relative fairness tolerance around `ref_price`.
    pub tolerance: f64,
    pub menu: Vec<MenuPoint>,
}

impl ItemSpec {
    /// Closed fairness band `[(1-σ)a, (1+σ)a]`.
    pub fn band(&self) -> (f64, f64) {
        (
            (1.0 - self.tolerance) * self.ref_price,
            (1.0 + self.tolerance) * self.ref_price,
        )
    }

    pub fn in_band(&self, price: f64) -> bool {
        let (lo, hi) = self.band();
        price >= lo - BAND_TOL && price <= hi + BAND_TOL
    }

    /// Menu indices whose price lies in the fairness band.
    pub fn admissible(&self) -> Vec<usize> {
        self.menu
            .iter()
            .enumerate()
            .filter(|(_, p)| self.in_band(p.price))
            .map(|(j, _)| j)
            .collect()
    }

    /// Admissible menu index whose price is closest to the reference price
    /// (the lower price on ties).
    pub fn closest_to_reference(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in self.admissible() {
            let d = (self.menu[j].price - self.ref_price).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Sort the menu by price and merge equal prices, keeping the point with
    /// the larger nominal demand.
    pub fn canonicalize(&mut self) {
        self.menu.sort_by(|a, b| a.price.total_cmp(&b.price));
        let mut merged: Vec<MenuPoint> = Vec::with_capacity(self.menu.len());
        for p in self.menu.drain(..) {
            match merged.last_mut() {
                Some(last) if last.price == p.price => {
                    if p.demand > last.demand {
                        *last = p;
                    }
                }
                _ => merged.push(p),
            }
        }
        self.menu = merged;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingInstance {
    pub items: Vec<ItemSpec>,
    pub margin_target: f64,
    /// Free-form provenance (generator, seed, prefix size, ...).
    pub meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    schema_version: String,
    margin_target: f64,
    items: Vec<ItemSpec>,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

impl PricingInstance {
    pub fn new(items: Vec<ItemSpec>, margin_target: f64) -> Self {
        Self {
            items,
            margin_target,
            meta: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn canonicalize(&mut self) {
        for item in &mut self.items {
            item.canonicalize();
        }
    }

    /// Per-unit margin factor `ω (x − Δ a)` of option `j` of item `i`.
    pub fn margin_factor(&self, i: usize, j: usize) -> f64 {
        let item = &self.items[i];
        item.exposure * (item.menu[j].price - self.margin_target * item.ref_price)
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDoc {
            schema_version: SCHEMA_VERSION.to_string(),
            margin_target: self.margin_target,
            items: self.items.clone(),
            meta: self.meta.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("instance serialization is infallible")
    }

    /// Decode an instance document. Menus are canonicalized (sorted, equal
    /// prices merged) on load; call [`validate`] for the remaining checks.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: InstanceDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: doc.schema_version,
                expected: SCHEMA_VERSION.to_string(),
            });
        }
        let mut inst = PricingInstance {
            items: doc.items,
            margin_target: doc.margin_target,
            meta: doc.meta,
        };
        inst.canonicalize();
        Ok(inst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub item: Option<usize>,
    pub point: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.item, self.point) {
            (Some(i), Some(j)) => write!(
                f,
                "item {i}, menu point {j}, {}: {}",
                self.field, self.message
            ),
            (Some(i), None) => write!(f, "item {i}, {}: {}", self.field, self.message),
            _ => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(
        &mut self,
        item: Option<usize>,
        point: Option<usize>,
        field: &str,
        message: impl Into<String>,
    ) {
        self.violations.push(Violation {
            item,
            point,
            field: field.to_string(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check every structural invariant of an instance. Never panics; NaNs fail
/// every positivity test.
pub fn validate(inst: &PricingInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !(inst.margin_target > 0.0 && inst.margin_target.is_finite()) {
        report.push(
            None,
            None,
            "margin_target",
            format!("must be positive and finite, got {}", inst.margin_target),
        );
    }
    for (i, item) in inst.items.iter().enumerate() {
        let at = Some(i);
        if !(item.ref_price > 0.0 && item.ref_price.is_finite()) {
            report.push(
                at,
                None,
                "ref_price",
                format!("must be positive and finite, got {}", item.ref_price),
            );
        }
        if !(item.exposure > 0.0 && item.exposure.is_finite()) {
            report.push(
                at,
                None,
                "exposure",
                format!("must be positive and finite, got {}", item.exposure),
            );
        }
        if !(0.0..=1.0).contains(&item.tolerance) {
            report.push(
                at,
                None,
                "tolerance",
                format!("must lie in [0, 1], got {}", item.tolerance),
            );
        }
        if item.menu.is_empty() {
            report.push(at, None, "menu", "menu is empty");
            continue;
        }
        for (j, p) in item.menu.iter().enumerate() {
            let pt = Some(j);
            if !(p.price > 0.0 && p.price.is_finite()) {
                report.push(
                    at,
                    pt,
                    "price",
                    format!("must be positive and finite, got {}", p.price),
                );
            }
            if !(p.demand >= 0.0 && p.demand.is_finite()) {
                report.push(
                    at,
                    pt,
                    "demand",
                    format!("must be nonnegative and finite, got {}", p.demand),
                );
            }
            if !(p.deviation >= 0.0 && p.deviation.is_finite()) {
                report.push(
                    at,
                    pt,
                    "deviation",
                    format!("must be nonnegative and finite, got {}", p.deviation),
                );
            } else if p.deviation > p.demand {
                report.push(
                    at,
                    pt,
                    "deviation",
                    format!("deviation {} exceeds demand {}", p.deviation, p.demand),
                );
            }
            if j > 0 && !(p.price > item.menu[j - 1].price) {
                report.push(at, pt, "price", "menu prices must be strictly increasing");
            }
        }
        if item.admissible().is_empty() {
            let (lo, hi) = item.band();
            report.push(
                at,
                None,
                "menu",
                format!("empty admissible menu: no price inside [{lo}, {hi}]"),
            );
        }
    }
    report
}

/// Final discrete pricing decision with its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolution {
    /// Menu index chosen for each item.
    pub choice: Vec<usize>,
    /// Nominal revenue `Σ ω x ĝ`.
    pub objective: f64,
    /// Nominal margin slack `Σ ω (x − Δ a) ĝ`.
    pub margin_slack: f64,
    /// Robust certificate: margin slack minus the worst-case penalty.
    pub certificate: f64,
    pub theta_used: Option<f64>,
    pub gamma: usize,
}

impl DiscreteSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })
    }
}
