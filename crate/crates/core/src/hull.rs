//! Per-item cost–value preprocessing and upper-hull construction.

/// Equal-cost merge tolerance.
pub const COST_TOL: f64 = 1e-9;
/// Slope comparison tolerance for collapsing collinear vertices.
pub const SLOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullPoint {
    pub cost: f64,
    pub value: f64,
    /// Position of the originating option in the item's admissible array.
    pub option: usize,
}

impl HullPoint {
    pub fn new(cost: f64, value: f64, option: usize) -> Self {
        Self {
            cost,
            value,
            option,
        }
    }
}

/// Upper-hull vertex chain ordered by strictly increasing cost.
#[derive(Debug, Clone, PartialEq)]
pub struct HullChain {
    pub vertices: Vec<HullPoint>,
    pub seg_len: Vec<f64>,
    pub seg_slope: Vec<f64>,
}

impl HullChain {
    fn from_vertices(vertices: Vec<HullPoint>) -> Self {
        let (seg_len, seg_slope) = vertices
            .windows(2)
            .map(|w| {
                let dc = w[1].cost - w[0].cost;
                (dc, (w[1].value - w[0].value) / dc)
            })
            .unzip();
        Self {
            vertices,
            seg_len,
            seg_slope,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn segments(&self) -> usize {
        self.seg_len.len()
    }

    /// Value jump of segment `k` (between vertices `k` and `k + 1`).
    pub fn jump(&self, k: usize) -> f64 {
        self.vertices[k + 1].value - self.vertices[k].value
    }

    /// Largest adjacent value jump; zero for a single vertex.
    pub fn max_jump(&self) -> f64 {
        (0..self.segments())
            .map(|k| self.jump(k))
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolant of the chain; `None` outside its cost range.
    pub fn value_at(&self, cost: f64) -> Option<f64> {
        let first = self.vertices.first()?;
        let last = self.vertices.last()?;
        if cost < first.cost || cost > last.cost {
            return None;
        }
        let k = self.vertices.partition_point(|p| p.cost <= cost);
        if k == self.vertices.len() {
            return Some(last.value);
        }
        let (a, b) = (self.vertices[k - 1], self.vertices[k]);
        Some(a.value + (cost - a.cost) * (b.value - a.value) / (b.cost - a.cost))
    }
}

/// Sort by cost, merge equal costs keeping the largest value, and drop
/// dominated points. The result has strictly increasing cost and value.
pub fn preprocess(points: &[HullPoint]) -> Vec<HullPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(b.value.total_cmp(&a.value))
            .then(a.option.cmp(&b.option))
    });
    let mut out: Vec<HullPoint> = Vec::with_capacity(sorted.len());
    for p in sorted {
        match out.last() {
            // Equal cost within tolerance: the survivor already has the
            // largest value, and a point with no more value than the best so
            // far is dominated.
            Some(last) if p.cost - last.cost <= COST_TOL || p.value <= last.value => {}
            _ => out.push(p),
        }
    }
    out
}

/// Upper hull of a preprocessed point set by monotone-chain scan.
pub fn upper_hull(points: &[HullPoint]) -> HullChain {
    let mut hull: Vec<HullPoint> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let left = (a.value - o.value) / (a.cost - o.cost);
            let right = (p.value - a.value) / (p.cost - a.cost);
            // `a` must sit strictly above the chord o–p: slopes strictly decrease.
            if right >= left - SLOPE_TOL * left.abs().max(1.0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    HullChain::from_vertices(hull)
}

/// Hull chain of one item's `(cost, value)` options.
pub fn item_hull(costs: &[f64], values: &[f64]) -> HullChain {
    let pts: Vec<HullPoint> = costs
        .iter()
        .zip(values)
        .enumerate()
        .map(|(j, (&c, &v))| HullPoint::new(c, v, j))
        .collect();
    upper_hull(&preprocess(&pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(raw: &[(f64, f64)]) -> Vec<HullPoint> {
        raw.iter()
            .enumerate()
            .map(|(j, &(c, v))| HullPoint::new(c, v, j))
            .collect()
    }

    fn cv(chain: &[HullPoint]) -> Vec<(f64, f64)> {
        chain.iter().map(|p| (p.cost, p.value)).collect()
    }

    #[test]
    fn equal_cost_keeps_max_value() {
        assert_eq!(
            cv(&preprocess(&pts(&[(1.0, 5.0), (1.0, 7.0)]))),
            vec![(1.0, 7.0)]
        );
    }

    #[test]
    fn dominated_point_is_removed() {
        assert_eq!(
            cv(&preprocess(&pts(&[(0.0, 3.0), (2.0, 2.0)]))),
            vec![(0.0, 3.0)]
        );
        // Equal value at higher cost is dominated too.
        assert_eq!(
            cv(&preprocess(&pts(&[(0.0, 3.0), (2.0, 3.0)]))),
            vec![(0.0, 3.0)]
        );
    }

    #[test]
    fn undominated_points_pass_through() {
        let raw = [(0.0, 1.0), (1.0, 2.0), (2.0, 4.0)];
        assert_eq!(cv(&preprocess(&pts(&raw))), raw.to_vec());
    }

    #[test]
    fn point_below_chord_is_dropped() {
        let chain = upper_hull(&preprocess(&pts(&[(0.0, 10.0), (1.0, 11.0), (2.0, 14.0)])));
        assert_eq!(cv(&chain.vertices), vec![(0.0, 10.0), (2.0, 14.0)]);
        assert_eq!(chain.seg_len, vec![2.0]);
        assert_eq!(chain.seg_slope, vec![2.0]);
    }

    #[test]
    fn strictly_concave_chain_is_kept() {
        let chain = upper_hull(&preprocess(&pts(&[(0.0, 0.0), (1.0, 2.0), (2.0, 3.0)])));
        assert_eq!(chain.len(), 3);
        assert_eq!(chain.seg_slope, vec![2.0, 1.0]);
        assert_eq!(chain.max_jump(), 2.0);
    }

    #[test]
    fn collinear_interior_point_is_dropped() {
        let chain = upper_hull(&preprocess(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])));
        assert_eq!(cv(&chain.vertices), vec![(0.0, 0.0), (2.0, 2.0)]);
    }

    #[test]
    fn single_point_has_no_segments() {
        let chain = upper_hull(&pts(&[(0.0, 4.0)]));
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.segments(), 0);
        assert_eq!(chain.max_jump(), 0.0);
    }

    /// `p` is a hull vertex iff no chord between two other points passes on
    /// or above it. Points must already be preprocessed.
    fn brute_force_hull(points: &[HullPoint]) -> Vec<usize> {
        let n = points.len();
        (0..n)
            .filter(|&q| {
                let p = points[q];
                for a in 0..q {
                    for b in q + 1..n {
                        let (pa, pb) = (points[a], points[b]);
                        let chord = pa.value
                            + (p.cost - pa.cost) * (pb.value - pa.value) / (pb.cost - pa.cost);
                        if p.value <= chord + 1e-9 * chord.abs().max(1.0) {
                            return false;
                        }
                    }
                }
                true
            })
            .map(|q| points[q].option)
            .collect()
    }

    fn raw_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..50)
    }

    proptest! {
        #[test]
        fn matches_chord_oracle(raw in raw_points()) {
            let pre = preprocess(&pts(&raw));
            let chain = upper_hull(&pre);
            let got: Vec<usize> = chain.vertices.iter().map(|p| p.option).collect();
            prop_assert_eq!(got, brute_force_hull(&pre));
        }

        #[test]
        fn chain_dominates_every_point(raw in raw_points()) {
            let points = pts(&raw);
            let chain = upper_hull(&preprocess(&points));
            for w in chain.vertices.windows(2) {
                prop_assert!(w[1].cost > w[0].cost);
            }
            for w in chain.seg_slope.windows(2) {
                prop_assert!(w[1] < w[0] - SLOPE_TOL * w[0].abs().max(1.0) * 0.5);
            }
            for p in &points {
                let c0 = chain.vertices[0].cost;
                // Points cheaper than the first vertex cannot exist; points
                // beyond the last vertex are dominated by it.
                prop_assert!(p.cost >= c0 - COST_TOL);
                let v = chain.value_at(p.cost.max(c0)).unwrap_or(chain.vertices.last().unwrap().value);
                prop_assert!(p.value <= v + 1e-7 * v.abs().max(1.0));
            }
            for h in &chain.vertices {
                let orig = points[h.option];
                prop_assert_eq!((orig.cost, orig.value), (h.cost, h.value));
            }
        }

        #[test]
        fn concave_raw_chain_is_returned_verbatim(
            start in 0.0f64..10.0,
            steps in prop::collection::vec((0.1f64..5.0, 0.0f64..1.0), 1..20),
        ) {
            // Strictly decreasing positive slopes from a cumulative product.
            let mut c = start;
            let mut v = 0.0;
            let mut slope = 10.0;
            let mut raw = vec![(c, v)];
            for (dc, shrink) in steps {
                slope *= 0.5 + 0.4 * shrink;
                c += dc;
                v += slope * dc;
                raw.push((c, v));
            }
            let chain = upper_hull(&preprocess(&pts(&raw)));
            prop_assert_eq!(cv(&chain.vertices), raw);
        }
    }
}
