use std::collections::VecDeque;

use poisperc_core::duality::{
    dual_of_edge, dual_partner, has_crossing, net_verify, supercritical_radius, DualConfiguration, StripLayout,
};
use poisperc_core::{
    BondField, CrossingDirection, EdgeId, EdgeKind, LazyConfiguration, ModelParams, OpenConfiguration, Rectangle,
    SamplingMode, Site, StreamKey,
};
use proptest::prelude::*;

/// Edge field given by a closure over a fixed window.
struct FnField<F: Fn(EdgeId) -> bool + Sync> {
    radius: u32,
    open: F,
}

impl<F: Fn(EdgeId) -> bool + Sync> BondField for FnField<F> {
    fn window_radius(&self) -> u32 {
        self.radius
    }
    fn is_open(&self, edge: EdgeId) -> bool {
        (self.open)(edge)
    }
}

/// Primal crossing by plain search over the sites of `rect`.
fn primal_crossing_oracle<F: BondField>(field: &F, rect: Rectangle, direction: CrossingDirection) -> bool {
    let inside = |s: Site| (rect.x0..=rect.x1).contains(&s.x) && (rect.y0..=rect.y1).contains(&s.y);
    let (starts, goal): (Vec<Site>, Box<dyn Fn(Site) -> bool>) = match direction {
        CrossingDirection::TopBottom => (
            (rect.x0..=rect.x1).map(|x| Site::new(x, rect.y1)).collect(),
            Box::new(move |s: Site| s.y == rect.y0),
        ),
        CrossingDirection::LeftRight => (
            (rect.y0..=rect.y1).map(|y| Site::new(rect.x0, y)).collect(),
            Box::new(move |s: Site| s.x == rect.x1),
        ),
    };
    let mut seen: std::collections::HashSet<Site> = starts.iter().copied().collect();
    let mut queue: VecDeque<Site> = starts.into_iter().collect();
    while let Some(s) = queue.pop_front() {
        if goal(s) {
            return true;
        }
        for t in [s.offset(1, 0), s.offset(-1, 0), s.offset(0, 1), s.offset(0, -1)] {
            if inside(t) && field.is_open(EdgeId::between(s, t).unwrap()) && seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    false
}

fn swap(d: CrossingDirection) -> CrossingDirection {
    match d {
        CrossingDirection::TopBottom => CrossingDirection::LeftRight,
        CrossingDirection::LeftRight => CrossingDirection::TopBottom,
    }
}

#[test]
fn exhaustive_duality_on_small_rectangles() {
    let mut checked = 0u64;
    for w in 1..=13 {
        for h in 1..=13 {
            let rect = Rectangle::new(-1, w - 2, -1, h - 2).unwrap();
            let edges = rect.top_bottom_edges();
            if edges.len() > 12 {
                continue;
            }
            for bits in 0u32..1 << edges.len() {
                let field = FnField {
                    radius: 12,
                    open: |e: EdgeId| edges.iter().position(|&f| f == e).is_some_and(|k| bits >> k & 1 == 1),
                };
                let primal = has_crossing(&field, rect, CrossingDirection::TopBottom, EdgeKind::PrimalOpen).unwrap();
                let dual = has_crossing(&field, rect, CrossingDirection::LeftRight, EdgeKind::DualOpen).unwrap();
                assert_ne!(primal, dual, "{rect:?} pattern {bits:#x}");
                assert_eq!(primal, primal_crossing_oracle(&field, rect, CrossingDirection::TopBottom));
                checked += 1;
            }
        }
    }
    assert!(checked > 20_000, "{checked}");
}

#[test]
fn boundary_sanity() {
    let layout = StripLayout::new(2.0, 60.0).unwrap();
    let radius = layout.required_radius() + 1;
    let all_open = FnField { radius, open: |_| true };
    let all_closed = FnField { radius, open: |_| false };
    let open_net = net_verify(&all_open, 2.0, 60.0).unwrap();
    let closed_net = net_verify(&all_closed, 2.0, 60.0).unwrap();
    assert!(open_net.all_hold && open_net.central_box_all_open);
    assert!(open_net.strips.iter().all(|s| s.crossed));
    assert!(closed_net.strips.iter().all(|s| !s.crossed));
    assert_eq!(open_net.strips.len(), 2 * layout.strip_count());
}

#[test]
fn net_frequency_grows_with_c1() {
    let params = ModelParams::with_default_window(1.0, 1000.0, 0.1).unwrap();
    let n = supercritical_radius(0.1, &params).unwrap();
    let replicates = 60;
    let freq = |c1: f64| {
        let hold = (0..replicates)
            .filter(|&r| {
                let field = LazyConfiguration::new(params, 5000 + r, SamplingMode::FixedTime).unwrap();
                net_verify(&field, c1, n).unwrap().all_hold
            })
            .count();
        hold as f64 / replicates as f64
    };
    let f: Vec<f64> = [6.0, 9.0, 16.0].iter().map(|&c| freq(c)).collect();
    for pair in f.windows(2) {
        let sigma = (0.25 / replicates as f64).sqrt();
        assert!(pair[1] + 2.0 * sigma >= pair[0], "{f:?}");
    }
    assert!(f[2] > f[0], "{f:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dual_pairing_is_an_involution(x in -500i32..500, y in -500i32..500, horizontal in any::<bool>()) {
        let e = if horizontal { EdgeId::horizontal(x, y) } else { EdgeId::vertical(x, y) };
        prop_assert_eq!(dual_partner(dual_of_edge(e)), e);
        prop_assert_eq!(dual_of_edge(dual_partner(e)), e);
        prop_assert_ne!(dual_partner(e).direction, e.direction);
    }

    #[test]
    fn dual_of_dual_is_shifted_primal(seed in any::<u64>(), p in 0.0f64..1.0) {
        let params = ModelParams::new(1.0, 1.0, 8).unwrap();
        let key = StreamKey::new(seed);
        let config = OpenConfiguration::from_fn(params, |e| key.uniform(e.index()) < p).unwrap();
        let dual = DualConfiguration::new(&config);
        let dual2 = DualConfiguration::new(&dual);
        for e in config.edges() {
            if e.in_window(6) {
                prop_assert_eq!(dual.is_open(dual_of_edge(e)), !config.is_open(e));
                let shifted = EdgeId { site: e.site.offset(-1, -1), direction: e.direction };
                prop_assert_eq!(dual2.is_open(shifted), config.is_open(e));
            }
        }
    }

    #[test]
    fn crossing_duality_on_random_rectangles(
        seed in any::<u64>(),
        p in 0.2f64..0.8,
        x0 in -10i32..0, w in 0i32..10,
        y0 in -10i32..0, h in 0i32..10,
        top_bottom in any::<bool>(),
    ) {
        let rect = Rectangle::new(x0, x0 + w, y0, y0 + h).unwrap();
        let key = StreamKey::new(seed);
        let field = FnField { radius: 12, open: |e: EdgeId| key.uniform(e.index()) < p };
        let dir = if top_bottom { CrossingDirection::TopBottom } else { CrossingDirection::LeftRight };
        let primal = has_crossing(&field, rect, dir, EdgeKind::PrimalOpen).unwrap();
        let dual = has_crossing(&field, rect, swap(dir), EdgeKind::DualOpen).unwrap();
        prop_assert_ne!(primal, dual);
        prop_assert_eq!(primal, primal_crossing_oracle(&field, rect, dir));
    }
}
