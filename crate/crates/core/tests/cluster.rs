use std::collections::VecDeque;

use poisperc_core::cluster::{build_clusters, certify_containment, containment_check, explore_cluster};
use poisperc_core::{BondField, EdgeId, LazyConfiguration, ModelParams, OpenConfiguration, SamplingMode, Site};
use proptest::prelude::*;

/// Flood fill from every site; component id is the first row-major index reached.
fn flood_labels(config: &OpenConfiguration) -> Vec<usize> {
    let n = config.site_count();
    let mut comp = vec![usize::MAX; n];
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = start;
        let mut queue = VecDeque::from([config.site_at(start)]);
        let r = config.params().window_radius();
        while let Some(s) = queue.pop_front() {
            for t in [s.offset(1, 0), s.offset(-1, 0), s.offset(0, 1), s.offset(0, -1)] {
                if t.norm() > r {
                    continue;
                }
                let k = config.site_index(t);
                if comp[k] == usize::MAX && config.is_open(EdgeId::between(s, t).unwrap()) {
                    comp[k] = start;
                    queue.push_back(t);
                }
            }
        }
    }
    comp
}

fn random_config(radius: u32, p: f64, seed: u64) -> OpenConfiguration {
    let params = ModelParams::new(1.0, 1.0, radius).unwrap();
    let key = poisperc_core::StreamKey::new(seed);
    OpenConfiguration::from_fn(params, |e| key.uniform(e.index()) < p).unwrap()
}

fn origin_sites<F: BondField>(field: &F) -> Vec<Site> {
    let mut sites = Vec::new();
    explore_cluster(field, Site::ORIGIN, |s| sites.push(s));
    sites.sort();
    sites
}

#[test]
fn union_find_matches_flood_on_every_3x3_block() {
    let params = ModelParams::new(1.0, 1.0, 1).unwrap();
    let edges: Vec<EdgeId> = OpenConfiguration::from_fn(params, |_| false).unwrap().edges().collect();
    assert_eq!(edges.len(), 12);
    for bits in 0u32..1 << 12 {
        let config = OpenConfiguration::from_fn(params, |e| {
            bits >> edges.iter().position(|&f| f == e).unwrap() & 1 == 1
        })
        .unwrap();
        let labels = build_clusters(&config);
        let comp = flood_labels(&config);
        for (i, &c) in comp.iter().enumerate() {
            assert_eq!(labels.label(config.site_at(i)) as usize, c, "pattern {bits:#x}");
        }
    }
}

#[test]
fn containment_certificate_agrees_with_exploration() {
    let params = ModelParams::with_default_window(1.0, 300.0, 0.1).unwrap();
    for seed in 0..40 {
        let lazy = LazyConfiguration::new(params, seed, SamplingMode::FixedTime).unwrap();
        let exact = containment_check(&explore_cluster(&lazy, Site::ORIGIN, |_| {}).stats, 0.1, &params).unwrap();
        let fast = certify_containment(&lazy, 0.1, &params).unwrap();
        assert_eq!(exact.contained, fast.contained, "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn union_find_matches_flood(radius in 1u32..14, p in 0.0f64..1.0, seed in any::<u64>()) {
        let config = random_config(radius, p, seed);
        let labels = build_clusters(&config);
        let comp = flood_labels(&config);
        let mut sizes = std::collections::HashMap::new();
        for &c in &comp {
            *sizes.entry(c).or_insert(0u32) += 1;
        }
        for (i, &c) in comp.iter().enumerate() {
            let s = config.site_at(i);
            prop_assert_eq!(labels.label(s) as usize, c);
            prop_assert_eq!(labels.cluster_size(labels.label(s)), sizes[&c]);
        }
        prop_assert_eq!(labels.cluster_count(), sizes.len());
    }

    #[test]
    fn opening_an_edge_never_shrinks_the_origin_cluster(
        radius in 2u32..12,
        p in 0.2f64..0.8,
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
    ) {
        let mut config = random_config(radius, p, seed);
        let before = origin_sites(&config);
        let edges: Vec<EdgeId> = config.edges().collect();
        config.set_open(edges[pick.index(edges.len())], true);
        let after = origin_sites(&config);
        prop_assert!(before.iter().all(|s| after.binary_search(s).is_ok()));
        let radius_of = |v: &[Site]| v.iter().map(|s| s.norm()).max().unwrap();
        prop_assert!(radius_of(&after) >= radius_of(&before));
    }

    #[test]
    fn exploration_stats_are_consistent(radius in 1u32..20, p in 0.3f64..0.7, seed in any::<u64>()) {
        let config = random_config(radius, p, seed);
        let mut sites = Vec::new();
        let ex = explore_cluster(&config, Site::ORIGIN, |s| sites.push(s));
        prop_assert!(ex.stats.size >= 1);
        prop_assert_eq!(ex.stats.size as usize, sites.len());
        prop_assert!(ex.stats.radius <= radius);
        prop_assert_eq!(ex.touches_window_edge, ex.stats.radius == radius);
        let labels = build_clusters(&config);
        prop_assert_eq!(u64::from(labels.cluster_size(labels.origin_label())), ex.stats.size);
    }
}
