use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use hkmedian::cost::{kmedian_cost, opt_kmedian_discrete};
use hkmedian::datasets::{check_well_clusterable, dbscan, gen_line_instance, DbscanParams};
use hkmedian::hierarchy::{
    exp_mechanism_probabilities, exp_mechanism_sample, greedy_hierarchical, stable_hierarchical,
};
use hkmedian::linkage::{agglomerate, linkage_cost, LinkageKind};
use hkmedian::partition::check_nested;
use hkmedian::rhst::{apply_shift, build_rhst, construct_2rhst, normalize, Rhst, ShiftMode};
use hkmedian::sensitivity::partition_distance;
use hkmedian::stream::{stream, Stream};
use hkmedian::{Dataset, Partition};

fn points(max_n: usize, d: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(prop::collection::vec(-50i32..50, d), 2..=max_n).prop_filter_map("distinct", |rows| {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(f64::from).collect())
            .collect();
        let ds = Dataset::from_rows(&rows).ok()?;
        ds.ensure_distinct().ok()?;
        Some(ds)
    })
}

fn any_points(max_n: usize) -> impl Strategy<Value = Dataset> {
    (1usize..=3).prop_flat_map(move |d| points(max_n, d))
}

/// Sum of edge weights on the path between two leaves.
fn path_sum(t: &Rhst, a: usize, b: usize) -> f64 {
    let nodes = t.nodes();
    let (mut u, mut v) = (t.leaf(a), t.leaf(b));
    let mut total = 0.0;
    while u != v {
        total += t.edge_weight(nodes[u].level) + t.edge_weight(nodes[v].level);
        u = nodes[u].parent.unwrap();
        v = nodes[v].parent.unwrap();
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_monotone_in_centers(ds in any_points(20), seed in any::<u64>()) {
        let mut rng = Stream::seed_from_u64(seed);
        let mut ids = ds.ids().to_vec();
        ids.shuffle(&mut rng);
        let mut prev = f64::INFINITY;
        for k in 1..=ids.len() {
            let c = kmedian_cost(&ds, &ids[..k]).unwrap();
            prop_assert!(c <= prev + 1e-9);
            prev = c;
        }
    }

    #[test]
    fn cost_translates_and_scales(ds in any_points(15), shift in -100.0f64..100.0, scale in 0.1f64..10.0) {
        let centers = &ds.ids()[..1];
        let base = kmedian_cost(&ds, centers).unwrap();
        let moved = ds.map_coords(|_, x| x + shift);
        let scaled = ds.map_coords(|_, x| x * scale);
        prop_assert!((kmedian_cost(&moved, centers).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
        prop_assert!((kmedian_cost(&scaled, centers).unwrap() - scale * base).abs() <= 1e-9 * (scale * base).max(1.0));
    }

    #[test]
    fn discrete_opt_decreases_in_k(ds in any_points(9)) {
        let costs: Vec<f64> = (1..=ds.len()).map(|k| opt_kmedian_discrete(&ds, k, 15).unwrap().1).collect();
        prop_assert!(costs.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn tree_distance_is_ultrametric_and_closed_form(ds in any_points(25), seed in any::<u64>()) {
        let t = build_rhst(&ds, &ShiftMode::Random, &mut Stream::seed_from_u64(seed)).unwrap();
        let n = ds.len();
        let ids = ds.ids();
        let d = |a: usize, b: usize| t.tree_dist(ids[a], ids[b]).unwrap();
        for a in 0..n {
            for b in 0..n {
                prop_assert!((d(a, b) - path_sum(&t, a, b)).abs() <= 1e-9 * d(a, b).max(1.0));
                prop_assert_eq!(d(a, b), d(b, a));
                prop_assert_eq!(d(a, b) == 0.0, a == b);
                for c in 0..n.min(6) {
                    prop_assert!(d(a, b) <= d(a, c).max(d(c, b)) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn tree_cost_dominates_shifted_euclidean(ds in any_points(20), shift in prop::collection::vec(0.0f64..1.0, 3), k in 1usize..5) {
        let norm = normalize(&ds).unwrap();
        let v: Vec<f64> = shift[..ds.dim()].iter().map(|s| s * norm.lambda).collect();
        let shifted = apply_shift(&norm.dataset, &v);
        let t = construct_2rhst(&shifted).unwrap();
        let centers = &ds.ids()[..k.min(ds.len())];
        prop_assert!(t.tree_cost(centers).unwrap() + 1e-9 >= kmedian_cost(&shifted, centers).unwrap());
    }

    #[test]
    fn tree_structure(ds in any_points(30), seed in any::<u64>()) {
        let t = build_rhst(&ds, &ShiftMode::Random, &mut Stream::seed_from_u64(seed)).unwrap();
        prop_assert!(t.nodes().len() <= ds.len() * t.depth() + 1);
        for node in t.nodes() {
            prop_assert!(node.children.len() <= 1 << ds.dim());
            prop_assert_eq!(node.point.is_some(), node.level == t.depth());
        }
        for level in 2..=t.depth() {
            prop_assert_eq!(t.edge_weight(level - 1), 2.0 * t.edge_weight(level));
        }
    }

    #[test]
    fn hierarchies_are_nested(ds in any_points(25), seed in any::<u64>(), eps in 0.1f64..100.0) {
        let t = build_rhst(&ds, &ShiftMode::Random, &mut Stream::seed_from_u64(seed)).unwrap();
        let g = greedy_hierarchical(&t);
        prop_assert!(g.check_nested().is_ok());
        let s = stable_hierarchical(&t, eps, &mut Stream::seed_from_u64(seed)).unwrap();
        prop_assert!(s.check_nested().is_ok());
        let mut centers = s.centers().to_vec();
        centers.sort_unstable();
        centers.dedup();
        prop_assert_eq!(centers.len(), ds.len());
    }

    #[test]
    fn softmax_invariant_under_offset(costs in prop::collection::vec(0.0f64..50.0, 1..20), offset in -1e3f64..1e3, lambda in 0.01f64..20.0) {
        let shifted: Vec<f64> = costs.iter().map(|c| c + offset).collect();
        let a = exp_mechanism_probabilities(&costs, lambda).unwrap();
        let b = exp_mechanism_probabilities(&shifted, lambda).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn linkage_cuts_nested_and_ward_nonnegative(ds in any_points(30)) {
        for kind in LinkageKind::ALL {
            prop_assert!(check_nested(&agglomerate(&ds, kind).levels()).is_ok());
        }
        let ids = ds.ids();
        let half = ids.len() / 2;
        prop_assert!(linkage_cost(&ds, &ids[..half.max(1)], &ids[half.max(1)..], LinkageKind::Ward).unwrap() >= 0.0);
    }

    #[test]
    fn partition_distance_symmetry(labels_a in prop::collection::vec(0u8..5, 1..30), labels_b in prop::collection::vec(0u8..5, 1..30)) {
        let a = Partition::from_labels(labels_a.iter().enumerate().map(|(i, &l)| (i, l)));
        let b = Partition::from_labels(labels_b.iter().enumerate().map(|(i, &l)| (i, l)));
        prop_assert_eq!(partition_distance(&a, &b), partition_distance(&b, &a));
        prop_assert_eq!(partition_distance(&a, &b) == 0, a == b);
        prop_assert_eq!(partition_distance(&a, &a), 0);
    }

    #[test]
    fn deleting_a_present_point_costs_at_least_one(labels in prop::collection::vec(0u8..4, 2..30), del in any::<prop::sample::Index>()) {
        let a = Partition::from_labels(labels.iter().enumerate().map(|(i, &l)| (i, l)));
        let gone = del.index(labels.len());
        let b = Partition::from_labels(labels.iter().enumerate().filter(|(i, _)| *i != gone).map(|(i, &l)| (i, l)));
        prop_assert!(partition_distance(&a, &b) >= 1);
    }

    #[test]
    fn clusterability_monotone_under_separation(seed in any::<u64>(), push in 0.0f64..50.0) {
        let mut rng = Stream::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i / 4) as f64 * 6.0 + rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)])
            .collect();
        let part = Partition::from_labels((0..12).map(|i| (i, i / 4)));
        let ds = Dataset::from_rows(&rows).unwrap();
        let apart = Dataset::from_rows(&rows.iter().enumerate().map(|(i, r)| vec![r[0] + (i / 4) as f64 * push, r[1]]).collect::<Vec<_>>()).unwrap();
        if check_well_clusterable(&ds, &part).unwrap().verdict {
            prop_assert!(check_well_clusterable(&apart, &part).unwrap().verdict);
        }
    }

    #[test]
    fn dbscan_ignores_input_order(ds in points(30, 2), seed in any::<u64>(), eps in 1.0f64..20.0, min_samples in 1usize..5) {
        let mut rng = Stream::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut rng);
        let rows: Vec<Vec<f64>> = order.iter().map(|&p| ds.point(p).to_vec()).collect();
        let shuffled = Dataset::from_rows(&rows).unwrap();
        let params = DbscanParams::new(eps, min_samples).unwrap();
        let as_coords = |d: &Dataset, ids: &[usize]| {
            let mut v: Vec<Vec<i64>> = ids.iter().map(|&id| d.point_by_id(id).unwrap().iter().map(|&x| x as i64).collect()).collect();
            v.sort();
            v
        };
        let canon = |d: &Dataset| {
            let r = dbscan(d, params);
            let mut blocks: Vec<_> = r.clusters.blocks().iter().map(|b| as_coords(d, b)).collect();
            blocks.sort();
            (blocks, as_coords(d, &r.noise))
        };
        prop_assert_eq!(canon(&ds), canon(&shuffled));
    }
}

#[test]
fn tree_cost_ratio_stays_logarithmic() {
    let mut rng = stream(40, &[]);
    for d in 1..=3 {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..64.0)).collect())
            .collect();
        let ds = normalize(&Dataset::from_rows(&rows).unwrap()).unwrap().dataset;
        let (center, euclid) = opt_kmedian_discrete(&ds, 1, 30).unwrap();
        let mut total = 0.0;
        let mut bound = 0.0f64;
        for s in 0..200u64 {
            let t = build_rhst(&ds, &ShiftMode::Random, &mut stream(41, &[s])).unwrap();
            total += t.tree_cost(&center).unwrap();
            bound = bound.max(10.0 * d as f64 * t.root_side().log2());
        }
        let ratio = total / 200.0 / euclid;
        assert!(ratio <= bound, "d={d}: ratio {ratio} above {bound}");
    }
}

#[test]
fn line_instance_gaps_follow_formula() {
    for (n, d1) in [(10, 0.5), (57, 2.0), (300, 0.5)] {
        let xs = gen_line_instance(n, d1).unwrap().coords().to_vec();
        assert_eq!(xs[1] - xs[0], d1);
        for j in 2..n {
            let expect = 1.0 + (j - 1) as f64 * d1 / n as f64;
            assert!((xs[j] - xs[j - 1] - expect).abs() < 1e-9);
        }
    }
}

#[test]
fn tail_bound_holds_for_several_vectors() {
    let mut rng = Stream::seed_from_u64(50);
    for _ in 0..3 {
        let costs: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..10.0)).collect();
        let lambda = rng.random_range(0.2..2.0);
        let opt = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let draws = 40_000;
        let mut over = [0usize; 3];
        for _ in 0..draws {
            let u = costs[exp_mechanism_sample(&costs, lambda, &mut rng).unwrap()];
            for (t, o) in over.iter_mut().enumerate() {
                if u >= opt + lambda * ((costs.len() as f64).ln() + (t + 1) as f64) {
                    *o += 1;
                }
            }
        }
        for (t, o) in over.iter().enumerate() {
            assert!(*o as f64 / draws as f64 <= (-((t + 1) as f64)).exp() + 0.01);
        }
    }
}
