use hfactor::exact::SolveOutcome;
use hfactor::{
    analyze, brute_force_oracle, cheapest_copy, enumerate_copies, min_cover, min_factor, parse_named,
    sample_instance, GraphH, Mode, WeightDistribution,
};
use proptest::prelude::*;

fn pattern() -> impl Strategy<Value = GraphH> {
    (2usize..=4)
        .prop_flat_map(|v| {
            let pairs: Vec<(usize, usize)> = (0..v).flat_map(|a| (a + 1..v).map(move |b| (a, b))).collect();
            let m = pairs.len();
            (Just(pairs), proptest::collection::vec(any::<bool>(), m))
        })
        .prop_filter_map("needs a valid pattern", |(pairs, keep)| {
            let edges: Vec<_> = pairs.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| *p).collect();
            let v = pairs.iter().map(|p| p.1 + 1).max().unwrap();
            GraphH::new(v, edges, "random").ok()
        })
}

fn named() -> impl Strategy<Value = GraphH> {
    prop::sample::select(vec!["complete:2", "complete:3", "path:3", "lollipop:3,1", "cycle:4"])
        .prop_map(|s| parse_named(s).unwrap())
}

/// Automorphisms by trying every vertex permutation.
fn brute_automorphisms(h: &GraphH) -> u64 {
    let v = h.vertex_count();
    let edges: std::collections::BTreeSet<_> = h.edges().iter().copied().collect();
    let mut perm: Vec<usize> = (0..v).collect();
    let mut count = 0;
    permute(&mut perm, 0, &mut |p| {
        let ok = h.edges().iter().all(|&(a, b)| edges.contains(&(p[a].min(p[b]), p[a].max(p[b]))));
        count += ok as u64;
    });
    count
}

fn permute(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, f);
        p.swap(i, j);
    }
}

fn weight(outcome: &SolveOutcome) -> f64 {
    outcome.weight()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn densest_subgraph_dominates(h in pattern()) {
        let r = analyze(&h).unwrap();
        prop_assert!(r.d_star >= r.d_h);
        prop_assert!(r.d_star >= r.delta);
    }

    #[test]
    fn copy_count_matches_falling_factorial(h in pattern(), n in 4usize..=8, seed in 0u64..1000) {
        let inst = sample_instance(n, WeightDistribution::EXP1, seed).unwrap();
        let v = h.vertex_count() as u64;
        let falling: u64 = (0..v).map(|i| n as u64 - i).product();
        let aut = brute_automorphisms(&h);
        prop_assert_eq!(analyze(&h).unwrap().aut_count, aut as u128);
        let index = enumerate_copies(&h, &inst, f64::INFINITY).unwrap();
        prop_assert_eq!(index.copies.len() as u64, falling / aut);
    }

    #[test]
    fn cheapest_copy_is_minimum(h in pattern(), n in 4usize..=8, seed in 0u64..1000) {
        let inst = sample_instance(n, WeightDistribution::EXP1, seed).unwrap();
        let best = cheapest_copy(&h, &inst).unwrap();
        let index = enumerate_copies(&h, &inst, f64::INFINITY).unwrap();
        let min = index
            .copies
            .iter()
            .map(|c| c.edges.iter().map(|&(a, b)| inst.weight(a, b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((best.weight - min).abs() <= 1e-12 * min.max(1.0));
    }

    #[test]
    fn exact_matches_oracle(h in named(), n in 4usize..=8, seed in 0u64..10_000, extra in 0usize..3, cover in any::<bool>()) {
        let v = h.vertex_count();
        prop_assume!(n >= v);
        let inst = sample_instance(n, WeightDistribution::Uniform, seed).unwrap();
        let k = (n % v + extra).min(n);
        let (fast, slow) = if cover {
            (min_cover(&inst, &h, k, f64::INFINITY).unwrap(), brute_force_oracle(&inst, &h, Mode::Cover, k, f64::INFINITY).unwrap())
        } else {
            (min_factor(&inst, &h, k, f64::INFINITY).unwrap(), brute_force_oracle(&inst, &h, Mode::Factor, k, f64::INFINITY).unwrap())
        };
        prop_assert_eq!(weight(&fast).to_bits(), weight(&slow).to_bits());
    }

    #[test]
    fn cover_never_exceeds_factor(h in named(), n in 4usize..=8, seed in 0u64..10_000) {
        let v = h.vertex_count();
        prop_assume!(n >= v);
        let inst = sample_instance(n, WeightDistribution::EXP1, seed).unwrap();
        for k in [n % v, n % v + 1] {
            let f = weight(&min_factor(&inst, &h, k, f64::INFINITY).unwrap());
            let c = weight(&min_cover(&inst, &h, k, f64::INFINITY).unwrap());
            prop_assert!(c <= f);
        }
    }

    #[test]
    fn tighter_cap_never_helps(seed in 0u64..10_000, cap in 0.05f64..3.0) {
        let h = parse_named("complete:3").unwrap();
        let inst = sample_instance(9, WeightDistribution::EXP1, seed).unwrap();
        let free = min_factor(&inst, &h, 0, f64::INFINITY).unwrap();
        let capped = min_factor(&inst, &h, 0, cap).unwrap();
        prop_assert!(weight(&capped) >= weight(&free));
        let loose = min_factor(&inst, &h, 0, cap * 2.0).unwrap();
        prop_assert!(weight(&capped) >= weight(&loose));
        if let Some(sol) = free.solution() {
            let heaviest = sol.copies.iter().flat_map(|c| c.edges.iter()).map(|&(a, b)| inst.weight(a, b)).fold(0.0, f64::max);
            if heaviest <= cap {
                prop_assert_eq!(weight(&capped).to_bits(), weight(&free).to_bits());
            }
        }
    }

    #[test]
    fn partial_factor_scales_down(seed in 0u64..10_000) {
        // For k < m < n on the grid: F(m) <= (n - m)/(n - k) F(k).
        let h = parse_named("complete:3").unwrap();
        let n = 12;
        let inst = sample_instance(n, WeightDistribution::EXP1, seed).unwrap();
        let f: Vec<f64> = (0..n).step_by(3).map(|k| weight(&min_factor(&inst, &h, k, f64::INFINITY).unwrap())).collect();
        for (i, &fk) in f.iter().enumerate() {
            for (j, &fm) in f.iter().enumerate().skip(i + 1) {
                let (k, m) = (3 * i, 3 * j);
                let bound = (n - m) as f64 / (n - k) as f64 * fk;
                prop_assert!(fm <= bound * (1.0 + 1e-12), "F({m}) = {fm} > {bound}");
            }
        }
    }
}
