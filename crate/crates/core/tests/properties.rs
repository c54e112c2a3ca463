//! Invariants checked on randomly grown clusters and runs.

use dbm_lab::analysis::{beurling_integral_check, statistical_sum};
use dbm_lab::cli::{read_trace, trace_to_string};
use dbm_lab::growth::{grow, GrowthConfig, MeasureMode};
use dbm_lab::lattice::{neighbors, Cluster, Dim, Site};
use dbm_lab::oracle::{enumerate_dbm, point_group};
use dbm_lab::potential::exact::SetSolver;
use dbm_lab::potential::exact::increment_identity_2d;
use dbm_lab::potential::{capacity, capacity_increment, harmonic_measure_exact};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cluster(dim: Dim, n: usize, seed: u64) -> Cluster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Cluster::new(dim);
    for _ in 0..n {
        let b = c.boundary_sorted();
        c.attach(b[rng.gen_range(0..b.len())]).unwrap();
    }
    c
}

fn dim_of(three: bool) -> Dim {
    if three {
        Dim::Three
    } else {
        Dim::Two
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_profiles_are_distributions_on_the_boundary(seed in 0u64..1_000_000, n in 0usize..25, three: bool) {
        let c = random_cluster(dim_of(three), n, seed);
        let p = harmonic_measure_exact(&c).unwrap();
        prop_assert!((p.total() - 1.0).abs() < 1e-9);
        prop_assert!((statistical_sum(&p, 1.0) - 1.0).abs() < 1e-9);
        for (s, w) in &p.entries {
            prop_assert!(*w >= 0.0);
            prop_assert!(c.is_boundary(*s));
        }
    }

    #[test]
    fn exact_profiles_are_equivariant(seed in 0u64..1_000_000, n in 1usize..15, three: bool, pick in 0usize..48) {
        let dim = dim_of(three);
        let c = random_cluster(dim, n, seed);
        let group = point_group(dim);
        let g = &group[pick % group.len()];
        let image: Vec<Site> = c.sites_sorted().into_iter().map(|s| g(s)).collect();
        let moved = Cluster::from_sites(dim, &image).unwrap();
        let p = harmonic_measure_exact(&c).unwrap();
        let q = harmonic_measure_exact(&moved).unwrap();
        for (s, w) in &p.entries {
            prop_assert!((q.weight(g(*s)) - w).abs() < 1e-9);
        }
    }

    #[test]
    fn green_function_properties(seed in 0u64..1_000_000, n in 0usize..6, three: bool) {
        let dim = dim_of(three);
        let c = random_cluster(dim, n, seed);
        let solver = SetSolver::new(dim, &c.sites_sorted()).unwrap();
        let b = c.boundary_sorted();
        let (x, y) = (b[0], b[b.len() - 1]);
        let gxy = solver.green(x, y).unwrap();
        // Symmetric and positive off A.
        prop_assert!(gxy > 0.0);
        prop_assert!((gxy - solver.green(y, x).unwrap()).abs() < 1e-9);
        // Zero on A.
        prop_assert_eq!(solver.green(Site::ORIGIN, y).unwrap(), 0.0);
        // Discrete Laplacian is minus the unit mass at y, with the factor 1/(2d).
        for z in [x, y] {
            let mean = neighbors(dim, z).map(|m| solver.green(m, y).unwrap()).sum::<f64>() / dim.degree() as f64;
            let expect = if z == y { -1.0 } else { 0.0 };
            prop_assert!((mean - solver.green(z, y).unwrap() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn capacity_increments_follow_the_lemmas(seed in 0u64..1_000_000, n in 0usize..12, three: bool, pick in 0usize..1000) {
        let dim = dim_of(three);
        let c = random_cluster(dim, n, seed);
        let b = c.boundary_sorted();
        let x = b[pick % b.len()];
        let inc = capacity_increment(&c, x).unwrap();
        prop_assert!(inc.lemma_form >= -1e-12);
        if let Some(r) = inc.ratio {
            prop_assert!(r > 0.0 && r.is_finite());
        }
        if dim == Dim::Two {
            let (lhs, rhs) = increment_identity_2d(&c, x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-6 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn capacity_does_not_depend_on_the_translation(seed in 0u64..1_000_000, n in 1usize..12, pick in 0usize..1000) {
        let c = random_cluster(Dim::Two, n, seed);
        let sites = c.sites_sorted();
        let z = sites[pick % sites.len()];
        let shifted: Vec<Site> = sites.iter().map(|s| s.sub(z)).collect();
        let moved = Cluster::from_sites(Dim::Two, &shifted).unwrap();
        let (a, b) = (capacity(&c).unwrap().value, capacity(&moved).unwrap().value);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn exact_runs_never_attach_zero_measure_sites(seed in 0u64..1_000_000, eta in 0.5f64..3.0) {
        let cfg = GrowthConfig::new(Dim::Two, eta, 30, MeasureMode::Exact, seed);
        let t = grow(&cfg).unwrap();
        for s in &t.steps {
            prop_assert!(s.omega.unwrap() > 0.0);
        }
        let rep = beurling_integral_check(&t, 0.5).unwrap();
        prop_assert!(rep.am_gm_holds);
    }

    #[test]
    fn radius_is_monotone_and_traces_round_trip(seed in 0u64..1_000_000, three: bool, every in 0u64..20) {
        let mut cfg = GrowthConfig::new(dim_of(three), 1.0, 150, MeasureMode::DlaFast, seed);
        cfg.omega_every = every;
        let t = grow(&cfg).unwrap();
        prop_assert!(t.steps.windows(2).all(|w| w[0].r <= w[1].r));
        let text = trace_to_string(&t, None);
        let (_, back) = read_trace(text.as_bytes()).unwrap();
        prop_assert_eq!(&back.steps, &t.steps);
        prop_assert_eq!(&back.config, &t.config);
        prop_assert_eq!(trace_to_string(&back, None), text);
    }
}

#[test]
fn oracle_distributions_are_normalized_and_symmetric() {
    for (dim, depth) in [(Dim::Two, 4), (Dim::Three, 3)] {
        for eta in [0.0, 1.0, 2.5] {
            let d = enumerate_dbm(dim, eta, depth).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-10);
            for class in &d.classes {
                let members: Vec<f64> = d
                    .entries
                    .iter()
                    .filter(|e| d.classes[e.class].representative == class.representative)
                    .map(|e| e.probability)
                    .collect();
                assert_eq!(members.len(), class.members);
                let first = members[0];
                assert!(members.iter().all(|p| (p - first).abs() < 1e-12));
            }
        }
    }
}

#[test]
fn cubic_capacity_tracks_radius() {
    // Cap(A) lies between R/ln R and R up to constants; on a grown cluster
    // both ratios stay of order one.
    let mut cfg = GrowthConfig::new(Dim::Three, 1.0, 600, MeasureMode::DlaFast, 19);
    cfg.capacity_checkpoint_every = 200;
    let t = grow(&cfg).unwrap();
    let mut seen = 0;
    for s in t.steps.iter().filter(|s| s.cap.is_some()) {
        let cap = s.cap.unwrap();
        let upper = cap / s.r;
        let lower = cap * s.r.ln() / s.r;
        assert!(upper < 2.0 && lower > 0.5, "R {} Cap {cap}", s.r);
        seen += 1;
    }
    assert_eq!(seen, 3);
}
