use proptest::prelude::*;

use systematicity::dataset::{numerical_rank, split_indices};
use systematicity::experiment::{ExperimentConfig, RankSpec};
use systematicity::metrics::partitioned_norms;
use systematicity::net::{effective_map, init_network, TrainConfig};
use systematicity::rank_mc::enumerate_full_rank_probability;
use systematicity::theory::{
    analytic_svd, asymptotic_norms, deep_mode_value, mode_spectrum, shallow_mode_value, ModalBasis, TrajectoryConfig,
};
use systematicity::{build_dataset, covariances, Architecture, DatasetParams, Depth, FeatureChoice};

fn params() -> impl Strategy<Value = DatasetParams> {
    (1usize..=4)
        .prop_flat_map(|n_x| {
            (
                Just(n_x),
                0..=n_x,
                0usize..=3,
                0usize..=3,
                prop_oneof![Just(1.0), Just(2.0), 0.5f64..3.0],
            )
        })
        .prop_map(|(n_x, n_y, k_x, k_y, r)| DatasetParams { n_x, n_y, k_x, k_y, r })
        .prop_filter("valid", |p| p.validate().is_ok())
}

fn arch_for(p: &DatasetParams) -> impl Strategy<Value = Architecture> {
    let k_y = p.k_y;
    let mut options = vec![Just(Architecture::Dense).boxed()];
    if p.n_y > 0 && k_y > 0 {
        options.push(Just(Architecture::OutputPartitioned).boxed());
        options.push(
            (0..=k_y)
                .prop_map(move |l| Architecture::ImperfectPartition {
                    k_y_left: l,
                    k_y_right: k_y - l,
                })
                .boxed(),
        );
        if p.k_x > 0 {
            options.push(Just(Architecture::FullyPartitioned).boxed());
        }
    }
    proptest::strategy::Union::new(options)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_svd_reconstructs_covariances(p in params(), seed in 0u64..50) {
        let d = build_dataset(p, FeatureChoice::SeededRandom, seed).unwrap();
        let svd = analytic_svd(&d).unwrap();
        let (yx, x) = svd.reconstruction_residuals(&d);
        let (u, v) = svd.orthonormality_residuals();
        prop_assert!(yx < 1e-9 && x < 1e-9 && u < 1e-9 && v < 1e-9, "{yx} {x} {u} {v}");
    }

    #[test]
    fn input_covariance_rank(p in params()) {
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap();
        let rank = covariances(&d).sigma_x.rank(1e-8);
        let expected = if p.k_x >= 1 { p.patterns() } else { p.n_x };
        prop_assert_eq!(rank, expected);
    }

    #[test]
    fn multiplicities_count_the_nonzero_singular_values(p in params()) {
        let s = mode_spectrum(&p);
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap();
        let rank = numerical_rank(&covariances(&d).sigma_yx, 1e-9);
        prop_assert_eq!(s.mult1 + s.mult2 + s.mult3, rank);
        if p.k_x > 0 && p.k_y > 0 {
            prop_assert_eq!(rank, p.patterns());
        }
        prop_assert!(s.lambda1 >= s.lambda2);
    }

    #[test]
    fn deep_trajectory_is_monotone_and_bounded(
        lambda in 0.05f64..2.0, delta in 0.05f64..2.0, pi0 in 1e-6f64..1e-2, eps in 1e-3f64..1e-1,
    ) {
        let cfg = TrajectoryConfig::new(eps, 3, pi0).unwrap();
        let star = lambda / delta;
        let mut prev = pi0;
        for step in 0..200 {
            let t = step as f64 * 10.0;
            let v = deep_mode_value(lambda, delta, &cfg, t).unwrap();
            let s = shallow_mode_value(lambda, delta, &cfg, t).unwrap();
            prop_assert!(v >= prev - 1e-12 && v <= star.max(pi0) + 1e-12);
            prop_assert!(s >= pi0.min(star) - 1e-12 && s <= star.max(pi0) + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn converged_basis_gives_asymptotic_norms(p in params().prop_filter("has targets", |p| p.k_x > 0 || p.n_y > 0)) {
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap();
        let arch = Architecture::Dense;
        let b = ModalBasis::new(&d, arch).unwrap();
        let n = partitioned_norms(&b.reconstruct(&b.asymptotes()).unwrap(), &d.layout).unwrap().to_array();
        let e = asymptotic_norms(&p, arch).unwrap();
        for k in 0..4 {
            prop_assert!((n[k] - e[k]).abs() < 1e-9, "{:?} vs {:?}", n, e);
        }
    }

    #[test]
    fn modular_maps_respect_their_connectivity(
        (p, arch) in params().prop_filter("splittable", |p| p.n_y > 0 && p.k_y > 0).prop_flat_map(|p| (Just(p), arch_for(&p))),
        seed in 0u64..20,
    ) {
        let d = build_dataset(p, FeatureChoice::DeterministicFirst, 0).unwrap();
        let cfg = TrainConfig { seed, hidden_width: Some(p.patterns() + 2), ..TrainConfig::default() };
        let net = init_network(&d, arch, Depth::Deep, &cfg).unwrap();
        let norms = partitioned_norms(&effective_map(&net), &d.layout).unwrap();
        let total = effective_map(&net).norm();
        let sum_sq: f64 = norms.to_array().iter().map(|v| v * v).sum();
        prop_assert!((sum_sq.sqrt() - total).abs() < 1e-12);
        if arch == Architecture::FullyPartitioned {
            prop_assert_eq!(norms.noncomp_comp, 0.0);
            prop_assert_eq!(norms.comp_noncomp, 0.0);
        }
        let mixes_inputs = matches!(arch, Architecture::OutputPartitioned | Architecture::ImperfectPartition { k_y_left: 0, .. });
        if mixes_inputs && p.k_x > 0 {
            prop_assert!(norms.noncomp_comp > 0.0);
        }
    }

    #[test]
    fn split_partitions_the_examples(n in 1usize..64, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let n_train = 1 + ((n - 1) as f64 * frac) as usize;
        let (tr, te) = split_indices(n, n_train, seed).unwrap();
        prop_assert_eq!(tr.len(), n_train);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(split_indices(n, n_train, seed).unwrap().0, tr);
    }

    #[test]
    fn architecture_text_round_trips(l in 0usize..10, r in 0usize..10) {
        for a in [Architecture::Dense, Architecture::Shallow, Architecture::OutputPartitioned,
                  Architecture::FullyPartitioned, Architecture::ImperfectPartition { k_y_left: l, k_y_right: r }] {
            prop_assert_eq!(a.to_string().parse::<Architecture>().unwrap(), a);
        }
    }

    #[test]
    fn config_toml_round_trips(seed in any::<u64>(), trials in 1usize..10_000, n in 1usize..=6, repeats in 1usize..5) {
        let cfg = ExperimentConfig {
            seed,
            repeats,
            rank: Some(RankSpec { features: vec![n], trials, sizes: None }),
            ..systematicity::experiment::preset("rank-tables").unwrap()
        };
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}

#[test]
fn enumeration_is_monotone_in_sample_size() {
    for n in 1..=4 {
        let probs: Vec<f64> = (1..=1 << n)
            .map(|k| enumerate_full_rank_probability(n, k).unwrap())
            .collect();
        assert!(probs.windows(2).all(|w| w[0] <= w[1] + 1e-15), "{probs:?}");
        assert_eq!(*probs.last().unwrap(), 1.0);
        assert!(probs[..n - 1].iter().all(|&p| p == 0.0));
    }
}
