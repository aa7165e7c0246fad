use featorder_core::dataset::{apply_permutation, standardize, synth_blocks};
use featorder_core::foe::{analyze, DEFAULT_THRESHOLDS};
use featorder_core::linalg::Matrix;
use featorder_core::pipeline::{order_features, OrderingConfig};
use featorder_core::{rng, DataMatrix, Permutation};
use proptest::prelude::*;

fn random_matrix(n: usize, m: usize, seed: u64) -> DataMatrix {
    let mut r = rng::seeded(seed);
    let vals = (0..n * m).map(|_| 3.0 * rng::standard_normal(&mut r) + 1.0).collect();
    DataMatrix::from_values(Matrix::from_vec(n, m, vals)).unwrap()
}

fn shuffled(m: usize, seed: u64) -> Permutation {
    let mut r = rng::seeded(seed);
    let mut seq: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        seq.swap(i, rng::index(&mut r, i + 1));
    }
    Permutation::new(seq).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordering_is_a_deterministic_bijection(
        m in 3usize..14,
        k in 1usize..5,
        seed in 0u64..1000,
    ) {
        let x = random_matrix(60, m, seed);
        let cfg = OrderingConfig { clusters: k, seed, ..Default::default() };
        let a = order_features(&x, &cfg).unwrap();
        let mut seen = a.global.order.sequence().to_vec();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..m).collect::<Vec<_>>());
        prop_assert_eq!(a.global.local.len(), k);
        prop_assert!(a.coherence.is_finite() && a.coherence >= 0.0);
        let b = order_features(&x, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn local_quality_never_increases(m in 3usize..12, seed in 0u64..1000) {
        let x = synth_blocks(80, &[m / 2, m - m / 2], 0.5, seed).unwrap();
        let cfg = OrderingConfig { clusters: 3, seed, ..Default::default() };
        let r = order_features(&x, &cfg).unwrap();
        for local in &r.global.local {
            for w in local.quality_history.windows(2) {
                prop_assert!(w[1] <= w[0], "{:?}", local.quality_history);
            }
        }
    }

    #[test]
    fn standardize_is_idempotent(n in 3usize..40, m in 2usize..6, seed in 0u64..1000) {
        let x = random_matrix(n, m, seed);
        let z = standardize(&x);
        let zz = standardize(&z);
        for (a, b) in z.values().as_slice().iter().zip(zz.values().as_slice()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for j in 0..m {
            let col = z.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_round_trips(m in 2usize..10, seed in 0u64..1000) {
        let x = random_matrix(7, m, seed);
        let p = shuffled(m, seed ^ 0x5a5a);
        let back = apply_permutation(&apply_permutation(&x, &p).unwrap(), &p.inverse()).unwrap();
        prop_assert_eq!(back.values(), x.values());
        prop_assert_eq!(back.column_names(), x.column_names());
    }

    #[test]
    fn analysis_ignores_column_order(m in 2usize..12, seed in 0u64..1000) {
        let x = standardize(&random_matrix(50, m, seed));
        let y = apply_permutation(&x, &shuffled(m, seed + 1)).unwrap();
        let a = analyze(&x, &DEFAULT_THRESHOLDS, 2.0).unwrap();
        let b = analyze(&y, &DEFAULT_THRESHOLDS, 2.0).unwrap();
        prop_assert_eq!(&a.intrinsic_dims, &b.intrinsic_dims);
        prop_assert!((a.mean_idf - b.mean_idf).abs() < 1e-12);
        for w in a.intrinsic_dims.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(a.mean_idf > 0.0 && a.mean_idf <= 1.0);
        prop_assert!(a.psi_star > 0.0 && a.psi_star <= 1.0);
    }
}
