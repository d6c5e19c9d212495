mod common;

use common::*;
use mvhash::anchor_graph::AnchorGraph;
use mvhash::codes::BinaryCodes;
use mvhash::dataset::{corrupt, synth_multiview, CorruptionKind, CorruptionSpec};
use mvhash::eval::{self, ApNormalization};
use mvhash::kernel::{build_kernel_matrix, self_tuning_sigma};
use mvhash::math::{self, SvtBackend};
use mvhash::oos::inductive_embed;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn sized_matrix(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| matrix(r, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shrink_is_odd_and_contracts(x in -10.0..10.0f64, rho in 0.0..5.0f64) {
        let s = math::scalar_shrink(x, rho).unwrap();
        prop_assert_eq!(math::scalar_shrink(-x, rho).unwrap(), -s);
        prop_assert!(s.abs() <= x.abs());
        prop_assert!(s.abs() == (x.abs() - rho).max(0.0));
    }

    #[test]
    fn svt_nuclear_identity(m in sized_matrix(9), tau in 0.0..2.0f64) {
        let sv = math::singular_values(&m).unwrap();
        let want: f64 = sv.iter().map(|s| (s - tau).max(0.0)).sum();
        for backend in [SvtBackend::Exact, SvtBackend::Gram, SvtBackend::Auto] {
            let (q, n) = math::svt_nuclear(&m, tau, backend).unwrap();
            prop_assert!((n - want).abs() <= 1e-8 * (1.0 + want));
            prop_assert!((nuclear(&q) - want).abs() <= 1e-8 * (1.0 + want));
        }
    }

    #[test]
    fn l21_columns_stay_parallel(c in sized_matrix(7), kappa in 0.0..3.0f64) {
        let e = math::col_l21_prox(&c, kappa).unwrap();
        for j in 0..c.ncols() {
            let (cj, ej) = (c.column(j), e.column(j));
            prop_assert!(ej.norm() <= cj.norm() + 1e-12);
            prop_assert!((ej.norm() - (cj.norm() - kappa).max(0.0)).abs() <= 1e-12);
            if ej.norm() > 0.0 {
                prop_assert!((cj.dot(&ej) - cj.norm() * ej.norm()).abs() <= 1e-9 * (1.0 + cj.norm_squared()));
            }
        }
    }

    #[test]
    fn projections_are_idempotent(m in sized_matrix(6)) {
        let p = math::project_nonneg(&m);
        prop_assert_eq!(math::project_nonneg(&p), p.clone());
        let s = math::project_columns_simplex(&m).unwrap();
        let again = math::project_columns_simplex(&s).unwrap();
        prop_assert!((&s - &again).amax() <= 1e-12);
        for col in s.column_iter() {
            prop_assert!((col.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(col.iter().all(|&v| v >= 0.0));
        }
        let v: Vec<f64> = m.column(0).iter().copied().collect();
        let b = simplex_bisection(&v);
        let got = math::project_simplex(&v).unwrap();
        for (a, w) in got.iter().zip(&b) {
            prop_assert!((a - w).abs() <= 1e-9);
        }
    }

    #[test]
    fn kmeans_is_reproducible(m in matrix(3, 30), k in 1usize..6, seed in 0u64..1000) {
        let a = mvhash::kmeans::kmeans(&m, k, 10, seed).unwrap();
        let b = mvhash::kmeans::kmeans(&m, k, 10, seed).unwrap();
        prop_assert_eq!(a.centers, b.centers);
        prop_assert_eq!(a.assignments, b.assignments);
        for w in a.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn laplacian_is_psd(x in matrix(3, 15), u in matrix(3, 4), k in 1usize..4) {
        let g = AnchorGraph::build(&x, &u, k, None).unwrap();
        let s = g.dense_adjacency();
        let l = DMatrix::identity(15, 15) - &s;
        let eig = SymmetricEigen::new(l);
        prop_assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10));
        for i in 0..15 {
            prop_assert!((s.row(i).sum() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn kernel_entries_in_unit_interval(x in matrix(2, 10), z in matrix(2, 4), s1 in 0.5..3.0f64, grow in 1.0..4.0f64) {
        let a = build_kernel_matrix(&x, &z, s1).unwrap();
        let b = build_kernel_matrix(&x, &z, s1 * grow).unwrap();
        prop_assert!(a.iter().all(|&v| v > 0.0 && v <= 1.0));
        for (va, vb) in a.iter().zip(b.iter()) {
            prop_assert!(vb >= va);
        }
        if let Ok(s) = self_tuning_sigma(&x, &z, 2) {
            prop_assert!(s > 0.0);
        }
    }

    #[test]
    fn metrics_invariant_to_shared_bit_flips(seed in 0u64..500, mask in prop::collection::vec(any::<bool>(), 12)) {
        let (q, db, ql, dl) = metric_instance(&mut rng(seed), 5, 40, 12, 3);
        let flip = |c: &Vec<Vec<i8>>| -> Vec<Vec<i8>> {
            c.iter().map(|row| row.iter().zip(&mask).map(|(&b, &f)| if f { -b } else { b }).collect()).collect()
        };
        let a = eval::evaluate(&codes(&q), &codes(&db), &ql, &dl, 10, 2, ApNormalization::Database).unwrap();
        let b = eval::evaluate(&codes(&flip(&q)), &codes(&flip(&db)), &ql, &dl, 10, 2, ApNormalization::Database).unwrap();
        prop_assert_eq!(a.map, b.map);
        prop_assert_eq!(a.lookup, b.lookup);
        prop_assert_eq!(a.pr_curve, b.pr_curve);
    }

    #[test]
    fn corruption_keeps_shapes(frac in 0.0..1.0f64, seed in 0u64..100, block in any::<bool>()) {
        let ds = synth_multiview(3, 5, &[4, 7], 0.1, seed).unwrap();
        let kind = if block { CorruptionKind::BlockZero } else { CorruptionKind::GaussianFraction };
        let out = corrupt(&ds, &CorruptionSpec::new(kind, frac, seed).unwrap()).unwrap();
        prop_assert_eq!(out.dims(), ds.dims());
        prop_assert_eq!(out.len(), ds.len());
        prop_assert_eq!(out.labels(), ds.labels());
        if block {
            for m in 0..2 {
                let len = mvhash::dataset::block_len(frac, ds.dims()[m]);
                for col in out.view(m).column_iter() {
                    prop_assert!(col.iter().filter(|&&v| v == 0.0).count() >= len);
                }
            }
        }
    }

    #[test]
    fn view_files_round_trip(rows in 1usize..6, cols in 0usize..9, seed in 0u64..100) {
        let mut r = rng(seed);
        let v = uniform(rows, cols, &mut r).map(|x| (x * 100.0 - 50.0) as f32);
        let mut buf = Vec::new();
        mvhash::io::write_view(&mut buf, &v).unwrap();
        let back = mvhash::io::read_view(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn codes_text_round_trip(n in 0usize..20, bits in 1usize..130, seed in 0u64..100) {
        let signs = random_signs(n, bits, &mut rng(seed));
        let c = if n == 0 { BinaryCodes::empty(bits) } else { codes(&signs) };
        let back = BinaryCodes::from_text(&c.to_text()).unwrap();
        prop_assert_eq!(back.len(), n);
        for i in 0..n {
            prop_assert_eq!(back.code(i), signs[i].clone());
        }
    }

    #[test]
    fn inductive_embedding_is_convex(x in matrix(2, 12), y in matrix(12, 3), q in prop::collection::vec(-3.0..3.0f64, 2), k in 1usize..12, sigma in 0.2..5.0f64, scale in 0.1..10.0f64) {
        let e = inductive_embed(&q, &x, &y, k, sigma).unwrap();
        for p in 0..3 {
            let col = y.column(p);
            prop_assert!(e[p] >= col.min() - 1e-12 && e[p] <= col.max() + 1e-12);
        }
        let qs: Vec<f64> = q.iter().map(|v| v * scale).collect();
        let scaled = inductive_embed(&qs, &(&x * scale), &y, k, sigma * scale).unwrap();
        prop_assert!((scaled - e).amax() <= 1e-9);
    }
}
