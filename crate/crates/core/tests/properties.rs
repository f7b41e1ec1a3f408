use mg_core::bodies::{edge_functional, regular_simplex, sample_body, BodyKind, BodySpec};
use mg_core::frames::{build_frame, frame_functionals, walsh_block, FrameKind};
use mg_core::harness::{fit_power_law, parse_csv, to_csv, ResultRow};
use mg_core::rng::substream;
use mg_core::stein::{conditional_checks, reflect_pair, transpose_pair, PairSpec};
use proptest::prelude::*;

fn body_kind() -> impl Strategy<Value = BodyKind> {
    prop_oneof![
        Just(BodyKind::ProductUniform),
        Just(BodyKind::ProductLaplace),
        Just(BodyKind::ProductGaussian),
        (1.0f64..6.0).prop_map(BodyKind::LpBall),
        Just(BodyKind::LpBall(f64::INFINITY)),
        Just(BodyKind::Simplex),
    ]
}

fn frame_kind() -> impl Strategy<Value = FrameKind> {
    prop_oneof![
        Just(FrameKind::Walsh),
        Just(FrameKind::Haar),
        Just(FrameKind::Coordinate)
    ]
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

fn opt() -> impl Strategy<Value = Option<f64>> {
    proptest::option::of(finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_are_orthonormal(kind in frame_kind(), n in 1usize..70, kf in 0.0f64..1.0, seed in any::<u64>()) {
        let cap = if kind == FrameKind::Walsh { walsh_block(n) } else { n };
        let k = 1 + ((cap - 1) as f64 * kf) as usize;
        let frame = build_frame(kind, n, k, &mut substream(seed, 0)).unwrap();
        prop_assert!(frame.orthonormality_residual() < 1e-10);
        let f = frame_functionals(&frame, None).unwrap();
        // ||theta||_4^2 lies between n^{-1/2} and 1 for a unit vector
        prop_assert!(f.l4_sum <= k as f64 + 1e-12);
        prop_assert!(f.l4_sum >= k as f64 / (n as f64).sqrt() - 1e-12);
    }

    #[test]
    fn frames_are_deterministic(n in 2usize..40, seed in any::<u64>()) {
        let a = build_frame(FrameKind::Haar, n, 2.min(n), &mut substream(seed, 9)).unwrap();
        let b = build_frame(FrameKind::Haar, n, 2.min(n), &mut substream(seed, 9)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn samples_stay_in_the_body(kind in body_kind(), n in 2usize..30, seed in any::<u64>()) {
        let batch = sample_body(BodySpec::new(kind, n), &mut substream(seed, 1), 20).unwrap();
        for x in batch.iter() {
            prop_assert!(x.iter().all(|v| v.is_finite()));
            match kind {
                BodyKind::ProductUniform => prop_assert!(x.iter().all(|v| v.abs() <= 3f64.sqrt() + 1e-12)),
                BodyKind::Simplex => {
                    let g = regular_simplex(n).unwrap();
                    let s = g.scale();
                    // <x, v_l> = s (c_l (n+1)/n - 1/n) for barycentric weights c
                    let lower = -s / n as f64 - 1e-9 * s;
                    for p in g.vertex_products(x) {
                        prop_assert!(p >= lower, "{p} < {lower}");
                    }
                }
                _ => {}
            }
        }
    }

    #[test]
    fn stein_conditions_hold_exactly(kind in body_kind(), frame in frame_kind(), n in 2usize..20, seed in any::<u64>()) {
        let cap = if frame == FrameKind::Walsh { walsh_block(n) } else { n };
        let k = cap.min(3);
        let f = build_frame(frame, n, k, &mut substream(seed, 2)).unwrap();
        let spec = PairSpec::new(BodySpec::new(kind, n), f).unwrap();
        let batch = sample_body(spec.body(), &mut substream(seed, 3), 3).unwrap();
        for x in batch.iter() {
            let r = conditional_checks(x, &spec).unwrap();
            prop_assert!(r.linearity < 1e-10 && r.second_moment < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn pair_increments_preserve_norm(n in 2usize..20, i in 0usize..21, j in 0usize..21, seed in any::<u64>()) {
        let (i, j) = (i % (n + 1), j % (n + 1));
        prop_assume!(i != j);
        let g = regular_simplex(n).unwrap();
        let f = build_frame(FrameKind::Coordinate, n, n, &mut substream(seed, 0)).unwrap();
        let x = sample_body(BodySpec::new(BodyKind::Simplex, n), &mut substream(seed, 4), 1).unwrap();
        let x = x.point(0);
        // a full coordinate frame makes W the point itself
        let (w, wp) = transpose_pair(x, i, j, &g, &f).unwrap();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        prop_assert!((norm(&w) - norm(&wp)).abs() < 1e-12 * (1.0 + norm(&w)));
        // swapping the two vertices twice is the identity
        let xij = edge_functional(&g, x, i, j).unwrap();
        let xji = edge_functional(&g, x, j, i).unwrap();
        prop_assert!((xij + xji).abs() < 1e-12);
        let (w, wp) = reflect_pair(x, i % n, &f).unwrap();
        prop_assert!((norm(&w) - norm(&wp)).abs() < 1e-12 * (1.0 + norm(&w)));
    }

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in proptest::collection::vec(
            ((finite(), opt(), finite(), finite()), (opt(), opt(), opt(), opt(), opt(), opt(), opt()), 1usize..5000, any::<u64>()),
            0..8,
        )
    ) {
        let rows: Vec<ResultRow> = rows
            .into_iter()
            .map(|((l4, sq, d1, tv), (d1c, tvc, w, wse, ks, tvh, rt), n, seed)| ResultRow {
                body: "lp-ball:1.5".into(),
                n,
                k: 1,
                frame: "haar".into(),
                seed,
                samples: 100_000,
                l4_sum: l4,
                simplex_quartic: sq,
                bound_d1_thm: d1,
                bound_dtv_thm: tv,
                bound_d1_cor: d1c,
                bound_dtv_cor: tvc,
                emp_w1: w,
                emp_w1_se: wse,
                emp_ks: ks,
                emp_tv: tvh,
                runtime_ms: rt,
            })
            .collect();
        let text = to_csv(&rows);
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            let bits = |r: &ResultRow| {
                let o = |v: Option<f64>| v.map(f64::to_bits);
                (r.l4_sum.to_bits(), o(r.simplex_quartic), r.bound_d1_thm.to_bits(), r.bound_dtv_thm.to_bits(),
                 o(r.bound_d1_cor), o(r.bound_dtv_cor), o(r.emp_w1), o(r.emp_w1_se), o(r.emp_ks), o(r.emp_tv), o(r.runtime_ms))
            };
            prop_assert_eq!(bits(a), bits(b));
            prop_assert_eq!((&a.body, a.n, a.k, &a.frame, a.seed, a.samples), (&b.body, b.n, b.k, &b.frame, b.seed, b.samples));
        }
        prop_assert_eq!(to_csv(&back), text);
    }

    #[test]
    fn power_law_fit_recovers_exponent(slope in -2.0f64..1.0, scale in 0.01f64..100.0) {
        let pts: Vec<(f64, f64)> = [10.0, 30.0, 100.0, 1000.0].iter().map(|&n: &f64| (n, scale * n.powf(slope))).collect();
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-9);
    }
}
