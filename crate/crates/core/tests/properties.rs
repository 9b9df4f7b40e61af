use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;
use prnustab::geometry::{corners_to_homography, decompose_fixed_vertex_at, BlockGeometry, Corner, CornerWarp};
use prnustab::pipeline::{classify, decide, Decision, PipelineConfig, Triage, ValidationParams};
use prnustab::prnu::correlation::compute_pce;
use prnustab::Field;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(w: usize, h: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(w, h, |_, _| StandardNormal.sample(&mut rng))
}

/// Unconditioned DLT: null vector of the 8x9 correspondence system via SVD.
fn dlt(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Matrix3<f64> {
    let mut a = DMatrix::<f64>::zeros(9, 9);
    for i in 0..4 {
        let [x, y] = src[i];
        let [u, v] = dst[i];
        let r = [
            [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u],
            [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v],
        ];
        for (k, row) in r.iter().enumerate() {
            for (j, val) in row.iter().enumerate() {
                a[(2 * i + k, j)] = *val;
            }
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.unwrap();
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let h = vt.row(imin);
    Matrix3::from_row_slice(&h.iter().copied().collect::<Vec<_>>())
}

fn warp_strategy(r: i32) -> impl Strategy<Value = CornerWarp> {
    prop::array::uniform8(-r..=r).prop_map(CornerWarp::from_components)
}

fn corner_strategy() -> impl Strategy<Value = Corner> {
    prop::sample::select(Corner::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fixed_vertex_decomposition_is_exact(w in warp_strategy(50), c in corner_strategy()) {
        let (rest, (sx, sy)) = decompose_fixed_vertex_at(&w, c);
        prop_assert_eq!(rest.d[c.index()], [0, 0]);
        prop_assert_eq!(rest.add(&CornerWarp::uniform(sx, sy)), w);
    }

    #[test]
    fn corner_homography_agrees_with_dlt(
        w in warp_strategy(12),
        ox in 0usize..800,
        oy in 0usize..400,
        size in 64usize..600,
        px in 0.0f64..1.0,
        py in 0.0f64..1.0,
    ) {
        let g = BlockGeometry::new((ox, oy), size);
        prop_assume!(w.is_valid(&g));
        let h = corners_to_homography(&w, &g).unwrap();
        let targets = w.targets(&g);
        for (s, t) in g.corners().iter().zip(&targets) {
            let (x, y) = h.apply(s[0], s[1]);
            prop_assert!((x - t[0]).abs() < 1e-6 && (y - t[1]).abs() < 1e-6);
        }
        let oracle = dlt(&g.corners(), &targets);
        let (x, y) = (ox as f64 + px * size as f64, oy as f64 + py * size as f64);
        let q = oracle * Vector3::new(x, y, 1.0);
        let (ex, ey) = (q[0] / q[2], q[1] / q[2]);
        let (gx, gy) = h.apply(x, y);
        prop_assert!((gx - ex).abs() < 1e-5 && (gy - ey).abs() < 1e-5, "{:?} vs {:?}", (gx, gy), (ex, ey));
    }

    #[test]
    fn pce_is_scale_invariant_and_tracks_shift(
        seed in 0u64..1000,
        a in 0.01f64..100.0,
        b in 0.01f64..100.0,
        dx in -10i64..=10,
        dy in -10i64..=10,
    ) {
        let k = noise(48, 48, seed);
        let x = k.roll(dx, dy);
        let base = compute_pce(&x, &k, 12, 2).unwrap();
        let scaled = compute_pce(&x.map(|v| a * v), &k.map(|v| b * v), 12, 2).unwrap();
        prop_assert_eq!(base.peak_xy, (dx, dy));
        prop_assert_eq!(scaled.peak_xy, (dx, dy));
        prop_assert!((base.pce - scaled.pce).abs() <= 1e-9 * base.pce);
    }

    #[test]
    fn decision_is_monotone(
        pces in prop::collection::vec(0.0f64..200.0, 0..8),
        t in 0.0f64..200.0,
        dt in 0.0f64..50.0,
        i in 0usize..8,
        bump in 0.0f64..100.0,
        min in 1usize..5,
    ) {
        let d = decide(&pces, t, min);
        if d == Decision::NoMatch {
            prop_assert_eq!(decide(&pces, t + dt, min), Decision::NoMatch);
            prop_assert_eq!(decide(&pces, t, min + 1), Decision::NoMatch);
        }
        if d == Decision::Match && !pces.is_empty() {
            let mut up = pces.clone();
            let j = i % up.len();
            up[j] += bump;
            prop_assert_eq!(decide(&up, t, min), Decision::Match);
        }
    }

    #[test]
    fn validation_is_monotone_in_every_parameter(
        pce in 0.0f64..100.0,
        subs in prop::array::uniform4(-5.0f64..20.0),
        v in 0u32..=40,
        n in 0usize..=4,
        s in 0u32..=5,
    ) {
        let p = ValidationParams { pce_vld: v as f64, n_sub: n, pce_sub: s as f64 };
        if !p.accepts(pce, &subs) {
            let stricter = [
                ValidationParams { pce_vld: p.pce_vld + 1.0, ..p },
                ValidationParams { n_sub: p.n_sub + 1, ..p },
                ValidationParams { pce_sub: p.pce_sub + 1.0, ..p },
            ];
            for q in stricter {
                prop_assert!(!q.accepts(pce, &subs));
            }
        }
    }

    #[test]
    fn triage_labels_partition_the_score_space(
        chk in prop::option::of(0.0f64..200.0),
        lite in 0.0f64..300.0,
    ) {
        let cfg = PipelineConfig::default();
        let label = classify(chk, lite, &cfg);
        let unstab = chk.is_some_and(|c| c >= cfg.stb_chk_threshold);
        let weak = !unstab && lite >= cfg.stb_lite_threshold;
        let strong = !unstab && !weak;
        prop_assert_eq!([unstab, weak, strong].iter().filter(|b| **b).count(), 1);
        let expected = if unstab {
            Triage::Unstabilized
        } else if weak {
            Triage::WeaklyStabilized
        } else {
            Triage::StronglyStabilized
        };
        prop_assert_eq!(label, expected);
    }
}
