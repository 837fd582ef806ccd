use lmcf::benchmark::{center_error, overlap, sequence_curves, PRECISION_POINTS, SUCCESS_POINTS};
use lmcf::confidence::{apce_values, should_update, UpdateGateState};
use lmcf::detector::{exclusion_radius, find_peaks, respond, ResponseMap, MAX_SECONDARY_PEAKS};
use lmcf::feature_map::FeatureMap;
use lmcf::geometry::Rect;
use lmcf::labels::build_labels;
use lmcf::optimizer::{model_step_kernel, model_step_linear, Kernel, SlackState};
use lmcf::spectral;
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (2usize..12, 2usize..12).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(-5.0f64..5.0, w * h)))
}

fn feature_map(max_side: usize, max_d: usize) -> impl Strategy<Value = FeatureMap> {
    (2..=max_side, 2..=max_side, 1..=max_d).prop_flat_map(|(w, h, d)| {
        prop::collection::vec(-1.0f64..1.0, w * h * d).prop_map(move |v| FeatureMap::from_vec(w, h, d, v).unwrap())
    })
}

fn rect() -> impl Strategy<Value = Rect> {
    (-50.0f64..150.0, -50.0f64..150.0, 1.0f64..80.0, 1.0f64..80.0).prop_map(|(x, y, w, h)| Rect::new(x, y, w, h))
}

fn roll(values: &[f64], w: usize, h: usize, dx: usize, dy: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[((y + dy) % h) * w + (x + dx) % w] = values[y * w + x];
        }
    }
    out
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn apce_is_affine_invariant((_, _, v) in grid(), a in 0.01f64..100.0, b in -50.0f64..50.0) {
        let base = apce_values(&v);
        let moved: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        match (base, apce_values(&moved)) {
            (Some(p), Some(q)) => prop_assert!(close(p, q, 1e-9), "{p} vs {q}"),
            (None, None) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn apce_is_bounded_by_cell_count((_, _, v) in grid()) {
        if let Some(a) = apce_values(&v) {
            prop_assert!(a >= 1.0 - 1e-12 && a <= v.len() as f64 + 1e-9, "{a}");
        }
    }

    #[test]
    fn impulse_apce_is_cell_count(n in 2usize..400, at in 0usize..400, p in 0.001f64..1e6) {
        let mut v = vec![0.0; n];
        v[at % n] = p;
        prop_assert_eq!(apce_values(&v), Some(n as f64));
    }

    #[test]
    fn gate_is_monotone(
        history in prop::collection::vec((0.01f64..2.0, 1.0f64..500.0), 1..20),
        f in 0.0f64..2.0, a in 1.0f64..500.0, df in 0.0f64..1.0, da in 0.0f64..100.0,
    ) {
        let mut gate = UpdateGateState::new(0.7, 0.45).unwrap();
        for (hf, ha) in history {
            gate = should_update(&gate, hf, Some(ha)).1;
        }
        let (low, _) = should_update(&gate, f, Some(a));
        let (high, _) = should_update(&gate, f + df, Some(a + da));
        prop_assert!(!low || high);
    }

    #[test]
    fn gate_history_is_running_mean(history in prop::collection::vec((0.01f64..2.0, 1.0f64..500.0), 1..30)) {
        let mut gate = UpdateGateState::new(0.7, 0.45).unwrap();
        let (first, _) = should_update(&gate, history[0].0, Some(history[0].1));
        prop_assert!(first);
        for &(f, a) in &history {
            gate = should_update(&gate, f, Some(a)).1;
        }
        let n = history.len() as f64;
        prop_assert_eq!(gate.count, history.len() as u64);
        prop_assert!(close(gate.mean_fmax, history.iter().map(|h| h.0).sum::<f64>() / n, 1e-12));
        prop_assert!(close(gate.mean_apce, history.iter().map(|h| h.1).sum::<f64>() / n, 1e-12));
    }

    #[test]
    fn peak_set_invariants((w, h, v) in grid(), theta in 0.0f64..1.0) {
        let r = ResponseMap::from_values(w, h, v.clone()).unwrap();
        let set = find_peaks(&r, theta);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(set.primary().value, max);
        prop_assert!(set.secondary().len() <= MAX_SECONDARY_PEAKS);
        if max <= 0.0 {
            prop_assert!(set.secondary().is_empty());
        }
        let radius = exclusion_radius(w, h);
        for (i, p) in set.peaks.iter().enumerate().skip(1) {
            prop_assert!(p.value < max && p.value >= theta * max);
            prop_assert!(p.value <= set.peaks[i - 1].value);
            for q in &set.peaks[..i] {
                let dx = p.shift.0.abs_diff(q.shift.0);
                let dy = p.shift.1.abs_diff(q.shift.1);
                prop_assert!(dx.min(w - dx) > radius || dy.min(h - dy) > radius);
            }
        }
    }

    #[test]
    fn theta_one_keeps_only_the_maximum((w, h, v) in grid()) {
        let r = ResponseMap::from_values(w, h, v).unwrap();
        prop_assert!(find_peaks(&r, 1.0).secondary().is_empty());
    }

    #[test]
    fn peaks_follow_cyclic_shifts((w, h, v) in grid(), dx in 0usize..12, dy in 0usize..12, theta in 0.0f64..1.0) {
        let (dx, dy) = (dx % w, dy % h);
        let a = find_peaks(&ResponseMap::from_values(w, h, v.clone()).unwrap(), theta);
        let b = find_peaks(&ResponseMap::from_values(w, h, roll(&v, w, h, dx, dy)).unwrap(), theta);
        let moved: Vec<((usize, usize), f64)> =
            a.peaks.iter().map(|p| (((p.shift.0 + dx) % w, (p.shift.1 + dy) % h), p.value)).collect();
        let got: Vec<((usize, usize), f64)> = b.peaks.iter().map(|p| (p.shift, p.value)).collect();
        prop_assert_eq!(moved, got);
    }

    #[test]
    fn response_follows_candidate_shifts(x in feature_map(7, 3), dx in 0isize..7, dy in 0isize..7, gaussian in any::<bool>()) {
        let (w, h) = (x.width(), x.height());
        let labels = build_labels(w, h, (1.0, 1.0), 0.5).unwrap();
        let state = SlackState::initial(&labels);
        let model = if gaussian {
            model_step_kernel(&x, &state, 10.0, Kernel::Gaussian { sigma: 0.7 }).unwrap()
        } else {
            model_step_linear(&x, &state, 10.0).unwrap()
        };
        let z = x.cyclic_shift(1, 0);
        let base = respond(&model, &z).unwrap();
        let shifted = respond(&model, &z.cyclic_shift(dx, dy)).unwrap();
        let expected = roll(base.values(), w, h, dx as usize % w, dy as usize % h);
        for (a, b) in shifted.values().iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn dft_round_trip(x in feature_map(9, 3)) {
        let back = spectral::idft2(&spectral::dft2(&x).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(a in rect(), b in rect()) {
        let o = overlap(&a, &b);
        prop_assert!((0.0..=1.0).contains(&o));
        prop_assert_eq!(o, overlap(&b, &a));
        prop_assert_eq!(center_error(&a, &b), center_error(&b, &a));
        prop_assert!(close(overlap(&a, &a), 1.0, 1e-12));
    }

    #[test]
    fn curves_are_monotone(pairs in prop::collection::vec((rect(), prop::option::weighted(0.8, rect())), 1..40)) {
        let (pred, gt): (Vec<Rect>, Vec<Option<Rect>>) = pairs.into_iter().unzip();
        let Some(c) = sequence_curves(&pred, &gt) else {
            prop_assert!(gt.iter().all(Option::is_none));
            return Ok(());
        };
        prop_assert_eq!(c.precision_curve.len(), PRECISION_POINTS);
        prop_assert_eq!(c.success_curve.len(), SUCCESS_POINTS);
        prop_assert!(c.precision_curve.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(c.success_curve.windows(2).all(|s| s[0] >= s[1]));
        prop_assert!(c.precision_curve.iter().chain(&c.success_curve).all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((0.0..=1.0).contains(&c.auc));
    }
}
