use proptest::prelude::*;
use ptfc::amuse::{amuse_decompose, TaskRegressor};
use ptfc::exec::Execution;
use ptfc::harness::{cohens_kappa, is_correct, minmax_standardize, threshold_classify};
use ptfc::ptfce::{
    autocov_difference, band_median, draw_shifts, ptfce_estimate, spectral_ratio, AutocovDifference, BoldPanel,
    PtfceOptions,
};
use ptfc::signal::{
    boxcar_stimulus, circular_convolve, circular_shift, dft, dft_at_harmonic, fourier_grid, FrequencyBand, HrfSpec,
    Interval, SampledSignal, TimeGrid,
};
use ptfc::stats::lower_median;

const POINTS: usize = 64;

fn grid() -> TimeGrid {
    TimeGrid::new(0.72, POINTS).unwrap()
}

fn signal(values: Vec<f64>) -> SampledSignal {
    let g = TimeGrid::new(0.72, values.len()).unwrap();
    SampledSignal::new(g, values).unwrap()
}

fn stimulus() -> SampledSignal {
    boxcar_stimulus(&[Interval::new(4.0, 12.0), Interval::new(24.0, 32.0)], &grid()).unwrap()
}

/// Two-node panel: subject amplitudes times the convolved task plus noise.
fn panel(amps: &[(f64, f64)], noise: &[f64]) -> BoldPanel {
    let reg = TaskRegressor::new(&stimulus(), &HrfSpec::canonical()).unwrap();
    let x = reg.convolved().values();
    let mut data = Vec::with_capacity(amps.len() * 2 * POINTS);
    for (w, &(a, b)) in amps.iter().enumerate() {
        for (node, amp) in [a, b].into_iter().enumerate() {
            let off = (w * 2 + node) * POINTS;
            data.extend((0..POINTS).map(|t| 100.0 + amp * x[t] + noise[(off + t) % noise.len()]));
        }
    }
    BoldPanel::new(
        grid(),
        vec!["a".into(), "b".into()],
        (0..amps.len()).map(|w| format!("s{w}")).collect(),
        data,
    )
    .unwrap()
}

fn panel_inputs() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>)> {
    (
        prop::collection::vec((1.0..20.0f64, 1.0..20.0f64), 3..7),
        prop::collection::vec(-1.0..1.0f64, 2 * 7 * POINTS),
    )
}

fn estimate(p: &BoldPanel, seed: u64, exec: Execution) -> ptfc::ptfce::PtfcEstimate {
    let hrf = HrfSpec::canonical();
    let opts = PtfceOptions { execution: exec, ..PtfceOptions::default() };
    ptfce_estimate(p, "a", "b", &stimulus(), &hrf, &hrf, seed, &opts).unwrap()
}

fn finite_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_commutes(f in finite_vec(2..24), seed in any::<u64>()) {
        let g: Vec<f64> = f.iter().enumerate().map(|(i, v)| v * 0.5 + (seed.wrapping_add(i as u64) % 7) as f64).collect();
        let a = circular_convolve(&signal(f.clone()), &signal(g.clone())).unwrap();
        let b = circular_convolve(&signal(g), &signal(f)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_transform_matches_frequency_transform(f in finite_vec(2..40), j in 0usize..20) {
        let s = signal(f);
        let xi = j as f64 / s.grid().period();
        let diff = (dft_at_harmonic(s.values(), j) - dft(&s, xi)).norm();
        prop_assert!(diff < 1e-10);
    }

    #[test]
    fn shift_preserves_transform_modulus(f in finite_vec(2..40), lag in -50i64..50, j in 1usize..10) {
        let s = signal(f);
        let shifted = circular_shift(&s, lag);
        let a = dft_at_harmonic(s.values(), j).norm();
        let b = dft_at_harmonic(shifted.values(), j).norm();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn equal_autocovariances_give_unit_ratio(v in finite_vec(POINTS..POINTS + 1)) {
        let a = AutocovDifference { grid: grid(), values: v };
        let freqs = fourier_grid(&grid(), &FrequencyBand::hemodynamic()).unwrap();
        for p in spectral_ratio(&a, &a, &a, &freqs).unwrap() {
            if let Some(x) = p.value {
                prop_assert!((x - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identical_references_cancel(f in finite_vec(POINTS..POINTS + 1), seed in any::<u64>()) {
        let s = vec![signal(f.clone()), signal(f.iter().map(|v| v * 2.0).collect())];
        let shifts = draw_shifts(2, &grid(), seed).unwrap();
        let d = autocov_difference(&s, &s, &s, &s, &shifts).unwrap();
        prop_assert!(d.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn shifts_in_range_and_reproducible(n in 1usize..50, seed in any::<u64>()) {
        let a = draw_shifts(n, &grid(), seed).unwrap();
        prop_assert_eq!(&a, &draw_shifts(n, &grid(), seed).unwrap());
        prop_assert!(a.shifts.iter().all(|&u| u < POINTS));
        let longer = draw_shifts(n + 3, &grid(), seed).unwrap();
        prop_assert_eq!(&longer.shifts[..n], &a.shifts[..]);
    }

    #[test]
    fn amuse_reconstructs_its_input(x in finite_vec(40..41), y in finite_vec(40..41)) {
        let (a, b) = (signal(x), signal(y));
        if let Ok(d) = amuse_decompose(&a, &b, 1) {
            let [ra, rb] = d.reconstruct();
            let (ca, cb) = (a.demeaned(), b.demeaned());
            for (u, v) in ra.iter().zip(ca.values()).chain(rb.iter().zip(cb.values())) {
                prop_assert!((u - v).abs() < 1e-8 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn standardization_bounded_and_idempotent(v in finite_vec(2..30)) {
        if let Ok(s) = minmax_standardize(&v) {
            prop_assert!(s.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!(s.contains(&0.0) && s.contains(&1.0));
            prop_assert_eq!(minmax_standardize(&s).unwrap(), s);
        }
    }

    #[test]
    fn thresholding_is_strict(v in finite_vec(1..30), c in -10.0..10.0f64) {
        let mut with_c = v.clone();
        with_c.push(c);
        let classes = threshold_classify(&with_c, c);
        prop_assert!(!classes[v.len()]);
        for (x, k) in v.iter().zip(&classes) {
            prop_assert_eq!(*k, *x > c);
        }
    }

    #[test]
    fn kappa_is_symmetric_and_reflexive(a in prop::collection::vec(any::<bool>(), 2..40), b in prop::collection::vec(any::<bool>(), 40)) {
        let b = &b[..a.len()];
        match (cohens_kappa(&a, b), cohens_kappa(b, &a)) {
            (Ok(x), Ok(y)) => prop_assert!((x.kappa - y.kappa).abs() < 1e-15),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "kappa defined in one direction only"),
        }
        if a.iter().any(|x| *x) && a.iter().any(|x| !*x) {
            prop_assert!((cohens_kappa(&a, &a).unwrap().kappa - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn correctness_depends_only_on_order(w in -5.0..5.0f64, s in -5.0..5.0f64, coin in any::<bool>()) {
        prop_assert_eq!(is_correct(w, s, coin), is_correct(w.powi(3), s.powi(3), coin));
        prop_assert_eq!(is_correct(w, w, coin), (coin, true));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimate_is_nonnegative_median_of_curve((amps, noise) in panel_inputs(), seed in any::<u64>()) {
        let p = panel(&amps, &noise);
        let e = estimate(&p, seed, Execution::Sequential);
        prop_assert!(e.estimate >= 0.0);
        let kept: Vec<f64> = e.curve.iter().filter_map(|c| c.value).collect();
        prop_assert_eq!(lower_median(&kept), Some(e.estimate));
        prop_assert_eq!(band_median(&e.curve).unwrap(), (e.estimate, e.dropped_frequencies));
    }

    #[test]
    fn estimate_deterministic_across_policies((amps, noise) in panel_inputs(), seed in any::<u64>()) {
        let p = panel(&amps, &noise);
        let a = estimate(&p, seed, Execution::Sequential);
        prop_assert_eq!(&a, &estimate(&p, seed, Execution::Sequential));
        let b = estimate(&p, seed, Execution::Parallel);
        prop_assert!((a.estimate - b.estimate).abs() < 1e-12);
    }

    #[test]
    fn estimate_invariant_to_affine_maps(
        (amps, noise) in panel_inputs(),
        seed in any::<u64>(),
        scale in prop_oneof![0.1..10.0f64, -10.0..-0.1f64],
        offset in -50.0..50.0f64,
    ) {
        let p = panel(&amps, &noise);
        let q = p.map_node(0, |v| scale * v + offset);
        let a = estimate(&p, seed, Execution::Sequential).estimate;
        let b = estimate(&q, seed, Execution::Sequential).estimate;
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
    }
}
