use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sounder_core::channel_sim::{apply_channel, white_noise, Tap};
use sounder_core::receiver::{
    correlate_profile, detect_peaks, estimate_carrier, synchronize, PeakConfig, PllConfig, PowerDelayProfile,
    DEFAULT_SYNC_THRESHOLD,
};
use sounder_core::waveform::{build_frame, modulate};
use sounder_core::{
    BasebandSignal64, FrameLayout64, ImpairmentSet64, PulseShape64, Receiver64, ReceiverConfig64, TapSet64,
};

fn layout() -> FrameLayout64 {
    FrameLayout64::new(10, 9, 16, 0.1).unwrap()
}

fn transmit(layout: &FrameLayout64) -> BasebandSignal64 {
    modulate(&build_frame(layout), &PulseShape64::default(), 10e9, 0.0).unwrap()
}

fn template() -> (Vec<f64>, f64) {
    let layout = FrameLayout64::new(10, 9, 1, 0.1).unwrap();
    let pdp = correlate_profile(&transmit(&layout), &layout, &PulseShape64::default(), 0, None).unwrap();
    (pdp.template, pdp.sample_rate)
}

/// Delays stay below half the 51.1 ns body window; later paths read as precursors.
fn synth(components: &[(f64, Complex<f64>)]) -> PowerDelayProfile<f64> {
    let (t, fs) = template();
    PowerDelayProfile::synthesize(components, t, fs)
}

#[test]
fn equal_header_and_body_rejected() {
    let layout = FrameLayout64::new(9, 9, 4, 0.1).unwrap();
    assert!(Receiver64::new(ReceiverConfig64::new(layout, PulseShape64::default())).is_err());
}

#[test]
fn sample_rate_mismatch_rejected() {
    let layout = layout();
    let rx = Receiver64::new(ReceiverConfig64::new(layout.clone(), PulseShape64::default())).unwrap();
    let mut tx = transmit(&layout);
    tx.sample_rate = 20e9;
    assert!(rx.process_frame(&tx, 0, 0.0).is_err());
}

#[test]
fn noise_only_capture_finds_no_frame() {
    let layout = layout();
    let rx = Receiver64::new(ReceiverConfig64::new(layout.clone(), PulseShape64::default())).unwrap();
    let noise = BasebandSignal64::new(white_noise(transmit(&layout).len(), 1.0, 3), 40e9);
    assert!(matches!(
        rx.process_frame(&noise, 0, 0.0),
        Err(sounder_core::Error::NoFrameFound { .. })
    ));
}

#[test]
fn carrier_error_shrinks_with_snr() {
    let layout = layout();
    let shape = PulseShape64::default();
    let tx = transmit(&layout);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut rms = Vec::new();
    for snr in [0.0, 10.0, 20.0, 30.0] {
        let mut sq = 0.0;
        for trial in 0..100u64 {
            let cfo = rng.random_range(-100e3..=100e3);
            let imp = ImpairmentSet64 {
                cfo_hz: cfo,
                phase_offset: rng.random_range(-3.0..3.0),
                snr_db: snr,
                hardware_response: None,
            };
            let rx = apply_channel(&tx, &TapSet64::identity(), &imp, 1000 + trial).unwrap().signal;
            let est = estimate_carrier(&rx, &layout, &shape, 0, &PllConfig::default()).unwrap();
            sq += (est.freq_offset_hz - cfo).powi(2);
        }
        rms.push((sq / 100.0).sqrt());
    }
    assert!(rms.windows(2).all(|w| w[1] < w[0]), "RMS CFO error by SNR: {rms:?}");
    assert!(rms[3] < 1e3, "{rms:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sync_finds_the_frame_start(pad in 0usize..5000, seed in 0u64..1000) {
        let layout = layout();
        let shape = PulseShape64::default();
        let tx = transmit(&layout);
        let mut samples = white_noise(pad, 1e-3, seed);
        samples.extend_from_slice(&tx.samples);
        let rx = BasebandSignal64::new(samples, tx.sample_rate);
        let s = synchronize(&rx, &layout.header, &shape, 10e9, DEFAULT_SYNC_THRESHOLD).unwrap();
        prop_assert_eq!(s.offset, pad);
        prop_assert!(s.score > 0.9);
    }

    #[test]
    fn detected_components_respect_dynamic_range(
        extra in proptest::collection::vec((1.0..24.0_f64, -80.0..-1.0_f64, -3.1..3.1_f64), 1..6),
        range in 20.0..60.0_f64,
    ) {
        let mut comps = vec![(0.0, Complex::new(1.0, 0.0))];
        for (d, p, ph) in &extra {
            if comps.iter().all(|(c, _)| (c - d).abs() >= 1.0) {
                comps.push((*d, Complex::from_polar(10f64.powf(p / 20.0), *ph)));
            }
        }
        let cfg = PeakConfig::new(range, 0.1);
        let profile = detect_peaks(&synth(&comps), &cfg).unwrap();
        prop_assert_eq!(profile.dynamic_range_db, range);
        let max = profile.max_power_dbm().unwrap();
        for c in &profile.components {
            prop_assert!(c.power_dbm >= max - range - 1e-9, "{} dB below a {max} dB peak", c.power_dbm);
        }
        for (d, g) in &comps {
            let p = 10.0 * g.norm_sqr().log10();
            if p >= max - range + 1.0 {
                let hit = profile.components.iter().any(|c| (c.delay_ns - d).abs() < 0.05 && (c.power_dbm - p).abs() < 0.1);
                prop_assert!(hit, "tap at {d} ns, {p} dB missing from {:?}", profile.components);
            }
        }
    }

    #[test]
    fn peak_detection_is_idempotent(
        extra in proptest::collection::vec((0.3..24.0_f64, -40.0..-1.0_f64, -3.1..3.1_f64), 0..5),
    ) {
        let mut comps = vec![(0.0, Complex::new(1.0, 0.0))];
        for (d, p, ph) in &extra {
            if comps.iter().all(|(c, _)| (c - d).abs() >= 0.3) {
                comps.push((*d, Complex::from_polar(10f64.powf(p / 20.0), *ph)));
            }
        }
        let cfg = PeakConfig::default();
        let first = detect_peaks(&synth(&comps), &cfg).unwrap();
        let again: Vec<(f64, Complex<f64>)> = first.components.iter().map(|c| (c.delay_ns, c.amplitude)).collect();
        let second = detect_peaks(&synth(&again), &cfg).unwrap();
        prop_assert_eq!(first.len(), second.len());
        for (a, b) in first.components.iter().zip(&second.components) {
            prop_assert!((a.delay_ns - b.delay_ns).abs() < 1e-4);
            prop_assert!((a.power_dbm - b.power_dbm).abs() < 1e-4);
        }
    }
}

fn tap_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    proptest::collection::vec((0.5..20.0_f64, -25.0..-3.0_f64, -3.1..3.1_f64), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn loopback_recovers_taps(extra in tap_strategy(), cfo in -100e3..100e3_f64, phase in -3.0..3.0_f64, seed in 0u64..1 << 32) {
        let layout = layout();
        let tx = transmit(&layout);
        let mut taps = vec![Tap::new(0.0, Complex::new(1.0, 0.0))];
        for (d, p, ph) in extra {
            if taps.iter().all(|t| (t.delay_ns - d).abs() >= 0.5) {
                taps.push(Tap::new(d, Complex::from_polar(10f64.powf(p / 20.0), ph)));
            }
        }
        taps.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
        let taps = TapSet64::new(taps).unwrap();
        let imp = ImpairmentSet64 { cfo_hz: cfo, phase_offset: phase, snr_db: 30.0, hardware_response: None };
        let rx = apply_channel(&tx, &taps, &imp, seed).unwrap().signal;
        let receiver = Receiver64::new(ReceiverConfig64::new(layout, PulseShape64::default())).unwrap();
        let report = receiver.process_frame(&rx, 9, -40.0).unwrap();
        let profile = &report.profile;
        prop_assert_eq!(profile.frame_id, 9);
        prop_assert_eq!(profile.len(), taps.len(), "{:?}", profile.components);
        for (t, c) in taps.taps().iter().zip(&profile.components) {
            prop_assert!((c.delay_ns - t.delay_ns).abs() <= 0.1, "delay {} vs {}", c.delay_ns, t.delay_ns);
            let want = -40.0 + 10.0 * t.power().log10();
            prop_assert!((c.power_dbm - want).abs() <= 0.5, "power {} vs {want}", c.power_dbm);
        }
        prop_assert!((report.carrier.freq_offset_hz - cfo).abs() < 2e3);
    }
}
