use num_complex::Complex;
use proptest::prelude::*;
use sounder_core::channel_sim::{
    apply_channel, synth_weather_taps, white_noise, HardwareResponse, ImpairmentSet, ScenarioStats, Tap, TapSet,
};
use sounder_core::metrics::k_factor_of;
use sounder_core::waveform::{build_frame, modulate};
use sounder_core::{BasebandSignal64, FrameLayout64, ImpairmentSet64, PulseShape64, Scenario, TapSet64};

fn signal() -> BasebandSignal64 {
    let layout = FrameLayout64::new(9, 8, 2, 0.1).unwrap();
    modulate(&build_frame(&layout), &PulseShape64::default(), 10e9, 0.0).unwrap()
}

fn energy(x: &[Complex<f64>]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

#[test]
fn identity_channel_is_transparent() {
    let tx = signal();
    let out = apply_channel(&tx, &TapSet64::identity(), &ImpairmentSet64::clean(), 0).unwrap();
    assert!(!out.aliased);
    assert_eq!(out.noise_variance, 0.0);
    assert_eq!(out.signal.samples, tx.samples);
}

#[test]
fn tap_sets_are_validated() {
    let c = Complex::new(1.0, 0.0);
    assert!(TapSet64::new(vec![]).is_err());
    assert!(TapSet64::new(vec![Tap::new(-1.0, c)]).is_err());
    assert!(TapSet64::new(vec![Tap::new(2.0, c), Tap::new(1.0, c)]).is_err());
    assert!(TapSet64::new(vec![Tap::new(0.0, Complex::new(f64::NAN, 0.0))]).is_err());
    let long = TapSet64::new(vec![Tap::new(0.0, c), Tap::new(500.0, c)]).unwrap();
    assert!(long.exceeds_max_delay());
    let out = apply_channel(&signal(), &long, &ImpairmentSet64::clean(), 0).unwrap();
    assert!(out.aliased);
}

#[test]
fn complex_noise_is_gaussian() {
    let n = 1_000_000;
    let x = white_noise::<f64>(n, 2.0, 42);
    let var = energy(&x) / n as f64;
    assert!((var - 2.0).abs() < 0.01, "variance {var}");
    for part in [|v: &Complex<f64>| v.re, |v: &Complex<f64>| v.im] {
        let s: Vec<f64> = x.iter().map(part).collect();
        let mean = s.iter().sum::<f64>() / n as f64;
        let m2 = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let m4 = s.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
        let kurtosis = m4 / (m2 * m2);
        assert!((2.8..=3.2).contains(&kurtosis), "kurtosis {kurtosis}");
        assert!(mean.abs() < 5e-3);
        assert!((m2 - 1.0).abs() < 0.01);
    }
    let cross = x.iter().map(|v| v.re * v.im).sum::<f64>() / n as f64;
    assert!(cross.abs() < 5e-3, "I/Q correlation {cross}");
}

#[test]
fn noise_is_reproducible_per_seed() {
    assert_eq!(white_noise::<f64>(64, 1.0, 9), white_noise::<f64>(64, 1.0, 9));
    assert_ne!(white_noise::<f64>(64, 1.0, 9), white_noise::<f64>(64, 1.0, 10));
}

#[test]
fn measured_snr_matches_request() {
    let tx = signal();
    for snr in [0.0, 10.0, 30.0] {
        let clean = apply_channel(&tx, &TapSet64::identity(), &ImpairmentSet64::clean(), 5).unwrap();
        let noisy = apply_channel(&tx, &TapSet64::identity(), &ImpairmentSet64::with_snr(snr), 5).unwrap();
        let noise: Vec<Complex<f64>> = noisy
            .signal
            .samples
            .iter()
            .zip(&clean.signal.samples)
            .map(|(a, b)| a - b)
            .collect();
        let n = tx.len() as f64;
        let measured = 10.0 * ((energy(&clean.signal.samples) / n) / (energy(&noise) / n)).log10();
        assert!((measured - snr).abs() < 0.1, "{snr} dB requested, {measured} dB measured");
        assert!((noisy.noise_variance - tx.mean_power() / 10f64.powf(snr / 10.0)).abs() < 1e-9);
    }
}

#[test]
fn flat_hardware_response_scales_amplitude() {
    let tx = signal();
    let hw = HardwareResponse::from_db_curve(vec![-20e9, 20e9], &[-6.0, -6.0]).unwrap();
    let imp = ImpairmentSet { hardware_response: Some(hw), ..ImpairmentSet64::clean() };
    let out = apply_channel(&tx, &TapSet64::identity(), &imp, 0).unwrap();
    let ratio = energy(&out.signal.samples) / energy(&tx.samples);
    assert!((10.0 * ratio.log10() + 6.0).abs() < 0.05, "{}", 10.0 * ratio.log10());
}

#[test]
fn synthetic_k_factor_follows_scenario_statistics() {
    for scenario in [Scenario::Clear, Scenario::Rain, Scenario::Snow] {
        let stats = ScenarioStats::of(scenario);
        let ks: Vec<f64> = (0..2000u64)
            .map(|seed| {
                let taps: TapSet64 = synth_weather_taps(scenario, seed);
                assert!(taps.last_delay_ns() < 25.0);
                let powers: Vec<f64> = taps.taps().iter().map(|t| t.power()).collect();
                k_factor_of(&powers).unwrap().value_db
            })
            .collect();
        let n = ks.len() as f64;
        let mean = ks.iter().sum::<f64>() / n;
        let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - stats.k_mean_db).abs() < 0.05, "{scenario:?}: mean K {mean}");
        assert!((var / stats.k_variance_db2 - 1.0).abs() < 0.12, "{scenario:?}: var K {var}");
        let again: TapSet64 = synth_weather_taps(scenario, 7);
        assert_eq!(again, synth_weather_taps(scenario, 7));
    }
}

fn gain() -> impl Strategy<Value = Complex<f64>> {
    (0.05..2.0_f64, -3.2..3.2_f64).prop_map(|(r, th)| Complex::from_polar(r, th))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_tap_conserves_scaled_energy(delay in 0.0..100.0_f64, g in gain()) {
        let tx = signal();
        let taps = TapSet64::new(vec![Tap::new(delay, g)]).unwrap();
        let out = apply_channel(&tx, &taps, &ImpairmentSet64::clean(), 0).unwrap();
        let ratio = energy(&out.signal.samples) / (g.norm_sqr() * energy(&tx.samples));
        prop_assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
        prop_assert_eq!(out.signal.len(), tx.len() + (delay * 40.0 - 1e-9).ceil().max(0.0) as usize);
    }

    #[test]
    fn channel_is_linear_in_its_taps(d1 in 0.0..30.0_f64, gap in 0.1..30.0_f64, g1 in gain(), g2 in gain()) {
        let tx = signal();
        let d2 = d1 + gap;
        let run = |taps: Vec<Tap<f64>>| apply_channel(&tx, &TapSet::new(taps).unwrap(), &ImpairmentSet64::clean(), 0)
            .unwrap()
            .signal
            .samples;
        let both = run(vec![Tap::new(d1, g1), Tap::new(d2, g2)]);
        let a = run(vec![Tap::new(d1, g1)]);
        let b = run(vec![Tap::new(d2, g2)]);
        // each output ends at its own last tap, cutting its interpolation tail
        let common = a.len().min(b.len());
        let err: f64 = (0..common).map(|i| (both[i] - a[i] - b[i]).norm_sqr()).sum();
        let rel = (err / energy(&both[..common])).sqrt();
        // integer delays bypass the band-limited path, which drops the Nyquist bin
        prop_assert!(rel < 1e-3, "relative error {rel:e}");
    }

    #[test]
    fn cfo_is_a_phase_ramp(cfo in -5e6..5e6_f64, phase in -3.1..3.1_f64) {
        let tx = signal();
        let imp = ImpairmentSet { cfo_hz: cfo, phase_offset: phase, ..ImpairmentSet64::clean() };
        let out = apply_channel(&tx, &TapSet64::identity(), &imp, 0).unwrap();
        for (n, (y, x)) in out.signal.samples.iter().zip(&tx.samples).enumerate() {
            if x.norm() < 0.1 {
                continue;
            }
            let want = Complex::from_polar(1.0, std::f64::consts::TAU * cfo * n as f64 / tx.sample_rate + phase);
            prop_assert!((y / x - want).norm() < 1e-9);
        }
    }
}
