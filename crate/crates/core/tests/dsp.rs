use std::f64::consts::PI;

use proptest::prelude::*;
use rsel_core::signal::{
    band_features, butterworth_bandpass, epoch, filt, BandSpec, IirFilter, Recording,
};
use rsel_core::Matrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const FS: f64 = 256.0;

fn default_filter() -> IirFilter {
    butterworth_bandpass(5, 0.5, 30.0, FS).unwrap()
}

/// Magnitude of the analog band-pass prototype at the pre-warped frequency.
fn analog_magnitude(f: f64, order: usize, low: f64, high: f64, fs: f64) -> f64 {
    let warp = |x: f64| 2.0 * fs * (PI * x / fs).tan();
    let (wl, wh) = (warp(low), warp(high));
    let (bw, w0sq) = (wh - wl, wl * wh);
    let omega = warp(f);
    let ratio = (omega * omega - w0sq) / (omega * bw);
    1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt()
}

#[test]
fn response_matches_analog_prototype() {
    for (order, low, high, fs) in [(5, 0.5, 30.0, 256.0), (2, 4.0, 8.0, 128.0), (7, 1.0, 100.0, 512.0)] {
        let f = butterworth_bandpass(order, low, high, fs).unwrap();
        for k in 1..200 {
            let freq = k as f64 / 200.0 * fs / 2.0 * 0.999;
            let got = f.response(freq, fs).norm();
            let want = analog_magnitude(freq, order, low, high, fs);
            assert!((got - want).abs() < 1e-9, "order {order} at {freq} Hz: {got} vs {want}");
        }
    }
}

#[test]
fn band_edges_centre_and_stopband() {
    let f = default_filter();
    for edge in [0.5, 30.0] {
        let g = f.gain_db(edge, FS);
        assert!((g + 3.0).abs() <= 1.0, "edge {edge}: {g} dB");
    }
    let centre = f.gain_db((0.5f64 * 30.0).sqrt(), FS);
    assert!(centre.abs() <= 1.0, "centre {centre} dB");
    assert!(f.gain_db(60.0, FS) <= -30.0);
    assert_eq!(f.response(0.0, FS).norm(), 0.0);
    assert!(f.is_stable());
}

#[test]
fn impulse_response_spectrum_matches_transfer_function() {
    let f = default_filter();
    let n = 16384;
    let mut impulse = vec![0.0; n];
    impulse[0] = 1.0;
    let h = f.apply(&impulse);
    let mut buf: Vec<Complex<f64>> = h.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    for k in (0..n / 2).step_by(37) {
        let freq = k as f64 * FS / n as f64;
        let want = f.response(freq, FS).norm();
        assert!((buf[k].norm() - want).abs() < 1e-6, "bin {k}");
    }
}

#[test]
fn sixty_hz_tone_is_attenuated() {
    let f = default_filter();
    let n = 20 * 256;
    let tone: Vec<f64> = (0..n).map(|t| (2.0 * PI * 60.0 * t as f64 / FS).sin()).collect();
    let rec = Recording::new(FS, vec![tone.clone(), tone], vec![]).unwrap();
    let out = filt(&f, &rec);
    let steady = &out.channels()[0][n / 2..];
    let peak = steady.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    assert!(20.0 * peak.log10() <= -30.0, "peak {peak}");
    assert_eq!(out.n_samples(), n);
    assert_eq!(out.annotations(), rec.annotations());
}

#[test]
fn ten_hz_tone_lands_in_its_bin() {
    let n = 2560;
    let tone: Vec<f64> = (0..n).map(|t| (2.0 * PI * 10.0 * t as f64 / FS).sin()).collect();
    let x = Matrix::from_fn(2, n, |c, t| if c == 0 { tone[t] } else { 0.5 * tone[t] });
    let feats = band_features(&x, FS).unwrap();
    assert_eq!(feats.samples(), 250);
    let row = feats.matrix().row(0);
    // 10.0 Hz is bin 100, the 21st alpha bin after 30 theta bins
    let idx = 30 + 20;
    assert!((row[idx] - 1.0).abs() < 1e-9);
    for (j, &v) in row.iter().enumerate() {
        if j != idx {
            assert!(v < 0.01 * row[idx]);
        }
    }
    let energy: f64 = row.iter().map(|v| v * v).sum();
    assert!(row[idx] * row[idx] / energy >= 0.99);
}

#[test]
fn bin_count_independent_of_sample_rate() {
    for fs in [128.0, 256.0, 512.0] {
        let n = (10.0 * fs) as usize;
        let f = band_features(&Matrix::from_fn(3, n, |c, t| ((c + 1) * t) as f64 % 7.0), fs).unwrap();
        assert_eq!(f.samples(), 250, "fs {fs}");
    }
    assert_eq!(BandSpec::default().bins(0.1).len(), 250);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn designs_are_stable(order in 1usize..=10, a in 0.01f64..0.45, b in 0.01f64..0.45, fs in prop::sample::select(vec![128.0, 256.0, 512.0, 1000.0])) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-3);
        let f = butterworth_bandpass(order, lo * fs, hi * fs, fs).unwrap();
        prop_assert!(f.is_stable());
        prop_assert_eq!(f.sections.len(), order);
    }

    #[test]
    fn features_scale_linearly(seed in any::<u64>(), gain in 0.1f64..10.0) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_fn(2, 1280, |_, _| r.random_range(-1.0..1.0));
        let a = band_features(&x, 128.0).unwrap();
        let b = band_features(&x.scale(gain), 128.0).unwrap();
        let diff = b.matrix().sub(&a.matrix().scale(gain)).max_abs();
        prop_assert!(diff <= 1e-12 * gain * a.matrix().max_abs().max(1.0));
    }

    #[test]
    fn labelled_time_tracks_annotation(on in 0.0f64..500.0, len in 1.0f64..200.0) {
        let fs = 2.0;
        let n = 1400;
        let off = (on + len).min(n as f64 / fs);
        let rec = Recording::new(fs, vec![vec![0.0; n]; 2], vec![(on, off)]).unwrap();
        let epochs = epoch(&rec, 10.0).unwrap();
        let labelled = epochs.iter().filter(|e| e.label).count() as f64 * 10.0;
        prop_assert!((labelled - (off - on)).abs() <= 10.0);
    }
}
