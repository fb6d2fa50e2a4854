//! Butterworth band-pass design and cascaded biquad filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Recording, SignalError};

/// One second-order section, `a0` normalized to 1:
/// `H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z_inv2 = z_inv * z_inv;
        (self.b0 + z_inv * self.b1 + z_inv2 * self.b2) / (1.0 + z_inv * self.a1 + z_inv2 * self.a2)
    }

    /// Roots of `z² + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    pub sections: Vec<Biquad>,
}

impl IirFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz / fs;
        let z_inv = Complex64::from_polar(1.0, -omega);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Magnitude response in decibels.
    pub fn gain_db(&self, freq_hz: f64, fs: f64) -> f64 {
        20.0 * self.response(freq_hz, fs).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    /// Every pole strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Causal filtering from zero initial conditions (transposed direct
    /// form II per section).
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let xin = *x;
                let y = s.b0 * xin + z1;
                z1 = s.b1 * xin - s.a1 * y + z2;
                z2 = s.b2 * xin - s.a2 * y;
                *x = y;
            }
        }
        out
    }
}

/// Digital Butterworth band-pass of the given prototype order (the band-pass
/// has `2·order` poles, one section per prototype pole).
///
/// The analog low-pass prototype is moved to the band `[low_hz, high_hz]`
/// with pre-warped edges, then mapped through the bilinear transform. Gain is
/// normalized to unity at the pre-warped geometric centre, where the analog
/// band-pass response is exactly 1.
pub fn butterworth_bandpass(
    order: usize,
    low_hz: f64,
    high_hz: f64,
    fs: f64,
) -> Result<IirFilter, SignalError> {
    let valid = order >= 1
        && fs.is_finite()
        && low_hz.is_finite()
        && high_hz.is_finite()
        && 0.0 < low_hz
        && low_hz < high_hz
        && high_hz < fs / 2.0;
    if !valid {
        return Err(SignalError::InvalidBand {
            order,
            low_hz,
            high_hz,
            fs,
        });
    }

    let two_fs = 2.0 * fs;
    let w_low = two_fs * (PI * low_hz / fs).tan();
    let w_high = two_fs * (PI * high_hz / fs).tan();
    let bw = w_high - w_low;
    let w0 = (w_low * w_high).sqrt();

    // each prototype pole p yields band-pass poles s = p·bw/2 ± sqrt((p·bw/2)² − w0²)
    let split = |p: Complex64| {
        let a = p * (bw / 2.0);
        let d = (a * a - w0 * w0).sqrt();
        (a + d, a - d)
    };
    let bilinear = |s: Complex64| (two_fs + s) / (two_fs - s);
    let section = |z1: Complex64, z2: Complex64| Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: -1.0,
        a1: -(z1 + z2).re,
        a2: (z1 * z2).re,
    };

    let mut sections = Vec::with_capacity(order);
    for k in 0..order / 2 {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let (s1, s2) = split(Complex64::from_polar(1.0, theta));
        // the conjugate prototype pole contributes the conjugates of s1, s2
        for s in [s1, s2] {
            let z = bilinear(s);
            sections.push(section(z, z.conj()));
        }
    }
    if order % 2 == 1 {
        let (s1, s2) = split(Complex64::new(-1.0, 0.0));
        let (z1, z2) = (bilinear(s1), bilinear(s2));
        // either a conjugate pair or two real poles; both give real coefficients
        sections.push(section(z1, z2));
    }
    sections.sort_by(|a, b| {
        let ra = a.poles()[0].norm().max(a.poles()[1].norm());
        let rb = b.poles()[0].norm().max(b.poles()[1].norm());
        ra.total_cmp(&rb)
    });

    let mut filter = IirFilter { sections };
    let f_center = fs / PI * (w0 / two_fs).atan();
    let gain = filter.response(f_center, fs).norm();
    let per_section = gain.powf(-1.0 / order as f64);
    for s in &mut filter.sections {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }
    if !filter.is_stable() {
        return Err(SignalError::UnstableFilter);
    }
    Ok(filter)
}

/// Filters every channel of a recording; annotations are carried over.
pub fn filt(filter: &IirFilter, rec: &Recording) -> Recording {
    use rayon::prelude::*;
    let channels = rec.channels().par_iter().map(|c| filter.apply(c)).collect();
    rec.with_channels(channels)
}
