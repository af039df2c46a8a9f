//! Butterworth band-pass design as second-order sections, and zero-phase filtering.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad: `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Band-pass of the given prototype `order` (so `2·order` poles) between
    /// `low_hz` and `high_hz`, designed with a pre-warped bilinear transform and
    /// normalised to unit gain at the geometric centre.
    pub fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, sample_rate: f64) -> Result<Self> {
        let nyq = sample_rate / 2.0;
        if order == 0 || order % 2 != 0 {
            return Err(Error::InvalidArgument(format!("band-pass order must be even and positive, got {order}")));
        }
        if !(0.0 < low_hz && low_hz < high_hz && high_hz < nyq) {
            return Err(Error::InvalidArgument(format!(
                "band [{low_hz}, {high_hz}] Hz must lie inside (0, {nyq})"
            )));
        }
        let fs2 = 2.0 * sample_rate;
        let warp = |f: f64| fs2 * (std::f64::consts::PI * f / sample_rate).tan();
        let (wl, wh) = (warp(low_hz), warp(high_hz));
        let bw = wh - wl;
        let w0sq = wl * wh;

        let mut sections = Vec::with_capacity(order);
        for k in 0..order / 2 {
            // prototype pole in the upper-left quadrant; its conjugate yields the mirror sections
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                let z = (fs2 + s) / (fs2 - s);
                sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [-2.0 * z.re, z.norm_sqr()] });
            }
        }
        let mut f = Self { sections };
        let centre = (low_hz * high_hz).sqrt();
        let g = f.response(centre, sample_rate).norm();
        let per = g.powf(-1.0 / f.sections.len() as f64);
        for s in &mut f.sections {
            s.b.iter_mut().for_each(|v| *v *= per);
        }
        Ok(f)
    }

    pub fn response(&self, hz: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * hz / sample_rate;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
            let den = 1.0 + z1 * s.a[0] + z2 * s.a[1];
            acc * num / den
        })
    }

    /// Causal filtering, direct form II transposed, zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * out + z2;
                z2 = s.b[2] * input - s.a[1] * out;
                *v = out;
            }
        }
        y
    }

    /// Minimum signal length accepted by [`Self::filtfilt`].
    pub fn warmup_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Forward-backward filtering with odd-reflection padding: zero phase,
    /// squared magnitude response.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Result<Vec<f64>> {
        let need = self.warmup_len();
        if x.len() <= need {
            return Err(Error::SignalTooShort { len: x.len(), needed: need });
        }
        let pad = pad.max(need).min(x.len() - 1);
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}
