//! Second-order Butterworth sections from the bilinear transform with a
//! pre-warped cutoff, run in transposed direct form II.

use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// `a0` is normalized to 1 and omitted.
    pub a: [f64; 2],
}

impl Biquad {
    pub fn lowpass(cutoff_hz: f64, rate_hz: f64) -> Self {
        let k = (PI * cutoff_hz / rate_hz).tan();
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        let b0 = k * k * norm;
        Self { b: [b0, 2.0 * b0, b0], a: [2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm] }
    }

    pub fn highpass(cutoff_hz: f64, rate_hz: f64) -> Self {
        let k = (PI * cutoff_hz / rate_hz).tan();
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        Self { b: [norm, -2.0 * norm, norm], a: [2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm] }
    }

    /// Gain at DC.
    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// `|H(e^{jω})|` at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / rate_hz;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let nr = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let ni = -(self.b[1] * s1 + self.b[2] * s2);
        let dr = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let di = -(self.a[0] * s1 + self.a[1] * s2);
        ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
    }

    /// Causal filtering; the state starts at the steady state for a
    /// constant input equal to the first sample.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let Some(&x0) = x.first() else {
            return Vec::new();
        };
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let y0 = x0 * self.dc_gain();
        let mut z1 = y0 - b0 * x0;
        let mut z2 = b2 * x0 - a2 * y0;
        x.iter()
            .map(|&xn| {
                let y = b0 * xn + z1;
                z1 = b1 * xn - a1 * y + z2;
                z2 = b2 * xn - a2 * y;
                y
            })
            .collect()
    }

    /// Forward then backward pass.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.filter(x);
        y.reverse();
        let mut z = self.filter(&y);
        z.reverse();
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_magnitudes() {
        let lp = Biquad::lowpass(15.0, 100.0);
        assert!((lp.dc_gain() - 1.0).abs() < 1e-12);
        assert!((lp.magnitude(15.0, 100.0) - 0.5f64.sqrt()).abs() < 1e-12);
        let hp = Biquad::highpass(20.0, 1000.0);
        assert!(hp.dc_gain().abs() < 1e-12);
        assert!((hp.magnitude(20.0, 1000.0) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((hp.magnitude(499.999, 1000.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn impulse_responses_decay() {
        for f in [Biquad::lowpass(15.0, 100.0), Biquad::highpass(20.0, 100.0)] {
            let mut x = vec![0.0; 1000];
            x[1] = 1.0;
            let y = f.filter(&x);
            assert!(y[999].abs() < 1e-9);
            assert!(y[990..].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn constant_input_starts_in_steady_state() {
        let lp = Biquad::lowpass(15.0, 100.0);
        assert!(lp.filter(&[3.0; 50]).iter().all(|v| (v - 3.0).abs() < 1e-12));
        let hp = Biquad::highpass(20.0, 100.0);
        assert!(hp.filter(&[3.0; 50]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn filtfilt_has_no_phase_lag_on_a_tone() {
        let lp = Biquad::lowpass(15.0, 1000.0);
        let x: Vec<f64> = (0..4000).map(|k| (2.0 * PI * 2.0 * k as f64 / 1000.0).sin()).collect();
        let y = lp.filtfilt(&x);
        let err = x[1000..3000].iter().zip(&y[1000..3000]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }
}
