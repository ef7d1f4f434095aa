//! Hann-windowed amplitude spectrum and peak picking.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::EmgError;

pub const MIN_SPECTRUM_LEN: usize = 256;
/// A peak must exceed this multiple of the median smoothed amplitude.
pub const PEAK_FACTOR: f64 = 3.0;
/// ... and this fraction of the largest smoothed amplitude.
pub const PEAK_RELATIVE_FLOOR: f64 = 1e-3;
/// ... and this fraction of the largest input magnitude.
pub const PEAK_ABSOLUTE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub bin: usize,
    pub freq_hz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    /// One-sided amplitude: a tone `A sin(2π f t)` on a bin reads `A`.
    pub amplitudes: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// `Σ (w x)²` of the de-meaned, windowed input.
    pub windowed_energy: f64,
    magnitudes: Vec<f64>,
    len: usize,
}

impl Spectrum {
    /// Windowed energy recovered from the bins (Parseval).
    pub fn bin_energy(&self) -> f64 {
        let n = self.len;
        self.magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let twice = k != 0 && !(n % 2 == 0 && k == n / 2);
                m * m * if twice { 2.0 } else { 1.0 }
            })
            .sum::<f64>()
            / n as f64
    }

    /// Largest smoothed peak within `tol` Hz of `freq_hz`.
    pub fn peak_near(&self, freq_hz: f64, tol: f64) -> Option<&Peak> {
        self.peaks
            .iter()
            .filter(|p| (p.freq_hz - freq_hz).abs() <= tol)
            .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    }

    /// Median of the 3-bin power-smoothed amplitudes.
    pub fn median_smoothed(&self) -> f64 {
        median(&smooth(&self.amplitudes))
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos()).collect()
}

fn smooth(amps: &[f64]) -> Vec<f64> {
    let p: Vec<f64> = amps.iter().map(|a| a * a).collect();
    (0..p.len())
        .map(|k| {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(p.len() - 1);
            (p[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64).sqrt()
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Amplitude spectrum of `series` sampled at `rate_hz`, with peaks: interior
/// local maxima of the 3-bin power-smoothed amplitude above
/// [`PEAK_FACTOR`]× its median and both floors.
pub fn spectrum(series: &[f64], rate_hz: f64) -> Result<Spectrum, EmgError> {
    let n = series.len();
    if n < MIN_SPECTRUM_LEN {
        return Err(EmgError::TooShort { needed: MIN_SPECTRUM_LEN, got: n });
    }
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(EmgError::Rate(rate_hz));
    }
    if let Some(v) = series.iter().find(|v| !v.is_finite()) {
        return Err(EmgError::NonFinite(*v));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let w = hann(n);
    let wsum: f64 = w.iter().sum();
    let mut buf: Vec<Complex<f64>> = series.iter().zip(&w).map(|(x, wk)| Complex::new((x - mean) * wk, 0.0)).collect();
    let windowed_energy = buf.iter().map(|c| c.re * c.re).sum();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bins = n / 2 + 1;
    let magnitudes: Vec<f64> = buf[..bins].iter().map(|c| c.norm()).collect();
    let amplitudes: Vec<f64> = magnitudes
        .iter()
        .enumerate()
        .map(|(k, m)| if k == 0 || (n % 2 == 0 && k == n / 2) { m / wsum } else { 2.0 * m / wsum })
        .collect();
    let freqs_hz: Vec<f64> = (0..bins).map(|k| k as f64 * rate_hz / n as f64).collect();

    let s = smooth(&amplitudes);
    let threshold = PEAK_FACTOR * median(&s);
    let top = s.iter().cloned().fold(0.0, f64::max);
    let abs_floor = PEAK_ABSOLUTE_FLOOR * series.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let floor = threshold.max(PEAK_RELATIVE_FLOOR * top).max(abs_floor);
    let peaks = (1..bins - 1)
        .filter(|&k| s[k] >= s[k - 1] && s[k] > s[k + 1] && s[k] > floor)
        .map(|k| Peak { bin: k, freq_hz: freqs_hz[k], amplitude: s[k] })
        .collect();

    Ok(Spectrum { freqs_hz, amplitudes, peaks, windowed_energy, magnitudes, len: n })
}
