//! EMG processing: envelope extraction, torque calibration, decomposition
//! into reciprocal activation and cocontraction, trial averaging,
//! per-participant normalization, spectra and correlation.

pub mod filter;
pub mod spectrum;

use thiserror::Error;

pub use filter::Biquad;
pub use spectrum::{spectrum, Peak, Spectrum};

use crate::numeric::{lstsq, trapezoid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmgError {
    #[error("sampling rate {0} Hz is invalid for the filter cutoffs")]
    Rate(f64),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series too short: need {needed}, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("empty series")]
    Empty,
    #[error("non-finite sample {0}")]
    NonFinite(f64),
    #[error("calibration design is degenerate: {0}")]
    Degenerate(String),
    #[error("calibration coefficients must be positive: alpha0 = {alpha0}, alpha1 = {alpha1}")]
    NonPositive { alpha0: f64, alpha1: f64 },
    #[error("values have zero range; cannot normalize")]
    ZeroRange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmgSeries {
    pub samples: Vec<f64>,
    pub rate_hz: f64,
}

impl EmgSeries {
    pub const DEFAULT_RATE_HZ: f64 = 100.0;

    pub fn new(samples: Vec<f64>, rate_hz: f64) -> Self {
        Self { samples, rate_hz }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    pub highpass_hz: f64,
    pub lowpass_hz: f64,
    /// Forward-backward filtering instead of causal.
    pub zero_phase: bool,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { highpass_hz: 20.0, lowpass_hz: 15.0, zero_phase: false }
    }
}

/// High-pass, rectify, low-pass.
pub fn envelope(raw: &EmgSeries) -> Result<EmgSeries, EmgError> {
    envelope_with(raw, &EnvelopeOptions::default())
}

pub fn envelope_with(raw: &EmgSeries, opts: &EnvelopeOptions) -> Result<EmgSeries, EmgError> {
    let fs = raw.rate_hz;
    if !(fs.is_finite() && fs > 2.0 * opts.highpass_hz && fs > 2.0 * opts.lowpass_hz) {
        return Err(EmgError::Rate(fs));
    }
    if let Some(v) = raw.samples.iter().find(|v| !v.is_finite()) {
        return Err(EmgError::NonFinite(*v));
    }
    let hp = Biquad::highpass(opts.highpass_hz, fs);
    let lp = Biquad::lowpass(opts.lowpass_hz, fs);
    let run = |f: &Biquad, x: &[f64]| if opts.zero_phase { f.filtfilt(x) } else { f.filter(x) };
    let rectified: Vec<f64> = run(&hp, &raw.samples).into_iter().map(f64::abs).collect();
    Ok(EmgSeries { samples: run(&lp, &rectified), rate_hz: fs })
}

/// Envelope-to-torque line `τ = α0 env + α1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub alpha0: f64,
    pub alpha1: f64,
}

impl Calibration {
    pub fn new(alpha0: f64, alpha1: f64) -> Result<Self, EmgError> {
        if alpha0 > 0.0 && alpha1 > 0.0 && alpha0.is_finite() && alpha1.is_finite() {
            Ok(Self { alpha0, alpha1 })
        } else {
            Err(EmgError::NonPositive { alpha0, alpha1 })
        }
    }

    pub fn torque(&self, envelope: &[f64]) -> Vec<f64> {
        envelope.iter().map(|e| self.alpha0 * e + self.alpha1).collect()
    }
}

/// Least-squares line; `positive` is false when either coefficient is not
/// strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationFit {
    pub alpha0: f64,
    pub alpha1: f64,
    pub positive: bool,
}

impl CalibrationFit {
    pub fn calibration(&self) -> Result<Calibration, EmgError> {
        Calibration::new(self.alpha0, self.alpha1)
    }
}

/// Fits `τ = α0 env + α1` to `(mean envelope, torque)` pairs.
pub fn calibrate(points: &[(f64, f64)]) -> Result<CalibrationFit, EmgError> {
    if let Some(&(e, t)) = points.iter().find(|(e, t)| !(e.is_finite() && t.is_finite())) {
        return Err(EmgError::NonFinite(if e.is_finite() { t } else { e }));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(EmgError::Degenerate(format!("{} distinct envelope level(s)", distinct.len())));
    }
    let design: Vec<Vec<f64>> = points.iter().map(|p| vec![p.0, 1.0]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let c = lstsq(&design, &y).map_err(|e| EmgError::Degenerate(e.to_string()))?;
    Ok(CalibrationFit { alpha0: c[0], alpha1: c[1], positive: c[0] > 0.0 && c[1] > 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDecomposition {
    /// Reciprocal activation `τ_f − τ_e`.
    pub tau: Vec<f64>,
    /// Cocontraction `min(τ_f, τ_e)`.
    pub u: Vec<f64>,
}

impl ActivationDecomposition {
    /// `(τ_f, τ_e) = (u + max(0, τ), u + max(0, −τ))`.
    pub fn reconstruct(&self) -> (Vec<f64>, Vec<f64>) {
        let f = self.u.iter().zip(&self.tau).map(|(u, t)| u + t.max(0.0)).collect();
        let e = self.u.iter().zip(&self.tau).map(|(u, t)| u + (-t).max(0.0)).collect();
        (f, e)
    }
}

pub fn decompose(tau_f: &[f64], tau_e: &[f64]) -> Result<ActivationDecomposition, EmgError> {
    if tau_f.len() != tau_e.len() {
        return Err(EmgError::LengthMismatch(tau_f.len(), tau_e.len()));
    }
    let tau = tau_f.iter().zip(tau_e).map(|(f, e)| f - e).collect();
    let u = tau_f.iter().zip(tau_e).map(|(f, e)| f.min(*e)).collect();
    Ok(ActivationDecomposition { tau, u })
}

/// Trapezoidal time average of samples spread uniformly over `duration_s`.
pub fn trial_mean(u: &[f64], duration_s: f64) -> Result<f64, EmgError> {
    match u.len() {
        0 => Err(EmgError::Empty),
        1 => Ok(u[0]),
        n => Ok(trapezoid(u, duration_s / (n - 1) as f64) / duration_s),
    }
}

/// Trial mean at `rate_hz`, skipping the first `skip_s` seconds.
pub fn trial_mean_after(u: &[f64], rate_hz: f64, skip_s: f64) -> Result<f64, EmgError> {
    let start = ((skip_s * rate_hz).round() as usize).min(u.len());
    let tail = &u[start..];
    if tail.is_empty() {
        return Err(EmgError::Empty);
    }
    trial_mean(tail, (tail.len().max(2) - 1) as f64 / rate_hz)
}

/// Samples excluded from trial means while filters settle.
pub const TRANSIENT_SECONDS: f64 = 0.5;

/// Min-max normalization over one participant's trials.
pub fn normalize(means: &[f64]) -> Result<Vec<f64>, EmgError> {
    if means.len() < 2 {
        return Err(EmgError::TooShort { needed: 2, got: means.len() });
    }
    if let Some(v) = means.iter().find(|v| !v.is_finite()) {
        return Err(EmgError::NonFinite(*v));
    }
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Err(EmgError::ZeroRange);
    }
    Ok(means.iter().map(|m| ((m - lo) / (hi - lo)).clamp(0.0, 1.0)).collect())
}

/// Pearson correlation at zero lag.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, EmgError> {
    if a.len() != b.len() {
        return Err(EmgError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(EmgError::TooShort { needed: 2, got: a.len() });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(EmgError::ZeroRange);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Correlation at zero lag plus the lag (in samples, `b` delayed relative
/// to `a` when positive) maximizing it within `±max_lag`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagCorrelation {
    pub zero_lag: f64,
    pub best_lag: i64,
    pub best: f64,
}

pub fn lag_correlation(a: &[f64], b: &[f64], max_lag: usize) -> Result<LagCorrelation, EmgError> {
    let zero_lag = pearson(a, b)?;
    let mut best = (0i64, zero_lag);
    for lag in 1..=max_lag.min(a.len().saturating_sub(2)) {
        for (l, r) in [(lag as i64, pearson(&a[..a.len() - lag], &b[lag..])), (-(lag as i64), pearson(&a[lag..], &b[..b.len() - lag]))] {
            if let Ok(r) = r {
                if r > best.1 {
                    best = (l, r);
                }
            }
        }
    }
    Ok(LagCorrelation { zero_lag, best_lag: best.0, best: best.1 })
}
