//! Effective sensory noise as a function of the physical noise magnitudes
//! and of cocontraction.
//!
//! Three maps feed the adaptation model:
//!
//! * visual: cloud deviation `σ_c` (mm) → `σ_v = α_v + β_v / (1 + e^{-σ_c})`
//! * haptic: perturbation amplitude `σ_p` (Nm) → `σ_h = α_p + β_p σ_p + δ_p σ_p²`
//! * compliance: cocontraction `u` → `σ_κ(u) = c0 + c1 e^{-c2 u}`
//!
//! All deviations are dimensionless model units. Cocontraction is the
//! normalized per-participant value, nominally in `[0, 1]`.

use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::numeric::{lstsq, NumericError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("{what} must be non-negative and finite, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("need at least {needed} distinct abscissae, got {got}")]
    TooFewDistinct { needed: usize, got: usize },
    #[error("regression design is rank deficient: {0}")]
    RankDeficient(#[from] NumericError),
}

pub(crate) fn check_non_negative(what: &'static str, value: f64) -> Result<f64, NoiseError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(NoiseError::Negative { what, value })
    }
}

/// Logistic `1 / (1 + e^{-x})`, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Saturating map from cloud deviation to effective visual noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualRegression {
    pub alpha_v: f64,
    pub beta_v: f64,
}

impl VisualRegression {
    pub const PUBLISHED: Self = Self { alpha_v: -1.21, beta_v: 66.18 };

    pub fn eval(&self, sigma_c: f64) -> f64 {
        self.alpha_v + self.beta_v * sigmoid(sigma_c)
    }
}

impl Default for VisualRegression {
    fn default() -> Self {
        Self::PUBLISHED
    }
}

/// Quadratic map from perturbation amplitude to effective haptic noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HapticRegression {
    pub alpha_p: f64,
    pub beta_p: f64,
    pub delta_p: f64,
}

impl HapticRegression {
    pub const PUBLISHED: Self = Self { alpha_p: 5.05, beta_p: 6.84, delta_p: 41.68 };

    pub fn eval(&self, sigma_p: f64) -> f64 {
        self.alpha_p + sigma_p * (self.beta_p + self.delta_p * sigma_p)
    }
}

impl Default for HapticRegression {
    fn default() -> Self {
        Self::PUBLISHED
    }
}

/// Motor noise from joint compliance, decreasing with cocontraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplianceModel {
    pub c0: f64,
    pub c1: f64,
    /// Decay rate per unit cocontraction.
    pub c2: f64,
}

impl ComplianceModel {
    pub const PUBLISHED: Self = Self { c0: 5.18, c1: 49.65, c2: 6.11 };

    /// `σ_κ(u)`.
    pub fn sigma_kappa(&self, u: f64) -> Result<f64, NoiseError> {
        check_non_negative("cocontraction", u)?;
        Ok(self.sigma(u))
    }

    /// `dσ_κ/du`, always negative for positive `c1`, `c2`.
    pub fn sigma_kappa_derivative(&self, u: f64) -> Result<f64, NoiseError> {
        check_non_negative("cocontraction", u)?;
        Ok(self.sigma_rate(u))
    }

    #[inline]
    pub(crate) fn sigma(&self, u: f64) -> f64 {
        self.c0 + self.c1 * (-self.c2 * u).exp()
    }

    #[inline]
    pub(crate) fn sigma_rate(&self, u: f64) -> f64 {
        -self.c1 * self.c2 * (-self.c2 * u).exp()
    }
}

impl Default for ComplianceModel {
    fn default() -> Self {
        Self::PUBLISHED
    }
}

/// Total target-relative variance `σ_t²(u) = σ_v² + σ_κ(u)²`.
pub fn sigma_t_squared(u: f64, sigma_v: f64, model: &ComplianceModel) -> Result<f64, NoiseError> {
    check_non_negative("cocontraction", u)?;
    check_non_negative("sigma_v", sigma_v)?;
    let k = model.sigma(u);
    Ok(sigma_v * sigma_v + k * k)
}

pub fn visual_effective(sigma_c: f64, reg: &VisualRegression) -> Result<f64, NoiseError> {
    check_non_negative("sigma_c", sigma_c)?;
    Ok(reg.eval(sigma_c))
}

pub fn haptic_effective(sigma_p: f64, reg: &HapticRegression) -> Result<f64, NoiseError> {
    check_non_negative("sigma_p", sigma_p)?;
    Ok(reg.eval(sigma_p))
}

fn distinct_count(xs: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Ordinary least squares for `(α_v, β_v)`. Once the sigmoid of `σ_c` is
/// evaluated the model is linear, so this is an exact linear solve.
pub fn fit_visual_regression(points: &[(f64, f64)]) -> Result<VisualRegression, NoiseError> {
    for &(sc, _) in points {
        check_non_negative("sigma_c", sc)?;
    }
    let got = distinct_count(points.iter().map(|p| p.0));
    if got < 2 {
        return Err(NoiseError::TooFewDistinct { needed: 2, got });
    }
    let design: Vec<Vec<f64>> = points.iter().map(|&(sc, _)| vec![1.0, sigmoid(sc)]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let c = lstsq(&design, &y)?;
    Ok(VisualRegression { alpha_v: c[0], beta_v: c[1] })
}

/// Constant visual model (`β_v = 0`): the offset is the mean.
pub fn fit_visual_offset(points: &[(f64, f64)]) -> Result<VisualRegression, NoiseError> {
    if points.is_empty() {
        return Err(NoiseError::TooFewDistinct { needed: 1, got: 0 });
    }
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    Ok(VisualRegression { alpha_v: mean, beta_v: 0.0 })
}

/// Least-squares quadratic; exact interpolation for three distinct points.
pub fn fit_haptic_regression(points: &[(f64, f64)]) -> Result<HapticRegression, NoiseError> {
    for &(sp, _) in points {
        check_non_negative("sigma_p", sp)?;
    }
    let got = distinct_count(points.iter().map(|p| p.0));
    if got < 3 {
        return Err(NoiseError::TooFewDistinct { needed: 3, got });
    }
    let design: Vec<Vec<f64>> = points.iter().map(|&(sp, _)| vec![1.0, sp, sp * sp]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let c = lstsq(&design, &y)?;
    Ok(HapticRegression { alpha_p: c[0], beta_p: c[1], delta_p: c[2] })
}

/// Haptic fit with `δ_p` pinned to zero.
pub fn fit_haptic_line(points: &[(f64, f64)]) -> Result<HapticRegression, NoiseError> {
    for &(sp, _) in points {
        check_non_negative("sigma_p", sp)?;
    }
    let got = distinct_count(points.iter().map(|p| p.0));
    if got < 2 {
        return Err(NoiseError::TooFewDistinct { needed: 2, got });
    }
    let design: Vec<Vec<f64>> = points.iter().map(|&(sp, _)| vec![1.0, sp]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let c = lstsq(&design, &y)?;
    Ok(HapticRegression { alpha_p: c[0], beta_p: c[1], delta_p: 0.0 })
}

/// Sum of squared residuals of a visual regression over `points`.
pub fn visual_residual(reg: &VisualRegression, points: &[(f64, f64)]) -> f64 {
    points.iter().map(|&(sc, sv)| (reg.eval(sc) - sv).powi(2)).sum()
}

/// All coefficients of the noise maps, loadable from a key=value file
/// (keys `alpha_v beta_v alpha_p beta_p delta_p c0 c1 c2`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModelConfig {
    pub visual: VisualRegression,
    pub haptic: HapticRegression,
    pub compliance: ComplianceModel,
}

impl NoiseModelConfig {
    pub fn from_kv(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        Ok(Self {
            visual: VisualRegression {
                alpha_v: cfg.f64_or("alpha_v", d.visual.alpha_v)?,
                beta_v: cfg.f64_or("beta_v", d.visual.beta_v)?,
            },
            haptic: HapticRegression {
                alpha_p: cfg.f64_or("alpha_p", d.haptic.alpha_p)?,
                beta_p: cfg.f64_or("beta_p", d.haptic.beta_p)?,
                delta_p: cfg.f64_or("delta_p", d.haptic.delta_p)?,
            },
            compliance: ComplianceModel {
                c0: cfg.f64_or("c0", d.compliance.c0)?,
                c1: cfg.f64_or("c1", d.compliance.c1)?,
                c2: cfg.f64_or("c2", d.compliance.c2)?,
            },
        })
    }
}
