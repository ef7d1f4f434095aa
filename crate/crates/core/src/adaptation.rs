//! Cocontraction adaptation models.
//!
//! The OIE model trades the maximum-likelihood prediction error of fused
//! visual and haptic channels,
//!
//! ```text
//! Γ(u) = σ_t²(u) σ_h² / (σ_t²(u) + σ_h²),     σ_t²(u) = σ_v² + σ_κ(u)²
//! ```
//!
//! against a quadratic effort `(γ/2) u²`. Stiffening (larger `u`) lowers the
//! compliance noise `σ_κ`, which pays off only while the visual channel is
//! sharp and the haptic channel is noisy. The TEM baseline instead grows
//! cocontraction with tracking error.

use thiserror::Error;

use crate::condition::{Grid3, HapticLevel, NoiseCondition, VisualLevel};
use crate::noise_models::{check_non_negative, ComplianceModel, HapticRegression, NoiseError, VisualRegression};
use crate::numeric::bisect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptationError {
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("parameter {name} = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },
}

/// Effective visual deviation; `Infinite` models the absence of vision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VisualDeviation {
    Finite(f64),
    Infinite,
}

impl From<f64> for VisualDeviation {
    fn from(v: f64) -> Self {
        if v.is_infinite() && v > 0.0 {
            VisualDeviation::Infinite
        } else {
            VisualDeviation::Finite(v)
        }
    }
}

impl VisualDeviation {
    fn checked(self) -> Result<Self, NoiseError> {
        match self {
            VisualDeviation::Finite(v) => check_non_negative("sigma_v", v).map(VisualDeviation::Finite),
            inf => Ok(inf),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OieParams {
    /// Effort ratio, `> 0`.
    pub gamma: f64,
    /// Step size of the gradient update, `> 0`. With 1 the update is the
    /// literal unit-step form.
    pub learning_rate: f64,
    pub compliance: ComplianceModel,
    /// Upper clamp for cocontraction.
    pub u_max: f64,
}

impl OieParams {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
    pub const DEFAULT_U_MAX: f64 = 1.5;
    /// Effort ratio identified on the combined visuo-haptic data.
    pub const PUBLISHED_GAMMA: f64 = 2.26;

    pub fn new(gamma: f64) -> Result<Self, AdaptationError> {
        Self {
            gamma,
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            compliance: ComplianceModel::PUBLISHED,
            u_max: Self::DEFAULT_U_MAX,
        }
        .validated()
    }

    pub fn with_learning_rate(mut self, eta: f64) -> Result<Self, AdaptationError> {
        self.learning_rate = eta;
        self.validated()
    }

    pub fn validated(self) -> Result<Self, AdaptationError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(AdaptationError::InvalidParam { name: "gamma", value: self.gamma, reason: "must be > 0" });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AdaptationError::InvalidParam {
                name: "learning_rate",
                value: self.learning_rate,
                reason: "must be > 0",
            });
        }
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(AdaptationError::InvalidParam { name: "u_max", value: self.u_max, reason: "must be > 0" });
        }
        Ok(self)
    }
}

impl Default for OieParams {
    fn default() -> Self {
        Self::new(Self::PUBLISHED_GAMMA).expect("published gamma is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemParams {
    /// Error gain, `> 0`.
    pub alpha: f64,
    /// Decay, in `(0, 1)`.
    pub gamma: f64,
}

impl TemParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, AdaptationError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(AdaptationError::InvalidParam { name: "alpha", value: alpha, reason: "must be > 0" });
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(AdaptationError::InvalidParam { name: "gamma", value: gamma, reason: "must lie in (0, 1)" });
        }
        Ok(Self { alpha, gamma })
    }

    /// Steady state `α e / γ` for a constant error.
    pub fn fixed_point(&self, e: f64) -> f64 {
        self.alpha * e / self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub trial: usize,
    pub u: f64,
    pub cost: f64,
}

/// Per-trial history of an iterated update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptationTrace {
    pub entries: Vec<TraceEntry>,
}

impl AdaptationTrace {
    pub fn last_u(&self) -> Option<f64> {
        self.entries.last().map(|e| e.u)
    }
}

// ---------------------------------------------------------------------------
// Unchecked kernels shared with identification
// ---------------------------------------------------------------------------

#[inline]
pub(crate) fn gamma_unchecked(u: f64, sigma_v: VisualDeviation, sigma_h: f64, m: &ComplianceModel) -> f64 {
    let h2 = sigma_h * sigma_h;
    match sigma_v {
        VisualDeviation::Infinite => h2,
        VisualDeviation::Finite(v) => {
            let k = m.sigma(u);
            let t2 = v * v + k * k;
            let den = t2 + h2;
            if den == 0.0 {
                0.0
            } else {
                t2 * h2 / den
            }
        }
    }
}

#[inline]
pub(crate) fn neg_grad_unchecked(u: f64, sigma_v: VisualDeviation, sigma_h: f64, m: &ComplianceModel) -> f64 {
    let h2 = sigma_h * sigma_h;
    match sigma_v {
        VisualDeviation::Infinite => 0.0,
        _ if h2 == 0.0 => 0.0,
        VisualDeviation::Finite(v) => {
            let k = m.sigma(u);
            let t2 = v * v + k * k;
            let w = h2 / (t2 + h2);
            // −dσ_t²/du = −2 σ_κ σ_κ'
            w * w * (-2.0 * k * m.sigma_rate(u))
        }
    }
}

#[inline]
pub(crate) fn cost_derivative_unchecked(
    u: f64,
    sigma_v: VisualDeviation,
    sigma_h: f64,
    gamma: f64,
    m: &ComplianceModel,
) -> f64 {
    gamma * u - neg_grad_unchecked(u, sigma_v, sigma_h, m)
}

#[inline]
fn cost_unchecked(u: f64, sigma_v: VisualDeviation, sigma_h: f64, gamma: f64, m: &ComplianceModel) -> f64 {
    gamma_unchecked(u, sigma_v, sigma_h, m) + 0.5 * gamma * u * u
}

fn check_inputs(u: f64, sigma_v: VisualDeviation, sigma_h: f64) -> Result<VisualDeviation, AdaptationError> {
    check_non_negative("cocontraction", u)?;
    check_non_negative("sigma_h", sigma_h)?;
    Ok(sigma_v.checked()?)
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Maximum-likelihood prediction error `Γ(u)`. With vision flagged infinite
/// this is `σ_h²`; the `0/0` corner (all deviations zero) evaluates to 0.
pub fn prediction_error(
    u: f64,
    sigma_v: impl Into<VisualDeviation>,
    sigma_h: f64,
    compliance: &ComplianceModel,
) -> Result<f64, AdaptationError> {
    let sv = check_inputs(u, sigma_v.into(), sigma_h)?;
    Ok(gamma_unchecked(u, sv, sigma_h, compliance))
}

/// `V(u) = Γ(u) + (γ/2) u²`.
pub fn cost(u: f64, sigma_v: impl Into<VisualDeviation>, sigma_h: f64, params: &OieParams) -> Result<f64, AdaptationError> {
    let sv = check_inputs(u, sigma_v.into(), sigma_h)?;
    Ok(cost_unchecked(u, sv, sigma_h, params.gamma, &params.compliance))
}

/// Information drive `−dΓ/du = [σ_h²/(σ_t²+σ_h²)]² · (−dσ_t²/du)`, never negative.
pub fn neg_grad_gamma(
    u: f64,
    sigma_v: impl Into<VisualDeviation>,
    sigma_h: f64,
    compliance: &ComplianceModel,
) -> Result<f64, AdaptationError> {
    let sv = check_inputs(u, sigma_v.into(), sigma_h)?;
    Ok(neg_grad_unchecked(u, sv, sigma_h, compliance))
}

/// `dV/du = −(−dΓ/du) + γ u`.
pub fn cost_derivative(
    u: f64,
    sigma_v: impl Into<VisualDeviation>,
    sigma_h: f64,
    params: &OieParams,
) -> Result<f64, AdaptationError> {
    let sv = check_inputs(u, sigma_v.into(), sigma_h)?;
    Ok(cost_derivative_unchecked(u, sv, sigma_h, params.gamma, &params.compliance))
}

/// The gradient step `u − η dV/du` before clamping. With `η = 1` this is the
/// literal `−dΓ/du + (1 − γ) u`.
pub fn oie_step_unclamped(
    u: f64,
    sigma_v: impl Into<VisualDeviation>,
    sigma_h: f64,
    params: &OieParams,
) -> Result<f64, AdaptationError> {
    let d = cost_derivative(u, sigma_v, sigma_h, params)?;
    Ok(u - params.learning_rate * d)
}

/// One gradient-descent trial update, clamped to `[0, u_max]`.
pub fn oie_update(
    u: f64,
    sigma_v: impl Into<VisualDeviation>,
    sigma_h: f64,
    params: &OieParams,
) -> Result<f64, AdaptationError> {
    Ok(oie_step_unclamped(u, sigma_v, sigma_h, params)?.clamp(0.0, params.u_max))
}

/// Iterates [`oie_update`] for `trials` steps starting from `u0`; entry 0 is
/// the starting point.
pub fn iterate_oie(
    u0: f64,
    sigma_v: impl Into<VisualDeviation>,
    sigma_h: f64,
    params: &OieParams,
    trials: usize,
) -> Result<AdaptationTrace, AdaptationError> {
    let sv = sigma_v.into();
    let mut u = u0;
    let mut entries = Vec::with_capacity(trials + 1);
    entries.push(TraceEntry { trial: 0, u, cost: cost(u, sv, sigma_h, params)? });
    for trial in 1..=trials {
        u = oie_update(u, sv, sigma_h, params)?;
        entries.push(TraceEntry { trial, u, cost: cost(u, sv, sigma_h, params)? });
    }
    Ok(AdaptationTrace { entries })
}

/// Number of grid intervals scanned for sign changes of `dV/du`.
pub const FIXED_POINT_GRID: usize = 1024;

/// Equilibrium cocontraction: the global minimizer of `V` on `[0, u_max]`.
///
/// `dV/du` is scanned on a uniform grid, every sign change is bisected, and
/// the candidate (roots, `0`, and `u_max` when the slope there is still
/// negative) with the lowest cost wins. Ties go to the smaller `u`.
pub fn oie_fixed_point(
    sigma_v: impl Into<VisualDeviation>,
    sigma_h: f64,
    params: &OieParams,
) -> Result<f64, AdaptationError> {
    let sv = check_inputs(0.0, sigma_v.into(), sigma_h)?;
    Ok(fixed_point_unchecked(sv, sigma_h, params.gamma, &params.compliance, params.u_max))
}

pub(crate) fn fixed_point_unchecked(
    sv: VisualDeviation,
    sigma_h: f64,
    gamma: f64,
    m: &ComplianceModel,
    u_max: f64,
) -> f64 {
    if matches!(sv, VisualDeviation::Infinite) || sigma_h == 0.0 {
        return 0.0;
    }
    let dv = |u: f64| cost_derivative_unchecked(u, sv, sigma_h, gamma, m);
    let v = |u: f64| cost_unchecked(u, sv, sigma_h, gamma, m);

    let n = FIXED_POINT_GRID;
    let step = u_max / n as f64;
    let mut candidates = vec![0.0];
    let mut prev_u = 0.0;
    let mut prev_d = dv(0.0);
    for i in 1..=n {
        let u = if i == n { u_max } else { i as f64 * step };
        let d = dv(u);
        if d == 0.0 {
            candidates.push(u);
        } else if prev_d != 0.0 && prev_d.signum() != d.signum() {
            if let Ok(root) = bisect(dv, prev_u, u, 1e-15) {
                candidates.push(root);
            }
        }
        prev_u = u;
        prev_d = d;
    }
    if prev_d < 0.0 {
        candidates.push(u_max);
    }

    let mut best_u = 0.0;
    let mut best_v = v(0.0);
    for &u in &candidates[1..] {
        let c = v(u);
        if c < best_v {
            best_v = c;
            best_u = u;
        }
    }
    best_u
}

/// TEM trial update `α e + (1 − γ) u`, clamped at 0.
pub fn tem_update(u: f64, e: f64, params: &TemParams) -> Result<f64, AdaptationError> {
    check_non_negative("cocontraction", u)?;
    check_non_negative("tracking error", e)?;
    Ok((params.alpha * e + (1.0 - params.gamma) * u).max(0.0))
}

// ---------------------------------------------------------------------------
// Grid and surface prediction
// ---------------------------------------------------------------------------

/// Effective visual and haptic deviations per level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveNoise {
    pub sigma_v: [f64; 3],
    pub sigma_h: [f64; 3],
}

impl EffectiveNoise {
    /// Identified values reported for the combined experiment.
    pub const PUBLISHED: Self = Self { sigma_v: [30.64, 63.66, 65.30], sigma_h: [5.06, 5.86, 7.85] };

    pub fn from_regressions(visual: &VisualRegression, haptic: &HapticRegression) -> Result<Self, AdaptationError> {
        let mut sigma_v = [0.0; 3];
        let mut sigma_h = [0.0; 3];
        for v in VisualLevel::ALL {
            sigma_v[v.index()] = crate::noise_models::visual_effective(v.sigma_c(), visual)?;
        }
        for h in HapticLevel::ALL {
            sigma_h[h.index()] = crate::noise_models::haptic_effective(h.sigma_p(), haptic)?;
        }
        Ok(Self { sigma_v, sigma_h })
    }

    /// The six values in `[σ_v^0, σ_v^w, σ_v^s, σ_h^0, σ_h^w, σ_h^s]` order.
    pub fn as_xi(&self) -> [f64; 6] {
        [self.sigma_v[0], self.sigma_v[1], self.sigma_v[2], self.sigma_h[0], self.sigma_h[1], self.sigma_h[2]]
    }

    pub fn from_xi(xi: &[f64; 6]) -> Self {
        Self { sigma_v: [xi[0], xi[1], xi[2]], sigma_h: [xi[3], xi[4], xi[5]] }
    }

    pub fn at(&self, c: NoiseCondition) -> (f64, f64) {
        (self.sigma_v[c.visual.index()], self.sigma_h[c.haptic.index()])
    }
}

/// Fixed-point cocontraction for each of the nine cells.
pub fn predict_grid_effective(noise: &EffectiveNoise, params: &OieParams) -> Result<Grid3, AdaptationError> {
    let mut grid = [[0.0; 3]; 3];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = oie_fixed_point(noise.sigma_v[i], noise.sigma_h[j], params)?;
        }
    }
    Ok(grid)
}

/// Composes the noise regressions with the fixed point over the 3×3 grid.
pub fn predict_grid(
    visual: &VisualRegression,
    haptic: &HapticRegression,
    params: &OieParams,
) -> Result<Grid3, AdaptationError> {
    predict_grid_effective(&EffectiveNoise::from_regressions(visual, haptic)?, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub sigma_c_mm: f64,
    pub sigma_p_nm: f64,
    pub sigma_v_eff: f64,
    pub sigma_h_eff: f64,
    pub u_star: f64,
}

/// Fixed-point surface on an `n_c × n_p` mesh spanning `[0, c_max] × [0, p_max]`.
pub fn predict_mesh(
    visual: &VisualRegression,
    haptic: &HapticRegression,
    params: &OieParams,
    (c_max, n_c): (f64, usize),
    (p_max, n_p): (f64, usize),
) -> Result<Vec<SurfacePoint>, AdaptationError> {
    let axis = |max: f64, n: usize, k: usize| if n <= 1 { 0.0 } else { max * k as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(n_c * n_p);
    for ic in 0..n_c {
        let sigma_c_mm = axis(c_max, n_c, ic);
        let sv = crate::noise_models::visual_effective(sigma_c_mm, visual)?;
        for ip in 0..n_p {
            let sigma_p_nm = axis(p_max, n_p, ip);
            let sh = crate::noise_models::haptic_effective(sigma_p_nm, haptic)?;
            let u_star = oie_fixed_point(sv, sh, params)?;
            out.push(SurfacePoint { sigma_c_mm, sigma_p_nm, sigma_v_eff: sv, sigma_h_eff: sh, u_star });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: ComplianceModel = ComplianceModel::PUBLISHED;

    fn p(gamma: f64) -> OieParams {
        OieParams::new(gamma).unwrap()
    }

    #[test]
    fn prediction_error_examples() {
        // σ_t² = 100 and σ_h² = 25 need σ_κ = 10 with σ_v = 0: pick a
        // compliance constant in u.
        let flat = ComplianceModel { c0: 10.0, c1: 0.0, c2: 1.0 };
        assert!((prediction_error(0.3, 0.0, 5.0, &flat).unwrap() - 20.0).abs() < 1e-12);
        let flat_s = ComplianceModel { c0: 4.0, c1: 0.0, c2: 1.0 };
        assert!((prediction_error(0.0, 0.0, 4.0, &flat_s).unwrap() - 8.0).abs() < 1e-12);
        let blind = prediction_error(0.4, VisualDeviation::Infinite, 5.06, &M).unwrap();
        assert!((blind - 25.6036).abs() < 1e-12);
        let zero = ComplianceModel { c0: 0.0, c1: 0.0, c2: 1.0 };
        assert_eq!(prediction_error(0.0, 0.0, 0.0, &zero).unwrap(), 0.0);
        assert!(prediction_error(-0.1, 1.0, 1.0, &M).is_err());
        assert!(prediction_error(0.1, 1.0, -1.0, &M).is_err());
    }

    #[test]
    fn cost_examples() {
        let params = p(2.26);
        let g0 = prediction_error(0.0, 30.0, 5.0, &M).unwrap();
        assert_eq!(cost(0.0, 30.0, 5.0, &params).unwrap(), g0);
        let g1 = prediction_error(1.0, 30.64, 5.06, &M).unwrap();
        assert!((cost(1.0, 30.64, 5.06, &params).unwrap() - (g1 + 1.13)).abs() < 1e-12);
        let tiny = p(1e-12);
        let u = 0.7;
        assert!((cost(u, 30.0, 5.0, &tiny).unwrap() - prediction_error(u, 30.0, 5.0, &M).unwrap()).abs() < 1e-11);
        assert!(OieParams::new(0.0).is_err());
    }

    #[test]
    fn neg_grad_examples() {
        assert_eq!(neg_grad_gamma(0.3, 30.0, 0.0, &M).unwrap(), 0.0);
        assert_eq!(neg_grad_gamma(0.3, VisualDeviation::Infinite, 5.0, &M).unwrap(), 0.0);
        let g = neg_grad_gamma(0.2, 30.64, 5.06, &M).unwrap();
        // independent scalar evaluation
        let k = 5.18 + 49.65 * (-6.11f64 * 0.2).exp();
        let dk = -49.65 * 6.11 * (-6.11f64 * 0.2).exp();
        let t2 = 30.64f64.powi(2) + k * k;
        let h2 = 5.06f64.powi(2);
        let oracle = (h2 / (t2 + h2)).powi(2) * (-2.0 * k * dk);
        assert!((g - oracle).abs() < 1e-12);
        assert!((g - 1.26).abs() < 0.01);
        let h = 1e-6;
        let fd = -(prediction_error(0.2 + h, 30.64, 5.06, &M).unwrap()
            - prediction_error(0.2 - h, 30.64, 5.06, &M).unwrap())
            / (2.0 * h);
        assert!(((g - fd) / g).abs() < 1e-6);
    }

    #[test]
    fn update_examples() {
        let params = p(2.26).with_learning_rate(1.0).unwrap();
        let raw = oie_step_unclamped(0.5, 30.0, 0.0, &params).unwrap();
        assert!((raw + 0.63).abs() < 1e-12);
        assert_eq!(oie_update(0.5, 30.0, 0.0, &params).unwrap(), 0.0);
        let small = p(2.26);
        assert!(oie_update(0.0, 30.64, 5.06, &small).unwrap() > 0.0);
        let star = oie_fixed_point(30.64, 5.06, &small).unwrap();
        assert!((oie_update(star, 30.64, 5.06, &small).unwrap() - star).abs() < 1e-14);
    }

    #[test]
    fn literal_unit_step_identity() {
        let params = p(2.26).with_learning_rate(1.0).unwrap();
        for u in [0.0, 0.1, 0.4, 1.3] {
            let literal = neg_grad_gamma(u, 40.0, 6.0, &M).unwrap() + (1.0 - 2.26) * u;
            let step = oie_step_unclamped(u, 40.0, 6.0, &params).unwrap();
            assert!((literal - step).abs() < 1e-13);
        }
    }

    #[test]
    fn fixed_point_examples() {
        let params = p(2.26);
        for sh in [0.0, 1.0, 5.06, 20.0] {
            assert_eq!(oie_fixed_point(VisualDeviation::Infinite, sh, &params).unwrap(), 0.0);
        }
        assert_eq!(oie_fixed_point(30.0, 0.0, &params).unwrap(), 0.0);
        let u = oie_fixed_point(30.64, 5.06, &params).unwrap();
        assert!(u > 0.2 && u < 0.4, "{u}");
        assert!(cost_derivative(u, 30.64, 5.06, &params).unwrap().abs() < 1e-9);
        // regression baseline from the grid+bisection oracle
        assert!((u - 0.295_578_959_285).abs() < 1e-9, "{u}");
    }

    #[test]
    fn tem_examples() {
        let half = TemParams::new(1.0, 0.5).unwrap();
        assert_eq!(tem_update(1.0, 0.0, &half).unwrap(), 0.5);
        let t = TemParams::new(0.1, 0.2).unwrap();
        assert!((tem_update(0.5, 2.0, &t).unwrap() - 0.6).abs() < 1e-15);
        let mut u = 0.0;
        for _ in 0..((10.0 / t.gamma) as usize * 20) {
            u = tem_update(u, 2.0, &t).unwrap();
        }
        assert!((u - t.fixed_point(2.0)).abs() < 1e-9);
        assert!(TemParams::new(0.1, 1.0).is_err());
        assert!(TemParams::new(0.0, 0.5).is_err());
    }

    #[test]
    fn grid_trends_and_symmetry() {
        let params = p(2.26);
        let g = predict_grid_effective(&EffectiveNoise::PUBLISHED, &params).unwrap();
        for row in &g {
            assert!(row[0] < row[1] && row[1] < row[2]);
        }
        for j in 0..3 {
            assert!(g[0][j] > g[1][j] && g[1][j] > g[2][j]);
        }
        let flat = EffectiveNoise { sigma_v: [40.0; 3], sigma_h: [6.0; 3] };
        let c = predict_grid_effective(&flat, &params).unwrap();
        assert!(c.iter().flatten().all(|&x| x == c[0][0]));
    }

    #[test]
    fn iterate_converges_to_fixed_point() {
        let params = p(2.26);
        let trace = iterate_oie(1.0, 30.64, 5.06, &params, 2000).unwrap();
        let star = oie_fixed_point(30.64, 5.06, &params).unwrap();
        assert!((trace.last_u().unwrap() - star).abs() < 1e-9);
        assert!(trace.entries.windows(2).all(|w| w[1].cost <= w[0].cost + 1e-12));
    }
}
