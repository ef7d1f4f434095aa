//! Identification of effective noise values `ξ` and effort ratio `γ` from a
//! 3×3 grid of observed cocontraction, plus OIE-vs-TEM model comparison.
//!
//! At an interior optimum each observation satisfies `γ u_ij = g_ij(ξ)` with
//! `g` the information drive ([`neg_grad_gamma`]). The KKT residual sums the
//! squared violations; for fixed `ξ` it is quadratic in `γ`, so `γ` is
//! profiled out in closed form and only `ξ` is searched.
//!
//! The raw residual vanishes trivially as `σ_h → 0` (no drive, and the
//! profiled `γ → 0`). The swarm therefore minimizes the scale-free form
//! `Σu² − (Σgu)²/Σg²`, the residual measured in cocontraction units, and the
//! best particles are refined by a bounded Levenberg–Marquardt step in
//! `(ξ, γ)`.
//!
//! Stationarity alone also admits local maxima of `V`. Both stages add the
//! squared second-order violations `u · max(0, g'/γ − 1)`, and the refined
//! candidates are ranked by how well their fixed points reproduce the data.
//!
//! [`neg_grad_gamma`]: crate::adaptation::neg_grad_gamma

mod polish;
mod pso;

pub use pso::{pso_minimize, pso_minimize_seeded, PsoConfig, PsoResult};

use thiserror::Error;

use crate::adaptation::{fixed_point_unchecked, neg_grad_unchecked, OieParams, TemParams, VisualDeviation};
use crate::condition::Grid3;
use crate::noise_models::ComplianceModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentError {
    #[error("invalid observed grid: {0}")]
    Data(String),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("all observed cocontraction values are zero")]
    ZeroData,
    #[error("need n > k + 1 for the small-sample correction (n = {n}, k = {k})")]
    TooFewSamples { n: usize, k: usize },
    #[error("residual sum of squares must be > 0, got {0}")]
    NonPositiveRss(f64),
    #[error("tracking-error grid has no positive entry")]
    ZeroErrors,
}

/// Participant-averaged last-trial cocontraction, `[visual][haptic]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedGrid {
    pub u: Grid3,
    /// Number of data points entering the AIC.
    pub n: usize,
}

impl ObservedGrid {
    pub fn new(u: Grid3) -> Result<Self, IdentError> {
        for (i, row) in u.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(IdentError::Data(format!("cell ({i}, {j}) = {v} outside [0, 1]")));
                }
            }
        }
        Ok(Self { u, n: 9 })
    }

    /// True when two rows or two columns coincide, so the data cannot tell
    /// the corresponding noise levels apart.
    pub fn is_degenerate(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
        let rows_eq = |a: usize, b: usize| (0..3).all(|j| close(self.u[a][j], self.u[b][j]));
        let cols_eq = |a: usize, b: usize| (0..3).all(|i| close(self.u[i][a], self.u[i][b]));
        [(0, 1), (0, 2), (1, 2)].iter().any(|&(a, b)| rows_eq(a, b) || cols_eq(a, b))
    }

    fn sum_sq(&self) -> f64 {
        self.u.iter().flatten().map(|v| v * v).sum()
    }
}

fn check_xi(xi: &[f64; 6]) -> Result<(), IdentError> {
    if let Some(v) = xi.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(IdentError::Data(format!("deviation {v} must be finite and >= 0")));
    }
    Ok(())
}

fn drives(xi: &[f64; 6], data: &ObservedGrid, m: &ComplianceModel) -> Grid3 {
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = neg_grad_unchecked(data.u[i][j], VisualDeviation::Finite(xi[i]), xi[3 + j], m);
        }
    }
    g
}

/// `Σ_ij [∂V/∂u(u_ij; σ_v^i, σ_h^j, γ)]²`.
pub fn kkt_residual(xi: &[f64; 6], gamma: f64, data: &ObservedGrid) -> Result<f64, IdentError> {
    check_xi(xi)?;
    Ok(kkt_with(xi, gamma, data, &ComplianceModel::PUBLISHED))
}

fn kkt_with(xi: &[f64; 6], gamma: f64, data: &ObservedGrid, m: &ComplianceModel) -> f64 {
    let g = drives(xi, data, m);
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d = gamma * data.u[i][j] - g[i][j];
            s += d * d;
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    /// Closed-form minimizer, clamped at 0.
    pub gamma: f64,
    /// Set when the unconstrained minimizer is not positive.
    pub violated: bool,
}

/// `γ* = Σ g_ij u_ij / Σ u_ij²`, the exact minimizer of the residual in `γ`.
pub fn optimal_gamma(xi: &[f64; 6], data: &ObservedGrid) -> Result<GammaEstimate, IdentError> {
    check_xi(xi)?;
    optimal_gamma_with(xi, data, &ComplianceModel::PUBLISHED)
}

fn optimal_gamma_with(xi: &[f64; 6], data: &ObservedGrid, m: &ComplianceModel) -> Result<GammaEstimate, IdentError> {
    let uu = data.sum_sq();
    if uu == 0.0 {
        return Err(IdentError::ZeroData);
    }
    let g = drives(xi, data, m);
    let gu: f64 = (0..9).map(|c| g[c / 3][c % 3] * data.u[c / 3][c % 3]).sum();
    let raw = gu / uu;
    Ok(GammaEstimate { gamma: raw.max(0.0), violated: raw <= 0.0 })
}

/// Profiled residual in cocontraction units, `min_c Σ (u − c g)²` with
/// `c = 1/γ`, plus the squared second-order violations at that `γ`.
fn profiled_objective(xi: &[f64; 6], data: &ObservedGrid, m: &ComplianceModel) -> f64 {
    let g = drives(xi, data, m);
    let (mut gg, mut gu, mut uu) = (0.0, 0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            gg += g[i][j] * g[i][j];
            gu += g[i][j] * data.u[i][j];
            uu += data.u[i][j] * data.u[i][j];
        }
    }
    if gg == 0.0 || gu <= 0.0 {
        return uu;
    }
    let gamma = gg / gu;
    let mut curvature = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            curvature += polish::curvature_violation(data.u[i][j], xi[i], xi[3 + j], gamma, m).powi(2);
        }
    }
    (uu - gu * gu / gg).max(0.0) + curvature
}

/// Goodness of fit and information criteria for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelScore {
    pub rss: f64,
    pub n: usize,
    pub k: usize,
    /// `ln(rss/n) + 2k/n`.
    pub aic_n: f64,
    /// `AICc/n`, absent when `n ≤ k + 1`.
    pub aicc_n: Option<f64>,
}

impl ModelScore {
    pub fn new(rss: f64, n: usize, k: usize) -> Self {
        let nf = n as f64;
        let base = (rss / nf).ln();
        let aic_n = base + 2.0 * k as f64 / nf;
        let aicc_n = (n > k + 1).then(|| aic_n + small_sample_term(n, k) / nf);
        Self { rss, n, k, aic_n, aicc_n }
    }
}

fn small_sample_term(n: usize, k: usize) -> f64 {
    let k = k as f64;
    2.0 * k * (k + 1.0) / (n as f64 - k - 1.0)
}

/// Small-sample corrected AIC divided by the sample count:
/// `[n ln(rss/n) + 2k + 2k(k+1)/(n−k−1)] / n`.
pub fn aic_normalized(rss: f64, n: usize, k: usize) -> Result<f64, IdentError> {
    if !(rss > 0.0) {
        return Err(IdentError::NonPositiveRss(rss));
    }
    if n <= k + 1 {
        return Err(IdentError::TooFewSamples { n, k });
    }
    Ok(ModelScore::new(rss, n, k).aicc_n.expect("n > k + 1"))
}

/// Uncorrected AIC divided by the sample count: `ln(rss/n) + 2k/n`.
pub fn aic_per_sample(rss: f64, n: usize, k: usize) -> Result<f64, IdentError> {
    if !(rss > 0.0) {
        return Err(IdentError::NonPositiveRss(rss));
    }
    if n == 0 {
        return Err(IdentError::TooFewSamples { n, k });
    }
    Ok(ModelScore::new(rss, n, k).aic_n)
}

/// Parameter counts: six deviations plus `γ`, and TEM's `α`, `γ`.
pub const OIE_PARAMS: usize = 7;
pub const TEM_PARAMS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// `[σ_v^0, σ_v^w, σ_v^s, σ_h^0, σ_h^w, σ_h^s]`.
    pub xi_star: [f64; 6],
    pub gamma_star: f64,
    pub gamma_violated: bool,
    /// Raw KKT residual at `(ξ*, γ*)`.
    pub kkt_residual: f64,
    /// Fixed-point cocontraction at `(ξ*, γ*)`.
    pub predicted: Grid3,
    pub oie: ModelScore,
    /// Filled in by [`compare_models`].
    pub tem: Option<ModelScore>,
    pub degenerate: bool,
}

/// Points per dimension of the coarse grid that seeds the swarm.
pub const GRID_POINTS: usize = 5;
const POLISH_STARTS: usize = 8;

/// Coarse grid, PSO refinement and least-squares polish.
pub fn identify(data: &ObservedGrid, config: &PsoConfig) -> Result<FitResult, IdentError> {
    config.validate()?;
    if config.bounds.len() != 6 {
        return Err(IdentError::Config(format!("expected 6 search dimensions, got {}", config.bounds.len())));
    }
    if data.sum_sq() == 0.0 {
        return Err(IdentError::ZeroData);
    }
    let m = ComplianceModel::PUBLISHED;
    let objective = |x: &[f64]| {
        let xi: [f64; 6] = x.try_into().expect("six dimensions");
        profiled_objective(&xi, data, &m)
    };

    let mut grid: Vec<(f64, Vec<f64>)> = Vec::with_capacity(GRID_POINTS.pow(6));
    let mut idx = [0usize; 6];
    loop {
        let p: Vec<f64> = idx
            .iter()
            .zip(&config.bounds)
            .map(|(&k, &(lo, hi))| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        grid.push((objective(&p), p));
        let mut d = 0;
        while d < 6 {
            idx[d] += 1;
            if idx[d] < GRID_POINTS {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == 6 {
            break;
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let seeds: Vec<Vec<f64>> = grid.into_iter().take(config.swarm_size).map(|(_, p)| p).collect();

    let swarm = pso_minimize_seeded(objective, config, &seeds)?;

    let mut starts: Vec<[f64; 6]> = Vec::new();
    for (p, _) in std::iter::once((swarm.point.clone(), swarm.value)).chain(swarm.personal_bests) {
        let xi: [f64; 6] = p.as_slice().try_into().expect("six dimensions");
        let distinct = starts.iter().all(|s| s.iter().zip(&xi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 1e-3);
        if distinct {
            starts.push(xi);
        }
        if starts.len() == POLISH_STARTS {
            break;
        }
    }

    // Stationary points that are not global minima of V fit the KKT
    // objective but are not equilibria, so the polished candidates are
    // ranked by how well their fixed points reproduce the data.
    let mut best: Option<(FitResult, f64)> = None;
    for xi in starts {
        let g = drives(&xi, data, &m);
        let (gg, gu): (f64, f64) = (0..9)
            .map(|c| (g[c / 3][c % 3], data.u[c / 3][c % 3]))
            .fold((0.0, 0.0), |(a, b), (gc, uc)| (a + gc * gc, b + gc * uc));
        let gamma0 = if gu > 0.0 { gg / gu } else { 1.0 };
        let start = [xi[0], xi[1], xi[2], xi[3], xi[4], xi[5], gamma0];
        let (p, cost) = polish::polish(start, &data.u, &config.bounds, &m);
        let xi_star: [f64; 6] = p[..6].try_into().expect("six dimensions");
        let fit = finish_fit(xi_star, data, &m)?;
        let better = match &best {
            None => true,
            Some((b, c)) => (fit.oie.rss, cost) < (b.oie.rss, *c),
        };
        if better {
            best = Some((fit, cost));
        }
    }
    Ok(best.expect("at least one start").0)
}

fn finish_fit(xi_star: [f64; 6], data: &ObservedGrid, m: &ComplianceModel) -> Result<FitResult, IdentError> {
    let est = optimal_gamma_with(&xi_star, data, m)?;
    let kkt_residual = kkt_with(&xi_star, est.gamma, data, m);
    let mut predicted = [[0.0; 3]; 3];
    let mut rss = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let u = if est.gamma > 0.0 {
                fixed_point_unchecked(VisualDeviation::Finite(xi_star[i]), xi_star[3 + j], est.gamma, m, OieParams::DEFAULT_U_MAX)
            } else {
                OieParams::DEFAULT_U_MAX
            };
            predicted[i][j] = u;
            rss += (u - data.u[i][j]).powi(2);
        }
    }
    Ok(FitResult {
        xi_star,
        gamma_star: est.gamma,
        gamma_violated: est.violated,
        kkt_residual,
        predicted,
        oie: ModelScore::new(rss, data.n, OIE_PARAMS),
        tem: None,
        degenerate: data.is_degenerate(),
    })
}

/// TEM steady state fitted to data: `u = c e` with `c = α/γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemFit {
    pub ratio: f64,
    pub predicted: Grid3,
    pub rss: f64,
}

impl TemFit {
    /// A parameter pair realizing the fitted ratio. Only `α/γ` is
    /// identifiable from steady-state data; `γ` is pinned at `gamma`.
    pub fn params(&self, gamma: f64) -> Option<TemParams> {
        TemParams::new(self.ratio * gamma, gamma).ok()
    }
}

/// Least-squares ratio `c = Σ u e / Σ e²`, clamped at 0.
pub fn fit_tem(data: &ObservedGrid, errors: &Grid3) -> Result<TemFit, IdentError> {
    let (mut ee, mut ue) = (0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            let e = errors[i][j];
            if !(e >= 0.0 && e.is_finite()) {
                return Err(IdentError::Data(format!("tracking error ({i}, {j}) = {e}")));
            }
            ee += e * e;
            ue += data.u[i][j] * e;
        }
    }
    if ee == 0.0 {
        return Err(IdentError::ZeroErrors);
    }
    let ratio = (ue / ee).max(0.0);
    let (predicted, rss) = tem_predictions(ratio, data, errors);
    Ok(TemFit { ratio, predicted, rss })
}

fn tem_predictions(ratio: f64, data: &ObservedGrid, errors: &Grid3) -> (Grid3, f64) {
    let mut predicted = [[0.0; 3]; 3];
    let mut rss = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            predicted[i][j] = ratio * errors[i][j];
            rss += (predicted[i][j] - data.u[i][j]).powi(2);
        }
    }
    (predicted, rss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Oie,
    Tem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub oie: ModelScore,
    pub tem: ModelScore,
    pub tem_predicted: Grid3,
    /// Prediction minus observation per cell.
    pub oie_cell_errors: Grid3,
    pub tem_cell_errors: Grid3,
    /// Lower `aic_n` wins; ties go to the model with fewer parameters.
    pub preferred: Model,
}

/// Scores the OIE fit against TEM steady states `α e_ij / γ`.
pub fn compare_models(
    data: &ObservedGrid,
    oie_fit: &FitResult,
    tem_params: &TemParams,
    errors: &Grid3,
) -> Result<Comparison, IdentError> {
    if let Some(e) = errors.iter().flatten().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(IdentError::Data(format!("tracking error {e}")));
    }
    let ratio = tem_params.alpha / tem_params.gamma;
    let (tem_predicted, tem_rss) = tem_predictions(ratio, data, errors);
    let tem = ModelScore::new(tem_rss, data.n, TEM_PARAMS);
    let mut oie_cell_errors = [[0.0; 3]; 3];
    let mut tem_cell_errors = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            oie_cell_errors[i][j] = oie_fit.predicted[i][j] - data.u[i][j];
            tem_cell_errors[i][j] = tem_predicted[i][j] - data.u[i][j];
        }
    }
    let preferred = if oie_fit.oie.aic_n < tem.aic_n { Model::Oie } else { Model::Tem };
    Ok(Comparison { oie: oie_fit.oie, tem, tem_predicted, oie_cell_errors, tem_cell_errors, preferred })
}

/// OIE fixed points at `(ξ, γ)` for each cell.
pub fn fixed_point_grid(xi: &[f64; 6], gamma: f64) -> Result<Grid3, IdentError> {
    check_xi(xi)?;
    if !(gamma > 0.0) {
        return Err(IdentError::Data(format!("gamma = {gamma} must be > 0")));
    }
    let m = ComplianceModel::PUBLISHED;
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = fixed_point_unchecked(VisualDeviation::Finite(xi[i]), xi[3 + j], gamma, &m, OieParams::DEFAULT_U_MAX);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::EffectiveNoise;

    const PUBLISHED_XI: [f64; 6] = [30.64, 63.66, 65.30, 5.06, 5.86, 7.85];

    fn synthetic() -> ObservedGrid {
        ObservedGrid::new(fixed_point_grid(&PUBLISHED_XI, 2.26).unwrap()).unwrap()
    }

    #[test]
    fn residual_zero_at_generating_parameters() {
        let data = synthetic();
        assert!(kkt_residual(&PUBLISHED_XI, 2.26, &data).unwrap() < 1e-20);
        let est = optimal_gamma(&PUBLISHED_XI, &data).unwrap();
        assert!((est.gamma - 2.26).abs() < 1e-9 && !est.violated);
    }

    #[test]
    fn residual_trivially_zero_without_drive() {
        let xi = [30.0, 40.0, 50.0, 0.0, 0.0, 0.0];
        let data = ObservedGrid::new([[0.3, 0.2, 0.1]; 3]).unwrap();
        assert_eq!(kkt_residual(&xi, 0.0, &data).unwrap(), 0.0);
        let est = optimal_gamma(&xi, &data).unwrap();
        assert_eq!(est.gamma, 0.0);
        assert!(est.violated);
    }

    #[test]
    fn perturbed_cell_gives_positive_residual() {
        let mut data = synthetic();
        data.u[1][1] += 0.01;
        assert!(kkt_residual(&PUBLISHED_XI, 2.26, &data).unwrap() > 0.0);
    }

    #[test]
    fn zero_data_is_reported() {
        let data = ObservedGrid::new([[0.0; 3]; 3]).unwrap();
        assert_eq!(optimal_gamma(&PUBLISHED_XI, &data), Err(IdentError::ZeroData));
    }

    #[test]
    fn grid_validation() {
        assert!(ObservedGrid::new([[1.2, 0.0, 0.0], [0.0; 3], [0.0; 3]]).is_err());
        assert!(ObservedGrid::new([[f64::NAN, 0.0, 0.0], [0.0; 3], [0.0; 3]]).is_err());
    }

    #[test]
    fn aic_examples() {
        let n = 1_000_000;
        assert!(aic_normalized(n as f64, n, 0).unwrap().abs() < 1e-12);
        let a = aic_normalized(0.1, 9, 2).unwrap();
        let b = aic_normalized(0.2, 9, 2).unwrap();
        assert!((b - a - 2f64.ln()).abs() < 1e-12);
        assert!(matches!(aic_normalized(0.1, 8, 7), Err(IdentError::TooFewSamples { .. })));
        assert!(aic_normalized(0.0, 9, 2).is_err());
        // oracle: 9 ln(0.01/9) + 14 + 112/1, over 9
        let oracle = (9.0 * (0.01f64 / 9.0).ln() + 14.0 + 112.0) / 9.0;
        assert!((aic_normalized(0.01, 9, 7).unwrap() - oracle).abs() < 1e-12);
        assert!((aic_per_sample(0.01, 9, 7).unwrap() - ((0.01f64 / 9.0).ln() + 14.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn round_trip_identification() {
        let data = synthetic();
        let fit = identify(&data, &PsoConfig::default()).unwrap();
        assert!(fit.kkt_residual < 1e-8, "{}", fit.kkt_residual);
        for i in 0..3 {
            for j in 0..3 {
                assert!((fit.predicted[i][j] - data.u[i][j]).abs() < 1e-3);
            }
        }
        assert!(!fit.degenerate);
        assert_eq!(kkt_residual(&fit.xi_star, fit.gamma_star, &data).unwrap(), fit.kkt_residual);
    }

    #[test]
    fn constant_grid_is_degenerate() {
        let data = ObservedGrid::new([[0.2; 3]; 3]).unwrap();
        let cfg = PsoConfig { iterations: 50, ..PsoConfig::default() };
        let fit = identify(&data, &cfg).unwrap();
        assert!(fit.degenerate);
    }

    #[test]
    fn empty_bounds_rejected() {
        let data = synthetic();
        let cfg = PsoConfig { bounds: vec![(10.0, 10.0); 6], ..PsoConfig::default() };
        assert!(matches!(identify(&data, &cfg), Err(IdentError::Config(_))));
    }

    #[test]
    fn tem_generative_case() {
        let errors = [[1.0, 2.0, 3.0], [2.0, 3.0, 4.0], [3.0, 4.0, 5.0]];
        let u = errors.map(|r| r.map(|e| 0.1 * e));
        let data = ObservedGrid::new(u).unwrap();
        let fit = fit_tem(&data, &errors).unwrap();
        assert!((fit.ratio - 0.1).abs() < 1e-12);
        assert!(fit.rss < 1e-25);
    }

    #[test]
    fn equal_predictions_rank_by_parameter_count() {
        let data = synthetic();
        let fit = finish_fit(PUBLISHED_XI, &data, &ComplianceModel::PUBLISHED).unwrap();
        // Make TEM reproduce the OIE prediction error exactly.
        let mut fake = fit.clone();
        fake.oie = ModelScore::new(0.5, 9, OIE_PARAMS);
        let tem = ModelScore::new(0.5, 9, TEM_PARAMS);
        assert!(tem.aic_n < fake.oie.aic_n);
        assert!(tem.aicc_n.unwrap() < fake.oie.aicc_n.unwrap());
    }

    #[test]
    fn published_effective_values_match_constant() {
        assert_eq!(EffectiveNoise::PUBLISHED.as_xi(), PUBLISHED_XI);
    }
}
