//! Bounded Levenberg–Marquardt refinement of `(ξ, γ)`.
//!
//! Residuals are `r_ij = u_ij − g_ij(ξ)/γ`: the distance, in cocontraction
//! units, between each observation and the point where the stationarity
//! condition `γ u = g` would hold. Unlike the raw KKT sum this has no
//! trivial zero at `σ_h = 0`.
//!
//! A second block of residuals, `u_ij · max(0, g'_ij/γ − 1)`, is nonzero
//! only where `d²V/du² = γ − g' < 0`, that is where the observation would
//! sit on a local maximum of the cost rather than a minimum.

use crate::condition::Grid3;
use crate::noise_models::ComplianceModel;
use crate::numeric::solve_dense;

const GAMMA_MIN: f64 = 1e-9;
const GAMMA_MAX: f64 = 1e6;
const MAX_ITER: usize = 5000;

/// `g`, `∂g/∂σ_v`, `∂g/∂σ_h` at one cell.
fn drive_with_partials(u: f64, sv: f64, sh: f64, m: &ComplianceModel) -> (f64, f64, f64) {
    let k = m.sigma(u);
    let d = -2.0 * k * m.sigma_rate(u);
    let s = sv * sv + k * k;
    let b = sh * sh;
    let t = s + b;
    if t == 0.0 || b == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let t3 = t * t * t;
    let g = d * (b / t) * (b / t);
    (g, -4.0 * sv * d * b * b / t3, 4.0 * sh * d * b * s / t3)
}

/// `dg/du`, the curvature contribution of the information term.
pub(super) fn drive_slope(u: f64, sv: f64, sh: f64, m: &ComplianceModel) -> f64 {
    let k = m.sigma(u);
    let k1 = m.sigma_rate(u);
    let k2 = -m.c2 * k1;
    let s = -2.0 * k * k1;
    let ds = -2.0 * (k1 * k1 + k * k2);
    let b = sh * sh;
    let t = sv * sv + k * k + b;
    if t == 0.0 || b == 0.0 {
        return 0.0;
    }
    let w = b / t;
    let dw = b * s / (t * t);
    2.0 * w * dw * s + w * w * ds
}

/// Second-order violation `u · max(0, g'/γ − 1)`.
pub(super) fn curvature_violation(u: f64, sv: f64, sh: f64, gamma: f64, m: &ComplianceModel) -> f64 {
    u * (drive_slope(u, sv, sh, m) / gamma - 1.0).max(0.0)
}

type Jacobian = [[f64; 7]; 18];

fn residuals(p: &[f64; 7], u: &Grid3, m: &ComplianceModel) -> ([f64; 18], Jacobian) {
    let gamma = p[6];
    let mut r = [0.0; 18];
    let mut jac = [[0.0; 7]; 18];
    for i in 0..3 {
        for j in 0..3 {
            let (uc, sv, sh) = (u[i][j], p[i], p[3 + j]);
            let (g, dgv, dgh) = drive_with_partials(uc, sv, sh, m);
            let row = 3 * i + j;
            r[row] = uc - g / gamma;
            jac[row][i] = -dgv / gamma;
            jac[row][3 + j] = -dgh / gamma;
            jac[row][6] = g / (gamma * gamma);

            let q = curvature_violation(uc, sv, sh, gamma, m);
            if q > 0.0 {
                let row = 9 + row;
                r[row] = q;
                let slope = |sv: f64, sh: f64| drive_slope(uc, sv, sh, m);
                let hv = 1e-6 * sv.max(1e-3);
                let hh = 1e-6 * sh.max(1e-3);
                jac[row][i] = uc / gamma * (slope(sv + hv, sh) - slope(sv - hv, sh)) / (2.0 * hv);
                jac[row][3 + j] = uc / gamma * (slope(sv, sh + hh) - slope(sv, sh - hh)) / (2.0 * hh);
                jac[row][6] = -uc * slope(sv, sh) / (gamma * gamma);
            }
        }
    }
    (r, jac)
}

fn sumsq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn project(p: &mut [f64; 7], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
    p[6] = p[6].clamp(GAMMA_MIN, GAMMA_MAX);
}

fn bounds_of(bounds: &[(f64, f64)], i: usize) -> (f64, f64) {
    if i < 6 {
        bounds[i]
    } else {
        (GAMMA_MIN, GAMMA_MAX)
    }
}

/// Returns the refined parameters and their residual sum of squares.
///
/// Parameters resting on a bound with the gradient pushing outward are
/// frozen for that iteration, so a pinned coordinate does not stall the
/// others.
pub(crate) fn polish(start: [f64; 7], u: &Grid3, bounds: &[(f64, f64)], m: &ComplianceModel) -> ([f64; 7], f64) {
    let mut p = start;
    project(&mut p, bounds);
    let (mut r, mut jac) = residuals(&p, u, m);
    let mut cost = sumsq(&r);
    let mut lambda = 1e-3;

    for _ in 0..MAX_ITER {
        if cost < 1e-30 {
            break;
        }
        let mut jtj = [[0.0; 7]; 7];
        let mut neg_grad = [0.0; 7];
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..7 {
                neg_grad[a] -= row[a] * ri;
                for b in 0..7 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let free: Vec<usize> = (0..7)
            .filter(|&i| {
                let (lo, hi) = bounds_of(bounds, i);
                !((p[i] <= lo && neg_grad[i] < 0.0) || (p[i] >= hi && neg_grad[i] > 0.0))
            })
            .collect();
        if free.is_empty() {
            break;
        }
        let scale = free.iter().map(|&a| jtj[a][a]).fold(0.0, f64::max).max(1e-300);

        let mut improved = false;
        while lambda < 1e16 {
            let a: Vec<Vec<f64>> = free
                .iter()
                .map(|&i| {
                    free.iter().map(|&j| jtj[i][j] + if i == j { lambda * (jtj[i][i] + 1e-12 * scale) } else { 0.0 }).collect()
                })
                .collect();
            let rhs: Vec<f64> = free.iter().map(|&i| neg_grad[i]).collect();
            let Some(step) = solve_dense(a, rhs) else {
                lambda *= 4.0;
                continue;
            };
            let mut trial = p;
            for (&i, s) in free.iter().zip(&step) {
                trial[i] += s;
            }
            project(&mut trial, bounds);
            let (tr, tj) = residuals(&trial, u, m);
            let tc = sumsq(&tr);
            if tc < cost {
                improved = trial != p;
                p = trial;
                r = tr;
                jac = tj;
                cost = tc;
                lambda = (lambda / 3.0).max(1e-15);
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (p, cost)
}
