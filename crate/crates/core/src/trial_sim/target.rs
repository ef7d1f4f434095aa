//! Multi-sine target, offset zero set, and torque perturbation.

use rand::Rng;

use super::SimError;
use crate::numeric::bisect;

/// Target amplitude in degrees.
pub const AMPLITUDE_DEG: f64 = 18.5;
/// Angular frequencies of the two factors, rad/s.
pub const OMEGA_A: f64 = 2.031;
pub const OMEGA_B: f64 = 1.093;
/// Trial duration in seconds.
pub const TRIAL_SECONDS: f64 = 20.0;
/// Perturbation sine arguments, rad/s.
pub const PERT_OMEGA_A: f64 = 25.0;
pub const PERT_OMEGA_B: f64 = 30.0;

/// What the target does during a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetSpec {
    /// `18.5 sin(2.031 (t + t0)) sin(1.093 (t + t0))` degrees.
    MultiSine,
    /// Held at a fixed angle (degrees).
    Constant(f64),
}

impl TargetSpec {
    pub(crate) fn position(&self, t: f64, t0: f64) -> f64 {
        match *self {
            TargetSpec::MultiSine => multisine(t + t0),
            TargetSpec::Constant(c) => c,
        }
    }
}

fn multisine(s: f64) -> f64 {
    AMPLITUDE_DEG * (OMEGA_A * s).sin() * (OMEGA_B * s).sin()
}

/// Target angle in degrees at trial time `t ∈ [0, 20]`.
pub fn target_position(t: f64, t0: f64) -> Result<f64, SimError> {
    if !(0.0..=TRIAL_SECONDS).contains(&t) {
        return Err(SimError::OutOfRange { what: "t", value: t });
    }
    Ok(multisine(t + t0))
}

/// Line frequencies of the target in Hz: `|ω_a ∓ ω_b| / 2π`.
pub fn target_frequencies_hz() -> [f64; 2] {
    let tau = std::f64::consts::TAU;
    [(OMEGA_A - OMEGA_B) / tau, (OMEGA_A + OMEGA_B) / tau]
}

/// Line frequencies of the perturbation in Hz.
pub fn perturbation_frequencies_hz() -> [f64; 2] {
    let tau = std::f64::consts::TAU;
    [(PERT_OMEGA_B - PERT_OMEGA_A) / tau, (PERT_OMEGA_B + PERT_OMEGA_A) / tau]
}

/// All `t ∈ [0, 20]` where either target factor vanishes, ascending,
/// each located by bisection to 1e-9 s.
pub fn offset_zero_set() -> Vec<f64> {
    let mut zeros = vec![0.0];
    for omega in [OMEGA_A, OMEGA_B] {
        let f = |t: f64| (omega * t).sin();
        let step = 0.05;
        let mut a = step;
        while a < TRIAL_SECONDS {
            let b = (a + step).min(TRIAL_SECONDS);
            if f(a).signum() != f(b).signum() {
                if let Ok(z) = bisect(f, a, b, 1e-10) {
                    zeros.push(z);
                }
            }
            a = b;
        }
    }
    zeros.sort_by(f64::total_cmp);
    zeros
}

/// Uniform draw from [`offset_zero_set`].
pub fn sample_offset<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let zeros = offset_zero_set();
    zeros[rng.random_range(0..zeros.len())]
}

/// `σ_p sin(25 t) sin(30 t)` in Nm.
pub fn perturbation_torque(t: f64, sigma_p: f64) -> Result<f64, SimError> {
    if !(0.0..=TRIAL_SECONDS).contains(&t) {
        return Err(SimError::OutOfRange { what: "t", value: t });
    }
    Ok(perturbation_unchecked(t, sigma_p))
}

pub(crate) fn perturbation_unchecked(t: f64, sigma_p: f64) -> f64 {
    sigma_p * (PERT_OMEGA_A * t).sin() * (PERT_OMEGA_B * t).sin()
}
