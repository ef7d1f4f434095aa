//! Wrist plant, controller stand-in, and the trial integrator.
//!
//! Angles are in degrees, torques in Nm. The human wrist is a rotational
//! mass pulled toward its motion plan by a muscle spring whose stiffness
//! grows with cocontraction, and toward the partner by the virtual coupling
//! spring:
//!
//! ```text
//! I q̈ = −b q̇ + K(u) (plan − q) + 0.03 (q_c − q) + τ_pert
//! ```
//!
//! with `b` and `K` in per-radian units. The plan is a first-order low-pass
//! of the perceived target (cloud centroid, or the sharp target in V0). The
//! partner is a critically damped tracker of the true target.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::cloud::{cloud_step, CloudFrame};
use super::target::{perturbation_unchecked, TargetSpec, TRIAL_SECONDS};
use super::SimError;
use crate::condition::{NoiseCondition, VisualLevel};
use crate::config::{ConfigError, KvConfig};
use crate::seed;

const DEG: f64 = PI / 180.0;

/// Coupling stiffness in Nm per degree.
pub const COUPLING_NM_PER_DEG: f64 = 0.03;
/// Recording and display rate.
pub const RECORD_HZ: f64 = 100.0;
pub const SAMPLES: usize = 2000;
const FRAME_US: u64 = 10_000;

/// `0.03 (q_c − q)` in Nm.
pub fn coupling_torque(q_c: f64, q: f64) -> f64 {
    COUPLING_NM_PER_DEG * (q_c - q)
}

/// Physical and synthetic-EMG parameters of a trial. None of these values
/// are measured; all are overridable from a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    /// Wrist inertia, kg·m².
    pub inertia: f64,
    /// Viscous damping, Nm·s/rad.
    pub damping: f64,
    /// `K(u) = k0 + k1 u`, Nm/rad.
    pub k0: f64,
    pub k1: f64,
    /// Gain applied to the perceived target before the plan filter.
    pub plan_gain: f64,
    pub plan_cutoff_hz: f64,
    /// Cloud angular offsets: degrees per mm.
    pub screen_gain: f64,
    pub kp: f64,
    pub kd: f64,
    /// Controller-side perception noise, degrees (one draw per frame).
    pub controller_noise_deg: f64,
    /// Coupling stiffness, Nm/deg.
    pub coupling: f64,
    /// Integration step, seconds.
    pub dt: f64,
    /// Cocontraction torque per unit `u`, Nm.
    pub emg_cocontraction_gain: f64,
    /// Envelope-to-torque calibration used to synthesize envelopes.
    pub emg_alpha0: f64,
    pub emg_alpha1: f64,
    /// Additive envelope noise sd, envelope units.
    pub emg_noise_sd: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            inertia: 0.005,
            damping: 0.05,
            k0: 0.1,
            k1: 2.0,
            plan_gain: 1.0,
            plan_cutoff_hz: 2.0,
            screen_gain: 0.25,
            kp: 400.0,
            kd: 40.0,
            controller_noise_deg: 0.0,
            coupling: COUPLING_NM_PER_DEG,
            dt: 0.001,
            emg_cocontraction_gain: 1.0,
            emg_alpha0: 1.0,
            emg_alpha1: 0.05,
            emg_noise_sd: 0.0,
        }
    }
}

impl PlantConfig {
    pub fn stiffness(&self, u: f64) -> f64 {
        self.k0 + self.k1 * u
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("inertia", self.inertia),
            ("damping", self.damping),
            ("k1", self.k1),
            ("plan_cutoff_hz", self.plan_cutoff_hz),
            ("dt", self.dt),
            ("emg_alpha0", self.emg_alpha0),
            ("emg_alpha1", self.emg_alpha1),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("k0", self.k0),
            ("plan_gain", self.plan_gain),
            ("screen_gain", self.screen_gain),
            ("kp", self.kp),
            ("kd", self.kd),
            ("controller_noise_deg", self.controller_noise_deg),
            ("coupling", self.coupling),
            ("emg_cocontraction_gain", self.emg_cocontraction_gain),
            ("emg_noise_sd", self.emg_noise_sd),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        let per_frame = 1.0 / RECORD_HZ / self.dt;
        if (per_frame - per_frame.round()).abs() > 1e-9 || per_frame.round() < 1.0 {
            return Err(SimError::Config(format!("dt = {} must divide the 10 ms frame", self.dt)));
        }
        Ok(())
    }

    fn substeps(&self) -> usize {
        (1.0 / RECORD_HZ / self.dt).round() as usize
    }

    pub fn from_kv(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        Ok(Self {
            inertia: cfg.f64_or("plant.inertia", d.inertia)?,
            damping: cfg.f64_or("plant.damping", d.damping)?,
            k0: cfg.f64_or("plant.k0", d.k0)?,
            k1: cfg.f64_or("plant.k1", d.k1)?,
            plan_gain: cfg.f64_or("plant.plan_gain", d.plan_gain)?,
            plan_cutoff_hz: cfg.f64_or("plant.plan_cutoff_hz", d.plan_cutoff_hz)?,
            screen_gain: cfg.f64_or("plant.screen_gain", d.screen_gain)?,
            kp: cfg.f64_or("controller.kp", d.kp)?,
            kd: cfg.f64_or("controller.kd", d.kd)?,
            controller_noise_deg: cfg.f64_or("controller.noise_deg", d.controller_noise_deg)?,
            coupling: cfg.f64_or("plant.coupling", d.coupling)?,
            dt: cfg.f64_or("plant.dt", d.dt)?,
            emg_cocontraction_gain: cfg.f64_or("emg.cocontraction_gain", d.emg_cocontraction_gain)?,
            emg_alpha0: cfg.f64_or("emg.alpha0", d.emg_alpha0)?,
            emg_alpha1: cfg.f64_or("emg.alpha1", d.emg_alpha1)?,
            emg_noise_sd: cfg.f64_or("emg.noise_sd", d.emg_noise_sd)?,
        })
    }
}

/// Critically damped (by default) second-order tracker,
/// `q̈_c = kp (target − q_c) − kd q̇_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerStandin {
    pub kp: f64,
    pub kd: f64,
}

impl ControllerStandin {
    pub fn accel(&self, q_c: f64, qd_c: f64, target: f64) -> f64 {
        self.kp * (target - q_c) - self.kd * qd_c
    }

    /// Tracks `target(t)` from rest at `q_c0` with RK4 steps of `dt`;
    /// returns `(t, q_c)` at every step.
    pub fn track(&self, target: impl Fn(f64) -> f64, q_c0: f64, t_end: f64, dt: f64) -> Vec<(f64, f64)> {
        let n = (t_end / dt).round() as usize;
        let mut out = Vec::with_capacity(n + 1);
        let (mut q, mut v) = (q_c0, 0.0);
        out.push((0.0, q));
        for k in 0..n {
            let t = k as f64 * dt;
            let f = |t: f64, q: f64, v: f64| (v, self.accel(q, v, target(t)));
            let (a1, b1) = f(t, q, v);
            let (a2, b2) = f(t + dt / 2.0, q + dt / 2.0 * a1, v + dt / 2.0 * b1);
            let (a3, b3) = f(t + dt / 2.0, q + dt / 2.0 * a2, v + dt / 2.0 * b2);
            let (a4, b4) = f(t + dt, q + dt * a3, v + dt * b3);
            q += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            out.push(((k + 1) as f64 * dt, q));
        }
        out
    }
}

/// One trial's inputs beyond the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSetup {
    pub condition: NoiseCondition,
    pub u: f64,
    pub target: TargetSpec,
    /// Without a partner the coupling spring is absent.
    pub partner: bool,
}

impl TrialSetup {
    pub fn new(condition: NoiseCondition, u: f64) -> Self {
        Self { condition, u, target: TargetSpec::MultiSine, partner: true }
    }
}

/// Uniformly sampled trial series at 100 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub t: Vec<f64>,
    pub q_star: Vec<f64>,
    pub q: Vec<f64>,
    pub q_c: Vec<f64>,
    pub tau_couple: Vec<f64>,
    pub tau_pert: Vec<f64>,
    pub emg_f: Vec<f64>,
    pub emg_e: Vec<f64>,
    pub condition: NoiseCondition,
    pub seed: u64,
    pub u: f64,
    pub t0: f64,
    /// Final wrist velocity, deg/s.
    pub final_velocity: f64,
}

impl TrialRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Integrates one trial with the multi-sine target and a partner.
pub fn simulate_trial(condition: NoiseCondition, u: f64, plant: &PlantConfig, seed: u64) -> Result<TrialRecord, SimError> {
    simulate(&TrialSetup::new(condition, u), plant, seed)
}

/// State `[q, q̇, plan, q_c, q̇_c]`.
type State = [f64; 5];

pub fn simulate(setup: &TrialSetup, plant: &PlantConfig, seed: u64) -> Result<TrialRecord, SimError> {
    plant.validate()?;
    if !(setup.u >= 0.0 && setup.u.is_finite()) {
        return Err(SimError::OutOfRange { what: "u", value: setup.u });
    }
    let mut t0_rng = seed::stream(seed, "t0");
    let mut cloud_rng = seed::stream(seed, "cloud");
    let mut ctrl_rng = seed::stream(seed, "controller");
    let mut emg_rng = seed::stream(seed, "emg");

    let t0 = match setup.target {
        TargetSpec::MultiSine => super::target::sample_offset(&mut t0_rng),
        TargetSpec::Constant(_) => 0.0,
    };
    let target = |t: f64| setup.target.position(t, t0);
    let sigma_c = setup.condition.sigma_c();
    let sigma_p = setup.condition.sigma_p();
    let clouded = setup.condition.visual != VisualLevel::V0;
    let mut cloud = CloudFrame::new(sigma_c, &mut cloud_rng);

    let k_u = plant.stiffness(setup.u);
    let coupling = if setup.partner { plant.coupling } else { 0.0 };
    let wc = 2.0 * PI * plant.plan_cutoff_hz;
    let ctrl = ControllerStandin { kp: plant.kp, kd: plant.kd };
    let dt = plant.dt;
    let substeps = plant.substeps();

    let muscle = |s: &State| k_u * (s[2] - s[0]) * DEG;
    let deriv = |t: f64, s: &State, perceived: f64, ctrl_target: f64| -> State {
        let torque = muscle(s) - plant.damping * s[1] * DEG
            + coupling * (s[3] - s[0])
            + perturbation_unchecked(t, sigma_p);
        [
            s[1],
            torque / plant.inertia / DEG,
            wc * (plant.plan_gain * perceived - s[2]),
            s[4],
            ctrl.accel(s[3], s[4], ctrl_target),
        ]
    };

    let mut s: State = [0.0; 5];
    let mut rec = TrialRecord {
        t: Vec::with_capacity(SAMPLES),
        q_star: Vec::with_capacity(SAMPLES),
        q: Vec::with_capacity(SAMPLES),
        q_c: Vec::with_capacity(SAMPLES),
        tau_couple: Vec::with_capacity(SAMPLES),
        tau_pert: Vec::with_capacity(SAMPLES),
        emg_f: Vec::with_capacity(SAMPLES),
        emg_e: Vec::with_capacity(SAMPLES),
        condition: setup.condition,
        seed,
        u: setup.u,
        t0,
        final_velocity: 0.0,
    };
    let base = plant.emg_cocontraction_gain * setup.u;

    for frame in 0..SAMPLES {
        let t = frame as f64 / RECORD_HZ;
        let q_star = target(t);
        let perceived = if clouded { cloud.centroid(q_star, plant.screen_gain) } else { q_star };
        let ctrl_noise = if plant.controller_noise_deg > 0.0 {
            plant.controller_noise_deg * ctrl_rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };

        let tau_m = muscle(&s);
        let noise = |rng: &mut rand_chacha::ChaCha8Rng| {
            if plant.emg_noise_sd > 0.0 {
                plant.emg_noise_sd * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        };
        rec.t.push(t);
        rec.q_star.push(q_star);
        rec.q.push(s[0]);
        rec.q_c.push(s[3]);
        rec.tau_couple.push(coupling_torque(s[3], s[0]));
        rec.tau_pert.push(perturbation_unchecked(t, sigma_p));
        rec.emg_f.push((base + tau_m.max(0.0)) / plant.emg_alpha0 + noise(&mut emg_rng));
        rec.emg_e.push((base + (-tau_m).max(0.0)) / plant.emg_alpha0 + noise(&mut emg_rng));

        for k in 0..substeps {
            let ts = t + k as f64 * dt;
            let ct = |tt: f64| target(tt) + ctrl_noise;
            let k1 = deriv(ts, &s, perceived, ct(ts));
            let s2 = add(&s, &k1, dt / 2.0);
            let k2 = deriv(ts + dt / 2.0, &s2, perceived, ct(ts + dt / 2.0));
            let s3 = add(&s, &k2, dt / 2.0);
            let k3 = deriv(ts + dt / 2.0, &s3, perceived, ct(ts + dt / 2.0));
            let s4 = add(&s, &k3, dt);
            let k4 = deriv(ts + dt, &s4, perceived, ct(ts + dt));
            for i in 0..5 {
                s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t: t + 1.0 / RECORD_HZ });
        }
        if clouded {
            cloud_step(&mut cloud, FRAME_US, sigma_c, &mut cloud_rng);
        }
    }
    debug_assert!((SAMPLES as f64 / RECORD_HZ - TRIAL_SECONDS).abs() < 1e-12);
    rec.final_velocity = s[1];
    Ok(rec)
}

fn add(s: &State, k: &State, h: f64) -> State {
    std::array::from_fn(|i| s[i] + h * k[i])
}

/// RMS of `q* − q` over the record.
pub fn tracking_error(rec: &TrialRecord) -> Result<f64, SimError> {
    if rec.q.is_empty() || rec.q.len() != rec.q_star.len() {
        return Err(SimError::Empty);
    }
    let n = rec.q.len() as f64;
    let ss: f64 = rec.q_star.iter().zip(&rec.q).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / n).sqrt())
}
