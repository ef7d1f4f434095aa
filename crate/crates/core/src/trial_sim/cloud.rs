//! The eight-dot visual cloud.
//!
//! Each dot carries offsets drawn relative to the target: a vertical offset
//! (mm, does not affect the perceived angle), an angular offset (mm) and a
//! velocity offset (mm/s) that makes the dot drift during its 100 ms life.
//! Ages are integer microseconds so refresh counts are exact.

use rand::Rng;
use rand_distr::StandardNormal;

pub const DOTS: usize = 8;
pub const LIFETIME_US: u64 = 100_000;
pub const STAGGER_US: u64 = LIFETIME_US / DOTS as u64;
pub const VERTICAL_SD_MM: f64 = 15.0;
pub const VELOCITY_SD_MM_S: f64 = 101.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dot {
    pub vertical_mm: f64,
    pub angular_mm: f64,
    pub velocity_mm_s: f64,
    pub age_us: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudFrame {
    pub dots: [Dot; DOTS],
}

fn draw<R: Rng + ?Sized>(rng: &mut R, sigma_c: f64, age_us: u64) -> Dot {
    let v: f64 = rng.sample(StandardNormal);
    let a: f64 = rng.sample(StandardNormal);
    let w: f64 = rng.sample(StandardNormal);
    Dot { vertical_mm: VERTICAL_SD_MM * v, angular_mm: sigma_c * a, velocity_mm_s: VELOCITY_SD_MM_S * w, age_us }
}

impl CloudFrame {
    /// Fresh cloud with ages staggered by 12.5 ms.
    pub fn new<R: Rng + ?Sized>(sigma_c: f64, rng: &mut R) -> Self {
        let dots = std::array::from_fn(|k| draw(rng, sigma_c, k as u64 * STAGGER_US));
        Self { dots }
    }

    /// Perceived dot angles in degrees around `target_deg`.
    pub fn angles(&self, target_deg: f64, gain_deg_per_mm: f64) -> [f64; DOTS] {
        self.dots.map(|d| {
            let age_s = d.age_us as f64 * 1e-6;
            target_deg + gain_deg_per_mm * (d.angular_mm + d.velocity_mm_s * age_s)
        })
    }

    pub fn centroid(&self, target_deg: f64, gain_deg_per_mm: f64) -> f64 {
        self.angles(target_deg, gain_deg_per_mm).iter().sum::<f64>() / DOTS as f64
    }
}

/// Ages every dot by `dt_us` and redraws those reaching the lifetime; the
/// overshoot carries into the new age. Returns the number of redraws.
pub fn cloud_step<R: Rng + ?Sized>(state: &mut CloudFrame, dt_us: u64, sigma_c: f64, rng: &mut R) -> usize {
    let mut refreshed = 0;
    for dot in state.dots.iter_mut() {
        let mut age = dot.age_us + dt_us;
        while age >= LIFETIME_US {
            age -= LIFETIME_US;
            *dot = draw(rng, sigma_c, age);
            refreshed += 1;
        }
        dot.age_us = age;
    }
    refreshed
}
