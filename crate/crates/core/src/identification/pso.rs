//! Global-best particle swarm optimization on a box.

use rand::Rng;

use super::IdentError;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// `(low, high)` per dimension.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl PsoConfig {
    /// Clerc–Kennedy constriction coefficients.
    pub const INERTIA: f64 = 0.7298;
    pub const ACCEL: f64 = 1.49618;

    /// Defaults on `[low, high]^dim`.
    pub fn boxed(dim: usize, low: f64, high: f64) -> Self {
        Self {
            swarm_size: 64,
            iterations: 500,
            inertia: Self::INERTIA,
            cognitive: Self::ACCEL,
            social: Self::ACCEL,
            bounds: vec![(low, high); dim],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), IdentError> {
        if self.swarm_size < 2 {
            return Err(IdentError::Config(format!("swarm_size must be >= 2, got {}", self.swarm_size)));
        }
        if self.bounds.is_empty() {
            return Err(IdentError::Config("no search dimensions".into()));
        }
        for (d, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(IdentError::Config(format!("empty bounds in dimension {d}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

impl Default for PsoConfig {
    /// Six dimensions on `[0, 70]`.
    fn default() -> Self {
        Self::boxed(6, 0.0, 70.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub point: Vec<f64>,
    pub value: f64,
    /// Personal bests at the end of the run, best first.
    pub personal_bests: Vec<(Vec<f64>, f64)>,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Minimizes `objective` from uniformly random starting positions.
pub fn pso_minimize<F>(objective: F, config: &PsoConfig) -> Result<PsoResult, IdentError>
where
    F: Fn(&[f64]) -> f64,
{
    pso_minimize_seeded(objective, config, &[])
}

/// As [`pso_minimize`], with the first particles placed at `seeds`.
/// Extra seeds beyond the swarm size are ignored.
pub fn pso_minimize_seeded<F>(objective: F, config: &PsoConfig, seeds: &[Vec<f64>]) -> Result<PsoResult, IdentError>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let dim = config.bounds.len();
    let n = config.swarm_size;
    let mut rngs: Vec<_> = (0..n).map(|i| seed::stream(config.seed, &format!("particle{i}"))).collect();

    let mut x: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, rng) in rngs.iter_mut().enumerate() {
        let pos: Vec<f64> = match seeds.get(i) {
            Some(s) if s.len() == dim => {
                s.iter().zip(&config.bounds).map(|(&p, &(lo, hi))| p.clamp(lo, hi)).collect()
            }
            _ => config.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect(),
        };
        let vel = config
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                let w = 0.1 * (hi - lo);
                rng.random_range(-w..=w)
            })
            .collect();
        x.push(pos);
        v.push(vel);
    }

    let mut pbest = x.clone();
    let mut pval: Vec<f64> = x.iter().map(|p| finite_or_inf(objective(p))).collect();
    let mut g = argmin(&pval);

    for _ in 0..config.iterations {
        let gbest = pbest[g].clone();
        for i in 0..n {
            let rng = &mut rngs[i];
            for d in 0..dim {
                let (lo, hi) = config.bounds[d];
                let vmax = hi - lo;
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let vel = config.inertia * v[i][d]
                    + config.cognitive * r1 * (pbest[i][d] - x[i][d])
                    + config.social * r2 * (gbest[d] - x[i][d]);
                v[i][d] = vel.clamp(-vmax, vmax);
                let next = x[i][d] + v[i][d];
                if next < lo || next > hi {
                    v[i][d] = 0.0;
                }
                x[i][d] = next.clamp(lo, hi);
            }
            let f = finite_or_inf(objective(&x[i]));
            if f < pval[i] {
                pval[i] = f;
                pbest[i].clone_from(&x[i]);
            }
        }
        g = argmin(&pval);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pval[a].total_cmp(&pval[b]).then(a.cmp(&b)));
    let personal_bests = order.iter().map(|&i| (pbest[i].clone(), pval[i])).collect();
    Ok(PsoResult { point: pbest[g].clone(), value: pval[g], personal_bests })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}
