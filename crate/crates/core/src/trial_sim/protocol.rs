//! The experimental session: solo trials, then one block per noise
//! condition in seeded random order, with cocontraction updated between
//! trials by an adaptation rule.

use rand::seq::SliceRandom;

use super::plant::{simulate, tracking_error, PlantConfig, TrialSetup, RECORD_HZ};
use super::SimError;
use crate::adaptation::{oie_update, tem_update, EffectiveNoise, OieParams, TemParams};
use crate::condition::NoiseCondition;
use crate::emg::{decompose, normalize, trial_mean_after, Calibration, EmgError, TRANSIENT_SECONDS};
use crate::noise_models::NoiseModelConfig;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Oie(OieParams),
    Tem(TemParams),
    /// Cocontraction held at its initial value.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub solo_trials: usize,
    pub trials_per_block: usize,
    /// Conditions run as blocks; their order is shuffled per seed.
    pub conditions: Vec<NoiseCondition>,
    pub rule: Rule,
    pub u0: f64,
    pub plant: PlantConfig,
    /// Maps conditions to the effective deviations the OIE rule sees.
    pub noise: NoiseModelConfig,
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        Self {
            solo_trials: 9,
            trials_per_block: 9,
            conditions: NoiseCondition::all().to_vec(),
            rule: Rule::Oie(OieParams::default()),
            u0: 1.0,
            plant: PlantConfig::default(),
            noise: NoiseModelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub seed: u64,
    /// 0 for solo trials, then 1-based block number.
    pub block: usize,
    /// 1-based trial number within the block.
    pub trial: usize,
    pub condition: NoiseCondition,
    pub solo: bool,
    /// Cocontraction setpoint used for the trial.
    pub u_set: f64,
    pub error_deg: f64,
    /// Mean EMG-derived cocontraction after the filter transient.
    pub u_mean: f64,
    /// Min-max normalized over the interaction trials; absent for solo
    /// trials and when all interaction means coincide.
    pub u_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub block_order: Vec<NoiseCondition>,
    pub rows: Vec<DatasetRow>,
}

pub fn run_protocol(spec: &ProtocolSpec, seed: u64) -> Result<Dataset, SimError> {
    spec.plant.validate()?;
    if !(spec.u0 >= 0.0 && spec.u0.is_finite()) {
        return Err(SimError::OutOfRange { what: "u0", value: spec.u0 });
    }
    let mut order = spec.conditions.clone();
    order.shuffle(&mut seed::stream(seed, "blocks"));
    let effective = EffectiveNoise::from_regressions(&spec.noise.visual, &spec.noise.haptic)?;
    let cal = Calibration::new(spec.plant.emg_alpha0, spec.plant.emg_alpha1)?;

    let mut rows = Vec::new();
    let mut counter = 0usize;
    let mut run = |setup: TrialSetup, block: usize, trial: usize, rows: &mut Vec<DatasetRow>| -> Result<f64, SimError> {
        let trial_seed = seed::subseed(seed, &format!("trial{counter}"));
        counter += 1;
        let rec = simulate(&setup, &spec.plant, trial_seed)?;
        let error_deg = tracking_error(&rec)?;
        let d = decompose(&cal.torque(&rec.emg_f), &cal.torque(&rec.emg_e))?;
        let u_mean = trial_mean_after(&d.u, RECORD_HZ, TRANSIENT_SECONDS)?;
        rows.push(DatasetRow {
            seed,
            block,
            trial,
            condition: setup.condition,
            solo: !setup.partner,
            u_set: setup.u,
            error_deg,
            u_mean,
            u_norm: None,
        });
        Ok(error_deg)
    };

    let u = spec.u0;
    if !order.is_empty() {
        for k in 0..spec.solo_trials {
            let setup = TrialSetup { partner: false, ..TrialSetup::new(order[k % order.len()], u) };
            run(setup, 0, k + 1, &mut rows)?;
        }
    }

    let mut u = u;
    for (b, &condition) in order.iter().enumerate() {
        for k in 0..spec.trials_per_block {
            let error = run(TrialSetup::new(condition, u), b + 1, k + 1, &mut rows)?;
            u = match spec.rule {
                Rule::Oie(ref p) => {
                    let (sv, sh) = effective.at(condition);
                    oie_update(u, sv, sh, p)?
                }
                Rule::Tem(ref p) => tem_update(u, error, p)?,
                Rule::Fixed => u,
            };
        }
    }

    let interaction: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].solo).collect();
    let means: Vec<f64> = interaction.iter().map(|&i| rows[i].u_mean).collect();
    match normalize(&means) {
        Ok(norm) => {
            for (&i, n) in interaction.iter().zip(norm) {
                rows[i].u_norm = Some(n);
            }
        }
        Err(EmgError::ZeroRange) | Err(EmgError::TooShort { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(Dataset { block_order: order, rows })
}
