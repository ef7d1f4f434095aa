//! Optimal information estimation (OIE) model of arm cocontraction in
//! visuo-haptic tracking, with a tracking-error baseline, parameter
//! identification, a trial simulator, and an EMG processing pipeline.

pub mod adaptation;
pub mod cli;
pub mod condition;
pub mod config;
pub mod emg;
pub mod identification;
pub mod io;
pub mod noise_models;
pub mod numeric;
pub mod report;
pub mod seed;
pub mod trial_sim;
