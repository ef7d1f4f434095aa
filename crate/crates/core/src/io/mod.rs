//! Tabular formats, figures, and run manifests.

pub mod svg;
pub mod table;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use table::{fmt_num, parse_num, round_sig, Table};

use crate::adaptation::SurfacePoint;
use crate::condition::{Grid3, HapticLevel, NoiseCondition, VisualLevel};
use crate::emg::Spectrum;
use crate::identification::{Comparison, FitResult};
use crate::trial_sim::protocol::Dataset;
use crate::trial_sim::TrialRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("input schema: {0}")]
    Schema(String),
    #[error("nothing to plot: {0}")]
    Empty(String),
}

impl IoError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        IoError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn record_table(rec: &TrialRecord) -> Table {
    let mut t = Table::new(&["t", "q_star", "q", "q_c", "tau_couple", "tau_pert", "emg_f", "emg_e"]);
    for k in 0..rec.len() {
        t.push_nums(&[
            rec.t[k],
            rec.q_star[k],
            rec.q[k],
            rec.q_c[k],
            rec.tau_couple[k],
            rec.tau_pert[k],
            rec.emg_f[k],
            rec.emg_e[k],
        ]);
    }
    t
}

pub fn dataset_table(ds: &Dataset) -> Table {
    let mut t = Table::new(&[
        "seed",
        "block",
        "trial",
        "visual_level",
        "haptic_level",
        "solo",
        "u_set",
        "error_deg",
        "u_mean",
        "u_norm",
    ]);
    for r in &ds.rows {
        t.push(vec![
            r.seed.to_string(),
            r.block.to_string(),
            r.trial.to_string(),
            r.condition.visual.to_string(),
            r.condition.haptic.to_string(),
            r.solo.to_string(),
            fmt_num(r.u_set),
            fmt_num(r.error_deg),
            fmt_num(r.u_mean),
            opt(r.u_norm),
        ]);
    }
    t
}

/// `visual_level, haptic_level, <value_col>` with one row per cell.
pub fn grid_table(grid: &Grid3, value_col: &str) -> Table {
    let mut t = Table::new(&["visual_level", "haptic_level", value_col]);
    for c in NoiseCondition::all() {
        t.push(vec![c.visual.to_string(), c.haptic.to_string(), fmt_num(grid[c.visual.index()][c.haptic.index()])]);
    }
    t
}

/// Reads a complete 3×3 grid; every cell must appear exactly once.
pub fn read_grid(table: &Table, value_col: &str) -> Result<Grid3, IoError> {
    table.require(&["visual_level", "haptic_level", value_col])?;
    let vis = table.column_str("visual_level")?;
    let hap = table.column_str("haptic_level")?;
    let vals = table.column_f64(value_col)?;
    let mut grid = [[f64::NAN; 3]; 3];
    for k in 0..vals.len() {
        let v: VisualLevel = vis[k].parse().map_err(|e| IoError::Schema(format!("row {}: {e}", k + 1)))?;
        let h: HapticLevel = hap[k].parse().map_err(|e| IoError::Schema(format!("row {}: {e}", k + 1)))?;
        let cell = &mut grid[v.index()][h.index()];
        if !cell.is_nan() {
            return Err(IoError::Schema(format!("duplicate cell {v}{h}")));
        }
        *cell = vals[k];
    }
    if let Some(c) = NoiseCondition::all().into_iter().find(|c| grid[c.visual.index()][c.haptic.index()].is_nan()) {
        return Err(IoError::Schema(format!("missing cell {c}")));
    }
    Ok(grid)
}

pub fn surface_table(points: &[SurfacePoint]) -> Table {
    let mut t = Table::new(&["sigma_c_mm", "sigma_p_nm", "sigma_v_eff", "sigma_h_eff", "u_star"]);
    for p in points {
        t.push_nums(&[p.sigma_c_mm, p.sigma_p_nm, p.sigma_v_eff, p.sigma_h_eff, p.u_star]);
    }
    t
}

pub fn spectrum_table(s: &Spectrum) -> Table {
    let mut t = Table::new(&["freq_hz", "amplitude"]);
    for (f, a) in s.freqs_hz.iter().zip(&s.amplitudes) {
        t.push_nums(&[*f, *a]);
    }
    t
}

pub fn fit_table(fit: &FitResult) -> Table {
    let mut t = Table::new(&["parameter", "value"]);
    let names = ["sigma_v0", "sigma_v1", "sigma_v2", "sigma_h0", "sigma_h1", "sigma_h2"];
    for (n, v) in names.iter().zip(&fit.xi_star) {
        t.push(vec![n.to_string(), fmt_num(*v)]);
    }
    t.push(vec!["gamma".into(), fmt_num(fit.gamma_star)]);
    t.push(vec!["gamma_violated".into(), fit.gamma_violated.to_string()]);
    t.push(vec!["kkt_residual".into(), fmt_num(fit.kkt_residual)]);
    t.push(vec!["rss".into(), fmt_num(fit.oie.rss)]);
    t.push(vec!["aic_n".into(), fmt_num(fit.oie.aic_n)]);
    t.push(vec!["aicc_n".into(), opt(fit.oie.aicc_n)]);
    t.push(vec!["degenerate".into(), fit.degenerate.to_string()]);
    t
}

pub fn fit_summary(fit: &FitResult) -> String {
    let mut s = String::new();
    s.push_str("effective deviations\n");
    let labels = ["sigma_v (sharp)", "sigma_v (weak)", "sigma_v (strong)", "sigma_h (sharp)", "sigma_h (weak)", "sigma_h (strong)"];
    for (l, v) in labels.iter().zip(&fit.xi_star) {
        s.push_str(&format!("  {l:<18} {}\n", fmt_num(*v)));
    }
    s.push_str(&format!("effort ratio gamma   {}{}\n", fmt_num(fit.gamma_star), if fit.gamma_violated { " (constraint violated)" } else { "" }));
    s.push_str(&format!("kkt residual         {}\n", fmt_num(fit.kkt_residual)));
    s.push_str(&format!("prediction rss       {}\n", fmt_num(fit.oie.rss)));
    s.push_str(&format!("AIC/n                {}\n", fmt_num(fit.oie.aic_n)));
    s.push_str(&format!("AICc/n               {}\n", fit.oie.aicc_n.map(fmt_num).unwrap_or_else(|| "undefined".into())));
    if fit.degenerate {
        s.push_str("warning: degenerate data (coinciding rows or columns)\n");
    }
    s
}

pub fn comparison_tables(data: &Grid3, fit: &FitResult, cmp: &Comparison) -> (Table, Table) {
    let mut cells = Table::new(&["visual_level", "haptic_level", "u_observed", "u_oie", "u_tem"]);
    for c in NoiseCondition::all() {
        let (i, j) = (c.visual.index(), c.haptic.index());
        cells.push(vec![
            c.visual.to_string(),
            c.haptic.to_string(),
            fmt_num(data[i][j]),
            fmt_num(fit.predicted[i][j]),
            fmt_num(cmp.tem_predicted[i][j]),
        ]);
    }
    let mut scores = Table::new(&["model", "k", "rss", "aic_n", "aicc_n"]);
    for (name, m) in [("OIE", &cmp.oie), ("TEM", &cmp.tem)] {
        scores.push(vec![name.into(), m.k.to_string(), fmt_num(m.rss), fmt_num(m.aic_n), opt(m.aicc_n)]);
    }
    (cells, scores)
}

/// An SVG figure with the exact plotted values as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub id: String,
    pub svg: String,
    pub table: Table,
}

/// Upper bound on figure size.
pub const MAX_SVG_BYTES: usize = 2 * 1024 * 1024;

impl Figure {
    /// Writes `<id>.svg` and `<id>.csv` into `dir`.
    pub fn emit(&self, dir: &Path) -> Result<(PathBuf, PathBuf), IoError> {
        let svg = dir.join(format!("{}.svg", self.id));
        let csv = dir.join(format!("{}.csv", self.id));
        std::fs::write(&svg, &self.svg).map_err(|e| IoError::io(&svg, e))?;
        self.table.write(&csv)?;
        Ok((svg, csv))
    }
}

fn condition_labels() -> Vec<String> {
    NoiseCondition::all().iter().map(|c| c.to_string()).collect()
}

fn flat(grid: &Grid3) -> Vec<f64> {
    grid.iter().flatten().copied().collect()
}

/// Fixed-point surface over the `(σ_c, σ_p)` mesh.
pub fn surface_figure(id: &str, points: &[SurfacePoint]) -> Result<Figure, IoError> {
    if points.is_empty() {
        return Err(IoError::Empty("surface mesh".into()));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.sigma_p_nm).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.sigma_c_mm).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let mut values = vec![vec![f64::NAN; xs.len()]; ys.len()];
    for p in points {
        let ix = xs.iter().position(|x| *x == p.sigma_p_nm).expect("present");
        let iy = ys.iter().position(|y| *y == p.sigma_c_mm).expect("present");
        values[iy][ix] = p.u_star;
    }
    let svg = svg::heatmap("Predicted cocontraction u*", "haptic noise sigma_p [Nm]", "visual noise sigma_c [mm]", &xs, &ys, &values);
    Ok(Figure { id: id.into(), svg, table: surface_table(points) })
}

/// Per-condition bars for one or more 3×3 grids.
pub fn grid_figure(id: &str, title: &str, y_label: &str, grids: &[(&str, &Grid3)]) -> Result<Figure, IoError> {
    if grids.is_empty() {
        return Err(IoError::Empty("no grids".into()));
    }
    let series: Vec<(String, Vec<f64>)> = grids.iter().map(|(n, g)| (n.to_string(), flat(g))).collect();
    let svg = svg::bar_chart(title, y_label, &condition_labels(), &series);
    let mut headers = vec!["visual_level", "haptic_level"];
    headers.extend(grids.iter().map(|(n, _)| *n));
    let mut table = Table::new(&headers);
    for c in NoiseCondition::all() {
        let mut row = vec![c.visual.to_string(), c.haptic.to_string()];
        row.extend(grids.iter().map(|(_, g)| fmt_num(g[c.visual.index()][c.haptic.index()])));
        table.push(row);
    }
    Ok(Figure { id: id.into(), svg, table })
}

/// Tracking error and normalized cocontraction per trial and condition.
pub fn evolution_figure(id: &str, ds: &Dataset) -> Result<Figure, IoError> {
    let rows: Vec<_> = ds.rows.iter().filter(|r| !r.solo).collect();
    if rows.is_empty() {
        return Err(IoError::Empty("no interaction trials".into()));
    }
    let mut series = Vec::new();
    let mut table = Table::new(&["visual_level", "haptic_level", "trial", "error_deg", "u_norm"]);
    for c in NoiseCondition::all() {
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.condition == c).map(|r| (r.trial as f64, r.error_deg)).collect();
        for r in rows.iter().filter(|r| r.condition == c) {
            table.push(vec![c.visual.to_string(), c.haptic.to_string(), r.trial.to_string(), fmt_num(r.error_deg), opt(r.u_norm)]);
        }
        if !pts.is_empty() {
            series.push((c.to_string(), pts));
        }
    }
    let svg = svg::line_chart("Tracking error over trials", "trial", "error [deg]", &series);
    Ok(Figure { id: id.into(), svg, table })
}

/// Amplitude spectra of named series.
pub fn spectra_figure(id: &str, spectra: &[(&str, &Spectrum)], max_hz: f64) -> Result<Figure, IoError> {
    if spectra.is_empty() {
        return Err(IoError::Empty("no spectra".into()));
    }
    let mut series = Vec::new();
    let mut table = Table::new(&["series", "freq_hz", "amplitude"]);
    for (name, s) in spectra {
        let pts: Vec<(f64, f64)> =
            s.freqs_hz.iter().zip(&s.amplitudes).filter(|(f, _)| **f <= max_hz).map(|(f, a)| (*f, *a)).collect();
        for (f, a) in &pts {
            table.push(vec![name.to_string(), fmt_num(*f), fmt_num(*a)]);
        }
        series.push((name.to_string(), pts));
    }
    let svg = svg::line_chart("Amplitude spectra", "frequency [Hz]", "amplitude", &series);
    Ok(Figure { id: id.into(), svg, table })
}

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    /// FNV-1a of the canonical configuration dump, hex.
    pub parameter_hash: String,
    pub config: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, argv: &[String], seed: Option<u64>, config: String) -> Self {
        Self {
            command: command.into(),
            argv: argv.to_vec(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            parameter_hash: format!("{:016x}", crate::seed::fnv1a64(config.as_bytes())),
            config,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, IoError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| IoError::io(&path, e))?;
        Ok(path)
    }
}
