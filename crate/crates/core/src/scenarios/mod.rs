//! End-to-end scenarios: single-path, exponential-family, regional and
//! discrete-sample indistinguishability.

mod discrete;
mod eternal_nm;
mod qutrit;
mod sin_dephasing;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::io::{write_atomic, write_json, LiftFamilyJson, PlotTable, TrajectoryJson};
use crate::propagate::VerifyReport;

pub use discrete::{knot_lift, scenario_discrete_points, DiscreteParams, KnotLift, SegmentBranch};
pub use eternal_nm::{
    eternal_nm_asymptote, eternal_nm_channel, eternal_nm_path, eternal_nm_witness,
    scenario_eternal_nm, two_point_lift, EternalNmParams,
};
pub use qutrit::{
    qutrit_delta, qutrit_path, qutrit_point, scenario_qutrit_region, QutritParams, QutritPoint,
    QUTRIT_TOL,
};
pub use sin_dephasing::{
    dephasing_path, fitted_dephasing_rate, scenario_sin_dephasing, SinDephasingParams,
};

/// Everything a scenario produced. Only the summary fields go into
/// `result.json`; trajectories, families, reports and plot tables are written
/// to their own files by [`ScenarioResult::write`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub parameters: serde_json::Value,
    /// Discrepancies and branch notes, in the order they were found.
    pub findings: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub reports: BTreeMap<String, VerifyReport>,
    #[serde(skip)]
    pub trajectories: BTreeMap<String, TrajectoryJson>,
    #[serde(skip)]
    pub families: BTreeMap<String, LiftFamilyJson>,
    #[serde(skip)]
    pub plots: Vec<PlotTable>,
}

impl ScenarioResult {
    fn new(scenario: &str, parameters: impl Serialize) -> Result<Self> {
        Ok(Self {
            scenario: scenario.to_string(),
            parameters: serde_json::to_value(parameters)?,
            ..Self::default()
        })
    }

    fn finding(&mut self, text: String) {
        log::info!("{}: {text}", self.scenario);
        self.findings.push(text);
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn plot(&self, name: &str) -> Option<&PlotTable> {
        self.plots.iter().find(|p| p.name == name)
    }

    /// Writes `result.json`, `trajectories/`, `families/` and `reports/`
    /// under `outdir`, plus `plots/*.csv` when `plotdata` is set. Returns the
    /// paths written.
    pub fn write(&self, outdir: &Path, plotdata: bool) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        put(&mut written, outdir.join("result.json"), self)?;
        for (name, t) in &self.trajectories {
            put(
                &mut written,
                outdir.join("trajectories").join(format!("{name}.json")),
                t,
            )?;
        }
        for (name, f) in &self.families {
            put(
                &mut written,
                outdir.join("families").join(format!("{name}.json")),
                f,
            )?;
        }
        for (name, r) in &self.reports {
            put(
                &mut written,
                outdir.join("reports").join(format!("{name}.json")),
                r,
            )?;
        }
        if plotdata {
            for p in &self.plots {
                let path = outdir.join("plots").join(format!("{}.csv", p.name));
                write_atomic(&path, p.to_csv().as_bytes())?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

fn put<T: Serialize>(written: &mut Vec<PathBuf>, path: PathBuf, value: &T) -> Result<()> {
    write_json(&path, value)?;
    written.push(path);
    Ok(())
}

/// `t0, t0 + h, …` up to and including `t1` (the last step may be shorter).
pub fn uniform_grid(t0: f64, t1: f64, h: f64) -> Vec<f64> {
    let n = ((t1 - t0) / h - 1e-9).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| if k == n { t1 } else { t0 + k as f64 * h })
        .collect()
}
