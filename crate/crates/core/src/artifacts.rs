//! Run directory layout: CSV time series and JSON documents.
//!
//! CSV floats are written as `{:.16e}` (17 significant digits). JSON floats use
//! the shortest representation that round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{GammaSpec, RunConfig, Scenario};
use crate::error::Result;
use crate::euler::{euler_along, recover_traction, EulerReport};
use crate::evolution::{
    apriori_bounds, energy_balance_report, initial_state, run_evolution, stability_along, AprioriBounds,
    BalanceReport, EvolutionTrace, RunStatus,
};
use crate::geometry::jump;
use crate::harness::{StudyResult, StudyRow};
use crate::state::StabilityReport;

pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const STATES_FILE: &str = "states.json";
pub const SNAPSHOTS_FILE: &str = "snapshots.json";
pub const MESH_FILE: &str = "mesh.json";
pub const REPORT_FILE: &str = "report.json";
pub const EULER_FILE: &str = "euler.json";
pub const STUDY_FILE: &str = "study.csv";
pub const STUDY_LEVELS_FILE: &str = "study_levels.csv";
pub const STUDY_REPORT_FILE: &str = "study.json";

pub const TRACE_COLUMNS: [&str; 24] = [
    "step",
    "t",
    "bulk",
    "load_work",
    "crack_term",
    "total_energy",
    "theta",
    "work_integral",
    "interpolant_integral",
    "dissipation_increment",
    "cumulative_dissipation",
    "balance_residual",
    "trapezoid_residual",
    "lower_tolerance",
    "admissibility_excess",
    "iterations",
    "solver_residual",
    "converged",
    "candidate",
    "euler_interior",
    "euler_action_reaction",
    "euler_condition_a",
    "euler_condition_b",
    "euler_condition_c",
];

/// One parsed row of `trace.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub bulk: f64,
    pub load_work: f64,
    pub crack_term: f64,
    pub total_energy: f64,
    pub theta: f64,
    pub work_integral: f64,
    pub interpolant_integral: f64,
    pub dissipation_increment: f64,
    pub cumulative_dissipation: f64,
    pub balance_residual: f64,
    pub trapezoid_residual: f64,
    pub lower_tolerance: f64,
    pub admissibility_excess: f64,
    pub iterations: Option<usize>,
    pub solver_residual: Option<f64>,
    pub converged: bool,
    pub candidate: Option<String>,
    pub euler_interior: Option<f64>,
    pub euler_action_reaction: Option<f64>,
    pub euler_condition_a: Option<f64>,
    pub euler_condition_b: Option<f64>,
    pub euler_condition_c: Option<f64>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Write the per-knot time series; `euler` entries are matched to knots by time.
pub fn write_trace_csv(path: &Path, trace: &EvolutionTrace, euler: &[EulerReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.records {
        let e = euler.iter().find(|e| e.t == r.t);
        let s = r.solver.as_ref();
        let row = vec![
            r.step.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.energy.bulk),
            fmt_f64(r.energy.load_work),
            fmt_f64(r.energy.crack_term),
            fmt_f64(r.energy.total),
            fmt_f64(r.theta),
            fmt_f64(r.work_integral),
            fmt_f64(r.interpolant_integral),
            fmt_f64(r.dissipation_increment),
            fmt_f64(r.cumulative_dissipation),
            fmt_f64(r.balance_residual),
            fmt_f64(r.trapezoid_residual),
            fmt_f64(r.lower_tolerance),
            fmt_f64(r.admissibility_excess),
            s.map(|s| s.iterations.to_string()).unwrap_or_default(),
            opt(s.map(|s| s.residual)),
            r.converged().to_string(),
            s.map(|s| s.candidate.clone()).unwrap_or_default(),
            opt(e.map(|e| e.interior_residual)),
            opt(e.map(|e| e.action_reaction_residual)),
            opt(e.map(|e| e.condition_a)),
            opt(e.map(|e| e.condition_b)),
            opt(e.map(|e| e.condition_c)),
        ];
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
    Ok(rows)
}

/// Fields and histories at every knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct States {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
}

impl States {
    pub fn from_trace(trace: &EvolutionTrace) -> States {
        States {
            times: trace.times(),
            u: trace.u.clone(),
            gamma: trace.gamma.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub requested: f64,
    pub knot: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub gamma: Vec<f64>,
    pub jump: Vec<[f64; 2]>,
    pub traction: Vec<Option<Vec<f64>>>,
}

/// Summary written to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub steps: usize,
    pub balance: BalanceSummary,
    pub stability: Vec<StabilityReport>,
    pub apriori: Option<AprioriBounds>,
    pub max_grad_norm: f64,
    pub euler_worst: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceSummary {
    pub max_abs_residual: f64,
    pub max_abs_trapezoid_residual: f64,
    pub peak_energy: f64,
    pub lower_inequality_holds: bool,
}

impl From<&BalanceReport> for BalanceSummary {
    fn from(b: &BalanceReport) -> Self {
        BalanceSummary {
            max_abs_residual: b.max_abs_residual,
            max_abs_trapezoid_residual: b.max_abs_trapezoid_residual,
            peak_energy: b.peak_energy,
            lower_inequality_holds: b.lower_inequality_holds,
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Everything a finished run leaves behind.
pub struct RunOutcome {
    /// The config as run, with the initial history stored inline.
    pub config: RunConfig,
    pub scenario: Scenario,
    pub trace: EvolutionTrace,
    pub snapshots: Vec<Snapshot>,
    pub euler: Vec<EulerReport>,
    pub report: RunReport,
}

/// Run the evolution described by `cfg` together with its configured checks.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let scenario = cfg.scenario()?;
    let problem = &scenario.problem;
    let mesh = &problem.mesh;
    let init = initial_state(problem, scenario.gamma0.clone(), &scenario.options.solver)?;
    let trace = run_evolution(problem, &scenario.grid, &init, &scenario.options)?;
    let balance = energy_balance_report(&trace);
    let v = &cfg.verification;

    let stability = if v.stability_competitors > 0 {
        stability_along(problem, &trace, v.stability_competitors, v.stability_every, v.seed, v.stability_tolerance)?
    } else {
        Vec::new()
    };
    let apriori = if problem.loads.has_no_loads() {
        Some(apriori_bounds(problem, &scenario.grid, &init)?)
    } else {
        None
    };
    let p = problem.bulk.growth_exponent();
    let max_grad_norm = trace.u.iter().map(|u| mesh.grad_norm(u, p)).fold(0.0, f64::max);

    let structured = (0..mesh.n_interface()).all(|e| problem.law.at(e).has_euler_structure());
    let euler = if structured && v.euler_every > 0 {
        let picks: Vec<usize> = (0..trace.records.len()).step_by(v.euler_every).collect();
        euler_along(problem, &trace, &picks)?
    } else {
        Vec::new()
    };
    let euler_worst = euler.iter().map(|e| e.worst()).reduce(f64::max);

    let knots = trace.times();
    let mut snapshots = Vec::with_capacity(cfg.snapshots.len());
    for &t in &cfg.snapshots {
        let slack = 1e-12 * problem.loads.horizon;
        let k = knots.iter().rposition(|&s| s <= t + slack).unwrap_or(0);
        let u = trace.u[k].clone();
        snapshots.push(Snapshot {
            requested: t,
            knot: k,
            t: knots[k],
            jump: jump(mesh, &u)?,
            traction: recover_traction(problem, knots[k], &u)?,
            gamma: trace.gamma[k].clone(),
            u,
        });
    }

    let mut config = cfg.clone();
    config.initial_gamma = GammaSpec::Values(scenario.gamma0.values().to_vec());
    let report = RunReport {
        status: trace.status.clone(),
        steps: scenario.grid.steps(),
        balance: (&balance).into(),
        stability,
        apriori,
        max_grad_norm,
        euler_worst,
    };
    Ok(RunOutcome {
        config,
        scenario,
        trace,
        snapshots,
        euler,
        report,
    })
}

impl RunOutcome {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_FILE), self.config.to_json() + "\n")?;
        write_trace_csv(&dir.join(TRACE_FILE), &self.trace, &self.euler)?;
        write_json(&dir.join(STATES_FILE), &States::from_trace(&self.trace))?;
        write_json(&dir.join(SNAPSHOTS_FILE), &self.snapshots)?;
        write_json(&dir.join(MESH_FILE), &self.scenario.problem.mesh.snapshot())?;
        write_json(&dir.join(EULER_FILE), &self.euler)?;
        write_json(&dir.join(REPORT_FILE), &self.report)?;
        Ok(())
    }
}

pub const STUDY_COLUMNS: [&str; 12] = [
    "level",
    "steps",
    "checkpoint",
    "knot_time",
    "bulk_minus_work",
    "gamma_l1",
    "energy_gap",
    "gamma_gap",
    "h1_distance",
    "energy_rate",
    "gamma_rate",
    "h1_rate",
];

pub const STUDY_LEVEL_COLUMNS: [&str; 6] = [
    "steps",
    "max_step",
    "complete",
    "max_abs_balance_residual",
    "peak_energy",
    "balance_factor",
];

/// Write `study.csv`, `study_levels.csv` and `study.json` into `dir`.
pub fn write_study(dir: &Path, result: &StudyResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(STUDY_FILE))?;
    w.write_record(STUDY_COLUMNS)?;
    for r in &result.rows {
        let StudyRow {
            level,
            steps,
            checkpoint,
            knot_time,
            bulk_minus_work,
            gamma_l1,
            energy_gap,
            gamma_gap,
            h1_distance,
            energy_rate,
            gamma_rate,
            h1_rate,
        } = r;
        w.write_record([
            level.to_string(),
            steps.to_string(),
            fmt_f64(*checkpoint),
            fmt_f64(*knot_time),
            fmt_f64(*bulk_minus_work),
            fmt_f64(*gamma_l1),
            fmt_f64(*energy_gap),
            fmt_f64(*gamma_gap),
            fmt_f64(*h1_distance),
            opt(*energy_rate),
            opt(*gamma_rate),
            opt(*h1_rate),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join(STUDY_LEVELS_FILE))?;
    w.write_record(STUDY_LEVEL_COLUMNS)?;
    for l in &result.levels {
        w.write_record([
            l.steps.to_string(),
            fmt_f64(l.max_step),
            l.complete.to_string(),
            fmt_f64(l.max_abs_balance_residual),
            fmt_f64(l.peak_energy),
            opt(l.balance_factor),
        ])?;
    }
    w.flush()?;
    write_json(&dir.join(STUDY_REPORT_FILE), result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{initial_state, run_evolution};
    use crate::harness::shipped_scenarios;

    #[test]
    fn trace_csv_round_trips_exactly() {
        let (_, cfg) = shipped_scenarios().into_iter().next().unwrap();
        let sc = cfg.scenario().unwrap();
        let init = initial_state(&sc.problem, sc.gamma0.clone(), &sc.options.solver).unwrap();
        let trace = run_evolution(&sc.problem, &sc.grid, &init, &sc.options).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TRACE_FILE);
        write_trace_csv(&path, &trace, &[]).unwrap();
        let rows = read_trace_csv(&path).unwrap();
        assert_eq!(rows.len(), trace.records.len());
        for (row, rec) in rows.iter().zip(&trace.records) {
            assert_eq!(row.t, rec.t);
            assert_eq!(row.total_energy, rec.energy.total);
            assert_eq!(row.balance_residual, rec.balance_residual);
            assert!(row.euler_interior.is_none());
        }
        assert!(rows[0].iterations.is_none());
        assert!(rows[1].converged);
    }
}
