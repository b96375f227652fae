//! Time-refinement studies, closed-form oracles for the rod, and the shipped scenarios.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GammaSpec, MeshSpec, RunConfig, TimeSpec, VerificationSpec};
use crate::error::{param, Error, Result};
use crate::evolution::{energy_balance_report, initial_state, run_evolution, EvolutionTrace, RunStatus};
use crate::geometry::Side;
use crate::loads::{BoundaryShape, LoadProgram, Profile, Term};
use crate::materials::{BulkKind, BulkModel, CohesiveLaw, LawField};
use crate::problem::Problem;
use crate::solver::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    None,
    #[serde(rename = "analytic_1d_linear")]
    Analytic1dLinear,
    #[serde(rename = "analytic_1d_griffith")]
    Analytic1dGriffith,
}

/// Maximum errors over the knots against a closed-form rod solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleErrors {
    pub sigma: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl OracleErrors {
    pub fn max(&self) -> f64 {
        self.sigma.max(self.delta).max(self.gamma)
    }
}

/// Bar data of a two-bar rod: total length and end displacement difference per knot.
struct Rod {
    length: f64,
    elongation: Vec<f64>,
}

fn rod_of(problem: &Problem, trace: &EvolutionTrace) -> Result<Rod> {
    let mismatch = |why: &str| Err(Error::Scenario(why.to_string()));
    let mesh = &problem.mesh;
    if mesh.dim() != 1 || mesh.n_interface() != 1 {
        return mismatch("the rod oracles need a one-dimensional mesh with one crack point");
    }
    if problem.bulk.kind != BulkKind::QuadraticScalar || problem.bulk.element_scale.is_some() {
        return mismatch("the rod oracles need the unscaled quadratic bulk density");
    }
    let l = &problem.loads;
    if l.body_force.is_some()
        || l.stress_offset.is_some()
        || l.surface_force.is_some()
        || l.crack_force_plus.is_some()
        || l.crack_force_minus.is_some()
    {
        return mismatch("the rod oracles allow boundary displacements only");
    }
    let xs = mesh.coords();
    let (mut left, mut right) = (0, 0);
    for (v, x) in xs.iter().enumerate() {
        if x[0] < xs[left][0] {
            left = v;
        }
        if x[0] > xs[right][0] {
            right = v;
        }
    }
    let mut d = mesh.dirichlet_nodes().to_vec();
    d.sort_unstable();
    let mut ends = vec![left, right];
    ends.sort_unstable();
    if d != ends {
        return mismatch("the rod oracles need both ends prescribed and nothing else");
    }
    let mut elongation = Vec::with_capacity(trace.records.len());
    for r in &trace.records {
        let psi = crate::loads::boundary_value(l, mesh, r.t)?;
        elongation.push(psi[right] - psi[left]);
    }
    if elongation.windows(2).any(|w| w[1] < w[0] - 1e-14) {
        return mismatch("the rod oracles need a nondecreasing end displacement");
    }
    Ok(Rod {
        length: xs[right][0] - xs[left][0],
        elongation,
    })
}

/// Compare a rod trace with the closed-form solution of the selected family.
pub fn oracle_compare(problem: &Problem, trace: &EvolutionTrace, oracle: Oracle) -> Result<OracleErrors> {
    let rod = rod_of(problem, trace)?;
    let law = *problem.law.at(0);
    let gamma0 = trace.gamma[0][0];
    let lr = rod.length;
    let exact: Box<dyn Fn(f64) -> (f64, f64, f64)> = match (oracle, law) {
        (Oracle::Analytic1dLinear, CohesiveLaw::Linear { b }) => Box::new(move |u: f64| {
            let free = if b > 0.0 { gamma0 / b } else { f64::INFINITY };
            let delta = if u <= free {
                u
            } else if u - b * lr <= free {
                free
            } else {
                u - b * lr
            };
            ((u - delta) / lr, delta, (b * delta).max(gamma0))
        }),
        (Oracle::Analytic1dGriffith, CohesiveLaw::Griffith { a, b }) => {
            if gamma0 != 0.0 {
                return Err(Error::Scenario("the griffith oracle needs a zero initial history".into()));
            }
            let threshold = b * lr + (2.0 * a * lr).sqrt();
            Box::new(move |u: f64| {
                if u > threshold {
                    let delta = u - b * lr;
                    (b, delta, a + b * delta)
                } else {
                    (u / lr, 0.0, 0.0)
                }
            })
        }
        (Oracle::None, _) => return Err(Error::Scenario("no oracle selected".into())),
        (o, l) => return Err(Error::Scenario(format!("oracle {o:?} does not match the law {l:?}"))),
    };
    let mesh = &problem.mesh;
    let mut err = OracleErrors::default();
    for (i, &u_end) in rod.elongation.iter().enumerate() {
        let u = &trace.u[i];
        let (s, d, g) = exact(u_end);
        let sigma = mesh.element_gradient(0, u)[0][0];
        let delta = crate::geometry::jump(mesh, u)?[0][0];
        err.sigma = err.sigma.max((sigma - s).abs());
        err.delta = err.delta.max((delta - d).abs());
        err.gamma = err.gamma.max((trace.gamma[i][0] - g).abs());
    }
    Ok(err)
}

/// Where the base case of a study comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseCase {
    Path(PathBuf),
    Inline(Box<RunConfig>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyThresholds {
    /// Minimum empirical order of the gaps to the finest level.
    pub min_rate: f64,
    /// Minimum reduction of the balance residual per halving of the step.
    pub min_balance_factor: f64,
    pub check_balance_rate: bool,
    /// Gaps below floor * (1 + |quantity|) count as resolved.
    pub relative_floor: f64,
    /// Bound on the oracle errors at every level.
    pub oracle_tolerance: f64,
}

impl Default for StudyThresholds {
    fn default() -> Self {
        StudyThresholds {
            min_rate: 0.9,
            min_balance_factor: 1.8,
            check_balance_rate: true,
            relative_floor: 1e-9,
            oracle_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub base: BaseCase,
    /// Step counts of the uniform grids, strictly increasing.
    pub levels: Vec<usize>,
    pub checkpoints: Vec<f64>,
    #[serde(default = "no_oracle")]
    pub oracle: Oracle,
    #[serde(default)]
    pub thresholds: StudyThresholds,
}

fn no_oracle() -> Oracle {
    Oracle::None
}

impl StudySpec {
    pub fn from_json(text: &str) -> Result<StudySpec> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<StudySpec> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut spec = StudySpec::from_json(&text)?;
        if let BaseCase::Path(p) = &spec.base {
            let p = if p.is_relative() {
                path.parent().unwrap_or(std::path::Path::new(".")).join(p)
            } else {
                p.clone()
            };
            spec.base = BaseCase::Inline(Box::new(RunConfig::load(&p)?));
        }
        Ok(spec)
    }

    fn base_config(&self) -> Result<RunConfig> {
        match &self.base {
            BaseCase::Inline(c) => Ok((**c).clone()),
            BaseCase::Path(p) => RunConfig::load(p),
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.levels.len() < 3 {
            return Err(param("levels", format!("need at least 3 levels to estimate a rate, got {}", self.levels.len())));
        }
        if self.levels[0] == 0 || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(param("levels", "must be positive and strictly increasing"));
        }
        if let Some(t) = self.checkpoints.iter().find(|t| !(0.0..=horizon).contains(*t)) {
            return Err(param("checkpoints", format!("time {t} outside [0, {horizon}]")));
        }
        Ok(())
    }
}

/// One (level, checkpoint) entry of the study table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub level: usize,
    pub steps: usize,
    pub checkpoint: f64,
    /// Knot whose state represents the checkpoint (largest knot not after it).
    pub knot_time: f64,
    pub bulk_minus_work: f64,
    pub gamma_l1: f64,
    pub energy_gap: f64,
    pub gamma_gap: f64,
    pub h1_distance: f64,
    pub energy_rate: Option<f64>,
    pub gamma_rate: Option<f64>,
    pub h1_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub steps: usize,
    pub max_step: f64,
    pub complete: bool,
    pub max_abs_balance_residual: f64,
    pub peak_energy: f64,
    /// Reduction of the balance residual relative to the previous level, per halving.
    pub balance_factor: Option<f64>,
    pub oracle: Option<OracleErrors>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub levels: Vec<LevelSummary>,
    pub rows: Vec<StudyRow>,
    pub failures: Vec<String>,
}

impl StudyResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn knot_index(knots: &[f64], t: f64) -> usize {
    let slack = 1e-12 * knots.last().copied().unwrap_or(1.0).max(1.0);
    knots.iter().rposition(|&k| k <= t + slack).unwrap_or(0)
}

/// Empirical order between two gaps on grids with `n0 < n1` steps.
fn rate(g0: f64, g1: f64, n0: usize, n1: usize, floor: f64) -> Option<f64> {
    if g1 <= floor || g0 <= floor {
        return None;
    }
    Some((g0 / g1).ln() / (n1 as f64 / n0 as f64).ln())
}

/// Run the base case on every level and tabulate gaps to the finest level.
pub fn convergence_study(spec: &StudySpec) -> Result<StudyResult> {
    let base = spec.base_config()?;
    spec.validate(base.loads.horizon)?;
    let runs: Vec<(Problem, crate::evolution::TimeGrid, EvolutionTrace)> = spec
        .levels
        .par_iter()
        .map(|&steps| {
            let mut cfg = base.clone();
            cfg.time = TimeSpec::Uniform { steps };
            let sc = cfg.scenario()?;
            let init = initial_state(&sc.problem, sc.gamma0.clone(), &sc.options.solver)?;
            let trace = run_evolution(&sc.problem, &sc.grid, &init, &sc.options)?;
            Ok((sc.problem, sc.grid, trace))
        })
        .collect::<Result<_>>()?;

    let th = &spec.thresholds;
    let mut failures = Vec::new();
    let mut levels = Vec::with_capacity(runs.len());
    for (i, (problem, grid, trace)) in runs.iter().enumerate() {
        let bal = energy_balance_report(trace);
        let complete = trace.status == RunStatus::Complete;
        if !complete {
            failures.push(format!("level {}: run status {:?}", spec.levels[i], trace.status));
        }
        let oracle = match spec.oracle {
            Oracle::None => None,
            o => {
                let e = oracle_compare(problem, trace, o)?;
                if !(e.max() <= th.oracle_tolerance) {
                    failures.push(format!(
                        "level {}: oracle error {:e} exceeds {:e}",
                        spec.levels[i],
                        e.max(),
                        th.oracle_tolerance
                    ));
                }
                Some(e)
            }
        };
        let balance_factor = if i == 0 {
            None
        } else {
            let prev: &LevelSummary = &levels[i - 1];
            let floor = th.relative_floor * (1.0 + bal.peak_energy);
            rate(prev.max_abs_balance_residual, bal.max_abs_residual, prev.steps, spec.levels[i], floor)
                .map(|r| 2f64.powf(r))
        };
        if th.check_balance_rate {
            if let Some(f) = balance_factor {
                if f < th.min_balance_factor {
                    failures.push(format!(
                        "level {}: balance residual reduced by {f:.4} per halving, below {}",
                        spec.levels[i], th.min_balance_factor
                    ));
                }
            }
        }
        levels.push(LevelSummary {
            steps: spec.levels[i],
            max_step: grid.max_step(),
            complete,
            max_abs_balance_residual: bal.max_abs_residual,
            peak_energy: bal.peak_energy,
            balance_factor,
            oracle,
        });
    }

    let finest = runs.len() - 1;
    let mut rows = Vec::new();
    for &t in &spec.checkpoints {
        let states: Vec<(usize, f64, f64, f64)> = runs
            .iter()
            .map(|(_, grid, trace)| {
                let k = knot_index(grid.knots(), t);
                let e = trace.records[k].energy;
                (k, grid.knots()[k], e.bulk - e.load_work, e.crack_term)
            })
            .collect();
        let (kf, _, ef, gf) = states[finest];
        let uf = &runs[finest].2.u[kf];
        let mesh = &runs[finest].0.mesh;
        let scale_e = 1.0 + states.iter().map(|s| s.2.abs()).fold(0.0, f64::max);
        let scale_g = 1.0 + states.iter().map(|s| s.3.abs()).fold(0.0, f64::max);
        let scale_u = 1.0 + mesh.h1_distance(uf, &vec![0.0; uf.len()]);
        let mut prev: Option<StudyRow> = None;
        for (i, &(k, kt, e, g)) in states.iter().enumerate() {
            let steps = spec.levels[i];
            let h1 = mesh.h1_distance(&runs[i].2.u[k], uf);
            let mut row = StudyRow {
                level: i,
                steps,
                checkpoint: t,
                knot_time: kt,
                bulk_minus_work: e,
                gamma_l1: g,
                energy_gap: (e - ef).abs(),
                gamma_gap: (g - gf).abs(),
                h1_distance: h1,
                energy_rate: None,
                gamma_rate: None,
                h1_rate: None,
            };
            if let Some(p) = prev.as_ref().filter(|_| i < finest) {
                let f = th.relative_floor;
                row.energy_rate = rate(p.energy_gap, row.energy_gap, p.steps, steps, f * scale_e);
                row.gamma_rate = rate(p.gamma_gap, row.gamma_gap, p.steps, steps, f * scale_g);
                row.h1_rate = rate(p.h1_distance, row.h1_distance, p.steps, steps, f * scale_u);
                for (name, r) in [("energy", row.energy_rate), ("gamma", row.gamma_rate), ("h1", row.h1_rate)] {
                    if let Some(r) = r.filter(|r| *r < th.min_rate) {
                        failures.push(format!(
                            "checkpoint {t}, level {steps}: {name} gap rate {r:.4} below {}",
                            th.min_rate
                        ));
                    }
                }
            }
            prev = Some(row.clone());
            rows.push(row);
        }
    }
    Ok(StudyResult { levels, rows, failures })
}

fn ramp(horizon: f64, gradient: [[f64; 2]; 2], profile: Profile) -> LoadProgram {
    LoadProgram {
        boundary: Some(Term {
            profile,
            value: BoundaryShape::Affine {
                constant: [0.0; 2],
                gradient,
            },
        }),
        ..LoadProgram::zero(horizon)
    }
}

fn rod(law: CohesiveLaw, horizon: f64, profile: Profile, steps: usize) -> RunConfig {
    RunConfig {
        mesh: MeshSpec::Rod {
            length: 2.0,
            elements: 2,
            interface_position: 1.0,
            dirichlet: vec![Side::Left, Side::Right],
        },
        bulk: BulkModel::quadratic(),
        law: LawField::Uniform(law),
        loads: ramp(horizon, [[0.5, 0.0], [0.0, 0.0]], profile),
        time: TimeSpec::Uniform { steps },
        initial_gamma: GammaSpec::Constant(0.0),
        solver: SolverOptions::default(),
        continue_on_nonconvergence: false,
        output_dir: None,
        snapshots: Vec::new(),
        verification: VerificationSpec::default(),
    }
}

/// 4 x 4 plate with the crack from x = 0 to x = 1 on the midline, top and bottom pulled apart.
pub fn plate(n: usize, bulk: BulkModel, field_dim: usize, horizon: f64, profile: Profile, steps: usize) -> RunConfig {
    let gradient = if field_dim == 1 {
        [[0.0, 1.0], [0.0, 0.0]]
    } else {
        [[0.0, 0.0], [0.0, 1.0]]
    };
    RunConfig {
        mesh: MeshSpec::Rect {
            width: 4.0,
            height: 4.0,
            nx: n,
            ny: n,
            crack: [0.0, 1.0],
            dirichlet: vec![Side::Bottom, Side::Top],
            field_dim,
        },
        bulk,
        law: LawField::Uniform(CohesiveLaw::Linear { b: 1.0 }),
        loads: ramp(horizon, gradient, profile),
        time: TimeSpec::Uniform { steps },
        initial_gamma: GammaSpec::Constant(0.0),
        solver: SolverOptions::default(),
        continue_on_nonconvergence: false,
        output_dir: None,
        snapshots: Vec::new(),
        verification: VerificationSpec::default(),
    }
}

/// The scenarios shipped under `configs/`, by file stem.
pub fn shipped_scenarios() -> Vec<(&'static str, RunConfig)> {
    let ramp1 = Profile::Ramp { rate: 1.0 };
    let tri = |peak| Profile::Triangle { peak_time: 1.0, peak };
    let mut preseeded = rod(CohesiveLaw::Linear { b: 0.25 }, 1.0, ramp1, 100);
    preseeded.initial_gamma = GammaSpec::Constant(0.05);
    // The one-sided gap keeps growing while the stored energy is released.
    let unloading = |mut c: RunConfig| {
        c.verification.balance_fraction = 0.05;
        c
    };
    vec![
        ("rod_linear", rod(CohesiveLaw::Linear { b: 0.25 }, 1.0, ramp1, 100)),
        ("rod_griffith", rod(CohesiveLaw::Griffith { a: 0.04, b: 0.1 }, 1.0, ramp1, 100)),
        ("rod_linear_preseeded", preseeded),
        ("rod_unloading", unloading(rod(CohesiveLaw::Linear { b: 0.25 }, 2.0, tri(1.0), 100))),
        (
            "rod_saturating",
            rod(CohesiveLaw::SmoothSaturating { phi0: 0.01, b: 0.3, c: 0.05 }, 1.0, ramp1, 100),
        ),
        ("plate_scalar", plate(16, BulkModel::quadratic(), 1, 2.0, Profile::Ramp { rate: 1.0 }, 100)),
        (
            "plate_scalar_unloading",
            unloading(plate(16, BulkModel::quadratic(), 1, 2.0, tri(1.5), 100)),
        ),
        (
            "plate_elastic",
            plate(16, BulkModel::linear_elasticity(1.0, 1.0), 2, 1.0, Profile::Ramp { rate: 1.0 }, 50),
        ),
    ]
}
