//! Discrete-time quasistatic evolution and its energy ledger.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::loads::dot;
use crate::materials::{BulkKind, BulkModel};
use crate::problem::Problem;
use crate::solver::{IncrementalSolver, SolverInfo, SolverOptions};
use crate::state::{
    energy_unchecked, join, random_competitors, stability_check, weighted_sum, Configuration,
    EnergyBreakdown, InternalVariable, StabilityReport, ADMISSIBILITY_TOL,
};

/// Knots 0 = t_0 < t_1 < ... < t_k = T.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    /// t_i = i T / k.
    pub fn uniform(horizon: f64, steps: usize) -> Result<TimeGrid> {
        if steps == 0 {
            return Err(param("grid.steps", "must be >= 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(param("grid.horizon", format!("must be > 0, got {horizon}")));
        }
        let mut knots: Vec<f64> = (0..=steps).map(|i| i as f64 * horizon / steps as f64).collect();
        knots[steps] = horizon;
        Ok(TimeGrid { knots })
    }

    pub fn from_knots(knots: Vec<f64>) -> Result<TimeGrid> {
        if knots.len() < 2 {
            return Err(param("grid.knots", "need at least two knots"));
        }
        if knots[0] != 0.0 {
            return Err(param("grid.knots", format!("first knot must be 0, got {}", knots[0])));
        }
        if let Some(w) = knots.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(param(
                "grid.knots",
                format!("knots must increase strictly ({} then {})", w[0], w[1]),
            ));
        }
        Ok(TimeGrid { knots })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn steps(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn max_step(&self) -> f64 {
        self.knots.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        TimeGrid::from_knots(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.knots
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionOptions {
    pub solver: SolverOptions,
    /// Stop at the first step whose solve did not converge.
    pub abort_on_nonconvergence: bool,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        EvolutionOptions {
            solver: SolverOptions::default(),
            abort_on_nonconvergence: true,
        }
    }
}

/// One row of the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotRecord {
    pub step: usize,
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub theta: f64,
    /// trapezoidal integral of theta over the knots up to t
    pub work_integral: f64,
    /// exact integral of the piecewise-constant interpolant theta_k up to t
    pub interpolant_integral: f64,
    pub dissipation_increment: f64,
    pub cumulative_dissipation: f64,
    /// E(t) - E(0) - interpolant_integral
    pub balance_residual: f64,
    /// E(t) - E(0) - work_integral
    pub trapezoid_residual: f64,
    /// 2 x the trapezoid error bound accumulated up to t
    pub lower_tolerance: f64,
    /// max over interface nodes of phi([u]) - gamma
    pub admissibility_excess: f64,
    pub solver: Option<SolverInfo>,
}

impl KnotRecord {
    pub fn converged(&self) -> bool {
        self.solver.as_ref().is_none_or(|s| s.converged)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// Finished although some steps did not converge.
    Poisoned { steps: Vec<usize> },
    /// Stopped after a step that did not converge.
    Aborted { step: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub records: Vec<KnotRecord>,
    /// u at every recorded knot
    pub u: Vec<Vec<f64>>,
    /// gamma at every recorded knot
    pub gamma: Vec<Vec<f64>>,
    pub status: RunStatus,
}

impl EvolutionTrace {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn configuration(&self, i: usize) -> Configuration {
        Configuration::new(
            self.records[i].t,
            self.u[i].clone(),
            InternalVariable::new(self.gamma[i].clone()).expect("trace gamma is nonnegative"),
        )
    }

    pub fn require_converged(&self) -> Result<()> {
        match self.records.iter().find(|r| !r.converged()) {
            None => Ok(()),
            Some(r) => Err(Error::NotConverged {
                step: r.step,
                time: r.t,
                residual: r.solver.as_ref().map_or(f64::NAN, |s| s.residual),
            }),
        }
    }
}

/// theta(t) = <dW(grad u), grad psi'(t)> - <L(t), psi'(t)> - <L'(t), u>.
pub fn theta(problem: &Problem, t: f64, u: &[f64]) -> Result<f64> {
    problem.loads.check_time(t)?;
    problem.mesh.check_field(u, "nodal field")?;
    Ok(theta_unchecked(problem, t, u))
}

fn theta_unchecked(problem: &Problem, t: f64, u: &[f64]) -> f64 {
    let mesh = &problem.mesh;
    let rate = problem.loads.boundary_rate_unchecked(mesh, t);
    let grad = problem.bulk.gradient(mesh, u);
    let ell = problem.loads.covector_unchecked(mesh, t);
    let ell_dot = problem.loads.rate_covector_unchecked(mesh, t);
    dot(&grad, &rate) - dot(&ell, &rate) - dot(&ell_dot, u)
}

/// Exact integral over [t0, t1] of theta_k with u_k = u and L_k = L(t0) frozen.
fn interpolant_increment(problem: &Problem, t0: f64, t1: f64, u: &[f64]) -> f64 {
    let mesh = &problem.mesh;
    let d_psi: Vec<f64> = problem
        .loads
        .boundary_value_unchecked(mesh, t1)
        .iter()
        .zip(problem.loads.boundary_value_unchecked(mesh, t0))
        .map(|(a, b)| a - b)
        .collect();
    let grad = problem.bulk.gradient(mesh, u);
    let l0 = problem.loads.covector_unchecked(mesh, t0);
    let l1 = problem.loads.covector_unchecked(mesh, t1);
    let d_l: Vec<f64> = l1.iter().zip(&l0).map(|(a, b)| a - b).collect();
    dot(&grad, &d_psi) - dot(&l0, &d_psi) - dot(&d_l, u)
}

/// Solve at t = 0 with the given history and return the resulting configuration.
pub fn initial_state(problem: &Problem, gamma0: InternalVariable, opts: &SolverOptions) -> Result<Configuration> {
    let solver = IncrementalSolver::new(problem, opts.clone())?;
    let psi = problem.loads.boundary_value_unchecked(&problem.mesh, 0.0);
    let (u, info) = solver.solve(0.0, gamma0.values(), &psi)?;
    if !info.converged {
        return Err(Error::NotConverged {
            step: 0,
            time: 0.0,
            residual: info.residual,
        });
    }
    let gamma = join(&gamma0, &problem.phi_of(&u))?;
    Ok(Configuration::new(0.0, u, gamma))
}

fn max_excess(problem: &Problem, u: &[f64], gamma: &[f64]) -> f64 {
    if gamma.is_empty() {
        return 0.0;
    }
    problem
        .phi_of(u)
        .iter()
        .zip(gamma)
        .map(|(p, g)| p - g)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Run the incremental scheme on `grid` from an admissible initial configuration.
pub fn run_evolution(
    problem: &Problem,
    grid: &TimeGrid,
    initial: &Configuration,
    opts: &EvolutionOptions,
) -> Result<EvolutionTrace> {
    let mesh = &problem.mesh;
    if (grid.horizon() - problem.loads.horizon).abs() > 1e-12 * problem.loads.horizon {
        return Err(param(
            "grid",
            format!(
                "last knot {} differs from the load horizon {}",
                grid.horizon(),
                problem.loads.horizon
            ),
        ));
    }
    if initial.t != 0.0 {
        return Err(Error::Initial(format!("initial time must be 0, got {}", initial.t)));
    }
    let adm = crate::state::admissibility(problem, initial, ADMISSIBILITY_TOL)?;
    if !adm.admissible {
        return Err(Error::Initial(format!(
            "not admissible: phi([u]) - gamma = {:e}, Dirichlet error = {:e}",
            adm.max_excess, adm.dirichlet_error
        )));
    }
    let solver = IncrementalSolver::new(problem, opts.solver.clone())?;

    let knots = grid.knots();
    let e0 = energy_unchecked(problem, 0.0, &initial.u, initial.gamma.values());
    let theta0 = theta_unchecked(problem, 0.0, &initial.u);
    let mut records = vec![KnotRecord {
        step: 0,
        t: 0.0,
        energy: e0,
        theta: theta0,
        work_integral: 0.0,
        interpolant_integral: 0.0,
        dissipation_increment: 0.0,
        cumulative_dissipation: 0.0,
        balance_residual: 0.0,
        trapezoid_residual: 0.0,
        lower_tolerance: 0.0,
        admissibility_excess: max_excess(problem, &initial.u, initial.gamma.values()),
        solver: None,
    }];
    let mut us = vec![initial.u.clone()];
    let mut gammas = vec![initial.gamma.values().to_vec()];
    let mut poisoned = Vec::new();
    let mut status = RunStatus::Complete;

    for i in 1..knots.len() {
        let (t0, t1) = (knots[i - 1], knots[i]);
        let u_prev = &us[i - 1];
        let g_prev = InternalVariable::new(gammas[i - 1].clone())?;
        let psi0 = problem.loads.boundary_value_unchecked(mesh, t0);
        let psi1 = problem.loads.boundary_value_unchecked(mesh, t1);
        let warm: Vec<f64> = u_prev
            .iter()
            .zip(psi1.iter().zip(&psi0))
            .map(|(u, (a, b))| u + a - b)
            .collect();
        let (u, info) = solver.solve(t1, g_prev.values(), &warm)?;
        let converged = info.converged;
        let gamma = join(&g_prev, &problem.phi_of(&u))?;

        let prev = &records[i - 1];
        let energy = energy_unchecked(problem, t1, &u, gamma.values());
        let th = theta_unchecked(problem, t1, &u);
        let dt = t1 - t0;
        let work_integral = prev.work_integral + 0.5 * dt * (prev.theta + th);
        let interpolant_integral = prev.interpolant_integral + interpolant_increment(problem, t0, t1, u_prev);
        let dissipation_increment = weighted_sum(mesh, gamma.values()) - weighted_sum(mesh, g_prev.values());
        let lower_tolerance = prev.lower_tolerance + dt * (th - prev.theta).abs();
        records.push(KnotRecord {
            step: i,
            t: t1,
            energy,
            theta: th,
            work_integral,
            interpolant_integral,
            dissipation_increment,
            cumulative_dissipation: prev.cumulative_dissipation + dissipation_increment,
            balance_residual: energy.total - e0.total - interpolant_integral,
            trapezoid_residual: energy.total - e0.total - work_integral,
            lower_tolerance,
            admissibility_excess: max_excess(problem, &u, gamma.values()),
            solver: Some(info),
        });
        us.push(u);
        gammas.push(gamma.values().to_vec());
        if !converged {
            log::warn!("step {i} (t = {t1}) did not converge");
            if opts.abort_on_nonconvergence {
                status = RunStatus::Aborted { step: i };
                break;
            }
            poisoned.push(i);
        }
    }
    if !poisoned.is_empty() {
        status = RunStatus::Poisoned { steps: poisoned };
    }
    Ok(EvolutionTrace {
        records,
        u: us,
        gamma: gammas,
        status,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub t: f64,
    pub residual: f64,
    pub trapezoid_residual: f64,
    pub lower_tolerance: f64,
    /// trapezoid_residual >= -lower_tolerance
    pub lower_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub rows: Vec<BalanceRow>,
    pub max_abs_residual: f64,
    pub max_abs_trapezoid_residual: f64,
    pub peak_energy: f64,
    pub lower_inequality_holds: bool,
}

/// Per-knot balance residuals and the one-sided inequality.
pub fn energy_balance_report(trace: &EvolutionTrace) -> BalanceReport {
    let rows: Vec<BalanceRow> = trace
        .records
        .iter()
        .map(|r| BalanceRow {
            t: r.t,
            residual: r.balance_residual,
            trapezoid_residual: r.trapezoid_residual,
            lower_tolerance: r.lower_tolerance,
            lower_holds: r.trapezoid_residual >= -r.lower_tolerance,
        })
        .collect();
    BalanceReport {
        max_abs_residual: rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
        max_abs_trapezoid_residual: rows.iter().map(|r| r.trapezoid_residual.abs()).fold(0.0, f64::max),
        peak_energy: trace.records.iter().map(|r| r.energy.total.abs()).fold(0.0, f64::max),
        lower_inequality_holds: rows.iter().all(|r| r.lower_holds),
        rows,
    }
}

/// Sampled stability certificates at every `every`-th knot (and the last one).
pub fn stability_along(
    problem: &Problem,
    trace: &EvolutionTrace,
    competitors: usize,
    every: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<StabilityReport>> {
    let every = every.max(1);
    let n = trace.records.len();
    let mut picks: Vec<usize> = (0..n).step_by(every).collect();
    if picks.last() != Some(&(n - 1)) {
        picks.push(n - 1);
    }
    picks
        .par_iter()
        .map(|&i| {
            let cfg = trace.configuration(i);
            let scale = 1.0 + cfg.u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let comps = random_competitors(&problem.mesh, &cfg.u, competitors, scale, seed ^ i as u64);
            stability_check(problem, &cfg, &comps, tol)
        })
        .collect()
}

/// Constants bounding the discrete solution uniformly in the time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriBounds {
    /// bound on the discrete L^p norm of the gradient
    pub gradient: f64,
    /// bound on ||gamma||_1
    pub gamma: f64,
    /// upper bound of the bulk energy along the run
    pub bulk_energy: f64,
    /// Korn constant used for the elastic model (1 otherwise)
    pub korn: f64,
}

/// Smallest C with ||grad v|| <= C ||E v|| for fields vanishing on the Dirichlet nodes.
pub fn korn_constant(problem: &Problem) -> Result<f64> {
    let mesh = &problem.mesh;
    if mesh.field_dim() != mesh.dim() || mesh.dim() != 2 {
        return Ok(1.0);
    }
    let gradient_form = Problem {
        bulk: BulkModel::quadratic(),
        ..problem.clone()
    };
    let strain_form = Problem {
        bulk: BulkKind::LinearElasticity { lambda: 0.0, mu: 0.5 }.into(),
        ..problem.clone()
    };
    let free: Vec<usize> = mesh
        .dirichlet_mask()
        .iter()
        .enumerate()
        .filter(|(_, f)| !**f)
        .map(|(i, _)| i)
        .collect();
    // v^T G v = |grad v|^2, v^T S v = 2 |E v|^2
    let g = crate::solver::dense_stiffness(&gradient_form).select_rows(&free).select_columns(&free);
    let s = crate::solver::dense_stiffness(&strain_form).select_rows(&free).select_columns(&free);
    let chol = Cholesky::new(g).ok_or_else(|| Error::Linalg("gradient form not definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(free.len(), free.len()))
        .ok_or_else(|| Error::Linalg("singular factor".into()))?;
    let c = &linv * s * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let kappa = 0.5 * c.symmetric_eigenvalues().min();
    if !(kappa > 0.0) {
        return Err(Error::Linalg("no Korn inequality on this mesh".into()));
    }
    Ok(1.0 / kappa.sqrt())
}

fn sym_grad_norm(problem: &Problem, u: &[f64]) -> f64 {
    let mesh = &problem.mesh;
    let s: f64 = (0..mesh.n_elements())
        .map(|e| {
            let xi = mesh.element_gradient(e, u);
            let mut acc = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    acc += (0.5 * (xi[i][j] + xi[j][i])).powi(2);
                }
            }
            mesh.element_volume(e) * acc
        })
        .sum();
    s.sqrt()
}

/// A-priori bounds for displacement-driven programs (no loads), valid on `grid`.
///
/// Comparing the step solution with psi(t_i) bounds the bulk energy by
/// max_t W(psi(t)); the growth constant turns that into a gradient bound, and
/// comparing with u_{i-1} + psi_i - psi_{i-1} bounds the history variable.
pub fn apriori_bounds(problem: &Problem, grid: &TimeGrid, initial: &Configuration) -> Result<AprioriBounds> {
    if !problem.loads.has_no_loads() {
        return Err(Error::Unsupported(
            "a-priori bounds are computed for displacement-driven programs only".into(),
        ));
    }
    let mesh = &problem.mesh;
    let bulk = &problem.bulk;
    let p = bulk.growth_exponent();
    let horizon = problem.loads.horizon;
    let mut samples: Vec<f64> = (0..=2000).map(|i| horizon * i as f64 / 2000.0).collect();
    samples.extend_from_slice(grid.knots());
    let psis: Vec<Vec<f64>> = samples
        .iter()
        .map(|&t| problem.loads.boundary_value_unchecked(mesh, t))
        .collect();
    let w0 = bulk.energy(mesh, &initial.u);
    let w_max = psis.iter().map(|v| bulk.energy(mesh, v)).fold(w0, f64::max);
    let (a0, _) = bulk.growth_constants(mesh.dim());
    let (gradient, korn) = match bulk.kind {
        BulkKind::LinearElasticity { .. } => {
            let korn = korn_constant(problem)?;
            let e_psi = psis.iter().map(|v| sym_grad_norm(problem, v)).fold(0.0, f64::max);
            let g_psi = psis.iter().map(|v| mesh.grad_norm(v, 2.0)).fold(0.0, f64::max);
            let e_bound = (w_max / a0).sqrt();
            let u0_grad = mesh.grad_norm(&initial.u, 2.0);
            (korn * (e_bound + e_psi) + g_psi.max(u0_grad), korn)
        }
        _ => {
            let scale = bulk
                .element_scale
                .as_ref()
                .map_or(1.0, |s| s.iter().cloned().fold(f64::INFINITY, f64::min));
            ((w_max / (a0 * scale)).powf(1.0 / p), 1.0)
        }
    };
    // increments W(u + d_psi) - W(u) <= p (W(u)^{1/p} + W(d_psi)^{1/p})^{p-1} W(d_psi)^{1/p}
    let knots = grid.knots();
    let wp = w_max.powf(1.0 / p);
    let mut growth = 0.0;
    for w in knots.windows(2) {
        let a = problem.loads.boundary_value_unchecked(mesh, w[0]);
        let b = problem.loads.boundary_value_unchecked(mesh, w[1]);
        let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
        let dw = bulk.energy(mesh, &d).powf(1.0 / p);
        growth += p * (wp + dw).powf(p - 1.0) * dw;
    }
    Ok(AprioriBounds {
        gradient,
        gamma: initial.gamma.l1_norm(mesh) + w0 + growth,
        bulk_energy: w_max,
        korn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_rod_mesh;
    use crate::loads::{BoundaryShape, LoadProgram, Profile};
    use crate::materials::CohesiveLaw;

    fn two_bar(profile: Profile, horizon: f64) -> Problem {
        let mesh = build_rod_mesh(2.0, 2, 1.0).unwrap();
        let loads = LoadProgram::displacement(
            horizon,
            profile,
            BoundaryShape::Affine {
                constant: [0.0; 2],
                gradient: [[0.5, 0.0], [0.0, 0.0]],
            },
        );
        Problem::new(mesh, BulkModel::quadratic(), CohesiveLaw::Linear { b: 0.25 }, loads).unwrap()
    }

    #[test]
    fn grid_validation() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.knots(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(TimeGrid::from_knots(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::from_knots(vec![0.1, 0.5]).is_err());
        assert!(TimeGrid::uniform(1.0, 0).is_err());
    }

    #[test]
    fn zero_program_stays_at_rest() {
        let mesh = build_rod_mesh(2.0, 4, 1.0).unwrap();
        let p = Problem::new(mesh, BulkModel::quadratic(), CohesiveLaw::Linear { b: 0.25 }, LoadProgram::zero(1.0)).unwrap();
        let g0 = InternalVariable::new(vec![0.2]).unwrap();
        let init = initial_state(&p, g0, &SolverOptions::default()).unwrap();
        let trace = run_evolution(&p, &TimeGrid::uniform(1.0, 5).unwrap(), &init, &EvolutionOptions::default()).unwrap();
        assert_eq!(trace.status, RunStatus::Complete);
        for (r, (u, g)) in trace.records.iter().zip(trace.u.iter().zip(&trace.gamma)) {
            assert!(u.iter().all(|v| v.abs() < 1e-12));
            assert_eq!(g, &vec![0.2]);
            assert_eq!(r.dissipation_increment, 0.0);
            assert!(r.balance_residual.abs() < 1e-15);
        }
    }

    #[test]
    fn two_bar_ramp_matches_closed_form() {
        let p = two_bar(Profile::Ramp { rate: 1.0 }, 1.0);
        let init = initial_state(&p, InternalVariable::zeros(1), &SolverOptions::default()).unwrap();
        let trace = run_evolution(&p, &TimeGrid::uniform(1.0, 20).unwrap(), &init, &EvolutionOptions::default()).unwrap();
        for (r, u) in trace.records.iter().zip(&trace.u) {
            let sigma = u[1] - u[0];
            let delta = u[2] - u[1];
            assert!((sigma - (r.t / 2.0).min(0.25)).abs() < 1e-9, "t = {}", r.t);
            assert!((delta - (r.t - 0.5).max(0.0)).abs() < 1e-9, "t = {}", r.t);
        }
    }

    #[test]
    fn theta_in_elastic_phase() {
        let p = two_bar(Profile::Ramp { rate: 1.0 }, 1.0);
        let t = 0.3;
        let u = vec![0.0, t / 2.0, t / 2.0, t];
        assert!((theta(&p, t, &u).unwrap() - t / 2.0).abs() < 1e-15);
        assert_eq!(theta(&p, t, &[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn unloading_freezes_gamma() {
        let p = two_bar(Profile::Triangle { peak_time: 1.0, peak: 1.0 }, 2.0);
        let init = initial_state(&p, InternalVariable::zeros(1), &SolverOptions::default()).unwrap();
        let trace = run_evolution(&p, &TimeGrid::uniform(2.0, 40).unwrap(), &init, &EvolutionOptions::default()).unwrap();
        let peak = trace.records.iter().position(|r| r.t == 1.0).unwrap();
        for i in peak + 1..trace.records.len() {
            assert_eq!(trace.records[i].dissipation_increment, 0.0);
            assert_eq!(trace.gamma[i], trace.gamma[peak]);
        }
        assert!((trace.gamma[peak][0] - 0.125).abs() < 1e-9);
    }

    #[test]
    fn apriori_bounds_hold_on_the_rod() {
        let p = two_bar(Profile::Ramp { rate: 1.0 }, 1.0);
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let init = initial_state(&p, InternalVariable::zeros(1), &SolverOptions::default()).unwrap();
        let b = apriori_bounds(&p, &grid, &init).unwrap();
        let trace = run_evolution(&p, &grid, &init, &EvolutionOptions::default()).unwrap();
        for (u, g) in trace.u.iter().zip(&trace.gamma) {
            assert!(p.mesh.grad_norm(u, 2.0) <= b.gradient);
            assert!(g.iter().sum::<f64>() <= b.gamma);
        }
    }
}
