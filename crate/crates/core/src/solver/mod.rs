//! One incremental step: minimize W(grad u) - <L(t), u> + ||phi([u]) v gamma_prev||_1
//! over u with u = psi(t) on the Dirichlet nodes.
//!
//! The default algorithm is an accelerated proximal gradient method on the full
//! field. Every non-smooth term touches a single twin pair, so the composite
//! proximal map is solved pair by pair in closed form. The Schur path eliminates
//! all unknowns except the jumps (quadratic bulk only) and runs coordinate
//! descent on the small dense problem that remains.

mod schur;

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::Mesh;
use crate::loads::dot;
use crate::materials::cohesive::{prox_vector, NodeCost, TIE_TOL};
use crate::materials::CohesiveLaw;
use crate::problem::Problem;
use crate::state::weighted_sum;

pub(crate) use schur::assemble_dense_stiffness as dense_stiffness;
pub use schur::{griffith_global_1d, schur_reduce, ReducedProblem, SchurSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ProximalGradientAccelerated,
    SchurCoordinateDescent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub algorithm: Algorithm,
    pub max_iterations: usize,
    /// Stop once the relative objective change stays below this, and the residual
    /// makes no new 1% low, for 500 iterations; such a run counts as converged
    /// when its residual is within 100x the tolerance.
    pub objective_tolerance: f64,
    /// Convergence: gradient-mapping norm <= residual_tolerance * (1 + |load covector|).
    pub residual_tolerance: f64,
    pub power_iterations: usize,
    pub safety_factor: f64,
    pub restart_on_nonmonotone: bool,
    /// For nonconvex laws, also try the fully closed and the open-branch starts.
    pub candidate_enrichment: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            algorithm: Algorithm::ProximalGradientAccelerated,
            max_iterations: 200_000,
            objective_tolerance: 1e-15,
            residual_tolerance: 1e-10,
            power_iterations: 50,
            safety_factor: 1.05,
            restart_on_nonmonotone: true,
            candidate_enrichment: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(param("solver.max_iterations", "must be >= 1"));
        }
        for (name, v) in [
            ("solver.objective_tolerance", self.objective_tolerance),
            ("solver.residual_tolerance", self.residual_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(param(name, format!("must be > 0, got {v}")));
            }
        }
        if self.power_iterations == 0 {
            return Err(param("solver.power_iterations", "must be >= 1"));
        }
        if !(self.safety_factor >= 1.0) {
            return Err(param(
                "solver.safety_factor",
                format!("must be >= 1, got {}", self.safety_factor),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub iterations: usize,
    /// Incremental objective including ||gamma_prev||_1.
    pub objective: f64,
    pub residual: f64,
    pub converged: bool,
    /// Start that produced the returned field: warm, closed or open.
    pub candidate: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Mode {
    Law,
    Closed,
    OpenBranch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum PairKind {
    Free,
    /// minus twin on the Dirichlet part
    MinusFixed,
    /// plus twin on the Dirichlet part
    PlusFixed,
}

/// An interface node whose jump is a genuine unknown.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Pair {
    pub index: usize,
    pub plus: usize,
    pub minus: usize,
    pub weight: f64,
    pub kind: PairKind,
}

pub(crate) fn active_pairs(mesh: &Mesh) -> Vec<Pair> {
    let mut fixed = vec![false; mesh.n_nodes()];
    for &v in mesh.dirichlet_nodes() {
        fixed[v] = true;
    }
    mesh.interface_nodes()
        .iter()
        .enumerate()
        .filter_map(|(index, q)| {
            if q.is_tip() {
                return None;
            }
            let kind = match (fixed[q.plus], fixed[q.minus]) {
                (false, false) => PairKind::Free,
                (false, true) => PairKind::MinusFixed,
                (true, false) => PairKind::PlusFixed,
                (true, true) => return None,
            };
            Some(Pair {
                index,
                plus: q.plus,
                minus: q.minus,
                weight: q.weight,
                kind,
            })
        })
        .collect()
}

fn node_cost(mode: Mode, law: &CohesiveLaw) -> NodeCost<'_> {
    match mode {
        Mode::Law => NodeCost::Law(law),
        Mode::Closed => NodeCost::Closed,
        Mode::OpenBranch => NodeCost::OpenBranch(law),
    }
}

const STAGNATION_WINDOW: usize = 500;
const STAGNATION_SLACK: f64 = 100.0;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Run {
    u: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// Reusable solver for a fixed problem; caches the step-size bound and the Schur factorization.
pub struct IncrementalSolver<'a> {
    problem: &'a Problem,
    opts: SolverOptions,
    fixed_dofs: Vec<usize>,
    free_mask: Vec<bool>,
    pairs: Vec<Pair>,
    lipschitz: Option<f64>,
    schur: OnceLock<SchurSolver>,
}

impl<'a> IncrementalSolver<'a> {
    pub fn new(problem: &'a Problem, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let mesh = &problem.mesh;
        let mask = mesh.dirichlet_mask();
        let fixed_dofs = (0..mesh.n_dofs()).filter(|d| mask[*d]).collect();
        let free_mask = mask.iter().map(|f| !f).collect();
        if opts.algorithm == Algorithm::SchurCoordinateDescent && !problem.bulk.is_quadratic() {
            return Err(Error::Unsupported(
                "the Schur reduction needs a quadratic bulk energy".into(),
            ));
        }
        let mut s = IncrementalSolver {
            problem,
            opts,
            fixed_dofs,
            free_mask,
            pairs: active_pairs(mesh),
            lipschitz: None,
            schur: OnceLock::new(),
        };
        if problem.bulk.is_quadratic() {
            let zero = vec![0.0; mesh.n_dofs()];
            s.lipschitz = Some(s.estimate_lipschitz(&zero));
        }
        Ok(s)
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    /// Step-size bound: power iteration on the (linearized) stiffness of the free dofs
    /// times the safety factor.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz
    }

    fn hessian_apply(&self, at: &[f64], v: &[f64], out: &mut [f64]) {
        let mesh = &self.problem.mesh;
        let bulk = &self.problem.bulk;
        if bulk.is_quadratic() {
            bulk.gradient_into(mesh, v, out);
        } else {
            let nv = norm(v).max(f64::MIN_POSITIVE);
            let eps = 1e-6 * (1.0 + norm(at)) / nv;
            let shifted: Vec<f64> = at.iter().zip(v).map(|(a, b)| a + eps * b).collect();
            let mut g0 = vec![0.0; out.len()];
            bulk.gradient_into(mesh, at, &mut g0);
            bulk.gradient_into(mesh, &shifted, out);
            for (o, g) in out.iter_mut().zip(&g0) {
                *o = (*o - g) / eps;
            }
        }
        for &d in &self.fixed_dofs {
            out[d] = 0.0;
        }
    }

    fn estimate_lipschitz(&self, at: &[f64]) -> f64 {
        let n = at.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v: Vec<f64> = (0..n)
            .map(|d| if self.free_mask[d] { rng.gen_range(0.5..1.5) } else { 0.0 })
            .collect();
        let mut hv = vec![0.0; n];
        let mut lambda = 0.0;
        for _ in 0..self.opts.power_iterations {
            let nv = norm(&v);
            if nv == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            self.hessian_apply(at, &v, &mut hv);
            lambda = dot(&v, &hv);
            std::mem::swap(&mut v, &mut hv);
        }
        let l = lambda * self.opts.safety_factor;
        if l.is_finite() && l > 0.0 {
            l
        } else {
            1.0
        }
    }

    fn smooth(&self, ell: &[f64], u: &[f64], grad: &mut [f64]) -> f64 {
        let w = self.problem.bulk.energy_gradient_into(&self.problem.mesh, u, grad);
        for (g, l) in grad.iter_mut().zip(ell) {
            *g -= l;
        }
        for &d in &self.fixed_dofs {
            grad[d] = 0.0;
        }
        w - dot(ell, u)
    }

    fn smooth_value(&self, ell: &[f64], u: &[f64]) -> f64 {
        self.problem.bulk.energy(&self.problem.mesh, u) - dot(ell, u)
    }

    fn pair_jump(&self, p: &Pair, u: &[f64], out: &mut [f64]) -> f64 {
        let m = self.problem.mesh.field_dim();
        for c in 0..m {
            out[c] = u[p.plus * m + c] - u[p.minus * m + c];
        }
        norm(&out[..m])
    }

    /// Sum of w (cost([u]) - gamma)^+ over the active pairs.
    fn nonsmooth(&self, mode: Mode, gamma: &[f64], u: &[f64]) -> f64 {
        let mut y = [0.0; 2];
        self.pairs
            .iter()
            .map(|p| {
                let r = self.pair_jump(p, u, &mut y);
                let cost = node_cost(mode, self.problem.law.at(p.index));
                p.weight * cost.excess(r, gamma[p.index])
            })
            .sum()
    }

    fn total_jump(&self, u: &[f64]) -> f64 {
        let mut y = [0.0; 2];
        self.pairs
            .iter()
            .map(|p| p.weight * self.pair_jump(p, u, &mut y))
            .sum()
    }

    /// out = argmin_v lip/2 |v - z|^2 + sum_pairs w cost([v]).
    fn prox_into(&self, mode: Mode, gamma: &[f64], z: &[f64], lip: f64, out: &mut [f64]) {
        out.copy_from_slice(z);
        let m = self.problem.mesh.field_dim();
        let mut y0 = [0.0; 2];
        let mut y = [0.0; 2];
        for p in &self.pairs {
            let cost = node_cost(mode, self.problem.law.at(p.index));
            let g = gamma[p.index];
            let (ip, iq) = (p.plus * m, p.minus * m);
            for c in 0..m {
                y0[c] = z[ip + c] - z[iq + c];
            }
            match p.kind {
                PairKind::Free => {
                    prox_vector(cost, &y0[..m], g, 0.5 * lip, p.weight, &mut y[..m]);
                    for c in 0..m {
                        let mid = 0.5 * (z[ip + c] + z[iq + c]);
                        out[ip + c] = mid + 0.5 * y[c];
                        out[iq + c] = mid - 0.5 * y[c];
                    }
                }
                PairKind::MinusFixed => {
                    prox_vector(cost, &y0[..m], g, lip, p.weight, &mut y[..m]);
                    for c in 0..m {
                        out[ip + c] = z[iq + c] + y[c];
                    }
                }
                PairKind::PlusFixed => {
                    prox_vector(cost, &y0[..m], g, lip, p.weight, &mut y[..m]);
                    for c in 0..m {
                        out[iq + c] = z[ip + c] - y[c];
                    }
                }
            }
        }
    }

    fn fista(&self, mode: Mode, gamma: &[f64], ell: &[f64], start: Vec<f64>, budget: usize) -> Result<Run> {
        let n = start.len();
        let quadratic = self.problem.bulk.is_quadratic();
        let mut lip = match self.lipschitz {
            Some(l) => l,
            None => self.estimate_lipschitz(&start),
        };
        let lip_floor = 1e-8 * lip;
        let ell_free: Vec<f64> = ell
            .iter()
            .zip(&self.free_mask)
            .map(|(l, f)| if *f { *l } else { 0.0 })
            .collect();
        let tol = self.opts.residual_tolerance * (1.0 + norm(&ell_free));

        let mut x = start;
        let mut fx = self.smooth_value(ell, &x) + self.nonsmooth(mode, gamma, &x);
        let mut y = x.clone();
        let mut momentum = false;
        let mut tk = 1.0_f64;
        let mut g = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut xn = vec![0.0; n];
        let mut dv = vec![0.0; n];
        let mut gn = vec![0.0; n];
        let mut residual = f64::INFINITY;
        let mut stagnant = 0;
        let mut best_residual = f64::INFINITY;
        let mut it = 0;
        while it < budget {
            it += 1;
            let fy = self.smooth(ell, &y, &mut g);
            let (fxn, d2) = loop {
                for i in 0..n {
                    z[i] = y[i] - g[i] / lip;
                }
                self.prox_into(mode, gamma, &z, lip, &mut xn);
                let mut d2 = 0.0;
                let mut gd = 0.0;
                for i in 0..n {
                    let d = xn[i] - y[i];
                    dv[i] = d;
                    d2 += d * d;
                    gd += g[i] * d;
                }
                // Curvature along d, compared without cancelling large energies.
                let (fxn, curvature) = if quadratic {
                    let wd = self.problem.bulk.energy(&self.problem.mesh, &dv);
                    (fy + gd + wd, wd)
                } else {
                    let fxn = self.smooth(ell, &xn, &mut gn);
                    (fxn, dot(&gn, &dv) - gd)
                };
                if curvature <= 0.5 * lip * d2 * (1.0 + 1e-12) || !fxn.is_finite() || d2 == 0.0 {
                    break (fxn, d2);
                }
                lip *= 2.0;
            };
            let f_new = fxn + self.nonsmooth(mode, gamma, &xn);
            if !f_new.is_finite() {
                return Err(Error::NonFinite { iterations: it });
            }
            residual = lip * d2.sqrt();
            if momentum && self.opts.restart_on_nonmonotone && f_new > fx {
                y.copy_from_slice(&x);
                tk = 1.0;
                momentum = false;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
            let beta = (tk - 1.0) / t_next;
            for i in 0..n {
                y[i] = xn[i] + beta * (xn[i] - x[i]);
            }
            momentum = beta > 0.0;
            tk = t_next;
            let flat = (fx - f_new).abs() <= self.opts.objective_tolerance * (1.0 + f_new.abs());
            if residual < 0.99 * best_residual {
                best_residual = residual;
                stagnant = 0;
            } else if flat {
                stagnant += 1;
            } else {
                stagnant = 0;
            }
            std::mem::swap(&mut x, &mut xn);
            fx = f_new;
            if residual <= tol {
                return Ok(Run {
                    u: x,
                    residual,
                    iterations: it,
                    converged: true,
                });
            }
            if stagnant >= STAGNATION_WINDOW {
                return Ok(Run {
                    u: x,
                    residual,
                    iterations: it,
                    converged: residual <= STAGNATION_SLACK * tol,
                });
            }
            if !quadratic {
                lip = (0.9 * lip).max(lip_floor);
            }
        }
        Ok(Run {
            u: x,
            residual,
            iterations: it,
            converged: residual <= tol,
        })
    }

    fn law_objective(&self, gamma: &[f64], ell: &[f64], u: &[f64]) -> f64 {
        self.smooth_value(ell, u)
            + self.nonsmooth(Mode::Law, gamma, u)
            + weighted_sum(&self.problem.mesh, gamma)
    }

    fn schur(&self) -> Result<&SchurSolver> {
        if let Some(s) = self.schur.get() {
            return Ok(s);
        }
        let s = SchurSolver::new(self.problem)?;
        Ok(self.schur.get_or_init(|| s))
    }

    fn run_mode(
        &self,
        mode: Mode,
        t: f64,
        gamma: &[f64],
        ell: &[f64],
        start: Vec<f64>,
        budget: usize,
    ) -> Result<Run> {
        match self.opts.algorithm {
            Algorithm::ProximalGradientAccelerated => self.fista(mode, gamma, ell, start, budget),
            Algorithm::SchurCoordinateDescent => {
                let schur = self.schur()?;
                let reduced = schur.reduce(self.problem, t)?;
                let delta0 = schur.jumps_of(&start);
                let (delta, residual, iterations, converged) = reduced.coordinate_descent(
                    &self.problem.law,
                    gamma,
                    mode,
                    delta0,
                    budget,
                    self.opts.residual_tolerance,
                );
                Ok(Run {
                    u: reduced.recover(&delta),
                    residual,
                    iterations,
                    converged,
                })
            }
        }
    }

    /// Solve the incremental problem at time t from `u_init` (Dirichlet entries are overwritten).
    pub fn solve(&self, t: f64, gamma_prev: &[f64], u_init: &[f64]) -> Result<(Vec<f64>, SolverInfo)> {
        let problem = self.problem;
        let mesh = &problem.mesh;
        problem.loads.check_time(t)?;
        mesh.check_field(u_init, "initial field")?;
        if gamma_prev.len() != mesh.n_interface() {
            return Err(Error::Dimension {
                what: "internal variable",
                expected: mesh.n_interface(),
                got: gamma_prev.len(),
            });
        }
        let psi = problem.loads.boundary_value_unchecked(mesh, t);
        let mut u0 = u_init.to_vec();
        for &d in &self.fixed_dofs {
            u0[d] = psi[d];
        }
        let ell = problem.loads.covector_unchecked(mesh, t);
        let budget = self.opts.max_iterations;

        let warm = self.run_mode(Mode::Law, t, gamma_prev, &ell, u0.clone(), budget)?;
        let mut iterations = warm.iterations;
        let mut best = (warm, "warm");
        let mut best_f = self.law_objective(gamma_prev, &ell, &best.0.u);

        if self.opts.candidate_enrichment && !problem.law.is_convex() && !self.pairs.is_empty() {
            for (mode, label) in [(Mode::Closed, "closed"), (Mode::OpenBranch, "open")] {
                let pre = self.run_mode(mode, t, gamma_prev, &ell, u0.clone(), budget)?;
                let run = self.run_mode(Mode::Law, t, gamma_prev, &ell, pre.u, budget)?;
                iterations += pre.iterations + run.iterations;
                let f = self.law_objective(gamma_prev, &ell, &run.u);
                let tie = TIE_TOL * (1.0 + best_f.abs());
                let better = f < best_f - tie
                    || (f <= best_f + tie && self.total_jump(&run.u) < self.total_jump(&best.0.u));
                if better {
                    best = (run, label);
                    best_f = f;
                }
            }
        }
        let (run, label) = best;
        Ok((
            run.u,
            SolverInfo {
                iterations,
                objective: best_f,
                residual: run.residual,
                converged: run.converged,
                candidate: label.to_string(),
            },
        ))
    }
}

/// One-shot incremental solve; see [`IncrementalSolver::solve`].
pub fn incremental_solve(
    problem: &Problem,
    t: f64,
    gamma_prev: &[f64],
    u_init: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolverInfo)> {
    IncrementalSolver::new(problem, opts.clone())?.solve(t, gamma_prev, u_init)
}

/// The incremental objective W - <L(t), u> + ||phi([u]) v gamma_prev||_1 at a given field.
pub fn incremental_objective(problem: &Problem, t: f64, gamma_prev: &[f64], u: &[f64]) -> Result<f64> {
    problem.loads.check_time(t)?;
    problem.mesh.check_field(u, "nodal field")?;
    let phis = problem.phi_of(u);
    let joined: f64 = problem
        .mesh
        .interface_nodes()
        .iter()
        .zip(phis.iter().zip(gamma_prev))
        .map(|(q, (p, g))| q.weight * p.max(*g))
        .sum();
    Ok(problem.smooth_energy(t, u) + joined)
}
