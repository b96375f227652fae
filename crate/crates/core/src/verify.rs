//! Invariant checks on a finished run directory.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, read_trace_csv, States, CONFIG_FILE, STATES_FILE, TRACE_FILE};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::euler::euler_residuals;
use crate::problem::Problem;
use crate::state::{admissibility, total_energy, Configuration, InternalVariable, ADMISSIBILITY_TOL};

/// Pointwise tolerance of the ess-sup identity.
pub const ESS_SUP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst measured value (meaning depends on the check).
    pub measured: f64,
    pub threshold: f64,
    /// Knot of the worst value or first violation.
    pub knot: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &str, measured: f64, threshold: f64, passed: bool, knot: Option<usize>, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        measured,
        threshold,
        knot,
        detail,
    }
}

/// Largest value of `f(i)` over the knots together with its index.
fn worst<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> (f64, Option<usize>) {
    (0..n)
        .map(|i| (f(i), Some(i)))
        .fold((f64::NEG_INFINITY, None), |a, b| if b.0 > a.0 { b } else { a })
}

/// gamma never decreases between consecutive knots (no tolerance).
pub fn check_irreversibility(gamma: &[Vec<f64>]) -> Check {
    for i in 1..gamma.len() {
        if let Some(node) = (0..gamma[i].len()).find(|&e| gamma[i][e] < gamma[i - 1][e]) {
            return check(
                "irreversibility",
                gamma[i - 1][node] - gamma[i][node],
                0.0,
                false,
                Some(i),
                format!("gamma decreases at node {node}: {} -> {}", gamma[i - 1][node], gamma[i][node]),
            );
        }
    }
    check("irreversibility", 0.0, 0.0, true, None, "gamma nondecreasing at every node".into())
}

/// gamma_i = gamma_0 v max_{1<=j<=i} phi([u_j]) pointwise.
pub fn check_ess_sup(problem: &Problem, u: &[Vec<f64>], gamma: &[Vec<f64>]) -> Check {
    let mut running = gamma[0].clone();
    let mut worst_err = 0.0_f64;
    let mut at = None;
    for i in 1..gamma.len() {
        for (r, p) in running.iter_mut().zip(problem.phi_of(&u[i])) {
            *r = r.max(p);
        }
        for (r, g) in running.iter().zip(&gamma[i]) {
            let e = (r - g).abs();
            if e > worst_err {
                worst_err = e;
                at = Some(i);
            }
        }
    }
    check(
        "ess_sup_identity",
        worst_err,
        ESS_SUP_TOL,
        worst_err <= ESS_SUP_TOL,
        at,
        "max |gamma_i - (gamma_0 v max_j phi([u_j]))|".into(),
    )
}

/// Verify the run stored in `dir`; missing or malformed artifacts are errors.
pub fn verify_run(dir: &Path) -> Result<VerifyReport> {
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let sc = cfg.scenario()?;
    let problem = &sc.problem;
    let states: States = read_json(&dir.join(STATES_FILE))?;
    let rows = read_trace_csv(&dir.join(TRACE_FILE))?;
    let n = states.times.len();
    if n == 0 || states.u.len() != n || states.gamma.len() != n || rows.len() != n {
        return Err(Error::Config(format!(
            "inconsistent run directory: {n} times, {} fields, {} histories, {} trace rows",
            states.u.len(),
            states.gamma.len(),
            rows.len()
        )));
    }
    let configs: Vec<Configuration> = (0..n)
        .map(|i| {
            let gamma = InternalVariable::new(states.gamma[i].clone())?;
            let c = Configuration::new(states.times[i], states.u[i].clone(), gamma);
            c.check(problem)?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let v = &cfg.verification;
    let mut checks = Vec::new();

    let first_bad = rows.iter().position(|r| !r.converged);
    checks.push(check(
        "solver_convergence",
        first_bad.map_or(0.0, |_| 1.0),
        0.0,
        first_bad.is_none(),
        first_bad,
        "every incremental problem converged".into(),
    ));

    checks.push(check_irreversibility(&states.gamma));
    checks.push(check_ess_sup(problem, &states.u, &states.gamma));

    let adm: Vec<_> = configs
        .par_iter()
        .map(|c| admissibility(problem, c, ADMISSIBILITY_TOL))
        .collect::<Result<_>>()?;
    let (m, k) = worst(n, |i| adm[i].max_excess.max(adm[i].dirichlet_error));
    checks.push(check(
        "admissibility",
        m,
        ADMISSIBILITY_TOL,
        adm.iter().all(|a| a.admissible),
        k,
        "max of phi([u]) - gamma and the Dirichlet error".into(),
    ));

    let energies: Vec<f64> = configs
        .par_iter()
        .map(|c| total_energy(problem, c).map(|e| e.total))
        .collect::<Result<_>>()?;
    let (m, k) = worst(n, |i| {
        (energies[i] - rows[i].total_energy).abs() / (1.0 + energies[i].abs())
    });
    checks.push(check(
        "trace_consistency",
        m,
        1e-9,
        m <= 1e-9 && rows.iter().zip(&states.times).all(|(r, t)| r.t == *t),
        k,
        "trace energies and times match the stored states".into(),
    ));

    let (m, k) = worst(n, |i| {
        if i == 0 {
            0.0
        } else {
            rows[i - 1].cumulative_dissipation - rows[i].cumulative_dissipation
        }
    });
    checks.push(check(
        "dissipation_monotone",
        m.max(0.0),
        0.0,
        m <= 0.0,
        k.filter(|_| m > 0.0),
        "cumulative dissipation nondecreasing".into(),
    ));

    let peak = rows.iter().map(|r| r.total_energy.abs()).fold(0.0, f64::max);
    let limit = v.balance_fraction * peak + 1e-12;
    let (m, k) = worst(n, |i| rows[i].balance_residual.abs());
    checks.push(check(
        "energy_balance",
        m,
        limit,
        m <= limit,
        k,
        format!("max |balance residual| against {} x peak energy {peak:e}", v.balance_fraction),
    ));

    let slack = 1e-12 * (1.0 + peak);
    let (m, k) = worst(n, |i| -(rows[i].trapezoid_residual + rows[i].lower_tolerance));
    checks.push(check(
        "lower_energy_inequality",
        m,
        slack,
        m <= slack,
        k,
        "max of -(E - E0 - int theta + quadrature tolerance)".into(),
    ));

    let structured = (0..problem.mesh.n_interface()).all(|e| problem.law.at(e).has_euler_structure());
    if structured && v.euler_every > 0 {
        let picks: Vec<usize> = (0..n).step_by(v.euler_every).collect();
        let reports = picks
            .par_iter()
            .map(|&i| euler_residuals(problem, states.times[i], &states.u[i], &states.gamma[i]))
            .collect::<Result<Vec<_>>>()?;
        let (m, j) = worst(reports.len(), |j| reports[j].worst());
        let k = j.map(|j| picks[j]);
        let detail = match k {
            Some(i) => {
                let r = &reports[j.unwrap()];
                format!(
                    "interior {:e}, action-reaction {:e}, (a) {:e}, (b) {:e}, (c) {:e} at t = {}",
                    r.interior_residual,
                    r.action_reaction_residual,
                    r.condition_a,
                    r.condition_b,
                    r.condition_c,
                    states.times[i]
                )
            }
            None => "no knots checked".into(),
        };
        checks.push(check("euler_conditions", m.max(0.0), v.euler_tolerance, m <= v.euler_tolerance, k, detail));
    }

    Ok(VerifyReport { checks })
}
