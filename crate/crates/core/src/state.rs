//! Configurations (u, gamma), the total energy and the stability test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::Mesh;
use crate::loads::dot;
use crate::problem::Problem;

/// History variable: the largest cohesive energy density reached at each interface node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InternalVariable(Vec<f64>);

impl InternalVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(param(format!("gamma[{i}]"), format!("must be finite and >= 0, got {v}")));
        }
        Ok(InternalVariable(values))
    }

    pub fn zeros(n: usize) -> Self {
        InternalVariable(vec![0.0; n])
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weighted interface sum.
    pub fn l1_norm(&self, mesh: &Mesh) -> f64 {
        weighted_sum(mesh, &self.0)
    }
}

pub(crate) fn weighted_sum(mesh: &Mesh, v: &[f64]) -> f64 {
    mesh.interface_nodes().iter().zip(v).map(|(q, x)| q.weight * x).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub t: f64,
    pub u: Vec<f64>,
    pub gamma: InternalVariable,
}

impl Configuration {
    pub fn new(t: f64, u: Vec<f64>, gamma: InternalVariable) -> Self {
        Configuration { t, u, gamma }
    }

    /// Field and history sizes match the problem and t lies in the horizon.
    pub fn check(&self, problem: &Problem) -> Result<()> {
        problem.mesh.check_field(&self.u, "configuration field")?;
        if self.gamma.len() != problem.mesh.n_interface() {
            return Err(Error::Dimension {
                what: "internal variable",
                expected: problem.mesh.n_interface(),
                got: self.gamma.len(),
            });
        }
        problem.loads.check_time(self.t)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bulk: f64,
    pub load_work: f64,
    pub crack_term: f64,
    pub total: f64,
}

/// E(t)(u, gamma) = W(grad u) - <L(t), u> + ||gamma||_1, split into its parts.
pub fn total_energy(problem: &Problem, cfg: &Configuration) -> Result<EnergyBreakdown> {
    cfg.check(problem)?;
    Ok(energy_unchecked(problem, cfg.t, &cfg.u, cfg.gamma.values()))
}

pub(crate) fn energy_unchecked(problem: &Problem, t: f64, u: &[f64], gamma: &[f64]) -> EnergyBreakdown {
    let bulk = problem.bulk.energy(&problem.mesh, u);
    let load_work = dot(&problem.loads.covector_unchecked(&problem.mesh, t), u);
    let crack_term = weighted_sum(&problem.mesh, gamma);
    EnergyBreakdown {
        bulk,
        load_work,
        crack_term,
        total: bulk - load_work + crack_term,
    }
}

/// Pointwise maximum of gamma and `other`.
pub fn join(gamma: &InternalVariable, other: &[f64]) -> Result<InternalVariable> {
    if other.len() != gamma.len() {
        return Err(Error::Dimension {
            what: "join operand",
            expected: gamma.len(),
            got: other.len(),
        });
    }
    Ok(InternalVariable(
        gamma.0.iter().zip(other).map(|(g, o)| g.max(*o)).collect(),
    ))
}

/// Weighted interface sum of g2 - g1; fails when g2 < g1 anywhere.
pub fn dissipation_distance(mesh: &Mesh, g1: &InternalVariable, g2: &InternalVariable) -> Result<f64> {
    if g1.len() != mesh.n_interface() || g2.len() != mesh.n_interface() {
        return Err(Error::Dimension {
            what: "internal variable",
            expected: mesh.n_interface(),
            got: if g1.len() != mesh.n_interface() { g1.len() } else { g2.len() },
        });
    }
    let mut total = 0.0;
    for (i, ((a, b), q)) in g1.0.iter().zip(&g2.0).zip(mesh.interface_nodes()).enumerate() {
        if b < a {
            return Err(Error::Irreversibility {
                node: i,
                earlier: *a,
                later: *b,
            });
        }
        total += q.weight * (b - a);
    }
    Ok(total)
}

pub const ADMISSIBILITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// max over interface nodes of phi([u]) - gamma
    pub max_excess: f64,
    pub worst_node: Option<usize>,
    /// max deviation from psi(t) on Dirichlet dofs
    pub dirichlet_error: f64,
    pub admissible: bool,
}

/// Membership of u in AD(psi(t), gamma).
pub fn admissibility(problem: &Problem, cfg: &Configuration, tol: f64) -> Result<AdmissibilityReport> {
    cfg.check(problem)?;
    let phis = problem.phi_of(&cfg.u);
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst_node = None;
    for (i, (p, g)) in phis.iter().zip(cfg.gamma.values()).enumerate() {
        if p - g > max_excess {
            max_excess = p - g;
            worst_node = Some(i);
        }
    }
    if phis.is_empty() {
        max_excess = 0.0;
    }
    let (_, dirichlet_error) = problem.dirichlet_error(cfg.t, &cfg.u);
    Ok(AdmissibilityReport {
        max_excess,
        worst_node,
        dirichlet_error,
        admissible: max_excess <= tol && dirichlet_error <= tol,
    })
}

pub const CERTIFICATE_NOTE: &str =
    "sampled certificate: a finite competitor set tests a necessary condition for global stability only";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub t: f64,
    pub competitors: usize,
    /// max over competitors of lhs - rhs
    pub max_violation: f64,
    pub worst_competitor: Option<usize>,
    pub tol: f64,
    pub passed: bool,
    pub note: String,
}

/// Tests W(u) - <L,u> <= W(v) - <L,v> + ||(phi([v]) - gamma)^+||_1 for every competitor v.
pub fn stability_check(
    problem: &Problem,
    cfg: &Configuration,
    competitors: &[Vec<f64>],
    tol: f64,
) -> Result<StabilityReport> {
    cfg.check(problem)?;
    let mesh = &problem.mesh;
    let psi = problem.loads.boundary_value_unchecked(mesh, cfg.t);
    let m = mesh.field_dim();
    for (k, v) in competitors.iter().enumerate() {
        mesh.check_field(v, "competitor")?;
        for &node in mesh.dirichlet_nodes() {
            for c in 0..m {
                let d = node * m + c;
                if (v[d] - psi[d]).abs() > 1e-12 * (1.0 + psi[d].abs()) {
                    return Err(Error::Competitor { index: k, dof: d });
                }
            }
        }
    }
    let lhs = problem.smooth_energy(cfg.t, &cfg.u);
    let gamma = cfg.gamma.values();
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst = None;
    for (k, v) in competitors.iter().enumerate() {
        let phis = problem.phi_of(v);
        let increment: f64 = mesh
            .interface_nodes()
            .iter()
            .zip(phis.iter().zip(gamma))
            .map(|(q, (p, g))| q.weight * (p - g).max(0.0))
            .sum();
        let rhs = problem.smooth_energy(cfg.t, v) + increment;
        let violation = lhs - rhs;
        if violation > max_violation {
            max_violation = violation;
            worst = Some(k);
        }
    }
    if competitors.is_empty() {
        max_violation = 0.0;
    }
    Ok(StabilityReport {
        t: cfg.t,
        competitors: competitors.len(),
        max_violation,
        worst_competitor: worst,
        tol,
        passed: max_violation <= tol,
        note: CERTIFICATE_NOTE.to_string(),
    })
}

/// Seeded perturbations v = u + r with r zero on the Dirichlet dofs; the amplitudes
/// cycle through 1e-3, 1e-2 and 1e-1 times `scale`.
pub fn random_competitors(mesh: &Mesh, u: &[f64], n: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = mesh.dirichlet_mask();
    (0..n)
        .map(|k| {
            let amp = scale * [1e-3, 1e-2, 1e-1][k % 3];
            u.iter()
                .zip(&mask)
                .map(|(x, fixed)| if *fixed { *x } else { x + amp * rng.gen_range(-1.0..=1.0) })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_rod_mesh;
    use crate::loads::LoadProgram;
    use crate::materials::{BulkModel, CohesiveLaw};

    fn rod_problem() -> Problem {
        let mesh = build_rod_mesh(2.0, 2, 1.0).unwrap();
        Problem::new(
            mesh,
            BulkModel::quadratic(),
            CohesiveLaw::Linear { b: 0.25 },
            LoadProgram::zero(1.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let p = rod_problem();
        let cfg = Configuration::new(0.0, vec![0.0; 4], InternalVariable::zeros(1));
        let e = total_energy(&p, &cfg).unwrap();
        assert_eq!(e, EnergyBreakdown::default());
    }

    #[test]
    fn two_bar_energy_by_hand() {
        let p = rod_problem();
        // nodes x = 0, 1-, 1+, 2 with stress sigma on both bars and jump delta
        let (sigma, delta) = (0.3, 0.4);
        let u = vec![0.0, sigma, sigma + delta, 2.0 * sigma + delta];
        let cfg = Configuration::new(0.5, u, InternalVariable::uniform(1, 0.7).unwrap());
        let e = total_energy(&p, &cfg).unwrap();
        assert!((e.bulk - sigma * sigma).abs() < 1e-15);
        assert!((e.crack_term - 0.7).abs() < 1e-15);
        let cfg2 = Configuration::new(0.5, cfg.u.clone(), InternalVariable::uniform(1, 1.4).unwrap());
        let e2 = total_energy(&p, &cfg2).unwrap();
        assert!((e2.crack_term - 2.0 * e.crack_term).abs() < 1e-15);
        assert_eq!(e2.bulk, e.bulk);
        assert_eq!(e2.load_work, e.load_work);
    }

    #[test]
    fn join_and_distance() {
        let g = InternalVariable::new(vec![0.1, 0.5]).unwrap();
        assert_eq!(join(&g, &[0.0, 0.0]).unwrap(), g);
        assert_eq!(join(&g, &[0.3, 0.2]).unwrap().values(), &[0.3, 0.5]);
        let mesh = build_rod_mesh(2.0, 2, 1.0).unwrap();
        let a = InternalVariable::new(vec![0.2]).unwrap();
        let b = InternalVariable::new(vec![0.5]).unwrap();
        assert_eq!(dissipation_distance(&mesh, &a, &a).unwrap(), 0.0);
        assert!((dissipation_distance(&mesh, &a, &b).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(
            dissipation_distance(&mesh, &b, &a),
            Err(Error::Irreversibility { node: 0, .. })
        ));
        assert!(InternalVariable::new(vec![-1.0]).is_err());
    }

    #[test]
    fn self_competitor_has_zero_violation() {
        let p = rod_problem();
        let u = vec![0.0, 0.0, 0.0, 0.0];
        let cfg = Configuration::new(0.0, u.clone(), InternalVariable::zeros(1));
        let r = stability_check(&p, &cfg, &[u], 1e-9).unwrap();
        assert_eq!(r.max_violation, 0.0);
        assert!(r.passed);
        assert!(r.note.contains("necessary"));
    }

    #[test]
    fn competitor_off_boundary_rejected() {
        let p = rod_problem();
        let cfg = Configuration::new(0.0, vec![0.0; 4], InternalVariable::zeros(1));
        let err = stability_check(&p, &cfg, &[vec![1.0, 0.0, 0.0, 0.0]], 1e-9).unwrap_err();
        assert!(matches!(err, Error::Competitor { index: 0, dof: 0 }));
    }

    #[test]
    fn competitors_respect_dirichlet_and_seed() {
        let mesh = build_rod_mesh(2.0, 4, 1.0).unwrap();
        let u = vec![0.5; mesh.n_dofs()];
        let a = random_competitors(&mesh, &u, 5, 1.0, 7);
        let b = random_competitors(&mesh, &u, 5, 1.0, 7);
        assert_eq!(a, b);
        for v in &a {
            for &d in mesh.dirichlet_nodes() {
                assert_eq!(v[d], 0.5);
            }
        }
    }
}
