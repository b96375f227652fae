//! Post-hoc checks of the first-order (Euler) conditions on solved configurations.
//!
//! The discrete traction at an interface pair is read off the equilibrium
//! residual `R = grad W(u) - l(t)`: moving the plus copy alone changes the
//! jump by a unit vector, so `h = -R_plus / w`. The sub-activation set is
//! nodal and therefore closed, so no enlargement of it is needed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EvolutionTrace;
use crate::geometry::Mesh;
use crate::materials::cohesive::{psi_tilde, smooth_gradient};
use crate::materials::{BulkKind, CohesiveLaw, LawField};
use crate::problem::Problem;

/// Absolute tolerance for the region tests.
pub const REGION_TOL: f64 = 1e-9;
/// Number of sampled directions for the K(x) membership test in the plane.
pub const K_DIRECTIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// 0 < phi([u]) = gamma
    A,
    /// phi([u]) = 0 and gamma = phi0
    B,
    /// gamma < phi0
    D,
    Other,
}

/// Region of every interface node.
pub fn classify_regions(law: &LawField, jumps: &[[f64; 2]], gamma: &[f64], m: usize) -> Vec<Region> {
    jumps
        .iter()
        .zip(gamma)
        .enumerate()
        .map(|(i, (y, &g))| {
            let law = law.at(i);
            let phi = crate::materials::cohesive::phi(law, &y[..m]);
            let phi0 = law.activation();
            if g < phi0 - REGION_TOL {
                Region::D
            } else if phi > REGION_TOL && (phi - g).abs() <= REGION_TOL {
                Region::A
            } else if phi <= REGION_TOL && (g - phi0).abs() <= REGION_TOL {
                Region::B
            } else {
                Region::Other
            }
        })
        .collect()
}

/// Equilibrium residual grad W(u) - l(t); zero on Dirichlet dofs.
fn residual(problem: &Problem, t: f64, u: &[f64]) -> Vec<f64> {
    let mesh = &problem.mesh;
    let mut r = problem.bulk.gradient(mesh, u);
    let ell = problem.loads.covector_unchecked(mesh, t);
    for (ri, li) in r.iter_mut().zip(&ell) {
        *ri -= li;
    }
    let m = mesh.field_dim();
    for &v in mesh.dirichlet_nodes() {
        for c in 0..m {
            r[v * m + c] = 0.0;
        }
    }
    r
}

fn tractions_from(mesh: &Mesh, r: &[f64]) -> Vec<Option<Vec<f64>>> {
    let m = mesh.field_dim();
    let fixed = mesh.dirichlet_mask();
    mesh.interface_nodes()
        .iter()
        .map(|p| {
            if p.is_tip() {
                None
            } else if !fixed[p.plus] {
                Some((0..m).map(|c| -r[p.plus * m + c] / p.weight).collect())
            } else if !fixed[p.minus] {
                Some((0..m).map(|c| r[p.minus * m + c] / p.weight).collect())
            } else {
                None
            }
        })
        .collect()
}

/// Consistent traction at every interface node, exerted by the plus lip on the
/// minus lip. `None` at crack tips and at pairs with both copies prescribed.
pub fn recover_traction(problem: &Problem, t: f64, u: &[f64]) -> Result<Vec<Option<Vec<f64>>>> {
    problem.loads.check_time(t)?;
    problem.mesh.check_field(u, "nodal field")?;
    Ok(tractions_from(&problem.mesh, &residual(problem, t, u)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerNode {
    pub index: usize,
    pub region: Region,
    pub jump: Vec<f64>,
    pub gamma: f64,
    pub traction: Option<Vec<f64>>,
    /// Multiplier with h = lambda d phi_s([u]); only on region A.
    pub lambda: Option<f64>,
    /// Violation of the condition attached to the node's region.
    pub violation: f64,
}

/// Checks specific to the scalar model with quadratic bulk and phi = b|y|.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarExampleReport {
    pub b: f64,
    /// max (|h| - b) over all interface nodes
    pub traction_bound_excess: f64,
    /// max |h| where b|[u]| < gamma - tol
    pub slack_traction: f64,
    /// min h [u] where b|[u]| = gamma within tol
    pub min_active_product: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerReport {
    pub t: f64,
    pub nodes: Vec<EulerNode>,
    /// max |R| over free dofs away from the crack (bulk and Neumann equations)
    pub interior_residual: f64,
    /// max |R_plus + R_minus| / w over pairs with both copies free
    pub action_reaction_residual: f64,
    pub condition_a: f64,
    pub condition_b: f64,
    pub condition_c: f64,
    pub scalar_example: Option<ScalarExampleReport>,
}

impl EulerReport {
    /// Largest residual over the equilibrium equations and the region conditions.
    pub fn worst(&self) -> f64 {
        [
            self.interior_residual,
            self.action_reaction_residual,
            self.condition_a,
            self.condition_b,
            self.condition_c,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn count(&self, region: Region) -> usize {
        self.nodes.iter().filter(|n| n.region == region).count()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sampled sup over unit y of (h.y - psi~(y)), clipped at zero.
fn k_violation(law: &CohesiveLaw, h: &[f64]) -> Result<f64> {
    let dirs: Vec<[f64; 2]> = if h.len() == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..K_DIRECTIONS)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / K_DIRECTIONS as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    };
    let mut worst = 0.0_f64;
    for d in &dirs {
        let y = &d[..h.len()];
        let hy: f64 = h.iter().zip(y).map(|(a, b)| a * b).sum();
        worst = worst.max(hy - psi_tilde(law, y)?);
    }
    Ok(worst)
}

fn scalar_example_law(problem: &Problem) -> Result<f64> {
    let unsupported = |what: &str| Err(Error::Unsupported(format!("scalar example checks need {what}")));
    if problem.mesh.field_dim() != 1 {
        return unsupported("a scalar field");
    }
    if problem.bulk.kind != BulkKind::QuadraticScalar || problem.bulk.element_scale.is_some() {
        return unsupported("the unscaled quadratic bulk density");
    }
    let loads = &problem.loads;
    if loads.stress_offset.is_some() || loads.crack_force_plus.is_some() || loads.crack_force_minus.is_some() {
        return unsupported("no stress offset and no crack-face forces");
    }
    let b = match *problem.law.at(0) {
        CohesiveLaw::Linear { b } => b,
        _ => return unsupported("the linear law phi = b|y|"),
    };
    if b <= 0.0 || (0..problem.mesh.n_interface()).any(|i| *problem.law.at(i) != CohesiveLaw::Linear { b }) {
        return unsupported("a single positive slope b");
    }
    Ok(b)
}

/// Residuals of the equilibrium equations and of the region conditions at (t, u, gamma).
pub fn euler_residuals(problem: &Problem, t: f64, u: &[f64], gamma: &[f64]) -> Result<EulerReport> {
    let mesh = &problem.mesh;
    problem.loads.check_time(t)?;
    mesh.check_field(u, "nodal field")?;
    if gamma.len() != mesh.n_interface() {
        return Err(Error::Dimension {
            what: "internal variable",
            expected: mesh.n_interface(),
            got: gamma.len(),
        });
    }
    let m = mesh.field_dim();
    let r = residual(problem, t, u);
    let tractions = tractions_from(mesh, &r);
    let jumps = crate::geometry::jump(mesh, u)?;
    let regions = classify_regions(&problem.law, &jumps, gamma, m);
    let fixed = mesh.dirichlet_mask();

    let mut on_crack = vec![false; mesh.n_nodes()];
    let mut action_reaction = 0.0_f64;
    for p in mesh.interface_nodes() {
        if p.is_tip() {
            continue;
        }
        on_crack[p.plus] = true;
        on_crack[p.minus] = true;
        if !fixed[p.plus] && !fixed[p.minus] {
            for c in 0..m {
                let s = r[p.plus * m + c] + r[p.minus * m + c];
                action_reaction = action_reaction.max(s.abs() / p.weight);
            }
        }
    }
    let mut interior = 0.0_f64;
    for v in 0..mesh.n_nodes() {
        if !on_crack[v] && !fixed[v] {
            for c in 0..m {
                interior = interior.max(r[v * m + c].abs());
            }
        }
    }

    let (mut cond_a, mut cond_b, mut cond_c) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut nodes = Vec::with_capacity(regions.len());
    for (i, region) in regions.iter().copied().enumerate() {
        let law = problem.law.at(i);
        let y = &jumps[i][..m];
        let mut lambda = None;
        let mut violation = 0.0;
        if let Some(h) = &tractions[i] {
            match region {
                Region::A => {
                    let g = smooth_gradient(law, y);
                    let g2: f64 = g.iter().map(|v| v * v).sum();
                    if g2 > 0.0 {
                        let l = h.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / g2;
                        let off: Vec<f64> = h.iter().zip(&g).map(|(a, b)| a - l * b).collect();
                        let range = (-l).max(l - 1.0).max(0.0) * g2.sqrt();
                        violation = norm(&off).max(range);
                        lambda = Some(l);
                    } else {
                        violation = norm(h);
                    }
                    cond_a = cond_a.max(violation);
                }
                Region::B => {
                    violation = k_violation(law, h)?;
                    cond_b = cond_b.max(violation);
                }
                Region::Other => {
                    violation = norm(h);
                    cond_c = cond_c.max(violation);
                }
                Region::D => {}
            }
        }
        nodes.push(EulerNode {
            index: i,
            region,
            jump: y.to_vec(),
            gamma: gamma[i],
            traction: tractions[i].clone(),
            lambda,
            violation,
        });
    }

    let scalar_example = match scalar_example_law(problem) {
        Ok(b) => {
            let mut rep = ScalarExampleReport {
                b,
                traction_bound_excess: f64::NEG_INFINITY,
                slack_traction: 0.0,
                min_active_product: f64::INFINITY,
            };
            for n in &nodes {
                let Some(h) = &n.traction else { continue };
                let (h, y) = (h[0], n.jump[0]);
                rep.traction_bound_excess = rep.traction_bound_excess.max(h.abs() - b);
                let phi = b * y.abs();
                if phi < n.gamma - REGION_TOL {
                    rep.slack_traction = rep.slack_traction.max(h.abs());
                } else if (phi - n.gamma).abs() <= REGION_TOL {
                    rep.min_active_product = rep.min_active_product.min(h * y);
                }
            }
            Some(rep)
        }
        Err(_) => None,
    };

    Ok(EulerReport {
        t,
        nodes,
        interior_residual: interior,
        action_reaction_residual: action_reaction,
        condition_a: cond_a,
        condition_b: cond_b,
        condition_c: cond_c,
        scalar_example,
    })
}

/// Checks only the scalar example system; rejects other models.
pub fn scalar_example_check(problem: &Problem, t: f64, u: &[f64], gamma: &[f64]) -> Result<ScalarExampleReport> {
    scalar_example_law(problem)?;
    Ok(euler_residuals(problem, t, u, gamma)?
        .scalar_example
        .expect("scalar example applies"))
}

/// Euler reports at the requested trace indices, computed in parallel.
pub fn euler_along(problem: &Problem, trace: &EvolutionTrace, indices: &[usize]) -> Result<Vec<EulerReport>> {
    indices
        .par_iter()
        .map(|&i| {
            let rec = trace.records.get(i).ok_or_else(|| {
                Error::Parameter {
                    field: "euler knots".into(),
                    reason: format!("index {i} beyond the {} recorded knots", trace.records.len()),
                }
            })?;
            euler_residuals(problem, rec.t, &trace.u[i], &trace.gamma[i])
        })
        .collect()
}
