//! Exact elimination of every unknown except the jumps, for quadratic bulk energies.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{active_pairs, node_cost, Mode, Pair, PairKind};
use crate::error::{Error, Result};
use crate::materials::cohesive::{prox_radial, prox_vector, NodeCost};
use crate::materials::{CohesiveLaw, LawField};
use crate::problem::Problem;

/// Dense stiffness matrix K with W(u) = u^T K u / 2 (quadratic models only).
pub(crate) fn assemble_dense_stiffness(problem: &Problem) -> DMatrix<f64> {
    let mesh = &problem.mesh;
    let bulk = &problem.bulk;
    let (m, dim) = (mesh.field_dim(), mesh.dim());
    let n = mesh.n_dofs();
    let mut k = DMatrix::zeros(n, n);
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let grads = mesh.element_shape_gradients(e);
        let f = mesh.element_volume(e) * bulk.scale(e);
        for (a, &va) in nodes.iter().enumerate() {
            for ca in 0..m {
                let mut xi = [[0.0; 2]; 2];
                xi[ca][..dim].copy_from_slice(&grads[a][..dim]);
                let s = bulk.stress(&xi, dim);
                for (b, &vb) in nodes.iter().enumerate() {
                    for cb in 0..m {
                        let acc: f64 = (0..dim).map(|j| s[cb][j] * grads[b][j]).sum();
                        k[(vb * m + cb, va * m + ca)] += f * acc;
                    }
                }
            }
        }
    }
    k
}

struct Shared {
    n_dofs: usize,
    m: usize,
    n_delta: usize,
    pairs: Vec<Pair>,
    /// all interface weights, for ||gamma||_1
    interface_weights: Vec<f64>,
    /// u = u_c + P z with z = [delta; y]
    p: DMatrix<f64>,
    /// u_c[d] = psi[const_src[d]]
    const_src: Vec<Option<usize>>,
    k: DMatrix<f64>,
    k_dy: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    /// K_yy^-1 K_y,delta
    x: DMatrix<f64>,
    s: DMatrix<f64>,
}

/// Time-independent part of the reduction; `reduce` produces the problem at a given time.
#[derive(Clone)]
pub struct SchurSolver {
    shared: Arc<Shared>,
}

impl SchurSolver {
    pub fn new(problem: &Problem) -> Result<SchurSolver> {
        if !problem.bulk.is_quadratic() {
            return Err(Error::Unsupported(
                "the Schur reduction needs a quadratic bulk energy".into(),
            ));
        }
        let mesh = &problem.mesh;
        let m = mesh.field_dim();
        let n = mesh.n_dofs();
        let mask = mesh.dirichlet_mask();
        let pairs = active_pairs(mesh);
        let n_delta = pairs.len() * m;

        let mut const_src: Vec<Option<usize>> = (0..n).map(|d| mask[d].then_some(d)).collect();
        // column entries of P per dof: (variable, coefficient)
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut claimed = vec![false; n];
        let mut n_y = 0;
        for (k, p) in pairs.iter().enumerate() {
            for c in 0..m {
                let (dp, dq, dv) = (p.plus * m + c, p.minus * m + c, k * m + c);
                claimed[dp] = true;
                claimed[dq] = true;
                match p.kind {
                    PairKind::Free => {
                        let mid = n_delta + n_y;
                        n_y += 1;
                        cols[dp] = vec![(mid, 1.0), (dv, 0.5)];
                        cols[dq] = vec![(mid, 1.0), (dv, -0.5)];
                    }
                    PairKind::MinusFixed => {
                        cols[dp] = vec![(dv, 1.0)];
                        const_src[dp] = Some(dq);
                    }
                    PairKind::PlusFixed => {
                        cols[dq] = vec![(dv, -1.0)];
                        const_src[dq] = Some(dp);
                    }
                }
            }
        }
        for d in 0..n {
            if !mask[d] && !claimed[d] {
                cols[d] = vec![(n_delta + n_y, 1.0)];
                n_y += 1;
            }
        }
        let nz = n_delta + n_y;
        let mut p = DMatrix::zeros(n, nz);
        for (d, entries) in cols.iter().enumerate() {
            for &(v, c) in entries {
                p[(d, v)] = c;
            }
        }
        let k = assemble_dense_stiffness(problem);
        let kp = &k * &p;
        let kk = p.transpose() * kp;
        let k_dd = kk.view((0, 0), (n_delta, n_delta)).into_owned();
        let k_dy = kk.view((0, n_delta), (n_delta, n_y)).into_owned();
        let k_yy = kk.view((n_delta, n_delta), (n_y, n_y)).into_owned();
        let (chol, x, s) = if n_y > 0 {
            let chol = Cholesky::new(k_yy).ok_or_else(|| {
                Error::Linalg("stiffness of the non-jump unknowns is not positive definite".into())
            })?;
            let x = chol.solve(&k_dy.transpose());
            let s = &k_dd - &k_dy * &x;
            (Some(chol), x, s)
        } else {
            (None, DMatrix::zeros(0, n_delta), k_dd)
        };
        let s = 0.5 * (&s + s.transpose());
        Ok(SchurSolver {
            shared: Arc::new(Shared {
                n_dofs: n,
                m,
                n_delta,
                pairs,
                interface_weights: mesh.interface_nodes().iter().map(|q| q.weight).collect(),
                p,
                const_src,
                k,
                k_dy,
                chol,
                x,
                s,
            }),
        })
    }

    /// Jump unknowns of a full field, in the ordering of the reduced problem.
    pub fn jumps_of(&self, u: &[f64]) -> DVector<f64> {
        let sh = &self.shared;
        let m = sh.m;
        DVector::from_iterator(
            sh.n_delta,
            sh.pairs
                .iter()
                .flat_map(|p| (0..m).map(move |c| u[p.plus * m + c] - u[p.minus * m + c])),
        )
    }

    pub fn reduce(&self, problem: &Problem, t: f64) -> Result<ReducedProblem> {
        problem.loads.check_time(t)?;
        let sh = &self.shared;
        let psi = problem.loads.boundary_value_unchecked(&problem.mesh, t);
        let ell = problem.loads.covector_unchecked(&problem.mesh, t);
        let u_c = DVector::from_iterator(
            sh.n_dofs,
            sh.const_src.iter().map(|s| s.map_or(0.0, |d| psi[d])),
        );
        let ell = DVector::from_vec(ell);
        let ku = &sh.k * &u_c;
        let c0 = 0.5 * u_c.dot(&ku) - ell.dot(&u_c);
        let f = sh.p.transpose() * (&ell - &ku);
        let f_d = f.rows(0, sh.n_delta).into_owned();
        let f_y = f.rows(sh.n_delta, f.len() - sh.n_delta).into_owned();
        let (g, constant, r) = match &sh.chol {
            Some(chol) => {
                let g = chol.solve(&f_y);
                let r = &f_d - &sh.k_dy * &g;
                let constant = c0 - 0.5 * f_y.dot(&g);
                (g, constant, r)
            }
            None => (DVector::zeros(0), c0, f_d),
        };
        Ok(ReducedProblem {
            s: sh.s.clone(),
            r,
            constant,
            shared: self.shared.clone(),
            u_c,
            g,
        })
    }
}

/// 0.5 d^T S d - r^T d + constant + sum_e w_e (phi(d_e) - gamma_e)^+ + ||gamma||_1.
pub struct ReducedProblem {
    pub s: DMatrix<f64>,
    pub r: DVector<f64>,
    pub constant: f64,
    shared: Arc<Shared>,
    u_c: DVector<f64>,
    g: DVector<f64>,
}

impl ReducedProblem {
    pub fn n_jumps(&self) -> usize {
        self.shared.n_delta
    }

    /// Interface node index of every reduced pair (m unknowns each).
    pub fn pair_indices(&self) -> Vec<usize> {
        self.shared.pairs.iter().map(|p| p.index).collect()
    }

    pub fn objective(&self, law: &LawField, gamma: &[f64], delta: &DVector<f64>) -> f64 {
        let sh = &self.shared;
        let quad = 0.5 * delta.dot(&(&self.s * delta)) - self.r.dot(delta) + self.constant;
        let m = sh.m;
        let crack: f64 = sh
            .pairs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let r = delta.rows(k * m, m).norm();
                p.weight * NodeCost::Law(law.at(p.index)).excess(r, gamma[p.index])
            })
            .sum();
        let g1: f64 = sh.interface_weights.iter().zip(gamma).map(|(w, g)| w * g).sum();
        quad + crack + g1
    }

    /// Full field minimizing the smooth energy for the given jumps.
    pub fn recover(&self, delta: &DVector<f64>) -> Vec<f64> {
        let sh = &self.shared;
        let y = &self.g - &sh.x * delta;
        let mut z = DVector::zeros(sh.p.ncols());
        z.rows_mut(0, sh.n_delta).copy_from(delta);
        z.rows_mut(sh.n_delta, y.len()).copy_from(&y);
        (&self.u_c + &sh.p * z).as_slice().to_vec()
    }

    /// Cyclic block coordinate descent; exact per-block minimization when m = 1.
    /// Returns (jumps, gradient-mapping residual, sweeps, converged).
    pub(crate) fn coordinate_descent(
        &self,
        law: &LawField,
        gamma: &[f64],
        mode: Mode,
        mut delta: DVector<f64>,
        budget: usize,
        tol: f64,
    ) -> (DVector<f64>, f64, usize, bool) {
        let sh = &self.shared;
        let m = sh.m;
        let nd = sh.n_delta;
        if nd == 0 {
            return (delta, 0.0, 0, true);
        }
        let block_lip: Vec<f64> = (0..sh.pairs.len())
            .map(|k| {
                let i = k * m;
                if m == 1 {
                    self.s[(i, i)]
                } else {
                    let (a, b, d) = (self.s[(i, i)], self.s[(i, i + 1)], self.s[(i + 1, i + 1)]);
                    0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt()
                }
            })
            .collect();
        let global_lip = self.s.clone().symmetric_eigenvalues().max().max(f64::MIN_POSITIVE);
        let scale = 1.0 + self.r.norm();
        let mut grad = &self.s * &delta - &self.r;
        let mut y0 = [0.0; 2];
        let mut out = [0.0; 2];
        let mut residual = f64::INFINITY;
        for sweep in 1..=budget {
            for (k, p) in sh.pairs.iter().enumerate() {
                let i = k * m;
                let lk = block_lip[k];
                for c in 0..m {
                    y0[c] = delta[i + c] - grad[i + c] / lk;
                }
                let cost = node_cost(mode, law.at(p.index));
                prox_vector(cost, &y0[..m], gamma[p.index], lk, p.weight, &mut out[..m]);
                for c in 0..m {
                    let change = out[c] - delta[i + c];
                    if change != 0.0 {
                        grad.axpy(change, &self.s.column(i + c), 1.0);
                        delta[i + c] = out[c];
                    }
                }
            }
            // gradient mapping with the global step
            let mut acc = 0.0;
            for (k, p) in sh.pairs.iter().enumerate() {
                let i = k * m;
                for c in 0..m {
                    y0[c] = delta[i + c] - grad[i + c] / global_lip;
                }
                let cost = node_cost(mode, law.at(p.index));
                prox_vector(cost, &y0[..m], gamma[p.index], global_lip, p.weight, &mut out[..m]);
                for c in 0..m {
                    acc += (out[c] - delta[i + c]).powi(2);
                }
            }
            residual = global_lip * acc.sqrt();
            if residual <= tol * scale {
                return (delta, residual, sweep, true);
            }
        }
        (delta, residual, budget, false)
    }
}

/// Reduction of the incremental problem at time t to the jump unknowns.
pub fn schur_reduce(problem: &Problem, t: f64) -> Result<ReducedProblem> {
    SchurSolver::new(problem)?.reduce(problem, t)
}

/// Global minimizer of 0.5 s d^2 - r d + w (phi(d) - gamma)^+ for a single scalar jump,
/// by comparison of the closed state, the dead-zone boundary and the open branch.
/// Ties select the closed state.
pub fn griffith_global_1d(s: f64, r: f64, law: &CohesiveLaw, gamma: f64, w: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(crate::error::param("s", format!("must be > 0, got {s}")));
    }
    law.validate()?;
    let y0 = r / s;
    let rad = prox_radial(NodeCost::Law(law), y0.abs(), gamma, s, w);
    Ok(rad.copysign(y0))
}
