use crate::error::Result;
use crate::geometry::Mesh;
use crate::loads::LoadProgram;
use crate::materials::{BulkModel, LawField};

/// Mesh, bulk density, cohesive law and load program of one simulation.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: Mesh,
    pub bulk: BulkModel,
    pub law: LawField,
    pub loads: LoadProgram,
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        bulk: BulkModel,
        law: impl Into<LawField>,
        loads: LoadProgram,
    ) -> Result<Problem> {
        let law = law.into();
        bulk.validate(&mesh)?;
        law.validate(mesh.n_interface())?;
        loads.validate(&mesh)?;
        Ok(Problem {
            mesh,
            bulk,
            law,
            loads,
        })
    }

    /// phi([u]) at every interface node.
    pub fn phi_of(&self, u: &[f64]) -> Vec<f64> {
        let m = self.mesh.field_dim();
        self.mesh
            .interface_nodes()
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let mut y = [0.0; 2];
                for (c, yc) in y.iter_mut().enumerate().take(m) {
                    *yc = u[q.plus * m + c] - u[q.minus * m + c];
                }
                self.law.at(i).phi_radial(y[0].hypot(y[1]))
            })
            .collect()
    }

    /// Bulk energy minus load work at time t.
    pub(crate) fn smooth_energy(&self, t: f64, u: &[f64]) -> f64 {
        let l = self.loads.covector_unchecked(&self.mesh, t);
        self.bulk.energy(&self.mesh, u) - crate::loads::dot(&l, u)
    }

    /// Largest deviation of u from psi(t) on the Dirichlet dofs.
    pub(crate) fn dirichlet_error(&self, t: f64, u: &[f64]) -> (usize, f64) {
        let psi = self.loads.boundary_value_unchecked(&self.mesh, t);
        let m = self.mesh.field_dim();
        let mut worst = (0, 0.0);
        for &v in self.mesh.dirichlet_nodes() {
            for c in 0..m {
                let d = v * m + c;
                let err = (u[d] - psi[d]).abs();
                if err > worst.1 {
                    worst = (d, err);
                }
            }
        }
        worst
    }
}
