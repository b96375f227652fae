//! Bulk stored-energy densities and their assembled energy and gradient.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::{Grad, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BulkKind {
    /// W(xi) = |xi|^2 / 2
    QuadraticScalar,
    /// W(xi) = |xi|^p / p
    PPower { p: f64 },
    /// A E:E with A E = 2 mu E + lambda tr(E) I, E the symmetric gradient
    LinearElasticity { lambda: f64, mu: f64 },
}

/// Bulk density with an optional piecewise-constant per-element multiplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkModel {
    pub kind: BulkKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_scale: Option<Vec<f64>>,
}

impl From<BulkKind> for BulkModel {
    fn from(kind: BulkKind) -> Self {
        BulkModel {
            kind,
            element_scale: None,
        }
    }
}

impl BulkModel {
    pub fn quadratic() -> Self {
        BulkKind::QuadraticScalar.into()
    }

    pub fn p_power(p: f64) -> Self {
        BulkKind::PPower { p }.into()
    }

    pub fn linear_elasticity(lambda: f64, mu: f64) -> Self {
        BulkKind::LinearElasticity { lambda, mu }.into()
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        match self.kind {
            BulkKind::QuadraticScalar => {}
            BulkKind::PPower { p } => {
                if !(p.is_finite() && p > 1.0) {
                    return Err(param("bulk.p", format!("must be > 1, got {p}")));
                }
            }
            BulkKind::LinearElasticity { lambda, mu } => {
                if !(mu > 0.0) {
                    return Err(param("bulk.mu", format!("must be > 0, got {mu}")));
                }
                let n = mesh.dim() as f64;
                if !(2.0 * mu + n * lambda > 0.0) {
                    return Err(param(
                        "bulk.lambda",
                        format!("2 mu + n lambda must be > 0, got lambda = {lambda}"),
                    ));
                }
                if mesh.field_dim() != mesh.dim() {
                    return Err(Error::Unsupported(format!(
                        "linear elasticity needs field dimension {} (got {})",
                        mesh.dim(),
                        mesh.field_dim()
                    )));
                }
            }
        }
        if let Some(s) = &self.element_scale {
            if s.len() != mesh.n_elements() {
                return Err(Error::Dimension {
                    what: "bulk element scale",
                    expected: mesh.n_elements(),
                    got: s.len(),
                });
            }
            if let Some(bad) = s.iter().find(|v| !(**v > 0.0)) {
                return Err(param("bulk.element_scale", format!("entries must be > 0, got {bad}")));
            }
        }
        Ok(())
    }

    pub fn growth_exponent(&self) -> f64 {
        match self.kind {
            BulkKind::PPower { p } => p,
            _ => 2.0,
        }
    }

    /// The energy is a quadratic form in the gradient, so the assembled gradient is linear.
    pub fn is_quadratic(&self) -> bool {
        match self.kind {
            BulkKind::PPower { p } => p == 2.0,
            _ => true,
        }
    }

    /// Lower and upper growth constants (a0, a1) of the density, i.e.
    /// a0 |xi|^p <= W(xi) <= a1 |xi|^p (on symmetric xi for elasticity).
    pub fn growth_constants(&self, dim: usize) -> (f64, f64) {
        match self.kind {
            BulkKind::QuadraticScalar => (0.5, 0.5),
            BulkKind::PPower { p } => (1.0 / p, 1.0 / p),
            BulkKind::LinearElasticity { lambda, mu } => {
                let sph = 2.0 * mu + dim as f64 * lambda;
                ((2.0 * mu).min(sph), (2.0 * mu).max(sph))
            }
        }
    }

    pub(crate) fn scale(&self, e: usize) -> f64 {
        self.element_scale.as_ref().map_or(1.0, |s| s[e])
    }

    /// Density at a gradient `xi` (m x n, row-major).
    pub fn density(&self, xi: &Grad, dim: usize) -> f64 {
        match self.kind {
            BulkKind::QuadraticScalar => 0.5 * frob2(xi),
            BulkKind::PPower { p } => frob2(xi).sqrt().powf(p) / p,
            BulkKind::LinearElasticity { lambda, mu } => {
                let (e, tr) = sym(xi, dim);
                2.0 * mu * frob2(&e) + lambda * tr * tr
            }
        }
    }

    /// Derivative of the density with respect to `xi`.
    pub fn stress(&self, xi: &Grad, dim: usize) -> Grad {
        match self.kind {
            BulkKind::QuadraticScalar => *xi,
            BulkKind::PPower { p } => {
                let n = frob2(xi).sqrt();
                let s = if n > 0.0 { n.powf(p - 2.0) } else { 0.0 };
                xi.map(|row| row.map(|v| s * v))
            }
            BulkKind::LinearElasticity { lambda, mu } => {
                let (e, tr) = sym(xi, dim);
                let mut out = [[0.0; 2]; 2];
                for i in 0..dim {
                    for j in 0..dim {
                        out[i][j] = 4.0 * mu * e[i][j];
                    }
                    out[i][i] += 2.0 * lambda * tr;
                }
                out
            }
        }
    }

    /// Total bulk energy of a nodal field.
    pub fn energy(&self, mesh: &Mesh, u: &[f64]) -> f64 {
        (0..mesh.n_elements())
            .map(|e| {
                let xi = mesh.element_gradient(e, u);
                mesh.element_volume(e) * self.scale(e) * self.density(&xi, mesh.dim())
            })
            .sum()
    }

    /// Assembled gradient <dW(grad u), grad v> as a nodal covector, written into `out`.
    pub fn gradient_into(&self, mesh: &Mesh, u: &[f64], out: &mut [f64]) {
        self.energy_gradient_into(mesh, u, out);
    }

    /// Energy and assembled gradient in one pass over the elements.
    pub fn energy_gradient_into(&self, mesh: &Mesh, u: &[f64], out: &mut [f64]) -> f64 {
        out.iter_mut().for_each(|v| *v = 0.0);
        let m = mesh.field_dim();
        let dim = mesh.dim();
        let mut energy = 0.0;
        for e in 0..mesh.n_elements() {
            let xi = mesh.element_gradient(e, u);
            let s = self.stress(&xi, dim);
            let f = mesh.element_volume(e) * self.scale(e);
            energy += f * self.density(&xi, dim);
            let grads = mesh.element_shape_gradients(e);
            for (a, &v) in mesh.elements()[e].iter().enumerate() {
                for c in 0..m {
                    let mut acc = 0.0;
                    for j in 0..dim {
                        acc += s[c][j] * grads[a][j];
                    }
                    out[v * m + c] += f * acc;
                }
            }
        }
        energy
    }

    pub fn gradient(&self, mesh: &Mesh, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.gradient_into(mesh, u, &mut out);
        out
    }
}

fn frob2(xi: &Grad) -> f64 {
    xi.iter().flatten().map(|v| v * v).sum()
}

fn sym(xi: &Grad, dim: usize) -> (Grad, f64) {
    let mut e = [[0.0; 2]; 2];
    let mut tr = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            e[i][j] = 0.5 * (xi[i][j] + xi[j][i]);
        }
        tr += xi[i][i];
    }
    (e, tr)
}

pub fn bulk_energy(model: &BulkModel, mesh: &Mesh, u: &[f64]) -> Result<f64> {
    mesh.check_field(u, "nodal field")?;
    Ok(model.energy(mesh, u))
}

pub fn bulk_gradient(model: &BulkModel, mesh: &Mesh, u: &[f64]) -> Result<Vec<f64>> {
    mesh.check_field(u, "nodal field")?;
    Ok(model.gradient(mesh, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_rod_mesh;

    fn affine_rod(mesh: &Mesh, slope: f64) -> Vec<f64> {
        mesh.coords().iter().map(|c| slope * c[0]).collect()
    }

    #[test]
    fn zero_field() {
        let mesh = build_rod_mesh(1.0, 4, 0.5).unwrap();
        let u = vec![0.0; mesh.n_dofs()];
        let m = BulkModel::quadratic();
        assert_eq!(bulk_energy(&m, &mesh, &u).unwrap(), 0.0);
        assert!(bulk_gradient(&m, &mesh, &u).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn unit_rod_energies() {
        let mesh = build_rod_mesh(1.0, 4, 0.5).unwrap();
        let e = bulk_energy(&BulkModel::quadratic(), &mesh, &affine_rod(&mesh, 1.0)).unwrap();
        assert!((e - 0.5).abs() < 1e-14);
        let e = bulk_energy(&BulkModel::p_power(4.0), &mesh, &affine_rod(&mesh, 2.0)).unwrap();
        assert!((e - 4.0).abs() < 1e-13);
    }

    #[test]
    fn dimension_mismatch() {
        let mesh = build_rod_mesh(1.0, 4, 0.5).unwrap();
        assert!(bulk_energy(&BulkModel::quadratic(), &mesh, &[0.0; 3]).is_err());
    }

    #[test]
    fn elasticity_constants() {
        let m = BulkModel::linear_elasticity(1.0, 1.0);
        assert_eq!(m.growth_constants(2), (2.0, 4.0));
        let m = BulkModel::linear_elasticity(-0.5, 1.0);
        assert_eq!(m.growth_constants(2), (1.0, 2.0));
    }

    #[test]
    fn elasticity_rejects_scalar_field() {
        let mesh = build_rod_mesh(1.0, 4, 0.5).unwrap();
        assert!(BulkModel::linear_elasticity(1.0, 1.0).validate(&mesh).is_ok());
        let mesh2 = mesh.with_field_dim(2).unwrap();
        assert!(BulkModel::linear_elasticity(1.0, 1.0).validate(&mesh2).is_err());
    }
}
