//! Time-dependent boundary deformation and external load functional.
//!
//! Every term is a fixed spatial pattern scaled by a scalar time profile with
//! an analytic derivative. The load functional pairs a field `u` with
//! body forces, a stress offset, surface forces on the Neumann part and
//! forces on both lips of the crack.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::Mesh;

/// Scalar time profile s(t) with derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    Ramp { rate: f64 },
    /// Rises linearly to `peak` at `peak_time`, then descends with the opposite slope.
    Triangle { peak_time: f64, peak: f64 },
    Sinusoid { amplitude: f64, frequency: f64, phase: f64 },
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Ramp { rate } => rate * t,
            Profile::Triangle { peak_time, peak } => {
                if t <= peak_time {
                    peak * t / peak_time
                } else {
                    peak * (2.0 * peak_time - t) / peak_time
                }
            }
            Profile::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (std::f64::consts::TAU * frequency * t + phase).sin(),
        }
    }

    /// Time derivative; at the apex of a triangle the rising branch is used.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { .. } => 0.0,
            Profile::Ramp { rate } => rate,
            Profile::Triangle { peak_time, peak } => {
                if t <= peak_time {
                    peak / peak_time
                } else {
                    -peak / peak_time
                }
            }
            Profile::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                let w = std::f64::consts::TAU * frequency;
                amplitude * w * (w * t + phase).cos()
            }
        }
    }

    /// Lipschitz constant of the profile on [0, horizon].
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Profile::Constant { .. } => 0.0,
            Profile::Ramp { rate } => rate.abs(),
            Profile::Triangle { peak_time, peak } => (peak / peak_time).abs(),
            Profile::Sinusoid {
                amplitude,
                frequency,
                ..
            } => (amplitude * std::f64::consts::TAU * frequency).abs(),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let ok = match *self {
            Profile::Constant { value } => value.is_finite(),
            Profile::Ramp { rate } => rate.is_finite(),
            Profile::Triangle { peak_time, peak } => peak_time > 0.0 && peak.is_finite(),
            Profile::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(param(format!("{field}.profile"), format!("invalid parameters {self:?}")))
        }
    }
}

/// Spatial pattern of the boundary deformation, defined at every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundaryShape {
    /// value_c(x) = constant_c + sum_j gradient_cj x_j
    Affine {
        #[serde(default)]
        constant: [f64; 2],
        #[serde(default)]
        gradient: [[f64; 2]; 2],
    },
    Nodal { values: Vec<f64> },
}

impl BoundaryShape {
    fn evaluate(&self, mesh: &Mesh) -> Vec<f64> {
        match self {
            BoundaryShape::Affine { constant, gradient } => {
                let m = mesh.field_dim();
                let mut out = Vec::with_capacity(mesh.n_dofs());
                for x in mesh.coords() {
                    for c in 0..m {
                        out.push(constant[c] + gradient[c][0] * x[0] + gradient[c][1] * x[1]);
                    }
                }
                out
            }
            BoundaryShape::Nodal { values } => values.clone(),
        }
    }
}

/// A quantity that is either uniform or given per item (element, facet or interface node).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PieceField<T> {
    Uniform(T),
    PerItem(Vec<T>),
}

impl<T> PieceField<T> {
    pub fn at(&self, i: usize) -> &T {
        match self {
            PieceField::Uniform(v) => v,
            PieceField::PerItem(v) => &v[i],
        }
    }

    fn check_len(&self, n: usize, what: &'static str) -> Result<()> {
        match self {
            PieceField::PerItem(v) if v.len() != n => Err(Error::Dimension {
                what,
                expected: n,
                got: v.len(),
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term<T> {
    pub profile: Profile,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadProgram {
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Term<BoundaryShape>>,
    /// f, force per volume, per element
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_force: Option<Term<PieceField<[f64; 2]>>>,
    /// H, paired with the gradient, per element
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stress_offset: Option<Term<PieceField<[[f64; 2]; 2]>>>,
    /// g on the Neumann part, per facet
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_force: Option<Term<PieceField<[f64; 2]>>>,
    /// force on the positive lip, per interface node
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crack_force_plus: Option<Term<PieceField<[f64; 2]>>>,
    /// force on the negative lip, per interface node
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crack_force_minus: Option<Term<PieceField<[f64; 2]>>>,
}

#[derive(Clone, Copy)]
enum Eval {
    Value,
    Rate,
}

fn scale<T>(term: &Option<Term<T>>, t: f64, eval: Eval) -> Option<(f64, &T)> {
    term.as_ref().map(|tm| {
        let s = match eval {
            Eval::Value => tm.profile.value(t),
            Eval::Rate => tm.profile.rate(t),
        };
        (s, &tm.value)
    })
}

impl LoadProgram {
    /// No boundary deformation and no loads on [0, horizon].
    pub fn zero(horizon: f64) -> Self {
        LoadProgram {
            horizon,
            boundary: None,
            body_force: None,
            stress_offset: None,
            surface_force: None,
            crack_force_plus: None,
            crack_force_minus: None,
        }
    }

    /// Boundary deformation `profile(t) * shape`, no loads.
    pub fn displacement(horizon: f64, profile: Profile, shape: BoundaryShape) -> Self {
        LoadProgram {
            boundary: Some(Term {
                profile,
                value: shape,
            }),
            ..LoadProgram::zero(horizon)
        }
    }

    /// True when the load functional vanishes identically (pure displacement control).
    pub fn has_no_loads(&self) -> bool {
        self.body_force.is_none()
            && self.stress_offset.is_none()
            && self.surface_force.is_none()
            && self.crack_force_plus.is_none()
            && self.crack_force_minus.is_none()
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(param("loads.horizon", format!("must be > 0, got {}", self.horizon)));
        }
        if let Some(b) = &self.boundary {
            b.profile.validate("loads.boundary")?;
            if let BoundaryShape::Nodal { values } = &b.value {
                if values.len() != mesh.n_dofs() {
                    return Err(Error::Dimension {
                        what: "boundary deformation",
                        expected: mesh.n_dofs(),
                        got: values.len(),
                    });
                }
                let m = mesh.field_dim();
                for q in mesh.interface_nodes() {
                    for c in 0..m {
                        if values[q.plus * m + c] != values[q.minus * m + c] {
                            return Err(param(
                                "loads.boundary.values",
                                format!("twins {}/{} differ: the deformation must not jump", q.plus, q.minus),
                            ));
                        }
                    }
                }
            }
        }
        let ne = mesh.n_elements();
        let nf = mesh.neumann_facets().len();
        let ni = mesh.n_interface();
        if let Some(tm) = &self.body_force {
            tm.profile.validate("loads.body_force")?;
            tm.value.check_len(ne, "body force per element")?;
        }
        if let Some(tm) = &self.stress_offset {
            tm.profile.validate("loads.stress_offset")?;
            tm.value.check_len(ne, "stress offset per element")?;
        }
        if let Some(tm) = &self.surface_force {
            tm.profile.validate("loads.surface_force")?;
            tm.value.check_len(nf, "surface force per facet")?;
        }
        for (name, tm) in [
            ("loads.crack_force_plus", &self.crack_force_plus),
            ("loads.crack_force_minus", &self.crack_force_minus),
        ] {
            if let Some(tm) = tm {
                tm.profile.validate(name)?;
                tm.value.check_len(ni, "crack force per interface node")?;
            }
        }
        Ok(())
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    fn boundary_eval(&self, mesh: &Mesh, t: f64, eval: Eval) -> Vec<f64> {
        match scale(&self.boundary, t, eval) {
            Some((s, shape)) => {
                let mut v = shape.evaluate(mesh);
                v.iter_mut().for_each(|x| *x *= s);
                v
            }
            None => vec![0.0; mesh.n_dofs()],
        }
    }

    fn apply(&self, mesh: &Mesh, t: f64, u: &[f64], eval: Eval) -> f64 {
        let m = mesh.field_dim();
        let dim = mesh.dim();
        let mut total = 0.0;
        if let Some((s, f)) = scale(&self.body_force, t, eval) {
            for (e, nodes) in mesh.elements().iter().enumerate() {
                let fe = f.at(e);
                let k = nodes.len() as f64;
                let mut acc = 0.0;
                for &v in nodes {
                    for c in 0..m {
                        acc += fe[c] * u[v * m + c];
                    }
                }
                total += s * mesh.element_volume(e) * acc / k;
            }
        }
        if let Some((s, h)) = scale(&self.stress_offset, t, eval) {
            for e in 0..mesh.n_elements() {
                let he = h.at(e);
                let xi = mesh.element_gradient(e, u);
                let mut acc = 0.0;
                for c in 0..m {
                    for j in 0..dim {
                        acc += he[c][j] * xi[c][j];
                    }
                }
                total += s * mesh.element_volume(e) * acc;
            }
        }
        if let Some((s, g)) = scale(&self.surface_force, t, eval) {
            for (i, facet) in mesh.neumann_facets().iter().enumerate() {
                let gi = g.at(i);
                let k = facet.nodes.len() as f64;
                let mut acc = 0.0;
                for &v in &facet.nodes {
                    for c in 0..m {
                        acc += gi[c] * u[v * m + c];
                    }
                }
                total += s * facet.weight * acc / k;
            }
        }
        for (term, plus) in [(&self.crack_force_plus, true), (&self.crack_force_minus, false)] {
            if let Some((s, g)) = scale(term, t, eval) {
                for (i, q) in mesh.interface_nodes().iter().enumerate() {
                    let node = if plus { q.plus } else { q.minus };
                    let gi = g.at(i);
                    let acc: f64 = (0..m).map(|c| gi[c] * u[node * m + c]).sum();
                    total += s * q.weight * acc;
                }
            }
        }
        total
    }

    fn covector(&self, mesh: &Mesh, t: f64, eval: Eval) -> Vec<f64> {
        let m = mesh.field_dim();
        let dim = mesh.dim();
        let mut out = vec![0.0; mesh.n_dofs()];
        if let Some((s, f)) = scale(&self.body_force, t, eval) {
            for (e, nodes) in mesh.elements().iter().enumerate() {
                let fe = f.at(e);
                let share = s * mesh.element_volume(e) / nodes.len() as f64;
                for &v in nodes {
                    for c in 0..m {
                        out[v * m + c] += share * fe[c];
                    }
                }
            }
        }
        if let Some((s, h)) = scale(&self.stress_offset, t, eval) {
            for (e, nodes) in mesh.elements().iter().enumerate() {
                let he = h.at(e);
                let grads = mesh.element_shape_gradients(e);
                let vol = s * mesh.element_volume(e);
                for (a, &v) in nodes.iter().enumerate() {
                    for c in 0..m {
                        let acc: f64 = (0..dim).map(|j| he[c][j] * grads[a][j]).sum();
                        out[v * m + c] += vol * acc;
                    }
                }
            }
        }
        if let Some((s, g)) = scale(&self.surface_force, t, eval) {
            for (i, facet) in mesh.neumann_facets().iter().enumerate() {
                let gi = g.at(i);
                let share = s * facet.weight / facet.nodes.len() as f64;
                for &v in &facet.nodes {
                    for c in 0..m {
                        out[v * m + c] += share * gi[c];
                    }
                }
            }
        }
        for (term, plus) in [(&self.crack_force_plus, true), (&self.crack_force_minus, false)] {
            if let Some((s, g)) = scale(term, t, eval) {
                for (i, q) in mesh.interface_nodes().iter().enumerate() {
                    let node = if plus { q.plus } else { q.minus };
                    let gi = g.at(i);
                    for c in 0..m {
                        out[node * m + c] += s * q.weight * gi[c];
                    }
                }
            }
        }
        out
    }

    pub(crate) fn boundary_value_unchecked(&self, mesh: &Mesh, t: f64) -> Vec<f64> {
        self.boundary_eval(mesh, t, Eval::Value)
    }

    pub(crate) fn boundary_rate_unchecked(&self, mesh: &Mesh, t: f64) -> Vec<f64> {
        self.boundary_eval(mesh, t, Eval::Rate)
    }

    pub(crate) fn covector_unchecked(&self, mesh: &Mesh, t: f64) -> Vec<f64> {
        self.covector(mesh, t, Eval::Value)
    }

    pub(crate) fn rate_covector_unchecked(&self, mesh: &Mesh, t: f64) -> Vec<f64> {
        self.covector(mesh, t, Eval::Rate)
    }
}

/// psi(t) at every node; twins receive identical values.
pub fn boundary_value(prog: &LoadProgram, mesh: &Mesh, t: f64) -> Result<Vec<f64>> {
    prog.check_time(t)?;
    Ok(prog.boundary_eval(mesh, t, Eval::Value))
}

/// d/dt psi(t) at every node.
pub fn boundary_rate(prog: &LoadProgram, mesh: &Mesh, t: f64) -> Result<Vec<f64>> {
    prog.check_time(t)?;
    Ok(prog.boundary_eval(mesh, t, Eval::Rate))
}

/// <L(t), u> by direct quadrature of the four load terms.
pub fn load_apply(prog: &LoadProgram, mesh: &Mesh, t: f64, u: &[f64]) -> Result<f64> {
    prog.check_time(t)?;
    mesh.check_field(u, "nodal field")?;
    Ok(prog.apply(mesh, t, u, Eval::Value))
}

/// <dL/dt(t), u>.
pub fn load_rate_apply(prog: &LoadProgram, mesh: &Mesh, t: f64, u: &[f64]) -> Result<f64> {
    prog.check_time(t)?;
    mesh.check_field(u, "nodal field")?;
    Ok(prog.apply(mesh, t, u, Eval::Rate))
}

/// The assembled covector l with <l, u> = <L(t), u>.
pub fn load_covector(prog: &LoadProgram, mesh: &Mesh, t: f64) -> Result<Vec<f64>> {
    prog.check_time(t)?;
    Ok(prog.covector(mesh, t, Eval::Value))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_rod_mesh, build_rect_mesh_with_crack, Side};

    fn ramp_rod() -> (Mesh, LoadProgram) {
        let mesh = build_rod_mesh(2.0, 4, 1.0).unwrap();
        let prog = LoadProgram::displacement(
            1.0,
            Profile::Ramp { rate: 1.0 },
            BoundaryShape::Affine {
                constant: [0.0; 2],
                gradient: [[0.5, 0.0], [0.0, 0.0]],
            },
        );
        (mesh, prog)
    }

    #[test]
    fn ramp_rate_is_constant() {
        let (mesh, prog) = ramp_rod();
        let r0 = boundary_rate(&prog, &mesh, 0.1).unwrap();
        let r1 = boundary_rate(&prog, &mesh, 0.9).unwrap();
        assert_eq!(r0, r1);
        assert_eq!(*r0.last().unwrap(), 1.0);
        assert!(boundary_value(&prog, &mesh, 0.0).unwrap().iter().all(|v| *v == 0.0));
        assert!(boundary_value(&prog, &mesh, 1.5).is_err());
    }

    #[test]
    fn triangle_apex_uses_rising_branch() {
        let p = Profile::Triangle {
            peak_time: 1.0,
            peak: 2.0,
        };
        assert_eq!(p.rate(1.0), 2.0);
        assert_eq!(p.rate(1.0 + 1e-12), -2.0);
        assert_eq!(p.value(2.0), 0.0);
    }

    #[test]
    fn twins_share_boundary_values() {
        let (mesh, prog) = ramp_rod();
        let v = boundary_value(&prog, &mesh, 0.7).unwrap();
        let q = mesh.interface_nodes()[0];
        assert_eq!(v[q.plus], v[q.minus]);
    }

    #[test]
    fn zero_loads_vanish() {
        let (mesh, prog) = ramp_rod();
        let u: Vec<f64> = (0..mesh.n_dofs()).map(|i| i as f64).collect();
        assert_eq!(load_apply(&prog, &mesh, 0.5, &u).unwrap(), 0.0);
        assert!(load_covector(&prog, &mesh, 0.5).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_body_force_on_unit_volume() {
        let mesh = build_rod_mesh(1.0, 4, 0.5).unwrap();
        let prog = LoadProgram {
            body_force: Some(Term {
                profile: Profile::Constant { value: 1.0 },
                value: PieceField::Uniform([1.0, 0.0]),
            }),
            ..LoadProgram::zero(1.0)
        };
        let u = vec![1.0; mesh.n_dofs()];
        assert!((load_apply(&prog, &mesh, 0.3, &u).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn positive_lip_force_on_unit_crack() {
        let mesh =
            build_rect_mesh_with_crack(4.0, 4.0, 8, 8, (0.0, 1.0), &[Side::Bottom, Side::Top])
                .unwrap();
        let prog = LoadProgram {
            crack_force_plus: Some(Term {
                profile: Profile::Constant { value: 1.0 },
                value: PieceField::Uniform([1.0, 0.0]),
            }),
            ..LoadProgram::zero(1.0)
        };
        // u = 2 on every node carrying a positive-lip value (tips included)
        let mut u = vec![0.0; mesh.n_dofs()];
        for q in mesh.interface_nodes() {
            u[q.plus] = 2.0;
        }
        assert!((load_apply(&prog, &mesh, 0.0, &u).unwrap() - 2.0).abs() < 1e-14);
    }
}
