//! Cohesive surface densities and the proximal map of the increment cost.
//!
//! Every shipped law is radial, `phi(y) = phi0 + phi_s(|y|)` for `y != 0` and
//! `phi(0) = 0`, with `phi_s` nondecreasing, `phi_s(0) = 0` and
//! `|phi_s'| <= b`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Relative tolerance under which two candidate objective values count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CohesiveLaw {
    /// phi(y) = b|y|
    Linear { b: f64 },
    /// phi(y) = a + b|y| for y != 0
    Griffith { a: f64, b: f64 },
    /// phi(y) = phi0 + c (1 - exp(-b|y|/c)) for y != 0
    SmoothSaturating { phi0: f64, b: f64, c: f64 },
}

impl CohesiveLaw {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(param(format!("law.{name}"), format!("must be finite and >= 0, got {v}")))
            }
        };
        match *self {
            CohesiveLaw::Linear { b } => nonneg("b", b),
            CohesiveLaw::Griffith { a, b } => nonneg("a", a).and(nonneg("b", b)),
            CohesiveLaw::SmoothSaturating { phi0, b, c } => {
                nonneg("phi0", phi0)?;
                nonneg("b", b)?;
                if !(c.is_finite() && c > 0.0) {
                    return Err(param("law.c", format!("must be > 0, got {c}")));
                }
                Ok(())
            }
        }
    }

    /// The activation part phi0 (energy charged as soon as the jump is nonzero).
    pub fn activation(&self) -> f64 {
        match *self {
            CohesiveLaw::Linear { .. } => 0.0,
            CohesiveLaw::Griffith { a, .. } => a,
            CohesiveLaw::SmoothSaturating { phi0, .. } => phi0,
        }
    }

    /// Bound on the derivative of the smooth part.
    pub fn slope_bound(&self) -> f64 {
        match *self {
            CohesiveLaw::Linear { b }
            | CohesiveLaw::Griffith { b, .. }
            | CohesiveLaw::SmoothSaturating { b, .. } => b,
        }
    }

    /// Smooth part as a function of the opening magnitude.
    pub fn smooth_part(&self, r: f64) -> f64 {
        match *self {
            CohesiveLaw::Linear { b } | CohesiveLaw::Griffith { b, .. } => b * r,
            CohesiveLaw::SmoothSaturating { b, c, .. } => c * (1.0 - (-b * r / c).exp()),
        }
    }

    pub fn smooth_slope(&self, r: f64) -> f64 {
        match *self {
            CohesiveLaw::Linear { b } | CohesiveLaw::Griffith { b, .. } => b,
            CohesiveLaw::SmoothSaturating { b, c, .. } => b * (-b * r / c).exp(),
        }
    }

    fn smooth_curvature(&self, r: f64) -> f64 {
        match *self {
            CohesiveLaw::Linear { .. } | CohesiveLaw::Griffith { .. } => 0.0,
            CohesiveLaw::SmoothSaturating { b, c, .. } => -b * b / c * (-b * r / c).exp(),
        }
    }

    /// Largest opening r with phi0 + phi_s(r) <= level (infinite if unbounded).
    fn level_radius(&self, level: f64) -> f64 {
        let s = level - self.activation();
        if s < 0.0 {
            return f64::NAN;
        }
        match *self {
            CohesiveLaw::Linear { b } | CohesiveLaw::Griffith { b, .. } => {
                if b > 0.0 {
                    s / b
                } else {
                    f64::INFINITY
                }
            }
            CohesiveLaw::SmoothSaturating { b, c, .. } => {
                if b == 0.0 || s >= c {
                    f64::INFINITY
                } else {
                    -(c / b) * (1.0 - s / c).ln()
                }
            }
        }
    }

    /// phi as a function of the opening magnitude.
    pub fn phi_radial(&self, r: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else {
            self.activation() + self.smooth_part(r)
        }
    }

    /// Whether y -> phi(y) is convex.
    pub fn is_convex(&self) -> bool {
        match *self {
            CohesiveLaw::Linear { .. } => true,
            CohesiveLaw::Griffith { a, .. } => a == 0.0,
            CohesiveLaw::SmoothSaturating { phi0, b, .. } => phi0 == 0.0 && b == 0.0,
        }
    }

    /// phi vanishes only at zero, the structural assumption behind the Euler conditions.
    pub fn has_euler_structure(&self) -> bool {
        self.activation() > 0.0 || self.slope_bound() > 0.0
    }
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn phi(law: &CohesiveLaw, y: &[f64]) -> f64 {
    law.phi_radial(norm(y))
}

/// The additional dissipation (phi(y) - gamma)^+.
pub fn increment_cost(law: &CohesiveLaw, y: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(param("gamma", format!("must be >= 0, got {gamma}")));
    }
    Ok((phi(law, y) - gamma).max(0.0))
}

/// Gradient of the smooth part at y != 0; zero at y = 0.
pub fn smooth_gradient(law: &CohesiveLaw, y: &[f64]) -> Vec<f64> {
    let r = norm(y);
    if r == 0.0 {
        return vec![0.0; y.len()];
    }
    let s = law.smooth_slope(r) / r;
    y.iter().map(|v| v * s).collect()
}

/// lim_{eps -> 0+} d/dy phi_s(eps y) . y, which is b|y| for every shipped law.
pub fn psi_tilde(law: &CohesiveLaw, y: &[f64]) -> Result<f64> {
    if !law.has_euler_structure() {
        return Err(Error::Unsupported(format!(
            "{law:?} vanishes away from zero; the homogenized limit is not defined"
        )));
    }
    Ok(law.smooth_slope(0.0) * norm(y))
}

/// Per-node cost used inside the solvers. `OpenBranch` charges the activation
/// even at zero opening, which makes griffith-type laws convex.
#[derive(Clone, Copy, Debug)]
pub(crate) enum NodeCost<'a> {
    Law(&'a CohesiveLaw),
    OpenBranch(&'a CohesiveLaw),
    Closed,
}

impl NodeCost<'_> {
    pub(crate) fn value(&self, r: f64) -> f64 {
        match *self {
            NodeCost::Law(l) => l.phi_radial(r),
            NodeCost::OpenBranch(l) => l.activation() + l.smooth_part(r),
            NodeCost::Closed => {
                if r == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub(crate) fn excess(&self, r: f64, gamma: f64) -> f64 {
        (self.value(r) - gamma).max(0.0)
    }
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // assumes f(lo) < 0 <= f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Global minimizer over r >= 0 of 0.5 c (r - r0)^2 + w (cost(r) - gamma)^+.
pub(crate) fn prox_radial(cost: NodeCost<'_>, r0: f64, gamma: f64, c: f64, w: f64) -> f64 {
    let law = match cost {
        NodeCost::Closed => return 0.0,
        NodeCost::Law(l) | NodeCost::OpenBranch(l) => l,
    };
    if r0 <= 0.0 {
        return 0.0;
    }
    let objective = |r: f64| 0.5 * c * (r - r0).powi(2) + w * cost.excess(r, gamma);

    let mut candidates = vec![0.0];
    // dead zone: phi0 + phi_s(r) <= gamma
    let r_gamma = law.level_radius(gamma);
    let lo = if r_gamma.is_nan() {
        0.0
    } else {
        candidates.push(r0.min(r_gamma));
        r_gamma
    };
    if lo < r0 {
        // active branch: derivative c (r - r0) + w phi_s'(r) is convex in r
        let d1 = |r: f64| c * (r - r0) + w * law.smooth_slope(r);
        let d2 = |r: f64| c + w * law.smooth_curvature(r);
        let root = match law {
            CohesiveLaw::Linear { b } | CohesiveLaw::Griffith { b, .. } => {
                let r = r0 - w * b / c;
                (r > lo).then_some(r)
            }
            CohesiveLaw::SmoothSaturating { .. } => {
                let turn = if d2(lo) >= 0.0 {
                    lo
                } else if d2(r0) <= 0.0 {
                    r0
                } else {
                    bisect(lo, r0, d2)
                };
                (d1(turn) < 0.0).then(|| bisect(turn, r0, d1))
            }
        };
        if let Some(r) = root {
            candidates.push(r.min(r0));
        }
    }

    candidates.sort_by(|a, b| a.total_cmp(b));
    let mut best = candidates[0];
    let mut best_f = objective(best);
    for &r in &candidates[1..] {
        let f = objective(r);
        if f < best_f - TIE_TOL * (1.0 + best_f.abs()) {
            best = r;
            best_f = f;
        }
    }
    best
}

pub(crate) fn prox_vector(
    cost: NodeCost<'_>,
    y0: &[f64],
    gamma: f64,
    c: f64,
    w: f64,
    out: &mut [f64],
) {
    let r0 = norm(y0);
    let r = prox_radial(cost, r0, gamma, c, w);
    let s = if r0 > 0.0 { r / r0 } else { 0.0 };
    for (o, v) in out.iter_mut().zip(y0) {
        *o = v * s;
    }
}

/// Global minimizer of y -> 0.5 c |y - y0|^2 + w (phi(y) - gamma)^+.
///
/// The minimizer is collinear with `y0`; the radial problem is solved by
/// comparing the closed state, the dead-zone projection and the stationary
/// point of the active branch. Ties go to the smaller opening.
pub fn prox_increment(
    law: &CohesiveLaw,
    y0: &[f64],
    gamma: f64,
    c: f64,
    w: f64,
) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(param("c", format!("stiffness must be > 0, got {c}")));
    }
    if !(w > 0.0) {
        return Err(param("w", format!("weight must be > 0, got {w}")));
    }
    if !(gamma >= 0.0) {
        return Err(param("gamma", format!("must be >= 0, got {gamma}")));
    }
    let mut out = vec![0.0; y0.len()];
    prox_vector(NodeCost::Law(law), y0, gamma, c, w, &mut out);
    Ok(out)
}

/// A cohesive law per interface node, or one law shared by all.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawField {
    Uniform(CohesiveLaw),
    PerNode(Vec<CohesiveLaw>),
}

impl LawField {
    pub fn at(&self, node: usize) -> &CohesiveLaw {
        match self {
            LawField::Uniform(l) => l,
            LawField::PerNode(v) => &v[node],
        }
    }

    pub fn validate(&self, n_interface: usize) -> Result<()> {
        match self {
            LawField::Uniform(l) => l.validate(),
            LawField::PerNode(v) => {
                if v.len() != n_interface {
                    return Err(Error::Dimension {
                        what: "per-node cohesive laws",
                        expected: n_interface,
                        got: v.len(),
                    });
                }
                v.iter().try_for_each(|l| l.validate())
            }
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            LawField::Uniform(l) => l.is_convex(),
            LawField::PerNode(v) => v.iter().all(|l| l.is_convex()),
        }
    }
}

impl From<CohesiveLaw> for LawField {
    fn from(l: CohesiveLaw) -> Self {
        LawField::Uniform(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRIFFITH: CohesiveLaw = CohesiveLaw::Griffith { a: 0.04, b: 0.1 };

    #[test]
    fn phi_values() {
        assert_eq!(phi(&GRIFFITH, &[0.0]), 0.0);
        assert!((phi(&GRIFFITH, &[2.0]) - 0.24).abs() < 1e-15);
        assert!((phi(&GRIFFITH, &[0.0, -2.0]) - 0.24).abs() < 1e-15);
        assert_eq!(phi(&CohesiveLaw::Linear { b: 1.0 }, &[3.0]), 3.0);
        let s = CohesiveLaw::SmoothSaturating { phi0: 0.1, b: 1.0, c: 5.0 };
        assert_eq!(phi(&s, &[0.0]), 0.0);
        assert!(phi(&s, &[1e-12]) >= 0.1);
    }

    #[test]
    fn increment_cost_values() {
        let lin = CohesiveLaw::Linear { b: 1.0 };
        assert_eq!(increment_cost(&lin, &[2.0], 3.0).unwrap(), 0.0);
        assert_eq!(increment_cost(&lin, &[2.0], 0.5).unwrap(), 1.5);
        assert_eq!(increment_cost(&GRIFFITH, &[0.0], 0.0).unwrap(), 0.0);
        assert!(increment_cost(&lin, &[2.0], -1.0).is_err());
    }

    #[test]
    fn prox_dead_zone_keeps_input() {
        let lin = CohesiveLaw::Linear { b: 1.0 };
        let y = prox_increment(&lin, &[0.7], 1.0, 3.0, 2.0).unwrap();
        assert_eq!(y, vec![0.7]);
    }

    #[test]
    fn prox_soft_threshold() {
        // frozen against a 1e-6 grid search: argmin 0.75
        let lin = CohesiveLaw::Linear { b: 0.25 };
        let y = prox_increment(&lin, &[1.0], 0.0, 1.0, 1.0).unwrap();
        assert!((y[0] - 0.75).abs() < 1e-15);
        let y = prox_increment(&lin, &[-1.0], 0.0, 1.0, 1.0).unwrap();
        assert!((y[0] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn prox_griffith_stays_closed() {
        // closed: 0.045; open branch: 0.5*0.01 + 0.04 + 0.02 = 0.065
        let y = prox_increment(&GRIFFITH, &[0.3], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(y, vec![0.0]);
    }

    #[test]
    fn prox_vector_is_collinear() {
        let lin = CohesiveLaw::Linear { b: 0.5 };
        let y = prox_increment(&lin, &[3.0, 4.0], 0.0, 1.0, 1.0).unwrap();
        assert!((y[0] - 2.7).abs() < 1e-14 && (y[1] - 3.6).abs() < 1e-14);
    }

    #[test]
    fn prox_rejects_bad_parameters() {
        let lin = CohesiveLaw::Linear { b: 0.5 };
        assert!(prox_increment(&lin, &[1.0], 0.0, 0.0, 1.0).is_err());
        assert!(prox_increment(&lin, &[1.0], 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn psi_tilde_values() {
        let lin = CohesiveLaw::Linear { b: 1.0 };
        assert!((psi_tilde(&lin, &[2.0]).unwrap() - 2.0).abs() < 1e-15);
        let s = CohesiveLaw::SmoothSaturating { phi0: 0.0, b: 1.0, c: 5.0 };
        assert!((psi_tilde(&s, &[-2.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(psi_tilde(&s, &[0.0]).unwrap(), 0.0);
        assert_eq!(psi_tilde(&GRIFFITH, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(psi_tilde(&CohesiveLaw::Linear { b: 0.0 }, &[1.0]).is_err());
    }

    #[test]
    fn psi_tilde_matches_difference_quotient() {
        let s = CohesiveLaw::SmoothSaturating { phi0: 0.0, b: 1.3, c: 0.7 };
        let y = [0.4, -1.1];
        let eps = 1e-9;
        let q = s.smooth_part(eps * norm(&y)) / eps;
        assert!((q - psi_tilde(&s, &y).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn convexity_flags() {
        assert!(CohesiveLaw::Linear { b: 1.0 }.is_convex());
        assert!(!GRIFFITH.is_convex());
        assert!(!CohesiveLaw::SmoothSaturating { phi0: 0.0, b: 1.0, c: 1.0 }.is_convex());
    }

    #[test]
    fn validation_names_field() {
        let err = CohesiveLaw::Linear { b: -0.1 }.validate().unwrap_err();
        assert!(err.to_string().contains("law.b"));
    }
}
