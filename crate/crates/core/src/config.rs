//! Run configuration: a JSON document describing one evolution and its checks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::evolution::{EvolutionOptions, TimeGrid};
use crate::geometry::{build_rect_mesh_with_crack, build_rod_mesh_with, Mesh, Side};
use crate::loads::LoadProgram;
use crate::materials::{BulkModel, LawField};
use crate::problem::Problem;
use crate::solver::SolverOptions;
use crate::state::InternalVariable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeshSpec {
    /// [0, length] split into `elements` intervals, crack point at `interface_position`.
    Rod {
        length: f64,
        elements: usize,
        interface_position: f64,
        #[serde(default = "rod_ends")]
        dirichlet: Vec<Side>,
    },
    /// [-width/2, width/2] x [-height/2, height/2], crack on y = 0 between crack[0] and crack[1].
    Rect {
        width: f64,
        height: f64,
        nx: usize,
        ny: usize,
        crack: [f64; 2],
        dirichlet: Vec<Side>,
        #[serde(default = "scalar")]
        field_dim: usize,
    },
}

fn rod_ends() -> Vec<Side> {
    vec![Side::Left, Side::Right]
}

fn scalar() -> usize {
    1
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match self {
            MeshSpec::Rod {
                length,
                elements,
                interface_position,
                dirichlet,
            } => build_rod_mesh_with(*length, *elements, *interface_position, dirichlet),
            MeshSpec::Rect {
                width,
                height,
                nx,
                ny,
                crack,
                dirichlet,
                field_dim,
            } => build_rect_mesh_with_crack(*width, *height, *nx, *ny, (crack[0], crack[1]), dirichlet)?
                .with_field_dim(*field_dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSpec {
    /// `steps` equal steps up to the load horizon.
    Uniform { steps: usize },
    /// Explicit knots from 0 to the load horizon.
    Knots(Vec<f64>),
}

impl TimeSpec {
    pub fn grid(&self, horizon: f64) -> Result<TimeGrid> {
        match self {
            TimeSpec::Uniform { steps } => TimeGrid::uniform(horizon, *steps),
            TimeSpec::Knots(k) => TimeGrid::from_knots(k.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSpec {
    Constant(f64),
    Values(Vec<f64>),
    /// JSON array of per-node values; relative paths resolve against the config file.
    File(PathBuf),
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::Constant(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationSpec {
    /// Random competitors per certified knot; 0 disables the certificate.
    pub stability_competitors: usize,
    pub stability_every: usize,
    pub stability_tolerance: f64,
    /// Euler reports at every n-th knot; 0 disables them.
    pub euler_every: usize,
    pub euler_tolerance: f64,
    /// Allowed balance residual as a fraction of the peak total energy.
    pub balance_fraction: f64,
    pub seed: u64,
}

impl Default for VerificationSpec {
    fn default() -> Self {
        VerificationSpec {
            stability_competitors: 100,
            stability_every: 10,
            stability_tolerance: 1e-9,
            euler_every: 1,
            euler_tolerance: 1e-6,
            balance_fraction: 0.02,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub bulk: BulkModel,
    pub law: LawField,
    pub loads: LoadProgram,
    pub time: TimeSpec,
    #[serde(default)]
    pub initial_gamma: GammaSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Keep stepping past a non-converged knot (the trace is marked poisoned).
    #[serde(default)]
    pub continue_on_nonconvergence: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub verification: VerificationSpec,
}

/// Everything needed to run: the validated problem, grid and initial history.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub problem: Problem,
    pub grid: TimeGrid,
    pub gamma0: InternalVariable,
    pub options: EvolutionOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Read a config file and resolve a relative gamma file against its directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        if let GammaSpec::File(f) = &cfg.initial_gamma {
            if f.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.initial_gamma = GammaSpec::File(base.join(f));
            }
        }
        Ok(cfg)
    }

    /// Validate every part and assemble the scenario.
    pub fn scenario(&self) -> Result<Scenario> {
        let mesh = self.mesh.build()?;
        let n = mesh.n_interface();
        let problem = Problem::new(mesh, self.bulk.clone(), self.law.clone(), self.loads.clone())?;
        let grid = self.time.grid(self.loads.horizon)?;
        self.solver.validate()?;
        for &t in &self.snapshots {
            if !(0.0..=self.loads.horizon).contains(&t) {
                return Err(param("snapshots", format!("time {t} outside [0, {}]", self.loads.horizon)));
            }
        }
        let v = &self.verification;
        for (name, x) in [
            ("verification.stability_tolerance", v.stability_tolerance),
            ("verification.euler_tolerance", v.euler_tolerance),
            ("verification.balance_fraction", v.balance_fraction),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(param(name, "must be finite and >= 0"));
            }
        }
        let gamma0 = match &self.initial_gamma {
            GammaSpec::Constant(c) => {
                InternalVariable::uniform(n, *c).map_err(|_| param("initial_gamma", "must be >= 0"))?
            }
            GammaSpec::Values(v) => gamma_values(v.clone(), n)?,
            GammaSpec::File(f) => {
                let text = std::fs::read_to_string(f)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", f.display())))?;
                let v: Vec<f64> = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", f.display())))?;
                gamma_values(v, n)?
            }
        };
        Ok(Scenario {
            problem,
            grid,
            gamma0,
            options: EvolutionOptions {
                solver: self.solver.clone(),
                abort_on_nonconvergence: !self.continue_on_nonconvergence,
            },
        })
    }
}

fn gamma_values(v: Vec<f64>, n: usize) -> Result<InternalVariable> {
    if v.len() != n {
        return Err(Error::Dimension {
            what: "initial_gamma",
            expected: n,
            got: v.len(),
        });
    }
    InternalVariable::new(v).map_err(|e| param("initial_gamma", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROD: &str = r#"{
        "mesh": {"type": "rod", "length": 2.0, "elements": 2, "interface_position": 1.0},
        "bulk": {"kind": {"type": "quadratic_scalar"}},
        "law": {"type": "linear", "b": 0.25},
        "loads": {
            "horizon": 1.0,
            "boundary": {
                "profile": {"type": "ramp", "rate": 1.0},
                "value": {"type": "affine", "constant": [0.0, 0.0], "gradient": [[0.5, 0.0], [0.0, 0.0]]}
            }
        },
        "time": {"uniform": {"steps": 10}}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_json(ROD).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_json(), again.to_json());
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.grid.steps(), 10);
        assert_eq!(sc.gamma0.values(), &[0.0]);
    }

    #[test]
    fn negative_slope_names_the_field() {
        let bad = ROD.replace("\"b\": 0.25", "\"b\": -1.0");
        let err = RunConfig::from_json(&bad).unwrap().scenario().unwrap_err();
        assert!(err.to_string().contains("law.b"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = ROD.replace("\"time\"", "\"tiem\": 1, \"time\"");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn gamma_length_is_checked() {
        let mut cfg = RunConfig::from_json(ROD).unwrap();
        cfg.initial_gamma = GammaSpec::Values(vec![0.1, 0.2]);
        assert!(matches!(cfg.scenario(), Err(Error::Dimension { .. })));
    }
}
