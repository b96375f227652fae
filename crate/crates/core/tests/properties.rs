use cohevo::loads::{load_apply, load_covector};
use cohevo::materials::cohesive::{phi, prox_increment};
use cohevo::materials::{bulk_energy, bulk_gradient};
use cohevo::state::{join, InternalVariable};
use cohevo::{
    build_rect_mesh_with_crack, jump, BulkModel, CohesiveLaw, LoadProgram, Mesh, PieceField, Profile, Side, Term,
};
use proptest::prelude::*;

fn plate_mesh(nx: usize, half_ny: usize, field_dim: usize) -> Mesh {
    let width = nx as f64;
    let tip = -0.5 * width + (nx / 2) as f64;
    build_rect_mesh_with_crack(width, 2.0, nx, 2 * half_ny, (-0.5 * width, tip), &[Side::Top, Side::Bottom])
        .and_then(|m| m.with_field_dim(field_dim))
        .unwrap()
}

fn field(mesh: &Mesh, seed: &[f64]) -> Vec<f64> {
    (0..mesh.n_dofs()).map(|i| seed[i % seed.len()] * (1.0 + (i % 7) as f64 * 0.1)).collect()
}

fn law() -> impl Strategy<Value = CohesiveLaw> {
    prop_oneof![
        (0.0..2.0f64).prop_map(|b| CohesiveLaw::Linear { b }),
        (0.0..0.5f64, 0.0..2.0f64).prop_map(|(a, b)| CohesiveLaw::Griffith { a, b }),
        (0.0..0.3f64, 0.05..2.0f64, 0.05..1.0f64).prop_map(|(phi0, b, c)| CohesiveLaw::SmoothSaturating { phi0, b, c }),
    ]
}

fn prox_objective(law: &CohesiveLaw, y0: &[f64], gamma: f64, k: f64, w: f64, y: &[f64]) -> f64 {
    let d2: f64 = y.iter().zip(y0).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * k * d2 + w * (phi(law, y) - gamma).max(0.0)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn jump_is_linear(
        nx in 2usize..6,
        half_ny in 1usize..3,
        m in 1usize..3,
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        su in prop::collection::vec(-1.0..1.0f64, 5),
        sv in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let mesh = plate_mesh(nx, half_ny, m);
        let u = field(&mesh, &su);
        let v = field(&mesh, &sv);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let (ju, jv, jm) = (jump(&mesh, &u).unwrap(), jump(&mesh, &v).unwrap(), jump(&mesh, &mix).unwrap());
        for i in 0..ju.len() {
            for c in 0..2 {
                prop_assert!((jm[i][c] - (a * ju[i][c] + b * jv[i][c])).abs() <= 1e-12);
            }
        }
        // crack tips never open
        for (q, j) in mesh.interface_nodes().iter().zip(&ju) {
            if q.is_tip() {
                prop_assert_eq!(*j, [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn prox_dominates_every_competitor(
        law in law(),
        y0 in prop::collection::vec(-2.0..2.0f64, 1..3),
        gamma in 0.0..1.0f64,
        k in 0.1..10.0f64,
        w in 0.05..2.0f64,
        others in prop::collection::vec(prop::collection::vec(-2.5..2.5f64, 2), 32),
    ) {
        let y = prox_increment(&law, &y0, gamma, k, w).unwrap();
        let best = prox_objective(&law, &y0, gamma, k, w, &y);
        let mut candidates: Vec<Vec<f64>> = others.iter().map(|o| o[..y0.len()].to_vec()).collect();
        candidates.push(vec![0.0; y0.len()]);
        candidates.push(y0.clone());
        for c in candidates {
            let f = prox_objective(&law, &y0, gamma, k, w, &c);
            prop_assert!(best <= f + 1e-12 * (1.0 + f.abs()), "{best} > {f} at {c:?}");
        }
    }

    #[test]
    fn join_is_a_lattice_operation(
        g in prop::collection::vec(0.0..1.0f64, 6),
        x in prop::collection::vec(0.0..1.0f64, 6),
        z in prop::collection::vec(0.0..1.0f64, 6),
    ) {
        let gi = InternalVariable::new(g.clone()).unwrap();
        let xi = InternalVariable::new(x.clone()).unwrap();
        let gx = join(&gi, &x).unwrap();
        let xg = join(&xi, &g).unwrap();
        prop_assert_eq!(gx.values(), xg.values());
        let again = join(&gx, &x).unwrap();
        prop_assert_eq!(again.values(), gx.values());
        let left = join(&join(&gi, &x).unwrap(), &z).unwrap();
        let xz = join(&xi, &z).unwrap();
        let right = join(&gi, xz.values()).unwrap();
        prop_assert_eq!(left.values(), right.values());
        for i in 0..g.len() {
            prop_assert!(gx.values()[i] >= g[i] && gx.values()[i] >= x[i]);
        }
    }

    #[test]
    fn loads_are_linear_and_match_the_covector(
        nx in 2usize..5,
        m in 1usize..3,
        f in prop::array::uniform2(-1.0..1.0f64),
        plus in prop::array::uniform2(-1.0..1.0f64),
        t in 0.0..1.0f64,
        a in -2.0..2.0f64,
        su in prop::collection::vec(-1.0..1.0f64, 4),
        sv in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let mesh = plate_mesh(nx, 1, m);
        let mut prog = LoadProgram::zero(1.0);
        prog.body_force = Some(Term { profile: Profile::Ramp { rate: 1.0 }, value: PieceField::Uniform(f) });
        prog.crack_force_plus = Some(Term { profile: Profile::Constant { value: 1.0 }, value: PieceField::Uniform(plus) });
        let u = field(&mesh, &su);
        let v = field(&mesh, &sv);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + a * y).collect();
        let lu = load_apply(&prog, &mesh, t, &u).unwrap();
        let lv = load_apply(&prog, &mesh, t, &v).unwrap();
        let lm = load_apply(&prog, &mesh, t, &mix).unwrap();
        prop_assert!((lm - (lu + a * lv)).abs() <= 1e-10 * (1.0 + lu.abs() + lv.abs()));
        let ell = load_covector(&prog, &mesh, t).unwrap();
        let dot: f64 = ell.iter().zip(&u).map(|(x, y)| x * y).sum();
        prop_assert!((dot - lu).abs() <= 1e-10 * (1.0 + lu.abs()));
    }

    #[test]
    fn bulk_gradient_matches_finite_differences(
        kind in 0usize..3,
        p in 1.5..4.0f64,
        lambda in 0.0..2.0f64,
        mu in 0.2..2.0f64,
        su in prop::collection::vec(-1.0..1.0f64, 5),
    ) {
        let (model, m) = match kind {
            0 => (BulkModel::quadratic(), 1),
            1 => (BulkModel::p_power(p), 1),
            _ => (BulkModel::linear_elasticity(lambda, mu), 2),
        };
        let mesh = plate_mesh(3, 1, m);
        let u = field(&mesh, &su);
        let g = bulk_gradient(&model, &mesh, &u).unwrap();
        let h = 1e-6;
        for d in (0..u.len()).step_by(3) {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[d] += h;
            dn[d] -= h;
            let fd = (bulk_energy(&model, &mesh, &up).unwrap() - bulk_energy(&model, &mesh, &dn).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[d]).abs() <= 1e-6 * (1.0 + g[d].abs()), "dof {d}: {fd} vs {}", g[d]);
        }
    }

    #[test]
    fn densities_respect_their_growth_bounds(
        kind in 0usize..3,
        p in 1.5..4.0f64,
        lambda in 0.0..2.0f64,
        mu in 0.2..2.0f64,
        xi in prop::array::uniform4(-2.0..2.0f64),
    ) {
        let (model, sym) = match kind {
            0 => (BulkModel::quadratic(), false),
            1 => (BulkModel::p_power(p), false),
            _ => (BulkModel::linear_elasticity(lambda, mu), true),
        };
        let off = if sym { 0.5 * (xi[1] + xi[2]) } else { xi[1] };
        let below = if sym { off } else { xi[2] };
        let grad = [[xi[0], off], [below, xi[3]]];
        let norm = grad.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let q = model.growth_exponent();
        let (a0, a1) = model.growth_constants(2);
        let w = model.density(&grad, 2);
        let np = norm.powf(q);
        prop_assert!(a0 * np <= w * (1.0 + 1e-12) + 1e-15, "{a0} {np} {w}");
        prop_assert!(w <= a1 * np * (1.0 + 1e-12) + 1e-15, "{a1} {np} {w}");
    }
}
