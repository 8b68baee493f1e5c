use super::*;
use crate::expr::{parse, parse_with_coords, Field};
use crate::multi_index::MultiIndex;

fn op_and_f(src: &str, f: &str) -> (crate::expr::OperatorSpec, Field) {
    let op = parse(src).unwrap();
    let field = Field::parse(f, op.coords()).unwrap();
    (op, field)
}

fn op_xy(src: &str, f: &str) -> (crate::expr::OperatorSpec, Field) {
    let op = parse_with_coords(src, &["x".into(), "y".into()]).unwrap();
    let field = Field::parse(f, op.coords()).unwrap();
    (op, field)
}

#[test]
fn identity_patch_is_constant_band_midpoint() {
    let (op, f) = op_xy("u = 5", "5");
    let cfg = PatchConfig::default();
    let sub = local_subsolution(&op, &f, &[0.0, 0.0], 0.1, None, &cfg).unwrap();
    let sup = local_supersolution(&op, &f, &[0.0, 0.0], 0.1, None, &cfg).unwrap();
    for x in sample_points(&[0.0, 0.0], sub.radius, 7) {
        assert!((sub.poly.eval(&x) - 4.95).abs() < 1e-12);
        assert!((sup.poly.eval(&x) - 5.05).abs() < 1e-12);
    }
    assert_eq!(sub.radius, cfg.radius_cap);
}

#[test]
fn cube_root_bisection() {
    let (op, f) = parse("u^3 = f").map(|op| {
        let f = Field::constant(2.0, op.dimension());
        (op, f)
    }).unwrap();
    let cfg = PatchConfig::default();
    let x0 = vec![0.0; op.dimension()];
    let sub = local_subsolution(&op, &f, &x0, 0.2, None, &cfg).unwrap();
    let sup = local_supersolution(&op, &f, &x0, 0.2, None, &cfg).unwrap();
    assert!((sub.poly.eval(&x0) - 1.9f64.cbrt()).abs() < 1e-10);
    assert!((sup.poly.eval(&x0) - 2.1f64.cbrt()).abs() < 1e-10);
}

#[test]
fn laplacian_head_coefficient() {
    let (op, f) = op_xy("dxx(u) + dyy(u) = f", "3");
    let cfg = PatchConfig::default();
    let x0 = [0.5, 0.5];
    let head = MultiIndex::new(vec![2, 0]);
    let sub = local_subsolution(&op, &f, &x0, 0.2, None, &cfg).unwrap();
    let sup = local_supersolution(&op, &f, &x0, 0.2, None, &cfg).unwrap();
    assert_eq!(sub.solve_for, head);
    assert!((sub.poly.coeff(&head) - 2.9).abs() < 1e-12);
    assert!((sup.poly.coeff(&head) - 3.1).abs() < 1e-12);
    // constant f: the defect is exactly flat, so the cap is reached
    assert_eq!(sub.radius, cfg.radius_cap);
}

#[test]
fn prolongation_flattens_defect() {
    let (op, f) = op_xy("dxx(u) + dyy(u) = f", "-2*pi^2*sin(pi*x)*sin(pi*y)");
    let cfg = PatchConfig::default();
    let x0 = [0.3, 0.6];
    let p = local_subsolution(&op, &f, &x0, 1e-3, None, &cfg).unwrap();
    let d0 = p.defect_at(&op, &f, &x0).unwrap();
    assert!((d0 + 5e-4).abs() < 1e-9);
    // defect deviation shrinks like |h|^(extra+1)
    let dev = |h: f64| (p.defect_at(&op, &f, &[x0[0] + h, x0[1] - h]).unwrap() - d0).abs();
    assert!(dev(0.01) < 1e-8);
    assert!(dev(0.005) < dev(0.01) / 32.0);
}

#[test]
fn riccati_patch_tracks_solution() {
    let (op, f) = op_and_f("dt(u) = u^2", "0");
    let mut seed = crate::jets::JetPolynomial::zero(vec![0.0], 0);
    seed.set(MultiIndex::zero(1), 1.0);
    let cfg = PatchConfig::default();
    let p = local_supersolution(&op, &f, &[0.0], 0.01, Some(&seed), &cfg).unwrap();
    // jet of 1/(1-t) at 0 has a_k = k!, up to the band shift in a_1
    let a = |k| p.poly.coeff(&MultiIndex::new(vec![k]));
    assert_eq!(a(0), 1.0);
    assert!((a(1) - 1.005).abs() < 1e-12);
    assert!(p.radius > 0.0);
    for x in sample_points(&[0.0], p.radius, 40) {
        let d = p.defect_at(&op, &f, &x).unwrap();
        assert!((-1e-12..=0.01 + 1e-12).contains(&d), "{d}");
    }
}

#[test]
fn no_bracket_for_unreachable_target() {
    let (op, f) = op_and_f("u^2 = f", "-1");
    let err = local_subsolution(&op, &f, &[0.0], 0.1, None, &PatchConfig::default()).unwrap_err();
    assert_eq!(err, PatchError::NoBracket);
}

#[test]
fn invalid_epsilon() {
    let (op, f) = op_xy("u = 5", "5");
    let err = local_subsolution(&op, &f, &[0.0, 0.0], 0.0, None, &PatchConfig::default()).unwrap_err();
    assert_eq!(err, PatchError::InvalidEpsilon(0.0));
}

fn unit_square(res: usize) -> crate::fnspaces::Grid {
    crate::fnspaces::Grid::uniform(vec![0.0, 0.0], vec![1.0, 1.0], res).unwrap()
}

#[test]
fn identity_cover_is_one_patch() {
    let (op, f) = op_xy("u = 5", "5");
    let mut cfg = SolverConfig::default();
    cfg.patch.radius_cap = 2.0;
    let g = global_approx(&op, &f, 0.1, &unit_square(11), Side::Sub, &[], None, &cfg).unwrap();
    assert_eq!(g.patches.len(), 1);
    assert_eq!(g.function.mask().count(), 0);
    assert!(g.function.values().iter().all(|&v| (v - 4.95).abs() < 1e-12));
}

#[test]
fn pins_become_patch_values() {
    let (op, f) = op_and_f("dt(u) = u^2", "0");
    let grid = crate::fnspaces::Grid::uniform(vec![0.0], vec![0.5], 65).unwrap();
    let pins = [Pin { point: vec![0.0], value: 1.0 }];
    let g = global_approx(&op, &f, 0.05, &grid, Side::Sub, &pins, None, &SolverConfig::default()).unwrap();
    assert_eq!(g.function.value(0), Some(1.0));
    assert!(g.warnings.is_empty());
    assert_eq!(g.density_violation, None);
    // oracle 1/(1-t) = 2 at t = 0.5; the sub band keeps the patches below it
    let end = g.patches[g.owner[64]].poly.eval(&[0.5]);
    assert!(end <= 2.0 + 1e-9 && end > 1.8, "{end}");
}

#[test]
fn identity_cut_is_closed_form() {
    let (op, f) = op_xy("u = 5", "5");
    let grid = unit_square(11);
    let cut = refine_cut(&op, &f, &grid, 0.4, 3, &[], &CutConfig::default()).unwrap();
    assert_eq!(cut.epsilons, vec![0.4, 0.2, 0.1, 0.05]);
    assert!((cut.image_defect - 0.025).abs() < 1e-12);
    for i in 0..grid.len() {
        assert!((cut.lower.cell(i).lo() - 4.975).abs() < 1e-12);
        assert!((cut.lower.cell(i).hi() - 4.975).abs() < 1e-12);
        assert!((cut.upper.cell(i).hi() - 5.025).abs() < 1e-12);
    }
    for l in &cut.levels {
        assert_eq!(l.defect.pass_fraction, 1.0);
    }
}

#[test]
fn refine_rejects_bad_levels() {
    let (op, f) = op_xy("u = 5", "5");
    let err = refine_cut(&op, &f, &unit_square(5), 0.4, 0, &[], &CutConfig::default()).unwrap_err();
    assert_eq!(err.error, SolveError::InvalidLevels(0));
}

#[test]
fn band_nesting_across_levels() {
    let (op, f) = op_and_f("dt(u) = u^2", "0");
    let grid = crate::fnspaces::Grid::uniform(vec![0.0], vec![0.5], 65).unwrap();
    let pins = [Pin { point: vec![0.0], value: 1.0 }];
    let cut = refine_cut(&op, &f, &grid, 0.2, 2, &pins, &CutConfig::default()).unwrap();
    for l in cut.levels.iter().filter(|l| l.level > 0) {
        let coarser = cut.epsilons[l.level - 1];
        for p in &l.approx.patches {
            for x in sample_points(&p.center, p.radius, 20) {
                let d = p.defect_at(&op, &f, &x).unwrap();
                assert!(l.approx.side.contains(coarser, d, 1e-9));
            }
        }
    }
}

#[test]
fn cut_is_deterministic() {
    let (op, f) = op_xy("dxx(u) + dyy(u) = f", "-2*pi^2*sin(pi*x)*sin(pi*y)");
    let grid = unit_square(17);
    let run = || refine_cut(&op, &f, &grid, 0.4, 1, &[], &CutConfig::default()).unwrap().to_json().to_string();
    assert_eq!(run(), run());
}

