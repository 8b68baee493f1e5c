use super::*;
use crate::expr::{parse, parse_with_coords};
use proptest::prelude::*;

fn unit_grid_1d(res: usize) -> Grid {
    Grid::uniform(vec![0.0], vec![1.0], res).unwrap()
}

fn square(res: usize) -> Grid {
    Grid::uniform(vec![0.0, 0.0], vec![1.0, 1.0], res).unwrap()
}

#[test]
fn grid_validation() {
    assert!(Grid::uniform(vec![0.0], vec![1.0], 2).is_err());
    assert!(Grid::uniform(vec![1.0], vec![1.0], 5).is_err());
    assert!(Grid::uniform(vec![0.0], vec![1.0], 1026).is_err());
    let g = Grid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![5, 9]).unwrap();
    assert_eq!(g.len(), 45);
    assert_eq!(g.spacing(1), 0.25);
    for i in 0..g.len() {
        assert_eq!(g.index(&g.multi(i)), i);
    }
    assert_eq!(g.coords(g.index(&[4, 8])), vec![1.0, 1.0]);
    assert_eq!(g.refined().unwrap().resolution(), &[9, 17]);
}

#[test]
fn neighbours_and_balls() {
    let g = square(4);
    assert_eq!(g.neighbors(0), vec![1, 4]);
    assert_eq!(g.neighbors(5), vec![1, 4, 6, 9]);
    assert_eq!(g.ball(0, 2).len(), 6);
    assert_eq!(g.ball(5, 1).len(), 5);
    assert_eq!(g.box_around(5, &[1, 1]).len(), 9);
}

#[test]
fn natural_order_examples() {
    let g = unit_grid_1d(11);
    let zero = PiecewiseFn::sample(&g, 2, |_| 0.0);
    let one = PiecewiseFn::sample(&g, 2, |_| 1.0);
    assert!(natural_leq(&zero, &one).unwrap());
    assert!(!natural_leq(&one, &zero).unwrap());

    let a = PiecewiseFn::sample(&g, 2, |x| x[0]).with_mask(SingularMask::from_indices(&g, [2]));
    let b = PiecewiseFn::sample(&g, 2, |x| x[0]).with_mask(SingularMask::from_indices(&g, [7]));
    assert!(natural_leq(&a, &b).unwrap() && natural_leq(&b, &a).unwrap());

    let lin = PiecewiseFn::sample(&g, 2, |x| x[0]);
    let sq = PiecewiseFn::sample(&g, 2, |x| x[0] * x[0]);
    assert!(!natural_leq(&lin, &sq).unwrap());
    assert_eq!(natural_leq(&lin, &PiecewiseFn::sample(&square(3), 2, |_| 0.0)), Err(FnError::GridMismatch));
}

#[test]
fn laplacian_exact_on_quadratics() {
    let op = parse("dxx(u) + dyy(u) = f").unwrap();
    let g = square(9);
    let u = PiecewiseFn::sample(&g, 4, |x| x[0] * x[0] + x[1] * x[1]);
    let out = apply_operator(&op, &u).unwrap();
    assert!(out.faults.is_empty());
    let mid = g.index(&[4, 4]);
    assert!((out.function.value(mid).unwrap() - 4.0).abs() <= 1e-9);
    // collar of width one
    assert!(out.function.value(0).is_none());
    assert_eq!(out.function.mask().count(), 81 - 49);
}

/// Residual of the Riccati operator on samples of its exact solution at t=0.5
/// drops by about 4 when h halves (second-order stencils).
#[test]
fn riccati_truncation_is_second_order() {
    let op = parse("dt(u) - u^2 = 0").unwrap();
    let residual = |res: usize| {
        let g = Grid::uniform(vec![0.0], vec![0.9], res).unwrap();
        let u = PiecewiseFn::sample(&g, 3, |t| 1.0 / (1.0 - t[0]));
        let node = g.nearest_node(&[0.5]);
        assert!((g.coords(node)[0] - 0.5).abs() < 1e-12);
        apply_operator(&op, &u).unwrap().function.value(node).unwrap().abs()
    };
    let (r1, r2, r3) = (residual(19), residual(37), residual(73));
    // u'''/6 h^2 with u''' = 6/(1-t)^4 = 96 at t = 0.5
    assert!((r1 - 16.0 * 0.05f64.powi(2)).abs() / r1 < 0.05, "{r1}");
    for ratio in [r1 / r2, r2 / r3] {
        assert!((3.6..4.4).contains(&ratio), "{ratio}");
    }
}

#[test]
fn identity_operator_restricts_to_unmasked() {
    let op = parse_with_coords("u = 0", &["x".into()]).unwrap();
    let g = unit_grid_1d(7);
    let u = PiecewiseFn::sample(&g, 0, |x| x[0].sin()).with_mask(SingularMask::from_indices(&g, [3]));
    let out = apply_operator(&op, &u).unwrap().function;
    assert_eq!(out.mask(), u.mask());
    for i in 0..g.len() {
        assert_eq!(out.value(i), u.value(i));
    }
}

#[test]
fn faults_join_the_mask() {
    let op = parse_with_coords("log(u) = 0", &["x".into()]).unwrap();
    let g = unit_grid_1d(5);
    let u = PiecewiseFn::sample(&g, 0, |x| x[0] - 0.5);
    let out = apply_operator(&op, &u).unwrap();
    assert_eq!(out.faults.iter().map(|f| f.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert_eq!(out.function.mask().indices(), vec![0, 1, 2]);
}

#[test]
fn operator_errors() {
    let g = unit_grid_1d(5);
    let u = PiecewiseFn::sample(&g, 1, |x| x[0]);
    let op2 = parse("dxx(u) = 0").unwrap();
    assert_eq!(
        apply_operator(&op2, &u).unwrap_err(),
        FnError::SmoothnessTooLow { have: 1, need: 2 }
    );
    let op4 = parse("D[4](u) = 0").unwrap();
    let small = PiecewiseFn::sample(&Grid::uniform(vec![0.0], vec![1.0], 4).unwrap(), 4, |x| x[0]);
    assert!(matches!(apply_operator(&op4, &small), Err(FnError::StencilTooWide { .. })));
    let op5 = parse("D[5](u) = 0").unwrap();
    let u5 = PiecewiseFn::sample(&unit_grid_1d(21), 5, |x| x[0]);
    assert_eq!(apply_operator(&op5, &u5).unwrap_err(), FnError::UnsupportedDerivativeOrder(5));
}

#[test]
fn pullback_examples() {
    let ddx = parse("dx(u) = 0").unwrap();
    // dyadic spacing keeps x + 100 exact
    let g = unit_grid_1d(9);
    let x = PiecewiseFn::sample(&g, 2, |p| p[0]);
    let two_x = PiecewiseFn::sample(&g, 2, |p| 2.0 * p[0]);
    let shifted = PiecewiseFn::sample(&g, 2, |p| p[0] + 100.0);
    assert!(pullback_leq(&ddx, &x, &two_x).unwrap());
    assert!(pullback_leq(&ddx, &x, &shifted).unwrap());
    assert!(pullback_leq(&ddx, &shifted, &x).unwrap());

    let lap = parse("dxx(u) + dyy(u) = f").unwrap();
    let sq = square(7);
    let zero = PiecewiseFn::sample(&sq, 2, |_| 0.0);
    let r2 = PiecewiseFn::sample(&sq, 2, |p| p[0] * p[0] + p[1] * p[1]);
    assert!(pullback_leq(&lap, &zero, &r2).unwrap());
    assert!(!pullback_leq(&lap, &r2, &zero).unwrap());
}

#[test]
fn density_check() {
    let g = square(7);
    let line = SingularMask::from_indices(&g, (0..7).map(|k| g.index(&[3, k])));
    assert_eq!(line.density_violation(&g), None);
    let thick = SingularMask::from_indices(&g, (0..7).flat_map(|k| (1..6).map(move |j| (j, k))).map(|(j, k)| g.index(&[j, k])));
    assert!(thick.check_nowhere_dense(&g).is_err());
}

/// A fixed geometric curve marked on nested grids: the marked fraction must
/// not grow under refinement.
#[test]
fn measure_proxy_decreases_under_refinement() {
    let mark_curve = |g: &Grid| {
        SingularMask::from_indices(
            g,
            (0..g.len()).filter(|&i| {
                let c = g.coords(i);
                (c[1] - 0.3 - 0.4 * c[0]).abs() <= 0.5 * g.spacing(1)
            }),
        )
    };
    let mut g = square(9);
    let mut last = mark_curve(&g).fraction();
    for _ in 0..3 {
        g = g.refined().unwrap();
        let m = mark_curve(&g);
        assert!(m.density_violation(&g).is_none());
        assert!(m.fraction() <= last);
        last = m.fraction();
    }
}

#[test]
fn json_and_csv() {
    let g = unit_grid_1d(3);
    let u = PiecewiseFn::sample(&g, 1, |x| x[0]).with_mask(SingularMask::from_indices(&g, [1]));
    let s = serde_json::to_string(&u).unwrap();
    assert_eq!(
        s,
        r#"{"bounds":{"lo":[0.0],"hi":[1.0]},"resolution":[3],"smoothness":1,"values":[0.0,null,1.0],"mask":[1]}"#
    );
    let back: PiecewiseFn = serde_json::from_str(&s).unwrap();
    assert_eq!(back.mask(), u.mask());
    assert_eq!(back.value(2), Some(1.0));
    assert_eq!(u.to_csv(&["t".into()]), "t,value,masked\n0,0,0\n0.5,NaN,1\n1,1,0\n");
}

fn arb_triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<usize>)> {
    let n = 9 * 9;
    (
        prop::collection::vec(-2.0f64..2.0, n),
        prop::collection::vec(-2.0f64..2.0, n),
        prop::collection::vec(-2.0f64..2.0, n),
        prop::collection::vec(0usize..n, 0..4),
    )
}

proptest! {
    #[test]
    fn mask_growth_is_exact((a, _b, _c, holes) in arb_triple()) {
        let op = parse("dt(u) + u*dx(u) = 0").unwrap();
        let g = square(9);
        let mask = SingularMask::from_indices(&g, holes);
        let u = PiecewiseFn::new(g.clone(), a, mask.clone(), 2).unwrap();
        let out = apply_operator(&op, &u).unwrap().function;
        let dilated = mask.dilate(&g, &[1, 1]);
        let collar = (0..g.len()).filter(|&i| {
            let m = g.multi(i);
            m.iter().any(|&k| k == 0 || k == 8)
        });
        let expected = dilated.union(&SingularMask::from_indices(&g, collar));
        prop_assert_eq!(out.mask(), &expected);
    }

    #[test]
    fn order_laws((a, b, c, holes) in arb_triple()) {
        let op = parse("dt(u) + u*dx(u) = 0").unwrap();
        let g = square(9);
        let mk = |v: Vec<f64>| PiecewiseFn::new(g.clone(), v, SingularMask::from_indices(&g, holes.clone()), 2).unwrap();
        let (u, v, w) = (mk(a), mk(b), mk(c));
        prop_assert!(natural_leq(&u, &u).unwrap());
        prop_assert!(pullback_leq(&op, &u, &u).unwrap());
        if natural_leq(&u, &v).unwrap() && natural_leq(&v, &w).unwrap() {
            prop_assert!(natural_leq(&u, &w).unwrap());
        }
        if pullback_leq(&op, &u, &v).unwrap() && pullback_leq(&op, &v, &w).unwrap() {
            prop_assert!(pullback_leq(&op, &u, &w).unwrap());
        }
        let tu = apply_operator(&op, &u).unwrap().function;
        let tv = apply_operator(&op, &v).unwrap().function;
        prop_assert_eq!(pullback_leq(&op, &u, &v).unwrap(), natural_leq(&tu, &tv).unwrap());
    }
}
