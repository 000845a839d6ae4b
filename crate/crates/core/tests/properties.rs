use std::sync::Arc;

use proptest::prelude::*;
use spencerkit::charts::{build_spencer_chart, factorize};
use spencerkit::crsolve::{self, ScalarField};
use spencerkit::jfield::{twisted_r4, AcStructure};
use spencerkit::poly::{monomials_up_to, VarNames};
use spencerkit::pseudogroup::{check_ah_map, compose, maps_agree, LocalMap};
use spencerkit::{par, Complex64, CoordBox, Monomial, Poly, SampleGrid, Tolerances};

fn coeff() -> impl Strategy<Value = Complex64> {
    (-4i32..=4, -4i32..=4).prop_map(|(a, b)| Complex64::new(f64::from(a) / 4.0, f64::from(b) / 4.0))
}

/// Polynomials in `nvars` variables with total degree at most `degree`.
fn poly(nvars: usize, degree: u32) -> impl Strategy<Value = Poly> {
    let monos = monomials_up_to(nvars, degree);
    proptest::collection::vec(coeff(), monos.len()).prop_map(move |cs| {
        let mut p = Poly::zero(nvars);
        for (m, c) in monos.iter().zip(cs) {
            p.add_term(m.clone(), c);
        }
        p
    })
}

fn real_coeff_poly(nvars: usize, degree: u32) -> impl Strategy<Value = Poly> {
    let monos = monomials_up_to(nvars, degree);
    proptest::collection::vec(-1.0f64..1.0, monos.len()).prop_map(move |cs| {
        let mut p = Poly::zero(nvars);
        for (m, c) in monos.iter().zip(cs) {
            p.add_term(m.clone(), Complex64::new(c, 0.0));
        }
        p
    })
}

fn point(dim: usize, half: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-half..half, dim)
}

fn std_c1() -> AcStructure {
    AcStructure::standard(CoordBox::cube(1, -1.0, 1.0).unwrap())
}

fn std_c2() -> AcStructure {
    AcStructure::standard(CoordBox::cube(2, -1.0, 1.0).unwrap())
}

/// `P(z1, ..., zm)` as a polynomial in the real coordinates of `C^n`.
fn holomorphic_in_z(p: &Poly, n: usize) -> Poly {
    let zs: Vec<Poly> = (0..p.nvars())
        .map(|j| Poly::complex_coordinate(2 * n, j))
        .collect();
    p.compose(&zs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cr_forms_agree_within_factor_two(p in poly(4, 2)) {
        let acs = std_c2();
        let grid = SampleGrid::new(acs.bx(), 3).unwrap();
        let f = ScalarField::new(p, acs.bx().clone()).unwrap();
        let r = crsolve::cr_residual(&acs, &f, &grid).unwrap();
        let rep = crsolve::cr_equations_check(&acs, &f, &grid, 1e-8).unwrap();
        let real_max = rep.get("du_residual").unwrap().max(rep.get("dv_residual").unwrap());
        prop_assert!(real_max <= r * (1.0 + 1e-12) + 1e-14, "{real_max} > {r}");
        prop_assert!(r <= 2.0 * real_max + 1e-14, "{r} > 2 * {real_max}");
    }

    #[test]
    fn canonical_text_round_trips(p in real_coeff_poly(3, 3), q in poly(2, 3)) {
        prop_assert_eq!(Poly::parse(&p.to_string(), 3).unwrap(), p);
        let names = VarNames::Complex(1);
        prop_assert_eq!(Poly::parse_with(&q.to_string_with(&names), &names).unwrap(), q);
    }

    #[test]
    fn nijenhuis_is_antisymmetric(p in point(4, 0.5), a in 0usize..4, b in 0usize..4) {
        let acs = twisted_r4();
        let nab = acs.nijenhuis(&p, a, b).unwrap();
        let nba = acs.nijenhuis(&p, b, a).unwrap();
        for (x, y) in nab.iter().zip(&nba) {
            prop_assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn split_type_has_full_eigenspaces(p in point(4, 0.5)) {
        let n = 2;
        for acs in [std_c2(), twisted_r4()] {
            let s = acs.split_type(&p, 1e-8).unwrap();
            prop_assert_eq!(s.holomorphic.len(), n);
            prop_assert_eq!(s.antiholomorphic.len(), n);
            prop_assert!(s.residual <= 1e-8);
        }
    }

    #[test]
    fn conjugated_structures_square_to_minus_identity(a in -0.8f64..0.8, b in -0.8f64..0.8) {
        // S = I + a x1 E_{0,2} + b E_{3,1}: unipotent, exact polynomial inverse.
        let bx = CoordBox::cube(2, -1.0, 1.0).unwrap();
        let x1 = Poly::var(4, 0);
        let mut s = vec![vec![Poly::zero(4); 4]; 4];
        let mut s_inv = s.clone();
        for i in 0..4 {
            s[i][i] = Poly::constant(4, 1.0);
            s_inv[i][i] = Poly::constant(4, 1.0);
        }
        s[0][2] = x1.clone() * a;
        s_inv[0][2] = x1 * (-a);
        s[3][1] = Poly::constant(4, b);
        s_inv[3][1] = Poly::constant(4, -b);
        let acs = AcStructure::conjugated(bx.clone(), &s, &s_inv).unwrap();
        let r = acs.check_acs(&SampleGrid::new(&bx, 3).unwrap(), 1e-9).unwrap();
        prop_assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn holomorphic_polynomials_are_almost_holomorphic(p in poly(2, 3)) {
        let acs = std_c2();
        let f = ScalarField::new(holomorphic_in_z(&p, 2), acs.bx().clone()).unwrap();
        let grid = SampleGrid::new(acs.bx(), 3).unwrap();
        prop_assert!(crsolve::cr_residual(&acs, &f, &grid).unwrap() <= 1e-12);
    }

    #[test]
    fn sequential_and_parallel_sweeps_agree(p in poly(4, 3)) {
        let acs = twisted_r4();
        let grid = SampleGrid::new(acs.bx(), 4).unwrap();
        let f = ScalarField::new(p, acs.bx().clone()).unwrap();
        let par_r = crsolve::cr_residual(&acs, &f, &grid).unwrap();
        let seq_r = par::single_threaded(|| crsolve::cr_residual(&acs, &f, &grid).unwrap());
        prop_assert_eq!(par_r.to_bits(), seq_r.to_bits());
    }

    #[test]
    fn composites_of_almost_holomorphic_maps_stay_almost_holomorphic(
        c0 in coeff(), c1 in coeff(), c2 in coeff(),
    ) {
        let acs = std_c1();
        let small = CoordBox::cube(1, -0.3, 0.3).unwrap();
        let holo = |name: &str, c: [Complex64; 3]| {
            let mut q = Poly::zero(1);
            for (e, ci) in c.iter().enumerate() {
                q.add_term(Monomial(vec![e as u32]), *ci * 0.2);
            }
            q.add_term(Monomial(vec![1]), Complex64::new(1.0, 0.0));
            let (u, v) = holomorphic_in_z(&q, 1).re_im();
            LocalMap::new(name, small.clone(), vec![u, v]).unwrap()
        };
        let f = Arc::new(holo("f", [c0, c1, c2]));
        let g = Arc::new(holo("g", [c2, c0, c1]));
        prop_assert!(check_ah_map(&acs, &f, 5, 1e-12).unwrap().passed());
        if let Ok(fg) = compose(&f, &g, 5) {
            let r = check_ah_map(&acs, &fg, 5, 1e-10).unwrap();
            prop_assert!(r.passed(), "{:?}", r);
        }
    }

    #[test]
    fn map_agreement_is_symmetric(s in 0.0f64..0.5) {
        let bx = CoordBox::cube(1, -1.0, 1.0).unwrap();
        let t = |name: &str, shift: f64| {
            LocalMap::new(name, bx.clone(), vec![Poly::var(2, 0) + Poly::constant(2, shift), Poly::var(2, 1)]).unwrap()
        };
        let tols = Tolerances::default();
        let (a, b) = (t("a", 0.25), t("b", 0.25 + s * 1e-6));
        prop_assert_eq!(maps_agree(&a, &b, 3, &tols), maps_agree(&b, &a, 3, &tols));
        prop_assert!(maps_agree(&a, &a, 3, &tols));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn factorization_recovers_holomorphic_superpositions(p in poly(2, 3)) {
        let acs = Arc::new(std_c2());
        let tols = Tolerances::default();
        let grid = SampleGrid::new(acs.bx(), 5).unwrap();
        let coords: Vec<ScalarField> = (0..2)
            .map(|j| ScalarField::new(Poly::complex_coordinate(4, j), acs.bx().clone()).unwrap())
            .collect();
        let chart = build_spencer_chart(acs.clone(), coords, &grid, &tols).unwrap();
        let h = ScalarField::new(holomorphic_in_z(&p, 2), acs.bx().clone()).unwrap();
        let fac = factorize(&chart, &h, &grid, 3, &tols).unwrap();
        prop_assert!(fac.residual <= 1e-9 * fac.scale.max(1.0), "{} vs scale {}", fac.residual, fac.scale);
    }

    #[test]
    fn chart_determinant_keeps_its_sign(c in coeff()) {
        let acs = Arc::new(std_c1());
        let tols = Tolerances::default();
        let grid = SampleGrid::new(acs.bx(), 5).unwrap();
        // z + c z^2 / 8 has derivative 1 + c z / 4, nonzero on the box.
        let mut q = Poly::zero(1);
        q.add_term(Monomial(vec![1]), Complex64::new(1.0, 0.0));
        q.add_term(Monomial(vec![2]), c / 8.0);
        let f = ScalarField::new(holomorphic_in_z(&q, 1), acs.bx().clone()).unwrap();
        let chart = build_spencer_chart(acs, vec![f], &grid, &tols).unwrap();
        let fine = SampleGrid::new(chart.bx(), 9).unwrap();
        for p in fine.points() {
            let d = chart.jacobian_det(p);
            prop_assert!(d * chart.det_sign() > 0.0);
        }
        for p in grid.points() {
            prop_assert!(chart.jacobian_det(p).abs() >= chart.jacobian_certificate() * (1.0 - 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn spencer_type_is_monotone_in_degree(a in -0.5f64..0.5) {
        // Block structure: standard on (x1, x2), twisted by a constant on (x3, x4).
        let bx = CoordBox::cube(2, -0.5, 0.5).unwrap();
        let c = |v: f64| Poly::constant(4, v);
        let rows = vec![
            vec![c(0.0), c(-1.0), c(0.0), c(0.0)],
            vec![c(1.0), c(0.0), c(0.0), c(0.0)],
            vec![c(0.0), c(0.0), c(-a), c(-1.0)],
            vec![c(0.0), c(0.0), c(a * a + 1.0), c(a)],
        ];
        let acs = AcStructure::new(bx, rows).unwrap();
        let tols = Tolerances::default();
        let mut last = 0;
        for d in 1..=2 {
            let grid = SampleGrid::new(acs.bx(), crsolve::default_points_per_axis(d)).unwrap();
            let m = crsolve::estimate_spencer_type(&acs, &grid, d, &tols).unwrap().m;
            prop_assert!(m >= last && m <= 2);
            last = m;
        }
        prop_assert_eq!(last, 2);
    }
}
