use nalgebra::DMatrix;
use num_rational::BigRational;
use proptest::prelude::*;

use semialg::algebra::{pullback, pullback_with_jacobian, subsets, DifferentialForm, Polynomial, SmoothMap};
use semialg::integrate::QuadratureRule;
use semialg::mesh::{boundary_chain, Chain};
use semialg::saset::{BoundingBox, Formula, Relation, SaSet};
use semialg::triangulate::triangulate;

fn poly(m: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0u32..3, m), -4i64..=4), 0..4).prop_map(move |terms| {
        Polynomial::from_terms(m, terms.into_iter().map(|(e, c)| (e, BigRational::from_integer(c.into())))).unwrap()
    })
}

fn form(m: usize, deg: usize) -> impl Strategy<Value = DifferentialForm> {
    let n = subsets(m, deg).len();
    prop::collection::vec(poly(m), n).prop_map(move |cs| {
        DifferentialForm::from_terms(deg, m, cs.into_iter().zip(subsets(m, deg))).unwrap()
    })
}

fn any_form() -> impl Strategy<Value = DifferentialForm> {
    (1usize..=4).prop_flat_map(|m| (0..=m).prop_flat_map(move |d| form(m, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exterior_derivative_squares_to_zero(w in any_form()) {
        prop_assert!(w.exterior_derivative().exterior_derivative().is_zero());
    }

    #[test]
    fn pullback_is_functorial(
        w in form(2, 1),
        a in prop::collection::vec(-2.0f64..2.0, 4),
        b in prop::collection::vec(-2.0f64..2.0, 4),
        x in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        // two nonlinear maps R^2 -> R^2
        let (a, b) = (<[f64; 4]>::try_from(a).unwrap(), <[f64; 4]>::try_from(b).unwrap());
        let f = SmoothMap::new(2, 2, move |p| vec![a[0] * p[0] + a[1] * p[1].sin(), a[2] * p[0] * p[1] + a[3]])
            .with_jacobian(move |p| Some(DMatrix::from_row_slice(2, 2, &[a[0], a[1] * p[1].cos(), a[2] * p[1], a[2] * p[0]])));
        let g = SmoothMap::new(2, 2, move |p| vec![b[0] * p[0] * p[0] + b[1] * p[1], b[2] * p[0] + b[3] * p[1]])
            .with_jacobian(move |p| Some(DMatrix::from_row_slice(2, 2, &[2.0 * b[0] * p[0], b[1], b[2], b[3]])));
        let gf = SmoothMap::compose(&g, &f).unwrap();
        let direct = pullback(&w, &gf, &x).unwrap();
        let y = f.eval(&x).unwrap();
        let gy = g.eval(&y).unwrap();
        let jac = g.jacobian(&y).unwrap().matrix * f.jacobian(&x).unwrap().matrix;
        let chained = pullback_with_jacobian(&w, &gy, &jac);
        let scale = 1.0 + direct.coefficients.values().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(direct.max_abs_diff(&chained) / scale < 1e-9);
    }

    #[test]
    fn quadrature_integrates_monomials(dim in 1usize..=3, degree in 0u32..=6, e in prop::collection::vec(0u32..=6, 4)) {
        let rule = QuadratureRule::new(dim, degree).unwrap();
        // exponents over the dim+1 barycentric coordinates with total <= degree
        let mut exps: Vec<u32> = e[..=dim].to_vec();
        while exps.iter().sum::<u32>() > degree {
            let i = exps.iter().position(|&v| v > 0).unwrap();
            exps[i] -= 1;
        }
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let total: u32 = exps.iter().sum();
        let exact = exps.iter().map(|&a| fact(a)).product::<f64>() / fact(total + dim as u32);
        let got: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(n, w)| w * n.iter().zip(&exps).map(|(l, &a)| l.powi(a as i32)).product::<f64>())
            .sum();
        prop_assert!((got - exact).abs() < 1e-12, "{got} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn boundary_of_boundary_vanishes(coeffs in prop::collection::vec(-5i64..=5, 1..200), r2 in 0.3f64..0.95) {
        let p = Polynomial::parse("x^2 + y^2", 2).unwrap();
        let p = &p + &Polynomial::constant(2, semialg::algebra::f64_to_rational(-r2));
        let s = SaSet::new(2, Formula::leaf(p, Relation::Le).unwrap())
            .unwrap()
            .with_box(BoundingBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap())
            .unwrap();
        let b = triangulate(&s, 3).unwrap();
        let n = b.complex.num_simplices(2);
        let c = Chain::from_pairs(2, coeffs.iter().enumerate().map(|(i, &k)| (i % n, k)));
        prop_assert!(boundary_chain(&b.complex, &boundary_chain(&b.complex, &c)).is_zero());
    }
}
