//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semialg::algebra::{f64_to_rational, pullback, pullback_with_jacobian, subsets, DifferentialForm, Polynomial, SmoothMap};
use semialg::integrate::{compare_triangulations, fundamental_chain, integrate, integrate_chain, stokes_residual, QuadratureRule};
use semialg::measure::{grid_measure, grid_measure_sequence};
use semialg::mesh::{boundary_chain, Chain};
use semialg::panelbeat::demos::{run_demo, DemoOptions, Example};
use semialg::panelbeat::{
    apply_chi, default_schedule, estimate_growth_exponent, select_eta, EtaProfile, TubeChart,
};
use semialg::report::to_json;
use semialg::saset::{BoundingBox, Formula, Relation, SaSet};
use semialg::triangulate::{common_refinement, triangulate, triangulate_with, TriangulateOptions};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

fn set(m: usize, leaves: &[(&str, Relation)], lo: Vec<f64>, hi: Vec<f64>) -> SaSet {
    let f = Formula::and(
        leaves
            .iter()
            .map(|(p, r)| Formula::leaf(Polynomial::parse(p, m).unwrap(), *r).unwrap())
            .collect(),
    );
    SaSet::new(m, f).unwrap().with_box(BoundingBox::new(lo, hi).unwrap()).unwrap()
}

fn disk() -> SaSet {
    set(2, &[("x^2 + y^2 - 1", Relation::Le)], vec![-1.0, -1.0], vec![1.0, 1.0])
}

fn form(terms: &[(&str, &[usize])], ambient: usize, degree: usize) -> DifferentialForm {
    DifferentialForm::from_terms(
        degree,
        ambient,
        terms
            .iter()
            .map(|(c, dx)| (Polynomial::parse(c, ambient).unwrap(), dx.to_vec())),
    )
    .unwrap()
}

fn area_form() -> DifferentialForm {
    form(&[("1", &[0, 1])], 2, 2)
}

fn criterion_1() -> Check {
    let mut errs = Vec::new();
    for depth in 4..=6 {
        let b = triangulate(&disk(), depth)?;
        let r = integrate(&area_form(), &b, 4)?;
        errs.push((r.value - PI).abs());
    }
    let ok = errs[2] < 5e-3 && errs[0] > errs[1] && errs[1] > errs[2];
    Ok((ok, format!("|I - pi| at depth 4,5,6 = {:.3e}, {:.3e}, {:.3e}", errs[0], errs[1], errs[2])))
}

fn criterion_2() -> Check {
    let b = triangulate(&disk(), 6)?;
    let mu = fundamental_chain(&b)?;
    let disk_res = stokes_residual(&form(&[("x", &[1])], 2, 1), &b, &mu, 4)?.residual;

    let interval = set(1, &[("x", Relation::Ge), ("1 - x", Relation::Ge)], vec![0.0], vec![1.0]);
    let bi = triangulate(&interval, 4)?;
    let g = DifferentialForm::function(Polynomial::parse("x", 1)?);
    let int_res = stokes_residual(&g, &bi, &fundamental_chain(&bi)?, 4)?.residual;

    let annulus = set(
        2,
        &[("x^2 + y^2 - 1/4", Relation::Ge), ("x^2 + y^2 - 1", Relation::Le)],
        vec![-1.0, -1.0],
        vec![1.0, 1.0],
    );
    let ba = triangulate(&annulus, 6)?;
    let w = form(&[("-y", &[0]), ("x", &[1])], 2, 1);
    let s = stokes_residual(&w, &ba, &fundamental_chain(&ba)?, 4)?;
    let ok = disk_res < 5e-3 && int_res < 1e-12 && s.residual < 1e-2;
    Ok((
        ok,
        format!(
            "residual disk {disk_res:.3e}, interval {int_res:.3e}, annulus {:.3e} (d-side {:.5}, 3pi/2 = {:.5})",
            s.residual,
            s.interior.value,
            1.5 * PI
        ),
    ))
}

fn criterion_3() -> Check {
    let a = triangulate(&disk(), 5)?;
    let b = triangulate_with(
        &disk(),
        &TriangulateOptions {
            depth: 5,
            shift: vec![0.37, 0.21],
            family: Vec::new(),
        },
    )?;
    let c = compare_triangulations(&area_form(), &a, &b, 4, Some(0))?;
    let r = c.refined.as_ref().map(|r| r.value).unwrap_or(f64::NAN);
    let (lo, hi) = (c.first.value.min(c.second.value), c.first.value.max(c.second.value));
    let tol = 1e-2;
    let ok = c.delta < tol && r >= lo - tol && r <= hi + tol;
    // the refinement must also be a genuine refinement of both inputs
    let refined = common_refinement(&a, &b, 0)?;
    let viol = semialg::triangulate::verify_refinement(&refined, &a, &b);
    Ok((
        ok && viol < 1e-6,
        format!(
            "I1 {:.6}, I2 {:.6}, delta {:.3e}, common refinement {:.6}, barycentric violation {:.1e}",
            c.first.value, c.second.value, c.delta, r, viol
        ),
    ))
}

fn criterion_4() -> Check {
    let auto = run_demo(Example::Sqrt, &DemoOptions::default())?;
    let fixed = run_demo(
        Example::Sqrt,
        &DemoOptions {
            r: Some(2.5),
            ..Default::default()
        },
    )?;
    let alpha = auto.estimate.alpha;
    let decreasing = fixed
        .beaten
        .probes
        .iter()
        .all(|p| p.radial.windows(2).all(|w| w[1] < w[0]));
    let ok = (0.45..=0.55).contains(&alpha) && fixed.beaten.pass && decreasing && !fixed.unbeaten.pass;
    let trace: Vec<String> = fixed
        .beaten
        .probes
        .first()
        .map(|p| p.radial.iter().map(|v| format!("{v:.2e}")).collect())
        .unwrap_or_default();
    Ok((
        ok,
        format!(
            "alpha {alpha:.4} (selected r {:.4}); r = 2.5 beaten pass {} with radial quotients [{}]; unbeaten pass {}",
            auto.eta.r,
            fixed.beaten.pass,
            trace.join(", "),
            fixed.unbeaten.pass
        ),
    ))
}

fn criterion_5() -> Check {
    let r = run_demo(
        Example::Abs,
        &DemoOptions {
            r: Some(2.5),
            ..Default::default()
        },
    )?;
    let dev = r.beaten.max_tangential_off_bad_set;
    let ok = dev < 1e-6 && r.beaten.pass_excluding_bad_set;
    Ok((
        ok,
        format!(
            "max tangential deviation off bad set {dev:.2e} over {} probes, bad set size {}",
            r.beaten.probes.len(),
            r.beaten.bad_set.len()
        ),
    ))
}

fn barycentric(verts: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let p = verts.len() - 1;
    let a = DMatrix::from_fn(p, p, |r, c| verts[c + 1][r] - verts[0][r]);
    let rhs = nalgebra::DVector::from_fn(p, |r, _| x[r] - verts[0][r]);
    let lam = a.lu().solve(&rhs).expect("nondegenerate simplex");
    let mut out = vec![1.0 - lam.sum()];
    out.extend(lam.iter());
    out
}

fn criterion_6() -> Check {
    let eta = EtaProfile::new(2.5, 0.25)?;
    let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.4, 0.8]];
    let tet = vec![
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    let cases: Vec<(&str, Vec<Vec<f64>>, TubeChart)> = vec![
        ("triangle, vertex tube", tri.clone(), TubeChart::point(tri[0].clone(), 1.0)?),
        (
            "triangle, edge tube",
            tri.clone(),
            TubeChart::affine(vec![0.0, 0.0], vec![vec![1.0, 0.0]], vec![(0.0, 1.0)], 1.0)?,
        ),
        ("tetrahedron, vertex tube", tet.clone(), TubeChart::point(tet[2].clone(), 1.2)?),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    let mut moved = 0;
    for (_, verts, tube) in &cases {
        for _ in 0..1000 {
            let w: Vec<f64> = (0..verts.len()).map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln()).collect();
            let s: f64 = w.iter().sum();
            let x: Vec<f64> = (0..verts[0].len())
                .map(|k| verts.iter().zip(&w).map(|(v, wi)| v[k] * wi / s).sum())
                .collect();
            let y = apply_chi(tube, &eta, &x);
            if y != x {
                moved += 1;
            }
            let lam = barycentric(verts, &y);
            worst = worst.max(-lam.iter().cloned().fold(f64::INFINITY, f64::min));
        }
    }
    Ok((
        worst <= 1e-9,
        format!("{} simplices x 1000 points, {moved} moved, worst barycentric violation {worst:.1e}", cases.len()),
    ))
}

fn criterion_7() -> Check {
    let tube = TubeChart::affine(vec![0.0, 0.0], vec![vec![1.0, 0.0]], vec![(-1.0, 1.0)], 1.0)?;
    let maps: [(&str, fn(f64) -> f64); 3] = [("sqrt|u|", |u| u.abs().sqrt()), ("u", |u| u), ("u^2", |u| u * u)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, h) in maps {
        let f = SmoothMap::new(2, 2, move |y| vec![y[0], h(y[1])]);
        let est = estimate_growth_exponent(&f, &tube, &default_schedule())?;
        let eta = select_eta(&est, 0.5)?;
        ok &= eta.r > 1.0 / est.alpha_lower() && eta.r > 1.0;
        parts.push(format!("{name}: alpha {:.4} r {:.4}", est.alpha, eta.r));
    }
    Ok((ok, parts.join("; ")))
}

fn criterion_8() -> Check {
    let square = set(
        2,
        &[("x", Relation::Ge), ("1 - x", Relation::Ge), ("y", Relation::Ge), ("1 - y", Relation::Ge)],
        vec![0.0, 0.0],
        vec![1.0, 1.0],
    );
    let mut ok = true;
    for n in 1..=64 {
        let g = grid_measure(&square, 2, n)?;
        ok &= g.v_optimistic == 2.0 && g.v_pessimistic == 2.0;
    }
    let l = 2.5;
    let segment = set(
        2,
        &[("y", Relation::Eq), ("x", Relation::Ge), ("5/2 - x", Relation::Ge)],
        vec![0.0, 0.0],
        vec![l, l],
    );
    let target = 2f64.sqrt() * l;
    for n in 1..=64 {
        let g = grid_measure(&segment, 1, n)?;
        ok &= g.v_optimistic == target && g.v_pessimistic == target;
    }
    let ns = [8, 16, 32, 64];
    let disk_report = grid_measure_sequence(&disk(), 2, &ns)?;
    let v64 = disk_report.rows.last().map(|r| r.v_pessimistic).unwrap_or(f64::NAN);
    ok &= (v64 - 2.0 * PI).abs() < 0.1 * 2.0 * PI;
    let annulus = set(
        2,
        &[("x^2 + y^2 - 1/4", Relation::Ge), ("x^2 + y^2 - 1", Relation::Le)],
        vec![-1.0, -1.0],
        vec![1.0, 1.0],
    );
    let circle = set(2, &[("x^2 + y^2 - 1", Relation::Eq)], vec![-1.0, -1.0], vec![1.0, 1.0]);
    let mut bounded = disk_report.bounded;
    for (s, d) in [(&square, 2), (&segment, 1), (&annulus, 2), (&circle, 1)] {
        bounded &= grid_measure_sequence(s, d, &ns)?.bounded;
    }
    ok &= bounded;
    Ok((
        ok,
        format!("square 2 and segment sqrt(2)L exact for n = 1..64; disk v_64 = {v64:.4} (2pi = {:.4}); all sequences bounded: {bounded}", 2.0 * PI),
    ))
}

fn random_poly(rng: &mut ChaCha8Rng, m: usize) -> Polynomial {
    let names = ["x", "y", "z"];
    let mut terms = Vec::new();
    for _ in 0..3 {
        let c = rng.gen_range(-5i32..=5);
        let mut t = format!("{c}");
        for name in names.iter().take(m) {
            let e = rng.gen_range(0..3);
            if e > 0 {
                t.push_str(&format!("*{name}^{e}"));
            }
        }
        terms.push(t);
    }
    Polynomial::parse(&terms.join(" + "), m).unwrap()
}

fn criterion_9() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;

    // boundary of boundary, on every chain of a 3D mesh and random 2D chains
    let ball = set(3, &[("x^2 + y^2 + z^2 - 1", Relation::Le)], vec![-1.0; 3], vec![1.0; 3]);
    let b3 = triangulate(&ball, 2)?;
    let all = Chain::all(&b3.complex, 3);
    let dd = boundary_chain(&b3.complex, &boundary_chain(&b3.complex, &all));
    ok &= dd.is_zero();
    let b2 = triangulate(&disk(), 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let c = Chain::from_pairs(2, (0..b2.complex.num_simplices(2)).map(|i| (i, rng.gen_range(-3..=3))));
        ok &= boundary_chain(&b2.complex, &boundary_chain(&b2.complex, &c)).is_zero();
    }
    notes.push("ddc = 0 on 51 chains".to_string());

    // d∘d = 0 on random forms of every degree in R^3
    let mut dd_ok = true;
    for deg in 0..=3 {
        for _ in 0..10 {
            let terms: Vec<(Polynomial, Vec<usize>)> = subsets(3, deg)
                .into_iter()
                .map(|idx| (random_poly(&mut rng, 3), idx))
                .collect();
            let w = DifferentialForm::from_terms(deg, 3, terms)?;
            dd_ok &= w.exterior_derivative().exterior_derivative().is_zero();
        }
    }
    ok &= dd_ok;
    notes.push(format!("dd = 0: {dd_ok}"));

    // (G∘F)^* ω = F^*(G^* ω) at sample points
    let f = SmoothMap::polynomial(vec![
        Polynomial::parse("x + y^2", 2)?,
        Polynomial::parse("x*y - 1", 2)?,
        Polynomial::parse("y^3 + x", 2)?,
    ])?;
    let g = SmoothMap::polynomial(vec![
        Polynomial::parse("x*z + y", 3)?,
        Polynomial::parse("y^2 - z", 3)?,
        Polynomial::parse("x + y + z^2", 3)?,
    ])?;
    let gf = SmoothMap::compose(&g, &f)?;
    let mut worst: f64 = 0.0;
    for deg in 0..=2 {
        let terms: Vec<(Polynomial, Vec<usize>)> = subsets(3, deg)
            .into_iter()
            .map(|idx| (random_poly(&mut rng, 3), idx))
            .collect();
        let w = DifferentialForm::from_terms(deg, 3, terms)?;
        for _ in 0..20 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let direct = pullback(&w, &gf, &x)?;
            let y = f.eval(&x)?;
            let gw = pullback(&w, &g, &y)?;
            // G^*ω at y as a constant form, then pulled through J_F(x)
            let constant = DifferentialForm::from_terms(
                deg,
                3,
                gw.coefficients
                    .iter()
                    .map(|(idx, v)| (Polynomial::constant(3, f64_to_rational(*v)), idx.clone())),
            )?;
            let two_step = if deg == 0 {
                gw.clone()
            } else {
                pullback_with_jacobian(&constant, &y, &f.jacobian(&x)?.matrix)
            };
            let scale = 1.0 + direct.coefficients.values().fold(0.0f64, |a, v| a.max(v.abs()));
            worst = worst.max(direct.max_abs_diff(&two_step) / scale);
        }
    }
    ok &= worst < 1e-9;
    notes.push(format!("functoriality {worst:.1e}"));

    // quadrature rules exact to their declared degree
    let mut rules = 0;
    for dim in 0..=3 {
        for degree in 0..=8 {
            QuadratureRule::new(dim, degree)?.verify()?;
            rules += 1;
        }
    }
    notes.push(format!("{rules} quadrature rules exact"));

    // byte-identical reports across reruns
    let run = || -> Result<String, Box<dyn std::error::Error>> {
        let b = triangulate(&disk(), 4)?;
        let mu = fundamental_chain(&b)?;
        let r = integrate_chain(&area_form(), &b, &mu, 4)?;
        Ok(to_json("integral", &r)? + &b.complex.num_simplices(2).to_string())
    };
    let same = run()? == run()?;
    let demo = |_: ()| -> Result<String, Box<dyn std::error::Error>> {
        Ok(to_json("demo", &run_demo(Example::Cusp, &DemoOptions::default())?)?)
    };
    let same = same && demo(())? == demo(())?;
    ok &= same;
    notes.push(format!("reruns identical: {same}"));
    Ok((ok, notes.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("disk area", criterion_1),
        ("Stokes residuals", criterion_2),
        ("triangulation independence", criterion_3),
        ("radial flattening of sqrt", criterion_4),
        ("tangential derivatives preserved", criterion_5),
        ("simplex preservation", criterion_6),
        ("exponent rule", criterion_7),
        ("grid measure", criterion_8),
        ("structural identities", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({detail}) [{:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
