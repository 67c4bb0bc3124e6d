//! Acceptance criteria 1-10, one PASS/FAIL line each (runs without the libtest harness).
//!
//! Criteria whose literal wording cannot hold are still checked as written and listed in
//! `KNOWN_FAILURES`; the test fails if the set of failing criteria differs from that list.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toricstab::abreu::{
    abreu_operator, generalized_abreu_operator, solve_1d, solve_2d, AbreuGrid, Solve1d, Solve2dOptions,
    SymplecticPotential,
};
use toricstab::convexfn::{
    conjugate_at, guillemin_potential, legendre_transform, normal_image_sublevel, truncate, ConvexFunction,
    PlConvexFunction, SmoothFunction, XGrid,
};
use toricstab::destabilizer::{
    boundedness_trace, optimal_destabilizer, truncation_improvement, uniqueness_check,
};
use toricstab::expr::parse_polynomial;
use toricstab::functionals::{extremal_affine, filtration_norm, linear_functional, mabuchi_functional};
use toricstab::geometry::standard::{interval, simplex2, square};
use toricstab::mesh::Mesh;
use toricstab::stability::{check_witness, khat_scan, stability_margin};
use toricstab::{DelzantPolytope, Polynomial};

/// u_h(1) at h = 2 log cosh 1 is 1.1324383 in closed form, 3.9e-4 from the stated value;
/// the rounding gaps for ξ² are monotone only along divisibility chains of k.
const KNOWN_FAILURES: [usize; 2] = [6, 8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn poly(s: &str, n: usize) -> Polynomial {
    parse_polynomial(s, n).unwrap()
}

fn smooth(s: &str, n: usize) -> ConvexFunction {
    SmoothFunction::polynomial(poly(s, n)).into()
}

fn pl(pairs: &[(Vec<f64>, f64)]) -> PlConvexFunction {
    PlConvexFunction::from_pairs(pairs).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let t = start.elapsed();
    if t > limit {
        o.pass = false;
    }
    o.detail = format!("{}; {:.2}s (limit {}s)", o.detail, t.as_secs_f64(), limit.as_secs());
    o
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for (p, a) in [(interval(-1.0, 1.0), poly("1", 1)), (square(), poly("2", 2))] {
        let u = SymplecticPotential::guillemin(&p);
        let g = AbreuGrid::new(&p, 64).unwrap();
        let r = abreu_operator(&u, &g, &a).unwrap();
        worst = worst.max(r.max_residual);
    }
    Outcome { pass: worst <= 1e-10, detail: format!("max residual {worst:.2e}") }
}

fn kappa_target(k: f64) -> Polynomial {
    poly(&format!("1+{k}*(3x^2-1)/2"), 1)
}

fn criterion_2() -> Outcome {
    let iv = interval(-1.0, 1.0);
    let abs = pl(&[(vec![1.0], 0.0), (vec![-1.0], 0.0)]);
    let mut kappas: Vec<f64> = (0..=16).map(|i| 0.5 * i as f64).collect();
    kappas.extend([3.9, 3.99, 4.01, 4.1]);
    kappas.sort_by(f64::total_cmp);
    let mut solve_ok = true;
    let mut witness_err = 0.0f64;
    for &k in &kappas {
        let a = kappa_target(k);
        let solved = matches!(solve_1d(&iv, &a).unwrap(), Solve1d::Solved(_));
        solve_ok &= solved == (k < 4.0);
        let w = check_witness(&iv, &a, None, &abs).unwrap();
        witness_err = witness_err.max((w.report.value - (1.0 - k / 4.0)).abs());
    }
    let margins: Vec<(f64, f64)> = (0..=16)
        .map(|i| 0.5 * i as f64)
        .map(|k| (k, stability_margin(&iv, &kappa_target(k), None, 1.0 / 64.0).unwrap().margin))
        .collect();
    let first_negative = margins.iter().find(|m| m.1 < 0.0).map(|m| m.0);
    let at_four = margins.iter().find(|m| m.0 == 4.0).unwrap().1;
    let bracket = matches!(first_negative, Some(k) if k > 3.5 && k <= 4.5);
    Outcome {
        pass: solve_ok && bracket && at_four.abs() <= 0.01 && witness_err <= 1e-9,
        detail: format!(
            "solve_1d iff kappa<4: {solve_ok}; first negative margin at kappa={first_negative:?}; \
             lambda*(4)={at_four:.2e}; witness error {witness_err:.1e}"
        ),
    }
}

fn criterion_3() -> Outcome {
    let iv = interval(-1.0, 1.0);
    let mut worst = 0.0f64;
    for h in [0.5, 0.125, 0.1, 1.0 / 6.0, 1.0 / 64.0] {
        let r = stability_margin(&iv, &poly("1", 1), None, h).unwrap();
        worst = worst.max((r.margin - 0.5).abs());
    }
    Outcome { pass: worst <= 1e-6, detail: format!("max |lambda* - 1/2| {worst:.1e} over 5 meshes") }
}

fn criterion_4() -> Outcome {
    let iv = interval(-1.0, 1.0);
    let one = poly("1", 1);
    let relu: ConvexFunction = pl(&[(vec![0.0], 0.0), (vec![1.0], 0.0)]).into();
    let sq = smooth("x^2", 1);
    let v: ConvexFunction = guillemin_potential(&iv).into();
    let checks = [
        ("L1(x^2)", linear_functional(&iv, &one, &sq, None).unwrap().value, 4.0 / 3.0),
        ("L1(x+)", linear_functional(&iv, &one, &relu, None).unwrap().value, 0.5),
        ("F1(v)", mabuchi_functional(&iv, &one, &v).unwrap(), 2.0 * 2f64.ln() - 2.0),
        ("|x^2|^2", filtration_norm(&iv, &sq).unwrap(), 8.0 / 45.0),
        ("|x+|^2", filtration_norm(&iv, &relu).unwrap(), 1.0 / 24.0),
        ("a(square)", extremal_affine(&square(), None).unwrap().coeff(&[0, 0]), 2.0),
        ("a(interval)", extremal_affine(&iv, None).unwrap().coeff(&[0]), 1.0),
    ];
    let worst = checks.iter().map(|c| rel(c.1, c.2)).fold(0.0, f64::max);
    let bad: Vec<&str> = checks.iter().filter(|c| rel(c.1, c.2) > 1e-8).map(|c| c.0).collect();
    Outcome { pass: bad.is_empty(), detail: format!("max relative error {worst:.1e}; off: {bad:?}") }
}

fn random_pl(rng: &mut ChaCha8Rng, n: usize) -> ConvexFunction {
    let pieces = rng.gen_range(2..=4);
    let pairs: Vec<(Vec<f64>, f64)> = (0..pieces)
        .map(|_| ((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(), rng.gen_range(-1.0..1.0)))
        .collect();
    pl(&pairs).into()
}

fn random_point(rng: &mut ChaCha8Rng, p: &DelzantPolytope, margin: f64) -> Vec<f64> {
    let (lo, hi) = p.bounding_box();
    loop {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
        if (0..p.facets().len()).all(|i| p.l(i, &x) >= margin) {
            return x;
        }
    }
}

fn gradient_inf(u: &ConvexFunction, x: &[f64]) -> f64 {
    match u {
        ConvexFunction::Smooth(s) => s.gradient(x).iter().fold(0.0, |m, g| m.max(g.abs())),
        _ => 0.0,
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let iv = interval(-1.0, 1.0);
    let sq = square();
    let mut cases: Vec<(DelzantPolytope, ConvexFunction)> = Vec::new();
    for i in 0..20 {
        let p = if i % 2 == 0 { iv.clone() } else { sq.clone() };
        let u = random_pl(&mut rng, p.dim());
        cases.push((p, u));
    }
    cases.push((iv.clone(), smooth("x^2/2", 1)));
    cases.push((sq.clone(), smooth("(x^2+y^2)/2", 2)));
    cases.push((sq.clone(), smooth("(x^2+x*y+y^2)/2", 2)));
    cases.push((iv.clone(), guillemin_potential(&iv).into()));
    cases.push((sq.clone(), guillemin_potential(&sq).into()));

    let box_half = 4.0;
    let mut bicon_ok = true;
    let mut bicon_ratio = 0.0f64;
    let mut outside = 0usize;
    for (p, u) in &cases {
        let count = if p.dim() == 1 { 161 } else { 41 };
        let grid = XGrid::cube(p.dim(), box_half, count);
        let lg = legendre_transform(u, p, &grid).unwrap();
        outside += lg.maximizers.iter().filter(|m| !p.in_closure(m, 1e-12)).count();
        for x in p.sample_points(8) {
            // the grid only reaches slopes inside the box
            if gradient_inf(u, &x) > box_half - 1.0 {
                continue;
            }
            let err = (u.value(&x) - lg.biconjugate(&x)).abs();
            bicon_ratio = bicon_ratio.max(err / grid.spacing());
            bicon_ok &= err <= 2.0 * grid.spacing();
        }
    }

    // f(p) = <p, q - o> - u(q) for p in Du(q)
    let mut identity_err = 0.0f64;
    let mut pairs = 0;
    for i in 0..1000 {
        let (p, u) = &cases[i % cases.len()];
        let q = random_point(&mut rng, p, 1e-3);
        let g = match u {
            ConvexFunction::Smooth(s) => s.gradient(&q),
            _ => u.subgradients(&q)[0].clone(),
        };
        let o = p.center();
        let expect: f64 = g.iter().zip(&q).zip(o).map(|((a, b), c)| a * (b - c)).sum::<f64>() - u.value(&q);
        let (f, _) = conjugate_at(u, p, &g).unwrap();
        identity_err = identity_err.max((f - expect).abs() / (1.0 + expect.abs()));
        pairs += 1;
    }

    // every interior sample point is the maximizer for its own gradient
    let mut covered = 0usize;
    let mut total = 0usize;
    for p in [iv.clone(), sq.clone(), simplex2()] {
        let v: ConvexFunction = guillemin_potential(&p).into();
        let ConvexFunction::Smooth(s) = &v else { unreachable!() };
        for _ in 0..1000 {
            let q = random_point(&mut rng, &p, 1e-4);
            let (_, m) = conjugate_at(&v, &p, &s.gradient(&q)).unwrap();
            total += 1;
            let d = m.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            covered += usize::from(d <= 1e-7);
        }
    }
    let coverage = covered as f64 / total as f64;
    Outcome {
        pass: bicon_ok && identity_err <= 1e-8 && outside == 0 && coverage >= 0.999,
        detail: format!(
            "biconjugation error <= {bicon_ratio:.2} spacings on 25 functions; identity error {identity_err:.1e} \
             on {pairs} pairs; {outside} maximizers outside; coverage {:.2}%",
            100.0 * coverage
        ),
    }
}

fn criterion_6() -> Outcome {
    let iv = interval(-1.0, 1.0);
    let v: ConvexFunction = guillemin_potential(&iv).into();
    let radius_err = (1..=8)
        .map(|h| {
            let h = h as f64;
            let r = normal_image_sublevel(&v, &iv, h, 2).unwrap();
            let exact = (1.0 - (-h).exp()).sqrt();
            (r.r[0] - exact).abs().max((r.r[1] - exact).abs())
        })
        .fold(0.0, f64::max);

    let h = 2.0 * 1f64.cosh().ln();
    let mesh = Arc::new(Mesh::fan_refined(&iv, 1.0 / 64.0).unwrap());
    let t = truncate(&v, &iv, h, 2, mesh).unwrap();
    let r = t.radii.r[0];
    let xs: Vec<f64> = (0..=2000).map(|i| -1.0 + i as f64 / 1000.0).collect();
    let below = xs.iter().all(|&x| t.value(&[x]) <= v.value(&[x]) + 1e-12);
    let equal = xs.iter().filter(|x| x.abs() <= r).all(|&x| (t.value(&[x]) - v.value(&[x])).abs() <= 1e-12);
    let sqp = square();
    let vs: ConvexFunction = guillemin_potential(&sqp).into();
    let sq_mesh = Arc::new(Mesh::fan_refined(&sqp, 0.125).unwrap());
    let ts = truncate(&vs, &sqp, 2.0, 128, sq_mesh).unwrap();
    let below_sq = sqp.sample_points(12).iter().all(|x| ts.value(x) <= vs.value(x) + 1e-12);
    let end = t.value(&[1.0]);
    let end_ok = (end - 1.13283).abs() <= 1e-4;

    let mut instances = 0;
    let mut improved = true;
    let cases: Vec<(DelzantPolytope, Polynomial, Vec<f64>)> = vec![
        (iv.clone(), poly("1", 1), vec![2.0, 3.0, 4.0, 6.0, 8.0]),
        (iv.clone(), poly("1+x/2", 1), vec![4.0, 6.0, 8.0]),
        (sqp.clone(), poly("2", 2), vec![4.0, 6.0]),
    ];
    for (p, a, hs) in cases {
        let u: ConvexFunction = guillemin_potential(&p).into();
        for h in hs {
            let out = truncation_improvement(&p, &a, &u, h).unwrap();
            if out.threshold_met {
                instances += 1;
                improved &= out.before > out.after;
            }
        }
    }
    Outcome {
        pass: radius_err <= 1e-6 && below && below_sq && equal && end_ok && improved && instances > 0,
        detail: format!(
            "radius error {radius_err:.1e}; u_h<=u {}; u_h=u on W_h {equal}; u_h(1)={end:.7} vs 1.13283 \
             (|diff| {:.1e}, tol 1e-4); L_A(u)>L_A(u_h) on {instances} Case-2 instances: {improved}",
            below && below_sq,
            (end - 1.13283).abs()
        ),
    }
}

fn criterion_7() -> Outcome {
    let iv = interval(-1.0, 1.0);
    let a = poly("1+6x", 1);
    let r = optimal_destabilizer(&iv, &a, 1.0 / 64.0, 0).unwrap();
    let corr = uniqueness_check(&iv, &a, 1.0 / 64.0, &[0, 1, 2]).unwrap();
    let trace = boundedness_trace(&iv, &a, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 0).unwrap();
    Outcome {
        pass: r.w <= -3.674 && corr >= 0.99 && trace.bounded && trace.levels.len() == 3,
        detail: format!(
            "W*={:.4}; seed correlation {corr:.6}; trace {:?} bounded {}",
            r.w,
            trace.levels.iter().map(|l| (l.1 * 1e4).round() / 1e4).collect::<Vec<_>>(),
            trace.bounded
        ),
    }
}

/// L_1 of the lower convex envelope of (j/k, ceil(j^2/k)/k), from integers and chords only.
fn envelope_oracle(k: i64) -> f64 {
    let xs: Vec<f64> = (-k..=k).map(|j| j as f64 / k as f64).collect();
    let ys: Vec<f64> = (-k..=k)
        .map(|j| {
            let num = j * j;
            ((num + k - 1).div_euclid(k)) as f64 / k as f64
        })
        .collect();
    let m = xs.len();
    let env: Vec<f64> = (0..m)
        .map(|j| {
            let mut best = ys[j];
            for i in 0..j {
                for l in j + 1..m {
                    let t = (xs[j] - xs[i]) / (xs[l] - xs[i]);
                    best = best.min(ys[i] + t * (ys[l] - ys[i]));
                }
            }
            best
        })
        .collect();
    let integral: f64 = (0..m - 1).map(|j| 0.5 * (env[j] + env[j + 1]) * (xs[j + 1] - xs[j])).sum();
    env[0] + env[m - 1] - integral
}

fn criterion_8() -> Outcome {
    let iv = interval(-1.0, 1.0);
    let scan = khat_scan(&iv, &poly("1", 1), &smooth("x^2", 1), 32).unwrap();
    let reference_ok = (scan.reference.value - 4.0 / 3.0).abs() <= 1e-12;
    let oracle_err = scan
        .rows
        .iter()
        .map(|r| (r.report.value - envelope_oracle(r.k as i64)).abs())
        .fold(0.0, f64::max);
    let gap = |k: u64| scan.rows.iter().find(|r| r.k == k).unwrap().gap;
    let from_four: Vec<&_> = scan.rows.iter().filter(|r| r.k >= 4).collect();
    let violations: Vec<u64> = from_four
        .windows(2)
        .filter(|w| w[1].gap > w[0].gap + 1e-12)
        .map(|w| w[1].k)
        .collect();
    let dyadic = [4, 8, 16, 32].windows(2).all(|w| gap(w[1]) <= gap(w[0]) + 1e-12);
    Outcome {
        pass: reference_ok && oracle_err <= 1e-10 && violations.is_empty() && gap(32) <= 0.02,
        detail: format!(
            "oracle error {oracle_err:.1e}; gap(32)={:.4}; consecutive k>=4 increases at k={violations:?}; \
             dyadic chain 4,8,16,32 monotone: {dyadic}",
            gap(32)
        ),
    }
}

fn criterion_9() -> Outcome {
    let mut bitwise = true;
    let cases = [
        (interval(-1.0, 1.0), poly("1+x^2", 1), poly("1", 1), 1.0 / 32.0),
        (square(), poly("2+x*y", 2), poly("1", 2), 0.25),
    ];
    for (p, a, one, h) in &cases {
        let plain = stability_margin(p, a, None, *h).unwrap();
        let weighted = stability_margin(p, a, Some(one), *h).unwrap();
        bitwise &= plain.margin.to_bits() == weighted.margin.to_bits()
            && plain.witness.values() == weighted.witness.values();
        let u = pl(&vec![(vec![1.0; p.dim()], 0.0), (vec![-0.5; p.dim()], 0.1)]);
        let w0 = check_witness(p, a, None, &u).unwrap();
        let w1 = check_witness(p, a, Some(one), &u).unwrap();
        bitwise &= w0.report == w1.report;
        let v = SymplecticPotential::guillemin(p);
        let g = AbreuGrid::new(p, 32).unwrap();
        let s0 = abreu_operator(&v, &g, a).unwrap();
        let s1 = generalized_abreu_operator(&v, &g, a, one).unwrap();
        bitwise &= s0.values.iter().zip(&s1.values).all(|(x, y)| x.to_bits() == y.to_bits());
    }
    let iv = interval(-1.0, 1.0);
    let v = SymplecticPotential::guillemin(&iv);
    let g = AbreuGrid::new(&iv, 64).unwrap();
    let d = poly("1+x/2", 1);
    let s = generalized_abreu_operator(&v, &g, &poly("1", 1), &d).unwrap();
    let err = s
        .nodes
        .iter()
        .zip(&s.values)
        .map(|(x, s)| (s - (1.0 + 1.5 * x[0]) / (1.0 + 0.5 * x[0])).abs())
        .fold(0.0, f64::max);
    Outcome {
        pass: bitwise && err <= 1e-10,
        detail: format!("unit weight bitwise: {bitwise}; weighted operator error {err:.1e} at {} nodes", s.nodes.len()),
    }
}

fn criterion_10() -> Outcome {
    let sq = square();
    let s = solve_2d(&sq, &poly("2", 2), &Solve2dOptions::default()).unwrap();
    let phi_sup = sq.sample_points(16).iter().map(|x| s.phi_polynomial.eval(x).abs()).fold(0.0, f64::max);
    let a = poly("2+0.05*(3x^2-1)", 2);
    let p = solve_2d(&sq, &a, &Solve2dOptions::default()).unwrap();
    let residual = if p.converged {
        abreu_operator(&p.potential, &AbreuGrid::new(&sq, 64).unwrap(), &a).unwrap().max_residual
    } else {
        f64::INFINITY
    };
    Outcome {
        pass: s.converged && s.max_residual <= 1e-8 && phi_sup <= 1e-6 && p.converged && residual <= 1e-4,
        detail: format!(
            "constant target: converged {} residual {:.1e} |phi| {phi_sup:.1e}; perturbed: converged {} \
             residual on 64x64 {residual:.1e}",
            s.converged, s.max_residual, p.converged
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let criteria: Vec<(usize, Duration, fn() -> Outcome)> = vec![
        (1, secs(1), criterion_1),
        (2, secs(30), criterion_2),
        (3, secs(5), criterion_3),
        (4, secs(1), criterion_4),
        (5, secs(60), criterion_5),
        (6, secs(30), criterion_6),
        (7, secs(120), criterion_7),
        (8, secs(10), criterion_8),
        (9, secs(5), criterion_9),
        (10, secs(600), criterion_10),
    ];
    let mut failed = Vec::new();
    for (n, limit, f) in criteria {
        let o = timed(limit, f);
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_FAILURES.contains(&n) { " [recorded deviation]" } else { "" };
        println!("criterion {n:>2}: {status}{note} ({})", o.detail);
        if !o.pass {
            failed.push(n);
        }
    }
    if failed != KNOWN_FAILURES {
        eprintln!("failing criteria {failed:?} differ from the recorded ones {KNOWN_FAILURES:?}");
        std::process::exit(1);
    }
}
