//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::time::Instant;

use specdens::kernel::OrthonormalSystem;
use specdens::limit_density::{
    arcsine_cf, arcsine_cf_exact, closed_form_density, ode_density, verify_ode, ClosedForm, DensityModel,
    DENSITY_TOL,
};
use specdens::moments::{
    carleman_partial_sum, finite_moments, hankel_positive, lambda_det, laurent_moment, limit_moment,
    limit_moments, moment_convergence_report,
};
use specdens::perturbation::{perturbation_convergence_report, theta_diagnostic, PerturbationSpec};
use specdens::quadrature::{gauss_rule, integrate};
use specdens::recurrence::{classical_recurrence, default_quad_order, jacobi_matrix, stieltjes_recurrence};
use specdens::scaling::{scaling_model, ScalingModel};
use specdens::special::gamma;
use specdens::weights::WeightSpec;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn model(lambda: f64, b: f64) -> ScalingModel {
    ScalingModel::new(lambda, b, 1.0).unwrap()
}

const TEST_POINTS: [(f64, f64); 4] = [(0.5, 0.0), (1.0, 1.0), (1.0 / 3.0, 0.0), (0.0, 0.0)];

fn exact_finite_moments() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [10usize, 100, 1000] {
        let start = Instant::now();
        let w = WeightSpec::hermite();
        let s = scaling_model(&w).unwrap();
        let t = classical_recurrence(&w, n + 4).map_err(|e| e.to_string())?;
        let m = finite_moments(&t, &s, n, 4).map_err(|e| e.to_string())?;
        let e2 = (m.values[2] - 0.25).abs();
        let e4 = (m.values[4] - (0.125 + 1.0 / (16.0 * (n * n) as f64))).abs();
        ensure(e2 <= 1e-13, || format!("Hermite M_2 at N={n} off by {e2:e}"))?;
        ensure(e4 <= 1e-12, || format!("Hermite M_4 at N={n} off by {e4:e}"))?;

        let w = WeightSpec::laguerre(0.0).unwrap();
        let s = scaling_model(&w).unwrap();
        let t = classical_recurrence(&w, n + 1).map_err(|e| e.to_string())?;
        let m1 = finite_moments(&t, &s, n, 1).map_err(|e| e.to_string())?.values[1];
        let e1 = (m1 - 0.5).abs();
        ensure(e1 <= 1e-13, || format!("Laguerre M_1 at N={n} off by {e1:e}"))?;
        let secs = start.elapsed().as_secs_f64();
        ensure(secs < 1.0, || format!("N={n} took {secs:.2} s"))?;
        worst = worst.max(e2).max(e4).max(e1);
    }
    Ok(format!("largest deviation {worst:e}"))
}

fn moment_convergence() -> Outcome {
    let start = Instant::now();
    let n_list = [25, 50, 100, 200];
    let mut summary = Vec::new();
    for (name, w) in [
        ("hermite", WeightSpec::hermite()),
        ("laguerre(0)", WeightSpec::laguerre(0.0).unwrap()),
        ("jacobi(0,0)", WeightSpec::jacobi(0.0, 0.0).unwrap()),
    ] {
        let s = scaling_model(&w).unwrap();
        let t = classical_recurrence(&w, 208).map_err(|e| e.to_string())?;
        let report = moment_convergence_report(&t, &s, &n_list, 8).map_err(|e| e.to_string())?;
        let errs: Vec<f64> = n_list.iter().map(|&n| report.max_error(n).unwrap()).collect();
        ensure(errs.windows(2).all(|p| p[1] < p[0]), || format!("{name} not decreasing: {errs:?}"))?;
        ensure(errs[3] <= 0.05, || format!("{name} error {:.4} at N=200", errs[3]))?;
        summary.push(format!("{name} {:.4}", errs[3]));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("max error at N=200: {}", summary.join(", ")))
}

fn laurent_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (lambda, b) in TEST_POINTS {
        let s = model(lambda, b);
        for k in 0..=12 {
            let m = limit_moment(&s, k);
            let rel = (laurent_moment(&s, k) - m).abs() / m.abs().max(1.0);
            ensure(rel <= 1e-13, || format!("({lambda}, {b}) k={k}: {rel:e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("largest relative gap {worst:e}"))
}

fn closed_forms() -> Vec<(ClosedForm, f64)> {
    let mut out = Vec::new();
    for i in 1..=3 {
        out.push((ClosedForm::EvenReciprocal { m: i }, 0.0));
        out.push((ClosedForm::OddReciprocal { m: i }, 0.0));
    }
    for q in 0..=3 {
        out.push((ClosedForm::ShiftedInteger { q }, 1.0));
        out.push((ClosedForm::ShiftedHalfInteger { q }, 1.0));
    }
    out
}

// Grid of step 0.01 at least 0.1 away from the support ends and from the
// points 0, b - 1, b + 1.
fn interior_grid(model: &DensityModel) -> Vec<f64> {
    let [lo, hi] = model.support;
    let avoid = [0.0, model.b - 1.0, model.b + 1.0];
    let steps = ((hi - lo) / 0.01).round() as usize;
    (0..=steps)
        .map(|i| lo + i as f64 * 0.01)
        .filter(|x| *x >= lo + 0.1 && *x <= hi - 0.1 && avoid.iter().all(|c| (x - c).abs() >= 0.1))
        .collect()
}

fn closed_form_checks() -> Outcome {
    let (mut mass_err, mut moment_err, mut residual): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (form, b) in closed_forms() {
        let m = DensityModel::new(form.lambda(), b).map_err(|e| format!("{form:?}: {e}"))?;
        let mass = m.mass().map_err(|e| format!("{form:?}: {e}"))?;
        ensure((mass - 1.0).abs() <= 1e-8, || format!("{form:?} mass {mass}"))?;
        mass_err = mass_err.max((mass - 1.0).abs());
        let s = model(form.lambda(), b);
        for k in 0..=6u32 {
            let got = m.moment(k).map_err(|e| format!("{form:?}: {e}"))?;
            let exact = limit_moment(&s, k as usize);
            ensure((got - exact).abs() <= 1e-6, || format!("{form:?} k={k}: {got} vs {exact}"))?;
            moment_err = moment_err.max((got - exact).abs());
        }
        let grid = interior_grid(&m);
        let check = verify_ode(&m, &grid, 1e-4).map_err(|e| format!("{form:?}: {e}"))?;
        ensure(check.max_residual <= 1e-6, || format!("{form:?} ODE residual {:e}", check.max_residual))?;
        residual = residual.max(check.max_residual);
    }
    let sc = DensityModel::new(0.5, 0.0).unwrap().density(0.0).map_err(|e| e.to_string())?;
    ensure((sc - 2.0 / PI).abs() <= 1e-12, || format!("semicircle at 0: {sc}"))?;
    let mp = DensityModel::new(1.0, 1.0).unwrap().density(1.0).map_err(|e| e.to_string())?;
    ensure((mp - 1.0 / PI).abs() <= 1e-12, || format!("Marchenko-Pastur at 1: {mp}"))?;
    Ok(format!(
        "{} forms; mass err {mass_err:.1e}, moment err {moment_err:.1e}, ODE residual {residual:.1e}",
        closed_forms().len()
    ))
}

fn ode_cross_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for (form, b, probes) in [
        (ClosedForm::EvenReciprocal { m: 1 }, 0.0, [-0.8, -0.4, 0.1, 0.5, 0.9]),
        (ClosedForm::ShiftedInteger { q: 0 }, 1.0, [0.2, 0.5, 1.0, 1.5, 1.9]),
    ] {
        for x in probes {
            let exact = closed_form_density(form, b, x).map_err(|e| e.to_string())?;
            let ode = ode_density(form.lambda(), b, x, DENSITY_TOL).map_err(|e| e.to_string())?;
            ensure((ode - exact).abs() <= 1e-8, || format!("{form:?} x={x}: {ode} vs {exact}"))?;
            worst = worst.max((ode - exact).abs());
        }
    }
    let c = ode_density(1.0, 3.0, 1.0, DENSITY_TOL).map_err(|e| e.to_string())?;
    for x in [0.1, 0.5, 1.3, 1.9, 1.999] {
        let v = ode_density(1.0, 3.0, x, DENSITY_TOL).map_err(|e| e.to_string())?;
        ensure((v - c).abs() <= 1e-8, || format!("(1, 3) branch not constant: {v} at {x} vs {c}"))?;
    }
    // the right branch rises like sqrt(x - 2); extrapolate its limit in sqrt(eps)
    let (e1, e2) = (1e-10f64, 1e-12f64);
    let r1 = ode_density(1.0, 3.0, 2.0 + e1, DENSITY_TOL).map_err(|e| e.to_string())?;
    let r2 = ode_density(1.0, 3.0, 2.0 + e2, DENSITY_TOL).map_err(|e| e.to_string())?;
    let right = (r2 * e1.sqrt() - r1 * e2.sqrt()) / (e1.sqrt() - e2.sqrt());
    ensure((right - c).abs() <= 1e-8, || format!("jump at x=2: {right} vs {c}"))?;
    Ok(format!("probe error {worst:.1e}; (1, 3) constant {c:.12} with jump {:.1e}", (right - c).abs()))
}

fn semicircle_deviation(n: usize) -> Result<f64, String> {
    let w = WeightSpec::hermite();
    let s = scaling_model(&w).unwrap();
    let sys = OrthonormalSystem::new(w.clone(), classical_recurrence(&w, n + 1).map_err(|e| e.to_string())?);
    let mut total = 0.0;
    for i in 0..=100 {
        let x = -0.9 + 1.8 * i as f64 / 100.0;
        let sigma = sys.sigma(x, n, &s).map_err(|e| e.to_string())?;
        total += (sigma - 2.0 / PI * (1.0 - x * x).sqrt()).abs();
    }
    Ok(total / 101.0)
}

fn density_convergence() -> Outcome {
    let start = Instant::now();
    let d200 = semicircle_deviation(200)?;
    let d400 = semicircle_deviation(400)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(d200 <= 0.03, || format!("mean deviation {d200:.4} at N=200"))?;
    ensure(d400 < d200, || format!("no shrinkage: {d200:.4} -> {d400:.4}"))?;
    ensure(secs < 30.0, || format!("took {secs:.2} s"))?;
    Ok(format!("mean deviation {d200:.4} at N=200, {d400:.4} at N=400"))
}

fn perturbation_invariance() -> Outcome {
    let w = WeightSpec::hermite();
    let s = scaling_model(&w).unwrap();
    let x = PerturbationSpec::new(vec![0.0, 1.0]).unwrap();
    for n in [10usize, 20, 40] {
        let d = theta_diagnostic(&w, &x, &s, n, 2).map_err(|e| e.to_string())?;
        let err = (d.theta - 0.5 / n as f64).abs();
        ensure(err <= 1e-12, || format!("theta at N={n} is {} (off by {err:e})", d.theta))?;
    }
    let p = PerturbationSpec::new(vec![1.0, 0.0, 1.0]).unwrap();
    let report = perturbation_convergence_report(&w, &p, &s, &[100, 200], 6).map_err(|e| e.to_string())?;
    let ratio = report.max_theta(100).unwrap() / report.max_theta(200).unwrap();
    ensure((ratio - 2.0).abs() <= 0.3, || format!("halving ratio {ratio:.4}"))?;
    Ok(format!("theta = 1/(2N) for p = x; ratio {ratio:.4} for p = x^2 + 1"))
}

// Gauss-Legendre on [0, 1] by Newton iteration on the Legendre recurrence.
fn legendre01(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (0.5 * (x + 1.0), 1.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

// (1/(n+1)!) * integral over [0,1]^{n+1} of prod_{j<k} (t_j^lambda - t_k^lambda)^2
// by tensor Gauss-Legendre in t = v^6, a polynomial integrand for lambda in
// {1/3, 1/2, 1}.
fn nested_lambda_det(lambda: f64, n: usize) -> f64 {
    let rule = legendre01(28);
    let dim = n + 1;
    let mut idx = vec![0usize; dim];
    let mut total = 0.0;
    'outer: loop {
        let mut w = 1.0;
        let mut powers = Vec::with_capacity(dim);
        for &i in &idx {
            let (v, wv) = rule[i];
            w *= wv * 6.0 * v.powi(5);
            powers.push(v.powf(6.0 * lambda));
        }
        let mut vdm = 1.0;
        for j in 0..dim {
            for k in j + 1..dim {
                vdm *= (powers[j] - powers[k]).powi(2);
            }
        }
        total += w * vdm;
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < rule.len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    total / (1..=dim).map(|i| i as f64).product::<f64>()
}

fn validators() -> Outcome {
    for (lambda, b) in TEST_POINTS {
        let m = limit_moments(&model(lambda, b), 12);
        for n in 0..=6 {
            ensure(hankel_positive(&m, n), || format!("Hankel ({lambda}, {b}) n={n} not positive"))?;
        }
    }
    let d = lambda_det(1.0, 1).map_err(|e| e.to_string())?;
    ensure((d - 1.0 / 12.0).abs() <= 1e-12, || format!("lambda_det(1, 1) = {d}"))?;
    let mut worst: f64 = 0.0;
    for lambda in [1.0 / 3.0, 0.5, 1.0] {
        for n in 0..=3 {
            let exact = lambda_det(lambda, n).map_err(|e| e.to_string())?;
            let oracle = nested_lambda_det(lambda, n);
            ensure((exact - oracle).abs() <= 1e-6, || format!("lambda_det({lambda}, {n}): {exact} vs {oracle}"))?;
            worst = worst.max((exact - oracle).abs());
        }
    }
    for (lambda, b) in TEST_POINTS {
        let m = limit_moments(&model(lambda, b), 40);
        let floor = 1.0 / (3.0 * (0.5 + b.abs()));
        for k in 1..=20 {
            let s = carleman_partial_sum(&m, k).map_err(|e| e.to_string())?;
            ensure(s >= k as f64 * floor, || format!("Carleman ({lambda}, {b}) K={k}: {s}"))?;
        }
    }
    Ok(format!("Hankel n<=6, lambda_det vs nested quadrature {worst:.1e}, Carleman K<=20"))
}

fn bessel_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for b in [0.0, 1.0] {
        for t in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let z = arcsine_cf(t, b).map_err(|e| e.to_string())?;
            let err = (z - arcsine_cf_exact(t, b)).norm();
            ensure(err <= 1e-8, || format!("t={t} b={b}: error {err:e}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("largest error {worst:.1e}"))
}

fn exact_monomial(name: &str, k: usize) -> f64 {
    match name {
        "hermite" if k % 2 == 0 => gamma(k as f64 / 2.0 + 0.5),
        "laguerre(0)" => gamma(k as f64 + 1.0),
        "jacobi(0,0)" if k % 2 == 0 => 2.0 / (k as f64 + 1.0),
        _ => 0.0,
    }
}

fn quadrature_infrastructure() -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, w) in [
        ("hermite", WeightSpec::hermite()),
        ("laguerre(0)", WeightSpec::laguerre(0.0).unwrap()),
        ("jacobi(0,0)", WeightSpec::jacobi(0.0, 0.0).unwrap()),
    ] {
        let table = classical_recurrence(&w, 50).map_err(|e| e.to_string())?;
        for n in 1..=50 {
            let rule = gauss_rule(&jacobi_matrix(&table, n).unwrap(), w.mass()).map_err(|e| e.to_string())?;
            for k in 0..2 * n {
                let got = integrate(|x| x.powi(k as i32), &rule).map_err(|e| e.to_string())?;
                let exact = exact_monomial(name, k);
                let rel = (got - exact).abs() / exact.abs().max(1.0);
                ensure(rel <= 1e-12, || format!("{name} n={n} x^{k}: relative error {rel:e}"))?;
                worst = worst.max(rel);
            }
        }
        let disc = stieltjes_recurrence(&w, 30, default_quad_order(30)).map_err(|e| e.to_string())?;
        for n in 0..=30 {
            let scale = table.a(n.max(1)).max(table.b(n).abs()).max(1.0);
            let gap = (disc.a(n) - table.a(n)).abs().max((disc.b(n) - table.b(n)).abs()) / scale;
            ensure(gap <= 1e-12, || format!("{name} Stieltjes index {n}: {gap:e}"))?;
        }
    }
    Ok(format!("largest monomial error {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("exact finite-N moments", exact_finite_moments),
        ("moment convergence", moment_convergence),
        ("Laurent identity", laurent_identity),
        ("closed-form limit densities", closed_form_checks),
        ("ODE solver cross-check", ode_cross_check),
        ("global density convergence", density_convergence),
        ("perturbation invariance", perturbation_invariance),
        ("moment-problem validators", validators),
        ("Bessel identity", bessel_identity),
        ("quadrature infrastructure", quadrature_infrastructure),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
