//! Acceptance gate: one line per criterion with its runtime budget. Each
//! criterion runs its suite and, where one exists, an oracle written here
//! without the library's solvers.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dyadic_bump::bumps::{gamma_log, interp_log_check};
use dyadic_bump::config::ExperimentConfig;
use dyadic_bump::hilbert::HilbertKernel;
use dyadic_bump::mesh::{DyadicCube, DyadicMesh, GridFunction, Weight};
use dyadic_bump::orlicz::{luxemburg_norm, maximal_ratio};
use dyadic_bump::report::ExperimentReport;
use dyadic_bump::shifts::{random_shift, weighted_norm_estimate, ShiftMode};
use dyadic_bump::stopping::{build_forest, carleson_constant};
use dyadic_bump::suites::{run_suite, Suite, DUALITY_FAMILIES, HOLDER_FAMILIES};
use dyadic_bump::weights::generate_weight;
use dyadic_bump::young::{conjugate_exponent, YoungFunction};

const SEED: u64 = 0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn suite(s: Suite) -> (ExperimentReport, Outcome) {
    let rep = run_suite(s, &ExperimentConfig::with_seed(SEED)).expect("suite runs");
    let failed: Vec<String> = rep.verdicts.iter().filter(|v| !v.passed).map(|v| v.name.clone()).collect();
    let out = Outcome {
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} verdicts", rep.verdicts.len())
        } else {
            format!("failed: {}", failed.join("; "))
        },
    };
    (rep, out)
}

fn merge(a: Outcome, b: Outcome) -> Outcome {
    Outcome {
        passed: a.passed && b.passed,
        detail: format!("{}; {}", a.detail, b.detail),
    }
}

fn check(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn cell_range(mesh: DyadicMesh, q: &DyadicCube) -> std::ops::Range<usize> {
    let start = q.index_in_level() << (mesh.depth() - q.level());
    start..start + (1usize << (mesh.depth() - q.level()))
}

fn random_cube(mesh: DyadicMesh, rng: &mut ChaCha8Rng) -> DyadicCube {
    let j = rng.gen_range(0..=mesh.depth());
    mesh.cube_at(j, rng.gen_range(0..1usize << j))
}

/// `inf{λ > 0 : avg A(|f|/λ) ≤ 1}` by bisection on `log λ`.
fn luxemburg_bisect(values: &[f64], a: &YoungFunction) -> f64 {
    let avg = |lam: f64| values.iter().map(|v| a.value(v.abs() / lam)).sum::<f64>() / values.len() as f64;
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = ((top * 1e-12).ln(), (top * 1e12).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if avg(mid.exp()) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.exp()
}

/// `sup_t (st − A(t))` by ternary search on `log t`.
fn legendre(a: &YoungFunction, s: f64) -> f64 {
    let g = |x: f64| {
        let t = x.exp();
        s * t - a.value(t)
    };
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    for _ in 0..300 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    g(0.5 * (lo + hi)).max(0.0)
}

/// Inverse of an increasing function on `(0, ∞)` by bisection on `log`.
fn invert(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let (mut lo, mut hi) = (-80.0f64, 80.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn heavy_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = 10f64.powf(rng.gen_range(-3.0..3.0));
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

fn c1_luxemburg() -> Outcome {
    let mesh = DyadicMesh::new(1, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        let a = YoungFunction::power(p).unwrap();
        for _ in 0..100 {
            let v = heavy_values(mesh.cell_count(), &mut rng);
            let q = random_cube(mesh, &mut rng);
            let cells = &v[cell_range(mesh, &q)];
            let oracle = (cells.iter().map(|x| x.abs().powf(p)).sum::<f64>() / cells.len() as f64).powf(1.0 / p);
            let f = GridFunction::new(mesh, v.clone()).unwrap();
            let got = luxemburg_norm(&f, &q, &a).unwrap();
            worst = worst.max((got - oracle).abs() / oracle);
        }
    }
    merge(check(worst <= 1e-9, format!("oracle max rel err {worst:.2e}")), suite(Suite::Luxemburg).1)
}

fn c2_duality() -> Outcome {
    // complement inverse against a Legendre transform computed here
    let mut worst = 0.0f64;
    let mut violations = 0;
    for spec in DUALITY_FAMILIES {
        let a = YoungFunction::parse(spec).unwrap();
        let lib = a.complement();
        for k in 0..13 {
            let t = 10f64.powi(k - 6);
            let oracle = invert(|s| legendre(&a, s), t);
            worst = worst.max((lib.inverse(t) - oracle).abs() / oracle);
            let r = a.inverse(t) * oracle / t;
            if !(1.0 - 1e-6..=2.0 + 1e-6).contains(&r) {
                violations += 1;
            }
        }
    }
    let own = check(
        worst <= 1e-6 && violations == 0,
        format!("complement inverse vs Legendre oracle {worst:.1e}, {violations} oracle violations"),
    );
    merge(own, suite(Suite::Duality).1)
}

fn c3_holder() -> Outcome {
    let mesh = DyadicMesh::new(1, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for spec in HOLDER_FAMILIES {
        let a = YoungFunction::parse(spec).unwrap();
        let ac = a.complement();
        for _ in 0..25 {
            let q = random_cube(mesh, &mut rng);
            let n = cell_range(mesh, &q).len();
            let f = heavy_values(n, &mut rng);
            let g = heavy_values(n, &mut rng);
            let avg = f.iter().zip(&g).map(|(x, y)| (x * y).abs()).sum::<f64>() / n as f64;
            let ratio = avg / (luxemburg_bisect(&f, &a) * luxemburg_bisect(&g, &ac));
            worst = worst.max(ratio);
        }
    }
    let own = check(worst <= 2.0 + 1e-9, format!("bisection-norm ratio max {worst:.4}"));
    merge(own, suite(Suite::Holder).1)
}

fn c4_maximal() -> Outcome {
    // brute-force M(fσ) at a small depth
    let mesh = DyadicMesh::new(1, 6).unwrap();
    let u = generate_weight("cascade:0.5,1", mesh).unwrap();
    let sigma = generate_weight("cascade:0.5,2", mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let n = mesh.cell_count();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let fs: Vec<f64> = f.iter().zip(sigma.values()).map(|(a, b)| a * b).collect();
        let mut num = 0.0;
        for x in 0..n {
            let mut best = 0.0f64;
            for j in 0..=mesh.depth() {
                let side = n >> j;
                let start = x / side * side;
                best = best.max(fs[start..start + side].iter().sum::<f64>() / side as f64);
            }
            num += best * best * u.values()[x];
        }
        let den: f64 = f.iter().zip(sigma.values()).map(|(a, b)| a * a * b).sum();
        let oracle = (num / den).sqrt();
        let got = maximal_ratio(&GridFunction::new(mesh, f).unwrap(), &u, &sigma, 2.0).unwrap();
        worst = worst.max((got - oracle).abs() / oracle);
    }
    let own = check(worst <= 1e-12, format!("brute-force maximal ratio err {worst:.1e}"));
    let (rep, out) = suite(Suite::Maximal);
    let per: Vec<String> = [8, 10, 12]
        .iter()
        .filter_map(|l| rep.get(&format!("max_normalized_ratio_L{l}")).map(|v| format!("L{l}={v:.3}")))
        .collect();
    merge(own, merge(out, check(true, per.join(" "))))
}

fn c5_tau() -> Outcome {
    // p = 2 norm against a dense SVD
    let mesh = DyadicMesh::new(1, 7).unwrap();
    let n = mesh.cell_count();
    let u = generate_weight("cascade:0.5,1", mesh).unwrap();
    let sigma = generate_weight("cascade:0.5,2", mesh).unwrap();
    let mut worst = 0.0f64;
    for (m, k, mode) in [(0, 0, ShiftMode::Cancellative), (1, 2, ShiftMode::Positive), (3, 1, ShiftMode::Cancellative)] {
        let s = random_shift(mesh, m, k, 55 + m as u64, mode).unwrap();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = s.apply(&GridFunction::new(mesh, e).unwrap()).unwrap();
            for i in 0..n {
                dense[(i, j)] = u.values()[i].sqrt() * col.values()[i] * sigma.values()[j].sqrt();
            }
        }
        let oracle = dense.singular_values().max();
        let got = weighted_norm_estimate(&s, &u, &sigma, 2.0, 1, 0).unwrap().lower_bound;
        worst = worst.max((got - oracle).abs() / oracle);
    }
    let own = check(worst <= 1e-8, format!("Lanczos vs SVD err {worst:.1e}"));
    let (rep, out) = suite(Suite::TauScaling);
    let slope = rep.get("slope_log_norm_over_tau3").unwrap_or(f64::NAN);
    let c = rep.get("fitted_c").unwrap_or(f64::NAN);
    merge(own, merge(out, check(true, format!("slope {slope:.3}, C {c:.4}"))))
}

fn c6_decay() -> Outcome {
    let (rep, out) = suite(Suite::Decay);
    let q = rep.get("qualifying_profiles").unwrap_or(0.0);
    merge(out, check(true, format!("{q} qualifying profiles")))
}

fn c7_carleson() -> Outcome {
    let mut own = true;
    for l in [4, 8, 12] {
        let mesh = DyadicMesh::new(1, l).unwrap();
        let one = Weight::constant(mesh, 1.0).unwrap();
        let forest = build_forest(&one, &one, 2.0, &mesh.unit_cube(), 1, 0).unwrap();
        own &= carleson_constant(&forest).value == 1.0;
    }
    let (rep, out) = suite(Suite::Stopping);
    let spread = rep.get("max_carleson_spread").unwrap_or(f64::NAN);
    merge(check(own, "flat forests exactly 1".into()), merge(out, check(true, format!("spread {spread:.3}"))))
}

fn c8_interp() -> Outcome {
    let mut own = true;
    let mut worst_hom = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for (p, delta) in [(2.0, 1.0), (3.0, 2.0)] {
        let pc = conjugate_exponent(p);
        let lemma = 1.0 / (2.0 + (pc - 1.0) * 2.0 / delta);
        let balance = delta / (2.0 * (pc - 1.0 + delta));
        let g = gamma_log(p, delta).unwrap();
        own &= (g - lemma).abs() < 1e-15 && (g - balance).abs() < 1e-15;
        for _ in 0..200 {
            let k = rng.gen_range(2..20);
            let mut masses: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = masses.iter().sum();
            masses.iter_mut().for_each(|m| *m /= total);
            let f: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.gen_range(-4.0..4.0))).collect();
            let c = 10f64.powf(rng.gen_range(-3.0..3.0));
            let scaled: Vec<f64> = f.iter().map(|v| v * c).collect();
            let a = interp_log_check(&masses, &f, p, delta).unwrap().ratio;
            let b = interp_log_check(&masses, &scaled, p, delta).unwrap().ratio;
            worst_hom = worst_hom.max((a - b).abs() / a);
        }
    }
    let own = check(own && worst_hom <= 1e-9, format!("γ formulas agree, homogeneity {worst_hom:.1e}"));
    merge(own, suite(Suite::Interp).1)
}

fn c9_summation() -> Outcome {
    suite(Suite::Summation).1
}

fn c10_hilbert() -> Outcome {
    // H_ε of χ_[0,1] at a center x with ε < min(x, 1−x) is log(x/(1−x))
    let mesh = DyadicMesh::new(1, 12).unwrap();
    let n = mesh.cell_count();
    let h = mesh.cell_volume();
    let k = HilbertKernel::new(mesh, h).unwrap();
    let image = k.apply(&GridFunction::constant(mesh, 1.0)).unwrap();
    let mut worst = 0.0f64;
    for (i, v) in image.values().iter().enumerate().skip(2).take(n - 4) {
        let x = (i as f64 + 0.5) * h;
        worst = worst.max((v - (x / (1.0 - x)).ln()).abs());
    }
    let own = check(worst <= 1e-9, format!("closed form on the unit indicator {worst:.1e}"));
    merge(own, suite(Suite::Hilbert).1)
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "Orlicz oracle equivalence", 5, c1_luxemburg),
    (2, "duality sandwich", 5, c2_duality),
    (3, "generalized Hölder", 60, c3_holder),
    (4, "two-weight maximal bound", 300, c4_maximal),
    (5, "τ³ envelope", 600, c5_tau),
    (6, "exponential decay", 300, c6_decay),
    (7, "Carleson", 120, c7_carleson),
    (8, "interpolation lemma", 120, c8_interp),
    (9, "summation-in-a chain", 120, c9_summation),
    (10, "Hilbert module", 300, c10_hilbert),
];

fn main() -> ExitCode {
    let mut all = true;
    for (id, name, limit, run) in CRITERIA {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = took < Duration::from_secs(limit);
        let passed = out.passed && in_time;
        all &= passed;
        println!(
            "criterion {id:>2} {}: {name} ({:.2} s, limit {limit} s) {}",
            if passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
    }
    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
