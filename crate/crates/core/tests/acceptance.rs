//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::process::Command as Proc;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use qimlab::harness::{noise, success_rate, Command, ExperimentConfig, Overrides};
use qimlab::landscape::{basin_census, curvature_at_zero, random_unit, run_landscape, LandscapeConfig};
use qimlab::losses::{Objective, QimModel};
use qimlab::measurements::SensingEnsemble;
use qimlab::optimizers::GdConfig;
use qimlab::oracles::{run_oracle_suite, OracleConfig};
use qimlab::rng::SeedTree;

const MODELS: [QimModel; 3] = [QimModel::Qim1, QimModel::DEFAULT_QIM2, QimModel::DEFAULT_QIM3];

struct Verdict {
    pass: bool,
    detail: String,
}

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    SeedTree::new(seed).normals().fill(&mut v);
    v
}

fn axpy(t: f64, d: &[f64], u: &[f64]) -> Vec<f64> {
    u.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Random Gaussian problem with a Gaussian signal and a Gaussian probe point.
fn problem(n: usize, m: usize, seed: u64) -> (SensingEnsemble<f64>, Vec<f64>, Vec<f64>) {
    let t = SeedTree::new(seed);
    let ens = SensingEnsemble::<f64>::gaussian(n, m, t.child(0).seed()).unwrap();
    let y = ens.intensities(&normals(n, t.child(1).seed())).unwrap().y;
    (ens, y, normals(n, t.child(2).seed()))
}

fn gradient_certification() -> Verdict {
    let (n, m) = (16, 64);
    let mut worst: f64 = 0.0;
    for (k, model) in MODELS.iter().enumerate() {
        for p in 0..100u64 {
            let (ens, y, u) = problem(n, m, 10_000 * k as u64 + p);
            // Construction fails if any QIM1 denominator is under the guard.
            let obj = Objective::new(*model, &ens, &y).unwrap();
            let g = obj.gradient(&u).unwrap();
            let h = 1e-5 * (1.0 + norm(&u));
            let fd: Vec<f64> = (0..n)
                .map(|j| {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    (obj.value(&axpy(h, &e, &u)).unwrap() - obj.value(&axpy(-h, &e, &u)).unwrap()) / (2.0 * h)
                })
                .collect();
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / norm(&fd));
        }
    }
    Verdict {
        pass: worst <= 1e-6,
        detail: format!("300 points, max relative error {worst:.2e} (tol 1e-6)"),
    }
}

fn curvature_certification() -> Verdict {
    let (n, m) = (16, 64);
    let mut worst: f64 = 0.0;
    for (k, model) in MODELS.iter().enumerate() {
        for p in 0..50u64 {
            let (ens, y, u) = problem(n, m, 20_000 + 10_000 * k as u64 + p);
            let obj = Objective::new(*model, &ens, &y).unwrap();
            let xi = random_unit(n, 90_000 + 100 * k as u64 + p);
            let an = obj.dir_curvature(&u, &xi).unwrap();
            let f = |t: f64| obj.value(&axpy(t, &xi, &u)).unwrap();
            let d2 = |h: f64| (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
            // Richardson removes the h^2 term, so a wide step keeps roundoff
            // small where f is large relative to its curvature.
            let fd = (4.0 * d2(5e-3) - d2(1e-2)) / 3.0;
            worst = worst.max((an - fd).abs() / fd.abs());
        }
    }
    Verdict {
        pass: worst <= 1e-5,
        detail: format!("150 points, max relative error {worst:.2e} (tol 1e-5)"),
    }
}

/// `H(0) = -a Sigma_hat - b I` with `(a, b)` from the model's `G` at zero.
fn origin_coefficients(model: QimModel) -> (f64, f64) {
    match model {
        QimModel::Qim1 => (4.0, 0.0),
        QimModel::Qim2 { beta } => (4.0, 2.0 * beta),
        QimModel::Qim3 { beta1, beta2 } => (4.0 / beta2 + 2.0 * beta1 / (beta2 * beta2), 2.0 / (beta2 * beta2)),
        QimModel::Intensity => unreachable!(),
    }
}

fn origin_curvature() -> Verdict {
    let ranges = [(-4.6, -3.4), (-6.0 * 1.15, -6.0 * 0.85), (-6.2 * 1.15, -6.2 * 0.85)];
    let mut pass = true;
    let mut formula_gap: f64 = 0.0;
    let mut parts = Vec::new();
    for (model, (lo, hi)) in MODELS.iter().zip(ranges) {
        let (a, b) = origin_coefficients(*model);
        let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for seed in 0..20u64 {
            let ens = SensingEnsemble::<f64>::gaussian(32, 640, seed).unwrap();
            let y = ens.intensities(&random_unit(32, seed + 1000)).unwrap().y;
            let obj = Objective::new(*model, &ens, &y).unwrap();
            let c = curvature_at_zero(&obj, 20, seed).unwrap();
            let rows = DMatrix::from_row_slice(640, 32, ens.rows().unwrap());
            let cov = rows.transpose() * &rows / 640.0;
            let formula = -a * SymmetricEigen::new(cov).eigenvalues.min() - b;
            formula_gap = formula_gap.max((c.max_eigenvalue - formula).abs());
            pass &= c.dense && c.max_eigenvalue < 0.0 && c.max_eigenvalue >= lo && c.max_eigenvalue <= hi;
            (dmin, dmax) = (dmin.min(c.max_eigenvalue), dmax.max(c.max_eigenvalue));
            (pmin, pmax) = (pmin.min(c.probe_max), pmax.max(c.probe_max));
        }
        parts.push(format!(
            "{model}: dense top eig in [{dmin:.3}, {dmax:.3}] vs [{lo:.2}, {hi:.2}] (max over 20 probes in [{pmin:.3}, {pmax:.3}])"
        ));
    }
    Verdict {
        pass,
        detail: format!(
            "{}; dense eig vs -a*lambda_min(cov) - b within {formula_gap:.1e}",
            parts.join("; ")
        ),
    }
}

fn config(command: Command, over: Overrides) -> ExperimentConfig {
    ExperimentConfig::resolve(command, over).unwrap()
}

fn success_rate_at_6n() -> Verdict {
    let cfg = config(
        Command::SuccessRate,
        Overrides {
            m: Some(6 * 128),
            ..Overrides::default()
        },
    );
    let rows = success_rate(&cfg).unwrap();
    Verdict {
        pass: rows.iter().all(|r| r.rate >= 0.95),
        detail: rows
            .iter()
            .map(|r| format!("{} rate {} ({}/{})", r.model, r.rate, r.successes, r.trials))
            .collect::<Vec<_>>()
            .join(", ")
            + " (need >= 0.95)",
    }
}

fn census() -> Verdict {
    let (n, m) = (64, 8 * 64);
    let ens = SensingEnsemble::<f64>::gaussian(n, m, 1).unwrap();
    let x = random_unit(n, 2);
    let y = ens.intensities(&x).unwrap().y;
    let mut pass = true;
    let mut parts = Vec::new();
    for model in [QimModel::DEFAULT_QIM2, QimModel::DEFAULT_QIM3] {
        let obj = Objective::new(model, &ens, &y).unwrap();
        let c = basin_census(&obj, &x, 200, &GdConfig::for_model(model), 3).unwrap();
        pass &= c.reached_other == 0;
        parts.push(format!(
            "{model}: truth {} other {} nonconverged {}",
            c.reached_truth, c.reached_other, c.nonconverged
        ));
    }
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn landscape_suite() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for model in MODELS {
        let mut violations = 0;
        let (mut far, mut far_total) = (0, 0);
        for seed in 1..=5u64 {
            let r = run_landscape(&LandscapeConfig::new(model, 64, 640, seed)).unwrap();
            violations += r.violations();
            let at_far: Vec<_> = r.radial_scan.iter().filter(|s| [2.0, 4.0, 10.0].contains(&s.r)).collect();
            far_total += at_far.len();
            far += at_far.iter().filter(|s| s.d_r > 0.0).count();
            if model != QimModel::Qim1 {
                pass &= r.equator_curvatures.iter().all(|e| e.curvature < 0.0);
            }
            if let QimModel::Qim3 { .. } = model {
                pass &= r.radial_scan.iter().filter(|s| s.r == 0.01).all(|s| s.d_r < 0.0);
            }
        }
        // 200 random directions plus the two signal-aligned ones.
        pass &= violations == 0 && far == far_total && far_total >= 5 * 3 * 200;
        parts.push(format!("{model}: {violations} violations, d_R f > 0 at {far}/{far_total} far points"));
    }
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn oracle_suite() -> Verdict {
    let report = run_oracle_suite(&OracleConfig::default()).unwrap();
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    Verdict {
        pass: report.all_pass(),
        detail: format!("{} checks passed, failed: {:?}", report.passed, failed),
    }
}

fn noise_linearity() -> Verdict {
    let rows = noise(&config(Command::Noise, Overrides::default())).unwrap();
    let mut slopes: Vec<(String, f64)> = rows.iter().map(|r| (r.model.clone(), r.slope)).collect();
    slopes.dedup();
    Verdict {
        pass: slopes.iter().all(|(_, s)| (-1.15..=-0.85).contains(s)),
        detail: slopes
            .iter()
            .map(|(m, s)| format!("{m} slope {s:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
            + " (need [-1.15, -0.85])",
    }
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 5] = [
        &["success-rate", "--n", "32", "--ratio", "2,4,6", "--trials", "8"],
        &["convergence", "--n", "32", "--trials", "2"],
        &["noise", "--n", "32", "--trials", "3", "--snr", "20,40,inf"],
        &["landscape", "--n", "24", "--trials", "10"],
        &["oracle-check", "--samples", "20000"],
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for args in runs {
        let outs: Vec<_> = ["1", "2", "2"]
            .iter()
            .map(|t| {
                let mut a = args.to_vec();
                a.extend(["--seed", "7", "--threads", t]);
                Proc::new(env!("CARGO_BIN_EXE_qimlab")).args(&a).output().unwrap()
            })
            .collect();
        let same = outs.iter().all(|o| o.stdout == outs[0].stdout && o.status.success());
        pass &= same && !outs[0].stdout.is_empty();
        parts.push(format!("{} {}", args[0], if same { "identical" } else { "DIFFERS" }));
    }
    Verdict {
        pass,
        detail: parts.join(", "),
    }
}

fn main() {
    // Budgets in seconds; `None` where no runtime bound is stated.
    let criteria: [(&str, fn() -> Verdict, Option<f64>); 9] = [
        ("gradient certification", gradient_certification, Some(10.0)),
        ("curvature certification", curvature_certification, Some(10.0)),
        ("origin curvature", origin_curvature, Some(30.0)),
        ("success rate at m=6n", success_rate_at_6n, Some(600.0)),
        ("no spurious minima census", census, Some(300.0)),
        ("landscape sign suite", landscape_suite, None),
        ("oracle suite", oracle_suite, Some(120.0)),
        ("noise linearity", noise_linearity, None),
        ("determinism", determinism, None),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = budget.is_none_or(|b| secs < b);
        let pass = v.pass && in_time;
        failures += usize::from(!pass);
        let limit = budget.map(|b| format!(", limit {b} s")).unwrap_or_default();
        println!(
            "criterion {}: {} [{name}] {} ({secs:.1} s{limit})",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
