//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use quantkit::data::{build_design, DesignSpec};
use quantkit::inference::{bootstrap_cov, covariance_iid, BootstrapSpec, CovarianceMethod};
use quantkit::qreg::{
    brute_force_fit, certify, check_loss, fit_grid, fit_ols, fit_quantile, ventile_grid, QuantileFit, SolverOptions,
};
use quantkit::resample::{replication_rng, ReplicationRng};
use quantkit::simulate::{analytic_slope, gen_height_panel, mc_study, HeightPanelDgp, LocationScaleDgp, McConfig};
use quantkit::stats::normal_quantile;
use quantkit::treatment::{complier_cdfs, empirical_quantile, late_wald, lqte, qte};
use rand::Rng;

/// Every fit produced by the other criteria, re-checked by criterion 4.
#[derive(Default)]
struct Corpus {
    fits: Vec<(DMatrix<f64>, Vec<f64>, QuantileFit)>,
}

impl Corpus {
    fn add(&mut self, x: &DMatrix<f64>, y: &[f64], fit: &QuantileFit) {
        self.fits.push((x.clone(), y.to_vec(), fit.clone()));
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn uniform(rng: &mut ReplicationRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn std_normal(rng: &mut ReplicationRng) -> f64 {
    normal_quantile(rng.random_range(1e-12..1.0))
}

fn random_design(rng: &mut ReplicationRng, n: usize, k: usize, integer: bool) -> (DMatrix<f64>, Vec<f64>) {
    let round = |v: f64| if integer { v.round() } else { v };
    let mut x = DMatrix::from_element(n, k, 1.0);
    for i in 0..n {
        for j in 1..k {
            x[(i, j)] = round(uniform(rng, -5.0, 5.0));
        }
    }
    let y = (0..n).map(|_| round(uniform(rng, -10.0, 10.0))).collect();
    (x, y)
}

fn criterion_1(corpus: &mut Corpus) -> Outcome {
    let mut rng = replication_rng(101, 0);
    let (mut compared, mut worst) = (0, 0.0f64);
    let mut failures = Vec::new();
    while compared < 400 {
        let n = rng.random_range(3..=12);
        let k = rng.random_range(1..=2);
        let tau = rng.random_range(1..=9) as f64 / 10.0;
        let integer = rng.random_bool(0.5);
        let (x, y) = random_design(&mut rng, n, k, integer);
        let Ok(oracle) = brute_force_fit(&x, &y, tau) else { continue };
        compared += 1;
        match fit_quantile(&x, &y, tau, &opts()) {
            Ok(fit) => {
                let rel = (fit.objective - oracle.objective).abs() / oracle.objective.abs().max(1.0);
                worst = worst.max(rel);
                if rel > 1e-8 {
                    failures.push(format!("n={n} k={k} tau={tau}: {} vs {}", fit.objective, oracle.objective));
                }
                corpus.add(&x, &y, &fit);
            }
            Err(e) => failures.push(format!("n={n} k={k} tau={tau}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!("{compared} instances, worst relative gap {worst:.1e}{}", first(&failures)),
    )
}

fn first(failures: &[String]) -> String {
    failures.first().map_or(String::new(), |f| format!("; first failure: {f}"))
}

fn criterion_2(corpus: &mut Corpus) -> Outcome {
    let mut rng = replication_rng(202, 0);
    let mut failures = Vec::new();
    let (mut identical, mut ties) = (0, 0);
    for s in 0..1000 {
        let n = rng.random_range(1..=1000);
        let integer = s % 2 == 0;
        let y: Vec<f64> = (0..n)
            .map(|_| if integer { rng.random_range(-20..=20) as f64 } else { uniform(&mut rng, -100.0, 100.0) })
            .collect();
        // Every third sample uses τ = k/n, where the minimizer set is an interval.
        let tau = if s % 3 == 0 && n > 1 {
            rng.random_range(1..n) as f64 / n as f64
        } else {
            rng.random_range(1..1000) as f64 / 1000.0
        };
        let x = DMatrix::from_element(n, 1, 1.0);
        let fit = match fit_quantile(&x, &y, tau, &opts()) {
            Ok(f) => f,
            Err(e) => {
                failures.push(format!("n={n} tau={tau}: {e}"));
                continue;
            }
        };
        let q = empirical_quantile(&y, tau).unwrap();
        let r: Vec<f64> = y.iter().map(|v| v - q).collect();
        let q_objective = check_loss(&r, tau).unwrap();
        if fit.beta[0] == q {
            identical += 1;
        } else if rel_close(fit.objective, q_objective, 1e-12) {
            ties += 1;
        } else {
            failures.push(format!("n={n} tau={tau}: beta {} objective {} vs quantile {q} objective {q_objective}", fit.beta[0], fit.objective));
        }
        if s % 10 == 0 {
            corpus.add(&x, &y, &fit);
        }
    }
    outcome(
        failures.is_empty(),
        format!("1000 samples: {identical} identical, {ties} objective ties{}", first(&failures)),
    )
}

fn criterion_3(corpus: &mut Corpus) -> Outcome {
    let mut rng = replication_rng(303, 0);
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -1.0, 0.0, 2.0, 0.3, 0.0, -0.7, 1.5]);
    let mut failures = Vec::new();
    for inst in 0..100 {
        let n = rng.random_range(8..60);
        let tau = rng.random_range(1..=9) as f64 / 10.0;
        let (x, y) = random_design(&mut rng, n, 3, inst % 4 == 0);
        let lambda = uniform(&mut rng, 0.1, 10.0);
        let gamma: Vec<f64> = (0..3).map(|_| uniform(&mut rng, -2.0, 2.0)).collect();
        let base = fit_quantile(&x, &y, tau, &opts()).unwrap();
        corpus.add(&x, &y, &base);

        let mut check = |label: &str, x: &DMatrix<f64>, y: Vec<f64>, tau: f64, expected: f64| {
            match fit_quantile(x, &y, tau, &opts()) {
                Ok(fit) => {
                    if !rel_close(fit.objective, expected, 1e-8) {
                        failures.push(format!("instance {inst} {label}: {} vs {expected}", fit.objective));
                    }
                    corpus.add(x, &y, &fit);
                }
                Err(e) => failures.push(format!("instance {inst} {label}: {e}")),
            }
        };
        check("scale", &x, y.iter().map(|v| lambda * v).collect(), tau, lambda * base.objective);
        check("negative scale", &x, y.iter().map(|v| -lambda * v).collect(), 1.0 - tau, lambda * base.objective);
        let shifted = (0..n).map(|i| y[i] + (0..3).map(|j| x[(i, j)] * gamma[j]).sum::<f64>()).collect();
        check("shift", &x, shifted, tau, base.objective);
        check("reparameterization", &(&x * &a), y.clone(), tau, base.objective);
    }
    outcome(failures.is_empty(), format!("100 instances x 4 transformations{}", first(&failures)))
}

fn criterion_4(corpus: &Corpus) -> Outcome {
    let mut failures = Vec::new();
    let mut counted = 0;
    for (i, (x, y, fit)) in corpus.fits.iter().enumerate() {
        let cert = certify(x, y, fit, opts().zero_tol);
        if cert.counting.is_some() {
            counted += 1;
        }
        if !cert.holds() {
            failures.push(format!("fit {i} (n={}, k={}, tau={}): {cert:?}", y.len(), x.ncols(), fit.tau));
        }
    }
    outcome(
        failures.is_empty() && !corpus.fits.is_empty(),
        format!(
            "{} fits certified ({counted} with the counting check){}",
            corpus.fits.len(),
            first(&failures)
        ),
    )
}

fn location_scale_fit(dgp: &LocationScaleDgp, tau: f64) -> (DMatrix<f64>, Vec<f64>, QuantileFit) {
    let (xs, y) = dgp.sample(&mut replication_rng(dgp.seed, 0));
    let x = DMatrix::from_fn(dgp.n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    let fit = fit_quantile(&x, &y, tau, &opts()).unwrap();
    (x, y, fit)
}

fn criterion_5(corpus: &mut Corpus) -> Outcome {
    let dgp = LocationScaleDgp {
        n: 5000,
        scale_base: 0.1,
        seed: 5,
        ..Default::default()
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for (tau, tol) in [(0.9, 0.08), (0.5, 0.05)] {
        let (x, y, fit) = location_scale_fit(&dgp, tau);
        let truth = analytic_slope(&dgp, tau).unwrap();
        let err = fit.beta[1] - truth;
        pass &= err.abs() <= tol;
        detail.push(format!("tau={tau}: slope {:.4} vs {truth:.6} (|err| {:.4} <= {tol})", fit.beta[1], err.abs()));
        corpus.add(&x, &y, &fit);
    }
    outcome(pass, detail.join("; "))
}

fn criterion_6(corpus: &mut Corpus) -> Outcome {
    let n = 4000;
    let mut rng = replication_rng(606, 0);
    let y: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
    let x = DMatrix::from_element(n, 1, 1.0);
    let fit = fit_quantile(&x, &y, 0.5, &opts()).unwrap();
    corpus.add(&x, &y, &fit);
    let target = (std::f64::consts::PI / (2.0 * n as f64)).sqrt();
    let iid = covariance_iid(&fit, &x, None).unwrap().std_errors()[0];
    let boot = bootstrap_cov(&x, &y, 0.5, BootstrapSpec { replications: 400, seed: 6 }, None, &opts())
        .unwrap()
        .std_errors()[0];
    let (ri, rb) = (iid / target - 1.0, boot / target - 1.0);
    outcome(
        ri.abs() <= 0.25 && rb.abs() <= 0.25,
        format!("target {target:.5}; iid {iid:.5} ({:+.1}%), bootstrap {boot:.5} ({:+.1}%)", 100.0 * ri, 100.0 * rb),
    )
}

fn criterion_7() -> Outcome {
    let config = McConfig {
        dgp: LocationScaleDgp { n: 1000, ..Default::default() },
        taus: vec![0.5],
        replications: 200,
        seed: 707,
        method: CovarianceMethod::Sandwich,
        ..Default::default()
    };
    let row = &mc_study(&config).unwrap().rows[0];
    outcome(
        (0.90..=0.99).contains(&row.coverage),
        format!("coverage {:.3} over {} replications (bias {:+.4}, rmse {:.4})", row.coverage, row.replications, row.bias, row.rmse),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = replication_rng(808, 0);
    let mut failures = Vec::new();
    for s in 0..300 {
        let n = rng.random_range(2..120);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-400..400) as f64 / 8.0).collect();
        let mut d: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
        d[0] = 1;
        d[1] = 0;
        let taus: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();

        let a = qte(&y, &d, &taus).unwrap();
        let b = lqte(&y, &d, &d, &taus).unwrap();
        if (a.effects != b.effects) || (a.q1 != b.q1) || (a.q0 != b.q0) {
            failures.push(format!("dataset {s}: lqte(d=z) differs from qte"));
        }

        let c = rng.random_range(-40..40) as f64 / 8.0;
        let control: Vec<f64> = y.iter().zip(&d).filter(|(_, &g)| g == 0).map(|(v, _)| *v).collect();
        let ys: Vec<f64> = control.iter().map(|v| v + c).chain(control.iter().copied()).collect();
        let ds: Vec<u8> = (0..ys.len()).map(|i| (i < control.len()) as u8).collect();
        if qte(&ys, &ds, &taus).unwrap().effects.iter().any(|&e| e != c) {
            failures.push(format!("dataset {s}: shift by {c} not recovered exactly"));
        }

        let mean = |g: u8| {
            let v: Vec<f64> = y.iter().zip(&d).filter(|(_, &di)| di == g).map(|(v, _)| *v).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        if late_wald(&y, &d, &d).unwrap() != mean(1) - mean(0) {
            failures.push(format!("dataset {s}: Wald differs from difference in means"));
        }
    }
    outcome(failures.is_empty(), format!("300 datasets x 3 reductions{}", first(&failures)))
}

fn criterion_9() -> Outcome {
    use common::*;
    let c = complier_cdfs(&FIXTURE_Y, &FIXTURE_D, &FIXTURE_Z, None).unwrap();
    let gap = |got: &[f64], want: &[f64]| got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    let raw_gap = gap(&c.treated_raw.probabilities, &HAND_F1_RAW).max(gap(&c.untreated_raw.probabilities, &HAND_F0_RAW));
    let mono_gap = gap(&c.treated.probabilities, &HAND_F1_MONO).max(gap(&c.untreated.probabilities, &HAND_F0_MONO));
    let valid = [&c.treated, &c.untreated].iter().all(|cdf| {
        cdf.probabilities.windows(2).all(|w| w[0] <= w[1]) && cdf.probabilities.iter().all(|p| (0.0..=1.0).contains(p))
    });
    let taus: Vec<f64> = HAND_LQTE.iter().map(|t| t.0).collect();
    let effects = lqte(&FIXTURE_Y, &FIXTURE_D, &FIXTURE_Z, &taus).unwrap();
    let lqte_ok = HAND_LQTE
        .iter()
        .enumerate()
        .all(|(j, &(_, q1, q0))| effects.q1[j] == q1 && effects.q0[j] == q0);
    outcome(
        raw_gap <= 1e-12 && mono_gap <= 1e-12 && valid && lqte_ok,
        format!("raw gap {raw_gap:.1e}, monotonized gap {mono_gap:.1e}, valid {valid}, lqte matches {lqte_ok}"),
    )
}

fn criterion_10(corpus: &mut Corpus) -> Outcome {
    let taus = ventile_grid();
    let seeds = 20;
    let mut profile = vec![0.0; taus.len()];
    let mut ols_mean = 0.0;
    let spec = DesignSpec::new()
        .continuous(["growth0", "growth6", "growth12", "growth18"])
        .fixed_effects(["province", "decade"]);
    for s in 0..seeds {
        let data = gen_height_panel(&HeightPanelDgp::standard(1000 + s)).unwrap();
        let design = build_design(&data, "height", &spec).unwrap();
        let x = design.matrix.values();
        let j = design.matrix.column_index("growth6").unwrap();
        let fits = fit_grid(x, &design.response, &taus, &opts()).unwrap();
        for (p, fit) in profile.iter_mut().zip(&fits) {
            *p += fit.beta[j] / seeds as f64;
        }
        if s == 0 {
            for fit in &fits {
                corpus.add(x, &design.response, fit);
            }
        }
        ols_mean += fit_ols(x, &design.response).unwrap().beta[j] / seeds as f64;
    }
    let monotone = profile.windows(2).all(|w| w[1] <= w[0]);
    let (lo, hi) = (profile[taus.len() - 1], profile[0]);
    let between = lo <= ols_mean && ols_mean <= hi;
    outcome(
        monotone && between,
        format!(
            "age-6 profile {:.2} (tau 0.05) .. {:.2} (tau 0.95), non-increasing {monotone}; OLS {ols_mean:.2} between {between}",
            hi, lo
        ),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    let fixture = dir.path().join("fixture.csv");
    std::fs::write(&fixture, common::fixture_csv()).unwrap();
    let (p, f) = (panel.to_str().unwrap(), fixture.to_str().unwrap());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = quantkit::cli::run(
        ["quantkit", "simulate", "--generate", "height-panel", "--seed", "11", "--output", p],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));

    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate", "--generate", "height-panel", "--seed", "11"],
        vec!["simulate", "--generate", "location-scale", "--seed", "11", "--n", "500"],
        vec!["simulate", "--seed", "11", "--n", "300", "--reps", "60", "--taus", "0.25,0.5,0.9"],
        vec!["simulate", "--seed", "11", "--n", "200", "--reps", "50", "--taus", "0.5", "--se", "bootstrap", "--bootstrap-reps", "50"],
        vec!["fit", "--input", p, "--response", "height", "--terms", "growth0,growth6,growth12,growth18",
             "--fixed-effects", "province,decade", "--taus", "0.05:0.95:0.05", "--ols"],
        vec!["fit", "--input", p, "--response", "height", "--terms", "growth6", "--fixed-effects", "province",
             "--taus", "0.25,0.5,0.75", "--se", "bootstrap", "--bootstrap-reps", "60", "--seed", "11", "--ols"],
        vec!["fit", "--input", p, "--response", "height", "--terms", "growth6", "--taus", "0.5",
             "--se", "cluster-bootstrap", "--cluster", "birth_year", "--bootstrap-reps", "60", "--seed", "11",
             "--format", "json"],
        vec!["qte", "--input", f, "--response", "y", "--treatment", "d", "--taus", "0.25,0.5",
             "--bootstrap-reps", "80", "--seed", "11"],
        vec!["lqte", "--input", f, "--response", "y", "--treatment", "d", "--instrument", "z",
             "--taus", "0.5", "--bootstrap-reps", "80", "--seed", "11"],
    ];
    let mut failures = Vec::new();
    for cmd in &commands {
        let mut outputs = Vec::new();
        for threads in ["1", "8", "1", "8"] {
            let mut args = vec!["quantkit"];
            args.extend(cmd.iter().copied());
            args.extend(["--threads", threads]);
            let (mut out, mut err) = (Vec::new(), Vec::new());
            let code = quantkit::cli::run(args, &mut out, &mut err);
            if code != 0 {
                failures.push(format!("{cmd:?} exited {code}: {}", String::from_utf8_lossy(&err).trim()));
            }
            outputs.push(out);
        }
        if outputs.iter().any(|o| o != &outputs[0]) || outputs[0].is_empty() {
            failures.push(format!("{cmd:?}: outputs differ"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} seeded commands x 2 runs x threads {{1, 8}}{}", commands.len(), first(&failures)),
    )
}

fn main() {
    let mut corpus = Corpus::default();
    let mut all_pass = true;
    let mut report = |id: u32, name: &str, limit: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut o = run();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                o.pass = false;
                o.detail.push_str(&format!("; exceeded {}s", limit.as_secs()));
            }
        }
        all_pass &= o.pass;
        println!(
            "{} criterion {id:>2} {name}: {} [{:.2}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    };
    let secs = |s| Some(Duration::from_secs(s));
    report(1, "oracle equivalence", secs(30), &mut || criterion_1(&mut corpus));
    report(2, "quantile reduction", secs(10), &mut || criterion_2(&mut corpus));
    report(3, "equivariance", None, &mut || criterion_3(&mut corpus));
    report(5, "analytic estimand recovery", secs(60), &mut || criterion_5(&mut corpus));
    report(6, "median variance oracle", secs(120), &mut || criterion_6(&mut corpus));
    report(7, "interval coverage", secs(300), &mut criterion_7);
    report(8, "treatment reductions", None, &mut criterion_8);
    report(9, "complier CDF hand check", None, &mut criterion_9);
    report(10, "height panel pattern", secs(300), &mut || criterion_10(&mut corpus));
    report(11, "determinism", None, &mut criterion_11);
    report(4, "optimality certificates", None, &mut || criterion_4(&corpus));
    if !all_pass {
        std::process::exit(1);
    }
}
