//! Acceptance checks, one line per criterion. Failures are reported, not
//! hidden; set ACCEPTANCE_STRICT=1 to turn any failure into a nonzero exit.

use std::time::Instant;

use stein_density::config::{GridConfig, RunConfig};
use stein_density::output::{write_density, write_theta};
use stein_density::parallel::worker_count;
use stein_density::pipeline::{
    compare_density, curie_weiss_sandwich, run_density, run_theta, uif_table, Problem, ThetaRun,
};
use stein_density_core::density::{irwin_hall_identity_rhs, phi_and_theta_from_density, reconstruct, Verdict};
use stein_density_core::distributions::Distribution;
use stein_density_core::expressions::{parse, Expr};
use stein_density_core::reference::ReferenceCase;
use stein_density_core::rng::Substream;
use stein_density_core::stein::{cuadras_cov, identity_from_batch, l_op, mc_covariance, KernelMethod};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, started: Instant, o: Outcome, failures: &mut u32) {
    if !o.pass {
        *failures += 1;
    }
    println!(
        "[{}] {id:>2} {name}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
}

fn explicit_config(n: usize, statistic: &str, law: &str, components: &[String], samples: usize, seed: u64) -> RunConfig {
    let comps: Vec<String> = components
        .iter()
        .enumerate()
        .map(|(k, h)| format!(r#"{{ "h": "{h}", "active": {} }}"#, k + 1))
        .collect();
    RunConfig::from_json(&format!(
        r#"{{
            "dimension": {n},
            "statistic": "{statistic}",
            "variables": [{{ {law}, "count": {n} }}],
            "decomposition": {{ "explicit": [{}] }},
            "mc": {{ "samples": {samples}, "seed": {seed} }}
        }}"#,
        comps.join(",")
    ))
    .unwrap()
}

fn linear_gaussian(samples: usize, seed: u64) -> RunConfig {
    let h = ["x1".to_string(), "2*x2".into(), "-3*x3".into()];
    explicit_config(3, "x1 + 2*x2 - 3*x3", r#""law": "normal""#, &h, samples, seed)
}

/// `sum alpha_k x_k^2` with standard Curie-Weiss (s = 1, sigma = 1) inputs.
fn curie_weiss(alphas: &[f64], samples: usize, seed: u64) -> RunConfig {
    let terms: Vec<String> = alphas.iter().enumerate().map(|(k, a)| format!("{a}*x{}^2", k + 1)).collect();
    let h: Vec<String> = alphas.iter().enumerate().map(|(k, a)| format!("{a}*(x{}^2 - 1)", k + 1)).collect();
    explicit_config(
        alphas.len(),
        &terms.join(" + "),
        r#""law": "curie_weiss", "s": 1, "sigma": 1.0"#,
        &h,
        samples,
        seed,
    )
}

fn uniform_sum(n: usize, samples: usize, seed: u64) -> RunConfig {
    let terms: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    let h: Vec<String> = (1..=n).map(|k| format!("x{k} - 0.5")).collect();
    explicit_config(n, &terms.join(" + "), r#""law": "uniform""#, &h, samples, seed)
}

fn theta_run(cfg: &RunConfig) -> ThetaRun {
    let problem = Problem::from_config(cfg).expect("config");
    run_theta(&problem, &cfg.mc, worker_count()).expect("theta run")
}

fn criterion_1(runs: &[(&str, &ThetaRun)]) -> Outcome {
    let gs: Vec<Expr> = ["sin(x)", "tanh(x)", "x"].iter().map(|g| parse(g, 1).unwrap()).collect();
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    for (name, run) in runs {
        for g in &gs {
            let r = identity_from_batch(&run.batch, g).unwrap();
            pass &= r.passed;
            let ratio = r.difference() / r.threshold().max(f64::MIN_POSITIVE);
            if ratio > worst {
                worst = ratio;
                worst_case = format!("{name}, g = {g}");
            }
        }
    }
    Outcome {
        pass,
        detail: format!("9 cases at N = 1e6; worst |lhs - rhs| / 3(SE_l + SE_r) = {worst:.3} ({worst_case})"),
    }
}

fn criterion_2() -> Outcome {
    let samples = 200_000;
    let explicit = curie_weiss(&[1.0, 2.0], samples, 21);
    let mut martingale = explicit.clone();
    martingale.decomposition = stein_density::config::DecompositionDecl::Martingale;
    let a = theta_run(&explicit);
    let b = theta_run(&martingale);
    assert_eq!(a.batch.t_values, b.batch.t_values);
    let (ea, eb) = (&a.estimate, &b.estimate);
    let bins = ea.central_bins(0.9);
    let mut worst = 0.0f64;
    let mut bad = 0;
    for k in bins.clone() {
        let se = (ea.bin_se[k].powi(2) + eb.bin_se[k].powi(2)).sqrt();
        let d = (ea.raw_means[k] - eb.raw_means[k]).abs();
        if d > 3.0 * se {
            bad += 1;
        }
        worst = worst.max(d / (3.0 * se).max(f64::MIN_POSITIVE));
    }
    Outcome {
        pass: bad == 0,
        detail: format!(
            "Curie-Weiss n = 2, N = {samples}: {bad} of {} central bins disagree; worst |diff| / 3 SE = {worst:.3}",
            bins.len()
        ),
    }
}

fn criterion_3() -> Outcome {
    let d = Distribution::std_normal();
    let h = parse("x", 1).unwrap();
    let mut worst = 0.0f64;
    for x in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        for m in [KernelMethod::Ibp, KernelMethod::DoubleIntegral] {
            let v = l_op(&d, &h, x, m).unwrap().value;
            worst = worst.max((v - 1.0).abs());
        }
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!("max |L h(x) - 1| = {worst:.2e} over x in {{-3,-1,0,1,3}}, both forms"),
    }
}

fn criterion_4(runs: &[(u32, &ThetaRun)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, run) in runs {
        let d = run_density(run, &GridConfig::default(), None, false).unwrap();
        let p = d.density.expect("supported");
        let c = compare_density(&p, &ReferenceCase::ChiSquare { k: *n as f64 }).unwrap();
        pass &= c.l1 < 0.05;
        parts.push(format!("n = {n}: L1 = {:.4}", c.l1));
    }
    Outcome {
        pass,
        detail: format!("{} (limit 0.05, N = 1e6, grid 512)", parts.join(", ")),
    }
}

fn criterion_5(run: &ThetaRun) -> Outcome {
    let d = run_density(run, &GridConfig::default(), None, false).unwrap();
    let p = d.density.expect("supported");
    let s = curie_weiss_sandwich(run, &p, 1, 1.0, &[1.0, 2.0], 0.9).unwrap();
    Outcome {
        pass: s.passed(),
        detail: format!(
            "alpha = (1,2): {} of {} central bins outside the band by > 3 SE; {} of {} grid points outside the envelopes",
            s.band_violations, s.bins_checked, s.density_violations, s.grid_points
        ),
    }
}

fn criterion_6() -> Outcome {
    let draws = 4_000_000;
    let mut pass = true;
    let mut worst = 0.0f64;
    for n in [2u32, 3] {
        for r in uif_table(n, draws, 60 + n as u64).unwrap() {
            pass &= r.passed();
            worst = worst.max((r.rhs - r.oracle).abs() / (3.0 * r.oracle_se + 1e-3));
        }
    }
    let exact = irwin_hall_identity_rhs(2, 1.0).unwrap();
    let oracle = uif_table(2, draws, 99).unwrap()[1];
    let exact_ok = (exact - 2.0 / 3.0).abs() < 5e-3 && (oracle.oracle - 2.0 / 3.0).abs() < 5e-3;
    Outcome {
        pass: pass && exact_ok,
        detail: format!(
            "worst |rhs - oracle| / (3 SE + 1e-3) = {worst:.3}; (n=2, x=1): rhs = {exact:.6}, oracle = {:.6}",
            oracle.oracle
        ),
    }
}

fn criterion_7(runs: &[(&str, &ThetaRun)]) -> Outcome {
    // The grid has to reach both ends of the sample: phi(b) = 0 is built
    // into the inverse map, which a truncated range violates by theta p(b).
    let grid = GridConfig {
        points: 512,
        quantile_trim: 0.0,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, run) in runs {
        let d = run_density(run, &grid, None, false).unwrap();
        let p = d.density.expect("supported");
        let mean = p.mean();
        let q = p.recentered();
        let r = match phi_and_theta_from_density(&q) {
            Ok(r) => r,
            Err(e) => {
                pass = false;
                parts.push(format!("{name} error: {e}"));
                continue;
            }
        };
        let mut cdf = 0.0;
        let (mut worst, mut at) = (0.0f64, 0.0);
        for i in 0..q.grid.len() {
            if i > 0 {
                cdf += 0.5 * (q.pdf_values[i - 1] + q.pdf_values[i]) * (q.grid[i] - q.grid[i - 1]);
            }
            if !(0.05..=0.95).contains(&cdf) {
                continue;
            }
            let t = q.grid[i] + mean;
            let (target, se) = run.estimate.evaluate(t);
            let got = r.theta[i].unwrap_or(f64::NAN);
            let allowed = (0.02 * target.abs()).max(3.0 * se);
            let ratio = (got - target).abs() / allowed;
            let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
            if ratio > 1.0 {
                pass = false;
            }
            if ratio > worst {
                (worst, at) = (ratio, t);
            }
        }
        parts.push(format!("{name} {worst:.3} at t={at:.3} (mean before centering {mean:.1e})"));
    }
    Outcome {
        pass,
        detail: format!("worst |round trip - theta| / max(2%, 3 SE): {}", parts.join(", ")),
    }
}

fn criterion_8(continuous: &[(&str, &ThetaRun)]) -> Outcome {
    let cfg = RunConfig::from_json(
        r#"{
            "dimension": 1,
            "statistic": "max(x1, 0.5)",
            "variables": [{ "law": "uniform" }],
            "decomposition": { "explicit": [{ "h": "max(x1, 0.5) - 0.625", "active": 1 }] },
            "mc": { "samples": 1000000, "seed": 8 }
        }"#,
    )
    .unwrap();
    let atom = run_density(&theta_run(&cfg), &GridConfig::default(), None, false).unwrap();
    let v = &atom.verdict;
    let mut pass = v.verdict == Verdict::Rejected && (0.45..=0.55).contains(&v.mass_at_risk) && atom.density.is_none();
    let mut unsupported = Vec::new();
    for (name, run) in continuous {
        let d = run_density(run, &GridConfig::default(), None, false).unwrap();
        if d.verdict.verdict != Verdict::Supported {
            pass = false;
            unsupported.push(format!("{name}: {}", d.verdict.verdict.as_str()));
        }
    }
    Outcome {
        pass,
        detail: format!(
            "max(x1, 0.5): {} with mass at risk {:.4}; continuous cases not supported: [{}]",
            v.verdict.as_str(),
            v.mass_at_risk,
            unsupported.join(", ")
        ),
    }
}

fn random_polynomial(rng: &mut stein_density_core::rng::RandomStream) -> String {
    let degree = 1 + (rng.uniform() * 3.0) as usize;
    let mut terms = Vec::new();
    for p in 0..=degree {
        let c = (rng.uniform() * 4.0 - 2.0 + 0.5).round() / 2.0;
        let c = if p == degree && c == 0.0 { 1.0 } else { c };
        if c != 0.0 {
            terms.push(if p == 0 { format!("({c})") } else { format!("({c})*x^{p}") });
        }
    }
    terms.join(" + ")
}

fn criterion_9() -> Outcome {
    let mut rng = Substream::named(9, "acceptance-triples").at(0);
    let mut pass = true;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let (d, label) = match (rng.uniform() * 3.0) as usize {
            0 => {
                let a = (rng.uniform() * 4.0 - 2.0).round();
                (Distribution::uniform(a, a + 1.0 + (rng.uniform() * 2.0).round()).unwrap(), "uniform")
            }
            1 => (Distribution::std_normal(), "normal"),
            _ => {
                let s = 1 + (rng.uniform() * 2.0) as u32;
                (Distribution::curie_weiss(s, 1.0).unwrap(), "curie-weiss")
            }
        };
        let a = parse(&random_polynomial(&mut rng), 1).unwrap();
        let b = parse(&random_polynomial(&mut rng), 1).unwrap();
        let k = cuadras_cov(&d, &a, &b).unwrap();
        let m = mc_covariance(&d, &a, &b, 1_000_000, 900 + i).unwrap();
        let ratio = (k.value - m.mean).abs() / (4.0 * m.se);
        if !(ratio <= 1.0) {
            pass = false;
            eprintln!("  triple {i}: {label}, alpha = {a}, beta = {b}: kernel {} vs MC {} (se {})", k.value, m.mean, m.se);
        }
        worst = worst.max(ratio);
    }
    let x = parse("x", 1).unwrap();
    let unit = cuadras_cov(&Distribution::uniform(0.0, 1.0).unwrap(), &x, &x).unwrap().value;
    let unit_ok = (unit - 1.0 / 12.0).abs() < 1e-8;
    Outcome {
        pass: pass && unit_ok,
        detail: format!(
            "10 random triples, worst |kernel - MC| / 4 SE = {worst:.3}; uniform Var = {unit:.12} (|err| {:.1e})",
            (unit - 1.0 / 12.0).abs()
        ),
    }
}

fn criterion_10() -> Outcome {
    let configs = [uniform_sum(3, 50_000, 10), curie_weiss(&[1.0, 2.0], 30_000, 10)];
    let mut pass = true;
    for cfg in &configs {
        let problem = Problem::from_config(cfg).unwrap();
        let mut outputs: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
        for workers in [1, 2, 8] {
            let run = run_theta(&problem, &cfg.mc, workers).unwrap();
            let d = run_density(&run, &cfg.grid, None, false).unwrap();
            let (mut theta, mut density) = (Vec::new(), Vec::new());
            write_theta(&mut theta, &run.estimate).unwrap();
            write_density(&mut density, d.density.as_ref().unwrap(), None).unwrap();
            outputs.push((theta, density));
        }
        pass &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    // The command-line path writes the same bytes as well.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(
        &path,
        r#"{"dimension":2,"statistic":"x1 + x2","variables":[{"law":"uniform","count":2}],
            "decomposition":{"explicit":[{"h":"x1 - 0.5","active":1},{"h":"x2 - 0.5","active":2}]},
            "mc":{"samples":20000,"seed":4}}"#,
    )
    .unwrap();
    let mut files = Vec::new();
    for workers in [1, 2, 8] {
        let out = dir.path().join(format!("w{workers}"));
        let cmd = stein_density::cli::Command::Density {
            config: path.clone(),
            out_dir: out.clone(),
            force: false,
        };
        stein_density::cli::execute(cmd, &mut std::io::sink(), workers).unwrap();
        files.push(std::fs::read(out.join("density.csv")).unwrap());
    }
    pass &= files.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        pass,
        detail: "theta.csv and density.csv byte-identical across 1, 2 and 8 workers (library and command line)".into(),
    }
}

fn main() {
    let mut failures = 0;
    let n = 1_000_000;

    let t = Instant::now();
    report(3, "Gaussian kernel constant", t, criterion_3(), &mut failures);

    let t = Instant::now();
    report(9, "Cuadras covariance", t, criterion_9(), &mut failures);

    let t = Instant::now();
    report(6, "Irwin-Hall identity", t, criterion_6(), &mut failures);

    let t = Instant::now();
    let gauss = theta_run(&linear_gaussian(n, 101));
    let cw3 = theta_run(&curie_weiss(&[1.0, 2.0, 3.0], n, 102));
    let unif = theta_run(&uniform_sum(3, n, 103));
    report(
        1,
        "Stein identity",
        t,
        criterion_1(&[("linear Gaussian", &gauss), ("Curie-Weiss (1,2,3)", &cw3), ("uniform sum", &unif)]),
        &mut failures,
    );

    let t = Instant::now();
    report(2, "decomposition invariance", t, criterion_2(), &mut failures);

    let t = Instant::now();
    let chi2 = theta_run(&curie_weiss(&[1.0, 1.0], n, 104));
    let chi4 = theta_run(&curie_weiss(&[1.0; 4], n, 105));
    report(4, "chi-square recovery", t, criterion_4(&[(2, &chi2), (4, &chi4)]), &mut failures);

    let t = Instant::now();
    let cw12 = theta_run(&curie_weiss(&[1.0, 2.0], n, 106));
    report(5, "Curie-Weiss bounds", t, criterion_5(&cw12), &mut failures);

    let continuous = [
        ("linear Gaussian", &gauss),
        ("Curie-Weiss (1,2,3)", &cw3),
        ("uniform sum 3", &unif),
        ("chi-square 2", &chi2),
        ("chi-square 4", &chi4),
        ("Curie-Weiss (1,2)", &cw12),
    ];
    let t = Instant::now();
    report(7, "inverse relation round trip", t, criterion_7(&continuous), &mut failures);

    let t = Instant::now();
    report(8, "existence detection", t, criterion_8(&continuous), &mut failures);

    let t = Instant::now();
    report(10, "reproducibility", t, criterion_10(), &mut failures);

    // A closed-form theta needs no sampling; keep the synthetic Gaussian path honest too.
    let p = reconstruct(|_| 1.0, (-8.0, 8.0), 512).unwrap();
    assert!((p.pdf(0.0) - 0.3989).abs() < 5e-4);

    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
