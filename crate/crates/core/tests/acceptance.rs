//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line for its
//! criterion (plus detail lines) and then asserts it.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use frackg::cli::{self, MatrixCase, SweepSpec, TABLE_MU, TABLE_Q};
use frackg::conformable::{conf_deriv_limit, FracOrder};
use frackg::hulthen_kg::{self, HulthenParams};
use frackg::mu_algebra::Exponent;
use frackg::nu_core::{self, NuProblem};
use frackg::verify::{self, FdConfig};
use num_rational::Rational64;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// Printed ground-state energies, rows q = 0.5, 1, 1.5, columns mu = 1/4, 1/2, 3/4, 1.
const REFERENCE: [(u8, [[f64; 4]; 3]); 3] = [
    (
        1,
        [
            [0.376295, 0.441808, 0.478148, 0.496505],
            [0.42148, 0.48417, 0.5, 0.498157],
            [0.45227, 0.5, 0.503884, 0.490179],
        ],
    ),
    (
        2,
        [
            [0.84296, 0.962835, 1.0, 0.996314],
            [0.947387, 1.01761, 1.00519, 0.964541],
            [1.0, 1.02942, 0.994548, 0.941246],
        ],
    ),
    (
        3,
        [
            [1.89477, 2.03522, 2.01038, 1.92908],
            [2.05619, 2.06136, 1.97015, 1.85251],
            [2.1062, 2.05407, 1.94451, 1.81759],
        ],
    ),
];

/// The single cell where the printed value is taken to be a misprint.
const PRESUMED_TYPO: (u8, f64, (i64, i64), f64, &str) = (1, 1.0, (1, 2), 0.48417, "0.481417");

struct Verdict {
    name: &'static str,
    pass: bool,
    elapsed: Duration,
    limit: Duration,
    details: Vec<String>,
}

impl Verdict {
    fn report(&self) {
        for d in &self.details {
            println!("    {d}");
        }
        let ok = self.pass && self.elapsed <= self.limit;
        let line = format!(
            "{} {} ({:.2?}, limit {:.0?})\n",
            if ok { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed,
            self.limit
        );
        // straight to the stream so the verdict shows even when output is captured
        let _ = std::io::stderr().write_all(line.as_bytes());
    }

    fn assert(self) {
        self.report();
        assert!(self.pass, "{} failed", self.name);
        assert!(
            self.elapsed <= self.limit,
            "{} took {:?} > {:?}",
            self.name,
            self.elapsed,
            self.limit
        );
    }
}

fn rng() -> TestRunner {
    TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: &S, count: usize) -> Vec<S::Value> {
    (0..count)
        .map(|_| s.new_tree(runner).expect("strategy").current())
        .collect()
}

fn mu_of((n, d): (i64, i64)) -> FracOrder {
    FracOrder::from_ratio(n, d).unwrap()
}

fn table_reproduction() -> Verdict {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    let bin = env!("CARGO_BIN_EXE_frackg");
    for (which, rows) in REFERENCE {
        let out = Command::new(bin)
            .args(["table", &which.to_string()])
            .output()
            .expect("run table");
        let stdout = String::from_utf8_lossy(&out.stdout);
        let stderr = String::from_utf8_lossy(&out.stderr);
        pass &= out.status.success();
        let printed: Vec<Vec<String>> = stdout
            .lines()
            .skip(1)
            .map(|l| l.split(',').skip(1).map(str::to_string).collect())
            .collect();
        for (i, q) in TABLE_Q.iter().enumerate() {
            for (j, &mu) in TABLE_MU.iter().enumerate() {
                let reference = rows[i][j];
                let Some(cell) = printed.get(i).and_then(|r| r.get(j)) else {
                    pass = false;
                    details.push(format!("table {which} q={q} mu={}/{}: missing", mu.0, mu.1));
                    continue;
                };
                let value: f64 = cell.parse().unwrap_or(f64::NAN);
                let is_typo = which == PRESUMED_TYPO.0 && *q == PRESUMED_TYPO.1 && mu == PRESUMED_TYPO.2;
                if is_typo {
                    let cited = stderr.contains(&PRESUMED_TYPO.3.to_string());
                    let ok = cell == PRESUMED_TYPO.4 && cited;
                    pass &= ok;
                    details.push(format!(
                        "table {which} q={q} mu={}/{}: output {cell}, ledger cites {}: {}",
                        mu.0,
                        mu.1,
                        PRESUMED_TYPO.3,
                        if ok { "ok" } else { "MISMATCH" }
                    ));
                    continue;
                }
                let delta = (value - reference).abs();
                if !(delta <= 5e-6) {
                    pass = false;
                    details.push(format!(
                        "table {which} q={q} mu={}/{}: output {cell}, reference {reference}, |delta| = {delta:.3e} > 5e-6",
                        mu.0, mu.1
                    ));
                }
            }
        }
    }
    for (which, q, mu, expect) in [
        (1u8, 0.5, (1, 4), 0.376295),
        (1, 1.0, (1, 1), 0.498157),
        (2, 1.5, (1, 2), 1.02942),
        (3, 1.5, (1, 4), 2.1062),
    ] {
        let alpha = cli::table_alpha(which).unwrap();
        let p = HulthenParams::compton(0.25, alpha, q, mu_of(mu)).unwrap();
        let e = hulthen_kg::energy(0, &p).unwrap().energy;
        let ok = (e - expect).abs() <= 5e-6;
        pass &= ok;
        details.push(format!(
            "anchor table {which} q={q} mu={}/{}: {e:.7} vs {expect} {}",
            mu.0,
            mu.1,
            if ok { "ok" } else { "MISMATCH" }
        ));
    }
    Verdict {
        name: "table reproduction",
        pass,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(1),
        details,
    }
}

fn table_params() -> Vec<(u8, f64, FracOrder, HulthenParams)> {
    let mut v = Vec::new();
    for which in 1..=3u8 {
        let alpha = cli::table_alpha(which).unwrap();
        for q in TABLE_Q {
            for mu in TABLE_MU {
                let mu = mu_of(mu);
                v.push((which, q, mu, HulthenParams::compton(0.25, alpha, q, mu).unwrap()));
            }
        }
    }
    v
}

fn oracle_triangle() -> Verdict {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    let mut worst_rel = 0.0f64;
    for (which, q, mu, p) in table_params() {
        let closed = hulthen_kg::energy(0, &p).unwrap().energy;
        match verify::quantize_numeric(0, &p) {
            Ok(num) => {
                let rel = (closed - num.energy).abs() / closed.abs();
                worst_rel = worst_rel.max(rel);
                if !(rel <= 1e-10) {
                    pass = false;
                    details.push(format!("quantize table {which} q={q} mu={mu}: rel {rel:.3e}"));
                }
            }
            Err(e) => {
                pass = false;
                details.push(format!("quantize table {which} q={q} mu={mu}: {e}"));
            }
        }
        if mu.is_classical() {
            let fd = verify::fd_eigensolve_mu1(&p, 1, &FdConfig::standard(p.alpha));
            match fd {
                Ok(fd) => {
                    let delta = (fd.energies[0] - closed).abs();
                    let ok = delta <= 5e-4;
                    pass &= ok;
                    details.push(format!(
                        "fd table {which} q={q}: fd {:.6} closed {closed:.6} |delta| {delta:.2e} {}",
                        fd.energies[0],
                        if ok { "ok" } else { "MISMATCH" }
                    ));
                }
                Err(e) => {
                    pass = false;
                    details.push(format!("fd table {which} q={q}: {e}"));
                }
            }
        }
    }
    details.push(format!(
        "closed form vs numeric quantization: worst rel {worst_rel:.2e} over 36 cells"
    ));
    Verdict {
        name: "oracle triangle",
        pass,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(30),
        details,
    }
}

fn residual_suite() -> Verdict {
    let start = Instant::now();
    let mut details = Vec::new();
    let cases: Vec<MatrixCase> = cli::builtin_matrix();
    let mut failed = 0;
    for c in &cases {
        let r = cli::check_residual(c);
        if !r.pass {
            failed += 1;
            details.push(format!(
                "alpha={} q={} mu={} n={}: residual {:.3e}, perturbed {:?}{}",
                c.alpha,
                c.q,
                c.mu,
                c.n,
                r.oracle_value.unwrap_or(f64::NAN),
                r.perturbed_residuals,
                r.error.map(|e| format!(", {e}")).unwrap_or_default()
            ));
        }
    }
    details.push(format!("{} of {} (cell, n) pairs failed", failed, cases.len()));
    Verdict {
        name: "residual suite",
        pass: failed == 0,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(30),
        details,
    }
}

/// `a t^p + b e^(c t)` with positive parameters: positive and increasing on `t > 0`.
#[derive(Debug, Clone, Copy)]
struct TestFn {
    a: f64,
    p: f64,
    b: f64,
    c: f64,
}

impl TestFn {
    fn f(&self, t: f64) -> f64 {
        self.a * t.powf(self.p) + self.b * (self.c * t).exp()
    }
    fn d1(&self, t: f64) -> f64 {
        self.a * self.p * t.powf(self.p - 1.0) + self.b * self.c * (self.c * t).exp()
    }
    fn d2(&self, t: f64) -> f64 {
        self.a * self.p * (self.p - 1.0) * t.powf(self.p - 2.0) + self.b * self.c * self.c * (self.c * t).exp()
    }
}

fn test_fn() -> impl Strategy<Value = TestFn> {
    (0.1f64..3.0, 1.0f64..3.0, 0.1f64..2.0, 0.1f64..1.5).prop_map(|(a, p, b, c)| TestFn { a, p, b, c })
}

fn order() -> impl Strategy<Value = FracOrder> {
    (1i64..=8).prop_flat_map(|d| (1i64..=d).prop_map(move |n| FracOrder::from_ratio(n, d).unwrap()))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn conformable_suite() -> Verdict {
    let start = Instant::now();
    let mut runner = rng();
    let cases = sample(
        &mut runner,
        &(test_fn(), test_fn(), 0.2f64..3.0, order(), 0.1f64..2.0, 0.1f64..2.0),
        120,
    );
    let lim =
        |f: &dyn Fn(f64) -> f64, t: f64, mu: FracOrder| conf_deriv_limit(f, t, mu).map(|e| e.value).unwrap_or(f64::NAN);
    let mut worst = [0.0f64; 5];
    for &(f, g, t, mu, a, b) in &cases {
        let df = lim(&|s| f.f(s), t, mu);
        let dg = lim(&|s| g.f(s), t, mu);
        let lin = lim(&|s| a * f.f(s) + b * g.f(s), t, mu);
        worst[0] = worst[0].max(rel(lin, a * df + b * dg));
        let prod = lim(&|s| f.f(s) * g.f(s), t, mu);
        worst[1] = worst[1].max(rel(prod, f.f(t) * dg + g.f(t) * df));
        let chain = lim(&|s| f.f(g.f(s)), t, mu);
        worst[2] = worst[2].max(rel(chain, f.d1(g.f(t)) * dg));
        worst[3] = worst[3].max(rel(df, t.powf(1.0 - mu.value()) * f.d1(t)));
        let twice = lim(&|s| lim(&|u| f.f(u), s, mu), t, mu);
        let m = mu.value();
        let formula = t.powf(2.0 - 2.0 * m) * f.d2(t) + (1.0 - m) * t.powf(1.0 - 2.0 * m) * f.d1(t);
        worst[4] = worst[4].max(rel(twice, formula));
    }
    let names = ["linearity", "product", "chain", "key", "double application"];
    let limits = [1e-6, 1e-6, 1e-6, 1e-6, 1e-5];
    let mut pass = true;
    let mut details = Vec::new();
    for i in 0..5 {
        let ok = worst[i] <= limits[i];
        pass &= ok;
        details.push(format!(
            "{}: worst rel {:.2e} over {} cases (limit {:.0e})",
            names[i],
            worst[i],
            cases.len(),
            limits[i]
        ));
    }
    Verdict {
        name: "conformable property suite",
        pass,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(60),
        details,
    }
}

fn nu_invariants() -> Verdict {
    let start = Instant::now();
    let mut runner = rng();
    let strategy = (
        order(),
        0.1f64..2.0,
        0.2f64..3.0,
        0.05f64..1.0,
        0.2f64..3.0,
        0.0f64..2.0,
    );
    let cases = sample(&mut runner, &strategy, 600);
    let mut worst = [0.0f64; 3];
    let mut slope_failures = 0;
    let mut errors = Vec::new();
    let key = |p: &NuProblem| Exponent::rational(p.mu.ratio() - Rational64::from_integer(1));
    for &(mu, q, alpha, s0, m, eps_sq) in &cases {
        let gamma_sq = s0 * s0 / (alpha * alpha);
        let beta_sq = 2.0 * m * s0 / (alpha * alpha);
        let run = || -> frackg::Result<[f64; 3]> {
            let p = NuProblem::new(s0, q, mu, gamma_sq, beta_sq, eps_sq)?;
            let sol = nu_core::build_solution(&p)?;
            let quad = nu_core::radicand_quadratic(&p, sol.k_mu);
            let disc = nu_core::discriminant(quad).abs() / nu_core::discriminant_scale(quad);
            if !(sol.tau_f.1 < 0.0) {
                return Err(frackg::Error::NoPhysicalBranch);
            }
            // lambda = k + pi_f' with pi_f' taken by the term algebra
            let pi_prime = nu_core::linear_in_w_sum(&p, sol.pi_f)?
                .differentiate()
                .coeff_of(key(&p), Exponent::zero());
            let lam = sol.k_mu + pi_prime;
            let lam_rel = rel(lam, nu_core::lambda_closed(&p, p.radical)?);
            let tau = nu_core::linear_in_w_sum(&p, sol.tau_f)?;
            let sigma = nu_core::sigma_f_sum(&p);
            let mut ln_rel = 0.0f64;
            for n in 0..5u32 {
                let nf = n as f64;
                let derived = tau
                    .differentiate()
                    .scale(-nf)?
                    .add(&sigma.nth_derivative(2).scale(-nf * (nf - 1.0) / 2.0)?)?
                    .coeff_of(key(&p), Exponent::zero());
                let closed = nu_core::lambda_n_closed(&p, p.radical, n)?;
                if n > 0 {
                    ln_rel = ln_rel.max(rel(derived, closed));
                } else {
                    ln_rel = ln_rel.max(derived.abs().max(closed.abs()));
                }
            }
            Ok([disc, lam_rel, ln_rel])
        };
        match run() {
            Ok(v) => {
                for i in 0..3 {
                    worst[i] = worst[i].max(v[i]);
                }
            }
            Err(frackg::Error::NoPhysicalBranch) => slope_failures += 1,
            Err(e) => errors.push(format!("mu={mu} q={q} alpha={alpha} S0={s0} m={m} eps^2={eps_sq}: {e}")),
        }
    }
    let limits = [1e-10, 1e-12, 1e-12];
    let pass = worst.iter().zip(limits).all(|(w, l)| *w <= l) && slope_failures == 0 && errors.is_empty();
    let mut details = vec![
        format!("discriminant at chosen k: worst rel {:.2e} (limit 1e-10)", worst[0]),
        format!("negative tau_f slope: {} failures", slope_failures),
        format!("lambda = k + pi_f': worst rel {:.2e} (limit 1e-12)", worst[1]),
        format!(
            "lambda_n closed vs term algebra: worst rel {:.2e} (limit 1e-12)",
            worst[2]
        ),
        format!("{} cases", cases.len()),
    ];
    details.extend(errors.into_iter().take(10));
    Verdict {
        name: "NU invariants",
        pass,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(60),
        details,
    }
}

/// `((alpha, q), [(mu, energy)])`
type Curve = ((f64, f64), Vec<(f64, Option<f64>)>);

fn figure_properties() -> Verdict {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    let bin = env!("CARGO_BIN_EXE_frackg");
    let dir = std::env::temp_dir().join(format!("frackg-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sweep.csv");
    let status = Command::new(bin)
        .args([
            "sweep",
            "--alpha",
            "0.5,1,2",
            "--q",
            "0.5,1,1.5",
            "--mu-points",
            "101",
            "--compton-units",
            "--out",
        ])
        .arg(&path)
        .status()
        .expect("run sweep");
    pass &= status.success();
    let text = std::fs::read_to_string(&path).unwrap_or_default();
    let _ = std::fs::remove_dir_all(&dir);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut curves: Vec<Curve> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let alpha: f64 = rec[0].parse().unwrap();
        let q: f64 = rec[1].parse().unwrap();
        let mu: FracOrder = rec[2].parse().unwrap();
        let energy: Option<f64> = if rec[4].is_empty() {
            None
        } else {
            Some(rec[4].parse().unwrap())
        };
        if energy.is_some_and(|e| !e.is_finite()) {
            pass = false;
        }
        match curves.iter_mut().find(|(k, _)| *k == (alpha, q)) {
            Some((_, v)) => v.push((mu.value(), energy)),
            None => curves.push(((alpha, q), vec![(mu.value(), energy)])),
        }
    }
    if curves.len() != 9 || curves.iter().any(|(_, v)| v.len() != 101) {
        pass = false;
        details.push("sweep CSV does not have 9 curves of 101 points".into());
    }
    let mut argmax = Vec::new();
    for ((alpha, q), pts) in &curves {
        // (a): a single onset, null below, finite at and above
        let onset = pts.iter().position(|(_, e)| e.is_some());
        let contiguous = onset.is_some_and(|i| pts[i..].iter().all(|(_, e)| e.is_some()));
        pass &= contiguous;
        let mu_min = onset.map(|i| pts[i].0).unwrap_or(f64::NAN);
        let best =
            pts.iter()
                .filter_map(|&(mu, e)| e.map(|e| (mu, e)))
                .fold(
                    (f64::NAN, f64::NEG_INFINITY),
                    |acc, (mu, e)| if e > acc.1 { (mu, e) } else { acc },
                );
        argmax.push(((*alpha, *q), best.0));
        details.push(format!(
            "alpha={alpha} q={q}: onset mu_min={mu_min:.4} ({} null points), argmax mu={:.4}",
            onset.unwrap_or(0),
            best.0
        ));
        if !contiguous {
            details.push(format!("alpha={alpha} q={q}: null points above the onset"));
        }
    }
    // (b): argmax non-increasing in alpha at fixed q
    for q in TABLE_Q {
        let mut seq: Vec<(f64, f64)> = argmax
            .iter()
            .filter(|((_, qq), _)| *qq == q)
            .map(|((a, _), m)| (*a, *m))
            .collect();
        seq.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ok = seq.windows(2).all(|w| w[1].1 <= w[0].1);
        pass &= ok;
        details.push(format!(
            "q={q}: argmax by alpha {:?} {}",
            seq,
            if ok { "non-increasing" } else { "INCREASES" }
        ));
    }
    let spec = SweepSpec {
        mu_grid: vec![FracOrder::one()],
        q_values: TABLE_Q.to_vec(),
        alpha_values: vec![0.5],
        s0: 0.25,
        n: 0,
        compton_units: true,
        m: None,
    };
    let column = cli::run_sweep(&spec).unwrap();
    for (row, expect) in column.iter().zip([0.496505, 0.498157, 0.490179]) {
        let ok = row.energy.is_some_and(|e| (e - expect).abs() <= 5e-6);
        pass &= ok;
    }
    Verdict {
        name: "figure-data properties",
        pass,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(30),
        details,
    }
}

#[test]
fn criterion_table_reproduction() {
    table_reproduction().assert();
}

#[test]
fn criterion_oracle_triangle() {
    oracle_triangle().assert();
}

#[test]
fn criterion_residual_suite() {
    residual_suite().assert();
}

#[test]
fn criterion_conformable_properties() {
    conformable_suite().assert();
}

#[test]
fn criterion_nu_invariants() {
    nu_invariants().assert();
}

#[test]
fn criterion_figure_data_properties() {
    figure_properties().assert();
}

/// Runs every criterion back to back; passes when the whole run fits in
/// two minutes, whatever the individual verdicts.
#[test]
fn criterion_full_suite_runtime() {
    let start = Instant::now();
    let verdicts = [
        table_reproduction(),
        oracle_triangle(),
        residual_suite(),
        conformable_suite(),
        nu_invariants(),
        figure_properties(),
    ];
    let elapsed = start.elapsed();
    let summary: Vec<String> = verdicts
        .iter()
        .map(|v| {
            format!(
                "{}: {} in {:.2?}",
                v.name,
                if v.pass { "pass" } else { "fail" },
                v.elapsed
            )
        })
        .collect();
    Verdict {
        name: "full suite runtime",
        pass: true,
        elapsed,
        limit: Duration::from_secs(120),
        details: summary,
    }
    .assert();
}
