//! Acceptance criteria, one line per criterion.
//!
//! Runs as a plain program (`harness = false`). Every criterion is evaluated
//! with its stated tolerance and runtime budget. The process fails if any
//! criterion fails, except those listed in `EXPECTED_FAILURES`, which still
//! print FAIL together with the measured values.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use crib_bse::fim::{crib_model, CribSetup, ModelKind};
use crib_bse::mle::FitOptions;
use crib_bse::simulate::{empirical_isr, generate, trial_seed, MixtureConfig};
use crib_bse::sweep::{run_sweep, Preset, ResultRow, SweepSpec};
use crib_bse::validation::{self, estimator_batch, Check};
use crib_bse::GgdParams;

/// Criterion 8 asks for the median ISR of an efficient estimator to lie at
/// or above the mean-ISR bound; the ISR of such an estimator is the bound
/// times a chi-square variable with 4 degrees of freedom over 4, whose
/// median is 0.84. See the README.
const EXPECTED_FAILURES: &[u32] = &[8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

fn setup(alpha: f64, gamma: f64, tau: f64) -> CribSetup {
    CribSetup::linear(5, 5000, 10, GgdParams::new(alpha, gamma).unwrap(), tau).unwrap()
}

fn crit_closed_form() -> Outcome {
    const TOL: f64 = 1e-9;
    let reference = 4.0 / (5000.0 * (4.0 / std::f64::consts::PI - 1.0));
    let s = setup(2.0, 0.0, 1.0);
    let cvx = crib_model(ModelKind::CvxCsv, &s).unwrap().isr;
    let csv = crib_model(ModelKind::Csv, &s).unwrap().isr;
    let err = rel(cvx, reference).max(rel(csv, reference));
    outcome(
        err < TOL,
        format!("CvxCSV {cvx:.6e}, CSV {csv:.6e} vs {reference:.6e}; max rel err {err:.2e} < {TOL:.0e}"),
    )
}

fn crit_coincidence() -> Outcome {
    const TOL_T2: f64 = 1e-12;
    const TOL_T1: f64 = 1e-10;
    let checks = validation::coincidence(2024).unwrap();
    let (t2, t1) = (checks[0].measured, checks[1].measured);
    outcome(
        t2 < TOL_T2 && t1 < TOL_T1,
        format!("T=2 max rel diff {t2:.2e} < {TOL_T2:.0e}; T=1 max rel diff vs static bound {t1:.2e} < {TOL_T1:.0e}"),
    )
}

fn crit_identifiability() -> Outcome {
    let cases: [((f64, f64, f64), [bool; 3]); 3] = [
        ((1.0, 0.0, 1.0), [false, false, false]),
        ((1.0, 0.0, 0.0), [true, false, false]),
        ((1.0, 0.5, 0.0), [true, true, true]),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for ((a, g, t), expected) in cases {
        let s = setup(a, g, t);
        let got: Vec<bool> = ModelKind::ALL.iter().map(|&m| crib_model(m, &s).unwrap().identifiable).collect();
        ok &= got == expected;
        parts.push(format!("(a={a},g={g},t={t}) {got:?}"));
    }
    outcome(ok, format!("identifiable [CvxCSV, CSV, BICE]: {}", parts.join("; ")))
}

fn preset_rows() -> Vec<(Preset, Vec<ResultRow>)> {
    [Preset::Chart1, Preset::Chart2, Preset::Chart3]
        .into_iter()
        .map(|p| (p, run_sweep(&SweepSpec::preset(p)).unwrap()))
        .collect()
}

fn crit_ordering() -> Outcome {
    const SLACK: f64 = 1e-12;
    let mut points = 0;
    let mut worst = f64::NEG_INFINITY;
    for (_, rows) in preset_rows() {
        for chunk in rows.chunks(3) {
            let isr: Vec<f64> = ModelKind::ALL
                .iter()
                .map(|&m| chunk.iter().find(|r| r.model == m).unwrap().isr)
                .collect();
            if isr[0].is_finite() {
                points += 1;
                worst = worst.max(isr[0] - isr[1]).max(isr[1] - isr[2]);
            }
        }
    }
    outcome(
        worst <= SLACK,
        format!("{points} identifiable grid points; max of CvxCSV-CSV and CSV-BICE {worst:.2e} <= {SLACK:.0e}"),
    )
}

fn report_checks(checks: &[Check], tol: f64) -> Outcome {
    let worst = checks.iter().map(|c| c.measured).fold(0.0, f64::max);
    let failing: Vec<&str> = checks.iter().filter(|c| c.measured >= tol).map(|c| c.name.as_str()).collect();
    let mut detail = format!("{} checks, worst {worst:.3e} < {tol}", checks.len());
    if !failing.is_empty() {
        detail.push_str(&format!("; failing: {}", failing.join(" | ")));
    }
    outcome(failing.is_empty(), detail)
}

fn crit_fim_oracle() -> Outcome {
    report_checks(&validation::fim_oracle(2024).unwrap(), 0.05)
}

fn crit_sampler() -> Outcome {
    let checks = validation::sampler_moments(2024, 1.0).unwrap();
    let (kappa, moments): (Vec<Check>, Vec<Check>) = checks.into_iter().partition(|c| c.name.contains("kappa_bar"));
    let m = report_checks(&moments, 0.01);
    let k = report_checks(&kappa, 0.02);
    outcome(m.pass && k.pass, format!("moments: {}; kappa_bar: {}", m.detail, k.detail))
}

fn crit_gradient() -> Outcome {
    report_checks(&validation::gradient(2024).unwrap(), 1e-4)
}

fn crit_attainment() -> Outcome {
    let (d, n, blocks, seeds, base) = (3, 20_000, 10, 50, 0);
    let ggd = GgdParams::new(0.25, 0.0).unwrap();
    let summary = estimator_batch(d, n, blocks, ggd, 1.0, seeds, base, &FitOptions::default()).unwrap();
    let ratio = summary.median_isr / summary.crib;
    let in_window = (1.0..=5.0).contains(&ratio);
    let oracle_zero = (0..seeds as u64).all(|k| {
        let cfg = MixtureConfig::equivariant(d, n, blocks, ggd, 1.0, trial_seed(base, k)).unwrap();
        let data = generate(&cfg).unwrap();
        empirical_isr(&data, &cfg.separator, &cfg).unwrap() == 0.0
    });
    outcome(
        in_window && oracle_zero,
        format!(
            "median ISR/CRIB {ratio:.3} in [1, 5]: {in_window}; mean ISR/CRIB {:.3}; CRIB {:.4e}; \
             {}/{seeds} fits converged; oracle separator ISR == 0 on all seeds: {oracle_zero}",
            summary.mean_isr / summary.crib,
            summary.crib,
            summary.converged,
        ),
    )
}

fn curve(rows: &[ResultRow], m: ModelKind) -> Vec<f64> {
    rows.iter().filter(|r| r.model == m).map(|r| r.isr).collect()
}

fn crit_trends() -> Outcome {
    let rows = preset_rows();
    let chart2 = &rows[1].1;
    let chart3 = &rows[2].1;
    let gamma_ok = ModelKind::ALL.iter().all(|&m| curve(chart2, m).windows(2).all(|w| w[1] <= w[0]));
    let tau_ok = curve(chart3, ModelKind::CvxCsv).windows(2).all(|w| w[1] >= w[0]);
    outcome(
        gamma_ok && tau_ok,
        format!("all bounds nonincreasing in gamma: {gamma_ok}; CvxCSV nondecreasing in tau: {tau_ok}"),
    )
}

fn run_cli(args: &[&str], out: &Path) -> (i32, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_crib-bse"))
        .args(args)
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .expect("binary runs");
    (status.code().unwrap_or(-1), std::fs::read(out).unwrap_or_default())
}

fn crit_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut runs: Vec<Vec<&str>> = Vec::new();
    let suites = ["fim-oracle", "sampler-moments", "closed-form", "coincidence", "ordering", "gradient"];
    for s in &suites {
        runs.push(vec!["validate", "--suite", s, "--seed", "7"]);
    }
    for p in ["chart1", "chart2", "chart3"] {
        runs.push(vec!["sweep", "--preset", p]);
        runs.push(vec!["sweep", "--preset", p, "--format", "json"]);
    }
    runs.push(vec!["simulate", "--d", "4", "--N", "4000", "--T", "8", "--alpha", "0.5", "--tau", "0.3", "--seed", "9"]);
    runs.push(vec!["simulate", "--N", "2000", "--geometry", "random", "--format", "bin", "--seed", "9"]);
    runs.push(vec!["estimate", "--batch", "3", "--N", "2000", "--seed", "4"]);

    let mut mismatched = Vec::new();
    for (k, args) in runs.iter().enumerate() {
        let (a, b) = (dir.path().join(format!("{k}a")), dir.path().join(format!("{k}b")));
        let (ca, ba) = run_cli(args, &a);
        let (cb, bb) = run_cli(args, &b);
        if ca != 0 || cb != 0 || ba.is_empty() || ba != bb {
            mismatched.push(format!("{} (exit {ca}/{cb})", args.join(" ")));
        }
    }
    let detail = if mismatched.is_empty() {
        format!("{} commands, each run twice: byte-identical outputs", runs.len())
    } else {
        format!("differing or failing: {}", mismatched.join("; "))
    };
    outcome(mismatched.is_empty(), detail)
}

type Criterion = (u32, &'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [Criterion; 10] = [
        (1, "closed-form equivalence", crit_closed_form, secs(1)),
        (2, "model coincidence", crit_coincidence, secs(5)),
        (3, "identifiability matrix", crit_identifiability, secs(1)),
        (4, "ordering CvxCSV <= CSV <= BICE", crit_ordering, secs(10)),
        (5, "Monte Carlo FIM oracle", crit_fim_oracle, secs(60)),
        (6, "GGD sampler moments", crit_sampler, secs(60)),
        (7, "likelihood gradient check", crit_gradient, secs(30)),
        (8, "estimator attainment", crit_attainment, secs(600)),
        (9, "chart trends", crit_trends, secs(5)),
        (10, "determinism", crit_determinism, None),
    ];

    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, run, budget) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let res = run();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let pass = res.pass && in_time;
        let budget_note = match budget {
            Some(b) => format!("{:.2}s < {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        let tag = match (pass, EXPECTED_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} [{tag}] {name}: {}; runtime {budget_note}", res.detail);
        if !pass && !EXPECTED_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}
