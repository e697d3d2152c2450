use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crib_bse::fim::{crib_model, identity_backgrounds, variance_profile, CribSetup, ModelKind};
use crib_bse::mle::{fit, FitOptions, ThetaCvx};
use crib_bse::simulate::io::{read_dataset, write_dataset, DatasetFormat};
use crib_bse::simulate::{empirical_isr, generate, MixtureConfig};
use crib_bse::sweep::{self, gnuplot_script, run_sweep, Axis, Grid, Preset, ScheduleKind, SweepSpec};
use crib_bse::validation::{estimator_batch, run_suite, Suite, SuiteOptions, SuiteReport};
use crib_bse::{CVector, GgdParams};

use crate::args::{Common, EstimateArgs, SimulateArgs, SweepArgs, ValidateArgs};

/// Whether a completed command found everything in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ChecksFailed,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("out: cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json_to<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn ggd(c: &Common, alpha: f64, gamma: f64) -> Result<GgdParams> {
    GgdParams::new(c.alpha.unwrap_or(alpha), c.gamma.unwrap_or(gamma)).context("alpha/gamma")
}

fn check_schedule(c: &Common) -> Result<()> {
    if let Some(s) = &c.schedule {
        s.parse::<ScheduleKind>()?;
    }
    Ok(())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Path of `target` as seen from the directory `base`.
fn relative_to(target: &Path, base: &Path) -> Result<PathBuf> {
    let (t, b) = (std::path::absolute(target)?, std::path::absolute(base)?);
    let (tc, bc): (Vec<Component>, Vec<Component>) = (t.components().collect(), b.components().collect());
    let common = tc.iter().zip(&bc).take_while(|(x, y)| x == y).count();
    let mut rel: PathBuf = std::iter::repeat_n("..", bc.len() - common).collect();
    rel.extend(&tc[common..]);
    Ok(rel)
}

pub fn sweep(args: SweepArgs) -> Result<Outcome> {
    let c = &args.common;
    check_schedule(c)?;
    let mut spec = match &args.preset {
        Some(p) => SweepSpec::preset(p.parse::<Preset>()?),
        None => {
            let Some(axis) = &args.axis else { bail!("axis: required unless --preset is given") };
            let Some(grid) = &args.grid else { bail!("grid: required unless --preset is given") };
            SweepSpec { axis: axis.parse()?, grid: grid.parse()?, ..SweepSpec::preset(Preset::Chart1) }
        }
    };
    if let Some(a) = &args.axis {
        spec.axis = a.parse::<Axis>()?;
    }
    if let Some(g) = &args.grid {
        spec.grid = g.parse::<Grid>()?;
    }
    if let Some(m) = &args.models {
        spec.models = m.split(',').map(|s| s.trim().parse::<ModelKind>()).collect::<crib_bse::Result<_>>()?;
    }
    spec.d = c.d.unwrap_or(spec.d);
    spec.n = c.n.unwrap_or(spec.n);
    spec.blocks = c.blocks.unwrap_or(spec.blocks);
    spec.alpha = c.alpha.unwrap_or(spec.alpha);
    spec.gamma = c.gamma.unwrap_or(spec.gamma);
    spec.tau = c.tau.unwrap_or(spec.tau);
    spec.validate()?;

    let format = c.format.as_deref().unwrap_or("csv");
    let rows = run_sweep(&spec)?;
    let mut out = output(c.out.as_deref())?;
    match format {
        "csv" => sweep::write_csv(&rows, &mut out)?,
        "json" => sweep::write_json(&rows, &mut out)?,
        other => bail!("format: expected csv or json, got '{other}'"),
    }
    out.flush()?;

    if let Some(script) = &args.gnuplot {
        let Some(csv_path) = c.out.as_deref().filter(|_| format == "csv") else {
            bail!("gnuplot: needs --out with --format csv");
        };
        let dir = script.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let rel = relative_to(csv_path, dir)?;
        std::fs::write(script, gnuplot_script(&spec, &rel.to_string_lossy()))
            .with_context(|| format!("gnuplot: cannot write {}", script.display()))?;
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct ValidationOutput {
    passed: bool,
    suites: Vec<SuiteReport>,
}

pub fn validate(args: ValidateArgs) -> Result<Outcome> {
    let c = &args.common;
    if let Some(f) = c.format.as_deref().filter(|f| *f != "json") {
        bail!("format: validation reports are JSON, got '{f}'");
    }
    let suites = match args.suite.as_deref() {
        None => bail!("suite: required (one of fim-oracle, sampler-moments, closed-form, coincidence, ordering, gradient, all)"),
        Some("all") => Suite::ALL.to_vec(),
        Some(s) => vec![s.parse::<Suite>()?],
    };
    let opts = SuiteOptions { seed: c.seed.unwrap_or(0), rho_factor: args.rho_factor.unwrap_or(1.0) };
    let reports = suites.into_iter().map(|s| run_suite(s, &opts)).collect::<crib_bse::Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.passed);
    for r in &reports {
        eprintln!("{}: {}", r.suite, if r.passed { "pass" } else { "FAIL" });
    }
    write_json_to(&ValidationOutput { passed, suites: reports }, c.out.as_deref())?;
    Ok(if passed { Outcome::Success } else { Outcome::ChecksFailed })
}

pub fn simulate(args: SimulateArgs) -> Result<Outcome> {
    let c = &args.common;
    check_schedule(c)?;
    let (d, n, blocks) = (c.d.unwrap_or(5), c.n.unwrap_or(5000), c.blocks.unwrap_or(10));
    if blocks == 0 || n % blocks != 0 {
        bail!("N: {n} is not divisible by T = {blocks}");
    }
    let p = ggd(c, 1.0, 0.0)?;
    let (tau, seed) = (c.tau.unwrap_or(0.0), c.seed.unwrap_or(0));
    let cfg = match args.geometry.as_deref().unwrap_or("equivariant") {
        "equivariant" => MixtureConfig::equivariant(d, n, blocks, p, tau, seed)?,
        "random" => MixtureConfig::random_geometry(d, n, blocks, p, tau, seed)?,
        other => bail!("geometry: expected equivariant or random, got '{other}'"),
    };
    let format: DatasetFormat = c.format.as_deref().unwrap_or("json").parse().context("format")?;
    let Some(out) = &c.out else { bail!("out: required for simulate") };
    let data = generate(&cfg)?;
    write_dataset(out, &cfg, &data, format)?;

    let nb = cfg.samples_per_block()?;
    let sigma = variance_profile(tau, blocks)?;
    let mut w = io::stdout().lock();
    writeln!(w, "d={d} N={n} T={blocks} N_b={nb} schedule=linear seed={seed}")?;
    writeln!(w, "t lambda sigma")?;
    for t in 1..=blocks {
        writeln!(w, "{t} {} {}", cfg.path.schedule().lambda(t)?, sigma[t - 1])?;
    }
    Ok(Outcome::Success)
}

fn complex_list(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Serialize)]
struct ThetaOut {
    g1: Vec<[f64; 2]>,
    g_last: Vec<[f64; 2]>,
    h: Vec<[f64; 2]>,
}

impl From<&ThetaCvx> for ThetaOut {
    fn from(t: &ThetaCvx) -> Self {
        Self { g1: complex_list(&t.g1), g_last: complex_list(&t.g_last), h: complex_list(&t.h) }
    }
}

const UNIDENTIFIABLE: &str = "not identifiable: the CvxCSV bound is infinite at this source profile";

#[derive(Serialize)]
struct EstimateReport {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    blocks: usize,
    alpha: f64,
    gamma: f64,
    tau: f64,
    init: String,
    theta: ThetaOut,
    loglik: f64,
    iterations: usize,
    converged: bool,
    isr: f64,
    crib: Option<f64>,
    ratio: Option<f64>,
    identifiable: bool,
    warning: Option<&'static str>,
}

#[derive(Serialize)]
struct BatchReport {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    blocks: usize,
    alpha: f64,
    gamma: f64,
    tau: f64,
    seeds: usize,
    base_seed: u64,
    crib: Option<f64>,
    isr: Vec<f64>,
    median_isr: f64,
    mean_isr: f64,
    quartiles: (f64, f64),
    median_ratio: Option<f64>,
    mean_ratio: Option<f64>,
    converged: usize,
    identifiable: bool,
    warning: Option<&'static str>,
}

fn fit_options(args: &EstimateArgs) -> FitOptions {
    let defaults = FitOptions::default();
    FitOptions {
        restarts: args.restarts.unwrap_or(defaults.restarts),
        max_iters: args.max_iters.unwrap_or(defaults.max_iters),
        seed: args.common.seed.unwrap_or(0),
        ..defaults
    }
}

pub fn estimate(args: EstimateArgs) -> Result<Outcome> {
    let c = &args.common;
    if let Some(f) = c.format.as_deref().filter(|f| *f != "json") {
        bail!("format: estimation reports are JSON, got '{f}'");
    }
    let mut opts = fit_options(&args);
    if let Some(k) = args.batch {
        if args.dataset.is_some() {
            bail!("batch: cannot be combined with --dataset");
        }
        check_schedule(c)?;
        let p = ggd(c, 0.25, 0.0)?;
        let (d, n, blocks, tau) = (c.d.unwrap_or(3), c.n.unwrap_or(20_000), c.blocks.unwrap_or(10), c.tau.unwrap_or(1.0));
        if k == 0 {
            bail!("batch: needs at least one seed");
        }
        let s = estimator_batch(d, n, blocks, p, tau, k, opts.seed, &opts)?;
        let crib = finite(s.crib);
        let report = BatchReport {
            d,
            n,
            blocks,
            alpha: p.alpha(),
            gamma: p.gamma(),
            tau,
            seeds: s.seeds,
            base_seed: opts.seed,
            crib,
            median_ratio: crib.map(|b| s.median_isr / b),
            mean_ratio: crib.map(|b| s.mean_isr / b),
            isr: s.isr,
            median_isr: s.median_isr,
            mean_isr: s.mean_isr,
            quartiles: s.quartiles,
            converged: s.converged,
            identifiable: crib.is_some(),
            warning: crib.is_none().then_some(UNIDENTIFIABLE),
        };
        write_json_to(&report, c.out.as_deref())?;
        return Ok(Outcome::Success);
    }

    let Some(path) = &args.dataset else { bail!("dataset: required unless --batch is given") };
    let (cfg, data) = read_dataset(path).with_context(|| format!("dataset: cannot load {}", path.display()))?;
    let init = args.init.as_deref().unwrap_or("random");
    match init {
        "random" => {}
        "truth" | "oracle" => {
            opts.init = Some(ThetaCvx::from_truth(&cfg));
            opts.restarts = 0;
            if init == "oracle" {
                opts.max_iters = 0;
            }
        }
        other => bail!("init: expected random, truth or oracle, got '{other}'"),
    }
    let blocks = cfg.blocks();
    let rep = fit(
        &data,
        cfg.path.schedule(),
        cfg.ggd,
        &cfg.sigma()?,
        &identity_backgrounds(cfg.d - 1, blocks),
        &opts,
    )?;
    let isr = empirical_isr(&data, &rep.theta.separator(), &cfg)?;
    let setup = CribSetup {
        d: cfg.d,
        n: cfg.n,
        schedule: cfg.path.schedule().clone(),
        ggd: cfg.ggd,
        tau: cfg.tau,
        cz: None,
    };
    let bound = crib_model(ModelKind::CvxCsv, &setup)?;
    let crib = finite(bound.isr);
    let report = EstimateReport {
        d: cfg.d,
        n: cfg.n,
        blocks,
        alpha: cfg.ggd.alpha(),
        gamma: cfg.ggd.gamma(),
        tau: cfg.tau,
        init: init.to_string(),
        theta: ThetaOut::from(&rep.theta),
        loglik: rep.loglik,
        iterations: rep.iterations,
        converged: rep.converged,
        isr,
        crib,
        ratio: crib.map(|b| isr / b),
        identifiable: bound.identifiable,
        warning: (!bound.identifiable).then_some(UNIDENTIFIABLE),
    };
    write_json_to(&report, c.out.as_deref())?;
    Ok(Outcome::Success)
}
