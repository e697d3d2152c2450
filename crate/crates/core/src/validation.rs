//! Self-check suites: each compares a computed quantity with an independent
//! oracle and reports a measured value, the bound it must stay within, and a
//! pass flag. Reports are deterministic for a given seed.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fim::{
    closed_form_isr, crib_model, fim_per_block, identity_backgrounds, BasisWeights, CribSetup, ModelKind,
    SourceProfile,
};
use crate::ggd::{kappa_bar, sample_ggd_with_rho, GgdDensity, GgdParams};
use crate::mle::{Likelihood, ThetaCvx};
use crate::numerics::{CMatrix, C64};
use crate::simulate::{generate, trial_seed, MixtureConfig};
use crate::sweep::{run_sweep, Preset, SweepSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    FimOracle,
    SamplerMoments,
    ClosedForm,
    Coincidence,
    Ordering,
    Gradient,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::FimOracle,
        Suite::SamplerMoments,
        Suite::ClosedForm,
        Suite::Coincidence,
        Suite::Ordering,
        Suite::Gradient,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::FimOracle => "fim-oracle",
            Suite::SamplerMoments => "sampler-moments",
            Suite::ClosedForm => "closed-form",
            Suite::Coincidence => "coincidence",
            Suite::Ordering => "ordering",
            Suite::Gradient => "gradient",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("suite: unknown suite '{s}'")))
    }
}

/// One comparison. `pass` is `measured <= bound` unless stated otherwise in
/// the name.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, pass: measured <= bound }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64, checks: Vec<Check>) -> Self {
        Self { suite, seed, passed: checks.iter().all(|c| c.pass), checks }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Multiplies the sampler's `rho`; anything but 1 must make the
    /// sampler-moments suite fail.
    pub rho_factor: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 0, rho_factor: 1.0 }
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::FimOracle => fim_oracle(opts.seed)?,
        Suite::SamplerMoments => sampler_moments(opts.seed, opts.rho_factor)?,
        Suite::ClosedForm => closed_form(opts.seed)?,
        Suite::Coincidence => coincidence(opts.seed)?,
        Suite::Ordering => ordering()?,
        Suite::Gradient => gradient(opts.seed)?,
    };
    Ok(SuiteReport::new(suite, opts.seed, checks))
}

fn rel_err(x: f64, reference: f64) -> f64 {
    if x == reference {
        0.0
    } else {
        (x - reference).abs() / reference.abs()
    }
}

const FIM_ORACLE_PAIRS: [(f64, f64); 6] = [(0.5, 0.0), (0.5, 0.5), (1.0, 0.0), (1.0, 0.5), (2.0, 0.0), (2.0, 0.5)];
pub const FIM_ORACLE_SAMPLES_PER_BLOCK: usize = 100_000;

/// Analytic per-block information against the sample covariance of the
/// per-sample gradient terms at the equivariant point
/// (`-mu_k s* C^-1 z` for each endpoint and `phi_t(s) z` for `h`).
pub fn fim_oracle(seed: u64) -> Result<Vec<Check>> {
    let (d, blocks, tau) = (4, 6, 0.5);
    let m = d - 1;
    FIM_ORACLE_PAIRS
        .par_iter()
        .enumerate()
        .map(|(k, &(alpha, gamma))| {
            let ggd = GgdParams::new(alpha, gamma)?;
            let cfg = MixtureConfig::equivariant(
                d,
                blocks * FIM_ORACLE_SAMPLES_PER_BLOCK,
                blocks,
                ggd,
                tau,
                trial_seed(seed, k as u64),
            )?;
            let data = generate(&cfg)?;
            let sigma = cfg.sigma()?;
            let profile = SourceProfile::from_ggd(&ggd, tau, blocks, identity_backgrounds(m, blocks))?;
            let weights = BasisWeights::convex(cfg.path.schedule());
            let density = GgdDensity::new(&ggd);
            let mut worst: f64 = 0.0;
            for t in 1..=blocks {
                let analytic = fim_per_block(&profile, &weights, t)?.assemble();
                let mu = weights.row(t);
                let p = m * (mu.len() + 1);
                let mut emp = DMatrix::<C64>::zeros(p, p);
                let mut u = nalgebra::DVector::<C64>::zeros(p);
                let range = data.block_range(t);
                let nb = range.len() as f64;
                for n in range {
                    let x = data.sample(n);
                    let s = x[0];
                    let phi = density.score_scaled(s, sigma[t - 1]);
                    for i in 0..m {
                        let z = -x[i + 1];
                        for (kk, &w) in mu.iter().enumerate() {
                            u[kk * m + i] = -(s.conj() * z) * w;
                        }
                        u[mu.len() * m + i] = phi * z;
                    }
                    emp.gerc(C64::new(1.0, 0.0), &u, &u, C64::new(1.0, 0.0));
                }
                emp /= C64::new(nb, 0.0);
                let err = (&emp - analytic.as_matrix()).norm() / analytic.as_matrix().norm();
                worst = worst.max(err);
            }
            Ok(Check::at_most(
                format!("alpha={alpha} gamma={gamma}: max relative Frobenius error over blocks"),
                worst,
                0.05,
            ))
        })
        .collect()
}

const SAMPLER_PAIRS: [(f64, f64); 6] = [(0.25, 0.0), (0.5, 0.8), (1.0, 0.0), (1.0, 0.5), (2.0, 0.3), (4.0, 0.0)];
pub const SAMPLER_SAMPLES: usize = 1_000_000;

/// Power, pseudo-variance and score power of sampled GGD variates.
pub fn sampler_moments(seed: u64, rho_factor: f64) -> Result<Vec<Check>> {
    let per_pair: Vec<Vec<Check>> = SAMPLER_PAIRS
        .par_iter()
        .enumerate()
        .map(|(k, &(alpha, gamma))| {
            let p = GgdParams::new(alpha, gamma)?;
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, k as u64));
            let s = sample_ggd_with_rho(&p, p.rho() * rho_factor, SAMPLER_SAMPLES, &mut rng)?;
            let nf = s.len() as f64;
            let density = GgdDensity::new(&p);
            let power = s.iter().map(|z| z.norm_sqr()).sum::<f64>() / nf;
            let pseudo = s.iter().map(|z| z * z).sum::<C64>() / nf;
            let kappa = s.iter().map(|&z| density.score_clamped(z).norm_sqr()).sum::<f64>() / nf;
            let tag = format!("alpha={alpha} gamma={gamma}");
            Ok(vec![
                Check::at_most(format!("{tag}: |E|s|^2 - 1|"), (power - 1.0).abs(), 0.01),
                Check::at_most(format!("{tag}: |E[s^2] - gamma|"), (pseudo - C64::new(gamma, 0.0)).norm(), 0.01),
                Check::at_most(format!("{tag}: relative error of E|phi|^2 vs kappa_bar"), rel_err(kappa, kappa_bar(&p)), 0.02),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

/// Stationary profiles with identity backgrounds, where both blending
/// models reduce to `(d - 1) / (N (kappa_bar - 1))`.
pub fn closed_form(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let gaussian_check = {
        let setup = CribSetup::linear(5, 5000, 10, GgdParams::new(2.0, 0.0)?, 1.0)?;
        let reference = 4.0 / (5000.0 * (4.0 / std::f64::consts::PI - 1.0));
        ModelKind::ALL[..2]
            .iter()
            .map(|&m| {
                let r = crib_model(m, &setup)?;
                Ok(Check::at_most(
                    format!("{m} at d=5 N=5000 T=10 alpha=2 gamma=0 tau=1: relative error vs 4/(N(4/pi-1))"),
                    rel_err(r.isr, reference),
                    1e-9,
                ))
            })
            .collect::<Result<Vec<_>>>()?
    };
    checks.extend(gaussian_check);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let d = rng.random_range(3..=8usize);
        let blocks = rng.random_range(2..=12usize);
        let nb = rng.random_range(50..=2000usize);
        // Keep away from the Gaussian point, where the bound is infinite.
        let (alpha, gamma) = loop {
            let a: f64 = rng.random_range(0.3..4.0);
            let g: f64 = rng.random_range(0.0..0.9);
            if kappa_bar(&GgdParams::new(a, g)?) > 1.05 {
                break (a, g);
            }
        };
        let ggd = GgdParams::new(alpha, gamma)?;
        let setup = CribSetup::linear(d, nb * blocks, blocks, ggd, 1.0)?;
        let reference = closed_form_isr(d, nb * blocks, &vec![kappa_bar(&ggd); blocks])
            .expect("kappa_bar above one");
        for m in [ModelKind::CvxCsv, ModelKind::Csv] {
            let r = crib_model(m, &setup)?;
            checks.push(Check::at_most(
                format!("{m} at d={d} N={} T={blocks} alpha={alpha:.4} gamma={gamma:.4}: relative error", nb * blocks),
                rel_err(r.isr, reference),
                1e-9,
            ));
        }
    }
    Ok(checks)
}

/// Random Hermitian positive-definite matrix with eigenvalues in `[0.2, 2.2]`.
fn random_hpd(m: usize, rng: &mut impl Rng) -> CMatrix {
    let g = DMatrix::from_fn(m, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let q = g.qr().q();
    let diag = DMatrix::from_fn(m, m, |i, j| if i == j { C64::new(rng.random_range(0.2..2.2), 0.0) } else { C64::new(0.0, 0.0) });
    let c = &q * diag * q.adjoint();
    CMatrix::new((&c + c.adjoint()) * C64::new(0.5, 0.0)).expect("finite")
}

fn random_setup(blocks: usize, rng: &mut impl Rng) -> Result<CribSetup> {
    let d = rng.random_range(3..=6usize);
    let nb = rng.random_range(100..=1000usize);
    let ggd = GgdParams::new(rng.random_range(0.3..3.0), rng.random_range(0.0..0.9))?;
    let tau = rng.random_range(0.0..1.0);
    let cz = (0..blocks).map(|_| random_hpd(d - 1, rng)).collect();
    let mut setup = CribSetup::linear(d, nb * blocks, blocks, ggd, tau)?;
    setup.cz = Some(cz);
    Ok(setup)
}

/// Two blocks: the convex model has as many mixing parameters as the
/// piecewise one. One block: every model is the static extraction bound.
pub fn coincidence(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_two: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..20 {
        let setup = random_setup(2, &mut rng)?;
        let cvx = crib_model(ModelKind::CvxCsv, &setup)?;
        let csv = crib_model(ModelKind::Csv, &setup)?;
        if cvx.identifiable != csv.identifiable {
            worst_two = f64::INFINITY;
        } else if cvx.identifiable {
            worst_two = worst_two.max(rel_err(cvx.isr, csv.isr));
        } else {
            skipped += 1;
        }
    }
    let mut checks = vec![Check::at_most(
        format!("T=2: max relative difference CvxCSV vs CSV over 20 random profiles ({skipped} unidentifiable)"),
        worst_two,
        1e-12,
    )];

    let mut worst_one: f64 = 0.0;
    for _ in 0..20 {
        let setup = random_setup(1, &mut rng)?;
        let kb = setup.profile()?.kappa_bar();
        let reference = closed_form_isr(setup.d, setup.n, &kb).unwrap_or(f64::INFINITY);
        for m in ModelKind::ALL {
            worst_one = worst_one.max(rel_err(crib_model(m, &setup)?.isr, reference));
        }
    }
    checks.push(Check::at_most(
        "T=1: max relative difference of each model vs the static extraction bound over 20 random profiles",
        worst_one,
        1e-10,
    ));
    Ok(checks)
}

/// `CvxCSV <= CSV <= BICE` on the chart presets, and the chart trends:
/// bounds nonincreasing in gamma, the CvxCSV bound nondecreasing in tau.
pub fn ordering() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut curves = Vec::new();
    for preset in [Preset::Chart1, Preset::Chart2, Preset::Chart3] {
        let rows = run_sweep(&SweepSpec::preset(preset))?;
        let mut violation: f64 = 0.0;
        let mut points = 0;
        for chunk in rows.chunks(3) {
            let isr = |m: ModelKind| chunk.iter().find(|r| r.model == m).expect("all models present").isr;
            let (cvx, csv, bice) = (isr(ModelKind::CvxCsv), isr(ModelKind::Csv), isr(ModelKind::Bice));
            if cvx.is_finite() {
                points += 1;
                if csv.is_finite() {
                    violation = violation.max(cvx - csv);
                    violation = violation.max(csv - bice);
                } else if bice.is_finite() {
                    violation = f64::INFINITY;
                }
            }
        }
        checks.push(Check::at_most(
            format!("{preset:?}: max ordering violation over {points} identifiable points"),
            violation,
            1e-12,
        ));
        curves.push(rows);
    }

    let rise = |rows: &[crate::sweep::ResultRow], m: ModelKind| -> f64 {
        let v: Vec<f64> = rows.iter().filter(|r| r.model == m).map(|r| r.isr).collect();
        v.windows(2)
            .map(|w| if w[0].is_infinite() && w[1].is_infinite() { 0.0 } else { w[1] - w[0] })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    for m in ModelKind::ALL {
        checks.push(Check::at_most(format!("Chart2: max increase of {m} bound along gamma"), rise(&curves[1], m), 0.0));
    }
    let falls: Vec<f64> = {
        let v: Vec<f64> = curves[2].iter().filter(|r| r.model == ModelKind::CvxCsv).map(|r| r.isr).collect();
        v.windows(2).map(|w| if w[1].is_infinite() { 0.0 } else { w[0] - w[1] }).collect()
    };
    checks.push(Check::at_most(
        "Chart3: max decrease of CvxCSV bound along tau",
        falls.into_iter().fold(f64::NEG_INFINITY, f64::max),
        0.0,
    ));
    Ok(checks)
}

pub const GRADIENT_POINTS: usize = 20;
pub const GRADIENT_STEP: f64 = 1e-6;

/// Central-difference Wirtinger derivative `(dl/da + i dl/db) / 2` of the
/// log-likelihood along each parameter coordinate.
pub fn finite_difference_gradient(lik: &Likelihood<'_>, theta: &ThetaCvx, step: f64) -> Result<Vec<C64>> {
    let m = theta.background_dim();
    let flat = theta.to_flat();
    (0..flat.len())
        .map(|k| {
            let eval = |delta: C64| {
                let mut p = flat.clone();
                p[k] += delta;
                lik.loglik(&ThetaCvx::from_flat(m, &p))
            };
            let dre = (eval(C64::new(step, 0.0))? - eval(C64::new(-step, 0.0))?) / (2.0 * step);
            let dim = (eval(C64::new(0.0, step))? - eval(C64::new(0.0, -step))?) / (2.0 * step);
            Ok(C64::new(dre, dim) * 0.5)
        })
        .collect()
}

/// Componentwise relative error; components far below the largest one are
/// compared relative to `1e-3` of it.
pub fn gradient_error(analytic: &[C64], numeric: &[C64]) -> f64 {
    let scale = analytic.iter().map(|z| z.norm()).fold(0.0, f64::max);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).norm() / a.norm().max(n.norm()).max(1e-3 * scale))
        .fold(0.0, f64::max)
}

/// Analytic likelihood gradient against central differences at random
/// parameters, d = 3 and 200 samples.
pub fn gradient(seed: u64) -> Result<Vec<Check>> {
    let pairs = [(0.25, 0.0), (0.5, 0.5), (2.0, 0.0), (2.0, 0.5), (1.0, 0.3)];
    let per_point = GRADIENT_POINTS / pairs.len();
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (k, &(alpha, gamma)) in pairs.iter().enumerate() {
        let ggd = GgdParams::new(alpha, gamma)?;
        let cfg = MixtureConfig::random_geometry(3, 200, 4, ggd, 0.3, trial_seed(seed, k as u64))?;
        let data = generate(&cfg)?;
        let lik = Likelihood::new(&data, cfg.path.schedule(), ggd, &cfg.sigma()?, &identity_backgrounds(2, 4))?;
        let truth = ThetaCvx::from_truth(&cfg);
        for _ in 0..per_point {
            let mut draw = || {
                crate::numerics::CVector::from_fn(2, |_, _| {
                    C64::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2))
                })
            };
            let theta = ThetaCvx { g1: &truth.g1 + draw(), g_last: &truth.g_last + draw(), h: &truth.h + draw() };
            let analytic = lik.gradient(&theta)?.to_flat();
            let numeric = finite_difference_gradient(&lik, &theta, GRADIENT_STEP)?;
            checks.push(Check::at_most(
                format!("alpha={alpha} gamma={gamma}: max componentwise relative error"),
                gradient_error(&analytic, &numeric),
                1e-4,
            ));
        }
    }
    Ok(checks)
}

/// Outcome of fitting many independent datasets of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchSummary {
    pub seeds: usize,
    pub crib: f64,
    /// Empirical ISR of each fit, in seed order.
    pub isr: Vec<f64>,
    pub median_isr: f64,
    pub mean_isr: f64,
    pub quartiles: (f64, f64),
    pub converged: usize,
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Simulates `seeds` datasets (seed `trial_seed(base_seed, k)`, equivariant
/// truth), fits each with known nuisance parameters and reports the
/// empirical ISR against the CvxCSV bound.
pub fn estimator_batch(
    d: usize,
    n: usize,
    blocks: usize,
    ggd: GgdParams,
    tau: f64,
    seeds: usize,
    base_seed: u64,
    opts: &crate::mle::FitOptions,
) -> Result<BatchSummary> {
    let crib = crib_model(ModelKind::CvxCsv, &CribSetup::linear(d, n, blocks, ggd, tau)?)?.isr;
    let fits: Vec<(f64, bool)> = (0..seeds as u64)
        .into_par_iter()
        .map(|k| {
            let seed = trial_seed(base_seed, k);
            let cfg = MixtureConfig::equivariant(d, n, blocks, ggd, tau, seed)?;
            let data = generate(&cfg)?;
            let fit_opts = crate::mle::FitOptions { seed, ..opts.clone() };
            let rep = crate::mle::fit(
                &data,
                cfg.path.schedule(),
                ggd,
                &cfg.sigma()?,
                &identity_backgrounds(d - 1, blocks),
                &fit_opts,
            )?;
            Ok((crate::simulate::empirical_isr(&data, &rep.theta.separator(), &cfg)?, rep.converged))
        })
        .collect::<Result<_>>()?;
    let isr: Vec<f64> = fits.iter().map(|f| f.0).collect();
    Ok(BatchSummary {
        seeds,
        crib,
        median_isr: quantile(&isr, 0.5),
        mean_isr: isr.iter().sum::<f64>() / isr.len() as f64,
        quartiles: (quantile(&isr, 0.25), quantile(&isr, 0.75)),
        converged: fits.iter().filter(|f| f.1).count(),
        isr,
    })
}
