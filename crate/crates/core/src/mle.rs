//! Constrained maximum-likelihood extraction under the convex-blending model.
//!
//! The free parameters are the lower parts `g_1`, `g_T` of the endpoint
//! mixing vectors and `h` of the separating vector `w = (1; h)`. On block `t`
//!
//! ```text
//! g_t = lambda_t g_1 + (1 - lambda_t) g_T,   gamma_t = 1 - h^H g_t
//! s_hat = w^H x,   z = B_t x = g_t x_1 - gamma_t x_2
//! l(x) = log p_t(s_hat) - z^H C_t^-1 z + (d - 2) log |gamma_t|^2
//! ```
//!
//! with additive constants dropped. Gradients are Wirtinger derivatives with
//! respect to the conjugated parameters; for a real objective these give the
//! steepest-ascent direction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ggd::{GgdDensity, GgdParams};
use crate::model::{apply_distortionless, BlendingSchedule, SeparatingVector};
use crate::numerics::{CMatrix, CVector, C64};
use crate::simulate::{trial_seed, Dataset, MixtureConfig};

/// Smallest admissible `|gamma_t|` during optimization.
pub const GAMMA_FLOOR: f64 = 1e-8;

/// Free parameters `(g_1, g_T, h)`, each of length `d - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaCvx {
    pub g1: CVector,
    pub g_last: CVector,
    pub h: CVector,
}

impl ThetaCvx {
    pub fn zeros(m: usize) -> Self {
        Self { g1: CVector::zeros(m), g_last: CVector::zeros(m), h: CVector::zeros(m) }
    }

    /// Parameters of a simulated configuration; its separator has unit
    /// leading coefficient, so the lower parts are the parameters directly.
    pub fn from_truth(cfg: &MixtureConfig) -> Self {
        let m = cfg.d - 1;
        Self {
            g1: cfg.path.a_first().rows(1, m).into_owned(),
            g_last: cfg.path.a_last().rows(1, m).into_owned(),
            h: cfg.separator.h().clone(),
        }
    }

    pub fn background_dim(&self) -> usize {
        self.h.len()
    }

    pub fn separator(&self) -> SeparatingVector {
        SeparatingVector::new(self.h.clone())
    }

    pub fn to_flat(&self) -> Vec<C64> {
        self.g1.iter().chain(self.g_last.iter()).chain(self.h.iter()).copied().collect()
    }

    pub fn from_flat(m: usize, v: &[C64]) -> Self {
        assert_eq!(v.len(), 3 * m);
        Self {
            g1: CVector::from_column_slice(&v[..m]),
            g_last: CVector::from_column_slice(&v[m..2 * m]),
            h: CVector::from_column_slice(&v[2 * m..]),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.g1.norm_squared() + self.g_last.norm_squared() + self.h.norm_squared()
    }

    /// `self + step * dir`.
    pub fn step(&self, step: f64, dir: &ThetaCvx) -> ThetaCvx {
        let s = C64::new(step, 0.0);
        ThetaCvx {
            g1: &self.g1 + &dir.g1 * s,
            g_last: &self.g_last + &dir.g_last * s,
            h: &self.h + &dir.h * s,
        }
    }

    fn scaled(&self, c: f64) -> ThetaCvx {
        ThetaCvx::zeros(self.background_dim()).step(c, self)
    }
}

/// Log-likelihood of a dataset with known per-block SOI scales and
/// background covariances.
pub struct Likelihood<'a> {
    data: &'a Dataset,
    lambda: Vec<f64>,
    density: GgdDensity,
    sigma: Vec<f64>,
    cz_inv: Vec<DMatrix<C64>>,
}

struct BlockState {
    g: CVector,
    gamma: C64,
}

impl<'a> Likelihood<'a> {
    pub fn new(
        data: &'a Dataset,
        schedule: &BlendingSchedule,
        ggd: GgdParams,
        sigma: &[f64],
        cz: &[CMatrix],
    ) -> Result<Self> {
        let blocks = data.blocks;
        if schedule.blocks() != blocks || sigma.len() != blocks || cz.len() != blocks {
            return Err(Error::DimensionMismatch(format!(
                "{blocks} data blocks, schedule {}, sigma {}, covariances {}",
                schedule.blocks(),
                sigma.len(),
                cz.len()
            )));
        }
        if data.d < 2 || cz.iter().any(|c| c.shape() != (data.d - 1, data.d - 1)) {
            return Err(Error::DimensionMismatch("background covariance dimension".into()));
        }
        let cz_inv = cz.iter().map(|c| c.inverse().map(CMatrix::into_inner)).collect::<Result<_>>()?;
        Ok(Self {
            data,
            lambda: schedule.weights().to_vec(),
            density: GgdDensity::new(&ggd),
            sigma: sigma.to_vec(),
            cz_inv,
        })
    }

    pub fn samples(&self) -> usize {
        self.data.len()
    }

    fn check(&self, theta: &ThetaCvx) -> Result<()> {
        let m = self.data.d - 1;
        if theta.g1.len() != m || theta.g_last.len() != m || theta.h.len() != m {
            return Err(Error::DimensionMismatch(format!("parameters for d = {}", self.data.d)));
        }
        Ok(())
    }

    fn block_state(&self, theta: &ThetaCvx, t: usize) -> Result<BlockState> {
        let l = self.lambda[t];
        let g = &theta.g1 * C64::new(l, 0.0) + &theta.g_last * C64::new(1.0 - l, 0.0);
        let gamma = C64::new(1.0, 0.0) - theta.h.dotc(&g);
        if gamma.norm() < GAMMA_FLOOR {
            return Err(Error::DegenerateGamma(gamma.norm()));
        }
        Ok(BlockState { g, gamma })
    }

    pub fn loglik(&self, theta: &ThetaCvx) -> Result<f64> {
        self.evaluate(theta, false).map(|(v, _)| v)
    }

    /// Wirtinger gradient with respect to `(g_1*, g_T*, h*)`.
    pub fn gradient(&self, theta: &ThetaCvx) -> Result<ThetaCvx> {
        self.evaluate(theta, true).map(|(_, g)| g.expect("gradient requested"))
    }

    pub fn value_and_gradient(&self, theta: &ThetaCvx) -> Result<(f64, ThetaCvx)> {
        self.evaluate(theta, true).map(|(v, g)| (v, g.expect("gradient requested")))
    }

    fn evaluate(&self, theta: &ThetaCvx, with_grad: bool) -> Result<(f64, Option<ThetaCvx>)> {
        self.check(theta)?;
        let d = self.data.d;
        let m = d - 1;
        let log_det_coef = (d as f64) - 2.0;
        let zero = C64::new(0.0, 0.0);
        let mut grad = ThetaCvx::zeros(m);
        let mut total = 0.0;
        let mut z = vec![zero; m];
        let mut v = vec![zero; m];

        for t in 0..self.data.blocks {
            let st = self.block_state(theta, t)?;
            let cinv = &self.cz_inv[t];
            let sigma = self.sigma[t];
            let range = self.data.block_range(t + 1);
            let nb = range.len() as f64;

            // Block sums for the gradient.
            let mut score_x2 = vec![zero; m];
            let mut x1c_v = vec![zero; m];
            let mut vh_x2 = zero;

            for n in range {
                let x = self.data.sample(n);
                let (x1, x2) = (x[0], &x[1..]);
                let s_hat = x1 + theta.h.iter().zip(x2).map(|(h, xi)| h.conj() * xi).sum::<C64>();
                for i in 0..m {
                    z[i] = st.g[i] * x1 - st.gamma * x2[i];
                }
                let mut quad = 0.0;
                for i in 0..m {
                    v[i] = (0..m).map(|j| cinv[(i, j)] * z[j]).sum();
                    quad += (z[i].conj() * v[i]).re;
                }
                total += self.density.log_pdf_scaled(s_hat, sigma) - quad;

                if with_grad {
                    let phi = self.density.score_scaled(s_hat, sigma);
                    for i in 0..m {
                        score_x2[i] += phi * x2[i];
                        x1c_v[i] += x1.conj() * v[i];
                        vh_x2 += v[i].conj() * x2[i];
                    }
                }
            }
            total += nb * log_det_coef * st.gamma.norm_sqr().ln();

            if with_grad {
                let l = self.lambda[t];
                let x2h_v = vh_x2.conj();
                for i in 0..m {
                    let dh = -score_x2[i] - st.g[i] * vh_x2 - st.g[i] * (nb * log_det_coef) / st.gamma;
                    let dg = -x1c_v[i] - theta.h[i] * x2h_v - theta.h[i] * (nb * log_det_coef) / st.gamma.conj();
                    grad.h[i] += dh;
                    grad.g1[i] += dg * l;
                    grad.g_last[i] += dg * (1.0 - l);
                }
            }
        }
        Ok((total, with_grad.then_some(grad)))
    }
}

/// Log-likelihood with additive constants dropped.
pub fn loglik(
    theta: &ThetaCvx,
    data: &Dataset,
    schedule: &BlendingSchedule,
    ggd: GgdParams,
    sigma: &[f64],
    cz: &[CMatrix],
) -> Result<f64> {
    Likelihood::new(data, schedule, ggd, sigma, cz)?.loglik(theta)
}

/// Wirtinger gradient of [`loglik`] with respect to the conjugated parameters.
pub fn grad_loglik(
    theta: &ThetaCvx,
    data: &Dataset,
    schedule: &BlendingSchedule,
    ggd: GgdParams,
    sigma: &[f64],
    cz: &[CMatrix],
) -> Result<ThetaCvx> {
    Likelihood::new(data, schedule, ggd, sigma, cz)?.gradient(theta)
}

/// Per-block sample covariance of `B_t x` at the given parameters.
pub fn estimate_backgrounds(data: &Dataset, schedule: &BlendingSchedule, theta: &ThetaCvx) -> Result<Vec<CMatrix>> {
    let lik_schedule = schedule.weights();
    if lik_schedule.len() != data.blocks {
        return Err(Error::DimensionMismatch("schedule and dataset block counts differ".into()));
    }
    let endpoints = apply_distortionless(&theta.g1, &theta.g_last, &theta.h)?;
    let path = crate::model::MixingPath::new(endpoints.a_first, endpoints.a_last, schedule.clone())?;
    (1..=data.blocks)
        .map(|t| {
            let b = crate::model::blocking_matrix(&crate::model::mixing_at(&path, t)?);
            let range = data.block_range(t);
            let nb = range.len() as f64;
            let m = data.d - 1;
            let mut cov = DMatrix::<C64>::zeros(m, m);
            for n in range {
                let z = b.as_matrix() * CVector::from_column_slice(data.sample(n));
                cov += &z * z.adjoint();
            }
            CMatrix::new(cov / C64::new(nb, 0.0))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Initial step on the per-sample log-likelihood.
    pub step: f64,
    /// Step shrink factor on a rejected trial, in `(0, 1)`.
    pub backtrack: f64,
    /// Stop when the per-sample gradient norm falls below this.
    pub grad_tol: f64,
    pub restarts: usize,
    /// Spread of the random initializations around zero.
    pub init_scale: f64,
    pub seed: u64,
    /// Start the first run here instead of at a random point.
    pub init: Option<ThetaCvx>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            step: 0.1,
            backtrack: 0.5,
            grad_tol: 1e-8,
            restarts: 3,
            init_scale: 0.01,
            seed: 0,
            init: None,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.grad_tol > 0.0 && self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidConfig(
                "step and tolerance must be positive and backtracking in (0, 1)".into(),
            ));
        }
        if self.restarts == 0 && self.init.is_none() {
            return Err(Error::InvalidConfig("at least one run is required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub theta: ThetaCvx,
    /// Total log-likelihood at `theta`.
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Total log-likelihood after each accepted step of the returned run,
    /// starting with the initial point.
    pub history: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn ascend(lik: &Likelihood<'_>, init: ThetaCvx, opts: &FitOptions) -> Result<FitReport> {
    let scale = 1.0 / lik.samples() as f64;
    let (mut f, g) = lik.value_and_gradient(&init)?;
    let mut theta = init;
    let mut grad = g.scaled(scale);
    let mut history = vec![f];
    let mut step = opts.step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let gsq = grad.norm_sqr();
        if gsq.sqrt() < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let cand = theta.step(step, &grad);
            // Leaving the admissible region counts as a failed trial.
            if let Ok(fc) = lik.loglik(&cand) {
                if fc > f && fc * scale >= f * scale + ARMIJO * 2.0 * step * gsq {
                    grad = lik.gradient(&cand)?.scaled(scale);
                    theta = cand;
                    f = fc;
                    history.push(f);
                    accepted = true;
                    step *= 2.0;
                    break;
                }
            }
            step *= opts.backtrack;
        }
        if !accepted {
            // No ascent direction left at machine precision.
            converged = grad.norm_sqr().sqrt() < opts.grad_tol.sqrt();
            break;
        }
    }
    Ok(FitReport { theta, loglik: f, iterations, converged, history })
}

/// Gradient ascent with backtracking from small random initializations;
/// returns the run with the highest log-likelihood. Non-convergence is
/// reported through [`FitReport::converged`].
pub fn fit(
    data: &Dataset,
    schedule: &BlendingSchedule,
    ggd: GgdParams,
    sigma: &[f64],
    cz: &[CMatrix],
    opts: &FitOptions,
) -> Result<FitReport> {
    opts.validate()?;
    let lik = Likelihood::new(data, schedule, ggd, sigma, cz)?;
    let m = data.d - 1;
    let mut starts = Vec::new();
    if let Some(init) = &opts.init {
        lik.check(init)?;
        starts.push(init.clone());
    }
    for r in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(opts.seed, r as u64));
        let mut draw = || {
            CVector::from_fn(m, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * opts.init_scale
            })
        };
        starts.push(ThetaCvx { g1: draw(), g_last: draw(), h: draw() });
    }
    let runs: Vec<Result<FitReport>> = starts.into_par_iter().map(|s| ascend(&lik, s, opts)).collect();
    let mut best: Option<FitReport> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.loglik > b.loglik) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one run"))
}
