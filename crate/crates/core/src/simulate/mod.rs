//! Simulated dynamic mixtures and ISR evaluation of a separating vector.
//!
//! On block `t` the observation is `x(n) = a_t s(n) + Q_t z(n)` with
//! `s = sigma_t u`, `u` a normalized GGD sample and `z` circular Gaussian
//! with identity covariance. `Q_t` spans the `d - 1` dimensional background
//! subspace implied by the true separating vector.

pub mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fim::variance_profile;
use crate::ggd::{sample_ggd, GgdParams};
use crate::model::{demixing_pair, mixing_at, random_endpoints, DemixingPair, MixingPath, SeparatingVector};
use crate::numerics::{CVector, C64};

/// Smallest admissible `|gamma|` for randomly drawn endpoints.
pub const RANDOM_MIN_GAMMA: f64 = 0.3;

/// Seed of Monte Carlo trial `trial` derived from a base seed.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub d: usize,
    pub n: usize,
    pub ggd: GgdParams,
    pub tau: f64,
    pub path: MixingPath,
    pub separator: SeparatingVector,
    pub seed: u64,
}

impl MixtureConfig {
    pub fn new(
        n: usize,
        ggd: GgdParams,
        tau: f64,
        path: MixingPath,
        separator: SeparatingVector,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self { d: path.dim(), n, ggd, tau, path, separator, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    /// True separating and mixing vectors all equal to `e_1`.
    pub fn equivariant(d: usize, n: usize, blocks: usize, ggd: GgdParams, tau: f64, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidConfig(format!("need d >= 2 sensors, got {d}")));
        }
        let mut e1 = CVector::zeros(d);
        e1[0] = C64::new(1.0, 0.0);
        let path = MixingPath::constant(e1, blocks)?;
        Self::new(n, ggd, tau, path, SeparatingVector::unit(d), seed)
    }

    /// Random unit-norm endpoints (first entry of modulus at least
    /// [`RANDOM_MIN_GAMMA`]) and the minimum-norm consistent separator, drawn
    /// from a stream derived from `seed`.
    pub fn random_geometry(d: usize, n: usize, blocks: usize, ggd: GgdParams, tau: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(32) ^ 0x9e37_79b9_7f4a_7c15);
        let ep = random_endpoints(d, RANDOM_MIN_GAMMA, &mut rng)?;
        let schedule = crate::model::BlendingSchedule::linear(blocks as i64)?;
        let path = MixingPath::new(ep.a_first, ep.a_last, schedule)?;
        Self::new(n, ggd, tau, path, ep.separator, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.path.dim() != self.d || self.separator.dim() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "d = {}, path dimension {}, separator dimension {}",
                self.d,
                self.path.dim(),
                self.separator.dim()
            )));
        }
        self.samples_per_block()?;
        variance_profile(self.tau, self.blocks())?;
        self.demixing_pairs()?;
        Ok(())
    }

    pub fn blocks(&self) -> usize {
        self.path.blocks()
    }

    pub fn samples_per_block(&self) -> Result<usize> {
        let blocks = self.blocks();
        if self.n == 0 || self.n % blocks != 0 {
            return Err(Error::Indivisible { n: self.n, blocks });
        }
        Ok(self.n / blocks)
    }

    /// Per-block SOI standard deviations.
    pub fn sigma(&self) -> Result<Vec<f64>> {
        variance_profile(self.tau, self.blocks())
    }

    pub fn demixing_pairs(&self) -> Result<Vec<DemixingPair>> {
        (1..=self.blocks())
            .map(|t| demixing_pair(&self.separator, &mixing_at(&self.path, t)?))
            .collect()
    }
}

/// Observations, ground-truth SOI and 1-based block labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub d: usize,
    pub blocks: usize,
    /// Row-major `N x d`.
    pub x: Vec<C64>,
    pub s: Vec<C64>,
    pub block_index: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Observation `n` (0-based).
    pub fn sample(&self, n: usize) -> &[C64] {
        &self.x[n * self.d..(n + 1) * self.d]
    }

    pub fn samples_per_block(&self) -> usize {
        self.len() / self.blocks
    }

    /// 0-based sample range of the 1-based block `t`.
    pub fn block_range(&self, t: usize) -> std::ops::Range<usize> {
        let nb = self.samples_per_block();
        (t - 1) * nb..t * nb
    }
}

fn circular_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws a dataset; identical configurations give identical datasets.
pub fn generate(config: &MixtureConfig) -> Result<Dataset> {
    config.validate()?;
    let (d, blocks) = (config.d, config.blocks());
    let nb = config.samples_per_block()?;
    let sigma = config.sigma()?;
    let pairs = config.demixing_pairs()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut x = Vec::with_capacity(config.n * d);
    let mut s = Vec::with_capacity(config.n);
    let mut block_index = Vec::with_capacity(config.n);
    let mut z = vec![C64::new(0.0, 0.0); d - 1];
    for (t, pair) in pairs.iter().enumerate() {
        let u = sample_ggd(&config.ggd, nb, &mut rng)?;
        let a = pair.a.as_matrix();
        for &un in &u {
            let sn = un * sigma[t];
            for zi in z.iter_mut() {
                *zi = circular_normal(&mut rng);
            }
            for i in 0..d {
                let mut xi = a[(i, 0)] * sn;
                for (j, zj) in z.iter().enumerate() {
                    xi += a[(i, j + 1)] * zj;
                }
                x.push(xi);
            }
            s.push(sn);
            block_index.push(t + 1);
        }
    }
    Ok(Dataset { d, blocks, x, s, block_index })
}

/// Per-block gain `w_hat^H a_t` and residual interference vector
/// `q_t = Q_t^H w_hat`.
fn block_responses(w_hat: &SeparatingVector, truth: &MixtureConfig) -> Result<Vec<(C64, CVector)>> {
    if w_hat.dim() != truth.d {
        return Err(Error::DimensionMismatch(format!(
            "separator of length {} for d = {}",
            w_hat.dim(),
            truth.d
        )));
    }
    let w = w_hat.to_vector();
    truth
        .demixing_pairs()?
        .iter()
        .map(|pair| {
            let v = pair.a.as_matrix().adjoint() * &w;
            let gain = v[0].conj();
            let q = v.rows(1, truth.d - 1).into_owned();
            Ok((gain, q))
        })
        .collect()
}

/// Population ISR of `w_hat` on the true model:
/// `<q_t^H C_t q_t>_t / <|w_hat^H a_t|^2 sigma_t^2>_t` with `C_t = I`.
pub fn empirical_isr(data: &Dataset, w_hat: &SeparatingVector, truth: &MixtureConfig) -> Result<f64> {
    if data.d != truth.d || data.blocks != truth.blocks() {
        return Err(Error::DimensionMismatch("dataset does not match the configuration".into()));
    }
    let sigma = truth.sigma()?;
    let responses = block_responses(w_hat, truth)?;
    let (mut interference, mut signal) = (0.0, 0.0);
    for ((gain, q), sd) in responses.iter().zip(&sigma) {
        interference += q.norm_squared();
        signal += gain.norm_sqr() * sd * sd;
    }
    Ok(interference / signal)
}

/// Sample-moment ISR: per-block powers of the residual
/// `w_hat^H x - (w_hat^H a_t) s` and of `(w_hat^H a_t) s`, each averaged over
/// blocks.
pub fn sample_isr(data: &Dataset, w_hat: &SeparatingVector, truth: &MixtureConfig) -> Result<f64> {
    if data.d != truth.d || data.blocks != truth.blocks() {
        return Err(Error::DimensionMismatch("dataset does not match the configuration".into()));
    }
    let responses = block_responses(w_hat, truth)?;
    let w = w_hat.to_vector();
    let (mut interference, mut signal) = (0.0, 0.0);
    for (t, (gain, _)) in responses.iter().enumerate() {
        let range = data.block_range(t + 1);
        let nb = range.len() as f64;
        let (mut pi, mut ps) = (0.0, 0.0);
        for n in range {
            let out: C64 = w.iter().zip(data.sample(n)).map(|(wi, xi)| wi.conj() * xi).sum();
            let clean = gain * data.s[n];
            pi += (out - clean).norm_sqr();
            ps += clean.norm_sqr();
        }
        interference += pi / nb;
        signal += ps / nb;
    }
    Ok(interference / signal)
}
