//! Fisher information for the separating-vector parameters and the induced
//! lower bound on the mean interference-to-signal ratio.
//!
//! All three compared models share one FIM builder. They differ only in how
//! the per-block mixing vector is parameterized: block `t` uses
//! `g_t = sum_k mu[t][k] g_k` over `K` free basis vectors.
//!
//! * CvxCSV: `K = 2`, `mu[t] = (lambda_t, 1 - lambda_t)`.
//! * CSV: `K = T`, `mu` is the identity (a free mixing vector per block).
//! * Static ICE: `K = 1`, `mu[t] = 1`.
//!
//! At the equivariant point (`w = a_t = e_1`) the per-sample information of
//! block `t` is
//!
//! ```text
//!        [ mu_k mu_l R_t   ...  -mu_k I  ]
//! F_t =  [      ...                      ]      R_t = sigma_t^2 C_t^-1
//!        [ -mu_l I    ...     kappa_t C_t ]
//! ```
//!
//! and the pseudo-information vanishes because the background is circular.
//! The CRLB of `h` is `(D - C A^-1 B)^-1 / N_b` with `A, B, C, D` the block
//! sums of `sum_t F_t`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggd::{kappa_bar, GgdParams};
use crate::model::BlendingSchedule;
use crate::numerics::{hermitian_check, rcond, BlockPartition, CMatrix, C64, SINGULARITY_RCOND};

/// Tolerance for the `kappa_bar >= 1` and Hermitian invariants.
const PROFILE_TOL: f64 = 1e-10;

/// `sigma_t = tau + (1 - tau) sin(pi t / (2T))`, `t = 1..T` (standard deviations).
pub fn variance_profile(tau: f64, blocks: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidTau(tau));
    }
    if blocks == 0 {
        return Err(Error::InvalidBlockCount(0));
    }
    let tf = blocks as f64;
    Ok((1..=blocks)
        .map(|t| tau + (1.0 - tau) * (std::f64::consts::PI * t as f64 / (2.0 * tf)).sin())
        .collect())
}

/// Per-block SOI variance, score power and background covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceProfile {
    sigma2: Vec<f64>,
    kappa: Vec<f64>,
    cz: Vec<CMatrix>,
}

impl SourceProfile {
    pub fn new(sigma2: Vec<f64>, kappa: Vec<f64>, cz: Vec<CMatrix>) -> Result<Self> {
        let blocks = sigma2.len();
        if blocks == 0 {
            return Err(Error::InvalidBlockCount(0));
        }
        if kappa.len() != blocks || cz.len() != blocks {
            return Err(Error::DimensionMismatch(format!(
                "profile lengths sigma2 {blocks}, kappa {}, cz {}",
                kappa.len(),
                cz.len()
            )));
        }
        let m = cz[0].nrows();
        for (t, ((&s2, &k), c)) in sigma2.iter().zip(&kappa).zip(&cz).enumerate() {
            if !(s2.is_finite() && s2 > 0.0) {
                return Err(Error::InvalidConfig(format!("sigma^2 of block {} must be positive", t + 1)));
            }
            if !(k.is_finite() && k * s2 >= 1.0 - PROFILE_TOL) {
                return Err(Error::InvalidConfig(format!(
                    "block {}: kappa * sigma^2 = {} is below 1",
                    t + 1,
                    k * s2
                )));
            }
            if c.shape() != (m, m) || m == 0 {
                return Err(Error::DimensionMismatch(format!("background covariance of block {}", t + 1)));
            }
            if !hermitian_check(c, PROFILE_TOL)? {
                return Err(Error::InvalidConfig(format!("background covariance of block {} is not Hermitian", t + 1)));
            }
            if crate::numerics::hermitian_eigenvalues(c)?[0] <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "background covariance of block {} is not positive definite",
                    t + 1
                )));
            }
        }
        Ok(Self { sigma2, kappa, cz })
    }

    /// GGD source with block-independent shape, standard deviations from
    /// [`variance_profile`] and `kappa_t = kappa_bar / sigma_t^2`.
    pub fn from_ggd(ggd: &GgdParams, tau: f64, blocks: usize, cz: Vec<CMatrix>) -> Result<Self> {
        let kb = kappa_bar(ggd);
        let sigma2: Vec<f64> = variance_profile(tau, blocks)?.iter().map(|s| s * s).collect();
        let kappa = sigma2.iter().map(|s2| kb / s2).collect();
        Self::new(sigma2, kappa, cz)
    }

    pub fn blocks(&self) -> usize {
        self.sigma2.len()
    }

    /// Background dimension `d - 1`.
    pub fn background_dim(&self) -> usize {
        self.cz[0].nrows()
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn cz(&self) -> &[CMatrix] {
        &self.cz
    }

    pub fn kappa_bar(&self) -> Vec<f64> {
        self.kappa.iter().zip(&self.sigma2).map(|(k, s)| k * s).collect()
    }

    /// Profile restricted to one 1-based block.
    pub fn block(&self, t: usize) -> Result<SourceProfile> {
        if t == 0 || t > self.blocks() {
            return Err(Error::BlockOutOfRange { t, blocks: self.blocks() });
        }
        let i = t - 1;
        Ok(Self {
            sigma2: vec![self.sigma2[i]],
            kappa: vec![self.kappa[i]],
            cz: vec![self.cz[i].clone()],
        })
    }

    fn mean_sigma2(&self) -> f64 {
        self.sigma2.iter().sum::<f64>() / self.blocks() as f64
    }

    fn mean_cz(&self) -> CMatrix {
        let m = self.background_dim();
        let sum = self.cz.iter().fold(CMatrix::zeros(m, m), |acc, c| &acc + c);
        sum.scale(1.0 / self.blocks() as f64)
    }
}

/// Identity background covariances for `blocks` blocks of dimension `m`.
pub fn identity_backgrounds(m: usize, blocks: usize) -> Vec<CMatrix> {
    vec![CMatrix::identity(m); blocks]
}

/// Gradient weights `mu[t][k]` tying each block's mixing vector to `K` free
/// basis vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisWeights {
    mu: Vec<Vec<f64>>,
}

impl BasisWeights {
    pub fn new(mu: Vec<Vec<f64>>) -> Result<Self> {
        let k = mu.first().map(Vec::len).unwrap_or(0);
        if mu.is_empty() || k == 0 || mu.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch("basis weights must form a non-empty T x K table".into()));
        }
        if mu.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { mu })
    }

    /// Rows `(lambda_t, 1 - lambda_t)`; a single block collapses to the
    /// static one-vector basis.
    pub fn convex(schedule: &BlendingSchedule) -> Self {
        if schedule.blocks() == 1 {
            return Self::static_ice(1);
        }
        Self {
            mu: schedule.weights().iter().map(|&l| vec![l, 1.0 - l]).collect(),
        }
    }

    /// Convex weights with the two basis roles exchanged.
    pub fn convex_swapped(schedule: &BlendingSchedule) -> Self {
        let mut w = Self::convex(schedule);
        for row in &mut w.mu {
            row.reverse();
        }
        w
    }

    /// One free mixing vector per block.
    pub fn csv(blocks: usize) -> Self {
        Self {
            mu: (0..blocks)
                .map(|t| (0..blocks).map(|k| if k == t { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    /// A single mixing vector shared by every block.
    pub fn static_ice(blocks: usize) -> Self {
        Self { mu: vec![vec![1.0]; blocks] }
    }

    pub fn blocks(&self) -> usize {
        self.mu.len()
    }

    pub fn basis_count(&self) -> usize {
        self.mu[0].len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.mu[t - 1]
    }
}

/// Block sums `A (K m x K m)`, `B (K m x m)`, `D (m x m)` with `C = B^H`;
/// the full information matrix is `N_b [[A, B], [C, D]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FimBlocks {
    pub a: CMatrix,
    pub b: CMatrix,
    pub d: CMatrix,
    pub nb: usize,
}

impl FimBlocks {
    pub fn c(&self) -> CMatrix {
        self.b.adjoint()
    }

    /// Unscaled partition `[[A, B], [C, D]]`.
    pub fn partition(&self) -> BlockPartition {
        BlockPartition::new(self.a.clone(), self.b.clone(), self.c(), self.d.clone())
            .expect("FIM blocks are conformable by construction")
    }

    /// The full information matrix including the `N_b` factor.
    pub fn assemble(&self) -> CMatrix {
        self.partition().assemble().scale(self.nb as f64)
    }
}

fn check_shapes(profile: &SourceProfile, weights: &BasisWeights) -> Result<()> {
    if profile.blocks() != weights.blocks() {
        return Err(Error::DimensionMismatch(format!(
            "profile has {} blocks but weights have {}",
            profile.blocks(),
            weights.blocks()
        )));
    }
    Ok(())
}

/// Per-sample information contribution of block `t` (1-based); the result
/// carries `nb = 1`.
pub fn fim_per_block(profile: &SourceProfile, weights: &BasisWeights, t: usize) -> Result<FimBlocks> {
    check_shapes(profile, weights)?;
    if t == 0 || t > profile.blocks() {
        return Err(Error::BlockOutOfRange { t, blocks: profile.blocks() });
    }
    let m = profile.background_dim();
    let k_count = weights.basis_count();
    let mu = weights.row(t);
    let cz = &profile.cz[t - 1];
    let r = cz.inverse()?.scale(profile.sigma2[t - 1]);

    let mut a = DMatrix::zeros(k_count * m, k_count * m);
    let mut b = DMatrix::zeros(k_count * m, m);
    for k in 0..k_count {
        if mu[k] == 0.0 {
            continue;
        }
        for l in 0..k_count {
            let c = C64::new(mu[k] * mu[l], 0.0);
            a.view_mut((k * m, l * m), (m, m)).copy_from(&(r.as_matrix() * c));
        }
        for i in 0..m {
            b[(k * m + i, i)] = C64::new(-mu[k], 0.0);
        }
    }
    Ok(FimBlocks {
        a: CMatrix::new(a)?,
        b: CMatrix::new(b)?,
        d: cz.scale(profile.kappa[t - 1]),
        nb: 1,
    })
}

/// Sums the per-block contributions; the returned blocks represent
/// `F = N_b sum_t F_t`.
pub fn assemble_fim(profile: &SourceProfile, weights: &BasisWeights, nb: usize) -> Result<FimBlocks> {
    if nb == 0 {
        return Err(Error::InvalidConfig("samples per block must be at least 1".into()));
    }
    check_shapes(profile, weights)?;
    let mut total = fim_per_block(profile, weights, 1)?;
    for t in 2..=profile.blocks() {
        let ft = fim_per_block(profile, weights, t)?;
        total.a = &total.a + &ft.a;
        total.b = &total.b + &ft.b;
        total.d = &total.d + &ft.d;
    }
    total.nb = nb;
    Ok(total)
}

/// Outcome of the CRLB computation for `h`.
#[derive(Clone, Debug, PartialEq)]
pub enum Crlb {
    Identified { crlb: CMatrix, rcond: f64 },
    Unidentifiable { rcond: f64 },
}

impl Crlb {
    pub fn rcond(&self) -> f64 {
        match self {
            Crlb::Identified { rcond, .. } | Crlb::Unidentifiable { rcond } => *rcond,
        }
    }

    pub fn matrix(&self) -> Option<&CMatrix> {
        match self {
            Crlb::Identified { crlb, .. } => Some(crlb),
            Crlb::Unidentifiable { .. } => None,
        }
    }
}

/// `(D - C A^-1 B)^-1 / N_b`.
///
/// The Schur complement is a difference of positive semidefinite terms, so
/// its conditioning is measured against `D`: the reported rcond is
/// `1 / (|D|_1 |S^-1|_1)`. An exact cancellation (non-identifiable model)
/// then shows up as an rcond near machine precision even when `S` is a
/// multiple of the identity.
pub fn crlb_h(fim: &FimBlocks) -> Crlb {
    let a_rc = rcond(&fim.a);
    if a_rc < SINGULARITY_RCOND {
        return Crlb::Unidentifiable { rcond: 0.0 };
    }
    let c = fim.c();
    let a_inv_b = match fim.a.solve(&fim.b) {
        Ok(x) => x,
        Err(_) => return Crlb::Unidentifiable { rcond: 0.0 },
    };
    let schur = &fim.d - &(&c * &a_inv_b);
    let m = schur.nrows();
    let Some(inv) = schur.as_matrix().clone().lu().solve(&DMatrix::identity(m, m)) else {
        return Crlb::Unidentifiable { rcond: 0.0 };
    };
    let Ok(inv) = CMatrix::new(inv) else {
        return Crlb::Unidentifiable { rcond: 0.0 };
    };
    let rc = 1.0 / (fim.d.norm1() * inv.norm1());
    if !(rc >= SINGULARITY_RCOND) {
        return Crlb::Unidentifiable { rcond: if rc.is_finite() { rc } else { 0.0 } };
    }
    // A Schur complement of a PSD matrix cannot have a negative eigenvalue;
    // one here means round-off dominates.
    let herm = (inv.as_matrix() + inv.adjoint().as_matrix()) * C64::new(0.5, 0.0);
    if herm.symmetric_eigenvalues().iter().any(|&e| e <= 0.0) {
        return Crlb::Unidentifiable { rcond: rc };
    }
    Crlb::Identified { crlb: inv.scale(1.0 / fim.nb as f64), rcond: rc }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "CvxCSV")]
    CvxCsv,
    #[serde(rename = "CSV")]
    Csv,
    #[serde(rename = "BICE")]
    Bice,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::CvxCsv, ModelKind::Csv, ModelKind::Bice];

    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::CvxCsv => "CvxCSV",
            ModelKind::Csv => "CSV",
            ModelKind::Bice => "BICE",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cvxcsv" => Ok(ModelKind::CvxCsv),
            "csv" => Ok(ModelKind::Csv),
            "bice" => Ok(ModelKind::Bice),
            other => Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

/// Mean-ISR lower bound with identifiability classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CribResult {
    pub model: ModelKind,
    /// Linear ratio, `+inf` when unidentifiable.
    pub isr: f64,
    pub isr_db: f64,
    pub identifiable: bool,
    pub rcond: f64,
}

impl CribResult {
    fn unidentifiable(model: ModelKind, rcond: f64) -> Self {
        Self {
            model,
            isr: f64::INFINITY,
            isr_db: f64::INFINITY,
            identifiable: false,
            rcond,
        }
    }

    fn finite(model: ModelKind, isr: f64, rcond: f64) -> Self {
        Self {
            model,
            isr,
            isr_db: 10.0 * isr.log10(),
            identifiable: true,
            rcond,
        }
    }
}

/// `tr[<C_t> CRLB] / <sigma_t^2>`.
pub fn crib_isr(crlb: &Crlb, profile: &SourceProfile, model: ModelKind) -> CribResult {
    match crlb {
        Crlb::Unidentifiable { rcond } => CribResult::unidentifiable(model, *rcond),
        Crlb::Identified { crlb, rcond } => {
            let num = (&profile.mean_cz() * crlb).trace().re;
            CribResult::finite(model, num / profile.mean_sigma2(), *rcond)
        }
    }
}

/// `(d - 1) / (N (<kappa_bar> - 1))`, valid for a block-independent `R_t`.
/// `None` when the mean `kappa_bar` does not exceed one.
pub fn closed_form_isr(d: usize, n: usize, kbar: &[f64]) -> Option<f64> {
    let mean = kbar.iter().sum::<f64>() / kbar.len() as f64;
    if mean <= 1.0 + 1e-12 {
        return None;
    }
    Some((d - 1) as f64 / (n as f64 * (mean - 1.0)))
}

/// Everything needed to evaluate a model's bound at one operating point.
#[derive(Clone, Debug, PartialEq)]
pub struct CribSetup {
    pub d: usize,
    pub n: usize,
    pub schedule: BlendingSchedule,
    pub ggd: GgdParams,
    pub tau: f64,
    /// Background covariances per block; identity when `None`.
    pub cz: Option<Vec<CMatrix>>,
}

impl CribSetup {
    /// Linear schedule with identity backgrounds.
    pub fn linear(d: usize, n: usize, blocks: usize, ggd: GgdParams, tau: f64) -> Result<Self> {
        Ok(Self {
            d,
            n,
            schedule: BlendingSchedule::linear(blocks as i64)?,
            ggd,
            tau,
            cz: None,
        })
    }

    pub fn blocks(&self) -> usize {
        self.schedule.blocks()
    }

    pub fn samples_per_block(&self) -> Result<usize> {
        let blocks = self.blocks();
        if self.n == 0 || self.n % blocks != 0 {
            return Err(Error::Indivisible { n: self.n, blocks });
        }
        Ok(self.n / blocks)
    }

    pub fn profile(&self) -> Result<SourceProfile> {
        if self.d < 2 {
            return Err(Error::InvalidConfig(format!("need d >= 2 sensors, got {}", self.d)));
        }
        let cz = match &self.cz {
            Some(c) => c.clone(),
            None => identity_backgrounds(self.d - 1, self.blocks()),
        };
        SourceProfile::from_ggd(&self.ggd, self.tau, self.blocks(), cz)
    }
}

/// Bound for one model at one operating point.
///
/// BICE runs a static one-block extraction on every block; its bound averages
/// the per-block interference power and the per-block signal power
/// separately: `<tr[C_t CRLB_t]>_t / <sigma_t^2>_t`.
pub fn crib_model(model: ModelKind, setup: &CribSetup) -> Result<CribResult> {
    let nb = setup.samples_per_block()?;
    let profile = setup.profile()?;
    let blocks = setup.blocks();
    match model {
        ModelKind::CvxCsv | ModelKind::Csv => {
            let weights = if model == ModelKind::CvxCsv {
                BasisWeights::convex(&setup.schedule)
            } else {
                BasisWeights::csv(blocks)
            };
            let fim = assemble_fim(&profile, &weights, nb)?;
            Ok(crib_isr(&crlb_h(&fim), &profile, model))
        }
        ModelKind::Bice => {
            let mut interference = 0.0;
            let mut worst = f64::INFINITY;
            for t in 1..=blocks {
                let block = profile.block(t)?;
                let fim = assemble_fim(&block, &BasisWeights::static_ice(1), nb)?;
                match crlb_h(&fim) {
                    Crlb::Unidentifiable { rcond } => return Ok(CribResult::unidentifiable(model, rcond)),
                    Crlb::Identified { crlb, rcond } => {
                        interference += (&block.cz[0] * &crlb).trace().re;
                        worst = worst.min(rcond);
                    }
                }
            }
            let isr = (interference / blocks as f64) / profile.mean_sigma2();
            Ok(CribResult::finite(model, isr, worst))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ggd(a: f64, g: f64) -> GgdParams {
        GgdParams::new(a, g).unwrap()
    }

    fn random_hpd(n: usize, rng: &mut impl Rng) -> CMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        CMatrix::new(&g * g.adjoint() + DMatrix::identity(n, n) * C64::new(0.3, 0.0)).unwrap()
    }

    fn random_profile(blocks: usize, m: usize, rng: &mut impl Rng) -> SourceProfile {
        let sigma2: Vec<f64> = (0..blocks).map(|_| rng.random_range(0.2..3.0)).collect();
        let kappa = sigma2.iter().map(|s| rng.random_range(1.05..4.0) / s).collect();
        let cz = (0..blocks).map(|_| random_hpd(m, rng)).collect();
        SourceProfile::new(sigma2, kappa, cz).unwrap()
    }

    #[test]
    fn variance_profile_values() {
        assert_eq!(variance_profile(1.0, 7).unwrap(), vec![1.0; 7]);
        let p = variance_profile(0.0, 10).unwrap();
        assert!((p[9] - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.156_434_465_040_230_9).abs() < 1e-15);
        assert!(matches!(variance_profile(1.2, 3), Err(Error::InvalidTau(_))));
        assert!(matches!(variance_profile(-0.1, 3), Err(Error::InvalidTau(_))));
    }

    #[test]
    fn profile_validation() {
        let id = identity_backgrounds(2, 1);
        assert!(SourceProfile::new(vec![1.0], vec![0.5], id.clone()).is_err());
        assert!(SourceProfile::new(vec![-1.0], vec![2.0], id.clone()).is_err());
        assert!(SourceProfile::new(vec![1.0, 1.0], vec![2.0], id.clone()).is_err());
        let not_pd = vec![CMatrix::scaled_identity(2, -1.0)];
        assert!(SourceProfile::new(vec![1.0], vec![2.0], not_pd).is_err());
    }

    #[test]
    fn convex_block_with_unit_weight_has_no_cross_term() {
        let schedule = BlendingSchedule::linear(4).unwrap();
        let profile = SourceProfile::new(vec![1.0; 4], vec![2.0; 4], identity_backgrounds(3, 4)).unwrap();
        let f1 = fim_per_block(&profile, &BasisWeights::convex(&schedule), 1).unwrap();
        let a = f1.a.as_matrix();
        // First basis block gets R = I, the cross and second blocks vanish.
        assert!((a.view((0, 0), (3, 3)).into_owned() - DMatrix::<C64>::identity(3, 3)).norm() < 1e-15);
        assert!(a.view((0, 3), (3, 3)).norm() == 0.0);
        assert!(a.view((3, 3), (3, 3)).norm() == 0.0);
    }

    #[test]
    fn convex_block_midpoint_arithmetic() {
        let schedule = BlendingSchedule::linear(3).unwrap();
        let profile = SourceProfile::new(vec![2.0; 3], vec![1.7; 3], identity_backgrounds(1, 3)).unwrap();
        let f = fim_per_block(&profile, &BasisWeights::convex(&schedule), 2).unwrap();
        // mu = (0.5, 0.5), R = 2: every entry is 0.25 * 2.
        let expect_a = DMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        assert!((f.a.as_matrix() - expect_a).norm() < 1e-15);
        let expect_b = DMatrix::from_element(2, 1, C64::new(-0.5, 0.0));
        assert!((f.b.as_matrix() - expect_b).norm() < 1e-15);
        assert!((f.d[(0, 0)] - C64::new(1.7, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_block_convex_a_is_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let profile = random_profile(2, 3, &mut rng);
        let fim = assemble_fim(&profile, &BasisWeights::convex(&BlendingSchedule::linear(2).unwrap()), 10).unwrap();
        assert_eq!(fim.a.view((0, 3), (3, 3)).norm(), 0.0);
        assert_eq!(fim.a.view((3, 0), (3, 3)).norm(), 0.0);
    }

    #[test]
    fn linear_schedule_b_sums() {
        let profile = SourceProfile::new(vec![1.0; 10], vec![2.0; 10], identity_backgrounds(4, 10)).unwrap();
        let fim = assemble_fim(&profile, &BasisWeights::convex(&BlendingSchedule::linear(10).unwrap()), 500).unwrap();
        let mut expect = DMatrix::<C64>::zeros(8, 4);
        for i in 0..4 {
            expect[(i, i)] = C64::new(-5.0, 0.0);
            expect[(4 + i, i)] = C64::new(-5.0, 0.0);
        }
        assert!((fim.b.as_matrix() - expect).norm() < 1e-12);
    }

    #[test]
    fn csv_stationary_a_is_block_diagonal_r() {
        let c = CMatrix::from_rows(2, 2, &[C64::new(2.0, 0.0), C64::new(0.5, 0.5), C64::new(0.5, -0.5), C64::new(1.0, 0.0)]).unwrap();
        let profile = SourceProfile::new(vec![1.5; 3], vec![2.0; 3], vec![c.clone(); 3]).unwrap();
        let fim = assemble_fim(&profile, &BasisWeights::csv(3), 1).unwrap();
        let r = c.inverse().unwrap().scale(1.5);
        for k in 0..3 {
            for l in 0..3 {
                let blk = fim.a.view((2 * k, 2 * l), (2, 2)).into_owned();
                let expect = if k == l { r.as_matrix().clone() } else { DMatrix::zeros(2, 2) };
                assert!((blk - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn static_crlb_scalar_formula() {
        let (s2, kb, nb) = (1.7, 2.5, 300);
        let profile = SourceProfile::new(vec![s2], vec![kb / s2], identity_backgrounds(3, 1)).unwrap();
        let crlb = crlb_h(&assemble_fim(&profile, &BasisWeights::static_ice(1), nb).unwrap());
        let expect = s2 / (nb as f64 * (kb - 1.0));
        let m = crlb.matrix().unwrap();
        assert!(m.max_abs_diff(&CMatrix::scaled_identity(3, expect)) < 1e-14 * expect.max(1.0));
    }

    #[test]
    fn gaussian_stationary_is_unidentifiable_for_every_basis() {
        let setup = CribSetup::linear(5, 5000, 10, GgdParams::gaussian(), 1.0).unwrap();
        let profile = setup.profile().unwrap();
        for w in [
            BasisWeights::convex(&setup.schedule),
            BasisWeights::csv(10),
            BasisWeights::static_ice(10),
        ] {
            let c = crlb_h(&assemble_fim(&profile, &w, 500).unwrap());
            assert!(matches!(c, Crlb::Unidentifiable { .. }), "{c:?}");
        }
    }

    #[test]
    fn crlb_matches_full_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let profile = random_profile(5, 3, &mut rng);
            let schedule = BlendingSchedule::new(vec![1.0, 0.8, 0.3, 0.6, 0.0]).unwrap();
            let fim = assemble_fim(&profile, &BasisWeights::convex(&schedule), 40).unwrap();
            let crlb = crlb_h(&fim);
            let full = fim.assemble();
            assert!(hermitian_check(&full, 1e-10).unwrap());
            let inv = full.as_matrix().clone().try_inverse().unwrap();
            let corner = inv.view((6, 6), (3, 3)).into_owned();
            let got = crlb.matrix().unwrap().as_matrix();
            assert!((got - &corner).norm() < 1e-10 * corner.norm());
            let via_blocks = crate::numerics::block_inverse(&BlockPartition::split(&full, 6).unwrap()).unwrap();
            assert!((via_blocks.d.as_matrix() - &corner).norm() < 1e-10 * corner.norm());
        }
    }

    #[test]
    fn crib_isr_trace_of_identity() {
        let profile = SourceProfile::new(vec![2.0, 4.0], vec![1.0, 1.0], identity_backgrounds(4, 2)).unwrap();
        let crlb = Crlb::Identified { crlb: CMatrix::scaled_identity(4, 0.01), rcond: 1.0 };
        let r = crib_isr(&crlb, &profile, ModelKind::CvxCsv);
        assert!((r.isr - 4.0 * 0.01 / 3.0).abs() < 1e-15);
        assert!(r.identifiable);

        let r = crib_isr(&Crlb::Unidentifiable { rcond: 1e-17 }, &profile, ModelKind::Csv);
        assert!(r.isr.is_infinite() && !r.identifiable && r.isr_db.is_infinite());
    }

    #[test]
    fn closed_form_values() {
        let kb = 4.0 / PI;
        let v = closed_form_isr(5, 5000, &[kb; 10]).unwrap();
        assert!((v - 4.0 / (5000.0 * (kb - 1.0))).abs() < 1e-14 * v);
        assert!((v - 2.9279e-3).abs() < 1e-7);
        assert!((10.0 * v.log10() + 25.334).abs() < 1e-3);
        assert!(closed_form_isr(5, 5000, &[1.0; 10]).is_none());
        let d2 = closed_form_isr(2, 100, &[3.0]).unwrap();
        let d4 = closed_form_isr(4, 100, &[3.0]).unwrap();
        assert!((d4 - 3.0 * d2).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_numeric_bounds() {
        let setup = CribSetup::linear(5, 5000, 10, ggd(2.0, 0.0), 1.0).unwrap();
        let expect = closed_form_isr(5, 5000, &setup.profile().unwrap().kappa_bar()).unwrap();
        for model in [ModelKind::CvxCsv, ModelKind::Csv] {
            let r = crib_model(model, &setup).unwrap();
            assert!(((r.isr - expect) / expect).abs() < 1e-9, "{model}: {} vs {expect}", r.isr);
        }
    }

    #[test]
    fn identifiability_matrix() {
        let cases = [
            ((1.0, 0.0, 1.0), [false, false, false]),
            ((1.0, 0.0, 0.0), [true, false, false]),
            ((1.0, 0.5, 0.0), [true, true, true]),
        ];
        for ((a, g, tau), expect) in cases {
            let setup = CribSetup::linear(5, 5000, 10, ggd(a, g), tau).unwrap();
            for (model, want) in ModelKind::ALL.iter().zip(expect) {
                let r = crib_model(*model, &setup).unwrap();
                assert_eq!(r.identifiable, want, "{model} at alpha {a} gamma {g} tau {tau}");
                assert_eq!(r.isr.is_finite(), want);
            }
        }
    }

    #[test]
    fn indivisible_sample_count() {
        let setup = CribSetup::linear(5, 5001, 10, ggd(2.0, 0.0), 0.0).unwrap();
        assert!(matches!(crib_model(ModelKind::CvxCsv, &setup), Err(Error::Indivisible { .. })));
    }

    #[test]
    fn doubling_block_length_halves_bound() {
        for model in ModelKind::ALL {
            let a = crib_model(model, &CribSetup::linear(4, 1000, 10, ggd(0.6, 0.2), 0.3).unwrap()).unwrap();
            let b = crib_model(model, &CribSetup::linear(4, 2000, 10, ggd(0.6, 0.2), 0.3).unwrap()).unwrap();
            assert!((a.isr - 2.0 * b.isr).abs() <= 1e-12 * a.isr);
        }
    }

    #[test]
    fn single_block_reduces_to_static_ice() {
        let setup = CribSetup::linear(5, 700, 1, ggd(1.7, 0.3), 0.4).unwrap();
        let kb = kappa_bar(&setup.ggd);
        let expect = 4.0 / (700.0 * (kb - 1.0));
        for model in ModelKind::ALL {
            let r = crib_model(model, &setup).unwrap();
            assert!(((r.isr - expect) / expect).abs() < 1e-12, "{model}");
        }
    }

    #[test]
    fn reference_values_from_dense_oracle() {
        // Frozen from a dense-inverse evaluation of the full information
        // matrix (d = 5, N = 5000, T = 10, identity backgrounds).
        let cases = [
            (ModelKind::CvxCsv, 1.0, 0.0, 0.0, 4.041_123_999_912_827e-4),
            (ModelKind::CvxCsv, 0.5, 0.0, 0.0, 2.093_064_312_712_568_8e-4),
            (ModelKind::Csv, 0.5, 0.0, 0.0, 4.341_926_729_986_431_6e-4),
            (ModelKind::Bice, 0.5, 0.0, 0.0, 1.6e-2),
            (ModelKind::CvxCsv, 1.0, 0.0, 0.9, 3.256_423_081_469_755),
            (ModelKind::Csv, 1.0, 0.5, 0.0, 6.512_890_094_979_648e-4),
        ];
        for (model, a, g, tau, expect) in cases {
            let r = crib_model(model, &CribSetup::linear(5, 5000, 10, ggd(a, g), tau).unwrap()).unwrap();
            assert!(((r.isr - expect) / expect).abs() < 1e-9, "{model} {a} {g} {tau}: {}", r.isr);
        }
    }

    proptest! {
        #[test]
        fn assembled_fim_is_hermitian_psd(seed in any::<u64>(), blocks in 1usize..8, m in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let profile = random_profile(blocks, m, &mut rng);
            let schedule = BlendingSchedule::linear(blocks as i64).unwrap();
            for w in [BasisWeights::convex(&schedule), BasisWeights::csv(blocks), BasisWeights::static_ice(blocks)] {
                let full = assemble_fim(&profile, &w, 7).unwrap().assemble();
                prop_assert!(hermitian_check(&full, 1e-10).unwrap());
                let ev = crate::numerics::hermitian_eigenvalues(&full).unwrap();
                prop_assert!(ev[0] >= -1e-10 * ev[ev.len() - 1].abs());
            }
        }

        #[test]
        fn swapping_basis_roles_leaves_bound_unchanged(seed in any::<u64>(), blocks in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let profile = random_profile(blocks, 3, &mut rng);
            let schedule = BlendingSchedule::linear(blocks as i64).unwrap();
            let a = crib_isr(&crlb_h(&assemble_fim(&profile, &BasisWeights::convex(&schedule), 50).unwrap()), &profile, ModelKind::CvxCsv);
            let b = crib_isr(&crlb_h(&assemble_fim(&profile, &BasisWeights::convex_swapped(&schedule), 50).unwrap()), &profile, ModelKind::CvxCsv);
            prop_assert!((a.isr - b.isr).abs() <= 1e-12 * a.isr);
        }

        #[test]
        fn nested_models_order(seed in any::<u64>(), blocks in 2usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let profile = random_profile(blocks, 2, &mut rng);
            let schedule = BlendingSchedule::linear(blocks as i64).unwrap();
            let bound = |w: &BasisWeights| crib_isr(&crlb_h(&assemble_fim(&profile, w, 20).unwrap()), &profile, ModelKind::CvxCsv).isr;
            let cvx = bound(&BasisWeights::convex(&schedule));
            let csv = bound(&BasisWeights::csv(blocks));
            prop_assert!(cvx <= csv * (1.0 + 1e-10));
        }
    }
}
