//! Convex-blending mixing model.
//!
//! The SOI mixing vector on block `t` is `a_t = lambda_t a_1 + (1 - lambda_t) a_T`
//! and the separating vector `w = (1; h)` is shared by all blocks. Writing
//! `a_t = (gamma_t; g_t)`, the blocking matrix is `B_t = (g_t, -gamma_t I)`
//! and the demixing matrix stacks `w^H` over `B_t`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, CVector, C64};

/// Smallest admissible `|gamma_t|`.
pub const GAMMA_EPS: f64 = 1e-12;

/// Tolerance on `w^H a_t = 1` when building demixing pairs.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// Blending weights `lambda_1..lambda_T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BlendingSchedule {
    lambda: Vec<f64>,
}

impl BlendingSchedule {
    /// Validates an arbitrary schedule: weights in `[0, 1]`, first weight 1,
    /// last weight 0 when there are at least two blocks.
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidBlockCount(0));
        }
        if lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidConfig("blending weights must lie in [0, 1]".into()));
        }
        let ends_ok = if lambda.len() == 1 {
            lambda[0] == 1.0
        } else {
            lambda[0] == 1.0 && lambda[lambda.len() - 1] == 0.0
        };
        if !ends_ok {
            return Err(Error::InvalidConfig(
                "blending schedule must start at 1 and end at 0".into(),
            ));
        }
        Ok(Self { lambda })
    }

    /// `lambda_t = (T - t) / (T - 1)`; a single block gets weight 1.
    pub fn linear(blocks: i64) -> Result<Self> {
        if blocks <= 0 {
            return Err(Error::InvalidBlockCount(blocks));
        }
        let t_count = blocks as usize;
        if t_count == 1 {
            return Ok(Self { lambda: vec![1.0] });
        }
        let denom = (t_count - 1) as f64;
        Ok(Self {
            lambda: (1..=t_count).map(|t| (t_count - t) as f64 / denom).collect(),
        })
    }

    pub fn blocks(&self) -> usize {
        self.lambda.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.lambda
    }

    /// Weight of block `t` (1-based).
    pub fn lambda(&self, t: usize) -> Result<f64> {
        self.check_block(t)?;
        Ok(self.lambda[t - 1])
    }

    /// Time-reversed schedule `lambda_t -> 1 - lambda_t`, swapping the roles
    /// of the two endpoints.
    pub fn complement(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 - l).collect()
    }

    fn check_block(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.lambda.len() {
            return Err(Error::BlockOutOfRange { t, blocks: self.lambda.len() });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for BlendingSchedule {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BlendingSchedule> for Vec<f64> {
    fn from(s: BlendingSchedule) -> Vec<f64> {
        s.lambda
    }
}

/// Endpoint mixing vectors plus the schedule that blends them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingPath {
    #[serde(with = "crate::serde_complex::vector")]
    a_first: CVector,
    #[serde(with = "crate::serde_complex::vector")]
    a_last: CVector,
    schedule: BlendingSchedule,
}

impl MixingPath {
    pub fn new(a_first: CVector, a_last: CVector, schedule: BlendingSchedule) -> Result<Self> {
        let d = a_first.len();
        if d < 2 || a_last.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "endpoint lengths {} and {} (need equal, >= 2)",
                d,
                a_last.len()
            )));
        }
        for a in [&a_first, &a_last] {
            if a[0].norm() < GAMMA_EPS {
                return Err(Error::GammaZero(a[0].norm()));
            }
        }
        Ok(Self { a_first, a_last, schedule })
    }

    /// Same mixing vector on every block.
    pub fn constant(a: CVector, blocks: usize) -> Result<Self> {
        let schedule = BlendingSchedule::linear(blocks as i64)?;
        Self::new(a.clone(), a, schedule)
    }

    pub fn dim(&self) -> usize {
        self.a_first.len()
    }

    pub fn blocks(&self) -> usize {
        self.schedule.blocks()
    }

    pub fn a_first(&self) -> &CVector {
        &self.a_first
    }

    pub fn a_last(&self) -> &CVector {
        &self.a_last
    }

    pub fn schedule(&self) -> &BlendingSchedule {
        &self.schedule
    }
}

/// `lambda_t a_first + (1 - lambda_t) a_last`.
pub fn mixing_at(path: &MixingPath, t: usize) -> Result<CVector> {
    let l = path.schedule.lambda(t)?;
    if l == 1.0 {
        return Ok(path.a_first.clone());
    }
    if l == 0.0 {
        return Ok(path.a_last.clone());
    }
    Ok(&path.a_first * C64::new(l, 0.0) + &path.a_last * C64::new(1.0 - l, 0.0))
}

/// Separating vector `w = (1; h)`; the leading coefficient is fixed to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatingVector {
    #[serde(with = "crate::serde_complex::vector")]
    h: CVector,
}

impl SeparatingVector {
    pub fn new(h: CVector) -> Self {
        Self { h }
    }

    /// `w = e_1`.
    pub fn unit(d: usize) -> Self {
        Self { h: CVector::zeros(d - 1) }
    }

    pub fn beta(&self) -> C64 {
        C64::new(1.0, 0.0)
    }

    pub fn h(&self) -> &CVector {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.len() + 1
    }

    pub fn to_vector(&self) -> CVector {
        let mut w = CVector::zeros(self.dim());
        w[0] = self.beta();
        w.rows_mut(1, self.h.len()).copy_from(&self.h);
        w
    }

    /// `w^H x`.
    pub fn apply(&self, x: &CVector) -> C64 {
        self.to_vector().dotc(x)
    }
}

/// `B = (g, -gamma I_{d-1})` for `a = (gamma; g)`, so that `B a = 0`.
pub fn blocking_matrix(a: &CVector) -> CMatrix {
    let d = a.len();
    assert!(d >= 2, "blocking matrix needs d >= 2");
    let gamma = a[0];
    CMatrix::new(DMatrix::from_fn(d - 1, d, |i, j| {
        if j == 0 {
            a[i + 1]
        } else if j == i + 1 {
            -gamma
        } else {
            C64::new(0.0, 0.0)
        }
    }))
    .expect("entries of a finite vector")
}

/// Demixing matrix `W = (w^H; B_t)` and its closed-form inverse
/// `A = (a_t, Q_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DemixingPair {
    pub w: CMatrix,
    pub a: CMatrix,
}

impl DemixingPair {
    /// `Q_t`: the last `d - 1` columns of `A`.
    pub fn q(&self) -> CMatrix {
        let d = self.a.nrows();
        CMatrix::new(self.a.columns(1, d - 1).into_owned()).expect("finite")
    }

    /// `B_t`: the last `d - 1` rows of `W`.
    pub fn blocking(&self) -> CMatrix {
        let d = self.w.nrows();
        CMatrix::new(self.w.rows(1, d - 1).into_owned()).expect("finite")
    }

    /// `(-1)^(d-1) gamma_t^(d-2)`.
    pub fn determinant(&self) -> C64 {
        let d = self.w.nrows();
        let gamma = self.a[(0, 0)];
        let sign = if (d - 1) % 2 == 0 { 1.0 } else { -1.0 };
        gamma.powi(d as i32 - 2) * sign
    }
}

pub fn demixing_pair(w: &SeparatingVector, a_t: &CVector) -> Result<DemixingPair> {
    let d = a_t.len();
    if w.dim() != d || d < 2 {
        return Err(Error::DimensionMismatch(format!(
            "separating vector of length {} with mixing vector of length {d}",
            w.dim()
        )));
    }
    let gamma = a_t[0];
    if gamma.norm() < GAMMA_EPS {
        return Err(Error::GammaZero(gamma.norm()));
    }
    let gain = w.apply(a_t);
    if (gain - C64::new(1.0, 0.0)).norm() > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolated((gain - C64::new(1.0, 0.0)).norm()));
    }
    let wv = w.to_vector();
    let blocking = blocking_matrix(a_t);
    let w_mat = DMatrix::from_fn(d, d, |i, j| if i == 0 { wv[j].conj() } else { blocking[(i - 1, j)] });

    // Q_t = (h^H; (g_t h^H - I) / gamma_t)
    let h = w.h();
    let inv_gamma = gamma.inv();
    let a_mat = DMatrix::from_fn(d, d, |i, j| {
        if j == 0 {
            a_t[i]
        } else if i == 0 {
            h[j - 1].conj()
        } else {
            let delta = if i == j { 1.0 } else { 0.0 };
            (a_t[i] * h[j - 1].conj() - delta) * inv_gamma
        }
    });
    Ok(DemixingPair { w: CMatrix::new(w_mat)?, a: CMatrix::new(a_mat)? })
}

/// Endpoint mixing vectors and separating vector implied by the free
/// parameters `(g_1, g_T, h)` under `w^H a_1 = w^H a_T = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedEndpoints {
    pub a_first: CVector,
    pub a_last: CVector,
    pub separator: SeparatingVector,
}

/// Sets `gamma_1 = 1 - h^H g_1` and `gamma_T = 1 - h^H g_T`.
pub fn apply_distortionless(g1: &CVector, g_last: &CVector, h: &CVector) -> Result<ConstrainedEndpoints> {
    let m = h.len();
    if g1.len() != m || g_last.len() != m || m == 0 {
        return Err(Error::DimensionMismatch(format!(
            "free parameter lengths {}, {}, {}",
            g1.len(),
            g_last.len(),
            m
        )));
    }
    let endpoint = |g: &CVector| -> Result<CVector> {
        let gamma = C64::new(1.0, 0.0) - h.dotc(g);
        if gamma.norm() < GAMMA_EPS {
            return Err(Error::DegenerateGamma(gamma.norm()));
        }
        let mut a = CVector::zeros(m + 1);
        a[0] = gamma;
        a.rows_mut(1, m).copy_from(g);
        Ok(a)
    };
    Ok(ConstrainedEndpoints {
        a_first: endpoint(g1)?,
        a_last: endpoint(g_last)?,
        separator: SeparatingVector::new(h.clone()),
    })
}

/// 1-based block of the 1-based sample `n`: `ceil(n T / N)`.
pub fn block_of_sample(n: usize, samples: usize, blocks: usize) -> usize {
    (n * blocks).div_ceil(samples)
}

/// Random unit-norm endpoints whose first entries have modulus at least
/// `min_gamma`, with the minimum-norm `h` satisfying both distortionless
/// constraints. Requires `d >= 3` so that the two constraints on `h` are
/// generically solvable.
pub fn random_endpoints<R: Rng + ?Sized>(d: usize, min_gamma: f64, rng: &mut R) -> Result<ConstrainedEndpoints> {
    if d < 3 {
        return Err(Error::InvalidConfig("random endpoints need d >= 3".into()));
    }
    let mut draw = || loop {
        let v = CVector::from_fn(d, |_, _| {
            C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
        });
        let v = &v / C64::new(v.norm(), 0.0);
        if v[0].norm() >= min_gamma {
            return v;
        }
    };
    let (a1, at) = (draw(), draw());
    let m = d - 1;
    // Rows g^H; solve G h = conj(1 - gamma) in the minimum-norm sense.
    let g = CMatrix::new(DMatrix::from_fn(2, m, |i, j| {
        let a = if i == 0 { &a1 } else { &at };
        a[j + 1].conj()
    }))?;
    let rhs = CMatrix::new(DMatrix::from_fn(2, 1, |i, _| {
        let a = if i == 0 { &a1 } else { &at };
        (C64::new(1.0, 0.0) - a[0]).conj()
    }))?;
    let gram = &g * &g.adjoint();
    let h = &g.adjoint() * &gram.solve(&rhs)?;
    let h = CVector::from_iterator(m, h.iter().copied());
    let g1 = CVector::from_iterator(m, a1.iter().skip(1).copied());
    let gt = CVector::from_iterator(m, at.iter().skip(1).copied());
    apply_distortionless(&g1, &gt, &h)
}
