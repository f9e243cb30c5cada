use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N(mu, Sigma)` over the three feature coefficients, with `Sigma = chol chol^T`.
///
/// `chol` is lower triangular with a non-negative diagonal; an all-zero factor
/// is the point mass at `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct MvnParams {
    mu: Vector3<f64>,
    chol: Matrix3<f64>,
}

impl MvnParams {
    pub fn new(mu: Vector3<f64>, chol: Matrix3<f64>) -> Result<Self> {
        if mu.iter().chain(chol.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("MVN parameters must be finite".into()));
        }
        for r in 0..3 {
            for c in r + 1..3 {
                if chol[(r, c)] != 0.0 {
                    return Err(Error::Domain("Cholesky factor must be lower triangular".into()));
                }
            }
            if chol[(r, r)] < 0.0 {
                return Err(Error::Domain("Cholesky diagonal must be non-negative".into()));
            }
        }
        Ok(MvnParams { mu, chol })
    }

    /// Independent coefficients with the given variances.
    pub fn diagonal(mu: Vector3<f64>, variances: Vector3<f64>) -> Result<Self> {
        if variances.iter().any(|v| *v < 0.0) {
            return Err(Error::Domain("variances must be non-negative".into()));
        }
        Self::new(mu, Matrix3::from_diagonal(&variances.map(f64::sqrt)))
    }

    /// From the row-major lower triangle `[l00, l10, l11, l20, l21, l22]`.
    pub fn from_lower(mu: [f64; 3], lower: [f64; 6]) -> Result<Self> {
        let [a, b, c, d, e, f] = lower;
        Self::new(
            Vector3::from(mu),
            Matrix3::new(a, 0.0, 0.0, b, c, 0.0, d, e, f),
        )
    }

    pub fn mu(&self) -> &Vector3<f64> {
        &self.mu
    }

    pub fn chol(&self) -> &Matrix3<f64> {
        &self.chol
    }

    pub fn lower(&self) -> [f64; 6] {
        let l = &self.chol;
        [l[(0, 0)], l[(1, 0)], l[(1, 1)], l[(2, 0)], l[(2, 1)], l[(2, 2)]]
    }

    pub fn sigma(&self) -> Matrix3<f64> {
        self.chol * self.chol.transpose()
    }

    /// `mu + chol z`.
    pub fn transform(&self, z: &Vector3<f64>) -> Vector3<f64> {
        self.mu + self.chol * z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MvnParamsRepr {
    mu: [f64; 3],
    chol: [f64; 6],
}

impl Serialize for MvnParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MvnParamsRepr {
            mu: self.mu.into(),
            chol: self.lower(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MvnParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MvnParamsRepr::deserialize(d)?;
        MvnParams::from_lower(r.mu, r.chol).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaSample {
    pub beta: Vector3<f64>,
    pub source_seed: Option<u64>,
}

pub fn standard_normal3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

pub fn sample_beta<R: Rng + ?Sized>(params: &MvnParams, rng: &mut R) -> BetaSample {
    BetaSample {
        beta: params.transform(&standard_normal3(rng)),
        source_seed: None,
    }
}

impl BetaSample {
    /// Reproducible draw from a seed alone.
    pub fn from_seed(params: &MvnParams, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        BetaSample {
            source_seed: Some(seed),
            ..sample_beta(params, &mut rng)
        }
    }
}
