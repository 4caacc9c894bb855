//! Observation model `y = f + ξ` with i.i.d. `N(0, σ²)` noise, the scaled
//! Euclidean norm `‖u‖ = |u|₂/√n`, and seeded sampling.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`) seeded through
//! `seed_from_u64`; standard normal draws use the ziggurat sampler of
//! `rand_distr::StandardNormal`. Replication `i` of a Monte Carlo run with base
//! seed `b` uses the seed [`replication_seed`]`(b, i)`, so replications can be
//! computed in any order.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// Tolerance on the diagonal of `XᵀX/n` when checking column normalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Dense `n × p` design matrix.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    spectral: OnceLock<f64>,
}

impl PartialEq for DesignMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x
    }
}

impl DesignMatrix {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return invalid("design matrix must have n >= 1 and p >= 1");
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("design matrix has non-finite entries");
        }
        Ok(Self {
            x,
            spectral: OnceLock::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return invalid("design matrix has no rows");
        }
        let p = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return invalid(format!(
                    "row {i} of X has length {} (expected {p})",
                    r.len()
                ));
            }
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    /// I.i.d. standard Gaussian entries, each column rescaled so that
    /// `(1/n)|x_j|₂² = 1`.
    pub fn gaussian_normalized(n: usize, p: usize, seed: u64) -> Result<Self> {
        if n == 0 || p == 0 {
            return invalid("n and p must be positive");
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        for mut col in x.column_iter_mut() {
            let scale = (n as f64).sqrt() / col.norm();
            col *= scale;
        }
        Self::new(x)
    }

    /// `√n · Q` with `Q` a random `n × n` orthogonal matrix, so that
    /// `XᵀX/n = I` exactly up to rounding.
    pub fn orthonormal(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return invalid("n must be positive");
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let q = g.qr().q();
        Self::new(q * (n as f64).sqrt())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.x
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// Largest singular value of `X`, computed once by dense SVD.
    pub fn spectral_norm(&self) -> f64 {
        *self.spectral.get_or_init(|| {
            self.x
                .clone()
                .svd(false, false)
                .singular_values
                .iter()
                .fold(0.0_f64, |m, &s| m.max(s))
        })
    }

    /// `XᵀX / n`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x) / self.n() as f64
    }

    /// `Xβ`.
    pub fn apply(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.x * beta
    }

    /// `Xᵀu`.
    pub fn apply_t(&self, u: &DVector<f64>) -> DVector<f64> {
        self.x.tr_mul(u)
    }

    /// Submatrix made of the listed columns.
    pub fn columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.x.select_columns(idx)
    }

    pub fn check_column_normalization(&self) -> ColumnNormalization {
        check_column_normalization(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnNormalization {
    pub normalized: bool,
    /// `max_j (1/n)|x_j|₂²`.
    pub worst: f64,
}

/// Reports whether every diagonal entry of `XᵀX/n` is at most `1 + 1e-12`.
pub fn check_column_normalization(x: &DesignMatrix) -> ColumnNormalization {
    let n = x.n() as f64;
    let worst = x
        .matrix()
        .column_iter()
        .map(|c| c.norm_squared() / n)
        .fold(0.0_f64, f64::max);
    ColumnNormalization {
        normalized: worst <= 1.0 + NORMALIZATION_TOL,
        worst,
    }
}

/// `sqrt((1/n) Σ uᵢ²)`.
pub fn scaled_norm(u: &[f64]) -> Result<f64> {
    if u.is_empty() {
        return invalid("scaled norm of an empty vector");
    }
    if u.iter().any(|v| !v.is_finite()) {
        return invalid("scaled norm of a non-finite vector");
    }
    Ok(sn(u))
}

pub(crate) fn sn(u: &[f64]) -> f64 {
    (u.iter().map(|v| v * v).sum::<f64>() / u.len() as f64).sqrt()
}

/// Design, true mean `f` and noise level `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub design: DesignMatrix,
    pub mean: DVector<f64>,
    pub sigma: f64,
}

impl Problem {
    pub fn new(design: DesignMatrix, mean: DVector<f64>, sigma: f64) -> Result<Self> {
        let p = Self {
            design,
            mean,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// Mean generated by a planted coefficient vector: `f = Xβ*`.
    pub fn planted(design: DesignMatrix, beta: &DVector<f64>, sigma: f64) -> Result<Self> {
        check_dim("planted coefficients", design.p(), beta.len())?;
        let mean = design.apply(beta);
        Self::new(design, mean, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            ));
        }
        check_dim("mean vector", self.design.n(), self.mean.len())?;
        if self.mean.iter().any(|v| !v.is_finite()) {
            return invalid("mean vector has non-finite entries");
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }
}

/// One draw `y = f + ξ`, with the noise kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: DVector<f64>,
    pub noise: DVector<f64>,
    pub seed: u64,
}

/// `n` standard normal draws from ChaCha20 seeded with `seed`.
pub fn standard_normal_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)))
}

/// Draws `ξ ~ N(0, σ² I)` and returns `y = f + ξ`. Identical `(problem, seed)`
/// gives a bit-identical observation.
pub fn sample_observation(problem: &Problem, seed: u64) -> Result<Observation> {
    problem.validate()?;
    let noise = standard_normal_vector(problem.n(), seed) * problem.sigma;
    let y = &problem.mean + &noise;
    Ok(Observation { y, noise, seed })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under base seed `base` (two rounds of the
/// splitmix64 finalizer).
pub fn replication_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// JSON form shared by the CLI: `{n, p, X, f, sigma, seed, y}` with `X` an
/// array of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
}

impl ProblemDocument {
    pub fn from_problem(problem: &Problem, observation: Option<&Observation>) -> Self {
        Self {
            n: problem.n(),
            p: problem.p(),
            x: problem.design.rows(),
            f: problem.mean.iter().copied().collect(),
            sigma: problem.sigma,
            seed: observation.map(|o| o.seed),
            y: observation.map(|o| o.y.iter().copied().collect()),
        }
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let design = DesignMatrix::from_rows(&self.x)?;
        check_dim("X rows (n)", self.n, design.n())?;
        check_dim("X columns (p)", self.p, design.p())?;
        Problem::new(design, DVector::from_vec(self.f.clone()), self.sigma)
    }

    /// Rebuilds the observation. A stored `y` must agree with the one
    /// regenerated from `seed`.
    pub fn to_observation(&self, problem: &Problem) -> Result<Option<Observation>> {
        let Some(seed) = self.seed else {
            return match self.y {
                Some(_) => invalid("field `y` given without `seed`"),
                None => Ok(None),
            };
        };
        let obs = sample_observation(problem, seed)?;
        if let Some(y) = &self.y {
            check_dim("y", problem.n(), y.len())?;
            if obs.y.iter().zip(y).any(|(a, b)| a != b) {
                return Err(Error::Validation(
                    "stored `y` does not match the observation regenerated from `seed`".into(),
                ));
            }
        }
        Ok(Some(obs))
    }
}
