//! Seeded random SPD matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{MatrixTuple, SpdMatrix};

/// Generates `Q Λ Qᵀ` with `Q` the orthogonal QR factor of a Gaussian matrix
/// and `Λ` log-uniform in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdSampler {
    pub seed: u64,
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
}

impl SpdSampler {
    pub fn new(seed: u64, dim: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
        }
        if dim == 0 {
            return Err(Error::UnsupportedDegree {
                what: "matrix dimension",
                degree: 0,
            });
        }
        Ok(SpdSampler { seed, dim, lo, hi })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// `count` matrices; the same seed always gives the same list.
    pub fn sample(&self, count: usize) -> Vec<SpdMatrix> {
        let mut rng = self.rng();
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }

    /// `count` tuples of `n` matrices each.
    pub fn sample_tuples(&self, n: usize, count: usize) -> Vec<MatrixTuple> {
        let mut rng = self.rng();
        (0..count)
            .map(|_| {
                MatrixTuple::new((0..n).map(|_| self.draw(&mut rng)).collect())
                    .expect("uniform dimension")
            })
            .collect()
    }

    pub fn draw(&self, rng: &mut impl Rng) -> SpdMatrix {
        let q = random_orthogonal(rng, self.dim);
        let values = self.draw_spectrum(rng);
        SpdMatrix::from_spectrum(&q, &values)
    }

    pub fn draw_spectrum(&self, rng: &mut impl Rng) -> DVector<f64> {
        let (llo, lhi) = (self.lo.ln(), self.hi.ln());
        DVector::from_fn(self.dim, |_, _| {
            if lhi > llo {
                rng.random_range(llo..=lhi).exp()
            } else {
                self.lo
            }
        })
    }
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Orthogonal factor of a Gaussian matrix, with column signs fixed so the
/// distribution is Haar.
pub fn random_orthogonal(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
