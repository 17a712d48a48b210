//! Built-in test tuples.
//!
//! `matricibuffe` is the classic four-matrix 3×3 benchmark with widely spread
//! inputs. The synthetic sets are seeded 6×6 block-diagonal tuples whose
//! items lie close to each other.

use nalgebra::DMatrix;

use crate::linalg::{mat_power, MatrixTuple, SpdMatrix};
use crate::sampling::{gaussian_matrix, SpdSampler};

pub const DEFAULT_SEED: u64 = 2010;

pub const FIXTURE_NAMES: &[&str] = &[
    "matricibuffe",
    "scalar",
    "powers-of-m",
    "synthetic-4",
    "synthetic-5",
    "synthetic-6",
];

pub fn matricibuffe() -> MatrixTuple {
    let rows = |v: [f64; 9]| SpdMatrix::from_row_slice(3, &v).expect("fixture is SPD");
    MatrixTuple::new(vec![
        rows([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        rows([3.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 100.0]),
        rows([2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0]),
        rows([20.0, 0.0, -10.0, 0.0, 20.0, 0.0, -10.0, 0.0, 20.0]),
    ])
    .expect("fixture is a tuple")
}

/// Four copies of the 3×3 identity.
pub fn scalar() -> MatrixTuple {
    MatrixTuple::scalar(&SpdMatrix::identity(3), 4).expect("fixture is a tuple")
}

/// The seeded 6×6 matrix used as `M` by [`powers_of_m`].
pub fn powers_base(seed: u64) -> SpdMatrix {
    SpdSampler {
        seed,
        dim: 6,
        lo: 0.5,
        hi: 2.0,
    }
    .sample(1)
    .remove(0)
}

/// `(M⁻², M, M², M³)`; every mean of it equals `M`.
pub fn powers_of_m(seed: u64) -> MatrixTuple {
    let m = powers_base(seed);
    MatrixTuple::new(vec![
        mat_power(&m, -2.0),
        m.clone(),
        mat_power(&m, 2.0),
        mat_power(&m, 3.0),
    ])
    .expect("fixture is a tuple")
}

/// `n` random tuples-items of dimension `dim`, eigenvalues in [0.1, 10].
pub fn random_tuple(n: usize, dim: usize, seed: u64) -> MatrixTuple {
    SpdSampler {
        seed,
        dim,
        lo: 0.1,
        hi: 10.0,
    }
    .sample_tuples(n, 1)
    .remove(0)
}

/// `n` nearby 6×6 matrices made of two 3×3 diagonal blocks: a shared base
/// block, congruence-perturbed per item by `I + 0.15 G`. The tuple is scaled
/// so its largest entry is 1; with entries near 1e2 the default absolute
/// tolerance of 1e-13 is below round-off and the deeper recursions stall.
pub fn synthetic(n: usize, seed: u64) -> MatrixTuple {
    let sampler = SpdSampler {
        seed,
        dim: 3,
        lo: 1.0,
        hi: 50.0,
    };
    let mut rng = sampler.rng();
    let bases = [sampler.draw(&mut rng), sampler.draw(&mut rng)];
    let items: Vec<SpdMatrix> = (0..n)
        .map(|_| {
            let mut full = DMatrix::zeros(6, 6);
            for (k, base) in bases.iter().enumerate() {
                let x = DMatrix::identity(3, 3) + gaussian_matrix(&mut rng, 3, 3) * 0.15;
                let block = x.transpose() * base.as_matrix() * x;
                full.view_mut((3 * k, 3 * k), (3, 3)).copy_from(&block);
            }
            SpdMatrix::new((&full + full.transpose()) * 0.5).expect("perturbed block is SPD")
        })
        .collect();
    let top = items
        .iter()
        .map(SpdMatrix::max_abs_entry)
        .fold(0.0, f64::max);
    MatrixTuple::new(items.iter().map(|a| a.scale(1.0 / top)).collect())
        .expect("fixture is a tuple")
}

/// Look up a built-in fixture by name.
pub fn by_name(name: &str, seed: u64) -> Option<MatrixTuple> {
    match name {
        "matricibuffe" => Some(matricibuffe()),
        "scalar" => Some(scalar()),
        "powers-of-m" | "powers-of-M" => Some(powers_of_m(seed)),
        "synthetic-4" => Some(synthetic(4, seed)),
        "synthetic-5" => Some(synthetic(5, seed)),
        "synthetic-6" => Some(synthetic(6, seed)),
        _ => None,
    }
}
