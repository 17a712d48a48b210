//! Symmetric positive definite matrices and the spectral matrix functions
//! built on them.
//!
//! Every matrix function goes through a symmetric eigendecomposition and the
//! result is symmetrized as `(X + Xᵀ) / 2` before it is wrapped again, so the
//! SPD invariants survive long iterations.
//!
//! The geodesic operators [`sharp`] and [`sharp_t`] use the congruence form
//! `A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}`, which only ever takes roots of
//! symmetric matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;

/// Default relative symmetry tolerance used by [`SpdMatrix::new`].
pub const DEFAULT_SYM_TOL: f64 = 1e-12;

/// Tally of root-type matrix function evaluations.
///
/// One [`sharp`] counts one square root; one [`sharp_t`] with `t = 1/p`
/// counts one p-th root.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub sqrt_count: u64,
    pub proot_count: u64,
}

impl OpCounters {
    pub fn merge(&mut self, other: OpCounters) {
        self.sqrt_count += other.sqrt_count;
        self.proot_count += other.proot_count;
    }
}

impl std::ops::Add for OpCounters {
    type Output = OpCounters;

    fn add(mut self, rhs: OpCounters) -> OpCounters {
        self.merge(rhs);
        self
    }
}

/// A real symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    inner: DMatrix<f64>,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Validate `raw` as an SPD matrix and return its symmetrized copy.
///
/// Asymmetry and the eigenvalue floor are both measured relative to the
/// largest absolute entry.
pub fn make_spd(raw: &DMatrix<f64>, sym_tol: f64) -> Result<SpdMatrix> {
    if raw.nrows() != raw.ncols() {
        return Err(Error::NotSquare {
            rows: raw.nrows(),
            cols: raw.ncols(),
        });
    }
    if raw.nrows() == 0 {
        return Err(Error::UnsupportedDegree {
            what: "matrix dimension",
            degree: 0,
        });
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
        });
    }
    let scale = max_abs(raw);
    let asymmetry = max_abs(&(raw - raw.transpose()));
    let tolerance = sym_tol * scale;
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    let sym = symmetrize(raw);
    let min_eigenvalue = sym.symmetric_eigenvalues().min();
    if min_eigenvalue <= sym_tol * scale {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    Ok(SpdMatrix { inner: sym })
}

impl SpdMatrix {
    pub fn new(raw: DMatrix<f64>) -> Result<Self> {
        make_spd(&raw, DEFAULT_SYM_TOL)
    }

    /// Build from `dim * dim` values in row-major order.
    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Wrap a matrix that is SPD by construction (the output of a spectral
    /// function with positive eigenvalues), symmetrizing it.
    pub(crate) fn trusted(m: DMatrix<f64>) -> Self {
        SpdMatrix {
            inner: symmetrize(&m),
        }
    }

    /// `Q diag(values) Qᵀ`.
    pub fn from_spectrum(vectors: &DMatrix<f64>, values: &DVector<f64>) -> Self {
        let scaled = vectors * DMatrix::from_diagonal(values);
        Self::trusted(scaled * vectors.transpose())
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn max_abs_entry(&self) -> f64 {
        max_abs(&self.inner)
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.inner.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| eig.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.eigen().0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.inner.symmetric_eigenvalues().min()
    }

    /// Apply a scalar function to the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SpdMatrix {
        let eig = SymmetricEigen::new(self.inner.clone());
        let mapped = eig
            .eigenvalues
            .map(|lambda| f(lambda.max(f64::MIN_POSITIVE)));
        Self::from_spectrum(&eig.eigenvectors, &mapped)
    }

    pub fn inverse(&self) -> SpdMatrix {
        self.map_spectrum(|x| 1.0 / x)
    }

    pub fn determinant(&self) -> f64 {
        self.inner.symmetric_eigenvalues().iter().product()
    }

    pub fn scale(&self, alpha: f64) -> SpdMatrix {
        SpdMatrix {
            inner: &self.inner * alpha,
        }
    }

    /// `Sᵀ A S`; validated because `S` may be singular.
    pub fn congruence(&self, s: &DMatrix<f64>) -> Result<SpdMatrix> {
        if s.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: s.nrows(),
            });
        }
        make_spd(
            &symmetrize(&(s.transpose() * &self.inner * s)),
            DEFAULT_SYM_TOL,
        )
    }

    /// Sum of two SPD matrices (SPD again).
    pub fn add(&self, other: &SpdMatrix) -> Result<SpdMatrix> {
        check_dims(self, other)?;
        Ok(SpdMatrix::trusted(&self.inner + &other.inner))
    }

    /// `λ A + (1 − λ) B` for λ in [0, 1].
    pub fn convex(&self, other: &SpdMatrix, lambda: f64) -> Result<SpdMatrix> {
        check_dims(self, other)?;
        Ok(SpdMatrix::trusted(
            &self.inner * lambda + &other.inner * (1.0 - lambda),
        ))
    }
}

fn check_dims(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Spectral real power `Q Λᵗ Qᵀ`. Not counted.
pub fn mat_power(a: &SpdMatrix, t: f64) -> SpdMatrix {
    if t == 1.0 {
        return a.clone();
    }
    a.map_spectrum(|x| x.powf(t))
}

/// Principal square root; counts one square root.
pub fn mat_sqrt(a: &SpdMatrix, counters: &mut OpCounters) -> SpdMatrix {
    counters.sqrt_count += 1;
    a.map_spectrum(f64::sqrt)
}

/// Principal p-th root; counts one p-th root.
pub fn mat_proot(a: &SpdMatrix, p: u32, counters: &mut OpCounters) -> Result<SpdMatrix> {
    if p < 2 {
        return Err(Error::InvalidOrder(p));
    }
    counters.proot_count += 1;
    Ok(mat_power(a, 1.0 / f64::from(p)))
}

/// `Some(p)` when `t == 1/p` for an integer `p >= 2`.
pub fn root_order(t: f64) -> Option<u32> {
    if !(t > 0.0 && t <= 0.5) {
        return None;
    }
    let p = (1.0 / t).round();
    if p >= 2.0 && p < f64::from(u32::MAX) && (t * p - 1.0).abs() < 1e-12 {
        Some(p as u32)
    } else {
        None
    }
}

fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    check_dims(a, b)?;
    let eig = SymmetricEigen::new(a.inner.clone());
    let lambdas = eig.eigenvalues.map(|x| x.max(f64::MIN_POSITIVE));
    let q = &eig.eigenvectors;
    let half = q * DMatrix::from_diagonal(&lambdas.map(f64::sqrt)) * q.transpose();
    let inv_half = q * DMatrix::from_diagonal(&lambdas.map(|x| 1.0 / x.sqrt())) * q.transpose();
    let inner = SpdMatrix::trusted(&inv_half * &b.inner * &inv_half);
    let powered = inner.map_spectrum(|x| x.powf(t));
    Ok(SpdMatrix::trusted(&half * powered.inner * &half))
}

/// Two-matrix geometric mean `A # B`; counts one square root.
pub fn sharp(a: &SpdMatrix, b: &SpdMatrix, counters: &mut OpCounters) -> Result<SpdMatrix> {
    let out = geodesic(a, b, 0.5)?;
    counters.sqrt_count += 1;
    Ok(out)
}

/// Geodesic point `A #_t B`. Counts one p-th root when `t = 1/p`, nothing
/// otherwise.
pub fn sharp_t(
    a: &SpdMatrix,
    b: &SpdMatrix,
    t: f64,
    counters: &mut OpCounters,
) -> Result<SpdMatrix> {
    let out = geodesic(a, b, t)?;
    if root_order(t).is_some() {
        counters.proot_count += 1;
    }
    Ok(out)
}

/// An ordered list of same-sized SPD matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTuple {
    items: Vec<SpdMatrix>,
}

impl MatrixTuple {
    /// At least two matrices of equal dimension.
    pub fn new(items: Vec<SpdMatrix>) -> Result<Self> {
        if items.len() < 2 {
            return Err(Error::TupleTooSmall {
                min: 2,
                found: items.len(),
            });
        }
        Self::from_vec(items)
    }

    /// Like [`MatrixTuple::new`] but also accepts a single matrix, which is
    /// what unary expression nodes work on.
    pub(crate) fn from_vec(items: Vec<SpdMatrix>) -> Result<Self> {
        if let Some(first) = items.first() {
            for item in &items[1..] {
                check_dims(first, item)?;
            }
        }
        Ok(MatrixTuple { items })
    }

    pub fn scalar(a: &SpdMatrix, n: usize) -> Result<Self> {
        Self::new(vec![a.clone(); n])
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.items[0].dim()
    }

    pub fn items(&self) -> &[SpdMatrix] {
        &self.items
    }

    pub fn into_items(self) -> Vec<SpdMatrix> {
        self.items
    }

    pub fn get(&self, i: usize) -> &SpdMatrix {
        &self.items[i]
    }

    /// True when all items agree entrywise within `tol` relative to the
    /// largest entry.
    pub fn is_scalar(&self, tol: f64) -> bool {
        let first = &self.items[0];
        let scale = first.max_abs_entry().max(f64::MIN_POSITIVE);
        self.items[1..]
            .iter()
            .all(|x| max_abs(&(x.as_matrix() - first.as_matrix())) <= tol * scale)
    }

    /// `σ·A = (A_{σ(1)}, …, A_{σ(n)})`.
    pub fn permuted(&self, sigma: &Permutation) -> Result<Self> {
        if sigma.degree() != self.len() {
            return Err(Error::DegreeMismatch {
                left: sigma.degree(),
                right: self.len(),
            });
        }
        Ok(MatrixTuple {
            items: (0..self.len())
                .map(|i| self.items[sigma.apply(i)].clone())
                .collect(),
        })
    }

    /// Drop item `i`.
    pub fn without(&self, i: usize) -> MatrixTuple {
        MatrixTuple {
            items: self
                .items
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, m)| m.clone())
                .collect(),
        }
    }

    /// Largest entrywise absolute difference between corresponding items.
    pub fn max_entry_diff(&self, other: &MatrixTuple) -> f64 {
        self.items
            .iter()
            .zip(&other.items)
            .map(|(a, b)| max_abs(&(a.as_matrix() - b.as_matrix())))
            .fold(0.0, f64::max)
    }
}

/// `max |a − b| / max |b|`, entrywise.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(f64::MIN_POSITIVE)
}

/// Spectral norm of a general matrix.
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m)
        .symmetric_eigenvalues()
        .max()
        .max(0.0)
        .sqrt()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m).symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> SpdMatrix {
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        SpdMatrix::new(&g * g.transpose() + DMatrix::identity(dim, dim) * 0.5).unwrap()
    }

    fn diag(values: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(values).unwrap()
    }

    #[test]
    fn make_spd_accepts_identity() {
        let a = make_spd(&DMatrix::identity(3, 3), DEFAULT_SYM_TOL).unwrap();
        assert_eq!(a, SpdMatrix::identity(3));
    }

    #[test]
    fn make_spd_rejects_indefinite() {
        let raw = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = make_spd(&raw, DEFAULT_SYM_TOL).unwrap_err();
        match err {
            Error::NotPositiveDefinite { min_eigenvalue } => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn make_spd_rejects_asymmetric() {
        let raw = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            make_spd(&raw, DEFAULT_SYM_TOL),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn make_spd_symmetrizes_small_asymmetry() {
        let raw = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0 + 1e-14, 2.0]);
        let a = make_spd(&raw, DEFAULT_SYM_TOL).unwrap();
        assert_eq!(a.get(0, 1), a.get(1, 0));
    }

    #[test]
    fn make_spd_rejects_non_square() {
        let raw = DMatrix::from_row_slice(2, 3, &[1.0; 6]);
        assert!(matches!(
            make_spd(&raw, DEFAULT_SYM_TOL),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn power_of_diagonal() {
        let r = mat_power(&diag(&[4.0, 9.0]), 0.5);
        assert!(rel_diff(r.as_matrix(), diag(&[2.0, 3.0]).as_matrix()) < 1e-15);
    }

    #[test]
    fn power_one_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(&mut rng, 4);
        assert!(rel_diff(mat_power(&a, 1.0).as_matrix(), a.as_matrix()) <= 1e-13);
    }

    #[test]
    fn cube_root_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_spd(&mut rng, 5);
        let back = mat_power(&mat_power(&a, 1.0 / 3.0), 3.0);
        assert!(rel_diff(back.as_matrix(), a.as_matrix()) <= 1e-10);
    }

    #[test]
    fn sqrt_counts_and_squares_back() {
        let mut c = OpCounters::default();
        assert_eq!(
            mat_sqrt(&SpdMatrix::identity(3), &mut c),
            SpdMatrix::identity(3)
        );
        let r = mat_sqrt(&diag(&[4.0, 100.0]), &mut c);
        assert!(rel_diff(r.as_matrix(), diag(&[2.0, 10.0]).as_matrix()) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 5);
        let s = mat_sqrt(&a, &mut c);
        assert!(rel_diff(&(s.as_matrix() * s.as_matrix()), a.as_matrix()) <= 1e-10);
        assert_eq!(
            c,
            OpCounters {
                sqrt_count: 3,
                proot_count: 0
            }
        );
    }

    #[test]
    fn proot_values_and_errors() {
        let mut c = OpCounters::default();
        let r = mat_proot(&diag(&[8.0, 27.0]), 3, &mut c).unwrap();
        assert!(rel_diff(r.as_matrix(), diag(&[2.0, 3.0]).as_matrix()) < 1e-14);
        let i = mat_proot(&SpdMatrix::identity(3), 4, &mut c).unwrap();
        assert!(rel_diff(i.as_matrix(), SpdMatrix::identity(3).as_matrix()) < 1e-15);
        assert!(matches!(
            mat_proot(&SpdMatrix::identity(2), 1, &mut c),
            Err(Error::InvalidOrder(1))
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(&mut rng, 4);
        let root = mat_proot(&a, 3, &mut c).unwrap();
        let cubed = root.as_matrix() * root.as_matrix() * root.as_matrix();
        assert!(rel_diff(&cubed, a.as_matrix()) <= 1e-10);
        assert_eq!(
            c,
            OpCounters {
                sqrt_count: 0,
                proot_count: 3
            }
        );
    }

    #[test]
    fn sharp_basic_cases() {
        let mut c = OpCounters::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(&mut rng, 3);
        assert!(rel_diff(sharp(&a, &a, &mut c).unwrap().as_matrix(), a.as_matrix()) < 1e-13);

        let m = sharp(&diag(&[1.0, 4.0]), &diag(&[9.0, 1.0]), &mut c).unwrap();
        assert!(rel_diff(m.as_matrix(), diag(&[3.0, 2.0]).as_matrix()) < 1e-14);
        assert_eq!(c.sqrt_count, 2);
        assert_eq!(c.proot_count, 0);

        assert!(matches!(
            sharp(&SpdMatrix::identity(2), &SpdMatrix::identity(3), &mut c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sharp_matches_literal_form() {
        // Y = A (A⁻¹B)^{1/2} is characterized by (A⁻¹Y)² = A⁻¹B with A⁻¹Y
        // having positive spectrum, i.e. Y A⁻¹ Y = B with Y SPD.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a = random_spd(&mut rng, 4);
            let b = random_spd(&mut rng, 4);
            let mut c = OpCounters::default();
            let y = sharp(&a, &b, &mut c).unwrap();
            let a_inv = a.as_matrix().clone().try_inverse().unwrap();
            let lhs = y.as_matrix() * a_inv * y.as_matrix();
            assert!(rel_diff(&lhs, b.as_matrix()) < 1e-10);
            assert!(y.min_eigenvalue() > 0.0);
        }
    }

    #[test]
    fn sharp_t_endpoints_and_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_spd(&mut rng, 3);
        let b = random_spd(&mut rng, 3);
        let mut c = OpCounters::default();
        let at0 = sharp_t(&a, &b, 0.0, &mut c).unwrap();
        let at1 = sharp_t(&a, &b, 1.0, &mut c).unwrap();
        assert!(rel_diff(at0.as_matrix(), a.as_matrix()) < 1e-12);
        assert!(rel_diff(at1.as_matrix(), b.as_matrix()) < 1e-12);
        assert_eq!(c, OpCounters::default());

        let half = sharp_t(&a, &b, 0.5, &mut c).unwrap();
        assert_eq!(c.proot_count, 1);
        let s = sharp(&a, &b, &mut c).unwrap();
        assert!(rel_diff(half.as_matrix(), s.as_matrix()) < 1e-15);

        let third = sharp_t(
            &SpdMatrix::identity(2),
            &diag(&[8.0, 27.0]),
            1.0 / 3.0,
            &mut c,
        )
        .unwrap();
        assert!(rel_diff(third.as_matrix(), diag(&[2.0, 3.0]).as_matrix()) < 1e-14);
        assert_eq!(c.proot_count, 2);

        sharp_t(&a, &b, 2.0 / 3.0, &mut c).unwrap();
        assert_eq!(c.proot_count, 2);
    }

    #[test]
    fn root_order_detection() {
        assert_eq!(root_order(0.5), Some(2));
        assert_eq!(root_order(1.0 / 3.0), Some(3));
        assert_eq!(root_order(0.25), Some(4));
        assert_eq!(root_order(2.0 / 3.0), None);
        assert_eq!(root_order(1.0), None);
        assert_eq!(root_order(0.0), None);
        assert_eq!(root_order(-0.5), None);
    }

    #[test]
    fn tuple_construction() {
        assert!(matches!(
            MatrixTuple::new(vec![SpdMatrix::identity(2)]),
            Err(Error::TupleTooSmall { .. })
        ));
        assert!(matches!(
            MatrixTuple::new(vec![SpdMatrix::identity(2), SpdMatrix::identity(3)]),
            Err(Error::DimensionMismatch { .. })
        ));
        let t = MatrixTuple::scalar(&SpdMatrix::identity(2), 3).unwrap();
        assert!(t.is_scalar(0.0));
        let u = MatrixTuple::new(vec![SpdMatrix::identity(2), diag(&[1.0, 2.0])]).unwrap();
        assert!(!u.is_scalar(1e-12));
    }
}
