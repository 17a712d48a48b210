//! Empirical checks: the mean axioms P1 to P10 on seeded samples, isotropy
//! groups estimated by sweeping input permutations, and the symbolic
//! (reductive) stabilizer of a composition.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Canon, QuasiMeanExpr};
use crate::linalg::{max_abs, min_sym_eigenvalue, norm2, rel_diff, MatrixTuple, SpdMatrix};
use crate::means::IterationConfig;
use crate::perm::{all_permutations, CosetTransversal, PermGroup, Permutation};
use crate::sampling::{gaussian_matrix, random_orthogonal, SpdSampler};

/// Largest degree swept exhaustively by [`estimate_stabilizer`].
pub const MAX_STABILIZER_DEGREE: usize = 6;
/// Largest degree for which P3 sweeps every permutation.
pub const MAX_SWEEP_DEGREE: usize = 5;
const RANDOM_SWEEP: usize = 100;

pub const SCALAR_TOL: f64 = 1e-10;
pub const SCALAR_EXACT_TOL: f64 = 1e-12;
pub const PERMUTATION_TOL: f64 = 1e-10;
pub const SEMIDEFINITE_TOL: f64 = 1e-9;
pub const RELATIVE_TOL: f64 = 1e-9;
pub const CONTINUITY_TOL: f64 = 1e-9;
pub const STABILIZER_TOL: f64 = 1e-8;
pub const STABILIZER_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    /// Commuting inputs give the weighted product of the inputs.
    P1,
    /// `G(A, …, A) = A`.
    #[serde(rename = "P1'")]
    P1Prime,
    /// Joint homogeneity in independent scalings.
    P2,
    /// Homogeneity under a common scaling.
    #[serde(rename = "P2'")]
    P2Prime,
    /// Permutation invariance.
    P3,
    /// Monotonicity.
    P4,
    /// Continuity from above.
    P5,
    /// Congruence invariance.
    P6,
    /// Joint concavity.
    P7,
    /// Self-duality.
    P8,
    /// Determinant identity.
    P9,
    /// Arithmetic-geometric-harmonic inequality.
    P10,
}

impl Property {
    pub const ALL: [Property; 12] = [
        Property::P1,
        Property::P1Prime,
        Property::P2,
        Property::P2Prime,
        Property::P3,
        Property::P4,
        Property::P5,
        Property::P6,
        Property::P7,
        Property::P8,
        Property::P9,
        Property::P10,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Property::P1 => "P1",
            Property::P1Prime => "P1'",
            Property::P2 => "P2",
            Property::P2Prime => "P2'",
            Property::P3 => "P3",
            Property::P4 => "P4",
            Property::P5 => "P5",
            Property::P6 => "P6",
            Property::P7 => "P7",
            Property::P8 => "P8",
            Property::P9 => "P9",
            Property::P10 => "P10",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Property::P1 => "consistency with scalars",
            Property::P1Prime => "idempotence on a repeated matrix",
            Property::P2 => "joint homogeneity",
            Property::P2Prime => "homogeneity",
            Property::P3 => "permutation invariance",
            Property::P4 => "monotonicity",
            Property::P5 => "continuity from above",
            Property::P6 => "congruence invariance",
            Property::P7 => "joint concavity",
            Property::P8 => "self-duality",
            Property::P9 => "determinant identity",
            Property::P10 => "arithmetic-geometric-harmonic inequality",
        }
    }

    /// Pass threshold on the reported violation.
    pub fn tolerance(self) -> f64 {
        match self {
            Property::P1 | Property::P2 | Property::P2Prime => SCALAR_TOL,
            Property::P1Prime => SCALAR_EXACT_TOL,
            Property::P3 => PERMUTATION_TOL,
            Property::P4 | Property::P7 | Property::P10 => SEMIDEFINITE_TOL,
            Property::P5 => CONTINUITY_TOL,
            Property::P6 | Property::P8 | Property::P9 => RELATIVE_TOL,
        }
    }

    fn salt(self) -> u64 {
        Property::ALL.iter().position(|p| *p == self).unwrap_or(0) as u64 + 1
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key = s.trim().to_ascii_uppercase().replace('’', "'");
        let key = key
            .strip_suffix("PRIME")
            .map(|k| format!("{k}'"))
            .unwrap_or(key);
        Property::ALL
            .iter()
            .copied()
            .find(|p| p.label() == key)
            .ok_or_else(|| format!("unknown property `{s}` (expected P1, P1', P2, P2', P3 … P10)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: Property,
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Where the largest violation occurred (a permutation for P3).
    pub witness: Option<String>,
}

impl PropertyReport {
    fn new(property: Property, samples: usize, worst: Worst) -> Self {
        let tolerance = property.tolerance();
        PropertyReport {
            property,
            samples,
            max_violation: worst.value,
            tolerance,
            pass: worst.value <= tolerance,
            witness: worst.witness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub sampler: SpdSampler,
    pub samples: usize,
    pub iteration: IterationConfig,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            sampler: SpdSampler {
                seed: crate::fixtures::DEFAULT_SEED,
                dim: 3,
                lo: 0.1,
                hi: 10.0,
            },
            samples: 20,
            iteration: IterationConfig::default(),
        }
    }
}

impl LabConfig {
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg = LabConfig::default();
        cfg.sampler.seed = seed;
        cfg
    }
}

#[derive(Default)]
struct Worst {
    value: f64,
    witness: Option<String>,
}

impl Worst {
    fn record(&mut self, value: f64, witness: impl FnOnce() -> String) {
        let value = if value.is_nan() { f64::INFINITY } else { value };
        if value > self.value || (self.witness.is_none() && value == self.value && value > 0.0) {
            self.value = value;
            self.witness = Some(witness());
        }
    }
}

/// Check one property of `expr` on `cfg.samples` seeded tuples of
/// `n` matrices.
pub fn check_property(
    expr: &QuasiMeanExpr,
    n: usize,
    prop: Property,
    cfg: &LabConfig,
) -> Result<PropertyReport> {
    let tuples = cfg.sampler.sample_tuples(n, cfg.samples);
    check_property_on(expr, prop, &tuples, cfg)
}

/// Check one property using `tuples` as base points. Auxiliary randomness
/// (scalings, bumps, congruences) comes from `cfg.sampler.seed`.
pub fn check_property_on(
    expr: &QuasiMeanExpr,
    prop: Property,
    tuples: &[MatrixTuple],
    cfg: &LabConfig,
) -> Result<PropertyReport> {
    let Some(first) = tuples.first() else {
        return Err(Error::TupleTooSmall { min: 1, found: 0 });
    };
    let n = first.len();
    let weights = expr.exponents(n);
    let it = &cfg.iteration;
    let g = |t: &MatrixTuple| expr.eval(t, it);
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.sampler
            .seed
            .wrapping_mul(0x9e37_79b9)
            .wrapping_add(prop.salt()),
    );
    let aux = SpdSampler {
        dim: first.dim(),
        ..cfg.sampler
    };
    let mut worst = Worst::default();
    let mut samples = tuples.len();

    match prop {
        Property::P1 => {
            for (k, t) in tuples.iter().enumerate() {
                let q = random_orthogonal(&mut rng, t.dim());
                let spectra: Vec<_> = (0..n).map(|_| aux.draw_spectrum(&mut rng)).collect();
                let items = spectra
                    .iter()
                    .map(|s| SpdMatrix::from_spectrum(&q, s))
                    .collect();
                let commuting = MatrixTuple::new(items)?;
                let expected = nalgebra::DVector::from_fn(t.dim(), |j, _| {
                    spectra
                        .iter()
                        .zip(&weights)
                        .map(|(s, w)| s[j].powf(*w))
                        .product()
                });
                let expected = SpdMatrix::from_spectrum(&q, &expected);
                let got = g(&commuting)?;
                worst.record(rel_diff(got.as_matrix(), expected.as_matrix()), || {
                    format!("sample {k}")
                });
            }
        }
        Property::P1Prime => {
            for (k, t) in tuples.iter().enumerate() {
                let a = t.get(0);
                let got = g(&MatrixTuple::scalar(a, n)?)?;
                worst.record(rel_diff(got.as_matrix(), a.as_matrix()), || {
                    format!("sample {k}")
                });
            }
        }
        Property::P2 | Property::P2Prime => {
            for (k, t) in tuples.iter().enumerate() {
                let common: f64 = log_uniform(&mut rng, 0.1, 10.0);
                let alphas: Vec<f64> = (0..n)
                    .map(|_| {
                        if prop == Property::P2 {
                            log_uniform(&mut rng, 0.1, 10.0)
                        } else {
                            common
                        }
                    })
                    .collect();
                let scaled = MatrixTuple::new(
                    t.items()
                        .iter()
                        .zip(&alphas)
                        .map(|(a, s)| a.scale(*s))
                        .collect(),
                )?;
                let factor: f64 = alphas
                    .iter()
                    .zip(&weights)
                    .map(|(s, w)| s.powf(*w))
                    .product();
                let lhs = g(&scaled)?;
                let rhs = g(t)?.scale(factor);
                worst.record(rel_diff(lhs.as_matrix(), rhs.as_matrix()), || {
                    format!("sample {k}")
                });
            }
        }
        Property::P3 => {
            let perms = sweep_permutations(n, &mut rng)?;
            samples = tuples.len() * perms.len();
            for t in tuples {
                let base = g(t)?;
                for sigma in &perms {
                    let other = g(&t.permuted(sigma)?)?;
                    worst.record(rel_diff(other.as_matrix(), base.as_matrix()), || {
                        sigma.to_string()
                    });
                }
            }
        }
        Property::P4 => {
            for (k, t) in tuples.iter().enumerate() {
                let bumped = bump(t, &mut rng, 1.0)?;
                let (lo, hi) = (g(t)?, g(&bumped.0)?);
                worst.record(loewner_gap(hi.as_matrix(), lo.as_matrix()), || {
                    format!("sample {k}")
                });
            }
        }
        Property::P5 => {
            for (k, t) in tuples.iter().enumerate() {
                let limit = g(t)?;
                let (_, bumps) = bump(t, &mut rng, 1.0)?;
                let mut previous = f64::INFINITY;
                let mut violation: f64 = 0.0;
                let mut last = 0.0;
                for step in (0..=40).step_by(2) {
                    let eps = 0.5f64.powi(step);
                    let items = t
                        .items()
                        .iter()
                        .zip(&bumps)
                        .map(|(a, p)| SpdMatrix::new(a.as_matrix() + p * eps))
                        .collect::<Result<Vec<_>>>()?;
                    let d = rel_diff(g(&MatrixTuple::new(items)?)?.as_matrix(), limit.as_matrix());
                    violation = violation.max(d - previous);
                    previous = d;
                    last = d;
                }
                worst.record(violation.max(last), || format!("sample {k}"));
            }
        }
        Property::P6 => {
            for (k, t) in tuples.iter().enumerate() {
                let s = random_congruence(&mut rng, t.dim());
                let moved = MatrixTuple::new(
                    t.items()
                        .iter()
                        .map(|a| a.congruence(&s))
                        .collect::<Result<_>>()?,
                )?;
                let lhs = g(&moved)?;
                let rhs = g(t)?.congruence(&s)?;
                worst.record(rel_diff(lhs.as_matrix(), rhs.as_matrix()), || {
                    format!("sample {k}")
                });
            }
        }
        Property::P7 => {
            for (k, t) in tuples.iter().enumerate() {
                let other = MatrixTuple::new((0..n).map(|_| aux.draw(&mut rng)).collect())?;
                let lambda: f64 = rng.random_range(0.05..0.95);
                let mix = MatrixTuple::new(
                    t.items()
                        .iter()
                        .zip(other.items())
                        .map(|(a, b)| a.convex(b, lambda))
                        .collect::<Result<_>>()?,
                )?;
                let lhs = g(&mix)?;
                let rhs = g(t)?.as_matrix() * lambda + g(&other)?.as_matrix() * (1.0 - lambda);
                worst.record(loewner_gap(lhs.as_matrix(), &rhs), || format!("sample {k}"));
            }
        }
        Property::P8 => {
            for (k, t) in tuples.iter().enumerate() {
                let inverted =
                    MatrixTuple::new(t.items().iter().map(SpdMatrix::inverse).collect())?;
                let lhs = g(&inverted)?.inverse();
                let rhs = g(t)?;
                worst.record(rel_diff(lhs.as_matrix(), rhs.as_matrix()), || {
                    format!("sample {k}")
                });
            }
        }
        Property::P9 => {
            for (k, t) in tuples.iter().enumerate() {
                let expected: f64 = t
                    .items()
                    .iter()
                    .zip(&weights)
                    .map(|(a, w)| a.determinant().powf(*w))
                    .product();
                let got = g(t)?.determinant();
                worst.record((got - expected).abs() / expected.abs(), || {
                    format!("sample {k}")
                });
            }
        }
        Property::P10 => {
            let uniform = 1.0 / n as f64;
            if weights.iter().any(|w| (w - uniform).abs() > 1e-12) {
                return Err(Error::UnsupportedProperty("P10"));
            }
            for (k, t) in tuples.iter().enumerate() {
                let mean = g(t)?;
                let arithmetic = t
                    .items()
                    .iter()
                    .fold(DMatrix::zeros(t.dim(), t.dim()), |acc, a| {
                        acc + a.as_matrix()
                    })
                    * uniform;
                let harmonic_inv = t
                    .items()
                    .iter()
                    .fold(DMatrix::zeros(t.dim(), t.dim()), |acc, a| {
                        acc + a.inverse().as_matrix()
                    })
                    * uniform;
                let harmonic = SpdMatrix::new(harmonic_inv)?.inverse();
                let upper = loewner_gap(&arithmetic, mean.as_matrix());
                let lower = loewner_gap(mean.as_matrix(), harmonic.as_matrix());
                worst.record(upper.max(lower), || format!("sample {k}"));
            }
        }
    }
    Ok(PropertyReport::new(prop, samples, worst))
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

/// How far `upper − lower` is from positive semidefinite, relative to
/// `‖upper‖₂`. Zero when the Loewner order holds.
fn loewner_gap(upper: &DMatrix<f64>, lower: &DMatrix<f64>) -> f64 {
    let lambda = min_sym_eigenvalue(&(upper - lower));
    (-lambda).max(0.0) / norm2(upper).max(f64::MIN_POSITIVE)
}

/// `A_i + P_i` with random PSD `P_i` of random rank, scaled to about
/// `size` times the item's magnitude. Returns the bumped tuple and the `P_i`.
fn bump(
    t: &MatrixTuple,
    rng: &mut impl Rng,
    size: f64,
) -> Result<(MatrixTuple, Vec<DMatrix<f64>>)> {
    let m = t.dim();
    let mut bumps = Vec::with_capacity(t.len());
    let mut items = Vec::with_capacity(t.len());
    for a in t.items() {
        let rank = rng.random_range(1..=m);
        let g = gaussian_matrix(rng, m, rank);
        let p = &g * g.transpose();
        let p =
            p * (size * a.max_abs_entry() / max_abs(&(&g * g.transpose())).max(f64::MIN_POSITIVE));
        let p = (&p + p.transpose()) * 0.5;
        items.push(SpdMatrix::new(a.as_matrix() + &p)?);
        bumps.push(p);
    }
    Ok((MatrixTuple::new(items)?, bumps))
}

/// `U Σ Vᵀ` with Haar `U, V`, largest singular value 1 and the others
/// log-uniform in `[1e-3, 1]`: condition number at most 1e3. Overall scale
/// is left to P2; shrinking every entry would only measure the absolute
/// stopping criterion.
fn random_congruence(rng: &mut impl Rng, m: usize) -> DMatrix<f64> {
    let u = random_orthogonal(rng, m);
    let v = random_orthogonal(rng, m);
    let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(m, |i, _| {
        if i == 0 {
            1.0
        } else {
            log_uniform(rng, 1e-3, 1.0)
        }
    }));
    u * sigma * v.transpose()
}

/// Every permutation for small n, otherwise a random sample.
fn sweep_permutations(n: usize, rng: &mut impl Rng) -> Result<Vec<Permutation>> {
    if n <= MAX_SWEEP_DEGREE {
        return all_permutations(n);
    }
    let mut image: Vec<usize> = (0..n).collect();
    (0..RANDOM_SWEEP)
        .map(|_| {
            rand::seq::SliceRandom::shuffle(image.as_mut_slice(), rng);
            Permutation::from_images(image.clone())
        })
        .collect()
}

/// Permutations that left the expression's value unchanged on every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerEstimate {
    pub degree: usize,
    pub survivors: PermGroup,
    pub sample_count: usize,
    pub tol: f64,
}

/// Sweep all of Sym(n): σ survives when `‖Q(σ·A) − Q(A)‖ ≤ tol·scale` on
/// every sample, with `scale` the largest entry of any `Q(A)`.
pub fn estimate_stabilizer(
    expr: &QuasiMeanExpr,
    n: usize,
    sampler: &SpdSampler,
    samples: usize,
    tol: f64,
    cfg: &IterationConfig,
) -> Result<StabilizerEstimate> {
    if n > MAX_STABILIZER_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: n,
            limit: MAX_STABILIZER_DEGREE,
        });
    }
    let tuples = sampler.sample_tuples(n, samples.max(1));
    let values = tuples
        .iter()
        .map(|t| expr.eval(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let scale = values
        .iter()
        .map(SpdMatrix::max_abs_entry)
        .fold(0.0, f64::max);
    let mut survivors = BTreeSet::new();
    'sigma: for sigma in all_permutations(n)? {
        if !sigma.is_identity() {
            for (t, base) in tuples.iter().zip(&values) {
                let moved = expr.eval(&t.permuted(&sigma)?, cfg)?;
                if max_abs(&(moved.as_matrix() - base.as_matrix())) > tol * scale {
                    continue 'sigma;
                }
            }
        }
        survivors.insert(sigma);
    }
    Ok(StabilizerEstimate {
        degree: n,
        survivors: PermGroup::from_elements(n, survivors)?,
        sample_count: tuples.len(),
        tol,
    })
}

/// `Q(R_{τ_1}, …, R_{τ_k})`: an outer node over permuted copies of one inner
/// expression `R`. `outer` reads input `slots[j]` where child j sits in
/// coset `slots[j]` of `stab R`.
#[derive(Debug, Clone)]
pub struct Composition {
    pub inner: QuasiMeanExpr,
    pub transversal: CosetTransversal,
    pub outer: QuasiMeanExpr,
    pub slots: Vec<usize>,
}

impl Composition {
    /// Split `expr` as an outer node over permuted copies of its first child.
    pub fn of(expr: &QuasiMeanExpr, n: usize) -> Result<Self> {
        let classes = classify(expr, n)?;
        let top = classes.top;
        match <[ChildClass; 1]>::try_from(classes.classes) {
            Ok([class]) => {
                let outer = top.over_inputs(
                    class
                        .slots
                        .iter()
                        .map(|&s| QuasiMeanExpr::Input(s))
                        .collect(),
                );
                Ok(Composition {
                    inner: class.inner,
                    transversal: class.transversal,
                    outer,
                    slots: class.slots,
                })
            }
            Err(classes) => Err(Error::MalformedComposition(format!(
                "children fall into {} classes that are not relabelings of one another",
                classes.len()
            ))),
        }
    }

    /// Number of cosets of `stab R`.
    pub fn index(&self) -> usize {
        self.transversal.index()
    }

    /// `stab Q̃` on the r coset slots; symbolic.
    pub fn outer_stabilizer(&self) -> Result<PermGroup> {
        self.outer.structural_stabilizer(self.index())
    }

    /// `ρ_H⁻¹(stab Q̃)`.
    pub fn stabilizer(&self) -> Result<PermGroup> {
        self.transversal.preimage_of(&self.outer_stabilizer()?)
    }
}

struct ChildClass {
    inner: QuasiMeanExpr,
    transversal: CosetTransversal,
    canon_reps: Vec<Canon>,
    slots: Vec<usize>,
}

struct Classified {
    top: crate::expr::TopNode,
    classes: Vec<ChildClass>,
}

fn classify(expr: &QuasiMeanExpr, n: usize) -> Result<Classified> {
    let Some((top, children)) = expr.split_top() else {
        return Err(Error::MalformedComposition(format!(
            "`{expr}` has no outer node"
        )));
    };
    let mut classes: Vec<ChildClass> = Vec::new();
    for child in children {
        let key = child.canonical();
        let found = classes
            .iter_mut()
            .find_map(|c| c.canon_reps.iter().position(|r| *r == key).map(|k| (c, k)));
        match found {
            Some((class, k)) => class.slots.push(k),
            None => {
                let h = reductive_stabilizer(&child, n)?;
                let transversal = CosetTransversal::right(&h)?;
                let canon_reps = transversal
                    .reps()
                    .iter()
                    .map(|t| child.permute(t).canonical())
                    .collect();
                classes.push(ChildClass {
                    inner: child,
                    transversal,
                    canon_reps,
                    slots: vec![0],
                });
            }
        }
    }
    Ok(Classified { top, classes })
}

/// Symmetries of `expr` provable from the symmetries of its parts.
///
/// The children of the outer node are grouped into classes of relabeled
/// copies `R_c τ`. Each class contributes the coset action `ρ_{H_c}` with
/// `H_c` computed recursively, and σ is kept when the combined action on all
/// coset slots fixes the outer node. With one class this is
/// [`Composition::stabilizer`]; inputs are fixed only by the stabilizer of
/// their index.
pub fn reductive_stabilizer(expr: &QuasiMeanExpr, n: usize) -> Result<PermGroup> {
    if n > crate::perm::MAX_ENUM_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: n,
            limit: crate::perm::MAX_ENUM_DEGREE,
        });
    }
    let arity = expr.min_arity();
    if arity > n {
        return Err(Error::ArityMismatch {
            index: arity,
            arity: n,
        });
    }
    let expr = expr.expand();
    if let QuasiMeanExpr::Input(i) = expr {
        let fixing = all_permutations(n)?
            .into_iter()
            .filter(|s| s.apply(i) == i)
            .collect();
        return PermGroup::from_elements(n, fixing);
    }
    let classes = classify(&expr, n)?.classes;
    let mut offsets = Vec::with_capacity(classes.len());
    let mut total = 0;
    for c in &classes {
        offsets.push(total);
        total += c.transversal.index();
    }
    let outer = outer_over_slots(&expr, &classes, &offsets);
    let base = outer.canonical();
    let mut kept = BTreeSet::new();
    for sigma in all_permutations(n)? {
        let mut image = Vec::with_capacity(total);
        for (c, off) in classes.iter().zip(&offsets) {
            let rho = c.transversal.induced_action(&sigma)?;
            image.extend(rho.images().iter().map(|k| k + off));
        }
        let pi = Permutation::from_images(image)?;
        if outer.permute(&pi).canonical() == base {
            kept.insert(sigma);
        }
    }
    PermGroup::from_elements(n, kept)
}

/// The outer node over slot inputs, with children in their original order.
fn outer_over_slots(
    expr: &QuasiMeanExpr,
    classes: &[ChildClass],
    offsets: &[usize],
) -> QuasiMeanExpr {
    let (top, children) = expr
        .split_top()
        .expect("classified expressions have an outer node");
    let mut inputs = Vec::with_capacity(children.len());
    for child in &children {
        let key = child.canonical();
        let slot = classes
            .iter()
            .zip(offsets)
            .find_map(|(c, off)| c.canon_reps.iter().position(|r| *r == key).map(|k| off + k))
            .expect("every child was classified");
        inputs.push(QuasiMeanExpr::Input(slot));
    }
    top.over_inputs(inputs)
}

/// For each `h` in `moves`, the first `τ` in `candidates` with
/// `S(h·A) = τ·S(A)` on every tuple, entrywise within `tol` relative to the
/// largest entry of `S(A)`.
pub fn map_equivariance<F>(
    step: F,
    moves: &PermGroup,
    candidates: &PermGroup,
    tuples: &[MatrixTuple],
    tol: f64,
) -> Result<Vec<(Permutation, Option<Permutation>)>>
where
    F: Fn(&MatrixTuple) -> Result<MatrixTuple>,
{
    let images = tuples.iter().map(&step).collect::<Result<Vec<_>>>()?;
    let scale = images
        .iter()
        .flat_map(|t| t.items().iter().map(SpdMatrix::max_abs_entry))
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut out = Vec::with_capacity(moves.order());
    for h in moves.elements() {
        let moved = tuples
            .iter()
            .map(|t| step(&t.permuted(h)?))
            .collect::<Result<Vec<_>>>()?;
        let mut found = None;
        'tau: for tau in candidates.elements() {
            for (lhs, base) in moved.iter().zip(&images) {
                if lhs.max_entry_diff(&base.permuted(tau)?) > tol * scale {
                    continue 'tau;
                }
            }
            found = Some(tau.clone());
            break;
        }
        out.push((h.clone(), found));
    }
    Ok(out)
}

/// `M⁻², M, M², M³` style checks: `‖G − M‖₂` for a tuple whose mean is known.
pub fn spectral_error(got: &SpdMatrix, expected: &SpdMatrix) -> f64 {
    norm2(&(got.as_matrix() - expected.as_matrix()))
}

/// `|det G − Π det(A_i)^{1/n}|`.
pub fn determinant_error(got: &SpdMatrix, tuple: &MatrixTuple) -> f64 {
    let n = tuple.len() as f64;
    let expected: f64 = tuple
        .items()
        .iter()
        .map(|a| a.determinant().powf(1.0 / n))
        .product();
    (got.determinant() - expected).abs()
}
