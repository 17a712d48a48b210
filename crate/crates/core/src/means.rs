//! Matrix means built from limit processes.
//!
//! All iterative means share [`limit_iterate`]: a tuple map `S` is applied
//! until two successive tuples agree entrywise to within `tol`, and the
//! first item of the final tuple is returned. Recursive means call
//! themselves on `n − 1` matrices inside the map, so the report records the
//! iteration count of every inner limit process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sharp, sharp_t, MatrixTuple, OpCounters, SpdMatrix};

/// Which point the `#_{1/n}` step of the BMP recursion moves towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BmpAnchor {
    /// The current iterate `A_i^{(j)}`.
    #[default]
    Current,
    /// The input matrix `A_i`, held fixed across iterations. The iteration
    /// then settles on a non-scalar tuple and the result is not a mean; kept
    /// for experiments only.
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub bmp_anchor: BmpAnchor,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            tol: 1e-13,
            max_iter: 200,
            bmp_anchor: BmpAnchor::Current,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// Applications of the top-level tuple map (0 for closed-form means).
    pub outer_iters: usize,
    /// Iteration counts of the limit processes run one level down, in call
    /// order.
    pub inner_iter_log: Vec<usize>,
    pub counters: OpCounters,
    pub final_residual: f64,
    pub converged: bool,
}

impl IterationReport {
    fn closed_form(counters: OpCounters) -> Self {
        IterationReport {
            outer_iters: 0,
            inner_iter_log: Vec::new(),
            counters,
            final_residual: 0.0,
            converged: true,
        }
    }

    pub fn total_inner_iters(&self) -> usize {
        self.inner_iter_log.iter().sum()
    }

    /// Arithmetic mean over all logged inner calls.
    pub fn average_inner_iters(&self) -> Option<f64> {
        if self.inner_iter_log.is_empty() {
            None
        } else {
            Some(self.total_inner_iters() as f64 / self.inner_iter_log.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanOutput {
    pub mean: SpdMatrix,
    pub report: IterationReport,
}

/// Inner three-matrix mean used by [`new_mean4`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum Inner3 {
    Alm,
    #[default]
    Bmp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanKind {
    Alm,
    Bmp,
    Palfia,
    New(Inner3),
}

impl MeanKind {
    /// Whether the mean is invariant under every permutation of its inputs.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, MeanKind::Palfia)
    }

    pub fn name(self) -> &'static str {
        match self {
            MeanKind::Alm => "alm",
            MeanKind::Bmp => "bmp",
            MeanKind::Palfia => "palfia",
            MeanKind::New(Inner3::Bmp) => "new",
            MeanKind::New(Inner3::Alm) => "new-alm",
        }
    }
}

impl std::fmt::Display for MeanKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MeanKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "alm" => Ok(MeanKind::Alm),
            "bmp" => Ok(MeanKind::Bmp),
            "palfia" | "p" => Ok(MeanKind::Palfia),
            "new" => Ok(MeanKind::New(Inner3::Bmp)),
            "new-alm" => Ok(MeanKind::New(Inner3::Alm)),
            other => Err(format!("unknown mean {other:?}")),
        }
    }
}

/// Bookkeeping available to a tuple map while it runs.
#[derive(Debug, Default)]
pub struct StepLog {
    pub counters: OpCounters,
    pub inner_iters: Vec<usize>,
}

impl StepLog {
    /// Fold a sub-computation's report into this step.
    pub fn absorb(&mut self, report: &IterationReport) {
        self.counters.merge(report.counters);
        if report.outer_iters > 0 {
            self.inner_iters.push(report.outer_iters);
        }
    }
}

/// Iterate `step` from `start` until successive tuples differ entrywise by
/// less than `cfg.tol`. Returns the first item of the final tuple.
pub fn limit_iterate<F>(
    label: &str,
    start: &MatrixTuple,
    cfg: &IterationConfig,
    mut step: F,
) -> Result<MeanOutput>
where
    F: FnMut(&MatrixTuple, &mut StepLog) -> Result<MatrixTuple>,
{
    let mut log = StepLog::default();
    let mut current = start.clone();
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    while iters < cfg.max_iter {
        let next = step(&current, &mut log)?;
        if next.len() != current.len() || next.dim() != current.dim() {
            return Err(Error::DimensionMismatch {
                expected: current.len(),
                found: next.len(),
            });
        }
        residual = next.max_entry_diff(&current);
        current = next;
        iters += 1;
        if residual < cfg.tol {
            break;
        }
    }
    let converged = residual < cfg.tol;
    let output = MeanOutput {
        mean: current.get(0).clone(),
        report: IterationReport {
            outer_iters: iters,
            inner_iter_log: log.inner_iters,
            counters: log.counters,
            final_residual: residual,
            converged,
        },
    };
    if converged {
        Ok(output)
    } else {
        Err(Error::NoConvergence {
            mean: label.to_string(),
            iterations: iters,
            residual,
            output: Box::new(output),
        })
    }
}

fn pair_mean(tuple: &MatrixTuple) -> Result<MeanOutput> {
    let mut counters = OpCounters::default();
    let mean = sharp(tuple.get(0), tuple.get(1), &mut counters)?;
    Ok(MeanOutput {
        mean,
        report: IterationReport::closed_form(counters),
    })
}

/// One application of the ALM map: `S_i = G_{n−1}(all but i)`.
pub fn alm_step(
    tuple: &MatrixTuple,
    cfg: &IterationConfig,
    log: &mut StepLog,
) -> Result<MatrixTuple> {
    let items = (0..tuple.len())
        .map(|i| {
            let out = alm_mean(&tuple.without(i), cfg)?;
            log.absorb(&out.report);
            Ok(out.mean)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixTuple::new(items)
}

/// One application of the BMP map: `S_i = G_{n−1}(all but i) #_{1/n} anchor_i`.
pub fn bmp_step(
    tuple: &MatrixTuple,
    original: &MatrixTuple,
    cfg: &IterationConfig,
    log: &mut StepLog,
) -> Result<MatrixTuple> {
    recursive_sharp_step(tuple, original, cfg, log, bmp_mean)
}

fn recursive_sharp_step(
    tuple: &MatrixTuple,
    original: &MatrixTuple,
    cfg: &IterationConfig,
    log: &mut StepLog,
    sub_mean: fn(&MatrixTuple, &IterationConfig) -> Result<MeanOutput>,
) -> Result<MatrixTuple> {
    let n = tuple.len();
    let t = 1.0 / n as f64;
    let items = (0..n)
        .map(|i| {
            let out = sub_mean(&tuple.without(i), cfg)?;
            log.absorb(&out.report);
            let anchor = match cfg.bmp_anchor {
                BmpAnchor::Current => tuple.get(i),
                BmpAnchor::Original => original.get(i),
            };
            sharp_t(&out.mean, anchor, t, &mut log.counters)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixTuple::new(items)
}

/// One application of the circular map `S_i = A_i # A_{i+1 mod n}`.
pub fn palfia_step(tuple: &MatrixTuple, log: &mut StepLog) -> Result<MatrixTuple> {
    let n = tuple.len();
    let items = (0..n)
        .map(|i| sharp(tuple.get(i), tuple.get((i + 1) % n), &mut log.counters))
        .collect::<Result<Vec<_>>>()?;
    MatrixTuple::new(items)
}

pub fn alm_mean(tuple: &MatrixTuple, cfg: &IterationConfig) -> Result<MeanOutput> {
    check_arity(tuple, 2)?;
    if tuple.len() == 2 {
        return pair_mean(tuple);
    }
    limit_iterate("alm", tuple, cfg, |t, log| alm_step(t, cfg, log))
}

pub fn bmp_mean(tuple: &MatrixTuple, cfg: &IterationConfig) -> Result<MeanOutput> {
    check_arity(tuple, 2)?;
    if tuple.len() == 2 {
        return pair_mean(tuple);
    }
    limit_iterate("bmp", tuple, cfg, |t, log| bmp_step(t, tuple, cfg, log))
}

/// Common limit of the circular pairwise-mean iteration. Not invariant under
/// arbitrary permutations of the inputs.
pub fn palfia_mean(tuple: &MatrixTuple, cfg: &IterationConfig) -> Result<MeanOutput> {
    check_arity(tuple, 2)?;
    limit_iterate("palfia", tuple, cfg, palfia_step)
}

fn inner3(inner: Inner3) -> fn(&MatrixTuple, &IterationConfig) -> Result<MeanOutput> {
    match inner {
        Inner3::Alm => alm_mean,
        Inner3::Bmp => bmp_mean,
    }
}

/// The three pairings `(A#B)#(C#D)`, `(A#C)#(B#D)`, `(A#D)#(B#C)`.
pub fn pairings4(
    a: &SpdMatrix,
    b: &SpdMatrix,
    c: &SpdMatrix,
    d: &SpdMatrix,
    counters: &mut OpCounters,
) -> Result<[SpdMatrix; 3]> {
    let mut pair =
        |x: &SpdMatrix, y: &SpdMatrix, z: &SpdMatrix, w: &SpdMatrix| -> Result<SpdMatrix> {
            let left = sharp(x, y, counters)?;
            let right = sharp(z, w, counters)?;
            sharp(&left, &right, counters)
        };
    Ok([pair(a, b, c, d)?, pair(a, c, b, d)?, pair(a, d, b, c)?])
}

/// Four-matrix mean `G₃(P₁, P₂, P₃)` of the three pairings; a single limit
/// process (the inner three-matrix mean) runs.
pub fn new_mean4(
    a: &SpdMatrix,
    b: &SpdMatrix,
    c: &SpdMatrix,
    d: &SpdMatrix,
    inner: Inner3,
    cfg: &IterationConfig,
) -> Result<MeanOutput> {
    MatrixTuple::new(vec![a.clone(), b.clone(), c.clone(), d.clone()])?;
    let mut counters = OpCounters::default();
    let [p1, p2, p3] = pairings4(a, b, c, d, &mut counters)?;
    let triple = MatrixTuple::new(vec![p1, p2, p3])?;
    let wrap = |out: MeanOutput, counters: OpCounters| MeanOutput {
        mean: out.mean,
        report: IterationReport {
            outer_iters: 0,
            inner_iter_log: vec![out.report.outer_iters],
            counters: counters + out.report.counters,
            final_residual: out.report.final_residual,
            converged: out.report.converged,
        },
    };
    match inner3(inner)(&triple, cfg) {
        Ok(out) => Ok(wrap(out, counters)),
        Err(Error::NoConvergence {
            mean,
            iterations,
            residual,
            output,
        }) => Err(Error::NoConvergence {
            mean: format!("new4/{mean}"),
            iterations,
            residual,
            output: Box::new(wrap(*output, counters)),
        }),
        Err(e) => Err(e),
    }
}

/// The new mean for any n: `#` for n = 2, the inner mean for n = 3,
/// [`new_mean4`] for n = 4 and the BMP-style recursion on top of it beyond.
pub fn new_mean_recursive(
    tuple: &MatrixTuple,
    inner: Inner3,
    cfg: &IterationConfig,
) -> Result<MeanOutput> {
    check_arity(tuple, 2)?;
    match tuple.len() {
        2 => pair_mean(tuple),
        3 => inner3(inner)(tuple, cfg),
        4 => new_mean4(
            tuple.get(0),
            tuple.get(1),
            tuple.get(2),
            tuple.get(3),
            inner,
            cfg,
        ),
        _ => {
            let sub: fn(&MatrixTuple, &IterationConfig) -> Result<MeanOutput> = match inner {
                Inner3::Bmp => |t, c| new_mean_recursive(t, Inner3::Bmp, c),
                Inner3::Alm => |t, c| new_mean_recursive(t, Inner3::Alm, c),
            };
            limit_iterate("new", tuple, cfg, |t, log| {
                recursive_sharp_step(t, tuple, cfg, log, sub)
            })
        }
    }
}

/// Dispatch on [`MeanKind`].
pub fn compute_mean(
    kind: MeanKind,
    tuple: &MatrixTuple,
    cfg: &IterationConfig,
) -> Result<MeanOutput> {
    match kind {
        MeanKind::Alm => alm_mean(tuple, cfg),
        MeanKind::Bmp => bmp_mean(tuple, cfg),
        MeanKind::Palfia => palfia_mean(tuple, cfg),
        MeanKind::New(inner) => new_mean_recursive(tuple, inner, cfg),
    }
}

fn check_arity(tuple: &MatrixTuple, min: usize) -> Result<()> {
    if tuple.len() < min {
        return Err(Error::TupleTooSmall {
            min,
            found: tuple.len(),
        });
    }
    Ok(())
}

/// Predicted counters for BMP on n ≥ 3 matrices, from its iteration log.
///
/// Each BMP-k step performs k sub-means and k `#_{1/k}` roots; BMP-2 is one
/// `#`. The log of a BMP-n run lists, in call order, the iteration counts of
/// its BMP-(n−1) sub-calls, but deeper levels are not logged, so the model
/// is exact for n ≤ 4 only.
pub fn bmp_count_model(n: usize, report: &IterationReport) -> Option<OpCounters> {
    match n {
        3 => {
            let k = report.outer_iters as u64;
            Some(OpCounters {
                sqrt_count: 3 * k,
                proot_count: 3 * k,
            })
        }
        4 => {
            let inner: u64 = report.inner_iter_log.iter().map(|&x| x as u64).sum();
            let outer = report.outer_iters as u64;
            Some(OpCounters {
                sqrt_count: 3 * inner,
                proot_count: 3 * inner + 4 * outer,
            })
        }
        _ => None,
    }
}

/// Predicted counters for the four-matrix new mean with a BMP inner mean
/// that ran `inner_iters` iterations: `9 + 3I` square roots, `3I` p-th
/// roots.
pub fn new4_count_model(inner_iters: usize) -> OpCounters {
    let i = inner_iters as u64;
    OpCounters {
        sqrt_count: 9 + 3 * i,
        proot_count: 3 * i,
    }
}
