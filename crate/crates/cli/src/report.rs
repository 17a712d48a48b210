//! JSON documents printed by `--json`. Field order is the declaration order
//! and matches `schema/run_report.schema.json`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use spdmeans::lab::PropertyReport;
use spdmeans::means::BmpAnchor;
use spdmeans::{IterationConfig, MeanKind, MeanOutput, SpdMatrix};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputInfo {
    pub source: String,
    pub n: usize,
    pub m: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub tol: f64,
    pub max_iter: usize,
    pub inner: Option<String>,
    pub bmp_anchor: BmpAnchor,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub mean: String,
    pub input: InputInfo,
    pub result: Vec<Vec<f64>>,
    pub outer_iters: usize,
    pub inner_iters: Vec<usize>,
    pub average_inner_iters: Option<f64>,
    pub sqrt_count: u64,
    pub proot_count: u64,
    /// Last successive-iterate difference; null for closed-form means.
    pub residual: Option<f64>,
    pub converged: bool,
    pub wall_time_ms: f64,
    pub config: ConfigEcho,
}

impl RunReport {
    pub fn new(
        kind: MeanKind,
        input: InputInfo,
        out: &MeanOutput,
        wall_ms: f64,
        cfg: &IterationConfig,
        seed: Option<u64>,
    ) -> Self {
        let r = &out.report;
        RunReport {
            schema_version: SCHEMA_VERSION,
            mean: kind.name().to_string(),
            input,
            result: rows(&out.mean),
            outer_iters: r.outer_iters,
            inner_iters: r.inner_iter_log.clone(),
            average_inner_iters: r.average_inner_iters(),
            sqrt_count: r.counters.sqrt_count,
            proot_count: r.counters.proot_count,
            residual: r.final_residual.is_finite().then_some(r.final_residual),
            converged: r.converged,
            wall_time_ms: wall_ms,
            config: ConfigEcho {
                tol: cfg.tol,
                max_iter: cfg.max_iter,
                inner: match kind {
                    MeanKind::New(inner) => Some(format!("{inner:?}").to_lowercase()),
                    _ => None,
                },
                bmp_anchor: cfg.bmp_anchor,
                seed,
            },
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mean          {}", self.mean);
        let _ = writeln!(
            s,
            "input         {} (n={}, m={}, sha256 {})",
            self.input.source,
            self.input.n,
            self.input.m,
            &self.input.sha256[..16]
        );
        let _ = writeln!(s, "outer iters   {}", self.outer_iters);
        if !self.inner_iters.is_empty() {
            let _ = writeln!(
                s,
                "inner iters   {:?} (avg {:.2})",
                self.inner_iters,
                self.average_inner_iters.unwrap_or(0.0)
            );
        }
        let _ = writeln!(s, "sqrt count    {}", self.sqrt_count);
        let _ = writeln!(s, "proot count   {}", self.proot_count);
        match self.residual {
            Some(r) => {
                let _ = writeln!(s, "residual      {r:.3e}");
            }
            None => {
                let _ = writeln!(s, "residual      -");
            }
        }
        let _ = writeln!(s, "converged     {}", self.converged);
        let _ = writeln!(s, "wall time     {:.3} ms", self.wall_time_ms);
        let _ = writeln!(s, "result");
        for row in &self.result {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:>24.16e}")).collect();
            let _ = writeln!(s, "  {}", cells.join(" "));
        }
        s
    }
}

pub fn rows(a: &SpdMatrix) -> Vec<Vec<f64>> {
    (0..a.dim())
        .map(|i| (0..a.dim()).map(|j| a.get(i, j)).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyTable {
    pub mean: String,
    pub source: String,
    pub reports: Vec<PropertyReport>,
    pub failed: Vec<String>,
}

impl PropertyTable {
    pub fn to_text(&self) -> String {
        let mut s = format!("{} on {}\n", self.mean, self.source);
        let _ = writeln!(
            s,
            "{:<9}{:>8}  {:>13}  {:>9}  {:<7}witness",
            "property", "samples", "max violation", "tolerance", "result"
        );
        for r in &self.reports {
            let _ = writeln!(
                s,
                "{:<9}{:>8}  {:>13.3e}  {:>9.0e}  {:<7}{}",
                r.property.label(),
                r.samples,
                r.max_violation,
                r.tolerance,
                if r.pass { "pass" } else { "FAIL" },
                r.witness.as_deref().filter(|_| !r.pass).unwrap_or("")
            );
        }
        if !self.failed.is_empty() {
            let _ = writeln!(s, "failed: {}", self.failed.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub mean: String,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub sqrt_count: u64,
    pub proot_count: u64,
    pub converged: bool,
    pub min_ms: f64,
    pub median_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ratio {
    pub sqrt: f64,
    pub proot: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub source: String,
    pub repeat: usize,
    pub rows: Vec<BenchRow>,
    /// new over bmp, when both ran.
    pub new_over_bmp: Option<Ratio>,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("{} ({} runs each)\n", self.source, self.repeat);
        let _ = writeln!(
            s,
            "{:<8}{:>6}{:>7}{:>7}{:>7}{:>11}{:>11}",
            "mean", "outer", "inner", "sqrt", "proot", "min ms", "median ms"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<8}{:>6}{:>7}{:>7}{:>7}{:>11.3}{:>11.3}{}",
                r.mean,
                r.outer_iters,
                r.inner_iters_total,
                r.sqrt_count,
                r.proot_count,
                r.min_ms,
                r.median_ms,
                if r.converged {
                    ""
                } else {
                    "  (did not converge)"
                }
            );
        }
        if let Some(q) = &self.new_over_bmp {
            let _ = writeln!(
                s,
                "new/bmp: sqrt {:.3}, proot {:.3}, time {:.3}",
                q.sqrt, q.proot, q.time
            );
        }
        s
    }
}
