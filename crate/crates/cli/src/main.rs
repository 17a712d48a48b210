use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use spdmeans::lab::{
    self, check_property, check_property_on, estimate_stabilizer, reductive_stabilizer, LabConfig,
    Property,
};
use spdmeans::means::BmpAnchor;
use spdmeans::perm::MAX_ENUM_DEGREE;
use spdmeans::tuple_file::write_matrices;
use spdmeans::{
    compute_mean, CosetTransversal, Error, Inner3, IterationConfig, MeanKind, MeanOutput,
    PermGroup, Permutation, QuasiMeanExpr, SpdSampler,
};

/// `writeln!` into a String, which cannot fail.
macro_rules! wl {
    ($dst:expr, $($arg:tt)*) => {{
        let _ = writeln!($dst, $($arg)*);
    }};
}

mod input;
mod report;

use input::{digest, resolve_seed, TupleSource};
use report::{BenchReport, BenchRow, InputInfo, PropertyTable, Ratio, RunReport};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable input, bad flags, invalid matrices.
    Input(String),
    NoConvergence(String),
    PropertyFailed(Vec<String>),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::NoConvergence(_) => 2,
            CliError::PropertyFailed(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. } => CliError::NoConvergence(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "spdmeans",
    version,
    about = "Matrix geometric means and their permutation symmetries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeanArg {
    Alm,
    Bmp,
    Palfia,
    New,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InnerArg {
    Alm,
    Bmp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnchorArg {
    Current,
    Original,
}

fn mean_kind(mean: MeanArg, inner: InnerArg) -> MeanKind {
    match mean {
        MeanArg::Alm => MeanKind::Alm,
        MeanArg::Bmp => MeanKind::Bmp,
        MeanArg::Palfia => MeanKind::Palfia,
        MeanArg::New => MeanKind::New(match inner {
            InnerArg::Alm => Inner3::Alm,
            InnerArg::Bmp => Inner3::Bmp,
        }),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute one mean of a tuple
    Compute {
        #[command(flatten)]
        source: TupleSource,
        #[arg(long, value_enum, default_value = "new")]
        mean: MeanArg,
        /// Stop when successive iterates differ by less than this, entrywise
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Three-matrix mean inside `new`
        #[arg(long, value_enum, default_value = "bmp")]
        inner: InnerArg,
        /// Target of the #_{1/n} step in bmp
        #[arg(long, value_enum, default_value = "current")]
        anchor: AnchorArg,
        #[arg(long, conflicts_with = "text")]
        json: bool,
        #[arg(long)]
        text: bool,
        /// Also write the result as a one-matrix tuple file
        #[arg(long, value_name = "PATH")]
        write_result: Option<PathBuf>,
    },
    /// Check mean axioms on a tuple or on seeded random tuples
    Properties {
        #[command(flatten)]
        source: TupleSource,
        /// Seeded random tuples instead of a file or fixture
        #[arg(long, value_name = "SEED", conflicts_with_all = ["file", "fixture"])]
        random: Option<u64>,
        #[arg(long, value_enum, default_value = "new", conflicts_with = "expr")]
        mean: MeanArg,
        #[arg(long, value_enum, default_value = "bmp")]
        inner: InnerArg,
        /// Composition expression instead of a named mean, e.g. "(A1#A2)#A3"
        #[arg(long)]
        expr: Option<String>,
        /// Number of matrices for random tuples
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Matrix size for random tuples
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Comma-separated list, e.g. P1,P3,P9
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "P1,P2,P3,P4,P5,P6,P7,P8,P9,P10"
        )]
        props: Vec<Property>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long)]
        json: bool,
    },
    /// Estimate the permutations of the inputs that leave an expression unchanged
    Stabilizer {
        /// e.g. "(A1#A3)#(A2#A4)" or "new(A1,A2,A3,A4)"
        #[arg(long)]
        expr: String,
        /// Number of inputs (default: largest index used)
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = lab::STABILIZER_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = lab::STABILIZER_TOL)]
        tol: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// List every surviving permutation
        #[arg(long)]
        elements: bool,
    },
    /// Time several means on one tuple
    Bench {
        #[command(flatten)]
        source: TupleSource,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "bmp,new")]
        means: Vec<MeanArg>,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
        #[arg(long)]
        json: bool,
    },
    /// Cosets of a subgroup of Sym(n) and the induced action on them
    Group {
        /// sym:n, alt:n or dihedral:n
        #[arg(long)]
        subgroup: String,
        /// List coset representatives
        #[arg(long)]
        transversal: bool,
        /// Explicit representative, repeat once per coset, e.g. --rep "()" --rep "(1 2)"
        #[arg(long = "rep", value_name = "PERM")]
        reps: Vec<String>,
        /// Print the induced permutation of the cosets
        #[arg(long, value_name = "PERM")]
        action: Vec<String>,
    },
}

fn main() -> ExitCode {
    // usage errors are input errors; 2 is reserved for non-convergence
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Compute {
            source,
            mean,
            tol,
            max_iter,
            inner,
            anchor,
            json,
            text: _,
            write_result,
        } => {
            let cfg = IterationConfig {
                tol,
                max_iter,
                bmp_anchor: match anchor {
                    AnchorArg::Current => BmpAnchor::Current,
                    AnchorArg::Original => BmpAnchor::Original,
                },
            };
            cmd_compute(&source, mean_kind(mean, inner), &cfg, json, write_result)
        }
        Command::Properties {
            source,
            random,
            mean,
            inner,
            expr,
            n,
            dim,
            props,
            samples,
            json,
        } => cmd_properties(
            &source,
            random,
            mean_kind(mean, inner),
            expr,
            n,
            dim,
            &props,
            samples,
            json,
        ),
        Command::Stabilizer {
            expr,
            n,
            samples,
            tol,
            seed,
            dim,
            elements,
        } => cmd_stabilizer(&expr, n, samples, tol, seed, dim, elements),
        Command::Bench {
            source,
            means,
            repeat,
            json,
        } => cmd_bench(&source, &means, repeat, json),
        Command::Group {
            subgroup,
            transversal,
            reps,
            action,
        } => cmd_group(&subgroup, transversal, &reps, &action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Input(msg) | CliError::NoConvergence(msg) => eprintln!("error: {msg}"),
                CliError::PropertyFailed(which) => {
                    eprintln!("failed properties: {}", which.join(","))
                }
            }
            ExitCode::from(e.code())
        }
    }
}

/// Write to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    emit(&format!("{text}\n"));
    Ok(())
}

fn cmd_compute(
    source: &TupleSource,
    kind: MeanKind,
    cfg: &IterationConfig,
    json: bool,
    write_result: Option<PathBuf>,
) -> Result<(), CliError> {
    if cfg.tol.is_nan() || cfg.tol <= 0.0 || cfg.max_iter == 0 {
        return Err(CliError::Input(
            "--tol must be positive and --max-iter at least 1".into(),
        ));
    }
    let loaded = source.load()?;
    let seed = source
        .fixture
        .as_ref()
        .map(|_| resolve_seed(source.seed))
        .transpose()?;
    let info = InputInfo {
        source: loaded.label.clone(),
        n: loaded.tuple.len(),
        m: loaded.tuple.dim(),
        sha256: digest(&loaded.tuple),
    };
    let start = Instant::now();
    let outcome = compute_mean(kind, &loaded.tuple, cfg);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (out, failure): (MeanOutput, Option<CliError>) = match outcome {
        Ok(out) => (out, None),
        Err(Error::NoConvergence {
            mean,
            iterations,
            residual,
            output,
        }) => (
            *output,
            Some(CliError::NoConvergence(format!(
                "{mean} did not converge within {iterations} iterations (residual {residual:e})"
            ))),
        ),
        Err(e) => return Err(e.into()),
    };
    let report = RunReport::new(kind, info, &out, wall_ms, cfg, seed);
    if json {
        print_json(&report)?;
    } else {
        emit(&report.to_text());
    }
    if let Some(path) = write_result {
        write_matrices(&path, std::slice::from_ref(&out.mean))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    failure.map_or(Ok(()), Err)
}

#[allow(clippy::too_many_arguments)]
fn cmd_properties(
    source: &TupleSource,
    random: Option<u64>,
    kind: MeanKind,
    expr: Option<String>,
    n: usize,
    dim: usize,
    props: &[Property],
    samples: usize,
    json: bool,
) -> Result<(), CliError> {
    let parsed = expr.as_deref().map(parse_expr).transpose()?;
    let mean_label = expr.unwrap_or_else(|| kind.name().to_string());
    let seed = match random {
        Some(s) => s,
        None => resolve_seed(source.seed)?,
    };
    let mut lab_cfg = LabConfig::with_seed(seed);
    lab_cfg.samples = samples.max(1);
    lab_cfg.sampler.dim = dim.max(1);

    let (source_label, base) = if source.is_given() {
        let loaded = source.load()?;
        (loaded.label, Some(vec![loaded.tuple]))
    } else {
        (
            format!(
                "{} random tuples (seed {seed}, n={n}, m={dim})",
                lab_cfg.samples
            ),
            None,
        )
    };
    let arity = base.as_ref().map_or(n, |b| b[0].len());
    let e = parsed.unwrap_or_else(|| QuasiMeanExpr::named(kind, arity));
    if e.min_arity() > arity {
        return Err(CliError::Input(format!(
            "expression reads A{} but the tuples have {arity} matrices",
            e.min_arity()
        )));
    }
    if arity < 2 {
        return Err(CliError::Input("tuples need at least 2 matrices".into()));
    }

    let mut reports = Vec::new();
    for &p in props {
        let r = match &base {
            Some(tuples) => check_property_on(&e, p, tuples, &lab_cfg),
            None => check_property(&e, arity, p, &lab_cfg),
        };
        match r {
            Ok(r) => reports.push(r),
            Err(Error::UnsupportedProperty(_)) => {
                eprintln!("skipped {p}: not defined for this mean")
            }
            Err(err) => return Err(err.into()),
        }
    }
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.property.to_string())
        .collect();
    let table = PropertyTable {
        mean: mean_label,
        source: source_label,
        reports,
        failed: failed.clone(),
    };
    if json {
        print_json(&table)?;
    } else {
        emit(&table.to_text());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::PropertyFailed(failed))
    }
}

fn parse_expr(src: &str) -> Result<QuasiMeanExpr, CliError> {
    QuasiMeanExpr::parse(src)
        .map_err(|e| CliError::Input(format!("cannot parse expression\n{}", e.render(src))))
}

fn cmd_stabilizer(
    src: &str,
    n: Option<usize>,
    samples: usize,
    tol: f64,
    seed: Option<u64>,
    dim: usize,
    elements: bool,
) -> Result<(), CliError> {
    let e = parse_expr(src)?;
    let n = n.unwrap_or_else(|| e.min_arity());
    if n < e.min_arity() {
        return Err(CliError::Input(format!(
            "expression reads A{} but --n is {n}",
            e.min_arity()
        )));
    }
    let seed = resolve_seed(seed)?;
    let sampler = SpdSampler::new(seed, dim, 0.1, 10.0)?;
    let est = estimate_stabilizer(&e, n, &sampler, samples, tol, &IterationConfig::default())?;
    let g = &est.survivors;
    let mut out = String::new();
    match g.describe() {
        Some(name) => wl!(out, "order {}, {name}", g.order()),
        None => wl!(out, "order {}", g.order()),
    }
    let gens: Vec<String> = g.generators().iter().map(ToString::to_string).collect();
    wl!(
        out,
        "generators: {}",
        if gens.is_empty() {
            "()".to_string()
        } else {
            gens.join(", ")
        }
    );
    if elements {
        for p in g.elements() {
            wl!(out, "  {p}");
        }
    }
    match reductive_stabilizer(&e, n) {
        Ok(r) if &r == g => wl!(out, "reductive: order {}, equal to the estimate", r.order()),
        Ok(r) => {
            let contained = r.is_subgroup_of(g).unwrap_or(false);
            wl!(
                out,
                "reductive: order {}, {} the estimate",
                r.order(),
                if contained {
                    "strictly inside"
                } else {
                    "NOT contained in"
                }
            );
        }
        Err(err) => wl!(out, "reductive: unavailable ({err})"),
    }
    wl!(
        out,
        "({} samples, m={dim}, seed {seed}, tol {tol:e})",
        est.sample_count
    );
    emit(&out);
    Ok(())
}

fn cmd_bench(
    source: &TupleSource,
    means: &[MeanArg],
    repeat: usize,
    json: bool,
) -> Result<(), CliError> {
    let loaded = source.load()?;
    let repeat = repeat.max(1);
    let cfg = IterationConfig::default();
    let mut rows = Vec::new();
    for &m in means {
        let kind = mean_kind(m, InnerArg::Bmp);
        let mut times = Vec::with_capacity(repeat);
        let mut last = None;
        for _ in 0..repeat {
            let start = Instant::now();
            let out = match compute_mean(kind, &loaded.tuple, &cfg) {
                Ok(out) => out,
                Err(Error::NoConvergence { output, .. }) => *output,
                Err(e) => return Err(e.into()),
            };
            times.push(start.elapsed().as_secs_f64() * 1e3);
            last = Some(out);
        }
        times.sort_by(f64::total_cmp);
        let out = last.expect("repeat is at least 1");
        rows.push(BenchRow {
            mean: kind.name().to_string(),
            outer_iters: out.report.outer_iters,
            inner_iters_total: out.report.total_inner_iters(),
            sqrt_count: out.report.counters.sqrt_count,
            proot_count: out.report.counters.proot_count,
            converged: out.report.converged,
            min_ms: times[0],
            median_ms: times[times.len() / 2],
        });
    }
    let find = |name: &str| rows.iter().find(|r| r.mean == name);
    let new_over_bmp = match (find("new"), find("bmp")) {
        (Some(n), Some(b)) => Some(Ratio {
            sqrt: n.sqrt_count as f64 / b.sqrt_count.max(1) as f64,
            proot: n.proot_count as f64 / b.proot_count.max(1) as f64,
            time: n.min_ms / b.min_ms.max(f64::MIN_POSITIVE),
        }),
        _ => None,
    };
    let report = BenchReport {
        source: loaded.label,
        repeat,
        rows,
        new_over_bmp,
    };
    if json {
        print_json(&report)
    } else {
        emit(&report.to_text());
        Ok(())
    }
}

fn parse_subgroup(spec: &str) -> Result<PermGroup, CliError> {
    let bad = || {
        CliError::Input(format!(
            "expected sym:n, alt:n or dihedral:n, found {spec:?}"
        ))
    };
    let (kind, n) = spec.split_once(':').ok_or_else(bad)?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || n > MAX_ENUM_DEGREE {
        return Err(CliError::Input(format!(
            "degree must be between 1 and {MAX_ENUM_DEGREE}"
        )));
    }
    let group = match kind.trim().to_ascii_lowercase().as_str() {
        "sym" | "s" => PermGroup::symmetric(n),
        "alt" | "a" => PermGroup::alternating(n),
        "dihedral" | "di" | "d" => PermGroup::dihedral(n),
        _ => return Err(bad()),
    };
    Ok(group?)
}

fn cmd_group(spec: &str, list: bool, reps: &[String], actions: &[String]) -> Result<(), CliError> {
    let h = parse_subgroup(spec)?;
    let n = h.degree();
    let transversal = if reps.is_empty() {
        CosetTransversal::right(&h)?
    } else {
        let reps = reps
            .iter()
            .map(|r| Permutation::parse(r, n))
            .collect::<Result<Vec<_>, _>>()?;
        CosetTransversal::with_reps(&h, reps)?
    };
    let mut out = String::new();
    let name = h.describe().unwrap_or_else(|| "subgroup".to_string());
    wl!(
        out,
        "{name}: order {}, index {} in Sym({n})",
        h.order(),
        transversal.index()
    );
    if list || !reps.is_empty() {
        wl!(
            out,
            "transversal ({} representatives):",
            transversal.index()
        );
        for (i, r) in transversal.reps().iter().enumerate() {
            wl!(out, "  {} {r}", i + 1);
        }
    }
    for a in actions {
        let sigma = Permutation::parse(a, n)?;
        wl!(
            out,
            "rho({sigma}) = {}",
            transversal.induced_action(&sigma)?
        );
    }
    emit(&out);
    Ok(())
}
