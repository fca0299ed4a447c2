use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use holoprec::arith::GaussianRational;
use holoprec::bench::{self, BenchMode, BenchOptions, BenchRecord};
use holoprec::catalog;
use holoprec::eval::{self, BoundMode, EvalOptions, EvalRequest, EvalResult, Mode};
use holoprec::ode::Problem;
use holoprec::product_tree::DEFAULT_THRESHOLD;
use holoprec::Error;

#[derive(Parser)]
#[command(name = "holoprec", version, about = "Certified evaluation of D-finite functions by binary splitting")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the solution at a point with a certified error bound.
    Eval(EvalArgs),
    /// Print the recurrence coefficients b_j(n).
    Recurrence(SourceArgs),
    /// Print an ODE file in θ-form.
    Convert(SourceArgs),
    /// List built-in problems, or show one as an ODE file.
    Catalog(CatalogArgs),
    /// Time and memory sweep over precisions.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// ODE JSON file.
    #[arg(long, conflicts_with = "catalog")]
    ode: Option<PathBuf>,
    /// Built-in problem name.
    #[arg(long)]
    catalog: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Decimal)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Decimal,
    Dyadic,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Classic,
    Trunc,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundArg {
    Certified,
    Heuristic,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Evaluation point, e.g. `1/3` or `1/4+1/5*i`; overrides the file's point.
    #[arg(long)]
    point: Option<String>,
    #[arg(long, default_value_t = 64)]
    prec_bits: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Trunc)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = BoundArg::Certified)]
    bound_mode: BoundArg,
    /// Leaf size of the product tree.
    #[arg(long, env = "HOLOPREC_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
    threshold: u64,
    /// Number of chunks for the truncated mode.
    #[arg(long)]
    delta: Option<u64>,
    /// Print N, Δ, M, timing, and the ledger peak.
    #[arg(long)]
    stats: bool,
    /// Print the tail certificate as JSON.
    #[arg(long)]
    emit_certificate: bool,
    /// Trust that the point lies inside the disk of convergence.
    #[arg(long)]
    assume_in_disk: bool,
    /// Exit with status 2 when the result is not certified.
    #[arg(long)]
    strict: bool,
    /// Bound chunk norms in an adapted basis.
    #[arg(long)]
    opt_norm: bool,
}

#[derive(Args)]
struct CatalogArgs {
    name: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    catalog: String,
    /// Comma-separated precisions in bits.
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<u64>,
    #[arg(long, value_delimiter = ',', value_enum, default_values_t = [BenchModeArg::Classic, BenchModeArg::Trunc])]
    modes: Vec<BenchModeArg>,
    #[arg(long, value_enum, default_value_t = BenchFormat::Csv)]
    format: BenchFormat,
    /// Append fitted scaling exponents of the ledger peak.
    #[arg(long)]
    fit: bool,
    #[arg(long, env = "HOLOPREC_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
    threshold: u64,
    #[arg(long, hide = true)]
    inject_mismatch: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchModeArg {
    Classic,
    Trunc,
}

enum Failure {
    Lib(Error),
    Msg(String),
    Uncertified,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Eval(a) => cmd_eval(&a),
        Command::Recurrence(a) => cmd_recurrence(&a),
        Command::Convert(a) => cmd_convert(&a),
        Command::Catalog(a) => cmd_catalog(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Uncertified) => ExitCode::from(2),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Msg(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn load(src: &SourceArgs) -> Result<Problem, Failure> {
    match (&src.ode, &src.catalog) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Msg(format!("cannot read ODE file {}: {e}", path.display())))?;
            Ok(Problem::from_json(&text)?)
        }
        (None, Some(name)) => Ok(catalog::get(name)?.problem()),
        (None, None) => Err(Failure::Msg("one of --ode or --catalog is required".into())),
    }
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    if a.prec_bits == 0 {
        return Err(Failure::Msg("--prec-bits must be at least 1".into()));
    }
    if a.threshold == 0 {
        return Err(Failure::Msg("--threshold must be at least 1".into()));
    }
    if a.delta == Some(0) {
        return Err(Failure::Msg("--delta must be at least 1".into()));
    }
    let mut problem = load(&a.source)?;
    if let Some(pt) = &a.point {
        problem.point = pt
            .parse::<GaussianRational>()
            .map_err(|_| Failure::Msg(format!("--point: cannot parse {pt:?}")))?;
    }
    let options = EvalOptions {
        threshold: a.threshold,
        delta: a.delta,
        bound_mode: match a.bound_mode {
            BoundArg::Certified => BoundMode::Certified,
            BoundArg::Heuristic => BoundMode::Heuristic,
        },
        assume_in_disk: a.assume_in_disk,
        opt_norm: a.opt_norm,
        parallel_depth: 0,
    };
    let req = |mode| EvalRequest::new(&problem, a.prec_bits, mode).with_options(options.clone());
    let results = match a.mode {
        ModeArg::Classic => vec![eval::evaluate(&req(Mode::Classic))?],
        ModeArg::Trunc => vec![eval::evaluate(&req(Mode::Trunc))?],
        ModeArg::Both => {
            let c = eval::evaluate_both_and_compare(&req(Mode::Classic))?;
            vec![c.classic, c.trunc]
        }
    };

    let mut out = std::io::stdout().lock();
    if a.source.format == Format::Json {
        let docs: Vec<Value> = results.iter().map(|r| result_json(r, a)).collect();
        let doc = if docs.len() == 1 { docs.into_iter().next().unwrap() } else { json!({ "results": docs }) };
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    } else {
        for r in &results {
            print_result(&mut out, r, a)?;
        }
    }
    if a.strict && results.iter().any(|r| !r.certified) {
        return Err(Failure::Uncertified);
    }
    Ok(())
}

fn print_result(out: &mut impl Write, r: &EvalResult, a: &EvalArgs) -> std::io::Result<()> {
    let value = match a.source.format {
        Format::Dyadic => r.value.to_string(),
        _ => r.to_decimal(),
    };
    writeln!(out, "mode: {}", r.mode)?;
    writeln!(out, "value: {value}")?;
    writeln!(out, "error_bound: 2^-{}", r.error_exp)?;
    writeln!(out, "certified: {}", r.certified)?;
    if a.stats {
        writeln!(out, "N: {}", r.n)?;
        if let Some(d) = r.delta {
            writeln!(out, "delta: {d}")?;
        }
        if let Some(l) = r.lg_m {
            writeln!(out, "lgM: {l:.6}")?;
        }
        if let (Some(b), Some(c)) = (r.max_entry_bits, r.cap_bits) {
            writeln!(out, "max_entry_bits: {b} (cap {c})")?;
        }
        writeln!(out, "peak_bits: {}", r.ledger_peak)?;
        writeln!(out, "wall_ns: {}", r.wall_ns)?;
        writeln!(out, "disk_check: {}", disk_name(r))?;
        for t in &r.trace {
            writeln!(
                out,
                "trace q={} range=[{}, {}) chunk_bits={} acc_bits={} peak={}",
                t.q, t.a, t.b, t.chunk_bits, t.acc_bits, t.ledger_peak
            )?;
        }
    }
    if a.emit_certificate {
        match &r.certificate {
            Some(c) => writeln!(out, "certificate: {}", c.to_json())?,
            None => writeln!(out, "certificate: none")?,
        }
    }
    Ok(())
}

fn disk_name(r: &EvalResult) -> String {
    serde_json::to_value(r.disk_check).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn result_json(r: &EvalResult, a: &EvalArgs) -> Value {
    let mut doc = json!({
        "mode": r.mode.to_string(),
        "prec_bits": r.prec,
        "value": r.to_decimal(),
        "value_dyadic": r.value.to_string(),
        "error_bound": format!("2^-{}", r.error_exp),
        "certified": r.certified,
        "disk_check": disk_name(r),
        "N": r.n,
    });
    if a.stats {
        let m = doc.as_object_mut().unwrap();
        m.insert("delta".into(), json!(r.delta));
        m.insert("lgM".into(), json!(r.lg_m));
        m.insert("max_entry_bits".into(), json!(r.max_entry_bits));
        m.insert("cap_bits".into(), json!(r.cap_bits));
        m.insert("peak_bits".into(), json!(r.ledger_peak));
        m.insert("wall_ns".into(), json!(r.wall_ns as u64));
        m.insert("trace".into(), serde_json::to_value(&r.trace).unwrap_or(Value::Null));
    }
    if a.emit_certificate {
        let cert = r.certificate.as_ref().and_then(|c| serde_json::to_value(c).ok()).unwrap_or(Value::Null);
        doc.as_object_mut().unwrap().insert("certificate".into(), cert);
    }
    doc
}

fn cmd_recurrence(a: &SourceArgs) -> CmdResult {
    let problem = load(a)?;
    let rec = problem.ode.recurrence();
    let b: Vec<String> = (0..=rec.width()).map(|j| rec.b(j).display_in("n")).collect();
    let mut out = std::io::stdout().lock();
    if a.format == Format::Json {
        let doc = json!({ "order": rec.order(), "width": rec.width(), "b": b });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    } else {
        for (j, p) in b.iter().enumerate() {
            writeln!(out, "b{j} = {p}")?;
        }
    }
    Ok(())
}

fn cmd_convert(a: &SourceArgs) -> CmdResult {
    let problem = load(a)?;
    let text = serde_json::to_string_pretty(&problem.to_file()).map_err(Error::from)?;
    writeln!(std::io::stdout().lock(), "{text}")?;
    Ok(())
}

fn cmd_catalog(a: &CatalogArgs) -> CmdResult {
    let mut out = std::io::stdout().lock();
    match &a.name {
        Some(name) => {
            let text = serde_json::to_string_pretty(&catalog::get(name)?.problem().to_file()).map_err(Error::from)?;
            writeln!(out, "{text}")?;
        }
        None if a.json => {
            let list: Vec<Value> =
                catalog::all().iter().map(|e| json!({ "name": e.name, "description": e.description })).collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&list).map_err(Error::from)?)?;
        }
        None => {
            for e in catalog::all() {
                writeln!(out, "{:<10} {}", e.name, e.description)?;
            }
        }
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> CmdResult {
    if a.p.contains(&0) {
        return Err(Failure::Msg("--p: precisions must be positive".into()));
    }
    if a.threshold == 0 {
        return Err(Failure::Msg("--threshold must be at least 1".into()));
    }
    let modes: Vec<Mode> = a
        .modes
        .iter()
        .map(|m| match m {
            BenchModeArg::Classic => Mode::Classic,
            BenchModeArg::Trunc => Mode::Trunc,
        })
        .collect();
    let opts = BenchOptions {
        eval: EvalOptions { threshold: a.threshold, ..EvalOptions::default() },
        inject_mismatch: a.inject_mismatch,
    };
    let stdout = std::io::stdout();
    let mut records: Vec<BenchRecord> = Vec::new();
    let mut csv_out = (a.format == BenchFormat::Csv).then(|| csv::Writer::from_writer(stdout.lock()));
    bench::run_series_streaming(&a.catalog, &modes, &a.p, &opts, &mut |r| {
        match csv_out.as_mut() {
            Some(w) => {
                w.serialize(r)?;
                w.flush()?;
            }
            None => writeln!(stdout.lock(), "{}", serde_json::to_string(r)?)?,
        }
        records.push(r.clone());
        Ok(())
    })?;
    drop(csv_out);
    if a.fit {
        let fits = bench::fit_scaling(&records)?;
        let mut out = stdout.lock();
        for (mode, f) in fits {
            let name = match mode {
                BenchMode::Classic => "classic",
                BenchMode::Trunc => "trunc",
            };
            match a.format {
                BenchFormat::Csv => {
                    writeln!(out, "# fit {name} exponent={:.4} r2={:.6} points={}", f.exponent, f.r2, f.points)?
                }
                BenchFormat::Json => writeln!(
                    out,
                    "{}",
                    json!({ "fit": name, "exponent": f.exponent, "r2": f.r2, "points": f.points })
                )?,
            }
        }
    }
    Ok(())
}
