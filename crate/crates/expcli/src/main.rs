use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use expcli::experiments::{self as exp, ReferenceParams, TableSpec};
use expcli::output::{DesignRecord, Manifest, OutputDir};
use proxyid::design::{
    default_size_for_degree, generate_design_with, load_design, validate_design, DesignLibrary, GenerateOptions,
    DESIGN_DIR_ENV, FILE_TOLERANCE,
};
use proxyid::matrix::fmt_sci;
use proxyid::proxy::{build_proxy_id, build_proxy_id_with_design};
use proxyid::sampling::SeededRng;
use proxyid::{PointSet, RunConfig, ShellGeometry};

const AFTER_HELP: &str = "\
Default seeds: compress 1, fig-rowbounds 2, fig-sweep 3, fig-y0 4.
Designs are read from the bundled library unless PROXYID_DESIGN_DIR names another directory.
Exit codes: 0 success, 1 validation or bound failure, 2 usage error.";

#[derive(Parser)]
#[command(name = "proxyid", version, about = "Proxy-surface interpolative decomposition experiments", after_help = AFTER_HELP)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed (each experiment has its own default).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress K(X0, ·) for a source file and write the skeleton and U.
    Compress(CompressArgs),
    /// Per-row maximum error on the proxy surface against its bound.
    FigRowbounds(RefArgs),
    /// Maximum error and global bound over a grid of c.
    FigSweep(SweepArgs),
    /// Row errors on random target shells against the rowwise bounds.
    FigY0(Y0Args),
    /// Expansion order and design size for (r1, r2, eps) rows.
    Table(TableArgs),
    /// Validate or generate spherical designs.
    #[command(subcommand)]
    Design(DesignCommand),
}

#[derive(Args)]
struct CompressArgs {
    /// Source points, one "x y z" per line.
    #[arg(long)]
    x0: Option<PathBuf>,
    /// Number of uniform sources to draw when --x0 is absent.
    #[arg(long, default_value_t = 2000)]
    n_x0: usize,
    #[arg(long, default_value_t = 1.0)]
    r1: f64,
    #[arg(long, default_value_t = 2.0)]
    r2: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 2.0)]
    cqr: f64,
    /// Expansion order (default: chosen from r1, r2, eps).
    #[arg(long)]
    c: Option<usize>,
    /// Design file to use instead of the library.
    #[arg(long)]
    design: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RefArgs {
    #[arg(long, default_value_t = 1.0)]
    r1: f64,
    #[arg(long, default_value_t = 2.0)]
    r2: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 2.0)]
    cqr: f64,
    #[arg(long, default_value_t = 2000)]
    n_x0: usize,
    #[arg(long, default_value_t = 30)]
    c: usize,
    /// Samples of the proxy surface for maxima.
    #[arg(long, default_value_t = proxyid::proxy::GAMMA_SAMPLES)]
    gamma_samples: usize,
}

impl RefArgs {
    fn params(&self, seed: u64) -> ReferenceParams {
        ReferenceParams {
            r1: self.r1,
            r2: self.r2,
            eps: self.eps,
            c_qr: self.cqr,
            n_x0: self.n_x0,
            c: Some(self.c),
            seed,
            gamma_samples: self.gamma_samples,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    reference: RefArgs,
    /// Comma-separated c values (default 5..40).
    #[arg(long, value_delimiter = ',')]
    cs: Option<Vec<usize>>,
}

#[derive(Args)]
struct Y0Args {
    #[command(flatten)]
    reference: RefArgs,
    /// Targets per shell.
    #[arg(long, default_value_t = 20_000)]
    n_y0: usize,
    /// Shell as inner,outer; repeatable (default 2,4 and 2,8).
    #[arg(long, value_parser = parse_pair)]
    shell: Vec<(f64, f64)>,
}

#[derive(Args)]
struct TableArgs {
    /// Extra row as r1,r2,eps; repeatable. Replaces the presets when given.
    #[arg(long, value_parser = parse_triple)]
    row: Vec<(f64, f64, f64)>,
    #[arg(long, default_value_t = 2.0)]
    cqr: f64,
    #[arg(long, default_value_t = 2000)]
    n_x0: usize,
}

#[derive(Subcommand)]
enum DesignCommand {
    /// Check a design file; writes l,m,defect rows.
    Validate {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        degree: usize,
        #[arg(long, default_value_t = FILE_TOLERANCE)]
        tol: f64,
    },
    /// Generate a design and write it as a point file.
    Generate {
        #[arg(long)]
        degree: usize,
        /// Point count (default ((t+1)^2+4)/2).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 5000)]
        iters: usize,
        /// Output file (default <out>/design_t<degree>_n<n>.txt).
        #[arg(long = "file")]
        file: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(format!("expected inner,outer, got {s:?}")),
    }
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected r1,r2,eps, got {s:?}")),
    }
}

/// Validation or bound failures, reported with exit code 1.
#[derive(Debug)]
struct Failed(String);

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Failed>() {
                return ExitCode::from(1);
            }
            match e.downcast_ref::<proxyid::Error>() {
                Some(
                    proxyid::Error::InvalidGeometry { .. }
                    | proxyid::Error::InvalidArgument(_)
                    | proxyid::Error::Domain(_),
                ) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let start = Instant::now();
    match cli.command {
        Command::Compress(a) => compress(&cli.out, cli.seed.unwrap_or(exp::SEED_COMPRESS), a, start),
        Command::FigRowbounds(a) => rowbounds(&cli.out, cli.seed.unwrap_or(exp::SEED_ROWBOUNDS), a, start),
        Command::FigSweep(a) => sweep(&cli.out, cli.seed.unwrap_or(exp::SEED_SWEEP), a, start),
        Command::FigY0(a) => fig_y0(&cli.out, cli.seed.unwrap_or(exp::SEED_Y0), a, start),
        Command::Table(a) => table(&cli.out, a, start),
        Command::Design(d) => design(&cli.out, cli.seed.unwrap_or(0), d, start),
    }
}

fn library() -> DesignLibrary {
    DesignLibrary::bundled()
}

fn library_note() -> serde_json::Value {
    json!({ "dir": library().dir().display().to_string(), "env": DESIGN_DIR_ENV })
}

fn compress(out: &PathBuf, seed: u64, a: CompressArgs, start: Instant) -> anyhow::Result<()> {
    let geometry = ShellGeometry::new(a.r1, a.r2)?;
    let mut cfg = RunConfig::new(geometry, a.eps, a.cqr, seed)?;
    cfg.c_override = a.c;
    let x0 = match &a.x0 {
        Some(p) => PointSet::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => ReferenceParams { r1: a.r1, n_x0: a.n_x0, seed, ..ReferenceParams::reference(seed) }.sources(),
    };
    let dir = OutputDir::acquire(out)?;
    let pid = match &a.design {
        Some(p) => {
            let c = a.c.unwrap_or_else(|| proxyid::proxy::decide_c(&geometry, a.eps, a.cqr, x0.len()));
            build_proxy_id_with_design(&x0, &cfg, load_design(p, 2 * c)?)?
        }
        None => build_proxy_id(&x0, &cfg, &library())?,
    };

    let skeleton: String = pid.skeleton().iter().map(|i| format!("{i}\n")).collect();
    dir.write("skeleton.txt", &skeleton)?;
    dir.write("projection.csv", &pid.projection().to_csv())?;
    let mut res = expcli::output::Csv::new(&["row_index", "yp_residual"]);
    for (i, r) in pid.yp_row_residuals().iter().enumerate() {
        res.row([i.to_string(), fmt_sci(*r)]);
    }
    dir.write("yp_residuals.csv", &res.finish())?;

    let max_res = pid.yp_row_residuals().iter().copied().fold(0.0, f64::max);
    let mut m = Manifest::new(
        "compress",
        seed,
        json!({
            "x0": a.x0.as_ref().map(|p| p.display().to_string()),
            "n_x0": x0.len(), "r1": a.r1, "r2": a.r2, "eps": a.eps, "cqr": a.cqr,
            "c": pid.c(), "c_requested": a.c, "design_library": library_note(),
        }),
    )
    .sample("x0", x0.len())
    .sample("yp", pid.yp().len());
    m.designs.push(DesignRecord::from_design(pid.design()));
    m.outputs = vec!["skeleton.txt".into(), "projection.csv".into(), "yp_residuals.csv".into()];
    dir.write_manifest(&m.elapsed(start.elapsed()))?;
    println!(
        "c={} n_yp={} n_rep={} max_yp_residual={} threshold={}",
        pid.c(),
        pid.yp().len(),
        pid.rank(),
        fmt_sci(max_res),
        fmt_sci(pid.threshold())
    );
    Ok(())
}

fn rowbounds(out: &PathBuf, seed: u64, a: RefArgs, start: Instant) -> anyhow::Result<()> {
    let p = a.params(seed);
    p.geometry()?;
    let dir = OutputDir::acquire(out)?;
    let (pid, res) = exp::run_rowbounds(&p, &library())?;
    dir.write("fig_rowbounds.csv", &exp::rowbounds_csv(&res))?;
    let mut m = Manifest::new("fig-rowbounds", seed, json!({ "params": p, "design_library": library_note() }))
        .sample("x0", p.n_x0)
        .sample("gamma", p.gamma_samples);
    m.designs.push(DesignRecord::from_design(pid.design()));
    m.outputs = vec!["fig_rowbounds.csv".into()];
    dir.write_manifest(&m.elapsed(start.elapsed()))?;
    let s = &res.summary;
    println!(
        "c={} n_yp={} n_rep={} min_ratio={:.3} median_ratio={:.3} max_ratio={:.3} violations={}",
        res.c, res.n_yp, res.rank, s.min_ratio, s.median_ratio, s.max_ratio, s.violations
    );
    if s.violations > 0 {
        bail!(Failed(format!("{} rows exceed their bound", s.violations)));
    }
    Ok(())
}

fn sweep(out: &PathBuf, seed: u64, a: SweepArgs, start: Instant) -> anyhow::Result<()> {
    let p = a.reference.params(seed);
    p.geometry()?;
    let cs = a.cs.unwrap_or_else(exp::default_sweep_grid);
    let dir = OutputDir::acquire(out)?;
    let rows = exp::run_sweep(&p, &cs, &library(), |r| match &r.status {
        exp::SweepStatus::Ok => eprintln!(
            "c={} n_yp={} n_rep={} max_err={:.3e} bound_global={:.3e}",
            r.c, r.n_yp, r.rank, r.max_err, r.bound_global
        ),
        exp::SweepStatus::Skipped(why) => eprintln!("c={} skipped: {why}", r.c),
    })?;
    dir.write("fig_sweep.csv", &exp::sweep_csv(&rows))?;
    let mut m = Manifest::new("fig-sweep", seed, json!({ "params": p, "cs": cs, "design_library": library_note() }))
        .sample("x0", p.n_x0)
        .sample("gamma", p.gamma_samples);
    m.outputs = vec!["fig_sweep.csv".into()];
    dir.write_manifest(&m.elapsed(start.elapsed()))?;
    let bad = rows.iter().filter(|r| r.is_ok() && !(r.max_err <= r.bound_global)).count();
    if bad > 0 {
        bail!(Failed(format!("bound_global below the measured error at {bad} grid points")));
    }
    Ok(())
}

fn fig_y0(out: &PathBuf, seed: u64, a: Y0Args, start: Instant) -> anyhow::Result<()> {
    let p = a.reference.params(seed);
    let g = p.geometry()?;
    let shells = if a.shell.is_empty() { exp::default_shells() } else { a.shell.clone() };
    for &(inner, outer) in &shells {
        if !(inner >= g.r2() && outer > inner) {
            bail!(proxyid::Error::InvalidArgument(format!(
                "shell ({inner},{outer}) must satisfy r2 <= inner < outer"
            )));
        }
    }
    let dir = OutputDir::acquire(out)?;
    let pid = build_proxy_id(&p.sources(), &p.config()?, &library())?;
    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    let mut failures = 0;
    for (k, &(inner, outer)) in shells.iter().enumerate() {
        let y0 = exp::shell_targets(seed, k, inner, outer, a.n_y0);
        let res = exp::run_y0_on(&pid, &y0, inner, outer)?;
        let name = format!("{}.csv", exp::shell_stem(inner, outer));
        dir.write(&name, &exp::y0_csv(&res))?;
        let s = &res.summary;
        println!(
            "shell=({inner},{outer}) rowwise_violations={} simplified_violations={} median_max_over_avg={:.3}",
            s.rowwise_violations, s.simplified_violations, s.median_max_over_avg
        );
        failures += s.rowwise_violations + s.simplified_violations;
        outputs.push(name);
        summaries.push(res.summary);
    }
    let mut m = Manifest::new(
        "fig-y0",
        seed,
        json!({ "params": p, "shells": shells, "summaries": summaries, "design_library": library_note() }),
    )
    .sample("x0", p.n_x0)
    .sample("y0_per_shell", a.n_y0);
    m.designs.push(DesignRecord::from_design(pid.design()));
    m.outputs = outputs;
    dir.write_manifest(&m.elapsed(start.elapsed()))?;
    if failures > 0 {
        bail!(Failed(format!("{failures} rowwise bound violations")));
    }
    Ok(())
}

fn table(out: &PathBuf, a: TableArgs, start: Instant) -> anyhow::Result<()> {
    let specs: Vec<TableSpec> = if a.row.is_empty() {
        exp::TABLE_PRESETS.to_vec()
    } else {
        a.row
            .iter()
            .map(|&(r1, r2, eps)| TableSpec { r1, r2, eps, c_paper: None, n_yp_paper: None })
            .collect()
    };
    for s in &specs {
        ShellGeometry::new(s.r1, s.r2)?;
        if !(s.eps > 0.0) {
            bail!(proxyid::Error::InvalidArgument(format!("eps must be > 0, got {}", s.eps)));
        }
    }
    let dir = OutputDir::acquire(out)?;
    let lines = exp::run_table(&specs, a.cqr, a.n_x0)?;
    let text = exp::table_csv(&lines);
    dir.write("table.csv", &text)?;
    let mut m = Manifest::new("table", 0, json!({ "rows": specs, "cqr": a.cqr, "n_x0": a.n_x0 }));
    m.outputs = vec!["table.csv".into()];
    dir.write_manifest(&m.elapsed(start.elapsed()))?;
    print!("{text}");
    let off = lines.iter().filter(|l| l.delta.is_some_and(|d| d.abs() > 1)).count();
    if off > 0 {
        bail!(Failed(format!("{off} rows differ from the reference c by more than one")));
    }
    Ok(())
}

fn design(out: &PathBuf, seed: u64, cmd: DesignCommand, start: Instant) -> anyhow::Result<()> {
    match cmd {
        DesignCommand::Validate { file, degree, tol } => {
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let points = PointSet::parse(&text, file.display().to_string())?;
            let report = validate_design(&points, degree, tol)?;
            let dir = OutputDir::acquire(out)?;
            dir.write("design_validation.csv", &report.to_csv())?;
            let mut m = Manifest::new(
                "design-validate",
                seed,
                json!({ "file": file.display().to_string(), "degree": degree, "tol": tol,
                        "passed": report.passed, "residual": report.residual }),
            )
            .sample("points", points.len());
            m.outputs = vec!["design_validation.csv".into()];
            dir.write_manifest(&m.elapsed(start.elapsed()))?;
            match report.first_failure {
                None => {
                    println!("pass: degree {degree} residual {} tol {}", fmt_sci(report.residual), fmt_sci(tol));
                    Ok(())
                }
                Some(f) => bail!(Failed(format!(
                    "fail: first failing (l,m)=({},{}) defect {} exceeds tol {}",
                    f.l,
                    f.m,
                    fmt_sci(f.defect),
                    fmt_sci(tol)
                ))),
            }
        }
        DesignCommand::Generate { degree, n, iters, file } => {
            let n = n.unwrap_or_else(|| default_size_for_degree(degree));
            let opts = GenerateOptions { max_iters: iters, ..GenerateOptions::default() };
            let d = generate_design_with(degree, n, &mut SeededRng::new(seed), &opts, |_| {})?;
            let (path, _dir) = match file {
                Some(f) => (f, None),
                None => {
                    let dir = OutputDir::acquire(out)?;
                    (dir.join(&format!("design_t{degree}_n{n}.txt")), Some(dir))
                }
            };
            d.write(&path).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {} (degree {degree}, {n} points, residual {})", path.display(), fmt_sci(d.residual()));
            Ok(())
        }
    }
}
