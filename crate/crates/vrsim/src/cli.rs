use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use vrsim_core::engine::{simulate, NoObserver};
use vrsim_core::stability::{stability_table, StabilityRow, StabilitySetup};
use vrsim_core::trace::Trace;
use vrsim_core::Algorithm;

use crate::config::{hex_digest, Auto, ConfigFile, Experiment, RunSection};
use crate::error::{CliError, Result};
use crate::plot::{self, PlotKind};
use crate::report;

/// Sweeps larger than this need `--allow-large`.
pub const MAX_SWEEP_RUNS: usize = 10_000;

pub const STABILITY_HEADER: &str = "algorithm,arch,eta,N,K,delta,mean_delta_norm,stderr,norm_delta_norm,bound,within_bound";

#[derive(Debug, Parser)]
#[command(name = "vrsim", version, about = "Simulate semi-asynchronous variance-reduced optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write its trace and summary.
    Run(RunArgs),
    /// Run the cross product of the given axes.
    Sweep(SweepArgs),
    /// Run SYNTHESIS, Async-SGD and Async-SVRG on the same configuration.
    Compare(RunArgs),
    /// Coupled runs on adjacent datasets.
    Stability(StabilityArgs),
    /// Print the closed-form quantities for a configuration as JSON.
    Theory(CommonArgs),
    /// Render trace CSV files as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["dm", "sm"])]
    arch: Option<String>,
    #[arg(long, value_parser = ["synthesis", "async-sgd", "async-svrg"])]
    algo: Option<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    delta: Vec<usize>,
    #[arg(long = "n", value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    workers: Vec<usize>,
    /// Number of seeds, counting up from the base seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    allow_large: bool,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', default_values = ["synthesis", "async-sgd", "async-svrg"])]
    algos: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    archs: Vec<String>,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
}

#[derive(Debug, Args)]
struct PlotArgs {
    files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "loss-vs-iter")]
    kind: PlotKind,
    #[arg(long)]
    log_y: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprintln!("vrsim: {}", text.lines().next().unwrap_or("usage error").trim_start_matches("error: "));
            return 2;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("vrsim: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Stability(a) => cmd_stability(&a),
        Command::Theory(a) => cmd_theory(&a),
        Command::Plot(a) => cmd_plot(&a),
    }
}

fn load_section(c: &CommonArgs) -> Result<(RunSection, PathBuf)> {
    let mut s = ConfigFile::load(&c.config)?.run;
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    if let Some(a) = &c.arch {
        s.arch = a.clone();
    }
    if let Some(a) = &c.algo {
        s.algo = a.clone();
    }
    let base = c.config.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((s, base))
}

/// Writes `contents` unless `path` already holds different bytes and
/// `force` is off.
pub fn write_output(path: &Path, contents: &str, force: bool) -> Result<()> {
    if let Ok(existing) = std::fs::read(path) {
        if existing == contents.as_bytes() {
            return Ok(());
        }
        if !force {
            return Err(CliError::Runtime(format!(
                "refusing to overwrite {} with different content (use --force)",
                path.display()
            )));
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn short(hash: &str) -> &str {
    &hash[..12]
}

fn run_name(e: &Experiment, hash: &str) -> String {
    format!("{}-{}-{}-seed{}", e.algo.name(), e.arch.name(), short(hash), e.cfg.seed)
}

struct RunOutput {
    trace_path: PathBuf,
    trace: Trace,
    summary: report::Summary,
}

fn execute(e: &Experiment, hash: &str, out: &Path, force: bool) -> Result<RunOutput> {
    let trace = simulate(e.algo, e.arch, &e.cfg, &e.model, &e.data, &mut NoObserver)?;
    let summary = report::summary(e, &trace, hash)?;
    let name = run_name(e, hash);
    let trace_path = out.join(format!("{name}.csv"));
    write_output(&trace_path, &report::trace_csv(&trace, e.algo != Algorithm::Synthesis)?, force)?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_output(&out.join(format!("{name}.json")), &json, force)?;
    Ok(RunOutput { trace_path, trace, summary })
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let (section, base) = load_section(&a.common)?;
    let r = execute(&section.resolve(&base)?, &section.hash(), &a.out, a.force)?;
    for w in &r.summary.warnings {
        eprintln!("vrsim: warning: {w}");
    }
    println!("{}", r.trace_path.display());
    println!("{}", r.trace_path.with_extension("json").display());
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("VRSIM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("VRSIM_THREADS: `{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(CliError::Config("VRSIM_THREADS: must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Runtime(e.to_string()))
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let (section, base) = load_section(&a.run.common)?;
    let deltas: Vec<Option<usize>> = if a.delta.is_empty() { vec![None] } else { a.delta.iter().copied().map(Some).collect() };
    let ns: Vec<Option<usize>> = if a.n.is_empty() { vec![None] } else { a.n.iter().copied().map(Some).collect() };
    let etas: Vec<Option<f64>> = if a.eta.is_empty() { vec![None] } else { a.eta.iter().copied().map(Some).collect() };
    let workers: Vec<Option<usize>> = if a.workers.is_empty() { vec![None] } else { a.workers.iter().copied().map(Some).collect() };
    if a.seeds == 0 {
        return Err(CliError::Config("--seeds: must be at least 1".into()));
    }
    if !a.n.is_empty() && section.data.is_some() {
        return Err(CliError::Config("--n: sweeping N needs synthetic data".into()));
    }
    let total = deltas.len() * ns.len() * etas.len() * workers.len() * a.seeds as usize;
    if total > MAX_SWEEP_RUNS && !a.allow_large {
        return Err(CliError::Config(format!("sweep has {total} runs (limit {MAX_SWEEP_RUNS}); pass --allow-large")));
    }

    let mut runs = Vec::with_capacity(total);
    for d in &deltas {
        for n in &ns {
            for eta in &etas {
                for w in &workers {
                    for i in 0..a.seeds {
                        let mut s = section.clone();
                        if let Some(d) = d {
                            s.max_delay = *d;
                        }
                        if let Some(n) = n {
                            s.n = Some(*n);
                        }
                        if let Some(eta) = eta {
                            s.step = Auto::Value(*eta);
                        }
                        if let Some(w) = w {
                            s.workers = Auto::Value(*w);
                        }
                        s.seed = section.seed + i;
                        runs.push(s);
                    }
                }
            }
        }
    }
    let pool = thread_pool()?;
    // Every member must resolve before anything is written.
    let resolved: Vec<Result<(Experiment, String)>> =
        pool.install(|| runs.par_iter().map(|s| Ok((s.resolve(&base)?, s.hash()))).collect());
    let resolved = resolved.into_iter().collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<RunOutput>> =
        pool.install(|| resolved.par_iter().map(|(e, h)| execute(e, h, &a.run.out, a.run.force)).collect());

    let mut csv = String::from("delta,N,eta,workers,seed,final_loss,grad_norm_sq_at_zeta,sfo_paper,sfo_true,max_tau,trace\n");
    let mut rows = Vec::with_capacity(total);
    for r in results {
        let r = r?;
        rows.push(r);
    }
    rows.sort_by(|x, y| {
        let kx = (x.summary.delta, x.summary.n, x.summary.eta, x.summary.workers, x.summary.seed);
        let ky = (y.summary.delta, y.summary.n, y.summary.eta, y.summary.workers, y.summary.seed);
        kx.partial_cmp(&ky).unwrap_or(std::cmp::Ordering::Equal)
    });
    for r in &rows {
        let s = &r.summary;
        let file = r.trace_path.file_name().and_then(|f| f.to_str()).unwrap_or("");
        let _ = writeln!(
            csv,
            "{},{},{:?},{},{},{:?},{:?},{},{},{},{file}",
            s.delta, s.n, s.eta, s.workers, s.seed, s.final_loss, s.grad_norm_sq_at_zeta, s.sfo_paper, s.sfo_true, s.max_tau
        );
    }
    let key = format!("{}|{:?}|{:?}|{:?}|{:?}|{}", section.hash(), a.delta, a.n, a.eta, a.workers, a.seeds);
    let path = a.run.out.join(format!("sweep-{}-seed{}.csv", short(&hex_digest(key.as_bytes())), section.seed));
    write_output(&path, &csv, a.run.force)?;
    println!("{} runs", rows.len());
    println!("{}", path.display());
    Ok(())
}

fn cmd_compare(a: &RunArgs) -> Result<()> {
    let (section, base) = load_section(&a.common)?;
    let mut runs = Vec::new();
    for algo in Algorithm::ALL {
        let mut s = section.clone();
        s.algo = algo.name().to_string();
        runs.push((s.resolve(&base)?, s.hash()));
    }
    let mut combined = String::new();
    let mut comments = String::new();
    println!("{:<12} {:>14} {:>14} {:>12} {:>8}", "algorithm", "final_loss", "grad_sq@zeta", "sfo_paper", "max_tau");
    for (e, hash) in &runs {
        let r = execute(e, hash, &a.out, a.force)?;
        let text = report::trace_csv(&r.trace, true)?;
        for (i, line) in text.lines().enumerate() {
            if let Some(c) = line.strip_prefix("# ") {
                let _ = writeln!(comments, "# algorithm={} {c}", e.algo.name());
            } else if i > 0 || combined.is_empty() {
                combined.push_str(line);
                combined.push('\n');
            }
        }
        let m = &r.summary;
        println!(
            "{:<12} {:>14.6e} {:>14.6e} {:>12} {:>8}",
            e.algo.name(),
            m.final_loss,
            m.grad_norm_sq_at_zeta,
            m.sfo_paper,
            m.max_tau
        );
    }
    combined.push_str(&comments);
    let mut s = section.clone();
    s.algo = "compare".into();
    let arch = runs[0].0.arch.name();
    let path = a.out.join(format!("compare-{arch}-{}-seed{}.csv", short(&s.hash()), section.seed));
    write_output(&path, &combined, a.force)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_stability(a: &StabilityArgs) -> Result<()> {
    let (section, base) = load_section(&a.run.common)?;
    let algos = a
        .algos
        .iter()
        .map(|s| Algorithm::parse(s).ok_or_else(|| CliError::Config(format!("--algos: unknown algorithm `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    if algos.is_empty() {
        return Err(CliError::Config("--algos: at least one algorithm is required".into()));
    }
    let archs: Vec<String> = if a.archs.is_empty() { vec![section.arch.clone()] } else { a.archs.clone() };
    if a.seeds == 0 {
        return Err(CliError::Config("--seeds: must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..a.seeds).map(|i| section.seed + i).collect();
    let mut experiments = Vec::new();
    for arch in &archs {
        let mut s = section.clone();
        s.arch = arch.clone();
        experiments.push(s.resolve(&base)?);
    }
    let jobs: Vec<(usize, Algorithm)> = (0..experiments.len()).flat_map(|i| algos.iter().map(move |al| (i, *al))).collect();
    let pool = thread_pool()?;
    let rows: Vec<Result<StabilityRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|(i, algo)| {
                let e = &experiments[*i];
                let setup = StabilitySetup {
                    architecture: e.arch,
                    config: &e.cfg,
                    model: &e.model,
                    data: &e.data,
                };
                Ok(stability_table(&[setup], &[*algo], &seeds)?.remove(0))
            })
            .collect()
    });

    let hash = short(&section.hash()).to_string();
    let mut csv = String::from(STABILITY_HEADER);
    csv.push('\n');
    for r in rows {
        let r = r?;
        let _ = writeln!(
            csv,
            "{},{},{:?},{},{},{},{:?},{:?},{:?},{:?},{}",
            r.algorithm.name(),
            r.architecture.name(),
            r.step,
            r.n,
            r.iterations,
            r.max_delay,
            r.mean_delta_norm,
            r.stderr,
            r.mean_normalized_delta_norm,
            r.bound,
            r.within_bound
        );
        let mut path_csv = String::from("k,delta_norm\n");
        for (k, v) in &r.mean_delta_path {
            let _ = writeln!(path_csv, "{k},{v:?}");
        }
        let p = a.run.out.join(format!("stability-{}-{}-{hash}-seed{}.csv", r.algorithm.name(), r.architecture.name(), section.seed));
        write_output(&p, &path_csv, a.run.force)?;
        println!(
            "{:<11} {} mean |delta_K| = {:.4e} +/- {:.2e}  bound {:.4e}  within={}",
            r.algorithm.name(),
            r.architecture.name(),
            r.mean_delta_norm,
            r.stderr,
            r.bound,
            r.within_bound
        );
    }
    let path = a.run.out.join(format!("stability-{hash}-seed{}.csv", section.seed));
    write_output(&path, &csv, a.run.force)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_theory(a: &CommonArgs) -> Result<()> {
    let (section, base) = load_section(a)?;
    let e = section.resolve(&base)?;
    let t = report::theory(&e)?;
    println!("{}", serde_json::to_string_pretty(&t).expect("theory serializes"));
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let svg = plot::plot_files(&a.files, a.kind, a.log_y)?;
    let out = a.out.clone().unwrap_or_else(|| plot::default_output(&a.files, a.kind));
    write_output(&out, &svg, a.force)?;
    println!("{}", out.display());
    Ok(())
}
