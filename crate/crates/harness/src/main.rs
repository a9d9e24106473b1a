//! `upwind` — experiment driver for the upwind transport solver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use upwind_core::error::Error as CoreError;
use upwind_core::metrics::{difference_measures, kr_distance, KrConfig};
use upwind_core::snapshot;
use upwind_harness::{
    config::{FieldChoice, MetricKind, OptimalityConfig, RRule, StudyConfig},
    csvio::export_csv,
    mcmc::{mcmc_check, McmcConfig},
    study::{convergence_study, optimality_example, SnapshotOptions, StudyResult},
};

#[derive(Parser)]
#[command(name = "upwind", version, about = "Upwind finite-volume transport: convergence studies, the rough-datum example, Markov-chain checks, and ad-hoc KR distances")]
struct Cli {
    /// Worker threads (defaults to all cores; ignored in sequential builds).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-reversal convergence study on the unit torus.
    Convergence(ConvergenceArgs),
    /// One-dimensional rough-datum example with closed-form cross-check.
    Optimality(OptimalityArgs),
    /// Markov-chain consistency checks (increment bound, cell law,
    /// martingale scaling).
    McmcCheck(McmcArgs),
    /// Kantorovich-Rubinstein distance between two dumped fields.
    Kr(KrArgs),
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Velocity field: 'constant' ((0,1)) or 'sobolev' (the Hoelder shear).
    #[arg(long, default_value = "constant")]
    field: String,
    /// Coarsest mesh exponent: the sweep starts at cell width 2^-hmin.
    #[arg(long, default_value_t = 5)]
    hmin: u32,
    /// Finest mesh exponent: the sweep ends at cell width 2^-hmax.
    #[arg(long, default_value_t = 9)]
    hmax: u32,
    /// Run the full reference sweep 2^-5 .. 2^-11 (overnight scale).
    #[arg(long)]
    full: bool,
    /// Time step as a fraction of the cell width.
    #[arg(long, default_value_t = 0.25)]
    dt_ratio: f64,
    /// Final measurement time.
    #[arg(long, default_value_t = 2.0)]
    t_final: f64,
    /// Sign-flip time of the field (0 disables time reversal).
    #[arg(long, default_value_t = 1.0)]
    flip: f64,
    /// Comma-separated metrics: l1, l2, hm1, kr.
    #[arg(long, default_value = "l1,hm1")]
    metrics: String,
    /// KR parameter: 'sqrt-h' or a fixed positive value.
    #[arg(long, default_value = "sqrt-h")]
    r: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero if the built-in rate contracts are violated.
    #[arg(long)]
    strict: bool,
    /// Dump fields during the run into this directory.
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Dump every N-th state (requires --snapshot-dir).
    #[arg(long, default_value_t = 0)]
    snapshot_every: usize,
    /// Snapshot format: 'bin' or 'csv'.
    #[arg(long, default_value = "bin")]
    snapshot_format: String,
}

#[derive(Args)]
struct OptimalityArgs {
    /// Datum singularity exponent s in [0, 1).
    #[arg(long, default_value_t = 0.9)]
    s: f64,
    /// Coarsest mesh exponent (cell width 2^-hmin).
    #[arg(long, default_value_t = 8)]
    hmin: u32,
    /// Finest mesh exponent (cell width 2^-hmax).
    #[arg(long, default_value_t = 14)]
    hmax: u32,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Advection speed U (the step obeys dt * U = w / 2).
    #[arg(long, default_value_t = 1.0)]
    velocity: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero if the fitted rates leave the expected windows.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct McmcArgs {
    #[arg(long, default_value = "constant")]
    field: String,
    /// Particles for the cell-law check.
    #[arg(long, default_value_t = 1_000_000)]
    particles: usize,
    /// Cells per axis of the law-check torus.
    #[arg(long, default_value_t = 8)]
    mesh: usize,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    /// Coarsest scaling-sweep exponent.
    #[arg(long, default_value_t = 4)]
    scaling_hmin: u32,
    /// Finest scaling-sweep exponent.
    #[arg(long, default_value_t = 8)]
    scaling_hmax: u32,
    #[arg(long, default_value_t = 100_000)]
    scaling_particles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dump particle positions per step to this flat binary file.
    #[arg(long)]
    dump_particles: Option<PathBuf>,
    /// Exit nonzero unless every check passes.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct KrArgs {
    /// First field snapshot (binary or CSV).
    #[arg(long)]
    a: PathBuf,
    /// Second field snapshot.
    #[arg(long)]
    b: PathBuf,
    /// KR parameter: 'sqrt-h' or a fixed positive value.
    #[arg(long, default_value = "sqrt-h")]
    r: String,
    /// Support-point cap after the transshipment reduction.
    #[arg(long, default_value_t = 5000)]
    cap: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        eprintln!("note: built without the 'parallel' feature; --threads is ignored");
    }

    let outcome = match cli.cmd {
        Cmd::Convergence(args) => run_convergence(args),
        Cmd::Optimality(args) => run_optimality(args),
        Cmd::McmcCheck(args) => run_mcmc(args),
        Cmd::Kr(args) => run_kr(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .downcast_ref::<CoreError>()
                .map(error_kind)
                .unwrap_or("failure");
            eprintln!("{{\"error\":\"{}\",\"kind\":\"{kind}\"}}", json_escape(&e.to_string()));
            ExitCode::from(2)
        }
    }
}

fn error_kind(e: &CoreError) -> &'static str {
    match e {
        CoreError::CflViolation { .. } => "cfl_violation",
        CoreError::SizeCapExceeded { .. } => "size_cap_exceeded",
        CoreError::MassMismatch(..) => "mass_mismatch",
        CoreError::InvalidMesh(_) => "invalid_mesh",
        CoreError::InvalidConfig(_) => "invalid_config",
        _ => "failure",
    }
}

fn json_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ")
}

fn contract_violation(msg: String) -> anyhow::Error {
    anyhow::Error::new(CoreError::InvalidConfig(msg)).context("contract violation")
}

fn print_result(result: &StudyResult) {
    print!("{:>10}", "meshsize");
    for m in &result.metrics {
        print!("  {:>13}", m.column());
    }
    println!("  {:>9}", "seconds");
    for r in &result.records {
        print!("{:>10.6}", r.meshsize);
        for e in &r.errors {
            print!("  {e:>13.6e}");
        }
        println!("  {:>9.2}", r.wall_time);
    }
    for (m, fit) in result.metrics.iter().zip(&result.fits) {
        println!(
            "fitted rate {:>4}: {:+.4}  (max log residual {:.3}, {} zero-error points excluded)",
            m.column(),
            fit.slope,
            fit.max_residual,
            fit.excluded
        );
    }
    for (m, &inv) in result.metrics.iter().zip(&result.inversions) {
        if inv > 1 {
            eprintln!(
                "warning: {} error grew under refinement {inv} times; decay is not monotone",
                m.column()
            );
        }
    }
}

fn run_convergence(args: ConvergenceArgs) -> anyhow::Result<()> {
    let (hmin, hmax) = if args.full { (5, 11) } else { (args.hmin, args.hmax) };
    if hmax < hmin {
        anyhow::bail!("--hmax must be at least --hmin");
    }
    let cfg = StudyConfig {
        field: FieldChoice::parse(&args.field)?,
        exponents: (hmin..=hmax).collect(),
        dt_ratio: args.dt_ratio,
        final_time: args.t_final,
        flip_time: (args.flip > 0.0).then_some(args.flip),
        metrics: MetricKind::parse_list(&args.metrics)?,
        r_rule: RRule::parse(&args.r)?,
        kr_size_cap: 5000,
        seed: args.seed,
    };
    let snapshots = args.snapshot_dir.map(|dir| SnapshotOptions {
        dir,
        every: args.snapshot_every,
        binary: args.snapshot_format != "csv",
    });
    if let Some(opts) = snapshots.as_ref() {
        std::fs::create_dir_all(&opts.dir)?;
    }
    let result = convergence_study(&cfg, snapshots.as_ref())?;
    print_result(&result);
    if let Some(path) = args.out {
        export_csv(&result.records, &result.metrics, &path)?;
        println!("wrote {}", path.display());
    }
    if args.strict {
        check_convergence_contract(&cfg, &result)?;
    }
    Ok(())
}

fn check_convergence_contract(cfg: &StudyConfig, result: &StudyResult) -> anyhow::Result<()> {
    let slope_of = |m: MetricKind| -> Option<f64> {
        result
            .metrics
            .iter()
            .position(|&x| x == m)
            .map(|i| result.fits[i].slope)
    };
    if let Some(l1) = slope_of(MetricKind::L1) {
        let window = match cfg.field {
            FieldChoice::Constant(_) => (0.40, 0.60),
            FieldChoice::Sobolev => (0.40, 1.00),
        };
        if !(window.0..=window.1).contains(&l1) {
            return Err(contract_violation(format!(
                "L1 rate {l1:.4} outside [{}, {}]",
                window.0, window.1
            )));
        }
        if let Some(hm1) = slope_of(MetricKind::Hm1) {
            if hm1 < l1 {
                return Err(contract_violation(format!(
                    "H-1 rate {hm1:.4} is below the L1 rate {l1:.4}"
                )));
            }
        }
    }
    Ok(())
}

fn run_optimality(args: OptimalityArgs) -> anyhow::Result<()> {
    if args.hmax < args.hmin {
        anyhow::bail!("--hmax must be at least --hmin");
    }
    let cfg = OptimalityConfig {
        s: args.s,
        exponents: (args.hmin..=args.hmax).collect(),
        final_time: args.t_final,
        velocity: args.velocity,
        ..OptimalityConfig::default()
    };
    let result = optimality_example(&cfg)?;
    print_result(&result);
    if let Some(path) = args.out {
        export_csv(&result.records, &result.metrics, &path)?;
        println!("wrote {}", path.display());
    }
    if args.strict {
        let l1 = result.fits[0].slope;
        let w1 = result.fits[1].slope;
        let l1_want = (1.0 - cfg.s) / 2.0;
        let w1_want = (2.0 - cfg.s) / 2.0;
        if (l1 - l1_want).abs() > 0.15 {
            return Err(contract_violation(format!(
                "L1 rate {l1:.4} not within 0.15 of {l1_want:.4}"
            )));
        }
        if (w1 - w1_want).abs() > 0.15 {
            return Err(contract_violation(format!(
                "W1 rate {w1:.4} not within 0.15 of {w1_want:.4}"
            )));
        }
    }
    Ok(())
}

fn run_mcmc(args: McmcArgs) -> anyhow::Result<()> {
    if args.scaling_hmax < args.scaling_hmin {
        anyhow::bail!("--scaling-hmax must be at least --scaling-hmin");
    }
    let cfg = McmcConfig {
        field: FieldChoice::parse(&args.field)?,
        law_mesh: args.mesh,
        law_steps: args.steps,
        law_particles: args.particles,
        scaling_exponents: (args.scaling_hmin..=args.scaling_hmax).collect(),
        scaling_particles: args.scaling_particles,
        dt_ratio: 0.25,
        seed: args.seed,
        dump_positions: args.dump_particles,
    };
    let report = mcmc_check(&cfg)?;
    println!(
        "increment bound: max |xi| = {:.6e} <= 4h = {:.6e}  [{}]",
        report.max_increment,
        report.increment_bound,
        pass_str(report.increment_ok)
    );
    let worst = report
        .law
        .per_step
        .iter()
        .max_by(|a, b| (a.tv / a.tolerance).partial_cmp(&(b.tv / b.tolerance)).unwrap());
    if let Some(w) = worst {
        println!(
            "cell law: worst TV {:.4e} of tolerance {:.4e} at step {}  [{}]",
            w.tv,
            w.tolerance,
            w.step,
            pass_str(report.law.pass)
        );
    }
    for (h, sup) in &report.scaling_points {
        println!("scaling point: h = {h:.6}  E[sup|M|] = {sup:.6e}");
    }
    match report.scaling_slope {
        Some(s) => println!(
            "martingale sup-scaling slope: {s:.4} (target [0.4, 0.6])  [{}]",
            pass_str(report.scaling_ok)
        ),
        None => println!("martingale sup-scaling: degenerate (all suprema vanish)"),
    }
    println!("observed moment constant C in E|xi|^2 <= C dt sup|u| h: {:.3}", report.moment_constant);
    if args.strict && !report.pass {
        return Err(contract_violation("one or more chain checks failed".into()));
    }
    Ok(())
}

fn run_kr(args: KrArgs) -> anyhow::Result<()> {
    let (fa, ta) = snapshot::read_auto(&args.a)?;
    let (fb, tb) = snapshot::read_auto(&args.b)?;
    if !fa.same_mesh(&fb) {
        return Err(CoreError::MeshMismatch.into());
    }
    let meshsize = fa.mesh().widths()[0];
    let r = RRule::parse(&args.r)?.value(meshsize);
    let (plus, minus) = difference_measures(&fa, &fb)?;
    let cfg = KrConfig { size_cap: args.cap, ..KrConfig::default() };
    let out = kr_distance(&plus, &minus, r, &cfg)?;
    println!(
        "fields at t = {ta} (n = {}) and t = {tb} (n = {})",
        fa.step(),
        fb.step()
    );
    println!(
        "D_r = {:.12e}  (r = {r:.6}, plan entries = {}, duality gap = {:.3e})",
        out.distance,
        out.plan.entries.len(),
        out.dual_gap
    );
    Ok(())
}

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
