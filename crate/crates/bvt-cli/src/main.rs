use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use bvt_core::catalog::{assemble_field, beta_k, exact_solution, ConstructionVariant, VariantTag};
use bvt_core::fv::{shear_scenario, solve_ibvp, zero_data_scenario};
use bvt_core::geometry::{pow2, VelocityField};
use bvt_core::harness::{
    cell_slice, emit_heatmap, init_thread_pool, load_report, profile_grid, run_suite, sample_slice, RunConfig,
};
use bvt_core::traces::{one_sided_trace, SourceTag, TraceSide, TraceSource};
use bvt_core::Error;
use clap::{Args, Parser, Subcommand};

/// Laboratory for transport with BV coefficients on a half-space.
#[derive(Parser, Debug)]
#[command(name = "bvt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Construction variant.
    #[arg(long)]
    variant: Option<String>,
    /// Finest scale index of the construction.
    #[arg(long)]
    kmax: Option<u32>,
    /// Grid level (cell side 2^-level).
    #[arg(long)]
    level: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CFL number of the solver.
    #[arg(long)]
    cfl: Option<f64>,
    /// Weak-residual tolerance relative to the C^1 norm of the test function.
    #[arg(long)]
    tol: Option<f64>,
    /// Flat key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the construction variants (and render beta_3 with --out).
    Catalog {
        #[command(flatten)]
        common: Common,
    },
    /// Run the finite-volume solver (zero data for a variant, the smooth shear scenario otherwise).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Final time.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Write one-sided trace profiles of a variant on the planes r = 2^(2-k).
    Traces {
        #[command(flatten)]
        common: Common,
    },
    /// Run a check suite and write its report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suite name.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Print a report written by `verify`.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn config(common: &Common, suite: Option<&str>, horizon: Option<f64>) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = suite {
        cfg.set("suite", s)?;
    }
    if let Some(v) = &common.variant {
        cfg.set("variant", v)?;
    }
    if let Some(k) = common.kmax {
        cfg.k_max = k;
    }
    if let Some(l) = common.level {
        cfg.level = l;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(c) = common.cfl {
        cfg.cfl = c;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

enum Failure {
    Usage(anyhow::Error),
    Check,
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(_) | Error::Config(_) => Failure::Usage(e.into()),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn catalog(common: &Common) -> Result<(), Failure> {
    let k = common.kmax.unwrap_or(8);
    for tag in VariantTag::ALL {
        let f = assemble_field(ConstructionVariant::new(tag, k)?);
        let m = f.meta();
        println!(
            "{:<18} Tr b = {:+.2}  |b| <= {:.3}  finest scale {:.3e}",
            tag.as_str(),
            f.trace_limit(),
            m.linf_bound,
            m.finest_scale
        );
    }
    if let Some(out) = &common.out {
        std::fs::create_dir_all(out).context("creating output directory")?;
        let b3 = beta_k(3);
        let slice = sample_slice(32, 0.5, |y1, y2| b3.local(pow2(-4) - 1e-9, y1, y2)[0]);
        emit_heatmap(&slice, -5.0, 1.0, 8, &out.join("beta3.ppm"))?;
        println!("wrote {}", out.join("beta3.ppm").display());
    }
    Ok(())
}

fn simulate(common: &Common, horizon: Option<f64>) -> Result<(), Failure> {
    let cfg = config(common, None, horizon)?;
    std::fs::create_dir_all(&cfg.out_dir).context("creating output directory")?;
    let tr = match &common.variant {
        Some(_) => {
            let field: Arc<dyn VelocityField> = Arc::new(assemble_field(ConstructionVariant::new(cfg.variant, cfg.k_max)?));
            solve_ibvp(&zero_data_scenario(field, cfg.level, cfg.cfl, cfg.horizon)?)?
        }
        None => {
            let (sc, _) = shear_scenario(cfg.level, cfg.cfl, cfg.horizon)?;
            solve_ibvp(&sc)?
        }
    };
    tr.write_snapshots_csv(&cfg.out_dir.join("snapshots.csv"))?;
    tr.write_conserved_csv(&cfg.out_dir.join("conserved.csv"))?;
    let last = tr.last();
    emit_heatmap(&cell_slice(last, last.grid.nr / 8), -1.0, 1.0, 4, &cfg.out_dir.join("slice.ppm"))?;
    let rec = tr.log.last().expect("log has the initial record");
    println!("{} steps to t = {}: mass {:.6e}, L2 {:.6e}", rec.step, rec.t, rec.mass, rec.l2);
    Ok(())
}

fn traces(common: &Common) -> Result<(), Failure> {
    let cfg = config(common, None, None)?;
    std::fs::create_dir_all(&cfg.out_dir).context("creating output directory")?;
    let v = ConstructionVariant::new(cfg.variant, cfg.k_max)?;
    let f = assemble_field(v);
    let u = exact_solution(v);
    let src = TraceSource::with_solution(&f, &u);
    let grid = profile_grid(cfg.k_max);
    for k in 3..=cfg.k_max {
        let r = pow2(2 - k as i32);
        for tag in [SourceTag::B, SourceTag::Flux] {
            let p = one_sided_trace(&src, tag, r, TraceSide::Minus, grid)?;
            let path = cfg.out_dir.join(format!("trace_{}_k{k}.csv", tag.as_str()));
            p.write_csv(&path)?;
            println!("k = {k}  {:<3} mean {:+.6}  -> {}", tag.as_str(), p.mean(), path.display());
        }
    }
    Ok(())
}

fn verify(common: &Common, suite: Option<&str>) -> Result<(), Failure> {
    let cfg = config(common, suite, None)?;
    let report = run_suite(&cfg)?;
    print!("{}", report.summary());
    if report.verdict.ok() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn report(common: &Common) -> Result<(), Failure> {
    let dir = common.out.clone().unwrap_or_else(|| RunConfig::default().out_dir);
    let path = dir.join("report.json");
    let v = load_report(Path::new(&path))?;
    let verdict = v["verdict"].as_str().unwrap_or("FAIL").to_string();
    println!("suite {}: {verdict}", v["suite"].as_str().unwrap_or("?"));
    for r in v["records"].as_array().into_iter().flatten() {
        println!(
            "  {:<7} {:<32} {}",
            r["status"].as_str().unwrap_or("?"),
            r["name"].as_str().unwrap_or("?"),
            r["detail"].as_str().unwrap_or("")
        );
    }
    if verdict == "FAIL" {
        Err(Failure::Check)
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_thread_pool();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Catalog { common } => catalog(common),
        Command::Simulate { common, horizon } => simulate(common, *horizon),
        Command::Traces { common } => traces(common),
        Command::Verify { common, suite } => verify(common, suite.as_deref()),
        Command::Report { common } => report(common),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
