//! Command-line driver: rank certification, fixed-rank searches,
//! classification table management, decomposition verification and formula
//! export.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bilrank_core::error::Error;
use bilrank_core::report::DecompositionFile;
use bilrank_core::search::{
    self, certify_rank, decompose_all, estimate_remaining, search_at_rank, Algorithm,
};
use bilrank_core::{OmegaStore, TargetMap};

/// Exit codes: 0 success, 1 failure or refusal, 2 missing tables or
/// malformed files, 3 group closure cap exceeded.
const EXIT_FAIL: u8 = 1;
const EXIT_MISSING: u8 = 2;
const EXIT_CAP: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bilrank",
    about = "Exhaustive bilinear-rank search over GF(2)",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Target descriptor: poly:2, short:4, circulant:5, mat:3x2x3
    #[arg(long)]
    target: String,
    /// Search strategy
    #[arg(long, default_value = "bdez")]
    algorithm: Algorithm2,
    /// Directory holding classification tables (needed for `covering`)
    #[arg(long)]
    omega_dir: Option<PathBuf>,
    /// Output path for the decomposition file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Embed search statistics in the output file (makes it run-dependent)
    #[arg(long)]
    stats: bool,
    /// Worker threads (0 = all cores); results are canonical either way
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed for randomized spot checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run searches whose cost is documented to exceed desk scale
    #[arg(long)]
    allow_long: bool,
    /// Cap on materialized group closures
    #[arg(long, default_value_t = 1 << 20)]
    cap: usize,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Algorithm2 {
    Bdez,
    Stab,
    Covering,
}

impl From<Algorithm2> for Algorithm {
    fn from(a: Algorithm2) -> Algorithm {
        match a {
            Algorithm2::Bdez => Algorithm::Bdez,
            Algorithm2::Stab => Algorithm::Stab,
            Algorithm2::Covering => Algorithm::Covering,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Certify the bilinear rank: raise r until solutions appear
    Rank(RunOpts),
    /// Enumerate solutions at one fixed r
    Search {
        #[command(flatten)]
        opts: RunOpts,
        /// The fixed subspace dimension to search at
        #[arg(long)]
        r: usize,
    },
    /// Manage classification tables
    Omega {
        #[command(subcommand)]
        action: OmegaAction,
    },
    /// Re-check every decomposition in a file
    Verify { file: PathBuf },
    /// Export a decomposition file as JSON or readable formulae
    Export {
        file: PathBuf,
        #[arg(long, default_value = "text-formulae")]
        format: ExportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extrapolate leaf-test counts from recorded depth levels
    Estimate {
        file: PathBuf,
        /// How many further levels to extrapolate
        #[arg(long, default_value_t = 2)]
        remaining: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ExportFormat {
    Json,
    #[value(name = "text-formulae")]
    TextFormulae,
}

#[derive(Subcommand)]
enum OmegaAction {
    /// Compute tables up to the given dimension and store them
    Compute {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        allow_long: bool,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Recount, checksum and spot-check a stored table
    Verify {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::MissingOmega { .. } | Error::Schema(_) | Error::CorruptFile(_) => {
                    ExitCode::from(EXIT_MISSING)
                }
                Error::CapExceeded { .. } => ExitCode::from(EXIT_CAP),
                _ => ExitCode::from(EXIT_FAIL),
            }
        }
    }
}

fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Rank(opts) => {
            init_threads(opts.threads);
            let target = TargetMap::parse(&opts.target)?;
            let algorithm: Algorithm = opts.algorithm.into();
            if let Some(refusal) = refuse_long(&target, algorithm, opts.allow_long) {
                eprintln!("{refusal}");
                return Ok(ExitCode::from(EXIT_FAIL));
            }
            let store = open_store(&opts);
            let run = certify_rank(&target, algorithm, &store, opts.cap, None)?;
            println!("target: {}", target.id);
            println!("rank: {}", run.rank);
            report_solutions(&run.solutions);
            print_depth_table(&run.stats.per_depth_calls, target.dim());
            println!("wall time: {:.3}s", run.stats.wall_time.as_secs_f64());
            write_output(&opts, &target, run.rank, &run.solutions, &run.stats)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Search { opts, r } => {
            init_threads(opts.threads);
            let target = TargetMap::parse(&opts.target)?;
            let algorithm: Algorithm = opts.algorithm.into();
            if let Some(refusal) = refuse_long(&target, algorithm, opts.allow_long) {
                eprintln!("{refusal}");
                return Ok(ExitCode::from(EXIT_FAIL));
            }
            let store = open_store(&opts);
            let (solutions, stats) = search_at_rank(&target, algorithm, &store, opts.cap, r)?;
            println!("target: {}", target.id);
            println!("r: {r}");
            report_solutions(&solutions);
            println!("leaf tests: {}", stats.rank_one_basis_calls);
            println!("wall time: {:.3}s", stats.wall_time.as_secs_f64());
            write_output(&opts, &target, r, &solutions, &stats)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Omega { action } => match action {
            OmegaAction::Compute { d, dir, allow_long, threads } => {
                init_threads(threads);
                if d > 6 && !allow_long {
                    eprintln!(
                        "refusing to compute tables beyond d=6 without --allow-long \
                         (d=7 takes on the order of an hour, d=8 a day)"
                    );
                    return Ok(ExitCode::from(EXIT_FAIL));
                }
                let mut store = OmegaStore::at_dir(&dir);
                let t0 = std::time::Instant::now();
                store.compute_up_to(d)?;
                for dd in 1..=d {
                    println!("omega d={dd}: {} classes", store.load(dd)?.len());
                }
                println!("done in {:.1}s", t0.elapsed().as_secs_f64());
                Ok(ExitCode::SUCCESS)
            }
            OmegaAction::Verify { d, dir, seed } => {
                let store = OmegaStore::at_dir(&dir);
                let classes = store.load(d)?;
                bilrank_core::omega::verify_table(&classes, d, 2000, seed)?;
                println!("omega d={d}: {} classes, checksum and structure ok", classes.len());
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Verify { file } => {
            let text = std::fs::read_to_string(&file)?;
            let parsed = DecompositionFile::from_json(&text)?;
            let (passed, failed) = parsed.verify()?;
            println!("solutions checked: {}", passed + failed);
            println!("passed: {passed}");
            println!("failed: {failed}");
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAIL) })
        }
        Command::Export { file, format, out } => {
            let text = std::fs::read_to_string(&file)?;
            let parsed = DecompositionFile::from_json(&text)?;
            let rendered = match format {
                ExportFormat::Json => parsed.to_json(),
                ExportFormat::TextFormulae => parsed.to_formulae_text(),
            };
            match out {
                Some(path) => std::fs::write(path, rendered)?,
                None => print!("{rendered}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { file, remaining } => {
            let text = std::fs::read_to_string(&file)?;
            let parsed = DecompositionFile::from_json(&text)?;
            let stats =
                parsed.stats.ok_or_else(|| Error::Schema("file carries no stats block".into()))?;
            let levels = estimate_remaining(&stats.per_depth, remaining)?;
            println!("recorded levels: {:?}", stats.per_depth);
            for (i, n) in levels.iter().enumerate() {
                println!("level +{}: ~{} leaf tests", i + 1, n);
            }
            if stats.seconds > 0.0 && stats.tests > 0 {
                let per_test = stats.seconds / stats.tests as f64;
                if let Some(last) = levels.last() {
                    println!("extrapolated time: ~{:.1e}s", per_test * *last as f64);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn open_store(opts: &RunOpts) -> OmegaStore {
    match &opts.omega_dir {
        Some(dir) => OmegaStore::at_dir(dir),
        None => OmegaStore::in_memory(),
    }
}

fn refuse_long(target: &TargetMap, algorithm: Algorithm, allow: bool) -> Option<String> {
    if allow {
        return None;
    }
    search::long_run_estimate(target.id, algorithm).map(|cost| {
        format!(
            "refusing to run {} with this strategy without --allow-long; \
             estimated cost: {cost}",
            target.id
        )
    })
}

fn report_solutions(solutions: &bilrank_core::SolutionSet) {
    match solutions.total {
        Some(total) => println!("solutions: {total}"),
        None => println!("solutions: {}", solutions.representatives.len()),
    }
    if let Some(classes) = solutions.classes {
        println!("equivalence classes: {classes}");
    }
}

fn print_depth_table(per_depth: &[u64], ell: usize) {
    if per_depth.is_empty() {
        return;
    }
    println!("leaf tests per attempted rank:");
    for (i, n) in per_depth.iter().enumerate() {
        println!("  r = {}: {}", ell + i, n);
    }
}

fn write_output(
    opts: &RunOpts,
    target: &TargetMap,
    rank: usize,
    solutions: &bilrank_core::SolutionSet,
    stats: &bilrank_core::SearchStats,
) -> Result<(), Error> {
    let decomps = decompose_all(solutions, target)?;
    let file = DecompositionFile::from_run(
        target,
        rank,
        &decomps,
        if opts.stats { Some(stats) } else { None },
    );
    let path = opts
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.json", opts.target.replace(':', "_"))));
    std::fs::write(&path, file.to_json())?;
    println!("decompositions written to {}", path.display());
    Ok(())
}
