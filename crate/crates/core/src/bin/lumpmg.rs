use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use lumpmg::harness::{
    config::default_seeds, reproduce_table, run::write_rows_csv, run_spectrum, write_outputs, write_scatter,
    ExperimentConfig, Manifest, Runner, SpectrumConfig, TableOptions,
};
use lumpmg::mesh::Mesh;
use lumpmg::verify::{run_suite, Suite, VerifyOptions};
use lumpmg::Error;

const EXIT_DIFF: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "lumpmg", version, about = "Multilevel and mass-lumping solvers for fourth-order parabolic block systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment config (or re-run a manifest.json).
    Solve {
        config: PathBuf,
        /// Output directory for results.csv and manifest.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a reference table (1..10, r1..r4) and diff against it.
    Table {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds (default: LUMPMG_SEED or 0..5).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Comma-separated subset of the table's levels.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u32>>,
        /// Comma-separated subset of row labels.
        #[arg(long, value_delimiter = ',')]
        rows: Option<Vec<String>>,
    },
    /// Eigenvalues of preconditioned systems as plot-ready CSV.
    Spectrum {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a property suite: lemmas, theorems, smw or all.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the L-shape mesh of a level as vertex, triangle and boundary CSVs.
    MeshDump {
        level: u32,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::UnknownTable(_) | Error::Json(_) | Error::CoefficientMismatch => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        Failure(code, e.to_string())
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

fn solve(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let text = read_input(config)?;
    // a manifest carries its resolved config
    let cfg = match serde_json::from_str::<Manifest>(&text) {
        Ok(m) => m.config,
        Err(_) => ExperimentConfig::from_json(&text)?,
    };
    cfg.validate()?;
    let rows = Runner::new().run(&cfg)?;
    match out.or_else(|| cfg.output.clone()) {
        Some(dir) => {
            let (csv, man) = write_outputs(&cfg, &rows, &dir)?;
            eprintln!("wrote {} rows to {} and {}", rows.len(), csv.display(), man.display());
        }
        None => write_rows_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn table(
    id: &str,
    out: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    levels: Option<Vec<u32>>,
    rows: Option<Vec<String>>,
) -> Result<(), Failure> {
    let mut opts = TableOptions {
        levels,
        rows,
        ..TableOptions::default()
    };
    opts.run.seeds = seeds.unwrap_or_else(default_seeds);
    let result = reproduce_table(id, &opts)?;
    println!("{}", result.render());
    if let Some(dir) = out {
        fs::create_dir_all(&dir).map_err(Error::from)?;
        result.write_csv(fs::File::create(dir.join(format!("table_{}.csv", result.id))).map_err(Error::from)?)?;
        write_rows_csv(&result.runs, fs::File::create(dir.join(format!("table_{}_runs.csv", result.id))).map_err(Error::from)?)?;
        write_json(&dir.join(format!("table_{}.json", result.id)), &result)?;
    }
    if result.all_within() {
        Ok(())
    } else {
        Err(Failure(
            EXIT_DIFF,
            format!("{} of {} cells outside tolerance", result.cells.len() - result.n_within(), result.cells.len()),
        ))
    }
}

fn spectrum(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = SpectrumConfig::from_json(&read_input(config)?)?;
    let cases = run_spectrum(&cfg)?;
    for c in &cases {
        eprintln!(
            "h=1/{} tau={:e} {:<6} rho={:.4} min_re={:.4} max|im|={:.4} C1={:.4}",
            1u64 << c.level,
            c.tau,
            c.precond.name(),
            c.rho,
            c.min_re,
            c.max_abs_im,
            c.c1
        );
    }
    match out.or_else(|| cfg.output.clone()) {
        Some(dir) => {
            fs::create_dir_all(&dir).map_err(Error::from)?;
            write_scatter(&cases, fs::File::create(dir.join("spectrum.csv")).map_err(Error::from)?)?;
            write_json(&dir.join("spectrum_summary.json"), &cases)?;
        }
        None => write_scatter(&cases, std::io::stdout().lock())?,
    }
    Ok(())
}

fn verify(suite: &str, seed: u64) -> Result<(), Failure> {
    let suite = Suite::parse(suite).ok_or_else(|| {
        Failure(EXIT_CONFIG, format!("unknown suite `{suite}` (expected lemmas, theorems, smw or all)"))
    })?;
    let opts = VerifyOptions {
        seed,
        ..VerifyOptions::default()
    };
    let report = run_suite(suite, &opts)?;
    println!("{report}");
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure(EXIT_DIFF, format!("{} of {} checks failed", report.checks.len() - report.n_passed(), report.checks.len())))
    }
}

fn mesh_dump(level: u32, out: &Path) -> Result<(), Failure> {
    if level > lumpmg::harness::config::MAX_LEVEL {
        return Err(Failure(EXIT_CONFIG, format!("level {level} above {}", lumpmg::harness::config::MAX_LEVEL)));
    }
    let mesh = Mesh::lshape(level);
    fs::create_dir_all(out).map_err(Error::from)?;
    let file = |name: &str| fs::File::create(out.join(format!("{name}_l{level}.csv"))).map_err(Error::from);
    mesh.write_vertices_csv(file("vertices")?).map_err(Error::from)?;
    mesh.write_triangles_csv(file("triangles")?).map_err(Error::from)?;
    mesh.write_boundary_csv(file("boundary")?).map_err(Error::from)?;
    eprintln!(
        "level {level}: {} vertices, {} triangles, h = {}",
        mesh.n_vertices(),
        mesh.triangles().len(),
        mesh.h()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Solve { config, out } => solve(&config, out),
        Cmd::Table {
            id,
            out,
            seeds,
            levels,
            rows,
        } => table(&id, out, seeds, levels, rows),
        Cmd::Spectrum { config, out } => spectrum(&config, out),
        Cmd::Verify { suite, seed } => verify(&suite, seed),
        Cmd::MeshDump { level, out } => mesh_dump(level, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
