//! Scenario CLI: run simulations, batch them, solve fields, re-check CSVs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use fwguide::analysis::CertificateReport;
use fwguide::error::Error;
use fwguide::scenario::{self, RunOutput, Scenario};
use fwguide::{fw, trajcsv};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "FWGUIDE_OUT_DIR";

const EXIT_CERT_FAILURE: u8 = 2;
const EXIT_COLLISION: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(
    name = "fwguide",
    version,
    about = "Bearing-only guidance to the Fermat-Weber point: simulate, verify, solve"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (preset name or TOML file); write CSV + report
    Run {
        /// Preset name (see `batch 'sim*'` for the list) or scenario file
        scenario: String,
        /// Output directory (default: $FWGUIDE_OUT_DIR, then ./out)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the integration step
        #[arg(long)]
        dt: Option<f64>,
        /// Override the time horizon in seconds
        #[arg(long)]
        horizon: Option<f64>,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several scenarios (presets, files, or glob patterns) in parallel
    Batch {
        /// Preset names, scenario files, or glob patterns over either
        patterns: Vec<String>,
        /// Worker threads (default: all cores)
        #[arg(long, short = 'j')]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the reference Fermat-Weber solution and optimality margins
    Solve {
        /// Preset name or scenario file
        scenario: String,
    },
    /// Re-run the certificate analysis on a recorded trajectory CSV
    Check {
        trajectory: PathBuf,
        /// Scenario the trajectory was produced from
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            dt,
            horizon,
            seed,
        } => cmd_run(&scenario, out, dt, horizon, seed),
        Command::Batch { patterns, jobs, out } => cmd_batch(&patterns, jobs, out),
        Command::Solve { scenario } => cmd_solve(&scenario),
        Command::Check {
            trajectory,
            scenario,
        } => cmd_check(&trajectory, &scenario),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { 1 })
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn apply_overrides(sc: &mut Scenario, dt: Option<f64>, horizon: Option<f64>, seed: Option<u64>) {
    if let Some(dt) = dt {
        sc.dt = dt;
    }
    if let Some(h) = horizon {
        sc.horizon = h;
    }
    if let Some(s) = seed {
        sc.seed = s;
    }
}

fn write_outputs(dir: &Path, sc: &Scenario, out: &RunOutput) -> fwguide::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{}.csv", sc.name));
    let report_path = dir.join(format!("{}.report.txt", sc.name));
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = BufWriter::new(file);
    trajcsv::write_csv(&mut w, &out.trajectory, sc).map_err(|e| Error::io(&csv_path, e))?;
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&report_path, out.report.to_string())
        .map_err(|e| Error::io(&report_path, e))?;
    Ok((csv_path, report_path))
}

fn exit_code_for(report: &CertificateReport) -> u8 {
    if !report.collision_free {
        EXIT_COLLISION
    } else if !report.pass {
        EXIT_CERT_FAILURE
    } else {
        0
    }
}

fn cmd_run(
    input: &str,
    out: Option<PathBuf>,
    dt: Option<f64>,
    horizon: Option<f64>,
    seed: Option<u64>,
) -> fwguide::Result<u8> {
    let mut sc = scenario::resolve(input)?;
    apply_overrides(&mut sc, dt, horizon, seed);
    let result = scenario::run_scenario(&sc)?;
    let dir = out_dir(out);
    let (csv_path, report_path) = write_outputs(&dir, &sc, &result)?;
    print!("{}", result.report);
    println!("trajectory: {}", csv_path.display());
    println!("report: {}", report_path.display());
    Ok(exit_code_for(&result.report))
}

/// Expands one batch argument into scenarios: exact preset, existing file,
/// or a glob over both preset names and the filesystem.
fn expand_pattern(pattern: &str) -> fwguide::Result<Vec<Scenario>> {
    if let Some(sc) = scenario::preset(pattern) {
        return Ok(vec![sc]);
    }
    let path = Path::new(pattern);
    if path.exists() {
        return Ok(vec![scenario::load_scenario(path)?]);
    }
    if pattern.contains(['*', '?', '[']) {
        let mut out = Vec::new();
        let matcher = glob::Pattern::new(pattern)
            .map_err(|e| Error::Schema(format!("bad pattern `{pattern}`: {e}")))?;
        for name in scenario::PRESET_NAMES {
            if matcher.matches(name) {
                out.push(scenario::preset(name).expect("preset names are valid"));
            }
        }
        for entry in glob::glob(pattern)
            .map_err(|e| Error::Schema(format!("bad pattern `{pattern}`: {e}")))?
        {
            let p = entry.map_err(|e| Error::Schema(e.to_string()))?;
            out.push(scenario::load_scenario(&p)?);
        }
        return Ok(out);
    }
    Err(Error::Schema(format!(
        "`{pattern}` is not a preset, a file, or a glob pattern"
    )))
}

fn cmd_batch(patterns: &[String], jobs: Option<usize>, out: Option<PathBuf>) -> fwguide::Result<u8> {
    let mut scenarios = Vec::new();
    for pattern in patterns {
        scenarios.extend(expand_pattern(pattern)?);
    }
    scenarios.sort_by(|a, b| a.name.cmp(&b.name));
    scenarios.dedup_by(|a, b| a.name == b.name);
    if scenarios.is_empty() {
        println!("no scenarios matched");
        return Ok(0);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Schema(e.to_string()))?;
    let dir = out_dir(out);

    let results: Vec<(String, fwguide::Result<(u8, &'static str)>)> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|sc| {
                let outcome = scenario::run_scenario(sc).and_then(|r| {
                    write_outputs(&dir, sc, &r)?;
                    let verdict = if !r.report.collision_free {
                        "COLLISION"
                    } else if r.report.pass {
                        "PASS"
                    } else {
                        "FAIL"
                    };
                    Ok((exit_code_for(&r.report), verdict))
                });
                (sc.name.clone(), outcome)
            })
            .collect()
    });

    let mut worst = 0u8;
    println!("{:<18} {:<24} result", "scenario", "law");
    for ((name, outcome), sc) in results.iter().zip(&scenarios) {
        match outcome {
            Ok((code, verdict)) => {
                println!("{name:<18} {:<24} {verdict}", sc.law.label());
                worst = worst.max(*code);
            }
            Err(e) => {
                println!("{name:<18} {:<24} ERROR: {e}", sc.law.label());
                worst = worst.max(if e.is_config() { EXIT_CONFIG } else { 1 });
            }
        }
    }
    Ok(worst)
}

fn cmd_solve(input: &str) -> fwguide::Result<u8> {
    let sc = scenario::resolve_lenient(input)?;
    sc.beacons.validate()?;
    let positions = &sc.beacons.positions;
    let weights = &sc.beacons.weights;

    println!(
        "scenario: {} (d={}, {} beacons)",
        sc.name,
        sc.dimension,
        positions.len()
    );
    let report = fw::existence_check(positions, weights).map_err(|e| Error::Physics(e.to_string()))?;
    println!("optimality margins at each beacon (all must be positive):");
    for (i, m) in report.margins.iter().enumerate() {
        println!("  beacon {i}: {m:.9}");
    }
    println!("interior_minimum: {}", report.interior_minimum);
    if !report.interior_minimum {
        println!("no interior optimum; skipping the solve");
        return Ok(EXIT_CERT_FAILURE);
    }
    let sol = fw::weiszfeld_default(positions, weights);
    println!("fermat_weber_point: {}", sol.point);
    println!("residual: {:e}", sol.residual);
    println!("iterations: {}", sol.iterations);
    println!("converged: {}", sol.converged);
    let grid = fw::brute_force_auto(positions, weights);
    println!(
        "grid_cross_check: {} (disagreement {:.3e})",
        grid.point,
        grid.point.dist(&sol.point)
    );
    Ok(if sol.converged { 0 } else { EXIT_CERT_FAILURE })
}

fn cmd_check(trajectory: &Path, scenario_path: &Path) -> fwguide::Result<u8> {
    let sc = scenario::load_scenario(scenario_path)?;
    let file = File::open(trajectory).map_err(|e| Error::io(trajectory, e))?;
    let traj = trajcsv::read_csv(BufReader::new(file), &sc)?;
    let report = fwguide::analysis::evaluate(&traj, &sc)?;
    print!("{report}");

    // a run stops early only on the collision guard
    let expected_end = (sc.horizon / sc.dt).round() * sc.dt;
    let truncated = traj.samples.last().map_or(true, |s| {
        s.t + sc.dt * sc.record_stride as f64 * 1.5 < expected_end
    });
    if truncated {
        println!("trajectory ends before the horizon: the run hit the collision guard");
        return Ok(EXIT_COLLISION);
    }
    Ok(exit_code_for(&report))
}
