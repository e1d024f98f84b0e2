//! Orchestration for the `nkflow` binary: config parsing, subcommand
//! dispatch, and deterministic file emission.
//!
//! Exit codes: 0 success, 1 usage error, 2 numeric failure (partial outputs
//! are still written), 3 assertion / verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use nkflow_core::diagnostics::{keller_maslov, IndexReport, MU_CALIBRATION_ID};
use nkflow_core::euclid::{detect_umbilics, normal_congruence, principal_index, SurfacePatch};
use nkflow_core::flow::{make_boundary_surface, run, BoundaryMode, FlowConfig, TerminationReason};
use nkflow_core::grid::{PolarGrid, SectionField};
use nkflow_core::io;
use nkflow_core::onm::{check_onm, onm_normal_form, PseudoOrthogonalMatrix};
use nkflow_core::{NkError, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "nkflow", version, about = "Neutral Kähler flow laboratory on the space of oriented lines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the mean curvature flow from a config file
    Flow {
        #[arg(long)]
        config: PathBuf,
        /// Lagrangian boundary surface file (default: the zero section)
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Umbilic scan, principal indices and index relation for a surface file
    AnalyzeSurface {
        surface: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        c0: f64,
        /// polar grid radius for the normal congruence
        #[arg(long, default_value_t = 0.15)]
        grid_radius: f64,
        #[arg(long, default_value = "index_report.txt")]
        out: PathBuf,
    },
    /// Run the built-in identity and oracle suite
    Verify,
    /// Reduce a pseudo-orthogonal matrix to its gauge normal form
    OnmNormalForm {
        matrix: PathBuf,
        /// timelike dimension m (n is inferred from the matrix size)
        #[arg(long, default_value_t = 2)]
        m: usize,
    },
    /// Index relation check for a surface file, written to index_report.txt
    Index {
        surface: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        c0: f64,
        #[arg(long, default_value_t = 0.15)]
        grid_radius: f64,
        #[arg(long, default_value = "index_report.txt")]
        out: PathBuf,
    },
    /// Emit per-column (s, value) data files from a trajectory.csv
    Report {
        trajectory: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

/// Parse a `key = value` flow config file with the fixed key set.
pub fn parse_config(path: &Path) -> Result<FlowConfig> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<FlowConfig> {
    let mut cfg = FlowConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let bad = |msg: String| NkError::ConfigError { line: lineno, msg };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected `key = value`".into()))?;
        let key = key.trim();
        let value = value.trim();
        let fval = || value.parse::<f64>().map_err(|_| bad(format!("bad number `{value}`")));
        let uval = || value.parse::<usize>().map_err(|_| bad(format!("bad integer `{value}`")));
        match key {
            "c0" => cfg.c0 = fval()?,
            "epsilon" => cfg.epsilon = fval()?,
            "r0" => cfg.r0 = fval()?,
            "n_r" => cfg.n_r = uval()?,
            "n_theta" => cfg.n_theta = uval()?,
            "cfl" => cfg.cfl = fval()?,
            "s_max" => cfg.s_max = fval()?,
            "sigma_tol" => cfg.sigma_tol = fval()?,
            "boundary_mode" => {
                cfg.boundary_mode = match value {
                    "fixed_dirichlet" => BoundaryMode::FixedDirichlet,
                    "paper_neumann" => BoundaryMode::PaperNeumann,
                    other => return Err(bad(format!("unknown boundary_mode `{other}`"))),
                }
            }
            "delta_pos" => cfg.delta_pos = fval()?,
            "snapshot_every" => cfg.snapshot_every = uval()?,
            "out_dir" => cfg.out_dir = value.to_string(),
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    validate_config(&cfg)?;
    Ok(cfg)
}

fn validate_config(cfg: &FlowConfig) -> Result<()> {
    let bad = |msg: String| NkError::ConfigError { line: 0, msg };
    if !(cfg.c0 > 0.0) {
        return Err(bad("c0 must be positive".into()));
    }
    if cfg.epsilon < 0.0 {
        return Err(bad("epsilon must be non-negative".into()));
    }
    if !(cfg.r0 > 0.0 && cfg.r0 < 1.0) {
        return Err(bad("r0 must lie in (0, 1)".into()));
    }
    if cfg.r0 >= 0.25 {
        eprintln!(
            "warning: r0 = {} exceeds the quarter-radius guidance; the compactness constant degrades",
            cfg.r0
        );
    }
    if cfg.n_r < 8 || cfg.n_theta < 16 || cfg.n_theta % 2 != 0 {
        return Err(bad("grid must have n_r >= 8 and even n_theta >= 16".into()));
    }
    if !(cfg.cfl > 0.0 && cfg.s_max > 0.0 && cfg.sigma_tol > 0.0 && cfg.delta_pos > 0.0) {
        return Err(bad("cfl, s_max, sigma_tol, delta_pos must be positive".into()));
    }
    if cfg.snapshot_every == 0 {
        return Err(bad("snapshot_every must be at least 1".into()));
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn run_flow(config: &Path, surface: Option<&Path>) -> Result<i32> {
    let cfg = parse_config(config)?;
    let grid = PolarGrid::new(cfg.n_r, cfg.n_theta, cfg.r0)?;
    let sigma_surface = match surface {
        None => SectionField::zero(grid),
        Some(path) => {
            let patch = io::parse_surface(&fs::read_to_string(path)?)?;
            normal_congruence(&patch, &grid)?.0
        }
    };
    let start = unix_now();
    let outcome = run(&cfg, &sigma_surface)?;
    let end = unix_now();

    fs::create_dir_all(&cfg.out_dir)?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    let mut files: Vec<(String, String)> = Vec::new();

    let csv = io::write_trajectory_csv(&outcome.trajectory);
    fs::write(out_dir.join("trajectory.csv"), &csv)?;
    files.push(("trajectory.csv".into(), sha256_hex(csv.as_bytes())));

    for (step_no, s, section) in &outcome.snapshots {
        let name = format!("nk-snapshot-{step_no:06}.txt");
        let text = io::write_snapshot(section, *s)?;
        fs::write(out_dir.join(&name), &text)?;
        files.push((name, sha256_hex(text.as_bytes())));
    }

    let mut manifest = String::new();
    manifest.push_str(&format!("code_version = {}\n", env!("CARGO_PKG_VERSION")));
    manifest.push_str(&format!("config.c0 = {}\n", cfg.c0));
    manifest.push_str(&format!("config.epsilon = {}\n", cfg.epsilon));
    manifest.push_str(&format!("config.r0 = {}\n", cfg.r0));
    manifest.push_str(&format!("config.n_r = {}\n", cfg.n_r));
    manifest.push_str(&format!("config.n_theta = {}\n", cfg.n_theta));
    manifest.push_str(&format!("config.cfl = {}\n", cfg.cfl));
    manifest.push_str(&format!("config.s_max = {}\n", cfg.s_max));
    manifest.push_str(&format!("config.sigma_tol = {}\n", cfg.sigma_tol));
    manifest.push_str(&format!("config.boundary_mode = {}\n", cfg.boundary_mode));
    manifest.push_str(&format!("config.delta_pos = {}\n", cfg.delta_pos));
    manifest.push_str(&format!("config.snapshot_every = {}\n", cfg.snapshot_every));
    manifest.push_str(&format!("config.out_dir = {}\n", cfg.out_dir));
    manifest.push_str(&format!("start_unix = {start}\n"));
    manifest.push_str(&format!("end_unix = {end}\n"));
    manifest.push_str(&format!("termination = {}\n", outcome.termination));
    manifest.push_str(&format!("steps = {}\n", outcome.final_state.step_count));
    for (name, hash) in &files {
        manifest.push_str(&format!("file.{name} = {hash}\n"));
    }
    fs::write(out_dir.join("run.manifest"), manifest)?;

    println!(
        "flow finished: {} after {} steps at s = {:.6e}",
        outcome.termination, outcome.final_state.step_count, outcome.final_state.s
    );
    match outcome.termination {
        TerminationReason::Failed(_) => Ok(EXIT_NUMERIC),
        _ => Ok(EXIT_OK),
    }
}

/// Index data for the umbilic nearest the chart origin, plus the Maslov
/// index of the twisted congruence when the umbilic sits at `ξ ≈ 0`.
fn surface_indices(
    patch: &SurfacePatch,
    c0: f64,
    grid_radius: f64,
) -> Result<(Vec<(f64, f64, f64)>, Option<IndexReport>)> {
    let scan = detect_umbilics(patch)?;
    if scan.non_isolated {
        return Err(NkError::NonIsolatedUmbilics);
    }
    let mut indices = Vec::new();
    for report in &scan.reports {
        let dist = (report.u * report.u + report.v * report.v).sqrt();
        let loop_radius = pick_loop_radius(patch, report.u, report.v);
        let idx = principal_index(patch, report.u, report.v, loop_radius)?;
        indices.push((report.u, report.v, idx));
        let _ = dist;
    }
    // index relation for the umbilic at the chart origin, if there is one
    let central = scan
        .reports
        .iter()
        .map(|r| (r.u * r.u + r.v * r.v).sqrt())
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let relation = match central {
        Some((pos, dist)) if dist < 1e-3 => {
            let report = &scan.reports[pos];
            let loop_radius = pick_loop_radius(patch, report.u, report.v);
            let index = principal_index(patch, report.u, report.v, loop_radius)?;
            let n_r = 17;
            let grid = PolarGrid::new(n_r, 32, grid_radius)?;
            let (section, _) = normal_congruence(patch, &grid)?;
            let b = make_boundary_surface(&section, c0)?;
            let mu = keller_maslov(&b, n_r / 2)?;
            let mut rep = IndexReport::new(index, mu);
            rep.umbilic_u = report.u;
            rep.umbilic_v = report.v;
            rep.loop_radius = loop_radius;
            Some(rep)
        }
        _ => None,
    };
    Ok((indices, relation))
}

fn pick_loop_radius(patch: &SurfacePatch, u: f64, v: f64) -> f64 {
    let dom = patch.domain();
    let edge = match dom {
        nkflow_core::euclid::Domain::Disc { radius } => radius - (u * u + v * v).sqrt(),
        nkflow_core::euclid::Domain::Rect { u0, u1, v0, v1 } => {
            (u - u0).min(u1 - u).min(v - v0).min(v1 - v)
        }
    };
    0.5 * edge.max(1e-3)
}

fn write_index_report(path: &Path, rep: &IndexReport) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("I = {}\n", rep.index));
    text.push_str(&format!("mu = {}\n", rep.mu));
    text.push_str(&format!("residual = {}\n", rep.relation_residual));
    text.push_str(&format!("calibration_id = {MU_CALIBRATION_ID}\n"));
    fs::write(path, text)?;
    Ok(())
}

fn run_analyze(surface: &Path, c0: f64, grid_radius: f64, out: &Path) -> Result<i32> {
    let patch = io::parse_surface(&fs::read_to_string(surface)?)?;
    match surface_indices(&patch, c0, grid_radius) {
        Err(NkError::NonIsolatedUmbilics) => {
            println!("surface is totally umbilic on this patch (non-isolated umbilics)");
            Ok(EXIT_OK)
        }
        Err(e) => Err(e),
        Ok((indices, relation)) => {
            if indices.is_empty() {
                println!("no umbilic points detected on the patch");
            }
            for (u, v, idx) in &indices {
                println!("umbilic at (u, v) = ({u:.6}, {v:.6}): index I = {idx}");
            }
            if let Some(rep) = relation {
                println!(
                    "index relation: I = {}, mu = {}, I + mu/2 - 2 = {}",
                    rep.index, rep.mu, rep.relation_residual
                );
                write_index_report(out, &rep)?;
                println!("wrote {}", out.display());
                if rep.relation_residual != 0.0 {
                    return Ok(EXIT_ASSERTION);
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn run_verify() -> Result<i32> {
    let results = nkflow_core::verify::run_suite()?;
    let mut all_ok = true;
    println!("{:<34} {:>12} {:>10}  status", "check", "residual", "tol");
    for r in &results {
        let ok = r.passed();
        all_ok &= ok;
        println!(
            "{:<34} {:>12.3e} {:>10.1e}  {}",
            r.name,
            r.residual,
            r.tolerance,
            if ok { "pass" } else { "FAIL" }
        );
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_ASSERTION })
}

fn run_onm(matrix: &Path, m: usize) -> Result<i32> {
    let mat = io::read_matrix(&fs::read_to_string(matrix)?)?;
    let size = mat.nrows();
    if m >= size {
        return Err(NkError::DimensionMismatch { expected: size, got: m });
    }
    let n = size - m;
    let (ok, residuals) = check_onm(&mat, n, m)?;
    println!("O({n},{m}) membership: {} (residuals {:.3e} {:.3e} {:.3e})", ok, residuals[0], residuals[1], residuals[2]);
    let pom = PseudoOrthogonalMatrix::new(n, m, mat.clone())?;
    let nf = onm_normal_form(&pom)?;
    println!("D1 = {:?}", nf.d1.as_slice());
    println!("D2 = {:?}", nf.d2.as_slice());
    println!("D3 = {:?}", nf.d3.as_slice());
    println!("D4 = {:?}", nf.d4.as_slice());
    println!("A =\n{}", io::write_matrix(&nf.a));
    let rec_err = (nf.reconstruct() - &mat).norm();
    let (n1, n2) = nf.d_norms();
    println!("reconstruction error = {rec_err:.3e}");
    println!("|D1|^2 = {n1:.12}, |D2|^2 = {n2:.12}");
    Ok(EXIT_OK)
}

fn run_report(trajectory: &Path, out_dir: &Path) -> Result<i32> {
    let text = fs::read_to_string(trajectory)?;
    let records = io::read_trajectory_csv(&text)?;
    fs::create_dir_all(out_dir)?;
    let columns = io::trajectory_columns();
    for (ci, name) in columns.iter().enumerate().skip(1) {
        let mut data = String::new();
        for rec in &records {
            let row = [
                rec.s,
                rec.area_g,
                rec.sup_abs_sigma,
                rec.sup_sigma2_over_lambda2,
                rec.sup_sigma2_over_margin,
                rec.compactness_value,
                rec.min_margin,
                rec.boundary_min_radius,
                rec.tilt_max,
                rec.curvature_k,
            ];
            data.push_str(&format!("{:.16e} {:.16e}\n", rec.s, row[ci]));
        }
        fs::write(out_dir.join(format!("trajectory_{name}.dat")), data)?;
    }
    println!("wrote {} data files to {}", columns.len() - 1, out_dir.display());
    Ok(EXIT_OK)
}

/// Dispatch a parsed command; errors map to exit codes in [`main_with_args`].
pub fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Flow { config, surface } => run_flow(&config, surface.as_deref()),
        Command::AnalyzeSurface { surface, c0, grid_radius, out } => {
            run_analyze(&surface, c0, grid_radius, &out)
        }
        Command::Verify => run_verify(),
        Command::OnmNormalForm { matrix, m } => run_onm(&matrix, m),
        Command::Index { surface, c0, grid_radius, out } => {
            run_analyze(&surface, c0, grid_radius, &out)
        }
        Command::Report { trajectory, out_dir } => run_report(&trajectory, &out_dir),
    }
}

/// Entry point used by both the binary and the integration tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successful exits
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            match e {
                NkError::ConfigError { .. } | NkError::FormatError { .. } | NkError::Io(_) => {
                    EXIT_USAGE
                }
                _ => EXIT_NUMERIC,
            }
        }
        Err(_) => {
            eprintln!("error: internal panic");
            EXIT_NUMERIC
        }
    }
}
