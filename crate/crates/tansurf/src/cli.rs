//! Command-line interface: scene ingestion, dispatch, report
//! serialization, and mesh export.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, unreadable or
//! invalid scene files), 2 on numerical failures (integration breakdown,
//! evaluation domain errors, failed `check` thresholds).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curve::default_rmax;
use crate::genericity::{type_census, uniform_grid, CurveSampler};
use crate::geodesic::{integrate_geodesic_path, taylor_residuals, IntegrateOptions};
use crate::geometry::ConnectionField;
use crate::mesh;
use crate::scene::{load_scene, Scene, SceneError};
use crate::surface::{CharVectorMode, SurfaceConfig, TangentSurface};

#[derive(Parser, Debug)]
#[command(
    name = "tansurf",
    about = "Tangent surfaces of curves under affine connections: geodesics, covariant jets, and singularity classification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Classify the singular point (t0, 0) of the tangent surface.
    Classify {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        t0: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Classify n samples of [t0, t1] and refine ψ zero crossings.
    Scan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, num_args = 2, value_names = ["T0", "T1"], allow_negative_numbers = true)]
        t: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sample the tangent surface on a grid and export a mesh.
    Surface {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, num_args = 2, value_names = ["T0", "T1"], allow_negative_numbers = true)]
        t: Vec<f64>,
        #[arg(long, num_args = 2, value_names = ["S0", "S1"], allow_negative_numbers = true)]
        s: Vec<f64>,
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        ns: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = MeshFormat::Obj)]
        format: MeshFormat,
    },
    /// Integrate one geodesic and write sampled states as CSV.
    Geodesic {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        v: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        smax: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// The ∇-type of the scene's curve at t0.
    NablaType {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        t0: f64,
        /// Highest jet order probed (default: dim + 2).
        #[arg(long)]
        rmax: Option<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Monte-Carlo ∇-type census over random polynomial curves.
    Census {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        curves: u64,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Self-checks on a scene: Taylor remainder residuals, the σ = −s
    /// identity, and agreement of the characteristic-vector modes.
    Check {
        #[arg(long)]
        scene: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeshFormat {
    Obj,
    Csv,
}

enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        CliError::Usage(format!("scene: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io: {e}"))
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Run the CLI on `argv` (without the program name). Returns the exit code.
pub fn run<I>(argv: I) -> i32
where
    I: IntoIterator,
    I::Item: Into<String>,
{
    init_thread_pool();
    let args = std::iter::once("tansurf".to_string()).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path with code 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

/// Worker count override: TANSURF_THREADS (default: hardware parallelism).
fn init_thread_pool() {
    static INIT: OnceLock<()> = OnceLock::new();
    INIT.get_or_init(|| {
        if let Ok(n) = std::env::var("TANSURF_THREADS") {
            if let Ok(n) = n.parse::<usize>() {
                if n > 0 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Classify { scene, t0, tol, json } => classify_cmd(&scene, t0, tol, json.as_deref()),
        Cmd::Scan { scene, t, n, tol, json } => scan_cmd(&scene, t[0], t[1], n, tol, json.as_deref()),
        Cmd::Surface { scene, t, s, nt, ns, out, format } => {
            surface_cmd(&scene, t[0], t[1], s[0], s[1], nt, ns, &out, format)
        }
        Cmd::Geodesic { scene, x, v, smax, steps, out } => {
            geodesic_cmd(&scene, &x, &v, smax, steps, &out)
        }
        Cmd::NablaType { scene, t0, rmax, tol } => nabla_type_cmd(&scene, t0, rmax, tol),
        Cmd::Census { dim, degree, curves, grid, seed, tol, json } => {
            census_cmd(dim, degree, curves, grid, seed, tol, json.as_deref())
        }
        Cmd::Check { scene } => check_cmd(&scene),
    }
}

fn open_surface(scene: &Scene) -> Result<TangentSurface, CliError> {
    TangentSurface::new(
        scene.connection.clone(),
        scene.curve.clone(),
        SurfaceConfig::default(),
    )
    .map_err(numerical)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn classify_cmd(
    scene_path: &Path,
    t0: f64,
    tol: f64,
    json: Option<&Path>,
) -> Result<(), CliError> {
    let scene = load_scene(scene_path)?;
    let ts = open_surface(&scene)?;
    let report = ts.classify(t0, tol);
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{text}");
    if let Some(path) = json {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScanOutput {
    samples: Vec<crate::surface::SingularityReport>,
    zeros: Vec<ScanZero>,
}

#[derive(Serialize)]
struct ScanZero {
    t: f64,
    report: crate::surface::SingularityReport,
}

fn scan_cmd(
    scene_path: &Path,
    a: f64,
    b: f64,
    n: usize,
    tol: f64,
    json: Option<&Path>,
) -> Result<(), CliError> {
    if n < 2 {
        return Err(CliError::Usage("scan needs --n of at least 2".into()));
    }
    let scene = load_scene(scene_path)?;
    let ts = open_surface(&scene)?;
    let scan = ts.scan(a, b, n, tol).map_err(numerical)?;
    let mut counts = std::collections::BTreeMap::new();
    for r in &scan.reports {
        *counts.entry(format!("{:?}", r.status)).or_insert(0usize) += 1;
    }
    for (status, count) in &counts {
        println!("{status}: {count} samples");
    }
    for z in &scan.zeros {
        println!("psi zero at t = {:.12e} -> {:?}", z.t, z.report.status);
    }
    if let Some(path) = json {
        let out = ScanOutput {
            samples: scan.reports.clone(),
            zeros: scan
                .zeros
                .iter()
                .map(|z| ScanZero { t: z.t, report: z.report.clone() })
                .collect(),
        };
        write_json(path, &out)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn surface_cmd(
    scene_path: &Path,
    t0: f64,
    t1: f64,
    s0: f64,
    s1: f64,
    nt: usize,
    ns: usize,
    out: &Path,
    format: MeshFormat,
) -> Result<(), CliError> {
    if nt < 2 || ns < 2 {
        return Err(CliError::Usage("surface needs --nt and --ns of at least 2".into()));
    }
    let scene = load_scene(scene_path)?;
    let ts = open_surface(&scene)?;
    let t_grid = uniform_grid(t0, t1, nt);
    let s_grid = uniform_grid(s0, s1, ns);
    let patch = ts.patch(&t_grid, &s_grid).map_err(numerical)?;
    let mut w = BufWriter::new(File::create(out)?);
    let effective = if scene.dim == 3 { format } else { MeshFormat::Csv };
    match effective {
        MeshFormat::Obj => mesh::write_obj(&patch, &mut w)?,
        MeshFormat::Csv => {
            if format == MeshFormat::Obj {
                eprintln!("note: OBJ export needs a 3-dimensional chart; writing CSV instead");
            }
            mesh::write_patch_csv(&patch, &mut w)?;
        }
    }
    println!(
        "wrote {} ({} x {} samples)",
        out.display(),
        t_grid.len(),
        s_grid.len()
    );
    Ok(())
}

fn geodesic_cmd(
    scene_path: &Path,
    x: &[f64],
    v: &[f64],
    smax: f64,
    steps: usize,
    out: &Path,
) -> Result<(), CliError> {
    let scene = load_scene(scene_path)?;
    let m = scene.dim;
    if x.len() != m || v.len() != m {
        return Err(CliError::Usage(format!(
            "--x and --v need {m} components for this scene"
        )));
    }
    if steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    let path = integrate_geodesic_path(&scene.connection, x, v, smax, IntegrateOptions::default())
        .map_err(numerical)?;
    let states: Vec<_> = (0..=steps)
        .map(|i| path.sample(smax * i as f64 / steps as f64))
        .collect();
    let mut w = BufWriter::new(File::create(out)?);
    mesh::write_geodesic_csv(&states, &mut w)?;
    println!("wrote {} ({} states)", out.display(), states.len());
    Ok(())
}

fn nabla_type_cmd(
    scene_path: &Path,
    t0: f64,
    rmax: Option<usize>,
    tol: f64,
) -> Result<(), CliError> {
    let scene = load_scene(scene_path)?;
    let rmax = rmax.unwrap_or_else(|| default_rmax(scene.dim));
    let ty = crate::curve::nabla_type(&scene.connection, &scene.curve, t0, rmax, tol)
        .map_err(numerical)?;
    let text = serde_json::to_string(&ty).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn census_cmd(
    dim: usize,
    degree: usize,
    curves: u64,
    grid: usize,
    seed: u64,
    tol: f64,
    json: Option<&Path>,
) -> Result<(), CliError> {
    if dim < 2 {
        return Err(CliError::Usage("census needs --dim of at least 2".into()));
    }
    if degree < dim + 1 {
        return Err(CliError::Usage(format!(
            "census needs --degree of at least dim + 1 = {}",
            dim + 1
        )));
    }
    if grid < 2 {
        return Err(CliError::Usage("census needs --grid of at least 2".into()));
    }
    let conn = ConnectionField::euclidean(dim);
    let sampler = CurveSampler::new(dim, degree, seed);
    let t_grid = uniform_grid(-1.0, 1.0, grid);
    let census = type_census(&conn, &sampler, curves, &t_grid, tol).map_err(numerical)?;
    println!("# {}", census.header);
    println!(
        "census: dim {} degree {} curves {} grid {} seed {}",
        dim, degree, curves, grid, seed
    );
    for (ty, count) in &census.histogram {
        println!("{ty}: {count}");
    }
    println!("violations: {}", census.violations.len());
    for v in census.violations.iter().take(20) {
        println!(
            "  curve {} t={} type {:?} complete={}",
            v.curve_index, v.t, v.a, v.complete
        );
    }
    if let Some(path) = json {
        write_json(path, &census)?;
    }
    Ok(())
}

// ---- check subcommand ----------------------------------------------------

const CHECK_TAYLOR_TOL: f64 = 1e-4;
const CHECK_SIGMA_TOL: f64 = 1e-6;
const CHECK_MODE_TOL: f64 = 1e-9;

fn check_cmd(scene_path: &Path) -> Result<(), CliError> {
    let scene = load_scene(scene_path)?;
    let ts = open_surface(&scene)?;
    let (a, b) = scene.curve.domain();
    let inner = |f: f64| a + (b - a) * f;
    let mut failures = 0usize;

    // Taylor remainder residuals at on-curve data and perturbed points
    let mut worst_taylor: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for i in 0..5 {
        let t = inner(0.15 + 0.175 * i as f64);
        let jet = crate::curve::covariant_jet(&scene.connection, &scene.curve, t, 1)
            .map_err(numerical)?;
        let mut x = jet.raw_deriv(0).to_vec();
        let mut v = jet.raw_deriv(1).to_vec();
        if i >= 3 {
            for xi in x.iter_mut() {
                *xi += rng.random_range(-0.05..0.05);
            }
            for vi in v.iter_mut() {
                *vi += rng.random_range(-0.05..0.05);
            }
        }
        let r = taylor_residuals(&scene.connection, &x, &v).map_err(numerical)?;
        worst_taylor = worst_taylor.max(r.max());
    }
    failures += report_line("taylor-residuals", worst_taylor, CHECK_TAYLOR_TOL);

    // σ identity at sampled (t, s), |s| in [0.05, 0.5]
    let mut worst_sigma: f64 = 0.0;
    for _ in 0..20 {
        let t = inner(rng.random_range(0.1..0.9));
        let mag = rng.random_range(0.05..0.5);
        let s = if rng.random::<bool>() { mag } else { -mag };
        let sigma = ts.sigma(t, s).map_err(numerical)?;
        worst_sigma = worst_sigma.max((sigma + s).abs());
    }
    failures += report_line("sigma-identity", worst_sigma, CHECK_SIGMA_TOL);

    // characteristic-vector mode agreement (meaningful when torsion free)
    if scene.connection.is_torsion_free_symbolic() {
        let mut worst_mode: f64 = 0.0;
        for i in 0..7 {
            let t = inner(0.1 + 0.8 * i as f64 / 6.0);
            let g = ts
                .characteristic_vector(t, CharVectorMode::General)
                .map_err(numerical)?;
            let tf = ts
                .characteristic_vector(t, CharVectorMode::TorsionFree)
                .map_err(numerical)?;
            let scale = g.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
            let diff = g
                .iter()
                .zip(tf.iter())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0f64, f64::max);
            worst_mode = worst_mode.max(diff / scale);
        }
        failures += report_line("mode-agreement", worst_mode, CHECK_MODE_TOL);
    } else {
        println!("mode-agreement: skipped (connection has torsion)");
    }

    if failures > 0 {
        return Err(CliError::Numerical(format!(
            "{failures} check(s) exceeded their tolerance"
        )));
    }
    println!("all checks passed");
    Ok(())
}

fn report_line(name: &str, worst: f64, tol: f64) -> usize {
    let ok = worst <= tol;
    println!(
        "{name}: max residual {worst:.3e} (tolerance {tol:.1e}) {}",
        if ok { "PASS" } else { "FAIL" }
    );
    usize::from(!ok)
}
