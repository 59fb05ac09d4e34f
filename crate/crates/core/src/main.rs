use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use platecap::elastic::MaterialSpec;
use platecap::experiments::{self, observed_orders};
use platecap::inequality::hardy::HardyVariant;
use platecap::inequality::korn::{ClampMode, KornMesh, NormVariant};
use platecap::kirchhoff::{self, LoadSpec, PlateDomain};
use platecap::layer::{CapacityOptions, LayerMeshSpec, ThetaShape};

#[derive(Parser)]
#[command(name = "platecap", version, about = "Thin-plate asymptotics and elasticity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its result table.
    Run {
        kind: Kind,
        #[command(flatten)]
        settings: Settings,
        /// JSON file with default settings; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Validate the configuration and print the plan without computing.
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Hardy,
    KornSweep,
    Kirchhoff,
    FundsolVerify,
    AnsatzResidual,
    Capacity,
}

/// Every knob of every experiment. Unused ones are ignored by the others.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct Settings {
    /// Output file (stdout if absent).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap for sweeps (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// `iso:λ,μ` or a JSON material record.
    #[arg(long)]
    material: Option<String>,

    /// Hardy inequality: classical, log-outer, log-inner or shifted.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    /// Shift of the shifted Hardy inequality.
    #[arg(long)]
    shift: Option<f64>,

    /// Korn clamping: `supports` or `lateral`.
    #[arg(long)]
    mode: Option<ClampMode>,
    /// Number of point supports.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    supports: Option<usize>,
    /// Plate thicknesses, comma separated.
    #[arg(long = "h", value_delimiter = ',')]
    #[serde(rename = "h")]
    thickness: Option<Vec<f64>>,
    #[arg(long)]
    norm: Option<NormVariant>,
    /// Korn mesh as JSON, e.g. `{"layers":3,"core":0.5,"growth":1.3,"far":2.0}`.
    #[arg(long)]
    korn_mesh: Option<String>,

    /// Kirchhoff grid sizes (cells per side), comma separated.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Load for a single Kirchhoff solve: constant[:v], sine-bump or file:PATH.
    #[arg(long)]
    load: Option<String>,
    /// Point support for the Kirchhoff solve as `y1,y2`.
    #[arg(long, value_delimiter = ',')]
    point: Option<Vec<f64>>,

    /// Contour radii for the fundamental-solution checks.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Quadrature nodes on the unit circle.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,

    /// Largest monomial degree of the ansatz test fields.
    #[arg(long)]
    degree: Option<u16>,
    /// Extra random anisotropic materials for the ansatz check.
    #[arg(long)]
    random_materials: Option<usize>,

    /// Clamped region: disk[:R], ellipse:A,B or square:H.
    #[arg(long)]
    theta: Option<String>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    truncation: Option<f64>,
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long)]
    h_core: Option<f64>,
    #[arg(long)]
    growth: Option<f64>,
    #[arg(long)]
    h_far: Option<f64>,
    /// Fit annulus as fractions of T, `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    annulus: Option<Vec<f64>>,
    /// Where to write the decay profile CSV.
    #[arg(long)]
    decay_csv: Option<PathBuf>,
}

macro_rules! merge {
    ($flags:ident, $file:ident; $($f:ident),*) => {
        Settings { $($f: $flags.$f.or($file.$f)),* }
    };
}

impl Settings {
    fn over(self, file: Settings) -> Settings {
        let flags = self;
        merge!(flags, file; output, seed, jobs, material, variant, samples, shift, mode, supports, thickness, norm,
            korn_mesh, levels, load, point, radii, nodes, tolerance, degree, random_materials, theta, truncation, nz,
            h_core, growth, h_far, annulus, decay_csv)
    }

    fn material(&self) -> anyhow::Result<MaterialSpec> {
        Ok(match &self.material {
            Some(s) => MaterialSpec::parse(s)?,
            None => MaterialSpec::default(),
        })
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn jobs(&self) -> usize {
        self.jobs.unwrap_or(0)
    }
}

/// An experiment whose numbers came out but whose checks did not pass.
#[derive(Debug)]
struct AssertionFailed(String);

impl std::fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "assertion failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailed {}

/// A validated experiment, ready to run.
enum Plan {
    Hardy { variant: HardyVariant, samples: usize, seed: u64 },
    Korn { clamp: ClampMode, supports: usize, norm: NormVariant, hs: Vec<f64>, mesh: KornMesh, material: MaterialSpec },
    KirchhoffSolve { material: MaterialSpec, cells: usize, load: LoadSpec, point: Option<[f64; 2]> },
    KirchhoffConvergence { material: MaterialSpec, levels: Vec<usize> },
    Fundsol { material: MaterialSpec, radii: Vec<f64>, nodes: usize, tolerance: f64 },
    Ansatz { material: MaterialSpec, degree: u16, random: usize, seed: u64 },
    Capacity { material: MaterialSpec, theta: ThetaShape, mesh: LayerMeshSpec, opts: CapacityOptions, decay_csv: Option<PathBuf> },
}

fn plan(kind: Kind, s: &Settings) -> anyhow::Result<Plan> {
    let material = s.material()?;
    material.stiffness().context("material")?;
    Ok(match kind {
        Kind::Hardy => {
            let name = s.variant.as_deref().unwrap_or("classical");
            let variant = HardyVariant::by_name(name, s.shift.unwrap_or(0.1))?;
            variant.validate()?;
            Plan::Hardy { variant, samples: s.samples.unwrap_or(1000), seed: s.seed() }
        }
        Kind::KornSweep => {
            let clamp = s.mode.unwrap_or(ClampMode::SupportsOnly);
            let norm = s.norm.unwrap_or(match clamp {
                ClampMode::SupportsOnly => NormVariant::FreeEdge,
                ClampMode::LateralAndSupports => NormVariant::Weighted,
            });
            let hs = s.thickness.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025]);
            if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && *h < 0.5)) {
                bail!(platecap::error::Error::Config(format!("thicknesses must lie in (0, 1/2), got {hs:?}")));
            }
            let mesh = match &s.korn_mesh {
                Some(j) => serde_json::from_str(j).context("korn mesh")?,
                None => KornMesh::default(),
            };
            Plan::Korn { clamp, supports: s.supports.unwrap_or(1), norm, hs, mesh, material }
        }
        Kind::Kirchhoff => match &s.load {
            Some(load) => {
                let point = match s.point.as_deref() {
                    None => None,
                    Some([a, b]) => Some([*a, *b]),
                    Some(other) => bail!(platecap::error::Error::Config(format!("point needs two coordinates, got {other:?}"))),
                };
                let cells = s.levels.as_ref().and_then(|l| l.first().copied()).unwrap_or(64);
                Plan::KirchhoffSolve { material, cells, load: LoadSpec::parse(load)?, point }
            }
            None => Plan::KirchhoffConvergence { material, levels: s.levels.clone().unwrap_or_else(|| vec![16, 32, 64, 128]) },
        },
        Kind::FundsolVerify => Plan::Fundsol {
            material,
            radii: s.radii.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]),
            nodes: s.nodes.unwrap_or(512),
            tolerance: s.tolerance.unwrap_or(1e-6),
        },
        Kind::AnsatzResidual => {
            Plan::Ansatz { material, degree: s.degree.unwrap_or(6), random: s.random_materials.unwrap_or(0), seed: s.seed() }
        }
        Kind::Capacity => {
            let theta: ThetaShape = match &s.theta {
                Some(t) => t.parse()?,
                None => ThetaShape::default(),
            };
            let d = LayerMeshSpec::default();
            let mesh = LayerMeshSpec {
                t: s.truncation.unwrap_or(d.t),
                nz: s.nz.unwrap_or(d.nz),
                h_core: s.h_core.unwrap_or(d.h_core),
                growth: s.growth.unwrap_or(d.growth),
                h_far: s.h_far.unwrap_or(d.h_far),
            };
            let mut opts = CapacityOptions::default();
            if let Some(a) = &s.annulus {
                let [lo, hi] = a[..] else {
                    bail!(platecap::error::Error::Config(format!("annulus needs two fractions, got {a:?}")));
                };
                opts.annulus = [lo, hi];
            }
            Plan::Capacity { material, theta, mesh, opts, decay_csv: s.decay_csv.clone() }
        }
    })
}

fn describe(p: &Plan) -> String {
    match p {
        Plan::Hardy { variant, samples, seed } => {
            format!("hardy: {samples} random piecewise-linear functions for the {} inequality, seed {seed}", variant.name())
        }
        Plan::Korn { clamp, supports, norm, hs, mesh, material } => format!(
            "korn-sweep: {supports} support(s), clamp {clamp}, norm {norm}, h = {hs:?}, mesh {mesh:?}, material {material:?}"
        ),
        Plan::KirchhoffSolve { material, cells, load, point } => {
            format!("kirchhoff: {cells}x{cells} grid on the unit square, load {load:?}, point {point:?}, material {material:?}")
        }
        Plan::KirchhoffConvergence { material, levels } => {
            format!("kirchhoff: manufactured convergence on grids {levels:?}, material {material:?}")
        }
        Plan::Fundsol { material, radii, nodes, tolerance } => {
            format!("fundsol-verify: radii {radii:?}, {nodes} contour nodes, tolerance {tolerance:e}, material {material:?}")
        }
        Plan::Ansatz { material, degree, random, seed } => format!(
            "ansatz-residual: monomials up to degree {degree}, material {material:?} plus {random} random anisotropic (seed {seed})"
        ),
        Plan::Capacity { material, theta, mesh, opts, .. } => format!(
            "capacity: theta {theta}, mesh {mesh:?}, fit annulus {:?}·T, material {material:?}",
            opts.annulus
        ),
    }
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(p: Plan, out: Option<&Path>, jobs: usize) -> anyhow::Result<()> {
    match p {
        Plan::Hardy { variant, samples, seed } => {
            let (ratios, summary) = experiments::hardy_random_ratios(variant, samples, seed)?;
            let mut w = csv::Writer::from_writer(open_output(out)?);
            w.write_record(["sample", "ratio"])?;
            for (i, r) in ratios.iter().enumerate() {
                w.write_record([i.to_string(), format!("{r:.12e}")])?;
            }
            w.flush()?;
            eprintln!(
                "{}: max ratio {:.6} against bound {} (quadrature error {:.1e})",
                summary.variant, summary.max_ratio, summary.constant, summary.quadrature_error
            );
            if summary.max_ratio > summary.constant * (1.0 + 1e-9) {
                bail!(AssertionFailed(format!("ratio {} exceeds {}", summary.max_ratio, summary.constant)));
            }
        }
        Plan::Korn { clamp, supports, norm, hs, mesh, material } => {
            let a = material.stiffness()?;
            let sweep = experiments::with_jobs(jobs, || experiments::korn_sweep(clamp, supports, norm, &hs, mesh, &a))??;
            let mut w = csv::Writer::from_writer(open_output(out)?);
            w.write_record(["h", "K", "dofs", "mesh_cells", "eig_residual", "iterations"])?;
            for e in &sweep.estimates {
                w.write_record([
                    e.h.to_string(),
                    format!("{:.8e}", e.k),
                    e.dofs.to_string(),
                    e.mesh_cells.to_string(),
                    format!("{:.2e}", e.eig_residual),
                    e.iterations.to_string(),
                ])?;
            }
            w.flush()?;
            eprintln!(
                "K(h) ~ {:.5} + {:.5} ln(1/h), R^2 = {:.4}; relative variation {:.4}",
                sweep.log_fit.intercept, sweep.log_fit.slope, sweep.log_fit.r2, sweep.relative_variation
            );
        }
        Plan::KirchhoffSolve { material, cells, load, point } => {
            let a0 = material.stiffness()?.reduced();
            let mut d = PlateDomain::new(1.0, 1.0, cells, cells)?;
            if let Some(y) = point {
                d = d.with_point(y)?;
            }
            let g = load.sample(&d)?;
            let sol = kirchhoff::solve(&d, &a0, &g)?;
            sol.write_csv(&d, open_output(out)?)?;
        }
        Plan::KirchhoffConvergence { material, levels } => {
            let a0 = material.stiffness()?.reduced();
            let rows = experiments::with_jobs(jobs, || experiments::kirchhoff_convergence(&a0, &levels))??;
            let mut w = csv::Writer::from_writer(open_output(out)?);
            w.write_record(["cells", "spacing", "membrane_error", "bending_error", "point_value"])?;
            for r in &rows {
                w.write_record([
                    r.cells.to_string(),
                    r.spacing.to_string(),
                    format!("{:.6e}", r.membrane_error),
                    format!("{:.6e}", r.bending_error),
                    format!("{:.2e}", r.point_value),
                ])?;
            }
            w.flush()?;
            let om = observed_orders(&rows.iter().map(|r| r.membrane_error).collect::<Vec<_>>());
            let ob = observed_orders(&rows.iter().map(|r| r.bending_error).collect::<Vec<_>>());
            eprintln!("observed orders: membrane {om:.3?}, bending {ob:.3?}");
            if let Some(o) = om.iter().chain(&ob).find(|o| **o < 1.9) {
                bail!(AssertionFailed(format!("observed order {o:.3} below 1.9")));
            }
            if let Some(r) = rows.iter().find(|r| r.point_value > 1e-12) {
                bail!(AssertionFailed(format!("|w3| = {:e} at the support on the {} grid", r.point_value, r.cells)));
            }
        }
        Plan::Fundsol { material, radii, nodes, tolerance } => {
            let a0 = material.stiffness()?.reduced();
            let (_, v) = experiments::fundsol_verify(&a0, &radii, 1024, nodes)?;
            let mut o = open_output(out)?;
            serde_json::to_writer_pretty(&mut o, &v)?;
            writeln!(o)?;
            o.flush()?;
            if v.max_defect > tolerance {
                bail!(AssertionFailed(format!("contour identity defect {:e} above {tolerance:e}", v.max_defect)));
            }
        }
        Plan::Ansatz { material, degree, random, seed } => {
            let mut cases = vec![(serde_json::to_string(&material)?, experiments::exact_stiffness(&material)?)];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..random {
                cases.push((format!("random-{k}"), experiments::random_anisotropic_stiffness(&mut rng)?));
            }
            let summaries = experiments::with_jobs(jobs, || {
                use rayon::prelude::*;
                cases
                    .par_iter()
                    .map(|(label, a)| experiments::ansatz_residuals(a, degree, label))
                    .collect::<platecap::error::Result<Vec<_>>>()
            })??;
            let mut o = open_output(out)?;
            serde_json::to_writer_pretty(&mut o, &summaries)?;
            writeln!(o)?;
            o.flush()?;
            if let Some(s) = summaries.iter().find(|s| !s.passed()) {
                bail!(AssertionFailed(format!("{}: {}", s.material, s.first_failure.clone().unwrap_or_default())));
            }
        }
        Plan::Capacity { material, theta, mesh, opts, decay_csv } => {
            let run = experiments::with_jobs(jobs, || experiments::capacity_run(&material, &theta, mesh, &opts, 1024))??;
            let mut o = open_output(out)?;
            serde_json::to_writer_pretty(&mut o, &run.record)?;
            writeln!(o)?;
            o.flush()?;
            if let Some(path) = decay_csv {
                let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
                run.report.write_decay_csv(BufWriter::new(f))?;
            }
            eprintln!(
                "symmetry defect {:.4}, fit iterations {:?}, {} dofs",
                run.matrix.symmetry_defect, run.matrix.iterations, run.dofs
            );
        }
    }
    Ok(())
}

fn run(kind: Kind, flags: Settings, config: Option<PathBuf>, dry_run: bool) -> anyhow::Result<()> {
    let file = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| platecap::error::Error::Config(format!("{}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    let settings = flags.over(file);
    let p = plan(kind, &settings)?;
    if dry_run {
        println!("{}", describe(&p));
        println!("output: {}", settings.output.as_ref().map_or("stdout".into(), |p| p.display().to_string()));
        return Ok(());
    }
    execute(p, settings.output.as_deref(), settings.jobs())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use platecap::error::Error;
    if e.is::<AssertionFailed>() {
        return 1;
    }
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Config(_) | Error::InvalidInput(_) | Error::InvalidMaterial(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<serde_json::Error>() || cause.is::<io::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLATECAP_LOG", "error")).init();
    let cli = Cli::parse();
    let Command::Run { kind, settings, config, dry_run } = cli.command;
    match run(kind, settings, config, dry_run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
