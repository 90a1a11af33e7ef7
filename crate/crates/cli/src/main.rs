mod charts;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use semialg::algebra::{DifferentialForm, FormDocument};
use semialg::integrate::{compare_triangulations, fundamental_chain, integrate_chain, stokes_residual, DEFAULT_DEGREE};
use semialg::measure::grid_measure_sequence;
use semialg::mesh::{orient_fundamental, MeshFile};
use semialg::panelbeat::demos::{run_demo, DemoOptions, Example};
use semialg::panelbeat::{beat_until_certified, default_schedule, C1Report, CertifyOptions, PanelBeatError};
use semialg::report::to_json;
use semialg::saset::{SaSet, SetDocument};
use semialg::triangulate::{triangulate_with, TriangulateOptions, TriangulationBundle};

use charts::{expression_map, stratum_tube, ChartsDocument};

const MAX_DEPTH: u32 = 10;
const MAX_QUAD_DEGREE: u32 = 20;

#[derive(Parser)]
#[command(name = "semialg", version, about = "Triangulate semialgebraic sets, panel-beat realization maps, integrate forms")]
struct Cli {
    /// Also write the report as JSON to this path.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Seed for every random choice (vertex jitter, probe directions).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Triangulate a set and write the mesh.
    Triangulate {
        set: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Mesh output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a form over a triangulated set.
    Integrate {
        set: PathBuf,
        form: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = DEFAULT_DEGREE)]
        quad_degree: u32,
        /// Expected value; with --tol, a mismatch exits with status 1.
        #[arg(long)]
        expect: Option<f64>,
        #[arg(long, default_value_t = 5e-3)]
        tol: f64,
    },
    /// Compare both sides of Stokes' formula.
    Stokes {
        set: PathBuf,
        form: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = DEFAULT_DEGREE)]
        quad_degree: u32,
        /// Residual above this exits with status 1.
        #[arg(long, default_value_t = 5e-3)]
        tol: f64,
    },
    /// Integrate over two offset triangulations and their common refinement.
    Compare {
        set: PathBuf,
        form: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Grid offset of the second triangulation, per axis, in cell widths.
        #[arg(long, value_delimiter = ',', default_value = "0.37,0.21")]
        shift2: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_DEGREE)]
        quad_degree: u32,
        /// Skip the common refinement.
        #[arg(long)]
        no_refine: bool,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
    },
    /// Panel beating: canonical demos or user bundles.
    Panelbeat {
        #[command(subcommand)]
        action: PanelbeatCommand,
    },
    /// Grid-count measure estimates.
    Volume {
        set: PathBuf,
        /// Dimension of the measure.
        #[arg(long)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        n: Vec<usize>,
    },
}

#[derive(Subcommand)]
enum PanelbeatCommand {
    /// Run one of the canonical examples.
    Demo {
        #[arg(long, value_enum)]
        example: DemoExample,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Fixed exponent instead of the one selected from the growth fit.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        margin: f64,
    },
    /// Beat a user map around the given strata of a mesh and certify it.
    Certify {
        mesh: PathBuf,
        charts: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoExample {
    Sqrt,
    Cusp,
    Abs,
}

#[derive(Args)]
struct GridArgs {
    /// Refinement depth (2^depth cells per axis).
    #[arg(long, default_value_t = 5)]
    depth: u32,
    /// Grid offset per axis, in cell widths.
    #[arg(long, value_delimiter = ',')]
    shift: Vec<f64>,
}

/// Exit status of a completed run.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Triangulate { set, grid, out } => {
            let (set, doc) = read_set(set)?;
            let b = build(&set, &doc, grid)?;
            let mu = orient_fundamental(&b.complex, b.dim()).ok();
            let mesh = MeshFile::new(b.complex.clone(), mu).to_text();
            let report = TriangulationSummary::new(&b);
            match out {
                Some(p) => {
                    fs::write(p, mesh).with_context(|| format!("writing {}", p.display()))?;
                    print!("{}", to_json("triangulate", &report)?);
                }
                None => print!("{mesh}"),
            }
            write_json(cli, "triangulate", &report)?;
            Ok(Outcome::Pass)
        }
        Command::Integrate { set, form, grid, quad_degree, expect, tol } => {
            check_degree(*quad_degree)?;
            check_tol(*tol)?;
            let (set, doc) = read_set(set)?;
            let form = read_form(form)?;
            let b = build(&set, &doc, grid)?;
            let mu = fundamental_chain(&b)?;
            let r = integrate_chain(&form, &b, &mu, *quad_degree)?;
            println!("value           {:.12}", r.value);
            println!("error estimate  {:.3e}", r.error_estimate);
            println!("simplices       {}", r.contributions.len());
            if r.finite_difference_simplices > 0 {
                println!("fd jacobians    {}", r.finite_difference_simplices);
            }
            let pass = expect.is_none_or(|v| (r.value - v).abs() <= *tol);
            if let Some(v) = expect {
                println!("expected        {v:.12} ({})", verdict(pass));
            }
            write_json(cli, "integrate", &r)?;
            Ok(outcome(pass))
        }
        Command::Stokes { set, form, grid, quad_degree, tol } => {
            check_degree(*quad_degree)?;
            check_tol(*tol)?;
            let (set, doc) = read_set(set)?;
            let form = read_form(form)?;
            let b = build(&set, &doc, grid)?;
            let mu = fundamental_chain(&b)?;
            let r = stokes_residual(&form, &b, &mu, *quad_degree)?;
            let pass = r.residual <= *tol;
            println!("int d(omega)       {:.12}", r.interior.value);
            println!("int_boundary omega {:.12}", r.boundary.value);
            println!("residual           {:.3e} ({})", r.residual, verdict(pass));
            write_json(cli, "stokes", &r)?;
            Ok(outcome(pass))
        }
        Command::Compare { set, form, grid, shift2, quad_degree, no_refine, tol } => {
            check_degree(*quad_degree)?;
            check_tol(*tol)?;
            let (set, doc) = read_set(set)?;
            let form = read_form(form)?;
            let b1 = build(&set, &doc, grid)?;
            let b2 = build(
                &set,
                &doc,
                &GridArgs {
                    depth: grid.depth,
                    shift: shift2.clone(),
                },
            )?;
            let seed = (!no_refine).then_some(cli.seed);
            let r = compare_triangulations(&form, &b1, &b2, *quad_degree, seed)?;
            let pass = r.spread <= *tol;
            println!("first   {:.12}", r.first.value);
            println!("second  {:.12}", r.second.value);
            if let Some(c) = &r.refined {
                println!("refined {:.12}", c.value);
            }
            println!("spread  {:.3e} ({})", r.spread, verdict(pass));
            write_json(cli, "compare", &r)?;
            Ok(outcome(pass))
        }
        Command::Panelbeat { action } => match action {
            PanelbeatCommand::Demo { example, tol, r, margin } => {
                check_tol(*tol)?;
                let example = match example {
                    DemoExample::Sqrt => Example::Sqrt,
                    DemoExample::Cusp => Example::Cusp,
                    DemoExample::Abs => Example::Abs,
                };
                let opts = DemoOptions {
                    margin: *margin,
                    r: *r,
                    certify: CertifyOptions {
                        tol: *tol,
                        seed: cli.seed,
                        ..Default::default()
                    },
                    schedule: default_schedule(),
                };
                let rep = run_demo(example, &opts)?;
                println!("example {}", example.name());
                println!(
                    "alpha   {:.4} +- {:.4}  (r = {:.4}, t0 = {})",
                    rep.estimate.alpha, rep.estimate.half_width, rep.eta.r, rep.eta.t0
                );
                print!("{}", describe_c1("beaten", &rep.beaten));
                print!("{}", describe_c1("unbeaten", &rep.unbeaten));
                write_json(cli, "panelbeat_demo", &rep)?;
                Ok(outcome(rep.beaten.pass))
            }
            PanelbeatCommand::Certify { mesh, charts, tol } => {
                check_tol(*tol)?;
                let mesh_text = read(mesh)?;
                let mesh = MeshFile::parse(&mesh_text).with_context(|| format!("{}", mesh.display()))?;
                let doc = ChartsDocument::parse(&read(charts)?).with_context(|| format!("{}", charts.display()))?;
                let k = &mesh.complex;
                let mut f = expression_map(&doc.components, k.ambient_dim())?;
                let opts = CertifyOptions {
                    tol: *tol,
                    seed: cli.seed,
                    ..Default::default()
                };
                let mut strata = Vec::new();
                let mut pass = true;
                for s in &doc.strata {
                    let tube = stratum_tube(k, s, doc.radius)?;
                    let (rounds, ok) = match beat_until_certified(&f, &tube, doc.margin, &default_schedule(), &opts) {
                        Ok(r) => r,
                        // no usable exponent: the map grows too slowly (or jumps) at the stratum
                        Err(e @ (PanelBeatError::NonPositiveExponent(_) | PanelBeatError::InvalidProfile(_))) => {
                            println!("stratum {s:?}: cannot be beaten: {e}");
                            pass = false;
                            strata.push(StratumSummary {
                                stratum: s.clone(),
                                rounds: 0,
                                alpha: Vec::new(),
                                r: Vec::new(),
                                report: None,
                                error: Some(e.to_string()),
                            });
                            continue;
                        }
                        Err(e) => return Err(e.into()),
                    };
                    let last = rounds.last().expect("at least one round");
                    println!(
                        "stratum {s:?}: {} round(s), alpha {:.4}, r {:.4}",
                        rounds.len(),
                        last.estimate.alpha,
                        last.eta.r
                    );
                    print!("{}", describe_c1("  certificate", &last.report));
                    pass &= ok;
                    f = last.map.clone();
                    strata.push(StratumSummary {
                        stratum: s.clone(),
                        rounds: rounds.len(),
                        alpha: rounds.iter().map(|b| b.estimate.alpha).collect(),
                        r: rounds.iter().map(|b| b.eta.r).collect(),
                        report: Some(last.report.clone()),
                        error: None,
                    });
                }
                write_json(cli, "panelbeat_certify", &CertifySummary { pass, strata })?;
                Ok(outcome(pass))
            }
        },
        Command::Volume { set, d, n } => {
            let (set, _) = read_set(set)?;
            if n.is_empty() {
                bail!("--n: give at least one resolution");
            }
            let r = grid_measure_sequence(&set, *d, n)?;
            println!("d = {}, m = {}, side = {}", r.d, r.m, r.side);
            println!(
                "{:>6} {:>10} {:>10} {:>14} {:>14} {:>14}",
                "n", "confirmed", "mixed+in", "v_optimistic", "v_pessimistic", "v_normalized"
            );
            for row in &r.rows {
                println!(
                    "{:>6} {:>10} {:>10} {:>14.8} {:>14.8} {:>14.8}",
                    row.n, row.optimistic, row.pessimistic, row.v_optimistic, row.v_pessimistic, row.v_normalized
                );
            }
            println!("bounded: {}", r.bounded);
            write_json(cli, "volume", &r)?;
            Ok(outcome(r.bounded))
        }
    }
}

#[derive(Serialize)]
struct TriangulationSummary<'a> {
    dim: usize,
    ambient: usize,
    vertices: usize,
    simplices: Vec<usize>,
    mesh_volume: f64,
    report: &'a semialg::triangulate::TriangulationReport,
}

impl<'a> TriangulationSummary<'a> {
    fn new(b: &'a TriangulationBundle) -> Self {
        Self {
            dim: b.dim(),
            ambient: b.complex.ambient_dim(),
            vertices: b.complex.vertices().len(),
            simplices: (0..=b.dim()).map(|p| b.complex.num_simplices(p)).collect(),
            mesh_volume: b.mesh_volume(),
            report: &b.report,
        }
    }
}

#[derive(Serialize)]
struct StratumSummary {
    stratum: Vec<usize>,
    rounds: usize,
    alpha: Vec<f64>,
    r: Vec<f64>,
    report: Option<C1Report>,
    error: Option<String>,
}

#[derive(Serialize)]
struct CertifySummary {
    pass: bool,
    strata: Vec<StratumSummary>,
}

fn describe_c1(label: &str, r: &C1Report) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{label}: {} (max radial {:.3e}, max jump {:.3e}, tangential off bad set {:.3e}, {} probes, {} skipped, bad set {})",
        verdict(r.pass),
        r.max_radial,
        r.max_jump,
        r.max_tangential_off_bad_set,
        r.probes.len(),
        r.skipped,
        r.bad_set.len()
    );
    s
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn outcome(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn check_degree(q: u32) -> Result<()> {
    if q > MAX_QUAD_DEGREE {
        bail!("--quad-degree must be at most {MAX_QUAD_DEGREE}");
    }
    Ok(())
}

fn check_tol(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        bail!("--tol must be positive and finite");
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_set(path: &Path) -> Result<(SaSet, SetDocument)> {
    let doc = SetDocument::parse(&read(path)?).with_context(|| format!("{}", path.display()))?;
    let set = doc.to_set().with_context(|| format!("{}", path.display()))?;
    Ok((set, doc))
}

fn read_form(path: &Path) -> Result<DifferentialForm> {
    let doc: FormDocument = serde_json::from_str(&read(path)?).with_context(|| format!("{}", path.display()))?;
    doc.to_form().with_context(|| format!("{}", path.display()))
}

fn build(set: &SaSet, doc: &SetDocument, grid: &GridArgs) -> Result<TriangulationBundle> {
    if grid.depth > MAX_DEPTH {
        bail!("--depth must be at most {MAX_DEPTH}");
    }
    if !grid.shift.is_empty() && grid.shift.len() != set.dim() {
        bail!("--shift needs {} values, got {}", set.dim(), grid.shift.len());
    }
    if grid.shift.iter().any(|s| !(0.0..1.0).contains(s)) {
        bail!("--shift values must lie in [0, 1)");
    }
    let opts = TriangulateOptions {
        depth: grid.depth,
        shift: grid.shift.clone(),
        family: doc.family_sets()?,
    };
    Ok(triangulate_with(set, &opts)?)
}

fn write_json<T: Serialize>(cli: &Cli, kind: &str, report: &T) -> Result<()> {
    if let Some(p) = &cli.json {
        fs::write(p, to_json(kind, report)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
