//! Command-line surface behind the `vadb` binary.
//!
//! Six subcommands: `run` (full experiment, CSV/JSON/plot output),
//! `check-hypotheses` (verdicts only), `flat-bound` (closed-form bound from
//! five numbers), `convexify-demo` (collar bending before and after the
//! boundary fix), `zspace-probe` (glued estimate space diagnostics), and
//! `mesh-export` (build a mesh, save JSON).
//!
//! Exit codes: 0 on success, including runs whose verdicts diagnose a
//! failing family; 1 when a member row failed outright or a computation
//! errored; 2 on argument, config, or validation problems; 3 when an output
//! path cannot be written.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::collar::{build_collar, convexify, sff_min_eigen};
use crate::config::ExperimentConfig;
use crate::manifold::ModelManifold;
use crate::measure::{boundary_area, volume};
use crate::mesh::build_mesh_with;
use crate::report;
use crate::verify::{
    flat_bound, hypothesis_sweep, run_experiment, select_good_set, BoundGlobals, FlatBoundInputs,
    SamplePlan,
};
use crate::zspace::{build_zspace, default_levels};
use crate::{Error, Result};

const COLUMN_HELP: &str = "CSV columns written by `run`:
  family       family name
  n            manifold dimension
  params       family parameters (alpha=..., h0=..., or -)
  j            member index
  vol          member volume by quadrature
  vol_err      quadrature error estimate for vol
  area         member boundary area (0 for closed manifolds)
  diam_lo      largest mesh distance found (diameter lower estimate)
  diam_hi      diam_lo plus the 2*h*kappa stencil correction
  C_j          lower-bound slack 1 - min(g_j / g_0)
  sup_excess   worst sampled excess scale*d_j - d_0 over all pairs
  frac_excess  fraction of sampled pairs with excess above epsilon
  delta_hat    half the certified excess on the selected good set
  V_j_hat      volume of the discarded band under the (rescaled) member
  h_j          gluing height sqrt(2*delta_hat*D + delta_hat^2)
  flat_bound   2*V_j_hat + h_j*V + h_j*A
  status       ok, or plus-joined flags: volume_fail, diam_fail, area_fail,
               below_fail, rescaled, greedy_selection, recheck_fail,
               degenerate, error";

#[derive(Parser, Debug)]
#[command(
    name = "vadb",
    version,
    about = "Convergence experiments for conformal metric families on model manifolds",
    arg_required_else_help = true,
    after_help = COLUMN_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the full experiment over a family and write CSV/JSON reports.
    Run(RunArgs),
    /// Check the convergence hypotheses for each member and print verdicts.
    CheckHypotheses(CheckArgs),
    /// Evaluate the closed-form distance bound from five nonnegative numbers.
    FlatBound(FlatBoundArgs),
    /// Measure boundary bending before and after collar convexification.
    ConvexifyDemo(ConvexifyArgs),
    /// Build the glued estimate space for one member and probe its distances.
    ZspaceProbe(ZspaceArgs),
    /// Build a mesh graph and save it as JSON.
    MeshExport(MeshExportArgs),
}

/// Experiment settings shared by `run`, `check-hypotheses`, and
/// `zspace-probe`. Flags override values from `--config`.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// Config file, JSON or `key = value` lines; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Family: disk_blowup, cinched_sphere, torus_bubble, or identity.
    #[arg(long)]
    pub family: Option<String>,
    /// Manifold dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Blow-up exponent for disk_blowup; must lie in (0, 1/dim).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Equator dip depth for cinched_sphere; must lie in (0, 1).
    #[arg(long)]
    pub h0: Option<f64>,
    /// Member indices, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub js: Option<Vec<u32>>,
    /// Mesh spacing.
    #[arg(long)]
    pub h: Option<f64>,
    /// Edge radius multiplier: vertices within kappa*h get connected.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Quadrature refinement level.
    #[arg(long)]
    pub level: Option<u32>,
    /// Distance-distortion tolerance.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Depth slices for the per-depth distortion table, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<f64>>,
    /// Diameter cap; defaults to 1.2 times the measured base diameter.
    #[arg(long)]
    pub diam_cap: Option<f64>,
    /// Boundary-area cap; defaults to twice the base boundary area.
    #[arg(long)]
    pub area_cap: Option<f64>,
    /// Relative volume tolerance against the base volume.
    #[arg(long)]
    pub vol_tol: Option<f64>,
    /// Largest acceptable lower-bound slack C_j.
    #[arg(long)]
    pub c_tol: Option<f64>,
    /// Vertex pairs to sample per member (at least 100).
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Seed for mesh jitter and pair sampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    fn as_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            family: self.family.clone(),
            dim: self.dim,
            alpha: self.alpha,
            h0: self.h0,
            js: self.js.clone(),
            h: self.h,
            kappa: self.kappa,
            level: self.level,
            epsilon: self.epsilon,
            depths: self.depths.clone(),
            diam_cap: self.diam_cap,
            area_cap: self.area_cap,
            vol_tol: self.vol_tol,
            c_tol: self.c_tol,
            pairs: self.pairs,
            seed: self.seed,
        }
    }

    pub fn resolve(&self) -> Result<crate::verify::ExperimentInputs> {
        let file = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        file.merged(&self.as_config()).resolve()
    }
}

#[derive(Args, Debug)]
#[command(after_help = COLUMN_HELP)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Write the full JSON report here.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write per-column `j value` series as <stem>_<column>.dat files.
    #[arg(long)]
    pub plot_stem: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct FlatBoundArgs {
    /// Volume of the removed region under the larger metric.
    #[arg(long)]
    pub excluded_volume: f64,
    /// Certified distance defect on the kept region.
    #[arg(long)]
    pub delta: f64,
    /// Diameter bound covering both spaces.
    #[arg(long)]
    pub diam: f64,
    /// Volume bound covering both spaces.
    #[arg(long)]
    pub vol: f64,
    /// Boundary area bound covering both spaces.
    #[arg(long)]
    pub area: f64,
}

#[derive(Args, Debug)]
pub struct ConvexifyArgs {
    /// Manifold kind: disk or annulus.
    #[arg(long, default_value = "annulus")]
    pub manifold: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Disk radius.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Annulus inner radius.
    #[arg(long, default_value_t = 1.0)]
    pub r_in: f64,
    /// Annulus outer radius.
    #[arg(long, default_value_t = 2.0)]
    pub r_out: f64,
    /// Depth beyond which the metric must stay untouched.
    #[arg(long, default_value_t = 0.2)]
    pub t1: f64,
    /// Boundary sample count for the bending sweep.
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct ZspaceArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Member index to glue against the base; defaults to the first of js.
    #[arg(long)]
    pub j: Option<u32>,
    /// Vertical resolution of the neck; defaults to max(2, ceil(h_j / h)).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Good vertices to probe for the weld-height condition.
    #[arg(long, default_value_t = 50)]
    pub probes: usize,
    /// Save the glued graph as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MeshExportArgs {
    /// Manifold kind: disk, annulus, sphere, or torus.
    #[arg(long, default_value = "disk")]
    pub manifold: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_in: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r_out: f64,
    /// Torus side lengths, comma separated; defaults to 2*pi each.
    #[arg(long, value_delimiter = ',')]
    pub sides: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    #[arg(long, default_value_t = 3.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Family whose feature rings should be pinned into the mesh.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub h0: Option<f64>,
    /// Member index for the feature rings.
    #[arg(long)]
    pub j: Option<u32>,
    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Maps an error to the documented exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 3,
        Error::Param { .. } | Error::Input(_) | Error::Usage(_) | Error::Serde(_) => 2,
        _ => 1,
    }
}

/// Parses arguments from the process environment and runs the command,
/// returning the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one parsed command. Returns the exit code for successful control
/// flow; errors bubble out for [`exit_code`] mapping.
pub fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::CheckHypotheses(args) => cmd_check(args),
        Command::FlatBound(args) => cmd_flat_bound(args),
        Command::ConvexifyDemo(args) => cmd_convexify(args),
        Command::ZspaceProbe(args) => cmd_zspace(args),
        Command::MeshExport(args) => cmd_mesh_export(args),
    }
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let inputs = args.cfg.resolve()?;
    let rep = run_experiment(&inputs)?;
    for note in &rep.notes {
        eprintln!("note: {note}");
    }
    if let Some(trend) = rep.bound_trend_decreasing {
        eprintln!(
            "note: flat-distance bounds are {}strictly decreasing along js",
            if trend { "" } else { "not " }
        );
    }
    if let Some(path) = &args.out_csv {
        report::write_csv(&rep, path)?;
    }
    if let Some(path) = &args.out_json {
        report::write_json(&rep, path)?;
    }
    if let Some(stem) = &args.plot_stem {
        report::write_plot_series(&rep, stem)?;
    }
    if args.out_csv.is_none() && args.out_json.is_none() {
        print!("{}", report::to_csv(&rep));
    }
    Ok(if rep.has_errors() { 1 } else { 0 })
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn cmd_check(args: &CheckArgs) -> Result<i32> {
    let inputs = args.cfg.resolve()?;
    let verdicts = hypothesis_sweep(&inputs)?;
    for (j, v) in &verdicts {
        println!(
            "j={j} vol={} target={} gap={} [{}] diam={} cap={} [{}] area={} cap={} [{}] \
             C_j={} [{}] verdict={}",
            v.vol,
            v.vol_target,
            v.vol_gap,
            mark(v.vol_ok),
            v.diam_measured,
            v.diam_cap,
            mark(v.diam_ok),
            v.area,
            v.area_cap,
            mark(v.area_ok),
            v.c_j,
            mark(v.below_ok),
            mark(v.ok()),
        );
    }
    Ok(0)
}

fn cmd_flat_bound(args: &FlatBoundArgs) -> Result<i32> {
    let out = flat_bound(&FlatBoundInputs {
        excluded_volume: args.excluded_volume,
        delta: args.delta,
        diam: args.diam,
        vol: args.vol,
        area: args.area,
    })?;
    println!("h = {}", out.h);
    println!("excluded_term = {}", out.excluded_term);
    println!("volume_term = {}", out.volume_term);
    println!("area_term = {}", out.area_term);
    println!("bound = {}", out.bound);
    Ok(0)
}

fn parse_manifold(args_kind: &str, args: &MeshExportArgs) -> Result<ModelManifold> {
    match args_kind {
        "disk" => ModelManifold::disk(args.dim, args.radius),
        "annulus" => ModelManifold::annulus(args.dim, args.r_in, args.r_out),
        "sphere" => ModelManifold::sphere(args.dim),
        "torus" => match &args.sides {
            Some(sides) => ModelManifold::torus(sides.clone()),
            None => ModelManifold::square_torus(args.dim),
        },
        _ => Err(Error::param(
            "manifold",
            "must be disk, annulus, sphere, or torus",
        )),
    }
}

fn cmd_convexify(args: &ConvexifyArgs) -> Result<i32> {
    let manifold = match args.manifold.as_str() {
        "disk" => ModelManifold::disk(args.dim, args.radius)?,
        "annulus" => ModelManifold::annulus(args.dim, args.r_in, args.r_out)?,
        _ => {
            return Err(Error::param("manifold", "must be disk or annulus"));
        }
    };
    let chart = build_collar(&manifold)?;
    let metric = crate::metric::ConformalMetric::base(manifold);
    let samples = chart.boundary_samples(args.samples.max(1));
    let before = sff_min_eigen(&metric, &chart, &samples)?;
    let fixed = convexify(&metric, &chart, args.t1)?;
    let after = sff_min_eigen(&fixed.metric, &chart, &samples)?;
    println!("collar width = {}", chart.width());
    println!("boundary samples = {}", samples.len());
    println!("min bending eigenvalue before = {}", before.min_eigen);
    println!(
        "tau(0) = {} slope(0) = {} flat beyond = {}",
        fixed.tau.value(0.0),
        fixed.tau.derivative(0.0),
        fixed.tau.flat_beyond()
    );
    println!("min bending eigenvalue after = {}", after.min_eigen);
    println!("product defect = {}", chart.product_defect(8)?);
    Ok(0)
}

fn cmd_zspace(args: &ZspaceArgs) -> Result<i32> {
    let inputs = args.cfg.resolve()?;
    let j = args.j.unwrap_or_else(|| *inputs.js.first().unwrap_or(&4));
    let base = inputs.family.base_metric()?;
    let manifold = base.manifold().clone();
    let member = inputs.family.metric(j)?;
    let mesh = build_mesh_with(
        manifold.clone(),
        inputs.h,
        inputs.kappa,
        &inputs.family.mesh_features(j),
        inputs.seed,
    )?;
    eprintln!("mesh: {} vertices, {} edges", mesh.vertex_count(), mesh.edge_count());

    let diam0 = mesh.diameter_estimate(&base, 8)?;
    let diamj = mesh.diameter_estimate(&member, 8)?;
    let vol = volume(&member, inputs.level)?.value;
    let area = if manifold.has_boundary() {
        boundary_area(&member, inputs.level)?.value
    } else {
        0.0
    };
    let globals = BoundGlobals {
        diam: diam0.upper.max(diamj.upper),
        vol: volume(&base, inputs.level)?.value.max(vol),
        area,
    };
    let plan = SamplePlan {
        pairs: inputs.pairs,
        seed: inputs.seed,
    };
    let anchor = inputs.family.anchor();
    let good = select_good_set(
        &mesh,
        &base,
        &member,
        1.0,
        &anchor,
        &inputs.family.candidate_widths(j),
        &plan,
        inputs.epsilon,
        inputs.level,
        &globals,
    )?;
    if good.degenerate {
        eprintln!("warning: good-set selection degenerated; the gluing below is not certified");
    }
    let h_j = flat_bound(&FlatBoundInputs {
        excluded_volume: good.excluded_volume,
        delta: good.delta_hat,
        diam: globals.diam,
        vol: globals.vol,
        area: globals.area,
    })?
    .h;
    println!(
        "good set: {} of {} vertices{}",
        good.vertex_count,
        mesh.vertex_count(),
        good.region
            .as_ref()
            .map(|r| format!(" (band width {})", r.width))
            .unwrap_or_default()
    );
    println!("delta_hat = {} h_j = {}", good.delta_hat, h_j);

    let levels = args.levels.unwrap_or_else(|| default_levels(h_j, inputs.h));
    let z = build_zspace(&mesh, &base, &member, &good.vertices, h_j, levels)?;
    if let Some(w) = z.warning() {
        eprintln!("warning: {w}");
    }
    println!(
        "z-space: {} vertices, {} neck rows, step = {}",
        z.vertex_count(),
        z.rows(),
        z.step()
    );

    let mut worst_weld = 0.0f64;
    let probes = args.probes.min(good.vertices.len());
    for &x in good.vertices.iter().take(probes) {
        let d = z.distance(z.embed_floor(x)?, z.ceiling_vertex(x)?)?;
        worst_weld = worst_weld.max(d);
    }
    println!(
        "worst copy-to-copy distance over {} probed good vertices = {} (h_j = {})",
        probes, worst_weld, h_j
    );
    let ok = worst_weld <= h_j + 1e-9;
    println!("weld condition: {}", if ok { "ok" } else { "FAIL" });

    if let Some(path) = &args.out {
        z.save(path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_mesh_export(args: &MeshExportArgs) -> Result<i32> {
    let manifold = parse_manifold(&args.manifold, args)?;
    let features = match &args.family {
        Some(name) => {
            let kind = crate::families::FamilyKind::from_name(name)
                .ok_or_else(|| Error::param("family", "unknown family name"))?;
            let spec = crate::families::FamilySpec {
                family: kind,
                dim: args.dim,
                alpha: args.alpha,
                h0: args.h0,
            };
            spec.validate()?;
            spec.mesh_features(args.j.unwrap_or(4))
        }
        None => Vec::new(),
    };
    let mesh = build_mesh_with(manifold, args.h, args.kappa, &features, args.seed)?;
    mesh.save(&args.out)?;
    println!(
        "wrote {} ({} vertices, {} edges)",
        args.out.display(),
        mesh.vertex_count(),
        mesh.edge_count()
    );
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn run_flags_map_onto_the_config() {
        let cli = Cli::try_parse_from([
            "vadb",
            "run",
            "--family",
            "disk_blowup",
            "--alpha",
            "0.25",
            "--js",
            "4,16",
            "--h",
            "0.1",
            "--pairs",
            "150",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run");
        };
        let inputs = args.cfg.resolve().unwrap();
        assert_eq!(inputs.js, vec![4, 16]);
        assert_eq!(inputs.h, 0.1);
        assert_eq!(inputs.pairs, 150);
        assert_eq!(inputs.family.alpha, Some(0.25));
    }

    #[test]
    fn alpha_out_of_range_names_the_parameter() {
        let cli = Cli::try_parse_from([
            "vadb",
            "run",
            "--family",
            "disk_blowup",
            "--alpha",
            "0.9",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run");
        };
        let err = args.cfg.resolve().unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn missing_required_arguments_fail_to_parse() {
        assert!(Cli::try_parse_from(["vadb", "flat-bound", "--delta", "0.1"]).is_err());
        assert!(Cli::try_parse_from(["vadb", "mesh-export"]).is_err());
        assert!(Cli::try_parse_from(["vadb"]).is_err());
    }

    #[test]
    fn help_documents_every_csv_column() {
        let help = Cli::command().render_long_help().to_string();
        for col in crate::report::CSV_COLUMNS {
            assert!(help.contains(col), "column {col} missing from help");
        }
    }

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(exit_code(&Error::param("x", "bad")), 2);
        assert_eq!(exit_code(&Error::Input("bad".into())), 2);
        assert_eq!(exit_code(&Error::Usage("bad".into())), 2);
        assert_eq!(
            exit_code(&Error::io(
                String::from("p"),
                std::io::Error::new(std::io::ErrorKind::PermissionDenied, "nope"),
            )),
            3
        );
        assert_eq!(exit_code(&Error::Construction("bad".into())), 1);
        assert_eq!(exit_code(&Error::Domain("bad".into())), 1);
    }

    #[test]
    fn flat_bound_command_prints_the_addends() {
        let out = cmd_flat_bound(&FlatBoundArgs {
            excluded_volume: 0.0,
            delta: 0.0,
            diam: 1.0,
            vol: 1.0,
            area: 1.0,
        })
        .unwrap();
        assert_eq!(out, 0);
    }
}
