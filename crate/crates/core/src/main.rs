use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mafr::io::{read_json, read_observations};
use mafr::pipeline::{
    parse_basis_choice, run_fit, run_fpca, run_pipeline, run_rotate, run_simulate, FitConfig,
    FpcaConfig, RotateConfig, RunConfig, DEFAULT_EVAL_POINTS,
};
use mafr::quadrature::DEFAULT_SIMPSON_POINTS;
use mafr::simulate::{BasisScaling, ScaleInterpretation};
use mafr::{Error, Retention, RotationOrder, SimulationSpec};

/// Functional PCA with maximal autocorrelation factor rotation.
#[derive(Parser)]
#[command(name = "mafr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw random Fourier curves and write them as a long-format CSV.
    Simulate(SimulateArgs),
    /// Smooth observed curves onto a basis.
    Fit(FitArgs),
    /// Functional principal components of a fitted dataset.
    Fpca(FpcaArgs),
    /// Rotate a saved fPCA bundle to minimize roughness.
    Rotate(RotateArgs),
    /// Run fit, fPCA and rotation in one go.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON simulation spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_curves: Option<usize>,
    #[arg(long)]
    num_basis: Option<usize>,
    #[arg(long)]
    scale_decay: Option<f64>,
    /// std-dev | variance
    #[arg(long, value_parser = parse_scale)]
    scale_interpretation: Option<ScaleInterpretation>,
    /// orthonormal | raw
    #[arg(long, value_parser = parse_scaling)]
    basis_scaling: Option<BasisScaling>,
    /// Number of equally spaced observation times in dataset.csv.
    #[arg(long, default_value_t = DEFAULT_EVAL_POINTS)]
    grid_points: usize,
    #[arg(long, short, default_value = "simulated")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Observations CSV (long or wide layout).
    #[arg(long, short)]
    input: PathBuf,
    /// Basis: inline JSON, JSON file, `bspline[:size[:order]]` or `fourier:size`.
    #[arg(long, default_value = "bspline")]
    basis: String,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Roughness operator used when lambda > 0.
    #[arg(long, default_value = "d2")]
    smoothing_penalty: String,
    #[arg(long, default_value_t = DEFAULT_SIMPSON_POINTS)]
    quad_points: usize,
    #[arg(long, short, default_value = "fitted")]
    out: PathBuf,
}

#[derive(Args)]
struct FpcaArgs {
    /// Directory holding basis.json and coefficients.csv.
    #[arg(long)]
    data: PathBuf,
    /// Variance fraction (e.g. 0.99) or component count (e.g. 5).
    #[arg(long, default_value = "0.99")]
    retain: Retention,
    #[arg(long)]
    no_center: bool,
    #[arg(long, default_value_t = DEFAULT_SIMPSON_POINTS)]
    quad_points: usize,
    /// Evaluate components on this many equally spaced points.
    #[arg(long)]
    eval_grid: Option<usize>,
    #[arg(long, short, default_value = "fpca")]
    out: PathBuf,
}

#[derive(Args)]
struct RotateArgs {
    /// Directory holding an fPCA bundle.
    #[arg(long)]
    pca: PathBuf,
    /// d0 | d1 | d2 | harmonic:<period> | custom:<json list>
    #[arg(long, default_value = "d2")]
    penalty: String,
    #[arg(long, default_value = "smooth-first")]
    ordering: RotationOrder,
    /// Rotate only the leading k components.
    #[arg(long)]
    retain: Option<usize>,
    /// Comma-separated weights for a joint rotation.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SIMPSON_POINTS)]
    quad_points: usize,
    #[arg(long)]
    eval_grid: Option<usize>,
    /// Output directory; defaults to the input bundle.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON run config or a previous pipeline manifest; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Use simulated input (default simulation spec plus --seed).
    #[arg(long)]
    simulate: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    basis: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    smoothing_penalty: Option<String>,
    #[arg(long)]
    no_center: bool,
    #[arg(long)]
    retain: Option<Retention>,
    #[arg(long)]
    rotate_components: Option<usize>,
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    ordering: Option<RotationOrder>,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    quad_points: Option<usize>,
    #[arg(long)]
    eval_grid: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_scale(s: &str) -> Result<ScaleInterpretation, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

fn parse_scaling(s: &str) -> Result<BasisScaling, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

fn simulate_cmd(a: SimulateArgs) -> mafr::Result<()> {
    let mut spec: SimulationSpec = match &a.config {
        Some(p) => read_json(p)?,
        None => SimulationSpec::default(),
    };
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.num_curves {
        spec.num_curves = v;
    }
    if let Some(v) = a.num_basis {
        spec.num_basis = v;
    }
    if let Some(v) = a.scale_decay {
        spec.scale_decay = v;
    }
    if let Some(v) = a.scale_interpretation {
        spec.scale_interpretation = v;
    }
    if let Some(v) = a.basis_scaling {
        spec.basis_scaling = v;
    }
    let data = run_simulate(&spec, &a.out, a.grid_points)?;
    println!(
        "simulated {} curves (seed {}) into {}",
        data.num_curves(),
        spec.seed,
        a.out.display()
    );
    Ok(())
}

fn fit_cmd(a: FitArgs) -> mafr::Result<()> {
    let grid = read_observations(&a.input)?;
    let basis = parse_basis_choice(&a.basis, grid.points())?;
    let config = FitConfig {
        input: a.input,
        basis,
        lambda: a.lambda,
        smoothing_penalty: a.smoothing_penalty,
        quad_points: a.quad_points,
    };
    let data = run_fit(&config, &a.out)?;
    println!(
        "fitted {} curves onto {} basis functions into {}",
        data.num_curves(),
        data.basis().size(),
        a.out.display()
    );
    Ok(())
}

fn fpca_cmd(a: FpcaArgs) -> mafr::Result<()> {
    let config = FpcaConfig {
        data: a.data,
        retain: a.retain,
        center: !a.no_center,
        quad_points: a.quad_points,
        eval_grid: a.eval_grid,
    };
    let pca = run_fpca(&config, &a.out)?;
    println!(
        "retained {} components ({:.6} of variance) into {}",
        pca.num_components(),
        pca.variance_fraction_retained(),
        a.out.display()
    );
    Ok(())
}

fn rotate_cmd(a: RotateArgs) -> mafr::Result<()> {
    let out = a.out.unwrap_or_else(|| a.pca.clone());
    let config = RotateConfig {
        pca: a.pca,
        penalty: a.penalty,
        ordering: a.ordering,
        retain: a.retain,
        weights: a.weights,
        quad_points: a.quad_points,
        eval_grid: a.eval_grid,
    };
    let (pca, rot) = run_rotate(&config, &out)?;
    println!(
        "rotated {} components ({:?}) into {}",
        pca.num_components(),
        rot.ordering(),
        out.display()
    );
    Ok(())
}

fn pipeline_cmd(a: PipelineArgs) -> mafr::Result<()> {
    let mut c = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = a.input {
        c.input = Some(p);
        c.simulation = None;
    }
    if a.simulate || (c.input.is_none() && c.simulation.is_none()) {
        c.simulation.get_or_insert_with(SimulationSpec::default);
        c.input = None;
    }
    if let (Some(seed), Some(sim)) = (a.seed, c.simulation.as_mut()) {
        sim.seed = seed;
    }
    if let Some(b) = &a.basis {
        let points = match &c.input {
            Some(p) => read_observations(p)?.points().to_vec(),
            None => vec![0.0, 1.0],
        };
        c.basis = Some(parse_basis_choice(b, &points)?);
    }
    if let Some(v) = a.lambda {
        c.lambda = v;
    }
    if let Some(v) = a.smoothing_penalty {
        c.smoothing_penalty = v;
    }
    if a.no_center {
        c.center = false;
    }
    if let Some(v) = a.retain {
        c.retain = v;
    }
    if let Some(v) = a.rotate_components {
        c.rotate_components = Some(v);
    }
    if let Some(v) = a.penalty {
        c.penalty = v;
    }
    if let Some(v) = a.ordering {
        c.ordering = v;
    }
    if let Some(v) = a.weights {
        c.weights = Some(v);
    }
    if let Some(v) = a.quad_points {
        c.quad_points = v;
    }
    if let Some(v) = a.eval_grid {
        c.eval_grid = v;
    }
    if let Some(v) = a.out {
        c.output_dir = v;
    }
    let s = run_pipeline(&c)?;
    println!(
        "{} curves, {} components ({:.6} of variance); leading roughness fPCA {:.6e}, MAFR {:.6e}; bundle in {}",
        s.num_curves,
        s.num_components,
        s.variance_fraction_retained,
        s.fpca_roughness.first().copied().unwrap_or(f64::NAN),
        s.mafr_roughness.first().copied().unwrap_or(f64::NAN),
        Path::new(&c.output_dir).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Fpca(a) => fpca_cmd(a),
        Command::Rotate(a) => rotate_cmd(a),
        Command::Pipeline(a) => pipeline_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> ExitCode {
    eprintln!("error [{}]: {e}", e.module());
    ExitCode::from(e.exit_code() as u8)
}
