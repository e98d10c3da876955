//! End-to-end workflows behind the command-line tool: simulate, fit, fPCA,
//! rotation, and the output bundles they read and write.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, BasisSystem};
use crate::error::{Error, Result};
use crate::fpca::{fpca, FpcaOptions, PcaDecomposition, Retention};
use crate::io::{
    coefficient_names, numbered, read_basis, read_dataset, read_json, read_observations,
    write_dataset, write_json, write_long, Table,
};
use crate::ldo::LinearDifferentialOperator;
use crate::mafr::{
    joint_rotate_with_penalty, penalty_matrix_with, rotate_with_penalty, MafrRotation,
    RotationOrder,
};
use crate::quadrature::{QuadratureSpec, DEFAULT_SIMPSON_POINTS};
use crate::simulate::{simulate, SimulationSpec};
use crate::smoothing::{fit_with, FunctionalDataSet, ObservationGrid, SmoothingPenalty};

pub const DEFAULT_EVAL_POINTS: usize = 101;
/// Upper bound on the default B-spline basis size for CSV input.
pub const DEFAULT_MAX_BSPLINE_SIZE: usize = 20;

/// Everything needed to run the full workflow. Serialized into every
/// pipeline manifest so a bundle can be regenerated with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Observations CSV (long or wide layout).
    pub input: Option<PathBuf>,
    /// Simulated input; mutually exclusive with `input`.
    pub simulation: Option<SimulationSpec>,
    /// Basis for smoothing CSV input; chosen from the data when absent.
    pub basis: Option<BasisSpec>,
    pub lambda: f64,
    /// Roughness operator used when `lambda > 0`.
    pub smoothing_penalty: String,
    pub center: bool,
    pub retain: Retention,
    /// Truncate to this many components before rotating.
    pub rotate_components: Option<usize>,
    pub penalty: String,
    pub ordering: RotationOrder,
    pub weights: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub quad_points: usize,
    pub eval_grid: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            simulation: None,
            basis: None,
            lambda: 0.0,
            smoothing_penalty: "d2".into(),
            center: true,
            retain: Retention::default(),
            rotate_components: None,
            penalty: "d2".into(),
            ordering: RotationOrder::default(),
            weights: None,
            output_dir: PathBuf::from("mafr-out"),
            quad_points: DEFAULT_SIMPSON_POINTS,
            eval_grid: DEFAULT_EVAL_POINTS,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.input, &self.simulation) {
            (Some(_), Some(_)) => {
                return Err(Error::Parameter(
                    "config has both `input` and `simulation`; choose one".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Parameter(
                    "config needs an input CSV or a simulation spec".into(),
                ))
            }
            _ => {}
        }
        if let Retention::Fraction(q) = self.retain {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::Parameter(format!(
                    "retention fraction must lie in (0, 1] (got {q})"
                )));
            }
        }
        if self.eval_grid < 2 {
            return Err(Error::Parameter("eval_grid needs at least 2 points".into()));
        }
        self.penalty_operator()?;
        Ok(())
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec::simpson(self.quad_points)
    }

    pub fn penalty_operator(&self) -> Result<LinearDifferentialOperator> {
        self.penalty.parse()
    }

    pub fn fpca_options(&self) -> FpcaOptions {
        FpcaOptions {
            retain: self.retain,
            center: self.center,
            quadrature: self.quadrature(),
        }
    }

    /// Reads a config file. A pipeline manifest is accepted too, in which
    /// case its recorded config is used.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let value: serde_json::Value = read_json(path)?;
        let inner = match value.get("config") {
            Some(c) if value.get("tool").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| Error::Parse {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })
    }
}

/// Recorded next to every output bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub summary: serde_json::Value,
}

impl Manifest {
    fn new<C: Serialize>(command: &str, config: &C, summary: serde_json::Value) -> Result<Self> {
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config).map_err(std::io::Error::other)?,
            summary,
        })
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Parses a basis description: inline JSON, a path to a JSON file, or a
/// shorthand `bspline[:size[:order]]` / `fourier:size` whose interval is
/// taken from `points`.
pub fn parse_basis_choice(choice: &str, points: &[f64]) -> Result<BasisSpec> {
    let s = choice.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| Error::Parameter(format!("basis JSON: {e}")));
    }
    let path = Path::new(s);
    if path.is_file() {
        return read_json(path);
    }
    let mut parts = s.split(':');
    let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
    let nums: Vec<usize> = parts
        .map(|p| {
            p.parse()
                .map_err(|_| Error::Parameter(format!("bad number `{p}` in basis `{s}`")))
        })
        .collect::<Result<_>>()?;
    let interval = data_interval(points)?;
    match (kind.as_str(), nums.as_slice()) {
        ("bspline", []) => Ok(default_basis(points)?),
        ("bspline", [n]) => Ok(BasisSpec::Bspline {
            interval,
            order: 4,
            num_basis: Some(*n),
            knots: None,
        }),
        ("bspline", [n, order]) => Ok(BasisSpec::Bspline {
            interval,
            order: *order,
            num_basis: Some(*n),
            knots: None,
        }),
        ("fourier", [n]) => Ok(BasisSpec::Fourier {
            interval,
            size: *n,
            period: None,
        }),
        _ => Err(Error::Parameter(format!(
            "unrecognized basis `{s}` (JSON, file, bspline[:size[:order]] or fourier:size)"
        ))),
    }
}

fn data_interval(points: &[f64]) -> Result<[f64; 2]> {
    match (points.first(), points.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => Ok([lo, hi]),
        _ => Err(Error::InsufficientData(
            "need at least two distinct observation times".into(),
        )),
    }
}

/// Cubic B-splines over the observed range with
/// `min(points, DEFAULT_MAX_BSPLINE_SIZE)` functions.
pub fn default_basis(points: &[f64]) -> Result<BasisSpec> {
    let interval = data_interval(points)?;
    Ok(BasisSpec::Bspline {
        interval,
        order: 4,
        num_basis: Some(points.len().clamp(4, DEFAULT_MAX_BSPLINE_SIZE)),
        knots: None,
    })
}

/// Smooths observations onto a basis.
pub fn smooth(
    grid: &ObservationGrid,
    basis: &BasisSystem,
    lambda: f64,
    smoothing_penalty: &str,
    quad: &QuadratureSpec,
) -> Result<FunctionalDataSet> {
    let penalty = if lambda > 0.0 {
        Some(SmoothingPenalty {
            operator: smoothing_penalty.parse()?,
            lambda,
        })
    } else {
        None
    };
    fit_with(grid, basis, penalty.as_ref(), quad)
}

/// The dataset a config describes, plus the resolved basis spec.
pub fn load_dataset(config: &RunConfig) -> Result<(FunctionalDataSet, BasisSpec)> {
    if let Some(spec) = &config.simulation {
        let data = simulate(spec)?;
        let basis = data.basis().spec();
        return Ok((data, basis));
    }
    let path = config
        .input
        .as_ref()
        .ok_or_else(|| Error::Parameter("no input".into()))?;
    let grid = read_observations(path)?;
    let spec = match &config.basis {
        Some(s) => s.clone(),
        None => default_basis(grid.points())?,
    };
    let basis = spec.build()?;
    let data = smooth(
        &grid,
        &basis,
        config.lambda,
        &config.smoothing_penalty,
        &config.quadrature(),
    )?;
    Ok((data, spec))
}

/// Output of [`analyze`].
#[derive(Debug, Clone)]
pub struct Analysis {
    pub data: FunctionalDataSet,
    /// Decomposition actually rotated (after any `rotate_components` cut).
    pub pca: PcaDecomposition,
    pub rotation: MafrRotation,
    pub penalty_gram: DMatrix<f64>,
}

/// Runs fPCA and the rotation in memory.
pub fn analyze(config: &RunConfig, data: FunctionalDataSet) -> Result<Analysis> {
    let pca = fpca(&data, &config.fpca_options())?;
    let pca = match config.rotate_components {
        Some(k) => pca.truncate(k)?,
        None => pca,
    };
    let (rotation, penalty_gram) = rotate_pca(
        &pca,
        &config.penalty_operator()?,
        config.ordering,
        config.weights.as_deref(),
        &config.quadrature(),
    )?;
    Ok(Analysis {
        data,
        pca,
        rotation,
        penalty_gram,
    })
}

/// Rotation of `pca` together with the basis-level penalty Gram matrix used.
pub fn rotate_pca(
    pca: &PcaDecomposition,
    op: &LinearDifferentialOperator,
    ordering: RotationOrder,
    weights: Option<&[f64]>,
    quad: &QuadratureSpec,
) -> Result<(MafrRotation, DMatrix<f64>)> {
    let g = pca.basis().gram_matrix_with(op, quad)?;
    let p = penalty_matrix_with(pca, op, quad)?;
    let rot = match weights {
        Some(w) => joint_rotate_with_penalty(pca, &p, w, ordering)?,
        None => rotate_with_penalty(pca, &p, ordering)?,
    };
    Ok((rot, g))
}

/// Summary numbers reported by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub num_curves: usize,
    pub num_basis: usize,
    pub num_components: usize,
    pub variance_fraction_retained: f64,
    pub fpca_roughness: Vec<f64>,
    pub mafr_roughness: Vec<f64>,
}

fn summarize(a: &Analysis) -> PipelineSummary {
    let (fr, mr) = roughness_pair(&a.pca, &a.rotation, &a.penalty_gram);
    PipelineSummary {
        num_curves: a.data.num_curves(),
        num_basis: a.data.basis().size(),
        num_components: a.pca.num_components(),
        variance_fraction_retained: a.pca.variance_fraction_retained(),
        fpca_roughness: fr.iter().copied().collect(),
        mafr_roughness: mr.iter().copied().collect(),
    }
}

fn roughness_pair(
    pca: &PcaDecomposition,
    rot: &MafrRotation,
    g: &DMatrix<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let diag = |a: &DMatrix<f64>| (a * g * a.transpose()).diagonal();
    (diag(pca.components()), diag(rot.rotated_components()))
}

/// Runs the full workflow and writes the bundle into `config.output_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineSummary> {
    config.validate()?;
    let (data, basis_spec) = load_dataset(config)?;
    let analysis = analyze(config, data)?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    let grid = analysis.data.basis().interval().grid(config.eval_grid);

    write_dataset(dir, &analysis.data)?;
    write_curves_eval(dir, &analysis.data, &grid)?;
    write_pca_bundle(dir, &analysis.pca, Some(&grid))?;
    write_rotation_bundle(
        dir,
        &analysis.pca,
        &analysis.rotation,
        &analysis.penalty_gram,
        Some(&grid),
    )?;

    let summary = summarize(&analysis);
    let mut recorded = config.clone();
    recorded.basis = if config.simulation.is_some() {
        None
    } else {
        Some(basis_spec)
    };
    if let Some(p) = &recorded.input {
        recorded.input = Some(fs::canonicalize(p).unwrap_or_else(|_| p.clone()));
    }
    Manifest::new(
        "pipeline",
        &recorded,
        serde_json::to_value(&summary).map_err(std::io::Error::other)?,
    )?
    .write(dir)?;
    Ok(summary)
}

/// Simulates a dataset and writes `dataset.csv` (long layout on
/// `grid_points` equally spaced times), `coefficients.csv`, `basis.json`
/// and `manifest.json`.
pub fn run_simulate(
    spec: &SimulationSpec,
    out: &Path,
    grid_points: usize,
) -> Result<FunctionalDataSet> {
    if grid_points < 2 {
        return Err(Error::Parameter("grid needs at least 2 points".into()));
    }
    let data = simulate(spec)?;
    ensure_dir(out)?;
    let grid = data.basis().interval().grid(grid_points);
    write_long(
        &out.join("dataset.csv"),
        data.curve_ids(),
        &grid,
        &data.evaluate(&grid)?,
    )?;
    write_dataset(out, &data)?;
    Manifest::new(
        "simulate",
        spec,
        serde_json::json!({ "seed": spec.seed, "num_curves": spec.num_curves, "grid_points": grid_points }),
    )?
    .write(out)?;
    Ok(data)
}

/// Settings for [`run_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub input: PathBuf,
    pub basis: BasisSpec,
    pub lambda: f64,
    pub smoothing_penalty: String,
    pub quad_points: usize,
}

/// Smooths a CSV onto a basis and writes `basis.json`, `coefficients.csv`.
pub fn run_fit(config: &FitConfig, out: &Path) -> Result<FunctionalDataSet> {
    let grid = read_observations(&config.input)?;
    let basis = config.basis.build()?;
    let data = smooth(
        &grid,
        &basis,
        config.lambda,
        &config.smoothing_penalty,
        &QuadratureSpec::simpson(config.quad_points),
    )?;
    ensure_dir(out)?;
    write_dataset(out, &data)?;
    Manifest::new(
        "fit",
        config,
        serde_json::json!({ "num_curves": data.num_curves(), "num_basis": basis.size() }),
    )?
    .write(out)?;
    Ok(data)
}

/// Settings for [`run_fpca`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcaConfig {
    pub data: PathBuf,
    pub retain: Retention,
    pub center: bool,
    pub quad_points: usize,
    pub eval_grid: Option<usize>,
}

/// fPCA of a saved dataset (`basis.json` + `coefficients.csv`).
pub fn run_fpca(config: &FpcaConfig, out: &Path) -> Result<PcaDecomposition> {
    let data = read_dataset(&config.data)?;
    let options = FpcaOptions {
        retain: config.retain,
        center: config.center,
        quadrature: QuadratureSpec::simpson(config.quad_points),
    };
    let pca = fpca(&data, &options)?;
    ensure_dir(out)?;
    let grid = config.eval_grid.map(|n| pca.basis().interval().grid(n));
    write_pca_bundle(out, &pca, grid.as_deref())?;
    Manifest::new(
        "fpca",
        config,
        serde_json::json!({
            "num_components": pca.num_components(),
            "variance_fraction_retained": pca.variance_fraction_retained(),
        }),
    )?
    .write(out)?;
    Ok(pca)
}

/// Settings for [`run_rotate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotateConfig {
    pub pca: PathBuf,
    pub penalty: String,
    pub ordering: RotationOrder,
    pub retain: Option<usize>,
    pub weights: Option<Vec<f64>>,
    pub quad_points: usize,
    pub eval_grid: Option<usize>,
}

/// Rotates a saved fPCA bundle.
pub fn run_rotate(config: &RotateConfig, out: &Path) -> Result<(PcaDecomposition, MafrRotation)> {
    let quad = QuadratureSpec::simpson(config.quad_points);
    let pca = read_pca_bundle(&config.pca, &quad)?;
    let pca = match config.retain {
        Some(k) => pca.truncate(k)?,
        None => pca,
    };
    let op: LinearDifferentialOperator = config.penalty.parse()?;
    let (rot, g) = rotate_pca(&pca, &op, config.ordering, config.weights.as_deref(), &quad)?;
    ensure_dir(out)?;
    let grid = config.eval_grid.map(|n| pca.basis().interval().grid(n));
    if config.retain.is_some() || out != config.pca {
        write_pca_bundle(out, &pca, grid.as_deref())?;
    }
    write_rotation_bundle(out, &pca, &rot, &g, grid.as_deref())?;
    let (fr, mr) = roughness_pair(&pca, &rot, &g);
    Manifest::new(
        "rotate",
        config,
        serde_json::json!({
            "num_components": pca.num_components(),
            "fpca_roughness": fr.as_slice(),
            "mafr_roughness": mr.as_slice(),
        }),
    )?
    .write(out)?;
    Ok((pca, rot))
}

fn write_curves_eval(dir: &Path, data: &FunctionalDataSet, grid: &[f64]) -> Result<()> {
    Table::new(
        "curve_id",
        grid_names(grid),
        data.curve_ids().to_vec(),
        data.evaluate(grid)?,
    )
    .write(&dir.join("curves_eval.csv"))
}

fn grid_names(grid: &[f64]) -> Vec<String> {
    grid.iter().map(|t| crate::io::fmt_f64(*t)).collect()
}

/// Writes `components.csv`, `scores.csv`, `variances.csv`,
/// `eigenvalues.csv`, `mean.csv`, `basis.json`, and (with a grid)
/// `components_eval.csv` and `mean_eval.csv`.
pub fn write_pca_bundle(dir: &Path, pca: &PcaDecomposition, grid: Option<&[f64]>) -> Result<()> {
    let k = pca.basis().size();
    let kr = pca.num_components();
    let pcs = numbered("pc", kr);
    write_json(&dir.join("basis.json"), &pca.basis().spec())?;
    Table::new(
        "component",
        coefficient_names(k),
        pcs.clone(),
        pca.components().clone(),
    )
    .write(&dir.join("components.csv"))?;
    Table::new(
        "curve_id",
        pcs.clone(),
        pca.curve_ids().to_vec(),
        pca.scores().clone(),
    )
    .write(&dir.join("scores.csv"))?;

    let total = pca.all_eigenvalues().sum();
    let frac = |v: f64| if total > 0.0 { v / total } else { 0.0 };
    let mut cumulative = 0.0;
    let vt = DMatrix::from_fn(kr, 3, |i, j| match j {
        0 => pca.variances()[i],
        1 => frac(pca.variances()[i]),
        _ => {
            cumulative += frac(pca.variances()[i]);
            cumulative
        }
    });
    Table::new(
        "component",
        vec![
            "variance".into(),
            "fraction".into(),
            "cumulative_fraction".into(),
        ],
        pcs.clone(),
        vt,
    )
    .write(&dir.join("variances.csv"))?;
    let ev = pca.all_eigenvalues();
    Table::new(
        "index",
        vec!["eigenvalue".into()],
        (1..=ev.len()).map(|i| i.to_string()).collect(),
        DMatrix::from_column_slice(ev.len(), 1, ev.as_slice()),
    )
    .write(&dir.join("eigenvalues.csv"))?;
    let mean = pca.mean_coefficients();
    Table::new(
        "coefficient",
        vec!["mean".into()],
        coefficient_names(k),
        DMatrix::from_column_slice(k, 1, mean.as_slice()),
    )
    .write(&dir.join("mean.csv"))?;

    if let Some(grid) = grid {
        Table::new(
            "component",
            grid_names(grid),
            pcs,
            pca.evaluate_components(grid)?,
        )
        .write(&dir.join("components_eval.csv"))?;
        let phi = pca.basis().evaluate(grid, 0)?;
        let m = phi * mean;
        let m = DMatrix::from_row_slice(1, m.len(), m.as_slice());
        Table::new("curve", grid_names(grid), vec!["mean".into()], m)
            .write(&dir.join("mean_eval.csv"))?;
    }
    Ok(())
}

/// Rebuilds a decomposition from a bundle written by [`write_pca_bundle`].
pub fn read_pca_bundle(dir: &Path, quad: &QuadratureSpec) -> Result<PcaDecomposition> {
    let basis = read_basis(dir)?;
    let gram = basis.gram_matrix_with(&LinearDifferentialOperator::identity(), quad)?;
    let components = Table::read(&dir.join("components.csv"))?;
    let scores = Table::read(&dir.join("scores.csv"))?;
    let variances = Table::read(&dir.join("variances.csv"))?.column("variance")?;
    let eigenvalues = Table::read(&dir.join("eigenvalues.csv"))?.column("eigenvalue")?;
    let mean = Table::read(&dir.join("mean.csv"))?.column("mean")?;
    PcaDecomposition::from_parts(
        basis,
        gram,
        components.values,
        scores.values,
        variances,
        eigenvalues,
        mean,
        scores.labels,
    )
}

/// Writes the rotation outputs and `roughness.csv`.
pub fn write_rotation_bundle(
    dir: &Path,
    pca: &PcaDecomposition,
    rot: &MafrRotation,
    penalty_gram: &DMatrix<f64>,
    grid: Option<&[f64]>,
) -> Result<()> {
    let kr = rot.num_components();
    let pcs = numbered("pc", kr);
    let mafs = numbered("maf", kr);
    Table::new(
        "component",
        mafs.clone(),
        pcs.clone(),
        rot.rotation().clone(),
    )
    .write(&dir.join("rotation_matrix.csv"))?;
    Table::new(
        "component",
        coefficient_names(pca.basis().size()),
        mafs.clone(),
        rot.rotated_components().clone(),
    )
    .write(&dir.join("rotated_components.csv"))?;
    Table::new(
        "curve_id",
        mafs.clone(),
        pca.curve_ids().to_vec(),
        rot.rotated_scores().clone(),
    )
    .write(&dir.join("rotated_scores.csv"))?;
    let column = |v: &DVector<f64>, name: &str, file: &str| {
        Table::new(
            "component",
            vec![name.into()],
            mafs.clone(),
            DMatrix::from_column_slice(v.len(), 1, v.as_slice()),
        )
        .write(&dir.join(file))
    };
    column(
        rot.penalty_eigenvalues(),
        "eigenvalue",
        "penalty_eigenvalues.csv",
    )?;
    column(
        &rot.rotated_variances(),
        "variance",
        "rotated_variances.csv",
    )?;

    let (fr, mr) = roughness_pair(pca, rot, penalty_gram);
    Table::new(
        "index",
        vec!["fpca".into(), "mafr".into()],
        (1..=kr).map(|i| i.to_string()).collect(),
        DMatrix::from_fn(kr, 2, |i, j| if j == 0 { fr[i] } else { mr[i] }),
    )
    .write(&dir.join("roughness.csv"))?;

    if let Some(grid) = grid {
        Table::new(
            "component",
            grid_names(grid),
            mafs,
            rot.evaluate_components(grid)?,
        )
        .write(&dir.join("rotated_components_eval.csv"))?;
    }
    Ok(())
}
