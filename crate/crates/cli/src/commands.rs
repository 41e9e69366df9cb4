use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use qgeom::coherent::{qcml_cloud, qg_point_cloud, Cloud, Region};
use qgeom::configuration::ConfigurationFile;
use qgeom::datasets::{self, BallMapParams, ConformalParams, TwoSpheresParams};
use qgeom::laplacian::{self, LaplacianAnalysis};
use qgeom::reference::{self, SpinLabel};
use qgeom::topology::{self, SearchBox, Slice, SphereGrid};
use qgeom::training::{self, TrainingConfig};
use qgeom::{Dataset, MatrixConfiguration};

use crate::output::{csv_bytes, emit_json, num, to_json, write_atomic, CliError, CliResult, Run};

#[derive(Debug, Parser)]
#[command(
    name = "qgeom",
    version,
    about = "Learn matrix geometries from data and analyze them"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "QGEOM_THREADS")]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as headerless CSV.
    Generate(GenerateArgs),
    /// Train a matrix configuration on a CSV dataset.
    Train(TrainArgs),
    /// Expectation-value images of the data points.
    Cloud(CloudArgs),
    /// Expectation-value images of random points in a box.
    QgCloud(QgCloudArgs),
    /// Spectrum of the matrix Laplacian.
    Laplacian(ConfigOut),
    /// Laplacian eigenmaps and their overlap with the observables.
    Eigenmaps(EigenmapsArgs),
    /// Weyl-law and quantum-metric dimension estimates.
    Dimension(DimensionArgs),
    /// Search for degeneracy points and their charges.
    Monopoles(MonopolesArgs),
    /// Chern number of the ground-state bundle over a sphere.
    Chern(ChernArgs),
    /// Block projectors from the Laplacian zero modes.
    Components(ComponentsArgs),
    /// Write an exactly known configuration.
    Oracle(OracleArgs),
    /// Classical / almost-commutative / deep-quantum tag.
    Classify(ConfigOut),
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Cloud(a) => cloud(a),
        Command::QgCloud(a) => qg_cloud(a),
        Command::Laplacian(a) => spectrum(a),
        Command::Eigenmaps(a) => eigenmaps(a),
        Command::Dimension(a) => dimension(a),
        Command::Monopoles(a) => monopoles(a),
        Command::Chern(a) => chern(a),
        Command::Components(a) => components(a),
        Command::Oracle(a) => oracle(a),
        Command::Classify(a) => classify(a),
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerateKind {
    Sphere,
    TwoSpheres,
    NonuniformSphere,
    ConformalMaps,
    BlaschkePotapov,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    kind: GenerateKind,
    /// Number of points (number of maps for the map datasets).
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Standard deviation of the Gaussian noise added to each coordinate.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sphere radius (`sphere` only).
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Split `two-spheres` points by surface area instead of 50/50.
    #[arg(long)]
    area_weighted: bool,
    /// Reference points per map.
    #[arg(long, default_value_t = 100)]
    n_ref: usize,
    /// Largest modulus of the map parameter.
    #[arg(long, default_value_t = 0.9)]
    a_max: f64,
    /// Complex dimension of the ball (`blaschke-potapov` only).
    #[arg(long, default_value_t = 2)]
    ball_dim: usize,
    /// Draw the map rotation angle at random instead of fixing it to 0.
    #[arg(long)]
    random_theta: bool,
    #[arg(long)]
    out: PathBuf,
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let ds = match a.kind {
        GenerateKind::Sphere => datasets::sphere_uniform(a.n, a.radius, [0.0; 3], a.noise, a.seed)?,
        GenerateKind::TwoSpheres => {
            let params = TwoSpheresParams {
                area_weighted: a.area_weighted,
                ..Default::default()
            };
            datasets::two_spheres(a.n, &params, a.noise, a.seed)?
        }
        GenerateKind::NonuniformSphere => datasets::sphere_nonuniform(a.n, a.noise, a.seed)?,
        GenerateKind::ConformalMaps => {
            let params = ConformalParams {
                n_maps: a.n,
                n_ref: a.n_ref,
                a_max: a.a_max,
                random_theta: a.random_theta,
            };
            datasets::conformal_maps(&params, a.seed)?
        }
        GenerateKind::BlaschkePotapov => {
            let params = BallMapParams {
                n_maps: a.n,
                n_ref: a.n_ref,
                ball_dim: a.ball_dim,
                a_max: a.a_max,
                random_theta: a.random_theta,
            };
            datasets::blaschke_potapov(&params, a.seed)?
        }
    };
    let mut bytes = Vec::new();
    ds.write_csv(&mut bytes)?;
    write_atomic(&a.out, &bytes)?;
    let mut run = Run::start("generate", &a)?;
    run.seed(a.seed).output(Some(&a.out)).details(json!({
        "rows": ds.len(),
        "features": ds.n_features(),
        "provenance": ds.provenance,
        "labels": ds.labels,
        "row_parameters": ds.row_parameters,
    }));
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct DataInput {
    /// Headerless numeric CSV, one point per row.
    #[arg(long)]
    data: PathBuf,
    /// The CSV has a header line.
    #[arg(long)]
    header: bool,
}

impl DataInput {
    fn load(&self) -> CliResult<Dataset> {
        load_data(&self.data, self.header)
    }
}

/// Attaches the path to I/O failures.
fn with_path(path: &Path, e: qgeom::Error) -> CliError {
    match e {
        qgeom::Error::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other.into(),
    }
}

fn load_data(path: &Path, header: bool) -> CliResult<Dataset> {
    datasets::load_csv(path, header).map_err(|e| with_path(path, e))
}

fn load_config(path: &Path) -> CliResult<MatrixConfiguration> {
    MatrixConfiguration::read_json(path).map_err(|e| with_path(path, e))
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    input: DataInput,
    /// Standardize every column to zero mean and unit variance first.
    #[arg(long)]
    scale: bool,
    /// Hilbert-space dimension N.
    #[arg(long, default_value_t = 8)]
    hilbert_dim: usize,
    /// Quantum-fluctuation weight w.
    #[arg(long, default_value_t = 0.1)]
    weight: f64,
    #[arg(long, default_value_t = 20_000)]
    epochs: usize,
    /// Mini-batch size.
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 1e-2)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output configuration JSON.
    #[arg(long)]
    out: PathBuf,
    /// Training report JSON (per-epoch losses).
    #[arg(long)]
    report: Option<PathBuf>,
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut data = a.input.load()?;
    let mut scaling = None;
    if a.scale {
        let (scaled, s) = datasets::standard_scale(&data);
        data = scaled;
        scaling = Some(s);
    }
    let tc = TrainingConfig {
        hilbert_dim: a.hilbert_dim,
        fluctuation_weight: a.weight,
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        ..Default::default()
    };
    let (cfg, report) = training::train(&data, &tc)?;
    write_atomic(&a.out, cfg.to_json()?.as_bytes())?;
    if let Some(p) = &a.report {
        write_atomic(p, &to_json(&report)?)?;
    }
    let mut run = Run::start("train", &a)?;
    run.seed(a.seed)
        .input(&a.input.data)
        .output(Some(&a.out))
        .output(a.report.as_deref())
        .details(json!({
            "training": tc,
            "final_loss": report.final_loss,
            "degenerate_skips": report.degenerate_skips,
            "scaling": scaling,
        }));
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct CloudArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    input: DataInput,
    /// Output CSV with header.
    #[arg(long)]
    out: PathBuf,
}

fn cloud_csv(cloud: &Cloud, d: usize, with_source: bool) -> Vec<u8> {
    let mut header = vec!["row".to_string()];
    if with_source {
        header.extend((0..d).map(|k| format!("x_{k}")));
    }
    header.extend((0..d).map(|k| format!("image_{k}")));
    header.extend(["displacement_sq", "variance", "energy"].map(String::from));
    let rows = cloud.points.iter().zip(&cloud.indices).map(|(p, &i)| {
        let mut r = vec![i.to_string()];
        if with_source {
            r.extend(p.source.iter().map(|&v| num(v)));
        }
        r.extend(p.image.iter().map(|&v| num(v)));
        r.extend([num(p.displacement_sq), num(p.variance), num(p.energy)]);
        r
    });
    csv_bytes(Some(&header), rows)
}

fn warn_degenerate(cloud: &Cloud) {
    if !cloud.degenerate.is_empty() {
        log::warn!(
            "skipped {} degenerate points: {:?}",
            cloud.degenerate.len(),
            cloud.degenerate
        );
    }
}

fn cloud(a: CloudArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let data = a.input.load()?;
    let cloud = qcml_cloud(&cfg, &data)?;
    warn_degenerate(&cloud);
    write_atomic(&a.out, &cloud_csv(&cloud, cfg.feature_dim(), false))?;
    let mut run = Run::start("cloud", &a)?;
    run.input(&a.config)
        .input(&a.input.data)
        .output(Some(&a.out))
        .details(json!({"points": cloud.len(), "degenerate": cloud.degenerate}));
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct QgCloudArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of random samples.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lower box corner (comma separated); defaults to a cube of `--half-width` around 0.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "upper"
    )]
    lower: Option<Vec<f64>>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "lower"
    )]
    upper: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
    #[arg(long)]
    out: PathBuf,
}

fn qg_cloud(a: QgCloudArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let region = match (&a.lower, &a.upper) {
        (Some(l), Some(u)) => Region::new(l.clone(), u.clone())?,
        _ => Region::cube(cfg.feature_dim(), a.half_width),
    };
    let cloud = qg_point_cloud(&cfg, &region, a.n, a.seed)?;
    warn_degenerate(&cloud);
    write_atomic(&a.out, &cloud_csv(&cloud, cfg.feature_dim(), true))?;
    let mut run = Run::start("qg-cloud", &a)?;
    run.seed(a.seed)
        .input(&a.config)
        .output(Some(&a.out))
        .details(json!({"points": cloud.len(), "degenerate": cloud.degenerate}));
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct ConfigOut {
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn spectrum_csv(an: &LaplacianAnalysis) -> Vec<u8> {
    let header = ["index".to_string(), "eigenvalue".to_string()];
    csv_bytes(
        Some(&header),
        an.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![i.to_string(), num(v)]),
    )
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn spectrum(a: ConfigOut) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let an = laplacian::laplacian_spectrum(&cfg)?;
    write_or_print(a.out.as_deref(), &spectrum_csv(&an))?;
    let mut run = Run::start("laplacian", &a)?;
    run.input(&a.config)
        .output(a.out.as_deref())
        .details(json!({
            "zero_modes": an.zero_mode_count(an.default_zero_tolerance()),
            "levels": an.levels().len(),
        }));
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct EigenmapsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of leading eigenmaps to keep (all when omitted).
    #[arg(long)]
    modes: Option<usize>,
    /// Eigenmap JSON.
    #[arg(long)]
    out: PathBuf,
    /// Overlap CSV `Tr(Y_i X_a)`: one row per observable.
    #[arg(long)]
    overlap_out: PathBuf,
}

fn eigenmaps(a: EigenmapsArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let an = laplacian::laplacian_spectrum(&cfg)?;
    let total = an.eigenmaps.len();
    let k = a.modes.unwrap_or(total);
    if k == 0 || k > total {
        return Err(CliError::Usage(format!(
            "--modes must lie in 1..={total}, got {k}"
        )));
    }
    let overlap = laplacian::eigenmap_overlap(&an, &cfg)?;
    let maps = MatrixConfiguration::new(an.eigenmaps[..k].to_vec())?;
    let doc = json!({
        "eigenvalues": &an.eigenvalues[..k],
        "eigenmaps": ConfigurationFile::from(&maps),
    });
    write_atomic(&a.out, &to_json(&doc)?)?;
    let mut header = vec!["feature".to_string()];
    header.extend((0..k).map(|i| format!("Y{i}")));
    let rows = overlap.iter().enumerate().map(|(f, row)| {
        let mut r = vec![f.to_string()];
        r.extend(row[..k].iter().map(|&v| num(v)));
        r
    });
    write_atomic(&a.overlap_out, &csv_bytes(Some(&header), rows))?;
    let mut run = Run::start("eigenmaps", &a)?;
    run.input(&a.config)
        .output(Some(&a.out))
        .output(Some(&a.overlap_out));
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct DimensionArgs {
    #[arg(long)]
    config: PathBuf,
    /// Points at which the quantum metric is evaluated; metric estimate skipped when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    header: bool,
    /// Eigenvalue ratio that counts as a gap in the metric spectrum.
    #[arg(long, default_value_t = topology::DEFAULT_GAP_RATIO)]
    gap_ratio: f64,
    /// First eigenvalue index of the Weyl fit window.
    #[arg(long, requires = "weyl_end")]
    weyl_start: Option<usize>,
    /// One past the last eigenvalue index of the Weyl fit window.
    #[arg(long, requires = "weyl_start")]
    weyl_end: Option<usize>,
    /// Summary JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-point metric spectra CSV (descending eigenvalues).
    #[arg(long)]
    spectra_out: Option<PathBuf>,
}

fn dimension(a: DimensionArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let an = laplacian::laplacian_spectrum(&cfg)?;
    let window = a.weyl_start.zip(a.weyl_end).map(|(s, e)| s..e);
    let weyl = laplacian::weyl_fit(&an, window)?;
    let mut summary = json!({
        "weyl_d": weyl.dimension,
        "weyl_slope": weyl.slope,
        "weyl_intercept": weyl.intercept,
        "weyl_window": [weyl.window.start, weyl.window.end],
        "weyl_levels": weyl.levels,
        "metric_d": null,
    });
    let mut run = Run::start("dimension", &a)?;
    run.input(&a.config);
    if let Some(path) = &a.data {
        run.input(path);
        let data = load_data(path, a.header)?;
        let points: Vec<Vec<f64>> = data.rows().map(<[f64]>::to_vec).collect();
        let md = topology::metric_dimension(&cfg, &points, a.gap_ratio)?;
        summary["metric_d"] = json!(md.dimension);
        summary["metric_agreement"] = json!(md.agreement);
        summary["degenerate"] = json!(md.degenerate);
        if let Some(p) = &a.spectra_out {
            let rows = md
                .spectra
                .iter()
                .map(|e| e.iter().map(|&v| num(v)).collect());
            write_atomic(p, &csv_bytes(None, rows))?;
        }
    } else if a.spectra_out.is_some() {
        return Err(CliError::Usage("--spectra-out needs --data".into()));
    }
    emit_json(a.out.as_deref(), &summary)?;
    run.output(a.out.as_deref())
        .output(a.spectra_out.as_deref());
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct SliceArgs {
    /// Origin of the 3-dimensional slice (default: 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    origin: Option<Vec<f64>>,
}

impl SliceArgs {
    /// Slice spanned by the first three feature axes.
    fn slice(&self, d: usize) -> CliResult<Slice> {
        let mut s = Slice::axes(d)?;
        if let Some(o) = &self.origin {
            if o.len() != d {
                return Err(qgeom::Error::DimensionMismatch {
                    expected: d,
                    found: o.len(),
                }
                .into());
            }
            s.origin = o.clone();
        }
        Ok(s)
    }
}

fn triple(v: &[f64], name: &str) -> CliResult<[f64; 3]> {
    v.try_into().map_err(|_| {
        CliError::Usage(format!(
            "{name} needs exactly 3 comma-separated values, got {}",
            v.len()
        ))
    })
}

#[derive(Debug, Args, Serialize)]
pub struct MonopolesArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    slice: SliceArgs,
    /// Centre of the search box in slice coordinates.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,0,0"
    )]
    box_center: Vec<f64>,
    /// Half-width of the search box.
    #[arg(long, default_value_t = 2.0)]
    half_width: f64,
    /// Random starts in addition to the coarse-grid seeds.
    #[arg(long, default_value_t = 32)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sphere grid points per angle for the charges.
    #[arg(long, default_value_t = 24)]
    grid: usize,
    /// Skip the charge computation.
    #[arg(long)]
    no_charges: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn monopoles(a: MonopolesArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let slice = a.slice.slice(cfg.feature_dim())?;
    let bx = SearchBox::cube(triple(&a.box_center, "--box-center")?, a.half_width)?;
    let mut points = topology::find_degeneracy_points(&cfg, &slice, &bx, a.starts, a.seed)?;
    if !a.no_charges {
        let grid = SphereGrid {
            n_theta: a.grid,
            n_phi: a.grid,
        };
        topology::assign_charges(&cfg, &slice, &mut points, grid, 0.5 * bx.scale())?;
    }
    emit_json(a.out.as_deref(), &points)?;
    let mut run = Run::start("monopoles", &a)?;
    run.seed(a.seed).input(&a.config).output(a.out.as_deref());
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct ChernArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    slice: SliceArgs,
    /// Sphere centre in slice coordinates.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,0,0"
    )]
    center: Vec<f64>,
    #[arg(long)]
    radius: f64,
    /// Polar grid size.
    #[arg(long, default_value_t = 24)]
    n_theta: usize,
    /// Azimuthal grid size.
    #[arg(long, default_value_t = 24)]
    n_phi: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn chern(a: ChernArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let slice = a.slice.slice(cfg.feature_dim())?;
    let grid = SphereGrid {
        n_theta: a.n_theta,
        n_phi: a.n_phi,
    };
    let m =
        topology::chern_measurement(&cfg, &slice, triple(&a.center, "--center")?, a.radius, grid)?;
    emit_json(
        a.out.as_deref(),
        &json!({"charge": m.charge, "raw": m.raw, "min_gap": m.min_gap}),
    )?;
    let mut run = Run::start("chern", &a)?;
    run.input(&a.config).output(a.out.as_deref());
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct ComponentsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Eigenvalues at or below this count as zero modes.
    #[arg(long)]
    tol_zero: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn components(a: ComponentsArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let an = laplacian::laplacian_spectrum(&cfg)?;
    let dec = laplacian::zero_mode_components(&an, a.tol_zero)?;
    let projectors = MatrixConfiguration::new(dec.projectors.clone())?;
    emit_json(
        a.out.as_deref(),
        &json!({
            "count": dec.len(),
            "residual": dec.residual,
            "idempotency_defect": dec.idempotency_defect,
            "projectors": ConfigurationFile::from(&projectors),
        }),
    )?;
    let mut run = Run::start("components", &a)?;
    run.input(&a.config).output(a.out.as_deref());
    run.finish()
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    FuzzySphere,
    FuzzyCpn,
    FuzzyTorus,
    Commuting,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(value_enum)]
    kind: OracleKind,
    /// Twice the spin (`fuzzy-sphere`).
    #[arg(long, default_value_t = 1)]
    two_j: u32,
    /// Overall scale of the fuzzy-sphere generators.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Matrix size (`fuzzy-cpn`, `fuzzy-torus`).
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Headerless CSV of points (`commuting`).
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn oracle(a: OracleArgs) -> CliResult<()> {
    let cfg = match a.kind {
        OracleKind::FuzzySphere => reference::fuzzy_sphere(SpinLabel::new(a.two_j)?, a.alpha)?,
        OracleKind::FuzzyCpn => reference::fuzzy_cpn(a.n)?,
        OracleKind::FuzzyTorus => reference::fuzzy_torus(a.n)?,
        OracleKind::Commuting => {
            let path = a
                .points
                .as_ref()
                .ok_or_else(|| CliError::Usage("commuting oracle needs --points".into()))?;
            let ds = load_data(path, false)?;
            let pts: Vec<Vec<f64>> = ds.rows().map(<[f64]>::to_vec).collect();
            reference::commuting_config(&pts)?
        }
    };
    write_atomic(&a.out, cfg.to_json()?.as_bytes())?;
    let mut run = Run::start("oracle", &a)?;
    if let Some(p) = &a.points {
        run.input(p);
    }
    run.output(Some(&a.out));
    run.finish()
}

fn classify(a: ConfigOut) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let c = laplacian::classify_configuration(&cfg)?;
    emit_json(
        a.out.as_deref(),
        &json!({"class": c.class, "ratio": c.ratio}),
    )?;
    let mut run = Run::start("classify", &a)?;
    run.input(&a.config).output(a.out.as_deref());
    run.finish()
}
