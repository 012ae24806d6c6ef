//! Command-line interface. Every subcommand is a pure function of its inputs
//! and flags; scalar results go to stdout as one JSON object.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use topocons_core::losses::topo_consistency;
use topocons_core::scenarios::{consistency_scenario, noise_removal_scenario};
use topocons_core::{
    compute_diagram, cross_entropy_loss, decompose, evaluate, finite_difference_check, label_components,
    match_diagrams_with, run_simulation, threshold, Connectivity, Direction, Exponent, GroundMetric,
    LabeledTarget, LikelihoodGrid, LogitsGrid, NoiseMode, PersistenceDiagram, TopoLossConfig, TopoTerms,
    TrainConfig,
};

use crate::error::{Error, Result};
use crate::format::JsonObject;
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "topocons", version, about = "Persistence diagrams and topological consistency losses on likelihood grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the 0-dimensional persistence diagram of a grid.
    Pd(PdArgs),
    /// Split a diagram into signal and noise by persistence.
    Decompose(DecomposeArgs),
    /// Wasserstein or bottleneck distance between two diagrams.
    Wasserstein(WassersteinArgs),
    /// Topological consistency losses of a student grid against a teacher grid.
    Loss(LossArgs),
    /// Compare the analytic loss gradient against central differences.
    GradCheck(GradCheckArgs),
    /// Betti error, Betti matching error and variation of information of two masks.
    Metrics(MetricsArgs),
    /// Run the teacher-student simulator.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Sublevel,
    Superlevel,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Sublevel => Direction::Sublevel,
            DirectionArg::Superlevel => Direction::Superlevel,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConnectivityArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

impl From<ConnectivityArg> for Connectivity {
    fn from(c: ConnectivityArg) -> Self {
        match c {
            ConnectivityArg::Four => Connectivity::Four,
            ConnectivityArg::Eight => Connectivity::Eight,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseModeArg {
    SquaredValues,
    Diagonal,
}

impl From<NoiseModeArg> for NoiseMode {
    fn from(m: NoiseModeArg) -> Self {
        match m {
            NoiseModeArg::SquaredValues => NoiseMode::SquaredValues,
            NoiseModeArg::Diagonal => NoiseMode::Diagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Chebyshev,
}

impl From<MetricArg> for GroundMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => GroundMetric::Euclidean,
            MetricArg::Chebyshev => GroundMetric::Chebyshev,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TopoTermsArg {
    Both,
    Consistency,
    Removal,
}

impl From<TopoTermsArg> for TopoTerms {
    fn from(t: TopoTermsArg) -> Self {
        match t {
            TopoTermsArg::Both => TopoTerms::Both,
            TopoTermsArg::Consistency => TopoTerms::ConsistencyOnly,
            TopoTermsArg::Removal => TopoTerms::RemovalOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    /// Noisy copy of a three-disk teacher.
    Consistency,
    /// Three deep basins and ten shallow dents; no teacher.
    NoiseRemoval,
}

#[derive(Debug, Args)]
pub struct FiltrationArgs {
    /// Filtration direction used when an input is a grid.
    #[arg(long, value_enum, default_value_t = DirectionArg::Sublevel)]
    pub direction: DirectionArg,
    /// Foreground pixel connectivity.
    #[arg(long, value_enum, default_value_t = ConnectivityArg::Four)]
    pub connectivity: ConnectivityArg,
}

#[derive(Debug, Args)]
pub struct TopoArgs {
    /// Persistence threshold separating signal from noise.
    #[arg(long, default_value_t = topocons_core::DEFAULT_PHI)]
    pub phi: f64,
    #[command(flatten)]
    pub filtration: FiltrationArgs,
    /// Noise removal term.
    #[arg(long, value_enum, default_value_t = NoiseModeArg::SquaredValues)]
    pub noise_mode: NoiseModeArg,
}

impl TopoArgs {
    fn config(&self) -> Result<TopoLossConfig> {
        check_phi(self.phi)?;
        Ok(TopoLossConfig {
            phi: self.phi,
            direction: self.filtration.direction.into(),
            connectivity: self.filtration.connectivity.into(),
            noise_mode: self.noise_mode.into(),
        })
    }
}

#[derive(Debug, Args)]
pub struct PdArgs {
    /// Grid file (.pgm or CSV).
    pub grid: PathBuf,
    #[command(flatten)]
    pub filtration: FiltrationArgs,
    /// Output diagram CSV; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Diagram CSV, or a grid whose diagram is computed first.
    pub input: PathBuf,
    /// Persistence threshold separating signal from noise.
    #[arg(long, default_value_t = topocons_core::DEFAULT_PHI)]
    pub phi: f64,
    #[command(flatten)]
    pub filtration: FiltrationArgs,
    /// Output CSV for dots with persistence above phi.
    #[arg(long)]
    pub signal: PathBuf,
    /// Output CSV for the remaining dots.
    #[arg(long)]
    pub noise: PathBuf,
}

#[derive(Debug, Args)]
pub struct WassersteinArgs {
    /// First diagram CSV or grid.
    pub left: PathBuf,
    /// Second diagram CSV or grid.
    pub right: PathBuf,
    /// Order of the distance, at least 1, or "inf" for the bottleneck distance.
    #[arg(long, default_value = "2", value_parser = parse_exponent)]
    pub p: Exponent,
    /// Ground metric of the (birth, death) plane.
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub filtration: FiltrationArgs,
    /// Output CSV of matched pairs (left_idx,right_idx; -1 is the diagonal).
    #[arg(long)]
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Student likelihood grid.
    pub student: PathBuf,
    /// Teacher likelihood grid.
    pub teacher: PathBuf,
    #[command(flatten)]
    pub topo: TopoArgs,
    /// Output CSV of the topological loss gradient.
    #[arg(long)]
    pub gradient: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Student likelihood grid.
    pub student: PathBuf,
    /// Teacher likelihood grid.
    pub teacher: PathBuf,
    #[command(flatten)]
    pub topo: TopoArgs,
    /// Central difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    /// Largest accepted relative error; exceeding it exits with status 3.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted mask (.pgm or CSV, nonzero is foreground).
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth mask (.pgm or CSV, nonzero is foreground).
    #[arg(long)]
    pub gt: PathBuf,
    /// Side of the square Betti-error windows.
    #[arg(long, default_value_t = topocons_core::DEFAULT_WINDOW)]
    pub window: usize,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Built-in scenario used when no --student grid is given.
    #[arg(long, value_enum, default_value_t = ScenarioArg::Consistency)]
    pub scenario: ScenarioArg,
    /// Logit noise of the consistency scenario's initial student.
    #[arg(long, default_value_t = 0.5)]
    pub init_noise: f64,
    /// Initial student likelihood grid instead of a scenario.
    #[arg(long)]
    pub student: Option<PathBuf>,
    /// Initial teacher likelihood grid; a copy of the student when omitted.
    #[arg(long, requires = "student")]
    pub teacher: Option<PathBuf>,
    /// Number of optimisation steps.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Gradient descent step on the student logits.
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Teacher EMA decay.
    #[arg(long, default_value_t = topocons_core::DEFAULT_EMA_DECAY)]
    pub ema_decay: f64,
    /// Weight of the topological loss.
    #[arg(long, default_value_t = topocons_core::DEFAULT_LAMBDA_TOPO)]
    pub lambda_topo: f64,
    /// Scale of the pixel consistency ramp-up.
    #[arg(long, default_value_t = topocons_core::DEFAULT_RAMP_SCALE)]
    pub ramp_k: f64,
    /// Logit noise of the student's strong view.
    #[arg(long, default_value_t = 0.5)]
    pub strong_noise_sigma: f64,
    /// Topological terms driving the student.
    #[arg(long, value_enum, default_value_t = TopoTermsArg::Both)]
    pub topo_terms: TopoTermsArg,
    /// Feed the strong view, not the clean student, into the topological loss.
    #[arg(long)]
    pub topo_on_strong_view: bool,
    /// Seed of the scenario and strong-view noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mask for the supervised term.
    #[arg(long)]
    pub labeled_mask: Option<PathBuf>,
    /// Cross-entropy weight of the supervised term.
    #[arg(long, default_value_t = topocons_core::DEFAULT_SUPERVISED_WEIGHT)]
    pub ce_weight: f64,
    /// Dice weight of the supervised term.
    #[arg(long, default_value_t = topocons_core::DEFAULT_SUPERVISED_WEIGHT)]
    pub dice_weight: f64,
    #[command(flatten)]
    pub topo: TopoArgs,
    /// Directory receiving trace.csv, student.pgm and teacher.pgm.
    #[arg(short, long)]
    pub out_dir: PathBuf,
}

fn parse_exponent(s: &str) -> std::result::Result<Exponent, String> {
    let p = match s {
        "inf" | "infinity" => f64::INFINITY,
        _ => s.parse::<f64>().map_err(|_| format!("{s:?} is not a number or \"inf\""))?,
    };
    Exponent::new(p).map_err(|e| e.to_string())
}

fn check_phi(phi: f64) -> Result<()> {
    if phi >= 0.0 && phi.is_finite() {
        Ok(())
    } else {
        Err(Error::Usage(format!("--phi must be a non-negative number, got {phi}")))
    }
}

/// Stdout text and exit status of a successful invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub status: u8,
}

impl Outcome {
    fn ok(json: JsonObject) -> Self {
        Self {
            stdout: json.render() + "\n",
            status: 0,
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Pd(a) => pd(a),
        Command::Decompose(a) => decompose_cmd(a),
        Command::Wasserstein(a) => wasserstein(a),
        Command::Loss(a) => loss(a),
        Command::GradCheck(a) => grad_check(a),
        Command::Metrics(a) => metrics(a),
        Command::Demo(a) => demo(a),
    }
}

fn diagram_of(grid: &LikelihoodGrid, f: &FiltrationArgs, path: &Path) -> Result<PersistenceDiagram> {
    compute_diagram(grid, f.direction.into(), f.connectivity.into())
        .map_err(|e| Error::data(path.display().to_string(), e))
}

fn load_or_compute(path: &Path, f: &FiltrationArgs) -> Result<PersistenceDiagram> {
    match io::load_diagram_source(path)? {
        io::DiagramSource::Diagram(d) => Ok(d),
        io::DiagramSource::Grid(g) => diagram_of(&g, f, path),
    }
}

fn pd(a: PdArgs) -> Result<Outcome> {
    let grid = io::load_grid(&a.grid)?;
    let diagram = diagram_of(&grid, &a.filtration, &a.grid)?;
    let csv = io::diagram_csv(&diagram);
    match &a.output {
        Some(path) => {
            io::write_text(path, &csv)?;
            Ok(Outcome {
                stdout: String::new(),
                status: 0,
            })
        }
        None => Ok(Outcome { stdout: csv, status: 0 }),
    }
}

fn decompose_cmd(a: DecomposeArgs) -> Result<Outcome> {
    check_phi(a.phi)?;
    let diagram = load_or_compute(&a.input, &a.filtration)?;
    let parts = decompose(&diagram, a.phi).map_err(|e| Error::data(a.input.display().to_string(), e))?;
    io::save_diagram(&a.signal, &parts.signal)?;
    io::save_diagram(&a.noise, &parts.noise)?;
    Ok(Outcome::ok(
        JsonObject::new()
            .real("phi", a.phi)
            .integer("signal_dots", parts.signal.len())
            .integer("noise_dots", parts.noise.len()),
    ))
}

fn wasserstein(a: WassersteinArgs) -> Result<Outcome> {
    let left = load_or_compute(&a.left, &a.filtration)?;
    let right = load_or_compute(&a.right, &a.filtration)?;
    let m = match_diagrams_with(&left, &right, a.p, a.metric.into());
    if let Some(path) = &a.pairs {
        io::write_text(path, &io::pairs_csv(&m))?;
    }
    Ok(Outcome::ok(JsonObject::new().real("distance", m.cost)))
}

fn load_pair(student: &Path, teacher: &Path) -> Result<(LikelihoodGrid, LikelihoodGrid)> {
    let s = io::load_grid(student)?;
    let t = io::load_grid(teacher)?;
    if s.dims() != t.dims() {
        return Err(Error::format(
            teacher,
            format!("dimensions {:?} differ from student {:?}", t.dims(), s.dims()),
        ));
    }
    Ok((s, t))
}

fn loss(a: LossArgs) -> Result<Outcome> {
    let cfg = a.topo.config()?;
    let (s, t) = load_pair(&a.student, &a.teacher)?;
    let eval = topo_consistency(&s, &t, &cfg).map_err(|e| Error::data("loss", e))?;
    let pixel_ce = cross_entropy_loss(&s, &t).map_err(|e| Error::data("loss", e))?;
    if let Some(path) = &a.gradient {
        io::save_gradient_csv(path, &eval.total_gradient())?;
    }
    let r = &eval.report;
    Ok(Outcome::ok(
        JsonObject::new()
            .real("cons", r.cons_loss)
            .real("rem", r.rem_loss)
            .real("topo", r.topo_loss)
            .real("pixel_ce", pixel_ce),
    ))
}

fn grad_check(a: GradCheckArgs) -> Result<Outcome> {
    let cfg = a.topo.config()?;
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(Error::Usage(format!("--h must be positive, got {}", a.h)));
    }
    if !(a.tolerance >= 0.0) {
        return Err(Error::Usage(format!("--tolerance must be non-negative, got {}", a.tolerance)));
    }
    let (s, t) = load_pair(&a.student, &a.teacher)?;
    let err = finite_difference_check(&s, &t, &cfg, a.h)
        .map_err(|e| Error::data(a.student.display().to_string(), e))?;
    let pass = err <= a.tolerance;
    let mut out = Outcome::ok(
        JsonObject::new()
            .real("max_relative_error", err)
            .real("tolerance", a.tolerance)
            .real("h", a.h)
            .boolean("pass", pass),
    );
    if !pass {
        out.status = 3;
    }
    Ok(out)
}

fn metrics(a: MetricsArgs) -> Result<Outcome> {
    if a.window == 0 {
        return Err(Error::Usage("--window must be at least 1".into()));
    }
    let pred = io::load_mask(&a.pred)?;
    let gt = io::load_mask(&a.gt)?;
    if pred.dims() != gt.dims() {
        return Err(Error::format(
            &a.gt,
            format!("dimensions {:?} differ from prediction {:?}", gt.dims(), pred.dims()),
        ));
    }
    let r = evaluate(&pred, &gt, a.window).map_err(|e| Error::data("metrics", e))?;
    Ok(Outcome::ok(
        JsonObject::new()
            .real("betti_error", r.betti_error)
            .real("betti_matching_error", r.betti_matching_error)
            .real("voi", r.voi)
            .integer("window_size", r.window_size)
            .integer("window_count", r.window_count),
    ))
}

fn demo(a: DemoArgs) -> Result<Outcome> {
    let topo = a.topo.config()?;
    let labeled = match &a.labeled_mask {
        Some(path) => Some(LabeledTarget {
            mask: io::load_mask(path)?,
            ce_weight: a.ce_weight,
            dice_weight: a.dice_weight,
        }),
        None => None,
    };
    let config = TrainConfig {
        steps: a.steps,
        learning_rate: a.learning_rate,
        ema_decay: a.ema_decay,
        phi: topo.phi,
        lambda_topo: a.lambda_topo,
        ramp_scale: a.ramp_k,
        strong_noise_sigma: a.strong_noise_sigma,
        noise_mode: topo.noise_mode,
        direction: topo.direction,
        connectivity: topo.connectivity,
        topo_terms: a.topo_terms.into(),
        topo_on_strong_view: a.topo_on_strong_view,
        seed: a.seed,
        labeled,
    };
    config.validate().map_err(|e| Error::Usage(e.to_string()))?;
    if !(a.init_noise >= 0.0 && a.init_noise.is_finite()) {
        return Err(Error::Usage(format!("--init-noise must be non-negative, got {}", a.init_noise)));
    }

    let (student, teacher) = match &a.student {
        Some(path) => {
            let s = LogitsGrid::from_likelihood(&io::load_grid(path)?);
            let t = match &a.teacher {
                Some(tp) => Some(LogitsGrid::from_likelihood(&io::load_grid(tp)?)),
                None => None,
            };
            (s, t)
        }
        None => match a.scenario {
            ScenarioArg::Consistency => {
                let s = consistency_scenario(a.init_noise, a.seed);
                (s.student, Some(s.teacher))
            }
            ScenarioArg::NoiseRemoval => (LogitsGrid::from_likelihood(&noise_removal_scenario().grid), None),
        },
    };
    if let Some(labeled) = &config.labeled {
        if labeled.mask.dims() != student.dims() {
            return Err(Error::format(
                a.labeled_mask.as_deref().unwrap_or(Path::new("mask")),
                format!("dimensions {:?} differ from student {:?}", labeled.mask.dims(), student.dims()),
            ));
        }
    }

    let trace = run_simulation(&student, teacher.as_ref(), &config).map_err(|e| Error::data("demo", e))?;
    std::fs::create_dir_all(&a.out_dir).map_err(|source| Error::Io {
        path: a.out_dir.clone(),
        source,
    })?;
    io::write_text(&a.out_dir.join("trace.csv"), &io::trace_csv(&trace.records))?;
    let final_student = trace.final_student();
    io::save_grid_pgm(&a.out_dir.join("student.pgm"), &final_student)?;
    io::save_grid_pgm(&a.out_dir.join("teacher.pgm"), &trace.final_teacher())?;

    let last = trace.records.last().expect("at least one step");
    let mask = threshold(&final_student, 0.5, config.direction);
    Ok(Outcome::ok(
        JsonObject::new()
            .integer("steps", trace.records.len())
            .real("pixel_loss", last.pixel_loss)
            .real("cons_loss", last.cons_loss)
            .real("rem_loss", last.rem_loss)
            .integer("signal_dots", last.signal_dots)
            .integer("noise_dots", last.noise_dots)
            .integer("beta0", label_components(&mask, config.connectivity).component_count),
    ))
}
