//! Grid-parameterised teacher-student simulator.
//!
//! The student is a logits grid optimised directly by gradient descent and
//! the teacher is its exponential moving average. Each step evaluates
//!
//! ```text
//! L = L_sup(s) + ramp(tau) * CE(strong(s), t) + lambda_topo * (cons + rem)
//! ```
//!
//! where `strong(s)` adds seeded Gaussian noise to the student logits and the
//! teacher view is unperturbed. All gradients are chained through the
//! sigmoid; the teacher never receives a gradient.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Connectivity, Direction, LikelihoodGrid};
use crate::losses::{
    cross_entropy_gradient, cross_entropy_loss, supervised_gradient, supervised_loss,
    topo_consistency, NoiseMode, TopoLossConfig,
};

/// Unbounded per-pixel parameters whose sigmoid is a likelihood grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsGrid {
    pub height: usize,
    pub width: usize,
    pub logits: Vec<f64>,
}

/// Logistic function.
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// Smallest distance from 0 and 1 used when converting likelihoods to logits.
pub const LOGIT_CLAMP: f64 = 1e-6;

impl LogitsGrid {
    pub fn new(height: usize, width: usize, logits: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || height * width != logits.len() {
            return Err(Error::InvalidShape {
                height,
                width,
                len: logits.len(),
            });
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidConfig("logits must be finite"));
        }
        Ok(Self {
            height,
            width,
            logits,
        })
    }

    /// Inverse sigmoid of a likelihood grid, clamped away from 0 and 1.
    pub fn from_likelihood(grid: &LikelihoodGrid) -> Self {
        let logits = grid
            .values()
            .iter()
            .map(|&v| {
                let v = v.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
                libm::log(v / (1.0 - v))
            })
            .collect();
        Self {
            height: grid.height(),
            width: grid.width(),
            logits,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn likelihood(&self) -> LikelihoodGrid {
        LikelihoodGrid::new(self.height, self.width, self.logits.iter().map(|&z| sigmoid(z)).collect())
            .expect("sigmoid stays in [0, 1]")
    }
}

/// `k * exp(-5 (1 - tau / T)^2)`.
pub fn ramp_up_weight(tau: usize, total: usize, k: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidConfig("ramp-up needs at least one step"));
    }
    let progress = 1.0 - tau.min(total) as f64 / total as f64;
    Ok(k * libm::exp(-5.0 * progress * progress))
}

/// `alpha * teacher + (1 - alpha) * student`, elementwise.
pub fn ema_update(teacher: &LogitsGrid, student: &LogitsGrid, alpha: f64) -> Result<LogitsGrid> {
    if teacher.dims() != student.dims() {
        return Err(Error::DimensionMismatch {
            left: teacher.dims(),
            right: student.dims(),
        });
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidConfig("EMA decay must lie in [0, 1)"));
    }
    let logits = teacher
        .logits
        .iter()
        .zip(&student.logits)
        .map(|(&t, &s)| alpha * t + (1.0 - alpha) * s)
        .collect();
    Ok(LogitsGrid {
        height: teacher.height,
        width: teacher.width,
        logits,
    })
}

/// Which topological terms drive the student.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopoTerms {
    #[default]
    Both,
    ConsistencyOnly,
    RemovalOnly,
}

/// A labeled target for the student grid with its supervised weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTarget {
    pub mask: BinaryMask,
    pub ce_weight: f64,
    pub dice_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub ema_decay: f64,
    pub phi: f64,
    /// Weight of the topological term.
    pub lambda_topo: f64,
    /// Scale `k` of the pixel-consistency ramp-up.
    pub ramp_scale: f64,
    /// Standard deviation of the logit noise forming the strong view.
    pub strong_noise_sigma: f64,
    pub noise_mode: NoiseMode,
    pub direction: Direction,
    pub connectivity: Connectivity,
    pub topo_terms: TopoTerms,
    /// Feed the perturbed student into the topological loss instead of the clean one.
    pub topo_on_strong_view: bool,
    pub seed: u64,
    pub labeled: Option<LabeledTarget>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            learning_rate: 0.1,
            ema_decay: crate::DEFAULT_EMA_DECAY,
            phi: crate::DEFAULT_PHI,
            lambda_topo: crate::DEFAULT_LAMBDA_TOPO,
            ramp_scale: crate::DEFAULT_RAMP_SCALE,
            strong_noise_sigma: 0.5,
            noise_mode: NoiseMode::SquaredValues,
            direction: Direction::Sublevel,
            connectivity: Connectivity::Four,
            topo_terms: TopoTerms::Both,
            topo_on_strong_view: false,
            seed: 0,
            labeled: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::InvalidConfig("EMA decay must lie in [0, 1)"));
        }
        if !(self.phi >= 0.0) {
            return Err(Error::NegativePhi(self.phi));
        }
        if !(self.lambda_topo >= 0.0) || !(self.ramp_scale >= 0.0) || !(self.strong_noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("weights and noise level must be non-negative"));
        }
        Ok(())
    }

    fn topo_config(&self) -> TopoLossConfig {
        TopoLossConfig {
            phi: self.phi,
            direction: self.direction,
            connectivity: self.connectivity,
            noise_mode: self.noise_mode,
        }
    }
}

/// Losses and diagram sizes observed at the start of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub ramp_weight: f64,
    /// Unweighted cross-entropy between the strong student view and the teacher.
    pub pixel_loss: f64,
    /// Supervised loss, 0 without a labeled target.
    pub supervised_loss: f64,
    pub cons_loss: f64,
    pub rem_loss: f64,
    pub signal_dots: usize,
    pub noise_dots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<StepRecord>,
    pub student: LogitsGrid,
    pub teacher: LogitsGrid,
}

impl TrainTrace {
    pub fn final_student(&self) -> LikelihoodGrid {
        self.student.likelihood()
    }

    pub fn final_teacher(&self) -> LikelihoodGrid {
        self.teacher.likelihood()
    }
}

/// Runs the simulator. The teacher starts from `teacher_init`, or from a copy
/// of the student when none is given.
pub fn run_simulation(
    student_init: &LogitsGrid,
    teacher_init: Option<&LogitsGrid>,
    config: &TrainConfig,
) -> Result<TrainTrace> {
    config.validate()?;
    let dims = student_init.dims();
    let mut teacher = match teacher_init {
        Some(t) if t.dims() != dims => {
            return Err(Error::DimensionMismatch {
                left: dims,
                right: t.dims(),
            })
        }
        Some(t) => t.clone(),
        None => student_init.clone(),
    };
    if let Some(labeled) = &config.labeled {
        if labeled.mask.dims() != dims {
            return Err(Error::DimensionMismatch {
                left: dims,
                right: labeled.mask.dims(),
            });
        }
    }

    let topo_config = config.topo_config();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut student = student_init.clone();
    let mut records = Vec::with_capacity(config.steps);
    let pixels = student.logits.len();
    let mut noise = alloc::vec![0.0; pixels];

    for step in 1..=config.steps {
        let clean = student.likelihood();
        let target = teacher.likelihood();
        if config.strong_noise_sigma > 0.0 {
            for n in noise.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *n = config.strong_noise_sigma * z;
            }
        }
        let strong = LogitsGrid {
            height: student.height,
            width: student.width,
            logits: student.logits.iter().zip(&noise).map(|(z, n)| z + n).collect(),
        }
        .likelihood();

        let ramp_weight = ramp_up_weight(step, config.steps, config.ramp_scale)?;
        let mut grad = alloc::vec![0.0; pixels];

        let pixel_loss = cross_entropy_loss(&strong, &target)?;
        if ramp_weight > 0.0 {
            let g = cross_entropy_gradient(&strong, &target)?;
            accumulate_through_sigmoid(&mut grad, &g.partials, strong.values(), ramp_weight);
        }

        let mut supervised = 0.0;
        if let Some(labeled) = &config.labeled {
            supervised = supervised_loss(&clean, &labeled.mask, labeled.ce_weight, labeled.dice_weight)?;
            let g = supervised_gradient(&clean, &labeled.mask, labeled.ce_weight, labeled.dice_weight)?;
            accumulate_through_sigmoid(&mut grad, &g.partials, clean.values(), 1.0);
        }

        let topo_input = if config.topo_on_strong_view { &strong } else { &clean };
        let eval = topo_consistency(topo_input, &target, &topo_config)?;
        if config.lambda_topo > 0.0 {
            if config.topo_terms != TopoTerms::RemovalOnly {
                accumulate_through_sigmoid(&mut grad, &eval.cons_gradient.partials, topo_input.values(), config.lambda_topo);
            }
            if config.topo_terms != TopoTerms::ConsistencyOnly {
                accumulate_through_sigmoid(&mut grad, &eval.rem_gradient.partials, topo_input.values(), config.lambda_topo);
            }
        }

        records.push(StepRecord {
            step,
            ramp_weight,
            pixel_loss,
            supervised_loss: supervised,
            cons_loss: eval.report.cons_loss,
            rem_loss: eval.report.rem_loss,
            signal_dots: eval.report.student.signal.len(),
            noise_dots: eval.report.student.noise.len(),
        });

        for (z, g) in student.logits.iter_mut().zip(&grad) {
            *z -= config.learning_rate * g;
        }
        teacher = ema_update(&teacher, &student, config.ema_decay)?;
    }

    Ok(TrainTrace {
        records,
        student,
        teacher,
    })
}

/// `grad += weight * dL/df * f (1 - f)`; the additive logit noise has unit
/// Jacobian, so the same chain applies to the strong view.
fn accumulate_through_sigmoid(grad: &mut [f64], partials: &[f64], likelihood: &[f64], weight: f64) {
    for ((g, &p), &f) in grad.iter_mut().zip(partials).zip(likelihood) {
        if p != 0.0 {
            *g += weight * p * f * (1.0 - f);
        }
    }
}
