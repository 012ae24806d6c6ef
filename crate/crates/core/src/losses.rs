//! Pixel losses and topological consistency losses with analytic gradients.
//!
//! The topological terms are written as polynomials of the student likelihood
//! at the critical pixels of its persistence diagram. While the pixel order
//! of the student grid is unchanged those pixels are fixed, so the gradient is
//! exact within that neighbourhood and zero away from critical pixels.

use alloc::vec;
use alloc::vec::Vec;

use crate::diagram::{decompose, DecomposedDiagram};
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Connectivity, Direction, LikelihoodGrid};
use crate::matching::{match_diagrams, DiagramMatching, Exponent, Partner};
use crate::persistence::{compute_diagram, diagram_of_values, PersistenceDiagram};

/// Predictions are clamped to `[CE_EPS, 1 - CE_EPS]` inside the logarithms.
pub const CE_EPS: f64 = 1e-7;
/// Smoothing constant of the soft Dice loss.
pub const DICE_EPS: f64 = 1e-6;
/// Absolute floor of the relative-error denominator in [`finite_difference_check`].
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Per-pixel partial derivatives of a loss with respect to a likelihood grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientGrid {
    pub height: usize,
    pub width: usize,
    pub partials: Vec<f64>,
}

impl GradientGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            partials: vec![0.0; height * width],
        }
    }

    /// Row-major indices with a nonzero partial.
    pub fn support(&self) -> Vec<usize> {
        self.partials
            .iter()
            .enumerate()
            .filter(|(_, &g)| g != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Form of the noise removal term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// `sum f(x_b)^2 + f(x_d)^2` over student noise dots.
    #[default]
    SquaredValues,
    /// `sum (f(x_d) - f(x_b))^2 / 2`, collapsing each noise dot onto the diagonal.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopoLossConfig {
    pub phi: f64,
    pub direction: Direction,
    pub connectivity: Connectivity,
    pub noise_mode: NoiseMode,
}

impl Default for TopoLossConfig {
    fn default() -> Self {
        Self {
            phi: crate::DEFAULT_PHI,
            direction: Direction::Sublevel,
            connectivity: Connectivity::Four,
            noise_mode: NoiseMode::SquaredValues,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoLossReport {
    pub cons_loss: f64,
    pub rem_loss: f64,
    /// `cons_loss + rem_loss`.
    pub topo_loss: f64,
    /// Optimal `W_2` matching from student signal dots to teacher signal dots.
    pub matching: DiagramMatching,
    pub student: DecomposedDiagram,
    pub teacher: DecomposedDiagram,
}

/// Loss report together with the gradients of both terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoEvaluation {
    pub report: TopoLossReport,
    pub cons_gradient: GradientGrid,
    pub rem_gradient: GradientGrid,
}

impl TopoEvaluation {
    pub fn total_gradient(&self) -> GradientGrid {
        let mut g = self.cons_gradient.clone();
        for (a, b) in g.partials.iter_mut().zip(&self.rem_gradient.partials) {
            *a += b;
        }
        g
    }
}

fn clamp_prediction(s: f64) -> f64 {
    s.clamp(CE_EPS, 1.0 - CE_EPS)
}

/// Mean binary cross-entropy; `target` is treated as a constant soft label.
pub fn cross_entropy_loss(prediction: &LikelihoodGrid, target: &LikelihoodGrid) -> Result<f64> {
    prediction.ensure_same_dims(target.dims())?;
    Ok(cross_entropy_values(prediction.values(), target.values()))
}

pub(crate) fn cross_entropy_values(prediction: &[f64], target: &[f64]) -> f64 {
    let sum: f64 = prediction
        .iter()
        .zip(target)
        .map(|(&s, &t)| {
            let s = clamp_prediction(s);
            -(t * libm::log(s) + (1.0 - t) * libm::log(1.0 - s))
        })
        .sum();
    sum / prediction.len() as f64
}

/// Gradient of [`cross_entropy_loss`] with respect to the prediction; zero
/// where the clamp is active.
pub fn cross_entropy_gradient(prediction: &LikelihoodGrid, target: &LikelihoodGrid) -> Result<GradientGrid> {
    prediction.ensure_same_dims(target.dims())?;
    let n = prediction.len() as f64;
    let partials = prediction
        .values()
        .iter()
        .zip(target.values())
        .map(|(&s, &t)| {
            if s < CE_EPS || s > 1.0 - CE_EPS {
                0.0
            } else {
                (s - t) / (s * (1.0 - s)) / n
            }
        })
        .collect();
    Ok(GradientGrid {
        height: prediction.height(),
        width: prediction.width(),
        partials,
    })
}

fn ensure_mask(prediction: &LikelihoodGrid, target: &BinaryMask) -> Result<()> {
    prediction.ensure_same_dims(target.dims())
}

/// Soft Dice loss `1 - (2 sum s t + eps) / (sum s + sum t + eps)`.
pub fn dice_loss(prediction: &LikelihoodGrid, target: &BinaryMask) -> Result<f64> {
    ensure_mask(prediction, target)?;
    let (inter, total) = dice_sums(prediction, target);
    Ok(1.0 - (2.0 * inter + DICE_EPS) / (total + DICE_EPS))
}

fn dice_sums(prediction: &LikelihoodGrid, target: &BinaryMask) -> (f64, f64) {
    let mut inter = 0.0;
    let mut total = 0.0;
    for (&s, &t) in prediction.values().iter().zip(target.bits()) {
        let t = if t { 1.0 } else { 0.0 };
        inter += s * t;
        total += s + t;
    }
    (inter, total)
}

pub fn dice_gradient(prediction: &LikelihoodGrid, target: &BinaryMask) -> Result<GradientGrid> {
    ensure_mask(prediction, target)?;
    let (inter, total) = dice_sums(prediction, target);
    let denom = total + DICE_EPS;
    let numer = 2.0 * inter + DICE_EPS;
    let partials = target
        .bits()
        .iter()
        .map(|&t| {
            let t = if t { 1.0 } else { 0.0 };
            -(2.0 * t * denom - numer) / (denom * denom)
        })
        .collect();
    Ok(GradientGrid {
        height: prediction.height(),
        width: prediction.width(),
        partials,
    })
}

fn mask_as_grid(mask: &BinaryMask) -> LikelihoodGrid {
    LikelihoodGrid::from_raw(
        mask.height(),
        mask.width(),
        mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    )
}

/// `ce_weight * CE + dice_weight * Dice` against a binary label.
pub fn supervised_loss(prediction: &LikelihoodGrid, target: &BinaryMask, ce_weight: f64, dice_weight: f64) -> Result<f64> {
    ensure_mask(prediction, target)?;
    let ce = cross_entropy_loss(prediction, &mask_as_grid(target))?;
    Ok(ce_weight * ce + dice_weight * dice_loss(prediction, target)?)
}

pub fn supervised_gradient(prediction: &LikelihoodGrid, target: &BinaryMask, ce_weight: f64, dice_weight: f64) -> Result<GradientGrid> {
    ensure_mask(prediction, target)?;
    let mut g = cross_entropy_gradient(prediction, &mask_as_grid(target))?;
    let dice = dice_gradient(prediction, target)?;
    for (a, b) in g.partials.iter_mut().zip(&dice.partials) {
        *a = ce_weight * *a + dice_weight * b;
    }
    Ok(g)
}

/// Signal consistency and noise removal losses of `student` against `teacher`.
pub fn topo_consistency_loss(student: &LikelihoodGrid, teacher: &LikelihoodGrid, config: &TopoLossConfig) -> Result<TopoLossReport> {
    Ok(topo_consistency(student, teacher, config)?.report)
}

/// Gradient of `cons + rem` with respect to the student likelihood.
pub fn topo_consistency_gradient(student: &LikelihoodGrid, teacher: &LikelihoodGrid, config: &TopoLossConfig) -> Result<GradientGrid> {
    Ok(topo_consistency(student, teacher, config)?.total_gradient())
}

/// Loss report and per-term gradients in one pass.
pub fn topo_consistency(student: &LikelihoodGrid, teacher: &LikelihoodGrid, config: &TopoLossConfig) -> Result<TopoEvaluation> {
    student.ensure_same_dims(teacher.dims())?;
    let teacher_diagram = compute_diagram(teacher, config.direction, config.connectivity)?;
    let teacher_split = decompose(&teacher_diagram, config.phi)?;
    evaluate_against(student.values(), student.dims(), &teacher_split, config)
}

fn evaluate_against(
    values: &[f64],
    (height, width): (usize, usize),
    teacher: &DecomposedDiagram,
    config: &TopoLossConfig,
) -> Result<TopoEvaluation> {
    let diagram = diagram_of_values(values, height, width, config.direction, config.connectivity);
    let student = decompose(&diagram, config.phi)?;
    let matching = match_diagrams(&student.signal, &teacher.signal, Exponent::Finite(2.0));

    let mut cons_gradient = GradientGrid::zeros(height, width);
    let cons_loss = signal_consistency(values, &student.signal, &teacher.signal, &matching, &mut cons_gradient.partials);
    let mut rem_gradient = GradientGrid::zeros(height, width);
    let rem_loss = noise_removal(values, &student.noise, config.noise_mode, &mut rem_gradient.partials);

    Ok(TopoEvaluation {
        report: TopoLossReport {
            cons_loss,
            rem_loss,
            topo_loss: cons_loss + rem_loss,
            matching,
            student,
            teacher: teacher.clone(),
        },
        cons_gradient,
        rem_gradient,
    })
}

/// `sum_p [f(x_b) - birth(g(p))]^2 + [f(x_d) - death(g(p))]^2` over student
/// signal dots, with a diagonal match standing for the dot's own projection.
fn signal_consistency(
    values: &[f64],
    student: &PersistenceDiagram,
    teacher: &PersistenceDiagram,
    matching: &DiagramMatching,
    gradient: &mut [f64],
) -> f64 {
    let mut loss = 0.0;
    for (i, dot) in student.dots.iter().enumerate() {
        let birth = values[dot.birth_pixel];
        let partner = matching.partner_of_left(i);
        match dot.death_pixel {
            Some(death_pixel) => {
                let death = values[death_pixel];
                let (tb, td) = match partner {
                    Partner::Dot(j) => (teacher.dots[j].birth, teacher.dots[j].death),
                    Partner::Diagonal => {
                        let mid = 0.5 * (birth + death);
                        (mid, mid)
                    }
                };
                // For the projection the residuals sum to zero, so the
                // moving target leaves these partials unchanged.
                loss += (birth - tb) * (birth - tb) + (death - td) * (death - td);
                gradient[dot.birth_pixel] += 2.0 * (birth - tb);
                gradient[death_pixel] += 2.0 * (death - td);
            }
            None => {
                // Essential class: only the birth coordinate can move.
                match partner {
                    Partner::Dot(j) => {
                        let tb = teacher.dots[j].birth;
                        loss += (birth - tb) * (birth - tb);
                        gradient[dot.birth_pixel] += 2.0 * (birth - tb);
                    }
                    Partner::Diagonal => {
                        let mid = 0.5 * (birth + dot.death);
                        loss += (birth - mid) * (birth - mid);
                        gradient[dot.birth_pixel] += birth - mid;
                    }
                }
            }
        }
    }
    loss
}

fn noise_removal(values: &[f64], noise: &PersistenceDiagram, mode: NoiseMode, gradient: &mut [f64]) -> f64 {
    let mut loss = 0.0;
    for dot in &noise.dots {
        let birth = values[dot.birth_pixel];
        match (mode, dot.death_pixel) {
            (NoiseMode::SquaredValues, Some(death_pixel)) => {
                let death = values[death_pixel];
                loss += birth * birth + death * death;
                gradient[dot.birth_pixel] += 2.0 * birth;
                gradient[death_pixel] += 2.0 * death;
            }
            (NoiseMode::SquaredValues, None) => {
                loss += birth * birth;
                gradient[dot.birth_pixel] += 2.0 * birth;
            }
            (NoiseMode::Diagonal, Some(death_pixel)) => {
                let gap = values[death_pixel] - birth;
                loss += 0.5 * gap * gap;
                gradient[death_pixel] += gap;
                gradient[dot.birth_pixel] -= gap;
            }
            // The essential class never dies, so it has nothing to collapse.
            (NoiseMode::Diagonal, None) => {}
        }
    }
    loss
}

/// Compares the analytic topological gradient with central differences
/// `(L(f + h e_i) - L(f - h e_i)) / 2h` at every critical pixel of the
/// student diagram and returns the largest relative error
/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
///
/// `h` must stay below half the smallest gap between distinct student values
/// so that no perturbation reorders pixels.
pub fn finite_difference_check(
    student: &LikelihoodGrid,
    teacher: &LikelihoodGrid,
    config: &TopoLossConfig,
    h: f64,
) -> Result<f64> {
    student.ensure_same_dims(teacher.dims())?;
    let limit = 0.5 * min_value_gap(student.values());
    if !(h > 0.0 && h < limit) {
        return Err(Error::StepTooLarge { step: h, limit });
    }
    let teacher_split = decompose(&compute_diagram(teacher, config.direction, config.connectivity)?, config.phi)?;
    let base = evaluate_against(student.values(), student.dims(), &teacher_split, config)?;
    let analytic = base.total_gradient();

    let mut critical: Vec<usize> = base
        .report
        .student
        .signal
        .dots
        .iter()
        .chain(&base.report.student.noise.dots)
        .flat_map(|d| core::iter::once(d.birth_pixel).chain(d.death_pixel))
        .collect();
    critical.sort_unstable();
    critical.dedup();

    let mut worst: f64 = 0.0;
    let mut probe = student.values().to_vec();
    for &pixel in &critical {
        let original = probe[pixel];
        probe[pixel] = original + h;
        let plus = evaluate_against(&probe, student.dims(), &teacher_split, config)?.report.topo_loss;
        probe[pixel] = original - h;
        let minus = evaluate_against(&probe, student.dims(), &teacher_split, config)?.report.topo_loss;
        probe[pixel] = original;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.partials[pixel];
        let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Smallest positive difference between sorted values; infinite when all equal.
fn min_value_gap(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::PersistentDot;

    const LN2: f64 = core::f64::consts::LN_2;

    fn constant(h: usize, w: usize, v: f64) -> LikelihoodGrid {
        LikelihoodGrid::new(h, w, vec![v; h * w]).unwrap()
    }

    fn ones_mask(h: usize, w: usize) -> BinaryMask {
        BinaryMask::new(h, w, vec![true; h * w]).unwrap()
    }

    #[test]
    fn cross_entropy_examples() {
        let ones = constant(3, 3, 1.0);
        let l = cross_entropy_loss(&ones, &ones).unwrap();
        assert!((l - -libm::log(1.0 - CE_EPS)).abs() < 1e-15);
        assert!((l - 1e-7).abs() < 1e-12);

        let half = constant(3, 3, 0.5);
        assert!((cross_entropy_loss(&half, &ones).unwrap() - LN2).abs() < 1e-12);

        let tiny = constant(3, 3, 1e-7);
        let l = cross_entropy_loss(&tiny, &ones).unwrap();
        assert!((l - 16.118_095_650_958_32).abs() < 1e-9);

        assert!(cross_entropy_loss(&half, &constant(2, 3, 0.5)).is_err());
    }

    #[test]
    fn dice_examples() {
        let n = 16.0;
        let mask = ones_mask(4, 4);
        assert!(dice_loss(&constant(4, 4, 1.0), &mask).unwrap().abs() < 1e-9);
        let zero = dice_loss(&constant(4, 4, 0.0), &mask).unwrap();
        assert!((zero - (1.0 - DICE_EPS / (n + DICE_EPS))).abs() < 1e-15);
        let half = dice_loss(&constant(4, 4, 0.5), &mask).unwrap();
        assert!((half - (1.0 - (n + DICE_EPS) / (1.5 * n + DICE_EPS))).abs() < 1e-15);
        assert!((half - 1.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn supervised_examples() {
        let mask = ones_mask(4, 4);
        assert!(supervised_loss(&constant(4, 4, 1.0), &mask, 0.5, 0.5).unwrap() < 1e-6);
        let half = constant(4, 4, 0.5);
        let ce = cross_entropy_loss(&half, &mask_as_grid(&mask)).unwrap();
        assert_eq!(supervised_loss(&half, &mask, 1.0, 0.0).unwrap(), ce);
        let mixed = supervised_loss(&half, &mask, 0.5, 0.5).unwrap();
        assert!((mixed - (0.5 * LN2 + 0.5 / 3.0)).abs() < 1e-7);
        assert!((mixed - 0.51324).abs() < 1e-5);
    }

    /// Central differences of a scalar function of the grid values.
    fn numeric_gradient(values: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let h = 1e-6;
        let mut probe = values.to_vec();
        (0..values.len())
            .map(|i| {
                let v = probe[i];
                probe[i] = v + h;
                let plus = f(&probe);
                probe[i] = v - h;
                let minus = f(&probe);
                probe[i] = v;
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn pixel_gradients_match_central_differences() {
        let values: Vec<f64> = (0..12).map(|i| 0.05 + 0.07 * i as f64).collect();
        let pred = LikelihoodGrid::new(3, 4, values.clone()).unwrap();
        let mask = BinaryMask::from_fn(3, 4, |r, c| (r + c) % 2 == 0).unwrap();
        let analytic = supervised_gradient(&pred, &mask, 0.3, 0.7).unwrap();
        let numeric = numeric_gradient(&values, |v| {
            supervised_loss(&LikelihoodGrid::from_raw(3, 4, v.to_vec()), &mask, 0.3, 0.7).unwrap()
        });
        for (a, n) in analytic.partials.iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-6, "{a} vs {n}");
        }
    }

    fn dot(birth: f64, death: f64, bp: usize, dp: Option<usize>) -> PersistentDot {
        PersistentDot { birth, death, birth_pixel: bp, death_pixel: dp }
    }

    fn diagram(dots: Vec<PersistentDot>) -> PersistenceDiagram {
        PersistenceDiagram::new(dots, Direction::Sublevel, None)
    }

    #[test]
    fn signal_term_against_matched_teacher_dot() {
        let values = [0.3, 0.8];
        let student = diagram(vec![dot(0.3, 0.8, 0, Some(1))]);
        let teacher = diagram(vec![dot(0.2, 0.9, 0, Some(1))]);
        let matching = match_diagrams(&student, &teacher, Exponent::Finite(2.0));
        let mut g = vec![0.0; 2];
        let loss = signal_consistency(&values, &student, &teacher, &matching, &mut g);
        assert!((loss - 0.02).abs() < 1e-12);
        assert!((g[0] - 0.2).abs() < 1e-12);
        assert!((g[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn signal_term_against_diagonal() {
        let values = [0.4, 0.9];
        let student = diagram(vec![dot(0.4, 0.9, 0, Some(1))]);
        let teacher = diagram(vec![]);
        let matching = match_diagrams(&student, &teacher, Exponent::Finite(2.0));
        let mut g = vec![0.0; 2];
        let loss = signal_consistency(&values, &student, &teacher, &matching, &mut g);
        assert!((loss - 0.125).abs() < 1e-12);
    }

    #[test]
    fn noise_term_examples() {
        let values = [0.4, 0.45];
        let noise = diagram(vec![dot(0.4, 0.45, 0, Some(1))]);
        let mut g = vec![0.0; 2];
        let loss = noise_removal(&values, &noise, NoiseMode::SquaredValues, &mut g);
        assert!((loss - 0.3625).abs() < 1e-12);
        assert!((g[0] - 0.8).abs() < 1e-12 && (g[1] - 0.9).abs() < 1e-12);

        let mut g = vec![0.0; 2];
        let loss = noise_removal(&values, &noise, NoiseMode::Diagonal, &mut g);
        assert!((loss - 0.5 * 0.05 * 0.05).abs() < 1e-12);
        assert!((g[0] + 0.05).abs() < 1e-12 && (g[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn gradients_accumulate_on_shared_pixels() {
        // Two noise dots dying at the same pixel.
        let values = [0.3, 0.5, 0.35];
        let noise = diagram(vec![dot(0.3, 0.5, 0, Some(1)), dot(0.35, 0.5, 2, Some(1))]);
        let mut g = vec![0.0; 3];
        noise_removal(&values, &noise, NoiseMode::SquaredValues, &mut g);
        assert!((g[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_student_and_teacher_have_zero_consistency_gradient() {
        let g = LikelihoodGrid::new(3, 3, vec![0.1, 0.9, 0.2, 0.95, 0.97, 0.93, 0.6, 0.99, 0.05]).unwrap();
        let eval = topo_consistency(&g, &g, &TopoLossConfig::default()).unwrap();
        assert_eq!(eval.report.cons_loss, 0.0);
        assert!(eval.cons_gradient.partials.iter().all(|&x| x == 0.0));
        assert_eq!(eval.report.topo_loss, eval.report.cons_loss + eval.report.rem_loss);
    }

    #[test]
    fn loss_on_walkthrough_grid() {
        // Student noise dot (0.42, 0.46); essential (0.30, 1.0) is signal at phi 0.5.
        let s = LikelihoodGrid::new(1, 4, vec![0.42, 0.46, 0.30, 0.90]).unwrap();
        let cfg = TopoLossConfig { phi: 0.5, ..TopoLossConfig::default() };
        let eval = topo_consistency(&s, &s, &cfg).unwrap();
        assert!((eval.report.rem_loss - (0.42f64.powi(2) + 0.46f64.powi(2))).abs() < 1e-12);
        let grad = eval.total_gradient();
        assert!((grad.partials[0] - 0.84).abs() < 1e-12);
        assert!((grad.partials[1] - 0.92).abs() < 1e-12);
        assert_eq!(grad.support(), vec![0, 1]);
    }

    #[test]
    fn finite_difference_guard() {
        let s = LikelihoodGrid::new(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let cfg = TopoLossConfig::default();
        assert!(matches!(finite_difference_check(&s, &s, &cfg, 0.06), Err(Error::StepTooLarge { .. })));
        assert!(finite_difference_check(&s, &s, &cfg, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn finite_difference_of_zero_loss_is_zero() {
        // Monotone ramp: one essential dot born at 0, nothing to pay.
        let s = LikelihoodGrid::new(1, 4, vec![0.0, 0.2, 0.4, 0.6]).unwrap();
        let cfg = TopoLossConfig::default();
        assert_eq!(finite_difference_check(&s, &s, &cfg, 1e-5).unwrap(), 0.0);
    }
}
