//! Deterministic synthetic grids for end-to-end runs.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{threshold, BinaryMask, Direction, LikelihoodGrid};
use crate::trainer::LogitsGrid;

/// Side of the square scenario grids.
pub const SCENARIO_SIDE: usize = 32;

const DEEP_CENTERS: [(f64, f64); 3] = [(8.0, 8.0), (8.0, 24.0), (24.0, 16.0)];
const DEEP_FLOOR: f64 = 0.02;
const DEEP_RISE: f64 = 0.95;
const DEEP_SCALE: f64 = 4.0;
const DENT_DEPTH: f64 = 0.2;
const DENT_SLOPE: f64 = 0.15;
const DENT_RADIUS: f64 = 3.5;

/// A sublevel landscape with three deep basins and ten shallow dents.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRemovalScenario {
    pub grid: LikelihoodGrid,
    /// Pixel indices of the deep basin floors.
    pub deep_minima: Vec<usize>,
    /// Pixel indices of the dent floors.
    pub dent_minima: Vec<usize>,
}

fn to_pixel((row, col): (f64, f64)) -> (usize, usize) {
    (libm::round(row) as usize, libm::round(col) as usize)
}

fn dent_positions() -> Vec<(usize, usize)> {
    // Four dents around each of the first two basins, two around the third.
    let counts = [4usize, 4, 2];
    let mut out = Vec::new();
    for (center, &count) in DEEP_CENTERS.iter().zip(&counts) {
        for k in 0..count {
            let angle = 0.4 + k as f64 * core::f64::consts::TAU / count as f64;
            out.push(to_pixel((
                center.0 + DENT_RADIUS * libm::sin(angle),
                center.1 + DENT_RADIUS * libm::cos(angle),
            )));
        }
    }
    out
}

fn basin_height(row: f64, col: f64) -> f64 {
    let r = DEEP_CENTERS
        .iter()
        .map(|&(cr, cc)| libm::hypot(row - cr, col - cc))
        .fold(f64::INFINITY, f64::min);
    DEEP_FLOOR + DEEP_RISE * (1.0 - libm::exp(-r / DEEP_SCALE))
}

/// Builds the noise-removal landscape: `min(basins, dent cones)` plus a tiny
/// index-dependent offset that keeps all values distinct.
pub fn noise_removal_scenario() -> NoiseRemovalScenario {
    let side = SCENARIO_SIDE;
    let dents: Vec<(usize, usize, f64)> = dent_positions()
        .into_iter()
        .map(|(r, c)| (r, c, basin_height(r as f64, c as f64) - DENT_DEPTH))
        .collect();
    let grid = LikelihoodGrid::from_fn(side, side, |row, col| {
        let (y, x) = (row as f64, col as f64);
        let mut v = basin_height(y, x);
        for &(dr, dc, floor) in &dents {
            let cone = floor + DENT_SLOPE * libm::hypot(y - dr as f64, x - dc as f64);
            v = v.min(cone);
        }
        let jitter = ((row * 7919 + col * 104_729) % 1009) as f64 * 1e-8;
        (v + jitter).min(1.0)
    })
    .expect("scenario values stay in [0, 1]");
    NoiseRemovalScenario {
        grid,
        deep_minima: DEEP_CENTERS.iter().map(|&p| {
            let (r, c) = to_pixel(p);
            r * side + c
        }).collect(),
        dent_minima: dents.iter().map(|&(r, c, _)| r * side + c).collect(),
    }
}

/// Teacher with three dark disks on a bright background, a student that is a
/// noisy copy of it, and the reference mask of the teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyScenario {
    pub teacher: LogitsGrid,
    pub student: LogitsGrid,
    /// `teacher <= 0.5`.
    pub reference: BinaryMask,
}

const DISK_CENTERS: [(f64, f64); 3] = [(8.0, 9.0), (10.0, 24.0), (24.0, 15.0)];
const DISK_RADIUS: f64 = 4.5;
const DISK_LOGIT: f64 = 3.0;

/// Builds the consistency scenario with Gaussian logit noise of the given
/// standard deviation on the student.
pub fn consistency_scenario(noise_sigma: f64, seed: u64) -> ConsistencyScenario {
    let side = SCENARIO_SIDE;
    let teacher_logits: Vec<f64> = (0..side * side)
        .map(|i| {
            let (y, x) = ((i / side) as f64, (i % side) as f64);
            let inside = DISK_CENTERS
                .iter()
                .any(|&(r, c)| libm::hypot(y - r, x - c) <= DISK_RADIUS);
            if inside {
                -DISK_LOGIT
            } else {
                DISK_LOGIT
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let student_logits = teacher_logits
        .iter()
        .map(|&z| {
            let n: f64 = StandardNormal.sample(&mut rng);
            z + noise_sigma * n
        })
        .collect();
    let teacher = LogitsGrid::new(side, side, teacher_logits).expect("square grid");
    let student = LogitsGrid::new(side, side, student_logits).expect("square grid");
    let reference = threshold(&teacher.likelihood(), 0.5, Direction::Sublevel);
    ConsistencyScenario {
        teacher,
        student,
        reference,
    }
}
