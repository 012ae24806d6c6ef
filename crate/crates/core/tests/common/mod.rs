#![allow(dead_code)]

use proptest::prelude::*;
use topocons_core::{BinaryMask, LikelihoodGrid};

/// Grids whose values are a shuffled, jittered ladder: all values are
/// distinct, consecutive values differ by at least `0.5 / (h w + 1)`, and the
/// jitter keeps sums of squared differences from tying exactly.
pub fn distinct_grid(height: usize, width: usize) -> impl Strategy<Value = LikelihoodGrid> {
    let n = height * width;
    (
        Just((1..=n).collect::<Vec<usize>>()).prop_shuffle(),
        proptest::collection::vec(0.0f64..0.5, n),
    )
        .prop_map(move |(ranks, jitter)| {
            let values = ranks
                .iter()
                .map(|&r| (r as f64 + jitter[r - 1]) / (n + 1) as f64)
                .collect();
            LikelihoodGrid::new(height, width, values).unwrap()
        })
}

/// Grids with few distinct levels, so ties and plateaus are common.
pub fn coarse_grid(height: usize, width: usize) -> impl Strategy<Value = LikelihoodGrid> {
    proptest::collection::vec(0u8..5, height * width).prop_map(move |levels| {
        LikelihoodGrid::new(height, width, levels.iter().map(|&l| l as f64 / 4.0).collect()).unwrap()
    })
}

pub fn any_mask(height: usize, width: usize) -> impl Strategy<Value = BinaryMask> {
    proptest::collection::vec(any::<bool>(), height * width)
        .prop_map(move |bits| BinaryMask::new(height, width, bits).unwrap())
}

pub fn neighbors4(index: usize, height: usize, width: usize) -> Vec<usize> {
    let (r, c) = (index / width, index % width);
    let mut out = Vec::new();
    if r > 0 {
        out.push(index - width);
    }
    if c > 0 {
        out.push(index - 1);
    }
    if c + 1 < width {
        out.push(index + 1);
    }
    if r + 1 < height {
        out.push(index + width);
    }
    out
}

/// Component id per pixel of `member` (None outside), by breadth-first search.
pub fn components(member: &[bool], height: usize, width: usize) -> (Vec<Option<usize>>, usize) {
    let mut id = vec![None; member.len()];
    let mut count = 0;
    for start in 0..member.len() {
        if !member[start] || id[start].is_some() {
            continue;
        }
        id[start] = Some(count);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for q in neighbors4(p, height, width) {
                if member[q] && id[q].is_none() {
                    id[q] = Some(count);
                    queue.push_back(q);
                }
            }
        }
        count += 1;
    }
    (id, count)
}

/// Sublevel 0-dim diagram by relabeling components at every distinct level
/// and applying the elder rule to components that merged since the previous
/// level. Returns sorted (birth, death) pairs without zero-persistence dots.
pub fn brute_force_sublevel_pairs(grid: &LikelihoodGrid) -> Vec<(f64, f64)> {
    let (h, w) = grid.dims();
    let values = grid.values();
    let mut levels: Vec<f64> = values.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    // Birth value of each live component, keyed by its representative pixel set.
    let mut previous: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut pairs = Vec::new();
    for &c in &levels {
        let member: Vec<bool> = values.iter().map(|&v| v <= c).collect();
        let (id, count) = components(&member, h, w);
        let mut current: Vec<(Vec<usize>, f64)> = Vec::with_capacity(count);
        for k in 0..count {
            let pixels: Vec<usize> = (0..values.len()).filter(|&p| id[p] == Some(k)).collect();
            let mut births: Vec<f64> = previous
                .iter()
                .filter(|(old, _)| id[old[0]] == Some(k))
                .map(|&(_, b)| b)
                .collect();
            births.sort_by(f64::total_cmp);
            let birth = if births.is_empty() { c } else { births[0] };
            for &younger in births.iter().skip(1) {
                if c > younger {
                    pairs.push((younger, c));
                }
            }
            current.push((pixels, birth));
        }
        previous = current;
    }
    for (_, birth) in previous {
        pairs.push((birth, 1.0));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs
}

pub fn sorted_finite_pairs(diagram: &topocons_core::PersistenceDiagram) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = diagram
        .dots
        .iter()
        .filter(|d| d.persistence() > 0.0)
        .map(|d| (d.birth, d.death))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs
}
