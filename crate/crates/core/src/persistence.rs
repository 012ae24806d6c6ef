//! 0-dimensional persistence of sublevel and superlevel filtrations.
//!
//! Pixels enter the filtration one at a time in a single global order: by
//! value (ascending for sublevel, descending for superlevel), ties broken by
//! row-major index. Components are tracked with a union-find whose roots
//! remember their birth pixel; on a merge the younger component dies at the
//! pixel being inserted (elder rule). The component that never dies is the
//! essential class, reported with death 1.0 for sublevel and 0.0 for
//! superlevel filtrations so every dot stays inside the unit square.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::{label_components, threshold, Connectivity, Direction, LikelihoodGrid};
use crate::union_find::UnionFind;

/// One connected component's lifetime, in original value coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistentDot {
    pub birth: f64,
    pub death: f64,
    /// Row-major index of the pixel whose value is `birth`.
    pub birth_pixel: usize,
    /// Row-major index of the merging pixel; `None` for the essential class.
    pub death_pixel: Option<usize>,
}

impl PersistentDot {
    pub fn is_essential(&self) -> bool {
        self.death_pixel.is_none()
    }

    /// Life span `|death - birth|`.
    pub fn persistence(&self) -> f64 {
        (self.death - self.birth).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub dots: Vec<PersistentDot>,
    pub direction: Direction,
    /// `(height, width)` of the source grid, when known.
    pub source_dims: Option<(usize, usize)>,
}

impl PersistenceDiagram {
    pub fn new(dots: Vec<PersistentDot>, direction: Direction, source_dims: Option<(usize, usize)>) -> Self {
        Self {
            dots,
            direction,
            source_dims,
        }
    }

    pub fn empty(direction: Direction) -> Self {
        Self::new(Vec::new(), direction, None)
    }

    pub fn len(&self) -> usize {
        self.dots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dots.is_empty()
    }

    pub fn essential(&self) -> Option<&PersistentDot> {
        self.dots.iter().find(|d| d.is_essential())
    }

    /// `(birth, death)` pairs sorted lexicographically, for multiset comparison.
    pub fn sorted_pairs(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self.dots.iter().map(|d| (d.birth, d.death)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pairs
    }
}

/// Death value assigned to the essential class.
pub fn essential_death(direction: Direction) -> f64 {
    match direction {
        Direction::Sublevel => 1.0,
        Direction::Superlevel => 0.0,
    }
}

/// Orders two pixels by filtration entry time.
#[inline]
fn entry_order(values: &[f64], direction: Direction, a: usize, b: usize) -> Ordering {
    let by_value = match direction {
        Direction::Sublevel => values[a].total_cmp(&values[b]),
        Direction::Superlevel => values[b].total_cmp(&values[a]),
    };
    by_value.then(a.cmp(&b))
}

pub(crate) fn filtration_order(values: &[f64], direction: Direction) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| entry_order(values, direction, a, b));
    order
}

pub fn compute_diagram(
    grid: &LikelihoodGrid,
    direction: Direction,
    connectivity: Connectivity,
) -> Result<PersistenceDiagram> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(diagram_of_values(
        grid.values(),
        grid.height(),
        grid.width(),
        direction,
        connectivity,
    ))
}

/// Union-find persistence over a raw value buffer (values are not range-checked).
pub(crate) fn diagram_of_values(
    values: &[f64],
    height: usize,
    width: usize,
    direction: Direction,
    connectivity: Connectivity,
) -> PersistenceDiagram {
    let order = filtration_order(values, direction);
    let mut rank = vec![0usize; values.len()];
    for (position, &pixel) in order.iter().enumerate() {
        rank[pixel] = position;
    }

    let mut uf = UnionFind::new(values.len());
    let mut inserted = vec![false; values.len()];
    let mut finite = Vec::new();
    for &pixel in &order {
        inserted[pixel] = true;
        connectivity.for_each_neighbor(pixel, height, width, |neighbor| {
            if !inserted[neighbor] {
                return;
            }
            let a = uf.find(pixel);
            let b = uf.find(neighbor);
            if a == b {
                return;
            }
            let (elder, younger) = if rank[uf.birth(a)] < rank[uf.birth(b)] {
                (a, b)
            } else {
                (b, a)
            };
            let born = uf.birth(younger);
            // A singleton joining its first neighbour is not a feature.
            if born != pixel {
                finite.push(PersistentDot {
                    birth: values[born],
                    death: values[pixel],
                    birth_pixel: born,
                    death_pixel: Some(pixel),
                });
            }
            uf.attach(younger, elder);
        });
    }

    let root = uf.find(order[0]);
    let first = uf.birth(root);
    let mut dots = Vec::with_capacity(finite.len() + 1);
    dots.push(PersistentDot {
        birth: values[first],
        death: essential_death(direction),
        birth_pixel: first,
        death_pixel: None,
    });
    dots.extend(finite);
    PersistenceDiagram::new(dots, direction, Some((height, width)))
}

/// 0-th Betti number of the filtration at threshold `c`.
///
/// A dot counts when it is born at or before `c` and has not yet died; the
/// essential dot counts as soon as it is born, including at the range end.
pub fn betti_curve(diagram: &PersistenceDiagram, c: f64) -> usize {
    diagram
        .dots
        .iter()
        .filter(|dot| match diagram.direction {
            Direction::Sublevel => dot.birth <= c && (dot.is_essential() || c < dot.death),
            Direction::Superlevel => dot.birth >= c && (dot.is_essential() || c > dot.death),
        })
        .count()
}

/// Largest grid the brute-force oracle accepts.
pub const ORACLE_PIXEL_LIMIT: usize = 400;

/// Brute-force diagram: relabels the thresholded mask from scratch at every
/// distinct value and reads births and deaths off the component changes
/// between consecutive levels. Features born and killed at the same level
/// (possible only with tied values) are invisible to it.
pub fn oracle_diagram(
    grid: &LikelihoodGrid,
    direction: Direction,
    connectivity: Connectivity,
) -> Result<PersistenceDiagram> {
    if grid.len() > ORACLE_PIXEL_LIMIT {
        return Err(Error::GridTooLarge {
            pixels: grid.len(),
            limit: ORACLE_PIXEL_LIMIT,
        });
    }
    let values = grid.values();
    let mut levels: Vec<f64> = values.to_vec();
    levels.sort_by(|a, b| match direction {
        Direction::Sublevel => a.total_cmp(b),
        Direction::Superlevel => b.total_cmp(a),
    });
    levels.dedup();

    // Birth pixel of each component at the previous level, indexed by label.
    let mut previous_labels: Vec<u32> = vec![0; values.len()];
    let mut previous_births: Vec<usize> = Vec::new();
    let mut dots = Vec::new();
    for &level in &levels {
        let labeling = label_components(&threshold(grid, level, direction), connectivity);
        let count = labeling.component_count;
        let mut births: Vec<Option<usize>> = vec![None; count];
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); count];
        let mut new_pixel: Vec<Option<usize>> = vec![None; count];
        for (pixel, &label) in labeling.labels.iter().enumerate() {
            if label == 0 {
                continue;
            }
            let k = (label - 1) as usize;
            let older = match births[k] {
                Some(b) => entry_order(values, direction, pixel, b) == Ordering::Less,
                None => true,
            };
            if older {
                births[k] = Some(pixel);
            }
            let prev = previous_labels[pixel];
            if prev != 0 && !members[k].contains(&prev) {
                members[k].push(prev);
            }
            if prev == 0 && values[pixel] == level && new_pixel[k].is_none() {
                new_pixel[k] = Some(pixel);
            }
        }
        for k in 0..count {
            if members[k].len() < 2 {
                continue;
            }
            let mut merged: Vec<usize> = members[k]
                .iter()
                .map(|&l| previous_births[(l - 1) as usize])
                .collect();
            merged.sort_by(|&a, &b| entry_order(values, direction, a, b));
            for &born in &merged[1..] {
                dots.push(PersistentDot {
                    birth: values[born],
                    death: level,
                    birth_pixel: born,
                    death_pixel: new_pixel[k],
                });
            }
        }
        previous_labels = labeling.labels;
        previous_births = births.into_iter().map(|b| b.unwrap_or(0)).collect();
    }
    // Whatever survives the last level never dies.
    for &born in &previous_births {
        dots.insert(
            0,
            PersistentDot {
                birth: values[born],
                death: essential_death(direction),
                birth_pixel: born,
                death_pixel: None,
            },
        );
    }
    Ok(PersistenceDiagram::new(dots, direction, Some(grid.dims())))
}
