//! Grid types, thresholding and connected-component labeling.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Which end of the value range the filtration starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Pixels enter in increasing value order; components are born at minima.
    #[default]
    Sublevel,
    /// Pixels enter in decreasing value order; components are born at maxima.
    Superlevel,
}

/// Pixel adjacency used for foreground components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    /// Calls `visit` with the linear index of every in-bounds neighbour of `index`.
    #[inline]
    pub(crate) fn for_each_neighbor(
        self,
        index: usize,
        height: usize,
        width: usize,
        mut visit: impl FnMut(usize),
    ) {
        let row = index / width;
        let col = index % width;
        let up = row > 0;
        let down = row + 1 < height;
        let left = col > 0;
        let right = col + 1 < width;
        if up {
            visit(index - width);
        }
        if left {
            visit(index - 1);
        }
        if right {
            visit(index + 1);
        }
        if down {
            visit(index + width);
        }
        if self == Connectivity::Eight {
            if up && left {
                visit(index - width - 1);
            }
            if up && right {
                visit(index - width + 1);
            }
            if down && left {
                visit(index + width - 1);
            }
            if down && right {
                visit(index + width + 1);
            }
        }
    }
}

/// A row-major grid of likelihoods in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl LikelihoodGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(height, width, values.len())?;
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Builds a grid from a function of `(row, col)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                values.push(f(row, col));
            }
        }
        Self::new(height, width, values)
    }

    /// A grid whose values may leave `[0, 1]`; used for finite differences.
    pub(crate) fn from_raw(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub(crate) fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other,
            });
        }
        Ok(())
    }
}

/// A row-major foreground mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        check_shape(height, width, bits.len())?;
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Self::new(height, width, bits)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Pixelwise AND.
    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        ensure_mask_dims(self, other)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(BinaryMask {
            height: self.height,
            width: self.width,
            bits,
        })
    }

    /// The sub-mask starting at `(row, col)`, truncated at the grid border.
    pub fn window(&self, row: usize, col: usize, height: usize, width: usize) -> BinaryMask {
        let h = height.min(self.height.saturating_sub(row));
        let w = width.min(self.width.saturating_sub(col));
        let mut bits = Vec::with_capacity(h * w);
        for r in row..row + h {
            bits.extend_from_slice(&self.bits[r * self.width + col..r * self.width + col + w]);
        }
        BinaryMask {
            height: h,
            width: w,
            bits,
        }
    }

    pub fn transpose(&self) -> BinaryMask {
        let mut bits = vec![false; self.bits.len()];
        for r in 0..self.height {
            for c in 0..self.width {
                bits[c * self.height + r] = self.bits[r * self.width + c];
            }
        }
        BinaryMask {
            height: self.width,
            width: self.height,
            bits,
        }
    }
}

pub(crate) fn ensure_mask_dims(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

fn check_shape(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 || height.checked_mul(width) != Some(len) {
        return Err(Error::InvalidShape { height, width, len });
    }
    Ok(())
}

/// Connected components of a mask. Label 0 is background; foreground
/// components are numbered from 1 in row-major order of first encounter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
    pub component_count: usize,
}

/// Sublevel marks `value <= c`; superlevel marks `value >= c`.
pub fn threshold(grid: &LikelihoodGrid, c: f64, direction: Direction) -> BinaryMask {
    let bits = grid
        .values
        .iter()
        .map(|&v| match direction {
            Direction::Sublevel => v <= c,
            Direction::Superlevel => v >= c,
        })
        .collect();
    BinaryMask {
        height: grid.height,
        width: grid.width,
        bits,
    }
}

pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let (height, width) = mask.dims();
    let mut labels = vec![0u32; mask.bits.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(pixel) = stack.pop() {
            connectivity.for_each_neighbor(pixel, height, width, |n| {
                if mask.bits[n] && labels[n] == 0 {
                    labels[n] = next;
                    stack.push(n);
                }
            });
        }
    }
    ComponentLabeling {
        height,
        width,
        labels,
        component_count: next as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from(height: usize, width: usize, on: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(height, width, |r, c| on.contains(&(r, c))).unwrap()
    }

    #[test]
    fn rejects_values_outside_unit_interval() {
        let err = LikelihoodGrid::new(1, 3, vec![0.0, 1.5, 0.2]).unwrap_err();
        assert_eq!(err, Error::ValueOutOfRange { index: 1, value: 1.5 });
        assert!(LikelihoodGrid::new(1, 1, vec![f64::NAN]).is_err());
        assert!(LikelihoodGrid::new(2, 2, vec![0.0; 3]).is_err());
        assert!(LikelihoodGrid::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let g = LikelihoodGrid::new(2, 2, vec![0.1, 0.9, 0.2, 0.8]).unwrap();
        assert_eq!(threshold(&g, 0.5, Direction::Sublevel).bits(), &[true, false, true, false]);
        assert_eq!(threshold(&g, 0.5, Direction::Superlevel).bits(), &[false, true, false, true]);
        assert_eq!(threshold(&g, 1.0, Direction::Sublevel).count_ones(), 4);
    }

    #[test]
    fn labeling_examples() {
        let corners = mask_from(3, 3, &[(0, 0), (2, 2)]);
        assert_eq!(label_components(&corners, Connectivity::Four).component_count, 2);

        let diag = mask_from(3, 3, &[(0, 0), (1, 1), (2, 2)]);
        assert_eq!(label_components(&diag, Connectivity::Eight).component_count, 1);
        assert_eq!(label_components(&diag, Connectivity::Four).component_count, 3);

        let empty = mask_from(3, 3, &[]);
        assert_eq!(label_components(&empty, Connectivity::Four).component_count, 0);
    }

    #[test]
    fn labels_follow_first_encounter_order() {
        // U shape: the right arm is first met on row 0 but belongs to component 1.
        let m = mask_from(3, 3, &[(0, 0), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1), (2, 2)]);
        let l = label_components(&m, Connectivity::Four);
        assert_eq!(l.component_count, 1);
        let m = mask_from(2, 3, &[(0, 2), (1, 0)]);
        let l = label_components(&m, Connectivity::Four);
        assert_eq!(l.labels, vec![0, 0, 1, 2, 0, 0]);
    }

    #[test]
    fn window_truncates_at_border() {
        let m = mask_from(3, 5, &[(2, 4)]);
        let w = m.window(2, 3, 4, 4);
        assert_eq!(w.dims(), (1, 2));
        assert_eq!(w.bits(), &[false, true]);
    }

    proptest! {
        #[test]
        fn sublevel_filtration_is_monotone(
            values in proptest::collection::vec(0.0f64..=1.0, 30),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let g = LikelihoodGrid::new(5, 6, values).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = threshold(&g, lo, Direction::Sublevel);
            let large = threshold(&g, hi, Direction::Sublevel);
            prop_assert!(small.bits().iter().zip(large.bits()).all(|(&s, &l)| !s || l));
        }

        #[test]
        fn component_count_survives_transpose_and_flip(
            bits in proptest::collection::vec(any::<bool>(), 42),
            eight in any::<bool>(),
        ) {
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            let m = BinaryMask::new(6, 7, bits.clone()).unwrap();
            let mut flipped = bits;
            flipped.reverse();
            let f = BinaryMask::new(6, 7, flipped).unwrap();
            let base = label_components(&m, conn);
            prop_assert_eq!(base.component_count, label_components(&m.transpose(), conn).component_count);
            prop_assert_eq!(base.component_count, label_components(&f, conn).component_count);
            let distinct: alloc::collections::BTreeSet<u32> =
                base.labels.iter().copied().filter(|&l| l != 0).collect();
            prop_assert_eq!(distinct.len(), base.component_count);
        }
    }
}
