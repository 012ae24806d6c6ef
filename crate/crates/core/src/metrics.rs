//! Topology-aware segmentation metrics on binary masks.
//!
//! All component counts use 4-connected foreground.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{ensure_mask_dims, label_components, BinaryMask, ComponentLabeling, Connectivity};
use crate::matching::max_bipartite_matching;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub betti_error: f64,
    pub betti_matching_error: f64,
    pub voi: f64,
    pub window_size: usize,
    pub window_count: usize,
}

fn betti0(mask: &BinaryMask) -> usize {
    label_components(mask, Connectivity::Four).component_count
}

/// Tiles both masks with `window x window` patches (stride = window, border
/// patches truncated) and averages `|b0(pred) - b0(gt)|` over patches.
pub fn betti_error(pred: &BinaryMask, gt: &BinaryMask, window: usize) -> Result<f64> {
    let (error, _) = windowed_betti_error(pred, gt, window)?;
    Ok(error)
}

fn windowed_betti_error(pred: &BinaryMask, gt: &BinaryMask, window: usize) -> Result<(f64, usize)> {
    ensure_mask_dims(pred, gt)?;
    if window == 0 {
        return Err(Error::InvalidWindow(window));
    }
    let (height, width) = pred.dims();
    let mut total = 0usize;
    let mut count = 0usize;
    for row in (0..height).step_by(window) {
        for col in (0..width).step_by(window) {
            let p = betti0(&pred.window(row, col, window, window));
            let g = betti0(&gt.window(row, col, window, window));
            total += p.abs_diff(g);
            count += 1;
        }
    }
    Ok((total as f64 / count as f64, count))
}

/// Unmatched components of either mask when prediction and ground-truth
/// components are paired one-to-one through overlapping pixels.
///
/// Every connected component of `pred AND gt` lies in exactly one component
/// of each mask and proposes that pair; the error is
/// `(|P| - |M|) + (|G| - |M|)` for a maximum matching `M` of the proposals.
pub fn betti_matching_error(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    ensure_mask_dims(pred, gt)?;
    let p = label_components(pred, Connectivity::Four);
    let g = label_components(gt, Connectivity::Four);
    let overlap = label_components(&pred.intersection(gt)?, Connectivity::Four);

    let mut adjacency: Vec<Vec<usize>> = alloc::vec![Vec::new(); p.component_count];
    let mut seen = alloc::vec![false; overlap.component_count];
    for (pixel, &label) in overlap.labels.iter().enumerate() {
        if label == 0 || seen[(label - 1) as usize] {
            continue;
        }
        seen[(label - 1) as usize] = true;
        let a = (p.labels[pixel] - 1) as usize;
        let b = (g.labels[pixel] - 1) as usize;
        if !adjacency[a].contains(&b) {
            adjacency[a].push(b);
        }
    }
    let matched = max_bipartite_matching(p.component_count, g.component_count, &adjacency).size;
    Ok(((p.component_count - matched) + (g.component_count - matched)) as f64)
}

/// Variation of information `H(X|Y) + H(Y|X)` in nats between the two
/// clusterings "each foreground component is a cluster, the background is one
/// more cluster".
pub fn variation_of_information(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    ensure_mask_dims(pred, gt)?;
    let x = label_components(pred, Connectivity::Four);
    let y = label_components(gt, Connectivity::Four);
    Ok(voi_of_labelings(&x, &y))
}

fn voi_of_labelings(x: &ComponentLabeling, y: &ComponentLabeling) -> f64 {
    let n = x.labels.len() as f64;
    let mut joint: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut left = alloc::vec![0usize; x.component_count + 1];
    let mut right = alloc::vec![0usize; y.component_count + 1];
    for (&a, &b) in x.labels.iter().zip(&y.labels) {
        *joint.entry((a, b)).or_insert(0) += 1;
        left[a as usize] += 1;
        right[b as usize] += 1;
    }
    // H(X|Y) + H(Y|X) = sum_xy p_xy [ln(p_x / p_xy) + ln(p_y / p_xy)]
    let mut voi = 0.0;
    for (&(a, b), &count) in &joint {
        let pxy = count as f64 / n;
        let px = left[a as usize] as f64 / n;
        let py = right[b as usize] as f64 / n;
        voi += pxy * (libm::log(px / pxy) + libm::log(py / pxy));
    }
    voi.max(0.0)
}

/// All three metrics at once.
pub fn evaluate(pred: &BinaryMask, gt: &BinaryMask, window: usize) -> Result<MetricReport> {
    let (betti_error, window_count) = windowed_betti_error(pred, gt, window)?;
    Ok(MetricReport {
        betti_error,
        betti_matching_error: betti_matching_error(pred, gt)?,
        voi: variation_of_information(pred, gt)?,
        window_size: window,
        window_count,
    })
}
