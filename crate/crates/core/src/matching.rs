//! Optimal matchings between persistence diagrams.
//!
//! Diagrams are compared through the usual augmented square problem: every
//! dot may be matched to a dot of the other diagram or to its own orthogonal
//! projection on the diagonal, and spare diagonal slots match each other for
//! free. The default ground distance is the Euclidean norm in the (birth,
//! death) plane, so a dot sits `persistence / sqrt(2)` away from the diagonal.
//! The Chebyshev norm is available for stability bounds stated in the sup
//! norm; there a dot sits `persistence / 2` away.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::persistence::{PersistenceDiagram, PersistentDot};

/// Order of the Wasserstein distance; `Infinity` is the bottleneck distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidExponent(p))
        }
    }
}

/// One side of a matched pair: a dot index or the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partner {
    Dot(usize),
    Diagonal,
}

impl Partner {
    pub fn dot(self) -> Option<usize> {
        match self {
            Partner::Dot(i) => Some(i),
            Partner::Diagonal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramMatching {
    /// `(left, right)` pairs; never `(Diagonal, Diagonal)`.
    pub pairs: Vec<(Partner, Partner)>,
    pub cost: f64,
    pub p: Exponent,
}

impl DiagramMatching {
    /// Partner of the `i`-th left dot.
    pub fn partner_of_left(&self, i: usize) -> Partner {
        self.pairs
            .iter()
            .find(|(l, _)| *l == Partner::Dot(i))
            .map(|&(_, r)| r)
            .unwrap_or(Partner::Diagonal)
    }
}

/// Norm of the (birth, death) plane used to price matched pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroundMetric {
    #[default]
    Euclidean,
    Chebyshev,
}

impl GroundMetric {
    pub fn dot_distance(self, a: &PersistentDot, b: &PersistentDot) -> f64 {
        match self {
            GroundMetric::Euclidean => dot_distance(a, b),
            GroundMetric::Chebyshev => (a.birth - b.birth).abs().max((a.death - b.death).abs()),
        }
    }

    /// Distance from a dot to the nearest diagonal point, its projection
    /// `((b+d)/2, (b+d)/2)` under both norms.
    pub fn diagonal_distance(self, a: &PersistentDot) -> f64 {
        match self {
            GroundMetric::Euclidean => diagonal_distance(a),
            GroundMetric::Chebyshev => a.persistence() / 2.0,
        }
    }

    pub fn pair_distance(self, left: &PersistenceDiagram, right: &PersistenceDiagram, pair: (Partner, Partner)) -> f64 {
        match pair {
            (Partner::Dot(i), Partner::Dot(j)) => self.dot_distance(&left.dots[i], &right.dots[j]),
            (Partner::Dot(i), Partner::Diagonal) => self.diagonal_distance(&left.dots[i]),
            (Partner::Diagonal, Partner::Dot(j)) => self.diagonal_distance(&right.dots[j]),
            (Partner::Diagonal, Partner::Diagonal) => 0.0,
        }
    }
}

/// Euclidean distance between two dots in the (birth, death) plane.
pub fn dot_distance(a: &PersistentDot, b: &PersistentDot) -> f64 {
    libm::hypot(a.birth - b.birth, a.death - b.death)
}

/// Euclidean distance from a dot to its projection `((b+d)/2, (b+d)/2)`.
pub fn diagonal_distance(a: &PersistentDot) -> f64 {
    a.persistence() / core::f64::consts::SQRT_2
}

/// Euclidean distance of one matched pair.
pub fn pair_distance(left: &PersistenceDiagram, right: &PersistenceDiagram, pair: (Partner, Partner)) -> f64 {
    GroundMetric::Euclidean.pair_distance(left, right, pair)
}

/// Aggregates pair distances into `W_p` (or their maximum for `p = inf`).
pub fn matching_cost(distances: impl Iterator<Item = f64>, p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => distances.fold(0.0, f64::max),
        Exponent::Finite(p) => {
            let sum: f64 = distances.map(|d| libm::pow(d, p)).sum();
            libm::pow(sum, 1.0 / p)
        }
    }
}

/// Optimal matching under the Euclidean ground metric.
pub fn match_diagrams(
    left: &PersistenceDiagram,
    right: &PersistenceDiagram,
    p: Exponent,
) -> DiagramMatching {
    match_diagrams_with(left, right, p, GroundMetric::Euclidean)
}

pub fn match_diagrams_with(
    left: &PersistenceDiagram,
    right: &PersistenceDiagram,
    p: Exponent,
    metric: GroundMetric,
) -> DiagramMatching {
    let pairs = match p {
        Exponent::Finite(p) => wasserstein_pairs(left, right, p, metric),
        Exponent::Infinity => bottleneck_pairs(left, right, metric),
    };
    let cost = matching_cost(pairs.iter().map(|&pair| metric.pair_distance(left, right, pair)), p);
    DiagramMatching { pairs, cost, p }
}

/// Converts a row→column assignment of the augmented problem into pairs.
fn pairs_from_assignment(n: usize, m: usize, row_to_col: &[usize]) -> Vec<(Partner, Partner)> {
    let mut pairs = Vec::with_capacity(n + m);
    for (i, &j) in row_to_col.iter().enumerate().take(n) {
        pairs.push((Partner::Dot(i), if j < m { Partner::Dot(j) } else { Partner::Diagonal }));
    }
    for (row, &j) in row_to_col.iter().enumerate().skip(n) {
        if j < m {
            debug_assert!(row >= n);
            pairs.push((Partner::Diagonal, Partner::Dot(j)));
        }
    }
    pairs
}

fn wasserstein_pairs(left: &PersistenceDiagram, right: &PersistenceDiagram, p: f64, metric: GroundMetric) -> Vec<(Partner, Partner)> {
    let n = left.len();
    let m = right.len();
    let size = n + m;
    if size == 0 {
        return Vec::new();
    }
    let mut costs = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            let d = match (i < n, j < m) {
                (true, true) => metric.dot_distance(&left.dots[i], &right.dots[j]),
                (true, false) => metric.diagonal_distance(&left.dots[i]),
                (false, true) => metric.diagonal_distance(&right.dots[j]),
                (false, false) => 0.0,
            };
            costs[i * size + j] = libm::pow(d, p);
        }
    }
    let (row_to_col, _) = hungarian(&costs, size);
    pairs_from_assignment(n, m, &row_to_col)
}

/// Minimum-cost perfect assignment on a square `n x n` row-major cost matrix.
///
/// Shortest augmenting paths with row/column potentials, `O(n^3)`. Returns
/// the column assigned to each row and the total cost.
pub fn hungarian(costs: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(costs.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based columns; column 0 is the virtual start of each augmenting path.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = costs[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i * n + j])
        .sum();
    (row_to_col, total)
}

/// Bottleneck matching: binary search over the candidate pair distances for
/// the smallest threshold admitting a perfect matching of the augmented graph.
fn bottleneck_pairs(left: &PersistenceDiagram, right: &PersistenceDiagram, metric: GroundMetric) -> Vec<(Partner, Partner)> {
    let n = left.len();
    let m = right.len();
    if n + m == 0 {
        return Vec::new();
    }
    let mut candidates = Vec::with_capacity(n * m + n + m);
    for a in &left.dots {
        candidates.push(metric.diagonal_distance(a));
        for b in &right.dots {
            candidates.push(metric.dot_distance(a, b));
        }
    }
    candidates.extend(right.dots.iter().map(|b| metric.diagonal_distance(b)));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // Matching everything to the diagonal is always feasible at the largest
    // diagonal distance, so the top candidate always succeeds.
    let mut lo = 0usize;
    let mut hi = candidates.len() - 1;
    let mut best = augmented_matching(left, right, candidates[hi], metric).expect("top candidate is feasible");
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match augmented_matching(left, right, candidates[mid], metric) {
            Some(rows) => {
                best = rows;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    if let Some(rows) = augmented_matching(left, right, candidates[lo], metric) {
        best = rows;
    }
    pairs_from_assignment(n, m, &best)
}

/// Perfect matching of the augmented graph restricted to pairs within
/// `limit`, as a row→column assignment. Rows: left dots then one diagonal slot
/// per right dot; columns: right dots then one diagonal slot per left dot.
fn augmented_matching(
    left: &PersistenceDiagram,
    right: &PersistenceDiagram,
    limit: f64,
    metric: GroundMetric,
) -> Option<Vec<usize>> {
    let n = left.len();
    let m = right.len();
    let size = n + m;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); size];
    for (i, a) in left.dots.iter().enumerate() {
        for (j, b) in right.dots.iter().enumerate() {
            if metric.dot_distance(a, b) <= limit {
                adjacency[i].push(j);
            }
        }
        if metric.diagonal_distance(a) <= limit {
            adjacency[i].push(m + i);
        }
    }
    for (j, b) in right.dots.iter().enumerate() {
        let row = n + j;
        if metric.diagonal_distance(b) <= limit {
            adjacency[row].push(j);
        }
        adjacency[row].extend(m..size);
    }
    let matched = max_bipartite_matching(size, size, &adjacency);
    if matched.size < size {
        return None;
    }
    Some(matched.left.into_iter().map(|c| c.expect("perfect")).collect())
}

pub(crate) struct BipartiteMatching {
    pub size: usize,
    pub left: Vec<Option<usize>>,
}

/// Hopcroft–Karp maximum-cardinality matching.
pub(crate) fn max_bipartite_matching(
    n_left: usize,
    n_right: usize,
    adjacency: &[Vec<usize>],
) -> BipartiteMatching {
    const FREE: usize = usize::MAX;
    let mut match_left = vec![FREE; n_left];
    let mut match_right = vec![FREE; n_right];
    let mut dist = vec![0usize; n_left];
    let mut size = 0;
    let mut queue = VecDeque::new();
    loop {
        // Layer the free left vertices by alternating BFS.
        queue.clear();
        let mut reachable_free = false;
        for u in 0..n_left {
            if match_left[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                let w = match_right[v];
                if w == FREE {
                    reachable_free = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !reachable_free {
            break;
        }
        let mut cursor = vec![0usize; n_left];
        for u in 0..n_left {
            if match_left[u] == FREE
                && augment(u, adjacency, &mut match_left, &mut match_right, &mut dist, &mut cursor)
            {
                size += 1;
            }
        }
    }
    BipartiteMatching {
        size,
        left: match_left
            .into_iter()
            .map(|v| if v == FREE { None } else { Some(v) })
            .collect(),
    }
}

/// Iterative layered DFS from a free left vertex.
fn augment(
    root: usize,
    adjacency: &[Vec<usize>],
    match_left: &mut [usize],
    match_right: &mut [usize],
    dist: &mut [usize],
    cursor: &mut [usize],
) -> bool {
    const FREE: usize = usize::MAX;
    let mut path: Vec<usize> = vec![root];
    while let Some(&u) = path.last() {
        if cursor[u] == adjacency[u].len() {
            dist[u] = usize::MAX;
            path.pop();
            continue;
        }
        let v = adjacency[u][cursor[u]];
        let w = match_right[v];
        if w == FREE {
            // Flip the alternating path ending at v.
            let mut right = v;
            for &left in path.iter().rev() {
                let previous = match_left[left];
                match_left[left] = right;
                match_right[right] = left;
                right = previous;
            }
            return true;
        }
        if dist[w] != usize::MAX && dist[w] == dist[u] + 1 {
            path.push(w);
        } else {
            cursor[u] += 1;
        }
    }
    false
}
