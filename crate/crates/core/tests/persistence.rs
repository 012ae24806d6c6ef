mod common;

use common::*;
use proptest::prelude::*;
use topocons_core::matching::GroundMetric;
use topocons_core::{
    betti_curve, compute_diagram, label_components, match_diagrams_with, oracle_diagram, threshold,
    Connectivity, Direction, Exponent, LikelihoodGrid,
};

fn strict_local_extrema(grid: &LikelihoodGrid, minima: bool) -> usize {
    let (h, w) = grid.dims();
    let v = grid.values();
    (0..v.len())
        .filter(|&p| {
            neighbors4(p, h, w)
                .iter()
                .all(|&q| if minima { v[q] > v[p] } else { v[q] < v[p] })
        })
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn diagram_matches_brute_force_on_distinct_values(grid in distinct_grid(6, 7)) {
        let d = compute_diagram(&grid, Direction::Sublevel, Connectivity::Four).unwrap();
        prop_assert_eq!(d.sorted_pairs(), brute_force_sublevel_pairs(&grid));
    }

    #[test]
    fn diagram_matches_brute_force_with_ties(grid in coarse_grid(5, 6)) {
        let d = compute_diagram(&grid, Direction::Sublevel, Connectivity::Four).unwrap();
        prop_assert_eq!(sorted_finite_pairs(&d), brute_force_sublevel_pairs(&grid));
    }

    #[test]
    fn library_oracle_agrees_with_test_oracle(grid in coarse_grid(4, 5)) {
        let o = oracle_diagram(&grid, Direction::Sublevel, Connectivity::Four).unwrap();
        prop_assert_eq!(sorted_finite_pairs(&o), brute_force_sublevel_pairs(&grid));
    }

    #[test]
    fn betti_curve_counts_sublevel_components(grid in coarse_grid(6, 6)) {
        let d = compute_diagram(&grid, Direction::Sublevel, Connectivity::Four).unwrap();
        let mut levels = grid.values().to_vec();
        levels.extend([0.0, 0.1, 0.99, 1.0]);
        for c in levels {
            let mask = threshold(&grid, c, Direction::Sublevel);
            let (_, count) = components(mask.bits(), 6, 6);
            prop_assert_eq!(label_components(&mask, Connectivity::Four).component_count, count);
            prop_assert_eq!(betti_curve(&d, c), count);
        }
    }

    #[test]
    fn superlevel_betti_curve_counts_superlevel_components(grid in coarse_grid(5, 5)) {
        let d = compute_diagram(&grid, Direction::Superlevel, Connectivity::Four).unwrap();
        for &c in grid.values() {
            let mask = threshold(&grid, c, Direction::Superlevel);
            prop_assert_eq!(betti_curve(&d, c), components(mask.bits(), 5, 5).1);
        }
    }

    #[test]
    fn critical_pixels_carry_the_dot_values(grid in distinct_grid(6, 6), superlevel in any::<bool>()) {
        let dir = if superlevel { Direction::Superlevel } else { Direction::Sublevel };
        let d = compute_diagram(&grid, dir, Connectivity::Four).unwrap();
        let v = grid.values();
        for dot in &d.dots {
            prop_assert_eq!(v[dot.birth_pixel], dot.birth);
            match dot.death_pixel {
                Some(p) => prop_assert_eq!(v[p], dot.death),
                None => prop_assert!(dot.is_essential()),
            }
        }
        prop_assert_eq!(d.dots.iter().filter(|x| x.is_essential()).count(), 1);
        prop_assert_eq!(d.len(), strict_local_extrema(&grid, !superlevel));
    }

    #[test]
    fn superlevel_is_sublevel_of_the_complement(grid in distinct_grid(5, 6)) {
        let flipped = LikelihoodGrid::new(5, 6, grid.values().iter().map(|v| 1.0 - v).collect()).unwrap();
        let sup = compute_diagram(&grid, Direction::Superlevel, Connectivity::Four).unwrap();
        let sub = compute_diagram(&flipped, Direction::Sublevel, Connectivity::Four).unwrap();
        let mut mapped: Vec<(f64, f64)> = sup.dots.iter().map(|d| (1.0 - d.birth, 1.0 - d.death)).collect();
        mapped.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let expected = sub.sorted_pairs();
        prop_assert_eq!(mapped.len(), expected.len());
        for (a, b) in mapped.iter().zip(&expected) {
            prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn bottleneck_is_stable_under_sup_norm_perturbation(
        grid in distinct_grid(8, 8),
        noise in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        let eps = 0.01;
        let perturbed = LikelihoodGrid::new(
            8,
            8,
            grid.values().iter().zip(&noise).map(|(v, n)| (v + eps * n).clamp(0.0, 1.0)).collect(),
        )
        .unwrap();
        let a = compute_diagram(&grid, Direction::Sublevel, Connectivity::Four).unwrap();
        let b = compute_diagram(&perturbed, Direction::Sublevel, Connectivity::Four).unwrap();
        let cheb = match_diagrams_with(&a, &b, Exponent::Infinity, GroundMetric::Chebyshev).cost;
        prop_assert!(cheb <= eps + 1e-9);
        let euclid = match_diagrams_with(&a, &b, Exponent::Infinity, GroundMetric::Euclidean).cost;
        prop_assert!(euclid <= std::f64::consts::SQRT_2 * eps + 1e-9);
    }
}
