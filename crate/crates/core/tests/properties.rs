//! Randomised properties of the quadrature, angular, energy and physics layers.

use boltzdg::angular::{chart, AngularMesh, PatchMap};
use boltzdg::energy::EnergyGrid;
use boltzdg::physics::{compton_in_energy, compton_out_energy};
use boltzdg::quadrature::gauss_legendre;
use proptest::prelude::*;

/// Exact integral over [-1, 1] of `sum_k a_k x^k`.
fn poly_integral(a: &[f64]) -> f64 {
    a.iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, c)| 2.0 * c / (k + 1) as f64)
        .sum()
}

proptest! {
    #[test]
    fn gauss_rule_is_exact_to_degree_2n_minus_1(
        n in 1usize..=12,
        coeffs in prop::collection::vec(-1.0f64..1.0, 24),
    ) {
        let a = &coeffs[..2 * n];
        let rule = gauss_legendre(n).unwrap();
        let got = rule.integrate(|x| a.iter().rev().fold(0.0, |s, c| s * x + c));
        prop_assert!((got - poly_integral(a)).abs() <= 1e-13);
    }

    #[test]
    fn patch_bases_form_a_partition_of_unity(
        q in 0usize..=4,
        t in (-1.0f64..1.0, -1.0f64..1.0),
        equiangular in any::<bool>(),
    ) {
        let map = if equiangular { PatchMap::Equiangular } else { PatchMap::Affine };
        let set = AngularMesh::with_map(3, 1, q, map).unwrap().ordinates().unwrap();
        for basis in &set.bases {
            let sum: f64 = basis.eval_all([t.0, t.1]).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn chart_maps_to_the_unit_sphere(p in prop::array::uniform3(-1.0f64..1.0)) {
        prop_assume!(p.iter().any(|x| x.abs() > 1e-6));
        let mu = chart(&p).unwrap();
        prop_assert!((mu.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn compton_energy_maps_invert(e in 500.0f64..1000.0, c in -1.0f64..1.0) {
        let out = compton_out_energy(e, c);
        prop_assert!(out <= e);
        let back = compton_in_energy(out, c).unwrap();
        prop_assert!((back - e).abs() <= 1e-10 * e);
    }

    #[test]
    fn group_lookup_brackets_the_energy(groups in 1usize..20, e in 500.0f64..=1000.0) {
        let grid = EnergyGrid::uniform(500.0, 1000.0, groups, 1).unwrap();
        let g = grid.group_of(e).unwrap();
        let (lo, hi) = grid.group_interval(g);
        prop_assert!(lo <= e && e <= hi);
    }

    #[test]
    fn ordinates_have_unit_length_and_positive_weights(dim in 2usize..=3, n in 1usize..=4, q in 0usize..=3) {
        let set = AngularMesh::new(dim, n, q).unwrap().ordinates().unwrap();
        for (mu, w) in set.directions.iter().zip(&set.weights) {
            prop_assert!((mu.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() <= 1e-14);
            prop_assert!(*w > 0.0);
        }
    }
}
