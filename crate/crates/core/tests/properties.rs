use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radinv_core::analysis::lp_bound_check;
use radinv_core::elliptic::EllipticProblem;
use radinv_core::grid::{gradient, inner_product, neg_div_gradient, norm};
use radinv_core::inverse::AdmissibleSet;
use radinv_core::parabolic::{ParabolicProblem, TimeSeries};
use radinv_core::spectral::SpectralBasis;
use radinv_core::{BoundaryValues, Grid, NormKind, ScalarField};

fn random_field(grid: &Grid, seed: u64, lo: f64, hi: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| rng.random_range(lo..=hi)).collect();
    ScalarField::from_values(grid, values).unwrap()
}

fn grid_sizes() -> impl Strategy<Value = usize> {
    prop_oneof![Just(1usize), 2usize..12, Just(16usize)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_an_orthogonal_projector(n in grid_sizes(), seed in any::<u64>(), frac in 0.0f64..1.2) {
        let g = Grid::new(n).unwrap();
        let basis = SpectralBasis::new(&g);
        let lambda = basis.mu_min() * 0.5 + frac * basis.mu_max();
        let u = random_field(&g, seed, -1.0, 1.0);
        let v = random_field(&g, seed ^ 0x9e37, -1.0, 1.0);
        let pu = basis.project_below(&u, lambda).unwrap();
        let ppu = basis.project_below(&pu, lambda).unwrap();
        prop_assert!(norm(&(&ppu - &pu), NormKind::L2) <= 1e-12);
        let pv = basis.project_below(&v, lambda).unwrap();
        let sym = inner_product(&pu, &v).unwrap() - inner_product(&u, &pv).unwrap();
        prop_assert!(sym.abs() <= 1e-12);
        let rest = &u - &pu;
        let split = norm(&pu, NormKind::L2).powi(2) + norm(&rest, NormKind::L2).powi(2);
        prop_assert!((split - norm(&u, NormKind::L2).powi(2)).abs() <= 1e-11);
    }

    #[test]
    fn projection_tail_and_growth_bounds(
        n in grid_sizes(),
        seed in any::<u64>(),
        frac in 0.0f64..1.0,
        kappa in prop_oneof![0.05f64..0.45, 0.55f64..3.0],
        extra in 0.01f64..2.0,
    ) {
        let g = Grid::new(n).unwrap();
        let basis = SpectralBasis::new(&g);
        let lambda = basis.mu_min() + frac * (basis.mu_max() - basis.mu_min());
        let v = random_field(&g, seed, -1.0, 1.0);
        let smooth = basis.fractional_norm(&v, kappa / 2.0).unwrap();
        let pv = basis.project_below(&v, lambda).unwrap();
        let tail = norm(&(&v - &pv), NormKind::L2);
        prop_assert!(tail.powi(2) <= lambda.powf(-kappa) * smooth.powi(2) * (1.0 + 1e-12) + 1e-300);

        let s = kappa + extra;
        let grown = basis.fractional_norm(&pv, s / 2.0).unwrap();
        prop_assert!(grown <= lambda.powf((s - kappa) / 2.0) * smooth * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn regular_field_tail(n in 2usize..20, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let g = Grid::new(n).unwrap();
        let basis = SpectralBasis::new(&g);
        let v = basis.random_regular_field(2.0, seed, 1.0).unwrap();
        let lambda = basis.mu_min() + frac * (basis.mu_max() - basis.mu_min());
        let tail = norm(&(&v - &basis.project_below(&v, lambda).unwrap()), NormKind::L2);
        prop_assert!(tail <= basis.fractional_norm(&v, 1.0).unwrap() / lambda * (1.0 + 1e-12));
    }

    #[test]
    fn summation_by_parts_and_linearity(n in 1usize..12, seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = Grid::new(n).unwrap();
        let u = random_field(&g, seed, -1.0, 1.0);
        let v = random_field(&g, seed.wrapping_add(1), -1.0, 1.0);
        let lhs = gradient(&u).inner(&gradient(&v)).unwrap();
        let rhs = inner_product(&u, &neg_div_gradient(&v)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));

        let combo = u.scaled(a).axpy(b, &v).unwrap();
        let expected = gradient(&u).scaled(a).zip_with(&gradient(&v), |x, y| x + b * y).unwrap();
        let diff = gradient(&combo).difference(&expected).unwrap();
        prop_assert!(diff.components().all(|c| c.abs() <= 1e-13 * (n as f64 + 1.0)));
    }

    #[test]
    fn elliptic_maximum_principle(n in 1usize..10, seed in any::<u64>()) {
        let g = Grid::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut side = || (0..n).map(|_| rng.random_range(0.0..2.0)).collect::<Vec<_>>();
        let boundary = BoundaryValues { west: side(), east: side(), south: side(), north: side() };
        let p = EllipticProblem::new(
            ScalarField::from_fn_with_boundary(&g, |x, y| 1.0 + x * y),
            random_field(&g, seed ^ 1, 0.0, 5.0),
            boundary,
        ).unwrap();
        let u = p.solve(&random_field(&g, seed ^ 2, 0.0, 4.0)).unwrap();
        prop_assert!(u.min() >= -1e-12);
    }

    #[test]
    fn elliptic_solution_operator_is_symmetric(n in 1usize..10, seed in any::<u64>()) {
        let g = Grid::new(n).unwrap();
        let p = EllipticProblem::new(
            ScalarField::from_fn_with_boundary(&g, |x, _| 0.5 + x),
            ScalarField::zeros(&g),
            BoundaryValues::zeros(&g),
        ).unwrap();
        let q = random_field(&g, seed, 0.0, 3.0);
        let f1 = random_field(&g, seed ^ 3, -1.0, 1.0);
        let f2 = random_field(&g, seed ^ 4, -1.0, 1.0);
        let s1 = p.solve_homogeneous(&q, &f1).unwrap();
        let s2 = p.solve_homogeneous(&q, &f2).unwrap();
        let gap = inner_product(&s1, &f2).unwrap() - inner_product(&f1, &s2).unwrap();
        prop_assert!(gap.abs() <= 1e-11);
    }

    #[test]
    fn backward_euler_contracts(n in 1usize..8, seed in any::<u64>(), nt in 1usize..12) {
        let g = Grid::new(n).unwrap();
        let p = ParabolicProblem::new(
            ScalarField::from_fn_with_boundary(&g, |_, y| 1.0 + y),
            TimeSeries::Constant(ScalarField::zeros(&g)),
            TimeSeries::Constant(BoundaryValues::zeros(&g)),
            random_field(&g, seed, -1.0, 1.0),
            0.5,
            nt,
        ).unwrap();
        let traj = p.march(&random_field(&g, seed ^ 5, 0.0, 3.0)).unwrap();
        for w in traj.levels().windows(2) {
            prop_assert!(norm(&w[1], NormKind::L2) <= norm(&w[0], NormKind::L2) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn holder_bound(n in 1usize..12, seed in any::<u64>(), p in prop_oneof![Just(2.0f64), 2.0f64..12.0]) {
        let g = Grid::new(n).unwrap();
        let set = AdmissibleSet::new(0.3, 4.0).unwrap();
        let a = random_field(&g, seed, 0.3, 4.0);
        let b = random_field(&g, seed ^ 6, 0.3, 4.0);
        prop_assert!(lp_bound_check(&a, &b, &set, p).unwrap());
    }
}

#[test]
fn manufactured_order_over_three_grids() {
    let error = |n: usize| {
        let (p, q, exact) = radinv_core::analysis::manufactured_elliptic(n).unwrap();
        norm(&(&p.solve(&q).unwrap() - &exact), NormKind::L2)
    };
    let errors: Vec<f64> = [15, 31, 63].into_iter().map(error).collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.7..=2.3).contains(&order), "order {order}");
    }
}
