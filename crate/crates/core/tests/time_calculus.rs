use hyperbreg::time::{antiderivative, compose_antiderivatives, fd_time_derivative, TimeGrid, Trajectory};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn smooth(grid: TimeGrid, a: f64, b: f64, w: f64) -> Trajectory {
    Trajectory::from_fn(grid, |t| DVector::from_vec(vec![a * (w * t).sin() + b, b * t * t - a])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn antiderivative_is_affine_in_the_integrand(
        a in -3.0..3.0f64, b in -3.0..3.0f64, w in 0.1..4.0f64, s in -2.0..2.0f64, steps in 2usize..80,
    ) {
        let grid = TimeGrid::new(1.5, steps).unwrap();
        let v1 = smooth(grid, a, b, w);
        let v2 = smooth(grid, b, a, w + 1.0);
        let seed = DVector::from_vec(vec![s, -s]);
        let zero = DVector::zeros(2);
        let combo = v1.zip_map(&v2, |x, y| x * s + y).unwrap();
        let lhs = antiderivative(&combo, &zero).unwrap();
        let rhs = antiderivative(&v1, &zero).unwrap().scale(s).zip_map(&antiderivative(&v2, &zero).unwrap(), |x, y| x + y).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12);
        let shifted = antiderivative(&v1, &seed).unwrap();
        let unshifted = antiderivative(&v1, &zero).unwrap();
        for n in 0..grid.len() {
            prop_assert!((shifted.at(n) - unshifted.at(n) - &seed).amax() < 1e-13);
        }
    }

    #[test]
    fn differencing_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, s in -2.0..2.0f64, steps in 2usize..60) {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let u1 = smooth(grid, a, b, 1.3);
        let u2 = smooth(grid, b, a, 0.4);
        let combo = u1.zip_map(&u2, |x, y| x * s + y).unwrap();
        let lhs = fd_time_derivative(&combo).unwrap();
        let rhs = fd_time_derivative(&u1).unwrap().scale(s).zip_map(&fd_time_derivative(&u2).unwrap(), |x, y| x + y).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-9 * (1.0 + steps as f64));
    }

    #[test]
    fn differencing_undoes_integration_on_quadratics(c0 in -2.0..2.0f64, c1 in -2.0..2.0f64, steps in 3usize..50) {
        // trapezoid of an affine integrand is exact, the stencils are exact on quadratics
        let grid = TimeGrid::new(2.0, steps).unwrap();
        let v = Trajectory::from_fn(grid, |t| DVector::from_element(1, c0 + c1 * t)).unwrap();
        let w = antiderivative(&v, &DVector::from_element(1, c1)).unwrap();
        let back = fd_time_derivative(&w).unwrap();
        prop_assert!(back.sub(&v).unwrap().max_abs() < 1e-10);
    }
}

#[test]
fn round_trip_is_second_order() {
    let gram = DMatrix::identity(1, 1);
    let mut errs = Vec::new();
    for steps in [32, 64, 128] {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let u = Trajectory::from_fn(grid, |t| DVector::from_element(1, (3.0 * t).sin() + t)).unwrap();
        let du = fd_time_derivative(&u).unwrap();
        let back = antiderivative(&du, u.at(0)).unwrap();
        errs.push(back.sub(&u).unwrap().max_norm(&gram));
    }
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > 3.5, "{errs:?}");
    }
}

#[test]
fn repeated_differencing_inverts_zero_seeded_composition() {
    let mut errs = Vec::new();
    for steps in [64, 128, 256] {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let v = Trajectory::from_fn(grid, |t| DVector::from_element(1, (2.0 * t).cos())).unwrap();
        let w = compose_antiderivatives(&v, &[DVector::zeros(1), DVector::zeros(1)]).unwrap();
        let back = fd_time_derivative(&fd_time_derivative(&w).unwrap()).unwrap();
        // second differences of the boundary stencils are first order, so skip two nodes per side
        let err = (2..steps - 1).map(|n| (back.at(n) - v.at(n)).amax()).fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
}
