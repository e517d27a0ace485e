#![allow(dead_code)]

use hyperbreg::triple::UNBOUNDED_ORDER;
use hyperbreg::{OperatorFamily, OperatorKind, ProblemData, RhsFunction, SpaceDiscretization};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `d^j/dt^j tⁱ` evaluated at `t`.
fn monomial_derivative(i: usize, j: usize, t: f64) -> f64 {
    if j > i {
        return 0.0;
    }
    let falling: f64 = ((i - j + 1)..=i).map(|x| x as f64).product();
    falling * t.powi((i - j) as i32)
}

/// `Σ cᵢ tⁱ` with matrix coefficients.
pub fn poly_family(kind: OperatorKind, horizon: f64, coeffs: Vec<DMatrix<f64>>) -> OperatorFamily {
    let m = coeffs[0].nrows();
    let symmetric = coeffs.iter().all(|c| (c - c.transpose()).amax() == 0.0);
    OperatorFamily::new(kind, m, horizon, UNBOUNDED_ORDER, move |t, j| {
        let mut acc = DMatrix::zeros(m, m);
        for (i, c) in coeffs.iter().enumerate() {
            acc += c * monomial_derivative(i, j, t);
        }
        acc
    })
    .with_selfadjoint(symmetric)
}

pub fn poly_rhs(horizon: f64, coeffs: Vec<DVector<f64>>) -> RhsFunction {
    let m = coeffs[0].len();
    RhsFunction::new(m, horizon, UNBOUNDED_ORDER, move |t, j| {
        let mut acc = DVector::zeros(m);
        for (i, c) in coeffs.iter().enumerate() {
            acc += c * monomial_derivative(i, j, t);
        }
        acc
    })
}

/// Polynomial-in-time problem kept alongside its raw coefficients.
pub struct PolyProblem {
    pub problem: ProblemData,
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub c: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub f: Vec<DVector<f64>>,
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |_, _| rng.random_range(-scale..scale))
}

fn random_spd(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let g = random_matrix(rng, m, 1.0);
    &g * g.transpose() + DMatrix::identity(m, m) * (m as f64)
}

/// Random problem with polynomial coefficients of degree ≤ `degree`.
pub fn random_poly_problem(seed: u64, m: usize, degree: usize) -> PolyProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = 1.0;
    let poly = |rng: &mut ChaCha8Rng, lead: DMatrix<f64>| {
        let mut out = vec![lead];
        for _ in 0..degree {
            out.push(random_matrix(rng, m, 0.5));
        }
        out
    };
    let c0 = random_spd(&mut rng, m);
    let a0 = random_spd(&mut rng, m);
    let b0 = random_matrix(&mut rng, m, 1.0);
    let q0 = random_matrix(&mut rng, m, 1.0);
    let c = poly(&mut rng, c0);
    let a = poly(&mut rng, a0);
    let b = poly(&mut rng, b0);
    let q = poly(&mut rng, q0);
    let f: Vec<DVector<f64>> = (0..=degree)
        .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let u0 = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
    let u1 = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
    let gram_h = random_spd(&mut rng, m);
    let gram_v = &gram_h * 2.0 + random_spd(&mut rng, m);
    let problem = ProblemData {
        space: SpaceDiscretization::new(gram_h, gram_v).unwrap(),
        a: poly_family(OperatorKind::VToVDual, horizon, a.clone()),
        b: poly_family(OperatorKind::HToH, horizon, b.clone()),
        c: poly_family(OperatorKind::HToH, horizon, c.clone()),
        q: poly_family(OperatorKind::VToH, horizon, q.clone()),
        f: poly_rhs(horizon, f.clone()),
        u0,
        u1,
        horizon,
    };
    PolyProblem { problem, a, b, c, q, f }
}

fn coeff<'a>(v: &'a [DMatrix<f64>], i: usize, zero: &'a DMatrix<f64>) -> &'a DMatrix<f64> {
    v.get(i).unwrap_or(zero)
}

/// Taylor coefficients of the solution matched order by order.
///
/// Writes `α(t) = Σ aₙtⁿ` and equates the `t^κ` coefficient of
/// `(Cα′)′ + Bα′ + (A+Q)α − F` to zero, then returns `u_n = n!·aₙ` for
/// `n ≤ k+1`.
pub fn taylor_oracle(pp: &PolyProblem, k: usize) -> Vec<DVector<f64>> {
    let m = pp.problem.dim();
    let zero = DMatrix::zeros(m, m);
    let mut a_n: Vec<DVector<f64>> = vec![pp.problem.u0.clone(), pp.problem.u1.clone()];
    for kappa in 0..k {
        let mut rhs = pp.f.get(kappa).cloned().unwrap_or_else(|| DVector::zeros(m));
        // (Cα′)′ without the unknown leading term
        for i in 1..=kappa + 1 {
            let j = kappa + 1 - i;
            rhs -= coeff(&pp.c, i, &zero) * &a_n[j + 1] * ((kappa + 1) as f64 * (j + 1) as f64);
        }
        for i in 0..=kappa {
            let j = kappa - i;
            rhs -= coeff(&pp.b, i, &zero) * &a_n[j + 1] * (j + 1) as f64;
            rhs -= (coeff(&pp.a, i, &zero) + coeff(&pp.q, i, &zero)) * &a_n[j];
        }
        let lead = &pp.c[0] * ((kappa + 1) * (kappa + 2)) as f64;
        a_n.push(lead.lu().solve(&rhs).unwrap());
    }
    a_n.iter()
        .enumerate()
        .map(|(n, a)| a * (1..=n).map(|x| x as f64).product::<f64>())
        .collect()
}

pub fn relative_error(got: &DVector<f64>, want: &DVector<f64>) -> f64 {
    (got - want).norm() / want.norm().max(1e-300)
}

/// Scalar oscillator `u″ + ω²u = 0`, `u(0) = 1`, `u′(0) = 0`.
pub fn oscillator(omega: f64, horizon: f64) -> ProblemData {
    let one = DMatrix::identity(1, 1);
    ProblemData {
        space: SpaceDiscretization::new(one.clone(), one.clone()).unwrap(),
        a: OperatorFamily::constant(OperatorKind::VToVDual, horizon, one.clone() * omega * omega)
            .with_coercivity(omega * omega),
        b: OperatorFamily::zero(OperatorKind::HToH, 1, horizon),
        c: OperatorFamily::constant(OperatorKind::HToH, horizon, one).with_coercivity(1.0),
        q: OperatorFamily::zero(OperatorKind::VToH, 1, horizon),
        f: RhsFunction::zero(1, horizon),
        u0: DVector::from_element(1, 1.0),
        u1: DVector::zeros(1),
        horizon,
    }
}

/// Observed orders from consecutive `(h, e)` pairs.
pub fn orders(hs: &[f64], errs: &[f64]) -> Vec<f64> {
    hs.windows(2)
        .zip(errs.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}
