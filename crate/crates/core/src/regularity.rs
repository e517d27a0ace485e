//! Higher time regularity: compatible initial values, the level-`k`
//! auxiliary problem for `v = u⁽ᵏ⁾`, reconstruction of the lower
//! derivatives and energy bookkeeping.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::galerkin::{self, AuxiliaryForm, Solution};
use crate::linalg::{self, binom, factorial};
use crate::time::{antiderivative, compose_antiderivatives, fd_time_derivative, trapezoid_sum, TimeGrid, Trajectory};
use crate::triple::{estimate_coercivity, OperatorFamily, OperatorKind, ProblemData, RhsFunction, UNBOUNDED_ORDER};

/// Initial values `u_0, …, u_{k+1}` of the first `k+1` time derivatives.
///
/// `u_0` and `u_1` are the given data; the rest follow from the equation
/// evaluated at `t = 0`.
#[derive(Clone, Debug)]
pub struct CompatibleIVs {
    pub k: usize,
    pub values: Vec<DVector<f64>>,
}

impl CompatibleIVs {
    pub fn u(&self, j: usize) -> &DVector<f64> {
        &self.values[j]
    }
}

fn check_orders(p: &ProblemData, a: usize, c: usize, bq: usize, f: usize) -> Result<()> {
    p.a.require_order("A", a)?;
    p.c.require_order("C", c)?;
    p.b.require_order("B", bq)?;
    p.q.require_order("Q", bq)?;
    p.f.require_order("f", f)
}

/// Solves the compatibility recursion up to `u_{k+1}`.
pub fn compatible_initial_values(p: &ProblemData, k: usize) -> Result<CompatibleIVs> {
    let m = p.dim();
    if p.u0.len() != m || p.u1.len() != m {
        return Err(Error::dims(m, p.u0.len().min(p.u1.len()), "initial values"));
    }
    let mut values = vec![p.u0.clone(), p.u1.clone()];
    if k == 0 {
        return Ok(CompatibleIVs { k, values });
    }
    check_orders(p, k, k + 1, k.max(1), k)?;
    let lu = p.c.eval(0.0, 0).lu();
    for kappa in 0..k {
        let mut rhs = p.f.eval(0.0, kappa);
        let first = p.c.eval(0.0, 1) * (kappa + 1) as f64 + p.b.eval(0.0, 0);
        rhs -= first * &values[kappa + 1];
        for j in 0..=kappa {
            let mut op = (p.a.eval(0.0, j) + p.q.eval(0.0, j)) * binom(kappa, j);
            let wb = binom(kappa, j + 1);
            if wb != 0.0 {
                op += p.b.eval(0.0, j + 1) * wb;
            }
            let wc = binom(kappa + 1, j + 2);
            if wc != 0.0 {
                op += p.c.eval(0.0, j + 2) * wc;
            }
            rhs -= op * &values[kappa - j];
        }
        let next = lu.solve(&rhs).ok_or(Error::SingularLeadingOperator)?;
        values.push(next);
    }
    Ok(CompatibleIVs { k, values })
}

/// `Σ_{i≥d} c_i·t^{i−d}/(i−d)!`, the `d`-th derivative of `Σ c_i·tⁱ/i!`.
fn taylor_poly(coeffs: &[DVector<f64>], t: f64, d: usize, dim: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(dim);
    for (i, c) in coeffs.iter().enumerate().skip(d) {
        let p = i - d;
        acc += c * (t.powi(p as i32) / factorial(p));
    }
    acc
}

/// Builds the level-`k` problem satisfied by `u⁽ᵏ⁾`.
pub fn build_auxiliary(p: &ProblemData, k: usize, ivs: &CompatibleIVs) -> Result<AuxiliaryForm> {
    if ivs.k < k {
        return Err(Error::InvalidArgument(format!(
            "initial values computed to level {}, need {k}",
            ivs.k
        )));
    }
    if k == 0 {
        return Ok(AuxiliaryForm::from_problem(p));
    }
    check_orders(p, k + 1, k + 1, k.max(1), k)?;
    let (m, horizon) = (p.dim(), p.horizon);
    let kf = k as f64;

    let b_eff = OperatorFamily::linear_combination(
        OperatorKind::HToH,
        m,
        horizon,
        vec![(kf, p.c.clone(), 1), (1.0, p.b.clone(), 0)],
    );
    let q_eff = OperatorFamily::linear_combination(
        OperatorKind::VToH,
        m,
        horizon,
        vec![
            (1.0, p.q.clone(), 0),
            (kf, p.b.clone(), 1),
            (0.5 * kf * (kf + 1.0), p.c.clone(), 2),
        ],
    );
    let mut d_ops = Vec::with_capacity(k);
    let mut e_ops = Vec::with_capacity(k);
    for j in 1..=k {
        d_ops.push(OperatorFamily::linear_combination(
            OperatorKind::VToVDual,
            m,
            horizon,
            vec![(binom(k, j), p.a.clone(), j)],
        ));
        e_ops.push(OperatorFamily::linear_combination(
            OperatorKind::VToH,
            m,
            horizon,
            vec![
                (binom(k + 1, j + 2), p.c.clone(), j + 2),
                (binom(k, j + 1), p.b.clone(), j + 1),
                (binom(k, j), p.q.clone(), j),
            ],
        ));
    }

    // polynomial parts of the composed antiderivatives: for index j the
    // seeds u_{k-j}, …, u_{k-1} form Σ_i u_{k-j+i}·tⁱ/i!
    let polys: Vec<Vec<DVector<f64>>> = (1..=k).map(|j| ivs.values[k - j..k].to_vec()).collect();
    let couplings: Vec<OperatorFamily> = d_ops
        .iter()
        .zip(&e_ops)
        .map(|(d, e)| {
            OperatorFamily::linear_combination(
                OperatorKind::VToVDual,
                m,
                horizon,
                vec![(1.0, d.clone(), 0), (1.0, e.clone(), 0)],
            )
        })
        .collect();
    let f = p.f.clone();
    let f_order = if f.order() == UNBOUNDED_ORDER { UNBOUNDED_ORDER } else { f.order() - k };
    let order = couplings.iter().map(|c| c.order()).fold(f_order, usize::min);
    let rhs = RhsFunction::new(m, horizon, order, move |t, i| {
        let mut acc = f.eval(t, k + i);
        for (op, poly) in couplings.iter().zip(&polys) {
            for r in 0..=i {
                acc -= op.eval(t, r) * taylor_poly(poly, t, i - r, m) * binom(i, r);
            }
        }
        acc
    });

    Ok(AuxiliaryForm {
        space: p.space.clone(),
        level: k,
        a: p.a.clone(),
        c: p.c.clone(),
        b_eff,
        q_eff,
        d_ops,
        e_ops,
        rhs,
        iv0: ivs.values[k].clone(),
        iv1: ivs.values[k + 1].clone(),
        horizon,
    })
}

/// How the source enters the data norm of an [`EnergyReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SourceNorm {
    /// `‖f⁽ᵏ⁾‖²` in `L²(I;H)`.
    #[default]
    L2H,
    /// `‖f⁽ᵏ⁾‖²` in `H¹(I;V*)`; needs one more derivative of `f`.
    H1VDual,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub level: usize,
    /// `max_n uₙᵀ·gramV·uₙ`.
    pub sup_v_energy: f64,
    /// `max_n u′ₙᵀ·gramH·u′ₙ`.
    pub sup_h_energy_deriv: f64,
    pub data_norm: f64,
    /// `(a₀·sup_v_energy + c₀·sup_h_energy_deriv)/data_norm`, 0 when both vanish.
    pub lambda_observed: f64,
}

fn lower_bound(fam: &OperatorFamily, gram: &nalgebra::DMatrix<f64>) -> f64 {
    fam.coercivity()
        .or_else(|| estimate_coercivity(fam, gram, 17).ok())
        .unwrap_or(1.0)
}

/// Energy bookkeeping for the level-`level` trajectory `sol`.
///
/// `a₀` and `c₀` are the declared coercivity constants of `A` and `C`; when
/// absent they are estimated by sampling, and 1 is used if that fails.
pub fn energy_report(
    sol: &Solution,
    p: &ProblemData,
    ivs: &CompatibleIVs,
    level: usize,
    source: SourceNorm,
) -> Result<EnergyReport> {
    if !sol.u.grid().same_as(sol.du.grid()) {
        return Err(Error::GridMismatch("solution and derivative grids differ".into()));
    }
    if ivs.k < level {
        return Err(Error::InvalidArgument(format!(
            "initial values computed to level {}, need {level}",
            ivs.k
        )));
    }
    let space = &p.space;
    let sup_v = sol.u.max_energy(space.gram_v());
    let sup_h = sol.du.max_energy(space.gram_h());

    let mut data: f64 = ivs.values[..=level]
        .iter()
        .map(|u| linalg::gram_norm_sq(u, space.gram_v()))
        .sum();
    data += linalg::gram_norm_sq(&ivs.values[level + 1], space.gram_h());
    let grid = sol.u.grid();
    let dt = grid.dt();
    let source_sq = |deriv: usize, chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>| -> f64 {
        let samples: Vec<f64> = grid
            .nodes()
            .map(|t| linalg::dual_norm(&p.f.eval(t, deriv), chol).powi(2))
            .collect();
        trapezoid_sum(&samples, dt)
    };
    data += match source {
        SourceNorm::L2H => {
            p.f.require_order("f", level)?;
            source_sq(level, &space.gram_h_cholesky()?)
        }
        SourceNorm::H1VDual => {
            p.f.require_order("f", level + 1)?;
            let chol = space.gram_v_cholesky()?;
            source_sq(level, &chol) + source_sq(level + 1, &chol)
        }
    };

    let a0 = lower_bound(&p.a, space.gram_v());
    let c0 = lower_bound(&p.c, space.gram_h());
    let lhs = a0 * sup_v + c0 * sup_h;
    let lambda = if data > 0.0 { lhs / data } else { 0.0 };
    Ok(EnergyReport {
        level,
        sup_v_energy: sup_v,
        sup_h_energy_deriv: sup_h,
        data_norm: data,
        lambda_observed: lambda,
    })
}

/// Output of [`solve_derivative`].
#[derive(Clone, Debug)]
pub struct DerivativeSolution {
    /// `levels[i]` approximates `u⁽ᵏ⁻ⁱ⁾` together with its time derivative.
    pub levels: Vec<Solution>,
    pub ivs: CompatibleIVs,
    pub reports: Vec<EnergyReport>,
}

impl DerivativeSolution {
    /// The trajectory of `u⁽ᵏᵃᵖᵖᵃ⁾`.
    pub fn level(&self, kappa: usize) -> &Solution {
        &self.levels[self.ivs.k - kappa]
    }
}

/// Integrates the level-`k` problem and recovers `u⁽ᵏ⁻¹⁾, …, u` by
/// antiderivatives seeded with the compatible initial values.
pub fn solve_derivative(p: &ProblemData, k: usize, grid: TimeGrid, lin_tol: f64) -> Result<DerivativeSolution> {
    solve_derivative_with(p, k, grid, lin_tol, SourceNorm::L2H)
}

pub fn solve_derivative_with(
    p: &ProblemData,
    k: usize,
    grid: TimeGrid,
    lin_tol: f64,
    source: SourceNorm,
) -> Result<DerivativeSolution> {
    let ivs = compatible_initial_values(p, k)?;
    let form = build_auxiliary(p, k, &ivs)?;
    let top = galerkin::solve_form(&form, grid, lin_tol)?;
    let mut levels = vec![top];
    for kappa in (0..k).rev() {
        let upper = &levels.last().unwrap().u;
        let u = antiderivative(upper, ivs.u(kappa))?;
        let du = upper.clone();
        levels.push(Solution { u, du });
    }
    let reports = levels
        .iter()
        .enumerate()
        .map(|(i, sol)| energy_report(sol, p, &ivs, k - i, source))
        .collect::<Result<Vec<_>>>()?;
    Ok(DerivativeSolution { levels, ivs, reports })
}

/// Residual of `w = R_seed v` in the level-`k−1` equation `form_km1`.
///
/// Returns `max_n ‖r(tₙ)‖_{V*}` over interior nodes, with `(Cw′)′` formed by
/// differencing the trajectory `C(tₙ)·vₙ`.
pub fn inductive_residual(
    form_km1: &AuxiliaryForm,
    v: &Trajectory,
    seed: &DVector<f64>,
    grid: &TimeGrid,
) -> Result<f64> {
    if !v.grid().same_as(grid) {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} steps on [0,{}], expected {} on [0,{}]",
            v.grid().steps(),
            v.grid().horizon(),
            grid.steps(),
            grid.horizon()
        )));
    }
    if (grid.horizon() - form_km1.horizon).abs() > 1e-12 * form_km1.horizon.max(1.0) {
        return Err(Error::GridMismatch("grid and form horizons differ".into()));
    }
    form_km1.check()?;
    let m = form_km1.dim();
    if v.dim() != m {
        return Err(Error::dims(m, v.dim(), "trajectory"));
    }
    let w = antiderivative(v, seed)?;
    let flux = v.map(|t, vn| form_km1.c.apply(t, 0, vn));
    let flux_dot = fd_time_derivative(&flux)?;
    let integrals = (1..=form_km1.level)
        .map(|j| compose_antiderivatives(&w, &vec![DVector::zeros(m); j]))
        .collect::<Result<Vec<_>>>()?;
    let chol = form_km1.space.gram_v_cholesky()?;

    let mut worst = 0.0_f64;
    for n in 1..grid.steps() {
        let t = grid.node(n);
        let mut r = flux_dot.at(n) + form_km1.b_eff.apply(t, 0, v.at(n));
        r += (form_km1.a.eval(t, 0) + form_km1.q_eff.eval(t, 0)) * w.at(n);
        for ((d, e), rj) in form_km1.d_ops.iter().zip(&form_km1.e_ops).zip(&integrals) {
            r += (d.eval(t, 0) + e.eval(t, 0)) * rj.at(n);
        }
        r -= form_km1.rhs.eval(t, 0);
        worst = worst.max(linalg::dual_norm(&r, &chol));
    }
    Ok(worst)
}
