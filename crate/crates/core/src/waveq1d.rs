//! The wave equation `u″ − (a(t,x)·u_x)_x = f` on `(0,1)` with homogeneous
//! Dirichlet conditions, discretized by P1 elements, plus the derivative of
//! the coefficient-to-state map.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::{self, Solution};
use crate::linalg::binom;
use crate::time::{TimeGrid, Trajectory};
use crate::triple::{validation_times, OperatorFamily, OperatorKind, ProblemData, RhsFunction, SpaceDiscretization, UNBOUNDED_ORDER};

/// `(t, j, x) ↦ ∂ₜʲ g(t,x)`.
pub type FieldEvaluator = Arc<dyn Fn(f64, usize, f64) -> f64 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Uniform mesh of `(0,1)` with `n_interior` interior nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mesh1D {
    n_interior: usize,
}

impl Mesh1D {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one interior node".into()));
        }
        Ok(Self { n_interior })
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn dim(&self) -> usize {
        self.n_interior
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n_interior + 1) as f64
    }

    pub fn elements(&self) -> usize {
        self.n_interior + 1
    }

    /// Coordinate of interior node `i` (0-based).
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 / (self.n_interior + 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_interior).map(|i| self.node(i)).collect()
    }

    /// Left end of element `e`.
    fn element_start(&self, e: usize) -> f64 {
        e as f64 / (self.n_interior + 1) as f64
    }

    /// Gauss points of element `e` mapped from `[−1,1]`.
    fn map(&self, e: usize, xi: f64) -> f64 {
        self.element_start(e) + 0.5 * self.h() * (1.0 + xi)
    }

    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_fn(self.n_interior, |i, _| f(self.node(i)))
    }

    /// Value at `x` of the P1 function with interior nodal values `u`.
    pub fn evaluate(&self, u: &DVector<f64>, x: f64) -> f64 {
        let s = x * (self.n_interior + 1) as f64;
        let e = (s.floor() as usize).min(self.n_interior);
        let local = s - e as f64;
        let left = if e == 0 { 0.0 } else { u[e - 1] };
        let right = if e == self.n_interior { 0.0 } else { u[e] };
        left * (1.0 - local) + right * local
    }

    pub fn mass(&self) -> DMatrix<f64> {
        let h = self.h();
        tridiag(self.n_interior, 4.0 * h / 6.0, h / 6.0)
    }

    pub fn stiffness(&self) -> DMatrix<f64> {
        let h = self.h();
        tridiag(self.n_interior, 2.0 / h, -1.0 / h)
    }

    /// `∫ w(x)·φᵢ′φⱼ′ dx` with 2-point Gauss per element.
    pub fn weighted_stiffness(&self, w: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let m = self.n_interior;
        let h = self.h();
        let mut out = DMatrix::zeros(m, m);
        for e in 0..self.elements() {
            let mean = 0.5 * GAUSS2.iter().map(|&xi| w(self.map(e, xi))).sum::<f64>();
            let k = mean / h;
            if e > 0 {
                out[(e - 1, e - 1)] += k;
            }
            if e < m {
                out[(e, e)] += k;
            }
            if e > 0 && e < m {
                out[(e - 1, e)] -= k;
                out[(e, e - 1)] -= k;
            }
        }
        out
    }

    /// `∫ g(x)·φᵢ dx` with 2-point Gauss per element.
    pub fn load(&self, g: impl Fn(f64) -> f64) -> DVector<f64> {
        let m = self.n_interior;
        let h = self.h();
        let mut out = DVector::zeros(m);
        for e in 0..self.elements() {
            for &xi in &GAUSS2 {
                let gx = g(self.map(e, xi)) * 0.5 * h;
                let phi_right = 0.5 * (1.0 + xi);
                if e > 0 {
                    out[e - 1] += gx * (1.0 - phi_right);
                }
                if e < m {
                    out[e] += gx * phi_right;
                }
            }
        }
        out
    }

    /// `‖u_h − g‖_{L²(0,1)}` with 3-point Gauss per element.
    pub fn l2_error(&self, u: &DVector<f64>, g: impl Fn(f64) -> f64) -> f64 {
        let h = self.h();
        let mut acc = 0.0;
        for e in 0..self.elements() {
            for &(xi, w) in &GAUSS3 {
                let x = self.map(e, xi);
                let d = self.evaluate(u, x) - g(x);
                acc += 0.5 * h * w * d * d;
            }
        }
        acc.sqrt()
    }

    fn quadrature_points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.elements()).flat_map(move |e| GAUSS2.iter().map(move |&xi| self.map(e, xi)))
    }

    /// Smallest eigenvalue of the stiffness matrix relative to
    /// `gramV = stiffness + mass`, in closed form.
    pub fn stiffness_ratio(&self) -> f64 {
        let h = self.h();
        let c = (PI * h).cos();
        let mu = 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
        mu / (1.0 + mu)
    }
}

fn tridiag(m: usize, diag: f64, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    })
}

/// A function of `(t, x)` with time derivatives up to `order`.
#[derive(Clone)]
pub struct SpaceTimeFunction {
    order: usize,
    evaluator: FieldEvaluator,
}

impl std::fmt::Debug for SpaceTimeFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpaceTimeFunction").field("order", &self.order).finish()
    }
}

impl SpaceTimeFunction {
    pub fn new<F>(order: usize, evaluator: F) -> Self
    where
        F: Fn(f64, usize, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            order,
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn zero() -> Self {
        Self::new(UNBOUNDED_ORDER, |_, _, _| 0.0)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(UNBOUNDED_ORDER, move |_, j, _| if j == 0 { value } else { 0.0 })
    }

    pub fn eval(&self, t: f64, j: usize, x: f64) -> f64 {
        debug_assert!(j <= self.order, "derivative {j} above declared order {}", self.order);
        (self.evaluator)(t, j, x)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `self + eps·other`.
    pub fn axpy(&self, eps: f64, other: &SpaceTimeFunction) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.order.min(other.order), move |t, j, x| a.eval(t, j, x) + eps * b.eval(t, j, x))
    }
}

/// Wave speed coefficient `a(t,x) ≥ lower_bound > 0`.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    field: SpaceTimeFunction,
    lower_bound: f64,
}

impl CoefficientField {
    pub fn new(field: SpaceTimeFunction, lower_bound: f64) -> Result<Self> {
        if !(lower_bound > 0.0) {
            return Err(Error::InvalidArgument(format!("lower bound {lower_bound} must be positive")));
        }
        Ok(Self { field, lower_bound })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(SpaceTimeFunction::constant(value), value)
    }

    pub fn eval(&self, t: f64, j: usize, x: f64) -> f64 {
        self.field.eval(t, j, x)
    }

    pub fn order(&self) -> usize {
        self.field.order()
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn field(&self) -> &SpaceTimeFunction {
        &self.field
    }

    /// `a + eps·h`, keeping the lower bound of `a`.
    pub fn perturbed(&self, eps: f64, h: &SpaceTimeFunction) -> Self {
        Self {
            field: self.field.axpy(eps, h),
            lower_bound: self.lower_bound,
        }
    }

    /// `a = 1/ρ` for a density `ρ` with `ρ ≤ rho_upper`.
    pub fn from_density(rho: &SpaceTimeFunction, rho_upper: f64) -> Result<Self> {
        let rho = rho.clone();
        let field = SpaceTimeFunction::new(rho.order(), move |t, j, x| reciprocal_derivatives(&rho, t, j, x)[j]);
        Self::new(field, 1.0 / rho_upper)
    }
}

/// `[a, a′, …, a⁽ʲ⁾]` for `a = 1/ρ`, from `Σᵢ C(j,i)·a⁽ⁱ⁾ρ⁽ʲ⁻ⁱ⁾ = 0`.
fn reciprocal_derivatives(rho: &SpaceTimeFunction, t: f64, j: usize, x: f64) -> Vec<f64> {
    let r: Vec<f64> = (0..=j).map(|i| rho.eval(t, i, x)).collect();
    let mut a = vec![1.0 / r[0]];
    for n in 1..=j {
        let s: f64 = (0..n).map(|i| binom(n, i) * a[i] * r[n - i]).sum();
        a.push(-s / r[0]);
    }
    a
}

/// Coefficient perturbation `h_a = −h_ρ/ρ²` induced by a density perturbation.
pub fn density_perturbation(rho: &SpaceTimeFunction, h_rho: &SpaceTimeFunction) -> SpaceTimeFunction {
    let (rho, h_rho) = (rho.clone(), h_rho.clone());
    SpaceTimeFunction::new(rho.order().min(h_rho.order()), move |t, j, x| {
        let a = reciprocal_derivatives(&rho, t, j, x);
        let mut acc = 0.0;
        for i in 0..=j {
            let r = j - i;
            let a_sq: f64 = (0..=r).map(|s| binom(r, s) * a[s] * a[r - s]).sum();
            acc -= binom(j, i) * h_rho.eval(t, i, x) * a_sq;
        }
        acc
    })
}

/// Coefficient, source and initial data of a wave problem.
#[derive(Clone)]
pub struct WaveData {
    pub coefficient: CoefficientField,
    pub source: SpaceTimeFunction,
    pub u0: ScalarFn,
    pub u1: ScalarFn,
    pub horizon: f64,
}

impl std::fmt::Debug for WaveData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveData")
            .field("coefficient", &self.coefficient)
            .field("source", &self.source)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl WaveData {
    pub fn with_coefficient(&self, coefficient: CoefficientField) -> Self {
        Self {
            coefficient,
            ..self.clone()
        }
    }
}

fn check_lower_bound(mesh: &Mesh1D, a: &CoefficientField, horizon: f64) -> Result<()> {
    for t in validation_times(horizon) {
        for x in mesh.quadrature_points() {
            let value = a.eval(t, 0, x);
            if !(value >= a.lower_bound()) {
                return Err(Error::CoefficientBelowBound {
                    lower_bound: a.lower_bound(),
                    t,
                    x,
                    value,
                });
            }
        }
    }
    Ok(())
}

/// Time-dependent stiffness family `A(t)⁽ʲ⁾ = ∫ ∂ₜʲa·φᵢ′φⱼ′`.
pub fn stiffness_family(mesh: &Mesh1D, field: &SpaceTimeFunction, horizon: f64) -> OperatorFamily {
    let (mesh, field) = (*mesh, field.clone());
    OperatorFamily::new(OperatorKind::VToVDual, mesh.dim(), horizon, field.order(), move |t, j| {
        mesh.weighted_stiffness(|x| field.eval(t, j, x))
    })
    .with_selfadjoint(true)
}

pub fn assemble_wave_problem(mesh: &Mesh1D, data: &WaveData) -> Result<ProblemData> {
    let horizon = data.horizon;
    let a = &data.coefficient;
    check_lower_bound(mesh, a, horizon)?;
    let mass = mesh.mass();
    let space = SpaceDiscretization::new(mass.clone(), mesh.stiffness() + &mass)?.with_labels(mesh.nodes());
    let m = mesh.dim();

    let a_op = stiffness_family(mesh, a.field(), horizon).with_coercivity(a.lower_bound() * mesh.stiffness_ratio());
    let c_op = OperatorFamily::constant(OperatorKind::HToH, horizon, mass).with_coercivity(1.0);
    let (mesh_f, source) = (*mesh, data.source.clone());
    let f = RhsFunction::new(m, horizon, source.order(), move |t, j| mesh_f.load(|x| source.eval(t, j, x)));
    Ok(ProblemData {
        space,
        a: a_op,
        b: OperatorFamily::zero(OperatorKind::HToH, m, horizon),
        c: c_op,
        q: OperatorFamily::zero(OperatorKind::VToH, m, horizon),
        f,
        u0: mesh.interpolate(|x| (data.u0)(x)),
        u1: mesh.interpolate(|x| (data.u1)(x)),
        horizon,
    })
}

pub const MANUFACTURED_CASES: [&str; 3] = ["static-sine", "timedep-sine", "poly-time"];

/// Fixture with a known solution.
#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub name: String,
    pub data: WaveData,
    pub exact: SpaceTimeFunction,
}

/// `d^j/dt^j cos(ωt)`.
fn cos_derivative(omega: f64, t: f64, j: usize) -> f64 {
    omega.powi(j as i32) * (omega * t + j as f64 * PI / 2.0).cos()
}

fn sin_derivative(omega: f64, t: f64, j: usize) -> f64 {
    omega.powi(j as i32) * (omega * t + j as f64 * PI / 2.0).sin()
}

/// `d^j/dt^j (1 + t + t²/2)`.
fn poly_time(t: f64, j: usize) -> f64 {
    match j {
        0 => 1.0 + t + 0.5 * t * t,
        1 => 1.0 + t,
        2 => 1.0,
        _ => 0.0,
    }
}

pub fn manufactured_case(name: &str) -> Result<ManufacturedCase> {
    let pi2 = PI * PI;
    let (coefficient, source, exact) = match name {
        "static-sine" => (
            CoefficientField::constant(1.0)?,
            SpaceTimeFunction::zero(),
            SpaceTimeFunction::new(UNBOUNDED_ORDER, |t, j, x| (PI * x).sin() * cos_derivative(PI, t, j)),
        ),
        "timedep-sine" => (
            CoefficientField::new(
                SpaceTimeFunction::new(UNBOUNDED_ORDER, |t, j, _| {
                    let s = 0.5 * sin_derivative(1.0, t, j);
                    if j == 0 {
                        1.0 + s
                    } else {
                        s
                    }
                }),
                0.5,
            )?,
            // u″ − a·u_xx with a = 1 + ½sin t, u = sin(πx)cos t
            SpaceTimeFunction::new(UNBOUNDED_ORDER, move |t, j, x| {
                (PI * x).sin() * ((pi2 - 1.0) * cos_derivative(1.0, t, j) + 0.25 * pi2 * sin_derivative(2.0, t, j))
            }),
            SpaceTimeFunction::new(UNBOUNDED_ORDER, |t, j, x| (PI * x).sin() * cos_derivative(1.0, t, j)),
        ),
        "poly-time" => (
            CoefficientField::constant(1.0)?,
            SpaceTimeFunction::new(UNBOUNDED_ORDER, move |t, j, x| {
                (PI * x).sin() * (poly_time(t, j + 2) + pi2 * poly_time(t, j))
            }),
            SpaceTimeFunction::new(UNBOUNDED_ORDER, |t, j, x| (PI * x).sin() * poly_time(t, j)),
        ),
        _ => {
            return Err(Error::UnknownCase {
                name: name.to_string(),
                valid: MANUFACTURED_CASES.join(", "),
            })
        }
    };
    let (e0, e1) = (exact.clone(), exact.clone());
    Ok(ManufacturedCase {
        name: name.to_string(),
        data: WaveData {
            coefficient,
            source,
            u0: Arc::new(move |x| e0.eval(0.0, 0, x)),
            u1: Arc::new(move |x| e1.eval(0.0, 1, x)),
            horizon: 1.0,
        },
        exact,
    })
}

/// `max_n ‖u_h(tₙ) − ∂ₜʲu(tₙ)‖_{L²(0,1)}`.
pub fn linf_h_error(mesh: &Mesh1D, u: &Trajectory, exact: &SpaceTimeFunction, j: usize) -> Result<f64> {
    if u.dim() != mesh.dim() {
        return Err(Error::dims(mesh.dim(), u.dim(), "trajectory"));
    }
    Ok(u.grid()
        .nodes()
        .enumerate()
        .map(|(n, t)| mesh.l2_error(u.at(n), |x| exact.eval(t, j, x)))
        .fold(0.0, f64::max))
}

/// `ln(e_coarse/e_fine) / ln(h_coarse/h_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// Directional derivative `∂F(a)[h]` of the coefficient-to-state map.
///
/// Solves the wave problem with coefficient `a`, zero initial data and load
/// `−∫ h·∂ₓu_base·φᵢ′`, evaluated where the time stepper samples it so that
/// the result is the exact derivative of the discrete map.
pub fn frechet_apply(
    mesh: &Mesh1D,
    a: &CoefficientField,
    h_pert: &SpaceTimeFunction,
    u_base: &Solution,
    grid: TimeGrid,
    lin_tol: f64,
) -> Result<Solution> {
    if !u_base.u.grid().same_as(&grid) {
        return Err(Error::GridMismatch("base solution lives on a different grid".into()));
    }
    if u_base.u.dim() != mesh.dim() {
        return Err(Error::dims(mesh.dim(), u_base.u.dim(), "base solution"));
    }
    let data = WaveData {
        coefficient: a.clone(),
        source: SpaceTimeFunction::zero(),
        u0: Arc::new(|_| 0.0),
        u1: Arc::new(|_| 0.0),
        horizon: grid.horizon(),
    };
    let mut p = assemble_wave_problem(mesh, &data)?;
    let (mesh, h, base) = (*mesh, h_pert.clone(), u_base.u.clone());
    p.f = RhsFunction::new(mesh.dim(), grid.horizon(), 0, move |t, _| {
        -(mesh.weighted_stiffness(|x| h.eval(t, 0, x)) * base.interpolate(t))
    });
    galerkin::solve_forward(&p, grid, lin_tol)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorRow {
    pub eps: f64,
    /// `‖F(a+εh) − F(a) − ε·∂F(a)[h]‖_{L²(I;H)}`.
    pub remainder: f64,
    /// `‖F(a+εh) − F(a)‖_{L²(I;H)}`.
    pub first_order_remainder: f64,
    /// Log-ratio against the previous row.
    pub slope: Option<f64>,
    pub first_order_slope: Option<f64>,
}

fn log_slope(prev: (f64, f64), cur: (f64, f64)) -> Option<f64> {
    let (e0, r0) = prev;
    let (e1, r1) = cur;
    if r0 > 0.0 && r1 > 0.0 {
        Some((r1 / r0).ln() / (e1 / e0).ln())
    } else {
        None
    }
}

/// Taylor remainder test of [`frechet_apply`] along `h_pert`.
pub fn taylor_test(
    mesh: &Mesh1D,
    data: &WaveData,
    h_pert: &SpaceTimeFunction,
    grid: TimeGrid,
    eps_list: &[f64],
    lin_tol: f64,
) -> Result<Vec<TaylorRow>> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidArgument("Taylor test needs at least three step sizes".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("step sizes must be positive and decreasing".into()));
    }
    let base_problem = assemble_wave_problem(mesh, data)?;
    let base = galerkin::solve_forward(&base_problem, grid, lin_tol)?;
    let direction = frechet_apply(mesh, &data.coefficient, h_pert, &base, grid, lin_tol)?;
    let gram_h = base_problem.space.gram_h().clone();

    let norms = eps_list
        .par_iter()
        .map(|&eps| {
            let shifted = data.with_coefficient(data.coefficient.perturbed(eps, h_pert));
            let p = assemble_wave_problem(mesh, &shifted)?;
            let u = galerkin::solve_forward(&p, grid, lin_tol)?.u;
            let diff = u.sub(&base.u)?;
            let remainder = diff.sub(&direction.u.scale(eps))?.l2_norm(&gram_h);
            Ok((remainder, diff.l2_norm(&gram_h)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<TaylorRow> = Vec::with_capacity(eps_list.len());
    for (i, (&eps, &(remainder, first))) in eps_list.iter().zip(&norms).enumerate() {
        let (slope, first_order_slope) = match rows.last() {
            Some(prev) => (
                log_slope((prev.eps, prev.remainder), (eps, remainder)),
                log_slope((prev.eps, prev.first_order_remainder), (eps, first)),
            ),
            None => (None, None),
        };
        debug_assert_eq!(rows.len(), i);
        rows.push(TaylorRow {
            eps,
            remainder,
            first_order_remainder: first,
            slope,
            first_order_slope,
        });
    }
    Ok(rows)
}
