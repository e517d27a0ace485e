//! Discrete Gelfand triple `V ↪ H ↪ V*` and time-dependent operator families.
//!
//! Everything is expressed on one finite basis `(φ_i)`. An element of `V` or
//! `H` is a coefficient vector; an element of `V*` is its pairing vector
//! `(⟨r, φ_i⟩)_i`. Operator families hand out pairing matrices
//! `⟨G⁽ʲ⁾(t)φ_j, φ_i⟩`, so applying a family to a coefficient vector always
//! yields a pairing vector regardless of whether it maps into `H` or `V*`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg;

/// Derivative order used by families whose derivatives exist to every order
/// (constants, polynomials, trigonometric data).
pub const UNBOUNDED_ORDER: usize = usize::MAX;

/// Number of interior validation times; the endpoints are added on top.
pub const VALIDATION_INTERIOR_SAMPLES: usize = 17;

const SYMMETRY_TOL: f64 = 1e-12;
const COERCIVITY_SLACK: f64 = 1e-10;
const DOMINATION_SLACK: f64 = 1e-12;
const FD_CHECK_REL_STEP: f64 = 1e-3;
const FD_CHECK_TOL: f64 = 1e-5;
/// Derivative consistency is checked for `j < min(order, this)`.
const MAX_CHECKED_ORDER: usize = 4;

pub type MatrixEvaluator = Arc<dyn Fn(f64, usize) -> DMatrix<f64> + Send + Sync>;
pub type VectorEvaluator = Arc<dyn Fn(f64, usize) -> DVector<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// `V → V*`, tested against the V-Gram matrix.
    VToVDual,
    /// `H → H`, tested against the H-Gram matrix.
    HToH,
    /// `V → H`.
    VToH,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::VToVDual => "V->V*",
            OperatorKind::HToH => "H->H",
            OperatorKind::VToH => "V->H",
        })
    }
}

/// H- and V-Gram matrices over a finite basis.
#[derive(Clone, Debug)]
pub struct SpaceDiscretization {
    gram_h: DMatrix<f64>,
    gram_v: DMatrix<f64>,
    labels: Option<Vec<f64>>,
}

impl SpaceDiscretization {
    pub fn new(gram_h: DMatrix<f64>, gram_v: DMatrix<f64>) -> Result<Self> {
        if !gram_h.is_square() {
            return Err(Error::InvalidArgument("gramH must be square".into()));
        }
        if gram_h.shape() != gram_v.shape() {
            return Err(Error::dims(gram_h.nrows(), gram_v.nrows(), "gramV"));
        }
        Ok(Self {
            gram_h,
            gram_v,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn dim(&self) -> usize {
        self.gram_h.nrows()
    }

    pub fn gram_h(&self) -> &DMatrix<f64> {
        &self.gram_h
    }

    pub fn gram_v(&self) -> &DMatrix<f64> {
        &self.gram_v
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn norm_h(&self, x: &DVector<f64>) -> f64 {
        linalg::gram_norm(x, &self.gram_h)
    }

    pub fn norm_v(&self, x: &DVector<f64>) -> f64 {
        linalg::gram_norm(x, &self.gram_v)
    }

    pub fn gram_v_cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        linalg::cholesky(&self.gram_v, "gramV")
    }

    pub fn gram_h_cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        linalg::cholesky(&self.gram_h, "gramH")
    }

    /// Discrete V*-norm `√(rᵀ·gramV⁻¹·r)` of a pairing vector.
    pub fn norm_v_dual(&self, r: &DVector<f64>) -> Result<f64> {
        Ok(linalg::dual_norm(r, &self.gram_v_cholesky()?))
    }

    fn check(&self, report: &mut ValidationReport) {
        let mut spd = true;
        for (name, gram) in [("gramH", &self.gram_h), ("gramV", &self.gram_v)] {
            if !linalg::is_symmetric(gram, SYMMETRY_TOL) {
                report.push(
                    format!("symmetric({name})"),
                    format!("asymmetry {:.3e}", linalg::asymmetry(gram)),
                );
            }
            if linalg::cholesky(gram, name).is_err() {
                spd = false;
                report.push(format!("positive({name})"), "Cholesky factorization failed");
            }
        }
        if spd {
            // xᵀ·gramH·x ≤ xᵀ·gramV·x  ⇔  (1+slack)·gramV − gramH ⪰ 0
            let diff = &self.gram_v * (1.0 + DOMINATION_SLACK) - &self.gram_h;
            if linalg::cholesky(&diff, "domination").is_err() {
                report.push("domination(H<=V)", "largest eigenvalue of (gramH, gramV) exceeds 1");
            }
        }
    }
}

/// Time-dependent family of pairing matrices with derivatives up to `order`.
#[derive(Clone)]
pub struct OperatorFamily {
    kind: OperatorKind,
    dim: usize,
    horizon: f64,
    order: usize,
    selfadjoint: bool,
    coercivity: Option<f64>,
    evaluator: MatrixEvaluator,
}

impl fmt::Debug for OperatorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorFamily")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("order", &self.order)
            .field("selfadjoint", &self.selfadjoint)
            .field("coercivity", &self.coercivity)
            .finish_non_exhaustive()
    }
}

impl OperatorFamily {
    /// Family from an analytic evaluator `(t, j) ↦ G⁽ʲ⁾(t)`.
    pub fn new<F>(kind: OperatorKind, dim: usize, horizon: f64, order: usize, evaluator: F) -> Self
    where
        F: Fn(f64, usize) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            kind,
            dim,
            horizon,
            order,
            selfadjoint: false,
            coercivity: None,
            evaluator: Arc::new(evaluator),
        }
    }

    /// Time-constant family; all derivatives vanish.
    pub fn constant(kind: OperatorKind, horizon: f64, matrix: DMatrix<f64>) -> Self {
        let dim = matrix.nrows();
        let selfadjoint = linalg::is_symmetric(&matrix, SYMMETRY_TOL);
        let zero = DMatrix::zeros(dim, dim);
        Self::new(kind, dim, horizon, UNBOUNDED_ORDER, move |_, j| {
            if j == 0 {
                matrix.clone()
            } else {
                zero.clone()
            }
        })
        .with_selfadjoint(selfadjoint)
    }

    pub fn zero(kind: OperatorKind, dim: usize, horizon: f64) -> Self {
        Self::constant(kind, horizon, DMatrix::zeros(dim, dim))
    }

    /// Finite-difference fallback: derivatives of `values` are obtained from
    /// centred stencils. Intended for orders ≤ 2; accuracy degrades above.
    pub fn from_values_fd<F>(
        kind: OperatorKind,
        dim: usize,
        horizon: f64,
        order: usize,
        values: F,
    ) -> Self
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let scale = horizon.abs().max(1.0);
        Self::new(kind, dim, horizon, order, move |t, j| {
            if j == 0 {
                return values(t);
            }
            let step = f64::EPSILON.powf(1.0 / (j as f64 + 2.0)) * scale;
            let mut acc = DMatrix::zeros(dim, dim);
            for i in 0..=j {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let shift = (j as f64 / 2.0 - i as f64) * step;
                acc += values(t + shift) * (sign * linalg::binom(j, i));
            }
            acc / step.powi(j as i32)
        })
    }

    /// `Σ coef·G⁽ʲ⁺ˢʰⁱᶠᵗ⁾` over the given terms. The result's order is the
    /// smallest order the terms can still provide.
    pub fn linear_combination(
        kind: OperatorKind,
        dim: usize,
        horizon: f64,
        terms: Vec<(f64, OperatorFamily, usize)>,
    ) -> Self {
        let terms: Vec<_> = terms.into_iter().filter(|(c, _, _)| *c != 0.0).collect();
        let order = terms
            .iter()
            .map(|(_, fam, shift)| {
                if fam.order == UNBOUNDED_ORDER {
                    UNBOUNDED_ORDER
                } else {
                    fam.order.saturating_sub(*shift)
                }
            })
            .min()
            .unwrap_or(UNBOUNDED_ORDER);
        Self::new(kind, dim, horizon, order, move |t, j| {
            let mut acc = DMatrix::zeros(dim, dim);
            for (coef, fam, shift) in &terms {
                acc += fam.eval(t, j + shift) * *coef;
            }
            acc
        })
    }

    pub fn with_selfadjoint(mut self, selfadjoint: bool) -> Self {
        self.selfadjoint = selfadjoint;
        self
    }

    pub fn with_coercivity(mut self, constant: f64) -> Self {
        self.coercivity = Some(constant);
        self
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn eval(&self, t: f64, j: usize) -> DMatrix<f64> {
        debug_assert!(j <= self.order, "derivative {j} beyond declared order {}", self.order);
        (self.evaluator)(t, j)
    }

    /// Pairing vector of `G⁽ʲ⁾(t)·x`.
    pub fn apply(&self, t: f64, j: usize, x: &DVector<f64>) -> DVector<f64> {
        self.eval(t, j) * x
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn selfadjoint(&self) -> bool {
        self.selfadjoint
    }

    pub fn coercivity(&self) -> Option<f64> {
        self.coercivity
    }

    pub(crate) fn require_order(&self, name: &str, needed: usize) -> Result<()> {
        if self.order < needed {
            return Err(Error::InsufficientOrder {
                name: name.to_string(),
                needed,
                declared: self.order,
            });
        }
        Ok(())
    }
}

/// Time-dependent right-hand side given by its pairing vectors `⟨f⁽ʲ⁾(t), φ_i⟩`.
#[derive(Clone)]
pub struct RhsFunction {
    dim: usize,
    horizon: f64,
    order: usize,
    evaluator: VectorEvaluator,
}

impl fmt::Debug for RhsFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RhsFunction")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("order", &self.order)
            .finish_non_exhaustive()
    }
}

impl RhsFunction {
    pub fn new<F>(dim: usize, horizon: f64, order: usize, evaluator: F) -> Self
    where
        F: Fn(f64, usize) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            horizon,
            order,
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn zero(dim: usize, horizon: f64) -> Self {
        Self::new(dim, horizon, UNBOUNDED_ORDER, move |_, _| DVector::zeros(dim))
    }

    pub fn eval(&self, t: f64, j: usize) -> DVector<f64> {
        debug_assert!(j <= self.order, "derivative {j} beyond declared order {}", self.order);
        (self.evaluator)(t, j)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub(crate) fn require_order(&self, name: &str, needed: usize) -> Result<()> {
        if self.order < needed {
            return Err(Error::InsufficientOrder {
                name: name.to_string(),
                needed,
                declared: self.order,
            });
        }
        Ok(())
    }
}

/// `(Cu′)′ + Bu′ + (A+Q)u = f` on `(0,T)` with `u(0)=u0`, `(Cu′)(0)=C(0)u1`.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub space: SpaceDiscretization,
    pub a: OperatorFamily,
    pub b: OperatorFamily,
    pub c: OperatorFamily,
    pub q: OperatorFamily,
    pub f: RhsFunction,
    pub u0: DVector<f64>,
    pub u1: DVector<f64>,
    pub horizon: f64,
}

impl ProblemData {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub code: String,
    pub detail: String,
}

/// Violated invariants; empty when the problem is admissible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: impl Into<String>, detail: impl Into<String>) {
        let code = code.into();
        if !self.contains(&code) {
            self.violations.push(Violation {
                code,
                detail: detail.into(),
            });
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{} ({})", v.code, v.detail))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// Uniform validation times: 17 interior points plus both endpoints.
pub fn validation_times(horizon: f64) -> Vec<f64> {
    let n = VALIDATION_INTERIOR_SAMPLES + 1;
    (0..=n)
        .map(|i| if i == n { horizon } else { horizon * i as f64 / n as f64 })
        .collect()
}

fn relative_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn check_family(
    name: &str,
    fam: &OperatorFamily,
    expected_kind: OperatorKind,
    space: &SpaceDiscretization,
    horizon: f64,
    times: &[f64],
    report: &mut ValidationReport,
) {
    if fam.kind != expected_kind {
        report.push(
            format!("kind({name})"),
            format!("expected {expected_kind}, got {}", fam.kind),
        );
    }
    if fam.dim != space.dim() {
        report.push(
            format!("dimension({name})"),
            format!("expected {}, got {}", space.dim(), fam.dim),
        );
        return;
    }
    if !relative_close(fam.horizon, horizon) {
        report.push(
            format!("horizon({name})"),
            format!("expected {horizon}, got {}", fam.horizon),
        );
    }
    let needs_symmetry = matches!(name, "A" | "C");
    if needs_symmetry && !fam.selfadjoint {
        report.push(format!("selfadjoint({name})"), "family not declared selfadjoint");
    }
    let gram = match fam.kind {
        OperatorKind::VToVDual => Some(space.gram_v()),
        OperatorKind::HToH => Some(space.gram_h()),
        OperatorKind::VToH => None,
    };
    if needs_symmetry && fam.coercivity.is_none() {
        report.push(format!("coercivity({name})"), "no coercivity constant declared");
    }
    for &t in times {
        let g = fam.eval(t, 0);
        if g.shape() != (space.dim(), space.dim()) {
            report.push(format!("dimension({name})"), format!("evaluator shape {:?}", g.shape()));
            return;
        }
        if fam.selfadjoint && !linalg::is_symmetric(&g, SYMMETRY_TOL) {
            report.push(
                format!("selfadjoint({name})"),
                format!("asymmetry {:.3e} at t={t}", linalg::asymmetry(&g)),
            );
        }
        if let (Some(c0), Some(gram)) = (fam.coercivity, gram) {
            // smallest eigenvalue of (G, gram) ≥ c0 − slack ⇔ G − (c0 − slack)·gram ≻ 0
            let shifted = linalg::symmetrize(&g) - gram * (c0 - COERCIVITY_SLACK);
            if c0 <= 0.0 || linalg::cholesky(&shifted, name).is_err() {
                report.push(format!("coercivity({name})"), format!("fails at t={t}"));
            }
        }
    }
    let checked = fam.order.min(MAX_CHECKED_ORDER);
    let delta = FD_CHECK_REL_STEP * horizon;
    for &t in &times[1..times.len() - 1] {
        for j in 0..checked {
            let lo = fam.eval(t - delta, j);
            let hi = fam.eval(t + delta, j);
            let fd = (&hi - &lo) / (2.0 * delta);
            let exact = fam.eval(t, j + 1);
            let scale = linalg::max_abs(&exact)
                + linalg::max_abs(&lo).max(linalg::max_abs(&hi)) / horizon
                + f64::MIN_POSITIVE;
            let err = linalg::max_abs(&(fd - exact));
            if err > FD_CHECK_TOL * scale {
                report.push(
                    format!("derivative({name})"),
                    format!("order {} inconsistent at t={t}: error {err:.3e}", j + 1),
                );
            }
        }
    }
}

fn check_rhs(
    f: &RhsFunction,
    space: &SpaceDiscretization,
    horizon: f64,
    times: &[f64],
    report: &mut ValidationReport,
) {
    if f.dim != space.dim() {
        report.push("dimension(f)", format!("expected {}, got {}", space.dim(), f.dim));
        return;
    }
    if !relative_close(f.horizon, horizon) {
        report.push("horizon(f)", format!("expected {horizon}, got {}", f.horizon));
    }
    let vmax = |v: &DVector<f64>| linalg::inf_norm_vec(v);
    let checked = f.order.min(MAX_CHECKED_ORDER);
    let delta = FD_CHECK_REL_STEP * horizon;
    for &t in &times[1..times.len() - 1] {
        for j in 0..checked {
            let lo = f.eval(t - delta, j);
            let hi = f.eval(t + delta, j);
            let fd = (&hi - &lo) / (2.0 * delta);
            let exact = f.eval(t, j + 1);
            let scale = vmax(&exact) + vmax(&lo).max(vmax(&hi)) / horizon + f64::MIN_POSITIVE;
            let err = vmax(&(fd - exact));
            if err > FD_CHECK_TOL * scale {
                report.push(
                    "derivative(f)",
                    format!("order {} inconsistent at t={t}: error {err:.3e}", j + 1),
                );
            }
        }
    }
}

/// Checks every structural invariant of the problem at the validation times.
pub fn validate_problem(p: &ProblemData) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !(p.horizon > 0.0 && p.horizon.is_finite()) {
        report.push("horizon", format!("T = {} must be positive", p.horizon));
        return report;
    }
    p.space.check(&mut report);
    let times = validation_times(p.horizon);
    let space_ok = report.is_empty();
    for (name, fam, kind) in [
        ("A", &p.a, OperatorKind::VToVDual),
        ("B", &p.b, OperatorKind::HToH),
        ("C", &p.c, OperatorKind::HToH),
        ("Q", &p.q, OperatorKind::VToH),
    ] {
        if space_ok {
            check_family(name, fam, kind, &p.space, p.horizon, &times, &mut report);
        } else if fam.kind != kind {
            report.push(format!("kind({name})"), format!("expected {kind}, got {}", fam.kind));
        }
    }
    check_rhs(&p.f, &p.space, p.horizon, &times, &mut report);
    for (name, v) in [("u0", &p.u0), ("u1", &p.u1)] {
        if v.len() != p.dim() {
            report.push(format!("dimension({name})"), format!("length {}", v.len()));
        }
    }
    report
}

/// Gårding shift `A ↦ A + λI`, `Q ↦ Q − λI`; only the zeroth derivative moves.
pub fn shift_garding(
    a: &OperatorFamily,
    q: &OperatorFamily,
    lambda: f64,
    space: &SpaceDiscretization,
) -> Result<(OperatorFamily, OperatorFamily)> {
    if a.kind != OperatorKind::VToVDual {
        return Err(Error::InvalidArgument(format!("A must be V->V*, got {}", a.kind)));
    }
    if q.kind != OperatorKind::VToH {
        return Err(Error::InvalidArgument(format!("Q must be V->H, got {}", q.kind)));
    }
    let gram = space.gram_h().clone();
    let shift = move |inner: OperatorFamily, sign: f64| {
        let gram = gram.clone();
        let base = inner.clone();
        let fam = OperatorFamily::new(inner.kind, inner.dim, inner.horizon, inner.order, move |t, j| {
            let g = base.eval(t, j);
            if j == 0 && lambda != 0.0 {
                g + &gram * (sign * lambda)
            } else {
                g
            }
        })
        .with_selfadjoint(inner.selfadjoint);
        match inner.coercivity {
            Some(c) => fam.with_coercivity(c),
            None => fam,
        }
    };
    Ok((shift(a.clone(), 1.0), shift(q.clone(), -1.0)))
}

/// Minimum over `sample_count` uniform times of the smallest eigenvalue of
/// the pencil `(G(t), gram)`.
pub fn estimate_coercivity(
    g: &OperatorFamily,
    gram: &DMatrix<f64>,
    sample_count: usize,
) -> Result<f64> {
    if !g.selfadjoint {
        return Err(Error::NotSelfadjoint("coercivity estimate".into()));
    }
    let n = sample_count.max(1);
    let mut best = f64::INFINITY;
    for i in 0..n {
        let t = if n == 1 {
            0.0
        } else if i == n - 1 {
            g.horizon
        } else {
            g.horizon * i as f64 / (n - 1) as f64
        };
        let m = g.eval(t, 0);
        if !linalg::is_symmetric(&m, SYMMETRY_TOL) {
            return Err(Error::NotSelfadjoint(format!("coercivity estimate (t={t})")));
        }
        best = best.min(linalg::min_generalized_eigenvalue(&m, gram)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn canonical(m: usize) -> ProblemData {
        let h = 1.0 / (m + 1) as f64;
        let mass = tridiag(m, 4.0 * h / 6.0, h / 6.0);
        let stiff = tridiag(m, 2.0 / h, -1.0 / h);
        let space = SpaceDiscretization::new(mass.clone(), &stiff + &mass).unwrap();
        let a0 = linalg::min_generalized_eigenvalue(&stiff, space.gram_v()).unwrap();
        ProblemData {
            a: OperatorFamily::constant(OperatorKind::VToVDual, 1.0, stiff).with_coercivity(a0),
            b: OperatorFamily::zero(OperatorKind::HToH, m, 1.0),
            c: OperatorFamily::constant(OperatorKind::HToH, 1.0, mass).with_coercivity(1.0),
            q: OperatorFamily::zero(OperatorKind::VToH, m, 1.0),
            f: RhsFunction::zero(m, 1.0),
            u0: DVector::zeros(m),
            u1: DVector::zeros(m),
            horizon: 1.0,
            space,
        }
    }

    #[test]
    fn canonical_pair_validates() {
        let report = validate_problem(&canonical(7));
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn validation_uses_seventeen_interior_times() {
        let times = validation_times(2.0);
        assert_eq!(times.len(), 19);
        assert_eq!(times[0], 0.0);
        assert_eq!(times[18], 2.0);
    }

    #[test]
    fn sign_flip_breaks_coercivity() {
        let mut p = canonical(5);
        let a = p.a.clone();
        p.a = OperatorFamily::new(OperatorKind::VToVDual, 5, 1.0, UNBOUNDED_ORDER, move |t, j| {
            -a.eval(t, j)
        })
        .with_selfadjoint(true)
        .with_coercivity(p.a.coercivity().unwrap());
        assert!(validate_problem(&p).contains("coercivity(A)"));
    }

    #[test]
    fn skew_perturbation_is_detected() {
        let mut p = canonical(5);
        let a = p.a.clone();
        let mut skew = DMatrix::zeros(5, 5);
        skew[(0, 1)] = 1e-3;
        skew[(1, 0)] = -1e-3;
        p.a = OperatorFamily::new(OperatorKind::VToVDual, 5, 1.0, UNBOUNDED_ORDER, move |t, j| {
            if j == 0 {
                a.eval(t, 0) + &skew
            } else {
                a.eval(t, j)
            }
        })
        .with_selfadjoint(true)
        .with_coercivity(p.a.coercivity().unwrap());
        let report = validate_problem(&p);
        assert!(report.contains("selfadjoint(A)"), "{report}");
    }

    #[test]
    fn wrong_derivative_is_detected() {
        let mut p = canonical(3);
        let base = tridiag(3, 1.0, 0.0);
        p.b = OperatorFamily::new(OperatorKind::HToH, 3, 1.0, 2, move |t, j| match j {
            0 => &base * t.sin(),
            // should be cos
            1 => &base * t.sin(),
            _ => &base * -t.sin(),
        });
        assert!(validate_problem(&p).contains("derivative(B)"));
    }

    #[test]
    fn domination_violation_is_detected() {
        let mut p = canonical(4);
        p.space = SpaceDiscretization::new(p.space.gram_v() * 2.0, p.space.gram_v().clone()).unwrap();
        assert!(validate_problem(&p).contains("domination(H<=V)"));
    }

    #[test]
    fn finite_difference_fallback_is_consistent() {
        let base = tridiag(3, 2.0, -0.5);
        let b2 = base.clone();
        let fam = OperatorFamily::from_values_fd(OperatorKind::HToH, 3, 1.0, 2, move |t| {
            &b2 * (1.0 + 0.3 * (2.0 * t).sin())
        });
        let t: f64 = 0.37;
        let exact1 = &base * (0.6 * (2.0 * t).cos());
        let exact2 = &base * (-1.2 * (2.0 * t).sin());
        assert!(linalg::max_abs(&(fam.eval(t, 1) - exact1)) < 1e-8);
        assert!(linalg::max_abs(&(fam.eval(t, 2) - exact2)) < 1e-6);

        let mut p = canonical(3);
        p.b = fam;
        let report = validate_problem(&p);
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn garding_shift_identity_and_cancellation() {
        let p = canonical(6);
        let (a0, q0) = shift_garding(&p.a, &p.q, 0.0, &p.space).unwrap();
        assert_eq!(a0.eval(0.3, 0), p.a.eval(0.3, 0));
        assert_eq!(q0.eval(0.3, 0), p.q.eval(0.3, 0));

        let (a2, q2) = shift_garding(&p.a, &p.q, 2.0, &p.space).unwrap();
        assert_eq!(a2.eval(0.3, 1), p.a.eval(0.3, 1));
        assert_eq!(q2.eval(0.3, 1), p.q.eval(0.3, 1));

        let (a5, q5) = shift_garding(&p.a, &p.q, 5.0, &p.space).unwrap();
        let diff = a5.eval(0.5, 0) + q5.eval(0.5, 0) - (p.a.eval(0.5, 0) + p.q.eval(0.5, 0));
        assert!(linalg::max_abs(&diff) <= 1e-14 * linalg::max_abs(&p.a.eval(0.5, 0)).max(1.0));
    }

    #[test]
    fn shift_rejects_wrong_kinds() {
        let p = canonical(3);
        assert!(shift_garding(&p.c, &p.q, 1.0, &p.space).is_err());
        assert!(shift_garding(&p.a, &p.b, 1.0, &p.space).is_err());
    }

    #[test]
    fn coercivity_of_identity_and_scaled_pencils() {
        let gram = tridiag(4, 4.0, 1.0);
        let ident = OperatorFamily::constant(OperatorKind::HToH, 1.0, gram.clone());
        assert!((estimate_coercivity(&ident, &gram, 5).unwrap() - 1.0).abs() < 1e-12);
        let tripled = OperatorFamily::constant(OperatorKind::HToH, 1.0, &gram * 3.0);
        assert!((estimate_coercivity(&tripled, &gram, 5).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coercivity_of_oscillating_pencil() {
        let gram = tridiag(3, 4.0, 1.0);
        let g2 = gram.clone();
        let two_pi = 2.0 * std::f64::consts::PI;
        let fam = OperatorFamily::new(OperatorKind::HToH, 3, two_pi, UNBOUNDED_ORDER, move |t, j| {
            let s = match j {
                0 => 2.0 + t.sin(),
                _ => (t + j as f64 * std::f64::consts::FRAC_PI_2).sin(),
            };
            &g2 * s
        })
        .with_selfadjoint(true);
        let n = 401;
        let est = estimate_coercivity(&fam, &gram, n).unwrap();
        // dense-sample minimum of 2 + sin t: the true minimum 1 is attained at
        // 3π/2, the nearest sample is at most half a spacing away
        let spacing = two_pi / (n - 1) as f64;
        assert!(est >= 1.0 - 1e-12);
        assert!(est - 1.0 <= 1.0 - (spacing / 2.0).cos() + 1e-12);
    }

    #[test]
    fn coercivity_requires_selfadjoint() {
        let gram = tridiag(2, 1.0, 0.0);
        let fam = OperatorFamily::constant(OperatorKind::HToH, 1.0, gram.clone()).with_selfadjoint(false);
        let err = estimate_coercivity(&fam, &gram, 3).unwrap_err();
        assert!(err.to_string().contains("requires selfadjoint family"));
    }

    #[test]
    fn coercivity_refinement_is_monotone() {
        let gram = tridiag(2, 1.0, 0.0);
        let g2 = gram.clone();
        let fam = OperatorFamily::new(OperatorKind::HToH, 2, 3.0, UNBOUNDED_ORDER, move |t, _| {
            &g2 * (1.5 + (3.0 * t).cos())
        })
        .with_selfadjoint(true);
        let mut prev = f64::INFINITY;
        for n in [3, 5, 9, 17, 33, 65] {
            let est = estimate_coercivity(&fam, &gram, n).unwrap();
            assert!(est <= prev + 1e-15);
            prev = est;
        }
    }
}
