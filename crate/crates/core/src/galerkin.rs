//! Galerkin equations as a first-order block system and its implicit-midpoint
//! integration.
//!
//! For a level-`k` form
//!
//! ```text
//! (Cv′)′ + B̃v′ + (A + Q̃)v + Σ_{l=1..k} (D_l + E_l)(R₀ˡ v) = f̃
//! ```
//!
//! the coefficient vector `α(t)` is augmented with `β = α′` and the iterated
//! integrals `γˡ = R₀ˡ α`, giving the `(k+2)m` system
//!
//! ```text
//! diag(M₋₂, I)·y′ = [ −M₋₁ | −M₀ | … | −M_k ; subdiagonal identities ]·y + (F, 0)
//! ```
//!
//! with `M₋₂ = C`, `M₋₁ = C′ + B̃`, `M₀ = A + Q̃` and `M_l = D_l + E_l`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::time::{TimeGrid, Trajectory};
use crate::triple::{OperatorFamily, ProblemData, RhsFunction, SpaceDiscretization};

/// Level-`k` evolution problem with integral terms.
#[derive(Clone, Debug)]
pub struct AuxiliaryForm {
    pub space: SpaceDiscretization,
    pub level: usize,
    pub a: OperatorFamily,
    pub c: OperatorFamily,
    /// Coefficient of `v′` (without the `C′` produced by the product rule).
    pub b_eff: OperatorFamily,
    /// Zeroth-order coefficient added to `A`.
    pub q_eff: OperatorFamily,
    pub d_ops: Vec<OperatorFamily>,
    pub e_ops: Vec<OperatorFamily>,
    pub rhs: RhsFunction,
    /// `v(0)`.
    pub iv0: DVector<f64>,
    /// `v′(0)`, i.e. `(Cv′)(0) = C(0)·iv1`.
    pub iv1: DVector<f64>,
    pub horizon: f64,
}

impl AuxiliaryForm {
    /// The level-0 form of a problem: no integral terms, data as given.
    pub fn from_problem(p: &ProblemData) -> Self {
        Self {
            space: p.space.clone(),
            level: 0,
            a: p.a.clone(),
            c: p.c.clone(),
            b_eff: p.b.clone(),
            q_eff: p.q.clone(),
            d_ops: Vec::new(),
            e_ops: Vec::new(),
            rhs: p.f.clone(),
            iv0: p.u0.clone(),
            iv1: p.u1.clone(),
            horizon: p.horizon,
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub(crate) fn check(&self) -> Result<()> {
        let m = self.dim();
        if self.d_ops.len() != self.level || self.e_ops.len() != self.level {
            return Err(Error::InvalidArgument(format!(
                "level {} form needs {} D and E operators, got {} and {}",
                self.level,
                self.level,
                self.d_ops.len(),
                self.e_ops.len()
            )));
        }
        let families = [&self.a, &self.c, &self.b_eff, &self.q_eff]
            .into_iter()
            .chain(&self.d_ops)
            .chain(&self.e_ops);
        for fam in families {
            if fam.dim() != m {
                return Err(Error::dims(m, fam.dim(), "operator family"));
            }
            if (fam.horizon() - self.horizon).abs() > 1e-12 * self.horizon.max(1.0) {
                return Err(Error::GridMismatch(format!(
                    "family horizon {} differs from {}",
                    fam.horizon(),
                    self.horizon
                )));
            }
        }
        if self.rhs.dim() != m {
            return Err(Error::dims(m, self.rhs.dim(), "right-hand side"));
        }
        if self.iv0.len() != m {
            return Err(Error::dims(m, self.iv0.len(), "iv0"));
        }
        if self.iv1.len() != m {
            return Err(Error::dims(m, self.iv1.len(), "iv1"));
        }
        self.c.require_order("C", 1)?;
        Ok(())
    }
}

/// The block matrices `M₋₂, M₋₁, M₀, …, M_k` at one instant.
#[derive(Clone, Debug)]
pub struct BlockCoefficients {
    pub leading: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    /// `M₀, M₁, …, M_k`.
    pub stiffness: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct BlockSystem {
    form: AuxiliaryForm,
    init: DVector<f64>,
}

impl BlockSystem {
    pub fn level(&self) -> usize {
        self.form.level
    }

    /// Basis dimension `m`.
    pub fn block_dim(&self) -> usize {
        self.form.dim()
    }

    /// `(k+2)·m`.
    pub fn dimension(&self) -> usize {
        (self.form.level + 2) * self.form.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.form.horizon
    }

    pub fn form(&self) -> &AuxiliaryForm {
        &self.form
    }

    pub fn init(&self) -> &DVector<f64> {
        &self.init
    }

    pub fn coefficients(&self, t: f64) -> BlockCoefficients {
        let f = &self.form;
        let leading = f.c.eval(t, 0);
        let damping = f.c.eval(t, 1) + f.b_eff.eval(t, 0);
        let mut stiffness = Vec::with_capacity(f.level + 1);
        stiffness.push(f.a.eval(t, 0) + f.q_eff.eval(t, 0));
        for (d, e) in f.d_ops.iter().zip(&f.e_ops) {
            stiffness.push(d.eval(t, 0) + e.eval(t, 0));
        }
        BlockCoefficients {
            leading,
            damping,
            stiffness,
        }
    }

    /// `F(t)`.
    pub fn load(&self, t: f64) -> DVector<f64> {
        self.form.rhs.eval(t, 0)
    }

    /// `diag(M₋₂(t), I_{(k+1)m})`.
    pub fn lhs(&self, t: f64) -> DMatrix<f64> {
        let m = self.block_dim();
        let n = self.dimension();
        let mut out = DMatrix::identity(n, n);
        out.view_mut((0, 0), (m, m)).copy_from(&self.form.c.eval(t, 0));
        out
    }

    /// Dense right-hand block matrix; see the module docs for the layout.
    pub fn rhs_matrix(&self, t: f64) -> DMatrix<f64> {
        let m = self.block_dim();
        let k = self.level();
        let n = self.dimension();
        let coeffs = self.coefficients(t);
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (m, m)).copy_from(&(-&coeffs.damping));
        for (l, ml) in coeffs.stiffness.iter().enumerate() {
            out.view_mut((0, (l + 1) * m), (m, m)).copy_from(&(-ml));
        }
        // γ⁰′ = β, γˡ′ = γˡ⁻¹
        for block in 0..=k {
            for i in 0..m {
                out[((block + 1) * m + i, block * m + i)] = 1.0;
            }
        }
        out
    }

    /// `(F(t), 0)`.
    pub fn forcing(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dimension());
        out.rows_mut(0, self.block_dim()).copy_from(&self.load(t));
        out
    }
}

/// Builds the block system of a level-`k` form.
///
/// The initial state is `β(0) = iv1`, `γ⁰(0) = iv0`, `γˡ(0) = 0`; `M₋₂(0)`
/// has to be positive definite.
pub fn assemble_block_system(form: &AuxiliaryForm) -> Result<BlockSystem> {
    form.check()?;
    let m = form.dim();
    linalg::cholesky(&form.c.eval(0.0, 0), "C(0)").map_err(|_| Error::SingularLeadingOperator)?;
    let mut init = DVector::zeros((form.level + 2) * m);
    init.rows_mut(0, m).copy_from(&form.iv1);
    init.rows_mut(m, m).copy_from(&form.iv0);
    Ok(BlockSystem {
        form: form.clone(),
        init,
    })
}

const MAX_REFINEMENTS: usize = 3;

/// Implicit-midpoint integration of `lhs·y′ = rhs_mat·y + forcing`.
///
/// Each step solves
/// `[lhs/dt − ½·rhs_mat]·y₊ = [lhs/dt + ½·rhs_mat]·y + forcing` with all
/// coefficients evaluated at `t_{n+½}`. The γ rows are eliminated exactly,
/// leaving one `m×m` solve for the midpoint velocity per step. `lin_tol`
/// bounds the normwise backward error of that solve.
pub fn integrate(sys: &BlockSystem, grid: TimeGrid, lin_tol: f64) -> Result<Trajectory> {
    if (grid.horizon() - sys.horizon()).abs() > 1e-12 * sys.horizon().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "grid horizon {} differs from system horizon {}",
            grid.horizon(),
            sys.horizon()
        )));
    }
    let m = sys.block_dim();
    let k = sys.level();
    let s = 0.5 * grid.dt();

    let mut states = Vec::with_capacity(grid.len());
    states.push(sys.init().clone());
    let mut beta = sys.init().rows(0, m).into_owned();
    let mut gamma: Vec<DVector<f64>> = (0..=k)
        .map(|l| sys.init().rows((l + 1) * m, m).into_owned())
        .collect();

    for step in 0..grid.steps() {
        let t_mid = 0.5 * (grid.node(step) + grid.node(step + 1));
        let coeffs = sys.coefficients(t_mid);

        // γ̄ˡ = hˡ + s^{l+1}·β̄ with hˡ = γˡ + s·hˡ⁻¹
        let mut partial = Vec::with_capacity(k + 1);
        partial.push(gamma[0].clone());
        for l in 1..=k {
            let next = &gamma[l] + &partial[l - 1] * s;
            partial.push(next);
        }

        let mut schur = &coeffs.leading / s + &coeffs.damping;
        let mut rhs = &coeffs.leading * &beta / s + sys.load(t_mid);
        let mut power = s;
        for (ml, hl) in coeffs.stiffness.iter().zip(&partial) {
            schur += ml * power;
            rhs -= ml * hl;
            power *= s;
        }

        let lu = schur.clone().lu();
        let mut beta_mid = lu.solve(&rhs).ok_or_else(|| Error::LinearSolve {
            step,
            reason: "singular step matrix".into(),
        })?;
        let scale = linalg::inf_norm_mat(&schur);
        let mut refinements = 0;
        loop {
            let residual = &rhs - &schur * &beta_mid;
            let denom = scale * linalg::inf_norm_vec(&beta_mid) + linalg::inf_norm_vec(&rhs);
            let backward = if denom > 0.0 {
                linalg::inf_norm_vec(&residual) / denom
            } else {
                0.0
            };
            if !backward.is_finite() {
                return Err(Error::LinearSolve {
                    step,
                    reason: "non-finite residual".into(),
                });
            }
            if backward <= lin_tol {
                break;
            }
            if refinements == MAX_REFINEMENTS {
                return Err(Error::LinearSolve {
                    step,
                    reason: format!("backward error {backward:.3e} above tolerance {lin_tol:.3e}"),
                });
            }
            let correction = lu.solve(&residual).ok_or_else(|| Error::LinearSolve {
                step,
                reason: "singular step matrix".into(),
            })?;
            beta_mid += correction;
            refinements += 1;
        }

        let mut power = s;
        for (l, hl) in partial.iter().enumerate() {
            let gamma_mid = hl + &beta_mid * power;
            gamma[l] = &gamma_mid * 2.0 - &gamma[l];
            power *= s;
        }
        beta = &beta_mid * 2.0 - &beta;

        let mut state = DVector::zeros((k + 2) * m);
        state.rows_mut(0, m).copy_from(&beta);
        for (l, g) in gamma.iter().enumerate() {
            state.rows_mut((l + 1) * m, m).copy_from(g);
        }
        states.push(state);
    }
    Trajectory::new(grid, states)
}

/// Solution trajectory together with its time derivative.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Trajectory,
    pub du: Trajectory,
}

/// Integrates a form and splits the state into `v = γ⁰` and `v′ = β`.
pub fn solve_form(form: &AuxiliaryForm, grid: TimeGrid, lin_tol: f64) -> Result<Solution> {
    let sys = assemble_block_system(form)?;
    let states = integrate(&sys, grid, lin_tol)?;
    let m = sys.block_dim();
    Ok(Solution {
        u: states.block(m, m),
        du: states.block(0, m),
    })
}

/// Forward solve of the original problem.
pub fn solve_forward(p: &ProblemData, grid: TimeGrid, lin_tol: f64) -> Result<Solution> {
    solve_form(&AuxiliaryForm::from_problem(p), grid, lin_tol)
}
