//! Small dense linear-algebra helpers shared by the solver modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `‖G − Gᵀ‖_max ≤ rel_tol·‖G‖_max`.
pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    asymmetry(m) <= rel_tol * max_abs(m)
}

/// `‖G − Gᵀ‖_max`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m)).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Eigenvalues of the symmetric pencil `(g, gram)` in ascending order.
///
/// `gram` must be SPD; `g` is symmetrized before the reduction
/// `L⁻¹·g·L⁻ᵀ` with `gram = L·Lᵀ`.
pub fn generalized_eigenvalues(g: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<Vec<f64>> {
    if g.shape() != gram.shape() {
        return Err(Error::dims(gram.nrows(), g.nrows(), "generalized eigenproblem"));
    }
    let chol = cholesky(gram, "Gram matrix of generalized eigenproblem")?;
    let l = chol.l();
    let lower = l.clone();
    // X = L⁻¹ g, then Y = L⁻¹ Xᵀ = L⁻¹ gᵀ L⁻ᵀ
    let x = lower
        .solve_lower_triangular(&symmetrize(g))
        .ok_or_else(|| Error::NotPositiveDefinite("triangular factor".into()))?;
    let y = lower
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite("triangular factor".into()))?;
    let eig = SymmetricEigen::new(symmetrize(&y));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

pub fn min_generalized_eigenvalue(g: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<f64> {
    Ok(generalized_eigenvalues(g, gram)?[0])
}

pub fn max_generalized_eigenvalue(g: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<f64> {
    Ok(*generalized_eigenvalues(g, gram)?.last().unwrap())
}

/// `√(xᵀ·gram·x)`.
pub fn gram_norm(x: &DVector<f64>, gram: &DMatrix<f64>) -> f64 {
    gram_norm_sq(x, gram).max(0.0).sqrt()
}

pub fn gram_norm_sq(x: &DVector<f64>, gram: &DMatrix<f64>) -> f64 {
    x.dot(&(gram * x))
}

/// Discrete dual norm `√(rᵀ·gram⁻¹·r)` of a pairing vector.
pub fn dual_norm(r: &DVector<f64>, gram_chol: &Cholesky<f64, Dyn>) -> f64 {
    r.dot(&gram_chol.solve(r)).max(0.0).sqrt()
}

/// Binomial coefficient as a float; zero when `k > n`.
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

pub fn inf_norm_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Maximum absolute row sum.
pub fn inf_norm_mat(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), 10.0);
        assert_eq!(binom(4, 0), 1.0);
        assert_eq!(binom(2, 3), 0.0);
        assert_eq!(binom(1, 2), 0.0);
        assert_eq!(binom(6, 6), 1.0);
    }

    #[test]
    fn pencil_of_scaled_gram() {
        let gram = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let ev = generalized_eigenvalues(&(gram.clone() * 3.0), &gram).unwrap();
        assert!((ev[0] - 3.0).abs() < 1e-13 && (ev[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn dual_norm_of_riesz_image() {
        // For r = G·x the dual norm equals the primal G-norm of x.
        let gram = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let x = DVector::from_vec(vec![0.3, -1.2]);
        let r = &gram * &x;
        let chol = cholesky(&gram, "gram").unwrap();
        assert!((dual_norm(&r, &chol) - gram_norm(&x, &gram)).abs() < 1e-14);
    }
}
