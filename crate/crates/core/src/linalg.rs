//! Small dense linear-algebra helpers shared by the filters and evidence code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{DadaError, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn symmetrize(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

pub fn is_symmetric(p: &DMatrix<f64>, tol: f64) -> bool {
    if !p.is_square() {
        return false;
    }
    let scale = p.amax().max(1.0);
    (p - p.transpose()).amax() <= tol * scale
}

/// Ratio of largest to smallest absolute eigenvalue of a symmetric matrix.
pub fn condition_number(p: &DMatrix<f64>) -> f64 {
    let eig = symmetrize(p).symmetric_eigenvalues();
    let max = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cholesky factor of a symmetric positive definite matrix, or an
/// ill-conditioned error carrying the condition number.
pub fn cholesky(p: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    let sym = symmetrize(p);
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(DadaError::IllConditioned {
            what: what.to_string(),
            condition: f64::INFINITY,
        });
    }
    let cond = condition_number(&sym);
    if cond > 1e15 {
        return Err(DadaError::IllConditioned {
            what: what.to_string(),
            condition: cond,
        });
    }
    Cholesky::new(sym).ok_or_else(|| DadaError::IllConditioned {
        what: what.to_string(),
        condition: cond,
    })
}

/// Natural log of the density of `N(mean, cov)` at `x`.
pub fn log_normal_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    if x.len() != mean.len() || cov.nrows() != x.len() {
        return Err(DadaError::Dimension(format!(
            "density of dimension {} evaluated at vector of length {}",
            cov.nrows(),
            x.len()
        )));
    }
    let chol = cholesky(cov, "covariance")?;
    Ok(log_normal_pdf_chol(&(x - mean), &chol))
}

pub(crate) fn log_normal_pdf_chol(resid: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let log_det: f64 = 2.0 * (0..resid.len()).map(|i| l[(i, i)].ln()).sum::<f64>();
    let z = l
        .view_range(.., ..)
        .solve_lower_triangular(resid)
        .expect("cholesky factor has a positive diagonal");
    -0.5 * (resid.len() as f64 * LN_2PI + log_det + z.norm_squared())
}

/// A factor `L` with `L L' = p` for a symmetric positive semidefinite `p`.
///
/// Uses Cholesky when possible and falls back to an eigen square root so that
/// singular covariances (e.g. zero noise on some components) still sample.
pub fn psd_factor(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(p);
    if let Some(chol) = Cholesky::new(sym.clone()) {
        return Ok(chol.unpack());
    }
    let trace = sym.trace().abs().max(f64::MIN_POSITIVE);
    let eig = sym.symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-10 * trace {
            return Err(DadaError::Domain(format!(
                "matrix is not positive semidefinite (eigenvalue {lam:.3e})"
            )));
        }
        let s = lam.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    Ok(scaled)
}

pub fn is_psd(p: &DMatrix<f64>) -> bool {
    if !is_symmetric(p, 1e-10) {
        return false;
    }
    let trace = p.trace().abs();
    symmetrize(p)
        .symmetric_eigenvalues()
        .iter()
        .all(|&l| l >= -1e-10 * trace.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_at_mode() {
        let v = log_normal_pdf(
            &DVector::from_element(1, 0.0),
            &DVector::from_element(1, 0.0),
            &DMatrix::identity(1, 1),
        )
        .unwrap();
        assert!((v + 0.5 * LN_2PI).abs() < 1e-15);
        assert!((LN_2PI - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn psd_factor_handles_singular() {
        let p = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0, 1.0]));
        let l = psd_factor(&p).unwrap();
        assert!((&l * l.transpose() - &p).amax() < 1e-12);
        assert!(psd_factor(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))).is_err());
    }

    #[test]
    fn singular_cholesky_reports_condition() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match cholesky(&p, "test") {
            Err(DadaError::IllConditioned { condition, .. }) => assert!(condition > 1e15),
            other => panic!("unexpected {other:?}"),
        }
    }
}
