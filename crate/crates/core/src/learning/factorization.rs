use nalgebra::DMatrix;

use super::LearningError;

fn target(coefficients: &[f64], powers: &[DMatrix<f64>], rows: usize, cols: usize) -> Result<DMatrix<f64>, LearningError> {
    if coefficients.len() != powers.len() {
        return Err(LearningError::Shape(format!(
            "{} coefficients for {} transition powers",
            coefficients.len(),
            powers.len()
        )));
    }
    let mut s = DMatrix::zeros(rows, cols);
    for (c, p) in coefficients.iter().zip(powers) {
        if p.shape() != (rows, cols) {
            return Err(LearningError::Shape(format!("power has shape {:?}, expected {:?}", p.shape(), (rows, cols))));
        }
        s += p * *c;
    }
    Ok(s)
}

fn residual(l: &DMatrix<f64>, r: &DMatrix<f64>, coefficients: &[f64], powers: &[DMatrix<f64>]) -> Result<DMatrix<f64>, LearningError> {
    if l.ncols() != r.ncols() {
        return Err(LearningError::Shape(format!("L has {} columns, R has {}", l.ncols(), r.ncols())));
    }
    Ok(l * r.transpose() - target(coefficients, powers, l.nrows(), r.nrows())?)
}

/// `½ ‖L Rᵀ − Σ_k c_k P_k‖²_F` where `P_k` estimates `T^k`.
pub fn factorization_loss(
    l: &DMatrix<f64>,
    r: &DMatrix<f64>,
    coefficients: &[f64],
    powers: &[DMatrix<f64>],
) -> Result<f64, LearningError> {
    Ok(0.5 * residual(l, r, coefficients, powers)?.norm_squared())
}

/// Gradients `(E R, Eᵀ L)` of [`factorization_loss`] with `E = L Rᵀ − Σ_k c_k P_k`.
pub fn factorization_gradient(
    l: &DMatrix<f64>,
    r: &DMatrix<f64>,
    coefficients: &[f64],
    powers: &[DMatrix<f64>],
) -> Result<(DMatrix<f64>, DMatrix<f64>), LearningError> {
    let e = residual(l, r, coefficients, powers)?;
    Ok((&e * r, e.transpose() * l))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_factors_give_zero_gradient() {
        let z = DMatrix::zeros(3, 2);
        let p = DMatrix::from_element(3, 3, 0.3);
        let (gl, gr) = factorization_gradient(&z, &z, &[1.0], &[p]).unwrap();
        assert_eq!(gl.norm(), 0.0);
        assert_eq!(gr.norm(), 0.0);
    }

    #[test]
    fn exact_factorization_is_stationary() {
        let l = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let r = DMatrix::from_row_slice(2, 1, &[0.5, 0.25]);
        let p = &l * r.transpose();
        let (gl, gr) = factorization_gradient(&l, &r, &[2.0], &[p * 0.5]).unwrap();
        assert!(gl.norm() < 1e-15 && gr.norm() < 1e-15);
    }

    #[test]
    fn matches_finite_differences() {
        let l = DMatrix::from_fn(4, 2, |i, j| (i as f64 - 1.5) * 0.3 + j as f64 * 0.1);
        let r = DMatrix::from_fn(4, 2, |i, j| ((i * 3 + j) % 5) as f64 * 0.2 - 0.4);
        let p1 = DMatrix::from_fn(4, 4, |i, j| if (i + j) % 2 == 0 { 0.5 } else { 0.0 });
        let p2 = DMatrix::from_element(4, 4, 0.25);
        let (c, ps) = ([1.0, 0.5], [p1, p2]);
        let (gl, _) = factorization_gradient(&l, &r, &c, &ps).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            for j in 0..2 {
                let (mut lp, mut lm) = (l.clone(), l.clone());
                lp[(i, j)] += h;
                lm[(i, j)] -= h;
                let fd = (factorization_loss(&lp, &r, &c, &ps).unwrap() - factorization_loss(&lm, &r, &c, &ps).unwrap()) / (2.0 * h);
                assert!((fd - gl[(i, j)]).abs() < 1e-8);
            }
        }
    }
}
