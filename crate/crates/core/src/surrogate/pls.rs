use nalgebra::{DMatrix, DVector};

use super::SurrogateError;

/// First `h` PLS1 weight vectors of the regression of `y` on `x` (NIPALS),
/// as the columns of a `d × h` matrix with unit-norm columns.
///
/// Inputs are used as given; callers normally pass centred/standardized data.
/// If the residual vanishes before `h` components are extracted, the remaining
/// columns are zero. `y` with zero variance has no PLS direction and yields
/// [`SurrogateError::Degenerate`].
pub fn fit_pls(x: &DMatrix<f64>, y: &DVector<f64>, h: usize) -> Result<DMatrix<f64>, SurrogateError> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(SurrogateError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let mut weights = DMatrix::zeros(d, h);
    if h == 0 {
        return Ok(weights);
    }
    let y_mean = y.mean();
    if y.iter().all(|v| (v - y_mean).abs() <= 1e-14 * (1.0 + y_mean.abs())) {
        return Err(SurrogateError::Degenerate);
    }
    let mut xk = x.clone();
    let mut yk = y.clone();
    let scale = x.norm().max(1.0) * y.norm().max(1.0);
    for k in 0..h {
        let w = xk.tr_mul(&yk);
        let norm = w.norm();
        if norm <= 1e-12 * scale {
            break;
        }
        let w = w / norm;
        let t = &xk * &w;
        let tt = t.dot(&t);
        if tt <= 0.0 {
            break;
        }
        let p = xk.tr_mul(&t) / tt;
        let q = yk.dot(&t) / tt;
        xk -= &t * p.transpose();
        yk -= &t * q;
        weights.set_column(k, &w);
    }
    Ok(weights)
}
