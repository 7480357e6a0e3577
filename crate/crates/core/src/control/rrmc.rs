use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kinematics::pseudo_inverse;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrmcMethod {
    Transpose,
    Inverse,
    PseudoInverse,
}

/// Joint velocities realising task velocity `xdot` through `jac`.
///
/// `Transpose` returns `J^T xdot` (a direction, not an exact solution),
/// `Inverse` needs a square full-rank `J`, `PseudoInverse` uses the SVD
/// pseudoinverse.
pub fn rrmc(jac: &DMatrix<f64>, xdot: &DVector<f64>, method: RrmcMethod) -> Result<DVector<f64>> {
    if jac.nrows() != xdot.len() {
        return Err(Error::DimensionMismatch {
            expected: jac.nrows(),
            got: xdot.len(),
        });
    }
    match method {
        RrmcMethod::Transpose => Ok(jac.transpose() * xdot),
        RrmcMethod::Inverse => {
            if !jac.is_square() {
                return Err(Error::NotSquare {
                    rows: jac.nrows(),
                    cols: jac.ncols(),
                });
            }
            let svd = jac.clone().svd(false, false);
            let smax = svd.singular_values.max();
            if svd.singular_values.min() <= 1e-10 * smax.max(f64::MIN_POSITIVE) {
                return Err(Error::RankDeficient);
            }
            jac.clone().lu().solve(xdot).ok_or(Error::RankDeficient)
        }
        RrmcMethod::PseudoInverse => Ok(pseudo_inverse(jac, 1e-8) * xdot),
    }
}
