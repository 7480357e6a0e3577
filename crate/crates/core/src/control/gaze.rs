use nalgebra::Vector3;

use crate::error::{Error, Result};

/// `atan2(|x × y|, x · y)`, in `[0, π]`.
pub fn gaze_angle(x: &Vector3<f64>, y: &Vector3<f64>) -> Result<f64> {
    if x.norm() == 0.0 || y.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(x.cross(y).norm().atan2(x.dot(y)))
}

/// Signed per-axis corrections rotating `x` towards `y`.
///
/// For each unit axis `a`, both vectors are projected onto the plane normal
/// to `a`; the correction is the angle between the projections signed by
/// `(x × y) · a`. Axes along which either projection vanishes get 0.
pub fn gaze_plane_decomposition(x: &Vector3<f64>, y: &Vector3<f64>, axes: &[Vector3<f64>]) -> Result<Vec<f64>> {
    if x.norm() == 0.0 || y.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let n = x.cross(y);
    let scale = x.norm() * y.norm();
    Ok(axes
        .iter()
        .map(|a| {
            let xp = x - a * a.dot(x);
            let yp = y - a * a.dot(y);
            let s = n.dot(a);
            if xp.norm() < 1e-12 * x.norm() || yp.norm() < 1e-12 * y.norm() || s.abs() <= 1e-15 * scale {
                return 0.0;
            }
            s.signum() * gaze_angle(&xp, &yp).unwrap_or(0.0)
        })
        .collect())
}
