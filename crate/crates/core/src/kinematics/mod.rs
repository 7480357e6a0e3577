//! Forward kinematics, geometric Jacobians and pose errors.

mod ik;

use nalgebra::{DMatrix, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::model::RobotModel;
use crate::pose::{axis_angle, Pose};

pub use ik::{dls_iteration, solve_ik_dls, IkParams, IkResult, IkStatus};
pub(crate) use ik::solve_ik_dls_link;

/// World pose of every link for joint vector `q` (root fixed at the origin).
pub fn link_poses(model: &RobotModel, q: &[f64]) -> Result<Vec<Pose>> {
    if q.len() != model.dof() {
        return Err(Error::DimensionMismatch {
            expected: model.dof(),
            got: q.len(),
        });
    }
    let mut poses = vec![Pose::identity(); model.links.len()];
    for (ji, joint) in model.joints.iter().enumerate() {
        let parent = poses[model.joint_parent_link(ji)];
        let mut local = joint.origin;
        if let Some(dof) = model.dof_of_joint(ji) {
            local = local.compose(&Pose::new(Vector3::zeros(), axis_angle(&joint.axis, q[dof])));
        }
        poses[model.joint_child_link(ji)] = parent.compose(&local);
    }
    Ok(poses)
}

pub fn forward_kinematics(model: &RobotModel, q: &[f64], link: &str) -> Result<Pose> {
    let id = model.link_id(link)?;
    Ok(link_poses(model, q)?[id])
}

/// 6xN geometric Jacobian, rows `[linear; angular]`. `dofs[k]` is the joint
/// vector index of column `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub matrix: DMatrix<f64>,
    pub dofs: Vec<usize>,
}

impl Jacobian {
    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Spread a chain-space vector into a full joint vector of length `dof`.
    pub fn scatter(&self, chain: &[f64], dof: usize) -> Vec<f64> {
        let mut out = vec![0.0; dof];
        for (k, &d) in self.dofs.iter().enumerate() {
            out[d] = chain[k];
        }
        out
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&d| full[d]).collect()
    }
}

pub fn geometric_jacobian(model: &RobotModel, q: &[f64], link: &str) -> Result<Jacobian> {
    let id = model.link_id(link)?;
    let poses = link_poses(model, q)?;
    Ok(point_jacobian(model, &poses, id, &poses[id].position))
}

/// Jacobian of a point rigidly attached to `link`, given precomputed link poses.
pub fn point_jacobian(model: &RobotModel, poses: &[Pose], link: usize, point: &Vector3<f64>) -> Jacobian {
    let chain: Vec<usize> = model
        .chain_to(link)
        .into_iter()
        .filter(|&j| model.dof_of_joint(j).is_some())
        .collect();
    let mut matrix = DMatrix::zeros(6, chain.len());
    let mut dofs = Vec::with_capacity(chain.len());
    for (col, &ji) in chain.iter().enumerate() {
        let frame = poses[model.joint_child_link(ji)];
        let z = frame.transform_vector(&model.joints[ji].axis);
        let lin = z.cross(&(point - frame.position));
        matrix.fixed_view_mut::<3, 1>(0, col).copy_from(&lin);
        matrix.fixed_view_mut::<3, 1>(3, col).copy_from(&z);
        dofs.push(model.dof_of_joint(ji).unwrap());
    }
    Jacobian { matrix, dofs }
}

/// `[target.p - current.p; axis*angle(target.R * current.R^T)]`.
pub fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let lin = target.position - current.position;
    let ang = if target.orientation == current.orientation {
        Vector3::zeros()
    } else {
        (target.orientation * current.orientation.inverse()).scaled_axis()
    };
    Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z)
}

/// Moore-Penrose pseudoinverse via SVD; singular values below
/// `rcond * sigma_max` are treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max();
    let cutoff = rcond * smax;
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}
