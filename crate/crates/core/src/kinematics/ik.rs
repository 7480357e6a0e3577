//! Damped least-squares IK with a rest-posture bias in the Jacobian nullspace.
//!
//! Each iteration takes
//!
//! ```text
//! dq = J^T (J J^T + lambda^2 I)^-1 e  +  (I - J^+ J) k (q_rest - q)
//! ```
//!
//! clamps every component to `step_clamp`, then clamps `q` to the joint
//! limits. The nullspace objective (pull towards a rest posture) is a local
//! choice; any secondary objective could be projected the same way.
//!
//! A run that stops improving (typically pinned against joint limits) is
//! restarted from a seeded random configuration of the chain; the
//! iteration budget covers all restarts and the best iterate is returned.

use nalgebra::{DMatrix, DVector, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{link_poses, point_jacobian, pose_error, pseudo_inverse};
use crate::error::{Error, Result};
use crate::model::RobotModel;
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct IkParams {
    pub damping: f64,
    pub max_iterations: usize,
    pub tol_pos: f64,
    pub tol_rot: f64,
    pub step_clamp: f64,
    pub nullspace_gain: f64,
    /// Full joint vector; empty disables the nullspace term.
    pub rest_posture: Vec<f64>,
    /// Restart from a seeded random chain configuration after this many
    /// iterations without a 1% improvement; 0 disables restarts.
    pub restart_after: usize,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_iterations: 200,
            tol_pos: 1e-4,
            tol_rot: 1e-3,
            step_clamp: 0.1,
            nullspace_gain: 0.1,
            rest_posture: Vec::new(),
            restart_after: 30,
        }
    }
}

impl IkParams {
    pub fn with_rest(mut self, rest: Vec<f64>) -> Self {
        self.rest_posture = rest;
        self
    }

    fn validate(&self, dof: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.damping > 0.0) {
            return bad("damping must be positive");
        }
        if !(self.tol_pos > 0.0 && self.tol_rot > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.step_clamp > 0.0) {
            return bad("step_clamp must be positive");
        }
        if !self.rest_posture.is_empty() && self.rest_posture.len() != dof {
            return Err(Error::DimensionMismatch {
                expected: dof,
                got: self.rest_posture.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkStatus {
    Converged,
    MaxIterations,
    JointLimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub q: Vec<f64>,
    pub status: IkStatus,
    /// (position error m, rotation error rad) of the returned iterate.
    pub residual: (f64, f64),
    pub iterations: usize,
}

impl IkResult {
    pub fn within(&self, tol_pos: f64, tol_rot: f64) -> bool {
        self.residual.0 < tol_pos && self.residual.1 < tol_rot
    }
}

fn residual(e: &Vector6<f64>) -> (f64, f64) {
    (e.fixed_rows::<3>(0).norm(), e.fixed_rows::<3>(3).norm())
}

/// One DLS update from `q`; returns the new (clamped) joint vector.
pub fn dls_iteration(
    model: &RobotModel,
    q: &[f64],
    link: usize,
    target: &Pose,
    params: &IkParams,
) -> Result<Vec<f64>> {
    params.validate(model.dof())?;
    let poses = link_poses(model, q)?;
    let e = pose_error(&poses[link], target);
    Ok(step(model, q, &poses, link, &e, params))
}

fn step(model: &RobotModel, q: &[f64], poses: &[Pose], link: usize, e: &Vector6<f64>, params: &IkParams) -> Vec<f64> {
    let jac = point_jacobian(model, poses, link, &poses[link].position);
    let n = jac.ncols();
    let mut out = q.to_vec();
    if n == 0 {
        return out;
    }
    let j = &jac.matrix;
    let lambda2 = params.damping * params.damping;
    let a = j * j.transpose() + DMatrix::identity(6, 6) * lambda2;
    let ev = DVector::from_column_slice(e.as_slice());
    let y = a
        .cholesky()
        .map(|c| c.solve(&ev))
        .unwrap_or_else(|| DVector::zeros(6));
    let mut dq = j.transpose() * y;
    if !params.rest_posture.is_empty() && params.nullspace_gain != 0.0 {
        let jp = pseudo_inverse(j, 1e-8);
        let proj = DMatrix::identity(n, n) - &jp * j;
        let bias = DVector::from_iterator(
            n,
            jac.dofs
                .iter()
                .map(|&d| params.nullspace_gain * (params.rest_posture[d] - q[d])),
        );
        dq += proj * bias;
    }
    for (k, &d) in jac.dofs.iter().enumerate() {
        let delta = dq[k].clamp(-params.step_clamp, params.step_clamp);
        out[d] = model.actuated_joint(d).clamp(q[d] + delta);
    }
    out
}

pub fn solve_ik_dls(
    model: &RobotModel,
    q0: &[f64],
    link: &str,
    target: &Pose,
    params: &IkParams,
) -> Result<IkResult> {
    let link = model.link_id(link)?;
    solve_ik_dls_link(model, q0, link, target, params)
}

pub(crate) fn solve_ik_dls_link(
    model: &RobotModel,
    q0: &[f64],
    link: usize,
    target: &Pose,
    params: &IkParams,
) -> Result<IkResult> {
    params.validate(model.dof())?;
    if q0.len() != model.dof() {
        return Err(Error::DimensionMismatch {
            expected: model.dof(),
            got: q0.len(),
        });
    }
    for (d, j) in model.actuated_joints().enumerate() {
        if q0[d] < j.limit_lo || q0[d] > j.limit_hi {
            return Err(Error::InvalidParams(format!("q0 for joint `{}` is outside its limits", j.name)));
        }
    }
    let score = |r: (f64, f64)| r.0 + r.1;
    let mut q = q0.to_vec();
    let mut best: Option<(Vec<f64>, (f64, f64), usize)> = None;
    let chain = model.chain_dofs(link);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut run_best = (f64::INFINITY, 0);
    for it in 0..=params.max_iterations {
        let poses = link_poses(model, &q)?;
        let e = pose_error(&poses[link], target);
        let r = residual(&e);
        if best.as_ref().is_none_or(|b| score(r) < score(b.1)) {
            best = Some((q.clone(), r, it));
        }
        if score(r) < 0.99 * run_best.0 {
            run_best = (score(r), it);
        }
        if r.0 < params.tol_pos && r.1 < params.tol_rot {
            return Ok(IkResult {
                q,
                status: IkStatus::Converged,
                residual: r,
                iterations: it,
            });
        }
        if it == params.max_iterations {
            break;
        }
        if params.restart_after > 0 && it - run_best.1 >= params.restart_after {
            for &d in &chain {
                let j = model.actuated_joint(d);
                q[d] = rng.gen_range(j.limit_lo..=j.limit_hi);
            }
            run_best = (f64::INFINITY, it);
            continue;
        }
        q = step(model, &q, &poses, link, &e, params);
    }
    let (q, r, it) = best.expect("at least one iterate");
    let limited = chain.iter().any(|&d| {
        let j = model.actuated_joint(d);
        q[d] <= j.limit_lo || q[d] >= j.limit_hi
    });
    Ok(IkResult {
        q,
        status: if limited {
            IkStatus::JointLimited
        } else {
            IkStatus::MaxIterations
        },
        residual: r,
        iterations: it,
    })
}
