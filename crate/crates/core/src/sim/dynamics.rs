//! O(n) articulated-body forward dynamics over a floating-base kinematic
//! tree, in Featherstone spatial algebra with [angular; linear] ordering.

use nalgebra::{Matrix3, Matrix6, UnitQuaternion, Vector3, Vector6};

use crate::sim::model::RobotModel;
use crate::sim::state::FloatingBaseState;
use crate::sim::SimError;

#[inline]
fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[inline]
fn ang(v: &Vector6<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

#[inline]
fn lin(v: &Vector6<f64>) -> Vector3<f64> {
    Vector3::new(v[3], v[4], v[5])
}

#[inline]
fn spatial(a: Vector3<f64>, l: Vector3<f64>) -> Vector6<f64> {
    Vector6::new(a.x, a.y, a.z, l.x, l.y, l.z)
}

/// Motion-vector cross product: v x m.
#[inline]
fn cross_motion(v: &Vector6<f64>, m: &Vector6<f64>) -> Vector6<f64> {
    let w = ang(v);
    let vl = lin(v);
    let ma = ang(m);
    let ml = lin(m);
    spatial(w.cross(&ma), w.cross(&ml) + vl.cross(&ma))
}

/// Force-vector cross product: v x* f.
#[inline]
fn cross_force(v: &Vector6<f64>, f: &Vector6<f64>) -> Vector6<f64> {
    let w = ang(v);
    let vl = lin(v);
    let fa = ang(f);
    let fl = lin(f);
    spatial(w.cross(&fa) + vl.cross(&fl), w.cross(&fl))
}

/// Coordinate transform from frame A to frame B, where B sits at `p`
/// (A coordinates) with orientation map `e` (A coords -> B coords).
#[derive(Debug, Clone)]
struct SpatialTransform {
    e: Matrix3<f64>,
    p: Vector3<f64>,
}

impl SpatialTransform {
    fn apply_motion(&self, v: &Vector6<f64>) -> Vector6<f64> {
        let a = ang(v);
        let l = lin(v);
        spatial(self.e * a, self.e * (l - self.p.cross(&a)))
    }

    /// Dense 6x6 motion transform; its transpose maps forces and
    /// articulated inertias from B back to A.
    fn motion_matrix(&self) -> Matrix6<f64> {
        let mut x = Matrix6::zeros();
        let epx = -self.e * skew(&self.p);
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.e);
        x.fixed_view_mut::<3, 3>(3, 0).copy_from(&epx);
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.e);
        x
    }
}

/// Spatial inertia about the link frame origin.
fn spatial_inertia(mass: f64, com: &Vector3<f64>, inertia_com: &Matrix3<f64>) -> Matrix6<f64> {
    let c = skew(com);
    let mut i = Matrix6::zeros();
    let top = inertia_com + mass * c * c.transpose();
    i.fixed_view_mut::<3, 3>(0, 0).copy_from(&top);
    i.fixed_view_mut::<3, 3>(0, 3).copy_from(&(mass * c));
    i.fixed_view_mut::<3, 3>(3, 0).copy_from(&(mass * c.transpose()));
    i.fixed_view_mut::<3, 3>(3, 3).copy_from(&(mass * Matrix3::identity()));
    i
}

/// External spatial force on one link, expressed in the link frame about
/// the link origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinkForce {
    /// Torque (link frame).
    pub torque: Vector3<f64>,
    /// Force (link frame).
    pub force: Vector3<f64>,
}

impl LinkForce {
    /// World-frame force applied at a point given in link coordinates.
    pub fn from_world_force_at_point(
        rot_world: &Matrix3<f64>,
        point_link: &Vector3<f64>,
        force_world: &Vector3<f64>,
    ) -> Self {
        let f_link = rot_world.transpose() * force_world;
        LinkForce { torque: point_link.cross(&f_link), force: f_link }
    }

    pub fn accumulate(&mut self, other: &LinkForce) {
        self.torque += other.torque;
        self.force += other.force;
    }
}

/// Root spatial acceleration (body frame) plus joint accelerations.
#[derive(Debug, Clone)]
pub struct ForwardDynamicsResult {
    /// d(omega_body)/dt in body coordinates.
    pub root_angular_accel: Vector3<f64>,
    /// Spatial linear acceleration in body coordinates; the classical
    /// world acceleration of the root point is
    /// `R * (root_linear_accel + omega x v_body)`.
    pub root_linear_accel: Vector3<f64>,
    pub qddot: Vec<f64>,
}

/// Articulated-body forward dynamics. Gravity enters through
/// `external_forces` (use [`gravity_forces`]); `external_forces[i]` acts on
/// link i in link coordinates.
pub fn articulated_forward_dynamics(
    model: &RobotModel,
    state: &FloatingBaseState,
    joint_torques: &[f64],
    external_forces: &[LinkForce],
) -> Result<ForwardDynamicsResult, SimError> {
    let n = model.n_links();
    assert_eq!(joint_torques.len(), model.n_dof());
    assert_eq!(external_forces.len(), n);
    if !joint_torques.iter().all(|t| t.is_finite()) {
        return Err(SimError::NonFinite("joint torques".into()));
    }

    // Pass 1: velocities, bias terms, per-link inertia and bias force.
    let mut xf: Vec<SpatialTransform> = Vec::with_capacity(n);
    xf.push(SpatialTransform { e: Matrix3::identity(), p: Vector3::zeros() });
    let mut v: Vec<Vector6<f64>> = vec![Vector6::zeros(); n];
    let mut c: Vec<Vector6<f64>> = vec![Vector6::zeros(); n];
    let mut axes: Vec<Vector3<f64>> = vec![Vector3::zeros(); n];
    let rot_root = state.root_orientation.to_rotation_matrix().into_inner();
    v[0] = spatial(
        state.root_angular_velocity,
        rot_root.transpose() * state.root_linear_velocity,
    );
    if model.fixed_base {
        v[0] = Vector6::zeros();
    }

    let mut ia: Vec<Matrix6<f64>> = Vec::with_capacity(n);
    let mut pa: Vec<Vector6<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let link = &model.links[i];
        if i > 0 {
            let parent = link.parent.unwrap();
            let joint = &model.joints[i - 1];
            let rot_joint = UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_normalize(joint.axis),
                state.q[i - 1],
            )
            .to_rotation_matrix()
            .into_inner();
            let x = SpatialTransform { e: rot_joint.transpose(), p: link.attach };
            let s = spatial(joint.axis, Vector3::zeros());
            let vj = s * state.qdot[i - 1];
            v[i] = x.apply_motion(&v[parent]) + vj;
            c[i] = cross_motion(&v[i], &vj);
            axes[i] = joint.axis;
            xf.push(x);
        }
        let inertia = spatial_inertia(link.mass, &link.com, &link.inertia);
        ia.push(inertia);
        let f_ext = spatial(external_forces[i].torque, external_forces[i].force);
        pa.push(cross_force(&v[i], &(inertia * v[i])) - f_ext);
    }

    // Pass 2: articulated inertias toward the root.
    let mut u_vec: Vec<Vector6<f64>> = vec![Vector6::zeros(); n];
    let mut d: Vec<f64> = vec![0.0; n];
    let mut u_scal: Vec<f64> = vec![0.0; n];
    for i in (1..n).rev() {
        let parent = model.links[i].parent.unwrap();
        let s = spatial(axes[i], Vector3::zeros());
        let u = ia[i] * s;
        let di = s.dot(&u);
        if di.abs() < 1e-12 {
            return Err(SimError::SingularInertia(i));
        }
        let ui = joint_torques[i - 1] - s.dot(&pa[i]);
        u_vec[i] = u;
        d[i] = di;
        u_scal[i] = ui;
        let ia_art = ia[i] - (u * u.transpose()) / di;
        let pa_art = pa[i] + ia_art * c[i] + u * (ui / di);
        let xm = xf[i].motion_matrix();
        ia[parent] += xm.transpose() * ia_art * xm;
        pa[parent] += xm.transpose() * pa_art;
    }

    // Base acceleration, then accelerations outward.
    let mut a: Vec<Vector6<f64>> = vec![Vector6::zeros(); n];
    if model.fixed_base {
        a[0] = Vector6::zeros();
    } else {
        let chol = ia[0]
            .cholesky()
            .ok_or(SimError::SingularInertia(0))?;
        a[0] = -chol.solve(&pa[0]);
    }

    let mut qddot = vec![0.0; model.n_dof()];
    for i in 1..n {
        let parent = model.links[i].parent.unwrap();
        let s = spatial(axes[i], Vector3::zeros());
        let a_prop = xf[i].apply_motion(&a[parent]) + c[i];
        let qdd = (u_scal[i] - u_vec[i].dot(&a_prop)) / d[i];
        qddot[i - 1] = qdd;
        a[i] = a_prop + s * qdd;
    }

    Ok(ForwardDynamicsResult {
        root_angular_accel: ang(&a[0]),
        root_linear_accel: lin(&a[0]),
        qddot,
    })
}

/// Gravity as per-link external forces (world force at each COM).
pub fn gravity_forces(
    model: &RobotModel,
    poses: &crate::sim::fk::BodyPoses,
    gravity: f64,
) -> Vec<LinkForce> {
    model
        .links
        .iter()
        .enumerate()
        .map(|(i, link)| {
            let f_world = Vector3::new(0.0, 0.0, -gravity * link.mass);
            LinkForce::from_world_force_at_point(&poses.links[i].rot, &link.com, &f_world)
        })
        .collect()
}
