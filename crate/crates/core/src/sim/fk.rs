//! Forward kinematics: world poses and twists per link, feet heights,
//! keypoint positions.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::sim::model::RobotModel;
use crate::sim::state::FloatingBaseState;

#[derive(Debug, Clone)]
pub struct LinkPose {
    /// Link frame origin, world.
    pub origin: Vector3<f64>,
    /// Link frame orientation, world.
    pub rot: Matrix3<f64>,
    /// COM position, world.
    pub com: Vector3<f64>,
    /// Angular velocity, world.
    pub omega: Vector3<f64>,
    /// Velocity of the link frame origin, world.
    pub vel: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct BodyPoses {
    pub links: Vec<LinkPose>,
    /// Per foot: min z over that foot's contact points.
    pub feet_heights: Vec<f64>,
    /// World positions in keypoint declaration order.
    pub keypoints: Vec<Vector3<f64>>,
}

impl BodyPoses {
    pub fn point_on_link(&self, link: usize, offset: &Vector3<f64>) -> Vector3<f64> {
        let lp = &self.links[link];
        lp.origin + lp.rot * offset
    }

    /// World velocity of a point fixed to a link.
    pub fn point_velocity(&self, link: usize, offset: &Vector3<f64>) -> Vector3<f64> {
        let lp = &self.links[link];
        let world_arm = lp.rot * offset;
        lp.vel + lp.omega.cross(&world_arm)
    }
}

pub fn forward_kinematics(model: &RobotModel, state: &FloatingBaseState) -> BodyPoses {
    let n = model.n_links();
    let mut links: Vec<LinkPose> = Vec::with_capacity(n);
    let root_rot = state.root_orientation.to_rotation_matrix().into_inner();
    links.push(LinkPose {
        origin: state.root_position,
        rot: root_rot,
        com: state.root_position + root_rot * model.links[0].com,
        omega: root_rot * state.root_angular_velocity,
        vel: state.root_linear_velocity,
    });
    for i in 1..n {
        let link = &model.links[i];
        let parent = link.parent.expect("non-root link must have a parent");
        let joint = &model.joints[i - 1];
        let p = links[parent].clone();
        let origin = p.origin + p.rot * link.attach;
        let joint_rot =
            UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(joint.axis), state.q[i - 1])
                .to_rotation_matrix()
                .into_inner();
        let rot = p.rot * joint_rot;
        let axis_world = p.rot * joint.axis;
        let omega = p.omega + axis_world * state.qdot[i - 1];
        let vel = p.vel + p.omega.cross(&(origin - p.origin));
        links.push(LinkPose { origin, rot, com: origin + rot * link.com, omega, vel });
    }

    let feet_heights = model
        .feet
        .iter()
        .map(|foot| {
            foot.points
                .iter()
                .map(|pt| {
                    let lp = &links[foot.link];
                    (lp.origin + lp.rot * pt).z
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let keypoints = model
        .keypoints
        .iter()
        .map(|kp| {
            let lp = &links[kp.link];
            lp.origin + lp.rot * kp.offset
        })
        .collect();

    BodyPoses { links, feet_heights, keypoints }
}

/// Root height that places the lowest contact point of the default pose
/// exactly on the ground.
pub fn standing_root_height(model: &RobotModel) -> f64 {
    let mut state = FloatingBaseState::standing(model, 0.0);
    state.root_position.z = 0.0;
    let poses = forward_kinematics(model, &state);
    let min_z = poses.feet_heights.iter().cloned().fold(f64::INFINITY, f64::min);
    -min_z
}

/// World gravity direction (0,0,-1) expressed in the body frame.
pub fn projected_gravity(root_orientation: &UnitQuaternion<f64>) -> Vector3<f64> {
    root_orientation.inverse_transform_vector(&Vector3::new(0.0, 0.0, -1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::model::build_default_humanoid;
    use approx::assert_relative_eq;

    #[test]
    fn feet_on_ground_at_standing_height() {
        let model = build_default_humanoid();
        let h = standing_root_height(&model);
        let state = FloatingBaseState::standing(&model, h);
        let poses = forward_kinematics(&model, &state);
        for &fh in &poses.feet_heights {
            assert!(fh.abs() < 1e-9, "foot height {fh}");
        }
    }

    #[test]
    fn raising_root_raises_every_keypoint_exactly() {
        let model = build_default_humanoid();
        let h = standing_root_height(&model);
        let s1 = FloatingBaseState::standing(&model, h);
        let mut s2 = s1.clone();
        s2.root_position.z += 0.1;
        let p1 = forward_kinematics(&model, &s1);
        let p2 = forward_kinematics(&model, &s2);
        for (a, b) in p1.keypoints.iter().zip(p2.keypoints.iter()) {
            assert_relative_eq!(b.z - a.z, 0.1, epsilon = 1e-12);
            assert_relative_eq!(b.x, a.x, epsilon = 1e-12);
            assert_relative_eq!(b.y, a.y, epsilon = 1e-12);
        }
    }

    #[test]
    fn keypoints_mirror_across_sagittal_plane() {
        let model = build_default_humanoid();
        // Mirror-symmetric pose: defaults are symmetric by construction.
        let state = FloatingBaseState::standing(&model, 1.0);
        let poses = forward_kinematics(&model, &state);
        let find = |name: &str| {
            model
                .keypoints
                .iter()
                .position(|k| k.name == name)
                .map(|i| poses.keypoints[i])
                .unwrap()
        };
        for pair in ["hip", "knee", "ankle", "shoulder", "elbow", "wrist"] {
            let l = find(&format!("left_{pair}"));
            let r = find(&format!("right_{pair}"));
            assert_relative_eq!(l.x, r.x, epsilon = 1e-12);
            assert_relative_eq!(l.y, -r.y, epsilon = 1e-12);
            assert_relative_eq!(l.z, r.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn projected_gravity_cases() {
        let id = UnitQuaternion::identity();
        let g = projected_gravity(&id);
        assert_relative_eq!(g, Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-12);

        // 90 degree pitch (aerospace sign: nose-down is negative about +y);
        // gravity lands on the -x body axis.
        let pitch =
            UnitQuaternion::from_axis_angle(&Vector3::y_axis(), -std::f64::consts::FRAC_PI_2);
        let g = projected_gravity(&pitch);
        assert_relative_eq!(g, Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-9);

        let q = UnitQuaternion::from_euler_angles(0.3, -0.7, 1.2);
        assert_relative_eq!(projected_gravity(&q).norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn default_humanoid_mass_and_dof() {
        let model = build_default_humanoid();
        assert_eq!(model.n_dof(), 19);
        let m = model.total_mass();
        assert!((45.0..=55.0).contains(&m), "total mass {m}");
        assert_eq!(model.lower_indices().len(), 10);
        assert_eq!(model.upper_indices().len(), 9);
        for j in &model.joints {
            assert!(j.default_angle >= j.position_limits[0]);
            assert!(j.default_angle <= j.position_limits[1]);
        }
    }
}
