use nalgebra::{Matrix3, Vector3};
use wbc_core::sim::fk::forward_kinematics;
use wbc_core::sim::model::{build_default_humanoid, Foot, LinkSpec, PDGains, RobotModel};
use wbc_core::sim::randomize::RandomizationSample;
use wbc_core::sim::state::FloatingBaseState;
use wbc_core::sim::step::{SimConfig, Simulator};

fn main() {
    let statue = std::env::args().any(|a| a == "statue");
    if statue {
        run_statue();
    } else {
        run_humanoid();
    }
}

/// Rigid body with the humanoid's mass and CoM on the same 4 ground points.
fn run_statue() {
    let humanoid = build_default_humanoid();
    let h = wbc_core::sim::fk::standing_root_height(&humanoid);
    let state = FloatingBaseState::standing(&humanoid, h);
    let poses = forward_kinematics(&humanoid, &state);
    let mut com = Vector3::zeros();
    for (i, link) in humanoid.links.iter().enumerate() {
        com += link.mass * poses.links[i].com;
    }
    com /= humanoid.total_mass();
    println!("humanoid com (world): {:.4} {:.4} {:.4}", com.x, com.y, com.z);

    let mut feet = Vec::new();
    for f in &humanoid.feet {
        let pts: Vec<Vector3<f64>> = f
            .points
            .iter()
            .map(|p| poses.point_on_link(f.link, p) - state.root_position)
            .collect();
        println!("statue foot points (root frame): {pts:?}");
        feet.push(Foot { link: 0, points: pts });
    }
    let model = RobotModel {
        links: vec![LinkSpec {
            name: "statue".into(),
            parent: None,
            attach: Vector3::zeros(),
            mass: humanoid.total_mass(),
            com: com - state.root_position,
            inertia: Matrix3::from_diagonal(&Vector3::new(8.0, 8.0, 2.0)),
        }],
        joints: vec![],
        feet,
        keypoints: vec![],
        gains: PDGains { kp: vec![], kd: vec![] },
        fixed_base: false,
    };
    let config = SimConfig::default();
    let sample = RandomizationSample::nominal(&model);
    let mut sim = Simulator::new(model.clone(), config, sample, 5);
    sim.state.root_position.z = h;
    for step in 0..150 {
        sim.step(&[]).unwrap();
        if step % 10 == 0 {
            let (roll, pitch) = sim.state.roll_pitch();
            let fz: f64 = sim.state.feet_contact_forces.iter().map(|f| f.z).sum();
            let fx: f64 = sim.state.feet_contact_forces.iter().map(|f| f.x).sum();
            println!(
                "t={:.2} h={:.4} pitch={:.4} roll={:.4} x={:.4} Fz={:.0} Fx={:.2}",
                sim.state.sim_time,
                sim.state.root_position.z,
                pitch,
                roll,
                sim.state.root_position.x,
                fz,
                fx
            );
        }
    }
}

fn run_humanoid() {
    let mut model = build_default_humanoid();
    if std::env::args().any(|a| a == "stiff") {
        for k in model.gains.kp.iter_mut() {
            *k = 2000.0;
        }
        for d in model.gains.kd.iter_mut() {
            *d = 20.0;
        }
        for j in model.joints.iter_mut() {
            j.torque_limit = 1e6;
        }
    }
    let config = SimConfig::default();
    let sample = RandomizationSample::nominal(&model);
    let mut sim = Simulator::new(model.clone(), config, sample, 5);
    let target = model.default_pose();
    println!("nominal height {} mass {}", sim.nominal_root_height, model.total_mass());
    for step in 0..100 {
        let info = sim.step(&target).unwrap();
        if step % 10 == 0 {
            let poses = forward_kinematics(&model, &sim.state);
            let mut com = Vector3::zeros();
            for (i, link) in model.links.iter().enumerate() {
                com += link.mass * poses.links[i].com;
            }
            com /= model.total_mass();
            let (roll, pitch) = sim.state.roll_pitch();
            let fz: f64 = sim.state.feet_contact_forces.iter().map(|f| f.z).sum();
            let fx: f64 = sim.state.feet_contact_forces.iter().map(|f| f.x).sum();
            println!(
                "t={:.2} h={:.3} pitch={:.3} com_x={:.4} Fz={:.0} Fx={:.2} tau_ankle={:.1} tau_knee={:.1} tau_hip={:.1}",
                sim.state.sim_time,
                sim.state.root_position.z,
                pitch,
                com.x,
                fz,
                fx,
                info.torques[4],
                info.torques[3],
                info.torques[2],
            );
        }
    }
}
