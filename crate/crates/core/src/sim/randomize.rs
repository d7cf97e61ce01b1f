//! Per-episode domain randomization draws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::contact::{Terrain, TerrainKind};
use crate::sim::model::RobotModel;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi);
        Range { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Range { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..self.hi)
        }
    }
}

/// Sampling ranges for every randomized quantity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomizationRanges {
    pub friction: Range,
    pub base_com_offset: Range,
    pub link_mass_scale: Range,
    pub p_gain_scale: Range,
    pub d_gain_scale: Range,
    pub control_delay: Range,
    pub push_interval: f64,
    pub push_velocity: f64,
    pub rough_terrain_prob: f64,
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        RandomizationRanges {
            friction: Range::new(0.2, 1.1),
            base_com_offset: Range::new(-0.1, 0.0),
            link_mass_scale: Range::new(0.7, 1.3),
            p_gain_scale: Range::new(0.75, 1.25),
            d_gain_scale: Range::new(0.75, 1.25),
            control_delay: Range::new(0.020, 0.060),
            push_interval: 5.0,
            push_velocity: 1.0,
            rough_terrain_prob: 0.5,
        }
    }
}

impl RandomizationRanges {
    /// All ranges collapsed to their nominal values; no pushes, flat ground.
    pub fn disabled() -> Self {
        RandomizationRanges {
            friction: Range::point(0.8),
            base_com_offset: Range::point(0.0),
            link_mass_scale: Range::point(1.0),
            p_gain_scale: Range::point(1.0),
            d_gain_scale: Range::point(1.0),
            control_delay: Range::point(0.0),
            push_interval: f64::INFINITY,
            push_velocity: 0.0,
            rough_terrain_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomizationSample {
    pub friction: f64,
    /// Forward shift of the base COM, m.
    pub base_com_offset: f64,
    pub link_mass_scales: Vec<f64>,
    pub p_gain_scale: f64,
    pub d_gain_scale: f64,
    /// Seconds of action delay.
    pub control_delay: f64,
    pub push_interval: f64,
    pub push_velocity: f64,
    pub terrain: Terrain,
}

impl RandomizationSample {
    pub fn nominal(model: &RobotModel) -> Self {
        RandomizationSample {
            friction: 0.8,
            base_com_offset: 0.0,
            link_mass_scales: vec![1.0; model.n_links()],
            p_gain_scale: 1.0,
            d_gain_scale: 1.0,
            control_delay: 0.0,
            push_interval: f64::INFINITY,
            push_velocity: 0.0,
            terrain: Terrain::flat(),
        }
    }
}

pub fn sample_randomization(
    rng: &mut impl Rng,
    ranges: &RandomizationRanges,
    model: &RobotModel,
) -> RandomizationSample {
    let friction = ranges.friction.sample(rng);
    let base_com_offset = ranges.base_com_offset.sample(rng);
    let link_mass_scales =
        (0..model.n_links()).map(|_| ranges.link_mass_scale.sample(rng)).collect();
    let p_gain_scale = ranges.p_gain_scale.sample(rng);
    let d_gain_scale = ranges.d_gain_scale.sample(rng);
    let control_delay = ranges.control_delay.sample(rng);
    let rough: bool = rng.gen_range(0.0..1.0) < ranges.rough_terrain_prob;
    let terrain = if rough { Terrain::rough(rng.gen()) } else { Terrain::flat() };
    RandomizationSample {
        friction,
        base_com_offset,
        link_mass_scales,
        p_gain_scale,
        d_gain_scale,
        control_delay,
        push_interval: ranges.push_interval,
        push_velocity: ranges.push_velocity,
        terrain,
    }
}

/// Bake a randomization draw into a model copy: scaled masses and inertias,
/// shifted base COM.
pub fn apply_randomization(model: &RobotModel, sample: &RandomizationSample) -> RobotModel {
    let mut m = model.clone();
    for (i, link) in m.links.iter_mut().enumerate() {
        let s = sample.link_mass_scales.get(i).copied().unwrap_or(1.0);
        link.mass *= s;
        link.inertia *= s;
    }
    m.links[0].com.x += sample.base_com_offset;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::model::build_default_humanoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_respect_ranges() {
        let model = build_default_humanoid();
        let ranges = RandomizationRanges::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mass_scale_sum = 0.0;
        let mut count = 0usize;
        for _ in 0..10_000 {
            let s = sample_randomization(&mut rng, &ranges, &model);
            assert!((0.2..=1.1).contains(&s.friction));
            assert!((-0.1..=0.0).contains(&s.base_com_offset));
            assert!((0.020..=0.060).contains(&s.control_delay));
            for &ms in &s.link_mass_scales {
                assert!((0.7..=1.3).contains(&ms));
                mass_scale_sum += ms;
                count += 1;
            }
            assert!((0.75..=1.25).contains(&s.p_gain_scale));
            assert!((0.75..=1.25).contains(&s.d_gain_scale));
            assert_eq!(s.push_interval, 5.0);
            assert_eq!(s.push_velocity, 1.0);
        }
        let mean = mass_scale_sum / count as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean link mass scale {mean}");
    }

    #[test]
    fn collapsed_ranges_give_point_values() {
        let model = build_default_humanoid();
        let mut ranges = RandomizationRanges::default();
        ranges.friction = Range::point(0.55);
        ranges.base_com_offset = Range::point(-0.05);
        ranges.link_mass_scale = Range::point(1.1);
        ranges.p_gain_scale = Range::point(0.9);
        ranges.d_gain_scale = Range::point(1.2);
        ranges.control_delay = Range::point(0.04);
        ranges.rough_terrain_prob = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sample_randomization(&mut rng, &ranges, &model);
        assert_eq!(s.friction, 0.55);
        assert_eq!(s.base_com_offset, -0.05);
        assert!(s.link_mass_scales.iter().all(|&x| x == 1.1));
        assert_eq!(s.p_gain_scale, 0.9);
        assert_eq!(s.d_gain_scale, 1.2);
        assert_eq!(s.control_delay, 0.04);
        assert_eq!(s.terrain.kind, TerrainKind::Flat);
    }
}
