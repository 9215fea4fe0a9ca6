//! Network samples from a random-walk MANET.
//!
//! Nodes start uniformly on a rectangle and take one fixed-length step in a
//! uniformly random direction per timeframe, reflecting off the walls. Each
//! timeframe yields a disc graph: two nodes are linked iff their distance is
//! within the coverage radius.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maxflow::edge_disjoint_paths;
use crate::netmodel::{Network, NodeId};

/// Endpoint draws per sample before it is skipped.
pub const ENDPOINT_ATTEMPTS: usize = 64;

/// Mean node degree targeted by [`ManetConfig::with_defaults`].
pub const TARGET_MEAN_DEGREE: f64 = 8.0;

#[derive(Debug, Error, PartialEq)]
pub enum ManetError {
    #[error("node_count must be at least 2, got {0}")]
    TooFewNodes(usize),
    #[error("timeframes must be at least 1")]
    NoTimeframes,
    #[error("coverage_radius must be non-negative and finite, got {0}")]
    BadRadius(f64),
    #[error("step_length must be non-negative and finite, got {0}")]
    BadStep(f64),
    #[error("area must be positive and finite, got {0} x {1}")]
    BadArea(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManetConfig {
    pub node_count: usize,
    pub area: (f64, f64),
    pub coverage_radius: f64,
    pub step_length: f64,
    pub timeframes: usize,
    pub master_seed: u64,
    pub min_disjoint_paths: usize,
}

impl ManetConfig {
    /// Unit square, radius giving an expected mean degree of about 8, and a
    /// step of a quarter radius per timeframe.
    pub fn with_defaults(node_count: usize, timeframes: usize, master_seed: u64) -> Self {
        let radius = default_radius(node_count, (1.0, 1.0));
        Self {
            node_count,
            area: (1.0, 1.0),
            coverage_radius: radius,
            step_length: radius / 4.0,
            timeframes,
            master_seed,
            min_disjoint_paths: 2,
        }
    }

    pub fn validate(&self) -> Result<(), ManetError> {
        if self.node_count < 2 {
            return Err(ManetError::TooFewNodes(self.node_count));
        }
        if self.timeframes == 0 {
            return Err(ManetError::NoTimeframes);
        }
        let (w, h) = self.area;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(ManetError::BadArea(w, h));
        }
        // A zero radius is accepted and yields link-free samples.
        if !(self.coverage_radius.is_finite() && self.coverage_radius >= 0.0) {
            return Err(ManetError::BadRadius(self.coverage_radius));
        }
        if !(self.step_length.is_finite() && self.step_length >= 0.0) {
            return Err(ManetError::BadStep(self.step_length));
        }
        Ok(())
    }
}

/// Probability that two uniform points in a `w × h` rectangle lie within
/// distance `r`, for `r ≤ min(w, h)`.
pub fn pair_within_prob(r: f64, (w, h): (f64, f64)) -> f64 {
    let r2 = r * r;
    (std::f64::consts::PI * r2 * w * h - 4.0 / 3.0 * r2 * r * (w + h) + 0.5 * r2 * r2)
        / (w * w * h * h)
}

/// Radius giving an expected degree of `TARGET_MEAN_DEGREE`, boundary
/// effects included. Small networks that cannot reach the target get the
/// shorter side length.
pub fn default_radius(node_count: usize, area: (f64, f64)) -> f64 {
    let want = TARGET_MEAN_DEGREE / node_count.saturating_sub(1).max(1) as f64;
    let max_r = area.0.min(area.1);
    if pair_within_prob(max_r, area) <= want {
        return max_r;
    }
    let (mut lo, mut hi) = (0.0, max_r);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if pair_within_prob(mid, area) < want {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub timeframe: usize,
    /// The disc graph with the accepted endpoints, or the last drawn pair
    /// when skipped.
    pub network: Network,
    pub accepted: bool,
    pub attempts: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the endpoint stream of one timeframe.
pub fn sample_seed(master_seed: u64, timeframe: usize) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(timeframe as u64 ^ 0x05ee_d0ff_4a3e))
}

fn walk_seed(master_seed: u64) -> u64 {
    splitmix64(master_seed ^ 0x0057_a1c0_ffee)
}

/// Folds a coordinate back into `[0, extent]` as if reflected by walls.
fn reflect(x: f64, extent: f64) -> f64 {
    let period = 2.0 * extent;
    let y = x.rem_euclid(period);
    if y > extent {
        period - y
    } else {
        y
    }
}

/// Node positions for timeframes `0..timeframes`; frame 0 is the initial
/// placement.
pub fn random_walk(cfg: &ManetConfig) -> Vec<Vec<(f64, f64)>> {
    let (w, h) = cfg.area;
    let mut rng = ChaCha8Rng::seed_from_u64(walk_seed(cfg.master_seed));
    let mut pos: Vec<(f64, f64)> = (0..cfg.node_count)
        .map(|_| (rng.random::<f64>() * w, rng.random::<f64>() * h))
        .collect();
    let mut frames = Vec::with_capacity(cfg.timeframes);
    frames.push(pos.clone());
    for _ in 1..cfg.timeframes {
        for p in &mut pos {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            p.0 = reflect(p.0 + cfg.step_length * theta.cos(), w);
            p.1 = reflect(p.1 + cfg.step_length * theta.sin(), h);
        }
        frames.push(pos.clone());
    }
    frames
}

/// Links between every pair within `radius`, in lexicographic order.
pub fn disc_links(positions: &[(f64, f64)], radius: f64) -> Vec<(NodeId, NodeId)> {
    let r2 = radius * radius;
    let mut links = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            if dx * dx + dy * dy <= r2 {
                links.push((i, j));
            }
        }
    }
    links
}

/// Draws distinct end nodes until their edge-disjoint path count reaches
/// `min_disjoint_paths`. Returns the last pair drawn, whether it was
/// accepted, and the number of draws.
pub fn select_endpoints<R: Rng>(
    node_count: usize,
    links: &[(NodeId, NodeId)],
    min_disjoint_paths: usize,
    rng: &mut R,
) -> ((NodeId, NodeId), bool, usize) {
    let mut pair = (0, 1);
    for attempt in 1..=ENDPOINT_ATTEMPTS {
        let s = rng.random_range(0..node_count);
        let mut t = rng.random_range(0..node_count - 1);
        if t >= s {
            t += 1;
        }
        pair = (s, t);
        if edge_disjoint_paths(node_count, links, s, t) >= min_disjoint_paths {
            return (pair, true, attempt);
        }
    }
    (pair, false, ENDPOINT_ATTEMPTS)
}

/// One sample per timeframe. The walk runs sequentially; link building and
/// endpoint selection fan out per frame with per-frame seeds, so the output
/// does not depend on the thread count.
pub fn generate_samples(cfg: &ManetConfig) -> Result<Vec<Sample>, ManetError> {
    cfg.validate()?;
    let frames = random_walk(cfg);
    let samples = frames
        .into_par_iter()
        .enumerate()
        .map(|(timeframe, positions)| {
            let links = disc_links(&positions, cfg.coverage_radius);
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.master_seed, timeframe));
            let ((s, t), accepted, attempts) =
                select_endpoints(cfg.node_count, &links, cfg.min_disjoint_paths, &mut rng);
            let network = Network::with_positions(cfg.node_count, links, s, t, Some(positions))
                .expect("generated network is valid by construction");
            Sample {
                timeframe,
                network,
                accepted,
                attempts,
            }
        })
        .collect();
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_stays_inside() {
        assert_eq!(reflect(0.5, 1.0), 0.5);
        assert!((reflect(1.25, 1.0) - 0.75).abs() < 1e-15);
        assert!((reflect(-0.25, 1.0) - 0.25).abs() < 1e-15);
        assert!((reflect(3.5, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_nodes_always_linked_and_skipped() {
        let mut cfg = ManetConfig::with_defaults(2, 5, 7);
        cfg.coverage_radius = 2.0;
        let samples = generate_samples(&cfg).unwrap();
        assert_eq!(samples.len(), 5);
        for s in &samples {
            assert_eq!(s.network.links(), &[(0, 1)]);
            assert!(!s.accepted);
            assert_eq!(s.attempts, ENDPOINT_ATTEMPTS);
        }
    }

    #[test]
    fn zero_radius_has_no_links() {
        let mut cfg = ManetConfig::with_defaults(10, 3, 1);
        cfg.coverage_radius = 0.0;
        let samples = generate_samples(&cfg).unwrap();
        assert!(samples
            .iter()
            .all(|s| s.network.link_count() == 0 && !s.accepted));
    }

    #[test]
    fn config_errors() {
        let mut cfg = ManetConfig::with_defaults(10, 0, 1);
        assert_eq!(
            generate_samples(&cfg).unwrap_err(),
            ManetError::NoTimeframes
        );
        cfg.timeframes = 1;
        cfg.node_count = 1;
        assert_eq!(cfg.validate(), Err(ManetError::TooFewNodes(1)));
        cfg.node_count = 4;
        cfg.coverage_radius = -1.0;
        assert_eq!(cfg.validate(), Err(ManetError::BadRadius(-1.0)));
    }

    #[test]
    fn endpoints_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k4 = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let (_, ok, attempts) = select_endpoints(4, &k4, 2, &mut rng);
        assert!(ok);
        assert_eq!(attempts, 1);

        let path = [(0, 1), (1, 2)];
        let (_, ok, _) = select_endpoints(3, &path, 2, &mut rng);
        assert!(!ok);

        // The diamond is a 4-cycle, so every pair has two disjoint paths.
        let diamond = [(0, 1), (0, 2), (1, 3), (2, 3)];
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ((s, t), ok, _) = select_endpoints(4, &diamond, 2, &mut rng);
            assert!(ok);
            assert_eq!(edge_disjoint_paths(4, &diamond, s, t), 2);
        }
    }
}
