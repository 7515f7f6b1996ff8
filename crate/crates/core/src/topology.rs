//! Node placement and pairwise geometry.

use ndarray::Array2;
use rand::{Rng as _, SeedableRng};

use crate::config::NetworkConfig;
use crate::error::Result;
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Positions, distance matrices, and computing capacities for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub user_positions: Vec<Point>,
    pub ap_positions: Vec<Point>,
    pub cpu_positions: Vec<Point>,
    /// users x aps, meters
    pub dist_ua: Array2<f64>,
    /// aps x cpus, meters
    pub dist_ak: Array2<f64>,
    /// per-user local capacity (cycles/s)
    pub local_capacity: Vec<f64>,
    /// per-CPU edge capacity (cycles/s)
    pub edge_capacity: Vec<f64>,
}

pub fn distance_matrix(from: &[Point], to: &[Point]) -> Array2<f64> {
    Array2::from_shape_fn((from.len(), to.len()), |(i, j)| from[i].distance(&to[j]))
}

impl Topology {
    /// Build a topology from explicit positions and capacities.
    pub fn from_parts(
        user_positions: Vec<Point>,
        ap_positions: Vec<Point>,
        cpu_positions: Vec<Point>,
        local_capacity: Vec<f64>,
        edge_capacity: Vec<f64>,
    ) -> Self {
        let dist_ua = distance_matrix(&user_positions, &ap_positions);
        let dist_ak = distance_matrix(&ap_positions, &cpu_positions);
        Self {
            user_positions,
            ap_positions,
            cpu_positions,
            dist_ua,
            dist_ak,
            local_capacity,
            edge_capacity,
        }
    }

    pub fn users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn cpus(&self) -> usize {
        self.cpu_positions.len()
    }
}

/// Draw users and APs uniformly over the square, place CPUs at their
/// configured coordinates, and draw capacities uniformly from their ranges.
pub fn place_nodes(config: &NetworkConfig, seed: u64) -> Result<Topology> {
    config.validate()?;
    let mut rng = Rng::seed_from_u64(seed);
    let side = config.area_side;
    let uniform_point = |rng: &mut Rng| Point::new(rng.gen_range(0.0..=side), rng.gen_range(0.0..=side));

    let users: Vec<Point> = (0..config.users).map(|_| uniform_point(&mut rng)).collect();
    let aps: Vec<Point> = (0..config.aps).map(|_| uniform_point(&mut rng)).collect();
    let cpus: Vec<Point> = config.cpu_positions.iter().map(|p| Point::new(p[0], p[1])).collect();
    let local: Vec<f64> = (0..config.users).map(|_| config.local_capacity.sample(&mut rng)).collect();
    let edge: Vec<f64> = (0..config.cpus).map(|_| config.edge_capacity.sample(&mut rng)).collect();

    Ok(Topology::from_parts(users, aps, cpus, local, edge))
}
