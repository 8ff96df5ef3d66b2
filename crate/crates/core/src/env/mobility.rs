//! Platoon placement and straight-lane mobility on a wrapping Manhattan grid.

use rand::Rng;

use super::config::{EnvConfig, GridConfig};
use crate::channel::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Road parallel to x.
    Horizontal,
    /// Road parallel to y.
    Vertical,
}

/// Where a platoon leader drives: a road, a travel direction and an
/// along-road coordinate in `[0, road_length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePosition {
    pub axis: Axis,
    pub road: usize,
    /// +1 or -1 along the axis.
    pub direction: f64,
    pub along_m: f64,
    pub speed_mps: f64,
}

impl GridConfig {
    pub fn width_m(&self) -> f64 {
        self.block_width_m * self.columns as f64
    }

    pub fn height_m(&self) -> f64 {
        self.block_height_m * self.rows as f64
    }

    pub fn rsu_position(&self) -> Point {
        Point::new(
            (self.columns / 2) as f64 * self.block_width_m,
            (self.rows / 2) as f64 * self.block_height_m,
        )
    }

    fn road_length(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Horizontal => self.width_m(),
            Axis::Vertical => self.height_m(),
        }
    }

    /// Spacing between intersections met while driving along `axis`.
    fn block_length(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Horizontal => self.block_width_m,
            Axis::Vertical => self.block_height_m,
        }
    }

    fn roads(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.rows,
            Axis::Vertical => self.columns,
        }
    }
}

impl LanePosition {
    /// Position of the vehicle `behind_m` meters behind the leader on the same lane.
    /// Only the leader's coordinate wraps, so members of one platoon stay contiguous.
    pub fn point_behind(&self, grid: &GridConfig, behind_m: f64) -> Point {
        let along = self.along_m - self.direction * behind_m;
        // Right-hand traffic: lane offset to the right of the travel direction.
        let offset = 0.5 * grid.lane_width_m * self.direction;
        match self.axis {
            Axis::Horizontal => Point::new(along, self.road as f64 * grid.block_height_m - offset),
            Axis::Vertical => Point::new(self.road as f64 * grid.block_width_m + offset, along),
        }
    }

    pub fn leader(&self, grid: &GridConfig) -> Point {
        self.point_behind(grid, 0.0)
    }

    /// Draw a uniformly random lane, direction, along-road position and speed.
    pub fn random<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Self {
        let grid = &config.grid;
        let axis = if rng.random_bool(0.5) {
            Axis::Horizontal
        } else {
            Axis::Vertical
        };
        let road = rng.random_range(0..grid.roads(axis));
        let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let along_m = rng.random_range(0.0..grid.road_length(axis));
        let speed_mps = if config.speed_max_mps > config.speed_min_mps {
            rng.random_range(config.speed_min_mps..=config.speed_max_mps)
        } else {
            config.speed_min_mps
        };
        LanePosition {
            axis,
            road,
            direction,
            along_m,
            speed_mps,
        }
    }

    /// Advance by `dt` seconds. When the leader crosses an intersection it
    /// turns onto the crossing road with probability `turn_probability`; the
    /// members are re-laid straight behind it on the new road.
    pub fn advance<R: Rng + ?Sized>(&mut self, grid: &GridConfig, dt: f64, turn_probability: f64, rng: &mut R) {
        let length = grid.road_length(self.axis);
        let block = grid.block_length(self.axis);
        let before = self.along_m;
        let unwrapped = before + self.direction * self.speed_mps * dt;
        self.along_m = unwrapped.rem_euclid(length);

        if turn_probability <= 0.0 {
            return;
        }
        let (lo, hi) = if unwrapped >= before {
            (before, unwrapped)
        } else {
            (unwrapped, before)
        };
        // First intersection index strictly crossed in the direction of travel.
        let crossed = ((hi / block).floor() - (lo / block).floor()) as i64;
        if crossed <= 0 || !rng.random_bool(turn_probability) {
            return;
        }
        let boundary = if self.direction > 0.0 {
            (lo / block).floor() + 1.0
        } else {
            (hi / block).floor()
        } * block;
        let remaining = (unwrapped - boundary).abs();
        let new_road = ((boundary.rem_euclid(length) / block).round() as usize) % grid.roads_crossing(self.axis);
        let new_axis = match self.axis {
            Axis::Horizontal => Axis::Vertical,
            Axis::Vertical => Axis::Horizontal,
        };
        // The intersection's coordinate on the new axis is the old road's offset.
        let crossing_along = self.road as f64 * grid.block_length(new_axis);
        let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        self.axis = new_axis;
        self.road = new_road;
        self.direction = direction;
        self.along_m = (crossing_along + direction * remaining).rem_euclid(grid.road_length(new_axis));
    }
}

impl GridConfig {
    /// Number of roads perpendicular to `axis`, i.e. intersections per loop.
    fn roads_crossing(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.columns,
            Axis::Vertical => self.rows,
        }
    }
}
