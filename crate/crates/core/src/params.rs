//! Physical and statistical constants of the relay network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

/// Channel and link-budget constants. All decibel quantities refer to
/// `10·log10` of a power ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub path_loss_exponent: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Shadowing power, dB².
    pub shadow_power: f64,
    /// Spatial correlation distance of the shadowing, meters.
    pub corr_distance: f64,
    /// Temporal correlation of the shadowing, in slots.
    pub corr_time: f64,
    /// Source/destination shadowing decorrelation length, meters.
    pub bs_correlation: f64,
    /// Variance of the dB-domain multipath fading, dB².
    pub fading_var: f64,
    /// Mean of `10·log10|fading|²`, dB.
    pub fading_mean_db: f64,
    /// Noise power at each relay, watts.
    pub relay_noise_power: f64,
    /// Noise power at the destination, watts.
    pub dest_noise_power: f64,
    /// Source transmit power, watts.
    pub source_power: f64,
    /// Minimum SINR at the destination (linear).
    pub sinr_threshold: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            path_loss_exponent: 2.3,
            wavelength: 0.125,
            shadow_power: 4.0,
            corr_distance: 10.0,
            corr_time: 5.0,
            bs_correlation: 50.0,
            fading_var: 1.0,
            fading_mean_db: 0.0,
            relay_noise_power: 1e-4,
            dest_noise_power: 1e-4,
            source_power: 1.0,
            sinr_threshold: 10.0,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        positive("path_loss_exponent", self.path_loss_exponent)?;
        positive("wavelength", self.wavelength)?;
        positive("shadow_power", self.shadow_power)?;
        positive("corr_distance", self.corr_distance)?;
        positive("corr_time", self.corr_time)?;
        positive("bs_correlation", self.bs_correlation)?;
        positive("relay_noise_power", self.relay_noise_power)?;
        positive("dest_noise_power", self.dest_noise_power)?;
        positive("source_power", self.source_power)?;
        positive("sinr_threshold", self.sinr_threshold)?;
        if !(self.fading_var >= 0.0 && self.fading_var.is_finite()) {
            return Err(Error::invalid("fading_var", "must be finite and >= 0"));
        }
        if !self.fading_mean_db.is_finite() {
            return Err(Error::invalid("fading_mean_db", "must be finite"));
        }
        Ok(())
    }

    /// Diagonal jitter added before any covariance factorization.
    pub fn jitter(&self) -> f64 {
        1e-9 * self.shadow_power
    }
}

/// Placement of the network and the motion budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGeometry {
    pub region: Rect,
    pub source_pos: Point,
    pub dest_pos: Point,
    pub num_relays: usize,
    pub initial_positions: Vec<Point>,
    pub num_slots: usize,
    /// Time each relay is allowed to move per slot, seconds.
    pub slot_move_interval: f64,
    /// Meters per second.
    pub max_speed: f64,
}

impl Default for NetworkGeometry {
    fn default() -> Self {
        let initial_positions = vec![
            Point::new(40.0, 40.0),
            Point::new(40.0, 60.0),
            Point::new(50.0, 50.0),
        ];
        NetworkGeometry {
            region: Rect::new(Point::new(0.0, 0.0), Point::new(100.0, 100.0)),
            source_pos: Point::new(20.0, 50.0),
            dest_pos: Point::new(80.0, 50.0),
            num_relays: initial_positions.len(),
            initial_positions,
            num_slots: 30,
            slot_move_interval: 1.0,
            max_speed: 2.0,
        }
    }
}

impl NetworkGeometry {
    /// Radius of the per-slot reachable disk.
    pub fn step_radius(&self) -> f64 {
        self.max_speed * self.slot_move_interval
    }

    pub fn validate(&self) -> Result<()> {
        if !self.region.is_valid() {
            return Err(Error::invalid("region", "min corner exceeds max corner"));
        }
        if self.num_relays == 0 {
            return Err(Error::invalid("num_relays", "must be >= 1"));
        }
        if self.initial_positions.len() != self.num_relays {
            return Err(Error::invalid(
                "initial_positions",
                format!(
                    "expected {} positions, got {}",
                    self.num_relays,
                    self.initial_positions.len()
                ),
            ));
        }
        if self.num_slots == 0 {
            return Err(Error::invalid("num_slots", "must be >= 1"));
        }
        positive("slot_move_interval", self.slot_move_interval)?;
        positive("max_speed", self.max_speed)?;
        for (name, p) in [("source_pos", self.source_pos), ("dest_pos", self.dest_pos)] {
            if !self.region.contains(p) {
                return Err(Error::invalid(name, "outside region"));
            }
        }
        if self.source_pos == self.dest_pos {
            return Err(Error::invalid("dest_pos", "coincides with source_pos"));
        }
        if let Some(p) = self.initial_positions.iter().find(|p| !self.region.contains(**p)) {
            return Err(Error::invalid(
                "initial_positions",
                format!("({}, {}) outside region", p.x, p.y),
            ));
        }
        Ok(())
    }
}
