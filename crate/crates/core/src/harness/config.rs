//! Experiment configuration and its flat TOML file format.
//!
//! Every key is optional; missing keys take the defaults below.
//!
//! ```toml
//! # channel
//! path_loss_exponent = 2.3
//! wavelength = 0.125
//! shadow_power = 4.0          # dB²
//! corr_distance = 10.0        # m
//! corr_time = 5.0             # slots
//! bs_correlation = 50.0       # m
//! fading_var = 1.0            # dB²
//! fading_mean_db = 0.0
//! relay_noise_power = 1e-4    # W
//! dest_noise_power = 1e-4     # W
//! source_power = 1.0          # W
//! sinr_threshold = 10.0
//!
//! # geometry
//! region = [0.0, 0.0, 100.0, 100.0]   # min_x, min_y, max_x, max_y
//! source = [20.0, 50.0]
//! destination = [80.0, 50.0]
//! initial_positions = [[40.0, 40.0], [40.0, 60.0], [50.0, 50.0]]
//! num_slots = 30
//! slot_move_interval = 1.0    # s
//! max_speed = 2.0             # m/s
//!
//! # experiment
//! policies = ["selective", "static", "random_walk", "move_all"]
//! trials = 200
//! master_seed = 1
//! history_window = 10         # omit for exact conditioning on the full history
//! search_radii = 8
//! search_angles = 16
//! refine_rounds = 3
//! out_dir = "results"
//! trajectories = false
//! debug_jensen = false
//! jensen_trials = 1
//! jensen_slots = 3
//! jensen_draws = 10000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{Policy, SearchParams};
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::params::{ChannelParams, NetworkGeometry};

/// Settings of the Monte Carlo Jensen-gap check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenSettings {
    pub enabled: bool,
    /// Checked trials are `0..trials`.
    pub trials: usize,
    /// Checked slots are `1..=slots`.
    pub slots: usize,
    pub draws: usize,
}

impl Default for JensenSettings {
    fn default() -> Self {
        JensenSettings {
            enabled: false,
            trials: 1,
            slots: 3,
            draws: 10_000,
        }
    }
}

impl JensenSettings {
    pub fn applies(&self, trial: usize, slot: usize) -> bool {
        self.enabled && trial < self.trials && slot <= self.slots
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub channel: ChannelParams,
    pub geometry: NetworkGeometry,
    pub policies: Vec<Policy>,
    pub trials: usize,
    pub master_seed: u64,
    /// `None` conditions on the full history.
    pub history_window: Option<usize>,
    pub search: SearchParams,
    pub out_dir: PathBuf,
    pub trajectories: bool,
    pub jensen: JensenSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            channel: ChannelParams::default(),
            geometry: NetworkGeometry::default(),
            policies: Policy::ALL.to_vec(),
            trials: 200,
            master_seed: 1,
            history_window: None,
            search: SearchParams::default(),
            out_dir: PathBuf::from("results"),
            trajectories: false,
            jensen: JensenSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.geometry.validate()?;
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        if self.policies.is_empty() {
            return Err(Error::invalid("policies", "at least one policy required"));
        }
        if self.search.n_radii == 0 || self.search.n_angles == 0 {
            return Err(Error::invalid("search", "grid sizes must be >= 1"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let config = file.into_config()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ConfigFile::from_config(self)).expect("config serializes")
    }
}

/// On-disk layout: one flat table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    path_loss_exponent: f64,
    wavelength: f64,
    shadow_power: f64,
    corr_distance: f64,
    corr_time: f64,
    bs_correlation: f64,
    fading_var: f64,
    fading_mean_db: f64,
    relay_noise_power: f64,
    dest_noise_power: f64,
    source_power: f64,
    sinr_threshold: f64,

    region: [f64; 4],
    source: [f64; 2],
    destination: [f64; 2],
    initial_positions: Vec<[f64; 2]>,
    // defaults to the number of initial positions
    num_relays: Option<usize>,
    num_slots: usize,
    slot_move_interval: f64,
    max_speed: f64,

    policies: Vec<String>,
    trials: usize,
    master_seed: u64,
    history_window: Option<usize>,
    search_radii: usize,
    search_angles: usize,
    refine_rounds: usize,
    out_dir: PathBuf,
    trajectories: bool,
    debug_jensen: bool,
    jensen_trials: usize,
    jensen_slots: usize,
    jensen_draws: usize,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from_config(&ExperimentConfig::default())
    }
}

fn pt(p: Point) -> [f64; 2] {
    [p.x, p.y]
}

impl ConfigFile {
    fn from_config(c: &ExperimentConfig) -> Self {
        let ch = &c.channel;
        let g = &c.geometry;
        ConfigFile {
            path_loss_exponent: ch.path_loss_exponent,
            wavelength: ch.wavelength,
            shadow_power: ch.shadow_power,
            corr_distance: ch.corr_distance,
            corr_time: ch.corr_time,
            bs_correlation: ch.bs_correlation,
            fading_var: ch.fading_var,
            fading_mean_db: ch.fading_mean_db,
            relay_noise_power: ch.relay_noise_power,
            dest_noise_power: ch.dest_noise_power,
            source_power: ch.source_power,
            sinr_threshold: ch.sinr_threshold,
            region: [g.region.min.x, g.region.min.y, g.region.max.x, g.region.max.y],
            source: pt(g.source_pos),
            destination: pt(g.dest_pos),
            initial_positions: g.initial_positions.iter().map(|p| pt(*p)).collect(),
            num_relays: None,
            num_slots: g.num_slots,
            slot_move_interval: g.slot_move_interval,
            max_speed: g.max_speed,
            policies: c.policies.iter().map(|p| p.to_string()).collect(),
            trials: c.trials,
            master_seed: c.master_seed,
            history_window: c.history_window,
            search_radii: c.search.n_radii,
            search_angles: c.search.n_angles,
            refine_rounds: c.search.refine_rounds,
            out_dir: c.out_dir.clone(),
            trajectories: c.trajectories,
            debug_jensen: c.jensen.enabled,
            jensen_trials: c.jensen.trials,
            jensen_slots: c.jensen.slots,
            jensen_draws: c.jensen.draws,
        }
    }

    fn into_config(self) -> Result<ExperimentConfig> {
        let initial_positions: Vec<Point> = self
            .initial_positions
            .iter()
            .map(|p| Point::new(p[0], p[1]))
            .collect();
        let num_relays = self.num_relays.unwrap_or(initial_positions.len());
        let policies = self
            .policies
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Policy>>>()?;
        Ok(ExperimentConfig {
            channel: ChannelParams {
                path_loss_exponent: self.path_loss_exponent,
                wavelength: self.wavelength,
                shadow_power: self.shadow_power,
                corr_distance: self.corr_distance,
                corr_time: self.corr_time,
                bs_correlation: self.bs_correlation,
                fading_var: self.fading_var,
                fading_mean_db: self.fading_mean_db,
                relay_noise_power: self.relay_noise_power,
                dest_noise_power: self.dest_noise_power,
                source_power: self.source_power,
                sinr_threshold: self.sinr_threshold,
            },
            geometry: NetworkGeometry {
                region: Rect::new(
                    Point::new(self.region[0], self.region[1]),
                    Point::new(self.region[2], self.region[3]),
                ),
                source_pos: Point::new(self.source[0], self.source[1]),
                dest_pos: Point::new(self.destination[0], self.destination[1]),
                num_relays,
                initial_positions,
                num_slots: self.num_slots,
                slot_move_interval: self.slot_move_interval,
                max_speed: self.max_speed,
            },
            policies,
            trials: self.trials,
            master_seed: self.master_seed,
            history_window: self.history_window,
            search: SearchParams {
                n_radii: self.search_radii,
                n_angles: self.search_angles,
                refine_rounds: self.refine_rounds,
            },
            out_dir: self.out_dir,
            trajectories: self.trajectories,
            jensen: JensenSettings {
                enabled: self.debug_jensen,
                trials: self.jensen_trials,
                slots: self.jensen_slots,
                draws: self.jensen_draws,
            },
        })
    }
}
