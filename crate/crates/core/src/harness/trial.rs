//! One trial of one policy: the per-slot loop of channel observation,
//! beamforming and motion decision.

use std::time::Instant;

use crate::beamformer::solve_second_stage;
use crate::controller::{policy_step, ControlState, Policy};
use crate::error::Result;
use crate::field::{to_complex_gains, ChannelModel, FieldHistory};
use crate::geometry::Point;
use crate::posterior::{objective_e, HistoryContext};

use super::config::ExperimentConfig;
use super::jensen::{jensen_check, JensenCheck};
use super::rng::{Purpose, Streams};

/// Outcome of one slot. `positions` are where the relays stood during the
/// slot; the decision fields describe the move to the next slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    /// 0-based.
    pub trial: usize,
    /// 1-based.
    pub slot: usize,
    pub policy: Policy,
    pub positions: Vec<Point>,
    pub value_v: f64,
    pub relay_power: f64,
    pub achieved_sinr: f64,
    pub feasible: bool,
    /// 0-based.
    pub chosen_relay: usize,
    /// Surrogate value of the chosen relay at its decided position.
    pub best_e: f64,
    /// `max_i E_i` with every relay left where it is.
    pub stay_e: f64,
    pub targets: Vec<Point>,
    pub velocities: Vec<Point>,
    /// Seconds spent in this slot.
    pub wall_time: f64,
    pub jensen: Option<JensenCheck>,
}

/// Simulation state of one `(trial, policy)` pair.
pub struct TrialRunner<'c> {
    config: &'c ExperimentConfig,
    streams: Streams,
    trial: usize,
    policy: Policy,
    history: FieldHistory,
    positions: Vec<Point>,
}

impl<'c> TrialRunner<'c> {
    pub fn new(config: &'c ExperimentConfig, streams: Streams, trial: usize, policy: Policy) -> Self {
        let geo = &config.geometry;
        let model = ChannelModel::new(config.channel, geo);
        TrialRunner {
            config,
            streams,
            trial,
            policy,
            history: FieldHistory::new(model, geo.num_relays, config.history_window),
            positions: geo.initial_positions.clone(),
        }
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn history(&self) -> &FieldHistory {
        &self.history
    }

    /// Runs the next slot: draw the channels at the current positions given
    /// the history, beamform, decide the next positions from everything
    /// observed so far, then move.
    pub fn run_slot(&mut self) -> Result<SlotRecord> {
        let slot = self.history.num_slots() + 1;
        self.step(slot).map_err(|e| e.at_slot(self.trial, slot))
    }

    fn step(&mut self, slot: usize) -> Result<SlotRecord> {
        let start = Instant::now();
        let params = &self.config.channel;
        let geo = &self.config.geometry;

        let mut rng = self.streams.stream(self.trial, slot, Purpose::Channel);
        let block = self.history.sample_next_slot(&self.positions, &mut rng)?;
        let beam = solve_second_stage(&to_complex_gains(&block, params), params)?;

        let ctx = HistoryContext::new(&self.history);
        let mut stay_e = f64::NEG_INFINITY;
        for p in &self.positions {
            stay_e = stay_e.max(objective_e(*p, &ctx)?);
        }
        let state = ControlState {
            positions: &self.positions,
            ctx: &ctx,
            region: geo.region,
            radius: geo.step_radius(),
            dt: geo.slot_move_interval,
            search: self.config.search,
        };
        let mut rng = self.streams.stream(self.trial, slot, Purpose::Motion);
        let decision = policy_step(self.policy, &state, &mut rng)?;

        let jensen = if self.config.jensen.applies(self.trial, slot) {
            let mut rng = self.streams.stream(self.trial, slot, Purpose::JensenCheck);
            Some(jensen_check(
                &self.history,
                &decision.targets,
                self.trial,
                self.config.jensen.draws,
                &mut rng,
            )?)
        } else {
            None
        };

        let record = SlotRecord {
            trial: self.trial,
            slot,
            policy: self.policy,
            positions: self.positions.clone(),
            value_v: beam.value_v,
            relay_power: beam.relay_power,
            achieved_sinr: beam.achieved_sinr,
            feasible: beam.feasible,
            chosen_relay: decision.chosen_relay,
            best_e: decision.best_value(),
            stay_e,
            targets: decision.targets.clone(),
            velocities: decision.velocities.clone(),
            wall_time: 0.0,
            jensen,
        };
        self.positions = decision.targets;
        Ok(SlotRecord {
            wall_time: start.elapsed().as_secs_f64(),
            ..record
        })
    }

    /// Runs every slot. On failure returns the records finished so far
    /// together with the error.
    pub fn run(mut self) -> (Vec<SlotRecord>, Option<crate::Error>) {
        let mut out = Vec::with_capacity(self.config.geometry.num_slots);
        for _ in 0..self.config.geometry.num_slots {
            match self.run_slot() {
                Ok(r) => out.push(r),
                Err(e) => return (out, Some(e)),
            }
        }
        (out, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(policy: Policy, relays: usize, slots: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.trials = 1;
        c.policies = vec![policy];
        c.geometry.num_slots = slots;
        c.geometry.initial_positions.truncate(relays);
        c.geometry.num_relays = relays;
        c
    }

    #[test]
    fn static_keeps_positions() {
        let c = small_config(Policy::Static, 3, 5);
        let (recs, err) = TrialRunner::new(&c, Streams::new(3), 0, Policy::Static).run();
        assert!(err.is_none());
        assert_eq!(recs.len(), 5);
        for (k, r) in recs.iter().enumerate() {
            assert_eq!(r.slot, k + 1);
            assert_eq!(r.positions, c.geometry.initial_positions);
            assert_eq!(r.targets, r.positions);
            assert!(r.velocities.iter().all(|v| *v == Point::new(0.0, 0.0)));
            assert_eq!(r.best_e, r.stay_e);
        }
    }

    #[test]
    fn first_decision_conditions_on_first_slot_only() {
        let c = small_config(Policy::Selective, 2, 1);
        let mut runner = TrialRunner::new(&c, Streams::new(4), 0, Policy::Selective);
        assert!(runner.history().is_empty());
        let rec = runner.run_slot().unwrap();
        assert_eq!(runner.history().num_slots(), 1);
        // recompute the decision from the one-slot history
        let h = runner.history();
        let ctx = HistoryContext::new(h);
        let p = rec.targets[rec.chosen_relay];
        assert_eq!(objective_e(p, &ctx).unwrap(), rec.best_e);
        assert!(rec.best_e >= rec.stay_e);
    }

    #[test]
    fn selective_moves_at_most_one_relay_within_reach() {
        let c = small_config(Policy::Selective, 3, 6);
        let (recs, err) = TrialRunner::new(&c, Streams::new(5), 0, Policy::Selective).run();
        assert!(err.is_none());
        let radius = c.geometry.step_radius();
        for w in recs.windows(2) {
            assert_eq!(w[0].targets, w[1].positions);
        }
        for r in &recs {
            let moved: Vec<usize> = (0..3).filter(|&i| r.targets[i] != r.positions[i]).collect();
            assert!(moved.len() <= 1);
            if let Some(&i) = moved.first() {
                assert_eq!(i, r.chosen_relay);
                assert!(r.targets[i].distance(r.positions[i]) <= radius * (1.0 + 1e-12));
            }
            assert!(r.best_e >= r.stay_e);
        }
    }

    #[test]
    fn channel_draw_does_not_reach_back_in_time() {
        let c = small_config(Policy::Selective, 2, 4);
        let base = Streams::new(9);
        let cut = base.clone().with_tag_override(3, Purpose::Channel, 0xdead);
        let (a, _) = TrialRunner::new(&c, base, 0, Policy::Selective).run();
        let (b, _) = TrialRunner::new(&c, cut, 0, Policy::Selective).run();
        let timeless = |r: &SlotRecord| SlotRecord {
            wall_time: 0.0,
            ..r.clone()
        };
        for k in 0..2 {
            assert_eq!(timeless(&a[k]), timeless(&b[k]));
        }
        assert_ne!(a[2].value_v, b[2].value_v);
        // the move into slot 3 was fixed before slot 3 was drawn
        assert_eq!(a[1].targets, b[1].targets);
        assert_eq!(a[2].positions, b[2].positions);
    }
}
