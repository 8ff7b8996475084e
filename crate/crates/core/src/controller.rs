//! Relay motion decisions.
//!
//! The relaxed first-stage problem splits into one 2-D maximization of the
//! surrogate objective per relay, followed by an argmax over relays: only the
//! winning relay moves, along a straight line, within one slot.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::posterior::{objective_e, HistoryContext};

/// Reachable set of one relay for the next slot: a disk clipped to the region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleRegion {
    pub center: Point,
    pub radius: f64,
    pub clip: Rect,
}

impl FeasibleRegion {
    pub fn new(center: Point, radius: f64, clip: Rect) -> Result<Self> {
        if !clip.contains(center) {
            return Err(Error::invalid("center", "outside the clip region"));
        }
        if !(radius >= 0.0) {
            return Err(Error::invalid("radius", "must be >= 0"));
        }
        Ok(FeasibleRegion {
            center,
            radius,
            clip,
        })
    }

    pub fn contains(&self, p: Point) -> bool {
        self.clip.contains(p) && p.distance(self.center) <= self.radius * (1.0 + 1e-12) + 1e-12
    }

    /// Maps any point into the region: radial projection onto the disk, then
    /// clamping to the rectangle. Clamping cannot leave the disk because the
    /// center lies in the rectangle and projection onto a box is non-expansive.
    pub fn project(&self, p: Point) -> Point {
        let d = p - self.center;
        let n = d.norm();
        let q = if n > self.radius {
            self.center + d * (self.radius / n)
        } else {
            p
        };
        self.clip.clamp(q)
    }

    /// Uniform draw by rejection from the disk.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        if self.radius == 0.0 {
            return self.center;
        }
        loop {
            let r = self.radius * rng.random::<f64>().sqrt();
            let th = TAU * rng.random::<f64>();
            let p = self.center + Point::new(r * th.cos(), r * th.sin());
            if self.clip.contains(p) {
                return p;
            }
        }
    }
}

/// Resolution of the deterministic inner search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub n_radii: usize,
    pub n_angles: usize,
    pub refine_rounds: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            n_radii: 8,
            n_angles: 16,
            refine_rounds: 3,
        }
    }
}

const REFINE_HALF_WIDTH: i32 = 3;
const REFINE_SHRINK: f64 = 3.0;

// Strictly better, or equal and lexicographically smaller.
fn improves(value: f64, p: Point, best: f64, best_p: Point) -> bool {
    value > best || (value == best && (p.x, p.y) < (best_p.x, best_p.y))
}

/// Maximizes `objective` over `region`: a polar grid around the center, then
/// `refine_rounds` rounds of a shrinking Cartesian grid around the incumbent.
/// Every candidate is projected into the region, and the center is always
/// evaluated first.
pub fn maximize_in_region(
    region: &FeasibleRegion,
    search: &SearchParams,
    mut objective: impl FnMut(Point) -> Result<f64>,
) -> Result<(Point, f64)> {
    let mut best_p = region.center;
    let mut best = objective(best_p)?;
    if region.radius == 0.0 {
        return Ok((best_p, best));
    }
    let mut consider = |p: Point, best: &mut f64, best_p: &mut Point| -> Result<()> {
        let q = region.project(p);
        let v = objective(q)?;
        if improves(v, q, *best, *best_p) {
            *best = v;
            *best_p = q;
        }
        Ok(())
    };

    let nr = search.n_radii.max(1);
    let na = search.n_angles.max(1);
    for k in 1..=nr {
        let r = region.radius * k as f64 / nr as f64;
        for j in 0..na {
            let th = TAU * j as f64 / na as f64;
            let p = region.center + Point::new(r * th.cos(), r * th.sin());
            consider(p, &mut best, &mut best_p)?;
        }
    }

    // first refinement cell spans one coarse grid spacing around the incumbent
    let radial = region.radius / nr as f64;
    let angular = best_p.distance(region.center) * TAU / na as f64;
    let mut step = radial.max(angular) / REFINE_SHRINK;
    for _ in 0..search.refine_rounds {
        let anchor = best_p;
        for a in -REFINE_HALF_WIDTH..=REFINE_HALF_WIDTH {
            for b in -REFINE_HALF_WIDTH..=REFINE_HALF_WIDTH {
                if a == 0 && b == 0 {
                    continue;
                }
                let p = anchor + Point::new(a as f64 * step, b as f64 * step);
                consider(p, &mut best, &mut best_p)?;
            }
        }
        step /= REFINE_SHRINK;
    }
    Ok((best_p, best))
}

/// Best next-slot position of one relay under the surrogate objective.
pub fn inner_max(
    region: &FeasibleRegion,
    ctx: &HistoryContext<'_>,
    search: &SearchParams,
) -> Result<(Point, f64)> {
    maximize_in_region(region, search, |p| objective_e(p, ctx))
}

/// Index of the largest value; ties go to the lowest index.
pub fn select_relay(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "at least one relay");
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Constant velocity reaching `target` from `current` in `dt`, `(x, y)` order.
pub fn motion_command(target: Point, current: Point, dt: f64) -> Point {
    assert!(dt > 0.0, "motion interval must be positive");
    (target - current) * (1.0 / dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Only the relay with the best surrogate optimum moves.
    Selective,
    Static,
    /// Every relay jumps to a uniform point of its reachable set.
    RandomWalk,
    /// Every relay moves to its own surrogate optimum.
    MoveAll,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::Selective,
        Policy::Static,
        Policy::RandomWalk,
        Policy::MoveAll,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Selective => "selective",
            Policy::Static => "static",
            Policy::RandomWalk => "random_walk",
            Policy::MoveAll => "move_all",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

/// Outcome of one slot's motion decision. `chosen_relay` is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub chosen_relay: usize,
    /// Next-slot position of every relay.
    pub targets: Vec<Point>,
    pub velocities: Vec<Point>,
    /// Per relay: the evaluated point and its surrogate value.
    pub per_relay_best: Vec<(Point, f64)>,
}

impl ControlDecision {
    pub fn target(&self) -> Point {
        self.targets[self.chosen_relay]
    }

    pub fn velocity(&self) -> Point {
        self.velocities[self.chosen_relay]
    }

    pub fn best_value(&self) -> f64 {
        self.per_relay_best[self.chosen_relay].1
    }
}

/// What a policy needs to decide the next positions.
pub struct ControlState<'a, 'h> {
    pub positions: &'a [Point],
    pub ctx: &'a HistoryContext<'h>,
    pub region: Rect,
    pub radius: f64,
    pub dt: f64,
    pub search: SearchParams,
}

impl ControlState<'_, '_> {
    pub fn feasible_region(&self, relay: usize) -> Result<FeasibleRegion> {
        FeasibleRegion::new(self.positions[relay], self.radius, self.region)
    }

    fn decision(&self, targets: Vec<Point>, per_relay_best: Vec<(Point, f64)>) -> ControlDecision {
        let values: Vec<f64> = per_relay_best.iter().map(|b| b.1).collect();
        let velocities = targets
            .iter()
            .zip(self.positions)
            .map(|(t, c)| motion_command(*t, *c, self.dt))
            .collect();
        ControlDecision {
            chosen_relay: select_relay(&values),
            targets,
            velocities,
            per_relay_best,
        }
    }

    fn optimize_all(&self) -> Result<Vec<(Point, f64)>> {
        (0..self.positions.len())
            .map(|i| inner_max(&self.feasible_region(i)?, self.ctx, &self.search))
            .collect()
    }

    fn evaluate_at(&self, points: &[Point]) -> Result<Vec<(Point, f64)>> {
        points
            .iter()
            .map(|p| Ok((*p, objective_e(*p, self.ctx)?)))
            .collect()
    }
}

/// Runs one policy. `rng` is only consumed by `RandomWalk`.
pub fn policy_step<R: Rng + ?Sized>(
    policy: Policy,
    state: &ControlState<'_, '_>,
    rng: &mut R,
) -> Result<ControlDecision> {
    match policy {
        Policy::Static => {
            let best = state.evaluate_at(state.positions)?;
            Ok(state.decision(state.positions.to_vec(), best))
        }
        Policy::RandomWalk => {
            let targets = (0..state.positions.len())
                .map(|i| Ok(state.feasible_region(i)?.sample_uniform(rng)))
                .collect::<Result<Vec<_>>>()?;
            let best = state.evaluate_at(&targets)?;
            Ok(state.decision(targets, best))
        }
        Policy::MoveAll => {
            let best = state.optimize_all()?;
            let targets = best.iter().map(|b| b.0).collect();
            Ok(state.decision(targets, best))
        }
        Policy::Selective => {
            let best = state.optimize_all()?;
            let mut targets = state.positions.to_vec();
            let values: Vec<f64> = best.iter().map(|b| b.1).collect();
            let i = select_relay(&values);
            targets[i] = best[i].0;
            Ok(state.decision(targets, best))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ChannelModel, FieldHistory};
    use crate::params::{ChannelParams, NetworkGeometry};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(num_relays: usize, slots: usize, params: ChannelParams) -> (FieldHistory, Vec<Point>) {
        let geo = NetworkGeometry::default();
        let model = ChannelModel::new(params, &geo);
        let pos = geo.initial_positions[..num_relays].to_vec();
        let mut h = FieldHistory::new(model, num_relays, None);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..slots {
            h.sample_next_slot(&pos, &mut rng).unwrap();
        }
        (h, pos)
    }

    #[test]
    fn select_relay_examples() {
        assert_eq!(select_relay(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(select_relay(&[2.0, 2.0, 2.0]), 0);
        assert_eq!(select_relay(&[-4.0]), 0);
    }

    #[test]
    fn motion_command_examples() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(motion_command(Point::new(3.0, 4.0), o, 1.0), Point::new(3.0, 4.0));
        assert_eq!(motion_command(o, o, 1.0), o);
        assert_eq!(motion_command(Point::new(3.0, 4.0), o, 2.0), Point::new(1.5, 2.0));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert!("teleport".parse::<Policy>().is_err());
    }

    #[test]
    fn zero_radius_returns_center() {
        let (h, pos) = setup(1, 2, ChannelParams::default());
        let ctx = HistoryContext::new(&h);
        let region = FeasibleRegion::new(pos[0], 0.0, NetworkGeometry::default().region).unwrap();
        let (p, v) = inner_max(&region, &ctx, &SearchParams::default()).unwrap();
        assert_eq!(p, pos[0]);
        assert_eq!(v, objective_e(pos[0], &ctx).unwrap());
    }

    #[test]
    fn empty_history_noiseless_moves_toward_destination() {
        let params = ChannelParams {
            relay_noise_power: 0.0,
            ..Default::default()
        };
        let (h, _) = setup(1, 0, params);
        let ctx = HistoryContext::new(&h);
        let geo = NetworkGeometry::default();
        let search = SearchParams::default();
        for center in [Point::new(40.0, 40.0), Point::new(79.0, 51.0), Point::new(99.0, 1.0)] {
            let radius = 2.0;
            let region = FeasibleRegion::new(center, radius, geo.region).unwrap();
            let (p, _) = inner_max(&region, &ctx, &search).unwrap();
            // nearest feasible point to the destination
            let d = geo.dest_pos - center;
            let nearest = if d.norm() <= radius {
                geo.dest_pos
            } else {
                region.project(center + d * (radius / d.norm()))
            };
            let cell = radius / search.n_radii as f64;
            assert!(p.distance(nearest) <= cell, "{p:?} vs {nearest:?}");
        }
    }

    #[test]
    fn search_beats_random_probes() {
        let (h, pos) = setup(2, 4, ChannelParams::default());
        let ctx = HistoryContext::new(&h);
        let region = FeasibleRegion::new(pos[1], 2.0, NetworkGeometry::default().region).unwrap();
        let (_, best) = inner_max(&region, &ctx, &SearchParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..1000 {
            let q = region.sample_uniform(&mut rng);
            let v = objective_e(q, &ctx).unwrap();
            assert!(best >= v - 1e-12, "probe {v} beats search {best}");
        }
    }

    fn state<'a, 'h>(pos: &'a [Point], ctx: &'a HistoryContext<'h>) -> ControlState<'a, 'h> {
        let geo = NetworkGeometry::default();
        ControlState {
            positions: pos,
            ctx,
            region: geo.region,
            radius: geo.step_radius(),
            dt: geo.slot_move_interval,
            search: SearchParams::default(),
        }
    }

    #[test]
    fn static_policy_keeps_positions() {
        let (h, pos) = setup(3, 2, ChannelParams::default());
        let ctx = HistoryContext::new(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = policy_step(Policy::Static, &state(&pos, &ctx), &mut rng).unwrap();
        assert_eq!(d.targets, pos);
        assert!(d.velocities.iter().all(|v| *v == Point::default()));
    }

    #[test]
    fn selective_moves_one_relay_and_improves() {
        let (h, pos) = setup(3, 3, ChannelParams::default());
        let ctx = HistoryContext::new(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let st = state(&pos, &ctx);
        let d = policy_step(Policy::Selective, &st, &mut rng).unwrap();
        let moved = d.targets.iter().zip(&pos).filter(|(t, p)| t != p).count();
        assert!(moved <= 1);
        for (i, t) in d.targets.iter().enumerate() {
            assert!(st.feasible_region(i).unwrap().contains(*t));
        }
        let stay = pos.iter().map(|p| objective_e(*p, &ctx).unwrap()).fold(f64::MIN, f64::max);
        assert!(d.best_value() >= stay);
        let all = policy_step(Policy::MoveAll, &st, &mut rng).unwrap();
        assert_eq!(all.per_relay_best, d.per_relay_best);
        assert_eq!(all.chosen_relay, d.chosen_relay);
    }

    #[test]
    fn single_relay_selective_equals_move_all() {
        let (h, pos) = setup(1, 2, ChannelParams::default());
        let ctx = HistoryContext::new(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let st = state(&pos, &ctx);
        let a = policy_step(Policy::Selective, &st, &mut rng).unwrap();
        let b = policy_step(Policy::MoveAll, &st, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_walk_is_deterministic_and_feasible() {
        let (h, pos) = setup(3, 1, ChannelParams::default());
        let ctx = HistoryContext::new(&h);
        let st = state(&pos, &ctx);
        let a = policy_step(Policy::RandomWalk, &st, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = policy_step(Policy::RandomWalk, &st, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        for (i, t) in a.targets.iter().enumerate() {
            assert!(st.feasible_region(i).unwrap().contains(*t));
        }
    }

    proptest! {
        #[test]
        fn selection_is_scale_free(values in prop::collection::vec(-1e3f64..1e3, 1..8), s in 1e-6f64..1e6) {
            let scaled: Vec<f64> = values.iter().map(|v| v * s).collect();
            prop_assert_eq!(select_relay(&values), select_relay(&scaled));
        }

        #[test]
        fn projection_lands_in_region(cx in 0.0f64..10.0, cy in 0.0f64..10.0, r in 0.0f64..4.0,
                                      px in -20.0f64..30.0, py in -20.0f64..30.0) {
            let clip = Rect::new(Point::new(0.0, 0.0), Point::new(10.0, 10.0));
            let reg = FeasibleRegion::new(Point::new(cx, cy), r, clip).unwrap();
            prop_assert!(reg.contains(reg.project(Point::new(px, py))));
        }
    }
}
