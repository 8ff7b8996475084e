//! Spatiotemporal log-normal channel field.
//!
//! Source-relay and relay-destination gains are modeled in the dB domain as
//! path loss plus a Gaussian shadowing field plus white Gaussian fading. The
//! shadowing has an exponential space-time kernel, and S-side and D-side
//! shadowing are coupled by a constant attenuation that depends on the
//! source/destination separation.
//!
//! Ground truth is generated by sequential conditional sampling: each new slot
//! is drawn from the Gaussian conditional given every earlier observation, with
//! the Cholesky factor of the history covariance grown by one block per slot.
//! The stacked vector per slot is `[F_1..F_R, G_1..G_R]`.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::beamformer::SlotChannels;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{dot, PackedLower};
use crate::params::{ChannelParams, NetworkGeometry};

/// Which fixed terminal a link gain refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Source-relay link (`F`).
    Source,
    /// Relay-destination link (`G`).
    Dest,
}

/// `−10·ℓ·log10‖pos − anchor‖`.
pub fn pathloss_log(pos: Point, anchor: Point, params: &ChannelParams) -> Result<f64> {
    let d = pos.distance(anchor);
    if d == 0.0 {
        return Err(Error::DegenerateDistance { x: pos.x, y: pos.y });
    }
    Ok(-10.0 * params.path_loss_exponent * d.log10())
}

/// Channel statistics bound to a source/destination pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub params: ChannelParams,
    pub source: Point,
    pub dest: Point,
}

impl ChannelModel {
    pub fn new(params: ChannelParams, geometry: &NetworkGeometry) -> Self {
        ChannelModel {
            params,
            source: geometry.source_pos,
            dest: geometry.dest_pos,
        }
    }

    pub fn anchor(&self, side: Side) -> Point {
        match side {
            Side::Source => self.source,
            Side::Dest => self.dest,
        }
    }

    /// Prior mean of the log gain of `side` at `pos`.
    pub fn mean_log(&self, pos: Point, side: Side) -> Result<f64> {
        pathloss_log(pos, self.anchor(side), &self.params)
    }

    /// Cross-correlation factor between S-side and D-side shadowing.
    pub fn bs_attenuation(&self) -> f64 {
        (-self.source.distance(self.dest) / self.params.bs_correlation).exp()
    }

    /// Space-time kernel without the shadowing power.
    #[inline]
    pub fn kernel(&self, pa: Point, ta: usize, pb: Point, tb: usize) -> f64 {
        let lag = ta.abs_diff(tb) as f64;
        (-pa.distance(pb) / self.params.corr_distance - lag / self.params.corr_time).exp()
    }

    /// Shadowing covariance between `(pa, ta)` and `(pb, tb)`.
    ///
    /// `same_anchor` is false when one term is S-side and the other D-side.
    pub fn shadow_cov(&self, pa: Point, ta: usize, pb: Point, tb: usize, same_anchor: bool) -> f64 {
        let c = self.params.shadow_power * self.kernel(pa, ta, pb, tb);
        if same_anchor {
            c
        } else {
            c * self.bs_attenuation()
        }
    }

    /// Covariance between two entries of the stacked log-gain vector,
    /// including the white fading term.
    pub fn entry_cov(&self, a: Entry, b: Entry) -> f64 {
        let same = a.side == b.side;
        let mut c = self.shadow_cov(a.position, a.slot, b.position, b.slot, same);
        if same && a.slot == b.slot && a.relay == b.relay {
            c += self.params.fading_var;
        }
        c
    }

    /// The `2R × 2R` covariance block between the stacked vectors of two slots.
    pub fn sigma_block(
        &self,
        slot_a: usize,
        positions_a: &[Point],
        slot_b: usize,
        positions_b: &[Point],
    ) -> DMatrix<f64> {
        assert_eq!(positions_a.len(), positions_b.len());
        let r = positions_a.len();
        let ea: Vec<Entry> = slot_entries(slot_a, positions_a).collect();
        let eb: Vec<Entry> = slot_entries(slot_b, positions_b).collect();
        DMatrix::from_fn(2 * r, 2 * r, |i, j| self.entry_cov(ea[i], eb[j]))
    }

    /// Stacked prior mean `[αS ℓ; αD ℓ]` at the given relay positions.
    pub fn mean_block(&self, positions: &[Point]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * positions.len());
        for side in [Side::Source, Side::Dest] {
            for p in positions {
                out.push(self.mean_log(*p, side)?);
            }
        }
        Ok(out)
    }
}

/// One coordinate of the stacked log-gain vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub slot: usize,
    pub relay: usize,
    pub side: Side,
    pub position: Point,
}

/// Entries of one slot in stacking order: all `F`, then all `G`.
pub fn slot_entries(slot: usize, positions: &[Point]) -> impl Iterator<Item = Entry> + '_ {
    [Side::Source, Side::Dest].into_iter().flat_map(move |side| {
        positions.iter().enumerate().map(move |(relay, &position)| Entry {
            slot,
            relay,
            side,
            position,
        })
    })
}

/// Realized log-domain gains of one relay in one slot. `relay` is 0-based,
/// `slot` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGainObservation {
    pub slot: usize,
    pub relay: usize,
    pub position: Point,
    pub f_log: f64,
    pub g_log: f64,
    pub f_phase: f64,
    pub g_phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotBlock {
    pub slot: usize,
    pub observations: Vec<LogGainObservation>,
}

impl SlotBlock {
    pub fn positions(&self) -> Vec<Point> {
        self.observations.iter().map(|o| o.position).collect()
    }

    /// Log gains in stacking order.
    pub fn stacked(&self) -> Vec<f64> {
        let f = self.observations.iter().map(|o| o.f_log);
        let g = self.observations.iter().map(|o| o.g_log);
        f.chain(g).collect()
    }
}

/// Complex gains with `|f| = 10^((F+ρ)/20)` and the stored fading phase.
pub fn to_complex_gains(block: &SlotBlock, params: &ChannelParams) -> SlotChannels {
    let gain = |log: f64, phase: f64| {
        Complex::from_polar(10f64.powf((log + params.fading_mean_db) / 20.0), phase)
    };
    SlotChannels {
        f: block.observations.iter().map(|o| gain(o.f_log, o.f_phase)).collect(),
        g: block.observations.iter().map(|o| gain(o.g_log, o.g_phase)).collect(),
    }
}

/// Gaussian law of the next slot's stacked log gains given the history.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    pub slot: usize,
    pub positions: Vec<Point>,
    /// Conditional mean, length `2R`.
    pub mean: Vec<f64>,
    /// Lower Cholesky factor of the conditional covariance, row-major `2R × 2R`.
    pub chol: Vec<f64>,
    // L⁻¹K, one column per new entry.
    cross: Vec<Vec<f64>>,
}

impl ConditionalLaw {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `mean + L·eps`.
    pub fn transform(&self, eps: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|i| self.mean[i] + dot(&self.chol[i * m..i * m + i + 1], &eps[..=i]))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let eps: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.transform(&eps)
    }

    /// Conditional covariance `L Lᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.dim();
        let l = DMatrix::from_row_slice(m, m, &self.chol);
        &l * l.transpose()
    }
}

/// Relay trajectories with the log gains observed along them.
///
/// Holds the Cholesky factor of the covariance of the conditioning window
/// (plus jitter) and the whitened residual `L⁻¹(m − μ)`.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    model: ChannelModel,
    num_relays: usize,
    window: Option<usize>,
    blocks: Vec<SlotBlock>,
    window_start: usize,
    factor: PackedLower,
    whitened: Vec<f64>,
}

impl FieldHistory {
    /// `window = None` conditions on the full history.
    pub fn new(model: ChannelModel, num_relays: usize, window: Option<usize>) -> Self {
        FieldHistory {
            model,
            num_relays,
            window,
            blocks: Vec::new(),
            window_start: 0,
            factor: PackedLower::new(),
            whitened: Vec::new(),
        }
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn num_relays(&self) -> usize {
        self.num_relays
    }

    pub fn num_slots(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[SlotBlock] {
        &self.blocks
    }

    /// Blocks inside the conditioning window.
    pub fn window_blocks(&self) -> &[SlotBlock] {
        &self.blocks[self.window_start..]
    }

    pub fn factor(&self) -> &PackedLower {
        &self.factor
    }

    pub fn whitened(&self) -> &[f64] {
        &self.whitened
    }

    /// Conditioning entries in stacking order.
    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        self.window_blocks()
            .iter()
            .flat_map(|b| {
                let positions = b.positions();
                slot_entries(b.slot, &positions).collect::<Vec<_>>()
            })
    }

    fn stacked_residual(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.factor.dim());
        for b in self.window_blocks() {
            let mu = self.model.mean_block(&b.positions())?;
            out.extend(b.stacked().iter().zip(&mu).map(|(m, u)| m - u));
        }
        Ok(out)
    }

    /// Rebuilds the factor and whitened residual from scratch.
    pub fn refactor(&mut self) -> Result<()> {
        let entries: Vec<Entry> = self.entries().collect();
        let jitter = self.model.params.jitter();
        let model = self.model;
        self.factor = PackedLower::factorize(entries.len(), |i, j| {
            model.entry_cov(entries[i], entries[j]) + if i == j { jitter } else { 0.0 }
        })?;
        let mut z = self.stacked_residual()?;
        self.factor.forward_solve(&mut z);
        self.whitened = z;
        Ok(())
    }

    // Drops the oldest blocks once the window is exceeded.
    fn trim_window(&mut self) -> Result<()> {
        if let Some(w) = self.window {
            if self.blocks.len() - self.window_start > w {
                self.window_start = self.blocks.len() - w;
                self.refactor()?;
            }
        }
        Ok(())
    }

    /// Conditional law of the next slot at `positions`, given the window.
    pub fn conditional_law(&self, positions: &[Point]) -> Result<ConditionalLaw> {
        self.law_at(self.blocks.len() + 1, positions)
    }

    /// Conditional law of slot `slot` (after every held slot) at `positions`.
    pub fn law_at(&self, slot: usize, positions: &[Point]) -> Result<ConditionalLaw> {
        assert_eq!(positions.len(), self.num_relays, "one position per relay");
        let m = 2 * self.num_relays;
        let hist: Vec<Entry> = self.entries().collect();
        let new: Vec<Entry> = slot_entries(slot, positions).collect();

        let mut cross = Vec::with_capacity(m);
        for e in &new {
            let mut col: Vec<f64> = hist.iter().map(|h| self.model.entry_cov(*h, *e)).collect();
            self.factor.forward_solve(&mut col);
            cross.push(col);
        }

        let prior = self.model.mean_block(positions)?;
        let mean: Vec<f64> = (0..m)
            .map(|i| prior[i] + dot(&cross[i], &self.whitened))
            .collect();

        let jitter = self.model.params.jitter();
        let cov = |i: usize, j: usize| {
            self.model.entry_cov(new[i], new[j]) - dot(&cross[i], &cross[j])
                + if i == j { jitter } else { 0.0 }
        };
        let l = PackedLower::factorize(m, cov)?;
        let mut chol = vec![0.0; m * m];
        for i in 0..m {
            chol[i * m..i * m + i + 1].copy_from_slice(l.row(i));
        }
        Ok(ConditionalLaw {
            slot,
            positions: positions.to_vec(),
            mean,
            chol,
            cross,
        })
    }

    fn commit(
        &mut self,
        law: ConditionalLaw,
        values: &[f64],
        eps: Vec<f64>,
        phases: &[f64],
    ) -> Result<()> {
        let r = self.num_relays;
        let m = 2 * r;
        for i in 0..m {
            let mut row = law.cross[i].clone();
            row.extend_from_slice(&law.chol[i * m..i * m + i + 1]);
            self.factor.push_row(&row);
        }
        self.whitened.extend(eps);
        let observations = (0..r)
            .map(|i| LogGainObservation {
                slot: law.slot,
                relay: i,
                position: law.positions[i],
                f_log: values[i],
                g_log: values[r + i],
                f_phase: phases[i],
                g_phase: phases[r + i],
            })
            .collect();
        self.blocks.push(SlotBlock {
            slot: law.slot,
            observations,
        });
        self.trim_window()
    }

    /// Draws the next slot at `positions` from its conditional law, appends it
    /// and returns it. Fading phases are independent uniform on `[−π, π]`.
    pub fn sample_next_slot<R: Rng + ?Sized>(
        &mut self,
        positions: &[Point],
        rng: &mut R,
    ) -> Result<SlotBlock> {
        let law = self.conditional_law(positions)?;
        let m = law.dim();
        let eps: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let phases: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..=PI)).collect();
        let values = law.transform(&eps);
        self.commit(law, &values, eps, &phases)?;
        Ok(self.blocks.last().cloned().expect("block just pushed"))
    }

    /// Appends externally supplied log gains (stacking order) at `positions`.
    pub fn observe(&mut self, positions: &[Point], values: &[f64], phases: &[f64]) -> Result<()> {
        let law = self.conditional_law(positions)?;
        let m = law.dim();
        assert_eq!(values.len(), m);
        assert_eq!(phases.len(), m);
        // eps = L⁻¹(x − mean)
        let mut eps: Vec<f64> = values.iter().zip(&law.mean).map(|(x, u)| x - u).collect();
        for i in 0..m {
            let row = &law.chol[i * m..i * m + i + 1];
            eps[i] = (eps[i] - dot(&row[..i], &eps[..i])) / row[i];
        }
        self.commit(law, values, eps, phases)
    }
}
