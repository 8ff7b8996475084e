//! Monte Carlo check of the relaxation `λ_max(E{B}) ≤ E{λ_max(B)}` at the
//! positions chosen for the next slot.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::beamformer::{build_matrices, SlotChannels, C64};
use crate::error::Result;
use crate::field::FieldHistory;
use crate::geometry::Point;
use crate::posterior::{objective_e, HistoryContext};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenCheck {
    pub trial: usize,
    /// Slot whose positions were checked (the one after the decision).
    pub slot: usize,
    pub draws: usize,
    /// `max_i E_i` from the closed-form surrogate.
    pub surrogate: f64,
    /// Largest Monte Carlo mean of a diagonal entry of `B`.
    pub exact_diag_max: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

impl JensenCheck {
    /// Whether both the surrogate and the exact diagonal stay below the
    /// estimated `E{λ_max(B)}` plus three standard errors.
    pub fn passed(&self) -> bool {
        let bound = self.mc_mean + 3.0 * self.mc_se;
        self.surrogate <= bound && self.exact_diag_max <= bound
    }
}

/// Draws `draws` next-slot channels at `positions` from the conditional law
/// given `history`, with uniform fading phases.
pub fn sample_channels<R: Rng + ?Sized>(
    history: &FieldHistory,
    positions: &[Point],
    draws: usize,
    rng: &mut R,
    mut visit: impl FnMut(&SlotChannels) -> Result<()>,
) -> Result<()> {
    let law = history.conditional_law(positions)?;
    let r = positions.len();
    let rho = history.model().params.fading_mean_db;
    let gain = |log: f64, phase: f64| C64::from_polar(10f64.powf((log + rho) / 20.0), phase);
    let mut eps = vec![0.0; 2 * r];
    for _ in 0..draws {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let x = law.transform(&eps);
        let ch = SlotChannels {
            f: (0..r).map(|i| gain(x[i], rng.random_range(-PI..=PI))).collect(),
            g: (0..r).map(|i| gain(x[r + i], rng.random_range(-PI..=PI))).collect(),
        };
        visit(&ch)?;
    }
    Ok(())
}

pub fn jensen_check<R: Rng + ?Sized>(
    history: &FieldHistory,
    positions: &[Point],
    trial: usize,
    draws: usize,
    rng: &mut R,
) -> Result<JensenCheck> {
    let params = history.model().params;
    let zeta = params.sinr_threshold;
    let r = positions.len();
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut diag = vec![0.0; r];
    sample_channels(history, positions, draws, rng, |ch| {
        let b = build_matrices(ch, &params).b_structured(zeta);
        let (lambda, _) = b.largest_eigenpair()?;
        sum += lambda;
        sum2 += lambda * lambda;
        for (acc, (d, v)) in diag.iter_mut().zip(b.diag.iter().zip(&b.v)) {
            *acc += d + b.rho * v.norm_sqr();
        }
        Ok(())
    })?;
    let n = draws as f64;
    let mc_mean = sum / n;
    let var = ((sum2 - n * mc_mean * mc_mean) / (n - 1.0)).max(0.0);

    let ctx = HistoryContext::new(history);
    let mut surrogate = f64::NEG_INFINITY;
    for p in positions {
        surrogate = surrogate.max(objective_e(*p, &ctx)?);
    }
    Ok(JensenCheck {
        trial,
        slot: history.num_slots() + 1,
        draws,
        surrogate,
        exact_diag_max: diag.iter().map(|d| d / n).fold(f64::NEG_INFINITY, f64::max),
        mc_mean,
        mc_se: (var / n).sqrt(),
    })
}

/// Monte Carlo mean and standard error of the real and imaginary parts of
/// every off-diagonal entry `B_ij`, `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalStats {
    pub draws: usize,
    /// `(i, j, mean_re, se_re, mean_im, se_im)`.
    pub entries: Vec<(usize, usize, f64, f64, f64, f64)>,
}

impl OffDiagonalStats {
    pub fn max_z_score(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| [e.2.abs() / e.3, e.4.abs() / e.5])
            .fold(0.0, f64::max)
    }
}

pub fn off_diagonal_stats<R: Rng + ?Sized>(
    history: &FieldHistory,
    positions: &[Point],
    draws: usize,
    rng: &mut R,
) -> Result<OffDiagonalStats> {
    let params = history.model().params;
    let r = positions.len();
    let pairs: Vec<(usize, usize)> = (0..r)
        .flat_map(|i| (i + 1..r).map(move |j| (i, j)))
        .collect();
    // per pair: Σre, Σre², Σim, Σim²
    let mut acc = vec![[0.0; 4]; pairs.len()];
    sample_channels(history, positions, draws, rng, |ch| {
        let b = build_matrices(ch, &params).b_structured(params.sinr_threshold);
        for (a, &(i, j)) in acc.iter_mut().zip(&pairs) {
            let x = b.v[i] * b.v[j].conj() * b.rho;
            a[0] += x.re;
            a[1] += x.re * x.re;
            a[2] += x.im;
            a[3] += x.im * x.im;
        }
        Ok(())
    })?;
    let n = draws as f64;
    let moments = |s: f64, s2: f64| {
        let m = s / n;
        let var = ((s2 - n * m * m) / (n - 1.0)).max(0.0);
        (m, (var / n).sqrt())
    };
    let entries = pairs
        .iter()
        .zip(&acc)
        .map(|(&(i, j), a)| {
            let (mr, sr) = moments(a[0], a[1]);
            let (mi, si) = moments(a[2], a[3]);
            (i, j, mr, sr, mi, si)
        })
        .collect();
    Ok(OffDiagonalStats { draws, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ChannelModel;
    use crate::params::{ChannelParams, NetworkGeometry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn history(slots: usize) -> (FieldHistory, Vec<Point>) {
        let geo = NetworkGeometry::default();
        let model = ChannelModel::new(ChannelParams::default(), &geo);
        let mut h = FieldHistory::new(model, geo.num_relays, None);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..slots {
            h.sample_next_slot(&geo.initial_positions, &mut rng).unwrap();
        }
        (h, geo.initial_positions)
    }

    #[test]
    fn relaxation_holds_after_two_slots() {
        let (h, pos) = history(2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = jensen_check(&h, &pos, 0, 2000, &mut rng).unwrap();
        assert_eq!(c.slot, 3);
        assert!(c.passed(), "{c:?}");
        assert!(c.mc_se > 0.0);
    }

    #[test]
    fn off_diagonal_has_zero_mean() {
        let (h, pos) = history(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = off_diagonal_stats(&h, &pos, 20_000, &mut rng).unwrap();
        assert_eq!(s.entries.len(), 3);
        assert!(s.max_z_score() < 4.0, "{s:?}");
    }
}
