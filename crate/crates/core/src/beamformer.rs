//! Per-slot amplify-and-forward beamforming.
//!
//! Minimizing relay power `wᴴDw` subject to `wᴴRw / (σ_D² + wᴴQw) ≥ ζ` has
//! optimal reciprocal power `V = λ_max(B) / (ζσ_D²)` with
//! `B = D^{-1/2}(R − ζQ)D^{-1/2}`. Because `D` and `Q` are diagonal and `R` is
//! rank one, `B = P₀vvᴴ − diag(ζσ²|g_i|²/D_ii)` with `v_i = f_i g_i / √D_ii`, so
//! its top eigenpair comes from a scalar secular equation.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::params::ChannelParams;

pub type C64 = Complex<f64>;

/// Realized complex gains of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotChannels {
    /// Source to relay.
    pub f: Vec<C64>,
    /// Relay to destination.
    pub g: Vec<C64>,
}

impl SlotChannels {
    pub fn num_relays(&self) -> usize {
        self.f.len()
    }
}

/// `D`, `R = P₀hhᴴ` and `Q` of the second-stage program. `D` and `Q` are kept
/// as their diagonals and `R` through `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondStageMatrices {
    pub d: Vec<f64>,
    pub h: Vec<C64>,
    pub q: Vec<f64>,
    pub source_power: f64,
}

impl SecondStageMatrices {
    pub fn r_dense(&self) -> DMatrix<C64> {
        let n = self.h.len();
        DMatrix::from_fn(n, n, |i, j| self.h[i] * self.h[j].conj() * self.source_power)
    }

    /// Dense `D^{-1/2}(R − ζQ)D^{-1/2}`.
    pub fn b_dense(&self, zeta: f64) -> DMatrix<C64> {
        let n = self.h.len();
        let r = self.r_dense();
        DMatrix::from_fn(n, n, |i, j| {
            let mut v = r[(i, j)];
            if i == j {
                v -= C64::from(zeta * self.q[i]);
            }
            v / (self.d[i] * self.d[j]).sqrt()
        })
    }

    /// The same `B` in rank-one-plus-diagonal form.
    pub fn b_structured(&self, zeta: f64) -> RankOneDiag {
        RankOneDiag {
            diag: self.q.iter().zip(&self.d).map(|(q, d)| -zeta * q / d).collect(),
            rho: self.source_power,
            v: self.h.iter().zip(&self.d).map(|(h, d)| h / d.sqrt()).collect(),
        }
    }
}

pub fn build_matrices(ch: &SlotChannels, params: &ChannelParams) -> SecondStageMatrices {
    let p0 = params.source_power;
    let s2 = params.relay_noise_power;
    SecondStageMatrices {
        d: ch.f.iter().map(|f| p0 * f.norm_sqr() + s2).collect(),
        h: ch.f.iter().zip(&ch.g).map(|(f, g)| f * g).collect(),
        q: ch.g.iter().map(|g| s2 * g.norm_sqr()).collect(),
        source_power: p0,
    }
}

/// Hermitian matrix `diag(diag) + rho·v·vᴴ` with `rho > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneDiag {
    pub diag: Vec<f64>,
    pub rho: f64,
    pub v: Vec<C64>,
}

impl RankOneDiag {
    pub fn dense(&self) -> DMatrix<C64> {
        let n = self.v.len();
        DMatrix::from_fn(n, n, |i, j| {
            let mut x = self.v[i] * self.v[j].conj() * self.rho;
            if i == j {
                x += C64::from(self.diag[i]);
            }
            x
        })
    }

    /// Largest eigenvalue and an (unnormalized) eigenvector.
    ///
    /// Components with `rho·|v_i|²` below rounding are deflated: their `d_i`
    /// are eigenvalues with eigenvector `e_i`. The rest contribute to the
    /// secular equation `1 = rho·Σ|v_i|²/(λ − d_i)`, whose largest root lies
    /// in `(max d_i, max d_i + rho·Σ|v_i|²]`.
    pub fn largest_eigenpair(&self) -> Result<(f64, Vec<C64>)> {
        let n = self.v.len();
        if n == 0 {
            return Err(Error::EigenFailure("empty matrix".into()));
        }
        let w: Vec<f64> = self.v.iter().map(|x| x.norm_sqr()).collect();
        let scale = self
            .diag
            .iter()
            .map(|d| d.abs())
            .fold(self.rho * w.iter().sum::<f64>(), f64::max);
        if !scale.is_finite() {
            return Err(Error::EigenFailure("non-finite input".into()));
        }
        let tiny = 4.0 * f64::EPSILON * scale;
        let active: Vec<usize> = (0..n).filter(|&i| self.rho * w[i] > tiny).collect();

        let deflated_top = (0..n)
            .filter(|i| !active.contains(i))
            .max_by(|&a, &b| self.diag[a].total_cmp(&self.diag[b]).then(b.cmp(&a)));

        let secular = if active.is_empty() {
            None
        } else {
            Some(self.secular_root(&active, &w)?)
        };

        match (secular, deflated_top) {
            (Some(lambda), Some(k)) if self.diag[k] > lambda => Ok((self.diag[k], unit(n, k))),
            (None, Some(k)) => Ok((self.diag[k], unit(n, k))),
            (Some(lambda), _) => {
                let mut u = vec![C64::from(0.0); n];
                for &i in &active {
                    u[i] = self.v[i] / (lambda - self.diag[i]);
                }
                Ok((lambda, u))
            }
            (None, None) => unreachable!("n > 0"),
        }
    }

    // Largest root over the active components, solved in the shifted variable
    // mu = λ − max d_i > 0 with safeguarded Newton.
    fn secular_root(&self, active: &[usize], w: &[f64]) -> Result<f64> {
        let dmax = active
            .iter()
            .map(|&i| self.diag[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let shift: Vec<f64> = active.iter().map(|&i| self.diag[i] - dmax).collect();
        let wa: Vec<f64> = active.iter().map(|&i| w[i]).collect();
        let rho = self.rho;
        let eval = |mu: f64| {
            let (mut s, mut ds) = (0.0, 0.0);
            for (wi, di) in wa.iter().zip(&shift) {
                let r = 1.0 / (mu - di);
                s += wi * r;
                ds += wi * r * r;
            }
            (1.0 - rho * s, rho * ds)
        };

        let (mut lo, mut hi) = (0.0, rho * wa.iter().sum::<f64>());
        let mut mu = hi;
        for _ in 0..300 {
            let (h, dh) = eval(mu);
            if h == 0.0 {
                return Ok(dmax + mu);
            }
            if h > 0.0 {
                hi = mu;
            } else {
                lo = mu;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                return Ok(dmax + 0.5 * (lo + hi));
            }
            let newton = mu - h / dh;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - mu).abs() <= f64::EPSILON * mu {
                return Ok(dmax + next);
            }
            mu = next;
        }
        Err(Error::EigenFailure("secular iteration did not converge".into()))
    }
}

fn unit(n: usize, k: usize) -> Vec<C64> {
    let mut u = vec![C64::from(0.0); n];
    u[k] = C64::from(1.0);
    u
}

/// Largest eigenvalue of a Hermitian matrix by dense eigendecomposition.
pub fn lambda_max_dense(m: &DMatrix<C64>) -> Result<f64> {
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("dense Hermitian solver did not converge".into()))?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Optimal beamformer of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolution {
    pub weights: Vec<C64>,
    pub lambda_max: f64,
    /// `λ_max(B) / (ζσ_D²)`, reported even when infeasible.
    pub value_v: f64,
    pub relay_power: f64,
    pub achieved_sinr: f64,
    pub feasible: bool,
}

pub fn solve_second_stage(ch: &SlotChannels, params: &ChannelParams) -> Result<BeamSolution> {
    let mats = build_matrices(ch, params);
    let zeta = params.sinr_threshold;
    let sd2 = params.dest_noise_power;
    let (lambda, u) = mats.b_structured(zeta).largest_eigenpair()?;
    let value_v = lambda / (zeta * sd2);
    let n = ch.num_relays();
    if !(lambda > 0.0) {
        return Ok(BeamSolution {
            weights: vec![C64::from(0.0); n],
            lambda_max: lambda,
            value_v,
            relay_power: 0.0,
            achieved_sinr: 0.0,
            feasible: false,
        });
    }
    // Scale so the SINR constraint is tight: c²·λ‖u‖² = ζσ_D².
    let unorm2: f64 = u.iter().map(|x| x.norm_sqr()).sum();
    let c = (zeta * sd2 / (lambda * unorm2)).sqrt();
    let weights: Vec<C64> = u
        .iter()
        .zip(&mats.d)
        .map(|(ui, di)| ui * (c / di.sqrt()))
        .collect();
    let (relay_power, achieved_sinr) = evaluate_weights(ch, &weights, params);
    Ok(BeamSolution {
        weights,
        lambda_max: lambda,
        value_v,
        relay_power,
        achieved_sinr,
        feasible: true,
    })
}

/// `(wᴴDw, wᴴRw / (σ_D² + wᴴQw))`.
pub fn evaluate_weights(ch: &SlotChannels, weights: &[C64], params: &ChannelParams) -> (f64, f64) {
    let mats = build_matrices(ch, params);
    let power: f64 = weights
        .iter()
        .zip(&mats.d)
        .map(|(w, d)| d * w.norm_sqr())
        .sum();
    let coherent: C64 = mats.h.iter().zip(weights).map(|(h, w)| h.conj() * w).sum();
    let signal = mats.source_power * coherent.norm_sqr();
    let noise: f64 = weights
        .iter()
        .zip(&mats.q)
        .map(|(w, q)| q * w.norm_sqr())
        .sum();
    let sinr = signal / (params.dest_noise_power + noise);
    (power, sinr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_params() -> ChannelParams {
        ChannelParams {
            source_power: 1.0,
            relay_noise_power: 0.1,
            dest_noise_power: 1.0,
            sinr_threshold: 1.0,
            ..Default::default()
        }
    }

    fn scalar_channel() -> SlotChannels {
        SlotChannels {
            f: vec![C64::from(10f64.sqrt())],
            g: vec![C64::from(2f64.sqrt())],
        }
    }

    fn random_channels(rng: &mut ChaCha8Rng, n: usize) -> SlotChannels {
        let mut draw = || C64::from_polar(10f64.powf(rng.random_range(-1.5..1.0)), rng.random_range(-3.0..3.0));
        SlotChannels {
            f: (0..n).map(|_| draw()).collect(),
            g: (0..n).map(|_| draw()).collect(),
        }
    }

    #[test]
    fn matrices_scalar_example() {
        let m = build_matrices(&scalar_channel(), &scalar_params());
        assert!((m.d[0] - 10.1).abs() < 1e-12);
        assert!((m.r_dense()[(0, 0)].re - 20.0).abs() < 1e-12);
        assert!((m.q[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn noiseless_relays_zero_q() {
        let p = ChannelParams {
            relay_noise_power: 0.0,
            ..scalar_params()
        };
        let ch = SlotChannels {
            f: vec![C64::new(1.0, 2.0), C64::new(0.3, 0.0)],
            g: vec![C64::new(0.5, 0.5), C64::new(2.0, -1.0)],
        };
        let m = build_matrices(&ch, &p);
        assert!(m.q.iter().all(|q| *q == 0.0));
        assert!((m.d[0] - 5.0).abs() < 1e-12 && (m.d[1] - 0.09).abs() < 1e-12);
    }

    #[test]
    fn scalar_closed_form() {
        let sol = solve_second_stage(&scalar_channel(), &scalar_params()).unwrap();
        assert!(sol.feasible);
        let expected = 19.8 / 10.1;
        assert!((sol.value_v - expected).abs() <= 1e-12 * expected);
        assert!((sol.value_v - 1.960_396_039_603_96).abs() < 1e-12);
        assert!((sol.achieved_sinr - 1.0).abs() < 1e-12);
        assert!((sol.relay_power * sol.value_v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_rank_one() {
        let a = RankOneDiag {
            diag: vec![0.0; 3],
            rho: 2.5,
            v: vec![C64::new(1.0, 1.0), C64::new(0.0, -2.0), C64::new(0.5, 0.0)],
        };
        let (l, _) = a.largest_eigenpair().unwrap();
        assert!((l - 2.5 * (2.0 + 4.0 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn deflated_component_can_dominate() {
        let a = RankOneDiag {
            diag: vec![-5.0, 1.0],
            rho: 1.0,
            v: vec![C64::new(0.1, 0.0), C64::new(0.0, 0.0)],
        };
        let (l, u) = a.largest_eigenpair().unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(u[1], C64::from(1.0));
    }

    #[test]
    fn secular_matches_dense_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let a = RankOneDiag {
                diag: (0..n).map(|_| -rng.random_range(0.0..3.0)).collect(),
                rho: rng.random_range(0.1..2.0),
                v: (0..n)
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect(),
            };
            let (l, u) = a.largest_eigenpair().unwrap();
            let d = lambda_max_dense(&a.dense()).unwrap();
            assert!((l - d).abs() <= 1e-10 * d.abs(), "{l} vs {d}");
            // A·u = λ·u
            let m = a.dense();
            let uv = nalgebra::DVector::from_vec(u.clone());
            let res = &m * &uv - &uv * C64::from(l);
            assert!(res.norm() <= 1e-9 * uv.norm() * l.abs().max(1.0));
        }
    }

    #[test]
    fn zero_weights_evaluate_to_zero() {
        let (p, s) = evaluate_weights(&scalar_channel(), &[C64::from(0.0)], &scalar_params());
        assert_eq!((p, s), (0.0, 0.0));
    }

    #[test]
    fn infeasible_slot_reports_nonpositive_value() {
        let p = ChannelParams {
            sinr_threshold: 1000.0,
            ..scalar_params()
        };
        let ch = SlotChannels {
            f: vec![C64::from(0.01)],
            g: vec![C64::from(1.0)],
        };
        let sol = solve_second_stage(&ch, &p).unwrap();
        assert!(!sol.feasible);
        assert!(sol.value_v <= 0.0);
        assert!(sol.weights.iter().all(|w| *w == C64::from(0.0)));
    }

    #[test]
    fn self_consistency_random_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = ChannelParams {
            relay_noise_power: 0.01,
            dest_noise_power: 0.05,
            sinr_threshold: 2.0,
            ..Default::default()
        };
        let mut checked = 0;
        while checked < 200 {
            let n = rng.random_range(1..=5);
            let ch = random_channels(&mut rng, n);
            let sol = solve_second_stage(&ch, &params).unwrap();
            if !sol.feasible {
                continue;
            }
            checked += 1;
            assert!((sol.achieved_sinr - 2.0).abs() <= 1e-6 * 2.0);
            assert!((sol.relay_power * sol.value_v - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn grid_search_over_two_relay_weights() {
        // Independent route: minimal power along each weight direction on a
        // dense grid, no eigen decomposition involved.
        let params = ChannelParams {
            relay_noise_power: 0.05,
            dest_noise_power: 0.2,
            sinr_threshold: 1.5,
            source_power: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let ch = random_channels(&mut rng, 2);
            let sol = solve_second_stage(&ch, &params).unwrap();
            if !sol.feasible {
                continue;
            }
            let m = build_matrices(&ch, &params);
            let mut best = f64::NEG_INFINITY;
            let (na, np) = (400, 400);
            for ia in 0..=na {
                let a = std::f64::consts::FRAC_PI_2 * ia as f64 / na as f64;
                for ip in 0..np {
                    let phi = std::f64::consts::TAU * ip as f64 / np as f64;
                    let w = [C64::from(a.cos()), C64::from_polar(a.sin(), phi)];
                    let coh: C64 = m.h.iter().zip(&w).map(|(h, w)| h.conj() * w).sum();
                    let num = m.source_power * coh.norm_sqr()
                        - params.sinr_threshold * (m.q[0] * w[0].norm_sqr() + m.q[1] * w[1].norm_sqr());
                    let den = m.d[0] * w[0].norm_sqr() + m.d[1] * w[1].norm_sqr();
                    let recip = num / (params.sinr_threshold * params.dest_noise_power * den);
                    best = best.max(recip);
                }
            }
            assert!(best <= sol.value_v * (1.0 + 1e-12));
            assert!(best >= sol.value_v * (1.0 - 1e-2), "{best} vs {}", sol.value_v);
        }
    }

    #[test]
    fn value_nondecreasing_in_g_without_relay_noise() {
        let params = ChannelParams {
            relay_noise_power: 0.0,
            dest_noise_power: 0.1,
            sinr_threshold: 3.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let n = rng.random_range(1..=4);
            let mut ch = random_channels(&mut rng, n);
            let before = solve_second_stage(&ch, &params).unwrap().value_v;
            let k = rng.random_range(0..n);
            ch.g[k] *= 1.3;
            let after = solve_second_stage(&ch, &params).unwrap().value_v;
            assert!(after >= before * (1.0 - 1e-12));
        }
    }

    proptest! {
        #[test]
        fn value_invariant_to_common_phase_rotation(
            seed in 0u64..1000, theta_f in -3.1f64..3.1, theta_g in -3.1f64..3.1
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=6);
            let ch = random_channels(&mut rng, n);
            let params = ChannelParams { relay_noise_power: 0.01, dest_noise_power: 0.01, sinr_threshold: 2.0, ..Default::default() };
            let base = solve_second_stage(&ch, &params).unwrap();
            let rf = C64::from_polar(1.0, theta_f);
            let rg = C64::from_polar(1.0, theta_g);
            let rotated = SlotChannels {
                f: ch.f.iter().map(|f| f * rf).collect(),
                g: ch.g.iter().map(|g| g * rg).collect(),
            };
            let rot = solve_second_stage(&rotated, &params).unwrap();
            prop_assert!((base.value_v - rot.value_v).abs() <= 1e-10 * base.value_v.abs().max(1e-300));
            // weights: unit phase leaves power and SINR unchanged
            let w: Vec<C64> = base.weights.iter().map(|w| w * rf).collect();
            let (p0, s0) = evaluate_weights(&ch, &base.weights, &params);
            let (p1, s1) = evaluate_weights(&ch, &w, &params);
            prop_assert!((p0 - p1).abs() <= 1e-12 * p0.max(1e-300));
            prop_assert!((s0 - s1).abs() <= 1e-12 * s0.max(1e-300));
        }
    }
}
