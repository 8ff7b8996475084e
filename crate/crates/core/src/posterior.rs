//! Conditional moments of a candidate relay position given the causal history.
//!
//! The log gains `(G_i, F_i)` at a candidate point for the next slot are
//! jointly Gaussian with the observed history, so their conditional law is
//! Gaussian with
//!
//! ```text
//! μ_G = α_D ℓ + c_G Σ⁻¹(m − μ)        var_G = η² + σ_ξ² − c_G Σ⁻¹ c_Gᵀ
//! ```
//!
//! and likewise for `F`. The log-normal moments then give
//! `E|g|² = 10^{ρ/10} exp(κ μ_G + κ²/2 var_G)` with `κ = ln10/10`, and
//! `E|g|²/|f|² = exp(κ(μ_G − μ_F) + κ²/2 [1 −1] Σ_GF [1 −1]ᵀ)`.

use std::f64::consts::LN_10;

use crate::error::{Error, Result};
use crate::field::{ChannelModel, FieldHistory, Side};
use crate::geometry::Point;
use crate::linalg::dot;
use crate::params::ChannelParams;

const KAPPA: f64 = LN_10 / 10.0;
const VAR_TOLERANCE: f64 = 1e-8;

/// Per-slot precomputation shared by every candidate evaluation.
#[derive(Debug, Clone)]
pub struct HistoryContext<'a> {
    history: &'a FieldHistory,
    /// `Σ⁻¹(m − μ)` over the conditioning window.
    residual: Vec<f64>,
    // (position, slot) of each relay in each window block, block-major.
    sites: Vec<(Point, usize)>,
    target_slot: usize,
}

impl<'a> HistoryContext<'a> {
    /// Context for candidates of the slot following the last held one.
    pub fn new(history: &'a FieldHistory) -> Self {
        let mut residual = history.whitened().to_vec();
        history.factor().backward_solve_transpose(&mut residual);
        let sites = history
            .window_blocks()
            .iter()
            .flat_map(|b| b.observations.iter().map(move |o| (o.position, b.slot)))
            .collect();
        HistoryContext {
            history,
            residual,
            sites,
            target_slot: history.num_slots() + 1,
        }
    }

    pub fn history(&self) -> &'a FieldHistory {
        self.history
    }

    pub fn model(&self) -> &'a ChannelModel {
        self.history.model()
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn target_slot(&self) -> usize {
        self.target_slot
    }

    /// Cross-covariances between the candidate's `side` log gain and every
    /// conditioning entry. Fading is white, so only shadowing contributes.
    pub fn cross_cov_row(&self, candidate: Point, side: Side) -> Vec<f64> {
        let (g, f) = self.cross_cov_rows(candidate);
        match side {
            Side::Dest => g,
            Side::Source => f,
        }
    }

    /// `(c_G, c_F)` in one pass.
    pub fn cross_cov_rows(&self, candidate: Point) -> (Vec<f64>, Vec<f64>) {
        let model = self.model();
        let r = self.history.num_relays();
        let eta2 = model.params.shadow_power;
        let att = model.bs_attenuation();
        let n = self.residual.len();
        let (mut cg, mut cf) = (vec![0.0; n], vec![0.0; n]);
        for (b, chunk) in self.sites.chunks(r).enumerate() {
            let base = 2 * r * b;
            for (j, &(p, slot)) in chunk.iter().enumerate() {
                let k = eta2 * model.kernel(candidate, self.target_slot, p, slot);
                // F_j entry, then G_j entry
                cg[base + j] = att * k;
                cf[base + j] = k;
                cg[base + r + j] = k;
                cf[base + r + j] = att * k;
            }
        }
        (cg, cf)
    }
}

/// Conditional Gaussian law of `(G_i, F_i)` at a candidate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowPosterior {
    pub mu_g: f64,
    pub mu_f: f64,
    pub var_g: f64,
    /// `[[var_G, cov_GF], [cov_GF, var_F]]`.
    pub cross_cov: [[f64; 2]; 2],
}

impl ShadowPosterior {
    pub fn var_f(&self) -> f64 {
        self.cross_cov[1][1]
    }

    /// Variance of `G − F`.
    pub fn diff_var(&self) -> f64 {
        let c = &self.cross_cov;
        (c[0][0] - 2.0 * c[0][1] + c[1][1]).max(0.0)
    }
}

fn clamp_var(v: f64) -> Result<f64> {
    if v < -VAR_TOLERANCE {
        Err(Error::PosteriorDegeneracy(v))
    } else {
        Ok(v.max(0.0))
    }
}

/// Conditions the candidate's log gains on the history in `ctx`.
pub fn condition(candidate: Point, ctx: &HistoryContext<'_>) -> Result<ShadowPosterior> {
    let model = ctx.model();
    let p = &model.params;
    let prior_var = p.shadow_power + p.fading_var;
    let prior_cov = p.shadow_power * model.bs_attenuation();
    let alpha_g = model.mean_log(candidate, Side::Dest)?;
    let alpha_f = model.mean_log(candidate, Side::Source)?;

    let (mut ug, mut uf) = ctx.cross_cov_rows(candidate);
    let mu_g = alpha_g + dot(&ug, &ctx.residual);
    let mu_f = alpha_f + dot(&uf, &ctx.residual);
    // c Σ⁻¹ cᵀ = ‖L⁻¹cᵀ‖²
    ctx.history.factor().forward_solve2(&mut ug, &mut uf);
    let var_g = clamp_var(prior_var - dot(&ug, &ug))?;
    let var_f = clamp_var(prior_var - dot(&uf, &uf))?;
    let cov = prior_cov - dot(&ug, &uf);
    Ok(ShadowPosterior {
        mu_g,
        mu_f,
        var_g,
        cross_cov: [[var_g, cov], [cov, var_f]],
    })
}

/// `E{|g|² | history}`.
pub fn expected_g2(post: &ShadowPosterior, params: &ChannelParams) -> f64 {
    10f64.powf(params.fading_mean_db / 10.0)
        * (KAPPA * post.mu_g + 0.5 * KAPPA * KAPPA * post.var_g).exp()
}

/// `E{|g|²/|f|² | history}`; the fading mean cancels.
pub fn expected_g2_over_f2(post: &ShadowPosterior) -> f64 {
    (KAPPA * (post.mu_g - post.mu_f) + 0.5 * KAPPA * KAPPA * post.diff_var()).exp()
}

/// High-SNR surrogate `E|g|² − (ζσ²/P₀)·E|g|²/|f|²` for one relay at `candidate`.
pub fn objective_e(candidate: Point, ctx: &HistoryContext<'_>) -> Result<f64> {
    let post = condition(candidate, ctx)?;
    Ok(objective_from_posterior(&post, &ctx.model().params))
}

pub fn objective_from_posterior(post: &ShadowPosterior, params: &ChannelParams) -> f64 {
    let penalty = params.sinr_threshold * params.relay_noise_power / params.source_power;
    expected_g2(post, params) - penalty * expected_g2_over_f2(post)
}
