//! Prices and policies read off the solved surfaces: buyer/seller
//! indifference prices, the optimal risk loading in feedback form, seller
//! certainty equivalence, the denomination limit, and the risk-neutral
//! limit price.

use crate::demand::DemandCurve;
use crate::error::{Error, Result};
use crate::model::ClaimModel;
use crate::solver::{rhs_w, SurfaceKind, TailRule, ValueSurface};

/// Point at which a price or loading is requested.
#[derive(Debug, Clone, Copy)]
pub struct PriceQuery {
    /// Index level (currency).
    pub c: f64,
    /// Valuation time (years).
    pub t: f64,
    /// Quantity of the derivative (signed).
    pub k: f64,
}

/// z0 = -(1/eta) lambda (E(e^{eta Y}) - 1); tends to -a as eta -> 0.
pub fn z_zero(model: &ClaimModel) -> Result<f64> {
    Ok(-model.lambda * model.exp_jump_moment_m1_over(model.eta)?)
}

/// kappa = mu(z0), the no-derivative certainty growth rate. The k = 0 value
/// surface is W(c, t) = kappa (T - t).
pub fn kappa(model: &ClaimModel, curve: &DemandCurve) -> Result<f64> {
    Ok(curve.mu_gamma(z_zero(model)?).value)
}

fn require_wealth(surface: &ValueSurface, k: f64) -> Result<f64> {
    if surface.kind != SurfaceKind::Wealth || surface.k != k {
        return Err(Error::MissingSurface { k });
    }
    match surface.tail() {
        TailRule::Wealth { kappa, .. } => Ok(*kappa),
        TailRule::Const(_) => Err(Error::MissingSurface { k }),
    }
}

/// Buyer's indifference price p_b(c, t, k) = W(c, t, k) - kappa (T - t).
pub fn indifference_buy_price(query: &PriceQuery, w_surface: &ValueSurface) -> Result<f64> {
    let kappa = require_wealth(w_surface, query.k)?;
    let w = w_surface.eval(query.c, query.t)?;
    Ok(w - kappa * (w_surface.horizon - query.t))
}

/// Seller's indifference price p_s(k) = -p_b(-k), read from the surface
/// solved for quantity -k.
pub fn indifference_sell_price(query: &PriceQuery, w_surface_neg_k: &ValueSurface) -> Result<f64> {
    let neg = PriceQuery { k: -query.k, ..*query };
    Ok(-indifference_buy_price(&neg, w_surface_neg_k)?)
}

/// Feedback-optimal risk loading theta*(c, t) = gamma(wbar(c, t)) for the
/// quantity the surface was solved for. Reverts to gamma(z0) above the
/// cutoff, where the payoff is deterministic.
pub fn optimal_loading(
    query: &PriceQuery,
    w_surface: &ValueSurface,
    model: &ClaimModel,
    curve: &DemandCurve,
) -> Result<f64> {
    require_wealth(w_surface, query.k)?;
    if query.c >= w_surface.lattice.cutoff() {
        return Ok(curve.mu_gamma(z_zero(model)?).argmax);
    }
    let slice = w_surface.slice_at(query.t)?;
    let wbar = rhs_w(&slice, query.t, &w_surface.lattice, model, curve, w_surface.tail())?.wbar;
    let i = w_surface.lattice.index_of(query.c);
    Ok(curve.mu_gamma(wbar[i]).argmax)
}

/// theta*(c, t) on the stored lattice times, for simulation and plotting.
#[derive(Debug, Clone)]
pub struct PolicySurface {
    /// Stored times, descending from T.
    pub times: Vec<f64>,
    /// One loading array per stored time.
    pub values: Vec<Vec<f64>>,
    pub delta: f64,
    pub cutoff: f64,
    /// Loading used above the cutoff (and the k = 0 loading).
    pub tail_loading: f64,
    pub max_loading: f64,
}

impl PolicySurface {
    /// Derive the feedback policy from a solved W surface.
    pub fn from_wealth_surface(
        w_surface: &ValueSurface,
        model: &ClaimModel,
        curve: &DemandCurve,
    ) -> Result<Self> {
        require_wealth(w_surface, w_surface.k)?;
        let tail_loading = curve.mu_gamma(z_zero(model)?).argmax;
        let mut values = Vec::with_capacity(w_surface.times().len());
        for (idx, slice) in w_surface.slices().iter().enumerate() {
            let t = w_surface.times()[idx];
            let wbar = rhs_w(slice, t, &w_surface.lattice, model, curve, w_surface.tail())?.wbar;
            values.push(wbar.iter().map(|&z| curve.mu_gamma(z).argmax).collect());
        }
        Ok(Self {
            times: w_surface.times().to_vec(),
            values,
            delta: w_surface.lattice.delta,
            cutoff: w_surface.lattice.cutoff(),
            tail_loading,
            max_loading: curve.max_loading,
        })
    }

    /// Constant policy, independent of (c, t).
    pub fn constant(theta: f64, horizon: f64, max_loading: f64) -> Self {
        Self {
            times: vec![horizon, 0.0],
            values: vec![vec![theta], vec![theta]],
            delta: f64::INFINITY,
            cutoff: f64::INFINITY,
            tail_loading: theta,
            max_loading,
        }
    }

    /// Loading at (c, t); snaps c to the lattice, picks the nearest stored
    /// time at or below t (the policy is piecewise constant on the grid).
    pub fn eval(&self, c: f64, t: f64) -> f64 {
        if c >= self.cutoff {
            return self.tail_loading;
        }
        // times are descending; pick the first stored time at or below t.
        let slice_idx = self.times.partition_point(|&ti| ti > t + 1e-15).min(self.times.len() - 1);
        let row = &self.values[slice_idx];
        let i = ((c / self.delta + 1e-9).floor() as usize).min(row.len() - 1);
        row[i]
    }
}

/// Seller certainty equivalence pi_s(c, t, k) = (1/beta) log g(c, t).
pub fn certainty_equivalence_seller(
    query: &PriceQuery,
    g_surface: &ValueSurface,
    model: &ClaimModel,
) -> Result<f64> {
    if g_surface.kind != SurfaceKind::SellerTransform || g_surface.k != query.k {
        return Err(Error::MissingSurface { k: query.k });
    }
    let g = g_surface.eval(query.c, query.t)?;
    if g <= 0.0 {
        return Err(Error::TransformBreakdown { g, c: query.c, t: query.t });
    }
    Ok(g.ln() / model.beta)
}

/// N * pi_s(c, t, 1/N) for each N; the sequence converges to pi_0.
pub fn denomination_limit(
    query: &PriceQuery,
    n_list: &[u64],
    g_surfaces: &[ValueSurface],
    model: &ClaimModel,
) -> Result<Vec<f64>> {
    n_list
        .iter()
        .map(|&n| {
            let k = 1.0 / n as f64;
            let surface = g_surfaces
                .iter()
                .find(|s| s.kind == SurfaceKind::SellerTransform && s.k == k)
                .ok_or(Error::MissingSurface { k })?;
            let q = PriceQuery { k, ..*query };
            Ok(n as f64 * certainty_equivalence_seller(&q, surface, model)?)
        })
        .collect()
}

/// Risk-neutral limit price p_0(c, t, k) = k * pi_0(c, t).
pub fn risk_neutral_price(query: &PriceQuery, pi0_surface: &ValueSurface) -> Result<f64> {
    if pi0_surface.kind != SurfaceKind::RiskNeutral {
        return Err(Error::MissingSurface { k: query.k });
    }
    Ok(query.k * pi0_surface.eval(query.c, query.t)?)
}

/// p_b(c, t, 1) - pi_0(c, t); nonnegative in all of the worked examples,
/// meaning a denominated sale can clear.
pub fn tradability_gap(
    query: &PriceQuery,
    w_surface_k1: &ValueSurface,
    pi0_surface: &ValueSurface,
) -> Result<f64> {
    let q1 = PriceQuery { k: 1.0, ..*query };
    let pb = indifference_buy_price(&q1, w_surface_k1)?;
    let pi0 = pi0_surface.eval(query.c, query.t)?;
    Ok(pb - pi0)
}
