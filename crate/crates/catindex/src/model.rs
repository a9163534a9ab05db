//! Claims model and payoff definitions.
//!
//! The industry loss index is a compound Poisson process: claims arrive at
//! rate `lambda * market_size` and sizes are drawn from a discrete
//! distribution whose atoms all sit on a common currency grid. The grid
//! restriction is what turns the backward PIDEs into finite ODE systems.

use crate::error::{Error, Result};

/// Discrete claim-size law plus intensity, horizon, and risk aversions.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ClaimModel {
    /// Per-client claim intensity (1/year).
    pub lambda: f64,
    /// Number of potential clients in the market.
    pub market_size: f64,
    /// Horizon T (years).
    pub horizon: f64,
    /// Buyer risk aversion (1/currency).
    pub eta: f64,
    /// Seller risk aversion (1/currency); defaults to `eta` when unset.
    pub beta: f64,
    /// Claim-size atoms as (size, probability); probabilities sum to 1.
    atoms: Vec<(f64, f64)>,
    /// Common grid step dividing every atom size.
    grid_step: f64,
}

/// Approximate float gcd; tolerance scaled to the inputs.
fn float_gcd(mut a: f64, mut b: f64) -> f64 {
    let tol = 1e-9 * a.max(b);
    while b > tol {
        let r = a % b;
        a = b;
        b = if r < tol || (b - r) < tol { 0.0 } else { r };
    }
    a
}

impl ClaimModel {
    pub fn new(
        lambda: f64,
        market_size: f64,
        horizon: f64,
        eta: f64,
        beta: Option<f64>,
        atoms: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let beta = beta.unwrap_or(eta);
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        if !(market_size >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "market_size must be >= 1, got {market_size}"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
        }
        if !(eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be >= 0, got {eta}")));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("claim-size law needs at least one atom".into()));
        }
        for &(size, prob) in &atoms {
            if !(size > 0.0) {
                return Err(Error::InvalidParameter(format!("atom size must be > 0, got {size}")));
            }
            if !(prob > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "atom probability must be > 0, got {prob}"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "atom probabilities sum to {total}, expected 1 within 1e-12"
            )));
        }
        // Renormalize exactly so jump expectations cannot drift.
        let mut atoms: Vec<(f64, f64)> =
            atoms.into_iter().map(|(s, p)| (s, p / total)).collect();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut step = atoms[0].0;
        for &(size, _) in &atoms[1..] {
            step = float_gcd(size, step);
        }
        // Incommensurable sizes drive the gcd to the tolerance floor; a
        // lattice that fine is a modelling error, not a grid.
        if step < 1e-6 * atoms[0].0 {
            return Err(Error::InvalidParameter(format!(
                "atom sizes share no common grid step (gcd collapsed to {step})"
            )));
        }
        for &(size, _) in &atoms {
            let ratio = size / step;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                return Err(Error::InvalidParameter(format!(
                    "atom size {size} is not an integer multiple of grid step {step}"
                )));
            }
        }

        Ok(Self { lambda, market_size, horizon, eta, beta, atoms, grid_step: step })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Largest currency step dividing every atom size.
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    /// E(Y), the mean claim size.
    pub fn mean_claim(&self) -> f64 {
        self.atoms.iter().map(|&(s, p)| s * p).sum()
    }

    /// Fair annual premium per client, a = lambda * E(Y).
    pub fn fair_premium(&self) -> f64 {
        self.lambda * self.mean_claim()
    }

    /// E(e^{rho Y}).
    pub fn exp_jump_moment(&self, rho: f64) -> Result<f64> {
        let v: f64 = self.atoms.iter().map(|&(s, p)| p * (rho * s).exp()).sum();
        if !v.is_finite() {
            return Err(Error::MomentOverflow { rho });
        }
        Ok(v)
    }

    /// (1/rho) * E(e^{rho Y} - 1), evaluated without cancellation; equals
    /// E(Y) in the rho -> 0 limit.
    pub fn exp_jump_moment_m1_over(&self, rho: f64) -> Result<f64> {
        if rho == 0.0 {
            return Ok(self.mean_claim());
        }
        let v: f64 = self.atoms.iter().map(|&(s, p)| p * (rho * s).exp_m1()).sum::<f64>() / rho;
        if !v.is_finite() {
            return Err(Error::MomentOverflow { rho });
        }
        Ok(v)
    }
}

/// Bounded payoff on the terminal index level, constant above a cutoff.
#[derive(Debug, Clone)]
pub enum Payoff {
    /// CAT spread: psi(c) = max(0, min(c - strike, cutoff - strike)).
    Spread { strike: f64, cutoff: f64 },
    /// Values tabulated on the lattice c = i * delta for i = 0..values.len();
    /// psi(c) = tail for c >= cutoff.
    Tabulated { delta: f64, values: Vec<f64>, cutoff: f64, tail: f64 },
}

impl Payoff {
    pub fn spread(strike: f64, cutoff: f64) -> Result<Self> {
        if !(strike >= 0.0 && strike < cutoff) {
            return Err(Error::InvalidParameter(format!(
                "spread requires 0 <= strike < cutoff, got strike {strike}, cutoff {cutoff}"
            )));
        }
        Ok(Payoff::Spread { strike, cutoff })
    }

    pub fn tabulated(delta: f64, values: Vec<f64>, tail: f64) -> Result<Self> {
        if values.is_empty() || !(delta > 0.0) {
            return Err(Error::InvalidParameter("tabulated payoff needs delta > 0 and values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || !tail.is_finite() {
            return Err(Error::InvalidParameter("tabulated payoff values must be finite".into()));
        }
        let cutoff = (values.len() - 1) as f64 * delta;
        if (values[values.len() - 1] - tail).abs() > 1e-12 * tail.abs().max(1.0) {
            return Err(Error::InvalidParameter(
                "tabulated payoff must equal its tail value at the cutoff".into(),
            ));
        }
        Ok(Payoff::Tabulated { delta, values, cutoff, tail })
    }

    /// Level L above which the payoff is constant.
    pub fn cutoff(&self) -> f64 {
        match self {
            Payoff::Spread { cutoff, .. } => *cutoff,
            Payoff::Tabulated { cutoff, .. } => *cutoff,
        }
    }

    /// Tail value A = psi(c) for c >= L.
    pub fn tail_value(&self) -> f64 {
        match self {
            Payoff::Spread { strike, cutoff } => cutoff - strike,
            Payoff::Tabulated { tail, .. } => *tail,
        }
    }

    pub fn eval(&self, c: f64) -> f64 {
        match self {
            Payoff::Spread { strike, cutoff } => (c - strike).min(cutoff - strike).max(0.0),
            Payoff::Tabulated { delta, values, cutoff, tail } => {
                if c >= *cutoff {
                    *tail
                } else {
                    let i = (c / delta).round() as usize;
                    values[i.min(values.len() - 1)]
                }
            }
        }
    }
}
