//! Run configuration: a single TOML file, parsed, validated, then frozen
//! into the domain types. Unknown keys are rejected so typos cannot
//! silently fall back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demand::{DemandCurve, DemandVariant};
use crate::error::{Error, Result};
use crate::model::{ClaimModel, Payoff};
use crate::simulate::SimConfig;
use crate::solver::SolverConfig;

/// Top-level configuration. All currency fields share one unit; all time
/// fields are in years.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub payoff: PayoffBlock,
    pub demand: DemandBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// Per-client claim intensity, 1/year.
    pub lambda: f64,
    /// Number of clients in the whole market.
    pub market_size: f64,
    /// Horizon T, years.
    pub horizon: f64,
    /// Buyer risk aversion, 1/currency.
    pub eta: f64,
    /// Seller risk aversion, 1/currency; defaults to eta.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Initial wealth, currency.
    #[serde(default)]
    pub x0: f64,
    /// Claim-size law: (size in currency, probability) pairs.
    pub atoms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum PayoffBlock {
    /// (C_T - strike)^+ capped at cutoff - strike.
    Spread { strike: f64, cutoff: f64 },
    /// psi at lattice nodes 0, delta, 2 delta, ...; `tail` above the table.
    Tabulated { delta: f64, values: Vec<f64>, tail: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum DemandBlock {
    /// q(theta) = M (1 - theta/m) on [0, m].
    Linear { max_loading: f64 },
    /// q(theta) = M (1 - theta/m)^nu on [0, m].
    Power { max_loading: f64, nu: f64 },
    /// q(theta) = M - int_0^theta e^{-2 xi/(1+m)} H(xi) d xi with H a
    /// polynomial in xi (optionally times e^{2 xi/(1+m)}).
    Hfamily { max_loading: f64, coeffs: Vec<f64>, #[serde(default)] exp_scaled: bool },
    /// Monotone table of (theta, q) knots from (0, M) to (m, 0).
    Tabulated { max_loading: f64, points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub n_steps: usize,
    pub store_every: usize,
    /// Lattice spacing, currency; defaults to the claim-size grid step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self { n_steps: d.n_steps, store_every: d.store_every, delta: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimBlock {
    pub n_paths: usize,
    pub seed: u64,
    pub chunk_size: usize,
}

impl Default for SimBlock {
    fn default() -> Self {
        let d = SimConfig::default();
        Self { n_paths: d.n_paths, seed: d.seed, chunk_size: d.chunk_size }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    /// CSV destination; stdout when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Optional SVG plot destination.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
    /// Denominations N for the small-quantity limit N pi_s(1/N).
    pub denominations: Vec<u32>,
    /// Price queries (c, t, k).
    pub queries: Vec<(f64, f64, f64)>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_model(&self) -> Result<ClaimModel> {
        let m = &self.model;
        ClaimModel::new(m.lambda, m.market_size, m.horizon, m.eta, m.beta, m.atoms.clone())
            .map_err(|e| Error::Config(format!("model: {e}")))
    }

    pub fn build_payoff(&self) -> Result<Payoff> {
        match &self.payoff {
            PayoffBlock::Spread { strike, cutoff } => Payoff::spread(*strike, *cutoff),
            PayoffBlock::Tabulated { delta, values, tail } => {
                Payoff::tabulated(*delta, values.clone(), *tail)
            }
        }
        .map_err(|e| Error::Config(format!("payoff: {e}")))
    }

    pub fn build_curve(&self) -> Result<DemandCurve> {
        let m = &self.model;
        let a = self.build_model()?.fair_premium();
        let (variant, max_loading) = match &self.demand {
            DemandBlock::Linear { max_loading } => (DemandVariant::Linear, *max_loading),
            DemandBlock::Power { max_loading, nu } => (DemandVariant::Power { nu: *nu }, *max_loading),
            DemandBlock::Hfamily { max_loading, coeffs, exp_scaled } => (
                DemandVariant::HFamily { coeffs: coeffs.clone(), exp_scaled: *exp_scaled },
                *max_loading,
            ),
            DemandBlock::Tabulated { max_loading, points } => {
                (DemandVariant::Tabulated { points: points.clone() }, *max_loading)
            }
        };
        let curve = DemandCurve::new(variant, max_loading, m.market_size, a)
            .map_err(|e| Error::Config(format!("demand: {e}")))?;
        if matches!(curve.variant(), DemandVariant::HFamily { .. }) {
            curve.hfamily_validate().map_err(|e| Error::Config(format!("demand: {e}")))?;
        }
        Ok(curve)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        SolverConfig::new(self.solver.n_steps, self.solver.store_every, 1e-8)
            .map_err(|e| Error::Config(format!("solver: {e}")))
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        SimConfig::new(self.sim.n_paths, self.sim.seed, self.sim.chunk_size)
            .map_err(|e| Error::Config(format!("sim: {e}")))
    }
}
