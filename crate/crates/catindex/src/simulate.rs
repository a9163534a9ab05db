//! Monte-Carlo engine for the controlled wealth process.
//!
//! Paths are generated in chunks, each chunk on its own counter-based RNG
//! stream, so results are bit-identical for a fixed (seed, chunk_size,
//! n_paths) regardless of how many workers run. Premium flow between policy
//! re-evaluations is integrated in closed form (the rate is constant on a
//! piece), so the only discretization in X is the policy grid itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::demand::DemandCurve;
use crate::error::{Error, Result};
use crate::model::{ClaimModel, Payoff};
use crate::pricing::PolicySurface;
use crate::solver::ValueSurface;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Paths per worker stream.
    pub chunk_size: usize,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64, chunk_size: usize) -> Result<Self> {
        if n_paths < 1 {
            return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
        }
        if chunk_size < 1 {
            return Err(Error::InvalidParameter("chunk_size must be >= 1".into()));
        }
        Ok(Self { n_paths, seed, chunk_size })
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, seed: 42, chunk_size: 4096 }
    }
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Run `score` once per path on chunked, reproducible RNG streams and
/// aggregate in fixed chunk order.
pub fn chunked_mc<F>(config: &SimConfig, score: F) -> McEstimate
where
    F: Fn(&mut ChaCha12Rng) -> f64 + Sync,
{
    let n = config.n_paths;
    let chunk = config.chunk_size;
    let n_chunks = n.div_ceil(chunk);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
            rng.set_stream(ci as u64 + 1);
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk).min(n);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in lo..hi {
                let v = score(&mut rng);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for (s, q) in partials {
        sum += s;
        sum_sq += q;
    }
    let mean = sum / n as f64;
    let std_error = if n > 1 {
        let var = ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
        (var / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    McEstimate { mean, std_error, n }
}

/// One realization of the index randomness: jump times on (from_t, T],
/// claim sizes, and the uniform ownership marks.
#[derive(Debug, Clone, Default)]
pub struct IndexPath {
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
    pub marks: Vec<f64>,
}

impl IndexPath {
    pub fn terminal_index(&self, from_c: f64) -> f64 {
        from_c + self.sizes.iter().sum::<f64>()
    }
}

/// Sample arrivals at rate lambda * M on (from_t, T] with i.i.d. sizes.
pub fn sample_index_path(model: &ClaimModel, from_t: f64, rng: &mut impl Rng) -> IndexPath {
    let rate = model.lambda * model.market_size;
    let mut path = IndexPath::default();
    let mut t = from_t;
    loop {
        let u: f64 = rng.gen::<f64>();
        t += -u.max(f64::MIN_POSITIVE).ln() / rate;
        if t > model.horizon {
            break;
        }
        path.times.push(t);
        path.sizes.push(draw_claim_size(model, rng));
        path.marks.push(rng.gen::<f64>());
    }
    path
}

fn draw_claim_size(model: &ClaimModel, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(size, prob) in model.atoms() {
        acc += prob;
        if u <= acc {
            return size;
        }
    }
    model.atoms().last().unwrap().0
}

/// Batch sampler for tests and diagnostics.
pub fn sample_index_paths(
    model: &ClaimModel,
    _from_c: f64,
    from_t: f64,
    config: &SimConfig,
) -> Vec<IndexPath> {
    let chunk = config.chunk_size;
    let n = config.n_paths;
    let n_chunks = n.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|ci| {
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
            rng.set_stream(ci as u64 + 1);
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk).min(n);
            (lo..hi).map(move |_| sample_index_path(model, from_t, &mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// A risk-loading rule in feedback form.
pub trait Policy: Sync {
    fn theta(&self, c: f64, t: f64) -> f64;
}

impl Policy for PolicySurface {
    fn theta(&self, c: f64, t: f64) -> f64 {
        self.eval(c, t)
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> Policy for F {
    fn theta(&self, c: f64, t: f64) -> f64 {
        self(c, t)
    }
}

/// Controlled wealth path evaluated at jumps and at T.
#[derive(Debug, Clone)]
pub struct WealthPath {
    pub jump_times: Vec<f64>,
    pub claim_sizes: Vec<f64>,
    /// 1{U_k <= q(theta at the jump)/M} per jump.
    pub owned: Vec<bool>,
    /// X immediately after each jump.
    pub x_at_jumps: Vec<f64>,
    /// C immediately after each jump.
    pub c_at_jumps: Vec<f64>,
    pub x_terminal: f64,
    pub c_terminal: f64,
}

/// Premium accrued over (t1, t2] at index level c, with the policy held
/// piecewise constant between the ascending re-evaluation times in `grid`.
fn premium_flow(
    curve: &DemandCurve,
    policy: &dyn Policy,
    grid: &[f64],
    c: f64,
    t1: f64,
    t2: f64,
) -> f64 {
    let a = curve.fair_premium;
    let mut acc = 0.0;
    let mut s = t1;
    let start = grid.partition_point(|&g| g <= t1);
    for &g in &grid[start..] {
        if g >= t2 {
            break;
        }
        let theta = policy.theta(c, s);
        acc += a * (1.0 + theta) * curve.q_eval(theta) * (g - s);
        s = g;
    }
    let theta = policy.theta(c, s);
    acc + a * (1.0 + theta) * curve.q_eval(theta) * (t2 - s)
}

/// Deterministic wealth evolution given the path randomness. Coupled
/// comparisons (same `IndexPath`, different policies) are exact.
#[allow(clippy::too_many_arguments)]
pub fn evolve_wealth(
    model: &ClaimModel,
    curve: &DemandCurve,
    policy: &dyn Policy,
    grid: &[f64],
    x0: f64,
    from_c: f64,
    from_t: f64,
    path: &IndexPath,
) -> WealthPath {
    let mut x = x0;
    let mut c = from_c;
    let mut t = from_t;
    let n = path.times.len();
    let mut out = WealthPath {
        jump_times: path.times.clone(),
        claim_sizes: path.sizes.clone(),
        owned: Vec::with_capacity(n),
        x_at_jumps: Vec::with_capacity(n),
        c_at_jumps: Vec::with_capacity(n),
        x_terminal: 0.0,
        c_terminal: 0.0,
    };
    for i in 0..n {
        let tau = path.times[i];
        x += premium_flow(curve, policy, grid, c, t, tau);
        let theta_at_jump = policy.theta(c, tau);
        let owned = path.marks[i] <= curve.q_eval(theta_at_jump) / model.market_size;
        if owned {
            x -= path.sizes[i];
        }
        c += path.sizes[i];
        out.owned.push(owned);
        out.x_at_jumps.push(x);
        out.c_at_jumps.push(c);
        t = tau;
    }
    x += premium_flow(curve, policy, grid, c, t, model.horizon);
    out.x_terminal = x;
    out.c_terminal = c;
    out
}

fn policy_grid(policy: &PolicySurface) -> Vec<f64> {
    let mut grid: Vec<f64> = policy.times.iter().rev().copied().collect();
    grid.dedup();
    grid
}

/// Summary statistics of terminal wealth under a feedback policy.
pub fn simulate_wealth(
    model: &ClaimModel,
    curve: &DemandCurve,
    policy: &PolicySurface,
    x0: f64,
    from_c: f64,
    from_t: f64,
    config: &SimConfig,
) -> McEstimate {
    let grid = policy_grid(policy);
    chunked_mc(config, |rng| {
        let path = sample_index_path(model, from_t, rng);
        evolve_wealth(model, curve, policy, &grid, x0, from_c, from_t, &path).x_terminal
    })
}

/// One row of the verification report.
#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub quantity: String,
    pub estimate: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub z_score: f64,
}

/// Cross-check the solved value function by simulation.
///
/// Simulates the controlled wealth process under the feedback-optimal
/// loading from (from_c, t = 0, x0), estimates E(-e^{-eta (X_T + k psi)}),
/// and compares to -e^{-eta x0 - eta W(from_c, 0)}. Also runs the two
/// perturbed constant policies theta* +/- 0.1; their rows report the
/// positive exceedance over the optimal estimate in standard-error units
/// (beating the optimum beyond noise is the failure mode).
#[allow(clippy::too_many_arguments)]
pub fn verify_value_function(
    model: &ClaimModel,
    curve: &DemandCurve,
    payoff: &Payoff,
    k: f64,
    w_surface: &ValueSurface,
    from_c: f64,
    x0: f64,
    config: &SimConfig,
) -> Result<Vec<VerifyRow>> {
    let eta = model.eta;
    let policy = PolicySurface::from_wealth_surface(w_surface, model, curve)?;
    let grid = policy_grid(&policy);
    let utility = |x_t: f64, c_t: f64| -(-eta * (x_t + k * payoff.eval(c_t))).exp();

    let run = |p: &dyn Policy| {
        chunked_mc(config, |rng| {
            let path = sample_index_path(model, 0.0, rng);
            let wp = evolve_wealth(model, curve, p, &grid, x0, from_c, 0.0, &path);
            utility(wp.x_terminal, wp.c_terminal)
        })
    };

    let optimal = run(&policy);
    let analytic = -(-eta * x0 - eta * w_surface.eval(from_c, 0.0)?).exp();
    let mut rows = vec![VerifyRow {
        quantity: format!("utility_optimal_k{k}"),
        estimate: optimal.mean,
        std_error: optimal.std_error,
        analytic,
        z_score: (optimal.mean - analytic) / optimal.std_error,
    }];

    let theta_star = policy.eval(from_c, 0.0);
    for (label, shift) in [("plus", 0.1), ("minus", -0.1)] {
        let theta = theta_star + shift;
        let perturbed = run(&(move |_c: f64, _t: f64| theta));
        let se = (perturbed.std_error.powi(2) + optimal.std_error.powi(2)).sqrt();
        let exceedance = ((perturbed.mean - optimal.mean) / se).max(0.0);
        rows.push(VerifyRow {
            quantity: format!("utility_perturbed_{label}_k{k}"),
            estimate: perturbed.mean,
            std_error: perturbed.std_error,
            analytic: optimal.mean,
            z_score: exceedance,
        });
    }
    Ok(rows)
}

/// Plain Monte-Carlo estimate of pi_0(c, t) = E(psi(C_T) | C_t = c).
pub fn mc_risk_neutral(
    model: &ClaimModel,
    payoff: &Payoff,
    from_c: f64,
    from_t: f64,
    config: &SimConfig,
) -> McEstimate {
    chunked_mc(config, |rng| {
        let path = sample_index_path(model, from_t, rng);
        payoff.eval(path.terminal_index(from_c))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::kappa;
    use crate::solver::{integrate_backward, SolverConfig, SurfaceKind};
    use crate::testutil::*;

    #[test]
    fn poisson_jump_count_mean() {
        let model = example_model();
        let config = SimConfig::new(100_000, 7, 4096).unwrap();
        let paths = sample_index_paths(&model, 0.0, 0.0, &config);
        let mean_jumps: f64 =
            paths.iter().map(|p| p.times.len() as f64).sum::<f64>() / paths.len() as f64;
        // lambda M T = 25; 3 sigma of the sample mean with var = 25.
        let sigma = (25.0f64 / paths.len() as f64).sqrt();
        assert!((mean_jumps - 25.0).abs() < 3.0 * sigma, "mean jumps {mean_jumps}");

        let mean_increment: f64 =
            paths.iter().map(|p| p.sizes.iter().sum::<f64>()).sum::<f64>() / paths.len() as f64;
        // Wald: E = 25 * 2.75e5; Var = lambda M T E(Y^2).
        let ey2 = model
            .atoms()
            .iter()
            .map(|&(s, p)| p * s * s)
            .sum::<f64>();
        let sigma = (25.0 * ey2 / paths.len() as f64).sqrt();
        assert!((mean_increment - 6.875e6).abs() < 3.0 * sigma, "mean increment {mean_increment}");
    }

    #[test]
    fn from_horizon_means_no_jumps() {
        let model = example_model();
        let config = SimConfig::new(500, 3, 64).unwrap();
        for p in sample_index_paths(&model, 1e7, model.horizon, &config) {
            assert!(p.times.is_empty());
            assert_eq!(p.terminal_index(1e7), 1e7);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let model = example_model();
        let config = SimConfig::new(10_000, 99, 512).unwrap();
        let a = mc_risk_neutral(&model, &example_payoff(), 1.5e7, 0.0, &config);
        let b = mc_risk_neutral(&model, &example_payoff(), 1.5e7, 0.0, &config);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn max_loading_policy_freezes_wealth() {
        let (model, curve, _) = example_setup();
        let policy = PolicySurface::constant(2.0, model.horizon, 2.0);
        let config = SimConfig::new(2000, 5, 256).unwrap();
        let stats = simulate_wealth(&model, &curve, &policy, 1234.5, 0.0, 0.0, &config);
        assert_eq!(stats.mean, 1234.5);
        assert_eq!(stats.std_error, 0.0);
    }

    #[test]
    fn zero_loading_is_fair_game() {
        // theta = 0: drift a M exactly offsets expected owned claims.
        let (model, curve, _) = example_setup();
        let policy = PolicySurface::constant(0.0, model.horizon, 2.0);
        let config = SimConfig::new(100_000, 11, 4096).unwrap();
        let stats = simulate_wealth(&model, &curve, &policy, 0.0, 0.0, 0.0, &config);
        assert!(
            stats.mean.abs() < 3.0 * stats.std_error,
            "mean {} se {}",
            stats.mean,
            stats.std_error
        );
    }

    #[test]
    fn wealth_path_structure() {
        let (model, curve, _) = example_setup();
        let policy = PolicySurface::constant(1.0, model.horizon, 2.0);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..200 {
            let path = sample_index_path(&model, 0.0, &mut rng);
            let wp = evolve_wealth(&model, &curve, &policy, &[], 0.0, 0.0, 0.0, &path);
            // C nondecreasing, piecewise constant with jumps Y_k.
            let mut c_prev = 0.0;
            for (i, &c) in wp.c_at_jumps.iter().enumerate() {
                assert!(c >= c_prev);
                assert_eq!(c - c_prev, wp.claim_sizes[i]);
                c_prev = c;
            }
            assert_eq!(wp.c_terminal, c_prev);
            // Premium rate between jumps is a(1+theta)q(theta) with theta = 1.
            let rate = 2750.0 * 2.0 * curve.q_eval(1.0);
            let mut t_prev = 0.0;
            let mut x_prev = 0.0;
            for i in 0..wp.jump_times.len() {
                let x_before = x_prev + rate * (wp.jump_times[i] - t_prev);
                let expect = x_before - if wp.owned[i] { wp.claim_sizes[i] } else { 0.0 };
                assert!((wp.x_at_jumps[i] - expect).abs() < 1e-6);
                x_prev = wp.x_at_jumps[i];
                t_prev = wp.jump_times[i];
            }
        }
    }

    #[test]
    fn thinning_law_chi_square() {
        // With constant theta the owned-claims count is Poisson(q(theta)
        // lambda T). Chi-square goodness of fit at the 1% level.
        let (model, curve, _) = example_setup();
        let theta = 1.0;
        let rate = curve.q_eval(theta) * model.lambda * model.horizon; // 12.5
        let policy = PolicySurface::constant(theta, model.horizon, 2.0);
        let n_paths = 100_000;
        let config = SimConfig::new(n_paths, 2024, 4096).unwrap();
        let paths = sample_index_paths(&model, 0.0, 0.0, &config);
        let mut counts = std::collections::HashMap::new();
        for p in &paths {
            let wp = evolve_wealth(&model, &curve, &policy, &[], 0.0, 0.0, 0.0, p);
            *counts.entry(wp.owned.iter().filter(|&&o| o).count()).or_insert(0usize) += 1;
        }
        // Poisson pmf, pooling the tails so expected counts stay >= 5.
        let pmf = |j: usize| {
            let mut log_p = -rate + j as f64 * rate.ln();
            for i in 1..=j {
                log_p -= (i as f64).ln();
            }
            log_p.exp()
        };
        let max_k = 40usize;
        let mut bins: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
        let mut obs_acc = 0.0;
        let mut exp_acc = 0.0;
        let mut tail_prob = 1.0;
        for j in 0..=max_k {
            let p = pmf(j);
            tail_prob -= p;
            obs_acc += *counts.get(&j).unwrap_or(&0) as f64;
            exp_acc += p * n_paths as f64;
            if exp_acc >= 5.0 {
                bins.push((obs_acc, exp_acc));
                obs_acc = 0.0;
                exp_acc = 0.0;
            }
        }
        let tail_obs: f64 =
            counts.iter().filter(|(&j, _)| j > max_k).map(|(_, &c)| c as f64).sum::<f64>() + obs_acc;
        bins.push((tail_obs, exp_acc + tail_prob.max(0.0) * n_paths as f64));
        let chi2: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
        let dof = bins.len() - 1;
        let crit = statrs::distribution::ContinuousCDF::inverse_cdf(
            &statrs::distribution::ChiSquared::new(dof as f64).unwrap(),
            0.99,
        );
        assert!(chi2 < crit, "chi2 {chi2} >= critical {crit} with {dof} dof");
    }

    #[test]
    fn clamp_dominance_pathwise() {
        // A policy wandering outside [0, m] never beats its clamp on any
        // coupled inter-jump increment.
        let (model, curve, _) = example_setup();
        let raw = |c: f64, t: f64| -0.5 + 3.0 * ((c / 1e6 + 40.0 * t).sin().abs());
        let clamped = move |c: f64, t: f64| raw(c, t).clamp(0.0, 2.0);
        let config = SimConfig::new(2_000, 77, 256).unwrap();
        let paths = sample_index_paths(&model, 0.0, 0.0, &config);
        for p in &paths {
            let wr = evolve_wealth(&model, &curve, &raw, &[], 0.0, 0.0, 0.0, p);
            let wc = evolve_wealth(&model, &curve, &clamped, &[], 0.0, 0.0, 0.0, p);
            assert_eq!(wr.owned, wc.owned, "thinning must be identical under coupling");
            let mut prev = (0.0, 0.0);
            for i in 0..p.times.len() {
                let inc_raw = wr.x_at_jumps[i] - prev.0;
                let inc_clamped = wc.x_at_jumps[i] - prev.1;
                assert!(inc_clamped >= inc_raw - 1e-9, "path increment violates dominance");
                prev = (wr.x_at_jumps[i], wc.x_at_jumps[i]);
            }
            assert!(wc.x_terminal - wc.x_at_jumps.last().map_or(0.0, |_| prev.1)
                >= wr.x_terminal - wr.x_at_jumps.last().map_or(0.0, |_| prev.0) - 1e-9);
        }
    }

    #[test]
    fn verify_k0_against_closed_form() {
        let (model, curve, payoff) = example_setup();
        let solver_config = SolverConfig::new(400, 4, 1e-8).unwrap();
        let w0 =
            integrate_backward(SurfaceKind::Wealth, 0.0, &model, &curve, &payoff, &solver_config)
                .unwrap();
        let config = SimConfig::new(100_000, 31, 4096).unwrap();
        let rows =
            verify_value_function(&model, &curve, &payoff, 0.0, &w0, 1e7, 0.0, &config).unwrap();
        let opt = &rows[0];
        let kappa_t = kappa(&model, &curve).unwrap() * model.horizon;
        let target = -(-model.eta * kappa_t).exp();
        assert!((opt.analytic - target).abs() < 1e-6 * target.abs());
        assert!(opt.z_score.abs() <= 3.0, "z = {}", opt.z_score);
        for row in &rows[1..] {
            assert!(row.z_score <= 3.0, "{}: exceedance {}", row.quantity, row.z_score);
        }
    }

    #[test]
    fn implied_w_is_x0_invariant() {
        let (model, curve, payoff) = example_setup();
        let solver_config = SolverConfig::new(400, 4, 1e-8).unwrap();
        let w0 =
            integrate_backward(SurfaceKind::Wealth, 0.0, &model, &curve, &payoff, &solver_config)
                .unwrap();
        let config = SimConfig::new(50_000, 8, 4096).unwrap();
        let implied: Vec<f64> = [0.0, 1e6]
            .iter()
            .map(|&x0| {
                let rows =
                    verify_value_function(&model, &curve, &payoff, 0.0, &w0, 1e7, x0, &config)
                        .unwrap();
                -(-rows[0].estimate).ln() / model.eta - x0
            })
            .collect();
        // Same randomness, exponential utility: the implied W must agree to
        // within the MC noise scale.
        assert!(
            (implied[0] - implied[1]).abs() < 1e-6 * implied[0].abs(),
            "implied W: {} vs {}",
            implied[0],
            implied[1]
        );
    }

    #[test]
    fn mc_risk_neutral_trivial_cases() {
        let model = example_model();
        let config = SimConfig::new(2000, 4, 256).unwrap();
        // All-tail payoff: exactly A with zero standard error.
        let flat = crate::model::Payoff::tabulated(1e5, vec![2e7; 301], 2e7).unwrap();
        let est = mc_risk_neutral(&model, &flat, 0.0, 0.0, &config);
        assert_eq!(est.mean, 2e7);
        assert_eq!(est.std_error, 0.0);
        // From t = T: psi(c) exactly.
        let payoff = example_payoff();
        let est = mc_risk_neutral(&model, &payoff, 1.5e7, model.horizon, &config);
        assert_eq!(est.mean, payoff.eval(1.5e7));
    }
}
