//! Backward-in-time integration of the lattice ODE systems.
//!
//! With claim sizes on a common grid the backward PIDEs reduce to ODE
//! systems over the nodes c_i = i * delta, i = 0..n-1, spanning [0, L].
//! Beyond the payoff cutoff L the solutions are known in closed form, so the
//! lattice stops there and jumps past L read from an analytic tail rule.
//!
//! Three equations share the machinery:
//! * the nonlinear wealth-certainty equation for W (terminal k * psi),
//! * the linear seller transform g = e^{beta * pi_s} (terminal e^{beta k psi}),
//! * the linear risk-neutral expectation pi_0 (terminal psi).

use crate::demand::DemandCurve;
use crate::error::{Error, Result};
use crate::model::{ClaimModel, Payoff};
use crate::pricing::kappa;

/// Which backward equation a surface solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    /// Certainty-adjusted wealth value W(c, t) for quantity k.
    Wealth,
    /// Seller transform g(c, t) = E(e^{beta k psi(C_T)} | C_t = c).
    SellerTransform,
    /// Risk-neutral expectation pi_0(c, t) = E(psi(C_T) | C_t = c).
    RiskNeutral,
}

/// Node grid over [0, L] with claim atoms expressed in lattice steps.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub delta: f64,
    pub n_nodes: usize,
    /// Per atom: (steps on the lattice, probability, size).
    atoms: Vec<(usize, f64, f64)>,
}

impl Lattice {
    pub fn new(model: &ClaimModel, payoff: &Payoff, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        let cutoff = payoff.cutoff();
        let n_minus_1 = cutoff / delta;
        if (n_minus_1 - n_minus_1.round()).abs() > 1e-9 * n_minus_1.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {cutoff} is not an integer multiple of delta {delta}"
            )));
        }
        let n_nodes = n_minus_1.round() as usize + 1;
        let mut atoms = Vec::with_capacity(model.atoms().len());
        for &(size, prob) in model.atoms() {
            let steps = size / delta;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "claim atom {size} is not a positive integer multiple of delta {delta}"
                )));
            }
            atoms.push((steps.round() as usize, prob, size));
        }
        Ok(Self { delta, n_nodes, atoms })
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.delta
    }

    pub fn cutoff(&self) -> f64 {
        (self.n_nodes - 1) as f64 * self.delta
    }

    /// Snap c down to the nearest node index. Exact sums of atom sizes snap
    /// exactly; a small forward tolerance absorbs float noise.
    pub fn index_of(&self, c: f64) -> usize {
        let i = (c / self.delta + 1e-9).floor() as usize;
        i.min(self.n_nodes - 1)
    }

    pub fn atoms(&self) -> &[(usize, f64, f64)] {
        &self.atoms
    }
}

/// Closed-form value of a surface for c >= L.
#[derive(Debug, Clone, Copy)]
pub enum TailRule {
    /// W(c, t) = k A + kappa (T - t) above the cutoff.
    Wealth { k_times_a: f64, kappa: f64, horizon: f64 },
    /// Constant tail (e^{beta k A} for g, A for pi_0).
    Const(f64),
}

impl TailRule {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TailRule::Wealth { k_times_a, kappa, horizon } => k_times_a + kappa * (horizon - t),
            TailRule::Const(v) => v,
        }
    }
}

/// Time-step configuration for the backward integrator.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Number of fixed RK4 steps over [0, T].
    pub n_steps: usize,
    /// Keep every `store_every`-th slice (plus t = 0 and t = T).
    pub store_every: usize,
    /// Tolerance for the terminal residual self-check.
    pub tol_check: f64,
}

impl SolverConfig {
    pub fn new(n_steps: usize, store_every: usize, tol_check: f64) -> Result<Self> {
        if n_steps < 100 {
            return Err(Error::InvalidParameter(format!("n_steps must be >= 100, got {n_steps}")));
        }
        if store_every < 1 {
            return Err(Error::InvalidParameter("store_every must be >= 1".into()));
        }
        Ok(Self { n_steps, store_every, tol_check })
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { n_steps: 2000, store_every: 20, tol_check: 1e-8 }
    }
}

/// Lattice values at stored time slices, together with the tail closure.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub kind: SurfaceKind,
    /// Derivative quantity the surface was solved for (signed).
    pub k: f64,
    pub lattice: Lattice,
    /// Stored times, strictly decreasing from T down to 0.
    times: Vec<f64>,
    /// One node array per stored time.
    slices: Vec<Vec<f64>>,
    tail: TailRule,
    pub horizon: f64,
}

impl ValueSurface {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }

    pub fn tail(&self) -> &TailRule {
        &self.tail
    }

    /// Node values at an arbitrary t in [0, T]; linear interpolation between
    /// stored slices, no extrapolation past the endpoints.
    pub fn slice_at(&self, t: f64) -> Result<Vec<f64>> {
        if t < -1e-12 || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let t = t.clamp(0.0, self.horizon);
        // times are descending: times[0] = T, last = 0.
        let pos = self.times.iter().position(|&ti| ti <= t).unwrap_or(self.times.len() - 1);
        if pos == 0 || (self.times[pos] - t).abs() < 1e-15 {
            return Ok(self.slices[pos].clone());
        }
        let (t_hi, t_lo) = (self.times[pos - 1], self.times[pos]);
        let w = (t - t_lo) / (t_hi - t_lo);
        Ok(self.slices[pos]
            .iter()
            .zip(&self.slices[pos - 1])
            .map(|(&lo, &hi)| lo + w * (hi - lo))
            .collect())
    }

    /// Value at (c, t): tail rule for c >= L, snapped node otherwise.
    pub fn eval(&self, c: f64, t: f64) -> Result<f64> {
        if t < -1e-12 || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let t = t.clamp(0.0, self.horizon);
        if c >= self.lattice.cutoff() {
            return Ok(self.tail.value(t));
        }
        let i = self.lattice.index_of(c);
        let slice = self.slice_at(t)?;
        Ok(slice[i])
    }
}

/// E_Y(weight(Y) * f(c + Y)) per node; f read from the slice where c + Y
/// stays on the lattice and from `tail_value` otherwise.
pub fn jump_expectation(
    slice: &[f64],
    lattice: &Lattice,
    weights: &[f64],
    tail_value: f64,
) -> Vec<f64> {
    let n = slice.len();
    debug_assert_eq!(n, lattice.n_nodes);
    debug_assert_eq!(weights.len(), lattice.atoms().len());
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &(steps, prob, _)) in lattice.atoms().iter().enumerate() {
            let f = if i + steps < n { slice[i + steps] } else { tail_value };
            acc += weights[j] * prob * f;
        }
        *o = acc;
    }
    out
}

/// Time derivative of the W slice plus the per-node value of the
/// premium-flow argument wbar, needed for policy extraction.
pub struct WealthRhs {
    pub rhs: Vec<f64>,
    pub wbar: Vec<f64>,
}

/// Right-hand side of the W equation: W_t = -(M * what + mu(wbar)), with
/// what(c) = -(lambda/eta) E(e^{-eta dW} - 1) and
/// wbar(c) = -(lambda/eta) E((e^{eta Y} - 1) e^{-eta dW}),
/// dW = W(c + Y, t) - W(c, t). Tail values come from `tail` at time t.
pub fn rhs_w(
    slice: &[f64],
    t: f64,
    lattice: &Lattice,
    model: &ClaimModel,
    curve: &DemandCurve,
    tail: &TailRule,
) -> Result<WealthRhs> {
    let eta = model.eta;
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("wealth equation needs eta > 0".into()));
    }
    let lambda = model.lambda;
    let big_m = model.market_size;
    let n = slice.len();
    let tail_value = tail.value(t);
    let mut rhs = vec![0.0; n];
    let mut wbar = vec![0.0; n];
    for i in 0..n {
        let wc = slice[i];
        let mut s_hat = 0.0; // E(e^{-eta dW} - 1), via expm1
        let mut s_bar = 0.0; // E((e^{eta Y} - 1) e^{-eta dW})
        for &(steps, prob, size) in lattice.atoms() {
            let w_next = if i + steps < n { slice[i + steps] } else { tail_value };
            let x = -eta * (w_next - wc);
            if x > 700.0 {
                return Err(Error::MomentOverflow { rho: eta });
            }
            s_hat += prob * x.exp_m1();
            s_bar += prob * (eta * size).exp_m1() * x.exp();
        }
        let what = -(lambda / eta) * s_hat;
        let wb = -(lambda / eta) * s_bar;
        // Y >= 0 makes the argument of mu nonpositive throughout.
        debug_assert!(wb <= 1e-9 * (1.0 + wb.abs()), "wbar = {wb} > 0 at node {i}");
        wbar[i] = wb;
        rhs[i] = -(big_m * what + curve.mu_gamma(wb).value);
    }
    Ok(WealthRhs { rhs, wbar })
}

/// Right-hand side of the linear backward generator shared by g and pi_0:
/// v_t = -M lambda (E(v(c + Y)) - v(c)).
pub fn rhs_linear(slice: &[f64], lattice: &Lattice, model: &ClaimModel, tail_value: f64) -> Vec<f64> {
    let ones = vec![1.0; lattice.atoms().len()];
    let expect = jump_expectation(slice, lattice, &ones, tail_value);
    let rate = model.market_size * model.lambda;
    slice.iter().zip(expect).map(|(&v, e)| -rate * (e - v)).collect()
}

fn terminal_slice(kind: SurfaceKind, k: f64, lattice: &Lattice, model: &ClaimModel, payoff: &Payoff) -> Vec<f64> {
    (0..lattice.n_nodes)
        .map(|i| {
            let psi = payoff.eval(lattice.node(i));
            match kind {
                SurfaceKind::Wealth => k * psi,
                SurfaceKind::SellerTransform => (model.beta * k * psi).exp(),
                SurfaceKind::RiskNeutral => psi,
            }
        })
        .collect()
}

/// Classic fixed-step RK4 from t = T down to t = 0. Deterministic
/// bit-for-bit for a fixed configuration.
pub fn integrate_backward(
    kind: SurfaceKind,
    k: f64,
    model: &ClaimModel,
    curve: &DemandCurve,
    payoff: &Payoff,
    config: &SolverConfig,
) -> Result<ValueSurface> {
    let lattice = Lattice::new(model, payoff, model.grid_step())?;
    integrate_backward_on(kind, k, model, curve, payoff, config, lattice)
}

/// Same as [`integrate_backward`] but with an explicit lattice (callers may
/// refine delta below the model grid step).
pub fn integrate_backward_on(
    kind: SurfaceKind,
    k: f64,
    model: &ClaimModel,
    curve: &DemandCurve,
    payoff: &Payoff,
    config: &SolverConfig,
    lattice: Lattice,
) -> Result<ValueSurface> {
    let horizon = model.horizon;
    let tail = match kind {
        SurfaceKind::Wealth => TailRule::Wealth {
            k_times_a: k * payoff.tail_value(),
            kappa: kappa(model, curve)?,
            horizon,
        },
        SurfaceKind::SellerTransform => TailRule::Const((model.beta * k * payoff.tail_value()).exp()),
        SurfaceKind::RiskNeutral => TailRule::Const(payoff.tail_value()),
    };

    let n_steps = config.n_steps;
    let dt = horizon / n_steps as f64;
    let mut y = terminal_slice(kind, k, &lattice, model, payoff);

    let mut times = Vec::new();
    let mut slices = Vec::new();
    times.push(horizon);
    slices.push(y.clone());

    let rhs = |slice: &[f64], t: f64| -> Result<Vec<f64>> {
        match kind {
            SurfaceKind::Wealth => Ok(rhs_w(slice, t, &lattice, model, curve, &tail)?.rhs),
            SurfaceKind::SellerTransform | SurfaceKind::RiskNeutral => {
                Ok(rhs_linear(slice, &lattice, model, tail.value(t)))
            }
        }
    };

    for step in 0..n_steps {
        let t = horizon - step as f64 * dt;
        let h = -dt;
        let k1 = rhs(&y, t)?;
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(&v, &d)| v + 0.5 * h * d).collect();
        let k2 = rhs(&y2, t + 0.5 * h)?;
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(&v, &d)| v + 0.5 * h * d).collect();
        let k3 = rhs(&y3, t + 0.5 * h)?;
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(&v, &d)| v + h * d).collect();
        let k4 = rhs(&y4, t + h)?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = horizon - (step + 1) as f64 * dt;
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { t: t_next, node: i });
            }
        }
        if (step + 1) % config.store_every == 0 || step + 1 == n_steps {
            // Pin the last slice to exactly t = 0 against dt rounding.
            times.push(if step + 1 == n_steps { 0.0 } else { t_next });
            slices.push(y.clone());
        }
    }

    Ok(ValueSurface { kind, k, lattice, times, slices, tail, horizon })
}
