//! Demand curves q(theta) and the premium-flow envelope mu(z).
//!
//! mu(z) = max over loadings alpha in [0, m] of q(alpha) * (a(1+alpha) + z),
//! and gamma(z) is the maximizer that drives the optimal risk loading in
//! feedback form. Linear demand has closed forms; the other curve families
//! are maximized numerically (grid scan plus golden-section refinement,
//! smallest maximizer on ties).

use crate::error::{Error, Result};

/// Maximized premium-flow objective and its maximizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuResult {
    /// mu(z) = q(gamma) * (a(1+gamma) + z).
    pub value: f64,
    /// gamma(z) in [0, m]; smallest maximizer on ties.
    pub argmax: f64,
}

#[derive(Debug, Clone)]
pub enum DemandVariant {
    /// q(theta) = M * min(1, max(1 - theta/m, 0)).
    Linear,
    /// q(theta) = M * (1 - (theta/m)^nu) on [0, m], nu > 0.
    Power { nu: f64 },
    /// q(theta) = M - integral_0^theta e^{-2 xi/(1+m)} H(xi) d xi, where
    /// H(xi) = poly(coeffs, xi), optionally times e^{2 xi/(1+m)}.
    HFamily { coeffs: Vec<f64>, exp_scaled: bool },
    /// Sampled (theta, q) pairs, monotone cubic interpolation in between.
    Tabulated { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone)]
pub struct DemandCurve {
    variant: DemandVariant,
    /// Loading above which demand vanishes.
    pub max_loading: f64,
    /// Market size M = q(0).
    pub market_size: f64,
    /// Fair premium a, cached for mu evaluation.
    pub fair_premium: f64,
    /// Cached interpolant for variants whose q is not closed-form.
    interp: Option<Pchip>,
}

impl DemandCurve {
    pub fn new(
        variant: DemandVariant,
        max_loading: f64,
        market_size: f64,
        fair_premium: f64,
    ) -> Result<Self> {
        if !(max_loading > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "max_loading must be > 0, got {max_loading}"
            )));
        }
        if !(market_size >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "market_size must be >= 1, got {market_size}"
            )));
        }
        if !(fair_premium > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fair_premium must be > 0, got {fair_premium}"
            )));
        }
        let interp = match &variant {
            DemandVariant::Linear => None,
            DemandVariant::Power { nu } => {
                if !(*nu > 0.0) {
                    return Err(Error::InvalidParameter(format!("nu must be > 0, got {nu}")));
                }
                None
            }
            DemandVariant::HFamily { coeffs, exp_scaled } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidParameter("H needs polynomial coefficients".into()));
                }
                Some(hfamily_interpolant(coeffs, *exp_scaled, max_loading, market_size))
            }
            DemandVariant::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidParameter("tabulated demand needs >= 2 points".into()));
                }
                let first = points[0];
                let last = points[points.len() - 1];
                if first.0 != 0.0 || last.0 != max_loading {
                    return Err(Error::InvalidParameter(
                        "tabulated demand must cover [0, max_loading]".into(),
                    ));
                }
                if (first.1 - market_size).abs() > 1e-9 * market_size
                    || last.1.abs() > 1e-9 * market_size
                {
                    return Err(Error::InvalidParameter(
                        "tabulated demand must run from q(0) = M to q(m) = 0".into(),
                    ));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) || !(w[1].1 < w[0].1) {
                        return Err(Error::InvalidParameter(
                            "tabulated demand must be strictly decreasing".into(),
                        ));
                    }
                }
                let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
                Some(Pchip::new(xs, ys))
            }
        };
        Ok(Self { variant, max_loading, market_size, fair_premium, interp })
    }

    pub fn variant(&self) -> &DemandVariant {
        &self.variant
    }

    /// Number of insured clients at loading theta; M below 0, zero above m.
    pub fn q_eval(&self, theta: f64) -> f64 {
        let m = self.max_loading;
        if theta <= 0.0 {
            return self.market_size;
        }
        if theta >= m {
            return 0.0;
        }
        match &self.variant {
            DemandVariant::Linear => self.market_size * (1.0 - theta / m),
            DemandVariant::Power { nu } => self.market_size * (1.0 - (theta / m).powf(*nu)),
            DemandVariant::HFamily { .. } | DemandVariant::Tabulated { .. } => {
                self.interp.as_ref().unwrap().eval(theta).clamp(0.0, self.market_size)
            }
        }
    }

    fn objective(&self, alpha: f64, z: f64) -> f64 {
        self.q_eval(alpha) * (self.fair_premium * (1.0 + alpha) + z)
    }

    /// mu(z) and its smallest maximizer gamma(z).
    pub fn mu_gamma(&self, z: f64) -> MuResult {
        let a = self.fair_premium;
        let m = self.max_loading;
        let big_m = self.market_size;
        match &self.variant {
            DemandVariant::Linear => {
                if z <= -a * (m + 1.0) {
                    MuResult { value: 0.0, argmax: m }
                } else if z >= a * (m - 1.0) {
                    MuResult { value: big_m * (a + z), argmax: 0.0 }
                } else {
                    let s = a * (1.0 + m) + z;
                    MuResult {
                        value: big_m * s * s / (4.0 * a * m),
                        argmax: (a * (m - 1.0) - z) / (2.0 * a),
                    }
                }
            }
            _ => self.maximize_numeric(z),
        }
    }

    /// Grid scan over [0, m] followed by golden-section refinement.
    fn maximize_numeric(&self, z: f64) -> MuResult {
        const GRID: usize = 1024;
        let m = self.max_loading;
        let h = m / GRID as f64;
        let mut best_i = 0;
        let mut best_v = self.objective(0.0, z);
        for i in 1..=GRID {
            let v = self.objective(i as f64 * h, z);
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        let lo = if best_i == 0 { 0.0 } else { (best_i - 1) as f64 * h };
        let hi = if best_i == GRID { m } else { (best_i + 1) as f64 * h };
        let argmax = golden_section_max(|x| self.objective(x, z), lo, hi, 1e-10);
        let value = self.objective(argmax, z);
        // The boundary theta = m always yields exactly 0.
        if value <= 0.0 {
            MuResult { value: 0.0, argmax: m }
        } else {
            MuResult { value, argmax }
        }
    }

    /// Independent oracle for `mu_gamma`: dense scan with caller-chosen grid
    /// density, then local golden refinement. Kept as a separate code path.
    pub fn brute_force_mu(&self, z: f64, grid_n: usize) -> MuResult {
        assert!(grid_n >= 1000, "brute_force_mu needs grid_n >= 1000");
        let m = self.max_loading;
        let h = m / grid_n as f64;
        let mut best_i = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..=grid_n {
            let v = self.objective(i as f64 * h, z);
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        let lo = (best_i.saturating_sub(1)) as f64 * h;
        let hi = ((best_i + 1).min(grid_n)) as f64 * h;
        let argmax = golden_section_max(|x| self.objective(x, z), lo, hi, 1e-12 * m.max(1.0));
        let value = self.objective(argmax, z);
        if value <= 0.0 {
            MuResult { value: 0.0, argmax: m }
        } else {
            MuResult { value, argmax }
        }
    }

    /// Check the H-family admissibility conditions on a dense grid:
    /// H > 0 and H' > 0 on (0, m), and the normalization integral equals M.
    pub fn hfamily_validate(&self) -> Result<()> {
        let (coeffs, exp_scaled) = match &self.variant {
            DemandVariant::HFamily { coeffs, exp_scaled } => (coeffs, *exp_scaled),
            _ => return Err(Error::InvalidParameter("hfamily_validate needs an HFamily curve".into())),
        };
        let m = self.max_loading;
        let n = 4096;
        for i in 1..n {
            let xi = m * i as f64 / n as f64;
            let h = hfamily_h(coeffs, exp_scaled, m, xi);
            if !(h > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "condition (iii) violated: H({xi}) = {h} is not positive"
                )));
            }
            let hp = hfamily_h_prime(coeffs, exp_scaled, m, xi);
            if !(hp > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "condition (ii) violated: H'({xi}) = {hp} is not positive"
                )));
            }
        }
        let integral = adaptive_simpson(
            &|xi| (-2.0 * xi / (1.0 + m)).exp() * hfamily_h(coeffs, exp_scaled, m, xi),
            0.0,
            m,
            1e-10,
        );
        if (integral - self.market_size).abs() > 1e-8 * self.market_size {
            return Err(Error::InvalidParameter(format!(
                "condition (iv) violated: normalization integral {integral} != M = {}",
                self.market_size
            )));
        }
        Ok(())
    }
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_deriv_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
}

fn hfamily_h(coeffs: &[f64], exp_scaled: bool, m: f64, xi: f64) -> f64 {
    let p = poly_eval(coeffs, xi);
    if exp_scaled {
        p * (2.0 * xi / (1.0 + m)).exp()
    } else {
        p
    }
}

fn hfamily_h_prime(coeffs: &[f64], exp_scaled: bool, m: f64, xi: f64) -> f64 {
    let p = poly_eval(coeffs, xi);
    let pp = poly_deriv_eval(coeffs, xi);
    if exp_scaled {
        (pp + p * 2.0 / (1.0 + m)) * (2.0 * xi / (1.0 + m)).exp()
    } else {
        pp
    }
}

/// Cumulative integral of e^{-2 xi/(1+m)} H on a 4096-interval grid, turned
/// into q values and a monotone cubic interpolant.
fn hfamily_interpolant(coeffs: &[f64], exp_scaled: bool, m: f64, market_size: f64) -> Pchip {
    const CELLS: usize = 4096;
    let f = |xi: f64| (-2.0 * xi / (1.0 + m)).exp() * hfamily_h(coeffs, exp_scaled, m, xi);
    let h = m / CELLS as f64;
    let mut xs = Vec::with_capacity(CELLS + 1);
    let mut qs = Vec::with_capacity(CELLS + 1);
    let mut acc = 0.0;
    xs.push(0.0);
    qs.push(market_size);
    for i in 0..CELLS {
        let a = i as f64 * h;
        let b = (i + 1) as f64 * h;
        acc += adaptive_simpson(&f, a, b, 1e-10);
        xs.push(b);
        qs.push(market_size - acc);
    }
    Pchip::new(xs, qs)
}

/// Adaptive Simpson quadrature to the given relative tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * eps, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * eps, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    let eps = rel_tol * whole.abs().max(1e-300);
    recurse(f, a, fa, b, fb, fm, whole, eps, 40)
}

/// Golden-section search for a maximum; returns the midpoint of the final
/// bracket once its width drops below `tol`. Biased to the left endpoint on
/// exact ties so plateaus resolve to the smallest maximizer.
fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Fritsch-Carlson monotone cubic interpolant.
#[derive(Debug, Clone)]
struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2);
        let mut slopes = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            slopes.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut ds = vec![0.0; n];
        ds[0] = slopes[0];
        ds[n - 1] = slopes[n - 2];
        for i in 1..n - 1 {
            let s0 = slopes[i - 1];
            let s1 = slopes[i];
            if s0 * s1 <= 0.0 {
                ds[i] = 0.0;
            } else {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                ds[i] = (w1 + w2) / (w1 / s0 + w2 / s1);
            }
        }
        Self { xs, ys, ds }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + d0 * h * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + d1 * h * (t3 - t2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn linear_example() -> DemandCurve {
        DemandCurve::new(DemandVariant::Linear, 2.0, 1e4, 2750.0).unwrap()
    }

    fn power_example(nu: f64) -> DemandCurve {
        DemandCurve::new(DemandVariant::Power { nu }, 2.0, 1e4, 2750.0).unwrap()
    }

    #[test]
    fn q_eval_examples() {
        let lin = linear_example();
        assert_relative_eq!(lin.q_eval(1.0), 5000.0, max_relative = 1e-14);
        assert_eq!(lin.q_eval(-1.0), 1e4);
        assert_eq!(lin.q_eval(2.0), 0.0);
        assert_eq!(lin.q_eval(5.0), 0.0);
        let pow = power_example(2.0);
        assert_relative_eq!(pow.q_eval(1.0), 7500.0, max_relative = 1e-14);
        assert_eq!(pow.q_eval(-0.5), 1e4);
    }

    #[test]
    fn mu_gamma_linear_branches() {
        let lin = linear_example();
        let a = 2750.0;

        // Lower branch: z <= -a(m+1).
        let r = lin.mu_gamma(-a * 3.0);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax, 2.0);

        // Middle branch at the reference z0.
        let r = lin.mu_gamma(-3262.04);
        assert_relative_eq!(r.argmax, (a * 1.0 + 3262.04) / (2.0 * a), max_relative = 1e-12);
        assert!((r.argmax - 1.0931).abs() < 1e-3);

        // Middle branch at z = 0.
        let r = lin.mu_gamma(0.0);
        assert_relative_eq!(r.argmax, 0.5, max_relative = 1e-12);
        assert_relative_eq!(r.value, 1e4 * 8250.0 * 8250.0 / (4.0 * a * 2.0), max_relative = 1e-12);
        let oracle = lin.brute_force_mu(0.0, 100_000);
        assert_relative_eq!(r.value, oracle.value, max_relative = 1e-9);

        // Upper branch.
        let r = lin.mu_gamma(a * 1.5);
        assert_eq!(r.argmax, 0.0);
        assert_relative_eq!(r.value, 1e4 * (a + a * 1.5), max_relative = 1e-12);
    }

    #[test]
    fn mu_result_consistency() {
        let lin = linear_example();
        for z in [-9000.0, -3262.04, -100.0, 0.0, 500.0, 4000.0] {
            let r = lin.mu_gamma(z);
            let recomputed = lin.q_eval(r.argmax) * (2750.0 * (1.0 + r.argmax) + z);
            assert!((r.value - recomputed).abs() <= 1e-8 * r.value.abs().max(1.0));
            assert!(r.value >= 0.0);
            assert!((0.0..=2.0).contains(&r.argmax));
        }
    }

    #[test]
    fn brute_force_examples() {
        let lin = linear_example();
        let r = lin.brute_force_mu(-3262.04, 100_000);
        assert!((r.argmax - 1.0931).abs() < 1e-4);

        // -1 - z/a >= m pins the maximum to theta = m with value 0.
        let pow = power_example(2.0);
        let z = -2750.0 * 3.5;
        let r = pow.brute_force_mu(z, 10_000);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax, 2.0);

        let r1 = pow.mu_gamma(0.0);
        let r2 = pow.brute_force_mu(0.0, 100_000);
        assert_relative_eq!(r1.value, r2.value, max_relative = 1e-6);
    }

    #[test]
    fn oracle_agreement_random_z() {
        let lin = linear_example();
        let pow = power_example(1.7);
        let a = 2750.0;
        let m = 2.0;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let z = -10.0 * a * (m + 1.0) + next() * (10.0 * a * (m + 1.0) + 10.0 * a);
            let fast = lin.mu_gamma(z);
            let slow = lin.brute_force_mu(z, 2000);
            let scale = fast.value.abs().max(slow.value.abs()).max(a);
            assert!(
                (fast.value - slow.value).abs() <= 1e-6 * scale,
                "linear mismatch at z = {z}: {} vs {}",
                fast.value,
                slow.value
            );
            let fast = pow.mu_gamma(z);
            let slow = pow.brute_force_mu(z, 2000);
            let scale = fast.value.abs().max(slow.value.abs()).max(a);
            assert!((fast.value - slow.value).abs() <= 1e-6 * scale);
            if fast.value > 0.0 {
                assert!((fast.argmax - slow.argmax).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn hfamily_recovers_linear_demand() {
        // H(xi) = (M/m) e^{2 xi/(1+m)} gives q(theta) = M (1 - theta/m).
        let curve = DemandCurve::new(
            DemandVariant::HFamily { coeffs: vec![1e4 / 2.0], exp_scaled: true },
            2.0,
            1e4,
            2750.0,
        )
        .unwrap();
        curve.hfamily_validate().unwrap();
        let lin = linear_example();
        for i in 0..=20 {
            let theta = 2.0 * i as f64 / 20.0;
            assert_relative_eq!(curve.q_eval(theta), lin.q_eval(theta), max_relative = 1e-7, epsilon = 1e-4);
        }
        for z in [-8000.0, -3262.04, -500.0, 0.0] {
            let r1 = curve.mu_gamma(z);
            let r2 = lin.mu_gamma(z);
            let scale = r2.value.abs().max(2750.0);
            assert!((r1.value - r2.value).abs() <= 1e-5 * scale);
        }
    }

    #[test]
    fn hfamily_polynomial_variant_passes() {
        // H(xi) = c (1 + xi) e^{2 xi/(1+m)}, c = M / integral_0^m (1 + xi).
        let m = 2.0;
        let c = 1e4 / (m + m * m / 2.0);
        let curve = DemandCurve::new(
            DemandVariant::HFamily { coeffs: vec![c, c], exp_scaled: true },
            m,
            1e4,
            2750.0,
        )
        .unwrap();
        curve.hfamily_validate().unwrap();
        assert_relative_eq!(curve.q_eval(0.0), 1e4, max_relative = 1e-12);
        assert!(curve.q_eval(m - 1e-9) < 1.0);
    }

    #[test]
    fn hfamily_wrong_normalization_fails() {
        let curve = DemandCurve::new(
            DemandVariant::HFamily { coeffs: vec![1.0], exp_scaled: false },
            2.0,
            1e4,
            2750.0,
        )
        .unwrap();
        let err = curve.hfamily_validate().unwrap_err();
        assert!(err.to_string().contains("condition"), "got: {err}");
    }

    #[test]
    fn tabulated_demand_roundtrip() {
        let lin = linear_example();
        let points: Vec<(f64, f64)> =
            (0..=16).map(|i| (2.0 * i as f64 / 16.0, 1e4 * (1.0 - i as f64 / 16.0))).collect();
        let tab =
            DemandCurve::new(DemandVariant::Tabulated { points }, 2.0, 1e4, 2750.0).unwrap();
        for i in 0..=40 {
            let theta = -0.5 + 3.0 * i as f64 / 40.0;
            assert_relative_eq!(tab.q_eval(theta), lin.q_eval(theta), max_relative = 1e-9, epsilon = 1e-6);
        }
    }

    #[test]
    fn tabulated_rejects_non_monotone() {
        let points = vec![(0.0, 1e4), (1.0, 6000.0), (1.5, 7000.0), (2.0, 0.0)];
        assert!(DemandCurve::new(DemandVariant::Tabulated { points }, 2.0, 1e4, 2750.0).is_err());
    }

    proptest! {
        #[test]
        fn mu_convex_and_monotone(z1 in -30000.0..8000.0, z2 in -30000.0..8000.0, t in 0.0..1.0) {
            let lin = linear_example();
            let zm = t * z1 + (1.0 - t) * z2;
            let lhs = lin.mu_gamma(zm).value;
            let rhs: f64 = t * lin.mu_gamma(z1).value + (1.0 - t) * lin.mu_gamma(z2).value;
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            prop_assert!(lhs <= rhs + 1e-8 * scale);
            // Monotone in z.
            let (lo, hi) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
            prop_assert!(lin.mu_gamma(lo).value <= lin.mu_gamma(hi).value + 1e-8 * scale);
        }

        #[test]
        fn gamma_clamped(z in -50000.0..50000.0) {
            for curve in [linear_example(), power_example(2.0)] {
                let r = curve.mu_gamma(z);
                prop_assert!((0.0..=2.0).contains(&r.argmax));
                prop_assert!(r.value >= 0.0);
            }
        }

        #[test]
        fn q_bounds(theta in -5.0..7.0) {
            for curve in [linear_example(), power_example(0.5)] {
                let q = curve.q_eval(theta);
                prop_assert!((0.0..=1e4).contains(&q));
                if theta <= 0.0 { prop_assert_eq!(q, 1e4); }
                if theta >= 2.0 { prop_assert_eq!(q, 0.0); }
            }
        }
    }

    #[test]
    fn mu_upper_branch_linear_identity() {
        let lin = linear_example();
        let a = 2750.0;
        for z in [a, a * 1.2, a * 5.0] {
            assert_relative_eq!(lin.mu_gamma(z).value, 1e4 * (a + z), max_relative = 1e-12);
        }
    }
}
