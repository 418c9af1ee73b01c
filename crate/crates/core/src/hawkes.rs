//! Closed forms and scaling bounds for the mean-field exponential Hawkes model.
//!
//! Kernel `h(t) = a·e^{-bt}`, branching ratio `ℓ = a/b`, cluster decay rate
//! `r = b − a`. Every exponential goes through `r` so that `1 − ℓ = r/b` never
//! suffers cancellation as `ℓ → 1`.

use crate::error::{arg, Error, Result};
use crate::jitter::{check_n, vardiff};
use crate::sim::check_kernel;
use crate::Policy;

#[derive(Debug, Clone, PartialEq)]
pub struct HawkesInput {
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub delta: f64,
    pub t: f64,
    pub c: f64,
    pub c_prime: f64,
}

impl HawkesInput {
    pub fn new(nu: f64, a: f64, b: f64, m: usize, delta: f64, t: f64) -> Self {
        HawkesInput {
            nu,
            a,
            b,
            m,
            delta,
            t,
            c: 1.0,
            c_prime: 1.0,
        }
    }

    pub fn ell(&self) -> f64 {
        self.a / self.b
    }

    pub fn r(&self) -> f64 {
        self.b - self.a
    }

    fn one_minus_ell(&self) -> f64 {
        self.r() / self.b
    }

    pub fn validate(&self) -> Result<()> {
        check_kernel(self.a, self.b)?;
        if !(self.nu >= 0.0) {
            return arg(format!("nu must be >= 0, got {}", self.nu));
        }
        if self.m < 1 {
            return arg("network size must be positive");
        }
        if !(self.t > 0.0) {
            return arg(format!("horizon must be positive, got {}", self.t));
        }
        if !(0.0..=self.t).contains(&self.delta) {
            return arg(format!("delta = {} must lie in [0, T]", self.delta));
        }
        Ok(())
    }

    /// Violated hypotheses of the Hawkes separation bound, as messages.
    pub fn hypotheses(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.delta > self.t / 2.0 {
            out.push(format!(
                "delta = {} exceeds T/2 = {}",
                self.delta,
                self.t / 2.0
            ));
        }
        if self.r() * self.t <= 4.0 {
            out.push(format!("b(1 - l)T = {} is not above 4", self.r() * self.t));
        }
        out
    }
}

fn hypothesis(policy: Policy, msg: String) -> Result<()> {
    match policy {
        Policy::Strict => Err(Error::Hypothesis(msg)),
        Policy::Lenient => Ok(()),
    }
}

pub(crate) fn psi_r(t: f64, a: f64, r: f64) -> f64 {
    if t > 0.0 {
        a * (-r * t).exp()
    } else {
        0.0
    }
}

/// Ψ(t) = a·e^{-(b−a)t} for t > 0, else 0: the total offspring rate over all generations.
pub fn psi(t: f64, a: f64, b: f64) -> Result<f64> {
    check_kernel(a, b)?;
    Ok(psi_r(t, a, b - a))
}

fn check_ell(ell: f64) -> Result<()> {
    if (0.0..1.0).contains(&ell) {
        Ok(())
    } else {
        arg(format!("branching ratio must lie in [0, 1), got {ell}"))
    }
}

/// Stationary intensity μ/(1−ℓ).
pub fn k1_rate(mu: f64, ell: f64) -> Result<f64> {
    check_ell(ell)?;
    Ok(mu / (1.0 - ell))
}

/// Value of the off-diagonal second cumulant density at lag zero.
pub fn k2_coefficient(mu: f64, a: f64, b: f64) -> Result<f64> {
    check_kernel(a, b)?;
    let one_minus = (b - a) / b;
    let ell = a / b;
    Ok(a * mu / one_minus * (1.0 + 0.5 * ell / one_minus))
}

/// Off-diagonal second cumulant density at lag `s`.
pub fn k2_density(s: f64, mu: f64, a: f64, b: f64) -> Result<f64> {
    Ok(k2_coefficient(mu, a, b)? * (-(b - a) * s.abs()).exp())
}

/// Exponential envelope `C_m a^{m−1} μ/(1−ℓ)^m e^{−r(max t − min t)}`.
pub fn cumulant_bound_density(
    m: usize,
    times: &[f64],
    mu: f64,
    a: f64,
    b: f64,
    c_m: f64,
) -> Result<f64> {
    check_kernel(a, b)?;
    if !(1..=4).contains(&m) {
        return Err(Error::Capability(m));
    }
    if times.len() != m {
        return arg(format!("expected {m} times, got {}", times.len()));
    }
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let one_minus = (b - a) / b;
    Ok(c_m * a.powi(m as i32 - 1) * mu / one_minus.powi(m as i32) * (-(b - a) * (hi - lo)).exp())
}

/// ∫ Π Ψ(α_i − v) dv for strictly ascending α.
pub fn chain_integral(alphas: &[f64], a: f64, b: f64) -> Result<f64> {
    check_kernel(a, b)?;
    if alphas.len() < 2 {
        return arg("chain integral needs at least two points");
    }
    if alphas.windows(2).any(|w| !(w[0] < w[1])) {
        return arg("chain integral needs strictly ascending points");
    }
    let r = b - a;
    let m = alphas.len() as f64;
    let prod: f64 = alphas[1..]
        .iter()
        .map(|x| psi_r(x - alphas[0], a, r))
        .product();
    Ok(a / (m * r) * prod)
}

/// Upper bound on ∫ Ψ(|α − v|) Π Ψ(α_i − v) dv for strictly ascending α_i.
pub fn chain_abs_bound(alpha: f64, alphas: &[f64], a: f64, b: f64) -> Result<f64> {
    check_kernel(a, b)?;
    if alphas.len() < 2 || alphas.windows(2).any(|w| !(w[0] < w[1])) {
        return arg("need at least two strictly ascending points");
    }
    let r = b - a;
    let m = alphas.len() as f64;
    let prod: f64 = alphas[1..]
        .iter()
        .map(|x| psi_r(x - alphas[0], a, r))
        .product();
    Ok(a / ((m - 1.0) * r) * psi_r((alpha - alphas[0]).abs(), a, r) * prod)
}

/// (1 − e^{−x})/x, continuous at 0.
fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Δφ between neurons 1 and 2 of the network.
pub fn delta_phi_hawkes(input: &HawkesInput) -> Result<f64> {
    input.validate()?;
    let (ell, om, r) = (input.ell(), input.one_minus_ell(), input.r());
    let (d, t) = (input.delta, input.t);
    let pre = input.nu * d / input.m as f64 * (2.0 - ell) * ell / om.powi(3);
    Ok(pre * (1.0 + (r * (t - d) - 1.0) * phi1(r * d)))
}

/// The same quantity written with δ factored out of the window integral.
pub fn delta_phi_hawkes_factored(input: &HawkesInput) -> Result<f64> {
    input.validate()?;
    let (ell, om, r) = (input.ell(), input.one_minus_ell(), input.r());
    let (d, t) = (input.delta, input.t);
    if d == 0.0 {
        return Ok(0.0);
    }
    let lead = input.nu / input.m as f64 * (2.0 - ell) * ell / om.powi(3);
    let tail = -(-r * d).exp_m1();
    Ok(lead * (d - tail / r + (t - d) * tail))
}

/// Lower bound ¼·νℓT(1 − e^{−rδ})/(M(1−ℓ)³), valid when rT > 4 and δ ≤ T/2.
pub fn delta_phi_hawkes_lb(input: &HawkesInput, policy: Policy) -> Result<f64> {
    input.validate()?;
    let (r, t) = (input.r(), input.t);
    if r * t <= 4.0 {
        hypothesis(policy, format!("b(1 - l)T = {} is not above 4", r * t))?;
    }
    if input.delta > t / 2.0 {
        hypothesis(policy, format!("delta = {} exceeds T/2", input.delta))?;
    }
    let om = input.one_minus_ell();
    Ok(
        0.25 * input.nu * input.ell() * t * -(-r * input.delta).exp_m1()
            / (input.m as f64 * om.powi(3)),
    )
}

/// Variance of f_φ in the mean-field limit, where both trains are independent
/// Poisson processes of rate ν/(1−ℓ).
pub fn v0(nu: f64, ell: f64, delta: f64, t: f64) -> Result<f64> {
    check_ell(ell)?;
    if !(t > 0.0 && (0.0..=t).contains(&delta)) {
        return arg(format!("delta = {delta} must lie in [0, T = {t}]"));
    }
    let q = nu / (1.0 - ell);
    Ok(4.0
        * q
        * q
        * delta
        * t
        * (1.0 + 2.0 * q * delta - delta / (2.0 * t) * (1.0 + 10.0 / 3.0 * q * delta)))
}

/// The mean-field variance through the generic Poisson formula.
pub fn v0_via_vardiff(nu: f64, ell: f64, delta: f64, t: f64) -> Result<f64> {
    check_ell(ell)?;
    let q = nu / (1.0 - ell);
    vardiff(q, q, delta, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarGaps {
    pub gap_indep: f64,
    pub gap_obs: f64,
}

/// Scaling bounds on the distance of both variances of f_φ to the mean-field variance.
pub fn var_gap_bounds(input: &HawkesInput) -> Result<VarGaps> {
    input.validate()?;
    let om = input.one_minus_ell();
    let (nu, a, b, d, t) = (input.nu, input.a, input.b, input.delta, input.t);
    let mf = input.m as f64;
    let rho = nu + a / mf;
    let bracket = 1.0 + rho / (b * om * om);
    let scale = input.c * a * t / mf;
    Ok(VarGaps {
        gap_indep: scale * nu * nu * d * d / om.powi(3) * bracket,
        gap_obs: scale * nu * d / (om * om) * (1.0 + rho * d / om * bracket),
    })
}

/// Right-hand side of the separation criterion at sample size `n`.
pub fn crit_rhs_hawkes(
    input: &HawkesInput,
    n: usize,
    alpha: f64,
    beta: f64,
    policy: Policy,
) -> Result<f64> {
    input.validate()?;
    check_n(n, alpha, beta, policy)?;
    let om = input.one_minus_ell();
    let (d, t, mf) = (input.delta, input.t, input.m as f64);
    let rho = input.nu + input.a / mf;
    let inner = 1.0 + d * rho / om * (1.0 + input.ell() / (mf * om * om));
    Ok(input.c * (d * t / (n as f64 * alpha * beta)).sqrt() * rho / om * inner.sqrt())
}

/// Sample size beyond which the Type II error is at most β, up to `c_prime`.
pub fn n_min_hawkes(input: &HawkesInput, alpha: f64, beta: f64, policy: Policy) -> Result<f64> {
    input.validate()?;
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return arg(format!(
            "alpha and beta must lie in (0, 1), got {alpha}, {beta}"
        ));
    }
    let (r, t) = (input.r(), input.t);
    if r * t <= 4.0 {
        hypothesis(policy, format!("b(1 - l)T = {} is not above 4", r * t))?;
    }
    if input.delta == 0.0 || input.a == 0.0 || input.nu == 0.0 {
        return Ok(f64::INFINITY);
    }
    let om = input.one_minus_ell();
    let ell = input.ell();
    let (d, mf) = (input.delta, input.m as f64);
    let rho = input.nu + input.a / mf;
    let size = (mf + input.a / input.nu).powi(2) * om.powi(4) / (ell * ell * t);
    let tail = -(-r * d).exp_m1();
    let window = (d + d * d * rho / om * (1.0 + ell / (mf * om * om))) / (tail * tail);
    Ok(input.c_prime / (alpha * beta) * size * window)
}

/// Var N[0, T] for the univariate process of baseline μ.
pub fn window_count_var(mu: f64, a: f64, b: f64, t: f64) -> Result<f64> {
    check_kernel(a, b)?;
    if !(t >= 0.0) {
        return arg(format!("window length must be >= 0, got {t}"));
    }
    let r = b - a;
    let c = k2_coefficient(mu, a, b)?;
    let k1 = mu * b / r;
    Ok(k1 * t + 2.0 * c * (t / r + (-r * t).exp_m1() / (r * r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> HawkesInput {
        HawkesInput::new(1.0, 3.0, 4.0, 10, 0.1, 2.0)
    }

    #[test]
    fn psi_and_rates() {
        assert_eq!(psi(1e-300, 3.0, 4.0).unwrap(), 3.0);
        assert_eq!(psi(0.0, 3.0, 4.0).unwrap(), 0.0);
        assert_relative_eq!(
            psi(1.0, 3.0, 4.0).unwrap(),
            3.0 * (-1f64).exp(),
            max_relative = 1e-15
        );
        assert!(psi(1.0, 4.0, 3.0).is_err());
        assert_relative_eq!(k1_rate(10.0, 0.75).unwrap(), 40.0);
        assert_eq!(k1_rate(10.0, 0.0).unwrap(), 10.0);
        assert!(k1_rate(10.0, 1.0).is_err());
        assert_relative_eq!(
            k2_density(0.0, 10.0, 3.0, 4.0).unwrap(),
            300.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            k2_density(-0.5, 10.0, 3.0, 4.0).unwrap(),
            k2_density(0.5, 10.0, 3.0, 4.0).unwrap()
        );
        assert!(k2_density(800.0, 10.0, 3.0, 4.0).unwrap() < 1e-300);
    }

    #[test]
    fn envelope() {
        assert_relative_eq!(
            cumulant_bound_density(1, &[0.3], 10.0, 3.0, 4.0, 1.0).unwrap(),
            40.0,
            max_relative = 1e-14
        );
        let flat = cumulant_bound_density(3, &[0.2, 0.2, 0.2], 10.0, 3.0, 4.0, 1.0).unwrap();
        assert_relative_eq!(flat, 9.0 * 10.0 / 0.25f64.powi(3), max_relative = 1e-14);
        assert!(cumulant_bound_density(5, &[0.0; 5], 10.0, 3.0, 4.0, 1.0).is_err());
        for s in [0.0, 0.3, 1.0, 5.0] {
            let env = cumulant_bound_density(2, &[0.0, s], 10.0, 3.0, 4.0, 3.0).unwrap();
            assert!(env >= k2_density(s, 10.0, 3.0, 4.0).unwrap());
        }
    }

    #[test]
    fn chain_examples() {
        let v = chain_integral(&[0.0, 1.0], 3.0, 4.0).unwrap();
        assert_relative_eq!(v, 4.5 * (-1f64).exp(), max_relative = 1e-14);
        let near = chain_integral(&[0.0, 1e-12], 3.0, 4.0).unwrap();
        assert_relative_eq!(near, 9.0 / 2.0, max_relative = 1e-9);
        assert!(chain_integral(&[1.0, 0.0], 3.0, 4.0).is_err());
        assert!(chain_integral(&[1.0, 1.0], 3.0, 4.0).is_err());
    }

    #[test]
    fn separation_examples() {
        let inp = base();
        assert_relative_eq!(
            delta_phi_hawkes(&inp).unwrap(),
            1.113_878,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            delta_phi_hawkes(&inp).unwrap(),
            delta_phi_hawkes_factored(&inp).unwrap(),
            max_relative = 1e-13
        );
        let mut weak = inp.clone();
        weak.a = 1e-12;
        assert!(delta_phi_hawkes(&weak).unwrap() < 1e-10);
        let mut big = inp.clone();
        big.m = 1000;
        assert_relative_eq!(
            delta_phi_hawkes(&big).unwrap() * 100.0,
            delta_phi_hawkes(&inp).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn lower_bound_examples() {
        let mut inp = base();
        inp.t = 5.0;
        let lb = delta_phi_hawkes_lb(&inp, Policy::Strict).unwrap();
        assert_relative_eq!(lb, 6.0 * -(-0.1f64).exp_m1(), max_relative = 1e-13);
        assert!(lb <= delta_phi_hawkes(&inp).unwrap());
        assert!(delta_phi_hawkes_lb(&base(), Policy::Strict).is_err());
        assert!(delta_phi_hawkes_lb(&base(), Policy::Lenient).is_ok());
        inp.delta = 0.0;
        assert_eq!(delta_phi_hawkes_lb(&inp, Policy::Strict).unwrap(), 0.0);
    }

    #[test]
    fn mean_field_variance() {
        assert_relative_eq!(
            v0(1.0, 0.75, 0.1, 2.0).unwrap(),
            22.293_333_333_333_33,
            max_relative = 1e-13
        );
        assert_eq!(v0(1.0, 0.75, 0.0, 2.0).unwrap(), 0.0);
        assert_relative_eq!(
            v0(1.0, 0.75, 0.1, 2.0).unwrap(),
            v0_via_vardiff(1.0, 0.75, 0.1, 2.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gap_examples() {
        let g = var_gap_bounds(&base()).unwrap();
        assert_relative_eq!(g.gap_indep, 2.3808, max_relative = 1e-12);
        assert_relative_eq!(g.gap_obs, 4.05504, max_relative = 1e-12);
        let mut big = base();
        big.m = 1_000_000;
        let g = var_gap_bounds(&big).unwrap();
        assert!(g.gap_indep < 1e-4 && g.gap_obs < 1e-4);
    }

    #[test]
    fn criterion_examples() {
        let inp = base();
        let v = crit_rhs_hawkes(&inp, 200, 0.05, 0.05, Policy::Strict).unwrap();
        assert_relative_eq!(
            v,
            0.4f64.sqrt() * 5.2 * 2.144f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(v, 4.8156, max_relative = 1e-4);
        let v4 = crit_rhs_hawkes(&inp, 800, 0.05, 0.05, Policy::Strict).unwrap();
        assert_relative_eq!(v4 * 2.0, v, max_relative = 1e-13);
        let mut z = inp.clone();
        z.delta = 0.0;
        assert_eq!(
            crit_rhs_hawkes(&z, 200, 0.05, 0.05, Policy::Strict).unwrap(),
            0.0
        );
        assert!(crit_rhs_hawkes(&inp, 10, 0.05, 0.05, Policy::Strict).is_err());
    }

    #[test]
    fn n_min_examples() {
        let inp = base();
        assert!(n_min_hawkes(&inp, 0.05, 0.05, Policy::Strict).is_err());
        let v = n_min_hawkes(&inp, 0.05, 0.05, Policy::Lenient).unwrap();
        let tail = -(-0.1f64).exp_m1();
        assert_relative_eq!(
            v,
            400.0 * (169.0 * 0.25f64.powi(4) / 1.125) * 0.2144 / (tail * tail),
            max_relative = 1e-12
        );
        assert_relative_eq!(v, 5557.0, max_relative = 1e-3);
        let mut long = inp.clone();
        long.t = 5.0;
        let v5 = n_min_hawkes(&long, 0.05, 0.05, Policy::Strict).unwrap();
        assert_relative_eq!(v5, v * 2.0 / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn window_variance() {
        assert_relative_eq!(
            window_count_var(10.0, 3.0, 4.0, 2.0).unwrap(),
            761.201,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            window_count_var(10.0, 1e-12, 4.0, 2.0).unwrap(),
            20.0,
            max_relative = 1e-9
        );
    }
}
