//! Closed forms and scaling bounds for the jittered-injection model.

use crate::error::{arg, Error, Result};
use crate::sim::NoiseSpec;
use crate::Policy;

/// Absolute constant of the generic Type II error criterion.
pub const TYPE_II_CONSTANT: f64 =
    4.0 * std::f64::consts::SQRT_2 / (1.0 - 2.0 / 3.0 * std::f64::consts::SQRT_2);

#[derive(Debug, Clone, PartialEq)]
pub struct JitterInput {
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta: f64,
    pub delta: f64,
    pub t: f64,
    pub noise: NoiseSpec,
    pub c: f64,
    pub c_prime: f64,
}

impl JitterInput {
    pub fn new(lambda1: f64, lambda2: f64, eta: f64, delta: f64, t: f64, noise: NoiseSpec) -> Self {
        JitterInput {
            lambda1,
            lambda2,
            eta,
            delta,
            t,
            noise,
            c: 1.0,
            c_prime: 1.0,
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda1.max(self.lambda2)
    }

    /// Violated hypotheses of the jitter separation bound, as messages.
    pub fn hypotheses(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.delta > self.t / 2.0 {
            out.push(format!(
                "delta = {} exceeds T/2 = {}",
                self.delta,
                self.t / 2.0
            ));
        }
        if self.eta > self.lambda_max() {
            out.push(format!(
                "eta = {} exceeds max(lambda1, lambda2) = {}",
                self.eta,
                self.lambda_max()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiMoments {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMoments {
    pub p: f64,
    pub m1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBounds {
    pub v_indep_bound: f64,
    pub v_obs_bound: f64,
}

fn check_window(delta: f64, t: f64) -> Result<()> {
    if !(t > 0.0) {
        return arg(format!("horizon must be positive, got {t}"));
    }
    if !(0.0..=t).contains(&delta) {
        return arg(format!("delta = {delta} must lie in [0, T = {t}]"));
    }
    Ok(())
}

fn check_rates(rates: &[f64]) -> Result<()> {
    match rates.iter().find(|r| !(**r >= 0.0)) {
        Some(r) => arg(format!("rates must be >= 0, got {r}")),
        None => Ok(()),
    }
}

/// `(I, J)` with `I = 2δT − δ²` and `J = 4δ²T − (10/3)δ³`.
pub fn it_jt(delta: f64, t: f64) -> Result<(f64, f64)> {
    check_window(delta, t)?;
    let i = 2.0 * delta * t - delta * delta;
    let j = 4.0 * delta * delta * t - 10.0 / 3.0 * delta.powi(3);
    Ok((i, j))
}

/// Exact mean and variance of φ for independent Poisson trains.
pub fn indep_phi_moments(mu1: f64, mu2: f64, delta: f64, t: f64) -> Result<PhiMoments> {
    check_rates(&[mu1, mu2])?;
    let (i, j) = it_jt(delta, t)?;
    Ok(PhiMoments {
        mean: mu1 * mu2 * i,
        variance: mu1 * mu2 * ((mu1 + mu2) * j + i),
    })
}

/// E[(φ(N¹, N²) − φ(N¹, N³))²] for independent Poisson trains, N² and N³ of equal rate.
pub fn vardiff(mu1: f64, mu2: f64, delta: f64, t: f64) -> Result<f64> {
    check_rates(&[mu1, mu2])?;
    let (i, j) = it_jt(delta, t)?;
    Ok(2.0 * mu1 * mu2 * (i + mu1 * j))
}

/// `P(|ξ| ≤ δ)` and `E[|ξ| 1{|ξ| ≤ δ}]`.
pub fn noise_moments(noise: &NoiseSpec, delta: f64) -> Result<NoiseMoments> {
    noise.validate()?;
    if !(delta >= 0.0) {
        return arg(format!("delta must be non-negative, got {delta}"));
    }
    Ok(match *noise {
        NoiseSpec::Uniform { lo, hi } if lo == hi => {
            let p = if lo.abs() <= delta { 1.0 } else { 0.0 };
            NoiseMoments {
                p,
                m1: lo.abs() * p,
            }
        }
        NoiseSpec::Uniform { lo, hi } => {
            let (c, d) = (lo.max(-delta), hi.min(delta));
            if c >= d {
                NoiseMoments { p: 0.0, m1: 0.0 }
            } else {
                let g = |x: f64| 0.5 * x * x.abs();
                NoiseMoments {
                    p: (d - c) / (hi - lo),
                    m1: (g(d) - g(c)) / (hi - lo),
                }
            }
        }
        NoiseSpec::TriangularDecreasing { d } => {
            let e = delta.min(d);
            let s = 1.0 - e / d;
            NoiseMoments {
                p: 1.0 - s * s,
                m1: e * e / d - 2.0 * e.powi(3) / (3.0 * d * d),
            }
        }
        NoiseSpec::TriangularIncreasing { d } => {
            let e = delta.min(d);
            NoiseMoments {
                p: (e / d).powi(2),
                m1: 2.0 * e.powi(3) / (3.0 * d * d),
            }
        }
    })
}

/// Δφ = η(T·p − m1).
pub fn delta_phi_jitter(input: &JitterInput) -> Result<f64> {
    let nm = noise_moments(&input.noise, input.delta)?;
    Ok(input.eta * (input.t * nm.p - nm.m1))
}

/// Variance of f_φ when the two coordinates are independent.
pub fn v_indep_jitter(input: &JitterInput) -> Result<f64> {
    let r1 = input.eta + input.lambda1;
    let r2 = input.eta + input.lambda2;
    vardiff(r1, r2, input.delta, input.t)
}

fn hypothesis(policy: Policy, msg: String) -> Result<()> {
    match policy {
        Policy::Strict => Err(Error::Hypothesis(msg)),
        Policy::Lenient => Ok(()),
    }
}

/// Scaling bounds on the variance of f_φ under independence and under the model.
pub fn var_bounds_jitter(input: &JitterInput, policy: Policy) -> Result<VarBounds> {
    let lm = input.lambda_max();
    if input.eta > lm {
        hypothesis(policy, format!("eta = {} exceeds max rate {lm}", input.eta))?;
    }
    let p = noise_moments(&input.noise, input.delta)?.p;
    let (d, t) = (input.delta, input.t);
    let v_indep_bound = input.c * lm * lm * d * t * (1.0 + lm * d);
    let v_obs_bound = input.c * (1.0 + lm * d) * (lm * lm * d * t + input.eta * t * p);
    Ok(VarBounds {
        v_indep_bound,
        v_obs_bound,
    })
}

pub(crate) fn check_n(n: usize, alpha: f64, beta: f64, policy: Policy) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return arg(format!(
            "alpha and beta must lie in (0, 1), got {alpha}, {beta}"
        ));
    }
    let floor = 3.0 / (alpha * beta).sqrt();
    if (n as f64) < floor {
        hypothesis(
            policy,
            format!("n = {n} is below 3/sqrt(alpha beta) = {floor:.3}"),
        )?;
    }
    Ok(())
}

/// Messages for violated sample-size hypotheses; errors only on invalid α or β.
pub fn check_sample_size(n: usize, alpha: f64, beta: f64) -> Result<Vec<String>> {
    match check_n(n, alpha, beta, Policy::Strict) {
        Ok(()) => Ok(Vec::new()),
        Err(Error::Hypothesis(m)) => Ok(vec![m]),
        Err(e) => Err(e),
    }
}

/// Right-hand side of the separation criterion at sample size `n`.
pub fn crit_rhs_jitter(
    input: &JitterInput,
    n: usize,
    alpha: f64,
    beta: f64,
    policy: Policy,
) -> Result<f64> {
    check_n(n, alpha, beta, policy)?;
    let lm = input.lambda_max();
    let (d, t) = (input.delta, input.t);
    let nab = n as f64 * alpha * beta;
    let g = 1.0 + lm * d;
    Ok(input.c * ((g * lm * lm * d * t / nab).sqrt() + g / nab))
}

/// Sample size beyond which the Type II error is at most β, up to `c_prime`.
///
/// Returns infinity when η = 0 or `P(|ξ| ≤ δ) = 0`: the model is then
/// indistinguishable from independence at this δ.
pub fn n_min_jitter(input: &JitterInput, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return arg(format!(
            "alpha and beta must lie in (0, 1), got {alpha}, {beta}"
        ));
    }
    let p = noise_moments(&input.noise, input.delta)?.p;
    if input.eta == 0.0 || p == 0.0 {
        return Ok(f64::INFINITY);
    }
    let lm = input.lambda_max();
    let (d, t, eta) = (input.delta, input.t, input.eta);
    let ab = alpha * beta;
    let second = (1.0 + lm * d) / (ab * eta * t * p) * (1.0 + (lm / eta) * (lm * d / p));
    Ok(input.c_prime * (1.0 / ab.sqrt()).max(second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SYM: NoiseSpec = NoiseSpec::Uniform { lo: -0.1, hi: 0.1 };

    #[test]
    fn i_and_j() {
        assert_eq!(it_jt(0.0, 2.0).unwrap(), (0.0, 0.0));
        let (i, j) = it_jt(0.1, 2.0).unwrap();
        assert_relative_eq!(i, 0.39, max_relative = 1e-14);
        assert_relative_eq!(j, 0.076_666_666_666_666_67, max_relative = 1e-14);
        assert!(it_jt(3.0, 2.0).is_err());
    }

    #[test]
    fn poisson_moments() {
        let m = indep_phi_moments(10.0, 10.0, 0.1, 2.0).unwrap();
        assert_relative_eq!(m.mean, 39.0, max_relative = 1e-14);
        assert_relative_eq!(m.variance, 192.333_333_333_333_3, max_relative = 1e-13);
        assert_eq!(
            indep_phi_moments(0.0, 10.0, 0.1, 2.0).unwrap(),
            PhiMoments {
                mean: 0.0,
                variance: 0.0
            }
        );
        assert_relative_eq!(
            vardiff(10.0, 10.0, 0.1, 2.0).unwrap(),
            231.333_333_333_333_3,
            max_relative = 1e-13
        );
        assert_eq!(vardiff(0.0, 10.0, 0.1, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn noise_examples() {
        let m = noise_moments(&SYM, 0.1).unwrap();
        assert_relative_eq!(m.p, 1.0);
        assert_relative_eq!(m.m1, 0.05, max_relative = 1e-14);
        let m = noise_moments(&SYM, 0.05).unwrap();
        assert_relative_eq!(m.p, 0.5, max_relative = 1e-14);
        assert_relative_eq!(m.m1, 0.0125, max_relative = 1e-14);
        let m = noise_moments(&NoiseSpec::TriangularIncreasing { d: 0.1 }, 0.1).unwrap();
        assert_relative_eq!(m.p, 1.0);
        assert_relative_eq!(m.m1, 0.066_666_666_666_666_67, max_relative = 1e-13);
        let point = NoiseSpec::Uniform { lo: 0.03, hi: 0.03 };
        assert_eq!(
            noise_moments(&point, 0.05).unwrap(),
            NoiseMoments { p: 1.0, m1: 0.03 }
        );
        assert_eq!(
            noise_moments(&point, 0.01).unwrap(),
            NoiseMoments { p: 0.0, m1: 0.0 }
        );
    }

    #[test]
    fn separation_examples() {
        let mut inp = JitterInput::new(10.0, 10.0, 1.0, 0.1, 2.0, SYM);
        assert_relative_eq!(delta_phi_jitter(&inp).unwrap(), 1.95, max_relative = 1e-14);
        inp.delta = 0.05;
        assert_relative_eq!(
            delta_phi_jitter(&inp).unwrap(),
            0.9875,
            max_relative = 1e-14
        );
        inp.eta = 0.0;
        assert_eq!(delta_phi_jitter(&inp).unwrap(), 0.0);
        let inp = JitterInput::new(10.0, 10.0, 1.0, 0.1, 2.0, SYM);
        assert_relative_eq!(
            v_indep_jitter(&inp).unwrap(),
            298.466_666_666_666_7,
            max_relative = 1e-13
        );
        let zero = JitterInput::new(0.0, 0.0, 0.0, 0.1, 2.0, SYM);
        assert_eq!(v_indep_jitter(&zero).unwrap(), 0.0);
    }

    #[test]
    fn bound_examples() {
        let inp = JitterInput::new(10.0, 10.0, 1.0, 0.1, 2.0, SYM);
        let vb = var_bounds_jitter(&inp, Policy::Strict).unwrap();
        assert_relative_eq!(vb.v_indep_bound, 40.0, max_relative = 1e-14);
        assert_relative_eq!(vb.v_obs_bound, 44.0, max_relative = 1e-14);
        let mut z = inp.clone();
        z.delta = 0.0;
        let vb = var_bounds_jitter(&z, Policy::Strict).unwrap();
        assert_eq!((vb.v_indep_bound, vb.v_obs_bound), (0.0, 0.0));
        let mut hot = inp.clone();
        hot.eta = 20.0;
        assert!(matches!(
            var_bounds_jitter(&hot, Policy::Strict),
            Err(Error::Hypothesis(_))
        ));
        assert!(var_bounds_jitter(&hot, Policy::Lenient).is_ok());

        let rhs = crit_rhs_jitter(&inp, 200, 0.05, 0.05, Policy::Strict).unwrap();
        assert_relative_eq!(rhs, 80f64.sqrt() + 4.0, max_relative = 1e-14);
        let r4 = crit_rhs_jitter(&inp, 800, 0.05, 0.05, Policy::Strict).unwrap();
        assert_relative_eq!(r4, 80f64.sqrt() / 2.0 + 1.0, max_relative = 1e-14);
        assert!(crit_rhs_jitter(&inp, 10, 0.05, 0.05, Policy::Strict).is_err());

        assert_relative_eq!(
            n_min_jitter(&inp, 0.05, 0.05).unwrap(),
            4400.0,
            max_relative = 1e-12
        );
        let mut blind = inp.clone();
        blind.eta = 0.0;
        assert_eq!(n_min_jitter(&blind, 0.05, 0.05).unwrap(), f64::INFINITY);
    }

    #[test]
    fn type_ii_constant_value() {
        assert_relative_eq!(TYPE_II_CONSTANT, 98.911_688_245_431_4, max_relative = 1e-12);
    }
}
