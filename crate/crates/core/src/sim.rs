//! Generators for Poisson, jittered-injection and mean-field Hawkes trials.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;

use crate::error::{arg, Error, Result};
use crate::rng::{domain, Streams};
use crate::train::{Sample, SpikeTrain, TrialPair};

/// Distribution of the jitter ξ applied to injected points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// Uniform on `[lo, hi]`; `lo == hi` is a point mass.
    Uniform { lo: f64, hi: f64 },
    /// Density `2(D - x)/D²` on `[0, D]`.
    TriangularDecreasing { d: f64 },
    /// Density `2x/D²` on `[0, D]`.
    TriangularIncreasing { d: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            NoiseSpec::TriangularDecreasing { d } | NoiseSpec::TriangularIncreasing { d }
                if d > 0.0 && d.is_finite() =>
            {
                Ok(())
            }
            _ => arg(format!("invalid noise {self:?}")),
        }
    }

    /// Largest |ξ| in the support.
    pub fn radius(&self) -> f64 {
        match *self {
            NoiseSpec::Uniform { lo, hi } => lo.abs().max(hi.abs()),
            NoiseSpec::TriangularDecreasing { d } | NoiseSpec::TriangularIncreasing { d } => d,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            NoiseSpec::Uniform { lo, hi } => lo + (hi - lo) * u,
            NoiseSpec::TriangularDecreasing { d } => d * (1.0 - (1.0 - u).sqrt()),
            NoiseSpec::TriangularIncreasing { d } => d * u.sqrt(),
        }
    }

    /// Parses `uniform:lo,hi`, `tridec:D` or `triinc:D`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("noise `{s}` lacks a `kind:` prefix")))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Argument(format!("noise `{s}`: {e}")))?;
        let spec = match (kind, nums.as_slice()) {
            ("uniform", [lo, hi]) => NoiseSpec::Uniform { lo: *lo, hi: *hi },
            ("tridec", [d]) => NoiseSpec::TriangularDecreasing { d: *d },
            ("triinc", [d]) => NoiseSpec::TriangularIncreasing { d: *d },
            _ => return arg(format!("unrecognised noise `{s}`")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl std::fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseSpec::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            NoiseSpec::TriangularDecreasing { d } => write!(f, "tridec:{d}"),
            NoiseSpec::TriangularIncreasing { d } => write!(f, "triinc:{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JitterParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta: f64,
    pub t: f64,
    pub noise: NoiseSpec,
    pub margin: f64,
}

impl JitterParams {
    /// Margin defaults to the noise support radius.
    pub fn new(lambda1: f64, lambda2: f64, eta: f64, t: f64, noise: NoiseSpec) -> Result<Self> {
        let p = JitterParams {
            lambda1,
            lambda2,
            eta,
            t,
            noise,
            margin: noise.radius(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("eta", self.eta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return arg(format!("{name} must be a finite rate >= 0, got {v}"));
            }
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return arg(format!("horizon must be positive, got {}", self.t));
        }
        if !(self.margin >= self.noise.radius()) {
            return arg(format!(
                "margin {} is below the noise support radius {}",
                self.margin,
                self.noise.radius()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HawkesParams {
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub t: f64,
    pub warmup: f64,
}

impl HawkesParams {
    pub fn new(nu: f64, a: f64, b: f64, m: usize, t: f64, warmup: f64) -> Result<Self> {
        let p = HawkesParams {
            nu,
            a,
            b,
            m,
            t,
            warmup,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_kernel(self.a, self.b)?;
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return arg(format!("nu must be >= 0, got {}", self.nu));
        }
        if self.m < 2 {
            return arg(format!("network size must be >= 2, got {}", self.m));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return arg(format!("horizon must be positive, got {}", self.t));
        }
        if !(self.warmup >= 0.0 && self.warmup.is_finite()) {
            return arg(format!("warmup must be >= 0, got {}", self.warmup));
        }
        Ok(())
    }

    pub fn ell(&self) -> f64 {
        self.a / self.b
    }
}

pub(crate) fn check_kernel(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && a < b && b.is_finite()) {
        return Err(Error::Supercritical { a, b });
    }
    Ok(())
}

/// Trial-generating models.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Jitter(JitterParams),
    /// Neurons 1 and 2 of one mean-field network.
    Hawkes(HawkesParams),
    /// Neuron 1 of one network and neuron 2 of an independent copy.
    IndependentHawkes(HawkesParams),
}

impl Model {
    pub fn horizon(&self) -> f64 {
        match self {
            Model::Jitter(p) => p.t,
            Model::Hawkes(p) | Model::IndependentHawkes(p) => p.t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Jitter(p) => p.validate(),
            Model::Hawkes(p) | Model::IndependentHawkes(p) => p.validate(),
        }
    }

    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrialPair> {
        match self {
            Model::Jitter(p) => jitter_trial(p, rng),
            Model::Hawkes(p) => hawkes_pair(p, rng),
            Model::IndependentHawkes(p) => {
                let first = hawkes_pair(p, rng)?;
                let second = hawkes_pair(p, rng)?;
                TrialPair::new(first.x1, second.x2)
            }
        }
    }
}

/// Homogeneous Poisson points on `[t0, t1]`, sorted.
pub fn poisson_process<R: Rng + ?Sized>(
    rate: f64,
    t0: f64,
    t1: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return arg(format!("rate must be >= 0, got {rate}"));
    }
    if !(t0 <= t1) {
        return arg(format!("empty interval [{t0}, {t1}]"));
    }
    let mean = rate * (t1 - t0);
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::Argument(e.to_string()))?
        .sample(rng) as usize;
    let mut pts: Vec<f64> = (0..count).map(|_| rng.random_range(t0..=t1)).collect();
    pts.sort_by(f64::total_cmp);
    Ok(pts)
}

fn merge_sorted(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// One trial of the jittered-injection model.
pub fn jitter_trial<R: Rng + ?Sized>(p: &JitterParams, rng: &mut R) -> Result<TrialPair> {
    p.validate()?;
    let t = p.t;
    let y1 = poisson_process(p.lambda1, 0.0, t, rng)?;
    let y2 = poisson_process(p.lambda2, 0.0, t, rng)?;
    let z = poisson_process(p.eta, -p.margin, t + p.margin, rng)?;
    let z1: Vec<f64> = z
        .iter()
        .copied()
        .filter(|u| (0.0..=t).contains(u))
        .collect();
    let mut z2: Vec<f64> = z
        .iter()
        .map(|u| u + p.noise.sample(rng))
        .filter(|v| (0.0..=t).contains(v))
        .collect();
    z2.sort_by(f64::total_cmp);
    Ok(TrialPair {
        x1: SpikeTrain::from_sorted(merge_sorted(y1, z1), t),
        x2: SpikeTrain::from_sorted(merge_sorted(y2, z2), t),
    })
}

/// Univariate Hawkes process with kernel `a·e^{-bt}` on `(t_start, t_end]`, empty history.
///
/// Ogata thinning: between events the intensity decays, so its value right after the
/// current time bounds it until the next proposal.
pub fn hawkes_univariate<R: Rng + ?Sized>(
    mu: f64,
    a: f64,
    b: f64,
    t_start: f64,
    t_end: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_kernel(a, b)?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return arg(format!("baseline must be >= 0, got {mu}"));
    }
    if !(t_start <= t_end) {
        return arg(format!("empty interval [{t_start}, {t_end}]"));
    }
    let mut out = Vec::new();
    let mut t = t_start;
    let mut excess = 0.0;
    loop {
        let bound = mu + excess;
        if bound <= 0.0 {
            break;
        }
        let w = Exp::new(bound).expect("positive rate").sample(rng);
        t += w;
        if t > t_end {
            break;
        }
        excess *= (-b * w).exp();
        let lambda = mu + excess;
        assert!(
            lambda <= bound,
            "thinning bound violated: {lambda} > {bound}"
        );
        if rng.random::<f64>() * bound <= lambda {
            out.push(t);
            excess += a;
        }
    }
    Ok(out)
}

/// Neurons 1 and 2 of a mean-field network of size M.
pub fn hawkes_pair<R: Rng + ?Sized>(p: &HawkesParams, rng: &mut R) -> Result<TrialPair> {
    p.validate()?;
    let pts = hawkes_univariate(p.nu * p.m as f64, p.a, p.b, -p.warmup, p.t, rng)?;
    let (mut x1, mut x2) = (Vec::new(), Vec::new());
    for u in pts.into_iter().filter(|&u| u >= 0.0) {
        match rng.random_range(0..p.m) {
            0 => x1.push(u),
            1 => x2.push(u),
            _ => {}
        }
    }
    Ok(TrialPair {
        x1: SpikeTrain::from_sorted(x1, p.t),
        x2: SpikeTrain::from_sorted(x2, p.t),
    })
}

/// `n` independent trials; trial `i` draws from stream `(SAMPLE, i)` below `streams`.
pub fn iid_sample(model: &Model, n: usize, streams: &Streams) -> Result<Sample> {
    if n < 2 {
        return arg(format!("a sample needs n >= 2, got {n}"));
    }
    model.validate()?;
    let trials = (0..n as u64)
        .into_par_iter()
        .map(|i| model.trial(&mut streams.at(&[domain::SAMPLE, i])))
        .collect::<Result<Vec<_>>>()?;
    Sample::new(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    #[test]
    fn poisson_edge_cases() {
        let mut rng = Streams::new(1).rng();
        assert!(poisson_process(0.0, 0.0, 2.0, &mut rng).unwrap().is_empty());
        assert!(poisson_process(-1.0, 0.0, 2.0, &mut rng).is_err());
        let pts = poisson_process(50.0, -1.0, 1.0, &mut rng).unwrap();
        assert!(pts.windows(2).all(|w| w[0] <= w[1]));
        assert!(pts.iter().all(|t| (-1.0..=1.0).contains(t)));
    }

    #[test]
    fn perfect_injection_copies() {
        let p = JitterParams::new(0.0, 0.0, 20.0, 2.0, NoiseSpec::Uniform { lo: 0.0, hi: 0.0 })
            .unwrap();
        let mut rng = Streams::new(2).rng();
        for _ in 0..20 {
            let tr = jitter_trial(&p, &mut rng).unwrap();
            assert_eq!(tr.x1, tr.x2);
        }
    }

    #[test]
    fn noise_parsing() {
        assert_eq!(
            NoiseSpec::parse("uniform:-0.1,0.1").unwrap(),
            NoiseSpec::Uniform { lo: -0.1, hi: 0.1 }
        );
        assert_eq!(
            NoiseSpec::parse("tridec:0.1").unwrap(),
            NoiseSpec::TriangularDecreasing { d: 0.1 }
        );
        assert_eq!(
            NoiseSpec::parse("triinc:0.1").unwrap(),
            NoiseSpec::TriangularIncreasing { d: 0.1 }
        );
        assert!(NoiseSpec::parse("uniform:0.2,0.1").is_err());
        assert!(NoiseSpec::parse("gauss:1").is_err());
        assert!(NoiseSpec::parse("triinc:0").is_err());
        let s = NoiseSpec::parse("triinc:0.1").unwrap();
        assert_eq!(NoiseSpec::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn parameter_validation() {
        let noise = NoiseSpec::Uniform { lo: -0.1, hi: 0.1 };
        let mut p = JitterParams::new(10.0, 10.0, 1.0, 2.0, noise).unwrap();
        assert_eq!(p.margin, 0.1);
        p.margin = 0.05;
        assert!(p.validate().is_err());
        assert!(HawkesParams::new(1.0, 4.0, 4.0, 10, 2.0, 10.0).is_err());
        assert!(HawkesParams::new(1.0, 3.0, 4.0, 1, 2.0, 10.0).is_err());
        let mut rng = Streams::new(0).rng();
        assert!(matches!(
            hawkes_univariate(1.0, 5.0, 4.0, 0.0, 1.0, &mut rng),
            Err(Error::Supercritical { .. })
        ));
    }

    #[test]
    fn hawkes_is_deterministic_and_in_range() {
        let a = hawkes_univariate(10.0, 3.0, 4.0, -5.0, 2.0, &mut Streams::new(9).rng()).unwrap();
        let b = hawkes_univariate(10.0, 3.0, 4.0, -5.0, 2.0, &mut Streams::new(9).rng()).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|t| *t > -5.0 && *t <= 2.0));
    }

    #[test]
    fn substreams_differ() {
        let noise = NoiseSpec::Uniform { lo: -0.1, hi: 0.1 };
        let m = Model::Jitter(JitterParams::new(10.0, 10.0, 1.0, 2.0, noise).unwrap());
        let s = iid_sample(&m, 2, &Streams::new(4)).unwrap();
        assert_ne!(s.trials()[0], s.trials()[1]);
        assert_eq!(s, iid_sample(&m, 2, &Streams::new(4)).unwrap());
        assert!(iid_sample(&m, 1, &Streams::new(4)).is_err());
    }
}
