//! Spike trains, trial pairs and the coincidence statistics built on them.

use crate::error::{arg, Result};

/// A finite, sorted point configuration observed on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    times: Vec<f64>,
    horizon: f64,
}

impl SpikeTrain {
    /// Sorts `times` and validates them against the horizon.
    pub fn new(mut times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return arg(format!(
                "horizon must be positive and finite, got {horizon}"
            ));
        }
        if let Some(t) = times.iter().find(|t| !(0.0..=horizon).contains(*t)) {
            return arg(format!("time {t} outside [0, {horizon}]"));
        }
        times.sort_by(f64::total_cmp);
        Ok(SpikeTrain { times, horizon })
    }

    /// Builds a train from times already sorted and inside `[0, horizon]`.
    pub(crate) fn from_sorted(times: Vec<f64>, horizon: f64) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        debug_assert!(times.iter().all(|t| (0.0..=horizon).contains(t)));
        SpikeTrain { times, horizon }
    }

    pub fn empty(horizon: f64) -> Self {
        SpikeTrain {
            times: Vec::new(),
            horizon,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of entries equal to their predecessor.
    pub fn duplicates(&self) -> usize {
        self.times.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPair {
    pub x1: SpikeTrain,
    pub x2: SpikeTrain,
}

impl TrialPair {
    pub fn new(x1: SpikeTrain, x2: SpikeTrain) -> Result<Self> {
        if x1.horizon != x2.horizon {
            return arg(format!(
                "horizon mismatch: {} vs {}",
                x1.horizon, x2.horizon
            ));
        }
        Ok(TrialPair { x1, x2 })
    }

    pub fn horizon(&self) -> f64 {
        self.x1.horizon
    }
}

/// An i.i.d. collection of trials sharing one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    trials: Vec<TrialPair>,
}

impl Sample {
    pub fn new(trials: Vec<TrialPair>) -> Result<Self> {
        let Some(first) = trials.first() else {
            return arg("sample must contain at least one trial");
        };
        let h = first.horizon();
        if trials.iter().any(|p| p.horizon() != h) {
            return arg("all trials must share one horizon");
        }
        Ok(Sample { trials })
    }

    pub fn trials(&self) -> &[TrialPair] {
        &self.trials
    }

    pub fn n(&self) -> usize {
        self.trials.len()
    }

    pub fn horizon(&self) -> f64 {
        self.trials[0].horizon()
    }

    pub fn into_trials(self) -> Vec<TrialPair> {
        self.trials
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta >= 0.0 {
        Ok(())
    } else {
        arg(format!("delta must be non-negative, got {delta}"))
    }
}

/// Counts pairs of sorted slices with `|u - v| <= delta`.
///
/// Both window edges are tested as `u - v <= delta` and `v - u <= delta`, so the
/// result is exactly symmetric under floating-point arithmetic.
pub fn count_sorted(x1: &[f64], x2: &[f64], delta: f64) -> u64 {
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut total = 0u64;
    for &u in x1 {
        while lo < x2.len() && u - x2[lo] > delta {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < x2.len() && x2[hi] - u <= delta {
            hi += 1;
        }
        total += (hi - lo) as u64;
    }
    total
}

/// φ(x1, x2): the number of point pairs within `delta` of each other.
pub fn coincidence_count(x1: &SpikeTrain, x2: &SpikeTrain, delta: f64) -> Result<u64> {
    check_delta(delta)?;
    Ok(count_sorted(&x1.times, &x2.times, delta))
}

pub fn f_phi(pair_i: &TrialPair, pair_j: &TrialPair, delta: f64) -> Result<i64> {
    check_delta(delta)?;
    if pair_i.horizon() != pair_j.horizon() {
        return arg("horizon mismatch between trials");
    }
    let own = count_sorted(pair_i.x1.times(), pair_i.x2.times(), delta) as i64;
    let cross = count_sorted(pair_i.x1.times(), pair_j.x2.times(), delta) as i64;
    Ok(own - cross)
}

/// C_n: mean coincidence count over trials.
pub fn c_statistic(sample: &Sample, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let total: u64 = sample
        .trials
        .iter()
        .map(|p| count_sorted(p.x1.times(), p.x2.times(), delta))
        .sum();
    Ok(total as f64 / sample.n() as f64)
}

/// Σ_{i,j} φ(X_i¹, X_j²) via a single pooled, sorted second coordinate.
pub fn cross_sum(sample: &Sample, delta: f64) -> Result<u64> {
    check_delta(delta)?;
    let mut pooled: Vec<f64> = sample
        .trials
        .iter()
        .flat_map(|p| p.x2.times().iter().copied())
        .collect();
    pooled.sort_by(f64::total_cmp);
    Ok(sample
        .trials
        .iter()
        .map(|p| count_sorted(p.x1.times(), &pooled, delta))
        .sum())
}

/// T_n, the U-statistic form of the coincidence statistic.
pub fn t_statistic(sample: &Sample, delta: f64) -> Result<f64> {
    let n = sample.n();
    if n < 2 {
        return arg(format!("T_n needs n >= 2, got {n}"));
    }
    let c = c_statistic(sample, delta)?;
    let cross = cross_sum(sample, delta)? as f64;
    let nf = n as f64;
    Ok(nf / (nf - 1.0) * c - cross / (nf * (nf - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(t: &[f64]) -> SpikeTrain {
        SpikeTrain::new(t.to_vec(), 1.0).unwrap()
    }

    fn pair(a: &[f64], b: &[f64]) -> TrialPair {
        TrialPair::new(st(a), st(b)).unwrap()
    }

    #[test]
    fn coincidence_examples() {
        assert_eq!(
            coincidence_count(&st(&[0.5]), &st(&[0.55]), 0.1).unwrap(),
            1
        );
        assert_eq!(
            coincidence_count(&st(&[]), &st(&[0.3, 0.7]), 0.1).unwrap(),
            0
        );
        let x1 = st(&[0.1, 0.2, 0.3]);
        let x2 = st(&[0.15, 0.35]);
        assert_eq!(coincidence_count(&x1, &x2, 0.06).unwrap(), 3);
        assert!(coincidence_count(&x1, &x2, -0.1).is_err());
    }

    #[test]
    fn window_is_inclusive() {
        assert_eq!(
            coincidence_count(&st(&[0.5]), &st(&[0.75]), 0.25).unwrap(),
            1
        );
        assert_eq!(
            coincidence_count(&st(&[0.5, 0.5]), &st(&[0.5]), 0.0).unwrap(),
            2
        );
    }

    #[test]
    fn f_phi_examples() {
        let p = pair(&[0.5], &[0.55]);
        assert_eq!(f_phi(&p, &p, 0.1).unwrap(), 0);
        let q = pair(&[0.1], &[0.2]);
        assert_eq!(f_phi(&p, &q, 0.1).unwrap(), 1);
        let e1 = pair(&[], &[0.5]);
        let e2 = pair(&[], &[0.9]);
        assert_eq!(f_phi(&e1, &e2, 0.1).unwrap(), 0);
        let other = TrialPair::new(
            SpikeTrain::new(vec![], 2.0).unwrap(),
            SpikeTrain::new(vec![], 2.0).unwrap(),
        )
        .unwrap();
        assert!(f_phi(&p, &other, 0.1).is_err());
    }

    #[test]
    fn statistics_on_two_trials() {
        let s = Sample::new(vec![pair(&[0.5], &[0.55]), pair(&[0.1], &[0.2])]).unwrap();
        assert_eq!(c_statistic(&s, 0.1).unwrap(), 1.0);
        assert_eq!(cross_sum(&s, 0.1).unwrap(), 2);
        assert_eq!(t_statistic(&s, 0.1).unwrap(), 1.0);

        let one = Sample::new(vec![pair(&[0.5], &[0.55])]).unwrap();
        assert_eq!(c_statistic(&one, 0.1).unwrap(), 1.0);
        assert_eq!(
            cross_sum(&one, 0.1).unwrap() as f64,
            c_statistic(&one, 0.1).unwrap()
        );
        assert!(t_statistic(&one, 0.1).is_err());

        let empty = Sample::new(vec![pair(&[], &[]), pair(&[], &[])]).unwrap();
        assert_eq!(c_statistic(&empty, 0.1).unwrap(), 0.0);
        assert_eq!(t_statistic(&empty, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn validation() {
        assert!(SpikeTrain::new(vec![1.5], 1.0).is_err());
        assert!(SpikeTrain::new(vec![0.1], 0.0).is_err());
        assert!(SpikeTrain::new(vec![f64::NAN], 1.0).is_err());
        let t = SpikeTrain::new(vec![0.3, 0.1, 0.3], 1.0).unwrap();
        assert_eq!(t.times(), &[0.1, 0.3, 0.3]);
        assert_eq!(t.duplicates(), 1);
        assert!(Sample::new(vec![]).is_err());
    }
}
