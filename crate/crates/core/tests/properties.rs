use proptest::collection::vec;
use proptest::prelude::*;

use spikesync::cumulant::{eval_cumulant_density, eval_cumulant_density_exact};
use spikesync::hawkes::{crit_rhs_hawkes, delta_phi_hawkes, delta_phi_hawkes_lb, HawkesInput};
use spikesync::jitter::{delta_phi_jitter, noise_moments, JitterInput};
use spikesync::perm::{draw_permutation, permute_sample, PhiMatrix};
use spikesync::rng::Streams;
use spikesync::sim::NoiseSpec;
use spikesync::train::{
    c_statistic, coincidence_count, cross_sum, f_phi, t_statistic, Sample, SpikeTrain, TrialPair,
};
use spikesync::Policy;

const T: f64 = 1.0;

fn train() -> impl Strategy<Value = SpikeTrain> {
    vec(0.0..=T, 0..12).prop_map(|v| SpikeTrain::new(v, T).unwrap())
}

/// Times on a coarse grid so that exact ties and boundary distances occur.
fn lattice_train() -> impl Strategy<Value = SpikeTrain> {
    vec(0u32..=20, 0..10)
        .prop_map(|v| SpikeTrain::new(v.into_iter().map(|k| k as f64 / 20.0).collect(), T).unwrap())
}

fn sample(max_n: usize) -> impl Strategy<Value = Sample> {
    vec((train(), train()), 2..=max_n).prop_map(|v| {
        Sample::new(
            v.into_iter()
                .map(|(a, b)| TrialPair::new(a, b).unwrap())
                .collect(),
        )
        .unwrap()
    })
}

fn brute_count(a: &SpikeTrain, b: &SpikeTrain, delta: f64) -> u64 {
    let mut k = 0;
    for u in a.times() {
        for v in b.times() {
            if (u - v).abs() <= delta {
                k += 1;
            }
        }
    }
    k
}

proptest! {
    #[test]
    fn coincidence_count_is_symmetric(a in lattice_train(), b in lattice_train(), delta in 0.0..0.5f64) {
        prop_assert_eq!(coincidence_count(&a, &b, delta).unwrap(), coincidence_count(&b, &a, delta).unwrap());
    }

    #[test]
    fn coincidence_count_matches_brute_force(a in train(), b in train(), k in 0u32..=20) {
        let delta = k as f64 / 20.0;
        prop_assert_eq!(coincidence_count(&a, &b, delta).unwrap(), brute_count(&a, &b, delta));
    }

    #[test]
    fn coincidence_count_is_monotone_in_delta(a in train(), b in train(), d1 in 0.0..1.0f64, d2 in 0.0..1.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(coincidence_count(&a, &b, lo).unwrap() <= coincidence_count(&a, &b, hi).unwrap());
    }

    #[test]
    fn window_extremes(a in lattice_train(), b in lattice_train()) {
        let all = (a.len() * b.len()) as u64;
        prop_assert_eq!(coincidence_count(&a, &b, T).unwrap(), all);
        let exact = a.times().iter().map(|u| b.times().iter().filter(|v| *v == u).count() as u64).sum::<u64>();
        prop_assert_eq!(coincidence_count(&a, &b, 0.0).unwrap(), exact);
    }

    #[test]
    fn u_statistic_identity(s in sample(8), delta in 0.0..0.3f64) {
        let n = s.n();
        let mut sum = 0i64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += f_phi(&s.trials()[i], &s.trials()[j], delta).unwrap();
                }
            }
        }
        let direct = sum as f64 / (n * (n - 1)) as f64;
        let fast = t_statistic(&s, delta).unwrap();
        prop_assert!((direct - fast).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn cross_sum_matches_pairwise(s in sample(20), delta in 0.0..0.3f64) {
        let mut brute = 0u64;
        for p in s.trials() {
            for q in s.trials() {
                brute += brute_count(&p.x1, &q.x2, delta);
            }
        }
        prop_assert_eq!(cross_sum(&s, delta).unwrap(), brute);
    }

    #[test]
    fn permuted_statistics_rank_alike(s in sample(10), delta in 0.0..0.3f64, seed in any::<u64>()) {
        // C_n and T_n differ by a permutation-independent affine map with positive slope.
        let phi = PhiMatrix::new(&s, delta).unwrap();
        let streams = Streams::new(seed);
        let perms: Vec<Vec<usize>> = (0..6).map(|k| draw_permutation(&streams, k, s.n())).collect();
        let mut pairs = Vec::new();
        for pi in &perms {
            let ps = permute_sample(&s, pi).unwrap();
            let c = c_statistic(&ps, delta).unwrap();
            prop_assert_eq!(c, phi.c_permuted(pi));
            pairs.push((c, t_statistic(&ps, delta).unwrap()));
        }
        let sign = |d: f64| if d.abs() < 1e-9 { 0 } else if d > 0.0 { 1 } else { -1 };
        for x in &pairs {
            for y in &pairs {
                prop_assert_eq!(sign(x.0 - y.0), sign(x.1 - y.1));
            }
        }
    }

    #[test]
    fn jitter_separation_sandwich(
        eta in 0.0..3.0f64,
        delta in 0.0..1.0f64,
        kind in 0usize..3,
        d in 0.01..0.5f64,
    ) {
        let noise = match kind {
            0 => NoiseSpec::Uniform { lo: -d, hi: d / 2.0 },
            1 => NoiseSpec::TriangularDecreasing { d },
            _ => NoiseSpec::TriangularIncreasing { d },
        };
        let input = JitterInput::new(10.0, 10.0, eta, delta, 2.0, noise);
        let p = noise_moments(&noise, delta).unwrap().p;
        let dphi = delta_phi_jitter(&input).unwrap();
        let top = eta * 2.0 * p;
        prop_assert!(dphi <= top + 1e-12);
        prop_assert!(dphi >= top / 2.0 - 1e-12);
    }

    #[test]
    fn hawkes_lower_bound_is_dominated(
        nu in 0.1..5.0f64,
        ell in 0.0..0.95f64,
        b in 0.5..30.0f64,
        m in 2usize..50,
        frac in 0.0..0.5f64,
        t in 0.5..5.0f64,
    ) {
        let input = HawkesInput::new(nu, ell * b, b, m, frac * t, t);
        let lb = delta_phi_hawkes_lb(&input, Policy::Lenient).unwrap();
        let exact = delta_phi_hawkes(&input).unwrap();
        prop_assert!(lb <= exact * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn hawkes_criterion_monotone(n in 60usize..1000, extra in 1usize..500, delta in 0.01..0.5f64, t in 1.0..5.0f64) {
        let input = HawkesInput::new(1.0, 3.0, 4.0, 10, delta, t);
        let at = |inp: &HawkesInput, n| crit_rhs_hawkes(inp, n, 0.05, 0.05, Policy::Lenient).unwrap();
        prop_assert!(at(&input, n + extra) < at(&input, n));
        let wider = HawkesInput::new(1.0, 3.0, 4.0, 10, delta * 1.1, t);
        prop_assert!(at(&wider, n) > at(&input, n));
        let longer = HawkesInput::new(1.0, 3.0, 4.0, 10, delta, t * 1.1);
        prop_assert!(at(&longer, n) > at(&input, n));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cumulant_density_is_exchangeable(
        base in vec(0.0..1.5f64, 4),
        mu in 0.5..5.0f64,
        ell in 0.1..0.9f64,
        b in 1.0..6.0f64,
        l in 2usize..=4,
        seed in any::<u64>(),
    ) {
        let times: Vec<f64> = base[..l].iter().enumerate().map(|(i, t)| t + 1e-3 * i as f64).collect();
        let mut shuffled = times.clone();
        let pi = draw_permutation(&Streams::new(seed), 0, l);
        for (k, &p) in pi.iter().enumerate() {
            shuffled[k] = times[p];
        }
        let a = ell * b;
        let v = eval_cumulant_density(l, &times, mu, a, b, 1e-10).unwrap();
        let w = eval_cumulant_density(l, &shuffled, mu, a, b, 1e-10).unwrap();
        prop_assert!((v - w).abs() <= 1e-9 * v.abs());
        let e = eval_cumulant_density_exact(l, &shuffled, mu, a, b).unwrap();
        prop_assert!((v - e).abs() <= 1e-7 * v.abs());
    }
}
