//! Monte-Carlo experiments built on the simulators and the permutation test.
//!
//! Replicate `r` of an experiment draws everything from the stream family
//! `(EXPERIMENT, r)` below the experiment's own family, so results are a pure
//! function of the configuration and seed whatever the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{arg, Error, Result};
use crate::perm::{permutation_test_with, TestConfig};
use crate::rng::{domain, Streams};
use crate::sim::{iid_sample, Model};
use crate::train::t_statistic;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub test: TestConfig,
    pub n: usize,
    pub n_sim: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.test.validate()?;
        if self.n < 2 {
            return arg(format!("n must be >= 2, got {}", self.n));
        }
        if self.n_sim == 0 {
            return arg("N_sim must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

impl MeanEstimate {
    /// Mean and standard error of the mean.
    pub fn from_values(values: &[f64]) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        MeanEstimate {
            estimate: mean,
            stderr: (var / k).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub param: String,
    pub value: f64,
    pub power: f64,
    pub ci_half: f64,
    pub n_sim: usize,
    pub n: usize,
    pub b: usize,
    pub alpha: f64,
}

/// Half-width of the normal-approximation 95% interval for a proportion.
pub fn ci_half_width(p: f64, n_sim: usize) -> f64 {
    1.96 * (p * (1.0 - p) / n_sim as f64).sqrt()
}

fn replicate(streams: &Streams, r: usize) -> Streams {
    streams.child(&[domain::EXPERIMENT, r as u64])
}

/// T_n for each of `n_sim` independent samples, in replicate order.
pub fn t_statistics(
    model: &Model,
    n: usize,
    delta: f64,
    n_sim: usize,
    streams: &Streams,
) -> Result<Vec<f64>> {
    (0..n_sim)
        .into_par_iter()
        .map(|r| t_statistic(&iid_sample(model, n, &replicate(streams, r))?, delta))
        .collect()
}

/// Mean of T_n over `n_sim` samples; its expectation is Δφ.
pub fn estimate_delta_phi_mc(
    model: &Model,
    n: usize,
    delta: f64,
    n_sim: usize,
    streams: &Streams,
) -> Result<MeanEstimate> {
    if n_sim == 0 {
        return arg("N_sim must be >= 1");
    }
    Ok(MeanEstimate::from_values(&t_statistics(
        model, n, delta, n_sim, streams,
    )?))
}

fn rejection_count(
    model: &Model,
    cfg: &TestConfig,
    n: usize,
    n_sim: usize,
    streams: &Streams,
) -> Result<usize> {
    cfg.validate()?;
    if n_sim == 0 {
        return arg("N_sim must be >= 1");
    }
    let decisions: Vec<bool> = (0..n_sim)
        .into_par_iter()
        .map(|r| {
            let rep = replicate(streams, r);
            let sample = iid_sample(model, n, &rep)?;
            Ok(permutation_test_with(&sample, cfg, &rep, false)?.reject)
        })
        .collect::<Result<_>>()?;
    Ok(decisions.iter().filter(|d| **d).count())
}

fn point(
    param: &str,
    value: f64,
    rejections: usize,
    cfg: &TestConfig,
    n: usize,
    n_sim: usize,
) -> PowerPoint {
    let power = rejections as f64 / n_sim as f64;
    PowerPoint {
        param: param.into(),
        value,
        power,
        ci_half: ci_half_width(power, n_sim),
        n_sim,
        n,
        b: cfg.b,
        alpha: cfg.alpha,
    }
}

/// Fraction of `n_sim` permutation tests that reject.
pub fn estimate_power(
    model: &Model,
    cfg: &TestConfig,
    n: usize,
    n_sim: usize,
    streams: &Streams,
) -> Result<PowerPoint> {
    let k = rejection_count(model, cfg, n, n_sim, streams)?;
    Ok(point("n", n as f64, k, cfg, n, n_sim))
}

/// Rejection rate of a model satisfying the null hypothesis.
pub fn type_i_experiment(
    model: &Model,
    cfg: &TestConfig,
    n: usize,
    n_sim: usize,
    streams: &Streams,
) -> Result<PowerPoint> {
    let k = rejection_count(model, cfg, n, n_sim, streams)?;
    Ok(point("typeI", n as f64, k, cfg, n, n_sim))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Delta,
    N,
    M,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Delta => "delta",
            Axis::N => "n",
            Axis::M => "M",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Axis::Delta),
            "n" => Ok(Axis::N),
            "M" | "m" => Ok(Axis::M),
            _ => arg(format!("unknown axis `{s}` (expected delta, n or M)")),
        }
    }
}

/// One power estimate per grid value; grid point `g` uses the family `g` below `streams`.
pub fn power_curve(
    model: &Model,
    cfg: &TestConfig,
    axis: Axis,
    grid: &[f64],
    n: usize,
    n_sim: usize,
    streams: &Streams,
) -> Result<Vec<PowerPoint>> {
    if grid.is_empty() {
        return arg("grid must be non-empty");
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return arg("grid must be strictly increasing");
    }
    let mut out = Vec::with_capacity(grid.len());
    for (g, &v) in grid.iter().enumerate() {
        let (mut model, mut cfg, mut n) = (model.clone(), cfg.clone(), n);
        match axis {
            Axis::Delta => cfg.delta = v,
            Axis::N => n = as_count(v)?,
            Axis::M => match &mut model {
                Model::Hawkes(p) | Model::IndependentHawkes(p) => p.m = as_count(v)?,
                Model::Jitter(_) => return arg("the M axis needs a Hawkes model"),
            },
        }
        let k = rejection_count(&model, &cfg, n, n_sim, &streams.child(&[g as u64]))?;
        out.push(point(axis.name(), v, k, &cfg, n, n_sim));
    }
    Ok(out)
}

fn as_count(v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        arg(format!("{v} is not a whole number"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub step: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_min: 10,
            n_max: 5000,
            step: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NStar {
    pub n_star: usize,
    /// Every probe as `(n, estimated power)`, sorted by `n`.
    pub probes: Vec<(usize, f64)>,
}

/// Smallest lattice point whose power reaches `1 − β`.
///
/// The lattice is the multiples of `step` in `[max(n_min, 2), n_max]`. The search
/// doubles the lattice index until the target is met, then bisects.
pub fn find_n_star<F>(mut power: F, beta: f64, search: SearchConfig) -> Result<NStar>
where
    F: FnMut(usize) -> Result<f64>,
{
    if !(beta > 0.0 && beta < 1.0) {
        return arg(format!("beta must lie in (0, 1), got {beta}"));
    }
    if search.step == 0 {
        return arg("lattice step must be positive");
    }
    let first = search.n_min.max(2).div_ceil(search.step) * search.step;
    if first > search.n_max {
        return arg(format!("empty lattice: {first} > n_max = {}", search.n_max));
    }
    let last_k = (search.n_max - first) / search.step;
    let at = |k: usize| first + k * search.step;
    let target = 1.0 - beta;
    let mut probes: BTreeMap<usize, f64> = BTreeMap::new();
    let mut probe = |k: usize, probes: &mut BTreeMap<usize, f64>| -> Result<bool> {
        let n = at(k);
        let p = match probes.get(&n) {
            Some(p) => *p,
            None => {
                let p = power(n)?;
                probes.insert(n, p);
                p
            }
        };
        Ok(p >= target)
    };
    if probe(0, &mut probes)? {
        return Ok(NStar {
            n_star: first,
            probes: probes.into_iter().collect(),
        });
    }
    let (mut lo, mut hi) = (0usize, 1usize);
    loop {
        let k = hi.min(last_k);
        if probe(k, &mut probes)? {
            hi = k;
            break;
        }
        if k == last_k {
            return Err(Error::Saturated {
                n_max: search.n_max,
                probes: probes.into_iter().collect(),
            });
        }
        lo = k;
        hi = k * 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(mid, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(NStar {
        n_star: at(hi),
        probes: probes.into_iter().collect(),
    })
}

/// n* for a model, each probe an `n_sim`-replicate power estimate keyed by `n`.
pub fn n_star_for_model(
    model: &Model,
    cfg: &TestConfig,
    beta: f64,
    search: SearchConfig,
    n_sim: usize,
    streams: &Streams,
) -> Result<NStar> {
    find_n_star(
        |n| Ok(estimate_power(model, cfg, n, n_sim, &streams.child(&[n as u64]))?.power),
        beta,
        search,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFit {
    pub c0: f64,
    pub c1: f64,
    pub residuals: Vec<f64>,
    /// Standard error of `c1`; `None` with only two points.
    pub c1_stderr: Option<f64>,
}

/// Least squares of n* on `(1, M²)`.
pub fn fit_quadratic(ms: &[f64], nstars: &[f64]) -> Result<QuadraticFit> {
    if ms.len() != nstars.len() {
        return arg("M and n* lists differ in length");
    }
    if ms.len() < 2 {
        return arg("need at least two points");
    }
    let x: Vec<f64> = ms.iter().map(|m| m * m).collect();
    let k = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / k;
    let ybar = nstars.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Singular("all M values are equal".into()));
    }
    let sxy: f64 = x
        .iter()
        .zip(nstars)
        .map(|(a, b)| (a - xbar) * (b - ybar))
        .sum();
    let c1 = sxy / sxx;
    let c0 = ybar - c1 * xbar;
    let residuals: Vec<f64> = x
        .iter()
        .zip(nstars)
        .map(|(a, b)| b - (c0 + c1 * a))
        .collect();
    let c1_stderr = (x.len() > 2).then(|| {
        let rss: f64 = residuals.iter().map(|e| e * e).sum();
        (rss / (k - 2.0) / sxx).sqrt()
    });
    Ok(QuadraticFit {
        c0,
        c1,
        residuals,
        c1_stderr,
    })
}

/// `#meta` header line; `timestamp` is the only field that varies between identical runs.
pub fn meta_line(fields: &[(&str, String)], timestamp: Option<u64>) -> String {
    let mut s = String::from("#meta");
    for (k, v) in fields {
        let _ = write!(s, " {k}={v}");
    }
    let _ = write!(s, " version={}", crate::VERSION);
    if let Some(t) = timestamp {
        let _ = write!(s, " timestamp={t}");
    }
    s
}

pub const POWER_HEADER: &str = "param,value,power,ci_half,N_sim,n,B,alpha";

pub fn power_csv(points: &[PowerPoint]) -> String {
    let mut s = format!("{POWER_HEADER}\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.param, p.value, p.power, p.ci_half, p.n_sim, p.n, p.b, p.alpha
        );
    }
    s
}

pub const NSTAR_HEADER: &str = "M,n_star,probes";

pub fn nstar_csv(rows: &[(usize, NStar)]) -> String {
    let mut s = format!("{NSTAR_HEADER}\n");
    for (m, r) in rows {
        let probes: Vec<String> = r.probes.iter().map(|(n, p)| format!("{n}:{p}")).collect();
        let _ = writeln!(s, "{m},{},{}", r.n_star, probes.join("|"));
    }
    s
}

/// Minimal SVG line plot of power against the grid value, with CI bars.
pub fn power_svg(points: &[PowerPoint], title: &str) -> String {
    let (w, h, pad) = (480.0, 320.0, 48.0);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>",
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    if points.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let lo = points.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|p| p.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |v: f64| pad + (v - lo) / span * (w - 2.0 * pad);
    let y = |p: f64| h - pad - p.clamp(0.0, 1.0) * (h - 2.0 * pad);
    let path: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p.value), y(p.power)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\"/>",
        path.join(" ")
    );
    for p in points {
        let (cx, top, bottom) = (x(p.value), y(p.power + p.ci_half), y(p.power - p.ci_half));
        let _ = writeln!(s, "<line x1=\"{cx:.2}\" y1=\"{top:.2}\" x2=\"{cx:.2}\" y2=\"{bottom:.2}\" stroke=\"gray\"/>");
        let _ = writeln!(
            s,
            "<circle cx=\"{cx:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>",
            y(p.power)
        );
    }
    let name = escape(&points[0].param);
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"{}\">{lo}</text>", h - pad + 16.0);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{hi}</text>",
        w - pad,
        h - pad + 16.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{name}</text>",
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">1</text>",
        pad - 4.0,
        pad + 4.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>",
        pad - 4.0,
        h - pad + 4.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
