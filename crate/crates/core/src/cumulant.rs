//! Off-diagonal cumulant densities of a univariate exponential Hawkes process.
//!
//! The density of `k_l` at distinct times is a sum over dendrograms. The immigrant
//! integral collapses to `μ/(1−ℓ)`. Every internal node `w` at position `p` below
//! its parent contributes
//!
//! `G_w(p) = ∫_p^{m_w} Ψ(x − p) F_w(x) dx + Σ_{leaf c} Ψ(t_c − p) F_w^{−c}(t_c)`,
//!
//! where `F_w(x)` is the product over the children of `w` (a leaf `i` gives
//! `Ψ(t_i − x)`, an internal child gives its own `G`), `m_w` is the earliest leaf
//! below `w`, and `F_w^{−c}` omits child `c`. The second sum is the atom of the node
//! weight: the node coincides with one of its leaves. Since Ψ vanishes on
//! `(−∞, 0]`, only the earliest leaf can carry the atom.

use rayon::prelude::*;

use crate::dendro::{enumerate_dendrograms, Node};
use crate::error::{arg, Error, Result};
use crate::hawkes::{chain_integral, cumulant_bound_density, psi_r};
use crate::quad::{composite_nodes, integrate};
use crate::sim::check_kernel;

/// Lower integration limit of the top node, in units of `1/r` below the earliest time.
pub const TRUNCATION: f64 = 40.0;

struct Ctx<'a> {
    times: &'a [f64],
    a: f64,
    r: f64,
    b: f64,
    tol: f64,
}

fn earliest(node: &Node, times: &[f64]) -> f64 {
    match node {
        Node::Leaf(i) => times[*i],
        Node::Internal(ch) => ch
            .iter()
            .map(|c| earliest(c, times))
            .fold(f64::INFINITY, f64::min),
    }
}

fn all_leaves(children: &[Node]) -> bool {
    children.iter().all(|c| matches!(c, Node::Leaf(_)))
}

impl Ctx<'_> {
    fn psi(&self, t: f64) -> f64 {
        psi_r(t, self.a, self.r)
    }

    fn child_value(&self, child: &Node, p: f64) -> f64 {
        match child {
            Node::Leaf(i) => self.psi(self.times[*i] - p),
            Node::Internal(ch) => self.g(ch, p),
        }
    }

    fn product(&self, children: &[Node], p: f64, skip: Option<usize>) -> f64 {
        children
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != skip)
            .map(|(_, c)| self.child_value(c, p))
            .product()
    }

    /// Σ over leaf children sitting at the earliest time `m` of the product of the others at `m`.
    fn atom(&self, children: &[Node], m: f64) -> f64 {
        children
            .iter()
            .enumerate()
            .filter_map(|(k, c)| match c {
                Node::Leaf(i) if self.times[*i] == m => Some(self.product(children, m, Some(k))),
                _ => None,
            })
            .sum()
    }

    fn g(&self, children: &[Node], p: f64) -> f64 {
        let m = children
            .iter()
            .map(|c| earliest(c, self.times))
            .fold(f64::INFINITY, f64::min);
        if p >= m {
            return 0.0;
        }
        let continuous = if all_leaves(children) {
            let k = children.len() as f64;
            let excess: f64 = children.iter().map(|c| earliest(c, self.times) - m).sum();
            let head = self.a.powf(k + 1.0) * (-self.r * (excess + m - p)).exp();
            head * -(-self.r * (k - 1.0) * (m - p)).exp_m1() / ((k - 1.0) * self.r)
        } else {
            integrate(
                |x| self.psi(x - p) * self.product(children, x, None),
                p,
                m,
                self.tol,
                0.0,
            )
        };
        continuous + self.psi(m - p) * self.atom(children, m)
    }

    fn top(&self, children: &[Node]) -> Result<f64> {
        let m = children
            .iter()
            .map(|c| earliest(c, self.times))
            .fold(f64::INFINITY, f64::min);
        let continuous = if all_leaves(children) {
            let mut alphas: Vec<f64> = children.iter().map(|c| earliest(c, self.times)).collect();
            alphas.sort_by(f64::total_cmp);
            chain_integral(&alphas, self.a, self.b)?
        } else {
            let lo = m - TRUNCATION / self.r;
            integrate(|u| self.product(children, u, None), lo, m, self.tol, 0.0)
        };
        Ok(continuous + self.atom(children, m))
    }
}

fn check_times(l: usize, times: &[f64]) -> Result<()> {
    if !(2..=4).contains(&l) {
        return Err(Error::Capability(l));
    }
    if times.len() != l {
        return arg(format!("expected {l} times, got {}", times.len()));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return arg(format!("time {t} is not finite"));
    }
    for i in 0..l {
        for j in i + 1..l {
            if times[i] == times[j] {
                return Err(Error::DiagonalReduction(times[i], times[j]));
            }
        }
    }
    Ok(())
}

/// Off-diagonal density of `k_l` at `times`, by nested adaptive quadrature.
pub fn eval_cumulant_density(
    l: usize,
    times: &[f64],
    mu: f64,
    a: f64,
    b: f64,
    quad_tol: f64,
) -> Result<f64> {
    check_kernel(a, b)?;
    check_times(l, times)?;
    if !(quad_tol > 0.0) {
        return arg(format!(
            "quadrature tolerance must be positive, got {quad_tol}"
        ));
    }
    let ctx = Ctx {
        times,
        a,
        r: b - a,
        b,
        tol: quad_tol,
    };
    let mut total = 0.0;
    for d in enumerate_dendrograms(l)? {
        if let Node::Internal(ch) = &d.root {
            total += ctx.top(ch)?;
        }
    }
    Ok(mu * b / (b - a) * total)
}

/// Coefficients of `Σ_k c_k e^{k r (p − s)}`, indexed by `k`.
type ExpSum = Vec<f64>;

struct ExpCtx<'a> {
    times: &'a [f64],
    a: f64,
    r: f64,
    s: f64,
}

impl ExpCtx<'_> {
    fn eval(&self, e: &ExpSum, p: f64) -> f64 {
        e.iter()
            .enumerate()
            .map(|(k, c)| c * (k as f64 * self.r * (p - self.s)).exp())
            .sum()
    }

    fn child(&self, c: &Node) -> ExpSum {
        match c {
            Node::Leaf(i) => vec![0.0, self.a * (-self.r * (self.times[*i] - self.s)).exp()],
            Node::Internal(ch) => self.g(ch),
        }
    }

    fn product(&self, parts: &[ExpSum]) -> ExpSum {
        parts.iter().fold(vec![1.0], |acc, e| {
            let mut out = vec![0.0; acc.len() + e.len() - 1];
            for (i, x) in acc.iter().enumerate() {
                for (j, y) in e.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        })
    }

    fn atom(&self, children: &[Node], parts: &[ExpSum], m: f64) -> f64 {
        let mut total = 0.0;
        for (k, c) in children.iter().enumerate() {
            if let Node::Leaf(i) = c {
                if self.times[*i] == m {
                    total += parts
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, e)| self.eval(e, m))
                        .product::<f64>();
                }
            }
        }
        total
    }

    fn g(&self, children: &[Node]) -> ExpSum {
        let m = children
            .iter()
            .map(|c| earliest(c, self.times))
            .fold(f64::INFINITY, f64::min);
        let parts: Vec<ExpSum> = children.iter().map(|c| self.child(c)).collect();
        let f = self.product(&parts);
        let mut out = vec![0.0; f.len().max(2)];
        for (k, &c) in f.iter().enumerate().skip(2) {
            let kk = (k - 1) as f64 * self.r;
            out[1] += self.a * c * (kk * (m - self.s)).exp() / kk;
            out[k] -= self.a * c / kk;
        }
        out[1] += self.a * (-self.r * (m - self.s)).exp() * self.atom(children, &parts, m);
        out
    }

    fn top(&self, children: &[Node]) -> f64 {
        let m = children
            .iter()
            .map(|c| earliest(c, self.times))
            .fold(f64::INFINITY, f64::min);
        let parts: Vec<ExpSum> = children.iter().map(|c| self.child(c)).collect();
        let f = self.product(&parts);
        let continuous: f64 = f
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * (k as f64 * self.r * (m - self.s)).exp() / (k as f64 * self.r))
            .sum();
        continuous + self.atom(children, &parts, m)
    }
}

/// Off-diagonal density of `k_l` by exact algebra on sums of exponentials.
///
/// Below its earliest leaf every node function is a finite combination of
/// `e^{k r p}`, so all integrals are elementary. Accurate while `r·(max t − min t)`
/// stays moderate (exponents up to `l·r·spread` are formed).
pub fn eval_cumulant_density_exact(
    l: usize,
    times: &[f64],
    mu: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    check_kernel(a, b)?;
    check_times(l, times)?;
    let s = times.iter().copied().fold(f64::INFINITY, f64::min);
    let ctx = ExpCtx {
        times,
        a,
        r: b - a,
        s,
    };
    let mut total = 0.0;
    for d in enumerate_dendrograms(l)? {
        if let Node::Internal(ch) = &d.root {
            total += ctx.top(ch);
        }
    }
    Ok(mu * b / (b - a) * total)
}

/// Parameters and times at which a density is compared with its envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePoint {
    pub times: Vec<f64>,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
}

/// Smallest constant `C` with density ≤ `C a^{l−1} μ/(1−ℓ)^l e^{−r·spread}` at every point.
pub fn calibrate_envelope(l: usize, points: &[EnvelopePoint], quad_tol: f64) -> Result<f64> {
    if points.is_empty() {
        return arg("calibration grid must be non-empty");
    }
    let ratios: Vec<f64> = points
        .par_iter()
        .map(|p| {
            let v = eval_cumulant_density(l, &p.times, p.mu, p.a, p.b, quad_tol)?;
            Ok(v / cumulant_bound_density(l, &p.times, p.mu, p.a, p.b, 1.0)?)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Third cumulant of the count `N[0, w]` of the stationary process.
///
/// Adds the first-order term, three copies of the integrated second-order density
/// (one per coinciding pair) and the integrated third-order density, the latter by
/// a product Gauss–Legendre rule on the ordered simplex.
pub fn third_cumulant_window(mu: f64, a: f64, b: f64, w: f64, order: usize) -> Result<f64> {
    check_kernel(a, b)?;
    if !(w > 0.0) || order == 0 {
        return arg("window length and quadrature order must be positive");
    }
    let r = b - a;
    let k1 = mu * b / r;
    let c2 = crate::hawkes::k2_coefficient(mu, a, b)?;
    let k2_int = 2.0 * c2 * (w / r + (-r * w).exp_m1() / (r * r));
    let mut k3_int = 0.0;
    for (t1, w1) in composite_nodes(0.0, w, order, 1) {
        for (t2, w2) in composite_nodes(t1, w, order, 1) {
            for (t3, w3) in composite_nodes(t2, w, order, 1) {
                k3_int += w1 * w2 * w3 * eval_cumulant_density_exact(3, &[t1, t2, t3], mu, a, b)?;
            }
        }
    }
    Ok(k1 * w + 3.0 * k2_int + 6.0 * k3_int)
}
