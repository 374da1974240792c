//! Gauss-Legendre rules, collapsed-coordinate simplex rules, nodal Lagrange
//! bases and an adaptive Gauss-Kronrod integrator used as a reference oracle.
//!
//! Everything here is a pure function of its inputs; rules are plain data and
//! can be shared freely between threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Newton tolerance for Legendre roots.
const NEWTON_TOL: f64 = 1e-15;

/// Highest total degree accepted by [`simplex_rule`].
pub const MAX_SIMPLEX_ORDER: usize = 40;

/// A one-dimensional quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Polynomials up to this degree are integrated exactly.
    pub exactness_degree: usize,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// `n`-point Gauss-Legendre rule on (-1, 1), nodes in ascending order.
pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::Quadrature(
            "Gauss-Legendre rule needs at least one point".into(),
        ));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the (i+1)-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                dp = legendre_and_derivative(n, x).1;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(GaussRule {
        nodes,
        weights,
        exactness_degree: 2 * n - 1,
    })
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(±1) = (±1)^{n+1} n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Affine image of a rule on (-1, 1) onto (a, b).
pub fn map_rule(rule: &GaussRule, a: f64, b: f64) -> Result<GaussRule> {
    if !(a < b) {
        return Err(Error::Quadrature(format!(
            "map_rule needs a < b, got ({a}, {b})"
        )));
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(GaussRule {
        nodes: rule.nodes.iter().map(|x| mid + half * x).collect(),
        weights: rule.weights.iter().map(|w| half * w).collect(),
        exactness_degree: rule.exactness_degree,
    })
}

/// Gauss-Legendre rule with `n` points on (a, b).
pub fn gauss_on(n: usize, a: f64, b: f64) -> Result<GaussRule> {
    map_rule(&gauss_legendre(n)?, a, b)
}

/// Tensor product of a 1D rule with itself in `dims` directions.
///
/// Points come out in lexicographic order with the last coordinate running
/// fastest.
pub fn tensor_rule(rule: &GaussRule, dims: usize) -> Vec<(Vec<f64>, f64)> {
    let n = rule.len();
    let total = n.pow(dims as u32);
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut idx = vec![0; dims];
            for k in (0..dims).rev() {
                idx[k] = rem % n;
                rem /= n;
            }
            let point = idx.iter().map(|&i| rule.nodes[i]).collect();
            let weight = idx.iter().map(|&i| rule.weights[i]).product();
            (point, weight)
        })
        .collect()
}

/// Lagrange basis on a set of distinct nodes, evaluated in barycentric form.
#[derive(Clone, Debug)]
pub struct NodalBasis {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl NodalBasis {
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Quadrature(
                "nodal basis needs at least one node".into(),
            ));
        }
        let n = nodes.len();
        let mut bary = vec![1.0; n];
        for j in 0..n {
            for k in 0..n {
                if k != j {
                    let diff = nodes[j] - nodes[k];
                    if diff == 0.0 {
                        return Err(Error::Quadrature(format!(
                            "repeated node {} in nodal basis",
                            nodes[j]
                        )));
                    }
                    bary[j] /= diff;
                }
            }
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            bary,
        })
    }

    /// Basis built on the nodes of a rule.
    pub fn from_rule(rule: &GaussRule) -> Result<Self> {
        Self::new(&rule.nodes)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn node_hit(&self, x: f64) -> Option<usize> {
        self.nodes.iter().position(|&xn| xn == x)
    }

    /// Values of all basis functions at `x`.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        if let Some(i) = self.node_hit(x) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[i] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for (j, o) in out.iter_mut().enumerate() {
            let t = self.bary[j] / (x - self.nodes[j]);
            *o = t;
            denom += t;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }

    pub fn values(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_all(x, &mut out);
        out
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        self.values(x)[i]
    }

    /// First derivatives of all basis functions at `x`.
    pub fn deriv_all(&self, x: f64, out: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(out.len(), n);
        if n == 1 {
            out[0] = 0.0;
            return;
        }
        if let Some(i) = self.node_hit(x) {
            let mut diag = 0.0;
            for j in 0..n {
                if j != i {
                    let d = (self.bary[j] / self.bary[i]) / (self.nodes[i] - self.nodes[j]);
                    out[j] = d;
                    diag -= d;
                }
            }
            out[i] = diag;
            return;
        }
        let mut vals = vec![0.0; n];
        self.eval_all(x, &mut vals);
        let s: f64 = self.nodes.iter().map(|xn| 1.0 / (x - xn)).sum();
        for j in 0..n {
            out[j] = vals[j] * (s - 1.0 / (x - self.nodes[j]));
        }
    }

    pub fn derivatives(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.deriv_all(x, &mut out);
        out
    }
}

/// Quadrature rule on the reference simplex
/// `{x_i >= 0, sum x_i <= 1}` in two or three dimensions.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

/// Collapsed-coordinate (Duffy) rule exact for total degree `order`.
///
/// The square/cube is mapped onto the simplex; the Jacobian factors raise the
/// polynomial degree in the collapsed directions, which the point counts
/// account for. All weights are positive.
pub fn simplex_rule(order: usize, dim: usize) -> Result<SimplexRule> {
    if order == 0 || order > MAX_SIMPLEX_ORDER {
        return Err(Error::Quadrature(format!(
            "unsupported simplex order {order} (supported 1..={MAX_SIMPLEX_ORDER})"
        )));
    }
    let pts_for = |deg: usize| deg / 2 + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        2 => {
            // x = u, y = v (1 - u), J = 1 - u
            let ru = gauss_on(pts_for(order + 1), 0.0, 1.0)?;
            let rv = gauss_on(pts_for(order), 0.0, 1.0)?;
            for (u, wu) in ru.iter() {
                for (v, wv) in rv.iter() {
                    points.push([u, v * (1.0 - u), 0.0]);
                    weights.push(wu * wv * (1.0 - u));
                }
            }
        }
        3 => {
            // x = u, y = v (1 - u), z = w (1 - u)(1 - v), J = (1 - u)^2 (1 - v)
            let ru = gauss_on(pts_for(order + 2), 0.0, 1.0)?;
            let rv = gauss_on(pts_for(order + 1), 0.0, 1.0)?;
            let rw = gauss_on(pts_for(order), 0.0, 1.0)?;
            for (u, wu) in ru.iter() {
                for (v, wv) in rv.iter() {
                    for (w, ww) in rw.iter() {
                        points.push([u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)]);
                        weights.push(wu * wv * ww * (1.0 - u) * (1.0 - u) * (1.0 - v));
                    }
                }
            }
        }
        _ => {
            return Err(Error::Quadrature(format!(
                "simplex rules exist for d = 2, 3, not {dim}"
            )));
        }
    }
    Ok(SimplexRule {
        dim,
        points,
        weights,
        exactness_degree: order,
    })
}

// Gauss-Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then(other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration.
///
/// Used as an independent reference integrator (forcing terms, scattering
/// cross-section integrals, test oracles), never inside the discrete scheme.
#[derive(Clone, Copy, Debug)]
pub struct Adaptive {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_panels: 4000,
        }
    }
}

impl Adaptive {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let (value, error) = gk15(&f, a, b);
        let mut heap = BinaryHeap::new();
        heap.push(Panel { a, b, value, error });
        let mut total = value;
        let mut total_err = error;
        while total_err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if heap.len() >= self.max_panels {
                return Err(Error::OracleNonConvergence {
                    tolerance: self.rel_tol,
                    estimate: total_err / total.abs().max(f64::MIN_POSITIVE),
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            let (v1, e1) = gk15(&f, worst.a, mid);
            let (v2, e2) = gk15(&f, mid, worst.b);
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.error;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
        // Re-sum in interval order so the result does not depend on heap layout.
        let mut panels = heap.into_vec();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        Ok(panels.iter().map(|p| p.value).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_rule_is_midpoint() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_rule_matches_legendre_roots() {
        let r = gauss_legendre(2).unwrap();
        assert!((r.nodes[0] + 0.577_350_269_189_625_8).abs() < 1e-15);
        assert!((r.nodes[1] - 0.577_350_269_189_625_8).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
        assert!((r.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_point_rule_integrates_x4() {
        let r = gauss_legendre(3).unwrap();
        assert!((r.integrate(|x| x.powi(4)) - 0.4).abs() <= 1e-14);
    }

    #[test]
    fn zero_points_rejected() {
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn monomial_exactness_up_to_twelve_points() {
        for n in 1..=12 {
            let r = gauss_legendre(n).unwrap();
            for k in 0..=(2 * n - 1) {
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                let got = r.integrate(|x| x.powi(k as i32));
                assert!(
                    (got - exact).abs() <= 1e-13,
                    "n={n} k={k}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn high_order_rules_stay_accurate() {
        let r = gauss_legendre(64).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        assert!((r.integrate(|x| x.cos()) - 2.0 * 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn map_rule_examples() {
        let m = map_rule(&gauss_legendre(1).unwrap(), 0.0, 1.0).unwrap();
        assert!((m.nodes[0] - 0.5).abs() < 1e-15 && (m.weights[0] - 1.0).abs() < 1e-15);
        let m = map_rule(&gauss_legendre(2).unwrap(), 500.0, 1000.0).unwrap();
        assert!((m.integrate(|_| 1.0) - 500.0).abs() < 1e-12);
        let m = map_rule(&gauss_legendre(2).unwrap(), 0.0, 1.0).unwrap();
        assert!((m.integrate(|e| e.powi(3)) - 0.25).abs() <= 1e-14);
        assert!(map_rule(&gauss_legendre(2).unwrap(), 1.0, 1.0).is_err());
        assert!(map_rule(&gauss_legendre(2).unwrap(), 2.0, 1.0).is_err());
    }

    #[test]
    fn two_node_basis_is_identity_at_nodes() {
        let b = NodalBasis::from_rule(&gauss_legendre(2).unwrap()).unwrap();
        for i in 0..2 {
            let v = b.values(b.nodes()[i]);
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v[j] - expect).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn partition_of_unity_at_pseudo_random_points() {
        let b = NodalBasis::from_rule(&gauss_legendre(6).unwrap()).unwrap();
        let mut x = 0.1234_f64;
        for _ in 0..100 {
            x = (x * 7.31 + 0.417).fract();
            let s: f64 = b.values(2.0 * x - 1.0).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let b = NodalBasis::from_rule(&gauss_legendre(2).unwrap()).unwrap();
        let x1 = b.nodes()[1];
        let h = 1e-6;
        let fd = (b.eval(1, x1 + h) - b.eval(1, x1 - h)) / (2.0 * h);
        let an = b.derivatives(x1)[1];
        assert!(((an - fd) / an).abs() <= 1e-6, "{an} vs {fd}");
        // off-node derivative for a higher degree basis
        let b = NodalBasis::from_rule(&gauss_legendre(5).unwrap()).unwrap();
        let x = 0.3;
        let an = b.derivatives(x);
        for i in 0..5 {
            let fd = (b.eval(i, x + h) - b.eval(i, x - h)) / (2.0 * h);
            assert!((an[i] - fd).abs() <= 1e-6 * an[i].abs().max(1.0));
        }
    }

    #[test]
    fn repeated_nodes_rejected() {
        assert!(NodalBasis::new(&[0.0, 0.5, 0.5]).is_err());
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn triangle_rule_examples() {
        let r = simplex_rule(1, 2).unwrap();
        let area: f64 = r.weights.iter().sum();
        assert!((area - 0.5).abs() < 1e-15);
        let lin: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * (p[0] + p[1]))
            .sum();
        assert!((lin - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn simplex_monomials_match_closed_form() {
        // ∫ x^a y^b = a! b! / (a+b+2)!, ∫ x^a y^b z^c = a! b! c! / (a+b+c+3)!
        for order in 1..=10 {
            let r = simplex_rule(order, 2).unwrap();
            for a in 0..=order {
                for b in 0..=(order - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let got: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!((got - exact).abs() <= 1e-13, "order {order} x^{a} y^{b}");
                }
            }
            let r = simplex_rule(order, 3).unwrap();
            for a in 0..=order {
                for b in 0..=(order - a) {
                    for c in 0..=(order - a - b) {
                        let exact =
                            factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                        let got: f64 = r
                            .points
                            .iter()
                            .zip(&r.weights)
                            .map(|(p, w)| {
                                w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)
                            })
                            .sum();
                        assert!((got - exact).abs() <= 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn simplex_weights_positive_and_sum_to_measure() {
        for order in 1..=MAX_SIMPLEX_ORDER {
            for (dim, measure) in [(2, 0.5), (3, 1.0 / 6.0)] {
                let r = simplex_rule(order, dim).unwrap();
                assert!(r.weights.iter().all(|&w| w > 0.0));
                let s: f64 = r.weights.iter().sum();
                assert!((s - measure).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn unsupported_simplex_requests_rejected() {
        assert!(simplex_rule(0, 2).is_err());
        assert!(simplex_rule(MAX_SIMPLEX_ORDER + 1, 2).is_err());
        assert!(simplex_rule(3, 4).is_err());
    }

    #[test]
    fn tensor_rule_is_lexicographic() {
        let r = gauss_legendre(2).unwrap();
        let t = tensor_rule(&r, 2);
        assert_eq!(t.len(), 4);
        assert_eq!(t[1].0, vec![r.nodes[0], r.nodes[1]]);
        assert_eq!(t[2].0, vec![r.nodes[1], r.nodes[0]]);
        let s: f64 = t.iter().map(|(_, w)| w).sum();
        assert!((s - 4.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrands() {
        let q = Adaptive::default();
        let v = q.integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!(((v - exact) / exact).abs() < 1e-10);
        let v = q.integrate(|x| x.sqrt(), 0.0, 1.0).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }
}
