//! Gauss-Legendre rules and composite tensor rules.

use std::f64::consts::PI;

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Composite Gauss-Legendre rule with `panels` equal panels of `order` nodes on `[a, b]`.
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Rule {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Rule { nodes, weights }
    }

    /// Trapezoid rule for a periodic integrand on `[0, 2π)`.
    pub fn periodic(n: usize) -> Rule {
        let h = 2.0 * PI / n as f64;
        Rule {
            nodes: (0..n).map(|k| k as f64 * h).collect(),
            weights: vec![h; n],
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes in increasing order.
///
/// Newton iteration on the three-term recurrence, seeded by the Chebyshev-like
/// asymptotic guess; accurate to a few ulps for the orders used here (n <= 512).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
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
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product composite Gauss-Legendre rule on a rectangle.
#[derive(Debug, Clone)]
pub struct TensorRule {
    pub x: Rule,
    pub y: Rule,
}

impl TensorRule {
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, panels: usize, order: usize) -> Self {
        TensorRule {
            x: Rule::composite(x0, x1, panels, order),
            y: Rule::composite(y0, y1, panels, order),
        }
    }

    pub fn integrate<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> f64 {
        let mut total = 0.0;
        for (&y, &wy) in self.y.nodes.iter().zip(&self.y.weights) {
            let mut row = 0.0;
            for (&x, &wx) in self.x.nodes.iter().zip(&self.x.weights) {
                row += wx * f(x, y);
            }
            total += wy * row;
        }
        total
    }

    /// All nodes with their product weights, row by row.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.y.nodes.iter().zip(&self.y.weights).flat_map(move |(&y, &wy)| {
            self.x
                .nodes
                .iter()
                .zip(&self.x.weights)
                .map(move |(&x, &wx)| (x, y, wx * wy))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..20 {
            let (x, w) = gauss_legendre(n);
            let rule = Rule { nodes: x, weights: w };
            for deg in 0..(2 * n) {
                let got = rule.integrate(|t| t.powi(deg as i32));
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two_at_high_order() {
        for n in [64, 128, 256] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn composite_rule_on_gaussian() {
        let rule = Rule::composite(-8.0, 8.0, 8, 16);
        let got = rule.integrate(|x| (-x * x).exp());
        assert!((got - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn periodic_trapezoid_is_spectral() {
        let rule = Rule::periodic(32);
        let got = rule.integrate(|t| (t.cos()).exp());
        // 2π I0(1)
        let want = 2.0 * PI * 1.266_065_877_752_008_4;
        assert!((got - want).abs() < 1e-13);
    }
}
