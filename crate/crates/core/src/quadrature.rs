//! Gauss-Legendre quadrature and Chebyshev interpolation helpers.

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes and weights on `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    xs.iter()
        .zip(&ws)
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Composite rule: `n_sub` subintervals of `[a, b]`, `order` Gauss points each.
pub fn composite_gauss(order: usize, n_sub: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n_sub >= 1);
    let dx = (b - a) / n_sub as f64;
    let mut out = Vec::with_capacity(order * n_sub);
    for i in 0..n_sub {
        out.extend(gauss_legendre_on(order, a + i as f64 * dx, a + (i + 1) as f64 * dx));
    }
    out
}

/// Integrate a callable with a composite Gauss rule.
pub fn integrate<F: FnMut(f64) -> f64>(order: usize, n_sub: usize, a: f64, b: f64, mut f: F) -> f64 {
    composite_gauss(order, n_sub, a, b)
        .into_iter()
        .map(|(x, w)| w * f(x))
        .sum()
}

/// Barycentric interpolation on Chebyshev points of the second kind.
/// Spectrally accurate for smooth functions; used to tabulate slowly
/// varying effective data in `x1`.
#[derive(Clone, Debug)]
pub struct ChebyshevInterpolant {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl ChebyshevInterpolant {
    /// Chebyshev points mapped to `[a, b]`, `n + 1` of them for degree `n`.
    pub fn points(n: usize, a: f64, b: f64) -> Vec<f64> {
        assert!(n >= 1);
        (0..=n)
            .map(|j| {
                let t = (std::f64::consts::PI * j as f64 / n as f64).cos();
                0.5 * (a + b) - 0.5 * (b - a) * t
            })
            .collect()
    }

    /// `values[j]` must be the function value at `points(n, a, b)[j]`.
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Self {
        let n = values.len() - 1;
        Self {
            a,
            b,
            nodes: Self::points(n, a, b),
            values,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &fj)) in self.nodes.iter().zip(&self.values).enumerate() {
            let d = x - xj;
            if d.abs() < 1e-14 * (self.b - self.a).abs() {
                return fj;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            num += w / d * fj;
            den += w / d;
        }
        num / den
    }
}
