//! The limiting one-dimensional boundary value problem
//!
//! ```text
//! -(a_eff(x1) u')' + c_bar(x1) u = |Box(x1)| f(x1)   on (-L, L),
//! u(-L) = u(L) = 0,
//! ```
//!
//! discretised with P1 elements on a uniform grid and solved by the
//! Thomas algorithm. Coefficients are supplied as closures of `x1`, so
//! they can come from closed forms or from an interpolated effective
//! profile.

use crate::cell::{effective_profile, CellCache, CoefficientSet, ProfileEntry};
use crate::error::{Error, Result};
use crate::geometry::GeometryModel;
use crate::quadrature::{gauss_legendre_on, ChebyshevInterpolant};

/// Coefficients of the limit problem as functions of `x1`.
pub struct EffectiveData<'a> {
    pub a_eff: &'a dyn Fn(f64) -> Result<f64>,
    pub c_bar: &'a dyn Fn(f64) -> Result<f64>,
    /// Already includes the `|Box(x1)|` weight.
    pub rhs: &'a dyn Fn(f64) -> Result<f64>,
}

/// P1 solution on `[-L, L]` with homogeneous Dirichlet ends.
#[derive(Clone, Debug)]
pub struct LimitSolution {
    pub half_length: f64,
    /// Nodal values including the two boundary zeros; `n + 1` entries.
    pub values: Vec<f64>,
}

impl LimitSolution {
    pub fn n_elements(&self) -> usize {
        self.values.len() - 1
    }

    fn locate(&self, x1: f64) -> (usize, f64, f64) {
        let l = self.half_length;
        let n = self.n_elements();
        let h = 2.0 * l / n as f64;
        let t = ((x1 + l) / h).clamp(0.0, n as f64 - 1e-12);
        let e = t.floor() as usize;
        (e, t - e as f64, h)
    }

    /// Piecewise-linear evaluation; clamps to the interval ends.
    pub fn evaluate(&self, x1: f64) -> f64 {
        let (e, s, _) = self.locate(x1);
        self.values[e] * (1.0 - s) + self.values[e + 1] * s
    }

    /// Elementwise-constant derivative.
    pub fn derivative(&self, x1: f64) -> f64 {
        let (e, _, h) = self.locate(x1);
        (self.values[e + 1] - self.values[e]) / h
    }
}

/// Assemble and solve the limit problem with `n` elements.
pub fn solve_limit_problem(data: &EffectiveData, half_length: f64, n: usize) -> Result<LimitSolution> {
    assert!(n >= 2, "need at least 2 elements");
    if half_length <= 0.0 {
        return Err(Error::Config("half length must be positive".into()));
    }
    let l = half_length;
    let h = 2.0 * l / n as f64;
    // tridiagonal system over interior nodes 1..n
    let m = n - 1;
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m.saturating_sub(1)]; // symmetric off-diagonal
    let mut rhs = vec![0.0; m];
    for e in 0..n {
        let x_left = -l + e as f64 * h;
        let mut k_loc = [[0.0f64; 2]; 2];
        let mut f_loc = [0.0f64; 2];
        for (x, w) in gauss_legendre_on(4, x_left, x_left + h) {
            let a = (data.a_eff)(x)?;
            if a <= 0.0 {
                return Err(Error::NonSpd(format!(
                    "effective coefficient {a} not positive at x1 = {x}"
                )));
            }
            let c = (data.c_bar)(x)?;
            if c < 0.0 {
                return Err(Error::NonSpd(format!(
                    "effective reaction {c} negative at x1 = {x}"
                )));
            }
            let f = (data.rhs)(x)?;
            let s = (x - x_left) / h; // local coordinate
            let phi = [1.0 - s, s];
            let dphi = [-1.0 / h, 1.0 / h];
            for i in 0..2 {
                for j in 0..2 {
                    k_loc[i][j] += w * (a * dphi[i] * dphi[j] + c * phi[i] * phi[j]);
                }
                f_loc[i] += w * f * phi[i];
            }
        }
        // scatter, skipping the Dirichlet end nodes 0 and n
        let g = [e, e + 1];
        for i in 0..2 {
            if g[i] == 0 || g[i] == n {
                continue;
            }
            let gi = g[i] - 1;
            rhs[gi] += f_loc[i];
            for j in 0..2 {
                if g[j] == 0 || g[j] == n {
                    continue;
                }
                let gj = g[j] - 1;
                if gi == gj {
                    diag[gi] += k_loc[i][j];
                } else if gj == gi + 1 {
                    off[gi] += k_loc[i][j];
                }
            }
        }
    }
    // Thomas algorithm
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    let mut denom = diag[0];
    if denom <= 0.0 {
        return Err(Error::NonSpd("limit system lost positivity".into()));
    }
    if m > 1 {
        cp[0] = off[0] / denom;
    }
    dp[0] = rhs[0] / denom;
    for i in 1..m {
        denom = diag[i] - off[i - 1] * cp[i - 1];
        if denom <= 0.0 {
            return Err(Error::NonSpd("limit system lost positivity".into()));
        }
        if i < m - 1 {
            cp[i] = off[i] / denom;
        }
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / denom;
    }
    let mut interior = vec![0.0; m];
    interior[m - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        interior[i] = dp[i] - cp[i] * interior[i + 1];
    }
    let mut values = vec![0.0; n + 1];
    values[1..n].copy_from_slice(&interior);
    Ok(LimitSolution {
        half_length,
        values,
    })
}

/// Smooth effective coefficients tabulated from cell solves at Chebyshev
/// nodes and interpolated barycentrically.
pub struct InterpolatedEffectiveData {
    pub a_eff: ChebyshevInterpolant,
    pub c_bar: ChebyshevInterpolant,
    pub box_measure: ChebyshevInterpolant,
    pub entries: Vec<ProfileEntry>,
}

impl InterpolatedEffectiveData {
    /// Solve the cell problems at `degree + 1` Chebyshev nodes on
    /// `[-L, L]` and build the three interpolants.
    pub fn build(
        model: &GeometryModel,
        coeffs: &CoefficientSet,
        degree: usize,
        cell_n1: usize,
        cell_n2: usize,
        cache: &CellCache,
    ) -> Result<Self> {
        let l = model.half_length;
        let nodes = ChebyshevInterpolant::points(degree, -l, l);
        let entries = effective_profile(model, coeffs, &nodes, cell_n1, cell_n2, cache)?;
        let pick = |sel: &dyn Fn(&ProfileEntry) -> f64| {
            ChebyshevInterpolant::new(-l, l, entries.iter().map(sel).collect())
        };
        Ok(Self {
            a_eff: pick(&|e| e.a_eff),
            c_bar: pick(&|e| e.c_bar),
            box_measure: pick(&|e| e.box_measure),
            entries,
        })
    }

    /// Solve the limit problem using the interpolated coefficients and
    /// the model's source `f`.
    pub fn solve(&self, coeffs: &CoefficientSet, half_length: f64, n: usize) -> Result<LimitSolution> {
        let a = |x: f64| Ok(self.a_eff.eval(x));
        let c = |x: f64| Ok(self.c_bar.eval(x));
        let rhs = |x: f64| Ok(self.box_measure.eval(x) * coeffs.f_at(x)?);
        solve_limit_problem(
            &EffectiveData {
                a_eff: &a,
                c_bar: &c,
                rhs: &rhs,
            },
            half_length,
            n,
        )
    }
}
