//! Quadrature against the rescaled volume measure of the thin cylinder
//! and against its singular limit, plus two-scale pairings.
//!
//! The rescaled measure weights the cylinder by `1/eps` (d = 2), so in
//! the boundary-fitted coordinates `(x1, s)` the integrand simply picks
//! up the local thickness `h(x1, x1/eps)`. The limit measure lives on
//! the axis and weights `dx1` by the cell measure `|Box(x1)|`.

use crate::error::Result;
use crate::expr::{Bindings, Expr, Var};
use crate::geometry::{cell_geometry, cross_section, CrossSection, GeometryModel};
use crate::quadrature::{composite_gauss, gauss_legendre_on};

/// Tensor quadrature on the thin domain, refined per fast period in `x1`.
pub struct MeasureQuadrature<'a> {
    pub model: &'a GeometryModel,
    pub eps: f64,
    /// Nodes along `x1` per period of the fast variable.
    pub n_x1: usize,
    /// Nodes across the thickness.
    pub n_s: usize,
    x1_nodes: Vec<(f64, f64)>,
    s_nodes: Vec<(f64, f64)>,
}

impl<'a> MeasureQuadrature<'a> {
    pub fn new(model: &'a GeometryModel, eps: f64, n_x1: usize, n_s: usize) -> Self {
        assert!(eps > 0.0);
        assert!(n_x1 >= 4, "need at least 4 nodes per fast period");
        assert!(n_s >= 2);
        let l = model.half_length;
        // Period boundaries eps*j inside (-L, L); the two end segments are
        // partial periods and get their own composite rule.
        let mut breaks = vec![-l];
        let mut j = (-l / eps).floor() + 1.0;
        while j * eps < l - 1e-14 * l.max(1.0) {
            if j * eps > -l + 1e-14 * l.max(1.0) {
                breaks.push(j * eps);
            }
            j += 1.0;
        }
        breaks.push(l);
        let per_period_subs = n_x1.div_ceil(4);
        let mut x1_nodes = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let frac = (b - a) / eps;
            let n_sub = ((per_period_subs as f64 * frac).ceil() as usize).max(1);
            x1_nodes.extend(composite_gauss(4, n_sub, a, b));
        }
        let s_nodes = gauss_legendre_on(n_s, 0.0, 1.0);
        Self {
            model,
            eps,
            n_x1,
            n_s,
            x1_nodes,
            s_nodes,
        }
    }

    /// Visit `(x1, w1, section)` for every axial node.
    fn sections(&self) -> Result<Vec<(f64, f64, CrossSection)>> {
        self.x1_nodes
            .iter()
            .map(|&(x1, w)| Ok((x1, w, cross_section(self.model, x1, x1 / self.eps)?)))
            .collect()
    }

    /// General pairing `integral of g(x1, s) phi(x) psi(x / eps) d mu_eps`.
    /// `g` receives the boundary-fitted coordinates; `phi` is bound at
    /// `(x1, x2)` and `psi` at `(y1, y2) = (x1/eps, x2/eps)`.
    pub fn pairing(
        &self,
        g: &dyn Fn(f64, f64) -> Result<f64>,
        phi: Option<&Expr>,
        psi: Option<&Expr>,
    ) -> Result<f64> {
        let mut total = 0.0;
        for (x1, w1, cs) in self.sections()? {
            let h = cs.thickness();
            for &(s, ws) in &self.s_nodes {
                let x2 = self.eps * (cs.g_minus + s * h);
                let mut v = g(x1, s)? * w1 * ws * h;
                if let Some(phi) = phi {
                    let b = Bindings::new().bind(Var::X1, x1).bind(Var::X2, x2);
                    v *= phi.eval(&b)?;
                }
                if let Some(psi) = psi {
                    let b = Bindings::new()
                        .bind(Var::Y1, x1 / self.eps)
                        .bind(Var::Y2, x2 / self.eps);
                    v *= psi.eval(&b)?;
                }
                total += v;
            }
        }
        Ok(total)
    }
}

/// `integral of phi d mu_eps` over the thin cylinder.
pub fn integrate_mu_eps(phi: &Expr, q: &MeasureQuadrature) -> Result<f64> {
    q.pairing(&|_, _| Ok(1.0), Some(phi), None)
}

/// `integral of |Box(x1)| phi(x1, 0) dx1` over the axis.
pub fn integrate_mu_star(phi: &Expr, model: &GeometryModel, n_quad: usize) -> Result<f64> {
    let l = model.half_length;
    let nodes = composite_gauss(4, n_quad.div_ceil(4).max(1), -l, l);
    let mut total = 0.0;
    for (x1, w) in nodes {
        let cell = cell_geometry(model, x1, 64)?;
        let b = Bindings::new().bind(Var::X1, x1).bind(Var::X2, 0.0);
        total += w * cell.box_measure * phi.eval(&b)?;
    }
    Ok(total)
}

/// `integral of psi(y) dy` over the cell `Box(x1)`.
pub fn box_integral(model: &GeometryModel, x1: f64, psi: &Expr, n_y1: usize, n_s: usize) -> Result<f64> {
    let cell = cell_geometry(model, x1, n_y1)?;
    let s_nodes = gauss_legendre_on(n_s, 0.0, 1.0);
    let mut total = 0.0;
    for (&(y1, w1), section) in cell.nodes.iter().zip(&cell.sections) {
        let h = section.thickness();
        for &(s, ws) in &s_nodes {
            let y2 = section.g_minus + s * h;
            let b = Bindings::new().bind(Var::Y1, y1).bind(Var::Y2, y2);
            total += w1 * ws * h * psi.eval(&b)?;
        }
    }
    Ok(total)
}

/// Two-scale pairing of a discrete field against `phi(x) psi(x/eps)`.
pub fn two_scale_pairing(
    g: &dyn Fn(f64, f64) -> Result<f64>,
    phi: &Expr,
    psi: &Expr,
    q: &MeasureQuadrature,
) -> Result<f64> {
    q.pairing(g, Some(phi), Some(psi))
}

/// Gap in the mean-value property:
/// `| integral phi psi(x/eps) d mu_eps  -  integral_I phi(x1, 0) (integral_Box psi dy) dx1 |`.
pub fn mean_value_gap(
    phi: &Expr,
    psi: &Expr,
    model: &GeometryModel,
    eps: f64,
    n_x1: usize,
    n_s: usize,
) -> Result<f64> {
    let q = MeasureQuadrature::new(model, eps, n_x1, n_s);
    let lhs = q.pairing(&|_, _| Ok(1.0), Some(phi), Some(psi))?;
    let l = model.half_length;
    let nodes = composite_gauss(4, 16, -l, l);
    let mut rhs = 0.0;
    for (x1, w) in nodes {
        let inner = box_integral(model, x1, psi, 32, n_s)?;
        let b = Bindings::new().bind(Var::X1, x1).bind(Var::X2, 0.0);
        rhs += w * phi.eval(&b)? * inner;
    }
    Ok((lhs - rhs).abs())
}

/// One row of a measure-convergence table.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct MeasureRow {
    pub eps: f64,
    pub value: f64,
    pub gap: f64,
}

/// Tabulate `| integral phi d mu_eps - integral phi d mu_* |` over a
/// decreasing sequence of `eps`.
pub fn measure_convergence_study(
    phi: &Expr,
    model: &GeometryModel,
    eps_list: &[f64],
    n_x1: usize,
    n_s: usize,
) -> Result<Vec<MeasureRow>> {
    assert!(
        eps_list.windows(2).all(|w| w[0] > w[1]),
        "eps list must be strictly decreasing"
    );
    let limit = integrate_mu_star(phi, model, 64)?;
    eps_list
        .iter()
        .map(|&eps| {
            let q = MeasureQuadrature::new(model, eps, n_x1, n_s);
            let value = integrate_mu_eps(phi, &q)?;
            Ok(MeasureRow {
                eps,
                value,
                gap: (value - limit).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::quadrature::integrate;

    fn model(f: &str) -> GeometryModel {
        GeometryModel::new(parse(f).unwrap(), 1.0, 4.0).unwrap()
    }

    fn oscillating() -> GeometryModel {
        // h(y1) = 2 (1 + 0.5 cos 2 pi y1), |Box| = 2
        model("(1 + 0.5*cos(2*pi*y1))^2 - y2^2")
    }

    #[test]
    fn flat_integral_is_independent_of_eps() {
        let m = model("1 - y2^2");
        let phi = parse("1 - x1^2").unwrap();
        for eps in [0.3, 0.1, 0.037] {
            let q = MeasureQuadrature::new(&m, eps, 8, 8);
            let v = integrate_mu_eps(&phi, &q).unwrap();
            assert!((v - 8.0 / 3.0).abs() < 1e-12, "eps = {eps}: {v}");
        }
    }

    #[test]
    fn cylinder_measure_stays_of_order_one() {
        let m = oscillating();
        let one = parse("1").unwrap();
        let mut values = Vec::new();
        for eps in [0.2, 0.1, 0.05] {
            let q = MeasureQuadrature::new(&m, eps, 16, 8);
            values.push(integrate_mu_eps(&one, &q).unwrap());
        }
        for v in &values {
            assert!((v - 4.0).abs() < 0.5, "values {values:?}");
        }
    }

    #[test]
    fn oscillating_width_matches_brute_force_quadrature() {
        let m = oscillating();
        let phi = parse("1 - x1^2").unwrap();
        let eps = 0.1;
        let q = MeasureQuadrature::new(&m, eps, 16, 8);
        let v = integrate_mu_eps(&phi, &q).unwrap();
        // brute force: 2048-node rule on the x1 axis, thickness evaluated
        // directly from the root profile
        let oracle = integrate(4, 512, -1.0, 1.0, |x1| {
            let h = 2.0 * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * x1 / eps).cos());
            (1.0 - x1 * x1) * h
        });
        assert!((v - oracle).abs() < 1e-8 * oracle.abs(), "{v} vs {oracle}");
        // and the gap to the limit is O(eps)
        let limit = 2.0 * (2.0 - 2.0 / 3.0);
        assert!((v - limit).abs() < 0.1);
    }

    #[test]
    fn scaling_consistency_phi_one_equals_thickness_integral() {
        let m = oscillating();
        let one = parse("1").unwrap();
        let eps = 0.08;
        let q = MeasureQuadrature::new(&m, eps, 16, 8);
        let v = integrate_mu_eps(&one, &q).unwrap();
        let oracle = integrate(4, 1024, -1.0, 1.0, |x1| {
            2.0 * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * x1 / eps).cos())
        });
        assert!((v - oracle).abs() < 1e-9 * oracle.abs());
    }

    #[test]
    fn mu_star_flat_and_odd_integrands() {
        let m = model("1 - y2^2");
        let phi = parse("1 - x1^2").unwrap();
        assert!((integrate_mu_star(&phi, &m, 32).unwrap() - 8.0 / 3.0).abs() < 1e-12);
        let odd = parse("x1").unwrap();
        assert!(integrate_mu_star(&odd, &m, 32).unwrap().abs() < 1e-13);
    }

    #[test]
    fn mu_star_fig1_cross_checks_at_two_refinements() {
        let m = model("2 + sin(2*pi*x1) - y2^2*(1 + 0.5*cos(2*pi*y1))");
        let one = parse("1").unwrap();
        let a = integrate_mu_star(&one, &m, 64).unwrap();
        let b = integrate_mu_star(&one, &m, 128).unwrap();
        assert!((a - b).abs() < 1e-7 * b.abs(), "{a} vs {b}");
    }

    #[test]
    fn lemma_gap_decays_for_oscillating_width() {
        let m = oscillating();
        let phi = parse("1 - x1^2").unwrap();
        let rows =
            measure_convergence_study(&phi, &m, &[0.2, 0.1, 0.05, 0.025], 16, 8).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].gap <= w[0].gap / 1.8,
                "gap decay violated: {:?}",
                rows
            );
        }
    }

    #[test]
    fn flat_gap_vanishes_for_x2_independent_test_function() {
        let m = model("1 - y2^2");
        let phi = parse("1 - x1^2").unwrap();
        let rows = measure_convergence_study(&phi, &m, &[0.2, 0.1], 8, 8).unwrap();
        for r in rows {
            assert!(r.gap <= 1e-12, "{r:?}");
        }
    }

    #[test]
    fn x2_dependent_test_function_with_zero_trace() {
        // phi(x1, 0) = 0 kills the limit; mu_eps sees x2 of size O(eps)
        let m = model("1 - y2^2");
        let phi = parse("x2^2 * (1 - x1^2)").unwrap();
        let rows = measure_convergence_study(&phi, &m, &[0.2, 0.1, 0.05], 8, 8).unwrap();
        // limit is zero and the eps-values shrink linearly
        for w in rows.windows(2) {
            assert!(w[1].gap <= 0.75 * w[0].gap, "{rows:?}");
        }
    }

    #[test]
    fn pairing_degenerates_to_measure_integral() {
        let m = oscillating();
        let phi = parse("1 - x1^2").unwrap();
        let one = parse("1").unwrap();
        let q = MeasureQuadrature::new(&m, 0.1, 16, 8);
        let a = two_scale_pairing(&|_, _| Ok(1.0), &phi, &one, &q).unwrap();
        let b = integrate_mu_eps(&phi, &q).unwrap();
        assert!((a - b).abs() < 1e-13 * b.abs().max(1.0));
    }

    #[test]
    fn pairing_is_linear() {
        let m = oscillating();
        let q = MeasureQuadrature::new(&m, 0.1, 16, 8);
        let phi1 = parse("1 - x1^2").unwrap();
        let phi2 = parse("cos(x1)").unwrap();
        let sum = parse("(1 - x1^2) + 2*cos(x1)").unwrap();
        let psi = parse("cos(2*pi*y1)").unwrap();
        let g = |_: f64, _: f64| Ok(1.0);
        let a = two_scale_pairing(&g, &phi1, &psi, &q).unwrap();
        let b = two_scale_pairing(&g, &phi2, &psi, &q).unwrap();
        let c = two_scale_pairing(&g, &sum, &psi, &q).unwrap();
        assert!((c - (a + 2.0 * b)).abs() <= 1e-12 * (a.abs() + b.abs() + c.abs()).max(1.0));
    }

    #[test]
    fn mean_value_gap_for_oscillating_test_functions() {
        let m = oscillating();
        let phi = parse("1 - x1^2").unwrap();
        // psi = 1: reduces to the measure-convergence gap
        let one = parse("1").unwrap();
        let g1 = mean_value_gap(&phi, &one, &m, 0.1, 16, 8).unwrap();
        let g2 = mean_value_gap(&phi, &one, &m, 0.05, 16, 8).unwrap();
        assert!(g2 < g1);
        // psi = cos(2 pi y1) decays with eps
        let psi = parse("cos(2*pi*y1)").unwrap();
        let g1 = mean_value_gap(&phi, &psi, &m, 0.2, 16, 8).unwrap();
        let g2 = mean_value_gap(&phi, &psi, &m, 0.05, 16, 8).unwrap();
        assert!(g2 < 0.6 * g1, "{g1} -> {g2}");
        // psi depending on y2 decays as well
        let psi = parse("y2^2").unwrap();
        let g1 = mean_value_gap(&phi, &psi, &m, 0.2, 16, 8).unwrap();
        let g2 = mean_value_gap(&phi, &psi, &m, 0.05, 16, 8).unwrap();
        assert!(g2 < 0.6 * g1, "{g1} -> {g2}");
    }
}
