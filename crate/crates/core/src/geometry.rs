//! Geometry of the thin cylinder: cross-sections carved out by the level
//! set `F > 0`, periodicity cells, and the boundary-fitted maps onto
//! reference rectangles.
//!
//! The implementation is two-dimensional: cross-sections are intervals
//! `(g_minus, g_plus)` in `y2` located by bracketing the sign changes of
//! `F(x1, y1, .)` and refining with bisection plus a Newton polish.

use crate::error::{Error, Result};
use crate::expr::{check_periodicity, Bindings, Expr, Var};
use crate::quadrature::composite_gauss;

/// Models below this cross-section thickness are rejected as degenerate.
pub const THICKNESS_FLOOR: f64 = 1e-6;
/// Floor for the nondegeneracy probe `|F| + |grad_y F|` on the zero set.
pub const VALIDATION_FLOOR: f64 = 1e-8;
/// Number of initial sample points used to bracket sign changes.
const BRACKET_SAMPLES: usize = 64;

/// The boundary function `F(x1, y1, y2)` together with the half-length of
/// the axis interval and root-finding controls.
#[derive(Clone, Debug)]
pub struct GeometryModel {
    f: Expr,
    df_dx1: Expr,
    df_dy1: Expr,
    df_dy2: Expr,
    /// Half-length of the axis interval `(-L, L)`.
    pub half_length: f64,
    /// Bracket radius for roots in `y2`.
    pub search_radius: f64,
    pub root_tol: f64,
    /// When set, validation additionally requires `F = 1` on the axis.
    pub unit_on_axis: bool,
}

impl GeometryModel {
    pub fn new(f: Expr, half_length: f64, search_radius: f64) -> Result<Self> {
        if half_length <= 0.0 || search_radius <= 0.0 {
            return Err(Error::Config(
                "half_length and search_radius must be positive".into(),
            ));
        }
        let df_dx1 = f.differentiate(Var::X1)?;
        let df_dy1 = f.differentiate(Var::Y1)?;
        let df_dy2 = f.differentiate(Var::Y2)?;
        Ok(Self {
            f,
            df_dx1,
            df_dy1,
            df_dy2,
            half_length,
            search_radius,
            root_tol: 1e-10,
            unit_on_axis: false,
        })
    }

    pub fn boundary_fn(&self) -> &Expr {
        &self.f
    }

    pub fn f_at(&self, x1: f64, y1: f64, y2: f64) -> Result<f64> {
        self.f.eval(&bindings(x1, y1, y2))
    }

    fn partials_at(&self, x1: f64, y1: f64, y2: f64) -> Result<[f64; 3]> {
        let b = bindings(x1, y1, y2);
        Ok([
            self.df_dx1.eval(&b)?,
            self.df_dy1.eval(&b)?,
            self.df_dy2.eval(&b)?,
        ])
    }
}

fn bindings(x1: f64, y1: f64, y2: f64) -> Bindings {
    Bindings::new()
        .bind(Var::X1, x1)
        .bind(Var::Y1, y1)
        .bind(Var::Y2, y2)
}

/// One cross-section interval `Q(x1, y1) = (g_minus, g_plus)`.
#[derive(Clone, Copy, Debug)]
pub struct CrossSection {
    pub g_minus: f64,
    pub g_plus: f64,
    /// Derivatives of the roots: `(d/dx1 g_minus, d/dy1 g_minus)`.
    pub dg_minus: [f64; 2],
    pub dg_plus: [f64; 2],
}

impl CrossSection {
    pub fn thickness(&self) -> f64 {
        self.g_plus - self.g_minus
    }
}

/// Tabulated cell data at a fixed `x1`: thickness profile over one period
/// of `y1` and the cell measure `|Box(x1)|`.
#[derive(Clone, Debug)]
pub struct CellGeometry {
    pub x1: f64,
    /// `(y1 node, weight)` pairs of the composite rule on `[0, 1]`.
    pub nodes: Vec<(f64, f64)>,
    pub sections: Vec<CrossSection>,
    pub box_measure: f64,
}

impl CellGeometry {
    pub fn thickness(&self) -> Vec<f64> {
        self.sections.iter().map(|s| s.thickness()).collect()
    }
}

/// Locate the positivity interval of `F(x1, y1, .)` on `(-R, R)`.
pub fn cross_section(model: &GeometryModel, x1: f64, y1: f64) -> Result<CrossSection> {
    let r = model.search_radius;
    let n = BRACKET_SAMPLES;
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let y2 = -r + 2.0 * r * i as f64 / n as f64;
        values.push((y2, model.f_at(x1, y1, y2)?));
    }
    if values.first().unwrap().1 > 0.0 || values.last().unwrap().1 > 0.0 {
        return Err(Error::MultiComponent(format!(
            "F > 0 at the bracket boundary y2 = +-{r}; increase search_radius"
        )));
    }
    let mut crossings = Vec::new();
    for w in values.windows(2) {
        let (a, fa) = w[0];
        let (b, fb) = w[1];
        if (fa <= 0.0 && fb > 0.0) || (fa > 0.0 && fb <= 0.0) {
            crossings.push((a, b));
        }
    }
    if crossings.is_empty() {
        return Err(Error::EmptySection(format!(
            "F <= 0 on the whole bracket at (x1, y1) = ({x1}, {y1})"
        )));
    }
    if crossings.len() != 2 {
        return Err(Error::MultiComponent(format!(
            "{} sign changes detected at (x1, y1) = ({x1}, {y1}); condition (F4) violated",
            crossings.len()
        )));
    }
    let g_minus = refine_root(model, x1, y1, crossings[0].0, crossings[0].1)?;
    let g_plus = refine_root(model, x1, y1, crossings[1].0, crossings[1].1)?;
    if g_plus - g_minus < THICKNESS_FLOOR {
        return Err(Error::EmptySection(format!(
            "cross-section thickness {} below floor at (x1, y1) = ({x1}, {y1})",
            g_plus - g_minus
        )));
    }
    let mid = 0.5 * (g_minus + g_plus);
    if model.f_at(x1, y1, mid)? <= 0.0 {
        return Err(Error::MultiComponent(format!(
            "F not positive at the section midpoint at (x1, y1) = ({x1}, {y1})"
        )));
    }
    let dg = |y2: f64| -> Result<[f64; 2]> {
        let [fx1, fy1, fy2] = model.partials_at(x1, y1, y2)?;
        if fy2.abs() < 1e-14 {
            return Err(Error::DegenerateMap(format!(
                "dF/dy2 vanishes on the boundary at (x1, y1, y2) = ({x1}, {y1}, {y2})"
            )));
        }
        Ok([-fx1 / fy2, -fy1 / fy2])
    };
    Ok(CrossSection {
        g_minus,
        g_plus,
        dg_minus: dg(g_minus)?,
        dg_plus: dg(g_plus)?,
    })
}

/// Bisection to an interval of width 1e-12, then two Newton steps using
/// the symbolic derivative.
fn refine_root(model: &GeometryModel, x1: f64, y1: f64, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = model.f_at(x1, y1, a)?;
    for _ in 0..200 {
        if b - a < 1e-12 {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = model.f_at(x1, y1, m)?;
        if (fa <= 0.0) == (fm <= 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let mut root = 0.5 * (a + b);
    for _ in 0..2 {
        let f = model.f_at(x1, y1, root)?;
        let [.., fy2] = model.partials_at(x1, y1, root)?;
        if fy2.abs() > 1e-14 {
            let next = root - f / fy2;
            if next > a - 1e-9 && next < b + 1e-9 {
                root = next;
            }
        }
    }
    let fr = model.f_at(x1, y1, root)?;
    if fr.abs() > model.root_tol {
        return Err(Error::DegenerateMap(format!(
            "root refinement stalled, |F| = {:.3e} at (x1, y1) = ({x1}, {y1})",
            fr.abs()
        )));
    }
    Ok(root)
}

/// Tabulate the cell `Box(x1)` on composite Gauss nodes over one period.
pub fn cell_geometry(model: &GeometryModel, x1: f64, n_quad: usize) -> Result<CellGeometry> {
    assert!(n_quad >= 4, "n_quad must be at least 4");
    let n_sub = n_quad.div_ceil(4);
    let nodes = composite_gauss(4, n_sub, 0.0, 1.0);
    let mut sections = Vec::with_capacity(nodes.len());
    let mut box_measure = 0.0;
    for &(y1, w) in &nodes {
        let s = cross_section(model, x1, y1)?;
        box_measure += w * s.thickness();
        sections.push(s);
    }
    // h must match across the period boundary.
    let h0 = cross_section(model, x1, 0.0)?.thickness();
    let h1 = cross_section(model, x1, 1.0)?.thickness();
    if (h0 - h1).abs() > 1e-8 * (1.0 + h0.abs()) {
        return Err(Error::Config(format!(
            "thickness profile not periodic in y1: h(0) = {h0}, h(1) = {h1}"
        )));
    }
    Ok(CellGeometry {
        x1,
        nodes,
        sections,
        box_measure,
    })
}

/// Outcome of probing conditions (F1)-(F4) on a sample grid.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ValidationReport {
    pub periodic_in_y1: bool,
    pub nondegenerate_zero_set: bool,
    pub axis_inside: bool,
    pub single_component: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.periodic_in_y1
            && self.nondegenerate_zero_set
            && self.axis_inside
            && self.single_component
    }
}

/// Probe (F1)-(F4) at `n_samples` points per direction. Failures are
/// report entries, never errors.
pub fn validate(model: &GeometryModel, n_samples: usize, seed: u64) -> ValidationReport {
    let mut report = ValidationReport {
        periodic_in_y1: true,
        nondegenerate_zero_set: true,
        axis_inside: true,
        single_component: true,
        messages: Vec::new(),
    };

    match check_periodicity(&model.f, Var::Y1, n_samples.max(8), seed) {
        Ok(true) => {}
        Ok(false) => {
            report.periodic_in_y1 = false;
            report.messages.push("F is not 1-periodic in y1".into());
        }
        Err(e) => {
            report.periodic_in_y1 = false;
            report.messages.push(format!("periodicity probe failed: {e}"));
        }
    }

    let l = model.half_length;
    for i in 0..n_samples {
        let x1 = -l + 2.0 * l * (i as f64 + 0.5) / n_samples as f64;
        for j in 0..n_samples {
            let y1 = (j as f64 + 0.5) / n_samples as f64;
            let section = match cross_section(model, x1, y1) {
                Ok(s) => s,
                Err(Error::MultiComponent(msg)) => {
                    if report.single_component {
                        report.single_component = false;
                        report.messages.push(msg);
                    }
                    continue;
                }
                Err(e) => {
                    if report.single_component {
                        report.single_component = false;
                        report.messages.push(e.to_string());
                    }
                    continue;
                }
            };
            // (F2) at the located boundary points.
            for y2 in [section.g_minus, section.g_plus] {
                let probe = (|| -> Result<f64> {
                    let f = model.f_at(x1, y1, y2)?;
                    let [_, fy1, fy2] = model.partials_at(x1, y1, y2)?;
                    Ok(f.abs() + (fy1 * fy1 + fy2 * fy2).sqrt())
                })();
                match probe {
                    Ok(v) if v >= VALIDATION_FLOOR => {}
                    Ok(v) => {
                        if report.nondegenerate_zero_set {
                            report.nondegenerate_zero_set = false;
                            report.messages.push(format!(
                                "|F| + |grad_y F| = {v:.3e} on the zero set at (x1, y1) = ({x1}, {y1}); condition (F2) violated"
                            ));
                        }
                    }
                    Err(e) => {
                        if report.nondegenerate_zero_set {
                            report.nondegenerate_zero_set = false;
                            report.messages.push(format!("(F2) probe failed: {e}"));
                        }
                    }
                }
            }
            // (F3): the axis must lie inside the section; optionally F = 1 there.
            match model.f_at(x1, y1, 0.0) {
                Ok(v) if v > 0.0 => {
                    if model.unit_on_axis && (v - 1.0).abs() > 1e-10 {
                        if report.axis_inside {
                            report.axis_inside = false;
                            report.messages.push(format!(
                                "F = {v} on the axis at (x1, y1) = ({x1}, {y1}) but the model declares F = 1 there"
                            ));
                        }
                    }
                }
                Ok(v) => {
                    if report.axis_inside {
                        report.axis_inside = false;
                        report
                            .messages
                            .push(format!("F = {v} <= 0 on the axis at (x1, y1) = ({x1}, {y1})"));
                    }
                }
                Err(e) => {
                    if report.axis_inside {
                        report.axis_inside = false;
                        report.messages.push(format!("axis probe failed: {e}"));
                    }
                }
            }
        }
    }
    report
}

/// A smooth map from a parameter rectangle onto a physical domain, with
/// Jacobian data at every point.
pub trait DomainMap: Sync {
    /// Physical point for parameters `(u, v)`.
    fn point(&self, u: f64, v: f64) -> Result<[f64; 2]>;
    /// Jacobian `d(physical)/d(u, v)`, row-major.
    fn jacobian(&self, u: f64, v: f64) -> Result<[[f64; 2]; 2]>;
    /// Extra scalar weight folded into integrals (the `1/eps` of `mu_eps`).
    fn measure_weight(&self) -> f64 {
        1.0
    }
}

pub fn det2(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Inverse transpose of a 2x2 matrix.
pub fn inv_t2(j: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let d = det2(j);
    if d <= 0.0 {
        return Err(Error::DegenerateMap(format!("det J = {d} <= 0")));
    }
    Ok([
        [j[1][1] / d, -j[1][0] / d],
        [-j[0][1] / d, j[0][0] / d],
    ])
}

/// The trivial map: physical coordinates equal the parameters.
pub struct IdentityMap;

impl DomainMap for IdentityMap {
    fn point(&self, u: f64, v: f64) -> Result<[f64; 2]> {
        Ok([u, v])
    }

    fn jacobian(&self, _u: f64, _v: f64) -> Result<[[f64; 2]; 2]> {
        Ok([[1.0, 0.0], [0.0, 1.0]])
    }
}

/// A constant-Jacobian affine map, handy for patch tests.
pub struct LinearMap {
    pub origin: [f64; 2],
    pub m: [[f64; 2]; 2],
}

impl DomainMap for LinearMap {
    fn point(&self, u: f64, v: f64) -> Result<[f64; 2]> {
        Ok([
            self.origin[0] + self.m[0][0] * u + self.m[0][1] * v,
            self.origin[1] + self.m[1][0] * u + self.m[1][1] * v,
        ])
    }

    fn jacobian(&self, _u: f64, _v: f64) -> Result<[[f64; 2]; 2]> {
        Ok(self.m)
    }
}

/// Map `(t, s) in [0,1]^2` onto the cell `Box(x1)`:
/// `y1 = t`, `y2 = g_minus(t) + s * h(t)`.
pub struct CellMap<'a> {
    pub model: &'a GeometryModel,
    pub x1: f64,
}

impl DomainMap for CellMap<'_> {
    fn point(&self, t: f64, s: f64) -> Result<[f64; 2]> {
        let cs = cross_section(self.model, self.x1, t)?;
        Ok([t, cs.g_minus + s * cs.thickness()])
    }

    fn jacobian(&self, t: f64, s: f64) -> Result<[[f64; 2]; 2]> {
        let cs = cross_section(self.model, self.x1, t)?;
        let h = cs.thickness();
        // d y2 / dt at fixed s, from the implicit derivatives of the roots.
        let dy2_dt = cs.dg_minus[1] + s * (cs.dg_plus[1] - cs.dg_minus[1]);
        Ok([[1.0, 0.0], [dy2_dt, h]])
    }
}

/// Map `(x1, s) in [-L, L] x [0, 1]` onto the thin domain:
/// `x2 = eps * (g_minus + s * h)` evaluated at `y1 = x1 / eps`.
pub struct ThinMap<'a> {
    pub model: &'a GeometryModel,
    pub eps: f64,
}

impl ThinMap<'_> {
    pub fn section_at(&self, x1: f64) -> Result<CrossSection> {
        cross_section(self.model, x1, x1 / self.eps)
    }
}

impl DomainMap for ThinMap<'_> {
    fn point(&self, x1: f64, s: f64) -> Result<[f64; 2]> {
        let cs = self.section_at(x1)?;
        Ok([x1, self.eps * (cs.g_minus + s * cs.thickness())])
    }

    fn jacobian(&self, x1: f64, s: f64) -> Result<[[f64; 2]; 2]> {
        let cs = self.section_at(x1)?;
        let h = cs.thickness();
        // Total derivative of g(x1, x1/eps): eps * dg/dx1 + dg/dy1, order
        // one as eps -> 0.
        let dgm = self.eps * cs.dg_minus[0] + cs.dg_minus[1];
        let dgp = self.eps * cs.dg_plus[0] + cs.dg_plus[1];
        let dx2_dx1 = dgm + s * (dgp - dgm);
        Ok([[1.0, 0.0], [dx2_dx1, self.eps * h]])
    }

    fn measure_weight(&self) -> f64 {
        1.0 / self.eps
    }
}
