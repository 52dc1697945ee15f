//! Q1 assembly of `-div(A grad u) + c u = f` on a mapped rectangle.

use super::mesh::{shape_grads, shape_values, Mesh};
use super::sparse::Csr;
use crate::error::{Error, Result};
use crate::geometry::{det2, inv_t2, DomainMap};

/// One Gauss point handed to coefficient and source callbacks.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    /// Physical coordinates (image of the domain map).
    pub phys: [f64; 2],
    /// Parameter coordinates on the mesh rectangle.
    pub param: [f64; 2],
}

/// Diffusion matrix and reaction coefficient at a point. `a` must be
/// symmetric positive definite.
#[derive(Clone, Copy, Debug)]
pub struct Coefficients {
    pub a: [[f64; 2]; 2],
    pub c: f64,
}

/// Right-hand-side contributions: `Scalar` adds `f v`, `Flux` adds
/// `g . grad v` (used by the cell problems).
pub enum Source<'a> {
    Scalar(&'a dyn Fn(&QuadPoint) -> Result<f64>),
    Flux(&'a dyn Fn(&QuadPoint) -> Result<[f64; 2]>),
}

const GAUSS_1D: [(f64, f64); 2] = [
    (0.5 - 0.288_675_134_594_812_9, 0.5),
    (0.5 + 0.288_675_134_594_812_9, 0.5),
];

fn min_eigenvalue(a: &[[f64; 2]; 2]) -> f64 {
    let tr = a[0][0] + a[1][1];
    let disc = ((a[0][0] - a[1][1]).powi(2) + 4.0 * a[0][1] * a[1][0]).max(0.0);
    0.5 * (tr - disc.sqrt())
}

/// Assemble stiffness + mass matrix and one rhs vector per source, with
/// 2x2 Gauss quadrature per element. The map's measure weight is folded
/// into all integrals.
pub fn assemble(
    mesh: &Mesh,
    map: &dyn DomainMap,
    coeff: &dyn Fn(&QuadPoint) -> Result<Coefficients>,
    sources: &[Source],
) -> Result<(Csr, Vec<Vec<f64>>)> {
    let n = mesh.num_nodes();
    let mut triplets = Vec::with_capacity(16 * mesh.num_elements());
    let mut rhs = vec![vec![0.0; n]; sources.len()];
    let mw = map.measure_weight();

    for e2 in 0..mesh.n2 {
        for e1 in 0..mesh.n1 {
            let nodes = mesh.element_nodes(e1, e2);
            let (u0, v0, du, dv) = mesh.element_box(e1, e2);
            let mut local = [[0.0; 4]; 4];
            let mut local_rhs = vec![[0.0; 4]; sources.len()];
            for &(xi, wxi) in &GAUSS_1D {
                for &(eta, weta) in &GAUSS_1D {
                    let u = u0 + xi * du;
                    let v = v0 + eta * dv;
                    let jg = map.jacobian(u, v)?;
                    // total Jacobian d(phys)/d(xi, eta)
                    let j = [
                        [jg[0][0] * du, jg[0][1] * dv],
                        [jg[1][0] * du, jg[1][1] * dv],
                    ];
                    let det = det2(&j);
                    if det <= 0.0 {
                        return Err(Error::DegenerateMap(format!(
                            "det J = {det} at element ({e1}, {e2})"
                        )));
                    }
                    let jinv_t = inv_t2(&j)?;
                    let qp = QuadPoint {
                        phys: map.point(u, v)?,
                        param: [u, v],
                    };
                    let co = coeff(&qp)?;
                    if min_eigenvalue(&co.a) <= 0.0 {
                        return Err(Error::NonSpd(format!(
                            "diffusion matrix has nonpositive eigenvalue at ({}, {})",
                            qp.phys[0], qp.phys[1]
                        )));
                    }
                    let w = wxi * weta * det * mw;
                    let shape = shape_values(xi, eta);
                    let grads_ref = shape_grads(xi, eta);
                    let mut grads = [[0.0; 2]; 4];
                    for k in 0..4 {
                        grads[k] = [
                            jinv_t[0][0] * grads_ref[k][0] + jinv_t[0][1] * grads_ref[k][1],
                            jinv_t[1][0] * grads_ref[k][0] + jinv_t[1][1] * grads_ref[k][1],
                        ];
                    }
                    for kv in 0..4 {
                        let agv = [
                            co.a[0][0] * grads[kv][0] + co.a[0][1] * grads[kv][1],
                            co.a[1][0] * grads[kv][0] + co.a[1][1] * grads[kv][1],
                        ];
                        for ku in 0..4 {
                            local[kv][ku] += w
                                * (agv[0] * grads[ku][0]
                                    + agv[1] * grads[ku][1]
                                    + co.c * shape[kv] * shape[ku]);
                        }
                    }
                    for (src, lr) in sources.iter().zip(local_rhs.iter_mut()) {
                        match src {
                            Source::Scalar(f) => {
                                let fv = f(&qp)?;
                                for kv in 0..4 {
                                    lr[kv] += w * fv * shape[kv];
                                }
                            }
                            Source::Flux(g) => {
                                let gv = g(&qp)?;
                                for kv in 0..4 {
                                    lr[kv] += w * (gv[0] * grads[kv][0] + gv[1] * grads[kv][1]);
                                }
                            }
                        }
                    }
                }
            }
            for kv in 0..4 {
                for ku in 0..4 {
                    triplets.push((nodes[kv], nodes[ku], local[kv][ku]));
                }
                for (s, lr) in local_rhs.iter().enumerate() {
                    rhs[s][nodes[kv]] += lr[kv];
                }
            }
        }
    }
    Ok((Csr::from_triplets(n, n, triplets), rhs))
}

/// Lumped-mass vector `m_i = integral of the i-th shape function` with the
/// map's measure weight, used for zero-mean constraints and averages.
pub fn lumped_mass(mesh: &Mesh, map: &dyn DomainMap) -> Result<Vec<f64>> {
    let mut m = vec![0.0; mesh.num_nodes()];
    let mw = map.measure_weight();
    for e2 in 0..mesh.n2 {
        for e1 in 0..mesh.n1 {
            let nodes = mesh.element_nodes(e1, e2);
            let (u0, v0, du, dv) = mesh.element_box(e1, e2);
            for &(xi, wxi) in &GAUSS_1D {
                for &(eta, weta) in &GAUSS_1D {
                    let u = u0 + xi * du;
                    let v = v0 + eta * dv;
                    let jg = map.jacobian(u, v)?;
                    let det = det2(&[
                        [jg[0][0] * du, jg[0][1] * dv],
                        [jg[1][0] * du, jg[1][1] * dv],
                    ]);
                    let w = wxi * weta * det * mw;
                    let shape = shape_values(xi, eta);
                    for k in 0..4 {
                        m[nodes[k]] += w * shape[k];
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Weighted norms of a nodal field under the mapped measure.
#[derive(Clone, Copy, Debug, Default)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// `L2` and `H1` seminorm of a Q1 field, gradients taken in physical
/// coordinates, integrals weighted by `det J` times the measure weight.
pub fn norms(field: &[f64], mesh: &Mesh, map: &dyn DomainMap) -> Result<Norms> {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    let mw = map.measure_weight();
    for e2 in 0..mesh.n2 {
        for e1 in 0..mesh.n1 {
            let nodes = mesh.element_nodes(e1, e2);
            let (u0, v0, du, dv) = mesh.element_box(e1, e2);
            for &(xi, wxi) in &GAUSS_1D {
                for &(eta, weta) in &GAUSS_1D {
                    let u = u0 + xi * du;
                    let v = v0 + eta * dv;
                    let jg = map.jacobian(u, v)?;
                    let j = [
                        [jg[0][0] * du, jg[0][1] * dv],
                        [jg[1][0] * du, jg[1][1] * dv],
                    ];
                    let det = det2(&j);
                    let jinv_t = inv_t2(&j)?;
                    let w = wxi * weta * det * mw;
                    let shape = shape_values(xi, eta);
                    let grads_ref = shape_grads(xi, eta);
                    let mut val = 0.0;
                    let mut grad = [0.0; 2];
                    for k in 0..4 {
                        val += shape[k] * field[nodes[k]];
                        grad[0] += (jinv_t[0][0] * grads_ref[k][0]
                            + jinv_t[0][1] * grads_ref[k][1])
                            * field[nodes[k]];
                        grad[1] += (jinv_t[1][0] * grads_ref[k][0]
                            + jinv_t[1][1] * grads_ref[k][1])
                            * field[nodes[k]];
                    }
                    l2 += w * val * val;
                    h1 += w * (grad[0] * grad[0] + grad[1] * grad[1]);
                }
            }
        }
    }
    Ok(Norms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    })
}

/// Visit every element Gauss point with its integration weight and the
/// field value/physical gradient there. Shared by the error, flux and
/// pairing integrals.
pub fn quadrature_scan(
    field: &[f64],
    mesh: &Mesh,
    map: &dyn DomainMap,
    visit: &mut dyn FnMut(&QuadPoint, f64, f64, [f64; 2]) -> Result<()>,
) -> Result<()> {
    let mw = map.measure_weight();
    for e2 in 0..mesh.n2 {
        for e1 in 0..mesh.n1 {
            let nodes = mesh.element_nodes(e1, e2);
            let (u0, v0, du, dv) = mesh.element_box(e1, e2);
            for &(xi, wxi) in &GAUSS_1D {
                for &(eta, weta) in &GAUSS_1D {
                    let u = u0 + xi * du;
                    let v = v0 + eta * dv;
                    let jg = map.jacobian(u, v)?;
                    let j = [
                        [jg[0][0] * du, jg[0][1] * dv],
                        [jg[1][0] * du, jg[1][1] * dv],
                    ];
                    let det = det2(&j);
                    let jinv_t = inv_t2(&j)?;
                    let shape = shape_values(xi, eta);
                    let grads_ref = shape_grads(xi, eta);
                    let mut val = 0.0;
                    let mut grad = [0.0; 2];
                    for k in 0..4 {
                        val += shape[k] * field[nodes[k]];
                        grad[0] += (jinv_t[0][0] * grads_ref[k][0]
                            + jinv_t[0][1] * grads_ref[k][1])
                            * field[nodes[k]];
                        grad[1] += (jinv_t[1][0] * grads_ref[k][0]
                            + jinv_t[1][1] * grads_ref[k][1])
                            * field[nodes[k]];
                    }
                    let qp = QuadPoint {
                        phys: map.point(u, v)?,
                        param: [u, v],
                    };
                    visit(&qp, wxi * weta * det * mw, val, grad)?;
                }
            }
        }
    }
    Ok(())
}
