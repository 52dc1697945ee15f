//! Constraint elimination and the preconditioned conjugate-gradient solver.

use super::sparse::Csr;
use crate::error::{Error, Result};

pub const CG_TOL: f64 = 1e-10;

/// Constraints applied to an assembled system. A node may appear in at
/// most one class.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    /// `(master, slave)` pairs; slave dofs are folded into their masters.
    pub periodic_pairs: Vec<(usize, usize)>,
    pub dirichlet: Vec<(usize, f64)>,
    /// Lumped-mass vector over the full dof set; when present the solution
    /// is fixed by the weighted zero-mean condition instead of Dirichlet
    /// data (pure-Neumann systems).
    pub zero_mean: Option<Vec<f64>>,
}

/// Reduced system plus the bookkeeping to expand solutions back to the
/// full node set.
pub struct ConstrainedSystem {
    pub a: Csr,
    pub b: Vec<f64>,
    /// Reduced weighted-mean vector for the zero-mean representative.
    mean: Option<Vec<f64>>,
    /// full dof -> representative full dof (identity except slaves)
    rep: Vec<usize>,
    /// representative full dof -> reduced index, usize::MAX for Dirichlet
    reduced_index: Vec<usize>,
    dirichlet_value: Vec<f64>,
    is_dirichlet: Vec<bool>,
}

/// Fold slaves into masters, eliminate Dirichlet rows/columns with an rhs
/// lift, and record the zero-mean vector if requested.
pub fn constrain(a: &Csr, b: &[f64], cs: &ConstraintSet) -> Result<ConstrainedSystem> {
    let n = a.rows;
    let mut rep: Vec<usize> = (0..n).collect();
    let mut class = vec![0u8; n];
    for &(master, slave) in &cs.periodic_pairs {
        if class[slave] != 0 {
            return Err(Error::ConflictingConstraints(slave));
        }
        class[slave] = 1;
        rep[slave] = master;
    }
    let mut is_dirichlet = vec![false; n];
    let mut dirichlet_value = vec![0.0; n];
    for &(node, value) in &cs.dirichlet {
        if class[node] != 0 || is_dirichlet[node] {
            return Err(Error::ConflictingConstraints(node));
        }
        is_dirichlet[node] = true;
        dirichlet_value[node] = value;
    }
    // chase master chains once (pairs may reference merged nodes)
    for i in 0..n {
        let mut r = rep[i];
        while rep[r] != r {
            r = rep[r];
        }
        rep[i] = r;
        if is_dirichlet[r] && class[i] == 1 {
            return Err(Error::ConflictingConstraints(i));
        }
    }

    let mut reduced_index = vec![usize::MAX; n];
    let mut n_red = 0;
    for i in 0..n {
        if rep[i] == i && !is_dirichlet[i] {
            reduced_index[i] = n_red;
            n_red += 1;
        }
    }

    let mut b_red = vec![0.0; n_red];
    for i in 0..n {
        let r = rep[i];
        if !is_dirichlet[r] {
            b_red[reduced_index[r]] += b[i];
        }
    }
    let mut triplets = Vec::with_capacity(a.values.len());
    for (i, j, v) in a.entries() {
        let ri = rep[i];
        let rj = rep[j];
        if is_dirichlet[ri] {
            continue;
        }
        if is_dirichlet[rj] {
            b_red[reduced_index[ri]] -= v * dirichlet_value[rj];
        } else {
            triplets.push((reduced_index[ri], reduced_index[rj], v));
        }
    }
    let a_red = Csr::from_triplets(n_red, n_red, triplets);

    let mean = match &cs.zero_mean {
        Some(m) => {
            let mut m_red = vec![0.0; n_red];
            for i in 0..n {
                let r = rep[i];
                if !is_dirichlet[r] {
                    m_red[reduced_index[r]] += m[i];
                }
            }
            Some(m_red)
        }
        None => None,
    };

    Ok(ConstrainedSystem {
        a: a_red,
        b: b_red,
        mean,
        rep,
        reduced_index,
        dirichlet_value,
        is_dirichlet,
    })
}

impl ConstrainedSystem {
    pub fn reduced_size(&self) -> usize {
        self.a.rows
    }

    /// Solve and expand back to the full node set.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)> {
        let (x_red, iters, res) = if self.mean.is_some() {
            // The pure-Neumann matrix has the constant vector in its
            // kernel; project the rhs onto its orthogonal complement and
            // pick the representative with weighted zero mean afterwards.
            let n = self.b.len();
            let shift: f64 = self.b.iter().sum::<f64>() / n as f64;
            let b: Vec<f64> = self.b.iter().map(|v| v - shift).collect();
            let (mut x, iters, res) = solve_cg_projected(&self.a, &b, tol, max_iter, true)?;
            let m = self.mean.as_ref().unwrap();
            let mx: f64 = m.iter().zip(&x).map(|(a, b)| a * b).sum();
            let msum: f64 = m.iter().sum();
            let c = mx / msum;
            for v in &mut x {
                *v -= c;
            }
            (x, iters, res)
        } else {
            solve_cg_projected(&self.a, &self.b, tol, max_iter, false)?
        };
        let mut full = vec![0.0; self.rep.len()];
        for i in 0..full.len() {
            let r = self.rep[i];
            full[i] = if self.is_dirichlet[r] {
                self.dirichlet_value[r]
            } else {
                x_red[self.reduced_index[r]]
            };
        }
        Ok((full, iters, res))
    }
}

/// Jacobi-preconditioned conjugate gradients: `||Ax - b|| <= tol ||b||`.
pub fn solve_cg(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)> {
    solve_cg_projected(a, b, tol, max_iter, false)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn project_out_ones(v: &mut [f64]) {
    let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

fn solve_cg_projected(
    a: &Csr,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    singular: bool,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let diag = a.diagonal();
    let mut precond = vec![0.0; n];
    for i in 0..n {
        if diag[i] <= 0.0 {
            return Err(Error::NonSpd(format!(
                "nonpositive diagonal entry {} at row {i}",
                diag[i]
            )));
        }
        precond[i] = 1.0 / diag[i];
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    if singular {
        project_out_ones(&mut r);
    }
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(r, p)| r * p).collect();
    if singular {
        project_out_ones(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NonSpd(format!(
                "cg breakdown: p.Ap = {pap} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if singular {
            project_out_ones(&mut r);
        }
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok((x, it, rnorm / bnorm));
        }
        z.iter_mut()
            .zip(r.iter().zip(&precond))
            .for_each(|(z, (r, p))| *z = r * p);
        if singular {
            project_out_ones(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = dot(&r, &r).sqrt();
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: rnorm / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, periodic: bool) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            let left = if i == 0 {
                if periodic {
                    Some(n - 1)
                } else {
                    None
                }
            } else {
                Some(i - 1)
            };
            let right = if i + 1 == n {
                if periodic {
                    Some(0)
                } else {
                    None
                }
            } else {
                Some(i + 1)
            };
            if let Some(j) = left {
                t.push((i, j, -1.0));
            }
            if let Some(j) = right {
                t.push((i, j, -1.0));
            }
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let a = Csr::from_triplets(4, 4, (0..4).map(|i| (i, i, 1.0)).collect());
        let b = vec![1.0, -2.0, 3.0, 0.5];
        let (x, iters, _) = solve_cg(&a, &b, 1e-12, 10).unwrap();
        assert_eq!(iters, 1);
        for i in 0..4 {
            assert!((x[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_laplacian_matches_analytic_sine() {
        // -u'' = f with u = sin(pi x), f = pi^2 sin(pi x), h = 1/(n+1).
        let n = 63;
        let h = 1.0 / (n as f64 + 1.0);
        let a = laplacian_1d(n, false);
        let b: Vec<f64> = (1..=n)
            .map(|i| {
                let x = i as f64 * h;
                std::f64::consts::PI.powi(2) * (std::f64::consts::PI * x).sin() * h * h
            })
            .collect();
        let (x, _, _) = solve_cg(&a, &b, 1e-12, 10_000).unwrap();
        let mut max_err: f64 = 0.0;
        for i in 1..=n {
            let exact = (std::f64::consts::PI * i as f64 * h).sin();
            max_err = max_err.max((x[i - 1] - exact).abs());
        }
        assert!(max_err < 2e-3, "max error {max_err}");
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(
            solve_cg(&a, &[1.0, 1.0], 1e-10, 100),
            Err(Error::NonSpd(_))
        ));
    }

    #[test]
    fn zero_mean_fixes_periodic_rank_deficiency() {
        let n = 4;
        let a = laplacian_1d(n, true);
        let b = vec![1.0, -1.0, 1.0, -1.0];
        let cs = ConstraintSet {
            zero_mean: Some(vec![1.0; n]),
            ..Default::default()
        };
        let sys = constrain(&a, &b, &cs).unwrap();
        let (x, _, _) = sys.solve(1e-12, 1000).unwrap();
        let mean: f64 = x.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn dirichlet_elimination_gives_spd_tridiagonal() {
        let n = 6;
        let a = laplacian_1d(n, false);
        let b = vec![0.0; n];
        let cs = ConstraintSet {
            dirichlet: vec![(0, 2.0), (n - 1, -1.0)],
            ..Default::default()
        };
        let sys = constrain(&a, &b, &cs).unwrap();
        assert_eq!(sys.reduced_size(), n - 2);
        assert!(sys.a.is_symmetric_probe(1));
        let (x, _, _) = sys.solve(1e-12, 1000).unwrap();
        assert_eq!(x[0], 2.0);
        assert_eq!(x[n - 1], -1.0);
        // interior solves the discrete Laplace equation: linear profile
        for i in 1..n - 1 {
            let exact = 2.0 + (-3.0) * i as f64 / (n as f64 - 1.0);
            assert!((x[i] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn conflicting_constraints_are_rejected() {
        let a = laplacian_1d(4, false);
        let cs = ConstraintSet {
            periodic_pairs: vec![(0, 3)],
            dirichlet: vec![(3, 1.0)],
            ..Default::default()
        };
        assert!(matches!(
            constrain(&a, &[0.0; 4], &cs),
            Err(Error::ConflictingConstraints(_))
        ));
    }

    #[test]
    fn periodic_pair_folding() {
        // merge last node into first: acts like the periodic laplacian on 3 dofs
        let a = laplacian_1d(4, true);
        let b = vec![1.0, 0.0, -1.0, 0.0];
        let cs = ConstraintSet {
            periodic_pairs: vec![(0, 3)],
            zero_mean: Some(vec![1.0; 4]),
            ..Default::default()
        };
        let sys = constrain(&a, &b, &cs).unwrap();
        assert_eq!(sys.reduced_size(), 3);
        let (x, _, _) = sys.solve(1e-12, 1000).unwrap();
        assert_eq!(x[0], x[3]);
    }
}
