//! Structured quadrilateral mesh on a parameter rectangle.

/// Uniform `n1 x n2` grid of Q1 quadrilaterals on `[a1, b1] x [0, 1]`.
/// With `periodic1` set, the two dir-1 end columns share nodes.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub a1: f64,
    pub b1: f64,
    pub n1: usize,
    pub n2: usize,
    pub periodic1: bool,
}

impl Mesh {
    pub fn new(a1: f64, b1: f64, n1: usize, n2: usize, periodic1: bool) -> Self {
        assert!(n1 >= 2 && n2 >= 2, "mesh must be at least 2x2");
        assert!(b1 > a1);
        Mesh {
            a1,
            b1,
            n1,
            n2,
            periodic1,
        }
    }

    /// Independent node columns in dir 1.
    pub fn nodes_dir1(&self) -> usize {
        if self.periodic1 {
            self.n1
        } else {
            self.n1 + 1
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_dir1() * (self.n2 + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.n1 * self.n2
    }

    /// Global node id for grid indices, wrapping in dir 1 when periodic.
    pub fn node(&self, i: usize, j: usize) -> usize {
        let nu = self.nodes_dir1();
        j * nu + (i % nu)
    }

    pub fn node_coord(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.a1 + (self.b1 - self.a1) * i as f64 / self.n1 as f64,
            j as f64 / self.n2 as f64,
        )
    }

    /// Counterclockwise corner nodes of element `(e1, e2)`.
    pub fn element_nodes(&self, e1: usize, e2: usize) -> [usize; 4] {
        [
            self.node(e1, e2),
            self.node(e1 + 1, e2),
            self.node(e1 + 1, e2 + 1),
            self.node(e1, e2 + 1),
        ]
    }

    /// Lower-left parameter corner and extents of an element.
    pub fn element_box(&self, e1: usize, e2: usize) -> (f64, f64, f64, f64) {
        let du = (self.b1 - self.a1) / self.n1 as f64;
        let dv = 1.0 / self.n2 as f64;
        (self.a1 + e1 as f64 * du, e2 as f64 * dv, du, dv)
    }

    /// Bilinear interpolation of a nodal field at parameters `(u, v)`.
    pub fn interpolate(&self, field: &[f64], u: f64, v: f64) -> f64 {
        let (e1, e2, xi, eta) = self.locate(u, v);
        let nodes = self.element_nodes(e1, e2);
        let shape = shape_values(xi, eta);
        (0..4).map(|k| shape[k] * field[nodes[k]]).sum()
    }

    /// Gradient of the interpolant in parameter coordinates.
    pub fn interpolate_grad(&self, field: &[f64], u: f64, v: f64) -> [f64; 2] {
        let (e1, e2, xi, eta) = self.locate(u, v);
        let nodes = self.element_nodes(e1, e2);
        let (_, _, du, dv) = self.element_box(e1, e2);
        let grads = shape_grads(xi, eta);
        let mut g = [0.0, 0.0];
        for k in 0..4 {
            g[0] += grads[k][0] * field[nodes[k]] / du;
            g[1] += grads[k][1] * field[nodes[k]] / dv;
        }
        g
    }

    fn locate(&self, u: f64, v: f64) -> (usize, usize, f64, f64) {
        let mut t = (u - self.a1) / (self.b1 - self.a1);
        if self.periodic1 {
            t -= t.floor();
        }
        let e1 = ((t * self.n1 as f64).floor() as usize).min(self.n1 - 1);
        let e2 = ((v * self.n2 as f64).floor() as usize).min(self.n2 - 1);
        let xi = (t * self.n1 as f64 - e1 as f64).clamp(0.0, 1.0);
        let eta = (v * self.n2 as f64 - e2 as f64).clamp(0.0, 1.0);
        (e1, e2, xi, eta)
    }
}

/// Q1 shape functions on the reference square `[0, 1]^2`, corner order
/// (0,0), (1,0), (1,1), (0,1).
pub fn shape_values(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

pub fn shape_grads(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        assert_eq!(Mesh::new(0.0, 1.0, 2, 2, false).num_nodes(), 9);
        assert_eq!(Mesh::new(0.0, 1.0, 2, 2, true).num_nodes(), 6);
        assert_eq!(Mesh::new(0.0, 1.0, 64, 32, true).num_nodes(), 64 * 33);
    }

    #[test]
    fn periodic_wrap() {
        let m = Mesh::new(0.0, 1.0, 4, 2, true);
        assert_eq!(m.node(4, 1), m.node(0, 1));
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let m = Mesh::new(0.0, 2.0, 4, 4, false);
        let field: Vec<f64> = (0..m.num_nodes())
            .map(|n| {
                let i = n % m.nodes_dir1();
                let j = n / m.nodes_dir1();
                let (u, v) = m.node_coord(i, j);
                2.0 * u - 3.0 * v + 1.0
            })
            .collect();
        for &(u, v) in &[(0.3, 0.9), (1.7, 0.1), (0.0, 1.0)] {
            assert!((m.interpolate(&field, u, v) - (2.0 * u - 3.0 * v + 1.0)).abs() < 1e-12);
            let g = m.interpolate_grad(&field, u, v);
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
    }
}
