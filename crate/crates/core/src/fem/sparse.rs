//! Compressed sparse row matrices, just enough for symmetric FEM systems.

/// CSR storage: `row_offsets` of length `rows + 1`, column indices and
/// values in row order.
#[derive(Clone, Debug)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut col_indices = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut row_counts = vec![0usize; rows];
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_offsets = vec![0usize; rows + 1];
        for r in 0..rows {
            row_offsets[r + 1] = row_offsets[r] + row_counts[r];
        }
        Csr {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            out[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows];
        for r in 0..self.rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                if self.col_indices[k] == r {
                    d[r] += self.values[k];
                }
            }
        }
        d
    }

    /// Iterate all stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_offsets[r]..self.row_offsets[r + 1])
                .map(move |k| (r, self.col_indices[k], self.values[k]))
        })
    }

    /// Random-probe symmetry test: `|x . Ay - y . Ax|` small relative to
    /// the involved magnitudes.
    pub fn is_symmetric_probe(&self, seed: u64) -> bool {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = self.rows;
        if n != self.cols {
            return false;
        }
        let norm: f64 = self.values.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        for _ in 0..3 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut ax = vec![0.0; n];
            let mut ay = vec![0.0; n];
            self.matvec(&x, &mut ax);
            self.matvec(&y, &mut ay);
            let lhs: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
            let rhs: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
            if (lhs - rhs).abs() > 1e-12 * norm {
                return false;
            }
        }
        true
    }
}
