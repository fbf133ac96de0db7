//! Dense real least-squares helpers for the rate fits and the feasibility solver.

use crate::matcore::CMatrix;

/// Column-major real matrix.
#[derive(Clone, Debug)]
pub(crate) struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn from_columns(rows: usize, columns: Vec<Vec<f64>>) -> Self {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            debug_assert_eq!(c.len(), rows);
            data.extend(c);
        }
        Self { rows, cols, data }
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.column(j)) {
                    *o += a * xj;
                }
            }
        }
        out
    }

    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|j| self.column(j).iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest eigenvalue of `AᵀA` by power iteration from a fixed start.
    pub fn gram_norm(&self) -> f64 {
        let mut x = vec![1.0 / (self.cols as f64).sqrt(); self.cols];
        let mut lambda = 0.0;
        for _ in 0..200 {
            let y = self.mul_t(&self.mul(&x));
            let n = norm(&y);
            if n == 0.0 {
                return 0.0;
            }
            let converged = (n - lambda).abs() <= 1e-10 * n;
            lambda = n;
            x = y.into_iter().map(|v| v / n).collect();
            if converged {
                break;
            }
        }
        lambda
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Real and imaginary parts of the entries, concatenated.
pub(crate) fn flatten(m: &CMatrix) -> Vec<f64> {
    let s = m.as_slice();
    s.iter()
        .map(|z| z.re)
        .chain(s.iter().map(|z| z.im))
        .collect()
}

/// Nonnegative least squares `min ‖Ax − b‖, x ≥ 0` by accelerated projected
/// gradient from `x0`.
pub(crate) fn nnls(a: &RealMatrix, b: &[f64], x0: &[f64], max_iter: usize) -> Vec<f64> {
    let lip = a.gram_norm();
    if lip == 0.0 {
        return x0.to_vec();
    }
    let step = 1.0 / lip;
    let mut x: Vec<f64> = x0.iter().map(|v| v.max(0.0)).collect();
    let mut z = x.clone();
    let mut theta: f64 = 1.0;
    for _ in 0..max_iter {
        let r: Vec<f64> = a.mul(&z).iter().zip(b).map(|(p, q)| p - q).collect();
        if norm(&r) <= 1e-15 * (1.0 + norm(b)) {
            return z;
        }
        let g = a.mul_t(&r);
        let next: Vec<f64> = z
            .iter()
            .zip(&g)
            .map(|(zi, gi)| (zi - step * gi).max(0.0))
            .collect();
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        z = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + beta * (n - o))
            .map(|v| v.max(0.0))
            .collect();
        x = next;
        theta = theta_next;
    }
    x
}
