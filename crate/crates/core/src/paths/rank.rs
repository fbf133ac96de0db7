use serde::{Deserialize, Serialize};

use super::trajectory::Trajectory;
use crate::error::Result;
use crate::matcore::eig::eigh;
use crate::matcore::CMatrix;

/// Overlap below which successive eigenframes are reported as discontinuous.
pub const CONTINUITY_OVERLAP: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameWarning {
    pub t: f64,
    pub overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub times: Vec<f64>,
    /// Descending eigenvalues at each grid time.
    pub eigenvalues: Vec<Vec<f64>>,
    pub ranks: Vec<usize>,
    /// Midpoints of grid cells across which the rank changes.
    pub rankshift_times: Vec<f64>,
    /// Trapezoid estimate of `∫ 1/λ_min dt`, `λ_min` the smallest eigenvalue
    /// above `rank_tol`.
    pub inv_gap_integral: f64,
    /// Trapezoid estimate of `∫ 1/√λ_min dt`.
    pub inv_sqrt_gap_integral: f64,
    /// Smallest nonzero eigenvalue over the grid.
    pub min_gap: f64,
    pub continuity_warnings: Vec<FrameWarning>,
    /// Grid times with a repeated nonzero eigenvalue.
    pub degenerate_times: Vec<f64>,
}

impl RankProfile {
    pub fn is_constant_rank(&self) -> bool {
        self.rankshift_times.is_empty()
    }
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Eigenvalue and rank tracking of `traj` on `grid`.
pub fn rank_profile(traj: &Trajectory, grid: &[f64], rank_tol: f64) -> Result<RankProfile> {
    let mut eigenvalues = Vec::with_capacity(grid.len());
    let mut ranks = Vec::with_capacity(grid.len());
    let mut frames: Vec<CMatrix> = Vec::with_capacity(grid.len());
    let mut inv = Vec::with_capacity(grid.len());
    let mut inv_sqrt = Vec::with_capacity(grid.len());
    let mut min_gap = f64::INFINITY;
    let mut degenerate_times = Vec::new();
    let mut degenerate = Vec::with_capacity(grid.len());

    for &t in grid {
        let rho = traj.state(t)?;
        let e = eigh(&rho);
        let rank = e.values.iter().filter(|&&x| x > rank_tol).count();
        let lambda = e
            .values
            .iter()
            .copied()
            .filter(|&x| x > rank_tol)
            .fold(f64::INFINITY, f64::min);
        min_gap = min_gap.min(lambda);
        inv.push(1.0 / lambda);
        inv_sqrt.push(1.0 / lambda.sqrt());
        let repeated = e.values[..rank]
            .windows(2)
            .any(|w| (w[0] - w[1]).abs() <= rank_tol);
        if repeated {
            degenerate_times.push(t);
        }
        degenerate.push(repeated);
        eigenvalues.push(e.values.clone());
        ranks.push(rank);
        frames.push(e.vectors);
    }

    let mut rankshift_times = Vec::new();
    let mut continuity_warnings = Vec::new();
    for k in 1..grid.len() {
        if ranks[k] != ranks[k - 1] {
            rankshift_times.push(0.5 * (grid[k] + grid[k - 1]));
        }
        // A repeated eigenvalue leaves the frame arbitrary.
        if degenerate[k - 1] || degenerate[k] {
            continue;
        }
        let overlap = frame_overlap(&frames[k - 1], &frames[k]);
        if overlap < CONTINUITY_OVERLAP {
            log::warn!(
                "eigenframe overlap {overlap:.3} between t = {} and t = {}",
                grid[k - 1],
                grid[k]
            );
            continuity_warnings.push(FrameWarning {
                t: grid[k],
                overlap,
            });
        }
    }

    Ok(RankProfile {
        times: grid.to_vec(),
        eigenvalues,
        ranks,
        rankshift_times,
        inv_gap_integral: trapezoid(grid, &inv),
        inv_sqrt_gap_integral: trapezoid(grid, &inv_sqrt),
        min_gap,
        continuity_warnings,
        degenerate_times,
    })
}

/// Smallest over columns of `a` of the best overlap with any column of `b`.
fn frame_overlap(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.cols();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..a.rows())
                        .map(|r| a[(r, i)].conj() * b[(r, j)])
                        .sum::<num_complex::Complex64>()
                        .norm()
                })
                .fold(0.0, f64::max)
        })
        .fold(1.0, f64::min)
}
