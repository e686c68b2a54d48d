//! Cyclic Jacobi eigen-decomposition of small symmetric matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Mat3, Vec3};
#[allow(unused_imports)]
use num_traits::Float;

/// Convergence threshold on the off-diagonal mass, relative to the Frobenius norm.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 50;

/// Eigenvalues in ascending order with matching unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub dim: usize,
    pub values: Vec<f64>,
    /// Column `k` (stored as `vectors[k * dim..(k + 1) * dim]`) belongs to `values[k]`.
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }
}

/// Decomposes the row-major symmetric `dim × dim` matrix `a`.
///
/// Only the upper triangle is read; the matrix is symmetrised first.
pub fn symmetric_eigen(a: &[f64], dim: usize) -> SymmetricEigen {
    assert_eq!(a.len(), dim * dim, "matrix must be dim x dim");
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            m[i * dim + j] = a[i * dim + j];
            m[j * dim + i] = a[i * dim + j];
        }
    }
    // v holds eigenvectors as columns, row-major.
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let off: f64 = (0..dim)
            .flat_map(|i| (0..dim).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * dim + j] * m[i * dim + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOLERANCE * total || off == 0.0 {
            break;
        }
        sweeps += 1;
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = m[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * dim + p];
                let aqq = m[q * dim + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let mkp = m[k * dim + p];
                    let mkq = m[k * dim + q];
                    m[k * dim + p] = c * mkp - s * mkq;
                    m[k * dim + q] = s * mkp + c * mkq;
                }
                for k in 0..dim {
                    let mpk = m[p * dim + k];
                    let mqk = m[q * dim + k];
                    m[p * dim + k] = c * mpk - s * mqk;
                    m[q * dim + k] = s * mpk + c * mqk;
                }
                for k in 0..dim {
                    let vkp = v[k * dim + p];
                    let vkq = v[k * dim + q];
                    v[k * dim + p] = c * vkp - s * vkq;
                    v[k * dim + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| m[a * dim + a].total_cmp(&m[b * dim + b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| m[k * dim + k]).collect();
    let mut vectors = Vec::with_capacity(dim * dim);
    for &k in &order {
        vectors.extend((0..dim).map(|r| v[r * dim + k]));
    }
    SymmetricEigen { dim, values, vectors, sweeps }
}

/// 3×3 convenience wrapper returning ascending eigenvalues and eigenvectors.
pub fn symmetric_eigen3(m: &Mat3) -> ([f64; 3], [Vec3; 3]) {
    let flat: Vec<f64> = m.0.iter().flatten().copied().collect();
    let e = symmetric_eigen(&flat, 3);
    let vec_of = |k: usize| {
        let c = e.vector(k);
        Vec3::new(c[0], c[1], c[2])
    };
    ([e.values[0], e.values[1], e.values[2]], [vec_of(0), vec_of(1), vec_of(2)])
}
