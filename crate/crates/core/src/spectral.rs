//! Spectral synchronization certificates.
//!
//! For an input set `S` the reduced coupling matrix is
//! `M(S) = D(S)ᵀ D̂(S) K(S)` and `R(S) = (M(S) + M(S)ᵀ)/2`. A homogeneous
//! network synchronizes when `λ_min(R(S)) > 0`; a heterogeneous one when
//! `λ_min(R(S))` exceeds `‖D(S)ᵀω(S)‖₂`, which is itself bounded by the
//! S-independent [`hetero_threshold`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{reduce, InputSet, NaturalFrequencies, SignedDigraph};

/// Margin required on top of a threshold before a certificate is accepted.
pub const EPS_STRICT: f64 = 1e-8;

/// The network restricted to its non-input nodes.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub ds: DMatrix<f64>,
    pub dhat_s: DMatrix<f64>,
    /// Diagonal of `K(S)`.
    pub k_s: DVector<f64>,
    pub m_s: DMatrix<f64>,
    pub r_s: DMatrix<f64>,
    pub omega_s: DVector<f64>,
    /// Retained edge column → edge index in the full graph.
    pub edge_map: Vec<usize>,
    /// Retained node row → node id in the full graph.
    pub node_map: Vec<usize>,
}

impl ReducedSystem {
    pub(crate) fn assemble(
        ds: DMatrix<f64>,
        dhat_s: DMatrix<f64>,
        k_s: DVector<f64>,
        omega_s: DVector<f64>,
        node_map: Vec<usize>,
        edge_map: Vec<usize>,
    ) -> Self {
        let m_s = ds.transpose() * &dhat_s * DMatrix::from_diagonal(&k_s);
        let r_s = symmetric_part(&m_s);
        Self { ds, dhat_s, k_s, m_s, r_s, omega_s, edge_map, node_map }
    }

    pub fn lambda_min(&self) -> f64 {
        lambda_min(&self.r_s).expect("R(S) is square")
    }

    /// `D(S)ᵀω(S)`, the constant drive of the edge dynamics.
    pub fn drive(&self) -> DVector<f64> {
        self.ds.transpose() * &self.omega_s
    }
}

pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Full `M` and `R` of a graph (the `S = ∅` case).
pub fn coupling_matrices(g: &SignedDigraph) -> (DMatrix<f64>, DMatrix<f64>) {
    let rs = reduce(g, &NaturalFrequencies::zeros(g.n()), &InputSet::empty());
    (rs.m_s, rs.r_s)
}

/// Smallest eigenvalue of a symmetric matrix; `+∞` for a 0×0 matrix.
///
/// The input is symmetrized before the dense eigensolve.
pub fn lambda_min(r: &DMatrix<f64>) -> Result<f64> {
    if !r.is_square() {
        return Err(Error::NotSquare { rows: r.nrows(), cols: r.ncols() });
    }
    if r.is_empty() {
        return Ok(f64::INFINITY);
    }
    let eig = symmetric_part(r).symmetric_eigenvalues();
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Principal submatrix keeping the given indices in the given order.
pub fn principal_submatrix(r: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(keep.len(), keep.len(), |a, b| r[(keep[a], keep[b])])
}

/// Remove the rows and columns in `removed`; survivors keep ascending order.
pub fn submatrix_r(r_full: &DMatrix<f64>, removed: &[usize]) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..r_full.nrows()).filter(|i| !removed.contains(i)).collect();
    principal_submatrix(r_full, &keep)
}

/// `δ̄ = sqrt(Σ_{(j,i) ∈ E} max{(ω_j − ω_i)², ω_i², ω_j²})`.
pub fn hetero_threshold(g: &SignedDigraph, omega: &NaturalFrequencies) -> f64 {
    let w = omega.as_vector();
    g.edges()
        .iter()
        .map(|e| {
            let (wj, wi) = (w[e.src], w[e.dst]);
            ((wj - wi).powi(2)).max(wi * wi).max(wj * wj)
        })
        .sum::<f64>()
        .sqrt()
}

/// `‖D(S)ᵀω(S)‖₂`.
pub fn dtw_norm(rs: &ReducedSystem) -> f64 {
    rs.drive().norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lambda_min: f64,
    pub delta: f64,
    pub satisfied: bool,
    pub margin: f64,
}

impl Certificate {
    pub fn new(lambda_min: f64, delta: f64) -> Self {
        Self { lambda_min, delta, satisfied: certifies(lambda_min, delta), margin: lambda_min - delta }
    }

    pub fn for_system(rs: &ReducedSystem, delta: f64) -> Self {
        Self::new(rs.lambda_min(), delta)
    }
}

pub fn certifies(lambda_min: f64, delta: f64) -> bool {
    lambda_min > delta + EPS_STRICT
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn cycle3() -> SignedDigraph {
        SignedDigraph::directed(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap()
    }

    #[test]
    fn lambda_min_examples() {
        assert_eq!(lambda_min(&DMatrix::from_element(1, 1, 1.0)).unwrap(), 1.0);
        let (_, r) = coupling_matrices(&cycle3());
        assert!(lambda_min(&r).unwrap().abs() < 1e-9);
        let r2 = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        assert!(close(lambda_min(&r2).unwrap(), 0.5, 1e-12));
        assert_eq!(lambda_min(&DMatrix::zeros(0, 0)).unwrap(), f64::INFINITY);
        assert!(matches!(lambda_min(&DMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn cycle_coupling_matrix() {
        let (m, r) = coupling_matrices(&cycle3());
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -1.0, -1.0, 1.0, 0.0, 0.0, -1.0, 1.0]);
        assert_eq!(m, expected);
        let mut eig: Vec<f64> = r.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip([0.0, 1.5, 1.5]) {
            assert!(close(*a, b, 1e-12));
        }
    }

    #[test]
    fn reduced_cycle_matches_submatrix() {
        let g = cycle3();
        let rs = reduce(&g, &NaturalFrequencies::zeros(3), &InputSet::new(3, [0]).unwrap());
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        assert_eq!(rs.r_s, expected);
        assert!(close(rs.lambda_min(), 0.5, 1e-12));
        let (_, r) = coupling_matrices(&g);
        assert_eq!(submatrix_r(&r, &[2]), expected);
        assert_eq!(submatrix_r(&r, &[]), r);
        assert_eq!(submatrix_r(&r, &[0, 1, 2]).shape(), (0, 0));
    }

    #[test]
    fn thresholds() {
        let g = SignedDigraph::directed(2, &[(0, 1, 1.0)]).unwrap();
        let w = NaturalFrequencies::new(&g, vec![0.0, 2.0]).unwrap();
        assert_eq!(hetero_threshold(&g, &w), 2.0);
        assert_eq!(hetero_threshold(&g, &NaturalFrequencies::zeros(2)), 0.0);

        let w = NaturalFrequencies::new(&cycle3(), vec![1.0, 2.0, 3.0]).unwrap();
        assert!(close(hetero_threshold(&cycle3(), &w), 22f64.sqrt(), 1e-12));
    }

    #[test]
    fn dtw_norm_examples() {
        let g = SignedDigraph::directed(2, &[(0, 1, 1.0)]).unwrap();
        let w = NaturalFrequencies::new(&g, vec![0.0, 0.5]).unwrap();
        let rs = reduce(&g, &w, &InputSet::new(2, [0]).unwrap());
        assert!(close(dtw_norm(&rs), 0.5, 1e-15));
        let rs = reduce(&g, &NaturalFrequencies::zeros(2), &InputSet::empty());
        assert_eq!(dtw_norm(&rs), 0.0);
        let rs = reduce(&g, &w, &InputSet::all(2));
        assert_eq!(dtw_norm(&rs), 0.0);
    }

    #[test]
    fn certificate_strictness() {
        assert!(!Certificate::new(0.0, 0.0).satisfied);
        assert!(!Certificate::new(0.5e-8, 0.0).satisfied);
        assert!(Certificate::new(0.5, 0.0).satisfied);
        assert!(Certificate::new(f64::INFINITY, 3.0).satisfied);
        assert_eq!(Certificate::new(1.0, 0.25).margin, 0.75);
    }
}
