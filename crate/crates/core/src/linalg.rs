//! Small dense complex linear-algebra helpers shared by the projection and
//! optimization code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values at or below this fraction of the largest one mark a
/// matrix as rank deficient for the purpose of polar projection.
pub const RANK_TOL: f64 = 1e-12;

/// Unitary (or semi-unitary, for tall inputs) factor of the polar
/// decomposition `m = U P`, computed as `U = W Vᴴ` from the thin SVD
/// `m = W Σ Vᴴ`. This is the Frobenius-nearest matrix with orthonormal
/// columns.
///
/// Returns `None` when `m` has fewer rows than columns or is numerically
/// rank deficient, since the factor is then not unique.
pub fn polar_factor(m: &CMatrix) -> Option<CMatrix> {
    let (rows, cols) = m.shape();
    if rows < cols || cols == 0 {
        return None;
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return None;
    }
    let svd = m.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if s_max == 0.0 || s_min <= RANK_TOL * s_max {
        return None;
    }
    Some(svd.u? * svd.v_t?)
}

/// Unitary matrix whose first column is `first` (normalized internally).
/// Remaining columns extend it by Gram–Schmidt over the canonical basis in
/// index order, so the completion is deterministic.
pub fn complete_unitary(first: &CVector) -> Option<CMatrix> {
    let n = first.len();
    let norm = first.norm();
    if n == 0 || norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let mut cols: Vec<CVector> = Vec::with_capacity(n);
    cols.push(first / Complex64::from(norm));
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = CVector::zeros(n);
        v[k] = Complex64::new(1.0, 0.0);
        // two passes of modified Gram–Schmidt keep the basis orthonormal to
        // working precision
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let vn = v.norm();
        if vn > 1e-8 {
            cols.push(v / Complex64::from(vn));
        }
    }
    Some(CMatrix::from_columns(&cols))
}

/// Hermitian part `(A + Aᴴ)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::from(0.5)
}

/// `‖Aᴴ A − I‖_F`, the distance of `a` from having orthonormal columns.
pub fn orthonormality_residual(a: &CMatrix) -> f64 {
    let mut g = a.adjoint() * a;
    for i in 0..g.nrows() {
        g[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    g.norm()
}

/// Orthonormal basis for the span of `vectors`, dropping directions whose
/// residual norm after projection is below `drop_tol` times the largest
/// input norm.
pub fn orthonormal_basis(vectors: &[CVector], drop_tol: f64) -> Vec<CVector> {
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    let mut basis: Vec<CVector> = Vec::with_capacity(vectors.len());
    if scale == 0.0 {
        return basis;
    }
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dotc(&w);
                w -= q * proj;
            }
        }
        let wn = w.norm();
        if wn > drop_tol * scale {
            basis.push(w / Complex64::from(wn));
        }
    }
    basis
}
