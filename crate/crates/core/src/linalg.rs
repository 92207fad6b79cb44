//! Small dense linear algebra used by the regression pipeline.
//!
//! Determinants and adjugates are computed by Laplace (cofactor) expansion,
//! memoised over column subsets. There is no pivoting, so the result is a
//! fixed polynomial in the entries and identical inputs always give identical
//! outputs. Cost is `O(n² 2ⁿ)`, fine up to n ≈ 12.

use nalgebra::{DMatrix, DVector, SMatrix};

use crate::error::{Error, Result};

/// Determinants of all square submatrices formed by the last `popcount(mask)`
/// entries of `rows` and the columns selected by `mask`.
fn subset_minors(a: &DMatrix<f64>, rows: &[usize]) -> Vec<f64> {
    let n = a.ncols();
    let m = rows.len();
    let mut minors = vec![0.0; 1 << n];
    minors[0] = 1.0;
    // Masks are visited in increasing order, so every strict subset is ready.
    for mask in 1usize..(1 << n) {
        let size = mask.count_ones() as usize;
        if size > m {
            continue;
        }
        let row = rows[m - size];
        let mut acc = 0.0;
        let mut pos = 0;
        for col in 0..n {
            if mask & (1 << col) != 0 {
                let term = a[(row, col)] * minors[mask & !(1 << col)];
                if pos % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
                pos += 1;
            }
        }
        minors[mask] = acc;
    }
    minors
}

/// Determinant by cofactor expansion.
pub fn det(a: &DMatrix<f64>) -> f64 {
    assert!(a.is_square(), "determinant of a non-square matrix");
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let rows: Vec<usize> = (0..n).collect();
    subset_minors(a, &rows)[(1 << n) - 1]
}

/// Adjugate (transposed cofactor matrix) together with the determinant.
///
/// `adj{M}·M = det{M}·I` holds for singular `M` as well. The 1×1 adjugate is
/// `[1]`.
pub fn adjugate_det(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    assert!(a.is_square(), "adjugate of a non-square matrix");
    let n = a.nrows();
    let mut adj = DMatrix::zeros(n, n);
    if n == 0 {
        return (adj, 1.0);
    }
    if n == 1 {
        adj[(0, 0)] = 1.0;
        return (adj, a[(0, 0)]);
    }
    let full = (1usize << n) - 1;
    for skip_row in 0..n {
        let rows: Vec<usize> = (0..n).filter(|&r| r != skip_row).collect();
        let minors = subset_minors(a, &rows);
        for skip_col in 0..n {
            let minor = minors[full & !(1 << skip_col)];
            let sign = if (skip_row + skip_col) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(skip_col, skip_row)] = sign * minor;
        }
    }
    let det = (0..n).map(|c| a[(0, c)] * adj[(c, 0)]).sum();
    (adj, det)
}

/// Fixed-size convenience wrapper over [`adjugate_det`].
pub fn adjugate_det_fixed<const N: usize>(a: &SMatrix<f64, N, N>) -> (SMatrix<f64, N, N>, f64) {
    let dynamic = DMatrix::from_fn(N, N, |r, c| a[(r, c)]);
    let (adj, det) = adjugate_det(&dynamic);
    (SMatrix::from_fn(|r, c| adj[(r, c)]), det)
}

/// Characteristic polynomial coefficients `[1, c₁, …, cₙ]` of
/// `det{sI − A}` (Faddeev-LeVerrier).
pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        m = a * &m + &id * coeffs[k - 1];
        let c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Monic polynomial `[1, c₁, …, cₙ]` with the given roots. Complex roots must
/// come in conjugate pairs; the imaginary residue is dropped.
pub fn poly_from_roots(roots: &[nalgebra::Complex<f64>]) -> Vec<f64> {
    let mut coeffs = vec![nalgebra::Complex::new(1.0, 0.0)];
    for &root in roots {
        let mut next = vec![nalgebra::Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * root;
        }
        coeffs = next;
    }
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Solves the Sylvester equation `M·A − G·M = C` for `M`.
pub fn solve_sylvester(a: &DMatrix<f64>, g: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || !g.is_square() || g.nrows() != n || c.shape() != (n, n) {
        return Err(Error::domain("Sylvester operands have inconsistent shapes"));
    }
    // vec(M·A) = (Aᵀ ⊗ I)·vec(M), vec(G·M) = (I ⊗ G)·vec(M)
    let id = DMatrix::identity(n, n);
    let lhs = kron(&a.transpose(), &id) - kron(&id, g);
    let rhs = DVector::from_column_slice(c.as_slice());
    let sol = lhs.lu().solve(&rhs).ok_or_else(|| Error::Singular("Sylvester operator (shared eigenvalues?)".into()))?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Largest eigenvalue of the rank-one symmetric matrix `v·vᵀ`.
pub fn lambda_max_outer<const N: usize>(v: &SMatrix<f64, N, 1>) -> f64 {
    v.norm_squared()
}

/// Largest real part among the eigenvalues of the rank-one matrix `a·bᵀ`.
///
/// Its spectrum is `{bᵀa, 0, …, 0}`, and a Kronecker product with an identity
/// only repeats it.
pub fn lambda_max_rank_one(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    if a.len() > 1 {
        dot.max(0.0)
    } else {
        dot
    }
}
