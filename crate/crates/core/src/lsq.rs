//! Dense least squares with rank detection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Columns whose remaining norm falls below this fraction of the largest
/// column norm are treated as dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Minimum-norm minimiser of `‖y - A x‖₂`.
///
/// Householder QR with greedy column-norm pivoting reveals the numerical rank
/// `r`. Full column rank is solved by back substitution; otherwise the
/// trapezoid `[R₁₁ R₁₂]` is factored once more from the right to obtain the
/// minimum-norm solution. Works for any shape, including `t > M`.
pub fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, t) = a.shape();
    if y.len() != m {
        return Err(Error::Dimension(format!("y has length {}, A has {m} rows", y.len())));
    }
    if t == 0 {
        return Ok(DVector::zeros(0));
    }
    let max_norm = a.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Ok(DVector::zeros(t));
    }
    let tol = RANK_TOL * max_norm;

    let mut w = a.clone();
    let mut b = y.clone();
    let mut perm: Vec<usize> = (0..t).collect();
    let mut rank = 0;
    for k in 0..m.min(t) {
        let (p, norm) = (k..t)
            .map(|j| (j, w.column(j).rows(k, m - k).norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if norm <= tol {
            break;
        }
        w.swap_columns(k, p);
        perm.swap(k, p);

        let mut v = w.column(k).rows(k, m - k).into_owned();
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let v_norm2 = v.norm_squared();
        if v_norm2 > 0.0 {
            for j in k..t {
                let mut full = w.column_mut(j);
                let mut col = full.rows_mut(k, m - k);
                let f = 2.0 * v.dot(&col) / v_norm2;
                col.axpy(-f, &v, 1.0);
            }
            let mut tail = b.rows_mut(k, m - k);
            let f = 2.0 * v.dot(&tail) / v_norm2;
            tail.axpy(-f, &v, 1.0);
        }
        rank += 1;
    }

    let mut z = DVector::zeros(t);
    if rank > 0 {
        let c = b.rows(0, rank).into_owned();
        let trapezoid = w.view((0, 0), (rank, t)).upper_triangle();
        if rank == t {
            let sol = trapezoid
                .solve_upper_triangular(&c)
                .ok_or_else(|| Error::Domain("singular triangular factor".into()))?;
            z.copy_from(&sol);
        } else {
            // [R₁₁ R₁₂] = Tᵀ Zᵀ with Zᵀ Z = I; the minimum-norm solution is Z (T⁻ᵀ c)
            let qr = trapezoid.transpose().qr();
            let (zq, tr) = (qr.q(), qr.r());
            let wv = tr
                .transpose()
                .solve_lower_triangular(&c)
                .ok_or_else(|| Error::Domain("singular triangular factor".into()))?;
            z = zq * wv;
        }
    }

    let mut x = DVector::zeros(t);
    for (i, &col) in perm.iter().enumerate() {
        x[col] = z[i];
    }
    Ok(x)
}

/// Columns of `a` at `indices`, in that order.
pub fn select_columns(a: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    a.select_columns(indices)
}

/// `y - A_S x_S`.
pub fn residual(a: &DMatrix<f64>, y: &DVector<f64>, indices: &[usize], coeffs: &DVector<f64>) -> DVector<f64> {
    let mut r = y.clone();
    for (&j, &c) in indices.iter().zip(coeffs.iter()) {
        r.axpy(-c, &a.column(j), 1.0);
    }
    r
}
