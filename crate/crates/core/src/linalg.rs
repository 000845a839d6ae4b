//! Thin policy layer over nalgebra: sorted SVDs, numerical nullspaces and
//! ranks with a relative cutoff, canonical row-echelon bases and column
//! scaled least squares.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Singular values (descending) and the matching right singular vectors as
/// columns of `V`. Tall inputs are reduced by QR first.
pub fn svd_right(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let square = if rows > cols {
        a.clone().qr().r()
    } else if rows < cols {
        let mut padded = CMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = nalgebra::linalg::SVD::try_new(square, false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD returned no right vectors".into()))?;
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite singular value".into()));
    }
    let mut v = CMatrix::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..cols {
            v[(r, dst)] = v_t[(src, r)].conj();
        }
    }
    Ok((values, v))
}

/// Singular values of a real matrix, descending.
pub fn singular_values_real(a: &RMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Number of singular values above `rel_tol * max(s)`; zero when the
/// largest singular value is itself zero.
pub fn rank_from_values(values: &[f64], rel_tol: f64) -> usize {
    let smax = values.iter().copied().fold(0.0, f64::max);
    if smax <= f64::MIN_POSITIVE {
        return 0;
    }
    values.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn numerical_rank_real(a: &RMatrix, rel_tol: f64) -> (usize, Vec<f64>) {
    let s = singular_values_real(a);
    (rank_from_values(&s, rel_tol), s)
}

/// Numerical nullspace of a complex matrix.
#[derive(Debug, Clone)]
pub struct NullSpace {
    /// Orthonormal null vectors.
    pub vectors: Vec<Vec<Complex64>>,
    pub singular_values: Vec<f64>,
    /// Absolute cutoff `rel_tol * sigma_max` that was applied.
    pub threshold: f64,
}

pub fn null_space(a: &CMatrix, rel_tol: f64) -> Result<NullSpace> {
    let (values, v) = svd_right(a)?;
    let smax = values.first().copied().unwrap_or(0.0);
    let threshold = rel_tol * smax;
    let vectors = values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(j, _)| v.column(j).iter().copied().collect())
        .collect();
    Ok(NullSpace {
        vectors,
        singular_values: values,
        threshold,
    })
}

/// Reduced row-echelon form of the span of `rows`, with pivots chosen in
/// column order by partial pivoting. Columns whose best remaining entry is
/// below `pivot_tol` are skipped. Each returned row has a unit entry in its
/// pivot column and zeros in every other pivot column.
pub fn rref(rows: &[Vec<Complex64>], pivot_tol: f64) -> Vec<(usize, Vec<Complex64>)> {
    let mut m: Vec<Vec<Complex64>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m.len() {
            break;
        }
        let (best, mag) = (r..m.len())
            .map(|i| (i, m[i][c].norm()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag < pivot_tol {
            continue;
        }
        m.swap(r, best);
        let inv = Complex64::new(1.0, 0.0) / m[r][c];
        for x in m[r].iter_mut() {
            *x *= inv;
        }
        m[r][c] = Complex64::new(1.0, 0.0);
        for i in 0..m.len() {
            if i == r {
                continue;
            }
            let f = m[i][c];
            if f == ZERO {
                continue;
            }
            let pivot_row = m[r].clone();
            for (x, p) in m[i].iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
            m[i][c] = ZERO;
        }
        pivots.push(c);
        r += 1;
    }
    pivots.into_iter().zip(m).collect()
}

/// Result of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// One column of coefficients per right-hand side.
    pub solution: CMatrix,
    /// Condition number of the column-normalised design matrix.
    pub condition: f64,
}

/// Minimises `|A x - b|` column by column. The design matrix is column
/// normalised before factoring; a condition number above `cond_max` is an
/// error.
pub fn least_squares(a: &CMatrix, b: &CMatrix, cond_max: f64) -> Result<LeastSquares> {
    let (rows, cols) = a.shape();
    if b.nrows() != rows {
        return Err(Error::Dimension(format!(
            "design has {rows} rows, right-hand side {}",
            b.nrows()
        )));
    }
    if rows < cols {
        return Err(Error::Fit {
            message: format!("{rows} samples for {cols} unknowns"),
            condition: f64::INFINITY,
        });
    }
    let scales: Vec<f64> = (0..cols)
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }
    let qr = scaled.qr();
    let q = qr.q();
    let r = qr.r();
    let svd = nalgebra::linalg::SVD::try_new(r, true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge in least squares".into()))?;
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= cond_max) {
        return Err(Error::Fit {
            message: "ill-conditioned design matrix".into(),
            condition,
        });
    }
    let u = svd.u.expect("requested u");
    let v_t = svd.v_t.expect("requested v");
    let qb = q.adjoint() * b;
    let mut tmp = u.adjoint() * qb;
    for (i, s) in svd.singular_values.iter().enumerate() {
        tmp.row_mut(i).unscale_mut(*s);
    }
    let mut solution = v_t.adjoint() * tmp;
    for (j, s) in scales.iter().enumerate() {
        solution.row_mut(j).unscale_mut(*s);
    }
    Ok(LeastSquares {
        solution,
        condition,
    })
}

pub fn det_real(a: &RMatrix) -> f64 {
    a.clone().lu().determinant()
}

/// Solves `A x = b` for square real `A`; `None` when singular.
pub fn solve_real(a: &RMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    a.clone()
        .lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
}

pub fn inverse_real(a: &RMatrix) -> Option<RMatrix> {
    a.clone().try_inverse()
}

/// Max-norm of a real matrix.
pub fn max_abs(a: &RMatrix) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
