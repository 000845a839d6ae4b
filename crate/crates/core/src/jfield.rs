//! Almost complex structures `J` given as polynomial matrix fields on a box.
//!
//! Conventions: coordinates are `x1, y1, x2, y2, ...` stored as axes
//! `0, 1, 2, 3, ...`, with `z^j = x^{2j-1} + i x^{2j}`. The matrix `J(p)` acts
//! on tangent vectors, so its column `a` is `J d_a`. Covectors act by
//! `(J* w)(X) = w(J X)`, i.e. the component row `w^T J(p)`. Under this
//! convention the standard structure makes `z` almost holomorphic
//! (`J* dz = i dz`).

use std::ops::{Add, Mul, Neg};

use num_complex::Complex64;

use crate::config::{Limits, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix};
use crate::par;
use crate::poly::Poly;
use crate::region::{CoordBox, SampleGrid};
use crate::report::{Cmp, Report};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A complex covector at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm(pub Vec<Complex64>);

impl OneForm {
    pub fn zero(dim: usize) -> Self {
        OneForm(vec![Complex64::new(0.0, 0.0); dim])
    }

    /// `d x_{axis+1}`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut w = Self::zero(dim);
        w.0[axis] = Complex64::new(1.0, 0.0);
        w
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Component row `w^T M` for a real matrix `M`.
    pub fn times_matrix(&self, m: &RMatrix) -> OneForm {
        let d = self.dim();
        OneForm(
            (0..d)
                .map(|k| (0..d).map(|i| self.0[i] * m[(i, k)]).sum())
                .collect(),
        )
    }
}

impl Add for OneForm {
    type Output = OneForm;
    fn add(self, rhs: OneForm) -> OneForm {
        OneForm(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Neg for OneForm {
    type Output = OneForm;
    fn neg(self) -> OneForm {
        OneForm(self.0.into_iter().map(|c| -c).collect())
    }
}

impl Mul<Complex64> for OneForm {
    type Output = OneForm;
    fn mul(self, rhs: Complex64) -> OneForm {
        OneForm(self.0.into_iter().map(|c| c * rhs).collect())
    }
}

/// A covector field with polynomial components.
#[derive(Debug, Clone, PartialEq)]
pub struct OneFormField(pub Vec<Poly>);

impl OneFormField {
    /// The differential `df`, computed exactly.
    pub fn differential(f: &Poly) -> Self {
        OneFormField(f.gradient())
    }

    pub fn at(&self, p: &[f64]) -> OneForm {
        OneForm(self.0.iter().map(|c| c.eval(p)).collect())
    }
}

/// Bases of the `+i` and `-i` eigenspaces of the covector action at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSplit {
    /// Covectors with `w^T J = i w`.
    pub holomorphic: Vec<OneForm>,
    /// Covectors with `w^T J = -i w`.
    pub antiholomorphic: Vec<OneForm>,
    /// Largest eigen-residual over both bases.
    pub residual: f64,
}

/// Polynomial matrix field `p -> J(p)` on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct AcStructure {
    bx: CoordBox,
    /// Row-major entries.
    entries: Vec<Poly>,
    /// `derivs[k][idx]` is the partial of entry `idx` along axis `k`.
    derivs: Vec<Vec<Poly>>,
}

impl AcStructure {
    pub fn new(bx: CoordBox, rows: Vec<Vec<Poly>>) -> Result<Self> {
        Self::with_limits(bx, rows, &Limits::default())
    }

    pub fn with_limits(bx: CoordBox, rows: Vec<Vec<Poly>>, limits: &Limits) -> Result<Self> {
        let dim = bx.dim();
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension(format!(
                "J must be {dim}x{dim} for a box of real dimension {dim}"
            )));
        }
        let entries: Vec<Poly> = rows.into_iter().flatten().collect();
        for (idx, e) in entries.iter().enumerate() {
            if e.nvars() != dim {
                return Err(Error::Dimension(format!(
                    "J entry ({}, {}) has {} variables, expected {dim}",
                    idx / dim + 1,
                    idx % dim + 1,
                    e.nvars()
                )));
            }
            if !e.is_real() {
                return Err(Error::Config(format!(
                    "J entry ({}, {}) has a complex coefficient",
                    idx / dim + 1,
                    idx % dim + 1
                )));
            }
            e.check_degree(limits.max_degree)?;
        }
        let derivs = (0..dim)
            .map(|k| entries.iter().map(|e| e.derivative(k)).collect())
            .collect();
        Ok(AcStructure {
            bx,
            entries,
            derivs,
        })
    }

    /// The constant structure `J0 = diag([[0,-1],[1,0]], ...)`.
    pub fn standard(bx: CoordBox) -> Self {
        let rows = standard_rows(bx.dim());
        Self::new(bx, rows).expect("standard structure is valid")
    }

    /// `S^{-1} J0 S` for a polynomial matrix `S` with polynomial inverse.
    pub fn conjugated(bx: CoordBox, s: &[Vec<Poly>], s_inv: &[Vec<Poly>]) -> Result<Self> {
        let dim = bx.dim();
        let prod = poly_matmul(s, s_inv)?;
        for (i, row) in prod.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let want = Poly::constant(dim, if i == j { 1.0 } else { 0.0 });
                if (e.clone() - want).max_coefficient() > 0.0 {
                    return Err(Error::Config("S * S_inv is not the identity".into()));
                }
            }
        }
        let j = poly_matmul(&poly_matmul(s_inv, &standard_rows(dim))?, s)?;
        Self::new(bx, j)
    }

    pub fn bx(&self) -> &CoordBox {
        &self.bx
    }

    pub fn n(&self) -> usize {
        self.bx.n()
    }

    pub fn dim(&self) -> usize {
        self.bx.dim()
    }

    pub fn entry(&self, row: usize, col: usize) -> &Poly {
        &self.entries[row * self.dim() + col]
    }

    pub fn rows(&self) -> Vec<Vec<Poly>> {
        self.entries
            .chunks(self.dim())
            .map(<[Poly]>::to_vec)
            .collect()
    }

    fn eps(&self) -> f64 {
        1e-12 * self.bx.diameter().max(1.0)
    }

    pub(crate) fn require_point(&self, p: &[f64]) -> Result<()> {
        if !self.bx.contains(p, self.eps()) {
            return Err(Error::Domain(format!(
                "point {p:?} is outside the structure box"
            )));
        }
        Ok(())
    }

    pub(crate) fn require_grid(&self, grid: &SampleGrid) -> Result<()> {
        if !self.bx.contains_box(grid.bx(), self.eps()) {
            return Err(Error::Domain(
                "grid box is not inside the structure box".into(),
            ));
        }
        Ok(())
    }

    /// `J(p)` without the domain check.
    pub(crate) fn matrix_at(&self, p: &[f64]) -> RMatrix {
        let d = self.dim();
        RMatrix::from_fn(d, d, |i, j| self.entries[i * d + j].eval_real(p))
    }

    fn derivative_matrices_at(&self, p: &[f64]) -> Vec<RMatrix> {
        let d = self.dim();
        self.derivs
            .iter()
            .map(|dk| RMatrix::from_fn(d, d, |i, j| dk[i * d + j].eval_real(p)))
            .collect()
    }

    pub fn eval_j(&self, p: &[f64]) -> Result<RMatrix> {
        self.require_point(p)?;
        Ok(self.matrix_at(p))
    }

    /// Max over the grid of `|J(p)^2 + I|_max`.
    pub fn check_acs(&self, grid: &SampleGrid, tol: f64) -> Result<Report> {
        self.require_grid(grid)?;
        let d = self.dim();
        let metric = par::max_over(grid.len(), |i| {
            let j = self.matrix_at(grid.point(i));
            linalg::max_abs(&(&j * &j + RMatrix::identity(d, d)))
        });
        let mut r = Report::new("check_acs");
        r.metric("j_squared_plus_identity", metric)
            .tolerance("acs", tol)
            .require("j_squared_plus_identity", Cmp::Le, "acs")
            .metric("grid_points", grid.len() as f64);
        Ok(r.finish())
    }

    /// `(J* w)(X) = w(J X)` at `p`.
    pub fn pullback(&self, omega: &OneForm, p: &[f64]) -> Result<OneForm> {
        self.require_point(p)?;
        if omega.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "one-form has {} components, expected {}",
                omega.dim(),
                self.dim()
            )));
        }
        Ok(omega.times_matrix(&self.matrix_at(p)))
    }

    /// Bases of the (1,0) and (0,1) covectors at `p`, each normalised to
    /// unit max-norm with its first nonzero component positive real.
    pub fn split_type(&self, p: &[f64], eigen_tol: f64) -> Result<TypeSplit> {
        self.require_point(p)?;
        let j = self.matrix_at(p);
        let (holomorphic, r1) = self.eigen_basis(&j, I)?;
        let (antiholomorphic, r2) = self.eigen_basis(&j, -I)?;
        let residual = r1.max(r2);
        if holomorphic.len() != self.n() || antiholomorphic.len() != self.n() {
            return Err(Error::DegenerateStructure {
                message: format!(
                    "eigenspace dimensions ({}, {}) instead of ({n}, {n})",
                    holomorphic.len(),
                    antiholomorphic.len(),
                    n = self.n()
                ),
                residual,
            });
        }
        if residual > eigen_tol {
            return Err(Error::DegenerateStructure {
                message: "eigen-residual above tolerance".into(),
                residual,
            });
        }
        Ok(TypeSplit {
            holomorphic,
            antiholomorphic,
            residual,
        })
    }

    /// Basis of `{w : w^T J = lambda w}` for `lambda = +-i`, read off the
    /// column space of the projector `(I - lambda J^T) / 2`.
    fn eigen_basis(&self, j: &RMatrix, lambda: Complex64) -> Result<(Vec<OneForm>, f64)> {
        let d = self.dim();
        // column c of the projector, stored as a row
        let cols: Vec<Vec<Complex64>> = (0..d)
            .map(|c| {
                (0..d)
                    .map(|r| {
                        let id = if r == c { 1.0 } else { 0.0 };
                        (Complex64::new(id, 0.0) - lambda * j[(c, r)]) * 0.5
                    })
                    .collect()
            })
            .collect();
        let scale = cols.iter().flatten().fold(0.0f64, |m, c| m.max(c.norm()));
        let basis: Vec<OneForm> = linalg::rref(&cols, 1e-8 * scale.max(f64::MIN_POSITIVE))
            .into_iter()
            .map(|(_, v)| normalize_covector(v))
            .collect();
        let residual = basis
            .iter()
            .map(|w| {
                let lhs = w.times_matrix(j);
                (lhs + -(w.clone() * lambda)).max_norm()
            })
            .fold(0.0, f64::max);
        Ok((basis, residual))
    }

    /// `N(d_a, d_b) = [J d_a, J d_b] - J[J d_a, d_b] - J[d_a, J d_b]`, using
    /// exact derivatives of the columns of `J`. Zero for `a == b`; exactly
    /// antisymmetric in `(a, b)`.
    pub fn nijenhuis(&self, p: &[f64], a: usize, b: usize) -> Result<Vec<f64>> {
        self.require_point(p)?;
        let d = self.dim();
        if a >= d || b >= d {
            return Err(Error::Dimension(format!("axis index out of range 0..{d}")));
        }
        if a == b {
            return Ok(vec![0.0; d]);
        }
        if a > b {
            return Ok(self.nijenhuis(p, b, a)?.into_iter().map(|x| -x).collect());
        }
        let j = self.matrix_at(p);
        let dj = self.derivative_matrices_at(p);
        Ok(nijenhuis_from(&j, &dj, a, b))
    }

    /// Max over grid points and axis pairs of `|N(d_a, d_b)|_max`.
    pub fn integrability_report(&self, grid: &SampleGrid, tol: f64) -> Result<Report> {
        self.require_grid(grid)?;
        let d = self.dim();
        let metric = par::max_over(grid.len(), |i| {
            let p = grid.point(i);
            let j = self.matrix_at(p);
            let dj = self.derivative_matrices_at(p);
            let mut m = 0.0f64;
            for a in 0..d {
                for b in a + 1..d {
                    for v in nijenhuis_from(&j, &dj, a, b) {
                        m = m.max(v.abs());
                    }
                }
            }
            m
        });
        let mut r = Report::new("integrability");
        r.metric("nijenhuis_max", metric)
            .tolerance("integrability", tol)
            .require("nijenhuis_max", Cmp::Le, "integrability")
            .metric("grid_points", grid.len() as f64);
        Ok(r.finish())
    }

    /// Checks `J^2 = -I` with the default tolerance on a coarse grid; used
    /// by constructors of higher-level objects.
    pub fn validate(&self, k: usize, tols: &Tolerances) -> Result<()> {
        let grid = SampleGrid::new(&self.bx, k)?;
        let r = self.check_acs(&grid, tols.acs)?;
        if !r.passed() {
            return Err(Error::DegenerateStructure {
                message: "J^2 != -I".into(),
                residual: r.get("j_squared_plus_identity").unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }
}

fn nijenhuis_from(j: &RMatrix, dj: &[RMatrix], a: usize, b: usize) -> Vec<f64> {
    let d = j.nrows();
    let col = |m: &RMatrix, c: usize| -> Vec<f64> { (0..d).map(|i| m[(i, c)]).collect() };
    let ja = col(j, a);
    let jb = col(j, b);
    // d_k of column c of J
    let djcol = |k: usize, c: usize| -> Vec<f64> { col(&dj[k], c) };
    let mut bracket = vec![0.0; d];
    for k in 0..d {
        let d_jb = djcol(k, b);
        let d_ja = djcol(k, a);
        for i in 0..d {
            bracket[i] += ja[k] * d_jb[i] - jb[k] * d_ja[i];
        }
    }
    // -J[J d_a, d_b] = J d_b(J d_a);  -J[d_a, J d_b] = -J d_a(J d_b)
    let db_ja = djcol(b, a);
    let da_jb = djcol(a, b);
    let diff: Vec<f64> = (0..d).map(|i| db_ja[i] - da_jb[i]).collect();
    (0..d)
        .map(|i| bracket[i] + (0..d).map(|k| j[(i, k)] * diff[k]).sum::<f64>())
        .collect()
}

fn normalize_covector(mut v: Vec<Complex64>) -> OneForm {
    let maxn = v.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    if maxn > 0.0 {
        if let Some(first) = v.iter().find(|c| c.norm() > 1e-12 * maxn) {
            let phase = first.conj() / first.norm();
            for c in v.iter_mut() {
                *c *= phase / maxn;
            }
        }
    }
    OneForm(v)
}

fn standard_rows(dim: usize) -> Vec<Vec<Poly>> {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let v = if i % 2 == 0 && j == i + 1 {
                        -1.0
                    } else if i % 2 == 1 && j + 1 == i {
                        1.0
                    } else {
                        0.0
                    };
                    Poly::constant(dim, v)
                })
                .collect()
        })
        .collect()
}

/// Product of two polynomial matrices.
pub fn poly_matmul(a: &[Vec<Poly>], b: &[Vec<Poly>]) -> Result<Vec<Vec<Poly>>> {
    let inner = b.len();
    if a.iter().any(|r| r.len() != inner) || inner == 0 {
        return Err(Error::Dimension(
            "polynomial matrix shapes do not match".into(),
        ));
    }
    let cols = b[0].len();
    let nvars = b[0][0].nvars();
    Ok(a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| {
                    row.iter()
                        .zip(b)
                        .fold(Poly::zero(nvars), |acc, (x, brow)| acc + x * &brow[c])
                })
                .collect()
        })
        .collect())
}

/// The non-integrable sample structure `S^{-1} J0 S` on `[-0.5, 0.5]^4` with
/// `S = I + x1 E`, where `E` has its single unit entry at row index 3 and
/// column index 2 (zero-based).
pub fn twisted_r4() -> AcStructure {
    let dim = 4;
    let bx = CoordBox::cube(2, -0.5, 0.5).expect("valid box");
    let x1 = Poly::var(dim, 0);
    let ident = |i: usize, j: usize| Poly::constant(dim, if i == j { 1.0 } else { 0.0 });
    let s: Vec<Vec<Poly>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    if (i, j) == (3, 2) {
                        ident(i, j) + x1.clone()
                    } else {
                        ident(i, j)
                    }
                })
                .collect()
        })
        .collect();
    let s_inv: Vec<Vec<Poly>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    if (i, j) == (3, 2) {
                        ident(i, j) - x1.clone()
                    } else {
                        ident(i, j)
                    }
                })
                .collect()
        })
        .collect();
    AcStructure::conjugated(bx, &s, &s_inv).expect("twisted structure is valid")
}
