//! Cauchy-Riemann residuals, the polynomial ansatz solver for
//! `J* df = i df`, functional-independence ranks and Spencer-type estimates.

use num_complex::Complex64;

use crate::config::{Limits, Tolerances};
use crate::error::{Error, Result};
use crate::jfield::{AcStructure, OneForm};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::par;
use crate::poly::{monomials_up_to, Monomial, Poly};
use crate::region::{CoordBox, SampleGrid};
use crate::report::{Cmp, Report};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Entries of a canonical basis vector smaller than this are set to zero.
const CHOP: f64 = 1e-11;

/// A complex polynomial function on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    expr: Poly,
    bx: CoordBox,
}

impl ScalarField {
    pub fn new(expr: Poly, bx: CoordBox) -> Result<Self> {
        Self::with_limits(expr, bx, &Limits::default())
    }

    pub fn with_limits(expr: Poly, bx: CoordBox, limits: &Limits) -> Result<Self> {
        if expr.nvars() != bx.dim() {
            return Err(Error::Dimension(format!(
                "function has {} variables, box has dimension {}",
                expr.nvars(),
                bx.dim()
            )));
        }
        expr.check_degree(limits.max_degree)?;
        Ok(ScalarField { expr, bx })
    }

    pub fn parse(text: &str, bx: CoordBox) -> Result<Self> {
        let expr = Poly::parse(text, bx.dim())?;
        Self::new(expr, bx)
    }

    pub fn expr(&self) -> &Poly {
        &self.expr
    }

    pub fn bx(&self) -> &CoordBox {
        &self.bx
    }

    pub fn eval(&self, p: &[f64]) -> Complex64 {
        self.expr.eval(p)
    }

    /// `df` at `p`.
    pub fn differential_at(&self, p: &[f64]) -> OneForm {
        OneForm(
            (0..self.expr.nvars())
                .map(|i| self.expr.derivative(i).eval(p))
                .collect(),
        )
    }

    /// Same polynomial on another box.
    pub fn on_box(&self, bx: CoordBox) -> Result<Self> {
        Self::new(self.expr.clone(), bx)
    }
}

fn require_inside(grid: &SampleGrid, bx: &CoordBox, what: &str) -> Result<()> {
    let eps = 1e-12 * bx.diameter().max(1.0);
    if !bx.contains_box(grid.bx(), eps) {
        return Err(Error::Domain(format!(
            "grid box is not inside the {what} box"
        )));
    }
    Ok(())
}

/// Max over the grid of `|df^T J(p) - i df|_max`.
pub fn cr_residual(acs: &AcStructure, f: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    acs.require_grid(grid)?;
    require_inside(grid, f.bx(), "function")?;
    let grad = f.expr.gradient();
    Ok(par::max_over(grid.len(), |i| {
        let p = grid.point(i);
        let df = OneForm(grad.iter().map(|g| g.eval(p)).collect());
        let j = acs.matrix_at(p);
        (df.times_matrix(&j) + -(df * I)).max_norm()
    }))
}

/// Real form of the CR system for `f = u + i v`: the residuals of
/// `du^T J + dv` and `dv^T J - du`. Passes iff both are within `tol`.
pub fn cr_equations_check(
    acs: &AcStructure,
    f: &ScalarField,
    grid: &SampleGrid,
    tol: f64,
) -> Result<Report> {
    acs.require_grid(grid)?;
    require_inside(grid, f.bx(), "function")?;
    let (u, v) = f.expr.re_im();
    let du = u.gradient();
    let dv = v.gradient();
    let d = acs.dim();
    let per_point = par::map_range(grid.len(), |i| {
        let p = grid.point(i);
        let j = acs.matrix_at(p);
        let du_p: Vec<f64> = du.iter().map(|g| g.eval_real(p)).collect();
        let dv_p: Vec<f64> = dv.iter().map(|g| g.eval_real(p)).collect();
        let mut ru = 0.0f64;
        let mut rv = 0.0f64;
        for k in 0..d {
            let du_j: f64 = (0..d).map(|a| du_p[a] * j[(a, k)]).sum();
            let dv_j: f64 = (0..d).map(|a| dv_p[a] * j[(a, k)]).sum();
            ru = ru.max((du_j + dv_p[k]).abs());
            rv = rv.max((dv_j - du_p[k]).abs());
        }
        (ru, rv)
    });
    let (ru, rv) = per_point
        .into_iter()
        .fold((0.0f64, 0.0f64), |(a, b), (x, y)| (a.max(x), b.max(y)));
    let mut r = Report::new("cr_check");
    r.metric("du_residual", ru)
        .metric("dv_residual", rv)
        .metric("cr_residual", cr_residual(acs, f, grid)?)
        .tolerance("cr", tol)
        .require("du_residual", Cmp::Le, "cr")
        .require("dv_residual", Cmp::Le, "cr");
    Ok(r.finish())
}

/// Nullspace of the discretised CR system over a monomial ansatz.
#[derive(Debug, Clone, PartialEq)]
pub struct AhSolutionSet {
    /// Non-constant solutions in canonical order.
    pub basis: Vec<ScalarField>,
    /// All singular values of the system matrix, descending.
    pub singular_values: Vec<f64>,
    /// Absolute cutoff applied to the singular values.
    pub threshold_used: f64,
    /// Ansatz columns in order.
    pub monomials: Vec<Monomial>,
    /// Dimension of the numerical nullspace, including constants.
    pub nullspace_dim: usize,
}

/// Default lattice density for a given ansatz degree.
pub fn default_points_per_axis(degree: u32) -> usize {
    2 * degree as usize + 1
}

fn monomial_partial(m: &Monomial, i: usize, p: &[f64]) -> f64 {
    let e = m.0[i];
    if e == 0 {
        return 0.0;
    }
    let mut v = f64::from(e);
    for (k, (&ek, &x)) in m.0.iter().zip(p).enumerate() {
        let pow = if k == i { ek - 1 } else { ek };
        if pow > 0 {
            v *= x.powi(pow as i32);
        }
    }
    v
}

/// Rows `sum_i d_i m(p) J_ik(p) - i d_k m(p)`, one per component `k`.
fn cr_rows_at(acs: &AcStructure, monos: &[Monomial], p: &[f64]) -> Vec<Vec<Complex64>> {
    let d = acs.dim();
    let j = acs.matrix_at(p);
    let partials: Vec<Vec<f64>> = monos
        .iter()
        .map(|m| (0..d).map(|i| monomial_partial(m, i, p)).collect())
        .collect();
    (0..d)
        .map(|k| {
            partials
                .iter()
                .map(|dm| {
                    let re: f64 = (0..d).map(|i| dm[i] * j[(i, k)]).sum();
                    Complex64::new(re, -dm[k])
                })
                .collect()
        })
        .collect()
}

/// Assembles the CR system of an ansatz of total degree `degree` on `grid`.
pub fn cr_system(acs: &AcStructure, degree: u32, grid: &SampleGrid) -> (CMatrix, Vec<Monomial>) {
    let monos = monomials_up_to(acs.dim(), degree);
    let blocks = par::map_range(grid.len(), |i| cr_rows_at(acs, &monos, grid.point(i)));
    let d = acs.dim();
    let cols = monos.len();
    let mut a = CMatrix::zeros(grid.len() * d, cols);
    for (pi, block) in blocks.iter().enumerate() {
        for (k, row) in block.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                a[(pi * d + k, c)] = *v;
            }
        }
    }
    (a, monos)
}

/// Solves `J* df = i df` for polynomials `f` of total degree `<= degree`,
/// imposed pointwise on `grid`. The basis is the reduced row-echelon form of
/// the numerical nullspace with pivots in monomial order, constants removed.
pub fn solve_ah_polynomials(
    acs: &AcStructure,
    degree: u32,
    grid: &SampleGrid,
    svd_rel_tol: f64,
) -> Result<AhSolutionSet> {
    acs.require_grid(grid)?;
    if degree == 0 {
        return Err(Error::Config("ansatz degree must be at least 1".into()));
    }
    if degree > Limits::default().max_degree {
        return Err(Error::Config(format!(
            "ansatz degree {degree} exceeds cap {}",
            Limits::default().max_degree
        )));
    }
    let (a, monos) = cr_system(acs, degree, grid);
    if grid.len() < monos.len() {
        return Err(Error::Config(format!(
            "grid has {} points but the ansatz has {} monomials",
            grid.len(),
            monos.len()
        )));
    }
    let ns = linalg::null_space(&a, svd_rel_tol)?;
    let rows = linalg::rref(&ns.vectors, 1e-6);
    let mut basis = Vec::new();
    for (pivot, row) in rows {
        if monos[pivot].is_constant() {
            continue;
        }
        let terms = monos.iter().zip(&row).filter_map(|(m, c)| {
            let c = chop(*c);
            (c != Complex64::new(0.0, 0.0) && !m.is_constant()).then(|| (m.clone(), c))
        });
        let expr = Poly::from_terms(acs.dim(), terms)?;
        basis.push(ScalarField::new(expr, acs.bx().clone())?);
    }
    Ok(AhSolutionSet {
        basis,
        singular_values: ns.singular_values,
        threshold_used: ns.threshold,
        monomials: monos,
        nullspace_dim: ns.vectors.len(),
    })
}

fn chop(c: Complex64) -> Complex64 {
    let re = if c.re.abs() < CHOP { 0.0 } else { c.re };
    let im = if c.im.abs() < CHOP { 0.0 } else { c.im };
    Complex64::new(re, im)
}

/// Real Jacobian of `(Re f1, Im f1, ..., Re fm, Im fm)` at `p`.
fn real_jacobian(grads: &[Vec<Poly>], p: &[f64]) -> RMatrix {
    let d = p.len();
    let mut jac = RMatrix::zeros(2 * grads.len(), d);
    for (r, g) in grads.iter().enumerate() {
        for (c, gc) in g.iter().enumerate() {
            let v = gc.eval(p);
            jac[(2 * r, c)] = v.re;
            jac[(2 * r + 1, c)] = v.im;
        }
    }
    jac
}

/// Rank data of a function tuple over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RankEvidence {
    /// Max over the grid of the numerical rank.
    pub rank: usize,
    /// First grid index attaining the max rank.
    pub best_point: usize,
    /// Singular values of the Jacobian at `best_point`.
    pub singular_values: Vec<f64>,
    /// Number of grid points whose rank is below the max.
    pub rank_drop_points: usize,
}

pub fn jacobian_rank(
    funcs: &[ScalarField],
    grid: &SampleGrid,
    svd_rel_tol: f64,
) -> Result<RankEvidence> {
    let first = funcs
        .first()
        .ok_or_else(|| Error::Config("independence needs at least one function".into()))?;
    for f in funcs {
        if f.bx() != first.bx() {
            return Err(Error::Domain(
                "functions are defined on different boxes".into(),
            ));
        }
    }
    require_inside(grid, first.bx(), "function")?;
    let grads: Vec<Vec<Poly>> = funcs.iter().map(|f| f.expr.gradient()).collect();
    let per_point = par::map_range(grid.len(), |i| {
        let jac = real_jacobian(&grads, grid.point(i));
        linalg::numerical_rank_real(&jac, svd_rel_tol)
    });
    let rank = per_point.iter().map(|(r, _)| *r).max().unwrap_or(0);
    let best_point = per_point.iter().position(|(r, _)| *r == rank).unwrap_or(0);
    let rank_drop_points = per_point.iter().filter(|(r, _)| *r < rank).count();
    Ok(RankEvidence {
        rank,
        best_point,
        singular_values: per_point
            .into_iter()
            .nth(best_point)
            .map(|(_, s)| s)
            .unwrap_or_default(),
        rank_drop_points,
    })
}

/// Generic real-Jacobian rank of the tuple; independent iff `2 * len`.
pub fn independence_rank(
    funcs: &[ScalarField],
    grid: &SampleGrid,
    svd_rel_tol: f64,
) -> Result<usize> {
    Ok(jacobian_rank(funcs, grid, svd_rel_tol)?.rank)
}

/// Outcome of the greedy Spencer-type estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeEstimate {
    pub m: usize,
    pub selected: Vec<ScalarField>,
    /// Jacobian singular values after each accepted function.
    pub jacobian_rank_evidence: Vec<Vec<f64>>,
    pub degree: u32,
    pub points_per_axis: usize,
    pub svd_rel_tol: f64,
    pub solution: AhSolutionSet,
    pub notes: Vec<String>,
}

/// Solves the CR system and greedily keeps basis functions that raise the
/// generic Jacobian rank by exactly two. The result is a lower bound for the
/// type, limited by the polynomial ansatz.
pub fn estimate_spencer_type(
    acs: &AcStructure,
    grid: &SampleGrid,
    degree: u32,
    tols: &Tolerances,
) -> Result<TypeEstimate> {
    let solution = solve_ah_polynomials(acs, degree, grid, tols.svd_rel)?;
    let mut selected: Vec<ScalarField> = Vec::new();
    let mut evidence = Vec::new();
    let mut notes = Vec::new();
    let mut rank = 0;
    for f in &solution.basis {
        let mut trial = selected.clone();
        trial.push(f.clone());
        let ev = jacobian_rank(&trial, grid, tols.svd_rel)?;
        if ev.rank == rank + 2 {
            if ev.rank_drop_points > 0 {
                notes.push(format!(
                    "rank {} drops at {} of {} grid points",
                    ev.rank,
                    ev.rank_drop_points,
                    grid.len()
                ));
            }
            rank = ev.rank;
            selected.push(f.clone());
            evidence.push(ev.singular_values);
        }
    }
    if selected.len() > acs.n() {
        notes.push(format!(
            "numerical anomaly: {} independent functions exceed n = {}; truncated",
            selected.len(),
            acs.n()
        ));
        selected.truncate(acs.n());
        evidence.truncate(acs.n());
    }
    Ok(TypeEstimate {
        m: selected.len(),
        selected,
        jacobian_rank_evidence: evidence,
        degree,
        points_per_axis: grid.points_per_axis(),
        svd_rel_tol: tols.svd_rel,
        solution,
        notes,
    })
}

impl TypeEstimate {
    /// Report with the estimate as metrics. `expected_m` is the value the
    /// caller requires; the check is `m == expected_m`.
    pub fn report(&self, expected_m: usize) -> Report {
        let s = &self.solution.singular_values;
        let retained_min = s
            .iter()
            .copied()
            .filter(|v| *v > self.solution.threshold_used)
            .fold(f64::INFINITY, f64::min);
        let mut r = Report::new("spencer_type");
        r.metric("m", self.m as f64)
            .metric("degree", f64::from(self.degree))
            .metric("points_per_axis", self.points_per_axis as f64)
            .metric("nullspace_dim", self.solution.nullspace_dim as f64)
            .metric("ansatz_size", self.solution.monomials.len() as f64)
            .metric("sigma_max", s.first().copied().unwrap_or(0.0))
            .metric(
                "sigma_min_retained",
                if retained_min.is_finite() {
                    retained_min
                } else {
                    0.0
                },
            )
            .metric("svd_threshold", self.solution.threshold_used)
            .tolerance("svd_rel", self.svd_rel_tol)
            .tolerance("expected_m", expected_m as f64)
            .require("m", Cmp::Eq, "expected_m")
            .note(format!(
                "m is a lower bound from a polynomial ansatz of degree {}",
                self.degree
            ));
        for f in &self.selected {
            r.note(format!("selected: {}", f.expr()));
        }
        for n in &self.notes {
            r.note(n.clone());
        }
        r.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jfield::twisted_r4;

    fn std_c1() -> AcStructure {
        AcStructure::standard(CoordBox::cube(1, -1.0, 1.0).unwrap())
    }

    fn std_c2() -> AcStructure {
        AcStructure::standard(CoordBox::cube(2, -1.0, 1.0).unwrap())
    }

    #[test]
    fn residual_of_z_and_zbar() {
        let acs = std_c1();
        let grid = SampleGrid::new(acs.bx(), 7).unwrap();
        let z = ScalarField::parse("x1 + i*x2", acs.bx().clone()).unwrap();
        let zb = ScalarField::parse("x1 - i*x2", acs.bx().clone()).unwrap();
        assert_eq!(cr_residual(&acs, &z, &grid).unwrap(), 0.0);
        assert!((cr_residual(&acs, &zb, &grid).unwrap() - 2.0).abs() < 1e-12);
        let r = cr_equations_check(&acs, &zb, &grid, 1e-8).unwrap();
        assert!(!r.passed());
        let c = ScalarField::parse("(3-1i)", acs.bx().clone()).unwrap();
        assert!(cr_equations_check(&acs, &c, &grid, 0.0).unwrap().passed());
    }

    #[test]
    fn std_c1_nullspaces() {
        let acs = std_c1();
        for (degree, want) in [(1u32, 1usize), (2, 2), (3, 3)] {
            let grid = SampleGrid::new(acs.bx(), default_points_per_axis(degree)).unwrap();
            let sol = solve_ah_polynomials(&acs, degree, &grid, 1e-8).unwrap();
            assert_eq!(sol.basis.len(), want, "degree {degree}");
            assert_eq!(sol.nullspace_dim, want + 1);
        }
        let grid = SampleGrid::new(acs.bx(), 5).unwrap();
        let sol = solve_ah_polynomials(&acs, 2, &grid, 1e-8).unwrap();
        let z = Poly::complex_coordinate(2, 0);
        assert!((sol.basis[0].expr().clone() - z.clone()).max_coefficient() < 1e-12);
        assert!((sol.basis[1].expr().clone() - z.pow(2)).max_coefficient() < 1e-12);
    }

    #[test]
    fn under_determined_grid_is_rejected() {
        let acs = std_c2();
        let grid = SampleGrid::new(acs.bx(), 1).unwrap();
        assert!(matches!(
            solve_ah_polynomials(&acs, 1, &grid, 1e-8),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ranks() {
        let acs = std_c1();
        let grid = SampleGrid::new(acs.bx(), 5).unwrap();
        let z = ScalarField::parse("x1 + i*x2", acs.bx().clone()).unwrap();
        let z2 = ScalarField::new(z.expr().pow(2), acs.bx().clone()).unwrap();
        assert_eq!(
            independence_rank(std::slice::from_ref(&z), &grid, 1e-8).unwrap(),
            2
        );
        assert_eq!(independence_rank(&[z, z2], &grid, 1e-8).unwrap(), 2);
    }

    #[test]
    fn type_estimates() {
        let tols = Tolerances::default();
        let c1 = std_c1();
        let g = SampleGrid::new(c1.bx(), 5).unwrap();
        assert_eq!(estimate_spencer_type(&c1, &g, 2, &tols).unwrap().m, 1);
        let c2 = std_c2();
        let g = SampleGrid::new(c2.bx(), 3).unwrap();
        assert_eq!(estimate_spencer_type(&c2, &g, 1, &tols).unwrap().m, 2);
        let tw = twisted_r4();
        for degree in 1..=3u32 {
            let g = SampleGrid::new(tw.bx(), default_points_per_axis(degree)).unwrap();
            let est = estimate_spencer_type(&tw, &g, degree, &tols).unwrap();
            assert_eq!(est.m, 1, "degree {degree}");
            assert_eq!(est.solution.nullspace_dim, degree as usize + 1);
        }
    }
}
