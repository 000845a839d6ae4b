//! Spencer coordinate systems: certification of a chart `(f1..fm, passive
//! coordinates)`, the projection `f_U`, factorization of functions through
//! `f_U`, transition maps between charts and their cocycle consistency.

use std::sync::Arc;

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::crsolve::{self, ScalarField};
use crate::error::{Error, Result};
use crate::jfield::AcStructure;
use crate::linalg::{self, CMatrix, RMatrix};
use crate::par;
use crate::poly::{monomials_up_to, Monomial, Poly, VarNames};
use crate::region::{CoordBox, SampleGrid};
use crate::report::{Cmp, Report};

/// A certified chart on the box `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpencerChart {
    bx: CoordBox,
    acs: Arc<AcStructure>,
    ah_coords: Vec<ScalarField>,
    /// Complex coordinate indices `j` whose pairs `(x_j, y_j)` complete the
    /// chart, ascending.
    passive_axes: Vec<usize>,
    jacobian_certificate: f64,
    det_sign: f64,
}

/// Real Jacobian rows of `(Re f1, Im f1, ..., x_j, y_j, ...)` at `p`.
fn chart_jacobian(grads: &[Vec<Poly>], passive: &[usize], p: &[f64]) -> RMatrix {
    let d = p.len();
    let rows = 2 * grads.len() + 2 * passive.len();
    let mut jac = RMatrix::zeros(rows, d);
    for (r, g) in grads.iter().enumerate() {
        for (c, gc) in g.iter().enumerate() {
            let v = gc.eval(p);
            jac[(2 * r, c)] = v.re;
            jac[(2 * r + 1, c)] = v.im;
        }
    }
    let base = 2 * grads.len();
    for (s, &j) in passive.iter().enumerate() {
        jac[(base + 2 * s, 2 * j)] = 1.0;
        jac[(base + 2 * s + 1, 2 * j + 1)] = 1.0;
    }
    jac
}

fn volume(jac: &RMatrix) -> f64 {
    linalg::singular_values_real(jac).iter().product()
}

impl SpencerChart {
    /// A chart assembled without any of the certification checks. Only
    /// dimensions are validated; intended for negative tests.
    pub fn unchecked(
        acs: Arc<AcStructure>,
        bx: CoordBox,
        ah_coords: Vec<ScalarField>,
        passive_axes: Vec<usize>,
    ) -> Result<Self> {
        let n = acs.n();
        if bx.dim() != acs.dim() {
            return Err(Error::Dimension(
                "chart box and structure differ in dimension".into(),
            ));
        }
        if ah_coords.len() + passive_axes.len() != n || passive_axes.iter().any(|&j| j >= n) {
            return Err(Error::Dimension(format!(
                "{} functions and {} passive pairs do not make {n} complex coordinates",
                ah_coords.len(),
                passive_axes.len()
            )));
        }
        let ah_coords = ah_coords
            .into_iter()
            .map(|f| f.on_box(bx.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpencerChart {
            bx,
            acs,
            ah_coords,
            passive_axes,
            jacobian_certificate: 0.0,
            det_sign: 0.0,
        })
    }

    pub fn bx(&self) -> &CoordBox {
        &self.bx
    }

    pub fn acs(&self) -> &Arc<AcStructure> {
        &self.acs
    }

    pub fn ah_coords(&self) -> &[ScalarField] {
        &self.ah_coords
    }

    pub fn m(&self) -> usize {
        self.ah_coords.len()
    }

    pub fn passive_axes(&self) -> &[usize] {
        &self.passive_axes
    }

    /// Min `|det|` of the full real Jacobian over the verification grid.
    pub fn jacobian_certificate(&self) -> f64 {
        self.jacobian_certificate
    }

    /// Sign of the Jacobian determinant on the verification grid (0 for an
    /// unchecked chart).
    pub fn det_sign(&self) -> f64 {
        self.det_sign
    }

    /// `f_U(p) = (f1(p), ..., fm(p))`.
    pub fn project_point(&self, p: &[f64]) -> Vec<Complex64> {
        self.ah_coords.iter().map(|f| f.eval(p)).collect()
    }

    /// Signed determinant of the full chart Jacobian at `p`.
    pub fn jacobian_det(&self, p: &[f64]) -> f64 {
        let grads: Vec<Vec<Poly>> = self.ah_coords.iter().map(|f| f.expr().gradient()).collect();
        linalg::det_real(&chart_jacobian(&grads, &self.passive_axes, p))
    }

    pub fn report(&self) -> Report {
        let mut r = Report::new("chart");
        r.metric("m", self.m() as f64)
            .metric("jacobian_min_det", self.jacobian_certificate)
            .metric("det_sign", self.det_sign);
        for j in &self.passive_axes {
            r.note(format!("passive pair: x{}, y{}", j + 1, j + 1));
        }
        r.finish()
    }
}

/// Certifies `ah_funcs` as the almost holomorphic part of a Spencer chart on
/// `grid.bx()`: CR residuals within `tols.cr`, real-Jacobian rank `2m`, and
/// passive coordinate pairs chosen greedily so that the full Jacobian has
/// min `|det| > tols.det` with constant sign.
pub fn build_spencer_chart(
    acs: Arc<AcStructure>,
    ah_funcs: Vec<ScalarField>,
    grid: &SampleGrid,
    tols: &Tolerances,
) -> Result<SpencerChart> {
    acs.require_grid(grid)?;
    let bx = grid.bx().clone();
    let n = acs.n();
    let m = ah_funcs.len();
    if m == 0 || m > n {
        return Err(Error::Dimension(format!(
            "a chart needs 1..={n} functions, got {m}"
        )));
    }
    let funcs = ah_funcs
        .into_iter()
        .map(|f| f.on_box(bx.clone()))
        .collect::<Result<Vec<_>>>()?;
    for (k, f) in funcs.iter().enumerate() {
        let res = crsolve::cr_residual(&acs, f, grid)?;
        if !(res <= tols.cr) {
            return Err(Error::Chart {
                message: format!(
                    "function {} is not almost holomorphic (CR residual {res:e})",
                    k + 1
                ),
                best_det: 0.0,
            });
        }
    }
    let rank = crsolve::independence_rank(&funcs, grid, tols.svd_rel)?;
    if rank != 2 * m {
        return Err(Error::Independence {
            rank,
            expected: 2 * m,
        });
    }
    let grads: Vec<Vec<Poly>> = funcs.iter().map(|f| f.expr().gradient()).collect();
    let mut passive: Vec<usize> = Vec::new();
    for _ in m..n {
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..n).filter(|j| !passive.contains(j)) {
            let mut trial = passive.clone();
            trial.push(cand);
            let score = par::map_range(grid.len(), |i| {
                volume(&chart_jacobian(&grads, &trial, grid.point(i)))
            })
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((cand, score));
            }
        }
        let (cand, _) = best.expect("at least one candidate pair remains");
        passive.push(cand);
    }
    passive.sort_unstable();
    let dets = par::map_range(grid.len(), |i| {
        linalg::det_real(&chart_jacobian(&grads, &passive, grid.point(i)))
    });
    let min_det = dets.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    if !(min_det > tols.det) {
        return Err(Error::Chart {
            message: "no passive selection gives a nondegenerate Jacobian".into(),
            best_det: min_det,
        });
    }
    let sign = dets[0].signum();
    if dets.iter().any(|d| d.signum() != sign) {
        return Err(Error::Chart {
            message: "Jacobian determinant changes sign on the grid".into(),
            best_det: min_det,
        });
    }
    Ok(SpencerChart {
        bx,
        acs,
        ah_coords: funcs,
        passive_axes: passive,
        jacobian_certificate: min_det,
        det_sign: sign,
    })
}

/// Grid points paired with their images under `f_U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedCloud {
    pub sources: Vec<Vec<f64>>,
    pub images: Vec<Vec<Complex64>>,
}

impl ProjectedCloud {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

pub fn project(chart: &SpencerChart, grid: &SampleGrid) -> Result<ProjectedCloud> {
    let eps = 1e-12 * chart.bx.diameter().max(1.0);
    if !chart.bx.contains_box(grid.bx(), eps) {
        return Err(Error::Domain("grid box is not inside the chart box".into()));
    }
    let images = par::map_range(grid.len(), |i| chart.project_point(grid.point(i)));
    Ok(ProjectedCloud {
        sources: grid.points().map(<[f64]>::to_vec).collect(),
        images,
    })
}

fn design_matrix(monos: &[Monomial], points: &[Vec<Complex64>]) -> CMatrix {
    CMatrix::from_fn(points.len(), monos.len(), |r, c| {
        monos[c].eval_complex(&points[r])
    })
}

fn poly_from_column(nvars: usize, monos: &[Monomial], sol: &CMatrix, col: usize) -> Result<Poly> {
    Poly::from_terms(
        nvars,
        monos
            .iter()
            .enumerate()
            .map(|(r, m)| (m.clone(), sol[(r, col)])),
    )
}

fn max_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Result of fitting `h = H(f1, ..., fm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    /// `H` as a polynomial in `w1..wm`.
    pub h: Poly,
    /// Max over the grid of `|h - H(f_U)|`.
    pub residual: f64,
    /// Max spread of `h` inside clusters of coinciding images.
    pub fiber_variance: f64,
    /// Max of `|h|` over the grid.
    pub scale: f64,
    pub condition: f64,
    /// Number of clusters with at least two members.
    pub clusters: usize,
    pub fit_degree: u32,
}

impl Factorization {
    fn relative(&self, v: f64) -> f64 {
        if self.scale > 0.0 {
            v / self.scale
        } else {
            v
        }
    }

    pub fn relative_residual(&self) -> f64 {
        self.relative(self.residual)
    }

    /// Checks relative residual and fiber spread against `tols.fit`.
    pub fn report(&self, tols: &Tolerances) -> Report {
        let mut r = Report::new("factorize");
        r.metric("fit_residual", self.residual)
            .metric("fiber_variance", self.fiber_variance)
            .metric("scale", self.scale)
            .metric("relative_residual", self.relative_residual())
            .metric(
                "relative_fiber_variance",
                self.relative(self.fiber_variance),
            )
            .metric("condition", self.condition)
            .metric("fiber_clusters", self.clusters as f64)
            .metric("fit_degree", f64::from(self.fit_degree))
            .tolerance("fit", tols.fit)
            .require("relative_residual", Cmp::Le, "fit")
            .require("relative_fiber_variance", Cmp::Le, "fit")
            .note(format!(
                "H(w) = {}",
                self.h.to_string_with(&VarNames::Complex(self.h.nvars()))
            ));
        r.finish()
    }
}

/// Groups cloud indices whose images agree within `tol` (max-norm),
/// joining chains of close points. Clusters are listed by smallest index.
fn cluster(images: &[Vec<Complex64>], tol: f64) -> Vec<Vec<usize>> {
    let n = images.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut order: Vec<usize> = (0..n).collect();
    let key = |i: usize| images[i].first().map_or(0.0, |w| w.re);
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if key(b) - key(a) > tol {
                break;
            }
            if max_dist(&images[a], &images[b]) <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Fits `h = H(f1, ..., fm)` with `H` a polynomial of degree `fit_degree`
/// and measures how far `h` is from being constant on the fibers of `f_U`.
pub fn factorize(
    chart: &SpencerChart,
    h: &ScalarField,
    grid: &SampleGrid,
    fit_degree: u32,
    tols: &Tolerances,
) -> Result<Factorization> {
    let cloud = project(chart, grid)?;
    let values: Vec<Complex64> = cloud.sources.iter().map(|p| h.eval(p)).collect();
    let m = chart.m();
    let monos = monomials_up_to(m, fit_degree);
    let a = design_matrix(&monos, &cloud.images);
    let b = CMatrix::from_fn(values.len(), 1, |r, _| values[r]);
    let ls = linalg::least_squares(&a, &b, tols.fit_cond_max)?;
    let hpoly = poly_from_column(m, &monos, &ls.solution, 0)?;
    let residual = cloud
        .images
        .iter()
        .zip(&values)
        .fold(0.0f64, |acc, (w, v)| {
            acc.max((hpoly.eval_complex(w) - v).norm())
        });
    let clusters = cluster(&cloud.images, tols.cluster_rel * chart.bx.diameter());
    let mut fiber_variance = 0.0f64;
    let mut used = 0;
    for c in clusters.iter().filter(|c| c.len() > 1) {
        used += 1;
        for (k, &a) in c.iter().enumerate() {
            for &b in &c[k + 1..] {
                fiber_variance = fiber_variance.max((values[a] - values[b]).norm());
            }
        }
    }
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
    Ok(Factorization {
        h: hpoly,
        residual,
        fiber_variance,
        scale,
        condition: ls.condition,
        clusters: used,
        fit_degree,
    })
}

/// Fitted change of Spencer coordinates between two charts.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMap {
    pub overlap: CoordBox,
    pub points_per_axis: usize,
    pub fit_degree: u32,
    /// Components of `phi` as polynomials in `w1..wm`.
    pub phi: Vec<Poly>,
    /// Components of the two-sided fit in `w1..wm, wb1..wbm`.
    pub full_fit: Vec<Poly>,
    pub fit_residual: f64,
    pub full_fit_residual: f64,
    /// Max `|coefficient|` of any term containing some `wb`.
    pub holomorphy_residual: f64,
    /// Min over the cloud of `|det dphi/dw|`.
    pub jacobian_min_det: f64,
    pub condition: f64,
    /// Diameter of the source image cloud.
    pub cloud_diameter: f64,
}

impl TransitionMap {
    /// `phi(w)`.
    pub fn eval(&self, w: &[Complex64]) -> Vec<Complex64> {
        self.phi.iter().map(|c| c.eval_complex(w)).collect()
    }

    /// The identity map of `C^m`, fitted on nothing.
    pub fn identity(m: usize, overlap: CoordBox) -> Self {
        let phi: Vec<Poly> = (0..m).map(|j| Poly::var(m, j)).collect();
        let full_fit = (0..m).map(|j| Poly::var(2 * m, j)).collect();
        TransitionMap {
            overlap,
            points_per_axis: 0,
            fit_degree: 1,
            phi,
            full_fit,
            fit_residual: 0.0,
            full_fit_residual: 0.0,
            holomorphy_residual: 0.0,
            jacobian_min_det: 1.0,
            condition: 1.0,
            cloud_diameter: 0.0,
        }
    }

    pub fn m(&self) -> usize {
        self.phi.len()
    }

    pub fn report(&self, tols: &Tolerances) -> Report {
        let names = VarNames::Complex(self.m());
        let mut r = Report::new("transition");
        r.metric("fit_residual", self.fit_residual)
            .metric("full_fit_residual", self.full_fit_residual)
            .metric("holomorphy_residual", self.holomorphy_residual)
            .metric("jacobian_min_det", self.jacobian_min_det)
            .metric("condition", self.condition)
            .metric("cloud_diameter", self.cloud_diameter)
            .tolerance("fit", tols.fit)
            .tolerance("holomorphy", tols.holomorphy)
            .tolerance("det", tols.det)
            .require("fit_residual", Cmp::Le, "fit")
            .require("holomorphy_residual", Cmp::Le, "holomorphy")
            .require("jacobian_min_det", Cmp::Gt, "det");
        for (j, c) in self.phi.iter().enumerate() {
            r.note(format!("phi{}(w) = {}", j + 1, c.to_string_with(&names)));
        }
        r.finish()
    }
}

/// Transition map on the overlap of the two chart boxes, sampled with `k`
/// points per axis.
pub fn transition_map(
    a: &SpencerChart,
    b: &SpencerChart,
    k: usize,
    fit_degree: u32,
    tols: &Tolerances,
) -> Result<TransitionMap> {
    let overlap =
        a.bx.intersect(&b.bx)
            .ok_or_else(|| Error::Overlap("chart boxes do not overlap".into()))?;
    let grid = SampleGrid::new(&overlap, k)?;
    transition_on_grid(a, b, &grid, fit_degree, tols)
}

/// Transition map fitted on the given lattice, which must lie in both
/// chart boxes.
pub fn transition_on_grid(
    a: &SpencerChart,
    b: &SpencerChart,
    grid: &SampleGrid,
    fit_degree: u32,
    tols: &Tolerances,
) -> Result<TransitionMap> {
    if a.acs != b.acs {
        return Err(Error::Config(
            "charts are built on different structures".into(),
        ));
    }
    if a.m() != b.m() {
        return Err(Error::Dimension(format!(
            "charts have {} and {} almost holomorphic coordinates",
            a.m(),
            b.m()
        )));
    }
    let ca = project(a, grid).map_err(|_| Error::Overlap("grid leaves the first chart".into()))?;
    let cb = project(b, grid).map_err(|_| Error::Overlap("grid leaves the second chart".into()))?;
    let m = a.m();
    let wa = &ca.images;
    let wb = &cb.images;
    let rhs = CMatrix::from_fn(wb.len(), m, |r, c| wb[r][c]);

    let monos = monomials_up_to(m, fit_degree);
    let ls = linalg::least_squares(&design_matrix(&monos, wa), &rhs, tols.fit_cond_max)?;
    let phi: Vec<Poly> = (0..m)
        .map(|c| poly_from_column(m, &monos, &ls.solution, c))
        .collect::<Result<_>>()?;
    let fit_residual = wa.iter().zip(wb).fold(0.0f64, |acc, (w, target)| {
        let v: Vec<Complex64> = phi.iter().map(|c| c.eval_complex(w)).collect();
        acc.max(max_dist(&v, target))
    });

    let doubled: Vec<Vec<Complex64>> = wa
        .iter()
        .map(|w| {
            w.iter()
                .copied()
                .chain(w.iter().map(|c| c.conj()))
                .collect()
        })
        .collect();
    let full_monos = monomials_up_to(2 * m, fit_degree);
    let full = linalg::least_squares(
        &design_matrix(&full_monos, &doubled),
        &rhs,
        tols.fit_cond_max,
    )?;
    let full_fit: Vec<Poly> = (0..m)
        .map(|c| poly_from_column(2 * m, &full_monos, &full.solution, c))
        .collect::<Result<_>>()?;
    let full_fit_residual = doubled.iter().zip(wb).fold(0.0f64, |acc, (w, target)| {
        let v: Vec<Complex64> = full_fit.iter().map(|c| c.eval_complex(w)).collect();
        acc.max(max_dist(&v, target))
    });
    let holomorphy_residual = full_fit
        .iter()
        .flat_map(|c| c.terms())
        .filter(|(mono, _)| mono.0[m..].iter().any(|&e| e > 0))
        .fold(0.0f64, |acc, (_, c)| acc.max(c.norm()));

    let dphi: Vec<Vec<Poly>> = phi.iter().map(Poly::gradient).collect();
    let jacobian_min_det = wa
        .iter()
        .map(|w| {
            CMatrix::from_fn(m, m, |r, c| dphi[r][c].eval_complex(w))
                .determinant()
                .norm()
        })
        .fold(f64::INFINITY, f64::min);
    let mut cloud_diameter = 0.0f64;
    for (i, x) in wa.iter().enumerate() {
        for y in &wa[i + 1..] {
            let d: f64 = x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum();
            cloud_diameter = cloud_diameter.max(d.sqrt());
        }
    }
    Ok(TransitionMap {
        overlap: grid.bx().clone(),
        points_per_axis: grid.points_per_axis(),
        fit_degree,
        phi,
        full_fit,
        fit_residual,
        full_fit_residual,
        holomorphy_residual,
        jacobian_min_det,
        condition: ls.condition.max(full.condition),
        cloud_diameter,
    })
}

/// `max |phi_bc(phi_ab(w)) - phi_ac(w)|` over the given source images.
pub fn cocycle_residual(
    ab: &TransitionMap,
    bc: &TransitionMap,
    ac: &TransitionMap,
    cloud: &[Vec<Complex64>],
) -> f64 {
    cloud.iter().fold(0.0f64, |acc, w| {
        acc.max(max_dist(&bc.eval(&ab.eval(w)), &ac.eval(w)))
    })
}

/// Fits the three pairwise transitions on a common lattice of the triple
/// overlap and checks `phi_bc o phi_ab = phi_ac` there.
pub fn cocycle_check(
    a: &SpencerChart,
    b: &SpencerChart,
    c: &SpencerChart,
    k: usize,
    fit_degree: u32,
    tols: &Tolerances,
) -> Result<Report> {
    let overlap =
        a.bx.intersect(&b.bx)
            .and_then(|x| x.intersect(&c.bx))
            .ok_or_else(|| Error::Overlap("triple overlap is empty".into()))?;
    let grid = SampleGrid::new(&overlap, k)?;
    let ab = transition_on_grid(a, b, &grid, fit_degree, tols)?;
    let bc = transition_on_grid(b, c, &grid, fit_degree, tols)?;
    let ac = transition_on_grid(a, c, &grid, fit_degree, tols)?;
    let cloud = project(a, &grid)?;
    let metric = cocycle_residual(&ab, &bc, &ac, &cloud.images);
    let mut r = Report::new("cocycle");
    r.metric("cocycle_residual", metric)
        .metric("fit_residual_ab", ab.fit_residual)
        .metric("fit_residual_bc", bc.fit_residual)
        .metric("fit_residual_ac", ac.fit_residual)
        .metric("grid_points", grid.len() as f64)
        .tolerance("cocycle", tols.cocycle)
        .require("cocycle_residual", Cmp::Le, "cocycle");
    Ok(r.finish())
}
