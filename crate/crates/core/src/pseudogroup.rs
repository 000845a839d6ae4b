//! Local diffeomorphisms of R^{2n} on boxes, their composition, inversion
//! and restriction, bounded-depth closures of finite families, the five
//! pseudogroup axioms, and the almost-holomorphic and "defined over"
//! checks.
//!
//! A map is either polynomial (components known symbolically), a composite
//! of two maps, or a Newton inverse of another map. Only polynomial maps
//! have exact symbolic Jacobians; the others use the chain rule and the
//! inverse function theorem.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::charts::SpencerChart;
use crate::config::{Limits, Tolerances};
use crate::error::{Error, Result};
use crate::jfield::AcStructure;
use crate::linalg::{self, RMatrix};
use crate::par;
use crate::poly::Poly;
use crate::region::{CoordBox, SampleGrid};
use crate::report::{Cmp, Report};

const NEWTON_MAX_ITER: usize = 60;
const BISECTION_STEPS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Given,
    Composed,
    Inverted,
    Restricted,
    Identity,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Given => "given",
            Provenance::Composed => "composed",
            Provenance::Inverted => "inverted",
            Provenance::Restricted => "restricted",
            Provenance::Identity => "identity",
        })
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Poly(Vec<Poly>),
    Composite {
        outer: Arc<LocalMap>,
        inner: Arc<LocalMap>,
    },
    /// Solves `forward(x) = q` by damped Newton from the nearest seed.
    Inverse {
        forward: Arc<LocalMap>,
        /// `(x, forward(x))` on a lattice of the forward domain.
        seeds: Arc<Vec<(Vec<f64>, Vec<f64>)>>,
    },
}

/// A map defined on a box of R^{2n} with values in R^{2n}.
#[derive(Debug, Clone)]
pub struct LocalMap {
    name: String,
    domain: CoordBox,
    repr: Repr,
    provenance: Provenance,
    depth: usize,
    declared_inverse: Option<Arc<LocalMap>>,
}

fn slack(bx: &CoordBox) -> f64 {
    1e-12 * bx.diameter().max(1.0)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

impl LocalMap {
    /// A polynomial map with real coefficients.
    pub fn new(name: impl Into<String>, domain: CoordBox, components: Vec<Poly>) -> Result<Self> {
        let name = name.into();
        let d = domain.dim();
        if components.len() != d {
            return Err(Error::Dimension(format!(
                "map {name} has {} components, expected {d}",
                components.len()
            )));
        }
        for c in &components {
            if c.nvars() != d {
                return Err(Error::Dimension(format!(
                    "map {name} has a component in {} variables, expected {d}",
                    c.nvars()
                )));
            }
            if !c.is_real() {
                return Err(Error::Config(format!(
                    "map {name} has a complex coefficient"
                )));
            }
            c.check_degree(Limits::default().max_degree)?;
        }
        Ok(LocalMap {
            name,
            domain,
            repr: Repr::Poly(components),
            provenance: Provenance::Given,
            depth: 1,
            declared_inverse: None,
        })
    }

    pub fn identity(domain: CoordBox) -> Self {
        let d = domain.dim();
        LocalMap {
            name: "id".into(),
            repr: Repr::Poly((0..d).map(|i| Poly::var(d, i)).collect()),
            domain,
            provenance: Provenance::Identity,
            depth: 1,
            declared_inverse: None,
        }
    }

    /// Attaches an inverse that [`invert`] validates and uses instead of
    /// Newton iteration.
    pub fn with_declared_inverse(mut self, inverse: LocalMap) -> Result<Self> {
        if inverse.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "declared inverse of {} has dimension {}",
                self.name,
                inverse.dim()
            )));
        }
        self.declared_inverse = Some(Arc::new(inverse));
        Ok(self)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &CoordBox {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Word length in the generators (given maps have depth 1).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Components, when the map is known symbolically.
    pub fn components(&self) -> Option<&[Poly]> {
        match &self.repr {
            Repr::Poly(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.repr, Repr::Poly(_))
    }

    pub fn declared_inverse(&self) -> Option<&Arc<LocalMap>> {
        self.declared_inverse.as_ref()
    }

    fn eval_raw(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.repr {
            Repr::Poly(c) => Ok(c.iter().map(|f| f.eval_real(p)).collect()),
            Repr::Composite { outer, inner } => outer.eval_raw(&inner.eval_raw(p)?),
            Repr::Inverse { forward, seeds } => newton(forward, seeds, p).ok_or_else(|| {
                Error::Inversion(format!(
                    "Newton iteration for {} did not converge at {p:?}",
                    self.name
                ))
            }),
        }
    }

    fn jacobian_raw(&self, p: &[f64]) -> Result<RMatrix> {
        let d = self.dim();
        match &self.repr {
            Repr::Poly(c) => Ok(RMatrix::from_fn(d, d, |i, j| {
                c[i].derivative(j).eval_real(p)
            })),
            Repr::Composite { outer, inner } => {
                let q = inner.eval_raw(p)?;
                Ok(outer.jacobian_raw(&q)? * inner.jacobian_raw(p)?)
            }
            Repr::Inverse { forward, .. } => {
                let x = self.eval_raw(p)?;
                linalg::inverse_real(&forward.jacobian_raw(&x)?).ok_or_else(|| {
                    Error::Inversion(format!("singular Jacobian of {} at {x:?}", forward.name))
                })
            }
        }
    }

    fn require(&self, p: &[f64]) -> Result<()> {
        if !self.domain.contains(p, slack(&self.domain)) {
            return Err(Error::Domain(format!(
                "point {p:?} is outside the domain of {}",
                self.name
            )));
        }
        Ok(())
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.require(p)?;
        self.eval_raw(p)
    }

    /// Real Jacobian `D map (p)`.
    pub fn jacobian(&self, p: &[f64]) -> Result<RMatrix> {
        self.require(p)?;
        self.jacobian_raw(p)
    }

    /// The same map on a sub-box of its domain.
    pub fn restrict(&self, sub: &CoordBox, label: &str) -> Result<LocalMap> {
        if !self.domain.contains_box(sub, slack(&self.domain)) {
            return Err(Error::Domain(format!(
                "restriction box is not inside the domain of {}",
                self.name
            )));
        }
        Ok(LocalMap {
            name: format!("{}|{label}", self.name),
            domain: sub.clone(),
            repr: self.repr.clone(),
            provenance: Provenance::Restricted,
            depth: self.depth,
            declared_inverse: self.declared_inverse.clone(),
        })
    }
}

fn newton(forward: &LocalMap, seeds: &[(Vec<f64>, Vec<f64>)], q: &[f64]) -> Option<Vec<f64>> {
    let (mut x, _) = seeds
        .iter()
        .min_by(|a, b| max_diff(&a.1, q).total_cmp(&max_diff(&b.1, q)))?
        .clone();
    let scale = 1.0 + q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual = |x: &[f64]| -> Option<(Vec<f64>, f64)> {
        let fx = forward.eval_raw(x).ok()?;
        let r: Vec<f64> = fx.iter().zip(q).map(|(a, b)| a - b).collect();
        let n = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Some((r, n))
    };
    let (mut r, mut rn) = residual(&x)?;
    for _ in 0..NEWTON_MAX_ITER {
        if rn <= 1e-13 * scale {
            return Some(x);
        }
        let jac = forward.jacobian_raw(&x).ok()?;
        let step = linalg::solve_real(&jac, &r)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xn: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - lambda * s).collect();
            if let Some((rn_vec, rn_new)) = residual(&xn) {
                if rn_new < rn {
                    x = xn;
                    r = rn_vec;
                    rn = rn_new;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return (rn <= 1e-11 * scale).then_some(x);
        }
    }
    (rn <= 1e-11 * scale).then_some(x)
}

fn axis_value(lo: f64, hi: f64, k: usize, j: usize) -> f64 {
    if k == 1 {
        0.5 * (lo + hi)
    } else if j + 1 == k {
        hi
    } else {
        lo + (hi - lo) * j as f64 / (k - 1) as f64
    }
}

/// Lattice points of `bx` with axis `axis` pinned to `t`.
fn face_points(bx: &CoordBox, k: usize, axis: usize, t: f64) -> Vec<Vec<f64>> {
    let d = bx.dim();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let p: Vec<f64> = (0..d)
            .map(|a| {
                if a == axis {
                    t
                } else {
                    axis_value(bx.lo()[a], bx.hi()[a], k, idx[a])
                }
            })
            .collect();
        out.push(p);
        let mut a = d;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if a == axis {
                continue;
            }
            idx[a] += 1;
            if idx[a] < k {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Largest sub-box of `bx` (found by peeling lattice faces, then bisecting
/// each peeled side) whose lattice points all satisfy `good`.
fn shrink_domain<F>(bx: &CoordBox, k: usize, good: F) -> Option<CoordBox>
where
    F: Fn(&[f64]) -> bool + Sync + Send,
{
    let grid = SampleGrid::new(bx, k).ok()?;
    let flags = par::map_range(grid.len(), |i| good(grid.point(i)));
    if !flags.iter().any(|&f| f) {
        return None;
    }
    if flags.iter().all(|&f| f) {
        return Some(bx.clone());
    }
    if k == 1 {
        return None;
    }
    let d = bx.dim();
    let index_of = |mut i: usize| -> Vec<usize> {
        let mut idx = vec![0; d];
        for a in (0..d).rev() {
            idx[a] = i % k;
            i /= k;
        }
        idx
    };
    let indices: Vec<Vec<usize>> = (0..grid.len()).map(index_of).collect();
    let mut lo = vec![0usize; d];
    let mut hi = vec![k - 1; d];
    loop {
        let bad: Vec<&Vec<usize>> = indices
            .iter()
            .zip(&flags)
            .filter(|(idx, f)| !**f && (0..d).all(|a| idx[a] >= lo[a] && idx[a] <= hi[a]))
            .map(|(idx, _)| idx)
            .collect();
        if bad.is_empty() {
            break;
        }
        let mut best = (0usize, false, 0usize);
        for a in 0..d {
            for side_hi in [false, true] {
                let at = if side_hi { hi[a] } else { lo[a] };
                let count = bad.iter().filter(|idx| idx[a] == at).count();
                if count > best.2 {
                    best = (a, side_hi, count);
                }
            }
        }
        let (a, side_hi, _) = best;
        if lo[a] == hi[a] {
            return None;
        }
        if side_hi {
            hi[a] -= 1;
        } else {
            lo[a] += 1;
        }
    }
    let val = |a: usize, j: usize| axis_value(bx.lo()[a], bx.hi()[a], k, j);
    let mut blo: Vec<f64> = (0..d).map(|a| val(a, lo[a])).collect();
    let mut bhi: Vec<f64> = (0..d).map(|a| val(a, hi[a])).collect();
    let peeled = CoordBox::from_bounds_unchecked(blo.clone(), bhi.clone());
    for a in 0..d {
        for side_hi in [false, true] {
            let (mut good_t, mut bad_t) = if side_hi {
                if hi[a] == k - 1 {
                    continue;
                }
                (bhi[a], val(a, hi[a] + 1))
            } else {
                if lo[a] == 0 {
                    continue;
                }
                (blo[a], val(a, lo[a] - 1))
            };
            let current = CoordBox::from_bounds_unchecked(blo.clone(), bhi.clone());
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (good_t + bad_t);
                if face_points(&current, k, a, mid).iter().all(|p| good(p)) {
                    good_t = mid;
                } else {
                    bad_t = mid;
                }
            }
            if side_hi {
                bhi[a] = good_t;
            } else {
                blo[a] = good_t;
            }
        }
    }
    if (0..d).any(|a| !(blo[a] < bhi[a])) {
        return None;
    }
    let expanded = CoordBox::from_bounds_unchecked(blo, bhi);
    let check = SampleGrid::new(&expanded, k).ok()?;
    if par::map_range(check.len(), |i| good(check.point(i)))
        .into_iter()
        .all(|f| f)
    {
        Some(expanded)
    } else if (0..d).all(|a| peeled.lo()[a] < peeled.hi()[a]) {
        Some(peeled)
    } else {
        None
    }
}

fn wrap(name: &str) -> String {
    if name.contains('*') {
        format!("({name})")
    } else {
        name.to_string()
    }
}

/// `outer o inner` on the largest lattice-certified sub-box of
/// `dom(inner)` that `inner` maps into `dom(outer)`.
pub fn compose(outer: &Arc<LocalMap>, inner: &Arc<LocalMap>, k: usize) -> Result<LocalMap> {
    if outer.dim() != inner.dim() {
        return Err(Error::Dimension(
            "maps act on spaces of different dimension".into(),
        ));
    }
    let eps = slack(&outer.domain);
    let domain = shrink_domain(&inner.domain, k, |p| {
        inner
            .eval_raw(p)
            .map(|q| outer.domain.contains(&q, eps))
            .unwrap_or(false)
    })
    .ok_or_else(|| {
        Error::Composition(format!(
            "{} maps no lattice point of its domain into the domain of {}",
            inner.name, outer.name
        ))
    })?;
    let cap = Limits::default().max_degree;
    let repr = match (&outer.repr, &inner.repr) {
        (Repr::Poly(o), Repr::Poly(i))
            if o.iter().map(Poly::degree).max().unwrap_or(0)
                * i.iter().map(Poly::degree).max().unwrap_or(0)
                <= cap =>
        {
            Repr::Poly(o.iter().map(|c| c.compose(i)).collect::<Result<_>>()?)
        }
        _ => Repr::Composite {
            outer: outer.clone(),
            inner: inner.clone(),
        },
    };
    Ok(LocalMap {
        name: format!("{}*{}", wrap(&outer.name), wrap(&inner.name)),
        domain,
        repr,
        provenance: Provenance::Composed,
        depth: outer.depth + inner.depth,
        declared_inverse: None,
    })
}

/// Inverse of `map` on the largest lattice-certified sub-box of its image
/// bounding box. A declared inverse is validated by round trip and used;
/// otherwise values come from damped Newton iteration.
pub fn invert(map: &Arc<LocalMap>, k: usize, tols: &Tolerances) -> Result<LocalMap> {
    let grid = SampleGrid::new(&map.domain, k)?;
    let dets = par::try_map_range(grid.len(), |i| {
        Ok(linalg::det_real(&map.jacobian_raw(grid.point(i))?).abs())
    })?;
    let (worst, min_det) =
        dets.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
        );
    if !(min_det > tols.det) {
        return Err(Error::Inversion(format!(
            "Jacobian of {} degenerates: |det| = {min_det:e} at {:?}",
            map.name,
            grid.point(worst)
        )));
    }
    let seeds: Vec<(Vec<f64>, Vec<f64>)> = par::try_map_range(grid.len(), |i| {
        let p = grid.point(i).to_vec();
        let v = map.eval_raw(&p)?;
        Ok((p, v))
    })?;
    let images: Vec<Vec<f64>> = seeds.iter().map(|(_, v)| v.clone()).collect();
    let image_box = CoordBox::bounding(&images).ok_or_else(|| {
        Error::Inversion(format!("image of {} is flat along some axis", map.name))
    })?;
    let seeds = Arc::new(seeds);
    let eps = slack(&map.domain);
    let preimage = |q: &[f64]| -> Option<Vec<f64>> {
        let x = match &map.declared_inverse {
            Some(inv) => {
                if !inv.domain.contains(q, slack(&inv.domain)) {
                    return None;
                }
                inv.eval_raw(q).ok()?
            }
            None => newton(map, &seeds, q)?,
        };
        map.domain.contains(&x, eps).then_some(x)
    };
    let domain = shrink_domain(&image_box, k, |q| preimage(q).is_some()).ok_or_else(|| {
        Error::Inversion(format!(
            "no lattice point of the image of {} has a preimage",
            map.name
        ))
    })?;
    let check = SampleGrid::new(&domain, k)?;
    for q in check.points() {
        let x = preimage(q)
            .ok_or_else(|| Error::Inversion(format!("no preimage of {q:?} under {}", map.name)))?;
        if map.declared_inverse.is_some() {
            let back = map.eval_raw(&x)?;
            let err = max_diff(&back, q);
            if err > tols.roundtrip {
                return Err(Error::Inversion(format!(
                    "declared inverse of {} fails the round trip at {q:?} (residual {err:e})",
                    map.name
                )));
            }
        }
    }
    let repr = match &map.declared_inverse {
        Some(inv) => inv.repr.clone(),
        None => Repr::Inverse {
            forward: map.clone(),
            seeds,
        },
    };
    Ok(LocalMap {
        name: format!("inv({})", map.name),
        domain,
        repr,
        provenance: Provenance::Inverted,
        depth: map.depth,
        declared_inverse: Some(map.clone()),
    })
}

/// Max-norm distance between two maps on a lattice of their common domain,
/// or `None` when the domains differ or evaluation fails.
pub fn map_distance(a: &LocalMap, b: &LocalMap, k: usize) -> Option<f64> {
    if a.dim() != b.dim() || !a.domain.approx_eq(&b.domain, 1e-9 * a.domain.diameter()) {
        return None;
    }
    let grid = SampleGrid::new(&a.domain, k).ok()?;
    let per_point = par::map_range(grid.len(), |i| {
        let p = grid.point(i);
        match (a.eval_raw(p), b.eval_raw(p)) {
            (Ok(x), Ok(y)) => Some(max_diff(&x, &y)),
            _ => None,
        }
    });
    per_point
        .into_iter()
        .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
}

/// Equal as pseudogroup elements: same domain and lattice agreement within
/// `dedup_rel * diameter`.
pub fn maps_agree(a: &LocalMap, b: &LocalMap, k: usize, tols: &Tolerances) -> bool {
    map_distance(a, b, k).is_some_and(|d| d <= tols.dedup_rel * a.domain.diameter())
}

/// A gluing test for axiom (4).
#[derive(Debug, Clone)]
pub struct GlueTest {
    pub map: Arc<LocalMap>,
    pub cover: Vec<CoordBox>,
}

#[derive(Debug, Clone)]
pub struct PseudogroupFamily {
    pub members: Vec<Arc<LocalMap>>,
    /// Bound on the word depth of composites.
    pub depth: usize,
    pub restriction_targets: Vec<CoordBox>,
    pub glue_tests: Vec<GlueTest>,
    /// Failures recorded while generating, one line each.
    pub errors: Vec<String>,
}

impl PseudogroupFamily {
    pub fn new(members: Vec<LocalMap>, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("family depth must be at least 1".into()));
        }
        let dim = members
            .first()
            .map(LocalMap::dim)
            .ok_or_else(|| Error::Config("family has no members".into()))?;
        let mut names = HashSet::new();
        for m in &members {
            if m.dim() != dim {
                return Err(Error::Dimension(format!(
                    "member {} has dimension {}",
                    m.name,
                    m.dim()
                )));
            }
            if !names.insert(m.name.clone()) {
                return Err(Error::Config(format!("duplicate member name {}", m.name)));
            }
        }
        Ok(PseudogroupFamily {
            members: members.into_iter().map(Arc::new).collect(),
            depth,
            restriction_targets: Vec::new(),
            glue_tests: Vec::new(),
            errors: Vec::new(),
        })
    }

    pub fn with_restriction_targets(mut self, targets: Vec<CoordBox>) -> Self {
        self.restriction_targets = targets;
        self
    }

    pub fn with_glue_tests(mut self, tests: Vec<GlueTest>) -> Self {
        self.glue_tests = tests;
        self
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<LocalMap>> {
        self.members.iter().find(|m| m.name == name)
    }

    /// First member equal to `map`.
    pub fn find(&self, map: &LocalMap, k: usize, tols: &Tolerances) -> Option<&Arc<LocalMap>> {
        self.members.iter().find(|m| maps_agree(m, map, k, tols))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Close under inversion.
    pub invert: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { invert: true }
    }
}

fn target_label(i: usize) -> String {
    format!("R{}", i + 1)
}

fn identity_on(m: &LocalMap) -> LocalMap {
    LocalMap::identity(m.domain.clone())
        .renamed(format!("id[{}]", m.name))
        .with_depth(m.depth)
}

/// Bounded-depth closure: inverses (optional), restrictions to the declared
/// targets, identities on every source, and composites whose depths add up
/// to at most `family.depth`, iterated to a fixpoint. Members equal to an
/// earlier one are dropped. The result is ordered by (depth, name).
pub fn generate(
    family: &PseudogroupFamily,
    k: usize,
    tols: &Tolerances,
    opts: GenerateOptions,
) -> Result<PseudogroupFamily> {
    let mut members: Vec<Arc<LocalMap>> = family.members.clone();
    let mut errors = family.errors.clone();
    let mut inverted = HashSet::new();
    let mut restricted = HashSet::new();
    let mut identified = HashSet::new();
    let mut tried = HashSet::new();
    let add = |members: &mut Vec<Arc<LocalMap>>, m: LocalMap| {
        if !members.iter().any(|x| maps_agree(x, &m, k, tols)) {
            members.push(Arc::new(m));
        }
    };
    loop {
        let before = members.len();
        let mut i = 0;
        while i < members.len() {
            let m = members[i].clone();
            if opts.invert && inverted.insert(i) {
                match invert(&m, k, tols) {
                    Ok(inv) => add(&mut members, inv),
                    Err(e) => errors.push(format!("invert {}: {e}", m.name)),
                }
            }
            for (t, target) in family.restriction_targets.iter().enumerate() {
                if restricted.insert((i, t))
                    && m.domain.contains_box(target, slack(&m.domain))
                    && !m.domain.approx_eq(target, 1e-9 * m.domain.diameter())
                {
                    add(&mut members, m.restrict(target, &target_label(t))?);
                }
            }
            if identified.insert(i) {
                add(&mut members, identity_on(&m));
            }
            i += 1;
        }
        let n = members.len();
        for o in 0..n {
            for inner in 0..n {
                if members[o].depth + members[inner].depth > family.depth
                    || !tried.insert((o, inner))
                {
                    continue;
                }
                match compose(&members[o], &members[inner], k) {
                    Ok(c) => add(&mut members, c),
                    Err(Error::Composition(_)) => {}
                    Err(e) => errors.push(format!(
                        "compose {} with {}: {e}",
                        members[o].name, members[inner].name
                    )),
                }
            }
        }
        if members.len() == before {
            break;
        }
    }
    members.sort_by(|a, b| a.depth.cmp(&b.depth).then_with(|| a.name.cmp(&b.name)));
    Ok(PseudogroupFamily {
        members,
        depth: family.depth,
        restriction_targets: family.restriction_targets.clone(),
        glue_tests: family.glue_tests.clone(),
        errors,
    })
}

/// Outcome of one axiom.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomOutcome {
    pub index: usize,
    pub checked: usize,
    pub failures: Vec<String>,
}

impl AxiomOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    /// Axioms (1) to (5) in order.
    pub axioms: Vec<AxiomOutcome>,
}

impl AxiomReport {
    /// Whether axiom `index` (1-based) holds.
    pub fn axiom_passed(&self, index: usize) -> bool {
        self.axioms[index - 1].passed()
    }

    pub fn passed(&self) -> bool {
        self.axioms.iter().all(AxiomOutcome::passed)
    }

    pub fn report(&self) -> Report {
        let mut r = Report::new("axioms");
        r.tolerance("allowed_failures", 0.0);
        for a in &self.axioms {
            let failures = format!("axiom{}_failures", a.index);
            r.metric(format!("axiom{}_checked", a.index), a.checked as f64)
                .metric(failures.clone(), a.failures.len() as f64)
                .require(&failures, Cmp::Le, "allowed_failures");
            for f in &a.failures {
                r.note(format!("axiom {}: {f}", a.index));
            }
        }
        r.note(
            "axioms 3 and 4 are checked on the declared restriction targets and glue tests only",
        );
        r.finish()
    }
}

/// Checks the five pseudogroup axioms on a family. Composites are checked
/// for pairs whose depths add up to at most `family.depth`.
pub fn validate_axioms(family: &PseudogroupFamily, k: usize, tols: &Tolerances) -> AxiomReport {
    let members = &family.members;
    let has = |m: &LocalMap| family.find(m, k, tols).is_some();

    let mut a1 = AxiomOutcome {
        index: 1,
        checked: 0,
        failures: Vec::new(),
    };
    for o in members {
        for i in members {
            if o.depth + i.depth > family.depth {
                continue;
            }
            if let Ok(c) = compose(o, i, k) {
                a1.checked += 1;
                if !has(&c) {
                    a1.failures
                        .push(format!("composite {} is not a member", c.name));
                }
            }
        }
    }

    let mut a2 = AxiomOutcome {
        index: 2,
        checked: 0,
        failures: Vec::new(),
    };
    for m in members {
        a2.checked += 1;
        match invert(m, k, tols) {
            Ok(inv) if has(&inv) => {}
            Ok(_) => a2
                .failures
                .push(format!("inverse of {} is not a member", m.name)),
            Err(e) => a2.failures.push(format!("{} has no inverse: {e}", m.name)),
        }
    }

    let mut a3 = AxiomOutcome {
        index: 3,
        checked: 0,
        failures: Vec::new(),
    };
    for m in members {
        for (t, target) in family.restriction_targets.iter().enumerate() {
            if !m.domain.contains_box(target, slack(&m.domain)) {
                continue;
            }
            a3.checked += 1;
            match m.restrict(target, &target_label(t)) {
                Ok(r) if has(&r) => {}
                _ => a3.failures.push(format!(
                    "restriction of {} to {} is not a member",
                    m.name,
                    target_label(t)
                )),
            }
        }
    }

    let mut a4 = AxiomOutcome {
        index: 4,
        checked: 0,
        failures: Vec::new(),
    };
    for (g, test) in family.glue_tests.iter().enumerate() {
        let pieces_present = test.cover.iter().enumerate().all(|(c, bx)| {
            test.map
                .restrict(bx, &format!("G{}.{}", g + 1, c + 1))
                .is_ok_and(|r| has(&r))
        });
        if pieces_present {
            a4.checked += 1;
            if !has(&test.map) {
                a4.failures.push(format!(
                    "{} glues from members but is not a member",
                    test.map.name
                ));
            }
        }
    }

    let mut a5 = AxiomOutcome {
        index: 5,
        checked: 0,
        failures: Vec::new(),
    };
    for m in members {
        a5.checked += 1;
        if !has(&identity_on(m)) {
            a5.failures.push(format!(
                "identity on the source of {} is not a member",
                m.name
            ));
        }
    }
    AxiomReport {
        axioms: vec![a1, a2, a3, a4, a5],
    }
}

/// Max over the lattice of `|D map(p) J(p) - J(map(p)) D map(p)|_max`.
/// Lattice points where `p` or `map(p)` leave the structure box are
/// skipped and counted.
pub fn check_ah_map(acs: &AcStructure, map: &LocalMap, k: usize, tol: f64) -> Result<Report> {
    let grid = SampleGrid::new(map.domain(), k)?;
    let eps = slack(acs.bx());
    let per_point = par::try_map_range(grid.len(), |i| {
        let p = grid.point(i);
        if !acs.bx().contains(p, eps) {
            return Ok(None);
        }
        let q = map.eval_raw(p)?;
        if !acs.bx().contains(&q, eps) {
            return Ok(None);
        }
        let dphi = map.jacobian_raw(p)?;
        let lhs = &dphi * acs.matrix_at(p);
        let rhs = acs.matrix_at(&q) * &dphi;
        Ok(Some(linalg::max_abs(&(lhs - rhs))))
    })?;
    let used = per_point.iter().flatten().count();
    if used == 0 {
        return Err(Error::Domain(format!(
            "no lattice point of {} stays inside the structure box",
            map.name
        )));
    }
    let metric = per_point.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let mut r = Report::new("ah_map");
    r.metric("commutator_max", metric)
        .metric("skipped_points", (grid.len() - used) as f64)
        .metric("grid_points", grid.len() as f64)
        .tolerance("ah_map", tol)
        .require("commutator_max", Cmp::Le, "ah_map");
    Ok(r.finish())
}

/// `f_dst o phi = psi o f_src`, with `psi` a polynomial map of `C^m` in
/// the variables `w1..wm`.
#[derive(Debug, Clone)]
pub struct OverDiagram {
    pub phi: Arc<LocalMap>,
    pub src: SpencerChart,
    pub dst: SpencerChart,
    pub psi: Vec<Poly>,
}

impl OverDiagram {
    /// The diagram with `psi` the identity of `C^m`.
    pub fn with_identity(phi: Arc<LocalMap>, src: SpencerChart, dst: SpencerChart) -> Self {
        let m = src.m();
        OverDiagram {
            phi,
            src,
            dst,
            psi: (0..m).map(|j| Poly::var(m, j)).collect(),
        }
    }
}

/// Max over a lattice of `dom(phi) ∩ U_src` of
/// `|f_dst(phi(p)) - psi(f_src(p))|`. Points with `phi(p)` outside the
/// target chart are skipped; more than 20% of them is a domain error.
pub fn check_over_diagram(diag: &OverDiagram, k: usize, tol: f64) -> Result<Report> {
    let m = diag.src.m();
    if diag.dst.m() != m || diag.psi.len() != m || diag.psi.iter().any(|c| c.nvars() != m) {
        return Err(Error::Dimension(format!(
            "diagram mixes Spencer dimensions: src {m}, dst {}, psi {}",
            diag.dst.m(),
            diag.psi.len()
        )));
    }
    let domain = diag
        .phi
        .domain()
        .intersect(diag.src.bx())
        .ok_or_else(|| Error::Overlap("map domain misses the source chart".into()))?;
    let grid = SampleGrid::new(&domain, k)?;
    let eps = slack(diag.dst.bx());
    let per_point = par::try_map_range(grid.len(), |i| {
        let p = grid.point(i);
        let q = diag.phi.eval_raw(p)?;
        if !diag.dst.bx().contains(&q, eps) {
            return Ok(None);
        }
        let up = diag.dst.project_point(&q);
        let w = diag.src.project_point(p);
        let down: Vec<Complex64> = diag.psi.iter().map(|c| c.eval_complex(&w)).collect();
        Ok(Some(
            up.iter()
                .zip(&down)
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm())),
        ))
    })?;
    let violations = per_point.iter().filter(|v| v.is_none()).count();
    if violations * 5 > grid.len() {
        return Err(Error::Domain(format!(
            "{violations} of {} lattice points leave the target chart",
            grid.len()
        )));
    }
    let metric = per_point
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(*v));
    let mut r = Report::new("over_diagram");
    r.metric("diagram_residual", metric)
        .metric("domain_violations", violations as f64)
        .metric("grid_points", grid.len() as f64)
        .tolerance("diagram", tol)
        .require("diagram_residual", Cmp::Le, "diagram");
    Ok(r.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(name: &str, bx: CoordBox, scale: f64, shift: &[f64]) -> LocalMap {
        let d = bx.dim();
        let comps = (0..d)
            .map(|i| Poly::var(d, i) * scale + Poly::constant(d, shift[i]))
            .collect();
        LocalMap::new(name, bx, comps).unwrap()
    }

    fn square(bx: CoordBox) -> LocalMap {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let u = &x * &x - &y * &y;
        let v = &x * &y * 2.0;
        LocalMap::new("sq", bx, vec![u, v]).unwrap()
    }

    #[test]
    fn translations_compose_with_shrunk_domain() {
        let bx = CoordBox::cube(1, -1.0, 1.0).unwrap();
        let t = Arc::new(affine("t", bx, 1.0, &[0.25, 0.0]));
        let tt = compose(&t, &t, 5).unwrap();
        assert!(tt.is_symbolic());
        assert!(
            (tt.domain().hi()[0] - 0.75).abs() < 1e-11,
            "{:?}",
            tt.domain()
        );
        assert_eq!(tt.domain().lo(), &[-1.0, -1.0]);
        assert_eq!(tt.eval(&[0.0, 0.5]).unwrap(), vec![0.5, 0.5]);

        let far = Arc::new(affine(
            "far",
            CoordBox::cube(1, -1.0, 1.0).unwrap(),
            1.0,
            &[5.0, 0.0],
        ));
        assert!(matches!(compose(&t, &far, 5), Err(Error::Composition(_))));
    }

    #[test]
    fn square_composes_to_fourth_power() {
        let bx = CoordBox::new(vec![0.5, 0.1], vec![1.0, 0.3]).unwrap();
        let sq = Arc::new(square(CoordBox::cube(1, -2.0, 2.0).unwrap()));
        let inner = Arc::new(square(bx));
        let c = compose(&sq, &inner, 5).unwrap();
        let z = Poly::complex_coordinate(2, 0);
        let (u, v) = z.pow(4).re_im();
        assert_eq!(c.components().unwrap(), &[u, v]);
    }

    #[test]
    fn inverses() {
        let tols = Tolerances::default();
        let bx = CoordBox::cube(1, -1.0, 1.0).unwrap();
        let t = Arc::new(affine("t", bx.clone(), 1.0, &[0.25, 0.0]));
        let inv = invert(&t, 5, &tols).unwrap();
        assert!((inv.domain().lo()[0] + 0.75).abs() < 1e-12);
        let q = [0.5, 0.5];
        assert!(max_diff(&inv.eval(&q).unwrap(), &[0.25, 0.5]) < 1e-14);
        let back = invert(&Arc::new(inv), 5, &tols).unwrap();
        assert!(maps_agree(&back, &t, 5, &tols));

        let s = Arc::new(affine("s", bx.clone(), 2.0, &[0.0, 0.0]));
        let half = invert(&s, 5, &tols).unwrap();
        assert!((half.domain().hi()[0] - 2.0).abs() < 1e-12);
        assert!(max_diff(&half.eval(&[1.0, -0.5]).unwrap(), &[0.5, -0.25]) < 1e-14);

        let sq = Arc::new(square(bx));
        assert!(matches!(invert(&sq, 5, &tols), Err(Error::Inversion(_))));
    }

    #[test]
    fn declared_inverse_is_validated() {
        let tols = Tolerances::default();
        let bx = CoordBox::cube(1, -1.0, 1.0).unwrap();
        let good = affine("s", bx.clone(), 2.0, &[0.0, 0.0])
            .with_declared_inverse(affine(
                "h",
                CoordBox::cube(1, -2.0, 2.0).unwrap(),
                0.5,
                &[0.0, 0.0],
            ))
            .unwrap();
        let inv = invert(&Arc::new(good), 5, &tols).unwrap();
        assert!(inv.is_symbolic());
        let bad = affine("s", bx, 2.0, &[0.0, 0.0])
            .with_declared_inverse(affine(
                "h",
                CoordBox::cube(1, -2.0, 2.0).unwrap(),
                0.4,
                &[0.0, 0.0],
            ))
            .unwrap();
        assert!(invert(&Arc::new(bad), 5, &tols).is_err());
    }

    #[test]
    fn closure_of_a_translation() {
        let tols = Tolerances::default();
        let bx = CoordBox::cube(1, -1.0, 1.0).unwrap();
        let fam = PseudogroupFamily::new(vec![affine("t", bx, 1.0, &[0.25, 0.0])], 2).unwrap();
        let gen = generate(&fam, 3, &tols, GenerateOptions::default()).unwrap();
        let probe = |shift: f64| {
            gen.members.iter().any(|m| {
                m.eval_raw(&m.domain().center())
                    .map(|v| (v[0] - m.domain().center()[0] - shift).abs() < 1e-12)
                    .unwrap_or(false)
            })
        };
        for shift in [0.0, 0.25, -0.25, 0.5, -0.5] {
            assert!(probe(shift), "missing shift {shift}");
        }
        let report = validate_axioms(&gen, 3, &tols);
        assert!(report.passed(), "{:?}", report);
        assert!(!validate_axioms(&fam, 3, &tols).axiom_passed(2));
        assert!(!validate_axioms(&fam, 3, &tols).axiom_passed(5));
    }

    #[test]
    fn almost_holomorphic_maps() {
        let acs = AcStructure::standard(CoordBox::cube(1, -1.0, 1.0).unwrap());
        let sub = CoordBox::new(vec![0.2, 0.1], vec![0.6, 0.5]).unwrap();
        let r = check_ah_map(&acs, &square(sub.clone()), 5, 1e-12).unwrap();
        assert!(r.passed());
        let conj =
            LocalMap::new("c", sub.clone(), vec![Poly::var(2, 0), -Poly::var(2, 1)]).unwrap();
        let r = check_ah_map(&acs, &conj, 5, 1e-12).unwrap();
        assert_eq!(r.get("commutator_max"), Some(2.0));
        assert!(!r.passed());
        let r = check_ah_map(&acs, &LocalMap::identity(sub), 5, 0.0).unwrap();
        assert!(r.passed());
    }
}
