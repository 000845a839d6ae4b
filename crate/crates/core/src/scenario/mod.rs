//! Scenario documents: a single JSON file declaring a structure `J` on a
//! box, named functions, maps, charts and pseudogroup families, and an
//! ordered list of tasks to run against them.

mod builtins;
mod emit;
mod run;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{Limits, Tolerances};
use crate::crsolve::ScalarField;
use crate::error::{Error, Result};
use crate::jfield::AcStructure;
use crate::poly::{Monomial, Poly, VarNames};
use crate::pseudogroup::LocalMap;
use crate::region::CoordBox;

pub use builtins::{builtin, builtin_names};
pub use emit::{emit_json, emit_text};
pub use run::{run, RunOptions, RunResult, TaskOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDecl {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDecl {
    /// One real polynomial per coordinate.
    pub components: Vec<String>,
    /// Defaults to the scenario box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<BoxDecl>,
    /// Name of another map declared as the inverse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDecl {
    /// Names of the almost holomorphic coordinates.
    pub functions: Vec<String>,
    /// Defaults to the scenario box.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bx: Option<BoxDecl>,
    /// Skip certification; for negative tests.
    #[serde(default, skip_serializing_if = "is_false")]
    pub unchecked: bool,
    /// Passive complex coordinate pairs (1-based) of an unchecked chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passive: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueDecl {
    pub map: String,
    pub cover: Vec<BoxDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDecl {
    pub members: Vec<String>,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub restrictions: Vec<BoxDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub glue_tests: Vec<GlueDecl>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_degree: Option<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

impl Expect {
    pub fn as_str(self) -> &'static str {
        match self {
            Expect::Pass => "pass",
            Expect::Fail => "fail",
        }
    }
}

/// Right-hand map of an over-diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Downstairs {
    /// `"identity"` or `"transition"` (fitted from the two charts).
    Named(String),
    /// Polynomials in `w1..wm`.
    Components { components: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskKind {
    CheckAcs,
    SplitType,
    Integrability,
    CrCheck {
        function: String,
    },
    Solve {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degree: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_dim: Option<usize>,
    },
    Independence {
        functions: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_rank: Option<usize>,
    },
    SpencerType {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degree: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_m: Option<usize>,
    },
    Chart {
        chart: String,
    },
    Factorize {
        chart: String,
        function: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit_degree: Option<u32>,
    },
    Transition {
        from: String,
        to: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit_degree: Option<u32>,
    },
    Cocycle {
        charts: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit_degree: Option<u32>,
    },
    AhMap {
        map: String,
    },
    Axioms {
        family: String,
        /// Close under inversion while generating (default true).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        invert: Option<bool>,
        /// Validate the family as declared instead of its closure.
        #[serde(default, skip_serializing_if = "is_false")]
        no_closure: bool,
    },
    OverDiagram {
        map: String,
        from: String,
        to: String,
        downstairs: Downstairs,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit_degree: Option<u32>,
    },
    Invert {
        map: String,
    },
    Compose {
        outer: String,
        inner: String,
    },
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::CheckAcs => "check_acs",
            TaskKind::SplitType => "split_type",
            TaskKind::Integrability => "integrability",
            TaskKind::CrCheck { .. } => "cr_check",
            TaskKind::Solve { .. } => "solve",
            TaskKind::Independence { .. } => "independence",
            TaskKind::SpencerType { .. } => "spencer_type",
            TaskKind::Chart { .. } => "chart",
            TaskKind::Factorize { .. } => "factorize",
            TaskKind::Transition { .. } => "transition",
            TaskKind::Cocycle { .. } => "cocycle",
            TaskKind::AhMap { .. } => "ah_map",
            TaskKind::Axioms { .. } => "axioms",
            TaskKind::OverDiagram { .. } => "over_diagram",
            TaskKind::Invert { .. } => "invert",
            TaskKind::Compose { .. } => "compose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDecl {
    #[serde(flatten)]
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub expect: Expect,
    /// Points per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

impl TaskDecl {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.name())
    }
}

/// The document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    pub n: usize,
    #[serde(rename = "box")]
    pub bx: BoxDecl,
    #[serde(rename = "J")]
    pub j: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub functions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub maps: BTreeMap<String, MapDecl>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub charts: BTreeMap<String, ChartDecl>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub families: BTreeMap<String, FamilyDecl>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub tasks: Vec<TaskDecl>,
}

/// A validated scenario with its structure, functions and maps compiled.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub acs: Arc<AcStructure>,
    pub functions: BTreeMap<String, ScalarField>,
    pub maps: BTreeMap<String, Arc<LocalMap>>,
    /// Defaults with the scenario settings applied.
    pub tolerances: Tolerances,
}

fn context(err: Error, what: &str) -> Error {
    match err {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{what}, {location}"),
            message,
        },
        Error::Dimension(m) => Error::Dimension(format!("{what}: {m}")),
        Error::UnknownReference(m) => Error::UnknownReference(format!("{what}: {m}")),
        Error::Config(m) => Error::Config(format!("{what}: {m}")),
        other => other,
    }
}

fn resolve<'a, T>(map: &'a BTreeMap<String, T>, name: &str, kind: &str) -> Result<&'a T> {
    map.get(name)
        .ok_or_else(|| Error::UnknownReference(format!("{kind} `{name}`")))
}

impl BoxDecl {
    pub fn to_box(&self, n: usize) -> Result<CoordBox> {
        if self.lo.len() != 2 * n || self.hi.len() != 2 * n {
            return Err(Error::Dimension(format!(
                "box bounds must have {} entries, got {} and {}",
                2 * n,
                self.lo.len(),
                self.hi.len()
            )));
        }
        CoordBox::new(self.lo.clone(), self.hi.clone())
    }

    pub fn from_box(bx: &CoordBox) -> Self {
        BoxDecl {
            lo: bx.lo().to_vec(),
            hi: bx.hi().to_vec(),
        }
    }
}

/// Parses polynomials in `w1..wm` (no conjugates) into `m` variables.
pub fn parse_holomorphic(text: &str, m: usize) -> Result<Poly> {
    let p = Poly::parse_with(text, &VarNames::Complex(m))?;
    let mut out = Poly::zero(m);
    for (mono, c) in p.terms() {
        if mono.0[m..].iter().any(|&e| e > 0) {
            return Err(Error::Parse {
                location: "downstairs map".into(),
                message: "conjugate variables are not allowed here".into(),
            });
        }
        out.add_term(Monomial(mono.0[..m].to_vec()), *c);
    }
    Ok(out)
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn parse(text: &str) -> Result<Scenario> {
        let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        Self::compile(doc)
    }

    pub fn compile(doc: ScenarioDoc) -> Result<Scenario> {
        let limits = Limits::default();
        let n = doc.n;
        if n == 0 || n > limits.max_complex_dim {
            return Err(Error::Dimension(format!(
                "n = {n} is outside 1..={}",
                limits.max_complex_dim
            )));
        }
        let bx = doc.bx.to_box(n).map_err(|e| context(e, "box"))?;
        let dim = 2 * n;
        if doc.j.len() != dim || doc.j.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension(format!(
                "J must be a {dim}x{dim} array of strings"
            )));
        }
        let mut rows = Vec::with_capacity(dim);
        for (i, row) in doc.j.iter().enumerate() {
            let mut r = Vec::with_capacity(dim);
            for (k, text) in row.iter().enumerate() {
                let what = format!("J[{}][{}]", i + 1, k + 1);
                r.push(Poly::parse(text, dim).map_err(|e| context(e, &what))?);
            }
            rows.push(r);
        }
        let acs = Arc::new(AcStructure::new(bx.clone(), rows).map_err(|e| context(e, "J"))?);

        let mut functions = BTreeMap::new();
        for (name, text) in &doc.functions {
            let what = format!("function `{name}`");
            let f = ScalarField::parse(text, bx.clone()).map_err(|e| context(e, &what))?;
            functions.insert(name.clone(), f);
        }

        let mut plain = BTreeMap::new();
        for (name, decl) in &doc.maps {
            let what = format!("map `{name}`");
            let domain = match &decl.domain {
                Some(b) => b.to_box(n),
                None => Ok(bx.clone()),
            }
            .map_err(|e| context(e, &what))?;
            let comps = decl
                .components
                .iter()
                .map(|t| Poly::parse(t, dim))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| context(e, &what))?;
            let map = LocalMap::new(name.clone(), domain, comps).map_err(|e| context(e, &what))?;
            plain.insert(name.clone(), map);
        }
        let mut maps = BTreeMap::new();
        for (name, decl) in &doc.maps {
            let mut map = plain[name].clone();
            if let Some(inv) = &decl.inverse {
                let what = format!("map `{name}`");
                let inverse = resolve(&plain, inv, "map").map_err(|e| context(e, &what))?;
                map = map.with_declared_inverse(inverse.clone())?;
            }
            maps.insert(name.clone(), Arc::new(map));
        }

        for (name, chart) in &doc.charts {
            let what = format!("chart `{name}`");
            if chart.functions.is_empty() || chart.functions.len() > n {
                return Err(Error::Dimension(format!("{what}: needs 1..={n} functions")));
            }
            for f in &chart.functions {
                resolve(&functions, f, "function").map_err(|e| context(e, &what))?;
            }
            if let Some(b) = &chart.bx {
                b.to_box(n).map_err(|e| context(e, &what))?;
            }
            if let Some(p) = &chart.passive {
                if p.iter().any(|&j| j == 0 || j > n) || p.len() + chart.functions.len() != n {
                    return Err(Error::Dimension(format!("{what}: bad passive pairs {p:?}")));
                }
            }
        }
        for (name, fam) in &doc.families {
            let what = format!("family `{name}`");
            if fam.members.is_empty() {
                return Err(Error::Config(format!("{what}: no members")));
            }
            for m in &fam.members {
                resolve(&maps, m, "map").map_err(|e| context(e, &what))?;
            }
            for b in &fam.restrictions {
                b.to_box(n).map_err(|e| context(e, &what))?;
            }
            for g in &fam.glue_tests {
                resolve(&maps, &g.map, "map").map_err(|e| context(e, &what))?;
                for b in &g.cover {
                    b.to_box(n).map_err(|e| context(e, &what))?;
                }
            }
        }

        let mut tolerances = Tolerances::default();
        for (k, v) in &doc.settings.tolerances {
            tolerances.set(k, *v).map_err(|e| context(e, "settings"))?;
        }
        for (i, task) in doc.tasks.iter().enumerate() {
            let what = format!("task {} ({})", i + 1, task.label());
            check_task(&doc, &functions, &maps, task).map_err(|e| context(e, &what))?;
            let mut t = tolerances.clone();
            for (k, v) in &task.tolerances {
                t.set(k, *v).map_err(|e| context(e, &what))?;
            }
        }
        Ok(Scenario {
            doc,
            acs,
            functions,
            maps,
            tolerances,
        })
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    /// The document with every polynomial re-printed canonically.
    pub fn canonical(&self) -> ScenarioDoc {
        let dim = 2 * self.doc.n;
        let reprint = |t: &str| {
            Poly::parse(t, dim)
                .map(|p| p.to_string())
                .unwrap_or_else(|_| t.to_string())
        };
        let mut doc = self.doc.clone();
        for row in doc.j.iter_mut() {
            for e in row.iter_mut() {
                *e = reprint(e);
            }
        }
        for f in doc.functions.values_mut() {
            *f = reprint(f);
        }
        for m in doc.maps.values_mut() {
            for c in m.components.iter_mut() {
                *c = reprint(c);
            }
        }
        for task in doc.tasks.iter_mut() {
            if let TaskKind::OverDiagram {
                from,
                downstairs: Downstairs::Components { components },
                ..
            } = &mut task.kind
            {
                let m = self
                    .doc
                    .charts
                    .get(from.as_str())
                    .map_or(0, |c| c.functions.len());
                for c in components.iter_mut() {
                    if let Ok(p) = parse_holomorphic(c, m) {
                        *c = p.to_string_with(&VarNames::Complex(m));
                    }
                }
            }
        }
        doc
    }

    /// Canonical JSON text of the scenario.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.canonical()).expect("scenario serialises")
    }
}

fn check_task(
    doc: &ScenarioDoc,
    functions: &BTreeMap<String, ScalarField>,
    maps: &BTreeMap<String, Arc<LocalMap>>,
    task: &TaskDecl,
) -> Result<()> {
    let chart = |name: &str| resolve(&doc.charts, name, "chart");
    let map = |name: &str| resolve(maps, name, "map");
    let function = |name: &str| resolve(functions, name, "function");
    match &task.kind {
        TaskKind::CheckAcs | TaskKind::SplitType | TaskKind::Integrability => {}
        TaskKind::CrCheck { function: f } => {
            function(f)?;
        }
        TaskKind::Solve { .. } | TaskKind::SpencerType { .. } => {}
        TaskKind::Independence { functions: fs, .. } => {
            if fs.is_empty() {
                return Err(Error::Config(
                    "independence needs at least one function".into(),
                ));
            }
            for f in fs {
                function(f)?;
            }
        }
        TaskKind::Chart { chart: c } => {
            chart(c)?;
        }
        TaskKind::Factorize {
            chart: c,
            function: f,
            ..
        } => {
            chart(c)?;
            function(f)?;
        }
        TaskKind::Transition { from, to, .. } => {
            same_m(chart(from)?, chart(to)?)?;
        }
        TaskKind::Cocycle { charts, .. } => {
            if charts.len() != 3 {
                return Err(Error::Dimension(format!(
                    "cocycle needs 3 charts, got {}",
                    charts.len()
                )));
            }
            let a = chart(&charts[0])?;
            same_m(a, chart(&charts[1])?)?;
            same_m(a, chart(&charts[2])?)?;
        }
        TaskKind::AhMap { map: m } | TaskKind::Invert { map: m } => {
            map(m)?;
        }
        TaskKind::Compose { outer, inner } => {
            map(outer)?;
            map(inner)?;
        }
        TaskKind::Axioms { family, .. } => {
            resolve(&doc.families, family, "family")?;
        }
        TaskKind::OverDiagram {
            map: m,
            from,
            to,
            downstairs,
            ..
        } => {
            map(m)?;
            let src = chart(from)?;
            same_m(src, chart(to)?)?;
            match downstairs {
                Downstairs::Named(s) if s == "identity" || s == "transition" => {}
                Downstairs::Named(s) => {
                    return Err(Error::UnknownReference(format!("downstairs map `{s}`")));
                }
                Downstairs::Components { components } => {
                    let m = src.functions.len();
                    if components.len() != m {
                        return Err(Error::Dimension(format!(
                            "downstairs map needs {m} components, got {}",
                            components.len()
                        )));
                    }
                    for c in components {
                        parse_holomorphic(c, m)?;
                    }
                }
            }
        }
    }
    if task.grid == Some(0) {
        return Err(Error::Config("grid must be positive".into()));
    }
    Ok(())
}

fn same_m(a: &ChartDecl, b: &ChartDecl) -> Result<()> {
    if a.functions.len() != b.functions.len() {
        return Err(Error::Dimension(format!(
            "charts have {} and {} almost holomorphic coordinates",
            a.functions.len(),
            b.functions.len()
        )));
    }
    Ok(())
}
