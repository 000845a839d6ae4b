//! Sequential task runner. Each task becomes one [`Report`]; task-level
//! errors are captured in the report rather than aborting the run.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{parse_holomorphic, ChartDecl, Downstairs, Expect, Scenario, TaskDecl, TaskKind};
use crate::charts::{self, build_spencer_chart, SpencerChart};
use crate::config::Tolerances;
use crate::crsolve::{self, default_points_per_axis, ScalarField};
use crate::error::{Error, Result};
use crate::pseudogroup::{self, GenerateOptions, GlueTest, OverDiagram, PseudogroupFamily};
use crate::region::SampleGrid;
use crate::report::{Cmp, Report, Status};

/// Overrides applied on top of the scenario, usually from the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub grid: Option<usize>,
    pub degree: Option<u32>,
    pub tolerances: BTreeMap<String, f64>,
    /// Run only tasks whose label or kind equals this name.
    pub task: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub label: String,
    pub kind: &'static str,
    pub expect: Expect,
    /// Raw outcome of the check.
    pub report: Report,
    /// Outcome after applying `expect`.
    pub status: Status,
    pub numerical_error: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub version: &'static str,
    /// Base tolerances of the run, before per-task overrides.
    pub tolerances: Tolerances,
    pub tasks: Vec<TaskOutcome>,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        self.tasks.iter().all(|t| t.status.is_pass())
    }

    pub fn overall(&self) -> Status {
        Status::from_bool(self.passed())
    }

    /// 0 on pass, 3 when a failing run saw a numerical error, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else if self.tasks.iter().any(|t| t.numerical_error) {
            3
        } else {
            1
        }
    }
}

const DEFAULT_GRID: usize = 7;
const DEFAULT_DEGREE: u32 = 3;
const DEFAULT_FIT_DEGREE: u32 = 3;

/// Runs the selected tasks in declaration order. Tolerance precedence is
/// defaults, scenario settings, task, then `opts`.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunResult> {
    let mut base = scenario.tolerances.clone();
    for (k, v) in &opts.tolerances {
        base.set(k, *v)?;
    }
    let mut tasks = Vec::new();
    for decl in &scenario.doc.tasks {
        if let Some(only) = &opts.task {
            if decl.label() != only && decl.kind.name() != only {
                continue;
            }
        }
        let mut tols = scenario.tolerances.clone();
        for (k, v) in &decl.tolerances {
            tols.set(k, *v)?;
        }
        for (k, v) in &opts.tolerances {
            tols.set(k, *v)?;
        }
        let ctx = Ctx {
            sc: scenario,
            decl,
            opts,
            tols: &tols,
        };
        let start = Instant::now();
        let result = ctx.execute();
        let elapsed = start.elapsed();
        let (report, numerical_error) = match result {
            Ok(r) => (r, false),
            Err(e) => (Report::from_error(decl.kind.name(), &e), e.is_numerical()),
        };
        let status = match decl.expect {
            Expect::Pass => report.status,
            Expect::Fail => Status::from_bool(!report.passed()),
        };
        tasks.push(TaskOutcome {
            label: decl.label().to_string(),
            kind: decl.kind.name(),
            expect: decl.expect,
            report,
            status,
            numerical_error,
            elapsed,
        });
    }
    Ok(RunResult {
        scenario: scenario.name().to_string(),
        version: crate::VERSION,
        tolerances: base,
        tasks,
    })
}

struct Ctx<'a> {
    sc: &'a Scenario,
    decl: &'a TaskDecl,
    opts: &'a RunOptions,
    tols: &'a Tolerances,
}

impl Ctx<'_> {
    fn grid_k(&self, default: usize) -> usize {
        self.opts
            .grid
            .or(self.decl.grid)
            .or(self.sc.doc.settings.grid)
            .unwrap_or(default)
    }

    fn degree(&self, task: Option<u32>) -> u32 {
        self.opts
            .degree
            .or(task)
            .or(self.sc.doc.settings.degree)
            .unwrap_or(DEFAULT_DEGREE)
    }

    fn fit_degree(&self, task: Option<u32>) -> u32 {
        task.or(self.sc.doc.settings.fit_degree)
            .unwrap_or(DEFAULT_FIT_DEGREE)
    }

    fn box_grid(&self, k: usize) -> Result<SampleGrid> {
        SampleGrid::new(self.sc.acs.bx(), k)
    }

    fn function(&self, name: &str) -> Result<&ScalarField> {
        self.sc
            .functions
            .get(name)
            .ok_or_else(|| Error::UnknownReference(format!("function `{name}`")))
    }

    fn map(&self, name: &str) -> Result<&Arc<pseudogroup::LocalMap>> {
        self.sc
            .maps
            .get(name)
            .ok_or_else(|| Error::UnknownReference(format!("map `{name}`")))
    }

    fn chart_decl(&self, name: &str) -> Result<&ChartDecl> {
        self.sc
            .doc
            .charts
            .get(name)
            .ok_or_else(|| Error::UnknownReference(format!("chart `{name}`")))
    }

    fn chart(&self, name: &str) -> Result<SpencerChart> {
        let decl = self.chart_decl(name)?;
        let n = self.sc.doc.n;
        let bx = match &decl.bx {
            Some(b) => b.to_box(n)?,
            None => self.sc.acs.bx().clone(),
        };
        let funcs = decl
            .functions
            .iter()
            .map(|f| self.function(f).cloned())
            .collect::<Result<Vec<_>>>()?;
        if decl.unchecked {
            let m = funcs.len();
            let passive = match &decl.passive {
                Some(p) => p.iter().map(|j| j - 1).collect(),
                None => (m..n).collect(),
            };
            return SpencerChart::unchecked(self.sc.acs.clone(), bx, funcs, passive);
        }
        let grid = SampleGrid::new(&bx, self.grid_k(DEFAULT_GRID))?;
        build_spencer_chart(self.sc.acs.clone(), funcs, &grid, self.tols)
    }

    fn family(&self, name: &str) -> Result<PseudogroupFamily> {
        let decl = self
            .sc
            .doc
            .families
            .get(name)
            .ok_or_else(|| Error::UnknownReference(format!("family `{name}`")))?;
        let n = self.sc.doc.n;
        let members = decl
            .members
            .iter()
            .map(|m| self.map(m).map(|a| a.as_ref().clone()))
            .collect::<Result<Vec<_>>>()?;
        let targets = decl
            .restrictions
            .iter()
            .map(|b| b.to_box(n))
            .collect::<Result<Vec<_>>>()?;
        let glue = decl
            .glue_tests
            .iter()
            .map(|g| {
                Ok(GlueTest {
                    map: self.map(&g.map)?.clone(),
                    cover: g.cover.iter().map(|b| b.to_box(n)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PseudogroupFamily::new(members, decl.depth)?
            .with_restriction_targets(targets)
            .with_glue_tests(glue))
    }

    fn execute(&self) -> Result<Report> {
        let tols = self.tols;
        match &self.decl.kind {
            TaskKind::CheckAcs => self
                .sc
                .acs
                .check_acs(&self.box_grid(self.grid_k(DEFAULT_GRID))?, tols.acs),
            TaskKind::SplitType => self.split_type(),
            TaskKind::Integrability => self.sc.acs.integrability_report(
                &self.box_grid(self.grid_k(DEFAULT_GRID))?,
                tols.integrability,
            ),
            TaskKind::CrCheck { function } => crsolve::cr_equations_check(
                &self.sc.acs,
                self.function(function)?,
                &self.box_grid(self.grid_k(DEFAULT_GRID))?,
                tols.cr,
            ),
            TaskKind::Solve { degree, expect_dim } => self.solve(*degree, *expect_dim),
            TaskKind::Independence {
                functions,
                expect_rank,
            } => self.independence(functions, *expect_rank),
            TaskKind::SpencerType { degree, expect_m } => {
                let d = self.degree(*degree);
                let grid = self.box_grid(self.grid_k(default_points_per_axis(d)))?;
                let est = crsolve::estimate_spencer_type(&self.sc.acs, &grid, d, tols)?;
                Ok(est.report(expect_m.unwrap_or(self.sc.doc.n)))
            }
            TaskKind::Chart { chart } => Ok(self.chart(chart)?.report()),
            TaskKind::Factorize {
                chart,
                function,
                fit_degree,
            } => {
                let c = self.chart(chart)?;
                let grid = SampleGrid::new(c.bx(), self.grid_k(DEFAULT_GRID))?;
                let f = charts::factorize(
                    &c,
                    self.function(function)?,
                    &grid,
                    self.fit_degree(*fit_degree),
                    tols,
                )?;
                Ok(f.report(tols))
            }
            TaskKind::Transition {
                from,
                to,
                fit_degree,
            } => {
                let t = charts::transition_map(
                    &self.chart(from)?,
                    &self.chart(to)?,
                    self.grid_k(DEFAULT_GRID),
                    self.fit_degree(*fit_degree),
                    tols,
                )?;
                Ok(t.report(tols))
            }
            TaskKind::Cocycle {
                charts: names,
                fit_degree,
            } => charts::cocycle_check(
                &self.chart(&names[0])?,
                &self.chart(&names[1])?,
                &self.chart(&names[2])?,
                self.grid_k(DEFAULT_GRID),
                self.fit_degree(*fit_degree),
                tols,
            ),
            TaskKind::AhMap { map } => pseudogroup::check_ah_map(
                &self.sc.acs,
                self.map(map)?,
                self.grid_k(DEFAULT_GRID),
                tols.ah_map,
            ),
            TaskKind::Axioms {
                family,
                invert,
                no_closure,
            } => {
                let k = self.grid_k(DEFAULT_GRID);
                let fam = self.family(family)?;
                let fam = if *no_closure {
                    fam
                } else {
                    let opts = GenerateOptions {
                        invert: invert.unwrap_or(true),
                    };
                    pseudogroup::generate(&fam, k, tols, opts)?
                };
                let mut r = pseudogroup::validate_axioms(&fam, k, tols).report();
                r.metric("family_size", fam.len() as f64);
                Ok(r)
            }
            TaskKind::OverDiagram {
                map,
                from,
                to,
                downstairs,
                fit_degree,
            } => {
                let k = self.grid_k(DEFAULT_GRID);
                let src = self.chart(from)?;
                let dst = self.chart(to)?;
                let m = src.m();
                let psi = match downstairs {
                    Downstairs::Named(s) if s == "identity" => {
                        (0..m).map(|j| crate::Poly::var(m, j)).collect()
                    }
                    Downstairs::Named(_) => {
                        charts::transition_map(&src, &dst, k, self.fit_degree(*fit_degree), tols)?
                            .phi
                    }
                    Downstairs::Components { components } => components
                        .iter()
                        .map(|c| parse_holomorphic(c, m))
                        .collect::<Result<Vec<_>>>()?,
                };
                let diag = OverDiagram {
                    phi: self.map(map)?.clone(),
                    src,
                    dst,
                    psi,
                };
                pseudogroup::check_over_diagram(&diag, k, tols.diagram)
            }
            TaskKind::Invert { map } => self.invert(map),
            TaskKind::Compose { outer, inner } => self.compose(outer, inner),
        }
    }

    fn split_type(&self) -> Result<Report> {
        let grid = self.box_grid(self.grid_k(DEFAULT_GRID))?;
        let n = self.sc.doc.n;
        let mut worst = 0.0f64;
        let mut bad = 0usize;
        for p in grid.points() {
            match self.sc.acs.split_type(p, self.tols.eigen) {
                Ok(s) => {
                    worst = worst.max(s.residual);
                    if s.holomorphic.len() != n || s.antiholomorphic.len() != n {
                        bad += 1;
                    }
                }
                Err(Error::DegenerateStructure { residual, .. }) => {
                    worst = worst.max(residual);
                    bad += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let mut r = Report::new("split_type");
        r.metric("eigen_residual", worst)
            .metric("degenerate_points", bad as f64)
            .metric("grid_points", grid.len() as f64)
            .tolerance("eigen", self.tols.eigen)
            .tolerance("allowed_degenerate", 0.0)
            .require("eigen_residual", Cmp::Le, "eigen")
            .require("degenerate_points", Cmp::Le, "allowed_degenerate");
        Ok(r.finish())
    }

    fn solve(&self, degree: Option<u32>, expect_dim: Option<usize>) -> Result<Report> {
        let d = self.degree(degree);
        let grid = self.box_grid(self.grid_k(default_points_per_axis(d)))?;
        let sol = crsolve::solve_ah_polynomials(&self.sc.acs, d, &grid, self.tols.svd_rel)?;
        let residual = sol
            .basis
            .iter()
            .map(|f| crsolve::cr_residual(&self.sc.acs, f, &grid))
            .try_fold(0.0f64, |m, r| r.map(|r| m.max(r)))?;
        let sigma_max = sol.singular_values.first().copied().unwrap_or(0.0);
        let mut r = Report::new("solve");
        r.metric("nullspace_dim", sol.nullspace_dim as f64)
            .metric("basis_size", sol.basis.len() as f64)
            .metric("ansatz_size", sol.monomials.len() as f64)
            .metric("degree", f64::from(d))
            .metric("points_per_axis", grid.points_per_axis() as f64)
            .metric("svd_threshold", sol.threshold_used)
            .metric("max_cr_residual", residual)
            .tolerance("svd_rel", self.tols.svd_rel)
            .tolerance(
                "residual_bound",
                10.0 * self.tols.svd_rel * sigma_max.max(1.0),
            )
            .require("max_cr_residual", Cmp::Le, "residual_bound");
        if let Some(e) = expect_dim {
            r.tolerance("expected_dim", e as f64)
                .require("basis_size", Cmp::Eq, "expected_dim");
        }
        for f in &sol.basis {
            r.note(format!("basis: {}", f.expr()));
        }
        Ok(r.finish())
    }

    fn independence(&self, names: &[String], expect_rank: Option<usize>) -> Result<Report> {
        let funcs = names
            .iter()
            .map(|f| self.function(f).cloned())
            .collect::<Result<Vec<_>>>()?;
        let grid = self.box_grid(self.grid_k(DEFAULT_GRID))?;
        let ev = crsolve::jacobian_rank(&funcs, &grid, self.tols.svd_rel)?;
        let mut r = Report::new("independence");
        r.metric("rank", ev.rank as f64)
            .metric("rank_drop_points", ev.rank_drop_points as f64)
            .metric(
                "sigma_min",
                ev.singular_values.last().copied().unwrap_or(0.0),
            )
            .tolerance("svd_rel", self.tols.svd_rel)
            .tolerance(
                "expected_rank",
                expect_rank.unwrap_or(2 * funcs.len()) as f64,
            )
            .require("rank", Cmp::Eq, "expected_rank");
        Ok(r.finish())
    }

    fn invert(&self, name: &str) -> Result<Report> {
        let k = self.grid_k(DEFAULT_GRID);
        let map = self.map(name)?;
        let inv = pseudogroup::invert(map, k, self.tols)?;
        let grid = SampleGrid::new(inv.domain(), k)?;
        let mut worst = 0.0f64;
        for q in grid.points() {
            let x = inv.eval(q)?;
            let back = map.eval(&x)?;
            for (a, b) in back.iter().zip(q) {
                worst = worst.max((a - b).abs());
            }
        }
        let mut r = Report::new("invert");
        r.metric("roundtrip_residual", worst)
            .metric("domain_diameter", inv.domain().diameter())
            .tolerance("roundtrip", self.tols.roundtrip)
            .require("roundtrip_residual", Cmp::Le, "roundtrip")
            .note(format!(
                "inverse domain lo {:?} hi {:?}",
                inv.domain().lo(),
                inv.domain().hi()
            ));
        Ok(r.finish())
    }

    fn compose(&self, outer: &str, inner: &str) -> Result<Report> {
        let k = self.grid_k(DEFAULT_GRID);
        let (o, i) = (self.map(outer)?, self.map(inner)?);
        let c = pseudogroup::compose(o, i, k)?;
        let grid = SampleGrid::new(c.domain(), k)?;
        let mut worst = 0.0f64;
        for p in grid.points() {
            let direct = o.eval(&i.eval(p)?)?;
            for (a, b) in c.eval(p)?.iter().zip(&direct) {
                worst = worst.max((a - b).abs());
            }
        }
        let mut r = Report::new("compose");
        r.metric("composition_residual", worst)
            .metric("domain_diameter", c.domain().diameter())
            .tolerance("roundtrip", self.tols.roundtrip)
            .require("composition_residual", Cmp::Le, "roundtrip")
            .note(format!(
                "composite domain lo {:?} hi {:?}",
                c.domain().lo(),
                c.domain().hi()
            ));
        Ok(r.finish())
    }
}
