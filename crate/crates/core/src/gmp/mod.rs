//! Generalized moment problems: several measures with semialgebraic supports,
//! linear moment constraints and a linear moment objective. Optional
//! dynamics add Liouville rows tying occupation, initial and terminal
//! measures together.

mod liouville;

pub use liouville::{test_degree, Cell, LiouvilleRow};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::moments::MomentVector;
use crate::poly::{rat_to_f64, PolyError, Polynomial, VarSpace};
use crate::relaxation::{
    Assembler, MomentRow, PopProblem, Relation, RelaxError, Relaxation, RelaxationInfo,
    SemialgebraicSet,
};
use crate::sdp::{Block, BlockKind, SdpSolution, SdpStatus, SolveOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmpError {
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("measure `{0}` is declared twice")]
    DuplicateMeasure(String),
    #[error("measure `{0}` has no variables")]
    NoVariables(String),
    #[error("{what} does not fit the variables of measure `{measure}`: {detail}")]
    Space {
        what: String,
        measure: String,
        detail: String,
    },
    #[error("dynamics: {0}")]
    Dynamics(String),
    #[error("fixed endpoint: {0}")]
    Dirac(String),
    #[error(
        "Liouville row for test monomial {0} has no moment terms but a nonzero right-hand side"
    )]
    InconsistentRow(String),
    #[error("every constraint is homogeneous; add a mass constraint to rule out the zero measure")]
    Homogeneous,
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// A measure on the variables of `support.space`, supported on `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDecl {
    pub name: String,
    pub support: SemialgebraicSet,
}

impl MeasureDecl {
    pub fn new(name: impl Into<String>, support: SemialgebraicSet) -> Self {
        MeasureDecl {
            name: name.into(),
            support,
        }
    }

    pub fn vars(&self) -> &VarSpace {
        &self.support.space
    }
}

/// `sum_i <p_i, mu_i> (rel) rhs`, each `p_i` over its measure's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConstraint {
    pub terms: Vec<(String, Polynomial)>,
    pub rhs: BigRational,
    pub relation: Relation,
}

impl MomentConstraint {
    /// Combine terms on the same measure and drop zero polynomials.
    pub fn merged(self) -> Self {
        let mut terms: Vec<(String, Polynomial)> = Vec::new();
        for (name, p) in self.terms {
            match terms
                .iter_mut()
                .find(|(n, q)| *n == name && q.nvars() == p.nvars())
            {
                Some((_, q)) => *q = q.add(&p).expect("same variable count"),
                None => terms.push((name, p)),
            }
        }
        terms.retain(|(_, p)| !p.is_zero());
        MomentConstraint { terms, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    /// a decision measure of the problem
    Measure(String),
    /// a fixed Dirac mass at a state
    Dirac(Vec<BigRational>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Horizon {
    Fixed(BigRational),
    Free,
}

/// Polynomial (piecewise, possibly controlled) dynamics `x' = f_j(t, x, u)` on cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSpec {
    /// `[t] ++ states ++ controls`
    pub space: VarSpace,
    pub time: Option<String>,
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub cells: Vec<Cell>,
    /// running cost integrated against every cell measure
    pub lagrangian: Option<Polynomial>,
    /// cost on the terminal measure, over `(t, x)`
    pub terminal_cost: Option<Polynomial>,
    pub horizon: Horizon,
    pub initial: Endpoint,
    pub terminal: Endpoint,
}

impl DynamicsSpec {
    pub fn new(time: Option<&str>, states: &[&str], controls: &[&str]) -> Result<Self, PolyError> {
        let names: Vec<&str> = time
            .into_iter()
            .chain(states.iter().copied())
            .chain(controls.iter().copied())
            .collect();
        Ok(DynamicsSpec {
            space: VarSpace::new(names)?,
            time: time.map(str::to_string),
            states: states.iter().map(|s| s.to_string()).collect(),
            controls: controls.iter().map(|s| s.to_string()).collect(),
            cells: Vec::new(),
            lagrangian: None,
            terminal_cost: None,
            horizon: Horizon::Free,
            initial: Endpoint::Dirac(Vec::new()),
            terminal: Endpoint::Dirac(Vec::new()),
        })
    }

    pub fn autonomous(&self) -> bool {
        self.time.is_none()
    }

    pub fn state_dim(&self) -> usize {
        self.states.len()
    }

    pub fn control_dim(&self) -> usize {
        self.controls.len()
    }

    fn index(&self, name: &str) -> usize {
        self.space
            .position(name)
            .expect("dynamics variable present in its own space")
    }

    fn check(&self) -> Result<(), GmpError> {
        let n = self.space.len();
        if self.cells.is_empty() {
            return Err(GmpError::Dynamics("no cells (vector fields) given".into()));
        }
        for c in &self.cells {
            if c.f.len() != self.states.len() {
                return Err(GmpError::Dynamics(format!(
                    "cell `{}` has {} right-hand sides for {} states",
                    c.measure,
                    c.f.len(),
                    self.states.len()
                )));
            }
            if c.f.iter().any(|p| p.nvars() != n) {
                return Err(GmpError::Dynamics(format!(
                    "cell `{}` is not over the dynamics variables",
                    c.measure
                )));
            }
        }
        for p in self.lagrangian.iter().chain(&self.terminal_cost) {
            if p.nvars() != n {
                return Err(GmpError::Dynamics(
                    "cost polynomial is not over the dynamics variables".into(),
                ));
            }
        }
        if let Some(tc) = &self.terminal_cost {
            for i in tc.support_vars() {
                if self.controls.contains(&self.space.names()[i]) {
                    return Err(GmpError::Dynamics(
                        "terminal cost may not depend on controls".into(),
                    ));
                }
            }
        }
        if self.autonomous() {
            if let Horizon::Fixed(_) = self.horizon {
                return Err(GmpError::Dynamics(
                    "a fixed horizon needs a time variable".into(),
                ));
            }
        }
        if let Horizon::Fixed(t) = &self.horizon {
            if !t.is_positive() {
                return Err(GmpError::Dynamics("horizon must be positive".into()));
            }
        }
        Ok(())
    }

    fn max_f_degree(&self) -> usize {
        self.cells
            .iter()
            .flat_map(|c| c.f.iter().map(Polynomial::degree))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmpProblem {
    pub measures: Vec<MeasureDecl>,
    pub constraints: Vec<MomentConstraint>,
    pub objective: Vec<(String, Polynomial)>,
    pub sense: Sense,
    pub dynamics: Option<DynamicsSpec>,
}

impl GmpProblem {
    /// `min p0` over a set, as `min <p0, mu>` with `mass(mu) = 1`.
    pub fn from_pop(pop: &PopProblem) -> Self {
        let n = pop.set.nvars();
        GmpProblem {
            measures: vec![MeasureDecl::new("x", pop.set.clone())],
            constraints: vec![MomentConstraint {
                terms: vec![("x".into(), Polynomial::one(n))],
                rhs: BigRational::one(),
                relation: Relation::Eq,
            }],
            objective: vec![("x".into(), pop.objective.clone())],
            sense: Sense::Min,
            dynamics: None,
        }
    }

    pub fn measure(&self, name: &str) -> Option<&MeasureDecl> {
        self.measures.iter().find(|m| m.name == name)
    }

    fn check(&self) -> Result<(), GmpError> {
        for (i, m) in self.measures.iter().enumerate() {
            if m.vars().is_empty() {
                return Err(GmpError::NoVariables(m.name.clone()));
            }
            if self.measures[..i].iter().any(|o| o.name == m.name) {
                return Err(GmpError::DuplicateMeasure(m.name.clone()));
            }
        }
        let check_term = |name: &str, p: &Polynomial, what: &str| -> Result<(), GmpError> {
            let m = self
                .measure(name)
                .ok_or_else(|| GmpError::UnknownMeasure(name.to_string()))?;
            if p.nvars() != m.vars().len() {
                return Err(GmpError::Space {
                    what: what.to_string(),
                    measure: name.to_string(),
                    detail: format!("{} variables instead of {}", p.nvars(), m.vars().len()),
                });
            }
            Ok(())
        };
        for (k, c) in self.constraints.iter().enumerate() {
            for (name, p) in &c.terms {
                check_term(name, p, &format!("constraint {}", k + 1))?;
            }
        }
        for (name, p) in &self.objective {
            check_term(name, p, "objective")?;
        }
        if let Some(d) = &self.dynamics {
            d.check()?;
            for c in &d.cells {
                self.measure(&c.measure)
                    .ok_or_else(|| GmpError::UnknownMeasure(c.measure.clone()))?;
            }
            for e in [&d.initial, &d.terminal] {
                if let Endpoint::Measure(n) = e {
                    self.measure(n)
                        .ok_or_else(|| GmpError::UnknownMeasure(n.clone()))?;
                }
            }
        }
        Ok(())
    }
}

/// Generated Liouville family and its test-degree bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleFamily {
    pub rows: Vec<LiouvilleRow>,
    /// largest test-monomial degree used
    pub degree: usize,
    /// true when nonlinear dynamics forced `degree < 2r`
    pub trimmed: bool,
}

/// Liouville rows for every test monomial of degree `<= 2r` in `(t, x)`, trimmed
/// so that `deg v + deg f - 1 <= 2r`. Several cells give the piecewise form
/// where the occupation terms sum over cells. Works on the problem exactly as
/// stated; fixed horizons are not rescaled here.
pub fn liouville_constraints(
    dynamics: &DynamicsSpec,
    measures: &[MeasureDecl],
    r: usize,
) -> Result<LiouvilleFamily, GmpError> {
    dynamics.check()?;
    let terminal_time = match &dynamics.horizon {
        Horizon::Fixed(t) => Some(t.clone()),
        Horizon::Free => None,
    };
    liouville_rows(dynamics, measures, r, terminal_time)
}

/// Piecewise form of [`liouville_constraints`]: each `(cell, support)` pair
/// declares an occupation measure named by the cell.
pub fn piecewise_liouville(
    dynamics: &DynamicsSpec,
    cells: &[(Cell, SemialgebraicSet)],
    endpoints: &[MeasureDecl],
    r: usize,
) -> Result<LiouvilleFamily, GmpError> {
    let mut d = dynamics.clone();
    d.cells = cells.iter().map(|(c, _)| c.clone()).collect();
    let mut measures: Vec<MeasureDecl> = cells
        .iter()
        .map(|(c, s)| MeasureDecl::new(c.measure.clone(), s.clone()))
        .collect();
    measures.extend_from_slice(endpoints);
    liouville_constraints(&d, &measures, r)
}

fn liouville_rows(
    d: &DynamicsSpec,
    measures: &[MeasureDecl],
    r: usize,
    terminal_time: Option<BigRational>,
) -> Result<LiouvilleFamily, GmpError> {
    let states: Vec<usize> = d.states.iter().map(|s| d.index(s)).collect();
    let degree = test_degree(r, d.max_f_degree());
    let data = liouville::LiouvilleData {
        space: &d.space,
        time: d.time.as_deref().map(|t| d.index(t)),
        states: &states,
        cells: &d.cells,
        terminal_time,
        initial: &d.initial,
        terminal: &d.terminal,
        measures,
    };
    Ok(LiouvilleFamily {
        rows: data.rows(degree)?,
        degree,
        trimmed: degree < 2 * r,
    })
}

/// Rewrite a fixed-horizon problem in the time `s = t / T` on `[0, 1]`.
///
/// Occupation measures pick up the factor `T` (`dt = T ds`), so integrands
/// against them become `T p(T s, ...)`, the vector fields become
/// `T f(T s, ...)`, and `s(1 - s) >= 0` joins their supports.
fn rescale_time(g: &GmpProblem) -> Result<(GmpProblem, Option<BigRational>), GmpError> {
    let Some(d) = &g.dynamics else {
        return Ok((g.clone(), None));
    };
    let (Some(tname), Horizon::Fixed(big_t)) = (&d.time, &d.horizon) else {
        return Ok((g.clone(), None));
    };
    let big_t = big_t.clone();
    let mut out = g.clone();
    let occupation: Vec<String> = d.cells.iter().map(|c| c.measure.clone()).collect();
    let is_occ = |n: &str| occupation.iter().any(|o| o == n);

    for m in &mut out.measures {
        let Some(ti) = m.vars().position(tname) else {
            continue;
        };
        let s = &mut m.support;
        let scale = |p: &Polynomial| p.scale_var(ti, &big_t);
        s.inequalities = s.inequalities.iter().map(scale).collect();
        s.equalities = s.equalities.iter().map(scale).collect();
        if is_occ(&m.name) {
            let time_only = s
                .inequalities
                .iter()
                .any(|p| p.degree() > 0 && p.support_vars() == vec![ti]);
            if !time_only {
                let n = s.nvars();
                let t = Polynomial::var(n, ti);
                s.inequalities.push(t.sub(&t.pow(2))?);
            }
        }
    }
    let time_of =
        |name: &str| -> Option<usize> { g.measure(name).and_then(|m| m.vars().position(tname)) };
    let transform = |name: &str, p: &Polynomial| -> Polynomial {
        let q = match time_of(name) {
            Some(ti) => p.scale_var(ti, &big_t),
            None => p.clone(),
        };
        if is_occ(name) {
            q.scale(&big_t)
        } else {
            q
        }
    };
    for c in &mut out.constraints {
        for (name, p) in &mut c.terms {
            *p = transform(name, p);
        }
    }
    for (name, p) in &mut out.objective {
        *p = transform(name, p);
    }
    let dd = out.dynamics.as_mut().expect("dynamics present");
    let ti = dd.index(tname);
    for c in &mut dd.cells {
        for f in &mut c.f {
            *f = f.scale_var(ti, &big_t).scale(&big_t);
        }
    }
    if let Some(l) = &mut dd.lagrangian {
        *l = l.scale_var(ti, &big_t).scale(&big_t);
    }
    if let Some(tc) = &mut dd.terminal_cost {
        *tc = tc.scale_var(ti, &big_t);
    }
    dd.horizon = Horizon::Fixed(BigRational::one());
    Ok((out, Some(big_t)))
}

/// Assembled GMP relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct GmpRelaxation {
    pub relaxation: Relaxation,
    /// Liouville rows in internal coordinates (time scaled to `[0, 1]` for fixed horizons)
    pub liouville: Option<LiouvilleFamily>,
    /// horizon `T` when time was rescaled
    pub time_scale: Option<BigRational>,
    /// constant part of the objective (costs on fixed endpoints)
    pub objective_constant: f64,
    problem: GmpProblem,
}

impl GmpRelaxation {
    pub fn info(&self, measure: &str) -> Option<&RelaxationInfo> {
        self.relaxation.info.iter().find(|i| i.name == measure)
    }

    /// The problem actually assembled (after time rescaling).
    pub fn internal_problem(&self) -> &GmpProblem {
        &self.problem
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<GmpSolution, GmpError> {
        let sol = self.relaxation.solve(opts)?;
        let mut moments = Vec::new();
        for (info, y) in self.relaxation.info.iter().zip(sol.moments) {
            moments.push((info.name.clone(), self.unscale(&info.name, y)));
        }
        Ok(GmpSolution {
            bound: sol.bound + self.objective_constant,
            moments,
            sdp: sol.sdp,
        })
    }

    /// Among the near-optimal points of the relaxation, one with the least
    /// mass on `measure`. Phase one solves the relaxation to its value `v`;
    /// phase two keeps the objective within `slack (1 + |v|)` of `v` and
    /// minimizes `mass(measure)`. Useful when the optimal face is not a
    /// single point, e.g. an occupation measure that can park mass at an
    /// equilibrium without changing the cost.
    pub fn solve_min_mass(
        &self,
        measure: &str,
        slack: f64,
        opts: &SolveOptions,
    ) -> Result<MinMassSelection, GmpError> {
        let info = self
            .info(measure)
            .ok_or_else(|| GmpError::UnknownMeasure(measure.to_string()))?;
        let mass_index = info.offset;
        let optimal = self.solve(opts)?;
        if optimal.status() != SdpStatus::Optimal {
            return Err(RelaxError::Solver(optimal.status()).into());
        }
        let rl = &self.relaxation;
        let v: f64 = rl
            .objective
            .iter()
            .zip(&optimal.sdp.y)
            .map(|(c, y)| c * y)
            .sum();
        let mut program = rl.program.clone();
        // dual slack v + slack (1 + |v|) - c'y >= 0 in a new nonnegative block
        let block = program.blocks.len();
        program.blocks.push(Block {
            kind: BlockKind::Nonneg,
            size: 1,
        });
        program.c.push(block, 0, 0, v + slack * (1.0 + v.abs()));
        for (k, &c) in rl.objective.iter().enumerate() {
            program.a[k].push(block, 0, 0, c);
        }
        program.b.iter_mut().for_each(|b| *b = 0.0);
        program.b[mass_index] = -1.0;
        let phase_two = GmpRelaxation {
            relaxation: Relaxation {
                program,
                ..rl.clone()
            },
            liouville: None,
            time_scale: self.time_scale.clone(),
            objective_constant: self.objective_constant,
            problem: self.problem.clone(),
        };
        let selected = phase_two.solve(opts)?;
        Ok(MinMassSelection { optimal, selected })
    }

    /// Map internal moments back to the original time axis.
    fn unscale(&self, name: &str, y: MomentVector) -> MomentVector {
        let (Some(t), Some(d)) = (&self.time_scale, &self.problem.dynamics) else {
            return y;
        };
        let Some(m) = self.problem.measure(name) else {
            return y;
        };
        let Some(ti) = d.time.as_deref().and_then(|tn| m.vars().position(tn)) else {
            return y;
        };
        let t = rat_to_f64(t);
        let occ = d.cells.iter().any(|c| c.measure == name);
        let extra = if occ { 1 } else { 0 };
        let vals = y.values().to_vec();
        MomentVector::from_fn(y.nvars(), y.degree(), |e| {
            let k = crate::poly::grlex_index(e);
            vals[k] * t.powi(e.powers()[ti] as i32 + extra)
        })
    }
}

/// Result of [`GmpRelaxation::solve_min_mass`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinMassSelection {
    /// phase one; its bound is the relaxation value
    pub optimal: GmpSolution,
    /// phase two; `bound` is the objective at the selected point
    pub selected: GmpSolution,
}

/// Solved relaxation: the bound and one moment vector per measure.
#[derive(Debug, Clone, PartialEq)]
pub struct GmpSolution {
    pub bound: f64,
    /// `(measure name, moments)` in declaration order, original coordinates
    pub moments: Vec<(String, MomentVector)>,
    pub sdp: SdpSolution,
}

impl GmpSolution {
    pub fn status(&self) -> SdpStatus {
        self.sdp.status
    }

    pub fn moments_of(&self, name: &str) -> Option<&MomentVector> {
        self.moments.iter().find(|(n, _)| n == name).map(|(_, y)| y)
    }

    pub fn mass(&self, name: &str) -> Option<f64> {
        self.moments_of(name).map(MomentVector::mass)
    }
}

/// Order-r relaxation: per-measure moment and localizer blocks, then the
/// explicit constraints, then the Liouville rows.
pub fn build_gmp_relaxation(g: &GmpProblem, r: usize) -> Result<GmpRelaxation, GmpError> {
    g.check()?;
    let (p, time_scale) = rescale_time(g)?;
    let mut asm = Assembler::new(r);
    for m in &p.measures {
        asm.add_measure(&m.name, &m.support)?;
    }
    let index_of = |name: &str| {
        p.measures
            .iter()
            .position(|m| m.name == name)
            .expect("checked")
    };

    let mut rows: Vec<(MomentConstraint, String)> = p
        .constraints
        .iter()
        .enumerate()
        .map(|(k, c)| (c.clone().merged(), format!("constraint {}", k + 1)))
        .collect();
    let liouville = match &p.dynamics {
        Some(d) => {
            let tt = match &d.horizon {
                Horizon::Fixed(t) => Some(t.clone()),
                Horizon::Free => None,
            };
            let fam = liouville_rows(d, &p.measures, r, tt)?;
            for row in &fam.rows {
                rows.push((
                    row.constraint.clone(),
                    format!("Liouville row for test monomial {}", row.test),
                ));
            }
            Some(fam)
        }
        None => None,
    };
    if rows.iter().all(|(c, _)| c.rhs.is_zero()) {
        return Err(GmpError::Homogeneous);
    }
    for (c, what) in &rows {
        let mut terms = Vec::new();
        for (name, poly) in &c.terms {
            terms.extend(asm.linear_form(index_of(name), poly, what)?);
        }
        asm.add_row(
            MomentRow {
                terms,
                relation: c.relation,
                rhs: rat_to_f64(&c.rhs),
            },
            what,
        )?;
    }

    let sign = match p.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut constant = 0.0;
    let mut objective = p.objective.clone();
    if let Some(d) = &p.dynamics {
        if let Some(l) = &d.lagrangian {
            for c in &d.cells {
                let m = p.measure(&c.measure).expect("checked");
                objective.push((c.measure.clone(), remap_to(l, &d.space, m, "Lagrangian")?));
            }
        }
        if let Some(tc) = &d.terminal_cost {
            let tc = match (&d.time, &d.horizon) {
                (Some(t), Horizon::Fixed(tt)) => tc.substitute(d.index(t), tt),
                _ => tc.clone(),
            };
            match &d.terminal {
                Endpoint::Measure(n) => {
                    let m = p.measure(n).expect("checked");
                    objective.push((n.clone(), remap_to(&tc, &d.space, m, "terminal cost")?));
                }
                Endpoint::Dirac(pt) => {
                    let states: Vec<usize> = d.states.iter().map(|s| d.index(s)).collect();
                    let x: Vec<f64> = (0..d.space.len())
                        .map(|i| {
                            states
                                .iter()
                                .position(|&s| s == i)
                                .map_or(0.0, |k| rat_to_f64(&pt[k]))
                        })
                        .collect();
                    constant += tc.eval(&x)?;
                }
            }
        }
    }
    for (name, poly) in &objective {
        let terms = asm.linear_form(index_of(name), poly, "objective")?;
        asm.add_objective(&terms, sign);
    }
    let (program, info, obj) = asm.finish();
    Ok(GmpRelaxation {
        relaxation: Relaxation {
            program,
            info,
            objective: obj,
            sense: sign,
        },
        liouville,
        time_scale,
        objective_constant: constant,
        problem: p,
    })
}

fn remap_to(
    p: &Polynomial,
    from: &VarSpace,
    m: &MeasureDecl,
    what: &str,
) -> Result<Polynomial, GmpError> {
    p.remap(from, m.vars()).map_err(|e| GmpError::Space {
        what: what.to_string(),
        measure: m.name.clone(),
        detail: e.to_string(),
    })
}

/// Smallest order whose relaxation assembles, searched up to `max_order`.
pub fn minimal_order(g: &GmpProblem, max_order: usize) -> Result<usize, GmpError> {
    let mut last = None;
    for r in 1..=max_order {
        match build_gmp_relaxation(g, r) {
            Ok(_) => return Ok(r),
            Err(
                e @ GmpError::Relax(
                    RelaxError::OrderTooLow { .. } | RelaxError::DegreeTooHigh { .. },
                ),
            ) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(GmpError::Relax(RelaxError::OrderTooLow { r: 0, r_x: 1 })))
}

pub fn solve_gmp(g: &GmpProblem, r: usize, opts: &SolveOptions) -> Result<GmpSolution, GmpError> {
    build_gmp_relaxation(g, r)?.solve(opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_polynomial;
    use crate::poly::{rat, Exponent};
    use crate::relaxation::build_relaxation;

    fn p(s: &str, v: &VarSpace) -> Polynomial {
        parse_polynomial(s, v).unwrap()
    }

    fn set(v: &VarSpace, ineq: &[&str]) -> SemialgebraicSet {
        let mut s = SemialgebraicSet::new(v.clone());
        s.inequalities = ineq.iter().map(|q| p(q, v)).collect();
        s
    }

    /// x' = -x from mu0 on [1, 2] to muT on [-1/2, 1/2], mass(mu0) = 1, min <x^2, mu>.
    fn occtraj() -> GmpProblem {
        let x = VarSpace::new(["x"]).unwrap();
        let mut d = DynamicsSpec::new(None, &["x"], &[]).unwrap();
        d.cells.push(Cell {
            measure: "mu".into(),
            f: vec![p("-x", &x)],
        });
        d.initial = Endpoint::Measure("mu0".into());
        d.terminal = Endpoint::Measure("muT".into());
        GmpProblem {
            measures: vec![
                MeasureDecl::new("mu", set(&x, &["4 - x^2"])),
                MeasureDecl::new("mu0", set(&x, &["1/4 - (x - 3/2)^2"])),
                MeasureDecl::new("muT", set(&x, &["1/4 - x^2"])),
            ],
            constraints: vec![MomentConstraint {
                terms: vec![("mu0".into(), Polynomial::one(1))],
                rhs: BigRational::one(),
                relation: Relation::Eq,
            }],
            objective: vec![("mu".into(), p("x^2", &x))],
            sense: Sense::Min,
            dynamics: Some(d),
        }
    }

    /// x' = u from delta_1 to delta_0, min <x^2 + u^2, mu>.
    fn lqr() -> GmpProblem {
        let xu = VarSpace::new(["x", "u"]).unwrap();
        let mut d = DynamicsSpec::new(None, &["x"], &["u"]).unwrap();
        d.cells.push(Cell {
            measure: "mu".into(),
            f: vec![p("u", &xu)],
        });
        d.lagrangian = Some(p("x^2 + u^2", &xu));
        d.initial = Endpoint::Dirac(vec![rat(1, 1)]);
        d.terminal = Endpoint::Dirac(vec![rat(0, 1)]);
        GmpProblem {
            measures: vec![MeasureDecl::new("mu", SemialgebraicSet::new(xu))],
            constraints: vec![],
            objective: vec![],
            sense: Sense::Min,
            dynamics: Some(d),
        }
    }

    #[test]
    fn occtraj_rows_match_closed_form() {
        let g = occtraj();
        let fam = liouville_constraints(g.dynamics.as_ref().unwrap(), &g.measures, 2).unwrap();
        assert_eq!(fam.degree, 4);
        assert!(!fam.trimmed);
        // alpha = 0 gives mass(mu0) - mass(muT) = 0 with no occupation term
        assert_eq!(fam.rows.len(), 5);
        for row in &fam.rows {
            let a = row.test.powers()[0] as i64;
            let c = &row.constraint;
            let get = |n: &str| c.terms.iter().find(|(m, _)| m == n).map(|(_, q)| q.clone());
            let e = Exponent::new(vec![a as u32]);
            if a > 0 {
                assert_eq!(get("mu").unwrap().coeff(&e), rat(-a, 1));
            } else {
                assert!(get("mu").is_none());
            }
            assert_eq!(get("muT").unwrap().coeff(&e), rat(-1, 1));
            assert_eq!(get("mu0").unwrap().coeff(&e), rat(1, 1));
            assert!(c.rhs.is_zero());
        }
    }

    #[test]
    fn analytic_occtraj_moments_satisfy_rows() {
        let g = occtraj();
        let fam = liouville_constraints(g.dynamics.as_ref().unwrap(), &g.measures, 3).unwrap();
        let y = |k: u32| {
            if k == 0 {
                2f64.ln()
            } else {
                (1.0 - 0.5f64.powi(k as i32)) / k as f64
            }
        };
        for row in &fam.rows {
            let mut lhs = 0.0;
            for (name, q) in &row.constraint.terms {
                for (e, c) in q.terms() {
                    let k = e.powers()[0];
                    let m = match name.as_str() {
                        "mu" => y(k),
                        "mu0" => 1.0,
                        _ => 0.5f64.powi(k as i32),
                    };
                    lhs += rat_to_f64(c) * m;
                }
            }
            assert!(lhs.abs() < 1e-12, "{lhs}");
        }
    }

    #[test]
    fn lqr_rows_and_bound() {
        let g = lqr();
        let fam = liouville_constraints(g.dynamics.as_ref().unwrap(), &g.measures, 1).unwrap();
        assert_eq!(fam.rows.len(), 2);
        let xu = VarSpace::new(["x", "u"]).unwrap();
        assert_eq!(fam.rows[0].constraint.terms[0].1, p("u", &xu));
        assert_eq!(fam.rows[0].constraint.rhs, rat(-1, 1));
        assert_eq!(fam.rows[1].constraint.terms[0].1, p("2*x*u", &xu));
        assert_eq!(fam.rows[1].constraint.rhs, rat(-1, 1));

        let rl = build_gmp_relaxation(&g, 1).unwrap();
        assert_eq!(rl.relaxation.info[0].block_sizes, vec![3]);
        assert!(rl.relaxation.info[0].compactness_warning);
        let s = rl.solve(&SolveOptions::default()).unwrap();
        assert!((s.bound - 1.0).abs() < 1e-3, "{} {:?}", s.bound, s.status());
    }

    #[test]
    fn least_occupation_mass_is_the_trajectory() {
        let rl = build_gmp_relaxation(&occtraj(), 4).unwrap();
        let sel = rl
            .solve_min_mass("mu", 1e-8, &SolveOptions::default())
            .unwrap();
        assert_eq!(sel.selected.status(), SdpStatus::Optimal);
        assert!((sel.optimal.bound - 0.375).abs() < 1e-6);
        assert!(sel.selected.bound <= sel.optimal.bound + 1e-7);
        assert!((sel.selected.mass("mu").unwrap() - 2f64.ln()).abs() < 1e-4);
        let end = sel.selected.moments_of("muT").unwrap();
        assert!((end.get(&Exponent::new(vec![4])).unwrap() - 0.0625).abs() < 1e-6);
        assert!(matches!(
            rl.solve_min_mass("nu", 1e-8, &SolveOptions::default()),
            Err(GmpError::UnknownMeasure(_))
        ));
    }

    #[test]
    fn occtraj_order_four_bound() {
        let s = solve_gmp(&occtraj(), 4, &SolveOptions::default()).unwrap();
        assert!(
            (s.bound - 0.375).abs() < 1e-2,
            "{} {:?}",
            s.bound,
            s.status()
        );
        // mass parked at the equilibrium x = 0 costs nothing, so only the
        // moments of positive degree are pinned down
        let mu = s.moments_of("mu").unwrap();
        for a in 1..=4u32 {
            let want = (1.0 - 0.5f64.powi(a as i32)) / a as f64;
            assert!((mu.get(&Exponent::new(vec![a])).unwrap() - want).abs() < 1e-2);
        }
        assert!((s.mass("mu0").unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_measure_gmp_equals_pop_relaxation() {
        let v = VarSpace::indexed("x", 2);
        let mut s = set(
            &v,
            &["3 + 2*x2 - x1^2 - x2^2", "-x1 - x2 - x1*x2", "1 + x1*x2"],
        );
        s.equalities.push(p("x1 + x2 + 1", &v));
        let pop = PopProblem {
            objective: p("-x2", &v),
            set: s,
        };
        for r in 1..=3 {
            let a = build_relaxation(&pop, r).unwrap();
            let b = build_gmp_relaxation(&GmpProblem::from_pop(&pop), r).unwrap();
            assert_eq!(a.program, b.relaxation.program);
            assert_eq!(a.info, b.relaxation.info);
        }
    }

    #[test]
    fn homogeneous_problem_is_rejected() {
        let mut g = occtraj();
        g.constraints.clear();
        assert_eq!(
            build_gmp_relaxation(&g, 2).unwrap_err(),
            GmpError::Homogeneous
        );
    }

    #[test]
    fn degree_overflow_names_the_constraint() {
        let mut g = occtraj();
        let x = VarSpace::new(["x"]).unwrap();
        g.constraints.push(MomentConstraint {
            terms: vec![("mu".into(), p("x^5", &x))],
            rhs: BigRational::zero(),
            relation: Relation::Ge,
        });
        let e = build_gmp_relaxation(&g, 2).unwrap_err();
        assert!(e.to_string().contains("constraint 2"), "{e}");
    }

    #[test]
    fn minimal_orders() {
        assert_eq!(minimal_order(&occtraj(), 10).unwrap(), 1);
        assert_eq!(minimal_order(&lqr(), 10).unwrap(), 1);
        let mut g = occtraj();
        g.objective[0].1 = p("x^6", &VarSpace::new(["x"]).unwrap());
        assert_eq!(minimal_order(&g, 10).unwrap(), 3);
        assert!(minimal_order(&g, 2).is_err());
    }

    #[test]
    fn unknown_measure_is_reported() {
        let mut g = occtraj();
        g.objective[0].0 = "nu".into();
        assert_eq!(
            build_gmp_relaxation(&g, 2).unwrap_err(),
            GmpError::UnknownMeasure("nu".into())
        );
    }

    #[test]
    fn two_cells_split_time_evenly() {
        // x' = 1 on [-1, 0] and [0, 1], from delta_{-1/2} to delta_{1/2}; free horizon
        let x = VarSpace::new(["x"]).unwrap();
        let mut d = DynamicsSpec::new(None, &["x"], &[]).unwrap();
        for name in ["left", "right"] {
            d.cells.push(Cell {
                measure: name.into(),
                f: vec![Polynomial::one(1)],
            });
        }
        d.initial = Endpoint::Dirac(vec![rat(-1, 2)]);
        d.terminal = Endpoint::Dirac(vec![rat(1, 2)]);
        let g = GmpProblem {
            measures: vec![
                MeasureDecl::new("left", set(&x, &["-x * (x + 1)"])),
                MeasureDecl::new("right", set(&x, &["x * (1 - x)"])),
            ],
            constraints: vec![],
            objective: vec![],
            sense: Sense::Min,
            dynamics: Some(d),
        };
        let s = solve_gmp(&g, 3, &SolveOptions::default()).unwrap();
        assert!(
            (s.mass("left").unwrap() - 0.5).abs() < 1e-6,
            "{:?}",
            s.mass("left")
        );
        assert!((s.mass("right").unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn fixed_horizon_is_rescaled_and_unscaled() {
        // t in [0, 2], x' = 1 from delta_0, mass of the occupation measure is T = 2
        let tx = VarSpace::new(["t", "x"]).unwrap();
        let mut d = DynamicsSpec::new(Some("t"), &["x"], &[]).unwrap();
        d.cells.push(Cell {
            measure: "mu".into(),
            f: vec![Polynomial::one(2)],
        });
        d.horizon = Horizon::Fixed(rat(2, 1));
        d.initial = Endpoint::Dirac(vec![rat(0, 1)]);
        d.terminal = Endpoint::Measure("muT".into());
        let x = VarSpace::new(["x"]).unwrap();
        let g = GmpProblem {
            measures: vec![
                MeasureDecl::new("mu", set(&tx, &["9 - x^2"])),
                MeasureDecl::new("muT", set(&x, &["9 - x^2"])),
            ],
            constraints: vec![],
            objective: vec![("mu".into(), p("t", &tx))],
            sense: Sense::Min,
            dynamics: Some(d),
        };
        let rl = build_gmp_relaxation(&g, 2).unwrap();
        assert_eq!(rl.time_scale, Some(rat(2, 1)));
        // the trajectory is a single curve, so the moment side is degenerate and
        // the last digit of the default tolerance is out of reach
        let opts = SolveOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            ..SolveOptions::default()
        };
        let s = rl.solve(&opts).unwrap();
        assert_eq!(s.status(), SdpStatus::Optimal);
        let mu = s.moments_of("mu").unwrap();
        assert!((mu.mass() - 2.0).abs() < 1e-6, "{}", mu.mass());
        // int_0^2 t dt = 2, and x(t) = t so int x dt = 2 as well
        assert!((s.bound - 2.0).abs() < 1e-6, "{}", s.bound);
        assert!((mu.get(&Exponent::new(vec![0, 1])).unwrap() - 2.0).abs() < 1e-5);
        // terminal state x(2) = 2
        assert!((s.moments_of("muT").unwrap().first_order()[0] - 2.0).abs() < 1e-5);
    }
}
