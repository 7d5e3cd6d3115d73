//! Order-r moment relaxations of polynomial optimization problems.
//!
//! Moments are the dual variables `y` of the conic program. The moment and
//! localizing matrices become PSD blocks `Z = sum_a y_a B_a` (so `C = 0`,
//! `A_a = -B_a`), linear equalities on `y` live in a zero block and linear
//! inequalities in a nonnegative block.

use num_rational::BigRational;
use num_traits::Signed;
use thiserror::Error;

use crate::moments::{
    localizing_matrix_stencil, moment_matrix_stencil, MatrixStencil, MomentVector,
};
use crate::poly::{
    monomial_count, rat_to_f64, Exponent, MonomialBasis, PolyError, Polynomial, VarSpace,
};
use crate::sdp::{
    self, Block, BlockKind, BlockSparse, ConicProgram, SdpError, SdpSolution, SdpStatus,
    SolveOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error("relaxation order {r} is below the minimal order r_X = {r_x}")]
    OrderTooLow { r: usize, r_x: usize },
    #[error("{what} has degree {degree}, above the relaxation degree 2r = {max}")]
    DegreeTooHigh {
        what: String,
        degree: usize,
        max: usize,
    },
    #[error("{0} is identically zero but has a nonzero right-hand side")]
    Inconsistent(String),
    #[error("polynomial over {got} variables where {expected} were expected ({what})")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("ball constant must be positive")]
    BadBall,
    #[error("solver stopped with status {}", .0.name())]
    Solver(SdpStatus),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// `{x : g_k(x) >= 0, h_k(x) = 0}`, optionally intersected with the ball
/// `R - sum x_i^2 >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemialgebraicSet {
    pub space: VarSpace,
    pub inequalities: Vec<Polynomial>,
    pub equalities: Vec<Polynomial>,
    /// The constant `R` of the ball constraint `R - sum x_i^2 >= 0`.
    pub ball_radius: Option<BigRational>,
}

impl SemialgebraicSet {
    pub fn new(space: VarSpace) -> Self {
        SemialgebraicSet {
            space,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            ball_radius: None,
        }
    }

    pub fn nvars(&self) -> usize {
        self.space.len()
    }

    fn ball(&self) -> Option<Polynomial> {
        let r = self.ball_radius.as_ref()?;
        let n = self.nvars();
        let mut p = Polynomial::constant(n, r.clone());
        for i in 0..n {
            p = p.sub(&Polynomial::var(n, i).pow(2)).ok()?;
        }
        Some(p)
    }

    /// Inequalities in assembly order, the ball constraint last.
    pub fn all_inequalities(&self) -> Vec<Polynomial> {
        let mut v = self.inequalities.clone();
        v.extend(self.ball());
        v
    }

    /// `r_X = max(1, r_k)` over all constraint polynomials.
    pub fn r_x(&self) -> usize {
        self.all_inequalities()
            .iter()
            .chain(&self.equalities)
            .map(half_degree)
            .fold(1, usize::max)
    }

    /// Whether some constraint visibly makes the quadratic module Archimedean:
    /// a ball, or degree-2 inequalities with diagonal concave quadratic parts
    /// that together bound every variable.
    pub fn compactness_certified(&self) -> bool {
        if self.ball_radius.is_some() {
            return true;
        }
        let n = self.nvars();
        let mut bounded = vec![false; n];
        for g in &self.inequalities {
            if g.degree() != 2 {
                continue;
            }
            let mut vars = Vec::new();
            let ok = g.terms().filter(|(e, _)| e.degree() == 2).all(|(e, c)| {
                match e.powers().iter().position(|&p| p == 2) {
                    Some(i) if c.is_negative() => {
                        vars.push(i);
                        true
                    }
                    _ => false,
                }
            });
            if ok {
                for i in vars {
                    bounded[i] = true;
                }
            }
        }
        n > 0 && bounded.iter().all(|&b| b)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool, PolyError> {
        for g in self.all_inequalities() {
            if g.eval(x)? < -tol {
                return Ok(false);
            }
        }
        for h in &self.equalities {
            if h.eval(x)?.abs() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `min p0(x)` over a semialgebraic set.
#[derive(Debug, Clone, PartialEq)]
pub struct PopProblem {
    pub objective: Polynomial,
    pub set: SemialgebraicSet,
}

impl PopProblem {
    pub fn r_x(&self) -> usize {
        self.set.r_x().max(half_degree(&self.objective))
    }
}

/// `ceil(deg p / 2)`.
pub fn half_degree(p: &Polynomial) -> usize {
    p.degree().div_ceil(2)
}

/// Block and index bookkeeping for one measure of a relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationInfo {
    pub name: String,
    pub order: usize,
    /// half-degrees of the inequality constraints (ball last)
    pub r_k: Vec<usize>,
    pub r_x: usize,
    /// sides of the PSD blocks: moment matrix first, then localizers
    pub block_sizes: Vec<usize>,
    pub moment_dim: usize,
    /// position of this measure's `y_0` in the dual vector
    pub offset: usize,
    pub nvars: usize,
    /// no ball or other constraint certifying compactness was found
    pub compactness_warning: bool,
    /// zero rows generated from equality constraints
    pub equality_rows: usize,
}

impl RelaxationInfo {
    pub fn moments(&self, y: &[f64]) -> MomentVector {
        let values = y[self.offset..self.offset + self.moment_dim].to_vec();
        MomentVector::new(self.nvars, 2 * self.order, values)
            .expect("moment block length matches the layout")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        }
    }
}

/// Linear row `sum a_i y_i (rel) rhs` over global moment indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Incremental assembly of a multi-measure relaxation.
#[derive(Debug, Clone)]
pub(crate) struct Assembler {
    order: usize,
    blocks: Vec<Block>,
    a: Vec<BlockSparse>,
    rows: Vec<MomentRow>,
    objective: Vec<f64>,
    pub(crate) infos: Vec<RelaxationInfo>,
}

fn psd_block(blocks: &mut Vec<Block>, a: &mut [BlockSparse], s: &MatrixStencil, offset: usize) {
    let bi = blocks.len();
    blocks.push(Block {
        kind: BlockKind::Psd,
        size: s.side(),
    });
    for (i, j, cell) in s.upper_cells() {
        for t in cell {
            a[offset + t.index].push(bi, i, j, -t.coeff);
        }
    }
}

impl Assembler {
    pub(crate) fn new(order: usize) -> Self {
        Assembler {
            order,
            blocks: Vec::new(),
            a: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            infos: Vec::new(),
        }
    }

    /// Add a measure supported on `set`: its moment block, localizers and
    /// equality rows. Returns the measure's index.
    pub(crate) fn add_measure(
        &mut self,
        name: &str,
        set: &SemialgebraicSet,
    ) -> Result<usize, RelaxError> {
        let r = self.order;
        let n = set.nvars();
        if let Some(b) = &set.ball_radius {
            if !b.is_positive() {
                return Err(RelaxError::BadBall);
            }
        }
        let r_x = set.r_x();
        if r < r_x {
            return Err(RelaxError::OrderTooLow { r, r_x });
        }
        for p in set.inequalities.iter().chain(&set.equalities) {
            if p.nvars() != n {
                return Err(RelaxError::Dimension {
                    what: format!("support of `{name}`"),
                    expected: n,
                    got: p.nvars(),
                });
            }
        }
        let dim = monomial_count(n, 2 * r)?;
        let offset = self.a.len();
        self.a.resize(offset + dim, BlockSparse::new());
        self.objective.resize(offset + dim, 0.0);

        let ineqs = set.all_inequalities();
        let r_k: Vec<usize> = ineqs.iter().map(half_degree).collect();
        let mut sizes = Vec::new();
        let m = moment_matrix_stencil(n, r);
        sizes.push(m.side());
        psd_block(&mut self.blocks, &mut self.a, &m, offset);
        for (g, &rk) in ineqs.iter().zip(&r_k) {
            let s = localizing_matrix_stencil(g, r - rk);
            sizes.push(s.side());
            psd_block(&mut self.blocks, &mut self.a, &s, offset);
        }

        // each distinct cell l(h x^g), |g| <= 2(r - r_k), of M_{r-r_k}(h y) is pinned
        // to zero. When deg h > r the moment matrix cannot imply the shifts that
        // still fit in degree 2r, so those are pinned as well.
        let mut eq_rows = 0;
        for h in &set.equalities {
            let d = if h.degree() > r {
                2 * r - h.degree()
            } else {
                2 * (r - half_degree(h))
            };
            for g in MonomialBasis::new(n, d).exponents() {
                let terms = riesz_terms(&h.shift(g), offset);
                if !terms.is_empty() {
                    self.rows.push(MomentRow {
                        terms,
                        relation: Relation::Eq,
                        rhs: 0.0,
                    });
                    eq_rows += 1;
                }
            }
        }

        self.infos.push(RelaxationInfo {
            name: name.to_string(),
            order: r,
            r_k,
            r_x,
            block_sizes: sizes,
            moment_dim: dim,
            offset,
            nvars: n,
            compactness_warning: !set.compactness_certified(),
            equality_rows: eq_rows,
        });
        Ok(self.infos.len() - 1)
    }

    /// `sum_a p_a y_a` for polynomial `p` over measure `mi`.
    pub(crate) fn linear_form(
        &self,
        mi: usize,
        p: &Polynomial,
        what: &str,
    ) -> Result<Vec<(usize, f64)>, RelaxError> {
        let info = &self.infos[mi];
        if p.nvars() != info.nvars {
            return Err(RelaxError::Dimension {
                what: what.to_string(),
                expected: info.nvars,
                got: p.nvars(),
            });
        }
        if p.degree() > 2 * self.order {
            return Err(RelaxError::DegreeTooHigh {
                what: what.to_string(),
                degree: p.degree(),
                max: 2 * self.order,
            });
        }
        Ok(riesz_terms(p, info.offset))
    }

    pub(crate) fn add_row(&mut self, mut row: MomentRow, what: &str) -> Result<(), RelaxError> {
        row.terms = merge_terms(row.terms);
        if row.terms.is_empty() {
            let ok = match row.relation {
                Relation::Eq => row.rhs == 0.0,
                Relation::Le => row.rhs >= 0.0,
                Relation::Ge => row.rhs <= 0.0,
            };
            return if ok {
                Ok(())
            } else {
                Err(RelaxError::Inconsistent(what.to_string()))
            };
        }
        self.rows.push(row);
        Ok(())
    }

    /// Accumulate `c'y` into the moment objective (always minimized here).
    pub(crate) fn add_objective(&mut self, terms: &[(usize, f64)], scale: f64) {
        for &(i, v) in terms {
            self.objective[i] += scale * v;
        }
    }

    /// Finish: `min c'y` becomes the dual `max (-c)'y`.
    pub(crate) fn finish(self) -> (ConicProgram, Vec<RelaxationInfo>, Vec<f64>) {
        let Assembler {
            mut blocks,
            mut a,
            rows,
            objective,
            infos,
            ..
        } = self;
        let mut c = BlockSparse::new();
        let n_eq = rows.iter().filter(|r| r.relation == Relation::Eq).count();
        let n_in = rows.len() - n_eq;
        let zero_block = blocks.len();
        if n_eq > 0 {
            blocks.push(Block {
                kind: BlockKind::Zero,
                size: n_eq,
            });
        }
        let lin_block = blocks.len();
        if n_in > 0 {
            blocks.push(Block {
                kind: BlockKind::Nonneg,
                size: n_in,
            });
        }
        let (mut ie, mut ii) = (0, 0);
        for row in &rows {
            // Z_j = C_j - sum_i y_i A_ij must equal rhs - a'y (eq, le) or a'y - rhs (ge)
            let (blk, pos, sign) = match row.relation {
                Relation::Eq => {
                    ie += 1;
                    (zero_block, ie - 1, 1.0)
                }
                Relation::Le => {
                    ii += 1;
                    (lin_block, ii - 1, 1.0)
                }
                Relation::Ge => {
                    ii += 1;
                    (lin_block, ii - 1, -1.0)
                }
            };
            c.push(blk, pos, pos, sign * row.rhs);
            for &(i, v) in &row.terms {
                a[i].push(blk, pos, pos, sign * v);
            }
        }
        let b: Vec<f64> = objective.iter().map(|v| -v).collect();
        let mut p = ConicProgram::new(blocks);
        p.c = c;
        for (ak, bk) in a.into_iter().zip(b) {
            p.add_constraint(ak, bk);
        }
        (p, infos, objective)
    }
}

fn merge_terms(mut t: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    t.sort_by_key(|x| x.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
    for (i, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    out.retain(|x| x.1 != 0.0);
    out
}

fn riesz_terms(p: &Polynomial, offset: usize) -> Vec<(usize, f64)> {
    p.terms()
        .map(|(e, c)| (offset + crate::poly::grlex_index(e), rat_to_f64(c)))
        .collect()
}

/// Assembled relaxation with its index maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub program: ConicProgram,
    pub info: Vec<RelaxationInfo>,
    /// moment-objective coefficients `c` (the program maximizes `-c'y`)
    pub objective: Vec<f64>,
    /// `+1` for minimization, `-1` when a maximization was negated
    pub sense: f64,
}

/// Solution of an assembled relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSolution {
    /// relaxation value in the problem's own sense
    pub bound: f64,
    /// one moment vector per measure
    pub moments: Vec<MomentVector>,
    pub sdp: SdpSolution,
}

impl RelaxationSolution {
    pub fn status(&self) -> SdpStatus {
        self.sdp.status
    }
}

impl Relaxation {
    pub fn solve(&self, opts: &SolveOptions) -> Result<RelaxationSolution, RelaxError> {
        let sdp = sdp::solve(&self.program, opts)?;
        let cy: f64 = self.objective.iter().zip(&sdp.y).map(|(c, y)| c * y).sum();
        Ok(RelaxationSolution {
            bound: self.sense * cy,
            moments: self.info.iter().map(|i| i.moments(&sdp.y)).collect(),
            sdp,
        })
    }
}

/// Order-r relaxation of a polynomial optimization problem.
pub fn build_relaxation(pop: &PopProblem, r: usize) -> Result<Relaxation, RelaxError> {
    let r_x = pop.r_x();
    if r < r_x {
        return Err(RelaxError::OrderTooLow { r, r_x });
    }
    let mut asm = Assembler::new(r);
    let mi = asm.add_measure("x", &pop.set)?;
    let mass = asm.linear_form(mi, &Polynomial::one(pop.set.nvars()), "mass")?;
    asm.add_row(
        MomentRow {
            terms: mass,
            relation: Relation::Eq,
            rhs: 1.0,
        },
        "mass",
    )?;
    let obj = asm.linear_form(mi, &pop.objective, "objective")?;
    asm.add_objective(&obj, 1.0);
    let (program, info, objective) = asm.finish();
    Ok(Relaxation {
        program,
        info,
        objective,
        sense: 1.0,
    })
}

/// Lower bound `p*_r` and the optimal moment vector; non-optimal solver
/// statuses are errors.
pub fn bound_and_moments(
    pop: &PopProblem,
    r: usize,
    opts: &SolveOptions,
) -> Result<(f64, MomentVector), RelaxError> {
    let sol = build_relaxation(pop, r)?.solve(opts)?;
    if sol.status() != SdpStatus::Optimal {
        return Err(RelaxError::Solver(sol.status()));
    }
    let y = sol.moments.into_iter().next().expect("one measure");
    Ok((sol.bound, y))
}

/// Moment vector of `delta_x` padded to `r`, for feasibility checks.
pub fn dirac_moments(x: &[f64], r: usize) -> MomentVector {
    MomentVector::from_fn(x.len(), 2 * r, |e: &Exponent| e.eval(x))
}

/// Evaluate every PSD block of `relax` at the given moments; returns the
/// smallest eigenvalue found.
pub fn min_block_eigenvalue(relax: &Relaxation, y: &[f64]) -> f64 {
    let z = relax.program.dual_slack(y);
    let mut m = f64::INFINITY;
    for (bl, v) in relax.program.blocks.iter().zip(&z.blocks) {
        if bl.kind == BlockKind::Psd {
            if let Some(mat) = v.as_matrix() {
                m = m.min(sdp::psd_project_check(mat, 0.0).0);
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_polynomial;
    use crate::poly::rat;

    fn p(s: &str, v: &VarSpace) -> Polynomial {
        parse_polynomial(s, v).unwrap()
    }

    fn polyopt() -> PopProblem {
        let v = VarSpace::indexed("x", 2);
        let mut set = SemialgebraicSet::new(v.clone());
        set.inequalities = vec![
            p("3 + 2*x2 - x1^2 - x2^2", &v),
            p("-x1 - x2 - x1*x2", &v),
            p("1 + x1*x2", &v),
        ];
        PopProblem {
            objective: p("-x2", &v),
            set,
        }
    }

    #[test]
    fn half_degrees() {
        let v = VarSpace::indexed("x", 1);
        assert_eq!(half_degree(&p("x1^3", &v)), 2);
        assert_eq!(half_degree(&p("x1^2 + 1", &v)), 1);
        assert_eq!(half_degree(&p("5", &v)), 0);
    }

    #[test]
    fn polyopt_block_structure() {
        let r1 = build_relaxation(&polyopt(), 1).unwrap();
        assert_eq!(r1.info[0].block_sizes, vec![3, 1, 1, 1]);
        assert_eq!(r1.program.m(), 6);
        let r2 = build_relaxation(&polyopt(), 2).unwrap();
        assert_eq!(r2.info[0].block_sizes, vec![6, 3, 3, 3]);
        assert_eq!(r2.program.m(), 15);
        assert!(!r2.info[0].compactness_warning);
    }

    #[test]
    fn order_below_r_x_is_rejected() {
        let v = VarSpace::indexed("x", 1);
        let mut set = SemialgebraicSet::new(v.clone());
        set.inequalities.push(p("1 - x1^4", &v));
        let pop = PopProblem {
            objective: p("x1", &v),
            set,
        };
        assert_eq!(
            build_relaxation(&pop, 1).unwrap_err(),
            RelaxError::OrderTooLow { r: 1, r_x: 2 }
        );
    }

    #[test]
    fn polyopt_bounds() {
        let o = SolveOptions::default();
        let (b1, _) = bound_and_moments(&polyopt(), 1, &o).unwrap();
        assert!((b1 + 2.0).abs() < 1e-6, "{b1}");
        let (b2, y) = bound_and_moments(&polyopt(), 2, &o).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((b2 + golden).abs() < 1e-6, "{b2}");
        let x = y.first_order();
        assert!((x[0] - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-4);
        assert!((x[1] - golden).abs() < 1e-4);

        let cert = crate::extract::certify(&y, &polyopt().set, 2, 1e-6).unwrap();
        assert_eq!(cert.ranks, vec![1, 1, 1]);
        assert!(cert.flat, "{:?}", cert.note);
        assert_eq!(cert.atoms.len(), 1);
        assert!((cert.atoms[0].point[1] - golden).abs() < 1e-4);
        assert!(cert.residual < 1e-5, "{}", cert.residual);
        // r = 1 is not flat: M_1 has rank above M_0
        let (_, y1) = bound_and_moments(&polyopt(), 1, &o).unwrap();
        let c1 = crate::extract::certify(&y1, &polyopt().set, 1, 1e-6).unwrap();
        assert!(!c1.flat);
    }

    #[test]
    fn ball_only_square() {
        let v = VarSpace::indexed("x", 1);
        let mut set = SemialgebraicSet::new(v.clone());
        set.ball_radius = Some(rat(4, 1));
        let pop = PopProblem {
            objective: p("x1^2", &v),
            set,
        };
        let rl = build_relaxation(&pop, 1).unwrap();
        assert_eq!(rl.info[0].block_sizes, vec![2, 1]);
        assert!(!rl.info[0].compactness_warning);
        let s = rl.solve(&SolveOptions::default()).unwrap();
        assert_eq!(s.status(), SdpStatus::Optimal);
        assert!(s.bound.abs() < 1e-7);
    }

    #[test]
    fn orthant_corner() {
        let v = VarSpace::indexed("x", 2);
        let mut set = SemialgebraicSet::new(v.clone());
        set.inequalities = vec![p("x1", &v), p("x2", &v)];
        set.ball_radius = Some(rat(1, 1));
        let pop = PopProblem {
            objective: p("x1 + x2", &v),
            set,
        };
        let (b, _) = bound_and_moments(&pop, 1, &SolveOptions::default()).unwrap();
        assert!(b.abs() < 1e-7, "{b}");
    }

    #[test]
    fn equality_rows_are_deduplicated() {
        let v = VarSpace::indexed("x", 2);
        let mut set = SemialgebraicSet::new(v.clone());
        set.equalities.push(p("x1 + x2 - 1", &v));
        set.ball_radius = Some(rat(2, 1));
        let pop = PopProblem {
            objective: p("x1^2 + x2^2", &v),
            set,
        };
        let rl = build_relaxation(&pop, 2).unwrap();
        // g ranges over monomials of degree <= 2(2 - 1) = 2
        assert_eq!(rl.info[0].equality_rows, 6);
        let s = rl.solve(&SolveOptions::default()).unwrap();
        assert_eq!(s.status(), SdpStatus::Optimal);
        assert!((s.bound - 0.5).abs() < 1e-6, "{}", s.bound);
    }

    #[test]
    fn feasible_diracs_satisfy_blocks() {
        let pop = polyopt();
        let rl = build_relaxation(&pop, 2).unwrap();
        for x in [[-0.5, 0.5], [0.0, 0.0], [-1.0, 0.5]] {
            assert!(pop.set.contains(&x, 0.0).unwrap());
            let y = dirac_moments(&x, 2);
            assert!(min_block_eigenvalue(&rl, y.values()) > -1e-9);
        }
    }
}
