//! Solve reports: `key = value` lines followed by one `[moments NAME]` table
//! per measure, each row `alpha y[alpha]` with the exponent written as
//! comma-separated powers. Numbers carry 12 significant digits, so a report
//! reads back through [`SectionFile`](crate::textfile::SectionFile).
//! [`solve_problem`] builds the report for any problem file.

use std::fmt::{Display, Write};

use crate::extract::{certify_with, Certificate, DEFAULT_RANK_TOL};
use crate::gmp::{build_gmp_relaxation, minimal_order, GmpProblem};
use crate::moments::MomentVector;
use crate::poly::{MonomialBasis, VarSpace};
use crate::problem::Problem;
use crate::relaxation::{build_relaxation, PopProblem, RelaxError};
use crate::sdp::{self, SdpSolution, SdpStatus, SolveOptions};
use crate::spectra::defining_polynomials;
use crate::textfile::fmt_num;
use crate::Error;

/// Largest order tried when a GMP problem does not name one.
pub const MAX_AUTO_ORDER: usize = 12;
/// Relative objective slack allowed by the least-mass selection.
pub const SELECT_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
    pub tables: Vec<(String, MomentVector)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, v: f64) {
        self.push(key, fmt_num(v));
    }

    pub fn nums(&mut self, key: impl Into<String>, v: &[f64]) {
        let s: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
        self.push(key, s.join(" "));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn table(&mut self, name: impl Into<String>, y: MomentVector) {
        self.tables.push((name.into(), y));
    }

    /// Solver status, iteration count, objectives and residuals.
    pub fn solver(&mut self, sol: &SdpSolution) {
        self.push("status", sol.status.name());
        self.push("iterations", sol.iterations);
        self.num("primal_obj", sol.primal_obj);
        self.num("dual_obj", sol.dual_obj);
        self.num("gap", sol.gap);
        self.num("primal_residual", sol.primal_residual);
        self.num("dual_residual", sol.dual_residual);
    }

    /// Certificate fields, each key prefixed by `prefix` (empty or `name.`).
    pub fn certificate(&mut self, prefix: &str, c: &Certificate) {
        self.push(format!("{prefix}r_x"), c.r_x);
        self.num(format!("{prefix}rank_tol"), c.tol);
        let ranks: Vec<String> = c.ranks.iter().map(ToString::to_string).collect();
        self.push(format!("{prefix}ranks"), ranks.join(" "));
        self.push(format!("{prefix}flat"), c.flat);
        self.push(format!("{prefix}atoms"), c.atoms.len());
        for (i, a) in c.atoms.iter().enumerate() {
            self.nums(format!("{prefix}atom{}", i + 1), &a.point);
            self.num(format!("{prefix}weight{}", i + 1), a.weight);
        }
        if c.flat {
            self.num(format!("{prefix}residual"), c.residual);
            self.num(format!("{prefix}moment_residual"), c.moment_residual);
        }
        if let Some(n) = &c.note {
            self.push(format!("{prefix}note"), n);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (name, y) in &self.tables {
            let _ = writeln!(out, "[moments {name}]");
            let basis = MonomialBasis::new(y.nvars(), y.degree());
            for (e, v) in basis.exponents().iter().zip(y.values()) {
                let a: Vec<String> = e.powers().iter().map(ToString::to_string).collect();
                let _ = writeln!(out, "{} {}", a.join(","), fmt_num(*v));
            }
        }
        out
    }
}

/// How [`solve_problem`] treats a problem file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveConfig {
    /// relaxation order; `None` picks the smallest valid one
    pub order: Option<usize>,
    pub options: SolveOptions,
    /// rank test and atom extraction on every moment vector
    pub extract: bool,
    /// seed of the random combination used by extraction
    pub seed: u64,
    /// GMP only: report the optimal point with the least mass on this measure
    pub min_mass: Option<String>,
}

/// Order to use for `pop`, checked against its minimal order.
pub fn pop_order(pop: &PopProblem, order: Option<usize>) -> Result<usize, RelaxError> {
    let r_x = pop.r_x();
    match order {
        Some(r) if r < r_x => Err(RelaxError::OrderTooLow { r, r_x }),
        Some(r) => Ok(r),
        None => Ok(r_x),
    }
}

fn pop_report(pop: &PopProblem, cfg: &SolveConfig, rep: &mut Report) -> Result<SdpStatus, Error> {
    let r = pop_order(pop, cfg.order)?;
    let sol = build_relaxation(pop, r)?.solve(&cfg.options)?;
    rep.push("order", r);
    rep.num("bound", sol.bound);
    rep.solver(&sol.sdp);
    if cfg.extract {
        let c = certify_with(&sol.moments[0], &pop.set, r, DEFAULT_RANK_TOL, cfg.seed)?;
        rep.certificate("", &c);
    }
    rep.table("x", sol.moments[0].clone());
    Ok(sol.status())
}

fn gmp_report(g: &GmpProblem, cfg: &SolveConfig, rep: &mut Report) -> Result<SdpStatus, Error> {
    let r = match cfg.order {
        Some(r) => r,
        None => minimal_order(g, MAX_AUTO_ORDER)?,
    };
    let rl = build_gmp_relaxation(g, r)?;
    rep.push("order", r);
    let sol = match &cfg.min_mass {
        None => {
            let sol = rl.solve(&cfg.options)?;
            rep.num("bound", sol.bound);
            rep.solver(&sol.sdp);
            sol
        }
        Some(m) => {
            let sel = rl.solve_min_mass(m, SELECT_SLACK, &cfg.options)?;
            rep.num("bound", sel.optimal.bound);
            rep.solver(&sel.optimal.sdp);
            rep.push("selected.measure", m);
            rep.push("selected.status", sel.selected.status().name());
            rep.num("selected.objective", sel.selected.bound);
            sel.selected
        }
    };
    for (name, y) in &sol.moments {
        rep.num(format!("{name}.mass"), y.mass());
    }
    if cfg.extract {
        for (name, y) in &sol.moments {
            let m = g
                .measure(name)
                .expect("solution measures come from the problem");
            let c = certify_with(y, &m.support, r, DEFAULT_RANK_TOL, cfg.seed)?;
            rep.certificate(&format!("{name}."), &c);
        }
    }
    for (name, y) in &sol.moments {
        rep.table(name.clone(), y.clone());
    }
    Ok(sol.status())
}

/// Solve any problem kind and collect the report. A pencil is not solved:
/// its report lists the defining polynomials. The status is that of the
/// reported solve.
pub fn solve_problem(problem: &Problem, cfg: &SolveConfig) -> Result<(Report, SdpStatus), Error> {
    cfg.options.validate()?;
    if cfg.min_mass.is_some() && !matches!(problem, Problem::Gmp(_)) {
        return Err(Error::Usage(
            "least-mass selection applies to gmp problems".into(),
        ));
    }
    let mut rep = Report::new();
    rep.push("kind", problem.kind());
    let status = match problem {
        Problem::Pop(pop) => pop_report(pop, cfg, &mut rep)?,
        Problem::Gmp(g) => gmp_report(g, cfg, &mut rep)?,
        Problem::Sdp(p) => {
            let sol = sdp::solve(p, &cfg.options)?;
            rep.num("bound", sol.primal_obj);
            rep.solver(&sol);
            rep.nums("y", &sol.y);
            sol.status
        }
        Problem::Pencil(p) => {
            let fs = defining_polynomials(p)?;
            let vars = VarSpace::indexed("x", p.nvars());
            rep.push("side", p.side());
            rep.push("nvars", p.nvars());
            for (k, f) in fs.iter().enumerate() {
                rep.push(format!("f{}", k + 1), f.to_string_with(&vars));
            }
            SdpStatus::Optimal
        }
    };
    Ok((rep, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::Atom;
    use crate::textfile::SectionFile;

    #[test]
    fn layout_reads_back() {
        let mut r = Report::new();
        r.num("bound", -(1.0 + 5f64.sqrt()) / 2.0);
        r.push("flat", true);
        r.table(
            "x",
            MomentVector::from_atoms(2, 1, &[(vec![0.5, -1.0], 1.0)]),
        );
        let text = r.to_text();
        assert_eq!(
            text,
            "bound = -1.61803398875\nflat = true\n[moments x]\n0,0 1\n1,0 0.5\n0,1 -1\n"
        );
        let f = SectionFile::parse(&text).unwrap();
        assert_eq!(f.get("bound").unwrap().text, "-1.61803398875");
        assert_eq!(f.section("moments x").unwrap().lines.len(), 3);
    }

    #[test]
    fn solve_problem_reports() {
        let p =
            Problem::parse("kind = pop\nvars = x\n[objective]\nx\n[constraints]\n1 - x^2 >= 0\n")
                .unwrap();
        let (rep, status) = solve_problem(&p, &SolveConfig::default()).unwrap();
        assert_eq!(status, SdpStatus::Optimal);
        assert_eq!(rep.get("kind"), Some("pop"));
        assert!((rep.get("bound").unwrap().parse::<f64>().unwrap() + 1.0).abs() < 1e-6);
        let cfg = SolveConfig {
            min_mass: Some("x".into()),
            ..SolveConfig::default()
        };
        assert!(matches!(solve_problem(&p, &cfg), Err(Error::Usage(_))));
        let cfg = SolveConfig {
            order: Some(0),
            ..SolveConfig::default()
        };
        let e = solve_problem(&p, &cfg).unwrap_err();
        assert!(e.to_string().contains("r_X = 1"), "{e}");
        assert_eq!(e.solver_status(), None);
    }

    #[test]
    fn certificate_keys() {
        let c = Certificate {
            order: 2,
            r_x: 1,
            tol: 1e-6,
            ranks: vec![1, 1, 1],
            flat: true,
            atoms: vec![Atom {
                point: vec![1.0, 2.0],
                weight: 1.0,
            }],
            residual: 0.0,
            moment_residual: 1e-9,
            note: None,
        };
        let mut r = Report::new();
        r.certificate("mu.", &c);
        assert_eq!(r.get("mu.ranks"), Some("1 1 1"));
        assert_eq!(r.get("mu.atom1"), Some("1 2"));
        assert_eq!(r.get("mu.rank_tol"), Some("1e-06"));
    }
}
