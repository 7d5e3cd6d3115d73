//! Problem files. All four kinds share the sectioned layout of [`textfile`]:
//!
//! ```text
//! kind = pop
//! vars = x1 x2
//! ball = 4                    # optional: 4 - x1^2 - x2^2 >= 0
//! [objective]
//! -x2
//! [constraints]
//! 3 + 2*x2 - x1^2 - x2^2 >= 0
//! x1 + x2 + 1 = 0
//! ```
//!
//! A `gmp` file declares measures in `[measure NAME]` sections (a `vars = ...`
//! line, an optional `ball = R`, then constraints), moment constraints such as
//! `mu0[1] + muT[x^2] = 1`, an objective made of `mu[x^2]` terms, and
//! optionally a `[dynamics]` section plus one `[cell NAME]` section per vector
//! field with lines `x' = -x`. `sdp` files are read by [`crate::sdp::read_program_text`],
//! `pencil` files list the matrices `F0..Fm` in sections `[F0]`, `[F1]`, ...
//!
//! [`textfile`]: crate::textfile

use std::fmt::Write;
use std::path::Path;

use num_rational::BigRational;

use crate::gmp::{
    Cell, DynamicsSpec, Endpoint, GmpProblem, Horizon, MeasureDecl, MomentConstraint, Sense,
};
use crate::parse::{parse_polynomial, parse_rational, ParseError};
use crate::poly::{Polynomial, VarSpace};
use crate::relaxation::{PopProblem, Relation, SemialgebraicSet};
use crate::sdp::ConicProgram;
use crate::sdp::{read_program_text, write_program};
use crate::spectra::Pencil;
use crate::textfile::{tokens, Line, Section, SectionFile};

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Pop(PopProblem),
    Gmp(GmpProblem),
    Sdp(ConicProgram),
    Pencil(Pencil),
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Pop(_) => "pop",
            Problem::Gmp(_) => "gmp",
            Problem::Sdp(_) => "sdp",
            Problem::Pencil(_) => "pencil",
        }
    }

    pub fn parse(text: &str) -> Result<Problem, ParseError> {
        let f = SectionFile::parse(text)?;
        let kind = f.require("kind")?;
        match kind.text.as_str() {
            "pop" => parse_pop(&f).map(Problem::Pop),
            "gmp" => parse_gmp(&f).map(Problem::Gmp),
            "sdp" => read_program_text(text).map(Problem::Sdp),
            "pencil" => parse_pencil(&f).map(Problem::Pencil),
            other => Err(kind.error(format!(
                "unknown kind `{other}` (expected pop, gmp, sdp or pencil)"
            ))),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Problem::Pop(p) => write_pop(p),
            Problem::Gmp(g) => write_gmp(g),
            Problem::Sdp(p) => write_program(p),
            Problem::Pencil(p) => write_pencil(p),
        }
    }
}

pub fn read_problem(path: &Path) -> Result<Problem, crate::Error> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    Ok(Problem::parse(&text)?)
}

/// Parse a polynomial that starts `start` bytes into `line.text`.
fn poly_at(line: &Line, start: usize, s: &str, vars: &VarSpace) -> Result<Polynomial, ParseError> {
    parse_polynomial(s, vars).map_err(|e| e.at_offset(line.number, line.col - 1 + start))
}

fn rational_at(line: &Line, start: usize, s: &str) -> Result<BigRational, ParseError> {
    parse_rational(s.trim()).ok_or_else(|| {
        ParseError::new(
            line.number,
            line.col + start,
            format!("expected a rational number, found `{}`", s.trim()),
        )
    })
}

fn var_space(line: &Line) -> Result<VarSpace, ParseError> {
    let names: Vec<&str> = tokens(line).into_iter().map(|(_, t)| t).collect();
    if names.is_empty() {
        return Err(line.error("no variables declared"));
    }
    for (col, t) in tokens(line) {
        let ok = t
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok {
            return Err(ParseError::new(
                line.number,
                col,
                format!("`{t}` is not a variable name"),
            ));
        }
    }
    VarSpace::new(names).map_err(|e| line.error(e.to_string()))
}

/// Position and relation of the first `>=`, `<=` or `=` outside brackets.
fn find_relation(s: &str) -> Option<(usize, usize, Relation)> {
    let b = s.as_bytes();
    let mut depth = 0i32;
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'[' => depth += 1,
            b']' => depth -= 1,
            b'>' | b'<' if depth == 0 && b.get(i + 1) == Some(&b'=') => {
                let rel = if b[i] == b'>' {
                    Relation::Ge
                } else {
                    Relation::Le
                };
                return Some((i, 2, rel));
            }
            b'=' if depth == 0 => return Some((i, 1, Relation::Eq)),
            _ => {}
        }
        i += 1;
    }
    None
}

/// `lhs (rel) rhs` as `g >= 0` or `h = 0`.
enum SetConstraint {
    Ineq(Polynomial),
    Eq(Polynomial),
}

fn parse_set_constraint(line: &Line, vars: &VarSpace) -> Result<SetConstraint, ParseError> {
    let t = &line.text;
    let (at, len, rel) =
        find_relation(t).ok_or_else(|| line.error("expected `>=`, `<=` or `=`"))?;
    let lhs = poly_at(line, 0, &t[..at], vars)?;
    let rhs = poly_at(line, at + len, &t[at + len..], vars)?;
    let d = lhs.sub(&rhs).map_err(|e| line.error(e.to_string()))?;
    Ok(match rel {
        Relation::Ge => SetConstraint::Ineq(d),
        Relation::Le => SetConstraint::Ineq(d.neg()),
        Relation::Eq => SetConstraint::Eq(d),
    })
}

/// Read `ball = R`, then constraint lines, into a set over `vars`.
fn parse_set<'a>(
    vars: VarSpace,
    ball: Option<&Line>,
    lines: impl Iterator<Item = &'a Line>,
) -> Result<SemialgebraicSet, ParseError> {
    let mut set = SemialgebraicSet::new(vars);
    if let Some(b) = ball {
        let r = rational_at(b, 0, &b.text)?;
        if r <= BigRational::from_integer(0.into()) {
            return Err(b.error("ball radius constant must be positive"));
        }
        set.ball_radius = Some(r);
    }
    for line in lines {
        match parse_set_constraint(line, &set.space)? {
            SetConstraint::Ineq(g) => set.inequalities.push(g),
            SetConstraint::Eq(h) => set.equalities.push(h),
        }
    }
    Ok(set)
}

fn sum_lines(sec: Option<&Section>, vars: &VarSpace) -> Result<Polynomial, ParseError> {
    let mut p = Polynomial::zero(vars.len());
    for line in sec.map(|s| s.lines.as_slice()).unwrap_or_default() {
        let q = poly_at(line, 0, &line.text, vars)?;
        p = p.add(&q).map_err(|e| line.error(e.to_string()))?;
    }
    Ok(p)
}

fn parse_pop(f: &SectionFile) -> Result<PopProblem, ParseError> {
    f.check_known(&["kind", "vars", "ball"], &["objective", "constraints"])?;
    let vars = var_space(f.require("vars")?)?;
    let objective = sum_lines(f.section("objective"), &vars)?;
    let lines = f
        .section("constraints")
        .map(|s| s.lines.as_slice())
        .unwrap_or_default();
    let set = parse_set(vars, f.get("ball"), lines.iter())?;
    Ok(PopProblem { objective, set })
}

fn write_set_body(out: &mut String, set: &SemialgebraicSet) {
    for g in &set.inequalities {
        let _ = writeln!(out, "{} >= 0", g.to_string_with(&set.space));
    }
    for h in &set.equalities {
        let _ = writeln!(out, "{} = 0", h.to_string_with(&set.space));
    }
}

fn write_pop(p: &PopProblem) -> String {
    let mut out = String::from("kind = pop\n");
    let _ = writeln!(out, "vars = {}", p.set.space.names().join(" "));
    if let Some(r) = &p.set.ball_radius {
        let _ = writeln!(out, "ball = {r}");
    }
    let _ = writeln!(
        out,
        "[objective]\n{}",
        p.objective.to_string_with(&p.set.space)
    );
    out.push_str("[constraints]\n");
    write_set_body(&mut out, &p.set);
    out
}

/// Terms `name[poly]` joined by `+` or `-`, starting at byte `start` of `line.text`.
fn parse_terms(
    line: &Line,
    start: usize,
    s: &str,
    measures: &[MeasureDecl],
) -> Result<Vec<(String, Polynomial)>, ParseError> {
    let b = s.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    let at = |i: usize| line.col + start + i;
    loop {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        if i == b.len() {
            break;
        }
        let mut neg = false;
        if b[i] == b'+' || b[i] == b'-' {
            neg = b[i] == b'-';
            i += 1;
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
        } else if !out.is_empty() {
            return Err(ParseError::new(
                line.number,
                at(i),
                "expected `+` or `-` between terms",
            ));
        }
        let name_start = i;
        while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
            i += 1;
        }
        let name = &s[name_start..i];
        if name.is_empty() || b.get(i) != Some(&b'[') {
            return Err(ParseError::new(
                line.number,
                at(name_start),
                "expected a term `measure[polynomial]`",
            ));
        }
        let m = measures.iter().find(|m| m.name == name).ok_or_else(|| {
            ParseError::new(
                line.number,
                at(name_start),
                format!("unknown measure `{name}`"),
            )
        })?;
        let close = s[i..]
            .find(']')
            .map(|k| i + k)
            .ok_or_else(|| ParseError::new(line.number, at(i), "missing `]`"))?;
        let mut p = poly_at(line, start + i + 1, &s[i + 1..close], m.vars())?;
        if neg {
            p = p.neg();
        }
        out.push((name.to_string(), p));
        i = close + 1;
    }
    if out.is_empty() {
        return Err(ParseError::new(
            line.number,
            at(0),
            "expected at least one term",
        ));
    }
    Ok(out)
}

fn write_terms(terms: &[(String, Polynomial)], measures: &[MeasureDecl]) -> String {
    let parts: Vec<String> = terms
        .iter()
        .map(|(n, p)| {
            let vars = measures
                .iter()
                .find(|m| m.name == *n)
                .map(|m| m.vars().clone())
                .unwrap_or_else(|| VarSpace::indexed("x", p.nvars()));
            format!("{n}[{}]", p.to_string_with(&vars))
        })
        .collect();
    parts.join(" + ")
}

/// One moment constraint in file syntax, e.g. `mu0[1] + muT[-x] = 0`.
pub fn format_constraint(c: &MomentConstraint, measures: &[MeasureDecl]) -> String {
    format!(
        "{} {} {}",
        write_terms(&c.terms, measures),
        c.relation.symbol(),
        c.rhs
    )
}

fn key_lines(sec: &Section) -> Result<Vec<(String, &Line, usize)>, ParseError> {
    let mut out: Vec<(String, &Line, usize)> = Vec::new();
    for line in &sec.lines {
        let eq = line
            .text
            .find('=')
            .ok_or_else(|| line.error("expected `key = value`"))?;
        let key = line.text[..eq].trim().to_string();
        if out.iter().any(|(k, _, _)| *k == key) {
            return Err(line.error(format!("duplicate key `{key}`")));
        }
        let vstart = eq + 1 + (line.text[eq + 1..].len() - line.text[eq + 1..].trim_start().len());
        out.push((key, line, vstart));
    }
    Ok(out)
}

fn parse_endpoint(line: &Line, start: usize, nstates: usize) -> Result<Endpoint, ParseError> {
    let v = &line.text[start..];
    let mut it = v.split_whitespace();
    match it.next() {
        Some("dirac") => {
            let mut pt = Vec::new();
            let mut off = start + v.find("dirac").unwrap_or(0) + 5;
            for tok in it {
                let k = line.text[off..].find(tok).map_or(off, |k| off + k);
                pt.push(rational_at(line, k, tok)?);
                off = k + tok.len();
            }
            if pt.len() != nstates {
                return Err(ParseError::new(
                    line.number,
                    line.col + start,
                    format!(
                        "dirac endpoint needs {nstates} coordinates, found {}",
                        pt.len()
                    ),
                ));
            }
            Ok(Endpoint::Dirac(pt))
        }
        Some(name) if it.next().is_none() => Ok(Endpoint::Measure(name.to_string())),
        _ => Err(ParseError::new(
            line.number,
            line.col + start,
            "expected a measure name or `dirac v1 v2 ...`",
        )),
    }
}

fn names_of(line: &Line, start: usize) -> Vec<String> {
    line.text[start..]
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn parse_dynamics(f: &SectionFile, sec: &Section) -> Result<DynamicsSpec, ParseError> {
    let keys = key_lines(sec)?;
    let get = |k: &str| {
        keys.iter()
            .find(|(key, _, _)| key == k)
            .map(|(_, l, s)| (*l, *s))
    };
    for (k, line, _) in &keys {
        if ![
            "time",
            "states",
            "controls",
            "horizon",
            "initial",
            "terminal",
            "lagrangian",
            "terminal_cost",
        ]
        .contains(&k.as_str())
        {
            return Err(line.error(format!("unknown dynamics key `{k}`")));
        }
    }
    let time = get("time").map(|(l, s)| names_of(l, s));
    if let (Some(t), Some((l, s))) = (&time, get("time")) {
        if t.len() != 1 {
            return Err(ParseError::new(
                l.number,
                l.col + s,
                "`time` takes one variable name",
            ));
        }
    }
    let (sl, ss) = get("states")
        .ok_or_else(|| ParseError::new(sec.line, 1, "dynamics need `states = ...`"))?;
    let states = names_of(sl, ss);
    let controls = get("controls")
        .map(|(l, s)| names_of(l, s))
        .unwrap_or_default();
    let st: Vec<&str> = states.iter().map(String::as_str).collect();
    let ct: Vec<&str> = controls.iter().map(String::as_str).collect();
    let mut d = DynamicsSpec::new(time.as_ref().map(|t| t[0].as_str()), &st, &ct)
        .map_err(|e| ParseError::new(sec.line, 1, e.to_string()))?;
    if let Some((l, s)) = get("horizon") {
        d.horizon = match l.text[s..].trim() {
            "free" => Horizon::Free,
            v => Horizon::Fixed(rational_at(l, s, v)?),
        };
    }
    let (il, is) = get("initial")
        .ok_or_else(|| ParseError::new(sec.line, 1, "dynamics need `initial = ...`"))?;
    d.initial = parse_endpoint(il, is, states.len())?;
    let (tl, ts) = get("terminal")
        .ok_or_else(|| ParseError::new(sec.line, 1, "dynamics need `terminal = ...`"))?;
    d.terminal = parse_endpoint(tl, ts, states.len())?;
    if let Some((l, s)) = get("lagrangian") {
        d.lagrangian = Some(poly_at(l, s, &l.text[s..], &d.space)?);
    }
    if let Some((l, s)) = get("terminal_cost") {
        d.terminal_cost = Some(poly_at(l, s, &l.text[s..], &d.space)?);
    }
    for c in f.sections.iter().filter(|s| s.name.starts_with("cell ")) {
        let measure = c.name["cell ".len()..].trim().to_string();
        let mut rhs: Vec<Option<Polynomial>> = vec![None; states.len()];
        for line in &c.lines {
            let eq = line
                .text
                .find('=')
                .ok_or_else(|| line.error("expected `state' = polynomial`"))?;
            let lhs = line.text[..eq].trim();
            let name = lhs
                .strip_suffix('\'')
                .ok_or_else(|| line.error("left-hand side must be a derivative such as `x'`"))?;
            let k = states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| line.error(format!("`{name}` is not a state")))?;
            if rhs[k].is_some() {
                return Err(line.error(format!("`{name}'` given twice")));
            }
            rhs[k] = Some(poly_at(line, eq + 1, &line.text[eq + 1..], &d.space)?);
        }
        let f: Option<Vec<Polynomial>> = rhs.into_iter().collect();
        let f = f.ok_or_else(|| {
            ParseError::new(
                c.line,
                1,
                format!("cell `{measure}` must give every state derivative"),
            )
        })?;
        d.cells.push(Cell { measure, f });
    }
    Ok(d)
}

fn parse_gmp(f: &SectionFile) -> Result<GmpProblem, ParseError> {
    for (k, line) in &f.header {
        if !["kind", "sense"].contains(&k.as_str()) {
            return Err(ParseError::new(
                line.number,
                1,
                format!("unknown header key `{k}`"),
            ));
        }
    }
    let sense = match f.get("sense") {
        None => Sense::Min,
        Some(l) if l.text == "min" => Sense::Min,
        Some(l) if l.text == "max" => Sense::Max,
        Some(l) => return Err(l.error("sense must be `min` or `max`")),
    };
    let mut seen: Vec<&str> = Vec::new();
    for s in &f.sections {
        let known = ["constraints", "objective", "dynamics"].contains(&s.name.as_str())
            || s.name.starts_with("measure ")
            || s.name.starts_with("cell ");
        if !known {
            return Err(ParseError::new(
                s.line,
                1,
                format!("unknown section `[{}]`", s.name),
            ));
        }
        if seen.contains(&s.name.as_str()) {
            return Err(ParseError::new(
                s.line,
                1,
                format!("duplicate section `[{}]`", s.name),
            ));
        }
        seen.push(&s.name);
    }

    let mut measures = Vec::new();
    for s in f.sections.iter().filter(|s| s.name.starts_with("measure ")) {
        let name = s.name["measure ".len()..].trim();
        let mut vars = None;
        let mut ball = None;
        let mut rest = Vec::new();
        for line in &s.lines {
            let key = line
                .text
                .split_once('=')
                .map(|(k, _)| k.trim())
                .filter(|_| find_relation(&line.text).map(|r| r.1) == Some(1));
            match key {
                Some("vars") | Some("ball") => {
                    let eq = line.text.find('=').unwrap_or(0);
                    let vstart = eq
                        + 1
                        + (line.text[eq + 1..].len() - line.text[eq + 1..].trim_start().len());
                    let value = Line {
                        number: line.number,
                        col: line.col + vstart,
                        text: line.text[vstart..].to_string(),
                    };
                    if key == Some("vars") {
                        vars = Some(var_space(&value)?);
                    } else {
                        ball = Some(value);
                    }
                }
                _ => rest.push(line),
            }
        }
        let vars = vars.ok_or_else(|| {
            ParseError::new(s.line, 1, format!("measure `{name}` needs `vars = ...`"))
        })?;
        measures.push(MeasureDecl::new(
            name,
            parse_set(vars, ball.as_ref(), rest.into_iter())?,
        ));
    }

    let mut constraints = Vec::new();
    for line in f
        .section("constraints")
        .map(|s| s.lines.as_slice())
        .unwrap_or_default()
    {
        let t = &line.text;
        let (at, len, relation) =
            find_relation(t).ok_or_else(|| line.error("expected `>=`, `<=` or `=`"))?;
        let terms = parse_terms(line, 0, &t[..at], &measures)?;
        let rhs = rational_at(line, at + len, &t[at + len..])?;
        constraints.push(MomentConstraint {
            terms,
            rhs,
            relation,
        });
    }
    let mut objective = Vec::new();
    for line in f
        .section("objective")
        .map(|s| s.lines.as_slice())
        .unwrap_or_default()
    {
        objective.extend(parse_terms(line, 0, &line.text, &measures)?);
    }
    let dynamics = match f.section("dynamics") {
        Some(sec) => Some(parse_dynamics(f, sec)?),
        None => {
            if let Some(c) = f.sections.iter().find(|s| s.name.starts_with("cell ")) {
                return Err(ParseError::new(
                    c.line,
                    1,
                    "cell sections need a [dynamics] section",
                ));
            }
            None
        }
    };
    Ok(GmpProblem {
        measures,
        constraints,
        objective,
        sense,
        dynamics,
    })
}

fn write_endpoint(e: &Endpoint) -> String {
    match e {
        Endpoint::Measure(n) => n.clone(),
        Endpoint::Dirac(pt) => {
            let v: Vec<String> = pt.iter().map(ToString::to_string).collect();
            format!("dirac {}", v.join(" "))
        }
    }
}

fn write_gmp(g: &GmpProblem) -> String {
    let mut out = String::from("kind = gmp\n");
    let _ = writeln!(
        out,
        "sense = {}",
        if g.sense == Sense::Min { "min" } else { "max" }
    );
    for m in &g.measures {
        let _ = writeln!(out, "[measure {}]", m.name);
        let _ = writeln!(out, "vars = {}", m.vars().names().join(" "));
        if let Some(r) = &m.support.ball_radius {
            let _ = writeln!(out, "ball = {r}");
        }
        write_set_body(&mut out, &m.support);
    }
    if !g.constraints.is_empty() {
        out.push_str("[constraints]\n");
        for c in &g.constraints {
            let _ = writeln!(out, "{}", format_constraint(c, &g.measures));
        }
    }
    if !g.objective.is_empty() {
        let _ = writeln!(
            out,
            "[objective]\n{}",
            write_terms(&g.objective, &g.measures)
        );
    }
    if let Some(d) = &g.dynamics {
        out.push_str("[dynamics]\n");
        if let Some(t) = &d.time {
            let _ = writeln!(out, "time = {t}");
        }
        let _ = writeln!(out, "states = {}", d.states.join(" "));
        if !d.controls.is_empty() {
            let _ = writeln!(out, "controls = {}", d.controls.join(" "));
        }
        match &d.horizon {
            Horizon::Free => out.push_str("horizon = free\n"),
            Horizon::Fixed(t) => {
                let _ = writeln!(out, "horizon = {t}");
            }
        }
        let _ = writeln!(out, "initial = {}", write_endpoint(&d.initial));
        let _ = writeln!(out, "terminal = {}", write_endpoint(&d.terminal));
        if let Some(l) = &d.lagrangian {
            let _ = writeln!(out, "lagrangian = {}", l.to_string_with(&d.space));
        }
        if let Some(l) = &d.terminal_cost {
            let _ = writeln!(out, "terminal_cost = {}", l.to_string_with(&d.space));
        }
        for c in &d.cells {
            let _ = writeln!(out, "[cell {}]", c.measure);
            for (s, f) in d.states.iter().zip(&c.f) {
                let _ = writeln!(out, "{s}' = {}", f.to_string_with(&d.space));
            }
        }
    }
    out
}

fn parse_pencil(f: &SectionFile) -> Result<Pencil, ParseError> {
    for (k, line) in &f.header {
        if k != "kind" {
            return Err(ParseError::new(
                line.number,
                1,
                format!("unknown header key `{k}`"),
            ));
        }
    }
    let mut mats = Vec::new();
    for (i, s) in f.sections.iter().enumerate() {
        if s.name != format!("F{i}") {
            return Err(ParseError::new(
                s.line,
                1,
                format!("expected section `[F{i}]`, found `[{}]`", s.name),
            ));
        }
        let mut m = Vec::new();
        for line in &s.lines {
            let row: Result<Vec<BigRational>, ParseError> = tokens(line)
                .into_iter()
                .map(|(col, t)| {
                    parse_rational(t).ok_or_else(|| {
                        ParseError::new(
                            line.number,
                            col,
                            format!("expected a rational number, found `{t}`"),
                        )
                    })
                })
                .collect();
            m.push(row?);
        }
        mats.push(m);
    }
    let at = f.sections.first().map_or(1, |s| s.line);
    Pencil::new(mats).map_err(|e| ParseError::new(at, 1, e.to_string()))
}

fn write_pencil(p: &Pencil) -> String {
    let mut out = String::from("kind = pencil\n");
    for (k, m) in p.matrices().iter().enumerate() {
        let _ = writeln!(out, "[F{k}]");
        for row in m {
            let r: Vec<String> = row.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{}", r.join(" "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casestudies;
    use crate::spectra::{exponential_spectrahedron, pillow};

    const POLYOPT: &str = "\
kind = pop
vars = x1 x2
[objective]
-x2
[constraints]
3 + 2*x2 - x1^2 - x2^2 >= 0
-x1 - x2 - x1*x2 >= 0
1 + x1*x2 >= 0
";

    fn round_trip(p: &Problem) {
        let text = p.to_text();
        let q = Problem::parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(&q, p, "{text}");
        assert_eq!(q.to_text(), text);
    }

    #[test]
    fn pop_file() {
        let p = Problem::parse(POLYOPT).unwrap();
        let Problem::Pop(pop) = &p else { panic!() };
        assert_eq!(pop.set.inequalities.len(), 3);
        assert_eq!(pop.set.r_x(), 1);
        round_trip(&p);
    }

    #[test]
    fn relations_are_normalized() {
        let p = Problem::parse(
            "kind = pop\nvars = x\nball = 1/2\n[objective]\nx\n[constraints]\nx^2 <= 1\nx = 1/4\n",
        )
        .unwrap();
        let Problem::Pop(pop) = p else { panic!() };
        let v = VarSpace::new(["x"]).unwrap();
        assert_eq!(
            pop.set.inequalities[0],
            parse_polynomial("1 - x^2", &v).unwrap()
        );
        assert_eq!(
            pop.set.equalities[0],
            parse_polynomial("x - 1/4", &v).unwrap()
        );
        assert_eq!(pop.set.ball_radius, Some(crate::poly::rat(1, 2)));
    }

    #[test]
    fn case_studies_round_trip() {
        round_trip(&Problem::Pop(casestudies::build_eig_assign(3)));
        for g in [
            casestudies::build_bolza(),
            casestudies::build_lqr(),
            casestudies::build_occtraj(),
            casestudies::build_saturation_cells(),
        ] {
            round_trip(&Problem::Gmp(g));
        }
        round_trip(&Problem::Pencil(pillow()));
        round_trip(&Problem::Pencil(exponential_spectrahedron(3)));
    }

    #[test]
    fn gmp_syntax() {
        let text = "\
kind = gmp
[measure mu]
vars = x
4 - x^2 >= 0
[measure nu]
vars = y
ball = 1
[constraints]
mu[1] - nu[y^2] >= 1/2
[objective]
mu[x] + nu[y]
";
        let Problem::Gmp(g) = Problem::parse(text).unwrap() else {
            panic!()
        };
        assert_eq!(g.measures.len(), 2);
        assert_eq!(g.constraints[0].relation, Relation::Ge);
        assert_eq!(
            g.constraints[0].terms[1].1,
            parse_polynomial("-y^2", &VarSpace::new(["y"]).unwrap()).unwrap()
        );
        assert_eq!(g.objective.len(), 2);
        assert!(g.dynamics.is_none());
    }

    #[test]
    fn errors_point_at_the_problem() {
        let e = Problem::parse("kind = pop\nvars = x1 x2\n[objective]\nx1 + x3\n").unwrap_err();
        assert_eq!((e.line, e.col), (4, 6));
        let e = Problem::parse(&POLYOPT.replace("1 + x1*x2 >= 0", "1 + x1*x2")).unwrap_err();
        assert_eq!(e.line, 8);
        let e = Problem::parse("kind = lp\n").unwrap_err();
        assert!(e.msg.contains("unknown kind"));
        let e =
            Problem::parse("kind = gmp\n[measure mu]\nvars = x\n[objective]\nnu[x]\n").unwrap_err();
        assert_eq!(
            (e.line, e.col, e.msg.as_str()),
            (5, 1, "unknown measure `nu`")
        );
        let e = Problem::parse("kind = pencil\n[F0]\n1 0\n0 1\n[F2]\n1 0\n0 1\n").unwrap_err();
        assert_eq!(e.line, 5);
        let text = casestudies::build_lqr();
        let t = Problem::Gmp(text).to_text().replace("x' = u", "z' = u");
        let e = Problem::parse(&t).unwrap_err();
        assert!(e.msg.contains("not a state"), "{e}");
    }
}
