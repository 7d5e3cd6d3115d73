//! Liouville-equation moment rows for (piecewise, possibly controlled) polynomial ODEs.
//!
//! For every test monomial `v(t, x)` the generated row reads
//! `sum_j <L_j v, mu_j> - <v(T, .), mu_T> + <v(0, .), mu_0> = 0`
//! with `L_j v = dv/dt + grad_x v . f_j`. Dirac endpoints move to the
//! right-hand side.

use num_rational::BigRational;
use num_traits::Zero;

use super::{Endpoint, GmpError, MeasureDecl, MomentConstraint};
use crate::poly::{Exponent, MonomialBasis, Polynomial, VarSpace};
use crate::relaxation::Relation;

/// One generated row together with the test monomial that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleRow {
    /// exponent over `(t, x)` (or `x` alone in the autonomous case)
    pub test: Exponent,
    pub constraint: MomentConstraint,
}

/// Vector field on one cell, carried by the occupation measure `measure`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub measure: String,
    /// one polynomial per state, over the dynamics' global space
    pub f: Vec<Polynomial>,
}

/// Everything the row generator needs, already in internal (scaled) time.
#[derive(Debug, Clone)]
pub(crate) struct LiouvilleData<'a> {
    pub space: &'a VarSpace,
    pub time: Option<usize>,
    pub states: &'a [usize],
    pub cells: &'a [Cell],
    /// terminal time in internal units; `None` keeps `t` free on `mu_T`
    pub terminal_time: Option<BigRational>,
    pub initial: &'a Endpoint,
    pub terminal: &'a Endpoint,
    pub measures: &'a [MeasureDecl],
}

/// Largest test degree whose rows stay within moments of degree `2r`.
pub fn test_degree(r: usize, max_f_degree: usize) -> usize {
    (2 * r).min((2 * r + 1).saturating_sub(max_f_degree.max(1)))
}

fn find<'a>(measures: &'a [MeasureDecl], name: &str) -> Result<&'a MeasureDecl, GmpError> {
    measures
        .iter()
        .find(|m| m.name == name)
        .ok_or_else(|| GmpError::UnknownMeasure(name.to_string()))
}

fn to_measure(
    p: &Polynomial,
    from: &VarSpace,
    m: &MeasureDecl,
    what: &str,
) -> Result<Polynomial, GmpError> {
    p.remap(from, &m.support.space)
        .map_err(|e| GmpError::Space {
            what: what.to_string(),
            measure: m.name.clone(),
            detail: e.to_string(),
        })
}

fn eval_at(
    p: &Polynomial,
    space: &VarSpace,
    states: &[usize],
    point: &[BigRational],
) -> Result<BigRational, GmpError> {
    let mut q = p.clone();
    for (&i, v) in states.iter().zip(point) {
        q = q.substitute(i, v);
    }
    if !q.support_vars().is_empty() {
        let names: Vec<&str> = q
            .support_vars()
            .iter()
            .map(|&i| space.names()[i].as_str())
            .collect();
        return Err(GmpError::Dirac(format!(
            "a fixed endpoint cannot absorb variables {}",
            names.join(", ")
        )));
    }
    Ok(q.constant_term())
}

impl LiouvilleData<'_> {
    pub(crate) fn rows(&self, degree: usize) -> Result<Vec<LiouvilleRow>, GmpError> {
        let g = self.space;
        let n = g.len();
        // test functions live on (t, x)
        let mut tx: Vec<usize> = self.time.into_iter().collect();
        tx.extend_from_slice(self.states);
        for p in [self.initial, self.terminal] {
            if let Endpoint::Dirac(pt) = p {
                if pt.len() != self.states.len() {
                    return Err(GmpError::Dirac(format!(
                        "endpoint has {} coordinates but there are {} states",
                        pt.len(),
                        self.states.len()
                    )));
                }
            }
        }
        let mut out = Vec::new();
        for e in MonomialBasis::new(tx.len(), degree).exponents() {
            let mut powers = vec![0u32; n];
            for (k, &i) in tx.iter().enumerate() {
                powers[i] = e.powers()[k];
            }
            let v =
                Polynomial::monomial(Exponent::new(powers), BigRational::from_integer(1.into()));
            let mut terms: Vec<(String, Polynomial)> = Vec::new();
            let mut rhs = BigRational::zero();

            for cell in self.cells {
                let mut lv = match self.time {
                    Some(t) => v.partial(t),
                    None => Polynomial::zero(n),
                };
                for (&i, fi) in self.states.iter().zip(&cell.f) {
                    lv = lv.add(&v.partial(i).mul(fi)?)?;
                }
                if !lv.is_zero() {
                    let m = find(self.measures, &cell.measure)?;
                    terms.push((m.name.clone(), to_measure(&lv, g, m, "Liouville row")?));
                }
            }

            let v_end = match (self.time, &self.terminal_time) {
                (Some(t), Some(tt)) => v.substitute(t, tt),
                _ => v.clone(),
            };
            match self.terminal {
                Endpoint::Measure(name) => {
                    let m = find(self.measures, name)?;
                    terms.push((
                        m.name.clone(),
                        to_measure(&v_end.neg(), g, m, "terminal term")?,
                    ));
                }
                Endpoint::Dirac(pt) => rhs += eval_at(&v_end, g, self.states, pt)?,
            }

            let v0 = match self.time {
                Some(t) => v.substitute(t, &BigRational::zero()),
                None => v.clone(),
            };
            match self.initial {
                Endpoint::Measure(name) => {
                    let m = find(self.measures, name)?;
                    terms.push((m.name.clone(), to_measure(&v0, g, m, "initial term")?));
                }
                Endpoint::Dirac(pt) => rhs -= eval_at(&v0, g, self.states, pt)?,
            }

            let row = MomentConstraint {
                terms,
                rhs,
                relation: Relation::Eq,
            }
            .merged();
            if row.terms.is_empty() {
                if !row.rhs.is_zero() {
                    return Err(GmpError::InconsistentRow(e.to_string()));
                }
                continue;
            }
            out.push(LiouvilleRow {
                test: e.clone(),
                constraint: row,
            });
        }
        Ok(out)
    }
}
