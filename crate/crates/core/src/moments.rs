//! Truncated moment vectors, the Riesz functional, and symbolic stencils for
//! moment and localizing matrices.
//!
//! A stencil records, for every cell of a matrix, which moments appear there
//! and with what coefficient. The same stencil is evaluated numerically on a
//! moment vector and turned into constraint matrices during relaxation assembly.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::poly::{grlex_index, monomial_count, rat_to_f64, Exponent, MonomialBasis, Polynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("moment y_{0:?} is missing from a moment vector of degree {1}")]
    MissingMoment(Exponent, usize),
    #[error(
        "moment vector of {nvars} variables and degree {degree} needs {expected} values, got {got}"
    )]
    Length {
        nvars: usize,
        degree: usize,
        expected: usize,
        got: usize,
    },
    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Moments `y_alpha` for `|alpha| <= degree`, stored in grlex order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    nvars: usize,
    degree: usize,
    values: Vec<f64>,
}

impl MomentVector {
    pub fn new(nvars: usize, degree: usize, values: Vec<f64>) -> Result<Self, MomentError> {
        let expected = monomial_count(nvars, degree).expect("moment count");
        if values.len() != expected {
            return Err(MomentError::Length {
                nvars,
                degree,
                expected,
                got: values.len(),
            });
        }
        Ok(MomentVector {
            nvars,
            degree,
            values,
        })
    }

    pub fn from_fn(nvars: usize, degree: usize, f: impl Fn(&Exponent) -> f64) -> Self {
        let basis = MonomialBasis::new(nvars, degree);
        MomentVector {
            nvars,
            degree,
            values: basis.exponents().iter().map(f).collect(),
        }
    }

    /// Moments of the atomic measure `sum_j w_j delta_{x_j}`.
    pub fn from_atoms(nvars: usize, degree: usize, atoms: &[(Vec<f64>, f64)]) -> Self {
        Self::from_fn(nvars, degree, |e| {
            atoms.iter().map(|(x, w)| w * e.eval(x)).sum()
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The mass `y_0`.
    pub fn mass(&self) -> f64 {
        self.values[0]
    }

    pub fn get(&self, e: &Exponent) -> Option<f64> {
        if e.nvars() != self.nvars || e.degree() > self.degree {
            return None;
        }
        self.values.get(grlex_index(e)).copied()
    }

    /// First-order moments `(y_{e_1}, ..., y_{e_n})`.
    pub fn first_order(&self) -> Vec<f64> {
        (0..self.nvars).map(|i| self.values[i + 1]).collect()
    }

    pub fn truncate(&self, degree: usize) -> MomentVector {
        let d = degree.min(self.degree);
        let len = monomial_count(self.nvars, d).expect("moment count");
        MomentVector {
            nvars: self.nvars,
            degree: d,
            values: self.values[..len].to_vec(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The Riesz functional `l_y(p) = sum_alpha p_alpha y_alpha`.
pub fn riesz_apply(p: &Polynomial, y: &MomentVector) -> Result<f64, MomentError> {
    if p.nvars() != y.nvars {
        return Err(MomentError::Dimension {
            expected: y.nvars,
            got: p.nvars(),
        });
    }
    let mut acc = 0.0;
    for (e, c) in p.terms() {
        let v = y
            .get(e)
            .ok_or_else(|| MomentError::MissingMoment(e.clone(), y.degree))?;
        acc += rat_to_f64(c) * v;
    }
    Ok(acc)
}

/// One moment contribution `coeff * y_exponent` inside a stencil cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilTerm {
    pub exponent: Exponent,
    /// grlex index of `exponent`
    pub index: usize,
    pub coeff: f64,
}

/// Symbolic symmetric matrix whose cells are linear forms in the moments.
///
/// Only the upper triangle is stored; `cell(i, j)` and `cell(j, i)` are the same slice.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixStencil {
    nvars: usize,
    side: usize,
    cells: Vec<Vec<StencilTerm>>,
}

fn packed(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

impl MatrixStencil {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn cell(&self, i: usize, j: usize) -> &[StencilTerm] {
        &self.cells[packed(i, j)]
    }

    /// Largest moment degree referenced by any cell.
    pub fn max_degree(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .map(|t| t.exponent.degree())
            .max()
            .unwrap_or(0)
    }

    /// Upper-triangle cells `(i, j, terms)` with `i <= j`.
    pub fn upper_cells(&self) -> impl Iterator<Item = (usize, usize, &[StencilTerm])> {
        (0..self.side).flat_map(move |j| (0..=j).map(move |i| (i, j, self.cell(i, j))))
    }
}

/// Stencil of `M_d(y)`: cell `(a, b)` holds `y_{a+b}`.
pub fn moment_matrix_stencil(nvars: usize, d: usize) -> MatrixStencil {
    localizing_matrix_stencil(&Polynomial::one(nvars), d)
}

/// Stencil of `M_d(q y)`: cell `(a, b)` holds `sum_g q_g y_{a+b+g}`.
pub fn localizing_matrix_stencil(q: &Polynomial, d: usize) -> MatrixStencil {
    let nvars = q.nvars();
    let basis = MonomialBasis::new(nvars, d);
    let side = basis.len();
    let qterms = q.f64_terms();
    let mut cells = Vec::with_capacity(side * (side + 1) / 2);
    for j in 0..side {
        for i in 0..=j {
            let ab = basis.get(i).add(basis.get(j));
            let cell = qterms
                .iter()
                .map(|(g, c)| {
                    let exponent = ab.add(g);
                    StencilTerm {
                        index: grlex_index(&exponent),
                        exponent,
                        coeff: *c,
                    }
                })
                .collect();
            cells.push(cell);
        }
    }
    MatrixStencil { nvars, side, cells }
}

/// Numeric symmetric matrix of a stencil at the moment vector `y`.
pub fn evaluate_stencil(s: &MatrixStencil, y: &MomentVector) -> Result<DMatrix<f64>, MomentError> {
    if s.nvars != y.nvars {
        return Err(MomentError::Dimension {
            expected: y.nvars,
            got: s.nvars,
        });
    }
    let mut m = DMatrix::zeros(s.side, s.side);
    for (i, j, terms) in s.upper_cells() {
        let mut v = 0.0;
        for t in terms {
            let yv = y
                .values
                .get(t.index)
                .filter(|_| t.exponent.degree() <= y.degree)
                .ok_or_else(|| MomentError::MissingMoment(t.exponent.clone(), y.degree))?;
            v += t.coeff * yv;
        }
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

/// `M_d(y)` evaluated directly.
pub fn moment_matrix(y: &MomentVector, d: usize) -> Result<DMatrix<f64>, MomentError> {
    evaluate_stencil(&moment_matrix_stencil(y.nvars, d), y)
}

/// `M_d(q y)` evaluated directly.
pub fn localizing_matrix(
    q: &Polynomial,
    y: &MomentVector,
    d: usize,
) -> Result<DMatrix<f64>, MomentError> {
    evaluate_stencil(&localizing_matrix_stencil(q, d), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_polynomial;
    use crate::poly::VarSpace;

    fn xs() -> VarSpace {
        VarSpace::new(["x1", "x2"]).unwrap()
    }

    fn e(p: &[u32]) -> Exponent {
        Exponent::new(p.to_vec())
    }

    fn single(s: &MatrixStencil, i: usize, j: usize) -> Exponent {
        let c = s.cell(i, j);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].coeff, 1.0);
        c[0].exponent.clone()
    }

    #[test]
    fn riesz_of_example_polynomial() {
        // y_alpha = grlex index + 1 makes every moment distinguishable
        let y = MomentVector::from_fn(2, 2, |a| grlex_index(a) as f64 + 1.0);
        let p = parse_polynomial("1 + 2*x2 + 3*x1^2 + 4*x1*x2", &xs()).unwrap();
        let (y00, y01, y20, y11) = (1.0, 3.0, 4.0, 5.0);
        assert_eq!(
            riesz_apply(&p, &y).unwrap(),
            y00 + 2.0 * y01 + 3.0 * y20 + 4.0 * y11
        );
        assert_eq!(riesz_apply(&Polynomial::one(2), &y).unwrap(), y.mass());
    }

    #[test]
    fn riesz_of_dirac() {
        let y = MomentVector::from_atoms(2, 2, &[(vec![2.0, 3.0], 1.0)]);
        let p = parse_polynomial("x1*x2", &xs()).unwrap();
        assert_eq!(riesz_apply(&p, &y).unwrap(), 6.0);
    }

    #[test]
    fn riesz_reports_missing_moment() {
        let y = MomentVector::from_atoms(2, 2, &[(vec![2.0, 3.0], 1.0)]);
        let p = parse_polynomial("x1^3", &xs()).unwrap();
        assert!(matches!(
            riesz_apply(&p, &y),
            Err(MomentError::MissingMoment(ex, 2)) if ex == e(&[3, 0])
        ));
    }

    #[test]
    fn first_order_moment_matrix_layout() {
        let s = moment_matrix_stencil(2, 1);
        assert_eq!(s.side(), 3);
        let expect = [
            [[0, 0], [1, 0], [0, 1]],
            [[1, 0], [2, 0], [1, 1]],
            [[0, 1], [1, 1], [0, 2]],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(single(&s, i, j), e(&expect[i][j]));
            }
        }
        let s0 = moment_matrix_stencil(1, 0);
        assert_eq!(s0.side(), 1);
        assert_eq!(single(&s0, 0, 0), e(&[0]));
    }

    #[test]
    fn second_order_moment_matrix_layout() {
        let s = moment_matrix_stencil(2, 2);
        assert_eq!(s.side(), 6);
        let rows: [[[u32; 2]; 6]; 6] = [
            [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]],
            [[1, 0], [2, 0], [1, 1], [3, 0], [2, 1], [1, 2]],
            [[0, 1], [1, 1], [0, 2], [2, 1], [1, 2], [0, 3]],
            [[2, 0], [3, 0], [2, 1], [4, 0], [3, 1], [2, 2]],
            [[1, 1], [2, 1], [1, 2], [3, 1], [2, 2], [1, 3]],
            [[0, 2], [1, 2], [0, 3], [2, 2], [1, 3], [0, 4]],
        ];
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(single(&s, i, j), e(&rows[i][j]));
            }
        }
    }

    fn cell_as_pairs(s: &MatrixStencil, i: usize, j: usize) -> Vec<(Exponent, f64)> {
        let mut v: Vec<_> = s
            .cell(i, j)
            .iter()
            .map(|t| (t.exponent.clone(), t.coeff))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    #[test]
    fn localizing_matrix_layout() {
        let q = parse_polynomial("1 + 2*x1 + 3*x2", &xs()).unwrap();
        let s = localizing_matrix_stencil(&q, 1);
        assert_eq!(s.side(), 3);
        assert_eq!(
            cell_as_pairs(&s, 0, 0),
            vec![(e(&[0, 0]), 1.0), (e(&[1, 0]), 2.0), (e(&[0, 1]), 3.0)]
        );
        // (x2, x2) cell: y02 + 2 y12 + 3 y03
        assert_eq!(
            cell_as_pairs(&s, 2, 2),
            vec![(e(&[0, 2]), 1.0), (e(&[1, 2]), 2.0), (e(&[0, 3]), 3.0)]
        );
        assert_eq!(cell_as_pairs(&s, 0, 1), cell_as_pairs(&s, 1, 0));
    }

    #[test]
    fn localizing_at_one_is_moment_matrix() {
        assert_eq!(
            localizing_matrix_stencil(&Polynomial::one(2), 2),
            moment_matrix_stencil(2, 2)
        );
    }

    #[test]
    fn scalar_localizer_of_ball_constraint() {
        let q = parse_polynomial("3 - 2*x2 - x1^2 - x2^2", &xs()).unwrap();
        let s = localizing_matrix_stencil(&q, 0);
        assert_eq!(s.side(), 1);
        assert_eq!(
            cell_as_pairs(&s, 0, 0),
            vec![
                (e(&[0, 0]), 3.0),
                (e(&[0, 1]), -2.0),
                (e(&[2, 0]), -1.0),
                (e(&[0, 2]), -1.0)
            ]
        );
    }

    #[test]
    fn evaluate_dirac_at_origin() {
        let y = MomentVector::from_atoms(2, 2, &[(vec![0.0, 0.0], 1.0)]);
        let m = moment_matrix(&y, 1).unwrap();
        let mut expect = DMatrix::zeros(3, 3);
        expect[(0, 0)] = 1.0;
        assert_eq!(m, expect);
    }

    #[test]
    fn evaluate_lebesgue_unit_interval() {
        // int_0^1 x^a dx = 1/(a+1)
        let y = MomentVector::new(1, 2, vec![1.0, 0.5, 1.0 / 3.0]).unwrap();
        let m = moment_matrix(&y, 1).unwrap();
        assert_eq!(
            m,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0 / 3.0])
        );
    }

    #[test]
    fn evaluate_reports_missing_moment() {
        let y = MomentVector::new(1, 2, vec![1.0, 0.5, 1.0 / 3.0]).unwrap();
        assert!(matches!(
            moment_matrix(&y, 2),
            Err(MomentError::MissingMoment(..))
        ));
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(MomentVector::new(2, 1, vec![1.0, 2.0]).is_err());
    }
}
