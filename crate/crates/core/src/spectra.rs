//! Spectrahedra `{x : F(x) = F_0 + sum_k x_k F_k >= 0}`: defining polynomials,
//! membership and support points of relaxation shadows.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::poly::{rat_from_f64, rat_to_f64, PolyError, Polynomial};
use crate::relaxation::{PopProblem, RelaxError, SemialgebraicSet};
use crate::sdp::{SdpStatus, SolveOptions};

/// Largest side handled by the symbolic minor expansion.
pub const MAX_SYMBOLIC_SIDE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("pencil needs at least the constant matrix F0")]
    Empty,
    #[error("matrix F{index} is {rows}x{cols}, expected {side}x{side}")]
    Shape {
        index: usize,
        rows: usize,
        cols: usize,
        side: usize,
    },
    #[error("matrix F{index} is not symmetric at ({row}, {col})")]
    NotSymmetric {
        index: usize,
        row: usize,
        col: usize,
    },
    #[error("side {0} exceeds the symbolic expansion bound {MAX_SYMBOLIC_SIDE}")]
    TooLarge(usize),
    #[error("point has {got} coordinates, pencil has {expected} variables")]
    Dimension { expected: usize, got: usize },
    #[error("projection variable {index} out of range for {nvars} variables")]
    Projection { index: usize, nvars: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
}

/// Affine symmetric pencil `F(x) = F_0 + sum_k x_k F_k` with exact entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    side: usize,
    /// `F_0, F_1, ..., F_n`, row-major
    mats: Vec<Vec<Vec<BigRational>>>,
}

impl Pencil {
    pub fn new(mats: Vec<Vec<Vec<BigRational>>>) -> Result<Self, SpectraError> {
        let side = mats.first().ok_or(SpectraError::Empty)?.len();
        for (index, m) in mats.iter().enumerate() {
            if m.len() != side || m.iter().any(|r| r.len() != side) {
                return Err(SpectraError::Shape {
                    index,
                    rows: m.len(),
                    cols: m.iter().map(Vec::len).find(|&c| c != side).unwrap_or(side),
                    side,
                });
            }
            for row in 0..side {
                for col in row + 1..side {
                    if m[row][col] != m[col][row] {
                        return Err(SpectraError::NotSymmetric { index, row, col });
                    }
                }
            }
        }
        Ok(Pencil { side, mats })
    }

    /// Block-diagonal pencil from pencils on the same variables.
    pub fn block_diag(parts: &[Pencil]) -> Result<Self, SpectraError> {
        let nmats = parts.first().ok_or(SpectraError::Empty)?.mats.len();
        let side: usize = parts.iter().map(|p| p.side).sum();
        let mut mats = vec![vec![vec![BigRational::zero(); side]; side]; nmats];
        let mut off = 0;
        for p in parts {
            if p.mats.len() != nmats {
                return Err(SpectraError::Dimension {
                    expected: nmats - 1,
                    got: p.mats.len() - 1,
                });
            }
            for (k, m) in p.mats.iter().enumerate() {
                for i in 0..p.side {
                    for j in 0..p.side {
                        mats[k][off + i][off + j] = m[i][j].clone();
                    }
                }
            }
            off += p.side;
        }
        Pencil::new(mats)
    }

    pub fn nvars(&self) -> usize {
        self.mats.len() - 1
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn matrices(&self) -> &[Vec<Vec<BigRational>>] {
        &self.mats
    }

    /// `F(x)` in floating point.
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>, SpectraError> {
        if x.len() != self.nvars() {
            return Err(SpectraError::Dimension {
                expected: self.nvars(),
                got: x.len(),
            });
        }
        Ok(DMatrix::from_fn(self.side, self.side, |i, j| {
            rat_to_f64(&self.mats[0][i][j])
                + x.iter()
                    .zip(&self.mats[1..])
                    .map(|(xk, m)| xk * rat_to_f64(&m[i][j]))
                    .sum::<f64>()
        }))
    }

    /// Entry `(i, j)` of `F(x)` as a polynomial.
    pub fn entry(&self, i: usize, j: usize) -> Polynomial {
        let n = self.nvars();
        let mut p = Polynomial::constant(n, self.mats[0][i][j].clone());
        for (k, m) in self.mats[1..].iter().enumerate() {
            if !m[i][j].is_zero() {
                p = p
                    .add(&Polynomial::var(n, k).scale(&m[i][j]))
                    .expect("same variable count");
            }
        }
        p
    }
}

/// Determinants of `F[rows, cols]` for equal-size row and column masks,
/// expanded along the lowest row and memoized.
struct Minors<'a> {
    entries: &'a [Vec<Polynomial>],
    memo: HashMap<(u32, u32), Polynomial>,
    nvars: usize,
}

impl Minors<'_> {
    fn det(&mut self, rows: u32, cols: u32) -> Result<Polynomial, PolyError> {
        if rows == 0 {
            return Ok(Polynomial::one(self.nvars));
        }
        if let Some(p) = self.memo.get(&(rows, cols)) {
            return Ok(p.clone());
        }
        let r = rows.trailing_zeros() as usize;
        let rest = rows & (rows - 1);
        let mut acc = Polynomial::zero(self.nvars);
        let mut sign = true;
        let mut c_bits = cols;
        while c_bits != 0 {
            let c = c_bits.trailing_zeros() as usize;
            c_bits &= c_bits - 1;
            let a = &self.entries[r][c];
            if !a.is_zero() {
                let sub = self.det(rest, cols & !(1 << c))?;
                let term = a.mul(&sub)?;
                acc = if sign {
                    acc.add(&term)?
                } else {
                    acc.sub(&term)?
                };
            }
            sign = !sign;
        }
        self.memo.insert((rows, cols), acc.clone());
        Ok(acc)
    }
}

/// `f_k` = sum of the `k x k` principal minors of `F(x)`, for `k = 1..=m`,
/// so that `det(t I + F(x)) = sum_k f_{m-k}(x) t^k` with `f_0 = 1`.
pub fn defining_polynomials(p: &Pencil) -> Result<Vec<Polynomial>, SpectraError> {
    let m = p.side();
    if m > MAX_SYMBOLIC_SIDE {
        return Err(SpectraError::TooLarge(m));
    }
    let n = p.nvars();
    let entries: Vec<Vec<Polynomial>> = (0..m)
        .map(|i| (0..m).map(|j| p.entry(i, j)).collect())
        .collect();
    let mut minors = Minors {
        entries: &entries,
        memo: HashMap::new(),
        nvars: n,
    };
    let mut f = vec![Polynomial::zero(n); m];
    for s in 1u32..(1 << m) {
        let k = s.count_ones() as usize;
        let d = minors.det(s, s)?;
        f[k - 1] = f[k - 1].add(&d)?;
    }
    Ok(f)
}

/// `min eig F(x) >= -tol`.
pub fn membership(p: &Pencil, x: &[f64], tol: f64) -> Result<bool, SpectraError> {
    Ok(min_eigenvalue(p, x)? >= -tol)
}

pub fn min_eigenvalue(p: &Pencil, x: &[f64]) -> Result<f64, SpectraError> {
    let f = p.eval(x)?;
    if f.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(SymmetricEigen::new(f).eigenvalues.min())
}

/// Support point of the order-r shadow in one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowPoint {
    pub direction: [f64; 2],
    /// projected first-order moments at the optimum
    pub point: [f64; 2],
    /// `max c'(y_{e_i}, y_{e_j})` over the relaxation
    pub value: f64,
    pub status: SdpStatus,
}

/// Maximize `c'(x_i, x_j)` over the order-r relaxation of `set` for every
/// direction `c`, where `(i, j) = projection`. Directions are solved in
/// parallel; results keep the input order.
pub fn shadow_support_points(
    set: &SemialgebraicSet,
    r: usize,
    directions: &[[f64; 2]],
    projection: (usize, usize),
    opts: &SolveOptions,
) -> Result<Vec<ShadowPoint>, SpectraError> {
    let n = set.nvars();
    for index in [projection.0, projection.1] {
        if index >= n {
            return Err(SpectraError::Projection { index, nvars: n });
        }
    }
    directions
        .par_iter()
        .map(|c| {
            let objective = Polynomial::var(n, projection.0)
                .scale(&rat_from_f64(-c[0])?)
                .add(&Polynomial::var(n, projection.1).scale(&rat_from_f64(-c[1])?))?;
            let pop = PopProblem {
                objective,
                set: set.clone(),
            };
            let sol = crate::relaxation::build_relaxation(&pop, r)?.solve(opts)?;
            let y = &sol.moments[0];
            let (y1, y0) = (y.first_order(), y.mass());
            Ok(ShadowPoint {
                direction: *c,
                point: [y1[projection.0] / y0, y1[projection.1] / y0],
                value: -sol.bound,
                status: sol.status(),
            })
        })
        .collect()
}

/// `count` unit vectors evenly spaced on the circle, starting at `(1, 0)`.
pub fn circle_directions(count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / count as f64;
            [t.cos(), t.sin()]
        })
        .collect()
}

/// `f(x) = F_0 + sum x_k F_k` with `F_k` entries given as small integers.
pub fn pencil_from_ints(mats: &[&[&[i64]]]) -> Result<Pencil, SpectraError> {
    Pencil::new(
        mats.iter()
            .map(|m| {
                m.iter()
                    .map(|r| {
                        r.iter()
                            .map(|&v| BigRational::from_integer(v.into()))
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Pillow (elliptope) pencil `[[1, x1, x2], [x1, 1, x3], [x2, x3, 1]]`.
pub fn pillow() -> Pencil {
    pencil_from_ints(&[
        &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]],
        &[&[0, 1, 0], &[1, 0, 0], &[0, 0, 0]],
        &[&[0, 0, 1], &[0, 0, 0], &[1, 0, 0]],
        &[&[0, 0, 0], &[0, 0, 1], &[0, 1, 0]],
    ])
    .expect("valid pencil")
}

/// `[[1, 2], [2, y1]] >= 0, [[1, y_{k-1}], [y_{k-1}, y_k]] >= 0` for `k = 2..=m`.
pub fn exponential_spectrahedron(m: usize) -> Pencil {
    let zero = || vec![vec![BigRational::zero(); 2]; 2];
    let parts: Vec<Pencil> = (0..m)
        .map(|k| {
            let mut mats = vec![zero(); m + 1];
            mats[0][0][0] = BigRational::one();
            if k == 0 {
                mats[0][0][1] = BigRational::from_integer(2.into());
                mats[0][1][0] = BigRational::from_integer(2.into());
            } else {
                mats[k][0][1] = BigRational::one();
                mats[k][1][0] = BigRational::one();
            }
            mats[k + 1][1][1] = BigRational::one();
            Pencil::new(mats).expect("valid pencil")
        })
        .collect();
    Pencil::block_diag(&parts).expect("same variables")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_polynomial;
    use crate::poly::{rat, VarSpace};
    use proptest::prelude::*;

    fn p(s: &str, n: usize) -> Polynomial {
        parse_polynomial(s, &VarSpace::indexed("x", n)).unwrap()
    }

    #[test]
    fn pillow_polynomials() {
        let f = defining_polynomials(&pillow()).unwrap();
        assert_eq!(f[0], p("3", 3));
        assert_eq!(f[1], p("3 - x1^2 - x2^2 - x3^2", 3));
        assert_eq!(f[2], p("1 + 2*x1*x2*x3 - x1^2 - x2^2 - x3^2", 3));
    }

    #[test]
    fn small_pencils() {
        let diag = pencil_from_ints(&[
            &[&[0, 0], &[0, 0]],
            &[&[1, 0], &[0, 0]],
            &[&[0, 0], &[0, 1]],
        ])
        .unwrap();
        let f = defining_polynomials(&diag).unwrap();
        assert_eq!(f, vec![p("x1 + x2", 2), p("x1*x2", 2)]);

        let irrat = pencil_from_ints(&[&[&[1, 0], &[0, 2]], &[&[0, 1], &[1, 0]]]).unwrap();
        let f = defining_polynomials(&irrat).unwrap();
        assert_eq!(f, vec![p("3", 1), p("2 - x1^2", 1)]);
    }

    #[test]
    fn membership_examples() {
        let pl = pillow();
        assert!(membership(&pl, &[0.0, 0.0, 0.0], 1e-9).unwrap());
        assert!(membership(&pl, &[1.0, 1.0, 1.0], 1e-9).unwrap());
        assert!(min_eigenvalue(&pl, &[1.0, 1.0, 1.0]).unwrap().abs() < 1e-12);
        assert!(!membership(&pl, &[1.0, 1.0, -1.0], 1e-9).unwrap());

        let ex = exponential_spectrahedron(3);
        assert_eq!(ex.side(), 6);
        assert!(membership(&ex, &[4.0, 16.0, 256.0], 1e-9).unwrap());
        assert!(!membership(&ex, &[4.0, 16.0, 255.9], 1e-9).unwrap());
        assert!(matches!(
            membership(&ex, &[4.0], 1e-9),
            Err(SpectraError::Dimension { .. })
        ));
    }

    #[test]
    fn asymmetric_pencil_rejected() {
        let e = pencil_from_ints(&[&[&[1, 2], &[0, 1]]]).unwrap_err();
        assert_eq!(
            e,
            SpectraError::NotSymmetric {
                index: 0,
                row: 0,
                col: 1
            }
        );
    }

    #[test]
    fn too_large_for_symbolic_expansion() {
        let big = exponential_spectrahedron(5);
        assert_eq!(
            defining_polynomials(&big).unwrap_err(),
            SpectraError::TooLarge(10)
        );
    }

    #[test]
    fn characteristic_polynomial_identity() {
        // det(tI + F) at t = 1 equals 1 + f_1 + ... + f_m
        let pl = pillow();
        let f = defining_polynomials(&pl).unwrap();
        let x = [0.3, -0.2, 0.7];
        let m = pl.eval(&x).unwrap() + DMatrix::identity(3, 3);
        let sum: f64 = 1.0 + f.iter().map(|q| q.eval(&x).unwrap()).sum::<f64>();
        assert!((m.determinant() - sum).abs() < 1e-12);
    }

    #[test]
    fn disk_shadow_is_exact_at_order_one() {
        let v = VarSpace::indexed("x", 2);
        let mut set = SemialgebraicSet::new(v.clone());
        set.inequalities
            .push(parse_polynomial("1 - x1^2 - x2^2", &v).unwrap());
        let dirs = circle_directions(6);
        let pts = shadow_support_points(&set, 1, &dirs, (0, 1), &SolveOptions::default()).unwrap();
        for (s, c) in pts.iter().zip(&dirs) {
            assert_eq!(s.status, SdpStatus::Optimal);
            assert!((s.value - 1.0).abs() < 1e-6, "{}", s.value);
            assert!((s.point[0] - c[0]).abs() < 1e-4 && (s.point[1] - c[1]).abs() < 1e-4);
        }
    }

    fn pencil_strategy() -> impl Strategy<Value = Pencil> {
        (1usize..=4, 1usize..=3).prop_flat_map(|(m, n)| {
            proptest::collection::vec(proptest::collection::vec(-3i64..=3, m * m), n + 1).prop_map(
                move |raw| {
                    let mats = raw
                        .iter()
                        .map(|v| {
                            (0..m)
                                .map(|i| {
                                    (0..m).map(|j| rat(v[i.min(j) * m + i.max(j)], 1)).collect()
                                })
                                .collect()
                        })
                        .collect();
                    Pencil::new(mats).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn membership_matches_defining_polynomials(
            pen in pencil_strategy(),
            xs in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let x = &xs[..pen.nvars()];
            let f = defining_polynomials(&pen).unwrap();
            let vals: Vec<f64> = f.iter().map(|q| q.eval(x).unwrap()).collect();
            let scale = 1.0 + vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let lmin = min_eigenvalue(&pen, x).unwrap();
            // keep away from the boundary, where both tests are tolerance-bound
            prop_assume!(lmin.abs() > 1e-6);
            let by_poly = vals.iter().all(|&v| v >= -1e-9 * scale);
            prop_assert_eq!(membership(&pen, x, 1e-9).unwrap(), by_poly);
        }
    }
}
