//! Rank analysis of moment matrices, flatness tests and atom extraction.
//!
//! Extraction follows the usual route: factor `M_r(y) = V V'`, bring `V` to
//! column echelon form to find a monomial basis `w`, read the multiplication
//! matrices `N_i w(x) = x_i w(x)` off the echelon form and diagonalize them
//! jointly through the Schur form of a random combination.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::moments::{moment_matrix, MomentError, MomentVector};
use crate::poly::{grlex_index, monomial_count, Exponent, MonomialBasis, PolyError};
use crate::relaxation::SemialgebraicSet;

pub const DEFAULT_RANK_TOL: f64 = 1e-6;
/// Moment-matching tolerance, relative to `1 + max |y|`.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("moments of degree {have} cannot fill a moment matrix of order {order}")]
    Degree { order: usize, have: usize },
    #[error("extraction failed: {0}")]
    Failed(String),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Number of eigenvalues above `tol * max(1, lambda_max)`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    let e = SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues;
    let cut = tol * e.max().max(1.0);
    e.iter().filter(|&&v| v > cut).count()
}

fn check_degree(y: &MomentVector, r: usize) -> Result<(), ExtractError> {
    if y.degree() < 2 * r {
        return Err(ExtractError::Degree {
            order: r,
            have: y.degree(),
        });
    }
    Ok(())
}

/// `rank M_s(y)` for `s = 0..=r`.
pub fn rank_sequence(y: &MomentVector, r: usize, tol: f64) -> Result<Vec<usize>, ExtractError> {
    check_degree(y, r)?;
    (0..=r)
        .map(|s| Ok(numerical_rank(&moment_matrix(y, s)?, tol)))
        .collect()
}

/// `rank M_{r - r_x}(y) == rank M_r(y)`.
pub fn flat_check(y: &MomentVector, r: usize, r_x: usize, tol: f64) -> Result<bool, ExtractError> {
    check_degree(y, r)?;
    let lo = r.saturating_sub(r_x);
    let a = numerical_rank(&moment_matrix(y, lo)?, tol);
    let b = numerical_rank(&moment_matrix(y, r)?, tol);
    Ok(a == b)
}

/// Pivoted Cholesky stopped after `rank` steps. Pivots go to the largest
/// remaining diagonal, ties to the lowest (grlex) index.
fn pivoted_cholesky(m: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::zeros(n, rank);
    let mut used = vec![false; n];
    for k in 0..rank {
        let mut piv = None;
        let mut best = f64::NEG_INFINITY;
        for i in (0..n).filter(|&i| !used[i]) {
            // strict comparison with a small slack keeps the earliest index on ties
            if a[(i, i)] > best * (1.0 + 1e-12) + 1e-300 || piv.is_none() {
                best = a[(i, i)];
                piv = Some(i);
            }
        }
        let p = piv.expect("rank <= side");
        used[p] = true;
        let d = a[(p, p)].max(0.0).sqrt();
        if d == 0.0 {
            break;
        }
        for i in 0..n {
            v[(i, k)] = a[(i, p)] / d;
        }
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= v[(i, k)] * v[(j, k)];
            }
        }
    }
    v
}

/// Reduced column echelon form of `v`; returns it with the pivot rows.
fn column_echelon(mut v: DMatrix<f64>, tol: f64) -> (DMatrix<f64>, Vec<usize>) {
    let (n, k) = v.shape();
    let scale = v.amax().max(f64::MIN_POSITIVE);
    let mut pivots = Vec::with_capacity(k);
    let mut col = 0;
    for row in 0..n {
        if col == k {
            break;
        }
        let (mut best, mut bc) = (0.0, col);
        for c in col..k {
            if v[(row, c)].abs() > best {
                best = v[(row, c)].abs();
                bc = c;
            }
        }
        if best <= tol * scale {
            for c in col..k {
                v[(row, c)] = 0.0;
            }
            continue;
        }
        v.swap_columns(col, bc);
        let p = v[(row, col)];
        for i in 0..n {
            v[(i, col)] /= p;
        }
        for c in 0..k {
            if c != col {
                let f = v[(row, c)];
                if f != 0.0 {
                    for i in 0..n {
                        v[(i, c)] -= f * v[(i, col)];
                    }
                }
            }
        }
        pivots.push(row);
        col += 1;
    }
    (v, pivots)
}

/// `max_alpha |y_alpha - sum_k w_k x_k^alpha|` over `|alpha| <= degree`.
pub fn moment_residual(y: &MomentVector, atoms: &[Atom], degree: usize) -> f64 {
    let degree = degree.min(y.degree());
    let n = y.nvars();
    let len = monomial_count(n, degree).unwrap_or(0);
    let mut worst = 0.0f64;
    for (k, e) in MonomialBasis::new(n, degree)
        .exponents()
        .iter()
        .enumerate()
        .take(len)
    {
        let rebuilt: f64 = atoms.iter().map(|a| a.weight * e.eval(&a.point)).sum();
        worst = worst.max((y.values()[k] - rebuilt).abs());
    }
    worst
}

/// Atoms of `y` read off `M_r(y)`; rebuilt moments must match up to degree `2(r - 1)`.
pub fn extract_atoms(y: &MomentVector, r: usize, tol: f64) -> Result<Vec<Atom>, ExtractError> {
    extract_atoms_with(y, r, 1, tol, 0)
}

/// General form: `r_x` sets the checked degree `2(r - r_x)`, `seed` the random
/// combination of multiplication matrices.
pub fn extract_atoms_with(
    y: &MomentVector,
    r: usize,
    r_x: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<Atom>, ExtractError> {
    check_degree(y, r)?;
    let m = moment_matrix(y, r)?;
    let rank = numerical_rank(&m, tol);
    if rank == 0 {
        return Err(ExtractError::Failed(
            "moment matrix is numerically zero".into(),
        ));
    }
    let atoms = if rank == 1 {
        rank_one_atom(y)
    } else {
        general_atoms(y, &m, r, rank, tol, seed)?
    };
    let check = (2 * r.saturating_sub(r_x)).max(1).min(y.degree());
    let res = moment_residual(y, &atoms, check);
    let bound = RESIDUAL_TOL * (1.0 + y.truncate(check).max_abs());
    if !(res <= bound) {
        return Err(ExtractError::Failed(format!(
            "rebuilt moments differ by {res:.3e} (allowed {bound:.3e})"
        )));
    }
    Ok(atoms)
}

/// Single atom at the normalized first-order moments.
pub fn rank_one_atom(y: &MomentVector) -> Vec<Atom> {
    let y0 = y.mass();
    vec![Atom {
        point: y.first_order().iter().map(|v| v / y0).collect(),
        weight: y0,
    }]
}

fn general_atoms(
    y: &MomentVector,
    m: &DMatrix<f64>,
    r: usize,
    rank: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<Atom>, ExtractError> {
    let n = y.nvars();
    let v = pivoted_cholesky(m, rank);
    let (u, pivots) = column_echelon(v, tol);
    if pivots.len() < rank {
        return Err(ExtractError::Failed(format!(
            "echelon form found {} basis monomials for rank {rank}",
            pivots.len()
        )));
    }
    let basis: Vec<Exponent> = pivots
        .iter()
        .map(|&p| crate::poly::grlex_exponent(n, p))
        .collect();
    let mut mult = Vec::with_capacity(n);
    for i in 0..n {
        let mut ni = DMatrix::zeros(rank, rank);
        for (j, w) in basis.iter().enumerate() {
            let shifted = w.add(&Exponent::unit(n, i));
            if shifted.degree() > r {
                return Err(ExtractError::Failed(format!(
                    "basis monomial {w} cannot be shifted inside order {r}; the moment matrix is not flat"
                )));
            }
            ni.set_row(j, &u.row(grlex_index(&shifted)));
        }
        mult.push(ni);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|l| *l /= s);
    let mut comb = DMatrix::zeros(rank, rank);
    for (l, ni) in lambda.iter().zip(&mult) {
        comb += ni * *l;
    }
    let schur = Schur::try_new(comb, f64::EPSILON, 10_000)
        .ok_or_else(|| ExtractError::Failed("Schur iteration did not converge".into()))?;
    let (q, _) = schur.unpack();
    let points: Vec<Vec<f64>> = (0..rank)
        .map(|k| {
            let qk = q.column(k);
            mult.iter().map(|ni| qk.dot(&(ni * qk))).collect()
        })
        .collect();
    let weights = fit_weights(y, &points, r)?;
    Ok(points
        .into_iter()
        .zip(weights)
        .map(|(point, weight)| Atom { point, weight })
        .collect())
}

/// Least-squares weights against the moments of degree `<= r`.
fn fit_weights(y: &MomentVector, points: &[Vec<f64>], r: usize) -> Result<Vec<f64>, ExtractError> {
    let n = y.nvars();
    let basis = MonomialBasis::new(n, r);
    let rows = basis.len();
    let a = DMatrix::from_fn(rows, points.len(), |i, k| basis.get(i).eval(&points[k]));
    let b = DVector::from_column_slice(&y.values()[..rows]);
    let w = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| ExtractError::Failed(format!("weight fit: {e}")))?;
    Ok(w.iter().copied().collect())
}

/// Finite-convergence certificate of one relaxation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub order: usize,
    pub r_x: usize,
    pub tol: f64,
    /// `rank M_s(y)` for `s = 0..=order`
    pub ranks: Vec<usize>,
    /// ranks coincide and extraction succeeded
    pub flat: bool,
    pub atoms: Vec<Atom>,
    /// largest violation of the set's constraints at the atoms
    pub residual: f64,
    /// largest mismatch between `y` and the moments of the atoms
    pub moment_residual: f64,
    /// why extraction was not attempted or failed
    pub note: Option<String>,
}

/// Ranks, flatness and, when flat, atoms for the moments `y` of a measure on `set`.
pub fn certify(
    y: &MomentVector,
    set: &SemialgebraicSet,
    r: usize,
    tol: f64,
) -> Result<Certificate, ExtractError> {
    certify_with(y, set, r, tol, 0)
}

/// [`certify`] with an explicit seed for the random combination in extraction.
pub fn certify_with(
    y: &MomentVector,
    set: &SemialgebraicSet,
    r: usize,
    tol: f64,
    seed: u64,
) -> Result<Certificate, ExtractError> {
    let r_x = set.r_x();
    let ranks = rank_sequence(y, r, tol)?;
    let rank_flat = ranks[r.saturating_sub(r_x)] == ranks[r];
    let mut cert = Certificate {
        order: r,
        r_x,
        tol,
        ranks,
        flat: false,
        atoms: Vec::new(),
        residual: 0.0,
        moment_residual: 0.0,
        note: None,
    };
    if !rank_flat {
        cert.note = Some(format!(
            "rank M_{} = {} differs from rank M_{} = {}",
            r.saturating_sub(r_x),
            cert.ranks[r.saturating_sub(r_x)],
            r,
            cert.ranks[r]
        ));
        return Ok(cert);
    }
    match extract_atoms_with(y, r, r_x, tol, seed) {
        Ok(atoms) => {
            cert.residual = constraint_violation(set, &atoms)?;
            cert.moment_residual = moment_residual(y, &atoms, 2 * r.saturating_sub(r_x));
            cert.atoms = atoms;
            cert.flat = true;
        }
        Err(e) => cert.note = Some(e.to_string()),
    }
    Ok(cert)
}

/// `max(0, -g(x), |h(x)|)` over atoms and constraints (the ball included).
pub fn constraint_violation(set: &SemialgebraicSet, atoms: &[Atom]) -> Result<f64, ExtractError> {
    let mut worst = 0.0f64;
    for a in atoms {
        for g in set.all_inequalities() {
            worst = worst.max(-g.eval(&a.point)?);
        }
        for h in &set.equalities {
            worst = worst.max(h.eval(&a.point)?.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MomentVector;
    use proptest::prelude::*;

    fn atoms_of(pts: &[(Vec<f64>, f64)], deg: usize) -> MomentVector {
        MomentVector::from_atoms(pts[0].0.len(), deg, pts)
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), 1e-6), 3);
        let y = atoms_of(&[(vec![1.0, 2.0], 1.0)], 4);
        assert_eq!(numerical_rank(&moment_matrix(&y, 2).unwrap(), 1e-6), 1);
        let y = atoms_of(&[(vec![0.0], 0.5), (vec![1.0], 0.5)], 4);
        assert_eq!(numerical_rank(&moment_matrix(&y, 2).unwrap(), 1e-6), 2);
    }

    #[test]
    fn lebesgue_is_not_flat() {
        let y = MomentVector::from_fn(1, 4, |e| 1.0 / (e.degree() as f64 + 1.0));
        assert_eq!(rank_sequence(&y, 2, 1e-6).unwrap(), vec![1, 2, 3]);
        assert!(!flat_check(&y, 2, 1, 1e-6).unwrap());
        // r = r_x compares against M_0
        assert!(!flat_check(&y, 1, 1, 1e-6).unwrap());
    }

    #[test]
    fn single_and_symmetric_atoms() {
        let y = atoms_of(&[(vec![0.5], 1.0)], 4);
        let a = extract_atoms(&y, 2, 1e-6).unwrap();
        assert_eq!(a.len(), 1);
        assert!((a[0].point[0] - 0.5).abs() < 1e-12 && (a[0].weight - 1.0).abs() < 1e-12);

        let y = atoms_of(&[(vec![-1.0], 0.5), (vec![1.0], 0.5)], 4);
        let mut a = extract_atoms(&y, 2, 1e-6).unwrap();
        a.sort_by(|p, q| p.point[0].total_cmp(&q.point[0]));
        assert!((a[0].point[0] + 1.0).abs() < 1e-9 && (a[1].point[0] - 1.0).abs() < 1e-9);
        assert!((a[0].weight - 0.5).abs() < 1e-9 && (a[1].weight - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rank_one_paths_agree() {
        let y = atoms_of(&[(vec![0.3, -1.2, 2.0], 0.7)], 4);
        let m = moment_matrix(&y, 2).unwrap();
        let general = general_atoms(&y, &m, 2, 1, 1e-6, 0).unwrap();
        let short = rank_one_atom(&y);
        for (a, b) in general[0].point.iter().zip(&short[0].point) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((general[0].weight - short[0].weight).abs() < 1e-8);
    }

    #[test]
    fn too_few_moments() {
        let y = atoms_of(&[(vec![0.5], 1.0)], 3);
        assert!(matches!(
            extract_atoms(&y, 2, 1e-6),
            Err(ExtractError::Degree { .. })
        ));
    }

    #[test]
    fn non_flat_extraction_fails() {
        let y = MomentVector::from_fn(1, 4, |e| 1.0 / (e.degree() as f64 + 1.0));
        assert!(matches!(
            extract_atoms(&y, 2, 1e-6),
            Err(ExtractError::Failed(_))
        ));
    }

    fn match_atoms(got: &[Atom], want: &[(Vec<f64>, f64)]) -> f64 {
        // greedy nearest matching is enough for well separated atoms
        let mut worst = 0.0f64;
        let mut used = vec![false; got.len()];
        for (p, w) in want {
            let (k, d) = got
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, a)| {
                    let d = a
                        .point
                        .iter()
                        .zip(p)
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max);
                    (k, d.max((a.weight - w).abs()))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            used[k] = true;
            worst = worst.max(d);
        }
        worst
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn round_trip(
            n in 1usize..=3,
            k in 1usize..=3,
            raw in proptest::collection::vec(-1.0f64..1.0, 9),
            ws in proptest::collection::vec(0.1f64..1.0, 3),
        ) {
            let pts: Vec<(Vec<f64>, f64)> = (0..k).map(|j| (raw[3 * j..3 * j + n].to_vec(), ws[j])).collect();
            // keep atoms apart so the tolerance means something
            for a in 0..k {
                for b in 0..a {
                    let d = pts[a].0.iter().zip(&pts[b].0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    prop_assume!(d > 0.1);
                }
            }
            let y = atoms_of(&pts, 6);
            let got = extract_atoms_with(&y, 3, 1, 1e-6, 7).unwrap();
            prop_assert_eq!(got.len(), k);
            prop_assert!(match_atoms(&got, &pts) < 1e-6);
            let mass: f64 = got.iter().map(|a| a.weight).sum();
            prop_assert!((mass - y.mass()).abs() < 1e-6);
        }
    }
}
