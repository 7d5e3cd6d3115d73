//! Generators for the worked examples: eigenvalue assignment of a
//! discretized string, Bolza's problem, a scalar LQR, a trajectory of
//! `x' = -x`, and a double integrator under a saturated feedback.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::gmp::{
    Cell, DynamicsSpec, Endpoint, GmpProblem, Horizon, MeasureDecl, MomentConstraint, Sense,
};
use crate::parse::parse_polynomial;
use crate::poly::{rat, Exponent, Polynomial, VarSpace};
use crate::relaxation::{PopProblem, Relation, SemialgebraicSet};

pub const EIG_ASSIGN_MAX_N: usize = 8;

fn p(s: &str, v: &VarSpace) -> Polynomial {
    parse_polynomial(s, v).expect("built-in polynomial parses")
}

fn set(v: &VarSpace, ineq: &[&str]) -> SemialgebraicSet {
    let mut s = SemialgebraicSet::new(v.clone());
    s.inequalities = ineq.iter().map(|q| p(q, v)).collect();
    s
}

fn unit_mass(measure: &str, nvars: usize) -> MomentConstraint {
    MomentConstraint {
        terms: vec![(measure.to_string(), Polynomial::one(nvars))],
        rhs: BigRational::one(),
        relation: Relation::Eq,
    }
}

/// Exact Gauss-Jordan inverse; `None` if singular.
fn inverse(a: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).find(|&r| !m[r][c].is_zero())?;
        m.swap(c, piv);
        let inv = BigRational::one() / &m[c][c];
        for v in m[c].iter_mut() {
            *v *= &inv;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                for k in 0..2 * n {
                    let d = &f * &m[c][k];
                    m[r][k] -= d;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn det(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut d = BigRational::one();
    for c in 0..n {
        let Some(piv) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return BigRational::zero();
        };
        if piv != c {
            m.swap(c, piv);
            d = -d;
        }
        d *= &m[c][c];
        for r in c + 1..n {
            let f = &m[r][c] / &m[c][c];
            for k in c..n {
                let s = &f * &m[c][k];
                m[r][k] -= s;
            }
        }
    }
    d
}

/// The stiffness-like matrix: 2 on the diagonal, -1 next to it, `(n+1)/n` in the corner.
pub fn string_matrix(n: usize) -> Vec<Vec<BigRational>> {
    let mut b = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        b[i][i] = rat(2, 1);
        if i + 1 < n {
            b[i][i + 1] = rat(-1, 1);
            b[i + 1][i] = rat(-1, 1);
        }
    }
    b[n - 1][n - 1] = rat(n as i64 + 1, n as i64);
    b
}

/// Target eigenvalues `-a_k` with `a_k = 1/((2k)^2 - 1)`.
pub fn assigned_roots(n: usize) -> Vec<BigRational> {
    (1..=n as i64).map(|k| rat(1, 4 * k * k - 1)).collect()
}

fn elementary_symmetric(a: &[BigRational]) -> Vec<BigRational> {
    let mut e = vec![BigRational::zero(); a.len() + 1];
    e[0] = BigRational::one();
    for (i, x) in a.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            let t = &e[k - 1] * x;
            e[k] += t;
        }
    }
    e
}

/// `p_k = sum_{|S|=k} det(B^-1[S,S]) x^S - e_k(a)`, `k = 1..n`: the coefficient
/// of `s^{n-k}` in `det(sI + B^-1 diag x) - prod (s + a_k)`.
pub fn eig_assign_polynomials(n: usize) -> Vec<Polynomial> {
    assert!(
        (2..=EIG_ASSIGN_MAX_N).contains(&n),
        "eigenvalue assignment needs 2 <= n <= {EIG_ASSIGN_MAX_N}"
    );
    let binv = inverse(&string_matrix(n)).expect("string matrix is nonsingular");
    let e = elementary_symmetric(&assigned_roots(n));
    let mut ps: Vec<Polynomial> = (1..=n)
        .map(|k| Polynomial::constant(n, -e[k].clone()))
        .collect();
    for mask in 1u32..(1 << n) {
        let s: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let sub: Vec<Vec<BigRational>> = s
            .iter()
            .map(|&i| s.iter().map(|&j| binv[i][j].clone()).collect())
            .collect();
        let c = det(sub);
        if c.is_zero() {
            continue;
        }
        let mut powers = vec![0u32; n];
        for &i in &s {
            powers[i] = 1;
        }
        let k = s.len();
        ps[k - 1] = ps[k - 1]
            .add(&Polynomial::monomial(Exponent::new(powers), c))
            .expect("same space");
    }
    ps
}

/// `min sum_{i,j} (x_i - x_j)^2` subject to `p_k(x) = 0` and `|x| <= 1`.
pub fn build_eig_assign(n: usize) -> PopProblem {
    let v = VarSpace::indexed("x", n);
    let mut s = SemialgebraicSet::new(v);
    s.equalities = eig_assign_polynomials(n);
    s.ball_radius = Some(BigRational::one());
    let mut obj = Polynomial::zero(n);
    for i in 0..n {
        for j in 0..n {
            let d = Polynomial::var(n, i)
                .sub(&Polynomial::var(n, j))
                .expect("same space");
            obj = obj.add(&d.pow(2)).expect("same space");
        }
    }
    PopProblem {
        objective: obj,
        set: s,
    }
}

/// `min int_0^1 x^4 + (u^2 - 1)^2 dt`, `x' = u`, `x(0) = x(1) = 0`.
pub fn build_bolza() -> GmpProblem {
    let txu = VarSpace::new(["t", "x", "u"]).expect("distinct names");
    let mut d = DynamicsSpec::new(Some("t"), &["x"], &["u"]).expect("distinct names");
    d.cells.push(Cell {
        measure: "mu".into(),
        f: vec![p("u", &txu)],
    });
    d.lagrangian = Some(p("x^4 + (u^2 - 1)^2", &txu));
    d.horizon = Horizon::Fixed(BigRational::one());
    d.initial = Endpoint::Dirac(vec![BigRational::zero()]);
    d.terminal = Endpoint::Dirac(vec![BigRational::zero()]);
    GmpProblem {
        measures: vec![MeasureDecl::new(
            "mu",
            set(&txu, &["t * (1 - t)", "1 - u^2", "1 - x^2"]),
        )],
        constraints: vec![],
        objective: vec![],
        sense: Sense::Min,
        dynamics: Some(d),
    }
}

/// `min int x^2 + u^2 dt`, `x' = u`, from `delta_1` to `delta_0`, free horizon.
pub fn build_lqr() -> GmpProblem {
    let xu = VarSpace::new(["x", "u"]).expect("distinct names");
    let mut d = DynamicsSpec::new(None, &["x"], &["u"]).expect("distinct names");
    d.cells.push(Cell {
        measure: "mu".into(),
        f: vec![p("u", &xu)],
    });
    d.lagrangian = Some(p("x^2 + u^2", &xu));
    d.initial = Endpoint::Dirac(vec![BigRational::one()]);
    d.terminal = Endpoint::Dirac(vec![BigRational::zero()]);
    GmpProblem {
        measures: vec![MeasureDecl::new("mu", SemialgebraicSet::new(xu))],
        constraints: vec![],
        objective: vec![],
        sense: Sense::Min,
        dynamics: Some(d),
    }
}

/// `x' = -x` from `mu0` on `[1, 2]` to `muT` on `[-1/2, 1/2]` inside `[-2, 2]`,
/// `mass(mu0) = 1`, `min <x^2, mu>`.
pub fn build_occtraj() -> GmpProblem {
    let x = VarSpace::new(["x"]).expect("one name");
    let mut d = DynamicsSpec::new(None, &["x"], &[]).expect("one name");
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
        constraints: vec![unit_mass("mu0", 1)],
        objective: vec![("mu".into(), p("x^2", &x))],
        sense: Sense::Min,
        dynamics: Some(d),
    }
}

/// Horizon of [`build_saturation_cells`].
pub const SATURATION_HORIZON: i64 = 2;

/// Double integrator `x1' = x2`, `x2' = sat(y)` with `y = -x1 - 2 x2`, split into
/// the linear cell and the two saturated cells. Initial states in the disc of
/// radius 1/2 around `(1, 0)`, `T = 2`, maximize the terminal norm (as
/// `min <-|x|^2, muT>`).
pub fn build_saturation_cells() -> GmpProblem {
    let names = ["t", "x1", "x2"];
    let tx = VarSpace::new(names).expect("distinct names");
    let x = VarSpace::new(["x1", "x2"]).expect("distinct names");
    let mut d = DynamicsSpec::new(Some("t"), &["x1", "x2"], &[]).expect("distinct names");
    let y = "(-x1 - 2*x2)";
    let cells = [
        ("mu_lin", format!("1 - {y}^2"), y.to_string()),
        ("mu_up", format!("{y} - 1"), "1".to_string()),
        ("mu_low", format!("-1 - {y}"), "-1".to_string()),
    ];
    let mut measures = Vec::new();
    for (name, region, rhs) in &cells {
        d.cells.push(Cell {
            measure: name.to_string(),
            f: vec![p("x2", &tx), p(rhs, &tx)],
        });
        measures.push(MeasureDecl::new(
            *name,
            set(&tx, &[region, "4 - x1^2 - x2^2"]),
        ));
    }
    measures.push(MeasureDecl::new(
        "mu0",
        set(&x, &["1/4 - (x1 - 1)^2 - x2^2"]),
    ));
    measures.push(MeasureDecl::new("muT", set(&x, &["4 - x1^2 - x2^2"])));
    d.horizon = Horizon::Fixed(rat(SATURATION_HORIZON, 1));
    d.terminal_cost = Some(p("-x1^2 - x2^2", &tx));
    d.initial = Endpoint::Measure("mu0".into());
    d.terminal = Endpoint::Measure("muT".into());
    GmpProblem {
        measures,
        constraints: vec![unit_mass("mu0", 2)],
        objective: vec![],
        sense: Sense::Min,
        dynamics: Some(d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::certify;
    use crate::gmp::solve_gmp;
    use crate::relaxation::build_relaxation;
    use crate::sdp::{SdpStatus, SolveOptions};

    /// Roots of 3/4 x1 + x2 = 2/5, x1 x2 = 2/45 closest to each other.
    fn eig2_oracle() -> [f64; 2] {
        // 3/4 x1^2 - 2/5 x1 + 2/45 = 0
        let (a, b, c) = (0.75f64, -0.4f64, 2.0 / 45.0);
        let disc = (b * b - 4.0 * a * c).sqrt();
        [(-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)]
            .map(|x1| [x1, 0.4 - 0.75 * x1])
            .into_iter()
            .min_by(|u, v| ((u[0] - u[1]).abs()).total_cmp(&(v[0] - v[1]).abs()))
            .unwrap()
    }

    #[test]
    fn corner_entry_gives_expected_inverse() {
        let inv = inverse(&string_matrix(2)).unwrap();
        assert_eq!(
            inv,
            vec![vec![rat(3, 4), rat(1, 2)], vec![rat(1, 2), rat(1, 1)]]
        );
    }

    #[test]
    fn eig_assign_two() {
        let v = VarSpace::indexed("x", 2);
        let ps = eig_assign_polynomials(2);
        assert_eq!(ps[0], p("3/4*x1 + x2 - 2/5", &v));
        assert_eq!(ps[1], p("1/2*x1*x2 - 1/45", &v));
        let x = eig2_oracle();
        assert!(
            (x[0] - 0.157801).abs() < 1e-6 && (x[1] - 0.281649).abs() < 1e-6,
            "{x:?}"
        );
        for q in &ps {
            assert!(q.eval(&x).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn eig_assign_three_coefficients() {
        let v = VarSpace::indexed("x", 3);
        let ps = eig_assign_polynomials(3);
        assert_eq!(ps[0], p("5/6*x1 + 4/3*x2 + 3/2*x3 - 3/7", &v));
        assert_eq!(ps[1], p("2/3*x1*x2 + x1*x3 + x2*x3 - 53/1575", &v));
        assert_eq!(ps[2], p("1/2*x1*x2*x3 - 1/1575", &v));
    }

    #[test]
    fn eig_assign_degrees() {
        for n in 2..=EIG_ASSIGN_MAX_N {
            let ps = eig_assign_polynomials(n);
            for (k, q) in ps.iter().enumerate() {
                assert_eq!(q.degree(), k + 1);
            }
        }
    }

    #[test]
    fn eig_assign_two_solves_to_oracle() {
        let pop = build_eig_assign(2);
        let r = pop.r_x();
        let s = build_relaxation(&pop, r)
            .unwrap()
            .solve(&SolveOptions::default())
            .unwrap();
        assert_eq!(s.status(), SdpStatus::Optimal);
        let c = certify(&s.moments[0], &pop.set, r, crate::extract::DEFAULT_RANK_TOL).unwrap();
        assert!(c.flat, "{c:?}");
        let x = eig2_oracle();
        let a = &c.atoms[0].point;
        assert!(
            (a[0] - x[0]).abs() < 1e-6 && (a[1] - x[1]).abs() < 1e-6,
            "{a:?} {x:?}"
        );
    }

    #[test]
    fn eig_assign_three_at_minimal_order() {
        let pop = build_eig_assign(3);
        let r = pop.r_x();
        assert_eq!(r, 2);
        let s = build_relaxation(&pop, r)
            .unwrap()
            .solve(&SolveOptions::default())
            .unwrap();
        let c = certify(&s.moments[0], &pop.set, r, crate::extract::DEFAULT_RANK_TOL).unwrap();
        assert!(c.flat, "{c:?}");
        assert_eq!(c.atoms.len(), 1);
        let want = [0.093786, 0.086296, 0.15690];
        for (a, w) in c.atoms[0].point.iter().zip(want) {
            assert!((a - w).abs() < 1e-3, "{:?}", c.atoms[0].point);
        }
    }

    #[test]
    fn saturation_cells_take_the_whole_horizon() {
        let g = build_saturation_cells();
        let opts = SolveOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            ..SolveOptions::default()
        };
        let s = solve_gmp(&g, 2, &opts).unwrap();
        let total: f64 = ["mu_lin", "mu_up", "mu_low"]
            .iter()
            .map(|m| s.mass(m).unwrap())
            .sum();
        assert!(
            (total - SATURATION_HORIZON as f64).abs() < 1e-6,
            "{total} {:?}",
            s.status()
        );
        assert!((s.mass("muT").unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bolza_order_two() {
        let s = solve_gmp(&build_bolza(), 2, &SolveOptions::default()).unwrap();
        assert!(
            s.bound > -1e-6 && s.bound < 1e-3,
            "{} {:?}",
            s.bound,
            s.status()
        );
    }
}
