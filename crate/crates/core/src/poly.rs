//! Sparse multivariate polynomials with exact rational coefficients, and the
//! graded lexicographic (grlex) monomial indexing used by every moment matrix.
//!
//! Monomials of `n` variables are ordered by total degree first, then by
//! descending lexicographic order of the exponent tuple, so for `n = 2`:
//! `1, x1, x2, x1^2, x1*x2, x2^2, ...`.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("monomial count C({n}+{d}, {n}) overflows the platform integer")]
    CountOverflow { n: usize, d: usize },
    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("variable `{0}` is not present in the target variable space")]
    UnknownVariable(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("coefficient {0} is not a finite number")]
    NonFinite(f64),
}

/// Exact rational constructor, `num / den`.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact rational value of a finite binary float.
pub fn rat_from_f64(x: f64) -> Result<BigRational, PolyError> {
    BigRational::from_float(x).ok_or(PolyError::NonFinite(x))
}

pub fn rat_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // ratios of huge integers: fall back to a log-scaled quotient
        let n = q.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = q.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// Exponent tuple `alpha` of the monomial `x^alpha`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Exponent(Vec<u32>);

impl Exponent {
    pub fn new(powers: Vec<u32>) -> Self {
        Exponent(powers)
    }

    pub fn zero(n: usize) -> Self {
        Exponent(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut p = vec![0; n];
        p[i] = 1;
        Exponent(p)
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&p| p as usize).sum()
    }

    pub fn powers(&self) -> &[u32] {
        &self.0
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        debug_assert_eq!(self.0.len(), other.0.len());
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x^self` evaluated at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&p, &v)| v.powi(p as i32))
            .product()
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            // within a degree, lexicographically larger tuples come first
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Number of monomials of `n` variables of degree at most `d`, i.e. `C(n+d, n)`.
pub fn monomial_count(n: usize, d: usize) -> Result<usize, PolyError> {
    let k = n.min(d) as u128;
    let top = (n + d) as u128;
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (top - i) / (i + 1) stays an integer at every step
        c = c
            .checked_mul(top - i)
            .ok_or(PolyError::CountOverflow { n, d })?
            / (i + 1);
    }
    usize::try_from(c).map_err(|_| PolyError::CountOverflow { n, d })
}

fn binom(n: usize, k: usize) -> usize {
    monomial_count(k, n - k).expect("binomial within range")
}

/// Position of `e` in the grlex enumeration of all exponents with `e.nvars()` entries.
pub fn grlex_index(e: &Exponent) -> usize {
    let n = e.nvars();
    if n == 0 {
        return 0;
    }
    let d = e.degree();
    let mut idx = if d == 0 {
        0
    } else {
        monomial_count(n, d - 1).expect("index overflow")
    };
    // count degree-d exponents that are lexicographically larger than e
    let mut rem = d;
    for i in 0..n - 1 {
        let ei = e.0[i] as usize;
        let tail = n - i - 1;
        for v in (ei + 1)..=rem {
            // compositions of rem - v into `tail` parts
            idx += binom(rem - v + tail - 1, tail - 1);
        }
        rem -= ei;
    }
    idx
}

/// Inverse of [`grlex_index`].
pub fn grlex_exponent(n: usize, k: usize) -> Exponent {
    if n == 0 {
        return Exponent(vec![]);
    }
    let mut d = 0;
    while monomial_count(n, d).expect("index overflow") <= k {
        d += 1;
    }
    let mut offset = k - if d == 0 {
        0
    } else {
        monomial_count(n, d - 1).unwrap()
    };
    let mut powers = vec![0u32; n];
    let mut rem = d;
    for i in 0..n - 1 {
        let tail = n - i - 1;
        // try the largest power first
        let mut v = rem;
        loop {
            let block = binom(rem - v + tail - 1, tail - 1);
            if offset < block {
                break;
            }
            offset -= block;
            v -= 1;
        }
        powers[i] = v as u32;
        rem -= v;
    }
    powers[n - 1] = rem as u32;
    Exponent(powers)
}

/// All exponents of `n` variables up to degree `d`, in grlex order, with a reverse map.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    n: usize,
    d: usize,
    exps: Vec<Exponent>,
    index: HashMap<Exponent, usize>,
}

impl MonomialBasis {
    pub fn new(n: usize, d: usize) -> Self {
        let mut exps = Vec::new();
        for deg in 0..=d {
            push_degree(n, deg, &mut vec![0; n], 0, &mut exps);
        }
        let index = exps
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        MonomialBasis { n, d, exps, index }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[Exponent] {
        &self.exps
    }

    pub fn get(&self, i: usize) -> &Exponent {
        &self.exps[i]
    }

    pub fn index_of(&self, e: &Exponent) -> Option<usize> {
        self.index.get(e).copied()
    }
}

// lexicographically descending enumeration of the exponents of one degree
fn push_degree(n: usize, rem: usize, cur: &mut Vec<u32>, pos: usize, out: &mut Vec<Exponent>) {
    if n == 0 {
        if rem == 0 {
            out.push(Exponent(vec![]));
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = rem as u32;
        out.push(Exponent(cur.clone()));
        return;
    }
    for v in (0..=rem).rev() {
        cur[pos] = v as u32;
        push_degree(n, rem - v, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

/// Ordered list of variable names. The position of a name is its variable index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarSpace {
    names: Vec<String>,
}

impl VarSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, PolyError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(PolyError::DuplicateVariable(a.clone()));
            }
        }
        Ok(VarSpace { names })
    }

    /// `x1, ..., xn`.
    pub fn indexed(prefix: &str, n: usize) -> Self {
        VarSpace {
            names: (1..=n).map(|i| format!("{prefix}{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Sparse polynomial `sum_alpha p_alpha x^alpha` with exact rational coefficients.
///
/// Zero coefficients are never stored. The zero polynomial has degree 0.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Exponent, BigRational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        Self::monomial(Exponent::zero(nvars), c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, BigRational::one())
    }

    /// The coordinate polynomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        Self::monomial(Exponent::unit(nvars, i), BigRational::one())
    }

    pub fn monomial(e: Exponent, c: BigRational) -> Self {
        let mut p = Polynomial::zero(e.nvars());
        if !c.is_zero() {
            p.terms.insert(e, c);
        }
        p
    }

    /// Build from `(exponent, coefficient)` pairs, merging duplicates.
    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Exponent, BigRational)>,
    ) -> Result<Self, PolyError> {
        let mut p = Polynomial::zero(nvars);
        for (e, c) in terms {
            if e.nvars() != nvars {
                return Err(PolyError::Dimension {
                    expected: nvars,
                    got: e.nvars(),
                });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    /// Build from float coefficients, each converted exactly.
    pub fn from_f64_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, f64)>,
    ) -> Result<Self, PolyError> {
        let mut p = Polynomial::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(PolyError::Dimension {
                    expected: nvars,
                    got: e.len(),
                });
            }
            p.add_term(Exponent(e), rat_from_f64(c)?);
        }
        Ok(p)
    }

    fn add_term(&mut self, e: Exponent, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Exponent::degree).max().unwrap_or(0)
    }

    /// Terms in ascending grlex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, e: &Exponent) -> BigRational {
        self.terms.get(e).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn constant_term(&self) -> BigRational {
        self.coeff(&Exponent::zero(self.nvars))
    }

    pub fn f64_terms(&self) -> Vec<(Exponent, f64)> {
        self.terms
            .iter()
            .map(|(e, c)| (e.clone(), rat_to_f64(c)))
            .collect()
    }

    /// Coefficient vector in the grlex basis of degree `d`.
    pub fn coeff_vector(&self, d: usize) -> Vec<f64> {
        let n = monomial_count(self.nvars, d).expect("basis size");
        let mut v = vec![0.0; n];
        for (e, c) in &self.terms {
            let k = grlex_index(e);
            if k < n {
                v[k] = rat_to_f64(c);
            }
        }
        v
    }

    fn check_dim(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::Dimension {
                expected: self.nvars,
                got: other.nvars,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut acc: BTreeMap<Exponent, BigRational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                *acc.entry(ea.add(eb)).or_insert_with(BigRational::zero) += ca * cb;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(Polynomial {
            nvars: self.nvars,
            terms: acc,
        })
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::one(self.nvars);
        for _ in 0..k {
            out = out.mul(self).expect("same space");
        }
        out
    }

    pub fn scale(&self, s: &BigRational) -> Polynomial {
        if s.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    /// Multiply by the monomial `x^e`.
    pub fn shift(&self, e: &Exponent) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(a, c)| (a.add(e), c.clone()))
                .collect(),
        }
    }

    /// Partial derivative with respect to variable `i`.
    pub fn partial(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            let p = e.0[i];
            if p == 0 {
                continue;
            }
            let mut d = e.0.clone();
            d[i] -= 1;
            out.add_term(Exponent(d), c * BigRational::from_integer(BigInt::from(p)));
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.nvars {
            return Err(PolyError::Dimension {
                expected: self.nvars,
                got: x.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| rat_to_f64(c) * e.eval(x))
            .sum())
    }

    pub fn eval_exact(&self, x: &[BigRational]) -> Result<BigRational, PolyError> {
        if x.len() != self.nvars {
            return Err(PolyError::Dimension {
                expected: self.nvars,
                got: x.len(),
            });
        }
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for (p, v) in e.0.iter().zip(x) {
                for _ in 0..*p {
                    m *= v;
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Substitute the constant `value` for variable `i`; the variable remains in the space.
    pub fn substitute(&self, i: usize, value: &BigRational) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut d = e.0.clone();
            let p = std::mem::replace(&mut d[i], 0);
            let mut coef = c.clone();
            for _ in 0..p {
                coef *= value;
            }
            out.add_term(Exponent(d), coef);
        }
        out
    }

    /// Replace `x_i` by `s * x_i`.
    pub fn scale_var(&self, i: usize, s: &BigRational) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut coef = c.clone();
            for _ in 0..e.0[i] {
                coef *= s;
            }
            out.add_term(e.clone(), coef);
        }
        out
    }

    /// Rewrite a polynomial over `from` as one over `to`, matching variables by name.
    ///
    /// Fails if a variable that actually occurs in `self` is missing from `to`.
    pub fn remap(&self, from: &VarSpace, to: &VarSpace) -> Result<Polynomial, PolyError> {
        if from.len() != self.nvars {
            return Err(PolyError::Dimension {
                expected: self.nvars,
                got: from.len(),
            });
        }
        let mut target = Vec::with_capacity(from.len());
        for name in from.names() {
            target.push(to.position(name));
        }
        let mut out = Polynomial::zero(to.len());
        for (e, c) in &self.terms {
            let mut d = vec![0u32; to.len()];
            for (i, &p) in e.0.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                match target[i] {
                    Some(j) => d[j] += p,
                    None => return Err(PolyError::UnknownVariable(from.names()[i].clone())),
                }
            }
            out.add_term(Exponent(d), c.clone());
        }
        Ok(out)
    }

    /// Variables that occur with a nonzero power.
    pub fn support_vars(&self) -> Vec<usize> {
        let mut used = vec![false; self.nvars];
        for e in self.terms.keys() {
            for (i, &p) in e.0.iter().enumerate() {
                if p > 0 {
                    used[i] = true;
                }
            }
        }
        (0..self.nvars).filter(|&i| used[i]).collect()
    }

    /// Render using variable names; the output is accepted by the text parser.
    pub fn to_string_with(&self, vars: &VarSpace) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono: Vec<String> =
                e.0.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0)
                    .map(|(i, &p)| {
                        let name = &vars.names()[i];
                        if p == 1 {
                            name.clone()
                        } else {
                            format!("{name}^{p}")
                        }
                    })
                    .collect();
            if mono.is_empty() {
                out.push_str(&a.to_string());
            } else {
                if !a.is_one() {
                    out.push_str(&a.to_string());
                    out.push('*');
                }
                out.push_str(&mono.join("*"));
            }
        }
        out
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            self.to_string_with(&VarSpace::indexed("x", self.nvars))
        )
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            self.to_string_with(&VarSpace::indexed("x", self.nvars))
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_exponents(n: usize, d: usize) -> Vec<Vec<u32>> {
        // every tuple in [0, d]^n with sum <= d
        let mut out = Vec::new();
        let total = (d + 1).pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut e = Vec::with_capacity(n);
            for _ in 0..n {
                e.push((c % (d + 1)) as u32);
                c /= d + 1;
            }
            if e.iter().map(|&p| p as usize).sum::<usize>() <= d {
                out.push(e);
            }
        }
        out
    }

    #[test]
    fn monomial_count_examples() {
        assert_eq!(monomial_count(2, 2).unwrap(), 6);
        assert_eq!(monomial_count(5, 0).unwrap(), 1);
        assert_eq!(monomial_count(3, 2).unwrap(), brute_exponents(3, 2).len());
        assert_eq!(monomial_count(3, 2).unwrap(), 10);
    }

    #[test]
    fn monomial_count_matches_enumeration() {
        for n in 0..=5 {
            for d in 0..=6 {
                assert_eq!(monomial_count(n, d).unwrap(), brute_exponents(n, d).len());
            }
        }
    }

    #[test]
    fn monomial_count_overflow_is_an_error() {
        assert!(matches!(
            monomial_count(200, 200),
            Err(PolyError::CountOverflow { .. })
        ));
    }

    #[test]
    fn grlex_two_variables() {
        let expected = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        for (k, &(a, b)) in expected.iter().enumerate() {
            let e = Exponent::new(vec![a, b]);
            assert_eq!(grlex_index(&e), k);
            assert_eq!(grlex_exponent(2, k), e);
        }
        assert_eq!(grlex_exponent(2, 4), Exponent::new(vec![1, 1]));
    }

    #[test]
    fn grlex_three_variables_first_four() {
        let first: Vec<Exponent> = (0..4).map(|k| grlex_exponent(3, k)).collect();
        let mut sorted: Vec<Exponent> = brute_exponents(3, 1)
            .into_iter()
            .map(Exponent::new)
            .collect();
        sorted.sort();
        assert_eq!(first, sorted);
        assert_eq!(first[1], Exponent::new(vec![1, 0, 0]));
        assert_eq!(first[3], Exponent::new(vec![0, 0, 1]));
    }

    #[test]
    fn basis_agrees_with_closed_form_and_sort() {
        for n in 1..=4 {
            let b = MonomialBasis::new(n, 4);
            let mut brute: Vec<Exponent> = brute_exponents(n, 4)
                .into_iter()
                .map(Exponent::new)
                .collect();
            brute.sort();
            assert_eq!(b.exponents(), &brute[..]);
            for (k, e) in b.exponents().iter().enumerate() {
                assert_eq!(grlex_index(e), k);
            }
        }
    }

    fn example_poly() -> Polynomial {
        // 1 + 2 x2 + 3 x1^2 + 4 x1 x2
        Polynomial::from_f64_terms(
            2,
            vec![
                (vec![0, 0], 1.0),
                (vec![0, 1], 2.0),
                (vec![2, 0], 3.0),
                (vec![1, 1], 4.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn eval_example() {
        assert_eq!(example_poly().eval(&[1.0, 1.0]).unwrap(), 10.0);
        assert!(matches!(
            example_poly().eval(&[1.0]),
            Err(PolyError::Dimension {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn coefficient_vector_in_grlex() {
        assert_eq!(
            example_poly().coeff_vector(2),
            vec![1.0, 0.0, 2.0, 3.0, 4.0, 0.0]
        );
    }

    #[test]
    fn partial_power_rule() {
        let p = Polynomial::monomial(Exponent::new(vec![2, 1]), BigRational::one());
        let d = p.partial(0);
        assert_eq!(
            d,
            Polynomial::monomial(Exponent::new(vec![1, 1]), rat(2, 1))
        );
        assert!(p.partial(0).partial(0).partial(0).is_zero());
    }

    #[test]
    fn product_of_variables() {
        let p = Polynomial::var(2, 0).mul(&Polynomial::var(2, 1)).unwrap();
        assert_eq!(p.degree(), 2);
        assert_eq!(p.coeff(&Exponent::new(vec![1, 1])), BigRational::one());
        assert_eq!(p.num_terms(), 1);
    }

    #[test]
    fn zero_polynomial_has_degree_zero_and_no_terms() {
        let p = example_poly();
        let z = p.sub(&p).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.degree(), 0);
        assert_eq!(z.num_terms(), 0);
    }

    #[test]
    fn remap_by_name() {
        let from = VarSpace::new(["x", "u"]).unwrap();
        let to = VarSpace::new(["t", "x", "u"]).unwrap();
        let p = Polynomial::var(2, 1).mul(&Polynomial::var(2, 0)).unwrap();
        let q = p.remap(&from, &to).unwrap();
        assert_eq!(q.coeff(&Exponent::new(vec![0, 1, 1])), BigRational::one());
        let back = VarSpace::new(["x"]).unwrap();
        assert!(matches!(
            p.remap(&from, &back),
            Err(PolyError::UnknownVariable(v)) if v == "u"
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(VarSpace::new(["x", "x"]).is_err());
    }

    #[test]
    fn substitution_and_scaling() {
        // p = t^2 x + 3
        let p = Polynomial::from_f64_terms(2, vec![(vec![2, 1], 1.0), (vec![0, 0], 3.0)]).unwrap();
        let at2 = p.substitute(0, &rat(2, 1));
        assert_eq!(at2.coeff(&Exponent::new(vec![0, 1])), rat(4, 1));
        let scaled = p.scale_var(0, &rat(1, 2));
        assert_eq!(scaled.coeff(&Exponent::new(vec![2, 1])), rat(1, 4));
    }
}
