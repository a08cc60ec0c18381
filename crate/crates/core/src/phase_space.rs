//! Commutative algebra of polynomial phase-space functions `u(q, p)` with the
//! Poisson bracket, and the unary operators `Y_u` (multiplication) and `Z_u`
//! (bracket with `u`) acting on it.
//!
//! Bracket convention: `{u, v} = du/dp dv/dq - du/dq dv/dp`, so `{p, q} = 1`.
//! This is the negative of the textbook `{u, v} = u_q v_p - u_p v_q`;
//! multiply by -1 to convert.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::parse::{parse_expression, ParseTarget};
use crate::scalar::{Coeff, CoeffDisplay, Exact, Rational};

/// Polynomial in `q` and `p` with exact complex-rational coefficients.
///
/// Keys are `(degree in q, degree in p)`. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct PhasePolynomial {
    terms: BTreeMap<(u32, u32), Exact>,
}

impl PhasePolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Exact::one())
    }

    pub fn constant(c: Exact) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: Exact, q_deg: u32, p_deg: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !Coeff::is_zero(&c) {
            terms.insert((q_deg, p_deg), c);
        }
        Self { terms }
    }

    pub fn q() -> Self {
        Self::monomial(Exact::one(), 1, 0)
    }

    pub fn p() -> Self {
        Self::monomial(Exact::one(), 0, 1)
    }

    /// Builds from `(q_deg, p_deg, coefficient)` triples, merging duplicates.
    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, Exact)>) -> Self {
        let mut out = Self::zero();
        for (i, k, c) in terms {
            out.add_term((i, k), c);
        }
        out
    }

    fn add_term(&mut self, key: (u32, u32), c: Exact) {
        if Coeff::is_zero(&c) {
            return;
        }
        let slot = self.terms.entry(key).or_insert_with(<Exact as Coeff>::zero);
        *slot = slot.clone() + c;
        if Coeff::is_zero(slot) {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &Exact)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, q_deg: u32, p_deg: u32) -> Exact {
        self.terms.get(&(q_deg, p_deg)).cloned().unwrap_or_else(<Exact as Coeff>::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|(i, k)| i + k).max()
    }

    pub fn scale(&self, c: &Exact) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(i, k), v)| (i, k, v.clone() * c.clone())))
    }

    pub fn d_dq(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|((i, _), _)| *i > 0)
                .map(|(&(i, k), c)| (i - 1, k, c.clone() * Exact::from_i64(i as i64))),
        )
    }

    pub fn d_dp(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|((_, k), _)| *k > 0)
                .map(|(&(i, k), c)| (i, k - 1, c.clone() * Exact::from_i64(k as i64))),
        )
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Complex-float evaluation at a phase-space point.
    pub fn eval(&self, q: f64, p: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(&(i, k), c)| c.to_c64() * q.powi(i as i32) * p.powi(k as i32))
            .sum()
    }

    /// Real part of [`eval`](Self::eval); used for Hamiltonians.
    pub fn eval_real(&self, q: f64, p: f64) -> f64 {
        self.eval(q, p).re
    }

    /// True when every coefficient has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.im.is_zero())
    }

    /// True when `u(-q, p) = u(q, p)`.
    pub fn is_even_in_q(&self) -> bool {
        self.terms.keys().all(|(i, _)| i % 2 == 0)
    }
}

impl<'a> Add<&'a PhasePolynomial> for &'a PhasePolynomial {
    type Output = PhasePolynomial;
    fn add(self, rhs: &PhasePolynomial) -> PhasePolynomial {
        let mut out = self.clone();
        for (&k, c) in &rhs.terms {
            out.add_term(k, c.clone());
        }
        out
    }
}

impl<'a> Sub<&'a PhasePolynomial> for &'a PhasePolynomial {
    type Output = PhasePolynomial;
    fn sub(self, rhs: &PhasePolynomial) -> PhasePolynomial {
        let mut out = self.clone();
        for (&k, c) in &rhs.terms {
            out.add_term(k, -c.clone());
        }
        out
    }
}

impl<'a> Mul<&'a PhasePolynomial> for &'a PhasePolynomial {
    type Output = PhasePolynomial;
    fn mul(self, rhs: &PhasePolynomial) -> PhasePolynomial {
        let mut out = PhasePolynomial::zero();
        for (&(i1, k1), c1) in &self.terms {
            for (&(i2, k2), c2) in &rhs.terms {
                out.add_term((i1 + i2, k1 + k2), c1.clone() * c2.clone());
            }
        }
        out
    }
}

impl Neg for &PhasePolynomial {
    type Output = PhasePolynomial;
    fn neg(self) -> PhasePolynomial {
        self.scale(&Exact::from_i64(-1))
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<PhasePolynomial> for PhasePolynomial {
            type Output = PhasePolynomial;
            fn $m(self, rhs: PhasePolynomial) -> PhasePolynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl ParseTarget for PhasePolynomial {
    type Context = ();
    fn constant(c: Exact) -> Self {
        PhasePolynomial::constant(c)
    }
    fn variable(_: &(), name: &str) -> Option<Self> {
        match name {
            "q" => Some(Self::q()),
            "p" => Some(Self::p()),
            _ => None,
        }
    }
    fn add(self, other: Self) -> Self {
        &self + &other
    }
    fn sub(self, other: Self) -> Self {
        &self - &other
    }
    fn mul(self, other: Self) -> Self {
        &self * &other
    }
}

impl FromStr for PhasePolynomial {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_expression(s)
    }
}

fn write_factor(f: &mut fmt::Formatter<'_>, first: &mut bool, sym: &str, pow: u32) -> fmt::Result {
    if pow == 0 {
        return Ok(());
    }
    if !*first {
        f.write_str(" ")?;
    }
    *first = false;
    if pow == 1 {
        f.write_str(sym)
    } else {
        write!(f, "{sym}^{pow}")
    }
}

impl fmt::Display for PhasePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // Highest total degree first reads most naturally.
        let mut keys: Vec<_> = self.terms.keys().copied().collect();
        keys.sort_by(|a, b| (b.0 + b.1).cmp(&(a.0 + a.1)).then(b.cmp(a)));
        for (idx, key) in keys.iter().enumerate() {
            let (neg, mag, unit) = self.terms[key].split_sign();
            match (idx, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let is_const = key.0 == 0 && key.1 == 0;
            let mut first = true;
            if !unit || is_const {
                f.write_str(&mag)?;
                first = false;
            }
            write_factor(f, &mut first, "q", key.0)?;
            write_factor(f, &mut first, "p", key.1)?;
        }
        Ok(())
    }
}

impl fmt::Debug for PhasePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhasePolynomial({self})")
    }
}

/// `{u, v} = u_p v_q - u_q v_p`.
pub fn poisson_bracket(u: &PhasePolynomial, v: &PhasePolynomial) -> PhasePolynomial {
    &(&u.d_dp() * &v.d_dq()) - &(&u.d_dq() * &v.d_dp())
}

/// `Y_u(v) = u v`.
pub fn apply_y(u: &PhasePolynomial, v: &PhasePolynomial) -> PhasePolynomial {
    u * v
}

/// `Z_u(v) = {u, v}`; for `u = H` this is the Liouvillian action.
pub fn apply_z(u: &PhasePolynomial, v: &PhasePolynomial) -> PhasePolynomial {
    poisson_bracket(u, v)
}

/// Linear operator on [`PhasePolynomial`] built from multiplication and the
/// bracket.
#[derive(Clone, Debug, PartialEq)]
pub enum UnaryPhaseOperator {
    /// `Y_u`
    Multiply(PhasePolynomial),
    /// `Z_u`
    Poisson(PhasePolynomial),
    /// Operator product; the last entry acts first, as in `[A, B, C] = A B C`.
    Compose(Vec<UnaryPhaseOperator>),
    /// Sum of the listed operators, each with an exact weight.
    Combination(Vec<(Exact, UnaryPhaseOperator)>),
}

impl UnaryPhaseOperator {
    pub fn y(u: PhasePolynomial) -> Self {
        Self::Multiply(u)
    }

    pub fn z(u: PhasePolynomial) -> Self {
        Self::Poisson(u)
    }

    pub fn then(self, first: UnaryPhaseOperator) -> Self {
        Self::Compose(vec![self, first])
    }

    /// `[A, B] = A B - B A`.
    pub fn commutator(a: &UnaryPhaseOperator, b: &UnaryPhaseOperator) -> Self {
        Self::Combination(vec![
            (Exact::one(), Self::Compose(vec![a.clone(), b.clone()])),
            (Exact::from_i64(-1), Self::Compose(vec![b.clone(), a.clone()])),
        ])
    }

    pub fn minus(self, other: UnaryPhaseOperator) -> Self {
        Self::Combination(vec![(Exact::one(), self), (Exact::from_i64(-1), other)])
    }

    pub fn apply(&self, v: &PhasePolynomial) -> PhasePolynomial {
        match self {
            Self::Multiply(u) => apply_y(u, v),
            Self::Poisson(u) => apply_z(u, v),
            Self::Compose(ops) => ops.iter().rev().fold(v.clone(), |acc, op| op.apply(&acc)),
            Self::Combination(parts) => parts
                .iter()
                .fold(PhasePolynomial::zero(), |acc, (c, op)| &acc + &op.apply(v).scale(c)),
        }
    }
}

/// Residuals of the three commutation relations
/// `[Y_u, Y_v] = 0`, `[Z_u, Y_v] = Y_{u,v}`, `[Z_u, Z_v] = Z_{u,v}` applied to `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemidirectReport {
    pub yy: PhasePolynomial,
    pub zy: PhasePolynomial,
    pub zz: PhasePolynomial,
}

impl SemidirectReport {
    pub fn all_zero(&self) -> bool {
        self.yy.is_zero() && self.zy.is_zero() && self.zz.is_zero()
    }
}

pub fn check_semidirect_relations(
    u: &PhasePolynomial,
    v: &PhasePolynomial,
    w: &PhasePolynomial,
) -> SemidirectReport {
    use UnaryPhaseOperator as Op;
    let uv = poisson_bracket(u, v);
    let yy = Op::commutator(&Op::y(u.clone()), &Op::y(v.clone()));
    let zy = Op::commutator(&Op::z(u.clone()), &Op::y(v.clone())).minus(Op::y(uv.clone()));
    let zz = Op::commutator(&Op::z(u.clone()), &Op::z(v.clone())).minus(Op::z(uv));
    SemidirectReport {
        yy: yy.apply(w),
        zy: zy.apply(w),
        zz: zz.apply(w),
    }
}

/// Convenience: integer-coefficient monomial.
pub fn int_monomial(c: i64, q_deg: u32, p_deg: u32) -> PhasePolynomial {
    PhasePolynomial::monomial(Exact::from_i64(c), q_deg, p_deg)
}

/// Real rational-coefficient monomial `num/den q^i p^k`.
pub fn rational_monomial(num: i64, den: i64, q_deg: u32, p_deg: u32) -> PhasePolynomial {
    let r = Rational::new(BigInt::from(num), BigInt::from(den));
    PhasePolynomial::monomial(Exact::new(r, Rational::zero()), q_deg, p_deg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(s: &str) -> PhasePolynomial {
        s.parse().unwrap()
    }

    #[test]
    fn bracket_sign_convention() {
        assert_eq!(poisson_bracket(&PhasePolynomial::p(), &PhasePolynomial::q()), PhasePolynomial::one());
        assert_eq!(poisson_bracket(&PhasePolynomial::q(), &PhasePolynomial::p()), poly("-1"));
    }

    #[test]
    fn bracket_examples() {
        let u = poly("3 q^2 p - j p^3 + 1/2");
        assert!(poisson_bracket(&u, &u).is_zero());
        assert_eq!(poisson_bracket(&poly("p"), &poly("q^2")), poly("2 q"));
    }

    #[test]
    fn y_examples() {
        let q = PhasePolynomial::q();
        let p = PhasePolynomial::p();
        assert_eq!(apply_y(&q, &p), poly("q p"));
        let v = poly("q^3 - 2 p");
        assert_eq!(apply_y(&PhasePolynomial::one(), &v), v);
        let composed = UnaryPhaseOperator::y(q.clone()).then(UnaryPhaseOperator::y(p.clone()));
        assert_eq!(composed.apply(&PhasePolynomial::one()), poly("q p"));
    }

    #[test]
    fn z_examples() {
        assert_eq!(apply_z(&poly("p"), &poly("q")), PhasePolynomial::one());
        // {H, q} = H_p * 1 - H_q * 0 = p for H = (q^2 + p^2)/2
        let h = poly("(q^2 + p^2)/2");
        assert_eq!(apply_z(&h, &poly("q")), poly("p"));
        assert_eq!(apply_z(&h, &poly("p")), poly("-q"));
        assert!(apply_z(&poly("q^5 p"), &PhasePolynomial::one()).is_zero());
    }

    #[test]
    fn semidirect_examples() {
        let w = poly("q^2 p - 3 q + 7/3 p^4");
        assert!(check_semidirect_relations(&poly("q"), &poly("p"), &w).all_zero());
        let u = poly("q p^2 + j q");
        assert!(check_semidirect_relations(&u, &u, &w).all_zero());
        assert!(check_semidirect_relations(&poly("q^2"), &poly("p^2"), &poly("q p")).all_zero());
    }

    #[test]
    fn wrong_relation_is_detected() {
        // [Z_u, Y_v] is Y_{u,v}, not Y_{v,u}; the report must see a sign flip.
        use UnaryPhaseOperator as Op;
        let (u, v, w) = (poly("q^2"), poly("p^2"), poly("q p"));
        let bad = Op::commutator(&Op::z(u.clone()), &Op::y(v.clone())).minus(Op::y(poisson_bracket(&v, &u)));
        assert!(!bad.apply(&w).is_zero());
    }

    #[test]
    fn display_round_trips_through_parser() {
        for s in ["3/2 q^2 p - j p^3", "-q + 1", "(1/2 + 3 j) q p", "0", "-j"] {
            let p = poly(s);
            let printed = p.to_string();
            assert_eq!(poly(&printed), p, "{s} -> {printed}");
        }
        assert_eq!(poly("3/2 q^2 p - j p^3").to_string(), "3/2 q^2 p - j p^3");
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match "q + x".parse::<PhasePolynomial>() {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!("q^".parse::<PhasePolynomial>().is_err());
        assert!("(q".parse::<PhasePolynomial>().is_err());
    }

    #[test]
    fn float_evaluation_path() {
        let u = poly("0.5 q^2 + 0.5 p^2 + j q");
        let z = u.eval(2.0, 1.0);
        assert!((z.re - 2.5).abs() < 1e-15 && (z.im - 2.0).abs() < 1e-15);
    }
}
