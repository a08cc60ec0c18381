//! The *-algebra generated by `a, a†, b, b†` with `[a, a†] = [b, b†] = 1` and
//! the two families commuting, held in normal-ordered canonical form.
//!
//! A word `(m, n, r, s)` stands for `a†^m a^n b†^r b^s`. Canonical order puts
//! the `a` family before the `b` family and daggered before undaggered powers.
//! The central unit `j` (with `j† = -j`) lives in the complex coefficients, so
//! the adjoint conjugates coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::parse::{parse_expression_with, ParseTarget};
use crate::scalar::{Coeff, CoeffDisplay, Exact, Rational};

pub const DEFAULT_MAX_EXP_ORDER: u32 = 8;

/// Normal-ordered monomial `a†^ad a^a b†^bd b^b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word {
    pub ad: u32,
    pub a: u32,
    pub bd: u32,
    pub b: u32,
}

impl Word {
    pub const fn new(ad: u32, a: u32, bd: u32, b: u32) -> Self {
        Self { ad, a, bd, b }
    }

    pub const IDENTITY: Word = Word::new(0, 0, 0, 0);

    pub fn degree(&self) -> u32 {
        self.ad + self.a + self.bd + self.b
    }

    pub fn adjoint(&self) -> Word {
        Word::new(self.a, self.ad, self.b, self.bd)
    }
}

/// `a^n a†^m = sum_k k! C(n,k) C(m,k) a†^(m-k) a^(n-k)`; returns `(k, weight)`.
fn reorder_weights<C: Coeff>(n: u32, m: u32) -> Vec<(u32, C)> {
    let kmax = n.min(m);
    let mut out = Vec::with_capacity(kmax as usize + 1);
    // weight_k = n!/(n-k)! * m!/(m-k)! / k!, built incrementally
    let mut w = C::one();
    out.push((0, w.clone()));
    for k in 1..=kmax {
        w = w * C::from_i64(((n - k + 1) as i64) * ((m - k + 1) as i64));
        w = w.div_u64(k as u64);
        out.push((k, w.clone()));
    }
    out
}

/// Element of the algebra with coefficients in `C`.
#[derive(Clone, PartialEq)]
pub struct AlgebraElement<C: Coeff> {
    terms: BTreeMap<Word, C>,
}

/// Exact (complex-rational) element.
pub type ExactElement = AlgebraElement<Exact>;
/// Complex-float element.
pub type FloatElement = AlgebraElement<Complex64>;

impl<C: Coeff> Default for AlgebraElement<C> {
    fn default() -> Self {
        Self { terms: BTreeMap::new() }
    }
}

impl<C: Coeff> AlgebraElement<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::scalar(C::one())
    }

    pub fn scalar(c: C) -> Self {
        Self::term(c, Word::IDENTITY)
    }

    pub fn term(c: C, w: Word) -> Self {
        let mut out = Self::zero();
        out.add_term(w, c);
        out
    }

    pub fn a() -> Self {
        Self::term(C::one(), Word::new(0, 1, 0, 0))
    }
    pub fn ad() -> Self {
        Self::term(C::one(), Word::new(1, 0, 0, 0))
    }
    pub fn b() -> Self {
        Self::term(C::one(), Word::new(0, 0, 0, 1))
    }
    pub fn bd() -> Self {
        Self::term(C::one(), Word::new(0, 0, 1, 0))
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Word, C)>) -> Self {
        let mut out = Self::zero();
        for (w, c) in terms {
            out.add_term(w, c);
        }
        out
    }

    fn add_term(&mut self, w: Word, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&w) {
            Some(slot) => {
                let sum = slot.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&w);
                } else {
                    *slot = sum;
                }
            }
            None => {
                self.terms.insert(w, c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &C)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, w: Word) -> C {
        self.terms.get(&w).cloned().unwrap_or_else(C::zero)
    }

    /// Coefficient of the empty word.
    pub fn identity_coefficient(&self) -> C {
        self.coefficient(Word::IDENTITY)
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

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Word::degree).max()
    }

    pub fn scale(&self, c: &C) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, v)| (*w, v.clone() * c.clone())))
    }

    pub fn multiply(&self, rhs: &Self) -> Self {
        let mut out = Self::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &rhs.terms {
                let c12 = c1.clone() * c2.clone();
                let wa = reorder_weights::<C>(w1.a, w2.ad);
                let wb = reorder_weights::<C>(w1.b, w2.bd);
                for (ka, ca) in &wa {
                    for (kb, cb) in &wb {
                        let w = Word::new(
                            w1.ad + w2.ad - ka,
                            w1.a + w2.a - ka,
                            w1.bd + w2.bd - kb,
                            w1.b + w2.b - kb,
                        );
                        out.add_term(w, c12.clone() * ca.clone() * cb.clone());
                    }
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, c)| (w.adjoint(), c.conj())))
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.multiply(rhs) - &rhs.multiply(self)
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.multiply(self);
        }
        acc
    }

    /// `sum_{k <= order} A^k / k!` with the default order limit.
    pub fn exp_truncated(&self, order: u32) -> Result<Self> {
        self.exp_truncated_with_limit(order, DEFAULT_MAX_EXP_ORDER)
    }

    pub fn exp_truncated_with_limit(&self, order: u32, max_order: u32) -> Result<Self> {
        if order > max_order {
            return Err(Error::ResourceLimit(format!(
                "exp_truncated order {order} exceeds the configured maximum {max_order}"
            )));
        }
        let mut sum = Self::one();
        let mut power = Self::one();
        for k in 1..=order {
            power = power.multiply(self).scale(&C::one().div_u64(k as u64));
            sum = &sum + &power;
        }
        Ok(sum)
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> AlgebraElement<D> {
        AlgebraElement::from_terms(self.terms.iter().map(|(w, c)| (*w, f(c))))
    }

    pub fn to_float(&self) -> FloatElement {
        self.map_coeffs(|c| c.to_c64())
    }

    /// Largest coefficient modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other)
            .terms
            .values()
            .map(|c| c.to_c64().norm())
            .fold(0.0, f64::max)
    }
}

impl FloatElement {
    /// Drops terms with modulus at or below `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        Self::from_terms(self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(w, c)| (*w, *c)))
    }
}

impl<'a, C: Coeff> Add<&'a AlgebraElement<C>> for &'a AlgebraElement<C> {
    type Output = AlgebraElement<C>;
    fn add(self, rhs: &AlgebraElement<C>) -> AlgebraElement<C> {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(*w, c.clone());
        }
        out
    }
}

impl<'a, C: Coeff> Sub<&'a AlgebraElement<C>> for &'a AlgebraElement<C> {
    type Output = AlgebraElement<C>;
    fn sub(self, rhs: &AlgebraElement<C>) -> AlgebraElement<C> {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(*w, -c.clone());
        }
        out
    }
}

impl<'a, C: Coeff> Mul<&'a AlgebraElement<C>> for &'a AlgebraElement<C> {
    type Output = AlgebraElement<C>;
    fn mul(self, rhs: &AlgebraElement<C>) -> AlgebraElement<C> {
        self.multiply(rhs)
    }
}

impl<C: Coeff> Neg for &AlgebraElement<C> {
    type Output = AlgebraElement<C>;
    fn neg(self) -> AlgebraElement<C> {
        self.scale(&C::from_i64(-1))
    }
}

impl<C: Coeff> Add for AlgebraElement<C> {
    type Output = AlgebraElement<C>;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<C: Coeff> Sub for AlgebraElement<C> {
    type Output = AlgebraElement<C>;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl<C: Coeff> Mul for AlgebraElement<C> {
    type Output = AlgebraElement<C>;
    fn mul(self, rhs: Self) -> Self {
        self.multiply(&rhs)
    }
}

fn write_word(f: &mut fmt::Formatter<'_>, w: &Word, mut first: bool) -> fmt::Result {
    for (sym, pow) in [("ad", w.ad), ("a", w.a), ("bd", w.bd), ("b", w.b)] {
        if pow == 0 {
            continue;
        }
        if !first {
            f.write_str(" ")?;
        }
        first = false;
        if pow == 1 {
            f.write_str(sym)?;
        } else {
            write!(f, "{sym}^{pow}")?;
        }
    }
    Ok(())
}

impl<C: Coeff + CoeffDisplay> fmt::Display for AlgebraElement<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut words: Vec<_> = self.terms.keys().copied().collect();
        words.sort_by(|x, y| y.degree().cmp(&x.degree()).then(y.cmp(x)));
        for (idx, w) in words.iter().enumerate() {
            let (neg, mag, unit) = self.terms[w].split_sign();
            match (idx, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let show = !unit || *w == Word::IDENTITY;
            if show {
                f.write_str(&mag)?;
            }
            write_word(f, w, !show)?;
        }
        Ok(())
    }
}

impl<C: Coeff + CoeffDisplay> fmt::Debug for AlgebraElement<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlgebraElement({self})")
    }
}

/// `q, p, Q, P` expressed through the ladder generators at temperature `kT`:
/// `q = (a + a†) sqrt(kT)`, `p = (b + b†) sqrt(kT)`,
/// `Q = (a - a†) / (2 sqrt(kT))`, `P = (b - b†) / (2 sqrt(kT))`.
#[derive(Clone, Debug)]
pub struct CanonicalGenerators<C: Coeff + CoeffDisplay> {
    pub sqrt_kt: C,
    pub kt: C,
    pub q: AlgebraElement<C>,
    pub p: AlgebraElement<C>,
    pub big_q: AlgebraElement<C>,
    pub big_p: AlgebraElement<C>,
}

impl<C: Coeff + CoeffDisplay> CanonicalGenerators<C> {
    pub fn from_sqrt_kt(sqrt_kt: C) -> Self {
        let s = AlgebraElement::scalar(sqrt_kt.clone());
        let half_inv = AlgebraElement::scalar(sqrt_kt.recip().div_u64(2));
        let a = AlgebraElement::<C>::a();
        let ad = AlgebraElement::<C>::ad();
        let b = AlgebraElement::<C>::b();
        let bd = AlgebraElement::<C>::bd();
        Self {
            kt: sqrt_kt.clone() * sqrt_kt.clone(),
            q: &(&a + &ad) * &s,
            p: &(&b + &bd) * &s,
            big_q: &(&a - &ad) * &half_inv,
            big_p: &(&b - &bd) * &half_inv,
            sqrt_kt,
        }
    }

    /// `H = (q^2 + p^2) / 2`.
    pub fn hamiltonian(&self) -> AlgebraElement<C> {
        (&self.q.pow(2) + &self.p.pow(2)).scale(&C::one().div_u64(2))
    }

    /// Liouvillian `L = p Q - q P`.
    pub fn liouvillian(&self) -> AlgebraElement<C> {
        &(&self.p * &self.big_q) - &(&self.q * &self.big_p)
    }

    /// `F_f = f1 q + f2 p + 2 kT (f3 j Q + f4 j P)`.
    pub fn f_operator(&self, f: &FVector) -> AlgebraElement<C> {
        let two_kt_j = self.kt.clone() * C::from_i64(2) * C::imag_unit();
        let [f1, f2, f3, f4] = f.0;
        let lin = &self.q.scale(&C::from_f64(f1)) + &self.p.scale(&C::from_f64(f2));
        let imag = &self.big_q.scale(&C::from_f64(f3)) + &self.big_p.scale(&C::from_f64(f4));
        &lin + &imag.scale(&two_kt_j)
    }

    /// Parses text like `2 ad^2 a + j b` or `q^2 - Q P`, expanding `q, p, Q, P`
    /// with this session's `kT`.
    pub fn parse(&self, text: &str) -> Result<AlgebraElement<C>> {
        parse_expression_with::<AlgebraElement<C>>(text, self)
    }
}

impl CanonicalGenerators<Complex64> {
    pub fn new(kt: f64) -> Result<Self> {
        if !(kt > 0.0 && kt.is_finite()) {
            return Err(Error::invalid(format!("kT must be positive and finite, got {kt}")));
        }
        Ok(Self::from_sqrt_kt(Complex64::new(kt.sqrt(), 0.0)))
    }
}

impl CanonicalGenerators<Exact> {
    /// Exact generators at `kT = sqrt_kt^2`.
    pub fn exact(sqrt_kt: Rational) -> Self {
        Self::from_sqrt_kt(Exact::new(sqrt_kt, num_traits::Zero::zero()))
    }

    /// Exact generators at `kT = 1`.
    pub fn unit() -> Self {
        Self::from_sqrt_kt(Exact::one())
    }
}

impl<C: Coeff + CoeffDisplay> ParseTarget for AlgebraElement<C> {
    type Context = CanonicalGenerators<C>;
    fn constant(c: Exact) -> Self {
        AlgebraElement::scalar(C::from_exact(&c))
    }
    fn variable(ctx: &Self::Context, name: &str) -> Option<Self> {
        Some(match name {
            "a" => Self::a(),
            "ad" => Self::ad(),
            "b" => Self::b(),
            "bd" => Self::bd(),
            "q" => ctx.q.clone(),
            "p" => ctx.p.clone(),
            "Q" => ctx.big_q.clone(),
            "P" => ctx.big_p.clone(),
            _ => return None,
        })
    }
    fn add(self, other: Self) -> Self {
        &self + &other
    }
    fn sub(self, other: Self) -> Self {
        &self - &other
    }
    fn mul(self, other: Self) -> Self {
        self.multiply(&other)
    }
}

/// Real 4-vector `f = (f1, f2, f3, f4)` labelling `F_f`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FVector(pub [f64; 4]);

impl FVector {
    pub fn new(f1: f64, f2: f64, f3: f64, f4: f64) -> Self {
        Self([f1, f2, f3, f4])
    }

    /// `(f, g) = f1 g1 + f2 g2 + f3 g3 + f4 g4`.
    pub fn dot(&self, g: &FVector) -> f64 {
        self.0.iter().zip(g.0.iter()).map(|(x, y)| x * y).sum()
    }

    /// `omega(f, g) = 2j [f3 g1 - f1 g3 + f4 g2 - f2 g4]`.
    pub fn omega(&self, g: &FVector) -> Complex64 {
        let [f1, f2, f3, f4] = self.0;
        let [g1, g2, g3, g4] = g.0;
        Complex64::new(0.0, 2.0 * (f3 * g1 - f1 * g3 + f4 * g2 - f2 * g4))
    }

    pub fn scaled(&self, s: f64) -> FVector {
        FVector(self.0.map(|x| x * s))
    }

    pub fn plus(&self, g: &FVector) -> FVector {
        FVector([self.0[0] + g.0[0], self.0[1] + g.0[1], self.0[2] + g.0[2], self.0[3] + g.0[3]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{exact_real, rational};

    type E = ExactElement;

    fn unit() -> CanonicalGenerators<Exact> {
        CanonicalGenerators::unit()
    }

    #[test]
    fn ladder_reorders_to_normal_form() {
        let got = E::a().multiply(&E::ad());
        let want = &E::term(Exact::one(), Word::new(1, 1, 0, 0)) + &E::one();
        assert_eq!(got, want);
        assert_eq!(E::b().commutator(&E::bd()), E::one());
        assert!(E::a().commutator(&E::bd()).is_zero());
        assert!(E::ad().commutator(&E::b()).is_zero());
    }

    #[test]
    fn higher_reorder_matches_hand_expansion() {
        // a^2 a†^2 = a†^2 a^2 + 4 a† a + 2
        let got = E::a().pow(2).multiply(&E::ad().pow(2));
        let want = E::from_terms([
            (Word::new(2, 2, 0, 0), Exact::one()),
            (Word::new(1, 1, 0, 0), Exact::from_i64(4)),
            (Word::IDENTITY, Exact::from_i64(2)),
        ]);
        assert_eq!(got, want);
    }

    #[test]
    fn canonical_commutators() {
        let g = unit();
        assert!(g.q.commutator(&g.p).is_zero());
        assert_eq!(g.big_q.commutator(&g.q), E::one());
        assert_eq!(g.big_p.commutator(&g.p), E::one());
        let g4 = CanonicalGenerators::exact(rational(2, 1));
        assert_eq!(g4.big_q.commutator(&g4.q), E::one());
        assert_eq!(g4.kt, Exact::from_i64(4));
    }

    #[test]
    fn adjoint_examples() {
        let g = unit();
        let jq = g.big_q.scale(&Exact::imag_unit());
        assert_eq!(jq.adjoint(), jq);
        let qp = g.q.multiply(&g.p);
        assert_eq!(qp.adjoint(), g.p.multiply(&g.q));
        assert_eq!(qp.adjoint(), qp);
        assert_eq!(E::a().adjoint(), E::ad());
        assert_eq!(g.q.adjoint(), g.q);
        assert_eq!(g.big_q.adjoint(), -&g.big_q);
        assert_eq!(g.big_p.adjoint(), -&g.big_p);
    }

    #[test]
    fn liouvillian_is_anti_self_adjoint() {
        let g = unit();
        let l = g.liouvillian();
        assert_eq!(l.adjoint(), -&l);
    }

    #[test]
    fn f_commutator_is_kt_omega() {
        let g = CanonicalGenerators::new(1.7).unwrap();
        let f = FVector::new(1.0, 0.0, 0.0, 0.0);
        let h = FVector::new(0.0, 0.0, 1.0, 0.0);
        let c = g.f_operator(&f).commutator(&g.f_operator(&h)).prune(1e-14);
        let expect = FloatElement::scalar(Complex64::new(0.0, -2.0 * 1.7));
        assert!(c.max_abs_diff(&expect) < 1e-12, "{c}");
        assert!((f.omega(&h) - Complex64::new(0.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn hamiltonian_commutator_with_a() {
        // At kT = 1, H = (q^2+p^2)/2 has a-part (a + a†)^2/2, so [H, a] = -(a + a†).
        let g = unit();
        let c = g.hamiltonian().commutator(&E::a());
        assert_eq!(c, -&(&E::a() + &E::ad()));
        // Number operator a†a: [a†a, a] = -a.
        let n = E::ad().multiply(&E::a());
        assert_eq!(n.commutator(&E::a()), -&E::a());
        let x = g.q.multiply(&g.big_p);
        assert!(x.commutator(&x).is_zero());
    }

    #[test]
    fn exp_truncated_examples() {
        assert_eq!(E::zero().exp_truncated(5).unwrap(), E::one());
        let lam = exact_real(3, 7);
        let x = E::ad().scale(&lam);
        let want = &(&E::one() + &x) + &E::ad().pow(2).scale(&(lam.clone() * lam.clone() * exact_real(1, 2)));
        assert_eq!(x.exp_truncated(2).unwrap(), want);
        assert!(matches!(x.exp_truncated(9), Err(Error::ResourceLimit(_))));
        assert!(x.exp_truncated_with_limit(9, 12).is_ok());
    }

    #[test]
    fn parse_and_display() {
        let g = unit();
        let x = g.parse("2 ad^2 a + j b").unwrap();
        assert_eq!(x.to_string(), "2 ad^2 a + j b");
        // Written order matters: a ad = ad a + 1.
        assert_eq!(g.parse("a ad").unwrap(), g.parse("ad a + 1").unwrap());
        assert_eq!(g.parse("Q q - q Q").unwrap(), E::one());
        assert_eq!(g.parse(&x.to_string()).unwrap(), x);
        assert!(g.parse("a + c").is_err());
        let gf = CanonicalGenerators::new(4.0).unwrap();
        let q = gf.parse("q").unwrap();
        assert!((q.coefficient(Word::new(1, 0, 0, 0)) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }
}
