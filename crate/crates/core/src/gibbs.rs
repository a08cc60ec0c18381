//! Gibbs equilibrium state of the harmonic oscillator as a linear functional
//! on the ladder algebra, its closed-form moments and generating functions,
//! and quadrature moments for general polynomial Hamiltonians.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase_space::PhasePolynomial;
use crate::quadrature::{gauss_legendre_on, pairwise_sum};
use crate::scalar::{Coeff, Rational};
use crate::weyl::{AlgebraElement, CanonicalGenerators, FVector, FloatElement};

/// The Gibbs state at temperature `kT` (energy units).
///
/// On a normal-ordered element the state keeps only the empty-word
/// coefficient: `rho(a† X) = rho(X a) = 0` (same for `b`), `rho(1) = 1`.
/// `kT` enters through how `q, p, Q, P` are written in the ladder generators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GibbsState {
    kt: f64,
}

impl GibbsState {
    pub fn new(kt: f64) -> Result<Self> {
        if !(kt > 0.0 && kt.is_finite()) {
            return Err(Error::invalid(format!("kT must be positive and finite, got {kt}")));
        }
        Ok(Self { kt })
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    /// Inverse temperature `1/kT`.
    pub fn beta(&self) -> f64 {
        1.0 / self.kt
    }

    pub fn generators(&self) -> CanonicalGenerators<Complex64> {
        CanonicalGenerators::from_sqrt_kt(Complex64::new(self.kt.sqrt(), 0.0))
    }

    pub fn eval<C: Coeff>(&self, a: &AlgebraElement<C>) -> C {
        eval(a)
    }

    pub fn char_function(&self, lambda: f64, mu: f64) -> f64 {
        char_function(lambda, mu, self.kt)
    }

    pub fn generating_function(&self, pairs: &[(f64, FVector)]) -> Complex64 {
        generating_function(pairs, self.kt)
    }
}

/// `rho(A)` for `A` in canonical normal-ordered form.
pub fn eval<C: Coeff>(a: &AlgebraElement<C>) -> C {
    a.identity_coefficient()
}

/// `(2m)! / (2^m m!) = (2m - 1)!!`
fn double_factorial_odd(m: u32) -> u64 {
    (1..=m as u64).map(|k| 2 * k - 1).product()
}

/// `rho(q^{2m} p^{2n}) = (kT)^{m+n} (2m)!/(2^m m!) (2n)!/(2^n n!)`.
pub fn moment_qp(m: u32, n: u32, kt: f64) -> f64 {
    kt.powi((m + n) as i32) * double_factorial_odd(m) as f64 * double_factorial_odd(n) as f64
}

/// Exact rational version of [`moment_qp`].
pub fn moment_qp_exact(m: u32, n: u32, kt: &Rational) -> Rational {
    let df = Rational::from_integer(BigInt::from(double_factorial_odd(m)) * BigInt::from(double_factorial_odd(n)));
    num_traits::pow(kt.clone(), (m + n) as usize) * df
}

/// `rho(q^m p^n)` for raw exponents; zero when either is odd.
pub fn raw_moment(m: u32, n: u32, kt: f64) -> f64 {
    if m % 2 == 1 || n % 2 == 1 {
        0.0
    } else {
        moment_qp(m / 2, n / 2, kt)
    }
}

pub fn raw_moment_exact(m: u32, n: u32, kt: &Rational) -> Rational {
    if m % 2 == 1 || n % 2 == 1 {
        Rational::zero()
    } else {
        moment_qp_exact(m / 2, n / 2, kt)
    }
}

/// `rho(exp(j lambda q + j mu p)) = exp(-kT (lambda^2 + mu^2) / 2)`.
pub fn char_function(lambda: f64, mu: f64, kt: f64) -> f64 {
    (-kt * (lambda * lambda + mu * mu) / 2.0).exp()
}

/// Exponent of the multi-factor generating function
/// `rho(e^{j l1 F_f1} ... e^{j ln F_fn})`:
/// `-kT (sum l_i f_i, sum l_j f_j)/2 - kT sum_{i<j} omega(f_i, f_j) l_i l_j / 2`.
pub fn generating_exponent(pairs: &[(f64, FVector)], kt: f64) -> Complex64 {
    let total = pairs
        .iter()
        .fold(FVector::new(0.0, 0.0, 0.0, 0.0), |acc, (l, f)| acc.plus(&f.scaled(*l)));
    let mut omega_sum = Complex64::new(0.0, 0.0);
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            omega_sum += pairs[i].1.omega(&pairs[j].1) * (pairs[i].0 * pairs[j].0);
        }
    }
    Complex64::new(-kt * total.dot(&total) / 2.0, 0.0) - omega_sum * (kt / 2.0)
}

pub fn generating_function(pairs: &[(f64, FVector)], kt: f64) -> Complex64 {
    generating_exponent(pairs, kt).exp()
}

/// Multi-index -> coefficient, truncated at a total degree.
pub type Series = BTreeMap<Vec<u32>, Complex64>;

fn series_mul(x: &Series, y: &Series, order: u32) -> Series {
    let mut out = Series::new();
    for (ix, cx) in x {
        let dx: u32 = ix.iter().sum();
        for (iy, cy) in y {
            let dy: u32 = iy.iter().sum();
            if dx + dy > order {
                continue;
            }
            let idx: Vec<u32> = ix.iter().zip(iy).map(|(a, b)| a + b).collect();
            *out.entry(idx).or_insert(Complex64::new(0.0, 0.0)) += cx * cy;
        }
    }
    out
}

/// Taylor coefficients in `(l_1..l_n)` of the closed-form generating function
/// for factors `F_{f_i}`, up to total degree `order`.
pub fn generating_function_series(fs: &[FVector], kt: f64, order: u32) -> Series {
    let n = fs.len();
    let unit = |i: usize, j: usize| {
        let mut idx = vec![0u32; n];
        idx[i] += 1;
        idx[j] += 1;
        idx
    };
    // exponent as a quadratic series
    let mut quad = Series::new();
    for i in 0..n {
        *quad.entry(unit(i, i)).or_insert(Complex64::new(0.0, 0.0)) += -kt * fs[i].dot(&fs[i]) / 2.0;
        for j in (i + 1)..n {
            let c = Complex64::new(-kt * fs[i].dot(&fs[j]), 0.0) - fs[i].omega(&fs[j]) * (kt / 2.0);
            *quad.entry(unit(i, j)).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
    }
    let mut result = Series::new();
    result.insert(vec![0; n], Complex64::new(1.0, 0.0));
    let mut power = result.clone();
    for k in 1..=(order / 2) {
        power = series_mul(&power, &quad, order);
        for c in power.values_mut() {
            *c /= k as f64;
        }
        for (idx, c) in &power {
            *result.entry(idx.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
    }
    result
}

/// All multi-indices over `n` variables with total degree `<= order`.
pub fn multi_indices(n: usize, order: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, order, &mut Vec::with_capacity(n), &mut out);
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct GenfunCoefficient {
    pub index: Vec<u32>,
    pub closed_form: Complex64,
    pub symbolic: Complex64,
    pub abs_error: f64,
}

/// Compares the Taylor coefficients of the closed-form generating function
/// with `rho(prod_i (j F_i)^{k_i} / k_i!)` evaluated symbolically.
pub fn genfun_taylor_check(fs: &[FVector], kt: f64, order: u32) -> Result<Vec<GenfunCoefficient>> {
    let gens = CanonicalGenerators::new(kt)?;
    let j = Complex64::new(0.0, 1.0);
    // powers[i][k] = (j F_i)^k / k!
    let powers: Vec<Vec<FloatElement>> = fs
        .iter()
        .map(|f| {
            let x = gens.f_operator(f).scale(&j);
            let mut out = vec![FloatElement::one()];
            for k in 1..=order {
                let next = out[k as usize - 1].multiply(&x).scale(&Complex64::new(1.0 / k as f64, 0.0));
                out.push(next);
            }
            out
        })
        .collect();
    let closed = generating_function_series(fs, kt, order);
    let rows = multi_indices(fs.len(), order)
        .into_iter()
        .map(|idx| {
            let product = idx
                .iter()
                .enumerate()
                .fold(FloatElement::one(), |acc, (i, &k)| acc.multiply(&powers[i][k as usize]));
            let symbolic = eval(&product);
            let closed_form = closed.get(&idx).copied().unwrap_or(Complex64::new(0.0, 0.0));
            GenfunCoefficient {
                abs_error: (symbolic - closed_form).norm(),
                index: idx,
                closed_form,
                symbolic,
            }
        })
        .collect();
    Ok(rows)
}

/// Quadrature grid: tensor-product Gauss-Legendre on `[-half_width, half_width]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    pub half_width: f64,
    pub nodes: usize,
    /// Largest admissible relative Gibbs weight on the square's boundary.
    pub boundary_tol: f64,
}

impl QuadratureSpec {
    pub const DEFAULT_NODES: usize = 201;

    /// `+-8 sqrt(kT) * scale`, 201 nodes per axis.
    pub fn default_for(kt: f64, scale: f64) -> Self {
        Self {
            half_width: 8.0 * kt.sqrt() * scale,
            nodes: Self::DEFAULT_NODES,
            boundary_tol: 1e-12,
        }
    }
}

/// `P(q, p) = exp(-H(q, p)/kT) / N` for a polynomial Hamiltonian.
#[derive(Clone, Debug)]
pub struct GeneralGibbsDensity {
    hamiltonian: PhasePolynomial,
    kt: f64,
    quadrature: QuadratureSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    h_min: f64,
    normalization: f64,
}

impl GeneralGibbsDensity {
    pub fn new(hamiltonian: PhasePolynomial, kt: f64, quadrature: QuadratureSpec) -> Result<Self> {
        if !(kt > 0.0 && kt.is_finite()) {
            return Err(Error::invalid(format!("kT must be positive and finite, got {kt}")));
        }
        if !hamiltonian.is_real() {
            return Err(Error::invalid("Hamiltonian must have real coefficients"));
        }
        if quadrature.nodes < 2 || !(quadrature.half_width > 0.0) {
            return Err(Error::invalid("quadrature needs >= 2 nodes and a positive range"));
        }
        let l = quadrature.half_width;
        let (nodes, weights) = gauss_legendre_on(quadrature.nodes, -l, l);

        let mut h_min = f64::INFINITY;
        for &q in &nodes {
            for &p in &nodes {
                let h = hamiltonian.eval_real(q, p);
                if !h.is_finite() {
                    return Err(Error::Divergence(format!("H({q}, {p}) is not finite")));
                }
                h_min = h_min.min(h);
            }
        }
        // Boundary: the Gibbs weight on the square's edges must be negligible.
        for t in nodes.iter().copied().chain([-l, l]) {
            for (q, p) in [(t, -l), (t, l), (-l, t), (l, t)] {
                h_min = h_min.min(hamiltonian.eval_real(q, p));
            }
        }
        let mut boundary_weight = 0.0f64;
        for t in nodes.iter().copied().chain([-l, l]) {
            for (q, p) in [(t, -l), (t, l), (-l, t), (l, t)] {
                let w = (-(hamiltonian.eval_real(q, p) - h_min) / kt).exp();
                boundary_weight = boundary_weight.max(w);
            }
        }
        if !(boundary_weight <= quadrature.boundary_tol) {
            return Err(Error::Divergence(format!(
                "relative Gibbs weight {boundary_weight:e} on the quadrature boundary exceeds {:e}",
                quadrature.boundary_tol
            )));
        }
        let mut out = Self {
            hamiltonian,
            kt,
            quadrature,
            nodes,
            weights,
            h_min,
            normalization: 1.0,
        };
        let z = out.raw_integral(0, 0);
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Divergence(format!("normalization integral is {z}")));
        }
        out.normalization = z;
        Ok(out)
    }

    pub fn with_default_quadrature(hamiltonian: PhasePolynomial, kt: f64) -> Result<Self> {
        Self::new(hamiltonian, kt, QuadratureSpec::default_for(kt, 1.0))
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature
    }

    /// `N = integral of exp(-H/kT)`.
    pub fn normalization(&self) -> f64 {
        self.normalization * (-self.h_min / self.kt).exp()
    }

    pub fn density(&self, q: f64, p: f64) -> f64 {
        (-(self.hamiltonian.eval_real(q, p) - self.h_min) / self.kt).exp() / self.normalization
    }

    /// Unnormalized integral of `q^m p^n exp(-(H - H_min)/kT)`; rows are
    /// summed in parallel, then combined pairwise in row order.
    fn raw_integral(&self, m: u32, n: u32) -> f64 {
        let rows: Vec<f64> = self
            .nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(&q, &wq)| {
                let terms: Vec<f64> = self
                    .nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(&p, &wp)| {
                        let h = self.hamiltonian.eval_real(q, p);
                        wp * q.powi(m as i32) * p.powi(n as i32) * (-(h - self.h_min) / self.kt).exp()
                    })
                    .collect();
                wq * pairwise_sum(&terms)
            })
            .collect();
        pairwise_sum(&rows)
    }

    /// `integral q^m p^n exp(-H/kT)/N dq dp`.
    pub fn moment(&self, m: u32, n: u32) -> f64 {
        self.raw_integral(m, n) / self.normalization
    }

    /// Normalization of the density on the grid (should be 1).
    pub fn total_mass(&self) -> f64 {
        self.moment(0, 0)
    }
}

pub fn general_hamiltonian_moment(gd: &GeneralGibbsDensity, m: u32, n: u32) -> f64 {
    gd.moment(m, n)
}

/// One row of the moments table: `rho(q^{2m} p^{2n})` by closed form and by
/// exact symbolic evaluation of the normal-ordered product.
#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub m: u32,
    pub n: u32,
    pub closed_form: f64,
    pub symbolic_eval: f64,
    pub abs_error: f64,
}

/// Rows for all `m + n <= max_degree`. Exact arithmetic is used when `kT` is a
/// perfect rational square (`kt_sqrt_exact`), floats otherwise.
pub fn moments_table(kt: f64, max_degree: u32) -> Result<Vec<MomentRow>> {
    let gens = CanonicalGenerators::new(kt)?;
    let exact = exact_sqrt(kt).map(CanonicalGenerators::exact);
    let mut rows = Vec::new();
    for total in 0..=max_degree {
        for m in 0..=total {
            let n = total - m;
            let closed_form = moment_qp(m, n, kt);
            let symbolic_eval = match &exact {
                Some(g) => {
                    let v = eval(&g.q.pow(2 * m).multiply(&g.p.pow(2 * n)));
                    crate::scalar::rational_to_f64(&v.re)
                }
                None => eval(&gens.q.pow(2 * m).multiply(&gens.p.pow(2 * n))).re,
            };
            rows.push(MomentRow {
                m,
                n,
                closed_form,
                symbolic_eval,
                abs_error: (closed_form - symbolic_eval).abs(),
            });
        }
    }
    Ok(rows)
}

/// `Some(r)` with `r^2 == x` exactly when `x` is the square of a short binary
/// rational.
pub fn exact_sqrt(x: f64) -> Option<Rational> {
    let s = x.sqrt();
    if s * s != x {
        return None;
    }
    let r = Rational::from_float(s)?;
    if r.denom().bits() > 32 || r.numer().bits() > 32 {
        return None;
    }
    (r.clone() * r.clone() == Rational::from_float(x)?).then_some(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational, Exact};
    use crate::weyl::ExactElement;

    #[test]
    fn eval_examples_at_general_kt() {
        let kt = 2.5;
        let g = CanonicalGenerators::new(kt).unwrap();
        assert!((eval(&g.q.pow(2)).re - kt).abs() < 1e-12);
        assert!((eval(&g.q.pow(4)).re - 3.0 * kt * kt).abs() < 1e-12);
        assert!(eval(&g.q.multiply(&g.p)).norm() < 1e-15);
        assert_eq!(eval(&FloatElement::one()), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn eval_exact_at_kt_four() {
        let g = CanonicalGenerators::exact(rational(2, 1));
        assert_eq!(eval(&g.q.pow(2)), Exact::from_i64(4));
        assert_eq!(eval(&g.q.pow(4)), Exact::from_i64(48));
        // <Q^2> = -1/(4 kT) since Q is anti-self-adjoint
        assert_eq!(eval(&g.big_q.pow(2)), Exact::new(rational(-1, 16), Rational::zero()));
    }

    #[test]
    fn moment_examples() {
        assert_eq!(moment_qp(0, 0, 1.7), 1.0);
        assert_eq!(moment_qp(1, 1, 2.0), 4.0);
        assert_eq!(moment_qp(2, 0, 1.0), 3.0);
        assert_eq!(moment_qp(3, 1, 1.0), 15.0);
        assert_eq!(raw_moment(3, 2, 1.0), 0.0);
        assert_eq!(moment_qp_exact(2, 1, &rational(1, 2)), rational(3, 8));
    }

    #[test]
    fn char_function_examples() {
        assert_eq!(char_function(0.0, 0.0, 3.0), 1.0);
        assert!((char_function(0.7, 0.0, 2.0) - (-0.49f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn char_function_matches_truncated_exponential() {
        // rho(exp_8(j l q + j m p)) agrees with the Gaussian to O(x^10)
        let g = CanonicalGenerators::new(1.3).unwrap();
        let (l, m) = (0.11, -0.07);
        let x = (&g.q.scale(&Complex64::new(0.0, l)) + &g.p.scale(&Complex64::new(0.0, m))).exp_truncated(8).unwrap();
        let sym = eval(&x);
        let closed = char_function(l, m, 1.3);
        // first omitted term of the exponential series: x^5/5!
        let x = 1.3 * (l * l + m * m) / 2.0;
        let bound = 2.0 * x.powi(5) / 120.0;
        assert!((sym.re - closed).abs() < bound && sym.im.abs() < 1e-15, "{sym} vs {closed}");
    }

    #[test]
    fn generating_function_examples() {
        assert_eq!(generating_function(&[], 1.0), Complex64::new(1.0, 0.0));
        let f = FVector::new(1.0, 0.0, 0.0, 0.0);
        let z = generating_function(&[(0.8, f)], 1.5);
        assert!((z.re - (-0.64 * 1.5 / 2.0f64).exp()).abs() < 1e-15 && z.im == 0.0);
        // f3 = f4 = 0, one factor: equals the (q, p) characteristic function
        let fqp = FVector::new(0.3, -0.4, 0.0, 0.0);
        let z = generating_function(&[(2.0, fqp)], 0.9);
        assert!((z.re - char_function(0.6, -0.8, 0.9)).abs() < 1e-15);
    }

    #[test]
    fn two_factor_phase() {
        let kt = 1.2;
        let (l1, l2) = (0.5, -0.3);
        let f = FVector::new(1.0, 0.0, 0.0, 0.0);
        let g = FVector::new(0.0, 0.0, 1.0, 0.0);
        let z = generating_function(&[(l1, f), (l2, g)], kt);
        let modulus = (-kt * (l1 * l1 + l2 * l2) / 2.0).exp();
        assert!((z.norm() - modulus).abs() < 1e-15);
        // omega(f, g) = -2j gives phase +kT l1 l2
        assert!((z.arg() - kt * l1 * l2).abs() < 1e-14);
    }

    #[test]
    fn taylor_coefficients_match_symbolic_evaluation() {
        let fs = [FVector::new(1.0, 0.0, 0.0, 0.0), FVector::new(0.0, 0.0, 1.0, 0.0)];
        let rows = genfun_taylor_check(&fs, 1.0, 6).unwrap();
        assert_eq!(rows.len(), 28);
        for r in rows {
            assert!(r.abs_error < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn unweighted_omega_sum_would_fail_the_oracle() {
        // The omega term carries l_i l_j; dropping the weights breaks order 2.
        let fs = [FVector::new(1.0, 0.0, 0.0, 0.0), FVector::new(0.0, 0.0, 1.0, 0.0)];
        let rows = genfun_taylor_check(&fs, 1.0, 2).unwrap();
        let mixed = rows.iter().find(|r| r.index == vec![1, 1]).unwrap();
        // symbolic: rho(jF_f jF_g) = -rho(F_f F_g) = -(kT (f,g) + kT omega/2)
        assert!((mixed.symbolic - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn exact_positivity_of_small_elements() {
        let g = CanonicalGenerators::<Exact>::unit();
        let x: ExactElement = g.parse("q^2 - 2 Q p + 3 j P q").unwrap();
        let v = eval(&x.adjoint().multiply(&x));
        assert!(v.im.is_zero());
        assert!(v.re >= Rational::zero());
    }

    #[test]
    fn harmonic_density_reproduces_closed_form() {
        let h: PhasePolynomial = "(q^2 + p^2)/2".parse().unwrap();
        let gd = GeneralGibbsDensity::with_default_quadrature(h, 1.0).unwrap();
        assert!((gd.total_mass() - 1.0).abs() < 1e-12);
        assert!((gd.moment(2, 0) - 1.0).abs() < 1e-8);
        assert!((gd.moment(2, 2) - 1.0).abs() < 1e-8);
        assert!((gd.moment(4, 0) - 3.0).abs() < 1e-8);
        assert!((gd.normalization() - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn odd_moments_vanish_for_even_hamiltonian() {
        let h: PhasePolynomial = "(q^2 + p^2)/2 + 1/10 q^4".parse().unwrap();
        assert!(h.is_even_in_q());
        let gd = GeneralGibbsDensity::with_default_quadrature(h, 1.0).unwrap();
        assert!(gd.moment(1, 0).abs() < 1e-10);
        assert!(gd.moment(3, 2).abs() < 1e-10);
    }

    #[test]
    fn unbounded_hamiltonian_is_rejected() {
        let h: PhasePolynomial = "p^2/2 - q^2".parse().unwrap();
        let err = GeneralGibbsDensity::with_default_quadrature(h, 1.0).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err}");
        // too narrow a square leaves weight on the boundary
        let h: PhasePolynomial = "(q^2 + p^2)/2".parse().unwrap();
        let spec = QuadratureSpec { half_width: 2.0, nodes: 41, boundary_tol: 1e-12 };
        assert!(matches!(GeneralGibbsDensity::new(h, 1.0, spec), Err(Error::Divergence(_))));
    }

    #[test]
    fn moments_table_is_exact_at_unit_temperature() {
        let rows = moments_table(1.0, 4).unwrap();
        let r20 = rows.iter().find(|r| r.m == 2 && r.n == 0).unwrap();
        assert_eq!(r20.closed_form, 3.0);
        assert_eq!(r20.symbolic_eval, 3.0);
        assert!(rows.iter().all(|r| r.abs_error == 0.0));
        assert_eq!(exact_sqrt(4.0), Some(rational(2, 1)));
        assert_eq!(exact_sqrt(2.0), None);
    }
}
